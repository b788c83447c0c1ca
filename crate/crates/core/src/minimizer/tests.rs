use super::*;
use crate::assembly::{interpolate, linear_term};
use crate::density::{ElasticParams, NeoHookean, PLaplaceParams, PLaplacian};
use crate::gradient::tests::stiffness_oracle;
use crate::mesh::{generate_bar_mesh_3d, generate_lshape_mesh_2d, lshape_boundary};
use crate::patches::build_patches;
use crate::sparse::CsrMatrix;

/// `½ xᵀAx − cᵀx` for a sparse symmetric `A`.
struct Quadratic {
    a: CsrMatrix,
    c: Vec<f64>,
    pattern: SparsityPattern,
}

impl Quadratic {
    fn tridiagonal(n: usize, diag: f64, off: f64) -> Self {
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        for i in 0..n {
            col_idx.extend((i.saturating_sub(1)..=(i + 1).min(n - 1)).collect::<Vec<_>>());
            row_ptr.push(col_idx.len());
        }
        let pattern = SparsityPattern { n, row_ptr: row_ptr.clone(), col_idx: col_idx.clone() };
        let mut a = CsrMatrix::from_pattern(n, row_ptr, col_idx);
        for i in 0..n {
            a.add(i, i, diag + i as f64 * 0.1);
            if i + 1 < n {
                a.add(i, i + 1, off);
                a.add(i + 1, i, off);
            }
        }
        let c = (0..n).map(|i| (i as f64).sin()).collect();
        Quadratic { a, c, pattern }
    }
}

impl Objective for Quadratic {
    fn value(&self, x: &[f64]) -> Result<f64> {
        let ax = self.a.matvec(x);
        Ok(0.5 * x.iter().zip(&ax).map(|(a, b)| a * b).sum::<f64>() - x.iter().zip(&self.c).map(|(a, b)| a * b).sum::<f64>())
    }
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.a.matvec(x).iter().zip(&self.c).map(|(a, b)| a - b).collect())
    }
    fn sparsity(&self) -> Option<&SparsityPattern> {
        Some(&self.pattern)
    }
}

struct Rosenbrock;

impl Objective for Rosenbrock {
    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2))
    }
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![-400.0 * x[0] * (x[1] - x[0] * x[0]) - 2.0 * (1.0 - x[0]), 200.0 * (x[1] - x[0] * x[0])])
    }
}

/// `½‖x‖²`, infinite outside the unit ball around the origin shifted by 5.
struct Bounded;

impl Objective for Bounded {
    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(if norm2(x) > 5.0 { f64::INFINITY } else { 0.5 * x.iter().map(|v| v * v).sum::<f64>() })
    }
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(x.to_vec())
    }
}

#[test]
fn unit_quadratic_converges_in_two_steps() {
    let mut q = Quadratic { c: vec![0.0; 10], ..Quadratic::tridiagonal(10, 1.0, 0.0) };
    q.a.values.iter_mut().for_each(|x| *x = if *x != 0.0 { 1.0 } else { 0.0 });
    let x0: Vec<f64> = (0..10).map(|i| 0.1 * i as f64 - 0.3).collect();
    let out = minimize(&q, &x0, &SolveOptions::default()).unwrap();
    assert!(out.iters <= 2);
    assert!(inf_norm(&out.x) < 1e-10);
    assert_eq!(out.reason, StopReason::Gradient);
}

#[test]
fn differenced_products_match_hessian() {
    let q = Quadratic::tridiagonal(30, 4.0, -1.0);
    let x: Vec<f64> = (0..30).map(|i| (i as f64 * 0.7).cos()).collect();
    let d: Vec<f64> = (0..30).map(|i| (i as f64 * 1.3).sin()).collect();
    let hv = differenced_hvp(&q, &x, &d, f64::EPSILON.sqrt()).unwrap();
    let exact = q.a.matvec(&d);
    let err = hv.iter().zip(&exact).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(err <= 1e-6 * inf_norm(&exact));
}

#[test]
fn colored_hessian_recovers_sparse_matrix() {
    let q = Quadratic::tridiagonal(25, 4.0, -1.0);
    let coloring = distance2_coloring(&q.pattern);
    assert_eq!(color_count(&coloring), 3);
    let x = vec![0.3; 25];
    let h = colored_hessian(&q, &x, &q.pattern, &coloring, 1e-4).unwrap();
    for (a, b) in h.values.iter().zip(&q.a.values) {
        assert!((a - b).abs() < 1e-8);
    }
}

#[test]
fn solvers_agree_on_quadratics() {
    let q = Quadratic::tridiagonal(40, 4.0, -1.0);
    let x0 = vec![0.0; 40];
    let exact_opts = SolveOptions { tol_g: 1e-10, tol_f: 1e-14, tol_step: 1e-14, ..Default::default() };
    let modes = [
        SolveOptions { ..exact_opts.clone() },
        SolveOptions { hessian: HessianMode::Colored { jacobi: false }, ..exact_opts.clone() },
        SolveOptions { hessian: HessianMode::Colored { jacobi: true }, ..exact_opts.clone() },
        SolveOptions { solver: Solver::Lbfgs, ..exact_opts.clone() },
    ];
    let results: Vec<_> = modes.iter().map(|o| minimize(&q, &x0, o).unwrap()).collect();
    for r in &results[1..] {
        assert!((r.f - results[0].f).abs() <= 1e-9 * results[0].f.abs());
    }
}

#[test]
fn rosenbrock_from_the_classic_start() {
    for solver in [Solver::TrustRegion, Solver::Lbfgs] {
        let opts = SolveOptions { solver, tol_g: 1e-9, tol_f: 1e-16, tol_step: 1e-12, ..Default::default() };
        let out = minimize(&Rosenbrock, &[-1.2, 1.0], &opts).unwrap();
        assert!((out.x[0] - 1.0).abs() < 1e-5 && (out.x[1] - 1.0).abs() < 1e-5, "{solver:?}: {:?}", out.x);
        assert!(out.history.windows(2).all(|w| w[1] <= w[0]));
    }
}

#[test]
fn infinite_trial_values_shrink_the_radius() {
    let opts = SolveOptions { initial_radius: 100.0, ..Default::default() };
    let out = minimize(&Bounded, &[4.0, -2.0], &opts).unwrap();
    assert!(inf_norm(&out.x) < 1e-6);
    let opts = SolveOptions { solver: Solver::Lbfgs, initial_radius: 100.0, ..Default::default() };
    let out = minimize(&Bounded, &[4.0, -2.0], &opts).unwrap();
    assert!(inf_norm(&out.x) < 1e-6);
}

#[test]
fn inadmissible_start_is_rejected() {
    assert!(matches!(minimize(&Bounded, &[10.0, 0.0], &SolveOptions::default()), Err(Error::InvalidStart(_))));
    let bad = SolveOptions { tol_g: 0.0, ..Default::default() };
    assert!(minimize(&Bounded, &[1.0, 0.0], &bad).is_err());
}

fn lshape(level: usize) -> Mesh {
    let spec = DirichletSpec::new().zero_region("boundary", lshape_boundary, 1);
    generate_lshape_mesh_2d(level).unwrap().with_dirichlet(&spec, 1).unwrap()
}

/// Energy of the discrete p=2 problem by a dense Cholesky solve: `−½ b·u`.
fn linear_solve_energy(mesh: &Mesh, load: &LinearLoad) -> f64 {
    let k = stiffness_oracle(mesh);
    let dofs = &mesh.partition.dofs_minim;
    let n = dofs.len();
    let mut a = nalgebra::DMatrix::<f64>::zeros(n, n);
    for (r, &i) in dofs.iter().enumerate() {
        for (c, &j) in dofs.iter().enumerate() {
            a[(r, c)] = k.get(i, j);
        }
    }
    let b = nalgebra::DVector::from_iterator(n, dofs.iter().map(|&i| load.b.values[i]));
    let u = a.cholesky().expect("stiffness is positive definite").solve(&b);
    -0.5 * b.dot(&u)
}

#[test]
fn p2_minimum_matches_linear_solve() {
    let mesh = lshape(3);
    let patches = build_patches(&mesh).unwrap();
    let model = PLaplacian::new(PLaplaceParams::new(2.0).unwrap());
    let load = LinearLoad::constant(&mesh, &[-10.0]);
    let oracle = linear_solve_energy(&mesh, &load);
    let problem = Problem { mesh: &mesh, patches: &patches, model: &model, load: &load, gradient: GradientConfig::exact() };
    let v0 = FlatField::zeros(mesh.nn(), 1);
    let r = minimize_energy(problem, &v0, &SolveOptions::default()).unwrap();
    assert!((r.energy - oracle).abs() <= 1e-8 * oracle.abs(), "{} vs {oracle}", r.energy);
    assert!((r.energy - (r.energy_grad - linear_term(&load, &r.u))).abs() < 1e-12);
}

#[test]
fn trust_region_and_lbfgs_agree_on_p3() {
    let mesh = lshape(2);
    let patches = build_patches(&mesh).unwrap();
    let model = PLaplacian::new(PLaplaceParams::new(3.0).unwrap());
    let load = LinearLoad::constant(&mesh, &[-10.0]);
    let problem = Problem { mesh: &mesh, patches: &patches, model: &model, load: &load, gradient: GradientConfig::exact() };
    let v0 = FlatField::zeros(mesh.nn(), 1);
    let tr = minimize_energy(problem, &v0, &SolveOptions::default()).unwrap();
    let lb = minimize_energy(problem, &v0, &SolveOptions { solver: Solver::Lbfgs, ..Default::default() }).unwrap();
    assert!((tr.energy - lb.energy).abs() <= 1e-6 * tr.energy.abs(), "{} vs {}", tr.energy, lb.energy);
    for r in [&tr, &lb] {
        assert!(r.history.windows(2).all(|w| w[1] <= w[0]));
        for &n in &mesh.partition.dofs_dirichlet {
            assert_eq!(r.u.values[n].to_bits(), 0f64.to_bits());
        }
    }
}

#[test]
fn zero_twist_continuation_stays_at_identity() {
    let spec = DirichletSpec::new()
        .identity_region("left", |x| x[0] < 1e-12, 3)
        .identity_region("right", |x| x[0] > 0.4 - 1e-12, 3);
    let mesh = generate_bar_mesh_3d(0.4, 0.01, 0.01, 1).unwrap().with_dirichlet(&spec, 3).unwrap();
    let patches = build_patches(&mesh).unwrap();
    let model = NeoHookean::new(ElasticParams::new(2e8, 0.3).unwrap());
    let load = LinearLoad::zero(mesh.nn(), 3);
    let problem = Problem { mesh: &mesh, patches: &patches, model: &model, load: &load, gradient: GradientConfig::exact() };
    let id = interpolate(|x| x.to_vec(), &mesh, 3);
    let mut seen = Vec::new();
    let rs = continuation_solve(problem, &spec, 1, &id, &SolveOptions::default(), None, |s, _| seen.push(s)).unwrap();
    assert_eq!(seen, vec![1]);
    assert!(rs[0].energy_grad.abs() < 1e-12);
    assert_eq!(rs[0].u, id);
}
