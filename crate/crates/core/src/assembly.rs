//! Field representations, deformation-gradient assembly and the discrete energy.
//!
//! The linear load is stored as `b = M f` (the value of `∫ f·v` is `b·v`)
//! and [`energy`] subtracts it, i.e. `J(v) = Σ_k |T_k| W_k − b·v`.

use crate::density::{BatchedF, DensityModel};
use crate::error::{Error, Result};
use crate::mesh::{DirichletSpec, Mesh};
use crate::patches::Patches;
use crate::sparse::CsrMatrix;

/// Interleaved nodal coefficients: `values[i * ncomp + j]` is component `j` at node `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatField {
    pub ncomp: usize,
    pub values: Vec<f64>,
}

/// Coefficients stored column by column, one array per component.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalField {
    pub components: Vec<Vec<f64>>,
}

impl FlatField {
    pub fn zeros(nn: usize, ncomp: usize) -> Self {
        FlatField { ncomp, values: vec![0.0; nn * ncomp] }
    }

    pub fn nn(&self) -> usize {
        self.values.len() / self.ncomp
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.ncomp + j]
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.values[i * self.ncomp..(i + 1) * self.ncomp]
    }

    pub fn to_nodal(&self) -> NodalField {
        let d = self.ncomp;
        NodalField {
            components: (0..d).map(|j| self.values.iter().skip(j).step_by(d).copied().collect()).collect(),
        }
    }

    pub fn restrict(&self, dofs: &[usize]) -> Vec<f64> {
        dofs.iter().map(|&n| self.values[n]).collect()
    }

    pub fn scatter(&mut self, dofs: &[usize], x: &[f64]) {
        for (&n, &v) in dofs.iter().zip(x) {
            self.values[n] = v;
        }
    }

    pub fn dot(&self, other: &FlatField) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum()
    }
}

impl NodalField {
    pub fn ncomp(&self) -> usize {
        self.components.len()
    }

    pub fn to_flat(&self) -> FlatField {
        let d = self.ncomp();
        let nn = self.components.first().map_or(0, Vec::len);
        let mut values = vec![0.0; nn * d];
        for (j, c) in self.components.iter().enumerate() {
            for (i, &x) in c.iter().enumerate() {
                values[i * d + j] = x;
            }
        }
        FlatField { ncomp: d, values }
    }
}

impl From<&FlatField> for NodalField {
    fn from(v: &FlatField) -> Self {
        v.to_nodal()
    }
}

/// Row data shared by element arrays and flat patch arrays.
pub trait SimplexRows {
    fn dim(&self) -> usize;
    fn rows(&self) -> usize;
    /// Row-major `rows × (dim+1)` node indices.
    fn connectivity(&self) -> &[usize];
    /// Row-major `rows × (dim+1)` derivatives with respect to `x_m`.
    fn dphi(&self, m: usize) -> &[f64];
}

impl SimplexRows for Mesh {
    fn dim(&self) -> usize {
        self.dim
    }
    fn rows(&self) -> usize {
        self.ne()
    }
    fn connectivity(&self) -> &[usize] {
        &self.elems2nodes
    }
    fn dphi(&self, m: usize) -> &[f64] {
        &self.dphi[m]
    }
}

impl SimplexRows for Patches {
    fn dim(&self) -> usize {
        self.dim
    }
    fn rows(&self) -> usize {
        self.elems.len()
    }
    fn connectivity(&self) -> &[usize] {
        &self.elems2nodes
    }
    fn dphi(&self, m: usize) -> &[f64] {
        &self.dphi[m]
    }
}

/// Nodal values of every component gathered onto the rows of `source`.
pub fn gather_rows(v: &NodalField, source: &impl SimplexRows) -> Vec<Vec<f64>> {
    let conn = source.connectivity();
    v.components.iter().map(|c| conn.iter().map(|&i| c[i]).collect()).collect()
}

/// `F[j][m][k] = Σ_l v[j][k][l] ∂φ_{k,l}/∂x_m` for every row of `source`.
pub fn evaluate_f(source: &impl SimplexRows, v_rows: &[Vec<f64>]) -> Result<BatchedF> {
    let dim = source.dim();
    let n = dim + 1;
    let rows = source.rows();
    if v_rows.iter().any(|c| c.len() != rows * n) {
        return Err(Error::InvalidArgument(format!(
            "row values must have {} entries per component",
            rows * n
        )));
    }
    let mut f = BatchedF::zeros(v_rows.len(), dim, rows);
    for (j, vj) in v_rows.iter().enumerate() {
        for m in 0..dim {
            let dm = source.dphi(m);
            let out = f.get_mut(j, m);
            for (k, o) in out.iter_mut().enumerate() {
                let r = k * n..(k + 1) * n;
                *o = vj[r.clone()].iter().zip(&dm[r]).map(|(a, b)| a * b).sum();
            }
        }
    }
    Ok(f)
}

/// Consistent P1 mass matrix over the node adjacency pattern.
pub fn assemble_mass_matrix(mesh: &Mesh) -> CsrMatrix {
    let (ptr, idx) = mesh.node_adjacency();
    let mut m = CsrMatrix::from_pattern(mesh.nn(), ptr, idx);
    let n = mesh.nloc();
    let denom = ((mesh.dim + 1) * (mesh.dim + 2)) as f64;
    for k in 0..mesh.ne() {
        let el = mesh.elem(k);
        let vol = mesh.volumes[k];
        for a in 0..n {
            for b in 0..n {
                let factor = if a == b { 2.0 } else { 1.0 };
                m.add(el[a], el[b], vol * factor / denom);
            }
        }
    }
    m
}

/// Load `f` with its mass-matrix image `b = M f` (per component).
#[derive(Debug, Clone, PartialEq)]
pub struct LinearLoad {
    pub f: FlatField,
    pub b: FlatField,
}

impl LinearLoad {
    pub fn new(mesh: &Mesh, f: FlatField) -> Self {
        let mass = assemble_mass_matrix(mesh);
        Self::with_mass(&mass, f)
    }

    pub fn with_mass(mass: &CsrMatrix, f: FlatField) -> Self {
        let d = f.ncomp;
        let nodal = f.to_nodal();
        let b = NodalField { components: nodal.components.iter().map(|c| mass.matvec(c)).collect() }.to_flat();
        debug_assert_eq!(b.ncomp, d);
        LinearLoad { f, b }
    }

    /// Spatially constant load.
    pub fn constant(mesh: &Mesh, value: &[f64]) -> Self {
        let d = value.len();
        let values = (0..mesh.nn()).flat_map(|_| value.iter().copied()).collect();
        Self::new(mesh, FlatField { ncomp: d, values })
    }

    pub fn zero(nn: usize, d: usize) -> Self {
        LinearLoad { f: FlatField::zeros(nn, d), b: FlatField::zeros(nn, d) }
    }
}

/// `Σ_j b⁽ʲ⁾ · v⁽ʲ⁾`, the value of `∫ f·v`.
pub fn linear_term(load: &LinearLoad, v: &FlatField) -> f64 {
    load.b.dot(v)
}

/// Result of an energy evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyValue {
    /// `J(v) = J_grad(v) − ∫ f·v`.
    pub total: f64,
    pub gradient_part: f64,
    pub linear_part: f64,
    /// Per-element densities `W_k`.
    pub densities: Vec<f64>,
}

/// Deformation gradients of `v` on every element.
pub fn element_gradients(v: &FlatField, mesh: &Mesh) -> Result<BatchedF> {
    if v.nn() != mesh.nn() || !v.values.len().is_multiple_of(v.ncomp) {
        return Err(Error::InvalidArgument(format!(
            "field has {} nodes, mesh has {}",
            v.nn(),
            mesh.nn()
        )));
    }
    let v_elems = gather_rows(&v.to_nodal(), mesh);
    evaluate_f(mesh, &v_elems)
}

/// Discrete energy `Σ_k |T_k| W(∇v|_{T_k}) − b·v`; `+∞` if any element is inadmissible.
pub fn energy<M: DensityModel + ?Sized>(
    v: &FlatField,
    mesh: &Mesh,
    model: &M,
    load: &LinearLoad,
) -> Result<EnergyValue> {
    if v.ncomp != model.components(mesh.dim) || load.b.values.len() != v.values.len() {
        return Err(Error::InvalidArgument("field, model and load disagree on components".into()));
    }
    let f = element_gradients(v, mesh)?;
    let densities = model.density(&f);
    let gradient_part: f64 = mesh.volumes.iter().zip(&densities).map(|(a, w)| a * w).sum();
    let linear_part = linear_term(load, v);
    Ok(EnergyValue { total: gradient_part - linear_part, gradient_part, linear_part, densities })
}

/// `V[i] = fun(x_i)` for every node.
pub fn interpolate(fun: impl Fn(&[f64]) -> Vec<f64>, mesh: &Mesh, d: usize) -> FlatField {
    let mut values = Vec::with_capacity(mesh.nn() * d);
    for i in 0..mesh.nn() {
        let y = fun(mesh.coord(i));
        assert_eq!(y.len(), d, "interpolated function must return {d} components");
        values.extend(y);
    }
    FlatField { ncomp: d, values }
}

/// Overwrites the prescribed components of `v` with the region values at load parameter `t`.
pub fn apply_dirichlet(v: &mut FlatField, mesh: &Mesh, spec: &DirichletSpec, t: f64) {
    let d = v.ncomp;
    for region in &spec.regions {
        for i in 0..mesh.nn() {
            let x = mesh.coord(i);
            if (region.selects)(x) {
                let value = (region.value)(x, t);
                for &c in &region.components {
                    v.values[i * d + c] = value[c];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{ElasticParams, NeoHookean, PLaplaceParams, PLaplacian};
    use crate::mesh::{generate_bar_mesh_3d, generate_lshape_mesh_2d};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn flat_nodal_round_trip() {
        let v = FlatField { ncomp: 3, values: (0..12).map(f64::from).collect() };
        let nodal = v.to_nodal();
        assert_eq!(nodal.components[1], vec![1.0, 4.0, 7.0, 10.0]);
        assert_eq!(nodal.to_flat(), v);
        assert_eq!(v.get(2, 1), 7.0);
    }

    #[test]
    fn identity_and_constant_fields() {
        let mesh = generate_bar_mesh_3d(0.4, 0.01, 0.01, 1).unwrap();
        let id = interpolate(|x| x.to_vec(), &mesh, 3);
        assert_eq!(id.values, mesh.nodes2coord);
        let f = element_gradients(&id, &mesh).unwrap();
        for j in 0..3 {
            for m in 0..3 {
                let target = if j == m { 1.0 } else { 0.0 };
                assert!(f.get(j, m).iter().all(|&x| (x - target).abs() < 1e-12));
            }
        }
        let c = interpolate(|_| vec![2.0, -1.0, 5.0], &mesh, 3);
        let f = element_gradients(&c, &mesh).unwrap();
        assert!(f.entries.iter().flatten().all(|&x| x.abs() < 1e-9));
    }

    #[test]
    fn evaluate_f_matches_loop_oracle() {
        let mesh = generate_bar_mesh_3d(0.4, 0.01, 0.01, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = FlatField { ncomp: 3, values: (0..mesh.nn() * 3).map(|_| rng.gen_range(-1.0..1.0)).collect() };
        let f = element_gradients(&v, &mesh).unwrap();
        for k in (0..mesh.ne()).step_by(37) {
            let el = mesh.elem(k);
            for j in 0..3 {
                for m in 0..3 {
                    let mut acc = 0.0;
                    for l in 0..4 {
                        acc += v.get(el[l], j) * mesh.dphi[m][k * 4 + l];
                    }
                    assert!((acc - f.get(j, m)[k]).abs() <= 1e-13 * acc.abs().max(1.0));
                }
            }
        }
        assert!(evaluate_f(&mesh, &[vec![0.0; 3]]).is_err());
    }

    #[test]
    fn reference_triangle_mass() {
        let mesh = Mesh::from_arrays(2, 0, vec![0., 0., 1., 0., 0., 1.], vec![0, 1, 2]).unwrap();
        let m = assemble_mass_matrix(&mesh);
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { 2.0 / 24.0 } else { 1.0 / 24.0 };
                assert!((m.get(i, j) - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn mass_matrix_properties() {
        for mesh in [generate_lshape_mesh_2d(2).unwrap(), generate_bar_mesh_3d(0.4, 0.01, 0.01, 1).unwrap()] {
            let m = assemble_mass_matrix(&mesh);
            let total: f64 = m.values.iter().sum();
            let measure = mesh.total_measure();
            assert!((total - measure).abs() <= 1e-12 * measure);
            assert!(m.is_symmetric(1e-14));
            assert!(m.values.iter().all(|&x| x >= 0.0));
            // nonzero pattern equals brute-force node adjacency
            for i in (0..mesh.nn()).step_by(7) {
                let mut adj: Vec<usize> = (0..mesh.ne())
                    .filter(|&k| mesh.elem(k).contains(&i))
                    .flat_map(|k| mesh.elem(k).to_vec())
                    .collect();
                adj.sort_unstable();
                adj.dedup();
                let (cols, vals) = m.row(i);
                assert_eq!(cols, adj.as_slice());
                assert!(vals.iter().all(|&x| x > 0.0));
            }
        }
    }

    #[test]
    fn linear_term_examples() {
        let mesh = generate_lshape_mesh_2d(1).unwrap();
        let v = interpolate(|_| vec![2.0, 3.0], &mesh, 2);
        assert_eq!(linear_term(&LinearLoad::zero(mesh.nn(), 2), &v), 0.0);
        let load = LinearLoad::constant(&mesh, &[0.5, -1.0]);
        let expected = (0.5 * 2.0 - 3.0) * 3.0;
        assert!((linear_term(&load, &v) - expected).abs() < 1e-12);
    }

    #[test]
    fn linear_term_matches_quadrature() {
        let mesh = generate_lshape_mesh_2d(1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = FlatField { ncomp: 1, values: (0..mesh.nn()).map(|_| rng.gen_range(-1.0..1.0)).collect() };
        let v = FlatField { ncomp: 1, values: (0..mesh.nn()).map(|_| rng.gen_range(-1.0..1.0)).collect() };
        let load = LinearLoad::new(&mesh, f.clone());
        // edge-midpoint rule is exact for quadratics on triangles
        let mut quad = 0.0;
        for k in 0..mesh.ne() {
            let el = mesh.elem(k);
            for a in 0..3 {
                let b = (a + 1) % 3;
                let fm = 0.5 * (f.values[el[a]] + f.values[el[b]]);
                let vm = 0.5 * (v.values[el[a]] + v.values[el[b]]);
                quad += mesh.volumes[k] / 3.0 * fm * vm;
            }
        }
        assert!((linear_term(&load, &v) - quad).abs() < 1e-12);
    }

    #[test]
    fn energies_of_simple_fields() {
        let bar = generate_bar_mesh_3d(0.4, 0.01, 0.01, 1).unwrap();
        let nh = NeoHookean::new(ElasticParams::new(2e8, 0.3).unwrap());
        let id = interpolate(|x| x.to_vec(), &bar, 3);
        let e = energy(&id, &bar, &nh, &LinearLoad::zero(bar.nn(), 3)).unwrap();
        assert!(e.total.abs() < 1e-6);

        let l = generate_lshape_mesh_2d(2).unwrap();
        let x1 = interpolate(|x| vec![x[0]], &l, 1);
        let pl = PLaplacian::new(PLaplaceParams::new(3.0).unwrap());
        let e = energy(&x1, &l, &pl, &LinearLoad::zero(l.nn(), 1)).unwrap();
        assert!((e.total - 1.0).abs() < 1e-12);
        assert_eq!(e.densities.len(), l.ne());
    }

    #[test]
    fn inverted_field_has_infinite_energy() {
        let bar = generate_bar_mesh_3d(0.4, 0.01, 0.01, 1).unwrap();
        let nh = NeoHookean::new(ElasticParams::new(2e8, 0.3).unwrap());
        let mirrored = interpolate(|x| vec![-x[0], x[1], x[2]], &bar, 3);
        let e = energy(&mirrored, &bar, &nh, &LinearLoad::zero(bar.nn(), 3)).unwrap();
        assert_eq!(e.total, f64::INFINITY);
    }
}
