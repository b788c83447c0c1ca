//! Batched energy densities `W(F)` and their derivatives `dW/dF`.
//!
//! Every operation maps whole arrays of per-element (or per-patch-row)
//! gradients at once. A gradient batch is stored as a `d × dim` grid of
//! value arrays, see [`BatchedF`].

use crate::error::{Error, Result};

/// `d × dim` grid of per-row arrays: `entries[j * dim + m][k] = ∂v⁽ʲ⁾/∂x_m` on row `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchedF {
    pub ncomp: usize,
    pub dim: usize,
    pub entries: Vec<Vec<f64>>,
}

impl BatchedF {
    pub fn zeros(ncomp: usize, dim: usize, rows: usize) -> Self {
        BatchedF { ncomp, dim, entries: vec![vec![0.0; rows]; ncomp * dim] }
    }

    pub fn rows(&self) -> usize {
        self.entries.first().map_or(0, Vec::len)
    }

    pub fn get(&self, j: usize, m: usize) -> &[f64] {
        &self.entries[j * self.dim + m]
    }

    pub fn get_mut(&mut self, j: usize, m: usize) -> &mut Vec<f64> {
        &mut self.entries[j * self.dim + m]
    }

    /// Single-row batch from a dense row-major `d × dim` matrix.
    pub fn from_matrix(ncomp: usize, dim: usize, a: &[f64]) -> Self {
        assert_eq!(a.len(), ncomp * dim);
        BatchedF { ncomp, dim, entries: a.iter().map(|&x| vec![x]).collect() }
    }

    /// Row `k` as a dense row-major matrix.
    pub fn matrix(&self, k: usize) -> Vec<f64> {
        self.entries.iter().map(|e| e[k]).collect()
    }

    /// Copies of the rows selected by `rows`, in that order.
    pub fn gather(&self, rows: &[usize]) -> Self {
        BatchedF {
            ncomp: self.ncomp,
            dim: self.dim,
            entries: self.entries.iter().map(|e| rows.iter().map(|&r| e[r]).collect()).collect(),
        }
    }
}

/// An energy density evaluated over batches of field gradients.
pub trait DensityModel: Sync {
    /// Number of field components `d` for the given spatial dimension.
    fn components(&self, dim: usize) -> usize;

    /// Per-row densities; inadmissible rows yield `+∞`.
    fn density(&self, f: &BatchedF) -> Vec<f64>;

    /// Per-row derivative `dW/dF` with the layout of `f`.
    fn ddensity(&self, f: &BatchedF) -> Result<BatchedF>;
}

/// Isotropic material constants and the derived Neo-Hookean coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElasticParams {
    pub young: f64,
    pub poisson: f64,
    /// Shear modulus `E / (2(1+ν))`.
    pub mu: f64,
    /// Bulk modulus `E / (3(1−2ν))`.
    pub bulk: f64,
    pub c1: f64,
    pub d1: f64,
}

impl ElasticParams {
    pub fn new(young: f64, poisson: f64) -> Result<Self> {
        if !(young > 0.0) || !(poisson > 0.0 && poisson < 0.5) {
            return Err(Error::InvalidArgument(format!(
                "need E > 0 and 0 < nu < 0.5, got E = {young}, nu = {poisson}"
            )));
        }
        let mu = young / (2.0 * (1.0 + poisson));
        let bulk = young / (3.0 * (1.0 - 2.0 * poisson));
        Ok(ElasticParams { young, poisson, mu, bulk, c1: mu / 2.0, d1: bulk / 2.0 })
    }

    /// Parameters given directly through `C1` and `D1`.
    pub fn from_coefficients(c1: f64, d1: f64) -> Self {
        ElasticParams { young: f64::NAN, poisson: f64::NAN, mu: 2.0 * c1, bulk: 2.0 * d1, c1, d1 }
    }
}

/// Compressible Neo-Hookean density `C1 (I1 − dim − 2 log det F) + D1 (det F − 1)²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeoHookean {
    pub params: ElasticParams,
}

impl NeoHookean {
    pub fn new(params: ElasticParams) -> Self {
        NeoHookean { params }
    }
}

impl DensityModel for NeoHookean {
    fn components(&self, dim: usize) -> usize {
        dim
    }

    fn density(&self, f: &BatchedF) -> Vec<f64> {
        neo_hookean_density(f, &self.params)
    }

    fn ddensity(&self, f: &BatchedF) -> Result<BatchedF> {
        neo_hookean_ddensity(f, &self.params)
    }
}

fn determinants(f: &BatchedF) -> Vec<f64> {
    let n = f.rows();
    match f.dim {
        2 => {
            let (a, b, c, d) = (f.get(0, 0), f.get(0, 1), f.get(1, 0), f.get(1, 1));
            (0..n).map(|k| a[k] * d[k] - b[k] * c[k]).collect()
        }
        3 => {
            let g = |j, m| f.get(j, m);
            let (f11, f12, f13) = (g(0, 0), g(0, 1), g(0, 2));
            let (f21, f22, f23) = (g(1, 0), g(1, 1), g(1, 2));
            let (f31, f32, f33) = (g(2, 0), g(2, 1), g(2, 2));
            (0..n)
                .map(|k| {
                    f11[k] * f22[k] * f33[k] + f13[k] * f21[k] * f32[k] + f12[k] * f23[k] * f31[k]
                        - f13[k] * f22[k] * f31[k]
                        - f12[k] * f21[k] * f33[k]
                        - f11[k] * f23[k] * f32[k]
                })
                .collect()
        }
        d => panic!("Neo-Hookean density needs dim 2 or 3, got {d}"),
    }
}

/// Cofactors `(−1)^{j+m} det(F_sub)` in the layout of `f`.
fn cofactors(f: &BatchedF) -> BatchedF {
    let n = f.rows();
    let mut cof = BatchedF::zeros(f.ncomp, f.dim, n);
    match f.dim {
        2 => {
            for k in 0..n {
                cof.entries[0][k] = f.entries[3][k];
                cof.entries[1][k] = -f.entries[2][k];
                cof.entries[2][k] = -f.entries[1][k];
                cof.entries[3][k] = f.entries[0][k];
            }
        }
        3 => {
            for j in 0..3 {
                let (r0, r1) = ((j + 1) % 3, (j + 2) % 3);
                for m in 0..3 {
                    let (c0, c1) = ((m + 1) % 3, (m + 2) % 3);
                    // cyclic index order absorbs the (−1)^{j+m} sign
                    let (a, b) = (f.get(r0, c0), f.get(r1, c1));
                    let (c, d) = (f.get(r0, c1), f.get(r1, c0));
                    let out = cof.get_mut(j, m);
                    for k in 0..n {
                        out[k] = a[k] * b[k] - c[k] * d[k];
                    }
                }
            }
        }
        d => panic!("Neo-Hookean density needs dim 2 or 3, got {d}"),
    }
    cof
}

pub fn neo_hookean_density(f: &BatchedF, params: &ElasticParams) -> Vec<f64> {
    let det = determinants(f);
    let dim = f.dim as f64;
    let mut i1 = vec![0.0; f.rows()];
    for e in &f.entries {
        for (acc, &x) in i1.iter_mut().zip(e) {
            *acc += x * x;
        }
    }
    det.iter()
        .zip(&i1)
        .map(|(&det, &i1)| {
            if det > 0.0 {
                params.c1 * (i1 - dim - 2.0 * det.ln()) + params.d1 * (det - 1.0).powi(2)
            } else {
                f64::INFINITY
            }
        })
        .collect()
}

/// `dW/dF = C1 (2F − (2/det F) cof F) + 2 D1 (det F − 1) cof F`.
pub fn neo_hookean_ddensity(f: &BatchedF, params: &ElasticParams) -> Result<BatchedF> {
    let det = determinants(f);
    if let Some(k) = det.iter().position(|&d| !(d > 0.0)) {
        return Err(Error::Inadmissible(format!("det F = {:e} on row {k}", det[k])));
    }
    let mut out = cofactors(f);
    for (o, fe) in out.entries.iter_mut().zip(&f.entries) {
        for k in 0..fe.len() {
            let cof = o[k];
            o[k] = params.c1 * (2.0 * fe[k] - 2.0 / det[k] * cof)
                + 2.0 * params.d1 * (det[k] - 1.0) * cof;
        }
    }
    Ok(out)
}

/// How `|∇v|^p` measures the gradient row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GradientNorm {
    /// `|g|^p` with the Euclidean norm.
    #[default]
    Euclidean,
    /// `Σ_m |g_m|^p`, the `p`-th power of the `ℓ^p` norm.
    Componentwise,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PLaplaceParams {
    pub p: f64,
    pub norm: GradientNorm,
}

impl PLaplaceParams {
    pub fn new(p: f64) -> Result<Self> {
        Self::with_norm(p, GradientNorm::Euclidean)
    }

    pub fn with_norm(p: f64, norm: GradientNorm) -> Result<Self> {
        if !(p > 1.0) || !p.is_finite() {
            return Err(Error::InvalidArgument(format!("p-Laplacian needs p > 1, got {p}")));
        }
        Ok(PLaplaceParams { p, norm })
    }
}

/// Scalar p-Laplacian density `|g|^p / p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PLaplacian {
    pub params: PLaplaceParams,
}

impl PLaplacian {
    pub fn new(params: PLaplaceParams) -> Self {
        PLaplacian { params }
    }
}

impl DensityModel for PLaplacian {
    fn components(&self, _dim: usize) -> usize {
        1
    }

    fn density(&self, f: &BatchedF) -> Vec<f64> {
        p_laplacian_density(f, &self.params)
    }

    fn ddensity(&self, f: &BatchedF) -> Result<BatchedF> {
        Ok(p_laplacian_ddensity(f, &self.params))
    }
}

/// `x^e` for `x ≥ 0`, exact repeated multiplication for small integer `e`.
fn pow(x: f64, e: f64) -> f64 {
    if e == 1.0 {
        x
    } else if e == 2.0 {
        x * x
    } else if e == 3.0 {
        x * x * x
    } else {
        x.powf(e)
    }
}

fn norms(g: &BatchedF) -> Vec<f64> {
    let mut sq = vec![0.0; g.rows()];
    for e in &g.entries {
        for (acc, &x) in sq.iter_mut().zip(e) {
            *acc += x * x;
        }
    }
    sq.into_iter().map(f64::sqrt).collect()
}

pub fn p_laplacian_density(g: &BatchedF, params: &PLaplaceParams) -> Vec<f64> {
    assert_eq!(g.ncomp, 1, "p-Laplacian is scalar");
    let p = params.p;
    match params.norm {
        GradientNorm::Euclidean => norms(g).into_iter().map(|n| pow(n, p) / p).collect(),
        GradientNorm::Componentwise => {
            let mut w = vec![0.0; g.rows()];
            for e in &g.entries {
                for (acc, &x) in w.iter_mut().zip(e) {
                    *acc += pow(x.abs(), p);
                }
            }
            w.iter_mut().for_each(|x| *x /= p);
            w
        }
    }
}

/// `|g|^{p−2} g` (or `|g_m|^{p−2} g_m` componentwise); zero at `g = 0`.
pub fn p_laplacian_ddensity(g: &BatchedF, params: &PLaplaceParams) -> BatchedF {
    assert_eq!(g.ncomp, 1, "p-Laplacian is scalar");
    let p = params.p;
    let mut out = g.clone();
    match params.norm {
        GradientNorm::Euclidean => {
            let scale: Vec<f64> = norms(g)
                .into_iter()
                .map(|n| if n > 0.0 { pow(n, p - 2.0) } else { 0.0 })
                .collect();
            for e in out.entries.iter_mut() {
                for (x, s) in e.iter_mut().zip(&scale) {
                    *x *= s;
                }
            }
        }
        GradientNorm::Componentwise => {
            for e in out.entries.iter_mut() {
                for x in e.iter_mut() {
                    *x = x.signum() * pow(x.abs(), p - 1.0);
                    if x.is_nan() {
                        *x = 0.0;
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit() -> ElasticParams {
        ElasticParams::from_coefficients(1.0, 1.0)
    }

    #[test]
    fn material_conversion() {
        let p = ElasticParams::new(2e8, 0.3).unwrap();
        assert!((p.c1 - 2e8 / 2.6 / 2.0).abs() < 1e-6);
        assert!((p.d1 - 2e8 / 1.2 / 2.0).abs() < 1e-6);
        assert!(ElasticParams::new(2e8, 0.5).is_err());
        assert!(ElasticParams::new(-1.0, 0.3).is_err());
    }

    #[test]
    fn identity_is_stress_free() {
        for dim in [2, 3] {
            let id: Vec<f64> = (0..dim * dim).map(|i| if i % (dim + 1) == 0 { 1.0 } else { 0.0 }).collect();
            let f = BatchedF::from_matrix(dim, dim, &id);
            assert_eq!(neo_hookean_density(&f, &unit()), vec![0.0]);
            let d = neo_hookean_ddensity(&f, &unit()).unwrap();
            assert!(d.entries.iter().all(|e| e[0] == 0.0));
        }
    }

    #[test]
    fn doubled_identity_3d() {
        let f = BatchedF::from_matrix(3, 3, &[2., 0., 0., 0., 2., 0., 0., 0., 2.]);
        let w = neo_hookean_density(&f, &unit())[0];
        // independent scalar evaluation: I1 = 12, det = 8
        let expected = (12.0 - 3.0 - 2.0 * 8f64.ln()) + 7.0 * 7.0;
        assert!((w - expected).abs() < 1e-12);
        assert!((w - (58.0 - 6.0 * 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn hand_evaluated_cofactor_formula_2d() {
        let f = BatchedF::from_matrix(2, 2, &[2., 0., 0., 1.]);
        let d = neo_hookean_ddensity(&f, &ElasticParams::from_coefficients(1.0, 0.0)).unwrap();
        assert_eq!(d.matrix(0), vec![3.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn inverted_states() {
        let f = BatchedF::from_matrix(2, 2, &[-1., 0., 0., 1.]);
        assert_eq!(neo_hookean_density(&f, &unit()), vec![f64::INFINITY]);
        assert!(matches!(neo_hookean_ddensity(&f, &unit()), Err(Error::Inadmissible(_))));
    }

    fn random_admissible(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
        loop {
            let a: Vec<f64> = (0..dim * dim)
                .map(|i| if i % (dim + 1) == 0 { 1.0 } else { 0.0 } + rng.gen_range(-0.5..0.5))
                .collect();
            let det = determinants(&BatchedF::from_matrix(dim, dim, &a))[0];
            if det > 0.2 {
                return a;
            }
        }
    }

    #[test]
    fn neo_hookean_derivative_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let params = ElasticParams::from_coefficients(1.3, 0.7);
        for dim in [2, 3] {
            for _ in 0..200 {
                let a = random_admissible(&mut rng, dim);
                let d = neo_hookean_ddensity(&BatchedF::from_matrix(dim, dim, &a), &params).unwrap();
                let h = 1e-6;
                for i in 0..dim * dim {
                    let (mut ap, mut am) = (a.clone(), a.clone());
                    ap[i] += h;
                    am[i] -= h;
                    let wp = neo_hookean_density(&BatchedF::from_matrix(dim, dim, &ap), &params)[0];
                    let wm = neo_hookean_density(&BatchedF::from_matrix(dim, dim, &am), &params)[0];
                    let fd = (wp - wm) / (2.0 * h);
                    assert!((fd - d.entries[i][0]).abs() <= 1e-6 * (1.0 + fd.abs()));
                }
            }
        }
    }

    #[test]
    fn neo_hookean_is_frame_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let params = unit();
        for _ in 0..100 {
            let a = random_admissible(&mut rng, 3);
            // rotation from a random unit quaternion
            let q: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
            let n = q.iter().map(|x| x * x).sum::<f64>().sqrt();
            let [w, x, y, z] = q.map(|c| c / n);
            let r = [
                1. - 2. * (y * y + z * z), 2. * (x * y - z * w), 2. * (x * z + y * w),
                2. * (x * y + z * w), 1. - 2. * (x * x + z * z), 2. * (y * z - x * w),
                2. * (x * z - y * w), 2. * (y * z + x * w), 1. - 2. * (x * x + y * y),
            ];
            let mut qa = vec![0.0; 9];
            for i in 0..3 {
                for j in 0..3 {
                    qa[i * 3 + j] = (0..3).map(|k| r[i * 3 + k] * a[k * 3 + j]).sum();
                }
            }
            let w0 = neo_hookean_density(&BatchedF::from_matrix(3, 3, &a), &params)[0];
            let w1 = neo_hookean_density(&BatchedF::from_matrix(3, 3, &qa), &params)[0];
            assert!((w0 - w1).abs() <= 1e-12 * w0.abs().max(1.0));
        }
    }

    #[test]
    fn p_laplacian_examples() {
        let g = BatchedF::from_matrix(1, 2, &[3., 4.]);
        let p3 = PLaplaceParams::new(3.0).unwrap();
        let p2 = PLaplaceParams::new(2.0).unwrap();
        assert!((p_laplacian_density(&g, &p3)[0] - 125.0 / 3.0).abs() < 1e-12);
        assert_eq!(p_laplacian_density(&BatchedF::from_matrix(1, 2, &[0., 0.]), &p3), vec![0.0]);
        let d2 = p_laplacian_ddensity(&g, &p2);
        assert_eq!(d2.matrix(0), vec![3.0, 4.0]);
        let d3 = p_laplacian_ddensity(&g, &p3);
        assert!((d3.matrix(0)[0] - 15.0).abs() < 1e-12 && (d3.matrix(0)[1] - 20.0).abs() < 1e-12);
        let c3 = PLaplaceParams::with_norm(3.0, GradientNorm::Componentwise).unwrap();
        assert!((p_laplacian_density(&g, &c3)[0] - 91.0 / 3.0).abs() < 1e-12);
        assert!(PLaplaceParams::new(1.0).is_err());
    }

    #[test]
    fn p_laplacian_singular_point() {
        let zero = BatchedF::from_matrix(1, 2, &[0., 0.]);
        for norm in [GradientNorm::Euclidean, GradientNorm::Componentwise] {
            let params = PLaplaceParams::with_norm(1.5, norm).unwrap();
            assert_eq!(p_laplacian_ddensity(&zero, &params).matrix(0), vec![0.0, 0.0]);
        }
    }

    #[test]
    fn p_laplacian_derivative_and_convexity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for norm in [GradientNorm::Euclidean, GradientNorm::Componentwise] {
            let params = PLaplaceParams::with_norm(3.5, norm).unwrap();
            for _ in 0..200 {
                let g: Vec<f64> = (0..2).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let d = p_laplacian_ddensity(&BatchedF::from_matrix(1, 2, &g), &params);
                for i in 0..2 {
                    let h = 1e-6;
                    let (mut gp, mut gm) = (g.clone(), g.clone());
                    gp[i] += h;
                    gm[i] -= h;
                    let fd = (p_laplacian_density(&BatchedF::from_matrix(1, 2, &gp), &params)[0]
                        - p_laplacian_density(&BatchedF::from_matrix(1, 2, &gm), &params)[0])
                        / (2.0 * h);
                    assert!((fd - d.entries[i][0]).abs() <= 1e-6 * (1.0 + fd.abs()));
                }
                let g2: Vec<f64> = (0..2).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let lam: f64 = rng.gen_range(0.0..1.0);
                let mid: Vec<f64> = g.iter().zip(&g2).map(|(a, b)| lam * a + (1.0 - lam) * b).collect();
                let w = |v: &[f64]| p_laplacian_density(&BatchedF::from_matrix(1, 2, v), &params)[0];
                assert!(w(&mid) <= lam * w(&g) + (1.0 - lam) * w(&g2) + 1e-12);
            }
        }
    }
}
