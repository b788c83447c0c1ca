//! Oracles and random-field generators shared by the integration tests.
#![allow(dead_code)]

use patchfem::assembly::{energy, FlatField, LinearLoad};
use patchfem::density::DensityModel;
use patchfem::mesh::Mesh;
use patchfem::sparse::CsrMatrix;
use rand::Rng;

/// Central difference of the full energy in the direction of dof `n`.
pub fn brute_force_partial<M: DensityModel + ?Sized>(
    v: &FlatField,
    n: usize,
    mesh: &Mesh,
    model: &M,
    load: &LinearLoad,
    eps: f64,
) -> f64 {
    let mut plus = v.clone();
    plus.values[n] += eps;
    let mut minus = v.clone();
    minus.values[n] -= eps;
    let jp = energy(&plus, mesh, model, load).unwrap().total;
    let jm = energy(&minus, mesh, model, load).unwrap().total;
    (jp - jm) / (2.0 * eps)
}

/// `∫ ∇φ_a · ∇φ_b`, assembled element by element from the basis gradients.
pub fn stiffness(mesh: &Mesh) -> CsrMatrix {
    let (ptr, idx) = mesh.node_adjacency();
    let mut k = CsrMatrix::from_pattern(mesh.nn(), ptr, idx);
    let n = mesh.nloc();
    for e in 0..mesh.ne() {
        let el = mesh.elem(e);
        for a in 0..n {
            for b in 0..n {
                let dot: f64 = (0..mesh.dim).map(|m| mesh.dphi[m][e * n + a] * mesh.dphi[m][e * n + b]).sum();
                k.add(el[a], el[b], mesh.volumes[e] * dot);
            }
        }
    }
    k
}

/// Minimum of `½ uᵀKu − bᵀu` over the free dofs with zero Dirichlet data,
/// `−½ bᵀu` at the solution of the dense system.
pub fn linear_solve_energy(mesh: &Mesh, load: &LinearLoad) -> f64 {
    let k = stiffness(mesh);
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

/// `base` plus independent uniform noise of amplitude `amp` on every entry.
pub fn perturbed(base: &FlatField, amp: f64, rng: &mut impl Rng) -> FlatField {
    let mut v = base.clone();
    v.values.iter_mut().for_each(|x| *x += rng.gen_range(-amp..amp));
    v
}

/// `k` distinct entries of `from`, chosen at random.
pub fn sample(from: &[usize], k: usize, rng: &mut impl Rng) -> Vec<usize> {
    rand::seq::index::sample(rng, from.len(), k.min(from.len())).into_iter().map(|i| from[i]).collect()
}

/// Largest absolute entry.
pub fn inf_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}
