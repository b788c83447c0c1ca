//! Gradients of the discrete energy with respect to the free dofs.
//!
//! Both engines work on the flat patch arrays: per-row contributions are
//! computed for `d` stacked component blocks, summed per patch at the
//! extended prefix indices, reordered from block order to interleaved dof
//! order and restricted to the free dofs.
//!
//! * [`numeric_gradient`] differences per-patch energies. Perturbing the dof
//!   `(i, j)` only changes row `j` of `F` on the patch of node `i`, so a
//!   single batched evaluation over `d·‖T‖` rows per offset covers all dofs.
//! * [`exact_gradient`] contracts `dW/dF` with the constant basis gradient
//!   of the patch owner.

use crate::assembly::{evaluate_f, gather_rows, FlatField, LinearLoad};
use crate::density::{BatchedF, DensityModel};
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::patches::{segment_sums, Patches};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GradientMode {
    #[default]
    Exact,
    Numeric,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientConfig {
    pub mode: GradientMode,
    /// Central-difference step of the numeric engine.
    pub eps: f64,
}

impl Default for GradientConfig {
    fn default() -> Self {
        GradientConfig { mode: GradientMode::Exact, eps: 1e-8 }
    }
}

impl GradientConfig {
    pub fn numeric(eps: f64) -> Self {
        GradientConfig { mode: GradientMode::Numeric, eps }
    }

    pub fn exact() -> Self {
        GradientConfig { mode: GradientMode::Exact, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mode == GradientMode::Numeric && !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::InvalidArgument(format!("difference step must be positive, got {}", self.eps)));
        }
        Ok(())
    }
}

/// Stacked gradients: block `j` (rows `j‖T‖..(j+1)‖T‖`) replaces tensor row
/// `j` of `f_patches` by `g_rows[j]` and copies every other tensor row.
pub fn evaluate_gg(f_patches: &BatchedF, g_rows: &[Vec<Vec<f64>>]) -> BatchedF {
    let (d, dim) = (f_patches.ncomp, f_patches.dim);
    assert_eq!(g_rows.len(), d);
    let rows = f_patches.rows();
    let mut out = BatchedF { ncomp: d, dim, entries: Vec::with_capacity(d * dim) };
    for jj in 0..d {
        for m in 0..dim {
            let mut e = Vec::with_capacity(d * rows);
            for (b, g) in g_rows.iter().enumerate() {
                if b == jj {
                    e.extend_from_slice(&g[m]);
                } else {
                    e.extend_from_slice(f_patches.get(jj, m));
                }
            }
            out.entries.push(e);
        }
    }
    out
}

/// Tensor row `F_{j,·}` recomputed on every patch row after shifting the
/// owner's value of component `j` by `offset`.
fn perturbed_row(patches: &Patches, vj: &[f64], offset: f64) -> Vec<Vec<f64>> {
    let n = patches.nloc();
    let shifted: Vec<f64> = vj
        .iter()
        .zip(&patches.logical)
        .map(|(&v, &owner)| if owner { v + offset } else { v })
        .collect();
    patches
        .dphi
        .iter()
        .map(|dm| {
            shifted
                .chunks_exact(n)
                .zip(dm.chunks_exact(n))
                .map(|(v, d)| v.iter().zip(d).map(|(a, b)| a * b).sum())
                .collect()
        })
        .collect()
}

/// `∂F_{j,m}/∂v_{(i,j)}` on each patch row: the owner's basis gradient, `table[m][r]`.
pub fn df_dv_table(patches: &Patches) -> Vec<Vec<f64>> {
    let n = patches.nloc();
    let owners: Vec<usize> = (0..patches.rows()).map(|r| patches.owner_position(r)).collect();
    patches
        .dphi
        .iter()
        .map(|dm| owners.iter().enumerate().map(|(r, &l)| dm[r * n + l]).collect())
        .collect()
}

/// Patch sums in block order `seg[j|M| + i]` to interleaved free-node order `i d + j`.
fn interleave_blocks(seg: &[f64], d: usize) -> Vec<f64> {
    let nm = seg.len() / d;
    let mut out = vec![0.0; seg.len()];
    for j in 0..d {
        for i in 0..nm {
            out[i * d + j] = seg[j * nm + i];
        }
    }
    out
}

/// Everything the engines need besides the field, built once per mesh.
pub struct GradientContext<'a, M: DensityModel + ?Sized> {
    pub mesh: &'a Mesh,
    pub patches: &'a Patches,
    pub model: &'a M,
    pub load: &'a LinearLoad,
    pub config: GradientConfig,
    indx: Vec<usize>,
    dfdv: Vec<Vec<f64>>,
    b_free: Vec<f64>,
}

impl<'a, M: DensityModel + ?Sized> GradientContext<'a, M> {
    pub fn new(
        mesh: &'a Mesh,
        patches: &'a Patches,
        model: &'a M,
        load: &'a LinearLoad,
        config: GradientConfig,
    ) -> Result<Self> {
        config.validate()?;
        let d = model.components(mesh.dim);
        if patches.ncomp != d || mesh.partition.ncomp != d || load.b.ncomp != d {
            return Err(Error::InvalidArgument("mesh, patches, model and load disagree on components".into()));
        }
        Ok(GradientContext {
            mesh,
            patches,
            model,
            load,
            config,
            indx: patches.prefix_indices(d),
            dfdv: df_dv_table(patches),
            b_free: load.b.restrict(&mesh.partition.dofs_minim),
        })
    }

    pub fn ncomp(&self) -> usize {
        self.patches.ncomp
    }

    /// Gradient on the free dofs with the configured engine.
    pub fn gradient(&self, v: &FlatField) -> Result<Vec<f64>> {
        match self.config.mode {
            GradientMode::Exact => self.exact(v),
            GradientMode::Numeric => self.numeric(v),
        }
    }

    fn check(&self, v: &FlatField) -> Result<()> {
        if v.ncomp != self.ncomp() || v.nn() != self.mesh.nn() {
            return Err(Error::InvalidArgument("field does not match the mesh".into()));
        }
        Ok(())
    }

    fn finish(&self, seg: &[f64], scale: f64) -> Result<Vec<f64>> {
        let full = interleave_blocks(seg, self.ncomp());
        let dofs = &self.mesh.partition.dofs_minim;
        let mut g = Vec::with_capacity(dofs.len());
        for (k, &local) in self.patches.dofs_local.iter().enumerate() {
            let x = full[local];
            if !x.is_finite() {
                return Err(Error::InadmissibleDof { dof: dofs[k] });
            }
            g.push(x * scale - self.b_free[k]);
        }
        Ok(g)
    }

    /// Per-patch energy sums of the stacked states shifted by `offset`, in block order.
    pub fn patch_energies(&self, v: &FlatField, offset: f64) -> Result<Vec<f64>> {
        self.check(v)?;
        let vp = gather_rows(&v.to_nodal(), self.patches);
        let f = evaluate_f(self.patches, &vp)?;
        Ok(self.stacked_energies(&vp, &f, offset))
    }

    fn stacked_energies(&self, vp: &[Vec<f64>], f: &BatchedF, offset: f64) -> Vec<f64> {
        let g: Vec<_> = vp.iter().map(|vj| perturbed_row(self.patches, vj, offset)).collect();
        let gg = evaluate_gg(f, &g);
        let w = self.model.density(&gg);
        let rows = self.patches.rows();
        let e: Vec<f64> = w.iter().enumerate().map(|(r, &x)| x * self.patches.volumes[r % rows]).collect();
        segment_sums(&e, &self.indx)
    }

    /// Weighted difference `Σ_o w_o E(v + o e_n) / eps − b` over arbitrary offsets.
    pub fn difference_gradient(&self, v: &FlatField, offsets: &[f64], weights: &[f64]) -> Result<Vec<f64>> {
        self.check(v)?;
        assert_eq!(offsets.len(), weights.len());
        let vp = gather_rows(&v.to_nodal(), self.patches);
        let f = evaluate_f(self.patches, &vp)?;
        let mut acc = vec![0.0; self.indx.len()];
        for (&o, &w) in offsets.iter().zip(weights) {
            let e = self.stacked_energies(&vp, &f, o);
            for (a, x) in acc.iter_mut().zip(&e) {
                // an infinite state must not cancel against its mirror
                *a += if x.is_finite() { w * x } else { f64::INFINITY };
            }
        }
        self.finish(&acc, 1.0 / self.config.eps)
    }

    /// Central differences of patch energies with step `config.eps`.
    pub fn numeric(&self, v: &FlatField) -> Result<Vec<f64>> {
        let eps = self.config.eps;
        self.difference_gradient(v, &[-eps, eps], &[-0.5, 0.5])
    }

    /// Chain-rule gradient `Σ_k |T_k| Σ_m dW/dF_{j,m} ∂φ_i/∂x_m − b`.
    pub fn exact(&self, v: &FlatField) -> Result<Vec<f64>> {
        self.check(v)?;
        let v_el = gather_rows(&v.to_nodal(), self.mesh);
        let f = evaluate_f(self.mesh, &v_el)?;
        let dw = self.model.ddensity(&f)?;
        let (d, dim) = (self.ncomp(), self.mesh.dim);
        let rows = self.patches.rows();
        let mut contrib = vec![0.0; d * rows];
        for j in 0..d {
            let block = &mut contrib[j * rows..(j + 1) * rows];
            for m in 0..dim {
                let dwm = dw.get(j, m);
                let table = &self.dfdv[m];
                for (r, c) in block.iter_mut().enumerate() {
                    *c += dwm[self.patches.elems[r]] * table[r];
                }
            }
            for (c, vol) in block.iter_mut().zip(&self.patches.volumes) {
                *c *= vol;
            }
        }
        let seg = segment_sums(&contrib, &self.indx);
        self.finish(&seg, 1.0)
    }
}

/// Central-difference gradient on the free dofs.
pub fn numeric_gradient<M: DensityModel + ?Sized>(
    v: &FlatField,
    mesh: &Mesh,
    patches: &Patches,
    model: &M,
    load: &LinearLoad,
    eps: f64,
) -> Result<Vec<f64>> {
    GradientContext::new(mesh, patches, model, load, GradientConfig::numeric(eps))?.numeric(v)
}

/// Chain-rule gradient on the free dofs.
pub fn exact_gradient<M: DensityModel + ?Sized>(
    v: &FlatField,
    mesh: &Mesh,
    patches: &Patches,
    model: &M,
    load: &LinearLoad,
) -> Result<Vec<f64>> {
    GradientContext::new(mesh, patches, model, load, GradientConfig::exact())?.exact(v)
}
