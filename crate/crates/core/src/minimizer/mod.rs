//! Unconstrained minimization over the free dofs with Dirichlet values held fixed.
//!
//! The default solver is a trust-region Newton method whose subproblems are
//! solved by Steihaug truncated CG using Hessian-vector products from
//! differenced gradients. An explicit Hessian assembled by colored finite
//! differences over [`SparsityPattern`] and an L-BFGS solver are available
//! through [`SolveOptions`].
//!
//! Stopping (whichever comes first): `‖g‖_∞ ≤ tol_g · max(1, ‖g(x₀)‖_∞)`;
//! on an accepted step, `‖s‖_∞ ≤ tol_step (1 + ‖x‖_∞)` or
//! `|ΔJ| ≤ tol_f (1 + |J|)`; or `max_iters`.

mod hessian;
mod lbfgs;
mod trust_region;

use std::time::Instant;

pub use hessian::{color_count, colored_hessian, distance2_coloring, hessian_sparsity, SparsityPattern};
pub use lbfgs::lbfgs;
pub use trust_region::{differenced_hvp, trust_region};

use crate::assembly::{apply_dirichlet, energy, FlatField, LinearLoad};
use crate::density::DensityModel;
use crate::error::{Error, Result};
use crate::gradient::{GradientConfig, GradientContext};
use crate::mesh::{DirichletSpec, Mesh};
use crate::patches::Patches;

/// A smooth function of the free variables.
pub trait Objective {
    /// Value at `x`; `+∞` marks an inadmissible point.
    fn value(&self, x: &[f64]) -> Result<f64>;
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>>;
    /// Hessian sparsity, required by [`HessianMode::Colored`].
    fn sparsity(&self) -> Option<&SparsityPattern> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Solver {
    #[default]
    TrustRegion,
    Lbfgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HessianMode {
    /// Hessian-vector products from differenced gradients.
    #[default]
    Free,
    /// Explicit Hessian from colored central differences, optionally with a
    /// Jacobi-scaled trust region.
    Colored { jacobi: bool },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub solver: Solver,
    pub tol_g: f64,
    pub tol_step: f64,
    pub tol_f: f64,
    pub max_iters: usize,
    pub initial_radius: f64,
    /// Relative difference step for Hessian products and columns.
    pub hvp_step: f64,
    pub hessian: HessianMode,
    /// CG iteration cap per subproblem; `None` means twice the dimension.
    pub max_cg: Option<usize>,
    pub verbose: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            solver: Solver::TrustRegion,
            tol_g: 1e-6,
            tol_step: 1e-6,
            tol_f: 1e-6,
            max_iters: 1000,
            initial_radius: 1.0,
            hvp_step: f64::EPSILON.sqrt(),
            hessian: HessianMode::Free,
            max_cg: None,
            verbose: false,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.tol_g, self.tol_step, self.tol_f, self.initial_radius, self.hvp_step];
        if positive.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(Error::InvalidArgument("solver tolerances and steps must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Gradient,
    Step,
    EnergyChange,
    MaxIterations,
}

/// Raw solver output over the free variables.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub iters: usize,
    /// CG iterations (trust region) or energy evaluations (L-BFGS).
    pub inner_iters: usize,
    pub grad_norm: f64,
    pub reason: StopReason,
    /// Energies of the accepted iterates, starting with the initial point.
    pub history: Vec<f64>,
}

impl SolverOutcome {
    pub fn converged(&self) -> bool {
        self.reason != StopReason::MaxIterations
    }
}

pub(crate) fn inf_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub(crate) fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Minimizes `obj` from `x0` with the selected solver.
pub fn minimize<O: Objective + ?Sized>(obj: &O, x0: &[f64], opts: &SolveOptions) -> Result<SolverOutcome> {
    opts.validate()?;
    match opts.solver {
        Solver::TrustRegion => trust_region(obj, x0, opts),
        Solver::Lbfgs => lbfgs(obj, x0, opts),
    }
}

/// The discrete energy as a function of the free dofs, with the remaining
/// entries taken from a fixed template field.
pub struct EnergyObjective<'a, M: DensityModel + ?Sized> {
    pub engine: GradientContext<'a, M>,
    pub template: FlatField,
    pattern: Option<SparsityPattern>,
}

impl<'a, M: DensityModel + ?Sized> EnergyObjective<'a, M> {
    pub fn new(
        mesh: &'a Mesh,
        patches: &'a Patches,
        model: &'a M,
        load: &'a LinearLoad,
        config: GradientConfig,
        template: FlatField,
    ) -> Result<Self> {
        let engine = GradientContext::new(mesh, patches, model, load, config)?;
        Ok(EnergyObjective { engine, template, pattern: None })
    }

    /// Enables explicit-Hessian solvers.
    pub fn with_sparsity(mut self) -> Self {
        self.pattern = Some(hessian_sparsity(self.engine.mesh, self.engine.ncomp()));
        self
    }

    pub fn field(&self, x: &[f64]) -> FlatField {
        let mut v = self.template.clone();
        v.scatter(&self.engine.mesh.partition.dofs_minim, x);
        v
    }

    pub fn free_values(&self, v: &FlatField) -> Vec<f64> {
        v.restrict(&self.engine.mesh.partition.dofs_minim)
    }
}

impl<M: DensityModel + ?Sized> Objective for EnergyObjective<'_, M> {
    fn value(&self, x: &[f64]) -> Result<f64> {
        let e = &self.engine;
        Ok(energy(&self.field(x), e.mesh, e.model, e.load)?.total)
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.engine.gradient(&self.field(x))
    }

    fn sparsity(&self) -> Option<&SparsityPattern> {
        self.pattern.as_ref()
    }
}

/// Minimizer of the discrete energy.
#[derive(Debug, Clone, PartialEq)]
pub struct MinimizeResult {
    /// Full field; Dirichlet entries are those of the initial field.
    pub u: FlatField,
    /// `J(u)`.
    pub energy: f64,
    /// `J_grad(u)`, the energy without the linear term.
    pub energy_grad: f64,
    pub iters: usize,
    pub inner_iters: usize,
    pub grad_norm: f64,
    pub wall_time: f64,
    pub reason: StopReason,
    pub history: Vec<f64>,
}

impl MinimizeResult {
    pub fn converged(&self) -> bool {
        self.reason != StopReason::MaxIterations
    }
}

/// Everything that defines one discrete energy.
pub struct Problem<'a, M: DensityModel + ?Sized> {
    pub mesh: &'a Mesh,
    pub patches: &'a Patches,
    pub model: &'a M,
    pub load: &'a LinearLoad,
    pub gradient: GradientConfig,
}

impl<M: DensityModel + ?Sized> Clone for Problem<'_, M> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<M: DensityModel + ?Sized> Copy for Problem<'_, M> {}

/// Minimizes the energy from `v0`, whose Dirichlet entries are kept.
pub fn minimize_energy<M: DensityModel + ?Sized>(
    problem: Problem<'_, M>,
    v0: &FlatField,
    opts: &SolveOptions,
) -> Result<MinimizeResult> {
    let start = Instant::now();
    let Problem { mesh, patches, model, load, gradient } = problem;
    let mut obj = EnergyObjective::new(mesh, patches, model, load, gradient, v0.clone())?;
    if matches!(opts.hessian, HessianMode::Colored { .. }) && opts.solver == Solver::TrustRegion {
        obj = obj.with_sparsity();
    }
    let x0 = obj.free_values(v0);
    let out = minimize(&obj, &x0, opts)?;
    let u = obj.field(&out.x);
    let e = energy(&u, mesh, model, load)?;
    Ok(MinimizeResult {
        u,
        energy: e.total,
        energy_grad: e.gradient_part,
        iters: out.iters,
        inner_iters: out.inner_iters,
        grad_norm: out.grad_norm,
        wall_time: start.elapsed().as_secs_f64(),
        reason: out.reason,
        history: out.history,
    })
}

/// Builds an initial guess for load parameter `t` from the previous minimizer
/// and its parameter; used when the plain warm start is inadmissible.
pub type Predictor<'a> = dyn Fn(&FlatField, f64, f64) -> FlatField + 'a;

/// Sequence of minimizations at `t = s/steps`, `s = 1..=steps`, each started
/// from the previous minimizer with the Dirichlet values of step `s` written
/// over it.
pub fn continuation_solve<M: DensityModel + ?Sized>(
    problem: Problem<'_, M>,
    spec: &DirichletSpec,
    steps: usize,
    v_start: &FlatField,
    opts: &SolveOptions,
    predictor: Option<&Predictor<'_>>,
    mut on_step: impl FnMut(usize, &MinimizeResult),
) -> Result<Vec<MinimizeResult>> {
    let mut results = Vec::with_capacity(steps);
    let mut prev = v_start.clone();
    let mut t_prev = 0.0;
    for s in 1..=steps {
        let t = s as f64 / steps as f64;
        let annotate = |e: Error| Error::LoadStep { step: s, source: Box::new(e) };
        let mut v0 = prev.clone();
        apply_dirichlet(&mut v0, problem.mesh, spec, t);
        let admissible = energy(&v0, problem.mesh, problem.model, problem.load).map_err(annotate)?.total.is_finite();
        if !admissible {
            if let Some(pred) = predictor {
                log::info!("step {s}: warm start inadmissible, using predictor");
                v0 = pred(&prev, t_prev, t);
                apply_dirichlet(&mut v0, problem.mesh, spec, t);
            }
        }
        let r = minimize_energy(problem, &v0, opts).map_err(annotate)?;
        on_step(s, &r);
        prev = r.u.clone();
        t_prev = t;
        results.push(r);
    }
    Ok(results)
}

#[cfg(test)]
mod tests;
