//! Trust-region Newton method with a Steihaug truncated-CG subproblem solver.

use super::hessian::{colored_hessian, distance2_coloring};
use super::{inf_norm, norm2, HessianMode, Objective, SolveOptions, SolverOutcome, StopReason};
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Hessian action used inside one outer iteration.
enum Curvature {
    Differenced { step_scale: f64 },
    Explicit(CsrMatrix),
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `H d` by central differences of the gradient with step `√ε (1+‖x‖)/‖d‖`.
pub fn differenced_hvp<O: Objective + ?Sized>(obj: &O, x: &[f64], d: &[f64], step_scale: f64) -> Result<Vec<f64>> {
    let dn = norm2(d);
    if dn == 0.0 {
        return Ok(vec![0.0; d.len()]);
    }
    let h = step_scale * (1.0 + norm2(x)) / dn;
    let xp: Vec<f64> = x.iter().zip(d).map(|(a, b)| a + h * b).collect();
    let xm: Vec<f64> = x.iter().zip(d).map(|(a, b)| a - h * b).collect();
    let gp = obj.gradient(&xp)?;
    let gm = obj.gradient(&xm)?;
    Ok(gp.iter().zip(&gm).map(|(a, b)| (a - b) / (2.0 * h)).collect())
}

impl Curvature {
    fn apply<O: Objective + ?Sized>(&self, obj: &O, x: &[f64], d: &[f64]) -> Result<Vec<f64>> {
        match self {
            Curvature::Differenced { step_scale } => differenced_hvp(obj, x, d, *step_scale),
            Curvature::Explicit(h) => Ok(h.matvec(d)),
        }
    }
}

struct SubproblemStep {
    s: Vec<f64>,
    /// `g·s + ½ sᵀHs`
    model_change: f64,
    on_boundary: bool,
    cg_iters: usize,
}

/// Largest `τ ≥ 0` with `‖z + τ d‖_M = radius`.
fn boundary_tau(z: &[f64], d: &[f64], m: &[f64], radius: f64) -> f64 {
    let mdot = |a: &[f64], b: &[f64]| a.iter().zip(b).zip(m).map(|((x, y), w)| x * y * w).sum::<f64>();
    let dd = mdot(d, d);
    let zd = mdot(z, d);
    let zz = mdot(z, z);
    let disc = (zd * zd + dd * (radius * radius - zz)).max(0.0);
    (-zd + disc.sqrt()) / dd
}

#[allow(clippy::too_many_arguments)]
fn steihaug<O: Objective + ?Sized>(
    obj: &O,
    x: &[f64],
    g: &[f64],
    curvature: &Curvature,
    precond: &[f64],
    radius: f64,
    tol: f64,
    max_cg: usize,
) -> Result<SubproblemStep> {
    let n = g.len();
    let mnorm = |a: &[f64]| a.iter().zip(precond).map(|(x, w)| x * x * w).sum::<f64>().sqrt();
    let mut z = vec![0.0; n];
    let mut hz = vec![0.0; n];
    let mut r = g.to_vec();
    let mut y: Vec<f64> = r.iter().zip(precond).map(|(a, w)| a / w).collect();
    let mut d: Vec<f64> = y.iter().map(|a| -a).collect();
    let mut ry = dot(&r, &y);
    let model = |z: &[f64], hz: &[f64]| dot(g, z) + 0.5 * dot(z, hz);
    let finish_boundary = |z: &[f64], hz: &[f64], d: &[f64], hd: &[f64], iters: usize| {
        let tau = boundary_tau(z, d, precond, radius);
        let s: Vec<f64> = z.iter().zip(d).map(|(a, b)| a + tau * b).collect();
        let hs: Vec<f64> = hz.iter().zip(hd).map(|(a, b)| a + tau * b).collect();
        SubproblemStep { model_change: model(&s, &hs), s, on_boundary: true, cg_iters: iters }
    };
    for it in 0..max_cg {
        if norm2(&r) <= tol {
            return Ok(SubproblemStep { model_change: model(&z, &hz), s: z, on_boundary: false, cg_iters: it });
        }
        let hd = curvature.apply(obj, x, &d)?;
        let dhd = dot(&d, &hd);
        if dhd <= 0.0 || !dhd.is_finite() {
            return Ok(finish_boundary(&z, &hz, &d, &hd, it + 1));
        }
        let alpha = ry / dhd;
        let z_next: Vec<f64> = z.iter().zip(&d).map(|(a, b)| a + alpha * b).collect();
        if mnorm(&z_next) >= radius {
            return Ok(finish_boundary(&z, &hz, &d, &hd, it + 1));
        }
        z = z_next;
        for (a, b) in hz.iter_mut().zip(&hd) {
            *a += alpha * b;
        }
        for (a, b) in r.iter_mut().zip(&hd) {
            *a += alpha * b;
        }
        y = r.iter().zip(precond).map(|(a, w)| a / w).collect();
        let ry_next = dot(&r, &y);
        let beta = ry_next / ry;
        ry = ry_next;
        for (di, yi) in d.iter_mut().zip(&y) {
            *di = -yi + beta * *di;
        }
    }
    Ok(SubproblemStep { model_change: model(&z, &hz), s: z, on_boundary: false, cg_iters: max_cg })
}

pub fn trust_region<O: Objective + ?Sized>(obj: &O, x0: &[f64], opts: &SolveOptions) -> Result<SolverOutcome> {
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut f = obj.value(&x)?;
    if !f.is_finite() {
        return Err(Error::InvalidStart(f));
    }
    let mut g = obj.gradient(&x)?;
    let g0 = inf_norm(&g);
    let g0_2 = norm2(&g).max(f64::MIN_POSITIVE);
    let gtol = opts.tol_g * g0.max(1.0);
    let mut radius = opts.initial_radius;
    let mut history = vec![f];
    let mut cg_total = 0;
    let coloring = match (opts.hessian, obj.sparsity()) {
        (HessianMode::Colored { .. }, Some(p)) => Some(distance2_coloring(p)),
        (HessianMode::Colored { .. }, None) => {
            return Err(Error::InvalidArgument("explicit Hessian needs a sparsity pattern".into()))
        }
        _ => None,
    };

    let mut reason = StopReason::MaxIterations;
    let mut iters = 0;
    while iters < opts.max_iters {
        let gnorm = inf_norm(&g);
        if gnorm <= gtol {
            reason = StopReason::Gradient;
            break;
        }
        iters += 1;
        let (curvature, precond) = match (&coloring, opts.hessian) {
            (Some(col), HessianMode::Colored { jacobi }) => {
                let pattern = obj.sparsity().expect("checked above");
                let step = opts.hvp_step * (1.0 + inf_norm(&x));
                let h = colored_hessian(obj, &x, pattern, col, step)?;
                let precond = if jacobi { jacobi_weights(&h) } else { vec![1.0; n] };
                (Curvature::Explicit(h), precond)
            }
            _ => (Curvature::Differenced { step_scale: opts.hvp_step }, vec![1.0; n]),
        };
        let eta = (norm2(&g) / g0_2).sqrt().min(0.5);
        let cg_tol = eta * norm2(&g);
        let max_cg = opts.max_cg.unwrap_or(n.max(1) * 2);
        let mut accepted = false;
        let mut rejections = 0;
        while !accepted {
            let sub = steihaug(obj, &x, &g, &curvature, &precond, radius, cg_tol, max_cg)?;
            cg_total += sub.cg_iters;
            let x_trial: Vec<f64> = x.iter().zip(&sub.s).map(|(a, b)| a + b).collect();
            let f_trial = obj.value(&x_trial)?;
            let predicted = -sub.model_change;
            let rho = if f_trial.is_finite() && predicted > 0.0 { (f - f_trial) / predicted } else { 0.0 };
            let step_norm = sub.s.iter().zip(&precond).map(|(a, w)| a * a * w).sum::<f64>().sqrt();
            if rho < 0.25 {
                radius = 0.25 * radius.min(step_norm);
            } else if rho > 0.75 && sub.on_boundary {
                radius *= 2.0;
            }
            if opts.verbose {
                eprintln!(
                    "tr {iters:4} J={f:.10e} |g|={gnorm:.3e} radius={radius:.3e} rho={rho:.3} cg={}",
                    sub.cg_iters
                );
            }
            if rho > 1e-4 {
                accepted = true;
                let df = f - f_trial;
                let step_inf = inf_norm(&sub.s);
                x = x_trial;
                f = f_trial;
                history.push(f);
                g = obj.gradient(&x)?;
                if step_inf <= opts.tol_step * (1.0 + inf_norm(&x)) {
                    reason = StopReason::Step;
                } else if df.abs() <= opts.tol_f * (1.0 + f.abs()) {
                    reason = StopReason::EnergyChange;
                }
            } else {
                rejections += 1;
                if radius <= 1e-14 * (1.0 + norm2(&x)) || rejections > 60 {
                    return Err(Error::Stagnation {
                        iters,
                        reason: format!("no acceptable step, radius {radius:.3e}, |g| = {gnorm:.3e}"),
                    });
                }
            }
        }
        if matches!(reason, StopReason::Step | StopReason::EnergyChange) {
            break;
        }
    }
    if reason == StopReason::MaxIterations && inf_norm(&g) <= gtol {
        reason = StopReason::Gradient;
    }
    Ok(SolverOutcome { grad_norm: inf_norm(&g), x, f, iters, reason, history, inner_iters: cg_total })
}

/// `diag(H) / mean(diag(H))`, with non-positive entries replaced by 1.
fn jacobi_weights(h: &CsrMatrix) -> Vec<f64> {
    let diag = h.diagonal();
    let positive: Vec<f64> = diag.iter().copied().filter(|&x| x > 0.0).collect();
    if positive.is_empty() {
        return vec![1.0; diag.len()];
    }
    let mean = positive.iter().sum::<f64>() / positive.len() as f64;
    diag.iter().map(|&x| if x > 0.0 { x / mean } else { 1.0 }).collect()
}
