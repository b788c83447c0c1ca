//! Limited-memory BFGS with backtracking Armijo line search.

use std::collections::VecDeque;

use super::{inf_norm, Objective, SolveOptions, SolverOutcome, StopReason};
use crate::error::{Error, Result};

const MEMORY: usize = 10;
const ARMIJO: f64 = 1e-4;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Two-loop recursion: `-H g` for the current pair history.
fn direction(g: &[f64], pairs: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y, rho) in pairs.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = pairs.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|x| *x *= gamma);
    }
    for ((s, y, rho), a) in pairs.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter_mut().for_each(|x| *x = -*x);
    q
}

pub fn lbfgs<O: Objective + ?Sized>(obj: &O, x0: &[f64], opts: &SolveOptions) -> Result<SolverOutcome> {
    let mut x = x0.to_vec();
    let mut f = obj.value(&x)?;
    if !f.is_finite() {
        return Err(Error::InvalidStart(f));
    }
    let mut g = obj.gradient(&x)?;
    let gtol = opts.tol_g * inf_norm(&g).max(1.0);
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(MEMORY);
    let mut history = vec![f];
    let mut reason = StopReason::MaxIterations;
    let mut iters = 0;
    let mut evaluations = 0;
    while iters < opts.max_iters {
        if inf_norm(&g) <= gtol {
            reason = StopReason::Gradient;
            break;
        }
        iters += 1;
        let mut d = direction(&g, &pairs);
        let mut slope = dot(&g, &d);
        if slope >= 0.0 {
            pairs.clear();
            d = g.iter().map(|x| -x).collect();
            slope = dot(&g, &d);
        }
        // first step without curvature information is limited to the initial radius
        let mut t = if pairs.is_empty() { (opts.initial_radius / super::norm2(&d)).min(1.0) } else { 1.0 };
        let (x_new, f_new) = loop {
            let trial: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + t * b).collect();
            let ft = obj.value(&trial)?;
            evaluations += 1;
            if ft.is_finite() && ft <= f + ARMIJO * t * slope {
                break (trial, ft);
            }
            t *= 0.5;
            if t * inf_norm(&d) <= 1e-16 * (1.0 + inf_norm(&x)) {
                return Err(Error::Stagnation { iters, reason: "line search found no decrease".into() });
            }
        };
        let g_new = obj.gradient(&x_new)?;
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * super::norm2(&s) * super::norm2(&y) {
            if pairs.len() == MEMORY {
                pairs.pop_front();
            }
            pairs.push_back((s.clone(), y, 1.0 / sy));
        }
        if opts.verbose {
            eprintln!("lbfgs {iters:4} J={f_new:.10e} |g|={:.3e} step={t:.3e}", inf_norm(&g_new));
        }
        let df = f - f_new;
        x = x_new;
        f = f_new;
        g = g_new;
        history.push(f);
        if inf_norm(&s) <= opts.tol_step * (1.0 + inf_norm(&x)) {
            reason = StopReason::Step;
            break;
        }
        if df.abs() <= opts.tol_f * (1.0 + f.abs()) {
            reason = StopReason::EnergyChange;
            break;
        }
    }
    if reason == StopReason::MaxIterations && inf_norm(&g) <= gtol {
        reason = StopReason::Gradient;
    }
    Ok(SolverOutcome { grad_norm: inf_norm(&g), x, f, iters, reason, history, inner_iters: evaluations })
}
