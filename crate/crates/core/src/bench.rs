//! The six benchmark scenarios and their tabular reports.
//!
//! 1. bar mesh and patch setup
//! 2. energy of the twisted bar
//! 3. exact versus numeric gradient
//! 4. twisting continuation of the bar
//! 5. loaded square with a hole (2D Neo-Hookean)
//! 6. p-Laplacian on the L-shape

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::PathBuf;
use std::time::Instant;

use crate::assembly::{energy, interpolate, FlatField, LinearLoad};
use crate::density::{ElasticParams, GradientNorm, NeoHookean, PLaplaceParams, PLaplacian};
use crate::error::{Error, Result};
use crate::gradient::{GradientConfig, GradientContext, GradientMode};
use crate::mesh::{
    generate_bar_mesh_3d, generate_lshape_mesh_2d, generate_square_with_hole_mesh_2d, lshape_boundary,
    DirichletSpec, Mesh,
};
use crate::minimizer::{continuation_solve, minimize_energy, MinimizeResult, Problem, SolveOptions};
use crate::patches::build_patches;
use crate::vtk::export_vtk;

pub const BAR_LENGTH: f64 = 0.4;
pub const BAR_WIDTH: f64 = 0.01;
pub const YOUNG: f64 = 2e8;
pub const POISSON: f64 = 0.3;
pub const HOLE_RADIUS: f64 = 1.0 / 3.0;
pub const HOLE_LOAD: [f64; 2] = [-3.5e7, -3.5e7];
/// Energies of the hole problem are reported divided by this factor.
pub const HOLE_ENERGY_SCALE: f64 = 1e7;

/// Rows of numbers under named columns, plus an echo of the configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkReport {
    pub id: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub config: Vec<(String, String)>,
    /// Worker threads available during timing.
    pub threads: usize,
}

impl BenchmarkReport {
    fn new(id: &str, columns: &[&str]) -> Self {
        BenchmarkReport {
            id: id.to_string(),
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
            config: Vec::new(),
            threads: 1,
        }
    }

    fn echo(&mut self, key: &str, value: impl ToString) {
        self.config.push((key.to_string(), value.to_string()));
    }

    fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let c = self.columns.iter().position(|s| s == name)?;
        Some(self.rows.iter().map(|r| r[c]).collect())
    }

    /// Header row plus one line per row; values use the shortest exact decimal form.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(&self.columns)?;
        for row in &self.rows {
            wr.write_record(row.iter().map(|x| x.to_string()))?;
        }
        wr.flush()?;
        Ok(())
    }

    /// `key,value` lines of the configuration echo.
    pub fn write_config_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["key", "value"])?;
        wr.write_record(["benchmark", self.id.as_str()])?;
        wr.write_record(["threads", self.threads.to_string().as_str()])?;
        for (k, v) in &self.config {
            wr.write_record([k, v])?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Columns and rows of a table written by [`write_csv`](Self::write_csv).
    pub fn read_csv<R: Read>(r: R) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
        let mut rd = csv::Reader::from_reader(r);
        let columns = rd.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|s| s.parse::<f64>().map_err(|e| Error::Parse(format!("{s}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Ok((columns, rows))
    }
}

/// Settings shared by the benchmarks; `None` fields take each benchmark's default.
#[derive(Debug, Clone, Default)]
pub struct BenchOptions {
    pub solve: SolveOptions,
    pub gradient: Option<GradientMode>,
    pub eps: Option<f64>,
    pub repeats: Option<usize>,
    /// Directory for VTK output; nothing is written when unset.
    pub vtk_dir: Option<PathBuf>,
}

impl BenchOptions {
    fn gradient_config(&self, mode: GradientMode, eps: f64) -> GradientConfig {
        GradientConfig { mode: self.gradient.unwrap_or(mode), eps: self.eps.unwrap_or(eps) }
    }

    fn echo_solver(&self, report: &mut BenchmarkReport) {
        let s = &self.solve;
        report.echo("solver", format!("{:?}", s.solver));
        report.echo("hessian", format!("{:?}", s.hessian));
        report.echo("tol_g", s.tol_g);
        report.echo("tol_step", s.tol_step);
        report.echo("tol_f", s.tol_f);
        report.echo("max_iters", s.max_iters);
    }
}

fn elastic_params() -> ElasticParams {
    ElasticParams::new(YOUNG, POISSON).expect("valid material")
}

/// The twisting deformation: rotation of the cross-section at `x` by `α x / lx`.
pub fn twist(x: &[f64], alpha: f64, lx: f64) -> Vec<f64> {
    let (s, c) = (alpha * x[0] / lx).sin_cos();
    vec![x[0], c * x[1] + s * x[2], -s * x[1] + c * x[2]]
}

/// `α² C1 ly lz (ly² + lz²) / (12 lx)`, the energy of the exact twist for small cross-sections.
pub fn analytic_twist_energy(alpha: f64, params: &ElasticParams, lx: f64, ly: f64, lz: f64) -> f64 {
    alpha * alpha * params.c1 * ly * lz * (ly * ly + lz * lz) / (12.0 * lx)
}

/// Left wall fixed, right wall rotated by `alpha_max · t`.
pub fn bar_twist_spec(alpha_max: f64) -> DirichletSpec {
    let tol = 1e-12;
    DirichletSpec::new().identity_region("left", move |x| x[0] < tol, 3).region(
        "right",
        move |x| x[0] > BAR_LENGTH - tol,
        &[0, 1, 2],
        move |x, t| twist(x, alpha_max * t, BAR_LENGTH),
    )
}

pub fn bar_mesh(level: usize) -> Result<Mesh> {
    generate_bar_mesh_3d(BAR_LENGTH, BAR_WIDTH, BAR_WIDTH, level)?.with_dirichlet(&bar_twist_spec(0.0), 3)
}

pub fn hole_spec() -> DirichletSpec {
    DirichletSpec::new()
        .identity_region("bottom", |x| x[1].abs() < 1e-12, 2)
        .identity_region("left", |x| x[0].abs() < 1e-12, 2)
}

pub fn hole_mesh(level: usize) -> Result<Mesh> {
    generate_square_with_hole_mesh_2d(level, HOLE_RADIUS)?.with_dirichlet(&hole_spec(), 2)
}

pub fn lshape_spec() -> DirichletSpec {
    DirichletSpec::new().zero_region("boundary", lshape_boundary, 1)
}

pub fn lshape_mesh(level: usize) -> Result<Mesh> {
    generate_lshape_mesh_2d(level)?.with_dirichlet(&lshape_spec(), 1)
}

fn best_of<T>(repeats: usize, mut f: impl FnMut() -> Result<T>) -> Result<(Option<T>, f64, f64)> {
    let mut times = Vec::with_capacity(repeats);
    let mut last = None;
    for _ in 0..repeats {
        let t = Instant::now();
        last = Some(f()?);
        times.push(t.elapsed().as_secs_f64());
    }
    let best = times.iter().copied().fold(f64::INFINITY, f64::min);
    let worst = times.iter().copied().fold(0.0, f64::max);
    if times.is_empty() {
        return Ok((None, 0.0, 0.0));
    }
    Ok((last, best, (worst - best) / best.max(f64::MIN_POSITIVE)))
}

fn vtk_path(opts: &BenchOptions, name: String) -> Option<PathBuf> {
    opts.vtk_dir.as_ref().map(|d| d.join(name))
}

/// Mesh and patch sizes with setup times.
pub fn bench1(levels: &[usize]) -> Result<BenchmarkReport> {
    let mut report = BenchmarkReport::new(
        "bench1",
        &["level", "nodes", "elements", "free_dofs", "patch_count", "patch_rows", "mesh_entries", "patch_entries", "mesh_time", "patch_time"],
    );
    report.echo("domain", format!("bar {BAR_LENGTH} x {BAR_WIDTH} x {BAR_WIDTH}"));
    for &level in levels {
        let t = Instant::now();
        let mesh = bar_mesh(level)?;
        let mesh_time = t.elapsed().as_secs_f64();
        let t = Instant::now();
        let p = build_patches(&mesh)?;
        let patch_time = t.elapsed().as_secs_f64();
        let mesh_entries = mesh.nodes2coord.len()
            + mesh.elems2nodes.len()
            + mesh.volumes.len()
            + mesh.dphi.iter().map(Vec::len).sum::<usize>();
        let patch_entries = p.elems.len()
            + p.volumes.len()
            + p.elems2nodes.len()
            + p.logical.len()
            + p.dphi.iter().map(Vec::len).sum::<usize>();
        report.push(vec![
            level as f64,
            mesh.nn() as f64,
            mesh.ne() as f64,
            mesh.partition.dofs_minim.len() as f64,
            p.len() as f64,
            p.rows() as f64,
            mesh_entries as f64,
            patch_entries as f64,
            mesh_time,
            patch_time,
        ]);
    }
    Ok(report)
}

/// Energy of the exact twist interpolated on the bar, with evaluation timing.
pub fn bench2(levels: &[usize], alpha: f64, opts: &BenchOptions) -> Result<BenchmarkReport> {
    let repeats = opts.repeats.unwrap_or(10);
    let params = elastic_params();
    let model = NeoHookean::new(params);
    let analytic = analytic_twist_energy(alpha, &params, BAR_LENGTH, BAR_WIDTH, BAR_WIDTH);
    let mut report = BenchmarkReport::new("bench2", &["level", "free_dofs", "energy", "analytic", "time", "spread"]);
    report.echo("alpha", alpha);
    report.echo("young", YOUNG);
    report.echo("poisson", POISSON);
    report.echo("repeats", repeats);
    for &level in levels {
        let mesh = bar_mesh(level)?;
        let v = interpolate(|x| twist(x, alpha, BAR_LENGTH), &mesh, 3);
        let load = LinearLoad::zero(mesh.nn(), 3);
        let (_, time, spread) = best_of(repeats, || energy(&v, &mesh, &model, &load))?;
        let e = energy(&v, &mesh, &model, &load)?;
        if let Some(path) = vtk_path(opts, format!("bench2_level{level}.vtk")) {
            export_vtk(&path, &mesh, Some(&v), Some(&e.densities))?;
        }
        report.push(vec![level as f64, mesh.partition.dofs_minim.len() as f64, e.gradient_part, analytic, time, spread]);
    }
    Ok(report)
}

/// Relative infinity-norm distance of `b` from `a`.
pub fn relative_difference(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    let scale = a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    diff / scale.max(f64::MIN_POSITIVE)
}

/// Gradient timings of both engines at the twisted bar and their agreement.
pub fn bench3(levels: &[usize], alpha: f64, opts: &BenchOptions) -> Result<BenchmarkReport> {
    let repeats = opts.repeats.unwrap_or(10);
    let eps = opts.eps.unwrap_or(1e-6);
    let model = NeoHookean::new(elastic_params());
    let mut report =
        BenchmarkReport::new("bench3", &["level", "free_dofs", "time_exact", "time_numeric", "agreement"]);
    report.echo("alpha", alpha);
    report.echo("eps", eps);
    report.echo("repeats", repeats);
    if repeats == 0 {
        return Ok(report);
    }
    for &level in levels {
        let mesh = bar_mesh(level)?;
        let patches = build_patches(&mesh)?;
        let load = LinearLoad::zero(mesh.nn(), 3);
        let v = interpolate(|x| twist(x, alpha, BAR_LENGTH), &mesh, 3);
        let exact = GradientContext::new(&mesh, &patches, &model, &load, GradientConfig::exact())?;
        let numeric = GradientContext::new(&mesh, &patches, &model, &load, GradientConfig::numeric(eps))?;
        let (ge, te, _) = best_of(repeats, || exact.gradient(&v))?;
        let (gn, tn, _) = best_of(repeats, || numeric.gradient(&v))?;
        let agreement = relative_difference(&ge.unwrap(), &gn.unwrap());
        report.push(vec![level as f64, mesh.partition.dofs_minim.len() as f64, te, tn, agreement]);
    }
    Ok(report)
}

/// Initial guess at `t` from the minimizer at `t_prev`: every cross-section
/// is rotated further by `(t − t_prev) α_max x / lx`.
pub fn incremental_twist(mesh: &Mesh, alpha_max: f64) -> impl Fn(&FlatField, f64, f64) -> FlatField + '_ {
    move |prev, t_prev, t| {
        let mut v = prev.clone();
        for i in 0..mesh.nn() {
            let x = mesh.coord(i);
            let (s, c) = ((t - t_prev) * alpha_max * x[0] / BAR_LENGTH).sin_cos();
            let (y, z) = (prev.get(i, 1), prev.get(i, 2));
            v.values[i * 3 + 1] = c * y + s * z;
            v.values[i * 3 + 2] = -s * y + c * z;
        }
        v
    }
}

/// Twisting continuation of the bar over `steps` load steps.
pub fn bench4(level: usize, steps: usize, alpha_max: f64, opts: &BenchOptions) -> Result<BenchmarkReport> {
    let gradient = opts.gradient_config(GradientMode::Numeric, 1e-6);
    let mesh = bar_mesh(level)?;
    let patches = build_patches(&mesh)?;
    let model = NeoHookean::new(elastic_params());
    let load = LinearLoad::zero(mesh.nn(), 3);
    let problem = Problem { mesh: &mesh, patches: &patches, model: &model, load: &load, gradient };
    let spec = bar_twist_spec(alpha_max);
    let mut report = BenchmarkReport::new(
        "bench4",
        &["level", "free_dofs", "step", "alpha", "time", "iters", "inner_iters", "energy_grad", "grad_norm"],
    );
    report.echo("steps", steps);
    report.echo("alpha_max", alpha_max);
    report.echo("gradient", format!("{:?}", gradient.mode));
    report.echo("eps", gradient.eps);
    opts.echo_solver(&mut report);
    let id = interpolate(|x| x.to_vec(), &mesh, 3);
    let predictor = incremental_twist(&mesh, alpha_max);
    let mut rows = Vec::new();
    let mut vtk_error = None;
    continuation_solve(problem, &spec, steps, &id, &opts.solve, Some(&predictor), |s, r: &MinimizeResult| {
        let alpha = alpha_max * s as f64 / steps as f64;
        if opts.solve.verbose {
            eprintln!("step {s}/{steps}: J_grad = {:.6} ({} iterations, {:.2} s)", r.energy_grad, r.iters, r.wall_time);
        }
        rows.push(vec![
            level as f64,
            mesh.partition.dofs_minim.len() as f64,
            s as f64,
            alpha,
            r.wall_time,
            r.iters as f64,
            r.inner_iters as f64,
            r.energy_grad,
            r.grad_norm,
        ]);
        if let Some(path) = vtk_path(opts, format!("bench4_level{level}_step{s:02}.vtk")) {
            let dens = energy(&r.u, &mesh, &model, &load).map(|e| e.densities);
            let written = dens.and_then(|d| export_vtk(&path, &mesh, Some(&r.u), Some(&d)));
            if let Err(e) = written {
                vtk_error.get_or_insert(e);
            }
        }
    })?;
    if let Some(e) = vtk_error {
        return Err(e);
    }
    for row in rows {
        report.push(row);
    }
    Ok(report)
}

/// Loaded square with a hole, minimized with both gradient engines.
pub fn bench5(levels: &[usize], opts: &BenchOptions) -> Result<BenchmarkReport> {
    let eps = opts.eps.unwrap_or(1e-6);
    let model = NeoHookean::new(elastic_params());
    let modes: Vec<GradientMode> = match opts.gradient {
        Some(m) => vec![m],
        None => vec![GradientMode::Exact, GradientMode::Numeric],
    };
    let mut columns = vec!["level".to_string(), "free_dofs".to_string()];
    for m in &modes {
        let tag = format!("{m:?}").to_lowercase();
        columns.extend(["time", "iters", "energy_scaled"].iter().map(|c| format!("{c}_{tag}")));
    }
    let mut report = BenchmarkReport {
        columns,
        ..BenchmarkReport::new("bench5", &[])
    };
    report.echo("radius", HOLE_RADIUS);
    report.echo("load", format!("{:?}", HOLE_LOAD));
    report.echo("young", YOUNG);
    report.echo("poisson", POISSON);
    report.echo("energy_scale", HOLE_ENERGY_SCALE);
    report.echo("eps", eps);
    opts.echo_solver(&mut report);
    for &level in levels {
        let mesh = hole_mesh(level)?;
        let patches = build_patches(&mesh)?;
        let load = LinearLoad::constant(&mesh, &HOLE_LOAD);
        let v0 = interpolate(|x| x.to_vec(), &mesh, 2);
        let mut row = vec![level as f64, mesh.partition.dofs_minim.len() as f64];
        for &mode in &modes {
            let gradient = GradientConfig { mode, eps };
            let problem = Problem { mesh: &mesh, patches: &patches, model: &model, load: &load, gradient };
            let r = minimize_energy(problem, &v0, &opts.solve)?;
            if !r.converged() {
                log::warn!("bench5 level {level} ({mode:?}) hit the iteration limit");
            }
            row.extend([r.wall_time, r.iters as f64, r.energy / HOLE_ENERGY_SCALE]);
            if let Some(path) = vtk_path(opts, format!("bench5_level{level}_{mode:?}.vtk").to_lowercase()) {
                let e = energy(&r.u, &mesh, &model, &load)?;
                export_vtk(&path, &mesh, Some(&r.u), Some(&e.densities))?;
            }
        }
        report.push(row);
    }
    Ok(report)
}

/// Settings of the L-shape p-Laplacian problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PLaplaceProblem {
    pub p: f64,
    pub load: f64,
    pub norm: GradientNorm,
}

impl Default for PLaplaceProblem {
    fn default() -> Self {
        PLaplaceProblem { p: 3.0, load: -10.0, norm: GradientNorm::Componentwise }
    }
}

/// p-Laplacian minimization on the L-shape from the zero field.
pub fn bench6(levels: &[usize], setup: PLaplaceProblem, opts: &BenchOptions) -> Result<BenchmarkReport> {
    let gradient = opts.gradient_config(GradientMode::Numeric, 1e-5);
    let model = PLaplacian::new(PLaplaceParams::with_norm(setup.p, setup.norm)?);
    let mut report = BenchmarkReport::new("bench6", &["level", "free_dofs", "time", "iters", "inner_iters", "energy"]);
    report.echo("p", setup.p);
    report.echo("load", setup.load);
    report.echo("norm", format!("{:?}", setup.norm));
    report.echo("gradient", format!("{:?}", gradient.mode));
    report.echo("eps", gradient.eps);
    opts.echo_solver(&mut report);
    for &level in levels {
        let mesh = lshape_mesh(level)?;
        let patches = build_patches(&mesh)?;
        let load = LinearLoad::constant(&mesh, &[setup.load]);
        let problem = Problem { mesh: &mesh, patches: &patches, model: &model, load: &load, gradient };
        let r = minimize_energy(problem, &FlatField::zeros(mesh.nn(), 1), &opts.solve)?;
        if !r.converged() {
            log::warn!("bench6 level {level} hit the iteration limit");
        }
        if let Some(path) = vtk_path(opts, format!("bench6_level{level}.vtk")) {
            let e = energy(&r.u, &mesh, &model, &load)?;
            export_vtk(&path, &mesh, Some(&r.u), Some(&e.densities))?;
        }
        report.push(vec![
            level as f64,
            mesh.partition.dofs_minim.len() as f64,
            r.wall_time,
            r.iters as f64,
            r.inner_iters as f64,
            r.energy,
        ]);
    }
    Ok(report)
}

/// One full rotation, the angle of the energy benchmarks.
pub const FULL_TURN: f64 = 2.0 * PI;
