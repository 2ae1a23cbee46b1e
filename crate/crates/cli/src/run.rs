//! Mode execution and artifact output.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use ndarray::Array2;
use sha2::{Digest, Sha256};
use vseed_core::analysis::{
    estimate_audit_fractional, fit_line, fit_loglog, gronwall_bound, gronwall_violations, linear_series, rate_sweep,
    RateReport, SlopeFit,
};
use vseed_core::boundary::WallClosure;
use vseed_core::grid::inner;
use vseed_core::manufactured::spatial_study;
use vseed_core::nse::{
    solve_monolithic, solve_noslip, solve_split, write_diagnostics_csv, Mode, NseConfig, StepDiagnostics, Trajectory,
};
use vseed_core::oracle::dense_solve;
use vseed_core::saddle::{OperatorParams, SaddleSolver};
use vseed_core::stokes::{energy_audit_linear, solve_linear_evolution, LinearParams};
use vseed_core::{ChannelGrid, VelocityField};

use crate::config::{ExperimentConfig, ForceSpec, RunMode};

/// Relative tolerance of the banded solver against dense LU.
pub const ORACLE_RTOL: f64 = 1e-8;
/// Sup-in-time L2 agreement of the monolithic and split solvers.
pub const CROSSVAL_TOL: f64 = 1e-5;
pub const MANUFACTURED_ORDER: (f64, f64) = (2.0, 0.3);

#[derive(Debug, Clone)]
pub struct CrossvalReport {
    /// `(nx, ny, closure, relative difference)`
    pub oracle: Vec<(usize, usize, String, f64)>,
    pub split_vs_monolithic: f64,
}

impl CrossvalReport {
    pub fn oracle_max(&self) -> f64 {
        self.oracle.iter().map(|o| o.3).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct AuditRow {
    pub delta: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub fractional_ratio: Option<f64>,
}

#[derive(Debug, Clone)]
pub enum Detail {
    Single { diagnostics: Vec<StepDiagnostics>, gronwall_violations: Option<usize> },
    Sweep(RateReport),
    Audit(Vec<AuditRow>),
    Crossval(CrossvalReport),
    Manufactured { points: Vec<(f64, f64)>, fit: Option<SlopeFit> },
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub passed: bool,
    pub summary: String,
    pub detail: Detail,
    /// artifact file names relative to the output directory
    pub artifacts: Vec<String>,
}

fn forcing(c: &ExperimentConfig) -> Option<Arc<vseed_core::nse::ForceFn>> {
    match c.force {
        ForceSpec::None => None,
        ForceSpec::Uniform(a) => Some(Arc::new(move |g: &ChannelGrid, _t: f64| {
            VelocityField::from_fn(g, |_, _| a, |_, _| 0.0)
        })),
    }
}

fn nse_config(c: &ExperimentConfig, mode: Mode) -> NseConfig {
    let mut cfg = NseConfig::new(c.grid(), c.delta, c.alpha, c.dt, c.nt, mode);
    cfg.nu = c.nu;
    cfg.tol = c.tol;
    cfg.save_stride = c.save_stride;
    cfg.forcing = forcing(c);
    cfg.initial = c.initial;
    cfg
}

fn linear_params(c: &ExperimentConfig, delta: f64) -> LinearParams {
    LinearParams {
        delta,
        alpha: c.alpha,
        nu: c.nu,
        dt: c.dt,
        nt: c.nt,
        tol: c.tol,
    }
}

fn line(s: &mut String, ok: bool, text: impl std::fmt::Display) {
    let _ = writeln!(s, "{} {text}", if ok { "PASS" } else { "FAIL" });
}

fn single_summary(c: &ExperimentConfig, tr: &Trajectory, s: &mut String) -> bool {
    let d = &tr.diagnostics;
    let emax = d.iter().map(|x| x.energy).fold(0.0, f64::max);
    let div = d.iter().map(|x| x.div_max).fold(0.0, f64::max);
    let _ = writeln!(s, "steps = {}, dt = {}", tr.nt, tr.dt);
    let _ = writeln!(s, "energy: initial {:.6e}, final {:.6e}, max {:.6e}", d[0].energy, d[d.len() - 1].energy, emax);
    if emax == 0.0 {
        let _ = writeln!(s, "energy is zero throughout");
    }
    let mut ok = div <= c.projection_tol;
    line(s, ok, format_args!("divergence: max {div:.3e} <= {:.1e}", c.projection_tol));
    let unforced = c.force == ForceSpec::None && (c.mode == RunMode::NoSlip || c.flux == crate::config::FluxSpec::Zero);
    if unforced {
        let mono = d.windows(2).all(|p| p[1].energy <= p[0].energy);
        line(s, mono, "energy is non-increasing without forcing or flux");
        ok &= mono;
    }
    ok
}

/// Runs the configured mode and writes every artifact into `out`.
pub fn execute(c: &ExperimentConfig, out: &Path) -> vseed_core::Result<RunOutcome> {
    std::fs::create_dir_all(out)?;
    let mut s = String::new();
    let _ = writeln!(s, "mode = {:?}", c.mode);
    let _ = writeln!(s, "grid = {} x {}, lx = {}", c.nx, c.ny, c.lx);
    let mut artifacts = Vec::new();
    let u0 = VelocityField::zeros(&c.grid());
    let (passed, detail) = match c.mode {
        RunMode::NoSlip => {
            let tr = solve_noslip(&nse_config(c, Mode::NoSlip), &u0)?;
            tr.write_diagnostics_csv(&out.join("diagnostics.csv"))?;
            artifacts.push("diagnostics.csv".into());
            let ok = single_summary(c, &tr, &mut s);
            (ok, Detail::Single { diagnostics: tr.diagnostics, gronwall_violations: None })
        }
        RunMode::Monolithic => {
            let w = c.wall_data()?;
            let tr = solve_monolithic(&nse_config(c, Mode::Monolithic), &u0, &w)?;
            tr.write_diagnostics_csv(&out.join("diagnostics.csv"))?;
            artifacts.push("diagnostics.csv".into());
            let ok = single_summary(c, &tr, &mut s);
            (ok, Detail::Single { diagnostics: tr.diagnostics, gronwall_violations: None })
        }
        RunMode::Split => {
            let w = c.wall_data()?;
            let lin = solve_linear_evolution(&w, &c.grid(), linear_params(c, c.delta))?;
            let res = solve_split(&nse_config(c, Mode::Split), &u0, &lin)?;
            res.u.write_diagnostics_csv(&out.join("diagnostics.csv"))?;
            res.perturbation.write_diagnostics_csv(&out.join("perturbation_diagnostics.csv"))?;
            let bound = gronwall_bound(&res.ledger);
            write_gronwall(&out.join("gronwall.csv"), &res.ledger.entries.iter().map(|e| (e.t, e.u_sq)).collect::<Vec<_>>(), &bound)?;
            artifacts.extend(["diagnostics.csv", "perturbation_diagnostics.csv", "gronwall.csv"].map(String::from));
            let mut ok = single_summary(c, &res.u, &mut s);
            let gv = gronwall_violations(&res.ledger, &bound);
            line(&mut s, gv == 0, format_args!("gronwall: {gv} violations"));
            ok &= gv == 0;
            (ok, Detail::Single { diagnostics: res.u.diagnostics, gronwall_violations: Some(gv) })
        }
        RunMode::Sweep => {
            let w = c.wall_data()?;
            let report = rate_sweep(&nse_config(c, Mode::Split), &u0, &w, &c.deltas, c.alpha)?;
            write_diagnostics_csv(&out.join("diagnostics.csv"), &report.baseline)?;
            report.write_csv(&out.join("rate_report.csv"))?;
            report.write_w_csv(&out.join("rate_report_w.csv"))?;
            report.write_detail_csv(&out.join("rate_report_detail.csv"))?;
            artifacts.extend(
                ["diagnostics.csv", "rate_report.csv", "rate_report_w.csv", "rate_report_detail.csv"].map(String::from),
            );
            for p in report.points.iter().flatten() {
                let name = format!("delta_{}", p.delta);
                std::fs::create_dir_all(out.join(&name))?;
                let file = format!("{name}/diagnostics.csv");
                write_diagnostics_csv(&out.join(&file), &p.diagnostics)?;
                artifacts.push(file);
            }
            s.push_str(&report.summary());
            (report.passed(), Detail::Sweep(report))
        }
        RunMode::Audit => {
            let w = c.wall_data()?;
            let deltas = if c.deltas.is_empty() { vec![c.delta] } else { c.deltas.clone() };
            let mut rows = Vec::new();
            for &d in &deltas {
                let lin = solve_linear_evolution(&w, &c.grid(), linear_params(c, d))?;
                let a = energy_audit_linear(&lin, 0.1)?;
                let (z, g) = linear_series(&lin)?;
                rows.push(AuditRow {
                    delta: d,
                    lhs: *a.lhs.last().unwrap_or(&0.0),
                    rhs: a.rhs,
                    ratio: a.ratio,
                    fractional_ratio: estimate_audit_fractional(&z, &g, 0.1)?,
                });
            }
            write_audit(&out.join("audit.csv"), &rows)?;
            artifacts.push("audit.csv".into());
            let ok = audit_summary(&rows, &mut s);
            (ok, Detail::Audit(rows))
        }
        RunMode::Crossval => {
            let rep = crossval(c)?;
            write_crossval(&out.join("crossval.csv"), &rep)?;
            artifacts.push("crossval.csv".into());
            let ok_o = rep.oracle_max() <= ORACLE_RTOL;
            line(&mut s, ok_o, format_args!("oracle: {} solves, max relative difference {:.3e} <= {ORACLE_RTOL:.0e}", rep.oracle.len(), rep.oracle_max()));
            let ok_x = rep.split_vs_monolithic <= CROSSVAL_TOL;
            line(&mut s, ok_x, format_args!("split vs monolithic: sup-t L2 difference {:.3e} <= {CROSSVAL_TOL:.0e}", rep.split_vs_monolithic));
            (ok_o && ok_x, Detail::Crossval(rep))
        }
        RunMode::Manufactured => {
            let m = &c.manufactured;
            let points = spatial_study(&m.sizes, m.amplitude, m.cfl, m.t_end)?;
            let mut w = csv_writer(&out.join("manufactured.csv"))?;
            w.write_record(["h", "l2_error"])?;
            for (h, e) in &points {
                w.write_record([format!("{h:e}"), format!("{e:e}")])?;
            }
            w.flush()?;
            artifacts.push("manufactured.csv".into());
            let (x, y): (Vec<f64>, Vec<f64>) = points.iter().map(|(h, e)| (h.ln(), e.ln())).unzip();
            let fit = fit_line(&x, &y);
            let (target, tol) = MANUFACTURED_ORDER;
            let ok = fit.is_some_and(|f| (f.slope - target).abs() <= tol);
            line(
                &mut s,
                ok,
                format_args!("spatial order {:.4} within {target} +- {tol}", fit.map_or(f64::NAN, |f| f.slope)),
            );
            (ok, Detail::Manufactured { points, fit })
        }
    };
    let _ = writeln!(s, "result: {}", if passed { "PASS" } else { "FAIL" });
    std::fs::write(out.join("summary.txt"), &s)?;
    artifacts.push("summary.txt".into());
    Ok(RunOutcome {
        passed,
        summary: s,
        detail,
        artifacts,
    })
}

fn audit_summary(rows: &[AuditRow], s: &mut String) -> bool {
    let mut ok = true;
    for r in rows {
        let _ = writeln!(
            s,
            "delta {}: energy lhs {:.4e}, rhs {:.4e}, ratio {:.4e}, fractional ratio {}",
            r.delta,
            r.lhs,
            r.rhs,
            r.ratio,
            r.fractional_ratio.map_or("undefined".to_string(), |x| format!("{x:.4e}"))
        );
        ok &= r.ratio.is_finite();
    }
    let max = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let _ = writeln!(s, "recorded energy constant (max ratio) = {max:.4e}");
    line(s, ok, "energy ratios finite");
    let fr: Vec<(f64, f64)> = rows.iter().filter_map(|r| r.fractional_ratio.map(|x| (r.delta.ln(), x))).collect();
    if fr.len() >= 3 {
        let (x, y): (Vec<f64>, Vec<f64>) = fr.into_iter().unzip();
        if let Some(f) = fit_line(&x, &y) {
            let flat = f.slope.abs() <= 0.1;
            line(s, flat, format_args!("fractional ratio trend in log delta: slope {:.4} within +-0.1", f.slope));
            ok &= flat;
        }
    }
    ok
}

fn csv_writer(path: &Path) -> vseed_core::Result<csv::Writer<std::fs::File>> {
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path)?)
}

fn write_gronwall(path: &Path, measured: &[(f64, f64)], bound: &[f64]) -> vseed_core::Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["t", "sup_U_sq", "bound"])?;
    let mut sup: f64 = 0.0;
    for ((t, u), b) in measured.iter().zip(bound) {
        sup = sup.max(*u);
        w.write_record([format!("{t:e}"), format!("{sup:e}"), format!("{b:e}")])?;
    }
    w.flush()?;
    Ok(())
}

fn write_audit(path: &Path, rows: &[AuditRow]) -> vseed_core::Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["delta", "lhs", "rhs", "ratio", "fractional_ratio"])?;
    for r in rows {
        w.write_record([
            format!("{:e}", r.delta),
            format!("{:e}", r.lhs),
            format!("{:e}", r.rhs),
            format!("{:e}", r.ratio),
            r.fractional_ratio.map_or(String::new(), |x| format!("{x:e}")),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_crossval(path: &Path, rep: &CrossvalReport) -> vseed_core::Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["check", "nx", "ny", "closure", "difference"])?;
    for (nx, ny, cl, d) in &rep.oracle {
        w.write_record(["oracle".to_string(), nx.to_string(), ny.to_string(), cl.clone(), format!("{d:e}")])?;
    }
    w.write_record([
        "split_vs_monolithic".to_string(),
        String::new(),
        String::new(),
        String::new(),
        format!("{:e}", rep.split_vs_monolithic),
    ])?;
    w.flush()?;
    Ok(())
}

/// Deterministic right-hand side with zero net wall flux.
fn oracle_problem(g: &ChannelGrid, seed: f64) -> (VelocityField, Vec<f64>, Vec<f64>) {
    let mut rhs = VelocityField::zeros(g);
    rhs.u.indexed_iter_mut().for_each(|((r, i), x)| *x = (1.7 * r as f64 + 2.3 * i as f64 + seed).sin());
    rhs.v.indexed_iter_mut().for_each(|((j, i), x)| *x = (0.9 * j as f64 - 1.1 * i as f64 + seed).cos());
    let wt: Vec<f64> = (0..g.nx).map(|i| (2.9 * i as f64 + seed).sin()).collect();
    let mut wb: Vec<f64> = (0..g.nx).map(|i| (1.3 * i as f64 - seed).cos()).collect();
    let net = (wt.iter().sum::<f64>() - wb.iter().sum::<f64>()) / g.nx as f64;
    wb.iter_mut().for_each(|x| *x += net);
    (rhs, wb, wt)
}

/// Banded solver against dense LU on the small grids, then split against monolithic on the configured grid.
pub fn crossval(c: &ExperimentConfig) -> vseed_core::Result<CrossvalReport> {
    let mut oracle = Vec::new();
    for &n in &c.oracle_sizes {
        let g = ChannelGrid::new(n, n, c.lx)?;
        for closure in [WallClosure::Robin(c.delta), WallClosure::NoSlip] {
            for (k, sigma) in [0.0, 1.0 / c.dt].into_iter().enumerate() {
                let params = OperatorParams { sigma, nu: c.nu, closure };
                let (rhs, wb, wt) = oracle_problem(&g, 0.37 + k as f64);
                let div = Array2::zeros((g.ny, g.nx));
                let (u, _, _) = SaddleSolver::new(&g, params)?.solve(&rhs, &div, &wb, &wt, c.tol.min(1e-12))?;
                let (ud, _) = dense_solve(&g, &params, &rhs, &div, &wb, &wt)?;
                let diff = u
                    .u
                    .iter()
                    .zip(&ud.u)
                    .chain(u.v.iter().zip(&ud.v))
                    .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                oracle.push((n, n, format!("{closure:?}, sigma {sigma}"), diff / ud.max_abs().max(1e-300)));
            }
        }
    }
    let w = c.wall_data()?;
    let u0 = VelocityField::zeros(&c.grid());
    let mono = solve_monolithic(&nse_config(c, Mode::Monolithic), &u0, &w)?;
    let lin = solve_linear_evolution(&w, &c.grid(), linear_params(c, c.delta))?;
    let split = solve_split(&nse_config(c, Mode::Split), &u0, &lin)?;
    let split_vs_monolithic = mono
        .snapshots
        .iter()
        .zip(&split.u.snapshots)
        .map(|(a, b)| {
            let e = &a.velocity - &b.velocity;
            inner(&e, &e).sqrt()
        })
        .fold(0.0, f64::max);
    Ok(CrossvalReport { oracle, split_vs_monolithic })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let d = Sha256::digest(bytes);
    d.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Writes `manifest.txt`: config hash, code version, timings, exit status and artifact hashes.
pub fn write_manifest(
    out: &Path,
    config_text: &str,
    artifacts: &[String],
    started: Instant,
    exit_status: i32,
) -> vseed_core::Result<()> {
    let mut m = String::new();
    let _ = writeln!(m, "config_sha256 = {}", sha256_hex(config_text.as_bytes()));
    let _ = writeln!(m, "version = {} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"));
    let _ = writeln!(m, "wall_clock_seconds = {:.3}", started.elapsed().as_secs_f64());
    let _ = writeln!(m, "exit_status = {exit_status}");
    for a in artifacts {
        let bytes = std::fs::read(out.join(a))?;
        let _ = writeln!(m, "artifact {} {a}", sha256_hex(&bytes));
    }
    std::fs::write(out.join("manifest.txt"), m)?;
    Ok(())
}

/// `VSEED_OUT` (when set) replaces the current directory as the output root.
pub fn output_dir(c: &ExperimentConfig) -> PathBuf {
    match std::env::var_os("VSEED_OUT") {
        Some(root) => {
            let rel = if c.output_dir.is_absolute() {
                c.output_dir.file_name().map(PathBuf::from).unwrap_or_default()
            } else {
                c.output_dir.clone()
            };
            PathBuf::from(root).join(rel)
        }
        None => c.output_dir.clone(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AuditVerdict {
    Consistent,
    Mismatch(Vec<String>),
}

/// Re-hashes the artifacts of a run directory and refits the sweep slopes if present.
pub fn audit_dir(dir: &Path) -> std::io::Result<(AuditVerdict, String)> {
    let manifest = std::fs::read_to_string(dir.join("manifest.txt"))?;
    let mut problems = Vec::new();
    let mut s = String::new();
    for l in manifest.lines() {
        if let Some(hash) = l.strip_prefix("config_sha256 = ") {
            let cfg = std::fs::read(dir.join("config.txt"))?;
            if sha256_hex(&cfg) != hash {
                problems.push("config.txt does not match config_sha256".to_string());
            }
        } else if let Some(rest) = l.strip_prefix("artifact ") {
            let Some((hash, name)) = rest.split_once(' ') else {
                problems.push(format!("malformed manifest line `{l}`"));
                continue;
            };
            match std::fs::read(dir.join(name)) {
                Ok(b) if sha256_hex(&b) == hash => {}
                Ok(_) => problems.push(format!("{name}: hash mismatch")),
                Err(e) => problems.push(format!("{name}: {e}")),
            }
        }
    }
    let _ = writeln!(s, "checked manifest of {}", dir.display());
    if let Ok(text) = std::fs::read_to_string(dir.join("rate_report.csv")) {
        let mut cols: Vec<Vec<f64>> = vec![Vec::new(); 6];
        for row in text.lines().skip(1) {
            for (c, v) in row.split(',').enumerate().take(6) {
                cols[c].push(v.parse().unwrap_or(f64::NAN));
            }
        }
        for (name, k) in [("supL2sq", 1), ("total", 4), ("trace_l2", 5)] {
            match fit_loglog(&cols[0], &cols[k]) {
                Some(f) => {
                    let _ = writeln!(s, "refit {name}: slope {:.4} (R2 {:.4})", f.slope, f.r2);
                }
                None => {
                    let _ = writeln!(s, "refit {name}: no fit");
                }
            }
        }
    }
    for p in &problems {
        let _ = writeln!(s, "MISMATCH {p}");
    }
    let verdict = if problems.is_empty() { AuditVerdict::Consistent } else { AuditVerdict::Mismatch(problems) };
    Ok((verdict, s))
}
