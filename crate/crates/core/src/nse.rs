//! Nonlinear solvers: no-slip baseline `v`, split `u = U + z`, and monolithic `u`.
//!
//! All three use IMEX Euler: coupled implicit viscous/pressure solve, explicit
//! skew-symmetric advection, forcing at the new time level.

use std::sync::Arc;

use ndarray::Array2;

use crate::boundary::{WallClosure, WallData};
use crate::error::{Error, Result};
use crate::grid::{deformation, divergence, inner, velocity_norms, viscous_term, ChannelGrid, PressureField, VelocityField};
use crate::saddle::{OperatorParams, SaddleSolver};
use crate::stokes::{LinearEvolution, StationaryStokes};

/// Energy growth factor (relative to `max(E0, 1)`) that aborts a run.
pub const BLOW_UP_FACTOR: f64 = 1e6;

pub type ForceFn = dyn Fn(&ChannelGrid, f64) -> VelocityField + Send + Sync;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Split,
    Monolithic,
    NoSlip,
}

/// Initial velocity of the slip runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialData {
    /// `u(0) = u0`
    Plain,
    /// `u(0) = u0 + G(0)`
    Lifted,
}

#[derive(Clone)]
pub struct NseConfig {
    pub grid: ChannelGrid,
    pub delta: f64,
    pub alpha: f64,
    pub nu: f64,
    pub dt: f64,
    pub nt: usize,
    pub forcing: Option<Arc<ForceFn>>,
    pub mode: Mode,
    pub tol: f64,
    pub save_stride: usize,
    /// `None` picks `Lifted` for monolithic and `Plain` for split runs.
    pub initial: Option<InitialData>,
}

impl std::fmt::Debug for NseConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NseConfig")
            .field("grid", &self.grid)
            .field("delta", &self.delta)
            .field("alpha", &self.alpha)
            .field("nu", &self.nu)
            .field("dt", &self.dt)
            .field("nt", &self.nt)
            .field("forcing", &self.forcing.as_ref().map(|_| "fn"))
            .field("mode", &self.mode)
            .field("tol", &self.tol)
            .field("save_stride", &self.save_stride)
            .field("initial", &self.initial)
            .finish()
    }
}

impl NseConfig {
    pub fn new(grid: ChannelGrid, delta: f64, alpha: f64, dt: f64, nt: usize, mode: Mode) -> Self {
        Self {
            grid,
            delta,
            alpha,
            nu: 1.0,
            dt,
            nt,
            forcing: None,
            mode,
            tol: 1e-10,
            save_stride: 1,
            initial: None,
        }
    }

    pub fn t_end(&self) -> f64 {
        self.nt as f64 * self.dt
    }

    fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            bad.push(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            bad.push(format!("nu must be positive, got {}", self.nu));
        }
        if self.mode != Mode::NoSlip && !(self.delta > 0.0 && self.delta <= 1.0) {
            bad.push(format!("delta must lie in (0, 1], got {}", self.delta));
        }
        if self.save_stride == 0 {
            bad.push("save_stride must be at least 1".into());
        }
        if !(self.tol > 0.0) {
            bad.push(format!("tolerance must be positive, got {}", self.tol));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidInput(bad.join("; ")))
        }
    }

    fn closure(&self) -> Result<WallClosure> {
        match self.mode {
            Mode::NoSlip => Ok(WallClosure::NoSlip),
            _ => WallClosure::robin(self.delta),
        }
    }

    fn force(&self, t: f64) -> Option<VelocityField> {
        self.forcing.as_ref().map(|f| f(&self.grid, t))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub t: f64,
    pub velocity: VelocityField,
    pub pressure: PressureField,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    pub step: usize,
    pub t: f64,
    /// `||u||^2`
    pub energy: f64,
    /// `||D(u)||^2`
    pub deform_sq: f64,
    /// `||u.tau||_G^2 / delta` (zero for no-slip runs)
    pub boundary_diss: f64,
    pub div_max: f64,
    /// `||grad u||^2`
    pub grad_sq: f64,
    /// `||2 div D(u)||`, the discrete Laplacian norm
    pub lap_norm: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub dt: f64,
    pub nt: usize,
    pub delta: Option<f64>,
    pub save_stride: usize,
    pub snapshots: Vec<Snapshot>,
    pub diagnostics: Vec<StepDiagnostics>,
}

impl Trajectory {
    pub fn grid(&self) -> ChannelGrid {
        self.snapshots[0].velocity.grid
    }

    pub fn write_diagnostics_csv(&self, path: &std::path::Path) -> Result<()> {
        write_diagnostics_csv(path, &self.diagnostics)
    }
}

/// Writes `step,t,energy,deform_sq,boundary_diss,div_max`.
pub fn write_diagnostics_csv(path: &std::path::Path, diagnostics: &[StepDiagnostics]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)?;
    w.write_record(["step", "t", "energy", "deform_sq", "boundary_diss", "div_max"])?;
    for d in diagnostics {
        w.write_record([
            d.step.to_string(),
            format!("{:e}", d.t),
            format!("{:e}", d.energy),
            format!("{:e}", d.deform_sq),
            format!("{:e}", d.boundary_diss),
            format!("{:e}", d.div_max),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn diagnose(step: usize, t: f64, u: &VelocityField, delta: Option<f64>) -> StepDiagnostics {
    let nm = velocity_norms(u);
    let lap = viscous_term(u).scaled(2.0);
    StepDiagnostics {
        step,
        t,
        energy: nm.l2 * nm.l2,
        deform_sq: deformation(u).norm_sq(),
        boundary_diss: delta.map_or(0.0, |d| nm.boundary_l2_tangential.powi(2) / d),
        div_max: divergence(u).iter().fold(0.0f64, |m, x| m.max(x.abs())),
        grad_sq: nm.h1_semi * nm.h1_semi,
        lap_norm: interior_l2(&lap),
    }
}

/// L2 norm over interior `u` rows and interior `v` rows.
pub fn interior_l2(f: &VelocityField) -> f64 {
    let g = &f.grid;
    let mut s = 0.0;
    for r in 1..=g.ny {
        s += f.u.row(r).iter().map(|x| x * x).sum::<f64>();
    }
    for j in 1..g.ny {
        s += f.v.row(j).iter().map(|x| x * x).sum::<f64>();
    }
    (s * g.cell_area()).sqrt()
}

/// Skew-symmetric advection `N(a; b) ~ (a.grad) b`.
///
/// Every velocity control volume sums `F_out * b_neighbour / (2 vol)` over its
/// faces, with `F` the interpolated normal flux of `a`. For `a` with zero wall
/// flux this makes `<c, N(a;b)> = -<b, N(a;c)>` exactly in the weighted inner
/// product of [`inner`]. Wall `v` rows use half control volumes; across a wall
/// face the neighbour of a `u` volume is the ghost value and that of a `v`
/// volume is the wall value itself. Ghost rows of `b` must be closed.
pub fn advection(a: &VelocityField, b: &VelocityField) -> VelocityField {
    let g = a.grid;
    let (nx, ny, hx, hy) = (g.nx, g.ny, g.hx, g.hy);
    let mut out = VelocityField::zeros(&g);
    let inv = 1.0 / (2.0 * hx * hy);
    for j in 0..ny {
        let r = j + 1;
        for i in 0..nx {
            let (ip, im) = (g.east(i), g.west(i));
            let fe = 0.5 * (a.u[[r, i]] + a.u[[r, ip]]) * hy;
            let fw = -0.5 * (a.u[[r, im]] + a.u[[r, i]]) * hy;
            let fnn = 0.5 * (a.v[[j + 1, im]] + a.v[[j + 1, i]]) * hx;
            let fs = -0.5 * (a.v[[j, im]] + a.v[[j, i]]) * hx;
            out.u[[r, i]] =
                (fe * b.u[[r, ip]] + fw * b.u[[r, im]] + fnn * b.u[[r + 1, i]] + fs * b.u[[r - 1, i]]) * inv;
        }
    }
    for j in 0..=ny {
        let wall = j == 0 || j == ny;
        let h = if wall { 0.5 * hy } else { hy };
        for i in 0..nx {
            let (ip, im) = (g.east(i), g.west(i));
            // horizontal velocity on the east/west faces of the v volume
            let ux = |c: usize| {
                if j == 0 {
                    a.u[[1, c]]
                } else if j == ny {
                    a.u[[ny, c]]
                } else {
                    0.5 * (a.u[[j, c]] + a.u[[j + 1, c]])
                }
            };
            let fe = ux(ip) * h;
            let fw = -ux(i) * h;
            let (fnn, bn) = if j < ny {
                (0.5 * (a.v[[j, i]] + a.v[[j + 1, i]]) * hx, b.v[[j + 1, i]])
            } else {
                (a.v[[ny, i]] * hx, b.v[[ny, i]])
            };
            let (fs, bs) = if j > 0 {
                (-0.5 * (a.v[[j - 1, i]] + a.v[[j, i]]) * hx, b.v[[j - 1, i]])
            } else {
                (-a.v[[0, i]] * hx, b.v[[0, i]])
            };
            out.v[[j, i]] = (fe * b.v[[j, ip]] + fw * b.v[[j, im]] + fnn * bn + fs * bs) / (2.0 * hx * h);
        }
    }
    out
}

struct Stepper {
    cfg: NseConfig,
    closure: WallClosure,
    solver: SaddleSolver,
    no_div: Array2<f64>,
}

impl Stepper {
    fn new(cfg: &NseConfig) -> Result<Self> {
        cfg.validate()?;
        let closure = cfg.closure()?;
        let solver = SaddleSolver::new(
            &cfg.grid,
            OperatorParams {
                sigma: 1.0 / cfg.dt,
                nu: cfg.nu,
                closure,
            },
        )?;
        Ok(Self {
            cfg: cfg.clone(),
            closure,
            solver,
            no_div: Array2::zeros((cfg.grid.ny, cfg.grid.nx)),
        })
    }

    fn check_cfl(&self, step: usize, u: &VelocityField) -> Result<()> {
        let g = &self.cfg.grid;
        let limit = 0.5 * g.hx.min(g.hy) / u.max_abs().max(1.0);
        if self.cfg.dt > limit {
            return Err(Error::Cfl {
                step,
                dt: self.cfg.dt,
                limit,
            });
        }
        Ok(())
    }

    /// `carry / dt + f(t_{n+1}) - N(adv; adv)`
    fn rhs(&self, n: usize, carry: &VelocityField, adv: &VelocityField) -> VelocityField {
        let mut rhs = carry.scaled(1.0 / self.cfg.dt);
        if let Some(f) = self.cfg.force((n + 1) as f64 * self.cfg.dt) {
            rhs.axpy(1.0, &f);
        }
        rhs.axpy(-1.0, &advection(adv, adv));
        rhs
    }

    fn solve(&self, rhs: &VelocityField, wb: &[f64], wt: &[f64]) -> Result<(VelocityField, PressureField)> {
        let (u, p, _) = self.solver.solve(rhs, &self.no_div, wb, wt, self.cfg.tol)?;
        Ok((u, p))
    }
}

struct Recorder {
    stride: usize,
    delta: Option<f64>,
    dt: f64,
    snapshots: Vec<Snapshot>,
    diagnostics: Vec<StepDiagnostics>,
    threshold: f64,
}

impl Recorder {
    fn new(cfg: &NseConfig, delta: Option<f64>, u0: &VelocityField, p0: PressureField) -> Self {
        let d0 = diagnose(0, 0.0, u0, delta);
        Self {
            stride: cfg.save_stride,
            delta,
            dt: cfg.dt,
            snapshots: vec![Snapshot {
                step: 0,
                t: 0.0,
                velocity: u0.clone(),
                pressure: p0,
            }],
            threshold: BLOW_UP_FACTOR * d0.energy.max(1.0),
            diagnostics: vec![d0],
        }
    }

    fn push(&mut self, step: usize, u: &VelocityField, p: &PressureField) -> Result<()> {
        let t = step as f64 * self.dt;
        let d = diagnose(step, t, u, self.delta);
        if !(d.energy <= self.threshold) {
            return Err(Error::BlowUp {
                step,
                energy: d.energy,
                threshold: self.threshold,
            });
        }
        self.diagnostics.push(d);
        if step % self.stride == 0 {
            self.snapshots.push(Snapshot {
                step,
                t,
                velocity: u.clone(),
                pressure: p.clone(),
            });
        }
        Ok(())
    }

    fn finish(self, nt: usize) -> Trajectory {
        Trajectory {
            dt: self.dt,
            nt,
            delta: self.delta,
            save_stride: self.stride,
            snapshots: self.snapshots,
            diagnostics: self.diagnostics,
        }
    }
}

fn check_initial(u0: &VelocityField, g: &ChannelGrid, tol: f64) -> Result<()> {
    if u0.grid != *g {
        return Err(Error::Mismatch("initial field is on a different grid".into()));
    }
    let dmax = divergence(u0).iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let scale = u0.max_abs().max(1.0) / g.hx.min(g.hy);
    if dmax > tol.max(1e-10) * scale {
        return Err(Error::InvalidInput(format!("initial field is not divergence free (max {dmax:.3e})")));
    }
    let wall = u0.v.row(0).iter().chain(u0.v.row(g.ny).iter()).fold(0.0f64, |m, x| m.max(x.abs()));
    if wall != 0.0 {
        return Err(Error::InvalidInput("initial field must have zero wall-normal velocity".into()));
    }
    Ok(())
}

/// No-slip baseline `v`.
pub fn solve_noslip(cfg: &NseConfig, u0: &VelocityField) -> Result<Trajectory> {
    let mut cfg = cfg.clone();
    cfg.mode = Mode::NoSlip;
    let st = Stepper::new(&cfg)?;
    check_initial(u0, &cfg.grid, cfg.tol)?;
    let zeros = vec![0.0; cfg.grid.nx];
    let mut u = u0.clone();
    crate::boundary::close_ghosts(&mut u, WallClosure::NoSlip);
    let mut rec = Recorder::new(&cfg, None, &u, PressureField::zeros(&cfg.grid));
    for n in 0..cfg.nt {
        st.check_cfl(n, &u)?;
        let rhs = st.rhs(n, &u, &u);
        let (un, pn) = st.solve(&rhs, &zeros, &zeros)?;
        rec.push(n + 1, &un, &pn)?;
        u = un;
    }
    Ok(rec.finish(cfg.nt))
}

/// Per-level norms feeding the Gronwall bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LedgerEntry {
    pub t: f64,
    /// `||U||^2`
    pub u_sq: f64,
    /// `||grad U||^2`
    pub grad_u_sq: f64,
    /// `||D U||^2 + ||U.tau||_G^2 / delta`
    pub dissipation_u: f64,
    /// `||z||^2`
    pub z_sq: f64,
    /// `||grad z||^2`
    pub grad_z_sq: f64,
    /// `||f||^2`
    pub f_sq: f64,
}

#[derive(Debug, Clone)]
pub struct GronwallLedger {
    pub dt: f64,
    pub delta: f64,
    pub entries: Vec<LedgerEntry>,
}

#[derive(Debug, Clone)]
pub struct SplitResult {
    /// `u = U + z`
    pub u: Trajectory,
    /// the perturbation `U` and its pressure `P`
    pub perturbation: Trajectory,
    pub ledger: GronwallLedger,
}

fn ledger_entry(t: f64, big_u: &VelocityField, z: &VelocityField, f: Option<&VelocityField>, delta: f64) -> LedgerEntry {
    let nu = velocity_norms(big_u);
    let nz = velocity_norms(z);
    LedgerEntry {
        t,
        u_sq: nu.l2 * nu.l2,
        grad_u_sq: nu.h1_semi * nu.h1_semi,
        dissipation_u: deformation(big_u).norm_sq() + nu.boundary_l2_tangential.powi(2) / delta,
        z_sq: nz.l2 * nz.l2,
        grad_z_sq: nz.h1_semi * nz.h1_semi,
        f_sq: f.map_or(0.0, |f| inner(f, f)),
    }
}

/// Split solve: steps the homogeneous perturbation `U` with `z` from the linear evolution.
pub fn solve_split(cfg: &NseConfig, u0: &VelocityField, z_traj: &LinearEvolution) -> Result<SplitResult> {
    let mut cfg = cfg.clone();
    cfg.mode = Mode::Split;
    let st = Stepper::new(&cfg)?;
    check_initial(u0, &cfg.grid, cfg.tol)?;
    let lp = z_traj.params;
    if z_traj.grid() != cfg.grid || (lp.dt - cfg.dt).abs() > 1e-12 * cfg.dt || lp.nt < cfg.nt {
        return Err(Error::Mismatch("linear evolution does not match the run (grid, dt or nt)".into()));
    }
    if (lp.delta - cfg.delta).abs() > 0.0 || (lp.alpha - cfg.alpha).abs() > 0.0 {
        return Err(Error::Mismatch("linear evolution uses a different delta or alpha".into()));
    }
    let delta = cfg.delta;
    let zeros = vec![0.0; cfg.grid.nx];
    let z = |n: usize| &z_traj.z[n].velocity;
    let mut big_u = match cfg.initial.unwrap_or(InitialData::Plain) {
        InitialData::Plain => u0 - z(0),
        InitialData::Lifted => u0.clone(),
    };
    crate::boundary::set_wall_normal(&mut big_u, &zeros, &zeros);
    crate::boundary::close_ghosts(&mut big_u, st.closure);

    let u_init = &big_u + z(0);
    let mut p_init = z_traj.z[0].pressure.clone();
    p_init.remove_mean();
    let mut rec_u = Recorder::new(&cfg, Some(delta), &u_init, p_init);
    let mut rec_big = Recorder::new(&cfg, Some(delta), &big_u, PressureField::zeros(&cfg.grid));
    rec_big.threshold = f64::INFINITY;
    let mut entries = vec![ledger_entry(0.0, &big_u, z(0), cfg.force(0.0).as_ref(), delta)];
    let mut u = u_init;
    for n in 0..cfg.nt {
        st.check_cfl(n, &u)?;
        let rhs = st.rhs(n, &big_u, &u);
        let (un_big, pn_big) = st.solve(&rhs, &zeros, &zeros)?;
        let t = (n + 1) as f64 * cfg.dt;
        let un = &un_big + z(n + 1);
        let mut pn = pn_big.clone();
        pn.p += &z_traj.z[n + 1].pressure.p;
        pn.remove_mean();
        rec_u.push(n + 1, &un, &pn)?;
        rec_big.push(n + 1, &un_big, &pn_big)?;
        entries.push(ledger_entry(t, &un_big, z(n + 1), cfg.force(t).as_ref(), delta));
        big_u = un_big;
        u = un;
    }
    Ok(SplitResult {
        u: rec_u.finish(cfg.nt),
        perturbation: rec_big.finish(cfg.nt),
        ledger: GronwallLedger {
            dt: cfg.dt,
            delta,
            entries,
        },
    })
}

/// Monolithic solve of `u` with the flux imposed directly at every new level.
pub fn solve_monolithic(cfg: &NseConfig, u0: &VelocityField, w: &WallData) -> Result<Trajectory> {
    let mut cfg = cfg.clone();
    cfg.mode = Mode::Monolithic;
    let st = Stepper::new(&cfg)?;
    check_initial(u0, &cfg.grid, cfg.tol)?;
    if w.nx() != cfg.grid.nx || w.nt() < cfg.nt || (w.dt - cfg.dt).abs() > 1e-12 * cfg.dt {
        return Err(Error::Mismatch("flux data does not match the run (nx, nt or dt)".into()));
    }
    w.check_compatible()?;
    let delta = cfg.delta;
    let mut u = u0.clone();
    let mut p0 = PressureField::zeros(&cfg.grid);
    if cfg.initial.unwrap_or(InitialData::Lifted) == InitialData::Lifted {
        let g0 = StationaryStokes::new(&cfg.grid, delta, cfg.nu)?.solve(w, 0, cfg.alpha, cfg.tol)?;
        u.axpy(1.0, &g0.velocity);
        p0 = g0.pressure;
    }
    crate::boundary::close_ghosts(&mut u, st.closure);
    let mut rec = Recorder::new(&cfg, Some(delta), &u, p0);
    for n in 0..cfg.nt {
        st.check_cfl(n, &u)?;
        let rhs = st.rhs(n, &u, &u);
        let (wb, wt) = w.normal_velocity(n + 1, delta, cfg.alpha);
        let (un, pn) = st.solve(&rhs, &wb, &wt)?;
        rec.push(n + 1, &un, &pn)?;
        u = un;
    }
    Ok(rec.finish(cfg.nt))
}

/// Sizes of the advective products in the remainder of the `w = U - v` equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonlinearAudit {
    /// `||(U.grad) w||`
    pub u_grad_w: f64,
    /// `||(w.grad) v||`
    pub w_grad_v: f64,
    /// `||(U.grad) z||`
    pub u_grad_z: f64,
    /// `||(z.grad) U||`
    pub z_grad_u: f64,
    /// `||(z.grad) z||`
    pub z_grad_z: f64,
    /// `<U, (U.grad) U>`
    pub self_cancellation: f64,
    /// `<U, (U.grad) z> + <z, (U.grad) U>`
    pub pair_cancellation: f64,
}

/// Evaluates the five remainder products for `w = big_u - v` and the two
/// cancellations of the skew form. Ghost rows of all inputs must be closed.
pub fn nonlinear_term_audit(big_u: &VelocityField, z: &VelocityField, v: &VelocityField) -> NonlinearAudit {
    let w = big_u - v;
    let size = |f: &VelocityField| inner(f, f).sqrt();
    NonlinearAudit {
        u_grad_w: size(&advection(big_u, &w)),
        w_grad_v: size(&advection(&w, v)),
        u_grad_z: size(&advection(big_u, z)),
        z_grad_u: size(&advection(z, big_u)),
        z_grad_z: size(&advection(z, z)),
        self_cancellation: inner(big_u, &advection(big_u, big_u)),
        pair_cancellation: inner(big_u, &advection(big_u, z)) + inner(z, &advection(big_u, big_u)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::close_ghosts;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Random field with zero wall-normal velocity built from a stream function.
    pub(crate) fn random_solenoidal(g: &ChannelGrid, rng: &mut ChaCha8Rng, closure: WallClosure) -> VelocityField {
        let mut psi = Array2::<f64>::zeros((g.ny + 1, g.nx));
        for j in 1..g.ny {
            for i in 0..g.nx {
                psi[[j, i]] = rng.random_range(-1.0..1.0) * g.hx;
            }
        }
        let mut f = VelocityField::zeros(g);
        for j in 0..g.ny {
            for i in 0..g.nx {
                f.u[[j + 1, i]] = (psi[[j + 1, i]] - psi[[j, i]]) / g.hy;
            }
        }
        for j in 1..g.ny {
            for i in 0..g.nx {
                f.v[[j, i]] = -(psi[[j, g.east(i)]] - psi[[j, i]]) / g.hx;
            }
        }
        close_ghosts(&mut f, closure);
        f
    }

    #[test]
    fn advection_is_skew_for_tangential_transport() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let g = ChannelGrid::new(12, 10, 1.0).unwrap();
        for _ in 0..10 {
            let a = random_solenoidal(&g, &mut rng, WallClosure::Robin(0.1));
            let mut b = random_solenoidal(&g, &mut rng, WallClosure::Robin(0.1));
            // wall flux in b (not in a) is allowed
            for i in 0..g.nx {
                b.v[[0, i]] = rng.random_range(-1.0..1.0);
                b.v[[g.ny, i]] = rng.random_range(-1.0..1.0);
            }
            let c = random_solenoidal(&g, &mut rng, WallClosure::NoSlip);
            let lhs = inner(&c, &advection(&a, &b));
            let rhs = -inner(&b, &advection(&a, &c));
            assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
            assert!(inner(&a, &advection(&a, &a)).abs() < 1e-12 * inner(&a, &a).max(1.0));
        }
    }

    #[test]
    fn advection_is_consistent() {
        // a = (1, 0) transports b = sin(2 pi x): N ~ d/dx b
        let g = ChannelGrid::new(64, 8, 1.0).unwrap();
        let a = VelocityField::from_fn(&g, |_, _| 1.0, |_, _| 0.0);
        let b = VelocityField::from_fn(&g, |x, _| (2.0 * std::f64::consts::PI * x).sin(), |_, _| 0.0);
        let n = advection(&a, &b);
        for i in 0..g.nx {
            let exact = 2.0 * std::f64::consts::PI * (2.0 * std::f64::consts::PI * g.x_face(i)).cos();
            assert!((n.u[[3, i]] - exact).abs() < 0.02);
        }
    }

    #[test]
    fn zero_data_stays_zero() {
        let g = ChannelGrid::new(8, 8, 1.0).unwrap();
        let cfg = NseConfig::new(g, 0.1, 1.0, 0.01, 5, Mode::NoSlip);
        let tr = solve_noslip(&cfg, &VelocityField::zeros(&g)).unwrap();
        assert_eq!(tr.diagnostics.len(), 6);
        assert!(tr.diagnostics.iter().all(|d| d.energy == 0.0));
    }

    #[test]
    fn audit_terms_and_cancellations() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let g = ChannelGrid::new(16, 12, 1.0).unwrap();
        let big_u = random_solenoidal(&g, &mut rng, WallClosure::Robin(0.2));
        let v = random_solenoidal(&g, &mut rng, WallClosure::NoSlip);
        let mut z = random_solenoidal(&g, &mut rng, WallClosure::Robin(0.2));
        for i in 0..g.nx {
            z.v[[0, i]] = 0.3 * (i as f64).sin();
        }
        let a = nonlinear_term_audit(&big_u, &z, &v);
        let nu = velocity_norms(&big_u);
        assert!(a.self_cancellation.abs() <= 1e-12 * nu.l2 * nu.l2 * nu.h1_semi);
        assert!(a.pair_cancellation.abs() <= 1e-12 * a.u_grad_z.max(1.0));
        let zero = VelocityField::zeros(&g);
        let a0 = nonlinear_term_audit(&big_u, &zero, &v);
        assert_eq!((a0.u_grad_z, a0.z_grad_u, a0.z_grad_z), (0.0, 0.0, 0.0));
        assert!(a0.u_grad_w > 0.0 && a0.w_grad_v > 0.0);
    }
}
