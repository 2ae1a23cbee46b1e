//! Wall-normal flux data, the Robin ghost closure and the divergence-free lifting.
//!
//! Sign convention: `g > 0` is outflow. The bottom wall has outward normal
//! `(0, -1)`, so the imposed `v` there is `-delta^alpha * g_bottom`; on the top
//! wall it is `+delta^alpha * g_top`.

use std::f64::consts::PI;
use std::path::Path;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{deformation, ChannelGrid, VelocityField};

/// Relative tolerance of the discrete compatibility condition.
pub const COMPAT_RTOL: f64 = 1e-12;

/// Raw flux samples `g(x_i, t_k)`, one row per time level (`nt + 1` rows, `nx` columns).
///
/// The `delta^alpha` factor is not stored; it is applied when the data is imposed.
#[derive(Debug, Clone, PartialEq)]
pub struct WallData {
    pub g_bottom: Array2<f64>,
    pub g_top: Array2<f64>,
    pub dt: f64,
    pub lx: f64,
}

impl WallData {
    pub fn new(g_bottom: Array2<f64>, g_top: Array2<f64>, dt: f64, lx: f64) -> Result<Self> {
        if g_bottom.dim() != g_top.dim() {
            return Err(Error::Mismatch(format!(
                "wall arrays differ in shape: {:?} vs {:?}",
                g_bottom.dim(),
                g_top.dim()
            )));
        }
        if g_bottom.nrows() == 0 || g_bottom.ncols() < 4 {
            return Err(Error::InvalidInput(format!("flux array shape {:?} too small", g_bottom.dim())));
        }
        if !(dt > 0.0 && lx > 0.0) {
            return Err(Error::InvalidInput(format!("dt and lx must be positive (dt={dt}, lx={lx})")));
        }
        if g_bottom.iter().chain(g_top.iter()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("flux samples contain non-finite values".into()));
        }
        Ok(Self { g_bottom, g_top, dt, lx })
    }

    pub fn zeros(nx: usize, nt: usize, dt: f64, lx: f64) -> Self {
        Self {
            g_bottom: Array2::zeros((nt + 1, nx)),
            g_top: Array2::zeros((nt + 1, nx)),
            dt,
            lx,
        }
    }

    pub fn nt(&self) -> usize {
        self.g_bottom.nrows() - 1
    }

    pub fn nx(&self) -> usize {
        self.g_bottom.ncols()
    }

    pub fn hx(&self) -> f64 {
        self.lx / self.nx() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.g_bottom
            .iter()
            .chain(self.g_top.iter())
            .fold(0.0f64, |m, x| m.max(x.abs()))
    }

    /// `(defect, tolerance)` of the compatibility condition at time level `k`.
    pub fn compat_defect(&self, k: usize) -> (f64, f64) {
        let hx = self.hx();
        let gb = self.g_bottom.row(k);
        let gt = self.g_top.row(k);
        let defect = (gb.sum() + gt.sum()) * hx;
        let scale = (gb.iter().map(|x| x.abs()).sum::<f64>() + gt.iter().map(|x| x.abs()).sum::<f64>()) * hx;
        (defect, COMPAT_RTOL * scale)
    }

    /// Fails on the worst violating time level, if any.
    pub fn check_compatible(&self) -> Result<()> {
        let mut worst: Option<(usize, f64, f64)> = None;
        for k in 0..=self.nt() {
            let (d, tol) = self.compat_defect(k);
            if d.abs() > tol && worst.is_none_or(|(_, wd, _)| d.abs() > wd) {
                worst = Some((k, d.abs(), tol));
            }
        }
        match worst {
            None => Ok(()),
            Some((t_index, defect, tolerance)) => Err(Error::Incompatible {
                t_index,
                defect,
                tolerance,
            }),
        }
    }

    /// Removes the joint wall mean per time level. Slices that are already
    /// compatible are left untouched, so the map is idempotent bit for bit.
    pub fn project_compatible(&self) -> WallData {
        let mut out = self.clone();
        for k in 0..=self.nt() {
            let (d, tol) = self.compat_defect(k);
            if d.abs() <= tol {
                continue;
            }
            let m = d / (2.0 * self.lx);
            out.g_bottom.row_mut(k).mapv_inplace(|x| x - m);
            out.g_top.row_mut(k).mapv_inplace(|x| x - m);
        }
        out
    }

    /// Imposed wall `v` at time level `k`: `(bottom, top)`.
    pub fn normal_velocity(&self, k: usize, delta: f64, alpha: f64) -> (Vec<f64>, Vec<f64>) {
        let s = delta.powf(alpha);
        (
            self.g_bottom.row(k).iter().map(|g| -s * g).collect(),
            self.g_top.row(k).iter().map(|g| s * g).collect(),
        )
    }

    /// Writes `wall,t_index,x_index,value` rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path)?;
        w.write_record(["wall", "t_index", "x_index", "value"])?;
        for (name, arr) in [("bottom", &self.g_bottom), ("top", &self.g_top)] {
            for ((k, i), val) in arr.indexed_iter() {
                w.write_record([name.to_string(), k.to_string(), i.to_string(), format!("{val:e}")])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the CSV layout of [`WallData::write_csv`]. Missing samples are an error.
    pub fn read_csv(path: &Path, dt: f64, lx: f64) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let mut rows = Vec::new();
        let (mut nt, mut nx) = (0usize, 0usize);
        for rec in r.records() {
            let rec = rec?;
            if rec.len() != 4 {
                return Err(Error::InvalidInput(format!("flux csv row has {} fields", rec.len())));
            }
            let bottom = match &rec[0] {
                "bottom" => true,
                "top" => false,
                other => return Err(Error::InvalidInput(format!("unknown wall '{other}'"))),
            };
            let parse_err = |e: &dyn std::fmt::Display| Error::InvalidInput(format!("flux csv: {e}"));
            let k: usize = rec[1].trim().parse().map_err(|e| parse_err(&e))?;
            let i: usize = rec[2].trim().parse().map_err(|e| parse_err(&e))?;
            let v: f64 = rec[3].trim().parse().map_err(|e| parse_err(&e))?;
            nt = nt.max(k);
            nx = nx.max(i + 1);
            rows.push((bottom, k, i, v));
        }
        let mut gb = Array2::from_elem((nt + 1, nx), f64::NAN);
        let mut gt = gb.clone();
        for (bottom, k, i, v) in rows {
            if bottom {
                gb[[k, i]] = v;
            } else {
                gt[[k, i]] = v;
            }
        }
        if gb.iter().chain(gt.iter()).any(|x| x.is_nan()) {
            return Err(Error::InvalidInput("flux csv does not cover every (wall, t, x) sample".into()));
        }
        Self::new(gb, gt, dt, lx)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FluxKind {
    /// `amplitude * sin(2 pi kappa x / lx) * sin(omega t)` on the bottom, negated on top.
    Tone { kappa: u32, omega: f64, amplitude: f64 },
    /// Sum of tones.
    Multitone { tones: Vec<(u32, f64, f64)> },
    /// Random sine series in time with spectrum decaying like `m^{-(1+2s)/2 - eta}`,
    /// times a randomly phased spatial mode `kappa`.
    BandLimitedNoise {
        seed: u64,
        s: f64,
        eta: f64,
        kappa: u32,
        amplitude: f64,
    },
}

/// Synthesizes compatible flux data on `nt + 1` levels of spacing `dt`,
/// sampled at the wall face centres `x_{i+1/2}` where the normal velocity lives.
///
/// A spatially constant tone (`kappa = 0`) drives net through-flow between
/// the walls and is only accepted with `allow_through_flow`.
pub fn make_test_flux(
    kind: &FluxKind,
    nx: usize,
    lx: f64,
    nt: usize,
    dt: f64,
    allow_through_flow: bool,
) -> Result<WallData> {
    let mut w = WallData::new(
        Array2::zeros((nt + 1, nx)),
        Array2::zeros((nt + 1, nx)),
        dt,
        lx,
    )?;
    let hx = lx / nx as f64;
    let reject_uniform = |kappa: u32| {
        if kappa == 0 && !allow_through_flow {
            Err(Error::InvalidInput(
                "kappa = 0 prescribes a net through-flow; enable through_flow to allow it".into(),
            ))
        } else {
            Ok(())
        }
    };
    let mut add_separable = |shape: &dyn Fn(f64) -> f64, time: &dyn Fn(f64) -> f64| {
        for k in 0..=nt {
            let a = time(k as f64 * dt);
            for i in 0..nx {
                let g = shape((i as f64 + 0.5) * hx) * a;
                w.g_bottom[[k, i]] += g;
                w.g_top[[k, i]] -= g;
            }
        }
    };
    match kind {
        FluxKind::Tone { kappa, omega, amplitude } => {
            reject_uniform(*kappa)?;
            let kx = 2.0 * PI * *kappa as f64 / lx;
            add_separable(&|x| amplitude * (kx * x).sin(), &|t| (omega * t).sin());
        }
        FluxKind::Multitone { tones } => {
            if tones.is_empty() {
                return Err(Error::InvalidInput("multitone needs at least one tone".into()));
            }
            for &(kappa, omega, amplitude) in tones {
                reject_uniform(kappa)?;
                let kx = 2.0 * PI * kappa as f64 / lx;
                if kappa == 0 {
                    add_separable(&|_| amplitude, &|t| (omega * t).sin());
                } else {
                    add_separable(&|x| amplitude * (kx * x).sin(), &|t| (omega * t).sin());
                }
            }
        }
        FluxKind::BandLimitedNoise {
            seed,
            s,
            eta,
            kappa,
            amplitude,
        } => {
            reject_uniform(*kappa)?;
            if !(*s > 0.0 && *eta > 0.0) {
                return Err(Error::InvalidInput(format!("noise needs s > 0 and eta > 0 (s={s}, eta={eta})")));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let phase = rng.random_range(0.0..2.0 * PI);
            let p = (1.0 + 2.0 * s) / 2.0 + eta;
            let modes = (nt / 4).max(1);
            // Drawn in order so that a finer time grid extends, not reshuffles, the series.
            let coef: Vec<f64> = (1..=modes)
                .map(|m| {
                    let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                    sign * rng.random_range(0.5..1.5) * (m as f64).powf(-p)
                })
                .collect();
            let t_end = nt as f64 * dt;
            let kx = 2.0 * PI * *kappa as f64 / lx;
            let time = |t: f64| {
                coef.iter()
                    .enumerate()
                    .map(|(m, a)| a * (PI * (m + 1) as f64 * t / t_end).sin())
                    .sum::<f64>()
            };
            if *kappa == 0 {
                add_separable(&|_| *amplitude, &time);
            } else {
                add_separable(&|x| amplitude * (kx * x + phase).sin(), &time);
            }
        }
    }
    Ok(w.project_compatible())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WallClosure {
    /// Navier slip with friction length `delta`.
    Robin(f64),
    NoSlip,
}

impl WallClosure {
    pub fn robin(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidInput(format!("delta must be positive, got {delta}")));
        }
        Ok(Self::Robin(delta))
    }
}

/// Fills the `u` ghost rows from the interior and the wall `v` rows already in `f`.
pub fn close_ghosts(f: &mut VelocityField, closure: WallClosure) {
    let g = f.grid;
    let ny = g.ny;
    for i in 0..g.nx {
        let im = g.west(i);
        match closure {
            WallClosure::NoSlip => {
                f.u[[0, i]] = -f.u[[1, i]];
                f.u[[ny + 1, i]] = -f.u[[ny, i]];
            }
            WallClosure::Robin(d) => {
                let h = g.hy;
                let vxb = (f.v[[0, i]] - f.v[[0, im]]) / g.hx;
                let vxt = (f.v[[ny, i]] - f.v[[ny, im]]) / g.hx;
                f.u[[0, i]] = ((d - h) * f.u[[1, i]] + d * h * vxb) / (d + h);
                f.u[[ny + 1, i]] = ((d - h) * f.u[[ny, i]] - d * h * vxt) / (d + h);
            }
        }
    }
}

/// Sets the wall `v` rows to `(bottom, top)`.
pub fn set_wall_normal(f: &mut VelocityField, bottom: &[f64], top: &[f64]) {
    let ny = f.grid.ny;
    for i in 0..f.grid.nx {
        f.v[[0, i]] = bottom[i];
        f.v[[ny, i]] = top[i];
    }
}

/// Imposes the normal flux of level `t_index` (or zero flux when `w` is `None`)
/// and closes the ghost rows with the Robin relation.
pub fn apply_bc(
    f: &VelocityField,
    w: Option<&WallData>,
    t_index: usize,
    delta: f64,
    alpha: f64,
) -> Result<VelocityField> {
    let closure = WallClosure::robin(delta)?;
    let mut out = f.clone();
    if let Some(w) = w {
        check_grid(&f.grid, w)?;
        if t_index > w.nt() {
            return Err(Error::InvalidInput(format!("time index {t_index} beyond nt = {}", w.nt())));
        }
        let (b, t) = w.normal_velocity(t_index, delta, alpha);
        set_wall_normal(&mut out, &b, &t);
    } else {
        let z = vec![0.0; f.grid.nx];
        set_wall_normal(&mut out, &z, &z);
    }
    close_ghosts(&mut out, closure);
    Ok(out)
}

fn check_grid(grid: &ChannelGrid, w: &WallData) -> Result<()> {
    if w.nx() != grid.nx || (w.lx - grid.lx).abs() > 1e-12 * grid.lx {
        return Err(Error::Mismatch(format!(
            "flux data has nx={} lx={}, grid has nx={} lx={}",
            w.nx(),
            w.lx,
            grid.nx,
            grid.lx
        )));
    }
    Ok(())
}

/// Largest violation of the discrete Robin relation `u_w - (delta/2)(u_y + v_x) = 0`
/// (bottom) and `u_w + (delta/2)(u_y + v_x) = 0` (top).
pub fn robin_residual(f: &VelocityField, delta: f64) -> f64 {
    let g = &f.grid;
    let ny = g.ny;
    let d = deformation(f);
    let (ub, ut) = f.wall_tangential();
    (0..g.nx)
        .map(|i| {
            let rb = ub[i] - delta * d.d12[[0, i]];
            let rt = ut[i] + delta * d.d12[[ny, i]];
            rb.abs().max(rt.abs())
        })
        .fold(0.0, f64::max)
}

/// Blend of the two wall stream functions.
pub fn blend(y: f64) -> f64 {
    y * y * (3.0 - 2.0 * y)
}

/// Divergence-free lifting `G1` of the imposed normal velocity at level `t_index`,
/// with ghost rows closed by the Robin relation.
pub fn build_lifting(w: &WallData, grid: &ChannelGrid, t_index: usize, delta: f64, alpha: f64) -> Result<VelocityField> {
    check_grid(grid, w)?;
    let closure = WallClosure::robin(delta)?;
    if t_index > w.nt() {
        return Err(Error::InvalidInput(format!("time index {t_index} beyond nt = {}", w.nt())));
    }
    let (d, tol) = w.compat_defect(t_index);
    if d.abs() > tol {
        return Err(Error::Incompatible {
            t_index,
            defect: d.abs(),
            tolerance: tol,
        });
    }
    let (vb, vt) = w.normal_velocity(t_index, delta, alpha);
    Ok(lifting_from_wall_velocity(grid, &vb, &vt, closure))
}

/// Stream-function lifting of arbitrary compatible wall `v` rows.
pub fn lifting_from_wall_velocity(grid: &ChannelGrid, vb: &[f64], vt: &[f64], closure: WallClosure) -> VelocityField {
    let g = grid;
    let n = g.nx as f64;
    let c = 0.5 * (vb.iter().sum::<f64>() + vt.iter().sum::<f64>()) / n;
    let mb = vb.iter().sum::<f64>() / n;
    let mt = vt.iter().sum::<f64>() / n;
    // periodic antiderivatives of the zero-mean parts: v = -(psi_{i+1} - psi_i)/hx
    let antider = |v: &[f64], m: f64| {
        let mut a = vec![0.0; g.nx];
        for i in 0..g.nx - 1 {
            a[i + 1] = a[i] - g.hx * (v[i] - m);
        }
        a
    };
    let a = antider(vb, mb);
    let b = antider(vt, mt);
    let psi = Array2::from_shape_fn((g.ny + 1, g.nx), |(j, i)| {
        let beta = blend(g.y_node(j));
        (1.0 - beta) * a[i] + beta * b[i]
    });
    let mut f = VelocityField::zeros(g);
    for j in 0..g.ny {
        for i in 0..g.nx {
            f.u[[j + 1, i]] = (psi[[j + 1, i]] - psi[[j, i]]) / g.hy;
        }
    }
    for j in 0..=g.ny {
        for i in 0..g.nx {
            f.v[[j, i]] = -(psi[[j, g.east(i)]] - psi[[j, i]]) / g.hx + c;
        }
    }
    // exact wall traces; the interior rows above already telescope to them
    set_wall_normal(&mut f, vb, vt);
    close_ghosts(&mut f, closure);
    f
}

/// Largest wall violation of `n.D(f).tau - curl(f)/2 = 0` on the flat walls,
/// with `tau` the positively oriented tangent (`(1,0)` at the bottom, `(-1,0)`
/// at the top). `n.D.tau` uses the ghost rows; the curl uses a one-sided
/// second-order `u_y` from the interior. Assumes zero wall-normal velocity.
pub fn vorticity_identity_residual(f: &VelocityField) -> f64 {
    let g = &f.grid;
    let ny = g.ny;
    let d = deformation(f);
    let mut worst: f64 = 0.0;
    for i in 0..g.nx {
        let im = g.west(i);
        // bottom: n = (0,-1), tau = (1,0): n.D.tau = -d12
        let uy = (2.0 * (f.u[[2, i]] - f.u[[1, i]]) - (f.u[[3, i]] - f.u[[2, i]])) / g.hy;
        let vx = (f.v[[0, i]] - f.v[[0, im]]) / g.hx;
        let rb = -d.d12[[0, i]] - 0.5 * (vx - uy);
        // top: n = (0,1), tau = (-1,0): n.D.tau = -d12
        let uy = (2.0 * (f.u[[ny, i]] - f.u[[ny - 1, i]]) - (f.u[[ny - 1, i]] - f.u[[ny - 2, i]])) / g.hy;
        let vx = (f.v[[ny, i]] - f.v[[ny, im]]) / g.hx;
        let rt = -d.d12[[ny, i]] - 0.5 * (vx - uy);
        worst = worst.max(rb.abs()).max(rt.abs());
    }
    worst
}
