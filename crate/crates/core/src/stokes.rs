//! Stationary Stokes lifting `(G, Pi)` and the linear evolution `(z, q)`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::analysis::{fractional_norm, FieldSeries};
use crate::boundary::{WallClosure, WallData};
use crate::error::{Error, Result};
use crate::grid::{deformation, divergence, velocity_norms, ChannelGrid, PressureField, VelocityField};
use crate::saddle::{OperatorParams, SaddleSolver};

/// Constant standing in for the unquantified `C` of the a-priori estimates.
pub const ESTIMATE_CONSTANT: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct StokesSolution {
    pub velocity: VelocityField,
    pub pressure: PressureField,
    pub residual: f64,
    pub iterations: usize,
}

/// Factored stationary problem `-nu div D(G) + grad Pi = 0`, `div G = 0`.
#[derive(Debug)]
pub struct StationaryStokes {
    solver: SaddleSolver,
    delta: f64,
}

impl StationaryStokes {
    pub fn new(grid: &ChannelGrid, delta: f64, nu: f64) -> Result<Self> {
        let closure = WallClosure::robin(delta)?;
        Ok(Self {
            solver: SaddleSolver::new(grid, OperatorParams { sigma: 0.0, nu, closure })?,
            delta,
        })
    }

    pub fn solve(&self, w: &WallData, t_index: usize, alpha: f64, tol: f64) -> Result<StokesSolution> {
        let g = self.solver.grid();
        check_flux(g, w, t_index)?;
        let (vb, vt) = w.normal_velocity(t_index, self.delta, alpha);
        let (velocity, pressure, stats) =
            self.solver
                .solve(&VelocityField::zeros(g), &Array2::zeros((g.ny, g.nx)), &vb, &vt, tol)?;
        Ok(StokesSolution {
            velocity,
            pressure,
            residual: stats.residual,
            iterations: stats.iterations,
        })
    }
}

fn check_flux(g: &ChannelGrid, w: &WallData, t_index: usize) -> Result<()> {
    if w.nx() != g.nx || (w.lx - g.lx).abs() > 1e-12 * g.lx {
        return Err(Error::Mismatch(format!(
            "flux data (nx={}, lx={}) does not match grid (nx={}, lx={})",
            w.nx(),
            w.lx,
            g.nx,
            g.lx
        )));
    }
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
    Ok(())
}

/// One-shot stationary solve with unit viscosity.
pub fn solve_stationary(
    w: &WallData,
    grid: &ChannelGrid,
    t_index: usize,
    delta: f64,
    alpha: f64,
    tol: f64,
) -> Result<StokesSolution> {
    StationaryStokes::new(grid, delta, 1.0)?.solve(w, t_index, alpha, tol)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearParams {
    pub delta: f64,
    pub alpha: f64,
    pub nu: f64,
    pub dt: f64,
    pub nt: usize,
    pub tol: f64,
}

/// Output of [`solve_linear_evolution`]: `z^n` and the stationary liftings `G^n`, `n = 0..=nt`.
#[derive(Debug, Clone)]
pub struct LinearEvolution {
    pub params: LinearParams,
    pub z: Vec<StokesSolution>,
    pub lifting: Vec<StokesSolution>,
}

impl LinearEvolution {
    /// Homogeneous part `Z^n = z^n - G^n`.
    pub fn homogeneous(&self, n: usize) -> VelocityField {
        &self.z[n].velocity - &self.lifting[n].velocity
    }

    pub fn grid(&self) -> ChannelGrid {
        self.z[0].velocity.grid
    }
}

/// Backward-Euler Stokes evolution with boundary data at the new level.
///
/// Stepped as `z = Z + G`: `Z` has homogeneous normal trace and is driven by
/// the body force `-(G^{n+1} - G^n)/dt`, with `Z^0 = 0` so that `z^0 = G^0`.
pub fn solve_linear_evolution(w: &WallData, grid: &ChannelGrid, params: LinearParams) -> Result<LinearEvolution> {
    if params.nt > w.nt() {
        return Err(Error::InvalidInput(format!(
            "flux data has {} steps, {} requested",
            w.nt(),
            params.nt
        )));
    }
    if (params.dt - w.dt).abs() > 1e-12 * w.dt {
        return Err(Error::Mismatch(format!("dt {} differs from flux dt {}", params.dt, w.dt)));
    }
    let stationary = StationaryStokes::new(grid, params.delta, params.nu)?;
    let evolve = SaddleSolver::new(
        grid,
        OperatorParams {
            sigma: 1.0 / params.dt,
            nu: params.nu,
            closure: WallClosure::robin(params.delta)?,
        },
    )?;
    let lifting = (0..=params.nt)
        .map(|k| stationary.solve(w, k, params.alpha, params.tol))
        .collect::<Result<Vec<_>>>()?;
    let zeros = vec![0.0; grid.nx];
    let no_div = Array2::zeros((grid.ny, grid.nx));
    let mut z = Vec::with_capacity(params.nt + 1);
    z.push(lifting[0].clone());
    let mut big_z = VelocityField::zeros(grid);
    for n in 0..params.nt {
        let mut rhs = big_z.scaled(1.0 / params.dt);
        rhs.axpy(-1.0 / params.dt, &lifting[n + 1].velocity);
        rhs.axpy(1.0 / params.dt, &lifting[n].velocity);
        let (zn, qn, stats) = evolve.solve(&rhs, &no_div, &zeros, &zeros, params.tol)?;
        let mut pressure = qn;
        pressure.p += &lifting[n + 1].pressure.p;
        pressure.remove_mean();
        z.push(StokesSolution {
            velocity: &zn + &lifting[n + 1].velocity,
            pressure,
            residual: stats.residual,
            iterations: stats.iterations,
        });
        big_z = zn;
    }
    Ok(LinearEvolution { params, z, lifting })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearAudit {
    /// Running `sup ||z||^2 + sum dt (||D z||^2 + ||z.tau||_G^2 / delta)` per level.
    pub lhs: Vec<f64>,
    /// `C (||G||^2_{H^{1/2+eps}(L2)} + sum dt ||D G||^2)`.
    pub rhs: f64,
    /// `lhs[nt] / rhs`; 0 when both vanish.
    pub ratio: f64,
}

/// Both sides of the linear energy estimate for one run.
pub fn energy_audit_linear(traj: &LinearEvolution, epsilon: f64) -> Result<LinearAudit> {
    let LinearParams { delta, dt, .. } = traj.params;
    let mut lhs = Vec::with_capacity(traj.z.len());
    let mut sup: f64 = 0.0;
    let mut integral = 0.0;
    for (n, s) in traj.z.iter().enumerate() {
        let nm = velocity_norms(&s.velocity);
        sup = sup.max(nm.l2 * nm.l2);
        if n > 0 {
            let d = deformation(&s.velocity).norm_sq();
            integral += dt * (d + nm.boundary_l2_tangential.powi(2) / delta);
        }
        lhs.push(sup + integral);
    }
    let g_fields: Vec<VelocityField> = traj.lifting.iter().map(|s| s.velocity.clone()).collect();
    let series = FieldSeries::from_velocity(&g_fields, dt)?;
    let frac = fractional_norm(&series, 0.5 + epsilon)?;
    let dg: f64 = traj.lifting[1..]
        .iter()
        .map(|s| dt * deformation(&s.velocity).norm_sq())
        .sum();
    let rhs = ESTIMATE_CONSTANT * (frac * frac + dg);
    let last = *lhs.last().unwrap_or(&0.0);
    let ratio = if rhs > 0.0 {
        last / rhs
    } else if last == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(LinearAudit { lhs, rhs, ratio })
}

/// Largest cell divergence of a solution.
pub fn max_divergence(s: &StokesSolution) -> f64 {
    divergence(&s.velocity).iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

const MAGIC: &[u8; 6] = b"VSEED1";

/// Writes snapshots as: magic, `nx`, `ny`, `nt` (u64 LE), `dt` (f64 LE), then per
/// record the `u` array (ghost rows included), `v` and `p`, each row-major f64 LE.
/// `nt` is the number of records minus one.
pub fn write_snapshots(path: &Path, dt: f64, records: &[(&VelocityField, &PressureField)]) -> Result<()> {
    let Some((first, _)) = records.first() else {
        return Err(Error::InvalidInput("no snapshots to write".into()));
    };
    let g = first.grid;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    for v in [g.nx as u64, g.ny as u64, (records.len() - 1) as u64] {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&dt.to_le_bytes())?;
    for (u, p) in records {
        if u.grid != g {
            return Err(Error::Mismatch("snapshots on different grids".into()));
        }
        for x in u.u.iter().chain(u.v.iter()).chain(p.p.iter()) {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads the format of [`write_snapshots`]; `lx` is not stored in the file.
pub fn read_snapshots(path: &Path, lx: f64) -> Result<(f64, Vec<(VelocityField, PressureField)>)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 6];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::InvalidInput("not a VSEED1 snapshot file".into()));
    }
    let mut b8 = [0u8; 8];
    let mut next_u64 = |r: &mut BufReader<File>| -> Result<u64> {
        r.read_exact(&mut b8)?;
        Ok(u64::from_le_bytes(b8))
    };
    let nx = next_u64(&mut r)? as usize;
    let ny = next_u64(&mut r)? as usize;
    let nt = next_u64(&mut r)? as usize;
    let dt = f64::from_bits(next_u64(&mut r)?);
    let g = ChannelGrid::new(nx, ny, lx)?;
    let mut out = Vec::with_capacity(nt + 1);
    let mut buf = [0u8; 8];
    let mut fill = |a: &mut Array2<f64>, r: &mut BufReader<File>| -> Result<()> {
        for x in a.iter_mut() {
            r.read_exact(&mut buf)?;
            *x = f64::from_le_bytes(buf);
        }
        Ok(())
    };
    for _ in 0..=nt {
        let mut u = VelocityField::zeros(&g);
        let mut p = PressureField::zeros(&g);
        fill(&mut u.u, &mut r)?;
        fill(&mut u.v, &mut r)?;
        fill(&mut p.p, &mut r)?;
        out.push((u, p));
    }
    Ok((dt, out))
}
