//! Discrete generalized Stokes problem
//!
//! ```text
//! sigma u - nu div D(u) + grad p = F      (interior u and v faces)
//!                          div u = b      (cells)
//! ```
//!
//! with prescribed wall-normal `v` and the tangential closure of [`WallClosure`].
//!
//! The inhomogeneous wall data are removed with the stream-function lifting;
//! the homogeneous remainder is solved exactly by a Fourier transform in `x`
//! followed by one banded LU per wavenumber (factored once per solver). The
//! real-space operator is then used for iterative refinement and for the
//! reported residual.

use std::sync::Arc;

use ndarray::Array2;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::boundary::{close_ghosts, lifting_from_wall_velocity, set_wall_normal, WallClosure};
use crate::error::{Error, Result};
use crate::grid::{divergence, gradient, viscous_term, ChannelGrid, PressureField, VelocityField};
use crate::linalg::{BandLu, BandMatrix};

const MAX_REFINE: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorParams {
    /// Coefficient of the identity (`1/dt` for implicit steps, `0` for stationary problems).
    pub sigma: f64,
    pub nu: f64,
    pub closure: WallClosure,
}

/// Real-space residual pieces of the saddle operator.
#[derive(Debug, Clone)]
pub struct OperatorOutput {
    pub momentum: VelocityField,
    pub continuity: Array2<f64>,
}

/// Applies the operator to `(u, p)`. Ghost rows of `u` are recomputed from its
/// interior and wall `v` rows; only interior `u` rows and interior `v` rows of
/// the momentum output are meaningful (the rest are zero).
pub fn apply_operator(params: &OperatorParams, u: &VelocityField, p: &PressureField) -> OperatorOutput {
    let g = u.grid;
    let mut uc = u.clone();
    close_ghosts(&mut uc, params.closure);
    let mut m = viscous_term(&uc);
    m.scale(-params.nu);
    m.axpy(1.0, &gradient(p));
    for r in 1..=g.ny {
        for i in 0..g.nx {
            m.u[[r, i]] += params.sigma * uc.u[[r, i]];
        }
    }
    for j in 1..g.ny {
        for i in 0..g.nx {
            m.v[[j, i]] += params.sigma * uc.v[[j, i]];
        }
    }
    OperatorOutput {
        momentum: m,
        continuity: divergence(&uc),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveStats {
    /// Relative residual of the returned solution.
    pub residual: f64,
    /// Number of direct solves performed.
    pub iterations: usize,
    pub history: Vec<f64>,
}

pub struct SaddleSolver {
    grid: ChannelGrid,
    params: OperatorParams,
    modes: Vec<BandLu>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SaddleSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SaddleSolver")
            .field("grid", &self.grid)
            .field("params", &self.params)
            .finish_non_exhaustive()
    }
}

#[inline]
fn iu(j: usize) -> usize {
    3 * j
}

#[inline]
fn ip(j: usize) -> usize {
    3 * j + 1
}

/// interior `v` row `j` (1..ny-1)
#[inline]
fn iv(j: usize) -> usize {
    3 * j - 1
}

impl SaddleSolver {
    pub fn new(grid: &ChannelGrid, params: OperatorParams) -> Result<Self> {
        if !(params.sigma >= 0.0 && params.sigma.is_finite()) {
            return Err(Error::InvalidInput(format!("sigma must be finite and >= 0, got {}", params.sigma)));
        }
        if !(params.nu > 0.0 && params.nu.is_finite()) {
            return Err(Error::InvalidInput(format!("viscosity must be positive, got {}", params.nu)));
        }
        if let WallClosure::Robin(d) = params.closure {
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::InvalidInput(format!("delta must be positive, got {d}")));
            }
        }
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(grid.nx);
        let inv = planner.plan_fft_inverse(grid.nx);
        let modes = (0..=grid.nx / 2)
            .map(|k| assemble_mode(grid, &params, k).factor())
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            grid: *grid,
            params,
            modes,
            fwd,
            inv,
        })
    }

    pub fn params(&self) -> &OperatorParams {
        &self.params
    }

    pub fn grid(&self) -> &ChannelGrid {
        &self.grid
    }

    /// Solves with right-hand sides `rhs_mom` (interior rows read), `rhs_div`
    /// and wall-normal velocities `wall_bottom`, `wall_top`. The returned
    /// velocity has its ghost rows closed and the pressure has zero mean.
    pub fn solve(
        &self,
        rhs_mom: &VelocityField,
        rhs_div: &Array2<f64>,
        wall_bottom: &[f64],
        wall_top: &[f64],
        tol: f64,
    ) -> Result<(VelocityField, PressureField, SolveStats)> {
        let g = &self.grid;
        if rhs_mom.grid != *g || rhs_div.dim() != (g.ny, g.nx) || wall_bottom.len() != g.nx || wall_top.len() != g.nx {
            return Err(Error::Mismatch("saddle solve inputs do not match the solver grid".into()));
        }
        if !(tol > 0.0) {
            return Err(Error::InvalidInput(format!("tolerance must be positive, got {tol}")));
        }
        let net_wall: f64 = wall_top.iter().zip(wall_bottom).map(|(t, b)| t - b).sum::<f64>() * g.hx;
        let net_div = rhs_div.sum() * g.cell_area();
        let scale_flux = wall_top.iter().chain(wall_bottom).map(|x| x.abs()).sum::<f64>() * g.hx
            + rhs_div.iter().map(|x| x.abs()).sum::<f64>() * g.cell_area();
        if (net_wall - net_div).abs() > 1e-10 * scale_flux.max(f64::MIN_POSITIVE) {
            return Err(Error::InvalidInput(format!(
                "mass source {net_div:.3e} does not match net wall flux {net_wall:.3e}"
            )));
        }

        let lift = lifting_from_wall_velocity(g, wall_bottom, wall_top, self.params.closure);
        let zero_p = PressureField::zeros(g);
        let rhs_norm = residual_norm(g, rhs_mom, rhs_div);

        let mut u = lift.clone();
        let mut p = zero_p.clone();
        let mut history = Vec::new();
        let mut scale = rhs_norm;
        for it in 0..MAX_REFINE {
            let op = apply_operator(&self.params, &u, &p);
            let mut rm = rhs_mom.clone();
            rm.axpy(-1.0, &op.momentum);
            let rd = rhs_div - &op.continuity;
            let rn = residual_norm(g, &rm, &rd);
            if it == 0 {
                scale = scale.max(rn);
            }
            let rel = if scale > 0.0 { rn / scale } else { 0.0 };
            history.push(rel);
            if rel <= tol || rn == 0.0 {
                p.remove_mean();
                close_ghosts(&mut u, self.params.closure);
                return Ok((
                    u,
                    p,
                    SolveStats {
                        residual: rel,
                        iterations: it,
                        history,
                    },
                ));
            }
            let (du, dp) = self.solve_homogeneous(&rm, &rd);
            u.axpy(1.0, &du);
            p.p += &dp.p;
            set_wall_normal(&mut u, wall_bottom, wall_top);
        }
        Err(Error::NonConvergence { tol, history })
    }

    /// Direct Fourier/banded solve for zero wall-normal velocity. The mean of
    /// `rhs_div` is ignored (pressure gauge row).
    fn solve_homogeneous(&self, rhs_mom: &VelocityField, rhs_div: &Array2<f64>) -> (VelocityField, PressureField) {
        let g = &self.grid;
        let (nx, ny) = (g.nx, g.ny);
        let n = 3 * ny - 1;
        let to_hat = |row: ndarray::ArrayView1<f64>| {
            let mut buf: Vec<Complex64> = row.iter().map(|&x| Complex64::new(x, 0.0)).collect();
            self.fwd.process(&mut buf);
            buf
        };
        let fu: Vec<Vec<Complex64>> = (0..ny).map(|j| to_hat(rhs_mom.u.row(j + 1))).collect();
        let fv: Vec<Vec<Complex64>> = (1..ny).map(|j| to_hat(rhs_mom.v.row(j))).collect();
        let fb: Vec<Vec<Complex64>> = (0..ny).map(|j| to_hat(rhs_div.row(j))).collect();

        let mut hat = vec![vec![Complex64::new(0.0, 0.0); nx]; n];
        let mut x = vec![Complex64::new(0.0, 0.0); n];
        for (k, lu) in self.modes.iter().enumerate() {
            for j in 0..ny {
                x[iu(j)] = fu[j][k];
                x[ip(j)] = fb[j][k];
            }
            for j in 1..ny {
                x[iv(j)] = fv[j - 1][k];
            }
            if k == 0 {
                x[ip(ny - 1)] = Complex64::new(0.0, 0.0);
            }
            lu.solve(&mut x);
            for r in 0..n {
                hat[r][k] = x[r];
                if k != 0 && 2 * k != nx {
                    hat[r][nx - k] = x[r].conj();
                }
            }
        }
        let scale = 1.0 / nx as f64;
        let back = |buf: &mut Vec<Complex64>| {
            self.inv.process(buf);
            buf.iter().map(|c| c.re * scale).collect::<Vec<f64>>()
        };
        let mut du = VelocityField::zeros(g);
        let mut dp = PressureField::zeros(g);
        for j in 0..ny {
            let row = back(&mut hat[iu(j)]);
            du.u.row_mut(j + 1).iter_mut().zip(row).for_each(|(a, b)| *a = b);
            let row = back(&mut hat[ip(j)]);
            dp.p.row_mut(j).iter_mut().zip(row).for_each(|(a, b)| *a = b);
        }
        for j in 1..ny {
            let row = back(&mut hat[iv(j)]);
            du.v.row_mut(j).iter_mut().zip(row).for_each(|(a, b)| *a = b);
        }
        close_ghosts(&mut du, self.params.closure);
        (du, dp)
    }
}

fn residual_norm(g: &ChannelGrid, m: &VelocityField, d: &Array2<f64>) -> f64 {
    let mut s = 0.0;
    for r in 1..=g.ny {
        s += m.u.row(r).iter().map(|x| x * x).sum::<f64>();
    }
    for j in 1..g.ny {
        s += m.v.row(j).iter().map(|x| x * x).sum::<f64>();
    }
    s += d.iter().map(|x| x * x).sum::<f64>();
    (s * g.cell_area()).sqrt()
}

/// Per-wavenumber block of the homogeneous operator.
///
/// Unknown order per row `j`: `u_j`, `p_j`, `v_{j+1}` (the last `v` is the wall and is dropped).
fn assemble_mode(g: &ChannelGrid, params: &OperatorParams, k: usize) -> BandMatrix {
    let ny = g.ny;
    let n = 3 * ny - 1;
    let mut a = BandMatrix::zeros(n, 3, 3);
    let theta = 2.0 * std::f64::consts::PI * k as f64 / g.nx as f64;
    let e = Complex64::from_polar(1.0, theta);
    let one = Complex64::new(1.0, 0.0);
    // forward and backward differences in x
    let cx = (e - one) / g.hx;
    let bx = (one - e.conj()) / g.hx;
    let (hy, nu, sigma) = (g.hy, params.nu, params.sigma);
    let wall = match params.closure {
        WallClosure::Robin(d) => 1.0 / (d + hy),
        WallClosure::NoSlip => 1.0 / hy,
    };
    // d12 at node row m as (column, coefficient) pairs
    let d12 = |m: usize| -> Vec<(usize, Complex64)> {
        if m == 0 {
            vec![(iu(0), Complex64::new(wall, 0.0))]
        } else if m == ny {
            vec![(iu(ny - 1), Complex64::new(-wall, 0.0))]
        } else {
            vec![
                (iu(m), Complex64::new(0.5 / hy, 0.0)),
                (iu(m - 1), Complex64::new(-0.5 / hy, 0.0)),
                (iv(m), 0.5 * bx),
            ]
        }
    };
    // d22 at cell row j
    let d22 = |j: usize| -> Vec<(usize, Complex64)> {
        let mut t = Vec::with_capacity(2);
        if j + 1 < ny {
            t.push((iv(j + 1), Complex64::new(1.0 / hy, 0.0)));
        }
        if j > 0 {
            t.push((iv(j), Complex64::new(-1.0 / hy, 0.0)));
        }
        t
    };
    for j in 0..ny {
        let r = iu(j);
        a.add(r, iu(j), Complex64::new(sigma, 0.0) - nu * bx * cx);
        for (c, v) in d12(j + 1) {
            a.add(r, c, -nu * v / hy);
        }
        for (c, v) in d12(j) {
            a.add(r, c, nu * v / hy);
        }
        a.add(r, ip(j), bx);

        let r = ip(j);
        if k == 0 && j == ny - 1 {
            a.add(r, ip(j), one);
        } else {
            a.add(r, iu(j), cx);
            for (c, v) in d22(j) {
                a.add(r, c, v);
            }
        }
    }
    for j in 1..ny {
        let r = iv(j);
        a.add(r, iv(j), Complex64::new(sigma, 0.0));
        for (c, v) in d12(j) {
            a.add(r, c, -nu * cx * v);
        }
        for (c, v) in d22(j) {
            a.add(r, c, -nu * v / hy);
        }
        for (c, v) in d22(j - 1) {
            a.add(r, c, nu * v / hy);
        }
        a.add(r, ip(j), Complex64::new(1.0 / hy, 0.0));
        a.add(r, ip(j - 1), Complex64::new(-1.0 / hy, 0.0));
    }
    a
}
