//! Manufactured no-slip solution for convergence studies.
//!
//! Stream function `psi = A sin(2 pi x) sin^2(pi y)` on the unit-period channel:
//! `u = A pi sin(2 pi x) sin(2 pi y)`, `v = -A pi cos(2 pi x) (1 - cos(2 pi y))`,
//! both vanishing on the walls. The forcing makes it a steady solution with zero pressure.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{inner, ChannelGrid, VelocityField};
use crate::nse::{solve_noslip, ForceFn, Mode, NseConfig};

pub fn exact_u(a: f64, x: f64, y: f64) -> f64 {
    a * PI * (2.0 * PI * x).sin() * (2.0 * PI * y).sin()
}

pub fn exact_v(a: f64, x: f64, y: f64) -> f64 {
    -a * PI * (2.0 * PI * x).cos() * (1.0 - (2.0 * PI * y).cos())
}

pub fn stream(a: f64, x: f64, y: f64) -> f64 {
    a * (2.0 * PI * x).sin() * (PI * y).sin().powi(2)
}

/// Discrete curl of the stream function sampled at cell corners: within `O(h^2)` of
/// the exact field, exactly solenoidal and with zero wall-normal velocity.
/// Ghost rows are left open. The grid must have `lx = 1`.
pub fn exact_field(g: &ChannelGrid, a: f64) -> VelocityField {
    let psi = |i: usize, j: usize| if j == 0 || j == g.ny { 0.0 } else { stream(a, g.x_face(i), g.y_node(j)) };
    let mut f = VelocityField::zeros(g);
    for j in 0..g.ny {
        for i in 0..g.nx {
            f.u[[j + 1, i]] = (psi(i, j + 1) - psi(i, j)) / g.hy;
        }
    }
    for j in 1..g.ny {
        for i in 0..g.nx {
            f.v[[j, i]] = -(psi(g.east(i), j) - psi(i, j)) / g.hx;
        }
    }
    f
}

/// `-nu/2 Lap u + (u.grad) u` for the steady field.
pub fn steady_force(a: f64, nu: f64) -> Arc<ForceFn> {
    Arc::new(move |g: &ChannelGrid, _t: f64| {
        let k = 2.0 * PI;
        let fu = |x: f64, y: f64| {
            let (u, v) = (exact_u(a, x, y), exact_v(a, x, y));
            let ux = a * PI * k * (k * x).cos() * (k * y).sin();
            let uy = a * PI * k * (k * x).sin() * (k * y).cos();
            0.5 * nu * 2.0 * k * k * u + u * ux + v * uy
        };
        let fv = |x: f64, y: f64| {
            let (u, v) = (exact_u(a, x, y), exact_v(a, x, y));
            let vx = a * PI * k * (k * x).sin() * (1.0 - (k * y).cos());
            let vy = -a * PI * k * (k * x).cos() * (k * y).sin();
            let lap = a * PI * k * k * (k * x).cos() - 2.0 * a * PI * k * k * (k * x).cos() * (k * y).cos();
            -0.5 * nu * lap + u * vx + v * vy
        };
        VelocityField::from_fn(g, fu, fv)
    })
}

/// L2 error at `t_end` of the no-slip solver started from the exact field, per grid size.
/// Uses `dt = cfl * h`.
pub fn spatial_study(sizes: &[usize], a: f64, cfl: f64, t_end: f64) -> Result<Vec<(f64, f64)>> {
    sizes
        .iter()
        .map(|&n| {
            let g = ChannelGrid::new(n, n, 1.0)?;
            let dt0 = cfl * g.hx;
            let nt = (t_end / dt0).ceil() as usize;
            let mut cfg = NseConfig::new(g, 1.0, 1.0, t_end / nt as f64, nt, Mode::NoSlip);
            cfg.forcing = Some(steady_force(a, cfg.nu));
            cfg.save_stride = nt;
            let tr = solve_noslip(&cfg, &exact_field(&g, a))?;
            let last = &tr.snapshots.last().ok_or_else(|| Error::Numerical("empty trajectory".into()))?.velocity;
            let e = last - &exact_field(&g, a);
            Ok((g.hx, inner(&e, &e).sqrt()))
        })
        .collect()
}

/// Time-dependent forcing `(1 + sin(2 pi t))` times the steady one.
pub fn pulsed_force(a: f64, nu: f64) -> Arc<ForceFn> {
    let f = steady_force(a, nu);
    Arc::new(move |g: &ChannelGrid, t: f64| f(g, t).scaled(1.0 + (2.0 * PI * t).sin()))
}

/// Errors at `t_end` on a fixed grid for each step count, against a run with `nt_ref` steps.
/// Starts from rest under [`pulsed_force`].
pub fn time_study(n: usize, a: f64, t_end: f64, steps: &[usize], nt_ref: usize) -> Result<Vec<(f64, f64)>> {
    let g = ChannelGrid::new(n, n, 1.0)?;
    let run = |nt: usize| -> Result<VelocityField> {
        let mut cfg = NseConfig::new(g, 1.0, 1.0, t_end / nt as f64, nt, Mode::NoSlip);
        cfg.forcing = Some(pulsed_force(a, cfg.nu));
        cfg.save_stride = nt;
        let tr = solve_noslip(&cfg, &VelocityField::zeros(&g))?;
        Ok(tr.snapshots.last().expect("final snapshot").velocity.clone())
    };
    let reference = run(nt_ref)?;
    steps
        .iter()
        .map(|&nt| {
            let e = &run(nt)? - &reference;
            Ok((t_end / nt as f64, inner(&e, &e).sqrt()))
        })
        .collect()
}
