//! Brute-force reference for the saddle-point solves: the complete real-space
//! system (ghost rows, wall rows and pressure included) assembled column by
//! column and solved by dense LU. Only meant for small grids.

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;

use crate::boundary::WallClosure;
use crate::error::{Error, Result};
use crate::grid::{divergence, gradient, viscous_term, ChannelGrid, PressureField, VelocityField};
use crate::saddle::OperatorParams;

struct Layout {
    nx: usize,
    ny: usize,
}

impl Layout {
    fn u(&self, r: usize, i: usize) -> usize {
        r * self.nx + i
    }
    fn v(&self, j: usize, i: usize) -> usize {
        (self.ny + 2) * self.nx + j * self.nx + i
    }
    fn p(&self, j: usize, i: usize) -> usize {
        (2 * self.ny + 3) * self.nx + j * self.nx + i
    }
    fn len(&self) -> usize {
        (3 * self.ny + 3) * self.nx
    }
}

fn unpack(g: &ChannelGrid, l: &Layout, x: &[f64]) -> (VelocityField, PressureField) {
    let mut u = VelocityField::zeros(g);
    let mut p = PressureField::zeros(g);
    for i in 0..g.nx {
        for r in 0..g.ny + 2 {
            u.u[[r, i]] = x[l.u(r, i)];
        }
        for j in 0..=g.ny {
            u.v[[j, i]] = x[l.v(j, i)];
        }
        for j in 0..g.ny {
            p.p[[j, i]] = x[l.p(j, i)];
        }
    }
    (u, p)
}

/// Dense solve of the same problem as [`crate::saddle::SaddleSolver::solve`].
pub fn dense_solve(
    g: &ChannelGrid,
    params: &OperatorParams,
    rhs_mom: &VelocityField,
    rhs_div: &Array2<f64>,
    wall_bottom: &[f64],
    wall_top: &[f64],
) -> Result<(VelocityField, PressureField)> {
    let l = Layout { nx: g.nx, ny: g.ny };
    let n = l.len();
    let (nx, ny) = (g.nx, g.ny);
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut b = DVector::<f64>::zeros(n);

    // equation rows: x-momentum, y-momentum, continuity, wall v, tangential closure
    let row_xm = |j: usize, i: usize| j * nx + i;
    let row_ym = |j: usize, i: usize| ny * nx + (j - 1) * nx + i;
    let row_c = |j: usize, i: usize| (2 * ny - 1) * nx + j * nx + i;
    let row_w = |top: bool, i: usize| (3 * ny - 1) * nx + usize::from(top) * nx + i;
    let row_t = |top: bool, i: usize| (3 * ny + 1) * nx + usize::from(top) * nx + i;

    let mut e = vec![0.0; n];
    for col in 0..n {
        e[col] = 1.0;
        let (u, p) = unpack(g, &l, &e);
        e[col] = 0.0;
        let mut m = viscous_term(&u);
        m.scale(-params.nu);
        m.axpy(1.0, &gradient(&p));
        let d = divergence(&u);
        for i in 0..nx {
            for j in 0..ny {
                a[(row_xm(j, i), col)] = m.u[[j + 1, i]] + params.sigma * u.u[[j + 1, i]];
                a[(row_c(j, i), col)] = d[[j, i]];
            }
            for j in 1..ny {
                a[(row_ym(j, i), col)] = m.v[[j, i]] + params.sigma * u.v[[j, i]];
            }
        }
    }
    for i in 0..nx {
        for j in 0..ny {
            b[row_xm(j, i)] = rhs_mom.u[[j + 1, i]];
            b[row_c(j, i)] = rhs_div[[j, i]];
        }
        for j in 1..ny {
            b[row_ym(j, i)] = rhs_mom.v[[j, i]];
        }
    }
    // pressure gauge replaces the last continuity row
    let gauge = row_c(ny - 1, nx - 1);
    a.row_mut(gauge).fill(0.0);
    a[(gauge, l.p(ny - 1, nx - 1))] = 1.0;
    b[gauge] = 0.0;

    for i in 0..nx {
        a[(row_w(false, i), l.v(0, i))] = 1.0;
        b[row_w(false, i)] = wall_bottom[i];
        a[(row_w(true, i), l.v(ny, i))] = 1.0;
        b[row_w(true, i)] = wall_top[i];

        let im = g.west(i);
        for (top, ghost, first, vrow, sign) in [(false, 0, 1, 0, -1.0), (true, ny + 1, ny, ny, 1.0)] {
            let r = row_t(top, i);
            // wall value (ghost + first)/2
            a[(r, l.u(ghost, i))] += 0.5;
            a[(r, l.u(first, i))] += 0.5;
            if let WallClosure::Robin(delta) = params.closure {
                // + sign * delta * d12 with d12 = ((u_above - u_below)/hy + (v_i - v_{i-1})/hx)/2
                let (above, below) = if top { (ghost, first) } else { (first, ghost) };
                let c = sign * delta * 0.5;
                a[(r, l.u(above, i))] += c / g.hy;
                a[(r, l.u(below, i))] -= c / g.hy;
                a[(r, l.v(vrow, i))] += c / g.hx;
                a[(r, l.v(vrow, im))] -= c / g.hx;
            }
        }
    }

    let x = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Numerical("dense oracle system is singular".into()))?;
    let (u, mut p) = unpack(g, &l, x.as_slice());
    p.remove_mean();
    Ok((u, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::saddle::SaddleSolver;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rel_diff(a: &VelocityField, b: &VelocityField) -> f64 {
        let num = a.u.iter().zip(&b.u).chain(a.v.iter().zip(&b.v)).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        num / b.max_abs().max(1e-300)
    }

    #[test]
    fn banded_solver_matches_dense_lu() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (nx, ny) in [(8, 8), (12, 12), (8, 12)] {
            let g = ChannelGrid::new(nx, ny, 1.3).unwrap();
            for closure in [WallClosure::Robin(0.15), WallClosure::Robin(1.0), WallClosure::NoSlip] {
                for sigma in [0.0, 40.0] {
                    let params = OperatorParams { sigma, nu: 1.0, closure };
                    let mut rhs = VelocityField::zeros(&g);
                    rhs.u.mapv_inplace(|_| rng.random_range(-1.0..1.0));
                    rhs.v.mapv_inplace(|_| rng.random_range(-1.0..1.0));
                    let mut wb: Vec<f64> = (0..nx).map(|_| rng.random_range(-1.0..1.0)).collect();
                    let wt: Vec<f64> = (0..nx).map(|_| rng.random_range(-1.0..1.0)).collect();
                    // zero net flux through the walls
                    let net = (wt.iter().sum::<f64>() - wb.iter().sum::<f64>()) / nx as f64;
                    wb.iter_mut().for_each(|x| *x += net);
                    let div = Array2::zeros((ny, nx));
                    let solver = SaddleSolver::new(&g, params).unwrap();
                    let (u, p, _) = solver.solve(&rhs, &div, &wb, &wt, 1e-12).unwrap();
                    let (ud, pd) = dense_solve(&g, &params, &rhs, &div, &wb, &wt).unwrap();
                    assert!(rel_diff(&u, &ud) < 1e-8, "{nx}x{ny} {closure:?} sigma {sigma}: {}", rel_diff(&u, &ud));
                    let pmax = pd.p.iter().fold(0.0f64, |m, x| m.max(x.abs()));
                    let perr = p.p.iter().zip(&pd.p).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
                    assert!(perr < 1e-8 * pmax.max(1.0), "pressure {perr}");
                }
            }
        }
    }
}
