//! Staggered (MAC) geometry of the periodic channel `[0, lx) x [0, 1]`.
//!
//! Layout conventions used throughout the crate:
//!
//! * `u` lives on vertical faces `(x_i, y_{j+1/2})`. It is stored with one
//!   ghost row on each side, so `u` has `ny + 2` rows: row `0` is the ghost
//!   below the bottom wall, rows `1..=ny` are interior, row `ny + 1` is the
//!   ghost above the top wall.
//! * `v` lives on horizontal faces `(x_{i+1/2}, y_j)`, `ny + 1` rows; rows `0`
//!   and `ny` sit exactly on the walls.
//! * scalars (pressure, divergence, `d11`, `d22`) live at cell centres,
//!   `ny` rows.
//! * `d12` lives on nodes `(x_i, y_j)`, `ny + 1` rows.
//!
//! All arrays are indexed `[[row, column]]` with the column being the periodic
//! `x` index.

use std::ops::{Add, Sub};

use ndarray::Array2;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelGrid {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub hx: f64,
    pub hy: f64,
}

impl ChannelGrid {
    pub fn new(nx: usize, ny: usize, lx: f64) -> Result<Self> {
        if nx < 4 || ny < 4 {
            return Err(Error::InvalidInput(format!(
                "grid needs at least 4 cells per direction, got {nx} x {ny}"
            )));
        }
        if !(lx.is_finite() && lx > 0.0) {
            return Err(Error::InvalidInput(format!("channel length must be positive, got {lx}")));
        }
        Ok(Self {
            nx,
            ny,
            lx,
            hx: lx / nx as f64,
            hy: 1.0 / ny as f64,
        })
    }

    #[inline]
    pub fn east(&self, i: usize) -> usize {
        if i + 1 == self.nx {
            0
        } else {
            i + 1
        }
    }

    #[inline]
    pub fn west(&self, i: usize) -> usize {
        if i == 0 {
            self.nx - 1
        } else {
            i - 1
        }
    }

    pub fn cell_area(&self) -> f64 {
        self.hx * self.hy
    }

    /// Quadrature weight of the node / horizontal-face row `j` (half cells on the walls).
    #[inline]
    pub fn row_weight(&self, j: usize) -> f64 {
        if j == 0 || j == self.ny {
            0.5 * self.cell_area()
        } else {
            self.cell_area()
        }
    }

    pub fn x_face(&self, i: usize) -> f64 {
        i as f64 * self.hx
    }

    pub fn x_center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.hx
    }

    pub fn y_node(&self, j: usize) -> f64 {
        j as f64 * self.hy
    }

    /// `y` of stored `u` row `r` (ghost rows included).
    pub fn y_u_row(&self, r: usize) -> f64 {
        (r as f64 - 0.5) * self.hy
    }

    pub fn y_center(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.hy
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VelocityField {
    pub grid: ChannelGrid,
    pub u: Array2<f64>,
    pub v: Array2<f64>,
}

impl VelocityField {
    pub fn zeros(grid: &ChannelGrid) -> Self {
        Self {
            grid: *grid,
            u: Array2::zeros((grid.ny + 2, grid.nx)),
            v: Array2::zeros((grid.ny + 1, grid.nx)),
        }
    }

    /// Samples analytic components at the staggered positions, ghost rows included.
    pub fn from_fn(
        grid: &ChannelGrid,
        fu: impl Fn(f64, f64) -> f64,
        fv: impl Fn(f64, f64) -> f64,
    ) -> Self {
        let mut f = Self::zeros(grid);
        for r in 0..grid.ny + 2 {
            let y = grid.y_u_row(r);
            for i in 0..grid.nx {
                f.u[[r, i]] = fu(grid.x_face(i), y);
            }
        }
        for j in 0..=grid.ny {
            let y = grid.y_node(j);
            for i in 0..grid.nx {
                f.v[[j, i]] = fv(grid.x_center(i), y);
            }
        }
        f
    }

    pub fn scale(&mut self, a: f64) {
        self.u.mapv_inplace(|x| a * x);
        self.v.mapv_inplace(|x| a * x);
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.scale(a);
        out
    }

    /// `self += a * other`
    pub fn axpy(&mut self, a: f64, other: &VelocityField) {
        self.u.scaled_add(a, &other.u);
        self.v.scaled_add(a, &other.v);
    }

    /// Largest absolute interior velocity component (ghost rows excluded).
    pub fn max_abs(&self) -> f64 {
        let ny = self.grid.ny;
        let mu = self
            .u
            .rows()
            .into_iter()
            .skip(1)
            .take(ny)
            .flat_map(|r| r.into_iter().copied().collect::<Vec<_>>())
            .fold(0.0f64, |m, x| m.max(x.abs()));
        let mv = self.v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        mu.max(mv)
    }

    /// Tangential velocity interpolated onto the walls at `x_i`: `(bottom, top)`.
    pub fn wall_tangential(&self) -> (Vec<f64>, Vec<f64>) {
        let ny = self.grid.ny;
        let bottom = (0..self.grid.nx)
            .map(|i| 0.5 * (self.u[[0, i]] + self.u[[1, i]]))
            .collect();
        let top = (0..self.grid.nx)
            .map(|i| 0.5 * (self.u[[ny, i]] + self.u[[ny + 1, i]]))
            .collect();
        (bottom, top)
    }

    /// Degrees of freedom paired with their quadrature weights: interior `u`
    /// faces followed by every `v` row (walls with half weight).
    pub fn weighted_dofs(&self) -> Vec<(f64, f64)> {
        let g = &self.grid;
        let mut out = Vec::with_capacity(g.nx * (2 * g.ny + 1));
        for r in 1..=g.ny {
            for i in 0..g.nx {
                out.push((self.u[[r, i]], g.cell_area()));
            }
        }
        for j in 0..=g.ny {
            let w = g.row_weight(j);
            for i in 0..g.nx {
                out.push((self.v[[j, i]], w));
            }
        }
        out
    }
}

impl Add for &VelocityField {
    type Output = VelocityField;
    fn add(self, rhs: &VelocityField) -> VelocityField {
        VelocityField {
            grid: self.grid,
            u: &self.u + &rhs.u,
            v: &self.v + &rhs.v,
        }
    }
}

impl Sub for &VelocityField {
    type Output = VelocityField;
    fn sub(self, rhs: &VelocityField) -> VelocityField {
        VelocityField {
            grid: self.grid,
            u: &self.u - &rhs.u,
            v: &self.v - &rhs.v,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PressureField {
    pub grid: ChannelGrid,
    pub p: Array2<f64>,
}

impl PressureField {
    pub fn zeros(grid: &ChannelGrid) -> Self {
        Self {
            grid: *grid,
            p: Array2::zeros((grid.ny, grid.nx)),
        }
    }

    pub fn mean(&self) -> f64 {
        self.p.mean().unwrap_or(0.0)
    }

    /// Shifts to the canonical zero-mean representative.
    pub fn remove_mean(&mut self) {
        let m = self.mean();
        self.p.mapv_inplace(|x| x - m);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeformationField {
    pub grid: ChannelGrid,
    pub d11: Array2<f64>,
    pub d22: Array2<f64>,
    pub d12: Array2<f64>,
}

impl DeformationField {
    /// Discrete `||D||^2`: Frobenius norm, off-diagonal counted twice, wall nodes half-weighted.
    pub fn norm_sq(&self) -> f64 {
        let g = &self.grid;
        let diag: f64 = self.d11.iter().chain(self.d22.iter()).map(|x| x * x).sum();
        let mut off = 0.0;
        for j in 0..=g.ny {
            let w = g.row_weight(j);
            off += w * self.d12.row(j).iter().map(|x| x * x).sum::<f64>();
        }
        diag * g.cell_area() + 2.0 * off
    }
}

/// Cell-centred discrete divergence.
pub fn divergence(f: &VelocityField) -> Array2<f64> {
    let g = &f.grid;
    let mut out = Array2::zeros((g.ny, g.nx));
    for j in 0..g.ny {
        for i in 0..g.nx {
            out[[j, i]] = (f.u[[j + 1, g.east(i)]] - f.u[[j + 1, i]]) / g.hx
                + (f.v[[j + 1, i]] - f.v[[j, i]]) / g.hy;
        }
    }
    out
}

/// Staggered pressure gradient; negative transpose of [`divergence`] on
/// fields with zero wall-normal velocity. Wall and ghost rows stay zero.
pub fn gradient(p: &PressureField) -> VelocityField {
    let g = &p.grid;
    let mut out = VelocityField::zeros(g);
    for j in 0..g.ny {
        for i in 0..g.nx {
            out.u[[j + 1, i]] = (p.p[[j, i]] - p.p[[j, g.west(i)]]) / g.hx;
        }
    }
    for j in 1..g.ny {
        for i in 0..g.nx {
            out.v[[j, i]] = (p.p[[j, i]] - p.p[[j - 1, i]]) / g.hy;
        }
    }
    out
}

/// Centred-difference deformation tensor. `d12` on the wall nodes uses the ghost rows.
pub fn deformation(f: &VelocityField) -> DeformationField {
    let g = &f.grid;
    let mut d11 = Array2::zeros((g.ny, g.nx));
    let mut d22 = Array2::zeros((g.ny, g.nx));
    let mut d12 = Array2::zeros((g.ny + 1, g.nx));
    for j in 0..g.ny {
        for i in 0..g.nx {
            d11[[j, i]] = (f.u[[j + 1, g.east(i)]] - f.u[[j + 1, i]]) / g.hx;
            d22[[j, i]] = (f.v[[j + 1, i]] - f.v[[j, i]]) / g.hy;
        }
    }
    for j in 0..=g.ny {
        for i in 0..g.nx {
            d12[[j, i]] = 0.5
                * ((f.u[[j + 1, i]] - f.u[[j, i]]) / g.hy + (f.v[[j, i]] - f.v[[j, g.west(i)]]) / g.hx);
        }
    }
    DeformationField {
        grid: *g,
        d11,
        d22,
        d12,
    }
}

/// Discrete `div D(f)` on interior `u` rows and interior `v` rows.
pub fn viscous_term(f: &VelocityField) -> VelocityField {
    stress_divergence(&deformation(f))
}

pub fn stress_divergence(d: &DeformationField) -> VelocityField {
    let g = &d.grid;
    let mut out = VelocityField::zeros(g);
    for j in 0..g.ny {
        for i in 0..g.nx {
            out.u[[j + 1, i]] = (d.d11[[j, i]] - d.d11[[j, g.west(i)]]) / g.hx
                + (d.d12[[j + 1, i]] - d.d12[[j, i]]) / g.hy;
        }
    }
    for j in 1..g.ny {
        for i in 0..g.nx {
            out.v[[j, i]] = (d.d12[[j, g.east(i)]] - d.d12[[j, i]]) / g.hx
                + (d.d22[[j, i]] - d.d22[[j - 1, i]]) / g.hy;
        }
    }
    out
}

/// Weighted L2 inner product over the velocity control volumes.
pub fn inner(f: &VelocityField, h: &VelocityField) -> f64 {
    let g = &f.grid;
    let mut s = 0.0;
    for r in 1..=g.ny {
        s += f.u.row(r).dot(&h.u.row(r)) * g.cell_area();
    }
    for j in 0..=g.ny {
        s += f.v.row(j).dot(&h.v.row(j)) * g.row_weight(j);
    }
    s
}

pub fn cell_inner(grid: &ChannelGrid, a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    (a * b).sum() * grid.cell_area()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub l2: f64,
    pub h1_semi: f64,
    pub l4: f64,
    pub boundary_l2_tangential: f64,
}

/// Norms of a velocity field; ghost rows must be closed for the wall terms.
pub fn velocity_norms(f: &VelocityField) -> Norms {
    let g = &f.grid;
    let a = g.cell_area();
    let mut cells = 0.0;
    for j in 0..g.ny {
        for i in 0..g.nx {
            let ux = (f.u[[j + 1, g.east(i)]] - f.u[[j + 1, i]]) / g.hx;
            let vy = (f.v[[j + 1, i]] - f.v[[j, i]]) / g.hy;
            cells += ux * ux + vy * vy;
        }
    }
    let mut nodes = 0.0;
    for j in 0..=g.ny {
        let mut row = 0.0;
        for i in 0..g.nx {
            let uy = (f.u[[j + 1, i]] - f.u[[j, i]]) / g.hy;
            let vx = (f.v[[j, i]] - f.v[[j, g.west(i)]]) / g.hx;
            row += uy * uy + vx * vx;
        }
        nodes += row * g.row_weight(j);
    }
    let mut l4 = 0.0;
    for r in 1..=g.ny {
        l4 += f.u.row(r).iter().map(|x| x.powi(4)).sum::<f64>() * a;
    }
    for j in 0..=g.ny {
        l4 += f.v.row(j).iter().map(|x| x.powi(4)).sum::<f64>() * g.row_weight(j);
    }
    let (bot, top) = f.wall_tangential();
    let boundary: f64 = bot.iter().chain(top.iter()).map(|x| x * x).sum::<f64>() * g.hx;
    Norms {
        l2: inner(f, f).sqrt(),
        h1_semi: (cells * a + nodes).sqrt(),
        l4: l4.powf(0.25),
        boundary_l2_tangential: boundary.sqrt(),
    }
}

/// Norms of a cell-centred scalar. The gradient uses homogeneous Neumann
/// closure in `y`; the wall trace is the linear extrapolation of the first two rows.
pub fn scalar_norms(grid: &ChannelGrid, s: &Array2<f64>) -> Norms {
    let g = grid;
    let a = g.cell_area();
    let l2 = (s.iter().map(|x| x * x).sum::<f64>() * a).sqrt();
    let l4 = (s.iter().map(|x| x.powi(4)).sum::<f64>() * a).powf(0.25);
    let mut grad = 0.0;
    for j in 0..g.ny {
        for i in 0..g.nx {
            let dx = (s[[j, i]] - s[[j, g.west(i)]]) / g.hx;
            grad += dx * dx;
            if j > 0 {
                let dy = (s[[j, i]] - s[[j - 1, i]]) / g.hy;
                grad += dy * dy;
            }
        }
    }
    let mut boundary = 0.0;
    for i in 0..g.nx {
        let b = 1.5 * s[[0, i]] - 0.5 * s[[1, i]];
        let t = 1.5 * s[[g.ny - 1, i]] - 0.5 * s[[g.ny - 2, i]];
        boundary += (b * b + t * t) * g.hx;
    }
    Norms {
        l2,
        h1_semi: (grad * a).sqrt(),
        l4,
        boundary_l2_tangential: boundary.sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn grid(n: usize) -> ChannelGrid {
        ChannelGrid::new(n, n, 1.0).unwrap()
    }

    #[test]
    fn rejects_tiny_grids() {
        assert!(ChannelGrid::new(3, 8, 1.0).is_err());
        assert!(ChannelGrid::new(8, 8, 0.0).is_err());
        let g = ChannelGrid::new(8, 16, 2.0).unwrap();
        assert_eq!(g.hx, 0.25);
        assert_eq!(g.hy, 1.0 / 16.0);
    }

    #[test]
    fn divergence_of_uniform_flow_vanishes() {
        let g = grid(8);
        let f = VelocityField::from_fn(&g, |_, _| 1.0, |_, _| 0.0);
        assert!(divergence(&f).iter().all(|&d| d == 0.0));
    }

    #[test]
    fn divergence_matches_scalar_difference() {
        let g = ChannelGrid::new(16, 8, 2.0).unwrap();
        let f = VelocityField::from_fn(&g, |x, _| (2.0 * PI * x / g.lx).sin(), |_, _| 0.0);
        let d = divergence(&f);
        for j in 0..g.ny {
            for i in 0..g.nx {
                let x = g.x_face(i);
                let oracle = ((2.0 * PI * (x + g.hx) / g.lx).sin() - (2.0 * PI * x / g.lx).sin()) / g.hx;
                assert!((d[[j, i]] - oracle).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn deformation_of_translation_and_shear() {
        let g = grid(8);
        let t = VelocityField::from_fn(&g, |_, _| 0.3, |_, _| -1.2);
        let d = deformation(&t);
        assert!(d.d11.iter().chain(d.d22.iter()).chain(d.d12.iter()).all(|&x| x == 0.0));

        let s = VelocityField::from_fn(&g, |_, y| y, |_, _| 0.0);
        let d = deformation(&s);
        assert!(d.d12.iter().all(|&x| (x - 0.5).abs() < 1e-13));
        assert!(d.d11.iter().chain(d.d22.iter()).all(|&x| x.abs() < 1e-13));
    }

    #[test]
    fn shear_stress_is_second_order() {
        let errs: Vec<f64> = [16, 32, 64, 128]
            .iter()
            .map(|&n| {
                let g = grid(n);
                let f = VelocityField::from_fn(&g, |_, y| (2.0 * PI * y).sin(), |_, _| 0.0);
                let d = deformation(&f);
                let mut e: f64 = 0.0;
                for j in 0..=g.ny {
                    let exact = PI * (2.0 * PI * g.y_node(j)).cos();
                    e = e.max((d.d12[[j, 0]] - exact).abs());
                }
                e
            })
            .collect();
        for w in errs.windows(2) {
            let slope = (w[0] / w[1]).log2();
            assert!((slope - 2.0).abs() < 0.2, "slope {slope}");
        }
    }

    #[test]
    fn norms_of_simple_fields() {
        let g = grid(16);
        let c = Array2::from_elem((g.ny, g.nx), -3.0);
        let n = scalar_norms(&g, &c);
        assert!((n.l2 - 3.0).abs() < 1e-12);
        assert!(n.h1_semi.abs() < 1e-12);

        let z = VelocityField::zeros(&g);
        let n = velocity_norms(&z);
        assert_eq!((n.l2, n.h1_semi, n.l4, n.boundary_l2_tangential), (0.0, 0.0, 0.0, 0.0));

        let mut prev = f64::INFINITY;
        for m in [8, 16, 32, 64] {
            let g = grid(m);
            let s = Array2::from_shape_fn((g.ny, g.nx), |(_, i)| (2.0 * PI * g.x_center(i)).sin());
            let err = (scalar_norms(&g, &s).l2 - 0.5f64.sqrt()).abs();
            assert!(err <= prev + 1e-15);
            prev = err;
        }
        assert!(prev < 1e-12);
    }

    fn random_wall_free(g: &ChannelGrid, rng: &mut ChaCha8Rng) -> VelocityField {
        let mut f = VelocityField::zeros(g);
        for x in f.u.iter_mut() {
            *x = rng.random_range(-1.0..1.0);
        }
        for j in 1..g.ny {
            for i in 0..g.nx {
                f.v[[j, i]] = rng.random_range(-1.0..1.0);
            }
        }
        f
    }

    #[test]
    fn divergence_gradient_duality() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &(nx, ny) in &[(8, 8), (12, 7), (32, 16)] {
            let g = ChannelGrid::new(nx, ny, 1.7).unwrap();
            for _ in 0..5 {
                let f = random_wall_free(&g, &mut rng);
                let p = PressureField {
                    grid: g,
                    p: Array2::from_shape_fn((ny, nx), |_| rng.random_range(-1.0..1.0)),
                };
                let lhs = cell_inner(&g, &divergence(&f), &p.p);
                let rhs = -inner(&f, &gradient(&p));
                assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0), "{lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn operators_are_linear() {
        let g = ChannelGrid::new(10, 9, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut a = random_wall_free(&g, &mut rng);
        let mut b = random_wall_free(&g, &mut rng);
        for x in a.v.iter_mut().chain(b.v.iter_mut()) {
            *x += 0.1;
        }
        let mut comb = a.scaled(2.5);
        comb.axpy(-0.7, &b);
        let lin = &divergence(&a) * 2.5 - &divergence(&b) * 0.7;
        assert!((divergence(&comb) - lin).iter().all(|x| x.abs() < 1e-12));
        let (da, db, dc) = (deformation(&a), deformation(&b), deformation(&comb));
        for (x, (y, z)) in dc.d12.iter().zip(da.d12.iter().zip(db.d12.iter())) {
            assert!((x - (2.5 * y - 0.7 * z)).abs() < 1e-11);
        }
    }

    fn random_smooth(g: &ChannelGrid, rng: &mut ChaCha8Rng) -> Array2<f64> {
        let modes: Vec<(f64, f64, f64, f64)> = (0..4)
            .map(|_| {
                (
                    rng.random_range(1..4) as f64,
                    rng.random_range(1..4) as f64,
                    rng.random_range(-1.0..1.0),
                    rng.random_range(0.0..2.0 * PI),
                )
            })
            .collect();
        Array2::from_shape_fn((g.ny, g.nx), |(j, i)| {
            let (x, y) = (g.x_center(i), g.y_center(j));
            modes
                .iter()
                .map(|(k, l, a, ph)| a * (2.0 * PI * k * x + ph).sin() * (PI * l * y + 0.3).cos())
                .sum::<f64>()
                + 0.2
        })
    }

    #[test]
    fn gagliardo_nirenberg_constant_is_grid_independent() {
        let mut worst = Vec::new();
        for n in [16, 32, 64] {
            let g = grid(n);
            let mut rng = ChaCha8Rng::seed_from_u64(2024);
            let mut c: f64 = 0.0;
            for _ in 0..100 {
                let s = random_smooth(&g, &mut rng);
                let nm = scalar_norms(&g, &s);
                let bound = nm.l2.sqrt() * (nm.l2 * nm.l2 + nm.h1_semi * nm.h1_semi).powf(0.25);
                c = c.max(nm.l4 / bound);
            }
            worst.push(c);
        }
        assert!(worst[2] <= 1.1 * worst[0], "{worst:?}");
    }
}
