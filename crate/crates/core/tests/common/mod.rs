#![allow(dead_code)]

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vseed_core::boundary::{close_ghosts, WallClosure};
use vseed_core::{ChannelGrid, VelocityField};

/// Smooth random solenoidal field with zero wall-normal velocity, ghosts closed.
pub fn random_solenoidal(g: &ChannelGrid, seed: u64, amplitude: f64, closure: WallClosure) -> VelocityField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let modes: Vec<(f64, f64, f64, f64)> = (0..6)
        .map(|_| {
            (
                rng.random_range(1..4) as f64,
                rng.random_range(1..4) as f64,
                rng.random_range(-1.0..1.0),
                rng.random_range(0.0..6.3),
            )
        })
        .collect();
    let tau = std::f64::consts::TAU;
    let mut psi = Array2::<f64>::zeros((g.ny + 1, g.nx));
    for j in 1..g.ny {
        let y = g.y_node(j);
        for i in 0..g.nx {
            let x = g.x_face(i) / g.lx;
            psi[[j, i]] = modes
                .iter()
                .map(|(kx, ky, a, ph)| a * (tau * kx * x + ph).sin() * (0.5 * tau * ky * y).sin().powi(2))
                .sum::<f64>()
                * amplitude
                / tau;
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

pub fn tone(nx: usize, nt: usize, dt: f64) -> vseed_core::boundary::WallData {
    use vseed_core::boundary::{make_test_flux, FluxKind};
    make_test_flux(
        &FluxKind::Tone {
            kappa: 1,
            omega: std::f64::consts::TAU,
            amplitude: 1.0,
        },
        nx,
        1.0,
        nt,
        dt,
        false,
    )
    .unwrap()
}
