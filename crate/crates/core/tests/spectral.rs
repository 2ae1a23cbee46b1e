mod common;

use common::tone;
use vseed_core::analysis::{
    estimate_audit_fractional, fit_loglog, fractional_norm, linear_series, rate_sweep, FieldSeries, Verdict,
};
use vseed_core::boundary::{make_test_flux, FluxKind, WallData};
use vseed_core::nse::{Mode, NseConfig};
use vseed_core::stokes::{energy_audit_linear, solve_linear_evolution, solve_stationary, LinearEvolution, LinearParams};
use vseed_core::{ChannelGrid, VelocityField};

fn noise(nt: usize) -> WallData {
    make_test_flux(
        &FluxKind::BandLimitedNoise {
            seed: 7,
            s: 0.6,
            eta: 0.1,
            kappa: 1,
            amplitude: 1.0,
        },
        8,
        1.0,
        nt,
        1.0 / nt as f64,
        false,
    )
    .unwrap()
}

#[test]
fn noise_norm_converges_below_and_diverges_above_its_regularity() {
    let levels = [256, 512, 1024, 2048];
    let norms = |alpha: f64| -> Vec<f64> {
        levels
            .iter()
            .map(|&nt| fractional_norm(&FieldSeries::from_wall(&noise(nt)).unwrap(), alpha).unwrap())
            .collect()
    };
    let stable = norms(0.55);
    for p in stable.windows(2) {
        assert!((p[1] / p[0] - 1.0).abs() <= 0.05, "{stable:?}");
    }
    let rough = norms(0.75);
    for p in rough.windows(2) {
        assert!(p[1] > p[0] * 1.02, "{rough:?}");
    }
    // increments shrink for the convergent index and do not for the divergent one
    let inc = |v: &[f64]| v.windows(2).map(|p| p[1] - p[0]).collect::<Vec<_>>();
    let (a, b) = (inc(&stable), inc(&rough));
    assert!(a[2] < a[0], "{a:?}");
    assert!(b[2] > 0.5 * b[0], "{b:?}");
}

fn linear_run(n: usize, nt: usize, delta: f64, w: &WallData) -> LinearEvolution {
    let g = ChannelGrid::new(n, n, 1.0).unwrap();
    solve_linear_evolution(
        w,
        &g,
        LinearParams {
            delta,
            alpha: 1.0,
            nu: 1.0,
            dt: w.dt,
            nt,
            tol: 1e-10,
        },
    )
    .unwrap()
}

#[test]
fn linear_energy_audit_is_stable_under_step_halving() {
    let ratios: Vec<f64> = [50, 100, 200]
        .iter()
        .map(|&nt| {
            let w = tone(16, nt, 1.0 / nt as f64);
            energy_audit_linear(&linear_run(16, nt, 0.2, &w), 0.1).unwrap().ratio
        })
        .collect();
    for p in ratios.windows(2) {
        assert!((p[1] / p[0] - 1.0).abs() <= 0.2, "{ratios:?}");
    }
    assert!(ratios.iter().all(|r| r.is_finite() && *r > 0.0));
}

#[test]
fn linear_energy_audit_ratio_is_bounded_across_delta_for_noise() {
    let nt = 128;
    let w = noise(nt);
    let ratios: Vec<f64> = [0.4, 0.2, 0.1, 0.05]
        .iter()
        .map(|&d| {
            let g = ChannelGrid::new(8, 8, 1.0).unwrap();
            let lin = solve_linear_evolution(
                &w,
                &g,
                LinearParams { delta: d, alpha: 0.0, nu: 1.0, dt: w.dt, nt, tol: 1e-10 },
            )
            .unwrap();
            energy_audit_linear(&lin, 0.1).unwrap().ratio
        })
        .collect();
    let max = ratios.iter().cloned().fold(0.0, f64::max);
    let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    // recorded constant: the ratio does not blow up as delta shrinks
    assert!(max.is_finite() && max / min < 10.0, "{ratios:?}");
}

#[test]
fn fractional_estimate_ratio_is_resolution_and_delta_stable() {
    let at = |nt: usize, delta: f64| {
        let w = tone(16, nt, 1.0 / nt as f64);
        let (z, g) = linear_series(&linear_run(16, nt, delta, &w)).unwrap();
        estimate_audit_fractional(&z, &g, 0.1).unwrap().unwrap()
    };
    let (a, b) = (at(64, 0.2), at(128, 0.2));
    assert!((b / a - 1.0).abs() <= 0.2, "{a} {b}");

    let deltas = [0.4, 0.2, 0.1, 0.05];
    let ratios: Vec<f64> = deltas.iter().map(|&d| at(64, d)).collect();
    // slope of the ratio against log delta
    let logs: Vec<f64> = deltas.iter().map(|d: &f64| d.ln()).collect();
    let slope = vseed_core::analysis::fit_line(&logs, &ratios).unwrap().slope;
    assert!(slope.abs() <= 0.1, "{ratios:?} slope {slope}");
}

#[test]
fn zero_flux_estimate_is_undefined() {
    let w = WallData::zeros(16, 32, 1.0 / 32.0, 1.0);
    let (z, g) = linear_series(&linear_run(16, 32, 0.2, &w)).unwrap();
    assert_eq!(estimate_audit_fractional(&z, &g, 0.1).unwrap(), None);
}

#[test]
fn zero_flux_sweep_is_not_applicable() {
    let g = ChannelGrid::new(16, 16, 1.0).unwrap();
    let nt = 20;
    let cfg = NseConfig::new(g, 0.1, 1.0, 0.01, nt, Mode::Split);
    let w = WallData::zeros(g.nx, nt, 0.01, 1.0);
    let r = rate_sweep(&cfg, &VelocityField::zeros(&g), &w, &[0.4, 0.2, 0.1, 0.05], 1.0).unwrap();
    assert!(!r.partial());
    for p in r.points.iter().flatten() {
        assert!(p.uv.total <= 1e-20);
    }
    assert!(r.checks().iter().all(|c| c.verdict == Verdict::NotApplicable));
    assert!(rate_sweep(&cfg, &VelocityField::zeros(&g), &w, &[0.4, 0.2, 0.1], 1.0).is_err());
    assert!(rate_sweep(&cfg, &VelocityField::zeros(&g), &w, &[0.4, 0.1, 0.2, 0.05], 1.0).is_err());
}

#[test]
fn lifting_gradient_grows_no_faster_than_inverse_root_delta() {
    let g = ChannelGrid::new(64, 64, 1.0).unwrap();
    let w = tone(g.nx, 4, 0.125);
    let deltas = [0.4, 0.2, 0.1, 0.05, 0.025];
    let grads: Vec<f64> = deltas
        .iter()
        .map(|&d| {
            let s = solve_stationary(&w, &g, 2, d, 0.0, 1e-10).unwrap();
            vseed_core::grid::velocity_norms(&s.velocity).h1_semi
        })
        .collect();
    let inv: Vec<f64> = deltas.iter().map(|d| 1.0 / d).collect();
    let fit = fit_loglog(&inv, &grads).unwrap();
    assert!(fit.slope <= 0.55, "{grads:?}");
}
