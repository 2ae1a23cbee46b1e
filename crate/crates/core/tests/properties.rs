mod common;

use ndarray::Array2;
use proptest::prelude::*;
use vseed_core::analysis::{fractional_seminorm, TimeSeries};
use vseed_core::boundary::{close_ghosts, make_test_flux, FluxKind, WallClosure, WallData};
use vseed_core::grid::{divergence, inner};
use vseed_core::nse::advection;
use vseed_core::stokes::solve_stationary;
use vseed_core::ChannelGrid;

fn wall_strategy() -> impl Strategy<Value = (usize, usize, Vec<f64>)> {
    (4usize..12, 1usize..6).prop_flat_map(|(nx, nt)| {
        (Just(nx), Just(nt), prop::collection::vec(-10.0f64..10.0, 2 * nx * (nt + 1)))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn compatibility_projection_is_idempotent((nx, nt, vals) in wall_strategy()) {
        let half = nx * (nt + 1);
        let gb = Array2::from_shape_vec((nt + 1, nx), vals[..half].to_vec()).unwrap();
        let gt = Array2::from_shape_vec((nt + 1, nx), vals[half..].to_vec()).unwrap();
        let w = WallData::new(gb, gt, 0.1, 1.0).unwrap();
        let once = w.project_compatible();
        prop_assert!(once.check_compatible().is_ok());
        let twice = once.project_compatible();
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn advection_cancels_in_energy(seed_a in 0u64..1000, seed_b in 0u64..1000, n in 6usize..20) {
        let g = ChannelGrid::new(n, n + 2, 1.0).unwrap();
        let a = common::random_solenoidal(&g, seed_a, 1.0, WallClosure::Robin(0.3));
        let b = common::random_solenoidal(&g, seed_b, 1.0, WallClosure::NoSlip);
        let aa = inner(&a, &advection(&a, &a));
        prop_assert!(aa.abs() <= 1e-12 * inner(&a, &a).max(1.0) * a.max_abs().max(1.0));
        let ab = inner(&b, &advection(&a, &a)) + inner(&a, &advection(&a, &b));
        let scale = inner(&b, &b).sqrt() * inner(&a, &a).sqrt() * a.max_abs().max(1.0) / g.hx;
        prop_assert!(ab.abs() <= 1e-12 * scale.max(1.0));
    }

    #[test]
    fn parseval_holds_for_random_series(vals in prop::collection::vec(-5.0f64..5.0, 8..200), dt in 0.001f64..1.0) {
        let s = TimeSeries::new(vals.clone(), dt).unwrap();
        let l2 = (vals.iter().map(|x| x * x).sum::<f64>() * dt).sqrt();
        let semi = fractional_seminorm(&s, 0.0).unwrap();
        prop_assert!((semi - l2).abs() <= 1e-10 * l2.max(1e-300));
    }

    #[test]
    fn stationary_lifting_is_divergence_free(kappa in 1u32..4, amp in 0.1f64..3.0, delta in 0.01f64..1.0, n in 8usize..24) {
        let g = ChannelGrid::new(n, n, 1.0).unwrap();
        let w = make_test_flux(&FluxKind::Tone { kappa, omega: 1.0, amplitude: amp }, n, 1.0, 4, 0.5, false).unwrap();
        let s = solve_stationary(&w, &g, 3, delta, 1.0, 1e-11).unwrap();
        let d = divergence(&s.velocity).iter().fold(0.0f64, |m, x| m.max(x.abs()));
        prop_assert!(d <= 1e-10, "{}", d);
    }

    #[test]
    fn ghost_closure_is_idempotent(seed in 0u64..1000, delta in 0.001f64..1.0) {
        let g = ChannelGrid::new(8, 8, 1.0).unwrap();
        let mut f = common::random_solenoidal(&g, seed, 1.0, WallClosure::Robin(delta));
        let before = f.clone();
        close_ghosts(&mut f, WallClosure::Robin(delta));
        prop_assert_eq!(before, f);
    }
}
