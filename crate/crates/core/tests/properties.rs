use proptest::prelude::*;

use hklab::bounds::{gaussian_upper_bound, CertifiedEnvelope, ConstantsLedger};
use hklab::graph::{build_lattice_box, EdgeWeights, SpeedPreset, WeightedGraph};
use hklab::heat::{exhaustion_kernel, full_kernel, killed_kernel, BallMetric};
use hklab::metric::AdaptedMetric;
use hklab::regularity::{fit_on_diagonal_envelope, log_grid, EnvelopeFunction};
use hklab::verify::{davies_test_quantities, functional_i, functional_j, FunctionalFrame};

const TOL: f64 = 1e-11;

/// Weighted boxes of side 3 to 5 under one of three speed measures.
fn weighted_box() -> impl Strategy<Value = WeightedGraph> {
    (
        3usize..=5,
        prop::collection::vec(0.2f64..5.0, 40),
        0u8..3,
        prop::collection::vec(0.3f64..3.0, 25),
    )
        .prop_map(|(side, w, speed, custom)| {
            let m = 2 * side * (side - 1);
            let g = build_lattice_box(2, side, false, EdgeWeights::PerEdge(w[..m].to_vec())).unwrap();
            let preset = match speed {
                0 => SpeedPreset::Csrw,
                1 => SpeedPreset::Vsrw,
                _ => SpeedPreset::Custom(custom[..side * side].to_vec()),
            };
            g.with_speed(preset).unwrap()
        })
}

fn ledger() -> ConstantsLedger {
    ConstantsLedger::with_defaults(2.0, 1.0, 1.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn killed_kernel_is_below_full(g in weighted_box(), mask in prop::collection::vec(any::<bool>(), 25), t in 0.05f64..4.0) {
        let n = g.len();
        let mut subset: Vec<usize> = (0..n).filter(|&y| mask[y]).collect();
        if !subset.contains(&0) {
            subset.insert(0, 0);
        }
        let killed = killed_kernel(&g, &subset, 0, &[t], TOL).unwrap();
        let full = full_kernel(&g, 0, &[t], TOL).unwrap();
        for y in 0..n {
            prop_assert!(killed.value(0, y) <= full.value(0, y) + 10.0 * TOL);
        }
    }

    #[test]
    fn squared_kernel_sums_to_the_diagonal(g in weighted_box(), x0 in 0usize..9, t in 0.05f64..3.0) {
        let k = full_kernel(&g, x0, &[t, 2.0 * t], TOL).unwrap();
        let theta = g.theta();
        let sum: f64 = (0..g.len()).map(|x| k.value(0, x).powi(2) * theta[x]).sum();
        prop_assert!((sum - k.value(1, x0)).abs() <= 100.0 * TOL, "{} vs {}", sum, k.value(1, x0));
    }

    #[test]
    fn mass_is_conserved_or_decays(g in weighted_box(), mask in prop::collection::vec(any::<bool>(), 25)) {
        let times = [0.1, 0.5, 1.0, 2.0, 4.0];
        let full = full_kernel(&g, 0, &times, TOL).unwrap();
        prop_assert!(full.mass.iter().all(|m| (m - 1.0).abs() <= 10.0 * TOL));
        let mut subset: Vec<usize> = (1..g.len()).filter(|&y| mask[y]).collect();
        subset.insert(0, 0);
        let killed = killed_kernel(&g, &subset, 0, &times, TOL).unwrap();
        prop_assert!(killed.mass.windows(2).all(|w| w[1] <= w[0] + 10.0 * TOL));
    }

    #[test]
    fn fitted_envelope_lies_under_the_diagonal(g in weighted_box(), x in 0usize..9, d in 0.0f64..4.0) {
        let grid = log_grid(0.01, 20.0, 40);
        let k = full_kernel(&g, x, &grid, TOL).unwrap();
        let fit = fit_on_diagonal_envelope(&k, x, d, (0.01, 20.0)).unwrap();
        for (i, &t) in grid.iter().enumerate() {
            prop_assert!(k.value(i, x) * fit.envelope.value(t) <= 1.0);
        }
        prop_assert!(fit.binding_time > 0.0 && fit.binding_time.is_finite());
    }

    #[test]
    fn gaussian_bound_decreases_in_distance(d1 in 0.0f64..30.0, d2 in 0.0f64..30.0, t in 1.0f64..100.0, c in 0.1f64..1.0) {
        let l = ledger();
        let f = CertifiedEnvelope::certify(EnvelopeFunction::power(c, 1.0), 1.0, 2.0, (1e-4, 1e3), 64).unwrap();
        let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        let a = gaussian_upper_bound(&l, &f, &f, lo, t).unwrap().value;
        let b = gaussian_upper_bound(&l, &f, &f, hi, t).unwrap().value;
        prop_assert!(b <= a);
    }

    #[test]
    fn weighted_functional_is_bounded_by_the_diagonal(
        g in weighted_box(), x0 in 0usize..9, r in 0.0f64..4.0, t in 0.05f64..3.0, gap in 0.01f64..5.0,
    ) {
        let m = AdaptedMetric::canonical(&g);
        let k = full_kernel(&g, x0, &[t, 2.0 * t], TOL).unwrap();
        let frame = FunctionalFrame::new(&ledger(), x0, r, t, t + gap).unwrap();
        let j = functional_j(&m, &k, &frame).unwrap();
        let bound = (-frame.epsilon / gap).exp() * k.value(1, x0);
        prop_assert!(j <= bound * (1.0 + 1e-12) + 100.0 * TOL);
    }

    #[test]
    fn tail_functional_grows_with_the_exhaustion(g in weighted_box(), r in 0.0f64..3.0, t in 0.1f64..3.0) {
        let m = AdaptedMetric::canonical(&g);
        let (top, diag) = exhaustion_kernel(&m, 0, &[t], TOL, 4, BallMetric::Adapted).unwrap();
        let values: Vec<f64> = diag.levels.iter().map(|k| functional_i(&m, k, r, t).unwrap()).collect();
        prop_assert!(values.windows(2).all(|w| w[1] >= w[0] - 10.0 * TOL), "{:?}", values);
        let full = full_kernel(&g, 0, &[t], TOL).unwrap();
        let limit = functional_i(&m, &full, r, t).unwrap();
        prop_assert!((values.last().unwrap() - limit).abs() <= 10.0 * TOL);
        prop_assert!((functional_i(&m, &top, r, t).unwrap() - limit).abs() <= 10.0 * TOL);
    }

    #[test]
    fn exponential_energy_is_uniformly_bounded(g in weighted_box(), x1 in 0usize..9, x2 in 0usize..9, lambda in 0.0f64..6.0) {
        let m = AdaptedMetric::canonical(&g);
        let q = davies_test_quantities(&m, x1, x2, lambda, 0.0).unwrap();
        prop_assert!(q.holds, "sup b = {} > {}", q.sup_b, q.estimate);
    }
}
