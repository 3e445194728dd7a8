mod common;

use common::*;
use mssm_core::aggregation::{aggregate_model, aggregate_series, bridge_to_fine, FloorPolicy};
use mssm_core::lgssm::{kalman_filter, scalar_observations, simulate};
use mssm_core::{AggregationMode, TimeSeries};
use nalgebra::DVector;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn lifted_moments_equal_block_averaged_fine_moments() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for trial in 0..30 {
        let n = rng.random_range(1..=4);
        let model = random_model(&mut rng, n, 1, 1.0);
        for r in [2, 3, 4] {
            let k = rng.random_range(1..=6);
            let agg = aggregate_model(&model, r).unwrap();
            let (fm, fc) = observation_moments(&model, k * r);
            let a = block_average(k * r, r);
            let (am, ac) = (&a * fm, &a * fc * a.transpose());
            let (lm, lc) = observation_moments(&agg.lifted, k);
            let tol = |x: f64| 1e-8 * x.abs().max(1.0);
            for i in 0..k {
                assert!((lm[i] - am[i]).abs() <= tol(am[i]), "trial {trial} r {r}: mean {i}");
                for j in 0..k {
                    assert!((lc[(i, j)] - ac[(i, j)]).abs() <= tol(ac[(i, j)]), "trial {trial} r {r}: cov {i},{j}");
                }
            }
        }
    }
}

#[test]
fn bridge_matches_conditioning_on_coarse_data() {
    // belief on the first fine state after K coarse windows, against direct
    // Gaussian conditioning of the fine state on the window averages
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let model = random_model(&mut rng, 2, 1, 0.9);
    let (r, k) = (3, 4);
    let sim = simulate(&model, r * k + 1, &mut rng).unwrap();
    let fine: Vec<f64> = (0..r * k).map(|t| sim.observations[(t, 0)]).collect();
    let coarse: Vec<Option<f64>> = fine.chunks(r).map(|w| Some(w.iter().sum::<f64>() / r as f64)).collect();
    let agg = aggregate_model(&model, r).unwrap();
    let run = kalman_filter(&agg.lifted, &scalar_observations(&coarse)).unwrap();
    let bridged = bridge_to_fine(run.filtered.last().unwrap(), &model, r).unwrap();

    // oracle: augment the observation vector with H z_{rK} and the state itself
    // through an extra fine step where the observation is noiseless on each
    // coordinate.
    let n = model.n();
    let steps = r * k + 1;
    let mut probe = model.clone();
    probe.h = nalgebra::DMatrix::identity(n, n);
    probe.c = DVector::zeros(n);
    probe.r = nalgebra::DMatrix::zeros(n, n);
    let (zm, zc) = observation_moments(&probe, steps);
    let (xm, xc) = observation_moments(&model, steps);
    // cross covariance Cov(x_s, z_t) = H Cov(z_s, z_t)
    let last = (steps - 1) * n;
    let a = block_average(r * k, r);
    let mean_x = &a * xm.rows(0, r * k);
    let cov_x = &a * xc.view((0, 0), (r * k, r * k)) * a.transpose();
    let mut cross = nalgebra::DMatrix::zeros(k, n);
    for s in 0..r * k {
        let czz = zc.view((s * n, last), (n, n));
        let row = &model.h * czz;
        for i in 0..k {
            for j in 0..n {
                cross[(i, j)] += a[(i, s)] * row[(0, j)];
            }
        }
    }
    let obs = DVector::from_iterator(k, coarse.iter().map(|v| v.unwrap()));
    let chol = cov_x.cholesky().unwrap();
    let cond_mean = zm.rows(last, n) + cross.transpose() * chol.solve(&(obs - mean_x));
    let cond_cov = zc.view((last, last), (n, n)) - cross.transpose() * chol.solve(&cross);
    assert!((bridged.mean - cond_mean).amax() < 1e-9);
    assert!((bridged.cov - cond_cov).amax() < 1e-9);
}

#[test]
fn ratio_one_model_is_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let model = random_model(&mut rng, 3, 1, 1.0);
    let agg = aggregate_model(&model, 1).unwrap();
    assert_eq!(agg.lifted, model);
}

#[test]
fn lifting_composes() {
    // lifting by r1 then r2 describes the same observations as lifting by r1*r2
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..10 {
        let model = random_model(&mut rng, 2, 1, 0.95);
        for (r1, r2) in [(2, 2), (2, 3), (3, 2)] {
            let twice = aggregate_model(&aggregate_model(&model, r1).unwrap().lifted, r2).unwrap();
            let once = aggregate_model(&model, r1 * r2).unwrap();
            let (m1, c1) = observation_moments(&twice.lifted, 3);
            let (m2, c2) = observation_moments(&once.lifted, 3);
            assert!((&m1 - &m2).amax() <= 1e-12 * m2.amax().max(1.0));
            assert!(max_abs_diff(&c1, &c2) <= 1e-12 * c2.amax().max(1.0));
        }
    }
}

fn bits(s: &TimeSeries) -> Vec<Option<u64>> {
    s.values.iter().map(|v| v.map(f64::to_bits)).collect()
}

proptest! {
    #[test]
    fn ratio_one_series_is_bit_identical(values in proptest::collection::vec(proptest::option::weighted(0.9, 1e-3f64..1e6), 0..50)) {
        let s = TimeSeries::new(100, 60, values);
        for mode in [AggregationMode::Arithmetic, AggregationMode::Geometric] {
            let out = aggregate_series(&s, 1, mode, FloorPolicy::Reject).unwrap();
            prop_assert_eq!(bits(&out.series), bits(&s));
            prop_assert_eq!(out.series.start, s.start);
        }
    }

    #[test]
    fn arithmetic_aggregation_composes_exactly_on_dyadic_data(
        ints in proptest::collection::vec(-4096i32..4096, 1..12),
        r1 in 1usize..4,
        r2 in 1usize..4,
    ) {
        // multiples of 1/8: every partial sum and power-of-two division is exact
        let r1 = [1, 2, 4][r1 - 1];
        let r2 = [1, 2, 4][r2 - 1];
        let values: Vec<f64> = ints.iter().cycle().take(r1 * r2 * 3).map(|&i| i as f64 / 8.0).collect();
        let s = TimeSeries::from_values(0, 60, &values);
        let step = aggregate_series(&s, r1, AggregationMode::Arithmetic, FloorPolicy::Auto).unwrap().series;
        let nested = aggregate_series(&step, r2, AggregationMode::Arithmetic, FloorPolicy::Auto).unwrap().series;
        let direct = aggregate_series(&s, r1 * r2, AggregationMode::Arithmetic, FloorPolicy::Auto).unwrap().series;
        prop_assert_eq!(bits(&nested), bits(&direct));
        prop_assert_eq!(nested.step_seconds, direct.step_seconds);
    }

    #[test]
    fn aggregation_composes_to_rounding(
        values in proptest::collection::vec(1e-2f64..1e4, 24),
        geometric in any::<bool>(),
    ) {
        let mode = if geometric { AggregationMode::Geometric } else { AggregationMode::Arithmetic };
        let s = TimeSeries::from_values(0, 60, &values);
        let nested = aggregate_series(&aggregate_series(&s, 2, mode, FloorPolicy::Auto).unwrap().series, 3, mode, FloorPolicy::Auto).unwrap().series;
        let direct = aggregate_series(&s, 6, mode, FloorPolicy::Auto).unwrap().series;
        for (a, b) in nested.observed().zip(direct.observed()) {
            prop_assert!((a - b).abs() <= 1e-12 * b.abs());
        }
    }
}
