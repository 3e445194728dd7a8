mod common;

use common::*;
use mssm_core::lgssm::{joint_moments, kalman_filter, kalman_filter_from, kalman_forecast, simulate, GaussianBelief};
use mssm_core::StateSpaceModel;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn stack(xs: &[DVector<f64>]) -> DVector<f64> {
    DVector::from_iterator(xs.iter().map(|x| x.len()).sum(), xs.iter().flat_map(|x| x.iter().copied()))
}

#[test]
fn filter_matches_joint_gaussian_density() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for trial in 0..50 {
        let n = rng.random_range(1..=4);
        let m = rng.random_range(1..=2);
        let steps = rng.random_range(1..=8);
        let model = random_model(&mut rng, n, m, 1.0);
        let sim = simulate(&model, steps, &mut rng).unwrap();
        let xs: Vec<DVector<f64>> = (0..steps).map(|t| sim.observations.row(t).transpose()).collect();
        let (mean, cov) = observation_moments(&model, steps);
        let oracle = gaussian_log_density(&stack(&xs), &mean, &cov);
        let obs: Vec<Option<DVector<f64>>> = xs.into_iter().map(Some).collect();
        let ll = kalman_filter(&model, &obs).unwrap().log_likelihood;
        assert!((ll - oracle).abs() <= 1e-10 * oracle.abs().max(1.0), "trial {trial}: {ll} vs {oracle}");
    }
}

#[test]
fn missing_observations_marginalize() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let model = random_model(&mut rng, 3, 1, 0.95);
        let steps = 8;
        let sim = simulate(&model, steps, &mut rng).unwrap();
        let keep: Vec<usize> = (0..steps).filter(|_| rng.random_bool(0.6)).collect();
        let obs: Vec<Option<DVector<f64>>> = (0..steps)
            .map(|t| keep.contains(&t).then(|| sim.observations.row(t).transpose()))
            .collect();
        let (mean, cov) = observation_moments(&model, steps);
        let ll = kalman_filter(&model, &obs).unwrap().log_likelihood;
        if keep.is_empty() {
            assert_eq!(ll, 0.0);
            continue;
        }
        let (mk, ck) = select(&mean, &cov, &keep);
        let x = DVector::from_iterator(keep.len(), keep.iter().map(|&t| sim.observations[(t, 0)]));
        let oracle = gaussian_log_density(&x, &mk, &ck);
        assert!((ll - oracle).abs() <= 1e-10 * oracle.abs().max(1.0));
    }
}

#[test]
fn likelihood_invariant_to_state_basis() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let model = random_model(&mut rng, 3, 1, 0.9);
    let t = DMatrix::from_fn(3, 3, |i, j| if i == j { 2.0 } else { 0.3 * (i as f64 - j as f64) });
    let ti = t.clone().try_inverse().unwrap();
    let moved = StateSpaceModel::new(
        &t * &model.f * &ti,
        &t * &model.b,
        &t * &model.q * t.transpose(),
        &model.h * &ti,
        model.c.clone(),
        model.r.clone(),
        &t * &model.b0,
        &t * &model.q0 * t.transpose(),
    )
    .unwrap();
    let sim = simulate(&model, 30, &mut rng).unwrap();
    let obs: Vec<Option<DVector<f64>>> = (0..30).map(|i| Some(sim.observations.row(i).transpose())).collect();
    let a = kalman_filter(&model, &obs).unwrap().log_likelihood;
    let b = kalman_filter(&moved, &obs).unwrap().log_likelihood;
    assert!((a - b).abs() < 1e-9 * a.abs());
}

#[test]
fn library_moments_match_explicit_map() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let model = random_model(&mut rng, 3, 2, 1.0);
        let (m1, c1) = joint_moments(&model, 6).unwrap();
        let (m2, c2) = observation_moments(&model, 6);
        assert!((m1 - m2).amax() < 1e-10);
        assert!(max_abs_diff(&c1, &c2) < 1e-10);
    }
}

#[test]
fn forecast_equals_conditional_moments() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let model = random_model(&mut rng, 2, 1, 0.9);
    let (past, horizon) = (5, 3);
    let sim = simulate(&model, past, &mut rng).unwrap();
    let obs: Vec<Option<DVector<f64>>> = (0..past).map(|t| Some(sim.observations.row(t).transpose())).collect();
    let run = kalman_filter(&model, &obs).unwrap();
    let fc = kalman_forecast(&model, run.filtered.last().unwrap(), horizon).unwrap();
    // condition the joint Gaussian of past and future observations
    let (mean, cov) = observation_moments(&model, past + horizon);
    let (p, f) = (past, horizon);
    let spp = cov.view((0, 0), (p, p)).into_owned();
    let sfp = cov.view((p, 0), (f, p)).into_owned();
    let sff = cov.view((p, p), (f, f)).into_owned();
    let x = DVector::from_iterator(p, (0..p).map(|t| sim.observations[(t, 0)]));
    let chol = spp.cholesky().unwrap();
    let cond_mean = mean.rows(p, f) + &sfp * chol.solve(&(x - mean.rows(0, p)));
    let cond_cov = &sff - &sfp * chol.solve(&sfp.transpose());
    for h in 0..f {
        assert!((fc[h].mean[0] - cond_mean[h]).abs() < 1e-9);
        assert!((fc[h].cov[(0, 0)] - cond_cov[(h, h)]).abs() < 1e-9);
    }
}

#[test]
fn simulation_matches_moments_by_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let model = random_model(&mut rng, 2, 1, 0.8);
    let (mean, cov) = observation_moments(&model, 4);
    let draws = 20_000;
    let mut sums = [0.0f64; 4];
    let mut sq = [0.0f64; 4];
    for _ in 0..draws {
        let sim = simulate(&model, 4, &mut rng).unwrap();
        for t in 0..4 {
            let x = sim.observations[(t, 0)];
            sums[t] += x;
            sq[t] += x * x;
        }
    }
    for t in 0..4 {
        let mc_mean = sums[t] / draws as f64;
        let mc_var = sq[t] / draws as f64 - mc_mean * mc_mean;
        let se = (cov[(t, t)] / draws as f64).sqrt();
        assert!((mc_mean - mean[t]).abs() < 4.0 * se, "t={t}");
        // variance of the sample variance of a Gaussian is 2 s^4 / N
        let se_var = cov[(t, t)] * (2.0 / draws as f64).sqrt();
        assert!((mc_var - cov[(t, t)]).abs() < 4.0 * se_var, "t={t}");
    }
}

#[test]
fn filter_from_prior_chains_segments() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let model = random_model(&mut rng, 3, 1, 0.9);
    let sim = simulate(&model, 10, &mut rng).unwrap();
    let obs: Vec<Option<DVector<f64>>> = (0..10).map(|t| Some(sim.observations.row(t).transpose())).collect();
    let whole = kalman_filter(&model, &obs).unwrap();
    let head = kalman_filter(&model, &obs[..4]).unwrap();
    let prior: GaussianBelief = mssm_core::lgssm::predict(&model, head.filtered.last().unwrap());
    let tail = kalman_filter_from(&model, &prior, &obs[4..]).unwrap();
    assert!((head.log_likelihood + tail.log_likelihood - whole.log_likelihood).abs() < 1e-10);
}
