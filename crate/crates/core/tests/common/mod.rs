//! Brute-force oracles shared by the integration tests.
//!
//! Everything here works on dense stacked vectors and avoids the library's
//! recursions, so agreement is a genuine cross-check.

#![allow(dead_code)]

use mssm_core::StateSpaceModel;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

fn gauss<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| scale * gauss(rng))
}

fn random_spd<R: Rng>(rng: &mut R, n: usize, floor: f64) -> DMatrix<f64> {
    let a = random_matrix(rng, n, n, 0.7);
    &a * a.transpose() + DMatrix::identity(n, n) * floor
}

/// Random model with `n` states and `m` outputs; `F` has row sums of
/// absolute values at most `radius`.
pub fn random_model<R: Rng>(rng: &mut R, n: usize, m: usize, radius: f64) -> StateSpaceModel {
    let mut f = random_matrix(rng, n, n, 0.6);
    let norm = f.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    if norm > radius {
        f *= radius / norm;
    }
    StateSpaceModel::new(
        f,
        random_matrix(rng, n, 1, 0.3).column(0).into_owned(),
        random_spd(rng, n, 0.05),
        random_matrix(rng, m, n, 1.0),
        random_matrix(rng, m, 1, 0.3).column(0).into_owned(),
        random_spd(rng, m, 0.1),
        random_matrix(rng, n, 1, 1.0).column(0).into_owned(),
        random_spd(rng, n, 0.2),
    )
    .expect("random model is valid")
}

/// Mean and covariance of `(x_0, ..., x_{T-1})` from the explicit map
/// `X = L w`, `w = (z_0, eps_1, ..., eps_{T-1}, delta_0, ..., delta_{T-1})`.
pub fn observation_moments(model: &StateSpaceModel, steps: usize) -> (DVector<f64>, DMatrix<f64>) {
    let (n, m) = (model.f.nrows(), model.h.nrows());
    let wdim = steps * n + steps * m;
    let mut l = DMatrix::zeros(steps * m, wdim);
    // F^k
    let mut powers = vec![DMatrix::identity(n, n)];
    for k in 1..steps {
        powers.push(&powers[k - 1] * &model.f);
    }
    for t in 0..steps {
        // z_t = F^t z_0 + sum_{s=1}^{t} F^{t-s} eps_s
        for s in 0..=t {
            let block = &model.h * &powers[t - s];
            l.view_mut((t * m, s * n), (m, n)).copy_from(&block);
        }
        l.view_mut((t * m, steps * n + t * m), (m, m)).fill_with_identity();
    }
    let mut w_mean = DVector::zeros(wdim);
    let mut w_cov = DMatrix::zeros(wdim, wdim);
    w_mean.rows_mut(0, n).copy_from(&model.b0);
    w_cov.view_mut((0, 0), (n, n)).copy_from(&model.q0);
    for s in 1..steps {
        w_mean.rows_mut(s * n, n).copy_from(&model.b);
        w_cov.view_mut((s * n, s * n), (n, n)).copy_from(&model.q);
    }
    for t in 0..steps {
        let o = steps * n + t * m;
        w_mean.rows_mut(o, m).copy_from(&model.c);
        w_cov.view_mut((o, o), (m, m)).copy_from(&model.r);
    }
    (&l * w_mean, &l * w_cov * l.transpose())
}

/// Log density of `x` under `N(mean, cov)`.
pub fn gaussian_log_density(x: &DVector<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> f64 {
    let chol = cov.clone().cholesky().expect("covariance is positive definite");
    let d = x - mean;
    let quad = d.dot(&chol.solve(&d));
    let log_det = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    -0.5 * (x.len() as f64 * LN_2PI + log_det + quad)
}

/// Keeps the rows and columns listed in `keep`.
pub fn select(mean: &DVector<f64>, cov: &DMatrix<f64>, keep: &[usize]) -> (DVector<f64>, DMatrix<f64>) {
    (
        DVector::from_iterator(keep.len(), keep.iter().map(|&i| mean[i])),
        DMatrix::from_fn(keep.len(), keep.len(), |i, j| cov[(keep[i], keep[j])]),
    )
}

/// `(steps / r) x steps` matrix averaging consecutive blocks of `r` scalars.
pub fn block_average(steps: usize, r: usize) -> DMatrix<f64> {
    DMatrix::from_fn(steps / r, steps, |i, j| if j / r == i { 1.0 / r as f64 } else { 0.0 })
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}
