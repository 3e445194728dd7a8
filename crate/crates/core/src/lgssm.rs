//! Linear-Gaussian state space models.
//!
//! A model is the pair
//!
//! ```text
//! z_t = F z_{t-1} + eps_t,   eps_t ~ N(b, Q)
//! x_t = H z_t + delta_t,     delta_t ~ N(c, R)
//! ```
//!
//! with `z_0 ~ N(b0, Q0)`. This module holds the representation, seeded
//! simulation, the Kalman filter (innovations form, Joseph covariance update),
//! forecasting, and exact joint moments of the stacked observations, which
//! the test suites use as a brute-force oracle.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Largest `T * m` that [`joint_moments`] will materialize.
pub const JOINT_MOMENTS_LIMIT: usize = 2000;

/// Time-invariant linear-Gaussian state space model with noise means.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceModel {
    /// Transition matrix (n x n).
    pub f: DMatrix<f64>,
    /// Transition noise mean (n).
    pub b: DVector<f64>,
    /// Transition noise covariance (n x n).
    pub q: DMatrix<f64>,
    /// Observation matrix (m x n).
    pub h: DMatrix<f64>,
    /// Observation noise mean (m).
    pub c: DVector<f64>,
    /// Observation noise covariance (m x m).
    pub r: DMatrix<f64>,
    /// Initial state mean (n).
    pub b0: DVector<f64>,
    /// Initial state covariance (n x n).
    pub q0: DMatrix<f64>,
}

impl StateSpaceModel {
    /// Builds a model and checks dimensions and covariance validity.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        f: DMatrix<f64>,
        b: DVector<f64>,
        q: DMatrix<f64>,
        h: DMatrix<f64>,
        c: DVector<f64>,
        r: DMatrix<f64>,
        b0: DVector<f64>,
        q0: DMatrix<f64>,
    ) -> Result<Self> {
        let model = Self { f, b, q, h, c, r, b0, q0 };
        model.validate()?;
        Ok(model)
    }

    /// State dimension.
    pub fn n(&self) -> usize {
        self.f.nrows()
    }

    /// Observation dimension.
    pub fn m(&self) -> usize {
        self.h.nrows()
    }

    /// The initial state distribution as a belief.
    pub fn initial_belief(&self) -> GaussianBelief {
        GaussianBelief { mean: self.b0.clone(), cov: self.q0.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.f.nrows();
        let m = self.h.nrows();
        if n == 0 || self.f.ncols() != n {
            return Err(Error::Validation("F must be square with n > 0".into()));
        }
        if m == 0 || self.h.ncols() != n {
            return Err(Error::Validation(format!(
                "H must be m x {n} with m > 0, got {}x{}",
                self.h.nrows(),
                self.h.ncols()
            )));
        }
        check_square("Q", &self.q, n)?;
        check_square("Q0", &self.q0, n)?;
        check_square("R", &self.r, m)?;
        if self.b.len() != n || self.b0.len() != n {
            return Err(Error::Validation(format!("b and b0 must have length {n}")));
        }
        if self.c.len() != m {
            return Err(Error::Validation(format!("c must have length {m}")));
        }
        let all_finite = [&self.f, &self.q, &self.h, &self.r, &self.q0]
            .iter()
            .all(|a| a.iter().all(|v| v.is_finite()))
            && [&self.b, &self.c, &self.b0].iter().all(|a| a.iter().all(|v| v.is_finite()));
        if !all_finite {
            return Err(Error::Validation("model entries must be finite".into()));
        }
        check_psd("Q", &self.q)?;
        check_psd("R", &self.r)?;
        check_psd("Q0", &self.q0)?;
        Ok(())
    }
}

fn check_square(name: &str, a: &DMatrix<f64>, n: usize) -> Result<()> {
    if a.nrows() != n || a.ncols() != n {
        return Err(Error::Validation(format!(
            "{name} must be {n}x{n}, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(())
}

/// Symmetric to 1e-12 (relative to the largest entry) with eigenvalues no
/// lower than -1e-10 * trace.
pub fn check_psd(name: &str, a: &DMatrix<f64>) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::Validation(format!("{name} is not square")));
    }
    let scale = a.amax().max(1.0);
    let n = a.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            if (a[(i, j)] - a[(j, i)]).abs() > 1e-12 * scale {
                return Err(Error::Validation(format!("{name} is not symmetric at ({i},{j})")));
            }
        }
    }
    if is_diagonal(a) {
        if let Some(i) = (0..n).find(|&i| a[(i, i)] < 0.0) {
            return Err(Error::Validation(format!(
                "{name} has negative variance {} at {i}",
                a[(i, i)]
            )));
        }
        return Ok(());
    }
    let min_eig = SymmetricEigen::new(a.clone()).eigenvalues.min();
    let floor = -1e-10 * a.trace().abs();
    if min_eig < floor {
        return Err(Error::Validation(format!(
            "{name} is not positive semidefinite (min eigenvalue {min_eig:e})"
        )));
    }
    Ok(())
}

fn is_diagonal(a: &DMatrix<f64>) -> bool {
    let n = a.nrows();
    (0..n).all(|j| (0..n).all(|i| i == j || a[(i, j)] == 0.0))
}

pub(crate) fn symmetrize(p: &mut DMatrix<f64>) {
    let n = p.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            let v = 0.5 * (p[(i, j)] + p[(j, i)]);
            p[(i, j)] = v;
            p[(j, i)] = v;
        }
    }
}

/// Gaussian distribution over the latent state.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBelief {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianBelief {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if cov.nrows() != mean.len() || cov.ncols() != mean.len() {
            return Err(Error::Dimension(format!(
                "belief mean has length {} but covariance is {}x{}",
                mean.len(),
                cov.nrows(),
                cov.ncols()
            )));
        }
        check_psd("belief covariance", &cov)?;
        Ok(Self { mean, cov })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Marginal over the leading `k` coordinates.
    pub fn leading_marginal(&self, k: usize) -> GaussianBelief {
        GaussianBelief {
            mean: self.mean.rows(0, k).into_owned(),
            cov: self.cov.view((0, 0), (k, k)).into_owned(),
        }
    }
}

/// Row-compressed copy of a transition matrix.
///
/// Structural and lifted transition matrices are mostly zeros, so the
/// covariance propagation `F P F^T` is done in `O(nnz * n)`.
#[derive(Debug, Clone)]
pub(crate) struct SparseRows {
    n_cols: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseRows {
    pub(crate) fn from_dense(a: &DMatrix<f64>) -> Self {
        let rows = (0..a.nrows())
            .map(|i| {
                (0..a.ncols())
                    .filter_map(|j| {
                        let v = a[(i, j)];
                        (v != 0.0).then_some((j, v))
                    })
                    .collect()
            })
            .collect();
        Self { n_cols: a.ncols(), rows }
    }

    pub(crate) fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.rows.len(),
            self.rows.iter().map(|row| row.iter().map(|&(j, v)| v * x[j]).sum()),
        )
    }

    /// `F P F^T` for a square `P` of matching size.
    pub(crate) fn sandwich(&self, p: &DMatrix<f64>) -> DMatrix<f64> {
        let n_out = self.rows.len();
        let n_in = self.n_cols;
        debug_assert_eq!(p.nrows(), n_in);
        let ps = p.as_slice();
        // G = F P, column-major n_out x n_in
        let mut g = vec![0.0; n_out * n_in];
        for k in 0..n_in {
            let pcol = &ps[k * n_in..(k + 1) * n_in];
            let gcol = &mut g[k * n_out..(k + 1) * n_out];
            for (i, row) in self.rows.iter().enumerate() {
                let mut acc = 0.0;
                for &(j, v) in row {
                    acc += v * pcol[j];
                }
                gcol[i] = acc;
            }
        }
        // (G F^T)[:, k] = sum_j F[k, j] G[:, j]
        let mut out = vec![0.0; n_out * n_out];
        for (k, row) in self.rows.iter().enumerate() {
            let ocol = &mut out[k * n_out..(k + 1) * n_out];
            for &(j, v) in row {
                let gcol = &g[j * n_out..(j + 1) * n_out];
                for (o, gv) in ocol.iter_mut().zip(gcol) {
                    *o += v * gv;
                }
            }
        }
        DMatrix::from_vec(n_out, n_out, out)
    }
}

/// Time update shared by the filter, the forecaster and the aggregation
/// bridge.
pub(crate) struct Propagator<'a> {
    f: SparseRows,
    b: &'a DVector<f64>,
    q: &'a DMatrix<f64>,
}

impl<'a> Propagator<'a> {
    pub(crate) fn new(model: &'a StateSpaceModel) -> Self {
        Self { f: SparseRows::from_dense(&model.f), b: &model.b, q: &model.q }
    }

    pub(crate) fn predict(&self, belief: &GaussianBelief) -> GaussianBelief {
        let mean = self.f.mul_vec(&belief.mean) + self.b;
        let mut cov = self.f.sandwich(&belief.cov);
        cov += self.q;
        symmetrize(&mut cov);
        GaussianBelief { mean, cov }
    }
}

/// One-step-ahead predictive distribution of an observation.
#[derive(Debug, Clone, PartialEq)]
pub struct ObsPredictive {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

/// Full per-step output of [`kalman_filter`].
#[derive(Debug, Clone)]
pub struct FilterResult {
    /// Belief on `z_t` given `x_0..x_{t-1}`.
    pub predicted: Vec<GaussianBelief>,
    /// Belief on `z_t` given `x_0..x_t` (equal to `predicted` at missing steps).
    pub filtered: Vec<GaussianBelief>,
    /// Predictive distribution of `x_t` given `x_0..x_{t-1}`.
    pub observation_predictive: Vec<ObsPredictive>,
    pub log_likelihood: f64,
}

/// Compact filter output for likelihood evaluation and chaining.
#[derive(Debug, Clone)]
pub struct FilterSummary {
    pub log_likelihood: f64,
    /// Filtered belief after the last step, `None` for an empty series.
    pub last_filtered: Option<GaussianBelief>,
}

struct Updated {
    filtered: GaussianBelief,
    obs: ObsPredictive,
    log_density: f64,
}

fn measurement_update(
    model: &StateSpaceModel,
    predicted: &GaussianBelief,
    x: Option<&DVector<f64>>,
    step: usize,
) -> Result<Updated> {
    let u = &predicted.cov * model.h.transpose();
    let obs_mean = &model.h * &predicted.mean + &model.c;
    let mut s = &model.h * &u + &model.r;
    symmetrize(&mut s);
    let obs = ObsPredictive { mean: obs_mean, cov: s };
    let Some(x) = x else {
        return Ok(Updated { filtered: predicted.clone(), obs, log_density: 0.0 });
    };
    if x.len() != model.m() {
        return Err(Error::Dimension(format!(
            "observation {step} has length {}, expected {}",
            x.len(),
            model.m()
        )));
    }
    let chol = obs.cov.clone().cholesky().ok_or_else(|| Error::Degenerate {
        step,
        detail: "predicted observation covariance is not positive definite".into(),
    })?;
    let innovation = x - &obs.mean;
    let solved = chol.solve(&innovation);
    let log_det: f64 = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let quad = innovation.dot(&solved);
    let log_density = -0.5 * (model.m() as f64 * LN_2PI + log_det + quad);
    if !log_density.is_finite() {
        return Err(Error::Degenerate { step, detail: "non-finite log density".into() });
    }
    // K = U S^{-1}
    let k = chol.solve(&u.transpose()).transpose();
    let mean = &predicted.mean + &k * &innovation;
    // Joseph form (I-KH) P (I-KH)^T + K R K^T, expanded with U = P H^T.
    let mut cov = predicted.cov.clone();
    cov.gemm(-1.0, &k, &u.transpose(), 1.0);
    cov.gemm(-1.0, &u, &k.transpose(), 1.0);
    let ks = &k * &obs.cov;
    cov.gemm(1.0, &ks, &k.transpose(), 1.0);
    symmetrize(&mut cov);
    Ok(Updated { filtered: GaussianBelief { mean, cov }, obs, log_density })
}

fn run_filter(
    model: &StateSpaceModel,
    prior: &GaussianBelief,
    observations: &[Option<DVector<f64>>],
    mut sink: impl FnMut(&GaussianBelief, &Updated),
) -> Result<FilterSummary> {
    if prior.dim() != model.n() {
        return Err(Error::Dimension(format!(
            "prior belief has dimension {}, model has {}",
            prior.dim(),
            model.n()
        )));
    }
    let prop = Propagator::new(model);
    let mut log_likelihood = 0.0;
    let mut last: Option<GaussianBelief> = None;
    for (t, x) in observations.iter().enumerate() {
        let predicted = match &last {
            None => prior.clone(),
            Some(f) => prop.predict(f),
        };
        let upd = measurement_update(model, &predicted, x.as_ref(), t)?;
        log_likelihood += upd.log_density;
        sink(&predicted, &upd);
        last = Some(upd.filtered);
    }
    Ok(FilterSummary { log_likelihood, last_filtered: last })
}

/// Kalman filter from the model's own initial distribution.
///
/// `None` entries are missing observations: the step performs the time
/// update only and contributes nothing to the log-likelihood.
pub fn kalman_filter(
    model: &StateSpaceModel,
    observations: &[Option<DVector<f64>>],
) -> Result<FilterResult> {
    kalman_filter_from(model, &model.initial_belief(), observations)
}

/// Kalman filter where `prior` is the predictive belief for the first step.
pub fn kalman_filter_from(
    model: &StateSpaceModel,
    prior: &GaussianBelief,
    observations: &[Option<DVector<f64>>],
) -> Result<FilterResult> {
    let t = observations.len();
    let mut predicted = Vec::with_capacity(t);
    let mut filtered = Vec::with_capacity(t);
    let mut observation_predictive = Vec::with_capacity(t);
    let summary = run_filter(model, prior, observations, |pred, upd| {
        predicted.push(pred.clone());
        filtered.push(upd.filtered.clone());
        observation_predictive.push(upd.obs.clone());
    })?;
    Ok(FilterResult {
        predicted,
        filtered,
        observation_predictive,
        log_likelihood: summary.log_likelihood,
    })
}

/// Like [`kalman_filter_from`] but keeps only the likelihood and final belief.
pub fn filter_summary(
    model: &StateSpaceModel,
    prior: &GaussianBelief,
    observations: &[Option<DVector<f64>>],
) -> Result<FilterSummary> {
    run_filter(model, prior, observations, |_, _| {})
}

/// Scalar-observation convenience wrapper.
pub fn scalar_observations(values: &[Option<f64>]) -> Vec<Option<DVector<f64>>> {
    values.iter().map(|v| v.map(|x| DVector::from_element(1, x))).collect()
}

/// One-step time update `N(F m + b, F P F^T + Q)`.
pub fn predict(model: &StateSpaceModel, belief: &GaussianBelief) -> GaussianBelief {
    Propagator::new(model).predict(belief)
}

/// Forecasts `horizon` observations ahead of a filtered belief.
pub fn kalman_forecast(
    model: &StateSpaceModel,
    belief: &GaussianBelief,
    horizon: usize,
) -> Result<Vec<ObsPredictive>> {
    if belief.dim() != model.n() {
        return Err(Error::Dimension(format!(
            "belief has dimension {}, model has {}",
            belief.dim(),
            model.n()
        )));
    }
    let prop = Propagator::new(model);
    forecast_from_predicted(model, &prop.predict(belief), horizon)
}

/// Forecast where `first` is already the predictive belief for horizon 1.
pub fn forecast_from_predicted(
    model: &StateSpaceModel,
    first: &GaussianBelief,
    horizon: usize,
) -> Result<Vec<ObsPredictive>> {
    if horizon == 0 {
        return Err(Error::Parameter("forecast horizon must be at least 1".into()));
    }
    let prop = Propagator::new(model);
    let ht = model.h.transpose();
    let mut out = Vec::with_capacity(horizon);
    let mut state = first.clone();
    for step in 0..horizon {
        if step > 0 {
            state = prop.predict(&state);
        }
        let mean = &model.h * &state.mean + &model.c;
        let mut cov = &model.h * &state.cov * &ht + &model.r;
        symmetrize(&mut cov);
        out.push(ObsPredictive { mean, cov });
    }
    Ok(out)
}

/// Symmetric square root factor `L` with `L L^T = A` for a PSD matrix.
///
/// Eigen-based so singular covariances (zero-noise components) are fine.
pub(crate) fn psd_factor(a: &DMatrix<f64>) -> DMatrix<f64> {
    if is_diagonal(a) {
        return DMatrix::from_diagonal(&a.diagonal().map(|v| v.max(0.0).sqrt()));
    }
    let eig = SymmetricEigen::new(a.clone());
    let scale = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    eig.eigenvectors * DMatrix::from_diagonal(&scale)
}

fn draw_gaussian<R: Rng + ?Sized>(
    rng: &mut R,
    mean: &DVector<f64>,
    factor: &DMatrix<f64>,
) -> DVector<f64> {
    let e = DVector::from_iterator(factor.ncols(), (0..factor.ncols()).map(|_| rng.sample::<f64, _>(StandardNormal)));
    mean + factor * e
}

/// Simulated latent states (T x n) and observations (T x m).
#[derive(Debug, Clone)]
pub struct Simulation {
    pub states: DMatrix<f64>,
    pub observations: DMatrix<f64>,
}

/// Draws one trajectory of length `steps`.
///
/// Noise draws per step happen in a fixed order (initial state, then for each
/// step transition noise followed by observation noise), so a given RNG state
/// determines the output exactly.
pub fn simulate<R: Rng + ?Sized>(
    model: &StateSpaceModel,
    steps: usize,
    rng: &mut R,
) -> Result<Simulation> {
    model.validate()?;
    if steps == 0 {
        return Err(Error::Parameter("simulation needs at least one step".into()));
    }
    let (n, m) = (model.n(), model.m());
    let lq0 = psd_factor(&model.q0);
    let lq = psd_factor(&model.q);
    let lr = psd_factor(&model.r);
    let mut states = DMatrix::zeros(steps, n);
    let mut observations = DMatrix::zeros(steps, m);
    let mut z = draw_gaussian(rng, &model.b0, &lq0);
    for t in 0..steps {
        if t > 0 {
            let eps = draw_gaussian(rng, &model.b, &lq);
            z = &model.f * &z + eps;
        }
        let delta = draw_gaussian(rng, &model.c, &lr);
        let x = &model.h * &z + delta;
        states.row_mut(t).copy_from(&z.transpose());
        observations.row_mut(t).copy_from(&x.transpose());
    }
    Ok(Simulation { states, observations })
}

/// Exact mean and covariance of the stacked observations `(x_0, ..., x_{T-1})`.
///
/// Computed by unrolling the dynamics: state means and covariances are
/// propagated densely and `Cov(z_t, z_s) = F^{t-s} P_s` for `t >= s`.
pub fn joint_moments(model: &StateSpaceModel, steps: usize) -> Result<(DVector<f64>, DMatrix<f64>)> {
    model.validate()?;
    let m = model.m();
    let total = steps * m;
    if total > JOINT_MOMENTS_LIMIT {
        return Err(Error::Size { requested: total, limit: JOINT_MOMENTS_LIMIT });
    }
    let mut means = Vec::with_capacity(steps);
    let mut covs = Vec::with_capacity(steps);
    let mut mu = model.b0.clone();
    let mut p = model.q0.clone();
    for t in 0..steps {
        if t > 0 {
            mu = &model.f * &mu + &model.b;
            p = &model.f * &p * model.f.transpose() + &model.q;
        }
        means.push(mu.clone());
        covs.push(p.clone());
    }
    let mut mean = DVector::zeros(total);
    let mut cov = DMatrix::zeros(total, total);
    let ht = model.h.transpose();
    for s in 0..steps {
        mean.rows_mut(s * m, m).copy_from(&(&model.h * &means[s] + &model.c));
        // cross = Cov(z_t, z_s), advanced by F each step
        let mut cross = covs[s].clone();
        for t in s..steps {
            if t > s {
                cross = &model.f * &cross;
            }
            let mut block = &model.h * &cross * &ht;
            if t == s {
                block += &model.r;
            }
            cov.view_mut((t * m, s * m), (m, m)).copy_from(&block);
            cov.view_mut((s * m, t * m), (m, m)).copy_from(&block.transpose());
        }
    }
    Ok((mean, cov))
}
