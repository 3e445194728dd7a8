//! Time aggregation of series and of models.
//!
//! [`aggregate_series`] replaces `r` consecutive samples by their arithmetic
//! or geometric mean. [`aggregate_model`] builds the `r*n`-state model whose
//! observations have exactly the distribution of the `r`-averaged
//! observations of a fine model. Its state at coarse step `t` is
//!
//! ```text
//! z'_t = (z_{rt}, eps_{rt+1}, ..., eps_{rt+r-1})
//! ```
//!
//! with transition `[F^r F^{r-1} ... F; 0]`, observation row
//! `(1/r) [sum_{i<r} H F^i, sum_{i<r-1} H F^i, ..., H]`, stacked noise
//! `N((b,..,b), Q (+) .. (+) Q)` and observation noise `N(c, R/r)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lgssm::{symmetrize, GaussianBelief, Propagator, SparseRows, StateSpaceModel};

const LN_2PI: f64 = 1.837_877_066_409_345_5;
use crate::series::{AggregationMode, TimeSeries};

/// What to do with non-positive values before taking logs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase", tag = "policy", content = "value")]
pub enum FloorPolicy {
    /// Floor at the smallest positive observed value times 1e-3.
    #[default]
    Auto,
    /// Floor at a fixed positive value.
    Fixed(f64),
    /// Fail on any non-positive value.
    Reject,
}

/// Replaces values `<= 0` with a positive floor. Returns the floored indices.
pub fn apply_floor(values: &[Option<f64>], policy: FloorPolicy) -> Result<(Vec<Option<f64>>, Vec<usize>)> {
    let bad: Vec<usize> = values
        .iter()
        .enumerate()
        .filter(|(_, v)| matches!(v, Some(x) if !(*x > 0.0)))
        .map(|(i, _)| i)
        .collect();
    if bad.is_empty() {
        return Ok((values.to_vec(), bad));
    }
    let eps = match policy {
        FloorPolicy::Reject => {
            return Err(Error::Data { message: "non-positive values cannot be log-transformed".into(), indices: bad })
        }
        FloorPolicy::Fixed(eps) if eps > 0.0 && eps.is_finite() => eps,
        FloorPolicy::Fixed(eps) => return Err(Error::Parameter(format!("floor must be positive, got {eps}"))),
        FloorPolicy::Auto => {
            let min_pos = values.iter().flatten().copied().filter(|x| *x > 0.0).fold(f64::INFINITY, f64::min);
            if !min_pos.is_finite() {
                return Err(Error::Data { message: "no positive values to derive a floor from".into(), indices: bad });
            }
            min_pos * 1e-3
        }
    };
    let floored = values.iter().map(|v| v.map(|x| if x > 0.0 { x } else { eps })).collect();
    Ok((floored, bad))
}

/// An aggregated series plus bookkeeping about what was dropped or floored.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedSeries {
    pub series: TimeSeries,
    /// Oldest samples dropped because they did not fill a window.
    pub dropped: usize,
    /// Indices (into the input) floored before the log in geometric mode.
    pub floored: Vec<usize>,
}

fn window_means(values: &[Option<f64>], r: usize) -> Vec<Option<f64>> {
    values
        .chunks_exact(r)
        .map(|w| {
            let mut it = w.iter();
            let first = (*it.next()?)?;
            let mut sum = first;
            for v in it {
                sum += (*v)?;
            }
            Some(sum / r as f64)
        })
        .collect()
}

/// Averages non-overlapping windows of `r` samples.
///
/// Windows are aligned to the newest sample; a remainder of `len % r` oldest
/// samples is dropped. A window containing a missing sample is missing.
/// Geometric mode is `exp` of the arithmetic window mean of the logs.
pub fn aggregate_series(
    series: &TimeSeries,
    r: usize,
    mode: AggregationMode,
    floor: FloorPolicy,
) -> Result<AggregatedSeries> {
    if r == 0 {
        return Err(Error::Parameter("aggregation ratio must be at least 1".into()));
    }
    if mode == AggregationMode::Raw {
        return Err(Error::Parameter("aggregation mode must be arithmetic or geometric".into()));
    }
    if r == 1 {
        return Ok(AggregatedSeries { series: series.clone().with_mode(mode), dropped: 0, floored: vec![] });
    }
    let dropped = series.len() % r;
    let kept = &series.values[dropped..];
    let (values, floored) = match mode {
        AggregationMode::Arithmetic => (window_means(kept, r), vec![]),
        _ => {
            let (pos, floored) = apply_floor(kept, floor)?;
            let logs: Vec<Option<f64>> = pos.iter().map(|v| v.map(f64::ln)).collect();
            let values = window_means(&logs, r).into_iter().map(|v| v.map(f64::exp)).collect();
            (values, floored.into_iter().map(|i| i + dropped).collect())
        }
    };
    Ok(AggregatedSeries {
        series: TimeSeries {
            start: series.timestamp(dropped),
            step_seconds: series.step_seconds * r as u64,
            values,
            mode,
        },
        dropped,
        floored,
    })
}

/// A fine model together with its `r`-aggregated lift.
#[derive(Debug, Clone)]
pub struct AggregatedModel {
    pub base: StateSpaceModel,
    pub r: usize,
    pub lifted: StateSpaceModel,
}

fn block_diag(first: &DMatrix<f64>, rest: &DMatrix<f64>, r: usize) -> DMatrix<f64> {
    let n = first.nrows();
    let mut out = DMatrix::zeros(r * n, r * n);
    out.view_mut((0, 0), (n, n)).copy_from(first);
    for i in 1..r {
        out.view_mut((i * n, i * n), (n, n)).copy_from(rest);
    }
    out
}

fn stacked(first: &DVector<f64>, rest: &DVector<f64>, r: usize) -> DVector<f64> {
    let n = first.len();
    let mut out = DVector::zeros(r * n);
    out.rows_mut(0, n).copy_from(first);
    for i in 1..r {
        out.rows_mut(i * n, n).copy_from(rest);
    }
    out
}

/// Lifts `model` to the model of its `r`-averaged observations.
pub fn aggregate_model(model: &StateSpaceModel, r: usize) -> Result<AggregatedModel> {
    if r == 0 {
        return Err(Error::Parameter("aggregation ratio must be at least 1".into()));
    }
    model.validate()?;
    Ok(AggregatedModel { base: model.clone(), r, lifted: lift(model, r) })
}

pub(crate) fn lift(model: &StateSpaceModel, r: usize) -> StateSpaceModel {
    if r == 1 {
        return model.clone();
    }
    let (n, m) = (model.n(), model.m());
    // powers[i] = F^i
    let mut powers = Vec::with_capacity(r + 1);
    powers.push(DMatrix::identity(n, n));
    for i in 1..=r {
        let next = &powers[i - 1] * &model.f;
        powers.push(next);
    }
    let mut f = DMatrix::zeros(r * n, r * n);
    for j in 0..r {
        f.view_mut((0, j * n), (n, n)).copy_from(&powers[r - j]);
    }
    // partial[k] = sum_{i<=k} H F^i
    let mut partial = Vec::with_capacity(r);
    let mut acc = DMatrix::zeros(m, n);
    for p in powers.iter().take(r) {
        acc += &model.h * p;
        partial.push(acc.clone());
    }
    let mut h = DMatrix::zeros(m, r * n);
    let inv_r = 1.0 / r as f64;
    for j in 0..r {
        h.view_mut((0, j * n), (m, n)).copy_from(&(&partial[r - 1 - j] * inv_r));
    }
    StateSpaceModel {
        f,
        b: stacked(&model.b, &model.b, r),
        q: block_diag(&model.q, &model.q, r),
        h,
        c: model.c.clone(),
        r: &model.r * inv_r,
        b0: stacked(&model.b0, &model.b, r),
        q0: block_diag(&model.q0, &model.q, r),
    }
}

impl AggregatedModel {
    /// See [`bridge_to_fine`].
    pub fn bridge(&self, coarse: &GaussianBelief) -> Result<GaussianBelief> {
        let n = self.base.n();
        if coarse.dim() != self.r * n {
            return Err(Error::Dimension(format!(
                "coarse belief has dimension {}, expected {}",
                coarse.dim(),
                self.r * n
            )));
        }
        Ok(Propagator::new(&self.lifted).predict(coarse).leading_marginal(n))
    }

    /// Embeds a belief on the fine state at the start of a coarse window into
    /// the lifted state: fresh noise blocks are independent `N(b, Q)`.
    pub fn lift_belief(&self, fine: &GaussianBelief) -> Result<GaussianBelief> {
        if fine.dim() != self.base.n() {
            return Err(Error::Dimension(format!(
                "fine belief has dimension {}, expected {}",
                fine.dim(),
                self.base.n()
            )));
        }
        Ok(GaussianBelief {
            mean: stacked(&fine.mean, &self.base.b, self.r),
            cov: block_diag(&fine.cov, &self.base.q, self.r),
        })
    }
}

/// Fine-state belief at the first fine step after a filtered coarse segment.
///
/// Advances the lifted belief by one coarse step and keeps the leading `n`
/// coordinates, which are the fine state at time `r * (T + 1)`.
pub fn bridge_to_fine(coarse: &GaussianBelief, base: &StateSpaceModel, r: usize) -> Result<GaussianBelief> {
    aggregate_model(base, r)?.bridge(coarse)
}

/// Reduced form of the lifted filter for scalar observations.
///
/// A lifted predictive belief always has mean `(m, b, ..., b)` and covariance
/// `blockdiag(P, Q, ..., Q)`: the noise blocks are fresh at every coarse
/// step. One coarse step can therefore be written as a map from the belief on
/// `z_{rt}` to the belief on `z_{r(t+1)}` that only touches `n x n` matrices.
/// The result is the same as filtering with the lifted model and bridging.
#[derive(Debug, Clone)]
pub(crate) struct CoarseRecursion {
    /// `F^r`
    a: SparseRows,
    mean_shift: DVector<f64>,
    noise_cov: DMatrix<f64>,
    h0: DVector<f64>,
    obs_offset: f64,
    obs_noise: f64,
    /// Covariance of the next state's noise part with the observation.
    cross: DVector<f64>,
}

impl CoarseRecursion {
    pub(crate) fn new(model: &StateSpaceModel, r: usize) -> Self {
        debug_assert_eq!(model.m(), 1);
        let n = model.n();
        let lifted = lift(model, r);
        let block = |j: usize| lifted.f.view((0, j * n), (n, n)).into_owned();
        let hrow = |j: usize| DVector::from_iterator(n, lifted.h.view((0, j * n), (1, n)).iter().copied());
        let mut mean_shift = model.b.clone();
        let mut noise_cov = model.q.clone();
        let mut obs_offset = model.c[0];
        let mut obs_noise = lifted.r[(0, 0)];
        let mut cross = DVector::zeros(n);
        for j in 1..r {
            let fj = block(j);
            let hj = hrow(j);
            let qh = &model.q * &hj;
            mean_shift += &fj * &model.b;
            noise_cov += &fj * &model.q * fj.transpose();
            obs_offset += hj.dot(&model.b);
            obs_noise += hj.dot(&qh);
            cross += &fj * &qh;
        }
        symmetrize(&mut noise_cov);
        Self {
            a: SparseRows::from_dense(&block(0)),
            mean_shift,
            noise_cov,
            h0: hrow(0),
            obs_offset,
            obs_noise,
            cross,
        }
    }

    /// Filters `values` from the predictive belief on the first window's
    /// leading fine state. Returns the log-likelihood and the predictive
    /// belief on the fine state after the last window.
    pub(crate) fn run(&self, prior: &GaussianBelief, values: &[Option<f64>]) -> Result<(f64, GaussianBelief)> {
        let mut m = prior.mean.clone();
        let mut p = prior.cov.clone();
        let mut log_likelihood = 0.0;
        for (step, x) in values.iter().enumerate() {
            let u = &p * &self.h0;
            let s = self.h0.dot(&u) + self.obs_noise;
            let mut mean = self.a.mul_vec(&m) + &self.mean_shift;
            let mut cov = self.a.sandwich(&p) + &self.noise_cov;
            if let Some(x) = *x {
                if !(s > 0.0 && s.is_finite()) {
                    return Err(Error::Degenerate {
                        step,
                        detail: "predicted observation variance is not positive".into(),
                    });
                }
                let e = x - (self.h0.dot(&m) + self.obs_offset);
                let ld = -0.5 * (LN_2PI + s.ln() + e * e / s);
                if !ld.is_finite() {
                    return Err(Error::Degenerate { step, detail: "non-finite log density".into() });
                }
                log_likelihood += ld;
                let g = self.a.mul_vec(&u) + &self.cross;
                mean.axpy(e / s, &g, 1.0);
                cov.ger(-1.0 / s, &g, &g, 1.0);
            }
            symmetrize(&mut cov);
            m = mean;
            p = cov;
        }
        Ok((log_likelihood, GaussianBelief { mean: m, cov: p }))
    }
}
