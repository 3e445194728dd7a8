//! Structural time series models: local linear trend, banks of harmonic
//! seasonal components and an AR(1) disturbance, summed in one observation.
//!
//! State ordering is fixed: `(level, slope)`, then for every seasonal period
//! its harmonics `k = 1..K` as `(f_k, f*_k)` pairs, then the AR state. The
//! observation row is therefore `(1, 0, 1, 0, ..., 1)`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lgssm::StateSpaceModel;

/// Default number of harmonics per seasonal period.
pub const DEFAULT_HARMONICS: u32 = 16;

/// One seasonal period expressed in fine steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seasonality {
    pub period: u32,
    #[serde(default = "default_harmonics")]
    pub harmonics: u32,
}

fn default_harmonics() -> u32 {
    DEFAULT_HARMONICS
}

/// Declarative description of the structural model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuralSpec {
    #[serde(default = "yes")]
    pub trend: bool,
    #[serde(default)]
    pub seasonal: Vec<Seasonality>,
    #[serde(default = "yes")]
    pub ar: bool,
    /// Length of one fine step, in seconds.
    pub fine_step_seconds: u64,
    /// One noise scale per harmonic instead of one per period.
    #[serde(default)]
    pub per_harmonic_sigma: bool,
}

fn yes() -> bool {
    true
}

impl StructuralSpec {
    /// Trend + daily + weekly seasonality + AR at the given step length.
    pub fn daily_weekly(fine_step_seconds: u64, harmonics: u32) -> Self {
        let per_day = (86_400 / fine_step_seconds) as u32;
        Self {
            trend: true,
            seasonal: vec![
                Seasonality { period: per_day, harmonics },
                Seasonality { period: 7 * per_day, harmonics },
            ],
            ar: true,
            fine_step_seconds,
            per_harmonic_sigma: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.fine_step_seconds == 0 {
            return Err(Error::Parameter("fine_step_seconds must be positive".into()));
        }
        for (i, s) in self.seasonal.iter().enumerate() {
            if s.harmonics == 0 {
                return Err(Error::Parameter(format!("seasonal period {} has no harmonics", s.period)));
            }
            // strict: the Nyquist harmonic (omega = pi) has a degenerate rotation block
            if 2 * s.harmonics >= s.period {
                return Err(Error::Parameter(format!(
                    "{} harmonics need a period above {} steps, got {}",
                    s.harmonics,
                    2 * s.harmonics,
                    s.period
                )));
            }
            if self.seasonal[..i].iter().any(|o| o.period == s.period) {
                return Err(Error::Parameter(format!("duplicate seasonal period {}", s.period)));
            }
        }
        Ok(())
    }

    /// Latent state dimension of the assembled model.
    pub fn state_dim(&self) -> usize {
        let seasonal: u32 = self.seasonal.iter().map(|s| 2 * s.harmonics).sum();
        2 * self.trend as usize + seasonal as usize + self.ar as usize
    }

    /// Number of seasonal noise scales carried in [`Params`].
    pub fn seasonal_sigma_count(&self) -> usize {
        if self.per_harmonic_sigma {
            self.seasonal.iter().map(|s| s.harmonics as usize).sum()
        } else {
            self.seasonal.len()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendParams {
    pub sigma_level: f64,
    pub sigma_slope: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArParams {
    pub coef: f64,
    pub sigma: f64,
}

/// Free parameters of a structural model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub trend: Option<TrendParams>,
    /// Per seasonal period, or per harmonic when the spec asks for it.
    pub seasonal_sigmas: Vec<f64>,
    pub ar: Option<ArParams>,
    pub sigma_obs: f64,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("{name} must be positive and finite, got {v}")))
    }
}

impl Params {
    pub fn validate(&self, spec: &StructuralSpec) -> Result<()> {
        if spec.trend != self.trend.is_some() || spec.ar != self.ar.is_some() {
            return Err(Error::Parameter("parameter components do not match spec".into()));
        }
        if self.seasonal_sigmas.len() != spec.seasonal_sigma_count() {
            return Err(Error::Parameter(format!(
                "expected {} seasonal sigmas, got {}",
                spec.seasonal_sigma_count(),
                self.seasonal_sigmas.len()
            )));
        }
        if let Some(t) = &self.trend {
            positive("sigma_level", t.sigma_level)?;
            positive("sigma_slope", t.sigma_slope)?;
        }
        for s in &self.seasonal_sigmas {
            positive("seasonal sigma", *s)?;
        }
        if let Some(a) = &self.ar {
            positive("ar sigma", a.sigma)?;
            if !(a.coef.abs() < 1.0) {
                return Err(Error::Stationarity(a.coef));
            }
        }
        positive("sigma_obs", self.sigma_obs)
    }
}

/// Prior moments of the initial latent state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialState {
    pub level_mean: f64,
    pub level_var: f64,
    pub slope_var: f64,
    pub seasonal_var: f64,
    pub ar_mean: f64,
    pub ar_var: f64,
}

/// One component's contribution to (F, Q, H).
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub f: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub h: Vec<f64>,
}

pub(crate) fn trend_parts(sigma_level: f64, sigma_slope: f64) -> Block {
    Block {
        f: DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]),
        q: DMatrix::from_diagonal(&DVector::from_vec(vec![sigma_level.powi(2), sigma_slope.powi(2)])),
        h: vec![1.0, 0.0],
    }
}

pub(crate) fn harmonic_parts(omega: f64, sigma: f64) -> Block {
    let (s, c) = omega.sin_cos();
    Block {
        f: DMatrix::from_row_slice(2, 2, &[c, s, -s, c]),
        q: DMatrix::from_diagonal_element(2, 2, sigma * sigma),
        h: vec![1.0, 0.0],
    }
}

/// Local linear trend: level and slope, both perturbed by independent noise.
pub fn trend_block(sigma_level: f64, sigma_slope: f64) -> Result<Block> {
    positive("sigma_level", sigma_level)?;
    positive("sigma_slope", sigma_slope)?;
    Ok(trend_parts(sigma_level, sigma_slope))
}

/// Rotation by `omega` radians per step; only the first coordinate is observed.
pub fn harmonic_block(omega: f64, sigma: f64) -> Result<Block> {
    if !(omega > 0.0 && omega < PI) {
        return Err(Error::Frequency(omega));
    }
    positive("seasonal sigma", sigma)?;
    Ok(harmonic_parts(omega, sigma))
}

pub fn ar_block(coef: f64, sigma: f64) -> Result<Block> {
    if !(coef.abs() < 1.0) {
        return Err(Error::Stationarity(coef));
    }
    positive("ar sigma", sigma)?;
    Ok(Block {
        f: DMatrix::from_element(1, 1, coef),
        q: DMatrix::from_element(1, 1, sigma * sigma),
        h: vec![1.0],
    })
}

/// Builds the structural model as a direct sum of component blocks.
pub fn assemble(spec: &StructuralSpec, params: &Params, init: &InitialState) -> Result<StateSpaceModel> {
    spec.validate()?;
    params.validate(spec)?;
    let mut blocks = Vec::new();
    let mut mean = Vec::new();
    let mut var = Vec::new();
    if let Some(t) = &params.trend {
        blocks.push(trend_block(t.sigma_level, t.sigma_slope)?);
        mean.extend([init.level_mean, 0.0]);
        var.extend([init.level_var, init.slope_var]);
    }
    let mut sigma_idx = 0;
    for season in &spec.seasonal {
        for k in 1..=season.harmonics {
            let omega = 2.0 * PI * f64::from(k) / f64::from(season.period);
            let sigma = params.seasonal_sigmas[sigma_idx];
            if spec.per_harmonic_sigma {
                sigma_idx += 1;
            }
            blocks.push(harmonic_block(omega, sigma)?);
            mean.extend([0.0, 0.0]);
            var.extend([init.seasonal_var, init.seasonal_var]);
        }
        if !spec.per_harmonic_sigma {
            sigma_idx += 1;
        }
    }
    if let Some(a) = &params.ar {
        blocks.push(ar_block(a.coef, a.sigma)?);
        mean.push(init.ar_mean);
        var.push(init.ar_var);
    }
    let n: usize = blocks.iter().map(|b| b.h.len()).sum();
    if n != spec.state_dim() || mean.len() != n {
        return Err(Error::Dimension(format!(
            "assembled {n} states, spec implies {}",
            spec.state_dim()
        )));
    }
    let mut f = DMatrix::zeros(n, n);
    let mut q = DMatrix::zeros(n, n);
    let mut h = DMatrix::zeros(1, n);
    let mut at = 0;
    for block in &blocks {
        let k = block.h.len();
        f.view_mut((at, at), (k, k)).copy_from(&block.f);
        q.view_mut((at, at), (k, k)).copy_from(&block.q);
        for (j, v) in block.h.iter().enumerate() {
            h[(0, at + j)] = *v;
        }
        at += k;
    }
    StateSpaceModel::new(
        f,
        DVector::zeros(n),
        q,
        h,
        DVector::zeros(1),
        DMatrix::from_element(1, 1, params.sigma_obs.powi(2)),
        DVector::from_vec(mean),
        DMatrix::from_diagonal(&DVector::from_vec(var)),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lgssm::{joint_moments, simulate};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn init() -> InitialState {
        InitialState {
            level_mean: 10.0,
            level_var: 4.0,
            slope_var: 1.0,
            seasonal_var: 2.0,
            ar_mean: 0.0,
            ar_var: 3.0,
        }
    }

    fn params_for(spec: &StructuralSpec) -> Params {
        Params {
            trend: spec.trend.then_some(TrendParams { sigma_level: 0.5, sigma_slope: 0.1 }),
            seasonal_sigmas: vec![0.2; spec.seasonal_sigma_count()],
            ar: spec.ar.then_some(ArParams { coef: 0.6, sigma: 0.7 }),
            sigma_obs: 0.3,
        }
    }

    #[test]
    fn trend_block_structure() {
        let b = trend_block(0.3, 0.4).unwrap();
        assert_eq!(b.f, DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]));
        assert_eq!(b.q[(0, 0)], 0.09);
        assert_eq!(b.h, vec![1.0, 0.0]);
        let eig = b.f.complex_eigenvalues();
        assert!(eig.iter().all(|e| (e.re - 1.0).abs() < 1e-12 && e.im.abs() < 1e-12));
        assert!(matches!(trend_block(0.0, 1.0), Err(Error::Parameter(_))));
    }

    #[test]
    fn noiseless_trend_is_a_line() {
        let b = trend_parts(0.0, 0.0);
        let mut z = DVector::from_vec(vec![2.0, 0.5]);
        for t in 1..20 {
            z = &b.f * &z;
            assert!((z[0] - (2.0 + 0.5 * t as f64)).abs() < 1e-12);
        }
    }

    #[test]
    fn quarter_turn_harmonic() {
        let b = harmonic_parts(PI / 2.0, 0.0);
        let mut z = DVector::from_vec(vec![1.0, 0.0]);
        let expect: [f64; 6] = [1.0, 0.0, -1.0, 0.0, 1.0, 0.0];
        for e in expect {
            assert!((z[0] - e).abs() < 1e-12);
            z = &b.f * &z;
        }
    }

    #[test]
    fn harmonic_block_is_orthogonal() {
        for omega in [0.01, 0.7, 2.0, 3.1] {
            let b = harmonic_block(omega, 1.0).unwrap();
            let id = b.f.transpose() * &b.f;
            assert!((id - DMatrix::identity(2, 2)).amax() < 1e-12);
        }
        assert!(matches!(harmonic_block(0.0, 1.0), Err(Error::Frequency(_))));
        assert!(matches!(harmonic_block(PI, 1.0), Err(Error::Frequency(_))));
    }

    #[test]
    fn noiseless_harmonic_closed_form() {
        let omega = 2.0 * PI * 3.0 / 48.0;
        let b = harmonic_parts(omega, 0.0);
        let (f0, g0): (f64, f64) = (1.3, -0.4);
        // f_t = A cos(omega t - phi), f*_t = -A sin(omega t - phi)
        let amp = (f0 * f0 + g0 * g0).sqrt();
        let phi = g0.atan2(f0);
        let mut z = DVector::from_vec(vec![f0, g0]);
        let mut worst = 0.0f64;
        for t in 0..1000 {
            let expect = amp * (omega * t as f64 - phi).cos();
            worst = worst.max((z[0] - expect).abs());
            z = &b.f * &z;
        }
        assert!(worst < 1e-9, "max deviation {worst}");
    }

    #[test]
    fn ar_block_checks_stationarity() {
        let b = ar_block(-0.5, 2.0).unwrap();
        assert_eq!(b.f[(0, 0)], -0.5);
        assert_eq!(b.q[(0, 0)], 4.0);
        assert!(matches!(ar_block(1.0, 1.0), Err(Error::Stationarity(_))));
        assert!(matches!(ar_block(-1.2, 1.0), Err(Error::Stationarity(_))));
    }

    #[test]
    fn ar_moments_match_closed_form() {
        // stationary variance sigma^2 / (1 - alpha^2) and ACF alpha^k
        for &alpha in &[0.9, -0.5] {
            let b = ar_block(alpha, 1.0).unwrap();
            let stat = 1.0 / (1.0 - alpha * alpha);
            let model = StateSpaceModel::new(
                b.f,
                DVector::zeros(1),
                b.q,
                DMatrix::from_element(1, 1, 1.0),
                DVector::zeros(1),
                DMatrix::zeros(1, 1),
                DVector::zeros(1),
                DMatrix::from_element(1, 1, stat),
            )
            .unwrap();
            let (_, cov) = joint_moments(&model, 6).unwrap();
            for k in 0..6 {
                assert!((cov[(0, k)] - stat * alpha.powi(k as i32)).abs() < 1e-12);
            }
        }
        assert!((1.0 / (1.0 - 0.81) - 5.263_157_894_736_842f64).abs() < 1e-12);
    }

    #[test]
    fn white_noise_ar_has_no_lag_one_correlation() {
        let b = ar_block(0.0, 1.0).unwrap();
        let model = StateSpaceModel::new(
            b.f,
            DVector::zeros(1),
            b.q,
            DMatrix::from_element(1, 1, 1.0),
            DVector::zeros(1),
            DMatrix::zeros(1, 1),
            DVector::zeros(1),
            DMatrix::from_element(1, 1, 1.0),
        )
        .unwrap();
        let sim = simulate(&model, 10_000, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let x: Vec<f64> = sim.observations.iter().copied().collect();
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        let var: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
        let lag1: f64 = x.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum();
        assert!((lag1 / var).abs() < 0.02);
    }

    #[test]
    fn dimension_counts() {
        let spec = StructuralSpec {
            trend: true,
            seasonal: vec![Seasonality { period: 48, harmonics: 16 }],
            ar: true,
            fine_step_seconds: 1800,
            per_harmonic_sigma: false,
        };
        let model = assemble(&spec, &params_for(&spec), &init()).unwrap();
        assert_eq!(model.n(), 35);
        // level + 16 harmonics + AR
        assert_eq!(model.h.iter().filter(|&&v| v == 1.0).count(), 18);

        let paper = StructuralSpec::daily_weekly(1800, 16);
        assert_eq!(paper.seasonal[1].period, 336);
        let model = assemble(&paper, &params_for(&paper), &init()).unwrap();
        assert_eq!(model.n(), 67);
        let mut expected_h = vec![1.0, 0.0];
        expected_h.extend((0..32).flat_map(|_| [1.0, 0.0]));
        expected_h.push(1.0);
        assert_eq!(model.h.iter().copied().collect::<Vec<_>>(), expected_h);
    }

    #[test]
    fn trend_only_is_embedded_block() {
        let spec = StructuralSpec {
            trend: true,
            seasonal: vec![],
            ar: false,
            fine_step_seconds: 300,
            per_harmonic_sigma: false,
        };
        let p = params_for(&spec);
        let model = assemble(&spec, &p, &init()).unwrap();
        let b = trend_block(0.5, 0.1).unwrap();
        assert_eq!(model.f, b.f);
        assert_eq!(model.q, b.q);
        assert_eq!(model.h.iter().copied().collect::<Vec<_>>(), b.h);
        assert_eq!(model.r[(0, 0)], 0.09);
        assert_eq!(model.b0.as_slice(), &[10.0, 0.0]);
    }

    #[test]
    fn per_harmonic_sigmas_are_routed() {
        let spec = StructuralSpec {
            trend: false,
            seasonal: vec![Seasonality { period: 12, harmonics: 2 }, Seasonality { period: 7, harmonics: 1 }],
            ar: false,
            fine_step_seconds: 60,
            per_harmonic_sigma: true,
        };
        let p = Params { trend: None, seasonal_sigmas: vec![1.0, 2.0, 3.0], ar: None, sigma_obs: 1.0 };
        let model = assemble(&spec, &p, &init()).unwrap();
        let diag: Vec<f64> = model.q.diagonal().iter().copied().collect();
        assert_eq!(diag, vec![1.0, 1.0, 4.0, 4.0, 9.0, 9.0]);
    }

    #[test]
    fn spec_validation() {
        let mut spec = StructuralSpec::daily_weekly(1800, 16);
        spec.validate().unwrap();
        spec.seasonal[0].harmonics = 24;
        assert!(spec.validate().is_err());
        spec.seasonal[0] = Seasonality { period: 336, harmonics: 2 };
        assert!(spec.validate().is_err());
        let p = Params { trend: None, seasonal_sigmas: vec![], ar: None, sigma_obs: 1.0 };
        assert!(p.validate(&StructuralSpec::daily_weekly(1800, 2)).is_err());
    }

    #[test]
    fn spec_json_defaults() {
        let spec: StructuralSpec =
            serde_json::from_str(r#"{"fine_step_seconds":1800,"seasonal":[{"period":48}]}"#).unwrap();
        assert!(spec.trend && spec.ar && !spec.per_harmonic_sigma);
        assert_eq!(spec.seasonal[0].harmonics, 16);
    }
}
