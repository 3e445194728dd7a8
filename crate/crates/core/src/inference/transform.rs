use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::structural::{ArParams, Params, StructuralSpec, TrendParams};

/// Largest |u| mapped through `exp`; keeps scales finite and non-zero.
const LOG_CLAMP: f64 = 700.0;

/// Map from an unconstrained coordinate to a parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    /// `sigma = exp(u)`
    Log,
    /// `alpha = tanh(u)`
    Tanh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    SigmaLevel,
    SigmaSlope,
    SigmaSeasonal(usize),
    SigmaAr,
    ArCoef,
    SigmaObs,
}

impl ParamKind {
    pub fn transform(self) -> Transform {
        match self {
            ParamKind::ArCoef => Transform::Tanh,
            _ => Transform::Log,
        }
    }

    pub fn name(self) -> String {
        match self {
            ParamKind::SigmaLevel => "sigma_level".into(),
            ParamKind::SigmaSlope => "sigma_slope".into(),
            ParamKind::SigmaSeasonal(i) => format!("sigma_seasonal[{i}]"),
            ParamKind::SigmaAr => "sigma_ar".into(),
            ParamKind::ArCoef => "ar_coef".into(),
            ParamKind::SigmaObs => "sigma_obs".into(),
        }
    }
}

/// Ordering of the free parameters in unconstrained space.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamLayout {
    spec: StructuralSpec,
    kinds: Vec<ParamKind>,
}

impl ParamLayout {
    pub fn new(spec: &StructuralSpec) -> Self {
        let mut kinds = Vec::new();
        if spec.trend {
            kinds.extend([ParamKind::SigmaLevel, ParamKind::SigmaSlope]);
        }
        kinds.extend((0..spec.seasonal_sigma_count()).map(ParamKind::SigmaSeasonal));
        if spec.ar {
            kinds.extend([ParamKind::SigmaAr, ParamKind::ArCoef]);
        }
        kinds.push(ParamKind::SigmaObs);
        Self { spec: spec.clone(), kinds }
    }

    pub fn dim(&self) -> usize {
        self.kinds.len()
    }

    pub fn kinds(&self) -> &[ParamKind] {
        &self.kinds
    }

    pub fn names(&self) -> Vec<String> {
        self.kinds.iter().map(|k| k.name()).collect()
    }

    pub fn transforms(&self) -> Vec<Transform> {
        self.kinds.iter().map(|k| k.transform()).collect()
    }

    pub fn spec(&self) -> &StructuralSpec {
        &self.spec
    }

    pub fn to_unconstrained(&self, params: &Params) -> Result<Vec<f64>> {
        params.validate(&self.spec)?;
        Ok(self
            .kinds
            .iter()
            .map(|k| match *k {
                ParamKind::SigmaLevel => params.trend.expect("validated").sigma_level.ln(),
                ParamKind::SigmaSlope => params.trend.expect("validated").sigma_slope.ln(),
                ParamKind::SigmaSeasonal(i) => params.seasonal_sigmas[i].ln(),
                ParamKind::SigmaAr => params.ar.expect("validated").sigma.ln(),
                ParamKind::ArCoef => params.ar.expect("validated").coef.atanh(),
                ParamKind::SigmaObs => params.sigma_obs.ln(),
            })
            .collect())
    }

    pub fn from_unconstrained(&self, u: &[f64]) -> Result<Params> {
        if u.len() != self.dim() {
            return Err(Error::Dimension(format!("expected {} coordinates, got {}", self.dim(), u.len())));
        }
        if let Some(i) = u.iter().position(|v| !v.is_finite()) {
            return Err(Error::Parameter(format!("coordinate {} ({}) is not finite", i, self.kinds[i].name())));
        }
        let mut trend = TrendParams { sigma_level: 0.0, sigma_slope: 0.0 };
        let mut ar = ArParams { coef: 0.0, sigma: 0.0 };
        let mut seasonal = vec![0.0; self.spec.seasonal_sigma_count()];
        let mut sigma_obs = 0.0;
        for (k, &x) in self.kinds.iter().zip(u) {
            let sigma = x.clamp(-LOG_CLAMP, LOG_CLAMP).exp();
            match *k {
                ParamKind::SigmaLevel => trend.sigma_level = sigma,
                ParamKind::SigmaSlope => trend.sigma_slope = sigma,
                ParamKind::SigmaSeasonal(i) => seasonal[i] = sigma,
                ParamKind::SigmaAr => ar.sigma = sigma,
                // tanh saturates to +-1 in f64 for |u| > ~19
                ParamKind::ArCoef => ar.coef = x.tanh().clamp(-1.0 + f64::EPSILON, 1.0 - f64::EPSILON),
                ParamKind::SigmaObs => sigma_obs = sigma,
            }
        }
        Ok(Params {
            trend: self.spec.trend.then_some(trend),
            seasonal_sigmas: seasonal,
            ar: self.spec.ar.then_some(ar),
            sigma_obs,
        })
    }
}
