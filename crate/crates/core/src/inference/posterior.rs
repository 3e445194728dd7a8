use std::path::Path;

use serde::{Deserialize, Serialize};

use super::forecast::Posterior;
use super::map::MapFit;
use super::priors::PriorSet;
use super::transform::ParamLayout;
use super::vi::PosteriorSurrogate;
use crate::error::{Error, Result};
use crate::structural::{InitialState, Params, StructuralSpec};

pub const POSTERIOR_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum PosteriorFit {
    Map { params: Params, unconstrained: Vec<f64>, log_posterior: f64 },
    Vi { surrogate: PosteriorSurrogate },
}

/// A fitted posterior with everything needed to forecast or refit later.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorFile {
    pub format_version: u32,
    pub spec: StructuralSpec,
    pub priors: PriorSet,
    pub initial_state: InitialState,
    pub fit: PosteriorFit,
}

impl PosteriorFile {
    pub fn from_map(spec: &StructuralSpec, priors: &PriorSet, init: &InitialState, fit: &MapFit) -> Self {
        Self {
            format_version: POSTERIOR_FORMAT_VERSION,
            spec: spec.clone(),
            priors: priors.clone(),
            initial_state: *init,
            fit: PosteriorFit::Map {
                params: fit.params.clone(),
                unconstrained: fit.unconstrained.clone(),
                log_posterior: fit.log_posterior,
            },
        }
    }

    pub fn from_surrogate(spec: &StructuralSpec, priors: &PriorSet, init: &InitialState, s: &PosteriorSurrogate) -> Self {
        Self {
            format_version: POSTERIOR_FORMAT_VERSION,
            spec: spec.clone(),
            priors: priors.clone(),
            initial_state: *init,
            fit: PosteriorFit::Vi { surrogate: s.clone() },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != POSTERIOR_FORMAT_VERSION {
            return Err(Error::Validation(format!(
                "posterior format version {} is not supported (expected {POSTERIOR_FORMAT_VERSION})",
                self.format_version
            )));
        }
        self.spec.validate()?;
        self.priors.validate()?;
        let layout = ParamLayout::new(&self.spec);
        match &self.fit {
            PosteriorFit::Map { params, unconstrained, .. } => {
                params.validate(&self.spec)?;
                if unconstrained.len() != layout.dim() {
                    return Err(Error::Dimension("stored unconstrained point has the wrong length".into()));
                }
            }
            PosteriorFit::Vi { surrogate } => {
                surrogate.validate()?;
                surrogate.check_layout(&layout)?;
            }
        }
        Ok(())
    }

    /// Centre of the posterior in unconstrained space, for warm starts.
    pub fn center(&self) -> &[f64] {
        match &self.fit {
            PosteriorFit::Map { unconstrained, .. } => unconstrained,
            PosteriorFit::Vi { surrogate } => &surrogate.mean,
        }
    }

    pub fn posterior(&self) -> Posterior {
        match &self.fit {
            PosteriorFit::Map { params, .. } => Posterior::Points(vec![params.clone()]),
            PosteriorFit::Vi { surrogate } => Posterior::Surrogate(surrogate.clone()),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = self.to_json()?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        file.validate()?;
        Ok(file)
    }
}
