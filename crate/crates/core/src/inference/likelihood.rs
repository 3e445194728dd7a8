use crate::aggregation::CoarseRecursion;
use crate::error::{Error, Result};
use crate::ingest::MultiScaleDataset;
use crate::lgssm::{filter_summary, scalar_observations, GaussianBelief, Propagator, StateSpaceModel};
use crate::structural::{assemble, InitialState, Params, StructuralSpec};

use super::priors::PriorSet;
use super::transform::ParamLayout;

/// Result of filtering a whole multi-resolution dataset.
#[derive(Debug, Clone)]
pub struct JointFilterOutput {
    pub log_likelihood: f64,
    /// Predictive belief on the fine state at the first step after training.
    pub next: GaussianBelief,
}

/// Filters the segments of `dataset` coarse to fine under the fine `model`.
///
/// The coarsest non-empty segment starts from the lifted prior; each later
/// segment starts from the belief bridged out of the previous one. Coarse
/// segments use the reduced `n`-dimensional form of the lifted filter.
pub fn joint_filter(model: &StateSpaceModel, dataset: &MultiScaleDataset) -> Result<JointFilterOutput> {
    dataset.validate()?;
    if model.m() != 1 {
        return Err(Error::Dimension(format!("datasets are univariate, model has m = {}", model.m())));
    }
    let mut belief: Option<GaussianBelief> = None;
    let mut log_likelihood = 0.0;
    for (segment, r) in dataset.segments.iter().zip(dataset.factors()) {
        if segment.is_empty() {
            continue;
        }
        let prior = belief.take().unwrap_or_else(|| model.initial_belief());
        let next = if r == 1 {
            let summary = filter_summary(model, &prior, &scalar_observations(&segment.values))?;
            log_likelihood += summary.log_likelihood;
            Propagator::new(model).predict(&summary.last_filtered.expect("segment is non-empty"))
        } else {
            let (ll, next) = CoarseRecursion::new(model, r).run(&prior, &segment.values)?;
            log_likelihood += ll;
            next
        };
        belief = Some(next);
    }
    let next = belief.unwrap_or_else(|| model.initial_belief());
    Ok(JointFilterOutput { log_likelihood, next })
}

/// Log-likelihood of `dataset` under the structural model with `params`.
pub fn joint_log_likelihood(
    params: &Params,
    spec: &StructuralSpec,
    init: &InitialState,
    dataset: &MultiScaleDataset,
) -> Result<f64> {
    check_step(spec, dataset)?;
    let model = assemble(spec, params, init)?;
    Ok(joint_filter(&model, dataset)?.log_likelihood)
}

fn check_step(spec: &StructuralSpec, dataset: &MultiScaleDataset) -> Result<()> {
    if dataset.fine_step() != spec.fine_step_seconds {
        return Err(Error::Dataset(format!(
            "dataset fine step {}s does not match model step {}s",
            dataset.fine_step(),
            spec.fine_step_seconds
        )));
    }
    Ok(())
}

/// Everything needed to evaluate the log posterior in unconstrained space.
#[derive(Debug, Clone)]
pub struct Problem {
    pub spec: StructuralSpec,
    pub priors: PriorSet,
    pub initial_state: InitialState,
    pub dataset: MultiScaleDataset,
    pub layout: ParamLayout,
}

impl Problem {
    pub fn new(dataset: MultiScaleDataset, spec: StructuralSpec, priors: PriorSet) -> Result<Self> {
        spec.validate()?;
        priors.validate()?;
        dataset.validate()?;
        check_step(&spec, &dataset)?;
        let initial_state = priors.initial_state(&dataset);
        let layout = ParamLayout::new(&spec);
        Ok(Self { spec, priors, initial_state, dataset, layout })
    }

    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    pub fn model(&self, params: &Params) -> Result<StateSpaceModel> {
        assemble(&self.spec, params, &self.initial_state)
    }

    pub fn log_likelihood(&self, u: &[f64]) -> Result<f64> {
        let params = self.layout.from_unconstrained(u)?;
        Ok(joint_filter(&self.model(&params)?, &self.dataset)?.log_likelihood)
    }

    /// Joint log-likelihood plus log prior density, Jacobian included.
    pub fn log_posterior(&self, u: &[f64]) -> Result<f64> {
        let lp = self.priors.log_density(&self.layout, u);
        let value = self.log_likelihood(u)? + lp;
        if value.is_finite() {
            Ok(value)
        } else {
            Err(Error::Parameter("log posterior is not finite".into()))
        }
    }

    /// Log posterior with failures mapped to `-inf`, for optimizers.
    pub fn objective(&self, u: &[f64]) -> f64 {
        self.log_posterior(u).unwrap_or(f64::NEG_INFINITY)
    }

    /// Predictive fine-state belief after the training data.
    pub fn next_belief(&self, params: &Params) -> Result<(StateSpaceModel, GaussianBelief)> {
        let model = self.model(params)?;
        let out = joint_filter(&model, &self.dataset)?;
        Ok((model, out.next))
    }
}

/// Single-resolution log-likelihood, for cross-checks.
pub fn fine_log_likelihood(model: &StateSpaceModel, values: &[Option<f64>]) -> Result<f64> {
    let prior = model.initial_belief();
    Ok(filter_summary(model, &prior, &scalar_observations(values))?.log_likelihood)
}
