use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use mssm_core::eval::{compare, Comparison, EvalReport};

use super::{write_json, Outcome};
use crate::check;

pub fn load_report(path: &Path) -> Result<EvalReport> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub baseline: PathBuf,
    pub candidate: PathBuf,
    /// Standard output when absent.
    pub out: Option<PathBuf>,
    pub check: bool,
}

pub fn run(opts: &EvalOptions) -> Result<Outcome> {
    let c: Comparison = compare(&load_report(&opts.baseline)?, &load_report(&opts.candidate)?)?;
    match &opts.out {
        Some(path) => {
            write_json(path, &c)?;
            if opts.check {
                check::comparison(path)?;
            }
        }
        None => println!("{}", serde_json::to_string_pretty(&c)?),
    }
    Ok(Outcome::Done)
}

#[cfg(test)]
mod tests {
    use super::*;
    use mssm_core::eval::McEstimate;

    fn report(mae: f64, ll: f64, horizon: usize) -> EvalReport {
        EvalReport {
            expected_mae: McEstimate { mean: mae, std_error: 0.0 },
            holdout_log_likelihood: Some(ll),
            point_mae_mean: None,
            point_mae_median: None,
            num_mc_samples: 100,
            horizon,
        }
    }

    fn run_pair(a: &EvalReport, b: &EvalReport) -> Result<Comparison> {
        let dir = tempfile::tempdir().unwrap();
        let (pa, pb, out) = (dir.path().join("a.json"), dir.path().join("b.json"), dir.path().join("c.json"));
        write_json(&pa, a).unwrap();
        write_json(&pb, b).unwrap();
        run(&EvalOptions { baseline: pa, candidate: pb, out: Some(out.clone()), check: true })?;
        Ok(serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap())
    }

    #[test]
    fn identical_reports() {
        let c = run_pair(&report(3.0, 10.0, 96), &report(3.0, 10.0, 96)).unwrap();
        assert_eq!(c.expected_mae_ratio, 1.0);
        assert_eq!(c.log_likelihood_difference, Some(0.0));
    }

    #[test]
    fn likelihood_factor() {
        let c = run_pair(&report(3.0, 543.6, 96), &report(1.0, 545.92, 96)).unwrap();
        assert!((c.likelihood_factor.unwrap() - 10.18).abs() < 0.01);
    }

    #[test]
    fn horizon_mismatch_fails() {
        assert!(run_pair(&report(3.0, 1.0, 96), &report(3.0, 1.0, 48)).is_err());
    }
}
