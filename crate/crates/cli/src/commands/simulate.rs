use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use mssm_core::ingest::{write_csv, DEFAULT_HOLDOUT_STEPS};
use mssm_core::synth::SyntheticConfig;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{write_json, Outcome};
use crate::check;
use crate::config::{DataConfig, InputSpec, RunConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Preset {
    /// 600 two-hour then 600 half-hour samples, daily and weekly seasonality.
    PaperShape,
    /// The same layout with log-normal traffic and geometric aggregation.
    Multiplicative,
}

impl Preset {
    pub fn config(self, harmonics: u32) -> SyntheticConfig {
        match self {
            Preset::PaperShape => SyntheticConfig::paper_shape(harmonics),
            Preset::Multiplicative => SyntheticConfig::multiplicative(harmonics),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimulateOptions {
    pub synthetic: SyntheticConfig,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub check: bool,
}

/// Run config that fits the simulated files with the generating structure.
pub fn run_config(synthetic: &SyntheticConfig, seed: u64, with_coarse: bool) -> RunConfig {
    let mut inputs = vec![InputSpec::new("fine.csv")];
    if with_coarse {
        inputs.insert(0, InputSpec::new("coarse.csv"));
    }
    let holdout = if synthetic.fine_steps > DEFAULT_HOLDOUT_STEPS { DEFAULT_HOLDOUT_STEPS } else { synthetic.fine_steps / 4 };
    RunConfig {
        seed: Some(seed),
        spec: Some(synthetic.spec.clone()),
        data: DataConfig {
            inputs,
            holdout_steps: holdout,
            log_domain: synthetic.multiplicative,
            coarse_mode: synthetic.coarse_mode,
            ..Default::default()
        },
        ..Default::default()
    }
}

/// Writes `underlying.csv`, `fine.csv`, `coarse.csv` (when there are coarse
/// samples), `truth.json` and a ready-to-use `run.json`.
pub fn run(opts: &SimulateOptions) -> Result<Outcome> {
    let data = opts.synthetic.generate(&mut ChaCha8Rng::seed_from_u64(opts.seed))?;
    let dir = &opts.out_dir;
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut written: Vec<(PathBuf, u64)> = Vec::new();
    let mut save = |name: &str, s: &mssm_core::TimeSeries| -> Result<()> {
        let path = dir.join(name);
        write_csv(&path, s).with_context(|| format!("writing {}", path.display()))?;
        written.push((path, s.step_seconds));
        Ok(())
    };
    save("underlying.csv", &data.underlying)?;
    save("fine.csv", &data.fine)?;
    let with_coarse = !data.coarse.is_empty();
    if with_coarse {
        save("coarse.csv", &data.coarse)?;
    }
    write_json(&dir.join("truth.json"), &opts.synthetic)?;
    write_json(&dir.join("run.json"), &run_config(&opts.synthetic, opts.seed, with_coarse))?;
    log::info!("wrote {} samples to {}", data.underlying.len(), dir.display());
    if opts.check {
        for (path, step) in &written {
            check::series(path, *step)?;
        }
        RunConfig::load(&dir.join("run.json"))?;
        let truth: SyntheticConfig = serde_json::from_str(&std::fs::read_to_string(dir.join("truth.json"))?)?;
        truth.validate()?;
    }
    Ok(Outcome::Done)
}

pub fn load_synthetic(path: &Path) -> Result<SyntheticConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?)
}
