//! Re-reads written outputs and validates them.

use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use mssm_core::eval::{Comparison, EvalReport};
use mssm_core::inference::PosteriorFile;
use mssm_core::ingest::{parse_csv, CsvOptions};

fn read_csv_rows(path: &Path) -> Result<(csv::StringRecord, Vec<csv::StringRecord>)> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let header = rdr.headers()?.clone();
    let rows = rdr.records().collect::<std::result::Result<Vec<_>, _>>()?;
    Ok((header, rows))
}

fn numbers(row: &csv::StringRecord, skip: usize) -> Result<Vec<f64>> {
    row.iter().skip(skip).map(|v| v.parse::<f64>().with_context(|| format!("bad number {v:?}"))).collect()
}

pub fn posterior(path: &Path) -> Result<()> {
    PosteriorFile::load(path).with_context(|| format!("checking {}", path.display()))?;
    Ok(())
}

pub fn trace(path: &Path) -> Result<()> {
    let (header, rows) = read_csv_rows(path)?;
    ensure!(header.iter().eq(["stage", "iteration", "objective"]), "{}: unexpected header", path.display());
    for row in &rows {
        ensure!(matches!(&row[0], "map" | "vi"), "{}: unknown stage {:?}", path.display(), &row[0]);
        row[1].parse::<usize>()?;
        numbers(row, 2)?;
    }
    Ok(())
}

/// Ribbon CSV: numeric columns with ordered quantiles at every step.
pub fn ribbon(path: &Path) -> Result<()> {
    let (header, rows) = read_csv_rows(path)?;
    ensure!(
        header.iter().eq(["timestamp", "mean", "median", "q05", "q25", "q75", "q95"]),
        "{}: unexpected header",
        path.display()
    );
    for (i, row) in rows.iter().enumerate() {
        row[0].parse::<i64>()?;
        let v = numbers(row, 1)?;
        let (median, q05, q25, q75, q95) = (v[1], v[2], v[3], v[4], v[5]);
        if !(q05 <= q25 && q25 <= median && median <= q75 && q75 <= q95) {
            bail!("{}: quantiles out of order at row {}", path.display(), i + 2);
        }
    }
    Ok(())
}

pub fn report(path: &Path) -> Result<()> {
    let r: EvalReport = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    ensure!(r.expected_mae.std_error >= 0.0, "{}: negative standard error", path.display());
    ensure!(r.expected_mae.mean.is_finite(), "{}: non-finite expected MAE", path.display());
    Ok(())
}

pub fn comparison(path: &Path) -> Result<()> {
    let c: Comparison = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    ensure!(c.expected_mae_ratio.is_finite(), "{}: non-finite ratio", path.display());
    Ok(())
}

pub fn series(path: &Path, step_seconds: u64) -> Result<()> {
    let options = CsvOptions { has_header: Some(true), step_seconds: Some(step_seconds), ..Default::default() };
    parse_csv(path, &options).with_context(|| format!("checking {}", path.display()))?;
    Ok(())
}
