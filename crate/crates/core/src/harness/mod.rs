//! Configuration-driven experiments: pre-train, run, compare.

mod config;
mod run;

pub use config::{ExperimentConfig, RunSection, VariantSpec, CONFIG_TEMPLATE};
pub use run::{
    pretrain_snapshot, round_log_path, run_experiment, run_one, run_policy, snapshot_path,
    RunSummary, CURVE_HEADER, ROUND_HEADER, SUMMARY_HEADER,
};

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Ranking {
    pub variant: String,
    pub mean_accuracy: f64,
    pub seeds: usize,
}

/// Ranks variants by mean final accuracy from `summary.csv`, best first;
/// ties keep declaration order. Every configured (variant, seed) must be present.
pub fn compare(cfg: &ExperimentConfig) -> Result<Vec<Ranking>> {
    if cfg.variants.len() < 2 {
        return Err(Error::config(
            "variants",
            "compare needs at least two variants",
        ));
    }
    let path = cfg.run.out_dir.join("summary.csv");
    let rows = read_summary(&path)?;
    let mut ranking = Vec::with_capacity(cfg.variants.len());
    for v in &cfg.variants {
        let name = v.name();
        let mut total = 0.0;
        for &seed in &cfg.run.seeds {
            let acc = rows.get(&(name.clone(), seed)).ok_or_else(|| {
                Error::MissingRun(format!("{name} seed {seed} not in {}", path.display()))
            })?;
            total += acc;
        }
        ranking.push(Ranking {
            variant: name,
            mean_accuracy: total / cfg.run.seeds.len() as f64,
            seeds: cfg.run.seeds.len(),
        });
    }
    // Stable sort keeps declaration order among equal means.
    ranking.sort_by(|a, b| b.mean_accuracy.total_cmp(&a.mean_accuracy));
    Ok(ranking)
}

fn read_summary(path: &Path) -> Result<HashMap<(String, u64), f64>> {
    let text = fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => {
            Error::MissingRun(format!("{} does not exist", path.display()))
        }
        _ => Error::io(path, e),
    })?;
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| Error::Parse {
        line: 1,
        msg: e.to_string(),
    })?;
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse {
                line: 1,
                msg: format!("summary has no {name:?} column"),
            })
    };
    let (vi, si, ai) = (col("variant")?, col("seed")?, col("final_accuracy")?);
    let mut out = HashMap::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Parse {
            line,
            msg: e.to_string(),
        })?;
        let bad = |what: &str| Error::Parse {
            line,
            msg: format!("bad {what}"),
        };
        let seed: u64 = rec
            .get(si)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("seed"))?;
        let acc: f64 = rec
            .get(ai)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("accuracy"))?;
        let variant = rec.get(vi).ok_or_else(|| bad("variant"))?.to_string();
        out.insert((variant, seed), acc);
    }
    Ok(out)
}

/// Writes `ranking.csv` next to the summary.
pub fn write_ranking(out_dir: &Path, ranking: &[Ranking]) -> Result<()> {
    let path = out_dir.join("ranking.csv");
    let mut text = String::from("rank,variant,mean_accuracy,seeds\n");
    for (i, r) in ranking.iter().enumerate() {
        text.push_str(&format!(
            "{},{},{},{}\n",
            i + 1,
            r.variant,
            r.mean_accuracy,
            r.seeds
        ));
    }
    let mut f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    f.write_all(text.as_bytes())
        .map_err(|e| Error::io(&path, e))
}
