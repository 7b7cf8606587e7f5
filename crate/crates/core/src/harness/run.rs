//! Running agents against environments and writing their logs.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::config::{ExperimentConfig, VariantSpec};
use crate::agent::{AbacodeAgent, AgentConfig, AgentSnapshot};
use crate::compression::{BudgetSplit, CompressionAgent, CompressionConfig, CompressionSnapshot};
use crate::env::{build_stream, Environment};
use crate::error::{Error, Result};
use crate::policy::Policy;

pub const ROUND_HEADER: &str =
    "round,batch,variant,arm,reward,level,c,r_k,r_p,cum_reward,cum_accuracy";
pub const SUMMARY_HEADER: &str = "variant,seed,k,rounds,final_accuracy,total_errors";
pub const CURVE_HEADER: &str = "variant,seed,batch,round,cum_reward,cum_accuracy";

/// Outcome of one (variant, seed) run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub variant: String,
    pub seed: u64,
    pub k: usize,
    pub rounds: u64,
    pub cum_reward: u64,
    /// `(batch, rounds so far, cumulative reward)` at the end of every batch.
    pub curve: Vec<(u64, u64, u64)>,
}

impl RunSummary {
    pub fn accuracy(&self) -> f64 {
        self.cum_reward as f64 / self.rounds as f64
    }

    pub fn errors(&self) -> u64 {
        self.rounds - self.cum_reward
    }
}

/// Drives `policy` for `rounds` rounds. Only contexts and feedback bits pass
/// between environment and policy. When `log` is given, one CSV row per
/// round is written to it (without header).
pub fn run_policy(
    env: &mut Environment,
    policy: &mut dyn Policy<f64>,
    rounds: u64,
    variant: &str,
    mut log: Option<&mut dyn Write>,
) -> Result<(u64, Vec<(u64, u64, u64)>)> {
    let batch_size = env.batch_size() as u64;
    let mut cum = 0u64;
    let mut curve = Vec::new();
    for t in 1..=rounds {
        let x = env.next_context().to_vec();
        let arm = policy.step(&x)?;
        let bit = env.feedback(arm)?;
        policy.observe(f64::from(bit))?;
        cum += u64::from(bit);
        let batch = (t - 1) / batch_size;
        if let Some(w) = log.as_deref_mut() {
            let detail = policy.last_compression();
            let (level, c, r_k, r_p) = match detail {
                Some(d) => (
                    d.level.to_string(),
                    d.c.to_string(),
                    d.r_k.to_string(),
                    d.r_p.to_string(),
                ),
                None => Default::default(),
            };
            writeln!(
                w,
                "{t},{batch},{variant},{arm},{bit},{level},{c},{r_k},{r_p},{cum},{}",
                cum as f64 / t as f64
            )
            .map_err(|e| Error::io("round log", e))?;
        }
        if t % batch_size == 0 || t == rounds {
            curve.push((batch, t, cum));
        }
    }
    Ok((cum, curve))
}

fn agent_config(cfg: &ExperimentConfig, spec: &VariantSpec, seed: u64) -> Option<AgentConfig> {
    let variant = spec.policy_variant()?;
    Some(AgentConfig {
        variant,
        k: cfg.run.k,
        batch_size: cfg.stream.batch_size,
        embedding_dim: cfg.run.embedding_dim,
        bandit: cfg.bandit,
        pretrain: cfg.run.pretrain,
        finetune: cfg.run.finetune,
        universal_full_retrain: matches!(
            spec,
            VariantSpec::Ue {
                full_retrain: true,
                ..
            }
        ),
        seed,
    })
}

fn compression_config(
    cfg: &ExperimentConfig,
    spec: &VariantSpec,
    seed: u64,
) -> Option<CompressionConfig> {
    match spec {
        VariantSpec::Compression {
            levels,
            alpha_k,
            alpha_p,
            staged,
            encoder,
            ..
        } => Some(CompressionConfig {
            levels: levels.clone(),
            encoder_kind: *encoder,
            split: BudgetSplit {
                alpha_k: *alpha_k,
                alpha_p: *alpha_p,
            },
            staged: *staged,
            batch_size: cfg.stream.batch_size,
            bandit: cfg.bandit,
            pretrain: cfg.run.pretrain,
            finetune: cfg.run.finetune,
            seed,
        }),
        _ => None,
    }
}

fn run_name(variant: &str, seed: u64) -> String {
    format!("{variant}_seed{seed}")
}

pub fn round_log_path(out_dir: &Path, variant: &str, seed: u64) -> PathBuf {
    out_dir
        .join("rounds")
        .join(format!("{}.csv", run_name(variant, seed)))
}

pub fn snapshot_path(dir: &Path, variant: &str, seed: u64) -> PathBuf {
    dir.join(run_name(variant, seed))
}

enum Agent {
    Abacode(AbacodeAgent<f64>),
    Compression(CompressionAgent<f64>),
}

impl Agent {
    fn policy(&mut self) -> &mut dyn Policy<f64> {
        match self {
            Agent::Abacode(a) => a,
            Agent::Compression(a) => a,
        }
    }
}

/// Builds the agent for one run: pre-trained inline, or restored from
/// `snapshot_dir` when given.
fn build_agent(
    cfg: &ExperimentConfig,
    spec: &VariantSpec,
    seed: u64,
    env: &Environment,
    snapshot_dir: Option<&Path>,
) -> Result<Agent> {
    let (d, classes) = (env.dim(), env.classes());
    let pre = env.pretrain_contexts();
    let snap = snapshot_dir.map(|dir| snapshot_path(dir, &spec.name(), seed));
    if let Some(ac) = agent_config(cfg, spec, seed) {
        let mut agent = AbacodeAgent::new(ac, d, classes)?;
        match snap {
            Some(p) => agent.restore(AgentSnapshot::load_dir(&p)?, pre)?,
            None => agent.pretrain(pre)?,
        }
        return Ok(Agent::Abacode(agent));
    }
    let cc = compression_config(cfg, spec, seed).expect("non-agent variants are compression");
    let mut agent = CompressionAgent::new(cc, d, classes)?;
    match snap {
        Some(p) => agent.restore(CompressionSnapshot::load_dir(&p)?, pre)?,
        None => agent.pretrain(pre)?,
    }
    Ok(Agent::Compression(agent))
}

/// One (variant, seed) run; writes its per-round CSV under `out_dir/rounds`.
pub fn run_one(cfg: &ExperimentConfig, spec: &VariantSpec, seed: u64) -> Result<RunSummary> {
    let stream = build_stream(&cfg.stream, seed, cfg.run.k)?;
    let mut env = Environment::new(stream)?;
    let mut agent = build_agent(cfg, spec, seed, &env, cfg.run.snapshot_dir.as_deref())?;
    let name = spec.name();
    let path = round_log_path(&cfg.run.out_dir, &name, seed);
    let file = create(&path)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "# schema=1")
        .and_then(|_| writeln!(w, "{ROUND_HEADER}"))
        .map_err(|e| Error::io(&path, e))?;
    let (cum, curve) = run_policy(
        &mut env,
        agent.policy(),
        cfg.run.rounds,
        &name,
        Some(&mut w),
    )?;
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(RunSummary {
        variant: name,
        seed,
        k: cfg.run.k,
        rounds: cfg.run.rounds,
        cum_reward: cum,
        curve,
    })
}

fn create(path: &Path) -> Result<File> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    File::create(path).map_err(|e| Error::io(path, e))
}

/// Runs every (variant, seed) pair in parallel and writes `summary.csv` and
/// `curves.csv` into the output directory. Results are ordered by variant
/// declaration, then seed order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<RunSummary>> {
    cfg.validate()?;
    let jobs: Vec<(&VariantSpec, u64)> = cfg
        .variants
        .iter()
        .flat_map(|v| cfg.run.seeds.iter().map(move |&s| (v, s)))
        .collect();
    let results: Vec<RunSummary> = jobs
        .par_iter()
        .map(|&(v, s)| run_one(cfg, v, s))
        .collect::<Result<_>>()?;
    write_summary(&cfg.run.out_dir, &results)?;
    Ok(results)
}

fn write_summary(out_dir: &Path, results: &[RunSummary]) -> Result<()> {
    let path = out_dir.join("summary.csv");
    let mut w = BufWriter::new(create(&path)?);
    let io = |e| Error::io(&path, e);
    writeln!(w, "{SUMMARY_HEADER}").map_err(io)?;
    for r in results {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.variant,
            r.seed,
            r.k,
            r.rounds,
            r.accuracy(),
            r.errors()
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)?;

    let path = out_dir.join("curves.csv");
    let mut w = BufWriter::new(create(&path)?);
    let io = |e| Error::io(&path, e);
    writeln!(w, "{CURVE_HEADER}").map_err(io)?;
    for r in results {
        for &(batch, t, cum) in &r.curve {
            writeln!(
                w,
                "{},{},{batch},{t},{cum},{}",
                r.variant,
                r.seed,
                cum as f64 / t as f64
            )
            .map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

/// Pre-trains every (variant, seed) agent and saves it under
/// `dir/<variant>_seed<seed>/`. Returns the directories written.
pub fn pretrain_snapshot(cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let jobs: Vec<(&VariantSpec, u64)> = cfg
        .variants
        .iter()
        .flat_map(|v| cfg.run.seeds.iter().map(move |&s| (v, s)))
        .collect();
    jobs.par_iter()
        .map(|&(spec, seed)| {
            let stream = build_stream(&cfg.stream, seed, cfg.run.k)?;
            let env = Environment::new(stream)?;
            let target = snapshot_path(dir, &spec.name(), seed);
            match build_agent(cfg, spec, seed, &env, None)? {
                Agent::Abacode(a) => a.snapshot().save_dir(&target)?,
                Agent::Compression(a) => a.snapshot().save_dir(&target)?,
            }
            Ok(target)
        })
        .collect()
}
