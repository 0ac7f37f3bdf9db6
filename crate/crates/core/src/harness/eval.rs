use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use super::config::{ExperimentConfig, PolicySpec, SweepConfig};
use super::metrics::{Aggregate, ShiftMetrics};
use crate::agent::{GreedyPolicy, ModelBank, ModelMapping, ScheduledPolicy};
use crate::baselines::{run_baseline, BaselineSpec};
use crate::env::{run_shift, Env, IdlePolicy, Policy, RandomPolicy};
use crate::error::{Error, Result};
use crate::nn::{checkpoint_file_name, QNetwork};
use crate::orders::{derive_seed, ArrivalProcess};

/// Seed of evaluation run `index`.
pub fn run_seed(master: u64, index: usize) -> u64 {
    derive_seed(master, index as u64)
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub label: String,
    pub runs: Vec<ShiftMetrics>,
    pub aggregate: Aggregate,
}

/// A policy ready to run, with checkpoints already loaded.
#[derive(Debug, Clone)]
pub enum ResolvedPolicy {
    Baseline(BaselineSpec),
    /// Greedy networks with the end time of the block each one serves.
    Drl(Vec<(f64, QNetwork)>),
    Random,
    Idle,
}

/// Loads every `model_lambda{λ}_alpha{α}.ckpt` in `dir` trained with `alpha`.
pub fn load_model_bank(dir: &Path, alpha: f64) -> Result<ModelBank> {
    let suffix = format!("_alpha{alpha:.1}.ckpt");
    let mut bank = ModelBank::new();
    for entry in fs::read_dir(dir)? {
        let name = entry?.file_name().to_string_lossy().into_owned();
        let Some(rate) = name
            .strip_prefix("model_lambda")
            .and_then(|r| r.strip_suffix(&suffix))
            .and_then(|r| r.parse::<f64>().ok())
        else {
            continue;
        };
        bank.insert(rate, QNetwork::load(&dir.join(&name))?);
    }
    Ok(bank)
}

fn block_ends(cfg: &ExperimentConfig) -> Vec<(f64, f64)> {
    let mut t = 0.0;
    cfg.rate_blocks()
        .into_iter()
        .map(|b| {
            t += b.duration;
            (t, b.rate)
        })
        .collect()
}

impl ResolvedPolicy {
    pub fn resolve(cfg: &ExperimentConfig) -> Result<Self> {
        Ok(match &cfg.policy {
            PolicySpec::Baseline { name } => ResolvedPolicy::Baseline(BaselineSpec::by_name(name, &cfg.warehouse)?),
            PolicySpec::Checkpoint { path } => {
                ResolvedPolicy::Drl(vec![(f64::INFINITY, QNetwork::load(path)?)])
            }
            PolicySpec::ModelBank { dir, mapping } => {
                let bank = load_model_bank(dir, cfg.alpha)?;
                Self::from_bank(cfg, &bank, *mapping)?
            }
            PolicySpec::Random => ResolvedPolicy::Random,
            PolicySpec::Idle => ResolvedPolicy::Idle,
        })
    }

    /// One model per arrival block, chosen from `bank` by the block's rate.
    pub fn from_bank(cfg: &ExperimentConfig, bank: &ModelBank, mapping: ModelMapping) -> Result<Self> {
        let blocks = block_ends(cfg)
            .into_iter()
            .map(|(end, rate)| Ok((end, bank.select(rate, mapping)?.1.clone())))
            .collect::<Result<_>>()?;
        Ok(ResolvedPolicy::Drl(blocks))
    }

    fn mdp_policy(&self, seed: u64) -> Result<Box<dyn Policy + Send>> {
        Ok(match self {
            ResolvedPolicy::Drl(blocks) => {
                let blocks = blocks.iter().map(|(end, net)| (*end, GreedyPolicy::new(net.clone()))).collect();
                Box::new(ScheduledPolicy::new(blocks)?)
            }
            ResolvedPolicy::Random => Box::new(RandomPolicy::new(derive_seed(seed, 1))),
            ResolvedPolicy::Idle => Box::new(IdlePolicy),
            ResolvedPolicy::Baseline(_) => {
                return Err(Error::InvalidInput("baselines do not act through the MDP".into()))
            }
        })
    }
}

/// One shift of an MDP policy, with per-step tracing when asked.
pub fn simulate_mdp_shift(
    cfg: &ExperimentConfig,
    policy: &ResolvedPolicy,
    seed: u64,
    trace: bool,
) -> Result<Env<ArrivalProcess>> {
    let mut env = Env::new(cfg.warehouse.clone(), cfg.reward_params(), cfg.env, cfg.source(seed)?)?;
    if trace {
        env.enable_trace();
    }
    let mut p = policy.mdp_policy(seed)?;
    run_shift(&mut env, &mut p, cfg.shift_seconds)?;
    Ok(env)
}

fn run_one(cfg: &ExperimentConfig, policy: &ResolvedPolicy, index: usize) -> Result<ShiftMetrics> {
    let seed = run_seed(cfg.master_seed, index);
    match policy {
        ResolvedPolicy::Baseline(spec) => {
            let out = run_baseline(spec, cfg.source(seed)?, &cfg.warehouse, cfg.shift_seconds)?;
            Ok(out.metrics(seed))
        }
        _ => {
            let env = simulate_mdp_shift(cfg, policy, seed, false)?;
            Ok(ShiftMetrics::from_ledger(
                env.ledger(),
                env.total_distance(),
                cfg.shift_seconds,
                seed,
            ))
        }
    }
}

/// Runs `n_runs` seeded shifts in parallel; results come back in run order.
pub fn evaluate_resolved(cfg: &ExperimentConfig, policy: &ResolvedPolicy) -> Result<Evaluation> {
    cfg.validate()?;
    let runs = (0..cfg.n_runs)
        .into_par_iter()
        .map(|i| run_one(cfg, policy, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(Evaluation {
        label: cfg.policy.label(),
        aggregate: Aggregate::of(&runs),
        runs,
    })
}

pub fn evaluate(cfg: &ExperimentConfig) -> Result<Evaluation> {
    cfg.validate()?;
    let policy = ResolvedPolicy::resolve(cfg)?;
    evaluate_resolved(cfg, &policy)
}

fn fmt(v: f64) -> String {
    format!("{v:.6}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, fmt)
}

/// Columns `policy,run,run_seed,atdo,aoct,puo,total_distance,completed,arrived`;
/// a final `mean` row holds the aggregate. Undefined metrics are left empty.
pub fn write_eval_csv<W: Write>(eval: &Evaluation, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "policy",
        "run",
        "run_seed",
        "atdo",
        "aoct",
        "puo",
        "total_distance",
        "completed",
        "arrived",
    ])?;
    for (i, m) in eval.runs.iter().enumerate() {
        out.write_record([
            eval.label.clone(),
            i.to_string(),
            m.run_seed.to_string(),
            fmt_opt(m.atdo),
            fmt_opt(m.aoct),
            fmt(m.puo),
            fmt(m.total_distance),
            m.completed.to_string(),
            m.arrived.to_string(),
        ])?;
    }
    let a = &eval.aggregate;
    out.write_record([
        eval.label.clone(),
        "mean".into(),
        String::new(),
        fmt_opt(a.atdo),
        fmt_opt(a.aoct),
        fmt(a.puo),
        fmt(a.total_distance),
        fmt(a.completed),
        fmt(a.arrived),
    ])?;
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub policy: String,
    pub lambda: f64,
    pub result: std::result::Result<Aggregate, String>,
}

/// Every policy at every rate. A failing cell becomes an error row and the
/// sweep carries on.
pub fn sweep(cfg: &SweepConfig) -> Vec<SweepRow> {
    let mut rows = Vec::new();
    for policy in cfg.resolved_policies() {
        for &lambda in &cfg.lambdas {
            let exp = ExperimentConfig {
                policy: policy.clone(),
                lambda,
                schedule: Vec::new(),
                ..cfg.base.clone()
            };
            rows.push(SweepRow {
                policy: policy.label(),
                lambda,
                result: evaluate(&exp).map(|e| e.aggregate).map_err(|e| e.to_string()),
            });
        }
    }
    rows
}

/// Columns `policy,lambda,runs,atdo,aoct,puo,completed,arrived,status`.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "policy", "lambda", "runs", "atdo", "aoct", "puo", "completed", "arrived", "status",
    ])?;
    for r in rows {
        let lambda = format!("{:.4}", r.lambda);
        match &r.result {
            Ok(a) => out.write_record([
                r.policy.clone(),
                lambda,
                a.runs.to_string(),
                fmt_opt(a.atdo),
                fmt_opt(a.aoct),
                fmt(a.puo),
                fmt(a.completed),
                fmt(a.arrived),
                "ok".into(),
            ])?,
            Err(e) => out.write_record([
                r.policy.clone(),
                lambda,
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                format!("error: {e}"),
            ])?,
        }
    }
    out.flush()?;
    Ok(())
}

/// Where `train` writes a model for `(lambda, alpha)` under `dir`.
pub fn checkpoint_path(dir: &Path, lambda: f64, alpha: f64) -> std::path::PathBuf {
    dir.join(checkpoint_file_name(lambda, alpha))
}
