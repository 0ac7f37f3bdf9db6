//! Command-line front end. [`run`] takes the full argv and returns the exit status.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::agent::{train, write_reward_curve_csv, ModelMapping};
use crate::env::write_trace_csv;
use crate::error::{Error, Result};
use crate::harness::{
    checkpoint_path, evaluate_resolved, run_seed, simulate_mdp_shift, sweep, write_eval_csv, write_sweep_csv,
    ExperimentConfig, PolicySpec, ResolvedPolicy, SweepConfig,
};
use crate::orders::RateBlock;

#[derive(Debug, Parser)]
#[command(name = "orderpick", version, about = "Dynamic order-picking simulator, DQN trainer and benchmarks")]
struct Cli {
    /// Master seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// TOML experiment config (a sweep grid for `sweep`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Train a Q-network and write its checkpoint and reward curve.
    Train {
        #[command(flatten)]
        arrivals: ArrivalArgs,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        batch: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        /// Checkpoint path; defaults to model_lambda{λ}_alpha{α}.ckpt in --out.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Evaluate a policy over seeded shifts.
    Eval {
        #[command(flatten)]
        policy: PolicyArgs,
        #[command(flatten)]
        arrivals: ArrivalArgs,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, default_value = "eval.csv")]
        csv: String,
    },
    /// Evaluate one of the reference baselines by name.
    Baseline {
        name: String,
        #[command(flatten)]
        arrivals: ArrivalArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Policies × arrival rates, one CSV row per cell.
    Sweep {
        /// Grid file; the seven baselines over 0.01..0.09 when absent.
        #[arg(long)]
        grid: Option<PathBuf>,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        shift: Option<f64>,
    },
    /// A single shift with per-step trace and order ledger.
    Trace {
        #[command(flatten)]
        policy: PolicyArgs,
        #[command(flatten)]
        arrivals: ArrivalArgs,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        shift: Option<f64>,
        /// Which run seed to trace.
        #[arg(long, default_value_t = 0)]
        run: usize,
    },
}

#[derive(Debug, Args)]
struct ArrivalArgs {
    #[arg(long)]
    lambda: Option<f64>,
    /// Piecewise rates as `rate:seconds,rate:seconds,...`.
    #[arg(long, conflicts_with = "lambda")]
    schedule: Option<String>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    shift: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Simple {
    Random,
    Idle,
}

#[derive(Debug, Args)]
#[group(multiple = false)]
struct PolicyArgs {
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    baseline: Option<String>,
    /// Directory of checkpoints; one is picked per arrival block.
    #[arg(long)]
    bank: Option<PathBuf>,
    #[arg(long, value_enum)]
    policy: Option<Simple>,
    #[arg(long, value_enum, default_value = "recommended", requires = "bank")]
    mapping: Mapping,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mapping {
    Recommended,
    LowerNeighbor,
}

fn parse_schedule(s: &str) -> Result<Vec<RateBlock>> {
    s.split(',')
        .map(|part| {
            let (rate, dur) = part
                .split_once(':')
                .ok_or_else(|| Error::InvalidInput(format!("schedule block {part:?} is not rate:seconds")))?;
            let parse = |v: &str| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidInput(format!("bad number {v:?} in schedule")))
            };
            Ok(RateBlock {
                rate: parse(rate)?,
                duration: parse(dur)?,
            })
        })
        .collect()
}

struct Ctx {
    seed: Option<u64>,
    config: Option<PathBuf>,
    out: PathBuf,
}

impl Ctx {
    fn base(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.master_seed = s;
            cfg.train.seed = s;
        }
        Ok(cfg)
    }

    fn create(&self, name: &str) -> Result<BufWriter<File>> {
        fs::create_dir_all(&self.out)?;
        Ok(BufWriter::new(File::create(self.out.join(name))?))
    }
}

impl ArrivalArgs {
    fn apply(&self, cfg: &mut ExperimentConfig) -> Result<()> {
        if let Some(l) = self.lambda {
            cfg.lambda = l;
            cfg.schedule.clear();
        }
        if let Some(s) = &self.schedule {
            cfg.schedule = parse_schedule(s)?;
        }
        Ok(())
    }
}

impl RunArgs {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(n) = self.runs {
            cfg.n_runs = n;
        }
        if let Some(s) = self.shift {
            cfg.shift_seconds = s;
        }
    }
}

impl PolicyArgs {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        let mapping = match self.mapping {
            Mapping::Recommended => ModelMapping::Recommended,
            Mapping::LowerNeighbor => ModelMapping::LowerNeighbor,
        };
        if let Some(p) = &self.checkpoint {
            cfg.policy = PolicySpec::Checkpoint { path: p.clone() };
        } else if let Some(n) = &self.baseline {
            cfg.policy = PolicySpec::Baseline { name: n.clone() };
        } else if let Some(d) = &self.bank {
            cfg.policy = PolicySpec::ModelBank { dir: d.clone(), mapping };
        } else if let Some(s) = self.policy {
            cfg.policy = match s {
                Simple::Random => PolicySpec::Random,
                Simple::Idle => PolicySpec::Idle,
            };
        }
    }
}

fn print_summary(label: &str, e: &crate::harness::Evaluation) {
    let opt = |v: Option<f64>| v.map_or_else(|| "n/a".to_owned(), |x| format!("{x:.2}"));
    let a = &e.aggregate;
    println!(
        "{label}: runs={} atdo={} aoct={} puo={:.2} completed={:.1} arrived={:.1}",
        a.runs,
        opt(a.atdo),
        opt(a.aoct),
        a.puo,
        a.completed,
        a.arrived
    );
}

fn eval_and_write(ctx: &Ctx, cfg: &ExperimentConfig, csv: &str) -> Result<()> {
    cfg.validate()?;
    let policy = ResolvedPolicy::resolve(cfg)?;
    let e = evaluate_resolved(cfg, &policy)?;
    write_eval_csv(&e, ctx.create(csv)?)?;
    print_summary(&e.label, &e);
    Ok(())
}

fn rate_tag(cfg: &ExperimentConfig) -> f64 {
    cfg.rate_blocks()[0].rate
}

fn execute(cli: Cli) -> Result<()> {
    let ctx = Ctx {
        seed: cli.seed,
        config: cli.config,
        out: cli.out,
    };
    match cli.cmd {
        Cmd::Train {
            arrivals,
            alpha,
            episodes,
            steps,
            batch,
            lr,
            checkpoint,
        } => {
            let mut cfg = ctx.base()?;
            arrivals.apply(&mut cfg)?;
            if let Some(a) = alpha {
                cfg.alpha = a;
            }
            let t = &mut cfg.train;
            if let Some(v) = episodes {
                t.episodes = v;
            }
            if let Some(v) = steps {
                t.steps_per_episode = v;
            }
            if let Some(v) = batch {
                t.batch_size = v;
            }
            if let Some(v) = lr {
                t.learning_rate = v;
            }
            cfg.validate()?;
            let out = train(&cfg.warehouse, cfg.reward_params(), cfg.env, &cfg.train, |s| cfg.source(s))?;
            let lambda = rate_tag(&cfg);
            let ckpt = checkpoint.unwrap_or_else(|| checkpoint_path(&ctx.out, lambda, cfg.alpha));
            if let Some(dir) = ckpt.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            out.network.save(&ckpt)?;
            let curve = format!("reward_curve_lambda{lambda}_alpha{:.1}.csv", cfg.alpha);
            write_reward_curve_csv(&out.curve, ctx.create(&curve)?)?;
            println!(
                "trained {} episodes ({} gradient steps); wrote {} and {}",
                out.curve.len(),
                out.gradient_steps,
                ckpt.display(),
                ctx.out.join(curve).display()
            );
        }
        Cmd::Eval {
            policy,
            arrivals,
            run,
            alpha,
            csv,
        } => {
            let mut cfg = ctx.base()?;
            policy.apply(&mut cfg);
            arrivals.apply(&mut cfg)?;
            run.apply(&mut cfg);
            if let Some(a) = alpha {
                cfg.alpha = a;
            }
            eval_and_write(&ctx, &cfg, &csv)?;
        }
        Cmd::Baseline { name, arrivals, run } => {
            let mut cfg = ctx.base()?;
            cfg.policy = PolicySpec::Baseline { name: name.clone() };
            arrivals.apply(&mut cfg)?;
            run.apply(&mut cfg);
            eval_and_write(&ctx, &cfg, &format!("{name}.csv"))?;
        }
        Cmd::Sweep { grid, runs, shift } => {
            let mut s = match grid.as_deref().or(ctx.config.as_deref()) {
                Some(p) => SweepConfig::load(p)?,
                None => SweepConfig::default(),
            };
            if let Some(v) = ctx.seed {
                s.base.master_seed = v;
            }
            if let Some(v) = runs {
                s.base.n_runs = v;
            }
            if let Some(v) = shift {
                s.base.shift_seconds = v;
            }
            s.base.validate()?;
            let rows = sweep(&s);
            write_sweep_csv(&rows, ctx.create("sweep.csv")?)?;
            let failed = rows.iter().filter(|r| r.result.is_err()).count();
            println!("{} rows written to {}", rows.len(), ctx.out.join("sweep.csv").display());
            if failed > 0 {
                return Err(Error::InvalidInput(format!("{failed} sweep cells failed")));
            }
        }
        Cmd::Trace {
            policy,
            arrivals,
            alpha,
            shift,
            run,
        } => {
            let mut cfg = ctx.base()?;
            policy.apply(&mut cfg);
            arrivals.apply(&mut cfg)?;
            if let Some(a) = alpha {
                cfg.alpha = a;
            }
            if let Some(s) = shift {
                cfg.shift_seconds = s;
            }
            cfg.validate()?;
            let seed = run_seed(cfg.master_seed, run);
            let resolved = ResolvedPolicy::resolve(&cfg)?;
            match &resolved {
                ResolvedPolicy::Baseline(spec) => {
                    let out = crate::baselines::run_baseline(spec, cfg.source(seed)?, &cfg.warehouse, cfg.shift_seconds)?;
                    out.ledger.write_csv(ctx.create("ledger.csv")?)?;
                    println!("baseline run: ledger only, {} orders", out.ledger.len());
                }
                _ => {
                    let env = simulate_mdp_shift(&cfg, &resolved, seed, true)?;
                    let rows = env.trace().unwrap_or_default();
                    write_trace_csv(rows, ctx.create("trace.csv")?)?;
                    env.ledger().write_csv(ctx.create("ledger.csv")?)?;
                    println!("{} steps, {} orders traced", rows.len(), env.ledger().len());
                }
            }
        }
    }
    Ok(())
}

/// Parses `argv` (program name first) and runs the command. Returns 0 on
/// success, 1 on a runtime failure and 2 on a usage error.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
