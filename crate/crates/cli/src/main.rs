use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::Context;
use clap::{Parser, Subcommand};

use seekworld::bench::{emit_report, run_benchmark_with, BenchConfig, ReportFormat};
use seekworld::smoke::{curve_csv, evaluate_policy, smoke_map, train_q_smoke, Policy, SmokeConfig};
use seekworld::{Error, ObsMode, Variant, WaitPolicy};

#[derive(Parser)]
#[command(name = "seekworld", version, about = "Hide-and-seek engine benchmarks and smoke tests")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Measure stepping throughput over a grid of configurations.
    Bench(BenchArgs),
    /// Train a tabular Q-learner on the 8x8 smoke map and write its curve.
    SmokeTrain(SmokeArgs),
}

#[derive(clap::Args)]
struct BenchArgs {
    /// Comma-separated env counts.
    #[arg(long, default_value = "128", value_delimiter = ',')]
    envs: Vec<usize>,
    /// Comma-separated agent counts.
    #[arg(long, default_value = "1", value_delimiter = ',')]
    agents: Vec<usize>,
    /// Comma-separated observation modes.
    #[arg(long, default_value = "void", value_delimiter = ',')]
    mode: Vec<ObsMode>,
    /// Env-steps per timed repeat.
    #[arg(long, default_value_t = 1_000_000)]
    steps: u64,
    /// Comma-separated worker counts; 0 means one per hardware thread.
    #[arg(long, env = "SEEKWORLD_WORKERS", default_value = "0", value_delimiter = ',')]
    workers: Vec<usize>,
    #[arg(long, env = "SEEKWORLD_WAIT_POLICY", default_value = "yield")]
    wait_policy: WaitPolicy,
    /// Comma-separated variants: dense, diff_sweep, unpadded_stride, serial_init, tuple_pack.
    #[arg(long, default_value = "dense", value_delimiter = ',')]
    variant: Vec<Variant>,
    /// `unpadded` swaps every dense cell for unpadded_stride.
    #[arg(long, env = "SEEKWORLD_PADDING", default_value = "aligned", value_parser = ["aligned", "unpadded"])]
    padding: String,
    #[arg(long, default_value_t = 6)]
    repeats: usize,
    #[arg(long, default_value_t = 5.0)]
    warmup_s: f64,
    #[arg(long, default_value_t = 32)]
    map_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: ReportFormat,
}

#[derive(clap::Args)]
struct SmokeArgs {
    #[arg(long, default_value_t = 200_000)]
    steps: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "curve.csv")]
    out: PathBuf,
}

fn bench(args: BenchArgs) -> anyhow::Result<()> {
    if !(args.warmup_s.is_finite() && args.warmup_s >= 0.0) {
        return Err(Error::Usage(format!("--warmup-s must be >= 0, got {}", args.warmup_s)).into());
    }
    let mut variants = args.variant;
    if args.padding == "unpadded" {
        for v in &mut variants {
            if *v == Variant::Dense {
                *v = Variant::UnpaddedStride;
            }
        }
    }
    let config = BenchConfig {
        envs: args.envs,
        agents: args.agents,
        modes: args.mode,
        variants,
        workers: args.workers,
        wait: args.wait_policy,
        steps: args.steps,
        warmup: Duration::from_secs_f64(args.warmup_s),
        repeats: args.repeats,
        seed: args.seed,
        map_size: args.map_size,
        ..Default::default()
    };
    let report = run_benchmark_with(&config, |r| {
        eprintln!(
            "{} {} envs={} agents={} workers={}: {:.0} +- {:.0} sps",
            r.variant, r.mode, r.envs, r.agents, r.workers, r.sps_mean, r.sps_sem
        )
    })?;
    let bytes = emit_report(&report, args.format)?;
    match args.out {
        Some(path) => std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().write_all(&bytes)?,
    }
    Ok(())
}

fn smoke_train(args: SmokeArgs) -> anyhow::Result<()> {
    let spec = smoke_map();
    let (base, base_sem) = evaluate_policy(&spec, Policy::Random, 1000, args.seed)?;
    eprintln!("random baseline: {base:.3} +- {base_sem:.3}");
    let config = SmokeConfig { steps: args.steps, ..Default::default() };
    let outcome = train_q_smoke(&spec, &config, args.seed)?;
    for p in &outcome.curve {
        eprintln!("step {:>8}: {:.3} +- {:.3}", p.step, p.mean_return, p.sem);
    }
    std::fs::write(&args.out, curve_csv(&outcome.curve)?)
        .with_context(|| format!("writing {}", args.out.display()))?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Bench(a) => bench(a),
        Command::SmokeTrain(a) => smoke_train(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<Error>() {
                Some(Error::Usage(_)) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
