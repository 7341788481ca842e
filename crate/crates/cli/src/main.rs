use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use dyn_leiden::baselines::MaintainerKind;
use dyn_leiden::bench::{
    emit_report, make_batches, run_batches, write_change_feed, write_snapshot, BenchConfig, ReportFormat,
};
use dyn_leiden::stream::{load_edge_stream, write_edge_stream, StreamEdge};
use dyn_leiden::synth::PlantedPartition;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "dyn-leiden", version, about = "Incremental Leiden community maintenance benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Replay an edge stream in batches and report per-batch metrics.
    Bench(BenchArgs),
    /// Write a planted-partition edge stream.
    Gen(GenArgs),
}

#[derive(Args)]
struct BenchArgs {
    /// Edge stream: `u v [weight] [timestamp]` per line.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "hit")]
    algorithm: MaintainerKind,
    #[arg(long, default_value_t = 100)]
    batch_size: usize,
    #[arg(long, default_value_t = 9)]
    batches: usize,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long, default_value_t = 10)]
    levels: usize,
    #[arg(long, default_value_t = 0.8)]
    initial_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Keep file order for streams without timestamps.
    #[arg(long)]
    no_shuffle: bool,
    /// Also delete the oldest edges, one batch's worth per batch.
    #[arg(long)]
    with_deletions: bool,
    /// Communities sampled for the gamma-density check per batch.
    #[arg(long, default_value_t = 500)]
    density_sample: usize,
    /// Zero the timing columns so reports are reproducible byte for byte.
    #[arg(long)]
    no_timings: bool,
    /// Report destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: ReportFormat,
    /// Write the final hierarchy as JSON.
    #[arg(long)]
    dump_state: Option<PathBuf>,
    /// Write the per-batch membership change feed as JSON lines.
    #[arg(long)]
    changes: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    blocks: usize,
    /// Vertices per block.
    #[arg(long)]
    size: usize,
    #[arg(long)]
    p_in: f64,
    #[arg(long)]
    p_out: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn bench(args: BenchArgs) -> Result<()> {
    let file = File::open(&args.input).with_context(|| format!("opening {}", args.input.display()))?;
    let stream = load_edge_stream(BufReader::new(file)).with_context(|| format!("reading {}", args.input.display()))?;
    let cfg = BenchConfig {
        initial_fraction: args.initial_fraction,
        batch_size: args.batch_size,
        batch_count: args.batches,
        gamma: args.gamma,
        levels: args.levels,
        algorithm: args.algorithm,
        seed: args.seed,
        shuffle: !args.no_shuffle,
        with_deletions: args.with_deletions,
        density_sample: args.density_sample,
        timings: !args.no_timings,
    };
    let (base, batches) = make_batches(&stream.edges, &cfg)?;
    let run = run_batches(&base, &batches, &cfg)?;
    let mut out = output(&args.out)?;
    emit_report(&mut out, &run.reports, args.format)?;
    out.flush()?;
    if let Some(path) = &args.dump_state {
        let mut w = output(&Some(path.clone()))?;
        write_snapshot(&mut w, &run.maintainer.snapshot())?;
        w.flush()?;
    }
    if let Some(path) = &args.changes {
        let mut w = output(&Some(path.clone()))?;
        for step in &run.changes {
            write_change_feed(&mut w, step)?;
        }
        w.flush()?;
    }
    Ok(())
}

fn gen(args: GenArgs) -> Result<()> {
    if args.blocks == 0 || args.size == 0 {
        bail!("blocks and size must be positive");
    }
    for (name, p) in [("p-in", args.p_in), ("p-out", args.p_out)] {
        if !(0.0..=1.0).contains(&p) {
            bail!("{name} must be a probability, got {p}");
        }
    }
    let cfg = PlantedPartition {
        blocks: args.blocks,
        size: args.size,
        p_in: args.p_in,
        p_out: args.p_out,
        seed: args.seed,
    };
    let edges: Vec<StreamEdge> = cfg
        .edges()
        .into_iter()
        .map(|(u, v)| StreamEdge {
            u,
            v,
            weight: 1.0,
            timestamp: None,
        })
        .collect();
    let mut out = output(&args.out)?;
    write_edge_stream(&mut out, &edges)?;
    out.flush()?;
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Bench(args) => bench(args),
        Command::Gen(args) => gen(args),
    }
}
