use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{error, info, warn};
use rayon::prelude::*;

use coexsim::compare::{compare_strategies, write_comparisons, NO_COMPARISON};
use coexsim::fading::FadingLabel;
use coexsim::quality::{LossTrace, QualityReport, QualitySummary};
use coexsim::stream::{build_packet_map, PacketMap};
use coexsim::sweep::{read_rows_file, run_sweep, write_rows_file, SweepSpec};
use coexsim::{Error, Result, SimConfig};

#[derive(Parser)]
#[command(
    name = "coexsim",
    version,
    about = "D2D / LTE uplink coexistence simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Fading {
    Low,
    High,
}

impl From<Fading> for FadingLabel {
    fn from(f: Fading) -> Self {
        match f {
            Fading::Low => FadingLabel::LowSpeed,
            Fading::High => FadingLabel::HighSpeed,
        }
    }
}

#[derive(Args)]
struct Common {
    /// Simulation config (JSON). Defaults apply to every missing key.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the fading profile of the config.
    #[arg(long, value_enum)]
    fading: Option<Fading>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads for independent runs.
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration over consecutive seeds.
    Run {
        #[command(flatten)]
        common: Common,
        /// First seed; overrides the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Number of consecutive seeds to average over.
        #[arg(long, default_value_t = 20)]
        seeds: u64,
    },
    /// Run a one- or two-axis parameter sweep. Rows already present in the
    /// output table are reused.
    Sweep {
        /// Sweep spec (JSON).
        spec: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Replace the seed list with this single seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compare an FP result table with an FDTP one at equal D2D throughput.
    Compare {
        fp: PathBuf,
        fdtp: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Recompute quality metrics from a saved loss trace.
    Analyze {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, conflicts_with = "config")]
        packet_map: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        d2d: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn load_config(common: &Common) -> Result<SimConfig> {
    let mut cfg = match &common.config {
        Some(p) => SimConfig::load(p)?,
        None => SimConfig::default(),
    };
    if let Some(f) = common.fading {
        cfg.channel.fading = f.into();
    }
    Ok(cfg)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn mkdir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json<T: serde::Serialize>(value: &T, path: &Path) -> Result<()> {
    serde_json::to_writer_pretty(create(path)?, value)?;
    Ok(())
}

/// Returns the number of aborted runs.
fn cmd_run(common: &Common, seed: Option<u64>, seeds: u64) -> Result<usize> {
    let mut cfg = load_config(common)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let resources = cfg.resources()?;
    let map = std::sync::Arc::new(build_packet_map(&cfg.stream)?);
    mkdir(&common.out)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(common.workers.max(1))
        .build()
        .map_err(|e| Error::config(format!("worker pool: {e}")))?;
    let first = cfg.seed;
    let results: Vec<(u64, Result<coexsim::SimResult>)> = pool.install(|| {
        (first..first + seeds.max(1))
            .into_par_iter()
            .map(|s| {
                let c = SimConfig {
                    seed: s,
                    ..cfg.clone()
                };
                let r = coexsim::Simulation::with_parts(&c, map.clone(), resources.clone())
                    .and_then(|sim| sim.run_to_end());
                (s, r)
            })
            .collect()
    });

    let mut ok = Vec::new();
    let mut aborted = 0;
    for (s, r) in &results {
        match r {
            Ok(res) => ok.push((*s, res)),
            Err(e) => {
                error!("seed {s} aborted: {e}");
                aborted += 1;
            }
        }
    }
    if let Some((s, first_ok)) = ok.first() {
        info!("writing traces for seed {s}");
        first_ok
            .loss_trace
            .write_video_csv(&map, create(&common.out.join("loss_trace.csv"))?)?;
        first_ok
            .loss_trace
            .write_d2d_csv(create(&common.out.join("d2d_trace.csv"))?)?;
        map.write_csv(create(&common.out.join("packet_map.csv"))?)?;
        let reports: Vec<(u64, &QualityReport)> =
            ok.iter().map(|(s, r)| (*s, &r.quality)).collect();
        let summary = QualitySummary::aggregate(&reports)?;
        write_json(&summary, &common.out.join("quality.json"))?;
        println!(
            "p_det={:.4} d2d_throughput={:.4} efficiency={} seeds={} config_hash={}",
            summary.p_det,
            summary.d2d_rel_throughput,
            summary
                .efficiency
                .map_or("undefined".into(), |e| format!("{e:.4}")),
            summary.seeds.len(),
            cfg.config_hash()
        );
    }
    Ok(aborted)
}

fn cmd_sweep(spec_path: &Path, common: &Common, seed: Option<u64>) -> Result<usize> {
    let mut spec = SweepSpec::load(spec_path)?;
    if let Some(c) = &common.config {
        spec.base = SimConfig::load(c)?;
    }
    if let Some(f) = common.fading {
        spec.base.channel.fading = f.into();
    }
    if let Some(s) = seed {
        spec.seeds = vec![s];
    }
    mkdir(&common.out)?;
    let results = spec
        .outputs
        .results
        .clone()
        .unwrap_or_else(|| "results.csv".into());
    let results = if results.is_absolute() {
        results
    } else {
        common.out.join(results)
    };
    let previous = if results.exists() {
        read_rows_file(&results)?
    } else {
        Vec::new()
    };

    let outcome = run_sweep(&spec, common.workers, &previous)?;
    write_rows_file(&outcome.rows, &results)?;
    info!("{} rows reused from {}", outcome.reused, results.display());
    for r in outcome.raw().filter(|r| !r.is_ok()) {
        warn!("config {} seed {}: {}", r.config_hash, r.seed, r.status);
    }
    println!(
        "{} runs, {} reused, {} aborted -> {}",
        outcome.raw().count(),
        outcome.reused,
        outcome.aborted,
        results.display()
    );
    Ok(outcome.aborted)
}

fn cmd_compare(fp: &Path, fdtp: &Path, out: &Path) -> Result<usize> {
    let rows = compare_strategies(&read_rows_file(fp)?, &read_rows_file(fdtp)?)?;
    mkdir(out)?;
    let path = out.join("comparison.csv");
    write_comparisons(&rows, create(&path)?)?;
    for r in &rows {
        match r.delta_p_det {
            Some(d) => println!(
                "{} power={} throughput={:.3} delta_p_det={:+.4} ci95={:.4}",
                r.fading_label,
                r.power_dbm,
                r.d2d_throughput,
                d,
                r.ci95.unwrap_or(0.0)
            ),
            None => println!(
                "{} throughput={:.3} {NO_COMPARISON}",
                r.fading_label, r.d2d_throughput
            ),
        }
    }
    Ok(0)
}

fn cmd_analyze(
    trace: &Path,
    packet_map: Option<&Path>,
    config: Option<&Path>,
    d2d: Option<&Path>,
    out: &Path,
) -> Result<usize> {
    let cfg = match config {
        Some(p) => SimConfig::load(p)?,
        None => SimConfig::default(),
    };
    let map = match packet_map {
        Some(p) => PacketMap::read_csv(File::open(p).map_err(|e| Error::io(p, e))?)?,
        None => build_packet_map(&cfg.stream)?,
    };
    let video =
        LossTrace::read_video_csv(File::open(trace).map_err(|e| Error::io(trace, e))?, &map)?;
    let d2d = match d2d {
        Some(p) => LossTrace::read_d2d_csv(File::open(p).map_err(|e| Error::io(p, e))?)?,
        None => Vec::new(),
    };
    let total_slots = if d2d.is_empty() {
        video.iter().map(|v| v.slot + 1).max().unwrap_or(1)
    } else {
        d2d.len() as u64
    };
    let lt = LossTrace {
        video,
        d2d,
        total_slots,
    };
    let report = QualityReport::evaluate(&lt, &map, cfg.quality.damage_rule)?;
    mkdir(out)?;
    write_json(&report, &out.join("quality.json"))?;
    println!(
        "p_det={:.4} d2d_throughput={:.4} lost_packets={}",
        report.p_det,
        report.d2d_rel_throughput,
        lt.lost()
    );
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run {
            common,
            seed,
            seeds,
        } => cmd_run(common, *seed, *seeds),
        Command::Sweep { spec, common, seed } => cmd_sweep(spec, common, *seed),
        Command::Compare { fp, fdtp, out } => cmd_compare(fp, fdtp, out),
        Command::Analyze {
            trace,
            packet_map,
            config,
            d2d,
            out,
        } => cmd_analyze(
            trace,
            packet_map.as_deref(),
            config.as_deref(),
            d2d.as_deref(),
            out,
        ),
    };
    match outcome {
        Ok(0) => ExitCode::SUCCESS,
        Ok(n) => {
            error!("{n} run(s) aborted");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
