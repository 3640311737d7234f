//! Parameter sweeps over one or two config axes and a list of seeds.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::engine::run;
use crate::error::{Error, Result};
use crate::quality::{efficiency, mean_and_sample_std};

pub const MEAN_SEED: &str = "mean";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub key: String,
    pub values: Vec<serde_json::Value>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Outputs {
    pub results: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub base: SimConfig,
    pub axis1: Axis,
    #[serde(default)]
    pub axis2: Option<Axis>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub outputs: Outputs,
}

impl SweepSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let spec: Self =
            serde_json::from_str(&text).map_err(|e| Error::config(format!("sweep spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::config("sweep needs at least one seed"));
        }
        for axis in std::iter::once(&self.axis1).chain(self.axis2.as_ref()) {
            if axis.values.is_empty() {
                return Err(Error::config(format!("axis {:?} has no values", axis.key)));
            }
            // The key must address an existing config path.
            self.base.with_value(&axis.key, axis.values[0].clone())?;
        }
        Ok(())
    }

    /// Grid points in axis order: axis1 outer, axis2 inner.
    pub fn grid(&self) -> Vec<Result<SimConfig>> {
        let inner: Vec<Option<&serde_json::Value>> = match &self.axis2 {
            Some(a) => a.values.iter().map(Some).collect(),
            None => vec![None],
        };
        let mut out = Vec::new();
        for v1 in &self.axis1.values {
            for v2 in &inner {
                let cfg = self
                    .base
                    .with_value(&self.axis1.key, v1.clone())
                    .and_then(|c| match (v2, &self.axis2) {
                        (Some(v), Some(a)) => c.with_value(&a.key, (*v).clone()),
                        _ => Ok(c),
                    });
                out.push(cfg.and_then(|c| c.validate().map(|_| c)));
            }
        }
        out
    }
}

/// One line of a sweep result table. `seed` is a number for single runs and
/// `mean` for the per-grid-point average.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub config_hash: String,
    pub strategy: String,
    pub rho: f64,
    pub rho_i: f64,
    pub rho_d: f64,
    pub power_dbm: f64,
    pub fading_label: String,
    pub seed: String,
    pub d2d_throughput: Option<f64>,
    pub p_det: Option<f64>,
    pub efficiency: Option<f64>,
    pub p_det_std: Option<f64>,
    pub d2d_throughput_std: Option<f64>,
    pub n_seeds: usize,
    pub trace_hash: String,
    pub status: String,
}

impl ResultRow {
    fn describe(cfg: &SimConfig, seed: String) -> Self {
        Self {
            config_hash: cfg.config_hash(),
            strategy: cfg.strategy.kind.as_str().to_string(),
            rho: cfg.strategy.rho,
            rho_i: cfg.strategy.rho_i,
            rho_d: cfg.strategy.rho_d,
            power_dbm: cfg.strategy.power_dbm,
            fading_label: cfg.channel.fading.as_str().to_string(),
            seed,
            d2d_throughput: None,
            p_det: None,
            efficiency: None,
            p_det_std: None,
            d2d_throughput_std: None,
            n_seeds: 0,
            trace_hash: String::new(),
            status: String::new(),
        }
    }

    pub fn is_mean(&self) -> bool {
        self.seed == MEAN_SEED
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

pub fn run_one(cfg: &SimConfig) -> ResultRow {
    let mut row = ResultRow::describe(cfg, cfg.seed.to_string());
    row.n_seeds = 1;
    match run(cfg) {
        Ok(r) => {
            row.d2d_throughput = Some(r.quality.d2d_rel_throughput);
            row.p_det = Some(r.quality.p_det);
            row.efficiency = r.quality.efficiency;
            row.trace_hash = r.trace_hash();
            row.status = "ok".into();
        }
        Err(e) => {
            log::warn!("run {} seed {} aborted: {e}", row.config_hash, cfg.seed);
            row.status = format!("error: {e}");
        }
    }
    row
}

fn mean_row(cfg: &SimConfig, raw: &[&ResultRow]) -> ResultRow {
    let mut row = ResultRow::describe(cfg, MEAN_SEED.to_string());
    let ok: Vec<&&ResultRow> = raw.iter().filter(|r| r.is_ok()).collect();
    row.n_seeds = ok.len();
    if ok.is_empty() {
        row.status = "error: no successful runs".into();
        return row;
    }
    let p: Vec<f64> = ok.iter().filter_map(|r| r.p_det).collect();
    let t: Vec<f64> = ok.iter().filter_map(|r| r.d2d_throughput).collect();
    let (p_mean, p_std) = mean_and_sample_std(&p);
    let (t_mean, t_std) = mean_and_sample_std(&t);
    row.p_det = Some(p_mean);
    row.d2d_throughput = Some(t_mean);
    row.efficiency = efficiency(p_mean, t_mean).ok();
    row.p_det_std = Some(p_std);
    row.d2d_throughput_std = Some(t_std);
    row.status = if ok.len() == raw.len() {
        "ok".into()
    } else {
        "partial".into()
    };
    row
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    /// Raw rows in grid-then-seed order, followed by one mean row per grid
    /// point.
    pub rows: Vec<ResultRow>,
    pub aborted: usize,
    pub reused: usize,
}

impl SweepOutcome {
    pub fn raw(&self) -> impl Iterator<Item = &ResultRow> {
        self.rows.iter().filter(|r| !r.is_mean())
    }

    pub fn means(&self) -> impl Iterator<Item = &ResultRow> {
        self.rows.iter().filter(|r| r.is_mean())
    }
}

/// Runs every (grid point, seed) on a pool of `workers` threads. Rows in
/// `previous` with status ok are reused by (config hash, seed).
pub fn run_sweep(spec: &SweepSpec, workers: usize, previous: &[ResultRow]) -> Result<SweepOutcome> {
    spec.validate()?;
    let reusable: HashMap<(String, String), &ResultRow> = previous
        .iter()
        .filter(|r| !r.is_mean() && r.is_ok())
        .map(|r| ((r.config_hash.clone(), r.seed.clone()), r))
        .collect();

    let grid = spec.grid();
    enum Job<'a> {
        Run(SimConfig),
        Reuse(&'a ResultRow),
        Broken(ResultRow),
    }
    let mut jobs = Vec::new();
    for point in &grid {
        for &seed in &spec.seeds {
            let job = match point {
                Ok(cfg) => {
                    let cfg = SimConfig {
                        seed,
                        ..cfg.clone()
                    };
                    match reusable.get(&(cfg.config_hash(), seed.to_string())) {
                        Some(row) => Job::Reuse(row),
                        None => Job::Run(cfg),
                    }
                }
                Err(e) => {
                    let mut row = ResultRow::describe(&spec.base, seed.to_string());
                    row.status = format!("error: {e}");
                    Job::Broken(row)
                }
            };
            jobs.push(job);
        }
    }
    let reused = jobs.iter().filter(|j| matches!(j, Job::Reuse(_))).count();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::config(format!("worker pool: {e}")))?;
    let raw: Vec<ResultRow> = pool.install(|| {
        jobs.par_iter()
            .map(|job| match job {
                Job::Run(cfg) => run_one(cfg),
                Job::Reuse(row) => (*row).clone(),
                Job::Broken(row) => row.clone(),
            })
            .collect()
    });

    let n_seeds = spec.seeds.len();
    let mut rows = raw.clone();
    for (point, chunk) in grid.iter().zip(raw.chunks(n_seeds)) {
        let refs: Vec<&ResultRow> = chunk.iter().collect();
        match point {
            Ok(cfg) => rows.push(mean_row(cfg, &refs)),
            Err(e) => {
                let mut row = ResultRow::describe(&spec.base, MEAN_SEED.to_string());
                row.status = format!("error: {e}");
                rows.push(row);
            }
        }
    }
    let aborted = raw.iter().filter(|r| !r.is_ok()).count();
    Ok(SweepOutcome {
        rows,
        aborted,
        reused,
    })
}

pub fn write_rows<W: Write>(rows: &[ResultRow], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush().map_err(|e| Error::io("<results>", e))?;
    Ok(())
}

pub fn read_rows<R: Read>(r: R) -> Result<Vec<ResultRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    rdr.deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

pub fn read_rows_file(path: &Path) -> Result<Vec<ResultRow>> {
    read_rows(File::open(path).map_err(|e| Error::io(path, e))?)
}

pub fn write_rows_file(rows: &[ResultRow], path: &Path) -> Result<()> {
    write_rows(rows, File::create(path).map_err(|e| Error::io(path, e))?)
}
