//! Pairs FP results with the FDTP curve at equal D2D throughput.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sweep::ResultRow;

pub const NO_COMPARISON: &str = "no_comparison";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub fading_label: String,
    pub power_dbm: f64,
    pub fp_rho: f64,
    pub d2d_throughput: f64,
    pub fp_p_det: f64,
    pub fdtp_p_det: Option<f64>,
    pub delta_p_det: Option<f64>,
    /// Half-width of the normal-approximation 95% interval on the delta.
    pub ci95: Option<f64>,
    pub status: String,
}

#[derive(Debug, Clone, Copy)]
struct CurvePoint {
    thr: f64,
    p_det: f64,
    std: f64,
    n: usize,
}

fn seed_set(rows: &[ResultRow]) -> BTreeSet<&str> {
    rows.iter()
        .filter(|r| !r.is_mean())
        .map(|r| r.seed.as_str())
        .collect()
}

fn label_set(rows: &[ResultRow]) -> BTreeSet<&str> {
    rows.iter().map(|r| r.fading_label.as_str()).collect()
}

type GroupKey = (String, u64);

fn key(r: &ResultRow) -> GroupKey {
    (r.fading_label.clone(), r.power_dbm.to_bits())
}

/// Linear interpolation of the curve at `x`, or `None` outside its range.
fn interpolate(curve: &[CurvePoint], x: f64) -> Option<(f64, f64, usize)> {
    let first = curve.first()?;
    let last = curve.last()?;
    if x < first.thr || x > last.thr {
        return None;
    }
    for w in curve.windows(2) {
        let (a, b) = (w[0], w[1]);
        if x >= a.thr && x <= b.thr {
            if b.thr == a.thr {
                return Some((a.p_det, a.std, a.n));
            }
            let f = (x - a.thr) / (b.thr - a.thr);
            return Some((
                a.p_det + f * (b.p_det - a.p_det),
                a.std + f * (b.std - a.std),
                a.n.min(b.n),
            ));
        }
    }
    Some((first.p_det, first.std, first.n))
}

pub fn compare_strategies(fp: &[ResultRow], fdtp: &[ResultRow]) -> Result<Vec<Comparison>> {
    if seed_set(fp) != seed_set(fdtp) {
        return Err(Error::config(
            "FP and FDTP tables were run with different seed sets",
        ));
    }
    if label_set(fp) != label_set(fdtp) {
        return Err(Error::config(
            "FP and FDTP tables cover different fading labels",
        ));
    }

    let mut curves: BTreeMap<GroupKey, Vec<CurvePoint>> = BTreeMap::new();
    for r in fdtp.iter().filter(|r| r.is_mean() && r.status != "error") {
        if let (Some(thr), Some(p_det)) = (r.d2d_throughput, r.p_det) {
            curves.entry(key(r)).or_default().push(CurvePoint {
                thr,
                p_det,
                std: r.p_det_std.unwrap_or(0.0),
                n: r.n_seeds.max(1),
            });
        }
    }
    for c in curves.values_mut() {
        c.sort_by(|a, b| a.thr.total_cmp(&b.thr));
    }

    let mut out = Vec::new();
    for r in fp.iter().filter(|r| r.is_mean()) {
        let (Some(thr), Some(fp_p)) = (r.d2d_throughput, r.p_det) else {
            continue;
        };
        let hit = curves.get(&key(r)).and_then(|c| interpolate(c, thr));
        let (fdtp_p_det, delta_p_det, ci95, status) = match hit {
            Some((p, std, n)) => {
                let fp_std = r.p_det_std.unwrap_or(0.0);
                let fp_n = r.n_seeds.max(1) as f64;
                let ci = 1.96 * (fp_std * fp_std / fp_n + std * std / n as f64).sqrt();
                (Some(p), Some(p - fp_p), Some(ci), "ok".to_string())
            }
            None => (None, None, None, NO_COMPARISON.to_string()),
        };
        out.push(Comparison {
            fading_label: r.fading_label.clone(),
            power_dbm: r.power_dbm,
            fp_rho: r.rho,
            d2d_throughput: thr,
            fp_p_det: fp_p,
            fdtp_p_det,
            delta_p_det,
            ci95,
            status,
        });
    }
    Ok(out)
}

pub fn write_comparisons<W: Write>(rows: &[Comparison], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush().map_err(|e| Error::io("<comparison>", e))?;
    Ok(())
}
