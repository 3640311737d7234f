//! Frame damage under GoP error propagation, and the quality metrics derived
//! from a loss trace: the intact-frame detection proxy, relative D2D
//! throughput and D2D efficiency.

use std::collections::BTreeSet;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::strategy::D2dSlotDecision;
use crate::stream::{FrameType, PacketMap};

/// Tag carried by every report: p_det is the intact-frame proxy, not an
/// object-detection measurement.
pub const METRIC_TAG: &str = "proxy";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VideoRecord {
    pub packet_index: usize,
    pub slot: u64,
    pub delivered: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LossTrace {
    pub video: Vec<VideoRecord>,
    pub d2d: Vec<D2dSlotDecision>,
    pub total_slots: u64,
}

impl LossTrace {
    pub fn delivered(&self) -> usize {
        self.video.iter().filter(|v| v.delivered).count()
    }

    pub fn lost(&self) -> usize {
        self.video.len() - self.delivered()
    }

    /// `slot,packet_idx,frame_type,delivered`
    pub fn write_video_csv<W: Write>(&self, map: &PacketMap, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["slot", "packet_idx", "frame_type", "delivered"])?;
        for v in &self.video {
            let entry = map.entries.get(v.packet_index).ok_or_else(|| {
                Error::Consistency(format!(
                    "packet {} is not in the packet map",
                    v.packet_index
                ))
            })?;
            wtr.write_record([
                v.slot.to_string(),
                v.packet_index.to_string(),
                entry.frame_type.as_str().to_string(),
                u8::from(v.delivered).to_string(),
            ])?;
        }
        wtr.flush().map_err(|e| Error::io("<loss trace>", e))?;
        Ok(())
    }

    /// `slot,transmitted,succeeded`
    pub fn write_d2d_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["slot", "transmitted", "succeeded"])?;
        for d in &self.d2d {
            wtr.write_record([
                d.slot.to_string(),
                u8::from(d.transmitted).to_string(),
                u8::from(d.succeeded).to_string(),
            ])?;
        }
        wtr.flush().map_err(|e| Error::io("<d2d trace>", e))?;
        Ok(())
    }

    /// Reads the video part of a loss trace, checking frame types against
    /// `map`.
    pub fn read_video_csv<R: Read>(r: R, map: &PacketMap) -> Result<Vec<VideoRecord>> {
        #[derive(Deserialize)]
        struct Row {
            slot: u64,
            packet_idx: usize,
            frame_type: FrameType,
            delivered: u8,
        }
        let mut rdr = csv::Reader::from_reader(r);
        let mut out = Vec::new();
        for row in rdr.deserialize() {
            let row: Row = row?;
            let entry = map.entries.get(row.packet_idx).ok_or_else(|| {
                Error::Consistency(format!(
                    "packet {} is not in the packet map",
                    row.packet_idx
                ))
            })?;
            if entry.frame_type != row.frame_type {
                return Err(Error::Consistency(format!(
                    "packet {}: trace says {} but the map says {}",
                    row.packet_idx, row.frame_type, entry.frame_type
                )));
            }
            out.push(VideoRecord {
                packet_index: row.packet_idx,
                slot: row.slot,
                delivered: row.delivered != 0,
            });
        }
        Ok(out)
    }

    pub fn read_d2d_csv<R: Read>(r: R) -> Result<Vec<D2dSlotDecision>> {
        #[derive(Deserialize)]
        struct Row {
            slot: u64,
            transmitted: u8,
            succeeded: u8,
        }
        let mut rdr = csv::Reader::from_reader(r);
        let mut out = Vec::new();
        for row in rdr.deserialize() {
            let row: Row = row?;
            if row.succeeded != 0 && row.transmitted == 0 {
                return Err(Error::Consistency(format!(
                    "slot {}: D2D success without transmission",
                    row.slot
                )));
            }
            out.push(D2dSlotDecision {
                slot: row.slot,
                transmitted: row.transmitted != 0,
                succeeded: row.succeeded != 0,
            });
        }
        Ok(out)
    }
}

/// How damage to a differential frame spreads inside its GoP.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DamageRule {
    /// A damaged differential frame damages only itself.
    #[default]
    Isolated,
    /// A damaged differential frame also damages every later frame of its
    /// GoP.
    Chain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameStatus {
    pub frame_index: usize,
    pub frame_type: FrameType,
    pub directly_damaged: bool,
    pub effectively_damaged: bool,
}

pub fn propagate_damage(
    trace: &LossTrace,
    map: &PacketMap,
    rule: DamageRule,
) -> Result<Vec<FrameStatus>> {
    let mut seen = vec![false; map.len()];
    let mut lost = vec![false; map.len()];
    for v in &trace.video {
        let Some(slot) = seen.get_mut(v.packet_index) else {
            return Err(Error::Consistency(format!(
                "packet {} in the trace is absent from the packet map",
                v.packet_index
            )));
        };
        if *slot {
            return Err(Error::Consistency(format!(
                "packet {} appears twice in the trace",
                v.packet_index
            )));
        }
        *slot = true;
        lost[v.packet_index] = !v.delivered;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::Consistency(format!(
            "packet {missing} of the packet map is missing from the trace"
        )));
    }

    let mut statuses: Vec<FrameStatus> = (0..map.total_frames())
        .map(|f| {
            let direct = map.frame_packets(f).any(|p| lost[p]);
            FrameStatus {
                frame_index: f,
                frame_type: map.frame_type(f),
                directly_damaged: direct,
                effectively_damaged: direct,
            }
        })
        .collect();

    for gop in statuses.chunks_mut(map.gop_size) {
        let i_lost = gop[0].frame_type == FrameType::I && gop[0].directly_damaged;
        let mut chain = false;
        for s in gop.iter_mut() {
            if i_lost || chain {
                s.effectively_damaged = true;
            }
            if rule == DamageRule::Chain && s.directly_damaged {
                chain = true;
            }
        }
    }
    Ok(statuses)
}

pub fn detection_probability(statuses: &[FrameStatus]) -> Result<f64> {
    if statuses.is_empty() {
        return Err(Error::Domain(
            "detection probability of an empty frame set".into(),
        ));
    }
    let intact = statuses.iter().filter(|s| !s.effectively_damaged).count();
    Ok(intact as f64 / statuses.len() as f64)
}

pub fn relative_throughput(trace: &LossTrace) -> Result<f64> {
    if trace.total_slots == 0 {
        return Err(Error::Domain("relative throughput over zero slots".into()));
    }
    let ok = trace.d2d.iter().filter(|d| d.succeeded).count();
    Ok(ok as f64 / trace.total_slots as f64)
}

pub fn efficiency(p_det: f64, throughput: f64) -> Result<f64> {
    if throughput >= 1.0 {
        return Err(Error::UndefinedEfficiency);
    }
    if !(0.0..1.0).contains(&throughput) {
        return Err(Error::Domain(format!(
            "throughput {throughput} outside [0, 1)"
        )));
    }
    Ok(p_det / (1.0 - throughput))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GopDamage {
    pub gop_index: usize,
    pub damaged_frames: usize,
    pub i_frame_lost: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub p_det: f64,
    pub d2d_rel_throughput: f64,
    /// `None` when the throughput is 1 and efficiency is undefined.
    pub efficiency: Option<f64>,
    pub per_gop: Vec<GopDamage>,
    pub metric: String,
}

impl QualityReport {
    pub fn from_statuses(
        statuses: &[FrameStatus],
        gop_size: usize,
        d2d_rel_throughput: f64,
    ) -> Result<Self> {
        let p_det = detection_probability(statuses)?;
        let per_gop = statuses
            .chunks(gop_size)
            .enumerate()
            .map(|(gop_index, frames)| GopDamage {
                gop_index,
                damaged_frames: frames.iter().filter(|s| s.effectively_damaged).count(),
                i_frame_lost: frames[0].frame_type == FrameType::I && frames[0].directly_damaged,
            })
            .collect();
        Ok(Self {
            p_det,
            d2d_rel_throughput,
            efficiency: efficiency(p_det, d2d_rel_throughput).ok(),
            per_gop,
            metric: METRIC_TAG.to_string(),
        })
    }

    pub fn evaluate(trace: &LossTrace, map: &PacketMap, rule: DamageRule) -> Result<Self> {
        let statuses = propagate_damage(trace, map, rule)?;
        Self::from_statuses(&statuses, map.gop_size, relative_throughput(trace)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GopDamageMean {
    pub gop_index: usize,
    pub damaged_frames: f64,
    pub i_frame_loss_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub p_det: f64,
    pub d2d_rel_throughput: f64,
}

/// Seed-averaged quality of one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualitySummary {
    pub p_det: f64,
    pub d2d_rel_throughput: f64,
    pub efficiency: Option<f64>,
    pub per_gop: Vec<GopDamageMean>,
    pub metric: String,
    pub seeds: Vec<u64>,
    /// Sample standard deviations across seeds.
    pub stddev: Spread,
}

pub fn mean_and_sample_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl QualitySummary {
    pub fn aggregate(runs: &[(u64, &QualityReport)]) -> Result<Self> {
        if runs.is_empty() {
            return Err(Error::Domain("no runs to aggregate".into()));
        }
        let p: Vec<f64> = runs.iter().map(|(_, r)| r.p_det).collect();
        let t: Vec<f64> = runs.iter().map(|(_, r)| r.d2d_rel_throughput).collect();
        let (p_det, p_std) = mean_and_sample_std(&p);
        let (thr, t_std) = mean_and_sample_std(&t);
        let n_gops = runs.iter().map(|(_, r)| r.per_gop.len()).max().unwrap_or(0);
        let per_gop = (0..n_gops)
            .map(|g| {
                let (mut frames, mut lost, mut n) = (0.0, 0.0, 0.0);
                for (_, r) in runs {
                    if let Some(d) = r.per_gop.get(g) {
                        frames += d.damaged_frames as f64;
                        lost += f64::from(u8::from(d.i_frame_lost));
                        n += 1.0;
                    }
                }
                GopDamageMean {
                    gop_index: g,
                    damaged_frames: frames / n,
                    i_frame_loss_rate: lost / n,
                }
            })
            .collect();
        let seeds: BTreeSet<u64> = runs.iter().map(|(s, _)| *s).collect();
        Ok(Self {
            p_det,
            d2d_rel_throughput: thr,
            efficiency: efficiency(p_det, thr).ok(),
            per_gop,
            metric: METRIC_TAG.to_string(),
            seeds: seeds.into_iter().collect(),
            stddev: Spread {
                p_det: p_std,
                d2d_rel_throughput: t_std,
            },
        })
    }
}
