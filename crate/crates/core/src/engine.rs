//! Subframe-by-subframe simulation of the video uplink and the D2D pair.
//!
//! Per subframe: the UE announces a new frame type if its head-of-line
//! packet starts one, due DCIs update the D2D access mode, the D2D
//! transmitter draws, SINRs are computed, the eNodeB schedules with the MCS
//! of the delayed CQI, PDUs are decoded, and the outcome is logged.
//!
//! Packets of a new frame-type run are held until the DCI relaying their
//! preamble has reached the D2D pair, so the preamble always precedes the
//! frames it announces.

use std::collections::VecDeque;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::{
    earfcn_to_uplink_freq, friis_path_loss, noise_floor, sinr_at_d2drx, sinr_at_enb, LinkBudget,
};
use crate::config::{CqiInterference, Resources, SimConfig};
use crate::error::{Error, Result};
use crate::fading::FadingTrace;
use crate::mac::{decode_pdu, schedule_subframe, LinkAdaptation, McsTable};
use crate::quality::{LossTrace, QualityReport, VideoRecord};
use crate::rng::{DrawStream, Purpose};
use crate::strategy::{d2d_success, fdtp_update_mode, AccessMode, D2dSlotDecision, Mode};
use crate::stream::{build_packet_map, FrameType, PacketMap, PreambleEvent};

/// Slot counts by D2D access mode and the frame type on the uplink.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimelineSummary {
    pub low_i: u64,
    pub low_diff: u64,
    pub low_idle: u64,
    pub high_i: u64,
    pub high_diff: u64,
    pub high_idle: u64,
}

impl TimelineSummary {
    fn record(&mut self, mode: Mode, in_flight: Option<FrameType>) {
        let c = match (mode, in_flight) {
            (Mode::Low, Some(FrameType::I)) => &mut self.low_i,
            (Mode::Low, Some(FrameType::Diff)) => &mut self.low_diff,
            (Mode::Low, None) => &mut self.low_idle,
            (Mode::High, Some(FrameType::I)) => &mut self.high_i,
            (Mode::High, Some(FrameType::Diff)) => &mut self.high_diff,
            (Mode::High, None) => &mut self.high_idle,
        };
        *c += 1;
    }

    pub fn low(&self) -> u64 {
        self.low_i + self.low_diff + self.low_idle
    }

    pub fn high(&self) -> u64 {
        self.high_i + self.high_diff + self.high_idle
    }
}

/// Everything that happened in one subframe.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotRecord {
    pub slot: u64,
    pub mode: Mode,
    pub d2d: D2dSlotDecision,
    pub cqi: u8,
    pub mcs: u8,
    pub sinr_enb_db: f64,
    pub sinr_d2d_db: f64,
    pub scheduled: Vec<usize>,
    pub frame_type: Option<FrameType>,
    pub delivered: bool,
}

#[derive(Debug, Clone)]
pub struct SimResult {
    pub map: Arc<PacketMap>,
    pub loss_trace: LossTrace,
    pub quality: QualityReport,
    pub timeline_summary: TimelineSummary,
    /// Preambles as actually sent by the UE.
    pub preambles: Vec<PreambleEvent>,
}

impl SimResult {
    /// Hex SHA-256 over the CSV form of the loss trace.
    pub fn trace_hash(&self) -> String {
        trace_hash(&self.loss_trace, &self.map)
    }
}

pub fn trace_hash(trace: &LossTrace, map: &PacketMap) -> String {
    let mut buf = Vec::new();
    trace
        .write_video_csv(map, &mut buf)
        .expect("trace matches its packet map");
    trace.write_d2d_csv(&mut buf).expect("in-memory write");
    hex::encode(Sha256::digest(&buf))
}

struct Links {
    ue_enb: f64,
    d2d_enb: f64,
    d2d_pair: f64,
    ue_d2drx: f64,
}

/// Fading sample offsets that decorrelate the four links sharing one trace.
struct FadingOffsets {
    ue_enb: usize,
    d2d_enb: usize,
    d2d_pair: usize,
    ue_d2drx: usize,
}

#[derive(Debug, Clone)]
pub struct SimState {
    pub slot: u64,
    pub next_packet: usize,
    pub announced: Option<(FrameType, u64)>,
    pub pending_dci: VecDeque<(u64, FrameType)>,
    pub mode: AccessMode,
    pub trace: LossTrace,
    pub timeline: TimelineSummary,
    pub preambles: Vec<PreambleEvent>,
}

pub struct Simulation {
    cfg: SimConfig,
    map: Arc<PacketMap>,
    release_slot: Vec<u64>,
    fading: Arc<FadingTrace>,
    table: Arc<McsTable>,
    path_loss: Links,
    offsets: FadingOffsets,
    noise_dbm: f64,
    total_slots: u64,
    draws: DrawStream,
    link_adaptation: LinkAdaptation,
    state: SimState,
}

impl Simulation {
    pub fn new(cfg: &SimConfig) -> Result<Self> {
        cfg.validate()?;
        let resources = cfg.resources()?;
        let map = Arc::new(build_packet_map(&cfg.stream)?);
        Self::with_parts(cfg, map, resources)
    }

    /// Builds a simulation around an already-built packet map and loaded
    /// resources, which sweeps share across runs.
    pub fn with_parts(cfg: &SimConfig, map: Arc<PacketMap>, resources: Resources) -> Result<Self> {
        cfg.validate()?;
        if map.is_empty() {
            return Err(Error::config("stream produces no packets"));
        }
        let freq = earfcn_to_uplink_freq(cfg.channel.earfcn)?;
        let t = &cfg.topology;
        let path_loss = Links {
            ue_enb: friis_path_loss(t.ue_enb_dist_m, freq)?,
            d2d_enb: friis_path_loss(t.d2dtx_enb_dist_m, freq)?,
            d2d_pair: friis_path_loss(t.d2d_pair_dist_m, freq)?,
            ue_d2drx: friis_path_loss(t.ue_d2drx_dist_m, freq)?,
        };
        let n = resources.fading.samples.len();
        let offsets = FadingOffsets {
            ue_enb: 0,
            d2d_enb: n / 4,
            d2d_pair: n / 2,
            ue_d2drx: 3 * n / 4,
        };
        let release_slot = map
            .entries
            .iter()
            .map(|e| (e.release_time / cfg.slot_len_s - 1e-9).ceil().max(0.0) as u64)
            .collect();
        let total_slots = cfg.subframes();
        Ok(Self {
            cfg: cfg.clone(),
            map,
            release_slot,
            fading: resources.fading,
            table: resources.mcs_table,
            path_loss,
            offsets,
            noise_dbm: noise_floor(cfg.channel.bandwidth_hz, cfg.channel.noise_figure_db),
            total_slots,
            draws: DrawStream::new(cfg.seed, Purpose::D2dAccess),
            link_adaptation: LinkAdaptation::new(cfg.mac.report_delay)?,
            state: SimState {
                slot: 0,
                next_packet: 0,
                announced: None,
                pending_dci: VecDeque::new(),
                mode: AccessMode::default(),
                trace: LossTrace {
                    video: Vec::with_capacity(0),
                    d2d: Vec::with_capacity(total_slots as usize),
                    total_slots,
                },
                timeline: TimelineSummary::default(),
                preambles: Vec::new(),
            },
        })
    }

    pub fn map(&self) -> &Arc<PacketMap> {
        &self.map
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn total_slots(&self) -> u64 {
        self.total_slots
    }

    pub fn is_done(&self) -> bool {
        self.state.slot >= self.total_slots
    }

    fn budget(&self, tx: f64, path_loss: f64, offset: usize, slot: u64) -> LinkBudget {
        LinkBudget::new(
            tx,
            path_loss,
            self.fading.gain_db(slot, self.cfg.slot_len_s, offset),
        )
    }

    /// Advances one subframe.
    pub fn step(&mut self) -> Result<SlotRecord> {
        let t = self.state.slot;
        let dci_delay = self.cfg.strategy.dci_delay;
        let n_packets = self.map.len();

        // (1) preamble for a new frame-type run, then due DCIs
        let head = self.state.next_packet;
        if head < n_packets && self.release_slot[head] <= t {
            let ty = self.map.entries[head].frame_type;
            if self.state.announced.map(|(a, _)| a) != Some(ty) {
                self.state.announced = Some((ty, t));
                self.state.pending_dci.push_back((t, ty));
                self.state.preambles.push(PreambleEvent {
                    time: t as f64 * self.cfg.slot_len_s,
                    frame_type: ty,
                });
            }
        }
        while let Some(&(ev_slot, ty)) = self.state.pending_dci.front() {
            if t < ev_slot + dci_delay {
                break;
            }
            self.state.mode = fdtp_update_mode(self.state.mode, ev_slot, ty, t, dci_delay)?;
            self.state.pending_dci.pop_front();
        }
        let mode = self.state.mode.mode;

        // (2) D2D access
        let transmitted = self.cfg.strategy.decide(mode, self.draws.uniform(t));

        // (3) SINRs
        let ch = &self.cfg.channel;
        let power = self.cfg.strategy.power_dbm;
        let ue = self.budget(
            ch.ue_power_dbm,
            self.path_loss.ue_enb,
            self.offsets.ue_enb,
            t,
        );
        let d2d_at_enb = self.budget(power, self.path_loss.d2d_enb, self.offsets.d2d_enb, t);
        let d2d_link = self.budget(power, self.path_loss.d2d_pair, self.offsets.d2d_pair, t);
        let ue_at_d2drx = self.budget(
            ch.ue_power_dbm,
            self.path_loss.ue_d2drx,
            self.offsets.ue_d2drx,
            t,
        );
        let sinr_enb = sinr_at_enb(&ue, transmitted, &d2d_at_enb, self.noise_dbm);
        let measured = match self.cfg.mac.cqi_interference {
            CqiInterference::Composite => sinr_enb,
            CqiInterference::Excluded => sinr_at_enb(&ue, false, &d2d_at_enb, self.noise_dbm),
        };

        // (4) schedule with the delayed CQI
        let cqi = self.link_adaptation.measure(t, measured).cqi;
        let mcs = self.link_adaptation.mcs_for(t, &self.table);
        let mut run_end = head;
        if let Some((ty, announced_at)) = self.state.announced {
            if t >= announced_at + dci_delay {
                while run_end < n_packets
                    && self.map.entries[run_end].frame_type == ty
                    && self.release_slot[run_end] <= t
                {
                    run_end += 1;
                }
            }
        }
        let plan = schedule_subframe(
            t,
            t as f64 * self.cfg.slot_len_s,
            &self.map.entries[head..run_end],
            mcs,
            &self.table,
        );

        // (5) decode
        let delivered = decode_pdu(sinr_enb, mcs, &self.table);
        for &p in &plan.pdu_packet_indices {
            self.state.trace.video.push(VideoRecord {
                packet_index: p,
                slot: t,
                delivered,
            });
        }
        self.state.next_packet += plan.pdu_packet_indices.len();
        let frame_type = plan
            .pdu_packet_indices
            .first()
            .map(|&p| self.map.entries[p].frame_type);

        let lte_active = !plan.pdu_packet_indices.is_empty();
        let sinr_d2d = sinr_at_d2drx(&d2d_link, lte_active, &ue_at_d2drx, self.noise_dbm);
        let d2d = D2dSlotDecision {
            slot: t,
            transmitted,
            succeeded: d2d_success(transmitted, sinr_d2d, ch.d2d_threshold_db),
        };

        // (6) log
        self.state.trace.d2d.push(d2d);
        self.state.timeline.record(mode, frame_type);
        self.state.slot += 1;

        Ok(SlotRecord {
            slot: t,
            mode,
            d2d,
            cqi,
            mcs,
            sinr_enb_db: sinr_enb,
            sinr_d2d_db: sinr_d2d,
            scheduled: plan.pdu_packet_indices,
            frame_type,
            delivered: lte_active && delivered,
        })
    }

    /// Closes the run: packets still queued at the end are dropped.
    pub fn finish(mut self) -> Result<SimResult> {
        let end = self.total_slots;
        for p in self.state.next_packet..self.map.len() {
            self.state.trace.video.push(VideoRecord {
                packet_index: p,
                slot: end,
                delivered: false,
            });
        }
        let quality =
            QualityReport::evaluate(&self.state.trace, &self.map, self.cfg.quality.damage_rule)?;
        Ok(SimResult {
            map: self.map,
            loss_trace: self.state.trace,
            quality,
            timeline_summary: self.state.timeline,
            preambles: self.state.preambles,
        })
    }

    pub fn run_to_end(mut self) -> Result<SimResult> {
        while !self.is_done() {
            self.step()?;
        }
        self.finish()
    }
}

pub fn run(cfg: &SimConfig) -> Result<SimResult> {
    Simulation::new(cfg)?.run_to_end()
}
