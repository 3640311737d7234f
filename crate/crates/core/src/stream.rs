//! GoP-structured video source packetized into fixed-size transport-stream
//! packets, and the frame-type preamble events derived from it.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// MPEG-TS packet size in bytes.
pub const TS_PACKET_SIZE: usize = 188;

/// Frame class as seen by the interference strategy. B and P frames are
/// both differential.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FrameType {
    #[serde(rename = "I")]
    I,
    #[serde(rename = "D")]
    Diff,
}

impl FrameType {
    pub fn as_str(self) -> &'static str {
        match self {
            FrameType::I => "I",
            FrameType::Diff => "D",
        }
    }
}

impl std::fmt::Display for FrameType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StreamConfig {
    pub gop_size: usize,
    /// Frame pattern of one GoP over `{I, P, B}`. When absent, an I-frame
    /// followed by `gop_size - 1` P-frames.
    pub gop_pattern: Option<String>,
    pub frame_rate: f64,
    pub packets_per_i: usize,
    pub packets_per_diff: usize,
    pub duration_s: f64,
}

impl Default for StreamConfig {
    fn default() -> Self {
        Self {
            gop_size: 128,
            gop_pattern: None,
            frame_rate: 30.0,
            packets_per_i: 30,
            packets_per_diff: 5,
            duration_s: 60.0,
        }
    }
}

impl StreamConfig {
    /// Per-frame types of one GoP after validating the pattern.
    pub fn gop_frame_types(&self) -> Result<Vec<FrameType>> {
        if self.gop_size == 0 {
            return Err(Error::config("stream.gop_size must be at least 1"));
        }
        let pattern = match &self.gop_pattern {
            Some(p) => p.clone(),
            None => {
                let mut p = String::with_capacity(self.gop_size);
                p.push('I');
                p.extend(std::iter::repeat_n('P', self.gop_size - 1));
                p
            }
        };
        if pattern.chars().count() != self.gop_size {
            return Err(Error::config(format!(
                "stream.gop_pattern has length {} but gop_size is {}",
                pattern.chars().count(),
                self.gop_size
            )));
        }
        let mut types = Vec::with_capacity(self.gop_size);
        for (i, c) in pattern.chars().enumerate() {
            let ty = match c {
                'I' => FrameType::I,
                'P' | 'B' => FrameType::Diff,
                other => {
                    return Err(Error::config(format!(
                        "stream.gop_pattern: illegal frame symbol {other:?} at position {i}"
                    )))
                }
            };
            if (i == 0) != (ty == FrameType::I) {
                return Err(Error::config(
                    "stream.gop_pattern must start with I and contain exactly one I",
                ));
            }
            types.push(ty);
        }
        Ok(types)
    }

    pub fn validate(&self) -> Result<()> {
        self.gop_frame_types()?;
        if !(self.frame_rate > 0.0 && self.frame_rate.is_finite()) {
            return Err(Error::config("stream.frame_rate must be positive"));
        }
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(Error::config("stream.duration_s must be positive"));
        }
        if self.packets_per_diff == 0 || self.packets_per_i < self.packets_per_diff {
            return Err(Error::config(
                "stream packet counts must satisfy packets_per_i >= packets_per_diff >= 1",
            ));
        }
        Ok(())
    }

    /// Frames released before the end of the stream.
    pub fn total_frames(&self) -> usize {
        (self.duration_s * self.frame_rate - 1e-9).ceil().max(0.0) as usize
    }

    /// Closed-form packet count for `n_gops` whole GoPs.
    pub fn packets_per_gop(&self) -> usize {
        self.packets_per_i + (self.gop_size - 1) * self.packets_per_diff
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PacketEntry {
    pub packet_index: usize,
    pub frame_index: usize,
    pub frame_type: FrameType,
    pub release_time: f64,
}

/// Ordered packet-to-frame mapping of the whole stream.
#[derive(Debug, Clone, PartialEq)]
pub struct PacketMap {
    pub entries: Vec<PacketEntry>,
    pub packet_size: usize,
    pub gop_size: usize,
    /// First packet index of each frame, plus a trailing sentinel.
    frame_starts: Vec<usize>,
}

impl PacketMap {
    fn from_entries(entries: Vec<PacketEntry>, gop_size: usize) -> Result<Self> {
        let mut frame_starts = Vec::new();
        for (i, e) in entries.iter().enumerate() {
            if e.packet_index != i {
                return Err(Error::Consistency(format!(
                    "packet index {} at position {i}: indices must be gapless from 0",
                    e.packet_index
                )));
            }
            if i > 0 {
                let prev = &entries[i - 1];
                if e.release_time < prev.release_time {
                    return Err(Error::Consistency(format!(
                        "packet {i}: release times must be non-decreasing"
                    )));
                }
                if e.frame_index == prev.frame_index {
                    if e.frame_type != prev.frame_type {
                        return Err(Error::Consistency(format!(
                            "packet {i}: frame {} changes type mid-frame",
                            e.frame_index
                        )));
                    }
                    continue;
                }
                if e.frame_index != prev.frame_index + 1 {
                    return Err(Error::Consistency(format!(
                        "packet {i}: frame {} is not contiguous with frame {}",
                        e.frame_index, prev.frame_index
                    )));
                }
            } else if e.frame_index != 0 {
                return Err(Error::Consistency(
                    "first packet must belong to frame 0".into(),
                ));
            }
            frame_starts.push(i);
        }
        frame_starts.push(entries.len());
        if gop_size == 0 {
            return Err(Error::Consistency("gop_size must be at least 1".into()));
        }
        Ok(Self {
            entries,
            packet_size: TS_PACKET_SIZE,
            gop_size,
            frame_starts,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_frames(&self) -> usize {
        self.frame_starts.len() - 1
    }

    /// Packet index range of `frame`.
    pub fn frame_packets(&self, frame: usize) -> std::ops::Range<usize> {
        self.frame_starts[frame]..self.frame_starts[frame + 1]
    }

    pub fn frame_type(&self, frame: usize) -> FrameType {
        self.entries[self.frame_starts[frame]].frame_type
    }

    pub fn gop_of(&self, frame: usize) -> usize {
        frame / self.gop_size
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["packet_idx", "frame_idx", "frame_type", "release_time_s"])?;
        for e in &self.entries {
            wtr.write_record([
                e.packet_index.to_string(),
                e.frame_index.to_string(),
                e.frame_type.as_str().to_string(),
                format!("{}", e.release_time),
            ])?;
        }
        wtr.flush().map_err(|e| Error::io("<packet map>", e))?;
        Ok(())
    }

    /// Reads a packet map CSV. GoP boundaries are inferred from I-frames,
    /// which requires constant GoP size.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            packet_idx: usize,
            frame_idx: usize,
            frame_type: FrameType,
            release_time_s: f64,
        }
        let mut rdr = csv::Reader::from_reader(r);
        let mut entries = Vec::new();
        for row in rdr.deserialize() {
            let row: Row = row?;
            entries.push(PacketEntry {
                packet_index: row.packet_idx,
                frame_index: row.frame_idx,
                frame_type: row.frame_type,
                release_time: row.release_time_s,
            });
        }
        let i_frames: Vec<usize> = {
            let mut v: Vec<usize> = entries
                .iter()
                .filter(|e| e.frame_type == FrameType::I)
                .map(|e| e.frame_index)
                .collect();
            v.dedup();
            v
        };
        let gop_size = match i_frames.as_slice() {
            [] => return Err(Error::Consistency("packet map contains no I-frame".into())),
            [0] => entries.last().map_or(1, |e| e.frame_index + 1),
            [0, second, ..] => *second,
            _ => {
                return Err(Error::Consistency(
                    "packet map must start with an I-frame".into(),
                ))
            }
        };
        if i_frames.iter().enumerate().any(|(k, &f)| f != k * gop_size) {
            return Err(Error::Consistency(
                "packet map GoP size is not constant".into(),
            ));
        }
        Self::from_entries(entries, gop_size)
    }
}

pub fn build_packet_map(cfg: &StreamConfig) -> Result<PacketMap> {
    cfg.validate()?;
    let gop = cfg.gop_frame_types()?;
    let frames = cfg.total_frames();
    let mut entries = Vec::new();
    for frame in 0..frames {
        let frame_type = gop[frame % cfg.gop_size];
        let count = match frame_type {
            FrameType::I => cfg.packets_per_i,
            FrameType::Diff => cfg.packets_per_diff,
        };
        let release_time = frame as f64 / cfg.frame_rate;
        for _ in 0..count {
            entries.push(PacketEntry {
                packet_index: entries.len(),
                frame_index: frame,
                frame_type,
                release_time,
            });
        }
    }
    PacketMap::from_entries(entries, cfg.gop_size)
}

/// Uplink control message announcing the type of the frames that follow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreambleEvent {
    pub time: f64,
    pub frame_type: FrameType,
}

/// Nominal preamble events: one at t=0 and one wherever the released frame
/// type changes.
pub fn preamble_schedule(map: &PacketMap) -> Vec<PreambleEvent> {
    let mut events: Vec<PreambleEvent> = Vec::new();
    for e in &map.entries {
        match events.last() {
            Some(last) if last.frame_type == e.frame_type => {}
            Some(_) => events.push(PreambleEvent {
                time: e.release_time,
                frame_type: e.frame_type,
            }),
            None => events.push(PreambleEvent {
                time: 0.0,
                frame_type: e.frame_type,
            }),
        }
    }
    events
}
