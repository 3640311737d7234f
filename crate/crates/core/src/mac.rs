//! Uplink link adaptation at subframe granularity: SINR to CQI, delayed CQI
//! reports, CQI to MCS, per-subframe PDU capacity and threshold decoding.

use std::collections::VecDeque;
use std::io::{Read, Write};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stream::PacketEntry;

pub const MAX_CQI: u8 = 15;

/// Resource elements per RB pair available for data in one subframe.
pub const RE_PER_RB: f64 = 168.0;
pub const DEFAULT_RBS: f64 = 50.0;
/// Bits in one 188-byte transport-stream packet.
pub const PACKET_BITS: f64 = 1504.0;
/// Margin added to the Shannon SINR of each MCS row.
pub const THRESHOLD_MARGIN_DB: f64 = 2.0;

pub const BUNDLED_MCS_TABLE: &str = include_str!("../data/mcs_table_v1.csv");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McsRow {
    pub mcs: u8,
    pub eff: f64,
    pub sinr_thresh_db: f64,
    pub pdus_per_sf: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McsTable {
    rows: Vec<McsRow>,
}

impl McsTable {
    pub fn new(rows: Vec<McsRow>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::config("MCS table is empty"));
        }
        for (i, r) in rows.iter().enumerate() {
            if usize::from(r.mcs) != i {
                return Err(Error::config(format!(
                    "MCS table row {i} has index {}",
                    r.mcs
                )));
            }
            if i > 0 {
                let prev = &rows[i - 1];
                if r.sinr_thresh_db <= prev.sinr_thresh_db {
                    return Err(Error::config(format!(
                        "MCS table thresholds must strictly increase (row {i})"
                    )));
                }
                if r.pdus_per_sf < prev.pdus_per_sf {
                    return Err(Error::config(format!(
                        "MCS table capacities must not decrease (row {i})"
                    )));
                }
            }
        }
        if rows[0].pdus_per_sf < 1 {
            return Err(Error::config(
                "MCS 0 must carry at least one PDU per subframe",
            ));
        }
        Ok(Self { rows })
    }

    /// 29-row table over spectral efficiencies 0.15..=5.55: threshold is the
    /// Shannon SINR plus margin, capacity counts whole TS packets in 50 RBs
    /// (at least one).
    pub fn from_formula() -> Self {
        let rows = (0..29u8)
            .map(|i| {
                let eff = 0.15 + f64::from(i) * (5.55 - 0.15) / 28.0;
                McsRow {
                    mcs: i,
                    eff,
                    sinr_thresh_db: 10.0 * (2f64.powf(eff) - 1.0).log10() + THRESHOLD_MARGIN_DB,
                    pdus_per_sf: ((eff * DEFAULT_RBS * RE_PER_RB / PACKET_BITS).floor() as u32)
                        .max(1),
                }
            })
            .collect();
        Self::new(rows).expect("formula table is valid")
    }

    /// The versioned table shipped with the crate.
    pub fn bundled() -> &'static McsTable {
        static TABLE: OnceLock<McsTable> = OnceLock::new();
        TABLE.get_or_init(|| {
            McsTable::read_csv(BUNDLED_MCS_TABLE.as_bytes()).expect("bundled MCS table is valid")
        })
    }

    pub fn rows(&self) -> &[McsRow] {
        &self.rows
    }

    pub fn max_mcs(&self) -> u8 {
        (self.rows.len() - 1) as u8
    }

    pub fn row(&self, mcs: u8) -> &McsRow {
        &self.rows[usize::from(mcs)]
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            mcs: u8,
            eff: f64,
            sinr_thresh_db: f64,
            pdus_per_sf: u32,
        }
        let mut rdr = csv::Reader::from_reader(r);
        let mut rows = Vec::new();
        for row in rdr.deserialize() {
            let r: Row = row?;
            rows.push(McsRow {
                mcs: r.mcs,
                eff: r.eff,
                sinr_thresh_db: r.sinr_thresh_db,
                pdus_per_sf: r.pdus_per_sf,
            });
        }
        Self::new(rows)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["mcs", "eff", "sinr_thresh_db", "pdus_per_sf"])?;
        for r in &self.rows {
            wtr.write_record([
                r.mcs.to_string(),
                format!("{:.6}", r.eff),
                format!("{:.6}", r.sinr_thresh_db),
                r.pdus_per_sf.to_string(),
            ])?;
        }
        wtr.flush().map_err(|e| Error::io("<mcs table>", e))?;
        Ok(())
    }
}

pub fn sinr_to_cqi(sinr_db: f64) -> u8 {
    ((sinr_db + 6.0) / 2.0)
        .floor()
        .clamp(0.0, f64::from(MAX_CQI)) as u8
}

/// SINR a CQI value stands for when picking an MCS: the lower edge of its
/// 2 dB bin.
pub fn cqi_representative_sinr(cqi: u8) -> f64 {
    2.0 * f64::from(cqi) - 6.0
}

pub fn cqi_to_mcs(cqi: u8, table: &McsTable) -> u8 {
    if cqi == 0 {
        return 0;
    }
    let target = cqi_representative_sinr(cqi);
    table
        .rows
        .iter()
        .rev()
        .find(|r| r.sinr_thresh_db <= target)
        .map_or(0, |r| r.mcs)
}

pub fn pdu_capacity(mcs: u8, table: &McsTable) -> usize {
    table.row(mcs).pdus_per_sf as usize
}

pub fn decode_pdu(actual_sinr_db: f64, mcs: u8, table: &McsTable) -> bool {
    actual_sinr_db >= table.row(mcs).sinr_thresh_db
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CqiReport {
    pub slot_measured: u64,
    pub cqi: u8,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TxPlan {
    pub slot: u64,
    pub mcs: u8,
    pub pdu_packet_indices: Vec<usize>,
}

/// Head-of-line packets of `backlog` released by `now_s`, up to the MCS
/// capacity.
pub fn schedule_subframe(
    slot: u64,
    now_s: f64,
    backlog: &[PacketEntry],
    mcs: u8,
    table: &McsTable,
) -> TxPlan {
    let capacity = pdu_capacity(mcs, table);
    TxPlan {
        slot,
        mcs,
        pdu_packet_indices: backlog
            .iter()
            .take_while(|p| p.release_time <= now_s + 1e-9)
            .take(capacity)
            .map(|p| p.packet_index)
            .collect(),
    }
}

/// eNodeB-side CQI loop with a fixed reporting delay.
#[derive(Debug, Clone)]
pub struct LinkAdaptation {
    report_delay: u64,
    reports: VecDeque<CqiReport>,
}

impl LinkAdaptation {
    pub const MAX_REPORT_DELAY: u64 = 8;

    pub fn new(report_delay: u64) -> Result<Self> {
        if report_delay > Self::MAX_REPORT_DELAY {
            return Err(Error::config(format!(
                "mac.report_delay must be within 0..={}",
                Self::MAX_REPORT_DELAY
            )));
        }
        Ok(Self {
            report_delay,
            reports: VecDeque::with_capacity(report_delay as usize + 1),
        })
    }

    pub fn report_delay(&self) -> u64 {
        self.report_delay
    }

    pub fn measure(&mut self, slot: u64, sinr_db: f64) -> CqiReport {
        let report = CqiReport {
            slot_measured: slot,
            cqi: sinr_to_cqi(sinr_db),
        };
        self.reports.push_back(report);
        while self.reports.len() > self.report_delay as usize + 1 {
            self.reports.pop_front();
        }
        report
    }

    /// Report usable in `slot`, i.e. the one measured `report_delay`
    /// subframes earlier.
    pub fn report_for(&self, slot: u64) -> Option<CqiReport> {
        let wanted = slot.checked_sub(self.report_delay)?;
        self.reports
            .iter()
            .find(|r| r.slot_measured == wanted)
            .copied()
    }

    /// MCS for `slot`; the lowest MCS until the first report arrives.
    pub fn mcs_for(&self, slot: u64, table: &McsTable) -> u8 {
        self.report_for(slot)
            .map_or(0, |r| cqi_to_mcs(r.cqi, table))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::FrameType;

    #[test]
    fn cqi_mapping() {
        assert_eq!(sinr_to_cqi(-6.0), 0);
        assert_eq!(sinr_to_cqi(-40.0), 0);
        assert_eq!(sinr_to_cqi(24.0), 15);
        assert_eq!(sinr_to_cqi(60.0), 15);
        // floor((7.9 + 6) / 2) = floor(6.95)
        assert_eq!(sinr_to_cqi(7.9), 6);
    }

    #[test]
    fn bundled_table_matches_formula() {
        let shipped = McsTable::bundled();
        let formula = McsTable::from_formula();
        assert_eq!(shipped.rows().len(), 29);
        for (a, b) in shipped.rows().iter().zip(formula.rows()) {
            assert_eq!(a.mcs, b.mcs);
            assert_eq!(a.pdus_per_sf, b.pdus_per_sf);
            assert!((a.eff - b.eff).abs() < 1e-6);
            assert!((a.sinr_thresh_db - b.sinr_thresh_db).abs() < 1e-6);
        }
    }

    #[test]
    fn capacity_rows_from_fixture() {
        let t = McsTable::bundled();
        // floor(eff * 8400 / 1504), at least 1
        assert_eq!(pdu_capacity(0, t), 1);
        assert_eq!(pdu_capacity(14, t), 15);
        assert_eq!(pdu_capacity(28, t), 30);
    }

    #[test]
    fn cqi_to_mcs_scan() {
        let t = McsTable::bundled();
        assert_eq!(cqi_to_mcs(0, t), 0);
        assert_eq!(cqi_to_mcs(15, t), t.max_mcs());
        // Independent linear scan over the fixture rows.
        for cqi in 1..=15u8 {
            let target = 2.0 * f64::from(cqi) - 6.0;
            let mut expect = 0;
            for r in t.rows() {
                if r.sinr_thresh_db <= target {
                    expect = r.mcs;
                }
            }
            assert_eq!(cqi_to_mcs(cqi, t), expect, "cqi {cqi}");
        }
    }

    #[test]
    fn decode_boundary() {
        let t = McsTable::bundled();
        let th = t.row(10).sinr_thresh_db;
        assert!(decode_pdu(th, 10, t));
        assert!(!decode_pdu(th - 0.1, 10, t));
    }

    #[test]
    fn stale_cqi_at_interference_onset() {
        // Slot 0 clean (SINR 38 dB), slot 1 interfered (SINR 18 dB), delay 1.
        let t = McsTable::bundled();
        let mut la = LinkAdaptation::new(1).unwrap();
        la.measure(0, 38.0);
        assert_eq!(la.mcs_for(0, t), 0);
        la.measure(1, 18.0);
        let mcs = la.mcs_for(1, t);
        assert_eq!(mcs, t.max_mcs());
        assert!(!decode_pdu(18.0, mcs, t));
        la.measure(2, 18.0);
        assert!(decode_pdu(18.0, la.mcs_for(2, t), t));
    }

    #[test]
    fn report_delay_bounds() {
        assert!(LinkAdaptation::new(8).is_ok());
        assert!(matches!(LinkAdaptation::new(9), Err(Error::Config(_))));
    }

    fn backlog(n: usize) -> Vec<PacketEntry> {
        (0..n)
            .map(|i| PacketEntry {
                packet_index: i,
                frame_index: i,
                frame_type: FrameType::Diff,
                release_time: 0.0,
            })
            .collect()
    }

    #[test]
    fn scheduling_takes_head_of_line() {
        let t = McsTable::bundled();
        let empty = schedule_subframe(0, 0.0, &[], 5, t);
        assert!(empty.pdu_packet_indices.is_empty());

        assert_eq!(pdu_capacity(5, t), 6);
        assert_eq!(pdu_capacity(3, t), 4);
        let three = backlog(3);
        assert_eq!(
            schedule_subframe(0, 0.0, &three, 5, t).pdu_packet_indices,
            vec![0, 1, 2]
        );

        let ten = backlog(10);
        let first = schedule_subframe(0, 0.0, &ten, 3, t);
        assert_eq!(first.pdu_packet_indices, vec![0, 1, 2, 3]);
        let second = schedule_subframe(1, 0.001, &ten[4..], 3, t);
        assert_eq!(second.pdu_packet_indices, vec![4, 5, 6, 7]);
    }

    #[test]
    fn unreleased_packets_wait() {
        let t = McsTable::bundled();
        let mut b = backlog(4);
        b[2].release_time = 0.5;
        b[3].release_time = 0.5;
        assert_eq!(
            schedule_subframe(0, 0.0, &b, 28, t).pdu_packet_indices,
            vec![0, 1]
        );
    }

    #[test]
    fn rejects_bad_tables() {
        let mut rows = McsTable::from_formula().rows().to_vec();
        rows[3].sinr_thresh_db = rows[2].sinr_thresh_db;
        assert!(McsTable::new(rows).is_err());
        let mut rows = McsTable::from_formula().rows().to_vec();
        rows[0].pdus_per_sf = 0;
        assert!(McsTable::new(rows).is_err());
    }
}
