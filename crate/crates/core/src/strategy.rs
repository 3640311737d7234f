//! D2D access strategies: Fixed Probability (FP) and Frame Dependent
//! Transmission Probability (FDTP).
//!
//! FDTP runs a two-mode machine. A preamble announcing an I-frame run puts
//! the transmitter in LOW mode (probability `rho_i`) once the DCI relaying it
//! arrives `dci_delay` subframes later; a preamble announcing differential
//! frames puts it in HIGH mode (probability `rho_d`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stream::FrameType;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyKind {
    Fp,
    Fdtp,
}

impl StrategyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StrategyKind::Fp => "fp",
            StrategyKind::Fdtp => "fdtp",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StrategyConfig {
    pub kind: StrategyKind,
    pub rho: f64,
    pub rho_i: f64,
    pub rho_d: f64,
    pub power_dbm: f64,
    pub dci_delay: u64,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        Self {
            kind: StrategyKind::Fdtp,
            rho: 0.5,
            rho_i: 0.0,
            rho_d: 0.5,
            power_dbm: 5.0,
            dci_delay: 1,
        }
    }
}

impl StrategyConfig {
    pub fn fp(rho: f64) -> Self {
        Self {
            kind: StrategyKind::Fp,
            rho,
            ..Self::default()
        }
    }

    pub fn fdtp(rho_i: f64, rho_d: f64) -> Self {
        Self {
            kind: StrategyKind::Fdtp,
            rho_i,
            rho_d,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("rho", self.rho),
            ("rho_i", self.rho_i),
            ("rho_d", self.rho_d),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::config(format!(
                    "strategy.{name} must be within [0, 1], got {p}"
                )));
            }
        }
        if !self.power_dbm.is_finite() {
            return Err(Error::config("strategy.power_dbm must be finite"));
        }
        Ok(())
    }

    /// Access probability in effect under `mode`.
    pub fn access_probability(&self, mode: Mode) -> f64 {
        match (self.kind, mode) {
            (StrategyKind::Fp, _) => self.rho,
            (StrategyKind::Fdtp, Mode::Low) => self.rho_i,
            (StrategyKind::Fdtp, Mode::High) => self.rho_d,
        }
    }

    pub fn decide(&self, mode: Mode, draw: f64) -> bool {
        match self.kind {
            StrategyKind::Fp => fp_decide(self, draw),
            StrategyKind::Fdtp => fdtp_decide(self, mode, draw),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Mode {
    Low,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AccessMode {
    pub mode: Mode,
    pub since_slot: u64,
}

impl Default for AccessMode {
    fn default() -> Self {
        Self {
            mode: Mode::High,
            since_slot: 0,
        }
    }
}

/// Applies a preamble event (announced in `event_slot`) at subframe `now`.
/// The mode changes only once the DCI has arrived; before that the state is
/// returned unchanged and the event must be applied again later.
pub fn fdtp_update_mode(
    state: AccessMode,
    event_slot: u64,
    frame_type: FrameType,
    now: u64,
    dci_delay: u64,
) -> Result<AccessMode> {
    let effective = event_slot + dci_delay;
    if effective < state.since_slot {
        return Err(Error::Protocol(format!(
            "preamble effective at subframe {effective} arrived after a mode change at {}",
            state.since_slot
        )));
    }
    if now < effective {
        return Ok(state);
    }
    let mode = match frame_type {
        FrameType::I => Mode::Low,
        FrameType::Diff => Mode::High,
    };
    if mode == state.mode {
        return Ok(state);
    }
    Ok(AccessMode {
        mode,
        since_slot: effective,
    })
}

pub fn fp_decide(cfg: &StrategyConfig, draw: f64) -> bool {
    draw < cfg.rho
}

pub fn fdtp_decide(cfg: &StrategyConfig, mode: Mode, draw: f64) -> bool {
    let p = match mode {
        Mode::Low => cfg.rho_i,
        Mode::High => cfg.rho_d,
    };
    draw < p
}

pub fn d2d_success(transmitted: bool, sinr_d2d_db: f64, threshold_db: f64) -> bool {
    transmitted && sinr_d2d_db >= threshold_db
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct D2dSlotDecision {
    pub slot: u64,
    pub transmitted: bool,
    pub succeeded: bool,
}
