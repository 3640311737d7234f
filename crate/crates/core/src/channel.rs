//! Link budgets and SINR at the eNodeB and at the D2D receiver.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Thermal noise density at 290 K, dBm/Hz.
pub const THERMAL_NOISE_DBM_HZ: f64 = -174.0;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

/// E-UTRA uplink band entry: `F_UL = f_low + 0.1 * (N - n_offset)`.
#[derive(Debug, Clone, Copy)]
pub struct UplinkBand {
    pub band: u8,
    pub f_low_mhz: f64,
    pub n_offset: u32,
    pub n_max: u32,
}

pub const UPLINK_BANDS: &[UplinkBand] = &[
    UplinkBand {
        band: 1,
        f_low_mhz: 1920.0,
        n_offset: 18000,
        n_max: 18599,
    },
    UplinkBand {
        band: 2,
        f_low_mhz: 1850.0,
        n_offset: 18600,
        n_max: 19199,
    },
    UplinkBand {
        band: 3,
        f_low_mhz: 1710.0,
        n_offset: 19200,
        n_max: 19949,
    },
    UplinkBand {
        band: 4,
        f_low_mhz: 1710.0,
        n_offset: 19950,
        n_max: 20399,
    },
    UplinkBand {
        band: 5,
        f_low_mhz: 824.0,
        n_offset: 20400,
        n_max: 20649,
    },
    UplinkBand {
        band: 7,
        f_low_mhz: 2500.0,
        n_offset: 20750,
        n_max: 21449,
    },
    UplinkBand {
        band: 8,
        f_low_mhz: 880.0,
        n_offset: 21450,
        n_max: 21799,
    },
    UplinkBand {
        band: 13,
        f_low_mhz: 777.0,
        n_offset: 23180,
        n_max: 23279,
    },
    UplinkBand {
        band: 17,
        f_low_mhz: 704.0,
        n_offset: 23730,
        n_max: 23849,
    },
    UplinkBand {
        band: 20,
        f_low_mhz: 832.0,
        n_offset: 24150,
        n_max: 24449,
    },
];

pub fn earfcn_to_uplink_freq(earfcn: u32) -> Result<f64> {
    UPLINK_BANDS
        .iter()
        .find(|b| (b.n_offset..=b.n_max).contains(&earfcn))
        .map(|b| b.f_low_mhz + 0.1 * f64::from(earfcn - b.n_offset))
        .ok_or_else(|| {
            Error::config(format!(
                "uplink EARFCN {earfcn} is outside the supported bands"
            ))
        })
}

/// Free-space loss in dB for a distance in meters and a frequency in MHz.
pub fn friis_path_loss(dist_m: f64, freq_mhz: f64) -> Result<f64> {
    if !(dist_m > 0.0 && freq_mhz > 0.0) {
        return Err(Error::Domain(format!(
            "path loss needs positive distance and frequency, got {dist_m} m, {freq_mhz} MHz"
        )));
    }
    Ok(32.44 + 20.0 * (dist_m / 1000.0).log10() + 20.0 * freq_mhz.log10())
}

pub fn noise_floor(bandwidth_hz: f64, noise_figure_db: f64) -> f64 {
    THERMAL_NOISE_DBM_HZ + 10.0 * bandwidth_hz.log10() + noise_figure_db
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Topology {
    pub ue_enb_dist_m: f64,
    pub d2d_pair_dist_m: f64,
    pub d2dtx_enb_dist_m: f64,
    pub ue_d2drx_dist_m: f64,
}

impl Default for Topology {
    fn default() -> Self {
        Self {
            ue_enb_dist_m: 200.0,
            d2d_pair_dist_m: 10.0,
            d2dtx_enb_dist_m: 200.0,
            ue_d2drx_dist_m: 200.0,
        }
    }
}

impl Topology {
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("ue_enb_dist_m", self.ue_enb_dist_m),
            ("d2d_pair_dist_m", self.d2d_pair_dist_m),
            ("d2dtx_enb_dist_m", self.d2dtx_enb_dist_m),
            ("ue_d2drx_dist_m", self.ue_d2drx_dist_m),
        ];
        for (name, d) in all {
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::config(format!("topology.{name} must be positive")));
            }
        }
        Ok(())
    }
}

/// Received power of one link in one slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    pub tx_power: f64,
    pub path_loss: f64,
    pub fading_gain: f64,
    pub rx_power: f64,
}

impl LinkBudget {
    pub fn new(tx_power: f64, path_loss: f64, fading_gain: f64) -> Self {
        Self {
            tx_power,
            path_loss,
            fading_gain,
            rx_power: tx_power - path_loss + fading_gain,
        }
    }
}

fn sinr(signal_dbm: f64, noise_dbm: f64, interference_dbm: Option<f64>) -> f64 {
    let denom = db_to_linear(noise_dbm) + interference_dbm.map_or(0.0, db_to_linear);
    signal_dbm - linear_to_db(denom)
}

/// Uplink SINR of the video UE at the eNodeB, optionally interfered by the
/// D2D transmitter.
pub fn sinr_at_enb(ue: &LinkBudget, d2d_active: bool, d2d: &LinkBudget, noise_dbm: f64) -> f64 {
    sinr(ue.rx_power, noise_dbm, d2d_active.then_some(d2d.rx_power))
}

/// SINR at the D2D receiver, optionally interfered by the LTE UE.
pub fn sinr_at_d2drx(
    d2d: &LinkBudget,
    lte_ue_active: bool,
    ue: &LinkBudget,
    noise_dbm: f64,
) -> f64 {
    sinr(
        d2d.rx_power,
        noise_dbm,
        lte_ue_active.then_some(ue.rx_power),
    )
}
