//! Fading traces: CSV ingestion, cyclic lookup, and the sum-of-sinusoids
//! generator used to produce the bundled EPA traces.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::sync::OnceLock;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FadingLabel {
    #[serde(alias = "low")]
    LowSpeed,
    #[serde(alias = "high")]
    HighSpeed,
    Flat,
}

impl FadingLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            FadingLabel::LowSpeed => "low_speed",
            FadingLabel::HighSpeed => "high_speed",
            FadingLabel::Flat => "flat",
        }
    }

    /// Terminal speed in km/h of the EPA profile behind the label.
    pub fn speed_kmph(self) -> f64 {
        match self {
            FadingLabel::LowSpeed => 3.0,
            FadingLabel::HighSpeed => 10.0,
            FadingLabel::Flat => 0.0,
        }
    }
}

impl std::fmt::Display for FadingLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for FadingLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "low" | "low_speed" => Ok(FadingLabel::LowSpeed),
            "high" | "high_speed" => Ok(FadingLabel::HighSpeed),
            "flat" => Ok(FadingLabel::Flat),
            other => Err(Error::config(format!("unknown fading label {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FadingTrace {
    pub samples: Vec<f64>,
    pub sample_period: f64,
    pub label: FadingLabel,
}

impl FadingTrace {
    pub fn new(samples: Vec<f64>, sample_period: f64, label: FadingLabel) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::config("fading trace is empty"));
        }
        if !(sample_period > 0.0 && sample_period.is_finite()) {
            return Err(Error::config("fading trace sample period must be positive"));
        }
        Ok(Self {
            samples,
            sample_period,
            label,
        })
    }

    /// Constant 0 dB trace.
    pub fn flat() -> Self {
        Self {
            samples: vec![0.0],
            sample_period: 1e-3,
            label: FadingLabel::Flat,
        }
    }

    /// Sample index for a slot; the trace loops cyclically.
    pub fn index_at(&self, slot: u64, slot_len: f64, offset: usize) -> usize {
        let raw = ((slot as f64 * slot_len) / self.sample_period + 1e-9).floor() as usize;
        (raw + offset) % self.samples.len()
    }

    pub fn gain_db(&self, slot: u64, slot_len: f64, offset: usize) -> f64 {
        self.samples[self.index_at(slot, slot_len, offset)]
    }

    /// Reads `t_s,gain_db`; the sample period comes from the first two rows.
    pub fn read_csv<R: Read>(r: R, label: FadingLabel) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            t_s: f64,
            gain_db: f64,
        }
        let mut rdr = csv::Reader::from_reader(r);
        let mut times = Vec::new();
        let mut gains = Vec::new();
        for row in rdr.deserialize() {
            let row: Row = row?;
            times.push(row.t_s);
            gains.push(row.gain_db);
        }
        if times.len() < 2 {
            return Err(Error::config("fading trace needs at least two rows"));
        }
        Self::new(gains, times[1] - times[0], label)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["t_s", "gain_db"])?;
        for (k, g) in self.samples.iter().enumerate() {
            wtr.write_record([
                format!("{:.3}", k as f64 * self.sample_period),
                format!("{g:.6}"),
            ])?;
        }
        wtr.flush().map_err(|e| Error::io("<fading trace>", e))?;
        Ok(())
    }

    /// One of the traces shipped with the crate.
    pub fn bundled(label: FadingLabel) -> &'static FadingTrace {
        static LOW: OnceLock<FadingTrace> = OnceLock::new();
        static HIGH: OnceLock<FadingTrace> = OnceLock::new();
        static FLAT: OnceLock<FadingTrace> = OnceLock::new();
        let parse = |text: &str, label| {
            FadingTrace::read_csv(text.as_bytes(), label).expect("bundled fading trace is valid")
        };
        match label {
            FadingLabel::LowSpeed => LOW.get_or_init(|| parse(BUNDLED_LOW_SPEED, label)),
            FadingLabel::HighSpeed => HIGH.get_or_init(|| parse(BUNDLED_HIGH_SPEED, label)),
            FadingLabel::Flat => FLAT.get_or_init(FadingTrace::flat),
        }
    }
}

pub const BUNDLED_LOW_SPEED: &str = include_str!("../data/fading_low_speed.csv");
pub const BUNDLED_HIGH_SPEED: &str = include_str!("../data/fading_high_speed.csv");

/// EPA power-delay profile: (excess delay in ns, relative power in dB).
pub const EPA_TAPS: [(f64, f64); 7] = [
    (0.0, 0.0),
    (30.0, -1.0),
    (70.0, -2.0),
    (90.0, -3.0),
    (110.0, -8.0),
    (190.0, -17.2),
    (410.0, -20.8),
];

#[derive(Debug, Clone)]
pub struct GeneratorParams {
    pub label: FadingLabel,
    pub carrier_mhz: f64,
    pub bandwidth_hz: f64,
    pub n_subbands: usize,
    pub sinusoids: usize,
    pub duration_s: f64,
    pub sample_period: f64,
    pub seed: u64,
}

impl GeneratorParams {
    /// Parameters the bundled traces were produced with.
    pub fn bundled(label: FadingLabel) -> Self {
        Self {
            label,
            carrier_mhz: 1930.0,
            bandwidth_hz: 9e6,
            n_subbands: 50,
            sinusoids: 16,
            duration_s: 10.0,
            sample_period: 1e-3,
            seed: match label {
                FadingLabel::LowSpeed => 0x3_0000,
                FadingLabel::HighSpeed => 0x10_0000,
                FadingLabel::Flat => 0,
            },
        }
    }
}

fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Wideband gain of an EPA channel: each tap is an independent
/// sum-of-sinusoids Rayleigh process, and the per-sample gain is the mean
/// power over `n_subbands` frequencies spread across the allocation.
pub fn generate_epa_trace(p: &GeneratorParams) -> Result<FadingTrace> {
    if p.label == FadingLabel::Flat {
        return Ok(FadingTrace::flat());
    }
    let doppler_hz = p.label.speed_kmph() / 3.6 * p.carrier_mhz * 1e6 / 299_792_458.0;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let m = p.sinusoids;
    let total_power: f64 = EPA_TAPS.iter().map(|&(_, db)| 10f64.powf(db / 10.0)).sum();

    struct Tap {
        amp: f64,
        delay_s: f64,
        cos_alpha: Vec<f64>,
        sin_alpha: Vec<f64>,
        phi: Vec<f64>,
        psi: Vec<f64>,
    }
    let taps: Vec<Tap> = EPA_TAPS
        .iter()
        .map(|&(delay_ns, db)| {
            let theta = 2.0 * PI * uniform(&mut rng) - PI;
            let alphas: Vec<f64> = (1..=m)
                .map(|n| (2.0 * PI * n as f64 - PI + theta) / (4.0 * m as f64))
                .collect();
            Tap {
                amp: (10f64.powf(db / 10.0) / total_power / m as f64).sqrt(),
                delay_s: delay_ns * 1e-9,
                cos_alpha: alphas.iter().map(|a| a.cos()).collect(),
                sin_alpha: alphas.iter().map(|a| a.sin()).collect(),
                phi: (0..m).map(|_| 2.0 * PI * uniform(&mut rng) - PI).collect(),
                psi: (0..m).map(|_| 2.0 * PI * uniform(&mut rng) - PI).collect(),
            }
        })
        .collect();

    let freqs: Vec<f64> = (0..p.n_subbands)
        .map(|k| {
            if p.n_subbands == 1 {
                0.0
            } else {
                -p.bandwidth_hz / 2.0 + p.bandwidth_hz * k as f64 / (p.n_subbands - 1) as f64
            }
        })
        .collect();

    let n = (p.duration_s / p.sample_period).round() as usize;
    let mut samples = Vec::with_capacity(n);
    let mut tap_gain = vec![(0.0, 0.0); taps.len()];
    for k in 0..n {
        let t = k as f64 * p.sample_period;
        let wt = 2.0 * PI * doppler_hz * t;
        for (g, tap) in tap_gain.iter_mut().zip(&taps) {
            let mut re = 0.0;
            let mut im = 0.0;
            for j in 0..m {
                re += (wt * tap.cos_alpha[j] + tap.phi[j]).cos();
                im += (wt * tap.sin_alpha[j] + tap.psi[j]).cos();
            }
            *g = (tap.amp * re, tap.amp * im);
        }
        let mut power = 0.0;
        for &f in &freqs {
            let (mut re, mut im) = (0.0, 0.0);
            for ((gr, gi), tap) in tap_gain.iter().zip(&taps) {
                let (s, c) = (-2.0 * PI * f * tap.delay_s).sin_cos();
                re += gr * c - gi * s;
                im += gr * s + gi * c;
            }
            power += re * re + im * im;
        }
        samples.push(10.0 * (power / freqs.len() as f64).log10());
    }
    FadingTrace::new(samples, p.sample_period, p.label)
}
