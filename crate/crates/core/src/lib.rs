//! Slot-level simulation of a D2D pair sharing LTE uplink spectrum with a
//! video-streaming UE, with frame-type aware D2D access control and a
//! GoP-aware frame-damage quality model.

pub mod channel;
pub mod compare;
pub mod config;
pub mod engine;
pub mod error;
pub mod fading;
pub mod mac;
pub mod quality;
pub mod rng;
pub mod strategy;
pub mod stream;
pub mod sweep;

pub use config::SimConfig;
pub use engine::{run, SimResult, Simulation};
pub use error::{Error, Result};
