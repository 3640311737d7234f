//! The engine against a hand simulation of a tiny stream on a flat channel.
//!
//! With no fading and the default geometry, the clean uplink SINR sits far
//! above the top MCS threshold and the interfered SINR sits just below it,
//! so once CQI reports arrive a PDU is lost exactly when D2D transmits in
//! its subframe. The D2D link clears its threshold whether or not the UE is
//! active, so every D2D transmission succeeds.

use coexsim::fading::FadingLabel;
use coexsim::rng::{DrawStream, Purpose};
use coexsim::strategy::StrategyConfig;
use coexsim::{run, SimConfig, Simulation};

const FRAME_SLOTS: u64 = 10;

fn tiny(strategy: StrategyConfig, seed: u64) -> SimConfig {
    let mut cfg = SimConfig::default();
    cfg.stream.gop_size = 3;
    cfg.stream.packets_per_i = 2;
    cfg.stream.packets_per_diff = 1;
    cfg.stream.frame_rate = 100.0;
    cfg.stream.duration_s = 0.06;
    cfg.channel.fading = FadingLabel::Flat;
    cfg.mac.report_delay = 0;
    cfg.strategy = strategy;
    cfg.seed = seed;
    cfg
}

/// Frame types of the six frames: I P P I P P.
fn is_i(frame: u64) -> bool {
    frame.is_multiple_of(3)
}

/// Subframe in which frame `f` goes out with DCI delay 1: a frame whose type
/// differs from the previous one waits one subframe after its preamble.
fn tx_slot(frame: u64) -> u64 {
    let start = frame * FRAME_SLOTS;
    let type_change = frame == 0 || is_i(frame) != is_i(frame - 1);
    if type_change {
        start + 1
    } else {
        start
    }
}

struct Expected {
    frame_lost: Vec<bool>,
    d2d_tx: Vec<bool>,
}

fn hand_simulate(cfg: &SimConfig) -> Expected {
    let mut draws = DrawStream::new(cfg.seed, Purpose::D2dAccess);
    let s = &cfg.strategy;
    let i_run_slots = |t: u64| {
        // Low mode covers the I run from its DCI until the next DCI.
        (0..6)
            .any(|f| is_i(f) && tx_slot(f) <= t && t < tx_slot(f + 1).min(tx_slot(f) + FRAME_SLOTS))
    };
    let d2d_tx: Vec<bool> = (0..60)
        .map(|t| {
            let p = match s.kind {
                coexsim::strategy::StrategyKind::Fp => s.rho,
                coexsim::strategy::StrategyKind::Fdtp if i_run_slots(t) => s.rho_i,
                coexsim::strategy::StrategyKind::Fdtp => s.rho_d,
            };
            draws.uniform(t) < p
        })
        .collect();
    let frame_lost = (0..6).map(|f| d2d_tx[tx_slot(f) as usize]).collect();
    Expected { frame_lost, d2d_tx }
}

fn check(cfg: &SimConfig) {
    let expected = hand_simulate(cfg);
    let result = run(cfg).unwrap();
    let map = &result.map;
    assert_eq!(map.len(), 8);

    for v in &result.loss_trace.video {
        let f = map.entries[v.packet_index].frame_index as u64;
        assert_eq!(v.slot, tx_slot(f), "packet {} slot", v.packet_index);
        assert_eq!(
            v.delivered, !expected.frame_lost[f as usize],
            "packet {}",
            v.packet_index
        );
    }
    for d in &result.loss_trace.d2d {
        assert_eq!(
            d.transmitted, expected.d2d_tx[d.slot as usize],
            "slot {}",
            d.slot
        );
        assert_eq!(d.succeeded, d.transmitted);
    }

    // Isolated damage: a frame is bad if it lost a packet or its I-frame did.
    let intact = (0..6)
        .filter(|&f| !expected.frame_lost[f] && !expected.frame_lost[f - f % 3])
        .count();
    assert!((result.quality.p_det - intact as f64 / 6.0).abs() < 1e-12);
    let tx = expected.d2d_tx.iter().filter(|&&x| x).count();
    assert!((result.quality.d2d_rel_throughput - tx as f64 / 60.0).abs() < 1e-12);
}

#[test]
fn fp_matches_hand_simulation() {
    for seed in 0..40 {
        for rho in [0.0, 0.3, 0.5, 1.0] {
            check(&tiny(StrategyConfig::fp(rho), seed));
        }
    }
}

#[test]
fn fdtp_matches_hand_simulation() {
    for seed in 0..40 {
        for (ri, rd) in [(0.0, 0.5), (0.2, 0.8), (0.0, 1.0)] {
            check(&tiny(StrategyConfig::fdtp(ri, rd), seed));
        }
    }
}

#[test]
fn fp_full_access_loses_every_packet() {
    let r = run(&tiny(StrategyConfig::fp(1.0), 3)).unwrap();
    assert_eq!(r.loss_trace.delivered(), 0);
    assert_eq!(r.quality.p_det, 0.0);
    assert!((r.quality.d2d_rel_throughput - 1.0).abs() < 1e-12);
    assert!(r.quality.efficiency.is_none());
}

#[test]
fn step_records_agree_with_hand_schedule() {
    let cfg = tiny(StrategyConfig::fdtp(0.0, 1.0), 11);
    let mut sim = Simulation::new(&cfg).unwrap();
    let mut busy = Vec::new();
    while !sim.is_done() {
        let rec = sim.step().unwrap();
        if !rec.scheduled.is_empty() {
            busy.push(rec.slot);
        }
    }
    let expected: Vec<u64> = (0..6).map(tx_slot).collect();
    assert_eq!(busy, expected);
}
