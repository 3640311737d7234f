//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;
use serde_json::json;

use coexsim::channel::{friis_path_loss, sinr_at_enb, LinkBudget};
use coexsim::compare::compare_strategies;
use coexsim::config::Resources;
use coexsim::fading::FadingLabel;
use coexsim::quality::efficiency;
use coexsim::strategy::StrategyConfig;
use coexsim::stream::{build_packet_map, FrameType};
use coexsim::sweep::{run_sweep, Axis, Outputs, ResultRow, SweepSpec};
use coexsim::{run, SimConfig, Simulation};

type Outcome = Result<String, String>;
type Check<'a> = Box<dyn Fn() -> Outcome + 'a>;

const SEEDS: u64 = 20;
const FADINGS: [FadingLabel; 2] = [FadingLabel::LowSpeed, FadingLabel::HighSpeed];

fn grid_values() -> Vec<serde_json::Value> {
    (1..=10).map(|i| json!(i as f64 / 10.0)).collect()
}

fn spec(base: SimConfig, key: &str) -> SweepSpec {
    SweepSpec {
        base,
        axis1: Axis {
            key: key.into(),
            values: grid_values(),
        },
        axis2: None,
        seeds: (1..=SEEDS).collect(),
        outputs: Outputs::default(),
    }
}

struct Sweeps {
    fp: BTreeMap<&'static str, Vec<ResultRow>>,
    fdtp: BTreeMap<&'static str, Vec<ResultRow>>,
}

fn tradeoff_sweeps() -> Sweeps {
    let mut fp = BTreeMap::new();
    let mut fdtp = BTreeMap::new();
    for label in FADINGS {
        let mut base = SimConfig::default();
        base.channel.fading = label;
        base.strategy = StrategyConfig::fp(0.0);
        let a = run_sweep(&spec(base.clone(), "strategy.rho"), 8, &[]).expect("fp sweep");
        base.strategy = StrategyConfig::fdtp(0.0, 0.0);
        let b = run_sweep(&spec(base, "strategy.rho_d"), 8, &[]).expect("fdtp sweep");
        assert_eq!(a.aborted + b.aborted, 0, "sweep runs aborted");
        fp.insert(label.as_str(), a.rows);
        fdtp.insert(label.as_str(), b.rows);
    }
    Sweeps { fp, fdtp }
}

fn criterion_1(s: &Sweeps) -> Outcome {
    let mut advantage = BTreeMap::new();
    let mut worst = f64::INFINITY;
    for label in FADINGS.map(FadingLabel::as_str) {
        let cmp = compare_strategies(&s.fp[label], &s.fdtp[label]).map_err(|e| e.to_string())?;
        let matched: Vec<_> = cmp
            .iter()
            .filter(|c| (0.3..=0.7).contains(&c.d2d_throughput))
            .collect();
        if matched.is_empty() {
            return Err(format!("{label}: no matched points in [0.3, 0.7]"));
        }
        let mut deltas = Vec::new();
        for c in matched {
            let d = c.delta_p_det.ok_or_else(|| {
                format!(
                    "{label}: no FDTP point at throughput {:.3}",
                    c.d2d_throughput
                )
            })?;
            if d < 0.10 {
                return Err(format!(
                    "{label}: delta {d:.4} < 0.10 at throughput {:.3}",
                    c.d2d_throughput
                ));
            }
            worst = worst.min(d);
            deltas.push(d);
        }
        advantage.insert(label, deltas.iter().sum::<f64>() / deltas.len() as f64);
    }
    let (lo, hi) = (advantage["low_speed"], advantage["high_speed"]);
    if hi < lo - 0.05 {
        return Err(format!(
            "high-speed advantage {hi:.4} < low-speed {lo:.4} - 0.05"
        ));
    }
    Ok(format!(
        "min delta {worst:.3}; mean advantage low {lo:.3}, high {hi:.3}"
    ))
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC2);
    let pairs: Vec<(f64, u64, FadingLabel)> = (0..50)
        .map(|i| {
            let rho = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
            (rho, rng.next_u64(), FADINGS[i % 2])
        })
        .collect();
    let mismatches: Vec<String> = pairs
        .par_iter()
        .filter_map(|&(rho, seed, label)| {
            let mut cfg = SimConfig {
                seed,
                ..SimConfig::default()
            };
            cfg.channel.fading = label;
            cfg.strategy = StrategyConfig::fp(rho);
            let fp = run(&cfg).ok()?;
            cfg.strategy = StrategyConfig::fdtp(rho, rho);
            let fdtp = run(&cfg).ok()?;
            let mut a = Vec::new();
            let mut b = Vec::new();
            fp.loss_trace.write_video_csv(&fp.map, &mut a).ok()?;
            fp.loss_trace.write_d2d_csv(&mut a).ok()?;
            fdtp.loss_trace.write_video_csv(&fdtp.map, &mut b).ok()?;
            fdtp.loss_trace.write_d2d_csv(&mut b).ok()?;
            (a != b).then(|| format!("rho={rho:.4} seed={seed}"))
        })
        .collect();
    if !mismatches.is_empty() {
        return Err(format!("traces differ for {}", mismatches.join(", ")));
    }
    Ok("50 (rho, seed) pairs byte-identical".into())
}

fn criterion_3() -> Outcome {
    let results: Vec<Result<(usize, usize), String>> = (0..100u64)
        .into_par_iter()
        .map(|i| {
            let mut cfg = SimConfig {
                seed: 1000 + i,
                ..SimConfig::default()
            };
            cfg.channel.fading = FADINGS[(i % 2) as usize];
            cfg.strategy = StrategyConfig::fdtp(0.0, 0.1 + 0.9 * (i as f64 / 99.0));
            cfg.strategy.dci_delay = 0;
            let r = run(&cfg).map_err(|e| e.to_string())?;
            let d2d_on: Vec<bool> = r.loss_trace.d2d.iter().map(|d| d.transmitted).collect();
            let mut i_packets = 0;
            for v in &r.loss_trace.video {
                if r.map.entries[v.packet_index].frame_type != FrameType::I {
                    continue;
                }
                i_packets += 1;
                if !v.delivered && d2d_on.get(v.slot as usize).copied().unwrap_or(false) {
                    return Err(format!(
                        "seed {}: I packet {} lost under D2D",
                        cfg.seed, v.packet_index
                    ));
                }
            }
            let statuses =
                coexsim::quality::propagate_damage(&r.loss_trace, &r.map, cfg.quality.damage_rule)
                    .map_err(|e| e.to_string())?;
            for (g, gop) in statuses.chunks(r.map.gop_size).enumerate() {
                let direct_diff = gop
                    .iter()
                    .filter(|s| s.frame_type == FrameType::Diff && s.directly_damaged)
                    .count();
                if r.quality.per_gop[g].damaged_frames > direct_diff {
                    return Err(format!(
                        "seed {}: GoP {g} damage {} > {direct_diff}",
                        cfg.seed, r.quality.per_gop[g].damaged_frames
                    ));
                }
            }
            let i_lost = r
                .loss_trace
                .video
                .iter()
                .filter(|v| {
                    !v.delivered && r.map.entries[v.packet_index].frame_type == FrameType::I
                })
                .count();
            Ok((i_packets, i_lost))
        })
        .collect();
    let mut total = 0;
    let mut lost = 0;
    for r in results {
        let (n, l) = r?;
        total += n;
        lost += l;
    }
    Ok(format!(
        "100 runs, {total} I packets, {lost} lost, none to D2D"
    ))
}

/// Exact p_det of an 8-frame, 2-GoP stream when each frame is lost
/// independently with probability `rho`, isolated damage rule.
fn enumerate_p_det(rho: f64, gop: usize, frames: usize) -> f64 {
    let mut expected = 0.0;
    for mask in 0u32..(1 << frames) {
        let lost = |f: usize| mask >> f & 1 == 1;
        let k = mask.count_ones() as i32;
        let prob = rho.powi(k) * (1.0 - rho).powi(frames as i32 - k);
        let intact = (0..frames)
            .filter(|&f| !lost(f) && !lost(f - f % gop))
            .count();
        expected += prob * intact as f64 / frames as f64;
    }
    expected
}

fn criterion_4() -> Outcome {
    let mut base = SimConfig::default();
    base.stream.gop_size = 4;
    base.stream.packets_per_i = 1;
    base.stream.packets_per_diff = 1;
    base.stream.frame_rate = 100.0;
    base.stream.duration_s = 0.08;
    base.channel.fading = FadingLabel::Flat;
    base.mac.report_delay = 0;
    let map = Arc::new(build_packet_map(&base.stream).map_err(|e| e.to_string())?);
    if map.len() != 8 || map.total_frames() != 8 {
        return Err(format!("stream has {} packets, expected 8", map.len()));
    }
    let resources: Resources = base.resources().map_err(|e| e.to_string())?;
    let mut notes = Vec::new();
    for rho in [0.25, 0.5, 0.75] {
        let exact = enumerate_p_det(rho, 4, 8);
        let cfg = SimConfig {
            strategy: StrategyConfig::fp(rho),
            ..base.clone()
        };
        let sum: f64 = (0..100_000u64)
            .into_par_iter()
            .map(|seed| {
                let c = SimConfig {
                    seed,
                    ..cfg.clone()
                };
                Simulation::with_parts(&c, map.clone(), resources.clone())
                    .and_then(|s| s.run_to_end())
                    .map(|r| r.quality.p_det)
                    .expect("tiny run")
            })
            .sum();
        let sim = sum / 100_000.0;
        if (sim - exact).abs() > 0.01 {
            return Err(format!("rho={rho}: simulated {sim:.5} vs exact {exact:.5}"));
        }
        notes.push(format!("rho={rho}: {sim:.4} vs {exact:.4}"));
    }
    Ok(notes.join("; "))
}

fn criterion_5() -> Outcome {
    let eff = efficiency(0.9, 0.5).map_err(|e| e.to_string())?;
    if eff != 1.8 {
        return Err(format!("efficiency(0.9, 0.5) = {eff}"));
    }
    let pl = friis_path_loss(1000.0, 1000.0).map_err(|e| e.to_string())?;
    if (pl - 92.44).abs() > 1e-6 {
        return Err(format!("friis(1000 m, 1000 MHz) = {pl}"));
    }
    let noise = -99.0;
    let ue = LinkBudget::new(-60.0, 0.0, 0.0);
    let interferer = LinkBudget::new(noise, 0.0, 0.0);
    let drop =
        sinr_at_enb(&ue, false, &interferer, noise) - sinr_at_enb(&ue, true, &interferer, noise);
    if (drop - 3.01).abs() > 1e-3 {
        return Err(format!("SINR drop {drop}"));
    }
    Ok(format!(
        "efficiency 1.8, friis {pl:.6} dB, drop {drop:.5} dB"
    ))
}

fn criterion_6() -> Outcome {
    let mut base = SimConfig::default();
    base.channel.fading = FadingLabel::HighSpeed;
    base.strategy = StrategyConfig::fdtp(0.1, 0.6);
    let reference = run(&base).map_err(|e| e.to_string())?;
    let hash = reference.trace_hash();
    for _ in 0..4 {
        if run(&base).map_err(|e| e.to_string())?.trace_hash() != hash {
            return Err("repeated run changed the trace hash".into());
        }
    }
    let mut sweep = spec(base.clone(), "strategy.rho_d");
    sweep.axis1.values = vec![json!(0.3), json!(0.6), json!(0.9)];
    sweep.seeds = vec![1, 2, 3, 4];
    let one = run_sweep(&sweep, 1, &[]).map_err(|e| e.to_string())?;
    let eight = run_sweep(&sweep, 8, &[]).map_err(|e| e.to_string())?;
    if one.rows != eight.rows {
        return Err("sweep results differ between 1 and 8 workers".into());
    }
    let from_sweep = one
        .raw()
        .find(|r| r.rho_d == 0.6 && r.seed == base.seed.to_string())
        .ok_or("missing sweep row")?;
    if from_sweep.trace_hash != hash {
        return Err("sweep and direct run disagree".into());
    }

    let mut runs = 0;
    for label in [
        FadingLabel::Flat,
        FadingLabel::LowSpeed,
        FadingLabel::HighSpeed,
    ] {
        for (seed, rho) in [(1u64, 0.0), (2, 0.5), (3, 1.0)] {
            let mut cfg = SimConfig {
                seed,
                ..base.clone()
            };
            cfg.channel.fading = label;
            cfg.strategy = StrategyConfig::fp(rho);
            let r = run(&cfg).map_err(|e| e.to_string())?;
            let t = &r.loss_trace;
            let mut seen = vec![false; r.map.len()];
            for v in &t.video {
                if std::mem::replace(&mut seen[v.packet_index], true) {
                    return Err(format!("packet {} recorded twice", v.packet_index));
                }
            }
            if t.delivered() + t.lost() != r.map.len() || seen.contains(&false) {
                return Err(format!("conservation broken for {label:?} seed {seed}"));
            }
            runs += 1;
        }
    }
    Ok(format!(
        "hash {}.. stable over 5 repeats and 1/8 workers; conservation in {runs} runs",
        &hash[..12]
    ))
}

fn criterion_7(s: &Sweeps) -> Outcome {
    const SLACK: f64 = 0.005;
    for (label, rows) in &s.fdtp {
        let mut means: Vec<&ResultRow> = rows.iter().filter(|r| r.is_mean()).collect();
        means.sort_by(|a, b| a.rho_d.total_cmp(&b.rho_d));
        for w in means.windows(2) {
            let (a, b) = (w[0], w[1]);
            let (ta, tb) = (a.d2d_throughput.unwrap(), b.d2d_throughput.unwrap());
            let (pa, pb) = (a.p_det.unwrap(), b.p_det.unwrap());
            if tb < ta - SLACK {
                return Err(format!(
                    "{label}: throughput falls {ta:.4} -> {tb:.4} at rho_d {}",
                    b.rho_d
                ));
            }
            if pb > pa + SLACK {
                return Err(format!(
                    "{label}: p_det rises {pa:.4} -> {pb:.4} at rho_d {}",
                    b.rho_d
                ));
            }
        }
    }
    Ok("throughput non-decreasing and p_det non-increasing in rho_d, both fadings".into())
}

fn main() {
    let start = Instant::now();
    let sweeps = tradeoff_sweeps();
    let criteria: Vec<(&str, Check)> = vec![
        ("1 tradeoff reproduction", Box::new(|| criterion_1(&sweeps))),
        ("2 strategy equivalence", Box::new(criterion_2)),
        ("3 I-frame protection", Box::new(criterion_3)),
        ("4 brute-force oracle", Box::new(criterion_4)),
        ("5 efficiency and channel math", Box::new(criterion_5)),
        ("6 determinism and conservation", Box::new(criterion_6)),
        ("7 monotonicity", Box::new(|| criterion_7(&sweeps))),
    ];
    let mut failed = 0;
    for (name, check) in &criteria {
        match check() {
            Ok(detail) => println!("criterion {name}: PASS ({detail})"),
            Err(detail) => {
                println!("criterion {name}: FAIL ({detail})");
                failed += 1;
            }
        }
    }
    println!(
        "acceptance: {}/{} passed in {:.1?}",
        criteria.len() - failed,
        criteria.len(),
        start.elapsed()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
