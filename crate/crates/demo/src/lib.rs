//! Browser bindings for a few small coexsim experiments. Each exported
//! function returns JSON so the page can stay framework-free.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use coexsim::fading::FadingLabel;
use coexsim::quality::{efficiency, propagate_damage, DamageRule, LossTrace, VideoRecord};
use coexsim::strategy::StrategyConfig;
use coexsim::stream::{build_packet_map, FrameType, StreamConfig};
use coexsim::SimConfig;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameView {
    pub frame: usize,
    pub kind: &'static str,
    pub lost: bool,
    pub damaged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DamageView {
    pub frames: Vec<FrameView>,
    pub p_det: f64,
}

/// Frame damage for a stream of `lost.len()` one-packet frames, where
/// `lost[i]` marks frame `i` as lost in transit.
pub fn gop_damage(lost: &[bool], gop_size: usize, chain: bool) -> Result<DamageView, String> {
    if lost.is_empty() || gop_size == 0 {
        return Err("need at least one frame and a positive GoP size".into());
    }
    let stream = StreamConfig {
        gop_size,
        gop_pattern: None,
        frame_rate: 1.0,
        packets_per_i: 1,
        packets_per_diff: 1,
        duration_s: lost.len() as f64,
    };
    let map = build_packet_map(&stream).map_err(|e| e.to_string())?;
    let trace = LossTrace {
        video: lost
            .iter()
            .enumerate()
            .map(|(p, &l)| VideoRecord {
                packet_index: p,
                slot: p as u64,
                delivered: !l,
            })
            .collect(),
        d2d: Vec::new(),
        total_slots: lost.len() as u64,
    };
    let rule = if chain {
        DamageRule::Chain
    } else {
        DamageRule::Isolated
    };
    let statuses = propagate_damage(&trace, &map, rule).map_err(|e| e.to_string())?;
    let intact = statuses.iter().filter(|s| !s.effectively_damaged).count();
    Ok(DamageView {
        p_det: intact as f64 / statuses.len() as f64,
        frames: statuses
            .iter()
            .map(|s| FrameView {
                frame: s.frame_index,
                kind: match s.frame_type {
                    FrameType::I => "I",
                    FrameType::Diff => "D",
                },
                lost: s.directly_damaged,
                damaged: s.effectively_damaged,
            })
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub rho: f64,
    pub throughput: f64,
    pub p_det: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tradeoff {
    pub fp: Vec<CurvePoint>,
    pub fdtp: Vec<CurvePoint>,
}

fn mean_point(base: &SimConfig, rho: f64, seeds: u64) -> Result<CurvePoint, String> {
    let (mut thr, mut p) = (0.0, 0.0);
    for seed in 1..=seeds {
        let r = coexsim::run(&SimConfig {
            seed,
            ..base.clone()
        })
        .map_err(|e| e.to_string())?;
        thr += r.quality.d2d_rel_throughput;
        p += r.quality.p_det;
    }
    Ok(CurvePoint {
        rho,
        throughput: thr / seeds as f64,
        p_det: p / seeds as f64,
    })
}

/// p_det against D2D throughput for FP(rho) and FDTP(0, rho) over
/// `points` evenly spaced access probabilities.
pub fn tradeoff_curve(
    fading: &str,
    duration_s: f64,
    seeds: u64,
    points: usize,
) -> Result<Tradeoff, String> {
    let label: FadingLabel = fading.parse().map_err(|e: coexsim::Error| e.to_string())?;
    if duration_s.is_nan() || duration_s <= 0.0 || seeds == 0 || points == 0 {
        return Err("duration, seeds and points must be positive".into());
    }
    let mut base = SimConfig::default();
    base.channel.fading = label;
    base.stream.duration_s = duration_s;
    let mut out = Tradeoff {
        fp: Vec::new(),
        fdtp: Vec::new(),
    };
    for k in 1..=points {
        let rho = k as f64 / points as f64;
        base.strategy = StrategyConfig::fp(rho);
        out.fp.push(mean_point(&base, rho, seeds)?);
        base.strategy = StrategyConfig::fdtp(0.0, rho);
        out.fdtp.push(mean_point(&base, rho, seeds)?);
    }
    Ok(out)
}

/// Efficiency on an `n` x `n` grid of (p_det, throughput) in [0, 1) x
/// [0, 1). Rows are p_det, columns throughput.
pub fn efficiency_grid(n: usize) -> Vec<Vec<f64>> {
    let axis = |i: usize| i as f64 / n as f64;
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| efficiency(axis(i), axis(j)).unwrap_or(f64::NAN))
                .collect()
        })
        .collect()
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsValue> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string()))
        .map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = gopDamage)]
pub fn gop_damage_js(lost: &str, gop_size: usize, chain: bool) -> Result<String, JsValue> {
    let mask: Vec<bool> = lost
        .chars()
        .filter(|c| !c.is_whitespace())
        .map(|c| c == '1')
        .collect();
    to_js(gop_damage(&mask, gop_size, chain))
}

#[wasm_bindgen(js_name = tradeoffCurve)]
pub fn tradeoff_curve_js(
    fading: &str,
    duration_s: f64,
    seeds: u32,
    points: u32,
) -> Result<String, JsValue> {
    to_js(tradeoff_curve(
        fading,
        duration_s,
        u64::from(seeds),
        points as usize,
    ))
}

#[wasm_bindgen(js_name = efficiencyGrid)]
pub fn efficiency_grid_js(n: u32) -> Result<String, JsValue> {
    to_js(Ok(efficiency_grid(n as usize)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lost_i_frame_damages_its_gop_only() {
        let v = gop_damage(&[true, false, false, false, false, false], 3, false).unwrap();
        let damaged: Vec<bool> = v.frames.iter().map(|f| f.damaged).collect();
        assert_eq!(damaged, [true, true, true, false, false, false]);
        assert_eq!(v.p_det, 0.5);
    }

    #[test]
    fn chain_rule_spreads_within_gop() {
        let lost = [false, true, false, false, false];
        assert_eq!(gop_damage(&lost, 5, false).unwrap().p_det, 0.8);
        assert_eq!(gop_damage(&lost, 5, true).unwrap().p_det, 0.2);
    }

    #[test]
    fn bad_inputs_are_errors() {
        assert!(gop_damage(&[], 4, false).is_err());
        assert!(tradeoff_curve("medium", 1.0, 1, 2).is_err());
    }

    #[test]
    fn tradeoff_curve_favours_fdtp() {
        let t = tradeoff_curve("low", 8.0, 2, 4).unwrap();
        assert_eq!(t.fp.len(), 4);
        let (fp, fdtp) = (&t.fp[1], &t.fdtp[1]);
        assert!((fp.throughput - fdtp.throughput).abs() < 0.05);
        assert!(fdtp.p_det > fp.p_det);
    }

    #[test]
    fn efficiency_grid_values() {
        let g = efficiency_grid(10);
        assert_eq!(g.len(), 10);
        assert!((g[9][5] - 1.8).abs() < 1e-12);
        assert_eq!(g[0][0], 0.0);
    }
}
