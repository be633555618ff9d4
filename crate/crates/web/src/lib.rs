//! Browser bindings. Every export takes plain values and returns JSON.

use serde::Serialize;
use serde_json::Value;
use setobs::faults::detection_delay;
use setobs::model::{IntervalOrder, Side};
use setobs::monotone::Assumption2Report;
use setobs::scenarios::{Scenario, ScenarioParams};
use setobs::sim::{SimConfig, Simulation};
use wasm_bindgen::prelude::*;

/// Builtin parameters of `name` with the JSON object `overrides` merged in.
pub fn params(name: &str, overrides: &str) -> Result<ScenarioParams, String> {
    let defaults = ScenarioParams::defaults(name).map_err(|e| e.to_string())?;
    let mut base = serde_json::to_value(&defaults).map_err(|e| e.to_string())?;
    if !overrides.trim().is_empty() {
        let patch: Value =
            serde_json::from_str(overrides).map_err(|e| format!("overrides: {e}"))?;
        let Value::Object(patch) = patch else {
            return Err("overrides must be a JSON object".into());
        };
        if patch.contains_key("kind") {
            return Err("overrides may not set `kind`".into());
        }
        let Value::Object(fields) = &mut base else {
            unreachable!("parameters serialize to an object")
        };
        fields.extend(patch);
    }
    serde_json::from_value(base).map_err(|e| format!("overrides: {e}"))
}

pub fn scenario(name: &str, overrides: &str) -> Result<Scenario, String> {
    params(name, overrides)?
        .build_unchecked()
        .map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct VerifyOut {
    scenario: String,
    assumption2: Assumption2Report,
    passed: bool,
    horizon: f64,
    step: f64,
    parameters: Value,
}

pub fn verify_json(name: &str, overrides: &str) -> Result<String, String> {
    let p = params(name, overrides)?;
    let s = p.build_unchecked().map_err(|e| e.to_string())?;
    let a = s.assumption2();
    let parameters = serde_json::to_value(&p).map_err(|e| e.to_string())?;
    let out = VerifyOut {
        scenario: s.name.clone(),
        passed: a.passed(),
        assumption2: a,
        horizon: s.horizon,
        step: s.step,
        parameters,
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

#[derive(Serialize, Default)]
struct Series {
    t: Vec<f64>,
    theta: Vec<Vec<f64>>,
    theta_hat_m: Vec<Vec<f64>>,
    theta_hat_big_m: Vec<Vec<f64>>,
    x: Vec<Vec<f64>>,
    xi_m: Vec<Vec<f64>>,
    xi_big_m: Vec<Vec<f64>>,
    s: Vec<bool>,
    d: Vec<bool>,
    z: Vec<bool>,
}

#[derive(Serialize)]
struct SimulateOut {
    scenario: String,
    samples: usize,
    series: Series,
    branch: String,
    certified: Option<IntervalOrder>,
    theta_bar_m: Option<Vec<f64>>,
    theta_bar_big_m: Option<Vec<f64>>,
    containment: Option<f64>,
    delays: Vec<DelayOut>,
}

#[derive(Serialize)]
struct DelayOut {
    fault_time: f64,
    channel: Option<usize>,
    s: Option<f64>,
    d: Option<f64>,
    z: Option<f64>,
    reference: Option<f64>,
}

pub struct RunOptions {
    pub horizon: f64,
    pub noise: bool,
    pub seed: u64,
    pub gamma_scale: f64,
    pub points: usize,
}

pub fn simulate_json(name: &str, overrides: &str, opts: &RunOptions) -> Result<String, String> {
    simulate_scenario(&scenario(name, overrides)?, opts)
}

fn simulate_scenario(s: &Scenario, opts: &RunOptions) -> Result<String, String> {
    let mut cfg = SimConfig::for_scenario(s);
    if opts.horizon > 0.0 {
        cfg.horizon = opts.horizon;
    }
    cfg.noise = opts.noise;
    cfg.seed = opts.seed;
    cfg.gamma_scale = opts.gamma_scale;
    let sim = Simulation::new(s, cfg).map_err(|e| e.to_string())?;
    let count = sim.sample_count();
    let stride = count.div_ceil(opts.points.max(2)).max(1);

    let mut series = Series::default();
    let (mut times, mut s_all, mut d_all, mut z_all) =
        (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut s_channels: Vec<Vec<bool>> = vec![Vec::new(); s.spec.p];
    let (mut certified, mut contained) = (0usize, 0usize);
    let mut pending = (false, false, false);
    let mut last = None;
    for (k, smp) in sim.enumerate() {
        let smp = smp.map_err(|e| e.to_string())?;
        let ind = &smp.indicators;
        let d_any = ind.d.as_ref().is_some_and(|d| d.any);
        times.push(smp.t);
        s_all.push(ind.s.any);
        d_all.push(d_any);
        z_all.push(ind.z.any);
        for (ch, v) in s_channels.iter_mut().zip(&ind.s.channels) {
            ch.push(*v);
        }
        if let Some(order) = smp.report.certified {
            certified += 1;
            contained += usize::from(smp.theta_contained(order, 1e-9));
        }
        pending = (
            pending.0 | ind.s.any,
            pending.1 | d_any,
            pending.2 | ind.z.any,
        );
        if k % stride == 0 || k + 1 == count {
            let v = |x: &setobs::numerics::RealVector| x.as_slice().to_vec();
            series.t.push(smp.t);
            series.theta.push(v(&smp.theta));
            series.theta_hat_m.push(v(&smp.theta_hat[Side::Lower]));
            series.theta_hat_big_m.push(v(&smp.theta_hat[Side::Upper]));
            series.x.push(v(&smp.x));
            series.xi_m.push(v(&smp.xi.lower));
            series.xi_big_m.push(v(&smp.xi.upper));
            series.s.push(pending.0);
            series.d.push(pending.1);
            series.z.push(pending.2);
            pending = (false, false, false);
        }
        last = Some(smp.report);
    }

    let mut fault_times = s.fault_times.clone();
    fault_times.dedup();
    let delay = |sig: &[bool], tf: f64| detection_delay(&times, sig, &[tf])[0];
    let mut delays: Vec<DelayOut> = fault_times
        .iter()
        .map(|&tf| DelayOut {
            fault_time: tf,
            channel: None,
            s: delay(&s_all, tf),
            d: delay(&d_all, tf),
            z: delay(&z_all, tf),
            reference: None,
        })
        .collect();
    delays.extend(
        s.expected
            .delays
            .iter()
            .filter(|e| e.channel < s_channels.len())
            .map(|e| DelayOut {
                fault_time: e.fault_time,
                channel: Some(e.channel + 1),
                s: delay(&s_channels[e.channel], e.fault_time),
                d: None,
                z: None,
                reference: Some(e.reference_delay),
            }),
    );

    let bar = last.as_ref().and_then(|r| r.theta_bar_inf.clone());
    let out = SimulateOut {
        scenario: s.name.clone(),
        samples: count,
        series,
        branch: last
            .as_ref()
            .map_or("none", |r| r.branch_label())
            .to_string(),
        certified: last.as_ref().and_then(|r| r.certified),
        theta_bar_m: bar.as_ref().map(|b| b.lower.as_slice().to_vec()),
        theta_bar_big_m: bar.as_ref().map(|b| b.upper.as_slice().to_vec()),
        containment: (certified > 0).then(|| contained as f64 / certified as f64),
        delays,
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

/// Tank run with every fault vector multiplied by `fault_scale`.
pub fn fault_probe_json(
    name: &str,
    fault_scale: f64,
    noise: bool,
    seed: u64,
) -> Result<String, String> {
    let mut params = ScenarioParams::defaults(name).map_err(|e| e.to_string())?;
    let (ScenarioParams::Tank1(p) | ScenarioParams::Tank2(p)) = &mut params else {
        return Err(format!("'{name}' has no faults; use tank1 or tank2"));
    };
    for v in p.fault_values.iter_mut().flatten() {
        *v *= fault_scale;
    }
    let s = params.build_unchecked().map_err(|e| e.to_string())?;
    simulate_scenario(
        &s,
        &RunOptions {
            horizon: 0.0,
            noise,
            seed,
            gamma_scale: 1.0,
            points: 800,
        },
    )
}

fn js(r: Result<String, String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

/// Assumption 2 report and effective parameters of a scenario.
#[wasm_bindgen]
pub fn verify(name: &str, overrides: &str) -> Result<String, JsError> {
    js(verify_json(name, overrides))
}

/// Runs a scenario and returns at most `points` decimated samples plus a summary.
#[wasm_bindgen]
pub fn simulate(
    name: &str,
    overrides: &str,
    horizon: f64,
    noise: bool,
    seed: u32,
    gamma_scale: f64,
    points: u32,
) -> Result<String, JsError> {
    let opts = RunOptions {
        horizon,
        noise,
        seed: u64::from(seed),
        gamma_scale,
        points: points as usize,
    };
    js(simulate_json(name, overrides, &opts))
}

/// Detection delays of a tank scenario with scaled fault magnitudes.
#[wasm_bindgen]
pub fn fault_probe(
    name: &str,
    fault_scale: f64,
    noise: bool,
    seed: u32,
) -> Result<String, JsError> {
    js(fault_probe_json(name, fault_scale, noise, u64::from(seed)))
}
