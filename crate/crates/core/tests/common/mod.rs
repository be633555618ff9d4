//! Checks shared by the property suite and the acceptance report.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

use setobs::model::{PerSide, Side};
use setobs::monotone::cooperative_flow_sign_oracle;
use setobs::numerics::{integrate_fixed_step, RealMatrix, RealVector};
use setobs::scenarios::{three_tank_a, three_tank_rhs, Example1Params, Scenario, ScenarioParams};
use setobs::sim::{SimConfig, Simulation};
use setobs::verifier::{lemma1_bound, Accumulators};

/// Metzler matrix with off-diagonals `off` and each diagonal entry pushed
/// `slack` below minus its row sum, so it is Hurwitz.
pub fn metzler_hurwitz(n: usize, off: &[f64], slack: &[f64]) -> RealMatrix {
    let mut m = DMatrix::from_row_slice(n, n, off);
    for i in 0..n {
        let row: f64 = (0..n).filter(|j| *j != i).map(|j| m[(i, j)]).sum();
        m[(i, i)] = -(row + slack[i]);
    }
    m
}

/// `ṡ = Ms + r(t)` with `r_i = amp_i |sin(freq_i t)|` from `s0 ≥ 0`.
pub fn sign_preserved(m: &RealMatrix, s0: &[f64], amp: &[f64], freq: &[f64]) -> bool {
    let n = s0.len();
    let r = |t: f64| RealVector::from_fn(n, |i, _| amp[i] * (freq[i] * t).sin().abs());
    cooperative_flow_sign_oracle(m, r, &DVector::from_column_slice(s0), 10.0, 1e-2).unwrap()
}

/// Largest gap between the raw tank model and its factored `A(x)x + Bu + θ/S_c` form.
pub fn tank_identity_gap(x: [f64; 3], u: [f64; 2], theta: [f64; 3], r: f64) -> f64 {
    let s_c = 0.0154;
    let a = [1.329e-4 * r, 1.329e-4 * r, 1.772e-4 * r];
    let x = DVector::from_column_slice(&x);
    let u = DVector::from_column_slice(&u);
    let theta = DVector::from_column_slice(&theta);
    let raw = three_tank_rhs(&x, &u, &theta, a, s_c);
    let mut factored = three_tank_a(&x, a, s_c) * &x + &theta / s_c;
    factored[0] += u[0] / s_c;
    factored[1] += u[1] / s_c;
    (raw - factored).amax()
}

fn signal(k: usize, seed: &[f64]) -> (RealMatrix, RealVector) {
    let t = k as f64 * 1e-2;
    let omega = DMatrix::from_fn(2, 2, |i, j| {
        seed[2 * i + j] * (t * (1.0 + (i + 2 * j) as f64)).sin()
    });
    let residual = DVector::from_fn(2, |i, _| seed[4 + i] * (0.7 * t + i as f64).cos());
    (omega, residual)
}

fn accumulate(
    acc: &mut Accumulators,
    c: &RealMatrix,
    range: std::ops::Range<usize>,
    seed: &[f64],
    scale: f64,
) {
    for k in range {
        let (om, r) = signal(k, seed);
        let r = r * scale;
        acc.update(1e-2, c, PerSide::new(&om, &om), PerSide::new(&r, &r));
    }
}

/// Worst error of: splitting a trace in two halves, scaling the residual
/// by `alpha`, and the asymmetry of `I_R`.
pub fn accumulator_errors(seed: &[f64], c_entries: &[f64], alpha: f64) -> f64 {
    let c = DMatrix::from_row_slice(2, 2, c_entries);
    let mut whole = Accumulators::new(0.0, 2, 10.0);
    accumulate(&mut whole, &c, 0..1001, seed, 1.0);
    let mut first = Accumulators::new(0.0, 2, 10.0);
    accumulate(&mut first, &c, 0..501, seed, 1.0);
    let second = whole.window(5.0).unwrap();
    let mut scaled = Accumulators::new(0.0, 2, 10.0);
    accumulate(&mut scaled, &c, 0..1001, seed, alpha);
    let mut worst = 0.0f64;
    for side in Side::BOTH {
        worst = worst
            .max((&first.i_b[side] + &second.i_b[side] - &whole.i_b[side]).amax())
            .max((&first.i_r[side] + &second.i_r[side] - &whole.i_r[side]).amax())
            .max((&scaled.i_b[side] - &whole.i_b[side] * alpha).amax())
            .max((&whole.i_r[side] - whole.i_r[side].transpose()).amax());
    }
    worst
}

/// Simulates `ṗ = -R Rᵀ p + b` with a rotating `R` of amplitude `alpha`
/// (excited with `ℓ = ϑ = 1`) and returns the largest `‖p(t)‖ - bound(t)`.
pub fn lemma1_excess(
    alpha: f64,
    cycles: usize,
    phase: f64,
    beta: f64,
    nu: f64,
    p0: [f64; 2],
) -> f64 {
    let w = 2.0 * std::f64::consts::PI * cycles as f64;
    let rhs = |t: f64, p: &RealVector| {
        let r = DVector::from_vec(vec![
            alpha * (w * t + phase).cos(),
            alpha * (w * t + phase).sin(),
        ]);
        let b = DVector::from_vec(vec![beta * (nu * t).sin(), beta * (nu * t).cos()]);
        -(&r * r.dot(p)) + b
    };
    let p0 = DVector::from_column_slice(&p0);
    let traj = integrate_fixed_step(rhs, &p0, 0.0, 20.0, 1e-3).unwrap();
    traj.times
        .iter()
        .zip(&traj.states)
        .map(|(t, p)| p.norm() - lemma1_bound(1.0, 1.0, 1.0, p0.norm(), beta, *t))
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn example1_with_horizon(horizon: f64) -> Scenario {
    ScenarioParams::Example1(Example1Params {
        horizon,
        ..Example1Params::default()
    })
    .build()
    .unwrap()
}

/// Elementwise violations of `Ω_M ≤ Ω ≤ Ω_m ≤ 0` along an Example 1 run.
pub fn omega_violations(horizon: f64) -> usize {
    let s = example1_with_horizon(horizon);
    let sim = Simulation::new(&s, SimConfig::for_scenario(&s)).unwrap();
    let mut violations = 0usize;
    for smp in sim {
        let smp = smp.unwrap();
        let ideal = smp
            .ideal_omega
            .as_ref()
            .expect("example1 runs the ideal observer");
        for ((lo, hi), id) in smp
            .omega
            .lower
            .iter()
            .zip(smp.omega.upper.iter())
            .zip(ideal.iter())
        {
            if *lo > 1e-9 || *hi > 1e-9 || *id > 1e-9 {
                violations += 1;
            }
            if *hi > *id + 1e-9 || *id > *lo + 1e-9 {
                violations += 1;
            }
        }
    }
    violations
}

pub fn trace_bytes(s: &Scenario, noise: bool) -> Vec<u8> {
    let mut cfg = SimConfig::for_scenario(s);
    if noise {
        cfg = cfg.with_noise(7);
    }
    let mut out = Vec::new();
    for smp in Simulation::new(s, cfg).unwrap() {
        let smp = smp.unwrap();
        for v in smp
            .x
            .iter()
            .chain(smp.theta_hat.lower.iter())
            .chain(smp.xi.upper.iter())
            .chain(smp.y_v.iter())
        {
            out.extend_from_slice(&v.to_bits().to_le_bytes());
        }
    }
    out
}

pub fn short_tank2(horizon: f64) -> Scenario {
    match ScenarioParams::defaults("tank2").unwrap() {
        ScenarioParams::Tank2(mut p) => {
            p.horizon = horizon;
            ScenarioParams::Tank2(p).build().unwrap()
        }
        _ => unreachable!(),
    }
}

/// Two runs of each configuration produce identical bits.
pub fn deterministic() -> bool {
    let e1 = example1_with_horizon(5.0);
    let t2 = short_tank2(20.0);
    trace_bytes(&e1, false) == trace_bytes(&e1, false)
        && trace_bytes(&e1, true) == trace_bytes(&e1, true)
        && trace_bytes(&t2, true) == trace_bytes(&t2, true)
}
