//! Cooperativity, Hurwitz and order checks, and the observer-design
//! assumption (cooperative Hurwitz error matrices, nonnegative `G`).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{LpvSystemSpec, ObserverGains, Side};
use crate::numerics::{eig_real_parts, integrate_fixed_step, RealMatrix, RealVector};

pub const HURWITZ_TOL: f64 = 1e-9;
pub const SIGN_TOL: f64 = 1e-9;
pub const GRID_POINTS: usize = 11;
pub const MONTE_CARLO_SAMPLES: usize = 2000;

pub fn is_cooperative(m: &RealMatrix, tol: f64) -> bool {
    assert!(m.is_square(), "cooperativity needs a square matrix");
    let n = m.nrows();
    (0..n).all(|i| (0..n).all(|j| i == j || m[(i, j)] >= -tol))
}

/// Largest off-diagonal negative excursion (0 when cooperative).
pub fn worst_offdiag(m: &RealMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = f64::INFINITY;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                worst = worst.min(m[(i, j)]);
            }
        }
    }
    if worst.is_finite() {
        worst
    } else {
        0.0
    }
}

pub fn max_eig_real(m: &RealMatrix) -> Result<f64> {
    Ok(eig_real_parts(m)?
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max))
}

pub fn is_hurwitz(m: &RealMatrix, tol: f64) -> Result<bool> {
    Ok(max_eig_real(m)? < -tol)
}

pub fn elementwise_leq(a: &RealMatrix, b: &RealMatrix, tol: f64) -> Result<bool> {
    if a.shape() != b.shape() {
        return Err(Error::Dimension(format!(
            "{:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(a.iter().zip(b.iter()).all(|(x, y)| *x <= *y + tol))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assumption2Report {
    pub cooperative_lower: bool,
    pub cooperative_upper: bool,
    pub hurwitz_lower: bool,
    pub hurwitz_upper: bool,
    pub g_nonnegative: bool,
    pub worst_offdiag_entry: f64,
    pub max_eig_realpart: f64,
    pub samples_used: usize,
}

impl Assumption2Report {
    pub fn passed(&self) -> bool {
        self.cooperative_lower
            && self.cooperative_upper
            && self.hurwitz_lower
            && self.hurwitz_upper
            && self.g_nonnegative
    }
}

/// Checks `A_o(y+v) - L_o C` (cooperative, Hurwitz) and `G(y+v) >= 0` at
/// every pair of samples. Bounds that do not depend on `y` are checked once.
pub fn verify_assumption2(
    spec: &LpvSystemSpec,
    gains: &ObserverGains,
    y_samples: &[RealVector],
    v_samples: &[RealVector],
) -> Assumption2Report {
    let mut report = Assumption2Report {
        cooperative_lower: true,
        cooperative_upper: true,
        hurwitz_lower: true,
        hurwitz_upper: true,
        g_nonnegative: true,
        worst_offdiag_entry: f64::INFINITY,
        max_eig_realpart: f64::NEG_INFINITY,
        samples_used: 0,
    };
    let fallback_y = [&spec.c * (&spec.x_lower + &spec.x_upper) * 0.5];
    let zero_v = [RealVector::zeros(spec.p)];
    let ys: &[RealVector] = if y_samples.is_empty() {
        &fallback_y
    } else {
        y_samples
    };
    let vs: &[RealVector] = if v_samples.is_empty() {
        &zero_v
    } else {
        v_samples
    };
    let mut a_checked = false;
    for y in ys {
        for v in vs {
            let yv = y + v;
            report.samples_used += 1;
            let g = (spec.g)(0.0, &yv);
            if g.iter().any(|e| *e < 0.0) {
                report.g_nonnegative = false;
            }
            if a_checked && !spec.y_dependent {
                continue;
            }
            a_checked = true;
            for side in Side::BOTH {
                let m = spec.a_bound(side, 0.0, &yv) - gains.l(side) * &spec.c;
                let coop = is_cooperative(&m, 0.0);
                report.worst_offdiag_entry = report.worst_offdiag_entry.min(worst_offdiag(&m));
                let (hurwitz, eig) = match max_eig_real(&m) {
                    Ok(e) => (e < -HURWITZ_TOL, e),
                    Err(_) => (false, f64::NAN),
                };
                report.max_eig_realpart = report.max_eig_realpart.max(eig);
                match side {
                    Side::Lower => {
                        report.cooperative_lower &= coop;
                        report.hurwitz_lower &= hurwitz;
                    }
                    Side::Upper => {
                        report.cooperative_upper &= coop;
                        report.hurwitz_upper &= hurwitz;
                    }
                }
            }
        }
    }
    if !report.worst_offdiag_entry.is_finite() {
        report.worst_offdiag_entry = 0.0;
    }
    report
}

/// Interval image of the state box under `C`.
pub fn output_box(spec: &LpvSystemSpec) -> (RealVector, RealVector) {
    let pos = spec.c.map(|v| v.max(0.0));
    let neg = spec.c.map(|v| v.min(0.0));
    let lo = &pos * &spec.x_lower + &neg * &spec.x_upper;
    let hi = &pos * &spec.x_upper + &neg * &spec.x_lower;
    (lo, hi)
}

/// Default sample sets: an 11-point grid per output dimension with noise
/// corners `{-v, 0, +v}` up to 3 outputs, seeded Monte Carlo above that.
pub fn default_samples(spec: &LpvSystemSpec, seed: u64) -> (Vec<RealVector>, Vec<RealVector>) {
    let (lo, hi) = output_box(spec);
    let p = spec.p;
    let mut ys = Vec::new();
    let mut vs = Vec::new();
    if p <= 3 {
        let total = GRID_POINTS.pow(p as u32);
        for mut idx in 0..total {
            let mut y = RealVector::zeros(p);
            for i in 0..p {
                let k = idx % GRID_POINTS;
                idx /= GRID_POINTS;
                y[i] = lo[i] + (hi[i] - lo[i]) * k as f64 / (GRID_POINTS - 1) as f64;
            }
            ys.push(y);
        }
        for mut idx in 0..3usize.pow(p as u32) {
            let mut v = RealVector::zeros(p);
            for i in 0..p {
                v[i] = (idx % 3) as f64 - 1.0;
                idx /= 3;
                v[i] *= spec.v_max[i];
            }
            vs.push(v);
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..MONTE_CARLO_SAMPLES {
            ys.push(RealVector::from_fn(p, |i, _| rng.gen_range(lo[i]..=hi[i])));
        }
        vs.push(RealVector::zeros(p));
        vs.push(spec.v_max.clone());
        vs.push(-&spec.v_max);
        for _ in 0..16 {
            vs.push(RealVector::from_fn(p, |i, _| {
                spec.v_max[i] * rng.gen_range(-1.0..=1.0)
            }));
        }
    }
    (ys, vs)
}

/// Simulates `ṡ = M s + r(t)` and reports whether every component stays
/// above `-SIGN_TOL`.
pub fn cooperative_flow_sign_oracle(
    m: &RealMatrix,
    r: impl Fn(f64) -> RealVector,
    s0: &RealVector,
    horizon: f64,
    h: f64,
) -> Result<bool> {
    let traj = integrate_fixed_step(|t, s: &RealVector| m * s + r(t), s0, 0.0, horizon, h)?;
    Ok(traj
        .states
        .iter()
        .all(|s| s.iter().all(|v| *v >= -SIGN_TOL)))
}
