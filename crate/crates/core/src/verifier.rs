//! On-line applicability checks for the adaptive set observer: running
//! averages, excitation Gramians, the bracketing-theorem tests, the
//! state-interval pairing and the averaged-system oracle.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{IntervalOrder, PerSide, Side, SignCase};
use crate::monotone::is_cooperative;
use crate::numerics::{
    integrate_fixed_step, min_symmetric_eigenvalue, solve, RealMatrix, RealVector, Trajectory,
};
use crate::observers::Pairing;

pub const STRICT_MARGIN: f64 = 1e-9;
pub const THETA_MIN: f64 = 1e-6;

/// Trapezoidal running integrals of `ΩᵀCᵀ(y_v - Cζ)` and `ΩᵀCᵀCΩ` per
/// observer copy, with a history of cumulative values for window queries.
#[derive(Debug, Clone, PartialEq)]
pub struct Accumulators {
    pub t_start: f64,
    pub t: f64,
    pub i_b: PerSide<RealVector>,
    pub i_r: PerSide<RealMatrix>,
    samples: usize,
    last_b: Option<PerSide<RealVector>>,
    last_r: Option<PerSide<RealMatrix>>,
    /// Sample times of the stored cumulative integrals.
    history_t: VecDeque<f64>,
    /// Flattened `(I_b_m, I_b_M, I_R_m, I_R_M)` per stored time.
    history: VecDeque<f64>,
    capacity: f64,
}

/// Window integrals and their exact span.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowIntegrals {
    pub span: f64,
    pub i_b: PerSide<RealVector>,
    pub i_r: PerSide<RealMatrix>,
}

impl Accumulators {
    /// `capacity` is the longest window (in seconds) that will be queried.
    pub fn new(t_start: f64, q: usize, capacity: f64) -> Self {
        Accumulators {
            t_start,
            t: t_start,
            i_b: PerSide::from_fn(|_| RealVector::zeros(q)),
            i_r: PerSide::from_fn(|_| RealMatrix::zeros(q, q)),
            samples: 0,
            last_b: None,
            last_r: None,
            history_t: VecDeque::new(),
            history: VecDeque::new(),
            capacity,
        }
    }

    fn stride(&self) -> usize {
        let q = self.i_b.lower.len();
        2 * q + 2 * q * q
    }

    pub fn elapsed(&self) -> f64 {
        self.t - self.t_start
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    /// Adds one sample. The first sample marks `t_start`; every later one
    /// advances time by `h`.
    pub fn update(
        &mut self,
        h: f64,
        c: &RealMatrix,
        omega: PerSide<&RealMatrix>,
        residual: PerSide<&RealVector>,
    ) {
        let f_b = PerSide::from_fn(|s| (c * omega[s]).transpose() * residual[s]);
        let f_r = PerSide::from_fn(|s| {
            let co = c * omega[s];
            let r = co.transpose() * &co;
            (&r + r.transpose()) * 0.5
        });
        if let (Some(lb), Some(lr)) = (&self.last_b, &self.last_r) {
            for s in Side::BOTH {
                self.i_b[s] += (&lb[s] + &f_b[s]) * (0.5 * h);
                self.i_r[s] += (&lr[s] + &f_r[s]) * (0.5 * h);
            }
            self.t += h;
        }
        self.samples += 1;
        self.last_b = Some(f_b);
        self.last_r = Some(f_r);
        self.history_t.push_back(self.t);
        for s in Side::BOTH {
            self.history.extend(self.i_b[s].iter());
        }
        for s in Side::BOTH {
            self.history.extend(self.i_r[s].iter());
        }
        let stride = self.stride();
        while self.history_t.len() > 2 && self.history_t[1] <= self.t - self.capacity - 1e-9 {
            self.history_t.pop_front();
            self.history.drain(..stride);
        }
    }

    /// Integrals over the trailing window of length `len`, using the stored
    /// sample closest to `t - len`.
    pub fn window(&self, len: f64) -> Result<WindowIntegrals> {
        let h_guess = if self.samples > 1 {
            self.elapsed() / (self.samples - 1) as f64
        } else {
            0.0
        };
        if self.samples == 0 || self.elapsed() + 0.5 * h_guess < len {
            return Err(Error::WindowTooShort {
                needed: len,
                available: self.elapsed(),
            });
        }
        let target = self.t - len;
        let times = &self.history_t;
        let idx = times.partition_point(|t| *t < target);
        let pick = if idx == 0 {
            0
        } else if idx >= times.len() {
            times.len() - 1
        } else if (times[idx] - target).abs() <= (target - times[idx - 1]).abs() {
            idx
        } else {
            idx - 1
        };
        let q = self.i_b.lower.len();
        let base = pick * self.stride();
        let at = |k: usize| self.history[base + k];
        let b_m = RealVector::from_fn(q, |i, _| at(i));
        let b_big = RealVector::from_fn(q, |i, _| at(q + i));
        let r_m = RealMatrix::from_fn(q, q, |i, j| at(2 * q + j * q + i));
        let r_big = RealMatrix::from_fn(q, q, |i, j| at(2 * q + q * q + j * q + i));
        Ok(WindowIntegrals {
            span: self.t - times[pick],
            i_b: PerSide::new(&self.i_b.lower - b_m, &self.i_b.upper - b_big),
            i_r: PerSide::new(&self.i_r.lower - r_m, &self.i_r.upper - r_big),
        })
    }

    /// Running estimates `b̂ = -I_b/t`, `R̂ = I_R/t` since `t_start`.
    pub fn estimates(&self) -> Result<PerSide<(RealVector, RealMatrix)>> {
        let span = self.elapsed();
        if span <= 0.0 {
            return Err(Error::NotIdentifiable("no elapsed time".into()));
        }
        Ok(PerSide::from_fn(|s| {
            (-&self.i_b[s] / span, &self.i_r[s] / span)
        }))
    }
}

/// Solves `R θ = b`, treating a numerically singular `R` as not yet
/// identifiable.
pub fn equilibrium(b: &RealVector, r: &RealMatrix) -> Result<RealVector> {
    let scale = r.amax().max(f64::MIN_POSITIVE);
    let lam = min_symmetric_eigenvalue(r);
    if !(lam > 1e-12 * scale && scale > f64::MIN_POSITIVE) {
        return Err(Error::NotIdentifiable(format!(
            "R has minimum eigenvalue {lam:e}"
        )));
    }
    solve(r, b).map_err(|e| Error::NotIdentifiable(e.to_string()))
}

pub fn theta_bar_infty(acc: &Accumulators) -> Result<PerSide<RealVector>> {
    let est = acc.estimates()?;
    Ok(PerSide::new(
        equilibrium(&est.lower.0, &est.lower.1)?,
        equilibrium(&est.upper.0, &est.upper.1)?,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeResult {
    pub ok: bool,
    pub theta_hat: f64,
}

/// Minimum eigenvalue of `∫_{t-ℓ}^t ΩᵀCᵀCΩ` per copy.
pub fn pe_check(acc: &Accumulators, ell: f64, theta_min: f64) -> Result<PerSide<PeResult>> {
    let w = acc.window(ell)?;
    let lower = min_symmetric_eigenvalue(&w.i_r.lower);
    let upper = min_symmetric_eigenvalue(&w.i_r.upper);
    Ok(PerSide::new(
        PeResult {
            ok: lower >= theta_min,
            theta_hat: lower,
        },
        PeResult {
            ok: upper >= theta_min,
            theta_hat: upper,
        },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Theorem1Branch {
    IIa,
    IIb,
    None,
}

impl Theorem1Branch {
    pub fn order(self) -> Option<IntervalOrder> {
        match self {
            Theorem1Branch::IIa => Some(IntervalOrder::Reversed),
            Theorem1Branch::IIb => Some(IntervalOrder::Direct),
            Theorem1Branch::None => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Theorem1Branch::IIa => "ii.a",
            Theorem1Branch::IIb => "ii.b",
            Theorem1Branch::None => "none",
        }
    }
}

fn strictly_less(a: &RealVector, b: &RealVector, margin: f64) -> bool {
    a.iter().zip(b.iter()).all(|(x, y)| *x + margin < *y)
}

/// Branch test on given equilibria `θ̄_o`.
pub fn theorem1_branch(
    theta_bar: &PerSide<RealVector>,
    theta_lo: &RealVector,
    theta_hi: &RealVector,
    margin: f64,
) -> Theorem1Branch {
    if strictly_less(theta_hi, &theta_bar.lower, margin)
        && strictly_less(&theta_bar.upper, theta_lo, margin)
    {
        Theorem1Branch::IIa
    } else if strictly_less(theta_hi, &theta_bar.upper, margin)
        && strictly_less(&theta_bar.lower, theta_lo, margin)
    {
        Theorem1Branch::IIb
    } else {
        Theorem1Branch::None
    }
}

pub fn check_theorem1(
    acc: &Accumulators,
    theta_lo: &RealVector,
    theta_hi: &RealVector,
) -> Result<Theorem1Branch> {
    Ok(theorem1_branch(
        &theta_bar_infty(acc)?,
        theta_lo,
        theta_hi,
        STRICT_MARGIN,
    ))
}

fn all_geq(v: &RealVector, margin: f64) -> bool {
    v.iter().all(|x| *x > margin)
}

fn all_leq(v: &RealVector, margin: f64) -> bool {
    v.iter().all(|x| *x < -margin)
}

/// Instantaneous sign conditions for one assignment of copies to the lower
/// and upper endpoints.
pub struct InstantSignals<'a> {
    pub c: &'a RealMatrix,
    pub gamma: PerSide<&'a RealMatrix>,
    pub omega: PerSide<&'a RealMatrix>,
    pub residual: PerSide<&'a RealVector>,
}

/// Whether every `-Γ_o Ω_oᵀCᵀCΩ_o` is cooperative at this instant.
pub fn adaptation_cooperative(sig: &InstantSignals) -> bool {
    Side::BOTH.iter().all(|&s| {
        let co = sig.c * sig.omega[s];
        let m = -(sig.gamma[s] * (co.transpose() * &co));
        is_cooperative(&m, 0.0)
    })
}

/// Instant conditions: the lower copy `o` needs
/// `Γ_oΩ_oᵀCᵀ(r_o + CΩ_oθ_lo) ≥ 0` and `Γ_oΩ_oᵀCᵀCΩ_o(θ_hi - θ_lo) ≥ 0`,
/// the upper copy `O` the mirrored `≤ 0` pair.
pub fn theorem2_instant(
    sig: &InstantSignals,
    theta_lo: &RealVector,
    theta_hi: &RealVector,
    margin: f64,
) -> Option<IntervalOrder> {
    if !adaptation_cooperative(sig) {
        return None;
    }
    let holds = |lo_side: Side| {
        let hi_side = lo_side.other();
        let term = |s: Side, anchor: &RealVector| {
            let co = sig.c * sig.omega[s];
            let g = sig.gamma[s] * co.transpose();
            (
                &g * (sig.residual[s] + &co * anchor),
                &g * (&co * (theta_hi - theta_lo)),
            )
        };
        let (lo_a, lo_b) = term(lo_side, theta_lo);
        let (hi_a, hi_b) = term(hi_side, theta_hi);
        all_geq(&lo_a, margin)
            && all_geq(&lo_b, margin)
            && all_leq(&hi_a, margin)
            && all_geq(&hi_b, margin)
    };
    for (side, order) in [
        (Side::Lower, IntervalOrder::Direct),
        (Side::Upper, IntervalOrder::Reversed),
    ] {
        if holds(side) {
            return Some(order);
        }
    }
    None
}

/// Averaged conditions on window estimates `(b̂_o, R̂_o)`:
/// `b_lo ≤ R_lo θ_lo`, `R_lo(θ_hi - θ_lo) ≥ 0`, `b_hi ≥ R_hi θ_hi`,
/// `R_hi(θ_lo - θ_hi) ≤ 0`.
pub fn theorem2_periodic(
    est: &PerSide<(RealVector, RealMatrix)>,
    theta_lo: &RealVector,
    theta_hi: &RealVector,
    margin: f64,
) -> Option<IntervalOrder> {
    let width = theta_hi - theta_lo;
    let holds = |lo_side: Side| {
        let (b_l, r_l) = &est[lo_side];
        let (b_u, r_u) = &est[lo_side.other()];
        all_geq(&(r_l * theta_lo - b_l), margin)
            && all_geq(&(r_l * &width), margin)
            && all_geq(&(b_u - r_u * theta_hi), margin)
            && all_geq(&(r_u * &width), margin)
    };
    for (side, order) in [
        (Side::Lower, IntervalOrder::Direct),
        (Side::Upper, IntervalOrder::Reversed),
    ] {
        if holds(side) {
            return Some(order);
        }
    }
    None
}

/// Which estimate drives each state-interval endpoint.
pub fn theorem3_pairing(sign_case: SignCase, order: Option<IntervalOrder>) -> Result<Pairing> {
    let order = order.ok_or(Error::NoCertifiedOrdering)?;
    let lo = order.lower_side();
    let hi = order.upper_side();
    Ok(match sign_case {
        SignCase::Nonnegative => Pairing {
            lower_from: lo,
            upper_from: hi,
        },
        SignCase::Nonpositive => Pairing {
            lower_from: hi,
            upper_from: lo,
        },
    })
}

/// `θ̂' = Γ(b - Rθ̂)` from `θ̂0`.
pub fn averaged_oracle(
    b: &RealVector,
    r: &RealMatrix,
    gamma: &RealMatrix,
    theta0: &RealVector,
    horizon: f64,
    h: f64,
) -> Result<Trajectory> {
    integrate_fixed_step(
        |_, th: &RealVector| gamma * (b - r * th),
        theta0,
        0.0,
        horizon,
        h,
    )
}

/// Bound on `‖p(t)‖` for `ṗ = -γ R Rᵀ p + b` with an `(ℓ, ϑ)`-excited `R`.
pub fn lemma1_bound(gamma: f64, theta: f64, ell: f64, p0_norm: f64, b_sup: f64, t: f64) -> f64 {
    let decay = (-0.5 * gamma * theta / ell * (t - ell)).exp();
    p0_norm * decay + (1.0 + 2.0 / (theta * gamma) * (-0.5 * theta * gamma).exp()) * ell * b_sup
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaMatch {
    pub scale: f64,
    pub halvings: usize,
    pub deviation: f64,
}

/// Shrinks the adaptation gain until `deviation(scale)` (full observer vs
/// averaged system, as a fraction of the travelled distance) is within
/// `match_tol`.
pub fn gamma_search(
    mut deviation: impl FnMut(f64) -> Result<f64>,
    shrink: f64,
    match_tol: f64,
    max_steps: usize,
) -> Result<GammaMatch> {
    if !(shrink > 0.0 && shrink < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "shrink factor {shrink} must lie in (0, 1)"
        )));
    }
    let mut scale = 1.0;
    for k in 0..=max_steps {
        let dev = deviation(scale)?;
        if dev <= match_tol {
            return Ok(GammaMatch {
                scale,
                halvings: k,
                deviation: dev,
            });
        }
        scale *= shrink;
    }
    Err(Error::NoGammaMatch {
        attempts: max_steps + 1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LoopKind {
    Competitive,
    Cooperative,
    Neither,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifierSettings {
    /// Excitation window `ℓ`.
    pub pe_window: f64,
    /// Averaging window `T` for the periodic conditions; `None` disables them.
    pub periodic_window: Option<f64>,
    pub theta_min: f64,
    pub margin: f64,
}

impl Default for VerifierSettings {
    fn default() -> Self {
        VerifierSettings {
            pe_window: 2.0 * std::f64::consts::PI,
            periodic_window: None,
            theta_min: THETA_MIN,
            margin: STRICT_MARGIN,
        }
    }
}

/// Per-sample snapshot of the checks.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub t: f64,
    pub pe: Option<PerSide<PeResult>>,
    pub estimates: Option<PerSide<(RealVector, RealMatrix)>>,
    pub theta_bar_inf: Option<PerSide<RealVector>>,
    pub theorem1_branch: Theorem1Branch,
    pub theorem2_instant: Option<IntervalOrder>,
    pub theorem2_periodic: Option<IntervalOrder>,
    pub loop_kind: LoopKind,
    pub certified: Option<IntervalOrder>,
    pub pairing: Option<Pairing>,
    pub valid: bool,
}

impl ConditionReport {
    pub fn pe_ok(&self) -> PerSide<bool> {
        match &self.pe {
            Some(p) => PerSide::new(p.lower.ok, p.upper.ok),
            None => PerSide::new(false, false),
        }
    }

    /// Short label of the certifying test, `none` when nothing certifies.
    pub fn branch_label(&self) -> &'static str {
        match (
            self.theorem1_branch,
            self.theorem2_instant,
            self.theorem2_periodic,
        ) {
            (Theorem1Branch::IIa, _, _) => "T1.ii.a",
            (Theorem1Branch::IIb, _, _) => "T1.ii.b",
            (_, Some(IntervalOrder::Direct), _) => "T2.a.direct",
            (_, Some(IntervalOrder::Reversed), _) => "T2.a.reversed",
            (_, _, Some(IntervalOrder::Direct)) => "T2.b.direct",
            (_, _, Some(IntervalOrder::Reversed)) => "T2.b.reversed",
            _ => "none",
        }
    }
}

/// Streaming verifier owned by one simulation loop.
#[derive(Debug, Clone)]
pub struct Verifier {
    pub settings: VerifierSettings,
    pub acc: Accumulators,
    c: RealMatrix,
    c_nonnegative: bool,
    instant_broken: bool,
}

impl Verifier {
    pub fn new(settings: VerifierSettings, c: RealMatrix, q: usize, t_start: f64) -> Self {
        let capacity = settings
            .pe_window
            .max(settings.periodic_window.unwrap_or(0.0));
        let c_nonnegative = c.iter().all(|v| *v >= 0.0);
        Verifier {
            settings,
            acc: Accumulators::new(t_start, q, capacity),
            c,
            c_nonnegative,
            instant_broken: false,
        }
    }

    /// Restarts all averages at a parameter-box boundary.
    pub fn reset(&mut self, t_start: f64) {
        let q = self.acc.i_b.lower.len();
        let capacity = self
            .settings
            .pe_window
            .max(self.settings.periodic_window.unwrap_or(0.0));
        self.acc = Accumulators::new(t_start, q, capacity);
        self.instant_broken = false;
    }

    #[allow(clippy::too_many_arguments)]
    pub fn record(
        &mut self,
        h: f64,
        gamma: PerSide<&RealMatrix>,
        omega: PerSide<&RealMatrix>,
        residual: PerSide<&RealVector>,
        theta_lo: &RealVector,
        theta_hi: &RealVector,
        sign_case: Option<SignCase>,
    ) -> ConditionReport {
        self.acc.update(h, &self.c, omega.clone(), residual.clone());
        let t = self.acc.t;
        let s = &self.settings;
        let pe = pe_check(&self.acc, s.pe_window, s.theta_min).ok();
        let estimates = self.acc.estimates().ok();
        let excited = self.acc.elapsed() + 1e-12 >= s.pe_window;
        let theta_bar_inf = if excited {
            estimates.as_ref().and_then(|e| {
                Some(PerSide::new(
                    equilibrium(&e.lower.0, &e.lower.1).ok()?,
                    equilibrium(&e.upper.0, &e.upper.1).ok()?,
                ))
            })
        } else {
            None
        };

        let sig = InstantSignals {
            c: &self.c,
            gamma: gamma.clone(),
            omega: omega.clone(),
            residual: residual.clone(),
        };
        let cooperative_now = !self.c_nonnegative && adaptation_cooperative(&sig);
        let loop_kind = if self.c_nonnegative {
            LoopKind::Competitive
        } else if cooperative_now {
            LoopKind::Cooperative
        } else {
            LoopKind::Neither
        };

        let mut branch = Theorem1Branch::None;
        let mut instant = None;
        let mut periodic = None;
        if loop_kind == LoopKind::Competitive {
            if let Some(tb) = &theta_bar_inf {
                branch = theorem1_branch(tb, theta_lo, theta_hi, s.margin);
            }
        } else {
            if cooperative_now {
                let inst = theorem2_instant(&sig, theta_lo, theta_hi, s.margin);
                if inst.is_none() {
                    self.instant_broken = true;
                }
                if !self.instant_broken {
                    instant = inst;
                }
            } else {
                self.instant_broken = true;
            }
            if let Some(period) = s.periodic_window {
                if let Ok(w) = self.acc.window(period) {
                    let est =
                        PerSide::from_fn(|side| (-&w.i_b[side] / w.span, &w.i_r[side] / w.span));
                    let averaged_cooperative = Side::BOTH
                        .iter()
                        .all(|&side| is_cooperative(&-(gamma[side] * &est[side].1), 0.0));
                    if averaged_cooperative {
                        periodic = theorem2_periodic(&est, theta_lo, theta_hi, s.margin);
                    }
                }
            }
        }
        let certified = branch.order().or(instant).or(periodic);
        let pairing = sign_case.and_then(|sc| theorem3_pairing(sc, certified).ok());
        let pe_both = pe.as_ref().is_some_and(|p| p.lower.ok && p.upper.ok);
        ConditionReport {
            t,
            pe,
            estimates,
            theta_bar_inf,
            theorem1_branch: branch,
            theorem2_instant: instant,
            theorem2_periodic: periodic,
            loop_kind,
            certified,
            pairing,
            valid: certified.is_some() && pe_both,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::{dmatrix, dvector};

    fn scalar_acc(n: usize, h: f64, omega: f64, residual: f64, capacity: f64) -> Accumulators {
        let c = dmatrix![1.0];
        let om = dmatrix![omega];
        let r = dvector![residual];
        let mut acc = Accumulators::new(0.0, 1, capacity);
        for _ in 0..n {
            acc.update(h, &c, PerSide::new(&om, &om), PerSide::new(&r, &r));
        }
        acc
    }

    #[test]
    fn zero_filter_gives_zero_integrals() {
        let acc = scalar_acc(100, 1e-2, 0.0, 3.0, 1.0);
        assert_eq!(acc.i_b.lower[0], 0.0);
        assert_eq!(acc.i_r.upper[(0, 0)], 0.0);
    }

    #[test]
    fn unit_signals_integrate_to_one() {
        let acc = scalar_acc(1001, 1e-3, 1.0, 1.0, 1.0);
        assert_abs_diff_eq!(acc.t, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(acc.i_b.lower[0], 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(acc.i_r.lower[(0, 0)], 1.0, epsilon = 1e-6);
        let est = acc.estimates().unwrap();
        assert_abs_diff_eq!(est.lower.0[0], -1.0, epsilon = 1e-6);
    }

    #[test]
    fn window_requires_history() {
        let acc = scalar_acc(101, 1e-2, 1.0, 1.0, 2.0);
        assert!(matches!(acc.window(2.0), Err(Error::WindowTooShort { .. })));
        let w = acc.window(0.5).unwrap();
        assert_abs_diff_eq!(w.span, 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(w.i_r.lower[(0, 0)], 0.5, epsilon = 1e-9);
    }

    #[test]
    fn pe_of_constant_signal() {
        let acc = scalar_acc(301, 1e-2, 1.0, 0.0, 2.0);
        let pe = pe_check(&acc, 2.0, 2.0 - 1e-9).unwrap();
        assert_abs_diff_eq!(pe.lower.theta_hat, 2.0, epsilon = 1e-9);
        assert!(pe.lower.ok && pe.upper.ok);
        assert!(!pe_check(&acc, 2.0, 2.1).unwrap().lower.ok);
        let dead = scalar_acc(301, 1e-2, 0.0, 0.0, 2.0);
        let pe = pe_check(&dead, 2.0, THETA_MIN).unwrap();
        assert_eq!(pe.lower.theta_hat, 0.0);
        assert!(!pe.lower.ok);
    }

    #[test]
    fn equilibria() {
        let th = equilibrium(&dvector![1.0, 2.0], &RealMatrix::identity(2, 2)).unwrap();
        assert_eq!(th, dvector![1.0, 2.0]);
        assert_abs_diff_eq!(equilibrium(&dvector![3.0], &dmatrix![2.0]).unwrap()[0], 1.5);
        assert!(matches!(
            equilibrium(&dvector![1.0, 1.0], &dmatrix![1.0, 1.0; 1.0, 1.0]),
            Err(Error::NotIdentifiable(_))
        ));
    }

    #[test]
    fn theorem1_branches() {
        let lo = dvector![1.0, -4.5];
        let hi = dvector![3.5, 7.0];
        let bars = PerSide::new(dvector![5.0, 9.0], dvector![-3.0, -7.0]);
        assert_eq!(
            theorem1_branch(&bars, &lo, &hi, STRICT_MARGIN),
            Theorem1Branch::IIa
        );
        let swapped = PerSide::new(bars.upper.clone(), bars.lower.clone());
        assert_eq!(
            theorem1_branch(&swapped, &lo, &hi, STRICT_MARGIN),
            Theorem1Branch::IIb
        );
        let inside = PerSide::new(dvector![2.0, 0.0], dvector![3.0, 1.0]);
        assert_eq!(
            theorem1_branch(&inside, &lo, &hi, STRICT_MARGIN),
            Theorem1Branch::None
        );
        assert_eq!(Theorem1Branch::IIa.order(), Some(IntervalOrder::Reversed));
        assert_eq!(Theorem1Branch::IIb.order(), Some(IntervalOrder::Direct));
    }

    #[test]
    fn theorem2_scalar_toy() {
        let c = dmatrix![1.0];
        let g = dmatrix![1.0];
        let om = dmatrix![-1.0];
        let lo = dvector![0.0];
        let hi = dvector![1.0];
        let r_lo = dvector![-0.5];
        let r_hi = dvector![2.0];
        let sig = InstantSignals {
            c: &c,
            gamma: PerSide::new(&g, &g),
            omega: PerSide::new(&om, &om),
            residual: PerSide::new(&r_lo, &r_hi),
        };
        assert!(adaptation_cooperative(&sig));
        assert_eq!(
            theorem2_instant(&sig, &lo, &hi, STRICT_MARGIN),
            Some(IntervalOrder::Direct)
        );
        let sig = InstantSignals {
            residual: PerSide::new(&r_hi, &r_lo),
            ..sig
        };
        assert_eq!(
            theorem2_instant(&sig, &lo, &hi, STRICT_MARGIN),
            Some(IntervalOrder::Reversed)
        );
        let r_mid = dvector![0.5];
        let sig = InstantSignals {
            residual: PerSide::new(&r_mid, &r_mid),
            ..sig
        };
        assert_eq!(theorem2_instant(&sig, &lo, &hi, STRICT_MARGIN), None);

        let est = PerSide::new(
            (dvector![-1.0], dmatrix![1.0]),
            (dvector![2.0], dmatrix![1.0]),
        );
        assert_eq!(
            theorem2_periodic(&est, &lo, &hi, STRICT_MARGIN),
            Some(IntervalOrder::Direct)
        );
        let est = PerSide::new(est.upper.clone(), est.lower.clone());
        assert_eq!(
            theorem2_periodic(&est, &lo, &hi, STRICT_MARGIN),
            Some(IntervalOrder::Reversed)
        );
    }

    #[test]
    fn theorem2_degenerate_filters() {
        let c = dmatrix![1.0, 0.0; 0.0, 1.0];
        let g = RealMatrix::identity(2, 2);
        let om = RealMatrix::zeros(2, 2);
        let r = dvector![0.3, -0.2];
        let sig = InstantSignals {
            c: &c,
            gamma: PerSide::new(&g, &g),
            omega: PerSide::new(&om, &om),
            residual: PerSide::new(&r, &r),
        };
        assert!(adaptation_cooperative(&sig));
        assert_eq!(
            theorem2_instant(
                &sig,
                &dvector![0.0, 0.0],
                &dvector![1.0, 1.0],
                STRICT_MARGIN
            ),
            None
        );
    }

    #[test]
    fn pairing_cases() {
        use IntervalOrder::*;
        let p = theorem3_pairing(SignCase::Nonnegative, Some(Direct)).unwrap();
        assert_eq!((p.lower_from, p.upper_from), (Side::Lower, Side::Upper));
        let p = theorem3_pairing(SignCase::Nonpositive, Some(Direct)).unwrap();
        assert_eq!((p.lower_from, p.upper_from), (Side::Upper, Side::Lower));
        let p = theorem3_pairing(SignCase::Nonnegative, Some(Reversed)).unwrap();
        assert_eq!((p.lower_from, p.upper_from), (Side::Upper, Side::Lower));
        assert_eq!(
            theorem3_pairing(SignCase::Nonnegative, None),
            Err(Error::NoCertifiedOrdering)
        );
    }

    #[test]
    fn averaged_oracle_first_order() {
        let tr = averaged_oracle(
            &dvector![2.0],
            &dmatrix![1.0],
            &dmatrix![1.0],
            &dvector![0.0],
            3.0,
            1e-3,
        )
        .unwrap();
        for (t, th) in tr.times.iter().zip(&tr.states) {
            assert_abs_diff_eq!(th[0], 2.0 * (1.0 - (-t).exp()), epsilon = 1e-10);
        }
        let zero = averaged_oracle(
            &dvector![0.0, 0.0],
            &RealMatrix::identity(2, 2),
            &RealMatrix::identity(2, 2),
            &dvector![0.0, 0.0],
            1.0,
            1e-2,
        )
        .unwrap();
        assert!(zero.states.iter().all(|s| s.iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn lemma1_values() {
        let at_ell = lemma1_bound(2.0, 0.5, 3.0, 1.5, 0.2, 3.0);
        assert_eq!(
            at_ell,
            1.5 + (1.0 + 2.0 / (0.5 * 2.0) * (-0.5f64).exp()) * 3.0 * 0.2
        );
        assert!(lemma1_bound(1.0, 1.0, 1.0, 5.0, 0.0, 200.0) < 1e-40);
    }

    #[test]
    fn gamma_search_halves() {
        let m = gamma_search(Ok, 0.5, 0.3, 10).unwrap();
        assert_eq!((m.halvings, m.scale), (2, 0.25));
        assert_eq!(gamma_search(|_| Ok(0.0), 0.5, 0.1, 3).unwrap().halvings, 0);
        assert_eq!(
            gamma_search(|_| Ok(1.0), 0.5, 0.1, 3),
            Err(Error::NoGammaMatch { attempts: 4 })
        );
        assert!(matches!(
            gamma_search(
                |_| Err(Error::NotIdentifiable("singular".into())),
                0.5,
                0.1,
                3
            ),
            Err(Error::NotIdentifiable(_))
        ));
        assert!(gamma_search(Ok, 1.5, 0.1, 3).is_err());
    }
}
