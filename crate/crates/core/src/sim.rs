//! Coupled fixed-step simulation of plant, observers, verifier and fault
//! indicators, streamed one sample at a time.

use std::cell::RefCell;
use std::collections::VecDeque;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::faults::{indicator_d, indicator_s, indicator_z, FaultIndicators, SplitMatrix};
use crate::model::{plant_rhs, IntervalOrder, PerSide, Side, SignCase};
use crate::numerics::{bounded_noise, check_finite, rk4_step, step_count, RealMatrix, RealVector};
use crate::observers::{
    packed_ideal_rhs, packed_observer_rhs, AdaptiveObserverState, IdealObserverState,
    MeasuredTerms, ObserverWorkspace, Pairing,
};
use crate::scenarios::Scenario;
use crate::verifier::{theorem3_pairing, ConditionReport, Verifier};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    pub horizon: f64,
    pub step: f64,
    pub seed: u64,
    pub noise: bool,
    /// Replaces the scenario's noise amplitude when set.
    pub noise_amplitude: Option<Vec<f64>>,
    /// Multiplies every adaptation gain.
    pub gamma_scale: f64,
}

impl SimConfig {
    pub fn for_scenario(s: &Scenario) -> Self {
        SimConfig {
            horizon: s.horizon,
            step: s.step,
            seed: 0,
            noise: false,
            noise_amplitude: None,
            gamma_scale: 1.0,
        }
    }

    pub fn with_noise(mut self, seed: u64) -> Self {
        self.noise = true;
        self.seed = seed;
        self
    }
}

/// Everything observed at one grid instant.
#[derive(Debug, Clone)]
pub struct Sample {
    pub k: usize,
    pub t: f64,
    pub phase: usize,
    pub x: RealVector,
    pub y: RealVector,
    pub y_v: RealVector,
    pub u: RealVector,
    pub theta: RealVector,
    pub zeta: PerSide<RealVector>,
    pub omega: PerSide<RealMatrix>,
    pub theta_hat: PerSide<RealVector>,
    pub xi: PerSide<RealVector>,
    pub ideal_theta_hat: Option<RealVector>,
    pub ideal_omega: Option<RealMatrix>,
    pub report: ConditionReport,
    /// Ordering used for `D` and the state-interval pairing: the certified
    /// one, else the last certified in this phase, else the phase's claim.
    pub order: Option<IntervalOrder>,
    pub pairing: Pairing,
    pub indicators: FaultIndicators,
}

impl Sample {
    /// `(lower, upper)` parameter endpoints under `order`.
    pub fn theta_interval(&self, order: IntervalOrder) -> (&RealVector, &RealVector) {
        order.endpoints(&self.theta_hat)
    }

    pub fn theta_contained(&self, order: IntervalOrder, tol: f64) -> bool {
        let (lo, hi) = self.theta_interval(order);
        within(&self.theta, lo, hi, tol)
    }

    /// `(lower, upper)` state endpoints for a sign case.
    pub fn state_interval(&self, sign: SignCase) -> (&RealVector, &RealVector) {
        match sign {
            SignCase::Nonnegative => (&self.xi.lower, &self.xi.upper),
            SignCase::Nonpositive => (&self.xi.upper, &self.xi.lower),
        }
    }

    pub fn state_contained(&self, sign: SignCase, tol: f64) -> bool {
        let (lo, hi) = self.state_interval(sign);
        within(&self.x, lo, hi, tol)
    }
}

pub fn within(v: &RealVector, lo: &RealVector, hi: &RealVector, tol: f64) -> bool {
    v.iter()
        .zip(lo.iter().zip(hi.iter()))
        .all(|(x, (l, h))| *l - tol <= *x && *x <= *h + tol)
}

/// Largest `‖v(t) - v(t - period)‖∞` over the most recent `period` of a
/// uniformly sampled signal; the lagged value is interpolated linearly.
#[derive(Debug, Clone)]
pub struct PeriodicityProbe {
    period: f64,
    step: f64,
    history: VecDeque<RealVector>,
    recent: VecDeque<(f64, f64)>,
}

impl PeriodicityProbe {
    pub fn new(period: f64, step: f64) -> Result<Self> {
        if !(period > step && step > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "period {period} must exceed step {step} > 0"
            )));
        }
        Ok(PeriodicityProbe {
            period,
            step,
            history: VecDeque::new(),
            recent: VecDeque::new(),
        })
    }

    pub fn push(&mut self, t: f64, v: &RealVector) {
        let lag = self.period / self.step;
        let whole = lag.floor() as usize;
        let frac = lag - whole as f64;
        self.history.push_back(v.clone());
        if self.history.len() > whole + 2 {
            self.history.pop_front();
        }
        if self.history.len() == whole + 2 {
            let (older, newer) = (&self.history[0], &self.history[1]);
            let lagged = newer * (1.0 - frac) + older * frac;
            self.recent.push_back((t, (v - lagged).amax()));
        }
        while self
            .recent
            .front()
            .is_some_and(|(t0, _)| *t0 < t - self.period)
        {
            self.recent.pop_front();
        }
    }

    /// `None` until one full period of history exists.
    pub fn residual(&self) -> Option<f64> {
        self.recent.iter().map(|(_, d)| *d).reduce(f64::max)
    }
}

/// Streaming simulation; iterate to obtain samples `k = 0..=steps`.
pub struct Simulation<'a> {
    scenario: &'a Scenario,
    gains: crate::model::ObserverGains,
    cfg: SimConfig,
    amplitude: RealVector,
    state: RealVector,
    steps: usize,
    k: usize,
    t: f64,
    phase: usize,
    verifier: Verifier,
    last_certified: Option<IntervalOrder>,
    pairing: Pairing,
    started: bool,
    finished: bool,
    workspace: RefCell<ObserverWorkspace>,
    c_split: SplitMatrix,
}

const DEFAULT_PAIRING: Pairing = Pairing {
    lower_from: Side::Lower,
    upper_from: Side::Upper,
};

impl<'a> Simulation<'a> {
    pub fn new(scenario: &'a Scenario, cfg: SimConfig) -> Result<Self> {
        if !(cfg.step > 0.0 && cfg.step.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "step must be positive, got {}",
                cfg.step
            )));
        }
        if !(cfg.horizon >= 0.0 && cfg.horizon.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "horizon must be nonnegative, got {}",
                cfg.horizon
            )));
        }
        let spec = &scenario.spec;
        let amplitude = match (&cfg.noise, &cfg.noise_amplitude) {
            (false, _) => RealVector::zeros(spec.p),
            (true, Some(a)) if a.len() == spec.p => RealVector::from_column_slice(a),
            (true, Some(a)) if a.len() == 1 => RealVector::from_element(spec.p, a[0]),
            (true, Some(a)) => {
                return Err(Error::Dimension(format!(
                    "noise amplitude has {} entries, outputs {}",
                    a.len(),
                    spec.p
                )))
            }
            (true, None) => spec.v_max.clone(),
        };
        let mut gains = scenario.gains.clone();
        gains.scale_gamma(cfg.gamma_scale);
        let init = &scenario.init;
        let obs =
            AdaptiveObserverState::new(init.zeta.clone(), init.theta_hat.clone(), init.xi.clone());
        let mut buf: Vec<f64> = scenario.truth.x0.iter().copied().collect();
        obs.write(&mut buf);
        if gains.ideal.is_some() {
            IdealObserverState::new(
                init.ideal_zeta.clone(),
                spec.q,
                init.ideal_theta_hat.clone(),
            )
            .write(&mut buf);
        }
        let verifier = Verifier::new(scenario.verifier.clone(), spec.c.clone(), spec.q, 0.0);
        Ok(Simulation {
            scenario,
            gains,
            steps: step_count(cfg.horizon, cfg.step),
            cfg,
            amplitude,
            state: RealVector::from_vec(buf),
            k: 0,
            t: 0.0,
            phase: 0,
            verifier,
            last_certified: None,
            pairing: DEFAULT_PAIRING,
            started: false,
            finished: false,
            workspace: RefCell::new(ObserverWorkspace::new(spec.n, spec.p, spec.q)),
            c_split: SplitMatrix::new(&spec.c),
        })
    }

    /// Number of samples the run produces (`steps + 1`).
    pub fn sample_count(&self) -> usize {
        self.steps + 1
    }

    pub fn gains(&self) -> &crate::model::ObserverGains {
        &self.gains
    }

    fn noise(&self, k: usize) -> RealVector {
        bounded_noise(self.cfg.seed, &self.amplitude, k as u64)
    }

    fn split(
        &self,
        state: &RealVector,
    ) -> (
        RealVector,
        AdaptiveObserverState,
        Option<IdealObserverState>,
    ) {
        let spec = &self.scenario.spec;
        let (n, q) = (spec.n, spec.q);
        let data = state.as_slice();
        let x = RealVector::from_column_slice(&data[..n]);
        let len = AdaptiveObserverState::packed_len(n, q);
        let obs = AdaptiveObserverState::read(n, q, &data[n..n + len]);
        let ideal = self
            .gains
            .ideal
            .as_ref()
            .map(|_| IdealObserverState::read(n, q, &data[n + len..]));
        (x, obs, ideal)
    }

    fn derivative(
        &self,
        t: f64,
        state: &RealVector,
        noise: &RealVector,
        theta: &RealVector,
        pairing: Pairing,
    ) -> RealVector {
        let spec = &self.scenario.spec;
        let truth = &self.scenario.truth;
        let (n, q) = (spec.n, spec.q);
        let len = AdaptiveObserverState::packed_len(n, q);
        let data = state.as_slice();
        let x = RealVector::from_column_slice(&data[..n]);
        let y_v = &spec.c * &x + noise;
        let u = (truth.input)(t, &y_v);
        let dx = plant_rhs(spec, truth, t, &x, &u, theta);
        let terms = MeasuredTerms::evaluate(spec, t, &y_v, &u);
        let mut out = RealVector::zeros(state.len());
        out.rows_mut(0, n).copy_from(&dx);
        let ws = &mut self.workspace.borrow_mut();
        let (d_obs, d_ideal) = out.as_mut_slice()[n..].split_at_mut(len);
        packed_observer_rhs(
            &data[n..n + len],
            d_obs,
            spec,
            &self.gains,
            &terms,
            pairing,
            ws,
        );
        if let Some(g) = self.gains.ideal.as_ref() {
            let a = (truth.a_true)(t, &x);
            let b = (truth.b_true)(t);
            packed_ideal_rhs(&data[n + len..], d_ideal, &a, &b, spec, g, &terms, ws);
        }
        out
    }

    fn observe(&mut self, h: f64) -> Sample {
        let scenario = self.scenario;
        let spec = &scenario.spec;
        let t = self.t;
        let phase = spec.phase_index(t);
        if phase != self.phase {
            self.phase = phase;
            self.verifier.reset(t);
            self.last_certified = None;
        }
        let pbox = &spec.theta_boxes[phase];
        let noise = self.noise(self.k);
        let (x, obs, ideal) = self.split(&self.state);
        let y = &spec.c * &x;
        let y_v = &y + &noise;
        let u = (scenario.truth.input)(t, &y_v);
        let residual = PerSide::from_fn(|s| &y_v - &spec.c * &obs.zeta[s]);
        let report = self.verifier.record(
            h,
            PerSide::new(&self.gains.gamma_lower, &self.gains.gamma_upper),
            obs.omega.as_ref(),
            residual.as_ref(),
            &pbox.lower,
            &pbox.upper,
            pbox.sign_case,
        );
        if report.certified.is_some() {
            self.last_certified = report.certified;
        }
        let order = report
            .certified
            .or(self.last_certified)
            .or(pbox.claimed_order);
        let sign = pbox.sign_case.unwrap_or(SignCase::Nonnegative);
        self.pairing = order
            .and_then(|o| theorem3_pairing(sign, Some(o)).ok())
            .unwrap_or(DEFAULT_PAIRING);
        let (y_lo, y_hi) = self.c_split.envelope(&obs.zeta.lower, &obs.zeta.upper);
        let (psi_lo, psi_hi) = self.c_split.envelope(&obs.xi.lower, &obs.xi.upper);
        let indicators = FaultIndicators {
            s: indicator_s(&y_v, &y_lo, &y_hi),
            d: order.map(|o| {
                let (lo, hi) = o.endpoints(&obs.theta_hat);
                indicator_d(lo, hi)
            }),
            z: indicator_z(&y_v, &psi_lo, &psi_hi),
        };
        Sample {
            k: self.k,
            t,
            phase,
            x,
            y,
            y_v,
            u,
            theta: scenario.truth.theta.at(t).clone(),
            zeta: obs.zeta,
            omega: obs.omega,
            theta_hat: obs.theta_hat,
            xi: obs.xi,
            ideal_theta_hat: ideal.as_ref().map(|i| i.theta_hat.clone()),
            ideal_omega: ideal.map(|i| i.omega),
            report,
            order,
            pairing: self.pairing,
            indicators,
        }
    }

    fn grid_time(&self, k: usize) -> f64 {
        if k >= self.steps {
            self.cfg.horizon
        } else {
            k as f64 * self.cfg.step
        }
    }

    fn advance(&mut self) -> Result<()> {
        let t0 = self.t;
        let t1 = self.grid_time(self.k + 1);
        let h = t1 - t0;
        let noise = self.noise(self.k);
        let theta = self.scenario.truth.theta.at(t0 + 0.5 * h).clone();
        let pairing = self.pairing;
        let mut rhs = |t: f64, s: &RealVector| self.derivative(t, s, &noise, &theta, pairing);
        let next = rk4_step(&mut rhs, t0, &self.state, h);
        check_finite(t1, &next)?;
        self.state = next;
        self.k += 1;
        self.t = t1;
        Ok(())
    }
}

impl Iterator for Simulation<'_> {
    type Item = Result<Sample>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.finished {
            return None;
        }
        let h = if self.started {
            let before = self.t;
            if let Err(e) = self.advance() {
                self.finished = true;
                return Some(Err(e));
            }
            self.t - before
        } else {
            self.started = true;
            self.cfg.step
        };
        let sample = self.observe(h);
        if self.k >= self.steps {
            self.finished = true;
        }
        Some(Ok(sample))
    }
}
