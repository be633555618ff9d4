//! Run summary: final conditions, containment, delays and false alarms.

use std::fmt;

use serde::Serialize;
use setobs::faults::{detection_delay, false_alarm_count};
use setobs::model::{IntervalOrder, PerSide};
use setobs::monotone::Assumption2Report;
use setobs::observers::Pairing;
use setobs::scenarios::Scenario;
use setobs::sim::{PeriodicityProbe, Sample};
use setobs::verifier::{ConditionReport, LoopKind, Theorem1Branch};

use crate::config::{Check, RunConfig};

const CONTAINMENT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Serialize)]
pub struct FinalConditions {
    pub t: f64,
    pub pe_ok: PerSide<bool>,
    /// Smallest eigenvalue of the excitation window integral per copy.
    pub pe_level: Option<PerSide<f64>>,
    pub b_hat: Option<PerSide<Vec<f64>>>,
    pub theta_bar_inf: Option<PerSide<Vec<f64>>>,
    pub theorem1_branch: Theorem1Branch,
    pub theorem2_instant: Option<IntervalOrder>,
    pub theorem2_periodic: Option<IntervalOrder>,
    pub loop_kind: LoopKind,
    pub certified: Option<IntervalOrder>,
    pub branch: &'static str,
    pub pairing: Option<Pairing>,
    pub valid: bool,
}

impl FinalConditions {
    fn from_report(r: &ConditionReport) -> Self {
        FinalConditions {
            t: r.t,
            pe_ok: r.pe_ok(),
            pe_level: r.pe.as_ref().map(|p| p.map(|_, v| v.theta_hat)),
            b_hat: r
                .estimates
                .as_ref()
                .map(|e| e.map(|_, (b, _)| b.as_slice().to_vec())),
            theta_bar_inf: r
                .theta_bar_inf
                .as_ref()
                .map(|b| b.map(|_, v| v.as_slice().to_vec())),
            theorem1_branch: r.theorem1_branch,
            theorem2_instant: r.theorem2_instant,
            theorem2_periodic: r.theorem2_periodic,
            loop_kind: r.loop_kind,
            certified: r.certified,
            branch: r.branch_label(),
            pairing: r.pairing,
            valid: r.valid,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Containment {
    /// Samples with a certified parameter ordering.
    pub certified_samples: usize,
    /// Fraction of certified samples whose interval holds the true parameter.
    pub theta_fraction: Option<f64>,
    /// Certified samples in a phase with a known state sign pattern.
    pub state_samples: usize,
    pub state_fraction: Option<f64>,
}

/// Distance from periodicity over the last averaging window.
#[derive(Debug, Clone, Serialize)]
pub struct Periodicity {
    pub period: f64,
    pub state: Option<f64>,
    pub theta_hat: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct IndicatorDelays {
    pub fault_time: f64,
    pub s: Option<f64>,
    pub d: Option<f64>,
    pub z: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChannelDelay {
    pub fault_time: f64,
    /// 1-based output channel.
    pub channel: usize,
    pub delay: Option<f64>,
    pub reference: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct FalseAlarms {
    /// End of the counting window: the first fault time, else the horizon.
    pub until: f64,
    pub s: usize,
    pub d: usize,
    pub z: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub check: Check,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub horizon: f64,
    pub step: f64,
    pub seed: u64,
    pub noise: bool,
    pub gamma_scale: f64,
    pub samples: usize,
    pub assumption2: Assumption2Report,
    pub final_conditions: Option<FinalConditions>,
    pub containment: Containment,
    pub periodicity: Option<Periodicity>,
    pub delays: Vec<IndicatorDelays>,
    pub channel_delays: Vec<ChannelDelay>,
    pub false_alarms: FalseAlarms,
    pub checks: Vec<CheckResult>,
    pub wall_clock_s: f64,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Per-sample bookkeeping folded into a [`RunReport`].
pub struct Collector {
    times: Vec<f64>,
    s: Vec<bool>,
    d: Vec<bool>,
    z: Vec<bool>,
    s_channels: Vec<Vec<bool>>,
    containment: Containment,
    theta_hits: usize,
    state_hits: usize,
    periodic: Option<(f64, PeriodicityProbe, PeriodicityProbe)>,
    last: Option<ConditionReport>,
}

impl Collector {
    pub fn new(capacity: usize, scenario: &Scenario, step: f64) -> Self {
        let p = scenario.spec.p;
        let periodic = scenario.verifier.periodic_window.and_then(|period| {
            let probe = PeriodicityProbe::new(period, step).ok()?;
            Some((period, probe.clone(), probe))
        });
        Collector {
            times: Vec::with_capacity(capacity),
            s: Vec::with_capacity(capacity),
            d: Vec::with_capacity(capacity),
            z: Vec::with_capacity(capacity),
            s_channels: vec![Vec::with_capacity(capacity); p],
            containment: Containment::default(),
            theta_hits: 0,
            state_hits: 0,
            periodic,
            last: None,
        }
    }

    pub fn push(&mut self, scenario: &Scenario, s: &Sample) {
        self.times.push(s.t);
        let ind = &s.indicators;
        self.s.push(ind.s.any);
        self.d.push(ind.d.as_ref().is_some_and(|d| d.any));
        self.z.push(ind.z.any);
        for (ch, v) in self.s_channels.iter_mut().zip(&ind.s.channels) {
            ch.push(*v);
        }
        if let Some(order) = s.report.certified {
            self.containment.certified_samples += 1;
            self.theta_hits += usize::from(s.theta_contained(order, CONTAINMENT_TOL));
            if let Some(sign) = scenario.spec.box_at(s.t).sign_case {
                self.containment.state_samples += 1;
                self.state_hits += usize::from(s.state_contained(sign, CONTAINMENT_TOL));
            }
        }
        if let Some((_, state, theta)) = self.periodic.as_mut() {
            state.push(s.t, &s.x);
            let both = s
                .theta_hat
                .lower
                .iter()
                .chain(s.theta_hat.upper.iter())
                .copied();
            theta.push(
                s.t,
                &setobs::numerics::RealVector::from_iterator(2 * s.theta_hat.lower.len(), both),
            );
        }
        self.last = Some(s.report.clone());
    }

    pub fn finish(
        mut self,
        cfg: &RunConfig,
        scenario: &Scenario,
        assumption2: Assumption2Report,
        wall: f64,
    ) -> RunReport {
        let c = &mut self.containment;
        c.theta_fraction = fraction(self.theta_hits, c.certified_samples);
        c.state_fraction = fraction(self.state_hits, c.state_samples);

        let periodicity = self
            .periodic
            .as_ref()
            .map(|(period, state, theta)| Periodicity {
                period: *period,
                state: state.residual(),
                theta_hat: theta.residual(),
            });

        let mut fault_times = scenario.fault_times.clone();
        fault_times.dedup();
        let delay = |sig: &[bool], tf: f64| detection_delay(&self.times, sig, &[tf])[0];
        let delays = fault_times
            .iter()
            .map(|&tf| IndicatorDelays {
                fault_time: tf,
                s: delay(&self.s, tf),
                d: delay(&self.d, tf),
                z: delay(&self.z, tf),
            })
            .collect();
        let channel_delays = scenario
            .expected
            .delays
            .iter()
            .filter(|e| e.channel < self.s_channels.len())
            .map(|e| ChannelDelay {
                fault_time: e.fault_time,
                channel: e.channel + 1,
                delay: delay(&self.s_channels[e.channel], e.fault_time),
                reference: e.reference_delay,
            })
            .collect();
        let until = fault_times.first().copied().unwrap_or(f64::INFINITY);
        let false_alarms = FalseAlarms {
            until: until.min(cfg.horizon),
            s: false_alarm_count(&self.times, &self.s, 0.0, until),
            d: false_alarm_count(&self.times, &self.d, 0.0, until),
            z: false_alarm_count(&self.times, &self.z, 0.0, until),
        };

        let last = self.last.as_ref();
        // An empty run has nothing to check beyond the static assumption.
        let checks = cfg
            .checks
            .iter()
            .filter(|c| !self.times.is_empty() || **c == Check::Assumption2)
            .map(|&check| {
                let passed = match check {
                    Check::Assumption2 => assumption2.passed(),
                    Check::Pe => last.is_some_and(|r| {
                        let ok = r.pe_ok();
                        ok.lower && ok.upper
                    }),
                    Check::Certified => last.is_some_and(|r| r.certified.is_some()),
                    Check::Containment => self
                        .containment
                        .theta_fraction
                        .is_some_and(|f| f >= cfg.containment_min),
                };
                CheckResult { check, passed }
            })
            .collect();

        RunReport {
            scenario: scenario.name.clone(),
            horizon: cfg.horizon,
            step: cfg.step,
            seed: cfg.seed,
            noise: cfg.noise,
            gamma_scale: cfg.gamma_scale,
            samples: self.times.len(),
            assumption2,
            final_conditions: last.map(FinalConditions::from_report),
            containment: self.containment,
            periodicity,
            delays,
            channel_delays,
            false_alarms,
            checks,
            wall_clock_s: wall,
        }
    }
}

fn fraction(hits: usize, total: usize) -> Option<f64> {
    (total > 0).then(|| hits as f64 / total as f64)
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into())
}

impl fmt::Display for RunReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "scenario {}  horizon {} s  step {} s  seed {}  noise {}  samples {}",
            self.scenario,
            self.horizon,
            self.step,
            self.seed,
            if self.noise { "on" } else { "off" },
            self.samples
        )?;
        writeln!(
            f,
            "assumption 2: {}",
            if self.assumption2.passed() {
                "pass"
            } else {
                "FAIL"
            }
        )?;
        match &self.final_conditions {
            Some(fc) => {
                writeln!(
                    f,
                    "final t = {}: PE {}/{}  branch {}  certified {:?}  loop {:?}  valid {}",
                    fc.t,
                    fc.pe_ok.lower,
                    fc.pe_ok.upper,
                    fc.branch,
                    fc.certified,
                    fc.loop_kind,
                    fc.valid
                )?;
                if let Some(b) = &fc.theta_bar_inf {
                    writeln!(f, "theta_bar_inf: lower {:?}  upper {:?}", b.lower, b.upper)?;
                }
            }
            None => writeln!(f, "no samples")?,
        }
        let c = &self.containment;
        writeln!(
            f,
            "containment: theta {} of {} certified samples, state {} of {}",
            opt(c.theta_fraction),
            c.certified_samples,
            opt(c.state_fraction),
            c.state_samples
        )?;
        if let Some(p) = &self.periodicity {
            writeln!(
                f,
                "periodicity residual over the last {:.3} s: state {}  theta_hat {}",
                p.period,
                p.state.map_or("-".into(), |v| format!("{v:.3e}")),
                p.theta_hat.map_or("-".into(), |v| format!("{v:.3e}"))
            )?;
        }
        for d in &self.delays {
            writeln!(
                f,
                "fault at {} s: delay S {}  D {}  Z {}",
                d.fault_time,
                opt(d.s),
                opt(d.d),
                opt(d.z)
            )?;
        }
        for d in &self.channel_delays {
            writeln!(
                f,
                "fault at {} s, channel {}: S delay {} (reference {})",
                d.fault_time,
                d.channel,
                opt(d.delay),
                d.reference
            )?;
        }
        let fa = &self.false_alarms;
        writeln!(
            f,
            "false alarms before {} s: S {}  D {}  Z {}",
            fa.until, fa.s, fa.d, fa.z
        )?;
        for c in &self.checks {
            writeln!(
                f,
                "check {:?}: {}",
                c.check,
                if c.passed { "pass" } else { "FAIL" }
            )?;
        }
        write!(f, "wall clock {:.2} s", self.wall_clock_s)
    }
}
