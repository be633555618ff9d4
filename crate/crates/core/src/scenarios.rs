//! Built-in systems: two academic LPV examples, a double-mass vibration
//! crusher and the three-tank benchmark in two measurement setups.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    IdealGains, IntervalOrder, LpvSystemSpec, ObserverGains, ParamBox, PerSide, PiecewiseConstant,
    SignCase, TruthModel,
};
use crate::monotone::{default_samples, verify_assumption2, Assumption2Report};
use crate::numerics::{RealMatrix, RealVector};
use crate::verifier::VerifierSettings;

pub const SCENARIO_NAMES: [&str; 5] = ["example1", "example2", "crusher", "tank1", "tank2"];
pub const LAMBDA_FLOOR: f64 = 1e-6;

pub type Mat = Vec<Vec<f64>>;

fn to_matrix(rows: &Mat) -> Result<RealMatrix> {
    let r = rows.len();
    let c = rows.first().map_or(0, |row| row.len());
    if rows.iter().any(|row| row.len() != c) {
        return Err(Error::Dimension("ragged matrix rows".into()));
    }
    Ok(RealMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

fn to_vector(v: &[f64]) -> RealVector {
    RealVector::from_column_slice(v)
}

fn constant_map(m: RealMatrix) -> crate::model::MatMap {
    Arc::new(move |_, _| m.clone())
}

fn zero_phi(n: usize) -> crate::model::VecMap {
    Arc::new(move |_, _| RealVector::zeros(n))
}

/// Initial observer state.
#[derive(Debug, Clone, PartialEq)]
pub struct ObserverInit {
    pub zeta: PerSide<RealVector>,
    pub theta_hat: PerSide<RealVector>,
    pub xi: PerSide<RealVector>,
    pub ideal_zeta: RealVector,
    pub ideal_theta_hat: RealVector,
}

/// A parameter-box phase whose certified ordering the tests should see.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseExpectation {
    pub start: f64,
    pub end: f64,
    pub order: IntervalOrder,
    /// Seconds after `start` excluded from containment statistics.
    pub transient: f64,
}

/// A fault whose detection is measured on one output channel.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpectedDelay {
    pub fault_time: f64,
    pub channel: usize,
    pub reference_delay: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Expected {
    pub phases: Vec<PhaseExpectation>,
    /// Start of the window in which parameter and state containment must
    /// hold at every sample.
    pub containment_from: Option<f64>,
    pub delays: Vec<ExpectedDelay>,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub spec: LpvSystemSpec,
    pub truth: TruthModel,
    pub gains: ObserverGains,
    pub horizon: f64,
    pub step: f64,
    pub fault_times: Vec<f64>,
    pub init: ObserverInit,
    pub verifier: VerifierSettings,
    pub expected: Expected,
}

impl Scenario {
    pub fn noise_amplitude(&self) -> &RealVector {
        &self.spec.v_max
    }

    /// Builds a scenario from its default parameters.
    pub fn builtin(name: &str) -> Result<Scenario> {
        ScenarioParams::defaults(name)?.build()
    }

    fn finish(self) -> Result<Scenario> {
        self.spec.validate()?;
        self.gains.validate(self.spec.n, self.spec.p, self.spec.q)?;
        Ok(self)
    }

    /// Assumption 2 on the default sample set of this scenario.
    pub fn assumption2(&self) -> Assumption2Report {
        let (ys, vs) = default_samples(&self.spec, 0);
        verify_assumption2(&self.spec, &self.gains, &ys, &vs)
    }

    /// Fails with [`Error::AssumptionFailure`] unless Assumption 2 holds.
    pub fn checked(self) -> Result<Scenario> {
        let report = self.assumption2();
        if !report.passed() {
            return Err(Error::AssumptionFailure(format!(
                "{}: cooperative {}/{}, Hurwitz {}/{}, G >= 0 {}, worst off-diagonal {:e}, max Re λ {:e}",
                self.name,
                report.cooperative_lower,
                report.cooperative_upper,
                report.hurwitz_lower,
                report.hurwitz_upper,
                report.g_nonnegative,
                report.worst_offdiag_entry,
                report.max_eig_realpart
            )));
        }
        Ok(self)
    }
}

/// Parameters of every built-in scenario, overridable from a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ScenarioParams {
    Example1(Example1Params),
    Example2(Example2Params),
    Crusher(CrusherParams),
    Tank1(TankParams),
    Tank2(TankParams),
}

impl ScenarioParams {
    pub fn defaults(name: &str) -> Result<ScenarioParams> {
        Ok(match name {
            "example1" => ScenarioParams::Example1(Example1Params::default()),
            "example2" => ScenarioParams::Example2(Example2Params::default()),
            "crusher" => ScenarioParams::Crusher(CrusherParams::default()),
            "tank1" => ScenarioParams::Tank1(TankParams::scenario1()),
            "tank2" => ScenarioParams::Tank2(TankParams::scenario2()),
            other => return Err(Error::UnknownScenario(other.to_string())),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            ScenarioParams::Example1(_) => "example1",
            ScenarioParams::Example2(_) => "example2",
            ScenarioParams::Crusher(_) => "crusher",
            ScenarioParams::Tank1(_) => "tank1",
            ScenarioParams::Tank2(_) => "tank2",
        }
    }

    /// Builds and enforces Assumption 2.
    pub fn build(&self) -> Result<Scenario> {
        self.build_unchecked()?.checked()
    }

    /// Builds without the Assumption 2 gate; dimensions are still validated.
    pub fn build_unchecked(&self) -> Result<Scenario> {
        match self {
            ScenarioParams::Example1(p) => example1(p),
            ScenarioParams::Example2(p) => example2(p),
            ScenarioParams::Crusher(p) => crusher(p),
            ScenarioParams::Tank1(p) => three_tank(p, TankSetup::OutputsOneTwo),
            ScenarioParams::Tank2(p) => three_tank(p, TankSetup::FullState),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Example1Params {
    pub horizon: f64,
    pub step: f64,
    pub switch_fraction: f64,
    pub theta1: Vec<f64>,
    pub theta2: Vec<f64>,
    pub box1_lower: Vec<f64>,
    pub box1_upper: Vec<f64>,
    pub box2_lower: Vec<f64>,
    pub box2_upper: Vec<f64>,
    pub a_lower: Mat,
    pub a_upper: Mat,
    pub l: Mat,
    pub gamma: Vec<f64>,
    pub x0: Vec<f64>,
    pub x_lower: Vec<f64>,
    pub x_upper: Vec<f64>,
    pub noise: f64,
    pub pe_window: f64,
    pub transient: f64,
}

impl Default for Example1Params {
    fn default() -> Self {
        Example1Params {
            horizon: 600.0,
            step: 1e-3,
            switch_fraction: 0.5,
            theta1: vec![2.0, 1.0],
            theta2: vec![-1.0, -2.0],
            box1_lower: vec![1.0, -4.5],
            box1_upper: vec![3.5, 7.0],
            box2_lower: vec![-2.5, -9.0],
            box2_upper: vec![0.0, 4.5],
            a_lower: vec![
                vec![-1.5, 1.0, 0.0],
                vec![1.2, -2.3, 1.3],
                vec![0.0, 1.0, -3.6],
            ],
            a_upper: vec![
                vec![-0.5, 1.0, 0.0],
                vec![1.2, -1.7, 1.3],
                vec![0.0, 1.0, -2.4],
            ],
            l: vec![vec![2.0, 0.0], vec![0.0, 3.0], vec![0.0, 1.0]],
            gamma: vec![5.0, 5.0],
            x0: vec![1.0, 1.0, 1.0],
            x_lower: vec![-30.0; 3],
            x_upper: vec![30.0; 3],
            noise: 1.0,
            pe_window: 2.0 * PI,
            transient: 50.0,
        }
    }
}

pub fn example1_a(t: f64) -> RealMatrix {
    RealMatrix::from_row_slice(
        3,
        3,
        &[
            -1.0 + 0.5 * t.sin(),
            1.0,
            0.0,
            1.2,
            -2.0 + 0.3 * (3.0 * t).cos(),
            1.3,
            0.0,
            1.0,
            -3.0 + 0.6 * (2.0 * t).cos(),
        ],
    )
}

pub fn example1_g(t: f64) -> RealMatrix {
    RealMatrix::from_row_slice(
        3,
        2,
        &[
            0.0,
            1.0,
            1.0 - 0.2 * (2.0 * t).sin(),
            0.0,
            0.0,
            1.0 + 0.3 * (3.0 * t).sin(),
        ],
    )
}

pub fn example1(p: &Example1Params) -> Result<Scenario> {
    let c = RealMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
    let t_switch = p.switch_fraction * p.horizon;
    let l = to_matrix(&p.l)?;
    let gamma = RealMatrix::from_diagonal(&to_vector(&p.gamma));
    let box1 = ParamBox {
        start: 0.0,
        lower: to_vector(&p.box1_lower),
        upper: to_vector(&p.box1_upper),
        sign_case: Some(SignCase::Nonnegative),
        claimed_order: Some(IntervalOrder::Reversed),
    };
    let box2 = ParamBox {
        start: t_switch,
        lower: to_vector(&p.box2_lower),
        upper: to_vector(&p.box2_upper),
        sign_case: Some(SignCase::Nonpositive),
        claimed_order: Some(IntervalOrder::Direct),
    };
    let mut boxes = vec![box1.clone()];
    if t_switch > 0.0 && t_switch < p.horizon {
        boxes.push(box2);
    }
    let spec = LpvSystemSpec {
        n: 3,
        m: 0,
        p: 2,
        q: 2,
        c,
        phi: zero_phi(3),
        g: Arc::new(|t, _| example1_g(t)),
        a_lower: constant_map(to_matrix(&p.a_lower)?),
        a_upper: constant_map(to_matrix(&p.a_upper)?),
        b_lower: RealMatrix::zeros(3, 0),
        b_upper: RealMatrix::zeros(3, 0),
        theta_boxes: boxes,
        x_lower: to_vector(&p.x_lower),
        x_upper: to_vector(&p.x_upper),
        v_max: RealVector::from_element(2, p.noise),
        y_dependent: false,
    };
    let truth = TruthModel {
        a_true: Arc::new(|t, _| example1_a(t)),
        b_true: Arc::new(|_| RealMatrix::zeros(3, 0)),
        theta: PiecewiseConstant::new(
            vec![t_switch],
            vec![to_vector(&p.theta1), to_vector(&p.theta2)],
        )?,
        x0: to_vector(&p.x0),
        input: Arc::new(|_, _| RealVector::zeros(0)),
    };
    let gains = ObserverGains {
        l_lower: l.clone(),
        l_upper: l.clone(),
        gamma_lower: gamma.clone(),
        gamma_upper: gamma.clone(),
        ideal: Some(IdealGains { l, gamma }),
    };
    let init = ObserverInit {
        zeta: PerSide::new(spec.x_lower.clone(), spec.x_upper.clone()),
        theta_hat: PerSide::new(box1.upper.clone(), box1.lower.clone()),
        xi: PerSide::new(spec.x_lower.clone(), spec.x_upper.clone()),
        ideal_zeta: spec.x_lower.clone(),
        ideal_theta_hat: (&box1.lower + &box1.upper) * 0.5,
    };
    let expected = Expected {
        phases: vec![
            PhaseExpectation {
                start: 0.0,
                end: t_switch,
                order: IntervalOrder::Reversed,
                transient: p.transient,
            },
            PhaseExpectation {
                start: t_switch,
                end: p.horizon,
                order: IntervalOrder::Direct,
                transient: p.transient,
            },
        ],
        containment_from: None,
        delays: Vec::new(),
    };
    Scenario {
        name: "example1".into(),
        spec,
        truth,
        gains,
        horizon: p.horizon,
        step: p.step,
        fault_times: Vec::new(),
        init,
        verifier: VerifierSettings {
            pe_window: p.pe_window,
            ..VerifierSettings::default()
        },
        expected,
    }
    .finish()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Example2Params {
    pub horizon: f64,
    pub step: f64,
    pub switch_fraction: f64,
    pub theta1: Vec<f64>,
    pub theta2: Vec<f64>,
    pub theta_lower: Vec<f64>,
    pub theta_upper: Vec<f64>,
    /// Minorant of `A(t)`; paired with `l_lower`.
    pub a_lower: Mat,
    pub a_upper: Mat,
    pub l_lower: Mat,
    pub l_upper: Mat,
    pub gamma: Vec<f64>,
    pub x0: Vec<f64>,
    pub x_lower: Vec<f64>,
    pub x_upper: Vec<f64>,
    pub noise: f64,
    pub window: f64,
    pub converged_after: f64,
}

impl Default for Example2Params {
    fn default() -> Self {
        Example2Params {
            horizon: 600.0,
            step: 1e-3,
            switch_fraction: 0.5,
            theta1: vec![-0.5, -1.0],
            theta2: vec![0.0, -2.0],
            theta_lower: vec![-1.0, -2.5],
            theta_upper: vec![0.5, 0.0],
            a_lower: vec![
                vec![-1.1, 1.0, 0.2],
                vec![0.0, -1.3, 1.0],
                vec![0.4, 1.0, -2.2],
            ],
            a_upper: vec![
                vec![-0.9, 1.0, 0.6],
                vec![0.0, -0.7, 1.0],
                vec![0.6, 1.0, -1.8],
            ],
            l_lower: vec![vec![0.0, 0.5], vec![-1.0, 1.0], vec![0.0, -1.0]],
            l_upper: vec![vec![0.0, 1.0], vec![-1.0, 1.0], vec![0.0, 0.6]],
            gamma: vec![40.0, 180.0],
            x0: vec![0.0; 3],
            x_lower: vec![-10.0; 3],
            x_upper: vec![0.0; 3],
            noise: 0.5,
            window: 2.0 * PI,
            converged_after: 25.0,
        }
    }
}

pub fn example2_a(t: f64) -> RealMatrix {
    RealMatrix::from_row_slice(
        3,
        3,
        &[
            -1.0 + 0.1 * (3.0 * t).sin(),
            1.0,
            0.4 + 0.2 * (3.0 * t).sin(),
            0.0,
            -1.0 + 0.3 * t.cos(),
            1.0,
            0.5 + 0.1 * (2.0 * t).cos(),
            1.0,
            -2.0 + 0.2 * (2.0 * t).cos(),
        ],
    )
}

pub fn example2_g(t: f64) -> RealMatrix {
    RealMatrix::from_row_slice(
        3,
        2,
        &[
            1.0,
            0.0,
            0.3 + 0.3 * (2.0 * t).sin(),
            0.0,
            0.0,
            0.3 + 0.2 * (3.0 * t).sin(),
        ],
    )
}

pub fn example2(p: &Example2Params) -> Result<Scenario> {
    let c = RealMatrix::from_row_slice(2, 3, &[1.0, 0.0, -1.0, 1.0, 1.0, 0.0]);
    let t_switch = p.switch_fraction * p.horizon;
    let gamma = RealMatrix::from_diagonal(&to_vector(&p.gamma));
    let theta_box = ParamBox {
        start: 0.0,
        lower: to_vector(&p.theta_lower),
        upper: to_vector(&p.theta_upper),
        sign_case: Some(SignCase::Nonpositive),
        claimed_order: Some(IntervalOrder::Direct),
    };
    let spec = LpvSystemSpec {
        n: 3,
        m: 0,
        p: 2,
        q: 2,
        c,
        phi: zero_phi(3),
        g: Arc::new(|t, _| example2_g(t)),
        a_lower: constant_map(to_matrix(&p.a_lower)?),
        a_upper: constant_map(to_matrix(&p.a_upper)?),
        b_lower: RealMatrix::zeros(3, 0),
        b_upper: RealMatrix::zeros(3, 0),
        theta_boxes: vec![theta_box],
        x_lower: to_vector(&p.x_lower),
        x_upper: to_vector(&p.x_upper),
        v_max: RealVector::from_element(2, p.noise),
        y_dependent: false,
    };
    let (switches, values) = if t_switch > 0.0 && t_switch < p.horizon {
        (
            vec![t_switch],
            vec![to_vector(&p.theta1), to_vector(&p.theta2)],
        )
    } else {
        (Vec::new(), vec![to_vector(&p.theta1)])
    };
    let truth = TruthModel {
        a_true: Arc::new(|t, _| example2_a(t)),
        b_true: Arc::new(|_| RealMatrix::zeros(3, 0)),
        theta: PiecewiseConstant::new(switches, values)?,
        x0: to_vector(&p.x0),
        input: Arc::new(|_, _| RealVector::zeros(0)),
    };
    let gains = ObserverGains {
        l_lower: to_matrix(&p.l_lower)?,
        l_upper: to_matrix(&p.l_upper)?,
        gamma_lower: gamma.clone(),
        gamma_upper: gamma,
        ideal: None,
    };
    let zero = RealVector::zeros(3);
    let init = ObserverInit {
        zeta: PerSide::new(zero.clone(), zero.clone()),
        theta_hat: PerSide::new(RealVector::zeros(2), RealVector::zeros(2)),
        xi: PerSide::new(zero.clone(), zero.clone()),
        ideal_zeta: zero,
        ideal_theta_hat: RealVector::zeros(2),
    };
    let expected = Expected {
        phases: vec![PhaseExpectation {
            start: 0.0,
            end: p.horizon,
            order: IntervalOrder::Direct,
            transient: p.converged_after,
        }],
        containment_from: Some(p.converged_after),
        delays: Vec::new(),
    };
    Scenario {
        name: "example2".into(),
        spec,
        truth,
        gains,
        horizon: p.horizon,
        step: p.step,
        fault_times: Vec::new(),
        init,
        verifier: VerifierSettings {
            pe_window: p.window,
            periodic_window: Some(p.window),
            ..VerifierSettings::default()
        },
        expected,
    }
    .finish()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrusherParams {
    pub horizon: f64,
    pub step: f64,
    pub mass_min: f64,
    pub mass_max: f64,
    pub c_min: f64,
    pub c_max: f64,
    pub c: f64,
    /// Velocity friction of both platforms.
    pub beta1: f64,
    pub beta2: f64,
    /// Ground springs of the two platforms.
    pub c0: f64,
    pub c1: f64,
    pub theta: Vec<f64>,
    pub theta_lower: Vec<f64>,
    pub theta_upper: Vec<f64>,
    pub periods: Vec<f64>,
    pub gamma: Vec<f64>,
    pub x0: Vec<f64>,
    pub x_lower: Vec<f64>,
    pub x_upper: Vec<f64>,
    pub noise: f64,
    pub pe_window: f64,
}

impl Default for CrusherParams {
    fn default() -> Self {
        CrusherParams {
            horizon: 100.0,
            step: 1e-3,
            mass_min: 0.25,
            mass_max: 0.33,
            c_min: 0.08,
            c_max: 0.12,
            c: 0.1,
            beta1: 0.2,
            beta2: 0.2,
            c0: 1.0,
            c1: 1.0,
            theta: vec![1.0, 0.5, 0.5, 1.3],
            theta_lower: vec![0.5, 0.0, 0.0, 0.5],
            theta_upper: vec![2.0, 1.0, 1.0, 2.0],
            periods: vec![5.0, 6.0],
            gamma: vec![1.0; 4],
            x0: vec![0.0; 4],
            x_lower: vec![-2.0; 4],
            x_upper: vec![2.0; 4],
            noise: 0.0,
            pe_window: 30.0,
        }
    }
}

/// Positive half-period square pulse of unit amplitude.
pub fn square_pulse(t: f64, period: f64) -> f64 {
    if t.rem_euclid(period) < 0.5 * period {
        1.0
    } else {
        0.0
    }
}

/// Inverse masses `(1/m(t), 1/M(t))` of the two platforms.
pub fn crusher_inverse_masses(t: f64, p: &CrusherParams) -> (f64, f64) {
    let inv_min = 1.0 / p.mass_max;
    let inv_max = 1.0 / p.mass_min;
    let mid = 0.5 * p.horizon;
    let drift = 0.1 * (t - mid) / (1.0 + 0.1 * (t - mid).abs());
    let first = 0.5 * (inv_min - inv_max) * (1.0 + drift) + inv_max + 0.05 * (3.0 * t).sin();
    (first, inv_min + inv_max - first)
}

fn crusher_a(c: f64, inv1: f64, inv2: f64, p: &CrusherParams) -> RealMatrix {
    RealMatrix::from_row_slice(
        4,
        4,
        &[
            0.0,
            1.0,
            0.0,
            0.0,
            -(c + p.c0) * inv1,
            -p.beta1 * inv1,
            c * inv1,
            0.0,
            0.0,
            0.0,
            0.0,
            1.0,
            c * inv2,
            0.0,
            -(c + p.c1) * inv2,
            -p.beta2 * inv2,
        ],
    )
}

pub fn crusher(p: &CrusherParams) -> Result<Scenario> {
    if p.periods.len() != 2 {
        return Err(Error::InvalidArgument(
            "crusher needs two pulse periods".into(),
        ));
    }
    let inv_lo = 1.0 / p.mass_max;
    let inv_hi = 1.0 / p.mass_min;
    let a_lower = RealMatrix::from_row_slice(
        4,
        4,
        &[
            0.0,
            1.0,
            0.0,
            0.0,
            -(p.c_max + p.c0) * inv_hi,
            -p.beta1 * inv_hi,
            p.c_min * inv_lo,
            0.0,
            0.0,
            0.0,
            0.0,
            1.0,
            p.c_min * inv_lo,
            0.0,
            -(p.c_max + p.c1) * inv_hi,
            -p.beta2 * inv_hi,
        ],
    );
    let a_upper = RealMatrix::from_row_slice(
        4,
        4,
        &[
            0.0,
            1.0,
            0.0,
            0.0,
            -(p.c_min + p.c0) * inv_lo,
            -p.beta1 * inv_lo,
            p.c_max * inv_hi,
            0.0,
            0.0,
            0.0,
            0.0,
            1.0,
            p.c_max * inv_hi,
            0.0,
            -(p.c_min + p.c1) * inv_lo,
            -p.beta2 * inv_lo,
        ],
    );
    let gain_for = |a: &RealMatrix| {
        RealMatrix::from_row_slice(4, 2, &[1.0, 0.0, a[(1, 0)], 0.0, 0.0, 1.0, 0.0, a[(3, 2)]])
    };
    let l_lower = gain_for(&a_lower);
    let l_upper = gain_for(&a_upper);
    let c = RealMatrix::from_row_slice(2, 4, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
    let (p1, p2) = (p.periods[0], p.periods[1]);
    let g = Arc::new(move |t: f64, _: &RealVector| {
        let u1 = square_pulse(t, p1);
        let u2 = square_pulse(t, p2);
        let mut g = RealMatrix::zeros(4, 4);
        g[(1, 0)] = u1;
        g[(1, 1)] = u2;
        g[(3, 2)] = u1;
        g[(3, 3)] = u2;
        g
    });
    let theta_box = ParamBox {
        start: 0.0,
        lower: to_vector(&p.theta_lower),
        upper: to_vector(&p.theta_upper),
        sign_case: None,
        claimed_order: Some(IntervalOrder::Reversed),
    };
    let spec = LpvSystemSpec {
        n: 4,
        m: 0,
        p: 2,
        q: 4,
        c,
        phi: zero_phi(4),
        g,
        a_lower: constant_map(a_lower.clone()),
        a_upper: constant_map(a_upper.clone()),
        b_lower: RealMatrix::zeros(4, 0),
        b_upper: RealMatrix::zeros(4, 0),
        theta_boxes: vec![theta_box.clone()],
        x_lower: to_vector(&p.x_lower),
        x_upper: to_vector(&p.x_upper),
        v_max: RealVector::from_element(2, p.noise),
        y_dependent: false,
    };
    let params = p.clone();
    let c_true = p.c;
    let a_true: crate::model::MatMap = Arc::new(move |t, _| {
        let (i1, i2) = crusher_inverse_masses(t, &params);
        crusher_a(c_true, i1, i2, &params)
    });
    for k in 0..=1000 {
        let t = p.horizon * k as f64 / 1000.0;
        let a = a_true(t, &RealVector::zeros(4));
        let inside = a
            .iter()
            .zip(a_lower.iter().zip(a_upper.iter()))
            .all(|(v, (lo, hi))| *lo <= *v && *v <= *hi);
        if !inside {
            return Err(Error::InvalidArgument(format!(
                "crusher A(t) leaves its envelope at t = {t}"
            )));
        }
    }
    let truth = TruthModel {
        a_true,
        b_true: Arc::new(|_| RealMatrix::zeros(4, 0)),
        theta: PiecewiseConstant::constant(to_vector(&p.theta)),
        x0: to_vector(&p.x0),
        input: Arc::new(|_, _| RealVector::zeros(0)),
    };
    let gamma = RealMatrix::from_diagonal(&to_vector(&p.gamma));
    let gains = ObserverGains {
        l_lower,
        l_upper,
        gamma_lower: gamma.clone(),
        gamma_upper: gamma,
        ideal: None,
    };
    let init = ObserverInit {
        zeta: PerSide::new(spec.x_lower.clone(), spec.x_upper.clone()),
        theta_hat: PerSide::new(theta_box.upper.clone(), theta_box.lower.clone()),
        xi: PerSide::new(spec.x_lower.clone(), spec.x_upper.clone()),
        ideal_zeta: RealVector::zeros(4),
        ideal_theta_hat: RealVector::zeros(4),
    };
    Scenario {
        name: "crusher".into(),
        spec,
        truth,
        gains,
        horizon: p.horizon,
        step: p.step,
        fault_times: Vec::new(),
        init,
        verifier: VerifierSettings {
            pe_window: p.pe_window,
            ..VerifierSettings::default()
        },
        expected: Expected::default(),
    }
    .finish()
}

/// `ρ(x) = sign(x)·sqrt(|x|)`.
pub fn rho(x: f64) -> f64 {
    x.signum() * x.abs().sqrt()
}

/// `λ(x) = |x|^(-1/2)` with the argument floored at [`LAMBDA_FLOOR`].
pub fn lambda(x: f64) -> f64 {
    x.abs().max(LAMBDA_FLOOR).powf(-0.5)
}

/// `ν(u) = max(u, 0)`.
pub fn saturate(u: f64) -> f64 {
    if u > 0.0 {
        u
    } else {
        0.0
    }
}

/// Outflow coefficients `[a13, a32, a20]`.
pub type Outflow = [f64; 3];

/// Raw three-tank dynamics with the square-root pipe law.
pub fn three_tank_rhs(
    x: &RealVector,
    u: &RealVector,
    theta: &RealVector,
    a: Outflow,
    s_c: f64,
) -> RealVector {
    let [a13, a32, a20] = a;
    let q13 = a13 * rho(x[0] - x[2]);
    let q32 = a32 * rho(x[2] - x[1]);
    let q20 = a20 * rho(x[1]);
    let th = |i: usize| theta.get(i).copied().unwrap_or(0.0);
    RealVector::from_column_slice(&[
        (-q13 + u[0] + th(0)) / s_c,
        (q32 - q20 + u[1] + th(1)) / s_c,
        (q13 - q32 + th(2)) / s_c,
    ])
}

/// Factored form `A(x, a)` with `ρ(z) = λ(z) z`.
pub fn three_tank_a(x: &RealVector, a: Outflow, s_c: f64) -> RealMatrix {
    let [a13, a32, a20] = a;
    let l13 = a13 * lambda(x[0] - x[2]);
    let l32 = a32 * lambda(x[2] - x[1]);
    let l20 = a20 * lambda(x[1]);
    RealMatrix::from_row_slice(
        3,
        3,
        &[-l13, 0.0, l13, 0.0, -l32 - l20, l32, l13, l32, -l32 - l13],
    ) / s_c
}

/// Which levels are measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TankSetup {
    /// `y = (x1, x2)`, nominal coefficients, faults in tanks 1 and 2.
    OutputsOneTwo,
    /// `y = x`, coefficients known up to `[r_m a, r_M a]`.
    FullState,
}

/// Three-tank parameters. Partial overrides are merged onto
/// [`TankParams::scenario1`] or [`TankParams::scenario2`] by the caller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TankParams {
    pub a13: f64,
    pub a32: f64,
    pub a20: f64,
    pub s_c: f64,
    pub k: f64,
    pub ell: f64,
    pub x_lower: Vec<f64>,
    pub x_upper: Vec<f64>,
    pub period: f64,
    pub r_min: f64,
    pub r_max: f64,
    /// Ratio of the realized coefficients to the nominal ones.
    pub r_true: f64,
    pub fault_times: Vec<f64>,
    /// Fault vector switched on at each fault time (cumulative).
    pub fault_values: Vec<Vec<f64>>,
    pub reference_delays: Vec<f64>,
    pub fault_channels: Vec<usize>,
    pub gamma: f64,
    pub noise: f64,
    pub horizon: f64,
    pub step: f64,
}

impl TankParams {
    fn common() -> Self {
        TankParams {
            a13: 1.329e-4,
            a32: 1.329e-4,
            a20: 1.772e-4,
            s_c: 0.0154,
            k: 1.329e-3,
            ell: 3.0,
            x_lower: vec![0.44, 0.04, 0.24],
            x_upper: vec![0.56, 0.16, 0.36],
            period: 200.0,
            r_min: 1.0,
            r_max: 1.0,
            r_true: 1.0,
            fault_times: Vec::new(),
            fault_values: Vec::new(),
            reference_delays: Vec::new(),
            fault_channels: Vec::new(),
            gamma: 3e-3,
            noise: 4.5e-3,
            horizon: 400.0,
            step: 1e-2,
        }
    }

    pub fn scenario1() -> Self {
        TankParams {
            fault_times: vec![200.0, 300.0],
            fault_values: vec![vec![8e-5, 0.0], vec![8e-5, 6e-5]],
            reference_delays: vec![0.35, 0.45],
            fault_channels: vec![0, 1],
            ..Self::common()
        }
    }

    pub fn scenario2() -> Self {
        TankParams {
            r_min: 0.75,
            r_max: 1.25,
            fault_times: vec![200.0, 300.0, 300.0],
            fault_values: vec![
                vec![8e-5, 0.0, 0.0],
                vec![8e-5, 6e-5, 9e-5],
                vec![8e-5, 6e-5, 9e-5],
            ],
            reference_delays: vec![0.52, 0.55, 7.61],
            fault_channels: vec![0, 1, 2],
            ..Self::common()
        }
    }

    pub fn outflow(&self) -> Outflow {
        [self.a13, self.a32, self.a20]
    }

    fn in_box(&self, y: &RealVector, setup: TankSetup) -> bool {
        let idx: &[usize] = match setup {
            TankSetup::OutputsOneTwo => &[0, 1],
            TankSetup::FullState => &[0, 1, 2],
        };
        idx.iter()
            .enumerate()
            .all(|(k, &i)| self.x_lower[i] <= y[k] && y[k] <= self.x_upper[i])
    }
}

/// Square-wave reference `y_r(t)` for the two controlled levels.
pub fn tank_reference(t: f64, period: f64) -> [f64; 2] {
    let mu = if t.rem_euclid(period) <= 0.5 * period {
        0.0
    } else {
        1.0
    };
    [0.5 * (1.0 + 0.07 * mu), 0.1 * (1.0 + 0.5 * mu)]
}

/// Saturated square-root tracking controller.
pub fn tank_controller(t: f64, y: &RealVector, k: f64, a20: f64, period: f64) -> RealVector {
    let yr = tank_reference(t, period);
    RealVector::from_column_slice(&[
        saturate(-k * rho(y[0] - yr[0])),
        saturate(-k * rho(y[1] - yr[1]) + a20 * rho(y[1])),
    ])
}

fn tank_bounds_outputs(y: &RealVector, p: &TankParams) -> (RealMatrix, RealMatrix) {
    let (x3_lo, x3_hi) = (p.x_lower[2], p.x_upper[2]);
    let (y1, y2) = (y[0], y[1]);
    // λ(y1 - x3) grows with x3, λ(x3 - y2) shrinks with it.
    let l13 = |x3: f64| p.a13 * lambda(y1 - x3);
    let l32 = |x3: f64| p.a32 * lambda(x3 - y2);
    let (l13_min, l13_max) = (l13(x3_lo), l13(x3_hi));
    let (l32_min, l32_max) = (l32(x3_hi), l32(x3_lo));
    let l20 = p.a20 * lambda(y2);
    let sum = |x3: f64| l13(x3) + l32(x3);
    let ratio = (p.a13 / p.a32).powf(2.0 / 3.0);
    let x3_star = ((y1 + ratio * y2) / (1.0 + ratio)).clamp(x3_lo, x3_hi);
    let sum_max = sum(x3_lo).max(sum(x3_hi));
    let sum_min = sum(x3_star).min(sum(x3_lo)).min(sum(x3_hi));
    let lower = RealMatrix::from_row_slice(
        3,
        3,
        &[
            -l13_max,
            0.0,
            l13_min,
            0.0,
            -l32_max - l20,
            l32_min,
            l13_min,
            l32_min,
            -sum_max,
        ],
    ) / p.s_c;
    let upper = RealMatrix::from_row_slice(
        3,
        3,
        &[
            -l13_min,
            0.0,
            l13_max,
            0.0,
            -l32_min - l20,
            l32_max,
            l13_max,
            l32_max,
            -sum_min,
        ],
    ) / p.s_c;
    (lower, upper)
}

fn tank_bounds_full(y: &RealVector, p: &TankParams) -> (RealMatrix, RealMatrix) {
    let l13 = p.a13 * lambda(y[0] - y[2]);
    let l32 = p.a32 * lambda(y[2] - y[1]);
    let l20 = p.a20 * lambda(y[1]);
    // Diagonal entries take the large coefficient for the lower bound, the
    // off-diagonal ones the small coefficient.
    let build = |diag: f64, off: f64| {
        RealMatrix::from_row_slice(
            3,
            3,
            &[
                -diag * l13,
                0.0,
                off * l13,
                0.0,
                -diag * (l32 + l20),
                off * l32,
                off * l13,
                off * l32,
                -diag * (l32 + l13),
            ],
        ) / p.s_c
    };
    (build(p.r_max, p.r_min), build(p.r_min, p.r_max))
}

/// Output-dependent bounds `(A_lower(y), A_upper(y))`; errors when `y`
/// leaves the operating box.
pub fn three_tank_lpv(
    y: &RealVector,
    setup: TankSetup,
    p: &TankParams,
) -> Result<(RealMatrix, RealMatrix)> {
    if !p.in_box(y, setup) {
        return Err(Error::Domain(format!(
            "measured levels {:?} outside the operating box",
            y.as_slice()
        )));
    }
    Ok(match setup {
        TankSetup::OutputsOneTwo => tank_bounds_outputs(y, p),
        TankSetup::FullState => tank_bounds_full(y, p),
    })
}

pub fn three_tank(p: &TankParams, setup: TankSetup) -> Result<Scenario> {
    let n = 3;
    let (c, q) = match setup {
        TankSetup::OutputsOneTwo => (
            RealMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]),
            2,
        ),
        TankSetup::FullState => (RealMatrix::identity(3, 3), 3),
    };
    let p_out = c.nrows();
    if p.fault_values.len() != p.fault_times.len() || p.fault_values.iter().any(|v| v.len() != q) {
        return Err(Error::Dimension(format!(
            "each tank fault value needs {q} entries"
        )));
    }
    let b = RealMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]) / p.s_c;
    let g = match setup {
        TankSetup::OutputsOneTwo => b.clone(),
        TankSetup::FullState => RealMatrix::identity(3, 3) / p.s_c,
    };
    let l = c.transpose() * p.ell;
    let bounds_params = p.clone();
    let bounds = move |y: &RealVector| match setup {
        TankSetup::OutputsOneTwo => tank_bounds_outputs(y, &bounds_params),
        TankSetup::FullState => tank_bounds_full(y, &bounds_params),
    };
    let bounds_lo = bounds.clone();
    let theta_box = ParamBox {
        start: 0.0,
        lower: RealVector::zeros(q),
        upper: RealVector::zeros(q),
        sign_case: Some(SignCase::Nonnegative),
        claimed_order: Some(IntervalOrder::Reversed),
    };
    let spec = LpvSystemSpec {
        n,
        m: 2,
        p: p_out,
        q,
        c,
        phi: zero_phi(n),
        g: constant_map(g),
        a_lower: Arc::new(move |_, y| bounds_lo(y).0),
        a_upper: Arc::new(move |_, y| bounds(y).1),
        b_lower: b.clone(),
        b_upper: b.clone(),
        theta_boxes: vec![theta_box],
        x_lower: to_vector(&p.x_lower),
        x_upper: to_vector(&p.x_upper),
        v_max: RealVector::from_element(p_out, p.noise),
        y_dependent: true,
    };
    let mut fault_switches = Vec::new();
    let mut fault_values = vec![RealVector::zeros(q)];
    for (t, v) in p.fault_times.iter().zip(&p.fault_values) {
        if fault_switches.last() == Some(t) {
            *fault_values.last_mut().expect("nonempty") = to_vector(v);
        } else {
            fault_switches.push(*t);
            fault_values.push(to_vector(v));
        }
    }
    let a_real: Outflow = [p.a13 * p.r_true, p.a32 * p.r_true, p.a20 * p.r_true];
    let s_c = p.s_c;
    let (k, a20, period) = (p.k, p.a20, p.period);
    let truth = TruthModel {
        a_true: Arc::new(move |_, x| three_tank_a(x, a_real, s_c)),
        b_true: Arc::new(move |_| b.clone()),
        theta: PiecewiseConstant::new(fault_switches, fault_values)?,
        x0: (to_vector(&p.x_lower) + to_vector(&p.x_upper)) * 0.5,
        input: Arc::new(move |t, y| tank_controller(t, y, k, a20, period)),
    };
    let gamma = RealMatrix::identity(q, q) * p.gamma;
    let gains = ObserverGains {
        l_lower: l.clone(),
        l_upper: l.clone(),
        gamma_lower: gamma.clone(),
        gamma_upper: gamma.clone(),
        ideal: Some(IdealGains { l, gamma }),
    };
    let init = ObserverInit {
        zeta: PerSide::new(spec.x_lower.clone(), spec.x_upper.clone()),
        theta_hat: PerSide::new(RealVector::zeros(q), RealVector::zeros(q)),
        xi: PerSide::new(spec.x_lower.clone(), spec.x_upper.clone()),
        ideal_zeta: truth.x0.clone(),
        ideal_theta_hat: RealVector::zeros(q),
    };
    let expected = Expected {
        phases: Vec::new(),
        containment_from: None,
        delays: p
            .fault_times
            .iter()
            .zip(&p.fault_channels)
            .zip(&p.reference_delays)
            .map(|((t, ch), d)| ExpectedDelay {
                fault_time: *t,
                channel: *ch,
                reference_delay: *d,
            })
            .collect(),
    };
    let name = match setup {
        TankSetup::OutputsOneTwo => "tank1",
        TankSetup::FullState => "tank2",
    };
    Scenario {
        name: name.into(),
        spec,
        truth,
        gains,
        horizon: p.horizon,
        step: p.step,
        fault_times: p.fault_times.clone(),
        init,
        verifier: VerifierSettings {
            pe_window: p.ell.max(3.0),
            ..VerifierSettings::default()
        },
        expected,
    }
    .finish()
}
