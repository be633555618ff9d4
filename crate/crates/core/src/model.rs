//! The bounded LPV system class, its ground-truth realization and observer
//! gains.
//!
//! Bound matrices are maps of `(t, y)`; constant bounds are the degenerate
//! case. Elementwise order is the nonstrict `<=` with [`ENVELOPE_TOL`].

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{RealMatrix, RealVector};

pub const ENVELOPE_TOL: f64 = 1e-12;

pub type VecMap = Arc<dyn Fn(f64, &RealVector) -> RealVector + Send + Sync>;
pub type MatMap = Arc<dyn Fn(f64, &RealVector) -> RealMatrix + Send + Sync>;
pub type TimeMatMap = Arc<dyn Fn(f64) -> RealMatrix + Send + Sync>;

/// Which interval endpoint an observer copy is built on: the minorant
/// (`Lower`, subscript `m`) or the majorant (`Upper`, `M`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Lower,
    Upper,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Lower, Side::Upper];

    pub fn other(self) -> Side {
        match self {
            Side::Lower => Side::Upper,
            Side::Upper => Side::Lower,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Side::Lower => "m",
            Side::Upper => "M",
        }
    }
}

/// A value stored once per observer copy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerSide<T> {
    pub lower: T,
    pub upper: T,
}

impl<T> PerSide<T> {
    pub fn new(lower: T, upper: T) -> Self {
        PerSide { lower, upper }
    }

    pub fn from_fn(mut f: impl FnMut(Side) -> T) -> Self {
        PerSide {
            lower: f(Side::Lower),
            upper: f(Side::Upper),
        }
    }

    pub fn map<U>(&self, mut f: impl FnMut(Side, &T) -> U) -> PerSide<U> {
        PerSide {
            lower: f(Side::Lower, &self.lower),
            upper: f(Side::Upper, &self.upper),
        }
    }

    pub fn as_ref(&self) -> PerSide<&T> {
        PerSide {
            lower: &self.lower,
            upper: &self.upper,
        }
    }
}

impl<T> std::ops::Index<Side> for PerSide<T> {
    type Output = T;
    fn index(&self, side: Side) -> &T {
        match side {
            Side::Lower => &self.lower,
            Side::Upper => &self.upper,
        }
    }
}

impl<T> std::ops::IndexMut<Side> for PerSide<T> {
    fn index_mut(&mut self, side: Side) -> &mut T {
        match side {
            Side::Lower => &mut self.lower,
            Side::Upper => &mut self.upper,
        }
    }
}

/// How the two parameter estimates bracket the true parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IntervalOrder {
    /// `θ̂_m <= θ <= θ̂_M`
    Direct,
    /// `θ̂_M <= θ <= θ̂_m`
    Reversed,
}

impl IntervalOrder {
    /// The observer copy whose estimate is the lower endpoint.
    pub fn lower_side(self) -> Side {
        match self {
            IntervalOrder::Direct => Side::Lower,
            IntervalOrder::Reversed => Side::Upper,
        }
    }

    pub fn upper_side(self) -> Side {
        self.lower_side().other()
    }

    /// `(lower, upper)` endpoints of the certified interval.
    pub fn endpoints(self, est: &PerSide<RealVector>) -> (&RealVector, &RealVector) {
        (&est[self.lower_side()], &est[self.upper_side()])
    }
}

/// Sign pattern of state and input required by the state-interval theorem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SignCase {
    /// `x(t) >= 0`, `u(t) >= 0`
    Nonnegative,
    /// `x(t) <= 0`, `u(t) <= 0`
    Nonpositive,
}

/// A time interval during which the parameter box is fixed.
///
/// Observers are told about box changes (they are a-priori knowledge), so
/// the verifier restarts its running averages at each `start`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamBox {
    pub start: f64,
    pub lower: RealVector,
    pub upper: RealVector,
    /// Sign pattern the state is expected to follow in this phase.
    pub sign_case: Option<SignCase>,
    /// Ordering the observer initialization aims for, used until the
    /// verifier certifies one.
    pub claimed_order: Option<IntervalOrder>,
}

impl ParamBox {
    pub fn contains(&self, theta: &RealVector, tol: f64) -> bool {
        theta
            .iter()
            .zip(self.lower.iter().zip(self.upper.iter()))
            .all(|(v, (lo, hi))| *lo - tol <= *v && *v <= *hi + tol)
    }
}

/// Piecewise-constant signal, right-continuous at each switch:
/// `value(t) = values[k]` for `switch_times[k-1] < t <= switch_times[k]`
/// with the convention that the first piece includes `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseConstant {
    pub switch_times: Vec<f64>,
    pub values: Vec<RealVector>,
}

impl PiecewiseConstant {
    pub fn constant(value: RealVector) -> Self {
        PiecewiseConstant {
            switch_times: Vec::new(),
            values: vec![value],
        }
    }

    pub fn new(switch_times: Vec<f64>, values: Vec<RealVector>) -> Result<Self> {
        if values.len() != switch_times.len() + 1 {
            return Err(Error::InvalidArgument(format!(
                "{} switch times need {} values, got {}",
                switch_times.len(),
                switch_times.len() + 1,
                values.len()
            )));
        }
        if switch_times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("switch times must increase".into()));
        }
        Ok(PiecewiseConstant {
            switch_times,
            values,
        })
    }

    pub fn piece_index(&self, t: f64) -> usize {
        self.switch_times.iter().take_while(|s| t > **s).count()
    }

    pub fn at(&self, t: f64) -> &RealVector {
        &self.values[self.piece_index(t)]
    }
}

/// The LPV system class: `ẋ = A(ρ)x + B(ρ)u + φ(y) + G(y)θ`, `y = Cx`,
/// with elementwise bounds on `A`, `B`, `θ` and `x`.
#[derive(Clone)]
pub struct LpvSystemSpec {
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub q: usize,
    pub c: RealMatrix,
    pub phi: VecMap,
    pub g: MatMap,
    pub a_lower: MatMap,
    pub a_upper: MatMap,
    pub b_lower: RealMatrix,
    pub b_upper: RealMatrix,
    /// Parameter boxes ordered by start time; the first starts at 0.
    pub theta_boxes: Vec<ParamBox>,
    pub x_lower: RealVector,
    pub x_upper: RealVector,
    pub v_max: RealVector,
    /// Whether the bound matrices depend on the measured output.
    pub y_dependent: bool,
}

impl fmt::Debug for LpvSystemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LpvSystemSpec")
            .field("n", &self.n)
            .field("m", &self.m)
            .field("p", &self.p)
            .field("q", &self.q)
            .field("c", &self.c)
            .field("theta_boxes", &self.theta_boxes)
            .field("x_lower", &self.x_lower)
            .field("x_upper", &self.x_upper)
            .field("v_max", &self.v_max)
            .field("y_dependent", &self.y_dependent)
            .finish_non_exhaustive()
    }
}

fn leq(a: &RealVector, b: &RealVector) -> bool {
    a.iter().zip(b.iter()).all(|(x, y)| x <= y)
}

impl LpvSystemSpec {
    pub fn theta_lower(&self) -> &RealVector {
        &self.theta_boxes[0].lower
    }

    pub fn theta_upper(&self) -> &RealVector {
        &self.theta_boxes[0].upper
    }

    pub fn phase_index(&self, t: f64) -> usize {
        self.theta_boxes
            .iter()
            .rposition(|b| t >= b.start)
            .unwrap_or(0)
    }

    pub fn box_at(&self, t: f64) -> &ParamBox {
        &self.theta_boxes[self.phase_index(t)]
    }

    pub fn a_bound(&self, side: Side, t: f64, y: &RealVector) -> RealMatrix {
        match side {
            Side::Lower => (self.a_lower)(t, y),
            Side::Upper => (self.a_upper)(t, y),
        }
    }

    pub fn b_bound(&self, side: Side) -> &RealMatrix {
        match side {
            Side::Lower => &self.b_lower,
            Side::Upper => &self.b_upper,
        }
    }

    /// True when every entry of `C` is nonnegative (competitive adaptation).
    pub fn c_nonnegative(&self) -> bool {
        self.c.iter().all(|v| *v >= 0.0)
    }

    /// Checks dimensions and the static order invariants.
    pub fn validate(&self) -> Result<()> {
        let dim = |what: &str, ok: bool| {
            if ok {
                Ok(())
            } else {
                Err(Error::Dimension(format!("{what} has the wrong shape")))
            }
        };
        dim("C", self.c.shape() == (self.p, self.n))?;
        dim("B_lower", self.b_lower.shape() == (self.n, self.m))?;
        dim("B_upper", self.b_upper.shape() == (self.n, self.m))?;
        dim(
            "x box",
            self.x_lower.len() == self.n && self.x_upper.len() == self.n,
        )?;
        dim("v_max", self.v_max.len() == self.p)?;
        if self.theta_boxes.is_empty() {
            return Err(Error::InvalidArgument(
                "at least one parameter box is required".into(),
            ));
        }
        if self.theta_boxes[0].start != 0.0 {
            return Err(Error::InvalidArgument(
                "first parameter box must start at 0".into(),
            ));
        }
        for b in &self.theta_boxes {
            dim(
                "theta box",
                b.lower.len() == self.q && b.upper.len() == self.q,
            )?;
            if !leq(&b.lower, &b.upper) {
                return Err(Error::InvalidArgument(
                    "theta_lower must not exceed theta_upper".into(),
                ));
            }
        }
        if self
            .theta_boxes
            .windows(2)
            .any(|w| w[0].start >= w[1].start)
        {
            return Err(Error::InvalidArgument(
                "parameter boxes must start in increasing order".into(),
            ));
        }
        if !leq(&self.x_lower, &self.x_upper) {
            return Err(Error::InvalidArgument(
                "x_lower must not exceed x_upper".into(),
            ));
        }
        if self
            .b_lower
            .iter()
            .zip(self.b_upper.iter())
            .any(|(a, b)| a > b)
        {
            return Err(Error::InvalidArgument(
                "B_lower must not exceed B_upper".into(),
            ));
        }
        if self.v_max.iter().any(|v| *v < 0.0) {
            return Err(Error::InvalidArgument(
                "noise amplitude must be nonnegative".into(),
            ));
        }
        let y0 = &self.c * (&self.x_lower + &self.x_upper) * 0.5;
        let al = (self.a_lower)(0.0, &y0);
        let au = (self.a_upper)(0.0, &y0);
        dim(
            "A bounds",
            al.shape() == (self.n, self.n) && au.shape() == (self.n, self.n),
        )?;
        dim("G", (self.g)(0.0, &y0).shape() == (self.n, self.q))?;
        dim("phi", (self.phi)(0.0, &y0).len() == self.n)?;
        Ok(())
    }
}

pub type InputMap = Arc<dyn Fn(f64, &RealVector) -> RealVector + Send + Sync>;

/// Ground-truth plant used by simulations and test oracles.
#[derive(Clone)]
pub struct TruthModel {
    /// Realized `A(ρ(t))`; may depend on the plant state (e.g. the tank
    /// model's `A(x, a)`).
    pub a_true: MatMap,
    pub b_true: TimeMatMap,
    pub theta: PiecewiseConstant,
    pub x0: RealVector,
    /// Control law `u(t, y_v)`.
    pub input: InputMap,
}

impl fmt::Debug for TruthModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TruthModel")
            .field("theta", &self.theta)
            .field("x0", &self.x0)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdealGains {
    pub l: RealMatrix,
    pub gamma: RealMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObserverGains {
    pub l_lower: RealMatrix,
    pub l_upper: RealMatrix,
    pub gamma_lower: RealMatrix,
    pub gamma_upper: RealMatrix,
    /// Gains of the baseline observer that is handed the true `A(ρ(t))`.
    pub ideal: Option<IdealGains>,
}

impl ObserverGains {
    pub fn l(&self, side: Side) -> &RealMatrix {
        match side {
            Side::Lower => &self.l_lower,
            Side::Upper => &self.l_upper,
        }
    }

    pub fn gamma(&self, side: Side) -> &RealMatrix {
        match side {
            Side::Lower => &self.gamma_lower,
            Side::Upper => &self.gamma_upper,
        }
    }

    /// `L` must be `n×p` and `Γ` must be `q×q`.
    pub fn validate(&self, n: usize, p: usize, q: usize) -> Result<()> {
        let mut mats = vec![("L_m", &self.l_lower, n, p), ("L_M", &self.l_upper, n, p)];
        mats.push(("Γ_m", &self.gamma_lower, q, q));
        mats.push(("Γ_M", &self.gamma_upper, q, q));
        if let Some(ideal) = &self.ideal {
            mats.push(("L ideal", &ideal.l, n, p));
            mats.push(("Γ ideal", &ideal.gamma, q, q));
        }
        for (name, m, rows, cols) in mats {
            if m.shape() != (rows, cols) {
                return Err(Error::Dimension(format!(
                    "{name} is {}x{}, expected {rows}x{cols}",
                    m.nrows(),
                    m.ncols()
                )));
            }
        }
        Ok(())
    }

    /// Multiplies both adaptation gains (and the ideal one) by `factor`.
    pub fn scale_gamma(&mut self, factor: f64) {
        self.gamma_lower *= factor;
        self.gamma_upper *= factor;
        if let Some(ideal) = self.ideal.as_mut() {
            ideal.gamma *= factor;
        }
    }
}

/// `y = Cx` and the measured `y_v = y + noise`.
pub fn sample_output(
    spec: &LpvSystemSpec,
    x: &RealVector,
    noise: &RealVector,
) -> (RealVector, RealVector) {
    let y = &spec.c * x;
    let y_v = &y + noise;
    (y, y_v)
}

/// Plant right-hand side `A(t)x + B(t)u + φ(Cx) + G(Cx)θ(t)`.
pub fn plant_rhs(
    spec: &LpvSystemSpec,
    truth: &TruthModel,
    t: f64,
    x: &RealVector,
    u: &RealVector,
    theta: &RealVector,
) -> RealVector {
    let y = &spec.c * x;
    let mut dx = (truth.a_true)(t, x) * x + (spec.phi)(t, &y) + (spec.g)(t, &y) * theta;
    if !u.is_empty() {
        dx += (truth.b_true)(t) * u;
    }
    dx
}

/// `A_lower(y) - tol <= A_true <= A_upper(y) + tol` at one point.
pub fn envelope_holds(
    spec: &LpvSystemSpec,
    truth: &TruthModel,
    t: f64,
    x: &RealVector,
    tol: f64,
) -> bool {
    let y = &spec.c * x;
    let a = (truth.a_true)(t, x);
    let lo = (spec.a_lower)(t, &y);
    let hi = (spec.a_upper)(t, &y);
    let a_ok = a
        .iter()
        .zip(lo.iter().zip(hi.iter()))
        .all(|(v, (l, h))| *l - tol <= *v && *v <= *h + tol);
    if spec.m == 0 {
        return a_ok;
    }
    let b = (truth.b_true)(t);
    a_ok && b
        .iter()
        .zip(spec.b_lower.iter().zip(spec.b_upper.iter()))
        .all(|(v, (l, h))| *l - tol <= *v && *v <= *h + tol)
}
