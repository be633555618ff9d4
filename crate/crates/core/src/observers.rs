//! Right-hand sides of the ideal adaptive observer, the adaptive set
//! observer and the interval state observer.

use serde::{Deserialize, Serialize};

use crate::model::{IdealGains, LpvSystemSpec, ObserverGains, PerSide, Side, TruthModel};
use crate::numerics::{RealMatrix, RealVector};

/// Which parameter estimate drives each state-interval endpoint:
/// `ξ_m` uses `θ̂_{lower_from}`, `ξ_M` uses `θ̂_{upper_from}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pairing {
    pub lower_from: Side,
    pub upper_from: Side,
}

impl Pairing {
    pub fn source(&self, side: Side) -> Side {
        match side {
            Side::Lower => self.lower_from,
            Side::Upper => self.upper_from,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveObserverState {
    pub zeta: PerSide<RealVector>,
    pub omega: PerSide<RealMatrix>,
    pub theta_hat: PerSide<RealVector>,
    pub xi: PerSide<RealVector>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdealObserverState {
    pub zeta: RealVector,
    pub omega: RealMatrix,
    pub theta_hat: RealVector,
}

impl IdealObserverState {
    pub fn new(zeta: RealVector, q: usize, theta_hat: RealVector) -> Self {
        let n = zeta.len();
        IdealObserverState {
            zeta,
            omega: RealMatrix::zeros(n, q),
            theta_hat,
        }
    }

    pub fn len(&self) -> usize {
        self.zeta.len() * (1 + self.omega.ncols()) + self.theta_hat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn write(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(self.zeta.as_slice());
        out.extend_from_slice(self.omega.as_slice());
        out.extend_from_slice(self.theta_hat.as_slice());
    }

    pub fn read(n: usize, q: usize, data: &[f64]) -> Self {
        let zeta = RealVector::from_column_slice(&data[..n]);
        let omega = RealMatrix::from_column_slice(n, q, &data[n..n + n * q]);
        let theta_hat = RealVector::from_column_slice(&data[n + n * q..n + n * q + q]);
        IdealObserverState {
            zeta,
            omega,
            theta_hat,
        }
    }
}

impl AdaptiveObserverState {
    /// Initialization: `ζ`, `ξ` at the given endpoints, `Ω_o(0) = 0`.
    pub fn new(
        zeta: PerSide<RealVector>,
        theta_hat: PerSide<RealVector>,
        xi: PerSide<RealVector>,
    ) -> Self {
        let n = zeta.lower.len();
        let q = theta_hat.lower.len();
        AdaptiveObserverState {
            zeta,
            omega: PerSide::from_fn(|_| RealMatrix::zeros(n, q)),
            theta_hat,
            xi,
        }
    }

    pub fn packed_len(n: usize, q: usize) -> usize {
        2 * (n + n * q + q + n)
    }

    pub fn write(&self, out: &mut Vec<f64>) {
        for side in Side::BOTH {
            out.extend_from_slice(self.zeta[side].as_slice());
            out.extend_from_slice(self.omega[side].as_slice());
            out.extend_from_slice(self.theta_hat[side].as_slice());
            out.extend_from_slice(self.xi[side].as_slice());
        }
    }

    pub fn read(n: usize, q: usize, data: &[f64]) -> Self {
        let block = n + n * q + q + n;
        let part = |side: Side| {
            let base = match side {
                Side::Lower => 0,
                Side::Upper => block,
            };
            let d = &data[base..base + block];
            (
                RealVector::from_column_slice(&d[..n]),
                RealMatrix::from_column_slice(n, q, &d[n..n + n * q]),
                RealVector::from_column_slice(&d[n + n * q..n + n * q + q]),
                RealVector::from_column_slice(&d[n + n * q + q..]),
            )
        };
        let (zl, ol, tl, xl) = part(Side::Lower);
        let (zu, ou, tu, xu) = part(Side::Upper);
        AdaptiveObserverState {
            zeta: PerSide::new(zl, zu),
            omega: PerSide::new(ol, ou),
            theta_hat: PerSide::new(tl, tu),
            xi: PerSide::new(xl, xu),
        }
    }

    pub fn is_finite(&self) -> bool {
        Side::BOTH.iter().all(|&s| {
            self.zeta[s].iter().all(|v| v.is_finite())
                && self.omega[s].iter().all(|v| v.is_finite())
                && self.theta_hat[s].iter().all(|v| v.is_finite())
                && self.xi[s].iter().all(|v| v.is_finite())
        })
    }
}

/// Everything the observers read from the measurement at one instant.
#[derive(Debug, Clone)]
pub struct MeasuredTerms {
    pub y_v: RealVector,
    pub u: RealVector,
    pub phi: RealVector,
    pub g: RealMatrix,
    pub a: PerSide<RealMatrix>,
}

impl MeasuredTerms {
    pub fn evaluate(spec: &LpvSystemSpec, t: f64, y_v: &RealVector, u: &RealVector) -> Self {
        MeasuredTerms {
            y_v: y_v.clone(),
            u: u.clone(),
            phi: (spec.phi)(t, y_v),
            g: (spec.g)(t, y_v),
            a: PerSide::from_fn(|side| spec.a_bound(side, t, y_v)),
        }
    }
}

/// Derivatives of `(ζ_o, Ω_o, θ̂_o)` for both copies; the `xi` field of the
/// returned container is zero.
pub fn set_observer_rhs(
    state: &AdaptiveObserverState,
    spec: &LpvSystemSpec,
    gains: &ObserverGains,
    terms: &MeasuredTerms,
) -> AdaptiveObserverState {
    let c = &spec.c;
    let n = spec.n;
    let mut d = AdaptiveObserverState {
        zeta: PerSide::from_fn(|_| RealVector::zeros(n)),
        omega: PerSide::from_fn(|_| RealMatrix::zeros(n, spec.q)),
        theta_hat: PerSide::from_fn(|_| RealVector::zeros(spec.q)),
        xi: PerSide::from_fn(|_| RealVector::zeros(n)),
    };
    for side in Side::BOTH {
        let a = &terms.a[side];
        let l = gains.l(side);
        let zeta = &state.zeta[side];
        let omega = &state.omega[side];
        let residual = &terms.y_v - c * zeta;
        let mut dz = a * zeta + &terms.phi + l * &residual;
        if spec.m > 0 {
            dz += spec.b_bound(side) * &terms.u;
        }
        let c_omega = c * omega;
        let d_omega = (a - l * c) * omega - &terms.g;
        let d_theta = -(gains.gamma(side)
            * (c_omega.transpose() * (residual + &c_omega * &state.theta_hat[side])));
        d.zeta[side] = dz;
        d.omega[side] = d_omega;
        d.theta_hat[side] = d_theta;
    }
    d
}

/// Derivatives of `(ξ_m, ξ_M)` under the given pairing.
pub fn state_observer_rhs(
    state: &AdaptiveObserverState,
    spec: &LpvSystemSpec,
    gains: &ObserverGains,
    terms: &MeasuredTerms,
    pairing: Pairing,
) -> PerSide<RealVector> {
    PerSide::from_fn(|side| {
        let xi = &state.xi[side];
        let theta = &state.theta_hat[pairing.source(side)];
        let mut dxi = &terms.a[side] * xi
            + &terms.phi
            + &terms.g * theta
            + gains.l(side) * (&terms.y_v - &spec.c * xi);
        if spec.m > 0 {
            dxi += spec.b_bound(side) * &terms.u;
        }
        dxi
    })
}

/// Observer handed the true `A(ρ(t))`, `B(ρ(t))`.
pub fn ideal_observer_rhs(
    state: &IdealObserverState,
    a_true: &RealMatrix,
    b_true: &RealMatrix,
    spec: &LpvSystemSpec,
    gains: &IdealGains,
    terms: &MeasuredTerms,
) -> IdealObserverState {
    let c = &spec.c;
    let residual = &terms.y_v - c * &state.zeta;
    let mut dz = a_true * &state.zeta + &terms.phi + &gains.l * &residual;
    if spec.m > 0 {
        dz += b_true * &terms.u;
    }
    let c_omega = c * &state.omega;
    let d_omega = (a_true - &gains.l * c) * &state.omega - &terms.g;
    let d_theta =
        -(&gains.gamma * (c_omega.transpose() * (residual + &c_omega * &state.theta_hat)));
    IdealObserverState {
        zeta: dz,
        omega: d_omega,
        theta_hat: d_theta,
    }
}

/// Scratch buffers for [`packed_observer_rhs`].
#[derive(Debug, Clone)]
pub struct ObserverWorkspace {
    residual: Vec<f64>,
    c_omega: Vec<f64>,
    innovation: Vec<f64>,
    grad: Vec<f64>,
}

impl ObserverWorkspace {
    pub fn new(_n: usize, p: usize, q: usize) -> Self {
        ObserverWorkspace {
            residual: vec![0.0; p],
            c_omega: vec![0.0; p * q],
            innovation: vec![0.0; p],
            grad: vec![0.0; q],
        }
    }
}

/// `y += alpha * A x` for a column-major `A`.
fn mv_acc(alpha: f64, a: &RealMatrix, x: &[f64], y: &mut [f64]) {
    let rows = a.nrows();
    for (col, &xj) in a.as_slice().chunks_exact(rows.max(1)).zip(x) {
        let s = alpha * xj;
        for (yi, aij) in y.iter_mut().zip(col) {
            *yi += aij * s;
        }
    }
}

/// `y = Aᵀ x` for a column-major `rows × cols` block.
fn mtv(a: &[f64], rows: usize, x: &[f64], y: &mut [f64]) {
    for (yj, col) in y.iter_mut().zip(a.chunks_exact(rows.max(1))) {
        *yj = col.iter().zip(x).map(|(a, b)| a * b).sum();
    }
}

/// `(ζ̇, Ω̇, θ̂̇)` of one adaptive copy with bound `a`, input matrix `b`, gain
/// `l` and adaptation gain `gamma`, in the packed order `ζ, Ω, θ̂`.
#[allow(clippy::too_many_arguments)]
fn packed_copy_rhs(
    s: &[f64],
    out: &mut [f64],
    spec: &LpvSystemSpec,
    terms: &MeasuredTerms,
    a: &RealMatrix,
    b: &RealMatrix,
    l: &RealMatrix,
    gamma: &RealMatrix,
    ws: &mut ObserverWorkspace,
) {
    let (n, p, q) = (spec.n, spec.p, spec.q);
    let c = &spec.c;
    let (d_zeta, rest) = out.split_at_mut(n);
    let (d_omega, d_theta) = rest.split_at_mut(n * q);
    let zeta = &s[..n];
    let omega = &s[n..n + n * q];
    let theta = &s[n + n * q..n + n * q + q];

    ws.residual.copy_from_slice(terms.y_v.as_slice());
    mv_acc(-1.0, c, zeta, &mut ws.residual);
    d_zeta.copy_from_slice(terms.phi.as_slice());
    mv_acc(1.0, a, zeta, d_zeta);
    mv_acc(1.0, l, &ws.residual, d_zeta);
    if spec.m > 0 {
        mv_acc(1.0, b, terms.u.as_slice(), d_zeta);
    }

    for j in 0..q {
        let om = &omega[j * n..(j + 1) * n];
        let co = &mut ws.c_omega[j * p..(j + 1) * p];
        co.fill(0.0);
        mv_acc(1.0, c, om, co);
        let dom = &mut d_omega[j * n..(j + 1) * n];
        for (d, g) in dom.iter_mut().zip(terms.g.column(j).iter()) {
            *d = -g;
        }
        mv_acc(1.0, a, om, dom);
        mv_acc(-1.0, l, co, dom);
    }

    ws.innovation.copy_from_slice(&ws.residual);
    for (j, &th) in theta.iter().enumerate() {
        for (v, co) in ws
            .innovation
            .iter_mut()
            .zip(&ws.c_omega[j * p..(j + 1) * p])
        {
            *v += co * th;
        }
    }
    mtv(&ws.c_omega, p, &ws.innovation, &mut ws.grad);
    let d_theta = &mut d_theta[..q];
    d_theta.fill(0.0);
    mv_acc(-1.0, gamma, &ws.grad, d_theta);
}

/// Same derivative as [`set_observer_rhs`] plus [`state_observer_rhs`], read
/// from and written to the packed layout of [`AdaptiveObserverState::write`].
#[allow(clippy::too_many_arguments)]
pub fn packed_observer_rhs(
    state: &[f64],
    out: &mut [f64],
    spec: &LpvSystemSpec,
    gains: &ObserverGains,
    terms: &MeasuredTerms,
    pairing: Pairing,
    ws: &mut ObserverWorkspace,
) {
    let (n, q) = (spec.n, spec.q);
    let head = n + n * q + q;
    let block = head + n;
    let c = &spec.c;
    let theta_of = |side: Side| {
        let base = if side == Side::Lower { 0 } else { block };
        &state[base + n + n * q..base + head]
    };
    for (k, side) in Side::BOTH.into_iter().enumerate() {
        let s = &state[k * block..(k + 1) * block];
        let (d_head, d_xi) = out[k * block..(k + 1) * block].split_at_mut(head);
        let a = &terms.a[side];
        let l = gains.l(side);
        let b = spec.b_bound(side);
        packed_copy_rhs(
            &s[..head],
            d_head,
            spec,
            terms,
            a,
            b,
            l,
            gains.gamma(side),
            ws,
        );

        let xi = &s[head..];
        ws.residual.copy_from_slice(terms.y_v.as_slice());
        mv_acc(-1.0, c, xi, &mut ws.residual);
        d_xi.copy_from_slice(terms.phi.as_slice());
        mv_acc(1.0, a, xi, d_xi);
        mv_acc(1.0, &terms.g, theta_of(pairing.source(side)), d_xi);
        mv_acc(1.0, l, &ws.residual, d_xi);
        if spec.m > 0 {
            mv_acc(1.0, b, terms.u.as_slice(), d_xi);
        }
    }
}

/// Same derivative as [`ideal_observer_rhs`] in the packed layout of
/// [`IdealObserverState::write`].
#[allow(clippy::too_many_arguments)]
pub fn packed_ideal_rhs(
    state: &[f64],
    out: &mut [f64],
    a_true: &RealMatrix,
    b_true: &RealMatrix,
    spec: &LpvSystemSpec,
    gains: &IdealGains,
    terms: &MeasuredTerms,
    ws: &mut ObserverWorkspace,
) {
    packed_copy_rhs(
        state,
        out,
        spec,
        terms,
        a_true,
        b_true,
        &gains.l,
        &gains.gamma,
        ws,
    );
}

/// Truth-referenced error variables for one observer copy.
#[derive(Debug, Clone, PartialEq)]
pub struct SideDiagnostics {
    /// `x - ζ_o`
    pub eps: RealVector,
    /// `ε_o + Ω_o θ`
    pub delta: RealVector,
    /// `x - ξ_o`
    pub e: RealVector,
    /// `[A(ρ) - A_o]x + [B(ρ) - B_o]u`
    pub p: RealVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorDiagnostics {
    pub sides: PerSide<SideDiagnostics>,
    /// `φ(y) - φ(y_v) + [G(y) - G(y_v)]θ - L_o v`, one per copy.
    pub d_v: PerSide<RealVector>,
}

#[allow(clippy::too_many_arguments)]
pub fn compute_error_diagnostics(
    spec: &LpvSystemSpec,
    truth: &TruthModel,
    gains: &ObserverGains,
    t: f64,
    x: &RealVector,
    u: &RealVector,
    theta: &RealVector,
    noise: &RealVector,
    state: &AdaptiveObserverState,
) -> ErrorDiagnostics {
    let y = &spec.c * x;
    let y_v = &y + noise;
    let a_true = (truth.a_true)(t, x);
    let sides = PerSide::from_fn(|side| {
        let eps = x - &state.zeta[side];
        let delta = &eps + &state.omega[side] * theta;
        let e = x - &state.xi[side];
        let mut p = (&a_true - spec.a_bound(side, t, &y_v)) * x;
        if spec.m > 0 {
            p += ((truth.b_true)(t) - spec.b_bound(side)) * u;
        }
        SideDiagnostics { eps, delta, e, p }
    });
    let common =
        (spec.phi)(t, &y) - (spec.phi)(t, &y_v) + ((spec.g)(t, &y) - (spec.g)(t, &y_v)) * theta;
    let d_v = PerSide::from_fn(|side| &common - gains.l(side) * noise);
    ErrorDiagnostics { sides, d_v }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ParamBox, PiecewiseConstant};
    use nalgebra::{dmatrix, dvector};
    use std::sync::Arc;

    fn toy() -> (LpvSystemSpec, ObserverGains, TruthModel) {
        let a = dmatrix![-1.0, 0.5; 0.2, -2.0];
        let a1 = a.clone();
        let a2 = a.clone();
        let spec = LpvSystemSpec {
            n: 2,
            m: 0,
            p: 1,
            q: 1,
            c: dmatrix![1.0, 0.0],
            phi: Arc::new(|_, _| RealVector::zeros(2)),
            g: Arc::new(|_, _| dmatrix![1.0; 0.5]),
            a_lower: Arc::new(move |_, _| a1.clone()),
            a_upper: Arc::new(move |_, _| a2.clone()),
            b_lower: RealMatrix::zeros(2, 0),
            b_upper: RealMatrix::zeros(2, 0),
            theta_boxes: vec![ParamBox {
                start: 0.0,
                lower: dvector![-1.0],
                upper: dvector![1.0],
                sign_case: None,
                claimed_order: None,
            }],
            x_lower: dvector![-1.0, -1.0],
            x_upper: dvector![1.0, 1.0],
            v_max: dvector![0.0],
            y_dependent: false,
        };
        let gains = ObserverGains {
            l_lower: dmatrix![1.0; 0.0],
            l_upper: dmatrix![1.0; 0.0],
            gamma_lower: dmatrix![1.0],
            gamma_upper: dmatrix![1.0],
            ideal: Some(IdealGains {
                l: dmatrix![1.0; 0.0],
                gamma: dmatrix![1.0],
            }),
        };
        let truth = TruthModel {
            a_true: Arc::new(move |_, _| a.clone()),
            b_true: Arc::new(|_| RealMatrix::zeros(2, 0)),
            theta: PiecewiseConstant::constant(dvector![0.0]),
            x0: dvector![0.3, -0.2],
            input: Arc::new(|_, _| RealVector::zeros(0)),
        };
        (spec, gains, truth)
    }

    #[test]
    fn matched_observer_tracks_plant() {
        let (spec, gains, truth) = toy();
        let x = dvector![0.3, -0.2];
        let u = RealVector::zeros(0);
        let terms = MeasuredTerms::evaluate(&spec, 0.0, &(&spec.c * &x), &u);
        let st = AdaptiveObserverState::new(
            PerSide::new(x.clone(), x.clone()),
            PerSide::new(dvector![0.0], dvector![0.0]),
            PerSide::new(x.clone(), x.clone()),
        );
        let d = set_observer_rhs(&st, &spec, &gains, &terms);
        let dx = crate::model::plant_rhs(&spec, &truth, 0.0, &x, &u, &dvector![0.0]);
        assert!((&d.zeta.lower - &dx).amax() < 1e-15);
        assert_eq!(d.theta_hat.lower[0], 0.0);
        // Ω = 0 gives Ω̇ = -G exactly, which is elementwise negative here.
        assert_eq!(d.omega.lower, -dmatrix![1.0; 0.5]);

        let ideal = IdealObserverState::new(x.clone(), 1, dvector![0.0]);
        let di = ideal_observer_rhs(
            &ideal,
            &(truth.a_true)(0.0, &x),
            &RealMatrix::zeros(2, 0),
            &spec,
            gains.ideal.as_ref().unwrap(),
            &terms,
        );
        assert!((&di.zeta - &dx).amax() < 1e-15);
        assert_eq!(di.omega, -dmatrix![1.0; 0.5]);
    }

    #[test]
    fn degenerate_interval_collapses() {
        let (spec, gains, _) = toy();
        let terms = MeasuredTerms::evaluate(&spec, 0.0, &dvector![0.4], &RealVector::zeros(0));
        let st = AdaptiveObserverState::new(
            PerSide::new(dvector![0.1, 0.2], dvector![0.3, 0.4]),
            PerSide::new(dvector![0.5], dvector![0.5]),
            PerSide::new(dvector![1.0, 2.0], dvector![1.0, 2.0]),
        );
        for pairing in [
            Pairing {
                lower_from: Side::Lower,
                upper_from: Side::Upper,
            },
            Pairing {
                lower_from: Side::Upper,
                upper_from: Side::Lower,
            },
        ] {
            let d = state_observer_rhs(&st, &spec, &gains, &terms, pairing);
            assert_eq!(d.lower, d.upper);
        }
    }

    #[test]
    fn pack_roundtrip() {
        let st = AdaptiveObserverState {
            zeta: PerSide::new(dvector![1.0, 2.0], dvector![3.0, 4.0]),
            omega: PerSide::new(dmatrix![5.0; 6.0], dmatrix![7.0; 8.0]),
            theta_hat: PerSide::new(dvector![9.0], dvector![10.0]),
            xi: PerSide::new(dvector![11.0, 12.0], dvector![13.0, 14.0]),
        };
        let mut buf = Vec::new();
        st.write(&mut buf);
        assert_eq!(buf.len(), AdaptiveObserverState::packed_len(2, 1));
        assert_eq!(AdaptiveObserverState::read(2, 1, &buf), st);

        let ideal = IdealObserverState {
            zeta: dvector![1.0, 2.0],
            omega: dmatrix![3.0; 4.0],
            theta_hat: dvector![5.0],
        };
        let mut buf = Vec::new();
        ideal.write(&mut buf);
        assert_eq!(IdealObserverState::read(2, 1, &buf), ideal);
    }

    #[test]
    fn diagnostics_identities() {
        let (spec, gains, truth) = toy();
        let x = dvector![0.3, -0.2];
        let st = AdaptiveObserverState::new(
            PerSide::new(x.clone(), dvector![0.5, 0.1]),
            PerSide::new(dvector![0.0], dvector![0.0]),
            PerSide::new(x.clone(), x.clone()),
        );
        let theta = dvector![0.7];
        let diag = compute_error_diagnostics(
            &spec,
            &truth,
            &gains,
            0.0,
            &x,
            &RealVector::zeros(0),
            &theta,
            &dvector![0.0],
            &st,
        );
        assert_eq!(diag.sides.lower.eps, dvector![0.0, 0.0]);
        assert_eq!(diag.sides.lower.delta, dvector![0.0, 0.0]);
        let s = &diag.sides.upper;
        let direct = &x - &st.zeta.upper + &st.omega.upper * &theta;
        assert!((&s.delta - direct).amax() < 1e-12);
        assert_eq!(s.p, dvector![0.0, 0.0]);
    }

    #[test]
    fn packed_rhs_matches_structured() {
        let (spec, gains, _) = toy();
        let gains = ObserverGains {
            l_upper: dmatrix![0.5; 0.25],
            gamma_upper: dmatrix![3.0],
            ..gains
        };
        let terms = MeasuredTerms::evaluate(&spec, 0.0, &dvector![0.4], &RealVector::zeros(0));
        let st = AdaptiveObserverState {
            zeta: PerSide::new(dvector![0.1, -0.2], dvector![0.3, 0.4]),
            omega: PerSide::new(dmatrix![0.5; -0.6], dmatrix![0.7; 0.8]),
            theta_hat: PerSide::new(dvector![-0.9], dvector![1.1]),
            xi: PerSide::new(dvector![1.0, 2.0], dvector![-1.0, 0.5]),
        };
        let mut buf = Vec::new();
        st.write(&mut buf);
        let pairing = Pairing {
            lower_from: Side::Upper,
            upper_from: Side::Lower,
        };
        let mut out = vec![0.0; buf.len()];
        let mut ws = ObserverWorkspace::new(2, 1, 1);
        packed_observer_rhs(&buf, &mut out, &spec, &gains, &terms, pairing, &mut ws);
        let mut expected = set_observer_rhs(&st, &spec, &gains, &terms);
        expected.xi = state_observer_rhs(&st, &spec, &gains, &terms, pairing);
        let mut want = Vec::new();
        expected.write(&mut want);
        for (a, b) in out.iter().zip(&want) {
            assert!((a - b).abs() < 1e-14, "{a} vs {b}");
        }
    }

    #[test]
    fn packed_ideal_matches_structured() {
        let (spec, gains, truth) = toy();
        let g = gains.ideal.as_ref().unwrap();
        let terms = MeasuredTerms::evaluate(&spec, 0.0, &dvector![0.4], &RealVector::zeros(0));
        let st = IdealObserverState {
            zeta: dvector![0.1, -0.3],
            omega: dmatrix![0.2; -0.7],
            theta_hat: dvector![0.6],
        };
        let a = (truth.a_true)(0.0, &st.zeta);
        let b = RealMatrix::zeros(2, 0);
        let mut buf = Vec::new();
        st.write(&mut buf);
        let mut out = vec![0.0; buf.len()];
        packed_ideal_rhs(
            &buf,
            &mut out,
            &a,
            &b,
            &spec,
            g,
            &terms,
            &mut ObserverWorkspace::new(2, 1, 1),
        );
        let mut want = Vec::new();
        ideal_observer_rhs(&st, &a, &b, &spec, g, &terms).write(&mut want);
        for (x, y) in out.iter().zip(&want) {
            assert!((x - y).abs() < 1e-14);
        }
    }
}
