//! Fixed-step integration, seeded bounded noise and the small dense linear
//! algebra helpers used throughout the crate.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type RealMatrix = DMatrix<f64>;
pub type RealVector = DVector<f64>;

/// States whose Euclidean norm exceeds this value are treated as divergent.
pub const DIVERGENCE_NORM: f64 = 1e9;

/// A sampled solution of an ODE on a uniform grid.
///
/// All samples are spaced by the configured step, except that the final
/// interval may be shorter so the trace lands exactly on the end time.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<RealVector>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<(f64, &RealVector)> {
        self.times.last().copied().zip(self.states.last())
    }
}

/// Number of steps of size `h` needed to cover `span`, tolerating
/// floating-point noise when `span` is an integer multiple of `h`.
pub fn step_count(span: f64, h: f64) -> usize {
    if span <= 0.0 {
        return 0;
    }
    let ratio = span / h;
    let nearest = ratio.round();
    if (ratio - nearest).abs() <= 1e-9 * ratio.max(1.0) {
        nearest as usize
    } else {
        ratio.ceil() as usize
    }
}

/// One classical Runge–Kutta step.
pub fn rk4_step<F>(rhs: &mut F, t: f64, x: &RealVector, h: f64) -> RealVector
where
    F: FnMut(f64, &RealVector) -> RealVector,
{
    let half = 0.5 * h;
    let k1 = rhs(t, x);
    let k2 = rhs(t + half, &(x + &k1 * half));
    let k3 = rhs(t + half, &(x + &k2 * half));
    let k4 = rhs(t + h, &(x + &k3 * h));
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

/// Returns an error if `x` is non-finite or beyond the divergence guard.
pub fn check_finite(t: f64, x: &RealVector) -> Result<()> {
    if x.iter().any(|v| !v.is_finite()) || x.norm() > DIVERGENCE_NORM {
        return Err(Error::Divergence { time: t });
    }
    Ok(())
}

/// Integrates `rhs` from `t0` to `t1` with classical RK4 and fixed step `h`.
pub fn integrate_fixed_step<F>(
    mut rhs: F,
    state0: &RealVector,
    t0: f64,
    t1: f64,
    h: f64,
) -> Result<Trajectory>
where
    F: FnMut(f64, &RealVector) -> RealVector,
{
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "step must be positive, got {h}"
        )));
    }
    if t1.partial_cmp(&t0) != Some(std::cmp::Ordering::Greater) {
        return Err(Error::InvalidArgument(format!(
            "end time {t1} must exceed start time {t0}"
        )));
    }
    check_finite(t0, state0)?;

    let steps = step_count(t1 - t0, h);
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    times.push(t0);
    states.push(state0.clone());

    let mut x = state0.clone();
    for k in 0..steps {
        let t = t0 + k as f64 * h;
        let t_next = if k + 1 == steps {
            t1
        } else {
            t0 + (k + 1) as f64 * h
        };
        x = rk4_step(&mut rhs, t, &x, t_next - t);
        check_finite(t_next, &x)?;
        times.push(t_next);
        states.push(x.clone());
    }
    Ok(Trajectory { times, states })
}

fn mix_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 finalizer over the pair
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform noise on `[-amplitude_i, amplitude_i]` per component, fully
/// determined by `(seed, t_index)`.
pub fn bounded_noise(seed: u64, amplitude: &RealVector, t_index: u64) -> RealVector {
    if amplitude.iter().all(|a| *a == 0.0) {
        return RealVector::zeros(amplitude.len());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, t_index));
    amplitude.map(|a| if a > 0.0 { rng.gen_range(-a..=a) } else { 0.0 })
}

/// Real parts of all eigenvalues of a square matrix.
pub fn eig_real_parts(m: &RealMatrix) -> Result<Vec<f64>> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "eigenvalues need a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("matrix has non-finite entries".into()));
    }
    if m.is_empty() {
        return Ok(Vec::new());
    }
    let schur = nalgebra::linalg::Schur::try_new(m.clone(), 1e-14, 10_000)
        .ok_or_else(|| Error::Numeric("Schur iteration did not converge".into()))?;
    Ok(schur.complex_eigenvalues().iter().map(|z| z.re).collect())
}

/// Smallest eigenvalue of a symmetric matrix (symmetrized before solving).
pub fn min_symmetric_eigenvalue(m: &RealMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigenvalues().min()
}

/// True when `m` is symmetric to `tol` and all its eigenvalues exceed `tol`.
pub fn is_symmetric_positive_definite(m: &RealMatrix, tol: f64) -> bool {
    m.is_square()
        && (m - m.transpose()).amax() <= tol.max(1e-12) * m.amax().max(1.0)
        && min_symmetric_eigenvalue(m) > tol
}

/// Solves `a x = b`, failing on (numerically) singular systems.
pub fn solve(a: &RealMatrix, b: &RealVector) -> Result<RealVector> {
    if a.nrows() != b.len() || !a.is_square() {
        return Err(Error::Dimension(format!(
            "cannot solve {}x{} system with rhs of length {}",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    let lu = a.clone().lu();
    let x = lu
        .solve(b)
        .ok_or_else(|| Error::Numeric("singular linear system".into()))?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("singular linear system".into()));
    }
    Ok(x)
}
