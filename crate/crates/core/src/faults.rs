//! Boolean fault indicators on the output envelope (`S`), the parameter
//! interval (`D`) and the state-interval envelope (`Z`), plus delay and
//! false-alarm bookkeeping.

use serde::{Deserialize, Serialize};

use crate::numerics::{RealMatrix, RealVector};

/// Per-channel flags and their OR.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Indicator {
    pub channels: Vec<bool>,
    pub any: bool,
}

impl Indicator {
    fn from_channels(channels: Vec<bool>) -> Self {
        let any = channels.iter().any(|c| *c);
        Indicator { channels, any }
    }
}

/// Flags channels where `value` leaves `[lower, upper]`.
pub fn outside(value: &RealVector, lower: &RealVector, upper: &RealVector) -> Indicator {
    Indicator::from_channels(
        value
            .iter()
            .zip(lower.iter().zip(upper.iter()))
            .map(|(v, (lo, hi))| !(*lo <= *v && *v <= *hi))
            .collect(),
    )
}

/// `C` split into its positive and negative parts for interval products.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitMatrix {
    pos: RealMatrix,
    neg: RealMatrix,
}

impl SplitMatrix {
    pub fn new(c: &RealMatrix) -> Self {
        SplitMatrix {
            pos: c.map(|v| v.max(0.0)),
            neg: c.map(|v| (-v).max(0.0)),
        }
    }

    /// Bounds on `C x` for `x` in the box spanned by `a` and `b`:
    /// `[C⁺lo - C⁻hi, C⁺hi - C⁻lo]`, which is `[Ca, Cb]` when `C ≥ 0` and `a ≤ b`.
    pub fn envelope(&self, a: &RealVector, b: &RealVector) -> (RealVector, RealVector) {
        let lo = a.inf(b);
        let hi = a.sup(b);
        (
            &self.pos * &lo - &self.neg * &hi,
            &self.pos * &hi - &self.neg * &lo,
        )
    }
}

/// One-off form of [`SplitMatrix::envelope`].
pub fn output_envelope(c: &RealMatrix, a: &RealVector, b: &RealVector) -> (RealVector, RealVector) {
    SplitMatrix::new(c).envelope(a, b)
}

/// `s_i = 1` when `y_i` leaves `[Cζ_m, Cζ_M]_i`.
pub fn indicator_s(y: &RealVector, y_lower: &RealVector, y_upper: &RealVector) -> Indicator {
    outside(y, y_lower, y_upper)
}

/// `d_j = 1` when `0` leaves the certified parameter interval.
pub fn indicator_d(theta_lower: &RealVector, theta_upper: &RealVector) -> Indicator {
    let zero = RealVector::zeros(theta_lower.len());
    outside(&zero, theta_lower, theta_upper)
}

/// `z_i = 1` when `y_i` leaves `[Cξ_m, Cξ_M]_i`.
pub fn indicator_z(y: &RealVector, psi_lower: &RealVector, psi_upper: &RealVector) -> Indicator {
    outside(y, psi_lower, psi_upper)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultIndicators {
    pub s: Indicator,
    /// `None` when no parameter ordering is available.
    pub d: Option<Indicator>,
    pub z: Indicator,
}

/// Raw signal `signal[k]` observed at `times[k]`, filtered so a flag only
/// counts after `samples` consecutive raised samples (`0` or `1`: raw).
pub fn debounce(signal: &[bool], samples: usize) -> Vec<bool> {
    if samples <= 1 {
        return signal.to_vec();
    }
    let mut run = 0usize;
    signal
        .iter()
        .map(|&b| {
            run = if b { run + 1 } else { 0 };
            run >= samples
        })
        .collect()
}

/// For each fault time, the first sample at or after it where `signal` is
/// raised, minus the fault time.
pub fn detection_delay(times: &[f64], signal: &[bool], fault_times: &[f64]) -> Vec<Option<f64>> {
    fault_times
        .iter()
        .map(|&tf| {
            let start = times.partition_point(|t| *t < tf);
            (start..times.len())
                .find(|&k| signal[k])
                .map(|k| times[k] - tf)
        })
        .collect()
}

/// Number of raised samples with `t` in `[from, to)`.
pub fn false_alarm_count(times: &[f64], signal: &[bool], from: f64, to: f64) -> usize {
    times
        .iter()
        .zip(signal)
        .filter(|(t, s)| **t >= from && **t < to && **s)
        .count()
}
