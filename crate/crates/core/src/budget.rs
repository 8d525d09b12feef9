//! Error budget: the dominant local error, its chaotic amplification
//! δ = δ₀·e^(λΔt), and the verdict against the attractor size.
//!
//! The attractor diagonal stands in for the system's sensitivity, of which it
//! is an upper bound. "Much smaller than" is operationalized as
//! `δ ≤ margin_eta · diagonal`.

use serde::{Deserialize, Serialize, Serializer};

use crate::diagnostics::{AttractorExtent, ChaoticSegment, LyapunovEstimate};
use crate::fp::{MValue, PrecisionMode};
use crate::integrator::Trajectory;
use crate::lorenz::lorenz_rhs;

/// Local truncation order of classic RK4.
pub const RK4_LOCAL_ORDER: i32 = 5;
/// Default threshold ratio for "δ much smaller than the attractor".
pub const DEFAULT_MARGIN_ETA: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dominant {
    Roundoff,
    Truncation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Pass,
    Fail,
}

/// Optional per-step accumulation of the round-off term. The default keeps a
/// single local error, which is the classic reading of the amplification law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Accumulation {
    #[default]
    None,
    /// Multiply by √N, N = steps in the chaotic segment (random-walk model).
    Sqrt,
    /// Multiply by N (worst case).
    Linear,
}

impl Accumulation {
    fn factor(self, steps: f64) -> f64 {
        let n = steps.max(1.0);
        match self {
            Accumulation::None => 1.0,
            Accumulation::Sqrt => n.sqrt(),
            Accumulation::Linear => n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorBudget {
    pub delta0_roundoff: f64,
    pub delta0_truncation: f64,
    #[serde(skip)]
    pub delta0: f64,
    pub dominant: Dominant,
    pub lambda: f64,
    pub delta_t: f64,
    #[serde(serialize_with = "finite_or_null", deserialize_with = "null_as_infinity")]
    pub delta_final: f64,
    pub attractor_diagonal: f64,
    pub margin_eta: f64,
    pub verdict: Verdict,
    /// The amplification overflowed binary64 and `delta_final` is +∞.
    #[serde(skip)]
    pub amplification_overflow: bool,
}

fn finite_or_null<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    if x.is_finite() {
        s.serialize_f64(*x)
    } else {
        s.serialize_none()
    }
}

fn null_as_infinity<'de, D: serde::Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
}

/// One rounding error at the largest magnitude the run handles.
pub fn roundoff_delta0(mode: PrecisionMode, magnitude_scale: f64) -> f64 {
    mode.unit_roundoff() * magnitude_scale
}

/// Local (one-step) truncation error `dt^order`, rounded once from a
/// double-double product so that e.g. `1e-3^5` is exactly `1e-15`.
pub fn truncation_delta0(dt: f64, local_order: i32) -> f64 {
    let mode = PrecisionMode::PDD;
    let base = MValue::from_f64(if local_order < 0 { 1.0 / dt } else { dt });
    let mut acc = MValue::from_f64(1.0);
    for _ in 0..local_order.unsigned_abs() {
        match mode.mul(acc, base) {
            Ok(v) => acc = v,
            Err(_) => return dt.powi(local_order),
        }
    }
    acc.to_f64()
}

/// `delta0 · exp(lambda · delta_t)`, with the overflow flag.
pub fn final_error_checked(delta0: f64, lambda: f64, delta_t: f64) -> (f64, bool) {
    let d = delta0 * (lambda * delta_t).exp();
    if d.is_finite() {
        (d, false)
    } else {
        (f64::INFINITY, true)
    }
}

pub fn final_error(delta0: f64, lambda: f64, delta_t: f64) -> f64 {
    final_error_checked(delta0, lambda, delta_t).0
}

/// Largest absolute coordinate or right-hand-side component over the
/// recorded samples, evaluated in binary64.
pub fn magnitude_scale(traj: &Trajectory) -> f64 {
    traj.states
        .iter()
        .map(|s| {
            let rhs = lorenz_rhs(&traj.params, s, traj.variant, PrecisionMode::P64)
                .map(|d| d.max_abs())
                .unwrap_or(f64::INFINITY);
            s.max_abs().max(rhs)
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BudgetInputs {
    pub mode: PrecisionMode,
    pub dt: f64,
    pub magnitude_scale: f64,
    pub lambda: f64,
    pub delta_t: f64,
    pub attractor_diagonal: f64,
    pub margin_eta: f64,
    pub accumulation: Accumulation,
}

impl BudgetInputs {
    pub fn evaluate(&self) -> ErrorBudget {
        let steps = (self.delta_t / self.dt).round();
        let delta0_roundoff =
            roundoff_delta0(self.mode, self.magnitude_scale) * self.accumulation.factor(steps);
        let delta0_truncation = truncation_delta0(self.dt, RK4_LOCAL_ORDER);
        let (delta0, dominant) = if delta0_roundoff >= delta0_truncation {
            (delta0_roundoff, Dominant::Roundoff)
        } else {
            (delta0_truncation, Dominant::Truncation)
        };
        let (delta_final, amplification_overflow) = final_error_checked(delta0, self.lambda, self.delta_t);
        let verdict = if delta_final <= self.margin_eta * self.attractor_diagonal {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        ErrorBudget {
            delta0_roundoff,
            delta0_truncation,
            delta0,
            dominant,
            lambda: self.lambda,
            delta_t: self.delta_t,
            delta_final,
            attractor_diagonal: self.attractor_diagonal,
            margin_eta: self.margin_eta,
            verdict,
            amplification_overflow,
        }
    }
}

pub fn assemble_budget(
    mode: PrecisionMode,
    dt: f64,
    magnitude_scale: f64,
    lyap: &LyapunovEstimate,
    segment: &ChaoticSegment,
    extent: &AttractorExtent,
    margin_eta: f64,
) -> ErrorBudget {
    BudgetInputs {
        mode,
        dt,
        magnitude_scale,
        lambda: lyap.lambda,
        delta_t: segment.delta_t,
        attractor_diagonal: extent.diagonal,
        margin_eta,
        accumulation: Accumulation::None,
    }
    .evaluate()
}
