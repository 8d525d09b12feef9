//! Fixed-step classic RK4 under a precision mode.
//!
//! The step is pinned down to the operation:
//!
//! ```text
//! k1 = f(s)
//! k2 = f(s + h2·k1)        h2 = dt/2
//! k3 = f(s + h2·k2)
//! k4 = f(s + dt·k3)
//! s' = s + h6·(((k1 + 2·k2) + 2·k3) + k4)      h6 = dt/6
//! ```
//!
//! `h2` and `h6` are computed once per integration in the active mode. Any
//! reassociation of the weighted sum is a different algorithm under P32.

use serde::{Deserialize, Serialize};

use crate::fp::{FpError, MValue, MVec3, PrecisionMode};
use crate::lorenz::{Destiny, FixedPoints, LorenzField, LorenzParams, RhsVariant, SettleCriterion, State3};

/// Hard cap on the number of steps in one integration.
pub const MAX_STEPS: f64 = 1e9;

#[derive(Debug, Clone, thiserror::Error)]
pub enum IntegrateError {
    #[error("invalid integration spec: {0}")]
    InvalidSpec(String),
    #[error("invalid initial condition: {0}")]
    InvalidInitialCondition(#[source] FpError),
    #[error("trajectory diverged at step {step}: {source}")]
    Divergence {
        step: u64,
        #[source]
        source: FpError,
        /// Everything recorded before the failure.
        partial: Box<Trajectory>,
    },
}

/// Anything RK4 can step: a vector field evaluated in one mode.
pub trait VectorField {
    fn mode(&self) -> PrecisionMode;
    fn eval(&self, s: &MVec3) -> Result<MVec3, FpError>;
}

impl VectorField for LorenzField {
    fn mode(&self) -> PrecisionMode {
        LorenzField::mode(self)
    }

    fn eval(&self, s: &MVec3) -> Result<MVec3, FpError> {
        LorenzField::eval(self, s)
    }
}

/// Step-size constants brought into the mode once per integration.
#[derive(Debug, Clone, Copy)]
pub struct StepConstants {
    pub dt: MValue,
    pub half_dt: MValue,
    pub sixth_dt: MValue,
    pub two: MValue,
}

impl StepConstants {
    pub fn new(dt: f64, mode: PrecisionMode) -> Result<Self, FpError> {
        let dt = mode.value(dt)?;
        Ok(StepConstants {
            dt,
            half_dt: mode.div(dt, mode.value(2.0)?)?,
            sixth_dt: mode.div(dt, mode.value(6.0)?)?,
            two: mode.value(2.0)?,
        })
    }
}

/// One RK4 step of an arbitrary field.
#[inline]
pub fn rk4_step_field<F: VectorField + ?Sized>(
    field: &F,
    s: &MVec3,
    c: &StepConstants,
) -> Result<MVec3, FpError> {
    let m = field.mode();
    let axpy = |h: MValue, k: &MVec3| s.zip(*k, |si, ki| m.add(si, m.mul(h, ki)?));

    let k1 = field.eval(s)?;
    let k2 = field.eval(&axpy(c.half_dt, &k1)?)?;
    let k3 = field.eval(&axpy(c.half_dt, &k2)?)?;
    let k4 = field.eval(&axpy(c.dt, &k3)?)?;

    let weighted = k1
        .zip(k2, |a, b| m.add(a, m.mul(c.two, b)?))?
        .zip(k3, |a, b| m.add(a, m.mul(c.two, b)?))?
        .zip(k4, |a, b| m.add(a, b))?;
    axpy(c.sixth_dt, &weighted)
}

/// One RK4 step of the Lorenz system from a binary64 state.
pub fn rk4_step(
    p: &LorenzParams,
    s: &State3,
    dt: f64,
    variant: RhsVariant,
    mode: PrecisionMode,
) -> Result<State3, FpError> {
    let field = LorenzField::new(p, variant, mode)?;
    let c = StepConstants::new(dt, mode)?;
    let next = rk4_step_field(&field, &s.to_mode(mode)?, &c)?;
    Ok(State3::from_mode(&next))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrationSpec {
    pub dt: f64,
    pub t_max: f64,
    /// Store every k-th step.
    pub record_stride: u64,
    /// Stop once the state has dwelt `t_hold` inside a settling ball.
    pub stop_on_settle: Option<SettleCriterion>,
}

impl Default for IntegrationSpec {
    fn default() -> Self {
        IntegrationSpec { dt: 1e-3, t_max: 60.0, record_stride: 100, stop_on_settle: None }
    }
}

impl IntegrationSpec {
    pub fn validate(&self) -> Result<(), IntegrateError> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(IntegrateError::InvalidSpec(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.t_max.is_finite() && self.t_max >= self.dt) {
            return Err(IntegrateError::InvalidSpec(format!(
                "t_max must be >= dt, got t_max = {} with dt = {}",
                self.t_max, self.dt
            )));
        }
        if self.t_max / self.dt > MAX_STEPS {
            return Err(IntegrateError::InvalidSpec(format!(
                "t_max / dt = {} exceeds the {MAX_STEPS} step limit",
                self.t_max / self.dt
            )));
        }
        if self.record_stride == 0 {
            return Err(IntegrateError::InvalidSpec("record_stride must be >= 1".into()));
        }
        if let Some(crit) = &self.stop_on_settle {
            crit.validate().map_err(|e| IntegrateError::InvalidSpec(e.to_string()))?;
        }
        Ok(())
    }

    pub fn n_steps(&self) -> u64 {
        ((self.t_max / self.dt).round() as u64).max(1)
    }
}

/// Recorded samples of one integration plus everything needed to redo it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<State3>,
    pub mode: PrecisionMode,
    pub variant: RhsVariant,
    pub params: LorenzParams,
    pub spec: IntegrationSpec,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_time(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    pub fn last_state(&self) -> Option<&State3> {
        self.states.last()
    }
}

/// Integrates the Lorenz system from `ic`.
///
/// Step 0 and the last computed step are always recorded, plus every
/// `record_stride`-th step in between. Sample times are `n·dt` computed in
/// binary64, independent of the mode.
pub fn integrate(
    p: &LorenzParams,
    ic: &State3,
    spec: &IntegrationSpec,
    variant: RhsVariant,
    mode: PrecisionMode,
    fps: &FixedPoints,
) -> Result<Trajectory, IntegrateError> {
    spec.validate()?;
    let mut traj = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
        mode,
        variant,
        params: *p,
        spec: *spec,
    };
    let setup = LorenzField::new(p, variant, mode)
        .and_then(|f| StepConstants::new(spec.dt, mode).map(|c| (f, c)));
    let (field, consts) = match setup {
        Ok(fc) => fc,
        Err(source) => {
            return Err(IntegrateError::Divergence { step: 0, source, partial: Box::new(traj) });
        }
    };
    let mut s = ic.to_mode(mode).map_err(IntegrateError::InvalidInitialCondition)?;
    let n_steps = spec.n_steps();

    let first = State3::from_mode(&s);
    traj.times.push(0.0);
    traj.states.push(first);
    // ball currently occupied and the time it was entered
    let mut dwell: Option<(Destiny, f64)> =
        spec.stop_on_settle.and_then(|crit| crit.ball_of(fps, &first)).map(|d| (d, 0.0));

    for step in 1..=n_steps {
        s = match rk4_step_field(&field, &s, &consts) {
            Ok(next) => next,
            Err(source) => {
                return Err(IntegrateError::Divergence { step, source, partial: Box::new(traj) });
            }
        };
        if step % spec.record_stride != 0 && step != n_steps {
            continue;
        }
        let t = step as f64 * spec.dt;
        let state = State3::from_mode(&s);
        traj.times.push(t);
        traj.states.push(state);

        if let Some(crit) = &spec.stop_on_settle {
            dwell = match (crit.ball_of(fps, &state), dwell) {
                (Some(d), Some((prev, since))) if d == prev => Some((d, since)),
                (Some(d), _) => Some((d, t)),
                (None, _) => None,
            };
            if matches!(dwell, Some((_, since)) if t - since >= crit.t_hold) {
                break;
            }
        }
    }
    Ok(traj)
}
