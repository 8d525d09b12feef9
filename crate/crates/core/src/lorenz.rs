//! Lorenz vector field, its fixed points, and destiny classification.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::fp::{FpError, MValue, MVec3, PrecisionMode};

/// Lower end of the window in which trajectories wander chaotically before
/// settling on one of the two stable fixed points.
pub const TRANSIENT_WINDOW_LOW: f64 = 13.926;
/// Above this value the strange attractor stops leaking.
pub const TRANSIENT_WINDOW_HIGH: f64 = 24.06;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LorenzError {
    #[error("invalid Lorenz parameters: {0}")]
    Domain(String),
    #[error("trajectory has no samples")]
    EmptyTrajectory,
    #[error("settling criterion must be positive (eps_settle = {eps_settle}, t_hold = {t_hold})")]
    BadSettleCriterion { eps_settle: f64, t_hold: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorenzParams {
    pub sigma: f64,
    pub r: f64,
    pub b: f64,
}

impl LorenzParams {
    pub fn new(sigma: f64, r: f64, b: f64) -> Result<Self, LorenzError> {
        let p = LorenzParams { sigma, r, b };
        p.validate()?;
        Ok(p)
    }

    /// σ = 10, b = 8/3 at the given r.
    pub fn classic(r: f64) -> Self {
        LorenzParams { sigma: 10.0, r, b: 8.0 / 3.0 }
    }

    pub fn validate(&self) -> Result<(), LorenzError> {
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(LorenzError::Domain(format!("sigma must be > 0, got {}", self.sigma)));
        }
        if !(self.b.is_finite() && self.b > 0.0) {
            return Err(LorenzError::Domain(format!("b must be > 0, got {}", self.b)));
        }
        if !(self.r.is_finite() && self.r > 1.0) {
            return Err(LorenzError::Domain(format!("r must be > 1, got {}", self.r)));
        }
        Ok(())
    }

    /// Whether r lies in the transient-chaos window. Values outside are
    /// allowed but the audit's assumptions may not hold there.
    pub fn in_transient_window(&self) -> bool {
        self.r > TRANSIENT_WINDOW_LOW && self.r < TRANSIENT_WINDOW_HIGH
    }
}

impl Default for LorenzParams {
    fn default() -> Self {
        LorenzParams::classic(20.0)
    }
}

/// A point in phase space.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct State3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl State3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        State3 { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn distance(&self, other: &State3) -> f64 {
        let (dx, dy, dz) = (self.x - other.x, self.y - other.y, self.z - other.z);
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    /// The Lorenz symmetry (x, y, z) -> (-x, -y, z).
    pub fn mirror(&self) -> State3 {
        State3 { x: -self.x, y: -self.y, z: self.z }
    }

    pub fn max_abs(&self) -> f64 {
        self.x.abs().max(self.y.abs()).max(self.z.abs())
    }

    pub fn to_mode(self, mode: PrecisionMode) -> Result<MVec3, FpError> {
        Ok(MVec3::new(mode.value(self.x)?, mode.value(self.y)?, mode.value(self.z)?))
    }

    pub fn from_mode(v: &MVec3) -> State3 {
        State3 { x: v.x.to_f64(), y: v.y.to_f64(), z: v.z.to_f64() }
    }
}

impl fmt::Display for State3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

/// Operation order used for the right-hand side.
///
/// All variants are identical in exact arithmetic; they differ only in how
/// round-off accumulates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RhsVariant {
    /// ẏ = ((r·x) − (x·z)) − y
    #[serde(rename = "ya")]
    YA,
    /// ẏ = ((r·x) − y) − (x·z)
    #[serde(rename = "yb")]
    YB,
    /// YA with σ distributed in ẋ: (σ·y) − (σ·x). For sweep experiments only.
    #[serde(rename = "yc")]
    YC,
}

impl RhsVariant {
    pub const fn as_str(self) -> &'static str {
        match self {
            RhsVariant::YA => "ya",
            RhsVariant::YB => "yb",
            RhsVariant::YC => "yc",
        }
    }
}

impl fmt::Display for RhsVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RhsVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ya" => Ok(RhsVariant::YA),
            "yb" => Ok(RhsVariant::YB),
            "yc" => Ok(RhsVariant::YC),
            _ => Err(format!("unknown variant `{s}` (expected ya, yb or yc)")),
        }
    }
}

/// The Lorenz field with its parameters already brought into one mode.
#[derive(Debug, Clone, Copy)]
pub struct LorenzField {
    mode: PrecisionMode,
    variant: RhsVariant,
    sigma: MValue,
    r: MValue,
    b: MValue,
}

impl LorenzField {
    pub fn new(p: &LorenzParams, variant: RhsVariant, mode: PrecisionMode) -> Result<Self, FpError> {
        Ok(LorenzField {
            mode,
            variant,
            sigma: mode.value(p.sigma)?,
            r: mode.value(p.r)?,
            b: mode.value(p.b)?,
        })
    }

    pub fn mode(&self) -> PrecisionMode {
        self.mode
    }

    pub fn variant(&self) -> RhsVariant {
        self.variant
    }

    #[inline]
    pub fn eval(&self, s: &MVec3) -> Result<MVec3, FpError> {
        let m = self.mode;
        let (x, y, z) = (s.x, s.y, s.z);
        let dx = match self.variant {
            RhsVariant::YC => m.sub(m.mul(self.sigma, y)?, m.mul(self.sigma, x)?)?,
            _ => m.mul(self.sigma, m.sub(y, x)?)?,
        };
        let rx = m.mul(self.r, x)?;
        let xz = m.mul(x, z)?;
        let dy = match self.variant {
            RhsVariant::YB => m.sub(m.sub(rx, y)?, xz)?,
            RhsVariant::YA | RhsVariant::YC => m.sub(m.sub(rx, xz)?, y)?,
        };
        let dz = m.sub(m.mul(x, y)?, m.mul(self.b, z)?)?;
        Ok(MVec3::new(dx, dy, dz))
    }
}

/// Evaluates (ẋ, ẏ, ż) with every operation performed in `mode`.
pub fn lorenz_rhs(
    p: &LorenzParams,
    s: &State3,
    variant: RhsVariant,
    mode: PrecisionMode,
) -> Result<State3, FpError> {
    let field = LorenzField::new(p, variant, mode)?;
    let v = field.eval(&s.to_mode(mode)?)?;
    Ok(State3::from_mode(&v))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPoints {
    pub c_plus: State3,
    pub c_minus: State3,
    pub origin: State3,
}

pub fn fixed_points(p: &LorenzParams) -> Result<FixedPoints, LorenzError> {
    if !(p.r > 1.0) {
        return Err(LorenzError::Domain(format!("fixed points C± need r > 1, got {}", p.r)));
    }
    let a = (p.b * (p.r - 1.0)).sqrt();
    let z = p.r - 1.0;
    Ok(FixedPoints {
        c_plus: State3::new(a, a, z),
        c_minus: State3::new(-a, -a, z),
        origin: State3::default(),
    })
}

/// Which stable fixed point a trajectory ends up at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Destiny {
    CPlus,
    CMinus,
    Undecided,
}

impl Destiny {
    pub fn mirrored(self) -> Destiny {
        match self {
            Destiny::CPlus => Destiny::CMinus,
            Destiny::CMinus => Destiny::CPlus,
            Destiny::Undecided => Destiny::Undecided,
        }
    }

    pub const fn as_str(self) -> &'static str {
        match self {
            Destiny::CPlus => "CPlus",
            Destiny::CMinus => "CMinus",
            Destiny::Undecided => "Undecided",
        }
    }
}

impl fmt::Display for Destiny {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Ball radius and minimum dwell time that together define "settled".
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SettleCriterion {
    pub eps_settle: f64,
    pub t_hold: f64,
}

impl Default for SettleCriterion {
    fn default() -> Self {
        SettleCriterion { eps_settle: 1.0, t_hold: 5.0 }
    }
}

impl SettleCriterion {
    pub fn validate(&self) -> Result<(), LorenzError> {
        if self.eps_settle > 0.0 && self.t_hold > 0.0 {
            Ok(())
        } else {
            Err(LorenzError::BadSettleCriterion { eps_settle: self.eps_settle, t_hold: self.t_hold })
        }
    }

    /// Which settling ball, if any, contains `s`.
    pub fn ball_of(&self, fps: &FixedPoints, s: &State3) -> Option<Destiny> {
        if s.distance(&fps.c_plus) < self.eps_settle {
            Some(Destiny::CPlus)
        } else if s.distance(&fps.c_minus) < self.eps_settle {
            Some(Destiny::CMinus)
        } else {
            None
        }
    }
}

/// Classifies sampled states. The destiny is the fixed point whose ball the
/// samples enter for good, provided they stay there for at least `t_hold`;
/// the returned time is the first sample of that final stay, or +∞ when
/// the trajectory is undecided.
pub fn classify_samples(
    times: &[f64],
    states: &[State3],
    fps: &FixedPoints,
    crit: &SettleCriterion,
) -> Result<(Destiny, f64), LorenzError> {
    crit.validate()?;
    let (Some(&t_last), Some(last)) = (times.last(), states.last()) else {
        return Err(LorenzError::EmptyTrajectory);
    };
    let Some(dest) = crit.ball_of(fps, last) else {
        return Ok((Destiny::Undecided, f64::INFINITY));
    };
    let mut entry = states.len() - 1;
    while entry > 0 && crit.ball_of(fps, &states[entry - 1]) == Some(dest) {
        entry -= 1;
    }
    let settle = times[entry];
    if t_last - settle >= crit.t_hold {
        Ok((dest, settle))
    } else {
        Ok((Destiny::Undecided, f64::INFINITY))
    }
}

pub fn classify_destiny(
    traj: &crate::integrator::Trajectory,
    fps: &FixedPoints,
    crit: &SettleCriterion,
) -> Result<(Destiny, f64), LorenzError> {
    classify_samples(&traj.times, &traj.states, fps, crit)
}
