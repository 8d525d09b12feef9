//! Arithmetic with per-operation control over rounding.
//!
//! The same formula can be evaluated under three precision rungs:
//!
//! * [`PrecisionMode::P32`]: IEEE-754 binary32 emulated on top of binary64.
//!   Every elementary operation is computed in binary64 and then rounded to
//!   the nearest binary32 value with [`round_p32`]. No extended intermediate
//!   accumulation ever happens.
//! * [`PrecisionMode::P64`]: native binary64.
//! * [`PrecisionMode::PDD`]: double-double (about 31 decimal digits).
//!
//! Overflow and NaN are reported as [`FpError`] instead of being propagated
//! as special values, so that nothing downstream ever classifies a poisoned
//! trajectory.

mod dd;

use std::fmt;
use std::ops::Neg;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum FpError {
    #[error("result overflows the {0} range")]
    Overflow(PrecisionMode),
    #[error("operation produced NaN in {0}")]
    NaN(PrecisionMode),
}

/// Floating-point semantics used for every elementary operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PrecisionMode {
    #[serde(rename = "p32")]
    P32,
    #[serde(rename = "p64")]
    P64,
    #[serde(rename = "pdd")]
    PDD,
}

impl PrecisionMode {
    pub const LADDER: [PrecisionMode; 3] = [PrecisionMode::P32, PrecisionMode::P64, PrecisionMode::PDD];

    /// Relative error bound of one correctly rounded operation.
    pub const fn unit_roundoff(self) -> f64 {
        match self {
            PrecisionMode::P32 => 5.960_464_477_539_063e-8,   // 2^-24
            PrecisionMode::P64 => 1.110_223_024_625_156_5e-16, // 2^-53
            PrecisionMode::PDD => 4.930_380_657_631_324e-32,   // 2^-104
        }
    }

    pub const fn decimal_digits(self) -> u32 {
        match self {
            PrecisionMode::P32 => 7,
            PrecisionMode::P64 => 15,
            PrecisionMode::PDD => 31,
        }
    }

    pub const fn as_str(self) -> &'static str {
        match self {
            PrecisionMode::P32 => "p32",
            PrecisionMode::P64 => "p64",
            PrecisionMode::PDD => "pdd",
        }
    }

    /// Brings a binary64 constant into this mode.
    pub fn value(self, x: f64) -> Result<MValue, FpError> {
        match self {
            PrecisionMode::P32 => round_p32(x).map(MValue::from_f64),
            PrecisionMode::P64 | PrecisionMode::PDD => check64(self, x).map(MValue::from_f64),
        }
    }

    #[inline]
    pub fn add(self, a: MValue, b: MValue) -> Result<MValue, FpError> {
        match self {
            PrecisionMode::P32 => round_p32(a.hi + b.hi).map(MValue::from_f64),
            PrecisionMode::P64 => check64(self, a.hi + b.hi).map(MValue::from_f64),
            PrecisionMode::PDD => checkdd(dd::add(a.pair(), b.pair())),
        }
    }

    #[inline]
    pub fn sub(self, a: MValue, b: MValue) -> Result<MValue, FpError> {
        match self {
            PrecisionMode::P32 => round_p32(a.hi - b.hi).map(MValue::from_f64),
            PrecisionMode::P64 => check64(self, a.hi - b.hi).map(MValue::from_f64),
            PrecisionMode::PDD => checkdd(dd::sub(a.pair(), b.pair())),
        }
    }

    #[inline]
    pub fn mul(self, a: MValue, b: MValue) -> Result<MValue, FpError> {
        match self {
            PrecisionMode::P32 => round_p32(a.hi * b.hi).map(MValue::from_f64),
            PrecisionMode::P64 => check64(self, a.hi * b.hi).map(MValue::from_f64),
            PrecisionMode::PDD => checkdd(dd::mul(a.pair(), b.pair())),
        }
    }

    #[inline]
    pub fn div(self, a: MValue, b: MValue) -> Result<MValue, FpError> {
        match self {
            PrecisionMode::P32 => round_p32(a.hi / b.hi).map(MValue::from_f64),
            PrecisionMode::P64 => check64(self, a.hi / b.hi).map(MValue::from_f64),
            PrecisionMode::PDD => checkdd(dd::div(a.pair(), b.pair())),
        }
    }
}

impl fmt::Display for PrecisionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown precision mode `{0}` (expected p32, p64 or pdd)")]
pub struct ParseModeError(String);

impl FromStr for PrecisionMode {
    type Err = ParseModeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "p32" => Ok(PrecisionMode::P32),
            "p64" => Ok(PrecisionMode::P64),
            "pdd" => Ok(PrecisionMode::PDD),
            _ => Err(ParseModeError(s.to_string())),
        }
    }
}

/// A number held in some [`PrecisionMode`].
///
/// For P32 and P64 `lo` is always zero. For PDD the value is the unevaluated
/// sum `hi + lo` with `|lo| <= ulp(hi) / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MValue {
    pub hi: f64,
    pub lo: f64,
}

impl MValue {
    pub const ZERO: MValue = MValue { hi: 0.0, lo: 0.0 };

    #[inline]
    pub const fn from_f64(x: f64) -> Self {
        MValue { hi: x, lo: 0.0 }
    }

    /// Nearest binary64 value.
    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    #[inline]
    fn pair(self) -> (f64, f64) {
        (self.hi, self.lo)
    }
}

impl Neg for MValue {
    type Output = MValue;

    #[inline]
    fn neg(self) -> MValue {
        MValue { hi: -self.hi, lo: -self.lo }
    }
}

impl From<f64> for MValue {
    fn from(x: f64) -> Self {
        MValue::from_f64(x)
    }
}

#[inline]
fn check64(mode: PrecisionMode, x: f64) -> Result<f64, FpError> {
    if x.is_finite() {
        Ok(x)
    } else if x.is_nan() {
        Err(FpError::NaN(mode))
    } else {
        Err(FpError::Overflow(mode))
    }
}

#[inline]
fn checkdd((hi, lo): (f64, f64)) -> Result<MValue, FpError> {
    if hi.is_infinite() {
        Err(FpError::Overflow(PrecisionMode::PDD))
    } else if hi.is_nan() {
        Err(FpError::NaN(PrecisionMode::PDD))
    } else if !lo.is_finite() {
        // the error term of a finite result only blows up in an intermediate overflow
        Err(FpError::Overflow(PrecisionMode::PDD))
    } else {
        Ok(MValue { hi, lo })
    }
}

#[inline]
const fn pow2(exp: i32) -> f64 {
    f64::from_bits(((exp + 1023) as u64) << 52)
}

/// Rounds a binary64 value to the nearest binary32 value (ties to even) and
/// widens it back to binary64.
///
/// The rounding is done by scaling to the binary32 quantum at the value's
/// binade, so it is independent of the platform's own `f64 -> f32`
/// conversion. Subnormal results are kept. A result that would round to
/// infinity is an [`FpError::Overflow`].
#[inline]
pub fn round_p32(x: f64) -> Result<f64, FpError> {
    if x.is_nan() {
        return Err(FpError::NaN(PrecisionMode::P32));
    }
    if x.is_infinite() {
        return Err(FpError::Overflow(PrecisionMode::P32));
    }
    let biased = ((x.to_bits() >> 52) & 0x7ff) as i32;
    // binary32 has 24 significand bits and its smallest normal binade is 2^-126
    let binade = (biased - 1023).max(-126);
    let quantum = binade - 23;
    let rounded = (x * pow2(-quantum)).round_ties_even() * pow2(quantum);
    if rounded.abs() > f32::MAX as f64 {
        return Err(FpError::Overflow(PrecisionMode::P32));
    }
    Ok(rounded)
}

pub fn unit_roundoff(mode: PrecisionMode) -> f64 {
    mode.unit_roundoff()
}

pub fn m_add(mode: PrecisionMode, a: MValue, b: MValue) -> Result<MValue, FpError> {
    mode.add(a, b)
}

pub fn m_sub(mode: PrecisionMode, a: MValue, b: MValue) -> Result<MValue, FpError> {
    mode.sub(a, b)
}

pub fn m_mul(mode: PrecisionMode, a: MValue, b: MValue) -> Result<MValue, FpError> {
    mode.mul(a, b)
}

pub fn m_div(mode: PrecisionMode, a: MValue, b: MValue) -> Result<MValue, FpError> {
    mode.div(a, b)
}

/// Three mode values, one per phase-space coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MVec3 {
    pub x: MValue,
    pub y: MValue,
    pub z: MValue,
}

impl MVec3 {
    pub fn new(x: MValue, y: MValue, z: MValue) -> Self {
        MVec3 { x, y, z }
    }

    #[inline]
    pub fn map(self, mut f: impl FnMut(MValue) -> Result<MValue, FpError>) -> Result<MVec3, FpError> {
        Ok(MVec3 { x: f(self.x)?, y: f(self.y)?, z: f(self.z)? })
    }

    #[inline]
    pub fn zip(
        self,
        other: MVec3,
        mut f: impl FnMut(MValue, MValue) -> Result<MValue, FpError>,
    ) -> Result<MVec3, FpError> {
        Ok(MVec3 { x: f(self.x, other.x)?, y: f(self.y, other.y)?, z: f(self.z, other.z)? })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use PrecisionMode::*;

    fn v(x: f64) -> MValue {
        MValue::from_f64(x)
    }

    #[test]
    fn ladder_roundoff_strictly_decreases() {
        let u: Vec<f64> = PrecisionMode::LADDER.iter().map(|m| m.unit_roundoff()).collect();
        assert!(u[0] > u[1] && u[1] > u[2]);
        assert_eq!(u[0], 2f64.powi(-24));
        assert_eq!(u[1], 2f64.powi(-53));
        assert_eq!(u[2], 2f64.powi(-104));
        for m in PrecisionMode::LADDER {
            let ratio = 10f64.powi(-(m.decimal_digits() as i32)) / m.unit_roundoff();
            assert!((0.1..=10.0).contains(&ratio), "{m}: {ratio}");
        }
    }

    #[test]
    fn unit_roundoff_values() {
        assert_eq!(unit_roundoff(P32), 5.960464477539063e-8);
        assert_eq!(unit_roundoff(P64), 1.1102230246251565e-16);
        assert!((unit_roundoff(PDD) - 4.93e-32).abs() < 1e-34);
    }

    #[test]
    fn round_p32_examples() {
        assert_eq!(round_p32(0.0).unwrap(), 0.0);
        let r = round_p32(2.4000000000000004).unwrap();
        assert_eq!((r as f32).to_bits(), 0x4019_999A);
        assert_eq!(r, 2.4000000953674316);
        assert_eq!(round_p32(1e39), Err(FpError::Overflow(P32)));
        assert_eq!(round_p32(f64::NAN), Err(FpError::NaN(P32)));
        assert_eq!(round_p32(-1e39), Err(FpError::Overflow(P32)));
    }

    #[test]
    fn round_p32_edges() {
        // ties to even at 1 + 2^-24 (exactly between 1 and 1 + 2^-23)
        assert_eq!(round_p32(1.0 + 2f64.powi(-24)).unwrap(), 1.0);
        assert_eq!(round_p32(1.0 + 3.0 * 2f64.powi(-24)).unwrap(), 1.0 + 2f64.powi(-22));
        // largest finite survives, the next binade does not
        assert_eq!(round_p32(f32::MAX as f64).unwrap(), f32::MAX as f64);
        assert!(round_p32(2f64.powi(128)).is_err());
        // subnormals are kept, not flushed
        let tiny = f32::from_bits(1) as f64;
        assert_eq!(round_p32(tiny).unwrap(), tiny);
        assert_eq!(round_p32(tiny * 0.75).unwrap(), tiny);
        assert_eq!(round_p32(tiny * 0.5).unwrap(), 0.0);
        assert!(round_p32(-1e-300).unwrap().is_sign_negative());
    }

    #[test]
    fn add_examples() {
        assert_eq!(m_add(P64, v(1.1), v(1.3)).unwrap().to_f64(), 2.4000000000000004);
        assert_eq!(m_add(P32, v(1.0), v(0.0)).unwrap(), v(1.0));
    }

    #[test]
    fn p32_addition_is_not_associative() {
        let big = P32.value(1e8).unwrap();
        let one = v(1.0);
        let left = m_add(P32, m_add(P32, big, -big).unwrap(), one).unwrap();
        let right = m_add(P32, big, m_add(P32, -big, one).unwrap()).unwrap();
        // the binary32 oracle, with native single precision
        let nb = 1e8f32;
        let native_left = (nb + (-nb)) + 1.0f32;
        let native_right = nb + ((-nb) + 1.0f32);
        assert_eq!(left.to_f64(), native_left as f64);
        assert_eq!(right.to_f64(), native_right as f64);
        assert_ne!(left, right);
    }

    #[test]
    fn overflow_is_an_error_in_every_mode() {
        let big = v(3e38);
        assert_eq!(m_mul(P32, big, v(10.0)), Err(FpError::Overflow(P32)));
        assert_eq!(m_mul(P64, v(1e300), v(1e300)), Err(FpError::Overflow(P64)));
        assert_eq!(m_mul(PDD, v(1e300), v(1e300)), Err(FpError::Overflow(PDD)));
        assert_eq!(m_div(P64, v(0.0), v(0.0)), Err(FpError::NaN(P64)));
    }

    #[test]
    fn pdd_keeps_the_low_part() {
        let third = m_div(PDD, v(1.0), v(3.0)).unwrap();
        assert!(third.lo != 0.0);
        let one = m_mul(PDD, third, v(3.0)).unwrap();
        assert!((one.to_f64() - 1.0).abs() < 1e-30);
        assert!(one.lo.abs() <= f64::EPSILON * one.hi.abs() / 2.0);
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("P64".parse::<PrecisionMode>().unwrap(), P64);
        assert!("f32".parse::<PrecisionMode>().is_err());
        assert_eq!(serde_json::to_string(&PDD).unwrap(), "\"pdd\"");
    }
}
