//! Independent oracles and bulk invariant checks shared by the property and
//! acceptance suites. Each check returns the measured quantity or a
//! description of the first counterexample.

#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use transient_verify::budget::final_error;
use transient_verify::fp::{round_p32, FpError, MValue, MVec3, PrecisionMode};
use transient_verify::integrator::{rk4_step_field, StepConstants, VectorField};
use transient_verify::io::{read_trajectory_csv, trajectory_csv_string};
use transient_verify::lorenz::{fixed_points, lorenz_rhs, LorenzParams, RhsVariant, State3};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A double with random sign, random mantissa bits and an exponent spread
/// over `[lo_exp, hi_exp]`.
pub fn random_double(rng: &mut ChaCha8Rng, lo_exp: i32, hi_exp: i32) -> f64 {
    let mantissa: u64 = rng.gen::<u64>() & ((1u64 << 52) - 1);
    let exp = rng.gen_range(lo_exp..=hi_exp);
    let sign = if rng.gen::<bool>() { 1u64 << 63 } else { 0 };
    if exp < -1022 {
        // subnormal range: scale a normal number down
        let normal = f64::from_bits((1023u64 << 52) | mantissa);
        let v = normal * 2f64.powi(exp);
        return if sign != 0 { -v } else { v };
    }
    f64::from_bits(sign | (((exp + 1023) as u64) << 52) | mantissa)
}

/// binary32 rounding against the hardware conversion. Returns the number of
/// samples checked.
pub fn check_round_p32_against_native(n: usize, seed: u64) -> Result<usize, String> {
    let mut r = rng(seed);
    for i in 0..n {
        let x = match i % 8 {
            // exact binary32 midpoints exercise ties-to-even
            0 => {
                let f = f32::from_bits(r.gen::<u32>() & 0x7f7f_ffff);
                let next = f32::from_bits(f.to_bits() + 1);
                (f as f64 + next as f64) / 2.0
            }
            1 => random_double(&mut r, -160, -120),
            2 => random_double(&mut r, 120, 130),
            _ => random_double(&mut r, -40, 40),
        };
        let native = x as f32;
        let ours = round_p32(x);
        let ok = match ours {
            Ok(v) => native.is_finite() && v.to_bits() == (native as f64).to_bits(),
            Err(FpError::Overflow(_)) => native.is_infinite(),
            Err(FpError::NaN(_)) => false,
        };
        if !ok {
            return Err(format!("round_p32({x:e}) = {ours:?}, native gives {native:e}"));
        }
    }
    Ok(n)
}

/// Exact rational value of a double.
pub fn rational(x: f64) -> BigRational {
    BigRational::from_f64(x).expect("finite")
}

pub fn rational_of(v: MValue) -> BigRational {
    rational(v.hi) + rational(v.lo)
}

/// Worst relative error of PDD add, sub, mul and div over `n` random
/// operand pairs, measured against exact rational arithmetic.
pub fn pdd_worst_relative_error(n: usize, seed: u64) -> Result<f64, String> {
    let mode = PrecisionMode::PDD;
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let a = MValue { hi: random_double(&mut r, -30, 30), lo: 0.0 };
        let b = MValue { hi: random_double(&mut r, -30, 30), lo: 0.0 };
        let a = mode.add(a, MValue::from_f64(a.hi * random_double(&mut r, -60, -54))).map_err(|e| e.to_string())?;
        let (ra, rb) = (rational_of(a), rational_of(b));
        let checks = [
            (mode.add(a, b), &ra + &rb),
            (mode.sub(a, b), &ra - &rb),
            (mode.mul(a, b), &ra * &rb),
            (mode.div(a, b), &ra / &rb),
        ];
        for (got, exact) in checks {
            let got = got.map_err(|e| e.to_string())?;
            // a sum that cancels to far below its operands is judged against them
            let scale = if exact.is_zero() { ra.abs().max(rb.abs()) } else { exact.clone() };
            let err = ((rational_of(got) - &exact) / scale).abs().to_f64().unwrap_or(f64::INFINITY);
            worst = worst.max(err);
        }
    }
    Ok(worst)
}

pub fn bits(s: &State3) -> [u64; 3] {
    [s.x.to_bits(), s.y.to_bits(), s.z.to_bits()]
}

/// `f(-x, -y, z) = (-fx, -fy, fz)` bit for bit, in every mode and variant.
pub fn check_mirror_symmetry(n: usize, seed: u64) -> Result<usize, String> {
    let mut r = rng(seed);
    let mut checked = 0;
    for _ in 0..n {
        let p = LorenzParams::new(r.gen_range(1.0..20.0), r.gen_range(1.0..40.0), r.gen_range(0.5..5.0)).unwrap();
        let s = State3::new(r.gen_range(-30.0..30.0), r.gen_range(-30.0..30.0), r.gen_range(-5.0..60.0));
        for mode in PrecisionMode::LADDER {
            for variant in [RhsVariant::YA, RhsVariant::YB, RhsVariant::YC] {
                let direct = lorenz_rhs(&p, &s, variant, mode).map_err(|e| e.to_string())?;
                let mirrored = lorenz_rhs(&p, &s.mirror(), variant, mode).map_err(|e| e.to_string())?;
                if bits(&mirrored) != bits(&direct.mirror()) {
                    return Err(format!("{mode}/{variant} at {s}: {mirrored} vs mirror of {direct}"));
                }
                checked += 1;
            }
        }
    }
    Ok(checked)
}

/// Worst absolute right-hand-side residual at the three fixed points over
/// `n` parameter sets with r > 1.
pub fn fixed_point_worst_residual(n: usize, seed: u64) -> Result<f64, String> {
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let p = LorenzParams::new(r.gen_range(1.0..20.0), r.gen_range(1.05..40.0), r.gen_range(0.5..5.0)).unwrap();
        let fps = fixed_points(&p).map_err(|e| e.to_string())?;
        for fp in [fps.c_plus, fps.c_minus, fps.origin] {
            let f = lorenz_rhs(&p, &fp, RhsVariant::YA, PrecisionMode::P64).map_err(|e| e.to_string())?;
            worst = worst.max(f.max_abs());
        }
    }
    Ok(worst)
}

/// `final_error` must not decrease when any one argument grows (with the
/// others nonnegative). Returns the number of triples checked.
pub fn check_final_error_monotone(n: usize, seed: u64) -> Result<usize, String> {
    let mut r = rng(seed);
    for _ in 0..n {
        let d0 = 10f64.powf(r.gen_range(-20.0..0.0));
        let lambda = r.gen_range(0.0..3.0);
        let dt = r.gen_range(0.0..100.0);
        let base = final_error(d0, lambda, dt);
        let grow = 1.0 + r.gen_range(1e-12..1.0);
        for (name, bumped) in [
            ("delta0", final_error(d0 * grow, lambda, dt)),
            ("lambda", final_error(d0, lambda * grow + 1e-12, dt)),
            ("delta_t", final_error(d0, lambda, dt * grow + 1e-12)),
        ] {
            if bumped < base {
                return Err(format!("growing {name} decreased final_error at ({d0:e}, {lambda}, {dt})"));
            }
        }
    }
    Ok(n)
}

/// Trajectory CSV write then read reproduces every value bit for bit.
pub fn check_csv_round_trip(rows: usize, seed: u64) -> Result<usize, String> {
    let mut r = rng(seed);
    let times: Vec<f64> = (0..rows).map(|_| random_double(&mut r, -30, 10).abs()).collect();
    let states: Vec<State3> = (0..rows)
        .map(|i| {
            let (lo, hi) = if i % 10 == 0 { (-1074, 1023) } else { (-20, 20) };
            State3::new(random_double(&mut r, lo, hi), random_double(&mut r, lo, hi), random_double(&mut r, lo, hi))
        })
        .collect();
    let text = trajectory_csv_string(&times, &states);
    let back = read_trajectory_csv(text.as_bytes()).map_err(|e| e.to_string())?;
    if back.len() != rows {
        return Err(format!("read {} rows, wrote {rows}", back.len()));
    }
    for i in 0..rows {
        if back.times[i].to_bits() != times[i].to_bits() || bits(&back.states[i]) != bits(&states[i]) {
            return Err(format!("row {i} changed: {} {} vs {} {}", times[i], states[i], back.times[i], back.states[i]));
        }
    }
    Ok(rows)
}

/// ẏ = −y on each component.
pub struct Decay(pub PrecisionMode);

impl VectorField for Decay {
    fn mode(&self) -> PrecisionMode {
        self.0
    }

    fn eval(&self, s: &MVec3) -> Result<MVec3, FpError> {
        s.map(|v| Ok(-v))
    }
}

fn decay_steps(dt: f64, steps: usize) -> f64 {
    let field = Decay(PrecisionMode::P64);
    let c = StepConstants::new(dt, PrecisionMode::P64).unwrap();
    let one = MValue::from_f64(1.0);
    let mut s = MVec3::new(one, one, one);
    for _ in 0..steps {
        s = rk4_step_field(&field, &s, &c).unwrap();
    }
    s.x.to_f64()
}

/// Least-squares slope of log(y) against log(x).
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = xs.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let cov: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    cov / var
}

pub const ORDER_DTS: [f64; 4] = [1e-1, 5e-2, 2.5e-2, 1.25e-2];

/// Global error at t = 1 on ẏ = −y, for each step in [`ORDER_DTS`].
pub fn decay_global_errors() -> Vec<f64> {
    ORDER_DTS.iter().map(|&dt| (decay_steps(dt, (1.0 / dt).round() as usize) - (-1.0f64).exp()).abs()).collect()
}

/// One-step error on ẏ = −y, for each step in [`ORDER_DTS`].
pub fn decay_local_errors() -> Vec<f64> {
    ORDER_DTS.iter().map(|&dt| (decay_steps(dt, 1) - (-dt).exp()).abs()).collect()
}

/// True iff `x` is the double nearest to `exact` (within half an ulp).
pub fn is_nearest_double(x: f64, exact: &BigRational) -> bool {
    let gap = (rational(x) - exact).abs();
    let up = rational(x.next_up()) - rational(x);
    let down = rational(x) - rational(x.next_down());
    let half_ulp = up.min(down) / BigRational::from_integer(BigInt::from(2));
    gap <= half_ulp
}
