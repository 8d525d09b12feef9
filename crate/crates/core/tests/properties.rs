mod common;

use common::*;
use proptest::prelude::*;

use transient_verify::budget::final_error;
use transient_verify::diagnostics::{attractor_extent, largest_lyapunov, ChaoticSegment, LyapunovSettings};
use transient_verify::fp::{round_p32, MValue, PrecisionMode};
use transient_verify::integrator::{integrate, IntegrationSpec};
use transient_verify::lorenz::{
    classify_samples, fixed_points, lorenz_rhs, Destiny, LorenzParams, RhsVariant, SettleCriterion, State3,
};
use transient_verify::pipeline::{run_validity_test, LyapunovConfig, PipelineConfig};

const MODES: [PrecisionMode; 3] = PrecisionMode::LADDER;

fn mode() -> impl Strategy<Value = PrecisionMode> {
    prop_oneof![Just(PrecisionMode::P32), Just(PrecisionMode::P64), Just(PrecisionMode::PDD)]
}

fn moderate() -> impl Strategy<Value = f64> {
    prop_oneof![-1e6..1e6, -1.0..1.0, -1e-6..1e-6]
}

proptest! {
    #[test]
    fn round_p32_is_idempotent_and_odd(x in -3.0e38..3.0e38f64) {
        let once = round_p32(x).unwrap();
        prop_assert_eq!(round_p32(once).unwrap().to_bits(), once.to_bits());
        prop_assert_eq!(round_p32(-x).unwrap().to_bits(), (-once).to_bits());
        prop_assert_eq!(once.to_bits(), ((x as f32) as f64).to_bits());
    }

    #[test]
    fn add_and_mul_commute(m in mode(), a in moderate(), b in moderate()) {
        let (a, b) = (m.value(a).unwrap(), m.value(b).unwrap());
        prop_assert_eq!(m.add(a, b).unwrap(), m.add(b, a).unwrap());
        prop_assert_eq!(m.mul(a, b).unwrap(), m.mul(b, a).unwrap());
    }

    #[test]
    fn negation_is_exact(m in mode(), a in moderate(), b in moderate()) {
        let (a, b) = (m.value(a).unwrap(), m.value(b).unwrap());
        prop_assert_eq!(m.add(-a, -b).unwrap(), -m.add(a, b).unwrap());
        prop_assert_eq!(m.mul(-a, b).unwrap(), -m.mul(a, b).unwrap());
    }

    #[test]
    fn p64_matches_native_arithmetic(a in moderate(), b in moderate()) {
        let m = PrecisionMode::P64;
        let (va, vb) = (MValue::from_f64(a), MValue::from_f64(b));
        prop_assert_eq!(m.add(va, vb).unwrap().to_f64(), a + b);
        prop_assert_eq!(m.mul(va, vb).unwrap().to_f64(), a * b);
        prop_assert_eq!(m.sub(va, vb).unwrap().to_f64(), a - b);
    }

    #[test]
    fn p32_matches_native_single_precision(a in -1e6f32..1e6f32, b in -1e6f32..1e6f32) {
        let m = PrecisionMode::P32;
        let (va, vb) = (m.value(a as f64).unwrap(), m.value(b as f64).unwrap());
        prop_assert_eq!(m.add(va, vb).unwrap().to_f64(), (a + b) as f64);
        prop_assert_eq!(m.mul(va, vb).unwrap().to_f64(), (a * b) as f64);
        prop_assert_eq!(m.sub(va, vb).unwrap().to_f64(), (a - b) as f64);
        if b != 0.0 {
            prop_assert_eq!(m.div(va, vb).unwrap().to_f64(), (a / b) as f64);
        }
    }

    #[test]
    fn pdd_variants_agree_to_double_double_accuracy(
        x in -30.0..30.0f64, y in -30.0..30.0f64, z in -5.0..60.0f64, r in 1.0..40.0f64,
    ) {
        let p = LorenzParams::classic(r);
        let s = State3::new(x, y, z);
        let a = lorenz_rhs(&p, &s, RhsVariant::YA, PrecisionMode::PDD).unwrap();
        let scale = 1.0 + s.max_abs() * (r + s.max_abs());
        for v in [RhsVariant::YB, RhsVariant::YC] {
            let b = lorenz_rhs(&p, &s, v, PrecisionMode::PDD).unwrap();
            prop_assert!((a.x - b.x).abs() <= 2f64.powi(-100) * scale);
            prop_assert!((a.y - b.y).abs() <= 2f64.powi(-100) * scale);
            prop_assert!((a.z - b.z).abs() <= 2f64.powi(-100) * scale);
        }
    }

    #[test]
    fn classify_is_label_equivariant(seed in any::<u64>(), settle_after in 0usize..60) {
        let p = LorenzParams::default();
        let fps = fixed_points(&p).unwrap();
        let crit = SettleCriterion::default();
        let mut r = rng(seed);
        let n = 120;
        let times: Vec<f64> = (0..n).map(|i| i as f64 * 0.1).collect();
        let target = if seed % 2 == 0 { fps.c_plus } else { fps.c_minus };
        let states: Vec<State3> = (0..n)
            .map(|i| {
                use rand::Rng;
                if i >= settle_after {
                    State3::new(target.x + r.gen_range(-0.3..0.3), target.y + r.gen_range(-0.3..0.3), target.z)
                } else {
                    State3::new(r.gen_range(-15.0..15.0), r.gen_range(-15.0..15.0), r.gen_range(5.0..35.0))
                }
            })
            .collect();
        let mirrored: Vec<State3> = states.iter().map(State3::mirror).collect();
        let (d, t) = classify_samples(&times, &states, &fps, &crit).unwrap();
        let (dm, tm) = classify_samples(&times, &mirrored, &fps, &crit).unwrap();
        prop_assert_eq!(dm, d.mirrored());
        prop_assert_eq!(tm.to_bits(), t.to_bits());
        prop_assert_ne!(d, Destiny::Undecided);
    }

    #[test]
    fn extent_is_translation_invariant(dx in -100.0..100.0f64, dy in -100.0..100.0f64, dz in -100.0..100.0f64) {
        let p = LorenzParams::default();
        let fps = fixed_points(&p).unwrap();
        let spec = IntegrationSpec { t_max: 10.0, ..IntegrationSpec::default() };
        let traj = integrate(&p, &State3::new(2.0, 1.0, 5.42857), &spec, RhsVariant::YA, PrecisionMode::P64, &fps).unwrap();
        let mut shifted = traj.clone();
        for s in &mut shifted.states {
            *s = State3::new(s.x + dx, s.y + dy, s.z + dz);
        }
        let seg = ChaoticSegment::new(0.0, 10.0);
        let a = attractor_extent(&traj, &seg, 50).unwrap();
        let b = attractor_extent(&shifted, &seg, 50).unwrap();
        for i in 0..3 {
            prop_assert!((a.per_axis_range[i] - b.per_axis_range[i]).abs() <= 1e-12 * (1.0 + 100.0));
        }
    }

    #[test]
    fn final_error_grows_with_each_argument(
        d0 in 1e-20..1.0f64, lambda in 0.0..3.0f64, dt in 0.0..100.0f64, k in 1.0..2.0f64,
    ) {
        let base = final_error(d0, lambda, dt);
        prop_assert!(final_error(d0 * k, lambda, dt) >= base);
        prop_assert!(final_error(d0, lambda * k, dt) >= base);
        prop_assert!(final_error(d0, lambda, dt * k) >= base);
    }
}

#[test]
fn round_p32_matches_hardware_conversion_on_a_million_samples() {
    assert_eq!(check_round_p32_against_native(1_000_000, 1), Ok(1_000_000));
}

#[test]
fn pdd_arithmetic_matches_rational_oracle() {
    let worst = pdd_worst_relative_error(10_000, 2).unwrap();
    assert!(worst <= 4.0 * PrecisionMode::PDD.unit_roundoff(), "worst relative error {worst:e}");
}

#[test]
fn lorenz_mirror_symmetry_is_bit_exact() {
    assert_eq!(check_mirror_symmetry(10_000, 3), Ok(10_000 * 9));
}

#[test]
fn fixed_points_are_equilibria() {
    let worst = fixed_point_worst_residual(100, 4).unwrap();
    assert!(worst < 1e-12, "residual {worst:e}");
}

#[test]
fn final_error_is_monotone_on_random_triples() {
    assert_eq!(check_final_error_monotone(10_000, 5), Ok(10_000));
}

#[test]
fn csv_round_trip_is_bit_exact() {
    assert_eq!(check_csv_round_trip(5_000, 6), Ok(5_000));
}

#[test]
fn rk4_convergence_orders() {
    let global = log_log_slope(&ORDER_DTS, &decay_global_errors());
    let local = log_log_slope(&ORDER_DTS, &decay_local_errors());
    assert!((3.8..=4.2).contains(&global), "global slope {global}");
    assert!((4.8..=5.2).contains(&local), "local slope {local}");
}

/// Each binary64 step may add about one rounding error per coordinate, so
/// the allowance grows with the step count.
#[test]
fn pdd_and_p64_agree_before_chaos_amplifies() {
    let p = LorenzParams::default();
    let fps = fixed_points(&p).unwrap();
    let spec = IntegrationSpec { t_max: 1.0, record_stride: 10, ..IntegrationSpec::default() };
    let mut r = rng(7);
    let u = PrecisionMode::P64.unit_roundoff();
    for _ in 0..50 {
        let ic = {
            use rand::Rng;
            State3::new(r.gen_range(-10.0..10.0), r.gen_range(-10.0..10.0), r.gen_range(0.0..30.0))
        };
        let dd = integrate(&p, &ic, &spec, RhsVariant::YA, PrecisionMode::PDD, &fps).unwrap();
        let d64 = integrate(&p, &ic, &spec, RhsVariant::YA, PrecisionMode::P64, &fps).unwrap();
        let magnitude = dd.states.iter().map(State3::max_abs).fold(0.0, f64::max);
        for ((a, b), t) in dd.states.iter().zip(&d64.states).zip(&dd.times) {
            let steps = (t / spec.dt).round().max(1.0);
            let gap = a.distance(b);
            assert!(gap <= 10.0 * u * magnitude * steps, "gap {gap:e} at t = {t} from {ic}");
        }
    }
}

#[test]
fn mirrored_trajectories_mirror_bitwise() {
    let p = LorenzParams::default();
    let fps = fixed_points(&p).unwrap();
    let spec = IntegrationSpec { t_max: 5.0, ..IntegrationSpec::default() };
    let ic = State3::new(2.0, 1.0, 5.42857);
    for m in MODES {
        let a = integrate(&p, &ic, &spec, RhsVariant::YB, m, &fps).unwrap();
        let b = integrate(&p, &ic.mirror(), &spec, RhsVariant::YB, m, &fps).unwrap();
        for (sa, sb) in a.states.iter().zip(&b.states) {
            assert_eq!(bits(&sa.mirror()), bits(sb));
        }
    }
}

#[test]
fn lyapunov_estimate_does_not_depend_on_the_perturbation_direction() {
    let p = LorenzParams::default();
    let ic = State3::new(2.0, 1.0, 5.42857);
    let seg = ChaoticSegment::new(0.0, 30.0);
    let estimates: Vec<f64> = (0..4)
        .map(|seed| {
            let s = LyapunovSettings { seed, ..LyapunovSettings::default() };
            largest_lyapunov(&p, &ic, &seg, 1e-3, &s, RhsVariant::YA).unwrap().lambda
        })
        .collect();
    let spread = estimates.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - estimates.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(spread < 0.05, "{estimates:?}");
}

#[test]
fn validity_test_is_deterministic() {
    let cfg = PipelineConfig {
        ladder: vec![PrecisionMode::P32],
        lyapunov: LyapunovConfig { ensemble_size: 3, ..LyapunovConfig::default() },
        ..PipelineConfig::default()
    };
    let a = serde_json::to_string(&run_validity_test(&cfg).unwrap()).unwrap();
    let b = serde_json::to_string(&run_validity_test(&cfg).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn escalation_lowers_the_initial_error() {
    let report = run_validity_test(&PipelineConfig {
        lyapunov: LyapunovConfig { ensemble_size: 3, ..LyapunovConfig::default() },
        ladder: PrecisionMode::LADDER.to_vec(),
        ..PipelineConfig::default()
    })
    .unwrap();
    let d0: Vec<f64> = report.per_rung.iter().map(|r| r.budget.delta0_roundoff.max(r.budget.delta0_truncation)).collect();
    assert!(d0.windows(2).all(|w| w[1] <= w[0]), "{d0:?}");
}
