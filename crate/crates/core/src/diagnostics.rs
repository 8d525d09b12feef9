//! The three measurements the validity test consumes: how long a trajectory
//! wanders chaotically, the largest Lyapunov exponent during that wandering,
//! and the spatial extent of the strange set it wanders on.
//!
//! Lyapunov estimates always run in binary64 whatever precision is being
//! audited.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fp::{FpError, PrecisionMode};
use crate::integrator::{integrate, rk4_step_field, IntegrateError, IntegrationSpec, StepConstants, Trajectory, VectorField};
use crate::lorenz::{
    classify_destiny, Destiny, FixedPoints, LorenzError, LorenzField, LorenzParams, RhsVariant, SettleCriterion, State3,
};

/// Samples required inside a segment before its extent is trusted.
pub const MIN_EXTENT_SAMPLES: usize = 50;
/// Fewer renormalizations than this make an estimate meaningless.
pub const MIN_RENORMS: usize = 10;
/// Renormalizations past this fraction of the segment are discarded, so the
/// contracting approach to the fixed point does not bias the estimate.
pub const SETTLING_CUTOFF: f64 = 0.9;

#[derive(Debug, Clone, thiserror::Error)]
pub enum DiagnosticError {
    #[error("trajectory never settled and unsettled segments were not allowed")]
    Unsettled,
    #[error("chaotic segment of {delta_t} time units is too short ({detail})")]
    SegmentTooShort { delta_t: f64, detail: String },
    #[error("separation collapsed to {0}; cannot renormalize")]
    Collapse(f64),
    #[error("only {found} samples inside the segment, need {needed}")]
    TooFewSamples { found: usize, needed: usize },
    #[error("no long transient found after {tried} candidates")]
    NoLongTransients { tried: usize },
    #[error(transparent)]
    Lorenz(#[from] LorenzError),
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
    #[error(transparent)]
    Fp(#[from] FpError),
}

/// Portion of a trajectory spent wandering chaotically.
///
/// The wandering ends at capture: the last time the trajectory switches
/// wings, i.e. the last time the nearer of C+ and C- changes. After capture
/// the motion is a contracting spiral onto the destiny, so `t_end` is never
/// later than the settle time reported by [`classify_destiny`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChaoticSegment {
    pub t_start: f64,
    pub t_end: f64,
    pub delta_t: f64,
}

impl ChaoticSegment {
    pub fn new(t_start: f64, t_end: f64) -> Self {
        ChaoticSegment { t_start, t_end, delta_t: t_end - t_start }
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.t_start && t <= self.t_end
    }
}

fn wing(fps: &FixedPoints, s: &State3) -> bool {
    s.distance(&fps.c_plus) <= s.distance(&fps.c_minus)
}

/// Time of the last wing switch among samples up to `until`, or the first
/// sample time if the trajectory never switches.
pub fn capture_time(times: &[f64], states: &[State3], fps: &FixedPoints, until: f64) -> f64 {
    let mut capture = times.first().copied().unwrap_or(0.0);
    for i in 1..times.len() {
        if times[i] > until {
            break;
        }
        if wing(fps, &states[i]) != wing(fps, &states[i - 1]) {
            capture = times[i];
        }
    }
    capture
}

pub fn chaotic_segment(
    traj: &Trajectory,
    fps: &FixedPoints,
    crit: &SettleCriterion,
    allow_unsettled: bool,
) -> Result<ChaoticSegment, DiagnosticError> {
    let (destiny, settle) = classify_destiny(traj, fps, crit)?;
    let t_start = traj.times[0];
    match destiny {
        Destiny::Undecided if allow_unsettled => Ok(ChaoticSegment::new(t_start, traj.last_time())),
        Destiny::Undecided => Err(DiagnosticError::Unsettled),
        _ => Ok(ChaoticSegment::new(t_start, capture_time(&traj.times, &traj.states, fps, settle))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovSettings {
    /// Initial and renormalized separation.
    pub d0: f64,
    pub renorm_interval: f64,
    /// Seed for the random initial perturbation direction.
    pub seed: u64,
}

impl Default for LyapunovSettings {
    fn default() -> Self {
        LyapunovSettings { d0: 1e-9, renorm_interval: 0.5, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    pub lambda: f64,
    pub stderr: f64,
    pub n_renorms: usize,
    pub renorm_interval: f64,
    pub d0: f64,
}

fn random_direction(seed: u64) -> [f64; 3] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let v: [f64; 3] = [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 1e-6 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

/// Two-trajectory Benettin estimate of the largest Lyapunov exponent of any
/// field, over the part of `segment` before the settling cutoff.
pub fn largest_lyapunov_field<F: VectorField + ?Sized>(
    field: &F,
    ic: &State3,
    segment: &ChaoticSegment,
    dt: f64,
    settings: &LyapunovSettings,
) -> Result<LyapunovEstimate, DiagnosticError> {
    let LyapunovSettings { d0, renorm_interval, seed } = *settings;
    if !(d0 > 0.0 && d0.is_finite()) {
        return Err(DiagnosticError::Collapse(d0));
    }
    if segment.delta_t < 20.0 * renorm_interval {
        return Err(DiagnosticError::SegmentTooShort {
            delta_t: segment.delta_t,
            detail: format!("need at least 20 renormalization intervals of {renorm_interval}"),
        });
    }
    let mode = field.mode();
    let consts = StepConstants::new(dt, mode)?;
    let steps_per_renorm = ((renorm_interval / dt).round() as u64).max(1);
    let interval = steps_per_renorm as f64 * dt;
    let cutoff = SETTLING_CUTOFF * segment.t_end;

    let dir = random_direction(seed);
    let mut reference = ic.to_mode(mode)?;
    let mut perturbed =
        State3::new(ic.x + d0 * dir[0], ic.y + d0 * dir[1], ic.z + d0 * dir[2]).to_mode(mode)?;

    let mut rates = Vec::new();
    let mut k = 0u64;
    loop {
        let midpoint = (k as f64 + 0.5) * interval;
        if midpoint > cutoff {
            break;
        }
        for _ in 0..steps_per_renorm {
            reference = rk4_step_field(field, &reference, &consts)?;
            perturbed = rk4_step_field(field, &perturbed, &consts)?;
        }
        let r = State3::from_mode(&reference);
        let q = State3::from_mode(&perturbed);
        let d = q.distance(&r);
        if !(d > 0.0 && d.is_finite()) {
            return Err(DiagnosticError::Collapse(d));
        }
        if midpoint >= segment.t_start {
            rates.push((d / d0).ln() / interval);
        }
        let scale = d0 / d;
        perturbed = State3::new(r.x + (q.x - r.x) * scale, r.y + (q.y - r.y) * scale, r.z + (q.z - r.z) * scale)
            .to_mode(mode)?;
        k += 1;
    }

    let n = rates.len();
    if n < MIN_RENORMS {
        return Err(DiagnosticError::SegmentTooShort {
            delta_t: segment.delta_t,
            detail: format!("{n} usable renormalizations, need {MIN_RENORMS}"),
        });
    }
    let (lambda, sd) = mean_and_sd(&rates);
    Ok(LyapunovEstimate {
        lambda,
        stderr: sd / (n as f64).sqrt(),
        n_renorms: n,
        renorm_interval: interval,
        d0,
    })
}

/// Benettin estimate for the Lorenz system, always in binary64.
pub fn largest_lyapunov(
    p: &LorenzParams,
    ic: &State3,
    segment: &ChaoticSegment,
    dt: f64,
    settings: &LyapunovSettings,
    variant: RhsVariant,
) -> Result<LyapunovEstimate, DiagnosticError> {
    let field = LorenzField::new(p, variant, PrecisionMode::P64)?;
    largest_lyapunov_field(&field, ic, segment, dt, settings)
}

fn mean_and_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttractorExtent {
    pub per_axis_range: [f64; 3],
    pub diagonal: f64,
}

/// Bounding box of the samples whose time lies in `segment`.
pub fn attractor_extent(
    traj: &Trajectory,
    segment: &ChaoticSegment,
    min_samples: usize,
) -> Result<AttractorExtent, DiagnosticError> {
    let inside: Vec<&State3> = traj
        .times
        .iter()
        .zip(&traj.states)
        .filter(|(t, _)| segment.contains(**t))
        .map(|(_, s)| s)
        .collect();
    if inside.is_empty() || inside.len() < min_samples {
        return Err(DiagnosticError::TooFewSamples { found: inside.len(), needed: min_samples.max(1) });
    }
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for s in inside {
        for (i, v) in [s.x, s.y, s.z].into_iter().enumerate() {
            lo[i] = lo[i].min(v);
            hi[i] = hi[i].max(v);
        }
    }
    let range = [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]];
    let diagonal = range.iter().map(|r| r * r).sum::<f64>().sqrt();
    Ok(AttractorExtent { per_axis_range: range, diagonal })
}

/// A binary64 run whose chaotic transient lasted long enough to measure.
#[derive(Debug, Clone)]
pub struct LongTransient {
    pub ic: State3,
    pub segment: ChaoticSegment,
    pub destiny: Destiny,
    pub trajectory: Trajectory,
}

/// Axis-aligned box initial conditions are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IcBox {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub z: [f64; 2],
}

impl Default for IcBox {
    fn default() -> Self {
        IcBox { x: [-10.0, 10.0], y: [-10.0, 10.0], z: [0.0, 30.0] }
    }
}

impl IcBox {
    pub fn sample<R: Rng>(&self, rng: &mut R) -> State3 {
        State3::new(
            rng.gen_range(self.x[0]..=self.x[1]),
            rng.gen_range(self.y[0]..=self.y[1]),
            rng.gen_range(self.z[0]..=self.z[1]),
        )
    }
}

/// Draws initial conditions from `ic_box` until `count` of them settle, in
/// binary64 with variant YA, after wandering chaotically for more than
/// `min_lifetime` time units.
pub fn find_long_transients(
    p: &LorenzParams,
    spec: &IntegrationSpec,
    crit: &SettleCriterion,
    ic_box: &IcBox,
    count: usize,
    min_lifetime: f64,
    seed: u64,
) -> Result<Vec<LongTransient>, DiagnosticError> {
    let fps = crate::lorenz::fixed_points(p)?;
    let spec = IntegrationSpec { stop_on_settle: Some(*crit), ..*spec };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_tries = count.max(1) * 200;
    let mut found = Vec::with_capacity(count);
    let mut tried = 0;
    // Candidates are drawn in order and screened in parallel batches, so the
    // result matches a sequential scan for the same seed.
    const BATCH: usize = 64;
    while found.len() < count {
        if tried >= max_tries {
            return Err(DiagnosticError::NoLongTransients { tried });
        }
        let batch: Vec<State3> = (0..BATCH.min(max_tries - tried)).map(|_| ic_box.sample(&mut rng)).collect();
        let screened = batch
            .par_iter()
            .map(|ic| -> Result<Option<LongTransient>, DiagnosticError> {
                let traj = integrate(p, ic, &spec, RhsVariant::YA, PrecisionMode::P64, &fps)?;
                let (destiny, _) = classify_destiny(&traj, &fps, crit)?;
                if destiny == Destiny::Undecided {
                    return Ok(None);
                }
                let segment = chaotic_segment(&traj, &fps, crit, false)?;
                Ok((segment.delta_t > min_lifetime).then_some(LongTransient { ic: *ic, segment, destiny, trajectory: traj }))
            })
            .collect::<Result<Vec<_>, _>>()?;
        for hit in screened {
            tried += 1;
            if let Some(lt) = hit {
                found.push(lt);
                if found.len() == count {
                    break;
                }
            }
        }
    }
    Ok(found)
}

/// Mean of several single-transient estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEnsemble {
    pub lambda: f64,
    pub stderr: f64,
    pub members: Vec<LyapunovEstimate>,
    pub ics: Vec<State3>,
    /// Largest bounding-box diagonal seen over the members' chaotic segments.
    pub extent: Option<AttractorExtent>,
}

impl LyapunovEnsemble {
    pub fn as_estimate(&self) -> LyapunovEstimate {
        LyapunovEstimate {
            lambda: self.lambda,
            stderr: self.stderr,
            n_renorms: self.members.iter().map(|m| m.n_renorms).sum(),
            renorm_interval: self.members.first().map_or(0.0, |m| m.renorm_interval),
            d0: self.members.first().map_or(0.0, |m| m.d0),
        }
    }
}

/// Estimates λ on each long transient and averages. Members are computed in
/// parallel but each is deterministic and the mean is reduced in input order.
pub fn lyapunov_ensemble(
    p: &LorenzParams,
    transients: &[LongTransient],
    dt: f64,
    settings: &LyapunovSettings,
) -> Result<LyapunovEnsemble, DiagnosticError> {
    use rayon::prelude::*;

    let members: Vec<LyapunovEstimate> = transients
        .par_iter()
        .enumerate()
        .map(|(i, lt)| {
            let member = LyapunovSettings { seed: settings.seed.wrapping_add(i as u64), ..*settings };
            largest_lyapunov(p, &lt.ic, &lt.segment, dt, &member, RhsVariant::YA)
        })
        .collect::<Result<_, _>>()?;
    let lambdas: Vec<f64> = members.iter().map(|m| m.lambda).collect();
    let (lambda, sd) = mean_and_sd(&lambdas);
    let extent = transients
        .iter()
        .filter_map(|lt| attractor_extent(&lt.trajectory, &lt.segment, MIN_EXTENT_SAMPLES).ok())
        .max_by(|a, b| a.diagonal.total_cmp(&b.diagonal));
    Ok(LyapunovEnsemble {
        lambda,
        stderr: sd / (lambdas.len() as f64).sqrt(),
        members,
        ics: transients.iter().map(|lt| lt.ic).collect(),
        extent,
    })
}
