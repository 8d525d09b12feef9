//! The validity test end to end: simulate at a precision rung, diagnose,
//! budget, verdict, and escalate up a fixed ladder until the budget passes
//! and all right-hand-side variants agree on the destiny.
//!
//! Agreement between mathematically equivalent variants is only a necessary
//! condition. A `Validated` report never claims more than that.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::budget::{magnitude_scale, Accumulation, BudgetInputs, ErrorBudget, Verdict, DEFAULT_MARGIN_ETA};
use crate::diagnostics::{
    attractor_extent, chaotic_segment, find_long_transients, lyapunov_ensemble, DiagnosticError, IcBox,
    LyapunovEnsemble, LyapunovSettings, MIN_EXTENT_SAMPLES,
};
use crate::fp::PrecisionMode;
use crate::integrator::{integrate, IntegrateError, IntegrationSpec, Trajectory};
use crate::lorenz::{classify_destiny, fixed_points, Destiny, FixedPoints, LorenzError, LorenzParams, RhsVariant, SettleCriterion, State3};

/// Environment variable capping worker threads for sweeps and ensembles.
pub const THREADS_ENV: &str = "TRANSIENT_VERIFY_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("Lyapunov diagnostics failed: {0}")]
    Diagnostics(#[from] DiagnosticError),
    #[error(transparent)]
    Lorenz(#[from] LorenzError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LyapunovConfig {
    pub d0: f64,
    pub renorm_interval: f64,
    pub ensemble_size: usize,
    /// Minimum chaotic duration of an ensemble member.
    pub min_lifetime: f64,
    /// Horizon used while searching for ensemble members.
    pub search_t_max: f64,
    pub seed: u64,
    pub ic_box: IcBox,
}

impl Default for LyapunovConfig {
    fn default() -> Self {
        LyapunovConfig {
            d0: 1e-9,
            renorm_interval: 0.5,
            ensemble_size: 10,
            min_lifetime: 20.0,
            search_t_max: 100.0,
            seed: 20,
            ic_box: IcBox::default(),
        }
    }
}

/// Everything one validity test needs. Every field has a default, so a
/// config file only has to name what it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub params: LorenzParams,
    pub ic: State3,
    pub dt: f64,
    pub t_max: f64,
    pub record_stride: u64,
    pub eps_settle: f64,
    pub t_hold: f64,
    pub margin_eta: f64,
    pub ladder: Vec<PrecisionMode>,
    pub variants: Vec<RhsVariant>,
    pub lyapunov: LyapunovConfig,
    pub accumulation: Accumulation,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            params: LorenzParams::classic(20.0),
            ic: State3::new(2.0, 1.0, 5.42857),
            dt: 1e-3,
            t_max: 60.0,
            record_stride: 100,
            eps_settle: 1.0,
            t_hold: 5.0,
            margin_eta: DEFAULT_MARGIN_ETA,
            ladder: PrecisionMode::LADDER.to_vec(),
            variants: vec![RhsVariant::YA, RhsVariant::YB],
            lyapunov: LyapunovConfig::default(),
            accumulation: Accumulation::None,
        }
    }
}

impl PipelineConfig {
    pub fn settle(&self) -> SettleCriterion {
        SettleCriterion { eps_settle: self.eps_settle, t_hold: self.t_hold }
    }

    pub fn integration_spec(&self) -> IntegrationSpec {
        IntegrationSpec {
            dt: self.dt,
            t_max: self.t_max,
            record_stride: self.record_stride,
            stop_on_settle: Some(self.settle()),
        }
    }

    pub fn lyapunov_settings(&self) -> LyapunovSettings {
        LyapunovSettings { d0: self.lyapunov.d0, renorm_interval: self.lyapunov.renorm_interval, seed: self.lyapunov.seed }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        self.params.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        if !self.ic.is_finite() {
            return bad(format!("initial condition {} is not finite", self.ic));
        }
        self.integration_spec().validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        if !(self.margin_eta > 0.0 && self.margin_eta.is_finite()) {
            return bad(format!("margin_eta must be > 0, got {}", self.margin_eta));
        }
        if self.ladder.is_empty() {
            return bad("ladder is empty".into());
        }
        if self.ladder.windows(2).any(|w| w[0].unit_roundoff() <= w[1].unit_roundoff()) {
            return bad(format!("ladder must strictly increase in precision: {:?}", self.ladder));
        }
        if self.variants.len() < 2 {
            return bad("at least two right-hand-side variants are needed for the agreement check".into());
        }
        let l = &self.lyapunov;
        if !(l.d0 > 0.0 && l.renorm_interval > 0.0 && l.ensemble_size > 0 && l.search_t_max >= self.dt) {
            return bad(format!("invalid lyapunov settings: {l:?}"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Conclusion {
    Validated,
    NecessaryConditionFailed,
    LadderExhausted,
}

/// Which trajectory the rung's Δt and extent were measured on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DiagnosticSource {
    /// The rung's own first-variant run.
    Rung,
    /// A binary64 run of the same initial condition.
    Shadow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantOutcome {
    pub variant: RhsVariant,
    pub destiny: Destiny,
    /// `None` when undecided.
    pub settle_time: Option<f64>,
    #[serde(skip)]
    pub trajectory: Option<Trajectory>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RungReport {
    pub mode: PrecisionMode,
    pub budget: ErrorBudget,
    pub variants: Vec<VariantOutcome>,
    pub variants_agree: bool,
    #[serde(skip, default = "default_source")]
    pub diagnostic_source: DiagnosticSource,
    #[serde(skip)]
    pub magnitude_scale: f64,
}

fn default_source() -> DiagnosticSource {
    DiagnosticSource::Rung
}

impl RungReport {
    pub fn destinies(&self) -> Vec<Destiny> {
        self.variants.iter().map(|v| v.destiny).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub conclusion: Conclusion,
    pub final_rung: Option<PrecisionMode>,
    pub per_rung: Vec<RungReport>,
    #[serde(skip)]
    pub lyapunov: Option<LyapunovEnsemble>,
    #[serde(skip)]
    pub notes: Vec<String>,
}

impl ValidityReport {
    pub fn rung(&self, mode: PrecisionMode) -> Option<&RungReport> {
        self.per_rung.iter().find(|r| r.mode == mode)
    }
}

/// True iff there are at least two destinies, all equal and none undecided.
pub fn variant_agreement(destinies: &[Destiny]) -> bool {
    destinies.len() >= 2
        && destinies[0] != Destiny::Undecided
        && destinies.iter().all(|d| *d == destinies[0])
}

/// Runs `f` on a pool capped by [`THREADS_ENV`], or on rayon's global pool.
pub fn with_thread_cap<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    let cap = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()).filter(|&n| n > 0);
    match cap.and_then(|n| rayon::ThreadPoolBuilder::new().num_threads(n).build().ok()) {
        Some(pool) => pool.install(f),
        None => f(),
    }
}

/// The Lyapunov ensemble the pipeline uses, in binary64.
pub fn compute_lyapunov(cfg: &PipelineConfig) -> Result<LyapunovEnsemble, PipelineError> {
    let l = &cfg.lyapunov;
    let search = IntegrationSpec { t_max: l.search_t_max, ..cfg.integration_spec() };
    let transients =
        find_long_transients(&cfg.params, &search, &cfg.settle(), &l.ic_box, l.ensemble_size, l.min_lifetime, l.seed)?;
    Ok(lyapunov_ensemble(&cfg.params, &transients, cfg.dt, &cfg.lyapunov_settings())?)
}

fn run_variants(
    cfg: &PipelineConfig,
    ic: &State3,
    mode: PrecisionMode,
    fps: &FixedPoints,
) -> Vec<Result<Trajectory, IntegrateError>> {
    let spec = cfg.integration_spec();
    cfg.variants.par_iter().map(|&v| integrate(&cfg.params, ic, &spec, v, mode, fps)).collect()
}

pub fn run_validity_test(cfg: &PipelineConfig) -> Result<ValidityReport, PipelineError> {
    cfg.validate()?;
    let fps = fixed_points(&cfg.params)?;
    let crit = cfg.settle();
    let mut notes = Vec::new();
    if !cfg.params.in_transient_window() {
        notes.push(format!("r = {} lies outside the transient-chaos window", cfg.params.r));
    }

    let ensemble = with_thread_cap(|| compute_lyapunov(cfg))?;
    let lambda = ensemble.lambda;
    let mut shadow: Option<Trajectory> = None;

    let mut per_rung = Vec::new();
    let mut conclusion = Conclusion::LadderExhausted;
    let mut final_rung = None;
    let mut necessary_failed_at = None;

    for &mode in &cfg.ladder {
        let runs = with_thread_cap(|| run_variants(cfg, &cfg.ic, mode, &fps));
        let mut trajectories = Vec::with_capacity(runs.len());
        let mut failed = false;
        for (variant, run) in cfg.variants.iter().zip(runs) {
            match run {
                Ok(t) => trajectories.push(t),
                Err(e) => {
                    notes.push(format!("{mode}/{variant}: {e}"));
                    failed = true;
                }
            }
        }
        if failed {
            continue;
        }

        let mut variants = Vec::with_capacity(trajectories.len());
        for traj in trajectories {
            let (destiny, settle) = classify_destiny(&traj, &fps, &crit)?;
            variants.push(VariantOutcome {
                variant: traj.variant,
                destiny,
                settle_time: settle.is_finite().then_some(settle),
                trajectory: Some(traj),
            });
        }
        let variants_agree = variant_agreement(&variants.iter().map(|v| v.destiny).collect::<Vec<_>>());
        let first = variants[0].trajectory.as_ref().expect("trajectory kept");

        let own_is_usable = mode >= PrecisionMode::P64 && variants[0].destiny != Destiny::Undecided;
        let (diag_traj, diagnostic_source) = if own_is_usable {
            (first, DiagnosticSource::Rung)
        } else {
            if shadow.is_none() {
                let spec = cfg.integration_spec();
                match integrate(&cfg.params, &cfg.ic, &spec, cfg.variants[0], PrecisionMode::P64, &fps) {
                    Ok(t) => shadow = Some(t),
                    Err(e) => {
                        notes.push(format!("{mode}: binary64 shadow run failed: {e}"));
                        continue;
                    }
                }
            }
            (shadow.as_ref().expect("shadow computed"), DiagnosticSource::Shadow)
        };

        let segment = chaotic_segment(diag_traj, &fps, &crit, true)?;
        let diagonal = match attractor_extent(diag_traj, &segment, MIN_EXTENT_SAMPLES) {
            Ok(e) => e.diagonal,
            Err(_) => match &ensemble.extent {
                Some(e) => {
                    notes.push(format!(
                        "{mode}: chaotic segment too short for an extent; using the ensemble's {:.3}",
                        e.diagonal
                    ));
                    e.diagonal
                }
                None => {
                    notes.push(format!("{mode}: no attractor extent available"));
                    continue;
                }
            },
        };

        let scale = magnitude_scale(first);
        let budget = BudgetInputs {
            mode,
            dt: cfg.dt,
            magnitude_scale: scale,
            lambda,
            delta_t: segment.delta_t,
            attractor_diagonal: diagonal,
            margin_eta: cfg.margin_eta,
            accumulation: cfg.accumulation,
        }
        .evaluate();
        let passed = budget.verdict == Verdict::Pass;

        per_rung.push(RungReport {
            mode,
            budget,
            variants,
            variants_agree,
            diagnostic_source,
            magnitude_scale: scale,
        });

        if passed && variants_agree {
            conclusion = Conclusion::Validated;
            final_rung = Some(mode);
            notes.push(format!(
                "validated at {mode}: variants agree, which is necessary but not sufficient for correctness"
            ));
            break;
        }
        if passed && necessary_failed_at.is_none() {
            necessary_failed_at = Some(mode);
            notes.push(format!("{mode}: budget passes but the variants disagree"));
        }
    }

    if conclusion != Conclusion::Validated {
        if let Some(mode) = necessary_failed_at {
            conclusion = Conclusion::NecessaryConditionFailed;
            final_rung = Some(mode);
        }
    }

    Ok(ValidityReport { conclusion, final_rung, per_rung, lyapunov: Some(ensemble), notes })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub ic: State3,
    pub variant: RhsVariant,
    pub mode: PrecisionMode,
    pub destiny: Destiny,
    pub settle_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub mode: PrecisionMode,
    pub n_total: usize,
    pub n_disagree: usize,
    pub fraction: f64,
    #[serde(skip)]
    pub rows: Vec<SweepRow>,
}

/// Runs every configured variant from each initial condition in `mode` and
/// counts the initial conditions whose variants end up at different
/// destinies. A run that fails counts as undecided.
pub fn disagreement_sweep(
    cfg: &PipelineConfig,
    ic_set: &[State3],
    mode: PrecisionMode,
) -> Result<SweepSummary, PipelineError> {
    if ic_set.is_empty() {
        return Err(PipelineError::Config("sweep needs at least one initial condition".into()));
    }
    cfg.validate()?;
    let fps = fixed_points(&cfg.params)?;
    let crit = cfg.settle();
    let spec = cfg.integration_spec();

    let per_ic: Vec<Vec<SweepRow>> = with_thread_cap(|| {
        ic_set
            .par_iter()
            .map(|ic| {
                cfg.variants
                    .iter()
                    .map(|&variant| {
                        let (destiny, settle) = integrate(&cfg.params, ic, &spec, variant, mode, &fps)
                            .ok()
                            .and_then(|t| classify_destiny(&t, &fps, &crit).ok())
                            .unwrap_or((Destiny::Undecided, f64::INFINITY));
                        SweepRow { ic: *ic, variant, mode, destiny, settle_time: settle.is_finite().then_some(settle) }
                    })
                    .collect()
            })
            .collect()
    });

    let n_disagree = per_ic.iter().filter(|rows| rows.iter().any(|r| r.destiny != rows[0].destiny)).count();
    Ok(SweepSummary {
        mode,
        n_total: ic_set.len(),
        n_disagree,
        fraction: n_disagree as f64 / ic_set.len() as f64,
        rows: per_ic.into_iter().flatten().collect(),
    })
}

/// Draws `n` initial conditions whose binary64 run wanders chaotically for
/// more than `min_lifetime` and settles within the configured horizon.
pub fn sample_transient_ics(
    cfg: &PipelineConfig,
    n: usize,
    min_lifetime: f64,
    seed: u64,
) -> Result<Vec<State3>, PipelineError> {
    cfg.validate()?;
    let found = find_long_transients(
        &cfg.params,
        &cfg.integration_spec(),
        &cfg.settle(),
        &cfg.lyapunov.ic_box,
        n,
        min_lifetime,
        seed,
    )?;
    Ok(found.into_iter().map(|lt| lt.ic).collect())
}
