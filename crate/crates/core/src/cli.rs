//! Command-line front end.
//!
//! Exit codes: 0 success or validated, 1 usage error, 2 divergence,
//! 3 not validated.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::diagnostics::IcBox;
use crate::fp::PrecisionMode;
use crate::integrator::{integrate, IntegrateError, IntegrationSpec};
use crate::io::{atomic_write, read_trajectory_file, sweep_csv_string, trajectory_csv_string};
use crate::lorenz::{classify_destiny, fixed_points, LorenzParams, RhsVariant, SettleCriterion, State3};
use crate::pipeline::{
    compute_lyapunov, disagreement_sweep, run_validity_test, sample_transient_ics, Conclusion, LyapunovConfig,
    PipelineConfig,
};
use crate::plot::{render_svg, Series};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DIVERGENCE: i32 = 2;
pub const EXIT_NOT_VALIDATED: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Divergence(String),
    #[error("not validated: {0}")]
    NotValidated(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Divergence(_) => EXIT_DIVERGENCE,
            CliError::NotValidated(_) => EXIT_NOT_VALIDATED,
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

#[derive(Debug, Parser)]
#[command(name = "transient-verify", version, about = "Audit the reliability of transient-chaos simulations of the Lorenz system")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate one trajectory and write it as CSV.
    Simulate(SimulateArgs),
    /// Run the validity test described by a JSON config.
    Check(CheckArgs),
    /// Count right-hand-side variant disagreements over long-transient initial conditions.
    Sweep(SweepArgs),
    /// Estimate the largest Lyapunov exponent from an ensemble of long transients.
    Lyapunov(LyapunovArgs),
    /// Draw x(t) and z(t) from trajectory CSV files as SVG.
    Plot(PlotArgs),
}

fn parse_ic(s: &str) -> Result<State3, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected x,y,z, got {s:?}"));
    }
    let mut v = [0.0; 3];
    for (slot, p) in v.iter_mut().zip(&parts) {
        *slot = p.parse::<f64>().map_err(|_| format!("{p:?} is not a number"))?;
        if !slot.is_finite() {
            return Err(format!("{p:?} is not finite"));
        }
    }
    Ok(State3::new(v[0], v[1], v[2]))
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[command(allow_negative_numbers = true)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 20.0)]
    pub r: f64,
    #[arg(long, default_value_t = 10.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 8.0 / 3.0)]
    pub b: f64,
    #[arg(long, value_parser = parse_ic, default_value = "2,1,5.42857", allow_hyphen_values = true)]
    pub ic: State3,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    #[arg(long = "t-max", default_value_t = 60.0)]
    pub t_max: f64,
    #[arg(long, default_value_t = 100)]
    pub stride: u64,
    #[arg(long, default_value_t = PrecisionMode::P64)]
    pub precision: PrecisionMode,
    #[arg(long, default_value_t = RhsVariant::YA)]
    pub variant: RhsVariant,
    /// Trajectory CSV path.
    #[arg(long)]
    pub out: PathBuf,
    /// Manifest path; defaults to the CSV path with `.manifest.json` appended.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CheckArgs {
    /// JSON config; omitted fields take their defaults.
    pub config: PathBuf,
    /// Report path; the report goes to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SweepArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub mode: PrecisionMode,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Minimum binary64 chaotic duration of a sampled initial condition.
    #[arg(long = "min-lifetime", default_value_t = 20.0)]
    pub min_lifetime: f64,
    /// Optional JSON config for parameters, step, horizon and variants.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Per-run CSV path.
    #[arg(long)]
    pub out: PathBuf,
    /// Summary JSON path; defaults to the CSV path with `.summary.json` appended.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[command(allow_negative_numbers = true)]
pub struct LyapunovArgs {
    #[arg(long, default_value_t = 20.0)]
    pub r: f64,
    #[arg(long, default_value_t = 10.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 8.0 / 3.0)]
    pub b: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    #[arg(long = "ensemble-size", default_value_t = 10)]
    pub ensemble_size: usize,
    #[arg(long = "min-lifetime", default_value_t = 20.0)]
    pub min_lifetime: f64,
    #[arg(long = "t-max", default_value_t = 100.0)]
    pub t_max: f64,
    #[arg(long, default_value_t = 1e-9)]
    pub d0: f64,
    #[arg(long = "renorm-interval", default_value_t = 0.5)]
    pub renorm_interval: f64,
    #[arg(long, default_value_t = 20)]
    pub seed: u64,
    /// Result path; the result goes to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct PlotArgs {
    /// One or more trajectory CSV files; their series are overlaid.
    #[arg(required = true, num_args = 1..=4)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Provenance record written next to a command's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub timestamp_unix: u64,
    pub config: serde_json::Value,
    pub outputs: Vec<String>,
    pub diverged: bool,
    pub notes: Vec<String>,
}

impl RunManifest {
    fn new(command: &str, config: serde_json::Value, outputs: Vec<&Path>) -> Self {
        RunManifest {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            timestamp_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            config,
            outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
            diverged: false,
            notes: Vec::new(),
        }
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write_out(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    atomic_write(path, bytes).map_err(|e| usage(format!("cannot write output: {e}")))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

fn require(flag: &str, value: f64, ok: bool, what: &str) -> Result<(), CliError> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(usage(format!("invalid value {value} for {flag}: {what}")))
    }
}

fn params_from_flags(sigma: f64, r: f64, b: f64) -> Result<LorenzParams, CliError> {
    require("--sigma", sigma, sigma > 0.0, "must be > 0")?;
    require("--r", r, r > 0.0, "must be > 0")?;
    require("--b", b, b > 0.0, "must be > 0")?;
    LorenzParams::new(sigma, r, b).map_err(|e| usage(e.to_string()))
}

fn read_config(path: &Path) -> Result<PipelineConfig, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
    let cfg: PipelineConfig =
        serde_json::from_str(&text).map_err(|e| usage(format!("invalid config {}: {e}", path.display())))?;
    cfg.validate().map_err(|e| usage(format!("{}: {e}", path.display())))?;
    Ok(cfg)
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let params = params_from_flags(args.sigma, args.r, args.b)?;
    require("--dt", args.dt, args.dt > 0.0, "must be > 0")?;
    require("--t-max", args.t_max, args.t_max >= args.dt, "must be at least --dt")?;
    if args.stride == 0 {
        return Err(usage("invalid value 0 for --stride: must be >= 1"));
    }
    let spec = IntegrationSpec { dt: args.dt, t_max: args.t_max, record_stride: args.stride, stop_on_settle: None };
    spec.validate().map_err(|e| usage(format!("--dt/--t-max: {e}")))?;
    let fps = fixed_points(&params).map_err(|e| usage(e.to_string()))?;

    let manifest_path = args.manifest.clone().unwrap_or_else(|| with_suffix(&args.out, ".manifest.json"));
    let config = serde_json::to_value(args).expect("flags serialize");
    let mut manifest = RunManifest::new("simulate", config, vec![&args.out, &manifest_path]);

    let (traj, failure) = match integrate(&params, &args.ic, &spec, args.variant, args.precision, &fps) {
        Ok(t) => (t, None),
        Err(IntegrateError::Divergence { step, source, partial }) => {
            let msg = format!("diverged at step {step} (t = {}): {source}", step as f64 * args.dt);
            (*partial, Some(msg))
        }
        Err(IntegrateError::InvalidInitialCondition(e)) => {
            return Err(usage(format!("invalid value for --ic in {}: {e}", args.precision)))
        }
        Err(e) => return Err(usage(e.to_string())),
    };
    write_out(&args.out, trajectory_csv_string(&traj.times, &traj.states).as_bytes())?;
    match &failure {
        Some(msg) => {
            manifest.diverged = true;
            manifest.notes.push(msg.clone());
        }
        None => {
            let (destiny, settle) = classify_destiny(&traj, &fps, &SettleCriterion::default())
                .map_err(|e| usage(e.to_string()))?;
            manifest.notes.push(format!("destiny {}, settle_time {}", destiny.as_str(), settle));
        }
    }
    write_out(&manifest_path, to_json(&manifest).as_bytes())?;
    match failure {
        Some(msg) => Err(CliError::Divergence(msg)),
        None => Ok(()),
    }
}

pub fn cmd_check(args: &CheckArgs) -> Result<(), CliError> {
    let cfg = read_config(&args.config)?;
    let report = run_validity_test(&cfg).map_err(|e| CliError::NotValidated(e.to_string()))?;
    for note in &report.notes {
        eprintln!("note: {note}");
    }
    let json = to_json(&report);
    match &args.out {
        Some(out) => {
            let manifest_path = with_suffix(out, ".manifest.json");
            let mut manifest = RunManifest::new(
                "check",
                serde_json::to_value(&cfg).expect("config serializes"),
                vec![out.as_path(), &manifest_path],
            );
            manifest.notes = report.notes.clone();
            write_out(out, json.as_bytes())?;
            write_out(&manifest_path, to_json(&manifest).as_bytes())?;
        }
        None => print!("{json}"),
    }
    match report.conclusion {
        Conclusion::Validated => Ok(()),
        other => Err(CliError::NotValidated(format!("{other:?}"))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutput {
    pub mode: PrecisionMode,
    pub seed: u64,
    pub min_lifetime: f64,
    pub variants: Vec<RhsVariant>,
    pub n_total: usize,
    pub n_disagree: usize,
    pub disagreement_fraction: f64,
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<(), CliError> {
    if args.n == 0 {
        return Err(usage("invalid value 0 for --n: must be >= 1"));
    }
    require("--min-lifetime", args.min_lifetime, args.min_lifetime >= 0.0, "must be >= 0")?;
    let cfg = match &args.config {
        Some(p) => read_config(p)?,
        None => PipelineConfig::default(),
    };
    let ics = sample_transient_ics(&cfg, args.n, args.min_lifetime, args.seed)
        .map_err(|e| CliError::NotValidated(e.to_string()))?;
    let summary = disagreement_sweep(&cfg, &ics, args.mode).map_err(|e| usage(e.to_string()))?;
    let out = SweepOutput {
        mode: args.mode,
        seed: args.seed,
        min_lifetime: args.min_lifetime,
        variants: cfg.variants.clone(),
        n_total: summary.n_total,
        n_disagree: summary.n_disagree,
        disagreement_fraction: summary.fraction,
    };
    let summary_path = args.summary.clone().unwrap_or_else(|| with_suffix(&args.out, ".summary.json"));
    write_out(&args.out, sweep_csv_string(&summary.rows).as_bytes())?;
    write_out(&summary_path, to_json(&out).as_bytes())?;
    eprintln!("{}: {}/{} initial conditions disagree", args.mode, out.n_disagree, out.n_total);
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovMember {
    pub ic: State3,
    pub lambda: f64,
    pub stderr: f64,
    pub n_renorms: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovOutput {
    pub lambda: f64,
    pub stderr: f64,
    pub members: Vec<LyapunovMember>,
    pub attractor_diagonal: Option<f64>,
}

pub fn cmd_lyapunov(args: &LyapunovArgs) -> Result<(), CliError> {
    let params = params_from_flags(args.sigma, args.r, args.b)?;
    require("--dt", args.dt, args.dt > 0.0, "must be > 0")?;
    require("--t-max", args.t_max, args.t_max >= args.dt, "must be at least --dt")?;
    require("--d0", args.d0, args.d0 > 0.0, "must be > 0")?;
    require("--renorm-interval", args.renorm_interval, args.renorm_interval > 0.0, "must be > 0")?;
    require("--min-lifetime", args.min_lifetime, args.min_lifetime >= 0.0, "must be >= 0")?;
    if args.ensemble_size == 0 {
        return Err(usage("invalid value 0 for --ensemble-size: must be >= 1"));
    }
    let cfg = PipelineConfig {
        params,
        dt: args.dt,
        lyapunov: LyapunovConfig {
            d0: args.d0,
            renorm_interval: args.renorm_interval,
            ensemble_size: args.ensemble_size,
            min_lifetime: args.min_lifetime,
            search_t_max: args.t_max,
            seed: args.seed,
            ic_box: IcBox::default(),
        },
        ..PipelineConfig::default()
    };
    let ens = compute_lyapunov(&cfg).map_err(|e| CliError::NotValidated(e.to_string()))?;
    let out = LyapunovOutput {
        lambda: ens.lambda,
        stderr: ens.stderr,
        members: ens
            .members
            .iter()
            .zip(&ens.ics)
            .map(|(m, ic)| LyapunovMember { ic: *ic, lambda: m.lambda, stderr: m.stderr, n_renorms: m.n_renorms })
            .collect(),
        attractor_diagonal: ens.extent.map(|e| e.diagonal),
    };
    let json = to_json(&out);
    match &args.out {
        Some(p) => write_out(p, json.as_bytes()),
        None => {
            print!("{json}");
            Ok(())
        }
    }
}

pub fn cmd_plot(args: &PlotArgs) -> Result<(), CliError> {
    let mut tables = Vec::with_capacity(args.inputs.len());
    for p in &args.inputs {
        tables.push(read_trajectory_file(p).map_err(|e| usage(format!("{}: {e}", p.display())))?);
    }
    let labels: Vec<String> = args.inputs.iter().map(|p| p.display().to_string()).collect();
    let series: Vec<Series<'_>> =
        labels.iter().zip(&tables).map(|(label, table)| Series { label, table }).collect();
    write_out(&args.out, render_svg(&series).as_bytes())
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Check(a) => cmd_check(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Lyapunov(a) => cmd_lyapunov(a),
        Command::Plot(a) => cmd_plot(a),
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Messages go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("transient-verify: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ic_flag_parsing() {
        assert_eq!(parse_ic("2,1,5.42857").unwrap(), State3::new(2.0, 1.0, 5.42857));
        let cli = Cli::try_parse_from(["tv", "simulate", "--out", "a.csv", "--ic", "-1,-2,3"]).unwrap();
        let Command::Simulate(a) = cli.command else { panic!("wrong command") };
        assert_eq!(a.ic, State3::new(-1.0, -2.0, 3.0));
        assert_eq!(parse_ic(" -1 , 0,3e2").unwrap(), State3::new(-1.0, 0.0, 300.0));
        assert!(parse_ic("1,2").is_err());
        assert!(parse_ic("1,2,x").is_err());
        assert!(parse_ic("1,2,inf").is_err());
    }

    #[test]
    fn defaults_match_the_documented_ones() {
        let cli = Cli::try_parse_from(["tv", "simulate", "--out", "a.csv"]).unwrap();
        let Command::Simulate(a) = cli.command else { panic!("wrong command") };
        assert_eq!((a.sigma, a.b, a.dt, a.t_max, a.stride), (10.0, 8.0 / 3.0, 1e-3, 60.0, 100));
        assert_eq!((a.precision, a.variant), (PrecisionMode::P64, RhsVariant::YA));
    }

    #[test]
    fn bad_values_are_usage_errors_naming_the_flag() {
        let args = |extra: &[&str]| {
            let mut v = vec!["tv", "simulate", "--out", "unused.csv"];
            v.extend_from_slice(extra);
            let Command::Simulate(a) = Cli::try_parse_from(v).unwrap().command else { unreachable!() };
            a
        };
        for (flags, name) in [
            (&["--dt", "0"][..], "--dt"),
            (&["--dt", "-1"][..], "--dt"),
            (&["--t-max", "0"][..], "--t-max"),
            (&["--stride", "0"][..], "--stride"),
            (&["--sigma", "0"][..], "--sigma"),
            (&["--r", "-2"][..], "--r"),
        ] {
            let err = cmd_simulate(&args(flags)).unwrap_err();
            assert_eq!(err.exit_code(), EXIT_USAGE);
            assert!(err.to_string().contains(name), "{err}");
        }
        assert_eq!(run(["tv", "simulate", "--out", "x.csv", "--precision", "p16"]), EXIT_USAGE);
        assert_eq!(run(["tv", "sweep", "--n", "0", "--mode", "p32", "--out", "x.csv"]), EXIT_USAGE);
    }

    #[test]
    fn suffix_paths() {
        assert_eq!(with_suffix(Path::new("out/t.csv"), ".manifest.json"), PathBuf::from("out/t.csv.manifest.json"));
    }
}
