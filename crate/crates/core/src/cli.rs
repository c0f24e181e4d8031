//! Command-line front end: configuration, dispatch and artifacts.
//!
//! Every subcommand reads an optional JSON [`RunConfig`] and then applies
//! overrides given as `--dotted.key value` pairs, e.g. `--grid.n 32` or
//! `--experiment.q 2.5`. Values are parsed as JSON when possible and as
//! strings otherwise. The merged document is decoded strictly: unknown keys
//! and type errors are reported with the JSON pointer of the offending key.
//!
//! Exit codes: 0 when the run passes, 2 when an experiment fails or a
//! certificate reports that the smallness condition does not hold, 1 for
//! usage and configuration errors.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::asymptotics::{
    config_hash, run_convergence_rate, run_farfield_rates, run_stationary_stability, write_atomic, BoundType,
    ConvergenceOptions, FarfieldOptions, RateMeasure, RateReport, StabilityOptions,
};
use crate::error::{PmError, Result};
use crate::forces::ForceSpec;
use crate::grid::{to_fourier, to_physical, FourierVectorField, GridSpec};
use crate::landau::{landau_residual, sample_landau, LandauParams, RotatedLandau};
use crate::norms::{interpolation_gap, lq_norm, pm_norm, weak_lq_norm, NormBand, Region};
use crate::operators::{riesz_constant, riesz_constant_reference, TimeGrid};
use crate::pmns::{save_with_sidecar, FieldFile};
use crate::solver::{
    homogeneous_datum, random_band_limited, solve_cauchy_with, solve_stationary_with, CauchyOptions,
    ContractionCertificate, PicardOptions,
};

pub const CONFIG_FORMAT_VERSION: u32 = 1;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAIL: i32 = 2;

/// Environment variable holding the worker-thread count.
pub const THREADS_ENV: &str = "PMFLOW_THREADS";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "format_version")]
    pub format_version: u32,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub timegrid: TimeGridConfig,
    #[serde(default = "zero_force")]
    pub force: ForceSpec,
    /// Second force for stability and convergence runs.
    #[serde(default)]
    pub force2: Option<ForceSpec>,
    #[serde(default)]
    pub datum: DatumConfig,
    /// Second datum for convergence runs.
    #[serde(default)]
    pub datum2: Option<DatumConfig>,
    #[serde(default)]
    pub experiment: ExperimentConfig,
    #[serde(default = "output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
}

fn format_version() -> u32 {
    CONFIG_FORMAT_VERSION
}

fn zero_force() -> ForceSpec {
    ForceSpec::Zero
}

fn output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_value(json!({})).expect("every field has a default")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub n: usize,
    pub box_length: f64,
    pub dealias_fraction: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            n: 64,
            box_length: 16.0,
            dealias_fraction: 2.0 / 3.0,
        }
    }
}

impl GridConfig {
    pub fn build(&self) -> Result<GridSpec> {
        GridSpec::new(self.n, self.box_length, self.dealias_fraction)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeGridConfig {
    pub t_min: f64,
    pub t_max: f64,
    pub ratio: f64,
}

impl Default for TimeGridConfig {
    fn default() -> Self {
        TimeGridConfig {
            t_min: 1e-2,
            t_max: 1e2,
            ratio: 2f64.powf(0.25),
        }
    }
}

impl TimeGridConfig {
    pub fn build(&self) -> Result<TimeGrid> {
        TimeGrid::geometric(self.t_min, self.t_max, self.ratio)
    }
}

/// Initial datum descriptor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatumConfig {
    #[default]
    Zero,
    /// `ε ℙ̂(ξ)a/|ξ|²`
    Homogeneous { eps: f64, a: [f64; 3] },
    /// Random divergence-free modes in a band, seeded by the run seed.
    BandLimited {
        amplitude: f64,
        #[serde(default)]
        xi_min: Option<f64>,
        #[serde(default)]
        xi_max: Option<f64>,
    },
    /// A snapshot of a PMNS file, resampled onto the run grid.
    File {
        path: PathBuf,
        #[serde(default)]
        snapshot: Option<usize>,
    },
}

impl DatumConfig {
    pub fn build(&self, grid: &GridSpec, seed: u64) -> Result<FourierVectorField> {
        match self {
            DatumConfig::Zero => Ok(FourierVectorField::zeros(*grid)),
            DatumConfig::Homogeneous { eps, a } => Ok(homogeneous_datum(grid, *eps, *a)),
            DatumConfig::BandLimited {
                amplitude,
                xi_min,
                xi_max,
            } => {
                let d = NormBand::default_for(grid);
                let band = NormBand::new(xi_min.unwrap_or(d.xi_min), xi_max.unwrap_or(d.xi_max))?;
                Ok(random_band_limited(grid, &band, *amplitude, seed))
            }
            DatumConfig::File { path, snapshot } => {
                let file = FieldFile::load(path)?;
                let i = snapshot.unwrap_or(file.snapshots.len().saturating_sub(1));
                let field = file
                    .snapshots
                    .get(i)
                    .ok_or_else(|| PmError::arg(format!("{} has no snapshot {i}", path.display())))?;
                field.resampled(grid)
            }
        }
    }
}

/// Experiment parameters; each subcommand reads the keys it needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub name: Option<String>,
    /// Lebesgue exponents.
    pub q: Option<Vec<f64>>,
    /// Pseudomeasure exponents.
    pub b: Option<Vec<f64>>,
    pub delta: Option<f64>,
    pub tolerance: Option<f64>,
    pub bound_type: Option<BoundType>,
    pub picard_tol: f64,
    pub max_iter: usize,
    pub band: Option<NormBand>,
    pub region: Option<Region>,
    pub lq_window: Option<[f64; 2]>,
    pub pm_window: Option<[f64; 2]>,
    pub extrapolate: bool,
    pub s_values: Option<Vec<f64>>,
    /// Landau parameter `|c| > 1`.
    pub c: Option<f64>,
    /// Radii of the Landau residual annulus.
    pub annulus: Option<[f64; 2]>,
    /// Finite-difference step of the Landau residual.
    pub h: Option<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: None,
            q: None,
            b: None,
            delta: None,
            tolerance: None,
            bound_type: None,
            picard_tol: 1e-10,
            max_iter: 100,
            band: None,
            region: None,
            lq_window: None,
            pm_window: None,
            extrapolate: false,
            s_values: None,
            c: None,
            annulus: None,
            h: None,
        }
    }
}

impl ExperimentConfig {
    fn picard(&self) -> PicardOptions {
        PicardOptions {
            tol: self.picard_tol,
            max_iter: self.max_iter,
        }
    }

    fn first_q(&self, default: f64) -> f64 {
        self.q.as_ref().and_then(|v| v.first().copied()).unwrap_or(default)
    }

    fn first_b(&self, default: f64) -> f64 {
        self.b.as_ref().and_then(|v| v.first().copied()).unwrap_or(default)
    }
}

#[derive(Debug, Parser)]
#[command(name = "pmflow", version, about = "Mild Navier-Stokes solutions with singular forces in pseudomeasure spaces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the Cauchy problem on the configured time grid.
    SolveCauchy(CommonArgs),
    /// Solve the stationary problem.
    SolveStationary(CommonArgs),
    /// Sample the Landau solution and check its residual.
    Landau(CommonArgs),
    /// Evaluate the norm suite on the configured datum.
    VerifyNorms(CommonArgs),
    /// Far-field growth of the nonlinear part.
    RateFarfield(CommonArgs),
    /// Stability of stationary solutions in the force.
    RateStability(CommonArgs),
    /// Convergence of two Cauchy solutions.
    RateConvergence(CommonArgs),
    /// Riesz constants against their reference quadrature.
    Riesz(CommonArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::SolveCauchy(_) => "solve-cauchy",
            Command::SolveStationary(_) => "solve-stationary",
            Command::Landau(_) => "landau",
            Command::VerifyNorms(_) => "verify-norms",
            Command::RateFarfield(_) => "rate-farfield",
            Command::RateStability(_) => "rate-stability",
            Command::RateConvergence(_) => "rate-convergence",
            Command::Riesz(_) => "riesz",
        }
    }

    fn args(&self) -> &CommonArgs {
        match self {
            Command::SolveCauchy(a)
            | Command::SolveStationary(a)
            | Command::Landau(a)
            | Command::VerifyNorms(a)
            | Command::RateFarfield(a)
            | Command::RateStability(a)
            | Command::RateConvergence(a)
            | Command::Riesz(a) => a,
        }
    }
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Shorthand for `--output_dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Shorthand for `--experiment.c`.
    #[arg(long, allow_negative_numbers = true)]
    pub c: Option<f64>,
    /// Shorthand for `--experiment.annulus`.
    #[arg(long, num_args = 2, value_names = ["R_MIN", "R_MAX"])]
    pub annulus: Option<Vec<f64>>,
    /// Config overrides as `--dotted.key value` pairs.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "--KEY VALUE")]
    pub overrides: Vec<String>,
}

/// Loads the config file (if any) and applies every override.
pub fn resolve_config(args: &CommonArgs) -> Result<RunConfig> {
    let mut doc = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| PmError::arg(format!("cannot read config {}: {e}", path.display())))?;
            serde_json::from_str::<Value>(&text).map_err(|e| PmError::Config {
                pointer: String::new(),
                message: format!("{}: {e}", path.display()),
            })?
        }
        None => json!({}),
    };
    if !doc.is_object() {
        return Err(PmError::Config {
            pointer: String::new(),
            message: "the configuration must be a JSON object".into(),
        });
    }
    for (key, value) in parse_overrides(&args.overrides)? {
        set_dotted(&mut doc, &key, value)?;
    }
    if let Some(out) = &args.out {
        set_dotted(&mut doc, "output_dir", json!(out))?;
    }
    if let Some(c) = args.c {
        set_dotted(&mut doc, "experiment.c", json!(c))?;
    }
    if let Some(a) = &args.annulus {
        set_dotted(&mut doc, "experiment.annulus", json!(a))?;
    }
    decode_config(doc)
}

/// Strict decoding with the JSON pointer of the first offending key.
pub fn decode_config(doc: Value) -> Result<RunConfig> {
    let cfg: RunConfig = serde_path_to_error::deserialize(doc).map_err(|e| PmError::Config {
        pointer: json_pointer(&e.path().to_string()),
        message: e.inner().to_string(),
    })?;
    if cfg.format_version != CONFIG_FORMAT_VERSION {
        return Err(PmError::Config {
            pointer: "/format_version".into(),
            message: format!("unsupported format_version {}", cfg.format_version),
        });
    }
    Ok(cfg)
}

fn json_pointer(path: &str) -> String {
    if path == "." || path.is_empty() {
        return String::new();
    }
    let mut out = String::new();
    for part in path.split('.') {
        // array indices come through as `key[3]`
        let mut rest = part;
        if let Some(open) = rest.find('[') {
            out.push('/');
            out.push_str(&rest[..open]);
            rest = &rest[open..];
            while let Some(close) = rest.find(']') {
                out.push('/');
                out.push_str(&rest[1..close]);
                rest = &rest[close + 1..];
            }
        } else {
            out.push('/');
            out.push_str(rest);
        }
    }
    out
}

fn parse_overrides(raw: &[String]) -> Result<Vec<(String, Value)>> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < raw.len() {
        let key = raw[i]
            .strip_prefix("--")
            .ok_or_else(|| PmError::arg(format!("expected a --key, got '{}'", raw[i])))?;
        let (key, inline) = match key.split_once('=') {
            Some((k, v)) => (k, Some(v.to_string())),
            None => (key, None),
        };
        let key = match key.replace('-', "_").as_str() {
            "out" => "output_dir".to_string(),
            "c" => "experiment.c".to_string(),
            "annulus" => "experiment.annulus".to_string(),
            other => other.to_string(),
        };
        let mut values = Vec::new();
        if let Some(v) = inline {
            values.push(v);
            i += 1;
        } else {
            i += 1;
            // several values become an array: `--experiment.q 2 2.5`
            while i < raw.len() && !(raw[i].starts_with("--") && raw[i].len() > 2) {
                values.push(raw[i].clone());
                i += 1;
            }
        }
        let value = match values.len() {
            0 => return Err(PmError::arg(format!("--{key} needs a value"))),
            1 => parse_value(&values[0]),
            _ => Value::Array(values.iter().map(|v| parse_value(v)).collect()),
        };
        out.push((key, value));
    }
    Ok(out)
}

fn parse_value(s: &str) -> Value {
    serde_json::from_str(s).unwrap_or_else(|_| Value::String(s.to_string()))
}

fn set_dotted(doc: &mut Value, key: &str, value: Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(PmError::arg(format!("malformed override key '{key}'")));
    }
    let mut cur = doc;
    for (depth, part) in parts.iter().enumerate() {
        let obj = match cur {
            Value::Object(m) => m,
            other => {
                if other.is_null() {
                    *other = Value::Object(Map::new());
                    other.as_object_mut().expect("just set")
                } else {
                    return Err(PmError::Config {
                        pointer: format!("/{}", parts[..depth].join("/")),
                        message: format!("cannot set '{key}' inside a non-object value"),
                    });
                }
            }
        };
        if depth + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        cur = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    Ok(())
}

/// Result of one subcommand.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub pass: bool,
    pub summary: String,
}

/// Parses `argv` (including the program name) and runs the subcommand.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
            let _ = e.print();
            return code;
        }
    };
    configure_threads();
    let cfg = match resolve_config(cli.command.args()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("pmflow {}: {e}", cli.command.name());
            return EXIT_USAGE;
        }
    };
    match dispatch(&cli.command, &cfg) {
        Ok(outcome) => {
            println!("{}: {}", cli.command.name(), outcome.summary);
            if outcome.pass {
                EXIT_PASS
            } else {
                EXIT_FAIL
            }
        }
        Err(e @ (PmError::Diverged { .. } | PmError::MaxIterations { .. })) => {
            if let Err(io) = write_failed_certificate(&cfg, &e) {
                eprintln!("pmflow {}: {io}", cli.command.name());
            }
            println!("{}: {e}", cli.command.name());
            EXIT_FAIL
        }
        Err(e) => {
            eprintln!("pmflow {}: {e}", cli.command.name());
            EXIT_USAGE
        }
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        if n > 0 {
            // a second call in the same process keeps the first pool
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn write_failed_certificate(cfg: &RunConfig, e: &PmError) -> Result<()> {
    let cert = match e {
        PmError::Diverged { certificate, .. } | PmError::MaxIterations { certificate, .. } => certificate,
        _ => return Ok(()),
    };
    fs::create_dir_all(&cfg.output_dir)?;
    write_json(
        &cfg.output_dir.join("certificate.json"),
        &json!({
            "format_version": CONFIG_FORMAT_VERSION,
            "config_hash": config_hash(cfg)?,
            "error": e.to_string(),
            "certificate": certificate_json(cert),
        }),
    )
}

fn certificate_json(c: &ContractionCertificate) -> Value {
    serde_json::to_value(c).expect("certificate serializes")
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    write_atomic(path, serde_json::to_string_pretty(value)?.as_bytes())
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| PmError::Io(e.into_error()))?;
    write_atomic(path, &bytes)
}

fn num(x: f64) -> String {
    format!("{x:.17e}")
}

pub fn dispatch(cmd: &Command, cfg: &RunConfig) -> Result<Outcome> {
    log::info!("{} writing to {}", cmd.name(), cfg.output_dir.display());
    fs::create_dir_all(&cfg.output_dir)?;
    write_json(&cfg.output_dir.join("config.json"), &serde_json::to_value(cfg)?)?;
    match cmd {
        Command::SolveCauchy(_) => cmd_solve_cauchy(cfg),
        Command::SolveStationary(_) => cmd_solve_stationary(cfg),
        Command::Landau(_) => cmd_landau(cfg),
        Command::VerifyNorms(_) => cmd_verify_norms(cfg),
        Command::RateFarfield(_) => cmd_rate_farfield(cfg),
        Command::RateStability(_) => cmd_rate_stability(cfg),
        Command::RateConvergence(_) => cmd_rate_convergence(cfg),
        Command::Riesz(_) => cmd_riesz(cfg),
    }
}

/// Indices of the nodes nearest each power of ten spanned by the grid, in order.
pub fn decade_nodes(times: &[f64]) -> Vec<usize> {
    if times.is_empty() {
        return Vec::new();
    }
    let lo = times[0].log10().round() as i32;
    let hi = times[times.len() - 1].log10().round() as i32;
    let mut out: Vec<usize> = (lo..=hi)
        .map(|k| {
            let target = k as f64;
            (0..times.len())
                .min_by(|&a, &b| {
                    (times[a].log10() - target)
                        .abs()
                        .total_cmp(&(times[b].log10() - target).abs())
                })
                .expect("non-empty")
        })
        .collect();
    out.dedup();
    out
}

fn cmd_solve_cauchy(cfg: &RunConfig) -> Result<Outcome> {
    let grid = cfg.grid.build()?;
    let timegrid = cfg.timegrid.build()?;
    let u0 = cfg.datum.build(&grid, cfg.seed)?;
    let band = cfg.experiment.band.unwrap_or_else(|| NormBand::default_for(&grid));
    let opts = CauchyOptions {
        picard: cfg.experiment.picard(),
        band: Some(band),
        ..Default::default()
    };
    let sol = solve_cauchy_with(&u0, &cfg.force, &grid, &timegrid, &opts)?;
    let hash = config_hash(cfg)?;
    let times = sol.field.times();
    let nonlinear = sol.nonlinear_part()?;
    let rows = times
        .iter()
        .zip(sol.field.snapshots())
        .zip(&nonlinear)
        .map(|((t, u), nl)| Ok(vec![num(*t), num(pm_norm(u, 2.0, &band)?), num(pm_norm(nl, 0.0, &band)?)]))
        .collect::<Result<Vec<_>>>()?;
    write_csv(
        &cfg.output_dir.join("cauchy_norms.csv"),
        &["t", "pm2", "nonlinear_pm0"],
        &rows,
    )?;
    let keep = decade_nodes(times);
    let file = FieldFile::new(
        grid,
        keep.iter().map(|&i| times[i]).collect(),
        keep.iter().map(|&i| sol.field.snapshot(i).clone()).collect(),
    )?;
    let cert = &sol.certificate;
    save_with_sidecar(
        &cfg.output_dir,
        "cauchy",
        &file,
        &json!({
            "format_version": CONFIG_FORMAT_VERSION,
            "config_hash": hash,
            "snapshot_times": file.times,
            "certificate": certificate_json(cert),
        }),
    )?;
    Ok(Outcome {
        pass: cert.smallness_ok && cert.converged,
        summary: format!(
            "{} nodes, eta {:.4e}, predicted ratio {:.4}, smallness {}, residual {:.3e}",
            times.len(),
            cert.eta,
            cert.predicted_ratio,
            if cert.smallness_ok { "ok" } else { "violated" },
            cert.a_posteriori_residual
        ),
    })
}

fn cmd_solve_stationary(cfg: &RunConfig) -> Result<Outcome> {
    let grid = cfg.grid.build()?;
    let sol = solve_stationary_with(&cfg.force, &grid, cfg.experiment.picard(), cfg.experiment.band)?;
    let cert = &sol.certificate;
    save_with_sidecar(
        &cfg.output_dir,
        "stationary",
        &FieldFile::stationary(sol.field.clone()),
        &json!({
            "format_version": CONFIG_FORMAT_VERSION,
            "config_hash": config_hash(cfg)?,
            "bound_constant": sol.bound_constant,
            "certificate": certificate_json(cert),
        }),
    )?;
    Ok(Outcome {
        pass: cert.smallness_ok && cert.converged,
        summary: format!(
            "eta {:.4e}, predicted ratio {:.4}, smallness {}, |w|_PM2 {:.4e}",
            cert.eta,
            cert.predicted_ratio,
            if cert.smallness_ok { "ok" } else { "violated" },
            cert.solution_norm
        ),
    })
}

fn cmd_landau(cfg: &RunConfig) -> Result<Outcome> {
    let e = &cfg.experiment;
    let params = LandauParams::new(e.c.unwrap_or(2.0))?;
    let [r_min, r_max] = e.annulus.unwrap_or([0.5, 2.0]);
    let h = e.h.unwrap_or(1e-3);
    let tol = e.tolerance.unwrap_or(1e-5);
    let mut rows = Vec::new();
    let mut first = None;
    for k in 0..3 {
        let step = h / 2f64.powi(k);
        let r = landau_residual(&params, r_min, r_max, step)?;
        first.get_or_insert(r);
        rows.push(vec![
            num(step),
            num(r.residual),
            num(r.residual_raw),
            num(r.divergence),
            num(r.divergence_raw),
        ]);
    }
    let res = first.expect("three steps");
    write_csv(
        &cfg.output_dir.join("landau_residual.csv"),
        &["h", "residual", "residual_raw", "divergence", "divergence_raw"],
        &rows,
    )?;
    let grid = cfg.grid.build()?;
    let landau = RotatedLandau::new([params.beta1(), 0.0, 0.0])?;
    let (field, mask) = sample_landau(&landau, &grid, [0.0; 3]);
    save_with_sidecar(
        &cfg.output_dir,
        "landau",
        &FieldFile::stationary(to_fourier(&field)),
        &json!({
            "format_version": CONFIG_FORMAT_VERSION,
            "config_hash": config_hash(cfg)?,
            "c": params.c(),
            "beta1": params.beta1(),
            "masked_points": mask.iter().filter(|m| **m).count(),
            "residual": res,
        }),
    )?;
    let pass = res.residual <= tol;
    Ok(Outcome {
        pass,
        summary: format!(
            "c = {}, beta1 = {:.6e}, residual {:.3e} (tol {tol:e}), divergence {:.3e}",
            params.c(),
            params.beta1(),
            res.residual,
            res.divergence
        ),
    })
}

fn cmd_verify_norms(cfg: &RunConfig) -> Result<Outcome> {
    let grid = cfg.grid.build()?;
    let e = &cfg.experiment;
    let field = cfg.datum.build(&grid, cfg.seed)?;
    let band = e.band.unwrap_or_else(|| NormBand::default_for(&grid));
    let region = e.region.unwrap_or_else(|| Region::default_at_origin(&grid));
    let phys = to_physical(&field);
    let mut rows = Vec::new();
    let mut push = |name: String, v: f64| rows.push(vec![name, num(v)]);
    for b in e.b.clone().unwrap_or_else(|| vec![0.0, 1.0, 2.0]) {
        push(format!("pm_b{b}"), pm_norm(&field, b, &band)?);
    }
    for q in e.q.clone().unwrap_or_else(|| vec![2.0, 2.5]) {
        push(format!("lq_q{q}"), lq_norm(&phys, q, &region)?);
    }
    push("weak_l3".into(), weak_lq_norm(&phys, 3.0, &region)?);
    for (b, q) in [(0.0, 2.0), (2.5, 4.0)] {
        let gap = interpolation_gap(&field, b, q, &band, &region)?;
        push(format!("interpolation_ratio_b{b}_q{q}"), gap.ratio);
    }
    let pass = rows.iter().all(|r| r[1].parse::<f64>().is_ok_and(f64::is_finite));
    let count = rows.len();
    write_csv(&cfg.output_dir.join("norms.csv"), &["quantity", "value"], &rows)?;
    Ok(Outcome {
        pass,
        summary: format!("{count} norms written, all finite: {pass}"),
    })
}

fn save_reports(cfg: &RunConfig, reports: &[RateReport]) -> Result<Outcome> {
    for r in reports {
        r.save(&cfg.output_dir, &r.quantity)?;
    }
    write_json(
        &cfg.output_dir.join("summary.json"),
        &json!({
            "format_version": CONFIG_FORMAT_VERSION,
            "config_hash": config_hash(cfg)?,
            "reports": reports.iter().map(|r| json!({
                "quantity": r.quantity,
                "fitted_exponent": r.fitted_exponent,
                "theoretical_exponent": r.theoretical_exponent,
                "bound_type": r.bound_type,
                "pass": r.pass,
            })).collect::<Vec<_>>(),
        }),
    )?;
    Ok(Outcome {
        pass: reports.iter().all(|r| r.pass),
        summary: reports.iter().map(RateReport::summary).collect::<Vec<_>>().join("; "),
    })
}

fn cmd_rate_farfield(cfg: &RunConfig) -> Result<Outcome> {
    let grid = cfg.grid.build()?;
    let timegrid = cfg.timegrid.build()?;
    let e = &cfg.experiment;
    let u0 = cfg.datum.build(&grid, cfg.seed)?;
    let region = e.region.unwrap_or_else(|| Region::default_at_origin(&grid));
    let mut measures: Vec<RateMeasure> = Vec::new();
    let (qs, bs) = match (&e.q, &e.b) {
        (None, None) => (vec![2.0], vec![0.0]),
        (q, b) => (q.clone().unwrap_or_default(), b.clone().unwrap_or_default()),
    };
    measures.extend(qs.into_iter().map(|q| RateMeasure::Lq { q, region }));
    measures.extend(bs.into_iter().map(|b| RateMeasure::Pm { b }));
    let self_similar = matches!(cfg.datum, DatumConfig::Zero | DatumConfig::Homogeneous { .. })
        && matches!(cfg.force, ForceSpec::Zero | ForceSpec::Dirac { .. });
    let defaults = FarfieldOptions::default();
    let opts = FarfieldOptions {
        bound_type: e.bound_type.unwrap_or(if self_similar {
            BoundType::Equality
        } else {
            BoundType::UpperBound
        }),
        tolerance: e.tolerance.unwrap_or(defaults.tolerance),
        lq_window: e.lq_window,
        pm_window: e.pm_window,
        extrapolate: e.extrapolate,
        band: e.band,
        picard_tol: e.picard_tol,
        max_iter: e.max_iter,
    };
    let reports = run_farfield_rates(&u0, &cfg.force, &grid, &timegrid, &measures, &opts)?;
    save_reports(cfg, &reports)
}

fn cmd_rate_stability(cfg: &RunConfig) -> Result<Outcome> {
    let grid = cfg.grid.build()?;
    let e = &cfg.experiment;
    let g2 = cfg
        .force2
        .as_ref()
        .ok_or_else(|| PmError::arg("rate-stability needs force2"))?;
    let defaults = StabilityOptions::default();
    let opts = StabilityOptions {
        s_values: e.s_values.clone().unwrap_or(defaults.s_values),
        region: e.region,
        band: e.band,
        tolerance: e.tolerance.unwrap_or(defaults.tolerance),
        picard_tol: e.picard_tol,
    };
    let report = run_stationary_stability(&cfg.force, g2, e.first_b(1.5), e.first_q(2.5), &grid, &opts)?;
    save_reports(cfg, &[report])
}

fn cmd_rate_convergence(cfg: &RunConfig) -> Result<Outcome> {
    let grid = cfg.grid.build()?;
    let timegrid = cfg.timegrid.build()?;
    let e = &cfg.experiment;
    let u01 = cfg.datum.build(&grid, cfg.seed)?;
    let u02 = cfg
        .datum2
        .as_ref()
        .ok_or_else(|| PmError::arg("rate-convergence needs datum2"))?
        .build(&grid, cfg.seed.wrapping_add(1))?;
    let f2 = cfg.force2.clone().unwrap_or_else(|| cfg.force.clone());
    let defaults = ConvergenceOptions::default();
    let opts = ConvergenceOptions {
        region: e.region,
        band: e.band,
        window: e.lq_window,
        tolerance: e.tolerance.unwrap_or(defaults.tolerance),
        vanishing_fraction: defaults.vanishing_fraction,
        picard_tol: e.picard_tol.min(defaults.picard_tol),
    };
    let report = run_convergence_rate(
        &u01,
        &u02,
        &cfg.force,
        &f2,
        e.delta.unwrap_or(0.5),
        e.first_q(4.0),
        &grid,
        &timegrid,
        &opts,
    )?;
    save_reports(cfg, &[report])
}

fn cmd_riesz(cfg: &RunConfig) -> Result<Outcome> {
    let e = &cfg.experiment;
    let tol = e.tolerance.unwrap_or(5e-3);
    let mut rows = Vec::new();
    let mut pass = true;
    let mut worst: f64 = 0.0;
    for b in e.b.clone().unwrap_or_else(|| vec![2.0]) {
        let c = riesz_constant(b)?;
        let r = riesz_constant_reference(b)?;
        let rel = (c - r).abs() / r.abs();
        worst = worst.max(rel);
        pass &= rel <= tol;
        rows.push(vec![num(b), num(c), num(r), num(rel)]);
    }
    write_csv(
        &cfg.output_dir.join("riesz.csv"),
        &["b", "constant", "reference", "relative_difference"],
        &rows,
    )?;
    Ok(Outcome {
        pass,
        summary: format!("{} values, worst relative difference {worst:.3e} (tol {tol:e})", rows.len()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(v: &[&str]) -> CommonArgs {
        let mut argv = vec!["pmflow", "riesz"];
        argv.extend_from_slice(v);
        match Cli::try_parse_from(argv).unwrap().command {
            Command::Riesz(a) => a,
            _ => unreachable!(),
        }
    }

    #[test]
    fn defaults_decode() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.grid.n, 64);
        assert_eq!(cfg.force, ForceSpec::Zero);
        assert_eq!(cfg.datum, DatumConfig::Zero);
    }

    #[test]
    fn dotted_overrides_apply() {
        let cfg = resolve_config(&args(&[
            "--grid.n",
            "32",
            "--experiment.q",
            "2",
            "2.5",
            "--force",
            r#"{"kind":"dirac","beta":[0.5,0,0]}"#,
            "--output_dir=x",
        ]))
        .unwrap();
        assert_eq!(cfg.grid.n, 32);
        assert_eq!(cfg.experiment.q, Some(vec![2.0, 2.5]));
        assert_eq!(cfg.force, ForceSpec::dirac([0.5, 0.0, 0.0]));
        assert_eq!(cfg.output_dir, PathBuf::from("x"));
    }

    #[test]
    fn aliases_apply() {
        let cfg = resolve_config(&args(&["--c", "-3", "--annulus", "0.5", "2", "--out", "r"])).unwrap();
        assert_eq!(cfg.experiment.c, Some(-3.0));
        assert_eq!(cfg.experiment.annulus, Some([0.5, 2.0]));
        assert_eq!(cfg.output_dir, PathBuf::from("r"));
        // after the first dotted key the rest is collected as overrides
        let cfg = resolve_config(&args(&["--grid.n", "32", "--out", "s", "--c", "-3"])).unwrap();
        assert_eq!(cfg.output_dir, PathBuf::from("s"));
        assert_eq!(cfg.experiment.c, Some(-3.0));
    }

    #[test]
    fn unknown_key_reports_pointer() {
        match resolve_config(&args(&["--grid.nn", "32"])) {
            Err(PmError::Config { pointer, .. }) => assert_eq!(pointer, "/grid/nn"),
            other => panic!("{other:?}"),
        }
        match resolve_config(&args(&["--grid.n", "\"big\""])) {
            Err(PmError::Config { pointer, .. }) => assert_eq!(pointer, "/grid/n"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn pointer_formatting() {
        assert_eq!(json_pointer("force.masses[1]"), "/force/masses/1");
        assert_eq!(json_pointer("."), "");
    }

    #[test]
    fn decades() {
        let tg = TimeGrid::geometric(1e-2, 1e2, 2f64.powf(0.25)).unwrap();
        let idx = decade_nodes(tg.nodes());
        let picked: Vec<f64> = idx.iter().map(|&i| tg.nodes()[i]).collect();
        assert_eq!(picked.len(), 5);
        for (p, want) in picked.iter().zip([1e-2, 1e-1, 1.0, 1e1, 1e2]) {
            assert!((p / want).ln().abs() <= 0.5 * 2f64.ln());
        }
    }
}
