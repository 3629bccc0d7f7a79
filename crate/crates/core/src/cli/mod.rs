//! Command-line interface.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime error, 3 acceptance
//! failure (`reproduce` only).

mod reproduce;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::Error;
use crate::estimators::{estimate, estimate_correlations, ObservableId, WcpProjection};
use crate::io::{self, fmt_f64, CsvTable, EstimateRecord, EventFormat};
use crate::magic::{sre_m2, MagicReport, M2_MAX};
use crate::montecarlo::{sample_events_with, EventSample, KernelSign, RngStream};
use crate::qi_measures::MeasureReport;
use crate::sensitivity::{Engine, SensitivityCurve, SignificanceConfig, SpreadConvention, HL_LHC_YIELD};
use crate::spinstate::{density_matrix, state_vector, PhaseAngle};

pub use reproduce::{reproduce, Criterion, ReproduceConfig, ReproduceReport};

pub const DEFAULT_SEED: u64 = 20_240_601;
const DEFAULT_SCAN_GRID: &str = "0:pi/2:pi/32";
const DEFAULT_MEASURES_GRID: &str = "0:pi:pi/100";

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(Error),
    Acceptance(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Runtime(_) => 2,
            CliError::Acceptance(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Runtime(e) => write!(f, "error: {e}"),
            CliError::Acceptance(m) => write!(f, "acceptance failed: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::EmptyGrid => CliError::Usage(e.to_string()),
            e => CliError::Runtime(e),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Usage(msg.into()))
}

#[derive(Debug, Parser)]
#[command(name = "cpmagic", version, about = "Magic, entanglement and CP-phase sensitivity of two-spin decay states")]
pub struct Cli {
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Spectrum measures and magic quantities on an α grid.
    Measures(MeasuresArgs),
    /// Generate decay events at one α.
    Generate(GenerateArgs),
    /// Estimate observables from an event file or a fresh sample.
    Estimate(EstimateArgs),
    /// Significance and N₅σ scan.
    Sensitivity(SensitivityArgs),
    /// Regenerate all tables and check them against reference values.
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EventFormatArg {
    Csv,
    Bin,
}

#[derive(Debug, Clone, Args)]
pub struct AngleArgs {
    /// Single phase, e.g. `0.3`, `pi/8`, `3pi/8`.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "alpha_grid")]
    pub alpha: Option<String>,

    /// Grid `start:stop:step`, inclusive of `stop`.
    #[arg(long)]
    pub alpha_grid: Option<String>,

    /// Read angles as degrees.
    #[arg(long)]
    pub degrees: bool,
}

impl AngleArgs {
    fn angles(&self, default_grid: &str) -> CliResult<Vec<PhaseAngle>> {
        if let Some(a) = &self.alpha {
            return Ok(vec![to_angle(parse_angle(a)?, self.degrees)]);
        }
        let spec = self.alpha_grid.as_deref().unwrap_or(default_grid);
        let deg = self.degrees && self.alpha_grid.is_some();
        Ok(parse_grid(spec)?.into_iter().map(|x| to_angle(x, deg)).collect())
    }

    fn single(&self) -> CliResult<PhaseAngle> {
        if self.alpha_grid.is_some() {
            return usage("this command takes --alpha, not --alpha-grid");
        }
        match &self.alpha {
            Some(a) => Ok(to_angle(parse_angle(a)?, self.degrees)),
            None => usage("--alpha is required"),
        }
    }
}

fn to_angle(x: f64, degrees: bool) -> PhaseAngle {
    if degrees {
        PhaseAngle::from_degrees(x)
    } else {
        PhaseAngle::new(x)
    }
}

/// Parses `0.3`, `pi`, `-pi/4`, `3pi/8`, `3*pi/8`, `2.5pi`.
pub fn parse_angle(text: &str) -> CliResult<f64> {
    let s = text.trim().to_ascii_lowercase();
    let bad = || CliError::Usage(format!("cannot parse angle '{text}'"));
    let value = match s.split_once("pi") {
        None => s.parse::<f64>().map_err(|_| bad())?,
        Some((coef, rest)) => {
            let coef = coef.trim().trim_end_matches('*').trim();
            let c = match coef {
                "" | "+" => 1.0,
                "-" => -1.0,
                c => c.parse::<f64>().map_err(|_| bad())?,
            };
            let rest = rest.trim();
            let d = if rest.is_empty() {
                1.0
            } else {
                let den = rest.strip_prefix('/').ok_or_else(bad)?;
                den.trim().parse::<f64>().map_err(|_| bad())?
            };
            c * std::f64::consts::PI / d
        }
    };
    if !value.is_finite() {
        return Err(bad());
    }
    Ok(value)
}

/// `start:stop:step` with `stop` included up to rounding.
pub fn parse_grid(spec: &str) -> CliResult<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return usage(format!("grid '{spec}' is not start:stop:step"));
    }
    let (start, stop, step) = (parse_angle(parts[0])?, parse_angle(parts[1])?, parse_angle(parts[2])?);
    if step <= 0.0 {
        return usage(format!("grid step must be positive, got {step}"));
    }
    if stop < start {
        return usage(format!("grid '{spec}' is empty"));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|k| start + k as f64 * step).collect())
}

fn parse_observables(text: &str) -> CliResult<Vec<ObservableId>> {
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let id: ObservableId = part.parse().map_err(|e: Error| CliError::Usage(e.to_string()))?;
        if !out.contains(&id) {
            out.push(id);
        }
    }
    if out.is_empty() {
        return usage("no observables given");
    }
    Ok(out)
}

fn require_events(n: usize) -> CliResult<usize> {
    if n == 0 {
        return usage("--events must be positive");
    }
    Ok(n)
}

#[derive(Debug, Args)]
pub struct MeasuresArgs {
    #[command(flatten)]
    pub angles: AngleArgs,

    #[arg(long, value_enum, default_value = "csv")]
    pub format: OutFormat,

    /// Output file; stdout if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub angles: AngleArgs,

    #[arg(long)]
    pub events: usize,

    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,

    #[arg(long, default_value_t = 0)]
    pub stream: u64,

    /// Defaults to CSV for `.csv` paths and binary otherwise.
    #[arg(long, value_enum)]
    pub format: Option<EventFormatArg>,

    #[arg(long)]
    pub out: PathBuf,

    #[arg(long, default_value = "minus-C")]
    pub convention_kernel_sign: KernelSign,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Event file written by `generate`.
    #[arg(long, conflicts_with_all = ["alpha", "events"])]
    pub input: Option<PathBuf>,

    #[command(flatten)]
    pub angles: AngleArgs,

    #[arg(long)]
    pub events: Option<usize>,

    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,

    /// Comma-separated: tomo, aco, qcp, wcp, m2.
    #[arg(long, default_value = "qcp,wcp,m2")]
    pub observables: String,

    /// Null phase for the tomo and aco statistics.
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    pub alpha0: String,

    /// Sample size the ±1σ band is quoted at.
    #[arg(long, default_value_t = HL_LHC_YIELD)]
    pub band_events: usize,

    #[arg(long, value_enum, default_value = "json")]
    pub format: OutFormat,

    #[arg(long)]
    pub out: Option<PathBuf>,

    #[arg(long, default_value = "minus-C")]
    pub convention_kernel_sign: KernelSign,
}

#[derive(Debug, Clone, Args)]
pub struct EngineArgs {
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,

    /// Sub-samples per pool.
    #[arg(long, default_value_t = 500)]
    pub subsamples: usize,

    /// Events per pool at the reference size.
    #[arg(long, default_value_t = 1_000_000)]
    pub pool: usize,

    #[arg(long, default_value_t = 1.0)]
    pub reduction_factor: f64,

    #[arg(long, default_value = "minus-C")]
    pub convention_kernel_sign: KernelSign,

    /// Spread in the Z denominator: null or signal.
    #[arg(long, default_value = "null")]
    pub convention_null_spread: SpreadConvention,

    /// W_CP inside Z: raw or clamped to [3, 4].
    #[arg(long, default_value = "raw")]
    pub wcp_projection: WcpProjection,

    /// Draw signal and null pools from independent streams.
    #[arg(long)]
    pub independent_pools: bool,

    #[arg(long, default_value_t = HL_LHC_YIELD)]
    pub n_target: usize,
}

impl EngineArgs {
    fn config(&self) -> CliResult<SignificanceConfig> {
        let cfg = SignificanceConfig {
            pool_size: self.pool,
            n_subsamples: self.subsamples,
            reduction_factor: self.reduction_factor,
            spread: self.convention_null_spread,
            wcp_projection: self.wcp_projection,
            kernel: self.convention_kernel_sign,
            common_random_numbers: !self.independent_pools,
            n_target: self.n_target,
            ..SignificanceConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct SensitivityArgs {
    #[command(flatten)]
    pub angles: AngleArgs,

    #[command(flatten)]
    pub engine: EngineArgs,

    /// Comma-separated: tomo, aco, qcp, wcp, m2.
    #[arg(long, default_value = "tomo,aco,qcp,wcp")]
    pub observables: String,

    /// Leave out the flat spectrum-measure rows.
    #[arg(long)]
    pub no_qi: bool,

    #[arg(long, value_enum, default_value = "csv")]
    pub format: OutFormat,

    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,

    /// Sensitivity-scan grid.
    #[arg(long)]
    pub alpha_grid: Option<String>,

    #[arg(long)]
    pub degrees: bool,

    /// Events per α for the Monte Carlo magic curves and moment checks.
    #[arg(long, default_value_t = 1_000_000)]
    pub events: usize,

    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,

    #[arg(long, default_value_t = 500)]
    pub subsamples: usize,

    #[arg(long, default_value_t = 1_000_000)]
    pub pool: usize,

    /// Degradation factor for the reduced-significance table.
    #[arg(long, default_value_t = 4.0)]
    pub reduction_factor: f64,
}

/// Parses `args` (including the program name), runs, and returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                write!(stdout, "{text}")
            } else {
                write!(stderr, "{text}")
            };
            return code;
        }
    };
    match execute(cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "{e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli, stdout: &mut dyn Write) -> CliResult<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return usage("--threads must be positive");
        }
        // A second call in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    match cli.command {
        Command::Measures(a) => measures(a, stdout),
        Command::Generate(a) => generate(a, stdout),
        Command::Estimate(a) => estimate_cmd(a, stdout),
        Command::Sensitivity(a) => sensitivity(a, stdout),
        Command::Reproduce(a) => reproduce_cmd(a, stdout),
    }
}

fn emit(out: Option<&Path>, text: &str, stdout: &mut dyn Write) -> CliResult<()> {
    match out {
        Some(p) => io::write_text(p, text).map_err(CliError::Runtime),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Runtime(Error::io("<stdout>", e))),
    }
}

fn json_text<T: Serialize>(value: &T) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.into()))?;
    s.push('\n');
    Ok(s)
}

#[derive(Debug, Serialize)]
struct Envelope<T: Serialize> {
    schema_version: u32,
    code_version: &'static str,
    #[serde(flatten)]
    body: T,
}

fn envelope<T: Serialize>(body: T) -> Envelope<T> {
    Envelope {
        schema_version: io::SCHEMA_VERSION,
        code_version: io::CODE_VERSION,
        body,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MeasuresRow {
    pub alpha: f64,
    pub concurrence: f64,
    pub negativity: f64,
    pub entropy: f64,
    pub chsh: f64,
    pub qfi: f64,
    pub m2_norm: f64,
    pub m2_bits: f64,
    pub xi: f64,
    pub w_cp: f64,
    pub q_cp: f64,
}

pub const MEASURES_COLUMNS: [&str; 11] = [
    "alpha",
    "concurrence",
    "negativity",
    "entropy",
    "chsh",
    "qfi",
    "m2_norm",
    "m2_bits",
    "xi",
    "w_cp",
    "q_cp",
];

/// Spectrum measures are normalized by their maxima; `M₂` comes from the
/// Pauli spectrum of ρ.
pub fn measures_rows(grid: &[PhaseAngle]) -> crate::Result<Vec<MeasuresRow>> {
    grid.iter()
        .map(|&a| {
            let r = MeasureReport::at(a)?;
            let n = r.normalized();
            let m2 = sre_m2(&density_matrix(&state_vector(a))?)?;
            let mag = MagicReport::at(a);
            Ok(MeasuresRow {
                alpha: a.radians(),
                concurrence: n[0],
                negativity: n[1],
                entropy: n[2],
                chsh: n[3],
                qfi: n[4],
                m2_norm: m2 / M2_MAX,
                m2_bits: m2,
                xi: mag.xi,
                w_cp: mag.w_cp,
                q_cp: mag.q_cp,
            })
        })
        .collect()
}

pub fn measures_table(rows: &[MeasuresRow]) -> CsvTable {
    let mut t = CsvTable::new(&MEASURES_COLUMNS).with_meta("code_version", io::CODE_VERSION);
    for r in rows {
        t.push(
            [
                r.alpha,
                r.concurrence,
                r.negativity,
                r.entropy,
                r.chsh,
                r.qfi,
                r.m2_norm,
                r.m2_bits,
                r.xi,
                r.w_cp,
                r.q_cp,
            ]
            .iter()
            .map(|&x| fmt_f64(x))
            .collect(),
        );
    }
    t
}

fn measures(a: MeasuresArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let grid = a.angles.angles(DEFAULT_MEASURES_GRID)?;
    let rows = measures_rows(&grid)?;
    let text = match a.format {
        OutFormat::Csv => measures_table(&rows).render(),
        OutFormat::Json => {
            #[derive(Serialize)]
            struct Body {
                rows: Vec<MeasuresRow>,
            }
            json_text(&envelope(Body { rows }))?
        }
    };
    emit(a.out.as_deref(), &text, stdout)
}

fn generate(a: GenerateArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let alpha = a.angles.single()?;
    let n = require_events(a.events)?;
    let format = match a.format {
        Some(EventFormatArg::Csv) => EventFormat::Csv,
        Some(EventFormatArg::Bin) => EventFormat::Binary,
        None => EventFormat::from_path(&a.out),
    };
    let sample = sample_events_with(alpha, n, &RngStream::with_stream(a.seed, a.stream), a.convention_kernel_sign)?;
    io::write_events(&a.out, &sample, format)?;
    let c = estimate_correlations(sample.view())?;
    let mut text = format!("wrote {n} events at alpha={} to {}\n", alpha.radians(), a.out.display());
    for (i, axis) in ["x", "y", "z"].iter().enumerate() {
        for (j, other) in ["x", "y", "z"].iter().enumerate() {
            text.push_str(&format!(
                "c_{axis}{other} = {:+.5} +- {:.5}\n",
                c.c_hat[(i, j)],
                c.std_errors[(i, j)]
            ));
        }
    }
    emit(None, &text, stdout)
}

fn estimate_cmd(a: EstimateArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let observables = parse_observables(&a.observables)?;
    let alpha0 = PhaseAngle::new(parse_angle(&a.alpha0)?);
    if a.band_events == 0 {
        return usage("--band-events must be positive");
    }
    let sample: EventSample = match &a.input {
        Some(p) => io::read_events(p)?,
        None => {
            let alpha = a.angles.single()?;
            let n = match a.events {
                Some(n) => require_events(n)?,
                None => return usage("--events is required without --input"),
            };
            sample_events_with(alpha, n, &RngStream::new(a.seed), a.convention_kernel_sign)?
        }
    };
    let records = observables
        .iter()
        .map(|&obs| {
            let e = estimate(obs, sample.view(), alpha0)?;
            Ok(EstimateRecord::new(&e, sample.alpha_true, sample.seed, a.band_events))
        })
        .collect::<crate::Result<Vec<_>>>()?;
    let text = match a.format {
        OutFormat::Json => json_text(&records)?,
        OutFormat::Csv => {
            let mut t = CsvTable::new(&[
                "observable_id",
                "value",
                "std_error",
                "n_events",
                "alpha_true",
                "seed",
                "raw_value",
                "clamped",
                "band_events",
                "band",
            ])
            .with_meta("code_version", io::CODE_VERSION);
            for r in &records {
                t.push(vec![
                    r.observable_id.clone(),
                    fmt_f64(r.value),
                    fmt_f64(r.std_error),
                    r.n_events.to_string(),
                    fmt_f64(r.alpha_true),
                    r.seed.to_string(),
                    fmt_f64(r.raw_value),
                    r.clamped.to_string(),
                    r.band_events.to_string(),
                    fmt_f64(r.band),
                ]);
            }
            t.render()
        }
    };
    emit(a.out.as_deref(), &text, stdout)
}

pub const SCAN_COLUMNS: [&str; 11] = [
    "alpha",
    "observable",
    "n_sub",
    "Z",
    "N5sigma",
    "n_subsamples",
    "pool_size",
    "seed",
    "reduction_factor",
    "n_target",
    "Z_target",
];

/// Provenance carried by sensitivity outputs.
#[derive(Debug, Clone, Serialize)]
pub struct ScanProvenance {
    pub kernel: &'static str,
    pub spread: &'static str,
    pub wcp_projection: &'static str,
    pub common_random_numbers: bool,
    pub alpha_null: f64,
    pub target_z: f64,
}

impl ScanProvenance {
    pub fn of(cfg: &SignificanceConfig) -> Self {
        ScanProvenance {
            kernel: cfg.kernel.tag(),
            spread: cfg.spread.tag(),
            wcp_projection: match cfg.wcp_projection {
                WcpProjection::Raw => "raw",
                WcpProjection::Clamped => "clamped",
            },
            common_random_numbers: cfg.common_random_numbers,
            alpha_null: cfg.alpha_null.radians(),
            target_z: cfg.target_z,
        }
    }
}

pub fn scan_table(curve: &SensitivityCurve, cfg: &SignificanceConfig) -> CsvTable {
    let p = ScanProvenance::of(cfg);
    let mut t = CsvTable::new(&SCAN_COLUMNS)
        .with_meta("code_version", io::CODE_VERSION)
        .with_meta("kernel", p.kernel)
        .with_meta("spread", p.spread)
        .with_meta("wcp_projection", p.wcp_projection)
        .with_meta("common_random_numbers", p.common_random_numbers)
        .with_meta("alpha_null", fmt_f64(p.alpha_null))
        .with_meta("target_z", fmt_f64(p.target_z));
    for r in &curve.rows {
        t.push(vec![
            fmt_f64(r.alpha),
            r.observable.clone(),
            r.n_sub.to_string(),
            fmt_f64(r.z),
            fmt_f64(r.n5sigma),
            r.n_subsamples.to_string(),
            r.pool_size.to_string(),
            r.seed.to_string(),
            fmt_f64(r.reduction_factor),
            r.n_target.to_string(),
            fmt_f64(r.z_target),
        ]);
    }
    t
}

pub fn scan_json(curve: &SensitivityCurve, cfg: &SignificanceConfig) -> crate::Result<String> {
    #[derive(Serialize)]
    struct Body<'a> {
        provenance: ScanProvenance,
        rows: &'a [crate::sensitivity::ScanRow],
    }
    let mut s = serde_json::to_string_pretty(&envelope(Body {
        provenance: ScanProvenance::of(cfg),
        rows: &curve.rows,
    }))?;
    s.push('\n');
    Ok(s)
}

fn sensitivity(a: SensitivityArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let grid = a.angles.angles(DEFAULT_SCAN_GRID)?;
    let observables = parse_observables(&a.observables)?;
    let cfg = a.engine.config()?;
    let engine = Engine::new(cfg, RngStream::new(a.engine.seed))?;
    let curve = engine.scan(&observables, &grid, !a.no_qi)?;
    let text = match a.format {
        OutFormat::Csv => scan_table(&curve, &cfg).render(),
        OutFormat::Json => scan_json(&curve, &cfg)?,
    };
    emit(a.out.as_deref(), &text, stdout)
}

fn reproduce_cmd(a: ReproduceArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let grid = match &a.alpha_grid {
        Some(g) => parse_grid(g)?.into_iter().map(|x| to_angle(x, a.degrees)).collect(),
        None => parse_grid(DEFAULT_SCAN_GRID)?.into_iter().map(PhaseAngle::new).collect(),
    };
    let cfg = ReproduceConfig {
        seed: a.seed,
        events: require_events(a.events)?,
        pool: a.pool,
        subsamples: a.subsamples,
        scan_grid: grid,
        reduction_factor: a.reduction_factor,
    };
    let report = reproduce(&cfg, &a.out)?;
    let w = |e| CliError::Runtime(Error::io("<stdout>", e));
    for c in &report.criteria {
        writeln!(stdout, "{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail).map_err(w)?;
    }
    let failed: Vec<&str> = report.criteria.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Acceptance(failed.join(", ")))
    }
}
