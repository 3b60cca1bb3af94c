//! Command-line front end.
//!
//! Exit codes: 0 success, 1 an `--assert`ed verdict did not hold, 2 input error.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use crate::bridge::{self, BridgeError};
use crate::classify::{self, ClassificationReport, ClassifyConfig, ClassifyError};
use crate::dual::{self, DualReport};
use crate::expr::{self, Expr, ParseError, K_MAX};
use crate::opsim::{self, Grid, OpError, SampledFunction};
use crate::repfit::{self, FitError};
use crate::verdict::{Check, Verdict};

pub const SCHEMA: u32 = 1;
pub const EXIT_OK: i32 = 0;
pub const EXIT_ASSERT: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

const FIT_POINTS: usize = 201;
const REPORT_CROSS_CHECK_ORDER: usize = 6;
const LIMIT_PROBES: [f64; 3] = [1e2, 1e3, 1e4];

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Classify,
    Dual,
    Bridge,
    Fit,
    Apply,
    Report,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Classify => "classify",
            Command::Dual => "dual",
            Command::Bridge => "bridge",
            Command::Fit => "fit",
            Command::Apply => "apply",
            Command::Report => "report",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "wts", version, about = "Classify weighted translation semigroups from their symbol")]
struct Flags {
    /// Pipeline to run.
    #[arg(value_enum)]
    command: Option<Command>,
    /// Symbol phi(x), e.g. "log(x+2)".
    #[arg(long)]
    symbol: Option<String>,
    /// Highest derivative order checked.
    #[arg(long)]
    order: Option<usize>,
    /// Right end of the sampling window.
    #[arg(long)]
    xmax: Option<f64>,
    /// Sample count (operator and fit grids) or number of shift weights (bridge).
    #[arg(long)]
    points: Option<usize>,
    /// Translation parameter; repeatable.
    #[arg(long = "t")]
    t: Vec<f64>,
    /// Atom grid: "lo:hi:count" (log-spaced) or a comma list.
    #[arg(long)]
    atoms: Option<String>,
    /// Upper end of the moment-fit support.
    #[arg(long)]
    amax: Option<f64>,
    /// Input CSV with header x,value.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Exit with status 1 unless this verdict holds.
    #[arg(long = "assert", value_name = "CLASS")]
    assert_class: Option<String>,
    /// JSON output for commands that default to CSV.
    #[arg(long)]
    json: bool,
    /// Flat key=value file with the same keys as the flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("parse error: {source}\n  {text}\n  {caret}")]
    Parse {
        offset: usize,
        text: String,
        caret: String,
        source: ParseError,
    },
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error(transparent)]
    Op(#[from] OpError),
    #[error(transparent)]
    Bridge(#[from] BridgeError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Fully resolved run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub symbol: Option<String>,
    pub order: usize,
    pub x_max: f64,
    pub points: Option<usize>,
    pub t_values: Vec<f64>,
    pub atoms: Vec<f64>,
    pub a_max: f64,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub assert_class: Option<String>,
    pub json: bool,
}

impl RunConfig {
    fn classify_config(&self) -> ClassifyConfig {
        let mut cfg = ClassifyConfig::with_order(self.order).with_x_max(self.x_max);
        if !self.t_values.is_empty() {
            cfg.t_values = self.t_values.clone();
        }
        cfg
    }

    fn expr(&self) -> Result<Expr, CliError> {
        let text = self
            .symbol
            .as_deref()
            .ok_or_else(|| CliError::Usage(format!("{} needs --symbol", self.command.name())))?;
        parse_symbol(text)
    }
}

pub fn parse_symbol(text: &str) -> Result<Expr, CliError> {
    expr::parse(text).map_err(|source| {
        let offset = source.offset();
        let col = text[..offset.min(text.len())].chars().count();
        CliError::Parse {
            offset,
            text: text.to_string(),
            caret: format!("{}^", " ".repeat(col)),
            source,
        }
    })
}

/// `lo:hi:count` gives log-spaced atoms; otherwise a comma-separated list.
pub fn parse_atoms(spec: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Usage(format!("invalid atom grid '{spec}'"));
    let parts: Vec<&str> = spec.split(':').map(str::trim).collect();
    match parts.as_slice() {
        [lo, hi, count] => {
            let lo: f64 = lo.parse().map_err(|_| bad())?;
            let hi: f64 = hi.parse().map_err(|_| bad())?;
            let count: usize = count.parse().map_err(|_| bad())?;
            Ok(repfit::log_atoms(lo, hi, count)?)
        }
        [list] => list
            .split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|_| bad()))
            .collect(),
        _ => Err(bad()),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("invalid value '{value}' for {key}")))
}

fn read_config_file(path: &Path, flags: &mut Flags) -> Result<(), CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut t_from_file = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("{}:{}: expected key=value", path.display(), lineno + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        // flags given on the command line win
        match key {
            "command" => {
                let cmd = Command::from_str(value, true).map_err(|_| CliError::Usage(format!("unknown command '{value}'")))?;
                flags.command.get_or_insert(cmd);
            }
            "symbol" => {
                flags.symbol.get_or_insert_with(|| value.to_string());
            }
            "order" => {
                let v = parse_num(key, value)?;
                flags.order.get_or_insert(v);
            }
            "xmax" => {
                let v = parse_num(key, value)?;
                flags.xmax.get_or_insert(v);
            }
            "points" => {
                let v = parse_num(key, value)?;
                flags.points.get_or_insert(v);
            }
            "t" => {
                for part in value.split(',') {
                    t_from_file.push(parse_num(key, part)?);
                }
            }
            "atoms" => {
                flags.atoms.get_or_insert_with(|| value.to_string());
            }
            "amax" => {
                let v = parse_num(key, value)?;
                flags.amax.get_or_insert(v);
            }
            "input" => {
                flags.input.get_or_insert_with(|| PathBuf::from(value));
            }
            "output" => {
                flags.output.get_or_insert_with(|| PathBuf::from(value));
            }
            "assert" => {
                flags.assert_class.get_or_insert_with(|| value.to_string());
            }
            "json" => {
                flags.json |= parse_num::<bool>(key, value)?;
            }
            _ => return Err(CliError::Usage(format!("{}:{}: unknown key '{key}'", path.display(), lineno + 1))),
        }
    }
    if flags.t.is_empty() {
        flags.t = t_from_file;
    }
    Ok(())
}

fn resolve(mut flags: Flags) -> Result<RunConfig, CliError> {
    if let Some(path) = flags.config.clone() {
        read_config_file(&path, &mut flags)?;
    }
    let command = flags.command.ok_or_else(|| CliError::Usage("no command given".into()))?;
    let order = flags.order.unwrap_or(K_MAX);
    if order > K_MAX {
        return Err(CliError::Usage(format!("order {order} exceeds {K_MAX}")));
    }
    let x_max = flags.xmax.unwrap_or(classify::DEFAULT_X_MAX);
    if !(x_max > 0.0 && x_max.is_finite()) {
        return Err(CliError::Usage(format!("xmax must be positive, got {x_max}")));
    }
    if flags.points == Some(0) {
        return Err(CliError::Usage("points must be positive".into()));
    }
    if let Some(t) = flags.t.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
        return Err(CliError::Usage(format!("t must be positive, got {t}")));
    }
    let atoms = match &flags.atoms {
        Some(spec) => parse_atoms(spec)?,
        None => repfit::default_atoms(),
    };
    let a_max = flags.amax.unwrap_or(1.0);
    if !(a_max > 0.0 && a_max.is_finite()) {
        return Err(CliError::Usage(format!("amax must be positive, got {a_max}")));
    }
    Ok(RunConfig {
        command,
        symbol: flags.symbol,
        order,
        x_max,
        points: flags.points,
        t_values: flags.t,
        atoms,
        a_max,
        input: flags.input,
        output: flags.output,
        assert_class: flags.assert_class,
        json: flags.json,
    })
}

/// Prints every finite float with 17 significant digits.
struct FixedFloats;

impl serde_json::ser::Formatter for FixedFloats {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema: u32,
    command: &'a str,
    #[serde(flatten)]
    body: T,
}

pub fn to_json<T: Serialize>(command: &str, body: T) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedFloats);
    Envelope { schema: SCHEMA, command, body }.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(buf)
}

fn emit(cfg: &RunConfig, bytes: &[u8], stdout: &mut dyn Write) -> Result<(), CliError> {
    match &cfg.output {
        Some(path) => fs::write(path, bytes).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        }),
        None => stdout.write_all(bytes).map_err(|source| CliError::Io { path: "<stdout>".into(), source }),
    }
}

fn write_side_file(path: PathBuf, write: impl FnOnce(&mut Vec<u8>) -> Result<(), CliError>) -> Result<(), CliError> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    fs::write(&path, buf).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

/// Outcome of an `--assert` lookup.
enum Asserted {
    Verdict(Verdict),
    Check(Check),
}

impl Asserted {
    fn holds(&self) -> bool {
        match self {
            Asserted::Verdict(v) => v.holds(),
            Asserted::Check(c) => c.passed(),
        }
    }
}

fn lookup_class(report: &ClassificationReport, name: &str) -> Option<Asserted> {
    report.verdict(name).cloned().map(Asserted::Verdict)
}

fn lookup_dual(report: &DualReport, name: &str) -> Option<Asserted> {
    let tc = &report.theorem_checks;
    let check = match name {
        "ca_implies_dual_cm" => &tc.ca_implies_dual_cm,
        "concave_implies_dual_log_convex" => &tc.concave_implies_dual_log_convex,
        "two_isometry_dual_cm" => &tc.two_isometry_dual_cm,
        "dual_cm" => &tc.dual_cm,
        _ => return name.strip_prefix("dual.").and_then(|c| lookup_class(&report.dual_classification, c)),
    };
    Some(Asserted::Check(check.clone()))
}

fn check_assert(cfg: &RunConfig, found: Option<Asserted>, stderr: &mut dyn Write) -> Result<i32, CliError> {
    let Some(name) = &cfg.assert_class else {
        return Ok(EXIT_OK);
    };
    let found = found.ok_or_else(|| CliError::Usage(format!("unknown class '{name}' for {}", cfg.command.name())))?;
    if found.holds() {
        Ok(EXIT_OK)
    } else {
        let _ = writeln!(stderr, "assertion failed: {name} does not hold");
        Ok(EXIT_ASSERT)
    }
}

#[derive(Serialize)]
struct DualOutput<'a> {
    symbol_classification: &'a ClassificationReport,
    #[serde(flatten)]
    dual: &'a DualReport,
}

#[derive(Serialize)]
struct FitOutput {
    symbol: Option<String>,
    sample_points: usize,
    x_max: f64,
    atoms: usize,
    cm: repfit::CmFit,
    ca: repfit::CaFit,
    subnormal: repfit::SubnormalFit,
}

#[derive(Serialize)]
struct ApplyOutput {
    symbol: String,
    t: Vec<f64>,
    x_max: f64,
    points: usize,
    input_norm: f64,
    output_norm: f64,
    values: Vec<f64>,
}

#[derive(Serialize)]
struct WeightLimit {
    t: f64,
    x_probe: f64,
    deviation: f64,
}

#[derive(Serialize)]
struct FullReport<'a> {
    symbol: String,
    classification: &'a ClassificationReport,
    cross_check: classify::CrossCheckReport,
    dual: &'a DualReport,
    bridge: bridge::BridgeReport,
    fits: FitOutput,
    weight_limits: Vec<WeightLimit>,
}

fn fit_samples(cfg: &RunConfig) -> Result<(Option<String>, SampledFunction), CliError> {
    if let Some(path) = &cfg.input {
        let file = fs::File::open(path).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })?;
        return Ok((None, SampledFunction::read_csv(file)?));
    }
    let e = cfg.expr()?;
    let g = Grid::new(cfg.x_max, cfg.points.unwrap_or(FIT_POINTS))?;
    Ok((Some(e.to_string()), opsim::sample(&e, g)?))
}

fn run_fits(cfg: &RunConfig) -> Result<FitOutput, CliError> {
    let (symbol, samples) = fit_samples(cfg)?;
    let s_grid = repfit::uniform_atoms(cfg.a_max, repfit::DEFAULT_S_POINTS)?;
    Ok(FitOutput {
        symbol,
        sample_points: samples.grid().len(),
        x_max: samples.grid().x_max(),
        atoms: cfg.atoms.len(),
        cm: repfit::fit_cm(&samples, &cfg.atoms)?,
        ca: repfit::fit_ca(&samples, &cfg.atoms)?,
        subnormal: repfit::fit_subnormal(&samples, cfg.a_max, &s_grid)?,
    })
}

fn bridge_length(cfg: &RunConfig) -> usize {
    cfg.points.unwrap_or(bridge::DEFAULT_LENGTH)
}

fn weight_limits(e: &Expr) -> Result<Vec<WeightLimit>, CliError> {
    LIMIT_PROBES
        .iter()
        .map(|&x| {
            Ok(WeightLimit {
                t: 1.0,
                x_probe: x,
                deviation: repfit::weight_limit_check(e, 1.0, x)?,
            })
        })
        .collect()
}

fn execute(cfg: &RunConfig, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32, CliError> {
    let name = cfg.command.name();
    match cfg.command {
        Command::Classify => {
            let e = cfg.expr()?;
            let report = classify::classify(&e, &cfg.classify_config())?;
            emit(cfg, &to_json(name, &report)?, stdout)?;
            let found = cfg.assert_class.as_deref().and_then(|c| lookup_class(&report, c));
            check_assert(cfg, found, stderr)
        }
        Command::Dual => {
            let e = cfg.expr()?;
            let (symbol, report) = dual::dual_report(&e, &cfg.classify_config())?;
            let out = DualOutput { symbol_classification: &symbol, dual: &report };
            emit(cfg, &to_json(name, &out)?, stdout)?;
            let found = cfg
                .assert_class
                .as_deref()
                .and_then(|c| lookup_dual(&report, c).or_else(|| lookup_class(&symbol, c)));
            check_assert(cfg, found, stderr)
        }
        Command::Bridge => {
            let e = cfg.expr()?;
            let order = cfg.order.min(bridge_length(cfg));
            let report = bridge::bridge_report(&e, bridge_length(cfg), order, classify::DEFAULT_TOL)?;
            if cfg.json {
                emit(cfg, &to_json(name, &report)?, stdout)?;
            } else {
                let mut buf = Vec::new();
                report.weights.write_csv(&mut buf)?;
                emit(cfg, &buf, stdout)?;
            }
            let found = cfg.assert_class.as_deref().and_then(|c| match c {
                "completely_monotone" => Some(Asserted::Verdict(report.beta_classes.completely_monotone.clone())),
                "completely_alternating" => Some(Asserted::Verdict(report.beta_classes.completely_alternating.clone())),
                "dual_completely_monotone" => Some(Asserted::Verdict(report.reciprocal_classes.completely_monotone.clone())),
                _ => None,
            });
            check_assert(cfg, found, stderr)
        }
        Command::Fit => {
            let out = run_fits(cfg)?;
            emit(cfg, &to_json(name, &out)?, stdout)?;
            if let Some(base) = &cfg.output {
                write_side_file(with_suffix(base, ".cm.csv"), |b| Ok(out.cm.measure.write_csv(b)?))?;
                write_side_file(with_suffix(base, ".ca.csv"), |b| Ok(out.ca.triple.measure.write_csv(b)?))?;
                write_side_file(with_suffix(base, ".moment.csv"), |b| Ok(out.subnormal.measure.write_csv(b)?))?;
            }
            let found = cfg.assert_class.as_deref().and_then(|c| {
                let ok = match c {
                    "cm_representable" => out.cm.representable,
                    "ca_representable" => out.ca.representable,
                    "moment_representable" => out.subnormal.representable,
                    _ => return None,
                };
                Some(Asserted::Check(if ok { Check::Pass } else { Check::Fail { witnesses: Vec::new() } }))
            });
            check_assert(cfg, found, stderr)
        }
        Command::Apply => {
            let e = cfg.expr()?;
            let path = cfg.input.as_ref().ok_or_else(|| CliError::Usage("apply needs --input".into()))?;
            let file = fs::File::open(path).map_err(|source| CliError::Io {
                path: path.display().to_string(),
                source,
            })?;
            let f = SampledFunction::read_csv(file)?;
            let ts = if cfg.t_values.is_empty() { vec![1.0] } else { cfg.t_values.clone() };
            let mut g = f.clone();
            for &t in &ts {
                g = opsim::apply_st(&e, t, &g)?;
            }
            if cfg.json {
                let grid = g.grid();
                let out = ApplyOutput {
                    symbol: e.to_string(),
                    t: ts,
                    x_max: grid.x_max(),
                    points: grid.len(),
                    input_norm: f.norm(),
                    output_norm: g.norm(),
                    values: g.values().to_vec(),
                };
                emit(cfg, &to_json(name, &out)?, stdout)?;
            } else {
                let mut buf = Vec::new();
                g.write_csv(&mut buf)?;
                emit(cfg, &buf, stdout)?;
            }
            if cfg.assert_class.is_some() {
                return check_assert(cfg, None, stderr);
            }
            Ok(EXIT_OK)
        }
        Command::Report => {
            let e = cfg.expr()?;
            let ccfg = cfg.classify_config();
            let (symbol, dual_report) = dual::dual_report(&e, &ccfg)?;
            let cross_check = classify::cross_check(&e, REPORT_CROSS_CHECK_ORDER.min(cfg.order), &ccfg)?;
            let order = cfg.order.min(bridge_length(cfg));
            let bridge = bridge::bridge_report(&e, bridge_length(cfg), order, classify::DEFAULT_TOL)?;
            let fit_cfg = RunConfig { points: None, input: None, ..cfg.clone() };
            let out = FullReport {
                symbol: e.to_string(),
                classification: &symbol,
                cross_check,
                dual: &dual_report,
                bridge,
                fits: run_fits(&fit_cfg)?,
                weight_limits: weight_limits(&e)?,
            };
            emit(cfg, &to_json(name, &out)?, stdout)?;
            let found = cfg
                .assert_class
                .as_deref()
                .and_then(|c| lookup_class(&symbol, c).or_else(|| lookup_dual(&dual_report, c)));
            check_assert(cfg, found, stderr)
        }
    }
}

/// Parses `args` (program name first) and runs; returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let flags = match Flags::try_parse_from(args) {
        Ok(f) => f,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { stderr.write_all(text.as_bytes()) } else { stdout.write_all(text.as_bytes()) };
            return code;
        }
    };
    let result = resolve(flags).and_then(|cfg| execute(&cfg, stdout, stderr));
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_INPUT
        }
    }
}
