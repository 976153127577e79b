//! Command-line front end: TOML run configuration, subcommands and CSV
//! output with a `#` provenance header.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Deserialize;

use crate::error::Error;
use crate::explore::{optimize, reproduce, sweep, Axis, FigureData, Objective, OptimizeSpec, SweepSpec, Table};
use crate::par::Execution;
use crate::rate::{ProtocolConfig, RateReport};
use crate::verify::{run_all, VerifyOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "catrep",
    version,
    about = "Key rates of multiplexed cat-code repeater chains"
)]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output file (sweep, optimize, verify) or directory (reproduce).
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Evaluate on the current thread only.
    #[arg(long, global = true)]
    pub sequential: bool,
    /// Progress messages on stderr.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate the rate model on the grid in `[sweep]`.
    Sweep,
    /// Maximise the objective over alpha and the channel count.
    Optimize,
    /// Run the oracle self-checks.
    Verify {
        /// Relative error injected into the series coefficient C_1.
        #[arg(long, hide = true, default_value_t = 0.0)]
        perturb_series: f64,
    },
    /// Regenerate the data behind a figure (2, 3, 4, 5 or 6).
    Reproduce { id: u8 },
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub protocol: ProtocolConfig,
    pub sweep: SweepSection,
    pub optimize: OptimizeSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub objective: Objective,
    pub relaxed: bool,
    pub axis: Vec<AxisSection>,
}

/// Either explicit `values` or `start`, `stop`, `points` (optionally
/// logarithmic).
#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AxisSection {
    pub name: String,
    pub values: Option<Vec<f64>>,
    pub start: Option<f64>,
    pub stop: Option<f64>,
    pub points: Option<usize>,
    pub log: bool,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizeSection {
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub alpha_points: usize,
    pub m_max: usize,
    pub objective: Objective,
    pub refine: bool,
    pub relaxed: bool,
}

impl Default for OptimizeSection {
    fn default() -> Self {
        let d = OptimizeSpec::default();
        Self {
            alpha_min: d.alpha_min,
            alpha_max: d.alpha_max,
            alpha_points: d.alpha_points,
            m_max: d.m_max,
            objective: d.objective,
            refine: d.refine,
            relaxed: d.relaxed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub path: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Model(#[from] Error),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => EXIT_CONFIG,
            CliError::Model(e) => match e {
                Error::InvalidParameter { .. } | Error::UnknownAxis(_) | Error::Unsupported(_) => EXIT_CONFIG,
                _ => EXIT_NUMERIC,
            },
        }
    }
}

impl AxisSection {
    pub fn grid(&self) -> Result<(Axis, Vec<f64>), CliError> {
        let axis: Axis = self.name.parse()?;
        let bad = |msg: &str| CliError::Config(format!("axis `{}`: {msg}", self.name));
        let values = match (&self.values, self.start, self.stop, self.points) {
            (Some(v), None, None, None) => v.clone(),
            (None, Some(a), Some(b), Some(n)) if n >= 1 => {
                if n == 1 {
                    vec![a]
                } else if self.log {
                    if !(a > 0.0 && b > 0.0) {
                        return Err(bad("logarithmic grids need positive bounds"));
                    }
                    (0..n)
                        .map(|i| {
                            let t = i as f64 / (n - 1) as f64;
                            10f64.powf(a.log10() + t * (b.log10() - a.log10()))
                        })
                        .collect()
                } else {
                    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
                }
            }
            _ => return Err(bad("give either `values` or all of `start`, `stop`, `points`")),
        };
        Ok((axis, values))
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn sweep_spec(&self, execution: Execution) -> Result<SweepSpec, CliError> {
        let mut axes = self
            .sweep
            .axis
            .iter()
            .map(AxisSection::grid)
            .collect::<Result<Vec<_>, _>>()?;
        if axes.is_empty() {
            axes.push((Axis::Alpha, vec![self.protocol.alpha]));
        }
        Ok(SweepSpec {
            base: self.protocol.clone(),
            axes,
            objective: self.sweep.objective,
            relaxed: self.sweep.relaxed,
            execution,
        })
    }

    pub fn optimize_spec(&self, execution: Execution) -> OptimizeSpec {
        let o = &self.optimize;
        OptimizeSpec {
            alpha_min: o.alpha_min,
            alpha_max: o.alpha_max,
            alpha_points: o.alpha_points,
            m_max: o.m_max,
            objective: o.objective,
            refine: o.refine,
            relaxed: o.relaxed,
            execution,
        }
    }
}

/// Shortest decimal that parses back to the same `f64`.
pub fn format_float(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || !v.is_finite() || (1e-5..1e16).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn comment_block(out: &mut String, text: &str) {
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let _ = writeln!(out, "# {line}");
    }
}

fn provenance(command: &str, protocol: Option<&ProtocolConfig>, extra: &[(String, String)]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# catrep {} {command}", env!("CARGO_PKG_VERSION"));
    for (k, v) in extra {
        let _ = writeln!(out, "# {k} = {v}");
    }
    if let Some(p) = protocol {
        let _ = writeln!(out, "# [protocol]");
        comment_block(&mut out, &toml::to_string(p).unwrap_or_default());
    }
    out
}

fn csv_text(header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    // writing into memory cannot fail
    w.write_record(header).expect("in-memory csv");
    for r in rows {
        w.write_record(&r).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("csv output is utf-8")
}

fn report_header() -> Vec<String> {
    RateReport::FIELDS.iter().map(|s| s.to_string()).collect()
}

fn report_cells(r: &RateReport) -> Vec<String> {
    r.values().iter().map(|&v| format_float(v)).collect()
}

/// CSV text of a sweep.
pub fn sweep_csv(config: &RunConfig, execution: Execution) -> Result<String, CliError> {
    let spec = config.sweep_spec(execution)?;
    let table = sweep(&spec)?;
    let mut header: Vec<String> = table.axes.iter().map(|a| a.name().to_string()).collect();
    header.push("objective".into());
    header.extend(report_header());
    let extra = vec![
        ("objective".to_string(), spec.objective.name().to_string()),
        ("relaxed".to_string(), spec.relaxed.to_string()),
    ];
    let mut out = provenance("sweep", Some(&spec.base), &extra);
    let rows = table.rows.iter().map(|r| {
        let mut cells: Vec<String> = r.point.iter().map(|&v| format_float(v)).collect();
        cells.push(format_float(r.objective));
        cells.extend(report_cells(&r.report));
        cells
    });
    out.push_str(&csv_text(&header, rows));
    Ok(out)
}

/// CSV text of an optimisation.
pub fn optimize_csv(config: &RunConfig, execution: Execution) -> Result<String, CliError> {
    let spec = config.optimize_spec(execution);
    let best = optimize(&config.protocol, &spec)?;
    let mut header = vec!["alpha".to_string(), "channels".to_string(), "objective".to_string()];
    header.extend(report_header());
    let extra = vec![
        ("objective".to_string(), spec.objective.name().to_string()),
        ("alpha_min".to_string(), format_float(spec.alpha_min)),
        ("alpha_max".to_string(), format_float(spec.alpha_max)),
        ("alpha_points".to_string(), spec.alpha_points.to_string()),
        ("m_max".to_string(), spec.m_max.to_string()),
        ("refine".to_string(), spec.refine.to_string()),
        ("relaxed".to_string(), spec.relaxed.to_string()),
    ];
    let mut out = provenance("optimize", Some(&config.protocol), &extra);
    let mut row = vec![
        format_float(best.alpha),
        best.channels.to_string(),
        format_float(best.objective),
    ];
    row.extend(report_cells(&best.report));
    out.push_str(&csv_text(&header, [row]));
    Ok(out)
}

/// Report text of the self-checks and whether all passed.
pub fn verify_report(opts: VerifyOptions) -> Result<(String, bool), CliError> {
    let checks = run_all(opts)?;
    let mut out = String::new();
    let mut all = true;
    for c in &checks {
        all &= c.passed();
        let _ = writeln!(
            out,
            "{} {} deviation={} tolerance={} points={}",
            if c.passed() { "PASS" } else { "FAIL" },
            c.name,
            format_float(c.deviation),
            format_float(c.tolerance),
            c.points
        );
    }
    let _ = writeln!(out, "{}", if all { "all checks passed" } else { "some checks failed" });
    Ok((out, all))
}

fn figure_header(fig: &FigureData, table: &str) -> String {
    let mut extra = vec![
        ("figure".to_string(), fig.id.to_string()),
        ("title".to_string(), fig.title.to_string()),
        ("table".to_string(), table.to_string()),
    ];
    extra.extend(fig.assumptions.iter().cloned());
    provenance("reproduce", None, &extra)
}

fn table_csv(fig: &FigureData, t: &Table) -> String {
    let mut out = figure_header(fig, &t.name);
    let rows = t.rows.iter().map(|r| r.iter().map(|&v| format_float(v)).collect());
    out.push_str(&csv_text(&t.columns, rows));
    out
}

fn summary_csv(fig: &FigureData) -> String {
    let mut out = figure_header(fig, "summary");
    let header: Vec<String> = ["quantity", "produced", "reference", "ratio"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows = fig.summary.iter().map(|s| {
        vec![
            s.quantity.clone(),
            format_float(s.produced),
            format_float(s.reference),
            format_float(s.ratio()),
        ]
    });
    out.push_str(&csv_text(&header, rows));
    out
}

/// `(file name, contents)` for every CSV of a figure.
pub fn figure_files(fig: &FigureData) -> Vec<(String, String)> {
    let mut files: Vec<(String, String)> = fig
        .tables
        .iter()
        .map(|t| (format!("fig{}_{}.csv", fig.id, t.name), table_csv(fig, t)))
        .collect();
    files.push((format!("fig{}_summary.csv", fig.id), summary_csv(fig)));
    files
}

fn summary_text(fig: &FigureData) -> String {
    let mut out = format!("figure {}: {}\n", fig.id, fig.title);
    for s in &fig.summary {
        let _ = write!(out, "  {} = {}", s.quantity, format_float(s.produced));
        if s.reference.is_finite() {
            let _ = write!(
                out,
                " (reference {}, ratio {})",
                format_float(s.reference),
                format_float(s.ratio())
            );
        }
        out.push('\n');
    }
    out
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => write_file(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("catrep: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli) -> Result<i32, CliError> {
    let execution = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let config = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let out = cli.out.clone().or_else(|| config.output.path.clone());
    let started = std::time::Instant::now();
    let code = match &cli.command {
        Command::Sweep => {
            config.protocol.validate_fields()?;
            emit(out.as_deref(), &sweep_csv(&config, execution)?)?;
            EXIT_OK
        }
        Command::Optimize => {
            config.protocol.validate_fields()?;
            emit(out.as_deref(), &optimize_csv(&config, execution)?)?;
            EXIT_OK
        }
        Command::Verify { perturb_series } => {
            let (text, passed) = verify_report(VerifyOptions {
                series_perturbation: *perturb_series,
                execution,
            })?;
            emit(out.as_deref(), &text)?;
            if passed {
                EXIT_OK
            } else {
                EXIT_VERIFY_FAILED
            }
        }
        Command::Reproduce { id } => {
            let fig = reproduce(*id, execution)?;
            let files = figure_files(&fig);
            match out.as_deref() {
                Some(dir) => {
                    fs::create_dir_all(dir).map_err(|source| CliError::Io {
                        path: dir.to_path_buf(),
                        source,
                    })?;
                    for (name, text) in &files {
                        write_file(&dir.join(name), text)?;
                    }
                    print!("{}", summary_text(&fig));
                }
                None => {
                    for (_, text) in &files {
                        print!("{text}");
                    }
                }
            }
            EXIT_OK
        }
    };
    if cli.verbose > 0 {
        eprintln!("catrep: finished in {:.3} s", started.elapsed().as_secs_f64());
    }
    Ok(code)
}
