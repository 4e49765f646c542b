//! Batch driver: parses a TOML configuration, runs one experiment and writes
//! `manifest.json`, `summary.json` and `rows.jsonl` to an output directory.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 validation error, 3 numeric
//! error, 4 failed check under `--assert`, 64 usage error.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use lcmgap::asymptotics::{
    mc_zeta_cov, moment_estimates, scaling_constants, theorem_constants, zeta_zero_samples,
    moment_of, PURPOSE_COV, PURPOSE_MOMENT,
};
use lcmgap::experiments::{
    brownian_clt_experiment, clt_experiment, limit_process_experiment, localization_probe,
    tail_probe, Check, ExperimentConfig, ExperimentReport,
};
use lcmgap::io::{read_points, write_points};
use lcmgap::models::CurveSpec;
use lcmgap::processes::RngStream;
use lcmgap::stepfn::{gap, lcm, Interval};
use lcmgap::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_ASSERTION: i32 = 4;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error in {path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{context}: {source}")]
    Io {
        context: String,
        source: std::io::Error,
    },
    #[error("serialization failed: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => EXIT_VALIDATION,
            CliError::Core(e) if e.is_numeric() => EXIT_NUMERIC,
            CliError::Core(Error::Io(_)) => EXIT_IO,
            CliError::Core(_) => EXIT_VALIDATION,
            CliError::Io { .. } | CliError::Json(_) => EXIT_IO,
            CliError::Usage(_) => EXIT_USAGE,
        }
    }
}

fn io_err(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> CliError {
    let context = context.into();
    move |source| CliError::Io { context, source }
}

#[derive(Debug, Parser)]
#[command(name = "lcmgap", version, about = "Monte Carlo experiments on concave majorants of cumulative estimators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Master seed; overrides the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for replications (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Exit with status 4 if any check fails.
    #[arg(long = "assert", global = true)]
    assert_checks: bool,
}

#[derive(Debug, Clone, Subcommand)]
enum Command {
    /// Majorant and gap of the points in a `t,value` CSV file.
    Lcm {
        /// CSV file with header `t,value`
        #[arg(long)]
        input: PathBuf,
    },
    /// Monte Carlo `E[ζ(0)^p]`.
    ZetaMoments,
    /// Monte Carlo covariance curve of `ζ^p` and its integral.
    ZetaCov,
    /// Finite-dimensional marginals of the rescaled gap against `ζ`.
    LimitProcess,
    /// Central limit theorem for the `L_p` distance.
    Clt,
    /// Variance of the Brownian version of the `L_p` distance.
    CltBrownian,
    /// Frequency with which the majorant fails to localize.
    Localization,
    /// Tail probabilities of the inverse process.
    Tails,
    /// Scaling constants and asymptotic mean and variance.
    Constants,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Lcm { .. } => "lcm",
            Command::ZetaMoments => "zeta-moments",
            Command::ZetaCov => "zeta-cov",
            Command::LimitProcess => "limit-process",
            Command::Clt => "clt",
            Command::CltBrownian => "clt-brownian",
            Command::Localization => "localization",
            Command::Tails => "tails",
            Command::Constants => "constants",
        }
    }
}

/// Record of one invocation.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config_path: Option<PathBuf>,
    pub config: Option<ExperimentConfig>,
    pub out_dir: PathBuf,
    pub version: String,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub status: String,
}

/// Reads and validates a configuration file.
pub fn load_config(path: &Path) -> Result<(ExperimentConfig, CurveSpec), CliError> {
    let text = fs::read_to_string(path).map_err(io_err(format!("reading {}", path.display())))?;
    let cfg: ExperimentConfig = toml::from_str(&text).map_err(|e| CliError::Config {
        path: path.to_path_buf(),
        message: e.message().to_string(),
    })?;
    let spec = cfg.validate().map_err(|e| CliError::Config {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok((cfg, spec))
}

/// Serializes a configuration to TOML.
pub fn config_to_toml(cfg: &ExperimentConfig) -> Result<String, CliError> {
    toml::to_string(cfg).map_err(|e| CliError::Usage(format!("cannot serialize config: {e}")))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(format!("writing {}", path.display())))
}

fn write_rows<R: Serialize>(dir: &Path, rows: &[R]) -> Result<(), CliError> {
    let path = dir.join("rows.jsonl");
    let file = fs::File::create(&path).map_err(io_err(format!("creating {}", path.display())))?;
    let mut w = BufWriter::new(file);
    for row in rows {
        serde_json::to_writer(&mut w, row)?;
        w.write_all(b"\n").map_err(io_err("writing rows"))?;
    }
    w.flush().map_err(io_err("writing rows"))
}

/// What a subcommand produced.
struct Outcome {
    summary: Value,
    checks: Vec<Check>,
}

fn report_outcome<R: Serialize, S: Serialize>(
    dir: &Path,
    report: ExperimentReport<R, S>,
) -> Result<Outcome, CliError> {
    write_rows(dir, &report.rows)?;
    Ok(Outcome {
        summary: json!({
            "experiment": report.experiment,
            "replications": report.replications,
            "wall_time_secs": report.wall_time_secs,
            "summary": report.summary,
        }),
        checks: report.checks,
    })
}

fn required(cfg: &Option<(ExperimentConfig, CurveSpec)>) -> Result<&(ExperimentConfig, CurveSpec), CliError> {
    cfg.as_ref()
        .ok_or_else(|| CliError::Usage("this subcommand needs --config".into()))
}

fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let digits = 5 - x.abs().log10().floor() as i32;
    if (0..=15).contains(&digits) {
        format!("{x:.*}", digits as usize)
    } else {
        format!("{x:.5e}")
    }
}

fn execute(
    command: &Command,
    loaded: &Option<(ExperimentConfig, CurveSpec)>,
    dir: &Path,
) -> Result<Outcome, CliError> {
    match command {
        Command::Lcm { input } => {
            let file = fs::File::open(input).map_err(io_err(format!("opening {}", input.display())))?;
            let pts = read_points(file)?;
            if pts.len() < 2 {
                return Err(Error::DegenerateInput("need at least two points".into()).into());
            }
            let interval = Interval::new(pts[0].0, pts[pts.len() - 1].0)?;
            let hull = lcm(&pts, interval)?;
            let gaps = gap(&pts, interval)?;
            let path = dir.join("gap.csv");
            let file = fs::File::create(&path).map_err(io_err(format!("creating {}", path.display())))?;
            let rows: Vec<(f64, f64)> = pts.iter().map(|p| p.0).zip(gaps.iter().copied()).collect();
            write_points(file, &rows)?;
            let path = dir.join("hull.csv");
            let file = fs::File::create(&path).map_err(io_err(format!("creating {}", path.display())))?;
            write_points(file, hull.vertices())?;
            let rows: Vec<Value> = pts
                .iter()
                .zip(&gaps)
                .map(|(&(t, value), &g)| json!({"t": t, "value": value, "majorant": value + g, "gap": g}))
                .collect();
            write_rows(dir, &rows)?;
            for g in &gaps {
                println!("{g}");
            }
            Ok(Outcome {
                summary: json!({"points": pts.len(), "hull_vertices": hull.vertices()}),
                checks: vec![],
            })
        }
        Command::ZetaMoments => {
            let (cfg, _) = required(loaded)?;
            let r = cfg.reference_config();
            let seed = RngStream::fork(cfg.reference_seed(), PURPOSE_MOMENT);
            let samples = zeta_zero_samples(r.replications, &r.zeta, seed)?;
            let est = moment_of(&samples, cfg.experiment.p);
            let rows: Vec<Value> = samples
                .iter()
                .enumerate()
                .map(|(rep, z)| json!({"rep": rep, "zeta0": z}))
                .collect();
            write_rows(dir, &rows)?;
            println!("E[zeta(0)^{}] = {} (se {})", cfg.experiment.p, sig6(est.value), sig6(est.se));
            Ok(Outcome {
                summary: json!({"p": cfg.experiment.p, "moment": est, "reference": r}),
                checks: vec![],
            })
        }
        Command::ZetaCov => {
            let (cfg, _) = required(loaded)?;
            let r = cfg.reference_config();
            let seed = RngStream::fork(cfg.reference_seed(), PURPOSE_COV);
            let curve = mc_zeta_cov(cfg.experiment.p, &r.s_grid(), r.cov_replications, &r.cov_zeta(), seed)?;
            write_rows(dir, &curve.points)?;
            let path = dir.join("cov.csv");
            let mut w = csv_writer(&path)?;
            writeln!(w, "s,cov,se").map_err(io_err("writing cov.csv"))?;
            for pt in &curve.points {
                writeln!(w, "{},{},{}", pt.s, pt.cov, pt.se).map_err(io_err("writing cov.csv"))?;
            }
            w.flush().map_err(io_err("writing cov.csv"))?;
            println!("integral = {} (se {})", sig6(curve.integral.value), sig6(curve.integral.se));
            Ok(Outcome {
                summary: json!({
                    "p": cfg.experiment.p,
                    "integral": curve.integral,
                    "variance_at_zero": curve.variance_at_zero,
                    "reference": r,
                }),
                checks: vec![],
            })
        }
        Command::LimitProcess => {
            let (cfg, spec) = required(loaded)?;
            report_outcome(dir, limit_process_experiment(cfg, spec)?)
        }
        Command::Clt => {
            let (cfg, spec) = required(loaded)?;
            let constants = constants_for(cfg, spec)?;
            report_outcome(dir, clt_experiment(cfg, spec, &constants)?)
        }
        Command::CltBrownian => {
            let (cfg, spec) = required(loaded)?;
            let constants = constants_for(cfg, spec)?;
            report_outcome(dir, brownian_clt_experiment(cfg, spec, &constants, None)?)
        }
        Command::Localization => {
            let (cfg, spec) = required(loaded)?;
            report_outcome(dir, localization_probe(cfg, spec)?)
        }
        Command::Tails => {
            let (cfg, spec) = required(loaded)?;
            report_outcome(dir, tail_probe(cfg, spec)?)
        }
        Command::Constants => {
            let (cfg, spec) = required(loaded)?;
            let k = scaling_constants(cfg.experiment.t, spec)?;
            println!("c1 = {}", sig6(k.c1));
            println!("c2 = {}", sig6(k.c2));
            let constants = constants_for(cfg, spec)?;
            println!("m = {} (se {})", sig6(constants.m.value), sig6(constants.m.se));
            println!(
                "sigma2 = {} (se {})",
                sig6(constants.sigma2.value),
                sig6(constants.sigma2.se)
            );
            write_rows::<Value>(dir, &[])?;
            Ok(Outcome {
                summary: json!({"t": cfg.experiment.t, "c1": k.c1, "c2": k.c2, "constants": constants}),
                checks: vec![],
            })
        }
    }
}

fn csv_writer(path: &Path) -> Result<BufWriter<fs::File>, CliError> {
    let file = fs::File::create(path).map_err(io_err(format!("creating {}", path.display())))?;
    Ok(BufWriter::new(file))
}

fn constants_for(
    cfg: &ExperimentConfig,
    spec: &CurveSpec,
) -> Result<lcmgap::asymptotics::TheoremConstants, CliError> {
    let moments = moment_estimates(cfg.experiment.p, &cfg.reference_config(), cfg.reference_seed())?;
    Ok(theorem_constants(cfg.experiment.p, spec, &cfg.weight, &moments)?)
}

/// Runs the command line `argv` (including the program name) and returns
/// the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run_cli(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn run_cli(cli: &Cli) -> Result<i32, CliError> {
    // Fail fast: nothing is computed or written for an invalid config.
    let loaded = match &cli.config {
        Some(path) => {
            let (mut cfg, spec) = load_config(path)?;
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            Some((cfg, spec))
        }
        None => None,
    };
    if cli.threads == Some(0) {
        return Err(CliError::Usage("--threads must be positive".into()));
    }
    let dir = cli.out.as_path();
    fs::create_dir_all(dir).map_err(io_err(format!("creating {}", dir.display())))?;
    let mut manifest = RunManifest {
        subcommand: cli.command.name().to_string(),
        config_path: cli.config.clone(),
        config: loaded.as_ref().map(|(c, _)| c.clone()),
        out_dir: dir.to_path_buf(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: loaded.as_ref().map(|(c, _)| c.seed),
        threads: cli.threads,
        status: "running".into(),
    };
    write_json(&dir.join("manifest.json"), &manifest)?;

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))?;
    let result = pool.install(|| execute(&cli.command, &loaded, dir));

    let (status, summary, code) = match result {
        Ok(outcome) => {
            let passed = outcome.checks.iter().all(|c| c.passed);
            for c in &outcome.checks {
                println!(
                    "{} {}: {} ({})",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.value,
                    c.threshold
                );
            }
            let code = if cli.assert_checks && !passed { EXIT_ASSERTION } else { EXIT_OK };
            let status = if passed { "ok" } else { "checks_failed" };
            (
                status,
                json!({"status": status, "result": outcome.summary, "checks": outcome.checks, "partial": false}),
                code,
            )
        }
        Err(e) => {
            eprintln!("error: {e}");
            let status = if e.exit_code() == EXIT_NUMERIC { "numeric_error" } else { "error" };
            (
                status,
                json!({"status": status, "error": e.to_string(), "partial": true}),
                e.exit_code(),
            )
        }
    };
    write_json(&dir.join("summary.json"), &summary)?;
    manifest.status = status.into();
    write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(code)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(sig6(0.793700525984), "0.793701");
        assert_eq!(sig6(1.587401051968), "1.58740");
        assert_eq!(sig6(123456.7), "123457");
        assert_eq!(sig6(0.0), "0");
    }
}
