//! Front end for `hipdyn` scenarios: JSON configs in, CSV and JSON out.
//!
//! Exit codes: 0 success, 1 verification failed, 2 invalid input,
//! 3 numerical or runtime failure.

pub mod config;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hipdyn::evolution::evolve_ket;
use hipdyn::toy::toy_printed;
use hipdyn::verify::{conditioning_compare, run_identity_suite, run_toy_suite, standard_variants, ConditioningReport, SuiteOptions, NIP_PRINTED};
use hipdyn::{HipError, PictureTag, TimeMatrixFn};
use serde::Serialize;

pub use config::{default_config, load_config, parse_config, ConfigError, Scenario, ScenarioConfig};

/// Environment variable overriding the algebraic residual tolerance.
pub const TOL_ENV: &str = "HIPDYN_TOL";

#[derive(Debug)]
pub enum CliError {
    VerificationFailed(usize),
    Invalid(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::VerificationFailed(_) => 1,
            CliError::Invalid(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::VerificationFailed(n) => write!(f, "verification failed: {n} check(s) failed"),
            CliError::Invalid(m) => write!(f, "invalid input: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Invalid(e.to_string())
    }
}

impl From<HipError> for CliError {
    fn from(e: HipError) -> Self {
        match e {
            HipError::InvalidArgument(m) => CliError::Invalid(m),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Numerical(format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(name = "hipdyn", version, about = "Quasi-Hermitian dynamics in the hybrid interaction picture")]
pub struct Cli {
    /// Print the named default scenario as JSON and exit.
    #[arg(long, value_name = "NAME")]
    pub dump_default: Option<String>,

    /// Worker threads for independent grid points.
    #[arg(long, global = true, value_name = "N")]
    pub parallel: Option<usize>,

    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Propagate the initial state and write trajectory.csv.
    Simulate {
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run the identity suite and print a JSON report.
    Verify {
        config: PathBuf,
        /// Also write the report to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare NIP and HIP generator spectra and propagator growth.
    Compare {
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Print the sorted eigenvalues of a derived operator at time t.
    #[command(allow_negative_numbers = true)]
    Spectrum {
        config: PathBuf,
        /// One of H, H1, G, G1, Sigma, Sigma2, Theta, Theta2 (G_printed for toy2).
        operator: String,
        t: f64,
    },
}

pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

fn residual_tol() -> Result<f64, CliError> {
    match std::env::var(TOL_ENV) {
        Ok(v) => match v.trim().parse::<f64>() {
            Ok(t) if t > 0.0 && t.is_finite() => Ok(t),
            _ => Err(CliError::Invalid(format!("{TOL_ENV}={v:?} is not a positive number"))),
        },
        Err(_) => Ok(hipdyn::pictures::DEFAULT_RESIDUAL_TOL),
    }
}

fn load(path: &Path) -> Result<Scenario, CliError> {
    Ok(load_config(path)?.validate()?)
}

fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Numerical(format!("{}: {e}", path.display())))?;
    let result = (|| {
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()
    })();
    result.map_err(|e| io_err(path, e))
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

/// Writes `trajectory.csv` into `out` and returns its path.
pub fn cmd_simulate(s: &Scenario, out: &Path) -> Result<PathBuf, CliError> {
    let t0 = s.model.window().0;
    let psi0 = s.model.map_state(s.picture, &s.initial_state, t0)?;
    let mut traj = evolve_ket(&s.model, s.picture, &psi0, &s.integrator, &s.sample_times)?;
    for a in &s.observables {
        traj.register_observable(&s.model, a)?;
    }
    let n = s.model.dim();
    let mut header = vec!["t".to_string()];
    for k in 0..n {
        header.push(format!("psi{k}_re"));
        header.push(format!("psi{k}_im"));
    }
    header.push("physical_norm".into());
    for k in 0..s.observables.len() {
        header.push(format!("obs{k}_re"));
        header.push(format!("obs{k}_im"));
    }
    let rows: Vec<Vec<String>> = (0..traj.times.len())
        .map(|i| {
            let mut r = vec![fmt_num(traj.times[i])];
            for z in &traj.kets[i] {
                r.push(fmt_num(z.re));
                r.push(fmt_num(z.im));
            }
            r.push(fmt_num(traj.physical_norms[i]));
            for series in &traj.expectations {
                r.push(fmt_num(series.values[i].re));
                r.push(fmt_num(series.values[i].im));
            }
            r
        })
        .collect();
    ensure_dir(out)?;
    let path = out.join("trajectory.csv");
    write_csv(&path, &header, &rows)?;
    Ok(path)
}

pub fn suite_options(s: &Scenario, parallel: usize) -> Result<SuiteOptions, CliError> {
    Ok(SuiteOptions {
        tol: residual_tol()?,
        integrator: s.integrator,
        psi0: Some(s.initial_state.clone()),
        observable: s.observables.first().cloned(),
        parallel,
        ..Default::default()
    })
}

pub fn cmd_verify(s: &Scenario, parallel: usize) -> Result<hipdyn::VerificationReport, CliError> {
    let opts = suite_options(s, parallel)?;
    let report = match s.toy {
        Some(_) => run_toy_suite(&s.grid_params, &s.grid_times, &opts)?,
        None => run_identity_suite(&s.model, &s.grid_times, &opts)?,
    };
    Ok(report)
}

#[derive(Debug, Serialize)]
struct GrowthEntry<'a> {
    label: &'a str,
    growth_fro: f64,
    growth_op: f64,
    max_abs_imag: f64,
}

#[derive(Debug, Serialize)]
struct GrowthFile<'a> {
    fit: &'static str,
    window: [f64; 2],
    variants: Vec<GrowthEntry<'a>>,
}

pub fn compare_report(s: &Scenario, parallel: usize) -> Result<ConditioningReport, CliError> {
    let mut variants = standard_variants(&s.model);
    if let Some(p) = &s.toy {
        variants.insert(1, (NIP_PRINTED.to_string(), toy_printed(p).g_printed()));
    }
    let run = || conditioning_compare(&s.model, &variants, &s.integrator, &s.sample_times);
    let report = if parallel > 1 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(parallel)
            .build()
            .map_err(|e| CliError::Numerical(e.to_string()))?
            .install(run)?
    } else {
        run()?
    };
    Ok(report)
}

/// Writes `spectrum_<label>.csv`, `propagator_norms.csv` and `growth.json`.
pub fn cmd_compare(s: &Scenario, out: &Path, parallel: usize) -> Result<Vec<PathBuf>, CliError> {
    if s.sample_times.len() < 2 {
        return Err(CliError::Invalid("compare needs at least two sample times".into()));
    }
    let report = compare_report(s, parallel)?;
    ensure_dir(out)?;
    let mut written = Vec::new();
    let n = s.model.dim();
    for v in &report.variants {
        let mut header = vec!["t".to_string()];
        for k in 0..n {
            header.push(format!("lambda{k}_re"));
            header.push(format!("lambda{k}_im"));
        }
        let rows: Vec<Vec<String>> = report
            .times
            .iter()
            .zip(&v.spectra)
            .map(|(&t, sp)| {
                let mut r = vec![fmt_num(t)];
                for z in sp.values() {
                    r.push(fmt_num(z.re));
                    r.push(fmt_num(z.im));
                }
                r
            })
            .collect();
        let path = out.join(format!("spectrum_{}.csv", v.label));
        write_csv(&path, &header, &rows)?;
        written.push(path);
    }

    let mut header = vec!["t".to_string()];
    for v in &report.variants {
        header.push(format!("{}_fro", v.label));
        header.push(format!("{}_op", v.label));
    }
    let rows: Vec<Vec<String>> = (0..report.times.len())
        .map(|i| {
            let mut r = vec![fmt_num(report.times[i])];
            for v in &report.variants {
                r.push(fmt_num(v.fro_norms[i]));
                r.push(fmt_num(v.op_norms[i]));
            }
            r
        })
        .collect();
    let path = out.join("propagator_norms.csv");
    write_csv(&path, &header, &rows)?;
    written.push(path);

    let (t0, t1) = s.model.window();
    let growth = GrowthFile {
        fit: "least-squares slope of ln norm over the second half of the sample grid",
        window: [t0, t1],
        variants: report
            .variants
            .iter()
            .map(|v| GrowthEntry { label: &v.label, growth_fro: v.growth_fro, growth_op: v.growth_op, max_abs_imag: v.max_abs_imag })
            .collect(),
    };
    let path = out.join("growth.json");
    let text = serde_json::to_string_pretty(&growth).map_err(|e| CliError::Numerical(e.to_string()))?;
    fs::write(&path, text + "\n").map_err(|e| io_err(&path, e))?;
    written.push(path);
    Ok(written)
}

/// Operator names accepted by `spectrum`.
pub const OPERATORS: &[&str] = &["H", "H1", "G", "G1", "Sigma", "Sigma2", "Theta", "Theta2", "G_printed"];

pub fn named_operator(s: &Scenario, name: &str) -> Result<TimeMatrixFn, CliError> {
    let m = &s.model;
    Ok(match name {
        "H" => m.hamiltonian().clone(),
        "H1" | "H₁" => m.hamiltonian_h1(),
        "G" => m.generator(PictureTag::NipAuxiliary),
        "G1" | "G₁" => m.generator(PictureTag::HipKphysical),
        "Sigma" | "Σ" => m.sigma(),
        "Sigma2" | "Σ₂" => m.sigma2(),
        "Theta" | "Θ" => m.theta(),
        "Theta2" | "Θ₂" => m.theta2(),
        "G_printed" => match &s.toy {
            Some(p) => toy_printed(p).g_printed(),
            None => return Err(CliError::Invalid("G_printed exists for the toy2 model only".into())),
        },
        other => return Err(CliError::Invalid(format!("unknown operator {other:?}; expected one of {}", OPERATORS.join(", ")))),
    })
}

pub fn cmd_spectrum(s: &Scenario, operator: &str, t: f64) -> Result<Vec<hipdyn::C64>, CliError> {
    if !t.is_finite() {
        return Err(CliError::Invalid(format!("t must be finite, got {t}")));
    }
    let op = named_operator(s, operator)?;
    Ok(op.eval(t)?.eigenvalues()?.values().to_vec())
}

fn execute(cli: Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    let parallel = cli.parallel.unwrap_or(1);
    let write_out = |w: &mut dyn Write, text: &str| w.write_all(text.as_bytes()).map_err(|e| CliError::Numerical(e.to_string()));
    if let Some(name) = cli.dump_default {
        let cfg = default_config(&name)
            .ok_or_else(|| CliError::Invalid(format!("unknown default {name:?}; available: {}", config::DEFAULT_NAMES.join(", "))))?;
        let text = serde_json::to_string_pretty(&cfg).map_err(|e| CliError::Numerical(e.to_string()))?;
        return write_out(stdout, &(text + "\n"));
    }
    let Some(command) = cli.command else {
        return Err(CliError::Invalid("no subcommand given; see --help".into()));
    };
    match command {
        Command::Simulate { config, out } => {
            let path = cmd_simulate(&load(&config)?, &out)?;
            eprintln!("wrote {}", path.display());
        }
        Command::Verify { config, out } => {
            let report = cmd_verify(&load(&config)?, parallel)?;
            let text = serde_json::to_string_pretty(&report).map_err(|e| CliError::Numerical(e.to_string()))? + "\n";
            if let Some(path) = out {
                fs::write(&path, &text).map_err(|e| io_err(&path, e))?;
            }
            write_out(stdout, &text)?;
            let sm = report.summary;
            eprintln!("pass {}, fail {}, recorded_discrepancy {}", sm.pass, sm.fail, sm.recorded_discrepancy);
            if sm.fail > 0 {
                return Err(CliError::VerificationFailed(sm.fail));
            }
        }
        Command::Compare { config, out } => {
            for p in cmd_compare(&load(&config)?, &out, parallel)? {
                eprintln!("wrote {}", p.display());
            }
        }
        Command::Spectrum { config, operator, t } => {
            let mut text = String::new();
            for z in cmd_spectrum(&load(&config)?, &operator, t)? {
                text.push_str(&format!("{} {}\n", fmt_num(z.re), fmt_num(z.im)));
            }
            write_out(stdout, &text)?;
        }
    }
    Ok(())
}

/// Runs a parsed command line, reporting errors on stderr.
pub fn run(cli: Cli) -> ExitCode {
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match execute(cli, &mut lock) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if !matches!(e, CliError::VerificationFailed(_)) {
                eprintln!("error: {e}");
            }
            ExitCode::from(e.exit_code())
        }
    }
}
