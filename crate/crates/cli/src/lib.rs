//! Batch front-end: scenario files in, CSV and JSON artifacts out.
//!
//! Exit codes: `0` success, `1` self-test criteria failed, `2` invalid
//! configuration, `3` numerical failure (a `failure.json` is still written).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod scenario;
pub mod suite;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use sdde_core::analysis::{basin_probe, cover_detect, stability_probe};
use sdde_core::lyapunov::{estimate_exponent, exponent_norm_equality_check, NormKind};
use sdde_core::sdde::{integrate, omega_limit_sample};
use sdde_core::{Error, Phase, Segment};

use scenario::{Scenario, SCHEMA_VERSION};

/// Tolerance for `|λ_C − λ_W|` in `lyapunov` reports.
pub const EQUALITY_TOL: f64 = 0.03;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("numerical failure: {0}")]
    Numerical(Error),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("{0} self-test criteria failed")]
    ChecksFailed(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ChecksFailed(_) => 1,
            CliError::Validation(_) | CliError::Io(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::BlowUp { .. }
            | Error::NonConvergence { .. }
            | Error::Unbounded(_)
            | Error::NotCompatible { .. }
            | Error::DelayOutOfRange { .. }
            | Error::GuardedDivision(_)
            | Error::RootNotFound
            | Error::NoSamples(_)
            | Error::InsufficientSample(_)
            | Error::TimeOutOfRange { .. } => CliError::Numerical(e),
            other => CliError::Validation(other.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "sdde-lyap", version, about = "Lyapunov exponents and stability certificates for state-dependent delay equations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Directory for artifacts.
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// `key.path=value` override applied to the scenario before validation.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Integrate one trajectory and write it as CSV.
    Simulate { config: PathBuf },
    /// Upper Lyapunov exponents in both norms.
    Lyapunov { config: PathBuf },
    /// Exponential stability certificate.
    Certify { config: PathBuf },
    /// Count the fiber of the sampled invariant set over a probe phase.
    Cover { config: PathBuf },
    /// Domain-of-attraction probes.
    Basin { config: PathBuf },
    /// Run the built-in acceptance suite on the presets.
    Selftest,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate { .. } => "simulate",
            Command::Lyapunov { .. } => "lyapunov",
            Command::Certify { .. } => "certify",
            Command::Cover { .. } => "cover",
            Command::Basin { .. } => "basin",
            Command::Selftest => "selftest",
        }
    }
}

/// Artifact writer. JSON artifacts are `{header, schema_version, body}`;
/// only `header` varies between identical runs.
pub struct Output {
    dir: PathBuf,
    command: &'static str,
}

impl Output {
    pub fn new(dir: &Path, command: &'static str) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            command,
        })
    }

    pub fn write_json(&self, name: &str, body: &impl Serialize) -> Result<PathBuf, CliError> {
        let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let doc = json!({
            "header": {
                "tool": "sdde-lyap",
                "version": env!("CARGO_PKG_VERSION"),
                "command": self.command,
                "timestamp_unix": stamp,
            },
            "schema_version": SCHEMA_VERSION,
            "body": body,
        });
        let text = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Io(e.to_string()))?;
        self.write_text(name, &(text + "\n"))
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Ok(path)
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("sdde-lyap: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        // a second initialization in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let out = Output::new(&cli.out_dir, cli.command.name())?;
    let result = match &cli.command {
        Command::Selftest => run_selftest(&out, cli.seed.unwrap_or(1)),
        Command::Simulate { config }
        | Command::Lyapunov { config }
        | Command::Certify { config }
        | Command::Cover { config }
        | Command::Basin { config } => {
            let mut sc = scenario::load(config, &cli.set)?;
            if let Some(seed) = cli.seed {
                sc.seed = seed;
            }
            match &cli.command {
                Command::Simulate { .. } => run_simulate(&sc, &out),
                Command::Lyapunov { .. } => run_lyapunov(&sc, &out),
                Command::Certify { .. } => run_certify(&sc, &out),
                Command::Cover { .. } => run_cover(&sc, &out),
                Command::Basin { .. } => run_basin(&sc, &out),
                Command::Selftest => unreachable!(),
            }
        }
    };
    if let Err(CliError::Numerical(e)) = &result {
        out.write_json(
            "failure.json",
            &json!({ "command": cli.command.name(), "error": e.to_string(), "detail": format!("{e:?}") }),
        )?;
    }
    result
}

fn base_points(sc: &Scenario) -> Result<Vec<(Phase, Segment)>, CliError> {
    let model = sc.build_model()?;
    let o = &sc.omega;
    if o.points == 0 {
        return Err(CliError::Validation("omega.points: must be at least 1".into()));
    }
    let span = (o.points - 1) as f64 * o.stride;
    let pts = omega_limit_sample(&model, &sc.theta0(&model)?, &sc.initial_segment(&model)?, o.transient, span, o.stride, &sc.step)?;
    Ok(pts.into_iter().take(o.points).collect())
}

pub fn run_simulate(sc: &Scenario, out: &Output) -> Result<(), CliError> {
    let model = sc.build_model()?;
    let traj = integrate(&model, &sc.theta0(&model)?, &sc.initial_segment(&model)?, sc.simulate.horizon, &sc.step)?;
    out.write_text("trajectory.csv", &traj.to_csv(sc.simulate.stride)?)?;
    let end = traj.end_time();
    out.write_json(
        "simulate.json",
        &json!({
            "scenario": sc.name,
            "horizon": sc.simulate.horizon,
            "end_time": end,
            "truncated": traj.is_truncated(),
            "blowup": traj.blowup().map(|(t, n)| json!({"t": t, "norm": n})),
            "y_end": traj.y(end)?.as_slice(),
        }),
    )?;
    if let Some((t, norm)) = traj.blowup() {
        return Err(CliError::Numerical(Error::BlowUp { t, norm }));
    }
    Ok(())
}

pub fn run_lyapunov(sc: &Scenario, out: &Output) -> Result<(), CliError> {
    let model = sc.build_model()?;
    let base = base_points(sc)?;
    let mut cfg = sc.lyapunov.clone();
    cfg.seed = sc.seed;
    let rc = estimate_exponent(&model, &base, &cfg, NormKind::C, &sc.step)?;
    let rw = estimate_exponent(&model, &base, &cfg, NormKind::W, &sc.step)?;
    let eq = exponent_norm_equality_check(&rc, &rw, EQUALITY_TOL)?;
    out.write_text("windows_c.csv", &rc.series_csv())?;
    out.write_text("windows_w.csv", &rw.series_csv())?;
    out.write_json(
        "lyapunov.json",
        &json!({
            "scenario": sc.name,
            "lambda_C": rc.lambda,
            "lambda_W": rw.lambda,
            "equality": eq,
            "report_C": rc,
            "report_W": rw,
        }),
    )?;
    Ok(())
}

pub fn run_certify(sc: &Scenario, out: &Output) -> Result<(), CliError> {
    let model = sc.build_model()?;
    let base = base_points(sc)?;
    let lambda_hat = match sc.certify.lambda_hat {
        Some(l) => l,
        None => {
            let mut cfg = sc.lyapunov.clone();
            cfg.seed = sc.seed;
            estimate_exponent(&model, &base, &cfg, NormKind::C, &sc.step)?.lambda
        }
    };
    let k: Vec<_> = base.into_iter().take(sc.certify.points.max(1)).collect();
    let mut probe = sc.certify.probe.clone();
    probe.seed = sc.seed.wrapping_add(1);
    let cert = stability_probe(&model, &k, lambda_hat, &probe, &sc.step)?;
    out.write_json("certificate.json", &json!({ "scenario": sc.name, "certificate": cert }))?;
    Ok(())
}

pub fn run_cover(sc: &Scenario, out: &Output) -> Result<(), CliError> {
    let model = sc.build_model()?;
    let theta = sc.theta0(&model)?;
    let c = &sc.cover;
    let mut initials = vec![sc.initial_segment(&model)?];
    for v in &c.initials {
        initials.push(scenario::initial_segment(&scenario::InitialSpec::Constant(v.clone()), &model)?);
    }
    let mut samples = Vec::new();
    for x in &initials {
        samples.extend(omega_limit_sample(&model, &theta, x, c.transient, c.sample, c.stride, &sc.step)?);
    }
    let probe = samples
        .get(c.probe_index)
        .ok_or_else(|| CliError::Validation(format!("cover.probe_index: only {} samples per run", samples.len() / initials.len())))?
        .0
        .clone();
    let report = cover_detect(&probe, &samples, c.return_tol, c.cluster_tol)?;
    out.write_json("cover.json", &json!({ "scenario": sc.name, "probe_phase": probe, "cover": report }))?;
    Ok(())
}

pub fn run_basin(sc: &Scenario, out: &Output) -> Result<(), CliError> {
    let model = sc.build_model()?;
    let theta = sc.theta0(&model)?;
    let b = &sc.basin;
    let m_sample = omega_limit_sample(&model, &theta, &sc.initial_segment(&model)?, sc.omega.transient, b.reference_span, b.probe.stride, &sc.step)?;
    let probes = b
        .probes
        .iter()
        .map(|v| Ok((theta.clone(), scenario::initial_segment(&scenario::InitialSpec::Constant(v.clone()), &model)?)))
        .collect::<Result<Vec<_>, CliError>>()?;
    let outcomes = basin_probe(&model, &m_sample, &probes, &b.probe, &sc.step)?;
    let mut csv = String::from("probe_id,attracted,t_entry,final_distance,rate,blowup\n");
    for (i, o) in outcomes.iter().enumerate() {
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        csv.push_str(&format!("{i},{},{},{},{},{}\n", o.attracted, opt(o.t_entry), o.final_distance, opt(o.rate), o.blowup));
    }
    out.write_text("basin.csv", &csv)?;
    out.write_json("basin.json", &json!({ "scenario": sc.name, "outcomes": outcomes }))?;
    Ok(())
}

pub fn run_selftest(out: &Output, seed: u64) -> Result<(), CliError> {
    let results = suite::run_all(seed)?;
    for r in &results {
        eprintln!("{} criterion {:>2}: {}", if r.passed { "PASS" } else { "FAIL" }, r.id, r.title);
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    let body: Value = json!({ "seed": seed, "criteria": results });
    out.write_json("selftest.json", &body)?;
    if failed > 0 {
        return Err(CliError::ChecksFailed(failed));
    }
    Ok(())
}
