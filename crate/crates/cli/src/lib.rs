//! Command-line front end: simulation campaigns, prior utilities and the
//! conduct service.
//!
//! Exit codes are a stable contract: 0 success, 2 usage error, 3 runtime
//! failure.

use std::ffi::OsString;
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use combidose::calibration::{calibrate_prior, CalibrationSpec};
use combidose::harness::{load_scenarios, run_campaign, CampaignKind, Scenario};
use combidose::report::{emit_reports, prior_predictive_report, read_json, write_json};
use combidose::TtpPriorConfig;

/// Environment variable overriding the default worker count.
pub const THREADS_ENV: &str = "COMBIDOSE_THREADS";

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Help or version text, printed with exit code 0.
    #[error("{0}")]
    Info(String),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Info(_) => 0,
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl From<combidose::Error> for CliError {
    fn from(e: combidose::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "combidose", version, about = "Two-stage drug-combination dose finding", arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: CommandArgs,
}

#[derive(Debug, Subcommand)]
enum CommandArgs {
    /// Operating characteristics of stage 1 (MTD curve estimation).
    SimulateStage1(SimArgs),
    /// Operating characteristics of stage 2 along the true MTD curve.
    SimulateStage2(SimArgs),
    /// Operating characteristics of both stages run back to back.
    SimulateTrial(SimArgs),
    /// Quantiles of the prior-induced median TTP along the curve.
    PriorReport(PriorArgs),
    /// Calibrate the stage-1 prior to a target DLT probability.
    CalibratePrior(CalibrateArgs),
    /// Serve the trial conduct API.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
struct SimArgs {
    /// Scenario file: a single scenario or a pack.
    #[arg(long)]
    scenario: PathBuf,
    /// Run only the named scenario of a pack.
    #[arg(long)]
    only: Option<String>,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Worker threads [default: COMBIDOSE_THREADS, else all cores].
    #[arg(long)]
    threads: Option<usize>,
    /// Monte Carlo replicates per scenario.
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    delta_u: Option<f64>,
    #[arg(long = "delta-0")]
    delta_0: Option<f64>,
    /// Patients per month.
    #[arg(long)]
    accrual_rate: Option<f64>,
}

#[derive(Debug, Args)]
struct PriorArgs {
    /// TTP prior as JSON [default: the shipped vague prior].
    #[arg(long)]
    prior: Option<PathBuf>,
    #[arg(long, default_value_t = 100_000)]
    draws: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "results")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    /// Calibration settings as JSON [default: the shipped settings].
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value = "results")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, default_value = "trial-data")]
    data_dir: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    /// Allowed CORS origin; repeat for several [default: any].
    #[arg(long = "allow-origin")]
    allow_origins: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    SimulateStage1,
    SimulateStage2,
    SimulateTrial,
    PriorReport,
    CalibratePrior,
    Serve,
}

/// Values that replace the scenario file's settings.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub replicates: Option<usize>,
    pub delta_u: Option<f64>,
    pub delta_0: Option<f64>,
    pub accrual_rate: Option<f64>,
}

impl Overrides {
    fn validate(&self) -> Result<(), CliError> {
        let mut bad = Vec::new();
        if self.replicates == Some(0) {
            bad.push("--replicates must be at least 1".to_owned());
        }
        if let Some(d) = self.delta_u.filter(|d| !(*d > 0.0 && *d < 1.0)) {
            bad.push(format!("--delta-u {d} is outside (0, 1)"));
        }
        if let Some(d) = self.delta_0.filter(|d| !(*d > 0.0 && *d < 1.0)) {
            bad.push(format!("--delta-0 {d} is outside (0, 1)"));
        }
        if let Some(r) = self.accrual_rate.filter(|r| !(*r > 0.0 && r.is_finite())) {
            bad.push(format!("--accrual-rate {r} must be positive"));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(CliError::Usage(bad.join("\n")))
        }
    }

    pub fn apply(&self, s: &mut Scenario) {
        if let Some(m) = self.replicates {
            s.replicates = m;
        }
        if let Some(d) = self.delta_u {
            s.stage2.delta_u = d;
            s.delta_u_grid = vec![d];
        }
        if let Some(d) = self.delta_0 {
            s.stage2.delta_0 = d;
        }
        if let Some(r) = self.accrual_rate {
            s.stage2.accrual_rate = r;
        }
    }
}

/// A validated command line.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub scenario: Option<PathBuf>,
    pub only: Option<String>,
    pub out: PathBuf,
    pub parallelism: usize,
    pub master_seed: u64,
    pub overrides: Overrides,
    pub draws: usize,
    pub input: Option<PathBuf>,
    pub data_dir: PathBuf,
    pub addr: SocketAddr,
    pub allow_origins: Vec<String>,
}

fn default_parallelism(env: Option<String>) -> Result<usize, CliError> {
    match env {
        Some(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(CliError::Usage(format!("{THREADS_ENV}={v:?} is not a positive integer"))),
        },
        None => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn existing(path: PathBuf, what: &str) -> Result<PathBuf, CliError> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(CliError::Usage(format!("{what} {} does not exist", path.display())))
    }
}

/// Parse `argv` (program name first) into a validated [`RunConfig`].
pub fn parse_cli<I, T>(argv: I) -> Result<RunConfig, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    parse_with_env(argv, std::env::var(THREADS_ENV).ok())
}

/// [`parse_cli`] with the thread-count variable passed explicitly.
pub fn parse_with_env<I, T>(argv: I, threads_env: Option<String>) -> Result<RunConfig, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(|e| match e.kind() {
        ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => CliError::Info(e.to_string()),
        _ => CliError::Usage(e.render().to_string()),
    })?;
    let mut cfg = RunConfig {
        command: Command::Serve,
        scenario: None,
        only: None,
        out: PathBuf::from("results"),
        parallelism: 1,
        master_seed: 1,
        overrides: Overrides::default(),
        draws: 0,
        input: None,
        data_dir: PathBuf::from("trial-data"),
        addr: SocketAddr::from(([127, 0, 0, 1], 8080)),
        allow_origins: Vec::new(),
    };
    match cli.command {
        CommandArgs::SimulateStage1(a) => fill_sim(&mut cfg, Command::SimulateStage1, a, threads_env)?,
        CommandArgs::SimulateStage2(a) => fill_sim(&mut cfg, Command::SimulateStage2, a, threads_env)?,
        CommandArgs::SimulateTrial(a) => fill_sim(&mut cfg, Command::SimulateTrial, a, threads_env)?,
        CommandArgs::PriorReport(a) => {
            if a.draws < 2 {
                return Err(CliError::Usage("--draws must be at least 2".into()));
            }
            cfg.command = Command::PriorReport;
            cfg.input = a.prior.map(|p| existing(p, "prior file")).transpose()?;
            cfg.draws = a.draws;
            cfg.master_seed = a.seed;
            cfg.out = a.out;
        }
        CommandArgs::CalibratePrior(a) => {
            cfg.command = Command::CalibratePrior;
            cfg.input = a.spec.map(|p| existing(p, "calibration file")).transpose()?;
            cfg.out = a.out;
        }
        CommandArgs::Serve(a) => {
            cfg.command = Command::Serve;
            cfg.data_dir = a.data_dir;
            cfg.addr = a.addr;
            cfg.allow_origins = a.allow_origins;
        }
    }
    Ok(cfg)
}

fn fill_sim(cfg: &mut RunConfig, command: Command, a: SimArgs, threads_env: Option<String>) -> Result<(), CliError> {
    if a.threads == Some(0) {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    let overrides = Overrides {
        replicates: a.replicates,
        delta_u: a.delta_u,
        delta_0: a.delta_0,
        accrual_rate: a.accrual_rate,
    };
    overrides.validate()?;
    cfg.command = command;
    cfg.scenario = Some(existing(a.scenario, "scenario file")?);
    cfg.only = a.only;
    cfg.out = a.out;
    cfg.master_seed = a.seed;
    cfg.parallelism = match a.threads {
        Some(n) => n,
        None => default_parallelism(threads_env)?,
    };
    cfg.overrides = overrides;
    Ok(())
}

/// Scenarios selected by the configuration, with overrides applied.
pub fn selected_scenarios(cfg: &RunConfig) -> Result<Vec<Scenario>, CliError> {
    let path = cfg.scenario.as_deref().ok_or_else(|| CliError::Usage("no scenario file".into()))?;
    let mut scenarios = load_scenarios(path)?;
    if let Some(name) = &cfg.only {
        scenarios.retain(|s| &s.name == name);
        if scenarios.is_empty() {
            return Err(CliError::Usage(format!("no scenario named {name:?} in {}", path.display())));
        }
    }
    for s in &mut scenarios {
        cfg.overrides.apply(s);
        s.validate()?;
    }
    Ok(scenarios)
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

/// Execute a parsed command. Returns the files written.
pub fn run(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    match cfg.command {
        Command::SimulateStage1 | Command::SimulateStage2 | Command::SimulateTrial => {
            let kind = match cfg.command {
                Command::SimulateStage1 => CampaignKind::Stage1,
                Command::SimulateStage2 => CampaignKind::Stage2,
                _ => CampaignKind::FullTrial,
            };
            let scenarios = selected_scenarios(cfg)?;
            if kind != CampaignKind::Stage1 {
                if let Some(s) = scenarios.iter().find(|s| s.efficacy.is_none()) {
                    return Err(CliError::Usage(format!("scenario {:?} has no stage-2 truth", s.name)));
                }
            }
            let mut written = Vec::new();
            for s in &scenarios {
                let oc = run_campaign(s, kind, cfg.parallelism, cfg.master_seed)?;
                written.extend(emit_reports(&oc, &cfg.out, &s.file_stem())?);
            }
            Ok(written)
        }
        Command::PriorReport => {
            let prior: TtpPriorConfig = match &cfg.input {
                Some(p) => read_json(p)?,
                None => TtpPriorConfig::default(),
            };
            let table = prior_predictive_report(&prior, cfg.draws, cfg.master_seed)?;
            fs::create_dir_all(&cfg.out).map_err(|e| io_err(&cfg.out, e))?;
            let csv = cfg.out.join("prior_predictive.csv");
            let json = cfg.out.join("prior_predictive.json");
            table.write_csv(&csv)?;
            write_json(&table, &json)?;
            Ok(vec![json, csv])
        }
        Command::CalibratePrior => {
            let spec: CalibrationSpec = match &cfg.input {
                Some(p) => read_json(p)?,
                None => CalibrationSpec::default(),
            };
            let result = calibrate_prior(&spec)?;
            fs::create_dir_all(&cfg.out).map_err(|e| io_err(&cfg.out, e))?;
            let path = cfg.out.join("calibrated_prior.json");
            write_json(&result, &path)?;
            Ok(vec![path])
        }
        Command::Serve => {
            let mut service = combidose_service::ServiceConfig::new(&cfg.data_dir);
            service.addr = cfg.addr;
            service.allowed_origins = cfg.allow_origins.clone();
            let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Runtime(e.to_string()))?;
            rt.block_on(combidose_service::serve(service))
                .map_err(|e| CliError::Runtime(format!("service: {e}")))?;
            Ok(Vec::new())
        }
    }
}
