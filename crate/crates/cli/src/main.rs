//! `flexdr`: build scenario sets, run policies and sweeps, join results.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 a fitted
//! policy did not converge.

use std::fs::{self, File};
use std::io::{self, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use flexdr_core::eval::{self, ExperimentConfig, ExperimentReport, Figure, FittedContract};
use flexdr_core::lin::write_contract_csv;
use flexdr_core::outcome::PolicyTag;
use flexdr_core::scenario::{synth_homes, synth_wind, write_traces, SynthSpec};
use flexdr_core::Error;

#[derive(Parser)]
#[command(name = "flexdr", version, about = "Capacity and demand-response contract simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the training and test scenario sets (and synthetic traces).
    Gen(Common),
    /// Run the configured experiment and write results.csv.
    Run(Common),
    /// Run the standard sweeps, one CSV per sweep.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Sweeps to run: capacity_price, wind, rsd, rho (default all).
        #[arg(long, value_delimiter = ',')]
        only: Vec<String>,
    },
    /// Join result files into one table of costs per policy.
    Compare {
        /// Result CSVs written by `run` or `sweep`.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Output file (stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// TOML experiment config; defaults apply when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated subset of opt,seq,pred,lin,lin-plus.
    #[arg(long, value_delimiter = ',')]
    policies: Vec<String>,
    /// Threads for sweep points (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
}

enum Failure {
    Config(String),
    Data(String),
    Convergence(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Data(_) => 3,
            Failure::Convergence(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Data(m) | Failure::Convergence(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::InvalidArgument(_) => Failure::Config(e.to_string()),
            Error::Numerical(_) => Failure::Convergence(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

type Outcome<T> = Result<T, Failure>;

impl Common {
    fn load(&self) -> Outcome<ExperimentConfig> {
        let mut config = match &self.config {
            Some(p) => ExperimentConfig::load(p).map_err(|e| Failure::Config(e.to_string()))?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            config = config.with_seed(seed);
        }
        if let Some(out) = &self.out {
            config.output_dir = out.clone();
        }
        if !self.policies.is_empty() {
            config.policies = self
                .policies
                .iter()
                .map(|s| s.parse::<PolicyTag>())
                .collect::<Result<_, _>>()
                .map_err(|e| Failure::Config(e.to_string()))?;
        }
        if self.workers == Some(0) {
            return Err(Failure::Config("--workers must be at least 1".into()));
        }
        config.validate().map_err(|e| Failure::Config(e.to_string()))?;
        Ok(config)
    }

    fn run(&self, config: &ExperimentConfig) -> Outcome<ExperimentReport> {
        Ok(match self.workers {
            Some(w) => eval::run_experiment_with_workers(config, w)?,
            None => eval::run_experiment(config)?,
        })
    }
}

fn create(path: &Path) -> Outcome<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure::Data(format!("{}: {e}", dir.display())))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn gen(common: &Common) -> Outcome<()> {
    let config = common.load()?;
    let dir = &config.output_dir;
    if config.home_traces.is_none() || config.wind_trace.is_none() {
        let synth = SynthSpec {
            homes: config.synth_homes,
            days: config.synth_days,
            slot_seconds: config.slot_seconds,
            seed: config.synth_seed(),
        };
        if config.home_traces.is_none() {
            let path = dir.join("homes.csv");
            write_traces(&synth_homes(&synth)?, create(&path)?, &path)?;
        }
        if config.wind_trace.is_none() {
            let path = dir.join("wind.csv");
            write_traces(&[synth_wind(&synth)?], create(&path)?, &path)?;
        }
    }
    let errors = eval::prepare_errors(&config)?;
    let (train, test) = eval::scenario_pair(&errors, &config, config.wind_capacity_kw[0], config.cost_rsd[0])?;
    for (name, set) in [("train_scenarios.csv", &train), ("test_scenarios.csv", &test)] {
        let path = dir.join(name);
        set.write_csv(create(&path)?, &path)?;
    }
    eprintln!(
        "wrote {} training and {} test slots for {} customers to {}",
        train.len(),
        test.len(),
        train.customers(),
        dir.display()
    );
    Ok(())
}

fn contract_file(dir: &Path, f: &FittedContract) -> PathBuf {
    let p = f.point;
    dir.join(format!(
        "lin_contract_c{}_wind{}_rsd{}.csv",
        eval::format_sig(p.c_usd_per_kw_mo),
        eval::format_sig(p.wind_kw),
        eval::format_sig(p.rsd)
    ))
}

fn check_convergence(report: &ExperimentReport) -> Outcome<()> {
    let bad = report.nonconverged();
    if bad.is_empty() {
        return Ok(());
    }
    let points: Vec<String> = bad
        .iter()
        .map(|p| format!("c={} wind={} rsd={}", p.c_usd_per_kw_mo, p.wind_kw, p.rsd))
        .collect();
    Err(Failure::Convergence(format!(
        "negotiation hit max_iter without converging at {}",
        points.join("; ")
    )))
}

fn run(common: &Common) -> Outcome<()> {
    let config = common.load()?;
    let report = common.run(&config)?;
    let dir = &config.output_dir;
    let path = dir.join("results.csv");
    eval::emit_results(&report.rows, &path)?;
    for f in &report.contracts {
        let p = contract_file(dir, f);
        write_contract_csv(&f.contract, f.prices.as_ref(), f.summary.as_ref(), create(&p)?, &p)?;
    }
    eprintln!("wrote {} rows to {}", report.rows.len(), path.display());
    check_convergence(&report)
}

fn sweep(common: &Common, only: &[String]) -> Outcome<()> {
    let config = common.load()?;
    let figures = if only.is_empty() {
        Figure::ALL.to_vec()
    } else {
        only.iter().map(|s| Figure::parse(s)).collect::<Result<Vec<_>, _>>()?
    };
    let mut last = Ok(());
    for f in figures {
        let mut c = f.config(&config);
        if !common.policies.is_empty() {
            c.policies = config.policies.clone();
        }
        c.validate()?;
        let report = common.run(&c)?;
        let path = config.output_dir.join(format!("{}.csv", f.name()));
        eval::emit_results(&report.rows, &path)?;
        eprintln!("wrote {} rows to {}", report.rows.len(), path.display());
        if let Err(e) = check_convergence(&report) {
            last = Err(e);
        }
    }
    last
}

fn compare(inputs: &[PathBuf], out: Option<&Path>) -> Outcome<()> {
    let mut rows = Vec::new();
    for p in inputs {
        rows.extend(eval::read_results(p)?);
    }
    let table = eval::compare(&rows);
    match out {
        Some(p) => table.write_csv(create(p)?, p)?,
        None => table.write_csv(io::stdout().lock(), Path::new("<stdout>"))?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Gen(c) => gen(c),
        Command::Run(c) => run(c),
        Command::Sweep { common, only } => sweep(common, only),
        Command::Compare { inputs, out } => compare(inputs, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
