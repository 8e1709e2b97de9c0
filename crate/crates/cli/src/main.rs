//! `mppv`: simulate, evaluate and verify mixed Poisson scenarios.
//!
//! Exit codes: 0 pass, 1 verification failure, 2 config or usage error, 3 numeric error.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mpp_core::scenario::{Format, Scenario};
use mpp_core::sim::{count_summary, simulate, write_path_dump};
use mpp_core::verify::{run_assumption_suite, VerificationReport};
use mpp_core::{Error, FddQuery};
use serde::Serialize;

const EXIT_FAIL: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

#[derive(Parser)]
#[command(name = "mppv", version, about = "Mixed Poisson process simulation and verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate paths; write the path dump and a count summary.
    Simulate(Common),
    /// Exact finite-dimensional probability of one increment pattern.
    Fdd {
        #[command(flatten)]
        common: Common,
        /// Increasing observation times, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        times: Vec<f64>,
        /// Increments over consecutive intervals, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        counts: Vec<u64>,
    },
    /// Run the equivalence, assumption and density-limit checks.
    Verify(Common),
    /// Check the density-limit assumption on the quantile grid.
    AssumptionCheck(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    paths: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory; overrides the scenario's.
    #[arg(long, env = "MPP_OUT_DIR")]
    out: Option<PathBuf>,
    /// Format printed to standard output.
    #[arg(long, value_enum, default_value_t = OutFormat::Text)]
    format: OutFormat,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Json,
    Csv,
    Text,
}

enum Failure {
    Verification,
    Engine(Error),
    Io(PathBuf, io::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Engine(e)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verification) => ExitCode::from(EXIT_FAIL),
        Err(Failure::Engine(e)) => {
            eprintln!("mppv: {e}");
            ExitCode::from(if e.is_usage() { EXIT_USAGE } else { EXIT_NUMERIC })
        }
        Err(Failure::Io(path, e)) => {
            eprintln!("mppv: {}: {e}", path.display());
            ExitCode::from(EXIT_USAGE)
        }
    }
}

fn load(common: &Common) -> Result<Scenario, Failure> {
    let mut scenario = Scenario::load(&common.config)?;
    scenario.apply_overrides(common.seed, common.paths)?;
    if common.threads == Some(0) {
        return Err(Error::Config("--threads must be at least 1".into()).into());
    }
    Ok(scenario)
}

fn out_dir(common: &Common, scenario: &Scenario) -> Option<PathBuf> {
    common.out.clone().or_else(|| scenario.output.dir.clone())
}

fn write_file(dir: &Path, name: &str, contents: &[u8]) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Io(dir.to_path_buf(), e))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Failure::Io(path, e))
}

fn print(text: &str) {
    let mut out = io::stdout().lock();
    let _ = out.write_all(text.as_bytes());
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Simulate(common) => cmd_simulate(&common),
        Command::Fdd { common, times, counts } => cmd_fdd(&common, times, counts),
        Command::Verify(common) => cmd_verify(&common),
        Command::AssumptionCheck(common) => cmd_assumption_check(&common),
    }
}

#[derive(Serialize)]
struct SummaryRow {
    time: f64,
    mean: f64,
    variance: f64,
}

fn cmd_simulate(common: &Common) -> Result<(), Failure> {
    let scenario = load(common)?;
    let plan = scenario.plan()?;
    let paths = simulate(&plan, common.threads)?;
    let horizon = plan.horizon;
    let mut times: Vec<f64> = (1..).map(f64::from).take_while(|&t| t < horizon).collect();
    times.push(horizon);
    let rows: Vec<SummaryRow> = count_summary(&paths, &times)?
        .into_iter()
        .map(|(time, mean, variance)| SummaryRow { time, mean, variance })
        .collect();
    let mut csv = String::from("time,mean,variance\n");
    for r in &rows {
        let _ = writeln!(csv, "{},{},{}", r.time, r.mean, r.variance);
    }
    if let Some(dir) = out_dir(common, &scenario) {
        write_file(&dir, "summary.csv", csv.as_bytes())?;
        if scenario.output.paths || common.out.is_some() {
            let mut dump = Vec::new();
            write_path_dump(&mut dump, &plan, &paths).map_err(|e| Failure::Io(dir.join("paths.txt"), e))?;
            write_file(&dir, "paths.txt", &dump)?;
        }
    }
    match common.format {
        OutFormat::Csv => print(&csv),
        OutFormat::Json => print(&(serde_json::to_string_pretty(&rows).expect("rows serialize") + "\n")),
        OutFormat::Text => {
            let mut s = format!("{} paths, horizon {}, seed {}\n", paths.len(), horizon, plan.master_seed);
            let _ = writeln!(s, "{:>10}  {:>12}  {:>12}", "time", "mean N_t", "var N_t");
            for r in &rows {
                let _ = writeln!(s, "{:>10}  {:>12.6}  {:>12.6}", r.time, r.mean, r.variance);
            }
            print(&s);
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct FddRow<'a> {
    evaluator: String,
    times: &'a [f64],
    counts: &'a [u64],
    probability: f64,
    error_estimate: f64,
}

fn cmd_fdd(common: &Common, times: Vec<f64>, counts: Vec<u64>) -> Result<(), Failure> {
    let scenario = load(common)?;
    let query = FddQuery::new(times, counts)?;
    let evaluator = scenario
        .fdd_evaluator()?
        .ok_or_else(|| Error::Config("the scenario has no exact evaluator (evaluator.kind = \"none\")".into()))?;
    let value = evaluator.evaluate(&query)?;
    let row = FddRow {
        evaluator: evaluator.name(),
        times: query.times(),
        counts: query.increments(),
        probability: value.value,
        error_estimate: value.error,
    };
    let join = |v: &[String]| v.join(";");
    let times_s = join(&row.times.iter().map(f64::to_string).collect::<Vec<_>>());
    let counts_s = join(&row.counts.iter().map(u64::to_string).collect::<Vec<_>>());
    let csv = format!(
        "evaluator,times,counts,probability,error_estimate\n{},{},{},{},{}\n",
        row.evaluator, times_s, counts_s, row.probability, row.error_estimate
    );
    if let Some(dir) = common.out.clone() {
        write_file(&dir, "fdd.csv", csv.as_bytes())?;
    }
    match common.format {
        OutFormat::Csv => print(&csv),
        OutFormat::Json => print(&(serde_json::to_string_pretty(&row).expect("row serializes") + "\n")),
        OutFormat::Text => print(&format!(
            "evaluator    {}\ntimes        {}\ncounts       {}\nprobability  {:.10}\nerror        {:.3e}\n",
            row.evaluator, times_s, counts_s, row.probability, row.error_estimate
        )),
    }
    Ok(())
}

fn emit_report(common: &Common, scenario: &Scenario, report: &VerificationReport, stem: &str) -> Result<(), Failure> {
    if let Some(dir) = out_dir(common, scenario) {
        for format in &scenario.output.formats {
            let (ext, body) = match format {
                Format::Json => ("json", report.to_json()),
                Format::Csv => ("csv", report.to_csv()),
                Format::Text => ("txt", report.to_text()),
            };
            write_file(&dir, &format!("{stem}.{ext}"), body.as_bytes())?;
        }
    }
    print(&match common.format {
        OutFormat::Json => report.to_json(),
        OutFormat::Csv => report.to_csv(),
        OutFormat::Text => report.to_text(),
    });
    Ok(())
}

fn cmd_verify(common: &Common) -> Result<(), Failure> {
    let scenario = load(common)?;
    let report = mpp_core::verify(&scenario, common.threads)?;
    emit_report(common, &scenario, &report, "report")?;
    if report.pass {
        Ok(())
    } else {
        Err(Failure::Verification)
    }
}

fn cmd_assumption_check(common: &Common) -> Result<(), Failure> {
    let scenario = load(common)?;
    let assumption = run_assumption_suite(&scenario)?;
    let mut report = mpp_core::verify::assumption_report(&scenario, assumption);
    report.finalize();
    emit_report(common, &scenario, &report, "assumption")?;
    if report.pass {
        Ok(())
    } else {
        Err(Failure::Verification)
    }
}
