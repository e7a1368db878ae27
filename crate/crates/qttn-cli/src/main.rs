//! Command-line benchmark harness for the `qttn` solver.
//!
//! Exit codes: 0 success, 1 verification tolerance breach, 2 invalid
//! configuration or arguments, 3 solver failure (with a failure marker
//! persisted next to the records when an output file was named).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qttn::bench::{self, FailureRecord, GridConfig, RunConfig, DEFAULT_EPSILON};
use qttn::QttnError;

#[derive(Parser)]
#[command(name = "qttn", version, about = "Benchmark harness for the qttn ground-state solver")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one configuration and append a JSON-lines benchmark record.
    Run {
        /// JSON run configuration.
        #[arg(long)]
        config: PathBuf,
        /// Record file to append to (default: records.jsonl).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Expand a grid configuration and run every cell.
    Grid {
        /// JSON grid configuration (list-valued fields are expanded).
        #[arg(long)]
        config: PathBuf,
        /// Record file to append to (default: records.jsonl).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Concurrent cells; capped so workers x threads fits the host.
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Render the figure-of-merit table from a record file.
    Report {
        /// JSON-lines record file produced by run/grid.
        records: PathBuf,
        /// Label of the record whose wall time defines speedup = T_baseline / T_row.
        #[arg(long)]
        baseline: Option<String>,
        /// Floor for energy-above-best.
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        epsilon: f64,
        /// CSV output path; plot data goes to the same path with a .plot extension.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a configuration and compare against exact diagonalization (<= 16 qubits).
    Verify {
        /// JSON run configuration (its verify_rtol field sets the bound).
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().cmd) {
        Ok(code) => code,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

type CmdResult = std::result::Result<ExitCode, (u8, String)>;

/// Invalid input is exit 2; anything that failed after the config was
/// accepted is exit 3.
fn config_err(e: impl std::fmt::Display) -> (u8, String) {
    (2, e.to_string())
}

fn solver_err(e: QttnError) -> (u8, String) {
    let code = match e {
        QttnError::Config(_) | QttnError::Argument(_) | QttnError::Format(_) => 2,
        _ => 3,
    };
    (code, e.to_string())
}

fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> std::result::Result<T, (u8, String)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))
}

fn dispatch(cmd: Cmd) -> CmdResult {
    match cmd {
        Cmd::Run { config, out } => run(&config, out),
        Cmd::Grid { config, out, workers } => grid(&config, out, workers),
        Cmd::Report { records, baseline, epsilon, out } => report(&records, baseline.as_deref(), epsilon, out),
        Cmd::Verify { config } => verify(&config),
    }
}

fn default_out(out: Option<PathBuf>) -> PathBuf {
    out.unwrap_or_else(|| PathBuf::from("records.jsonl"))
}

fn run(config: &Path, out: Option<PathBuf>) -> CmdResult {
    let cfg: RunConfig = load_json(config)?;
    cfg.validate().map_err(config_err)?;
    let out = default_out(out);
    match bench::run_benchmark(&cfg) {
        Ok(record) => {
            bench::append_record(&out, &record).map_err(solver_err)?;
            println!(
                "{}: E = {:.12}, {} sweeps, {:.3} s -> {}",
                record.label,
                record.final_energy,
                record.sweeps.len(),
                record.total_wall_time_s,
                out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Err(e) => {
            let failure = FailureRecord {
                label: cfg.effective_label(),
                config: cfg,
                error: e.to_string(),
            };
            // persist the partial record before reporting the failure
            let _ = bench::append_failure(&out, &failure);
            Err((3, e.to_string()))
        }
    }
}

fn grid(config: &Path, out: Option<PathBuf>, workers: usize) -> CmdResult {
    if workers == 0 {
        return Err(config_err("--workers must be >= 1"));
    }
    let grid: GridConfig = load_json(config)?;
    let cells = grid.expand().map_err(config_err)?;
    // keep workers x threads within the host core budget
    let host = std::thread::available_parallelism().map_or(1, |v| v.get());
    let max_threads = cells.iter().map(|c| c.resolved_threads()).max().unwrap_or(1);
    let workers = workers.min((host / max_threads).max(1));
    let out = default_out(out);
    let (records, failures) = bench::run_grid(&cells, workers);
    for record in &records {
        bench::append_record(&out, record).map_err(solver_err)?;
        println!(
            "{}: E = {:.12}, {:.3} s",
            record.label, record.final_energy, record.total_wall_time_s
        );
    }
    for failure in &failures {
        let _ = bench::append_failure(&out, failure);
        eprintln!("failed: {}: {}", failure.label, failure.error);
    }
    println!(
        "grid: {} of {} cells succeeded -> {}",
        records.len(),
        cells.len(),
        out.display()
    );
    if records.is_empty() {
        return Err((3, "every grid cell failed".into()));
    }
    Ok(ExitCode::SUCCESS)
}

fn report(records_path: &Path, baseline: Option<&str>, epsilon: f64, out: Option<PathBuf>) -> CmdResult {
    let records = bench::read_records(records_path).map_err(config_err)?;
    let report = bench::make_report(&records, baseline, epsilon).map_err(config_err)?;
    print!("{}", report.text);
    match out {
        Some(path) => {
            std::fs::write(&path, &report.csv).map_err(config_err)?;
            let plot_path = path.with_extension("plot");
            std::fs::write(&plot_path, &report.plot_data).map_err(config_err)?;
            println!("csv -> {}, plot data -> {}", path.display(), plot_path.display());
        }
        None => print!("{}", report.csv),
    }
    Ok(ExitCode::SUCCESS)
}

fn verify(config: &Path) -> CmdResult {
    let cfg: RunConfig = load_json(config)?;
    let outcome = bench::verify(&cfg).map_err(solver_err)?;
    println!(
        "ttn energy   = {:.12}\nexact energy = {:.12}\nrelative error {:.3e} (tolerance {:.3e})",
        outcome.ttn_energy, outcome.exact_energy, outcome.relative_error, outcome.tolerance
    );
    if outcome.pass {
        println!("verify: PASS");
        Ok(ExitCode::SUCCESS)
    } else {
        println!("verify: FAIL");
        Ok(ExitCode::from(1))
    }
}
