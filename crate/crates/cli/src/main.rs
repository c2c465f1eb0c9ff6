//! `fireline` — run exploration experiments, parameter sweeps, renders, and
//! the bundled oracle selftests. See docs/manual.md for formats and flags.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fireline_core::config::SimConfig;
use fireline_core::error::Error;
use fireline_core::render::render_trace_file;
use fireline_core::selftest::{run_selftest, Fault};
use fireline_core::sim::{results_csv, run_sweep, summary_csv, ExperimentOutput, RunOptions};

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "fireline", version, about = "Multi-robot frontier exploration simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (created if absent).
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Also write per-iteration merged-map snapshots and rendered frames.
        #[arg(long)]
        render: bool,
    },
    /// Run the cartesian robots x ranges sweep.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Robot counts, e.g. 1,2,3,4
        #[arg(long, value_delimiter = ',', required = true)]
        robots: Vec<usize>,
        /// WiFi ranges in meters, e.g. 2,3,4,5
        #[arg(long, value_delimiter = ',', required = true)]
        ranges: Vec<f64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Render per-iteration overlay images from an existing trace.
    Render {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run the bundled oracle suites and report pass/fail counts.
    Selftest {
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Deliberately perturb a suite to prove the harness catches faults
        /// (harness verification only).
        #[arg(long, hide = true)]
        inject_fault: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, seed, out, render } => cmd_run(&config, seed, &out, render),
        Command::Sweep { config, robots, ranges, out } => cmd_sweep(&config, &robots, &ranges, &out),
        Command::Render { trace, out } => cmd_render(&trace, &out),
        Command::Selftest { out, inject_fault } => cmd_selftest(&out, inject_fault.as_deref()),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config_error() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::from(EXIT_RUNTIME)
            }
        }
    }
}

fn cmd_run(
    config_path: &Path,
    seed: Option<u64>,
    out: &Path,
    render: bool,
) -> fireline_core::Result<ExitCode> {
    let mut config = SimConfig::from_file(config_path)?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    std::fs::create_dir_all(out)?;

    let reference = fireline_core::sim::build_reference_map(&config)?;
    let output = fireline_core::sim::run_experiment_with_reference(
        &config,
        Some(&reference),
        &RunOptions { record_snapshots: render },
    )?;

    persist_run(&output, out)?;
    if render {
        let frames = render_trace_file(&out.join("trace.log"))?;
        for frame in frames {
            std::fs::write(out.join(format!("render_{:03}.pgm", frame.iteration)), frame.pgm)?;
        }
    }
    println!(
        "run: {} robots, range {} m, {} iterations, completion {:.2}%",
        output.record.num_robots,
        output.record.wifi_range,
        output.record.iterations,
        output.record.completion_pct
    );
    Ok(ExitCode::SUCCESS)
}

fn persist_run(output: &ExperimentOutput, out: &Path) -> fireline_core::Result<()> {
    std::fs::write(out.join("results.csv"), results_csv(std::slice::from_ref(&output.record)))?;
    std::fs::write(out.join("trace.log"), &output.trace_log)?;
    if !output.snapshots.is_empty() {
        let dir = out.join("snapshots");
        std::fs::create_dir_all(&dir)?;
        for (iteration, bytes) in &output.snapshots {
            std::fs::write(dir.join(format!("iter_{iteration:03}.pgm")), bytes)?;
        }
    }
    Ok(())
}

fn cmd_sweep(
    config_path: &Path,
    robots: &[usize],
    ranges: &[f64],
    out: &Path,
) -> fireline_core::Result<ExitCode> {
    let config = SimConfig::from_file(config_path)?;
    std::fs::create_dir_all(out)?;
    let traces_dir = out.join("traces");
    std::fs::create_dir_all(&traces_dir)?;

    let outputs = run_sweep(&config, robots, ranges)?;
    let records: Vec<_> = outputs.iter().map(|o| o.record.clone()).collect();
    std::fs::write(out.join("results.csv"), results_csv(&records))?;
    std::fs::write(out.join("summary.csv"), summary_csv(&records))?;
    for output in &outputs {
        let name = format!(
            "robots{}_range{}.log",
            output.record.num_robots, output.record.wifi_range
        );
        std::fs::write(traces_dir.join(name), &output.trace_log)?;
    }
    println!("sweep: {} experiments -> {}", outputs.len(), out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_render(trace: &Path, out: &Path) -> fireline_core::Result<ExitCode> {
    if !trace.exists() {
        return Err(Error::Trace(format!("trace file {} does not exist", trace.display())));
    }
    std::fs::create_dir_all(out)?;
    let frames = render_trace_file(trace)?;
    let count = frames.len();
    for frame in frames {
        std::fs::write(out.join(format!("render_{:03}.pgm", frame.iteration)), frame.pgm)?;
    }
    println!("render: {count} frames -> {}", out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_selftest(out: &Path, inject_fault: Option<&str>) -> fireline_core::Result<ExitCode> {
    std::fs::create_dir_all(out)?;
    let fault = match inject_fault {
        None => Fault::None,
        Some("frontier-off-by-one") => Fault::FrontierOffByOne,
        Some(other) => {
            return Err(Error::Config(format!("unknown fault {other:?}")));
        }
    };
    let report = run_selftest(fault);
    print!("{}", report.summary());
    if report.all_passed() {
        Ok(ExitCode::SUCCESS)
    } else {
        let mut failures = String::new();
        for suite in &report.suites {
            for f in &suite.failures {
                failures.push_str(f);
                failures.push('\n');
            }
        }
        std::fs::write(out.join("selftest_failures.txt"), failures)?;
        eprintln!("selftest failures written to {}", out.join("selftest_failures.txt").display());
        Ok(ExitCode::from(EXIT_FAILURE))
    }
}
