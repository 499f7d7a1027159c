use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use risopt::harness::{
    self, convergence, gradient_scaling_probe, read_results, read_timing, read_traces, run_experiment, solve,
    summarize, timing_report, write_experiment, write_summary, ExperimentSpec, Method, ObjectiveKind, ScenarioFile,
    Solvers,
};
use risopt::{Error, Result, ScenarioConfig};

#[derive(Parser)]
#[command(
    name = "risopt",
    version,
    about = "RIS reflection design for finite-blocklength uplinks"
)]
struct Cli {
    /// Overrides every seed the command uses.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a channel realization from a TOML config and save it as JSON.
    GenerateScenario {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Design the RIS for one saved scenario.
    Optimize {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_parser = parse_method)]
        method: Method,
        #[arg(long, value_parser = parse_objective)]
        objective: ObjectiveKind,
        /// CSI error level of the estimate the design sees.
        #[arg(long, default_value_t = 0.0)]
        beta: f64,
        /// TOML file with `[so]`, `[ga]` and `[ao]` solver settings.
        #[arg(long)]
        solvers: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an experiment spec over all its cells.
    Sweep {
        #[arg(long)]
        spec: PathBuf,
        /// Defaults to the spec's `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Exit with an error if any cell failed.
        #[arg(long)]
        strict: bool,
    },
    /// Derived tables from a sweep directory.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum)]
        kind: ReportKind,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportKind {
    Convergence,
    Timing,
    Summary,
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_objective(s: &str) -> std::result::Result<ObjectiveKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Serialize)]
struct SolutionFile {
    method: String,
    objective: String,
    beta: f64,
    seed: u64,
    /// `[re, im]` per element.
    psi: Vec<[f64; 2]>,
    rates: Vec<f64>,
    wsr_equal: f64,
    wsr_fair: f64,
    min_rate: f64,
    iterations: usize,
    seconds: f64,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })
}

fn write(path: &Path, body: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.into(),
            source: e,
        })?;
    }
    fs::write(path, body).map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn csv_done<T>(path: &Path, r: std::result::Result<T, impl std::fmt::Display>) -> Result<T> {
    r.map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn generate(config: &Path, out: &Path, seed: Option<u64>) -> Result<()> {
    let mut cfg = ScenarioConfig::from_toml_str(&read(config)?)?;
    if let Some(s) = seed {
        cfg.rng_seed = s;
    }
    let file = ScenarioFile::generate(&cfg)?;
    write(out, &to_json(&file)?)?;
    println!(
        "wrote {} ({} sensors, {} elements, seed {})",
        out.display(),
        cfg.num_sensors,
        cfg.num_elements,
        cfg.rng_seed
    );
    Ok(())
}

fn optimize(
    scenario: &Path,
    method: Method,
    objective: ObjectiveKind,
    beta: f64,
    solvers: Option<&Path>,
    out: &Path,
    seed: Option<u64>,
) -> Result<()> {
    let file: ScenarioFile = serde_json::from_str(&read(scenario)?).map_err(|e| Error::Parse(e.to_string()))?;
    let truth = file.scenario()?;
    let solvers: Solvers = match solvers {
        Some(p) => toml::from_str(&read(p)?).map_err(|e| Error::Parse(e.to_string()))?,
        None => Solvers::default(),
    };
    let seed = seed.unwrap_or(file.config.rng_seed);
    let solved = solve(&truth, method, objective, beta, seed, &solvers)?;

    let solution = SolutionFile {
        method: method.name().into(),
        objective: objective.name().into(),
        beta,
        seed,
        psi: solved.psi.as_slice().iter().map(|z| [z.re, z.im]).collect(),
        rates: solved.rates.rate.clone(),
        wsr_equal: solved.wsr_equal(),
        wsr_fair: solved.wsr_fair(),
        min_rate: solved.min_rate(),
        iterations: solved.trace.iterations(),
        seconds: solved.seconds,
    };
    fs::create_dir_all(out).map_err(|e| Error::Io {
        path: out.into(),
        source: e,
    })?;
    write(&out.join("solution.json"), &to_json(&solution)?)?;

    let trace_path = out.join("trace.csv");
    let mut w = csv_writer(&trace_path)?;
    csv_done(
        &trace_path,
        w.write_record(["iteration", "objective", "rel_change", "seconds"]),
    )?;
    for r in &solved.trace.rows {
        csv_done(
            &trace_path,
            w.write_record([
                r.iteration.to_string(),
                harness::fmt_float(r.objective),
                harness::fmt_float(r.rel_change),
                harness::fmt_float(r.elapsed),
            ]),
        )?;
    }
    csv_done(&trace_path, w.flush())?;

    println!(
        "{method} / {objective}: wsr {:.4}, min-rate {:.4} bits/s/Hz after {} iterations ({:.3} s)",
        solution.wsr_equal, solution.min_rate, solution.iterations, solution.seconds
    );
    Ok(())
}

/// Returns the number of failed cells.
fn sweep(spec_path: &Path, out: Option<&Path>, seed: Option<u64>) -> Result<usize> {
    let mut spec = ExperimentSpec::from_path(spec_path)?;
    if let Some(s) = seed {
        spec.base_seed = s;
    }
    let dir = out
        .map(Path::to_path_buf)
        .or_else(|| spec.output_dir.clone())
        .ok_or_else(|| Error::InvalidArgument("no output directory: pass --out or set output_dir".into()))?;
    let cells = spec.cells().len();
    log::info!("running {cells} cells into {}", dir.display());
    let output = run_experiment(&spec)?;
    write_experiment(&dir, &spec, &output)?;
    let failed = output.failed();
    println!("{} cells, {failed} failed; results in {}", cells, dir.display());
    Ok(failed)
}

fn report(input: &Path, kind: ReportKind) -> Result<()> {
    match kind {
        ReportKind::Summary => {
            let rows = read_results(&input.join(harness::RESULTS_FILE))?;
            let summary = summarize(&rows);
            write_summary(&input.join(harness::SUMMARY_FILE), &summary)?;
            println!(
                "{:<11} {:>4} {:>6} {:>5} {:>12} {:>12} {:>12}",
                "method", "L", "beta", "n", "wsr_equal", "wsr_fair", "min_rate"
            );
            for s in &summary {
                let med = |q: Option<harness::report::Quartiles>| q.map_or("-".into(), |q| format!("{:.4}", q.median));
                println!(
                    "{:<11} {:>4} {:>6} {:>5} {:>12} {:>12} {:>12}",
                    s.method,
                    s.l,
                    s.beta,
                    s.count,
                    med(s.wsr_equal),
                    med(s.wsr_fair),
                    med(s.min_rate)
                );
            }
        }
        ReportKind::Convergence => {
            let traces = read_traces(&input.join(harness::TRACES_FILE))?;
            let path = input.join("convergence.csv");
            let mut w = csv_writer(&path)?;
            csv_done(
                &path,
                w.write_record(["method", "L", "beta", "seed", "iteration", "tolerance", "absolute"]),
            )?;
            for t in &traces {
                let c = convergence(&t.trace);
                for (k, tol) in c.tolerances.iter().enumerate() {
                    csv_done(
                        &path,
                        w.write_record([
                            t.trace.method.clone(),
                            t.l.to_string(),
                            t.beta.to_string(),
                            t.trace.seed.to_string(),
                            k.to_string(),
                            harness::fmt_float(*tol),
                            c.absolute.to_string(),
                        ]),
                    )?;
                }
            }
            csv_done(&path, w.flush())?;
            println!("wrote {} ({} traces)", path.display(), traces.len());
        }
        ReportKind::Timing => {
            let rows = timing_report(&read_timing(&input.join(harness::TIMING_FILE))?);
            let path = input.join("timing_summary.csv");
            let mut w = csv_writer(&path)?;
            csv_done(
                &path,
                w.write_record([
                    "method",
                    "runs",
                    "total_seconds",
                    "mean_seconds",
                    "seconds_per_iteration",
                ]),
            )?;
            println!(
                "{:<11} {:>5} {:>12} {:>12} {:>14}",
                "method", "runs", "total [s]", "mean [s]", "per iter [s]"
            );
            for r in &rows {
                csv_done(
                    &path,
                    w.write_record([
                        r.method.clone(),
                        r.runs.to_string(),
                        harness::fmt_float(r.total_seconds),
                        harness::fmt_float(r.mean_seconds),
                        harness::fmt_float(r.seconds_per_iteration),
                    ]),
                )?;
                println!(
                    "{:<11} {:>5} {:>12.4} {:>12.4} {:>14.3e}",
                    r.method, r.runs, r.total_seconds, r.mean_seconds, r.seconds_per_iteration
                );
            }
            csv_done(&path, w.flush())?;

            let spec_path = input.join(harness::SPEC_FILE);
            let base = if spec_path.exists() {
                ExperimentSpec::from_path(&spec_path)?.scenario
            } else {
                ScenarioConfig::default()
            };
            let probe = gradient_scaling_probe(&base, &[25, 50, 100], 15, 20)?;
            let path = input.join("gradient_scaling.csv");
            let mut w = csv_writer(&path)?;
            csv_done(&path, w.write_record(["L", "seconds"]))?;
            for (l, t) in &probe.points {
                csv_done(&path, w.write_record([l.to_string(), harness::fmt_float(*t)]))?;
            }
            csv_done(&path, w.flush())?;
            println!(
                "gradient cost grows as L^{:.2} (M = {})",
                probe.exponent, base.num_sensors
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::GenerateScenario { config, out } => generate(config, out, cli.seed),
        Command::Optimize {
            scenario,
            method,
            objective,
            beta,
            solvers,
            out,
        } => optimize(scenario, *method, *objective, *beta, solvers.as_deref(), out, cli.seed),
        Command::Sweep { spec, out, strict } => match sweep(spec, out.as_deref(), cli.seed) {
            Ok(failed) if failed > 0 && *strict => {
                eprintln!("error: {failed} cells failed");
                return ExitCode::from(2);
            }
            other => other.map(|_| ()),
        },
        Command::Report { input, kind } => report(input, *kind),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
