//! Seeded experiment sweeps over surface size, CSI error and method, with
//! CSV output and summary reports.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::ao_optimize;
use crate::error::{invalid, Error, Result};
use crate::fblr_rate::{fairness_weights, Objective, RateBreakdown, RisVector};
use crate::gradient_opt::{ga_optimize, GaOptions, GradientVariant};
use crate::scenario::{perturb_csi, ChannelSet, Geometry, Scenario, ScenarioConfig};
use crate::sequential_sdr::{so_optimize, SoOptions};
use crate::trace::SolverTrace;

pub mod report;

pub use report::{
    convergence, gradient_scaling_probe, quantile, summarize, timing_report, Convergence, ScalingProbe, SummaryRow,
    TimingRecord, TimingRow,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Ega,
    Rga,
    So,
    Ao,
    ShannonSo,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Ega, Method::Rga, Method::So, Method::Ao, Method::ShannonSo];

    pub fn name(self) -> &'static str {
        match self {
            Method::Ega => "ega",
            Method::Rga => "rga",
            Method::So => "so",
            Method::Ao => "ao",
            Method::ShannonSo => "shannon-so",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| {
            invalid(format!(
                "unknown method `{s}` (expected ega, rga, so, ao or shannon-so)"
            ))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveKind {
    WsrEqual,
    WsrFair,
    MinRate,
}

impl ObjectiveKind {
    pub const ALL: [ObjectiveKind; 3] = [ObjectiveKind::WsrEqual, ObjectiveKind::WsrFair, ObjectiveKind::MinRate];

    pub fn name(self) -> &'static str {
        match self {
            ObjectiveKind::WsrEqual => "wsr-equal",
            ObjectiveKind::WsrFair => "wsr-fair",
            ObjectiveKind::MinRate => "min-rate",
        }
    }

    /// Concrete objective; `fair` holds the frozen fairness weights.
    pub fn objective(self, fair: &[f64]) -> Objective {
        match self {
            ObjectiveKind::WsrEqual => Objective::equal_weights(fair.len()),
            ObjectiveKind::WsrFair => Objective::WeightedSum(fair.to_vec()),
            ObjectiveKind::MinRate => Objective::MinRate,
        }
    }
}

impl fmt::Display for ObjectiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ObjectiveKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ObjectiveKind::ALL.into_iter().find(|o| o.name() == s).ok_or_else(|| {
            invalid(format!(
                "unknown objective `{s}` (expected wsr-equal, wsr-fair or min-rate)"
            ))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AoOptions {
    pub grid: usize,
    pub max_sweeps: usize,
    pub rel_tol: f64,
}

impl Default for AoOptions {
    fn default() -> Self {
        Self {
            grid: 64,
            max_sweeps: 50,
            rel_tol: 1e-6,
        }
    }
}

/// Per-method solver settings. Seeds inside are replaced by the cell seed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Solvers {
    pub so: SoOptions,
    pub ga: GaOptions,
    pub ao: AoOptions,
}

fn default_l_values() -> Vec<usize> {
    vec![16, 36, 64, 100]
}

fn default_betas() -> Vec<f64> {
    vec![0.0]
}

fn default_num_seeds() -> u64 {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    /// Inline scenario; ignored when `scenario_file` is set.
    #[serde(default)]
    pub scenario: ScenarioConfig,
    /// TOML scenario config, relative to the spec file.
    #[serde(default)]
    pub scenario_file: Option<PathBuf>,
    pub methods: Vec<Method>,
    pub objective: ObjectiveKind,
    #[serde(default = "default_l_values")]
    pub l_values: Vec<usize>,
    #[serde(default = "default_betas")]
    pub betas: Vec<f64>,
    #[serde(default = "default_num_seeds")]
    pub num_seeds: u64,
    /// Seed `k` of a sweep uses `base_seed + k`.
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub solvers: Solvers,
}

impl ExperimentSpec {
    pub fn new(scenario: ScenarioConfig, methods: Vec<Method>, objective: ObjectiveKind) -> Self {
        Self {
            scenario,
            scenario_file: None,
            methods,
            objective,
            l_values: default_l_values(),
            betas: default_betas(),
            num_seeds: default_num_seeds(),
            base_seed: 0,
            output_dir: None,
            solvers: Solvers::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(invalid("method list is empty"));
        }
        for (k, m) in self.methods.iter().enumerate() {
            if self.methods[..k].contains(m) {
                return Err(invalid(format!("method `{m}` listed twice")));
            }
        }
        if self.l_values.is_empty() || self.l_values.contains(&0) {
            return Err(invalid("L values must be a non-empty list of positive integers"));
        }
        if self.betas.is_empty() || self.betas.iter().any(|b| !(0.0..=1.0).contains(b)) {
            return Err(invalid("beta values must be a non-empty list within [0, 1]"));
        }
        if self.num_seeds == 0 {
            return Err(invalid("num_seeds must be at least 1"));
        }
        self.scenario.validate()?;
        self.solvers.so.validate()?;
        self.solvers.ga.validate()?;
        if self.solvers.ao.grid < 2 {
            return Err(invalid("AO grid needs at least two points"));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self> {
        let mut spec: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if let Some(file) = &spec.scenario_file {
            let path = base_dir.join(file);
            let body = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            spec.scenario = ScenarioConfig::from_toml_str(&body)?;
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let body = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&body, path.parent().unwrap_or(Path::new(".")))
    }

    /// Every cell in output order: L, then β, then seed, then method.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &l in &self.l_values {
            for &beta in &self.betas {
                for k in 0..self.num_seeds {
                    for &method in &self.methods {
                        out.push(Cell {
                            l,
                            beta,
                            seed: self.base_seed + k,
                            method,
                        });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub l: usize,
    pub beta: f64,
    pub seed: u64,
    pub method: Method,
}

/// A generated realization, as written by `generate-scenario`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub config: ScenarioConfig,
    pub geometry: Geometry,
    pub channels: ChannelSet,
}

impl ScenarioFile {
    pub fn generate(config: &ScenarioConfig) -> Result<Self> {
        let (channels, geometry) = crate::scenario::build_scenario(config)?;
        Ok(Self {
            config: config.clone(),
            geometry,
            channels,
        })
    }

    pub fn scenario(&self) -> Result<Scenario> {
        Scenario::from_config(&self.config, self.channels.clone())
    }
}

/// Channel estimate available to the designer. `β = 0` returns the truth.
pub fn csi_estimate(truth: &Scenario, beta: f64, seed: u64) -> Result<Scenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    truth.with_channels(perturb_csi(&truth.channels, beta, &mut rng)?)
}

/// Outcome of one design run, scored on the true channels.
#[derive(Debug, Clone)]
pub struct Solved {
    pub psi: RisVector,
    pub trace: SolverTrace,
    pub seconds: f64,
    /// Reported rates under the true channels.
    pub rates: RateBreakdown,
    /// Fairness weights frozen at `ψ = 1` on the estimate.
    pub fair_weights: Vec<f64>,
}

impl Solved {
    pub fn wsr_equal(&self) -> f64 {
        self.rates.rate.iter().sum()
    }

    pub fn wsr_fair(&self) -> f64 {
        self.rates.weighted_sum(&self.fair_weights)
    }

    pub fn min_rate(&self) -> f64 {
        self.rates.min()
    }
}

/// Designs on the `β`-perturbed estimate of `truth` and scores on `truth`.
pub fn solve(
    truth: &Scenario,
    method: Method,
    kind: ObjectiveKind,
    beta: f64,
    seed: u64,
    solvers: &Solvers,
) -> Result<Solved> {
    let design = csi_estimate(truth, beta, seed)?;
    let fair_weights = fairness_weights(&RisVector::ones(truth.num_elements()), &design)?;
    let objective = kind.objective(&fair_weights);
    let clock = Instant::now();
    let (psi, mut trace) = match method {
        Method::Ega | Method::Rga => {
            let variant = if method == Method::Ega {
                GradientVariant::Euclidean
            } else {
                GradientVariant::Riemannian
            };
            let opts = GaOptions {
                variant,
                seed,
                ..solvers.ga.clone()
            };
            let sol = ga_optimize(&design, &objective, &opts)?;
            (sol.psi, sol.trace)
        }
        Method::So | Method::ShannonSo => {
            let opts = SoOptions {
                seed,
                shannon_mode: method == Method::ShannonSo,
                ..solvers.so.clone()
            };
            let sol = so_optimize(&design, &objective, &opts)?;
            (sol.psi, sol.trace)
        }
        Method::Ao => {
            let ao = &solvers.ao;
            let sol = ao_optimize(&design, &objective, ao.grid, ao.max_sweeps, ao.rel_tol)?;
            (sol.psi, sol.trace)
        }
    };
    let seconds = clock.elapsed().as_secs_f64();
    trace.method = method.name().to_string();
    trace.seed = seed;
    let rates = RateBreakdown::evaluate(&psi, truth);
    Ok(Solved {
        psi,
        trace,
        seconds,
        rates,
        fair_weights,
    })
}

/// One row of `results.csv`. Floats are already rounded to the emitted
/// precision, so anything derived from rows matches the files exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub method: String,
    pub objective: String,
    pub l: usize,
    pub beta: f64,
    pub seed: u64,
    pub metrics: Option<Metrics>,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub iterations: usize,
    pub wsr_equal: f64,
    pub wsr_fair: f64,
    pub min_rate: f64,
    pub rates: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub cell: Cell,
    pub row: ResultRow,
    pub seconds: f64,
    pub trace: Option<SolverTrace>,
}

/// Twelve significant digits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.11e}")
}

pub fn round_float(x: f64) -> f64 {
    fmt_float(x).parse().expect("formatted float parses")
}

fn run_cell(spec: &ExperimentSpec, cell: Cell) -> CellResult {
    let attempt = || -> Result<Solved> {
        let config = ScenarioConfig {
            num_elements: cell.l,
            csi_error_beta: cell.beta,
            rng_seed: cell.seed,
            ..spec.scenario.clone()
        };
        let (truth, _) = Scenario::generate(&config)?;
        solve(&truth, cell.method, spec.objective, cell.beta, cell.seed, &spec.solvers)
    };
    let mut row = ResultRow {
        method: cell.method.name().to_string(),
        objective: spec.objective.name().to_string(),
        l: cell.l,
        beta: cell.beta,
        seed: cell.seed,
        metrics: None,
        error: String::new(),
    };
    match attempt() {
        Ok(solved) => {
            log::info!(
                "{} L={} beta={} seed={}: {:.4} s",
                cell.method,
                cell.l,
                cell.beta,
                cell.seed,
                solved.seconds
            );
            row.metrics = Some(Metrics {
                iterations: solved.trace.iterations(),
                wsr_equal: round_float(solved.wsr_equal()),
                wsr_fair: round_float(solved.wsr_fair()),
                min_rate: round_float(solved.min_rate()),
                rates: solved.rates.rate.iter().map(|&r| round_float(r)).collect(),
            });
            CellResult {
                cell,
                row,
                seconds: solved.seconds,
                trace: Some(solved.trace),
            }
        }
        Err(e) => {
            log::error!(
                "{} L={} beta={} seed={} failed: {e}",
                cell.method,
                cell.l,
                cell.beta,
                cell.seed
            );
            row.error = e.to_string();
            CellResult {
                cell,
                row,
                seconds: 0.0,
                trace: None,
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub cells: Vec<CellResult>,
    pub summary: Vec<SummaryRow>,
}

impl ExperimentOutput {
    pub fn rows(&self) -> Vec<ResultRow> {
        self.cells.iter().map(|c| c.row.clone()).collect()
    }

    pub fn failed(&self) -> usize {
        self.cells.iter().filter(|c| c.row.metrics.is_none()).count()
    }
}

/// Runs every cell on the rayon pool. Output order follows
/// [`ExperimentSpec::cells`] regardless of scheduling.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    spec.validate()?;
    let cells: Vec<CellResult> = spec.cells().into_par_iter().map(|c| run_cell(spec, c)).collect();
    let rows: Vec<ResultRow> = cells.iter().map(|c| c.row.clone()).collect();
    Ok(ExperimentOutput {
        summary: summarize(&rows),
        cells,
    })
}

pub const RESULTS_FILE: &str = "results.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const TIMING_FILE: &str = "timing.csv";
pub const TRACES_FILE: &str = "traces.csv";
pub const SPEC_FILE: &str = "spec.toml";

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse(format!("{}: {other:?}", path.display())),
    }
}

fn write_csv(path: &Path, header: &[String], records: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for r in records {
        w.write_record(&r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

pub fn write_results(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let m = rows
        .iter()
        .filter_map(|r| r.metrics.as_ref().map(|x| x.rates.len()))
        .max()
        .unwrap_or(0);
    let mut header = strings(&[
        "method",
        "objective",
        "L",
        "beta",
        "seed",
        "status",
        "iterations",
        "wsr_equal",
        "wsr_fair",
        "min_rate",
    ]);
    header.extend((1..=m).map(|i| format!("rate_{i}")));
    header.push("error".into());
    let records = rows.iter().map(|r| {
        let mut rec = vec![
            r.method.clone(),
            r.objective.clone(),
            r.l.to_string(),
            r.beta.to_string(),
            r.seed.to_string(),
        ];
        match &r.metrics {
            Some(x) => {
                rec.push("ok".into());
                rec.push(x.iterations.to_string());
                rec.extend([x.wsr_equal, x.wsr_fair, x.min_rate].map(fmt_float));
                rec.extend((0..m).map(|i| opt(x.rates.get(i).copied())));
            }
            None => {
                rec.push("failed".into());
                rec.extend(std::iter::repeat_n(String::new(), 4 + m));
            }
        }
        rec.push(r.error.clone());
        rec
    });
    write_csv(path, &header, records)
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let mut rd = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header = rd.headers().map_err(|e| csv_error(path, e))?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse(format!("{}: missing column `{name}`", path.display())))
    };
    let [method, objective, l, beta, seed, status, iterations, wsr_equal, wsr_fair, min_rate, error] = [
        "method",
        "objective",
        "L",
        "beta",
        "seed",
        "status",
        "iterations",
        "wsr_equal",
        "wsr_fair",
        "min_rate",
        "error",
    ]
    .map(col);
    let (method, objective, l, beta, seed, status) = (method?, objective?, l?, beta?, seed?, status?);
    let (iterations, wsr_equal, wsr_fair, min_rate, error) = (iterations?, wsr_equal?, wsr_fair?, min_rate?, error?);
    let rate_cols: Vec<usize> = (1..)
        .map_while(|i| header.iter().position(|h| h == format!("rate_{i}")))
        .collect();

    let bad = |what: &str, line: usize| Error::Parse(format!("{}:{line}: bad {what}", path.display()));
    let mut out = Vec::new();
    for (k, rec) in rd.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = k + 2;
        let num = |c: usize, what: &str| rec[c].parse::<f64>().map_err(|_| bad(what, line));
        let metrics = if &rec[status] == "ok" {
            let rates = rate_cols
                .iter()
                .filter(|&&c| !rec[c].is_empty())
                .map(|&c| num(c, "rate"))
                .collect::<Result<Vec<_>>>()?;
            Some(Metrics {
                iterations: rec[iterations].parse().map_err(|_| bad("iterations", line))?,
                wsr_equal: num(wsr_equal, "wsr_equal")?,
                wsr_fair: num(wsr_fair, "wsr_fair")?,
                min_rate: num(min_rate, "min_rate")?,
                rates,
            })
        } else {
            None
        };
        out.push(ResultRow {
            method: rec[method].to_string(),
            objective: rec[objective].to_string(),
            l: rec[l].parse().map_err(|_| bad("L", line))?,
            beta: num(beta, "beta")?,
            seed: rec[seed].parse().map_err(|_| bad("seed", line))?,
            metrics,
            error: rec[error].to_string(),
        });
    }
    Ok(out)
}

pub fn write_summary(path: &Path, summary: &[SummaryRow]) -> Result<()> {
    let mut header = strings(&["method", "objective", "L", "beta", "count", "failed"]);
    for metric in ["wsr_equal", "wsr_fair", "min_rate"] {
        for stat in ["median", "q1", "q3"] {
            header.push(format!("{metric}_{stat}"));
        }
    }
    let records = summary.iter().map(|s| {
        let mut rec = vec![
            s.method.clone(),
            s.objective.clone(),
            s.l.to_string(),
            s.beta.to_string(),
            s.count.to_string(),
            s.failed.to_string(),
        ];
        for q in [s.wsr_equal, s.wsr_fair, s.min_rate] {
            rec.extend(
                q.map_or([None; 3], |q| [Some(q.median), Some(q.q1), Some(q.q3)])
                    .map(opt),
            );
        }
        rec
    });
    write_csv(path, &header, records)
}

pub fn write_timing(path: &Path, cells: &[CellResult]) -> Result<()> {
    let header = strings(&["method", "L", "beta", "seed", "iterations", "seconds"]);
    let records = cells.iter().filter(|c| c.row.metrics.is_some()).map(|c| {
        vec![
            c.row.method.clone(),
            c.row.l.to_string(),
            c.row.beta.to_string(),
            c.row.seed.to_string(),
            c.row.metrics.as_ref().map_or(0, |m| m.iterations).to_string(),
            fmt_float(c.seconds),
        ]
    });
    write_csv(path, &header, records)
}

pub fn read_timing(path: &Path) -> Result<Vec<TimingRecord>> {
    let mut rd = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut out = Vec::new();
    for (k, rec) in rd.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let bad = || Error::Parse(format!("{}:{}: malformed timing row", path.display(), k + 2));
        if rec.len() < 6 {
            return Err(bad());
        }
        out.push(TimingRecord {
            method: rec[0].to_string(),
            iterations: rec[4].parse().map_err(|_| bad())?,
            seconds: rec[5].parse().map_err(|_| bad())?,
        });
    }
    Ok(out)
}

/// Trace rows without wall-clock time, so the file is reproducible.
pub fn write_traces(path: &Path, cells: &[CellResult]) -> Result<()> {
    let header = strings(&["method", "L", "beta", "seed", "iteration", "objective", "rel_change"]);
    let records = cells.iter().flat_map(|c| {
        let t = c.trace.as_ref().map_or(&[][..], |t| &t.rows[..]);
        t.iter().map(move |r| {
            vec![
                c.row.method.clone(),
                c.row.l.to_string(),
                c.row.beta.to_string(),
                c.row.seed.to_string(),
                r.iteration.to_string(),
                fmt_float(r.objective),
                fmt_float(r.rel_change),
            ]
        })
    });
    write_csv(path, &header, records)
}

/// A trace read back from `traces.csv`, keyed by its cell.
#[derive(Debug, Clone)]
pub struct StoredTrace {
    pub l: usize,
    pub beta: f64,
    pub trace: SolverTrace,
}

pub fn read_traces(path: &Path) -> Result<Vec<StoredTrace>> {
    let mut rd = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut out: Vec<StoredTrace> = Vec::new();
    for (k, rec) in rd.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let bad = || Error::Parse(format!("{}:{}: malformed trace row", path.display(), k + 2));
        if rec.len() < 7 {
            return Err(bad());
        }
        let l: usize = rec[1].parse().map_err(|_| bad())?;
        let beta: f64 = rec[2].parse().map_err(|_| bad())?;
        let seed: u64 = rec[3].parse().map_err(|_| bad())?;
        let iteration: usize = rec[4].parse().map_err(|_| bad())?;
        let objective: f64 = rec[5].parse().map_err(|_| bad())?;
        if iteration == 0 {
            out.push(StoredTrace {
                l,
                beta,
                trace: SolverTrace::new(&rec[0], seed),
            });
        }
        let current = out.last_mut().ok_or_else(bad)?;
        current.trace.push(objective, 0.0, 0.0);
    }
    Ok(out)
}

/// Writes results, summary, timing and traces into `dir`, plus the spec
/// that produced them.
pub fn write_experiment(dir: &Path, spec: &ExperimentSpec, out: &ExperimentOutput) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_results(&dir.join(RESULTS_FILE), &out.rows())?;
    write_summary(&dir.join(SUMMARY_FILE), &out.summary)?;
    write_timing(&dir.join(TIMING_FILE), &out.cells)?;
    write_traces(&dir.join(TRACES_FILE), &out.cells)?;
    let spec_path = dir.join(SPEC_FILE);
    let resolved = ExperimentSpec {
        scenario_file: None,
        ..spec.clone()
    };
    let text = toml::to_string(&resolved).map_err(|e| Error::Parse(e.to_string()))?;
    fs::write(&spec_path, text).map_err(|e| Error::io(&spec_path, e))
}

#[cfg(test)]
mod tests;
