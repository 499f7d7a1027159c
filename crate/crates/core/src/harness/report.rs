//! Aggregates over raw results: quartile summaries, convergence tolerance,
//! timing tables and the gradient-cost scaling probe.

use std::hint::black_box;
use std::time::Instant;

use crate::error::{invalid, Result};
use crate::fblr_rate::RisVector;
use crate::gradient_opt::rate_gradients;
use crate::scenario::{Scenario, ScenarioConfig};
use crate::trace::SolverTrace;

use super::{round_float, ResultRow};

/// Linear-interpolation quantile of sorted data (`q ∈ [0, 1]`).
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quartiles {
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

impl Quartiles {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Some(Self {
            median: round_float(quantile(&v, 0.5)),
            q1: round_float(quantile(&v, 0.25)),
            q3: round_float(quantile(&v, 0.75)),
        })
    }
}

/// Per-(method, objective, L, β) statistics over seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: String,
    pub objective: String,
    pub l: usize,
    pub beta: f64,
    pub count: usize,
    pub failed: usize,
    pub wsr_equal: Option<Quartiles>,
    pub wsr_fair: Option<Quartiles>,
    pub min_rate: Option<Quartiles>,
}

/// Groups rows in order of first appearance; failed cells only count.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut keys: Vec<(&str, &str, usize, f64)> = Vec::new();
    for r in rows {
        let key = (r.method.as_str(), r.objective.as_str(), r.l, r.beta);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(method, objective, l, beta)| {
            let group: Vec<&ResultRow> = rows
                .iter()
                .filter(|r| r.method == method && r.objective == objective && r.l == l && r.beta == beta)
                .collect();
            let ok: Vec<_> = group.iter().filter_map(|r| r.metrics.as_ref()).collect();
            let col = |f: fn(&super::Metrics) -> f64| Quartiles::of(&ok.iter().map(|m| f(m)).collect::<Vec<_>>());
            SummaryRow {
                method: method.to_string(),
                objective: objective.to_string(),
                l,
                beta,
                count: ok.len(),
                failed: group.len() - ok.len(),
                wsr_equal: col(|m| m.wsr_equal),
                wsr_fair: col(|m| m.wsr_fair),
                min_rate: col(|m| m.min_rate),
            }
        })
        .collect()
}

/// Distance to the final objective along a trace.
#[derive(Debug, Clone, PartialEq)]
pub struct Convergence {
    /// `|f_k − f_final| / |f_final|`, or the absolute difference when
    /// `absolute` is set.
    pub tolerances: Vec<f64>,
    /// The final objective was zero.
    pub absolute: bool,
}

impl Convergence {
    /// First iteration whose tolerance is at most `tol`.
    pub fn iterations_to(&self, tol: f64) -> Option<usize> {
        self.tolerances.iter().position(|&t| t <= tol)
    }
}

pub fn convergence(trace: &SolverTrace) -> Convergence {
    let Some(last) = trace.final_objective() else {
        return Convergence {
            tolerances: Vec::new(),
            absolute: false,
        };
    };
    let absolute = last == 0.0;
    let scale = if absolute { 1.0 } else { last.abs() };
    Convergence {
        tolerances: trace.rows.iter().map(|r| (r.objective - last).abs() / scale).collect(),
        absolute,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingRecord {
    pub method: String,
    pub iterations: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub method: String,
    pub runs: usize,
    pub total_seconds: f64,
    pub mean_seconds: f64,
    /// Total time over total iterations; zero if no iterations ran.
    pub seconds_per_iteration: f64,
}

/// Per-method wall-clock totals, in order of first appearance.
pub fn timing_report(records: &[TimingRecord]) -> Vec<TimingRow> {
    let mut methods: Vec<&str> = Vec::new();
    for r in records {
        if !methods.contains(&r.method.as_str()) {
            methods.push(&r.method);
        }
    }
    methods
        .into_iter()
        .map(|method| {
            let group: Vec<_> = records.iter().filter(|r| r.method == method).collect();
            let total: f64 = group.iter().map(|r| r.seconds).sum();
            let iters: usize = group.iter().map(|r| r.iterations).sum();
            TimingRow {
                method: method.to_string(),
                runs: group.len(),
                total_seconds: total,
                mean_seconds: total / group.len() as f64,
                seconds_per_iteration: if iters == 0 { 0.0 } else { total / iters as f64 },
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingProbe {
    /// `(L, median seconds per gradient evaluation)`.
    pub points: Vec<(usize, f64)>,
    /// Least-squares slope of `ln t` against `ln L`.
    pub exponent: f64,
}

/// Times the full set of Euclidean rate gradients at a random point for each
/// surface size. Each sample times `batch` back-to-back evaluations.
pub fn gradient_scaling_probe(
    base: &ScenarioConfig,
    sizes: &[usize],
    samples: usize,
    batch: usize,
) -> Result<ScalingProbe> {
    if sizes.len() < 2 || samples == 0 || batch == 0 {
        return Err(invalid("scaling probe needs two sizes and at least one sample"));
    }
    let mut points = Vec::with_capacity(sizes.len());
    for &l in sizes {
        let config = ScenarioConfig {
            num_elements: l,
            ..base.clone()
        };
        let (scenario, _) = Scenario::generate(&config)?;
        let psi = RisVector::ones(l);
        // warm-up
        rate_gradients(psi.as_slice(), &scenario)?;
        let mut times = Vec::with_capacity(samples);
        for _ in 0..samples {
            let t = Instant::now();
            for _ in 0..batch {
                black_box(rate_gradients(black_box(psi.as_slice()), &scenario)?);
            }
            times.push(t.elapsed().as_secs_f64() / batch as f64);
        }
        times.sort_by(f64::total_cmp);
        points.push((l, quantile(&times, 0.5)));
    }
    let xs: Vec<f64> = points.iter().map(|&(l, _)| (l as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, t)| t.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(invalid("scaling probe needs distinct sizes"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(ScalingProbe {
        points,
        exponent: sxy / sxx,
    })
}
