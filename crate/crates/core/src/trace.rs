//! Per-iteration solver records.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub objective: f64,
    pub step: f64,
    /// `|f_k − f_{k−1}| / |f_{k−1}|`, zero on the first row.
    pub rel_change: f64,
    /// Cumulative wall-clock seconds since the solver started.
    pub elapsed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverTrace {
    pub method: String,
    pub seed: u64,
    pub rows: Vec<TraceRow>,
}

impl SolverTrace {
    pub fn new(method: impl Into<String>, seed: u64) -> Self {
        Self {
            method: method.into(),
            seed,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, objective: f64, step: f64, elapsed: f64) {
        let rel_change = match self.rows.last() {
            Some(prev) => relative_change(prev.objective, objective),
            None => 0.0,
        };
        self.rows.push(TraceRow {
            iteration: self.rows.len(),
            objective,
            step,
            rel_change,
            elapsed,
        });
    }

    pub fn objectives(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.objective).collect()
    }

    /// Iterations performed after the initial point.
    pub fn iterations(&self) -> usize {
        self.rows.len().saturating_sub(1)
    }

    pub fn final_objective(&self) -> Option<f64> {
        self.rows.last().map(|r| r.objective)
    }

    pub fn elapsed(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.elapsed)
    }
}

pub fn relative_change(prev: f64, next: f64) -> f64 {
    let d = (next - prev).abs();
    if prev == 0.0 {
        d
    } else {
        d / prev.abs()
    }
}
