//! Maximizing the surrogate over the relaxed set.
//!
//! Two parameterizations share one spectral projected-gradient loop:
//! a factor `V` with `Φ = VVᴴ` (row norms ≤ 1), and the full matrix `Φ`
//! with Dykstra projections.

use super::dykstra::dykstra_project;
use super::surrogate::Expansion;
use crate::linalg::{CMatrix, C64};

/// Scalar surrogate objective over the traces.
#[derive(Debug, Clone, PartialEq)]
pub enum InnerObjective {
    Weighted(Vec<f64>),
    /// `−μ log Σ exp(−R̃_i/μ)`.
    SoftMin(f64),
}

impl InnerObjective {
    pub fn value(&self, rates: &[f64]) -> f64 {
        match self {
            InnerObjective::Weighted(w) => rates.iter().zip(w).map(|(r, w)| r * w).sum(),
            InnerObjective::SoftMin(mu) => {
                let m = rates.iter().copied().fold(f64::INFINITY, f64::min);
                let s: f64 = rates.iter().map(|r| (-(r - m) / mu).exp()).sum();
                m - mu * s.ln()
            }
        }
    }

    /// Weights `∂F/∂R̃_i`.
    pub fn rate_weights(&self, rates: &[f64]) -> Vec<f64> {
        match self {
            InnerObjective::Weighted(w) => w.clone(),
            InnerObjective::SoftMin(mu) => {
                let m = rates.iter().copied().fold(f64::INFINITY, f64::min);
                let e: Vec<f64> = rates.iter().map(|r| (-(r - m) / mu).exp()).collect();
                let s: f64 = e.iter().sum();
                e.iter().map(|x| x / s).collect()
            }
        }
    }
}

/// Point in one of the two parameterizations.
#[derive(Debug, Clone, PartialEq)]
pub enum Point {
    Factor(CMatrix),
    Full(CMatrix),
}

impl Point {
    pub fn matrix(&self) -> &CMatrix {
        match self {
            Point::Factor(m) | Point::Full(m) => m,
        }
    }

    /// `Φ` itself.
    pub fn lifted(&self) -> CMatrix {
        match self {
            Point::Factor(v) => v * v.adjoint(),
            Point::Full(phi) => phi.clone(),
        }
    }
}

/// Channel data in matrix form: column `j` of `hc` is `h_j`.
#[derive(Debug, Clone)]
pub struct Channels {
    pub hc: CMatrix,
    pub powers: Vec<f64>,
}

impl Channels {
    pub fn new(cascaded: &[Vec<C64>], powers: &[f64]) -> Self {
        let l = cascaded.first().map_or(0, Vec::len);
        let hc = CMatrix::from_fn(l, cascaded.len(), |r, c| cascaded[c][r]);
        Self {
            hc,
            powers: powers.to_vec(),
        }
    }

    /// `HcᴴV` for a factor, `ΦHc` for a full matrix.
    fn products(&self, point: &Point) -> CMatrix {
        match point {
            Point::Factor(v) => self.hc.adjoint() * v,
            Point::Full(phi) => phi * &self.hc,
        }
    }

    fn traces_from(&self, point: &Point, prod: &CMatrix) -> Vec<f64> {
        match point {
            Point::Factor(_) => (0..self.powers.len())
                .map(|j| self.powers[j] * prod.row(j).norm_squared())
                .collect(),
            Point::Full(_) => (0..self.powers.len())
                .map(|j| self.powers[j] * self.hc.column(j).dotc(&prod.column(j)).re)
                .collect(),
        }
    }

    /// `t_j = tr(Φ H_j)`.
    pub fn traces(&self, point: &Point) -> Vec<f64> {
        self.traces_from(point, &self.products(point))
    }

    /// Gradient of `Σ_j c_j t_j` with respect to the point's coordinates.
    fn gradient_from(&self, point: &Point, prod: &CMatrix, coeffs: &[f64]) -> CMatrix {
        let scale: Vec<C64> = coeffs
            .iter()
            .zip(&self.powers)
            .map(|(c, p)| C64::new(c * p, 0.0))
            .collect();
        match point {
            Point::Factor(_) => {
                let mut w = prod.clone();
                for (j, mut row) in w.row_iter_mut().enumerate() {
                    row *= scale[j] * 2.0;
                }
                &self.hc * w
            }
            Point::Full(_) => {
                let mut w = self.hc.adjoint();
                for (j, mut row) in w.row_iter_mut().enumerate() {
                    row *= scale[j];
                }
                &self.hc * w
            }
        }
    }
}

fn real_dot(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

/// Scales any row of `V` with norm above one back onto the unit sphere.
pub fn project_rows(v: &CMatrix) -> CMatrix {
    let mut out = v.clone();
    for mut row in out.row_iter_mut() {
        let n = row.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if n > 1.0 {
            row /= C64::new(n, 0.0);
        }
    }
    out
}

fn project(point: &Point, moved: CMatrix, dykstra_tol: f64) -> Point {
    match point {
        Point::Factor(_) => Point::Factor(project_rows(&moved)),
        Point::Full(_) => Point::Full(dykstra_project(&moved, dykstra_tol, 500)),
    }
}

fn with_matrix(point: &Point, m: CMatrix) -> Point {
    match point {
        Point::Factor(_) => Point::Factor(m),
        Point::Full(_) => Point::Full(m),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpgParams {
    pub max_iters: usize,
    pub tol: f64,
    pub slope: f64,
    pub dykstra_tol: f64,
}

#[derive(Debug, Clone)]
pub struct InnerResult {
    pub point: Point,
    /// Set when the iteration cap stopped the ascent.
    pub capped: bool,
}

/// Spectral projected gradient ascent with an Armijo test along the
/// projected direction.
pub fn spg_maximize(
    expansion: &Expansion,
    channels: &Channels,
    objective: &InnerObjective,
    start: Point,
    params: &SpgParams,
) -> InnerResult {
    struct Eval {
        value: f64,
        traces: Vec<f64>,
        prod: CMatrix,
    }
    let eval = |p: &Point| -> Eval {
        let prod = channels.products(p);
        let traces = channels.traces_from(p, &prod);
        let value = objective.value(&expansion.values(&traces).rate);
        Eval { value, traces, prod }
    };
    let grad_at = |p: &Point, e: &Eval| -> CMatrix {
        let w = objective.rate_weights(&expansion.values(&e.traces).rate);
        let coeffs = expansion.weighted_gradient(&e.traces, &w);
        channels.gradient_from(p, &e.prod, &coeffs)
    };

    let mut x = start;
    let e0 = eval(&x);
    let mut f = e0.value;
    let mut g = grad_at(&x, &e0);
    let gnorm = g.norm();
    if !(gnorm > 0.0) || !f.is_finite() {
        return InnerResult {
            point: x,
            capped: false,
        };
    }
    let base_step = x.matrix().norm().max(1.0) / gnorm;
    let (step_min, step_max) = (base_step * 1e-10, base_step * 1e10);
    let mut step = base_step;
    let mut iterations = 0;
    let mut quiet = 0;

    while iterations < params.max_iters {
        iterations += 1;
        let target = project(&x, x.matrix() + &g * C64::new(step, 0.0), params.dykstra_tol);
        let d = target.matrix() - x.matrix();
        let slope = real_dot(&g, &d);
        if !(slope > 0.0) {
            break;
        }
        // backtrack along the feasible segment x + λd
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let trial = with_matrix(&x, x.matrix() + &d * C64::new(lambda, 0.0));
            let e = eval(&trial);
            if e.value.is_finite() && e.value >= f + params.slope * lambda * slope {
                accepted = Some((trial, e));
                break;
            }
            lambda *= 0.5;
        }
        let Some((next, en)) = accepted else {
            break;
        };
        let gn = grad_at(&next, &en);
        let fn_ = en.value;
        let s = next.matrix() - x.matrix();
        let y = &gn - &g;
        let sy = real_dot(&s, &y);
        let ss = real_dot(&s, &s);
        step = if sy < 0.0 {
            (ss / -sy).clamp(step_min, step_max)
        } else {
            step_max.min(step * 4.0)
        };
        let gain = fn_ - f;
        x = next;
        f = fn_;
        g = gn;
        if gain <= params.tol * f.abs().max(1.0) {
            quiet += 1;
            if quiet >= 3 {
                break;
            }
        } else {
            quiet = 0;
        }
    }
    InnerResult {
        point: x,
        capped: iterations >= params.max_iters,
    }
}
