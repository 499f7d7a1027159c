//! Sequential optimization over the lifted matrix `Φ = ψ*ψᵀ`.
//!
//! Each outer iteration maximizes a concave lower bound of the rates around
//! the current `Φ` over `{Φ ⪰ 0, Φ_ll ≤ 1}`. A rank-one RIS vector is
//! recovered from the final `Φ` by Gaussian randomization.

mod dykstra;
mod inner;
mod surrogate;

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use dykstra::{dykstra_project, project_psd, restore_feasibility};
pub use inner::{project_rows, InnerObjective};
pub use surrogate::{Expansion, SurrogateValues};

use inner::{spg_maximize, Channels, Point, SpgParams};

use crate::error::{invalid, Error, Result};
use crate::fblr_rate::{rates_from_powers, Objective, RisVector};
use crate::gradient_opt::{project_feasible, ProjectionMode};
use crate::linalg::{complex_normal, hermitian_eigen, hermitian_part, CMatrix, C64};
use crate::scenario::{ChannelSet, Scenario};
use crate::trace::{relative_change, SolverTrace};

const HERMITIAN_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;
const DIAG_SLACK: f64 = 1e-9;
const SOFTMIN_DECAY: f64 = 0.1;

/// Hermitian PSD matrix with `Φ_ll ≤ 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedMatrix(CMatrix);

impl LiftedMatrix {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(invalid("lifted matrix must be square"));
        }
        let scale = matrix.norm().max(1.0);
        if (&matrix - matrix.adjoint()).camax() > HERMITIAN_TOL * scale {
            return Err(invalid("lifted matrix is not Hermitian"));
        }
        let matrix = hermitian_part(&matrix);
        if (0..matrix.nrows()).any(|l| matrix[(l, l)].re > 1.0 + DIAG_SLACK) {
            return Err(invalid("lifted matrix has a diagonal entry above one"));
        }
        if matrix.nrows() > 0 {
            let (values, _) = hermitian_eigen(&matrix);
            if values[0] < -PSD_TOL * scale {
                return Err(invalid(format!("lifted matrix is not PSD (λ_min = {:e})", values[0])));
            }
        }
        Ok(Self(matrix))
    }

    /// `VVᴴ`; feasible whenever every row of `V` has norm at most one.
    pub fn from_factor(v: &CMatrix) -> Result<Self> {
        Self::new(hermitian_part(&(v * v.adjoint())))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_inner(self) -> CMatrix {
        self.0
    }

    /// `tr(Φ H_j)` for every sensor.
    pub fn traces(&self, channels: &ChannelSet) -> Vec<f64> {
        Channels::new(&channels.cascaded, &channels.powers).traces(&Point::Full(self.0.clone()))
    }

    /// Eigenvalues in descending order.
    pub fn spectrum(&self) -> Vec<f64> {
        let (mut values, _) = hermitian_eigen(&self.0);
        values.reverse();
        values
    }

    /// Number of eigenvalues above `tol · λ_max`.
    pub fn rank(&self, tol: f64) -> usize {
        let s = self.spectrum();
        let top = s.first().copied().unwrap_or(0.0);
        s.iter().filter(|&&x| x > tol * top).count()
    }

    /// `V = U·√Λ` over the positive eigenvalues, so that `Φ = VVᴴ`.
    pub fn factor(&self) -> CMatrix {
        let (values, vectors) = hermitian_eigen(&self.0);
        let n = values.len();
        let keep: Vec<usize> = (0..n).rev().filter(|&k| values[k] > 0.0).collect();
        CMatrix::from_fn(n, keep.len().max(1), |r, c| match keep.get(c) {
            Some(&k) => vectors[(r, k)] * values[k].sqrt(),
            None => C64::new(0.0, 0.0),
        })
    }
}

/// `Φ = ψ*ψᵀ`, so that `tr(Φ H_j) = P_j |ψᵀh_j|²`.
pub fn lift(psi: &RisVector) -> LiftedMatrix {
    let p = psi.as_slice();
    let n = p.len();
    LiftedMatrix(CMatrix::from_fn(n, n, |r, c| p[r].conj() * p[c]))
}

fn expansion_pair(
    phi: &LiftedMatrix,
    phi_prev: &LiftedMatrix,
    i: usize,
    scenario: &Scenario,
) -> Result<(Expansion, Vec<f64>)> {
    let l = scenario.num_elements();
    if phi.dim() != l || phi_prev.dim() != l {
        return Err(invalid("lifted matrix size does not match the scenario"));
    }
    if i >= scenario.num_sensors() {
        return Err(invalid(format!("sensor index {i} out of range")));
    }
    let exp = Expansion::new(&phi_prev.traces(&scenario.channels), scenario)?;
    Ok((exp, phi.traces(&scenario.channels)))
}

/// Concave lower bound `C̃_i(Φ; Φ_prev)` on the capacity of sensor `i`.
pub fn capacity_lower_bound(phi: &LiftedMatrix, phi_prev: &LiftedMatrix, i: usize, scenario: &Scenario) -> Result<f64> {
    let (exp, t) = expansion_pair(phi, phi_prev, i, scenario)?;
    Ok(exp.capacity(&t, i))
}

/// Convex upper bound `Δ̃_i(Φ; Φ_prev)` on the dispersion root of sensor `i`.
pub fn dispersion_upper_bound(
    phi: &LiftedMatrix,
    phi_prev: &LiftedMatrix,
    i: usize,
    scenario: &Scenario,
) -> Result<f64> {
    let (exp, t) = expansion_pair(phi, phi_prev, i, scenario)?;
    Ok(exp.dispersion(&t, i))
}

/// `R̃_i = C̃_i − a_i Δ̃_i`.
pub fn surrogate_rate(phi: &LiftedMatrix, phi_prev: &LiftedMatrix, i: usize, scenario: &Scenario) -> Result<f64> {
    let (exp, t) = expansion_pair(phi, phi_prev, i, scenario)?;
    Ok(exp.values(&t).rate[i])
}

/// Objective of the (unclamped) rates induced by `Φ`.
pub fn relaxed_objective(phi: &LiftedMatrix, scenario: &Scenario, objective: &Objective) -> f64 {
    objective.value(&rates_from_powers(&phi.traces(&scenario.channels), scenario))
}

/// How each inner problem is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InnerMethod {
    /// Projected ascent on a factor `V` with `Φ = VVᴴ` and unit-bounded rows.
    #[default]
    Factored,
    /// Projected ascent on `Φ` with Dykstra projections; `O(L³)` per step.
    LiftedDykstra,
}

/// Whether a restart first converges on the capacity (zero-penalty) problem
/// and continues from there.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
/// Capacity-only stage run before the finite-blocklength stage of each
/// restart. When it runs, its randomized vectors also join the candidate
/// pool, so the design never loses to `shannon_mode` with the same seed.
pub enum Continuation {
    /// No capacity stage.
    Off,
    /// Every restart continues from the capacity stage.
    On,
    /// Even-numbered restarts continue from the capacity stage, odd ones
    /// restart the finite-blocklength stage from the original start.
    #[default]
    Alternate,
}

impl Continuation {
    fn runs(self) -> bool {
        self != Continuation::Off
    }

    fn applies(self, restart: usize) -> bool {
        match self {
            Continuation::Off => false,
            Continuation::On => true,
            Continuation::Alternate => restart.is_multiple_of(2),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SoOptions {
    pub max_outer_iters: usize,
    pub outer_rel_tol: f64,
    pub inner_max_iters: usize,
    pub inner_tol: f64,
    pub inner_method: InnerMethod,
    /// Columns of the factor; `None` picks `min(L, ⌈√(2(L+M))⌉ + 1)`.
    pub factor_rank: Option<usize>,
    /// Soft-min temperatures for the min-rate objective; each inner solve
    /// walks a geometric ladder from start to end.
    pub softmin_start: f64,
    pub softmin_end: f64,
    pub samples: usize,
    pub restarts: usize,
    pub seed: u64,
    pub capacity_stage: Continuation,
    /// Design for capacity only (`n → ∞`); the result is still scored with
    /// the finite-blocklength rates.
    pub shannon_mode: bool,
}

impl Default for SoOptions {
    fn default() -> Self {
        Self {
            max_outer_iters: 1000,
            outer_rel_tol: 1e-8,
            inner_max_iters: 500,
            inner_tol: 1e-7,
            inner_method: InnerMethod::Factored,
            factor_rank: None,
            softmin_start: 0.05,
            softmin_end: 1e-5,
            samples: 200,
            restarts: 10,
            seed: 0,
            capacity_stage: Continuation::Alternate,
            shannon_mode: false,
        }
    }
}

impl SoOptions {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(invalid("randomization needs at least one sample"));
        }
        if self.restarts == 0 {
            return Err(invalid("restarts must be at least 1"));
        }
        if !(self.outer_rel_tol >= 0.0 && self.inner_tol >= 0.0) {
            return Err(invalid("tolerances must be nonnegative"));
        }
        if !(self.softmin_start > 0.0 && self.softmin_end > 0.0 && self.softmin_end <= self.softmin_start) {
            return Err(invalid("soft-min temperatures must satisfy 0 < end ≤ start"));
        }
        if self.factor_rank == Some(0) {
            return Err(invalid("factor rank must be positive"));
        }
        Ok(())
    }

    /// Geometric ladder from `softmin_start` down to `softmin_end`.
    fn temperatures(&self) -> Vec<f64> {
        let mut out = vec![self.softmin_start];
        while let Some(&mu) = out.last().filter(|&&mu| mu > self.softmin_end * (1.0 + 1e-12)) {
            out.push((mu * SOFTMIN_DECAY).max(self.softmin_end));
        }
        out
    }

    fn rank_for(&self, l: usize, m: usize) -> usize {
        let auto = (2.0 * (l + m) as f64).sqrt().ceil() as usize + 1;
        self.factor_rank.unwrap_or(auto).min(l).max(1)
    }
}

#[derive(Debug, Clone)]
pub struct SoSolution {
    /// Relaxed matrix of the restart with the best relaxed objective.
    pub relaxed: LiftedMatrix,
    /// Design objective at `relaxed`.
    pub relaxed_objective: f64,
    /// Best randomized vector over all restarts.
    pub psi: RisVector,
    /// Internal objective at `psi` under the finite-blocklength rates.
    pub objective: f64,
    pub trace: SolverTrace,
}

struct Run {
    point: Point,
    value: f64,
    trace: SolverTrace,
    /// End of the capacity stage, if it ran.
    capacity: Option<Point>,
}

fn point_value(point: &Point, channels: &Channels, scenario: &Scenario, objective: &Objective) -> f64 {
    objective.value(&rates_from_powers(&channels.traces(point), scenario))
}

fn inner_solve(
    expansion: &Expansion,
    channels: &Channels,
    objective: &InnerObjective,
    start: Point,
    options: &SoOptions,
) -> Point {
    let params = SpgParams {
        max_iters: options.inner_max_iters,
        tol: options.inner_tol,
        slope: 1e-4,
        dykstra_tol: 1e-10,
    };
    let res = spg_maximize(expansion, channels, objective, start, &params);
    if res.capped {
        log::debug!("inner solver reached {} iterations", params.max_iters);
    }
    res.point
}

#[allow(clippy::too_many_arguments)]
fn single_run(
    scenario: &Scenario,
    objective: &Objective,
    options: &SoOptions,
    channels: &Channels,
    psi0: &RisVector,
    restart: Option<usize>,
    rng: &mut ChaCha8Rng,
    clock: Instant,
) -> Result<Run> {
    let l = scenario.num_elements();
    let conj0: Vec<C64> = psi0.as_slice().iter().map(|z| z.conj()).collect();
    let (mut point, mut start) = match options.inner_method {
        InnerMethod::Factored => {
            let r = options.rank_for(l, scenario.num_sensors());
            let v = CMatrix::from_fn(l, r, |row, c| if c == 0 { conj0[row] } else { C64::new(0.0, 0.0) });
            // Nudge the empty columns so the ascent can leave rank one.
            let mut nudged = v.clone();
            for c in 1..r {
                for row in 0..l {
                    nudged[(row, c)] = complex_normal(rng) * 1e-3;
                }
            }
            (Point::Factor(v), Point::Factor(project_rows(&nudged)))
        }
        InnerMethod::LiftedDykstra => {
            let phi = lift(psi0).into_inner();
            (Point::Full(phi.clone()), Point::Full(phi))
        }
    };

    let stage = options.capacity_stage;
    let mut capacity = None;
    if let Some(k) = restart.filter(|_| stage.runs() && !scenario.is_shannon()) {
        let (warm, _) = mm_loop(
            &scenario.shannon(),
            objective,
            options,
            channels,
            point.clone(),
            start.clone(),
            None,
            clock,
        )?;
        if stage.applies(k) {
            start = warm.clone();
            point = warm.clone();
        }
        capacity = Some(warm);
    }
    let mut trace = SolverTrace::new("so", options.seed);
    let (point, value) = mm_loop(
        scenario,
        objective,
        options,
        channels,
        point,
        start,
        Some(&mut trace),
        clock,
    )?;
    Ok(Run {
        point,
        value,
        trace,
        capacity,
    })
}

/// Outer majorize-minimize iterations from `point`, with the first inner
/// solve started at `start`.
#[allow(clippy::too_many_arguments)]
fn mm_loop(
    scenario: &Scenario,
    objective: &Objective,
    options: &SoOptions,
    channels: &Channels,
    mut point: Point,
    mut start: Point,
    mut trace: Option<&mut SolverTrace>,
    clock: Instant,
) -> Result<(Point, f64)> {
    let mut value = point_value(&point, channels, scenario, objective);
    if let Some(t) = trace.as_deref_mut() {
        t.push(value, 0.0, clock.elapsed().as_secs_f64());
    }
    let stages: Vec<InnerObjective> = match objective {
        Objective::WeightedSum(w) => vec![InnerObjective::Weighted(w.clone())],
        Objective::MinRate => options
            .temperatures()
            .into_iter()
            .map(InnerObjective::SoftMin)
            .collect(),
    };
    for k in 0..options.max_outer_iters {
        let expansion = match Expansion::new(&channels.traces(&point), scenario) {
            Ok(e) => e,
            Err(Error::DegenerateExpansion { sensor, reason }) if k > 0 => {
                log::warn!("stopping early, sensor {sensor}: {reason}");
                break;
            }
            Err(e) => return Err(e),
        };
        let candidate = stages
            .iter()
            .fold(start, |p, stage| inner_solve(&expansion, channels, stage, p, options));
        let cand_value = point_value(&candidate, channels, scenario, objective);
        let prev = value;
        if cand_value >= value {
            point = candidate;
            value = cand_value;
        }
        start = point.clone();
        if let Some(t) = trace.as_deref_mut() {
            t.push(value, 1.0, clock.elapsed().as_secs_f64());
        }
        if relative_change(prev, value) < options.outer_rel_tol {
            break;
        }
    }
    Ok((point, value))
}

fn factor_of(point: &Point) -> CMatrix {
    match point {
        Point::Factor(v) => v.clone(),
        Point::Full(phi) => LiftedMatrix(phi.clone()).factor(),
    }
}

fn unit_phases(x: &[C64]) -> Vec<C64> {
    x.iter()
        .map(|z| {
            if z.norm() > 0.0 {
                z / z.norm()
            } else {
                C64::new(1.0, 0.0)
            }
        })
        .collect()
}

fn randomize_factor(
    v: &CMatrix,
    scenario: &Scenario,
    objective: &Objective,
    samples: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(RisVector, f64)> {
    let (l, r) = v.shape();
    let mut best: Option<(Vec<C64>, f64)> = None;
    let mut consider = |psi: Vec<C64>| {
        let val = objective.internal_value(&psi, scenario);
        if best.as_ref().is_none_or(|(_, b)| val > *b) {
            best = Some((psi, val));
        }
    };

    // principal direction of Φ = VVᴴ
    let svd = v.clone().svd(true, false);
    if let Some(u) = svd.u.as_ref() {
        let k = svd.singular_values.imax();
        let sigma = svd.singular_values[k];
        let lead: Vec<C64> = u.column(k).iter().map(|z| z.conj() * sigma).collect();
        consider(project_feasible(&lead, ProjectionMode::ClipPerElement));
        consider(unit_phases(&lead));
    }

    for _ in 0..samples {
        let z: Vec<C64> = (0..r).map(|_| complex_normal(rng)).collect();
        let xi: Vec<C64> = (0..l)
            .map(|row| (0..r).map(|c| v[(row, c)] * z[c]).sum::<C64>().conj())
            .collect();
        consider(project_feasible(&xi, ProjectionMode::ClipPerElement));
        consider(unit_phases(&xi));
    }
    let (psi, val) = best.expect("at least one candidate");
    Ok((RisVector::new(psi)?, val))
}

/// Rank-one recovery: draws `ξ ~ CN(0, Φ)`, maps `ψ = ξ*` to the feasible set
/// (clipped and unit-modulus variants) and keeps the best candidate,
/// including the principal eigenvector.
pub fn gaussian_randomization(
    phi: &LiftedMatrix,
    scenario: &Scenario,
    objective: &Objective,
    samples: usize,
    rng: &mut ChaCha8Rng,
) -> Result<RisVector> {
    if samples == 0 {
        return Err(invalid("randomization needs at least one sample"));
    }
    if phi.dim() != scenario.num_elements() {
        return Err(invalid("lifted matrix size does not match the scenario"));
    }
    objective.validate(scenario.num_sensors())?;
    Ok(randomize_factor(&phi.factor(), scenario, objective, samples, rng)?.0)
}

/// Stream 0 of the seed draws the starts; restart `k` uses stream `k + 1`.
fn restart_rng(seed: u64, stream: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

fn run_restarts(
    scenario: &Scenario,
    objective: &Objective,
    options: &SoOptions,
    starts: Vec<RisVector>,
) -> Result<SoSolution> {
    let design = if options.shannon_mode {
        scenario.shannon()
    } else {
        scenario.clone()
    };
    let channels = Channels::new(&scenario.channels.cascaded, &scenario.channels.powers);
    let clock = Instant::now();
    let mut best_run: Option<Run> = None;
    let mut best_psi: Option<(RisVector, f64)> = None;
    let mut keep = |candidate: (RisVector, f64)| {
        if best_psi.as_ref().is_none_or(|(_, b)| candidate.1 > *b) {
            best_psi = Some(candidate);
        }
    };
    for (k, psi0) in starts.iter().enumerate() {
        let mut rng = restart_rng(options.seed, k + 1);
        let run = single_run(&design, objective, options, &channels, psi0, Some(k), &mut rng, clock)?;
        // Same draws as the capacity-only design of this restart would use.
        if let Some(capacity) = &run.capacity {
            keep(randomize_factor(
                &factor_of(capacity),
                &design,
                objective,
                options.samples,
                &mut rng,
            )?);
        }
        keep(randomize_factor(
            &factor_of(&run.point),
            &design,
            objective,
            options.samples,
            &mut rng,
        )?);
        if best_run.as_ref().is_none_or(|b| run.value > b.value) {
            best_run = Some(run);
        }
    }
    let mut run = best_run.expect("at least one restart");
    let (psi, psi_value) = best_psi.expect("at least one restart");
    if psi_value > run.value {
        // A randomized vector from another restart beat every relaxed
        // point; continue the relaxed ascent from its lift.
        let mut rng = restart_rng(options.seed, starts.len() + 1);
        let polished = single_run(&design, objective, options, &channels, &psi, None, &mut rng, clock)?;
        if polished.value > run.value {
            run = polished;
        }
    }
    let relaxed = LiftedMatrix::new(run.point.lifted())?;
    Ok(SoSolution {
        relaxed,
        relaxed_objective: run.value,
        objective: objective.internal_value(psi.as_slice(), scenario),
        psi,
        trace: run.trace,
    })
}

/// Multi-start sequential optimization from random unit-modulus vectors.
pub fn so_optimize(scenario: &Scenario, objective: &Objective, options: &SoOptions) -> Result<SoSolution> {
    options.validate()?;
    objective.validate(scenario.num_sensors())?;
    let mut rng = restart_rng(options.seed, 0);
    let starts = (0..options.restarts)
        .map(|_| RisVector::random_unit(&mut rng, scenario.num_elements()))
        .collect();
    run_restarts(scenario, objective, options, starts)
}

/// Single run from a caller-provided start.
pub fn so_optimize_from(
    scenario: &Scenario,
    objective: &Objective,
    options: &SoOptions,
    start: &RisVector,
) -> Result<SoSolution> {
    options.validate()?;
    objective.validate(scenario.num_sensors())?;
    if start.len() != scenario.num_elements() {
        return Err(invalid("start vector length does not match the scenario"));
    }
    run_restarts(scenario, objective, options, vec![start.clone()])
}
