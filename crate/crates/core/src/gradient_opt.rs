//! Projected gradient ascent on `ψ` with Euclidean and Riemannian gradients
//! and Armijo backtracking.
//!
//! Gradients use the real-coordinate convention
//! `g_l = ∂f/∂Re ψ_l + j·∂f/∂Im ψ_l = 2·∂f/∂ψ_l*`, so `ψ + α·g` is an ascent
//! step and `Re{gᴴd}` is the directional derivative along `d`. They are
//! assembled from the lifted matrices: `∇s_j = 2·conj(H_j ψ*)` for the
//! received power `s_j = ψᵀH_jψ*`.

use std::f64::consts::LN_2;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fblr_rate::{active_index, rates_from_powers, Objective, RisVector};
use crate::linalg::{max_abs, norm_sqr, real_inner, C64};
use crate::scenario::Scenario;
use crate::trace::SolverTrace;

/// Received powers below this multiple of the noise power make `∇Δ_i` singular.
pub const SINGULAR_POWER_RATIO: f64 = 1e-30;
/// Tolerance on `|ψ_l| = 1` for manifold points.
pub const UNIT_MODULUS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GradientVariant {
    #[default]
    Euclidean,
    Riemannian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionMode {
    /// Exact Euclidean projection: each `|ψ_l| > 1` pulled back to the unit circle.
    #[default]
    ClipPerElement,
    /// `ψ / max_l |ψ_l|` whenever the largest modulus exceeds one.
    ScaleByMax,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArmijoParams {
    pub initial_step: f64,
    pub contraction: f64,
    pub slope: f64,
    pub max_backtracks: usize,
}

impl Default for ArmijoParams {
    fn default() -> Self {
        Self {
            initial_step: 1.0,
            contraction: 0.5,
            slope: 1e-4,
            max_backtracks: 40,
        }
    }
}

impl ArmijoParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.initial_step > 0.0) {
            return Err(invalid("Armijo initial step must be positive"));
        }
        if !(self.contraction > 0.0 && self.contraction < 1.0) {
            return Err(invalid("Armijo contraction must lie in (0, 1)"));
        }
        if !(self.slope > 0.0 && self.slope < 1.0) {
            return Err(invalid("Armijo slope must lie in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaOptions {
    pub variant: GradientVariant,
    pub projection: ProjectionMode,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub armijo: ArmijoParams,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for GaOptions {
    fn default() -> Self {
        Self {
            variant: GradientVariant::Euclidean,
            projection: ProjectionMode::ClipPerElement,
            max_iters: 2000,
            rel_tol: 1e-6,
            armijo: ArmijoParams::default(),
            restarts: 10,
            seed: 0,
        }
    }
}

impl GaOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(invalid("max_iters must be at least 1"));
        }
        if !(self.rel_tol > 0.0) {
            return Err(invalid("rel_tol must be positive"));
        }
        if self.restarts == 0 {
            return Err(invalid("restarts must be at least 1"));
        }
        self.armijo.validate()
    }
}

/// Per-sensor pieces of the rate gradient at one point.
#[derive(Debug, Clone)]
pub struct RateGradients {
    /// `∇C_i` per sensor.
    pub capacity: Vec<Vec<C64>>,
    /// `∇Δ_i` per sensor.
    pub dispersion: Vec<Vec<C64>>,
    /// Unclamped `R_i(ψ)`.
    pub rates: Vec<f64>,
}

impl RateGradients {
    /// `∇R_i = ∇C_i − a_i·∇Δ_i`.
    pub fn rate(&self, i: usize, penalties: &[f64]) -> Vec<C64> {
        self.capacity[i]
            .iter()
            .zip(&self.dispersion[i])
            .map(|(c, d)| c - d * penalties[i])
            .collect()
    }
}

/// `∇s_j = 2·conj(H_j ψ*)` together with `s_j`, for every sensor.
fn power_gradients(psi: &[C64], scenario: &Scenario) -> (Vec<f64>, Vec<Vec<C64>>) {
    let l = psi.len();
    let conj: Vec<C64> = psi.iter().map(|z| z.conj()).collect();
    let mut powers = Vec::with_capacity(scenario.num_sensors());
    let mut grads = Vec::with_capacity(scenario.num_sensors());
    for h in &scenario.channels.lifted {
        let mut g = vec![C64::new(0.0, 0.0); l];
        // column-major: accumulate H[:, c] · ψ*_c
        for (c, &pc) in conj.iter().enumerate() {
            let col = h.column(c);
            for (gr, hr) in g.iter_mut().zip(col.iter()) {
                *gr += hr * pc;
            }
        }
        let s: C64 = psi.iter().zip(&g).map(|(p, x)| p * x).sum();
        powers.push(s.re.max(0.0));
        grads.push(g.iter().map(|x| x.conj() * 2.0).collect());
    }
    (powers, grads)
}

fn combine(grads: &[Vec<C64>], coeffs: &[f64]) -> Vec<C64> {
    let l = grads[0].len();
    let mut out = vec![C64::new(0.0, 0.0); l];
    for (g, &c) in grads.iter().zip(coeffs) {
        if c != 0.0 {
            for (o, x) in out.iter_mut().zip(g) {
                *o += x * c;
            }
        }
    }
    out
}

/// Analytic `∇C_i` and `∇Δ_i` for every sensor.
///
/// Fails with [`Error::SingularGradient`] when some sensor's received power
/// vanishes, since `∇Δ_i` divides by `√s_i`.
pub fn rate_gradients(psi: &[C64], scenario: &Scenario) -> Result<RateGradients> {
    if psi.len() != scenario.num_elements() {
        return Err(invalid("RIS vector length does not match the scenario"));
    }
    let m = scenario.num_sensors();
    let noise = scenario.noise_power;
    let (s, ds) = power_gradients(psi, scenario);
    if let Some(i) = s.iter().position(|&p| p < SINGULAR_POWER_RATIO * noise) {
        return Err(Error::SingularGradient { sensor: i, power: s[i] });
    }
    // total_i = σ² + Σ_{j≥i} s_j, interf_i = σ² + Σ_{j>i} s_j
    let mut total = vec![0.0; m];
    let mut interf = vec![0.0; m];
    let mut acc = noise;
    for i in (0..m).rev() {
        interf[i] = acc;
        acc += s[i];
        total[i] = acc;
    }

    let mut capacity = Vec::with_capacity(m);
    let mut dispersion = Vec::with_capacity(m);
    let mut coeffs = vec![0.0; m];
    for i in 0..m {
        coeffs.iter_mut().for_each(|c| *c = 0.0);
        coeffs[i] = 1.0 / (total[i] * LN_2);
        for c in coeffs.iter_mut().skip(i + 1) {
            *c = (1.0 / total[i] - 1.0 / interf[i]) / LN_2;
        }
        capacity.push(combine(&ds, &coeffs));

        // x = s_i/total_i, Δ = √(2x), ∇Δ = ∇x/√(2x)
        let x = s[i] / total[i];
        let scale = 1.0 / (2.0 * x).sqrt();
        coeffs.iter_mut().for_each(|c| *c = 0.0);
        for c in coeffs.iter_mut().skip(i) {
            *c = -s[i] / (total[i] * total[i]) * scale;
        }
        coeffs[i] += scale / total[i];
        dispersion.push(combine(&ds, &coeffs));
    }
    let rates = rates_from_powers(&s, scenario);
    Ok(RateGradients {
        capacity,
        dispersion,
        rates,
    })
}

fn check_sensor(scenario: &Scenario, i: usize) -> Result<()> {
    if i >= scenario.num_sensors() {
        return Err(invalid(format!("sensor index {i} out of range")));
    }
    Ok(())
}

/// Euclidean gradient of the (unclamped) rate of sensor `i`.
pub fn euclidean_grad_rate(psi: &RisVector, scenario: &Scenario, i: usize) -> Result<Vec<C64>> {
    check_sensor(scenario, i)?;
    Ok(rate_gradients(psi.as_slice(), scenario)?.rate(i, scenario.penalties()))
}

/// Removes the normal component: `g − Re{g ⊙ ψ*} ⊙ ψ`.
pub fn tangent_project(psi: &[C64], grad: &[C64]) -> Vec<C64> {
    psi.iter().zip(grad).map(|(&p, &g)| g - p * (g * p.conj()).re).collect()
}

/// Riemannian gradient on the unit-modulus torus.
pub fn riemannian_grad_rate(psi: &RisVector, scenario: &Scenario, i: usize) -> Result<Vec<C64>> {
    if !psi.is_unit_modulus(UNIT_MODULUS_TOL) {
        return Err(invalid("Riemannian gradient needs a unit-modulus point"));
    }
    let g = euclidean_grad_rate(psi, scenario, i)?;
    Ok(tangent_project(psi.as_slice(), &g))
}

pub fn project_feasible(psi: &[C64], mode: ProjectionMode) -> Vec<C64> {
    match mode {
        ProjectionMode::ClipPerElement => psi
            .iter()
            .map(|&z| {
                let r = z.norm();
                if r > 1.0 {
                    z / r
                } else {
                    z
                }
            })
            .collect(),
        ProjectionMode::ScaleByMax => {
            let peak = max_abs(psi);
            if peak > 1.0 {
                psi.iter().map(|&z| z / peak).collect()
            } else {
                psi.to_vec()
            }
        }
    }
}

/// Elementwise normalization onto the unit circle; zeros keep the old phase.
pub fn retract_unit(base: &[C64], moved: &[C64]) -> Vec<C64> {
    base.iter()
        .zip(moved)
        .map(|(&b, &z)| {
            let r = z.norm();
            if r > 0.0 {
                z / r
            } else {
                b / b.norm().max(f64::MIN_POSITIVE)
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmijoOutcome {
    pub step: f64,
    pub point: Vec<C64>,
    pub value: f64,
    pub stalled: bool,
}

/// Backtracking search for the largest `α = α₀·cᵏ` with
/// `f(P(ψ + α·d)) ≥ f(ψ) + slope·α·Re{gᴴd}`.
///
/// Returns `step = 0` and `stalled = true` when no trial passes.
pub fn armijo_step<F, P>(
    psi: &[C64],
    value: f64,
    grad: &[C64],
    direction: &[C64],
    mut objective: F,
    project: P,
    params: &ArmijoParams,
) -> ArmijoOutcome
where
    F: FnMut(&[C64]) -> f64,
    P: Fn(&[C64], &[C64]) -> Vec<C64>,
{
    let slope = real_inner(grad, direction);
    let stall = ArmijoOutcome {
        step: 0.0,
        point: psi.to_vec(),
        value,
        stalled: true,
    };
    if !(slope > 0.0) || norm_sqr(direction) == 0.0 {
        return stall;
    }
    let mut step = params.initial_step;
    for _ in 0..=params.max_backtracks {
        let trial: Vec<C64> = psi.iter().zip(direction).map(|(p, d)| p + d * step).collect();
        let point = project(psi, &trial);
        let v = objective(&point);
        if v.is_finite() && v >= value + params.slope * step * slope {
            return ArmijoOutcome {
                step,
                point,
                value: v,
                stalled: false,
            };
        }
        step *= params.contraction;
    }
    stall
}

/// Ascent direction of the objective and the objective value at `psi`.
fn objective_gradient(
    psi: &[C64],
    scenario: &Scenario,
    objective: &Objective,
    variant: GradientVariant,
) -> Result<(f64, Vec<C64>)> {
    let grads = rate_gradients(psi, scenario)?;
    let penalties = scenario.penalties();
    let value = objective.value(&grads.rates);
    let euclid = match objective {
        Objective::WeightedSum(w) => {
            let mut acc = vec![C64::new(0.0, 0.0); psi.len()];
            for (i, &wi) in w.iter().enumerate() {
                if wi != 0.0 {
                    for (a, g) in acc.iter_mut().zip(grads.rate(i, penalties)) {
                        *a += g * wi;
                    }
                }
            }
            acc
        }
        Objective::MinRate => grads.rate(active_index(&grads.rates), penalties),
    };
    let dir = match variant {
        GradientVariant::Euclidean => euclid,
        GradientVariant::Riemannian => tangent_project(psi, &euclid),
    };
    Ok((value, dir))
}

/// Result of a single optimizer run.
#[derive(Debug, Clone)]
pub struct Solution {
    pub psi: RisVector,
    /// Internal (unclamped) objective at `psi`.
    pub objective: f64,
    pub trace: SolverTrace,
}

/// Perturbed restarts allowed per run after a singular gradient.
const MAX_PERTURBATIONS: usize = 20;

fn single_run(
    scenario: &Scenario,
    objective: &Objective,
    options: &GaOptions,
    start: Vec<C64>,
    rng: &mut ChaCha8Rng,
    clock: Instant,
) -> Result<Solution> {
    let method = match options.variant {
        GradientVariant::Euclidean => "ega",
        GradientVariant::Riemannian => "rga",
    };
    let mut trace = SolverTrace::new(method, options.seed);
    let mut psi = start;
    let project = |base: &[C64], trial: &[C64]| match options.variant {
        GradientVariant::Euclidean => project_feasible(trial, options.projection),
        GradientVariant::Riemannian => retract_unit(base, trial),
    };
    let mut retries = 0;
    let (mut value, mut grad) = loop {
        match objective_gradient(&psi, scenario, objective, options.variant) {
            Ok(vg) => break vg,
            Err(Error::SingularGradient { sensor, .. }) if retries < MAX_PERTURBATIONS => {
                log::warn!("singular gradient at start (sensor {sensor}); perturbing");
                psi = perturb_phases(&psi, rng);
                retries += 1;
            }
            Err(e) => return Err(e),
        }
    };
    trace.push(value, 0.0, clock.elapsed().as_secs_f64());
    // Perturbed restarts can lose ground, so the best iterate is returned.
    let mut best = (psi.clone(), value);

    'ascent: for _ in 0..options.max_iters {
        let eval = |p: &[C64]| objective.internal_value(p, scenario);
        let step = armijo_step(&psi, value, &grad, &grad, eval, project, &options.armijo);
        if step.stalled {
            break;
        }
        let prev = value;
        psi = step.point;
        value = step.value;
        trace.push(value, step.step, clock.elapsed().as_secs_f64());
        if value > best.1 {
            best = (psi.clone(), value);
        }
        if (value - prev).abs() <= options.rel_tol * prev.abs().max(f64::MIN_POSITIVE) {
            break;
        }
        loop {
            match objective_gradient(&psi, scenario, objective, options.variant) {
                Ok((v, g)) => {
                    value = v;
                    grad = g;
                    break;
                }
                Err(Error::SingularGradient { sensor, .. }) if retries < MAX_PERTURBATIONS => {
                    log::warn!("singular gradient (sensor {sensor}); restarting from a perturbed point");
                    retries += 1;
                    psi = perturb_phases(&psi, rng);
                }
                Err(Error::SingularGradient { sensor, .. }) => {
                    log::warn!("singular gradient (sensor {sensor}) after {retries} perturbations; stopping");
                    break 'ascent;
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(Solution {
        psi: RisVector::new(best.0)?,
        objective: best.1,
        trace,
    })
}

fn perturb_phases(psi: &[C64], rng: &mut ChaCha8Rng) -> Vec<C64> {
    psi.iter()
        .map(|&z| {
            let r = z.norm().clamp(0.5, 1.0);
            C64::from_polar(r, z.arg() + rng.random_range(-0.3..0.3))
        })
        .collect()
}

/// Multi-start projected gradient ascent; returns the best run.
///
/// Starts are uniform random phases with unit magnitude. For the min-rate
/// objective the ascent direction is the gradient of the currently weakest
/// sensor.
pub fn ga_optimize(scenario: &Scenario, objective: &Objective, options: &GaOptions) -> Result<Solution> {
    options.validate()?;
    objective.validate(scenario.num_sensors())?;
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let clock = Instant::now();
    let mut best: Option<Solution> = None;
    for _ in 0..options.restarts {
        let start = RisVector::random_unit(&mut rng, scenario.num_elements()).into_inner();
        let run = single_run(scenario, objective, options, start, &mut rng, clock)?;
        if best.as_ref().is_none_or(|b| run.objective > b.objective) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Same as [`ga_optimize`] from a caller-provided start, single run.
pub fn ga_optimize_from(
    scenario: &Scenario,
    objective: &Objective,
    options: &GaOptions,
    start: &RisVector,
) -> Result<Solution> {
    options.validate()?;
    objective.validate(scenario.num_sensors())?;
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let start = match options.variant {
        GradientVariant::Euclidean => start.as_slice().to_vec(),
        GradientVariant::Riemannian => retract_unit(start.as_slice(), start.as_slice()),
    };
    single_run(scenario, objective, options, start, &mut rng, Instant::now())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fblr_rate::{fblr_rate, internal_rates};
    use crate::linalg::complex_normal;
    use crate::scenario::ChannelSet;
    use approx::assert_relative_eq;

    fn random_scenario(m: usize, l: usize, seed: u64, eps: f64) -> Scenario {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cascaded = (0..m)
            .map(|_| (0..l).map(|_| complex_normal(&mut rng)).collect())
            .collect();
        let powers = (0..m).map(|_| rng.random_range(0.5..2.0)).collect();
        let ch = ChannelSet::from_cascaded_only(cascaded, powers).unwrap();
        Scenario::new(ch, 0.5, vec![100; m], vec![eps; m]).unwrap()
    }

    fn mixed_point(rng: &mut ChaCha8Rng, l: usize) -> Vec<C64> {
        (0..l)
            .map(|_| C64::from_polar(rng.random_range(0.2..1.0), rng.random_range(-3.0..3.0)))
            .collect()
    }

    /// Central differences on real and imaginary coordinates.
    fn fd_grad(f: impl Fn(&[C64]) -> f64, psi: &[C64], h: f64) -> Vec<C64> {
        (0..psi.len())
            .map(|l| {
                let mut p = psi.to_vec();
                let mut eval = |d: C64| {
                    p[l] = psi[l] + d;
                    f(&p)
                };
                let re = (eval(C64::new(h, 0.0)) - eval(C64::new(-h, 0.0))) / (2.0 * h);
                let im = (eval(C64::new(0.0, h)) - eval(C64::new(0.0, -h))) / (2.0 * h);
                C64::new(re, im)
            })
            .collect()
    }

    fn rel_err(a: &[C64], b: &[C64]) -> f64 {
        let scale = max_abs(b).max(1e-300);
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max) / scale
    }

    #[test]
    fn scalar_capacity_gradient_matches_closed_form() {
        // M = 1, L = 1, h = 1, P = 1, σ² = 1: C = log₂(1+|ψ|²), ∇C = 2ψ/((1+|ψ|²)ln2).
        let ch = ChannelSet::from_cascaded_only(vec![vec![C64::new(1.0, 0.0)]], vec![1.0]).unwrap();
        let sc = Scenario::new(ch, 1.0, vec![100], vec![0.5]).unwrap();
        let psi = RisVector::ones(1);
        let g = euclidean_grad_rate(&psi, &sc, 0).unwrap();
        assert_relative_eq!(g[0].re, 1.0 / LN_2, max_relative = 1e-14);
        assert_relative_eq!(g[0].im, 0.0, epsilon = 1e-15);
        let fd = fd_grad(|p| internal_rates(p, &sc)[0], psi.as_slice(), 1e-6);
        assert!(rel_err(&g, &fd) < 1e-6);
    }

    #[test]
    fn zero_penalty_reduces_to_capacity_gradient() {
        let sc = random_scenario(3, 5, 1, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let psi = RisVector::new(mixed_point(&mut rng, 5)).unwrap();
        let grads = rate_gradients(psi.as_slice(), &sc).unwrap();
        for i in 0..3 {
            assert_eq!(euclidean_grad_rate(&psi, &sc, i).unwrap(), grads.capacity[i]);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let sc = random_scenario(4, 8, 3, 1e-3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let psi = mixed_point(&mut rng, 8);
        let grads = rate_gradients(&psi, &sc).unwrap();
        for i in 0..4 {
            let fd_c = fd_grad(
                |p| {
                    let s = crate::fblr_rate::received_powers(p, &sc.channels);
                    let rho = crate::fblr_rate::sinrs_from_powers(&s, sc.noise_power)[i];
                    rho.ln_1p() / LN_2
                },
                &psi,
                1e-6,
            );
            assert!(rel_err(&grads.capacity[i], &fd_c) < 1e-6);
            let fd_d = fd_grad(
                |p| {
                    let s = crate::fblr_rate::received_powers(p, &sc.channels);
                    let rho = crate::fblr_rate::sinrs_from_powers(&s, sc.noise_power)[i];
                    crate::fblr_rate::dispersion_root(rho)
                },
                &psi,
                1e-6,
            );
            assert!(rel_err(&grads.dispersion[i], &fd_d) < 1e-6);
            let fd_r = fd_grad(|p| internal_rates(p, &sc)[i], &psi, 1e-6);
            assert!(rel_err(&grads.rate(i, sc.penalties()), &fd_r) < 1e-6);
        }
    }

    #[test]
    fn gradient_rotates_with_global_phase() {
        let sc = random_scenario(3, 6, 5, 1e-3);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let psi = mixed_point(&mut rng, 6);
        let rot = C64::from_polar(1.0, 0.83);
        let turned: Vec<C64> = psi.iter().map(|z| z * rot).collect();
        let fd = fd_grad(|p| internal_rates(p, &sc)[1], &turned, 1e-6);
        let g = rate_gradients(&psi, &sc).unwrap().rate(1, sc.penalties());
        let g_rot: Vec<C64> = g.iter().map(|z| z * rot).collect();
        assert!(rel_err(&g_rot, &fd) < 1e-6);
    }

    #[test]
    fn singular_gradient_reported() {
        let sc = random_scenario(2, 3, 7, 1e-3);
        let zero = RisVector::new(vec![C64::new(0.0, 0.0); 3]).unwrap();
        assert!(matches!(
            euclidean_grad_rate(&zero, &sc, 0),
            Err(Error::SingularGradient { .. })
        ));
    }

    #[test]
    fn riemannian_gradient_is_tangent() {
        let sc = random_scenario(3, 7, 8, 1e-3);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let psi = RisVector::random_unit(&mut rng, 7);
            for i in 0..3 {
                let g = riemannian_grad_rate(&psi, &sc, i).unwrap();
                let resid = psi
                    .as_slice()
                    .iter()
                    .zip(&g)
                    .map(|(p, x)| (x * p.conj()).re.abs())
                    .fold(0.0, f64::max);
                assert!(resid < 1e-12);
            }
        }
        let not_unit = RisVector::new(vec![C64::new(0.5, 0.0); 7]).unwrap();
        assert!(riemannian_grad_rate(&not_unit, &sc, 0).is_err());
    }

    #[test]
    fn tangent_projection_edge_cases() {
        let psi = vec![C64::from_polar(1.0, 0.3), C64::from_polar(1.0, -1.2)];
        let radial: Vec<C64> = psi.iter().map(|z| z * 2.5).collect();
        assert!(max_abs(&tangent_project(&psi, &radial)) < 1e-15);
        let tangent: Vec<C64> = psi.iter().map(|z| z * C64::new(0.0, 1.7)).collect();
        let out = tangent_project(&psi, &tangent);
        assert!(rel_err(&out, &tangent) < 1e-15);
    }

    #[test]
    fn projection_modes() {
        let feasible = vec![C64::new(0.3, 0.4), C64::new(-1.0, 0.0)];
        assert_eq!(project_feasible(&feasible, ProjectionMode::ClipPerElement), feasible);
        assert_eq!(project_feasible(&feasible, ProjectionMode::ScaleByMax), feasible);
        let v = vec![C64::new(2.0, 0.0), C64::new(0.5, 0.0)];
        assert_eq!(
            project_feasible(&v, ProjectionMode::ClipPerElement),
            vec![C64::new(1.0, 0.0), C64::new(0.5, 0.0)]
        );
        assert_eq!(
            project_feasible(&v, ProjectionMode::ScaleByMax),
            vec![C64::new(1.0, 0.0), C64::new(0.25, 0.0)]
        );
    }

    #[test]
    fn armijo_on_quadratic() {
        let target = vec![C64::new(3.0, -1.0), C64::new(0.5, 2.0)];
        let f = |p: &[C64]| -p.iter().zip(&target).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>();
        let start = vec![C64::new(0.0, 0.0); 2];
        // ∇f = 2(target − ψ)
        let grad: Vec<C64> = target.iter().zip(&start).map(|(t, p)| (t - p) * 2.0).collect();
        let params = ArmijoParams {
            initial_step: 0.1,
            ..Default::default()
        };
        let id = |_: &[C64], t: &[C64]| t.to_vec();
        let out = armijo_step(&start, f(&start), &grad, &grad, f, id, &params);
        assert!(!out.stalled);
        assert_eq!(out.step, 0.1);
        assert!(out.value >= f(&start) + params.slope * out.step * real_inner(&grad, &grad));
        assert_eq!(out.value, f(&out.point));

        let zero = vec![C64::new(0.0, 0.0); 2];
        let out = armijo_step(&start, f(&start), &grad, &zero, f, id, &params);
        assert!(out.stalled);
        assert_eq!(out.step, 0.0);
    }

    #[test]
    fn single_element_converges_to_unit_modulus() {
        let ch = ChannelSet::from_cascaded_only(vec![vec![C64::new(1.0, 0.0)]], vec![1.0]).unwrap();
        let sc = Scenario::new(ch, 1.0, vec![100], vec![1e-3]).unwrap();
        let sol = ga_optimize(&sc, &Objective::equal_weights(1), &GaOptions::default()).unwrap();
        assert_relative_eq!(sol.psi.as_slice()[0].norm(), 1.0, epsilon = 1e-9);
        let expected = fblr_rate(1.0, 100, 1e-3).unwrap();
        assert!((sol.objective - expected).abs() < 1e-6);
    }

    #[test]
    fn ga_traces_are_monotone_and_feasible() {
        let sc = random_scenario(4, 8, 10, 1e-3);
        for variant in [GradientVariant::Euclidean, GradientVariant::Riemannian] {
            for objective in [Objective::equal_weights(4), Objective::MinRate] {
                let opts = GaOptions {
                    variant,
                    restarts: 2,
                    seed: 3,
                    ..Default::default()
                };
                let sol = ga_optimize(&sc, &objective, &opts).unwrap();
                let obj = sol.trace.objectives();
                assert!(obj.windows(2).all(|w| w[1] >= w[0] - 1e-12));
                let psi = sol.psi.as_slice();
                match variant {
                    GradientVariant::Euclidean => assert!(max_abs(psi) <= 1.0 + 1e-9),
                    GradientVariant::Riemannian => assert!(sol.psi.is_unit_modulus(1e-9)),
                }
            }
        }
    }

    #[test]
    fn ga_is_deterministic() {
        let sc = random_scenario(3, 6, 12, 1e-3);
        let opts = GaOptions {
            restarts: 3,
            seed: 99,
            ..Default::default()
        };
        let a = ga_optimize(&sc, &Objective::equal_weights(3), &opts).unwrap();
        let b = ga_optimize(&sc, &Objective::equal_weights(3), &opts).unwrap();
        assert_eq!(a.psi, b.psi);
        assert_eq!(a.trace.objectives(), b.trace.objectives());
    }

    #[test]
    fn invalid_options_rejected() {
        let sc = random_scenario(2, 2, 1, 1e-3);
        let bad = GaOptions {
            armijo: ArmijoParams {
                contraction: 1.5,
                ..Default::default()
            },
            ..Default::default()
        };
        assert!(ga_optimize(&sc, &Objective::MinRate, &bad).is_err());
        let bad = GaOptions {
            max_iters: 0,
            ..Default::default()
        };
        assert!(ga_optimize(&sc, &Objective::MinRate, &bad).is_err());
    }

    #[test]
    fn min_rate_below_turning_point_ends_without_error() {
        // Every SINR sits below the point where the rate starts to grow, so
        // the ascent drives received powers to zero.
        let config = crate::scenario::ScenarioConfig {
            num_sensors: 4,
            num_elements: 9,
            ..Default::default()
        };
        let (sc, _) = Scenario::generate(&config).unwrap();
        let opts = GaOptions::default();
        let sol = ga_optimize(&sc, &Objective::MinRate, &opts).unwrap();
        assert!(sol.objective > -1e-3);
        assert_eq!(
            Objective::MinRate.internal_value(sol.psi.as_slice(), &sc),
            sol.objective
        );
    }
}
