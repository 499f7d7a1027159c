//! SIC SINRs and the normal-approximation finite-blocklength rate.
//!
//! The rate of sensor `i` is `R_i = C(ρ_i) − a_i·Δ(ρ_i)` with
//! `C(ρ) = log₂(1+ρ)`, `a(n, ε) = log₂e·Q⁻¹(ε)/√n` and the dimensionless
//! `Δ(ρ) = √(2ρ/(1+ρ))`, so that `a·Δ = √(V/n)·Q⁻¹(ε)` with
//! `V(ρ) = 2ρ/(1+ρ)·log₂²e`.

use std::f64::consts::{FRAC_1_SQRT_2, LOG2_E};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{dot_t, random_phases, C64};
use crate::scenario::{ChannelSet, Scenario};

/// Slack allowed on the `|ψ_l| ≤ 1` constraint.
pub const MODULUS_SLACK: f64 = 1e-9;

/// RIS reflection coefficients `ψ_l = λ_l·e^{jφ_l}` with `|ψ_l| ≤ 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<C64>", into = "Vec<C64>")]
pub struct RisVector(Vec<C64>);

impl RisVector {
    pub fn new(coefficients: Vec<C64>) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(invalid("RIS vector must have at least one element"));
        }
        if let Some(l) = coefficients.iter().position(|z| !(z.norm() <= 1.0 + MODULUS_SLACK)) {
            return Err(invalid(format!(
                "element {l} has modulus {} > 1",
                coefficients[l].norm()
            )));
        }
        Ok(Self(coefficients))
    }

    /// Uniform random phases, unit magnitudes.
    pub fn random_unit<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Self {
        Self(random_phases(rng, len))
    }

    pub fn ones(len: usize) -> Self {
        Self(vec![C64::new(1.0, 0.0); len])
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<C64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_unit_modulus(&self, tol: f64) -> bool {
        self.0.iter().all(|z| (z.norm() - 1.0).abs() <= tol)
    }
}

impl TryFrom<Vec<C64>> for RisVector {
    type Error = Error;
    fn try_from(v: Vec<C64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<RisVector> for Vec<C64> {
    fn from(v: RisVector) -> Self {
        v.0
    }
}

pub fn capacity(sinr: f64) -> Result<f64> {
    if !(sinr >= 0.0) {
        return Err(invalid("SINR must be nonnegative"));
    }
    Ok(sinr.ln_1p() * LOG2_E)
}

/// Channel dispersion `2ρ/(1+ρ)·log₂²e` in squared bits.
pub fn dispersion(sinr: f64) -> Result<f64> {
    if !(sinr >= 0.0) {
        return Err(invalid("SINR must be nonnegative"));
    }
    Ok(2.0 * sinr / (1.0 + sinr) * LOG2_E * LOG2_E)
}

/// Gaussian tail `Q(z) = ½·erfc(z/√2)`.
pub fn q_func(z: f64) -> f64 {
    0.5 * libm::erfc(z * FRAC_1_SQRT_2)
}

/// Standard normal density.
fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Lower-tail normal quantile, Acklam's rational approximation (rel. error ~1e-9).
fn normal_quantile_approx(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383_577_518_672_69e2,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    let tail = |q: f64| {
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    if p < P_LOW {
        tail((-2.0 * p.ln()).sqrt())
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -tail((-2.0 * (1.0 - p).ln()).sqrt())
    }
}

/// Inverse Gaussian tail: the `z` with `Q(z) = ε`.
pub fn q_inv(eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(invalid("q_inv needs a probability in (0, 1)"));
    }
    let mut z = -normal_quantile_approx(eps);
    // Halley refinement on Q(z) − ε; dQ/dz = −φ(z), d²Q/dz² = z·φ(z).
    for _ in 0..2 {
        let pdf = normal_pdf(z);
        if pdf == 0.0 {
            break;
        }
        let u = (q_func(z) - eps) / pdf;
        z += u / (1.0 - 0.5 * z * u);
    }
    Ok(z)
}

/// `a(n, ε) = log₂e·Q⁻¹(ε)/√n` in bits/Hz.
pub fn penalty_coeff(blocklength: u32, eps: f64) -> Result<f64> {
    if blocklength == 0 {
        return Err(invalid("blocklength must be at least 1"));
    }
    Ok(LOG2_E / (blocklength as f64).sqrt() * q_inv(eps)?)
}

/// `Δ(ρ) = √(2ρ/(1+ρ))`; `√V(ρ) = log₂e·Δ(ρ)`.
pub fn dispersion_root(sinr: f64) -> f64 {
    (2.0 * sinr / (1.0 + sinr)).max(0.0).sqrt()
}

/// `C(ρ) − a·Δ(ρ)` without the clamp at zero.
pub fn rate_unclamped(sinr: f64, penalty: f64) -> f64 {
    sinr.max(0.0).ln_1p() * LOG2_E - penalty * dispersion_root(sinr)
}

/// Finite-blocklength rate, clamped at zero.
pub fn fblr_rate(sinr: f64, blocklength: u32, eps: f64) -> Result<f64> {
    if !(sinr >= 0.0) {
        return Err(invalid("SINR must be nonnegative"));
    }
    if !(eps > 0.0 && eps <= 0.5) {
        return Err(invalid("error probability must lie in (0, 0.5]"));
    }
    Ok(rate_unclamped(sinr, penalty_coeff(blocklength, eps)?).max(0.0))
}

/// Received signal powers `s_j = P_j·|ψᵀh_j|²`.
pub fn received_powers(psi: &[C64], channels: &ChannelSet) -> Vec<f64> {
    channels
        .cascaded
        .iter()
        .zip(&channels.powers)
        .map(|(h, &p)| p * dot_t(psi, h).norm_sqr())
        .collect()
}

/// SIC SINRs in decoding order `1..M` from received powers.
pub fn sinrs_from_powers(powers: &[f64], noise: f64) -> Vec<f64> {
    let mut out = vec![0.0; powers.len()];
    let mut interference = 0.0;
    for i in (0..powers.len()).rev() {
        out[i] = powers[i] / (noise + interference);
        interference += powers[i];
    }
    out
}

/// SINR of sensor `i` (zero-based) under SIC with the identity order.
pub fn sinr(psi: &RisVector, channels: &ChannelSet, noise: f64, i: usize) -> Result<f64> {
    let m = channels.num_sensors();
    if i >= m {
        return Err(invalid(format!("sensor index {i} out of range for {m} sensors")));
    }
    if psi.len() != channels.num_elements() {
        return Err(invalid("RIS vector length does not match the channel"));
    }
    let s = received_powers(psi.as_slice(), channels);
    let interference: f64 = s[i + 1..].iter().sum();
    Ok(s[i] / (noise + interference))
}

/// Per-sensor unclamped rates from received powers.
pub fn rates_from_powers(powers: &[f64], scenario: &Scenario) -> Vec<f64> {
    sinrs_from_powers(powers, scenario.noise_power)
        .iter()
        .zip(scenario.penalties())
        .map(|(&rho, &a)| rate_unclamped(rho, a))
        .collect()
}

pub fn internal_rates(psi: &[C64], scenario: &Scenario) -> Vec<f64> {
    rates_from_powers(&received_powers(psi, &scenario.channels), scenario)
}

/// Per-sensor rate decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateBreakdown {
    pub sinr: Vec<f64>,
    pub capacity: Vec<f64>,
    pub dispersion: Vec<f64>,
    pub penalty: Vec<f64>,
    /// Clamped at zero.
    pub rate: Vec<f64>,
}

impl RateBreakdown {
    pub fn from_powers(powers: &[f64], scenario: &Scenario) -> Self {
        let sinr = sinrs_from_powers(powers, scenario.noise_power);
        let capacity = sinr.iter().map(|&r| r.ln_1p() * LOG2_E).collect();
        let dispersion = sinr.iter().map(|&r| 2.0 * r / (1.0 + r) * LOG2_E * LOG2_E).collect();
        let penalty = scenario.penalties().to_vec();
        let rate = sinr
            .iter()
            .zip(&penalty)
            .map(|(&r, &a)| rate_unclamped(r, a).max(0.0))
            .collect();
        Self {
            sinr,
            capacity,
            dispersion,
            penalty,
            rate,
        }
    }

    pub fn evaluate(psi: &RisVector, scenario: &Scenario) -> Self {
        Self::from_powers(&received_powers(psi.as_slice(), &scenario.channels), scenario)
    }

    pub fn weighted_sum(&self, weights: &[f64]) -> f64 {
        self.rate.iter().zip(weights).map(|(r, w)| r * w).sum()
    }

    pub fn min(&self) -> f64 {
        self.rate.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// What the RIS is designed for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Objective {
    WeightedSum(Vec<f64>),
    MinRate,
}

impl Objective {
    pub fn equal_weights(m: usize) -> Self {
        Objective::WeightedSum(vec![1.0; m])
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        match self {
            Objective::WeightedSum(w) if w.len() != m => Err(invalid(format!("expected {m} weights, got {}", w.len()))),
            Objective::WeightedSum(w) if w.iter().any(|&x| !(x >= 0.0)) => Err(invalid("weights must be nonnegative")),
            _ => Ok(()),
        }
    }

    /// Scalar objective of a rate vector; min-rate ties resolve to the lowest index.
    pub fn value(&self, rates: &[f64]) -> f64 {
        match self {
            Objective::WeightedSum(w) => rates.iter().zip(w).map(|(r, w)| r * w).sum(),
            Objective::MinRate => rates[active_index(rates)],
        }
    }

    /// Objective on the internal (unclamped) rates.
    pub fn internal_value(&self, psi: &[C64], scenario: &Scenario) -> f64 {
        self.value(&internal_rates(psi, scenario))
    }

    /// Objective on reported (clamped) rates.
    pub fn reported_value(&self, psi: &RisVector, scenario: &Scenario) -> f64 {
        self.value(&RateBreakdown::evaluate(psi, scenario).rate)
    }
}

/// Index of the smallest rate, lowest index on ties.
pub fn active_index(rates: &[f64]) -> usize {
    let mut best = 0;
    for (i, &r) in rates.iter().enumerate() {
        if r < rates[best] {
            best = i;
        }
    }
    best
}

pub fn weighted_sum_rate(psi: &RisVector, scenario: &Scenario, weights: &[f64]) -> Result<f64> {
    let obj = Objective::WeightedSum(weights.to_vec());
    obj.validate(scenario.num_sensors())?;
    check_len(psi, scenario)?;
    Ok(obj.reported_value(psi, scenario))
}

pub fn min_rate(psi: &RisVector, scenario: &Scenario) -> Result<f64> {
    check_len(psi, scenario)?;
    Ok(Objective::MinRate.reported_value(psi, scenario))
}

fn check_len(psi: &RisVector, scenario: &Scenario) -> Result<()> {
    if psi.len() != scenario.num_elements() {
        return Err(invalid("RIS vector length does not match the scenario"));
    }
    Ok(())
}

/// `ω_i ∝ 1/ρ_i(ψ₀)`, normalized to `Σω_i = M`.
pub fn fairness_weights(psi0: &RisVector, scenario: &Scenario) -> Result<Vec<f64>> {
    check_len(psi0, scenario)?;
    let rho = sinrs_from_powers(
        &received_powers(psi0.as_slice(), &scenario.channels),
        scenario.noise_power,
    );
    if let Some(sensor) = rho.iter().position(|&r| !(r > 0.0)) {
        return Err(Error::DegenerateWeights { sensor });
    }
    let inv: Vec<f64> = rho.iter().map(|r| 1.0 / r).collect();
    let total: f64 = inv.iter().sum();
    let m = rho.len() as f64;
    Ok(inv.iter().map(|w| w * m / total).collect())
}
