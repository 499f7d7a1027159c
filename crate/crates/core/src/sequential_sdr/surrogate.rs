//! Concave lower bound of the rate around an expansion point `Φ_prev`.
//!
//! Everything depends on `Φ` only through the traces `t_j = tr(Φ H_j)`, so
//! the bound and its gradient are expressed in those coordinates. With
//! `b_i(t) = σ² + Σ_{j≥i} t_j`:
//!
//! ```text
//! C̃_i = C_i(prev) + ρ_i(prev)/ln2 · (2√(t_i/t̄_i) − b_i/b̄_i − 1)
//! Δ̃_i = Δ̄_i/2 + t̄_i/(2Δ̄_i b_i) + t_i²/(2Δ̄_i t̄_i b_i)
//! R̃_i = C̃_i − a_i Δ̃_i
//! ```

use std::f64::consts::LN_2;

use crate::error::{Error, Result};
use crate::fblr_rate::{dispersion_root, sinrs_from_powers};
use crate::gradient_opt::SINGULAR_POWER_RATIO;
use crate::scenario::Scenario;

/// Per-sensor constants of the bound at one expansion point.
#[derive(Debug, Clone)]
pub struct Expansion {
    noise: f64,
    floor: f64,
    penalties: Vec<f64>,
    traces: Vec<f64>,
    totals: Vec<f64>,
    sinr: Vec<f64>,
    capacity: Vec<f64>,
    delta: Vec<f64>,
}

/// Bound components at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateValues {
    pub capacity: Vec<f64>,
    pub dispersion: Vec<f64>,
    pub rate: Vec<f64>,
}

fn totals(traces: &[f64], noise: f64) -> Vec<f64> {
    let mut out = vec![0.0; traces.len()];
    let mut acc = noise;
    for i in (0..traces.len()).rev() {
        acc += traces[i];
        out[i] = acc;
    }
    out
}

impl Expansion {
    /// Expansion at traces `t̄_j = tr(Φ_prev H_j)`.
    pub fn new(prev_traces: &[f64], scenario: &Scenario) -> Result<Self> {
        let noise = scenario.noise_power;
        let floor = SINGULAR_POWER_RATIO * noise;
        if let Some(sensor) = prev_traces.iter().position(|&t| !(t > floor)) {
            return Err(Error::DegenerateExpansion {
                sensor,
                reason: "received power at the expansion point is zero",
            });
        }
        let totals = totals(prev_traces, noise);
        let sinr = sinrs_from_powers(prev_traces, noise);
        let capacity = sinr.iter().map(|r| r.ln_1p() / LN_2).collect();
        let delta: Vec<f64> = sinr.iter().map(|&r| dispersion_root(r)).collect();
        if let Some(sensor) = delta.iter().position(|&d| !(d > 0.0)) {
            return Err(Error::DegenerateExpansion {
                sensor,
                reason: "dispersion at the expansion point is zero",
            });
        }
        Ok(Self {
            noise,
            floor,
            penalties: scenario.penalties().to_vec(),
            traces: prev_traces.to_vec(),
            totals,
            sinr,
            capacity,
            delta,
        })
    }

    pub fn num_sensors(&self) -> usize {
        self.traces.len()
    }

    pub fn penalties(&self) -> &[f64] {
        &self.penalties
    }

    pub fn capacity(&self, t: &[f64], i: usize) -> f64 {
        let b = totals(t, self.noise);
        self.capacity_with(t, &b, i)
    }

    fn capacity_with(&self, t: &[f64], b: &[f64], i: usize) -> f64 {
        let ti = t[i].max(self.floor);
        let gamma = 2.0 * (ti / self.traces[i]).sqrt() - b[i] / self.totals[i] - 1.0;
        self.capacity[i] + self.sinr[i] / LN_2 * gamma
    }

    pub fn dispersion(&self, t: &[f64], i: usize) -> f64 {
        let b = totals(t, self.noise);
        self.dispersion_with(t, &b, i)
    }

    fn dispersion_with(&self, t: &[f64], b: &[f64], i: usize) -> f64 {
        let d = self.delta[i];
        let tp = self.traces[i];
        let ti = t[i].max(0.0);
        d / 2.0 + tp / (2.0 * d * b[i]) + ti * ti / (2.0 * d * tp * b[i])
    }

    pub fn values(&self, t: &[f64]) -> SurrogateValues {
        let b = totals(t, self.noise);
        let m = self.num_sensors();
        let capacity: Vec<f64> = (0..m).map(|i| self.capacity_with(t, &b, i)).collect();
        let dispersion: Vec<f64> = (0..m).map(|i| self.dispersion_with(t, &b, i)).collect();
        let rate = capacity
            .iter()
            .zip(&dispersion)
            .zip(&self.penalties)
            .map(|((c, d), a)| c - a * d)
            .collect();
        SurrogateValues {
            capacity,
            dispersion,
            rate,
        }
    }

    /// Adds `weight · ∂R̃_i/∂t_j` into `out[j]` for all `j`.
    pub fn accumulate_rate_gradient(&self, t: &[f64], i: usize, weight: f64, out: &mut [f64]) {
        let b = totals(t, self.noise);
        self.accumulate_with(t, &b, i, weight, out);
    }

    fn accumulate_with(&self, t: &[f64], b: &[f64], i: usize, weight: f64, out: &mut [f64]) {
        let m = self.num_sensors();
        let tp = self.traces[i];
        let d = self.delta[i];
        let a = self.penalties[i];
        let cap_scale = self.sinr[i] / LN_2;
        let ti = t[i].max(0.0);
        let bi = b[i];

        // terms shared by every j ≥ i through b_i
        let shared = -cap_scale / self.totals[i] + a * (tp / (2.0 * d * bi * bi) + ti * ti / (2.0 * d * tp * bi * bi));
        for o in out.iter_mut().take(m).skip(i) {
            *o += weight * shared;
        }
        let sqrt_part = if t[i] > self.floor {
            cap_scale / (t[i] * tp).sqrt()
        } else {
            0.0
        };
        out[i] += weight * (sqrt_part - a * ti / (d * tp * bi));
    }

    /// Gradient of `Σ_i w_i R̃_i` with respect to the traces.
    pub fn weighted_gradient(&self, t: &[f64], weights: &[f64]) -> Vec<f64> {
        let b = totals(t, self.noise);
        let mut out = vec![0.0; t.len()];
        for (i, &w) in weights.iter().enumerate() {
            if w != 0.0 {
                self.accumulate_with(t, &b, i, w, &mut out);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::complex_normal;
    use crate::scenario::ChannelSet;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scenario(m: usize, seed: u64) -> Scenario {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cascaded = (0..m).map(|_| vec![complex_normal(&mut rng)]).collect();
        let ch = ChannelSet::from_cascaded_only(cascaded, vec![1.0; m]).unwrap();
        Scenario::new(ch, 0.3, vec![100; m], vec![1e-3; m]).unwrap()
    }

    #[test]
    fn trace_gradient_matches_finite_differences() {
        let sc = scenario(4, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let prev: Vec<f64> = (0..4).map(|_| rng.random_range(0.2..2.0)).collect();
        let exp = Expansion::new(&prev, &sc).unwrap();
        let t: Vec<f64> = (0..4).map(|_| rng.random_range(0.2..2.0)).collect();
        let w = [0.5, 1.0, 2.0, 0.7];
        let g = exp.weighted_gradient(&t, &w);
        let f = |t: &[f64]| -> f64 { exp.values(t).rate.iter().zip(&w).map(|(r, w)| r * w).sum() };
        for j in 0..4 {
            let h = 1e-6;
            let mut tp = t.clone();
            let mut tm = t.clone();
            tp[j] += h;
            tm[j] -= h;
            let fd = (f(&tp) - f(&tm)) / (2.0 * h);
            assert!(
                (fd - g[j]).abs() < 1e-7 * g[j].abs().max(1.0),
                "j={j}: {fd} vs {}",
                g[j]
            );
        }
    }

    #[test]
    fn degenerate_expansion_rejected() {
        let sc = scenario(2, 3);
        assert!(matches!(
            Expansion::new(&[1.0, 0.0], &sc),
            Err(Error::DegenerateExpansion { sensor: 1, .. })
        ));
    }
}
