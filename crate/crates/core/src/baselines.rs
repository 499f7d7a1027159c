//! Reference designs: coordinate-wise phase search, capacity-only design and
//! an exhaustive grid oracle for tiny surfaces.

use std::f64::consts::TAU;
use std::time::Instant;

use crate::error::{invalid, Error, Result};
use crate::fblr_rate::{rates_from_powers, Objective, RisVector};
use crate::gradient_opt::{ga_optimize, GaOptions};
use crate::linalg::{dot_t, C64};
use crate::scenario::Scenario;
use crate::sequential_sdr::{so_optimize, SoOptions};
use crate::trace::{relative_change, SolverTrace};

/// Largest number of grid points the oracle agrees to evaluate.
pub const ORACLE_BUDGET: u64 = 100_000_000;

pub fn phase_grid(size: usize) -> Vec<C64> {
    (0..size)
        .map(|k| C64::from_polar(1.0, TAU * k as f64 / size as f64))
        .collect()
}

#[derive(Debug, Clone)]
pub struct AoSolution {
    pub psi: RisVector,
    pub objective: f64,
    pub trace: SolverTrace,
}

/// Alternating one-dimensional search over unit-modulus phases.
///
/// Starts from `ψ = 1`; within a sweep, elements are visited in index order
/// and each one keeps its current phase unless a grid phase is strictly
/// better (lowest grid index on ties).
#[allow(clippy::needless_range_loop)]
pub fn ao_optimize(
    scenario: &Scenario,
    objective: &Objective,
    phase_grid_size: usize,
    max_sweeps: usize,
    rel_tol: f64,
) -> Result<AoSolution> {
    if phase_grid_size < 2 {
        return Err(invalid("phase grid needs at least two points"));
    }
    objective.validate(scenario.num_sensors())?;
    let clock = Instant::now();
    let ch = &scenario.channels;
    let grid = phase_grid(phase_grid_size);
    let l = scenario.num_elements();
    let m = scenario.num_sensors();
    let mut psi = vec![C64::new(1.0, 0.0); l];
    let mut sums: Vec<C64> = ch.cascaded.iter().map(|h| dot_t(&psi, h)).collect();
    let powers_of = |sums: &[C64]| -> Vec<f64> { sums.iter().zip(&ch.powers).map(|(u, p)| p * u.norm_sqr()).collect() };
    let mut value = objective.value(&rates_from_powers(&powers_of(&sums), scenario));
    let mut trace = SolverTrace::new("ao", 0);
    trace.push(value, 0.0, clock.elapsed().as_secs_f64());

    let mut trial = vec![C64::new(0.0, 0.0); m];
    for _ in 0..max_sweeps {
        let start = value;
        for e in 0..l {
            let rest: Vec<C64> = (0..m).map(|j| sums[j] - psi[e] * ch.cascaded[j][e]).collect();
            let mut best: Option<(usize, f64)> = None;
            for (k, z) in grid.iter().enumerate() {
                for j in 0..m {
                    trial[j] = rest[j] + z * ch.cascaded[j][e];
                }
                let v = objective.value(&rates_from_powers(&powers_of(&trial), scenario));
                if v > value && best.is_none_or(|(_, b)| v > b) {
                    best = Some((k, v));
                }
            }
            if let Some((k, v)) = best {
                psi[e] = grid[k];
                for j in 0..m {
                    sums[j] = rest[j] + grid[k] * ch.cascaded[j][e];
                }
                value = v;
            }
        }
        trace.push(value, 1.0, clock.elapsed().as_secs_f64());
        if relative_change(start, value) < rel_tol {
            break;
        }
    }
    Ok(AoSolution {
        psi: RisVector::new(psi)?,
        objective: value,
        trace,
    })
}

/// Optimizer used for the capacity-only design.
#[derive(Debug, Clone, PartialEq)]
pub enum ShannonMethod {
    So(SoOptions),
    Ga(GaOptions),
}

/// Designs `ψ` with every penalty set to zero. Evaluate the result with the
/// original scenario to get its finite-blocklength rates.
pub fn shannon_design(scenario: &Scenario, objective: &Objective, method: &ShannonMethod) -> Result<RisVector> {
    Ok(match method {
        ShannonMethod::So(opts) => {
            let opts = SoOptions {
                shannon_mode: true,
                ..opts.clone()
            };
            so_optimize(scenario, objective, &opts)?.psi
        }
        ShannonMethod::Ga(opts) => ga_optimize(&scenario.shannon(), objective, opts)?.psi,
    })
}

/// Exhaustive search over a uniform unit-modulus phase grid per element.
///
/// Refuses surfaces with more than three elements or more than
/// [`ORACLE_BUDGET`] grid points. Ties go to the lexicographically first
/// grid point.
pub fn brute_force_oracle(scenario: &Scenario, objective: &Objective, grid_per_element: usize) -> Result<RisVector> {
    let l = scenario.num_elements();
    if grid_per_element < 1 {
        return Err(invalid("grid needs at least one point"));
    }
    let points = (grid_per_element as u64).checked_pow(l as u32);
    if l > 3 || points.is_none_or(|p| p > ORACLE_BUDGET) {
        return Err(Error::Refused(format!(
            "brute force over {grid_per_element}^{l} points exceeds the oracle budget"
        )));
    }
    objective.validate(scenario.num_sensors())?;
    let grid = phase_grid(grid_per_element);
    let ch = &scenario.channels;
    let mut index = vec![0usize; l];
    let mut psi = vec![C64::new(1.0, 0.0); l];
    let mut best: Option<(Vec<C64>, f64)> = None;
    loop {
        for (p, &k) in psi.iter_mut().zip(&index) {
            *p = grid[k];
        }
        let powers: Vec<f64> = ch
            .cascaded
            .iter()
            .zip(&ch.powers)
            .map(|(h, p)| p * dot_t(&psi, h).norm_sqr())
            .collect();
        let v = objective.value(&rates_from_powers(&powers, scenario));
        if best.as_ref().is_none_or(|(_, b)| v > *b) {
            best = Some((psi.clone(), v));
        }
        // odometer increment, last element fastest
        let mut pos = l;
        loop {
            if pos == 0 {
                let (psi, _) = best.expect("grid is nonempty");
                return RisVector::new(psi);
            }
            pos -= 1;
            index[pos] += 1;
            if index[pos] < grid_per_element {
                break;
            }
            index[pos] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fblr_rate::internal_rates;
    use crate::linalg::complex_normal;
    use crate::scenario::ChannelSet;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scenario(m: usize, l: usize, seed: u64, eps: f64) -> Scenario {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cascaded = (0..m)
            .map(|_| (0..l).map(|_| complex_normal(&mut rng)).collect())
            .collect();
        let powers = (0..m).map(|_| rng.random_range(0.5..2.0)).collect();
        let ch = ChannelSet::from_cascaded_only(cascaded, powers).unwrap();
        Scenario::new(ch, 1.0, vec![100; m], vec![eps; m]).unwrap()
    }

    #[test]
    fn ao_trace_is_monotone_and_unit_modulus() {
        let sc = scenario(3, 10, 1, 1e-3);
        for obj in [Objective::equal_weights(3), Objective::MinRate] {
            let sol = ao_optimize(&sc, &obj, 64, 50, 1e-9).unwrap();
            let f = sol.trace.objectives();
            assert!(f.windows(2).all(|w| w[1] >= w[0]));
            assert!(sol.psi.is_unit_modulus(1e-12));
            let direct = obj.value(&internal_rates(sol.psi.as_slice(), &sc));
            assert!((direct - sol.objective).abs() <= 1e-12 * direct.abs());
        }
    }

    #[test]
    fn ao_single_element_matches_brute_force() {
        let sc = scenario(2, 1, 2, 1e-3);
        let obj = Objective::equal_weights(2);
        let ao = ao_optimize(&sc, &obj, 4096, 5, 0.0).unwrap();
        let bf = brute_force_oracle(&sc, &obj, 4096).unwrap();
        let v_bf = obj.internal_value(bf.as_slice(), &sc);
        assert!((ao.objective - v_bf).abs() <= 1e-12 * v_bf.abs());
    }

    #[test]
    fn ao_is_dominated_by_joint_grid() {
        for seed in 0..5 {
            let sc = scenario(2, 2, 10 + seed, 1e-3);
            let obj = Objective::equal_weights(2);
            let bf = brute_force_oracle(&sc, &obj, 256).unwrap();
            let ao = ao_optimize(&sc, &obj, 256, 100, 1e-12).unwrap();
            assert!(ao.objective <= obj.internal_value(bf.as_slice(), &sc) + 1e-12);
        }
    }

    #[test]
    fn ao_rejects_tiny_grid() {
        let sc = scenario(2, 2, 3, 1e-3);
        assert!(ao_optimize(&sc, &Objective::MinRate, 1, 10, 1e-6).is_err());
    }

    #[test]
    fn oracle_single_sensor_single_element_is_phase_invariant() {
        let sc = scenario(1, 1, 4, 1e-3);
        let obj = Objective::equal_weights(1);
        let bf = brute_force_oracle(&sc, &obj, 16).unwrap();
        assert!(bf.is_unit_modulus(1e-12));
        let v = obj.internal_value(bf.as_slice(), &sc);
        let any = obj.internal_value(&[C64::from_polar(1.0, 1.234)], &sc);
        assert!((v - any).abs() < 1e-12);
    }

    #[test]
    fn oracle_guard() {
        let sc = scenario(2, 4, 5, 1e-3);
        assert!(matches!(
            brute_force_oracle(&sc, &Objective::MinRate, 256),
            Err(Error::Refused(_))
        ));
        let sc3 = scenario(2, 3, 5, 1e-3);
        assert!(matches!(
            brute_force_oracle(&sc3, &Objective::MinRate, 1000),
            Err(Error::Refused(_))
        ));
    }

    #[test]
    fn shannon_design_matches_standard_optimizer_without_penalty() {
        let sc = scenario(2, 4, 6, 0.5);
        assert!(sc.is_shannon());
        let obj = Objective::equal_weights(2);
        let opts = GaOptions {
            restarts: 2,
            ..GaOptions::default()
        };
        let a = shannon_design(&sc, &obj, &ShannonMethod::Ga(opts.clone())).unwrap();
        let b = ga_optimize(&sc, &obj, &opts).unwrap().psi;
        assert_eq!(a, b);
    }

    #[test]
    fn finite_blocklength_rates_sit_below_capacity() {
        let sc = scenario(3, 6, 7, 1e-3);
        let obj = Objective::MinRate;
        let opts = SoOptions {
            restarts: 1,
            samples: 20,
            ..SoOptions::default()
        };
        let psi = shannon_design(&sc, &obj, &ShannonMethod::So(opts)).unwrap();
        let fblr = internal_rates(psi.as_slice(), &sc);
        let cap = internal_rates(psi.as_slice(), &sc.shannon());
        assert!(fblr.iter().zip(&cap).all(|(f, c)| f <= c));
    }
}
