//! Physical scenario generation: geometry, path loss, Rician fading with
//! uniform-planar-array line-of-sight components, cascaded channels and
//! statistical CSI errors.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::fblr_rate::penalty_coeff;
use crate::linalg::{complex_normal, outer_hermitian, CMatrix, C64};

/// Thermal noise spectral density in dBm/Hz.
pub const NOISE_DENSITY_DBM_HZ: f64 = -174.0;
/// Default system bandwidth in Hz.
pub const DEFAULT_BANDWIDTH_HZ: f64 = 1.08e6;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// `N₀·B` in watts.
pub fn thermal_noise_watts(bandwidth_hz: f64) -> f64 {
    dbm_to_watts(NOISE_DENSITY_DBM_HZ) * bandwidth_hz
}

/// A per-sensor parameter given either once for all sensors or individually.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerSensor<T> {
    Uniform(T),
    Each(Vec<T>),
}

impl<T: Copy> PerSensor<T> {
    pub fn resolve(&self, count: usize, name: &str) -> Result<Vec<T>> {
        match self {
            PerSensor::Uniform(v) => Ok(vec![*v; count]),
            PerSensor::Each(vs) if vs.len() == count => Ok(vs.clone()),
            PerSensor::Each(vs) => Err(invalid(format!("{name}: expected {count} values, got {}", vs.len()))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WeightsMode {
    #[default]
    Equal,
    Fairness,
    Explicit,
}

/// Every physical and algorithmic knob of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub num_sensors: usize,
    pub num_elements: usize,
    pub transmit_power_w: PerSensor<f64>,
    pub noise_power_w: f64,
    pub blocklength: PerSensor<u32>,
    pub error_prob: PerSensor<f64>,
    pub weights_mode: WeightsMode,
    pub explicit_weights: Vec<f64>,
    pub ris_cn_distance_m: f64,
    pub sensor_disk_radius_m: f64,
    /// Sensors closer than this to the RIS are pushed out to it, keeping the
    /// power law inside its validity range.
    pub min_sensor_distance_m: f64,
    pub rician_k_ris_cn: f64,
    pub rician_k_sensor_ris: f64,
    pub path_loss_exponent_ris_cn: f64,
    pub path_loss_exponent_sensor_ris: f64,
    pub reference_loss_db: f64,
    /// Element spacing as a fraction of the wavelength.
    pub element_spacing: f64,
    pub csi_error_beta: f64,
    pub rng_seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            num_sensors: 10,
            num_elements: 100,
            transmit_power_w: PerSensor::Uniform(dbm_to_watts(0.0)),
            noise_power_w: thermal_noise_watts(DEFAULT_BANDWIDTH_HZ),
            blocklength: PerSensor::Uniform(100),
            error_prob: PerSensor::Uniform(1e-3),
            weights_mode: WeightsMode::Equal,
            explicit_weights: Vec::new(),
            ris_cn_distance_m: 50.0,
            sensor_disk_radius_m: 10.0,
            min_sensor_distance_m: 1.0,
            rician_k_ris_cn: 10.0,
            rician_k_sensor_ris: 1.0,
            path_loss_exponent_ris_cn: 2.2,
            path_loss_exponent_sensor_ris: 3.67,
            reference_loss_db: 30.0,
            element_spacing: 0.5,
            csi_error_beta: 0.0,
            rng_seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let m = self.num_sensors;
        if m == 0 || self.num_elements == 0 {
            return Err(invalid("num_sensors and num_elements must be at least 1"));
        }
        if self.transmit_power(m)?.iter().any(|&p| !(p > 0.0)) {
            return Err(invalid("transmit powers must be positive"));
        }
        if !(self.noise_power_w > 0.0) {
            return Err(invalid("noise power must be positive"));
        }
        if self.blocklength.resolve(m, "blocklength")?.contains(&0) {
            return Err(invalid("blocklengths must be at least 1"));
        }
        if self
            .error_prob
            .resolve(m, "error_prob")?
            .iter()
            .any(|&e| !(e > 0.0 && e < 0.5))
        {
            return Err(invalid("error probabilities must lie in (0, 0.5)"));
        }
        if self.weights_mode == WeightsMode::Explicit {
            if self.explicit_weights.len() != m {
                return Err(invalid("explicit_weights must have one entry per sensor"));
            }
            if self.explicit_weights.iter().any(|&w| !(w >= 0.0)) {
                return Err(invalid("explicit weights must be nonnegative"));
            }
        }
        if !(0.0..=1.0).contains(&self.csi_error_beta) {
            return Err(invalid("csi_error_beta must lie in [0, 1]"));
        }
        for (name, v) in [
            ("ris_cn_distance_m", self.ris_cn_distance_m),
            ("sensor_disk_radius_m", self.sensor_disk_radius_m),
            ("min_sensor_distance_m", self.min_sensor_distance_m),
            ("element_spacing", self.element_spacing),
        ] {
            if !(v > 0.0) {
                return Err(invalid(format!("{name} must be positive")));
            }
        }
        if self.rician_k_ris_cn < 0.0 || self.rician_k_sensor_ris < 0.0 {
            return Err(invalid("Rician factors must be nonnegative"));
        }
        Ok(())
    }

    pub fn transmit_power(&self, m: usize) -> Result<Vec<f64>> {
        self.transmit_power_w.resolve(m, "transmit_power_w")
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| crate::Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Most-square factorization `l_x · l_y = L` with `l_x ≥ l_y`.
pub fn upa_dims(num_elements: usize) -> (usize, usize) {
    let mut ly = (num_elements as f64).sqrt().floor() as usize;
    while ly > 1 && !num_elements.is_multiple_of(ly) {
        ly -= 1;
    }
    let ly = ly.max(1);
    (num_elements / ly, ly)
}

/// UPA steering vector. Entry `m·l_y + n` carries phase
/// `2π·spacing·(m·sin(el)·cos(az) + n·sin(el)·sin(az))`.
pub fn upa_steering(lx: usize, ly: usize, azimuth: f64, elevation: f64, spacing: f64) -> Result<Vec<C64>> {
    if lx == 0 || ly == 0 {
        return Err(invalid("UPA dimensions must be positive"));
    }
    if !(spacing > 0.0) {
        return Err(invalid("element spacing must be positive"));
    }
    let kx = 2.0 * PI * spacing * elevation.sin() * azimuth.cos();
    let ky = 2.0 * PI * spacing * elevation.sin() * azimuth.sin();
    Ok((0..lx)
        .flat_map(|m| (0..ly).map(move |n| C64::from_polar(1.0, kx * m as f64 + ky * n as f64)))
        .collect())
}

/// `√g·(√(K/(K+1))·los + √(1/(K+1))·w)` with `w` unit-variance circular Gaussian.
pub fn rician_channel<R: Rng + ?Sized>(k_factor: f64, los: &[C64], rng: &mut R, mean_gain: f64) -> Result<Vec<C64>> {
    if !(k_factor >= 0.0) {
        return Err(invalid("Rician K factor must be nonnegative"));
    }
    if !(mean_gain > 0.0) {
        return Err(invalid("mean gain must be positive"));
    }
    let amp = mean_gain.sqrt();
    let los_w = (k_factor / (k_factor + 1.0)).sqrt();
    let nlos_w = (1.0 / (k_factor + 1.0)).sqrt();
    Ok(los
        .iter()
        .map(|&a| (a * los_w + complex_normal(rng) * nlos_w) * amp)
        .collect())
}

/// Power-law path gain `10^(−ref/10)·d^(−exponent)`.
pub fn path_loss(distance: f64, exponent: f64, reference_loss_db: f64) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(invalid("distance must be positive"));
    }
    Ok(10f64.powf(-reference_loss_db / 10.0) * distance.powf(-exponent))
}

/// Where everything was placed, for the record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    /// Sensor positions relative to the RIS, in meters.
    pub sensor_positions: Vec<(f64, f64)>,
    pub sensor_distances: Vec<f64>,
    pub ris_cn_gain: f64,
    pub sensor_ris_gains: Vec<f64>,
    /// `(azimuth, elevation)` of the LOS component of `g_R` then each `g_i`.
    pub angles: Vec<(f64, f64)>,
    pub upa: (usize, usize),
}

/// All channel state for one realization.
///
/// `lifted[i] = P_i h_i h_iᴴ` is derived data and rebuilt on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "ChannelDump", into = "ChannelDump")]
pub struct ChannelSet {
    pub ris_cn: Vec<C64>,
    pub sensor_ris: Vec<Vec<C64>>,
    pub cascaded: Vec<Vec<C64>>,
    pub lifted: Vec<CMatrix>,
    /// Direct sensor–CN links; held at zero.
    pub direct: Vec<C64>,
    pub powers: Vec<f64>,
    /// Model mean power of one entry of `h_i`, so that `tr(C_i) = L·entry_power[i]`.
    pub entry_power: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ChannelDump {
    ris_cn: Vec<C64>,
    sensor_ris: Vec<Vec<C64>>,
    cascaded: Vec<Vec<C64>>,
    direct: Vec<C64>,
    powers: Vec<f64>,
    entry_power: Vec<f64>,
}

impl From<ChannelDump> for ChannelSet {
    fn from(d: ChannelDump) -> Self {
        let lifted = lift_channels(&d.cascaded, &d.powers);
        Self {
            ris_cn: d.ris_cn,
            sensor_ris: d.sensor_ris,
            cascaded: d.cascaded,
            lifted,
            direct: d.direct,
            powers: d.powers,
            entry_power: d.entry_power,
        }
    }
}

impl From<ChannelSet> for ChannelDump {
    fn from(c: ChannelSet) -> Self {
        Self {
            ris_cn: c.ris_cn,
            sensor_ris: c.sensor_ris,
            cascaded: c.cascaded,
            direct: c.direct,
            powers: c.powers,
            entry_power: c.entry_power,
        }
    }
}

fn lift_channels(cascaded: &[Vec<C64>], powers: &[f64]) -> Vec<CMatrix> {
    cascaded
        .iter()
        .zip(powers)
        .map(|(h, &p)| outer_hermitian(h, p))
        .collect()
}

impl ChannelSet {
    /// Builds the cascade `h_i[l] = g_R[l]·g_i[l]` and the lifted matrices.
    pub fn from_links(
        ris_cn: Vec<C64>,
        sensor_ris: Vec<Vec<C64>>,
        powers: Vec<f64>,
        entry_power: Vec<f64>,
    ) -> Result<Self> {
        let l = ris_cn.len();
        let m = sensor_ris.len();
        if l == 0 || m == 0 {
            return Err(invalid("empty channel set"));
        }
        if sensor_ris.iter().any(|g| g.len() != l) {
            return Err(invalid("sensor-RIS channels must match the RIS size"));
        }
        if powers.len() != m || entry_power.len() != m {
            return Err(invalid("per-sensor vectors must have one entry per sensor"));
        }
        let cascaded: Vec<Vec<C64>> = sensor_ris
            .iter()
            .map(|g| g.iter().zip(&ris_cn).map(|(gi, gr)| gr * gi).collect())
            .collect();
        Ok(Self::from_cascaded(ris_cn, sensor_ris, cascaded, powers, entry_power))
    }

    fn from_cascaded(
        ris_cn: Vec<C64>,
        sensor_ris: Vec<Vec<C64>>,
        cascaded: Vec<Vec<C64>>,
        powers: Vec<f64>,
        entry_power: Vec<f64>,
    ) -> Self {
        let lifted = lift_channels(&cascaded, &powers);
        let m = cascaded.len();
        Self {
            ris_cn,
            sensor_ris,
            cascaded,
            lifted,
            direct: vec![C64::new(0.0, 0.0); m],
            powers,
            entry_power,
        }
    }

    /// Channels given directly as cascaded vectors (no link decomposition).
    pub fn from_cascaded_only(cascaded: Vec<Vec<C64>>, powers: Vec<f64>) -> Result<Self> {
        let m = cascaded.len();
        let l = cascaded.first().map_or(0, Vec::len);
        if m == 0 || l == 0 || cascaded.iter().any(|h| h.len() != l) {
            return Err(invalid("cascaded channels must be non-empty and equal length"));
        }
        if powers.len() != m {
            return Err(invalid("one power per sensor required"));
        }
        let entry_power = cascaded
            .iter()
            .map(|h| h.iter().map(|x| x.norm_sqr()).sum::<f64>() / l as f64)
            .collect();
        let ones = vec![C64::new(1.0, 0.0); l];
        Ok(Self::from_cascaded(
            ones,
            cascaded.clone(),
            cascaded,
            powers,
            entry_power,
        ))
    }

    pub fn num_sensors(&self) -> usize {
        self.cascaded.len()
    }

    pub fn num_elements(&self) -> usize {
        self.ris_cn.len()
    }
}

/// Draws a full channel realization from `config`.
pub fn build_scenario(config: &ScenarioConfig) -> Result<(ChannelSet, Geometry)> {
    config.validate()?;
    let m = config.num_sensors;
    let l = config.num_elements;
    let powers = config.transmit_power(m)?;
    let (lx, ly) = upa_dims(l);
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);

    let mut positions = Vec::with_capacity(m);
    let mut distances = Vec::with_capacity(m);
    for _ in 0..m {
        let r = config.sensor_disk_radius_m * rng.random::<f64>().sqrt();
        let theta = rng.random_range(-PI..PI);
        positions.push((r * theta.cos(), r * theta.sin()));
        distances.push(r.max(config.min_sensor_distance_m));
    }

    let mut angles = Vec::with_capacity(m + 1);
    let mut draw_los = |rng: &mut ChaCha8Rng| -> Result<Vec<C64>> {
        let az = rng.random_range(-PI..PI);
        let el = rng.random_range(0.0..PI / 2.0);
        angles.push((az, el));
        upa_steering(lx, ly, az, el, config.element_spacing)
    };

    let ris_cn_gain = path_loss(
        config.ris_cn_distance_m,
        config.path_loss_exponent_ris_cn,
        config.reference_loss_db,
    )?;
    let los = draw_los(&mut rng)?;
    let ris_cn = rician_channel(config.rician_k_ris_cn, &los, &mut rng, ris_cn_gain)?;

    let mut sensor_ris = Vec::with_capacity(m);
    let mut gains = Vec::with_capacity(m);
    for &d in &distances {
        let gain = path_loss(d, config.path_loss_exponent_sensor_ris, config.reference_loss_db)?;
        let los = draw_los(&mut rng)?;
        sensor_ris.push(rician_channel(config.rician_k_sensor_ris, &los, &mut rng, gain)?);
        gains.push(gain);
    }

    let entry_power = gains.iter().map(|g| g * ris_cn_gain).collect();
    let channels = ChannelSet::from_links(ris_cn, sensor_ris, powers, entry_power)?;
    let geometry = Geometry {
        sensor_positions: positions,
        sensor_distances: distances,
        ris_cn_gain,
        sensor_ris_gains: gains,
        angles,
        upa: (lx, ly),
    };
    Ok((channels, geometry))
}

/// Contaminates every cascaded channel with `η_i ~ CN(0, (β/L)·tr(C_i)·I)`.
///
/// The link vectors `g_R`, `g_i` are carried over unchanged; only `h_i` and
/// `H_i` reflect the estimate.
pub fn perturb_csi<R: Rng + ?Sized>(channels: &ChannelSet, beta: f64, rng: &mut R) -> Result<ChannelSet> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(invalid("beta must lie in [0, 1]"));
    }
    if beta == 0.0 {
        return Ok(channels.clone());
    }
    let cascaded: Vec<Vec<C64>> = channels
        .cascaded
        .iter()
        .zip(&channels.entry_power)
        .map(|(h, &p)| {
            let sigma = (beta * p).sqrt();
            h.iter().map(|&x| x + complex_normal(rng) * sigma).collect()
        })
        .collect();
    Ok(ChannelSet::from_cascaded(
        channels.ris_cn.clone(),
        channels.sensor_ris.clone(),
        cascaded,
        channels.powers.clone(),
        channels.entry_power.clone(),
    ))
}

/// Channels plus the link parameters the rate model needs.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub channels: ChannelSet,
    pub noise_power: f64,
    pub blocklengths: Vec<u32>,
    pub error_probs: Vec<f64>,
    penalties: Vec<f64>,
}

impl Scenario {
    pub fn new(channels: ChannelSet, noise_power: f64, blocklengths: Vec<u32>, error_probs: Vec<f64>) -> Result<Self> {
        let m = channels.num_sensors();
        if blocklengths.len() != m || error_probs.len() != m {
            return Err(invalid("blocklengths and error_probs need one entry per sensor"));
        }
        if !(noise_power > 0.0) {
            return Err(invalid("noise power must be positive"));
        }
        let penalties = blocklengths
            .iter()
            .zip(&error_probs)
            .map(|(&n, &e)| penalty_coeff(n, e))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            channels,
            noise_power,
            blocklengths,
            error_probs,
            penalties,
        })
    }

    pub fn from_config(config: &ScenarioConfig, channels: ChannelSet) -> Result<Self> {
        let m = channels.num_sensors();
        if m != config.num_sensors {
            return Err(invalid("channel set does not match the configured sensor count"));
        }
        Self::new(
            channels,
            config.noise_power_w,
            config.blocklength.resolve(m, "blocklength")?,
            config.error_prob.resolve(m, "error_prob")?,
        )
    }

    /// Builds channels and the scenario in one go.
    pub fn generate(config: &ScenarioConfig) -> Result<(Self, Geometry)> {
        let (channels, geometry) = build_scenario(config)?;
        Ok((Self::from_config(config, channels)?, geometry))
    }

    /// Same scenario with every penalty `a_i` forced to zero (`n → ∞`).
    pub fn shannon(&self) -> Self {
        let mut out = self.clone();
        out.penalties.iter_mut().for_each(|a| *a = 0.0);
        out
    }

    /// Same link parameters over different channels (e.g. a CSI estimate).
    pub fn with_channels(&self, channels: ChannelSet) -> Result<Self> {
        if channels.num_sensors() != self.num_sensors() || channels.num_elements() != self.num_elements() {
            return Err(invalid("replacement channels have different dimensions"));
        }
        let mut out = self.clone();
        out.channels = channels;
        Ok(out)
    }

    pub fn num_sensors(&self) -> usize {
        self.channels.num_sensors()
    }

    pub fn num_elements(&self) -> usize {
        self.channels.num_elements()
    }

    /// `a(n_i, ε_i)` per sensor, zero in Shannon mode.
    pub fn penalties(&self) -> &[f64] {
        &self.penalties
    }

    pub fn is_shannon(&self) -> bool {
        self.penalties.iter().all(|&a| a == 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn phase(z: C64) -> f64 {
        z.arg().rem_euclid(2.0 * PI)
    }

    #[test]
    fn steering_single_element_and_broadside() {
        assert_eq!(upa_steering(1, 1, 0.7, 0.3, 0.5).unwrap(), vec![C64::new(1.0, 0.0)]);
        let v = upa_steering(2, 1, 0.0, 0.0, 0.5).unwrap();
        assert_eq!(v, vec![C64::new(1.0, 0.0); 2]);
    }

    #[test]
    fn steering_endfire_phases() {
        let v = upa_steering(2, 2, 0.0, PI / 2.0, 0.5).unwrap();
        let expected = [0.0, 0.0, PI, PI];
        for (z, e) in v.iter().zip(expected) {
            assert_relative_eq!(z.norm(), 1.0, epsilon = 1e-15);
            let d = (phase(*z) - e).abs();
            assert!(d < 1e-12 || (d - 2.0 * PI).abs() < 1e-12);
        }
    }

    #[test]
    fn steering_rejects_bad_args() {
        assert!(upa_steering(0, 2, 0.0, 0.0, 0.5).is_err());
        assert!(upa_steering(2, 2, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn upa_factorization() {
        assert_eq!(upa_dims(100), (10, 10));
        assert_eq!(upa_dims(64), (8, 8));
        assert_eq!(upa_dims(8), (4, 2));
        assert_eq!(upa_dims(7), (7, 1));
        assert_eq!(upa_dims(1), (1, 1));
    }

    #[test]
    fn path_loss_values() {
        assert_relative_eq!(path_loss(1.0, 3.0, 30.0).unwrap(), 1e-3, max_relative = 1e-14);
        assert_relative_eq!(path_loss(10.0, 2.0, 30.0).unwrap(), 1e-5, max_relative = 1e-14);
        // 1e-3 · 50^(-3.67) evaluated independently through logarithms.
        let expected = 10f64.powf(-3.0 - 3.67 * 50f64.log10());
        assert_relative_eq!(path_loss(50.0, 3.67, 30.0).unwrap(), expected, max_relative = 1e-12);
        assert_relative_eq!(expected, 5.818e-10, max_relative = 1e-4);
        assert!(path_loss(0.0, 2.0, 30.0).is_err());
    }

    #[test]
    fn rician_los_limit() {
        let los = upa_steering(3, 2, 0.4, 0.9, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = rician_channel(1e12, &los, &mut rng, 4.0).unwrap();
        for (o, a) in out.iter().zip(&los) {
            assert!((o - a * 2.0).norm() / 2.0 < 1e-5);
        }
        assert!(rician_channel(-1.0, &los, &mut rng, 1.0).is_err());
    }

    #[test]
    fn rician_rayleigh_mean_power() {
        let dim = 4;
        let los = vec![C64::new(1.0, 0.0); dim];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws = 10_000;
        let mean: f64 = (0..draws)
            .map(|_| {
                let v = rician_channel(0.0, &los, &mut rng, 2.5).unwrap();
                v.iter().map(|x| x.norm_sqr()).sum::<f64>() / dim as f64
            })
            .sum::<f64>()
            / draws as f64;
        assert!((mean / 2.5 - 1.0).abs() < 0.03, "mean {mean}");
    }

    #[test]
    fn rician_is_deterministic() {
        let los = vec![C64::new(1.0, 0.0); 5];
        let a = rician_channel(1.0, &los, &mut ChaCha8Rng::seed_from_u64(5), 1.0).unwrap();
        let b = rician_channel(1.0, &los, &mut ChaCha8Rng::seed_from_u64(5), 1.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn degenerate_scenario_gives_unit_channel() {
        let cfg = ScenarioConfig {
            num_sensors: 1,
            num_elements: 1,
            transmit_power_w: PerSensor::Uniform(1.0),
            rician_k_ris_cn: 1e15,
            rician_k_sensor_ris: 1e15,
            reference_loss_db: 0.0,
            ris_cn_distance_m: 1.0,
            sensor_disk_radius_m: 0.5,
            min_sensor_distance_m: 1.0,
            ..Default::default()
        };
        let (ch, _) = build_scenario(&cfg).unwrap();
        assert_eq!(ch.cascaded[0].len(), 1);
        assert!((ch.cascaded[0][0] - C64::new(1.0, 0.0)).norm() < 1e-7);
    }

    #[test]
    fn scenario_is_deterministic_and_cascaded() {
        let cfg = ScenarioConfig {
            num_sensors: 4,
            num_elements: 9,
            rng_seed: 42,
            ..Default::default()
        };
        let (a, ga) = build_scenario(&cfg).unwrap();
        let (b, gb) = build_scenario(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ga, gb);
        for (h, g) in a.cascaded.iter().zip(&a.sensor_ris) {
            for l in 0..9 {
                assert_eq!(h[l], a.ris_cn[l] * g[l]);
            }
        }
        assert!(a.direct.iter().all(|q| q.norm() == 0.0));
        for d in &ga.sensor_distances {
            assert!(*d >= 1.0 && *d <= 10.0);
        }
    }

    #[test]
    fn lifted_matrices_are_rank_one_psd() {
        let cfg = ScenarioConfig {
            num_sensors: 10,
            num_elements: 100,
            rng_seed: 7,
            ..Default::default()
        };
        let (ch, _) = build_scenario(&cfg).unwrap();
        for (i, h_mat) in ch.lifted.iter().enumerate() {
            let trace: f64 = (0..100).map(|l| h_mat[(l, l)].re).sum();
            let expected = ch.powers[i] * ch.cascaded[i].iter().map(|x| x.norm_sqr()).sum::<f64>();
            assert!(trace > 0.0);
            assert_relative_eq!(trace, expected, max_relative = 1e-12);
            let (vals, _) = crate::linalg::hermitian_eigen(h_mat);
            let top = vals[99];
            assert!(vals[98].abs() < 1e-12 * top);
            assert!(vals[0] >= -1e-12 * top);
        }
    }

    #[test]
    fn csi_error_zero_beta_is_identity() {
        let cfg = ScenarioConfig {
            num_sensors: 3,
            num_elements: 4,
            ..Default::default()
        };
        let (ch, _) = build_scenario(&cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(perturb_csi(&ch, 0.0, &mut rng).unwrap(), ch);
        assert!(perturb_csi(&ch, 1.5, &mut rng).is_err());
        assert!(perturb_csi(&ch, -0.1, &mut rng).is_err());
    }

    #[test]
    fn csi_error_variance_single_element() {
        // L = 1, β = 1: the per-entry error variance equals tr(C_1) = entry_power.
        let ch = ChannelSet::from_links(
            vec![C64::new(1.0, 0.0)],
            vec![vec![C64::new(0.0, 0.0)]],
            vec![1.0],
            vec![3.0],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let draws = 20_000;
        let var: f64 = (0..draws)
            .map(|_| perturb_csi(&ch, 1.0, &mut rng).unwrap().cascaded[0][0].norm_sqr())
            .sum::<f64>()
            / draws as f64;
        assert!((var / 3.0 - 1.0).abs() < 0.03, "variance {var}");
    }

    #[test]
    fn csi_error_relative_power() {
        let cfg = ScenarioConfig {
            num_sensors: 10,
            num_elements: 64,
            rng_seed: 3,
            ..Default::default()
        };
        let (ch, _) = build_scenario(&cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let draws = 1000;
        let mut acc = 0.0;
        for _ in 0..draws {
            let p = perturb_csi(&ch, 0.1, &mut rng).unwrap();
            for i in 0..10 {
                let err: f64 = p.cascaded[i]
                    .iter()
                    .zip(&ch.cascaded[i])
                    .map(|(a, b)| (a - b).norm_sqr())
                    .sum();
                acc += err / (64.0 * ch.entry_power[i]);
            }
        }
        let ratio = acc / (draws as f64 * 10.0);
        assert!((ratio / 0.1 - 1.0).abs() < 0.1, "ratio {ratio}");
    }

    #[test]
    fn config_validation() {
        assert!(ScenarioConfig::default().validate().is_ok());
        let bad = ScenarioConfig {
            error_prob: PerSensor::Uniform(0.6),
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = ScenarioConfig {
            weights_mode: WeightsMode::Explicit,
            explicit_weights: vec![1.0; 3],
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = ScenarioConfig {
            num_elements: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn config_toml_roundtrip() {
        let text = r#"
            num_sensors = 3
            num_elements = 16
            blocklength = [100, 200, 300]
            error_prob = 1e-3
            weights_mode = "fairness"
            rng_seed = 5
        "#;
        let cfg = ScenarioConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.blocklength.resolve(3, "n").unwrap(), vec![100, 200, 300]);
        assert_eq!(cfg.weights_mode, WeightsMode::Fairness);
        let back = ScenarioConfig::from_toml_str(&toml::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn channel_dump_roundtrip() {
        let cfg = ScenarioConfig {
            num_sensors: 2,
            num_elements: 4,
            ..Default::default()
        };
        let (ch, _) = build_scenario(&cfg).unwrap();
        let text = serde_json::to_string(&ch).unwrap();
        let back: ChannelSet = serde_json::from_str(&text).unwrap();
        assert_eq!(back, ch);
    }
}
