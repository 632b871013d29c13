//! Physical description of the network and its generation/consumption profiles.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::rng::{child_rng, STREAM_PANELS, STREAM_PLACEMENT};
use crate::{Error, Result};

/// Default dart budget for [`generate_placement`].
pub const PLACEMENT_BUDGET: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub region_side_km: f64,
    pub bs_count: usize,
    pub slot_count: usize,
    pub slot_duration_h: f64,
    pub exclusion_distance_km: f64,
    pub rng_seed: u64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            region_side_km: 5.0,
            bs_count: 20,
            slot_count: 24,
            slot_duration_h: 1.0,
            exclusion_distance_km: 0.5,
            rng_seed: 1,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        check(self.region_side_km > 0.0, "network.region_side_km must be positive")?;
        check(self.bs_count >= 1, "network.bs_count must be at least 1")?;
        check(self.slot_count >= 1, "network.slot_count must be at least 1")?;
        check(self.slot_duration_h > 0.0, "network.slot_duration_h must be positive")?;
        check(self.exclusion_distance_km >= 0.0, "network.exclusion_distance_km must be non-negative")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationModel {
    pub panel_area_m2: f64,
    pub peak_irradiance_kw_m2: f64,
    pub efficiency: f64,
    pub peak_time_h: f64,
    pub peak_width_h: f64,
    /// Standard deviation of the additive generation noise, Wh per slot.
    pub noise_std_wh: f64,
    /// When set, each station draws its own panel area uniformly from this
    /// range instead of using `panel_area_m2`.
    pub panel_area_range_m2: Option<[f64; 2]>,
}

impl Default for GenerationModel {
    fn default() -> Self {
        Self {
            panel_area_m2: 1.0,
            peak_irradiance_kw_m2: 1.0,
            efficiency: 0.2,
            peak_time_h: 12.0,
            peak_width_h: 3.0,
            noise_std_wh: 5.0,
            panel_area_range_m2: None,
        }
    }
}

impl GenerationModel {
    /// Peak generation power in W.
    pub fn alpha_max_w(&self) -> f64 {
        self.panel_area_m2 * self.peak_irradiance_kw_m2 * 1000.0 * self.efficiency
    }

    pub fn validate(&self) -> Result<()> {
        check(self.panel_area_m2 >= 0.0, "generation.panel_area_m2 must be non-negative")?;
        check(self.peak_irradiance_kw_m2 >= 0.0, "generation.peak_irradiance_kw_m2 must be non-negative")?;
        check(self.efficiency > 0.0 && self.efficiency <= 1.0, "generation.efficiency must lie in (0, 1]")?;
        check(self.peak_width_h > 0.0, "generation.peak_width_h must be positive")?;
        check(self.noise_std_wh >= 0.0, "generation.noise_std_wh must be non-negative")?;
        if let Some([lo, hi]) = self.panel_area_range_m2 {
            check(lo >= 0.0 && lo <= hi, "generation.panel_area_range_m2 must satisfy 0 <= lo <= hi")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConsumptionModel {
    pub mode_times_h: [f64; 2],
    pub mode_widths_h: [f64; 2],
    pub mixing: [f64; 2],
    pub tx_power_w: f64,
    pub max_users: f64,
    pub load_scale: f64,
    pub static_power_w: f64,
    pub noise_std_wh: f64,
}

impl Default for ConsumptionModel {
    fn default() -> Self {
        Self {
            mode_times_h: [10.0, 18.0],
            mode_widths_h: [3.0, 3.0],
            mixing: [0.6, 0.4],
            tx_power_w: 0.3,
            max_users: 50.0,
            load_scale: 4.7,
            static_power_w: 130.0,
            noise_std_wh: 5.0,
        }
    }
}

impl ConsumptionModel {
    /// Peak power draw `a·ρ^tx·ν^max + b` in W.
    pub fn peak_power_w(&self) -> f64 {
        self.load_scale * self.tx_power_w * self.max_users + self.static_power_w
    }

    /// Largest consumption in one slot, Wh.
    pub fn c_max(&self, tau: f64) -> f64 {
        self.peak_power_w() * tau
    }

    fn mixture(&self, t: f64) -> f64 {
        (0..2)
            .map(|k| {
                let s = self.mode_widths_h[k];
                let z = (t - self.mode_times_h[k]) / s;
                self.mixing[k] / ((2.0 * std::f64::consts::PI).sqrt() * s) * (-z * z).exp()
            })
            .sum()
    }

    pub fn validate(&self) -> Result<()> {
        check(self.mixing.iter().all(|&g| g >= 0.0), "consumption.mixing weights must be non-negative")?;
        check((self.mixing[0] + self.mixing[1] - 1.0).abs() < 1e-9, "consumption.mixing weights must sum to 1")?;
        check(self.mode_widths_h.iter().all(|&s| s > 0.0), "consumption.mode_widths_h must be positive")?;
        check(self.peak_power_w() > 0.0, "consumption peak power must be positive")?;
        check(self.noise_std_wh >= 0.0, "consumption.noise_std_wh must be non-negative")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CableModel {
    pub specific_resistance_ohm_per_m: f64,
    pub rms_voltage_v: f64,
    pub sharing_range_km: f64,
}

impl Default for CableModel {
    fn default() -> Self {
        Self { specific_resistance_ohm_per_m: 0.113e-3, rms_voltage_v: 230.0, sharing_range_km: 2.0 }
    }
}

impl CableModel {
    pub fn validate(&self) -> Result<()> {
        check(self.specific_resistance_ohm_per_m > 0.0, "cable.specific_resistance_ohm_per_m must be positive")?;
        check(self.rms_voltage_v > 0.0, "cable.rms_voltage_v must be positive")?;
        check(self.sharing_range_km >= 0.0, "cable.sharing_range_km must be non-negative")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatteryParams {
    pub capacity_wh: f64,
    pub initial_wh: f64,
    pub sell_threshold_wh: f64,
}

impl Default for BatteryParams {
    fn default() -> Self {
        Self { capacity_wh: 100.0, initial_wh: 100.0, sell_threshold_wh: 50.0 }
    }
}

impl BatteryParams {
    pub fn validate(&self) -> Result<()> {
        check(
            self.initial_wh >= 0.0 && self.initial_wh <= self.capacity_wh,
            "battery.initial_wh must lie in [0, capacity_wh]",
        )?;
        check(
            self.sell_threshold_wh >= 0.0 && self.sell_threshold_wh <= self.capacity_wh,
            "battery.sell_threshold_wh must lie in [0, capacity_wh]",
        )
    }
}

/// A price that is either flat or given per slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PriceSeries {
    Flat(f64),
    PerSlot(Vec<f64>),
}

impl PriceSeries {
    /// Price in slot `n` (0-based).
    pub fn at(&self, n: usize) -> f64 {
        match self {
            PriceSeries::Flat(p) => *p,
            PriceSeries::PerSlot(v) => v[n],
        }
    }

    fn check(&self, name: &str, slots: usize) -> Result<()> {
        match self {
            PriceSeries::Flat(p) => check(*p >= 0.0 && p.is_finite(), &format!("prices.{name} must be non-negative")),
            PriceSeries::PerSlot(v) => {
                check(v.len() == slots, &format!("prices.{name} must list one price per slot"))?;
                check(v.iter().all(|p| *p >= 0.0 && p.is_finite()), &format!("prices.{name} must be non-negative"))
            }
        }
    }
}

/// Prices per Wh: grid purchase `c_g`, purchase from other stations `c_b`,
/// sale to other stations `c_s`, and surplus sale to the grid `c_e`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriceSchedule {
    pub c_g: PriceSeries,
    pub c_b: PriceSeries,
    pub c_s: PriceSeries,
    pub c_e: PriceSeries,
}

impl Default for PriceSchedule {
    fn default() -> Self {
        Self::flat(0.8, 0.6, 0.4, 0.2)
    }
}

impl PriceSchedule {
    pub fn flat(c_g: f64, c_b: f64, c_s: f64, c_e: f64) -> Self {
        Self {
            c_g: PriceSeries::Flat(c_g),
            c_b: PriceSeries::Flat(c_b),
            c_s: PriceSeries::Flat(c_s),
            c_e: PriceSeries::Flat(c_e),
        }
    }

    /// True iff `c_g > c_b ≥ c_s ≥ c_e` in every slot.
    pub fn strict_ordering(&self, slots: usize) -> bool {
        (0..slots).all(|n| {
            let (g, b, s, e) = (self.c_g.at(n), self.c_b.at(n), self.c_s.at(n), self.c_e.at(n));
            g > b && b >= s && s >= e
        })
    }

    pub fn validate(&self, slots: usize) -> Result<()> {
        self.c_g.check("c_g", slots)?;
        self.c_b.check("c_b", slots)?;
        self.c_s.check("c_s", slots)?;
        self.c_e.check("c_e", slots)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseStation {
    pub id: usize,
    /// Coordinates in km.
    pub position: [f64; 2],
    pub generation: GenerationModel,
    pub consumption: ConsumptionModel,
    pub battery: BatteryParams,
}

/// Per-station, per-slot energy matrices (`[bs][slot]`, Wh).
#[derive(Debug, Clone, PartialEq)]
pub struct Profiles {
    pub generation: Vec<Vec<f64>>,
    pub consumption: Vec<Vec<f64>>,
}

/// Fully resolved network: stations, cable, prices and time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel {
    pub stations: Vec<BaseStation>,
    pub slot_count: usize,
    pub slot_duration_h: f64,
    pub cable: CableModel,
    pub prices: PriceSchedule,
}

impl NetworkModel {
    pub fn bs_count(&self) -> usize {
        self.stations.len()
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        distance(self.stations[i].position, self.stations[j].position)
    }

    pub fn positions(&self) -> Vec<[f64; 2]> {
        self.stations.iter().map(|s| s.position).collect()
    }

    pub fn mean_profiles(&self) -> Profiles {
        let (n, tau) = (self.slot_count, self.slot_duration_h);
        Profiles {
            generation: self
                .stations
                .iter()
                .map(|s| (0..n).map(|k| mean_generation(&s.generation, k + 1, tau)).collect())
                .collect(),
            consumption: self
                .stations
                .iter()
                .map(|s| consumption_profile(&s.consumption, n, tau))
                .collect(),
        }
    }

    /// Draws one realization of generation and consumption.
    pub fn sample_profiles(&self, rng: &mut ChaCha8Rng) -> Profiles {
        let mean = self.mean_profiles();
        let tau = self.slot_duration_h;
        let mut generation = mean.generation.clone();
        let mut consumption = mean.consumption.clone();
        for (i, s) in self.stations.iter().enumerate() {
            let gmax = s.generation.alpha_max_w() * tau;
            for v in generation[i].iter_mut() {
                *v = noisy(*v, s.generation.noise_std_wh, gmax, rng);
            }
            let cmax = s.consumption.c_max(tau);
            for v in consumption[i].iter_mut() {
                *v = noisy(*v, s.consumption.noise_std_wh, cmax, rng);
            }
        }
        Profiles { generation, consumption }
    }

    /// Per-station, per-slot `(μ^E, σ^E)` of the net renewable energy.
    pub fn nre_stats(&self) -> Vec<Vec<(f64, f64)>> {
        let mean = self.mean_profiles();
        self.stations
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let sd = nre_std(&s.generation, &s.consumption);
                (0..self.slot_count).map(|n| (mean.generation[i][n] - mean.consumption[i][n], sd)).collect()
            })
            .collect()
    }
}

pub fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn check(cond: bool, msg: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidConfig(msg.to_string()))
    }
}

/// Sub-step times (hours) and width covering slot `n` (1-based). Long slots
/// are integrated hour by hour; one-hour slots sample the profile at `n`.
fn substeps(n: usize, tau: f64) -> (Vec<f64>, f64) {
    let h = (tau.round() as usize).max(1);
    let dt = tau / h as f64;
    let times = (1..=h).map(|k| ((n - 1) * h + k) as f64 * dt).collect();
    (times, dt)
}

/// Mean generation in slot `n` (1-based), Wh.
pub fn mean_generation(model: &GenerationModel, n: usize, tau: f64) -> f64 {
    let (times, dt) = substeps(n, tau);
    let amax = model.alpha_max_w();
    times
        .iter()
        .map(|&t| {
            let z = (t - model.peak_time_h) / model.peak_width_h;
            amax * (-z * z).exp() * dt
        })
        .sum()
}

fn mixture_slot(model: &ConsumptionModel, n: usize, tau: f64) -> f64 {
    let (times, dt) = substeps(n, tau);
    times.iter().map(|&t| model.mixture(t) * dt).sum()
}

/// Mean consumption in slot `n` of an `slots`-long horizon, scaled so the
/// busiest slot draws exactly `C_max`.
pub fn mean_consumption(model: &ConsumptionModel, n: usize, slots: usize, tau: f64) -> f64 {
    let peak = (1..=slots).map(|k| mixture_slot(model, k, tau)).fold(0.0, f64::max);
    if peak <= 0.0 {
        return 0.0;
    }
    model.c_max(tau) * (mixture_slot(model, n, tau) / peak)
}

fn consumption_profile(model: &ConsumptionModel, slots: usize, tau: f64) -> Vec<f64> {
    let raw: Vec<f64> = (1..=slots).map(|k| mixture_slot(model, k, tau)).collect();
    let peak = raw.iter().copied().fold(0.0, f64::max);
    let cmax = model.c_max(tau);
    raw.iter().map(|&m| if peak > 0.0 { cmax * (m / peak) } else { 0.0 }).collect()
}

fn noisy(mean: f64, std: f64, cap: f64, rng: &mut ChaCha8Rng) -> f64 {
    if std == 0.0 {
        return mean;
    }
    let z: f64 = rng.sample(StandardNormal);
    (mean + std * z).clamp(0.0, cap)
}

pub fn sample_generation(model: &GenerationModel, n: usize, tau: f64, rng: &mut ChaCha8Rng) -> f64 {
    noisy(mean_generation(model, n, tau), model.noise_std_wh, model.alpha_max_w() * tau, rng)
}

pub fn sample_consumption(model: &ConsumptionModel, n: usize, slots: usize, tau: f64, rng: &mut ChaCha8Rng) -> f64 {
    noisy(mean_consumption(model, n, slots, tau), model.noise_std_wh, model.c_max(tau), rng)
}

fn nre_std(g: &GenerationModel, c: &ConsumptionModel) -> f64 {
    g.noise_std_wh.hypot(c.noise_std_wh)
}

/// `(μ^E, σ^E)` for station `bs` in slot `n` (1-based).
pub fn nre_stats(bs: &BaseStation, n: usize, slots: usize, tau: f64) -> (f64, f64) {
    let mu = mean_generation(&bs.generation, n, tau) - mean_consumption(&bs.consumption, n, slots, tau);
    (mu, nre_std(&bs.generation, &bs.consumption))
}

/// Hard-core placement by sequential inhibition: uniform darts, rejecting any
/// closer than the exclusion distance to an accepted point.
pub fn generate_placement(config: &NetworkConfig, rng: &mut ChaCha8Rng) -> Result<Vec<[f64; 2]>> {
    generate_placement_with_budget(config, rng, PLACEMENT_BUDGET)
}

pub fn generate_placement_with_budget(
    config: &NetworkConfig,
    rng: &mut ChaCha8Rng,
    budget: u64,
) -> Result<Vec<[f64; 2]>> {
    config.validate()?;
    let (k, side, e) = (config.bs_count, config.region_side_km, config.exclusion_distance_km);
    let infeasible = || Error::PlacementInfeasible { count: k, side_km: side, exclusion_km: e };
    // Each point owns a disc of radius e/2 inside the (L+e)-square; demand a
    // packing density well below the hard-disc limit.
    let covered = k as f64 * std::f64::consts::PI * e * e / 4.0;
    if k > 1 && covered > 0.5 * (side + e) * (side + e) {
        return Err(infeasible());
    }
    let mut points: Vec<[f64; 2]> = Vec::with_capacity(k);
    let mut throws = 0u64;
    while points.len() < k {
        if throws >= budget {
            return Err(infeasible());
        }
        throws += 1;
        let p = [rng.random::<f64>() * side, rng.random::<f64>() * side];
        if points.iter().all(|q| distance(*q, p) >= e) {
            points.push(p);
        }
    }
    Ok(points)
}

/// Builds the network described by a configuration: placement, per-station
/// models and (optionally) per-station panel areas, all from the config seed.
pub fn build_network(cfg: &crate::config::Config) -> Result<NetworkModel> {
    cfg.validate()?;
    let seed = cfg.network.rng_seed;
    let positions = generate_placement(&cfg.network, &mut child_rng(seed, STREAM_PLACEMENT))?;
    let mut panel_rng = child_rng(seed, STREAM_PANELS);
    let stations = positions
        .into_iter()
        .enumerate()
        .map(|(id, position)| {
            let mut generation = cfg.generation.clone();
            if let Some([lo, hi]) = cfg.generation.panel_area_range_m2 {
                generation.panel_area_m2 = lo + (hi - lo) * panel_rng.random::<f64>();
                generation.panel_area_range_m2 = None;
            }
            BaseStation { id, position, generation, consumption: cfg.consumption.clone(), battery: cfg.battery.clone() }
        })
        .collect();
    Ok(NetworkModel {
        stations,
        slot_count: cfg.network.slot_count,
        slot_duration_h: cfg.network.slot_duration_h,
        cable: cfg.cable.clone(),
        prices: cfg.prices.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn generation_peak_and_shoulder() {
        let g = GenerationModel::default();
        assert!((g.alpha_max_w() - 200.0).abs() < 1e-12);
        assert!((mean_generation(&g, 12, 1.0) - 200.0).abs() < 1e-12);
        assert!((mean_generation(&g, 15, 1.0) - 200.0 * (-1.0f64).exp()).abs() < 1e-9);
        assert!(mean_generation(&g, 1, 1.0) < 1e-3);
    }

    #[test]
    fn consumption_peak_is_c_max() {
        let c = ConsumptionModel::default();
        assert!((c.c_max(1.0) - 200.5).abs() < 1e-12);
        assert!((mean_consumption(&c, 10, 24, 1.0) - 200.5).abs() < 1e-12);
        assert!(mean_consumption(&c, 2, 24, 1.0) < 0.01 * 200.5);
        let profile = consumption_profile(&c, 24, 1.0);
        assert_eq!(profile.iter().copied().fold(0.0, f64::max), 200.5);
    }

    #[test]
    fn degenerate_mixture_peaks_at_first_mode() {
        let c = ConsumptionModel { mixing: [1.0, 0.0], ..Default::default() };
        let p = consumption_profile(&c, 24, 1.0);
        let argmax = (0..24).max_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap();
        assert_eq!(argmax + 1, 10);
    }

    #[test]
    fn zero_noise_samples_equal_means() {
        let g = GenerationModel { noise_std_wh: 0.0, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(sample_generation(&g, 12, 1.0, &mut rng), 200.0);
        let c = ConsumptionModel { noise_std_wh: 0.0, ..Default::default() };
        assert_eq!(sample_consumption(&c, 10, 24, 1.0, &mut rng), 200.5);
    }

    #[test]
    fn clamped_at_zero_in_tail() {
        let g = GenerationModel { noise_std_wh: 50.0, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..1000 {
            assert!(sample_generation(&g, 1, 1.0, &mut rng) >= 0.0);
        }
    }

    #[test]
    fn nre_std_combines_noises() {
        let bs = BaseStation {
            id: 0,
            position: [0.0, 0.0],
            generation: GenerationModel::default(),
            consumption: ConsumptionModel::default(),
            battery: BatteryParams::default(),
        };
        let (mu, sd) = nre_stats(&bs, 12, 24, 1.0);
        assert!((sd - 50f64.sqrt()).abs() < 1e-12);
        let expected = 200.0 - mean_consumption(&bs.consumption, 12, 24, 1.0);
        assert!((mu - expected).abs() < 1e-12);
    }

    #[test]
    fn placement_respects_exclusion() {
        let cfg = NetworkConfig::default();
        for seed in 0..5 {
            let pts = generate_placement(&cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            assert_eq!(pts.len(), 20);
            for i in 0..pts.len() {
                assert!(pts[i][0] >= 0.0 && pts[i][0] <= 5.0 && pts[i][1] >= 0.0 && pts[i][1] <= 5.0);
                for j in 0..i {
                    assert!(distance(pts[i], pts[j]) >= 0.5);
                }
            }
        }
    }

    #[test]
    fn placement_single_point_and_packing_failure() {
        let one = NetworkConfig { bs_count: 1, ..Default::default() };
        assert_eq!(generate_placement(&one, &mut ChaCha8Rng::seed_from_u64(1)).unwrap().len(), 1);
        let packed = NetworkConfig { bs_count: 100, region_side_km: 1.0, ..Default::default() };
        assert!(matches!(
            generate_placement(&packed, &mut ChaCha8Rng::seed_from_u64(1)),
            Err(Error::PlacementInfeasible { .. })
        ));
    }

    #[test]
    fn placement_budget_exhaustion_reports_infeasible() {
        let cfg = NetworkConfig { bs_count: 30, region_side_km: 2.0, exclusion_distance_km: 0.5, ..Default::default() };
        let r = generate_placement_with_budget(&cfg, &mut ChaCha8Rng::seed_from_u64(1), 40);
        assert!(matches!(r, Err(Error::PlacementInfeasible { .. })));
    }

    #[test]
    fn strict_ordering_flag() {
        assert!(PriceSchedule::default().strict_ordering(24));
        assert!(!PriceSchedule::flat(0.5, 0.6, 0.4, 0.2).strict_ordering(24));
        let per_slot = PriceSchedule { c_g: PriceSeries::PerSlot(vec![0.8, 0.3]), ..Default::default() };
        assert!(!per_slot.strict_ordering(2));
    }

    #[test]
    fn eight_hour_slots_integrate_hourly() {
        let g = GenerationModel::default();
        let direct: f64 = (9..=16).map(|t| mean_generation(&g, t, 1.0)).sum();
        assert!((mean_generation(&g, 2, 8.0) - direct).abs() < 1e-9);
        let c = ConsumptionModel::default();
        let p = consumption_profile(&c, 3, 8.0);
        assert!((p.iter().copied().fold(0.0, f64::max) - 200.5 * 8.0).abs() < 1e-9);
    }
}
