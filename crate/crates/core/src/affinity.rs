//! Resistive line loss and the Gaussian probabilities behind the SEA metric.
//!
//! Probabilities are written through `erfc` of one-sided arguments instead of
//! `1 − erf(·)` so tails keep their relative accuracy.

use crate::model::CableModel;

/// Energy dissipated when `e` Wh crosses a line of `length_km` in one slot of
/// `tau` hours: `e²·ρ·(1000·l)/(V²·τ)`.
pub fn energy_loss(e: f64, length_km: f64, cable: &CableModel, tau: f64) -> f64 {
    let resistance = cable.specific_resistance_ohm_per_m * 1000.0 * length_km;
    e * e * resistance / (cable.rms_voltage_v * cable.rms_voltage_v * tau)
}

pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// `P[X < 0]` for `X ~ N(mu, sigma²)`; a point mass when `sigma == 0`.
pub fn prob_negative(mu: f64, sigma: f64) -> f64 {
    if sigma > 0.0 {
        normal_cdf(-mu / sigma)
    } else if mu < 0.0 {
        1.0
    } else {
        0.0
    }
}

fn prob_positive(mu: f64, sigma: f64) -> f64 {
    if sigma > 0.0 {
        normal_cdf(mu / sigma)
    } else if mu > 0.0 {
        1.0
    } else {
        0.0
    }
}

/// NRE moments of two stations in one slot, assumed independent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairStats {
    pub mu_i: f64,
    pub sigma_i: f64,
    pub mu_j: f64,
    pub sigma_j: f64,
}

impl PairStats {
    pub fn mu_z(&self) -> f64 {
        self.mu_i - self.mu_j
    }

    pub fn sigma_z(&self) -> f64 {
        self.sigma_i.hypot(self.sigma_j)
    }
}

/// `P[|E_i − E_j| > δ]`.
pub fn prob_abs_diff_exceeds(pair: &PairStats, delta: f64) -> f64 {
    let (mu, sigma) = (pair.mu_z(), pair.sigma_z());
    if sigma == 0.0 {
        return if mu.abs() > delta { 1.0 } else { 0.0 };
    }
    if delta == 0.0 {
        return 1.0;
    }
    (normal_cdf((-delta - mu) / sigma) + normal_cdf((mu - delta) / sigma)).min(1.0)
}

/// Probability that both NREs are negative or both positive.
pub fn prob_same_sign(mu_i: f64, sigma_i: f64, mu_j: f64, sigma_j: f64) -> f64 {
    prob_negative(mu_i, sigma_i) * prob_negative(mu_j, sigma_j)
        + prob_positive(mu_i, sigma_i) * prob_positive(mu_j, sigma_j)
}
