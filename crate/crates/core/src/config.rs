//! The JSON configuration document. Every section and field is optional;
//! missing values take the reference defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::clustering::ClusteringParams;
use crate::dispatch::DispatchParams;
use crate::harness::HarnessParams;
use crate::model::{BatteryParams, CableModel, ConsumptionModel, GenerationModel, NetworkConfig, PriceSchedule};
use crate::Result;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub network: NetworkConfig,
    pub generation: GenerationModel,
    pub consumption: ConsumptionModel,
    pub cable: CableModel,
    pub battery: BatteryParams,
    pub prices: PriceSchedule,
    pub clustering: ClusteringParams,
    pub dispatch: DispatchParams,
    pub harness: HarnessParams,
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Config = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        self.generation.validate()?;
        self.consumption.validate()?;
        self.cable.validate()?;
        self.battery.validate()?;
        self.prices.validate(self.network.slot_count)?;
        self.clustering.validate()?;
        self.dispatch.validate()?;
        self.harness.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let cfg = Config::from_json("{}").unwrap();
        assert_eq!(cfg, Config::default());
        assert_eq!(cfg.network.bs_count, 20);
        assert_eq!(cfg.battery.sell_threshold_wh, 50.0);
    }

    #[test]
    fn partial_sections_merge_with_defaults() {
        let cfg = Config::from_json(r#"{"network": {"bs_count": 3}, "prices": {"c_g": [0.8, 0.7]}, "dispatch": {"loss_segments": 4}}"#);
        assert!(cfg.is_err(), "per-slot price length must match the horizon");
        let cfg = Config::from_json(r#"{"network": {"bs_count": 3, "slot_count": 2}, "prices": {"c_g": [0.8, 0.7]}}"#).unwrap();
        assert_eq!(cfg.network.bs_count, 3);
        assert_eq!(cfg.prices.c_g.at(1), 0.7);
        assert_eq!(cfg.prices.c_b.at(1), 0.6);
    }

    #[test]
    fn round_trip() {
        let cfg = Config::default();
        assert_eq!(Config::from_json(&cfg.to_json()).unwrap(), cfg);
    }

    #[test]
    fn unknown_field_rejected() {
        assert!(Config::from_json(r#"{"network": {"bogus": 1}}"#).is_err());
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(Config::from_json(r#"{"battery": {"initial_wh": 150}}"#).is_err());
        assert!(Config::from_json(r#"{"consumption": {"mixing": [0.5, 0.6]}}"#).is_err());
    }
}
