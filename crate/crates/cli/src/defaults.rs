//! Versioned thresholds shipped with the binary.

use serde::{Deserialize, Serialize};

const SHIPPED: &str = include_str!("../defaults.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Defaults {
    pub version: u32,
    pub stability: StabilityDefaults,
    pub discrete: DiscreteDefaults,
    pub optimize: OptimizeDefaults,
    pub verify: VerifyDefaults,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityDefaults {
    pub mc_samples: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteDefaults {
    pub mc_samples: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeDefaults {
    pub reference_tol: f64,
    pub normal_sign_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyDefaults {
    pub first_variation_rms: f64,
    pub eigen_max_rel: f64,
    pub eigen_rms_rel: f64,
    pub second_variation_rel: f64,
    pub second_variation_zero: f64,
    pub difference_step: f64,
    pub psd_min_eigenvalue: f64,
    pub psd_points: usize,
}

impl Defaults {
    pub fn shipped() -> Self {
        toml::from_str(SHIPPED).expect("shipped defaults parse")
    }
}
