//! JSON experiment configuration and its translation into core types.
//!
//! Angles are given in degrees and powers in dBm; both are converted here.

use pcs_core::channel::{
    average_eve_link, eve_link_for_ratio, link_budget, LambertianLed, LinkBudget, LinkGeometry, NoiseParams,
    ReceiverPd,
};
use pcs_core::constellation::{build_constellation, ConstraintMode, ConstraintSet, PamConstellation};
use pcs_core::solver::{CccpSettings, DesignProblem, EveChannel, Variant};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    DesignKnown,
    DesignUnknown,
    DesignQos,
    SweepPower,
    ValidateBer,
    ConvergenceTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LedConfig {
    pub height_m: f64,
    pub semi_angle_deg: f64,
    /// Electrical-to-optical conversion efficiency in W/A.
    pub conversion_eta: f64,
    pub i_min: f64,
    /// Upper end of the linear range; `null` for unbounded.
    pub i_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReceiverConfig {
    pub area_m2: f64,
    pub responsivity: f64,
    pub fov_deg: f64,
    pub filter_gain: f64,
    pub refractive_index: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub bandwidth_hz: f64,
    pub ambient_photocurrent: f64,
    pub preamp_density: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BobConfig {
    /// Horizontal distance from the LED axis.
    pub horizontal_offset_m: f64,
}

/// How the eavesdropper's link is specified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EveConfig {
    /// Eve's gain-to-noise ratio is Bob's divided by `ratio`.
    LinkRatio { ratio: f64 },
    Position { horizontal_offset_m: f64 },
    /// Gain averaged over a radius uniform inside the receiver's field of view.
    Average,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloConfig {
    pub n_symbols: u64,
    pub seed: u64,
    /// Eavesdropper positions sampled when averaging secrecy over space.
    pub eve_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationConfig {
    pub pairwise_configs: usize,
    pub pairwise_samples: u64,
    pub ser_distributions: usize,
    pub ser_samples: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub order: usize,
    /// DC optical powers `eta * I_DC` in dBm.
    pub power_dbm: Vec<f64>,
    pub led: LedConfig,
    pub receiver: ReceiverConfig,
    pub noise: NoiseConfig,
    pub bob: BobConfig,
    pub eve: EveConfig,
    pub constraints: ConstraintSet<f64>,
    pub solver: CccpSettings<f64>,
    pub monte_carlo: MonteCarloConfig,
    pub validation: ValidationConfig,
    /// Fixed peak amplitude replacing the one implied by the bias.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peak_override: Option<f64>,
    pub output_dir: String,
}

/// Links and constellation at one transmit power.
#[derive(Debug, Clone)]
pub struct Scene {
    pub power_dbm: f64,
    pub led: LambertianLed<f64>,
    pub pd: ReceiverPd<f64>,
    pub noise: NoiseParams<f64>,
    pub bob: LinkBudget<f64>,
    pub eve: LinkBudget<f64>,
    pub eve_average: LinkBudget<f64>,
    pub constellation: PamConstellation<f64>,
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn default_paper_config() -> ExperimentConfig {
    ExperimentConfig {
        scenario: Scenario::SweepPower,
        order: 8,
        power_dbm: (20..=35).map(f64::from).collect(),
        led: LedConfig {
            height_m: 3.0,
            semi_angle_deg: 60.0,
            conversion_eta: 0.44,
            i_min: 0.0,
            i_max: None,
        },
        receiver: ReceiverConfig {
            area_m2: 1e-4,
            responsivity: 0.54,
            fov_deg: 70.0,
            filter_gain: 1.0,
            refractive_index: 1.5,
        },
        noise: NoiseConfig {
            bandwidth_hz: 20e6,
            ambient_photocurrent: 10.93,
            preamp_density: 5e-12,
        },
        bob: BobConfig {
            horizontal_offset_m: 0.0,
        },
        eve: EveConfig::LinkRatio { ratio: 10.0 },
        constraints: ConstraintSet::new(3.8e-3, 0.01, ConstraintMode::Flicker).expect("valid defaults"),
        solver: CccpSettings::default(),
        monte_carlo: MonteCarloConfig {
            n_symbols: 1_000_000,
            seed: 1,
            eve_samples: 256,
        },
        validation: ValidationConfig {
            pairwise_configs: 50,
            pairwise_samples: 10_000_000,
            ser_distributions: 20,
            ser_samples: 1_000_000,
            seed: 7,
        },
        peak_override: None,
        output_dir: "results".into(),
    }
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(config_err)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.order < 2 || !self.order.is_power_of_two() {
            return Err(config_err(format!("order must be a power of two >= 2, got {}", self.order)));
        }
        if self.power_dbm.is_empty() || self.power_dbm.iter().any(|p| !p.is_finite()) {
            return Err(config_err("power_dbm must be a non-empty list of finite values"));
        }
        if let EveConfig::LinkRatio { ratio } = self.eve {
            if !(ratio >= 1.0) {
                return Err(config_err(format!("eve link ratio must be >= 1, got {ratio}")));
            }
        }
        if let Some(a) = self.peak_override {
            if !(a > 0.0 && a.is_finite()) {
                return Err(config_err(format!("peak_override must be positive, got {a}")));
            }
        }
        if self.monte_carlo.n_symbols == 0 || self.monte_carlo.eve_samples == 0 {
            return Err(config_err("monte_carlo sizes must be >= 1"));
        }
        ConstraintSet::new(
            self.constraints.pre_fec_threshold,
            self.constraints.flicker_alpha,
            self.constraints.mode,
        )
        .map_err(config_err)?;
        self.solver.validate().map_err(config_err)?;
        // surfaces geometry errors before any long computation
        for &p in &self.power_dbm {
            self.scene(p)?;
        }
        Ok(())
    }

    pub fn scene(&self, power_dbm: f64) -> Result<Scene, CliError> {
        let l = &self.led;
        let dc = dbm_to_watts(power_dbm) / l.conversion_eta;
        let led = LambertianLed::new(
            l.semi_angle_deg.to_radians(),
            l.conversion_eta,
            l.height_m,
            dc,
            l.i_min,
            l.i_max.unwrap_or(f64::INFINITY),
        )
        .map_err(config_err)?;
        let r = &self.receiver;
        let pd = ReceiverPd::new(
            r.area_m2,
            r.responsivity,
            r.fov_deg.to_radians(),
            r.filter_gain,
            r.refractive_index,
        )
        .map_err(config_err)?;
        let n = &self.noise;
        let noise = NoiseParams::new(n.bandwidth_hz, n.ambient_photocurrent, n.preamp_density).map_err(config_err)?;
        let at_offset = |offset: f64| -> Result<LinkBudget<f64>, CliError> {
            let geom = LinkGeometry::from_horizontal_offset(l.height_m, offset).map_err(config_err)?;
            link_budget(&led, &pd, &noise, &geom).map_err(config_err)
        };
        let bob = at_offset(self.bob.horizontal_offset_m)?;
        let eve_average = average_eve_link(&led, &pd, &noise).map_err(config_err)?;
        let eve = match self.eve {
            EveConfig::LinkRatio { ratio } => eve_link_for_ratio(&bob, ratio, &led, &pd, &noise).map_err(config_err)?,
            EveConfig::Position { horizontal_offset_m } => at_offset(horizontal_offset_m)?,
            EveConfig::Average => eve_average,
        };
        let peak = self.peak_override.unwrap_or_else(|| led.peak_amplitude());
        if !(peak > 0.0 && peak.is_finite()) {
            return Err(config_err(format!(
                "peak amplitude {peak} at {power_dbm} dBm; the bias leaves no linear range"
            )));
        }
        let constellation = build_constellation(self.order, peak).map_err(config_err)?;
        Ok(Scene {
            power_dbm,
            led,
            pd,
            noise,
            bob,
            eve,
            eve_average,
            constellation,
        })
    }

    /// Design problem of `variant` at one power. Unknown-CSI variants use the
    /// configured eavesdropper link as the averaged one when it is given as a
    /// ratio or position, and the spatial average otherwise.
    pub fn problem(&self, variant: Variant, power_dbm: f64) -> Result<DesignProblem<f64>, CliError> {
        let s = self.scene(power_dbm)?;
        let eve = match variant {
            Variant::KnownCsi | Variant::QosMaxEveBer => EveChannel::Known(s.eve),
            Variant::UnknownCsi | Variant::UnknownCsiSymmetric => EveChannel::Average(s.eve),
        };
        DesignProblem::new(variant, s.constellation, s.bob, eve, self.constraints, s.led.dc_bias).map_err(config_err)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = default_paper_config();
        let text = cfg.to_json();
        let back = ExperimentConfig::from_json(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_json(), text);
        assert_eq!(cfg.constraints.pre_fec_threshold, 3.8e-3);
        assert_eq!(cfg.constraints.flicker_alpha, 0.01);
        assert_eq!(cfg.solver.rel_tol, 1e-2);
    }

    #[test]
    fn rejects_bad_values() {
        let mut cfg = default_paper_config();
        cfg.order = 6;
        assert!(matches!(cfg.validate(), Err(CliError::Config(_))));
        let mut cfg = default_paper_config();
        cfg.power_dbm.clear();
        assert!(cfg.validate().is_err());
        let mut cfg = default_paper_config();
        cfg.eve = EveConfig::LinkRatio { ratio: 0.5 };
        assert!(cfg.validate().is_err());
        assert!(ExperimentConfig::from_json("{\"scenario\": \"sweep_power\"}").is_err());
    }

    #[test]
    fn power_sets_the_bias() {
        let s = default_paper_config().scene(30.0).unwrap();
        assert!((s.led.dc_optical_power() - 1.0).abs() < 1e-12);
        assert!((s.constellation.peak() - 1.0 / 0.44).abs() < 1e-12);
        assert!((s.bob.gain_to_noise() / s.eve.gain_to_noise() - 10.0).abs() < 1e-6);
    }
}
