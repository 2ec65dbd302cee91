//! Run configuration.
//!
//! A single TOML file drives trials and suites. Every physical constant that
//! is a calibration default (not a measured bag property) lives here so that
//! sweeps can vary it. See `default()` for the schema with all fields.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::bag::BagSpec;
use crate::error::{Error, Result};

/// Physics integration constants.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PhysicsConfig {
    /// Outer step size fed to the integrator, seconds.
    pub dt: f64,
    /// Gravity magnitude, m/s^2. Test hook: set 0 to disable.
    pub gravity: f64,
    /// Particle radius used for table contact and rendering footprint, m.
    pub particle_radius: f64,
    /// Tangential friction coefficient for table contact.
    pub friction: f64,
    /// Safety factor applied to the stiffness-derived substep limit.
    pub substep_safety: f64,
    /// Kinetic-energy threshold for settle termination, joules.
    pub settle_ke_eps: f64,
    /// Settle timeout, seconds.
    pub settle_max_time: f64,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        Self {
            dt: 1.0 / 240.0,
            gravity: 9.81,
            particle_radius: 0.002,
            friction: 8.0,
            substep_safety: 0.5,
            settle_ke_eps: 2e-6,
            settle_max_time: 4.0,
        }
    }
}

/// Action primitive parameter defaults. The per-site values the hardware
/// protocol leaves open are pinned here.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PrimitiveConfig {
    /// Initial gripper separation after lifting to the dangle pose, m.
    pub grasp_separation: f64,
    /// Height grippers dangle the bag at after grasping, m.
    pub dangle_height: f64,
    /// Bag Adjustment: separation decrease per execution, m.
    pub delta_d: f64,
    /// Bag Adjustment: minimum allowed separation, m.
    pub d_min: f64,
    /// Bag Adjustment: number of horizontal swings.
    pub swing_count: u32,
    /// Bag Adjustment: swing half-length, m.
    pub swing_length: f64,
    /// Bag Adjustment: swing frequency, Hz.
    pub swing_frequency: f64,
    /// Dual-arm Shaking: apex height, m.
    pub shake_height: f64,
    /// Dual-arm Shaking: stroke speed, m/s.
    pub shake_speed: f64,
    /// Clearance added above the sensed bag bottom for the down-stroke, m.
    pub shake_bottom_margin: f64,
    /// One-gripper Shake: lift height, m.
    pub wrist_shake_height: f64,
    /// One-gripper Shake: wrist pitch amplitude, rad.
    pub wrist_shake_amplitude: f64,
    /// One-gripper Shake: oscillation cycles.
    pub wrist_shake_cycles: u32,
    /// Global Cartesian speed limit, m/s.
    pub speed_limit: f64,
    /// Robot reach limit (max gripper z), m.
    pub reach_limit: f64,
    /// Default grasp radius, m.
    pub grasp_radius: f64,
    /// Default cruise speed for non-dynamic motions, m/s.
    pub cruise_speed: f64,
}

impl Default for PrimitiveConfig {
    fn default() -> Self {
        Self {
            grasp_separation: 0.30,
            dangle_height: 0.70,
            delta_d: 0.05,
            d_min: 0.08,
            swing_count: 3,
            swing_length: 0.12,
            swing_frequency: 2.0,
            shake_height: 1.4,
            shake_speed: 1.5,
            shake_bottom_margin: 0.10,
            wrist_shake_height: 0.4,
            wrist_shake_amplitude: 0.5,
            wrist_shake_cycles: 3,
            speed_limit: 2.0,
            reach_limit: 1.5,
            grasp_radius: 0.02,
            cruise_speed: 0.5,
        }
    }
}

/// Camera and analytic-baseline parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PerceptionConfig {
    /// Raster columns (x axis of the workspace).
    pub width_px: usize,
    /// Raster rows (y axis of the workspace).
    pub height_px: usize,
    /// Meters per pixel.
    pub pixel_scale: f64,
    /// Gaussian window sigma for the Harris structure tensor, px.
    pub harris_sigma: f64,
    /// Harris k in R = det(M) - k * trace(M)^2.
    pub harris_k: f64,
    /// Non-max suppression radius, px.
    pub harris_nms_radius: usize,
    /// Response threshold as a fraction of the max response.
    pub harris_rel_threshold: f64,
    /// Canny low threshold as a fraction of the max gradient.
    pub canny_low: f64,
    /// Canny high threshold as a fraction of the max gradient.
    pub canny_high: f64,
    /// Gaussian blur sigma before Canny gradients, px.
    pub canny_sigma: f64,
}

impl Default for PerceptionConfig {
    fn default() -> Self {
        Self {
            width_px: 192,
            height_px: 256,
            pixel_scale: 1.8 / 256.0,
            harris_sigma: 1.5,
            harris_k: 0.04,
            harris_nms_radius: 3,
            harris_rel_threshold: 0.05,
            canny_low: 0.1,
            canny_high: 0.3,
            canny_sigma: 1.4,
        }
    }
}

/// Policy thresholds and state-machine parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyConfig {
    /// Opening accepted when normalized hull area reaches this value.
    pub a_min: f64,
    /// Opening accepted when hull elongation is at or below this value.
    pub e_max: f64,
    /// Cap reported for degenerate (zero-area) elongation.
    pub e_degenerate_cap: f64,
    /// Recenter triggered when the bag centroid is farther than this from
    /// the workspace center, m.
    pub recenter_radius: f64,
    /// Recenter no-op tolerance, m.
    pub recenter_tolerance: f64,
    /// Depth window side for bag-bottom sensing, px.
    pub bottom_window_px: usize,
    /// Fallback gripper height when bottom sensing fails, m.
    pub bottom_fallback: f64,
    /// Item drop height above the rim mean height, m.
    pub drop_height: f64,
    /// Lift height for the final transport lift, m.
    pub lift_height: f64,
    /// Hold duration the lift must survive, simulated seconds.
    pub lift_hold_time: f64,
    /// Perception retries allowed for the regrasp step.
    pub regrasp_retries: u32,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            a_min: 0.4,
            e_max: 2.5,
            e_degenerate_cap: 100.0,
            recenter_radius: 0.3,
            recenter_tolerance: 0.02,
            bottom_window_px: 20,
            bottom_fallback: 0.55,
            drop_height: 0.15,
            lift_height: 0.5,
            lift_hold_time: 2.0,
            regrasp_retries: 3,
        }
    }
}

/// Workspace extents; the table plane is z = 0.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct WorkspaceConfig {
    pub width: f64,
    pub depth: f64,
}

impl Default for WorkspaceConfig {
    fn default() -> Self {
        Self {
            width: 1.2,
            depth: 1.8,
        }
    }
}

impl WorkspaceConfig {
    pub fn center(&self) -> [f64; 2] {
        [self.width / 2.0, self.depth / 2.0]
    }
}

/// Trial protocol settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct HarnessConfig {
    /// Action budget per trial before the forced lift.
    pub action_budget: u32,
    /// Number of items inserted per trial.
    pub item_count: u32,
    /// Item radius, m (spheres).
    pub item_radius: f64,
    /// Hull-area fraction of the tier-1 floor used to split tier 1 from 2.
    pub tier1_area_fraction: f64,
    /// Retries allowed when a tier predicate is not met.
    pub tier_retries: u32,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            action_budget: 15,
            item_count: 2,
            item_radius: 0.005,
            tier1_area_fraction: 0.30,
            tier_retries: 20,
        }
    }
}

/// Top-level run configuration; serializes to/from a single TOML file.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub bag: BagSpec,
    pub physics: PhysicsConfig,
    pub primitives: PrimitiveConfig,
    pub perception: PerceptionConfig,
    pub policy: PolicyConfig,
    pub workspace: WorkspaceConfig,
    pub harness: HarnessConfig,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))?;
        std::fs::write(path, text)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_through_toml() {
        let cfg = Config::default();
        let text = toml::to_string_pretty(&cfg).unwrap();
        let back: Config = toml::from_str(&text).unwrap();
        assert_eq!(back.harness.action_budget, cfg.harness.action_budget);
        assert_eq!(back.policy.a_min, cfg.policy.a_min);
    }

    #[test]
    fn partial_file_fills_defaults() {
        let cfg: Config = toml::from_str("[policy]\na_min = 0.5\n").unwrap();
        assert_eq!(cfg.policy.a_min, 0.5);
        assert_eq!(cfg.policy.e_max, 2.5);
    }
}
