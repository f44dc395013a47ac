//! Pipeline configuration file.
//!
//! TOML with `[camera]`, `[heights]`, `[matcher]`, `[direction]` and
//! `[alarm]` sections. Unknown keys are fatal. The shipped defaults live in
//! `config/default.toml` and are compiled in.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::alarm::{AlarmPolicy, AlarmStage};
use crate::camera::{CameraIntrinsics, HeightTable};
use crate::direction::{default_dead_zone_px, DirectionConfig};
use crate::matcher::{MatchConfig, MatchStrategy};
use crate::types::Category;

pub const DEFAULT_CONFIG_TOML: &str = include_str!("../config/default.toml");

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn invalid(e: impl std::fmt::Display) -> ConfigError {
    ConfigError::Invalid(e.to_string())
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    camera: Option<RawCamera>,
    heights: Option<BTreeMap<String, f64>>,
    #[serde(default)]
    matcher: RawMatcher,
    #[serde(default)]
    direction: RawDirection,
    #[serde(default)]
    alarm: RawAlarm,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCamera {
    focal_px: Option<f64>,
    image_w: Option<f64>,
    image_h: Option<f64>,
    camera_height_cm: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMatcher {
    strategy: Option<MatchStrategy>,
    max_center_dist_px: Option<f64>,
    min_iou: Option<f64>,
    secondary_match: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDirection {
    gap: Option<usize>,
    dead_zone_px: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAlarm {
    bands: Option<Vec<[f64; 2]>>,
    vibrations_s: Option<Vec<f64>>,
    cooldown_ms: Option<u64>,
    max_events_per_frame: Option<usize>,
    cumulative_bands: Option<bool>,
}

/// Everything the pipeline needs, validated.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub camera: CameraIntrinsics,
    pub camera_height_cm: f64,
    pub heights: HeightTable,
    pub matcher: MatchConfig,
    /// Match leftovers against the previous frame for id continuity only.
    pub secondary_match: bool,
    pub direction: DirectionConfig,
    pub alarm: AlarmPolicy,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self::from_toml_str(DEFAULT_CONFIG_TOML).expect("shipped default config is valid")
    }
}

impl PipelineConfig {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    /// Parses a config, filling omitted sections and keys from the shipped
    /// defaults.
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let user: RawConfig = toml::from_str(text)?;
        let base: RawConfig = toml::from_str(DEFAULT_CONFIG_TOML)?;
        Self::resolve(user, base)
    }

    /// Same defaults with a different camera; gates and dead zone rescale.
    pub fn for_camera(camera: CameraIntrinsics, camera_height_cm: f64) -> Self {
        let mut cfg = Self::default();
        cfg.camera = camera;
        cfg.camera_height_cm = camera_height_cm;
        cfg.matcher = MatchConfig::for_image_width(camera.image_w());
        cfg.direction =
            DirectionConfig::new(cfg.direction.gap(), default_dead_zone_px(camera.image_w())).expect("valid dead zone");
        cfg
    }

    fn resolve(user: RawConfig, base: RawConfig) -> Result<Self, ConfigError> {
        let base_cam = base.camera.expect("default camera section");
        let cam = user.camera.unwrap_or(RawCamera {
            focal_px: None,
            image_w: None,
            image_h: None,
            camera_height_cm: None,
        });
        let camera = CameraIntrinsics::new(
            cam.focal_px.or(base_cam.focal_px).expect("default focal_px"),
            cam.image_w.or(base_cam.image_w).expect("default image_w"),
            cam.image_h.or(base_cam.image_h).expect("default image_h"),
        )
        .map_err(invalid)?;
        let camera_height_cm = cam
            .camera_height_cm
            .or(base_cam.camera_height_cm)
            .expect("default camera height");
        if !(camera_height_cm.is_finite() && camera_height_cm > 0.0) {
            return Err(invalid(format!("camera_height_cm must be > 0, got {camera_height_cm}")));
        }

        let mut heights = HeightTable::default();
        for (label, cm) in user.heights.or(base.heights).unwrap_or_default() {
            let category: Category = label.parse().map_err(invalid)?;
            heights
                .insert(category, cm)
                .map_err(|e| invalid(format!("heights.{label}: {e}")))?;
        }

        let m = user.matcher;
        let matcher = MatchConfig::new(
            m.strategy.or(base.matcher.strategy).unwrap_or_default(),
            m.max_center_dist_px
                .or(base.matcher.max_center_dist_px)
                .unwrap_or(0.25 * camera.image_w()),
            m.min_iou.or(base.matcher.min_iou).unwrap_or(0.1),
        )
        .map_err(invalid)?;
        let secondary_match = m.secondary_match.or(base.matcher.secondary_match).unwrap_or(true);

        let d = user.direction;
        let direction = DirectionConfig::new(
            d.gap.or(base.direction.gap).unwrap_or(2),
            d.dead_zone_px
                .or(base.direction.dead_zone_px)
                .unwrap_or_else(|| default_dead_zone_px(camera.image_w())),
        )
        .map_err(invalid)?;

        let a = user.alarm;
        let bands = a.bands.or(base.alarm.bands).expect("default bands");
        let vibrations = a.vibrations_s.or(base.alarm.vibrations_s).expect("default vibrations");
        if bands.len() != vibrations.len() {
            return Err(invalid(format!(
                "alarm.bands has {} entries but alarm.vibrations_s has {}",
                bands.len(),
                vibrations.len()
            )));
        }
        let stages = bands
            .iter()
            .zip(&vibrations)
            .enumerate()
            .map(|(k, (band, &vib))| AlarmStage::new(k as u8 + 1, band[0], band[1], vib))
            .collect();
        let alarm = AlarmPolicy::new(
            stages,
            a.cooldown_ms.or(base.alarm.cooldown_ms).expect("default cooldown"),
            a.max_events_per_frame
                .or(base.alarm.max_events_per_frame)
                .expect("default cap"),
            a.cumulative_bands.or(base.alarm.cumulative_bands).unwrap_or(false),
        )
        .map_err(invalid)?;

        Ok(Self {
            camera,
            camera_height_cm,
            heights,
            matcher,
            secondary_match,
            direction,
            alarm,
        })
    }
}
