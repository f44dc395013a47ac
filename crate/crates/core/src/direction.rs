//! Lateral motion labels from the x-displacement between the current frame
//! and the frame `gap` frames back (two by default).
//!
//! The dead zone is closed: `|dx| == dead_zone_px` is still `Forward`.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DirectionLabel {
    Left,
    Right,
    Forward,
}

impl DirectionLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            DirectionLabel::Left => "left",
            DirectionLabel::Right => "right",
            DirectionLabel::Forward => "forward",
        }
    }

    pub fn mirrored(self) -> Self {
        match self {
            DirectionLabel::Left => DirectionLabel::Right,
            DirectionLabel::Right => DirectionLabel::Left,
            DirectionLabel::Forward => DirectionLabel::Forward,
        }
    }

    /// Label implied by the sign of a velocity, with no dead zone.
    pub fn from_velocity(v: f64) -> Self {
        if v > 0.0 {
            DirectionLabel::Right
        } else if v < 0.0 {
            DirectionLabel::Left
        } else {
            DirectionLabel::Forward
        }
    }
}

impl fmt::Display for DirectionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DirectionConfigError {
    #[error("gap must be >= 1")]
    Gap,
    #[error("dead_zone_px must be > 0, got {0}")]
    DeadZone(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionConfig {
    gap: usize,
    dead_zone_px: f64,
}

/// Dead zone at the reference image width of 640 px.
pub const DEAD_ZONE_PX_AT_640: f64 = 8.0;

impl DirectionConfig {
    pub fn new(gap: usize, dead_zone_px: f64) -> Result<Self, DirectionConfigError> {
        if gap < 1 {
            return Err(DirectionConfigError::Gap);
        }
        if !(dead_zone_px.is_finite() && dead_zone_px > 0.0) {
            return Err(DirectionConfigError::DeadZone(dead_zone_px));
        }
        Ok(Self { gap, dead_zone_px })
    }

    /// Gap 2 with the default dead zone scaled to `image_w`.
    pub fn for_image_width(image_w: f64) -> Self {
        Self::new(2, default_dead_zone_px(image_w)).expect("positive image width")
    }

    pub fn gap(&self) -> usize {
        self.gap
    }

    pub fn dead_zone_px(&self) -> f64 {
        self.dead_zone_px
    }

    pub fn with_gap(self, gap: usize) -> Result<Self, DirectionConfigError> {
        Self::new(gap, self.dead_zone_px)
    }
}

pub fn default_dead_zone_px(image_w: f64) -> f64 {
    DEAD_ZONE_PX_AT_640 * image_w / 640.0
}

pub fn classify_direction(x_current: f64, x_reference: f64, cfg: &DirectionConfig) -> DirectionLabel {
    classify_displacement(x_current - x_reference, cfg.dead_zone_px)
}

pub fn classify_displacement(dx: f64, dead_zone_px: f64) -> DirectionLabel {
    if dx > dead_zone_px {
        DirectionLabel::Right
    } else if dx < -dead_zone_px {
        DirectionLabel::Left
    } else {
        DirectionLabel::Forward
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("object at frame {current} has no observation at reference frame {reference:?}")]
pub struct InsufficientHistory {
    pub current: u64,
    pub reference: Option<u64>,
}

/// Center-x observations of one object, keyed by frame id. Only frames in
/// which the object was matched appear.
pub type TrackHistory = BTreeMap<u64, f64>;

/// Classifies using the most recent observation and the one `gap` frame ids
/// earlier. Intermediate frames are irrelevant.
pub fn direction_for_track(
    history: &TrackHistory,
    cfg: &DirectionConfig,
) -> Result<DirectionLabel, InsufficientHistory> {
    let (&current, &x_current) = history.last_key_value().ok_or(InsufficientHistory {
        current: 0,
        reference: None,
    })?;
    let reference = current.checked_sub(cfg.gap as u64);
    let x_reference = reference
        .and_then(|r| history.get(&r))
        .ok_or(InsufficientHistory { current, reference })?;
    Ok(classify_direction(x_current, *x_reference, cfg))
}
