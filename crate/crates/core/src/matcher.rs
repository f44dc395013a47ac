//! Same-category association between a current frame and a reference frame.
//!
//! Assignment is greedy over a globally sorted candidate list: every
//! compatible pair that passes the gate is ranked (center distance
//! ascending, or IoU descending), ties broken by `(current, reference)`
//! index order, and a pair is accepted when both endpoints are still free.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{Detection, DetectionFrame};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchStrategy {
    #[default]
    Euclidean,
    Iou,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MatchConfigError {
    #[error("max_center_dist_px must be > 0, got {0}")]
    Gate(f64),
    #[error("min_iou must lie in [0, 1], got {0}")]
    MinIou(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchConfig {
    strategy: MatchStrategy,
    max_center_dist_px: f64,
    min_iou: f64,
}

impl MatchConfig {
    pub fn new(strategy: MatchStrategy, max_center_dist_px: f64, min_iou: f64) -> Result<Self, MatchConfigError> {
        if !(max_center_dist_px.is_finite() && max_center_dist_px > 0.0) {
            return Err(MatchConfigError::Gate(max_center_dist_px));
        }
        if !(0.0..=1.0).contains(&min_iou) {
            return Err(MatchConfigError::MinIou(min_iou));
        }
        Ok(Self {
            strategy,
            max_center_dist_px,
            min_iou,
        })
    }

    /// Default gates: a quarter of the image width, IoU 0.1.
    pub fn for_image_width(image_w: f64) -> Self {
        Self::new(MatchStrategy::Euclidean, 0.25 * image_w, 0.1).expect("positive image width")
    }

    pub fn strategy(&self) -> MatchStrategy {
        self.strategy
    }

    pub fn max_center_dist_px(&self) -> f64 {
        self.max_center_dist_px
    }

    pub fn min_iou(&self) -> f64 {
        self.min_iou
    }

    fn passes(&self, cost: f64) -> bool {
        match self.strategy {
            MatchStrategy::Euclidean => cost <= self.max_center_dist_px,
            MatchStrategy::Iou => cost >= self.min_iou,
        }
    }
}

/// Accepted association between `current[current]` and `reference[reference]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchPair {
    pub current: usize,
    pub reference: usize,
    /// Center distance in pixels, or IoU, depending on strategy.
    pub cost: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub pairs: Vec<MatchPair>,
    pub unmatched_current: Vec<usize>,
    pub unmatched_reference: Vec<usize>,
}

impl MatchResult {
    /// Reference index matched to each current index.
    pub fn reference_of(&self, n_current: usize) -> Vec<Option<usize>> {
        let mut out = vec![None; n_current];
        for p in &self.pairs {
            out[p.current] = Some(p.reference);
        }
        out
    }
}

/// Center distance when categories agree, `None` otherwise.
pub fn euclidean_cost(a: &Detection, b: &Detection) -> Option<f64> {
    if a.category != b.category {
        return None;
    }
    let (ax, ay) = a.bbox.center();
    let (bx, by) = b.bbox.center();
    Some((ax - bx).hypot(ay - by))
}

/// Intersection over union when categories agree, `None` otherwise.
pub fn iou_cost(a: &Detection, b: &Detection) -> Option<f64> {
    if a.category != b.category {
        return None;
    }
    let (p, q) = (&a.bbox, &b.bbox);
    let ix = (p.x() + p.w()).min(q.x() + q.w()) - p.x().max(q.x());
    let iy = (p.y() + p.h()).min(q.y() + q.h()) - p.y().max(q.y());
    if ix <= 0.0 || iy <= 0.0 {
        return Some(0.0);
    }
    let inter = ix * iy;
    Some(inter / (p.area() + q.area() - inter))
}

pub fn match_frames(current: &DetectionFrame, reference: &DetectionFrame, cfg: &MatchConfig) -> MatchResult {
    match_detections(&current.detections, &reference.detections, cfg)
}

pub fn match_detections(current: &[Detection], reference: &[Detection], cfg: &MatchConfig) -> MatchResult {
    let cost_fn = match cfg.strategy {
        MatchStrategy::Euclidean => euclidean_cost,
        MatchStrategy::Iou => iou_cost,
    };

    let mut candidates = Vec::with_capacity(current.len() * reference.len());
    for (i, a) in current.iter().enumerate() {
        for (j, b) in reference.iter().enumerate() {
            if let Some(cost) = cost_fn(a, b) {
                if cfg.passes(cost) {
                    candidates.push(MatchPair {
                        current: i,
                        reference: j,
                        cost,
                    });
                }
            }
        }
    }

    let by_cost: fn(&MatchPair, &MatchPair) -> Ordering = match cfg.strategy {
        MatchStrategy::Euclidean => |a, b| a.cost.total_cmp(&b.cost),
        MatchStrategy::Iou => |a, b| b.cost.total_cmp(&a.cost),
    };
    candidates.sort_unstable_by(|a, b| {
        by_cost(a, b)
            .then(a.current.cmp(&b.current))
            .then(a.reference.cmp(&b.reference))
    });

    let mut current_used = vec![false; current.len()];
    let mut reference_used = vec![false; reference.len()];
    let mut pairs = Vec::new();
    for c in candidates {
        if !current_used[c.current] && !reference_used[c.reference] {
            current_used[c.current] = true;
            reference_used[c.reference] = true;
            pairs.push(c);
        }
    }

    let free = |used: &[bool]| used.iter().enumerate().filter_map(|(i, u)| (!u).then_some(i)).collect();
    MatchResult {
        unmatched_current: free(&current_used),
        unmatched_reference: free(&reference_used),
        pairs,
    }
}
