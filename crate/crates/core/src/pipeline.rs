//! Per-frame orchestration: distance, matching against the frame `gap`
//! frames back, direction, alarms.
//!
//! State is a window of the last `gap` processed frames (two by default, so
//! together with the incoming frame at most three are held), an id counter
//! and the alarm ledger. Per-frame cost is bounded by the window size, not by
//! stream length.
//!
//! Identity: a detection matched to reference detection `r` adopts `r`'s id;
//! anything else gets a fresh id. An id that is not re-observed within `gap`
//! frames falls out of the window and is retired; the counter never reuses
//! a value.

use std::collections::{HashSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alarm::{emit_alarms, AlarmEvent, AlarmLedger};
use crate::camera::estimate_distance;
use crate::config::PipelineConfig;
use crate::direction::{classify_direction, DirectionLabel};
use crate::matcher::{match_detections, MatchResult};
use crate::types::{BoundingBox, Category, Detection, DetectionFrame, ObjectId};

/// A detection enriched with identity, distance and direction.
///
/// `direction` is `None` whenever `matched_from` is; `distance_cm` is `None`
/// exactly when the category has no configured height.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackedObject {
    pub object_id: ObjectId,
    pub frame_id: u64,
    pub category: Category,
    pub bbox: BoundingBox,
    pub distance_cm: Option<f64>,
    pub direction: Option<DirectionLabel>,
    pub matched_from: Option<ObjectId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StreamError {
    #[error("frame {frame_id} arrived after frame {last_frame_id}; frame ids must strictly increase")]
    FrameOrder { frame_id: u64, last_frame_id: u64 },
    #[error("frame {frame_id} has t_ms {t_ms} earlier than the previous frame's {last_t_ms}")]
    TimeOrder { frame_id: u64, t_ms: u64, last_t_ms: u64 },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameOutput {
    pub tracked: Vec<TrackedObject>,
    pub alarms: Vec<AlarmEvent>,
}

#[derive(Debug, Clone)]
struct WindowFrame {
    frame_id: u64,
    t_ms: u64,
    detections: Vec<Detection>,
    ids: Vec<ObjectId>,
}

/// Hands out ids in increasing order.
#[derive(Debug, Clone, Default)]
pub struct IdAllocator {
    next: u64,
}

impl IdAllocator {
    pub fn fresh(&mut self) -> ObjectId {
        let id = ObjectId(self.next);
        self.next += 1;
        id
    }

    pub fn peek(&self) -> u64 {
        self.next
    }
}

/// Ids for the current frame given a match against the reference frame:
/// matched detections inherit, the rest are fresh.
pub fn id_propagation(
    matches: &MatchResult,
    n_current: usize,
    reference_ids: &[ObjectId],
    ids: &mut IdAllocator,
) -> Vec<ObjectId> {
    inherited_ids(matches, n_current, reference_ids)
        .into_iter()
        .map(|id| id.unwrap_or_else(|| ids.fresh()))
        .collect()
}

fn inherited_ids(matches: &MatchResult, n_current: usize, reference_ids: &[ObjectId]) -> Vec<Option<ObjectId>> {
    matches
        .reference_of(n_current)
        .into_iter()
        .map(|r| r.map(|j| reference_ids[j]))
        .collect()
}

/// One pipeline per stream. Frames must be fed in order.
#[derive(Debug, Clone)]
pub struct Pipeline {
    config: PipelineConfig,
    window: VecDeque<WindowFrame>,
    ids: IdAllocator,
    ledger: AlarmLedger,
}

impl Pipeline {
    pub fn new(config: PipelineConfig) -> Self {
        Self {
            window: VecDeque::with_capacity(config.direction.gap() + 1),
            config,
            ids: IdAllocator::default(),
            ledger: AlarmLedger::new(),
        }
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    /// Number of past frames currently held.
    pub fn window_len(&self) -> usize {
        self.window.len()
    }

    pub fn process_frame(&mut self, frame: &DetectionFrame) -> Result<FrameOutput, StreamError> {
        if let Some(last) = self.window.back() {
            if frame.frame_id <= last.frame_id {
                return Err(StreamError::FrameOrder {
                    frame_id: frame.frame_id,
                    last_frame_id: last.frame_id,
                });
            }
            if frame.t_ms < last.t_ms {
                return Err(StreamError::TimeOrder {
                    frame_id: frame.frame_id,
                    t_ms: frame.t_ms,
                    last_t_ms: last.t_ms,
                });
            }
        }

        let cfg = &self.config;
        let dets = &frame.detections;
        let gap = cfg.direction.gap();

        let distances: Vec<Option<f64>> = dets
            .iter()
            .map(|d| estimate_distance(&cfg.camera, &cfg.heights, d).ok())
            .collect();

        let reference = self.window.len().checked_sub(gap).map(|k| &self.window[k]);
        let matches = match reference {
            Some(r) => match_detections(dets, &r.detections, &cfg.matcher),
            None => MatchResult {
                unmatched_current: (0..dets.len()).collect(),
                ..MatchResult::default()
            },
        };
        let reference_of = matches.reference_of(dets.len());

        let mut ids = inherited_ids(&matches, dets.len(), reference.map_or(&[], |r| &r.ids));

        if cfg.secondary_match && gap > 1 {
            if let Some(prev) = self.window.back() {
                let taken: HashSet<ObjectId> = ids.iter().flatten().copied().collect();
                let leftovers: Vec<usize> = (0..dets.len()).filter(|&i| ids[i].is_none()).collect();
                let candidates: Vec<usize> = (0..prev.ids.len()).filter(|&j| !taken.contains(&prev.ids[j])).collect();
                let cur: Vec<Detection> = leftovers.iter().map(|&i| dets[i].clone()).collect();
                let refs: Vec<Detection> = candidates.iter().map(|&j| prev.detections[j].clone()).collect();
                for p in match_detections(&cur, &refs, &cfg.matcher).pairs {
                    ids[leftovers[p.current]] = Some(prev.ids[candidates[p.reference]]);
                }
            }
        }

        let ids: Vec<ObjectId> = ids
            .into_iter()
            .map(|id| id.unwrap_or_else(|| self.ids.fresh()))
            .collect();

        let tracked: Vec<TrackedObject> = dets
            .iter()
            .enumerate()
            .map(|(i, det)| {
                let linked = reference_of[i].map(|j| {
                    let r = reference.expect("matched implies reference");
                    let direction =
                        classify_direction(det.bbox.center().0, r.detections[j].bbox.center().0, &cfg.direction);
                    (r.ids[j], direction)
                });
                TrackedObject {
                    object_id: ids[i],
                    frame_id: frame.frame_id,
                    category: det.category.clone(),
                    bbox: det.bbox,
                    distance_cm: distances[i],
                    direction: linked.map(|(_, d)| d),
                    matched_from: linked.map(|(id, _)| id),
                }
            })
            .collect();

        let alarms = emit_alarms(&tracked, frame.t_ms, &cfg.alarm, &mut self.ledger);

        self.window.push_back(WindowFrame {
            frame_id: frame.frame_id,
            t_ms: frame.t_ms,
            detections: frame.detections.clone(),
            ids,
        });
        while self.window.len() > gap {
            self.window.pop_front();
        }

        Ok(FrameOutput { tracked, alarms })
    }

    /// Runs a whole stream, stopping at the first ordering error.
    pub fn run<'a>(
        &mut self,
        frames: impl IntoIterator<Item = &'a DetectionFrame>,
    ) -> Result<FrameOutput, StreamError> {
        let mut out = FrameOutput::default();
        for frame in frames {
            let FrameOutput { tracked, alarms } = self.process_frame(frame)?;
            out.tracked.extend(tracked);
            out.alarms.extend(alarms);
        }
        Ok(out)
    }
}
