//! Staged distance alarms.
//!
//! Three disjoint closed distance windows map to vibration lengths:
//!
//! | stage | band (cm)  | vibration |
//! |-------|------------|-----------|
//! | 1     | [570, 600] | 0.8 s     |
//! | 2     | [270, 300] | 1.2 s     |
//! | 3     | [120, 150] | 1.6 s     |
//!
//! Distances between windows raise nothing. With `cumulative_bands` each
//! window is widened downward to the top of the next nearer one (the nearest
//! down to zero), so every distance up to the farthest edge alarms.
//!
//! Repeats are throttled per `(object, stage)` by a cooldown ledger, and at
//! most `max_events_per_frame` events are kept, nearest danger first.

use std::collections::HashMap;

use log::debug;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::direction::DirectionLabel;
use crate::pipeline::TrackedObject;
use crate::types::{Category, ObjectId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlarmStage {
    pub stage: u8,
    pub lo_cm: f64,
    pub hi_cm: f64,
    pub vibration_s: f64,
}

impl AlarmStage {
    pub const fn new(stage: u8, lo_cm: f64, hi_cm: f64, vibration_s: f64) -> Self {
        Self {
            stage,
            lo_cm,
            hi_cm,
            vibration_s,
        }
    }
}

pub const DEFAULT_STAGES: [AlarmStage; 3] = [
    AlarmStage::new(1, 570.0, 600.0, 0.8),
    AlarmStage::new(2, 270.0, 300.0, 1.2),
    AlarmStage::new(3, 120.0, 150.0, 1.6),
];

pub const DEFAULT_COOLDOWN_MS: u64 = 1500;
pub const DEFAULT_MAX_EVENTS_PER_FRAME: usize = 2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AlarmPolicyError {
    #[error("at least one alarm stage is required")]
    NoStages,
    #[error("stage {0}: band must satisfy 0 < lo <= hi")]
    Band(u8),
    #[error("stage {0}: vibration must be > 0 s")]
    Vibration(u8),
    #[error("stages {0} and {1} overlap")]
    Overlap(u8, u8),
    #[error("stage numbers must be distinct and grow as bands get nearer, with strictly longer vibration")]
    Ordering,
    #[error("max_events_per_frame must be >= 1")]
    EventCap,
}

/// Band lookup in effect for one stage, after the optional widening.
#[derive(Debug, Clone, Copy, PartialEq)]
struct EffectiveBand {
    lo_cm: f64,
    lo_open: bool,
    hi_cm: f64,
}

impl EffectiveBand {
    fn contains(&self, d: f64) -> bool {
        let above_lo = if self.lo_open { d > self.lo_cm } else { d >= self.lo_cm };
        above_lo && d <= self.hi_cm
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlarmPolicy {
    /// Sorted nearest band first.
    stages: Vec<AlarmStage>,
    effective: Vec<EffectiveBand>,
    cooldown_ms: u64,
    max_events_per_frame: usize,
    cumulative_bands: bool,
}

impl Default for AlarmPolicy {
    fn default() -> Self {
        Self::new(
            DEFAULT_STAGES.to_vec(),
            DEFAULT_COOLDOWN_MS,
            DEFAULT_MAX_EVENTS_PER_FRAME,
            false,
        )
        .expect("default stages are valid")
    }
}

impl AlarmPolicy {
    pub fn new(
        mut stages: Vec<AlarmStage>,
        cooldown_ms: u64,
        max_events_per_frame: usize,
        cumulative_bands: bool,
    ) -> Result<Self, AlarmPolicyError> {
        if stages.is_empty() {
            return Err(AlarmPolicyError::NoStages);
        }
        if max_events_per_frame < 1 {
            return Err(AlarmPolicyError::EventCap);
        }
        for s in &stages {
            if !(s.lo_cm > 0.0 && s.lo_cm <= s.hi_cm && s.hi_cm.is_finite()) {
                return Err(AlarmPolicyError::Band(s.stage));
            }
            if !(s.vibration_s > 0.0 && s.vibration_s.is_finite()) {
                return Err(AlarmPolicyError::Vibration(s.stage));
            }
        }
        stages.sort_by(|a, b| a.lo_cm.total_cmp(&b.lo_cm));
        for pair in stages.windows(2) {
            let (near, far) = (&pair[0], &pair[1]);
            if far.lo_cm <= near.hi_cm {
                return Err(AlarmPolicyError::Overlap(near.stage, far.stage));
            }
            if near.stage <= far.stage || near.vibration_s <= far.vibration_s {
                return Err(AlarmPolicyError::Ordering);
            }
        }

        let effective = stages
            .iter()
            .enumerate()
            .map(|(k, s)| match (cumulative_bands, k) {
                (false, _) => EffectiveBand {
                    lo_cm: s.lo_cm,
                    lo_open: false,
                    hi_cm: s.hi_cm,
                },
                (true, 0) => EffectiveBand {
                    lo_cm: 0.0,
                    lo_open: true,
                    hi_cm: s.hi_cm,
                },
                (true, k) => EffectiveBand {
                    lo_cm: stages[k - 1].hi_cm,
                    lo_open: true,
                    hi_cm: s.hi_cm,
                },
            })
            .collect();

        Ok(Self {
            stages,
            effective,
            cooldown_ms,
            max_events_per_frame,
            cumulative_bands,
        })
    }

    /// Stages ordered nearest band first.
    pub fn stages(&self) -> &[AlarmStage] {
        &self.stages
    }

    pub fn cooldown_ms(&self) -> u64 {
        self.cooldown_ms
    }

    pub fn max_events_per_frame(&self) -> usize {
        self.max_events_per_frame
    }

    pub fn cumulative_bands(&self) -> bool {
        self.cumulative_bands
    }
}

/// The stage whose band contains `d`, if any.
pub fn stage_for_distance(d: f64, policy: &AlarmPolicy) -> Option<AlarmStage> {
    policy
        .effective
        .iter()
        .zip(&policy.stages)
        .find(|(band, _)| band.contains(d))
        .map(|(_, s)| *s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlarmEvent {
    pub t_ms: u64,
    pub object_id: ObjectId,
    pub category: Category,
    pub stage: u8,
    pub vibration_s: f64,
    pub distance_cm: f64,
    pub direction: Option<DirectionLabel>,
    pub message: String,
}

/// `"Car moving left"`, or `"Car ahead"` without a direction.
pub fn alarm_message(category: &Category, direction: Option<DirectionLabel>) -> String {
    match direction {
        Some(d) => format!("{} moving {}", category.display_name(), d),
        None => format!("{} ahead", category.display_name()),
    }
}

/// Last emission time per `(object, stage)`.
#[derive(Debug, Clone, Default)]
pub struct AlarmLedger {
    last_ms: HashMap<(ObjectId, u8), u64>,
}

impl AlarmLedger {
    pub fn new() -> Self {
        Self::default()
    }

    fn ready(&self, key: (ObjectId, u8), t_ms: u64, cooldown_ms: u64) -> bool {
        match self.last_ms.get(&key) {
            Some(&last) => t_ms.saturating_sub(last) >= cooldown_ms,
            None => true,
        }
    }

    /// Entries whose cooldown has lapsed carry no information.
    fn prune(&mut self, t_ms: u64, cooldown_ms: u64) {
        self.last_ms.retain(|_, last| t_ms.saturating_sub(*last) < cooldown_ms);
    }

    pub fn len(&self) -> usize {
        self.last_ms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.last_ms.is_empty()
    }
}

pub fn emit_alarms(
    tracked: &[TrackedObject],
    t_ms: u64,
    policy: &AlarmPolicy,
    ledger: &mut AlarmLedger,
) -> Vec<AlarmEvent> {
    let mut candidates: Vec<(AlarmStage, &TrackedObject, f64)> = Vec::new();
    for obj in tracked {
        let Some(d) = obj.distance_cm else {
            debug!(
                "object {} ({}) has no height entry, skipped",
                obj.object_id, obj.category
            );
            continue;
        };
        let Some(stage) = stage_for_distance(d, policy) else {
            continue;
        };
        if ledger.ready((obj.object_id, stage.stage), t_ms, policy.cooldown_ms) {
            candidates.push((stage, obj, d));
        }
    }

    candidates.sort_by(|a, b| {
        b.0.stage
            .cmp(&a.0.stage)
            .then(a.2.total_cmp(&b.2))
            .then(a.1.object_id.cmp(&b.1.object_id))
    });
    candidates.truncate(policy.max_events_per_frame);

    ledger.prune(t_ms, policy.cooldown_ms);
    candidates
        .into_iter()
        .map(|(stage, obj, d)| {
            ledger.last_ms.insert((obj.object_id, stage.stage), t_ms);
            AlarmEvent {
                t_ms,
                object_id: obj.object_id,
                category: obj.category.clone(),
                stage: stage.stage,
                vibration_s: stage.vibration_s,
                distance_cm: d,
                direction: obj.direction,
                message: alarm_message(&obj.category, obj.direction),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::BoundingBox;

    fn obj(id: u64, category: Category, d: Option<f64>, direction: Option<DirectionLabel>) -> TrackedObject {
        TrackedObject {
            object_id: ObjectId(id),
            frame_id: 0,
            category,
            bbox: BoundingBox::new(0.0, 0.0, 10.0, 10.0).unwrap(),
            distance_cm: d,
            direction,
            matched_from: direction.map(|_| ObjectId(id)),
        }
    }

    #[test]
    fn band_lookup() {
        let p = AlarmPolicy::default();
        let s = stage_for_distance(580.0, &p).unwrap();
        assert_eq!((s.stage, s.vibration_s), (1, 0.8));
        let s = stage_for_distance(135.0, &p).unwrap();
        assert_eq!((s.stage, s.vibration_s), (3, 1.6));
        assert_eq!(stage_for_distance(400.0, &p), None);
        assert_eq!(stage_for_distance(600.0, &p).unwrap().stage, 1);
    }

    #[test]
    fn cumulative_bands_fill_the_gaps() {
        let p = AlarmPolicy::new(DEFAULT_STAGES.to_vec(), 0, 2, true).unwrap();
        let stage = |d| stage_for_distance(d, &p).map(|s| s.stage);
        assert_eq!(stage(400.0), Some(1));
        assert_eq!(stage(300.0), Some(2));
        assert_eq!(stage(300.5), Some(1));
        assert_eq!(stage(200.0), Some(2));
        assert_eq!(stage(150.0), Some(3));
        assert_eq!(stage(10.0), Some(3));
        assert_eq!(stage(600.5), None);
    }

    #[test]
    fn policy_validation() {
        let overlapping = vec![
            AlarmStage::new(1, 100.0, 300.0, 0.8),
            AlarmStage::new(2, 200.0, 250.0, 1.2),
        ];
        assert_eq!(
            AlarmPolicy::new(overlapping, 0, 1, false),
            Err(AlarmPolicyError::Overlap(1, 2))
        );
        let inverted = vec![
            AlarmStage::new(1, 100.0, 150.0, 1.6),
            AlarmStage::new(2, 500.0, 600.0, 0.8),
        ];
        assert_eq!(AlarmPolicy::new(inverted, 0, 1, false), Err(AlarmPolicyError::Ordering));
        assert_eq!(
            AlarmPolicy::new(DEFAULT_STAGES.to_vec(), 0, 0, false),
            Err(AlarmPolicyError::EventCap)
        );
        assert_eq!(AlarmPolicy::new(vec![], 0, 1, false), Err(AlarmPolicyError::NoStages));
    }

    #[test]
    fn message_text() {
        assert_eq!(
            alarm_message(&Category::Car, Some(DirectionLabel::Left)),
            "Car moving left"
        );
        assert_eq!(alarm_message(&Category::Person, None), "Person ahead");
    }

    #[test]
    fn cooldown_suppresses_repeat() {
        let p = AlarmPolicy::default();
        let mut ledger = AlarmLedger::new();
        let first = emit_alarms(
            &[obj(1, Category::Car, Some(580.0), Some(DirectionLabel::Left))],
            0,
            &p,
            &mut ledger,
        );
        assert_eq!(first.len(), 1);
        assert_eq!(first[0].message, "Car moving left");
        assert_eq!((first[0].stage, first[0].vibration_s), (1, 0.8));

        let again = emit_alarms(
            &[obj(1, Category::Car, Some(578.0), Some(DirectionLabel::Left))],
            100,
            &p,
            &mut ledger,
        );
        assert!(again.is_empty());

        let later = emit_alarms(
            &[obj(1, Category::Car, Some(575.0), Some(DirectionLabel::Left))],
            1500,
            &p,
            &mut ledger,
        );
        assert_eq!(later.len(), 1);
    }

    #[test]
    fn nearest_danger_first_then_cap() {
        let p = AlarmPolicy::new(DEFAULT_STAGES.to_vec(), DEFAULT_COOLDOWN_MS, 1, false).unwrap();
        let mut ledger = AlarmLedger::new();
        let events = emit_alarms(
            &[
                obj(1, Category::Person, Some(290.0), None),
                obj(2, Category::Car, Some(140.0), None),
            ],
            0,
            &p,
            &mut ledger,
        );
        assert_eq!(events.len(), 1);
        assert_eq!((events[0].object_id, events[0].stage), (ObjectId(2), 3));
        assert_eq!(events[0].message, "Car ahead");
        // the truncated person event was not recorded and fires next frame
        let events = emit_alarms(&[obj(1, Category::Person, Some(289.0), None)], 100, &p, &mut ledger);
        assert_eq!(events.len(), 1);
    }

    #[test]
    fn objects_without_distance_never_alarm() {
        let p = AlarmPolicy::default();
        let mut ledger = AlarmLedger::new();
        let events = emit_alarms(&[obj(1, Category::Other("dog".into()), None, None)], 0, &p, &mut ledger);
        assert!(events.is_empty());
    }

    #[test]
    fn ledger_stays_bounded() {
        let p = AlarmPolicy::new(DEFAULT_STAGES.to_vec(), 100, 2, false).unwrap();
        let mut ledger = AlarmLedger::new();
        for k in 0..50u64 {
            emit_alarms(&[obj(k, Category::Car, Some(580.0), None)], k * 1000, &p, &mut ledger);
        }
        assert_eq!(ledger.len(), 1);
    }
}
