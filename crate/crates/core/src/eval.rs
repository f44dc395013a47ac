//! Scoring pipeline output against simulator truth.
//!
//! Per frame, tracked objects are paired with emitted truth records by
//! greedy ground-point distance (bottom-center of the tracked box against
//! the projected foot of the actor). Within a pair:
//!
//! * category is correct when the tracked label equals the true category;
//! * direction is scored only when the pipeline produced one, banded by
//!   true depth. A `forward` label for a moving actor is excused when the
//!   actor's projected displacement over the gap lies within the dead zone,
//!   unless `strict` is set;
//! * an id switch is any change of the object id paired with one actor.
//!
//! Empty denominators give absent cells, rendered `"n/a"`.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::camera::{project_ground_row, project_lateral, CameraIntrinsics};
use crate::config::PipelineConfig;
use crate::direction::{DirectionConfig, DirectionLabel};
use crate::pipeline::{Pipeline, StreamError, TrackedObject};
use crate::simulator::{generate, ScenarioError, ScenarioSpec, TruthRecord};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("frame {frame_id}: {tracked} tracked objects but {emitted} emitted truth records")]
    Misaligned {
        frame_id: u64,
        tracked: usize,
        emitted: usize,
    },
    #[error("band boundaries must be positive, finite and strictly ascending")]
    Bands,
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Stream(#[from] StreamError),
}

/// Depth bands `(0, b0], (b0, b1], ..., (b_last, inf)` in cm.
#[derive(Debug, Clone, PartialEq)]
pub struct BandPartition {
    boundaries: Vec<f64>,
}

impl Default for BandPartition {
    fn default() -> Self {
        Self::new(vec![300.0, 600.0]).expect("valid default bands")
    }
}

impl BandPartition {
    pub fn new(boundaries: Vec<f64>) -> Result<Self, EvalError> {
        let ok = boundaries.iter().all(|b| b.is_finite() && *b > 0.0) && boundaries.windows(2).all(|w| w[0] < w[1]);
        if !ok {
            return Err(EvalError::Bands);
        }
        Ok(Self { boundaries })
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn len(&self) -> usize {
        self.boundaries.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn band_of(&self, depth_cm: f64) -> usize {
        self.boundaries
            .iter()
            .position(|&b| depth_cm <= b)
            .unwrap_or(self.boundaries.len())
    }

    pub fn name(&self, k: usize) -> String {
        if self.boundaries.len() == 2 {
            ["short", "middle", "long"][k].to_string()
        } else {
            format!("band{k}")
        }
    }

    pub fn range_label(&self, k: usize) -> String {
        let lo = if k == 0 { 0.0 } else { self.boundaries[k - 1] };
        match self.boundaries.get(k) {
            Some(hi) => format!("({lo}, {hi}]"),
            None => format!("({lo}, inf)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub bands: BandPartition,
    pub camera: CameraIntrinsics,
    pub camera_height_cm: f64,
    pub direction: DirectionConfig,
    /// Disables the excusable-forward rule.
    pub strict: bool,
}

impl EvalConfig {
    pub fn from_pipeline(cfg: &PipelineConfig, bands: BandPartition) -> Self {
        Self {
            bands,
            camera: cfg.camera,
            camera_height_cm: cfg.camera_height_cm,
            direction: cfg.direction,
            strict: false,
        }
    }
}

/// A fraction that is absent when its denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fraction(pub Option<f64>);

impl Fraction {
    pub fn of(num: usize, den: usize) -> Self {
        Fraction((den > 0).then(|| num as f64 / den as f64))
    }

    pub fn value(&self) -> Option<f64> {
        self.0
    }
}

impl std::fmt::Display for Fraction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.0 {
            Some(v) => write!(f, "{:.4}", v),
            None => f.write_str("n/a"),
        }
    }
}

impl Serialize for Fraction {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.0 {
            Some(v) => s.serialize_f64(v),
            None => s.serialize_str("n/a"),
        }
    }
}

impl<'de> Deserialize<'de> for Fraction {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Cell {
            Num(f64),
            Text(String),
        }
        match Cell::deserialize(d)? {
            Cell::Num(v) => Ok(Fraction(Some(v))),
            Cell::Text(t) if t == "n/a" => Ok(Fraction(None)),
            Cell::Text(t) => Err(serde::de::Error::custom(format!(
                "expected a number or \"n/a\", got {t:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandCell {
    pub name: String,
    pub range_cm: String,
    pub classified: usize,
    pub correct: usize,
    pub accuracy: Fraction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Band edges are an evaluation assumption, not measured constants.
    pub band_edges_cm: Vec<f64>,
    pub strict: bool,
    pub associated: usize,
    pub category_correct: usize,
    pub category_accuracy: Fraction,
    pub direction_classified: usize,
    pub direction_correct: usize,
    pub direction_accuracy_overall: Fraction,
    pub direction_accuracy_by_band: Vec<BandCell>,
    pub id_switches: usize,
    pub matched_fraction: Fraction,
}

impl EvalReport {
    pub fn band(&self, name: &str) -> Option<&BandCell> {
        self.direction_accuracy_by_band.iter().find(|b| b.name == name)
    }

    pub fn headline(&self) -> String {
        let bands: Vec<String> = self
            .direction_accuracy_by_band
            .iter()
            .map(|b| format!("{} {}", b.name, b.accuracy))
            .collect();
        format!(
            "category accuracy {} | direction accuracy {} ({}) | id switches {} | matched {}",
            self.category_accuracy,
            self.direction_accuracy_overall,
            bands.join(", "),
            self.id_switches,
            self.matched_fraction
        )
    }
}

pub fn score(tracked: &[TrackedObject], truth: &[TruthRecord], cfg: &EvalConfig) -> Result<EvalReport, EvalError> {
    let mut tracked_by_frame: BTreeMap<u64, Vec<&TrackedObject>> = BTreeMap::new();
    for t in tracked {
        tracked_by_frame.entry(t.frame_id).or_default().push(t);
    }
    let mut truth_by_frame: BTreeMap<u64, Vec<&TruthRecord>> = BTreeMap::new();
    let mut truth_at: HashMap<(u64, u64), &TruthRecord> = HashMap::new();
    for r in truth {
        truth_at.insert((r.frame_id, r.actor_id), r);
        if r.emitted {
            truth_by_frame.entry(r.frame_id).or_default().push(r);
        }
    }

    let frame_ids: std::collections::BTreeSet<u64> =
        tracked_by_frame.keys().chain(truth_by_frame.keys()).copied().collect();

    let gap = cfg.direction.gap() as u64;
    let dead_zone = cfg.direction.dead_zone_px();
    let image_x = |r: &TruthRecord| project_lateral(&cfg.camera, r.true_lateral_cm, r.true_depth_cm);

    let mut associated = 0;
    let mut category_correct = 0;
    let mut band_counts = vec![(0usize, 0usize); cfg.bands.len()];
    let mut last_id: HashMap<u64, crate::types::ObjectId> = HashMap::new();
    let mut id_switches = 0;

    for frame_id in frame_ids {
        let objs = tracked_by_frame.get(&frame_id).map(Vec::as_slice).unwrap_or(&[]);
        let recs = truth_by_frame.get(&frame_id).map(Vec::as_slice).unwrap_or(&[]);
        if objs.len() != recs.len() {
            return Err(EvalError::Misaligned {
                frame_id,
                tracked: objs.len(),
                emitted: recs.len(),
            });
        }

        let mut candidates: Vec<(f64, usize, usize)> = Vec::with_capacity(objs.len() * recs.len());
        for (i, o) in objs.iter().enumerate() {
            let (ox, oy) = o.bbox.bottom_center();
            for (j, r) in recs.iter().enumerate() {
                let rx = image_x(r);
                let ry = project_ground_row(&cfg.camera, cfg.camera_height_cm, r.true_depth_cm);
                candidates.push(((ox - rx).hypot(oy - ry), i, j));
            }
        }
        candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut obj_used = vec![false; objs.len()];
        let mut rec_used = vec![false; recs.len()];
        let mut pairs = Vec::with_capacity(objs.len());
        for (_, i, j) in candidates {
            if !obj_used[i] && !rec_used[j] {
                obj_used[i] = true;
                rec_used[j] = true;
                pairs.push((objs[i], recs[j]));
            }
        }
        // actor order keeps id-switch counting independent of detection order
        pairs.sort_by_key(|(_, r)| r.actor_id);

        for (obj, rec) in pairs {
            associated += 1;
            if obj.category == rec.true_category {
                category_correct += 1;
            }

            if let Some(prev) = last_id.insert(rec.actor_id, obj.object_id) {
                if prev != obj.object_id {
                    id_switches += 1;
                }
            }

            let Some(label) = obj.direction else { continue };
            let cell = &mut band_counts[cfg.bands.band_of(rec.true_depth_cm)];
            cell.0 += 1;
            let excused = !cfg.strict
                && label == DirectionLabel::Forward
                && frame_id
                    .checked_sub(gap)
                    .and_then(|r| truth_at.get(&(r, rec.actor_id)))
                    .is_some_and(|past| (image_x(rec) - image_x(past)).abs() <= dead_zone);
            if label == rec.true_direction || excused {
                cell.1 += 1;
            }
        }
    }

    let classified: usize = band_counts.iter().map(|c| c.0).sum();
    let correct: usize = band_counts.iter().map(|c| c.1).sum();
    Ok(EvalReport {
        band_edges_cm: cfg.bands.boundaries().to_vec(),
        strict: cfg.strict,
        associated,
        category_correct,
        category_accuracy: Fraction::of(category_correct, associated),
        direction_classified: classified,
        direction_correct: correct,
        direction_accuracy_overall: Fraction::of(correct, classified),
        direction_accuracy_by_band: band_counts
            .iter()
            .enumerate()
            .map(|(k, &(n, c))| BandCell {
                name: cfg.bands.name(k),
                range_cm: cfg.bands.range_label(k),
                classified: n,
                correct: c,
                accuracy: Fraction::of(c, n),
            })
            .collect(),
        id_switches,
        matched_fraction: Fraction::of(classified, associated),
    })
}

/// Simulates `spec` then scores the pipeline under `cfg`.
pub fn run_scenario(spec: &ScenarioSpec, cfg: &PipelineConfig, eval: &EvalConfig) -> Result<EvalReport, EvalError> {
    let sim = generate(spec)?;
    let out = Pipeline::new(cfg.clone()).run(&sim.frames)?;
    score(&out.tracked, &sim.truth, eval)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapComparison {
    pub gap1: EvalReport,
    pub gap2: EvalReport,
}

/// Runs the same stream with gap 1 and gap 2, everything else equal.
/// Scoring is strict so a sub-threshold `forward` is not excused.
pub fn compare_gap_strategies(spec: &ScenarioSpec, dead_zone_px: f64) -> Result<GapComparison, EvalError> {
    let sim = generate(spec)?;
    let report = |gap: usize| -> Result<EvalReport, EvalError> {
        let mut cfg = PipelineConfig::for_camera(spec.camera, spec.camera_height_cm);
        cfg.direction = DirectionConfig::new(gap, dead_zone_px).map_err(|_| EvalError::Bands)?;
        let out = Pipeline::new(cfg.clone()).run(&sim.frames)?;
        let mut eval = EvalConfig::from_pipeline(&cfg, BandPartition::default());
        eval.strict = true;
        score(&out.tracked, &sim.truth, &eval)
    };
    Ok(GapComparison {
        gap1: report(1)?,
        gap2: report(2)?,
    })
}
