//! Synthetic detection streams with exact ground truth.
//!
//! Actors move on straight ground-plane lines (lateral `X`, depth `Z`, both
//! in cm, evaluated at absolute stream time) and are projected through the
//! pinhole model. Noise is applied per detection in the order center jitter,
//! height jitter, label flip, drop. Every draw comes from a ChaCha stream
//! keyed by `(seed, frame_id, actor_id)`, so adding or reordering actors
//! never changes another actor's noise.
//!
//! Within a frame, detections and truth records are both ordered by
//! ascending `actor_id`; truth records with `emitted == false` have no
//! detection.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::{project_ground_point, CameraIntrinsics, GroundPoint};
use crate::direction::DirectionLabel;
use crate::types::{Category, Detection, DetectionFrame};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("duration_s must be > 0, got {0}")]
    Duration(f64),
    #[error("frame_rate_hz must be > 0, got {0}")]
    FrameRate(f64),
    #[error("camera_height_cm must be > 0, got {0}")]
    CameraHeight(f64),
    #[error("actor {actor_id}: {reason}")]
    Actor { actor_id: u64, reason: String },
    #[error("duplicate actor_id {0}")]
    DuplicateActor(u64),
    #[error("noise: {0}")]
    Noise(String),
    #[error("cannot parse scenario: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Trajectory {
    Linear {
        x0_cm: f64,
        z0_cm: f64,
        vx_cm_s: f64,
        vz_cm_s: f64,
    },
    Stationary {
        x0_cm: f64,
        z0_cm: f64,
    },
}

impl Trajectory {
    pub fn position(&self, t_s: f64) -> GroundPoint {
        match *self {
            Trajectory::Linear {
                x0_cm,
                z0_cm,
                vx_cm_s,
                vz_cm_s,
            } => GroundPoint {
                lateral_cm: x0_cm + vx_cm_s * t_s,
                depth_cm: z0_cm + vz_cm_s * t_s,
            },
            Trajectory::Stationary { x0_cm, z0_cm } => GroundPoint {
                lateral_cm: x0_cm,
                depth_cm: z0_cm,
            },
        }
    }

    pub fn lateral_velocity(&self) -> f64 {
        match *self {
            Trajectory::Linear { vx_cm_s, .. } => vx_cm_s,
            Trajectory::Stationary { .. } => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActorSpec {
    pub actor_id: u64,
    pub category: Category,
    pub real_height_cm: f64,
    /// Box width over box height.
    pub aspect_ratio: f64,
    pub trajectory: Trajectory,
    /// `[enter_s, exit_s)`; the whole stream when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span: Option<[f64; 2]>,
}

impl ActorSpec {
    pub fn in_span(&self, t_s: f64) -> bool {
        match self.span {
            Some([enter, exit]) => t_s >= enter && t_s < exit,
            None => true,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    /// Std-dev of isotropic Gaussian offset of the box center, px.
    pub center_jitter_px: f64,
    /// Std-dev of the multiplicative Gaussian factor on box height.
    pub height_jitter_frac: f64,
    pub drop_prob: f64,
    pub label_flip_prob: f64,
}

impl NoiseSpec {
    pub fn is_zero(&self) -> bool {
        *self == NoiseSpec::default()
    }

    fn validate(&self) -> Result<(), ScenarioError> {
        let check_nonneg = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(ScenarioError::Noise(format!("{name} must be >= 0, got {v}")))
            }
        };
        let check_prob = |name: &str, v: f64| {
            if (0.0..1.0).contains(&v) {
                Ok(())
            } else {
                Err(ScenarioError::Noise(format!("{name} must lie in [0, 1), got {v}")))
            }
        };
        check_nonneg("center_jitter_px", self.center_jitter_px)?;
        check_nonneg("height_jitter_frac", self.height_jitter_frac)?;
        // drop_prob = 1 is the degenerate "detector blind" stream
        if !(0.0..=1.0).contains(&self.drop_prob) {
            return Err(ScenarioError::Noise(format!(
                "drop_prob must lie in [0, 1], got {}",
                self.drop_prob
            )));
        }
        check_prob("label_flip_prob", self.label_flip_prob)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    #[serde(default)]
    pub name: String,
    pub duration_s: f64,
    pub frame_rate_hz: f64,
    pub seed: u64,
    pub camera_height_cm: f64,
    pub camera: CameraIntrinsics,
    #[serde(default)]
    pub noise: NoiseSpec,
    pub actors: Vec<ActorSpec>,
}

/// Ground truth for one actor in one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub frame_id: u64,
    pub actor_id: u64,
    pub true_depth_cm: f64,
    pub true_lateral_cm: f64,
    pub true_direction: DirectionLabel,
    pub emitted: bool,
    pub true_category: Category,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Simulation {
    pub frames: Vec<DetectionFrame>,
    pub truth: Vec<TruthRecord>,
}

impl Simulation {
    pub fn emitted_detections(&self) -> usize {
        self.frames.iter().map(|f| f.detections.len()).sum()
    }
}

/// Confidence reported for every simulated detection.
pub const SIMULATED_CONFIDENCE: f64 = 0.9;

impl ScenarioSpec {
    pub fn from_toml_str(text: &str) -> Result<Self, ScenarioError> {
        let spec: ScenarioSpec = toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn frame_count(&self) -> u64 {
        (self.duration_s * self.frame_rate_hz).round() as u64
    }

    pub fn frame_time_s(&self, frame_id: u64) -> f64 {
        frame_id as f64 / self.frame_rate_hz
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(ScenarioError::Duration(self.duration_s));
        }
        if !(self.frame_rate_hz.is_finite() && self.frame_rate_hz > 0.0) {
            return Err(ScenarioError::FrameRate(self.frame_rate_hz));
        }
        if !(self.camera_height_cm.is_finite() && self.camera_height_cm > 0.0) {
            return Err(ScenarioError::CameraHeight(self.camera_height_cm));
        }
        self.noise.validate()?;

        let mut seen = std::collections::BTreeSet::new();
        for a in &self.actors {
            if !seen.insert(a.actor_id) {
                return Err(ScenarioError::DuplicateActor(a.actor_id));
            }
            let fail = |reason: String| ScenarioError::Actor {
                actor_id: a.actor_id,
                reason,
            };
            if !(a.real_height_cm.is_finite() && a.real_height_cm > 0.0) {
                return Err(fail(format!("real_height_cm must be > 0, got {}", a.real_height_cm)));
            }
            if !(a.aspect_ratio.is_finite() && a.aspect_ratio > 0.0) {
                return Err(fail(format!("aspect_ratio must be > 0, got {}", a.aspect_ratio)));
            }
            let (enter, exit) = match a.span {
                Some([enter, exit]) => {
                    if !(enter >= 0.0 && enter < exit) {
                        return Err(fail(format!("span [{enter}, {exit}) must satisfy 0 <= enter < exit")));
                    }
                    if enter >= self.duration_s {
                        return Err(fail(format!(
                            "span starts at {enter} s, after the {} s stream ends",
                            self.duration_s
                        )));
                    }
                    (enter, exit.min(self.duration_s))
                }
                None => (0.0, self.duration_s),
            };
            // depth is linear in t, so the span endpoints bound it
            for t in [enter, exit] {
                let z = a.trajectory.position(t).depth_cm;
                if !(z.is_finite() && z > 0.0) {
                    return Err(fail(format!("depth {z} cm at t = {t} s is not in front of the camera")));
                }
            }
        }
        Ok(())
    }
}

fn keyed_rng(seed: u64, frame_id: u64, actor_id: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&frame_id.to_le_bytes());
    key[16..24].copy_from_slice(&actor_id.to_le_bytes());
    key[24..].copy_from_slice(b"walkaid\0");
    ChaCha8Rng::from_seed(key)
}

/// Fixed-order draws for one (frame, actor) cell; all are taken regardless
/// of which noise knobs are active.
struct NoiseDraws {
    dx: f64,
    dy: f64,
    dh: f64,
    flip: f64,
    flip_to: usize,
    drop: f64,
}

impl NoiseDraws {
    fn draw(rng: &mut ChaCha8Rng) -> Self {
        Self {
            dx: rng.sample(StandardNormal),
            dy: rng.sample(StandardNormal),
            dh: rng.sample(StandardNormal),
            flip: rng.random(),
            flip_to: rng.random_range(0..Category::KNOWN.len()),
            drop: rng.random(),
        }
    }
}

fn flipped_label(true_category: &Category, pick: usize) -> Category {
    let others: Vec<&Category> = Category::KNOWN.iter().filter(|c| *c != true_category).collect();
    others[pick % others.len()].clone()
}

/// Smallest multiplicative height factor kept after jitter.
const MIN_HEIGHT_FACTOR: f64 = 0.05;

pub fn generate(spec: &ScenarioSpec) -> Result<Simulation, ScenarioError> {
    spec.validate()?;

    let mut actors: Vec<&ActorSpec> = spec.actors.iter().collect();
    actors.sort_by_key(|a| a.actor_id);
    let noise = spec.noise;

    let mut sim = Simulation::default();
    for frame_id in 0..spec.frame_count() {
        let t_s = spec.frame_time_s(frame_id);
        let t_ms = (t_s * 1000.0).round() as u64;
        let mut detections = Vec::new();
        for actor in actors.iter().filter(|a| a.in_span(t_s)) {
            let world = actor.trajectory.position(t_s);
            let mut bbox = project_ground_point(
                &spec.camera,
                world,
                actor.real_height_cm,
                actor.aspect_ratio,
                spec.camera_height_cm,
            )
            .map_err(|e| ScenarioError::Actor {
                actor_id: actor.actor_id,
                reason: e.to_string(),
            })?;

            let draws = NoiseDraws::draw(&mut keyed_rng(spec.seed, frame_id, actor.actor_id));
            let mut category = actor.category.clone();
            if noise.center_jitter_px > 0.0 {
                bbox = bbox
                    .translated(draws.dx * noise.center_jitter_px, draws.dy * noise.center_jitter_px)
                    .expect("finite jitter");
            }
            if noise.height_jitter_frac > 0.0 {
                let factor = (1.0 + draws.dh * noise.height_jitter_frac).max(MIN_HEIGHT_FACTOR);
                let (cx, cy) = bbox.center();
                let h = bbox.h() * factor;
                bbox = crate::types::BoundingBox::new(cx - bbox.w() / 2.0, cy - h / 2.0, bbox.w(), h)
                    .expect("positive height");
            }
            if draws.flip < noise.label_flip_prob {
                category = flipped_label(&actor.category, draws.flip_to);
            }
            let emitted = draws.drop >= noise.drop_prob;

            if emitted {
                detections.push(Detection::new(category, bbox, SIMULATED_CONFIDENCE).expect("valid confidence"));
            }
            sim.truth.push(TruthRecord {
                frame_id,
                actor_id: actor.actor_id,
                true_depth_cm: world.depth_cm,
                true_lateral_cm: world.lateral_cm,
                true_direction: DirectionLabel::from_velocity(actor.trajectory.lateral_velocity()),
                emitted,
                true_category: actor.category.clone(),
            });
        }
        sim.frames.push(DetectionFrame::new(frame_id, t_ms, detections));
    }
    Ok(sim)
}

/// Camera shared by the built-in scenarios; matches the shipped config.
pub fn suite_camera() -> CameraIntrinsics {
    CameraIntrinsics::new(1000.0, 1280.0, 720.0).expect("valid camera")
}

pub const SUITE_CAMERA_HEIGHT_CM: f64 = 140.0;

fn base_spec(name: &str, seed: u64, actors: Vec<ActorSpec>) -> ScenarioSpec {
    ScenarioSpec {
        name: name.to_string(),
        duration_s: 6.0,
        frame_rate_hz: 10.0,
        seed,
        camera_height_cm: SUITE_CAMERA_HEIGHT_CM,
        camera: suite_camera(),
        noise: NoiseSpec::default(),
        actors,
    }
}

fn actor(
    actor_id: u64,
    category: Category,
    real_height_cm: f64,
    aspect_ratio: f64,
    trajectory: Trajectory,
) -> ActorSpec {
    ActorSpec {
        actor_id,
        category,
        real_height_cm,
        aspect_ratio,
        trajectory,
        span: None,
    }
}

fn linear(x0_cm: f64, z0_cm: f64, vx_cm_s: f64, vz_cm_s: f64) -> Trajectory {
    Trajectory::Linear {
        x0_cm,
        z0_cm,
        vx_cm_s,
        vz_cm_s,
    }
}

fn stationary(x0_cm: f64, z0_cm: f64) -> Trajectory {
    Trajectory::Stationary { x0_cm, z0_cm }
}

/// Six canonical street-crossing situations, all noise-free with fixed
/// seeds. Heights match the shipped config table.
pub fn standard_suite() -> Vec<ScenarioSpec> {
    use Category::*;
    vec![
        // car crossing left to right inside alarm stage 1
        base_spec(
            "single-crosser",
            101,
            vec![actor(1, Car, 140.0, 1.6, linear(-300.0, 580.0, 100.0, 0.0))],
        ),
        // straight at the camera, through all three bands
        base_spec(
            "approach-head-on",
            102,
            vec![actor(1, Car, 140.0, 1.6, linear(0.0, 1900.0, 0.0, -300.0))],
        ),
        // two cars at different depths whose image paths cross
        base_spec(
            "two-crossers-opposite",
            103,
            vec![
                actor(1, Car, 140.0, 1.6, linear(-400.0, 600.0, 150.0, 0.0)),
                actor(2, Car, 140.0, 1.6, linear(500.0, 1500.0, -200.0, 0.0)),
            ],
        ),
        // six actors packed between 300 and 600 cm; the car is slow enough
        // to stay inside the dead zone
        base_spec(
            "crowded-midrange",
            104,
            vec![
                actor(1, Person, 170.0, 0.4, linear(-250.0, 320.0, 60.0, 0.0)),
                actor(2, Person, 170.0, 0.4, linear(150.0, 360.0, 60.0, 0.0)),
                actor(3, Bicycle, 100.0, 1.5, linear(200.0, 420.0, -80.0, 0.0)),
                actor(4, Motorcycle, 110.0, 1.5, linear(-300.0, 480.0, 150.0, 0.0)),
                actor(5, Car, 140.0, 1.6, linear(250.0, 540.0, -40.0, 0.0)),
                actor(6, Truck, 300.0, 1.2, stationary(-100.0, 590.0)),
            ],
        ),
        base_spec(
            "stationary-clutter",
            105,
            vec![
                actor(1, Car, 140.0, 1.6, stationary(-300.0, 800.0)),
                actor(2, Car, 140.0, 1.6, stationary(350.0, 1200.0)),
                actor(3, Truck, 300.0, 1.2, stationary(-600.0, 1800.0)),
                actor(4, Person, 170.0, 0.4, stationary(150.0, 450.0)),
                actor(5, Bicycle, 100.0, 1.5, stationary(-80.0, 650.0)),
            ],
        ),
        // actors entering and leaving at staggered times
        base_spec(
            "enter-exit-churn",
            106,
            vec![
                ActorSpec {
                    span: Some([0.0, 2.5]),
                    ..actor(1, Car, 140.0, 1.6, linear(-300.0, 900.0, 120.0, 0.0))
                },
                ActorSpec {
                    span: Some([1.5, 4.5]),
                    ..actor(2, Car, 140.0, 1.6, linear(600.0, 1300.0, -150.0, 0.0))
                },
                ActorSpec {
                    span: Some([2.0, 5.0]),
                    ..actor(3, Motorcycle, 110.0, 1.5, linear(400.0, 700.0, -130.0, 0.0))
                },
                ActorSpec {
                    span: Some([3.0, 6.0]),
                    ..actor(4, Person, 170.0, 0.4, linear(-100.0, 500.0, 70.0, 0.0))
                },
            ],
        ),
    ]
}

pub fn suite_scenario(name: &str) -> Option<ScenarioSpec> {
    standard_suite().into_iter().find(|s| s.name == name)
}

/// A single car whose per-frame image shift (12 px) stays inside the
/// default 16 px dead zone while its two-frame shift (24 px) clears it.
pub fn slow_crosser() -> ScenarioSpec {
    base_spec(
        "slow-crosser",
        107,
        vec![actor(1, Category::Car, 140.0, 1.6, linear(-200.0, 1000.0, 120.0, 0.0))],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::{estimate_distance, HeightTable};

    fn one_car(noise: NoiseSpec) -> ScenarioSpec {
        ScenarioSpec {
            noise,
            ..base_spec(
                "t",
                7,
                vec![actor(
                    1,
                    Category::Car,
                    140.0,
                    1.6,
                    linear(-200.0, 1400.0, 400.0 / 6.0, 0.0),
                )],
            )
        }
    }

    #[test]
    fn noise_free_crossing_is_exact() {
        let spec = one_car(NoiseSpec::default());
        let sim = generate(&spec).unwrap();
        assert_eq!(sim.frames.len(), 60);
        assert_eq!(sim.truth.len(), 60);
        let table = HeightTable::default().with(Category::Car, 140.0).unwrap();
        let mut crossed = false;
        for (frame, truth) in sim.frames.iter().zip(&sim.truth) {
            let det = &frame.detections[0];
            let d = estimate_distance(&spec.camera, &table, det).unwrap();
            assert!((d - 1400.0).abs() <= 1400.0 * 1e-12);
            assert_eq!(truth.true_direction, DirectionLabel::Right);
            let cx = det.bbox.center().0;
            let expect = 640.0 + 1000.0 * truth.true_lateral_cm / 1400.0;
            assert!((cx - expect).abs() < 1e-9);
            if truth.true_lateral_cm.abs() < 1e-9 {
                assert!((cx - 640.0).abs() < 1e-9);
                crossed = true;
            }
        }
        assert!(crossed, "lateral path passes X = 0 at t = 3 s");
    }

    #[test]
    fn drop_everything_keeps_truth() {
        let spec = one_car(NoiseSpec {
            drop_prob: 1.0,
            ..NoiseSpec::default()
        });
        let sim = generate(&spec).unwrap();
        assert!(sim.frames.iter().all(|f| f.detections.is_empty()));
        assert_eq!(sim.truth.len(), 60);
        assert!(sim.truth.iter().all(|t| !t.emitted));
    }

    #[test]
    fn same_seed_same_stream() {
        let noise = NoiseSpec {
            center_jitter_px: 3.0,
            height_jitter_frac: 0.05,
            drop_prob: 0.1,
            label_flip_prob: 0.1,
        };
        let a = generate(&one_car(noise)).unwrap();
        let b = generate(&one_car(noise)).unwrap();
        assert_eq!(a, b);
        let mut other = one_car(noise);
        other.seed += 1;
        let c = generate(&other).unwrap();
        assert_ne!(a.frames, c.frames);
        assert_eq!(
            a.truth.iter().map(|t| t.true_lateral_cm).collect::<Vec<_>>(),
            c.truth.iter().map(|t| t.true_lateral_cm).collect::<Vec<_>>()
        );
    }

    #[test]
    fn adding_an_actor_leaves_other_noise_alone() {
        let noise = NoiseSpec {
            center_jitter_px: 3.0,
            ..NoiseSpec::default()
        };
        let single = one_car(noise);
        let mut pair = single.clone();
        pair.actors
            .insert(0, actor(9, Category::Bus, 300.0, 1.2, stationary(500.0, 2000.0)));
        let a = generate(&single).unwrap();
        let b = generate(&pair).unwrap();
        for (fa, fb) in a.frames.iter().zip(&b.frames) {
            // actor 1 sorts before actor 9
            assert_eq!(fa.detections[0], fb.detections[0]);
        }
    }

    #[test]
    fn flipped_labels_differ_from_truth() {
        let spec = one_car(NoiseSpec {
            label_flip_prob: 0.5,
            ..NoiseSpec::default()
        });
        let sim = generate(&spec).unwrap();
        let flipped = sim
            .frames
            .iter()
            .filter(|f| f.detections[0].category != Category::Car)
            .count();
        assert!(flipped > 10 && flipped < 50, "{flipped}");
    }

    #[test]
    fn validation_names_the_actor() {
        let bad = base_spec(
            "bad",
            1,
            vec![actor(42, Category::Car, 140.0, 1.6, linear(0.0, 300.0, 0.0, -100.0))],
        );
        match generate(&bad) {
            Err(ScenarioError::Actor { actor_id: 42, .. }) => {}
            other => panic!("{other:?}"),
        }
        let dup = base_spec(
            "dup",
            1,
            vec![
                actor(1, Category::Car, 140.0, 1.6, stationary(0.0, 300.0)),
                actor(1, Category::Car, 140.0, 1.6, stationary(0.0, 400.0)),
            ],
        );
        assert_eq!(generate(&dup), Err(ScenarioError::DuplicateActor(1)));
        let mut bad_span = one_car(NoiseSpec::default());
        bad_span.actors[0].span = Some([3.0, 2.0]);
        assert!(generate(&bad_span).is_err());
        let mut bad_noise = one_car(NoiseSpec::default());
        bad_noise.noise.label_flip_prob = 1.0;
        assert!(matches!(generate(&bad_noise), Err(ScenarioError::Noise(_))));
    }

    #[test]
    fn spans_limit_truth() {
        let spec = suite_scenario("enter-exit-churn").unwrap();
        let sim = generate(&spec).unwrap();
        let frames_of = |id| sim.truth.iter().filter(|t| t.actor_id == id).count();
        assert_eq!(frames_of(1), 25);
        assert_eq!(frames_of(2), 30);
        assert_eq!(frames_of(4), 30);
    }

    #[test]
    fn suite_shape() {
        let suite = standard_suite();
        assert_eq!(suite.len(), 6);
        for s in &suite {
            s.validate().unwrap();
            assert!(s.noise.is_zero());
        }
        let crowded = generate(&suite_scenario("crowded-midrange").unwrap()).unwrap();
        assert!(crowded.truth.iter().all(|t| (300.0..=600.0).contains(&t.true_depth_cm)));
        assert!(crowded.frames.iter().all(|f| f.detections.len() >= 5));
        let head_on = generate(&suite_scenario("approach-head-on").unwrap()).unwrap();
        assert!(head_on
            .truth
            .iter()
            .all(|t| t.true_direction == DirectionLabel::Forward));
    }

    #[test]
    fn scenario_toml_round_trip() {
        for spec in standard_suite() {
            let text = spec.to_toml_string();
            assert_eq!(ScenarioSpec::from_toml_str(&text).unwrap(), spec);
        }
    }
}
