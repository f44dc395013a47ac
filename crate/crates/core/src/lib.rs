//! Hazard pipeline for a phone-held walking aid.
//!
//! Takes object detections frame by frame and produces, per object, a
//! monocular distance estimate, a lateral direction label, a persistent id,
//! and staged vibration/audio alarms. A scenario simulator with exact
//! ground truth and an evaluator make the whole chain testable offline.
//!
//! ```
//! use walkaid_core::{generate, suite_scenario, Pipeline, PipelineConfig};
//!
//! let sim = generate(&suite_scenario("single-crosser").unwrap()).unwrap();
//! let out = Pipeline::new(PipelineConfig::default()).run(&sim.frames).unwrap();
//! assert!(out.alarms.iter().any(|e| e.message == "Car moving right"));
//! ```

pub mod alarm;
pub mod camera;
pub mod cli;
pub mod config;
pub mod direction;
pub mod eval;
pub mod jsonl;
pub mod matcher;
pub mod pipeline;
pub mod simulator;
pub mod types;

pub use alarm::{alarm_message, emit_alarms, stage_for_distance, AlarmEvent, AlarmLedger, AlarmPolicy, AlarmStage};
pub use camera::{
    estimate_distance, project_ground_point, project_height, CameraError, CameraIntrinsics, GroundPoint, HeightTable,
};
pub use config::{ConfigError, PipelineConfig};
pub use direction::{classify_direction, direction_for_track, DirectionConfig, DirectionLabel};
pub use eval::{compare_gap_strategies, score, BandPartition, EvalConfig, EvalError, EvalReport, Fraction};
pub use matcher::{euclidean_cost, iou_cost, match_frames, MatchConfig, MatchResult, MatchStrategy};
pub use pipeline::{id_propagation, FrameOutput, Pipeline, StreamError, TrackedObject};
pub use simulator::{
    generate, slow_crosser, standard_suite, suite_scenario, NoiseSpec, ScenarioError, ScenarioSpec, Simulation,
    TruthRecord,
};
pub use types::{
    bbox_center, validate_frame, BoundingBox, Category, Detection, DetectionFrame, InvalidValue, ObjectId,
};
