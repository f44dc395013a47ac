//! Python bindings for `walkaid_core`.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use walkaid_core as core;
use walkaid_core::{jsonl, simulator};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn load_config(config_toml: Option<&str>) -> PyResult<core::PipelineConfig> {
    match config_toml {
        Some(text) => core::PipelineConfig::from_toml_str(text).map_err(value_err),
        None => Ok(core::PipelineConfig::default()),
    }
}

/// One detector output: category label, box `(x, y, w, h)` in pixels, and
/// confidence.
#[pyclass(frozen, from_py_object)]
#[derive(Clone)]
struct Detection {
    inner: core::Detection,
}

#[pymethods]
impl Detection {
    #[new]
    #[pyo3(signature = (category, x, y, w, h, confidence=1.0))]
    fn new(category: &str, x: f64, y: f64, w: f64, h: f64, confidence: f64) -> PyResult<Self> {
        let category: core::Category = category.parse().map_err(value_err)?;
        let bbox = core::BoundingBox::new(x, y, w, h).map_err(value_err)?;
        let inner = core::Detection::new(category, bbox, confidence).map_err(value_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn category(&self) -> String {
        self.inner.category.as_str().to_string()
    }

    #[getter]
    fn bbox(&self) -> (f64, f64, f64, f64) {
        let b = &self.inner.bbox;
        (b.x(), b.y(), b.w(), b.h())
    }

    #[getter]
    fn confidence(&self) -> f64 {
        self.inner.confidence()
    }

    fn __repr__(&self) -> String {
        let (x, y, w, h) = self.bbox();
        format!(
            "Detection({:?}, {x}, {y}, {w}, {h}, confidence={})",
            self.category(),
            self.confidence()
        )
    }
}

#[pyclass(frozen, get_all, skip_from_py_object)]
struct TrackedObject {
    object_id: u64,
    frame_id: u64,
    category: String,
    bbox: (f64, f64, f64, f64),
    distance_cm: Option<f64>,
    direction: Option<String>,
    matched_from: Option<u64>,
}

impl From<&core::TrackedObject> for TrackedObject {
    fn from(t: &core::TrackedObject) -> Self {
        Self {
            object_id: t.object_id.0,
            frame_id: t.frame_id,
            category: t.category.as_str().to_string(),
            bbox: (t.bbox.x(), t.bbox.y(), t.bbox.w(), t.bbox.h()),
            distance_cm: t.distance_cm,
            direction: t.direction.map(|d| d.as_str().to_string()),
            matched_from: t.matched_from.map(|id| id.0),
        }
    }
}

#[pymethods]
impl TrackedObject {
    fn __repr__(&self) -> String {
        format!(
            "TrackedObject(id={}, frame={}, {}, distance_cm={:?}, direction={:?})",
            self.object_id, self.frame_id, self.category, self.distance_cm, self.direction
        )
    }
}

#[pyclass(frozen, get_all, skip_from_py_object)]
struct AlarmEvent {
    t_ms: u64,
    object_id: u64,
    category: String,
    stage: u8,
    vibration_s: f64,
    distance_cm: f64,
    direction: Option<String>,
    message: String,
}

impl From<&core::AlarmEvent> for AlarmEvent {
    fn from(e: &core::AlarmEvent) -> Self {
        Self {
            t_ms: e.t_ms,
            object_id: e.object_id.0,
            category: e.category.as_str().to_string(),
            stage: e.stage,
            vibration_s: e.vibration_s,
            distance_cm: e.distance_cm,
            direction: e.direction.map(|d| d.as_str().to_string()),
            message: e.message.clone(),
        }
    }
}

#[pymethods]
impl AlarmEvent {
    fn __repr__(&self) -> String {
        format!(
            "AlarmEvent(t_ms={}, stage={}, {:?}, distance_cm={})",
            self.t_ms, self.stage, self.message, self.distance_cm
        )
    }
}

/// Stateful frame-by-frame pipeline. `config_toml` uses the same format as
/// the CLI's `--config` file.
#[pyclass]
struct Pipeline {
    inner: core::Pipeline,
}

#[pymethods]
impl Pipeline {
    #[new]
    #[pyo3(signature = (config_toml=None))]
    fn new(config_toml: Option<&str>) -> PyResult<Self> {
        Ok(Self {
            inner: core::Pipeline::new(load_config(config_toml)?),
        })
    }

    /// Returns `(tracked, alarms)` for one frame.
    fn process(
        &mut self,
        frame_id: u64,
        t_ms: u64,
        detections: Vec<Detection>,
    ) -> PyResult<(Vec<TrackedObject>, Vec<AlarmEvent>)> {
        let frame = core::DetectionFrame::new(frame_id, t_ms, detections.into_iter().map(|d| d.inner).collect());
        let out = self
            .inner
            .process_frame(&frame)
            .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        Ok((
            out.tracked.iter().map(TrackedObject::from).collect(),
            out.alarms.iter().map(AlarmEvent::from).collect(),
        ))
    }

    /// Runs a JSON-Lines detection stream; returns `(tracked, events)` as
    /// JSON-Lines text.
    fn replay_jsonl(&mut self, detections: &str) -> PyResult<(String, String)> {
        let frames: Vec<core::DetectionFrame> = jsonl::from_str(detections).map_err(value_err)?;
        let out = self
            .inner
            .run(&frames)
            .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        Ok((jsonl::to_string(&out.tracked), jsonl::to_string(&out.alarms)))
    }
}

/// `D = f * H / h` in centimeters.
#[pyfunction]
fn estimate_distance(focal_px: f64, real_height_cm: f64, pixel_h: f64) -> PyResult<f64> {
    if pixel_h.is_nan() || pixel_h <= 0.0 {
        return Err(PyValueError::new_err(format!(
            "pixel height must be > 0, got {pixel_h}"
        )));
    }
    let intr = core::CameraIntrinsics::new(focal_px, 1.0, 1.0).map_err(value_err)?;
    Ok(core::camera::distance_from_height(&intr, real_height_cm, pixel_h))
}

#[pyfunction]
fn project_height(focal_px: f64, real_height_cm: f64, depth_cm: f64) -> PyResult<f64> {
    let intr = core::CameraIntrinsics::new(focal_px, 1.0, 1.0).map_err(value_err)?;
    core::project_height(&intr, real_height_cm, depth_cm).map_err(value_err)
}

/// `(stage, vibration_s)` or `None`.
#[pyfunction]
#[pyo3(signature = (distance_cm, config_toml=None))]
fn stage_for_distance(distance_cm: f64, config_toml: Option<&str>) -> PyResult<Option<(u8, f64)>> {
    let cfg = load_config(config_toml)?;
    Ok(core::stage_for_distance(distance_cm, &cfg.alarm).map(|s| (s.stage, s.vibration_s)))
}

#[pyfunction]
fn classify_direction(x_current: f64, x_reference: f64, dead_zone_px: f64) -> PyResult<String> {
    let cfg = core::DirectionConfig::new(2, dead_zone_px).map_err(value_err)?;
    Ok(core::classify_direction(x_current, x_reference, &cfg)
        .as_str()
        .to_string())
}

#[pyfunction]
fn builtin_scenarios() -> Vec<String> {
    simulator::standard_suite().into_iter().map(|s| s.name).collect()
}

/// Returns `(detections, truth)` as JSON-Lines text.
#[pyfunction]
#[pyo3(signature = (name, seed=None))]
fn simulate_builtin(name: &str, seed: Option<u64>) -> PyResult<(String, String)> {
    let mut spec = simulator::suite_scenario(name)
        .ok_or_else(|| PyValueError::new_err(format!("unknown built-in scenario `{name}`")))?;
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    simulate_spec(&spec)
}

/// Same as `simulate_builtin` for a TOML scenario document.
#[pyfunction]
fn simulate_toml(scenario_toml: &str) -> PyResult<(String, String)> {
    let spec = simulator::ScenarioSpec::from_toml_str(scenario_toml).map_err(value_err)?;
    simulate_spec(&spec)
}

fn simulate_spec(spec: &simulator::ScenarioSpec) -> PyResult<(String, String)> {
    let sim = simulator::generate(spec).map_err(value_err)?;
    Ok((jsonl::to_string(&sim.frames), jsonl::to_string(&sim.truth)))
}

/// Scores JSON-Lines tracked output against truth; returns the report as
/// JSON text.
#[pyfunction]
#[pyo3(signature = (tracked, truth, bands=None, strict=false, config_toml=None))]
fn score_jsonl(
    tracked: &str,
    truth: &str,
    bands: Option<Vec<f64>>,
    strict: bool,
    config_toml: Option<&str>,
) -> PyResult<String> {
    let cfg = load_config(config_toml)?;
    let bands = match bands {
        Some(b) => core::BandPartition::new(b).map_err(value_err)?,
        None => core::BandPartition::default(),
    };
    let tracked: Vec<core::TrackedObject> = jsonl::from_str(tracked).map_err(value_err)?;
    let truth: Vec<core::TruthRecord> = jsonl::from_str(truth).map_err(value_err)?;
    let mut eval = core::EvalConfig::from_pipeline(&cfg, bands);
    eval.strict = strict;
    let report = core::score(&tracked, &truth, &eval).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    serde_json::to_string(&report).map_err(value_err)
}

#[pymodule]
fn walkaid(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Detection>()?;
    m.add_class::<TrackedObject>()?;
    m.add_class::<AlarmEvent>()?;
    m.add_class::<Pipeline>()?;
    m.add_function(wrap_pyfunction!(estimate_distance, m)?)?;
    m.add_function(wrap_pyfunction!(project_height, m)?)?;
    m.add_function(wrap_pyfunction!(stage_for_distance, m)?)?;
    m.add_function(wrap_pyfunction!(classify_direction, m)?)?;
    m.add_function(wrap_pyfunction!(builtin_scenarios, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_builtin, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_toml, m)?)?;
    m.add_function(wrap_pyfunction!(score_jsonl, m)?)?;
    Ok(())
}
