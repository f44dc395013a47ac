//! Shared vocabulary: categories, boxes, detections, frames and identifiers.
//!
//! Every value type validates on construction, including when it is
//! deserialized, so downstream modules never observe an invalid record.
//! Pixel coordinates follow image convention: x grows rightward, y grows
//! downward, origin top-left. Boxes may extend past the frame edges.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Invariant violations on value construction.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum InvalidValue {
    #[error("box width must be finite and > 0, got {0}")]
    Width(f64),
    #[error("box height must be finite and > 0, got {0}")]
    Height(f64),
    #[error("box origin must be finite, got ({0}, {1})")]
    Origin(f64, f64),
    #[error("confidence must lie in [0, 1], got {0}")]
    Confidence(f64),
    #[error("category label must not be empty")]
    EmptyCategory,
}

/// Object class reported by the detector.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Category {
    Car,
    Bus,
    Truck,
    Motorcycle,
    Bicycle,
    Person,
    Other(String),
}

impl Category {
    /// The closed set of named categories, in canonical order.
    pub const KNOWN: [Category; 6] = [
        Category::Car,
        Category::Bus,
        Category::Truck,
        Category::Motorcycle,
        Category::Bicycle,
        Category::Person,
    ];

    pub fn as_str(&self) -> &str {
        match self {
            Category::Car => "car",
            Category::Bus => "bus",
            Category::Truck => "truck",
            Category::Motorcycle => "motorcycle",
            Category::Bicycle => "bicycle",
            Category::Person => "person",
            Category::Other(tag) => tag,
        }
    }

    /// Label with its first letter upper-cased, as used in audio messages.
    pub fn display_name(&self) -> String {
        let s = self.as_str();
        let mut chars = s.chars();
        match chars.next() {
            Some(first) => first.to_uppercase().chain(chars).collect(),
            None => String::new(),
        }
    }
}

impl FromStr for Category {
    type Err = InvalidValue;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "" => return Err(InvalidValue::EmptyCategory),
            "car" => Category::Car,
            "bus" => Category::Bus,
            "truck" => Category::Truck,
            "motorcycle" => Category::Motorcycle,
            "bicycle" => Category::Bicycle,
            "person" => Category::Person,
            other => Category::Other(other.to_string()),
        })
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for Category {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Category {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Axis-aligned box in pixels; `w` and `h` are strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBox")]
pub struct BoundingBox {
    x: f64,
    y: f64,
    w: f64,
    h: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBox {
    x: f64,
    y: f64,
    w: f64,
    h: f64,
}

impl TryFrom<RawBox> for BoundingBox {
    type Error = InvalidValue;

    fn try_from(raw: RawBox) -> Result<Self, Self::Error> {
        BoundingBox::new(raw.x, raw.y, raw.w, raw.h)
    }
}

impl BoundingBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self, InvalidValue> {
        if !(x.is_finite() && y.is_finite()) {
            return Err(InvalidValue::Origin(x, y));
        }
        if !(w.is_finite() && w > 0.0) {
            return Err(InvalidValue::Width(w));
        }
        if !(h.is_finite() && h > 0.0) {
            return Err(InvalidValue::Height(h));
        }
        Ok(Self { x, y, w, h })
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// `(x + w/2, y + h/2)`.
    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    /// Midpoint of the bottom edge, the box's ground contact point.
    pub fn bottom_center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Result<Self, InvalidValue> {
        Self::new(self.x + dx, self.y + dy, self.w, self.h)
    }
}

/// Free-function form of [`BoundingBox::center`].
pub fn bbox_center(b: &BoundingBox) -> (f64, f64) {
    b.center()
}

/// One detector output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDetection")]
pub struct Detection {
    pub category: Category,
    pub bbox: BoundingBox,
    confidence: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDetection {
    category: Category,
    bbox: BoundingBox,
    confidence: f64,
}

impl TryFrom<RawDetection> for Detection {
    type Error = InvalidValue;

    fn try_from(raw: RawDetection) -> Result<Self, Self::Error> {
        Detection::new(raw.category, raw.bbox, raw.confidence)
    }
}

impl Detection {
    pub fn new(category: Category, bbox: BoundingBox, confidence: f64) -> Result<Self, InvalidValue> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(InvalidValue::Confidence(confidence));
        }
        Ok(Self {
            category,
            bbox,
            confidence,
        })
    }

    pub fn confidence(&self) -> f64 {
        self.confidence
    }
}

/// All detections reported for one timestamp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionFrame {
    pub frame_id: u64,
    pub t_ms: u64,
    pub detections: Vec<Detection>,
}

impl DetectionFrame {
    pub fn new(frame_id: u64, t_ms: u64, detections: Vec<Detection>) -> Self {
        Self {
            frame_id,
            t_ms,
            detections,
        }
    }

    pub fn empty(frame_id: u64, t_ms: u64) -> Self {
        Self::new(frame_id, t_ms, Vec::new())
    }
}

/// Unvalidated detection as it might arrive from an external producer.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDetectionRecord {
    pub category: String,
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
    pub confidence: f64,
}

/// First invalid detection in a frame.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("detection {index}: {violation}")]
pub struct FrameError {
    pub index: usize,
    pub violation: InvalidValue,
}

/// Validates every raw record and assembles a frame, or reports the first
/// offending index.
pub fn validate_frame(frame_id: u64, t_ms: u64, records: &[RawDetectionRecord]) -> Result<DetectionFrame, FrameError> {
    let detections = records
        .iter()
        .enumerate()
        .map(|(index, r)| {
            let build = || -> Result<Detection, InvalidValue> {
                let bbox = BoundingBox::new(r.x, r.y, r.w, r.h)?;
                Detection::new(r.category.parse()?, bbox, r.confidence)
            };
            build().map_err(|violation| FrameError { index, violation })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(DetectionFrame::new(frame_id, t_ms, detections))
}

/// Pipeline-assigned identity, unique within a stream and never reused.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectId(pub u64);

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}
