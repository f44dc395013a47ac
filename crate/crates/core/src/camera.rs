//! Pinhole geometry.
//!
//! Image height `h` of an object of real height `H` at depth `D` satisfies
//! `h / f = H / D`, with the focal length `f` in pixels. Distances are in
//! centimeters throughout.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{BoundingBox, Category, Detection, InvalidValue};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CameraError {
    #[error("no real-world height configured for category `{0}`")]
    NoHeight(Category),
    #[error("depth must be > 0 cm, got {0}")]
    NonPositiveDepth(f64),
    #[error("real height must be > 0 cm, got {0}")]
    NonPositiveHeight(f64),
    #[error("invalid camera intrinsics: {0}")]
    Intrinsics(String),
    #[error(transparent)]
    Box(#[from] InvalidValue),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawIntrinsics")]
pub struct CameraIntrinsics {
    focal_px: f64,
    image_w: f64,
    image_h: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIntrinsics {
    focal_px: f64,
    image_w: f64,
    image_h: f64,
}

impl TryFrom<RawIntrinsics> for CameraIntrinsics {
    type Error = CameraError;

    fn try_from(r: RawIntrinsics) -> Result<Self, Self::Error> {
        CameraIntrinsics::new(r.focal_px, r.image_w, r.image_h)
    }
}

fn positive(name: &str, v: f64) -> Result<f64, CameraError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(CameraError::Intrinsics(format!("{name} must be > 0, got {v}")))
    }
}

impl CameraIntrinsics {
    pub fn new(focal_px: f64, image_w: f64, image_h: f64) -> Result<Self, CameraError> {
        Ok(Self {
            focal_px: positive("focal_px", focal_px)?,
            image_w: positive("image_w", image_w)?,
            image_h: positive("image_h", image_h)?,
        })
    }

    /// Builds intrinsics from a physical focal length and sensor height.
    pub fn from_physical(
        focal_mm: f64,
        sensor_height_mm: f64,
        image_w: f64,
        image_h: f64,
    ) -> Result<Self, CameraError> {
        let focal_px = focal_px_from_mm(
            positive("focal_mm", focal_mm)?,
            positive("sensor_height_mm", sensor_height_mm)?,
            image_h,
        );
        Self::new(focal_px, image_w, image_h)
    }

    pub fn focal_px(&self) -> f64 {
        self.focal_px
    }

    pub fn image_w(&self) -> f64 {
        self.image_w
    }

    pub fn image_h(&self) -> f64 {
        self.image_h
    }
}

/// `focal_mm * image_h / sensor_height_mm`.
pub fn focal_px_from_mm(focal_mm: f64, sensor_height_mm: f64, image_h: f64) -> f64 {
    focal_mm * image_h / sensor_height_mm
}

/// Real-world object heights per category, in centimeters.
///
/// A missing category is an explicit miss; there is no fallback height.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<Category, f64>", into = "BTreeMap<Category, f64>")]
pub struct HeightTable {
    entries: BTreeMap<Category, f64>,
}

impl TryFrom<BTreeMap<Category, f64>> for HeightTable {
    type Error = CameraError;

    fn try_from(entries: BTreeMap<Category, f64>) -> Result<Self, Self::Error> {
        let mut table = HeightTable::default();
        for (category, cm) in entries {
            table.insert(category, cm)?;
        }
        Ok(table)
    }
}

impl From<HeightTable> for BTreeMap<Category, f64> {
    fn from(t: HeightTable) -> Self {
        t.entries
    }
}

impl HeightTable {
    pub fn insert(&mut self, category: Category, height_cm: f64) -> Result<(), CameraError> {
        if !(height_cm.is_finite() && height_cm > 0.0) {
            return Err(CameraError::NonPositiveHeight(height_cm));
        }
        self.entries.insert(category, height_cm);
        Ok(())
    }

    pub fn with(mut self, category: Category, height_cm: f64) -> Result<Self, CameraError> {
        self.insert(category, height_cm)?;
        Ok(self)
    }

    pub fn get(&self, category: &Category) -> Option<f64> {
        self.entries.get(category).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Category, f64)> {
        self.entries.iter().map(|(c, h)| (c, *h))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// `D = f * H / h` for the detection's category, or `NoHeight` when the
/// table has no entry for it.
pub fn estimate_distance(intr: &CameraIntrinsics, table: &HeightTable, det: &Detection) -> Result<f64, CameraError> {
    let real = table
        .get(&det.category)
        .ok_or_else(|| CameraError::NoHeight(det.category.clone()))?;
    Ok(distance_from_height(intr, real, det.bbox.h()))
}

/// Raw form of the distance equation, for callers that already hold `H`.
pub fn distance_from_height(intr: &CameraIntrinsics, real_height_cm: f64, pixel_h: f64) -> f64 {
    intr.focal_px * real_height_cm / pixel_h
}

/// Image height `f * H / Z` of an object `H` cm tall at depth `Z`.
pub fn project_height(intr: &CameraIntrinsics, real_height_cm: f64, depth_cm: f64) -> Result<f64, CameraError> {
    if depth_cm.is_nan() || depth_cm <= 0.0 {
        return Err(CameraError::NonPositiveDepth(depth_cm));
    }
    if real_height_cm.is_nan() || real_height_cm <= 0.0 {
        return Err(CameraError::NonPositiveHeight(real_height_cm));
    }
    Ok(intr.focal_px * real_height_cm / depth_cm)
}

/// Where a ground-plane point lands in the image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundPoint {
    pub lateral_cm: f64,
    pub depth_cm: f64,
}

/// Image column of a world point at lateral offset `X`, depth `Z`.
pub fn project_lateral(intr: &CameraIntrinsics, lateral_cm: f64, depth_cm: f64) -> f64 {
    intr.image_w / 2.0 + intr.focal_px * lateral_cm / depth_cm
}

/// Image row of the ground line at depth `Z` for a level camera held
/// `camera_height_cm` above the ground.
pub fn project_ground_row(intr: &CameraIntrinsics, camera_height_cm: f64, depth_cm: f64) -> f64 {
    intr.image_h / 2.0 + intr.focal_px * camera_height_cm / depth_cm
}

/// Projects an upright object standing at `world` into a bounding box.
///
/// The box is `f*H/Z` tall, `aspect_ratio` times as wide as tall, centered on
/// column `image_w/2 + f*X/Z`, with its bottom edge on the ground line.
pub fn project_ground_point(
    intr: &CameraIntrinsics,
    world: GroundPoint,
    real_height_cm: f64,
    aspect_ratio: f64,
    camera_height_cm: f64,
) -> Result<BoundingBox, CameraError> {
    let h = project_height(intr, real_height_cm, world.depth_cm)?;
    let w = aspect_ratio * h;
    let cx = project_lateral(intr, world.lateral_cm, world.depth_cm);
    let bottom = project_ground_row(intr, camera_height_cm, world.depth_cm);
    Ok(BoundingBox::new(cx - w / 2.0, bottom - h, w, h)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn intr() -> CameraIntrinsics {
        CameraIntrinsics::new(1000.0, 1280.0, 720.0).unwrap()
    }

    fn car_with_height(h: f64) -> Detection {
        Detection::new(Category::Car, BoundingBox::new(0.0, 0.0, 10.0, h).unwrap(), 0.9).unwrap()
    }

    fn table() -> HeightTable {
        HeightTable::default().with(Category::Car, 140.0).unwrap()
    }

    #[test]
    fn distance_matches_equation() {
        assert_eq!(
            estimate_distance(&intr(), &table(), &car_with_height(100.0)).unwrap(),
            1400.0
        );
        assert_eq!(
            estimate_distance(&intr(), &table(), &car_with_height(1000.0)).unwrap(),
            140.0
        );
    }

    #[test]
    fn unknown_category_is_explicit_miss() {
        let mut det = car_with_height(100.0);
        det.category = Category::Other("dog".into());
        assert_eq!(
            estimate_distance(&intr(), &table(), &det),
            Err(CameraError::NoHeight(Category::Other("dog".into())))
        );
    }

    #[test]
    fn project_height_inverts_distance() {
        let i = intr();
        assert_eq!(project_height(&i, 140.0, 1400.0).unwrap(), 100.0);
        assert_eq!(project_height(&i, 140.0, 140.0).unwrap(), 1000.0);
        assert!(matches!(
            project_height(&i, 140.0, 0.0),
            Err(CameraError::NonPositiveDepth(_))
        ));
        assert!(matches!(
            project_height(&i, 140.0, -3.0),
            Err(CameraError::NonPositiveDepth(_))
        ));
        for z in [120.0, 300.0, 600.0, 2000.0] {
            let h = project_height(&i, 140.0, z).unwrap();
            let d = estimate_distance(&i, &table(), &car_with_height(h)).unwrap();
            assert!(((d - z) / z).abs() <= 1e-12, "{z} -> {d}");
        }
    }

    #[test]
    fn ground_point_offsets() {
        let i = intr();
        let on_axis = project_ground_point(
            &i,
            GroundPoint {
                lateral_cm: 0.0,
                depth_cm: 900.0,
            },
            140.0,
            1.5,
            140.0,
        )
        .unwrap();
        assert!((on_axis.center().0 - 640.0).abs() < 1e-9);

        let b = project_ground_point(
            &i,
            GroundPoint {
                lateral_cm: 140.0,
                depth_cm: 1400.0,
            },
            140.0,
            1.5,
            140.0,
        )
        .unwrap();
        assert!((b.center().0 - 740.0).abs() < 1e-9);
        assert!((b.h() - 100.0).abs() < 1e-12);
        // bottom edge on the ground line
        assert!((b.y() + b.h() - (360.0 + 100.0)).abs() < 1e-9);

        assert!(project_ground_point(
            &i,
            GroundPoint {
                lateral_cm: 0.0,
                depth_cm: 0.0
            },
            140.0,
            1.5,
            140.0
        )
        .is_err());
    }

    #[test]
    fn physical_focal_conversion() {
        // 4 mm lens on a 3 mm tall sensor imaged at 720 rows
        let i = CameraIntrinsics::from_physical(4.0, 3.0, 1280.0, 720.0).unwrap();
        assert!((i.focal_px() - 960.0).abs() < 1e-12);
        assert!(CameraIntrinsics::new(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn height_table_rejects_non_positive() {
        assert!(HeightTable::default().with(Category::Bus, 0.0).is_err());
        let parsed: Result<HeightTable, _> = serde_json::from_str(r#"{"car": -1.0}"#);
        assert!(parsed.is_err());
        let parsed: HeightTable = serde_json::from_str(r#"{"car": 140.0, "dog": 60.0}"#).unwrap();
        assert_eq!(parsed.get(&Category::Other("dog".into())), Some(60.0));
    }
}
