//! Landmark frame to feature vector transformation.
//!
//! A hand tracker emits 21 planar landmarks per hand. The classifier consumes
//! a 42-element vector built in three steps:
//!
//! 1. express landmarks relative to the hand centre, then shift them so every
//!    coordinate is non-negative;
//! 2. divide by the larger side of the landmark bounding box;
//! 3. flatten into `[x0, y0, x1, y1, ..., x20, y20]`.
//!
//! The centring step is cancelled by the min-shift that follows it, so the
//! output equals `(p - min) / max(width, height)` computed on raw coordinates.
//! Both routes are kept and tested against each other.

use thiserror::Error;

/// Landmarks per hand.
pub const NUM_LANDMARKS: usize = 21;
/// Length of a [`FeatureVector`].
pub const NUM_FEATURES: usize = 2 * NUM_LANDMARKS;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FeatureError {
    #[error("empty landmark sequence")]
    EmptyInput,
    #[error("degenerate hand: all landmarks coincide")]
    DegenerateHand,
    #[error("expected {NUM_LANDMARKS} landmarks, got {0}")]
    BadLandmarkCount(usize),
    #[error("non-finite landmark coordinate")]
    NonFinite,
}

/// A single tracker landmark in the image plane.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<(f64, f64)> for Point2 {
    fn from((x, y): (f64, f64)) -> Self {
        Self { x, y }
    }
}

/// Exactly 21 finite landmarks in tracker order.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkFrame {
    points: [Point2; NUM_LANDMARKS],
}

impl LandmarkFrame {
    pub fn new(points: &[Point2]) -> Result<Self, FeatureError> {
        let points: [Point2; NUM_LANDMARKS] = points
            .try_into()
            .map_err(|_| FeatureError::BadLandmarkCount(points.len()))?;
        if !points.iter().all(Point2::is_finite) {
            return Err(FeatureError::NonFinite);
        }
        Ok(Self { points })
    }

    /// Builds a frame from interleaved `[x0, y0, x1, y1, ...]` coordinates.
    pub fn from_interleaved(coords: &[f64]) -> Result<Self, FeatureError> {
        if !coords.len().is_multiple_of(2) {
            return Err(FeatureError::BadLandmarkCount(coords.len() / 2));
        }
        let points: Vec<Point2> = coords
            .chunks_exact(2)
            .map(|c| Point2::new(c[0], c[1]))
            .collect();
        Self::new(&points)
    }

    pub fn points(&self) -> &[Point2] {
        &self.points
    }

    /// Applies `f` to every landmark. Returns an error if the result is not finite.
    pub fn map(&self, f: impl FnMut(Point2) -> Point2) -> Result<Self, FeatureError> {
        let mapped: Vec<Point2> = self.points.iter().copied().map(f).collect();
        Self::new(&mapped)
    }
}

/// The 42 normalized features fed to the classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector([f64; NUM_FEATURES]);

impl FeatureVector {
    /// Wraps raw values without checking the normalization invariants.
    ///
    /// Useful for feeding arbitrary inputs to the network in tests and tooling.
    pub fn from_raw(values: [f64; NUM_FEATURES]) -> Self {
        Self(values)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl AsRef<[f64]> for FeatureVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Subtracts the arithmetic centroid from every point.
pub fn center_relative(points: &[Point2]) -> Result<Vec<Point2>, FeatureError> {
    if points.is_empty() {
        return Err(FeatureError::EmptyInput);
    }
    let n = points.len() as f64;
    let (sx, sy) = points
        .iter()
        .fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
    let (cx, cy) = (sx / n, sy / n);
    Ok(points
        .iter()
        .map(|p| Point2::new(p.x - cx, p.y - cy))
        .collect())
}

/// Shifts points by `(min x, min y)` so every coordinate is non-negative and
/// each axis touches zero.
pub fn translate_nonnegative(points: &[Point2]) -> Result<Vec<Point2>, FeatureError> {
    let bounds = Bounds::of(points).ok_or(FeatureError::EmptyInput)?;
    Ok(points
        .iter()
        .map(|p| Point2::new(p.x - bounds.min_x, p.y - bounds.min_y))
        .collect())
}

/// Divides every coordinate by `max(bbox width, bbox height)`.
pub fn normalize_scale(points: &[Point2]) -> Result<Vec<Point2>, FeatureError> {
    let bounds = Bounds::of(points).ok_or(FeatureError::EmptyInput)?;
    let scale = bounds.extent();
    if scale <= 0.0 {
        return Err(FeatureError::DegenerateHand);
    }
    Ok(points
        .iter()
        .map(|p| Point2::new(p.x / scale, p.y / scale))
        .collect())
}

/// Interleaves coordinates as `[x0, y0, x1, y1, ...]`.
pub fn flatten(points: &[Point2]) -> Vec<f64> {
    points.iter().flat_map(|p| [p.x, p.y]).collect()
}

/// Full pipeline: centre, shift, scale, flatten.
pub fn extract_features(frame: &LandmarkFrame) -> Result<FeatureVector, FeatureError> {
    let centered = center_relative(frame.points())?;
    let shifted = translate_nonnegative(&centered)?;
    let scaled = normalize_scale(&shifted)?;
    let flat = flatten(&scaled);
    let mut values = [0.0; NUM_FEATURES];
    values.copy_from_slice(&flat);
    Ok(FeatureVector(values))
}

#[derive(Debug, Clone, Copy)]
struct Bounds {
    min_x: f64,
    min_y: f64,
    max_x: f64,
    max_y: f64,
}

impl Bounds {
    fn of(points: &[Point2]) -> Option<Self> {
        let first = points.first()?;
        Some(points.iter().skip(1).fold(
            Bounds {
                min_x: first.x,
                min_y: first.y,
                max_x: first.x,
                max_y: first.y,
            },
            |b, p| Bounds {
                min_x: b.min_x.min(p.x),
                min_y: b.min_y.min(p.y),
                max_x: b.max_x.max(p.x),
                max_y: b.max_y.max(p.y),
            },
        ))
    }

    fn extent(&self) -> f64 {
        (self.max_x - self.min_x).max(self.max_y - self.min_y)
    }
}
