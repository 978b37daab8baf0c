//! Domain types and bounding-box geometry.
//!
//! Boxes use the MOTChallenge convention `(left, top, width, height)` in
//! pixels and are never clamped to the image, since ground-truth files
//! contain boxes that leave the frame.

use std::sync::Arc;

use nalgebra::{SVector, Vector4};

use crate::error::{Error, Result};

/// Positional measurement `(u, v, gamma, h)`: center x, center y,
/// aspect ratio `width / height`, height.
pub type Measurement = Vector4<f64>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    left: f64,
    top: f64,
    width: f64,
    height: f64,
}

impl BoundingBox {
    pub fn new(left: f64, top: f64, width: f64, height: f64) -> Result<Self> {
        if !(left.is_finite() && top.is_finite()) {
            return Err(Error::NumericDegeneracy(format!(
                "box origin ({left}, {top}) is not finite"
            )));
        }
        if !(width.is_finite() && width > 0.0 && height.is_finite() && height > 0.0) {
            return Err(Error::NumericDegeneracy(format!(
                "box extent {width}x{height} must be positive"
            )));
        }
        Ok(Self {
            left,
            top,
            width,
            height,
        })
    }

    pub fn left(&self) -> f64 {
        self.left
    }

    pub fn top(&self) -> f64 {
        self.top
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn right(&self) -> f64 {
        self.left + self.width
    }

    pub fn bottom(&self) -> f64 {
        self.top + self.height
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    pub fn center(&self) -> (f64, f64) {
        (self.left + self.width / 2.0, self.top + self.height / 2.0)
    }

    pub fn to_measurement(&self) -> Measurement {
        let (u, v) = self.center();
        Measurement::new(u, v, self.width / self.height, self.height)
    }
}

/// Intersection over union of two boxes, in `[0, 1]`.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let iw = (a.right().min(b.right()) - a.left.max(b.left)).max(0.0);
    let ih = (a.bottom().min(b.bottom()) - a.top.max(b.top)).max(0.0);
    let intersection = iw * ih;
    if intersection <= 0.0 {
        return 0.0;
    }
    // extents from the rounded edges, so a box overlaps itself exactly
    let extent = |b: &BoundingBox| (b.right() - b.left) * (b.bottom() - b.top);
    let union = extent(a) + extent(b) - intersection;
    (intersection / union).clamp(0.0, 1.0)
}

/// Unit-norm appearance vector. Cheap to clone; the storage is shared.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding(Arc<[f32]>);

impl Embedding {
    /// Scales `values` to unit Euclidean norm.
    pub fn normalize(values: &[f32]) -> Result<Self> {
        let norm = values
            .iter()
            .map(|&x| f64::from(x) * f64::from(x))
            .sum::<f64>()
            .sqrt();
        if values.is_empty() || !norm.is_finite() || norm == 0.0 {
            return Err(Error::NumericDegeneracy(format!(
                "cannot normalize embedding with norm {norm}"
            )));
        }
        Ok(Self(
            values
                .iter()
                .map(|&x| (f64::from(x) / norm) as f32)
                .collect(),
        ))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }

    pub fn dot(&self, other: &Embedding) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(&a, &b)| f64::from(a) * f64::from(b))
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    /// 1-based frame index.
    pub frame: u32,
    pub bbox: BoundingBox,
    pub confidence: f64,
    pub embedding: Option<Embedding>,
    /// 0-based row position of this detection within its frame in the source file.
    pub source_index: usize,
}

impl Detection {
    pub fn new(frame: u32, bbox: BoundingBox, confidence: f64) -> Self {
        Self {
            frame,
            bbox,
            confidence,
            embedding: None,
            source_index: 0,
        }
    }

    pub fn with_embedding(mut self, embedding: Embedding) -> Self {
        self.embedding = Some(embedding);
        self
    }

    pub fn with_source_index(mut self, index: usize) -> Self {
        self.source_index = index;
        self
    }
}

/// Eight-dimensional track state: `(u, v, gamma, h)` followed by their
/// per-frame velocities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateVector(pub SVector<f64, 8>);

impl StateVector {
    pub fn from_measurement(m: &Measurement) -> Self {
        let mut s = SVector::<f64, 8>::zeros();
        s.fixed_rows_mut::<4>(0).copy_from(m);
        Self(s)
    }

    pub fn position(&self) -> Measurement {
        self.0.fixed_rows::<4>(0).into_owned()
    }

    pub fn u(&self) -> f64 {
        self.0[0]
    }

    pub fn v(&self) -> f64 {
        self.0[1]
    }

    pub fn aspect(&self) -> f64 {
        self.0[2]
    }

    pub fn height(&self) -> f64 {
        self.0[3]
    }

    pub fn velocity(&self) -> Measurement {
        self.0.fixed_rows::<4>(4).into_owned()
    }
}

pub fn box_to_state(bbox: &BoundingBox) -> StateVector {
    StateVector::from_measurement(&bbox.to_measurement())
}

pub fn state_to_box(state: &StateVector) -> Result<BoundingBox> {
    let (u, v, gamma, h) = (state.u(), state.v(), state.aspect(), state.height());
    if !(gamma > 0.0 && h > 0.0) {
        return Err(Error::NumericDegeneracy(format!(
            "state has aspect {gamma} and height {h}"
        )));
    }
    let w = gamma * h;
    BoundingBox::new(u - w / 2.0, v - h / 2.0, w, h)
}
