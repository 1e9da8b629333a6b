//! Fusion of interactive-element detections from two detectors.
//!
//! One detector (`W`) is good at locating interactables, the other (`O`) at
//! describing what they do. [`combine_elements`] greedily pairs each `W`
//! element with the unused `O` element of highest IoU and merges the pair when
//! the overlap clears the threshold; whatever `O` leaves unmatched is appended
//! at the end.

use std::collections::BTreeMap;
use std::fmt;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::scalar::Real;

/// Suffix under which the `W` value of a conflicting property is preserved.
pub const W_CONFLICT_SUFFIX: &str = ".w";

/// Default IoU threshold.
pub const DEFAULT_TAU: f64 = 0.5;

#[derive(Debug, Error, PartialEq)]
pub enum MergeError {
    #[error("invalid bbox [{0}, {1}, {2}, {3}]: expected x1 <= x2 and y1 <= y2 with finite coordinates")]
    InvalidBox(f64, f64, f64, f64),
    #[error("IoU threshold {0} outside [0, 1]")]
    TauOutOfRange(f64),
    #[error("malformed detection file: {0}")]
    Malformed(String),
}

/// Axis-aligned box in page pixel coordinates. Zero-area boxes are allowed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox<T> {
    x1: T,
    y1: T,
    x2: T,
    y2: T,
}

impl<T: Real> BBox<T> {
    pub fn new(x1: T, y1: T, x2: T, y2: T) -> Result<Self, MergeError> {
        let finite = [x1, y1, x2, y2].iter().all(|v| v.is_finite());
        if !finite || x1 > x2 || y1 > y2 {
            return Err(MergeError::InvalidBox(
                x1.as_f64(),
                y1.as_f64(),
                x2.as_f64(),
                y2.as_f64(),
            ));
        }
        Ok(Self { x1, y1, x2, y2 })
    }

    pub fn coords(&self) -> [T; 4] {
        [self.x1, self.y1, self.x2, self.y2]
    }

    pub fn width(&self) -> T {
        self.x2 - self.x1
    }

    pub fn height(&self) -> T {
        self.y2 - self.y1
    }

    pub fn area(&self) -> T {
        self.width() * self.height()
    }

    pub fn intersection_area(&self, other: &Self) -> T {
        let w = self.x2.min(other.x2) - self.x1.max(other.x1);
        let h = self.y2.min(other.y2) - self.y1.max(other.y1);
        if w <= T::zero() || h <= T::zero() {
            T::zero()
        } else {
            w * h
        }
    }
}

impl<T: Real + Serialize> Serialize for BBox<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.coords().serialize(s)
    }
}

impl<'de, T: Real + DeserializeOwned> Deserialize<'de> for BBox<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let [x1, y1, x2, y2] = <[T; 4]>::deserialize(d)?;
        BBox::new(x1, y1, x2, y2).map_err(serde::de::Error::custom)
    }
}

/// Intersection over union; 0 when the union has no area.
pub fn iou<T: Real>(a: &BBox<T>, b: &BBox<T>) -> T {
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    if union <= T::zero() {
        return T::zero();
    }
    // Clamp guards against rounding pushing the ratio a hair above 1.
    (inter / union).min(T::one()).max(T::zero())
}

/// Which detector produced an element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Source {
    W,
    O,
    #[serde(rename = "MERGED")]
    Merged,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::W => "W",
            Source::O => "O",
            Source::Merged => "MERGED",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + DeserializeOwned"))]
pub struct DetectedElement<T> {
    pub bbox: BBox<T>,
    pub source: Source,
    #[serde(default)]
    pub properties: BTreeMap<String, String>,
}

impl<T: Real> DetectedElement<T> {
    pub fn new(bbox: BBox<T>, source: Source) -> Self {
        Self {
            bbox,
            source,
            properties: BTreeMap::new(),
        }
    }

    pub fn with_property(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.properties.insert(key.into(), value.into());
        self
    }
}

/// Loaded merge settings; the threshold range is checked here, not in
/// [`combine_elements`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MergeConfig<T> {
    tau: T,
}

impl<T: Real> MergeConfig<T> {
    pub fn new(tau: T) -> Result<Self, MergeError> {
        if !(tau >= T::zero() && tau <= T::one()) {
            return Err(MergeError::TauOutOfRange(tau.as_f64()));
        }
        Ok(Self { tau })
    }

    pub fn tau(&self) -> T {
        self.tau
    }
}

impl<T: Real> Default for MergeConfig<T> {
    fn default() -> Self {
        Self {
            tau: T::of(DEFAULT_TAU),
        }
    }
}

/// Merge a matched pair. The box comes from `w`; properties are the union of
/// both maps with `o` winning conflicts and the displaced `w` value kept
/// under `<key>.w`.
pub fn merge_properties<T: Real>(w: &DetectedElement<T>, o: &DetectedElement<T>) -> DetectedElement<T> {
    let mut properties = w.properties.clone();
    for (key, o_value) in &o.properties {
        if let Some(w_value) = properties.insert(key.clone(), o_value.clone()) {
            properties.insert(format!("{key}{W_CONFLICT_SUFFIX}"), w_value);
        }
    }
    DetectedElement {
        bbox: w.bbox,
        source: Source::Merged,
        properties,
    }
}

/// Greedy IoU fusion of `w` and `o`.
///
/// `w` is visited in order; each element is paired with the not-yet-used `o`
/// element of maximal IoU (lowest index on ties) and merged when that IoU is
/// at least `tau`. Unused `o` elements follow in their original order.
pub fn combine_elements<T: Real>(
    w: &[DetectedElement<T>],
    o: &[DetectedElement<T>],
    tau: T,
) -> Vec<DetectedElement<T>> {
    let overlaps: Vec<Vec<T>> = w
        .iter()
        .map(|we| o.iter().map(|oe| iou(&we.bbox, &oe.bbox)).collect())
        .collect();
    let mut used = vec![false; o.len()];
    let mut combined = Vec::with_capacity(w.len() + o.len());

    for (wi, we) in w.iter().enumerate() {
        let best = overlaps[wi]
            .iter()
            .enumerate()
            .filter(|(oi, _)| !used[*oi])
            .fold(None, |best: Option<(usize, T)>, (oi, &v)| match best {
                Some((_, bv)) if bv >= v => best,
                _ => Some((oi, v)),
            });
        match best {
            Some((oi, v)) if v >= tau => {
                combined.push(merge_properties(we, &o[oi]));
                used[oi] = true;
            }
            _ => combined.push(we.clone()),
        }
    }

    combined.extend(
        o.iter()
            .zip(&used)
            .filter(|(_, u)| !**u)
            .map(|(oe, _)| oe.clone()),
    );
    combined
}

/// Parse a detection file: a JSON array of elements.
pub fn parse_detections<T: Real + DeserializeOwned>(bytes: &[u8]) -> Result<Vec<DetectedElement<T>>, MergeError> {
    serde_json::from_slice(bytes).map_err(|e| MergeError::Malformed(e.to_string()))
}
