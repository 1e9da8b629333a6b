//! Scalar abstraction shared by the geometric and vector-space code.
//!
//! Boxes, embeddings and ranking scores are written once over [`Real`] and
//! instantiated for `f64` (the default everywhere) and `f32`.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar usable for boxes, embeddings and scores.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from `f64`; constants in this crate are all exactly
    /// representable in `f32`, so this never produces NaN for them.
    fn of(v: f64) -> Self {
        Self::from_f64(v).unwrap_or_else(Self::nan)
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Real for T where
    T: Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
}

/// Sum a sequence with a fixed left-to-right fold order.
pub(crate) fn ordered_sum<T: Real>(values: impl IntoIterator<Item = T>) -> T {
    values.into_iter().fold(T::zero(), |acc, v| acc + v)
}
