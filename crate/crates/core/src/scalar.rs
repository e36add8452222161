//! Scalar abstraction for the numeric kernels.
//!
//! Math code in this crate is written against [`Real`] so the same
//! kernels run at `f32` or `f64`. The pipeline proper instantiates
//! everything at `f64` (see the crate-root aliases); file formats
//! always store `f64` regardless of the in-memory scalar.

use num_traits::{Float, FromPrimitive, NumAssignOps, ToPrimitive};

/// Floating-point scalar usable by every numeric kernel in the crate.
///
/// A thin bundle over the `num-traits` hierarchy plus the formatting
/// and marker bounds the pipeline needs. Implemented for `f32` and
/// `f64`; implementations must be IEEE-754 so that documented
/// determinism guarantees hold.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssignOps
    + std::fmt::Debug
    + std::fmt::Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`, for constants and config values.
    ///
    /// Panics on values unrepresentable in the target type (never the
    /// case for finite config scalars at `f32`/`f64`).
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 converts to any Real")
    }

    /// Lossy conversion to `f64`, for serialization and reporting.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("Real converts to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Sum of squared differences between two equal-length slices.
pub(crate) fn sq_dist<R: Real>(a: &[R], b: &[R]) -> R {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = R::zero();
    for (&x, &y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    acc
}

/// Euclidean distance between two equal-length slices.
pub(crate) fn euclidean<R: Real>(a: &[R], b: &[R]) -> R {
    sq_dist(a, b).sqrt()
}
