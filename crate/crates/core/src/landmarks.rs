//! Landmark sets: 468 tracked 2-D face points in normalized image
//! coordinates.
//!
//! The landmark topology is fixed at [`LANDMARK_COUNT`] = 468 points;
//! every producer (oracle simulation, rig evaluation, self-model
//! prediction) and every consumer (losses, metrics) works on the full
//! set. Coordinates are normalized to the unit square `[0,1]^2`.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Number of tracked face landmarks.
pub const LANDMARK_COUNT: usize = 468;

/// Facial region a landmark belongs to, for upper/lower decoupling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    /// Driven by the upper-face motor group (brows, eyelids, nose).
    Upper,
    /// Driven by the lower-face motor group (mouth, jaw, cheeks).
    Lower,
    /// Unactuated; always at its rest position.
    Static,
}

impl Region {
    /// Stable byte tag used by file formats.
    pub fn to_tag(self) -> u8 {
        match self {
            Region::Upper => 0,
            Region::Lower => 1,
            Region::Static => 2,
        }
    }

    /// Inverse of [`Region::to_tag`].
    pub fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(Region::Upper),
            1 => Ok(Region::Lower),
            2 => Ok(Region::Static),
            other => Err(Error::format(format!("unknown region tag {other}"))),
        }
    }
}

/// A full set of [`LANDMARK_COUNT`] 2-D landmarks.
///
/// Physical producers (oracle simulation, rig evaluation) guarantee
/// coordinates in `[0,1]^2` and assert it via
/// [`LandmarkSet::check_unit_range`]; self-model *predictions* are raw
/// network outputs and may protrude slightly, so range is a producer
/// invariant rather than a wrapper invariant. Finiteness always holds.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkSet<R> {
    points: Vec<[R; 2]>,
}

impl<R: Real> LandmarkSet<R> {
    /// Wraps a point list, validating count and finiteness.
    pub fn from_points(points: Vec<[R; 2]>) -> Result<Self> {
        if points.len() != LANDMARK_COUNT {
            return Err(Error::input(format!(
                "landmark set needs {} points, got {}",
                LANDMARK_COUNT,
                points.len()
            )));
        }
        for (i, p) in points.iter().enumerate() {
            for (axis, &c) in p.iter().enumerate() {
                if !c.is_finite() {
                    return Err(Error::input(format!(
                        "landmark {i} axis {axis} is not finite"
                    )));
                }
            }
        }
        Ok(LandmarkSet { points })
    }

    /// Errors unless every coordinate lies in `[0,1]`.
    pub fn check_unit_range(&self) -> Result<()> {
        for (i, p) in self.points.iter().enumerate() {
            for (axis, &c) in p.iter().enumerate() {
                if c < R::zero() || c > R::one() {
                    return Err(Error::input(format!(
                        "landmark {i} axis {axis} = {c} outside [0,1]"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Point list accessor.
    pub fn points(&self) -> &[[R; 2]] {
        &self.points
    }

    /// Single point accessor.
    pub fn point(&self, i: usize) -> [R; 2] {
        self.points[i]
    }

    /// Flattens to `[x0, y0, x1, y1, ...]` (length `2 * 468`).
    pub fn flatten(&self) -> Vec<R> {
        let mut out = Vec::with_capacity(2 * LANDMARK_COUNT);
        for p in &self.points {
            out.push(p[0]);
            out.push(p[1]);
        }
        out
    }

    /// Rebuilds from a flat `[x0, y0, ...]` buffer.
    pub fn from_flat(flat: &[R]) -> Result<Self> {
        if flat.len() != 2 * LANDMARK_COUNT {
            return Err(Error::input(format!(
                "flat landmark buffer needs {} values, got {}",
                2 * LANDMARK_COUNT,
                flat.len()
            )));
        }
        Self::from_points(flat.chunks_exact(2).map(|c| [c[0], c[1]]).collect())
    }

    /// Converts the coordinate scalar type (used by f32 tests and
    /// serialization, which always stores f64).
    pub fn map_scalar<S: Real>(&self) -> LandmarkSet<S> {
        LandmarkSet {
            points: self
                .points
                .iter()
                .map(|p| [S::of(p[0].to_f64_lossy()), S::of(p[1].to_f64_lossy())])
                .collect(),
        }
    }
}
