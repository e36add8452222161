//! Evaluation metrics for landmark tracking quality.
//!
//! Reports lip vertex error (LVE) and eye/forehead vertex error (EVE):
//! the worst per-landmark Euclidean distance within the respective
//! region, converted to millimetres through a calibration factor. The
//! worst-case convention makes the metric sensitive to a single badly
//! placed landmark, which is what viewers notice on a physical face.
//! A mean distance over all landmarks is included for a smoother
//! aggregate.
//!
//! Landmark coordinates are normalized to `[0,1]`; [`Calibration`]
//! carries the physical scale (mm per normalized unit).

use crate::error::{Error, Result};
use crate::landmarks::{LandmarkSet, LANDMARK_COUNT};
use crate::scalar::{euclidean, Real};

/// Physical scale of the normalized landmark frame.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct Calibration {
    /// Millimetres spanned by one normalized coordinate unit.
    pub mm_per_unit: f64,
}

impl Default for Calibration {
    fn default() -> Self {
        // A typical adult-face crop spans roughly 10 cm.
        Calibration { mm_per_unit: 100.0 }
    }
}

impl Calibration {
    fn validate(&self) -> Result<()> {
        if !(self.mm_per_unit.is_finite() && self.mm_per_unit > 0.0) {
            return Err(Error::config(format!(
                "mm_per_unit {} must be positive and finite",
                self.mm_per_unit
            )));
        }
        Ok(())
    }
}

/// Landmark index sets the regional metrics evaluate over.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct FaceRegions {
    /// Lip landmark indices (LVE).
    pub lips: Vec<usize>,
    /// Eye and forehead landmark indices (EVE).
    pub eye_forehead: Vec<usize>,
}

impl Default for FaceRegions {
    fn default() -> Self {
        // Contiguous blocks inside the default lower (lips) and upper
        // (eyes/forehead) face regions.
        FaceRegions {
            lips: (216..256).collect(),
            eye_forehead: (24..72).collect(),
        }
    }
}

impl FaceRegions {
    /// Checks that both index sets are non-empty, in range, and
    /// disjoint.
    pub fn validate(&self) -> Result<()> {
        for (name, set) in [("lips", &self.lips), ("eye_forehead", &self.eye_forehead)] {
            if set.is_empty() {
                return Err(Error::config(format!("{name} region is empty")));
            }
            if let Some(&i) = set.iter().find(|&&i| i >= LANDMARK_COUNT) {
                return Err(Error::config(format!(
                    "{name} index {i} out of range (< {LANDMARK_COUNT})"
                )));
            }
        }
        let mut seen = vec![false; LANDMARK_COUNT];
        for &i in &self.lips {
            seen[i] = true;
        }
        if let Some(&i) = self.eye_forehead.iter().find(|&&i| seen[i]) {
            return Err(Error::config(format!(
                "landmark {i} appears in both lips and eye_forehead"
            )));
        }
        Ok(())
    }
}

fn max_region_error<R: Real>(
    truth: &LandmarkSet<R>,
    predicted: &LandmarkSet<R>,
    indices: &[usize],
    calibration: &Calibration,
) -> f64 {
    let worst = indices
        .iter()
        .map(|&i| euclidean(&truth.point(i), &predicted.point(i)).to_f64_lossy())
        .fold(0.0f64, f64::max);
    worst * calibration.mm_per_unit
}

/// Lip vertex error: worst lip-landmark distance, in millimetres.
pub fn lip_vertex_error<R: Real>(
    truth: &LandmarkSet<R>,
    predicted: &LandmarkSet<R>,
    regions: &FaceRegions,
    calibration: &Calibration,
) -> Result<f64> {
    regions.validate()?;
    calibration.validate()?;
    Ok(max_region_error(
        truth,
        predicted,
        &regions.lips,
        calibration,
    ))
}

/// Eye/forehead vertex error: worst distance over that region, in
/// millimetres.
pub fn eye_vertex_error<R: Real>(
    truth: &LandmarkSet<R>,
    predicted: &LandmarkSet<R>,
    regions: &FaceRegions,
    calibration: &Calibration,
) -> Result<f64> {
    regions.validate()?;
    calibration.validate()?;
    Ok(max_region_error(
        truth,
        predicted,
        &regions.eye_forehead,
        calibration,
    ))
}

/// Mean Euclidean distance over all landmarks, in millimetres.
pub fn mean_landmark_distance<R: Real>(
    truth: &LandmarkSet<R>,
    predicted: &LandmarkSet<R>,
    calibration: &Calibration,
) -> Result<f64> {
    calibration.validate()?;
    let sum: f64 = (0..LANDMARK_COUNT)
        .map(|i| euclidean(&truth.point(i), &predicted.point(i)).to_f64_lossy())
        .sum();
    Ok(sum / LANDMARK_COUNT as f64 * calibration.mm_per_unit)
}

/// Per-sequence summary of the three metrics (means over frames of the
/// per-frame values, plus the single worst frame for each region).
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SequenceMetrics {
    /// Mean per-frame LVE (mm).
    pub lve_mean: f64,
    /// Worst per-frame LVE (mm).
    pub lve_max: f64,
    /// Mean per-frame EVE (mm).
    pub eve_mean: f64,
    /// Worst per-frame EVE (mm).
    pub eve_max: f64,
    /// Mean per-frame mean landmark distance (mm).
    pub mean_distance: f64,
    /// Frames evaluated.
    pub frames: usize,
}

/// Evaluates a predicted landmark sequence against ground truth.
pub fn evaluate_sequence<R: Real>(
    truth: &[LandmarkSet<R>],
    predicted: &[LandmarkSet<R>],
    regions: &FaceRegions,
    calibration: &Calibration,
) -> Result<SequenceMetrics> {
    regions.validate()?;
    calibration.validate()?;
    if truth.is_empty() {
        return Err(Error::input("no frames to evaluate".to_string()));
    }
    if truth.len() != predicted.len() {
        return Err(Error::input(format!(
            "ground truth has {} frames, prediction has {}",
            truth.len(),
            predicted.len()
        )));
    }
    let (mut lve_sum, mut lve_max) = (0.0, 0.0f64);
    let (mut eve_sum, mut eve_max) = (0.0, 0.0f64);
    let mut dist_sum = 0.0;
    for (t, p) in truth.iter().zip(predicted) {
        let lve = max_region_error(t, p, &regions.lips, calibration);
        let eve = max_region_error(t, p, &regions.eye_forehead, calibration);
        lve_sum += lve;
        lve_max = lve_max.max(lve);
        eve_sum += eve;
        eve_max = eve_max.max(eve);
        dist_sum += mean_landmark_distance(t, p, calibration)?;
    }
    let n = truth.len() as f64;
    Ok(SequenceMetrics {
        lve_mean: lve_sum / n,
        lve_max,
        eve_mean: eve_sum / n,
        eve_max,
        mean_distance: dist_sum / n,
        frames: truth.len(),
    })
}
