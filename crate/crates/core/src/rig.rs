//! Linear blendshape rig over the face landmark topology.
//!
//! A rig is a neutral landmark set plus 33 displacement shapes;
//! coefficients `c ∈ [0,1]^33` evaluate to
//! `base + Σ_k c_k · delta_k`. Rigs are validated at construction so
//! that *every* feasible coefficient vector yields landmarks inside
//! `[0,1]^2` (worst-case positive and negative delta sums are checked
//! per coordinate).
//!
//! [`build_default_rig`] derives a rig from a face oracle: each shape
//! is the oracle's linearized response to a designated sparse motor
//! pattern at the neutral pose (central finite differences with step
//! [`FD_STEP`]), scaled by [`PATTERN_AMPLITUDE`]. Shapes `0..26` probe
//! single expression motors; shapes `26..33` probe two-motor
//! combinations. Patterns point *into* the feasible box from neutral,
//! so on an affine (linear-variant) oracle every coefficient vector
//! corresponds to a reachable motor pose exactly.

use crate::container::{ByteReader, ByteWriter};
use crate::error::{Error, Result};
use crate::landmarks::{LandmarkSet, LANDMARK_COUNT};
use crate::motor::{MotorSpecTable, MotorVector, EXPRESSION_MOTOR_COUNT};
use crate::oracle::FaceOracle;
use crate::scalar::Real;

/// Number of blendshapes in a rig (and decoder output channels).
pub const BLENDSHAPE_COUNT: usize = 33;
/// Magic of serialized rigs.
pub const RIG_MAGIC: [u8; 4] = *b"BRIG";
/// Current rig format version.
pub const RIG_VERSION: u16 = 1;
/// Central-difference step used by [`build_default_rig`].
pub const FD_STEP: f64 = 1e-4;
/// Motor-space amplitude a unit coefficient corresponds to.
pub const PATTERN_AMPLITUDE: f64 = 0.08;

/// Blendshape coefficient vector: 33 weights in `[0,1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlendshapeCoeffs<R> {
    values: [R; BLENDSHAPE_COUNT],
}

impl<R: Real> BlendshapeCoeffs<R> {
    /// Wraps validated coefficients: finite and in `[0,1]`.
    pub fn new(values: [R; BLENDSHAPE_COUNT]) -> Result<Self> {
        for (k, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::input(format!("coefficient {k} is not finite")));
            }
            if v < R::zero() || v > R::one() {
                return Err(Error::input(format!(
                    "coefficient {k} = {v} outside [0, 1]"
                )));
            }
        }
        Ok(BlendshapeCoeffs { values })
    }

    /// Builds from a slice (must have length 33).
    pub fn from_slice(values: &[R]) -> Result<Self> {
        let arr: [R; BLENDSHAPE_COUNT] = values.try_into().map_err(|_| {
            Error::input(format!(
                "coefficient vector needs {BLENDSHAPE_COUNT} values, got {}",
                values.len()
            ))
        })?;
        Self::new(arr)
    }

    /// The all-zero coefficient vector.
    pub fn zero() -> Self {
        BlendshapeCoeffs {
            values: [R::zero(); BLENDSHAPE_COUNT],
        }
    }

    /// Coefficient slice.
    pub fn values(&self) -> &[R] {
        &self.values
    }

    /// Single coefficient.
    pub fn get(&self, k: usize) -> R {
        self.values[k]
    }

    /// Converts the scalar type.
    pub fn map_scalar<S: Real>(&self) -> BlendshapeCoeffs<S> {
        let mut values = [S::zero(); BLENDSHAPE_COUNT];
        for (i, &v) in self.values.iter().enumerate() {
            values[i] = S::of(v.to_f64_lossy());
        }
        BlendshapeCoeffs { values }
    }
}

/// Linear blendshape rig: neutral landmarks plus 33 delta shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct BlendshapeRig<R> {
    base: LandmarkSet<R>,
    /// `deltas[k][i]` = displacement of landmark `i` under shape `k`.
    deltas: Vec<Vec<[R; 2]>>,
}

impl<R: Real> BlendshapeRig<R> {
    /// Builds a rig, validating that every coefficient vector in
    /// `[0,1]^33` keeps all landmarks inside `[0,1]^2`.
    pub fn from_parts(base: LandmarkSet<R>, deltas: Vec<Vec<[R; 2]>>) -> Result<Self> {
        if deltas.len() != BLENDSHAPE_COUNT {
            return Err(Error::input(format!(
                "rig needs {BLENDSHAPE_COUNT} delta shapes, got {}",
                deltas.len()
            )));
        }
        for (k, d) in deltas.iter().enumerate() {
            if d.len() != LANDMARK_COUNT {
                return Err(Error::input(format!(
                    "delta shape {k} has {} landmarks, expected {LANDMARK_COUNT}",
                    d.len()
                )));
            }
            for (i, p) in d.iter().enumerate() {
                if !p[0].is_finite() || !p[1].is_finite() {
                    return Err(Error::input(format!(
                        "delta shape {k} landmark {i} is not finite"
                    )));
                }
            }
        }
        // Worst case over the coefficient box: each delta contributes
        // fully when positive (toward 1) or fully when negative
        // (toward 0).
        for i in 0..LANDMARK_COUNT {
            for c in 0..2 {
                let b = base.point(i)[c];
                let mut hi = b;
                let mut lo = b;
                for d in &deltas {
                    let v = d[i][c];
                    if v > R::zero() {
                        hi += v;
                    } else {
                        lo += v;
                    }
                }
                if hi > R::one() || lo < R::zero() {
                    return Err(Error::input(format!(
                        "rig deltas can push landmark {i} outside [0,1] (range [{lo}, {hi}])"
                    )));
                }
            }
        }
        Ok(BlendshapeRig { base, deltas })
    }

    /// Neutral landmarks (all coefficients zero).
    pub fn base(&self) -> &LandmarkSet<R> {
        &self.base
    }

    /// Delta shapes.
    pub fn deltas(&self) -> &[Vec<[R; 2]>] {
        &self.deltas
    }

    /// Evaluates the rig: `base + Σ_k c_k · delta_k`.
    pub fn rig_landmarks(&self, coeffs: &BlendshapeCoeffs<R>) -> LandmarkSet<R> {
        let mut points: Vec<[R; 2]> = self.base.points().to_vec();
        for (k, d) in self.deltas.iter().enumerate() {
            let c = coeffs.get(k);
            if c == R::zero() {
                continue;
            }
            for (p, dv) in points.iter_mut().zip(d) {
                p[0] += c * dv[0];
                p[1] += c * dv[1];
            }
        }
        let set = LandmarkSet::from_points(points).expect("point count is fixed");
        debug_assert!(
            set.check_unit_range().is_ok(),
            "rig construction guarantees range"
        );
        set
    }

    /// Serializes to the `BRIG` container.
    pub fn serialize(&self) -> Vec<u8> {
        let mut w = ByteWriter::with_header(RIG_MAGIC, RIG_VERSION);
        w.u32(BLENDSHAPE_COUNT as u32);
        w.u32(LANDMARK_COUNT as u32);
        for p in self.base.points() {
            w.f64(p[0].to_f64_lossy());
            w.f64(p[1].to_f64_lossy());
        }
        for d in &self.deltas {
            for p in d {
                w.f64(p[0].to_f64_lossy());
                w.f64(p[1].to_f64_lossy());
            }
        }
        w.into_bytes()
    }

    /// Parses a `BRIG` container.
    pub fn deserialize(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes, "rig");
        r.header(RIG_MAGIC, RIG_VERSION)?;
        let n_shapes = r.u32()? as usize;
        let n_landmarks = r.u32()? as usize;
        if n_shapes != BLENDSHAPE_COUNT || n_landmarks != LANDMARK_COUNT {
            return Err(Error::format(format!(
                "rig: unexpected dimensions {n_shapes} × {n_landmarks}"
            )));
        }
        let mut base = Vec::with_capacity(LANDMARK_COUNT);
        for _ in 0..LANDMARK_COUNT {
            base.push([R::of(r.f64()?), R::of(r.f64()?)]);
        }
        let mut deltas = Vec::with_capacity(BLENDSHAPE_COUNT);
        for _ in 0..BLENDSHAPE_COUNT {
            let mut d = Vec::with_capacity(LANDMARK_COUNT);
            for _ in 0..LANDMARK_COUNT {
                d.push([R::of(r.f64()?), R::of(r.f64()?)]);
            }
            deltas.push(d);
        }
        r.finish()?;
        Self::from_parts(LandmarkSet::from_points(base)?, deltas)
    }

    /// Writes the `BRIG` container to a file.
    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.serialize())?;
        Ok(())
    }

    /// Reads a `BRIG` container from a file.
    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::deserialize(&std::fs::read(path)?)
    }
}

/// The sparse motor pattern probed by blendshape `k`, as a direction in
/// expression-motor space.
///
/// Shapes `0..26` probe single motors, shapes `26..33` probe the motor
/// pairs `(j, j+13)`. Each entry is `±1`, signed to point into the
/// feasible box from the neutral pose (`+1` where neutral ≤ 0.5).
pub fn designated_pattern<R: Real>(k: usize, neutral: &MotorVector<R>) -> Vec<R> {
    assert!(k < BLENDSHAPE_COUNT);
    let sign = |m: usize| {
        if neutral.get(m) <= R::of(0.5) {
            R::one()
        } else {
            -R::one()
        }
    };
    let mut dir = vec![R::zero(); EXPRESSION_MOTOR_COUNT];
    if k < EXPRESSION_MOTOR_COUNT {
        dir[k] = sign(k);
    } else {
        let j = k - EXPRESSION_MOTOR_COUNT;
        dir[j] = sign(j);
        dir[j + 13] = sign(j + 13);
    }
    dir
}

/// Derives the default rig from a face oracle.
///
/// `base` is the oracle's landmark output at the neutral pose. Shape
/// `k` is the oracle's response along [`designated_pattern`] `k`,
/// linearized by central differences (step [`FD_STEP`]) at the neutral
/// pose — nudged [`FD_STEP`] inside the box on axes where neutral sits
/// on the boundary — and scaled by [`PATTERN_AMPLITUDE`].
pub fn build_default_rig<R: Real>(oracle: &FaceOracle<R>) -> Result<BlendshapeRig<R>> {
    let table = MotorSpecTable::builtin();
    let neutral = MotorVector::<R>::neutral(&table);
    let base = oracle.simulate_landmarks(&neutral)?;

    let h = R::of(FD_STEP);
    let amp = R::of(PATTERN_AMPLITUDE);
    // Central differences need h of room on both sides.
    let probe: Vec<R> = neutral
        .values()
        .iter()
        .map(|&v| v.max(h).min(R::one() - h))
        .collect();

    let mut deltas = Vec::with_capacity(BLENDSHAPE_COUNT);
    for k in 0..BLENDSHAPE_COUNT {
        let dir = designated_pattern(k, &neutral);
        let shifted = |s: R| -> Result<LandmarkSet<R>> {
            let vals: Vec<R> = probe.iter().zip(&dir).map(|(&p, &d)| p + s * d).collect();
            let m = MotorVector::new(vals.try_into().expect("26 components"))?;
            oracle.simulate_landmarks(&m)
        };
        let plus = shifted(h)?;
        let minus = shifted(-h)?;
        let two_h = R::of(2.0) * h;
        let delta: Vec<[R; 2]> = plus
            .points()
            .iter()
            .zip(minus.points())
            .map(|(p, m)| [amp * (p[0] - m[0]) / two_h, amp * (p[1] - m[1]) / two_h])
            .collect();
        deltas.push(delta);
    }
    BlendshapeRig::from_parts(base, deltas)
}
