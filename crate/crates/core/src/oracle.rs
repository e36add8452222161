//! Deterministic simulated face: the stand-in for the physical robot.
//!
//! The oracle maps a motor vector `p ∈ [0,1]^26` to 468 2-D landmarks:
//!
//! ```text
//! landmark[i] = base[i] + squash( Σ_m influence[i][m]·p[m]
//!                               + Σ_k gain_k·p[m_k]·p[n_k] )
//! ```
//!
//! applied per coordinate, where `squash(x) = r·tanh(x/r)` saturates
//! displacements at the radius `r` (`squash(0) = 0`, unit slope at the
//! origin, smooth everywhere). A `linear` variant disables both the
//! squash and the pairwise coupling terms, leaving an exactly affine
//! map — useful as a fixture the self-model can represent perfectly.
//!
//! Decoupling is structural: upper-region landmarks carry influence
//! and coupling entries only for upper-group motors, lower-region only
//! for lower-group motors, and static-region landmarks carry none, so
//! cross-region effects are exactly zero (not merely small). Influence
//! magnitudes are budgeted per coordinate so every output stays inside
//! `[0,1]^2` for *every* feasible motor vector, by construction.
//!
//! Everything is drawn from seeded PRNG streams; building the same
//! config and seed twice yields byte-identical serializations.

use crate::container::{fnv1a64, ByteReader, ByteWriter};
use crate::error::{Error, Result};
use crate::landmarks::{LandmarkSet, Region, LANDMARK_COUNT};
use crate::motor::{MotorSpecTable, MotorVector, EXPRESSION_MOTOR_COUNT};
use crate::prng::Pcg32;
use crate::scalar::Real;

/// Magic of serialized oracles.
pub const ORACLE_MAGIC: [u8; 4] = *b"FORC";
/// Current oracle format version.
pub const ORACLE_VERSION: u16 = 1;

// PRNG stream assignments for the build procedure.
const STREAM_BASE: u64 = 0;
const STREAM_INFLUENCE: u64 = 1;
const STREAM_COUPLING: u64 = 2;
const STREAM_BUDGET: u64 = 3;

/// Construction parameters for [`FaceOracle::build`].
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct OracleConfig {
    /// Motor ids driving the upper face (brows, eyelids, nose side).
    pub upper_motor_ids: Vec<u8>,
    /// Motor ids driving the lower face (mouth, jaw, cheek side).
    pub lower_motor_ids: Vec<u8>,
    /// Landmarks assigned to the upper region (indices `0..upper`).
    pub upper_landmarks: usize,
    /// Landmarks assigned to the lower region (indices following the
    /// upper block); the remainder is static.
    pub lower_landmarks: usize,
    /// Motors influencing each actuated landmark coordinate.
    pub influences_per_coordinate: usize,
    /// Pairwise product coupling terms generated per motor group.
    pub coupling_terms: usize,
    /// Saturation radius of the squash, and the per-coordinate
    /// displacement budget cap.
    pub displacement_radius: f64,
    /// Rest positions are drawn in `[margin, 1 − margin]` per axis.
    pub base_margin: f64,
    /// Disables squash and coupling, producing an exactly affine face.
    pub linear: bool,
}

impl Default for OracleConfig {
    fn default() -> Self {
        let table = MotorSpecTable::builtin();
        OracleConfig {
            upper_motor_ids: table.group_ids(crate::motor::MotorGroup::Upper),
            lower_motor_ids: table.group_ids(crate::motor::MotorGroup::Lower),
            upper_landmarks: 180,
            lower_landmarks: 210,
            influences_per_coordinate: 3,
            coupling_terms: 64,
            displacement_radius: 0.15,
            base_margin: 0.2,
            linear: false,
        }
    }
}

impl OracleConfig {
    /// The default affine variant: same partition, squash and coupling
    /// disabled.
    pub fn linear() -> Self {
        OracleConfig {
            linear: true,
            coupling_terms: 0,
            ..OracleConfig::default()
        }
    }

    /// Validates the config and resolves the motor group partition to
    /// expression-index space.
    fn motor_regions(&self) -> Result<[Region; EXPRESSION_MOTOR_COUNT]> {
        let table = MotorSpecTable::builtin();
        let mut regions = [None; EXPRESSION_MOTOR_COUNT];
        for (ids, region) in [
            (&self.upper_motor_ids, Region::Upper),
            (&self.lower_motor_ids, Region::Lower),
        ] {
            for &id in ids {
                let idx = table.expression_index(id).ok_or_else(|| {
                    Error::config(format!("motor {id} is not an expression motor"))
                })?;
                if regions[idx].is_some() {
                    return Err(Error::config(format!(
                        "ambiguous motor group: motor {id} assigned twice"
                    )));
                }
                regions[idx] = Some(region);
            }
        }
        let mut out = [Region::Upper; EXPRESSION_MOTOR_COUNT];
        for (idx, r) in regions.iter().enumerate() {
            out[idx] = r.ok_or_else(|| {
                Error::config(format!(
                    "motor group partition misses expression motor {}",
                    table.expression_ids()[idx]
                ))
            })?;
        }
        Ok(out)
    }

    fn validate(&self) -> Result<()> {
        self.motor_regions()?;
        if self.upper_landmarks + self.lower_landmarks > LANDMARK_COUNT {
            return Err(Error::config(format!(
                "landmark regions ({} + {}) exceed {LANDMARK_COUNT}",
                self.upper_landmarks, self.lower_landmarks
            )));
        }
        if self.upper_landmarks == 0 || self.lower_landmarks == 0 {
            return Err(Error::config(
                "both landmark regions must be non-empty".to_string(),
            ));
        }
        if self.influences_per_coordinate == 0 {
            return Err(Error::config(
                "influences_per_coordinate must be positive".to_string(),
            ));
        }
        if !(self.base_margin > 0.0 && self.base_margin < 0.5) {
            return Err(Error::config(format!(
                "base_margin {} outside (0, 0.5)",
                self.base_margin
            )));
        }
        if !(self.displacement_radius > 0.0 && self.displacement_radius <= self.base_margin) {
            return Err(Error::config(format!(
                "displacement_radius {} outside (0, base_margin]",
                self.displacement_radius
            )));
        }
        Ok(())
    }

    /// Region of landmark `i`: upper block, lower block, then static.
    pub fn landmark_region(&self, i: usize) -> Region {
        if i < self.upper_landmarks {
            Region::Upper
        } else if i < self.upper_landmarks + self.lower_landmarks {
            Region::Lower
        } else {
            Region::Static
        }
    }
}

/// One pairwise motor product term acting on a landmark coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingTerm<R> {
    /// Landmark index.
    pub landmark: u32,
    /// Coordinate axis (0 = x, 1 = y).
    pub coord: u8,
    /// First motor (expression index), `m < n`.
    pub m: u8,
    /// Second motor (expression index).
    pub n: u8,
    /// Term gain.
    pub gain: R,
}

/// The simulated face.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceOracle<R> {
    config: OracleConfig,
    seed: u64,
    base: Vec<[R; 2]>,
    /// Flat `landmark × motor × coord` influence tensor.
    influence: Vec<R>,
    coupling: Vec<CouplingTerm<R>>,
    region_mask: Vec<Region>,
    motor_region: [Region; EXPRESSION_MOTOR_COUNT],
}

impl<R: Real> FaceOracle<R> {
    /// Builds an oracle from a config and seed. Deterministic: the
    /// same inputs always produce a byte-identical oracle.
    pub fn build(config: &OracleConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let motor_region = config.motor_regions()?;
        let region_mask: Vec<Region> = (0..LANDMARK_COUNT)
            .map(|i| config.landmark_region(i))
            .collect();

        let group_motors = |r: Region| -> Vec<usize> {
            motor_region
                .iter()
                .enumerate()
                .filter(|(_, &g)| g == r)
                .map(|(m, _)| m)
                .collect()
        };
        let upper_motors = group_motors(Region::Upper);
        let lower_motors = group_motors(Region::Lower);

        let mut rng_base = Pcg32::new(seed, STREAM_BASE);
        let base: Vec<[R; 2]> = (0..LANDMARK_COUNT)
            .map(|_| {
                let lo = config.base_margin;
                let hi = 1.0 - config.base_margin;
                [
                    R::of(rng_base.uniform(lo, hi)),
                    R::of(rng_base.uniform(lo, hi)),
                ]
            })
            .collect();

        // Raw influence weights: `influences_per_coordinate` distinct
        // motors from the landmark's group, chosen by partial shuffle.
        let mut rng_infl = Pcg32::new(seed, STREAM_INFLUENCE);
        let mut influence = vec![R::zero(); LANDMARK_COUNT * EXPRESSION_MOTOR_COUNT * 2];
        for i in 0..LANDMARK_COUNT {
            let motors = match region_mask[i] {
                Region::Upper => &upper_motors,
                Region::Lower => &lower_motors,
                Region::Static => continue,
            };
            for c in 0..2 {
                let mut pool = motors.clone();
                let k = config.influences_per_coordinate.min(pool.len());
                for j in 0..k {
                    let pick = j + rng_infl.next_below((pool.len() - j) as u32) as usize;
                    pool.swap(j, pick);
                    let m = pool[j];
                    let w = rng_infl.uniform(-1.0, 1.0);
                    influence[(i * EXPRESSION_MOTOR_COUNT + m) * 2 + c] = R::of(w);
                }
            }
        }

        // Pairwise coupling terms, restricted to each group.
        let mut coupling = Vec::new();
        if !config.linear && config.coupling_terms > 0 {
            let mut rng_cpl = Pcg32::new(seed, STREAM_COUPLING);
            for (motors, lm_start, lm_count) in [
                (&upper_motors, 0usize, config.upper_landmarks),
                (
                    &lower_motors,
                    config.upper_landmarks,
                    config.lower_landmarks,
                ),
            ] {
                if motors.len() < 2 {
                    continue;
                }
                for _ in 0..config.coupling_terms {
                    let landmark = lm_start + rng_cpl.next_below(lm_count as u32) as usize;
                    let coord = rng_cpl.next_below(2) as u8;
                    let a = rng_cpl.next_below(motors.len() as u32) as usize;
                    let b = {
                        // Distinct second motor: draw from the rest.
                        let r = rng_cpl.next_below(motors.len() as u32 - 1) as usize;
                        if r >= a {
                            r + 1
                        } else {
                            r
                        }
                    };
                    let (m, n) = (motors[a.min(b)] as u8, motors[a.max(b)] as u8);
                    let gain = rng_cpl.uniform(-1.0, 1.0);
                    coupling.push(CouplingTerm {
                        landmark: landmark as u32,
                        coord,
                        m,
                        n,
                        gain: R::of(gain),
                    });
                }
            }
        }

        // Budget normalization: per coordinate, scale influences and
        // coupling gains so Σ|influence| + Σ|gain| equals a budget in
        // [radius/2, radius]. Displacements then never exceed the
        // radius, keeping base ± displacement inside [0,1].
        let mut rng_budget = Pcg32::new(seed, STREAM_BUDGET);
        for i in 0..LANDMARK_COUNT {
            for c in 0..2 {
                let budget = R::of(
                    rng_budget
                        .uniform(0.5 * config.displacement_radius, config.displacement_radius),
                );
                let mut total = R::zero();
                for m in 0..EXPRESSION_MOTOR_COUNT {
                    total += influence[(i * EXPRESSION_MOTOR_COUNT + m) * 2 + c].abs();
                }
                for t in &coupling {
                    if t.landmark as usize == i && t.coord as usize == c {
                        total += t.gain.abs();
                    }
                }
                if total > R::zero() {
                    let s = budget / total;
                    for m in 0..EXPRESSION_MOTOR_COUNT {
                        influence[(i * EXPRESSION_MOTOR_COUNT + m) * 2 + c] *= s;
                    }
                    for t in coupling.iter_mut() {
                        if t.landmark as usize == i && t.coord as usize == c {
                            t.gain *= s;
                        }
                    }
                }
            }
        }

        Ok(FaceOracle {
            config: config.clone(),
            seed,
            base,
            influence,
            coupling,
            region_mask,
            motor_region,
        })
    }

    #[inline]
    fn infl(&self, i: usize, m: usize, c: usize) -> R {
        self.influence[(i * EXPRESSION_MOTOR_COUNT + m) * 2 + c]
    }

    fn squash(&self, x: R) -> R {
        if self.config.linear {
            x
        } else {
            let r = R::of(self.config.displacement_radius);
            r * (x / r).tanh()
        }
    }

    fn squash_slope(&self, x: R) -> R {
        if self.config.linear {
            R::one()
        } else {
            let r = R::of(self.config.displacement_radius);
            let t = (x / r).tanh();
            R::one() - t * t
        }
    }

    /// Raw (pre-squash) displacement of one coordinate.
    fn raw_displacement(&self, i: usize, c: usize, p: &[R]) -> R {
        let mut acc = R::zero();
        for (m, &pm) in p.iter().enumerate() {
            acc += self.infl(i, m, c) * pm;
        }
        acc
    }

    /// Simulates the landmark positions for a feasible motor vector.
    ///
    /// Pure and deterministic: equal inputs give bit-identical outputs.
    pub fn simulate_landmarks(&self, motor: &MotorVector<R>) -> Result<LandmarkSet<R>> {
        let p = motor.values();
        let mut disp = vec![[R::zero(); 2]; LANDMARK_COUNT];
        for (i, d) in disp.iter_mut().enumerate() {
            if self.region_mask[i] == Region::Static {
                continue;
            }
            d[0] = self.raw_displacement(i, 0, p);
            d[1] = self.raw_displacement(i, 1, p);
        }
        for t in &self.coupling {
            disp[t.landmark as usize][t.coord as usize] +=
                t.gain * p[t.m as usize] * p[t.n as usize];
        }
        let points = self
            .base
            .iter()
            .zip(&disp)
            .map(|(b, d)| [b[0] + self.squash(d[0]), b[1] + self.squash(d[1])])
            .collect();
        let set = LandmarkSet::from_points(points)?;
        set.check_unit_range()?;
        Ok(set)
    }

    /// Directional derivative `J(p)·dir` of the landmark map, computed
    /// analytically. Diagnostic surface for smoothness and decoupling
    /// checks; the pipeline itself differentiates the *self-model*,
    /// never the oracle.
    pub fn directional_derivative(&self, motor: &MotorVector<R>, dir: &[R]) -> Vec<[R; 2]> {
        assert_eq!(dir.len(), EXPRESSION_MOTOR_COUNT);
        let p = motor.values();
        // Raw displacement and raw directional rate, then chain rule
        // through the squash.
        let mut raw = [[R::zero(); 2]; LANDMARK_COUNT];
        let mut rate = [[R::zero(); 2]; LANDMARK_COUNT];
        for i in 0..LANDMARK_COUNT {
            if self.region_mask[i] == Region::Static {
                continue;
            }
            for c in 0..2 {
                raw[i][c] = self.raw_displacement(i, c, p);
                let mut acc = R::zero();
                for (m, &dm) in dir.iter().enumerate() {
                    acc += self.infl(i, m, c) * dm;
                }
                rate[i][c] = acc;
            }
        }
        for t in &self.coupling {
            let (i, c) = (t.landmark as usize, t.coord as usize);
            let (m, n) = (t.m as usize, t.n as usize);
            raw[i][c] += t.gain * p[m] * p[n];
            rate[i][c] += t.gain * (dir[m] * p[n] + p[m] * dir[n]);
        }
        (0..LANDMARK_COUNT)
            .map(|i| {
                [
                    self.squash_slope(raw[i][0]) * rate[i][0],
                    self.squash_slope(raw[i][1]) * rate[i][1],
                ]
            })
            .collect()
    }

    /// Build seed.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Build config.
    pub fn config(&self) -> &OracleConfig {
        &self.config
    }

    /// Region of each landmark.
    pub fn region_mask(&self) -> &[Region] {
        &self.region_mask
    }

    /// Region of each expression motor (never `Static`).
    pub fn motor_region(&self) -> &[Region; EXPRESSION_MOTOR_COUNT] {
        &self.motor_region
    }

    /// Rest positions.
    pub fn base(&self) -> &[[R; 2]] {
        &self.base
    }

    /// FNV-1a fingerprint of the serialized oracle; stamped into
    /// dataset headers so models can be traced to the face that
    /// produced their data.
    pub fn content_hash(&self) -> u64 {
        fnv1a64(&self.serialize())
    }

    /// Serializes to the `FORC` container (tensor payload as `f64`).
    pub fn serialize(&self) -> Vec<u8> {
        let mut w = ByteWriter::with_header(ORACLE_MAGIC, ORACLE_VERSION);
        w.u64(self.seed);
        w.u32(LANDMARK_COUNT as u32);
        w.u32(EXPRESSION_MOTOR_COUNT as u32);
        let c = &self.config;
        w.u8(c.upper_motor_ids.len() as u8);
        c.upper_motor_ids.iter().for_each(|&id| w.u8(id));
        w.u8(c.lower_motor_ids.len() as u8);
        c.lower_motor_ids.iter().for_each(|&id| w.u8(id));
        w.u32(c.upper_landmarks as u32);
        w.u32(c.lower_landmarks as u32);
        w.u32(c.influences_per_coordinate as u32);
        w.u32(c.coupling_terms as u32);
        w.f64(c.displacement_radius);
        w.f64(c.base_margin);
        w.u8(u8::from(c.linear));
        for p in &self.base {
            w.f64(p[0].to_f64_lossy());
            w.f64(p[1].to_f64_lossy());
        }
        for v in &self.influence {
            w.f64(v.to_f64_lossy());
        }
        for r in &self.region_mask {
            w.u8(r.to_tag());
        }
        w.u32(self.coupling.len() as u32);
        for t in &self.coupling {
            w.u32(t.landmark);
            w.u8(t.coord);
            w.u8(t.m);
            w.u8(t.n);
            w.f64(t.gain.to_f64_lossy());
        }
        w.into_bytes()
    }

    /// Parses a `FORC` container.
    pub fn deserialize(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes, "oracle");
        r.header(ORACLE_MAGIC, ORACLE_VERSION)?;
        let seed = r.u64()?;
        let n_landmarks = r.u32()? as usize;
        let n_motors = r.u32()? as usize;
        if n_landmarks != LANDMARK_COUNT || n_motors != EXPRESSION_MOTOR_COUNT {
            return Err(Error::format(format!(
                "oracle: unexpected dimensions {n_landmarks} × {n_motors}"
            )));
        }
        let upper_n = r.u8()? as usize;
        let upper_motor_ids: Vec<u8> = (0..upper_n).map(|_| r.u8()).collect::<Result<_>>()?;
        let lower_n = r.u8()? as usize;
        let lower_motor_ids: Vec<u8> = (0..lower_n).map(|_| r.u8()).collect::<Result<_>>()?;
        let config = OracleConfig {
            upper_motor_ids,
            lower_motor_ids,
            upper_landmarks: r.u32()? as usize,
            lower_landmarks: r.u32()? as usize,
            influences_per_coordinate: r.u32()? as usize,
            coupling_terms: r.u32()? as usize,
            displacement_radius: r.f64()?,
            base_margin: r.f64()?,
            linear: r.u8()? != 0,
        };
        config.validate()?;
        let motor_region = config.motor_regions()?;
        let mut base = Vec::with_capacity(LANDMARK_COUNT);
        for _ in 0..LANDMARK_COUNT {
            base.push([R::of(r.f64()?), R::of(r.f64()?)]);
        }
        let influence = r
            .f64_vec(LANDMARK_COUNT * EXPRESSION_MOTOR_COUNT * 2)?
            .into_iter()
            .map(R::of)
            .collect();
        let mut region_mask = Vec::with_capacity(LANDMARK_COUNT);
        for _ in 0..LANDMARK_COUNT {
            region_mask.push(Region::from_tag(r.u8()?)?);
        }
        let n_coupling = r.len_capped(1_000_000, "coupling count")?;
        let mut coupling = Vec::with_capacity(n_coupling);
        for _ in 0..n_coupling {
            let landmark = r.u32()?;
            let coord = r.u8()?;
            let m = r.u8()?;
            let n = r.u8()?;
            let gain = R::of(r.f64()?);
            if landmark as usize >= LANDMARK_COUNT
                || coord > 1
                || m as usize >= EXPRESSION_MOTOR_COUNT
                || n as usize >= EXPRESSION_MOTOR_COUNT
            {
                return Err(Error::format(
                    "oracle: coupling term out of range".to_string(),
                ));
            }
            coupling.push(CouplingTerm {
                landmark,
                coord,
                m,
                n,
                gain,
            });
        }
        r.finish()?;
        Ok(FaceOracle {
            config,
            seed,
            base,
            influence,
            coupling,
            region_mask,
            motor_region,
        })
    }

    /// Writes the `FORC` container to a file.
    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.serialize())?;
        Ok(())
    }

    /// Reads a `FORC` container from a file.
    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::deserialize(&std::fs::read(path)?)
    }
}
