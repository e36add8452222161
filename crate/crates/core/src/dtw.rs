//! Dynamic time warping over feature sequences.
//!
//! Aligns two sequences of fixed-dimension feature frames with the
//! classic full dynamic program: per-pair cost is the Euclidean
//! distance between frames, and a path may advance either sequence or
//! both (steps `(i+1,j)`, `(i,j+1)`, `(i+1,j+1)`). The traceback is
//! deterministic — ties prefer the diagonal, then advancing the first
//! sequence, then the second — so equal-cost inputs always produce the
//! same path. An optional Sakoe–Chiba band (`|i − j| ≤ band`) confines
//! the warp for long sequences.
//!
//! Sequences travel on disk as `FSEQ`: the 4-byte magic, feature
//! dimension (`u32`), frame count (`u32`), then the frames row by row
//! as little-endian `f64`. The format carries no version field and no
//! frame rate; rate is runtime metadata defaulting to
//! [`DEFAULT_FRAME_RATE`].

use crate::container::{ByteReader, ByteWriter};
use crate::error::{Error, Result};
use crate::scalar::{euclidean, Real};

/// Magic of serialized feature sequences.
pub const SEQUENCE_MAGIC: [u8; 4] = *b"FSEQ";
/// Frame rate assumed when none is supplied (Hz).
pub const DEFAULT_FRAME_RATE: f64 = 30.0;

/// A time-ordered sequence of equal-length feature frames.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence<R> {
    frames: Vec<Vec<R>>,
    dim: usize,
    /// Frames per second. Runtime metadata only — not serialized.
    pub frame_rate: f64,
}

impl<R: Real> FeatureSequence<R> {
    /// Builds a sequence, validating that it is non-empty, that every
    /// frame has the same dimension, and that all values are finite.
    pub fn new(frames: Vec<Vec<R>>) -> Result<Self> {
        let Some(first) = frames.first() else {
            return Err(Error::input("feature sequence is empty".to_string()));
        };
        let dim = first.len();
        if dim == 0 {
            return Err(Error::input(
                "feature frames are zero-dimensional".to_string(),
            ));
        }
        for (t, f) in frames.iter().enumerate() {
            if f.len() != dim {
                return Err(Error::input(format!(
                    "frame {t} has {} features, expected {dim}",
                    f.len()
                )));
            }
            if f.iter().any(|v| !v.is_finite()) {
                return Err(Error::input(format!("frame {t} has a non-finite feature")));
            }
        }
        Ok(FeatureSequence {
            frames,
            dim,
            frame_rate: DEFAULT_FRAME_RATE,
        })
    }

    /// Same sequence with an explicit frame rate.
    pub fn with_frame_rate(mut self, rate: f64) -> Result<Self> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::input(format!(
                "frame rate {rate} must be positive and finite"
            )));
        }
        self.frame_rate = rate;
        Ok(self)
    }

    /// Number of frames.
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    /// Always false — empty sequences cannot be constructed.
    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Feature dimension.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// All frames, oldest first.
    pub fn frames(&self) -> &[Vec<R>] {
        &self.frames
    }

    /// One frame.
    pub fn frame(&self, t: usize) -> &[R] {
        &self.frames[t]
    }

    /// Serializes to the `FSEQ` layout.
    pub fn serialize(&self) -> Vec<u8> {
        let mut w = ByteWriter::new();
        w.bytes(&SEQUENCE_MAGIC);
        w.u32(self.dim as u32);
        w.u32(self.frames.len() as u32);
        for f in &self.frames {
            for &v in f {
                w.f64(v.to_f64_lossy());
            }
        }
        w.into_bytes()
    }

    /// Parses the `FSEQ` layout (frame rate defaults).
    pub fn deserialize(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes, "feature sequence");
        r.magic_only(SEQUENCE_MAGIC)?;
        let dim = r.len_capped(1 << 20, "feature dimension")?;
        let count = r.len_capped(1 << 28, "frame count")?;
        let mut frames = Vec::with_capacity(count);
        for _ in 0..count {
            frames.push(r.f64_vec(dim)?.into_iter().map(R::of).collect());
        }
        r.finish()?;
        FeatureSequence::new(frames)
    }

    /// Writes the `FSEQ` layout to a file.
    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.serialize())?;
        Ok(())
    }

    /// Reads an `FSEQ` file.
    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::deserialize(&std::fs::read(path)?)
    }
}

/// An optimal warping path between two sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentPath<R> {
    /// Matched index pairs `(i, j)` from `(0,0)` to `(n−1,m−1)`,
    /// monotone in both coordinates.
    pub pairs: Vec<(usize, usize)>,
    /// Sum of pair costs along the path.
    pub total_cost: R,
}

/// Aligns two sequences with an unconstrained warp.
pub fn dtw<R: Real>(a: &FeatureSequence<R>, b: &FeatureSequence<R>) -> Result<AlignmentPath<R>> {
    dtw_with_band(a, b, None)
}

/// Aligns two sequences, optionally confined to a Sakoe–Chiba band
/// (`|i − j| ≤ band`).
pub fn dtw_with_band<R: Real>(
    a: &FeatureSequence<R>,
    b: &FeatureSequence<R>,
    band: Option<usize>,
) -> Result<AlignmentPath<R>> {
    if a.dim() != b.dim() {
        return Err(Error::input(format!(
            "cannot align {}-dimensional features with {}-dimensional",
            a.dim(),
            b.dim()
        )));
    }
    let (n, m) = (a.len(), b.len());
    if let Some(band) = band {
        if band < n.abs_diff(m) {
            return Err(Error::input(format!(
                "band {band} cannot connect sequences of lengths {n} and {m}"
            )));
        }
    }
    let in_band = |i: usize, j: usize| band.is_none_or(|r| i.abs_diff(j) <= r);

    // Full DP table; out-of-band cells stay at +∞.
    let inf = R::infinity();
    let mut acc = vec![inf; n * m];
    let idx = |i: usize, j: usize| i * m + j;
    for i in 0..n {
        for j in 0..m {
            if !in_band(i, j) {
                continue;
            }
            let d = euclidean(a.frame(i), b.frame(j));
            let best = match (i, j) {
                (0, 0) => R::zero(),
                (0, _) => acc[idx(0, j - 1)],
                (_, 0) => acc[idx(i - 1, 0)],
                _ => {
                    let diag = acc[idx(i - 1, j - 1)];
                    let up = acc[idx(i - 1, j)];
                    let left = acc[idx(i, j - 1)];
                    diag.min(up).min(left)
                }
            };
            acc[idx(i, j)] = d + best;
        }
    }
    let total_cost = acc[idx(n - 1, m - 1)];
    debug_assert!(total_cost.is_finite(), "band admits the endpoint");

    // Traceback, deterministic under ties: diagonal, then advancing
    // the first sequence, then the second.
    let mut pairs = vec![(n - 1, m - 1)];
    let (mut i, mut j) = (n - 1, m - 1);
    while i > 0 || j > 0 {
        let (pi, pj) = if i == 0 {
            (0, j - 1)
        } else if j == 0 {
            (i - 1, 0)
        } else {
            let diag = acc[idx(i - 1, j - 1)];
            let up = acc[idx(i - 1, j)];
            let left = acc[idx(i, j - 1)];
            if diag <= up && diag <= left {
                (i - 1, j - 1)
            } else if up <= left {
                (i - 1, j)
            } else {
                (i, j - 1)
            }
        };
        pairs.push((pi, pj));
        i = pi;
        j = pj;
    }
    pairs.reverse();
    Ok(AlignmentPath { pairs, total_cost })
}

/// Warps `seq` onto the reference timeline of an alignment: output
/// frame `i` is the mean of the `seq` frames matched to reference
/// index `i`. `path` must come from aligning the reference (first
/// index) with `seq` (second index).
pub fn warp_to_reference<R: Real>(
    path: &AlignmentPath<R>,
    seq: &FeatureSequence<R>,
) -> Result<FeatureSequence<R>> {
    let n = path
        .pairs
        .last()
        .ok_or_else(|| Error::input("empty alignment path".to_string()))?
        .0
        + 1;
    let mut frames = vec![vec![R::zero(); seq.dim()]; n];
    let mut counts = vec![0usize; n];
    for &(i, j) in &path.pairs {
        if i >= n || j >= seq.len() {
            return Err(Error::input(format!(
                "alignment pair ({i}, {j}) is out of range"
            )));
        }
        for (d, &v) in seq.frame(j).iter().enumerate() {
            frames[i][d] += v;
        }
        counts[i] += 1;
    }
    for (f, &c) in frames.iter_mut().zip(&counts) {
        if c == 0 {
            return Err(Error::input(
                "alignment path skips a reference frame".to_string(),
            ));
        }
        let inv = R::one() / R::of(c as f64);
        for v in f.iter_mut() {
            *v *= inv;
        }
    }
    let rate = seq.frame_rate;
    FeatureSequence::new(frames)?.with_frame_rate(rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prng::Pcg32;

    fn seq(frames: &[&[f64]]) -> FeatureSequence<f64> {
        FeatureSequence::new(frames.iter().map(|f| f.to_vec()).collect()).unwrap()
    }

    /// Minimal path cost by brute-force enumeration of every monotone
    /// path (reference for the DP).
    fn exhaustive_cost(a: &FeatureSequence<f64>, b: &FeatureSequence<f64>) -> f64 {
        fn go(a: &FeatureSequence<f64>, b: &FeatureSequence<f64>, i: usize, j: usize) -> f64 {
            let d = crate::scalar::euclidean(a.frame(i), b.frame(j));
            if i + 1 == a.len() && j + 1 == b.len() {
                return d;
            }
            let mut best = f64::INFINITY;
            if i + 1 < a.len() {
                best = best.min(go(a, b, i + 1, j));
            }
            if j + 1 < b.len() {
                best = best.min(go(a, b, i, j + 1));
            }
            if i + 1 < a.len() && j + 1 < b.len() {
                best = best.min(go(a, b, i + 1, j + 1));
            }
            d + best
        }
        go(a, b, 0, 0)
    }

    fn path_cost(
        path: &AlignmentPath<f64>,
        a: &FeatureSequence<f64>,
        b: &FeatureSequence<f64>,
    ) -> f64 {
        path.pairs
            .iter()
            .map(|&(i, j)| crate::scalar::euclidean(a.frame(i), b.frame(j)))
            .sum()
    }

    fn assert_valid_path(path: &AlignmentPath<f64>, n: usize, m: usize) {
        assert_eq!(*path.pairs.first().unwrap(), (0, 0));
        assert_eq!(*path.pairs.last().unwrap(), (n - 1, m - 1));
        for w in path.pairs.windows(2) {
            let (di, dj) = (w[1].0 - w[0].0, w[1].1 - w[0].1);
            assert!(
                matches!((di, dj), (0, 1) | (1, 0) | (1, 1)),
                "illegal step {:?} -> {:?}",
                w[0],
                w[1]
            );
        }
    }

    #[test]
    fn identical_sequences_align_on_the_diagonal() {
        let a = seq(&[&[0.0, 1.0], &[0.5, 0.25], &[1.0, 0.0]]);
        let path = dtw(&a, &a).unwrap();
        assert_eq!(path.total_cost, 0.0);
        assert_eq!(path.pairs, vec![(0, 0), (1, 1), (2, 2)]);
    }

    #[test]
    fn all_equal_frames_tie_break_to_the_diagonal() {
        let a = seq(&[&[0.5], &[0.5], &[0.5], &[0.5]]);
        let path = dtw(&a, &a).unwrap();
        // Every path costs zero; the tie-break must still walk the
        // diagonal.
        assert_eq!(path.pairs, vec![(0, 0), (1, 1), (2, 2), (3, 3)]);
    }

    #[test]
    fn hand_worked_three_by_two_case() {
        let a = seq(&[&[0.0], &[1.0], &[2.0]]);
        let b = seq(&[&[0.0], &[2.0]]);
        let path = dtw(&a, &b).unwrap();
        // Costs: pairing (1,·) contributes 1 on either column; the
        // optimum matches 0↔0, 1↔0, 2↔2 for a total of 1, and the
        // diagonal-first tie-break picks exactly that path.
        assert!((path.total_cost - 1.0).abs() < 1e-15);
        assert_eq!(path.pairs, vec![(0, 0), (1, 0), (2, 1)]);
    }

    #[test]
    fn matches_exhaustive_enumeration_on_small_inputs() {
        let mut rng = Pcg32::new(77, 0);
        for case in 0..60 {
            let n = 1 + rng.next_below(6) as usize;
            let m = 1 + rng.next_below(6) as usize;
            let d = 1 + rng.next_below(3) as usize;
            let gen = |rng: &mut Pcg32, len: usize| {
                FeatureSequence::new(
                    (0..len)
                        .map(|_| (0..d).map(|_| rng.uniform(-1.0, 1.0)).collect())
                        .collect(),
                )
                .unwrap()
            };
            let a = gen(&mut rng, n);
            let b = gen(&mut rng, m);
            let path = dtw(&a, &b).unwrap();
            assert_valid_path(&path, n, m);
            let brute = exhaustive_cost(&a, &b);
            assert!(
                (path.total_cost - brute).abs() < 1e-12,
                "case {case}: dp {} vs brute {brute}",
                path.total_cost
            );
            assert!(
                (path_cost(&path, &a, &b) - path.total_cost).abs() < 1e-12,
                "case {case}: path sum disagrees with reported cost"
            );
        }
    }

    #[test]
    fn band_constrains_and_validates() {
        let a = seq(&[&[0.0], &[1.0], &[2.0], &[3.0]]);
        let b = seq(&[&[3.0], &[0.0], &[1.0], &[2.0]]);
        let free = dtw(&a, &b).unwrap();
        let banded = dtw_with_band(&a, &b, Some(1)).unwrap();
        assert!(banded.total_cost >= free.total_cost);
        for &(i, j) in &banded.pairs {
            assert!(i.abs_diff(j) <= 1);
        }
        // Band 0 forces the pure diagonal.
        let zero = dtw_with_band(&a, &b, Some(0)).unwrap();
        assert_eq!(zero.pairs, vec![(0, 0), (1, 1), (2, 2), (3, 3)]);
        // A band narrower than the length difference cannot reach the
        // endpoint.
        let short = seq(&[&[0.0]]);
        assert!(dtw_with_band(&a, &short, Some(1)).is_err());
        assert!(dtw_with_band(&a, &short, Some(3)).is_ok());
    }

    #[test]
    fn rejects_dimension_mismatch_and_bad_frames() {
        let a = seq(&[&[0.0, 1.0]]);
        let b = seq(&[&[0.0]]);
        assert!(dtw(&a, &b).is_err());
        assert!(FeatureSequence::<f64>::new(vec![]).is_err());
        assert!(FeatureSequence::<f64>::new(vec![vec![]]).is_err());
        assert!(FeatureSequence::new(vec![vec![0.0], vec![0.0, 1.0]]).is_err());
        assert!(FeatureSequence::new(vec![vec![f64::NAN]]).is_err());
        assert!(seq(&[&[1.0]]).with_frame_rate(0.0).is_err());
    }

    #[test]
    fn fseq_bytes_are_exactly_specified() {
        let s = seq(&[&[1.0, 2.0], &[3.0, 4.0], &[5.0, 6.0]]);
        let bytes = s.serialize();
        let mut expect = Vec::new();
        expect.extend_from_slice(b"FSEQ");
        expect.extend_from_slice(&2u32.to_le_bytes());
        expect.extend_from_slice(&3u32.to_le_bytes());
        for v in [1.0f64, 2.0, 3.0, 4.0, 5.0, 6.0] {
            expect.extend_from_slice(&v.to_le_bytes());
        }
        assert_eq!(bytes, expect);
        let back = FeatureSequence::<f64>::deserialize(&bytes).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.frame_rate, DEFAULT_FRAME_RATE);
        assert!(FeatureSequence::<f64>::deserialize(&bytes[..10]).is_err());
        let mut wrong = bytes.clone();
        wrong[0] = b'X';
        assert!(FeatureSequence::<f64>::deserialize(&wrong).is_err());
    }

    #[test]
    fn warp_averages_matched_frames() {
        let reference = seq(&[&[0.0], &[1.0], &[2.0]]);
        let query = seq(&[&[0.0], &[0.5], &[1.5], &[2.0]]);
        let path = dtw(&reference, &query).unwrap();
        // Hand-worked optimum: (0,0),(0,1),(1,2),(2,3) at cost 1.
        assert_eq!(path.pairs, vec![(0, 0), (0, 1), (1, 2), (2, 3)]);
        let warped = warp_to_reference(&path, &query).unwrap();
        assert_eq!(warped.len(), reference.len());
        assert_eq!(warped.dim(), query.dim());
        // Reference frame 0 matched query frames 0 and 1 → their mean.
        assert_eq!(warped.frame(0), &[0.25]);
        assert_eq!(warped.frame(1), &[1.5]);
        assert_eq!(warped.frame(2), &[2.0]);
    }
}
