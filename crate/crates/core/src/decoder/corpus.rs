//! Synthetic paired-performance corpus for decoder training.
//!
//! Real emotion-transfer training data would be captured performances
//! of the same content spoken in several emotional styles. This module
//! fabricates an equivalent in closed form so that ground truth exists
//! for *any* (content, emotion) combination at *any* time point —
//! exactly what cross-reconstruction training needs.
//!
//! The generative model, all drawn deterministically from the spec
//! seed:
//!
//! * content `c` has a smooth latent trajectory
//!   `z_r(u) = sin(2π(f_r·u + φ_r))` over canonical time `u ∈ [0,1]`,
//!   and per-blendshape gains `G_{k}` with ℓ1 mass at most 0.27;
//! * emotion `e` has a unit embedding (emotion 0 is the neutral zero
//!   embedding) giving a per-blendshape style scale
//!   `s_k = 1 + 0.2·(U_k·emb)`, offset `o_k = 0.12·(V_k·emb)`, and a
//!   tempo factor stretching the frame count;
//! * blendshape `k` at time `u` is
//!   `B_k(u) = 0.5 + s_k·(G_k·z(u)) + o_k`, bounded inside
//!   `[0.056, 0.944]` by the mass budgets — no clamping, so the closed
//!   form is exact everywhere;
//! * the observed feature frame is `M·[z(u); emb]` for a fixed
//!   identity-dominant mixing matrix `M`, so features carry the full
//!   latent state at every frame.
//!
//! Tempo is the only thing that changes an item's length, which is
//! what makes the corpus a fair test of time alignment.

use crate::container::{ByteReader, ByteWriter};
use crate::dtw::FeatureSequence;
use crate::error::{Error, Result};
use crate::prng::Pcg32;
use crate::rig::{BlendshapeCoeffs, BLENDSHAPE_COUNT};
use crate::scalar::Real;

/// Magic of serialized corpora.
pub const CORPUS_MAGIC: [u8; 4] = *b"CORP";
/// Current corpus format version.
pub const CORPUS_VERSION: u16 = 1;

/// Content latent dimension.
pub const LATENT_DIM: usize = 3;
/// Emotion embedding dimension.
pub const EMBED_DIM: usize = 3;

const STREAM_CONTENT: u64 = 0;
const STREAM_EMOTION: u64 = 1;
const STREAM_STYLE: u64 = 2;
const STREAM_MIX: u64 = 3;

/// Gain-mass budget: keeps every blendshape inside `(0, 1)` for every
/// emotion (see the module docs for the arithmetic).
const GAIN_MASS: f64 = 0.27;

/// Corpus shape and seed.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct CorpusSpec {
    /// Distinct content trajectories.
    pub contents: usize,
    /// Distinct emotion styles (emotion 0 is always neutral).
    pub emotions: usize,
    /// Frame count at tempo 1; other tempos scale it.
    pub base_frames: usize,
    /// Observed feature dimension (≥ latent + embedding dims).
    pub feature_dim: usize,
    /// Seed for every generated parameter.
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            contents: 4,
            emotions: 3,
            base_frames: 45,
            feature_dim: 6,
            seed: 0,
        }
    }
}

impl CorpusSpec {
    fn validate(&self) -> Result<()> {
        if self.contents == 0 || self.emotions == 0 {
            return Err(Error::config(
                "corpus needs contents and emotions".to_string(),
            ));
        }
        if self.base_frames < 2 {
            return Err(Error::config("base_frames must be at least 2".to_string()));
        }
        if self.feature_dim < LATENT_DIM + EMBED_DIM {
            return Err(Error::config(format!(
                "feature_dim {} cannot carry the {}-dimensional latent state",
                self.feature_dim,
                LATENT_DIM + EMBED_DIM
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
struct ContentParams {
    /// Per-blendshape latent gains, 33 × [`LATENT_DIM`].
    gains: Vec<[f64; LATENT_DIM]>,
    freq: [f64; LATENT_DIM],
    phase: [f64; LATENT_DIM],
}

#[derive(Debug, Clone, PartialEq)]
struct EmotionParams {
    embed: [f64; EMBED_DIM],
    tempo: f64,
}

/// Generative parameters, deterministically derived from the spec.
#[derive(Debug, Clone, PartialEq)]
struct CorpusParams {
    contents: Vec<ContentParams>,
    emotions: Vec<EmotionParams>,
    /// Style-scale projections, 33 unit rows.
    style_u: Vec<[f64; EMBED_DIM]>,
    /// Style-offset projections, 33 unit rows.
    style_v: Vec<[f64; EMBED_DIM]>,
    /// Mixing matrix, row-major `feature_dim × (LATENT_DIM + EMBED_DIM)`.
    mix: Vec<f64>,
}

fn unit_vector<const N: usize>(rng: &mut Pcg32) -> [f64; N] {
    loop {
        let mut v = [0.0; N];
        for x in v.iter_mut() {
            *x = rng.uniform(-1.0, 1.0);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-3 {
            for x in v.iter_mut() {
                *x /= norm;
            }
            return v;
        }
    }
}

fn build_params(spec: &CorpusSpec) -> CorpusParams {
    let mut rng = Pcg32::new(spec.seed, STREAM_CONTENT);
    let contents = (0..spec.contents)
        .map(|_| {
            let mut freq = [0.0; LATENT_DIM];
            let mut phase = [0.0; LATENT_DIM];
            for r in 0..LATENT_DIM {
                freq[r] = rng.uniform(0.5, 2.0);
                phase[r] = rng.uniform(0.0, 1.0);
            }
            let gains = (0..BLENDSHAPE_COUNT)
                .map(|_| {
                    let mut g = [0.0; LATENT_DIM];
                    let mut mass = 0.0;
                    for x in g.iter_mut() {
                        *x = rng.uniform(-1.0, 1.0);
                        mass += x.abs();
                    }
                    let target = GAIN_MASS * rng.uniform(0.5, 1.0);
                    let scale = if mass > 1e-9 { target / mass } else { 0.0 };
                    g.map(|x| x * scale)
                })
                .collect();
            ContentParams { gains, freq, phase }
        })
        .collect();

    let mut rng = Pcg32::new(spec.seed, STREAM_EMOTION);
    let emotions = (0..spec.emotions)
        .map(|e| {
            if e == 0 {
                // Neutral: identity style, unit tempo.
                EmotionParams {
                    embed: [0.0; EMBED_DIM],
                    tempo: 1.0,
                }
            } else {
                let embed = unit_vector(&mut rng);
                let tempo = rng.uniform(0.75, 1.3);
                EmotionParams { embed, tempo }
            }
        })
        .collect();

    let mut rng = Pcg32::new(spec.seed, STREAM_STYLE);
    let style_u = (0..BLENDSHAPE_COUNT)
        .map(|_| unit_vector(&mut rng))
        .collect();
    let style_v = (0..BLENDSHAPE_COUNT)
        .map(|_| unit_vector(&mut rng))
        .collect();

    let mut rng = Pcg32::new(spec.seed, STREAM_MIX);
    let cols = LATENT_DIM + EMBED_DIM;
    let mix = (0..spec.feature_dim * cols)
        .map(|i| {
            let (row, col) = (i / cols, i % cols);
            let noise = 0.3 * rng.uniform(-1.0, 1.0);
            if row == col {
                1.0 + noise
            } else {
                noise
            }
        })
        .collect();

    CorpusParams {
        contents,
        emotions,
        style_u,
        style_v,
        mix,
    }
}

fn dot<const N: usize>(a: &[f64; N], b: &[f64; N]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl CorpusParams {
    fn latent(&self, content: usize, u: f64) -> [f64; LATENT_DIM] {
        let c = &self.contents[content];
        let mut z = [0.0; LATENT_DIM];
        for (r, slot) in z.iter_mut().enumerate() {
            *slot = (std::f64::consts::TAU * (c.freq[r] * u + c.phase[r])).sin();
        }
        z
    }

    fn blendshapes(&self, content: usize, emotion: usize, u: f64) -> [f64; BLENDSHAPE_COUNT] {
        let z = self.latent(content, u);
        let emb = &self.emotions[emotion].embed;
        let gains = &self.contents[content].gains;
        let mut b = [0.0; BLENDSHAPE_COUNT];
        for k in 0..BLENDSHAPE_COUNT {
            let s = 1.0 + 0.2 * dot(&self.style_u[k], emb);
            let o = 0.12 * dot(&self.style_v[k], emb);
            b[k] = 0.5 + s * dot(&gains[k], &z) + o;
        }
        b
    }

    fn features(&self, content: usize, emotion: usize, u: f64, dim: usize) -> Vec<f64> {
        let z = self.latent(content, u);
        let emb = &self.emotions[emotion].embed;
        let cols = LATENT_DIM + EMBED_DIM;
        let mut state = [0.0; LATENT_DIM + EMBED_DIM];
        state[..LATENT_DIM].copy_from_slice(&z);
        state[LATENT_DIM..].copy_from_slice(emb);
        (0..dim)
            .map(|i| {
                self.mix[i * cols..(i + 1) * cols]
                    .iter()
                    .zip(&state)
                    .map(|(m, x)| m * x)
                    .sum()
            })
            .collect()
    }
}

/// One performance: a content trajectory rendered in one emotion.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusItem<R> {
    /// Content index.
    pub content: usize,
    /// Emotion index.
    pub emotion: usize,
    /// Observed per-frame features.
    pub features: FeatureSequence<R>,
    /// Ground-truth blendshape coefficients, one per frame.
    pub blendshapes: Vec<BlendshapeCoeffs<R>>,
}

/// The generated corpus: every (content, emotion) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus<R> {
    /// Shape and seed the corpus was generated from.
    pub spec: CorpusSpec,
    /// Items in content-major order.
    pub items: Vec<CorpusItem<R>>,
    params: CorpusParams,
}

/// Canonical sample times for a `len`-frame item: `t / (len − 1)`.
pub fn canonical_times(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![0.0];
    }
    (0..len).map(|t| t as f64 / (len - 1) as f64).collect()
}

/// Generates the full corpus for a spec.
pub fn generate_corpus<R: Real>(spec: &CorpusSpec) -> Result<SynthCorpus<R>> {
    spec.validate()?;
    let params = build_params(spec);
    let mut items = Vec::with_capacity(spec.contents * spec.emotions);
    for c in 0..spec.contents {
        for e in 0..spec.emotions {
            let tempo = params.emotions[e].tempo;
            let frames = ((spec.base_frames as f64) * tempo).round().max(2.0) as usize;
            let times = canonical_times(frames);
            let features = FeatureSequence::new(
                times
                    .iter()
                    .map(|&u| {
                        params
                            .features(c, e, u, spec.feature_dim)
                            .into_iter()
                            .map(R::of)
                            .collect()
                    })
                    .collect(),
            )?;
            let blendshapes = times
                .iter()
                .map(|&u| {
                    let b = params.blendshapes(c, e, u);
                    BlendshapeCoeffs::from_slice(&b.map(R::of))
                })
                .collect::<Result<_>>()?;
            items.push(CorpusItem {
                content: c,
                emotion: e,
                features,
                blendshapes,
            });
        }
    }
    Ok(SynthCorpus {
        spec: spec.clone(),
        items,
        params,
    })
}

impl<R: Real> SynthCorpus<R> {
    /// Looks up the item for a (content, emotion) cell.
    pub fn item(&self, content: usize, emotion: usize) -> Result<&CorpusItem<R>> {
        self.items
            .iter()
            .find(|i| i.content == content && i.emotion == emotion)
            .ok_or_else(|| {
                Error::input(format!(
                    "corpus has no item for content {content}, emotion {emotion}"
                ))
            })
    }

    /// Exact ground-truth blendshapes for `content` performed with
    /// `emotion`, sampled at canonical times in `[0,1]` — including
    /// combinations no corpus item was rendered for.
    pub fn aligned_ground_truth(
        &self,
        content: usize,
        emotion: usize,
        times: &[f64],
    ) -> Result<Vec<BlendshapeCoeffs<R>>> {
        if content >= self.spec.contents || emotion >= self.spec.emotions {
            return Err(Error::input(format!(
                "no such corpus cell: content {content}, emotion {emotion}"
            )));
        }
        times
            .iter()
            .map(|&u| {
                if !(0.0..=1.0).contains(&u) {
                    return Err(Error::input(format!("canonical time {u} outside [0, 1]")));
                }
                BlendshapeCoeffs::from_slice(
                    &self.params.blendshapes(content, emotion, u).map(R::of),
                )
            })
            .collect()
    }

    /// Serializes to the `CORP` container.
    pub fn serialize(&self) -> Vec<u8> {
        let mut w = ByteWriter::with_header(CORPUS_MAGIC, CORPUS_VERSION);
        w.u32(self.spec.contents as u32);
        w.u32(self.spec.emotions as u32);
        w.u32(self.spec.base_frames as u32);
        w.u32(self.spec.feature_dim as u32);
        w.u64(self.spec.seed);
        w.u32(self.items.len() as u32);
        for item in &self.items {
            w.u32(item.content as u32);
            w.u32(item.emotion as u32);
            w.u32(item.features.len() as u32);
            for f in item.features.frames() {
                for &v in f {
                    w.f64(v.to_f64_lossy());
                }
            }
            for b in &item.blendshapes {
                for &v in b.values() {
                    w.f64(v.to_f64_lossy());
                }
            }
        }
        w.into_bytes()
    }

    /// Parses a `CORP` container, re-deriving the generative
    /// parameters from the stored spec.
    pub fn deserialize(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes, "corpus");
        r.header(CORPUS_MAGIC, CORPUS_VERSION)?;
        let spec = CorpusSpec {
            contents: r.len_capped(1 << 16, "content count")?,
            emotions: r.len_capped(1 << 16, "emotion count")?,
            base_frames: r.len_capped(1 << 24, "base frame count")?,
            feature_dim: r.len_capped(1 << 16, "feature dimension")?,
            seed: r.u64()?,
        };
        spec.validate()?;
        let params = build_params(&spec);
        let n_items = r.len_capped(1 << 20, "item count")?;
        let mut items = Vec::with_capacity(n_items);
        for _ in 0..n_items {
            let content = r.u32()? as usize;
            let emotion = r.u32()? as usize;
            if content >= spec.contents || emotion >= spec.emotions {
                return Err(Error::format(format!(
                    "corpus: item cell ({content}, {emotion}) outside spec"
                )));
            }
            let frames = r.len_capped(1 << 24, "item frame count")?;
            let mut feats = Vec::with_capacity(frames);
            for _ in 0..frames {
                feats.push(
                    r.f64_vec(spec.feature_dim)?
                        .into_iter()
                        .map(R::of)
                        .collect(),
                );
            }
            let mut blendshapes = Vec::with_capacity(frames);
            for _ in 0..frames {
                let vals: Vec<R> = r
                    .f64_vec(BLENDSHAPE_COUNT)?
                    .into_iter()
                    .map(R::of)
                    .collect();
                blendshapes.push(BlendshapeCoeffs::from_slice(&vals)?);
            }
            items.push(CorpusItem {
                content,
                emotion,
                features: FeatureSequence::new(feats)?,
                blendshapes,
            });
        }
        r.finish()?;
        Ok(SynthCorpus {
            spec,
            items,
            params,
        })
    }

    /// Writes the `CORP` container to a file.
    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.serialize())?;
        Ok(())
    }

    /// Reads a `CORP` container from a file.
    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::deserialize(&std::fs::read(path)?)
    }
}
