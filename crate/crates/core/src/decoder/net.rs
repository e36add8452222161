//! The emotion-conditioned blendshape decoder network.
//!
//! Maps a sequence of per-frame features to per-frame blendshape
//! coefficients. Content and emotion take strictly separate routes
//! into the network:
//!
//! * **content** features are encoded per frame, given sinusoidal
//!   positional encodings, and drive a single multi-head attention
//!   block as query, key, *and* value;
//! * **emotion** features enter only as an additive per-head bias on
//!   the attention logits, `β_h(s) = w_h · E_e(a_s) + c_h`, applied at
//!   key position `s`. Emotion can reweight which content frames are
//!   attended, but contributes no value content of its own.
//!
//! The attended output (with a residual from the content token) feeds
//! a two-layer FFN and a sigmoid onto the 33 coefficients. All
//! gradients are hand-derived reverse mode; `Adam` in [`crate::nn`]
//! consumes the flattened parameter/gradient vectors.
//!
//! Both input sequences must have equal length: the caller aligns them
//! (see [`super::infer_blendshapes`], which warps the emotion sequence
//! onto the content timeline when lengths differ).

use crate::container::{ByteReader, ByteWriter};
use crate::dtw::FeatureSequence;
use crate::error::{Error, Result};
use crate::nn::{sigmoid, softmax_inplace, Activation, Dense, DenseGrads, Mlp, MlpCache, MlpGrads};
use crate::prng::Pcg32;
use crate::rig::{BlendshapeCoeffs, BLENDSHAPE_COUNT};
use crate::scalar::Real;

/// Magic of serialized decoder models.
pub const DECODER_MAGIC: [u8; 4] = *b"EDEC";
/// Current decoder format version.
pub const DECODER_VERSION: u16 = 1;

const STREAM_CONTENT_ENC: u64 = 0;
const STREAM_EMOTION_ENC: u64 = 1;
const STREAM_ATTENTION: u64 = 2;
const STREAM_BIAS: u64 = 3;
const STREAM_FFN: u64 = 4;

/// Decoder architecture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct DecoderConfig {
    /// Input feature dimension.
    pub feature_dim: usize,
    /// Token width (shared by encoders, attention, FFN hidden).
    pub width: usize,
    /// Attention heads (must divide `width`).
    pub heads: usize,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        DecoderConfig {
            feature_dim: 6,
            width: 64,
            heads: 2,
        }
    }
}

impl DecoderConfig {
    fn validate(&self) -> Result<()> {
        if self.feature_dim == 0 {
            return Err(Error::config("feature_dim must be positive".to_string()));
        }
        if self.heads == 0 || self.width == 0 {
            return Err(Error::config(
                "width and heads must be positive".to_string(),
            ));
        }
        if !self.width.is_multiple_of(self.heads) {
            return Err(Error::config(format!(
                "width {} is not divisible by heads {}",
                self.width, self.heads
            )));
        }
        Ok(())
    }
}

/// Sinusoidal positional encoding for frame `t`.
fn positional_encoding<R: Real>(t: usize, width: usize) -> Vec<R> {
    (0..width)
        .map(|i| {
            let omega = 10000f64.powf(-((i / 2 * 2) as f64) / width as f64);
            let angle = t as f64 * omega;
            R::of(if i % 2 == 0 { angle.sin() } else { angle.cos() })
        })
        .collect()
}

/// The decoder network.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderModel<R> {
    /// Architecture.
    pub config: DecoderConfig,
    /// Initialization seed.
    pub seed: u64,
    /// Per-frame content encoder (`feature_dim → width`).
    pub content_encoder: Mlp<R>,
    /// Per-frame emotion encoder (`feature_dim → width`).
    pub emotion_encoder: Mlp<R>,
    /// Attention-bias weights, row-major `heads × width`.
    pub bias_w: Vec<R>,
    /// Attention-bias offsets, one per head.
    pub bias_c: Vec<R>,
    /// Query projection.
    pub query: Dense<R>,
    /// Key projection.
    pub key: Dense<R>,
    /// Value projection.
    pub value: Dense<R>,
    /// Post-attention output projection.
    pub output: Dense<R>,
    /// Head network (`width → width → 33`, sigmoid applied after).
    pub ffn: Mlp<R>,
}

/// Gradient buffers mirroring [`DecoderModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderGrads<R> {
    /// Content-encoder gradients.
    pub content_encoder: MlpGrads<R>,
    /// Emotion-encoder gradients.
    pub emotion_encoder: MlpGrads<R>,
    /// Bias-weight gradients.
    pub bias_w: Vec<R>,
    /// Bias-offset gradients.
    pub bias_c: Vec<R>,
    /// Query gradients.
    pub query: DenseGrads<R>,
    /// Key gradients.
    pub key: DenseGrads<R>,
    /// Value gradients.
    pub value: DenseGrads<R>,
    /// Output-projection gradients.
    pub output: DenseGrads<R>,
    /// FFN gradients.
    pub ffn: MlpGrads<R>,
}

impl<R: Real> DecoderGrads<R> {
    /// Resets all buffers to zero.
    pub fn zero(&mut self) {
        self.content_encoder.zero();
        self.emotion_encoder.zero();
        self.bias_w.iter_mut().for_each(|g| *g = R::zero());
        self.bias_c.iter_mut().for_each(|g| *g = R::zero());
        self.query.zero();
        self.key.zero();
        self.value.zero();
        self.output.zero();
        self.ffn.zero();
    }

    /// Gradients flattened in the canonical parameter order.
    pub fn flatten(&self) -> Vec<R> {
        let mut out = Vec::new();
        self.content_encoder.visit(|g| out.push(g));
        self.emotion_encoder.visit(|g| out.push(g));
        out.extend_from_slice(&self.bias_w);
        out.extend_from_slice(&self.bias_c);
        for d in [&self.query, &self.key, &self.value, &self.output] {
            out.extend_from_slice(&d.w);
            out.extend_from_slice(&d.b);
        }
        self.ffn.visit(|g| out.push(g));
        out
    }
}

/// Forward-pass cache for [`DecoderModel::backward`].
#[derive(Debug, Clone)]
pub struct DecoderCache<R> {
    len: usize,
    ec: Vec<MlpCache<R>>,
    ee: Vec<MlpCache<R>>,
    tokens: Vec<Vec<R>>,
    q: Vec<Vec<R>>,
    k: Vec<Vec<R>>,
    v: Vec<Vec<R>>,
    /// `heads × len × len` attention weights (query-major).
    alpha: Vec<Vec<Vec<R>>>,
    concat: Vec<Vec<R>>,
    ffn: Vec<MlpCache<R>>,
    out: Vec<Vec<R>>,
}

impl<R: Real> DecoderCache<R> {
    /// Post-sigmoid outputs, one row of 33 per frame.
    pub fn outputs(&self) -> &[Vec<R>] {
        &self.out
    }

    /// Frames in the cached pass.
    pub fn len(&self) -> usize {
        self.len
    }

    /// Never true: forward passes require at least one frame.
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

impl<R: Real> DecoderModel<R> {
    /// Fresh model with seeded initialization.
    pub fn new(config: DecoderConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let (d, w) = (config.feature_dim, config.width);
        let content_encoder = Mlp::init(
            &[d, w, w],
            Activation::Tanh,
            &mut Pcg32::new(seed, STREAM_CONTENT_ENC),
        )?;
        let emotion_encoder = Mlp::init(
            &[d, w, w],
            Activation::Tanh,
            &mut Pcg32::new(seed, STREAM_EMOTION_ENC),
        )?;
        let mut rng = Pcg32::new(seed, STREAM_ATTENTION);
        let query = Dense::init(w, w, &mut rng);
        let key = Dense::init(w, w, &mut rng);
        let value = Dense::init(w, w, &mut rng);
        let output = Dense::init(w, w, &mut rng);
        let mut rng = Pcg32::new(seed, STREAM_BIAS);
        let bound = 1.0 / (w as f64).sqrt();
        let bias_w = (0..config.heads * w)
            .map(|_| R::of(rng.uniform(-bound, bound)))
            .collect();
        let bias_c = vec![R::zero(); config.heads];
        let ffn = Mlp::init(
            &[w, w, BLENDSHAPE_COUNT],
            Activation::Tanh,
            &mut Pcg32::new(seed, STREAM_FFN),
        )?;
        Ok(DecoderModel {
            config,
            seed,
            content_encoder,
            emotion_encoder,
            bias_w,
            bias_c,
            query,
            key,
            value,
            output,
            ffn,
        })
    }

    fn check_inputs(
        &self,
        content: &FeatureSequence<R>,
        emotion: &FeatureSequence<R>,
    ) -> Result<()> {
        if content.dim() != self.config.feature_dim || emotion.dim() != self.config.feature_dim {
            return Err(Error::input(format!(
                "decoder expects {}-dimensional features, got {} (content) and {} (emotion)",
                self.config.feature_dim,
                content.dim(),
                emotion.dim()
            )));
        }
        if content.len() != emotion.len() {
            return Err(Error::input(format!(
                "content ({} frames) and emotion ({} frames) must be aligned to equal length",
                content.len(),
                emotion.len()
            )));
        }
        Ok(())
    }

    /// Full forward pass, caching everything the backward pass needs.
    pub fn forward_cached(
        &self,
        content: &FeatureSequence<R>,
        emotion: &FeatureSequence<R>,
    ) -> Result<DecoderCache<R>> {
        self.check_inputs(content, emotion)?;
        let t_len = content.len();
        let w = self.config.width;
        let heads = self.config.heads;
        let dh = w / heads;
        let inv_sqrt = R::of(1.0 / (dh as f64).sqrt());

        let mut ec = Vec::with_capacity(t_len);
        let mut tokens = Vec::with_capacity(t_len);
        for t in 0..t_len {
            let cache = self.content_encoder.forward_cached(content.frame(t));
            let mut token = self.content_encoder.output(&cache).to_vec();
            for (x, p) in token.iter_mut().zip(positional_encoding::<R>(t, w)) {
                *x += p;
            }
            ec.push(cache);
            tokens.push(token);
        }

        let mut ee = Vec::with_capacity(t_len);
        let mut beta = vec![vec![R::zero(); t_len]; heads];
        for (s, frame) in emotion.frames().iter().enumerate() {
            let cache = self.emotion_encoder.forward_cached(frame);
            let e = self.emotion_encoder.output(&cache);
            for (h, beta_row) in beta.iter_mut().enumerate() {
                let row = &self.bias_w[h * w..(h + 1) * w];
                let mut acc = self.bias_c[h];
                for (wk, ek) in row.iter().zip(e) {
                    acc += *wk * *ek;
                }
                beta_row[s] = acc;
            }
            ee.push(cache);
        }

        let q: Vec<Vec<R>> = tokens.iter().map(|t| self.query.forward(t)).collect();
        let k: Vec<Vec<R>> = tokens.iter().map(|t| self.key.forward(t)).collect();
        let v: Vec<Vec<R>> = tokens.iter().map(|t| self.value.forward(t)).collect();

        let mut alpha = vec![vec![vec![R::zero(); t_len]; t_len]; heads];
        let mut concat = vec![vec![R::zero(); w]; t_len];
        for h in 0..heads {
            let hs = h * dh..(h + 1) * dh;
            for t in 0..t_len {
                let logits = &mut alpha[h][t];
                for (s, l) in logits.iter_mut().enumerate() {
                    let mut acc = beta[h][s];
                    for (qi, ki) in q[t][hs.clone()].iter().zip(&k[s][hs.clone()]) {
                        acc += *qi * *ki * inv_sqrt;
                    }
                    *l = acc;
                }
                softmax_inplace(logits);
                for s in 0..t_len {
                    let a = logits[s];
                    for (ci, vi) in concat[t][hs.clone()].iter_mut().zip(&v[s][hs.clone()]) {
                        *ci += a * *vi;
                    }
                }
            }
        }

        let mut ffn = Vec::with_capacity(t_len);
        let mut out = Vec::with_capacity(t_len);
        for t in 0..t_len {
            let proj = self.output.forward(&concat[t]);
            let y: Vec<R> = tokens[t].iter().zip(&proj).map(|(a, b)| *a + *b).collect();
            let cache = self.ffn.forward_cached(&y);
            out.push(
                self.ffn
                    .output(&cache)
                    .iter()
                    .map(|&f| sigmoid(f))
                    .collect(),
            );
            ffn.push(cache);
        }

        Ok(DecoderCache {
            len: t_len,
            ec,
            ee,
            tokens,
            q,
            k,
            v,
            alpha,
            concat,
            ffn,
            out,
        })
    }

    /// Decodes blendshape coefficients for aligned content/emotion
    /// feature sequences.
    pub fn decode(
        &self,
        content: &FeatureSequence<R>,
        emotion: &FeatureSequence<R>,
    ) -> Result<Vec<BlendshapeCoeffs<R>>> {
        let cache = self.forward_cached(content, emotion)?;
        Ok(cache
            .out
            .iter()
            .map(|row| BlendshapeCoeffs::from_slice(row).expect("sigmoid output is in [0,1]"))
            .collect())
    }

    /// Accumulates parameter gradients for one cached pass.
    ///
    /// `grad_out` is `∂L/∂out` for the post-sigmoid outputs, one row of
    /// 33 per frame.
    pub fn backward(
        &self,
        cache: &DecoderCache<R>,
        grad_out: &[Vec<R>],
        grads: &mut DecoderGrads<R>,
    ) {
        let t_len = cache.len;
        debug_assert_eq!(grad_out.len(), t_len);
        let w = self.config.width;
        let heads = self.config.heads;
        let dh = w / heads;
        let inv_sqrt = R::of(1.0 / (dh as f64).sqrt());

        // Head: sigmoid → FFN → split into residual + projection.
        let mut dtoken = vec![vec![R::zero(); w]; t_len];
        let mut dconcat = Vec::with_capacity(t_len);
        for t in 0..t_len {
            let out = &cache.out[t];
            let df: Vec<R> = grad_out[t]
                .iter()
                .zip(out)
                .map(|(&g, &o)| g * o * (R::one() - o))
                .collect();
            let dy = self.ffn.backward(&cache.ffn[t], &df, &mut grads.ffn);
            for (dt, dyi) in dtoken[t].iter_mut().zip(&dy) {
                *dt += *dyi;
            }
            dconcat.push(
                self.output
                    .backward(&cache.concat[t], &dy, &mut grads.output),
            );
        }

        // Attention: softmax and bilinear terms.
        let mut dq = vec![vec![R::zero(); w]; t_len];
        let mut dk = vec![vec![R::zero(); w]; t_len];
        let mut dv = vec![vec![R::zero(); w]; t_len];
        let mut dbeta = vec![vec![R::zero(); t_len]; heads];
        for h in 0..heads {
            let hs = h * dh..(h + 1) * dh;
            for t in 0..t_len {
                let alpha = &cache.alpha[h][t];
                let dattn = &dconcat[t][hs.clone()];
                let mut dalpha = vec![R::zero(); t_len];
                for s in 0..t_len {
                    let vs = &cache.v[s][hs.clone()];
                    let mut acc = R::zero();
                    for (da, vi) in dattn.iter().zip(vs) {
                        acc += *da * *vi;
                    }
                    dalpha[s] = acc;
                    for (dvi, da) in dv[s][hs.clone()].iter_mut().zip(dattn) {
                        *dvi += alpha[s] * *da;
                    }
                }
                let inner = dalpha
                    .iter()
                    .zip(alpha)
                    .fold(R::zero(), |acc, (da, a)| acc + *da * *a);
                for s in 0..t_len {
                    let dlogit = alpha[s] * (dalpha[s] - inner);
                    dbeta[h][s] += dlogit;
                    let scale = dlogit * inv_sqrt;
                    for i in 0..dh {
                        dq[t][h * dh + i] += scale * cache.k[s][h * dh + i];
                        dk[s][h * dh + i] += scale * cache.q[t][h * dh + i];
                    }
                }
            }
        }

        // Bias parameters and the emotion path.
        for (s, ee_cache) in cache.ee.iter().enumerate() {
            let e = self.emotion_encoder.output(ee_cache);
            let mut de = vec![R::zero(); w];
            for (h, dbeta_row) in dbeta.iter().enumerate() {
                let db = dbeta_row[s];
                grads.bias_c[h] += db;
                for i in 0..w {
                    grads.bias_w[h * w + i] += db * e[i];
                    de[i] += db * self.bias_w[h * w + i];
                }
            }
            self.emotion_encoder
                .backward(ee_cache, &de, &mut grads.emotion_encoder);
        }

        // Q/K/V projections and the content path (positional encodings
        // are constants).
        for t in 0..t_len {
            for (proj, g, buf) in [
                (&self.query, &dq[t], &mut grads.query),
                (&self.key, &dk[t], &mut grads.key),
                (&self.value, &dv[t], &mut grads.value),
            ] {
                let gx = proj.backward(&cache.tokens[t], g, buf);
                for (dt, gi) in dtoken[t].iter_mut().zip(&gx) {
                    *dt += *gi;
                }
            }
            self.content_encoder
                .backward(&cache.ec[t], &dtoken[t], &mut grads.content_encoder);
        }
    }

    /// Zeroed gradient buffers matching this model.
    pub fn zero_grads(&self) -> DecoderGrads<R> {
        DecoderGrads {
            content_encoder: self.content_encoder.zero_grads(),
            emotion_encoder: self.emotion_encoder.zero_grads(),
            bias_w: vec![R::zero(); self.bias_w.len()],
            bias_c: vec![R::zero(); self.bias_c.len()],
            query: self.query.zero_grads(),
            key: self.key.zero_grads(),
            value: self.value.zero_grads(),
            output: self.output.zero_grads(),
            ffn: self.ffn.zero_grads(),
        }
    }

    /// Total parameter count.
    pub fn param_count(&self) -> usize {
        self.content_encoder.param_count()
            + self.emotion_encoder.param_count()
            + self.bias_w.len()
            + self.bias_c.len()
            + self.query.param_count()
            + self.key.param_count()
            + self.value.param_count()
            + self.output.param_count()
            + self.ffn.param_count()
    }

    /// Visits every parameter in canonical order (content encoder,
    /// emotion encoder, bias weights, bias offsets, query/key/value/
    /// output projections, FFN; each dense layer weights-then-bias).
    pub fn visit_params<F: FnMut(R)>(&self, mut f: F) {
        self.content_encoder.visit_params(&mut f);
        self.emotion_encoder.visit_params(&mut f);
        self.bias_w.iter().for_each(|&p| f(p));
        self.bias_c.iter().for_each(|&p| f(p));
        for d in [&self.query, &self.key, &self.value, &self.output] {
            d.w.iter().for_each(|&p| f(p));
            d.b.iter().for_each(|&p| f(p));
        }
        self.ffn.visit_params(&mut f);
    }

    /// Mutable visit in the same canonical order.
    pub fn visit_params_mut<F: FnMut(&mut R)>(&mut self, mut f: F) {
        self.content_encoder.visit_params_mut(&mut f);
        self.emotion_encoder.visit_params_mut(&mut f);
        self.bias_w.iter_mut().for_each(&mut f);
        self.bias_c.iter_mut().for_each(&mut f);
        for d in [
            &mut self.query,
            &mut self.key,
            &mut self.value,
            &mut self.output,
        ] {
            d.w.iter_mut().for_each(&mut f);
            d.b.iter_mut().for_each(&mut f);
        }
        self.ffn.visit_params_mut(&mut f);
    }

    /// Parameters flattened in canonical order.
    pub fn flatten_params(&self) -> Vec<R> {
        let mut out = Vec::with_capacity(self.param_count());
        self.visit_params(|p| out.push(p));
        out
    }

    /// Overwrites all parameters from a flat vector (canonical order).
    pub fn set_params(&mut self, params: &[R]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::input(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                params.len()
            )));
        }
        let mut it = params.iter();
        self.visit_params_mut(|p| *p = *it.next().expect("length checked"));
        Ok(())
    }

    /// Serializes to the `EDEC` container (tensors as `f64`).
    pub fn serialize(&self) -> Vec<u8> {
        let mut w = ByteWriter::with_header(DECODER_MAGIC, DECODER_VERSION);
        w.u32(self.config.feature_dim as u32);
        w.u32(self.config.width as u32);
        w.u32(self.config.heads as u32);
        w.u64(self.seed);
        w.u32(self.param_count() as u32);
        self.visit_params(|p| w.f64(p.to_f64_lossy()));
        w.into_bytes()
    }

    /// Parses an `EDEC` container.
    pub fn deserialize(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes, "decoder model");
        r.header(DECODER_MAGIC, DECODER_VERSION)?;
        let config = DecoderConfig {
            feature_dim: r.len_capped(1 << 16, "feature dimension")?,
            width: r.len_capped(1 << 16, "width")?,
            heads: r.len_capped(1 << 8, "heads")?,
        };
        let seed = r.u64()?;
        let mut model = DecoderModel::new(config, seed)?;
        let count = r.len_capped(1 << 28, "parameter count")?;
        if count != model.param_count() {
            return Err(Error::format(format!(
                "decoder model: {} parameters stored, architecture has {}",
                count,
                model.param_count()
            )));
        }
        let params: Vec<R> = (0..count)
            .map(|_| r.f64().map(R::of))
            .collect::<Result<_>>()?;
        r.finish()?;
        model.set_params(&params)?;
        Ok(model)
    }

    /// Writes the `EDEC` container to a file.
    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.serialize())?;
        Ok(())
    }

    /// Reads an `EDEC` container from a file.
    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::deserialize(&std::fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> DecoderConfig {
        DecoderConfig {
            feature_dim: 6,
            width: 8,
            heads: 2,
        }
    }

    fn random_sequence(seed: u64, len: usize, dim: usize) -> FeatureSequence<f64> {
        let mut rng = Pcg32::new(seed, 900);
        FeatureSequence::new(
            (0..len)
                .map(|_| (0..dim).map(|_| rng.uniform(-1.0, 1.0)).collect())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn construction_is_deterministic_and_validated() {
        let a = DecoderModel::<f64>::new(tiny_config(), 5).unwrap();
        let b = DecoderModel::<f64>::new(tiny_config(), 5).unwrap();
        assert_eq!(a, b);
        let c = DecoderModel::<f64>::new(tiny_config(), 6).unwrap();
        assert_ne!(a, c);
        for bad in [
            DecoderConfig {
                width: 9,
                heads: 2,
                feature_dim: 6,
            },
            DecoderConfig {
                width: 8,
                heads: 0,
                feature_dim: 6,
            },
            DecoderConfig {
                width: 8,
                heads: 2,
                feature_dim: 0,
            },
        ] {
            assert!(DecoderModel::<f64>::new(bad, 0).is_err());
        }
    }

    #[test]
    fn decode_produces_valid_coefficients() {
        let model = DecoderModel::<f64>::new(tiny_config(), 1).unwrap();
        let content = random_sequence(2, 5, 6);
        let emotion = random_sequence(3, 5, 6);
        let out = model.decode(&content, &emotion).unwrap();
        assert_eq!(out.len(), 5);
        for b in &out {
            for &v in b.values() {
                assert!((0.0..=1.0).contains(&v));
            }
        }
        // Mismatched lengths and dimensions are rejected.
        assert!(model.decode(&content, &random_sequence(3, 4, 6)).is_err());
        assert!(model.decode(&content, &random_sequence(3, 5, 5)).is_err());
    }

    #[test]
    fn emotion_input_reaches_the_output() {
        let model = DecoderModel::<f64>::new(tiny_config(), 7).unwrap();
        let content = random_sequence(4, 6, 6);
        let a = model.decode(&content, &random_sequence(5, 6, 6)).unwrap();
        let b = model.decode(&content, &random_sequence(6, 6, 6)).unwrap();
        assert_ne!(a, b, "attention bias must let emotion modulate output");
    }

    #[test]
    fn parameter_gradients_match_finite_differences() {
        let mut model = DecoderModel::<f64>::new(tiny_config(), 11).unwrap();
        let content = random_sequence(12, 4, 6);
        let emotion = random_sequence(13, 4, 6);
        // Fixed linear functional of the outputs so dL/dout is a
        // constant cotangent.
        let mut rng = Pcg32::new(14, 0);
        let cot: Vec<Vec<f64>> = (0..4)
            .map(|_| {
                (0..BLENDSHAPE_COUNT)
                    .map(|_| rng.uniform(-1.0, 1.0))
                    .collect()
            })
            .collect();
        let loss = |m: &DecoderModel<f64>| -> f64 {
            let cache = m.forward_cached(&content, &emotion).unwrap();
            cache
                .outputs()
                .iter()
                .zip(&cot)
                .map(|(row, c)| row.iter().zip(c).map(|(o, w)| o * w).sum::<f64>())
                .sum()
        };

        let cache = model.forward_cached(&content, &emotion).unwrap();
        let mut grads = model.zero_grads();
        model.backward(&cache, &cot, &mut grads);
        let flat_grads = grads.flatten();
        let mut params = model.flatten_params();
        assert_eq!(flat_grads.len(), params.len());

        // Probe a deterministic spread of parameters across all
        // blocks, plus every bias offset.
        let n = params.len();
        let mut probes: Vec<usize> = (0..40).map(|i| i * n / 40).collect();
        let enc = model.content_encoder.param_count();
        let bias_c_start = 2 * enc + model.bias_w.len();
        probes.extend(bias_c_start..bias_c_start + model.bias_c.len());
        let h = 1e-5;
        for &i in &probes {
            let orig = params[i];
            params[i] = orig + h;
            model.set_params(&params).unwrap();
            let lp = loss(&model);
            params[i] = orig - h;
            model.set_params(&params).unwrap();
            let lm = loss(&model);
            params[i] = orig;
            model.set_params(&params).unwrap();
            let fd = (lp - lm) / (2.0 * h);
            let g = flat_grads[i];
            let denom = g.abs().max(fd.abs()).max(1e-6);
            assert!(
                ((g - fd) / denom).abs() < 1e-4,
                "param {i}: analytic {g} vs fd {fd}"
            );
        }
    }

    #[test]
    fn serialization_round_trips_bitwise() {
        let model = DecoderModel::<f64>::new(tiny_config(), 3).unwrap();
        let bytes = model.serialize();
        let back = DecoderModel::<f64>::deserialize(&bytes).unwrap();
        assert_eq!(model, back);
        assert_eq!(bytes, back.serialize());
        assert!(DecoderModel::<f64>::deserialize(&bytes[..20]).is_err());
        let mut wrong = bytes.clone();
        wrong[0] = b'X';
        assert!(DecoderModel::<f64>::deserialize(&wrong).is_err());
    }

    #[test]
    fn positional_encoding_is_bounded_and_distinct() {
        let a = positional_encoding::<f64>(0, 8);
        let b = positional_encoding::<f64>(3, 8);
        assert_ne!(a, b);
        for &v in a.iter().chain(&b) {
            assert!((-1.0..=1.0).contains(&v));
        }
        // t = 0: sin terms 0, cos terms 1.
        assert_eq!(a[0], 0.0);
        assert_eq!(a[1], 1.0);
    }
}
