//! Emotion-transfer blendshape decoding.
//!
//! Turns per-frame feature sequences into blendshape animation while
//! keeping *what* is performed (content) separate from *how* it is
//! performed (emotion). The pieces:
//!
//! * a synthetic paired-performance corpus with exact closed-form
//!   ground truth for every (content, emotion) combination
//!   ([`generate_corpus`], [`SynthCorpus`]);
//! * the decoder network ([`DecoderModel`]) — content drives an
//!   attention block, emotion enters only through attention-logit
//!   biases;
//! * training ([`train_decoder`]) — Adam on a weighted sum of two
//!   reconstruction losses: **self** (decode an item from its own
//!   features) and **cross** (decode content features under another
//!   item's emotion, against the closed-form target), the latter with
//!   emotion features time-warped onto the content timeline first;
//! * inference ([`infer_blendshapes`]) — decodes a feature sequence,
//!   optionally restyled by a second sequence of any length.
//!
//! Each reconstruction term is the mean over frames of the squared ℓ2
//! distance summed over the 33 coefficients; the total is
//! `λ_cross · L_cross + λ_self · L_self` with both λ defaulting to 1.

mod corpus;
mod net;

pub use corpus::{
    canonical_times, generate_corpus, CorpusItem, CorpusSpec, SynthCorpus, CORPUS_MAGIC,
    CORPUS_VERSION, EMBED_DIM, LATENT_DIM,
};
pub use net::{
    DecoderCache, DecoderConfig, DecoderGrads, DecoderModel, DECODER_MAGIC, DECODER_VERSION,
};

use crate::dtw::{dtw, warp_to_reference, FeatureSequence};
use crate::error::{Error, Result};
use crate::nn::Adam;
use crate::prng::Pcg32;
use crate::rig::BlendshapeCoeffs;
use crate::scalar::Real;

const STREAM_SPLIT: u64 = 10;
const STREAM_PAIRS: u64 = 11;
const STREAM_EPOCH_BASE: u64 = 12;

/// Mean-over-frames squared reconstruction error:
/// `(1/T) Σ_t Σ_k (p_{t,k} − q_{t,k})²`.
pub fn reconstruction_loss<R: Real>(
    predicted: &[BlendshapeCoeffs<R>],
    target: &[BlendshapeCoeffs<R>],
) -> Result<R> {
    if predicted.is_empty() {
        return Err(Error::input("no frames to compare".to_string()));
    }
    if predicted.len() != target.len() {
        return Err(Error::input(format!(
            "predicted {} frames, target has {}",
            predicted.len(),
            target.len()
        )));
    }
    let mut acc = R::zero();
    for (p, q) in predicted.iter().zip(target) {
        for (a, b) in p.values().iter().zip(q.values()) {
            let d = *a - *b;
            acc += d * d;
        }
    }
    Ok(acc / R::of(predicted.len() as f64))
}

/// Combined training objective:
/// `λ_cross · mean(cross) + λ_self · mean(self)`.
///
/// An empty term list contributes zero.
pub fn total_loss<R: Real>(
    cross_losses: &[R],
    self_losses: &[R],
    lambda_cross: f64,
    lambda_self: f64,
) -> R {
    let mean = |xs: &[R]| {
        if xs.is_empty() {
            R::zero()
        } else {
            xs.iter().fold(R::zero(), |a, &x| a + x) / R::of(xs.len() as f64)
        }
    };
    R::of(lambda_cross) * mean(cross_losses) + R::of(lambda_self) * mean(self_losses)
}

/// Self-reconstruction loss: decode an item from its own features and
/// compare with its own blendshapes.
pub fn self_reconstruction_loss<R: Real>(
    model: &DecoderModel<R>,
    features: &FeatureSequence<R>,
    target: &[BlendshapeCoeffs<R>],
) -> Result<R> {
    let predicted = model.decode(features, features)?;
    reconstruction_loss(&predicted, target)
}

/// Cross-reconstruction loss: decode content features under a
/// different (already time-aligned) emotion sequence and compare with
/// the target stylization.
pub fn cross_reconstruction_loss<R: Real>(
    model: &DecoderModel<R>,
    content: &FeatureSequence<R>,
    emotion_aligned: &FeatureSequence<R>,
    target: &[BlendshapeCoeffs<R>],
) -> Result<R> {
    let predicted = model.decode(content, emotion_aligned)?;
    reconstruction_loss(&predicted, target)
}

/// Decoder training hyperparameters.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct DecoderTrainConfig {
    /// Seed for init, split, pair sampling, and shuffles.
    pub seed: u64,
    /// Full passes over the training units.
    pub epochs: usize,
    /// Units per optimizer step.
    pub batch_size: usize,
    /// Adam learning rate.
    pub learning_rate: f64,
    /// Weight of the cross-reconstruction term.
    pub lambda_cross: f64,
    /// Weight of the self-reconstruction term.
    pub lambda_self: f64,
    /// Upper bound on sampled cross pairs.
    pub max_cross_pairs: usize,
    /// Fraction of items held out for validation.
    pub validation_fraction: f64,
    /// Model token width.
    pub width: usize,
    /// Model attention heads.
    pub heads: usize,
}

impl Default for DecoderTrainConfig {
    fn default() -> Self {
        DecoderTrainConfig {
            seed: 0,
            epochs: 60,
            batch_size: 4,
            // Middle of the stable range at the default budget: 1e-4
            // leaves the loss ~2x higher after 60 epochs, 1e-3 starts
            // to bounce between epochs.
            learning_rate: 5e-4,
            lambda_cross: 1.0,
            lambda_self: 1.0,
            max_cross_pairs: 64,
            validation_fraction: 0.1,
            width: 64,
            heads: 2,
        }
    }
}

impl DecoderTrainConfig {
    fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be positive".to_string()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::config(format!(
                "learning_rate {} must be positive and finite",
                self.learning_rate
            )));
        }
        for (name, l) in [
            ("lambda_cross", self.lambda_cross),
            ("lambda_self", self.lambda_self),
        ] {
            if !(l.is_finite() && l >= 0.0) {
                return Err(Error::config(format!(
                    "{name} {l} must be non-negative and finite"
                )));
            }
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::config(format!(
                "validation_fraction {} outside [0, 1)",
                self.validation_fraction
            )));
        }
        Ok(())
    }
}

/// What [`train_decoder`] did, for logs and reports.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DecoderTrainReport {
    /// Mean weighted per-unit loss per epoch.
    pub epoch_losses: Vec<f64>,
    /// Mean self-reconstruction loss on held-out items after training
    /// (over training items when the validation split is empty).
    pub validation_loss: f64,
    /// Self-reconstruction units trained on.
    pub self_items: usize,
    /// Cross-reconstruction pairs trained on.
    pub cross_pairs: usize,
}

struct CrossUnit<R> {
    content_item: usize,
    emotion_aligned: FeatureSequence<R>,
    targets: Vec<BlendshapeCoeffs<R>>,
}

enum UnitRef {
    SelfRecon(usize),
    Cross(usize),
}

/// Per-frame output gradient of [`reconstruction_loss`] scaled by
/// `weight`, alongside the unweighted loss.
fn loss_and_grad_out<R: Real>(
    out: &[Vec<R>],
    targets: &[BlendshapeCoeffs<R>],
    weight: R,
) -> (R, Vec<Vec<R>>) {
    let t_len = out.len();
    let inv_t = R::one() / R::of(t_len as f64);
    let mut loss = R::zero();
    let grad = out
        .iter()
        .zip(targets)
        .map(|(row, tgt)| {
            row.iter()
                .zip(tgt.values())
                .map(|(&o, &t)| {
                    let d = o - t;
                    loss += d * d;
                    weight * R::of(2.0) * d * inv_t
                })
                .collect()
        })
        .collect();
    (loss * inv_t, grad)
}

/// Trains a decoder on a corpus.
///
/// Deterministic given (corpus, config). Training units are every
/// non-held-out item as a self-reconstruction target plus up to
/// `max_cross_pairs` ordered item pairs with differing emotions; each
/// pair's emotion features are DTW-warped onto the content timeline
/// once, and its target comes from the corpus closed form.
pub fn train_decoder<R: Real>(
    corpus: &SynthCorpus<R>,
    config: &DecoderTrainConfig,
) -> Result<(DecoderModel<R>, DecoderTrainReport)> {
    config.validate()?;
    let n_items = corpus.items.len();
    if n_items == 0 {
        return Err(Error::input("corpus has no items".to_string()));
    }

    let mut model = DecoderModel::new(
        DecoderConfig {
            feature_dim: corpus.spec.feature_dim,
            width: config.width,
            heads: config.heads,
        },
        config.seed,
    )?;

    // Item split: validation items are excluded from both unit kinds.
    let mut order: Vec<usize> = (0..n_items).collect();
    Pcg32::new(config.seed, STREAM_SPLIT).shuffle(&mut order);
    let n_val = ((n_items as f64) * config.validation_fraction).floor() as usize;
    let n_train = n_items - n_val;
    if n_train == 0 {
        return Err(Error::input(
            "validation split leaves no training items".to_string(),
        ));
    }
    let (train_items, val_items) = order.split_at(n_train);

    // Cross pairs: ordered (content, emotion-donor) pairs with
    // differing emotions, deterministically subsampled.
    let mut pair_ids: Vec<(usize, usize)> = Vec::new();
    for &i in train_items {
        for &j in train_items {
            if corpus.items[i].emotion != corpus.items[j].emotion {
                pair_ids.push((i, j));
            }
        }
    }
    Pcg32::new(config.seed, STREAM_PAIRS).shuffle(&mut pair_ids);
    pair_ids.truncate(config.max_cross_pairs);
    let cross_units: Vec<CrossUnit<R>> = pair_ids
        .iter()
        .map(|&(i, j)| {
            let content = &corpus.items[i];
            let donor = &corpus.items[j];
            let path = dtw(&content.features, &donor.features)?;
            let emotion_aligned = warp_to_reference(&path, &donor.features)?;
            let targets = corpus.aligned_ground_truth(
                content.content,
                donor.emotion,
                &canonical_times(content.features.len()),
            )?;
            Ok(CrossUnit {
                content_item: i,
                emotion_aligned,
                targets,
            })
        })
        .collect::<Result<_>>()?;

    let mut units: Vec<UnitRef> = train_items
        .iter()
        .map(|&i| UnitRef::SelfRecon(i))
        .chain((0..cross_units.len()).map(UnitRef::Cross))
        .collect();

    let lambda_self = R::of(config.lambda_self);
    let lambda_cross = R::of(config.lambda_cross);
    let mut adam = Adam::new(model.param_count(), config.learning_rate);
    let mut grads = model.zero_grads();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        Pcg32::new(config.seed, STREAM_EPOCH_BASE + epoch as u64).shuffle(&mut units);
        let mut epoch_loss = R::zero();
        for batch in units.chunks(config.batch_size) {
            grads.zero();
            let inv_batch = R::one() / R::of(batch.len() as f64);
            for unit in batch {
                let (cache, targets, weight) = match unit {
                    UnitRef::SelfRecon(i) => {
                        let item = &corpus.items[*i];
                        (
                            model.forward_cached(&item.features, &item.features)?,
                            &item.blendshapes,
                            lambda_self,
                        )
                    }
                    UnitRef::Cross(c) => {
                        let unit = &cross_units[*c];
                        let item = &corpus.items[unit.content_item];
                        (
                            model.forward_cached(&item.features, &unit.emotion_aligned)?,
                            &unit.targets,
                            lambda_cross,
                        )
                    }
                };
                let (loss, grad_out) =
                    loss_and_grad_out(cache.outputs(), targets, weight * inv_batch);
                model.backward(&cache, &grad_out, &mut grads);
                epoch_loss += weight * loss;
            }
            let mut params = model.flatten_params();
            adam.step(&mut params, &grads.flatten());
            model.set_params(&params)?;
        }
        epoch_losses.push((epoch_loss / R::of(units.len() as f64)).to_f64_lossy());
    }

    // Validation: self-reconstruction on held-out items.
    let eval_items: &[usize] = if val_items.is_empty() {
        train_items
    } else {
        val_items
    };
    let mut val_acc = 0.0;
    for &i in eval_items {
        let item = &corpus.items[i];
        val_acc +=
            self_reconstruction_loss(&model, &item.features, &item.blendshapes)?.to_f64_lossy();
    }
    let report = DecoderTrainReport {
        epoch_losses,
        validation_loss: val_acc / eval_items.len() as f64,
        self_items: train_items.len(),
        cross_pairs: cross_units.len(),
    };
    Ok((model, report))
}

/// Decodes blendshapes for a content sequence, optionally restyled by
/// an emotion sequence.
///
/// With no emotion sequence the content is fed to both encoders
/// (plain self-mode decoding). An emotion sequence of a different
/// length is DTW-warped onto the content timeline first.
pub fn infer_blendshapes<R: Real>(
    model: &DecoderModel<R>,
    content: &FeatureSequence<R>,
    emotion: Option<&FeatureSequence<R>>,
) -> Result<Vec<BlendshapeCoeffs<R>>> {
    match emotion {
        None => model.decode(content, content),
        Some(e) if e.len() == content.len() => model.decode(content, e),
        Some(e) => {
            let path = dtw(content, e)?;
            let warped = warp_to_reference(&path, e)?;
            model.decode(content, &warped)
        }
    }
}
