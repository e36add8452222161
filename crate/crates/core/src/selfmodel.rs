//! Neural self-model: a differentiable stand-in for the face.
//!
//! The self-model learns the oracle's motor → landmark map from
//! sampled pairs so the inverse solver can differentiate through it.
//! Upper and lower face are **independent subnetworks**: the upper net
//! sees only upper-group motors and predicts only upper-region
//! landmarks (likewise lower), so cross-region Jacobian blocks are
//! exactly zero by architecture, not by training. Static-region
//! landmarks are emitted at their rest values.
//!
//! Training is plain SGD with momentum on the ℓ1 landmark loss
//! restricted to each subnetwork's region, bit-for-bit reproducible:
//! initialization, the train/validation split, and per-epoch shuffles
//! all come from fixed PRNG streams of the training seed (stream 0 =
//! upper init, 1 = lower init, 2 = split, 3 + epoch = epoch shuffle).

use crate::container::{ByteReader, ByteWriter};
use crate::error::{Error, Result};
use crate::landmarks::{LandmarkSet, Region, LANDMARK_COUNT};
use crate::motor::{MotorVector, EXPRESSION_MOTOR_COUNT};
use crate::nn::{Activation, Mlp};
use crate::oracle::FaceOracle;
use crate::prng::Pcg32;
use crate::scalar::Real;

/// Magic of serialized datasets.
pub const DATASET_MAGIC: [u8; 4] = *b"FDST";
/// Current dataset format version.
pub const DATASET_VERSION: u16 = 1;
/// Magic of serialized self-models.
pub const MODEL_MAGIC: [u8; 4] = *b"SMDL";
/// Current self-model format version.
pub const MODEL_VERSION: u16 = 1;

const STREAM_INIT_UPPER: u64 = 0;
const STREAM_INIT_LOWER: u64 = 1;
const STREAM_SPLIT: u64 = 2;
const STREAM_EPOCH_BASE: u64 = 3;

/// One (motor, landmark) training pair.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSample<R> {
    /// Commanded motor vector.
    pub motors: MotorVector<R>,
    /// Observed landmarks.
    pub landmarks: LandmarkSet<R>,
}

/// A dataset of oracle-sampled pairs, tagged with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<R> {
    /// Samples in generation order.
    pub samples: Vec<DataSample<R>>,
    /// Generation seed.
    pub seed: u64,
    /// Fingerprint of the oracle that produced the samples.
    pub oracle_hash: u64,
    /// Group of each expression motor (from the oracle).
    pub motor_region: [Region; EXPRESSION_MOTOR_COUNT],
    /// Region of each landmark (from the oracle).
    pub region_mask: Vec<Region>,
}

/// Samples `count` motor vectors uniformly from `[0,1)^26` and records
/// the oracle's landmarks for each.
///
/// Sample `i` draws from PRNG stream `i` of `seed`, so any prefix of a
/// larger dataset is itself reproducible. Motor draws pass through
/// [`MotorVector::clamp_to_limits`] before simulation.
pub fn generate_dataset<R: Real>(
    oracle: &FaceOracle<R>,
    count: usize,
    seed: u64,
) -> Result<Dataset<R>> {
    if count == 0 {
        return Err(Error::input(
            "dataset needs at least one sample".to_string(),
        ));
    }
    let mut samples = Vec::with_capacity(count);
    for i in 0..count {
        let mut rng = Pcg32::new(seed, i as u64);
        let raw: Vec<R> = (0..EXPRESSION_MOTOR_COUNT)
            .map(|_| R::of(rng.next_f64()))
            .collect();
        let motors = MotorVector::clamp_to_limits(&raw)?;
        let landmarks = oracle.simulate_landmarks(&motors)?;
        samples.push(DataSample { motors, landmarks });
    }
    Ok(Dataset {
        samples,
        seed,
        oracle_hash: oracle.content_hash(),
        motor_region: *oracle.motor_region(),
        region_mask: oracle.region_mask().to_vec(),
    })
}

impl<R: Real> Dataset<R> {
    /// Serializes to the `FDST` container.
    pub fn serialize(&self) -> Vec<u8> {
        let mut w = ByteWriter::with_header(DATASET_MAGIC, DATASET_VERSION);
        w.u64(self.oracle_hash);
        w.u32(self.samples.len() as u32);
        w.u64(self.seed);
        for r in &self.motor_region {
            w.u8(r.to_tag());
        }
        for r in &self.region_mask {
            w.u8(r.to_tag());
        }
        for s in &self.samples {
            for &v in s.motors.values() {
                w.f64(v.to_f64_lossy());
            }
            for p in s.landmarks.points() {
                w.f64(p[0].to_f64_lossy());
                w.f64(p[1].to_f64_lossy());
            }
        }
        w.into_bytes()
    }

    /// Parses an `FDST` container.
    pub fn deserialize(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes, "dataset");
        r.header(DATASET_MAGIC, DATASET_VERSION)?;
        let oracle_hash = r.u64()?;
        let count = r.len_capped(10_000_000, "sample count")?;
        let seed = r.u64()?;
        let mut motor_region = [Region::Upper; EXPRESSION_MOTOR_COUNT];
        for region in motor_region.iter_mut() {
            *region = Region::from_tag(r.u8()?)?;
        }
        let mut region_mask = Vec::with_capacity(LANDMARK_COUNT);
        for _ in 0..LANDMARK_COUNT {
            region_mask.push(Region::from_tag(r.u8()?)?);
        }
        let mut samples = Vec::with_capacity(count);
        for _ in 0..count {
            let mut motors = [R::zero(); EXPRESSION_MOTOR_COUNT];
            for m in motors.iter_mut() {
                *m = R::of(r.f64()?);
            }
            let mut points = Vec::with_capacity(LANDMARK_COUNT);
            for _ in 0..LANDMARK_COUNT {
                points.push([R::of(r.f64()?), R::of(r.f64()?)]);
            }
            samples.push(DataSample {
                motors: MotorVector::new(motors)?,
                landmarks: LandmarkSet::from_points(points)?,
            });
        }
        r.finish()?;
        Ok(Dataset {
            samples,
            seed,
            oracle_hash,
            motor_region,
            region_mask,
        })
    }

    /// Writes the `FDST` container to a file.
    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.serialize())?;
        Ok(())
    }

    /// Reads an `FDST` container from a file.
    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::deserialize(&std::fs::read(path)?)
    }
}

/// Mean ℓ1 landmark distance between two sets:
/// `(1/468) Σ_i (|Δx_i| + |Δy_i|)`.
pub fn l1_landmark_loss<R: Real>(a: &LandmarkSet<R>, b: &LandmarkSet<R>) -> R {
    let mut acc = R::zero();
    for (p, q) in a.points().iter().zip(b.points()) {
        acc += (p[0] - q[0]).abs() + (p[1] - q[1]).abs();
    }
    acc / R::of(LANDMARK_COUNT as f64)
}

/// Self-model training hyperparameters.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Seed for init, split, and shuffles.
    pub seed: u64,
    /// Full passes over the training split.
    pub epochs: usize,
    /// Minibatch size (last batch of an epoch may be smaller).
    pub batch_size: usize,
    /// SGD learning rate.
    pub learning_rate: f64,
    /// SGD momentum coefficient.
    pub momentum: f64,
    /// Hidden-layer widths shared by both subnetworks.
    pub hidden: Vec<usize>,
    /// Hidden-layer activation.
    pub activation: Activation,
    /// Fraction of samples held out for validation.
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            seed: 0,
            epochs: 200,
            batch_size: 32,
            learning_rate: 1e-5,
            momentum: 0.9,
            hidden: vec![128, 128],
            activation: Activation::Tanh,
            validation_fraction: 0.1,
        }
    }
}

impl TrainConfig {
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
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::config(format!(
                "momentum {} outside [0, 1)",
                self.momentum
            )));
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

/// One region subnetwork: which motors it reads, which landmarks it
/// writes, and the network itself.
#[derive(Debug, Clone, PartialEq)]
pub struct SubNet<R> {
    /// Expression-motor indices this net reads.
    pub motor_idx: Vec<usize>,
    /// Landmark indices this net predicts.
    pub landmark_idx: Vec<usize>,
    /// The network: `motor_idx.len()` inputs, `2 × landmark_idx.len()`
    /// outputs (x, y per landmark).
    pub net: Mlp<R>,
}

impl<R: Real> SubNet<R> {
    fn gather(&self, motor: &MotorVector<R>) -> Vec<R> {
        self.motor_idx.iter().map(|&m| motor.get(m)).collect()
    }
}

/// Trained self-model: two region subnetworks plus static rest points.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfModel<R> {
    /// Upper-face subnetwork.
    pub upper: SubNet<R>,
    /// Lower-face subnetwork.
    pub lower: SubNet<R>,
    /// `(landmark index, rest position)` for static landmarks.
    pub static_points: Vec<(usize, [R; 2])>,
    /// Training seed.
    pub seed: u64,
    /// Epochs actually trained.
    pub epochs: usize,
    /// Mean absolute coordinate error on the validation split after
    /// the final epoch (over all 468 landmarks).
    pub validation_mae: f64,
}

impl<R: Real> SelfModel<R> {
    /// Predicts the full landmark set for a motor vector.
    ///
    /// Raw network outputs — approximations may protrude slightly from
    /// `[0,1]`; static landmarks are exact rest values.
    pub fn predict(&self, motor: &MotorVector<R>) -> LandmarkSet<R> {
        let mut points = vec![[R::zero(); 2]; LANDMARK_COUNT];
        for sub in [&self.upper, &self.lower] {
            let out = sub.net.forward(&sub.gather(motor));
            for (j, &i) in sub.landmark_idx.iter().enumerate() {
                points[i] = [out[2 * j], out[2 * j + 1]];
            }
        }
        for &(i, p) in &self.static_points {
            points[i] = p;
        }
        LandmarkSet::from_points(points).expect("prediction has fixed shape")
    }

    /// ℓ1 landmark loss of this model's prediction against a target.
    pub fn loss(&self, motor: &MotorVector<R>, target: &LandmarkSet<R>) -> R {
        l1_landmark_loss(&self.predict(motor), target)
    }

    /// Exact reverse-mode gradient of
    /// `l1_landmark_loss(predict(motor), target)` w.r.t. the motor
    /// vector (zero subgradient where a residual is exactly zero).
    ///
    /// Cross-region components are exactly zero: each subnetwork's
    /// gradient scatters only into its own motor group, and static
    /// landmarks contribute nothing.
    pub fn loss_gradient_wrt_input(
        &self,
        motor: &MotorVector<R>,
        target: &LandmarkSet<R>,
    ) -> Vec<R> {
        let inv_n = R::one() / R::of(LANDMARK_COUNT as f64);
        let mut grad = vec![R::zero(); EXPRESSION_MOTOR_COUNT];
        for sub in [&self.upper, &self.lower] {
            let x = sub.gather(motor);
            let cache = sub.net.forward_cached(&x);
            let out = sub.net.output(&cache);
            let mut cot = vec![R::zero(); out.len()];
            for (j, &i) in sub.landmark_idx.iter().enumerate() {
                let t = target.point(i);
                for c in 0..2 {
                    let r = out[2 * j + c] - t[c];
                    cot[2 * j + c] = if r > R::zero() {
                        inv_n
                    } else if r < R::zero() {
                        -inv_n
                    } else {
                        R::zero()
                    };
                }
            }
            let mut grads = sub.net.zero_grads();
            let gx = sub.net.backward(&cache, &cot, &mut grads);
            for (j, &m) in sub.motor_idx.iter().enumerate() {
                grad[m] = gx[j];
            }
        }
        grad
    }

    /// Serializes to the `SMDL` container (tensors as `f64`).
    pub fn serialize(&self) -> Vec<u8> {
        let mut w = ByteWriter::with_header(MODEL_MAGIC, MODEL_VERSION);
        w.u64(self.seed);
        w.u32(self.epochs as u32);
        w.f64(self.validation_mae);
        w.u8(self.upper.net.activation.to_tag());
        for sub in [&self.upper, &self.lower] {
            w.u8(sub.motor_idx.len() as u8);
            sub.motor_idx.iter().for_each(|&m| w.u8(m as u8));
            w.u32(sub.landmark_idx.len() as u32);
            sub.landmark_idx.iter().for_each(|&i| w.u32(i as u32));
            w.u8(sub.net.layers.len() as u8);
            for layer in &sub.net.layers {
                w.u32(layer.in_dim as u32);
                w.u32(layer.out_dim as u32);
                for &v in &layer.w {
                    w.f64(v.to_f64_lossy());
                }
                for &v in &layer.b {
                    w.f64(v.to_f64_lossy());
                }
            }
        }
        w.u32(self.static_points.len() as u32);
        for &(i, p) in &self.static_points {
            w.u32(i as u32);
            w.f64(p[0].to_f64_lossy());
            w.f64(p[1].to_f64_lossy());
        }
        w.into_bytes()
    }

    /// Parses an `SMDL` container.
    pub fn deserialize(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes, "self-model");
        r.header(MODEL_MAGIC, MODEL_VERSION)?;
        let seed = r.u64()?;
        let epochs = r.u32()? as usize;
        let validation_mae = r.f64()?;
        let activation = Activation::from_tag(r.u8()?)?;
        let mut subs = Vec::with_capacity(2);
        for _ in 0..2 {
            let n_motors = r.u8()? as usize;
            let motor_idx: Vec<usize> = (0..n_motors)
                .map(|_| r.u8().map(|v| v as usize))
                .collect::<Result<_>>()?;
            let n_landmarks = r.len_capped(LANDMARK_COUNT, "subnet landmark count")?;
            let landmark_idx: Vec<usize> = (0..n_landmarks)
                .map(|_| r.u32().map(|v| v as usize))
                .collect::<Result<_>>()?;
            let n_layers = r.u8()? as usize;
            let mut layers = Vec::with_capacity(n_layers);
            for _ in 0..n_layers {
                let in_dim = r.u32()? as usize;
                let out_dim = r.u32()? as usize;
                if in_dim == 0 || out_dim == 0 || in_dim * out_dim > 100_000_000 {
                    return Err(Error::format("self-model: bad layer dims".to_string()));
                }
                let w_vals: Vec<R> = r
                    .f64_vec(in_dim * out_dim)?
                    .into_iter()
                    .map(R::of)
                    .collect();
                let b_vals: Vec<R> = r.f64_vec(out_dim)?.into_iter().map(R::of).collect();
                layers.push(crate::nn::Dense {
                    w: w_vals,
                    b: b_vals,
                    in_dim,
                    out_dim,
                });
            }
            subs.push(SubNet {
                motor_idx,
                landmark_idx,
                net: Mlp { layers, activation },
            });
        }
        let lower = subs.pop().unwrap();
        let upper = subs.pop().unwrap();
        let n_static = r.len_capped(LANDMARK_COUNT, "static point count")?;
        let mut static_points = Vec::with_capacity(n_static);
        for _ in 0..n_static {
            let i = r.u32()? as usize;
            static_points.push((i, [R::of(r.f64()?), R::of(r.f64()?)]));
        }
        r.finish()?;
        Ok(SelfModel {
            upper,
            lower,
            static_points,
            seed,
            epochs,
            validation_mae,
        })
    }

    /// Writes the `SMDL` container to a file.
    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.serialize())?;
        Ok(())
    }

    /// Reads an `SMDL` container from a file.
    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::deserialize(&std::fs::read(path)?)
    }
}

fn region_indices(mask: &[Region], region: Region) -> Vec<usize> {
    mask.iter()
        .enumerate()
        .filter(|(_, &r)| r == region)
        .map(|(i, _)| i)
        .collect()
}

/// Trains a self-model on a dataset.
///
/// Deterministic given (dataset, config): two runs produce
/// byte-identical serializations. With `epochs = 0` the returned model
/// is exactly the seeded initialization.
pub fn train_self_model<R: Real>(
    dataset: &Dataset<R>,
    config: &TrainConfig,
) -> Result<SelfModel<R>> {
    config.validate()?;
    let n = dataset.samples.len();
    if n == 0 {
        return Err(Error::input("cannot train on an empty dataset".to_string()));
    }

    let upper_motors: Vec<usize> = dataset
        .motor_region
        .iter()
        .enumerate()
        .filter(|(_, &r)| r == Region::Upper)
        .map(|(m, _)| m)
        .collect();
    let lower_motors: Vec<usize> = dataset
        .motor_region
        .iter()
        .enumerate()
        .filter(|(_, &r)| r == Region::Lower)
        .map(|(m, _)| m)
        .collect();
    let upper_landmarks = region_indices(&dataset.region_mask, Region::Upper);
    let lower_landmarks = region_indices(&dataset.region_mask, Region::Lower);
    let static_idx = region_indices(&dataset.region_mask, Region::Static);
    if upper_motors.is_empty() || lower_motors.is_empty() {
        return Err(Error::input(
            "dataset motor groups are degenerate".to_string(),
        ));
    }
    if upper_landmarks.is_empty() || lower_landmarks.is_empty() {
        return Err(Error::input(
            "dataset landmark regions are degenerate".to_string(),
        ));
    }

    let make_net = |inputs: usize, outputs: usize, stream: u64| -> Result<Mlp<R>> {
        let mut dims = vec![inputs];
        dims.extend_from_slice(&config.hidden);
        dims.push(outputs);
        Mlp::init(
            &dims,
            config.activation,
            &mut Pcg32::new(config.seed, stream),
        )
    };
    let mut upper = SubNet {
        net: make_net(
            upper_motors.len(),
            2 * upper_landmarks.len(),
            STREAM_INIT_UPPER,
        )?,
        motor_idx: upper_motors,
        landmark_idx: upper_landmarks,
    };
    let mut lower = SubNet {
        net: make_net(
            lower_motors.len(),
            2 * lower_landmarks.len(),
            STREAM_INIT_LOWER,
        )?,
        motor_idx: lower_motors,
        landmark_idx: lower_landmarks,
    };

    // Static rest points come straight from the data (identical in
    // every sample by the oracle's decoupling guarantee).
    let static_points: Vec<(usize, [R; 2])> = static_idx
        .iter()
        .map(|&i| (i, dataset.samples[0].landmarks.point(i)))
        .collect();

    // Fixed split: shuffle once, train on the front, validate on the
    // back.
    let mut order: Vec<usize> = (0..n).collect();
    Pcg32::new(config.seed, STREAM_SPLIT).shuffle(&mut order);
    let n_val = ((n as f64) * config.validation_fraction).floor() as usize;
    let n_train = n - n_val;
    if n_train == 0 {
        return Err(Error::input(
            "validation split leaves no training samples".to_string(),
        ));
    }
    let (train_idx, val_idx) = order.split_at(n_train);

    let lr = R::of(config.learning_rate);
    let momentum = R::of(config.momentum);
    let mut vel_upper = upper.net.zero_grads();
    let mut vel_lower = lower.net.zero_grads();
    let mut grads_upper = upper.net.zero_grads();
    let mut grads_lower = lower.net.zero_grads();

    let mut epoch_order = train_idx.to_vec();
    for epoch in 0..config.epochs {
        Pcg32::new(config.seed, STREAM_EPOCH_BASE + epoch as u64).shuffle(&mut epoch_order);
        for batch in epoch_order.chunks(config.batch_size) {
            for (sub, grads) in [(&upper, &mut grads_upper), (&lower, &mut grads_lower)] {
                grads.zero();
                // Batch-mean gradient of the region-restricted ℓ1
                // landmark loss: each coordinate contributes
                // sign(residual) / (batch × region points).
                let scale =
                    R::one() / (R::of(batch.len() as f64) * R::of(sub.landmark_idx.len() as f64));
                for &si in batch {
                    let sample = &dataset.samples[si];
                    let x = sub.gather(&sample.motors);
                    let cache = sub.net.forward_cached(&x);
                    let out = sub.net.output(&cache);
                    let mut cot = vec![R::zero(); out.len()];
                    for (j, &i) in sub.landmark_idx.iter().enumerate() {
                        let t = sample.landmarks.point(i);
                        for c in 0..2 {
                            let r = out[2 * j + c] - t[c];
                            cot[2 * j + c] = if r > R::zero() {
                                scale
                            } else if r < R::zero() {
                                -scale
                            } else {
                                R::zero()
                            };
                        }
                    }
                    sub.net.backward(&cache, &cot, grads);
                }
            }
            upper
                .net
                .sgd_step(&mut vel_upper, &grads_upper, lr, momentum);
            lower
                .net
                .sgd_step(&mut vel_lower, &grads_lower, lr, momentum);
        }
    }

    let mut model = SelfModel {
        upper,
        lower,
        static_points,
        seed: config.seed,
        epochs: config.epochs,
        validation_mae: 0.0,
    };

    // Validation MAE: mean |predicted − observed| per coordinate over
    // the full landmark set. Falls back to the whole dataset when the
    // validation split is empty.
    let eval_idx: &[usize] = if val_idx.is_empty() {
        train_idx
    } else {
        val_idx
    };
    let mut acc = 0.0f64;
    for &si in eval_idx {
        let sample = &dataset.samples[si];
        let pred = model.predict(&sample.motors);
        for (p, t) in pred.points().iter().zip(sample.landmarks.points()) {
            acc += (p[0] - t[0]).abs().to_f64_lossy() + (p[1] - t[1]).abs().to_f64_lossy();
        }
    }
    model.validation_mae = acc / (eval_idx.len() * LANDMARK_COUNT * 2) as f64;
    Ok(model)
}
