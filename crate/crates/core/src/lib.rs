//! Core library for driving a motor-actuated animatronic face from
//! blendshape animation.
//!
//! The pipeline, end to end:
//!
//! 1. [`oracle`] — a deterministic simulated face: motor commands in
//!    `[0,1]^26` map to 468 tracked 2-D landmarks. Stands in for the
//!    physical robot and its camera rig during development.
//! 2. [`selfmodel`] — a differentiable neural self-model trained on
//!    (motor, landmark) pairs sampled from the oracle. The upper and
//!    lower face are modelled by independent subnetworks so that motor
//!    groups cannot leak across regions.
//! 3. [`rig`] — a linear blendshape rig over the same landmark
//!    topology; blendshape coefficients in `[0,1]^33` produce target
//!    landmark sets.
//! 4. [`solver`] — projected gradient descent through the self-model
//!    recovers the motor vector whose predicted landmarks match a
//!    target, with warm starts across animation frames.
//! 5. [`dtw`] — dynamic time warping aligns feature sequences of
//!    differing tempo; used to pair sequences for decoder training.
//! 6. [`decoder`] — an attention-based decoder maps per-frame audio
//!    features to blendshape coefficients, with emotion style injected
//!    purely through attention-logit biases. Trained on a synthetic
//!    disentanglement corpus with cross/self reconstruction losses.
//! 7. [`motor`] — the physical motor table (PWM ranges, drive types),
//!    normalization, and the checksummed servo wire protocol.
//! 8. [`metrics`] — landmark-space evaluation metrics (lip vertex
//!    error, eye/forehead vertex error, mean landmark distance).
//!
//! # Determinism
//!
//! Every stochastic step (data generation, weight init, shuffling) is
//! driven by the seeded, stream-splittable PRNG in [`prng`]. Given the
//! same seeds and configs, dataset files, trained models, and solver
//! traces are byte-for-byte reproducible. No global RNG state, no
//! threads, no time-dependent behavior.
//!
//! # Scalar genericity
//!
//! Numeric kernels are generic over [`scalar::Real`] (implemented for
//! `f32` and `f64`). The crate root exports concrete `f64` aliases
//! ([`Scalar`], [`LandmarkSet`], [`FaceOracle`], ...) which the rest of
//! the pipeline and all file formats use; `f32` instantiations are
//! exercised in tests. On-disk tensors are always little-endian `f64`.
//!
//! # Quickstart
//!
//! ```
//! use visage_core::{motor, oracle, rig, selfmodel, solver};
//!
//! // Simulated face + dataset + self-model.
//! let face = oracle::FaceOracle::<f64>::build(&oracle::OracleConfig::default(), 7).unwrap();
//! let data = selfmodel::generate_dataset(&face, 256, 11).unwrap();
//! let mut cfg = selfmodel::TrainConfig::default();
//! cfg.epochs = 1; // demo-sized
//! let model = selfmodel::train_self_model(&data, &cfg).unwrap();
//!
//! // Retarget one frame: match the oracle's neutral pose.
//! let table = motor::MotorSpecTable::builtin();
//! let neutral = motor::MotorVector::neutral(&table);
//! let target = face.simulate_landmarks(&neutral).unwrap();
//! let report =
//!     solver::retarget_frame(&model, &target, &solver::SolverOptions::default(), Some(&neutral))
//!         .unwrap();
//! assert!(report.final_loss.is_finite());
//! ```

#![warn(missing_docs)]
#![forbid(unsafe_code)]

pub mod container;
pub mod decoder;
pub mod dtw;
pub mod error;
pub mod landmarks;
pub mod metrics;
pub mod motor;
pub mod nn;
pub mod oracle;
pub mod prng;
pub mod rig;
pub mod scalar;
pub mod selfmodel;
pub mod solver;

pub use error::{Error, Result};

/// Scalar type used by the concrete pipeline and all file formats.
pub type Scalar = f64;

/// 468-point landmark set at the pipeline scalar type.
pub type LandmarkSet = landmarks::LandmarkSet<Scalar>;
/// Expression motor vector at the pipeline scalar type.
pub type MotorVector = motor::MotorVector<Scalar>;
/// Simulated face at the pipeline scalar type.
pub type FaceOracle = oracle::FaceOracle<Scalar>;
/// Blendshape coefficient vector at the pipeline scalar type.
pub type BlendshapeCoeffs = rig::BlendshapeCoeffs<Scalar>;
/// Blendshape rig at the pipeline scalar type.
pub type BlendshapeRig = rig::BlendshapeRig<Scalar>;
/// Training dataset at the pipeline scalar type.
pub type Dataset = selfmodel::Dataset<Scalar>;
/// Trained self-model at the pipeline scalar type.
pub type SelfModel = selfmodel::SelfModel<Scalar>;
/// Solver report at the pipeline scalar type.
pub type SolveReport = solver::SolveReport<Scalar>;
/// Feature sequence at the pipeline scalar type.
pub type FeatureSequence = dtw::FeatureSequence<Scalar>;
/// Alignment path at the pipeline scalar type.
pub type AlignmentPath = dtw::AlignmentPath<Scalar>;
/// Synthetic disentanglement corpus at the pipeline scalar type.
pub type SynthCorpus = decoder::SynthCorpus<Scalar>;
/// Emotion-aware blendshape decoder at the pipeline scalar type.
pub type DecoderModel = decoder::DecoderModel<Scalar>;
