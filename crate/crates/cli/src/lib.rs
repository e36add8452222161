//! Command-line front end for the face retargeting toolkit.
//!
//! Every stage of both pipelines is a subcommand, so the whole system
//! can be driven from a shell: build a simulated face and its rig,
//! collect babble data and train the self-model, retarget blendshape
//! coefficients to motor commands, and encode them as servo frames —
//! plus the speech side: synthesize a feature corpus, train the
//! emotion decoder, and run inference. Artifacts flow between stages
//! as files (binary containers for models, CSV for frame data).

#![warn(missing_docs)]
#![forbid(unsafe_code)]

pub mod commands;
pub mod csvio;

use clap::{Parser, Subcommand};
use std::path::PathBuf;

/// Parsed command line.
#[derive(Debug, Parser)]
#[command(
    name = "visage",
    version,
    about = "Animatronic face retargeting toolkit"
)]
pub struct Cli {
    /// Operation to run.
    #[command(subcommand)]
    pub command: Command,
}

/// One subcommand per pipeline stage.
#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a simulated face oracle and save it.
    BuildOracle {
        /// Output oracle file.
        #[arg(long)]
        out: PathBuf,
        /// Oracle configuration JSON (missing fields take defaults).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Construction seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Force the exactly-affine variant regardless of the config.
        #[arg(long)]
        linear: bool,
    },
    /// Derive the default blendshape rig from an oracle.
    BuildRig {
        /// Oracle file to derive from.
        #[arg(long)]
        oracle: PathBuf,
        /// Output rig file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample random motor babble through an oracle into a dataset.
    GenData {
        /// Oracle file to simulate with.
        #[arg(long)]
        oracle: PathBuf,
        /// Number of (motor, landmark) samples.
        #[arg(long)]
        count: usize,
        /// Sampling seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output dataset file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the self-model on a dataset.
    Train {
        /// Dataset file.
        #[arg(long)]
        data: PathBuf,
        /// Training configuration JSON (missing fields take defaults).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output model file.
        #[arg(long)]
        out: PathBuf,
        /// Optional JSON training summary.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Solve motor commands that reproduce blendshape frames.
    Retarget {
        /// Trained self-model file.
        #[arg(long)]
        model: PathBuf,
        /// Blendshape rig file.
        #[arg(long)]
        rig: PathBuf,
        /// Input blendshape coefficient CSV.
        #[arg(long)]
        coeffs: PathBuf,
        /// Output motor CSV.
        #[arg(long)]
        out: PathBuf,
        /// Solver options JSON (missing fields take defaults).
        #[arg(long)]
        options: Option<PathBuf>,
        /// Optional JSON solve summary.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Motor table text file (defaults to the built-in table).
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Resample a motor CSV and encode it as binary servo frames.
    EncodeServo {
        /// Input motor CSV.
        #[arg(long)]
        input: PathBuf,
        /// Output binary frame stream.
        #[arg(long)]
        out: PathBuf,
        /// Frame rate of the input CSV in Hz.
        #[arg(long, default_value_t = 30.0)]
        input_rate: f64,
        /// Servo command rate in Hz.
        #[arg(long, default_value_t = 50.0)]
        rate: f64,
        /// Motor table text file (defaults to the built-in table).
        #[arg(long)]
        table: Option<PathBuf>,
        /// Sequence number of the first frame.
        #[arg(long, default_value_t = 0)]
        start_seq: u16,
    },
    /// Align a query feature sequence to a reference with DTW.
    Align {
        /// Reference sequence file.
        #[arg(long)]
        reference: PathBuf,
        /// Query sequence file.
        #[arg(long)]
        query: PathBuf,
        /// Output alignment path CSV.
        #[arg(long)]
        out: PathBuf,
        /// Sakoe–Chiba band half-width (unconstrained if omitted).
        #[arg(long)]
        band: Option<usize>,
        /// Also write the query warped onto the reference timeline.
        #[arg(long)]
        warped: Option<PathBuf>,
    },
    /// Generate a synthetic speech-feature corpus.
    SynthCorpus {
        /// Corpus spec JSON (missing fields take defaults).
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Output corpus file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the emotion-conditioned decoder on a corpus.
    TrainDecoder {
        /// Corpus file.
        #[arg(long)]
        corpus: PathBuf,
        /// Training configuration JSON (missing fields take defaults).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output decoder file.
        #[arg(long)]
        out: PathBuf,
        /// Optional JSON training report.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Decode blendshape coefficients from speech features.
    Infer {
        /// Trained decoder file.
        #[arg(long)]
        model: PathBuf,
        /// Content feature sequence.
        #[arg(long)]
        content: PathBuf,
        /// Optional emotion feature sequence (any length).
        #[arg(long)]
        emotion: Option<PathBuf>,
        /// Output blendshape coefficient CSV.
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate oracle landmarks for motor frames.
    Simulate {
        /// Oracle file to simulate with.
        #[arg(long)]
        oracle: PathBuf,
        /// Input motor CSV.
        #[arg(long)]
        motors: PathBuf,
        /// Output landmark CSV.
        #[arg(long)]
        out: PathBuf,
        /// Motor table text file (defaults to the built-in table).
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Compare predicted landmarks against ground truth.
    Eval {
        /// Ground-truth landmark CSV.
        #[arg(long)]
        truth: PathBuf,
        /// Predicted landmark CSV.
        #[arg(long)]
        predicted: PathBuf,
        /// Face region config JSON (missing fields take defaults).
        #[arg(long)]
        regions: Option<PathBuf>,
        /// Millimetres represented by one normalized unit.
        #[arg(long)]
        mm_per_unit: Option<f64>,
        /// Optional JSON metrics output.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Evaluate a rig on coefficient frames, producing landmarks.
    RigApply {
        /// Blendshape rig file.
        #[arg(long)]
        rig: PathBuf,
        /// Input blendshape coefficient CSV.
        #[arg(long)]
        coeffs: PathBuf,
        /// Output landmark CSV.
        #[arg(long)]
        out: PathBuf,
    },
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> anyhow::Result<()> {
    commands::dispatch(cli.command)
}
