//! Implementations behind each CLI subcommand.

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use std::fs;
use std::path::Path;
use visage_core::decoder::{
    generate_corpus, infer_blendshapes, train_decoder, CorpusSpec, DecoderTrainConfig,
};
use visage_core::dtw::{dtw_with_band, warp_to_reference};
use visage_core::metrics::{evaluate_sequence, Calibration, FaceRegions};
use visage_core::motor::{MotorSpecTable, ServoFrame, SERVO_FRAME_LEN};
use visage_core::oracle::OracleConfig;
use visage_core::selfmodel::{generate_dataset, train_self_model, TrainConfig};
use visage_core::solver::{blendshape_to_motor, SolverOptions};
use visage_core::{
    BlendshapeRig, Dataset, DecoderModel, FaceOracle, FeatureSequence, SelfModel, SynthCorpus,
};

use crate::csvio;
use crate::Command;

/// Runs one parsed subcommand to completion.
pub fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::BuildOracle {
            out,
            config,
            seed,
            linear,
        } => build_oracle(&out, config.as_deref(), seed, linear),
        Command::BuildRig { oracle, out } => build_rig(&oracle, &out),
        Command::GenData {
            oracle,
            count,
            seed,
            out,
        } => gen_data(&oracle, count, seed, &out),
        Command::Train {
            data,
            config,
            out,
            report,
        } => train(&data, config.as_deref(), &out, report.as_deref()),
        Command::Retarget {
            model,
            rig,
            coeffs,
            out,
            options,
            report,
            table,
        } => retarget(
            &model,
            &rig,
            &coeffs,
            &out,
            options.as_deref(),
            report.as_deref(),
            table.as_deref(),
        ),
        Command::EncodeServo {
            input,
            out,
            input_rate,
            rate,
            table,
            start_seq,
        } => encode_servo(&input, &out, input_rate, rate, table.as_deref(), start_seq),
        Command::Align {
            reference,
            query,
            out,
            band,
            warped,
        } => align(&reference, &query, &out, band, warped.as_deref()),
        Command::SynthCorpus { spec, out } => synth_corpus(spec.as_deref(), &out),
        Command::TrainDecoder {
            corpus,
            config,
            out,
            report,
        } => train_decoder_cmd(&corpus, config.as_deref(), &out, report.as_deref()),
        Command::Infer {
            model,
            content,
            emotion,
            out,
        } => infer(&model, &content, emotion.as_deref(), &out),
        Command::Simulate {
            oracle,
            motors,
            out,
            table,
        } => simulate(&oracle, &motors, &out, table.as_deref()),
        Command::Eval {
            truth,
            predicted,
            regions,
            mm_per_unit,
            json,
        } => eval(
            &truth,
            &predicted,
            regions.as_deref(),
            mm_per_unit,
            json.as_deref(),
        ),
        Command::RigApply { rig, coeffs, out } => rig_apply(&rig, &coeffs, &out),
    }
}

/// Loads a JSON config file, or the type's defaults when no path is
/// given. Missing fields fall back field-by-field via `serde(default)`.
fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))
        }
    }
}

/// Loads a motor table from text, or the built-in table.
fn load_table(path: Option<&Path>) -> Result<MotorSpecTable> {
    match path {
        None => Ok(MotorSpecTable::builtin()),
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(MotorSpecTable::parse(&text)?)
        }
    }
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn build_oracle(out: &Path, config: Option<&Path>, seed: u64, linear: bool) -> Result<()> {
    let mut config: OracleConfig = load_config(config)?;
    if linear {
        config.linear = true;
    }
    let oracle = FaceOracle::build(&config, seed)?;
    oracle.save(out)?;
    println!(
        "wrote {} oracle (seed {seed}, hash {:016x}) to {}",
        if oracle.config().linear {
            "linear"
        } else {
            "nonlinear"
        },
        oracle.content_hash(),
        out.display()
    );
    Ok(())
}

fn build_rig(oracle: &Path, out: &Path) -> Result<()> {
    let oracle = FaceOracle::load(oracle)?;
    let rig = visage_core::rig::build_default_rig(&oracle)?;
    rig.save(out)?;
    println!("wrote rig to {}", out.display());
    Ok(())
}

fn gen_data(oracle: &Path, count: usize, seed: u64, out: &Path) -> Result<()> {
    let oracle = FaceOracle::load(oracle)?;
    let dataset = generate_dataset(&oracle, count, seed)?;
    dataset.save(out)?;
    println!("wrote {count} samples (seed {seed}) to {}", out.display());
    Ok(())
}

#[derive(serde::Serialize)]
struct TrainSummary {
    seed: u64,
    epochs: usize,
    validation_mae: f64,
}

fn train(data: &Path, config: Option<&Path>, out: &Path, report: Option<&Path>) -> Result<()> {
    let dataset = Dataset::load(data)?;
    let config: TrainConfig = load_config(config)?;
    let model = train_self_model(&dataset, &config)?;
    model.save(out)?;
    let summary = TrainSummary {
        seed: model.seed,
        epochs: model.epochs,
        validation_mae: model.validation_mae,
    };
    if let Some(p) = report {
        write_json(p, &summary)?;
    }
    println!(
        "trained {} epochs, validation MAE {:.6}; wrote model to {}",
        summary.epochs,
        summary.validation_mae,
        out.display()
    );
    Ok(())
}

#[derive(serde::Serialize)]
struct FrameSolve {
    iterations: usize,
    converged: bool,
    final_loss: f64,
}

#[derive(serde::Serialize)]
struct RetargetSummary {
    frames: usize,
    converged_frames: usize,
    mean_iterations: f64,
    mean_final_loss: f64,
    max_final_loss: f64,
    per_frame: Vec<FrameSolve>,
}

fn retarget(
    model: &Path,
    rig: &Path,
    coeffs: &Path,
    out: &Path,
    options: Option<&Path>,
    report: Option<&Path>,
    table: Option<&Path>,
) -> Result<()> {
    let model = SelfModel::load(model)?;
    let rig = BlendshapeRig::load(rig)?;
    let coeffs = csvio::read_coeffs(coeffs)?;
    let options: SolverOptions = load_config(options)?;
    let table = load_table(table)?;
    let output = blendshape_to_motor(&model, &rig, &coeffs, &options)?;
    csvio::write_motors(out, &output.motors, &table)?;

    let per_frame: Vec<FrameSolve> = output
        .reports
        .iter()
        .map(|r| FrameSolve {
            iterations: r.iterations_used,
            converged: r.converged,
            final_loss: r.final_loss,
        })
        .collect();
    let frames = per_frame.len();
    let summary = RetargetSummary {
        frames,
        converged_frames: per_frame.iter().filter(|f| f.converged).count(),
        mean_iterations: per_frame.iter().map(|f| f.iterations as f64).sum::<f64>() / frames as f64,
        mean_final_loss: per_frame.iter().map(|f| f.final_loss).sum::<f64>() / frames as f64,
        max_final_loss: per_frame.iter().map(|f| f.final_loss).fold(0.0, f64::max),
        per_frame,
    };
    if let Some(p) = report {
        write_json(p, &summary)?;
    }
    println!(
        "retargeted {} frames ({} converged, mean loss {:.3e}); wrote motors to {}",
        summary.frames,
        summary.converged_frames,
        summary.mean_final_loss,
        out.display()
    );
    Ok(())
}

fn encode_servo(
    input: &Path,
    out: &Path,
    input_rate: f64,
    rate: f64,
    table: Option<&Path>,
    start_seq: u16,
) -> Result<()> {
    let table = load_table(table)?;
    let motors = csvio::read_motors(input, &table)?;
    let resampled = csvio::resample_hold(&motors, input_rate, rate)?;
    let mut bytes = Vec::with_capacity(resampled.len() * SERVO_FRAME_LEN);
    for (k, m) in resampled.iter().enumerate() {
        let seq = start_seq.wrapping_add(k as u16);
        let frame = ServoFrame::from_expression(&table, m, seq)?;
        bytes.extend_from_slice(&frame.encode()?);
    }
    fs::write(out, &bytes).with_context(|| format!("writing {}", out.display()))?;
    println!(
        "encoded {} frames at {rate} Hz ({} bytes) to {}",
        resampled.len(),
        bytes.len(),
        out.display()
    );
    Ok(())
}

#[derive(serde::Serialize)]
struct PathRow {
    reference_frame: usize,
    query_frame: usize,
}

fn align(
    reference: &Path,
    query: &Path,
    out: &Path,
    band: Option<usize>,
    warped: Option<&Path>,
) -> Result<()> {
    let reference = FeatureSequence::load(reference)?;
    let query = FeatureSequence::load(query)?;
    let path = dtw_with_band(&reference, &query, band)?;

    let mut w =
        csv::Writer::from_path(out).with_context(|| format!("creating {}", out.display()))?;
    for &(i, j) in &path.pairs {
        w.serialize(PathRow {
            reference_frame: i,
            query_frame: j,
        })?;
    }
    w.flush()?;
    println!(
        "aligned {} x {} frames: {} pairs, total cost {:.6}; wrote path to {}",
        reference.len(),
        query.len(),
        path.pairs.len(),
        path.total_cost,
        out.display()
    );
    if let Some(p) = warped {
        let seq = warp_to_reference(&path, &query)?.with_frame_rate(reference.frame_rate)?;
        seq.save(p)?;
        println!(
            "wrote warped query ({} frames) to {}",
            seq.len(),
            p.display()
        );
    }
    Ok(())
}

fn synth_corpus(spec: Option<&Path>, out: &Path) -> Result<()> {
    let spec: CorpusSpec = load_config(spec)?;
    let corpus: SynthCorpus = generate_corpus(&spec)?;
    corpus.save(out)?;
    let frames: usize = corpus.items.iter().map(|i| i.features.len()).sum();
    println!(
        "wrote corpus ({} contents x {} emotions, {frames} frames) to {}",
        spec.contents,
        spec.emotions,
        out.display()
    );
    Ok(())
}

fn train_decoder_cmd(
    corpus: &Path,
    config: Option<&Path>,
    out: &Path,
    report: Option<&Path>,
) -> Result<()> {
    let corpus = SynthCorpus::load(corpus)?;
    let config: DecoderTrainConfig = load_config(config)?;
    let (model, train_report) = train_decoder(&corpus, &config)?;
    model.save(out)?;
    if let Some(p) = report {
        write_json(p, &train_report)?;
    }
    let last = train_report.epoch_losses.last().copied().unwrap_or(0.0);
    println!(
        "trained decoder {} epochs ({} self items, {} cross pairs), final loss {:.6}, validation {:.6}; wrote model to {}",
        train_report.epoch_losses.len(),
        train_report.self_items,
        train_report.cross_pairs,
        last,
        train_report.validation_loss,
        out.display()
    );
    Ok(())
}

fn infer(model: &Path, content: &Path, emotion: Option<&Path>, out: &Path) -> Result<()> {
    let model = DecoderModel::load(model)?;
    let content = FeatureSequence::load(content)?;
    let emotion = emotion.map(FeatureSequence::load).transpose()?;
    let coeffs = infer_blendshapes(&model, &content, emotion.as_ref())?;
    csvio::write_coeffs(out, &coeffs)?;
    println!(
        "decoded {} frames{}; wrote coefficients to {}",
        coeffs.len(),
        if emotion.is_some() {
            " with emotion transfer"
        } else {
            ""
        },
        out.display()
    );
    Ok(())
}

fn simulate(oracle: &Path, motors: &Path, out: &Path, table: Option<&Path>) -> Result<()> {
    let oracle = FaceOracle::load(oracle)?;
    let table = load_table(table)?;
    let motors = csvio::read_motors(motors, &table)?;
    let frames = motors
        .iter()
        .map(|m| oracle.simulate_landmarks(m))
        .collect::<visage_core::Result<Vec<_>>>()?;
    csvio::write_landmarks(out, &frames)?;
    println!(
        "simulated {} frames; wrote landmarks to {}",
        frames.len(),
        out.display()
    );
    Ok(())
}

fn eval(
    truth: &Path,
    predicted: &Path,
    regions: Option<&Path>,
    mm_per_unit: Option<f64>,
    json: Option<&Path>,
) -> Result<()> {
    let truth = csvio::read_landmarks(truth)?;
    let predicted = csvio::read_landmarks(predicted)?;
    let regions: FaceRegions = load_config(regions)?;
    let mut calibration = Calibration::default();
    if let Some(mm) = mm_per_unit {
        calibration.mm_per_unit = mm;
    }
    let metrics = evaluate_sequence(&truth, &predicted, &regions, &calibration)?;
    if let Some(p) = json {
        write_json(p, &metrics)?;
    }
    println!("frames:           {}", metrics.frames);
    println!(
        "lip vertex error: mean {:.4} mm, max {:.4} mm",
        metrics.lve_mean, metrics.lve_max
    );
    println!(
        "eye vertex error: mean {:.4} mm, max {:.4} mm",
        metrics.eve_mean, metrics.eve_max
    );
    println!("mean distance:    {:.4} mm", metrics.mean_distance);
    Ok(())
}

fn rig_apply(rig: &Path, coeffs: &Path, out: &Path) -> Result<()> {
    let rig = BlendshapeRig::load(rig)?;
    let coeffs = csvio::read_coeffs(coeffs)?;
    let frames: Vec<_> = coeffs.iter().map(|c| rig.rig_landmarks(c)).collect();
    csvio::write_landmarks(out, &frames)?;
    println!(
        "rigged {} frames; wrote landmarks to {}",
        frames.len(),
        out.display()
    );
    Ok(())
}
