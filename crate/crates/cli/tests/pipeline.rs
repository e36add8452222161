//! Drives both pipelines end to end through the command layer: oracle
//! → rig → dataset → self-model → retarget → servo frames, and corpus
//! → decoder → inference → alignment, finishing with metric evaluation
//! of the round trip. Uses deliberately tiny training budgets — the
//! point here is that every stage wires to the next through files, not
//! model accuracy.

use std::fs;
use std::path::{Path, PathBuf};
use visage_cli::commands::dispatch;
use visage_cli::Command;
use visage_core::motor::{ServoFrame, SERVO_FRAME_LEN};
use visage_core::{FeatureSequence, SynthCorpus};

fn p(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

#[test]
fn both_pipelines_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();

    // Face side: oracle, rig, babble data, self-model.
    dispatch(Command::BuildOracle {
        out: p(d, "oracle.forc"),
        config: None,
        seed: 11,
        linear: false,
    })
    .unwrap();
    dispatch(Command::BuildRig {
        oracle: p(d, "oracle.forc"),
        out: p(d, "rig.brig"),
    })
    .unwrap();
    dispatch(Command::GenData {
        oracle: p(d, "oracle.forc"),
        count: 48,
        seed: 3,
        out: p(d, "data.fdst"),
    })
    .unwrap();

    fs::write(
        p(d, "train.json"),
        r#"{"epochs": 2, "batch_size": 16, "learning_rate": 1e-4}"#,
    )
    .unwrap();
    dispatch(Command::Train {
        data: p(d, "data.fdst"),
        config: Some(p(d, "train.json")),
        out: p(d, "model.smdl"),
        report: Some(p(d, "train_report.json")),
    })
    .unwrap();
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(p(d, "train_report.json")).unwrap()).unwrap();
    assert_eq!(report["epochs"], 2);
    assert!(report["validation_mae"].as_f64().unwrap().is_finite());

    // Speech side: corpus, decoder, inference.
    fs::write(
        p(d, "corpus.json"),
        r#"{"contents": 2, "emotions": 2, "base_frames": 10, "seed": 5}"#,
    )
    .unwrap();
    dispatch(Command::SynthCorpus {
        spec: Some(p(d, "corpus.json")),
        out: p(d, "corpus.corp"),
    })
    .unwrap();
    fs::write(
        p(d, "decoder.json"),
        r#"{"epochs": 2, "width": 16, "heads": 2, "batch_size": 2, "max_cross_pairs": 2}"#,
    )
    .unwrap();
    dispatch(Command::TrainDecoder {
        corpus: p(d, "corpus.corp"),
        config: Some(p(d, "decoder.json")),
        out: p(d, "decoder.edec"),
        report: Some(p(d, "decoder_report.json")),
    })
    .unwrap();
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(p(d, "decoder_report.json")).unwrap()).unwrap();
    assert_eq!(report["epoch_losses"].as_array().unwrap().len(), 2);

    // Pull two corpus items out as standalone feature files: one as
    // content, one (different emotion, different tempo) as the donor.
    let corpus = SynthCorpus::load(&p(d, "corpus.corp")).unwrap();
    let content = &corpus.item(0, 0).unwrap().features;
    let donor = &corpus.item(1, 1).unwrap().features;
    content.save(&p(d, "content.fseq")).unwrap();
    donor.save(&p(d, "donor.fseq")).unwrap();
    let content_len = content.len();
    let donor_len = donor.len();
    assert_ne!(content_len, donor_len, "tempo should change the length");

    dispatch(Command::Infer {
        model: p(d, "decoder.edec"),
        content: p(d, "content.fseq"),
        emotion: Some(p(d, "donor.fseq")),
        out: p(d, "coeffs.csv"),
    })
    .unwrap();

    // Alignment of the two sequences, plus the warped donor.
    dispatch(Command::Align {
        reference: p(d, "content.fseq"),
        query: p(d, "donor.fseq"),
        out: p(d, "path.csv"),
        band: None,
        warped: Some(p(d, "warped.fseq")),
    })
    .unwrap();
    let warped = FeatureSequence::load(&p(d, "warped.fseq")).unwrap();
    assert_eq!(warped.len(), content_len);
    let path_text = fs::read_to_string(p(d, "path.csv")).unwrap();
    assert!(path_text.starts_with("reference_frame,query_frame"));
    assert!(path_text.lines().count() > content_len.max(donor_len));

    // Retarget the decoded coefficients to motors, with a small
    // iteration budget, then down to the wire format.
    fs::write(p(d, "solver.json"), r#"{"max_iterations": 40}"#).unwrap();
    dispatch(Command::Retarget {
        model: p(d, "model.smdl"),
        rig: p(d, "rig.brig"),
        coeffs: p(d, "coeffs.csv"),
        out: p(d, "motors.csv"),
        options: Some(p(d, "solver.json")),
        report: Some(p(d, "retarget_report.json")),
        table: None,
    })
    .unwrap();
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(p(d, "retarget_report.json")).unwrap()).unwrap();
    assert_eq!(report["frames"], content_len as u64);

    dispatch(Command::EncodeServo {
        input: p(d, "motors.csv"),
        out: p(d, "frames.bin"),
        input_rate: 30.0,
        rate: 50.0,
        table: None,
        start_seq: 7,
    })
    .unwrap();
    let bytes = fs::read(p(d, "frames.bin")).unwrap();
    assert_eq!(bytes.len() % SERVO_FRAME_LEN, 0);
    let first = ServoFrame::decode(&bytes[..SERVO_FRAME_LEN]).unwrap();
    assert_eq!(first.seq, 7);
    let second = ServoFrame::decode(&bytes[SERVO_FRAME_LEN..2 * SERVO_FRAME_LEN]).unwrap();
    assert_eq!(second.seq, 8);

    // Close the loop: desired landmarks from the rig, achieved
    // landmarks from the oracle, metric comparison between them.
    dispatch(Command::RigApply {
        rig: p(d, "rig.brig"),
        coeffs: p(d, "coeffs.csv"),
        out: p(d, "truth.csv"),
    })
    .unwrap();
    dispatch(Command::Simulate {
        oracle: p(d, "oracle.forc"),
        motors: p(d, "motors.csv"),
        out: p(d, "predicted.csv"),
        table: None,
    })
    .unwrap();
    dispatch(Command::Eval {
        truth: p(d, "truth.csv"),
        predicted: p(d, "predicted.csv"),
        regions: None,
        mm_per_unit: None,
        json: Some(p(d, "metrics.json")),
    })
    .unwrap();
    let metrics: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(p(d, "metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["frames"], content_len as u64);
    for key in [
        "lve_mean",
        "lve_max",
        "eve_mean",
        "eve_max",
        "mean_distance",
    ] {
        let v = metrics[key].as_f64().unwrap();
        assert!(v.is_finite() && v >= 0.0, "{key} = {v}");
    }
}

#[test]
fn linear_flag_and_partial_configs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();

    // A config file may set just a few fields; --linear overrides.
    fs::write(p(d, "oracle.json"), r#"{"coupling_terms": 1}"#).unwrap();
    dispatch(Command::BuildOracle {
        out: p(d, "oracle.forc"),
        config: Some(p(d, "oracle.json")),
        seed: 1,
        linear: true,
    })
    .unwrap();
    let oracle = visage_core::FaceOracle::load(&p(d, "oracle.forc")).unwrap();
    assert!(oracle.config().linear);
    assert_eq!(oracle.config().coupling_terms, 1);
}
