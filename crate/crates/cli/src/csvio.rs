//! CSV interchange formats used by the command-line tools.
//!
//! Three long-format layouts, all with a header row and dense,
//! zero-based, contiguous frame indices:
//!
//! * **motors** — `frame,motor_id,normalized,pwm`: one row per
//!   expression motor per frame. The `normalized` column is
//!   authoritative on read; `pwm` is informational output for humans
//!   and hardware logs.
//! * **coeffs** — `frame,shape,value`: one row per blendshape
//!   coefficient per frame (33 rows per frame).
//! * **landmarks** — `frame,index,x,y`: one row per landmark per frame
//!   (468 rows per frame).

use anyhow::{bail, Context, Result};
use std::collections::BTreeMap;
use std::path::Path;
use visage_core::landmarks::LANDMARK_COUNT;
use visage_core::motor::{MotorSpecTable, EXPRESSION_MOTOR_COUNT};
use visage_core::rig::BLENDSHAPE_COUNT;
use visage_core::{BlendshapeCoeffs, LandmarkSet, MotorVector, Scalar};

#[derive(serde::Serialize, serde::Deserialize)]
struct MotorRow {
    frame: u32,
    motor_id: u8,
    normalized: f64,
    pwm: u16,
}

#[derive(serde::Serialize, serde::Deserialize)]
struct CoeffRow {
    frame: u32,
    shape: u32,
    value: f64,
}

#[derive(serde::Serialize, serde::Deserialize)]
struct LandmarkRow {
    frame: u32,
    index: u32,
    x: f64,
    y: f64,
}

/// Collects `(frame, slot) → value` rows into dense per-frame vectors,
/// enforcing contiguous frames and exactly one value per slot.
fn assemble<T: Copy>(
    rows: Vec<(u32, usize, T)>,
    slots: usize,
    what: &str,
) -> Result<Vec<Vec<Option<T>>>> {
    let mut frames: BTreeMap<u32, Vec<Option<T>>> = BTreeMap::new();
    for (frame, slot, value) in rows {
        if slot >= slots {
            bail!("{what}: slot {slot} out of range (frame {frame})");
        }
        let entry = frames.entry(frame).or_insert_with(|| vec![None; slots]);
        if entry[slot].is_some() {
            bail!("{what}: duplicate entry for frame {frame}, slot {slot}");
        }
        entry[slot] = Some(value);
    }
    if frames.is_empty() {
        bail!("{what}: no rows");
    }
    let count = frames.len() as u32;
    if *frames.keys().next_back().unwrap() != count - 1 {
        bail!("{what}: frame indices must be contiguous from 0");
    }
    for (frame, vals) in &frames {
        if let Some(slot) = vals.iter().position(Option::is_none) {
            bail!("{what}: frame {frame} is missing slot {slot}");
        }
    }
    Ok(frames.into_values().collect())
}

/// Writes a motor CSV; the `pwm` column is derived through the table.
pub fn write_motors(path: &Path, motors: &[MotorVector], table: &MotorSpecTable) -> Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for (frame, m) in motors.iter().enumerate() {
        let pwm = m.to_pwm(table)?;
        for (i, &(motor_id, pwm)) in pwm.iter().enumerate() {
            w.serialize(MotorRow {
                frame: frame as u32,
                motor_id,
                normalized: m.get(i),
                pwm,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a motor CSV (the `normalized` column; `pwm` is ignored).
pub fn read_motors(path: &Path, table: &MotorSpecTable) -> Result<Vec<MotorVector>> {
    let mut r =
        csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let mut rows = Vec::new();
    for rec in r.deserialize() {
        let row: MotorRow = rec.context("malformed motor row")?;
        let Some(slot) = table.expression_index(row.motor_id) else {
            bail!(
                "motor csv: motor id {} is not an expression motor",
                row.motor_id
            );
        };
        rows.push((row.frame, slot, row.normalized));
    }
    let frames = assemble(rows, EXPRESSION_MOTOR_COUNT, "motor csv")?;
    frames
        .into_iter()
        .enumerate()
        .map(|(frame, vals)| {
            let vals: Vec<Scalar> = vals.into_iter().map(Option::unwrap).collect();
            MotorVector::new(
                vals.try_into()
                    .map_err(|_| anyhow::anyhow!("motor csv: wrong motor count"))?,
            )
            .with_context(|| format!("motor csv: frame {frame}"))
        })
        .collect()
}

/// Writes a blendshape-coefficient CSV.
pub fn write_coeffs(path: &Path, frames: &[BlendshapeCoeffs]) -> Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for (frame, c) in frames.iter().enumerate() {
        for (shape, &value) in c.values().iter().enumerate() {
            w.serialize(CoeffRow {
                frame: frame as u32,
                shape: shape as u32,
                value,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a blendshape-coefficient CSV.
pub fn read_coeffs(path: &Path) -> Result<Vec<BlendshapeCoeffs>> {
    let mut r =
        csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let mut rows = Vec::new();
    for rec in r.deserialize() {
        let row: CoeffRow = rec.context("malformed coefficient row")?;
        rows.push((row.frame, row.shape as usize, row.value));
    }
    let frames = assemble(rows, BLENDSHAPE_COUNT, "coefficient csv")?;
    frames
        .into_iter()
        .enumerate()
        .map(|(frame, vals)| {
            let vals: Vec<Scalar> = vals.into_iter().map(Option::unwrap).collect();
            BlendshapeCoeffs::from_slice(&vals)
                .with_context(|| format!("coefficient csv: frame {frame}"))
        })
        .collect()
}

/// Writes a landmark CSV.
pub fn write_landmarks(path: &Path, frames: &[LandmarkSet]) -> Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for (frame, set) in frames.iter().enumerate() {
        for (index, p) in set.points().iter().enumerate() {
            w.serialize(LandmarkRow {
                frame: frame as u32,
                index: index as u32,
                x: p[0],
                y: p[1],
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a landmark CSV.
pub fn read_landmarks(path: &Path) -> Result<Vec<LandmarkSet>> {
    let mut r =
        csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let mut rows = Vec::new();
    for rec in r.deserialize() {
        let row: LandmarkRow = rec.context("malformed landmark row")?;
        rows.push((row.frame, row.index as usize, [row.x, row.y]));
    }
    let frames = assemble(rows, LANDMARK_COUNT, "landmark csv")?;
    frames
        .into_iter()
        .enumerate()
        .map(|(frame, vals)| {
            let pts: Vec<[Scalar; 2]> = vals.into_iter().map(Option::unwrap).collect();
            LandmarkSet::from_points(pts).with_context(|| format!("landmark csv: frame {frame}"))
        })
        .collect()
}

/// Zero-order-hold resampling from `rate_in` to `rate_out` frames per
/// second: output tick `k` (at time `k / rate_out`) takes the most
/// recent input frame. Output length is `ceil(n · rate_out / rate_in)`
/// so the full input duration is covered.
pub fn resample_hold<T: Clone>(frames: &[T], rate_in: f64, rate_out: f64) -> Result<Vec<T>> {
    if frames.is_empty() {
        bail!("nothing to resample");
    }
    for (name, r) in [("input", rate_in), ("output", rate_out)] {
        if !(r.is_finite() && r > 0.0) {
            bail!("{name} rate {r} must be positive and finite");
        }
    }
    let n_out = ((frames.len() as f64) * rate_out / rate_in).ceil() as usize;
    Ok((0..n_out.max(1))
        .map(|k| {
            let src = ((k as f64) * rate_in / rate_out).floor() as usize;
            frames[src.min(frames.len() - 1)].clone()
        })
        .collect())
}
