//! Physical motor table, PWM normalization, and the servo wire
//! protocol.
//!
//! The face is actuated by 33 servo motors. Each motor has a calibrated
//! PWM interval (`lower`, `start`, `upper`); intervals may run in either
//! direction (`upper < lower` is common), so normalization is
//! direction-agnostic: `normalize` maps `lower → 0.0` and `upper → 1.0`
//! regardless of which raw value is larger. Start values define the
//! canonical neutral pose.
//!
//! Seven motors are excluded from expression retargeting — eye gaze
//! (7, 24), tongue (11, 12), and neck (31–33) — leaving the 26
//! expression motors the rest of the pipeline works in. Expression
//! motors are split into an upper-face and a lower-face group, one per
//! self-model subnetwork; the split keeps each side of the face with
//! its own cheek and nose actuators (nose with the upper group, cheek
//! with the lower).
//!
//! PWM values are opaque calibration integers in `0..=2000`; nothing
//! here assigns them units.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Number of motors on the physical face.
pub const MOTOR_COUNT: usize = 33;
/// Number of motors used for expression retargeting.
pub const EXPRESSION_MOTOR_COUNT: usize = 26;
/// Largest raw PWM command the servo bus accepts.
pub const PWM_MAX: u16 = 2000;

/// How a motor couples to the skin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriveType {
    /// Direct mechanical linkage.
    Rigid,
    /// Tendon (wire) drive; cheek and nose motors.
    Tendon,
}

/// Retargeting group a motor belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotorGroup {
    /// Upper-face expression group (brows, eyelids, nose).
    Upper,
    /// Lower-face expression group (mouth, jaw, chin, cheeks).
    Lower,
    /// Not used for expression retargeting (gaze, tongue, neck).
    Excluded,
}

/// Calibration record for one motor.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct MotorSpec {
    /// Motor id, `1..=33`.
    pub id: u8,
    /// Human-readable actuator name.
    pub name: String,
    /// PWM at the normalized-0 end of travel.
    pub lower_pwm: u16,
    /// PWM of the neutral (rest) pose.
    pub start_pwm: u16,
    /// PWM at the normalized-1 end of travel.
    pub upper_pwm: u16,
    /// Mechanical coupling.
    pub drive: DriveType,
    /// Retargeting group.
    pub group: MotorGroup,
}

impl MotorSpec {
    /// Smallest and largest raw PWM of the travel interval.
    pub fn pwm_bounds(&self) -> (u16, u16) {
        (
            self.lower_pwm.min(self.upper_pwm),
            self.lower_pwm.max(self.upper_pwm),
        )
    }

    fn validate(&self) -> Result<()> {
        if self.id == 0 || self.id as usize > MOTOR_COUNT {
            return Err(Error::config(format!(
                "motor id {} outside 1..={MOTOR_COUNT}",
                self.id
            )));
        }
        if self.name.trim().is_empty() {
            return Err(Error::config(format!(
                "motor {} has an empty name",
                self.id
            )));
        }
        for (label, v) in [
            ("lower", self.lower_pwm),
            ("start", self.start_pwm),
            ("upper", self.upper_pwm),
        ] {
            if v > PWM_MAX {
                return Err(Error::config(format!(
                    "motor {}: {label} PWM {v} exceeds {PWM_MAX}",
                    self.id
                )));
            }
        }
        if self.lower_pwm == self.upper_pwm {
            return Err(Error::config(format!(
                "motor {}: degenerate travel interval ({} == {})",
                self.id, self.lower_pwm, self.upper_pwm
            )));
        }
        let (lo, hi) = self.pwm_bounds();
        if self.start_pwm < lo || self.start_pwm > hi {
            return Err(Error::config(format!(
                "motor {}: start PWM {} outside travel [{lo}, {hi}]",
                self.id, self.start_pwm
            )));
        }
        Ok(())
    }
}

/// Builtin calibration values: (id, name, lower, start, upper, drive, group).
#[rustfmt::skip]
const BUILTIN: [(u8, &str, u16, u16, u16, DriveType, MotorGroup); MOTOR_COUNT] = {
    use DriveType::{Rigid as R, Tendon as T};
    use MotorGroup::{Excluded as X, Lower as L, Upper as U};
    [
        (1,  "Left Cheek",                        1800, 1800, 1400, T, L),
        (2,  "Left Nose",                          800,  800,    0, T, U),
        (3,  "Left Eyebrow Center",                980, 1080, 1480, R, U),
        (4,  "Left Eyebrow Peak",                 1100,  800,  500, R, U),
        (5,  "Left Upper Eyelid",                 1700, 1300,  600, R, U),
        (6,  "Left Lower Eyelid",                 1000, 1200, 1800, R, U),
        (7,  "Eyes Up/Down Gaze",                  300, 1000, 1500, R, X),
        (8,  "Upper Lip Center",                  1000, 1000,  600, R, L),
        (9,  "Left Upper Corner Mouth Movement",   500, 1000, 1500, R, L),
        (10, "Upper Lip Right",                   1000, 1000, 1200, R, L),
        (11, "Tongue Extension/Retraction",        800, 1000, 1200, R, X),
        (12, "Tongue Up/Down",                     800,  500,  300, R, X),
        (13, "Chin (passive)",                    1200, 1600, 1600, R, L),
        (14, "Left Lower Corner Mouth Movement",  1000, 1000, 1500, R, L),
        (15, "Lower Lip Center",                  1300, 1300, 1900, R, L),
        (16, "Lower Lip Left",                    1500, 1500,  800, R, L),
        (17, "Lower Lip Right",                    800,  800, 1200, R, L),
        (18, "Chin (active)",                     1200, 1600, 1600, R, L),
        (19, "Right Lower Corner Mouth Movement", 1000, 1000,  500, R, L),
        (20, "Jaw Left/Right",                     400, 1000, 1600, R, L),
        (21, "Upper Lip Left",                    1000, 1000,  800, R, L),
        (22, "Right Upper Corner Mouth Movement", 1500, 1000,  500, R, L),
        (23, "Mouth Opening/Closing",             1150, 1050, 1050, R, L),
        (24, "Eyes Left/Right Gaze",               800, 1150, 1500, R, X),
        (25, "Right Lower Eyelid",                1200, 1000,  400, R, U),
        (26, "Right Upper Eyelid",                 500, 1000, 1600, R, U),
        (27, "Right Eyebrow Peak",                 900, 1200, 1500, R, U),
        (28, "Right Eyebrow Center",              1300, 1200,  800, R, U),
        (29, "Right Nose",                        1200, 1200, 2000, T, U),
        (30, "Right Cheek",                          0,    0,  600, T, L),
        (31, "Neck Rotation",                     1500, 1750, 2000, R, X),
        (32, "Neck Nodding/Shaking (left)",        900, 1200, 1300, R, X),
        (33, "Neck Nodding/Shaking (right)",      1200,  900,  800, R, X),
    ]
};

/// The full 33-motor calibration table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MotorSpecTable {
    specs: Vec<MotorSpec>, // sorted by id, exactly MOTOR_COUNT entries
}

impl MotorSpecTable {
    /// The builtin calibration table for the reference face.
    pub fn builtin() -> Self {
        let specs = BUILTIN
            .iter()
            .map(|&(id, name, lower, start, upper, drive, group)| MotorSpec {
                id,
                name: name.to_string(),
                lower_pwm: lower,
                start_pwm: start,
                upper_pwm: upper,
                drive,
                group,
            })
            .collect();
        let table = MotorSpecTable { specs };
        table.validate().expect("builtin table is valid");
        table
    }

    /// Builds a table from explicit specs (any order; ids must cover
    /// `1..=33` exactly once).
    pub fn from_specs(mut specs: Vec<MotorSpec>) -> Result<Self> {
        specs.sort_by_key(|s| s.id);
        let table = MotorSpecTable { specs };
        table.validate()?;
        Ok(table)
    }

    fn validate(&self) -> Result<()> {
        if self.specs.len() != MOTOR_COUNT {
            return Err(Error::config(format!(
                "motor table needs {MOTOR_COUNT} rows, got {}",
                self.specs.len()
            )));
        }
        for (i, spec) in self.specs.iter().enumerate() {
            spec.validate()?;
            if spec.id as usize != i + 1 {
                return Err(Error::config(format!(
                    "motor table ids must cover 1..={MOTOR_COUNT} exactly once (missing or duplicate id {})",
                    i + 1
                )));
            }
        }
        Ok(())
    }

    /// All specs, ascending by id.
    pub fn specs(&self) -> &[MotorSpec] {
        &self.specs
    }

    /// Spec for a motor id.
    pub fn spec(&self, id: u8) -> Result<&MotorSpec> {
        self.specs
            .get(id.wrapping_sub(1) as usize)
            .ok_or_else(|| Error::input(format!("unknown motor id {id}")))
    }

    /// Ids of the 26 expression motors, ascending.
    pub fn expression_ids(&self) -> Vec<u8> {
        self.specs
            .iter()
            .filter(|s| s.group != MotorGroup::Excluded)
            .map(|s| s.id)
            .collect()
    }

    /// Position of a motor id within the expression ordering, if it is
    /// an expression motor.
    pub fn expression_index(&self, id: u8) -> Option<usize> {
        self.expression_ids().iter().position(|&e| e == id)
    }

    /// Ids of expression motors in `group`, ascending.
    pub fn group_ids(&self, group: MotorGroup) -> Vec<u8> {
        self.specs
            .iter()
            .filter(|s| s.group == group)
            .map(|s| s.id)
            .collect()
    }

    /// Serializes as the text calibration format parsed by
    /// [`MotorSpecTable::parse`].
    pub fn to_text(&self) -> String {
        let mut out = String::from("# id,name,lower,start,upper,drive,group\n");
        for s in &self.specs {
            let drive = match s.drive {
                DriveType::Rigid => "rigid",
                DriveType::Tendon => "tendon",
            };
            let group = match s.group {
                MotorGroup::Upper => "upper",
                MotorGroup::Lower => "lower",
                MotorGroup::Excluded => "excluded",
            };
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                s.id, s.name, s.lower_pwm, s.start_pwm, s.upper_pwm, drive, group
            ));
        }
        out
    }

    /// Parses the text calibration format: one `id,name,lower,start,
    /// upper,drive,group` row per motor; `#` comments and blank lines
    /// ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut specs = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 7 {
                return Err(Error::format(format!(
                    "motor table line {}: expected 7 comma-separated fields, got {}",
                    lineno + 1,
                    fields.len()
                )));
            }
            let parse_u16 = |s: &str, what: &str| -> Result<u16> {
                s.parse().map_err(|_| {
                    Error::format(format!(
                        "motor table line {}: bad {what} value {s:?}",
                        lineno + 1
                    ))
                })
            };
            let drive = match fields[5] {
                "rigid" => DriveType::Rigid,
                "tendon" => DriveType::Tendon,
                other => {
                    return Err(Error::format(format!(
                        "motor table line {}: unknown drive type {other:?}",
                        lineno + 1
                    )))
                }
            };
            let group = match fields[6] {
                "upper" => MotorGroup::Upper,
                "lower" => MotorGroup::Lower,
                "excluded" => MotorGroup::Excluded,
                other => {
                    return Err(Error::format(format!(
                        "motor table line {}: unknown group {other:?}",
                        lineno + 1
                    )))
                }
            };
            specs.push(MotorSpec {
                id: parse_u16(fields[0], "id")? as u8,
                name: fields[1].to_string(),
                lower_pwm: parse_u16(fields[2], "lower")?,
                start_pwm: parse_u16(fields[3], "start")?,
                upper_pwm: parse_u16(fields[4], "upper")?,
                drive,
                group,
            });
        }
        Self::from_specs(specs)
    }
}

/// Maps a raw PWM inside a motor's travel interval to `[0, 1]`.
///
/// Direction-agnostic: `lower_pwm → 0.0`, `upper_pwm → 1.0`, even when
/// the interval runs downward.
pub fn normalize(spec: &MotorSpec, pwm: u16) -> Result<f64> {
    let (lo, hi) = spec.pwm_bounds();
    if pwm < lo || pwm > hi {
        return Err(Error::input(format!(
            "motor {}: PWM {pwm} outside travel [{lo}, {hi}]",
            spec.id
        )));
    }
    Ok((pwm as f64 - spec.lower_pwm as f64) / (spec.upper_pwm as f64 - spec.lower_pwm as f64))
}

/// Maps a normalized command in `[0, 1]` back to a raw PWM.
///
/// Rounds half away from zero to the nearest integer PWM.
pub fn denormalize(spec: &MotorSpec, x: f64) -> Result<u16> {
    if !x.is_finite() || !(0.0..=1.0).contains(&x) {
        return Err(Error::input(format!(
            "motor {}: normalized command {x} outside [0, 1]",
            spec.id
        )));
    }
    let raw = spec.lower_pwm as f64 + x * (spec.upper_pwm as f64 - spec.lower_pwm as f64);
    Ok(raw.round() as u16)
}

/// Normalized commands for the 26 expression motors, ascending by id.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotorVector<R> {
    values: [R; EXPRESSION_MOTOR_COUNT],
}

impl<R: Real> MotorVector<R> {
    /// Wraps validated values: finite and in `[0, 1]`.
    pub fn new(values: [R; EXPRESSION_MOTOR_COUNT]) -> Result<Self> {
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::input(format!("motor component {i} is not finite")));
            }
            if v < R::zero() || v > R::one() {
                return Err(Error::input(format!(
                    "motor component {i} = {v} outside [0, 1]"
                )));
            }
        }
        Ok(MotorVector { values })
    }

    /// Clamps raw solver output into the feasible box `[0, 1]^26`.
    ///
    /// Errors on wrong length or non-finite components; idempotent on
    /// already-feasible input.
    pub fn clamp_to_limits(raw: &[R]) -> Result<Self> {
        if raw.len() != EXPRESSION_MOTOR_COUNT {
            return Err(Error::input(format!(
                "motor vector needs {EXPRESSION_MOTOR_COUNT} components, got {}",
                raw.len()
            )));
        }
        let mut values = [R::zero(); EXPRESSION_MOTOR_COUNT];
        for (i, &v) in raw.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::input(format!(
                    "non-finite command at motor component {i}"
                )));
            }
            values[i] = v.max(R::zero()).min(R::one());
        }
        Ok(MotorVector { values })
    }

    /// The neutral pose: each expression motor at its normalized start
    /// PWM.
    pub fn neutral(table: &MotorSpecTable) -> Self {
        let mut values = [R::zero(); EXPRESSION_MOTOR_COUNT];
        for (i, id) in table.expression_ids().iter().enumerate() {
            let spec = table.spec(*id).expect("expression id comes from table");
            let x = normalize(spec, spec.start_pwm).expect("start lies inside travel");
            values[i] = R::of(x);
        }
        MotorVector { values }
    }

    /// Component slice, ascending by motor id.
    pub fn values(&self) -> &[R] {
        &self.values
    }

    /// Single component.
    pub fn get(&self, i: usize) -> R {
        self.values[i]
    }

    /// Converts the scalar type.
    pub fn map_scalar<S: Real>(&self) -> MotorVector<S> {
        let mut values = [S::zero(); EXPRESSION_MOTOR_COUNT];
        for (i, &v) in self.values.iter().enumerate() {
            values[i] = S::of(v.to_f64_lossy());
        }
        MotorVector { values }
    }
}

impl MotorVector<f64> {
    /// Raw PWM commands for the 26 expression motors, ascending by id.
    pub fn to_pwm(&self, table: &MotorSpecTable) -> Result<Vec<(u8, u16)>> {
        table
            .expression_ids()
            .iter()
            .enumerate()
            .map(|(i, &id)| Ok((id, denormalize(table.spec(id)?, self.values[i])?)))
            .collect()
    }

    /// Builds a MotorVector from per-id raw PWM readings (expression
    /// motors only, any order, each exactly once).
    pub fn from_pwm(table: &MotorSpecTable, pwm: &[(u8, u16)]) -> Result<Self> {
        let ids = table.expression_ids();
        if pwm.len() != ids.len() {
            return Err(Error::input(format!(
                "expected {} expression motor readings, got {}",
                ids.len(),
                pwm.len()
            )));
        }
        let mut values = [f64::NAN; EXPRESSION_MOTOR_COUNT];
        for &(id, raw) in pwm {
            let idx = table
                .expression_index(id)
                .ok_or_else(|| Error::input(format!("motor {id} is not an expression motor")))?;
            if !values[idx].is_nan() {
                return Err(Error::input(format!("duplicate reading for motor {id}")));
            }
            values[idx] = normalize(table.spec(id)?, raw)?;
        }
        MotorVector::new(values)
    }
}

// ---------------------------------------------------------------------------
// Servo wire protocol
// ---------------------------------------------------------------------------

/// Channels carried by one servo frame (all 33 motors).
pub const SERVO_CHANNELS: usize = MOTOR_COUNT;
/// Encoded servo frame length in bytes.
pub const SERVO_FRAME_LEN: usize = 76;
/// Servo frame magic.
pub const SERVO_MAGIC: [u8; 4] = *b"MFAC";
/// Servo protocol version emitted by this crate.
pub const SERVO_VERSION: u8 = 1;

/// One 50 Hz servo bus frame: raw PWM commands for all 33 motors.
///
/// Wire layout (76 bytes, little-endian):
///
/// | offset | size | field                          |
/// |--------|------|--------------------------------|
/// | 0      | 4    | magic `"MFAC"`                 |
/// | 4      | 1    | version (= 1)                  |
/// | 5      | 1    | flags (bit 0 = emergency stop) |
/// | 6      | 2    | sequence number                |
/// | 8      | 66   | 33 × u16 PWM, motor ids 1..=33 |
/// | 74     | 2    | CRC-16/CCITT-FALSE over 0..74  |
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServoFrame {
    /// Wrapping frame sequence number.
    pub seq: u16,
    /// Emergency-stop flag.
    pub estop: bool,
    /// Raw PWM per motor, index 0 ↔ motor id 1.
    pub pwm: [u16; SERVO_CHANNELS],
}

impl ServoFrame {
    /// Frame commanding every motor to its start PWM.
    pub fn neutral(table: &MotorSpecTable, seq: u16) -> Self {
        let mut pwm = [0u16; SERVO_CHANNELS];
        for (i, s) in table.specs().iter().enumerate() {
            pwm[i] = s.start_pwm;
        }
        ServoFrame {
            seq,
            estop: false,
            pwm,
        }
    }

    /// Frame from expression commands; excluded motors hold their
    /// start PWM.
    pub fn from_expression(
        table: &MotorSpecTable,
        motors: &MotorVector<f64>,
        seq: u16,
    ) -> Result<Self> {
        let mut frame = ServoFrame::neutral(table, seq);
        for (id, raw) in motors.to_pwm(table)? {
            frame.pwm[id as usize - 1] = raw;
        }
        Ok(frame)
    }

    /// Encodes to the 76-byte wire format.
    pub fn encode(&self) -> Result<[u8; SERVO_FRAME_LEN]> {
        for (i, &p) in self.pwm.iter().enumerate() {
            if p > PWM_MAX {
                return Err(Error::input(format!(
                    "channel {} PWM {p} exceeds {PWM_MAX}",
                    i + 1
                )));
            }
        }
        let mut buf = [0u8; SERVO_FRAME_LEN];
        buf[0..4].copy_from_slice(&SERVO_MAGIC);
        buf[4] = SERVO_VERSION;
        buf[5] = u8::from(self.estop);
        buf[6..8].copy_from_slice(&self.seq.to_le_bytes());
        for (i, &p) in self.pwm.iter().enumerate() {
            buf[8 + 2 * i..10 + 2 * i].copy_from_slice(&p.to_le_bytes());
        }
        let crc = crc16_ccitt_false(&buf[..SERVO_FRAME_LEN - 2]);
        buf[SERVO_FRAME_LEN - 2..].copy_from_slice(&crc.to_le_bytes());
        Ok(buf)
    }

    /// Decodes and validates a 76-byte wire frame.
    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() != SERVO_FRAME_LEN {
            return Err(Error::format(format!(
                "servo frame must be {SERVO_FRAME_LEN} bytes, got {}",
                bytes.len()
            )));
        }
        if bytes[0..4] != SERVO_MAGIC {
            return Err(Error::format(format!(
                "servo frame: bad magic {:02x?}",
                &bytes[0..4]
            )));
        }
        if bytes[4] != SERVO_VERSION {
            return Err(Error::format(format!(
                "servo frame: unsupported version {}",
                bytes[4]
            )));
        }
        if bytes[5] & !1 != 0 {
            return Err(Error::format(format!(
                "servo frame: reserved flag bits set ({:#04x})",
                bytes[5]
            )));
        }
        let stored = u16::from_le_bytes(bytes[SERVO_FRAME_LEN - 2..].try_into().unwrap());
        let computed = crc16_ccitt_false(&bytes[..SERVO_FRAME_LEN - 2]);
        if stored != computed {
            return Err(Error::format(format!(
                "servo frame: CRC mismatch (stored {stored:#06x}, computed {computed:#06x})"
            )));
        }
        let mut pwm = [0u16; SERVO_CHANNELS];
        for (i, chunk) in bytes[8..8 + 2 * SERVO_CHANNELS].chunks_exact(2).enumerate() {
            pwm[i] = u16::from_le_bytes(chunk.try_into().unwrap());
            if pwm[i] > PWM_MAX {
                return Err(Error::format(format!(
                    "servo frame: channel {} PWM {} exceeds {PWM_MAX}",
                    i + 1,
                    pwm[i]
                )));
            }
        }
        Ok(ServoFrame {
            seq: u16::from_le_bytes(bytes[6..8].try_into().unwrap()),
            estop: bytes[5] & 1 != 0,
            pwm,
        })
    }
}

/// CRC-16/CCITT-FALSE: polynomial 0x1021, init 0xFFFF, no reflection,
/// no final xor. Check value: `crc16_ccitt_false(b"123456789") == 0x29B1`.
pub fn crc16_ccitt_false(bytes: &[u8]) -> u16 {
    let mut crc: u16 = 0xFFFF;
    for &b in bytes {
        crc ^= (b as u16) << 8;
        for _ in 0..8 {
            crc = if crc & 0x8000 != 0 {
                (crc << 1) ^ 0x1021
            } else {
                crc << 1
            };
        }
    }
    crc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_table_shape() {
        let t = MotorSpecTable::builtin();
        assert_eq!(t.specs().len(), MOTOR_COUNT);
        assert_eq!(t.expression_ids().len(), EXPRESSION_MOTOR_COUNT);
        assert_eq!(t.group_ids(MotorGroup::Upper).len(), 10);
        assert_eq!(t.group_ids(MotorGroup::Lower).len(), 16);
        assert_eq!(
            t.group_ids(MotorGroup::Excluded),
            vec![7, 11, 12, 24, 31, 32, 33]
        );
        // Tendon-driven motors are the cheek/nose set.
        let tendon: Vec<u8> = t
            .specs()
            .iter()
            .filter(|s| s.drive == DriveType::Tendon)
            .map(|s| s.id)
            .collect();
        assert_eq!(tendon, vec![1, 2, 29, 30]);
    }

    #[test]
    fn normalize_is_direction_agnostic() {
        let t = MotorSpecTable::builtin();
        // Motor 3 ascends 980 → 1480; start 1080 sits at 0.2.
        let m3 = t.spec(3).unwrap();
        assert_eq!(normalize(m3, 980).unwrap(), 0.0);
        assert_eq!(normalize(m3, 1480).unwrap(), 1.0);
        assert_eq!(normalize(m3, 1080).unwrap(), 0.2);
        // Motor 1 descends 1800 → 1400; lower still maps to 0.
        let m1 = t.spec(1).unwrap();
        assert_eq!(normalize(m1, 1800).unwrap(), 0.0);
        assert_eq!(normalize(m1, 1400).unwrap(), 1.0);
        assert_eq!(normalize(m1, 1600).unwrap(), 0.5);
        assert!(normalize(m1, 1900).is_err());
        assert!(normalize(m1, 1300).is_err());
    }

    #[test]
    fn denormalize_rounds_half_away_from_zero() {
        let t = MotorSpecTable::builtin();
        let m3 = t.spec(3).unwrap(); // 980 → 1480, span +500
        assert_eq!(denormalize(m3, 0.0).unwrap(), 980);
        assert_eq!(denormalize(m3, 1.0).unwrap(), 1480);
        assert_eq!(denormalize(m3, 0.001).unwrap(), 981); // 980.5 rounds up
        let m5 = t.spec(5).unwrap(); // 1700 → 600, span -1100
        assert_eq!(denormalize(m5, 0.5).unwrap(), 1150);
        assert!(denormalize(m5, -0.1).is_err());
        assert!(denormalize(m5, 1.1).is_err());
        assert!(denormalize(m5, f64::NAN).is_err());
    }

    #[test]
    fn neutral_matches_hand_computed_starts() {
        let t = MotorSpecTable::builtin();
        let n = MotorVector::<f64>::neutral(&t);
        // Expression order starts 1, 2, 3, ...; motor 3 is index 2.
        assert_eq!(n.get(0), 0.0); // motor 1: start == lower
        assert_eq!(n.get(2), 0.2); // motor 3: (1080-980)/500
        assert_eq!(n.get(9), 1.0); // motor 13: start == upper
        assert!((n.get(4) - 4.0 / 11.0).abs() < 1e-15); // motor 5
    }

    #[test]
    fn clamp_to_limits_clamps_and_rejects() {
        let mut raw = [0.5f64; EXPRESSION_MOTOR_COUNT];
        raw[0] = -0.25;
        raw[1] = 1.5;
        let v = MotorVector::clamp_to_limits(&raw).unwrap();
        assert_eq!(v.get(0), 0.0);
        assert_eq!(v.get(1), 1.0);
        // Idempotent.
        let v2 = MotorVector::clamp_to_limits(v.values()).unwrap();
        assert_eq!(v, v2);

        raw[2] = f64::INFINITY;
        let err = MotorVector::clamp_to_limits(&raw).unwrap_err();
        assert!(err.to_string().contains("non-finite"));
        assert!(MotorVector::<f64>::clamp_to_limits(&[0.5; 3]).is_err());
    }

    #[test]
    fn pwm_round_trip_via_motor_vector() {
        let t = MotorSpecTable::builtin();
        let n = MotorVector::<f64>::neutral(&t);
        let pwm = n.to_pwm(&t).unwrap();
        // Neutral denormalizes back to the start PWMs.
        for (id, raw) in &pwm {
            assert_eq!(*raw, t.spec(*id).unwrap().start_pwm);
        }
        let back = MotorVector::from_pwm(&t, &pwm).unwrap();
        for i in 0..EXPRESSION_MOTOR_COUNT {
            assert!((back.get(i) - n.get(i)).abs() < 1e-12);
        }
    }

    #[test]
    fn table_text_round_trips() {
        let t = MotorSpecTable::builtin();
        let text = t.to_text();
        let parsed = MotorSpecTable::parse(&text).unwrap();
        assert_eq!(t, parsed);
    }

    #[test]
    fn table_parse_rejects_malformed_rows() {
        // Duplicate id.
        let mut text = MotorSpecTable::builtin().to_text();
        text = text.replace("\n2,Left Nose", "\n1,Left Nose");
        assert!(MotorSpecTable::parse(&text).is_err());
        // Start outside travel.
        let bad = MotorSpecTable::builtin().to_text().replace(
            "3,Left Eyebrow Center,980,1080,1480",
            "3,Left Eyebrow Center,980,2,1480",
        );
        assert!(MotorSpecTable::parse(&bad).is_err());
        // Field count.
        assert!(MotorSpecTable::parse("1,only,three").is_err());
    }

    #[test]
    fn crc_check_value() {
        assert_eq!(crc16_ccitt_false(b"123456789"), 0x29B1);
        assert_eq!(crc16_ccitt_false(b""), 0xFFFF);
    }

    #[test]
    fn servo_frame_round_trips() {
        let t = MotorSpecTable::builtin();
        let mut f = ServoFrame::neutral(&t, 41);
        f.estop = true;
        let bytes = f.encode().unwrap();
        assert_eq!(bytes.len(), SERVO_FRAME_LEN);
        let back = ServoFrame::decode(&bytes).unwrap();
        assert_eq!(f, back);
    }

    #[test]
    fn servo_frame_rejects_corruption() {
        let t = MotorSpecTable::builtin();
        let bytes = ServoFrame::neutral(&t, 1).encode().unwrap();

        let mut bad = bytes;
        bad[10] ^= 0x40; // flip a PWM bit
        assert!(ServoFrame::decode(&bad).is_err());

        let mut bad = bytes;
        bad[0] = b'X';
        assert!(ServoFrame::decode(&bad).is_err());

        assert!(ServoFrame::decode(&bytes[..70]).is_err());

        let mut over = ServoFrame::neutral(&t, 1);
        over.pwm[0] = PWM_MAX + 1;
        assert!(over.encode().is_err());
    }
}
