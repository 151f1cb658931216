//! Delimited-text import/export of beam records.
//!
//! One header row, comma separators, decimal points, one beam per line.
//! The writer always emits the full 19-column layout with empty
//! association cells for unlinked beams; the reader also accepts the
//! 12-column beam-only layout. Floats are printed with enough digits to
//! restore their bit pattern, so a write/read cycle is lossless.

use super::{AssocColumns, BeamRecord, StoreError};
use crate::association::Beam;
use crate::geom::Vec3;
use crate::ids::{is_clean_token, BeamId};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

const BEAM_COLUMNS: [&str; 12] = [
    "beam_id",
    "ox",
    "oy",
    "oz",
    "dx",
    "dy",
    "dz",
    "range",
    "intensity",
    "timestamp_ns",
    "sensor_id",
    "campaign_id",
];
const ASSOC_COLUMNS: [&str; 7] =
    ["surface_id", "object_id", "class_name", "zenith", "azimuth", "signed_dist", "min_dist"];

/// Result of reading a beam table: the parsed records plus the number of
/// malformed data lines that were skipped.
#[derive(Debug)]
pub struct BeamTable {
    pub records: Vec<BeamRecord>,
    pub skipped: usize,
}

pub fn write_beam_csv(path: &Path, records: &[BeamRecord]) -> Result<(), StoreError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{},{}", BEAM_COLUMNS.join(","), ASSOC_COLUMNS.join(","))?;
    for r in records {
        let b = &r.beam;
        write!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            b.beam_id.0,
            b.origin.x,
            b.origin.y,
            b.origin.z,
            b.direction.x,
            b.direction.y,
            b.direction.z,
            b.range,
            b.intensity,
            b.timestamp_ns,
            b.sensor_id,
            b.campaign_id
        )?;
        match &r.assoc {
            Some(a) => writeln!(
                out,
                ",{},{},{},{},{},{},{}",
                a.surface_id, a.object_id, a.class_name, a.zenith, a.azimuth, a.signed_dist,
                a.min_dist
            )?,
            None => writeln!(out, ",,,,,,,")?,
        }
    }
    out.flush()?;
    Ok(())
}

/// Parses a beam table. The header must match one of the two documented
/// layouts exactly; malformed data lines are skipped and counted rather
/// than aborting the import.
pub fn read_beam_csv(path: &Path) -> Result<BeamTable, StoreError> {
    let file_name = path.display().to_string();
    let corrupt = |reason: String| StoreError::Corrupt { file: file_name.clone(), reason };
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(h) => h?,
        None => return Err(corrupt("missing header row".to_owned())),
    };
    let with_assoc = {
        let full: Vec<&str> =
            BEAM_COLUMNS.iter().chain(ASSOC_COLUMNS.iter()).copied().collect();
        let fields: Vec<&str> = header.split(',').collect();
        if fields == full {
            true
        } else if fields == BEAM_COLUMNS {
            false
        } else {
            return Err(corrupt(format!("unrecognized header {header:?}")));
        }
    };

    let mut records = Vec::new();
    let mut skipped = 0;
    for line in lines {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        match parse_line(&line, with_assoc) {
            Some(record) => records.push(record),
            None => skipped += 1,
        }
    }
    Ok(BeamTable { records, skipped })
}

fn parse_line(line: &str, with_assoc: bool) -> Option<BeamRecord> {
    let fields: Vec<&str> = line.split(',').collect();
    let expected = if with_assoc { 19 } else { 12 };
    if fields.len() != expected {
        return None;
    }
    let f = |i: usize| fields[i].parse::<f64>().ok().filter(|v| v.is_finite());
    let beam = Beam {
        beam_id: BeamId(fields[0].parse().ok()?),
        origin: Vec3::new(f(1)?, f(2)?, f(3)?),
        direction: Vec3::new(f(4)?, f(5)?, f(6)?),
        range: f(7)?,
        intensity: fields[8].parse::<f32>().ok().filter(|v| v.is_finite())?,
        timestamp_ns: fields[9].parse().ok()?,
        sensor_id: clean(fields[10])?.into(),
        campaign_id: clean(fields[11])?.into(),
    };
    let assoc = if with_assoc {
        let tail = &fields[12..19];
        if tail.iter().all(|v| v.is_empty()) {
            None
        } else if tail.iter().any(|v| v.is_empty()) {
            // Association columns are all-present or all-absent.
            return None;
        } else {
            Some(AssocColumns {
                surface_id: clean(fields[12])?.into(),
                object_id: clean(fields[13])?.into(),
                class_name: clean(fields[14])?.to_owned(),
                zenith: f(15)?,
                azimuth: f(16)?,
                signed_dist: f(17)?,
                min_dist: f(18)?,
            })
        }
    } else {
        None
    };
    Some(BeamRecord { beam, assoc })
}

fn clean(field: &str) -> Option<&str> {
    is_clean_token(field).then_some(field)
}
