//! Binary package layout: little-endian columns behind a small header.
//!
//! A package holds `count` beam records split into per-field columns, in
//! the order beam id, origin, direction, range, intensity, timestamp,
//! sensor, campaign, association flag, surface, object, class, zenith,
//! azimuth, signed distance, minimal distance. Strings are stored as `u32`
//! indices into the manifest's interning table; records without an
//! association carry `u32::MAX` in the id columns and zero in the float
//! columns. Floats round trip bit-exactly.

use super::{AssocColumns, BeamRecord, Interner, StoreError};
use crate::association::Beam;
use crate::geom::Vec3;
use crate::ids::{BeamId, CampaignId, ObjectId, SensorId, SurfaceId};

const MAGIC: &[u8; 4] = b"BLPK";
const VERSION: u32 = 1;
/// Header plus one record's worth of column bytes.
const HEADER_BYTES: usize = 4 + 4 + 8;
const RECORD_BYTES: usize = 8 + 6 * 8 + 8 + 4 + 8 + 2 * 4 + 1 + 3 * 4 + 4 * 8;

/// Sentinel intern index marking an absent association column.
const NO_STRING: u32 = u32::MAX;

/// Exact file size of a package holding `count` records.
pub(super) fn package_bytes(count: usize) -> u64 {
    (HEADER_BYTES + count * RECORD_BYTES) as u64
}

pub(super) fn encode(records: &[BeamRecord], interner: &mut Interner) -> Vec<u8> {
    let n = records.len();
    let mut out = Vec::with_capacity(HEADER_BYTES + n * RECORD_BYTES);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(n as u64).to_le_bytes());

    let u64s = |f: &mut dyn FnMut(&BeamRecord) -> u64, out: &mut Vec<u8>| {
        for r in records {
            out.extend_from_slice(&f(r).to_le_bytes());
        }
    };
    let f64s = |f: &mut dyn FnMut(&BeamRecord) -> f64, out: &mut Vec<u8>| {
        for r in records {
            out.extend_from_slice(&f(r).to_le_bytes());
        }
    };

    u64s(&mut |r| r.beam.beam_id.0, &mut out);
    f64s(&mut |r| r.beam.origin.x, &mut out);
    f64s(&mut |r| r.beam.origin.y, &mut out);
    f64s(&mut |r| r.beam.origin.z, &mut out);
    f64s(&mut |r| r.beam.direction.x, &mut out);
    f64s(&mut |r| r.beam.direction.y, &mut out);
    f64s(&mut |r| r.beam.direction.z, &mut out);
    f64s(&mut |r| r.beam.range, &mut out);
    for r in records {
        out.extend_from_slice(&r.beam.intensity.to_le_bytes());
    }
    for r in records {
        out.extend_from_slice(&r.beam.timestamp_ns.to_le_bytes());
    }
    for r in records {
        let id = interner.intern(r.beam.sensor_id.as_str());
        out.extend_from_slice(&id.to_le_bytes());
    }
    for r in records {
        let id = interner.intern(r.beam.campaign_id.as_str());
        out.extend_from_slice(&id.to_le_bytes());
    }
    for r in records {
        out.push(r.assoc.is_some() as u8);
    }
    let strings = |f: &mut dyn FnMut(&AssocColumns) -> &str,
                       interner: &mut Interner,
                       out: &mut Vec<u8>| {
        for r in records {
            let id = match &r.assoc {
                Some(a) => interner.intern(f(a)),
                None => NO_STRING,
            };
            out.extend_from_slice(&id.to_le_bytes());
        }
    };
    strings(&mut |a| a.surface_id.as_str(), interner, &mut out);
    strings(&mut |a| a.object_id.as_str(), interner, &mut out);
    strings(&mut |a| a.class_name.as_str(), interner, &mut out);
    let afloats = |f: &mut dyn FnMut(&AssocColumns) -> f64, out: &mut Vec<u8>| {
        for r in records {
            let v = r.assoc.as_ref().map_or(0.0, &mut *f);
            out.extend_from_slice(&v.to_le_bytes());
        }
    };
    afloats(&mut |a| a.zenith, &mut out);
    afloats(&mut |a| a.azimuth, &mut out);
    afloats(&mut |a| a.signed_dist, &mut out);
    afloats(&mut |a| a.min_dist, &mut out);

    debug_assert_eq!(out.len() as u64, package_bytes(n));
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    file: &'a str,
}

impl<'a> Cursor<'a> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N], StoreError> {
        let end = self.pos + N;
        let slice = self.bytes.get(self.pos..end).ok_or_else(|| StoreError::Corrupt {
            file: self.file.to_owned(),
            reason: "truncated package".to_owned(),
        })?;
        self.pos = end;
        Ok(slice.try_into().expect("length checked"))
    }

    fn u32(&mut self) -> Result<u32, StoreError> {
        Ok(u32::from_le_bytes(self.take()?))
    }

    fn u64(&mut self) -> Result<u64, StoreError> {
        Ok(u64::from_le_bytes(self.take()?))
    }

    fn f64(&mut self) -> Result<f64, StoreError> {
        Ok(f64::from_le_bytes(self.take()?))
    }
}

/// Reads just the header and the beam id column, skipping the rest.
pub(super) fn decode_beam_ids(bytes: &[u8], file: &str) -> Result<Vec<u64>, StoreError> {
    let mut c = decode_header(bytes, file)?;
    let n = c.u64()? as usize;
    (0..n).map(|_| c.u64()).collect()
}

fn decode_header<'a>(bytes: &'a [u8], file: &'a str) -> Result<Cursor<'a>, StoreError> {
    let corrupt = |reason: &str| StoreError::Corrupt {
        file: file.to_owned(),
        reason: reason.to_owned(),
    };
    let mut c = Cursor { bytes, pos: 0, file };
    if &c.take::<4>()? != MAGIC {
        return Err(corrupt("bad magic"));
    }
    if c.u32()? != VERSION {
        return Err(corrupt("unsupported package version"));
    }
    Ok(c)
}

pub(super) fn decode(
    bytes: &[u8],
    interner: &Interner,
    file: &str,
) -> Result<Vec<BeamRecord>, StoreError> {
    let corrupt = |reason: String| StoreError::Corrupt { file: file.to_owned(), reason };
    let mut c = decode_header(bytes, file)?;
    let n = c.u64()? as usize;
    if bytes.len() as u64 != package_bytes(n) {
        return Err(corrupt(format!(
            "size {} does not match {} records",
            bytes.len(),
            n
        )));
    }

    let column_f64 = |c: &mut Cursor| -> Result<Vec<f64>, StoreError> {
        (0..n).map(|_| c.f64()).collect()
    };
    let beam_ids: Vec<u64> = (0..n).map(|_| c.u64()).collect::<Result<_, _>>()?;
    let ox = column_f64(&mut c)?;
    let oy = column_f64(&mut c)?;
    let oz = column_f64(&mut c)?;
    let dx = column_f64(&mut c)?;
    let dy = column_f64(&mut c)?;
    let dz = column_f64(&mut c)?;
    let range = column_f64(&mut c)?;
    let intensity: Vec<f32> =
        (0..n).map(|_| c.take::<4>().map(f32::from_le_bytes)).collect::<Result<_, _>>()?;
    let timestamp: Vec<i64> =
        (0..n).map(|_| c.take::<8>().map(i64::from_le_bytes)).collect::<Result<_, _>>()?;
    let column_str = |c: &mut Cursor| -> Result<Vec<u32>, StoreError> {
        (0..n).map(|_| c.u32()).collect()
    };
    let sensor = column_str(&mut c)?;
    let campaign = column_str(&mut c)?;
    let flags: Vec<u8> = (0..n).map(|_| c.take::<1>().map(|b| b[0])).collect::<Result<_, _>>()?;
    let surface = column_str(&mut c)?;
    let object = column_str(&mut c)?;
    let class = column_str(&mut c)?;
    let zenith = column_f64(&mut c)?;
    let azimuth = column_f64(&mut c)?;
    let signed_dist = column_f64(&mut c)?;
    let min_dist = column_f64(&mut c)?;

    let mut records = Vec::with_capacity(n);
    for i in 0..n {
        let lookup = |id: u32| -> Result<&str, StoreError> {
            interner
                .get(id)
                .ok_or_else(|| corrupt(format!("string id {id} missing from the intern table")))
        };
        let assoc = match flags[i] {
            0 => None,
            1 => Some(AssocColumns {
                surface_id: SurfaceId::from(lookup(surface[i])?),
                object_id: ObjectId::from(lookup(object[i])?),
                class_name: lookup(class[i])?.to_owned(),
                zenith: zenith[i],
                azimuth: azimuth[i],
                signed_dist: signed_dist[i],
                min_dist: min_dist[i],
            }),
            other => return Err(corrupt(format!("association flag {other} is not 0 or 1"))),
        };
        records.push(BeamRecord {
            beam: Beam {
                beam_id: BeamId(beam_ids[i]),
                origin: Vec3::new(ox[i], oy[i], oz[i]),
                direction: Vec3::new(dx[i], dy[i], dz[i]),
                range: range[i],
                intensity: intensity[i],
                timestamp_ns: timestamp[i],
                sensor_id: SensorId::from(lookup(sensor[i])?),
                campaign_id: CampaignId::from(lookup(campaign[i])?),
            },
            assoc,
        });
    }
    Ok(records)
}
