//! Plain-text manifest: the store's single source of metadata truth.
//!
//! One record per line, fields separated by tabs. The first line names the
//! format and its version; the remaining lines hold the string-interning
//! table (in index order), platforms, sensors, campaigns and packages.
//! Rendering is deterministic, so identical store states produce identical
//! manifest bytes.

use super::{Campaign, Interner, PackageMeta, Platform, Sensor, StoreError, MANIFEST_FILE};
use crate::geom::{Aabb, RigidTransform, Rotation, Vec3};
use std::collections::BTreeMap;

const FORMAT: &str = "beamlink-store";
const VERSION: &str = "1";

#[derive(Default)]
pub(super) struct ManifestData {
    pub interner: Interner,
    pub platforms: BTreeMap<String, Platform>,
    pub sensors: BTreeMap<crate::ids::SensorId, Sensor>,
    pub campaigns: BTreeMap<crate::ids::CampaignId, Campaign>,
    pub packages: Vec<PackageMeta>,
}

pub(super) fn render(data: &ManifestData) -> String {
    let mut out = String::new();
    out.push_str(FORMAT);
    out.push('\t');
    out.push_str(VERSION);
    out.push('\n');
    for (i, s) in data.interner.strings().iter().enumerate() {
        out.push_str(&format!("intern\t{i}\t{s}\n"));
    }
    for p in data.platforms.values() {
        out.push_str(&format!("platform\t{}\t{}\n", p.id, p.name));
    }
    for s in data.sensors.values() {
        let t = s.mount.translation;
        // The rotation is written as its nine matrix entries (row-major):
        // floats round-trip through text exactly, so re-rendering a parsed
        // manifest reproduces it byte for byte.
        let r = s.mount.rotation.rows();
        out.push_str(&format!(
            "sensor\t{}\t{}\t{}\t{}\t{}\t{}",
            s.id, s.platform_id, s.model, t.x, t.y, t.z
        ));
        for row in r {
            for v in row {
                out.push_str(&format!("\t{v}"));
            }
        }
        out.push('\n');
    }
    for c in data.campaigns.values() {
        out.push_str(&format!(
            "campaign\t{}\t{}\t{}\t{}\t{}\n",
            c.id, c.platform_id, c.start_time_ns, c.description, c.environment
        ));
    }
    for p in &data.packages {
        let e = &p.envelope;
        out.push_str(&format!(
            "package\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            p.id,
            p.campaign_id,
            p.sensor_id,
            p.file,
            p.beam_count,
            p.bytes,
            e.min.x,
            e.min.y,
            e.min.z,
            e.max.x,
            e.max.y,
            e.max.z
        ));
    }
    out
}

fn corrupt(line: usize, reason: impl Into<String>) -> StoreError {
    StoreError::Corrupt {
        file: MANIFEST_FILE.to_owned(),
        reason: format!("line {line}: {}", reason.into()),
    }
}

fn float(field: &str, line: usize) -> Result<f64, StoreError> {
    field
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| corrupt(line, format!("{field:?} is not a finite number")))
}

pub(super) fn parse(text: &str) -> Result<ManifestData, StoreError> {
    let mut lines = text.lines().enumerate();
    let Some((_, header)) = lines.next() else {
        return Err(corrupt(1, "empty manifest"));
    };
    let mut head = header.split('\t');
    if head.next() != Some(FORMAT) || head.next() != Some(VERSION) || head.next().is_some() {
        return Err(corrupt(1, "unrecognized format header"));
    }

    let mut data = ManifestData::default();
    for (i, line) in lines {
        let no = i + 1;
        let fields: Vec<&str> = line.split('\t').collect();
        let expect = |n: usize| -> Result<(), StoreError> {
            if fields.len() != n {
                return Err(corrupt(no, format!("expected {n} fields, found {}", fields.len())));
            }
            Ok(())
        };
        match fields[0] {
            "intern" => {
                expect(3)?;
                let idx: u32 = fields[1]
                    .parse()
                    .map_err(|_| corrupt(no, "intern index is not an integer"))?;
                if idx as usize != data.interner.len() {
                    return Err(corrupt(no, "intern indices must be contiguous and in order"));
                }
                data.interner.intern(fields[2]);
            }
            "platform" => {
                expect(3)?;
                let p = Platform { id: fields[1].to_owned(), name: fields[2].to_owned() };
                if data.platforms.insert(p.id.clone(), p).is_some() {
                    return Err(corrupt(no, "duplicate platform id"));
                }
            }
            "sensor" => {
                expect(16)?;
                if !data.platforms.contains_key(fields[2]) {
                    return Err(corrupt(no, format!("sensor references platform {:?}", fields[2])));
                }
                let t = Vec3::new(
                    float(fields[4], no)?,
                    float(fields[5], no)?,
                    float(fields[6], no)?,
                );
                let mut rows = [[0.0; 3]; 3];
                for (k, field) in fields[7..16].iter().enumerate() {
                    rows[k / 3][k % 3] = float(field, no)?;
                }
                let rotation = Rotation::from_rows(rows);
                if !rotation.is_orthonormal(1e-6) {
                    return Err(corrupt(no, "mount rotation is not orthonormal"));
                }
                let s = Sensor {
                    id: fields[1].into(),
                    platform_id: fields[2].to_owned(),
                    model: fields[3].to_owned(),
                    mount: RigidTransform::new(rotation, t),
                };
                if data.sensors.insert(s.id.clone(), s).is_some() {
                    return Err(corrupt(no, "duplicate sensor id"));
                }
            }
            "campaign" => {
                expect(6)?;
                if !data.platforms.contains_key(fields[2]) {
                    return Err(corrupt(
                        no,
                        format!("campaign references platform {:?}", fields[2]),
                    ));
                }
                let c = Campaign {
                    id: fields[1].into(),
                    platform_id: fields[2].to_owned(),
                    start_time_ns: fields[3]
                        .parse()
                        .map_err(|_| corrupt(no, "start time is not an integer"))?,
                    description: fields[4].to_owned(),
                    environment: fields[5].to_owned(),
                };
                if data.campaigns.insert(c.id.clone(), c).is_some() {
                    return Err(corrupt(no, "duplicate campaign id"));
                }
            }
            "package" => {
                expect(13)?;
                let campaign_id: crate::ids::CampaignId = fields[2].into();
                let sensor_id: crate::ids::SensorId = fields[3].into();
                if !data.campaigns.contains_key(&campaign_id) {
                    return Err(corrupt(no, format!("package references campaign {:?}", fields[2])));
                }
                if !data.sensors.contains_key(&sensor_id) {
                    return Err(corrupt(no, format!("package references sensor {:?}", fields[3])));
                }
                let nums: Vec<f64> =
                    fields[7..13].iter().map(|f| float(f, no)).collect::<Result<_, _>>()?;
                let (min, max) = (
                    Vec3::new(nums[0], nums[1], nums[2]),
                    Vec3::new(nums[3], nums[4], nums[5]),
                );
                if min.x > max.x || min.y > max.y || min.z > max.z {
                    return Err(corrupt(no, "envelope minimum exceeds maximum"));
                }
                let meta = PackageMeta {
                    id: fields[1].to_owned(),
                    campaign_id,
                    sensor_id,
                    file: fields[4].to_owned(),
                    beam_count: fields[5]
                        .parse()
                        .map_err(|_| corrupt(no, "beam count is not an integer"))?,
                    bytes: fields[6]
                        .parse()
                        .map_err(|_| corrupt(no, "byte extent is not an integer"))?,
                    envelope: Aabb::new(min, max),
                };
                if data.packages.iter().any(|p| p.id == meta.id) {
                    return Err(corrupt(no, "duplicate package id"));
                }
                data.packages.push(meta);
            }
            other => return Err(corrupt(no, format!("unknown record kind {other:?}"))),
        }
    }
    Ok(data)
}

#[cfg(test)]
mod test {
    use super::*;

    fn sample() -> ManifestData {
        let mut data = ManifestData::default();
        data.interner.intern("s1");
        data.interner.intern("c1");
        data.platforms.insert(
            "veh-1".to_owned(),
            Platform { id: "veh-1".to_owned(), name: "survey van".to_owned() },
        );
        data.sensors.insert(
            "s1".into(),
            Sensor {
                id: "s1".into(),
                platform_id: "veh-1".to_owned(),
                model: "spinning-16".to_owned(),
                mount: RigidTransform::new(
                    Rotation::from_axis_angle(Vec3::new(0.0, 0.0, 1.0), 0.25),
                    Vec3::new(0.0, 0.0, 1.9),
                ),
            },
        );
        data.campaigns.insert(
            "c1".into(),
            Campaign {
                id: "c1".into(),
                platform_id: "veh-1".to_owned(),
                start_time_ns: 170_000,
                description: "test drive, block 4".to_owned(),
                environment: "urban dry".to_owned(),
            },
        );
        data.packages.push(PackageMeta {
            id: "pkg-000001".to_owned(),
            campaign_id: "c1".into(),
            sensor_id: "s1".into(),
            file: "pkg-000001.bin".to_owned(),
            beam_count: 12,
            bytes: 1564,
            envelope: Aabb::new(Vec3::new(-1.0, -2.0, 0.0), Vec3::new(3.0, 4.0, 5.0)),
        });
        data
    }

    #[test]
    fn render_parse_round_trip() {
        let data = sample();
        let text = render(&data);
        let back = parse(&text).unwrap();
        assert_eq!(back.interner.strings(), data.interner.strings());
        assert_eq!(back.platforms.len(), 1);
        assert_eq!(back.sensors[&crate::ids::SensorId::from("s1")].model, "spinning-16");
        assert_eq!(back.campaigns[&crate::ids::CampaignId::from("c1")].description, "test drive, block 4");
        assert_eq!(back.packages, data.packages);
        let mount = back.sensors[&crate::ids::SensorId::from("s1")].mount;
        assert!((mount.rotation.angle() - 0.25).abs() < 1e-12);
        assert_eq!(mount.translation, Vec3::new(0.0, 0.0, 1.9));
        // A second render of the parsed state is byte-identical.
        assert_eq!(render(&back), text);
    }

    #[test]
    fn rejects_broken_manifests() {
        assert!(parse("").is_err());
        assert!(parse("other-format\t1\n").is_err());
        assert!(parse("beamlink-store\t2\n").is_err());
        assert!(parse("beamlink-store\t1\nwat\tx\n").is_err());
        // Sensor referencing a missing platform.
        assert!(parse(
            "beamlink-store\t1\nsensor\ts1\tveh\tm\t0\t0\t0\t1\t0\t0\t0\t1\t0\t0\t0\t1\n"
        )
        .is_err());
        // Sensor with a non-orthonormal mount rotation.
        assert!(parse(
            "beamlink-store\t1\nplatform\tveh\tv\n\
             sensor\ts1\tveh\tm\t0\t0\t0\t2\t0\t0\t0\t2\t0\t0\t0\t2\n"
        )
        .is_err());
        // Intern indices out of order.
        assert!(parse("beamlink-store\t1\nintern\t1\tzzz\n").is_err());
        // Envelope with min above max.
        let data = sample();
        let text = render(&data).replace("-1\t-2\t0\t3\t4\t5", "9\t-2\t0\t3\t4\t5");
        assert!(parse(&text).is_err());
    }
}
