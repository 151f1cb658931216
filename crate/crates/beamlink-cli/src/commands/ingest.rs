//! `ingest`: loads a beam table into a store, creating the store and
//! registering the platform, sensors and campaigns the beams reference
//! when they are not present yet.

use std::collections::BTreeSet;

use beamlink::association::Beam;
use beamlink::geom::{RigidTransform, Rotation, Vec3};
use beamlink::store::{read_beam_csv, Campaign, Platform, Sensor, Store, MANIFEST_FILE};
use serde::Serialize;

use crate::config::{echo_effective, pick, ConfigFile};
use crate::{CliError, IngestArgs};

#[derive(Serialize)]
struct Effective {
    store: String,
    beams: String,
    package_size: usize,
    platform: String,
    platform_name: String,
    sensor_model: String,
    description: String,
    environment: String,
    mount_translation: [f64; 3],
    mount_axis: [f64; 3],
    mount_angle_deg: f64,
}

fn mount_from(effective: &Effective) -> Result<RigidTransform, CliError> {
    let axis = Vec3::new(
        effective.mount_axis[0],
        effective.mount_axis[1],
        effective.mount_axis[2],
    );
    let t = Vec3::new(
        effective.mount_translation[0],
        effective.mount_translation[1],
        effective.mount_translation[2],
    );
    if !axis.is_finite() || axis.norm() < 1e-12 || !t.is_finite() {
        return Err(CliError::Config("mount axis must be finite and nonzero".to_owned()));
    }
    if !effective.mount_angle_deg.is_finite() {
        return Err(CliError::Config("mount angle must be finite".to_owned()));
    }
    let rotation =
        Rotation::from_axis_angle(axis.normalized(), effective.mount_angle_deg.to_radians());
    Ok(RigidTransform::new(rotation, t))
}

pub fn run(args: IngestArgs, file: &ConfigFile) -> Result<(), CliError> {
    let section = &file.ingest;
    let effective = Effective {
        store: args.store.display().to_string(),
        beams: args.beams.display().to_string(),
        package_size: pick(args.package_size, section.package_size, 65_536),
        platform: section.platform.clone().unwrap_or_else(|| "rig-1".to_owned()),
        platform_name: section
            .platform_name
            .clone()
            .unwrap_or_else(|| "default platform".to_owned()),
        sensor_model: section.sensor_model.clone().unwrap_or_else(|| "unspecified".to_owned()),
        description: section.description.clone().unwrap_or_default(),
        environment: section.environment.clone().unwrap_or_default(),
        mount_translation: section.mount_translation.unwrap_or([0.0; 3]),
        mount_axis: section.mount_axis.unwrap_or([0.0, 0.0, 1.0]),
        mount_angle_deg: section.mount_angle_deg.unwrap_or(0.0),
    };
    echo_effective("ingest", &effective)?;
    let mount = mount_from(&effective)?;

    let table = read_beam_csv(&args.beams)?;
    if table.records.is_empty() {
        return Err(CliError::Data(format!(
            "{} holds no valid beam rows",
            args.beams.display()
        )));
    }
    let beams: Vec<Beam> = table.records.into_iter().map(|r| r.beam).collect();

    let mut store = if args.store.join(MANIFEST_FILE).is_file() {
        Store::open_rw(&args.store)?
    } else {
        Store::create(&args.store)?
    };

    // Register whatever the batch references and the store does not know
    // yet. Campaigns start at the earliest timestamp seen for them.
    if !store.platforms().any(|p| p.id == effective.platform) {
        store.add_platform(Platform {
            id: effective.platform.clone(),
            name: effective.platform_name.clone(),
        })?;
    }
    let sensors: BTreeSet<_> = beams.iter().map(|b| b.sensor_id.clone()).collect();
    for id in sensors {
        if store.sensor(&id).is_none() {
            store.add_sensor(Sensor {
                id,
                platform_id: effective.platform.clone(),
                model: effective.sensor_model.clone(),
                mount,
            })?;
        }
    }
    let campaigns: BTreeSet<_> = beams.iter().map(|b| b.campaign_id.clone()).collect();
    for id in campaigns {
        if store.campaign(&id).is_none() {
            let start = beams
                .iter()
                .filter(|b| b.campaign_id == id)
                .map(|b| b.timestamp_ns)
                .min()
                .unwrap_or(0);
            store.add_campaign(Campaign {
                id,
                platform_id: effective.platform.clone(),
                start_time_ns: start,
                description: effective.description.clone(),
                environment: effective.environment.clone(),
            })?;
        }
    }

    let packages = store.ingest(&beams, effective.package_size)?;
    if table.skipped > 0 {
        println!("skipped {} malformed rows", table.skipped);
    }
    println!(
        "ingested {} beams into {} packages under {}",
        beams.len(),
        packages.len(),
        args.store.display()
    );
    Ok(())
}
