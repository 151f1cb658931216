//! `simulate`: scans a scene with the virtual sensor and writes a beam
//! table, the ground-truth links, and the scene that was scanned. The run
//! is fully determined by its effective config, so two invocations with
//! the same parameters produce identical output directories.

use std::f64::consts::TAU;

use beamlink::ids::{is_clean_token, BeamId, CampaignId};
use beamlink::sim::{calibration_panel, look_at, simulate_scan, Pose, Scene, SensorModel, Trajectory};
use beamlink::store::{write_beam_csv, write_scene, BeamRecord};
use serde::Serialize;

use crate::commands::{ensure_empty_dir, load_scene, write_text};
use crate::config::{echo_effective, flat, pick, ConfigFile};
use crate::{CliError, SimulateArgs};

#[derive(Serialize)]
struct Effective {
    out: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    scene: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    preset: Option<String>,
    seed: u64,
    campaign: String,
    sensor: String,
    beam_id_offset: u64,
    channels: usize,
    vertical_fov_deg: f64,
    azimuth_step_deg: f64,
    max_range: f64,
    rotation_rate_hz: f64,
    intensity_scale: f64,
    range_falloff: f64,
    range_noise_std: f64,
    intensity_noise_std: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    distances: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    angles_deg: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    orbit_radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    orbit_height: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    orbit_poses: Option<usize>,
}

/// Evenly spaced poses on a circle around the scene origin, all looking at
/// the centre. A small angular offset keeps pose azimuths off the ray grid.
fn orbit(radius: f64, height: f64, poses: usize) -> Result<Trajectory, CliError> {
    if poses == 0 || !radius.is_finite() || !height.is_finite() || radius <= 0.0 {
        return Err(CliError::Config(
            "orbit needs a positive radius and at least one pose".to_owned(),
        ));
    }
    let poses = (0..poses)
        .map(|k| {
            let phi = TAU * k as f64 / poses as f64 + 0.05;
            let position =
                beamlink::geom::Vec3::new(radius * phi.cos(), radius * phi.sin(), height);
            let rotation = look_at(position, beamlink::geom::Vec3::new(0.0, 0.0, 0.0))
                .map_err(|e| CliError::Config(flat(&e.to_string())))?;
            Ok(Pose { position, rotation, timestamp_ns: k as i64 * 100_000_000 })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Trajectory::new(poses).map_err(|e| CliError::Config(flat(&e.to_string())))
}

pub fn run(args: SimulateArgs, file: &ConfigFile) -> Result<(), CliError> {
    let section = &file.simulate;
    let preset = args.preset;
    let scene_path = args.scene;
    if preset.is_some() == scene_path.is_some() {
        return Err(CliError::Config("give exactly one of --preset or --scene".to_owned()));
    }

    let defaults = SensorModel::new("unit-a");
    let effective = Effective {
        out: args.out.display().to_string(),
        scene: scene_path.as_ref().map(|p| p.display().to_string()),
        preset: preset.clone(),
        seed: pick(args.seed, section.seed, 0),
        campaign: pick(args.campaign.clone(), section.campaign.clone(), "sim-1".to_owned()),
        sensor: pick(args.sensor.clone(), section.sensor.clone(), "unit-a".to_owned()),
        beam_id_offset: pick(args.beam_id_offset, section.beam_id_offset, 0),
        channels: section.channels.unwrap_or(defaults.channels),
        vertical_fov_deg: section.vertical_fov_deg.unwrap_or(defaults.vertical_fov_deg),
        azimuth_step_deg: section.azimuth_step_deg.unwrap_or(defaults.azimuth_step_deg),
        max_range: section.max_range.unwrap_or(defaults.max_range),
        rotation_rate_hz: section.rotation_rate_hz.unwrap_or(defaults.rotation_rate_hz),
        intensity_scale: section.intensity_scale.unwrap_or(defaults.intensity_scale),
        range_falloff: section.range_falloff.unwrap_or(defaults.range_falloff),
        range_noise_std: section.range_noise_std.unwrap_or(defaults.range_noise_std),
        intensity_noise_std: section
            .intensity_noise_std
            .unwrap_or(defaults.intensity_noise_std),
        distances: preset
            .is_some()
            .then(|| section.distances.clone().unwrap_or_else(|| vec![3.3, 5.1])),
        angles_deg: preset.is_some().then(|| {
            section
                .angles_deg
                .clone()
                .unwrap_or_else(|| (0..=16).map(|k| k as f64 * 5.0).collect())
        }),
        orbit_radius: scene_path.is_some().then(|| section.orbit_radius.unwrap_or(10.0)),
        orbit_height: scene_path.is_some().then(|| section.orbit_height.unwrap_or(0.0)),
        orbit_poses: scene_path.is_some().then(|| section.orbit_poses.unwrap_or(4)),
    };
    echo_effective("simulate", &effective)?;

    if !is_clean_token(&effective.campaign) || !is_clean_token(&effective.sensor) {
        return Err(CliError::Config(
            "campaign and sensor ids must be non-empty, separator-free tokens".to_owned(),
        ));
    }

    let (scene, trajectory): (Scene, Trajectory) = if let Some(name) = &preset {
        if name != "panel" {
            return Err(CliError::Config(format!("unknown preset {name:?}; available: panel")));
        }
        calibration_panel(
            effective.distances.as_deref().unwrap_or_default(),
            effective.angles_deg.as_deref().unwrap_or_default(),
        )
        .map_err(|e| CliError::Config(flat(&e.to_string())))?
    } else {
        let scene = load_scene(scene_path.as_deref().expect("checked above"))?;
        let trajectory = orbit(
            effective.orbit_radius.unwrap_or(10.0),
            effective.orbit_height.unwrap_or(0.0),
            effective.orbit_poses.unwrap_or(4),
        )?;
        (scene, trajectory)
    };

    let mut sensor = SensorModel::new(effective.sensor.as_str());
    sensor.channels = effective.channels;
    sensor.vertical_fov_deg = effective.vertical_fov_deg;
    sensor.azimuth_step_deg = effective.azimuth_step_deg;
    sensor.max_range = effective.max_range;
    sensor.rotation_rate_hz = effective.rotation_rate_hz;
    sensor.intensity_scale = effective.intensity_scale;
    sensor.range_falloff = effective.range_falloff;
    sensor.range_noise_std = effective.range_noise_std;
    sensor.intensity_noise_std = effective.intensity_noise_std;

    let campaign = CampaignId::from(effective.campaign.as_str());
    let mut sims = simulate_scan(&scene, &sensor, &trajectory, &campaign, effective.seed)
        .map_err(|e| CliError::Config(flat(&e.to_string())))?;
    for s in &mut sims {
        s.beam.beam_id = BeamId(s.beam.beam_id.0 + effective.beam_id_offset);
    }

    ensure_empty_dir(&args.out)?;
    write_scene(&args.out.join("scene.txt"), &scene)?;
    let records: Vec<BeamRecord> =
        sims.iter().map(|s| BeamRecord::unassociated(s.beam.clone())).collect();
    write_beam_csv(&args.out.join("beams.csv"), &records)?;

    let mut truth = String::from("beam_id,surface_id\n");
    for s in &sims {
        if let Some(surface) = &s.truth {
            truth.push_str(&format!("{},{}\n", s.beam.beam_id.0, surface));
        }
    }
    write_text(&args.out.join("ground_truth.csv"), &truth)?;

    println!(
        "simulated {} beams over {} surfaces into {}",
        sims.len(),
        scene.surfaces().len(),
        args.out.display()
    );
    Ok(())
}
