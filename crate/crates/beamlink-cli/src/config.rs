//! Layered run configuration: built-in defaults, then an optional TOML
//! file, then command-line flags, where later layers win. Every subcommand
//! resolves its own section into an *effective* struct that is echoed to
//! stdout before any work starts, so a run's parameters are always on
//! record.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::CliError;

/// Raw shape of the optional `--config` TOML file. Every field is optional;
/// absent values fall back to the built-in defaults below.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub workers: Option<usize>,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub ingest: IngestSection,
    #[serde(default)]
    pub associate: AssociateSection,
    #[serde(default)]
    pub fingerprint: FingerprintSection,
    #[serde(default)]
    pub register: RegisterSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub seed: Option<u64>,
    pub campaign: Option<String>,
    pub sensor: Option<String>,
    pub beam_id_offset: Option<u64>,
    pub channels: Option<usize>,
    pub vertical_fov_deg: Option<f64>,
    pub azimuth_step_deg: Option<f64>,
    pub max_range: Option<f64>,
    pub rotation_rate_hz: Option<f64>,
    pub intensity_scale: Option<f64>,
    pub range_falloff: Option<f64>,
    pub range_noise_std: Option<f64>,
    pub intensity_noise_std: Option<f64>,
    /// Calibration-panel preset: sensor stand-off distances in metres.
    pub distances: Option<Vec<f64>>,
    /// Calibration-panel preset: incidence angles in degrees.
    pub angles_deg: Option<Vec<f64>>,
    /// Scene-file mode: radius, height and pose count of the orbit the
    /// sensor walks around the scene origin.
    pub orbit_radius: Option<f64>,
    pub orbit_height: Option<f64>,
    pub orbit_poses: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestSection {
    pub package_size: Option<usize>,
    pub platform: Option<String>,
    pub platform_name: Option<String>,
    pub sensor_model: Option<String>,
    pub description: Option<String>,
    pub environment: Option<String>,
    /// Sensor mount pose applied to ingested beams: translation plus an
    /// axis-angle rotation.
    pub mount_translation: Option<[f64; 3]>,
    pub mount_axis: Option<[f64; 3]>,
    pub mount_angle_deg: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssociateSection {
    pub segment_length: Option<f64>,
    pub assoc_radius: Option<f64>,
    pub max_associations: Option<usize>,
    /// `min-signed` or `max-signed`.
    pub ordering: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FingerprintSection {
    pub range_edges_m: Option<Vec<f64>>,
    pub zenith_edges_deg: Option<Vec<f64>>,
    pub min_cell_count: Option<usize>,
    /// Range bin the distance computations compare.
    pub range_bin: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegisterSection {
    pub inlier_threshold: Option<f64>,
    pub max_iterations: Option<usize>,
    pub convergence_tol: Option<f64>,
}

impl ConfigFile {
    /// Loads and parses the file, or returns built-in defaults when no path
    /// is given.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                CliError::MissingInput(format!("config file {}", path.display()))
            } else {
                CliError::Other(format!("reading {}: {e}", path.display()))
            }
        })?;
        toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {}", path.display(), flat(&e.to_string()))))
    }
}

/// Collapses a multi-line error into the single line the stderr contract
/// requires.
pub fn flat(message: &str) -> String {
    message
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect::<Vec<_>>()
        .join("; ")
}

/// Picks the first present value: flag, then file, then default.
pub fn pick<T: Clone>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

/// Prints the effective configuration of a subcommand as TOML.
pub fn echo_effective<T: Serialize>(command: &str, effective: &T) -> Result<(), CliError> {
    let body = toml::to_string(effective)
        .map_err(|e| CliError::Other(format!("rendering effective config: {e}")))?;
    println!("# effective config: {command}");
    print!("{body}");
    println!("# end config");
    Ok(())
}
