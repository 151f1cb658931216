//! Deterministic scan simulator producing beams with known ground truth.
//!
//! A spinning multi-channel sensor is moved along a pose trajectory; every
//! pose fires a full azimuth sweep. Rays are intersected with the scene's
//! cached triangulation (front faces only), echo intensity follows a
//! Lambertian cosine model scaled by the surface material's reflectance,
//! and optional Gaussian noise perturbs range and intensity. Each pose owns
//! its own counter-mode random stream, so results are byte-identical
//! regardless of thread count.

use crate::association::Beam;
use crate::geom::{Rotation, Surface, Vec3};
use crate::ids::{BeamId, CampaignId, SensorId, SurfaceId};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use std::collections::BTreeMap;
use thiserror::Error;

/// Reflectance of surfaces without a material tag.
pub const DEFAULT_REFLECTANCE: f64 = 0.5;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("invalid sensor model: {0}")]
    InvalidSensor(String),
    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),
}

/// Named diffuse reflectance in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Material {
    pub name: String,
    pub reflectance: f64,
}

impl Material {
    pub fn new(name: impl Into<String>, reflectance: f64) -> Self {
        Self { name: name.into(), reflectance }
    }
}

/// Surfaces plus the material table their tags refer to.
#[derive(Clone, Debug)]
pub struct Scene {
    surfaces: Vec<Surface>,
    materials: BTreeMap<String, f64>,
}

impl Scene {
    /// Validates reflectances and that every surface material tag resolves.
    pub fn new(surfaces: Vec<Surface>, materials: Vec<Material>) -> Result<Self, SimError> {
        let mut table = BTreeMap::new();
        for m in materials {
            if !m.reflectance.is_finite() || !(0.0..=1.0).contains(&m.reflectance) {
                return Err(SimError::InvalidScene(format!(
                    "material {:?} reflectance {} outside [0, 1]",
                    m.name, m.reflectance
                )));
            }
            if table.insert(m.name.clone(), m.reflectance).is_some() {
                return Err(SimError::InvalidScene(format!("duplicate material {:?}", m.name)));
            }
        }
        for s in &surfaces {
            if let Some(tag) = &s.material {
                if !table.contains_key(tag) {
                    return Err(SimError::InvalidScene(format!(
                        "surface {} references unknown material {:?}",
                        s.id, tag
                    )));
                }
            }
        }
        Ok(Self { surfaces, materials: table })
    }

    pub fn surfaces(&self) -> &[Surface] {
        &self.surfaces
    }

    pub fn materials(&self) -> &BTreeMap<String, f64> {
        &self.materials
    }

    /// Reflectance of a surface: its material's value, or
    /// [`DEFAULT_REFLECTANCE`] when untagged.
    pub fn reflectance_of(&self, surface: &Surface) -> f64 {
        surface
            .material
            .as_ref()
            .and_then(|tag| self.materials.get(tag).copied())
            .unwrap_or(DEFAULT_REFLECTANCE)
    }
}

/// Spinning multi-channel sensor parameters.
///
/// The sensor frame is right-handed with `+x` forward, `+y` left and `+z`
/// up. Channels are spread evenly over the vertical field of view; a sweep
/// steps the azimuth counter-clockwise from the forward direction.
#[derive(Clone, Debug, PartialEq)]
pub struct SensorModel {
    pub sensor_id: SensorId,
    pub channels: usize,
    /// Full vertical field of view, degrees (channels span +/- half).
    pub vertical_fov_deg: f64,
    pub azimuth_step_deg: f64,
    /// Hits beyond this true range are discarded, metres.
    pub max_range: f64,
    /// Sweep revolutions per second; spreads beam timestamps over a pose.
    pub rotation_rate_hz: f64,
    pub wavelength_nm: f64,
    /// Echo intensity of a head-on, reflectance-1.0 return.
    pub intensity_scale: f64,
    /// Exponent of the `(1 / range)` attenuation factor; zero disables it.
    pub range_falloff: f64,
    pub range_noise_std: f64,
    pub intensity_noise_std: f64,
}

impl SensorModel {
    /// A 16-channel spinning scanner with a 30 degree vertical field of
    /// view, 0.2 degree azimuth resolution, 100 m range and no noise.
    pub fn new(sensor_id: impl Into<SensorId>) -> Self {
        Self {
            sensor_id: sensor_id.into(),
            channels: 16,
            vertical_fov_deg: 30.0,
            azimuth_step_deg: 0.2,
            max_range: 100.0,
            rotation_rate_hz: 10.0,
            wavelength_nm: 903.0,
            intensity_scale: 100.0,
            range_falloff: 0.0,
            range_noise_std: 0.0,
            intensity_noise_std: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: &str| Err(SimError::InvalidSensor(msg.to_owned()));
        if self.channels == 0 {
            return bad("at least one channel required");
        }
        if !(self.vertical_fov_deg.is_finite() && (0.0..180.0).contains(&self.vertical_fov_deg)) {
            return bad("vertical field of view must lie in [0, 180) degrees");
        }
        if !(self.azimuth_step_deg.is_finite()
            && self.azimuth_step_deg > 0.0
            && self.azimuth_step_deg <= 360.0)
        {
            return bad("azimuth step must lie in (0, 360] degrees");
        }
        if !(self.max_range.is_finite() && self.max_range > 0.0) {
            return bad("max range must be positive");
        }
        if !(self.rotation_rate_hz.is_finite() && self.rotation_rate_hz > 0.0) {
            return bad("rotation rate must be positive");
        }
        if !(self.intensity_scale.is_finite() && self.intensity_scale >= 0.0) {
            return bad("intensity scale must be non-negative");
        }
        if !(self.range_falloff.is_finite() && self.range_falloff >= 0.0) {
            return bad("range falloff exponent must be non-negative");
        }
        if !(self.range_noise_std.is_finite() && self.range_noise_std >= 0.0) {
            return bad("range noise must be non-negative");
        }
        if !(self.intensity_noise_std.is_finite() && self.intensity_noise_std >= 0.0) {
            return bad("intensity noise must be non-negative");
        }
        Ok(())
    }

    /// Channel elevation angles in radians, ascending. A single channel
    /// fires level.
    pub fn channel_elevations(&self) -> Vec<f64> {
        if self.channels == 1 {
            return vec![0.0];
        }
        let half = (self.vertical_fov_deg / 2.0).to_radians();
        let step = 2.0 * half / (self.channels - 1) as f64;
        (0..self.channels).map(|i| -half + i as f64 * step).collect()
    }

    /// Number of azimuth steps in one sweep.
    pub fn azimuth_steps(&self) -> usize {
        ((360.0 / self.azimuth_step_deg).round() as usize).max(1)
    }
}

/// Sensor placement at one instant.
#[derive(Clone, Debug, PartialEq)]
pub struct Pose {
    pub position: Vec3,
    pub rotation: Rotation,
    pub timestamp_ns: i64,
}

/// Rotation pointing the sensor's forward axis from `position` at `target`,
/// keeping its up axis as close to world `+z` as the geometry allows.
pub fn look_at(position: Vec3, target: Vec3) -> Result<Rotation, SimError> {
    let forward = target - position;
    if forward.norm() < 1e-12 {
        return Err(SimError::InvalidTrajectory(
            "look-at target coincides with the position".to_owned(),
        ));
    }
    let x = forward.normalized();
    let hint = if x.z.abs() > 1.0 - 1e-9 { Vec3::new(1.0, 0.0, 0.0) } else { Vec3::new(0.0, 0.0, 1.0) };
    let y = hint.cross(x).normalized();
    let z = x.cross(y);
    Ok(Rotation::from_columns(x, y, z))
}

/// Time-ordered poses; in-between placements interpolate linearly in
/// position and spherically in orientation.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    poses: Vec<Pose>,
}

impl Trajectory {
    pub fn new(poses: Vec<Pose>) -> Result<Self, SimError> {
        if poses.is_empty() {
            return Err(SimError::InvalidTrajectory("at least one pose required".to_owned()));
        }
        for w in poses.windows(2) {
            if w[1].timestamp_ns <= w[0].timestamp_ns {
                return Err(SimError::InvalidTrajectory(
                    "pose timestamps must be strictly increasing".to_owned(),
                ));
            }
        }
        for p in &poses {
            if !p.position.is_finite() || !p.rotation.is_orthonormal(1e-6) {
                return Err(SimError::InvalidTrajectory(
                    "poses need finite positions and orthonormal rotations".to_owned(),
                ));
            }
        }
        Ok(Self { poses })
    }

    pub fn poses(&self) -> &[Pose] {
        &self.poses
    }

    /// Interpolated pose at `timestamp_ns`, clamped to the trajectory's
    /// time span.
    pub fn sample(&self, timestamp_ns: i64) -> Pose {
        let first = self.poses.first().expect("non-empty");
        let last = self.poses.last().expect("non-empty");
        if timestamp_ns <= first.timestamp_ns {
            return Pose { timestamp_ns, ..first.clone() };
        }
        if timestamp_ns >= last.timestamp_ns {
            return Pose { timestamp_ns, ..last.clone() };
        }
        let hi = self.poses.partition_point(|p| p.timestamp_ns <= timestamp_ns);
        let (a, b) = (&self.poses[hi - 1], &self.poses[hi]);
        let f = (timestamp_ns - a.timestamp_ns) as f64 / (b.timestamp_ns - a.timestamp_ns) as f64;
        Pose {
            position: a.position.lerp(b.position, f),
            rotation: a.rotation.slerp(&b.rotation, f),
            timestamp_ns,
        }
    }
}

/// A simulated beam and the surface its ray actually struck.
///
/// The truth label is filled by the simulator; it stays optional so
/// externally captured beams without a reference answer can share the type.
#[derive(Clone, Debug, PartialEq)]
pub struct SimulatedBeam {
    pub beam: Beam,
    pub truth: Option<SurfaceId>,
}

/// Nearest front-face intersection of a ray with the scene, as the surface
/// index and hit parameter (metres along the unit direction). This walks
/// every triangle directly and is deliberately independent of the spatial
/// index used for association.
pub fn trace_ray(
    scene: &Scene,
    origin: Vec3,
    direction: Vec3,
    max_range: f64,
) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (si, surface) in scene.surfaces.iter().enumerate() {
        // Back faces never return an echo.
        if -direction.dot(surface.normal()) <= 0.0 {
            continue;
        }
        let verts = surface.vertices();
        for tri in surface.triangles() {
            let (v0, v1, v2) = (verts[tri[0]], verts[tri[1]], verts[tri[2]]);
            if let Some(t) = moller_trumbore(origin, direction, v0, v1, v2) {
                if t <= max_range && best.is_none_or(|(_, bt)| t < bt) {
                    best = Some((si, t));
                }
            }
        }
    }
    best
}

/// Ray/triangle intersection parameter, `None` when parallel, behind the
/// origin or outside the triangle (with a small slack so rays crossing the
/// shared edge of two triangles of one polygon cannot slip between them).
fn moller_trumbore(origin: Vec3, direction: Vec3, v0: Vec3, v1: Vec3, v2: Vec3) -> Option<f64> {
    const SLACK: f64 = 1e-12;
    let e1 = v1 - v0;
    let e2 = v2 - v0;
    let p = direction.cross(e2);
    let det = e1.dot(p);
    if det.abs() < 1e-14 {
        return None;
    }
    let inv = 1.0 / det;
    let s = origin - v0;
    let u = s.dot(p) * inv;
    if !(-SLACK..=1.0 + SLACK).contains(&u) {
        return None;
    }
    let q = s.cross(e1);
    let v = direction.dot(q) * inv;
    if v < -SLACK || u + v > 1.0 + SLACK {
        return None;
    }
    let t = e2.dot(q) * inv;
    (t >= 1e-9).then_some(t)
}

/// Runs one sweep per trajectory pose and returns the echoes in beam id
/// order. Beam ids encode `(pose, azimuth step, channel)`; rays that miss
/// every surface produce nothing, leaving gaps in the id sequence. Each
/// pose draws its noise from its own seeded stream, so the output is
/// identical for any worker count.
pub fn simulate_scan(
    scene: &Scene,
    sensor: &SensorModel,
    trajectory: &Trajectory,
    campaign_id: &CampaignId,
    seed: u64,
) -> Result<Vec<SimulatedBeam>, SimError> {
    sensor.validate()?;
    let elevations = sensor.channel_elevations();
    let az_steps = sensor.azimuth_steps();
    let period_ns = 1e9 / sensor.rotation_rate_hz;
    let range_noise = (sensor.range_noise_std > 0.0)
        .then(|| Normal::new(0.0, sensor.range_noise_std).expect("validated std"));
    let intensity_noise = (sensor.intensity_noise_std > 0.0)
        .then(|| Normal::new(0.0, sensor.intensity_noise_std).expect("validated std"));

    let per_pose: Vec<Vec<SimulatedBeam>> = trajectory
        .poses()
        .par_iter()
        .enumerate()
        .map(|(pose_idx, pose)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(pose_idx as u64);
            let mut out = Vec::new();
            for az_idx in 0..az_steps {
                let az = (az_idx as f64 * sensor.azimuth_step_deg).to_radians();
                let timestamp_ns = pose.timestamp_ns
                    + ((az_idx as f64 / az_steps as f64) * period_ns).round() as i64;
                for (ch_idx, &elev) in elevations.iter().enumerate() {
                    let local = Vec3::new(
                        elev.cos() * az.cos(),
                        elev.cos() * az.sin(),
                        elev.sin(),
                    );
                    let direction = pose.rotation.apply(local);
                    let Some((si, t)) = trace_ray(scene, pose.position, direction, sensor.max_range)
                    else {
                        continue;
                    };
                    let surface = &scene.surfaces[si];
                    let cos_incidence = -direction.dot(surface.normal());
                    let attenuation = if sensor.range_falloff == 0.0 {
                        1.0
                    } else {
                        (1.0 / t).powf(sensor.range_falloff)
                    };
                    let mut range = t;
                    if let Some(n) = &range_noise {
                        range = (range + n.sample(&mut rng)).max(0.0);
                    }
                    let mut intensity = sensor.intensity_scale
                        * scene.reflectance_of(surface)
                        * cos_incidence
                        * attenuation;
                    if let Some(n) = &intensity_noise {
                        intensity += n.sample(&mut rng);
                    }
                    let beam_id =
                        BeamId(((pose_idx * az_steps + az_idx) * sensor.channels + ch_idx) as u64);
                    out.push(SimulatedBeam {
                        beam: Beam {
                            beam_id,
                            origin: pose.position,
                            direction,
                            range,
                            intensity: intensity.clamp(0.0, 255.0) as f32,
                            timestamp_ns,
                            sensor_id: sensor.sensor_id.clone(),
                            campaign_id: campaign_id.clone(),
                        },
                        truth: Some(surface.id.clone()),
                    });
                }
            }
            out
        })
        .collect();

    Ok(per_pose.into_iter().flatten().collect())
}

/// Reference panel of four vertical strips with calibrated reflectances
/// 0.20, 0.90, 0.043 and 0.53 (left to right), each 0.25 m wide and 1.2 m
/// tall in the `x = 0` plane facing `+x`. One pose per
/// `(distance, angle)` pair is placed at that distance from the panel
/// centre, rotated by the angle around the vertical axis and aimed back at
/// the centre, so the angle equals the beam incidence angle at the centre.
pub fn calibration_panel(
    distances: &[f64],
    angles_deg: &[f64],
) -> Result<(Scene, Trajectory), SimError> {
    const REFLECTANCES: [f64; 4] = [0.20, 0.90, 0.043, 0.53];
    let mut surfaces = Vec::new();
    let mut materials = Vec::new();
    for (i, &rho) in REFLECTANCES.iter().enumerate() {
        let name = format!("panel-{}", (rho * 1000.0).round() as u32);
        materials.push(Material::new(name.clone(), rho));
        let yc = -0.375 + i as f64 * 0.25;
        let (y0, y1) = (yc - 0.125, yc + 0.125);
        let surface = Surface::new(
            format!("strip-{i}"),
            format!("strip-{i}"),
            "ReflectanceStrip",
            None,
            Some(name),
            vec![
                Vec3::new(0.0, y0, -0.6),
                Vec3::new(0.0, y1, -0.6),
                Vec3::new(0.0, y1, 0.6),
                Vec3::new(0.0, y0, 0.6),
            ],
        )
        .map_err(|e| SimError::InvalidScene(e.to_string()))?;
        surfaces.push(surface);
    }
    let scene = Scene::new(surfaces, materials)?;

    let mut poses = Vec::new();
    for &d in distances {
        if !(d.is_finite() && d > 0.0) {
            return Err(SimError::InvalidTrajectory("distances must be positive".to_owned()));
        }
        for &a in angles_deg {
            if !(a.is_finite() && a.abs() < 90.0) {
                return Err(SimError::InvalidTrajectory(
                    "angles must be within (-90, 90) degrees".to_owned(),
                ));
            }
            let rad = a.to_radians();
            let position = Vec3::new(d * rad.cos(), d * rad.sin(), 0.0);
            poses.push(Pose {
                position,
                rotation: look_at(position, Vec3::ZERO)?,
                timestamp_ns: poses.len() as i64 * 100_000_000,
            });
        }
    }
    Ok((scene, Trajectory::new(poses)?))
}

/// Through-origin least squares fit of `intensity = i0 * cos(zenith)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CosineFit {
    pub i0: f64,
    /// Coefficient of determination against the sample mean.
    pub r_squared: f64,
}

/// Fits the Lambertian cosine model to `(zenith_radians, intensity)`
/// samples. `None` when there are no samples or no angular information.
pub fn cosine_fit(samples: &[(f64, f64)]) -> Option<CosineFit> {
    if samples.is_empty() {
        return None;
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for &(z, i) in samples {
        let c = z.cos();
        num += i * c;
        den += c * c;
    }
    if den < 1e-30 {
        return None;
    }
    let i0 = num / den;
    let mean = samples.iter().map(|&(_, i)| i).sum::<f64>() / samples.len() as f64;
    let ss_tot: f64 = samples.iter().map(|&(_, i)| (i - mean) * (i - mean)).sum();
    let ss_res: f64 = samples.iter().map(|&(z, i)| (i - i0 * z.cos()).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Some(CosineFit { i0, r_squared })
}
