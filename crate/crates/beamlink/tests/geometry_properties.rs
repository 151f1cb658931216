//! Property tests for the beam/surface geometry and the association layer.
//!
//! Random surfaces and beams exercise the frame construction, the angle
//! ranges, and the invariances the association pipeline promises: links
//! are intrinsic to the scene geometry, not to where the scene happens to
//! sit in the world (up to the documented world-axis anchoring of the
//! azimuth frame).

use beamlink::association::{associate_batch, AssociationConfig, Beam};
use beamlink::geom::{
    signed_distance, spherocylinder_candidate, GeomParams, LocalFrame, Ray, RigidTransform,
    Rotation, Segment, Surface, Vec3,
};
use beamlink::ids::BeamId;
use beamlink::index::SurfaceIndex;
use proptest::prelude::*;

fn unit_vector() -> impl Strategy<Value = Vec3> {
    (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0).prop_filter_map(
        "direction too close to zero",
        |(x, y, z)| {
            let v = Vec3::new(x, y, z);
            (v.norm() > 0.3).then(|| v.normalized())
        },
    )
}

/// Star-shaped planar polygon: sorted angles and per-vertex radii around a
/// centroid, embedded in the plane orthogonal to `normal`.
fn polygon_vertices(normal: Vec3, centroid: Vec3, shape: &[(f64, f64)]) -> Vec<Vec3> {
    let axis = if normal.x.abs() < 0.9 {
        Vec3::new(1.0, 0.0, 0.0)
    } else {
        Vec3::new(0.0, 1.0, 0.0)
    };
    let u = (axis - normal * axis.dot(normal)).normalized();
    let v = normal.cross(u);
    shape
        .iter()
        .map(|&(angle, radius)| centroid + u * (radius * angle.cos()) + v * (radius * angle.sin()))
        .collect()
}

/// Angle/radius pairs for a simple star polygon. Angles come from
/// normalized gap weights in [0.5, 0.95], which bounds every angular gap
/// away from both 0 and pi — the latter keeps the generation center inside
/// the polygon, so rays from it to any vertex stay interior.
fn polygon_shape(max_radius: f64) -> impl Strategy<Value = Vec<(f64, f64)>> {
    (
        prop::collection::vec((0.5f64..0.95, 0.25 * max_radius..max_radius), 3..7),
        0.0..std::f64::consts::TAU,
    )
        .prop_map(|(gaps_radii, start)| {
            let total: f64 = gaps_radii.iter().map(|(g, _)| g).sum();
            let mut angle = start;
            gaps_radii
                .into_iter()
                .map(|(gap, radius)| {
                    angle += gap / total * std::f64::consts::TAU;
                    (angle, radius)
                })
                .collect()
        })
}

fn surface_with(
    normal: Vec3,
    centroid: Vec3,
    shape: &[(f64, f64)],
    id: usize,
) -> Surface {
    Surface::new(
        format!("srf-{id}"),
        format!("obj-{id}"),
        "WallSurface",
        None,
        None,
        polygon_vertices(normal, centroid, shape),
    )
    .expect("star polygons are valid surfaces")
}

/// A random surface plus the kernel point its star shape was built around
/// (every segment from that point to a vertex stays inside the polygon;
/// the vertex mean has no such guarantee on non-convex shapes).
fn random_surface() -> impl Strategy<Value = (Surface, Vec3)> {
    (
        unit_vector(),
        (-10.0f64..10.0, -10.0f64..10.0, -10.0f64..10.0),
        polygon_shape(2.0),
    )
        .prop_map(|(n, (cx, cy, cz), shape)| {
            let kernel = Vec3::new(cx, cy, cz);
            (surface_with(n, kernel, &shape, 0), kernel)
        })
}

proptest! {
    /// The azimuth frame is orthonormal and right-handed for any surface
    /// and sensor position.
    #[test]
    fn local_frame_is_orthonormal(
        (surface, _) in random_surface(),
        origin in (-20.0f64..20.0, -20.0f64..20.0, -20.0f64..20.0),
    ) {
        let sensor = Vec3::new(origin.0, origin.1, origin.2);
        let frame = LocalFrame::new(&surface, sensor, 1e-6);
        let drift = frame.u.dot(frame.v).abs()
            + frame.u.dot(frame.n).abs()
            + frame.v.dot(frame.n).abs();
        prop_assert!(drift <= 3e-9, "basis drift {drift}");
        prop_assert!((frame.u.cross(frame.v) - frame.n).norm() <= 1e-9);
        // The frame origin lies on the surface plane.
        prop_assert!((frame.origin - surface.centroid()).dot(frame.n).abs() <= 1e-9);
        // The construction is deterministic, bit for bit.
        prop_assert_eq!(frame, LocalFrame::new(&surface, sensor, 1e-6));
    }

    /// Beams built to hit a front face pass the candidate test and yield
    /// angles inside their documented ranges.
    #[test]
    fn candidate_hits_have_angles_in_range(
        (surface, kernel) in random_surface(),
        lateral in 0.0f64..0.55,
        spin in 0.0f64..std::f64::consts::TAU,
        stand_off in 2.0f64..25.0,
        tilt in 0.0f64..0.8,
        range_error in -0.3f64..0.3,
    ) {
        let params = GeomParams::default();
        let n = surface.normal();
        // A point safely inside the star polygon, then a sensor in front.
        let target = kernel + (surface.vertices()[0] - kernel) * lateral;
        let axis = if n.x.abs() < 0.9 {
            Vec3::new(1.0, 0.0, 0.0)
        } else {
            Vec3::new(0.0, 1.0, 0.0)
        };
        let u = (axis - n * axis.dot(n)).normalized();
        let v = n.cross(u);
        let side = u * (tilt * spin.cos()) + v * (tilt * spin.sin());
        let sensor = target + (n + side).normalized() * stand_off;
        let direction = (target - sensor).normalized();
        prop_assume!(-direction.dot(n) > 1e-3);

        let range = (target - sensor).norm() + range_error;
        let ray = Ray::new(sensor, direction, range).unwrap();
        let segment = Segment::from_ray(&ray, &params);
        prop_assert!(spherocylinder_candidate(&segment, &surface, direction, params.assoc_radius));

        let intersection = surface
            .intersect_segment(&segment, params.epsilon)
            .expect("segment crosses the polygon by construction");
        let zenith = beamlink::geom::zenith_angle(direction, n);
        prop_assert!((0.0..=std::f64::consts::FRAC_PI_2).contains(&zenith));

        let frame = LocalFrame::new(&surface, sensor, params.epsilon);
        let azimuth = frame.azimuth_of(intersection);
        prop_assert!((0.0..std::f64::consts::TAU).contains(&azimuth.radians));
        // The intersection is on the frame plane.
        prop_assert!((intersection - frame.origin).dot(frame.n).abs() <= 1e-6);
    }

    /// Swapping the two points negates the signed along-beam distance.
    #[test]
    fn signed_distance_is_antisymmetric(
        a in (-50.0f64..50.0, -50.0f64..50.0, -50.0f64..50.0),
        b in (-50.0f64..50.0, -50.0f64..50.0, -50.0f64..50.0),
        d in unit_vector(),
    ) {
        let (a, b) = (Vec3::new(a.0, a.1, a.2), Vec3::new(b.0, b.1, b.2));
        prop_assert_eq!(signed_distance(a, b, d), -signed_distance(b, a, d));
    }
}

/// A small scene of tilted panels plus beams aimed at their interiors.
fn panel_scene(seed: u64, panels: usize, beams_per_panel: usize) -> (Vec<Surface>, Vec<Beam>) {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut surfaces = Vec::new();
    let mut beams = Vec::new();
    for i in 0..panels {
        // Tilts in (25 deg, 85 deg) keep every normal well away from the
        // vertical-normal anchor switch.
        let tilt: f64 = rng.gen_range(25f64.to_radians()..85f64.to_radians());
        let yaw: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let n = Vec3::new(tilt.sin() * yaw.cos(), tilt.sin() * yaw.sin(), tilt.cos());
        let centroid = Vec3::new(
            rng.gen_range(-30.0..30.0),
            rng.gen_range(-30.0..30.0),
            rng.gen_range(-5.0..5.0),
        );
        let shape: Vec<(f64, f64)> = (0..4)
            .map(|k| {
                (
                    k as f64 * std::f64::consts::FRAC_PI_2 + 0.4,
                    rng.gen_range(0.8..1.6),
                )
            })
            .collect();
        surfaces.push(surface_with(n, centroid, &shape, i));

        for j in 0..beams_per_panel {
            let target = centroid
                + (surfaces[i].vertices()[j % 4] - centroid) * rng.gen_range(0.0..0.5);
            let stand_off = rng.gen_range(3.0..20.0);
            let jitter = Vec3::new(
                rng.gen_range(-0.4..0.4),
                rng.gen_range(-0.4..0.4),
                rng.gen_range(-0.4..0.4),
            );
            let sensor = target + (n + jitter).normalized() * stand_off;
            let direction = (target - sensor).normalized();
            beams.push(Beam {
                beam_id: BeamId((i * beams_per_panel + j) as u64),
                origin: sensor,
                direction,
                range: (target - sensor).norm() + rng.gen_range(-0.2..0.2),
                intensity: 50.0,
                timestamp_ns: (i * beams_per_panel + j) as i64,
                sensor_id: "s1".into(),
                campaign_id: "c1".into(),
            });
        }
    }
    (surfaces, beams)
}

fn associate(surfaces: &[Surface], beams: &[Beam]) -> Vec<beamlink::association::Association> {
    let index = SurfaceIndex::build(surfaces.to_vec()).unwrap();
    associate_batch(beams, &index, &AssociationConfig::default()).0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Moving scene and beams together never changes which surface a beam
    /// links to, nor the incidence angle or the link distances.
    #[test]
    fn associations_are_rigid_motion_invariant(
        seed in 0u64..1000,
        axis in unit_vector(),
        angle in 0.0f64..std::f64::consts::PI,
        shift in (-100.0f64..100.0, -100.0f64..100.0, -100.0f64..100.0),
    ) {
        let (surfaces, beams) = panel_scene(seed, 6, 5);
        let motion = RigidTransform::new(
            Rotation::from_axis_angle(axis, angle),
            Vec3::new(shift.0, shift.1, shift.2),
        );
        let moved_surfaces: Vec<Surface> =
            surfaces.iter().map(|s| s.transformed(&motion)).collect();
        let moved_beams: Vec<Beam> = beams
            .iter()
            .map(|b| Beam {
                origin: motion.apply(b.origin),
                direction: motion.apply_direction(b.direction),
                ..b.clone()
            })
            .collect();

        let before = associate(&surfaces, &beams);
        let after = associate(&moved_surfaces, &moved_beams);
        prop_assert_eq!(before.len(), after.len());
        for (x, y) in before.iter().zip(&after) {
            prop_assert_eq!(x.beam_id, y.beam_id);
            prop_assert_eq!(&x.surface_id, &y.surface_id);
            prop_assert_eq!(x.rank, y.rank);
            prop_assert!((x.zenith - y.zenith).abs() <= 1e-6);
            prop_assert!((x.signed_dist - y.signed_dist).abs() <= 1e-6);
            prop_assert!((x.min_dist - y.min_dist).abs() <= 1e-6);
        }
    }

    /// The azimuth frame anchors its first axis to a world direction, so
    /// azimuths are additionally preserved by motions that keep that anchor
    /// fixed: any rotation about world z plus any translation (for surfaces
    /// away from the horizontal-normal special case).
    #[test]
    fn azimuths_survive_anchor_preserving_motions(
        seed in 0u64..1000,
        angle in 0.0f64..std::f64::consts::TAU,
        shift in (-100.0f64..100.0, -100.0f64..100.0, -100.0f64..100.0),
    ) {
        let (surfaces, beams) = panel_scene(seed, 6, 5);
        let motion = RigidTransform::new(
            Rotation::from_axis_angle(Vec3::new(0.0, 0.0, 1.0), angle),
            Vec3::new(shift.0, shift.1, shift.2),
        );
        let moved_surfaces: Vec<Surface> =
            surfaces.iter().map(|s| s.transformed(&motion)).collect();
        let moved_beams: Vec<Beam> = beams
            .iter()
            .map(|b| Beam {
                origin: motion.apply(b.origin),
                direction: motion.apply_direction(b.direction),
                ..b.clone()
            })
            .collect();

        let before = associate(&surfaces, &beams);
        let after = associate(&moved_surfaces, &moved_beams);
        prop_assert_eq!(before.len(), after.len());
        for (x, y) in before.iter().zip(&after) {
            let delta = (x.azimuth - y.azimuth).abs();
            let wrapped = delta.min(std::f64::consts::TAU - delta);
            prop_assert!(wrapped <= 1e-6, "azimuth moved by {wrapped}");
        }
    }
}

/// The batch API promises output independent of the worker count.
#[test]
fn batches_are_identical_across_worker_counts() {
    let (surfaces, beams) = panel_scene(7, 40, 50);
    let index = SurfaceIndex::build(surfaces).unwrap();
    let cfg = AssociationConfig::default();

    let serial = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| associate_batch(&beams, &index, &cfg));
    let parallel = rayon::ThreadPoolBuilder::new()
        .num_threads(4)
        .build()
        .unwrap()
        .install(|| associate_batch(&beams, &index, &cfg));

    assert_eq!(serial.0, parallel.0);
    assert_eq!(serial.1, parallel.1);
    assert!(serial.1.associated_beams > 0, "scene produces links");
}
