use super::surface::tangent_basis;
use super::{GeomError, Surface, Vec3};

/// Numerical and association tolerances.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeomParams {
    /// Parallelism and near-vertical-normal threshold.
    pub epsilon: f64,
    /// Capture radius around the uncertainty segment, metres.
    pub assoc_radius: f64,
    /// Full length of the uncertainty segment, metres.
    pub segment_length: f64,
}

impl Default for GeomParams {
    fn default() -> Self {
        Self { epsilon: 1e-6, assoc_radius: 0.05, segment_length: 1.0 }
    }
}

impl GeomParams {
    pub fn validate(&self) -> Result<(), GeomError> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(GeomError::InvalidParams("epsilon must be positive".into()));
        }
        if !(self.assoc_radius > 0.0 && self.assoc_radius.is_finite()) {
            return Err(GeomError::InvalidParams("assoc_radius must be positive".into()));
        }
        if !(self.segment_length > 0.0 && self.segment_length.is_finite()) {
            return Err(GeomError::InvalidParams("segment_length must be positive".into()));
        }
        Ok(())
    }
}

/// A beam: origin, unit direction and measured range.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    pub direction: Vec3,
    pub range: f64,
}

impl Ray {
    pub fn new(origin: Vec3, direction: Vec3, range: f64) -> Result<Self, GeomError> {
        if !origin.is_finite() || !direction.is_finite() || !range.is_finite() {
            return Err(GeomError::InvalidRay("non-finite component".into()));
        }
        if !direction.is_unit(1e-9) {
            return Err(GeomError::InvalidRay("direction must be a unit vector".into()));
        }
        if range < 0.0 {
            return Err(GeomError::InvalidRay("range must be non-negative".into()));
        }
        Ok(Self { origin, direction, range })
    }

    /// Measured reflection point `origin + range * direction`.
    pub fn reflection_point(&self) -> Vec3 {
        self.origin + self.direction * self.range
    }
}

/// Uncertainty segment centred on a reflection point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub center: Vec3,
    pub direction: Vec3,
    pub half_length: f64,
}

impl Segment {
    pub fn new(center: Vec3, direction: Vec3, half_length: f64) -> Result<Self, GeomError> {
        if !center.is_finite() || !direction.is_finite() || !half_length.is_finite() {
            return Err(GeomError::InvalidSegment("non-finite component".into()));
        }
        if !direction.is_unit(1e-9) {
            return Err(GeomError::InvalidSegment("direction must be a unit vector".into()));
        }
        if half_length <= 0.0 {
            return Err(GeomError::InvalidSegment("half_length must be positive".into()));
        }
        Ok(Self { center, direction, half_length })
    }

    /// Segment of length `params.segment_length` centred on the ray's
    /// reflection point, along the ray direction. Valid for any range,
    /// including zero.
    pub fn from_ray(ray: &Ray, params: &GeomParams) -> Segment {
        Segment {
            center: ray.reflection_point(),
            direction: ray.direction,
            half_length: params.segment_length / 2.0,
        }
    }

    pub fn endpoints(&self) -> (Vec3, Vec3) {
        (
            self.center - self.direction * self.half_length,
            self.center + self.direction * self.half_length,
        )
    }

    pub fn point_at(&self, t: f64) -> Vec3 {
        self.center + self.direction * t
    }
}

/// Candidate filter: the surface faces the beam (`-d . n >= 0`) and its
/// polygon passes within `radius` of the uncertainty segment. The distance
/// test is exact; an inflated-box pre-check only rejects surfaces that are
/// provably farther than `radius`.
pub fn spherocylinder_candidate(
    segment: &Segment,
    surface: &Surface,
    beam_direction: Vec3,
    radius: f64,
) -> bool {
    if -beam_direction.dot(surface.normal()) < 0.0 {
        return false;
    }
    if !surface.bounds().inflated(radius).intersects_segment(segment) {
        return false;
    }
    surface.distance_to_segment(segment) <= radius
}

/// Signed along-beam distance from an intersection point to the measured
/// reflection point: positive when the intersection lies between sensor and
/// reflection point, negative when it lies beyond it.
pub fn signed_distance(reflection_point: Vec3, intersection: Vec3, beam_direction: Vec3) -> f64 {
    (reflection_point - intersection).dot(beam_direction)
}

/// Incidence (zenith) angle between the reversed beam direction and the
/// surface normal, in `[0, pi/2]` for front-facing surfaces.
pub fn zenith_angle(beam_direction: Vec3, surface_normal: Vec3) -> f64 {
    (-beam_direction.dot(surface_normal)).clamp(-1.0, 1.0).acos()
}

/// Surface-local coordinate frame for azimuth computation.
///
/// The basis `(u, v, n)` depends only on the surface normal, so every beam
/// hitting the same surface shares it; the origin is the sensor position
/// projected onto the surface plane and therefore varies per sensor
/// position.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalFrame {
    pub u: Vec3,
    pub v: Vec3,
    pub n: Vec3,
    pub origin: Vec3,
}

impl LocalFrame {
    /// Builds the frame for a surface as seen from `sensor_origin`.
    ///
    /// The auxiliary axis is world x for near-vertical normals
    /// (`sqrt(nx^2 + ny^2) < epsilon`), world z otherwise; `u` is its
    /// projection into the plane, `v = n x u` completes the right-handed
    /// basis, and the origin is `sensor_origin` projected onto the plane.
    pub fn new(surface: &Surface, sensor_origin: Vec3, epsilon: f64) -> LocalFrame {
        let n = surface.normal();
        let (u, v) = tangent_basis(n, epsilon);
        let origin = sensor_origin - n * (sensor_origin - surface.centroid()).dot(n);
        LocalFrame { u, v, n, origin }
    }

    /// Azimuth of an on-plane point around the frame origin, in `[0, 2*pi)`,
    /// measured from `u` toward `v`.
    pub fn azimuth_of(&self, p: Vec3) -> Azimuth {
        let rel = p - self.origin;
        let pu = rel.dot(self.u);
        let pv = rel.dot(self.v);
        if pu == 0.0 && pv == 0.0 {
            return Azimuth { radians: 0.0, degenerate: true };
        }
        let two_pi = 2.0 * std::f64::consts::PI;
        let mut a = (two_pi + pv.atan2(pu)) % two_pi;
        if a < 0.0 {
            a += two_pi; // unreachable in practice; keeps the contract airtight
        }
        Azimuth { radians: a, degenerate: false }
    }
}

/// Azimuth result; `degenerate` marks a point that coincides with the frame
/// origin, where the angle defaults to zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Azimuth {
    pub radians: f64,
    pub degenerate: bool,
}

#[cfg(test)]
mod test {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn unit_x() -> Vec3 {
        Vec3::new(1.0, 0.0, 0.0)
    }

    fn square_at_x(x: f64, side: f64) -> Surface {
        // Plane x = const, normal -x (facing a sensor at the origin).
        let h = side / 2.0;
        Surface::new(
            "sq",
            "obj",
            "Test",
            None,
            None,
            vec![
                Vec3::new(x, -h, -h),
                Vec3::new(x, -h, h),
                Vec3::new(x, h, h),
                Vec3::new(x, h, -h),
            ],
        )
        .unwrap()
    }

    #[test]
    fn reflection_point_examples() {
        let r = Ray::new(Vec3::ZERO, unit_x(), 5.0).unwrap();
        assert_eq!(r.reflection_point(), Vec3::new(5.0, 0.0, 0.0));
        let r = Ray::new(Vec3::new(1.0, 2.0, 3.0), Vec3::new(0.0, 0.0, 1.0), 2.5).unwrap();
        assert_eq!(r.reflection_point(), Vec3::new(1.0, 2.0, 5.5));
        let r = Ray::new(Vec3::new(-1.0, 0.0, 0.0), unit_x(), 0.0).unwrap();
        assert_eq!(r.reflection_point(), Vec3::new(-1.0, 0.0, 0.0));
    }

    #[test]
    fn segment_from_ray_default_length() {
        let ray = Ray::new(Vec3::ZERO, unit_x(), 10.0).unwrap();
        let seg = Segment::from_ray(&ray, &GeomParams::default());
        assert_eq!(seg.center, Vec3::new(10.0, 0.0, 0.0));
        assert_eq!(seg.half_length, 0.5);
        let (a, b) = seg.endpoints();
        assert_eq!(a, Vec3::new(9.5, 0.0, 0.0));
        assert_eq!(b, Vec3::new(10.5, 0.0, 0.0));
    }

    #[test]
    fn zero_range_segment_centres_on_origin() {
        let ray = Ray::new(Vec3::new(3.0, 1.0, 2.0), unit_x(), 0.0).unwrap();
        let seg = Segment::from_ray(&ray, &GeomParams::default());
        assert_eq!(seg.center, Vec3::new(3.0, 1.0, 2.0));
        assert_eq!(seg.half_length, 0.5);
    }

    #[test]
    fn facing_square_is_candidate() {
        let surface = square_at_x(5.0, 1.0);
        assert!(surface.normal().distance(Vec3::new(-1.0, 0.0, 0.0)) < 1e-15);
        let ray = Ray::new(Vec3::ZERO, unit_x(), 5.0).unwrap();
        let seg = Segment::from_ray(&ray, &GeomParams::default());
        assert!(spherocylinder_candidate(&seg, &surface, unit_x(), 0.05));
    }

    #[test]
    fn back_facing_square_is_rejected() {
        let mut v = square_at_x(5.0, 1.0).vertices().to_vec();
        v.reverse(); // normal now +x, away from the sensor
        let surface = Surface::new("sq", "obj", "Test", None, None, v).unwrap();
        let ray = Ray::new(Vec3::ZERO, unit_x(), 5.0).unwrap();
        let seg = Segment::from_ray(&ray, &GeomParams::default());
        assert!(!spherocylinder_candidate(&seg, &surface, unit_x(), 0.05));
    }

    #[test]
    fn lateral_offset_against_radius() {
        // 10 cm square in a plane parallel to the beam axis, centred 6 cm
        // (then 4 cm) off it: only the closer one is within a 5 cm radius.
        let square_offset = |dy: f64| {
            Surface::new(
                "sq",
                "obj",
                "Test",
                None,
                None,
                vec![
                    Vec3::new(4.95, dy, -0.05),
                    Vec3::new(5.05, dy, -0.05),
                    Vec3::new(5.05, dy, 0.05),
                    Vec3::new(4.95, dy, 0.05),
                ],
            )
            .unwrap()
        };
        let ray = Ray::new(Vec3::ZERO, unit_x(), 5.0).unwrap();
        let seg = Segment::from_ray(&ray, &GeomParams::default());
        let far = square_offset(0.06);
        let near = square_offset(0.04);
        // Both planes contain the beam axis direction, so the back-face test
        // passes with a zero dot product either way.
        assert!(!spherocylinder_candidate(&seg, &far, unit_x(), 0.05));
        assert!(spherocylinder_candidate(&seg, &near, unit_x(), 0.05));
        assert!((far.distance_to_segment(&seg) - 0.06).abs() < 1e-12);
        assert!((near.distance_to_segment(&seg) - 0.04).abs() < 1e-12);
    }

    #[test]
    fn intersection_within_and_outside_reach() {
        let surface = square_at_x(5.0, 4.0);
        let ray = Ray::new(Vec3::ZERO, unit_x(), 5.0).unwrap();
        let seg = Segment::from_ray(&ray, &GeomParams::default());
        let p = surface.intersect_segment(&seg, 1e-6).unwrap();
        assert!(p.distance(Vec3::new(5.0, 0.0, 0.0)) < 1e-12);

        let too_far = square_at_x(6.0, 4.0);
        assert!(too_far.intersect_segment(&seg, 1e-6).is_none());
    }

    #[test]
    fn parallel_segment_yields_no_intersection() {
        let surface = square_at_x(5.0, 4.0);
        // Segment running parallel to the plane at x = 4.9.
        let seg = Segment::new(Vec3::new(4.9, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0), 0.5).unwrap();
        assert!(surface.intersect_segment(&seg, 1e-6).is_none());
    }

    #[test]
    fn signed_distance_examples() {
        let d = unit_x();
        let pm = Vec3::new(5.0, 0.0, 0.0);
        assert!((signed_distance(pm, Vec3::new(4.8, 0.0, 0.0), d) - 0.2).abs() < 1e-12);
        assert!((signed_distance(pm, Vec3::new(5.2, 0.0, 0.0), d) + 0.2).abs() < 1e-12);
        assert_eq!(signed_distance(pm, pm, d), 0.0);
    }

    #[test]
    fn zenith_angle_examples() {
        let n = Vec3::new(-1.0, 0.0, 0.0);
        assert_eq!(zenith_angle(unit_x(), n), 0.0);
        let d45 = Vec3::new(1.0, 1.0, 0.0).normalized();
        assert!((zenith_angle(d45, n) - FRAC_PI_4).abs() < 1e-12);
        let grazing = Vec3::new(0.0, 1.0, 0.0);
        assert!((zenith_angle(grazing, n) - FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn frame_for_floor_uses_world_x() {
        // Horizontal floor: normal +z, auxiliary axis x.
        let floor = Surface::new(
            "f",
            "obj",
            "Test",
            None,
            None,
            vec![
                Vec3::new(-1.0, -1.0, 0.0),
                Vec3::new(1.0, -1.0, 0.0),
                Vec3::new(1.0, 1.0, 0.0),
                Vec3::new(-1.0, 1.0, 0.0),
            ],
        )
        .unwrap();
        let frame = LocalFrame::new(&floor, Vec3::new(0.2, -0.3, 1.7), 1e-6);
        assert!(frame.u.distance(Vec3::new(1.0, 0.0, 0.0)) < 1e-15);
        assert!(frame.v.distance(Vec3::new(0.0, 1.0, 0.0)) < 1e-15);
        // Sensor projects straight down onto the plane.
        assert!(frame.origin.distance(Vec3::new(0.2, -0.3, 0.0)) < 1e-15);
    }

    #[test]
    fn frame_for_vertical_wall() {
        // Wall with normal (0, -1, 0): auxiliary axis z, so u = z and
        // v = n x u = (-1, 0, 0).
        let wall = Surface::new(
            "w",
            "obj",
            "Test",
            None,
            None,
            vec![
                Vec3::new(1.0, 3.0, 0.0),
                Vec3::new(1.0, 3.0, 2.0),
                Vec3::new(-1.0, 3.0, 2.0),
                Vec3::new(-1.0, 3.0, 0.0),
            ],
        )
        .unwrap();
        assert!(wall.normal().distance(Vec3::new(0.0, -1.0, 0.0)) < 1e-15);
        let frame = LocalFrame::new(&wall, Vec3::new(0.0, 0.0, 1.0), 1e-6);
        assert!(frame.u.distance(Vec3::new(0.0, 0.0, 1.0)) < 1e-15);
        assert!(frame.v.distance(Vec3::new(-1.0, 0.0, 0.0)) < 1e-15);
        assert!(frame.origin.distance(Vec3::new(0.0, 3.0, 1.0)) < 1e-15);
        // u x v = n holds.
        assert!(frame.u.cross(frame.v).distance(frame.n) < 1e-15);
    }

    #[test]
    fn azimuth_quadrants_and_degeneracy() {
        let floor = Surface::new(
            "f",
            "obj",
            "Test",
            None,
            None,
            vec![
                Vec3::new(-5.0, -5.0, 0.0),
                Vec3::new(5.0, -5.0, 0.0),
                Vec3::new(5.0, 5.0, 0.0),
                Vec3::new(-5.0, 5.0, 0.0),
            ],
        )
        .unwrap();
        let frame = LocalFrame::new(&floor, Vec3::new(0.0, 0.0, 2.0), 1e-6);
        let a = frame.azimuth_of(frame.origin + frame.u * 1.5);
        assert_eq!(a.radians, 0.0);
        assert!(!a.degenerate);
        let a = frame.azimuth_of(frame.origin + frame.v * 0.5);
        assert!((a.radians - FRAC_PI_2).abs() < 1e-12);
        let a = frame.azimuth_of(frame.origin - frame.u * 2.0);
        assert!((a.radians - PI).abs() < 1e-12);
        let a = frame.azimuth_of(frame.origin - frame.v * 2.0);
        assert!((a.radians - 3.0 * FRAC_PI_2).abs() < 1e-12);
        let a = frame.azimuth_of(frame.origin);
        assert!(a.degenerate);
        assert_eq!(a.radians, 0.0);
    }

    #[test]
    fn ray_validation() {
        assert!(Ray::new(Vec3::ZERO, Vec3::new(1.0, 1.0, 0.0), 1.0).is_err());
        assert!(Ray::new(Vec3::ZERO, unit_x(), -1.0).is_err());
        assert!(Ray::new(Vec3::new(f64::NAN, 0.0, 0.0), unit_x(), 1.0).is_err());
    }
}
