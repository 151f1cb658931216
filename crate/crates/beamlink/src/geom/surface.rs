use super::distance::{point_triangle_distance, triangle_segment_distance};
use super::{Aabb, GeomError, RigidTransform, Segment, Vec3, COPLANARITY_TOL};
use crate::ids::{is_clean_token, ObjectId, SurfaceId};

/// Planar polygon of a scene object, with its semantic tags.
///
/// The outward unit normal follows the vertex winding by the right-hand rule
/// (vertices run counter-clockwise when viewed from the side the normal
/// points toward). Centroid, bounds and a cached triangulation are derived at
/// construction; mutate a surface only by rebuilding it.
#[derive(Clone, Debug)]
pub struct Surface {
    pub id: SurfaceId,
    pub object_id: ObjectId,
    pub class_name: String,
    pub function: Option<String>,
    /// Material tag used by the scan simulator; irrelevant for association.
    pub material: Option<String>,
    vertices: Vec<Vec3>,
    normal: Vec3,
    centroid: Vec3,
    bounds: Aabb,
    triangles: Vec<[usize; 3]>,
}

impl Surface {
    /// Validates and derives: at least three finite vertices, all within
    /// [`COPLANARITY_TOL`] of the common plane, simple (non-self-intersecting)
    /// outline, non-degenerate area.
    pub fn new(
        id: impl Into<SurfaceId>,
        object_id: impl Into<ObjectId>,
        class_name: impl Into<String>,
        function: Option<String>,
        material: Option<String>,
        vertices: Vec<Vec3>,
    ) -> Result<Self, GeomError> {
        let id = id.into();
        let object_id = object_id.into();
        let class_name = class_name.into();
        let invalid = |reason: &str| GeomError::InvalidSurface {
            id: id.as_str().to_owned(),
            reason: reason.to_owned(),
        };

        if !is_clean_token(id.as_str()) || !is_clean_token(object_id.as_str()) {
            return Err(invalid("surface and object ids must be non-empty, separator-free tokens"));
        }
        if !is_clean_token(&class_name) {
            return Err(invalid("class name must be a non-empty, separator-free token"));
        }
        for tag in function.iter().chain(material.iter()) {
            if !is_clean_token(tag) {
                return Err(invalid("function/material tags must be separator-free tokens"));
            }
        }
        if vertices.len() < 3 {
            return Err(invalid("a polygon needs at least three vertices"));
        }
        if vertices.iter().any(|v| !v.is_finite()) {
            return Err(invalid("vertices must be finite"));
        }

        // Newell's method: robust plane normal for arbitrary simple polygons.
        let mut n = Vec3::ZERO;
        for (i, a) in vertices.iter().enumerate() {
            let b = vertices[(i + 1) % vertices.len()];
            n.x += (a.y - b.y) * (a.z + b.z);
            n.y += (a.z - b.z) * (a.x + b.x);
            n.z += (a.x - b.x) * (a.y + b.y);
        }
        if n.norm() < 1e-12 {
            return Err(invalid("degenerate polygon (zero area)"));
        }
        let normal = n.normalized();

        let mut centroid = Vec3::ZERO;
        for v in &vertices {
            centroid = centroid + *v;
        }
        let centroid = centroid / vertices.len() as f64;

        for v in &vertices {
            if (*v - centroid).dot(normal).abs() > COPLANARITY_TOL {
                return Err(invalid("vertices deviate from the common plane"));
            }
        }

        let (u, v) = tangent_basis(normal, 1e-6);
        let flat: Vec<(f64, f64)> = vertices
            .iter()
            .map(|p| ((*p - centroid).dot(u), (*p - centroid).dot(v)))
            .collect();
        if !is_simple_polygon(&flat) {
            return Err(invalid("polygon outline intersects itself"));
        }

        let triangles = triangulate(&flat);
        if triangles.is_empty() {
            return Err(invalid("polygon could not be triangulated"));
        }

        let bounds = Aabb::from_points(vertices.iter().copied()).expect("non-empty");

        Ok(Self {
            id,
            object_id,
            class_name,
            function,
            material,
            vertices,
            normal,
            centroid,
            bounds,
            triangles,
        })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    /// Outward unit normal.
    pub fn normal(&self) -> Vec3 {
        self.normal
    }

    /// Mean of the vertices.
    pub fn centroid(&self) -> Vec3 {
        self.centroid
    }

    pub fn bounds(&self) -> &Aabb {
        &self.bounds
    }

    /// Cached triangulation as vertex index triples (fan for convex
    /// polygons, ear clipping otherwise).
    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    /// Exact minimum distance from the polygon (interior included) to a
    /// segment, as the minimum over the triangulation.
    pub fn distance_to_segment(&self, segment: &Segment) -> f64 {
        let (s0, s1) = segment.endpoints();
        let mut best = f64::INFINITY;
        for t in &self.triangles {
            let d = triangle_segment_distance(
                self.vertices[t[0]],
                self.vertices[t[1]],
                self.vertices[t[2]],
                s0,
                s1,
            );
            best = best.min(d);
            if best == 0.0 {
                break;
            }
        }
        best
    }

    /// Exact minimum distance from the polygon to a point.
    pub fn distance_to_point(&self, p: Vec3) -> f64 {
        let mut best = f64::INFINITY;
        for t in &self.triangles {
            let d = point_triangle_distance(
                p,
                self.vertices[t[0]],
                self.vertices[t[1]],
                self.vertices[t[2]],
            );
            best = best.min(d);
        }
        best
    }

    /// Intersection of a segment with the polygon (boundary included).
    ///
    /// Returns `None` when the segment is parallel to the plane within
    /// `epsilon` (`|d . n| < epsilon`), when the plane crossing lies outside
    /// the segment, or when the crossing point falls outside the polygon.
    pub fn intersect_segment(&self, segment: &Segment, epsilon: f64) -> Option<Vec3> {
        let denom = segment.direction.dot(self.normal);
        if denom.abs() < epsilon {
            return None;
        }
        let t = (self.centroid - segment.center).dot(self.normal) / denom;
        if t.abs() > segment.half_length {
            return None;
        }
        let p = segment.center + segment.direction * t;
        if self.contains_plane_point(p) {
            Some(p)
        } else {
            None
        }
    }

    /// Point-in-polygon test for a point already on the surface plane,
    /// boundary inclusive.
    pub fn contains_plane_point(&self, p: Vec3) -> bool {
        let (u, v) = tangent_basis(self.normal, 1e-6);
        let rel = p - self.centroid;
        let pu = rel.dot(u);
        let pv = rel.dot(v);
        let flat: Vec<(f64, f64)> = self
            .vertices
            .iter()
            .map(|q| ((*q - self.centroid).dot(u), (*q - self.centroid).dot(v)))
            .collect();

        // Boundary first: within 1e-9 m of any edge counts as inside.
        let n = flat.len();
        for i in 0..n {
            let (ax, ay) = flat[i];
            let (bx, by) = flat[(i + 1) % n];
            if point_edge_distance_2d(pu, pv, ax, ay, bx, by) <= 1e-9 {
                return true;
            }
        }

        // Even-odd crossing count.
        let mut inside = false;
        for i in 0..n {
            let (ax, ay) = flat[i];
            let (bx, by) = flat[(i + 1) % n];
            if (ay > pv) != (by > pv) {
                let x = ax + (bx - ax) * (pv - ay) / (by - ay);
                if pu < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// The surface moved rigidly; all derived fields are rebuilt.
    pub fn transformed(&self, t: &RigidTransform) -> Surface {
        let vertices = self.vertices.iter().map(|v| t.apply(*v)).collect();
        Surface::new(
            self.id.clone(),
            self.object_id.clone(),
            self.class_name.clone(),
            self.function.clone(),
            self.material.clone(),
            vertices,
        )
        .expect("rigid motion preserves validity")
    }
}

/// Orthonormal in-plane basis for a unit normal. The auxiliary axis is world
/// x when the normal is nearly vertical (`sqrt(nx^2 + ny^2) < epsilon`),
/// world z otherwise; the first basis vector is its normalised projection
/// into the plane and the second completes the right-handed set
/// `u x v = n`.
pub(super) fn tangent_basis(normal: Vec3, epsilon: f64) -> (Vec3, Vec3) {
    let a = if (normal.x * normal.x + normal.y * normal.y).sqrt() < epsilon {
        Vec3::new(1.0, 0.0, 0.0)
    } else {
        Vec3::new(0.0, 0.0, 1.0)
    };
    let u = (a - normal * a.dot(normal)).normalized();
    let v = normal.cross(u);
    (u, v)
}

fn point_edge_distance_2d(px: f64, py: f64, ax: f64, ay: f64, bx: f64, by: f64) -> f64 {
    let abx = bx - ax;
    let aby = by - ay;
    let len2 = abx * abx + aby * aby;
    let t = if len2 == 0.0 { 0.0 } else { ((px - ax) * abx + (py - ay) * aby) / len2 };
    let t = t.clamp(0.0, 1.0);
    let dx = px - (ax + abx * t);
    let dy = py - (ay + aby * t);
    (dx * dx + dy * dy).sqrt()
}

fn signed_area(flat: &[(f64, f64)]) -> f64 {
    let n = flat.len();
    let mut acc = 0.0;
    for i in 0..n {
        let (ax, ay) = flat[i];
        let (bx, by) = flat[(i + 1) % n];
        acc += ax * by - bx * ay;
    }
    acc * 0.5
}

/// Proper or improper intersection between 2D segments that do not share an
/// endpoint by construction (non-adjacent polygon edges).
fn segments_intersect_2d(a: (f64, f64), b: (f64, f64), c: (f64, f64), d: (f64, f64)) -> bool {
    fn orient(p: (f64, f64), q: (f64, f64), r: (f64, f64)) -> f64 {
        (q.0 - p.0) * (r.1 - p.1) - (q.1 - p.1) * (r.0 - p.0)
    }
    fn on_segment(p: (f64, f64), q: (f64, f64), r: (f64, f64)) -> bool {
        r.0 >= p.0.min(q.0) - 1e-12
            && r.0 <= p.0.max(q.0) + 1e-12
            && r.1 >= p.1.min(q.1) - 1e-12
            && r.1 <= p.1.max(q.1) + 1e-12
    }
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    if ((o1 > 0.0 && o2 < 0.0) || (o1 < 0.0 && o2 > 0.0))
        && ((o3 > 0.0 && o4 < 0.0) || (o3 < 0.0 && o4 > 0.0))
    {
        return true;
    }
    (o1.abs() < 1e-12 && on_segment(a, b, c))
        || (o2.abs() < 1e-12 && on_segment(a, b, d))
        || (o3.abs() < 1e-12 && on_segment(c, d, a))
        || (o4.abs() < 1e-12 && on_segment(c, d, b))
}

fn is_simple_polygon(flat: &[(f64, f64)]) -> bool {
    let n = flat.len();
    for i in 0..n {
        for j in (i + 1)..n {
            // Skip the edge itself and the two adjacent edges.
            if j == i || (j + 1) % n == i || (i + 1) % n == j {
                continue;
            }
            if segments_intersect_2d(flat[i], flat[(i + 1) % n], flat[j], flat[(j + 1) % n]) {
                return false;
            }
        }
    }
    true
}

fn is_convex(flat: &[(f64, f64)]) -> bool {
    let n = flat.len();
    let mut sign = 0.0_f64;
    for i in 0..n {
        let (ax, ay) = flat[i];
        let (bx, by) = flat[(i + 1) % n];
        let (cx, cy) = flat[(i + 2) % n];
        let cross = (bx - ax) * (cy - by) - (by - ay) * (cx - bx);
        if cross.abs() < 1e-12 {
            continue;
        }
        if sign == 0.0 {
            sign = cross.signum();
        } else if cross.signum() != sign {
            return false;
        }
    }
    true
}

fn point_in_triangle_2d_strict(
    p: (f64, f64),
    a: (f64, f64),
    b: (f64, f64),
    c: (f64, f64),
) -> bool {
    let s1 = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
    let s2 = (c.0 - b.0) * (p.1 - b.1) - (c.1 - b.1) * (p.0 - b.0);
    let s3 = (a.0 - c.0) * (p.1 - c.1) - (a.1 - c.1) * (p.0 - c.0);
    let eps = 1e-12;
    (s1 > eps && s2 > eps && s3 > eps) || (s1 < -eps && s2 < -eps && s3 < -eps)
}

/// Triangulates a simple polygon given in 2D plane coordinates. Convex input
/// becomes a fan; everything else goes through ear clipping.
fn triangulate(flat: &[(f64, f64)]) -> Vec<[usize; 3]> {
    let n = flat.len();
    if n == 3 {
        return vec![[0, 1, 2]];
    }
    if is_convex(flat) {
        return (1..n - 1).map(|i| [0, i, i + 1]).collect();
    }

    // Ear clipping on a counter-clockwise index list.
    let ccw = signed_area(flat) > 0.0;
    let mut idx: Vec<usize> = if ccw { (0..n).collect() } else { (0..n).rev().collect() };
    let mut out = Vec::with_capacity(n - 2);
    let mut guard = 0;
    while idx.len() > 3 && guard < n * n {
        guard += 1;
        let m = idx.len();
        let mut clipped = false;
        for k in 0..m {
            let ia = idx[(k + m - 1) % m];
            let ib = idx[k];
            let ic = idx[(k + 1) % m];
            let a = flat[ia];
            let b = flat[ib];
            let c = flat[ic];
            let cross = (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0);
            if cross <= 1e-12 {
                continue; // reflex or collinear corner
            }
            let blocked = idx
                .iter()
                .any(|&other| other != ia && other != ib && other != ic
                    && point_in_triangle_2d_strict(flat[other], a, b, c));
            if blocked {
                continue;
            }
            out.push([ia, ib, ic]);
            idx.remove(k);
            clipped = true;
            break;
        }
        if !clipped {
            // Numerically stuck (collinear runs); clip the first corner to
            // guarantee progress. Zero-area triangles are harmless for
            // distance queries.
            let ia = idx[idx.len() - 1];
            let ib = idx[0];
            let ic = idx[1];
            out.push([ia, ib, ic]);
            idx.remove(0);
        }
    }
    if idx.len() == 3 {
        out.push([idx[0], idx[1], idx[2]]);
    }
    out
}

#[cfg(test)]
mod test {
    use super::*;

    fn square(side: f64) -> Vec<Vec3> {
        let h = side / 2.0;
        vec![
            Vec3::new(-h, -h, 0.0),
            Vec3::new(h, -h, 0.0),
            Vec3::new(h, h, 0.0),
            Vec3::new(-h, h, 0.0),
        ]
    }

    fn surf(vertices: Vec<Vec3>) -> Surface {
        Surface::new("s", "o", "Test", None, None, vertices).unwrap()
    }

    #[test]
    fn square_normal_and_centroid() {
        let s = surf(square(2.0));
        assert!(s.normal().distance(Vec3::new(0.0, 0.0, 1.0)) < 1e-15);
        assert!(s.centroid().norm() < 1e-15);
        assert_eq!(s.triangles().len(), 2);
    }

    #[test]
    fn rejects_non_coplanar() {
        let mut v = square(2.0);
        v[2].z = 0.01;
        assert!(Surface::new("s", "o", "Test", None, None, v).is_err());
    }

    #[test]
    fn rejects_self_intersecting() {
        // Bowtie: edges cross in the middle.
        let v = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 1.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
        ];
        assert!(Surface::new("s", "o", "Test", None, None, v).is_err());
    }

    #[test]
    fn rejects_degenerate() {
        let v = vec![Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0), Vec3::new(2.0, 0.0, 0.0)];
        assert!(Surface::new("s", "o", "Test", None, None, v).is_err());
    }

    #[test]
    fn concave_polygon_triangulates_to_n_minus_2() {
        // L-shape, 6 vertices.
        let v = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(2.0, 0.0, 0.0),
            Vec3::new(2.0, 1.0, 0.0),
            Vec3::new(1.0, 1.0, 0.0),
            Vec3::new(1.0, 2.0, 0.0),
            Vec3::new(0.0, 2.0, 0.0),
        ];
        let s = surf(v);
        assert_eq!(s.triangles().len(), 4);
        // The notch point (1.5, 1.5) lies outside the L.
        assert!(!s.contains_plane_point(Vec3::new(1.5, 1.5, 0.0)));
        assert!(s.contains_plane_point(Vec3::new(0.5, 0.5, 0.0)));
        assert!(s.contains_plane_point(Vec3::new(0.5, 1.5, 0.0)));
    }

    #[test]
    fn boundary_points_count_as_inside() {
        let s = surf(square(2.0));
        assert!(s.contains_plane_point(Vec3::new(1.0, 0.0, 0.0)));
        assert!(s.contains_plane_point(Vec3::new(1.0, 1.0, 0.0)));
        assert!(!s.contains_plane_point(Vec3::new(1.1, 0.0, 0.0)));
    }

    #[test]
    fn winding_flips_normal() {
        let mut v = square(2.0);
        v.reverse();
        let s = surf(v);
        assert!(s.normal().distance(Vec3::new(0.0, 0.0, -1.0)) < 1e-15);
    }

    #[test]
    fn transformed_preserves_shape() {
        let s = surf(square(2.0));
        let t = RigidTransform::new(
            super::super::Rotation::from_axis_angle(Vec3::new(1.0, 1.0, 0.3), 0.8),
            Vec3::new(5.0, -2.0, 1.0),
        );
        let moved = s.transformed(&t);
        assert!(moved.normal().distance(t.apply_direction(s.normal())) < 1e-9);
        assert!(moved.centroid().distance(t.apply(s.centroid())) < 1e-9);
    }
}
