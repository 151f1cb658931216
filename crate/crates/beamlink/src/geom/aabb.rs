use super::{Segment, Vec3};

/// Axis-aligned bounding box, inclusive on all faces.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        debug_assert!(min.x <= max.x && min.y <= max.y && min.z <= max.z);
        Self { min, max }
    }

    /// Smallest box containing all points; `None` for an empty iterator.
    pub fn from_points<I: IntoIterator<Item = Vec3>>(points: I) -> Option<Self> {
        let mut iter = points.into_iter();
        let first = iter.next()?;
        let mut b = Aabb { min: first, max: first };
        for p in iter {
            b.expand(p);
        }
        Some(b)
    }

    pub fn expand(&mut self, p: Vec3) {
        self.min = self.min.min_components(p);
        self.max = self.max.max_components(p);
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: self.min.min_components(other.min),
            max: self.max.max_components(other.max),
        }
    }

    /// Box grown by `r` on every face.
    pub fn inflated(&self, r: f64) -> Aabb {
        let d = Vec3::new(r, r, r);
        Aabb { min: self.min - d, max: self.max + d }
    }

    pub fn contains(&self, p: Vec3) -> bool {
        p.x >= self.min.x
            && p.x <= self.max.x
            && p.y >= self.min.y
            && p.y <= self.max.y
            && p.z >= self.min.z
            && p.z <= self.max.z
    }

    /// Overlap test, touching counts as intersecting.
    pub fn intersects(&self, other: &Aabb) -> bool {
        self.min.x <= other.max.x
            && self.max.x >= other.min.x
            && self.min.y <= other.max.y
            && self.max.y >= other.min.y
            && self.min.z <= other.max.z
            && self.max.z >= other.min.z
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn longest_axis(&self) -> usize {
        let e = self.max - self.min;
        if e.x >= e.y && e.x >= e.z {
            0
        } else if e.y >= e.z {
            1
        } else {
            2
        }
    }

    /// Slab test for a segment parametrised as `center + t * direction`,
    /// `t` in `[-half_length, half_length]`.
    pub fn intersects_segment(&self, segment: &Segment) -> bool {
        let mut t0 = -segment.half_length;
        let mut t1 = segment.half_length;
        let c = [segment.center.x, segment.center.y, segment.center.z];
        let d = [segment.direction.x, segment.direction.y, segment.direction.z];
        let lo = [self.min.x, self.min.y, self.min.z];
        let hi = [self.max.x, self.max.y, self.max.z];
        for axis in 0..3 {
            if d[axis].abs() < 1e-12 {
                if c[axis] < lo[axis] || c[axis] > hi[axis] {
                    return false;
                }
                continue;
            }
            let inv = 1.0 / d[axis];
            let mut ta = (lo[axis] - c[axis]) * inv;
            let mut tb = (hi[axis] - c[axis]) * inv;
            if ta > tb {
                std::mem::swap(&mut ta, &mut tb);
            }
            t0 = t0.max(ta);
            t1 = t1.min(tb);
            if t0 > t1 {
                return false;
            }
        }
        true
    }
}
