//! Bounding volume hierarchy over scene surfaces.
//!
//! The tree is built once per scene: surfaces are recursively median-split
//! along the longest axis of their centroid spread, with up to
//! [`LEAF_CAPACITY`] surfaces per leaf. A candidate query walks the nodes
//! whose boxes, inflated by the capture radius, intersect the uncertainty
//! segment, and runs the exact spherocylinder test at the leaves. The result
//! therefore equals a brute-force scan of [`spherocylinder_candidate`] over
//! every surface.

use crate::geom::{spherocylinder_candidate, Aabb, Segment, Surface, Vec3};
use crate::ids::SurfaceId;
use std::collections::BTreeMap;
use thiserror::Error;

/// Maximum number of surfaces stored in one leaf.
pub const LEAF_CAPACITY: usize = 8;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("duplicate surface id {0}")]
    DuplicateSurfaceId(SurfaceId),
}

#[derive(Debug)]
enum Node {
    Inner { bounds: Aabb, left: usize, right: usize },
    Leaf { bounds: Aabb, start: usize, len: usize },
}

/// Immutable spatial index over a set of surfaces.
#[derive(Debug)]
pub struct SurfaceIndex {
    surfaces: Vec<Surface>,
    by_id: BTreeMap<SurfaceId, usize>,
    /// Surface indices in tree order; leaves reference slices of this.
    ordered: Vec<usize>,
    nodes: Vec<Node>,
    root: Option<usize>,
}

/// Traversal counters for index efficiency checks.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct QueryStats {
    /// Leaf nodes whose box intersected the inflated query.
    pub leaf_visits: usize,
    /// Surfaces that reached the exact candidate test.
    pub exact_tests: usize,
}

impl SurfaceIndex {
    /// Builds the hierarchy. Surface ids must be unique.
    pub fn build(surfaces: Vec<Surface>) -> Result<Self, IndexError> {
        let mut by_id = BTreeMap::new();
        for (i, s) in surfaces.iter().enumerate() {
            if by_id.insert(s.id.clone(), i).is_some() {
                return Err(IndexError::DuplicateSurfaceId(s.id.clone()));
            }
        }

        let mut index = SurfaceIndex {
            ordered: (0..surfaces.len()).collect(),
            surfaces,
            by_id,
            nodes: Vec::new(),
            root: None,
        };
        if !index.surfaces.is_empty() {
            let n = index.ordered.len();
            index.root = Some(index.build_node(0, n));
        }
        Ok(index)
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let bounds = self.ordered[start..end]
            .iter()
            .map(|&i| *self.surfaces[i].bounds())
            .reduce(|a, b| a.union(&b))
            .expect("non-empty range");

        if end - start <= LEAF_CAPACITY {
            self.nodes.push(Node::Leaf { bounds, start, len: end - start });
            return self.nodes.len() - 1;
        }

        // Median split on the longest axis of the centroid spread; ties fall
        // back to the original surface order, keeping builds deterministic.
        let centroid_bounds = Aabb::from_points(
            self.ordered[start..end].iter().map(|&i| self.surfaces[i].centroid()),
        )
        .expect("non-empty range");
        let axis = centroid_bounds.longest_axis();
        let key = |s: &Surface| -> f64 {
            let c = s.centroid();
            match axis {
                0 => c.x,
                1 => c.y,
                _ => c.z,
            }
        };
        self.ordered[start..end].sort_by(|&a, &b| {
            key(&self.surfaces[a])
                .partial_cmp(&key(&self.surfaces[b]))
                .expect("finite centroids")
                .then(a.cmp(&b))
        });

        let mid = start + (end - start) / 2;
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes.push(Node::Inner { bounds, left, right });
        self.nodes.len() - 1
    }

    pub fn len(&self) -> usize {
        self.surfaces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.surfaces.is_empty()
    }

    pub fn surfaces(&self) -> &[Surface] {
        &self.surfaces
    }

    pub fn get(&self, id: &SurfaceId) -> Option<&Surface> {
        self.by_id.get(id).map(|&i| &self.surfaces[i])
    }

    /// Ids of all surfaces that pass the exact spherocylinder candidate test
    /// for this segment, radius and beam direction.
    pub fn query_candidates(
        &self,
        segment: &Segment,
        radius: f64,
        beam_direction: Vec3,
    ) -> Vec<SurfaceId> {
        self.query_candidate_surfaces(segment, radius, beam_direction)
            .into_iter()
            .map(|s| s.id.clone())
            .collect()
    }

    /// Like [`Self::query_candidates`] but returning surface references.
    pub fn query_candidate_surfaces(
        &self,
        segment: &Segment,
        radius: f64,
        beam_direction: Vec3,
    ) -> Vec<&Surface> {
        let mut out = Vec::new();
        let mut stats = QueryStats::default();
        self.walk(segment, radius, beam_direction, &mut out, &mut stats);
        out
    }

    /// Query variant that also reports traversal counters.
    pub fn query_candidates_with_stats(
        &self,
        segment: &Segment,
        radius: f64,
        beam_direction: Vec3,
    ) -> (Vec<SurfaceId>, QueryStats) {
        let mut out = Vec::new();
        let mut stats = QueryStats::default();
        self.walk(segment, radius, beam_direction, &mut out, &mut stats);
        (out.into_iter().map(|s| s.id.clone()).collect(), stats)
    }

    fn walk<'a>(
        &'a self,
        segment: &Segment,
        radius: f64,
        beam_direction: Vec3,
        out: &mut Vec<&'a Surface>,
        stats: &mut QueryStats,
    ) {
        let Some(root) = self.root else { return };
        let mut stack = vec![root];
        while let Some(node) = stack.pop() {
            match &self.nodes[node] {
                Node::Inner { bounds, left, right } => {
                    if bounds.inflated(radius).intersects_segment(segment) {
                        stack.push(*right);
                        stack.push(*left);
                    }
                }
                Node::Leaf { bounds, start, len } => {
                    if !bounds.inflated(radius).intersects_segment(segment) {
                        continue;
                    }
                    stats.leaf_visits += 1;
                    for &i in &self.ordered[*start..*start + *len] {
                        stats.exact_tests += 1;
                        let surface = &self.surfaces[i];
                        if spherocylinder_candidate(segment, surface, beam_direction, radius) {
                            out.push(surface);
                        }
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod test {
    use super::*;
    use crate::geom::GeomParams;

    fn panel(id: &str, center: Vec3, side: f64) -> Surface {
        // Square in a plane x = const, normal -x.
        let h = side / 2.0;
        Surface::new(
            id,
            "obj",
            "Test",
            None,
            None,
            vec![
                center + Vec3::new(0.0, -h, -h),
                center + Vec3::new(0.0, -h, h),
                center + Vec3::new(0.0, h, h),
                center + Vec3::new(0.0, h, -h),
            ],
        )
        .unwrap()
    }

    fn segment_toward_x(range: f64) -> Segment {
        let ray =
            crate::geom::Ray::new(Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0), range).unwrap();
        Segment::from_ray(&ray, &GeomParams::default())
    }

    #[test]
    fn empty_index_returns_nothing() {
        let index = SurfaceIndex::build(Vec::new()).unwrap();
        let seg = segment_toward_x(5.0);
        assert!(index.query_candidates(&seg, 0.05, Vec3::new(1.0, 0.0, 0.0)).is_empty());
    }

    #[test]
    fn single_surface_hit_and_miss() {
        let index =
            SurfaceIndex::build(vec![panel("p", Vec3::new(5.0, 0.0, 0.0), 1.0)]).unwrap();
        let d = Vec3::new(1.0, 0.0, 0.0);
        let hit = index.query_candidates(&segment_toward_x(5.0), 0.05, d);
        assert_eq!(hit, vec![SurfaceId::from("p")]);
        let miss = index.query_candidates(&segment_toward_x(2.0), 0.05, d);
        assert!(miss.is_empty());
    }

    #[test]
    fn duplicate_ids_rejected() {
        let err = SurfaceIndex::build(vec![
            panel("p", Vec3::new(5.0, 0.0, 0.0), 1.0),
            panel("p", Vec3::new(7.0, 0.0, 0.0), 1.0),
        ])
        .unwrap_err();
        match err {
            IndexError::DuplicateSurfaceId(id) => assert_eq!(id.as_str(), "p"),
        }
    }

    #[test]
    fn lookup_by_id() {
        let index = SurfaceIndex::build(vec![
            panel("a", Vec3::new(5.0, 0.0, 0.0), 1.0),
            panel("b", Vec3::new(7.0, 0.0, 0.0), 1.0),
        ])
        .unwrap();
        assert!(index.get(&SurfaceId::from("a")).is_some());
        assert!(index.get(&SurfaceId::from("zz")).is_none());
    }
}
