//! Confirms beam-to-surface links and enriches both sides.
//!
//! For each beam, candidate surfaces come from the spatial index; a
//! candidate is kept only when the uncertainty segment actually intersects
//! its polygon. Candidates are ranked by signed along-beam distance and at
//! most `max_associations_per_beam` of them are confirmed. Enrichment then
//! flows both ways: objects receive intensity and distance statistics over
//! their linked beams, and beams receive the semantics and incidence
//! geometry of their confirmed surface.

use crate::geom::{
    signed_distance, zenith_angle, GeomParams, LocalFrame, Ray, Segment, Vec3,
};
use crate::ids::{is_clean_token, BeamId, CampaignId, ObjectId, SensorId, SurfaceId};
use crate::index::SurfaceIndex;
use crate::stats::{describe, mean, quantile, DescriptiveStats};
use rayon::prelude::*;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AssociationError {
    #[error("association references unknown beam id {0}")]
    UnknownBeam(BeamId),
    #[error("association references unknown surface id {0}")]
    UnknownSurface(SurfaceId),
}

/// One LiDAR return.
#[derive(Clone, Debug, PartialEq)]
pub struct Beam {
    pub beam_id: BeamId,
    pub origin: Vec3,
    /// Unit direction of the outgoing pulse.
    pub direction: Vec3,
    /// Measured range in metres.
    pub range: f64,
    /// Recorded intensity, 0..=255.
    pub intensity: f32,
    pub timestamp_ns: i64,
    pub sensor_id: SensorId,
    pub campaign_id: CampaignId,
}

impl Beam {
    /// Checks the record invariants: finite fields, unit direction,
    /// non-negative range, intensity within 0..=255, clean identifier
    /// tokens.
    pub fn validate(&self) -> Result<(), String> {
        if !self.origin.is_finite() || !self.direction.is_finite() {
            return Err("non-finite origin or direction".into());
        }
        if !self.direction.is_unit(1e-9) {
            return Err("direction is not a unit vector".into());
        }
        if !self.range.is_finite() || self.range < 0.0 {
            return Err("range must be finite and non-negative".into());
        }
        if !self.intensity.is_finite() || !(0.0..=255.0).contains(&self.intensity) {
            return Err("intensity must lie in 0..=255".into());
        }
        if !is_clean_token(self.sensor_id.as_str()) || !is_clean_token(self.campaign_id.as_str()) {
            return Err("sensor and campaign ids must be clean tokens".into());
        }
        Ok(())
    }

    /// Measured reflection point `origin + range * direction`.
    pub fn reflection_point(&self) -> Vec3 {
        self.origin + self.direction * self.range
    }
}

/// How to rank intersecting candidates before confirming.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CandidateOrdering {
    /// Ascending signed distance: the candidate farthest beyond the measured
    /// reflection point wins.
    #[default]
    MinSignedDistance,
    /// Descending signed distance: first-hit semantics, the candidate
    /// closest to the sensor wins.
    MaxSignedDistance,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AssociationConfig {
    pub geom: GeomParams,
    /// Upper bound on confirmed links per beam.
    pub max_associations_per_beam: usize,
    pub ordering: CandidateOrdering,
}

impl Default for AssociationConfig {
    fn default() -> Self {
        Self {
            geom: GeomParams::default(),
            max_associations_per_beam: 1,
            ordering: CandidateOrdering::default(),
        }
    }
}

/// A confirmed beam-to-surface link.
#[derive(Clone, Debug, PartialEq)]
pub struct Association {
    pub beam_id: BeamId,
    pub surface_id: SurfaceId,
    pub object_id: ObjectId,
    /// Where the uncertainty segment crosses the surface polygon.
    pub intersection: Vec3,
    /// Along-beam distance from intersection to measured reflection point.
    pub signed_dist: f64,
    /// Distance from the measured reflection point to the polygon.
    pub min_dist: f64,
    /// Incidence angle, `[0, pi/2]`.
    pub zenith: f64,
    /// Angle around the projected sensor position, `[0, 2*pi)`.
    pub azimuth: f64,
    /// 1 for the confirmed winner, increasing for later candidates.
    pub rank: u32,
}

/// Outcome counters for a batch run.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BatchSummary {
    pub total_beams: u64,
    pub associated_beams: u64,
    pub unassociated_beams: u64,
    /// Records that failed validation or had zero range; skipped.
    pub malformed_beams: u64,
    /// Confirmed associations per surface class.
    pub per_class: BTreeMap<String, u64>,
}

/// Associates one beam. The beam must be valid with `range > 0`; zero-range
/// beams yield no candidates by definition and are reported as malformed by
/// [`associate_batch`].
pub fn associate_beam(
    beam: &Beam,
    index: &SurfaceIndex,
    cfg: &AssociationConfig,
) -> Vec<Association> {
    debug_assert!(beam.validate().is_ok());
    if beam.range <= 0.0 {
        return Vec::new();
    }
    let ray = Ray { origin: beam.origin, direction: beam.direction, range: beam.range };
    let segment = Segment::from_ray(&ray, &cfg.geom);
    let reflection = ray.reflection_point();

    let mut scored: Vec<(f64, &crate::geom::Surface, Vec3)> = index
        .query_candidate_surfaces(&segment, cfg.geom.assoc_radius, beam.direction)
        .into_iter()
        .filter_map(|surface| {
            surface
                .intersect_segment(&segment, cfg.geom.epsilon)
                .map(|p| (signed_distance(reflection, p, beam.direction), surface, p))
        })
        .collect();

    scored.sort_by(|a, b| {
        let primary = match cfg.ordering {
            CandidateOrdering::MinSignedDistance => a.0.partial_cmp(&b.0),
            CandidateOrdering::MaxSignedDistance => b.0.partial_cmp(&a.0),
        }
        .expect("signed distances are finite");
        primary.then_with(|| a.1.id.cmp(&b.1.id))
    });

    scored
        .into_iter()
        .take(cfg.max_associations_per_beam)
        .enumerate()
        .map(|(i, (signed, surface, intersection))| {
            let frame = LocalFrame::new(surface, beam.origin, cfg.geom.epsilon);
            Association {
                beam_id: beam.beam_id,
                surface_id: surface.id.clone(),
                object_id: surface.object_id.clone(),
                intersection,
                signed_dist: signed,
                min_dist: surface.distance_to_point(reflection),
                zenith: zenith_angle(beam.direction, surface.normal()),
                azimuth: frame.azimuth_of(intersection).radians,
                rank: (i + 1) as u32,
            }
        })
        .collect()
}

/// Associates a batch in parallel. Results are ordered by `(beam_id, rank)`
/// and are identical for any worker count.
pub fn associate_batch(
    beams: &[Beam],
    index: &SurfaceIndex,
    cfg: &AssociationConfig,
) -> (Vec<Association>, BatchSummary) {
    enum Row {
        Malformed,
        Miss,
        Hits(Vec<Association>),
    }

    let rows: Vec<Row> = beams
        .par_iter()
        .map(|beam| {
            if beam.validate().is_err() || beam.range <= 0.0 {
                return Row::Malformed;
            }
            let hits = associate_beam(beam, index, cfg);
            if hits.is_empty() {
                Row::Miss
            } else {
                Row::Hits(hits)
            }
        })
        .collect();

    let mut summary = BatchSummary { total_beams: beams.len() as u64, ..Default::default() };
    let mut associations = Vec::new();
    for row in rows {
        match row {
            Row::Malformed => summary.malformed_beams += 1,
            Row::Miss => summary.unassociated_beams += 1,
            Row::Hits(hits) => {
                summary.associated_beams += 1;
                for a in &hits {
                    let class = index
                        .get(&a.surface_id)
                        .map(|s| s.class_name.clone())
                        .unwrap_or_default();
                    *summary.per_class.entry(class).or_insert(0) += 1;
                }
                associations.extend(hits);
            }
        }
    }
    associations.sort_by(|a, b| a.beam_id.cmp(&b.beam_id).then(a.rank.cmp(&b.rank)));
    (associations, summary)
}

/// Per-object statistics over the linked beams.
#[derive(Clone, Debug, PartialEq)]
pub struct ObjectStats {
    pub object_id: ObjectId,
    pub point_count: usize,
    pub intensity: DescriptiveStats,
    pub signed_dist_mean: f64,
    pub signed_dist_median: f64,
    pub min_dist_mean: f64,
    pub min_dist_median: f64,
}

/// Aggregates intensity and distance statistics per object. Every
/// association must reference a beam from `beams`.
pub fn enrich_objects(
    associations: &[Association],
    beams: &[Beam],
) -> Result<BTreeMap<ObjectId, ObjectStats>, AssociationError> {
    let by_id: BTreeMap<BeamId, &Beam> = beams.iter().map(|b| (b.beam_id, b)).collect();

    #[derive(Default)]
    struct Group {
        intensities: Vec<f64>,
        signed: Vec<f64>,
        min_d: Vec<f64>,
    }
    let mut grouped: BTreeMap<ObjectId, Group> = BTreeMap::new();
    for a in associations {
        let beam = by_id.get(&a.beam_id).ok_or(AssociationError::UnknownBeam(a.beam_id))?;
        let entry = grouped.entry(a.object_id.clone()).or_default();
        entry.intensities.push(beam.intensity as f64);
        entry.signed.push(a.signed_dist);
        entry.min_d.push(a.min_dist);
    }

    Ok(grouped
        .into_iter()
        .map(|(object_id, g)| {
            let stats = ObjectStats {
                object_id: object_id.clone(),
                point_count: g.intensities.len(),
                intensity: describe(&g.intensities).expect("group is non-empty"),
                signed_dist_mean: mean(&g.signed),
                signed_dist_median: quantile(&g.signed, 0.5),
                min_dist_mean: mean(&g.min_d),
                min_dist_median: quantile(&g.min_d, 0.5),
            };
            (object_id, stats)
        })
        .collect())
}

/// What a beam learns from its confirmed surface.
#[derive(Clone, Debug, PartialEq)]
pub struct PointEnrichment {
    pub surface_id: SurfaceId,
    pub object_id: ObjectId,
    pub class_name: String,
    pub function: Option<String>,
    pub zenith: f64,
    pub azimuth: f64,
    pub signed_dist: f64,
    pub min_dist: f64,
}

/// A beam together with its enrichment, when one exists.
#[derive(Clone, Debug, PartialEq)]
pub struct EnrichedBeam {
    pub beam: Beam,
    pub enrichment: Option<PointEnrichment>,
}

/// Joins beams with their rank-1 associations and the referenced surfaces.
/// Unassociated beams pass through unchanged; an association pointing at a
/// surface missing from `index` is a hard error (corrupt input).
pub fn enrich_points(
    beams: &[Beam],
    associations: &[Association],
    index: &SurfaceIndex,
) -> Result<Vec<EnrichedBeam>, AssociationError> {
    let mut primary: BTreeMap<BeamId, &Association> = BTreeMap::new();
    for a in associations {
        if a.rank == 1 {
            primary.insert(a.beam_id, a);
        }
    }

    beams
        .iter()
        .map(|beam| {
            let enrichment = match primary.get(&beam.beam_id) {
                None => None,
                Some(a) => {
                    let surface = index
                        .get(&a.surface_id)
                        .ok_or_else(|| AssociationError::UnknownSurface(a.surface_id.clone()))?;
                    Some(PointEnrichment {
                        surface_id: a.surface_id.clone(),
                        object_id: a.object_id.clone(),
                        class_name: surface.class_name.clone(),
                        function: surface.function.clone(),
                        zenith: a.zenith,
                        azimuth: a.azimuth,
                        signed_dist: a.signed_dist,
                        min_dist: a.min_dist,
                    })
                }
            };
            Ok(EnrichedBeam { beam: beam.clone(), enrichment })
        })
        .collect()
}

/// Number of distinct `(campaign, sensor, object)` triples with at least one
/// enriched beam.
pub fn count_object_observations(records: &[EnrichedBeam]) -> usize {
    let mut seen = std::collections::BTreeSet::new();
    for r in records {
        if let Some(e) = &r.enrichment {
            seen.insert((
                r.beam.campaign_id.clone(),
                r.beam.sensor_id.clone(),
                e.object_id.clone(),
            ));
        }
    }
    seen.len()
}

#[cfg(test)]
mod test {
    use super::*;
    use crate::geom::Surface;

    fn wall(id: &str, object: &str, x: f64, side: f64) -> Surface {
        let h = side / 2.0;
        Surface::new(
            id,
            object,
            "WallSurface",
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

    fn beam(id: u64, range: f64) -> Beam {
        Beam {
            beam_id: BeamId(id),
            origin: Vec3::ZERO,
            direction: Vec3::new(1.0, 0.0, 0.0),
            range,
            intensity: 100.0,
            timestamp_ns: id as i64,
            sensor_id: SensorId::from("s1"),
            campaign_id: CampaignId::from("c1"),
        }
    }

    fn index_of(surfaces: Vec<Surface>) -> SurfaceIndex {
        SurfaceIndex::build(surfaces).unwrap()
    }

    #[test]
    fn single_wall_head_on() {
        let index = index_of(vec![wall("w", "o", 5.0, 4.0)]);
        let hits = associate_beam(&beam(1, 5.0), &index, &AssociationConfig::default());
        assert_eq!(hits.len(), 1);
        let a = &hits[0];
        assert_eq!(a.surface_id.as_str(), "w");
        assert!(a.signed_dist.abs() < 1e-12);
        assert!(a.zenith.abs() < 1e-12);
        assert!(a.min_dist < 1e-12);
        assert_eq!(a.rank, 1);
    }

    #[test]
    fn back_facing_wall_yields_nothing() {
        let mut v = wall("w", "o", 5.0, 4.0).vertices().to_vec();
        v.reverse();
        let index = index_of(vec![Surface::new("w", "o", "WallSurface", None, None, v).unwrap()]);
        let hits = associate_beam(&beam(1, 5.0), &index, &AssociationConfig::default());
        assert!(hits.is_empty());
    }

    #[test]
    fn two_walls_lowest_signed_distance_wins() {
        // Walls at 4.8 m and 5.2 m; measured range 5 m. Their signed
        // distances are +0.2 and -0.2, so ascending order confirms the
        // farther wall.
        let index = index_of(vec![wall("near", "o1", 4.8, 4.0), wall("far", "o2", 5.2, 4.0)]);
        let cfg = AssociationConfig::default();
        let hits = associate_beam(&beam(1, 5.0), &index, &cfg);
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].surface_id.as_str(), "far");
        assert!((hits[0].signed_dist + 0.2).abs() < 1e-12);
    }

    #[test]
    fn first_hit_ordering_flips_the_winner() {
        let index = index_of(vec![wall("near", "o1", 4.8, 4.0), wall("far", "o2", 5.2, 4.0)]);
        let cfg = AssociationConfig {
            ordering: CandidateOrdering::MaxSignedDistance,
            ..Default::default()
        };
        let hits = associate_beam(&beam(1, 5.0), &index, &cfg);
        assert_eq!(hits[0].surface_id.as_str(), "near");
    }

    #[test]
    fn equal_signed_distance_breaks_ties_lexicographically() {
        // Two coincident walls in the same plane: both intersections land on
        // (5, 0, 0) with signed distance zero, so the lexicographically
        // smaller surface id wins. Insertion order must not matter.
        let index = index_of(vec![wall("b-wall", "o1", 5.0, 4.0), wall("a-wall", "o2", 5.0, 4.0)]);
        let hits = associate_beam(&beam(1, 5.0), &index, &AssociationConfig::default());
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].surface_id.as_str(), "a-wall");
    }

    #[test]
    fn max_associations_cap_and_ranks() {
        let index = index_of(vec![
            wall("w1", "o1", 4.9, 4.0),
            wall("w2", "o2", 5.0, 4.0),
            wall("w3", "o3", 5.1, 4.0),
        ]);
        let cfg = AssociationConfig { max_associations_per_beam: 2, ..Default::default() };
        let hits = associate_beam(&beam(1, 5.0), &index, &cfg);
        assert_eq!(hits.len(), 2);
        assert_eq!(hits[0].rank, 1);
        assert_eq!(hits[1].rank, 2);
        // Ascending signed distance: w3 (-0.1) before w2 (0.0).
        assert_eq!(hits[0].surface_id.as_str(), "w3");
        assert_eq!(hits[1].surface_id.as_str(), "w2");
    }

    #[test]
    fn batch_counts_malformed_and_misses() {
        let index = index_of(vec![wall("w", "o", 5.0, 4.0)]);
        let beams = vec![
            beam(1, 5.0),  // hit
            beam(2, 50.0), // miss: segment is far past the wall
            beam(3, 0.0),  // malformed: zero range
        ];
        let (assocs, summary) = associate_batch(&beams, &index, &AssociationConfig::default());
        assert_eq!(assocs.len(), 1);
        assert_eq!(summary.total_beams, 3);
        assert_eq!(summary.associated_beams, 1);
        assert_eq!(summary.unassociated_beams, 1);
        assert_eq!(summary.malformed_beams, 1);
        assert_eq!(summary.per_class.get("WallSurface"), Some(&1));
    }

    #[test]
    fn empty_batch() {
        let index = index_of(vec![wall("w", "o", 5.0, 4.0)]);
        let (assocs, summary) = associate_batch(&[], &index, &AssociationConfig::default());
        assert!(assocs.is_empty());
        assert_eq!(summary, BatchSummary::default());
    }

    #[test]
    fn object_stats_quartiles() {
        let index = index_of(vec![wall("w", "o", 5.0, 4.0)]);
        let mut beams = Vec::new();
        for (i, intensity) in [10.0, 20.0, 30.0, 40.0].iter().enumerate() {
            let mut b = beam(i as u64, 5.0);
            b.intensity = *intensity;
            beams.push(b);
        }
        let (assocs, _) = associate_batch(&beams, &index, &AssociationConfig::default());
        let stats = enrich_objects(&assocs, &beams).unwrap();
        let o = stats.get(&ObjectId::from("o")).unwrap();
        assert_eq!(o.point_count, 4);
        assert_eq!(o.intensity.mean, 25.0);
        assert_eq!(o.intensity.median, 25.0);
        assert_eq!(o.intensity.q1, 17.5);
        assert_eq!(o.intensity.q3, 32.5);
    }

    #[test]
    fn single_beam_object_stats() {
        let index = index_of(vec![wall("w", "o", 5.0, 4.0)]);
        let beams = vec![beam(1, 5.0)];
        let (assocs, _) = associate_batch(&beams, &index, &AssociationConfig::default());
        let stats = enrich_objects(&assocs, &beams).unwrap();
        let o = stats.get(&ObjectId::from("o")).unwrap();
        assert_eq!(o.point_count, 1);
        assert_eq!(o.intensity.mean, 100.0);
        assert_eq!(o.intensity.median, 100.0);
        assert_eq!(o.intensity.q1, 100.0);
        assert_eq!(o.intensity.q3, 100.0);
        assert_eq!(o.intensity.std, 0.0);
    }

    #[test]
    fn object_stats_are_independent_per_object() {
        // Two separate walls, one shifted up in y; beams aimed at each.
        let w2v: Vec<Vec3> = wall("w2", "ob", 5.0, 1.0)
            .vertices()
            .iter()
            .map(|v| *v + Vec3::new(0.0, 3.0, 0.0))
            .collect();
        let index = index_of(vec![
            wall("w1", "oa", 5.0, 1.0),
            Surface::new("w2", "ob", "WallSurface", None, None, w2v).unwrap(),
        ]);
        let mut beams = Vec::new();
        for (i, intensity) in [10.0_f32, 20.0].iter().enumerate() {
            let mut b = beam(i as u64, 5.0);
            b.intensity = *intensity;
            beams.push(b);
        }
        for (i, intensity) in [200.0_f32, 220.0].iter().enumerate() {
            let mut b = beam(10 + i as u64, 5.0);
            b.origin = Vec3::new(0.0, 3.0, 0.0);
            b.intensity = *intensity;
            beams.push(b);
        }
        let (assocs, _) = associate_batch(&beams, &index, &AssociationConfig::default());
        let stats = enrich_objects(&assocs, &beams).unwrap();
        assert_eq!(stats.len(), 2);
        assert_eq!(stats.get(&ObjectId::from("oa")).unwrap().intensity.mean, 15.0);
        assert_eq!(stats.get(&ObjectId::from("ob")).unwrap().intensity.mean, 210.0);
    }

    #[test]
    fn enrich_points_passes_semantics_and_pass_through() {
        let s = Surface::new(
            "w",
            "o",
            "RoofSurface",
            Some("carport".into()),
            None,
            wall("w", "o", 5.0, 4.0).vertices().to_vec(),
        )
        .unwrap();
        let index = index_of(vec![s]);
        let beams = vec![beam(1, 5.0), beam(2, 50.0)];
        let (assocs, _) = associate_batch(&beams, &index, &AssociationConfig::default());
        let enriched = enrich_points(&beams, &assocs, &index).unwrap();
        assert_eq!(enriched.len(), 2);
        let e = enriched[0].enrichment.as_ref().unwrap();
        assert_eq!(e.class_name, "RoofSurface");
        assert_eq!(e.function.as_deref(), Some("carport"));
        assert!(enriched[1].enrichment.is_none());
        assert_eq!(enriched[1].beam, beams[1]);
    }

    #[test]
    fn enrich_points_rejects_dangling_surface() {
        let index = index_of(vec![wall("w", "o", 5.0, 4.0)]);
        let beams = vec![beam(1, 5.0)];
        let (mut assocs, _) = associate_batch(&beams, &index, &AssociationConfig::default());
        assocs[0].surface_id = SurfaceId::from("ghost");
        let err = enrich_points(&beams, &assocs, &index).unwrap_err();
        assert!(matches!(err, AssociationError::UnknownSurface(_)));
    }

    #[test]
    fn observation_counting_distinct_triples() {
        let index = index_of(vec![wall("w", "o", 5.0, 4.0)]);
        let mut beams = vec![beam(1, 5.0), beam(2, 5.0)];
        beams[1].sensor_id = SensorId::from("s2");
        let mut third = beam(3, 5.0);
        third.campaign_id = CampaignId::from("c2");
        beams.push(third);
        let (assocs, _) = associate_batch(&beams, &index, &AssociationConfig::default());
        let enriched = enrich_points(&beams, &assocs, &index).unwrap();
        // (c1, s1, o), (c1, s2, o), (c2, s1, o).
        assert_eq!(count_object_observations(&enriched), 3);
    }

    #[test]
    fn batch_output_is_sorted_by_beam_id() {
        let index = index_of(vec![wall("w", "o", 5.0, 4.0)]);
        let beams = vec![beam(9, 5.0), beam(1, 5.0), beam(4, 5.0)];
        let (assocs, _) = associate_batch(&beams, &index, &AssociationConfig::default());
        let ids: Vec<u64> = assocs.iter().map(|a| a.beam_id.0).collect();
        assert_eq!(ids, vec![1, 4, 9]);
    }
}
