//! Radiometric fingerprints: intensity statistics over range/zenith bins.
//!
//! Enriched beams are grouped by `(campaign, sensor, object)` and dropped
//! into half-open bins `[edge_i, edge_{i+1})` of measured range and zenith
//! angle. Each covered cell carries the five intensity descriptors (mean,
//! standard deviation, median, quartiles). Two fingerprints are compared at
//! a fixed range bin through the root mean square difference of their
//! third-quartile profiles across the zenith bins, which requires every
//! zenith bin of that range bin to be covered on both sides.

use crate::association::EnrichedBeam;
use crate::ids::{CampaignId, ObjectId, SensorId};
use crate::stats::{describe, DescriptiveStats};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Cells with fewer beams than this count as uncovered unless overridden.
pub const DEFAULT_MIN_CELL_COUNT: usize = 5;

#[derive(Debug, Error)]
pub enum FingerprintError {
    #[error("invalid bin grid: {0}")]
    InvalidGrid(String),
    #[error("range bin {0} out of bounds")]
    RangeBinOutOfBounds(usize),
    #[error("incomplete zenith coverage: {}", render_coverage(.0))]
    IncompleteCoverage(Vec<(FingerprintKey, Vec<usize>)>),
    #[error("no comparable pairs: the groups share no two distinct objects")]
    EmptyPairSet,
    #[error("unknown fingerprint key {0:?}")]
    UnknownKey(FingerprintKey),
    #[error("unknown feature column {0:?}")]
    UnknownColumn(String),
}

fn render_coverage(missing: &[(FingerprintKey, Vec<usize>)]) -> String {
    missing
        .iter()
        .map(|(k, bins)| format!("{k} missing zenith bins {bins:?}"))
        .collect::<Vec<_>>()
        .join("; ")
}

/// Half-open binning of range and zenith angle.
///
/// `range_edges` are in metres, `zenith_edges` in radians; both strictly
/// ascending, ranges non-negative, zeniths within `[0, pi/2]`.
#[derive(Clone, Debug, PartialEq)]
pub struct BinGrid {
    range_edges: Vec<f64>,
    zenith_edges: Vec<f64>,
}

impl BinGrid {
    pub fn new(range_edges: Vec<f64>, zenith_edges: Vec<f64>) -> Result<Self, FingerprintError> {
        let ascending = |edges: &[f64]| edges.windows(2).all(|w| w[0] < w[1]);
        if range_edges.len() < 2 || !ascending(&range_edges) {
            return Err(FingerprintError::InvalidGrid(
                "range edges must be at least two strictly ascending values".into(),
            ));
        }
        if range_edges[0] < 0.0 {
            return Err(FingerprintError::InvalidGrid("range edges must be non-negative".into()));
        }
        if zenith_edges.len() < 2 || !ascending(&zenith_edges) {
            return Err(FingerprintError::InvalidGrid(
                "zenith edges must be at least two strictly ascending values".into(),
            ));
        }
        if zenith_edges[0] < 0.0 || *zenith_edges.last().unwrap() > std::f64::consts::FRAC_PI_2 + 1e-12
        {
            return Err(FingerprintError::InvalidGrid(
                "zenith edges must lie within [0, pi/2]".into(),
            ));
        }
        if range_edges.iter().chain(zenith_edges.iter()).any(|e| !e.is_finite()) {
            return Err(FingerprintError::InvalidGrid("edges must be finite".into()));
        }
        Ok(Self { range_edges, zenith_edges })
    }

    /// Builder taking zenith edges in degrees.
    pub fn from_degrees(
        range_edges: Vec<f64>,
        zenith_edges_deg: Vec<f64>,
    ) -> Result<Self, FingerprintError> {
        let zenith = zenith_edges_deg.iter().map(|d| d.to_radians()).collect();
        Self::new(range_edges, zenith)
    }

    pub fn range_bins(&self) -> usize {
        self.range_edges.len() - 1
    }

    pub fn zenith_bins(&self) -> usize {
        self.zenith_edges.len() - 1
    }

    pub fn range_edges(&self) -> &[f64] {
        &self.range_edges
    }

    pub fn zenith_edges(&self) -> &[f64] {
        &self.zenith_edges
    }

    /// Index of the half-open range bin containing `r`, `None` outside.
    pub fn range_bin(&self, r: f64) -> Option<usize> {
        Self::bin_of(&self.range_edges, r)
    }

    /// Index of the half-open zenith bin containing `z`, `None` outside.
    pub fn zenith_bin(&self, z: f64) -> Option<usize> {
        Self::bin_of(&self.zenith_edges, z)
    }

    fn bin_of(edges: &[f64], value: f64) -> Option<usize> {
        if !value.is_finite() || value < edges[0] || value >= *edges.last().unwrap() {
            return None;
        }
        // partition_point returns the count of edges <= value; the bin is
        // one less.
        Some(edges.partition_point(|e| *e <= value) - 1)
    }
}

impl Default for BinGrid {
    /// One 15 m range bin and the four zenith bins
    /// `[0, 20), [20, 40), [40, 60), [60, 90)` degrees.
    fn default() -> Self {
        Self::from_degrees(vec![0.0, 15.0], vec![0.0, 20.0, 40.0, 60.0, 90.0])
            .expect("default grid is valid")
    }
}

/// Grouping key of one fingerprint.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FingerprintKey {
    pub campaign_id: CampaignId,
    pub sensor_id: SensorId,
    pub object_id: ObjectId,
}

impl std::fmt::Display for FingerprintKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}/{}", self.campaign_id, self.sensor_id, self.object_id)
    }
}

/// Intensity descriptors of one grid cell.
pub type CellStats = DescriptiveStats;

/// One observation's binned intensity statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct Fingerprint {
    pub key: FingerprintKey,
    /// Class of the observed object's surfaces.
    pub class_name: String,
    /// Function tag of the observed object, when present.
    pub function: Option<String>,
    pub grid: BinGrid,
    /// `cells[range_bin][zenith_bin]`, `None` when no beam fell in.
    pub cells: Vec<Vec<Option<CellStats>>>,
}

impl Fingerprint {
    pub fn cell(&self, range_bin: usize, zenith_bin: usize) -> Option<&CellStats> {
        self.cells.get(range_bin)?.get(zenith_bin)?.as_ref()
    }

    /// Zenith bins of `range_bin` that hold fewer than `min_cell_count`
    /// beams; empty means full coverage.
    pub fn missing_zenith_bins(&self, range_bin: usize, min_cell_count: usize) -> Vec<usize> {
        (0..self.grid.zenith_bins())
            .filter(|&j| {
                self.cell(range_bin, j).is_none_or(|c| c.count < min_cell_count)
            })
            .collect()
    }
}

/// Restricts which enriched beams contribute to extraction. Empty selectors
/// pass everything.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FingerprintFilter {
    pub campaigns: Option<BTreeSet<CampaignId>>,
    pub sensors: Option<BTreeSet<SensorId>>,
    pub objects: Option<BTreeSet<ObjectId>>,
    pub classes: Option<BTreeSet<String>>,
    pub functions: Option<BTreeSet<String>>,
    /// Additional half-open window on measured range.
    pub range_window: Option<(f64, f64)>,
    /// Additional half-open window on zenith angle, radians.
    pub zenith_window: Option<(f64, f64)>,
}

impl FingerprintFilter {
    /// True when an enriched beam passes every active selector.
    pub fn accepts(&self, record: &EnrichedBeam) -> bool {
        let Some(e) = &record.enrichment else { return false };
        if let Some(c) = &self.campaigns {
            if !c.contains(&record.beam.campaign_id) {
                return false;
            }
        }
        if let Some(s) = &self.sensors {
            if !s.contains(&record.beam.sensor_id) {
                return false;
            }
        }
        if let Some(o) = &self.objects {
            if !o.contains(&e.object_id) {
                return false;
            }
        }
        if let Some(cl) = &self.classes {
            if !cl.contains(&e.class_name) {
                return false;
            }
        }
        if let Some(f) = &self.functions {
            match &e.function {
                Some(tag) if f.contains(tag) => {}
                _ => return false,
            }
        }
        if let Some((lo, hi)) = self.range_window {
            if record.beam.range < lo || record.beam.range >= hi {
                return false;
            }
        }
        if let Some((lo, hi)) = self.zenith_window {
            if e.zenith < lo || e.zenith >= hi {
                return false;
            }
        }
        true
    }
}

/// Groups enriched beams into fingerprints. Beams without enrichment, beams
/// rejected by the filter and beams outside the grid extents are dropped;
/// every other beam lands in exactly one cell of exactly one fingerprint.
pub fn extract_fingerprints(
    records: &[EnrichedBeam],
    grid: &BinGrid,
    filter: &FingerprintFilter,
) -> BTreeMap<FingerprintKey, Fingerprint> {
    struct Accum {
        class_name: String,
        function: Option<String>,
        values: Vec<Vec<Vec<f64>>>,
    }

    let mut groups: BTreeMap<FingerprintKey, Accum> = BTreeMap::new();
    for record in records {
        if !filter.accepts(record) {
            continue;
        }
        let e = record.enrichment.as_ref().expect("filter requires enrichment");
        let (Some(i), Some(j)) = (grid.range_bin(record.beam.range), grid.zenith_bin(e.zenith))
        else {
            continue;
        };
        let key = FingerprintKey {
            campaign_id: record.beam.campaign_id.clone(),
            sensor_id: record.beam.sensor_id.clone(),
            object_id: e.object_id.clone(),
        };
        let accum = groups.entry(key).or_insert_with(|| Accum {
            class_name: e.class_name.clone(),
            function: e.function.clone(),
            values: vec![vec![Vec::new(); grid.zenith_bins()]; grid.range_bins()],
        });
        accum.values[i][j].push(record.beam.intensity as f64);
    }

    groups
        .into_iter()
        .map(|(key, accum)| {
            let cells = accum
                .values
                .into_iter()
                .map(|row| row.into_iter().map(|vals| describe(&vals)).collect())
                .collect();
            let fp = Fingerprint {
                key: key.clone(),
                class_name: accum.class_name,
                function: accum.function,
                grid: grid.clone(),
                cells,
            };
            (key, fp)
        })
        .collect()
}

fn q3_profile(
    fp: &Fingerprint,
    range_bin: usize,
    min_cell_count: usize,
) -> Result<Vec<f64>, (FingerprintKey, Vec<usize>)> {
    let missing = fp.missing_zenith_bins(range_bin, min_cell_count);
    if !missing.is_empty() {
        return Err((fp.key.clone(), missing));
    }
    Ok((0..fp.grid.zenith_bins())
        .map(|j| fp.cell(range_bin, j).expect("coverage checked").q3)
        .collect())
}

/// Root mean square difference of the third-quartile profiles of two
/// fingerprints at one range bin. Both fingerprints must cover every zenith
/// bin of that range bin with at least `min_cell_count` beams.
pub fn dist_q3(
    a: &Fingerprint,
    b: &Fingerprint,
    range_bin: usize,
    min_cell_count: usize,
) -> Result<f64, FingerprintError> {
    if range_bin >= a.grid.range_bins() || range_bin >= b.grid.range_bins() {
        return Err(FingerprintError::RangeBinOutOfBounds(range_bin));
    }
    if a.grid.zenith_bins() != b.grid.zenith_bins() {
        return Err(FingerprintError::InvalidGrid(
            "fingerprints use different zenith binnings".into(),
        ));
    }
    let mut missing = Vec::new();
    let qa = q3_profile(a, range_bin, min_cell_count).map_err(|m| missing.push(m)).ok();
    let qb = q3_profile(b, range_bin, min_cell_count).map_err(|m| missing.push(m)).ok();
    let (Some(qa), Some(qb)) = (qa, qb) else {
        return Err(FingerprintError::IncompleteCoverage(missing));
    };
    let j = qa.len() as f64;
    let sum: f64 = qa.iter().zip(&qb).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok((sum / j).sqrt())
}

/// Mean [`dist_q3`] over all cross pairs of two key sets whose objects
/// differ. Pairs between observations of the same object are excluded; an
/// empty pair set is an error rather than a silent zero.
pub fn mean_group_distance(
    a: &BTreeSet<FingerprintKey>,
    b: &BTreeSet<FingerprintKey>,
    fingerprints: &BTreeMap<FingerprintKey, Fingerprint>,
    range_bin: usize,
    min_cell_count: usize,
) -> Result<f64, FingerprintError> {
    let mut sum = 0.0;
    let mut n = 0_u64;
    for ka in a {
        let fa = fingerprints.get(ka).ok_or_else(|| FingerprintError::UnknownKey(ka.clone()))?;
        for kb in b {
            if ka.object_id == kb.object_id {
                continue;
            }
            let fb =
                fingerprints.get(kb).ok_or_else(|| FingerprintError::UnknownKey(kb.clone()))?;
            sum += dist_q3(fa, fb, range_bin, min_cell_count)?;
            n += 1;
        }
    }
    if n == 0 {
        return Err(FingerprintError::EmptyPairSet);
    }
    Ok(sum / n as f64)
}

/// Symmetric matrix with row/column labels; `None` marks entries that could
/// not be computed (no comparable covered pairs).
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledMatrix {
    pub labels: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
}

impl LabeledMatrix {
    /// Aligned plain-text rendering; absent entries print as `-`.
    pub fn to_aligned_text(&self) -> String {
        let cell = |v: &Option<f64>| match v {
            Some(x) => format!("{x:.3}"),
            None => "-".to_owned(),
        };
        let mut width = self.labels.iter().map(|l| l.len()).max().unwrap_or(0);
        for row in &self.values {
            for v in row {
                width = width.max(cell(v).len());
            }
        }
        let width = width + 2;
        let mut out = String::new();
        out.push_str(&" ".repeat(width));
        for l in &self.labels {
            out.push_str(&format!("{l:>width$}"));
        }
        out.push('\n');
        for (l, row) in self.labels.iter().zip(&self.values) {
            out.push_str(&format!("{l:>width$}"));
            for v in row {
                out.push_str(&format!("{:>width$}", cell(v)));
            }
            out.push('\n');
        }
        out
    }

    /// Comma-separated rendering with a leading label column; absent entries
    /// are empty fields.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str("label");
        for l in &self.labels {
            out.push(',');
            out.push_str(l);
        }
        out.push('\n');
        for (l, row) in self.labels.iter().zip(&self.values) {
            out.push_str(l);
            for v in row {
                out.push(',');
                if let Some(x) = v {
                    out.push_str(&x.to_string());
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Which metadata field groups fingerprints in a distance matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GroupBy {
    Class,
    /// Skips fingerprints without a function tag.
    Function,
}

/// Mean pairwise distances within and between groups of covered
/// fingerprints. Fingerprints without coverage at `range_bin` are left out;
/// cells whose groups share no two distinct covered objects are `None`.
pub fn group_distance_matrix(
    group_by: GroupBy,
    fingerprints: &BTreeMap<FingerprintKey, Fingerprint>,
    range_bin: usize,
    min_cell_count: usize,
) -> LabeledMatrix {
    let mut groups: BTreeMap<String, BTreeSet<FingerprintKey>> = BTreeMap::new();
    for (key, fp) in fingerprints {
        if range_bin >= fp.grid.range_bins()
            || !fp.missing_zenith_bins(range_bin, min_cell_count).is_empty()
        {
            continue;
        }
        let label = match group_by {
            GroupBy::Class => Some(fp.class_name.clone()),
            GroupBy::Function => fp.function.clone(),
        };
        if let Some(label) = label {
            groups.entry(label).or_default().insert(key.clone());
        }
    }

    let labels: Vec<String> = groups.keys().cloned().collect();
    let sets: Vec<&BTreeSet<FingerprintKey>> = groups.values().collect();
    let n = labels.len();
    let mut values = vec![vec![None; n]; n];
    for i in 0..n {
        for j in i..n {
            let d = mean_group_distance(sets[i], sets[j], fingerprints, range_bin, min_cell_count)
                .ok();
            values[i][j] = d;
            values[j][i] = d;
        }
    }
    LabeledMatrix { labels, values }
}

/// Pairwise [`dist_q3`] between all covered fingerprints, labelled by key.
pub fn pairwise_distance_matrix(
    fingerprints: &BTreeMap<FingerprintKey, Fingerprint>,
    range_bin: usize,
    min_cell_count: usize,
) -> LabeledMatrix {
    let covered: Vec<(&FingerprintKey, &Fingerprint)> = fingerprints
        .iter()
        .filter(|(_, fp)| {
            range_bin < fp.grid.range_bins()
                && fp.missing_zenith_bins(range_bin, min_cell_count).is_empty()
        })
        .collect();
    let labels = covered.iter().map(|(k, _)| k.to_string()).collect();
    let n = covered.len();
    let mut values = vec![vec![None; n]; n];
    for i in 0..n {
        for j in i..n {
            let d = dist_q3(covered[i].1, covered[j].1, range_bin, min_cell_count).ok();
            values[i][j] = d;
            values[j][i] = d;
        }
    }
    LabeledMatrix { labels, values }
}

/// Tabular export of per-beam features for external embedding tools.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl FeatureMatrix {
    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Exports one row per enriched beam, ordered by beam id. Supported columns:
/// `intensity`, `range`, `zenith`, `azimuth`, `campaign`, and `sensor`,
/// which expands to one 0/1 column per sensor id present in the input.
pub fn export_feature_matrix(
    records: &[EnrichedBeam],
    columns: &[String],
) -> Result<FeatureMatrix, FingerprintError> {
    const KNOWN: [&str; 6] = ["intensity", "range", "zenith", "azimuth", "campaign", "sensor"];
    for c in columns {
        if !KNOWN.contains(&c.as_str()) {
            return Err(FingerprintError::UnknownColumn(c.clone()));
        }
    }

    let mut enriched: Vec<&EnrichedBeam> =
        records.iter().filter(|r| r.enrichment.is_some()).collect();
    enriched.sort_by_key(|r| r.beam.beam_id);

    let sensors: Vec<SensorId> = {
        let set: BTreeSet<SensorId> =
            enriched.iter().map(|r| r.beam.sensor_id.clone()).collect();
        set.into_iter().collect()
    };

    let mut header = Vec::new();
    header.push("beam_id".to_owned());
    for c in columns {
        if c == "sensor" {
            for s in &sensors {
                header.push(format!("sensor={s}"));
            }
        } else {
            header.push(c.clone());
        }
    }

    let rows = enriched
        .iter()
        .map(|r| {
            let e = r.enrichment.as_ref().expect("filtered");
            let mut row = vec![r.beam.beam_id.to_string()];
            for c in columns {
                match c.as_str() {
                    "intensity" => row.push(r.beam.intensity.to_string()),
                    "range" => row.push(r.beam.range.to_string()),
                    "zenith" => row.push(e.zenith.to_string()),
                    "azimuth" => row.push(e.azimuth.to_string()),
                    "campaign" => row.push(r.beam.campaign_id.to_string()),
                    "sensor" => {
                        for s in &sensors {
                            row.push(if *s == r.beam.sensor_id { "1" } else { "0" }.to_owned());
                        }
                    }
                    _ => unreachable!("validated above"),
                }
            }
            row
        })
        .collect();

    Ok(FeatureMatrix { header, rows })
}

#[cfg(test)]
mod test {
    use super::*;
    use crate::association::{Beam, PointEnrichment};
    use crate::geom::Vec3;
    use crate::ids::{BeamId, SurfaceId};

    fn record(
        id: u64,
        campaign: &str,
        sensor: &str,
        object: &str,
        range: f64,
        zenith_deg: f64,
        intensity: f32,
    ) -> EnrichedBeam {
        EnrichedBeam {
            beam: Beam {
                beam_id: BeamId(id),
                origin: Vec3::ZERO,
                direction: Vec3::new(1.0, 0.0, 0.0),
                range,
                intensity,
                timestamp_ns: id as i64,
                sensor_id: SensorId::from(sensor),
                campaign_id: CampaignId::from(campaign),
            },
            enrichment: Some(PointEnrichment {
                surface_id: SurfaceId::from("s"),
                object_id: ObjectId::from(object),
                class_name: "WallSurface".to_owned(),
                function: None,
                zenith: zenith_deg.to_radians(),
                azimuth: 0.0,
                signed_dist: 0.0,
                min_dist: 0.0,
            }),
        }
    }

    /// Builds a fully covered single-range-bin fingerprint with the given
    /// per-zenith-bin Q3 profile (each cell holds `count` constant values).
    fn fingerprint_with_q3(object: &str, q3: &[f64], count: usize) -> Fingerprint {
        let grid = BinGrid::default();
        let key = FingerprintKey {
            campaign_id: CampaignId::from("c"),
            sensor_id: SensorId::from("s"),
            object_id: ObjectId::from(object),
        };
        let cells = vec![q3
            .iter()
            .map(|&v| describe(&vec![v; count]))
            .collect::<Vec<_>>()];
        Fingerprint {
            key,
            class_name: "WallSurface".to_owned(),
            function: None,
            grid,
            cells,
        }
    }

    #[test]
    fn single_beam_lands_in_its_cell() {
        let records = vec![record(1, "c", "s", "o", 5.0, 10.0, 120.0)];
        let fps = extract_fingerprints(&records, &BinGrid::default(), &Default::default());
        assert_eq!(fps.len(), 1);
        let fp = fps.values().next().unwrap();
        let cell = fp.cell(0, 0).unwrap();
        assert_eq!(cell.count, 1);
        assert_eq!(cell.mean, 120.0);
        assert_eq!(cell.q3, 120.0);
        assert!(fp.cell(0, 1).is_none());
    }

    #[test]
    fn boundary_zenith_goes_to_upper_bin() {
        let records = vec![record(1, "c", "s", "o", 5.0, 20.0, 50.0)];
        let fps = extract_fingerprints(&records, &BinGrid::default(), &Default::default());
        let fp = fps.values().next().unwrap();
        assert!(fp.cell(0, 0).is_none());
        assert!(fp.cell(0, 1).is_some());
    }

    #[test]
    fn out_of_grid_beams_are_dropped() {
        let records = vec![
            record(1, "c", "s", "o", 15.0, 10.0, 50.0), // range == upper edge
            record(2, "c", "s", "o", 5.0, 89.99, 50.0), // inside last zenith bin
            record(3, "c", "s", "o", 5.0, 90.0, 50.0),  // zenith == upper edge: dropped
        ];
        let fps = extract_fingerprints(&records, &BinGrid::default(), &Default::default());
        let fp = fps.values().next().unwrap();
        let total: usize = fp
            .cells
            .iter()
            .flatten()
            .filter_map(|c| c.as_ref().map(|c| c.count))
            .sum();
        assert_eq!(total, 1);
        assert_eq!(fp.cell(0, 3).unwrap().count, 1);
    }

    #[test]
    fn keys_partition_by_campaign_sensor_object() {
        let records = vec![
            record(1, "c1", "s1", "o1", 5.0, 10.0, 10.0),
            record(2, "c1", "s2", "o1", 5.0, 10.0, 20.0),
            record(3, "c2", "s1", "o2", 5.0, 10.0, 30.0),
        ];
        let fps = extract_fingerprints(&records, &BinGrid::default(), &Default::default());
        assert_eq!(fps.len(), 3);
    }

    #[test]
    fn worked_distance_example() {
        let a = fingerprint_with_q3("a", &[1.0, 2.0, 3.0, 4.0], 5);
        let b = fingerprint_with_q3("b", &[4.0, 3.0, 2.0, 1.0], 5);
        let d = dist_q3(&a, &b, 0, DEFAULT_MIN_CELL_COUNT).unwrap();
        assert!((d - 5.0_f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn identical_profiles_have_zero_distance() {
        let a = fingerprint_with_q3("a", &[10.0, 20.0, 30.0, 40.0], 5);
        let b = fingerprint_with_q3("b", &[10.0, 20.0, 30.0, 40.0], 5);
        assert_eq!(dist_q3(&a, &b, 0, DEFAULT_MIN_CELL_COUNT).unwrap(), 0.0);
    }

    #[test]
    fn constant_offset_distance() {
        let a = fingerprint_with_q3("a", &[10.0, 20.0, 30.0, 40.0], 5);
        let b = fingerprint_with_q3("b", &[15.0, 25.0, 35.0, 45.0], 5);
        let d = dist_q3(&a, &b, 0, DEFAULT_MIN_CELL_COUNT).unwrap();
        assert!((d - 5.0).abs() < 1e-12);
    }

    #[test]
    fn thin_cells_break_coverage() {
        let a = fingerprint_with_q3("a", &[1.0, 2.0, 3.0, 4.0], 4); // below default 5
        let b = fingerprint_with_q3("b", &[1.0, 2.0, 3.0, 4.0], 5);
        let err = dist_q3(&a, &b, 0, DEFAULT_MIN_CELL_COUNT).unwrap_err();
        match err {
            FingerprintError::IncompleteCoverage(missing) => {
                assert_eq!(missing.len(), 1);
                assert_eq!(missing[0].1, vec![0, 1, 2, 3]);
            }
            other => panic!("unexpected error {other:?}"),
        }
        // The same cells clear a lowered threshold.
        assert!(dist_q3(&a, &b, 0, 4).is_ok());
    }

    #[test]
    fn mean_group_distance_symmetric_pair() {
        let a = fingerprint_with_q3("x", &[1.0, 2.0, 3.0, 4.0], 5);
        let b = fingerprint_with_q3("y", &[4.0, 3.0, 2.0, 1.0], 5);
        let mut fps = BTreeMap::new();
        let keys: BTreeSet<FingerprintKey> =
            [a.key.clone(), b.key.clone()].into_iter().collect();
        fps.insert(a.key.clone(), a);
        fps.insert(b.key.clone(), b);
        // A = B = {x, y}: the only admitted pairs are (x, y) and (y, x).
        let d = mean_group_distance(&keys, &keys, &fps, 0, DEFAULT_MIN_CELL_COUNT).unwrap();
        assert!((d - 5.0_f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn single_object_group_has_no_pairs() {
        let a = fingerprint_with_q3("x", &[1.0, 2.0, 3.0, 4.0], 5);
        let keys: BTreeSet<FingerprintKey> = [a.key.clone()].into_iter().collect();
        let mut fps = BTreeMap::new();
        fps.insert(a.key.clone(), a);
        let err = mean_group_distance(&keys, &keys, &fps, 0, DEFAULT_MIN_CELL_COUNT).unwrap_err();
        assert!(matches!(err, FingerprintError::EmptyPairSet));
    }

    #[test]
    fn single_group_matrix_with_two_objects() {
        let a = fingerprint_with_q3("x", &[1.0, 2.0, 3.0, 4.0], 5);
        let b = fingerprint_with_q3("y", &[1.0, 2.0, 3.0, 4.0], 5);
        let mut fps = BTreeMap::new();
        fps.insert(a.key.clone(), a);
        fps.insert(b.key.clone(), b);
        let m = group_distance_matrix(GroupBy::Class, &fps, 0, DEFAULT_MIN_CELL_COUNT);
        assert_eq!(m.labels, vec!["WallSurface".to_owned()]);
        assert_eq!(m.values[0][0], Some(0.0));
    }

    #[test]
    fn uncovered_fingerprints_leave_absent_cells() {
        let a = fingerprint_with_q3("x", &[1.0, 2.0, 3.0, 4.0], 5);
        let thin = fingerprint_with_q3("y", &[1.0, 2.0, 3.0, 4.0], 2);
        let mut fps = BTreeMap::new();
        fps.insert(a.key.clone(), a);
        fps.insert(thin.key.clone(), thin);
        let m = group_distance_matrix(GroupBy::Class, &fps, 0, DEFAULT_MIN_CELL_COUNT);
        // Only x survives coverage; a single object yields no intra pairs.
        assert_eq!(m.values[0][0], None);
    }

    #[test]
    fn matrix_symmetry_and_nonnegativity() {
        let mut fps = BTreeMap::new();
        for (i, q) in [[5.0, 6.0, 7.0, 8.0], [1.0, 1.5, 2.0, 2.5], [9.0, 9.0, 9.0, 9.0]]
            .iter()
            .enumerate()
        {
            let mut fp = fingerprint_with_q3(&format!("o{i}"), q, 5);
            fp.class_name = format!("Class{i}");
            fps.insert(fp.key.clone(), fp);
        }
        let m = group_distance_matrix(GroupBy::Class, &fps, 0, DEFAULT_MIN_CELL_COUNT);
        assert_eq!(m.labels.len(), 3);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(m.values[i][j], m.values[j][i]);
                if i != j {
                    assert!(m.values[i][j].unwrap() >= 0.0);
                }
            }
        }
    }

    #[test]
    fn feature_export_empty_input() {
        let m = export_feature_matrix(&[], &["intensity".to_owned()]).unwrap();
        assert_eq!(m.header, vec!["beam_id".to_owned(), "intensity".to_owned()]);
        assert!(m.rows.is_empty());
    }

    #[test]
    fn feature_export_row_content_and_one_hot() {
        let records = vec![
            record(2, "c", "s2", "o", 5.0, 10.0, 100.0),
            record(1, "c", "s1", "o", 4.0, 20.0, 50.0),
        ];
        let cols: Vec<String> =
            ["intensity", "range", "sensor"].iter().map(|s| s.to_string()).collect();
        let m = export_feature_matrix(&records, &cols).unwrap();
        assert_eq!(
            m.header,
            ["beam_id", "intensity", "range", "sensor=s1", "sensor=s2"]
                .iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>()
        );
        // Ordered by beam id; one-hot sums to exactly one per row.
        assert_eq!(m.rows[0][0], "1");
        assert_eq!(m.rows[0][3], "1");
        assert_eq!(m.rows[0][4], "0");
        assert_eq!(m.rows[1][3], "0");
        assert_eq!(m.rows[1][4], "1");
    }

    #[test]
    fn feature_export_unknown_column() {
        let err = export_feature_matrix(&[], &["color".to_owned()]).unwrap_err();
        assert!(matches!(err, FingerprintError::UnknownColumn(_)));
    }

    #[test]
    fn grid_validation() {
        assert!(BinGrid::new(vec![0.0], vec![0.0, 1.0]).is_err());
        assert!(BinGrid::new(vec![0.0, 15.0, 10.0], vec![0.0, 1.0]).is_err());
        assert!(BinGrid::new(vec![-1.0, 15.0], vec![0.0, 1.0]).is_err());
        assert!(BinGrid::new(vec![0.0, 15.0], vec![0.0, 2.0]).is_err()); // > pi/2
        assert!(BinGrid::from_degrees(vec![0.0, 15.0], vec![0.0, 20.0, 40.0, 60.0, 90.0]).is_ok());
    }

    #[test]
    fn filter_windows_restrict_extraction() {
        let records = vec![
            record(1, "c", "s", "o", 5.0, 10.0, 10.0),
            record(2, "c", "s", "o", 12.0, 10.0, 20.0),
        ];
        let filter = FingerprintFilter {
            range_window: Some((0.0, 10.0)),
            ..Default::default()
        };
        let fps = extract_fingerprints(&records, &BinGrid::default(), &filter);
        let fp = fps.values().next().unwrap();
        assert_eq!(fp.cell(0, 0).unwrap().count, 1);
        assert_eq!(fp.cell(0, 0).unwrap().mean, 10.0);
    }
}
