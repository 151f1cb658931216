//! One module per subcommand plus the helpers they share: scene loading,
//! grid construction, store reads, and the small amount of path plumbing
//! every stage repeats.

pub mod associate;
pub mod distmatrix;
pub mod enrich;
pub mod fingerprint;
pub mod ingest;
pub mod register;
pub mod report;
pub mod simulate;

use std::collections::BTreeMap;
use std::path::Path;

use beamlink::association::{Association, Beam, EnrichedBeam};
use beamlink::fingerprint::BinGrid;
use beamlink::ids::SurfaceId;
use beamlink::sim::Scene;
use beamlink::store::{read_scene, BeamRecord, Store};

use crate::config::flat;
use crate::CliError;

pub fn load_scene(path: &Path) -> Result<Scene, CliError> {
    read_scene(path).map_err(CliError::from)
}

/// Function tags by surface id, for rejoining stored links with the scene.
pub fn function_map(scene: Option<&Scene>) -> BTreeMap<SurfaceId, String> {
    scene
        .map(|s| {
            s.surfaces()
                .iter()
                .filter_map(|s| s.function.clone().map(|f| (s.id.clone(), f)))
                .collect()
        })
        .unwrap_or_default()
}

/// Builds the fingerprint grid from metre range edges and degree zenith
/// edges; both come from flags or the config file.
pub fn build_grid(range_edges_m: Vec<f64>, zenith_edges_deg: Vec<f64>) -> Result<BinGrid, CliError> {
    BinGrid::from_degrees(range_edges_m, zenith_edges_deg)
        .map_err(|e| CliError::Config(flat(&e.to_string())))
}

/// Opens a store read-only and loads every record.
pub fn read_store(path: &Path) -> Result<(Store, Vec<BeamRecord>), CliError> {
    let store = Store::open_ro(path)?;
    let records = store.read_all_beams()?;
    Ok((store, records))
}

/// Re-derives the enriched in-memory form from stored records, attaching
/// function tags from the scene when one is given.
pub fn enriched_records(records: Vec<BeamRecord>, scene: Option<&Scene>) -> Vec<EnrichedBeam> {
    let functions = function_map(scene);
    records
        .into_iter()
        .map(|r| r.into_enriched(|surface| functions.get(surface).cloned()))
        .collect()
}

/// Rebuilds the confirmed associations a store persisted. The intersection
/// point is recovered exactly: it lies on the beam line at `signed_dist`
/// before the reflection point.
pub fn stored_associations(records: &[BeamRecord]) -> (Vec<Beam>, Vec<Association>) {
    let mut beams = Vec::with_capacity(records.len());
    let mut associations = Vec::new();
    for r in records {
        if let Some(a) = &r.assoc {
            associations.push(Association {
                beam_id: r.beam.beam_id,
                surface_id: a.surface_id.clone(),
                object_id: a.object_id.clone(),
                intersection: r.beam.reflection_point() - r.beam.direction * a.signed_dist,
                signed_dist: a.signed_dist,
                min_dist: a.min_dist,
                zenith: a.zenith,
                azimuth: a.azimuth,
                rank: 1,
            });
        }
        beams.push(r.beam.clone());
    }
    (beams, associations)
}

/// Loads a store and derives its fingerprints on `grid`. Also returns how
/// many stored beams carried a link, so callers can distinguish "nothing
/// associated yet" (missing stage) from "links exist but none fall into
/// the grid" (coverage).
pub fn build_fingerprints(
    store_path: &Path,
    scene_path: Option<&Path>,
    grid: &beamlink::fingerprint::BinGrid,
) -> Result<(BTreeMap<beamlink::fingerprint::FingerprintKey, beamlink::fingerprint::Fingerprint>, usize), CliError>
{
    let scene = scene_path.map(load_scene).transpose()?;
    let (_store, records) = read_store(store_path)?;
    let enriched = enriched_records(records, scene.as_ref());
    let linked = enriched.iter().filter(|r| r.enrichment.is_some()).count();
    let fingerprints = beamlink::fingerprint::extract_fingerprints(
        &enriched,
        grid,
        &beamlink::fingerprint::FingerprintFilter::default(),
    );
    Ok((fingerprints, linked))
}

/// Creates `dir` (and parents); an existing directory must be empty so
/// that runs never mix with stale output.
pub fn ensure_empty_dir(dir: &Path) -> Result<(), CliError> {
    if dir.exists() {
        if !dir.is_dir() {
            return Err(CliError::Data(format!("{} exists and is not a directory", dir.display())));
        }
        let mut entries = dir.read_dir().map_err(|e| CliError::Other(e.to_string()))?;
        if entries.next().is_some() {
            return Err(CliError::Data(format!("output directory {} is not empty", dir.display())));
        }
        return Ok(());
    }
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Other(format!("creating {}: {e}", dir.display())))
}

pub fn write_text(path: &Path, content: &str) -> Result<(), CliError> {
    std::fs::write(path, content)
        .map_err(|e| CliError::Other(format!("writing {}: {e}", path.display())))
}
