//! `associate`: links every stored beam to the surfaces of a scene and
//! persists the confirmed links back into the store.

use beamlink::association::{associate_batch, AssociationConfig, CandidateOrdering};
use beamlink::geom::GeomParams;
use beamlink::index::SurfaceIndex;
use beamlink::store::Store;
use serde::Serialize;

use crate::commands::load_scene;
use crate::config::{echo_effective, flat, pick, ConfigFile};
use crate::{AssociateArgs, CliError};

#[derive(Serialize)]
struct Effective {
    store: String,
    scene: String,
    segment_length: f64,
    assoc_radius: f64,
    max_associations: usize,
    ordering: String,
}

pub fn run(args: AssociateArgs, file: &ConfigFile) -> Result<(), CliError> {
    let section = &file.associate;
    let defaults = GeomParams::default();
    let effective = Effective {
        store: args.store.display().to_string(),
        scene: args.scene.display().to_string(),
        segment_length: pick(args.segment_length, section.segment_length, defaults.segment_length),
        assoc_radius: pick(args.assoc_radius, section.assoc_radius, defaults.assoc_radius),
        max_associations: pick(args.max_associations, section.max_associations, 1),
        ordering: pick(args.ordering.clone(), section.ordering.clone(), "min-signed".to_owned()),
    };
    echo_effective("associate", &effective)?;

    let ordering = match effective.ordering.as_str() {
        "min-signed" => CandidateOrdering::MinSignedDistance,
        "max-signed" => CandidateOrdering::MaxSignedDistance,
        other => {
            return Err(CliError::Config(format!(
                "unknown ordering {other:?}; use min-signed or max-signed"
            )))
        }
    };
    if !(effective.segment_length.is_finite() && effective.segment_length > 0.0)
        || !(effective.assoc_radius.is_finite() && effective.assoc_radius > 0.0)
    {
        return Err(CliError::Config(
            "segment length and association radius must be positive".to_owned(),
        ));
    }
    if effective.max_associations == 0 {
        return Err(CliError::Config("max associations must be at least 1".to_owned()));
    }
    let config = AssociationConfig {
        geom: GeomParams {
            epsilon: defaults.epsilon,
            assoc_radius: effective.assoc_radius,
            segment_length: effective.segment_length,
        },
        max_associations_per_beam: effective.max_associations,
        ordering,
    };

    let scene = load_scene(&args.scene)?;
    let index = SurfaceIndex::build(scene.surfaces().to_vec())
        .map_err(|e| CliError::Data(flat(&e.to_string())))?;

    let mut store = Store::open_rw(&args.store)?;
    let beams: Vec<_> =
        store.read_all_beams()?.into_iter().map(|r| r.beam).collect();
    if beams.is_empty() {
        return Err(CliError::MissingInput(format!(
            "store {} holds no beams; run ingest first",
            args.store.display()
        )));
    }

    let (associations, summary) = associate_batch(&beams, &index, &config);
    let written = store.update_associations(&associations, &index)?;

    println!(
        "beams {} associated {} unassociated {} malformed {}",
        summary.total_beams,
        summary.associated_beams,
        summary.unassociated_beams,
        summary.malformed_beams
    );
    for (class, count) in &summary.per_class {
        println!("class {class} {count}");
    }
    println!("persisted {written} links");
    Ok(())
}
