//! `enrich`: exports the store as a delimited beam table with the link
//! columns filled in, plus a per-object statistics table.

use beamlink::association::enrich_objects;
use beamlink::store::write_beam_csv;
use serde::Serialize;

use crate::commands::{ensure_empty_dir, read_store, stored_associations, write_text};
use crate::config::{echo_effective, flat, ConfigFile};
use crate::{CliError, EnrichArgs};

#[derive(Serialize)]
struct Effective {
    store: String,
    out: String,
}

pub fn run(args: EnrichArgs, _file: &ConfigFile) -> Result<(), CliError> {
    let effective = Effective {
        store: args.store.display().to_string(),
        out: args.out.display().to_string(),
    };
    echo_effective("enrich", &effective)?;

    let (_store, records) = read_store(&args.store)?;
    let (beams, associations) = stored_associations(&records);
    if associations.is_empty() {
        return Err(CliError::MissingInput(format!(
            "store {} holds no links; run associate first",
            args.store.display()
        )));
    }

    ensure_empty_dir(&args.out)?;
    write_beam_csv(&args.out.join("enriched.csv"), &records)?;

    let objects = enrich_objects(&associations, &beams)
        .map_err(|e| CliError::Data(flat(&e.to_string())))?;
    let mut table = String::from(
        "object_id,point_count,intensity_mean,intensity_std,intensity_median,\
         intensity_q1,intensity_q3,signed_dist_mean,signed_dist_median,\
         min_dist_mean,min_dist_median\n",
    );
    for (id, s) in &objects {
        table.push_str(&format!(
            "{id},{},{},{},{},{},{},{},{},{},{}\n",
            s.point_count,
            s.intensity.mean,
            s.intensity.std,
            s.intensity.median,
            s.intensity.q1,
            s.intensity.q3,
            s.signed_dist_mean,
            s.signed_dist_median,
            s.min_dist_mean,
            s.min_dist_median
        ));
    }
    write_text(&args.out.join("objects.csv"), &table)?;

    println!(
        "wrote {} records ({} linked) and {} object summaries to {}",
        records.len(),
        associations.len(),
        objects.len(),
        args.out.display()
    );
    Ok(())
}
