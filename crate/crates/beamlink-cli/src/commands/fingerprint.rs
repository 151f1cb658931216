//! `fingerprint`: aggregates the store's linked intensities into per-object
//! (range bin × zenith bin) cells and writes them as one delimited table.

use serde::Serialize;

use crate::commands::{build_fingerprints, build_grid, write_text};
use crate::config::{echo_effective, pick, ConfigFile};
use crate::{CliError, FingerprintArgs};

#[derive(Serialize)]
struct Effective {
    store: String,
    out: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    scene: Option<String>,
    range_edges_m: Vec<f64>,
    zenith_edges_deg: Vec<f64>,
    min_cell_count: usize,
}

pub fn run(args: FingerprintArgs, file: &ConfigFile) -> Result<(), CliError> {
    let section = &file.fingerprint;
    let effective = Effective {
        store: args.store.display().to_string(),
        out: args.out.display().to_string(),
        scene: args.scene.as_ref().map(|p| p.display().to_string()),
        range_edges_m: pick(
            args.range_edges,
            section.range_edges_m.clone(),
            vec![0.0, 15.0],
        ),
        zenith_edges_deg: pick(
            args.zenith_bins,
            section.zenith_edges_deg.clone(),
            vec![0.0, 20.0, 40.0, 60.0, 90.0],
        ),
        min_cell_count: pick(args.min_cell_count, section.min_cell_count, 5),
    };
    echo_effective("fingerprint", &effective)?;

    let grid = build_grid(effective.range_edges_m.clone(), effective.zenith_edges_deg.clone())?;
    let (fingerprints, linked) =
        build_fingerprints(&args.store, args.scene.as_deref(), &grid)?;
    if linked == 0 {
        return Err(CliError::MissingInput(format!(
            "store {} holds no links; run associate first",
            args.store.display()
        )));
    }
    if fingerprints.is_empty() {
        return Err(CliError::Coverage(
            "no linked beam falls inside the fingerprint grid".to_owned(),
        ));
    }

    let mut out = String::from(
        "campaign,sensor,object,class,function,range_bin,zenith_bin,\
         range_lo_m,range_hi_m,zenith_lo_deg,zenith_hi_deg,\
         count,covered,mean,std,median,q1,q3\n",
    );
    let mut cells = 0usize;
    for (key, fp) in &fingerprints {
        for range_bin in 0..grid.range_bins() {
            for zenith_bin in 0..grid.zenith_bins() {
                let Some(cell) = fp.cell(range_bin, zenith_bin) else {
                    continue;
                };
                cells += 1;
                out.push_str(&format!(
                    "{},{},{},{},{},{range_bin},{zenith_bin},{},{},{:.3},{:.3},{},{},{},{},{},{},{}\n",
                    key.campaign_id,
                    key.sensor_id,
                    key.object_id,
                    fp.class_name,
                    fp.function.as_deref().unwrap_or(""),
                    grid.range_edges()[range_bin],
                    grid.range_edges()[range_bin + 1],
                    grid.zenith_edges()[zenith_bin].to_degrees(),
                    grid.zenith_edges()[zenith_bin + 1].to_degrees(),
                    cell.count,
                    cell.count >= effective.min_cell_count,
                    cell.mean,
                    cell.std,
                    cell.median,
                    cell.q1,
                    cell.q3
                ));
            }
        }
    }
    write_text(&args.out, &out)?;
    println!(
        "wrote {cells} cells across {} fingerprints to {}",
        fingerprints.len(),
        args.out.display()
    );
    Ok(())
}
