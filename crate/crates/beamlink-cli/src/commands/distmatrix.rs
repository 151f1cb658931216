//! `distmatrix`: compares fingerprints through their Q3 profiles and
//! writes pairwise, per-class and (when function tags exist) per-function
//! distance matrices, each as aligned text and as CSV.

use beamlink::fingerprint::{group_distance_matrix, pairwise_distance_matrix, GroupBy};
use serde::Serialize;

use crate::commands::{build_fingerprints, build_grid, ensure_empty_dir, write_text};
use crate::config::{echo_effective, pick, ConfigFile};
use crate::{CliError, DistmatrixArgs};

#[derive(Serialize)]
struct Effective {
    store: String,
    out: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    scene: Option<String>,
    range_edges_m: Vec<f64>,
    zenith_edges_deg: Vec<f64>,
    range_bin: usize,
    min_cell_count: usize,
}

pub fn run(args: DistmatrixArgs, file: &ConfigFile) -> Result<(), CliError> {
    let section = &file.fingerprint;
    let effective = Effective {
        store: args.store.display().to_string(),
        out: args.out.display().to_string(),
        scene: args.scene.as_ref().map(|p| p.display().to_string()),
        range_edges_m: pick(args.range_edges, section.range_edges_m.clone(), vec![0.0, 15.0]),
        zenith_edges_deg: pick(
            args.zenith_bins,
            section.zenith_edges_deg.clone(),
            vec![0.0, 20.0, 40.0, 60.0, 90.0],
        ),
        range_bin: pick(args.range_bin, section.range_bin, 0),
        min_cell_count: pick(args.min_cell_count, section.min_cell_count, 5),
    };
    echo_effective("distmatrix", &effective)?;

    let grid = build_grid(effective.range_edges_m.clone(), effective.zenith_edges_deg.clone())?;
    if effective.range_bin >= grid.range_bins() {
        return Err(CliError::Config(format!(
            "range bin {} out of bounds for {} bins",
            effective.range_bin,
            grid.range_bins()
        )));
    }

    let (fingerprints, linked) = build_fingerprints(&args.store, args.scene.as_deref(), &grid)?;
    if linked == 0 {
        return Err(CliError::MissingInput(format!(
            "store {} holds no links; run associate first",
            args.store.display()
        )));
    }

    let pairwise =
        pairwise_distance_matrix(&fingerprints, effective.range_bin, effective.min_cell_count);
    if pairwise.labels.is_empty() {
        return Err(CliError::Coverage(format!(
            "no fingerprint covers every zenith bin of range bin {} with {} beams or more",
            effective.range_bin, effective.min_cell_count
        )));
    }

    ensure_empty_dir(&args.out)?;
    write_text(&args.out.join("pairwise.txt"), &pairwise.to_aligned_text())?;
    write_text(&args.out.join("pairwise.csv"), &pairwise.to_csv())?;

    let by_class = group_distance_matrix(
        GroupBy::Class,
        &fingerprints,
        effective.range_bin,
        effective.min_cell_count,
    );
    write_text(&args.out.join("class.txt"), &by_class.to_aligned_text())?;
    write_text(&args.out.join("class.csv"), &by_class.to_csv())?;
    print!("{}", by_class.to_aligned_text());

    let by_function = group_distance_matrix(
        GroupBy::Function,
        &fingerprints,
        effective.range_bin,
        effective.min_cell_count,
    );
    if by_function.labels.is_empty() {
        println!("no function tags; skipping the per-function matrix");
    } else {
        write_text(&args.out.join("function.txt"), &by_function.to_aligned_text())?;
        write_text(&args.out.join("function.csv"), &by_function.to_csv())?;
    }

    println!(
        "compared {} fingerprints across {} class groups into {}",
        pairwise.labels.len(),
        by_class.labels.len(),
        args.out.display()
    );
    Ok(())
}
