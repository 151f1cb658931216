//! `report`: renders what a store holds — entity counts, link statistics
//! per class and object, Q3-versus-zenith profiles, and the distance
//! matrices — as one aligned text report plus delimited files.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use beamlink::association::enrich_objects;
use beamlink::fingerprint::{
    group_distance_matrix, pairwise_distance_matrix, BinGrid, Fingerprint, FingerprintFilter,
    FingerprintKey, GroupBy,
};
use beamlink::store::Store;
use serde::Serialize;

use crate::commands::{
    enriched_records, ensure_empty_dir, build_grid, load_scene, stored_associations, write_text,
};
use crate::config::{echo_effective, flat, pick, ConfigFile};
use crate::{CliError, ReportArgs};

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

/// Pads every column to its widest cell: first column left-aligned, the
/// rest right-aligned.
fn align(rows: &[Vec<String>]) -> String {
    let columns = rows.iter().map(Vec::len).max().unwrap_or(0);
    let mut widths = vec![0usize; columns];
    for row in rows {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(cell.len());
        }
    }
    let mut out = String::new();
    for row in rows {
        for (i, cell) in row.iter().enumerate() {
            if i == 0 {
                let _ = write!(out, "{cell:<width$}", width = widths[0]);
            } else {
                let _ = write!(out, "  {cell:>width$}", width = widths[i]);
            }
        }
        out.push('\n');
    }
    out
}

fn zenith_labels(grid: &BinGrid) -> Vec<String> {
    grid.zenith_edges()
        .windows(2)
        .map(|w| format!("[{:.0},{:.0})deg", w[0].to_degrees(), w[1].to_degrees()))
        .collect()
}

fn q3_profiles(
    fingerprints: &BTreeMap<FingerprintKey, Fingerprint>,
    grid: &BinGrid,
    range_bin: usize,
    min_cell_count: usize,
) -> (Vec<Vec<String>>, String) {
    let mut rows = vec![{
        let mut header = vec!["object".to_owned(), "class".to_owned()];
        header.extend(zenith_labels(grid));
        header
    }];
    let mut csv = format!("object,class,{}\n", zenith_labels(grid).join(","));
    for (key, fp) in fingerprints {
        let mut row = vec![key.to_string(), fp.class_name.clone()];
        let mut csv_row = format!("{key},{}", fp.class_name);
        for zenith_bin in 0..grid.zenith_bins() {
            let cell = fp
                .cell(range_bin, zenith_bin)
                .filter(|c| c.count >= min_cell_count)
                .map(|c| c.q3);
            row.push(cell.map_or("-".to_owned(), |q| format!("{q:.3}")));
            csv_row.push(',');
            if let Some(q) = cell {
                let _ = write!(csv_row, "{q}");
            }
        }
        rows.push(row);
        csv.push_str(&csv_row);
        csv.push('\n');
    }
    (rows, csv)
}

pub fn run(args: ReportArgs, file: &ConfigFile) -> Result<(), CliError> {
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
    echo_effective("report", &effective)?;

    let grid = build_grid(effective.range_edges_m.clone(), effective.zenith_edges_deg.clone())?;
    if effective.range_bin >= grid.range_bins() {
        return Err(CliError::Config(format!(
            "range bin {} out of bounds for {} bins",
            effective.range_bin,
            grid.range_bins()
        )));
    }
    let scene = args.scene.as_deref().map(load_scene).transpose()?;

    let store = Store::open_ro(&args.store)?;
    let records = store.read_all_beams()?;
    let (beams, associations) = stored_associations(&records);

    ensure_empty_dir(&args.out)?;
    let mut report = String::new();
    let _ = writeln!(report, "store {}", args.store.display());
    let _ = writeln!(
        report,
        "platforms {}  sensors {}  campaigns {}  packages {}",
        store.platforms().count(),
        store.sensors().count(),
        store.campaigns().count(),
        store.packages().len()
    );
    let _ = writeln!(
        report,
        "beams {}  linked {} ({:.1}%)",
        beams.len(),
        associations.len(),
        if beams.is_empty() { 0.0 } else { 100.0 * associations.len() as f64 / beams.len() as f64 }
    );
    report.push('\n');

    if associations.is_empty() {
        report.push_str("no links stored; the link, fingerprint and distance sections are empty\n");
        write_text(&args.out.join("report.txt"), &report)?;
        print!("{report}");
        return Ok(());
    }

    // Links per class.
    let mut per_class: BTreeMap<&str, u64> = BTreeMap::new();
    for r in &records {
        if let Some(a) = &r.assoc {
            *per_class.entry(a.class_name.as_str()).or_default() += 1;
        }
    }
    report.push_str("links per class\n");
    let class_rows: Vec<Vec<String>> = per_class
        .iter()
        .map(|(class, count)| vec![class.to_string(), count.to_string()])
        .collect();
    report.push_str(&align(&class_rows));
    report.push('\n');

    // Per-object statistics.
    let objects = enrich_objects(&associations, &beams)
        .map_err(|e| CliError::Data(flat(&e.to_string())))?;
    let mut object_rows = vec![vec![
        "object".to_owned(),
        "points".to_owned(),
        "int_mean".to_owned(),
        "int_median".to_owned(),
        "int_q3".to_owned(),
        "signed_mean".to_owned(),
        "min_dist_mean".to_owned(),
    ]];
    let mut objects_csv =
        String::from("object,points,int_mean,int_median,int_q3,signed_mean,min_dist_mean\n");
    for (id, s) in &objects {
        object_rows.push(vec![
            id.to_string(),
            s.point_count.to_string(),
            format!("{:.3}", s.intensity.mean),
            format!("{:.3}", s.intensity.median),
            format!("{:.3}", s.intensity.q3),
            format!("{:.4}", s.signed_dist_mean),
            format!("{:.4}", s.min_dist_mean),
        ]);
        let _ = writeln!(
            objects_csv,
            "{id},{},{},{},{},{},{}",
            s.point_count,
            s.intensity.mean,
            s.intensity.median,
            s.intensity.q3,
            s.signed_dist_mean,
            s.min_dist_mean
        );
    }
    report.push_str("object statistics\n");
    report.push_str(&align(&object_rows));
    report.push('\n');
    write_text(&args.out.join("objects.csv"), &objects_csv)?;

    // Fingerprints and distances.
    let enriched = enriched_records(records, scene.as_ref());
    let fingerprints = beamlink::fingerprint::extract_fingerprints(
        &enriched,
        &grid,
        &FingerprintFilter::default(),
    );
    let (profile_rows, profile_csv) =
        q3_profiles(&fingerprints, &grid, effective.range_bin, effective.min_cell_count);
    let _ = writeln!(report, "q3 profiles (range bin {})", effective.range_bin);
    report.push_str(&align(&profile_rows));
    report.push('\n');
    write_text(&args.out.join("q3_profiles.csv"), &profile_csv)?;

    let pairwise =
        pairwise_distance_matrix(&fingerprints, effective.range_bin, effective.min_cell_count);
    if pairwise.labels.is_empty() {
        report.push_str("no fingerprint covers every zenith bin; distance sections are empty\n");
    } else {
        report.push_str("pairwise distances\n");
        report.push_str(&pairwise.to_aligned_text());
        report.push('\n');
        write_text(&args.out.join("pairwise.csv"), &pairwise.to_csv())?;

        let by_class = group_distance_matrix(
            GroupBy::Class,
            &fingerprints,
            effective.range_bin,
            effective.min_cell_count,
        );
        report.push_str("class distances\n");
        report.push_str(&by_class.to_aligned_text());
        report.push('\n');
        write_text(&args.out.join("class.csv"), &by_class.to_csv())?;

        let by_function = group_distance_matrix(
            GroupBy::Function,
            &fingerprints,
            effective.range_bin,
            effective.min_cell_count,
        );
        if !by_function.labels.is_empty() {
            report.push_str("function distances\n");
            report.push_str(&by_function.to_aligned_text());
            report.push('\n');
            write_text(&args.out.join("function.csv"), &by_function.to_csv())?;
        }
    }

    write_text(&args.out.join("report.txt"), &report)?;
    print!("{report}");
    Ok(())
}
