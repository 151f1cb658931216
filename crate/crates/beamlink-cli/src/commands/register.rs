//! `register`: aligns a source point cloud onto a target with
//! point-to-point ICP and reports the transform plus its quality metrics
//! as machine-parsable key/value lines.

use beamlink::geom::RigidTransform;
use beamlink::registration::{icp_point_to_point, read_xyz, RegistrationError, RegistrationResult};
use serde::Serialize;

use crate::commands::write_text;
use crate::config::{echo_effective, flat, pick, ConfigFile};
use crate::{CliError, RegisterArgs};

#[derive(Serialize)]
struct Effective {
    source: String,
    target: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    out: Option<String>,
    inlier_threshold: f64,
    max_iterations: usize,
    convergence_tol: f64,
}

fn map_err(e: RegistrationError) -> CliError {
    let text = flat(&e.to_string());
    match e {
        RegistrationError::NoInliers => CliError::Coverage(text),
        RegistrationError::Io(io) if io.kind() == std::io::ErrorKind::NotFound => {
            CliError::MissingInput(text)
        }
        RegistrationError::Io(_) => CliError::Other(text),
        RegistrationError::InvalidTransform => CliError::Config(text),
        RegistrationError::EmptyCloud
        | RegistrationError::IdMismatch { .. }
        | RegistrationError::SingularConfiguration
        | RegistrationError::Parse { .. } => CliError::Data(text),
    }
}

fn render(result: &RegistrationResult) -> String {
    let rows = result.transform.rotation.rows();
    let t = result.transform.translation;
    let mut out = String::new();
    for (i, row) in rows.iter().enumerate() {
        out.push_str(&format!("rotation_row_{i} {} {} {}\n", row[0], row[1], row[2]));
    }
    out.push_str(&format!("translation {} {} {}\n", t.x, t.y, t.z));
    out.push_str(&format!("fitness {}\n", result.fitness));
    out.push_str(&format!("rmse {}\n", result.rmse));
    out.push_str(&format!("iterations {}\n", result.iterations));
    out.push_str(&format!("converged {}\n", result.converged));
    out.push_str("rmse_history");
    for v in &result.rmse_history {
        out.push_str(&format!(" {v}"));
    }
    out.push('\n');
    out
}

pub fn run(args: RegisterArgs, file: &ConfigFile) -> Result<(), CliError> {
    let section = &file.register;
    let effective = Effective {
        source: args.source.display().to_string(),
        target: args.target.display().to_string(),
        out: args.out.as_ref().map(|p| p.display().to_string()),
        inlier_threshold: pick(args.inlier_threshold, section.inlier_threshold, 1.0),
        max_iterations: pick(args.max_iterations, section.max_iterations, 50),
        convergence_tol: pick(args.convergence_tol, section.convergence_tol, 1e-8),
    };
    echo_effective("register", &effective)?;

    if !(effective.inlier_threshold.is_finite() && effective.inlier_threshold > 0.0) {
        return Err(CliError::Config("inlier threshold must be positive".to_owned()));
    }
    if effective.max_iterations == 0 {
        return Err(CliError::Config("max iterations must be at least 1".to_owned()));
    }
    if !(effective.convergence_tol.is_finite() && effective.convergence_tol >= 0.0) {
        return Err(CliError::Config("convergence tolerance must be non-negative".to_owned()));
    }

    let source = read_xyz(&args.source).map_err(map_err)?;
    let target = read_xyz(&args.target).map_err(map_err)?;
    let result = icp_point_to_point(
        &source,
        &target,
        &RigidTransform::identity(),
        effective.max_iterations,
        effective.inlier_threshold,
        effective.convergence_tol,
    )
    .map_err(map_err)?;

    let text = render(&result);
    print!("{text}");
    if let Some(out) = &args.out {
        write_text(out, &text)?;
    }
    Ok(())
}
