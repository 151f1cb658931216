//! Point-to-point ICP alignment of 3D point clouds.
//!
//! The estimate starts from a caller-supplied rigid transform and repeats
//! three steps: pair every transformed source point with its nearest target
//! point (through a k-d tree), gate the pairs by an inlier distance, and
//! solve the least-squares rigid update over the inliers in closed form.
//! The root mean square error over the inliers is recorded before each
//! update, so the history traces the objective that the update minimizes.

use crate::geom::{RigidTransform, Rotation, Vec3};
use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RegistrationError {
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("id column length {ids} does not match point count {points}")]
    IdMismatch { ids: usize, points: usize },
    #[error("initial transform is not rigid")]
    InvalidTransform,
    #[error(
        "source points are too degenerate to constrain a rotation (collinear or coincident)"
    )]
    SingularConfiguration,
    #[error("no source point found a target neighbour within the inlier threshold")]
    NoInliers,
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// A bag of 3D points, optionally labelled with stable numeric ids (for
/// example the beam ids the points were measured by).
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    pub ids: Option<Vec<u64>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Self {
        Self { points, ids: None }
    }

    pub fn with_ids(points: Vec<Vec3>, ids: Vec<u64>) -> Result<Self, RegistrationError> {
        if ids.len() != points.len() {
            return Err(RegistrationError::IdMismatch { ids: ids.len(), points: points.len() });
        }
        Ok(Self { points, ids: Some(ids) })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> Option<Vec3> {
        if self.points.is_empty() {
            return None;
        }
        let sum = self.points.iter().fold(Vec3::ZERO, |acc, p| acc + *p);
        Some(sum / self.points.len() as f64)
    }

    pub fn transformed(&self, t: &RigidTransform) -> PointCloud {
        PointCloud {
            points: self.points.iter().map(|p| t.apply(*p)).collect(),
            ids: self.ids.clone(),
        }
    }
}

/// Outcome of an ICP run.
#[derive(Clone, Debug)]
pub struct RegistrationResult {
    /// Maps source coordinates onto the target frame.
    pub transform: RigidTransform,
    /// Fraction of target points matched by an inlier pair in the final
    /// measurement, in `[0, 1]`.
    pub fitness: f64,
    /// Root mean square distance over the final inlier pairs.
    pub rmse: f64,
    /// Number of transform updates applied.
    pub iterations: usize,
    /// True when the last two measurements differed by less than the
    /// convergence tolerance.
    pub converged: bool,
    /// Inlier RMSE measured before every update plus the final measurement.
    pub rmse_history: Vec<f64>,
}

/// Static k-d tree over the target points.
struct KdTree<'a> {
    points: &'a [Vec3],
    nodes: Vec<KdNode>,
    root: usize,
}

struct KdNode {
    point: u32,
    axis: u8,
    left: Option<u32>,
    right: Option<u32>,
}

impl<'a> KdTree<'a> {
    fn build(points: &'a [Vec3]) -> Self {
        assert!(!points.is_empty(), "caller checks for empty clouds");
        let mut order: Vec<u32> = (0..points.len() as u32).collect();
        let mut nodes = Vec::with_capacity(points.len());
        let root = Self::build_node(points, &mut order[..], 0, &mut nodes);
        Self { points, nodes, root }
    }

    fn build_node(points: &[Vec3], order: &mut [u32], depth: usize, nodes: &mut Vec<KdNode>) -> usize {
        let axis = (depth % 3) as u8;
        let coord = |i: u32| {
            let p = points[i as usize];
            match axis {
                0 => p.x,
                1 => p.y,
                _ => p.z,
            }
        };
        let mid = order.len() / 2;
        // Ties fall back to the point index so the tree shape is a pure
        // function of the input order.
        order.select_nth_unstable_by(mid, |a, b| {
            coord(*a).total_cmp(&coord(*b)).then(a.cmp(b))
        });
        let point = order[mid];
        let node_index = nodes.len();
        nodes.push(KdNode { point, axis, left: None, right: None });
        let (lo, rest) = order.split_at_mut(mid);
        let hi = &mut rest[1..];
        if !lo.is_empty() {
            let l = Self::build_node(points, lo, depth + 1, nodes);
            nodes[node_index].left = Some(l as u32);
        }
        if !hi.is_empty() {
            let r = Self::build_node(points, hi, depth + 1, nodes);
            nodes[node_index].right = Some(r as u32);
        }
        node_index
    }

    /// Index of the point closest to `query` and the squared distance.
    fn nearest(&self, query: Vec3) -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(self.root, query, &mut best);
        best
    }

    fn search(&self, node: usize, query: Vec3, best: &mut (usize, f64)) {
        let n = &self.nodes[node];
        let p = self.points[n.point as usize];
        let d2 = (query - p).norm_squared();
        if d2 < best.1 || (d2 == best.1 && (n.point as usize) < best.0) {
            *best = (n.point as usize, d2);
        }
        let delta = match n.axis {
            0 => query.x - p.x,
            1 => query.y - p.y,
            _ => query.z - p.z,
        };
        let (near, far) = if delta < 0.0 { (n.left, n.right) } else { (n.right, n.left) };
        if let Some(c) = near {
            self.search(c as usize, query, best);
        }
        if let Some(c) = far {
            if delta * delta <= best.1 {
                self.search(c as usize, query, best);
            }
        }
    }
}

/// One round of nearest-neighbour measurement under `transform`.
struct Measurement {
    /// `(source index, target index)` of pairs within the threshold.
    inliers: Vec<(usize, usize)>,
    rmse: f64,
    fitness: f64,
}

fn measure(
    source: &[Vec3],
    tree: &KdTree,
    target_len: usize,
    transform: &RigidTransform,
    inlier_threshold: f64,
) -> Measurement {
    let pairs: Vec<(usize, f64)> = source
        .par_iter()
        .map(|p| tree.nearest(transform.apply(*p)))
        .collect();
    let mut inliers = Vec::new();
    let mut sum = 0.0;
    let t2 = inlier_threshold * inlier_threshold;
    for (si, (ti, d2)) in pairs.iter().enumerate() {
        if *d2 <= t2 {
            inliers.push((si, *ti));
            sum += d2;
        }
    }
    let rmse = if inliers.is_empty() { f64::NAN } else { (sum / inliers.len() as f64).sqrt() };
    let fitness = inliers.len() as f64 / target_len as f64;
    Measurement { inliers, rmse, fitness }
}

/// Closed-form least squares rigid motion taking `src` onto `dst`
/// (correspondence-wise), via the SVD of the cross-covariance with a
/// reflection guard.
fn best_rigid_motion(src: &[Vec3], dst: &[Vec3]) -> RigidTransform {
    debug_assert_eq!(src.len(), dst.len());
    debug_assert!(!src.is_empty());
    let n = src.len() as f64;
    let cs = src.iter().fold(Vec3::ZERO, |a, p| a + *p) / n;
    let cd = dst.iter().fold(Vec3::ZERO, |a, p| a + *p) / n;
    let mut h = Matrix3::zeros();
    for (s, d) in src.iter().zip(dst) {
        let a = Vector3::new(s.x - cs.x, s.y - cs.y, s.z - cs.z);
        let b = Vector3::new(d.x - cd.x, d.y - cd.y, d.z - cd.z);
        h += a * b.transpose();
    }
    let svd = h.svd(true, true);
    let u = svd.u.expect("3x3 SVD always yields U");
    let mut v = svd.v_t.expect("3x3 SVD always yields V^T").transpose();
    if (v * u.transpose()).determinant() < 0.0 {
        for i in 0..3 {
            v[(i, 2)] = -v[(i, 2)];
        }
    }
    let r = v * u.transpose();
    let rotation = Rotation::from_rows([
        [r[(0, 0)], r[(0, 1)], r[(0, 2)]],
        [r[(1, 0)], r[(1, 1)], r[(1, 2)]],
        [r[(2, 0)], r[(2, 1)], r[(2, 2)]],
    ]);
    let translation = cd - rotation.apply(cs);
    RigidTransform::new(rotation, translation)
}

/// Re-normalizes a rotation that drifted from orthonormality through
/// repeated composition.
fn renormalized(r: &Rotation) -> Rotation {
    Rotation::from_quaternion(r.to_quaternion())
}

/// True when the centred source points span at least two independent
/// directions, which a rigid registration needs to pin down the rotation.
fn spans_two_directions(points: &[Vec3]) -> bool {
    let n = points.len() as f64;
    let c = points.iter().fold(Vec3::ZERO, |a, p| a + *p) / n;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = Vector3::new(p.x - c.x, p.y - c.y, p.z - c.z);
        cov += d * d.transpose() / n;
    }
    let mut eig: Vec<f64> = nalgebra::SymmetricEigen::new(cov).eigenvalues.iter().copied().collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    eig[1] > eig[0].max(1e-24) * 1e-9
}

/// Iteratively aligns `source` onto `target` starting from `init`.
///
/// Each iteration measures nearest-neighbour pairs within
/// `inlier_threshold`, records their RMSE, and stops once two consecutive
/// measurements differ by less than `convergence_tol` (or after
/// `max_iterations` updates). Sources that cannot constrain a rotation and
/// iterations without a single inlier are reported as errors rather than
/// degenerate results.
pub fn icp_point_to_point(
    source: &PointCloud,
    target: &PointCloud,
    init: &RigidTransform,
    max_iterations: usize,
    inlier_threshold: f64,
    convergence_tol: f64,
) -> Result<RegistrationResult, RegistrationError> {
    if source.is_empty() || target.is_empty() {
        return Err(RegistrationError::EmptyCloud);
    }
    if init.validate(1e-9).is_err() {
        return Err(RegistrationError::InvalidTransform);
    }
    if !spans_two_directions(&source.points) {
        return Err(RegistrationError::SingularConfiguration);
    }

    let tree = KdTree::build(&target.points);
    let mut transform = *init;
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let (fitness, rmse) = loop {
        let m = measure(&source.points, &tree, target.len(), &transform, inlier_threshold);
        if m.inliers.is_empty() {
            return Err(RegistrationError::NoInliers);
        }
        history.push(m.rmse);
        if let [.., prev, last] = history[..] {
            if (prev - last).abs() < convergence_tol {
                converged = true;
                break (m.fitness, m.rmse);
            }
        }
        if iterations >= max_iterations {
            break (m.fitness, m.rmse);
        }
        iterations += 1;
        let src: Vec<Vec3> =
            m.inliers.iter().map(|(si, _)| transform.apply(source.points[*si])).collect();
        let dst: Vec<Vec3> = m.inliers.iter().map(|(_, ti)| target.points[*ti]).collect();
        let update = best_rigid_motion(&src, &dst);
        transform = update.compose(&transform);
        transform.rotation = renormalized(&transform.rotation);
    };

    Ok(RegistrationResult { transform, fitness, rmse, iterations, converged, rmse_history: history })
}

/// Measures how well `transform` aligns `source` onto `target` without
/// iterating: returns the inlier fraction of the target and the inlier
/// RMSE, which is `None` when nothing fell inside the threshold.
pub fn score_alignment(
    source: &PointCloud,
    target: &PointCloud,
    transform: &RigidTransform,
    inlier_threshold: f64,
) -> Result<(f64, Option<f64>), RegistrationError> {
    if source.is_empty() || target.is_empty() {
        return Err(RegistrationError::EmptyCloud);
    }
    let tree = KdTree::build(&target.points);
    let m = measure(&source.points, &tree, target.len(), transform, inlier_threshold);
    let rmse = if m.inliers.is_empty() { None } else { Some(m.rmse) };
    Ok((m.fitness, rmse))
}

/// Reads a whitespace-separated `x y z` file. Blank lines and lines opening
/// with `#` are skipped; anything else must start with three floats.
pub fn read_xyz(path: &Path) -> Result<PointCloud, RegistrationError> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut points = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut fields = trimmed.split_whitespace();
        let mut next = || -> Result<f64, RegistrationError> {
            fields
                .next()
                .ok_or(())
                .and_then(|f| f.parse::<f64>().map_err(|_| ()))
                .map_err(|_| RegistrationError::Parse {
                    line: i + 1,
                    reason: "expected three floats".to_owned(),
                })
        };
        let p = Vec3::new(next()?, next()?, next()?);
        if !p.is_finite() {
            return Err(RegistrationError::Parse {
                line: i + 1,
                reason: "coordinates must be finite".to_owned(),
            });
        }
        points.push(p);
    }
    Ok(PointCloud::new(points))
}

/// Writes one `x y z` line per point, with enough digits to restore each
/// coordinate bit-exactly.
pub fn write_xyz(path: &Path, cloud: &PointCloud) -> Result<(), RegistrationError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for p in &cloud.points {
        writeln!(out, "{} {} {}", p.x, p.y, p.z)?;
    }
    out.flush()?;
    Ok(())
}
