//! Graph clouds and the search for a rigid map between two of them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::directions::SampleBox;
use crate::expr::{DomainError, ScalarField};
use crate::spatial::KdTree;
use crate::sphere::{kabsch, rotation_from_vector, signed_permutations, Mat3, RigidIsometry, Vec3};

use super::RigidityError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CloudMeta {
    pub field: String,
    /// Argument scale: points are `(x, y, f(c·x, c·y))`.
    pub c: f64,
    #[serde(rename = "box")]
    pub sample_box: SampleBox,
    pub seed: u64,
    /// Rigid map applied after lifting (identity for a fresh sample).
    pub frame: RigidIsometry,
}

/// Sampled graph of `f(c·)`, with unit normals.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphCloud {
    points: Vec<Vec3>,
    normals: Vec<Vec3>,
    planar: Vec<[f64; 2]>,
    meta: CloudMeta,
}

impl GraphCloud {
    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn normals(&self) -> &[Vec3] {
        &self.normals
    }

    /// The `(x, y)` each point was lifted from.
    pub fn planar(&self) -> &[[f64; 2]] {
        &self.planar
    }

    pub fn meta(&self) -> &CloudMeta {
        &self.meta
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The same cloud moved by `iso` (composed onto the recorded frame).
    pub fn transformed(&self, iso: &RigidIsometry) -> GraphCloud {
        let mut meta = self.meta.clone();
        meta.frame = iso.compose(&self.meta.frame);
        GraphCloud {
            points: self.points.iter().map(|p| iso.apply(p)).collect(),
            normals: self.normals.iter().map(|n| iso.ort() * n).collect(),
            planar: self.planar.clone(),
            meta,
        }
    }

    fn centroid(&self, idx: &[usize]) -> Vec3 {
        idx.iter().map(|&i| self.points[i]).sum::<Vec3>() / idx.len() as f64
    }
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

/// Planar sample points: Halton (2, 3) with a seeded Cranley–Patterson
/// rotation. Independent of the field and of `c`.
pub fn halton_points(sample_box: &SampleBox, n: usize, seed: u64) -> Vec<[f64; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (sx, sy): (f64, f64) = (rng.gen(), rng.gen());
    (1..=n as u64)
        .map(|i| {
            let u = (radical_inverse(i, 2) + sx).fract();
            let v = (radical_inverse(i, 3) + sy).fract();
            [
                sample_box.x0 + u * (sample_box.x1 - sample_box.x0),
                sample_box.y0 + v * (sample_box.y1 - sample_box.y0),
            ]
        })
        .collect()
}

fn graph_normal(field: &ScalarField, c: f64, x: f64, y: f64) -> Result<Vec3, DomainError> {
    let f = |x: f64, y: f64| field.eval(c * x, c * y);
    let hx = 1e-6 * x.abs().max(1.0);
    let hy = 1e-6 * y.abs().max(1.0);
    let fx = (f(x + hx, y)? - f(x - hx, y)?) / (2.0 * hx);
    let fy = (f(x, y + hy)? - f(x, y - hy)?) / (2.0 * hy);
    Ok(Vec3::new(-fx, -fy, 1.0).normalize())
}

/// Lifts `n` low-discrepancy points of `sample_box` to the graph of `f(c·)`.
pub fn sample_graph(
    field: &ScalarField,
    c: f64,
    sample_box: SampleBox,
    n: usize,
    seed: u64,
) -> Result<GraphCloud, RigidityError> {
    if n < 4 {
        return Err(RigidityError::TooFewPoints(n));
    }
    if !(c > 0.0) || !c.is_finite() {
        return Err(RigidityError::InvalidScale(c));
    }
    if !sample_box.is_valid() {
        return Err(RigidityError::InvalidArgument(format!("degenerate box {sample_box:?}")));
    }
    let planar = halton_points(&sample_box, n, seed);
    let mut points = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    for &[x, y] in &planar {
        points.push(Vec3::new(x, y, field.eval(c * x, c * y)?));
        normals.push(graph_normal(field, c, x, y)?);
    }
    Ok(GraphCloud {
        points,
        normals,
        planar,
        meta: CloudMeta {
            field: field.source().to_string(),
            c,
            sample_box,
            seed,
            frame: RigidIsometry::identity(),
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignmentOptions {
    /// Fraction of the source box trimmed from every side.
    pub trim: f64,
    /// Minimum fraction of trimmed source points with an accepted match.
    pub min_overlap: f64,
    /// A match is accepted within `reach_factor` times the distance from the
    /// target point to its `reach_k`-th neighbour.
    pub reach_factor: f64,
    pub reach_k: usize,
    pub point_to_point_iterations: usize,
    pub max_iterations: usize,
    /// Seeded random rotations added to the deterministic seeds.
    pub random_seeds: usize,
    pub seed: u64,
    /// Stop the seed search once this rms is reached.
    pub good_enough: f64,
}

impl Default for AlignmentOptions {
    fn default() -> Self {
        AlignmentOptions {
            trim: 0.05,
            min_overlap: 0.5,
            reach_factor: 1.5,
            reach_k: 6,
            point_to_point_iterations: 8,
            max_iterations: 40,
            random_seeds: 0,
            seed: 0,
            good_enough: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    pub isometry: RigidIsometry,
    /// Root mean square point-to-tangent-plane distance over accepted matches;
    /// infinite when the overlap requirement fails.
    pub rms: f64,
    pub overlap: f64,
    pub converged: bool,
    pub seeds_tried: usize,
}

struct Target<'a> {
    cloud: &'a GraphCloud,
    tree: KdTree,
    reach_sq: Vec<f64>,
}

impl<'a> Target<'a> {
    fn new(cloud: &'a GraphCloud, opts: &AlignmentOptions) -> Target<'a> {
        let tree = KdTree::new(&cloud.points);
        let reach_sq = cloud
            .points
            .iter()
            .map(|p| {
                let nn = tree.nearest_k(p, opts.reach_k + 1);
                let d = nn.last().map_or(0.0, |n| n.dist_sq);
                d * opts.reach_factor * opts.reach_factor
            })
            .collect();
        Target { cloud, tree, reach_sq }
    }
}

struct Fit {
    rms: f64,
    overlap: f64,
}

/// Accepted matches `(source index, target index)` and the rms under `iso`.
fn evaluate(
    iso: &RigidIsometry,
    src: &GraphCloud,
    idx: &[usize],
    target: &Target,
    min_overlap: f64,
    pairs: Option<&mut Vec<(usize, usize)>>,
) -> Fit {
    let mut sum = 0.0;
    let mut accepted = 0usize;
    let mut pairs = pairs;
    if let Some(p) = pairs.as_deref_mut() {
        p.clear();
    }
    for &i in idx {
        let q = iso.apply(&src.points[i]);
        let nn = target.tree.nearest(&q).expect("target cloud is nonempty");
        if nn.dist_sq <= target.reach_sq[nn.index] {
            let r = target.cloud.normals[nn.index].dot(&(q - target.cloud.points[nn.index]));
            sum += r * r;
            accepted += 1;
            if let Some(p) = pairs.as_deref_mut() {
                p.push((i, nn.index));
            }
        }
    }
    let overlap = accepted as f64 / idx.len() as f64;
    let rms = if accepted > 0 && overlap >= min_overlap {
        (sum / accepted as f64).sqrt()
    } else {
        f64::INFINITY
    };
    Fit { rms, overlap }
}

/// One Gauss–Newton step of point-to-plane alignment on fixed matches.
fn point_to_plane_step(
    iso: &RigidIsometry,
    src: &GraphCloud,
    target: &GraphCloud,
    pairs: &[(usize, usize)],
) -> Option<(RigidIsometry, f64)> {
    if pairs.len() < 6 {
        return None;
    }
    let moved: Vec<Vec3> = pairs.iter().map(|&(i, _)| iso.apply(&src.points[i])).collect();
    let m = moved.iter().sum::<Vec3>() / moved.len() as f64;
    let mut jtj = nalgebra::Matrix6::<f64>::zeros();
    let mut jtr = nalgebra::Vector6::<f64>::zeros();
    for (p, &(_, j)) in moved.iter().zip(pairs) {
        let n = target.normals[j];
        let r = n.dot(&(p - target.points[j]));
        let a = (p - m).cross(&n);
        let row = nalgebra::Vector6::new(a.x, a.y, a.z, n.x, n.y, n.z);
        jtj += row * row.transpose();
        jtr += row * r;
    }
    // a tiny ridge keeps directions the residual ignores (in-plane motion) fixed
    let ridge = 1e-12 * jtj.trace().max(1e-300);
    for k in 0..6 {
        jtj[(k, k)] += ridge;
    }
    let step = jtj.cholesky()?.solve(&(-jtr));
    let omega = Vec3::new(step[0], step[1], step[2]);
    let delta = Vec3::new(step[3], step[4], step[5]);
    let e = rotation_from_vector(&omega);
    let ort = e * iso.ort();
    let trans = e * (iso.trans() - m) + m + delta;
    Some((RigidIsometry::from_approx(&ort, trans), step.norm()))
}

fn refine(
    seed: &Mat3,
    src: &GraphCloud,
    idx: &[usize],
    target: &Target,
    opts: &AlignmentOptions,
    prune_above: f64,
) -> (RigidIsometry, Fit, bool) {
    let orientation = seed.determinant().signum();
    let all: Vec<usize> = (0..target.cloud.len()).collect();
    let ct = target.cloud.centroid(&all);
    let cs = src.centroid(idx);
    let mut iso = RigidIsometry::from_approx(seed, ct - seed * cs);

    // point-to-point rounds without gating
    let mut from = Vec::with_capacity(idx.len());
    let mut to = Vec::with_capacity(idx.len());
    for _ in 0..opts.point_to_point_iterations {
        from.clear();
        to.clear();
        for &i in idx {
            let q = iso.apply(&src.points[i]);
            let nn = target.tree.nearest(&q).expect("target cloud is nonempty");
            from.push(src.points[i]);
            to.push(target.cloud.points[nn.index]);
        }
        iso = kabsch(&from, &to, orientation);
    }

    let mut pairs = Vec::new();
    let mut fit = evaluate(&iso, src, idx, target, opts.min_overlap, Some(&mut pairs));
    if fit.rms > prune_above {
        return (iso, fit, false);
    }
    let mut converged = false;
    for _ in 0..opts.max_iterations {
        let Some((next, step)) = point_to_plane_step(&iso, src, target.cloud, &pairs) else {
            break;
        };
        let mut next_pairs = Vec::new();
        let next_fit = evaluate(&next, src, idx, target, opts.min_overlap, Some(&mut next_pairs));
        if !(next_fit.rms <= fit.rms) {
            converged = step < 1e-9;
            break;
        }
        let gain = fit.rms - next_fit.rms;
        iso = next;
        pairs = next_pairs;
        fit = next_fit;
        if step < 1e-12 || fit.rms <= opts.good_enough * 1e-3 || gain <= 1e-12 * fit.rms {
            converged = true;
            break;
        }
    }
    (iso, fit, converged)
}

fn principal_axes(points: &[Vec3]) -> Mat3 {
    let n = points.len() as f64;
    let m = points.iter().sum::<Vec3>() / n;
    let mut cov = Mat3::zeros();
    for p in points {
        let d = p - m;
        cov += d * d.transpose();
    }
    sorted_eigenvectors(&cov)
}

/// Eigenvectors of a symmetric matrix as columns, by decreasing eigenvalue.
pub(crate) fn sorted_eigenvectors(m: &Mat3) -> Mat3 {
    let eig = m.symmetric_eigen();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    Mat3::from_columns(&[
        eig.eigenvectors.column(order[0]).into_owned(),
        eig.eigenvectors.column(order[1]).into_owned(),
        eig.eigenvectors.column(order[2]).into_owned(),
    ])
}

/// The eight maps `V_to · diag(±1, ±1, ±1) · V_fromᵀ` between principal frames.
pub(crate) fn frame_alignments(from: &Mat3, to: &Mat3) -> Vec<Mat3> {
    (0..8u32)
        .map(|signs| {
            let s = Mat3::from_diagonal(&Vec3::new(
                if signs & 1 == 1 { -1.0 } else { 1.0 },
                if signs & 2 == 2 { -1.0 } else { 1.0 },
                if signs & 4 == 4 { -1.0 } else { 1.0 },
            ));
            to * s * from.transpose()
        })
        .collect()
}

/// Uniformly random rotations (both orientations alternate).
pub(crate) fn random_orthogonal(count: usize, seed: u64) -> Vec<Mat3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x0a11_9e55);
    (0..count)
        .map(|k| {
            // unit quaternion from three uniforms
            let (u1, u2, u3): (f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen());
            let tau = std::f64::consts::TAU;
            let q = nalgebra::Quaternion::new(
                (1.0 - u1).sqrt() * (tau * u2).sin(),
                (1.0 - u1).sqrt() * (tau * u2).cos(),
                u1.sqrt() * (tau * u3).sin(),
                u1.sqrt() * (tau * u3).cos(),
            );
            let r = *nalgebra::UnitQuaternion::from_quaternion(q).to_rotation_matrix().matrix();
            if k % 2 == 1 {
                r * Mat3::from_diagonal(&Vec3::new(1.0, 1.0, -1.0))
            } else {
                r
            }
        })
        .collect()
}

/// Searches for a rigid map carrying `source` onto `target` with default
/// options and no extra seeds.
pub fn find_isometry(source: &GraphCloud, target: &GraphCloud) -> Result<Alignment, RigidityError> {
    find_isometry_with(source, target, &[], &AlignmentOptions::default())
}

/// Multi-start iterative closest point: every seed orthogonal matrix (the
/// 48 signed permutations, principal-frame alignments, `extra_seeds`, and
/// optional random rotations) is refined by point-to-point and then
/// point-to-tangent-plane iterations. Only source points inside the
/// trimmed source box take part. Returns the best map found.
pub fn find_isometry_with(
    source: &GraphCloud,
    target: &GraphCloud,
    extra_seeds: &[Mat3],
    opts: &AlignmentOptions,
) -> Result<Alignment, RigidityError> {
    if source.len() < 4 {
        return Err(RigidityError::TooFewPoints(source.len()));
    }
    if target.len() < 4 {
        return Err(RigidityError::TooFewPoints(target.len()));
    }
    let inner = source.meta.sample_box.trimmed(opts.trim);
    let mut idx: Vec<usize> = (0..source.len())
        .filter(|&i| inner.contains(source.planar[i][0], source.planar[i][1]))
        .collect();
    if idx.len() < 4 {
        idx = (0..source.len()).collect();
    }
    let tgt = Target::new(target, opts);

    let src_pts: Vec<Vec3> = idx.iter().map(|&i| source.points[i]).collect();
    let mut seeds: Vec<Mat3> = extra_seeds.to_vec();
    seeds.extend(frame_alignments(&principal_axes(&src_pts), &principal_axes(&target.points)));
    seeds.extend(signed_permutations());
    seeds.extend(random_orthogonal(opts.random_seeds, opts.seed));

    let mut best = Alignment {
        isometry: RigidIsometry::identity(),
        rms: f64::INFINITY,
        overlap: 0.0,
        converged: false,
        seeds_tried: 0,
    };
    for (k, seed) in seeds.iter().enumerate() {
        let prune = if best.rms.is_finite() { 50.0 * best.rms + 1e-9 } else { f64::INFINITY };
        let (iso, fit, converged) = refine(seed, source, &idx, &tgt, opts, prune);
        best.seeds_tried = k + 1;
        if fit.rms < best.rms {
            best.isometry = iso;
            best.rms = fit.rms;
            best.overlap = fit.overlap;
            best.converged = converged;
        }
        if best.rms <= opts.good_enough {
            break;
        }
    }
    Ok(best)
}

/// rms of `iso` between the clouds, with the same trimming and gating as the
/// search.
pub fn alignment_rms(
    source: &GraphCloud,
    target: &GraphCloud,
    iso: &RigidIsometry,
    opts: &AlignmentOptions,
) -> f64 {
    let inner = source.meta.sample_box.trimmed(opts.trim);
    let idx: Vec<usize> = (0..source.len())
        .filter(|&i| inner.contains(source.planar[i][0], source.planar[i][1]))
        .collect();
    let tgt = Target::new(target, opts);
    evaluate(iso, source, &idx, &tgt, opts.min_overlap, None).rms
}
