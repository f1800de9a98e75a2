//! Does some orthogonal map carry the direction set onto its ψ_c image?

use serde::{Deserialize, Serialize};

use crate::directions::DirectionSet;
use crate::spatial::KdTree;
use crate::sphere::{procrustes, psi, rotation_from_vector, signed_permutations, Mat3, RigidIsometry, Vec3};

use super::registration::{frame_alignments, random_orthogonal, sorted_eigenvectors};
use super::RigidityError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObstructionOptions {
    /// Samples per side used as Hausdorff queries.
    pub query_samples: usize,
    /// Samples per side kept in the nearest-neighbour index.
    pub database_samples: usize,
    /// Smaller index and query budget used to screen seeds and run ICP.
    pub coarse_samples: usize,
    /// Seeded random orthogonal seeds added to the deterministic ones.
    pub random_seeds: usize,
    pub seed: u64,
    /// Seeds refined after the initial screening.
    pub refine_best: usize,
    /// Refined seeds polished against the full index.
    pub fine_candidates: usize,
    pub icp_iterations: usize,
    pub polish_evaluations: usize,
}

impl Default for ObstructionOptions {
    fn default() -> Self {
        ObstructionOptions {
            query_samples: 2000,
            database_samples: 300_000,
            coarse_samples: 20_000,
            random_seeds: 0,
            seed: 0,
            refine_best: 3,
            fine_candidates: 1,
            icp_iterations: 15,
            polish_evaluations: 80,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Obstruction {
    /// Best orthogonal map (translation part zero).
    pub ort: RigidIsometry,
    /// Symmetric sampled Hausdorff distance between ψ_c(S) and R(S).
    pub residual: f64,
    pub identity_residual: f64,
}

struct Sides {
    p_db: Vec<Vec3>,
    q_db: Vec<Vec3>,
    p_tree: KdTree,
    q_tree: KdTree,
    p_query: Vec<Vec3>,
    q_query: Vec<Vec3>,
}

impl Sides {
    /// ψ_c image `P` and original `Q` of a thinned copy of `ds`; queries
    /// are an evenly spaced subset of the indexed samples.
    fn new(ds: &DirectionSet, c: f64, database: usize, queries: usize, seed: u64) -> Sides {
        let db = ds.thinned(database, seed);
        let q_db: Vec<Vec3> = db.iter().map(|v| v.vec()).collect();
        let p_db: Vec<Vec3> = db.iter().map(|v| psi(c, v).vec()).collect();
        let pick = thin_indices(db.len(), queries);
        Sides {
            p_tree: KdTree::new(&p_db),
            q_tree: KdTree::new(&q_db),
            p_query: pick.iter().map(|&i| p_db[i]).collect(),
            q_query: pick.iter().map(|&i| q_db[i]).collect(),
            p_db,
            q_db,
        }
    }

    /// max(d(P → R·Q), d(R·Q → P)) over the query subsets.
    fn hausdorff(&self, r: &Mat3) -> f64 {
        let rt = r.transpose();
        let mut worst: f64 = 0.0;
        for p in &self.p_query {
            worst = worst.max(self.q_tree.nearest(&(rt * p)).map_or(f64::INFINITY, |n| n.dist_sq));
        }
        for q in &self.q_query {
            worst = worst.max(self.p_tree.nearest(&(r * q)).map_or(f64::INFINITY, |n| n.dist_sq));
        }
        worst.sqrt()
    }

    /// Orthogonal Procrustes on nearest-neighbour matches in both directions.
    fn icp_step(&self, r: &Mat3) -> Mat3 {
        let rt = r.transpose();
        let mut cross = Mat3::zeros();
        for p in &self.p_query {
            if let Some(n) = self.q_tree.nearest(&(rt * p)) {
                cross += p * self.q_db[n.index].transpose();
            }
        }
        for q in &self.q_query {
            if let Some(n) = self.p_tree.nearest(&(r * q)) {
                cross += self.p_db[n.index] * q.transpose();
            }
        }
        procrustes(&cross, r.determinant().signum())
    }
}

fn second_moment(points: &[Vec3]) -> Mat3 {
    points.iter().fold(Mat3::zeros(), |m, p| m + p * p.transpose())
}

/// Searches orthogonal `R` minimizing the symmetric Hausdorff distance
/// between `ψ_c(S)` and `R(S)`.
///
/// Both sets are thinned (antipodal pairs kept together); queries are drawn
/// from the indexed samples, so at `c = 1` the identity scores zero.
/// Seeds: identity, principal-frame alignments of the second-moment
/// matrices, the 48 signed permutations and optional random rotations.
/// Seeds are screened and refined by spherical ICP on a coarse subsample;
/// the best few are then polished by a compass search on the full
/// Hausdorff distance.
pub fn direction_obstruction(ds: &DirectionSet, c: f64) -> Result<Obstruction, RigidityError> {
    direction_obstruction_with(ds, c, &ObstructionOptions::default())
}

pub fn direction_obstruction_with(
    ds: &DirectionSet,
    c: f64,
    opts: &ObstructionOptions,
) -> Result<Obstruction, RigidityError> {
    if ds.is_empty() {
        return Err(RigidityError::EmptyDirectionSet);
    }
    if !(c > 0.0) || !c.is_finite() {
        return Err(RigidityError::InvalidScale(c));
    }
    let fine = Sides::new(ds, c, opts.database_samples, opts.query_samples, opts.seed);

    let identity = Mat3::identity();
    let identity_residual = fine.hausdorff(&identity);
    if identity_residual <= 1e-12 {
        return Ok(Obstruction {
            ort: RigidIsometry::identity(),
            residual: identity_residual,
            identity_residual,
        });
    }
    let coarse_db = opts.coarse_samples.min(opts.database_samples);
    let coarse = Sides::new(ds, c, coarse_db, opts.query_samples.min(coarse_db / 4).max(2), opts.seed);

    let mut seeds = vec![identity];
    seeds.extend(frame_alignments(
        &sorted_eigenvectors(&second_moment(&fine.q_db)),
        &sorted_eigenvectors(&second_moment(&fine.p_db)),
    ));
    seeds.extend(signed_permutations());
    seeds.extend(random_orthogonal(opts.random_seeds, opts.seed));
    // far-off seeds make nearest-neighbour queries expensive, so screen on a
    // still smaller sample
    let screen_db = (coarse_db / 5).max(2);
    let screen = Sides::new(ds, c, screen_db, (screen_db / 8).max(2), opts.seed);
    let mut scored: Vec<(f64, usize)> = seeds
        .iter()
        .enumerate()
        .map(|(k, r)| (screen.hausdorff(r), k))
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut refined = Vec::new();
    for &(_, k) in scored.iter().take(opts.refine_best.max(1)) {
        let mut r = seeds[k];
        let mut h = coarse.hausdorff(&r);
        for _ in 0..opts.icp_iterations {
            let next = coarse.icp_step(&r);
            let hn = coarse.hausdorff(&next);
            if hn < h {
                r = next;
                h = hn;
            } else {
                break;
            }
        }
        let (r, h) = polish(&coarse, r, h, 0.02, 1e-3, opts.polish_evaluations);
        refined.push((h, r));
    }
    refined.sort_by(|a, b| a.0.total_cmp(&b.0));

    let (mut best, mut best_r) = (identity_residual, identity);
    for &(_, r) in refined.iter().take(opts.fine_candidates.max(1)) {
        let (r, h) = polish(&fine, r, fine.hausdorff(&r), 2e-3, 1e-4, opts.polish_evaluations / 2);
        if h < best {
            best = h;
            best_r = r;
        }
    }
    Ok(Obstruction {
        ort: RigidIsometry::from_approx(&best_r, Vec3::zeros()),
        residual: best,
        identity_residual,
    })
}

/// Evenly spaced pair-preserving subset of `0..len` (pairs at 2k, 2k + 1).
fn thin_indices(len: usize, max: usize) -> Vec<usize> {
    let pairs = len / 2;
    let keep = (max / 2).max(1);
    if pairs <= keep {
        return (0..len).collect();
    }
    (0..keep)
        .flat_map(|k| {
            let pair = k * pairs / keep;
            [2 * pair, 2 * pair + 1]
        })
        .collect()
}

/// Compass search over small left rotations.
fn polish(sides: &Sides, mut r: Mat3, mut h: f64, start: f64, stop: f64, budget: usize) -> (Mat3, f64) {
    let mut step = start;
    let mut used = 0;
    while step > stop && used < budget {
        let mut improved = false;
        for axis in 0..3 {
            for sign in [1.0, -1.0] {
                let mut w = Vec3::zeros();
                w[axis] = sign * step;
                let cand = rotation_from_vector(&w) * r;
                let hc = sides.hausdorff(&cand);
                used += 1;
                if hc < h {
                    r = cand;
                    h = hc;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (r, h)
}
