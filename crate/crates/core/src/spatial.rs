//! Static 3-d tree for nearest-neighbour queries.
//!
//! Splits at the median index on the widest axis, so heavily duplicated
//! coordinates (e.g. every chord of a constant field has z = 0) do not
//! degrade construction.

use crate::sphere::Vec3;

const LEAF_SIZE: usize = 12;

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: u32, end: u32 },
    Split { axis: u8, value: f64, left: u32, right: u32 },
}

#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<[f64; 3]>,
    order: Vec<u32>,
    nodes: Vec<Node>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbour {
    pub index: usize,
    pub dist_sq: f64,
}

impl Neighbour {
    pub fn distance(&self) -> f64 {
        self.dist_sq.sqrt()
    }
}

#[inline]
fn dist_sq(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

impl KdTree {
    pub fn new(points: &[Vec3]) -> KdTree {
        let points: Vec<[f64; 3]> = points.iter().map(|p| [p.x, p.y, p.z]).collect();
        KdTree::from_arrays(points)
    }

    pub fn from_arrays(points: Vec<[f64; 3]>) -> KdTree {
        assert!(points.len() < u32::MAX as usize);
        let mut tree = KdTree {
            order: (0..points.len() as u32).collect(),
            points,
            nodes: Vec::new(),
        };
        if !tree.points.is_empty() {
            tree.build(0, tree.points.len());
        }
        tree
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, index: usize) -> Vec3 {
        let p = self.points[index];
        Vec3::new(p[0], p[1], p[2])
    }

    fn build(&mut self, start: usize, end: usize) -> u32 {
        let id = self.nodes.len() as u32;
        self.nodes.push(Node::Leaf {
            start: start as u32,
            end: end as u32,
        });
        if end - start <= LEAF_SIZE {
            return id;
        }
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &i in &self.order[start..end] {
            let p = &self.points[i as usize];
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let axis = (0..3)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
            .unwrap();
        if hi[axis] - lo[axis] <= 0.0 {
            // all points coincide
            return id;
        }
        let mid = (start + end) / 2;
        let points = &self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&i, &j| {
            points[i as usize][axis].total_cmp(&points[j as usize][axis])
        });
        let value = self.points[self.order[mid] as usize][axis];
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id as usize] = Node::Split {
            axis: axis as u8,
            value,
            left,
            right,
        };
        id
    }

    /// Closest stored point. `None` only for an empty tree.
    pub fn nearest(&self, query: &Vec3) -> Option<Neighbour> {
        if self.points.is_empty() {
            return None;
        }
        let q = [query.x, query.y, query.z];
        let mut best = Neighbour {
            index: usize::MAX,
            dist_sq: f64::INFINITY,
        };
        self.nearest_rec(0, &q, &mut best);
        Some(best)
    }

    fn nearest_rec(&self, node: u32, q: &[f64; 3], best: &mut Neighbour) {
        match self.nodes[node as usize] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start as usize..end as usize] {
                    let d = dist_sq(&self.points[i as usize], q);
                    // ties resolve to the lowest index for determinism
                    if d < best.dist_sq || (d == best.dist_sq && (i as usize) < best.index) {
                        *best = Neighbour {
                            index: i as usize,
                            dist_sq: d,
                        };
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis as usize] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.nearest_rec(near, q, best);
                if diff * diff <= best.dist_sq {
                    self.nearest_rec(far, q, best);
                }
            }
        }
    }

    /// The `k` closest points, nearest first.
    pub fn nearest_k(&self, query: &Vec3, k: usize) -> Vec<Neighbour> {
        let mut heap: Vec<Neighbour> = Vec::with_capacity(k + 1);
        if k == 0 || self.points.is_empty() {
            return heap;
        }
        let q = [query.x, query.y, query.z];
        self.nearest_k_rec(0, &q, k, &mut heap);
        heap
    }

    fn nearest_k_rec(&self, node: u32, q: &[f64; 3], k: usize, heap: &mut Vec<Neighbour>) {
        let bound = |heap: &Vec<Neighbour>| {
            if heap.len() < k {
                f64::INFINITY
            } else {
                heap[heap.len() - 1].dist_sq
            }
        };
        match self.nodes[node as usize] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start as usize..end as usize] {
                    let d = dist_sq(&self.points[i as usize], q);
                    if d < bound(heap) {
                        let cand = Neighbour {
                            index: i as usize,
                            dist_sq: d,
                        };
                        let pos = heap.partition_point(|n| {
                            n.dist_sq < d || (n.dist_sq == d && n.index < cand.index)
                        });
                        heap.insert(pos, cand);
                        heap.truncate(k);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis as usize] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.nearest_k_rec(near, q, k, heap);
                if diff * diff <= bound(heap) {
                    self.nearest_k_rec(far, q, k, heap);
                }
            }
        }
    }
}

/// max over `queries` of the distance to the nearest point of `tree`.
pub fn directed_hausdorff<'a, I>(queries: I, tree: &KdTree) -> f64
where
    I: IntoIterator<Item = &'a Vec3>,
{
    queries
        .into_iter()
        .map(|q| tree.nearest(q).map_or(f64::INFINITY, |n| n.dist_sq))
        .fold(0.0, f64::max)
        .sqrt()
}
