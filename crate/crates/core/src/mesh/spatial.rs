use super::Vec3;
use crate::error::{MorphError, Result};

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

/// Static k-d tree over a point set.
///
/// Every query is exact under Euclidean distance. Ties are resolved towards
/// the lowest point index, so results never depend on tree layout.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    points: Vec<Vec3>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl SpatialIndex {
    pub fn new(points: &[Vec3]) -> Self {
        let mut index = Self {
            points: points.to_vec(),
            order: (0..points.len()).collect(),
            nodes: Vec::new(),
        };
        if !points.is_empty() {
            index.build(0, points.len());
        }
        index
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let (lo, hi) = super::bounding_box(
            &self.order[start..end]
                .iter()
                .map(|&i| self.points[i])
                .collect::<Vec<_>>(),
        )
        .expect("non-empty range");
        let extent = hi - lo;
        let axis = extent.imax();
        if extent[axis] == 0.0 {
            // all points coincide
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mid = start + (end - start) / 2;
        let points = &self.points;
        self.order[start..end]
            .select_nth_unstable_by(mid - start, |&a, &b| points[a][axis].total_cmp(&points[b][axis]));
        let value = self.points[self.order[mid]][axis];
        self.nodes.push(Node::Leaf { start, end });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id] = Node::Split {
            axis,
            value,
            left,
            right,
        };
        id
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    /// Index of and distance to the closest indexed point.
    pub fn nearest(&self, query: &Vec3) -> Result<(usize, f64)> {
        if self.points.is_empty() {
            return Err(MorphError::EmptySet);
        }
        let mut best = (f64::INFINITY, usize::MAX);
        self.nearest_in(0, query, &mut best);
        Ok((best.1, best.0.sqrt()))
    }

    fn nearest_in(&self, node: usize, q: &Vec3, best: &mut (f64, usize)) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let d2 = (self.points[i] - q).norm_squared();
                    if d2 < best.0 || (d2 == best.0 && i < best.1) {
                        *best = (d2, i);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.nearest_in(near, q, best);
                // equal distance may still hide a lower-index tie
                if diff * diff <= best.0 {
                    self.nearest_in(far, q, best);
                }
            }
        }
    }

    /// Up to `k` closest points as `(index, distance)`, ordered by distance
    /// then index.
    pub fn k_nearest(&self, query: &Vec3, k: usize) -> Vec<(usize, f64)> {
        if k == 0 || self.points.is_empty() {
            return Vec::new();
        }
        let mut found: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        self.k_nearest_in(0, query, k, &mut found);
        found.into_iter().map(|(d2, i)| (i, d2.sqrt())).collect()
    }

    fn k_nearest_in(&self, node: usize, q: &Vec3, k: usize, found: &mut Vec<(f64, usize)>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let cand = ((self.points[i] - q).norm_squared(), i);
                    if found.len() == k && !lex_less(cand, found[k - 1]) {
                        continue;
                    }
                    let pos = found.partition_point(|&e| lex_less(e, cand));
                    found.insert(pos, cand);
                    found.truncate(k);
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.k_nearest_in(near, q, k, found);
                if found.len() < k || diff * diff <= found[k - 1].0 {
                    self.k_nearest_in(far, q, k, found);
                }
            }
        }
    }

    /// Indices of all points within `radius` (inclusive), ascending.
    pub fn within_radius(&self, query: &Vec3, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        if !self.points.is_empty() {
            self.radius_in(0, query, radius * radius, &mut out);
        }
        out.sort_unstable();
        out
    }

    fn radius_in(&self, node: usize, q: &Vec3, r2: f64, out: &mut Vec<usize>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => out.extend(
                self.order[start..end]
                    .iter()
                    .copied()
                    .filter(|&i| (self.points[i] - q).norm_squared() <= r2),
            ),
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                if diff <= 0.0 || diff * diff <= r2 {
                    self.radius_in(left, q, r2, out);
                }
                if diff >= 0.0 || diff * diff <= r2 {
                    self.radius_in(right, q, r2, out);
                }
            }
        }
    }
}

fn lex_less(a: (f64, usize), b: (f64, usize)) -> bool {
    a.0 < b.0 || (a.0 == b.0 && a.1 < b.1)
}
