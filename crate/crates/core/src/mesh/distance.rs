use super::{TriMesh, Vec3};
use crate::error::{MorphError, Result};

const LEAF_TRIANGLES: usize = 4;

/// Closest point to `p` on triangle `abc`, covering interior, edges and
/// corners. Degenerate (zero-area) triangles fall back to their edges.
pub fn closest_point_on_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Vec3 {
    let ab = b - a;
    let ac = c - a;
    if ab.cross(&ac).norm_squared() <= f64::EPSILON * ab.norm_squared() * ac.norm_squared() {
        return [
            closest_point_on_segment(p, a, b),
            closest_point_on_segment(p, b, c),
            closest_point_on_segment(p, c, a),
        ]
        .into_iter()
        .min_by(|x, y| (x - p).norm_squared().total_cmp(&(y - p).norm_squared()))
        .unwrap();
    }

    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    // interior: orthogonal projection onto the plane, exact for in-plane points
    let n = ab.cross(&ac);
    p - n * (n.dot(&ap) / n.norm_squared())
}

fn closest_point_on_segment(p: &Vec3, a: &Vec3, b: &Vec3) -> Vec3 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return *a;
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    a + ab * t
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceHit {
    pub point: Vec3,
    pub distance: f64,
    pub face: usize,
}

#[derive(Debug, Clone)]
struct BvhNode {
    lo: Vec3,
    hi: Vec3,
    // leaf: range into `order`; inner: children
    kind: BvhKind,
}

#[derive(Debug, Clone)]
enum BvhKind {
    Leaf { start: usize, end: usize },
    Inner { left: usize, right: usize },
}

/// Bounding-volume hierarchy over a mesh's triangles for exact closest-point
/// queries against the surface.
#[derive(Debug, Clone)]
pub struct SurfaceIndex {
    triangles: Vec<[Vec3; 3]>,
    face_ids: Vec<usize>,
    order: Vec<usize>,
    nodes: Vec<BvhNode>,
}

impl SurfaceIndex {
    pub fn new(mesh: &TriMesh) -> Result<Self> {
        Self::from_faces(mesh, (0..mesh.face_count()).collect())
    }

    /// Index over a subset of the mesh's faces. Hits report original face ids.
    pub fn from_faces(mesh: &TriMesh, face_ids: Vec<usize>) -> Result<Self> {
        if face_ids.is_empty() {
            return Err(MorphError::Degenerate("mesh has no faces".into()));
        }
        let triangles: Vec<[Vec3; 3]> = face_ids
            .iter()
            .map(|&f| mesh.faces()[f].map(|i| mesh.vertices()[i]))
            .collect();
        let mut index = Self {
            order: (0..triangles.len()).collect(),
            triangles,
            face_ids,
            nodes: Vec::new(),
        };
        index.build(0, index.triangles.len());
        Ok(index)
    }

    fn bounds(&self, start: usize, end: usize) -> (Vec3, Vec3) {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for &t in &self.order[start..end] {
            for v in &self.triangles[t] {
                lo = lo.inf(v);
                hi = hi.sup(v);
            }
        }
        (lo, hi)
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let (lo, hi) = self.bounds(start, end);
        let id = self.nodes.len();
        self.nodes.push(BvhNode {
            lo,
            hi,
            kind: BvhKind::Leaf { start, end },
        });
        if end - start <= LEAF_TRIANGLES {
            return id;
        }
        let axis = (hi - lo).imax();
        let mid = start + (end - start) / 2;
        let tris = &self.triangles;
        let key = |t: usize| tris[t][0][axis] + tris[t][1][axis] + tris[t][2][axis];
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| key(a).total_cmp(&key(b)));
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id].kind = BvhKind::Inner { left, right };
        id
    }

    pub fn face_count(&self) -> usize {
        self.triangles.len()
    }

    /// Closest surface point; ties resolve to the lowest face id.
    pub fn closest(&self, p: &Vec3) -> SurfaceHit {
        let mut best = (f64::INFINITY, usize::MAX, Vec3::zeros());
        self.closest_in(0, p, &mut best);
        SurfaceHit {
            point: best.2,
            distance: best.0.sqrt(),
            face: best.1,
        }
    }

    pub fn distance(&self, p: &Vec3) -> f64 {
        self.closest(p).distance
    }

    fn closest_in(&self, node: usize, p: &Vec3, best: &mut (f64, usize, Vec3)) {
        match self.nodes[node].kind {
            BvhKind::Leaf { start, end } => {
                for &t in &self.order[start..end] {
                    let [a, b, c] = &self.triangles[t];
                    let q = closest_point_on_triangle(p, a, b, c);
                    let d2 = (q - p).norm_squared();
                    let face = self.face_ids[t];
                    if d2 < best.0 || (d2 == best.0 && face < best.1) {
                        *best = (d2, face, q);
                    }
                }
            }
            BvhKind::Inner { left, right } => {
                let dl = box_distance2(&self.nodes[left], p);
                let dr = box_distance2(&self.nodes[right], p);
                let (first, d_first, second, d_second) = if dl <= dr {
                    (left, dl, right, dr)
                } else {
                    (right, dr, left, dl)
                };
                if d_first <= best.0 {
                    self.closest_in(first, p, best);
                }
                if d_second <= best.0 {
                    self.closest_in(second, p, best);
                }
            }
        }
    }
}

fn box_distance2(node: &BvhNode, p: &Vec3) -> f64 {
    let mut d2 = 0.0;
    for k in 0..3 {
        let v = if p[k] < node.lo[k] {
            node.lo[k] - p[k]
        } else if p[k] > node.hi[k] {
            p[k] - node.hi[k]
        } else {
            0.0
        };
        d2 += v * v;
    }
    d2
}

/// Exact minimum Euclidean distance from `point` to the surface of `mesh`.
///
/// Builds a throwaway index; repeated queries should go through
/// [`SurfaceIndex`].
pub fn point_to_mesh_distance(point: &Vec3, mesh: &TriMesh) -> Result<f64> {
    if mesh.face_count() == 0 {
        return Err(MorphError::Degenerate("mesh has no faces".into()));
    }
    if mesh.face_count() <= 64 {
        return Ok(mesh
            .faces()
            .iter()
            .map(|f| {
                let [a, b, c] = f.map(|i| mesh.vertices()[i]);
                (closest_point_on_triangle(point, &a, &b, &c) - point).norm()
            })
            .fold(f64::INFINITY, f64::min));
    }
    Ok(SurfaceIndex::new(mesh)?.distance(point))
}
