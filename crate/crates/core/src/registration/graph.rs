use crate::error::{MorphError, Result};
use crate::mesh::{SpatialIndex, TriMesh, Vec3};

/// Undirected neighbourhood edges between template vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct StiffnessGraph {
    /// Sorted `(i, j)` pairs with `i < j`.
    edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
}

impl StiffnessGraph {
    /// Validates and normalises an edge list: pairs are reordered to
    /// `i < j` and deduplicated; self-loops are rejected.
    pub fn from_edges(vertex_count: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut list = Vec::new();
        for (a, b) in edges {
            if a == b {
                return Err(MorphError::Validation(format!("self-loop at vertex {a}")));
            }
            if a.max(b) >= vertex_count {
                return Err(MorphError::Validation(format!(
                    "edge ({a}, {b}) outside {vertex_count} vertices"
                )));
            }
            list.push((a.min(b), a.max(b)));
        }
        list.sort_unstable();
        list.dedup();
        let mut neighbors = vec![Vec::new(); vertex_count];
        for &(a, b) in &list {
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        for n in &mut neighbors {
            n.sort_unstable();
        }
        Ok(Self { edges: list, neighbors })
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn vertex_count(&self) -> usize {
        self.neighbors.len()
    }

    /// Vertices without any edge.
    pub fn isolated(&self) -> Vec<usize> {
        (0..self.neighbors.len())
            .filter(|&i| self.neighbors[i].is_empty())
            .collect()
    }
}

/// Default neighbourhood radius: 5% of the bounding-box diagonal.
pub fn default_stiffness_radius(template: &TriMesh) -> f64 {
    0.05 * template.bounding_box_diagonal()
}

/// All vertex pairs at distance `<= radius`. Vertices left without a
/// neighbour are reported through the log, not as an error.
pub fn build_stiffness_edges(template: &TriMesh, radius: f64) -> Result<StiffnessGraph> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(MorphError::Parameter(format!(
            "stiffness radius must be positive, got {radius}"
        )));
    }
    let points: &[Vec3] = template.vertices();
    let index = SpatialIndex::new(points);
    let mut edges = Vec::new();
    for (i, p) in points.iter().enumerate() {
        for j in index.within_radius(p, radius) {
            if j > i {
                edges.push((i, j));
            }
        }
    }
    let graph = StiffnessGraph::from_edges(points.len(), edges)?;
    let isolated = graph.isolated();
    if !isolated.is_empty() {
        log::warn!(
            "stiffness radius {radius} leaves {} vertices without neighbours (first: {})",
            isolated.len(),
            isolated[0]
        );
    }
    Ok(graph)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud_mesh(points: Vec<Vec3>) -> TriMesh {
        TriMesh::new(points, vec![]).unwrap()
    }

    #[test]
    fn inclusion_and_exclusion() {
        let near = cloud_mesh(vec![Vec3::zeros(), Vec3::new(0.5, 0.0, 0.0)]);
        assert_eq!(build_stiffness_edges(&near, 1.0).unwrap().edges(), &[(0, 1)]);
        let far = cloud_mesh(vec![Vec3::zeros(), Vec3::new(2.0, 0.0, 0.0)]);
        let g = build_stiffness_edges(&far, 1.0).unwrap();
        assert!(g.edges().is_empty());
        assert_eq!(g.isolated(), vec![0, 1]);
    }

    #[test]
    fn matches_exhaustive_pair_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let pts: Vec<Vec3> = (0..200)
            .map(|_| Vec3::new(rng.random(), rng.random(), rng.random()))
            .collect();
        let mut oracle = Vec::new();
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                if (pts[i] - pts[j]).norm() <= 0.3 {
                    oracle.push((i, j));
                }
            }
        }
        let g = build_stiffness_edges(&cloud_mesh(pts), 0.3).unwrap();
        assert_eq!(g.edges(), &oracle[..]);
        for &(a, b) in g.edges() {
            assert!(g.neighbors(a).contains(&b) && g.neighbors(b).contains(&a));
        }
    }

    #[test]
    fn bad_edges_rejected() {
        assert!(StiffnessGraph::from_edges(3, [(1, 1)]).is_err());
        assert!(StiffnessGraph::from_edges(3, [(1, 3)]).is_err());
        assert_eq!(
            StiffnessGraph::from_edges(3, [(2, 1), (1, 2)]).unwrap().edges(),
            &[(1, 2)]
        );
        assert!(build_stiffness_edges(&cloud_mesh(vec![]), 0.0).is_err());
    }
}
