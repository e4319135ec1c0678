use nalgebra::{Matrix3x4, Vector4};

use super::graph::StiffnessGraph;
use super::parts::PartSegmentation;
use crate::error::{MorphError, Result};
use crate::mesh::{SpatialIndex, SurfaceHit, SurfaceIndex, TriMesh, Vec3};

/// One 3×4 affine transform per template vertex; vertex `v` maps to
/// `X·[v; 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexTransformField {
    transforms: Vec<Matrix3x4<f64>>,
}

impl VertexTransformField {
    pub fn identity(n: usize) -> Self {
        Self {
            transforms: vec![Matrix3x4::identity(); n],
        }
    }

    pub fn new(transforms: Vec<Matrix3x4<f64>>) -> Result<Self> {
        if let Some(i) = transforms.iter().position(|x| !x.iter().all(|c| c.is_finite())) {
            return Err(MorphError::Validation(format!("transform {i} has a non-finite entry")));
        }
        Ok(Self { transforms })
    }

    pub fn len(&self) -> usize {
        self.transforms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transforms.is_empty()
    }

    pub fn get(&self, i: usize) -> &Matrix3x4<f64> {
        &self.transforms[i]
    }

    pub fn transforms(&self) -> &[Matrix3x4<f64>] {
        &self.transforms
    }

    pub fn apply(&self, i: usize, v: &Vec3) -> Vec3 {
        self.transforms[i] * Vector4::new(v.x, v.y, v.z, 1.0)
    }

    pub fn deform(&self, mesh: &TriMesh) -> Vec<Vec3> {
        mesh.vertices()
            .iter()
            .enumerate()
            .map(|(i, v)| self.apply(i, v))
            .collect()
    }

    /// Largest Frobenius distance between any two transforms.
    pub fn max_pairwise_difference(&self) -> f64 {
        let mut best: f64 = 0.0;
        // bounded by twice the largest distance to the first transform,
        // but the exact maximum is cheap enough at template sizes
        for i in 0..self.transforms.len() {
            for j in i + 1..self.transforms.len() {
                best = best.max((self.transforms[i] - self.transforms[j]).norm());
            }
        }
        best
    }
}

/// Target surface split by part.
///
/// Target vertices take the part of their nearest coarse template vertex;
/// part `p`'s region is every target triangle with at least one vertex
/// labelled `p`, or the whole target when there is none.
pub struct PartRegions {
    regions: Vec<SurfaceIndex>,
    whole: SurfaceIndex,
    target_labels: Vec<usize>,
}

impl PartRegions {
    pub fn new(coarse: &TriMesh, target: &TriMesh, parts: &PartSegmentation) -> Result<Self> {
        if coarse.vertex_count() != parts.vertex_count() {
            return Err(MorphError::Validation(format!(
                "segmentation labels {} vertices but the mesh has {}",
                parts.vertex_count(),
                coarse.vertex_count()
            )));
        }
        let whole = SurfaceIndex::new(target)?;
        let index = SpatialIndex::new(coarse.vertices());
        let target_labels: Vec<usize> = target
            .vertices()
            .iter()
            .map(|v| index.nearest(v).map(|(i, _)| parts.part_of(i)))
            .collect::<Result<_>>()?;
        let mut regions = Vec::with_capacity(parts.parts().len());
        for p in 0..parts.parts().len() {
            let faces: Vec<usize> = target
                .faces()
                .iter()
                .enumerate()
                .filter(|(_, f)| f.iter().any(|&v| target_labels[v] == p))
                .map(|(k, _)| k)
                .collect();
            regions.push(if faces.is_empty() {
                SurfaceIndex::new(target)?
            } else {
                SurfaceIndex::from_faces(target, faces)?
            });
        }
        Ok(Self {
            regions,
            whole,
            target_labels,
        })
    }

    pub fn closest(&self, part: usize, p: &Vec3) -> SurfaceHit {
        self.regions[part].closest(p)
    }

    pub fn whole(&self) -> &SurfaceIndex {
        &self.whole
    }

    pub fn target_labels(&self) -> &[usize] {
        &self.target_labels
    }
}

/// Both readings of the registration objective at one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NicpCost {
    /// `Σ w·dist`, unsquared.
    pub data: f64,
    /// `Σ_i λ_p(i) Σ_{j∈N(i)} ‖X_i − X_j‖_F`, unsquared.
    pub stiffness: f64,
    /// `data + stiffness`: the objective as written.
    pub literal: f64,
    /// `Σ w·dist² + Σ_i λ_p(i) Σ_{j∈N(i)} ‖X_i − X_j‖²_F`: the least-squares
    /// surrogate the solver minimises.
    pub surrogate: f64,
}

pub fn nicp_cost(
    state: &VertexTransformField,
    coarse: &TriMesh,
    target: &TriMesh,
    parts: &PartSegmentation,
    graph: &StiffnessGraph,
) -> Result<NicpCost> {
    let regions = PartRegions::new(coarse, target, parts)?;
    nicp_cost_with_regions(state, coarse, &regions, parts, graph)
}

pub fn nicp_cost_with_regions(
    state: &VertexTransformField,
    coarse: &TriMesh,
    regions: &PartRegions,
    parts: &PartSegmentation,
    graph: &StiffnessGraph,
) -> Result<NicpCost> {
    let n = coarse.vertex_count();
    if state.len() != n || parts.vertex_count() != n || graph.vertex_count() != n {
        return Err(MorphError::Validation(format!(
            "field ({}), segmentation ({}) and graph ({}) must match the mesh's {n} vertices",
            state.len(),
            parts.vertex_count(),
            graph.vertex_count()
        )));
    }
    let mut data = 0.0;
    let mut data2 = 0.0;
    let mut stiff = 0.0;
    let mut stiff2 = 0.0;
    for i in 0..n {
        let w = parts.weights()[i];
        let x = state.apply(i, &coarse.vertices()[i]);
        let d = regions.closest(parts.part_of(i), &x).distance;
        data += w * d;
        data2 += w * d * d;
        let lambda = parts.lambda_of(i);
        for &j in graph.neighbors(i) {
            let diff = (state.get(i) - state.get(j)).norm();
            stiff += lambda * diff;
            stiff2 += lambda * diff * diff;
        }
    }
    Ok(NicpCost {
        data,
        stiffness: stiff,
        literal: data + stiff,
        surrogate: data2 + stiff2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registration::Part;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Closest point by plane projection plus explicit edge clamping; shares
    /// no code with the library routine.
    fn oracle_triangle_distance(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
        let n = (b - a).cross(&(c - a));
        let n2 = n.norm_squared();
        let q = p - n * ((p - a).dot(&n) / n2);
        let inside = [(a, b), (b, c), (c, a)]
            .iter()
            .all(|(u, v)| (*v - *u).cross(&(q - *u)).dot(&n) >= 0.0);
        if inside {
            return (p - q).norm();
        }
        let seg = |u: &Vec3, v: &Vec3| {
            let d = v - u;
            let t = ((p - u).dot(&d) / d.norm_squared()).clamp(0.0, 1.0);
            (p - (u + d * t)).norm()
        };
        seg(a, b).min(seg(b, c)).min(seg(c, a))
    }

    /// Straight-from-definition evaluation with brute-force labelling.
    fn oracle_cost(
        x: &[Matrix3x4<f64>],
        coarse: &TriMesh,
        target: &TriMesh,
        parts: &PartSegmentation,
        edges: &[(usize, usize)],
    ) -> (f64, f64) {
        let n = coarse.vertex_count();
        let labels: Vec<usize> = target
            .vertices()
            .iter()
            .map(|t| {
                let mut best = (f64::INFINITY, 0);
                for (i, v) in coarse.vertices().iter().enumerate() {
                    let d = (t - v).norm();
                    if d < best.0 {
                        best = (d, i);
                    }
                }
                parts.labels()[best.1]
            })
            .collect();
        let mut total = 0.0;
        let mut surrogate = 0.0;
        for i in 0..n {
            let p = parts.labels()[i];
            let v = coarse.vertices()[i];
            let moved = x[i] * Vector4::new(v.x, v.y, v.z, 1.0);
            let mut faces: Vec<&[usize; 3]> = target
                .faces()
                .iter()
                .filter(|f| f.iter().any(|&k| labels[k] == p))
                .collect();
            if faces.is_empty() {
                faces = target.faces().iter().collect();
            }
            let d = faces
                .iter()
                .map(|f| {
                    let t = target.vertices();
                    oracle_triangle_distance(&moved, &t[f[0]], &t[f[1]], &t[f[2]])
                })
                .fold(f64::INFINITY, f64::min);
            let w = parts.weights()[i];
            total += w * d;
            surrogate += w * d * d;
            for &(a, b) in edges {
                if a == i || b == i {
                    let j = if a == i { b } else { a };
                    let diff: f64 = (0..3)
                        .flat_map(|r| (0..4).map(move |c| (r, c)))
                        .map(|(r, c)| (x[i][(r, c)] - x[j][(r, c)]).powi(2))
                        .sum::<f64>();
                    total += parts.parts()[p].lambda * diff.sqrt();
                    surrogate += parts.parts()[p].lambda * diff;
                }
            }
        }
        (total, surrogate)
    }

    fn grid(n: usize, rng: &mut ChaCha8Rng, lift: f64) -> TriMesh {
        let mut v = Vec::new();
        for i in 0..n {
            for j in 0..n {
                v.push(Vec3::new(i as f64, j as f64, lift + 0.2 * rng.random::<f64>()) / n as f64);
            }
        }
        let mut f = Vec::new();
        for i in 0..n - 1 {
            for j in 0..n - 1 {
                let k = i * n + j;
                f.push([k, k + n, k + 1]);
                f.push([k + 1, k + n, k + n + 1]);
            }
        }
        TriMesh::new(v, f).unwrap()
    }

    fn instance(seed: u64) -> (TriMesh, TriMesh, PartSegmentation, StiffnessGraph, VertexTransformField) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // 6x5 = 30 template vertices
        let mut coarse = grid(6, &mut rng, 0.0);
        let keep: Vec<Vec3> = coarse.vertices()[..30].to_vec();
        let faces: Vec<[usize; 3]> = coarse
            .faces()
            .iter()
            .filter(|f| f.iter().all(|&k| k < 30))
            .copied()
            .collect();
        coarse = TriMesh::new(keep, faces).unwrap();
        let target = grid(7, &mut rng, 0.1);
        let parts = PartSegmentation::new(
            vec![
                Part::new("a", rng.random_range(0.0..3.0)),
                Part::new("b", rng.random_range(0.0..3.0)),
                Part::new("c", 2.0),
            ],
            (0..30)
                .map(|i| {
                    if i < 12 {
                        0
                    } else if i < 24 {
                        1
                    } else {
                        2
                    }
                })
                .collect(),
            Some((0..30).map(|_| rng.random_range(0.5..1.5)).collect()),
        )
        .unwrap();
        let graph = super::super::graph::build_stiffness_edges(&coarse, 0.3).unwrap();
        let field = VertexTransformField::new(
            (0..30)
                .map(|_| Matrix3x4::identity() + Matrix3x4::from_fn(|_, _| rng.random_range(-0.05..0.05)))
                .collect(),
        )
        .unwrap();
        (coarse, target, parts, graph, field)
    }

    #[test]
    fn matches_independent_evaluator() {
        for seed in 0..10 {
            let (coarse, target, parts, graph, field) = instance(seed);
            let got = nicp_cost(&field, &coarse, &target, &parts, &graph).unwrap();
            let (lit, sur) = oracle_cost(field.transforms(), &coarse, &target, &parts, graph.edges());
            assert!((got.literal - lit).abs() < 1e-10, "{} vs {lit}", got.literal);
            assert!((got.surrogate - sur).abs() < 1e-10);
        }
    }

    #[test]
    fn on_surface_identity_costs_nothing() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mesh = grid(5, &mut rng, 0.0);
        let parts = PartSegmentation::uniform(mesh.vertex_count(), 2.0).unwrap();
        let graph = super::super::graph::build_stiffness_edges(&mesh, 0.5).unwrap();
        let field = VertexTransformField::identity(mesh.vertex_count());
        let c = nicp_cost(&field, &mesh, &mesh, &parts, &graph).unwrap();
        assert_eq!(c.literal, 0.0);
        assert_eq!(c.surrogate, 0.0);
    }

    #[test]
    fn constant_field_has_only_data_term() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mesh = grid(5, &mut rng, 0.0);
        let lifted = mesh.translated(&Vec3::new(0.0, 0.0, 0.5));
        let parts = PartSegmentation::uniform(mesh.vertex_count(), 7.0).unwrap();
        let graph = super::super::graph::build_stiffness_edges(&mesh, 0.5).unwrap();
        let field = VertexTransformField::identity(mesh.vertex_count());
        let c = nicp_cost(&field, &lifted, &mesh, &parts, &graph).unwrap();
        assert_eq!(c.stiffness, 0.0);
        let surface = SurfaceIndex::new(&mesh).unwrap();
        let expected: f64 = lifted.vertices().iter().map(|v| surface.distance(v)).sum();
        assert!((c.literal - expected).abs() < 1e-12);
    }

    #[test]
    fn size_mismatch_rejected() {
        let (coarse, target, parts, graph, _) = instance(3);
        let field = VertexTransformField::identity(5);
        assert!(matches!(
            nicp_cost(&field, &coarse, &target, &parts, &graph),
            Err(MorphError::Validation(_))
        ));
    }
}
