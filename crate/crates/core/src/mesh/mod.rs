//! Geometry foundation: triangle meshes, point clouds, landmarks, spatial
//! queries and the clean-up primitives used when fusing scans.

mod cleanup;
mod distance;
pub mod io;
mod landmarks;
mod spatial;

pub use cleanup::{merge_vertices, remove_isolated};
pub use distance::{closest_point_on_triangle, point_to_mesh_distance, SurfaceHit, SurfaceIndex};
pub use io::{load_mesh, load_point_cloud, save_mesh, save_point_cloud, MeshFormat};
pub use landmarks::{Landmark, LandmarkPoint, LandmarkScheme, LandmarkSet, LandmarkSet2, LandmarkSet3};
pub use spatial::SpatialIndex;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{MorphError, Result};
use crate::fusion::RigidTransform;

pub type Vec3 = Vector3<f64>;

const NORMAL_TOLERANCE: f64 = 1e-6;

/// Indexed triangle surface.
///
/// Construction validates that faces reference existing, distinct vertices,
/// that coordinates are finite and that stored normals are unit length. Once
/// built a mesh is never mutated in place; operations return new meshes.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    vertices: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
    normals: Option<Vec<Vec3>>,
}

impl TriMesh {
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        Self::with_normals(vertices, faces, None)
    }

    pub fn with_normals(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>, normals: Option<Vec<Vec3>>) -> Result<Self> {
        for (i, v) in vertices.iter().enumerate() {
            if !v.iter().all(|c| c.is_finite()) {
                return Err(MorphError::Validation(format!(
                    "vertex {i} has a non-finite coordinate"
                )));
            }
        }
        for (fi, f) in faces.iter().enumerate() {
            for &idx in f {
                if idx >= vertices.len() {
                    return Err(MorphError::IndexOutOfRange {
                        face: fi,
                        index: idx,
                        count: vertices.len(),
                    });
                }
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(MorphError::Validation(format!(
                    "face {fi} references the same vertex twice: {f:?}"
                )));
            }
        }
        if let Some(ns) = &normals {
            if ns.len() != vertices.len() {
                return Err(MorphError::Validation(format!(
                    "{} normals for {} vertices",
                    ns.len(),
                    vertices.len()
                )));
            }
            for (i, n) in ns.iter().enumerate() {
                if (n.norm() - 1.0).abs() > NORMAL_TOLERANCE {
                    return Err(MorphError::Validation(format!("normal {i} has length {}", n.norm())));
                }
            }
        }
        Ok(Self {
            vertices,
            faces,
            normals,
        })
    }

    pub fn empty() -> Self {
        Self {
            vertices: Vec::new(),
            faces: Vec::new(),
            normals: None,
        }
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn normals(&self) -> Option<&[Vec3]> {
        self.normals.as_deref()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    /// Same topology, new positions. Stored normals are dropped since they no
    /// longer describe the surface.
    pub fn with_vertices(&self, vertices: Vec<Vec3>) -> Result<Self> {
        if vertices.len() != self.vertices.len() {
            return Err(MorphError::Validation(format!(
                "expected {} vertices, got {}",
                self.vertices.len(),
                vertices.len()
            )));
        }
        if !vertices.iter().all(|v| v.iter().all(|c| c.is_finite())) {
            return Err(MorphError::Validation("non-finite vertex".into()));
        }
        Ok(Self {
            vertices,
            faces: self.faces.clone(),
            normals: None,
        })
    }

    pub fn transformed(&self, t: &RigidTransform) -> Self {
        let vertices = self.vertices.iter().map(|v| t.apply(v)).collect();
        let normals = self
            .normals
            .as_ref()
            .map(|ns| ns.iter().map(|n| (t.rotation() * n).normalize()).collect());
        Self {
            vertices,
            faces: self.faces.clone(),
            normals,
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            vertices: self.vertices.iter().map(|v| v * s).collect(),
            faces: self.faces.clone(),
            normals: self.normals.clone(),
        }
    }

    pub fn translated(&self, offset: &Vec3) -> Self {
        Self {
            vertices: self.vertices.iter().map(|v| v + offset).collect(),
            faces: self.faces.clone(),
            normals: self.normals.clone(),
        }
    }

    /// Area-weighted vertex normals. Vertices touched by no face get +z.
    pub fn vertex_normals(&self) -> Vec<Vec3> {
        let mut acc = vec![Vec3::zeros(); self.vertices.len()];
        for f in &self.faces {
            let [a, b, c] = f.map(|i| self.vertices[i]);
            let n = (b - a).cross(&(c - a));
            for &i in f {
                acc[i] += n;
            }
        }
        acc.into_iter()
            .map(|n| {
                let len = n.norm();
                if len > 0.0 {
                    n / len
                } else {
                    Vec3::z()
                }
            })
            .collect()
    }

    pub fn with_computed_normals(&self) -> Self {
        Self {
            vertices: self.vertices.clone(),
            faces: self.faces.clone(),
            normals: Some(self.vertex_normals()),
        }
    }

    pub fn bounding_box(&self) -> Option<(Vec3, Vec3)> {
        bounding_box(&self.vertices)
    }

    pub fn bounding_box_diagonal(&self) -> f64 {
        self.bounding_box().map_or(0.0, |(lo, hi)| (hi - lo).norm())
    }

    /// Mean length over unique edges.
    pub fn mean_edge_length(&self) -> f64 {
        let edges = self.edges();
        if edges.is_empty() {
            return 0.0;
        }
        edges
            .iter()
            .map(|&(a, b)| (self.vertices[a] - self.vertices[b]).norm())
            .sum::<f64>()
            / edges.len() as f64
    }

    /// Unique undirected edges as `(low, high)` pairs, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut edges: Vec<(usize, usize)> = self
            .faces
            .iter()
            .flat_map(|f| [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])])
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    pub fn to_point_cloud(&self) -> PointCloud {
        PointCloud::new(self.vertices.clone())
    }
}

/// Which camera group produced a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ViewTag {
    Left,
    Middle,
    Right,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    points: Vec<Vec3>,
    views: Option<Vec<ViewTag>>,
}

impl PointCloud {
    /// Panics on non-finite coordinates; use [`PointCloud::try_new`] for
    /// untrusted input.
    pub fn new(points: Vec<Vec3>) -> Self {
        Self::try_new(points).expect("point cloud coordinates must be finite")
    }

    pub fn try_new(points: Vec<Vec3>) -> Result<Self> {
        if let Some(i) = points.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(MorphError::Validation(format!("point {i} has a non-finite coordinate")));
        }
        Ok(Self { points, views: None })
    }

    pub fn with_view(mut self, tag: ViewTag) -> Self {
        self.views = Some(vec![tag; self.points.len()]);
        self
    }

    pub fn with_views(mut self, views: Vec<ViewTag>) -> Result<Self> {
        if views.len() != self.points.len() {
            return Err(MorphError::Validation(format!(
                "{} view tags for {} points",
                views.len(),
                self.points.len()
            )));
        }
        self.views = Some(views);
        Ok(self)
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn views(&self) -> Option<&[ViewTag]> {
        self.views.as_deref()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn transformed(&self, t: &RigidTransform) -> Self {
        Self {
            points: self.points.iter().map(|p| t.apply(p)).collect(),
            views: self.views.clone(),
        }
    }

    /// Subset by index, preserving tags.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            views: self.views.as_ref().map(|vs| indices.iter().map(|&i| vs[i]).collect()),
        }
    }

    /// Concatenates clouds. Tags are kept only when every part carries them.
    pub fn concat(parts: &[&PointCloud]) -> Self {
        let points = parts.iter().flat_map(|c| c.points.iter().copied()).collect();
        let views = if parts.iter().all(|c| c.views.is_some()) {
            Some(
                parts
                    .iter()
                    .flat_map(|c| c.views.as_ref().unwrap().iter().copied())
                    .collect(),
            )
        } else {
            None
        };
        Self { points, views }
    }

    pub fn diameter_estimate(&self) -> f64 {
        bounding_box(&self.points).map_or(0.0, |(lo, hi)| (hi - lo).norm())
    }
}

pub fn bounding_box(points: &[Vec3]) -> Option<(Vec3, Vec3)> {
    let first = points.first()?;
    let mut lo = *first;
    let mut hi = *first;
    for p in points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    Some((lo, hi))
}

pub fn centroid(points: &[Vec3]) -> Vec3 {
    if points.is_empty() {
        return Vec3::zeros();
    }
    points.iter().sum::<Vec3>() / points.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_range_face() {
        let err = TriMesh::new(vec![Vec3::zeros(); 3], vec![[0, 1, 5]]).unwrap_err();
        assert!(matches!(err, MorphError::IndexOutOfRange { index: 5, .. }));
    }

    #[test]
    fn rejects_repeated_vertex_in_face() {
        assert!(TriMesh::new(vec![Vec3::zeros(); 3], vec![[0, 1, 1]]).is_err());
    }

    #[test]
    fn rejects_non_unit_normals() {
        let vs = vec![Vec3::zeros(), Vec3::x(), Vec3::y()];
        let ns = vec![Vec3::z(), Vec3::z(), Vec3::z() * 1.1];
        assert!(TriMesh::with_normals(vs, vec![[0, 1, 2]], Some(ns)).is_err());
    }

    #[test]
    fn non_finite_cloud_is_rejected() {
        assert!(PointCloud::try_new(vec![Vec3::new(f64::NAN, 0.0, 0.0)]).is_err());
    }

    #[test]
    fn edges_are_unique() {
        let vs = vec![Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::new(1.0, 1.0, 0.0)];
        let m = TriMesh::new(vs, vec![[0, 1, 2], [1, 3, 2]]).unwrap();
        assert_eq!(m.edges(), vec![(0, 1), (0, 2), (1, 2), (1, 3), (2, 3)]);
    }
}
