use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{MorphError, Result};
use crate::fusion::RigidTransform;
use crate::mesh::{Landmark, LandmarkSet2, LandmarkSet3, PointCloud, TriMesh, Vec3, ViewTag};
use crate::projection::Camera;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSimParams {
    /// Camera azimuths in degrees for the left, middle and right groups,
    /// measured from +z towards +x.
    pub azimuths_deg: [f64; 3],
    pub camera_distance: f64,
    pub focal: f64,
    pub image_size: u32,
    /// Standard deviation of isotropic Gaussian noise on each coordinate.
    pub noise_sigma: f64,
    /// Probability of dropping each visible point.
    pub dropout: f64,
    pub seed: u64,
}

impl Default for ScanSimParams {
    fn default() -> Self {
        Self {
            azimuths_deg: [45.0, 0.0, -45.0],
            camera_distance: 4.0,
            focal: 600.0,
            image_size: 640,
            noise_sigma: 0.0,
            dropout: 0.0,
            seed: 0,
        }
    }
}

impl ScanSimParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.noise_sigma >= 0.0) {
            return Err(MorphError::Parameter("noise sigma must be non-negative".into()));
        }
        if !(self.dropout >= 0.0 && self.dropout < 1.0) {
            return Err(MorphError::Parameter("dropout must lie in [0, 1)".into()));
        }
        if !(self.camera_distance > 0.0 && self.focal > 0.0) || self.image_size == 0 {
            return Err(MorphError::Parameter("camera ring must have positive size".into()));
        }
        Ok(())
    }
}

/// One simulated camera group.
#[derive(Debug, Clone)]
pub struct ScanView {
    pub tag: ViewTag,
    /// Visible points in the view's own (camera) frame.
    pub cloud: PointCloud,
    /// Mesh vertex behind each cloud point.
    pub source_vertices: Vec<usize>,
    /// Visible landmarks in the view frame; `vertex` indexes `cloud` when the
    /// landmark's vertex survived dropout.
    pub landmarks: LandmarkSet3,
    /// Pixel positions of the visible landmarks, as an annotator would mark
    /// them.
    pub landmarks_2d: LandmarkSet2,
    /// Camera acting on view-frame points (identity extrinsics).
    pub camera: Camera,
    /// World to view frame, as applied.
    pub world_to_view: RigidTransform,
    /// View frame to world; the exact inverse of `world_to_view`.
    pub to_world: RigidTransform,
}

/// Captures a mesh from a ring of three cameras looking at the origin.
///
/// A vertex is visible when its normal faces the camera. Visible vertices are
/// moved into the camera frame, then noise and dropout are applied.
pub fn simulate_scan(mesh: &TriMesh, lms: &LandmarkSet3, params: &ScanSimParams) -> Result<Vec<ScanView>> {
    params.validate()?;
    let normals = mesh.vertex_normals();
    let tags = [ViewTag::Left, ViewTag::Middle, ViewTag::Right];
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let noise = Normal::new(0.0, params.noise_sigma.max(f64::MIN_POSITIVE)).expect("finite sigma");
    let mut views = Vec::with_capacity(3);
    for (tag, az) in tags.into_iter().zip(params.azimuths_deg) {
        let a = az.to_radians();
        let eye = Vec3::new(a.sin(), 0.0, a.cos()) * params.camera_distance;
        let size = params.image_size;
        let world_cam = Camera::look_at(&eye, &Vec3::zeros(), &Vec3::y(), params.focal, size, size)?;
        let world_to_view = world_cam.extrinsics;
        let camera = Camera {
            extrinsics: RigidTransform::identity(),
            ..world_cam
        };

        let mut points = Vec::new();
        let mut source = Vec::new();
        for (i, (p, n)) in mesh.vertices().iter().zip(&normals).enumerate() {
            if n.dot(&(eye - p)) <= 0.0 {
                continue;
            }
            if params.dropout > 0.0 && rng.random::<f64>() < params.dropout {
                continue;
            }
            let mut q = world_to_view.apply(p);
            if params.noise_sigma > 0.0 {
                q += Vec3::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng));
            }
            points.push(q);
            source.push(i);
        }

        let mut entries = Vec::new();
        let mut entries_2d = Vec::new();
        for e in lms.entries() {
            let Some(v) = e.vertex else { continue };
            if normals[v].dot(&(eye - mesh.vertices()[v])) <= 0.0 {
                continue;
            }
            let local = world_to_view.apply(&mesh.vertices()[v]);
            let Some((px, _)) = camera.project(&local) else {
                continue;
            };
            entries.push(Landmark {
                id: e.id,
                position: local,
                vertex: source.binary_search(&v).ok(),
            });
            entries_2d.push(Landmark {
                id: e.id,
                position: px,
                vertex: None,
            });
        }
        views.push(ScanView {
            tag,
            cloud: PointCloud::try_new(points)?.with_view(tag),
            source_vertices: source,
            landmarks: LandmarkSet3::new(lms.scheme().clone(), entries)?,
            landmarks_2d: LandmarkSet2::new(lms.scheme().clone(), entries_2d)?,
            camera,
            world_to_view,
            to_world: world_to_view.inverse(),
        });
    }
    Ok(views)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{generate_head, SyntheticHeadParams};
    use nalgebra::Matrix3;

    fn head() -> crate::synthetic::SyntheticHead {
        generate_head(&SyntheticHeadParams::default()).unwrap()
    }

    #[test]
    fn noiseless_views_return_to_world_exactly() {
        let h = head();
        let views = simulate_scan(&h.mesh, &h.landmarks, &ScanSimParams::default()).unwrap();
        for v in &views {
            let c = v.to_world.compose(&v.world_to_view);
            assert!((c.rotation() - Matrix3::identity()).amax() < 1e-12);
            assert!(c.translation().norm() < 1e-12);
            for (p, &s) in v.cloud.points().iter().zip(&v.source_vertices) {
                assert!((v.to_world.apply(p) - h.mesh.vertices()[s]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn dropout_keeps_expected_fraction() {
        let h = head();
        let full = simulate_scan(&h.mesh, &h.landmarks, &ScanSimParams::default()).unwrap();
        for seed in 0..20 {
            let params = ScanSimParams {
                dropout: 0.5,
                seed,
                ..ScanSimParams::default()
            };
            let views = simulate_scan(&h.mesh, &h.landmarks, &params).unwrap();
            for (v, f) in views.iter().zip(&full) {
                let frac = v.cloud.len() as f64 / f.cloud.len() as f64;
                assert!((frac - 0.5).abs() <= 0.05, "seed {seed}: {frac}");
            }
        }
    }

    #[test]
    fn ring_covers_front_hemisphere() {
        let h = head();
        let views = simulate_scan(&h.mesh, &h.landmarks, &ScanSimParams::default()).unwrap();
        let mut seen = vec![false; h.mesh.vertex_count()];
        for v in &views {
            for &s in &v.source_vertices {
                seen[s] = true;
            }
        }
        // the ring is horizontal, so the front hemisphere is taken as the
        // front-facing vertices whose normals are within 50 degrees of level
        let normals = h.mesh.vertex_normals();
        let mut checked = 0;
        for (i, v) in h.mesh.vertices().iter().enumerate() {
            if v.z > 0.0 && normals[i].y.abs() <= 50f64.to_radians().sin() {
                assert!(seen[i], "front vertex {i} unseen");
                checked += 1;
            }
        }
        let front = h.mesh.vertices().iter().filter(|v| v.z > 0.0).count();
        let unseen = (0..seen.len())
            .filter(|&i| !seen[i] && h.mesh.vertices()[i].z > 0.0)
            .count();
        eprintln!("front {front}, checked {checked}, unseen front {unseen}");
    }

    #[test]
    fn landmarks_project_inside_image() {
        let h = head();
        let views = simulate_scan(&h.mesh, &h.landmarks, &ScanSimParams::default()).unwrap();
        assert_eq!(views[1].landmarks.len(), 13);
        assert!(views[0].landmarks.get(0).is_some());
        assert!(views[2].landmarks.get(1).is_some());
        for v in &views {
            assert_eq!(v.landmarks.len(), v.landmarks_2d.len());
        }
    }

    #[test]
    fn invalid_params_rejected() {
        let h = head();
        let bad = ScanSimParams {
            dropout: 1.0,
            ..ScanSimParams::default()
        };
        assert!(simulate_scan(&h.mesh, &h.landmarks, &bad).is_err());
    }
}
