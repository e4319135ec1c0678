use serde::{Deserialize, Serialize};

use crate::error::{MorphError, Result};
use crate::fusion::estimate_rigid_from_landmarks;
use crate::mesh::{LandmarkPoint, LandmarkSet, LandmarkSet3, SurfaceIndex, TriMesh};
use crate::par::map_range;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlignMode {
    #[default]
    Similarity,
    Rigid,
}

/// Which landmark coordinates the NME compares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NmeMode {
    /// Full 3D distances.
    #[default]
    Landmarks3d,
    /// Distances in the x/y image plane of the nose-tip frame.
    Landmarks2d,
}

/// Scales mesh and landmarks about the origin so the eyes are one unit
/// apart. Returns the applied factor.
pub fn normalize_interocular(mesh: &TriMesh, lms: &LandmarkSet3) -> Result<(TriMesh, LandmarkSet3, f64)> {
    let d = (lms.left_eye()? - lms.right_eye()?).norm();
    if !(d > 0.0 && d.is_finite()) {
        return Err(MorphError::Degenerate("eye landmarks coincide".into()));
    }
    let s = 1.0 / d;
    Ok((mesh.scaled(s), lms.map_positions(|p| p * s), s))
}

/// Translates mesh and landmarks so the nose tip is the origin.
pub fn to_nose_frame(mesh: &TriMesh, lms: &LandmarkSet3) -> Result<(TriMesh, LandmarkSet3)> {
    let nose = lms.nose_tip()?;
    Ok((mesh.translated(&-nose), lms.map_positions(|p| p - nose)))
}

/// Maps the prediction onto the ground truth by its landmarks, then moves
/// both frames so the ground-truth nose tip is the origin. Only the
/// prediction is returned; apply [`to_nose_frame`] to the ground truth.
pub fn align_prediction(
    pred: &TriMesh,
    pred_lms: &LandmarkSet3,
    gt_lms: &LandmarkSet3,
    mode: AlignMode,
) -> Result<(TriMesh, LandmarkSet3)> {
    let t = estimate_rigid_from_landmarks(pred_lms, gt_lms, mode == AlignMode::Similarity)?;
    let nose = gt_lms.nose_tip()?;
    let mesh = pred.transformed(&t).translated(&-nose);
    let lms = pred_lms.map_positions(|p| t.apply(p) - nose);
    Ok((mesh, lms))
}

/// Keeps vertices within `r` of the origin and the faces they fully span.
pub fn crop_by_radius(mesh: &TriMesh, r: f64) -> Result<TriMesh> {
    if !(r > 0.0) {
        return Err(MorphError::Parameter(format!("crop radius must be positive, got {r}")));
    }
    let mut remap = vec![usize::MAX; mesh.vertex_count()];
    let mut vertices = Vec::new();
    for (i, v) in mesh.vertices().iter().enumerate() {
        if v.norm() <= r {
            remap[i] = vertices.len();
            vertices.push(*v);
        }
    }
    let faces: Vec<[usize; 3]> = mesh
        .faces()
        .iter()
        .filter(|f| f.iter().all(|&i| remap[i] != usize::MAX))
        .map(|f| [remap[f[0]], remap[f[1]], remap[f[2]]])
        .collect();
    if vertices.is_empty() || (faces.is_empty() && !mesh.faces().is_empty()) {
        return Err(MorphError::EmptyCrop { radius: r });
    }
    TriMesh::new(vertices, faces)
}

fn directional_rms(from: &TriMesh, to: &SurfaceIndex) -> f64 {
    let v = from.vertices();
    let d = map_range(v.len(), |i| to.distance(&v[i]).powi(2));
    (d.iter().sum::<f64>() / v.len() as f64).sqrt()
}

/// Mean of the two directional RMS point-to-surface distances between the
/// crops of `pred` and `gt` at radius `r`.
pub fn armse(pred: &TriMesh, gt: &TriMesh, r: f64) -> Result<f64> {
    let p = crop_by_radius(pred, r)?;
    let g = crop_by_radius(gt, r)?;
    let p_index = SurfaceIndex::new(&p).map_err(|_| MorphError::EmptyCrop { radius: r })?;
    let g_index = SurfaceIndex::new(&g).map_err(|_| MorphError::EmptyCrop { radius: r })?;
    Ok(0.5 * (directional_rms(&g, &p_index) + directional_rms(&p, &g_index)))
}

/// `√(w·h)` of the axis-aligned box around the first two landmark
/// coordinates.
pub fn landmark_bbox_size<P: LandmarkPoint>(lms: &LandmarkSet<P>) -> f64 {
    let (mut lo, mut hi) = ((f64::INFINITY, f64::INFINITY), (f64::NEG_INFINITY, f64::NEG_INFINITY));
    for e in lms.entries() {
        let (x, y) = e.position.xy();
        lo = (lo.0.min(x), lo.1.min(y));
        hi = (hi.0.max(x), hi.1.max(y));
    }
    if lms.is_empty() {
        return 0.0;
    }
    ((hi.0 - lo.0) * (hi.1 - lo.1)).sqrt()
}

/// Mean landmark error over shared ids divided by `bbox_size`.
pub fn nme<P: LandmarkPoint>(pred: &LandmarkSet<P>, gt: &LandmarkSet<P>, bbox_size: f64) -> Result<f64> {
    if pred.scheme() != gt.scheme() {
        return Err(MorphError::Validation(format!(
            "landmark schemes differ: {} vs {}",
            pred.scheme().id,
            gt.scheme().id
        )));
    }
    if !(bbox_size > 0.0 && bbox_size.is_finite()) {
        return Err(MorphError::Parameter(format!(
            "bounding-box size must be positive, got {bbox_size}"
        )));
    }
    let pairs = pred.common_pairs(gt);
    if pairs.is_empty() {
        return Err(MorphError::Validation("no landmark ids in common".into()));
    }
    let total: f64 = pairs.iter().map(|(_, p, q)| p.distance(q)).sum();
    Ok(total / pairs.len() as f64 / bbox_size)
}

/// Landmarks reduced to their x/y coordinates.
pub fn planar(lms: &LandmarkSet3) -> crate::mesh::LandmarkSet2 {
    lms.map_positions(|p| nalgebra::Vector2::new(p.x, p.y))
}

pub(crate) fn nme_for_mode(pred: &LandmarkSet3, gt: &LandmarkSet3, bbox: Option<f64>, mode: NmeMode) -> Result<f64> {
    let b = bbox.unwrap_or_else(|| landmark_bbox_size(gt));
    match mode {
        NmeMode::Landmarks3d => nme(pred, gt, b),
        NmeMode::Landmarks2d => nme(&planar(pred), &planar(gt), b),
    }
}
