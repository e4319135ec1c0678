use serde::{Deserialize, Serialize};

use super::icp::{icp_refine_with_target, IcpParams, IcpTarget};
use super::rigid::{estimate_rigid_from_landmarks, fit_similarity, RigidTransform};
use crate::error::{MorphError, Result};
use crate::mesh::{merge_vertices, remove_isolated, Landmark, LandmarkSet3, PointCloud, SpatialIndex, Vec3, ViewTag};
use crate::par::map_range;

/// One camera group's contribution: its cloud and the 3D landmarks it sees,
/// both in that view's own frame.
#[derive(Debug, Clone)]
pub struct ViewScan {
    pub cloud: PointCloud,
    pub landmarks: LandmarkSet3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionParams {
    pub icp: IcpParams,
    pub merge_epsilon: f64,
    /// Radius for isolated-point removal; `None` derives it as 2.5× the
    /// median nearest-neighbour spacing of the merged cloud.
    pub isolation_radius: Option<f64>,
    pub min_neighbors: usize,
    /// Skip an empty side view instead of failing.
    pub allow_missing_view: bool,
    /// Cross-view correspondences feeding each seam vertex's local fit.
    pub local_k: usize,
}

impl Default for FusionParams {
    fn default() -> Self {
        Self {
            icp: IcpParams::default(),
            merge_epsilon: 1e-3,
            isolation_radius: None,
            min_neighbors: 2,
            allow_missing_view: false,
            local_k: 12,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FusionOutcome {
    /// Fused cloud in the middle view's frame, tagged by source view.
    pub cloud: PointCloud,
    /// Middle landmarks plus those seen only from the sides; `vertex` points
    /// into the fused cloud.
    pub landmarks: LandmarkSet3,
    /// Side-to-middle transforms after ICP, absent for skipped views.
    pub left_to_middle: Option<RigidTransform>,
    pub right_to_middle: Option<RigidTransform>,
    /// Side vertices moved by the per-vertex refinement.
    pub seam_vertices: usize,
}

/// Fuses three views into the middle view's frame.
///
/// Each side is seeded from shared landmarks, refined by ICP against the
/// middle cloud, and its seam vertices are then adjusted one by one with a
/// local rigid fit. The union is merged at `merge_epsilon` and stripped of
/// isolated points.
pub fn fuse_views(
    left: &ViewScan,
    middle: &ViewScan,
    right: &ViewScan,
    params: &FusionParams,
) -> Result<FusionOutcome> {
    if !(params.merge_epsilon > 0.0) {
        return Err(MorphError::Parameter("merge_epsilon must be positive".into()));
    }
    if params.local_k < 3 {
        return Err(MorphError::Parameter("local_k must be at least 3".into()));
    }
    params.icp.validate()?;
    left.landmarks.ensure_same_scheme(&middle.landmarks)?;
    right.landmarks.ensure_same_scheme(&middle.landmarks)?;
    if middle.cloud.is_empty() {
        return Err(MorphError::MissingView("middle"));
    }

    let target = IcpTarget::new(&middle.cloud, params.icp.metric)?;
    let mut parts = vec![middle.cloud.clone().with_view(ViewTag::Middle)];
    let mut landmarks = middle.landmarks.clone();
    let mut transforms = [None, None];
    let mut seam_vertices = 0;

    for (slot, (view, tag, name)) in [(left, ViewTag::Left, "left"), (right, ViewTag::Right, "right")]
        .into_iter()
        .enumerate()
    {
        if view.cloud.is_empty() {
            if params.allow_missing_view {
                log::warn!("{name} view is empty; fusing without it");
                continue;
            }
            return Err(MorphError::MissingView(name));
        }
        let seed = estimate_rigid_from_landmarks(&view.landmarks, &middle.landmarks, false)?;
        let icp = icp_refine_with_target(view.cloud.points(), &target, &seed, &params.icp)?;
        log::debug!("{name}: icp rms {:.3e} after {} updates", icp.rms, icp.total_iterations);
        let moved: Vec<Vec3> = view.cloud.points().iter().map(|p| icp.transform.apply(p)).collect();
        let (refined, seams) = refine_seam(&moved, target.index(), params);
        seam_vertices += seams;
        parts.push(PointCloud::new(refined).with_view(tag));
        let extra: Vec<Landmark<Vec3>> = view
            .landmarks
            .entries()
            .iter()
            .map(|e| Landmark {
                id: e.id,
                position: icp.transform.apply(&e.position),
                vertex: None,
            })
            .collect();
        landmarks = landmarks.extended_with(extra);
        transforms[slot] = Some(icp.transform);
    }

    let union = PointCloud::concat(&parts.iter().collect::<Vec<_>>());
    let merged = merge_vertices(&union, params.merge_epsilon)?;
    let radius = match params.isolation_radius {
        Some(r) => r,
        None => 2.5 * median_spacing(merged.points()).max(params.merge_epsilon),
    };
    let cloud = remove_isolated(&merged, radius, params.min_neighbors)?;
    if cloud.is_empty() {
        return Err(MorphError::Degenerate("fusion removed every point".into()));
    }

    let index = SpatialIndex::new(cloud.points());
    let entries = landmarks
        .entries()
        .iter()
        .map(|e| Landmark {
            id: e.id,
            position: e.position,
            vertex: index.nearest(&e.position).ok().map(|h| h.0),
        })
        .collect();
    let landmarks = LandmarkSet3::new(landmarks.scheme().clone(), entries)?;

    Ok(FusionOutcome {
        cloud,
        landmarks,
        left_to_middle: transforms[0],
        right_to_middle: transforms[1],
        seam_vertices,
    })
}

/// Moves every seam vertex by a rigid transform fitted to the cross-view
/// correspondences of its `local_k` nearest same-view neighbours, weighted by
/// inverse distance to the vertex. Only correspondences that are themselves
/// on the seam take part.
fn refine_seam(points: &[Vec3], target: &SpatialIndex, params: &FusionParams) -> (Vec<Vec3>, usize) {
    let seam_radius = 2.0 * params.merge_epsilon;
    let own = SpatialIndex::new(points);
    let matches: Vec<(usize, f64)> = map_range(points.len(), |i| {
        target.nearest(&points[i]).expect("target is non-empty")
    });
    let refined: Vec<Option<Vec3>> = map_range(points.len(), |i| {
        if matches[i].1 > seam_radius {
            return None;
        }
        let mut src = Vec::new();
        let mut dst = Vec::new();
        let mut w = Vec::new();
        for (j, d) in own.k_nearest(&points[i], params.local_k) {
            if matches[j].1 <= seam_radius {
                src.push(points[j]);
                dst.push(target.points()[matches[j].0]);
                w.push(1.0 / (d + params.merge_epsilon));
            }
        }
        let local = fit_similarity(&src, &dst, Some(&w), false).ok()?;
        Some(local.apply(&points[i]))
    });
    let count = refined.iter().filter(|r| r.is_some()).count();
    let out = refined.into_iter().zip(points).map(|(r, p)| r.unwrap_or(*p)).collect();
    (out, count)
}

fn median_spacing(points: &[Vec3]) -> f64 {
    if points.len() < 2 {
        return 0.0;
    }
    let index = SpatialIndex::new(points);
    let mut d: Vec<f64> = map_range(points.len(), |i| index.k_nearest(&points[i], 2)[1].1);
    let mid = d.len() / 2;
    *d.select_nth_unstable_by(mid, f64::total_cmp).1
}
