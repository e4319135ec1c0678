use crate::error::Result;
use crate::fusion::{estimate_rigid_from_landmarks, icp_refine, IcpParams, RigidTransform};
use crate::mesh::{LandmarkSet3, TriMesh};

#[derive(Debug, Clone)]
pub struct CoarseRegistration {
    /// Template moved onto the target; topology unchanged.
    pub mesh: TriMesh,
    /// Landmark similarity refined by ICP.
    pub transform: RigidTransform,
    pub icp_rms: f64,
}

/// Similarity from landmarks, then rigid ICP of the template vertices against
/// the target vertices with the landmark scale held fixed.
pub fn coarse_register(
    template: &TriMesh,
    target: &TriMesh,
    template_lms: &LandmarkSet3,
    target_lms: &LandmarkSet3,
    params: &IcpParams,
) -> Result<CoarseRegistration> {
    let seed = estimate_rigid_from_landmarks(template_lms, target_lms, true)?;
    let icp = icp_refine(&template.to_point_cloud(), &target.to_point_cloud(), &seed, params)?;
    Ok(CoarseRegistration {
        mesh: template.transformed(&icp.transform),
        transform: icp.transform,
        icp_rms: icp.rms,
    })
}
