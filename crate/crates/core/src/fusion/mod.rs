//! Rigid alignment and multi-view fusion.
//!
//! Side views are brought into the middle view's frame by a landmark seed,
//! a coarse-to-fine ICP refinement and a per-vertex seam adjustment, then
//! merged into one cloud.

mod icp;
pub(crate) mod rigid;
mod views;

pub use icp::{
    estimate_normals, icp_refine, icp_refine_with_target, IcpMetric, IcpOutcome, IcpParams, IcpTarget, Rejection,
};
pub use rigid::{estimate_rigid_from_landmarks, fit_similarity, RigidTransform};
pub use views::{fuse_views, FusionOutcome, FusionParams, ViewScan};
