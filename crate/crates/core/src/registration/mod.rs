//! Template registration: a landmark-seeded rigid fit followed by non-rigid
//! ICP with per-part stiffness.
//!
//! Each template vertex `i` carries an affine transform `X_i`. The objective
//! sums each moved vertex's distance to its part's region of the target and
//! `λ_p(i) ‖X_i − X_j‖_F` over neighbouring vertices. The solver minimises the
//! squared form of both terms at fixed correspondences.

mod coarse;
mod cost;
mod graph;
mod nicp;
mod parts;
mod solver;

pub use coarse::{coarse_register, CoarseRegistration};
pub use cost::{nicp_cost, nicp_cost_with_regions, NicpCost, PartRegions, VertexTransformField};
pub use graph::{build_stiffness_edges, default_stiffness_radius, StiffnessGraph};
pub use nicp::{nicp_register, NicpParams, RegistrationResult, SolveRecord};
pub use parts::{Part, PartSegmentation};
