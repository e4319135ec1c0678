//! Face-scan processing: multi-view fusion, landmark retrieval, depth
//! projection, template registration with spatially varying stiffness, PCA
//! morphable models and reconstruction metrics, plus a synthetic head
//! generator that supplies ground truth for all of them.

pub mod error;
pub mod eval;
pub mod fusion;
pub mod mesh;
pub mod morphable;
mod par;
pub mod projection;
pub mod registration;
pub mod synthetic;

pub use error::{MorphError, Result};
pub use fusion::RigidTransform;
pub use mesh::{LandmarkScheme, LandmarkSet2, LandmarkSet3, PointCloud, TriMesh, Vec3};
