//! Synthetic heads, simulated three-view scans and seeded populations with
//! analytic ground truth.

mod head;
mod population;
mod scan;

pub use head::{
    default_bumps, displace_radially, ellipsoid_radius, generate_head, icosphere, landmark_scheme, relocate_landmarks,
    Bump, ExpressionMode, SyntheticHead, SyntheticHeadParams, LANDMARKS,
};
pub use population::{
    expression_category, generate_population, head_parts, shape_mode, write_population, Manifest, ManifestSample,
    ManifestSubject, ManifestTemplate, ManifestView, Population, PopulationParams, Sample, Subject, SHAPE_MODES,
};
pub use scan::{simulate_scan, ScanSimParams, ScanView};
