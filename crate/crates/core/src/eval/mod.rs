//! Reconstruction metrics in an interocular-normalised, nose-tip-centred
//! frame, and subgroup benchmark reports.

mod metrics;
mod report;

pub use metrics::{
    align_prediction, armse, crop_by_radius, landmark_bbox_size, nme, normalize_interocular, planar, to_nose_frame,
    AlignMode, NmeMode,
};
pub use report::{
    aggregate, benchmark, EvalConfig, EvalSample, EvaluationReport, GroupSummary, SampleMetrics, Summary,
};
