//! Coarse-to-fine iterative closest point.
//!
//! Each pyramid level runs on a seeded random subset of the source points
//! against the full target. Per iteration: nearest-neighbour correspondences,
//! outlier rejection, then a closed-form update (SVD for point-to-point, a
//! linearised 6×6 solve for point-to-plane).

use nalgebra::{Matrix3, Matrix6, Vector6};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::rigid::{fit_similarity, RigidTransform};
use crate::error::{MorphError, Result};
use crate::mesh::{PointCloud, SpatialIndex, Vec3};
use crate::par::map_range;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IcpMetric {
    PointToPoint,
    PointToPlane,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rejection {
    None,
    /// Drop correspondences longer than this distance.
    Distance(f64),
    /// Drop correspondences longer than this multiple of the median.
    MedianMultiple(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IcpParams {
    /// Iteration cap per pyramid level.
    pub max_iterations: usize,
    /// Stop once the RMS changes by less than this between iterations.
    pub convergence_delta: f64,
    pub rejection: Rejection,
    pub metric: IcpMetric,
    /// Fractions of source points used at each level, coarse to fine.
    pub pyramid: Vec<f64>,
    pub seed: u64,
}

impl Default for IcpParams {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            convergence_delta: 1e-7,
            rejection: Rejection::MedianMultiple(3.0),
            metric: IcpMetric::PointToPoint,
            pyramid: vec![0.1, 0.3, 1.0],
            seed: 0,
        }
    }
}

impl IcpParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations < 1 {
            return Err(MorphError::Parameter("max_iterations must be >= 1".into()));
        }
        if !(self.convergence_delta >= 0.0) {
            return Err(MorphError::Parameter("convergence_delta must be >= 0".into()));
        }
        if self.pyramid.is_empty() || self.pyramid.iter().any(|f| !(*f > 0.0 && *f <= 1.0)) {
            return Err(MorphError::Parameter("pyramid fractions must lie in (0, 1]".into()));
        }
        match self.rejection {
            Rejection::Distance(d) if !(d > 0.0) => {
                Err(MorphError::Parameter("rejection distance must be positive".into()))
            }
            Rejection::MedianMultiple(k) if !(k > 0.0) => {
                Err(MorphError::Parameter("rejection multiple must be positive".into()))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct IcpOutcome {
    pub transform: RigidTransform,
    /// RMS of accepted correspondences under the final transform.
    pub rms: f64,
    /// RMS per iterate at the finest level; entry `k` is measured for the
    /// `k`-th transform, entry 0 being the level's starting transform.
    pub history: Vec<f64>,
    /// Updates performed at the finest level.
    pub iterations: usize,
    /// Updates performed across all levels.
    pub total_iterations: usize,
    pub converged: bool,
}

/// Nearest-neighbour target with lazily useful normals for point-to-plane.
pub struct IcpTarget {
    index: SpatialIndex,
    normals: Option<Vec<Vec3>>,
    /// RMS at or below which the alignment counts as exact.
    exact_rms: f64,
}

/// Exact-alignment floor relative to the target's bounding-box diagonal;
/// below it further updates only stir rounding error.
const EXACT_RMS_FRACTION: f64 = 1e-12;

impl IcpTarget {
    pub fn new(cloud: &PointCloud, metric: IcpMetric) -> Result<Self> {
        if cloud.is_empty() {
            return Err(MorphError::EmptySet);
        }
        let index = SpatialIndex::new(cloud.points());
        let normals = match metric {
            IcpMetric::PointToPoint => None,
            IcpMetric::PointToPlane => Some(estimate_normals(&index, 10)),
        };
        let exact_rms =
            EXACT_RMS_FRACTION * crate::mesh::bounding_box(cloud.points()).map_or(0.0, |(lo, hi)| (hi - lo).norm());
        Ok(Self {
            index,
            normals,
            exact_rms,
        })
    }

    pub fn index(&self) -> &SpatialIndex {
        &self.index
    }
}

/// Unoriented normals from the smallest principal axis of each point's `k`
/// nearest neighbours.
pub fn estimate_normals(index: &SpatialIndex, k: usize) -> Vec<Vec3> {
    map_range(index.len(), |i| {
        let p = index.points()[i];
        let nb = index.k_nearest(&p, k.max(3));
        let mean = nb.iter().map(|&(j, _)| index.points()[j]).sum::<Vec3>() / nb.len() as f64;
        let mut cov = Matrix3::zeros();
        for &(j, _) in &nb {
            let d = index.points()[j] - mean;
            cov += d * d.transpose();
        }
        let eig = cov.symmetric_eigen();
        let imin = eig.eigenvalues.imin();
        let n: Vec3 = eig.eigenvectors.column(imin).into();
        if n.norm() > 0.0 {
            n.normalize()
        } else {
            Vec3::z()
        }
    })
}

pub fn icp_refine(src: &PointCloud, dst: &PointCloud, init: &RigidTransform, params: &IcpParams) -> Result<IcpOutcome> {
    params.validate()?;
    if src.is_empty() {
        return Err(MorphError::EmptySet);
    }
    let target = IcpTarget::new(dst, params.metric)?;
    icp_refine_with_target(src.points(), &target, init, params)
}

pub fn icp_refine_with_target(
    src: &[Vec3],
    target: &IcpTarget,
    init: &RigidTransform,
    params: &IcpParams,
) -> Result<IcpOutcome> {
    params.validate()?;
    if src.is_empty() {
        return Err(MorphError::EmptySet);
    }
    let mut transform = *init;
    let mut total_iterations = 0;
    let mut last = None;
    for (level, &fraction) in params.pyramid.iter().enumerate() {
        let subset: Vec<Vec3> = if fraction >= 1.0 {
            src.to_vec()
        } else {
            let n = ((src.len() as f64 * fraction).ceil() as usize).clamp(src.len().min(16), src.len());
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed.wrapping_add(level as u64));
            let mut picked = sample(&mut rng, src.len(), n).into_vec();
            picked.sort_unstable();
            picked.into_iter().map(|i| src[i]).collect()
        };
        let run = run_level(&subset, target, &transform, params)?;
        transform = run.transform;
        total_iterations += run.iterations;
        last = Some(run);
    }
    let mut out = last.expect("pyramid is non-empty");
    out.total_iterations = total_iterations;
    Ok(out)
}

struct Matches {
    src: Vec<Vec3>,
    dst: Vec<Vec3>,
    normals: Vec<Vec3>,
    rms: f64,
}

fn correspond(
    src: &[Vec3],
    target: &IcpTarget,
    transform: &RigidTransform,
    rejection: Rejection,
    iteration: usize,
) -> Result<Matches> {
    let hits: Vec<(usize, f64)> = map_range(src.len(), |i| {
        target
            .index
            .nearest(&transform.apply(&src[i]))
            .expect("target is non-empty")
    });
    let threshold = match rejection {
        Rejection::None => f64::INFINITY,
        Rejection::Distance(d) => d,
        Rejection::MedianMultiple(k) => {
            let mut ds: Vec<f64> = hits.iter().map(|h| h.1).collect();
            let mid = ds.len() / 2;
            let (_, median, _) = ds.select_nth_unstable_by(mid, f64::total_cmp);
            k * *median
        }
    };
    let mut m = Matches {
        src: Vec::new(),
        dst: Vec::new(),
        normals: Vec::new(),
        rms: 0.0,
    };
    let mut sum2 = 0.0;
    for (i, &(j, d)) in hits.iter().enumerate() {
        if d <= threshold {
            m.src.push(src[i]);
            m.dst.push(target.index.points()[j]);
            if let Some(ns) = &target.normals {
                m.normals.push(ns[j]);
            }
            sum2 += d * d;
        }
    }
    if m.src.is_empty() {
        return Err(MorphError::NoCorrespondence { iteration });
    }
    m.rms = (sum2 / m.src.len() as f64).sqrt();
    Ok(m)
}

fn run_level(src: &[Vec3], target: &IcpTarget, init: &RigidTransform, params: &IcpParams) -> Result<IcpOutcome> {
    let scale = init.scale();
    let mut transform = *init;
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut converged = false;

    let mut matches = correspond(src, target, &transform, params.rejection, 0)?;
    history.push(matches.rms);
    while iterations < params.max_iterations {
        if matches.rms <= target.exact_rms {
            converged = true;
            break;
        }
        let next = match params.metric {
            IcpMetric::PointToPoint => {
                let scaled: Vec<Vec3> = matches.src.iter().map(|p| p * scale).collect();
                let rigid = match fit_similarity(&scaled, &matches.dst, None, false) {
                    Ok(t) => t,
                    // too few matches to pin a rotation; keep the estimate
                    Err(MorphError::Degenerate(_)) => break,
                    Err(e) => return Err(e),
                };
                RigidTransform::from_parts(*rigid.rotation(), *rigid.translation(), scale)?
            }
            IcpMetric::PointToPlane => match point_to_plane_step(&matches, &transform) {
                Some(step) => step.compose(&transform),
                None => break,
            },
        };
        iterations += 1;
        let previous = matches.rms;
        transform = next;
        matches = correspond(src, target, &transform, params.rejection, iterations)?;
        history.push(matches.rms);
        if (previous - matches.rms).abs() < params.convergence_delta {
            converged = true;
            break;
        }
    }
    Ok(IcpOutcome {
        transform,
        rms: matches.rms,
        history,
        iterations,
        total_iterations: iterations,
        converged,
    })
}

/// Small-angle solve for the increment minimising squared point-to-plane
/// residuals of the already transformed source points.
fn point_to_plane_step(m: &Matches, current: &RigidTransform) -> Option<RigidTransform> {
    let mut ata = Matrix6::zeros();
    let mut atb = Vector6::zeros();
    for ((s, q), n) in m.src.iter().zip(&m.dst).zip(&m.normals) {
        let p = current.apply(s);
        let c = p.cross(n);
        let row = Vector6::new(c.x, c.y, c.z, n.x, n.y, n.z);
        let r = (q - p).dot(n);
        ata += row * row.transpose();
        atb += row * r;
    }
    let x = ata.cholesky()?.solve(&atb);
    let omega = Vec3::new(x[0], x[1], x[2]);
    let angle = omega.norm();
    let step = if angle > 0.0 {
        RigidTransform::from_axis_angle(&omega, angle, Vec3::new(x[3], x[4], x[5]))
    } else {
        RigidTransform::translation_only(Vec3::new(x[3], x[4], x[5]))
    };
    Some(step)
}
