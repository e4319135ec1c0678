use nalgebra::{Matrix3, Rotation3, Unit};
use serde::{Deserialize, Serialize};

use crate::error::{MorphError, Result};
use crate::mesh::{LandmarkSet3, Vec3};

const ORTHONORMAL_TOLERANCE: f64 = 1e-9;
const COLLINEAR_RATIO: f64 = 1e-10;

/// Similarity transform `x ↦ s·R·x + t` with `R` a proper rotation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TransformRecord", into = "TransformRecord")]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vec3,
    scale: f64,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vec3::zeros(),
            scale: 1.0,
        }
    }

    pub fn from_parts(rotation: Matrix3<f64>, translation: Vec3, scale: f64) -> Result<Self> {
        let ortho = (rotation.transpose() * rotation - Matrix3::identity()).amax();
        if ortho > ORTHONORMAL_TOLERANCE {
            return Err(MorphError::Validation(format!(
                "rotation is not orthonormal (max deviation {ortho:e})"
            )));
        }
        if (rotation.determinant() - 1.0).abs() > ORTHONORMAL_TOLERANCE {
            return Err(MorphError::Validation("rotation has determinant != +1".into()));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(MorphError::Validation(format!("scale must be positive, got {scale}")));
        }
        if !translation.iter().all(|c| c.is_finite()) {
            return Err(MorphError::Validation("non-finite translation".into()));
        }
        Ok(Self {
            rotation,
            translation,
            scale,
        })
    }

    pub fn from_axis_angle(axis: &Vec3, angle: f64, translation: Vec3) -> Self {
        let r = Rotation3::from_axis_angle(&Unit::new_normalize(*axis), angle);
        Self {
            rotation: *r.matrix(),
            translation,
            scale: 1.0,
        }
    }

    pub fn translation_only(translation: Vec3) -> Self {
        Self {
            translation,
            ..Self::identity()
        }
    }

    pub fn uniform_scale(scale: f64) -> Self {
        Self {
            scale,
            ..Self::identity()
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vec3 {
        &self.translation
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn without_scale(&self) -> Self {
        Self { scale: 1.0, ..*self }
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.rotation * p * self.scale + self.translation
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> Self {
        Self {
            rotation: orthonormalize(&(self.rotation * other.rotation)),
            translation: self.rotation * other.translation * self.scale + self.translation,
            scale: self.scale * other.scale,
        }
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation) / self.scale,
            scale: 1.0 / self.scale,
        }
    }

    /// Angle of the relative rotation between two transforms, in radians.
    pub fn rotation_angle_to(&self, other: &RigidTransform) -> f64 {
        let rel = self.rotation.transpose() * other.rotation;
        // acos is ill-conditioned near zero; use the skew part instead
        let skew = Vec3::new(
            rel[(2, 1)] - rel[(1, 2)],
            rel[(0, 2)] - rel[(2, 0)],
            rel[(1, 0)] - rel[(0, 1)],
        );
        let sin = skew.norm() / 2.0;
        let cos = (rel.trace() - 1.0) / 2.0;
        sin.atan2(cos)
    }
}

fn orthonormalize(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut r = u * vt;
    if r.determinant() < 0.0 {
        let mut d = Matrix3::identity();
        d[(2, 2)] = -1.0;
        r = u * d * vt;
    }
    r
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransformRecord {
    /// Row-major rotation.
    rotation: [[f64; 3]; 3],
    translation: [f64; 3],
    scale: f64,
}

impl TryFrom<TransformRecord> for RigidTransform {
    type Error = MorphError;
    fn try_from(r: TransformRecord) -> Result<Self> {
        let m = Matrix3::from_fn(|i, j| r.rotation[i][j]);
        RigidTransform::from_parts(m, Vec3::from(r.translation), r.scale)
    }
}

impl From<RigidTransform> for TransformRecord {
    fn from(t: RigidTransform) -> Self {
        TransformRecord {
            rotation: std::array::from_fn(|i| std::array::from_fn(|j| t.rotation[(i, j)])),
            translation: [t.translation.x, t.translation.y, t.translation.z],
            scale: t.scale,
        }
    }
}

/// Weighted least-squares similarity (or rigid) transform mapping `src` onto
/// `dst`, via the SVD of the weighted cross-covariance.
///
/// Fails when fewer than three weighted points are given or when the source
/// configuration is collinear.
pub fn fit_similarity(src: &[Vec3], dst: &[Vec3], weights: Option<&[f64]>, with_scale: bool) -> Result<RigidTransform> {
    if src.len() != dst.len() {
        return Err(MorphError::Validation(format!(
            "{} source vs {} target points",
            src.len(),
            dst.len()
        )));
    }
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let active = (0..src.len()).filter(|&i| w(i) > 0.0).count();
    if active < 3 {
        return Err(MorphError::Degenerate(format!(
            "need at least 3 correspondences, got {active}"
        )));
    }
    let total: f64 = (0..src.len()).map(w).sum();
    let mu_s = (0..src.len()).map(|i| src[i] * w(i)).sum::<Vec3>() / total;
    let mu_d = (0..src.len()).map(|i| dst[i] * w(i)).sum::<Vec3>() / total;

    let mut cov = Matrix3::zeros();
    let mut src_cov = Matrix3::zeros();
    let mut src_var = 0.0;
    for i in 0..src.len() {
        let ws = w(i);
        if ws == 0.0 {
            continue;
        }
        let s = src[i] - mu_s;
        let d = dst[i] - mu_d;
        cov += d * s.transpose() * ws;
        src_cov += s * s.transpose() * ws;
        src_var += s.norm_squared() * ws;
    }
    cov /= total;
    src_var /= total;

    let spread = src_cov.symmetric_eigenvalues();
    let mut ev: Vec<f64> = spread.iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    if ev[0] <= 0.0 || ev[1] <= COLLINEAR_RATIO * ev[0] {
        return Err(MorphError::Degenerate(
            "source points are collinear or coincident".into(),
        ));
    }

    let svd = cov.svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut d = Matrix3::identity();
    if (u * vt).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    let rotation = orthonormalize(&(u * d * vt));
    let scale = if with_scale {
        let trace: f64 = (0..3).map(|k| svd.singular_values[k] * d[(k, k)]).sum();
        trace / src_var
    } else {
        1.0
    };
    if !(scale > 0.0) {
        return Err(MorphError::Degenerate("non-positive similarity scale".into()));
    }
    let translation = mu_d - rotation * mu_s * scale;
    Ok(RigidTransform {
        rotation,
        translation,
        scale,
    })
}

/// Least-squares transform carrying `src` landmarks onto `dst` landmarks,
/// matched by semantic id.
pub fn estimate_rigid_from_landmarks(
    src: &LandmarkSet3,
    dst: &LandmarkSet3,
    with_scale: bool,
) -> Result<RigidTransform> {
    src.ensure_same_scheme(dst)?;
    let pairs = src.common_pairs(dst);
    if pairs.len() < 3 {
        return Err(MorphError::Degenerate(format!(
            "need at least 3 common landmarks, found {}",
            pairs.len()
        )));
    }
    let (s, d): (Vec<Vec3>, Vec<Vec3>) = pairs.into_iter().map(|(_, a, b)| (a, b)).unzip();
    fit_similarity(&s, &d, None, with_scale)
}
