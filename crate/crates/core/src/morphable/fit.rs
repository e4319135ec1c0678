use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::model::{Coefficients, MorphableModel};
use crate::error::{MorphError, Result};
use crate::fusion::{fit_similarity, RigidTransform};
use crate::mesh::{LandmarkSet3, SurfaceIndex, TriMesh, Vec3};
use crate::par::map_range;

const MAX_ROUNDS: usize = 100;
const RMS_TOLERANCE: f64 = 1e-8;

/// Coefficients, pose, cost, RMS and RMS history of one alternation run.
type Alternation = (DVector<f64>, RigidTransform, f64, f64, Vec<f64>);

/// Ridge weights; each is divided by the component variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Regularization {
    pub shape: f64,
    pub expression: f64,
}

impl Default for Regularization {
    fn default() -> Self {
        Self {
            shape: 1e-3,
            expression: 1e-3,
        }
    }
}

impl Regularization {
    pub fn uniform(w: f64) -> Self {
        Self {
            shape: w,
            expression: w,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.shape >= 0.0 && self.expression >= 0.0 && self.shape.is_finite() && self.expression.is_finite()) {
            return Err(MorphError::Parameter(
                "regularization weights must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub coefficients: Coefficients,
    /// Carries model space onto the target.
    pub transform: RigidTransform,
    /// Root mean squared distance over the correspondences, in target units.
    pub rms: f64,
    /// Summed squared distance plus the variance-weighted ridge term.
    pub cost: f64,
    /// Cost after every round.
    pub history: Vec<f64>,
    /// Model vertex and its target point at the returned iterate.
    pub correspondences: Vec<(usize, Vec3)>,
}

/// Fixed data for the alternating solve over a set of model vertices.
struct Problem<'a> {
    model: &'a MorphableModel,
    vertices: Vec<usize>,
    /// Rows of `[U E]` for `vertices`, 3 per vertex.
    basis: DMatrix<f64>,
    mean: DVector<f64>,
    ridge: DVector<f64>,
}

impl<'a> Problem<'a> {
    fn new(model: &'a MorphableModel, vertices: Vec<usize>, reg: &Regularization) -> Self {
        let full = model.joint_basis();
        let k = full.ncols();
        let mut basis = DMatrix::zeros(3 * vertices.len(), k);
        let mut mean = DVector::zeros(3 * vertices.len());
        for (r, &v) in vertices.iter().enumerate() {
            for d in 0..3 {
                basis.row_mut(3 * r + d).copy_from(&full.row(3 * v + d));
                mean[3 * r + d] = model.mean()[3 * v + d];
            }
        }
        let ks = model.shape_components();
        let ridge = DVector::from_iterator(
            k,
            model.joint_variances().iter().enumerate().map(|(i, var)| {
                let w = if i < ks { reg.shape } else { reg.expression };
                if w == 0.0 {
                    0.0
                } else {
                    w / var.max(f64::MIN_POSITIVE)
                }
            }),
        );
        Self {
            model,
            vertices,
            basis,
            mean,
            ridge,
        }
    }

    fn points(&self, c: &DVector<f64>) -> Vec<Vec3> {
        let x = &self.mean + &self.basis * c;
        (0..self.vertices.len())
            .map(|r| Vec3::new(x[3 * r], x[3 * r + 1], x[3 * r + 2]))
            .collect()
    }

    fn cost(&self, c: &DVector<f64>, t: &RigidTransform, targets: &[Vec3]) -> (f64, f64) {
        let pts = self.points(c);
        let sq = pts
            .iter()
            .zip(targets)
            .map(|(p, q)| (t.apply(p) - q).norm_squared())
            .sum::<f64>();
        let ridge: f64 = c.iter().zip(self.ridge.iter()).map(|(a, w)| w * a * a).sum();
        (sq + ridge, (sq / pts.len() as f64).sqrt())
    }

    /// Exact minimiser over coefficients for a fixed transform.
    fn solve_coefficients(&self, t: &RigidTransform, targets: &[Vec3]) -> Result<DVector<f64>> {
        let inv = t.inverse();
        let s2 = t.scale() * t.scale();
        let mut y = DVector::zeros(self.mean.len());
        for (r, q) in targets.iter().enumerate() {
            let m = inv.apply(q);
            for d in 0..3 {
                y[3 * r + d] = m[d] - self.mean[3 * r + d];
            }
        }
        let bt = self.basis.transpose();
        let mut lhs = &bt * &self.basis * s2;
        for k in 0..lhs.nrows() {
            lhs[(k, k)] += self.ridge[k];
        }
        let rhs = &bt * y * s2;
        if let Some(ch) = lhs.clone().cholesky() {
            return Ok(ch.solve(&rhs));
        }
        lhs.svd(true, true)
            .solve(&rhs, 1e-12)
            .map_err(|e| MorphError::Degenerate(format!("coefficient solve failed: {e}")))
    }

    /// Alternates similarity and coefficient updates from `c` until the
    /// RMS settles. Returns the state, its cost and RMS, and the history.
    fn alternate(&self, mut c: DVector<f64>, targets: &[Vec3], rounds: usize) -> Result<Alternation> {
        let mut history = Vec::new();
        let mut prev_rms = f64::INFINITY;
        let mut t = RigidTransform::identity();
        let mut last = (f64::INFINITY, f64::INFINITY);
        for _ in 0..rounds {
            t = fit_similarity(&self.points(&c), targets, None, true)?;
            c = self.solve_coefficients(&t, targets)?;
            last = self.cost(&c, &t, targets);
            if let Some((c2, t2)) = self.joint_step(&c, &t, targets) {
                let trial = self.cost(&c2, &t2, targets);
                if trial.0 < last.0 {
                    (c, t, last) = (c2, t2, trial);
                }
            }
            history.push(last.0);
            if (prev_rms - last.1).abs() < RMS_TOLERANCE {
                break;
            }
            prev_rms = last.1;
        }
        Ok((c, t, last.0, last.1, history))
    }

    /// One Gauss-Newton step over coefficients and pose together. The two
    /// block updates converge slowly when a component moves the points
    /// almost like a similarity does; the caller keeps the step only if it
    /// lowers the cost.
    fn joint_step(
        &self,
        c: &DVector<f64>,
        t: &RigidTransform,
        targets: &[Vec3],
    ) -> Option<(DVector<f64>, RigidTransform)> {
        let k = c.len();
        let n = self.vertices.len();
        let pts = self.points(c);
        let sr = t.rotation() * t.scale();
        let mut jac = DMatrix::zeros(3 * n, k + 7);
        let mut res = DVector::zeros(3 * n);
        for (r, (p, q)) in pts.iter().zip(targets).enumerate() {
            let w = sr * p;
            let rows = sr * self.basis.rows(3 * r, 3);
            let mut block = jac.rows_mut(3 * r, 3);
            block.columns_mut(0, k).copy_from(&rows);
            // d(exp([ω]) w)/dω = -[w]×
            block.columns_mut(k, 3).copy_from(&(-w.cross_matrix()));
            block.columns_mut(k + 3, 3).copy_from(&nalgebra::Matrix3::identity());
            block.column_mut(k + 6).copy_from(&w);
            res.rows_mut(3 * r, 3).copy_from(&(q - t.apply(p)));
        }
        let mut lhs = jac.transpose() * &jac;
        let mut rhs = jac.transpose() * res;
        for i in 0..k {
            lhs[(i, i)] += self.ridge[i];
            rhs[i] -= self.ridge[i] * c[i];
        }
        let step = lhs.svd(true, true).solve(&rhs, 1e-12).ok()?;
        let omega = Vec3::new(step[k], step[k + 1], step[k + 2]);
        let rotation = nalgebra::Rotation3::new(omega).into_inner() * t.rotation();
        let translation = t.translation() + Vec3::new(step[k + 3], step[k + 4], step[k + 5]);
        let scale = t.scale() * step[k + 6].exp();
        let pose = RigidTransform::from_parts(rotation, translation, scale).ok()?;
        Some((c + step.rows(0, k), pose))
    }

    fn result(
        &self,
        c: &DVector<f64>,
        t: RigidTransform,
        cost: f64,
        rms: f64,
        history: Vec<f64>,
        targets: &[Vec3],
    ) -> FitResult {
        FitResult {
            coefficients: Coefficients::from_vector(c, self.model.shape_components()),
            transform: t,
            rms,
            cost,
            history,
            correspondences: self.vertices.iter().copied().zip(targets.iter().copied()).collect(),
        }
    }
}

/// Coefficients and similarity placing the model's landmarks on `target`.
///
/// Each round first aligns the current model landmarks to the targets
/// (closed form), then solves the ridge problem for all coefficients. Both
/// steps exactly minimise the same cost, so it never increases.
pub fn fit_landmarks(model: &MorphableModel, target: &LandmarkSet3, reg: &Regularization) -> Result<FitResult> {
    reg.validate()?;
    if target.scheme() != model.scheme() {
        return Err(MorphError::SchemeMismatch {
            left: model.scheme().id.clone(),
            right: target.scheme().id.clone(),
        });
    }
    let (vertices, targets): (Vec<usize>, Vec<Vec3>) = model
        .landmark_vertices()
        .iter()
        .filter_map(|&(id, v)| target.position(id).map(|q| (v, q)))
        .unzip();
    if vertices.len() < 3 {
        return Err(MorphError::Degenerate(format!(
            "need at least 3 landmarks shared with the model, got {}",
            vertices.len()
        )));
    }
    let problem = Problem::new(model, vertices, reg);
    let c0 = DVector::zeros(problem.basis.ncols());
    let (c, t, cost, rms, history) = problem.alternate(c0, &targets, MAX_ROUNDS)?;
    Ok(problem.result(&c, t, cost, rms, history, &targets))
}

/// Landmark fit refined against the whole target surface.
///
/// Every round takes the closest target-surface point of each transformed
/// model vertex, re-aligns, and re-solves the coefficients over all
/// vertices. The lowest-cost round is returned; with `icp_rounds = 0` the
/// landmark fit is returned unchanged.
pub fn fit_dense(
    model: &MorphableModel,
    target: &TriMesh,
    target_lms: &LandmarkSet3,
    reg: &Regularization,
    icp_rounds: usize,
) -> Result<FitResult> {
    let init = fit_landmarks(model, target_lms, reg)?;
    if icp_rounds == 0 {
        return Ok(init);
    }
    let surface = SurfaceIndex::new(target)?;
    let problem = Problem::new(model, (0..model.vertex_count()).collect(), reg);
    let mut c = init.coefficients.to_vector();
    let mut t = init.transform;
    let mut history = Vec::new();
    let mut best: Option<FitResult> = None;
    for _ in 0..icp_rounds {
        let placed: Vec<Vec3> = problem.points(&c).iter().map(|p| t.apply(p)).collect();
        let targets: Vec<Vec3> = map_range(placed.len(), |i| surface.closest(&placed[i]).point);
        t = fit_similarity(&problem.points(&c), &targets, None, true)?;
        c = problem.solve_coefficients(&t, &targets)?;
        let (cost, rms) = problem.cost(&c, &t, &targets);
        history.push(cost);
        let improved = best.as_ref().is_none_or(|b| cost < b.cost);
        if improved {
            best = Some(problem.result(&c, t, cost, rms, Vec::new(), &targets));
        }
        if history.len() >= 2 && (history[history.len() - 2] - cost).abs() <= 1e-14 * cost.max(1e-300) {
            break;
        }
    }
    let mut best = best.expect("at least one round ran");
    best.history = history;
    Ok(best)
}
