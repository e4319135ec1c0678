//! Block-sparse symmetric positive-definite solve for the per-vertex affine
//! unknowns.
//!
//! Unknowns are `Z_i = X_iᵀ` (4×3). The system is
//! `(ω_i ṽ_i ṽ_iᵀ + Σ_j c_ij I) Z_i − Σ_j c_ij Z_j = ω_i ṽ_i c_iᵀ`, where
//! `c_ij` are symmetric edge couplings. The three output columns are
//! independent systems sharing one matrix; each runs its own conjugate
//! gradient recurrence under a block-Jacobi preconditioner.

use nalgebra::{Matrix4, Matrix4x3, Vector3, Vector4};

use crate::error::{MorphError, Result};

pub(crate) struct BlockSystem {
    diag: Vec<Matrix4<f64>>,
    couplings: Vec<Vec<(usize, f64)>>,
}

pub(crate) struct SolveStats {
    pub iterations: usize,
    pub converged: bool,
}

impl BlockSystem {
    /// `data[i] = (ω_i, ṽ_i)`, `couplings[i]` lists `(j, c_ij)` with `c_ij > 0`.
    pub fn new(data: &[(f64, Vector4<f64>)], couplings: Vec<Vec<(usize, f64)>>) -> Self {
        let diag = data
            .iter()
            .zip(&couplings)
            .map(|((w, v), c)| v * v.transpose() * *w + Matrix4::identity() * c.iter().map(|e| e.1).sum::<f64>())
            .collect();
        Self { diag, couplings }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn mul(&self, x: &[Matrix4x3<f64>]) -> Vec<Matrix4x3<f64>> {
        (0..self.len())
            .map(|i| {
                let mut y = self.diag[i] * x[i];
                for &(j, c) in &self.couplings[i] {
                    y -= x[j] * c;
                }
                y
            })
            .collect()
    }

    /// Connected components under the couplings whose accumulated data
    /// blocks are singular. Each is returned as its vertex list.
    pub fn singular_components(&self, data: &[(f64, Vector4<f64>)]) -> Vec<Vec<usize>> {
        let n = self.len();
        let mut comp = vec![usize::MAX; n];
        let mut out = Vec::new();
        for seed in 0..n {
            if comp[seed] != usize::MAX {
                continue;
            }
            let id = seed;
            let mut stack = vec![seed];
            let mut members = Vec::new();
            comp[seed] = id;
            let mut acc = Matrix4::zeros();
            while let Some(i) = stack.pop() {
                members.push(i);
                let (w, v) = &data[i];
                acc += v * v.transpose() * *w;
                for &(j, _) in &self.couplings[i] {
                    if comp[j] == usize::MAX {
                        comp[j] = id;
                        stack.push(j);
                    }
                }
            }
            let eig = acc.symmetric_eigenvalues();
            let max = eig.max();
            if !(max > 0.0) || eig.min() <= 1e-10 * max {
                members.sort_unstable();
                out.push(members);
            }
        }
        out
    }

    /// Preconditioned CG from `x`, per column, until
    /// `‖r‖ ≤ tol·‖b‖` or `max_iter` steps. Every step lowers the quadratic
    /// energy of each column.
    pub fn solve(
        &self,
        b: &[Matrix4x3<f64>],
        x: &mut [Matrix4x3<f64>],
        tol: f64,
        max_iter: usize,
    ) -> Result<SolveStats> {
        let n = self.len();
        let inv: Vec<Matrix4<f64>> = self
            .diag
            .iter()
            .enumerate()
            .map(|(i, d)| {
                d.try_inverse().ok_or_else(|| MorphError::Solver {
                    part: format!("vertex {i}"),
                    message: "zero diagonal block".into(),
                })
            })
            .collect::<Result<_>>()?;
        let col_dot = |a: &[Matrix4x3<f64>], b: &[Matrix4x3<f64>]| -> Vector3<f64> {
            let mut s = Vector3::zeros();
            for (p, q) in a.iter().zip(b) {
                s += p.component_mul(q).row_sum().transpose();
            }
            s
        };
        let ax = self.mul(x);
        let mut r: Vec<Matrix4x3<f64>> = (0..n).map(|i| b[i] - ax[i]).collect();
        let b_norm = col_dot(b, b).map(f64::sqrt);
        let threshold = b_norm.map(|v| tol * v.max(f64::MIN_POSITIVE));
        let mut z: Vec<Matrix4x3<f64>> = (0..n).map(|i| inv[i] * r[i]).collect();
        let mut p = z.clone();
        let mut rz = col_dot(&r, &z);
        let mut active = [true; 3];
        let mut iterations = 0;
        for k in 0..3 {
            let rn = col_dot(&r, &r)[k].sqrt();
            active[k] = rn > threshold[k];
        }
        while active.iter().any(|a| *a) && iterations < max_iter {
            let ap = self.mul(&p);
            let pap = col_dot(&p, &ap);
            let mut alpha = Vector3::zeros();
            for k in 0..3 {
                if active[k] && pap[k] > 0.0 {
                    alpha[k] = rz[k] / pap[k];
                } else {
                    active[k] = false;
                }
            }
            for i in 0..n {
                for k in 0..3 {
                    if alpha[k] != 0.0 {
                        let step = p[i].column(k) * alpha[k];
                        x[i].column_mut(k).axpy(1.0, &step, 1.0);
                        let astep = ap[i].column(k) * alpha[k];
                        r[i].column_mut(k).axpy(-1.0, &astep, 1.0);
                    }
                }
                z[i] = inv[i] * r[i];
            }
            iterations += 1;
            let rz_new = col_dot(&r, &z);
            let rr = col_dot(&r, &r);
            for k in 0..3 {
                if !active[k] {
                    continue;
                }
                if rr[k].sqrt() <= threshold[k] {
                    active[k] = false;
                    continue;
                }
                let beta = rz_new[k] / rz[k];
                for i in 0..n {
                    let zc = z[i].column(k).into_owned();
                    let pc = p[i].column(k) * beta + zc;
                    p[i].set_column(k, &pc);
                }
            }
            rz = rz_new;
        }
        Ok(SolveStats {
            iterations,
            converged: !active.iter().any(|a| *a),
        })
    }
}
