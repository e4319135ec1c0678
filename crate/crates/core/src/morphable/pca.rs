use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{MorphError, Result};
use crate::mesh::TriMesh;

/// Default truncation for the identity basis.
pub const SHAPE_TRUNCATION: Truncation = Truncation {
    variance_target: 0.99,
    max_components: 199,
};
/// Default truncation for the expression basis.
pub const EXPRESSION_TRUNCATION: Truncation = Truncation {
    variance_target: 0.99,
    max_components: 99,
};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Truncation {
    /// Keep the fewest leading components whose variance reaches this
    /// fraction of the total.
    pub variance_target: f64,
    pub max_components: usize,
}

impl Truncation {
    pub fn validate(&self) -> Result<()> {
        if !(self.variance_target > 0.0 && self.variance_target <= 1.0) {
            return Err(MorphError::Parameter(format!(
                "variance target must lie in (0, 1], got {}",
                self.variance_target
            )));
        }
        if self.max_components == 0 {
            return Err(MorphError::Parameter("max_components must be >= 1".into()));
        }
        Ok(())
    }

    /// Number of leading components kept from descending `variances`.
    pub fn count(&self, variances: &[f64]) -> usize {
        let total: f64 = variances.iter().sum();
        let mut acc = 0.0;
        let mut k = variances.len();
        for (i, v) in variances.iter().enumerate() {
            acc += v;
            if acc >= self.variance_target * total * (1.0 - 1e-12) {
                k = i + 1;
                break;
            }
        }
        k.min(self.max_components).max(1)
    }
}

/// Orthonormal principal directions (columns) with descending variances.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaBasis {
    pub basis: DMatrix<f64>,
    pub variances: Vec<f64>,
    /// Variance summed over every component, kept or not.
    pub total_variance: f64,
}

impl PcaBasis {
    pub fn components(&self) -> usize {
        self.variances.len()
    }

    pub fn retained_fraction(&self) -> f64 {
        if self.total_variance > 0.0 {
            self.variances.iter().sum::<f64>() / self.total_variance
        } else {
            1.0
        }
    }
}

/// Principal components of the columns of `data` (one sample per column),
/// which the caller has already centred or not. Component variance is
/// `σ² / divisor`. Components with numerically zero singular value are
/// never kept.
pub fn principal_components(data: &DMatrix<f64>, divisor: f64, truncation: &Truncation) -> Result<PcaBasis> {
    truncation.validate()?;
    let svd = data.clone().svd(true, false);
    let u = svd
        .u
        .ok_or_else(|| MorphError::Degenerate("SVD did not converge".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .total_cmp(&svd.singular_values[a])
            .then(a.cmp(&b))
    });
    let sigma: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let top = sigma.first().copied().unwrap_or(0.0);
    let rank = sigma.iter().take_while(|s| **s > 1e-10 * top && **s > 0.0).count();
    if rank == 0 {
        return Err(MorphError::Data("data has no variance".into()));
    }
    let variances: Vec<f64> = sigma[..rank].iter().map(|s| s * s / divisor).collect();
    let total_variance: f64 = variances.iter().sum();
    let k = truncation.count(&variances);
    let mut basis = DMatrix::zeros(data.nrows(), k);
    for (c, &i) in order.iter().take(k).enumerate() {
        let mut col = u.column(i).into_owned();
        // sign convention: largest-magnitude entry positive
        let (imax, _) = col.iter().enumerate().fold(
            (0, 0.0),
            |best, (r, v)| {
                if v.abs() > best.1 {
                    (r, v.abs())
                } else {
                    best
                }
            },
        );
        if col[imax] < 0.0 {
            col = -col;
        }
        basis.set_column(c, &col);
    }
    Ok(PcaBasis {
        basis,
        variances: variances[..k].to_vec(),
        total_variance,
    })
}

/// Vertices stacked as `[x0, y0, z0, x1, ...]`.
pub fn stack(mesh: &TriMesh) -> DVector<f64> {
    DVector::from_iterator(
        mesh.vertex_count() * 3,
        mesh.vertices().iter().flat_map(|v| [v.x, v.y, v.z]),
    )
}

fn check_topology(reference: &TriMesh, mesh: &TriMesh, what: &str) -> Result<()> {
    if mesh.vertex_count() != reference.vertex_count() || mesh.faces() != reference.faces() {
        return Err(MorphError::Validation(format!(
            "{what} does not share the template topology ({} vertices / {} faces vs {} / {})",
            mesh.vertex_count(),
            mesh.faces().len(),
            reference.vertex_count(),
            reference.faces().len()
        )));
    }
    Ok(())
}

/// Mean and identity basis of registered neutral meshes.
pub fn build_shape_model(meshes: &[TriMesh], truncation: &Truncation) -> Result<(DVector<f64>, PcaBasis)> {
    if meshes.len() < 2 {
        return Err(MorphError::Data(format!(
            "shape model needs at least 2 meshes, got {}",
            meshes.len()
        )));
    }
    for (i, m) in meshes.iter().enumerate() {
        check_topology(&meshes[0], m, &format!("mesh {i}"))?;
    }
    let cols: Vec<DVector<f64>> = meshes.iter().map(stack).collect();
    let mean = cols.iter().sum::<DVector<f64>>() / cols.len() as f64;
    let centred = DMatrix::from_columns(&cols.iter().map(|c| c - &mean).collect::<Vec<_>>());
    let basis = principal_components(&centred, (meshes.len() - 1) as f64, truncation)?;
    Ok((mean, basis))
}

/// Expression basis of residuals `expression − neutral of the same subject`,
/// without re-centring. The divisor is the residual count: no mean is
/// estimated, so no degree of freedom is spent.
pub fn build_expression_model(
    expressions: &[(String, TriMesh)],
    neutral_by_subject: &BTreeMap<String, TriMesh>,
    truncation: &Truncation,
) -> Result<PcaBasis> {
    if expressions.is_empty() {
        return Err(MorphError::Data(
            "expression model needs at least one expression mesh".into(),
        ));
    }
    let mut cols = Vec::with_capacity(expressions.len());
    let reference = &expressions[0].1;
    for (subject, mesh) in expressions {
        let neutral = neutral_by_subject
            .get(subject)
            .ok_or_else(|| MorphError::Data(format!("no neutral mesh for subject '{subject}'")))?;
        check_topology(reference, mesh, &format!("expression mesh of '{subject}'"))?;
        check_topology(reference, neutral, &format!("neutral mesh of '{subject}'"))?;
        cols.push(stack(mesh) - stack(neutral));
    }
    if cols.iter().all(|c| c.iter().all(|v| *v == 0.0)) {
        return Err(MorphError::Data(
            "no expression variance: every expression equals its neutral".into(),
        ));
    }
    let residuals = DMatrix::from_columns(&cols);
    principal_components(&residuals, cols.len() as f64, truncation).map_err(|e| match e {
        MorphError::Data(_) => MorphError::Data("no expression variance".into()),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Vec3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid(n: usize) -> TriMesh {
        let mut v = Vec::new();
        for i in 0..n {
            for j in 0..n {
                v.push(Vec3::new(i as f64, j as f64, 0.0));
            }
        }
        let mut f = Vec::new();
        for i in 0..n - 1 {
            for j in 0..n - 1 {
                let a = i * n + j;
                f.push([a, a + n, a + 1]);
                f.push([a + 1, a + n, a + n + 1]);
            }
        }
        TriMesh::new(v, f).unwrap()
    }

    fn from_stack(template: &TriMesh, x: &DVector<f64>) -> TriMesh {
        let v = (0..template.vertex_count())
            .map(|i| Vec3::new(x[3 * i], x[3 * i + 1], x[3 * i + 2]))
            .collect();
        template.with_vertices(v).unwrap()
    }

    fn orthonormal(rows: usize, k: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let m = DMatrix::from_fn(rows, k, |_, _| rng.random::<f64>() - 0.5);
        m.qr().q()
    }

    /// Largest principal angle between two column spans.
    fn max_principal_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        let qa = a.clone().qr().q();
        let qb = b.clone().qr().q();
        let s = (qa.transpose() * qb).singular_values();
        let smin = s.iter().copied().fold(f64::INFINITY, f64::min).min(1.0);
        smin.acos()
    }

    #[test]
    fn two_meshes_give_midpoint_and_one_component() {
        let t = grid(4);
        let b = t.translated(&Vec3::new(0.0, 0.0, 2.0));
        let (mean, pca) = build_shape_model(
            &[t.clone(), b],
            &Truncation {
                variance_target: 1.0,
                max_components: 10,
            },
        )
        .unwrap();
        for i in 0..t.vertex_count() {
            assert!((mean[3 * i + 2] - 1.0).abs() < 1e-12);
        }
        assert_eq!(pca.components(), 1);
        assert!((pca.retained_fraction() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn known_modes_are_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = grid(6);
        let modes = orthonormal(3 * t.vertex_count(), 3, &mut rng);
        let base = stack(&t);
        let meshes: Vec<TriMesh> = (0..20)
            .map(|_| {
                let c = DVector::from_fn(3, |k, _| rng.random_range(-1.0..1.0) * [3.0, 2.0, 1.0][k]);
                from_stack(&t, &(&base + &modes * c))
            })
            .collect();
        let (_, pca) = build_shape_model(
            &meshes,
            &Truncation {
                variance_target: 1.0,
                max_components: 50,
            },
        )
        .unwrap();
        assert_eq!(pca.components(), 3);
        assert!(max_principal_angle(&pca.basis, &modes) < 1e-6);
        let gram = pca.basis.transpose() * &pca.basis;
        assert!((gram - DMatrix::identity(3, 3)).amax() < 1e-8);
    }

    #[test]
    fn geometric_decay_cutoff_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = grid(8);
        let k = 8;
        let modes = orthonormal(3 * t.vertex_count(), k, &mut rng);
        // ± pairs make the sample exactly centred with variance r^(2j) per mode
        let ratio: f64 = 0.5;
        let base = stack(&t);
        let mut meshes = Vec::new();
        for j in 0..k {
            for sign in [1.0, -1.0] {
                let amp = sign * ratio.powi(j as i32) * ((2 * k - 1) as f64 / 2.0).sqrt();
                meshes.push(from_stack(&t, &(&base + modes.column(j) * amp)));
            }
        }
        let target = 0.99;
        let q = ratio * ratio;
        let total = (1.0 - q.powi(k as i32)) / (1.0 - q);
        let expected = (1..=k)
            .find(|&m| (1.0 - q.powi(m as i32)) / (1.0 - q) >= target * total)
            .unwrap();
        let (_, pca) = build_shape_model(
            &meshes,
            &Truncation {
                variance_target: target,
                max_components: 100,
            },
        )
        .unwrap();
        assert_eq!(pca.components(), expected);
        for (j, v) in pca.variances.iter().enumerate() {
            assert!((v - q.powi(j as i32)).abs() < 1e-9);
        }
        assert!(pca.retained_fraction() >= target);
    }

    #[test]
    fn topology_and_count_errors() {
        let t = grid(3);
        assert!(matches!(
            build_shape_model(std::slice::from_ref(&t), &SHAPE_TRUNCATION),
            Err(MorphError::Data(_))
        ));
        assert!(matches!(
            build_shape_model(&[t, grid(4)], &SHAPE_TRUNCATION),
            Err(MorphError::Validation(_))
        ));
    }

    #[test]
    fn expression_modes_and_degenerate_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let t = grid(5);
        let modes = orthonormal(3 * t.vertex_count(), 2, &mut rng);
        let mut neutrals = BTreeMap::new();
        let mut expressions = Vec::new();
        for s in 0..4 {
            let id = format!("s{s}");
            let neutral = t.translated(&Vec3::new(0.1 * s as f64, 0.0, 0.0));
            for _ in 0..3 {
                let c = DVector::from_fn(2, |_, _| rng.random_range(-1.0..1.0));
                expressions.push((id.clone(), from_stack(&t, &(stack(&neutral) + &modes * c))));
            }
            neutrals.insert(id, neutral);
        }
        let full = Truncation {
            variance_target: 1.0,
            max_components: 10,
        };
        let pca = build_expression_model(&expressions, &neutrals, &full).unwrap();
        assert_eq!(pca.components(), 2);
        assert!(max_principal_angle(&pca.basis, &modes) < 1e-6);

        let flat: Vec<(String, TriMesh)> = neutrals.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
        match build_expression_model(&flat, &neutrals, &full) {
            Err(MorphError::Data(m)) => assert!(m.contains("no expression variance")),
            other => panic!("{other:?}"),
        }
        let orphan = vec![("ghost".to_string(), t.clone())];
        match build_expression_model(&orphan, &neutrals, &full) {
            Err(MorphError::Data(m)) => assert!(m.contains("ghost")),
            other => panic!("{other:?}"),
        }
        let single: Vec<(String, TriMesh)> = expressions.iter().filter(|e| e.0 == "s0").cloned().collect();
        assert!(build_expression_model(&single, &neutrals, &full).is_ok());
    }

    #[test]
    fn full_basis_reconstructs_training_meshes() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let t = grid(4);
        let meshes: Vec<TriMesh> = (0..7)
            .map(|_| {
                let v = t
                    .vertices()
                    .iter()
                    .map(|p| p + Vec3::new(rng.random(), rng.random(), rng.random()))
                    .collect();
                t.with_vertices(v).unwrap()
            })
            .collect();
        let (mean, pca) = build_shape_model(
            &meshes,
            &Truncation {
                variance_target: 1.0,
                max_components: 100,
            },
        )
        .unwrap();
        assert_eq!(pca.components(), 6);
        for m in &meshes {
            let x = stack(m);
            let coeff = pca.basis.transpose() * (&x - &mean);
            let back = &mean + &pca.basis * coeff;
            assert!((back - x).amax() < 1e-6);
        }
    }
}
