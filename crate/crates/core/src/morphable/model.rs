use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::pca::PcaBasis;
use crate::error::{MorphError, Result};
use crate::mesh::{Landmark, LandmarkScheme, LandmarkSet3, TriMesh, Vec3};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Coefficients {
    pub shape: Vec<f64>,
    pub expression: Vec<f64>,
}

impl Coefficients {
    pub fn zeros(shape: usize, expression: usize) -> Self {
        Self {
            shape: vec![0.0; shape],
            expression: vec![0.0; expression],
        }
    }

    /// `[α; β]`.
    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.shape.len() + self.expression.len(),
            self.shape.iter().chain(&self.expression).copied(),
        )
    }

    pub fn from_vector(v: &DVector<f64>, shape: usize) -> Self {
        Self {
            shape: v.rows(0, shape).iter().copied().collect(),
            expression: v.rows(shape, v.len() - shape).iter().copied().collect(),
        }
    }

    pub fn norm(&self) -> f64 {
        self.to_vector().norm()
    }
}

/// Linear face model `mean + U·α + E·β` over a fixed template topology.
#[derive(Debug, Clone, PartialEq)]
pub struct MorphableModel {
    mean: DVector<f64>,
    shape: DMatrix<f64>,
    shape_variances: Vec<f64>,
    expression: DMatrix<f64>,
    expression_variances: Vec<f64>,
    faces: Vec<[usize; 3]>,
    scheme: LandmarkScheme,
    /// `(landmark id, template vertex)`, sorted by id.
    landmark_vertices: Vec<(u32, usize)>,
}

fn check_basis(name: &str, basis: &DMatrix<f64>, variances: &[f64], rows: usize) -> Result<()> {
    if basis.ncols() == 0 {
        return Err(MorphError::Validation(format!("{name} basis has no components")));
    }
    if basis.nrows() != rows || basis.ncols() != variances.len() {
        return Err(MorphError::Validation(format!(
            "{name} basis is {}x{} with {} variances, expected {rows} rows",
            basis.nrows(),
            basis.ncols(),
            variances.len()
        )));
    }
    if variances.windows(2).any(|w| w[0] < w[1]) || variances.iter().any(|v| !(*v >= 0.0)) {
        return Err(MorphError::Validation(format!(
            "{name} variances must be non-negative and descending"
        )));
    }
    let gram = basis.transpose() * basis;
    let err = (gram - DMatrix::identity(basis.ncols(), basis.ncols())).amax();
    if !(err <= 1e-8) {
        return Err(MorphError::Validation(format!(
            "{name} basis is not orthonormal (error {err:.3e})"
        )));
    }
    Ok(())
}

impl MorphableModel {
    pub fn new(
        mean: DVector<f64>,
        shape: PcaBasis,
        expression: PcaBasis,
        faces: Vec<[usize; 3]>,
        scheme: LandmarkScheme,
        landmark_vertices: Vec<(u32, usize)>,
    ) -> Result<Self> {
        Self::from_parts(
            mean,
            shape.basis,
            shape.variances,
            expression.basis,
            expression.variances,
            faces,
            scheme,
            landmark_vertices,
        )
    }

    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        mean: DVector<f64>,
        shape: DMatrix<f64>,
        shape_variances: Vec<f64>,
        expression: DMatrix<f64>,
        expression_variances: Vec<f64>,
        faces: Vec<[usize; 3]>,
        scheme: LandmarkScheme,
        mut landmark_vertices: Vec<(u32, usize)>,
    ) -> Result<Self> {
        if !mean.len().is_multiple_of(3) || mean.is_empty() {
            return Err(MorphError::Validation(format!(
                "mean length {} is not a positive multiple of 3",
                mean.len()
            )));
        }
        check_basis("shape", &shape, &shape_variances, mean.len())?;
        check_basis("expression", &expression, &expression_variances, mean.len())?;
        let n = mean.len() / 3;
        // validates face indices
        TriMesh::new(vec![Vec3::zeros(); n], faces.clone())?;
        landmark_vertices.sort_unstable();
        if landmark_vertices.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(MorphError::Validation("duplicate landmark id".into()));
        }
        if let Some(&(id, v)) = landmark_vertices.iter().find(|(_, v)| *v >= n) {
            return Err(MorphError::Validation(format!("landmark {id} names vertex {v} of {n}")));
        }
        Ok(Self {
            mean,
            shape,
            shape_variances,
            expression,
            expression_variances,
            faces,
            scheme,
            landmark_vertices,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.mean.len() / 3
    }

    pub fn shape_components(&self) -> usize {
        self.shape.ncols()
    }

    pub fn expression_components(&self) -> usize {
        self.expression.ncols()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn shape_basis(&self) -> &DMatrix<f64> {
        &self.shape
    }

    pub fn expression_basis(&self) -> &DMatrix<f64> {
        &self.expression
    }

    pub fn shape_variances(&self) -> &[f64] {
        &self.shape_variances
    }

    pub fn expression_variances(&self) -> &[f64] {
        &self.expression_variances
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn scheme(&self) -> &LandmarkScheme {
        &self.scheme
    }

    pub fn landmark_vertices(&self) -> &[(u32, usize)] {
        &self.landmark_vertices
    }

    /// `[U E]`, one column per coefficient.
    pub fn joint_basis(&self) -> DMatrix<f64> {
        let (ks, ke) = (self.shape_components(), self.expression_components());
        let mut b = DMatrix::zeros(self.mean.len(), ks + ke);
        b.columns_mut(0, ks).copy_from(&self.shape);
        b.columns_mut(ks, ke).copy_from(&self.expression);
        b
    }

    /// Variances matching the columns of [`joint_basis`](Self::joint_basis).
    pub fn joint_variances(&self) -> Vec<f64> {
        self.shape_variances
            .iter()
            .chain(&self.expression_variances)
            .copied()
            .collect()
    }

    fn check(&self, c: &Coefficients) -> Result<()> {
        if c.shape.len() != self.shape_components() || c.expression.len() != self.expression_components() {
            return Err(MorphError::Validation(format!(
                "coefficients have {}+{} entries, model has {}+{} components",
                c.shape.len(),
                c.expression.len(),
                self.shape_components(),
                self.expression_components()
            )));
        }
        Ok(())
    }

    /// Stacked vertex vector `mean + U·α + E·β`.
    pub fn evaluate(&self, c: &Coefficients) -> Result<DVector<f64>> {
        self.check(c)?;
        let a = DVector::from_column_slice(&c.shape);
        let b = DVector::from_column_slice(&c.expression);
        Ok(&self.mean + &self.shape * a + &self.expression * b)
    }

    pub fn synthesize(&self, c: &Coefficients) -> Result<TriMesh> {
        let x = self.evaluate(c)?;
        TriMesh::new(unstack(&x), self.faces.clone())
    }

    pub fn mean_mesh(&self) -> TriMesh {
        TriMesh::new(unstack(&self.mean), self.faces.clone()).expect("faces validated at construction")
    }

    /// Landmarks of a synthesized face, each tied to its template vertex.
    pub fn landmarks(&self, c: &Coefficients) -> Result<LandmarkSet3> {
        let x = self.evaluate(c)?;
        let entries = self
            .landmark_vertices
            .iter()
            .map(|&(id, v)| Landmark {
                id,
                position: Vec3::new(x[3 * v], x[3 * v + 1], x[3 * v + 2]),
                vertex: Some(v),
            })
            .collect();
        LandmarkSet3::new(self.scheme.clone(), entries)
    }
}

pub fn unstack(x: &DVector<f64>) -> Vec<Vec3> {
    (0..x.len() / 3)
        .map(|i| Vec3::new(x[3 * i], x[3 * i + 1], x[3 * i + 2]))
        .collect()
}
