use std::io::Write;
use std::path::Path;

use nalgebra::{Matrix3x4, Matrix4x3, Vector4};
use serde::{Deserialize, Serialize};

use super::cost::{nicp_cost_with_regions, NicpCost, PartRegions, VertexTransformField};
use super::graph::StiffnessGraph;
use super::parts::PartSegmentation;
use super::solver::BlockSystem;
use crate::error::{MorphError, Result};
use crate::mesh::{TriMesh, Vec3};
use crate::par::map_range;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NicpParams {
    /// Global stiffness multipliers, applied in order.
    pub schedule: Vec<f64>,
    /// Correspondence/solve rounds per multiplier.
    pub inner_iterations: usize,
    /// Drop correspondences farther than this multiple of the median
    /// distance, the median floored at the template's mean edge length;
    /// `None` keeps all.
    pub rejection_multiple: Option<f64>,
    pub solver_tolerance: f64,
    pub solver_max_iterations: usize,
    /// A stage ends early once no vertex moves farther than this.
    pub min_displacement: f64,
}

impl Default for NicpParams {
    fn default() -> Self {
        Self {
            schedule: vec![8.0, 4.0, 2.0, 1.0],
            inner_iterations: 10,
            rejection_multiple: Some(3.0),
            solver_tolerance: 1e-10,
            solver_max_iterations: 5000,
            min_displacement: 1e-9,
        }
    }
}

impl NicpParams {
    pub fn validate(&self) -> Result<()> {
        if self.schedule.is_empty() || self.schedule.iter().any(|m| !(*m >= 0.0 && m.is_finite())) {
            return Err(MorphError::Parameter(
                "schedule must hold finite non-negative multipliers".into(),
            ));
        }
        if self.inner_iterations == 0 {
            return Err(MorphError::Parameter("inner_iterations must be >= 1".into()));
        }
        if let Some(k) = self.rejection_multiple {
            if !(k > 0.0) {
                return Err(MorphError::Parameter("rejection multiple must be positive".into()));
            }
        }
        Ok(())
    }
}

/// One fixed-correspondence least-squares solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveRecord {
    pub multiplier: f64,
    pub iteration: usize,
    /// Quadratic objective at the warm start.
    pub surrogate_before: f64,
    /// Quadratic objective at the accepted iterate.
    pub surrogate_after: f64,
    pub solver_iterations: usize,
    pub rejected_correspondences: usize,
}

#[derive(Debug, Clone)]
pub struct RegistrationResult {
    /// Template topology with relocated vertices.
    pub mesh: TriMesh,
    pub field: VertexTransformField,
    /// Objective at the final state under the unscaled stiffness.
    pub cost: NicpCost,
    /// Distance from each registered vertex to the whole target surface.
    pub residuals: Vec<f64>,
    pub solves: Vec<SolveRecord>,
}

impl RegistrationResult {
    pub fn mean_residual(&self) -> f64 {
        if self.residuals.is_empty() {
            0.0
        } else {
            self.residuals.iter().sum::<f64>() / self.residuals.len() as f64
        }
    }

    /// Writes `vertex,residual` rows.
    pub fn save_residuals_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("vertex,residual\n");
        for (i, r) in self.residuals.iter().enumerate() {
            out.push_str(&format!("{i},{r:.12e}\n"));
        }
        let mut f = std::fs::File::create(path).map_err(|e| MorphError::io(path, e))?;
        f.write_all(out.as_bytes()).map_err(|e| MorphError::io(path, e))
    }
}

fn homogeneous(v: &Vec3) -> Vector4<f64> {
    Vector4::new(v.x, v.y, v.z, 1.0)
}

/// Quadratic objective of the fixed-correspondence subproblem.
fn surrogate(
    z: &[Matrix4x3<f64>],
    data: &[(f64, Vector4<f64>)],
    targets: &[Vec3],
    edges: &[(usize, usize, f64)],
) -> f64 {
    let mut s = 0.0;
    for (i, (w, v)) in data.iter().enumerate() {
        if *w > 0.0 {
            s += w * (z[i].transpose() * v - targets[i]).norm_squared();
        }
    }
    for &(i, j, c) in edges {
        s += c * (z[i] - z[j]).norm_squared();
    }
    s
}

/// Non-rigid registration with per-part stiffness.
///
/// For each multiplier in the schedule: find the closest point on each
/// vertex's part region, drop outliers, then solve the regularised linear
/// least-squares problem for all affine transforms. The solve is warm started
/// and only accepted when it does not raise the quadratic objective.
pub fn nicp_register(
    coarse: &TriMesh,
    target: &TriMesh,
    parts: &PartSegmentation,
    graph: &StiffnessGraph,
    params: &NicpParams,
) -> Result<RegistrationResult> {
    params.validate()?;
    let n = coarse.vertex_count();
    if parts.vertex_count() != n || graph.vertex_count() != n {
        return Err(MorphError::Validation(format!(
            "segmentation ({}) and graph ({}) must cover the template's {n} vertices",
            parts.vertex_count(),
            graph.vertex_count()
        )));
    }
    // Solve where the stiffness neighbourhood is the unit sphere, so λ is
    // independent of the mesh's absolute scale.
    let v = coarse.vertices();
    let unit = graph
        .edges()
        .iter()
        .map(|&(i, j)| (v[i] - v[j]).norm())
        .fold(0.0, f64::max);
    let unit = if unit > 0.0 { unit } else { 1.0 };
    let (z, solves) = solve_in_unit_frame(
        &coarse.scaled(1.0 / unit),
        &target.scaled(1.0 / unit),
        parts,
        graph,
        params,
    )?;

    let transforms = z
        .iter()
        .map(|m| {
            let mut x = m.transpose();
            x.set_column(3, &(x.column(3) * unit));
            x
        })
        .collect();
    let field = VertexTransformField::new(transforms)?;
    let vertices = field.deform(coarse);
    let regions = PartRegions::new(coarse, target, parts)?;
    let residuals = map_range(n, |i| regions.whole().distance(&vertices[i]));
    let cost = nicp_cost_with_regions(&field, coarse, &regions, parts, graph)?;
    Ok(RegistrationResult {
        mesh: coarse.with_vertices(vertices)?,
        field,
        cost,
        residuals,
        solves,
    })
}

fn solve_in_unit_frame(
    coarse: &TriMesh,
    target: &TriMesh,
    parts: &PartSegmentation,
    graph: &StiffnessGraph,
    params: &NicpParams,
) -> Result<(Vec<Matrix4x3<f64>>, Vec<SolveRecord>)> {
    let n = coarse.vertex_count();
    let regions = PartRegions::new(coarse, target, parts)?;
    let vh: Vec<Vector4<f64>> = coarse.vertices().iter().map(homogeneous).collect();
    // Σ_i λ_i Σ_{j∈N(i)} counts each edge from both ends
    let base_edges: Vec<(usize, usize, f64)> = graph
        .edges()
        .iter()
        .map(|&(i, j)| (i, j, parts.lambda_of(i) + parts.lambda_of(j)))
        .collect();

    let spacing = mean_edge_length(coarse);

    let mut z: Vec<Matrix4x3<f64>> = vec![Matrix3x4::identity().transpose(); n];
    let mut solves = Vec::new();

    for &multiplier in &params.schedule {
        let edges: Vec<(usize, usize, f64)> = base_edges
            .iter()
            .map(|&(i, j, c)| (i, j, c * multiplier))
            .filter(|e| e.2 > 0.0)
            .collect();
        let mut couplings = vec![Vec::new(); n];
        for &(i, j, c) in &edges {
            couplings[i].push((j, c));
            couplings[j].push((i, c));
        }
        for iteration in 0..params.inner_iterations {
            let current: Vec<Vec3> = (0..n).map(|i| z[i].transpose() * vh[i]).collect();
            let hits = map_range(n, |i| regions.closest(parts.part_of(i), &current[i]));
            let threshold = match params.rejection_multiple {
                Some(k) => {
                    let mut d: Vec<f64> = hits.iter().map(|h| h.distance).collect();
                    let mid = d.len() / 2;
                    let median = *d.select_nth_unstable_by(mid, f64::total_cmp).1;
                    let scale = median.max(spacing);
                    if scale > 0.0 {
                        k * scale
                    } else {
                        f64::INFINITY
                    }
                }
                None => f64::INFINITY,
            };
            let mut rejected = 0;
            let data: Vec<(f64, Vector4<f64>)> = (0..n)
                .map(|i| {
                    let keep = hits[i].distance <= threshold;
                    if !keep {
                        rejected += 1;
                    }
                    (if keep { parts.weights()[i] } else { 0.0 }, vh[i])
                })
                .collect();
            let targets: Vec<Vec3> = hits.iter().map(|h| h.point).collect();

            let system = BlockSystem::new(&data, couplings.clone());
            if let Some(comp) = system.singular_components(&data).first() {
                return Err(singular_error(comp, parts));
            }
            let b: Vec<Matrix4x3<f64>> = (0..n).map(|i| data[i].1 * targets[i].transpose() * data[i].0).collect();
            let before = surrogate(&z, &data, &targets, &edges);
            let mut next = z.clone();
            let stats = system.solve(&b, &mut next, params.solver_tolerance, params.solver_max_iterations)?;
            if !stats.converged {
                log::warn!(
                    "stiffness {multiplier}: solver stopped after {} iterations without reaching tolerance",
                    stats.iterations
                );
            }
            let after = surrogate(&next, &data, &targets, &edges);
            let moved = if after <= before {
                let m = (0..n)
                    .map(|i| (next[i].transpose() * vh[i] - current[i]).norm())
                    .fold(0.0, f64::max);
                z = next;
                m
            } else {
                0.0
            };
            solves.push(SolveRecord {
                multiplier,
                iteration,
                surrogate_before: before,
                surrogate_after: after.min(before),
                solver_iterations: stats.iterations,
                rejected_correspondences: rejected,
            });
            if moved <= params.min_displacement {
                break;
            }
        }
    }

    Ok((z, solves))
}

fn mean_edge_length(mesh: &TriMesh) -> f64 {
    let edges = mesh.edges();
    if edges.is_empty() {
        return 0.0;
    }
    let v = mesh.vertices();
    edges.iter().map(|&(a, b)| (v[a] - v[b]).norm()).sum::<f64>() / edges.len() as f64
}

fn singular_error(component: &[usize], parts: &PartSegmentation) -> MorphError {
    let mut counts = vec![0usize; parts.parts().len()];
    for &i in component {
        counts[parts.part_of(i)] += 1;
    }
    let worst = (0..counts.len())
        .max_by_key(|&p| (counts[p], std::cmp::Reverse(p)))
        .unwrap_or(0);
    let part = parts
        .parts()
        .get(worst)
        .map_or_else(|| "?".to_string(), |p| p.id.clone());
    MorphError::Solver {
        part,
        message: format!(
            "normal equations are singular on a stiffness component of {} vertices starting at vertex {} \
             (disconnected graph with zero stiffness, or too few non-coplanar correspondences)",
            component.len(),
            component[0]
        ),
    }
}
