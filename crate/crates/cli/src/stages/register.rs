use std::path::{Path, PathBuf};

use morphkit::mesh::save_mesh;
use morphkit::registration::{
    build_stiffness_edges, coarse_register, default_stiffness_radius, nicp_register, PartSegmentation,
};
use morphkit::synthetic::{relocate_landmarks, Manifest};
use morphkit::{LandmarkSet3, TriMesh};
use serde::Serialize;
use serde_json::json;

use super::{load_any_mesh, require, write_json, Context, IndexEntry, SampleIndex, FUSE, INDEX, REGISTER, SYNTH};
use crate::error::{CliError, StageContext};

/// The template every scan is registered to, with its part labels.
pub(crate) struct Template {
    pub mesh: TriMesh,
    pub landmarks: LandmarkSet3,
    pub parts: PartSegmentation,
}

pub(crate) fn load_template(synth: &Path, stage: &'static str) -> Result<Template, CliError> {
    let manifest_path = synth.join("manifest.json");
    require(&manifest_path)?;
    let manifest = Manifest::load(&manifest_path).stage(stage)?;
    Ok(Template {
        mesh: load_any_mesh(&synth.join(&manifest.template.mesh_path)).stage(stage)?,
        landmarks: LandmarkSet3::load(&synth.join(&manifest.template.landmarks_path)).stage(stage)?,
        parts: PartSegmentation::load(&synth.join(&manifest.template.parts_path)).stage(stage)?,
    })
}

#[derive(Serialize)]
struct SampleSummary<'a> {
    id: &'a str,
    coarse_icp_rms: f64,
    stiffness_radius: f64,
    mean_residual: f64,
    max_residual: f64,
    data_cost: f64,
    stiffness_cost: f64,
    solves: usize,
}

pub fn run(ctx: &Context) -> Result<PathBuf, CliError> {
    let cfg = &ctx.config.registration;
    let (synth, fused) = (ctx.dir(SYNTH), ctx.dir(FUSE));
    let index = SampleIndex::load(&fused.join(INDEX), REGISTER)?;
    let template = load_template(&synth, REGISTER)?;
    let parts = template
        .parts
        .with_lambda_overrides(&cfg.lambda_overrides)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let dir = ctx.fresh_dir(REGISTER)?;
    let mut out = SampleIndex::default();
    let mut summaries = Vec::new();
    for entry in &index.samples {
        let (scan, scan_lms) = entry.load(&fused, REGISTER)?;
        let coarse =
            coarse_register(&template.mesh, &scan, &template.landmarks, &scan_lms, &cfg.coarse_icp).stage(REGISTER)?;
        let radius = cfg
            .stiffness_radius
            .unwrap_or_else(|| default_stiffness_radius(&coarse.mesh));
        let graph = build_stiffness_edges(&coarse.mesh, radius).stage(REGISTER)?;
        let result = nicp_register(&coarse.mesh, &scan, &parts, &graph, &cfg.nicp).stage(REGISTER)?;

        let mesh_path = format!("{}.{}", entry.id, ctx.format().extension());
        let landmarks_path = format!("{}.landmarks.json", entry.id);
        super::ensure_parent(&dir.join(&mesh_path), REGISTER)?;
        save_mesh(&result.mesh, &dir.join(&mesh_path), ctx.format()).stage(REGISTER)?;
        relocate_landmarks(&template.landmarks, result.mesh.vertices())
            .save(&dir.join(&landmarks_path))
            .stage(REGISTER)?;
        result
            .save_residuals_csv(&dir.join(format!("{}.residuals.csv", entry.id)))
            .stage(REGISTER)?;
        log::info!(
            "register {}: coarse rms {:.3e}, mean residual {:.3e}",
            entry.id,
            coarse.icp_rms,
            result.mean_residual()
        );
        summaries.push(SampleSummary {
            id: &entry.id,
            coarse_icp_rms: coarse.icp_rms,
            stiffness_radius: radius,
            mean_residual: result.mean_residual(),
            max_residual: result.residuals.iter().copied().fold(0.0, f64::max),
            data_cost: result.cost.data,
            stiffness_cost: result.cost.stiffness,
            solves: result.solves.len(),
        });
        out.samples.push(IndexEntry {
            mesh_path,
            landmarks_path,
            ..entry.clone()
        });
    }
    out.save(&dir, REGISTER)?;
    write_json(&dir.join("summary.json"), &summaries, REGISTER)?;
    let params = json!({
        "coarse_icp": cfg.coarse_icp,
        "nicp": cfg.nicp,
        "stiffness_radius": cfg.stiffness_radius,
        "lambda_overrides": cfg.lambda_overrides,
        "parts": parts.parts(),
    });
    ctx.finish(REGISTER, params, &[synth, fused], &dir)
}
