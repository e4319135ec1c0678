use std::collections::BTreeMap;
use std::path::PathBuf;

use morphkit::fusion::fit_similarity;
use morphkit::morphable::{build_expression_model, build_shape_model, save_model, MorphableModel};
use morphkit::{MorphError, TriMesh};
use serde_json::json;

use super::register::load_template;
use super::{write_json, Context, SampleIndex, BUILD_MODEL, INDEX, REGISTER, SYNTH};
use crate::error::{CliError, StageContext};

pub const MODEL_FILE: &str = "model.p3dm";

/// Rigid Procrustes onto the template; scale is identity, not pose.
fn align_to(reference: &TriMesh, mesh: &TriMesh) -> morphkit::Result<TriMesh> {
    let t = fit_similarity(mesh.vertices(), reference.vertices(), None, false)?;
    Ok(mesh.transformed(&t))
}

pub fn run(ctx: &Context) -> Result<PathBuf, CliError> {
    let cfg = &ctx.config.model;
    let (synth, registered) = (ctx.dir(SYNTH), ctx.dir(REGISTER));
    let index = SampleIndex::load(&registered.join(INDEX), BUILD_MODEL)?;
    let template = load_template(&synth, BUILD_MODEL)?;

    let mut neutrals = BTreeMap::new();
    let mut expressions = Vec::new();
    for entry in &index.samples {
        let (mesh, _) = entry.load(&registered, BUILD_MODEL)?;
        let aligned = align_to(&template.mesh, &mesh).stage(BUILD_MODEL)?;
        if entry.expression == 0 {
            neutrals.insert(entry.subject.clone(), aligned);
        } else {
            expressions.push((entry.subject.clone(), aligned));
        }
    }
    let neutral_list: Vec<TriMesh> = neutrals.values().cloned().collect();
    let (mean, shape) = build_shape_model(&neutral_list, &cfg.shape).stage(BUILD_MODEL)?;
    let expression = build_expression_model(&expressions, &neutrals, &cfg.expression).stage(BUILD_MODEL)?;
    let landmark_vertices = template
        .landmarks
        .entries()
        .iter()
        .map(|e| {
            e.vertex
                .map(|v| (e.id, v))
                .ok_or_else(|| MorphError::Data(format!("template landmark {} has no vertex", e.id)))
        })
        .collect::<morphkit::Result<Vec<_>>>()
        .stage(BUILD_MODEL)?;
    let (shape_retained, expression_retained) = (shape.retained_fraction(), expression.retained_fraction());
    let model = MorphableModel::new(
        mean,
        shape,
        expression,
        template.mesh.faces().to_vec(),
        template.landmarks.scheme().clone(),
        landmark_vertices,
    )
    .stage(BUILD_MODEL)?;

    let dir = ctx.fresh_dir(BUILD_MODEL)?;
    save_model(&model, &dir.join(MODEL_FILE)).stage(BUILD_MODEL)?;
    let summary = json!({
        "vertices": model.vertex_count(),
        "neutral_meshes": neutral_list.len(),
        "expression_meshes": expressions.len(),
        "shape_components": model.shape_components(),
        "expression_components": model.expression_components(),
        "shape_retained_fraction": shape_retained,
        "expression_retained_fraction": expression_retained,
        "shape_variances": model.shape_variances(),
        "expression_variances": model.expression_variances(),
    });
    write_json(&dir.join("model.json"), &summary, BUILD_MODEL)?;
    log::info!(
        "build-model: {} shape and {} expression components",
        model.shape_components(),
        model.expression_components()
    );
    let params =
        json!({ "shape": cfg.shape, "expression": cfg.expression, "alignment": "rigid-procrustes-to-template" });
    ctx.finish(BUILD_MODEL, params, &[synth, registered], &dir)
}
