use std::path::PathBuf;

use morphkit::mesh::save_mesh;
use morphkit::morphable::{fit_dense, load_model};
use serde_json::json;

use super::model::MODEL_FILE;
use super::{ensure_parent, require, write_json, Context, IndexEntry, SampleIndex, BUILD_MODEL, FIT, INDEX, REGISTER};
use crate::error::{CliError, StageContext};

/// Fits the model to every registered mesh, which carries the model's own
/// topology and landmarks.
pub fn run(ctx: &Context) -> Result<PathBuf, CliError> {
    let cfg = &ctx.config.fit;
    let (registered, model_dir) = (ctx.dir(REGISTER), ctx.dir(BUILD_MODEL));
    let model_path = model_dir.join(MODEL_FILE);
    require(&model_path)?;
    let index = SampleIndex::load(&registered.join(INDEX), FIT)?;
    let model = load_model(&model_path).stage(FIT)?;
    let dir = ctx.fresh_dir(FIT)?;
    let mut out = SampleIndex::default();
    for entry in &index.samples {
        let (target, target_lms) = entry.load(&registered, FIT)?;
        let fit = fit_dense(&model, &target, &target_lms, &cfg.regularization, cfg.icp_rounds).stage(FIT)?;
        let mesh = model
            .synthesize(&fit.coefficients)
            .stage(FIT)?
            .transformed(&fit.transform);
        let lms = model
            .landmarks(&fit.coefficients)
            .stage(FIT)?
            .map_positions(|p| fit.transform.apply(p));

        let mesh_path = format!("{}.{}", entry.id, ctx.format().extension());
        let landmarks_path = format!("{}.landmarks.json", entry.id);
        ensure_parent(&dir.join(&mesh_path), FIT)?;
        save_mesh(&mesh, &dir.join(&mesh_path), ctx.format()).stage(FIT)?;
        lms.save(&dir.join(&landmarks_path)).stage(FIT)?;
        let record = json!({
            "coefficients": fit.coefficients,
            "transform": fit.transform,
            "rms": fit.rms,
            "cost": fit.cost,
            "history": fit.history,
        });
        write_json(&dir.join(format!("{}.fit.json", entry.id)), &record, FIT)?;
        log::info!(
            "fit {}: rms {:.3e} after {} rounds",
            entry.id,
            fit.rms,
            fit.history.len()
        );
        out.samples.push(IndexEntry {
            mesh_path,
            landmarks_path,
            ..entry.clone()
        });
    }
    out.save(&dir, FIT)?;
    let params = json!({ "regularization": cfg.regularization, "icp_rounds": cfg.icp_rounds });
    ctx.finish(FIT, params, &[registered, model_path], &dir)
}
