use std::collections::BTreeMap;
use std::path::PathBuf;

use morphkit::eval::{benchmark, EvalSample};
use morphkit::synthetic::Manifest;
use morphkit::{LandmarkSet3, MorphError};
use serde_json::json;

use super::{load_any_mesh, require, Context, SampleIndex, EVALUATE, FIT, INDEX, SYNTH};
use crate::error::{CliError, StageContext};

/// Scores fitted meshes against the synthetic ground truth.
pub fn run(ctx: &Context) -> Result<PathBuf, CliError> {
    let cfg = &ctx.config.eval;
    let (synth, fitted) = (ctx.dir(SYNTH), ctx.dir(FIT));
    let index = SampleIndex::load(&fitted.join(INDEX), EVALUATE)?;
    let manifest_path = synth.join("manifest.json");
    require(&manifest_path)?;
    let manifest = Manifest::load(&manifest_path).stage(EVALUATE)?;
    let truth: BTreeMap<String, (String, String)> = manifest
        .subjects
        .iter()
        .flat_map(|s| {
            s.samples.iter().map(move |x| {
                (
                    format!("{}/e{}", s.id, x.expression),
                    (x.mesh_path.clone(), x.landmarks_path.clone()),
                )
            })
        })
        .collect();

    let mut samples = Vec::with_capacity(index.samples.len());
    for entry in &index.samples {
        let (prediction, prediction_landmarks) = entry.load(&fitted, EVALUATE)?;
        let (mesh_path, lms_path) = truth
            .get(&entry.id)
            .ok_or_else(|| MorphError::Data(format!("no ground truth for {}", entry.id)))
            .stage(EVALUATE)?;
        samples.push(EvalSample {
            id: entry.id.clone(),
            prediction,
            prediction_landmarks,
            ground_truth: load_any_mesh(&synth.join(mesh_path)).stage(EVALUATE)?,
            ground_truth_landmarks: LandmarkSet3::load(&synth.join(lms_path)).stage(EVALUATE)?,
            attributes: entry.attributes.clone(),
        });
    }
    let report = benchmark(&samples, cfg).stage(EVALUATE)?;
    let dir = ctx.fresh_dir(EVALUATE)?;
    report.write(&dir).stage(EVALUATE)?;
    if let Some(all) = report.groups.iter().find(|g| g.group == "all") {
        log::info!(
            "evaluate: NME mean {:?}, ARMSE means {:?}",
            all.nme.as_ref().map(|s| s.mean),
            all.armse.iter().map(|a| a.as_ref().map(|s| s.mean)).collect::<Vec<_>>()
        );
    }
    ctx.finish(EVALUATE, json!({ "eval": cfg }), &[synth, fitted], &dir)
}
