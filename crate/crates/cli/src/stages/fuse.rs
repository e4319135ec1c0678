use std::path::{Path, PathBuf};
use std::process::Command;

use morphkit::fusion::{fuse_views, ViewScan};
use morphkit::mesh::{load_point_cloud, save_mesh, save_point_cloud, Landmark, SpatialIndex};
use morphkit::synthetic::{Manifest, ManifestSample, ManifestView};
use morphkit::{LandmarkSet3, MorphError, PointCloud, TriMesh};
use serde_json::json;

use super::{ensure_parent, io, load_any_mesh, require, Context, IndexEntry, SampleIndex, FUSE, SYNTH};
use crate::args::FuseArgs;
use crate::error::{CliError, StageContext};

pub fn run(ctx: &Context, args: &FuseArgs) -> Result<PathBuf, CliError> {
    if let (Some(l), Some(m), Some(r)) = (&args.left, &args.middle, &args.right) {
        let lms = match (&args.landmarks_left, &args.landmarks_middle, &args.landmarks_right) {
            (Some(a), Some(b), Some(c)) => [a, b, c],
            _ => {
                return Err(CliError::Config(
                    "explicit fusion needs --landmarks-left, --landmarks-middle and --landmarks-right".into(),
                ))
            }
        };
        return run_explicit(ctx, [l, m, r], lms);
    }

    let synth = ctx.dir(SYNTH);
    let manifest_path = synth.join("manifest.json");
    require(&manifest_path)?;
    let manifest = Manifest::load(&manifest_path).stage(FUSE)?;
    let dir = ctx.fresh_dir(FUSE)?;
    let mut index = SampleIndex::default();
    for subject in &manifest.subjects {
        for sample in &subject.samples {
            let id = format!("{}/e{}", subject.id, sample.expression);
            let (views, middle) = load_views(&synth, sample)?;
            let fused = fuse_views(&views[0], &views[1], &views[2], &ctx.config.fusion).stage(FUSE)?;
            let cloud_path = dir.join(format!("{id}.fused.ply"));
            ensure_parent(&cloud_path, FUSE)?;
            save_point_cloud(&fused.cloud, &cloud_path, true).stage(FUSE)?;
            fused
                .landmarks
                .save(&dir.join(format!("{id}.fused.landmarks.json")))
                .stage(FUSE)?;

            let mesh_path = format!("{id}.{}", ctx.format().extension());
            let surface = match &ctx.config.remesh.external_command {
                Some(cmd) => external_remesh(cmd, &cloud_path, &dir.join(&mesh_path))?,
                None => {
                    // The exact pose only places the known topology; every
                    // kept vertex lands on a fused point.
                    let reference = load_any_mesh(&synth.join(&sample.mesh_path)).stage(FUSE)?;
                    let reference = reference.transformed(&middle.ground_truth_to_world.inverse());
                    transfer_topology(&reference, &fused.cloud, ctx.config.remesh.transfer_tolerance).stage(FUSE)?
                }
            };
            save_mesh(&surface, &dir.join(&mesh_path), ctx.format()).stage(FUSE)?;
            let landmarks_path = format!("{id}.landmarks.json");
            snap_landmarks(&fused.landmarks, &surface)
                .stage(FUSE)?
                .save(&dir.join(&landmarks_path))
                .stage(FUSE)?;
            log::info!(
                "fuse {id}: {} points, {} seam vertices, surface {} vertices",
                fused.cloud.len(),
                fused.seam_vertices,
                surface.vertex_count()
            );

            let mut attributes = subject.attributes.clone();
            attributes.insert("expression".into(), sample.category.clone());
            index.samples.push(IndexEntry {
                id,
                subject: subject.id.clone(),
                expression: sample.expression,
                attributes,
                mesh_path,
                landmarks_path,
            });
        }
    }
    index.save(&dir, FUSE)?;
    let params = json!({ "fusion": ctx.config.fusion, "remesh": ctx.config.remesh });
    ctx.finish(FUSE, params, &[synth], &dir)
}

fn load_views<'a>(synth: &Path, sample: &'a ManifestSample) -> Result<([ViewScan; 3], &'a ManifestView), CliError> {
    let find = |tag: &str| {
        sample
            .views
            .iter()
            .find(|v| v.tag == tag)
            .ok_or_else(|| CliError::Stage {
                stage: FUSE,
                source: MorphError::Data(format!("{} has no {tag} view", sample.mesh_path)),
            })
    };
    let load = |v: &ManifestView| -> Result<ViewScan, CliError> {
        Ok(ViewScan {
            cloud: load_point_cloud(&synth.join(&v.cloud_path)).stage(FUSE)?,
            landmarks: LandmarkSet3::load(&synth.join(&v.landmarks_path)).stage(FUSE)?,
        })
    };
    let (l, m, r) = (find("left")?, find("middle")?, find("right")?);
    Ok(([load(l)?, load(m)?, load(r)?], m))
}

fn run_explicit(ctx: &Context, clouds: [&PathBuf; 3], lms: [&PathBuf; 3]) -> Result<PathBuf, CliError> {
    for p in clouds.iter().chain(&lms) {
        require(p)?;
    }
    let load = |i: usize| -> Result<ViewScan, CliError> {
        Ok(ViewScan {
            cloud: load_point_cloud(clouds[i]).stage(FUSE)?,
            landmarks: LandmarkSet3::load(lms[i]).stage(FUSE)?,
        })
    };
    let views = [load(0)?, load(1)?, load(2)?];
    let dir = ctx.fresh_dir(FUSE)?;
    let fused = fuse_views(&views[0], &views[1], &views[2], &ctx.config.fusion).stage(FUSE)?;
    let cloud_path = dir.join("fused.ply");
    save_point_cloud(&fused.cloud, &cloud_path, true).stage(FUSE)?;
    fused.landmarks.save(&dir.join("fused.landmarks.json")).stage(FUSE)?;
    if let Some(cmd) = &ctx.config.remesh.external_command {
        let mesh_path = dir.join(format!("fused.{}", ctx.format().extension()));
        let surface = external_remesh(cmd, &cloud_path, &mesh_path)?;
        save_mesh(&surface, &mesh_path, ctx.format()).stage(FUSE)?;
    }
    log::info!(
        "fuse: {} points, {} seam vertices",
        fused.cloud.len(),
        fused.seam_vertices
    );
    let inputs: Vec<PathBuf> = clouds.iter().chain(&lms).map(|p| p.to_path_buf()).collect();
    let params = json!({ "fusion": ctx.config.fusion, "remesh": ctx.config.remesh });
    ctx.finish(FUSE, params, &inputs, &dir)
}

/// Runs the configured remesher on a fused cloud and loads what it wrote.
fn external_remesh(cmd: &[String], input: &Path, output: &Path) -> Result<TriMesh, CliError> {
    let fill = |a: &String| {
        a.replace("{input}", &input.to_string_lossy())
            .replace("{output}", &output.to_string_lossy())
    };
    let program = fill(&cmd[0]);
    let status = Command::new(&program)
        .args(cmd[1..].iter().map(fill))
        .status()
        .map_err(|e| CliError::Stage {
            stage: FUSE,
            source: io(Path::new(&program), e),
        })?;
    if !status.success() {
        return Err(CliError::Stage {
            stage: FUSE,
            source: MorphError::Data(format!("remesher {program} exited with {status}")),
        });
    }
    load_any_mesh(output).stage(FUSE)
}

/// Carries `reference` topology onto a fused cloud: each reference vertex
/// takes its nearest fused point when that lies within `tolerance` mean edge
/// lengths, and only faces with all three corners matched survive. Unused
/// vertices are dropped; the relative order of kept vertices is preserved.
pub fn transfer_topology(reference: &TriMesh, cloud: &PointCloud, tolerance: f64) -> morphkit::Result<TriMesh> {
    let index = SpatialIndex::new(cloud.points());
    let limit = tolerance * reference.mean_edge_length();
    let matched = reference
        .vertices()
        .iter()
        .map(|v| index.nearest(v).map(|(i, d)| (d <= limit).then(|| cloud.points()[i])))
        .collect::<morphkit::Result<Vec<_>>>()?;
    let faces: Vec<[usize; 3]> = reference
        .faces()
        .iter()
        .filter(|f| f.iter().all(|&i| matched[i].is_some()))
        .copied()
        .collect();
    let mut remap = vec![usize::MAX; matched.len()];
    for f in &faces {
        for &i in f {
            remap[i] = 0;
        }
    }
    let mut vertices = Vec::new();
    for (i, slot) in remap.iter_mut().enumerate() {
        if *slot == 0 {
            *slot = vertices.len();
            vertices.push(matched[i].expect("face corners are matched"));
        }
    }
    if faces.is_empty() {
        return Err(MorphError::Degenerate(
            "no reference face lies on the fused cloud".into(),
        ));
    }
    let faces = faces.iter().map(|f| [remap[f[0]], remap[f[1]], remap[f[2]]]).collect();
    TriMesh::new(vertices, faces)
}

/// Moves each landmark onto its nearest surface vertex.
fn snap_landmarks(lms: &LandmarkSet3, surface: &TriMesh) -> morphkit::Result<LandmarkSet3> {
    let index = SpatialIndex::new(surface.vertices());
    let entries = lms
        .entries()
        .iter()
        .map(|e| {
            let (i, _) = index.nearest(&e.position)?;
            Ok(Landmark {
                id: e.id,
                position: surface.vertices()[i],
                vertex: Some(i),
            })
        })
        .collect::<morphkit::Result<Vec<_>>>()?;
    LandmarkSet3::new(lms.scheme().clone(), entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use morphkit::Vec3;

    fn square() -> TriMesh {
        let v = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(1.0, 1.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(2.0, 0.0, 0.0),
        ];
        TriMesh::new(v, vec![[0, 1, 2], [0, 2, 3], [1, 4, 2]]).unwrap()
    }

    #[test]
    fn transfer_keeps_only_fully_matched_faces() {
        let m = square();
        let shift = Vec3::new(0.0, 0.0, 0.01);
        let cloud = PointCloud::new(m.vertices()[..4].iter().map(|v| v + shift).collect());
        let out = transfer_topology(&m, &cloud, 0.5).unwrap();
        assert_eq!(out.faces(), &[[0, 1, 2], [0, 2, 3]]);
        assert_eq!(out.vertex_count(), 4);
        for (a, b) in out.vertices().iter().zip(m.vertices()) {
            assert!((a - (b + shift)).norm() < 1e-15);
        }
    }

    #[test]
    fn transfer_rejects_far_points() {
        let m = square();
        let cloud = PointCloud::new(vec![Vec3::new(10.0, 10.0, 10.0)]);
        assert!(matches!(
            transfer_topology(&m, &cloud, 0.5),
            Err(MorphError::Degenerate(_))
        ));
    }
}
