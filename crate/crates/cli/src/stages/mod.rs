//! Pipeline stages. Each reads the previous stage's directory under the
//! output root, writes its own directory afresh, and finishes with a run
//! manifest. Sample paths inside an index are relative to that index.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use morphkit::mesh::{load_mesh, MeshFormat};
use morphkit::{LandmarkSet3, MorphError, TriMesh};
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::{CliError, StageContext};
use crate::manifest::{digest_paths, RunManifest, RUN_MANIFEST};

mod evaluate;
mod fit;
mod fuse;
mod model;
mod register;
mod synth;

pub use fuse::transfer_topology;

pub const SYNTH: &str = "synth";
pub const FUSE: &str = "fuse";
pub const REGISTER: &str = "register";
pub const BUILD_MODEL: &str = "build-model";
pub const FIT: &str = "fit";
pub const EVALUATE: &str = "evaluate";
pub const PIPELINE: &str = "pipeline";

pub const INDEX: &str = "index.json";

pub struct Context {
    pub out: PathBuf,
    pub config: PipelineConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    /// `<subject>/e<expression>`.
    pub id: String,
    pub subject: String,
    pub expression: usize,
    pub attributes: BTreeMap<String, String>,
    pub mesh_path: String,
    pub landmarks_path: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SampleIndex {
    pub samples: Vec<IndexEntry>,
}

impl SampleIndex {
    fn load(path: &Path, stage: &'static str) -> Result<Self, CliError> {
        require(path)?;
        let text = fs::read_to_string(path).map_err(|e| io(path, e)).stage(stage)?;
        serde_json::from_str(&text)
            .map_err(|e| MorphError::Format {
                format: "index",
                location: path.display().to_string(),
                message: e.to_string(),
            })
            .stage(stage)
    }

    fn save(&self, dir: &Path, stage: &'static str) -> Result<(), CliError> {
        write_json(&dir.join(INDEX), self, stage)
    }
}

impl IndexEntry {
    fn load(&self, dir: &Path, stage: &'static str) -> Result<(TriMesh, LandmarkSet3), CliError> {
        let mesh = load_any_mesh(&dir.join(&self.mesh_path)).stage(stage)?;
        let lms = LandmarkSet3::load(&dir.join(&self.landmarks_path)).stage(stage)?;
        Ok((mesh, lms))
    }
}

pub(crate) fn io(path: &Path, source: std::io::Error) -> MorphError {
    MorphError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub(crate) fn require(path: &Path) -> Result<(), CliError> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::MissingInput(path.to_path_buf()))
    }
}

pub(crate) fn load_any_mesh(path: &Path) -> morphkit::Result<TriMesh> {
    let format = MeshFormat::from_path(path)
        .ok_or_else(|| MorphError::Parameter(format!("unrecognised mesh extension: {}", path.display())))?;
    load_mesh(path, format)
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T, stage: &'static str) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("plain data serialises");
    text.push('\n');
    fs::write(path, text).map_err(|e| io(path, e)).stage(stage)
}

pub(crate) fn ensure_parent(path: &Path, stage: &'static str) -> Result<(), CliError> {
    let parent = path.parent().expect("artifact paths have a parent");
    fs::create_dir_all(parent).map_err(|e| io(parent, e)).stage(stage)
}

impl Context {
    pub fn new(out: PathBuf, config: PipelineConfig) -> Self {
        Self { out, config }
    }

    pub fn format(&self) -> MeshFormat {
        self.config.format.into()
    }

    pub fn dir(&self, stage: &str) -> PathBuf {
        self.out.join(stage)
    }

    /// Empties and recreates a stage's own directory.
    fn fresh_dir(&self, stage: &'static str) -> Result<PathBuf, CliError> {
        let dir = self.dir(stage);
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| io(&dir, e)).stage(stage)?;
        }
        fs::create_dir_all(&dir).map_err(|e| io(&dir, e)).stage(stage)?;
        Ok(dir)
    }

    fn finish(
        &self,
        stage: &'static str,
        parameters: serde_json::Value,
        inputs: &[PathBuf],
        dir: &Path,
    ) -> Result<PathBuf, CliError> {
        let manifest = RunManifest {
            tool: "morphkit".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            stage: stage.into(),
            seed: self.config.seed,
            parameters,
            inputs: digest_paths(&self.out, inputs)?,
            outputs: digest_paths(&self.out, &[dir.to_path_buf()])?,
        };
        let path = manifest.write(dir)?;
        log::info!(
            "{stage}: {} outputs, manifest {}",
            manifest.outputs.len(),
            path.display()
        );
        Ok(path)
    }
}

pub use evaluate::run as evaluate;
pub use fit::run as fit;
pub use fuse::run as fuse;
pub use model::run as build_model;
pub use register::run as register;
pub use synth::run as synth;

/// Every stage in order, then a top-level manifest over the stage manifests.
pub fn pipeline(ctx: &Context) -> Result<PathBuf, CliError> {
    let manifests = vec![
        synth(ctx)?,
        fuse(ctx, &Default::default())?,
        register(ctx)?,
        build_model(ctx)?,
        fit(ctx)?,
        evaluate(ctx)?,
    ];
    let manifest = RunManifest {
        tool: "morphkit".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        stage: PIPELINE.into(),
        seed: ctx.config.seed,
        parameters: serde_json::to_value(&ctx.config).expect("config serialises"),
        inputs: Vec::new(),
        outputs: digest_paths(&ctx.out, &manifests)?,
    };
    let path = ctx.out.join(RUN_MANIFEST);
    fs::write(&path, manifest.to_json())
        .map_err(|e| io(&path, e))
        .stage(PIPELINE)?;
    Ok(path)
}
