use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use morphkit::mesh::MeshFormat;
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(
    name = "morphkit",
    version,
    about = "Face-scan fusion, registration, morphable models and evaluation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// TOML pipeline configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Seed for the synthetic population and scan noise.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,

    /// Root directory for every stage's artifacts.
    #[arg(long, global = true, value_name = "DIR", default_value = "morphkit-out")]
    pub out: PathBuf,

    /// Crop radii for evaluation, in interocular units.
    #[arg(long, global = true, value_delimiter = ',', value_name = "R,...")]
    pub radii: Option<Vec<f64>>,

    /// Per-part stiffness overrides.
    #[arg(long, global = true, value_delimiter = ',', value_name = "PART=VALUE,...", value_parser = parse_override)]
    pub lambda_overrides: Vec<(String, f64)>,

    /// Mesh file format for written meshes.
    #[arg(long, global = true, value_enum)]
    pub format: Option<FormatArg>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a seeded synthetic population with simulated scans.
    Synth,
    /// Fuse three-view scans into one cloud and surface mesh per sample.
    Fuse(FuseArgs),
    /// Register the template to every fused scan.
    Register,
    /// Build shape and expression PCA models from registered meshes.
    BuildModel,
    /// Fit the morphable model to every registered mesh.
    Fit,
    /// Score fitted meshes against ground truth.
    Evaluate,
    /// Run every stage in order.
    Pipeline,
}

/// Fusing one explicit triple instead of the synthetic dataset.
#[derive(Debug, Default, Args)]
pub struct FuseArgs {
    #[arg(long, value_name = "PLY", requires_all = ["middle", "right"])]
    pub left: Option<PathBuf>,
    #[arg(long, value_name = "PLY", requires_all = ["left", "right"])]
    pub middle: Option<PathBuf>,
    #[arg(long, value_name = "PLY", requires_all = ["left", "middle"])]
    pub right: Option<PathBuf>,
    #[arg(long, value_name = "JSON", requires = "left")]
    pub landmarks_left: Option<PathBuf>,
    #[arg(long, value_name = "JSON", requires = "middle")]
    pub landmarks_middle: Option<PathBuf>,
    #[arg(long, value_name = "JSON", requires = "right")]
    pub landmarks_right: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormatArg {
    Obj,
    #[default]
    Ply,
}

impl From<FormatArg> for MeshFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Obj => MeshFormat::Obj,
            FormatArg::Ply => MeshFormat::PlyBinary,
        }
    }
}

fn parse_override(s: &str) -> Result<(String, f64), String> {
    let (part, value) = s
        .split_once('=')
        .ok_or_else(|| format!("expected PART=VALUE, got {s:?}"))?;
    let value: f64 = value
        .trim()
        .parse()
        .map_err(|e| format!("bad stiffness for {part}: {e}"))?;
    if part.trim().is_empty() {
        return Err(format!("empty part name in {s:?}"));
    }
    Ok((part.trim().to_string(), value))
}
