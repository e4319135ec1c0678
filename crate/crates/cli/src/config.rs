use std::collections::BTreeMap;
use std::path::Path;

use morphkit::eval::EvalConfig;
use morphkit::fusion::{FusionParams, IcpParams};
use morphkit::morphable::{Regularization, Truncation, EXPRESSION_TRUNCATION, SHAPE_TRUNCATION};
use morphkit::registration::NicpParams;
use morphkit::synthetic::{PopulationParams, ScanSimParams};
use serde::{Deserialize, Serialize};

use crate::args::{Cli, FormatArg};
use crate::error::CliError;

/// Offset between the population seed and the scan-noise seed.
const SCAN_SEED_OFFSET: u64 = 0x9E37_79B9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Overrides the population and scan seeds when set.
    pub seed: Option<u64>,
    /// `env_logger` filter; `RUST_LOG` takes precedence.
    pub log_level: String,
    pub format: FormatArg,
    pub synth: SynthConfig,
    pub fusion: FusionParams,
    pub remesh: RemeshConfig,
    pub registration: RegistrationConfig,
    pub model: ModelConfig,
    pub fit: FitConfig,
    pub eval: EvalConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: None,
            log_level: "info".into(),
            format: FormatArg::Ply,
            synth: SynthConfig::default(),
            fusion: FusionParams::default(),
            remesh: RemeshConfig::default(),
            registration: RegistrationConfig::default(),
            model: ModelConfig::default(),
            fit: FitConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub population: PopulationParams,
    pub scan: ScanSimParams,
}

/// Surface generation from fused clouds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RemeshConfig {
    /// External remesher: program and arguments, with `{input}` (fused PLY)
    /// and `{output}` (mesh path) substituted. `None` transfers the known
    /// synthetic topology onto the fused points.
    pub external_command: Option<Vec<String>>,
    /// Largest vertex-to-point distance accepted by topology transfer, in
    /// mean edge lengths of the reference mesh.
    pub transfer_tolerance: f64,
}

impl Default for RemeshConfig {
    fn default() -> Self {
        Self {
            external_command: None,
            transfer_tolerance: 0.5,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegistrationConfig {
    pub coarse_icp: IcpParams,
    pub nicp: NicpParams,
    /// Stiffness-graph radius; `None` derives it from the coarse mesh.
    pub stiffness_radius: Option<f64>,
    pub lambda_overrides: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub shape: Truncation,
    pub expression: Truncation,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            shape: SHAPE_TRUNCATION,
            expression: EXPRESSION_TRUNCATION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub regularization: Regularization,
    /// Closest-point rounds after the landmark fit.
    pub icp_rounds: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            regularization: Regularization::default(),
            icp_rounds: 10,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => CliError::MissingInput(path.to_path_buf()),
            _ => CliError::Config(format!("{}: {e}", path.display())),
        })?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Folds command-line flags in; flags win over the file.
    pub fn apply_flags(&mut self, cli: &Cli) {
        if let Some(seed) = cli.seed {
            self.seed = Some(seed);
        }
        if let Some(radii) = &cli.radii {
            self.eval.radii = radii.clone();
        }
        for (part, value) in &cli.lambda_overrides {
            self.registration.lambda_overrides.insert(part.clone(), *value);
        }
        if let Some(format) = cli.format {
            self.format = format;
        }
        if let Some(seed) = self.seed {
            self.synth.population.seed = seed;
            self.synth.scan.seed = seed.wrapping_add(SCAN_SEED_OFFSET);
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let config = |e: morphkit::MorphError| CliError::Config(e.to_string());
        self.synth.scan.validate().map_err(config)?;
        self.synth.population.head.validate().map_err(config)?;
        self.fusion.icp.validate().map_err(config)?;
        self.registration.coarse_icp.validate().map_err(config)?;
        self.registration.nicp.validate().map_err(config)?;
        self.model.shape.validate().map_err(config)?;
        self.model.expression.validate().map_err(config)?;
        self.eval.validate().map_err(config)?;
        if !(self.remesh.transfer_tolerance > 0.0) {
            return Err(CliError::Config("remesh.transfer_tolerance must be positive".into()));
        }
        if self.remesh.external_command.as_ref().is_some_and(|c| c.is_empty()) {
            return Err(CliError::Config("remesh.external_command must name a program".into()));
        }
        if let Some(r) = self.registration.stiffness_radius {
            if !(r > 0.0) {
                return Err(CliError::Config(
                    "registration.stiffness_radius must be positive".into(),
                ));
            }
        }
        let Regularization { shape, expression } = self.fit.regularization;
        if !(shape >= 0.0 && expression >= 0.0) {
            return Err(CliError::Config(
                "fit.regularization weights must be non-negative".into(),
            ));
        }
        Ok(())
    }
}
