use std::path::PathBuf;

use morphkit::synthetic::{generate_population, write_population};
use serde_json::json;

use super::{Context, SYNTH};
use crate::error::{CliError, StageContext};

pub fn run(ctx: &Context) -> Result<PathBuf, CliError> {
    let cfg = &ctx.config.synth;
    let dir = ctx.fresh_dir(SYNTH)?;
    let pop = generate_population(&cfg.population).stage(SYNTH)?;
    write_population(&pop, &dir, ctx.format(), Some(&cfg.scan)).stage(SYNTH)?;
    log::info!(
        "synth: {} subjects x {} expressions",
        pop.subjects.len(),
        cfg.population.n_expressions
    );
    let params = json!({ "population": cfg.population, "scan": cfg.scan, "format": ctx.config.format });
    ctx.finish(SYNTH, params, &[], &dir)
}
