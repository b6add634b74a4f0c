//! Subcommand implementations. Each returns the stdout summary table.

mod discrete;
mod optimize;
mod stability;
mod verify;

use crate::defaults::Defaults;
use crate::error::{CliError, CliResult};
use crate::{Cli, Command};
use noisestab::Correlation;
use serde_json::{json, Value};

pub fn run(cli: &Cli, defaults: &Defaults) -> CliResult<String> {
    match &cli.command {
        Command::Stability(a) => stability::run(cli, defaults, a),
        Command::Discrete(a) => discrete::run(cli, defaults, a),
        Command::Optimize(a) => optimize::run(cli, defaults, a),
        Command::Verify(a) => verify::run(cli, defaults, a),
    }
}

pub(crate) fn correlations(values: &[f64]) -> CliResult<Vec<Correlation>> {
    values.iter().map(|&r| Correlation::new(r).map_err(|e| CliError::Input(e.to_string()))).collect()
}

/// Common report header: the defaults in force and the job parameters.
pub(crate) fn header(cli: &Cli, defaults: &Defaults, command: &str) -> serde_json::Map<String, Value> {
    let mut m = serde_json::Map::new();
    m.insert("command".into(), json!(command));
    m.insert("seed".into(), json!(cli.seed));
    m.insert("defaults".into(), serde_json::to_value(defaults).expect("defaults serialize"));
    m
}

pub(crate) fn pass_fail(ok: bool) -> String {
    if ok { "PASS" } else { "FAIL" }.to_string()
}
