use super::header;
use crate::defaults::Defaults;
use crate::error::{CliError, CliResult};
use crate::output::{table, OutDir};
use crate::{Cli, OptimizeArgs};
use noisestab::gaussian::{bilinear_noise_stability, noise_stability, Partition, PartitionPair};
use noisestab::partition::{
    dimension_reduction_check, extract_interfaces, first_variation_check, mesh_csv, optimize, round_to_partition, Mode,
    OptimizerConfig, OptimizerSpec,
};
use serde_json::{json, Value};
use std::path::Path;

fn read_config(path: &Path) -> CliResult<(OptimizerSpec, OptimizerConfig)> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let spec: OptimizerSpec = if is_json {
        serde_json::from_str(&text).map_err(|e| CliError::Input(format!("config: {e}")))?
    } else {
        toml::from_str(&text).map_err(|e| CliError::Input(format!("config: {e}")))?
    };
    let cfg = spec.clone().into_config().map_err(|e| CliError::Input(format!("config: {e}")))?;
    Ok((spec, cfg))
}

fn equal_volumes(cfg: &OptimizerConfig) -> bool {
    let target = 1.0 / cfg.m as f64;
    cfg.volume_targets.entries().iter().all(|v| (v - target).abs() <= 1e-9)
}

fn first_axis(d: usize) -> Vec<f64> {
    let mut v = vec![0.0; d];
    v[0] = 1.0;
    v
}

/// Known optimum for the configuration, when there is one.
fn reference(cfg: &OptimizerConfig) -> noisestab::Result<Option<(&'static str, f64)>> {
    if !equal_volumes(cfg) {
        return Ok(None);
    }
    Ok(match (cfg.mode, cfg.m) {
        (Mode::MaximizeSingle, 2) => {
            let h = Partition::halfspaces(cfg.d, first_axis(cfg.d), 0.0)?;
            Some(("halfspace", noise_stability(&h, cfg.rho)?.value))
        }
        (Mode::MaximizeSingle, 3) if cfg.d >= 2 => {
            let c = Partition::simplex_cones(cfg.d, 3)?;
            Some(("simplex cones", noise_stability(&c, cfg.rho)?.value))
        }
        (Mode::MinimizeBilinear, 2) => {
            let h = Partition::halfspaces(cfg.d, first_axis(cfg.d), 0.0)?;
            let pair = PartitionPair::new(h.clone(), h.reflect())?;
            Some(("halfspace and reflection", bilinear_noise_stability(&pair, cfg.rho)?.value))
        }
        _ => None,
    })
}

pub fn run(cli: &Cli, defaults: &Defaults, args: &OptimizeArgs) -> CliResult<String> {
    let (spec, cfg) = read_config(&args.config)?;
    let result = optimize(&cfg)?;
    let out = OutDir::new(&cli.out);

    let rounded = round_to_partition(&result.assignment)?;
    out.write("partition.json", &rounded.to_json())?;
    let partner = match &result.partner {
        Some(g) => {
            let q = round_to_partition(g)?;
            out.write("partner-partition.json", &q.to_json())?;
            Some(q)
        }
        None => None,
    };
    out.write("trace.csv", &result.trace_csv())?;

    let rounded_objective = match &partner {
        None => noise_stability(&rounded, cfg.rho)?.value,
        Some(q) => bilinear_noise_stability(&PartitionPair::new(rounded.clone(), q.clone())?, cfg.rho)?.value,
    };

    let mut notes = Vec::new();
    let meshes = match extract_interfaces(&rounded) {
        Ok(m) => Some(m),
        Err(e) => {
            notes.push(format!("interface extraction failed: {e}"));
            None
        }
    };
    if let Some(m) = &meshes {
        if cfg.d == 2 {
            out.write("mesh.csv", &mesh_csv(m)?)?;
        }
    }
    let variation = match (cfg.mode, &meshes) {
        (Mode::MaximizeSingle, Some(_)) if cfg.rho.value() > 0.0 => match first_variation_check(&rounded, cfg.rho) {
            Ok(r) => Some(r),
            Err(e) => {
                notes.push(format!("first variation skipped: {e}"));
                None
            }
        },
        _ => None,
    };
    let dimension = match dimension_reduction_check(&rounded) {
        Ok(r) => Some(r),
        Err(e) => {
            notes.push(format!("dimension check skipped: {e}"));
            None
        }
    };
    let reference = reference(&cfg)?;
    let reference_ok = reference.map(|(_, v)| (result.objective - v).abs() <= defaults.optimize.reference_tol);
    let sign_ok = variation.as_ref().map(|v| v.min_normal_sign_fraction() >= defaults.optimize.normal_sign_fraction);

    let mut report = header(cli, defaults, "optimize");
    report.insert("config".into(), serde_json::to_value(&spec).expect("config serializes"));
    report.insert("converged".into(), json!(result.converged));
    report.insert("iterations".into(), json!(result.iterations));
    report.insert("restart".into(), json!(result.restart));
    report.insert("objective".into(), json!(result.objective));
    report.insert("roundedObjective".into(), json!(rounded_objective));
    report.insert("maxVolumeViolation".into(), json!(result.max_volume_violation));
    report.insert("multipliers".into(), json!(result.multipliers));
    report.insert("firstVariation".into(), serde_json::to_value(&variation).expect("report serializes"));
    report.insert(
        "normalSign".into(),
        json!({"minFraction": variation.as_ref().map(|v| v.min_normal_sign_fraction()), "threshold": defaults.optimize.normal_sign_fraction, "pass": sign_ok}),
    );
    report.insert("dimension".into(), serde_json::to_value(&dimension).expect("report serializes"));
    report.insert(
        "reference".into(),
        json!(reference.map(|(name, v)| json!({"name": name, "value": v, "gap": result.objective - v, "tolerance": defaults.optimize.reference_tol, "pass": reference_ok}))),
    );
    report.insert("notes".into(), json!(notes));
    out.write_json("verification.json", &Value::Object(report))?;

    let mut rows = vec![
        vec!["converged".into(), result.converged.to_string()],
        vec!["iterations".into(), result.iterations.to_string()],
        vec!["objective".into(), format!("{:.10}", result.objective)],
        vec!["rounded objective".into(), format!("{rounded_objective:.10}")],
        vec!["max volume violation".into(), format!("{:.2e}", result.max_volume_violation)],
    ];
    if let Some((name, v)) = reference {
        rows.push(vec![format!("reference ({name})"), format!("{v:.10}")]);
        rows.push(vec!["reference check".into(), super::pass_fail(reference_ok == Some(true))]);
    }
    if let Some(d) = &dimension {
        rows.push(vec!["effective dimension".into(), d.effective_dimension.to_string()]);
    }
    if let Some(v) = &variation {
        rows.push(vec!["first variation rms".into(), format!("{:.2e}", v.max_rms_value())]);
        rows.push(vec!["normal sign fraction".into(), format!("{:.4}", v.min_normal_sign_fraction())]);
    }
    let summary = table(&["quantity", "value"], &rows);
    if result.converged {
        Ok(summary)
    } else {
        Err(CliError::NotConverged(summary))
    }
}
