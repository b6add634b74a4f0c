use super::{header, pass_fail};
use crate::defaults::Defaults;
use crate::error::{CliError, CliResult};
use crate::output::{table, OutDir};
use crate::{source, Cli, VerifyArgs};
use noisestab::gaussian::mehler_min_eigenvalue;
use noisestab::partition::{
    almost_eigenfunction_check, extract_interfaces, first_variation_check, translation_second_difference,
    translation_second_variation, translation_second_variation_unconstrained, volume_constraint_matrix,
    IN_SUBSPACE_TOL,
};
use noisestab::{Correlation, Error};
use serde_json::{json, Value};

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn run(cli: &Cli, defaults: &Defaults, args: &VerifyArgs) -> CliResult<String> {
    let t = &defaults.verify;
    let p = source::load(args.source.builtin.as_deref(), args.source.partition.as_deref())?;
    if !(args.rho > 0.0 && args.rho < 1.0) {
        return Err(CliError::Input(format!("verify needs 0 < rho < 1, got {}", args.rho)));
    }
    let rho = Correlation::new(args.rho).map_err(|e| CliError::Input(e.to_string()))?;
    let d = p.dim();
    let requested = match &args.direction {
        Some(v) if v.len() != d => {
            return Err(CliError::Input(format!("direction has {} entries, partition dimension is {d}", v.len())))
        }
        Some(v) if norm(v) == 0.0 => return Err(CliError::Input("direction must be nonzero".into())),
        Some(v) => Some(v.clone()),
        None => None,
    };
    let meshes = extract_interfaces(&p)?;

    let first = first_variation_check(&p, rho)?;
    let first_ok = first.max_rms_value() <= t.first_variation_rms;

    let constraint = volume_constraint_matrix(&p)?;
    let axis = {
        let mut e = vec![0.0; d];
        e[0] = 1.0;
        e
    };
    let eigen_dir = requested.clone().unwrap_or_else(|| axis.clone());
    // The second variation defaults to a volume-preserving direction when there is one.
    let v = requested.unwrap_or_else(|| constraint.null_space.first().cloned().unwrap_or(axis));
    let eigen = almost_eigenfunction_check(&p, rho, &eigen_dir)?;
    let eigen_ok = eigen.max_rel <= t.eigen_max_rel && eigen.rms_rel <= t.eigen_rms_rel;

    let in_subspace = norm(&constraint.apply(&v)) <= IN_SUBSPACE_TOL * norm(&v).max(1.0);
    let formula = if in_subspace {
        translation_second_variation(&p, rho, &v)?
    } else {
        translation_second_variation_unconstrained(&p, rho, &v)?
    };
    // Grid partitions cannot be translated, so the difference check is skipped for them.
    let fd = match translation_second_difference(&p, rho, &v, t.difference_step) {
        Ok(fd) => Some(fd),
        Err(Error::Unsupported(_)) => None,
        Err(e) => return Err(e.into()),
    };
    let second_rel = match &fd {
        Some(fd) if fd.richardson != 0.0 => (formula - fd.richardson).abs() / fd.richardson.abs(),
        _ => f64::INFINITY,
    };
    let second_ok = fd.as_ref().map(|fd| {
        (formula.abs() <= t.second_variation_zero && fd.richardson.abs() <= t.second_variation_zero)
            || second_rel <= t.second_variation_rel
    });

    let points: Vec<Vec<f64>> = meshes.iter().flat_map(|m| m.elements.iter().map(|e| e.point.clone())).collect();
    let stride = points.len().div_ceil(t.psd_points.max(1)).max(1);
    let sample: Vec<Vec<f64>> = points.iter().step_by(stride).cloned().collect();
    let psd_min = mehler_min_eigenvalue(&sample, rho)?;
    let psd_ok = psd_min >= t.psd_min_eigenvalue;

    let mut report = header(cli, defaults, "verify");
    report.insert("rho".into(), json!(args.rho));
    report.insert(
        "firstVariation".into(),
        json!({"report": first, "measured": first.max_rms_value(), "threshold": t.first_variation_rms, "pass": first_ok}),
    );
    report.insert(
        "almostEigenfunction".into(),
        json!({"report": eigen, "maxRelThreshold": t.eigen_max_rel, "rmsRelThreshold": t.eigen_rms_rel, "pass": eigen_ok}),
    );
    report.insert(
        "secondVariation".into(),
        json!({
            "direction": v,
            "volumeConstraint": constraint,
            "directionInSubspace": in_subspace,
            "formula": if in_subspace { "constrained" } else { "unconstrained" },
            "value": formula,
            "finiteDifference": fd,
            "relativeGap": if second_rel.is_finite() { Some(second_rel) } else { None },
            "threshold": t.second_variation_rel,
            "pass": second_ok,
        }),
    );
    report.insert(
        "mehlerPsd".into(),
        json!({"points": sample.len(), "minEigenvalue": psd_min, "threshold": t.psd_min_eigenvalue, "pass": psd_ok}),
    );
    OutDir::new(&cli.out).write_json("verify-report.json", &Value::Object(report))?;

    let second_name = if in_subspace { "second variation" } else { "second variation (unconstrained)" };
    let rows = vec![
        vec!["first variation rms".into(), format!("{:.3e}", first.max_rms_value()), format!("<= {:e}", t.first_variation_rms), pass_fail(first_ok)],
        vec![
            "almost-eigenfunction".into(),
            format!("max {:.3e} rms {:.3e}", eigen.max_rel, eigen.rms_rel),
            format!("<= {:e} / {:e}", t.eigen_max_rel, t.eigen_rms_rel),
            pass_fail(eigen_ok),
        ],
        vec![
            second_name.into(),
            match &fd {
                Some(fd) => format!("{formula:.6e} vs {:.6e}", fd.richardson),
                None => format!("{formula:.6e}, no difference"),
            },
            format!("rel <= {}", t.second_variation_rel),
            second_ok.map(pass_fail).unwrap_or_else(|| "SKIP".into()),
        ],
        vec!["mehler psd".into(), format!("{psd_min:.3e}"), format!(">= {:e}", t.psd_min_eigenvalue), pass_fail(psd_ok)],
    ];
    Ok(table(&["check", "measured", "threshold", "result"], &rows))
}
