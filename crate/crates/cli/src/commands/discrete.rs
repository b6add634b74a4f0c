use super::{correlations, header};
use crate::defaults::Defaults;
use crate::error::{CliError, CliResult};
use crate::output::{num, table, OutDir};
use crate::{Cli, DiscreteArgs, DiscreteMethod};
use noisestab::voting::{
    discrete_stability_exact, discrete_stability_mc_sweep, influences, influences_mc, plurality_stability_limit,
    RuleKind, VotingRule,
};
use serde_json::{json, Value};

/// Largest sizes the Monte Carlo estimators are documented for.
const MC_MAX_CANDIDATES: usize = 5;
const MC_MAX_VOTERS: usize = 31;

fn index_option(spec: &str, name: &str) -> CliResult<usize> {
    match spec.split_once(':') {
        None => Ok(0),
        Some((_, v)) => match v.parse::<usize>() {
            Ok(i) if i >= 1 => Ok(i - 1),
            _ => Err(CliError::Input(format!("{name} index '{v}' must be a positive integer"))),
        },
    }
}

fn build_rule(args: &DiscreteArgs) -> CliResult<VotingRule> {
    match (&args.rule, &args.table) {
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            Ok(VotingRule::from_json(&text)?)
        }
        (Some(spec), None) => {
            let name = spec.split(':').next().unwrap_or("");
            Ok(match name {
                "plurality" => VotingRule::plurality(args.m, args.n)?,
                "majority" => VotingRule::majority(args.n)?,
                "dictator" => VotingRule::dictator(args.m, args.n, index_option(spec, "voter")?)?,
                "constant" => VotingRule::constant(args.m, args.n, index_option(spec, "candidate")?)?,
                other => return Err(CliError::Input(format!("unknown rule '{other}'"))),
            })
        }
        _ => Err(CliError::Input("give exactly one of --rule and --table".into())),
    }
}

pub fn run(cli: &Cli, defaults: &Defaults, args: &DiscreteArgs) -> CliResult<String> {
    let rule = build_rule(args)?;
    let rhos = correlations(&args.rho)?;
    let samples = args.samples.unwrap_or(defaults.discrete.mc_samples);
    let want_exact = matches!(args.method, DiscreteMethod::Exact | DiscreteMethod::Both);
    let want_mc = matches!(args.method, DiscreteMethod::Mc | DiscreteMethod::Both);
    if want_mc && (rule.m() > MC_MAX_CANDIDATES || rule.n() > MC_MAX_VOTERS) {
        eprintln!(
            "warning: m={} n={} is outside the documented Monte Carlo range (m <= {MC_MAX_CANDIDATES}, n <= {MC_MAX_VOTERS})",
            rule.m(),
            rule.n()
        );
    }
    let plurality = matches!(rule.kind(), RuleKind::Plurality);
    // (rho, value, err, method)
    let mut results: Vec<(f64, f64, f64, &str)> = Vec::new();
    let exact: Vec<f64> = if want_exact {
        rhos.iter().map(|r| discrete_stability_exact(&rule, *r)).collect::<Result<_, _>>()?
    } else {
        Vec::new()
    };
    let mc = if want_mc { discrete_stability_mc_sweep(&rule, &rhos, samples, cli.seed)? } else { Vec::new() };
    for (k, r) in rhos.iter().enumerate() {
        if want_exact {
            results.push((r.value(), exact[k], 0.0, "exact"));
        }
        if want_mc {
            results.push((r.value(), mc[k].value, mc[k].error_estimate, "monte-carlo"));
        }
    }
    let limit = |rho: f64| -> Option<f64> {
        if plurality {
            noisestab::Correlation::new(rho).ok().and_then(|c| plurality_stability_limit(rule.m(), c).ok())
        } else {
            None
        }
    };
    let mut csv = String::from(if plurality { "rho,value,err,method,limit\n" } else { "rho,value,err,method\n" });
    let mut rows = Vec::new();
    let mut json_rows = Vec::new();
    for (rho, value, err, method) in &results {
        let lim = limit(*rho);
        let lim_text = lim.map(num).unwrap_or_default();
        if plurality {
            csv.push_str(&format!("{},{},{},{},{}\n", num(*rho), num(*value), num(*err), method, lim_text));
        } else {
            csv.push_str(&format!("{},{},{},{}\n", num(*rho), num(*value), num(*err), method));
        }
        let mut row = vec![num(*rho), format!("{value:.10}"), format!("{err:.2e}"), method.to_string()];
        if plurality {
            row.push(lim.map(|v| format!("{v:.10}")).unwrap_or_else(|| "-".into()));
        }
        rows.push(row);
        json_rows.push(json!({"rho": rho, "value": value, "err": err, "method": method, "limit": lim}));
    }
    let infl = if want_exact { influences(&rule)? } else { influences_mc(&rule, samples, cli.seed)? };
    let mut icsv = String::from("voter,candidate,influence,err\n");
    for (i, row) in infl.values.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            let e = infl.errors.as_ref().map(|e| e[i][j]).unwrap_or(0.0);
            icsv.push_str(&format!("{},{},{},{}\n", i + 1, j + 1, num(*v), num(e)));
        }
    }
    let out = OutDir::new(&cli.out);
    out.write("discrete.csv", &csv)?;
    out.write("influences.csv", &icsv)?;
    let mut report = header(cli, defaults, "discrete");
    report.insert("m".into(), json!(rule.m()));
    report.insert("n".into(), json!(rule.n()));
    report.insert("rows".into(), Value::Array(json_rows));
    report.insert("influenceTotals".into(), json!(infl.totals()));
    out.write_json("discrete-report.json", &Value::Object(report))?;
    let mut head = vec!["rho", "value", "err", "method"];
    if plurality {
        head.push("limit");
    }
    Ok(table(&head, &rows))
}
