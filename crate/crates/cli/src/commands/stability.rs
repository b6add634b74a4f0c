use super::{correlations, header};
use crate::defaults::Defaults;
use crate::error::CliResult;
use crate::output::{num, table, OutDir};
use crate::{source, Cli, GaussianMethod, StabilityArgs};
use noisestab::gaussian::{noise_stability_mc, noise_stability_with, StabilityOptions};
use serde_json::{json, Value};

pub fn run(cli: &Cli, defaults: &Defaults, args: &StabilityArgs) -> CliResult<String> {
    let p = source::load(args.source.builtin.as_deref(), args.source.partition.as_deref())?;
    let rhos = correlations(&args.rho)?;
    let samples = args.samples.unwrap_or(defaults.stability.mc_samples);
    let opts = StabilityOptions { mc_samples: samples, seed: cli.seed, force_monte_carlo: false };
    let mut csv = String::from("rho,value,err,method\n");
    let mut rows = Vec::new();
    let mut json_rows = Vec::new();
    for r in rhos {
        let e = match args.method {
            GaussianMethod::Auto => noise_stability_with(&p, r, &opts)?,
            GaussianMethod::Mc => noise_stability_mc(&p, r, samples, cli.seed)?,
        };
        csv.push_str(&format!("{},{},{},{}\n", num(r.value()), num(e.value), num(e.error_estimate), e.method));
        rows.push(vec![num(r.value()), format!("{:.10}", e.value), format!("{:.2e}", e.error_estimate), e.method.to_string()]);
        json_rows.push(json!({"rho": r.value(), "value": e.value, "err": e.error_estimate, "method": e.method, "samplesOrNodes": e.samples_or_nodes}));
    }
    let out = OutDir::new(&cli.out);
    out.write("stability.csv", &csv)?;
    let mut report = header(cli, defaults, "stability");
    report.insert("source".into(), json!(args.source.builtin.clone().unwrap_or_else(|| "file".into())));
    report.insert("rows".into(), Value::Array(json_rows));
    out.write_json("stability-report.json", &Value::Object(report))?;
    Ok(table(&["rho", "value", "err", "method"], &rows))
}
