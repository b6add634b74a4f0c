//! Partitions from builtin names or JSON files.

use crate::error::{CliError, CliResult};
use noisestab::gaussian::Partition;
use std::collections::BTreeMap;
use std::path::Path;

/// Parses `name[:key=value,...]`.
fn split_builtin(spec: &str) -> CliResult<(&str, BTreeMap<&str, &str>)> {
    let (name, rest) = spec.split_once(':').unwrap_or((spec, ""));
    let mut opts = BTreeMap::new();
    for part in rest.split(',').filter(|p| !p.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| CliError::Input(format!("builtin option '{part}' is not key=value")))?;
        opts.insert(k, v);
    }
    Ok((name, opts))
}

fn take<T: std::str::FromStr>(opts: &mut BTreeMap<&str, &str>, key: &str, default: T) -> CliResult<T> {
    match opts.remove(key) {
        None => Ok(default),
        Some(v) => v.parse().map_err(|_| CliError::Input(format!("builtin option {key}={v} is not valid"))),
    }
}

/// `halfspace[:d=2,offset=0]` (normal along the first axis) or `cones:m=3[,d=2]`.
pub fn builtin(spec: &str) -> CliResult<Partition> {
    let (name, mut opts) = split_builtin(spec)?;
    let p = match name {
        "halfspace" => {
            let d: usize = take(&mut opts, "d", 2)?;
            let offset: f64 = take(&mut opts, "offset", 0.0)?;
            if d == 0 {
                return Err(CliError::Input("dimension must be positive".into()));
            }
            let mut normal = vec![0.0; d];
            normal[0] = 1.0;
            Partition::halfspaces(d, normal, offset)?
        }
        "cones" => {
            let m: usize = take(&mut opts, "m", 3)?;
            let d: usize = take(&mut opts, "d", m.saturating_sub(1).max(1))?;
            Partition::simplex_cones(d, m)?
        }
        other => return Err(CliError::Input(format!("unknown builtin '{other}' (expected halfspace or cones)"))),
    };
    if let Some(k) = opts.keys().next() {
        return Err(CliError::Input(format!("unknown builtin option '{k}'")));
    }
    Ok(p)
}

pub fn load(builtin_spec: Option<&str>, file: Option<&Path>) -> CliResult<Partition> {
    match (builtin_spec, file) {
        (Some(b), None) => builtin(b),
        (None, Some(f)) => {
            let text = std::fs::read_to_string(f).map_err(|e| CliError::Input(format!("{}: {e}", f.display())))?;
            Ok(Partition::from_json(&text)?)
        }
        _ => Err(CliError::Input("give exactly one of --builtin and --partition".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins() {
        assert_eq!(builtin("halfspace").unwrap().m(), 2);
        assert_eq!(builtin("cones:m=3").unwrap().dim(), 2);
        assert_eq!(builtin("cones:m=3,d=3").unwrap().dim(), 3);
        assert!(builtin("halfspace:offset=0.3").is_ok());
        assert!(builtin("halfspace:colour=red").is_err());
        assert!(builtin("sphere").is_err());
        assert!(builtin("cones:m").is_err());
    }
}
