//! JSON run configs: defaults, file values and dotted `key=value` overrides,
//! merged in that order.

use std::path::Path;

use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use serfati::solver::RunConfig;

use crate::CliError;

/// A fully resolved configuration and the JSON it was decoded from.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub config: RunConfig,
    pub json: Value,
}

impl Resolved {
    /// Hex SHA-256 of the canonical (sorted-key, compact) resolved JSON.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(canonical(&self.json)))
    }
}

pub fn canonical(v: &Value) -> Vec<u8> {
    // serde_json maps are ordered by key, so compact output is canonical
    serde_json::to_vec(v).expect("json values serialize")
}

fn merge(dst: &mut Value, src: Value) {
    match (dst, src) {
        (Value::Object(d), Value::Object(s)) => {
            for (k, v) in s {
                match d.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        d.insert(k, v);
                    }
                }
            }
        }
        (d, s) => *d = s,
    }
}

/// Parse `a.b.c=value`; the value is read as JSON when it parses, otherwise
/// as a bare string.
pub fn parse_override(s: &str) -> Result<(Vec<String>, Value), CliError> {
    let (key, raw) = s.split_once('=').ok_or_else(|| CliError::Usage(format!("override '{s}' is not key=value")))?;
    let path: Vec<String> = key.split('.').map(str::to_string).collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(CliError::Usage(format!("override key '{key}' has an empty segment")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    Ok((path, value))
}

pub fn apply_override(root: &mut Value, path: &[String], value: Value) -> Result<(), CliError> {
    let mut cur = root;
    for (i, seg) in path.iter().enumerate() {
        if cur.is_null() {
            *cur = Value::Object(Map::new());
        }
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| CliError::Usage(format!("override '{}' descends into a non-object", path.join("."))))?;
        if i + 1 == path.len() {
            obj.insert(seg.clone(), value);
            return Ok(());
        }
        cur = obj.entry(seg.clone()).or_insert(Value::Null);
    }
    unreachable!("override paths are non-empty")
}

/// Defaults, then the file at `path` (if any), then `overrides`.
pub fn resolve(path: Option<&Path>, overrides: &[String]) -> Result<Resolved, CliError> {
    let mut json = serde_json::to_value(RunConfig::default()).expect("default config serializes");
    if let Some(p) = path {
        let text = std::fs::read_to_string(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
        let file: Value = serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
        if !file.is_object() {
            return Err(CliError::Usage(format!("{}: config must be a JSON object", p.display())));
        }
        merge(&mut json, file);
    }
    for o in overrides {
        let (k, v) = parse_override(o)?;
        apply_override(&mut json, &k, v)?;
    }
    let config: RunConfig = serde_json::from_value(json.clone()).map_err(|e| CliError::Usage(format!("config: {e}")))?;
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    // re-serialize so the recorded JSON is exactly what was run
    let json = serde_json::to_value(&config).expect("config serializes");
    Ok(Resolved { config, json })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dotted_overrides() {
        let r = resolve(None, &["dt=0.015625".into(), "quadrature.radial_nodes=24".into(), "scenario=strip".into()]).unwrap();
        assert_eq!(r.config.dt, 0.015625);
        assert_eq!(r.config.quadrature.radial_nodes, 24);
        assert_eq!(r.config.scenario, "strip");
        assert!(matches!(resolve(None, &["nonsense=1".into()]), Err(CliError::Usage(_))));
        assert!(matches!(resolve(None, &["dt".into()]), Err(CliError::Usage(_))));
        let a = resolve(None, &[]).unwrap();
        let b = resolve(None, &[]).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), r.hash());
    }
}
