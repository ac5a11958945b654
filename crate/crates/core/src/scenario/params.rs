use toml::Value;

use super::{ScenarioDoc, ScenarioError};

/// Short names accepted wherever a parameter path is.
pub const ALIASES: &[(&str, &[&str])] = &[
    ("alpha", &["run.load_scale"]),
    ("duration", &["run.duration_ms"]),
    ("fc", &["switches.*.fc_enabled", "hosts.*.fc_enabled"]),
    ("seed", &["seed"]),
];

fn expand(key: &str) -> Vec<&str> {
    ALIASES
        .iter()
        .find(|(a, _)| *a == key)
        .map_or_else(|| vec![key], |(_, paths)| paths.to_vec())
}

fn parse_value(raw: &str) -> Value {
    let raw = raw.trim();
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

fn coerce(new: &Value, old: Option<&Value>) -> Value {
    match (new, old) {
        (Value::Integer(i), Some(Value::Float(_))) => Value::Float(*i as f64),
        (Value::Float(f), Some(Value::Integer(_)) | None) if f.fract() == 0.0 && f.abs() < 9.0e15 => Value::Integer(*f as i64),
        _ => new.clone(),
    }
}

fn set(node: &mut Value, segs: &[&str], v: &Value, hits: &mut usize) -> Result<(), String> {
    let (seg, rest) = (segs[0], &segs[1..]);
    match node {
        Value::Table(t) => {
            if rest.is_empty() {
                if let Some(old) = t.get(seg) {
                    if old.is_table() || old.is_array() {
                        return Err(format!("{seg} is not a scalar"));
                    }
                }
                let nv = coerce(v, t.get(seg));
                t.insert(seg.to_string(), nv);
                *hits += 1;
                return Ok(());
            }
            let child = t.entry(seg.to_string()).or_insert_with(|| Value::Table(Default::default()));
            set(child, rest, v, hits)
        }
        Value::Array(items) => {
            if rest.is_empty() {
                return Err(format!("{seg} selects an element, not a value"));
            }
            if seg == "*" {
                for item in items.iter_mut() {
                    set(item, rest, v, hits)?;
                }
                return Ok(());
            }
            if let Ok(i) = seg.parse::<usize>() {
                let len = items.len();
                let item = items.get_mut(i).ok_or_else(|| format!("index {i} out of range ({len} elements)"))?;
                return set(item, rest, v, hits);
            }
            let item = items
                .iter_mut()
                .find(|it| it.get("name").and_then(Value::as_str) == Some(seg))
                .ok_or_else(|| format!("no element named {seg:?}"))?;
            set(item, rest, v, hits)
        }
        _ => Err(format!("cannot descend into {seg}")),
    }
}

/// Returns a copy of `doc` with the parameter at dotted `key` set to `raw`.
///
/// Array elements are chosen by index, by `name`, or all of them with `*`:
/// `switches.*.mac_table.aging_time_ms`, `sources.bg.load`, `hosts.0.fc_enabled`.
pub fn apply_param(doc: &ScenarioDoc, key: &str, raw: &str) -> Result<ScenarioDoc, ScenarioError> {
    let err = |message: String| ScenarioError::Param {
        key: key.to_string(),
        message,
    };
    let mut tree = Value::try_from(doc).map_err(|e| err(e.to_string()))?;
    let v = parse_value(raw);
    for path in expand(key) {
        let segs: Vec<&str> = path.split('.').collect();
        if segs.iter().any(|s| s.is_empty()) {
            return Err(err("empty path segment".into()));
        }
        let mut hits = 0;
        set(&mut tree, &segs, &v, &mut hits).map_err(err)?;
    }
    tree.try_into::<ScenarioDoc>().map_err(|e| err(e.message().trim().to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{HostConfig, RunConfig, SwitchConfig};
    use crate::scenario::ExperimentKind;

    fn doc() -> ScenarioDoc {
        let mut d = ScenarioDoc::new("p", RunConfig::new(10.0));
        d.switches = vec![SwitchConfig::new("s1", 4), SwitchConfig::new("s2", 4)];
        d.hosts = vec![HostConfig::new("a")];
        d
    }

    #[test]
    fn wildcard_and_name_selectors() {
        let d = apply_param(&doc(), "switches.*.mac_table.aging_time_ms", "25").unwrap();
        assert!(d.switches.iter().all(|s| s.mac_table.aging_time_ms == 25.0));
        let d = apply_param(&doc(), "switches.s2.ports", "8").unwrap();
        assert_eq!((d.switches[0].ports, d.switches[1].ports), (4, 8));
    }

    #[test]
    fn aliases_and_missing_tables() {
        let d = apply_param(&doc(), "fc", "false").unwrap();
        assert!(!d.switches[0].fc_enabled && !d.hosts[0].fc_enabled);
        let d = apply_param(&doc(), "alpha", "0.5").unwrap();
        assert_eq!(d.run.load_scale, 0.5);
        let d = apply_param(&doc(), "experiment.kind", "bisect").unwrap();
        assert_eq!(d.experiment.kind, ExperimentKind::Bisect);
        let d = apply_param(&doc(), "seed", "7.0").unwrap();
        assert_eq!(d.seed, 7);
    }

    #[test]
    fn bad_paths_and_types_are_param_errors() {
        for (k, v) in [
            ("switches.s9.ports", "1"),
            ("switches.*.ports", "many"),
            ("run.bogus", "1"),
            ("switches", "1"),
        ] {
            let e = apply_param(&doc(), k, v).unwrap_err();
            assert_eq!(e.exit_code(), 1, "{k}");
            assert!(e.to_string().contains(k), "{e}");
        }
    }
}
