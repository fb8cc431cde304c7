//! Loading configs: TOML or JSON text, `--set` overrides, the seed
//! environment variable, and line-anchored diagnostics.

use std::fs;
use std::path::Path;

use serde_json::Value;
use sinai_core::experiments::ExperimentConfig;

pub const SEED_VAR: &str = "SINAI_LAB_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Toml,
    Json,
}

fn format_of(path: &Path) -> Format {
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => Format::Json,
        _ => Format::Toml,
    }
}

/// A config that failed to load; each entry is one diagnostic line.
#[derive(Debug)]
pub struct ConfigError(pub Vec<String>);

/// Reads, overrides, and deserializes a config. Semantic validation is
/// left to the caller.
pub fn load(path: &Path, overrides: &[String], seed_env: Option<String>) -> Result<(ExperimentConfig, String), ConfigError> {
    let name = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|e| ConfigError(vec![format!("{name}: {e}")]))?;
    let format = format_of(path);

    // parse straight into the typed config first so type errors keep their spans
    let typed: Result<ExperimentConfig, String> = match format {
        Format::Toml => toml::from_str(&text).map_err(|e| toml_message(&name, &e)),
        Format::Json => serde_json::from_str(&text)
            .map_err(|e| format!("{name}:{}:{}: {}", e.line(), e.column(), strip_position(&e.to_string()))),
    };
    let mut value: Value = match format {
        Format::Toml => {
            let t: toml::Value = toml::from_str(&text).map_err(|e| ConfigError(vec![toml_message(&name, &e)]))?;
            serde_json::to_value(t).map_err(|e| ConfigError(vec![format!("{name}: {e}")]))?
        }
        Format::Json => serde_json::from_str(&text)
            .map_err(|e| ConfigError(vec![format!("{name}:{}:{}: {}", e.line(), e.column(), strip_position(&e.to_string()))]))?,
    };
    if overrides.is_empty() && seed_env.is_none() {
        return typed.map(|c| (c, text)).map_err(|e| ConfigError(vec![e]));
    }
    if let Err(e) = typed {
        // an override may fix the problem; only structural errors are fatal here
        log::debug!("config does not deserialize before overrides: {e}");
    }

    if let Some(seed) = seed_env {
        let s: u64 = seed
            .trim()
            .parse()
            .map_err(|_| ConfigError(vec![format!("{SEED_VAR}: `{seed}` is not an unsigned 64-bit integer")]))?;
        value["seed"] = Value::from(s);
    }
    let mut diags = Vec::new();
    for o in overrides {
        if let Err(e) = apply_override(&mut value, o) {
            diags.push(format!("--set {o}: {e}"));
        }
    }
    if !diags.is_empty() {
        return Err(ConfigError(diags));
    }
    let config: ExperimentConfig =
        serde_json::from_value(value).map_err(|e| ConfigError(vec![format!("{name} (after overrides): {e}")]))?;
    Ok((config, text))
}

fn toml_message(name: &str, e: &toml::de::Error) -> String {
    // the Display text starts with "TOML parse error at line L, column C"
    let s = e.to_string();
    let number_after = |tag: &str| {
        s.split(tag).nth(1).and_then(|r| r.split(|c: char| !c.is_ascii_digit()).next()).map(str::to_owned)
    };
    match (number_after("line "), number_after("column ")) {
        (Some(line), Some(col)) => format!("{name}:{line}:{col}: {}", e.message()),
        _ => format!("{name}: {}", e.message()),
    }
}

fn strip_position(s: &str) -> String {
    match s.rfind(" at line ") {
        Some(i) => s[..i].to_owned(),
        None => s.to_owned(),
    }
}

/// Applies `key=value`. Keys are dotted paths; `n` is shorthand for a single
/// horizon. Values are read as TOML literals, falling back to strings.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<(), String> {
    let (key, raw) = assignment.split_once('=').ok_or("expected KEY=VALUE")?;
    let (key, raw) = (key.trim(), raw.trim());
    if key.is_empty() {
        return Err("empty key".into());
    }
    let parsed = parse_literal(raw);
    let (key, parsed) = if key == "n" {
        ("horizons", Value::Array(vec![parsed]))
    } else {
        (key, parsed)
    };
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if !node.is_object() {
            return Err(format!("`{}` is not a table", parts[..i].join(".")));
        }
        let map = node.as_object_mut().expect("checked");
        if i + 1 == parts.len() {
            map.insert((*part).to_owned(), parsed);
            return Ok(());
        }
        node = map.entry((*part).to_owned()).or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("split yields at least one part")
}

fn parse_literal(raw: &str) -> Value {
    #[derive(serde::Deserialize)]
    struct Wrap {
        v: toml::Value,
    }
    match toml::from_str::<Wrap>(&format!("v = {raw}")) {
        Ok(w) => serde_json::to_value(w.v).unwrap_or(Value::String(raw.to_owned())),
        Err(_) => Value::String(raw.to_owned()),
    }
}

/// Prefixes a semantic diagnostic (`field.path: message`) with the line
/// where the field's last path segment is set, when it can be found.
pub fn anchor(name: &str, text: &str, diagnostic: &str) -> String {
    let field = diagnostic.split(':').next().unwrap_or("");
    let key = field.rsplit('.').next().unwrap_or(field);
    if !key.is_empty() && !key.contains(' ') {
        for (i, line) in text.lines().enumerate() {
            let t = line.trim_start();
            let hit = t.strip_prefix(key).is_some_and(|r| r.trim_start().starts_with('='))
                || t.starts_with(&format!("\"{key}\""))
                || t == format!("[{key}]")
                || t.starts_with(&format!("[{key}."));
            if hit {
                return format!("{name}:{}: {diagnostic}", i + 1);
            }
        }
    }
    format!("{name}: {diagnostic}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides() {
        let mut v: Value = serde_json::json!({"horizons": [1, 2], "params": {"f_up": 1.0}});
        apply_override(&mut v, "n=1000").unwrap();
        apply_override(&mut v, "params.f_down=-1").unwrap();
        apply_override(&mut v, "params.k_list=[1, 2]").unwrap();
        apply_override(&mut v, "experiment=clt").unwrap();
        assert_eq!(v["horizons"], serde_json::json!([1000]));
        assert_eq!(v["params"]["f_down"], serde_json::json!(-1));
        assert_eq!(v["params"]["k_list"], serde_json::json!([1, 2]));
        assert_eq!(v["experiment"], serde_json::json!("clt"));
        assert!(apply_override(&mut v, "novalue").is_err());
        assert!(apply_override(&mut v, "horizons.x=1").is_err());
    }

    #[test]
    fn anchoring() {
        let text = "experiment = \"lln\"\nreplicates = 1\n[distribution]\nkind = \"two_point\"\n";
        assert_eq!(anchor("c.toml", text, "replicates: at least 2"), "c.toml:2: replicates: at least 2");
        assert_eq!(anchor("c.toml", text, "distribution: bad"), "c.toml:3: distribution: bad");
        assert_eq!(anchor("c.toml", text, "params.quantile: bad"), "c.toml: params.quantile: bad");
    }
}
