#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_surfreg"))
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

pub fn run_ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "surfreg {args:?} failed with {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

pub fn scenario(name: &str) -> PathBuf {
    manifest_dir().join("scenarios").join(format!("{name}.toml"))
}

pub fn fixture(name: &str) -> PathBuf {
    manifest_dir().join("tests/fixtures").join(name)
}

pub fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

pub fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).expect("output exists")).expect("valid JSON")
}

pub fn schema(name: &str) -> Value {
    read_json(&manifest_dir().join("schemas").join(name))
}

/// Checks `value` against the draft-07 keywords the shipped schemas use and
/// returns every violation.
pub fn schema_errors(value: &Value, schema: &Value) -> Vec<String> {
    let mut errors = Vec::new();
    check(value, schema, schema, "$", &mut errors);
    errors
}

fn type_matches(value: &Value, ty: &str) -> bool {
    match ty {
        "object" => value.is_object(),
        "array" => value.is_array(),
        "string" => value.is_string(),
        "number" => value.is_number(),
        "integer" => value.is_u64() || value.is_i64(),
        "boolean" => value.is_boolean(),
        "null" => value.is_null(),
        _ => false,
    }
}

fn check(value: &Value, schema: &Value, root: &Value, at: &str, errors: &mut Vec<String>) {
    let Some(obj) = schema.as_object() else { return };
    if let Some(r) = obj.get("$ref").and_then(Value::as_str) {
        let name = r.strip_prefix("#/definitions/").expect("local definitions only");
        check(value, &root["definitions"][name], root, at, errors);
        return;
    }
    if let Some(ty) = obj.get("type") {
        let ok = match ty {
            Value::String(t) => type_matches(value, t),
            Value::Array(ts) => ts.iter().filter_map(Value::as_str).any(|t| type_matches(value, t)),
            _ => true,
        };
        if !ok {
            errors.push(format!("{at}: expected type {ty}, got {value}"));
            return;
        }
    }
    if let Some(options) = obj.get("enum").and_then(Value::as_array) {
        if !options.contains(value) {
            errors.push(format!("{at}: {value} not in {options:?}"));
        }
    }
    if let Some(x) = value.as_f64() {
        if let Some(min) = obj.get("minimum").and_then(Value::as_f64) {
            if x < min {
                errors.push(format!("{at}: {x} < {min}"));
            }
        }
        if let Some(min) = obj.get("exclusiveMinimum").and_then(Value::as_f64) {
            if x <= min {
                errors.push(format!("{at}: {x} <= {min}"));
            }
        }
        if let Some(max) = obj.get("maximum").and_then(Value::as_f64) {
            if x > max {
                errors.push(format!("{at}: {x} > {max}"));
            }
        }
    }
    if let Some(text) = value.as_str() {
        let len = text.chars().count() as u64;
        if obj.get("minLength").and_then(Value::as_u64).is_some_and(|m| len < m)
            || obj.get("maxLength").and_then(Value::as_u64).is_some_and(|m| len > m)
        {
            errors.push(format!("{at}: string length {len} out of range"));
        }
    }
    if let Some(items) = value.as_array() {
        let n = items.len() as u64;
        if obj.get("minItems").and_then(Value::as_u64).is_some_and(|m| n < m)
            || obj.get("maxItems").and_then(Value::as_u64).is_some_and(|m| n > m)
        {
            errors.push(format!("{at}: {n} items out of range"));
        }
        if let Some(item_schema) = obj.get("items") {
            for (i, item) in items.iter().enumerate() {
                check(item, item_schema, root, &format!("{at}[{i}]"), errors);
            }
        }
    }
    if let Some(map) = value.as_object() {
        for key in obj.get("required").and_then(Value::as_array).into_iter().flatten() {
            let key = key.as_str().expect("required keys are strings");
            if !map.contains_key(key) {
                errors.push(format!("{at}: missing '{key}'"));
            }
        }
        let props = obj.get("properties").and_then(Value::as_object);
        for (key, v) in map {
            let path = format!("{at}.{key}");
            match props.and_then(|p| p.get(key)) {
                Some(sub) => check(v, sub, root, &path, errors),
                None => match obj.get("additionalProperties") {
                    Some(Value::Bool(false)) => errors.push(format!("{at}: unexpected '{key}'")),
                    Some(sub @ Value::Object(_)) => check(v, sub, root, &path, errors),
                    _ => {}
                },
            }
        }
    }
}

pub fn assert_schema(path: &Path, schema_name: &str) {
    let errors = schema_errors(&read_json(path), &schema(schema_name));
    assert!(errors.is_empty(), "{} violates {schema_name}: {errors:#?}", path.display());
}
