//! Shared helpers for the CLI integration tests: locating the binary, the
//! published schema files, and a validator for the JSON-Schema subset those
//! files use (type / enum / properties / required / additionalProperties /
//! items / oneOf).

use std::path::PathBuf;
use std::process::Command;

use serde_json::Value;

/// Command for the compiled `hd-mmd` binary, with the thread cap unset so
/// tests see the hardware default unless they opt in.
pub fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_hd-mmd"));
    cmd.env_remove("HD_MMD_THREADS");
    cmd
}

/// Load a schema from the repository's `schemas/` directory by file name.
pub fn load_schema(name: &str) -> Value {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../schemas")
        .join(name);
    let text = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("cannot read schema {}: {e}", path.display()));
    serde_json::from_str(&text).unwrap()
}

/// Validate `value` against the schema subset; `Err` carries a path-prefixed
/// description of the first violation.
pub fn validate(schema: &Value, value: &Value) -> Result<(), String> {
    check(schema, value, "$")
}

fn check(schema: &Value, value: &Value, path: &str) -> Result<(), String> {
    if let Some(options) = schema.get("oneOf").and_then(Value::as_array) {
        let mut errors = Vec::new();
        for (i, option) in options.iter().enumerate() {
            match check(option, value, path) {
                Ok(()) => return Ok(()),
                Err(e) => errors.push(format!("[{i}] {e}")),
            }
        }
        return Err(format!("{path}: no oneOf option matched: {}", errors.join("; ")));
    }
    if let Some(allowed) = schema.get("enum").and_then(Value::as_array) {
        if !allowed.contains(value) {
            return Err(format!("{path}: {value} is not one of {allowed:?}"));
        }
        return Ok(());
    }
    if let Some(ty) = schema.get("type") {
        let names: Vec<&str> = match ty {
            Value::String(s) => vec![s.as_str()],
            Value::Array(list) => list.iter().filter_map(Value::as_str).collect(),
            other => return Err(format!("{path}: malformed schema type {other}")),
        };
        if !names.iter().any(|n| type_matches(n, value)) {
            return Err(format!("{path}: expected type {names:?}, got {value}"));
        }
        // A null admitted by a type union has nothing further to satisfy.
        if value.is_null() {
            return Ok(());
        }
    }
    if let Some(props) = schema.get("properties").and_then(Value::as_object) {
        if let Some(obj) = value.as_object() {
            if schema.get("additionalProperties") == Some(&Value::Bool(false)) {
                for key in obj.keys() {
                    if !props.contains_key(key) {
                        return Err(format!("{path}: unexpected key {key:?}"));
                    }
                }
            }
            if let Some(required) = schema.get("required").and_then(Value::as_array) {
                for key in required.iter().filter_map(Value::as_str) {
                    if !obj.contains_key(key) {
                        return Err(format!("{path}: missing required key {key:?}"));
                    }
                }
            }
            for (key, sub) in props {
                if let Some(v) = obj.get(key) {
                    check(sub, v, &format!("{path}.{key}"))?;
                }
            }
        }
    }
    if let Some(items) = schema.get("items") {
        if let Some(list) = value.as_array() {
            for (i, v) in list.iter().enumerate() {
                check(items, v, &format!("{path}[{i}]"))?;
            }
        }
    }
    Ok(())
}

fn type_matches(name: &str, value: &Value) -> bool {
    match name {
        "object" => value.is_object(),
        "array" => value.is_array(),
        "string" => value.is_string(),
        "boolean" => value.is_boolean(),
        "null" => value.is_null(),
        "number" => value.is_number(),
        "integer" => matches!(value, Value::Number(n) if n.is_u64() || n.is_i64()),
        _ => false,
    }
}
