//! A small JSON Schema checker covering the subset the shipped schemas use:
//! type (including type arrays), properties, required, additionalProperties,
//! items, and enum. Keeps the test suite free of a full validator dependency.

use serde_json::Value;

pub fn validate(schema: &Value, v: &Value) -> Result<(), String> {
    validate_at(schema, v, "$")
}

fn type_matches(ty: &str, v: &Value) -> bool {
    match ty {
        "object" => v.is_object(),
        "array" => v.is_array(),
        "string" => v.is_string(),
        "integer" => v.is_i64() || v.is_u64(),
        "number" => v.is_number(),
        "boolean" => v.is_boolean(),
        "null" => v.is_null(),
        _ => false,
    }
}

fn validate_at(schema: &Value, v: &Value, path: &str) -> Result<(), String> {
    let Some(obj) = schema.as_object() else {
        return Ok(()); // `true` / empty schema accepts anything
    };
    if let Some(ty) = obj.get("type") {
        let ok = match ty {
            Value::String(s) => type_matches(s, v),
            Value::Array(ts) => ts
                .iter()
                .any(|t| t.as_str().map(|s| type_matches(s, v)).unwrap_or(false)),
            _ => false,
        };
        if !ok {
            return Err(format!("{path}: expected type {ty}, got {v}"));
        }
    }
    if let Some(allowed) = obj.get("enum").and_then(|e| e.as_array()) {
        if !allowed.contains(v) {
            return Err(format!("{path}: {v} not in enum {allowed:?}"));
        }
    }
    if v.is_null() {
        return Ok(()); // nothing structural to check on an allowed null
    }
    if let Some(map) = v.as_object() {
        let props = obj.get("properties").and_then(|p| p.as_object());
        if let Some(required) = obj.get("required").and_then(|r| r.as_array()) {
            for r in required {
                let key = r.as_str().unwrap();
                if !map.contains_key(key) {
                    return Err(format!("{path}: missing required key `{key}`"));
                }
            }
        }
        for (k, val) in map {
            let sub = props.and_then(|p| p.get(k));
            match sub {
                Some(s) => validate_at(s, val, &format!("{path}.{k}"))?,
                None => match obj.get("additionalProperties") {
                    Some(Value::Bool(false)) => {
                        return Err(format!("{path}: unexpected key `{k}`"))
                    }
                    Some(Value::Bool(true)) | None => {}
                    Some(s) => validate_at(s, val, &format!("{path}.{k}"))?,
                },
            }
        }
    }
    if let Some(items) = v.as_array() {
        if let Some(s) = obj.get("items") {
            for (i, item) in items.iter().enumerate() {
                validate_at(s, item, &format!("{path}[{i}]"))?;
            }
        }
    }
    Ok(())
}

pub fn load_schema(name: &str) -> Value {
    let path = format!("{}/../../schemas/{name}", env!("CARGO_MANIFEST_DIR"));
    serde_json::from_str(&std::fs::read_to_string(&path).expect("schema file exists"))
        .expect("schema parses")
}
