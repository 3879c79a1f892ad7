//! Layered settings: command-line flags over a JSON config file over defaults.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};
use ternspike_core::{Error, Result};

fn object(value: Value, origin: &str) -> Result<Map<String, Value>> {
    match value {
        Value::Object(map) => Ok(map),
        Value::Null => Ok(Map::new()),
        _ => Err(Error::Config(format!("{origin} must be a JSON object"))),
    }
}

/// Merges `flags` (unset options are `None` and ignored) over the optional
/// config file, deserializes the result into `T` (whose missing fields take
/// their defaults) and echoes it to standard error.
pub fn resolve<T>(flags: &impl Serialize, config: Option<&Path>) -> Result<T>
where
    T: DeserializeOwned + Serialize,
{
    let mut merged = match config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
            let value: Value = serde_json::from_str(&text).map_err(|e| Error::Parse {
                path: path.display().to_string(),
                line: e.line(),
                message: e.to_string(),
            })?;
            object(value, &path.display().to_string())?
        }
        None => Map::new(),
    };
    let flags = serde_json::to_value(flags).map_err(|e| Error::Config(e.to_string()))?;
    for (key, value) in object(flags, "flags")? {
        if !value.is_null() {
            merged.insert(key, value);
        }
    }
    let settings: T =
        serde_json::from_value(Value::Object(merged)).map_err(|e| Error::Config(e.to_string()))?;
    eprintln!(
        "effective config: {}",
        serde_json::to_string(&settings).map_err(|e| Error::Config(e.to_string()))?
    );
    Ok(settings)
}
