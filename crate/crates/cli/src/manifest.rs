use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::Result;

/// Timestamp recorded unless wall-clock stamping is requested, so that
/// repeated runs produce identical bytes.
pub const FIXED_TIMESTAMP: &str = "1970-01-01T00:00:00Z";

/// Seed recorded by commands that draw no random numbers.
pub const DEFAULT_SEED: u64 = 0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: BTreeMap<String, Value>,
    pub master_seed: u64,
    pub artifact_version: String,
    pub timestamp: String,
}

impl RunManifest {
    pub fn new<P: Serialize>(command: &str, parameters: &P, master_seed: u64, wall_clock: bool) -> Result<Self> {
        let parameters = match serde_json::to_value(parameters)? {
            Value::Object(map) => map.into_iter().filter(|(_, v)| !v.is_null()).collect(),
            Value::Null => BTreeMap::new(),
            other => BTreeMap::from([("value".to_owned(), other)]),
        };
        let timestamp = if wall_clock {
            chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
        } else {
            FIXED_TIMESTAMP.to_owned()
        };
        Ok(Self {
            command: command.to_owned(),
            parameters,
            master_seed,
            artifact_version: env!("CARGO_PKG_VERSION").to_owned(),
            timestamp,
        })
    }

    /// Merges the manifest fields into the top level of a JSON result object.
    pub fn attach<T: Serialize>(&self, result: &T) -> Result<Value> {
        let Value::Object(manifest) = serde_json::to_value(self)? else {
            unreachable!("manifest serializes to an object")
        };
        let mut merged = match serde_json::to_value(result)? {
            Value::Object(map) => map,
            other => Map::from_iter([("result".to_owned(), other)]),
        };
        for (key, value) in manifest {
            let previous = merged.insert(key.clone(), value);
            assert!(previous.is_none(), "result field `{key}` collides with the manifest");
        }
        Ok(Value::Object(merged))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Params {
        sigma1: f64,
        seed: Option<u64>,
    }

    #[test]
    fn attach_flattens_and_drops_nulls() {
        let m = RunManifest::new("solve", &Params { sigma1: 2.0, seed: None }, 0, false).unwrap();
        assert_eq!(m.parameters.len(), 1);
        let v = m.attach(&serde_json::json!({"gamma_star": 0.5})).unwrap();
        assert_eq!(v["gamma_star"], 0.5);
        assert_eq!(v["command"], "solve");
        assert_eq!(v["timestamp"], FIXED_TIMESTAMP);
        assert_eq!(v["parameters"]["sigma1"], 2.0);
    }

    #[test]
    fn wall_clock_is_iso8601() {
        let m = RunManifest::new("x", &(), 0, true).unwrap();
        assert!(chrono::DateTime::parse_from_rfc3339(&m.timestamp).is_ok());
    }
}
