//! Run manifests: enough provenance (inputs, options, timings, verdicts) to
//! reproduce an invocation byte for byte.

use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize)]
pub struct InputRecord {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Default)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub inputs: Vec<InputRecord>,
    pub options: serde_json::Value,
    pub stage_ms: Vec<(String, u64)>,
    pub verdicts: Vec<serde_json::Value>,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        RunManifest {
            tool: "rbcheck".into(),
            version: crate::VERSION.into(),
            command: command.into(),
            inputs: Vec::new(),
            options: serde_json::Value::Null,
            stage_ms: Vec::new(),
            verdicts: Vec::new(),
        }
    }

    pub fn record_input(&mut self, path: &str, contents: &str) {
        let mut h = Sha256::new();
        h.update(contents.as_bytes());
        self.inputs.push(InputRecord {
            path: path.to_string(),
            sha256: format!("{:x}", h.finalize()),
        });
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("manifest serializes")
    }
}
