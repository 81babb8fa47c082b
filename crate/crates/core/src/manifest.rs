//! Run manifests: the record of how an output was produced.
//!
//! Every report and CSV the CLI writes embeds its manifest. The `args`
//! field is the fully resolved command line, so replaying a manifest
//! reproduces the output byte for byte.

use std::collections::BTreeMap;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

/// Environment variable pinning the manifest timestamp (seconds since the
/// Unix epoch), following the reproducible-builds convention.
pub const SOURCE_DATE_EPOCH: &str = "SOURCE_DATE_EPOCH";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub inputs: Vec<String>,
    pub flags: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub version: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub args: Vec<String>,
}

impl RunManifest {
    pub fn new(
        command: &str,
        inputs: Vec<String>,
        flags: Vec<(&str, String)>,
        seed: Option<u64>,
        timestamp: u64,
    ) -> Self {
        let mut args = vec![command.to_string()];
        args.extend(inputs.iter().cloned());
        for (k, v) in &flags {
            args.push(format!("--{k}"));
            args.push(v.clone());
        }
        Self {
            command: command.to_string(),
            inputs,
            flags: flags.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp,
            args,
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("manifest serializes")
    }

    /// Finds the manifest embedded in a previous output: the `manifest`
    /// key of a JSON document, or a `# manifest: {...}` comment line.
    pub fn extract(output: &str) -> Option<RunManifest> {
        if output.trim_start().starts_with(['{', '[']) {
            let value: serde_json::Value = serde_json::from_str(output).ok()?;
            let doc = match &value {
                serde_json::Value::Array(items) => items.first()?,
                other => other,
            };
            return serde_json::from_value(doc.get("manifest")?.clone()).ok();
        }
        output
            .lines()
            .find_map(|l| l.strip_prefix("# manifest: "))
            .and_then(|json| serde_json::from_str(json).ok())
    }
}

/// `SOURCE_DATE_EPOCH` when set, the current time otherwise.
pub fn current_timestamp() -> u64 {
    std::env::var(SOURCE_DATE_EPOCH)
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or_else(|| {
            SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs())
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn args_rebuild_the_command_line() {
        let m = RunManifest::new(
            "analyze",
            vec!["t.csv".into()],
            vec![("solver", "both".into()), ("format", "json".into())],
            None,
            42,
        );
        assert_eq!(
            m.args,
            vec!["analyze", "t.csv", "--solver", "both", "--format", "json"]
        );
        assert_eq!(m.flags["solver"], "both");
    }

    #[test]
    fn extracts_from_json_and_comment_line() {
        let m = RunManifest::new("synth", vec![], vec![("seed", "1".into())], Some(1), 5);
        let json = format!("{{\"manifest\": {}, \"x\": 1}}", m.to_json_line());
        assert_eq!(RunManifest::extract(&json), Some(m.clone()));
        let csv = format!("# manifest: {}\nn,d\n", m.to_json_line());
        assert_eq!(RunManifest::extract(&csv), Some(m));
        assert_eq!(RunManifest::extract("n,d\n1,2\n"), None);
    }
}
