//! Report envelope and artifact emission.
//!
//! Every command produces the same envelope — `schema`, `command`, `seed`,
//! the command's payload fields, and a final `pass` verdict — serialized as
//! pretty JSON with lexicographically ordered keys, plus a flat CSV table of
//! the same numbers for plotting.  Both artifacts are byte-identical across
//! runs with the same spec, seed, and thread count.

use std::path::Path;

use serde_json::{Map, Value};

use crate::spec::{CliResult, Fail};

/// What a command runner hands back to the emitter.
pub struct RunOutput {
    /// Artifact file stem from the spec's `out_stem`, defaulting to the
    /// command name.
    pub stem: Option<String>,
    /// Command-specific report fields, merged into the envelope.
    pub payload: Map<String, Value>,
    /// Full CSV text including the header row.
    pub csv: String,
    /// Joint verdict of every check the command ran.
    pub pass: bool,
    /// Human-oriented stdout lines, printed before the verdict.
    pub summary: Vec<String>,
}

/// Prints the summary, writes the artifacts when a directory was given, and
/// closes with a single PASS/FAIL line.
pub fn emit(command: &str, seed: u64, output: &RunOutput, out_dir: Option<&Path>) -> CliResult<()> {
    for line in &output.summary {
        println!("{line}");
    }

    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        let stem = output.stem.as_deref().unwrap_or(command);

        let mut envelope = Map::new();
        envelope.insert("schema".into(), Value::from(1));
        envelope.insert("command".into(), Value::from(command));
        envelope.insert("seed".into(), Value::from(seed));
        for (k, v) in &output.payload {
            envelope.insert(k.clone(), v.clone());
        }
        envelope.insert("pass".into(), Value::from(output.pass));
        let json = serde_json::to_string_pretty(&Value::Object(envelope))
            .map_err(|e| Fail::Spec(format!("report serialization failed: {e}")))?;

        let json_path = dir.join(format!("{stem}.json"));
        let csv_path = dir.join(format!("{stem}.csv"));
        std::fs::write(&json_path, json + "\n")?;
        std::fs::write(&csv_path, &output.csv)?;
        println!("wrote {}", json_path.display());
        println!("wrote {}", csv_path.display());
    }

    println!("{}", if output.pass { "PASS" } else { "FAIL" });
    Ok(())
}

/// CSV assembly from a header and rows of already-formatted cells.  Values
/// are numbers, identifiers, or space-joined tuples, so no quoting is
/// needed; commas inside a cell would be a bug upstream.
pub fn csv_table(header: &str, rows: &[Vec<String>]) -> String {
    let mut text = String::from(header);
    text.push('\n');
    for row in rows {
        text.push_str(&row.join(","));
        text.push('\n');
    }
    text
}
