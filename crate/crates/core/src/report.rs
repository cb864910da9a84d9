//! Run manifests and report writing.
//!
//! Every report names the run that produced it: CSV and JSONL files start
//! with a `# schema_version=.. run_id=.. manifest=..` comment line, JSON
//! reports carry the same three fields. The manifest itself is written next
//! to the output as `<output>.manifest.json`.
//!
//! The run id hashes everything that can influence report contents (tool
//! version, subcommand, flags, input digests, seeds) and nothing that
//! cannot (wall time, thread count, log level, output locations), so two
//! runs with the same id produce byte-identical reports.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use tempfile::NamedTempFile;
use time::format_description::well_known::Rfc3339;
use time::OffsetDateTime;

pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Flags that never change report contents and stay out of the run id.
pub const NON_SEMANTIC_FLAGS: &[&str] = &["threads", "log_level", "out", "out_snapshots", "completeness_out"];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    /// sha256 of the decompressed contents.
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    /// Every flag, defaults included.
    pub flags: BTreeMap<String, Value>,
    /// Keyed by the flag the input was given with.
    pub inputs: BTreeMap<String, InputDigest>,
    pub seeds: BTreeMap<String, u64>,
    pub run_id: String,
    pub started_at: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finished_at: Option<String>,
    #[serde(default)]
    pub outputs: Vec<String>,
}

fn now_rfc3339() -> String {
    OffsetDateTime::now_utc().format(&Rfc3339).unwrap_or_default()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl RunManifest {
    pub fn new(subcommand: &str, flags: BTreeMap<String, Value>) -> Self {
        let mut m = RunManifest {
            schema_version: REPORT_SCHEMA_VERSION,
            tool: "rovscope".into(),
            version: TOOL_VERSION.into(),
            subcommand: subcommand.into(),
            flags,
            inputs: BTreeMap::new(),
            seeds: BTreeMap::new(),
            run_id: String::new(),
            started_at: now_rfc3339(),
            finished_at: None,
            outputs: Vec::new(),
        };
        m.refresh_run_id();
        m
    }

    pub fn add_input(&mut self, flag: &str, path: &Path, contents: &[u8]) {
        self.inputs.insert(
            flag.into(),
            InputDigest {
                path: path.display().to_string(),
                sha256: sha256_hex(contents),
            },
        );
        self.refresh_run_id();
    }

    pub fn add_seed(&mut self, name: &str, seed: u64) {
        self.seeds.insert(name.into(), seed);
        self.refresh_run_id();
    }

    /// Hex prefix of sha256 over the semantic part of the manifest.
    pub fn compute_run_id(&self) -> String {
        let flags: BTreeMap<&String, &Value> = self
            .flags
            .iter()
            .filter(|(k, _)| !NON_SEMANTIC_FLAGS.contains(&k.as_str()))
            // a flag naming an input file is covered by the file's digest
            .filter(|(k, _)| !self.inputs.keys().any(|i| i.split('[').next() == Some(k.as_str())))
            .collect();
        // input paths do not matter, their contents do
        let inputs: BTreeMap<&String, &String> = self.inputs.iter().map(|(k, d)| (k, &d.sha256)).collect();
        let key = serde_json::json!({
            "schema_version": self.schema_version,
            "tool": self.tool,
            "version": self.version,
            "subcommand": self.subcommand,
            "flags": flags,
            "inputs": inputs,
            "seeds": self.seeds,
        });
        sha256_hex(key.to_string().as_bytes())[..16].to_string()
    }

    fn refresh_run_id(&mut self) {
        self.run_id = self.compute_run_id();
    }

    /// `# schema_version=1 run_id=... manifest=...`, without a newline.
    pub fn header_line(&self, manifest_name: &str) -> String {
        format!(
            "# schema_version={} run_id={} manifest={}",
            self.schema_version, self.run_id, manifest_name
        )
    }

    /// Stamps the end time and writes the manifest atomically.
    pub fn finish(&mut self, path: &Path) -> io::Result<()> {
        self.finished_at = Some(now_rfc3339());
        let mut text = serde_json::to_string_pretty(self).map_err(io::Error::other)?;
        text.push('\n');
        write_atomic(path, |w| w.write_all(text.as_bytes()))
    }
}

/// `<output>.manifest.json`.
pub fn manifest_path_for(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    output.with_file_name(name)
}

fn file_name(p: &Path) -> String {
    p.file_name().unwrap_or_default().to_string_lossy().into_owned()
}

/// Writes through a temporary file in the destination directory and
/// renames it into place, so readers never see a partial report.
pub fn write_atomic<F>(path: &Path, body: F) -> io::Result<()>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let tmp = NamedTempFile::new_in(dir)?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        body(&mut w)?;
        w.flush()?;
    }
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// A text report (CSV or JSONL) behind the manifest header line.
pub fn write_text_report<F>(path: &Path, manifest: &mut RunManifest, manifest_file: &Path, body: F) -> io::Result<()>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    let header = manifest.header_line(&file_name(manifest_file));
    write_atomic(path, |w| {
        writeln!(w, "{header}")?;
        body(w)
    })?;
    manifest.outputs.push(path.display().to_string());
    Ok(())
}

/// A JSON report: `body` must serialize to an object; the schema version,
/// run id and manifest name are added to it.
pub fn write_json_report<T: Serialize>(
    path: &Path,
    manifest: &mut RunManifest,
    manifest_file: &Path,
    body: &T,
) -> io::Result<()> {
    let mut value = serde_json::to_value(body).map_err(io::Error::other)?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| io::Error::other("report body is not a JSON object"))?;
    obj.insert("schema_version".into(), REPORT_SCHEMA_VERSION.into());
    obj.insert("run_id".into(), manifest.run_id.clone().into());
    obj.insert("manifest".into(), file_name(manifest_file).into());
    let mut text = serde_json::to_string_pretty(&value).map_err(io::Error::other)?;
    text.push('\n');
    write_atomic(path, |w| w.write_all(text.as_bytes()))?;
    manifest.outputs.push(path.display().to_string());
    Ok(())
}

/// Splits the header line off a text report: `(run_id, rest)`.
pub fn strip_header(text: &str) -> Option<(&str, &str)> {
    let (first, rest) = text.split_once('\n')?;
    let run_id = first
        .strip_prefix("# ")?
        .split(' ')
        .find_map(|kv| kv.strip_prefix("run_id="))?;
    Some((run_id, rest))
}
