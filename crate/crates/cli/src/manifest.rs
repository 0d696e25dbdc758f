//! Run manifests: what was run, with which settings, and checksums of every file written.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize)]
pub struct OutputFile {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
    pub schema: &'static str,
}

#[derive(Debug, Serialize)]
pub struct RunManifest<'a, C: Serialize, S: Serialize> {
    pub schema_version: u32,
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub argv: Vec<String>,
    pub config: &'a C,
    pub seed: u64,
    pub timestamp: String,
    pub outputs: Vec<OutputFile>,
    pub summary: S,
}

impl<'a, C: Serialize, S: Serialize> RunManifest<'a, C, S> {
    pub fn new(command: &'static str, config: &'a C, seed: u64, outputs: Vec<OutputFile>, summary: S) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            argv: std::env::args().collect(),
            config,
            seed,
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            outputs,
            summary,
        }
    }

    /// Writes to `explicit`, else next to the first output, else to stderr.
    pub fn emit(&self, explicit: Option<&Path>) -> std::io::Result<Option<PathBuf>> {
        let json = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        let target = explicit.map(Path::to_path_buf).or_else(|| {
            self.outputs
                .first()
                .filter(|o| o.path != STDOUT)
                .map(|o| PathBuf::from(format!("{}.manifest.json", o.path)))
        });
        match target {
            Some(p) => {
                fs::write(&p, json + "\n")?;
                Ok(Some(p))
            }
            None => {
                writeln!(std::io::stderr(), "{json}")?;
                Ok(None)
            }
        }
    }
}

/// Path recorded for data written to standard output.
pub const STDOUT: &str = "-";

/// Writes `contents` to `path` (or stdout) and records its checksum.
pub fn write_output(path: Option<&Path>, contents: &str, schema: &'static str) -> std::io::Result<OutputFile> {
    match path {
        Some(p) => fs::write(p, contents)?,
        None => std::io::stdout().write_all(contents.as_bytes())?,
    }
    let shown = path.unwrap_or(Path::new(STDOUT));
    Ok(describe(shown, contents.as_bytes(), schema))
}

fn describe(path: &Path, bytes: &[u8], schema: &'static str) -> OutputFile {
    OutputFile {
        path: path.display().to_string(),
        sha256: hex::encode(Sha256::digest(bytes)),
        bytes: bytes.len() as u64,
        schema,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checksum_of_known_input() {
        let o = describe(Path::new("x.csv"), b"abc", "t");
        assert_eq!(o.sha256, "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        assert_eq!(o.bytes, 3);
    }
}
