//! Run manifests: a sidecar record of everything needed to reproduce an
//! output file bit-for-bit.
//!
//! Each subcommand that writes an output file also writes
//! `<output>.manifest.json` next to it, recording the tool versions, the
//! fully resolved configuration (seeds included), and SHA-256 digests of
//! every input and of the output itself. Manifests carry no timestamps or
//! host details, so re-running the same command on the same inputs produces
//! the same manifest.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use nqpipe_core::{Error, Result};

/// Sidecar record written next to every output file.
#[derive(Debug, Serialize)]
pub struct Manifest {
    /// Crate versions that produced the output.
    pub versions: BTreeMap<String, String>,
    /// Which subcommand ran.
    pub subcommand: String,
    /// Fully resolved configuration, seeds included.
    pub config: serde_json::Value,
    /// SHA-256 digest of every input file, keyed by the path as given.
    pub inputs: BTreeMap<String, String>,
    /// The output file this manifest describes.
    pub output: OutputRecord,
}

/// Path and digest of the produced file.
#[derive(Debug, Serialize)]
pub struct OutputRecord {
    pub path: String,
    pub sha256: String,
}

/// Hex-encoded SHA-256 of a file's contents, streamed in chunks.
pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file =
        File::open(path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 65536];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// The manifest path for a given output path.
pub fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    name.push_str(".manifest.json");
    output.with_file_name(name)
}

/// Digest the inputs and the already-written output, then write the
/// manifest alongside the output.
pub fn write_manifest(
    subcommand: &str,
    config: serde_json::Value,
    inputs: &[&Path],
    output: &Path,
) -> Result<()> {
    let mut versions = BTreeMap::new();
    versions.insert("nqpipe".to_string(), env!("CARGO_PKG_VERSION").to_string());
    versions.insert("nqpipe-core".to_string(), nqpipe_core::VERSION.to_string());

    let mut input_digests = BTreeMap::new();
    for path in inputs {
        input_digests.insert(path.display().to_string(), sha256_file(path)?);
    }

    let manifest = Manifest {
        versions,
        subcommand: subcommand.to_string(),
        config,
        inputs: input_digests,
        output: OutputRecord {
            path: output.display().to_string(),
            sha256: sha256_file(output)?,
        },
    };

    let path = manifest_path(output);
    let mut file =
        File::create(&path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
    serde_json::to_writer_pretty(&mut file, &manifest)
        .map_err(|e| Error::Input(format!("serialize manifest: {e}")))?;
    file.write_all(b"\n")?;
    log::info!("wrote manifest {}", path.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_matches_a_known_vector() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("abc.txt");
        std::fs::write(&path, "abc").unwrap();
        // SHA-256("abc") is a published test vector.
        assert_eq!(
            sha256_file(&path).unwrap(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn manifest_path_appends_to_the_file_name() {
        assert_eq!(
            manifest_path(Path::new("out/instances.jsonl")),
            Path::new("out/instances.jsonl.manifest.json")
        );
    }

    #[test]
    fn manifest_is_deterministic_and_timestamp_free() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in.jsonl");
        let output = dir.path().join("out.jsonl");
        std::fs::write(&input, "{}\n").unwrap();
        std::fs::write(&output, "{}\n").unwrap();

        let config = serde_json::json!({"seed": 7});
        write_manifest("preprocess", config.clone(), &[&input], &output).unwrap();
        let first = std::fs::read_to_string(manifest_path(&output)).unwrap();
        write_manifest("preprocess", config, &[&input], &output).unwrap();
        let second = std::fs::read_to_string(manifest_path(&output)).unwrap();

        assert_eq!(first, second);
        let parsed: serde_json::Value = serde_json::from_str(&first).unwrap();
        assert_eq!(parsed["config"]["seed"], 7);
        assert!(parsed["inputs"][input.display().to_string()].is_string());
        assert_eq!(
            parsed["output"]["path"],
            serde_json::Value::String(output.display().to_string())
        );
    }
}
