use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use zsl_core::matio::write_json;
use zsl_core::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Provenance record written next to every command's outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub flags: serde_json::Value,
    pub seeds: Vec<u64>,
    /// sha256 of every input file, keyed by the path given on the command line.
    pub inputs: BTreeMap<String, String>,
    /// sha256 of every output file, keyed by its path relative to the output directory.
    pub outputs: BTreeMap<String, String>,
    pub tool_version: String,
    /// Unix seconds; `SOURCE_DATE_EPOCH` when set.
    pub timestamp: u64,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Every file under `dir`, recursively, in sorted order.
pub fn list_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()
        .map_err(|e| Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            out.extend(list_files(&p)?);
        } else {
            out.push(p);
        }
    }
    Ok(out)
}

pub fn hash_inputs(inputs: &[PathBuf]) -> Result<BTreeMap<String, String>> {
    expand(inputs)?
        .into_iter()
        .map(|f| Ok((f.display().to_string(), sha256_file(&f)?)))
        .collect()
}

fn timestamp() -> u64 {
    std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or_else(|| SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0))
}

fn expand(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            out.extend(list_files(p)?);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

/// Hashes inputs and outputs (directories expanded) and writes `out_dir/manifest.json`.
pub fn write_manifest<F: Serialize>(
    command: &str,
    flags: &F,
    seeds: Vec<u64>,
    inputs: &[PathBuf],
    outputs: &[PathBuf],
    out_dir: &Path,
) -> Result<RunManifest> {
    let input_hashes = hash_inputs(inputs)?;
    let mut output_hashes = BTreeMap::new();
    for f in expand(outputs)? {
        let rel = f.strip_prefix(out_dir).unwrap_or(&f);
        let key = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
        output_hashes.insert(key, sha256_file(&f)?);
    }
    let manifest = RunManifest {
        command: command.to_string(),
        flags: serde_json::to_value(flags).map_err(|e| Error::InvalidArgument(e.to_string()))?,
        seeds,
        inputs: input_hashes,
        outputs: output_hashes,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp: timestamp(),
    };
    write_json(&out_dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hashes_inputs_and_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("out");
        fs::create_dir_all(out.join("sub")).unwrap();
        fs::write(out.join("a.txt"), "abc").unwrap();
        fs::write(out.join("sub/b.txt"), "").unwrap();
        let input = dir.path().join("in.txt");
        fs::write(&input, "abc").unwrap();
        let outputs = [out.join("a.txt"), out.join("sub")];
        let m = write_manifest("test", &serde_json::json!({"x": 1}), vec![3], &[input.clone()], &outputs, &out).unwrap();
        let abc = "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad";
        let empty = "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855";
        assert_eq!(m.inputs[&input.display().to_string()], abc);
        assert_eq!(m.outputs["a.txt"], abc);
        assert_eq!(m.outputs["sub/b.txt"], empty);
        assert_eq!(m.outputs.len(), 2);
        let again = write_manifest("test", &serde_json::json!({"x": 1}), vec![3], &[input], &outputs, &out).unwrap();
        assert_eq!(again.outputs, m.outputs);
        assert!(out.join(MANIFEST_FILE).exists());
    }
}
