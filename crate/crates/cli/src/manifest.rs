use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const RUN_MANIFEST: &str = "run-manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    /// Relative to the output root, `/`-separated.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Everything needed to rerun a stage: tool version, effective parameters
/// and the digests of what it read and wrote. Deliberately free of
/// timestamps and absolute paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub stage: String,
    pub seed: Option<u64>,
    pub parameters: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

pub fn sha256_file(path: &Path) -> Result<(String, u64), CliError> {
    let bytes = fs::read(path).map_err(|e| io_error(path, e))?;
    Ok((hex::encode(Sha256::digest(&bytes)), bytes.len() as u64))
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    match e.kind() {
        std::io::ErrorKind::NotFound => CliError::MissingInput(path.to_path_buf()),
        _ => CliError::Stage {
            stage: "manifest",
            source: morphkit::MorphError::Io {
                path: path.to_path_buf(),
                source: e,
            },
        },
    }
}

fn relative(root: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

fn collect_files(dir: &Path, acc: &mut Vec<PathBuf>) -> Result<(), CliError> {
    for entry in fs::read_dir(dir).map_err(|e| io_error(dir, e))? {
        let path = entry.map_err(|e| io_error(dir, e))?.path();
        if path.is_dir() {
            collect_files(&path, acc)?;
        } else {
            acc.push(path);
        }
    }
    Ok(())
}

/// Digests of the given files and of every file under the given directories,
/// sorted by relative path; stage run manifests inside directories are
/// skipped.
pub fn digest_paths(root: &Path, paths: &[PathBuf]) -> Result<Vec<FileDigest>, CliError> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            collect_files(p, &mut files)?;
            files.retain(|f| f.file_name().is_none_or(|n| n != RUN_MANIFEST) || paths.contains(f));
        } else {
            files.push(p.clone());
        }
    }
    let mut out = files
        .iter()
        .map(|f| {
            let (sha256, bytes) = sha256_file(f)?;
            Ok(FileDigest {
                path: relative(root, f),
                sha256,
                bytes,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    out.sort_by(|a, b| a.path.cmp(&b.path));
    out.dedup_by(|a, b| a.path == b.path);
    Ok(out)
}

impl RunManifest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serialises");
        s.push('\n');
        s
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf, CliError> {
        let path = dir.join(RUN_MANIFEST);
        fs::write(&path, self.to_json()).map_err(|e| io_error(&path, e))?;
        Ok(path)
    }
}
