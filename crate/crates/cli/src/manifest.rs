use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cli::Command;

pub const ARTIFACT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub bytes: u64,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path) -> Result<Self> {
        let data = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(FileDigest {
            path: path.to_path_buf(),
            bytes: data.len() as u64,
            sha256: format!("{:x}", Sha256::digest(&data)),
        })
    }
}

/// Everything needed to rerun a command: the fully resolved flag set plus
/// digests of what it read and wrote. Paths are stored as given, so a replay
/// resolves them against its own working directory.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub tool_version: String,
    pub artifact_version: u32,
    pub subcommand: String,
    pub command: Command,
    pub seeds: Vec<u64>,
    pub threads: Option<usize>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub started_unix_secs: u64,
    pub wall_clock_secs: f64,
}

/// Location of the manifest describing `primary_output`.
pub fn manifest_path(primary_output: &Path) -> PathBuf {
    let mut name = primary_output.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    primary_output.with_file_name(name)
}

/// Writes `contents` to a sibling temporary file and renames it into place,
/// so readers never observe a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    commit(path, |tmp| fs::write(tmp, contents).with_context(|| format!("writing {}", tmp.display())))
}

/// Runs `write` against a temporary sibling of `path`, then renames it over
/// `path`. The temporary file is removed if `write` fails.
pub fn commit<F>(path: &Path, write: F) -> Result<()>
where
    F: FnOnce(&Path) -> Result<()>,
{
    let mut name = std::ffi::OsString::from(".");
    name.push(path.file_name().with_context(|| format!("{} is not a file path", path.display()))?);
    name.push(format!(".{}.tmp", std::process::id()));
    let tmp = path.with_file_name(name);
    if let Err(e) = write(&tmp) {
        let _ = fs::remove_file(&tmp);
        return Err(e);
    }
    fs::rename(&tmp, path).with_context(|| format!("renaming {} to {}", tmp.display(), path.display()))
}

pub fn save_manifest(manifest: &RunManifest, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(manifest)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn load_manifest(path: &Path) -> Result<RunManifest> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let manifest: RunManifest =
        serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))?;
    if manifest.artifact_version != ARTIFACT_VERSION {
        bail!(
            "manifest {} has artifact version {}, expected {ARTIFACT_VERSION}",
            path.display(),
            manifest.artifact_version
        );
    }
    Ok(manifest)
}

/// First recorded file whose current digest differs, if any.
pub fn first_mismatch(recorded: &[FileDigest]) -> Result<Option<(FileDigest, FileDigest)>> {
    for r in recorded {
        let now = FileDigest::of(&r.path)?;
        if &now != r {
            return Ok(Some((r.clone(), now)));
        }
    }
    Ok(None)
}
