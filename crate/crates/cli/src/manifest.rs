use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};
use crate::job::Job;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Everything needed to reproduce a run. Carries no timestamps or output
/// locations, so two runs of the same job write identical manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub seed: Option<u64>,
    /// Fully resolved parameters after merging config file and flags.
    pub config: Job,
    /// sha256 of every input file, keyed by path.
    pub inputs: BTreeMap<PathBuf, String>,
    /// sha256 of every file written, keyed by name within the run directory.
    pub outputs: BTreeMap<String, String>,
    /// Headline numbers, e.g. the simulated market volatility.
    pub results: serde_json::Value,
}

impl RunManifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| volstab_core::Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| {
            CliError::from(volstab_core::Error::Format {
                path: path.to_path_buf(),
                message: format!("not a run manifest: {e}"),
            })
        })
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file = fs::File::open(path).map_err(|e| volstab_core::Error::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf).map_err(|e| volstab_core::Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

/// Digests of an input path; a directory contributes each of its `.csv` files.
pub fn digest_inputs(path: &Path, into: &mut BTreeMap<PathBuf, String>) -> Result<()> {
    if path.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(path)
            .map_err(|e| volstab_core::Error::io(path, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .collect();
        files.sort();
        for f in files {
            let d = sha256_file(&f)?;
            into.insert(f, d);
        }
    } else {
        into.insert(path.to_path_buf(), sha256_file(path)?);
    }
    Ok(())
}
