//! TOML run configuration. Every field can be overridden from the command line.
//!
//! ```toml
//! [corrupt]
//! input = "data/casia-b"
//! output = "data"
//! kinds = "all"            # or ["fog", "rain"]
//! severities = [1, 3, 5]   # or "all"
//! seed = 42
//! mask_pack = "masks/coco"
//! workers = 8
//!
//! [evaluate]
//! clean = "emb/clean.csv"
//! perturbed = "emb/perturbed"
//! protocol = "casia-b"
//! distance = "normalized-euclidean"
//! ks = [1, 5, 10, 20]
//! out = "reports/deepgait"
//! ```

use std::path::{Path, PathBuf};

use gaitcorrupt_core::{CorruptionKind, Severity};
use serde::Deserialize;

use crate::error::{IoError, Result};

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(untagged)]
pub enum Selection<T> {
    Keyword(String),
    List(Vec<T>),
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub corrupt: CorruptSection,
    #[serde(default)]
    pub evaluate: EvaluateSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorruptSection {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub kinds: Option<Selection<String>>,
    pub severities: Option<Selection<u8>>,
    pub seed: Option<u64>,
    pub mask_pack: Option<PathBuf>,
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateSection {
    pub clean: Option<PathBuf>,
    pub perturbed: Option<PathBuf>,
    pub protocol: Option<String>,
    pub distance: Option<String>,
    pub ks: Option<Vec<usize>>,
    pub noisy_gallery: Option<PathBuf>,
    pub noisy_gallery_manifest: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub model: Option<String>,
    pub extractor: Option<String>,
    pub seed: Option<u64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(IoError::io(path))?;
        toml::from_str(&text).map_err(|e| IoError::Config(format!("{}: {e}", path.display())))
    }
}

/// Parses `all` or a comma-separated list of kind names.
pub fn parse_kinds(s: &str) -> Result<Vec<CorruptionKind>> {
    if s.trim().eq_ignore_ascii_case("all") {
        return Ok(CorruptionKind::ALL.to_vec());
    }
    kinds_from(s.split(',').map(str::trim).filter(|x| !x.is_empty()).map(String::from).collect())
}

fn kinds_from(names: Vec<String>) -> Result<Vec<CorruptionKind>> {
    let mut out = Vec::new();
    for n in names {
        let k: CorruptionKind = n.parse().map_err(|e| IoError::Config(format!("{e}")))?;
        if !out.contains(&k) {
            out.push(k);
        }
    }
    if out.is_empty() {
        return Err(IoError::Config("no corruption kinds selected".into()));
    }
    out.sort_by_key(|k| k.ordinal());
    Ok(out)
}

/// Parses `all` or a comma-separated list of levels.
pub fn parse_severities(s: &str) -> Result<Vec<Severity>> {
    if s.trim().eq_ignore_ascii_case("all") {
        return Ok(Severity::ALL.to_vec());
    }
    let levels = s
        .split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| x.parse::<u8>().map_err(|_| IoError::Config(format!("bad severity `{x}`"))))
        .collect::<Result<Vec<u8>>>()?;
    severities_from(levels)
}

fn severities_from(levels: Vec<u8>) -> Result<Vec<Severity>> {
    let mut out = levels
        .into_iter()
        .map(|l| Severity::new(l).map_err(|e| IoError::Config(e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    out.sort();
    out.dedup();
    if out.is_empty() {
        return Err(IoError::Config("no severities selected".into()));
    }
    Ok(out)
}

pub fn resolve_kinds(sel: Selection<String>) -> Result<Vec<CorruptionKind>> {
    match sel {
        Selection::Keyword(k) => parse_kinds(&k),
        Selection::List(v) => kinds_from(v),
    }
}

pub fn resolve_severities(sel: Selection<u8>) -> Result<Vec<Severity>> {
    match sel {
        Selection::Keyword(k) => parse_severities(&k),
        Selection::List(v) => severities_from(v),
    }
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, usize::from)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selections() {
        assert_eq!(parse_kinds("all").unwrap().len(), 15);
        assert_eq!(parse_kinds("fog, gaussian-noise").unwrap(), [CorruptionKind::GaussianNoise, CorruptionKind::Fog]);
        assert!(parse_kinds("fogg").is_err());
        assert_eq!(parse_severities("5,1,1").unwrap().iter().map(|s| s.level()).collect::<Vec<_>>(), [1, 5]);
        assert!(parse_severities("6").is_err());
    }

    #[test]
    fn toml_sections() {
        let c: FileConfig = toml::from_str(
            "[corrupt]\nkinds = \"all\"\nseverities = [1, 3]\nseed = 4\n[evaluate]\nprotocol = \"ccpg\"\n",
        )
        .unwrap();
        assert_eq!(resolve_kinds(c.corrupt.kinds.unwrap()).unwrap().len(), 15);
        assert_eq!(resolve_severities(c.corrupt.severities.unwrap()).unwrap().len(), 2);
        assert!(toml::from_str::<FileConfig>("[corrupt]\nbogus = 1\n").is_err());
    }
}
