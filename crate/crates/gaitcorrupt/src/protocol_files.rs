//! Named protocols and protocol JSON files.

use std::path::Path;

use gaitcorrupt_core::protocols::ProtocolSpec;

use crate::dataset_io::read_json;
use crate::error::{IoError, Result};

const CCPG: &str = include_str!("../protocols/ccpg.json");
const MEVID: &str = include_str!("../protocols/mevid.json");

pub const NAMES: [&str; 4] = ["casia-b", "ccpg", "sustech1k", "mevid"];

fn parse_builtin(text: &str) -> ProtocolSpec {
    serde_json::from_str(text).expect("bundled protocol files are valid")
}

/// Built-in protocol by name (case-insensitive), or `None`.
pub fn builtin(name: &str) -> Option<ProtocolSpec> {
    match name.to_ascii_lowercase().replace('_', "-").as_str() {
        "casia-b" | "casiab" => Some(ProtocolSpec::casia_b()),
        "sustech1k" | "sustech-1k" => Some(ProtocolSpec::sustech1k()),
        "ccpg" => Some(parse_builtin(CCPG)),
        "mevid" => Some(parse_builtin(MEVID)),
        _ => None,
    }
}

/// A built-in name or a path to a protocol JSON file.
pub fn resolve(name_or_path: &str) -> Result<ProtocolSpec> {
    if let Some(p) = builtin(name_or_path) {
        return Ok(p);
    }
    let path = Path::new(name_or_path);
    if !path.is_file() {
        return Err(IoError::Config(format!(
            "unknown protocol `{name_or_path}`; expected one of {} or a JSON file",
            NAMES.join(", ")
        )));
    }
    let spec: ProtocolSpec = read_json(path)?;
    spec.validate().map_err(IoError::core(path))?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use gaitcorrupt_core::protocols::Dataset;

    #[test]
    fn bundled_files_parse() {
        for n in NAMES {
            let p = resolve(n).unwrap();
            assert!(!p.gallery_conditions.is_empty());
        }
        assert_eq!(builtin("ccpg").unwrap().dataset, Dataset::Ccpg);
        assert_eq!(builtin("CCPG").unwrap().probe_conditions.len(), 5);
        assert!(matches!(resolve("nope"), Err(IoError::Config(_))));
    }
}
