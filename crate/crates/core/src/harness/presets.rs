//! Case configurations shipped with the crate.

use super::config::CaseConfig;
use crate::error::{QcError, Result};

const PRESETS: [(&str, &str); 5] = [
    ("square-stretch-iss", include_str!("../../presets/square-stretch-iss.toml")),
    ("tri-tension-fs-24", include_str!("../../presets/tri-tension-fs-24.toml")),
    ("tri-bending-fs-24", include_str!("../../presets/tri-bending-fs-24.toml")),
    ("three-point-bending-iss", include_str!("../../presets/three-point-bending-iss.toml")),
    ("notched-tension-iss", include_str!("../../presets/notched-tension-iss.toml")),
];

pub fn list() -> Vec<&'static str> {
    PRESETS.iter().map(|(name, _)| *name).collect()
}

pub fn source(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

pub fn load(name: &str) -> Result<CaseConfig> {
    let text = source(name).ok_or_else(|| {
        QcError::Config(format!("unknown preset '{name}'; available: {}", list().join(", ")))
    })?;
    CaseConfig::from_toml_str(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_parses_and_names_match() {
        for name in list() {
            let cfg = load(name).unwrap();
            assert_eq!(cfg.name, name);
        }
        assert!(load("nope").is_err());
    }
}
