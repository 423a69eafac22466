//! Shipped presets: the BDFA gain/NF dataset, the three per-wavelength
//! link descriptions, and six ready-to-run experiment configurations.
//!
//! All presets are embedded copies of the files under `data/`, so the CLI
//! works from any directory; the files themselves remain the reference
//! formats and can be loaded by path from a config.

use crate::channel::AmplifierProfile;
use crate::harness::config::{ConfigError, RawLink};
use std::path::{Path, PathBuf};

/// The measured BDFA gain/NF dataset (1260–1360 nm), one row per nm.
pub const BDFA_PROFILE_CSV: &str = include_str!("../../data/bdfa_profile.csv");

const LINKS: &[(&str, &str)] = &[
    ("1290nm", include_str!("../../data/links/1290nm.toml")),
    ("1310nm", include_str!("../../data/links/1310nm.toml")),
    ("1330nm", include_str!("../../data/links/1330nm.toml")),
];

const EXPERIMENTS: &[(&str, &str)] = &[
    ("1290nm_25gbd", include_str!("../../data/presets/1290nm_25gbd.toml")),
    ("1290nm_50gbd", include_str!("../../data/presets/1290nm_50gbd.toml")),
    ("1310nm_25gbd", include_str!("../../data/presets/1310nm_25gbd.toml")),
    ("1310nm_50gbd", include_str!("../../data/presets/1310nm_50gbd.toml")),
    ("1330nm_25gbd", include_str!("../../data/presets/1330nm_25gbd.toml")),
    ("1330nm_50gbd", include_str!("../../data/presets/1330nm_50gbd.toml")),
];

pub fn experiment_preset_names() -> Vec<&'static str> {
    EXPERIMENTS.iter().map(|(n, _)| *n).collect()
}

pub fn link_preset_names() -> Vec<&'static str> {
    LINKS.iter().map(|(n, _)| *n).collect()
}

/// Raw TOML text of a named experiment preset.
pub fn experiment_preset(name: &str) -> Result<&'static str, ConfigError> {
    EXPERIMENTS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| *text)
        .ok_or_else(|| ConfigError::UnknownPreset {
            name: name.to_string(),
            available: experiment_preset_names().join(", "),
        })
}

/// True when a profile path refers to the embedded BDFA dataset.
pub fn is_builtin_profile(path: &str) -> bool {
    path == "builtin" || path == "../bdfa_profile.csv"
}

/// Loads an amplifier profile: `"builtin"` (embedded dataset) or a CSV path
/// resolved against `base_dir`.
pub fn load_profile(
    path: &str,
    base_dir: Option<&Path>,
) -> Result<AmplifierProfile, ConfigError> {
    if path == "builtin" {
        return AmplifierProfile::from_csv_str(BDFA_PROFILE_CSV)
            .map_err(|e| ConfigError::Invalid(format!("embedded profile: {e}")));
    }
    match base_dir {
        Some(base) => {
            let full = base.join(path);
            let text = std::fs::read_to_string(&full).map_err(|source| ConfigError::Io {
                path: full.display().to_string(),
                source,
            })?;
            AmplifierProfile::from_csv_str(&text)
                .map_err(|e| ConfigError::Invalid(format!("{}: {e}", full.display())))
        }
        // Embedded link presets reference the shipped dataset relatively;
        // with no directory to resolve against, that means the builtin copy.
        None if is_builtin_profile(path) => AmplifierProfile::from_csv_str(BDFA_PROFILE_CSV)
            .map_err(|e| ConfigError::Invalid(format!("embedded profile: {e}"))),
        None => Err(ConfigError::Invalid(format!(
            "cannot resolve profile path '{path}' without a config directory; use \"builtin\""
        ))),
    }
}

/// Loads a link description: a shipped name (`"1310nm"`) or a TOML path
/// resolved against `base_dir`. Returns the raw link plus the directory its
/// own relative paths (e.g. the profile CSV) resolve against.
pub fn load_link(
    name_or_path: &str,
    base_dir: Option<&Path>,
) -> Result<(RawLink, Option<PathBuf>), ConfigError> {
    if let Some((_, text)) = LINKS.iter().find(|(n, _)| *n == name_or_path) {
        let raw: RawLink = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: format!("link preset '{name_or_path}'"),
            message: e.to_string(),
        })?;
        return Ok((raw, None));
    }
    if !name_or_path.ends_with(".toml") {
        return Err(ConfigError::UnknownPreset {
            name: name_or_path.to_string(),
            available: link_preset_names().join(", "),
        });
    }
    let path = match base_dir {
        Some(base) => base.join(name_or_path),
        None => PathBuf::from(name_or_path),
    };
    let text = std::fs::read_to_string(&path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let raw: RawLink = toml::from_str(&text).map_err(|e| ConfigError::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    Ok((raw, path.parent().map(PathBuf::from)))
}
