//! Versioned JSON files holding activation coefficients.

use std::fs;
use std::path::{Path, PathBuf};

use rfkr_core::estimators::{kernel_coeffs, KernelSettings};
use rfkr_core::{Activation, DomainSpec, GegenbauerCoeffs};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

pub const CACHE_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoeffFile {
    pub version: u32,
    pub coeffs: GegenbauerCoeffs,
}

pub fn to_json(coeffs: &GegenbauerCoeffs) -> Result<String> {
    Ok(serde_json::to_string_pretty(&CoeffFile { version: CACHE_VERSION, coeffs: coeffs.clone() })?)
}

pub fn from_json(text: &str) -> Result<GegenbauerCoeffs> {
    let file: CoeffFile = serde_json::from_str(text)?;
    if file.version != CACHE_VERSION {
        return Err(HarnessError::Usage(format!(
            "coefficient file version {} (expected {CACHE_VERSION})",
            file.version
        )));
    }
    Ok(file.coeffs)
}

pub fn save(path: &Path, coeffs: &GegenbauerCoeffs) -> Result<()> {
    fs::write(path, to_json(coeffs)?)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<GegenbauerCoeffs> {
    from_json(&fs::read_to_string(path)?)
}

/// File name for a kernel coefficient set inside a cache directory.
pub fn cache_path(dir: &Path, domain: &DomainSpec, act: &Activation) -> PathBuf {
    let tag: String = act
        .descriptor()
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
        .collect();
    dir.join(format!("{}-d{}-{tag}.json", domain.kind.name(), domain.d))
}

/// [`kernel_coeffs`] with default settings, read from or written to `dir`
/// when given. Stale or unreadable entries are recomputed.
pub fn kernel_coeffs_cached(dir: Option<&Path>, domain: &DomainSpec, act: &Activation) -> Result<GegenbauerCoeffs> {
    let Some(dir) = dir else {
        return Ok(kernel_coeffs(domain, act, &KernelSettings::default())?);
    };
    let path = cache_path(dir, domain, act);
    if let Ok(c) = load(&path) {
        if c.domain == *domain && c.activation == act.descriptor() {
            return Ok(c);
        }
    }
    let c = kernel_coeffs(domain, act, &KernelSettings::default())?;
    fs::create_dir_all(dir)?;
    save(&path, &c)?;
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let dom = DomainSpec::sphere(9).unwrap();
        let c = kernel_coeffs(&dom, &Activation::shifted_relu(0.5), &KernelSettings::default()).unwrap();
        let back = from_json(&to_json(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn rejects_other_versions() {
        let dom = DomainSpec::hypercube(5).unwrap();
        let c = kernel_coeffs(&dom, &Activation::relu(), &KernelSettings::default()).unwrap();
        let text = to_json(&c).unwrap().replacen("\"version\": 1", "\"version\": 99", 1);
        assert!(from_json(&text).is_err());
    }
}
