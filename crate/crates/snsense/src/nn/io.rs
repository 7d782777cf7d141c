//! Weight persistence: a JSON manifest next to a little-endian float32 blob.
//!
//! `<prefix>.json` records the topology, flatten order and dtype;
//! `<prefix>.bin` holds the tensors in file order (per conv layer kernels
//! then bias, fc weight row-major, fc bias).

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{NetworkSpec, WeightSet};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct WeightsManifest {
    spec: NetworkSpec,
    flatten_order: String,
    dtype: String,
    endianness: String,
    /// Expected blob length in bytes, for truncation detection.
    blob_bytes: usize,
}

fn manifest_path(prefix: &Path) -> PathBuf {
    prefix.with_extension("json")
}

fn blob_path(prefix: &Path) -> PathBuf {
    prefix.with_extension("bin")
}

/// Serialize weights under `<prefix>.json` / `<prefix>.bin`.
pub fn save_weights(prefix: &Path, spec: &NetworkSpec, weights: &WeightSet) -> Result<()> {
    if !weights.matches(spec) {
        return Err(Error::ShapeMismatch {
            expected: "weights matching the network spec".into(),
            got: "mismatched weight shapes".into(),
            context: "save_weights".into(),
        });
    }
    let mut blob: Vec<u8> = Vec::with_capacity(spec.parameter_count() * 4);
    weights.for_each_tensor(|t| {
        for &v in t {
            blob.extend_from_slice(&(v as f32).to_le_bytes());
        }
    });
    let manifest = WeightsManifest {
        spec: spec.clone(),
        flatten_order: "band_major".into(),
        dtype: "float32".into(),
        endianness: "little".into(),
        blob_bytes: blob.len(),
    };
    if let Some(parent) = prefix.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(manifest_path(prefix), serde_json::to_vec_pretty(&manifest)?)?;
    fs::write(blob_path(prefix), blob)?;
    Ok(())
}

/// Load a weight file pair, returning the stored topology with the weights.
pub fn load_weights(prefix: &Path) -> Result<(NetworkSpec, WeightSet)> {
    let manifest: WeightsManifest =
        serde_json::from_slice(&fs::read(manifest_path(prefix))?)?;
    if manifest.dtype != "float32" || manifest.endianness != "little" {
        return Err(Error::Format(format!(
            "unsupported weight encoding {}/{}",
            manifest.dtype, manifest.endianness
        )));
    }
    if manifest.flatten_order != "band_major" {
        return Err(Error::Format(format!(
            "unsupported flatten order {}",
            manifest.flatten_order
        )));
    }
    let blob = fs::read(blob_path(prefix))?;
    if blob.len() != manifest.blob_bytes
        || blob.len() != manifest.spec.parameter_count() * 4
    {
        return Err(Error::Format(format!(
            "weight blob is {} bytes, expected {}",
            blob.len(),
            manifest.spec.parameter_count() * 4
        )));
    }
    let mut weights = WeightSet::zeros(&manifest.spec);
    let mut offset = 0usize;
    weights.for_each_tensor_mut(|t| {
        for v in t.iter_mut() {
            let bytes: [u8; 4] = blob[offset..offset + 4].try_into().expect("length checked");
            *v = f32::from_le_bytes(bytes) as f64;
            offset += 4;
        }
    });
    Ok((manifest.spec, weights))
}

/// Load weights that must match an expected topology.
pub fn load_weights_expecting(prefix: &Path, expected: &NetworkSpec) -> Result<WeightSet> {
    let (spec, weights) = load_weights(prefix)?;
    if &spec != expected {
        return Err(Error::ShapeMismatch {
            expected: format!("{:?}", expected),
            got: format!("{:?}", spec),
            context: "load_weights_expecting".into(),
        });
    }
    Ok(weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec_and_weights() -> (NetworkSpec, WeightSet) {
        let spec = NetworkSpec::new(3, 10, 2, &[(3, 4), (2, 3)]).unwrap();
        let weights = WeightSet::init(&spec, 17);
        (spec, weights)
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let prefix = dir.path().join("model");
        let (spec, weights) = spec_and_weights();
        save_weights(&prefix, &spec, &weights).unwrap();
        let (spec2, loaded) = load_weights(&prefix).unwrap();
        assert_eq!(spec, spec2);

        // Saving the loaded weights again reproduces both files exactly.
        let prefix2 = dir.path().join("model2");
        save_weights(&prefix2, &spec2, &loaded).unwrap();
        let blob1 = std::fs::read(prefix.with_extension("bin")).unwrap();
        let blob2 = std::fs::read(prefix2.with_extension("bin")).unwrap();
        assert_eq!(blob1, blob2);
        let man1 = std::fs::read(prefix.with_extension("json")).unwrap();
        let man2 = std::fs::read(prefix2.with_extension("json")).unwrap();
        assert_eq!(man1, man2);
    }

    #[test]
    fn truncated_blob_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let prefix = dir.path().join("model");
        let (spec, weights) = spec_and_weights();
        save_weights(&prefix, &spec, &weights).unwrap();
        let blob = std::fs::read(prefix.with_extension("bin")).unwrap();
        std::fs::write(prefix.with_extension("bin"), &blob[..blob.len() - 5]).unwrap();
        assert!(matches!(load_weights(&prefix), Err(Error::Format(_))));
    }

    #[test]
    fn wrong_spec_load_is_a_shape_error() {
        let dir = tempfile::tempdir().unwrap();
        let prefix = dir.path().join("model");
        let (spec, weights) = spec_and_weights();
        save_weights(&prefix, &spec, &weights).unwrap();
        let other = NetworkSpec::new(3, 10, 2, &[(4, 4), (2, 3)]).unwrap();
        assert!(matches!(
            load_weights_expecting(&prefix, &other),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn missing_file_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let prefix = dir.path().join("absent");
        assert!(matches!(load_weights(&prefix), Err(Error::Io(_))));
    }
}
