use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{HeadConfig, HeadParams, PARAM_NAMES};
use crate::error::{Error, Result};
use crate::media::{decode_tensor, encode_tensor, TensorFile};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub file: String,
    pub shape: Vec<usize>,
    pub dtype: String,
}

/// Everything needed to rebuild a trained head and its input pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelManifest {
    pub config: HeadConfig,
    /// Descriptor grid the features were computed with.
    pub grid: usize,
    /// Whether sequences are z-scored over time.
    pub normalize: bool,
    pub tensors: BTreeMap<String, TensorEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadModel {
    pub config: HeadConfig,
    pub grid: usize,
    pub normalize: bool,
    pub params: HeadParams,
}

/// One tensor file per parameter plus a JSON manifest.
pub fn save_model(dir: &Path, model: &HeadModel) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tensors = BTreeMap::new();
    for (name, t) in PARAM_NAMES.iter().zip(model.params.tensors()) {
        let file = format!("{name}.dsrb");
        let shape = t.shape().to_vec();
        let tensor = TensorFile::f64(shape.clone(), t.iter().copied().collect())?;
        let path = dir.join(&file);
        fs::write(&path, encode_tensor(&tensor)).map_err(|e| Error::io(&path, e))?;
        tensors.insert(
            name.to_string(),
            TensorEntry {
                file,
                shape,
                dtype: tensor.dtype().name().to_string(),
            },
        );
    }
    let manifest = ModelManifest {
        config: model.config,
        grid: model.grid,
        normalize: model.normalize,
        tensors,
    };
    let path = dir.join(MANIFEST);
    let text = serde_json::to_string_pretty(&manifest)?;
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}

pub fn load_model(dir: &Path) -> Result<HeadModel> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: ModelManifest = serde_json::from_str(&text)?;
    manifest.config.validate()?;
    let mut params = HeadParams::zeros(&manifest.config);
    for (name, mut dst) in PARAM_NAMES.iter().zip(params.tensors_mut()) {
        let entry = manifest
            .tensors
            .get(*name)
            .ok_or_else(|| Error::Ingest(format!("manifest has no tensor `{name}`")))?;
        let path = dir.join(&entry.file);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let tensor = decode_tensor(&bytes)?;
        if tensor.dims != dst.shape() {
            return Err(Error::DimMismatch(format!(
                "{name}: file has shape {:?}, config needs {:?}",
                tensor.dims,
                dst.shape()
            )));
        }
        dst.iter_mut().zip(tensor.to_f64()).for_each(|(d, v)| *d = v);
    }
    if !params.is_finite() {
        return Err(Error::Ingest("model contains non-finite values".into()));
    }
    Ok(HeadModel {
        config: manifest.config,
        grid: manifest.grid,
        normalize: manifest.normalize,
        params,
    })
}
