//! Checkpoint directory: `manifest.txt` plus one little-endian `f32` file per
//! parameter array.
//!
//! ```text
//! format=aecif-checkpoint
//! version=1
//! model.input_size=64x64
//! ...
//! param.encoder.stage0.conv.weight=16x3x3x3
//! ```

use std::fs;
use std::path::Path;

use crate::error::{config_err, data_err, Error, Result};
use crate::kv::{format_dims, parse_dims, KvDoc};
use crate::model::{AecifNet, ModelConfig};
use crate::nn::Parameterized;

pub const MANIFEST: &str = "manifest.txt";
const FORMAT: &str = "aecif-checkpoint";
const VERSION: u32 = 1;

/// Parsed checkpoint manifest.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckpointManifest {
    pub config: ModelConfig,
    /// `(name, shape)` in model order.
    pub params: Vec<(String, Vec<usize>)>,
}

impl CheckpointManifest {
    pub fn parse(text: &str) -> Result<Self> {
        let doc = KvDoc::parse(text)?;
        match doc.get("format") {
            Some(FORMAT) => {}
            other => return Err(config_err!("not a checkpoint manifest (format={other:?})")),
        }
        let version: u32 = doc.require("version")?;
        if version != VERSION {
            return Err(config_err!("unsupported checkpoint version {version}"));
        }
        for key in doc.keys() {
            let known = key == "format"
                || key == "version"
                || key.starts_with("param.")
                || key
                    .strip_prefix("model.")
                    .is_some_and(|k| ModelConfig::KEYS.contains(&k));
            if !known {
                return Err(config_err!("unknown manifest key `{key}`"));
            }
        }
        let config = ModelConfig::read_kv(&doc, "model.", &ModelConfig::desk_scale())?;
        let params = doc
            .iter()
            .filter_map(|(k, v)| k.strip_prefix("param.").map(|name| (name, v)))
            .map(|(name, v)| Ok((name.to_string(), parse_dims(v)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(CheckpointManifest { config, params })
    }

    pub fn render(&self) -> String {
        let mut doc = KvDoc::new();
        doc.insert("format", FORMAT);
        doc.insert("version", VERSION);
        self.config.write_kv(&mut doc, "model.");
        for (name, shape) in &self.params {
            doc.insert(format!("param.{name}"), format_dims(shape));
        }
        doc.render()
    }
}

fn param_file(name: &str) -> String {
    format!("{name}.bin")
}

pub fn encode_f32_le(values: &[f32]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub fn decode_f32_le(bytes: &[u8]) -> Result<Vec<f32>> {
    if !bytes.len().is_multiple_of(4) {
        return Err(data_err!("parameter file length {} is not a multiple of 4", bytes.len()));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

pub fn save_checkpoint(model: &AecifNet<f32>, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let params = model.params();
    let manifest = CheckpointManifest {
        config: model.config().clone(),
        params: params.iter().map(|p| (p.name.clone(), p.shape.clone())).collect(),
    };
    let path = dir.join(MANIFEST);
    fs::write(&path, manifest.render()).map_err(|e| Error::io(&path, e))?;
    for p in params {
        let path = dir.join(param_file(&p.name));
        fs::write(&path, encode_f32_le(&p.value)).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

pub fn load_checkpoint(dir: &Path) -> Result<AecifNet<f32>> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest = CheckpointManifest::parse(&text)?;
    let mut model = AecifNet::<f32>::uninitialized(manifest.config.clone())?;
    let mut expected = model.params_mut();
    if expected.len() != manifest.params.len() {
        return Err(data_err!(
            "checkpoint lists {} arrays, model has {}",
            manifest.params.len(),
            expected.len()
        ));
    }
    for (param, (name, shape)) in expected.iter_mut().zip(&manifest.params) {
        if &param.name != name || &param.shape != shape {
            return Err(data_err!(
                "checkpoint array {name} ({}) does not match model array {} ({})",
                format_dims(shape),
                param.name,
                format_dims(&param.shape)
            ));
        }
        let path = dir.join(param_file(name));
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let values = decode_f32_le(&bytes)?;
        if values.len() != param.value.len() {
            return Err(data_err!(
                "{} holds {} values, expected {}",
                path.display(),
                values.len(),
                param.value.len()
            ));
        }
        param.value = values;
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_rejects_garbage() {
        assert!(CheckpointManifest::parse("").is_err());
        assert!(CheckpointManifest::parse("format=aecif-checkpoint\nversion=2\n").is_err());
        assert!(CheckpointManifest::parse("format=aecif-checkpoint\nversion=1\nbogus=1\n").is_err());
        assert!(CheckpointManifest::parse("format=aecif-checkpoint\nversion=1\nparam.a=3xq\n").is_err());
    }

    #[test]
    fn f32_codec_is_bit_exact() {
        let v = vec![0.0f32, -0.0, 1.5, f32::MIN_POSITIVE, -3.25e-7, f32::MAX];
        let back = decode_f32_le(&encode_f32_le(&v)).unwrap();
        assert_eq!(
            v.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
            back.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        );
        assert!(decode_f32_le(&[0, 1, 2]).is_err());
    }
}
