//! Versioned on-disk format for models and soft prompts.
//!
//! A checkpoint is a directory holding `manifest.json` (format version,
//! configuration, and a tensor directory of name, shape, dtype, byte
//! offset, and checksum) plus `tensors.bin`, the concatenated little-endian
//! 32-bit float data. Parameters are f64 in memory; narrowing to f32 on
//! disk halves the size and costs at most one part in 2^24 per value, which
//! the round-trip tests bound behaviorally (perplexity drift under 1e-4
//! relative).

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Tokenizer;
use crate::error::{Error, Result};
use crate::model::{CausalLM, ModelConfig};
use crate::numerics::Tensor;
use crate::rng::fnv1a64;
use crate::soft_prompt::{SoftPrompt, SoftPromptMethod, TrainingMeta};

pub const FORMAT_VERSION: u32 = 1;
const MANIFEST_FILE: &str = "manifest.json";
const BLOB_FILE: &str = "tensors.bin";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub dtype: String,
    /// Byte offset into the blob.
    pub offset: u64,
    /// Byte length in the blob.
    pub len: u64,
    /// FNV-1a 64 over the tensor's blob bytes, hex.
    pub checksum: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ManifestKind {
    CausalLm {
        model_config: ModelConfig,
        tokenizer: Tokenizer,
    },
    SoftPrompt {
        method: String,
        length: usize,
        training_meta: Option<TrainingMeta>,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    #[serde(flatten)]
    pub kind: ManifestKind,
    pub tensors: Vec<TensorEntry>,
}

fn ck_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Checkpoint {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn write_checkpoint(dir: &Path, kind: ManifestKind, tensors: &[(String, &Tensor)]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut blob: Vec<u8> = Vec::new();
    let mut entries = Vec::with_capacity(tensors.len());
    for (name, t) in tensors {
        let offset = blob.len() as u64;
        let start = blob.len();
        for &v in t.data() {
            blob.extend_from_slice(&(v as f32).to_le_bytes());
        }
        let bytes = &blob[start..];
        entries.push(TensorEntry {
            name: name.clone(),
            shape: t.shape().to_vec(),
            dtype: "f32".to_string(),
            offset,
            len: bytes.len() as u64,
            checksum: format!("{:016x}", fnv1a64(bytes)),
        });
    }
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        kind,
        tensors: entries,
    };
    let mut mf = std::fs::File::create(dir.join(MANIFEST_FILE))?;
    serde_json::to_writer_pretty(&mut mf, &manifest)?;
    mf.write_all(b"\n")?;
    std::fs::write(dir.join(BLOB_FILE), &blob)?;
    Ok(())
}

fn read_checkpoint(dir: &Path) -> Result<(Manifest, Vec<(String, Tensor)>)> {
    let manifest_path = dir.join(MANIFEST_FILE);
    if !manifest_path.exists() {
        return Err(ck_err(dir, format!("missing {MANIFEST_FILE}")));
    }
    let manifest: Manifest = serde_json::from_reader(std::fs::File::open(&manifest_path)?)?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(ck_err(
            dir,
            format!(
                "unknown format version {} (this build reads {FORMAT_VERSION})",
                manifest.format_version
            ),
        ));
    }
    let mut blob = Vec::new();
    std::fs::File::open(dir.join(BLOB_FILE))?.read_to_end(&mut blob)?;

    let mut tensors = Vec::with_capacity(manifest.tensors.len());
    for entry in &manifest.tensors {
        if entry.dtype != "f32" {
            return Err(ck_err(dir, format!("tensor {}: unsupported dtype {}", entry.name, entry.dtype)));
        }
        let start = entry.offset as usize;
        let end = start + entry.len as usize;
        if end > blob.len() {
            return Err(ck_err(
                dir,
                format!("tensor {} extends past the blob ({} > {})", entry.name, end, blob.len()),
            ));
        }
        let bytes = &blob[start..end];
        let checksum = format!("{:016x}", fnv1a64(bytes));
        if checksum != entry.checksum {
            return Err(ck_err(
                dir,
                format!(
                    "tensor {}: checksum mismatch (manifest {}, blob {})",
                    entry.name, entry.checksum, checksum
                ),
            ));
        }
        let numel: usize = entry.shape.iter().product();
        if numel * 4 != bytes.len() {
            return Err(ck_err(
                dir,
                format!("tensor {}: {} bytes do not match shape {:?}", entry.name, bytes.len(), entry.shape),
            ));
        }
        let data: Vec<f64> = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        tensors.push((entry.name.clone(), Tensor::from_vec(&entry.shape, data)?));
    }
    Ok((manifest, tensors))
}

pub fn save_model(dir: impl AsRef<Path>, model: &CausalLM, tok: &Tokenizer) -> Result<()> {
    write_checkpoint(
        dir.as_ref(),
        ManifestKind::CausalLm {
            model_config: *model.config(),
            tokenizer: tok.clone(),
        },
        &model.named_params(),
    )
}

pub fn load_model(dir: impl AsRef<Path>) -> Result<(CausalLM, Tokenizer)> {
    let dir = dir.as_ref();
    let (manifest, tensors) = read_checkpoint(dir)?;
    let ManifestKind::CausalLm {
        model_config,
        tokenizer,
    } = manifest.kind
    else {
        return Err(ck_err(dir, "expected a causal-lm checkpoint"));
    };
    let model = CausalLM::from_named_params(model_config, tensors)
        .map_err(|e| ck_err(dir, e.to_string()))?;
    Ok((model, tokenizer))
}

pub fn save_soft_prompt(dir: impl AsRef<Path>, sp: &SoftPrompt) -> Result<()> {
    write_checkpoint(
        dir.as_ref(),
        ManifestKind::SoftPrompt {
            method: sp.method().name().to_string(),
            length: sp.length(),
            training_meta: sp.training_meta.clone(),
        },
        &sp.named_params(),
    )
}

pub fn load_soft_prompt(dir: impl AsRef<Path>) -> Result<SoftPrompt> {
    let dir = dir.as_ref();
    let (manifest, tensors) = read_checkpoint(dir)?;
    let ManifestKind::SoftPrompt {
        method,
        length,
        training_meta,
    } = manifest.kind
    else {
        return Err(ck_err(dir, "expected a soft-prompt checkpoint"));
    };
    let method = SoftPromptMethod::parse(&method).map_err(|e| ck_err(dir, e.to_string()))?;
    let mut sp = SoftPrompt::from_named_params(method, length, tensors)
        .map_err(|e| ck_err(dir, e.to_string()))?;
    sp.training_meta = training_meta;
    Ok(sp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;
    use crate::PromptInjection;

    fn model() -> (CausalLM, Tokenizer) {
        let tok = Tokenizer::default_charset();
        let cfg = ModelConfig {
            vocab_size: tok.vocab_size(),
            d_model: 16,
            n_layers: 1,
            n_heads: 2,
            d_ff: 32,
            max_seq_len: 64,
            seed: 3,
        };
        (CausalLM::new(cfg).unwrap(), tok)
    }

    #[test]
    fn model_round_trip_preserves_behavior_within_f32_rounding() {
        let (model, tok) = model();
        let dir = tempfile::tempdir().unwrap();
        save_model(dir.path(), &model, &tok).unwrap();
        let (loaded, tok2) = load_model(dir.path()).unwrap();
        assert_eq!(tok2.vocab_size(), tok.vocab_size());
        assert_eq!(loaded.config(), model.config());

        let tokens = tok.encode("Sender: a@x\nRecipient: b@y\n").unwrap();
        let p1 = model.perplexity(&tokens, &PromptInjection::None).unwrap();
        let p2 = loaded.perplexity(&tokens, &PromptInjection::None).unwrap();
        assert!(
            ((p1 - p2) / p1).abs() < 1e-4,
            "round-trip perplexity drift too large: {p1} vs {p2}"
        );
    }

    #[test]
    fn corrupted_blob_is_rejected_by_checksum() {
        let (model, tok) = model();
        let dir = tempfile::tempdir().unwrap();
        save_model(dir.path(), &model, &tok).unwrap();
        let blob_path = dir.path().join(BLOB_FILE);
        let mut blob = std::fs::read(&blob_path).unwrap();
        blob[8] ^= 0xff;
        std::fs::write(&blob_path, &blob).unwrap();
        let err = load_model(dir.path()).unwrap_err().to_string();
        assert!(err.contains("checksum"), "{err}");
    }

    #[test]
    fn unknown_format_version_is_rejected() {
        let (model, tok) = model();
        let dir = tempfile::tempdir().unwrap();
        save_model(dir.path(), &model, &tok).unwrap();
        let manifest_path = dir.path().join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&manifest_path)
            .unwrap()
            .replace("\"format_version\": 1", "\"format_version\": 9");
        std::fs::write(&manifest_path, text).unwrap();
        let err = load_model(dir.path()).unwrap_err().to_string();
        assert!(err.contains("format version"), "{err}");
    }

    #[test]
    fn soft_prompt_round_trip_keeps_method_and_injection_shape() {
        let (model, _) = model();
        for method in SoftPromptMethod::ALL {
            let sp = SoftPrompt::init(method, 3, model.config(), 9).unwrap();
            let dir = tempfile::tempdir().unwrap();
            save_soft_prompt(dir.path(), &sp).unwrap();
            let loaded = load_soft_prompt(dir.path()).unwrap();
            assert_eq!(loaded.method(), method);
            assert_eq!(loaded.length(), 3);
            assert_eq!(loaded.param_count(), sp.param_count());
            loaded.materialize().validate(model.config()).unwrap();
        }
    }
}
