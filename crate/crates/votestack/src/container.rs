//! Binary model container.
//!
//! ```text
//! magic "VSTKMODL" | version u32 LE | header length u64 LE | JSON header |
//! parameter values as f64 LE, tensor by tensor in header order
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use votestack_core::models::ModelHeader;
use votestack_core::TrainedClassifier;

use crate::error::{Error, Result};
use crate::formats::write_file;

pub const MAGIC: &[u8; 8] = b"VSTKMODL";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ContainerHeader {
    config_hash: String,
    model: ModelHeader,
}

pub fn encode_model(classifier: &TrainedClassifier, config_hash: &str) -> Vec<u8> {
    let header = ContainerHeader {
        config_hash: config_hash.to_string(),
        model: classifier.header(),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let params = classifier.parameters();
    let floats: usize = params.iter().map(|t| t.len()).sum();
    let mut out = Vec::with_capacity(20 + json.len() + 8 * floats);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for t in params {
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

/// A decoded model and the config hash it was trained under.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedModel {
    pub classifier: TrainedClassifier,
    pub config_hash: String,
}

fn take<'a>(bytes: &mut &'a [u8], n: usize, what: &str) -> std::result::Result<&'a [u8], String> {
    if bytes.len() < n {
        return Err(format!("truncated {what}"));
    }
    let (head, rest) = bytes.split_at(n);
    *bytes = rest;
    Ok(head)
}

pub fn decode_model(mut bytes: &[u8]) -> std::result::Result<LoadedModel, String> {
    let magic = take(&mut bytes, 8, "magic")?;
    if magic != MAGIC {
        return Err("not a model file".into());
    }
    let version = u32::from_le_bytes(take(&mut bytes, 4, "version")?.try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(format!(
            "unsupported container version {version}, expected {VERSION}"
        ));
    }
    let len = u64::from_le_bytes(
        take(&mut bytes, 8, "header length")?
            .try_into()
            .expect("8 bytes"),
    );
    let len = usize::try_from(len).map_err(|_| "header length overflows".to_string())?;
    let header: ContainerHeader = serde_json::from_slice(take(&mut bytes, len, "header")?)
        .map_err(|e| format!("corrupted header: {e}"))?;
    let shapes = header
        .model
        .neural
        .as_ref()
        .map(|n| n.shapes.clone())
        .unwrap_or_default();
    let mut values = Vec::with_capacity(shapes.len());
    for shape in &shapes {
        let n: usize = shape.iter().product();
        let raw = take(&mut bytes, 8 * n, "parameters")?;
        values.push(
            raw.chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect(),
        );
    }
    if !bytes.is_empty() {
        return Err(format!("{} unexpected trailing bytes", bytes.len()));
    }
    let classifier =
        TrainedClassifier::from_parts(header.model, values).map_err(|e| e.to_string())?;
    Ok(LoadedModel {
        classifier,
        config_hash: header.config_hash,
    })
}

pub fn save_model(path: &Path, classifier: &TrainedClassifier, config_hash: &str) -> Result<()> {
    write_file(path, &encode_model(classifier, config_hash))
}

pub fn load_model(path: &Path) -> Result<LoadedModel> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes).map_err(|m| Error::format(path, None, m))
}
