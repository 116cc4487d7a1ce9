//! JSON checkpoints: config, vocabulary and named flat parameter tensors.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelConfig, Params, SpanModel, Vocab};

pub const FORMAT: &str = "spancorr-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    config: ModelConfig,
    vocab: Vec<String>,
    params: BTreeMap<String, Vec<f64>>,
}

pub fn to_json(model: &SpanModel) -> Result<String> {
    let ck = Checkpoint {
        format: FORMAT.into(),
        version: VERSION,
        config: model.config.clone(),
        vocab: model.vocab.tokens().to_vec(),
        params: model.params.named_slices().into_iter().map(|(n, s)| (n, s.to_vec())).collect(),
    };
    Ok(serde_json::to_string(&ck)?)
}

pub fn from_json(text: &str) -> Result<SpanModel> {
    let ck: Checkpoint = serde_json::from_str(text)?;
    if ck.format != FORMAT || ck.version != VERSION {
        return Err(Error::data(format!(
            "unsupported checkpoint {} v{}",
            ck.format, ck.version
        )));
    }
    let mut model = SpanModel::new(ck.config, Vocab::from_tokens(ck.vocab))?;
    let names: Vec<String> = model.params.named_slices().into_iter().map(|(n, _)| n).collect();
    let mut params: Params = model.params.clone();
    for (name, dst) in names.iter().zip(params.slices_mut()) {
        let src = ck
            .params
            .get(name)
            .ok_or_else(|| Error::data(format!("checkpoint missing tensor {name}")))?;
        if src.len() != dst.len() {
            return Err(Error::data(format!(
                "tensor {name}: expected {} values, found {}",
                dst.len(),
                src.len()
            )));
        }
        dst.copy_from_slice(src);
    }
    if ck.params.len() != names.len() {
        return Err(Error::data("checkpoint has unexpected tensors"));
    }
    model.params = params;
    Ok(model)
}
