//! Model persistence.  A model file is one JSON document holding the
//! hyperparameters, vocabularies, proxy and transliteration maps, pretrained
//! tables, and every parameter tensor in registration order.  All maps are
//! ordered, so saving the same model twice produces identical bytes.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Hyperparams, Model, ParserError, PretrainedTable, Vocabulary};

const FORMAT: &str = "udparse-model/1";

#[derive(Serialize, Deserialize)]
struct SerializedParam {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
    trainable: bool,
}

/// The on-disk form of a trained model.
#[derive(Serialize, Deserialize)]
pub struct ModelFile {
    format: String,
    hyper: Hyperparams,
    vocab: Vocabulary,
    proxies: BTreeMap<String, String>,
    translit: Vec<(char, char)>,
    pretrained: Vec<(String, PretrainedTable)>,
    params: Vec<SerializedParam>,
}

impl ModelFile {
    pub fn from_model(model: &Model) -> ModelFile {
        ModelFile {
            format: FORMAT.to_string(),
            hyper: model.hyper.clone(),
            vocab: model.vocab.clone(),
            proxies: model.proxies.clone(),
            translit: model.translit.iter().map(|(&a, &b)| (a, b)).collect(),
            pretrained: model.pretrained.clone(),
            params: model
                .params
                .iter()
                .map(|p| SerializedParam {
                    name: p.name.clone(),
                    shape: p.value.shape.clone(),
                    data: p.value.data.clone(),
                    trainable: p.trainable,
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serialization cannot fail")
    }

    pub fn save(model: &Model, path: &Path) -> Result<(), ParserError> {
        std::fs::write(path, Self::from_model(model).to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Model, ParserError> {
        let text = std::fs::read_to_string(path)?;
        let file: ModelFile = serde_json::from_str(&text).map_err(|e| ParserError::BadModel {
            message: e.to_string(),
        })?;
        file.restore()
    }

    /// Rebuilds the parameter layout from the stored vocabulary sizes, then
    /// overwrites every tensor with the stored values.
    pub fn restore(self) -> Result<Model, ParserError> {
        if self.format != FORMAT {
            return Err(ParserError::BadModel {
                message: format!("unsupported format {:?}, expected {FORMAT:?}", self.format),
            });
        }
        let translit: BTreeMap<char, char> = self.translit.into_iter().collect();
        let mut model = Model::build(
            &self.hyper,
            self.vocab,
            self.proxies,
            translit,
            self.pretrained,
            0,
        )?;
        if model.params.len() != self.params.len() {
            return Err(ParserError::BadModel {
                message: format!(
                    "expected {} parameters for this configuration, file has {}",
                    model.params.len(),
                    self.params.len()
                ),
            });
        }
        for stored in self.params {
            let id = model
                .params
                .id_of(&stored.name)
                .ok_or_else(|| ParserError::BadModel {
                    message: format!("unexpected parameter {:?}", stored.name),
                })?;
            let param = model.params.get_mut(id);
            if param.value.shape != stored.shape {
                return Err(ParserError::BadModel {
                    message: format!(
                        "parameter {:?} has shape {:?}, file says {:?}",
                        stored.name, param.value.shape, stored.shape
                    ),
                });
            }
            if stored.data.len() != param.value.data.len() {
                return Err(ParserError::BadModel {
                    message: format!("parameter {:?} has a truncated tensor", stored.name),
                });
            }
            param.value.data = stored.data;
            param.trainable = stored.trainable;
        }
        Ok(model)
    }
}
