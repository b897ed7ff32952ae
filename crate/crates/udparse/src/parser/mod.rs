//! The parser proper: input composition, scoring, greedy decoding, and
//! multi-treebank training.
//!
//! A token enters the network as the concatenation of a word embedding, a
//! UPOS embedding, a character-BiLSTM summary of its form, and (in
//! multi-treebank models) a treebank embedding.  A stacked word-level BiLSTM
//! turns these into contextual vectors; two perceptrons score transitions and
//! arc labels over a five-token feature window.  Training follows a
//! static-dynamic oracle with a hinge loss, optional error exploration, and
//! per-epoch resampling of large treebanks; decoding is a plain greedy argmax
//! over legal transitions.
//!
//! Submodules:
//!
//! * [`vocab`] — index tables with a reserved out-of-vocabulary entry;
//! * [`pretrained`] — word2vec-text embedding tables;
//! * [`model`] — parameters, composition, scoring, [`Model::parse_sentence`];
//! * [`train`] — [`train_multi`], [`select_epoch`], and the oracle step;
//! * [`checkpoint`] — model (de)serialization;
//! * [`manifest`] — the line-oriented training manifest.

mod checkpoint;
mod manifest;
mod model;
mod pretrained;
mod train;
mod vocab;

pub use checkpoint::ModelFile;
pub use manifest::{load_transliteration, Manifest, ManifestTreebank};
pub use model::{transliterate_form, Model};
pub use pretrained::{load_pretrained, PretrainedTable};
pub use train::{select_epoch, train_and_select, train_multi, Checkpoint, TreebankData};
pub use vocab::Vocabulary;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::neural::NeuralError;

/// Network and training-schedule settings.  The defaults are the
/// configuration every experiment in this crate starts from; tests that need
/// to run fast shrink the dimensions explicitly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub char_emb_dim: usize,
    pub char_bilstm_layers: usize,
    /// Per direction; the character summary is twice this.
    pub char_hidden_dim: usize,
    /// Ignored (overridden) when pretrained embeddings are supplied.
    pub word_emb_dim: usize,
    pub pos_emb_dim: usize,
    pub tb_emb_dim: usize,
    pub word_bilstm_layers: usize,
    /// Per direction; contextual vectors are twice this.
    pub word_hidden_dim: usize,
    pub mlp_hidden_dim: usize,
    /// Elementwise dropout on the word embedding during training.
    pub word_dropout: f64,
    /// A word of training frequency f is replaced by the OOV vector with
    /// probability alpha / (alpha + f).
    pub alpha_oov: f64,
    /// Elementwise dropout on the character summary during training.
    pub char_dropout: f64,
    /// Probability of following a higher-scoring wrong transition.
    pub p_agg: f64,
    pub epochs: usize,
    /// Per-treebank, per-epoch sample size.
    pub sentence_cap: usize,
    /// Optional morphological-feature-bundle embedding; 0 disables it.
    pub feats_emb_dim: usize,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            char_emb_dim: 500,
            char_bilstm_layers: 1,
            char_hidden_dim: 100,
            word_emb_dim: 100,
            pos_emb_dim: 20,
            tb_emb_dim: 12,
            word_bilstm_layers: 2,
            word_hidden_dim: 250,
            mlp_hidden_dim: 100,
            word_dropout: 0.33,
            alpha_oov: 0.25,
            char_dropout: 0.33,
            p_agg: 0.1,
            epochs: 30,
            sentence_cap: 15_000,
            feats_emb_dim: 0,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<(), ParserError> {
        let dims = [
            ("char_emb_dim", self.char_emb_dim),
            ("char_bilstm_layers", self.char_bilstm_layers),
            ("char_hidden_dim", self.char_hidden_dim),
            ("word_emb_dim", self.word_emb_dim),
            ("pos_emb_dim", self.pos_emb_dim),
            ("tb_emb_dim", self.tb_emb_dim),
            ("word_bilstm_layers", self.word_bilstm_layers),
            ("word_hidden_dim", self.word_hidden_dim),
            ("mlp_hidden_dim", self.mlp_hidden_dim),
            ("epochs", self.epochs),
            ("sentence_cap", self.sentence_cap),
        ];
        for (name, value) in dims {
            if value == 0 {
                return Err(ParserError::InvalidHyper {
                    message: format!("{name} must be positive"),
                });
            }
        }
        let probs = [
            ("word_dropout", self.word_dropout),
            ("alpha_oov", self.alpha_oov),
            ("char_dropout", self.char_dropout),
            ("p_agg", self.p_agg),
        ];
        for (name, value) in probs {
            if !(0.0..=1.0).contains(&value) || !value.is_finite() {
                return Err(ParserError::InvalidHyper {
                    message: format!("{name} must lie in [0, 1], got {value}"),
                });
            }
        }
        if self.word_dropout >= 1.0 || self.char_dropout >= 1.0 {
            return Err(ParserError::InvalidHyper {
                message: "dropout of 1.0 would zero the input".to_string(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum ParserError {
    #[error("invalid hyperparameter: {message}")]
    InvalidHyper { message: String },
    #[error("treebank {id:?} has no training sentences")]
    EmptyTreebank { id: String },
    #[error("treebank {id:?} appears twice")]
    DuplicateTreebank { id: String },
    #[error("treebank {id:?}, sentence {sentence}: {message}")]
    BadTraining {
        id: String,
        sentence: usize,
        message: String,
    },
    #[error("no treebanks supplied")]
    NoTreebanks,
    #[error("unknown treebank {id:?} and no proxy mapping for it")]
    UnknownTreebank { id: String },
    #[error("a multi-treebank model needs an explicit treebank id per input")]
    MissingTreebank,
    #[error("embedding file {path}: {message}")]
    BadEmbeddings { path: String, message: String },
    #[error("pretrained tables disagree on dimension: {left} vs {right}")]
    EmbeddingDimMismatch { left: usize, right: usize },
    #[error("manifest line {line}: {message}")]
    BadManifest { line: usize, message: String },
    #[error("model file: {message}")]
    BadModel { message: String },
    #[error("gold tree rejected: {0}")]
    BadGold(#[from] crate::transitions::GoldTreeError),
    #[error(transparent)]
    Eval(#[from] crate::eval::EvalError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Conllu(#[from] crate::conllu::ConlluError),
}
