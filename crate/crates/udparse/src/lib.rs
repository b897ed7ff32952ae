//! A transition-based dependency parsing toolkit.
//!
//! The crate covers the full pipeline around a greedy arc-hybrid/swap parser
//! with BiLSTM features:
//!
//! * [`conllu`] — reading and writing CoNLL-U treebanks;
//! * [`neural`] — a minimal reverse-mode autodiff core (tape, LSTM, MLP,
//!   Adam, gradient checking);
//! * [`transitions`] — the arc-hybrid transition system with swap and its
//!   static-dynamic oracle;
//! * [`parser`] — feature extraction, training (including multi-treebank
//!   training with treebank embeddings), and greedy decoding;
//! * [`segment`] — trie-based maximum matching and Gale-Church sentence
//!   alignment with boundary voting;
//! * [`cluster`] — Ward clustering of treebank embeddings;
//! * [`eval`] — CoNLL-style evaluation (LAS, MLAS, tagging and segmentation
//!   scores);
//! * [`synth`] — deterministic synthetic treebank generation for tests and
//!   experiments;
//! * [`cli`] — the `udparse` command-line front end.

pub mod cli;
pub mod cluster;
pub mod conllu;
pub mod eval;
pub mod neural;
pub mod parser;
pub mod segment;
pub mod synth;
pub mod transitions;

// Compile-checks for the guide in book/: rustdoc runs every fenced Rust
// block in the included chapters as a doctest, so the book cannot drift from
// the API.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/conllu.md")]
    mod conllu {}
    #[doc = include_str!("../../../book/src/autodiff.md")]
    mod autodiff {}
    #[doc = include_str!("../../../book/src/transitions.md")]
    mod transitions {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/segmentation.md")]
    mod segmentation {}
    #[doc = include_str!("../../../book/src/clustering.md")]
    mod clustering {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
