//! Index tables mapping surface symbols to embedding rows.
//!
//! Every table reserves index 0 for a trained out-of-vocabulary entry, so a
//! failed lookup is always a valid row.  The label table seeds index 0 with
//! `dep`, which doubles as the fallback relation during tree repair.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::conllu::Sentence;

use super::model::transliterate_form;

/// Placeholder spelling for each table's reserved row.
pub const OOV: &str = "<oov>";
const OOV_CHAR: char = '\u{fffd}';

/// Symbol tables for one trained model.  Insertion order is the embedding
/// row order, so serializing the vectors reproduces the model exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "VocabularyData", into = "VocabularyData")]
pub struct Vocabulary {
    words: Vec<String>,
    /// Training-data occurrence count per word; 0 for the OOV row.
    word_freq: Vec<u32>,
    chars: Vec<char>,
    upos: Vec<String>,
    labels: Vec<String>,
    /// Empty for a mono-treebank model, which has no treebank embeddings.
    treebanks: Vec<String>,
    /// Empty unless feature-bundle embeddings are enabled.
    feat_bundles: Vec<String>,
    word_index: HashMap<String, usize>,
    char_index: HashMap<char, usize>,
    upos_index: HashMap<String, usize>,
    label_index: HashMap<String, usize>,
    tb_index: HashMap<String, usize>,
    feats_index: HashMap<String, usize>,
}

/// Serialized form: just the tables, with lookup maps rebuilt on load.
#[derive(Serialize, Deserialize)]
struct VocabularyData {
    words: Vec<String>,
    word_freq: Vec<u32>,
    chars: Vec<char>,
    upos: Vec<String>,
    labels: Vec<String>,
    treebanks: Vec<String>,
    feat_bundles: Vec<String>,
}

impl From<VocabularyData> for Vocabulary {
    fn from(data: VocabularyData) -> Self {
        let mut v = Vocabulary {
            words: data.words,
            word_freq: data.word_freq,
            chars: data.chars,
            upos: data.upos,
            labels: data.labels,
            treebanks: data.treebanks,
            feat_bundles: data.feat_bundles,
            word_index: HashMap::new(),
            char_index: HashMap::new(),
            upos_index: HashMap::new(),
            label_index: HashMap::new(),
            tb_index: HashMap::new(),
            feats_index: HashMap::new(),
        };
        v.rebuild_indexes();
        v
    }
}

impl From<Vocabulary> for VocabularyData {
    fn from(v: Vocabulary) -> Self {
        VocabularyData {
            words: v.words,
            word_freq: v.word_freq,
            chars: v.chars,
            upos: v.upos,
            labels: v.labels,
            treebanks: v.treebanks,
            feat_bundles: v.feat_bundles,
        }
    }
}

fn intern(table: &mut Vec<String>, index: &mut HashMap<String, usize>, key: &str) -> usize {
    match index.get(key) {
        Some(&i) => i,
        None => {
            let i = table.len();
            table.push(key.to_string());
            index.insert(key.to_string(), i);
            i
        }
    }
}

impl Vocabulary {
    /// Collects symbol tables from training data.  `banks` pairs each
    /// treebank id with its training sentences; treebank embeddings are set
    /// up only when there is more than one treebank.  Word and character
    /// lookups go through `translit` so that training and decoding agree on
    /// the keys.
    pub fn build(
        banks: &[(String, &[Sentence])],
        translit: &BTreeMap<char, char>,
        with_feats: bool,
    ) -> Self {
        let mut v = Vocabulary {
            words: vec![OOV.to_string()],
            word_freq: vec![0],
            chars: vec![OOV_CHAR],
            upos: vec![OOV.to_string()],
            labels: vec!["dep".to_string()],
            treebanks: Vec::new(),
            feat_bundles: Vec::new(),
            word_index: HashMap::new(),
            char_index: HashMap::new(),
            upos_index: HashMap::new(),
            label_index: HashMap::new(),
            tb_index: HashMap::new(),
            feats_index: HashMap::new(),
        };
        v.rebuild_indexes();
        if banks.len() > 1 {
            v.treebanks.push(OOV.to_string());
            for (id, _) in banks {
                intern(&mut v.treebanks, &mut v.tb_index, id);
            }
            v.tb_index.insert(OOV.to_string(), 0);
        }
        if with_feats {
            v.feat_bundles.push(OOV.to_string());
            v.feats_index.insert(OOV.to_string(), 0);
        }
        for (_, sentences) in banks {
            for sentence in *sentences {
                for token in &sentence.tokens {
                    let key = transliterate_form(&token.form, translit);
                    let wi = intern(&mut v.words, &mut v.word_index, &key);
                    if wi == v.word_freq.len() {
                        v.word_freq.push(0);
                    }
                    v.word_freq[wi] += 1;
                    for c in key.chars() {
                        if !v.char_index.contains_key(&c) {
                            v.char_index.insert(c, v.chars.len());
                            v.chars.push(c);
                        }
                    }
                    intern(&mut v.upos, &mut v.upos_index, &token.upos);
                    if let Some(deprel) = &token.deprel {
                        intern(&mut v.labels, &mut v.label_index, deprel);
                    }
                    if with_feats {
                        intern(&mut v.feat_bundles, &mut v.feats_index, &token.feats_string());
                    }
                }
            }
        }
        v
    }

    fn rebuild_indexes(&mut self) {
        let pairs = |table: &[String]| {
            table
                .iter()
                .enumerate()
                .map(|(i, s)| (s.clone(), i))
                .collect::<HashMap<_, _>>()
        };
        self.word_index = pairs(&self.words);
        self.upos_index = pairs(&self.upos);
        self.label_index = pairs(&self.labels);
        self.tb_index = pairs(&self.treebanks);
        self.feats_index = pairs(&self.feat_bundles);
        self.char_index = self
            .chars
            .iter()
            .enumerate()
            .map(|(i, &c)| (c, i))
            .collect();
    }

    /// Row index for an already-transliterated word key; 0 when unknown.
    pub fn word_index(&self, key: &str) -> usize {
        self.word_index.get(key).copied().unwrap_or(0)
    }

    /// Training frequency of a word row; the OOV row reports 0.
    pub fn word_freq(&self, index: usize) -> u32 {
        self.word_freq[index]
    }

    pub fn char_index(&self, c: char) -> usize {
        self.char_index.get(&c).copied().unwrap_or(0)
    }

    pub fn upos_index(&self, upos: &str) -> usize {
        self.upos_index.get(upos).copied().unwrap_or(0)
    }

    /// Exact label lookup; training data must not contain unseen labels.
    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.label_index.get(label).copied()
    }

    pub fn label_name(&self, index: usize) -> &str {
        &self.labels[index]
    }

    pub fn treebank_index(&self, id: &str) -> Option<usize> {
        self.tb_index.get(id).copied()
    }

    /// Treebank rows in embedding order, starting with the reserved row.
    pub fn treebank_names(&self) -> &[String] {
        &self.treebanks
    }

    pub fn feats_bundle_index(&self, bundle: &str) -> usize {
        self.feats_index.get(bundle).copied().unwrap_or(0)
    }

    /// Whether this vocabulary was built over several treebanks, which is
    /// what switches treebank embeddings on.
    pub fn is_multi(&self) -> bool {
        !self.treebanks.is_empty()
    }

    pub fn n_words(&self) -> usize {
        self.words.len()
    }

    pub fn word_name(&self, index: usize) -> &str {
        &self.words[index]
    }

    pub fn n_chars(&self) -> usize {
        self.chars.len()
    }

    pub fn n_upos(&self) -> usize {
        self.upos.len()
    }

    pub fn n_labels(&self) -> usize {
        self.labels.len()
    }

    pub fn n_treebanks(&self) -> usize {
        self.treebanks.len()
    }

    pub fn n_feat_bundles(&self) -> usize {
        self.feat_bundles.len()
    }
}
