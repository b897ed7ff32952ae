//! Scoring of parser output against a reference treebank.
//!
//! Both sides may tokenize the raw text differently, so every metric is
//! computed over a character-span alignment rather than token indices: each
//! token is mapped to the half-open span of code points it covers in the
//! whitespace-free concatenation of all word forms, and a system token is
//! aligned to a reference token exactly when their spans are identical.
//! Precision denominators come from the system side, recall denominators from
//! the reference side, and F1 is their harmonic mean.
//!
//! The metrics:
//!
//! * `Words` / `Sentences`: segmentation quality, span identity only.
//! * `UPOS` / `UFeats`: aligned tokens whose tag (or canonicalized feature
//!   set) matches.
//! * `LAS`: aligned tokens whose head token aligns to the reference head and
//!   whose relation matches after stripping any `:`-subtype.
//! * `MLAS`: LAS restricted to content words, additionally requiring the
//!   UPOS, a fixed subset of morphological features, and the token's
//!   function-word dependents to be correct.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::conllu::{sort_feats, Sentence};

/// Dependency relations that attach function words rather than content words.
/// Tokens attached by one of these (or by `punct`) are excluded from the MLAS
/// denominators; tokens attached by one of these must themselves be correct
/// for their head to score under MLAS.
const FUNCTIONAL_DEPRELS: [&str; 7] = ["aux", "cop", "mark", "det", "clf", "case", "cc"];

/// Morphological attributes that participate in MLAS; anything else in the
/// FEATS column is ignored by that metric.
const MLAS_FEATURES: [&str; 22] = [
    "PronType", "NumType", "Poss", "Reflex", "Foreign", "Abbr", "Gender", "Animacy", "Number",
    "Case", "Definite", "Degree", "VerbForm", "Mood", "Tense", "Aspect", "Voice", "Evident",
    "Polarity", "Person", "Polite", "Clusivity",
];

#[derive(Debug, Error)]
pub enum EvalError {
    /// The two sides do not contain the same characters once whitespace is
    /// removed, so no span alignment exists.
    #[error(
        "system and reference text differ at character {position}: \
         system has {system:?}, reference has {reference:?}"
    )]
    TextMismatch {
        position: usize,
        system: String,
        reference: String,
    },
}

/// One token flattened into document coordinates.
struct FlatToken {
    /// Code-point span in the concatenated text.
    start: usize,
    end: usize,
    /// Span of this token's head, `None` for the root.  Missing annotation is
    /// kept distinct so it can never compare equal to anything.
    head_span: Option<Option<(usize, usize)>>,
    /// Relation with any `:`-subtype removed; empty when unannotated.
    deprel: String,
    upos: String,
    /// Full feature set in canonical order, as one string.
    feats: String,
    /// MLAS feature subset in canonical order.
    feats_selected: String,
    /// Flat indices of dependents attached by a functional relation.
    functional_children: Vec<usize>,
}

impl FlatToken {
    fn is_functional(&self) -> bool {
        FUNCTIONAL_DEPRELS.contains(&self.deprel.as_str())
    }

    /// Content words carry the MLAS denominators: everything except function
    /// words and punctuation.
    fn is_content(&self) -> bool {
        !self.is_functional() && self.deprel != "punct"
    }
}

/// One side (system or reference) in flattened form.
struct FlatSide {
    tokens: Vec<FlatToken>,
    /// Per-sentence `(start, end)` over the same coordinates.
    sentence_spans: Vec<(usize, usize)>,
    /// Span of every token, for identity lookups from the other side.
    by_span: HashMap<(usize, usize), usize>,
}

fn strip_subtype(deprel: &str) -> &str {
    deprel.split(':').next().unwrap_or(deprel)
}

fn canonical_feats(feats: &[(String, String)]) -> String {
    let mut sorted = feats.to_vec();
    sort_feats(&mut sorted);
    let parts: Vec<String> = sorted.iter().map(|(a, v)| format!("{a}={v}")).collect();
    parts.join("|")
}

fn selected_feats(feats: &[(String, String)]) -> String {
    let kept: Vec<(String, String)> = feats
        .iter()
        .filter(|(attr, _)| MLAS_FEATURES.contains(&attr.as_str()))
        .cloned()
        .collect();
    canonical_feats(&kept)
}

fn flatten(sentences: &[Sentence]) -> FlatSide {
    let mut tokens = Vec::new();
    let mut sentence_spans = Vec::new();
    let mut offset = 0usize;
    for sentence in sentences {
        let base = tokens.len();
        let sentence_start = offset;
        // First pass: spans only, so head spans can refer forward.
        let mut spans = Vec::with_capacity(sentence.tokens.len());
        for token in &sentence.tokens {
            let len = token.form.chars().count();
            spans.push((offset, offset + len));
            offset += len;
        }
        for (i, token) in sentence.tokens.iter().enumerate() {
            let head_span = token.head.map(|h| if h == 0 { None } else { Some(spans[h - 1]) });
            tokens.push(FlatToken {
                start: spans[i].0,
                end: spans[i].1,
                head_span,
                deprel: token
                    .deprel
                    .as_deref()
                    .map(strip_subtype)
                    .unwrap_or("")
                    .to_string(),
                upos: token.upos.clone(),
                feats: canonical_feats(&token.feats),
                feats_selected: selected_feats(&token.feats),
                functional_children: Vec::new(),
            });
        }
        for (i, token) in sentence.tokens.iter().enumerate() {
            if let Some(h) = token.head {
                if h != 0 && tokens[base + i].is_functional() {
                    tokens[base + h - 1].functional_children.push(base + i);
                }
            }
        }
        sentence_spans.push((sentence_start, offset));
    }
    let by_span = tokens
        .iter()
        .enumerate()
        .map(|(i, t)| ((t.start, t.end), i))
        .collect();
    FlatSide {
        tokens,
        sentence_spans,
        by_span,
    }
}

/// Precision, recall, and F1 as percentages in `[0, 100]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl MetricScore {
    fn from_counts(correct: usize, system: usize, reference: usize) -> Self {
        let precision = if system == 0 {
            0.0
        } else {
            100.0 * correct as f64 / system as f64
        };
        let recall = if reference == 0 {
            0.0
        } else {
            100.0 * correct as f64 / reference as f64
        };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        MetricScore {
            precision,
            recall,
            f1,
        }
    }
}

/// Span alignment between a system parse and its reference, from which all
/// metrics are derived.
pub struct TokenAlignment {
    system: FlatSide,
    reference: FlatSide,
    /// `(system index, reference index)` for every identical span.
    pairs: Vec<(usize, usize)>,
}

/// Builds the character-span alignment.  Fails when the two sides disagree on
/// the underlying text, because then spans from different sides are not
/// comparable.
pub fn align_tokens(system: &[Sentence], reference: &[Sentence]) -> Result<TokenAlignment, EvalError> {
    let sys_text: Vec<char> = system
        .iter()
        .flat_map(|s| s.tokens.iter())
        .flat_map(|t| t.form.chars())
        .filter(|c| !c.is_whitespace())
        .collect();
    let ref_text: Vec<char> = reference
        .iter()
        .flat_map(|s| s.tokens.iter())
        .flat_map(|t| t.form.chars())
        .filter(|c| !c.is_whitespace())
        .collect();
    if sys_text != ref_text {
        let position = sys_text
            .iter()
            .zip(&ref_text)
            .position(|(a, b)| a != b)
            .unwrap_or_else(|| sys_text.len().min(ref_text.len()));
        return Err(EvalError::TextMismatch {
            position,
            system: sys_text.iter().skip(position).take(20).collect(),
            reference: ref_text.iter().skip(position).take(20).collect(),
        });
    }

    let system = flatten(system);
    let reference = flatten(reference);
    let mut pairs = Vec::new();
    for (i, token) in system.tokens.iter().enumerate() {
        if let Some(&j) = reference.by_span.get(&(token.start, token.end)) {
            pairs.push((i, j));
        }
    }
    Ok(TokenAlignment {
        system,
        reference,
        pairs,
    })
}

impl TokenAlignment {
    fn las_correct(&self, i: usize, j: usize) -> bool {
        let sys = &self.system.tokens[i];
        let gold = &self.reference.tokens[j];
        sys.head_span.is_some()
            && sys.head_span == gold.head_span
            && sys.deprel == gold.deprel
    }

    /// Labeled attachment: head aligned to the reference head and relation
    /// equal after subtype stripping.
    pub fn score_las(&self) -> MetricScore {
        let correct = self
            .pairs
            .iter()
            .filter(|&&(i, j)| self.las_correct(i, j))
            .count();
        MetricScore::from_counts(correct, self.system.tokens.len(), self.reference.tokens.len())
    }

    fn mlas_correct(&self, i: usize, j: usize) -> bool {
        let sys = &self.system.tokens[i];
        let gold = &self.reference.tokens[j];
        if !self.las_correct(i, j) || sys.upos != gold.upos || sys.feats_selected != gold.feats_selected
        {
            return false;
        }
        // The function words this token governs must match one-to-one: every
        // system child aligns to a reference child of the aligned head with
        // the same relation, tag, and selected features.
        if sys.functional_children.len() != gold.functional_children.len() {
            return false;
        }
        sys.functional_children.iter().all(|&c| {
            let child = &self.system.tokens[c];
            self.reference
                .by_span
                .get(&(child.start, child.end))
                .is_some_and(|&rc| {
                    let gold_child = &self.reference.tokens[rc];
                    gold.functional_children.contains(&rc)
                        && child.deprel == gold_child.deprel
                        && child.upos == gold_child.upos
                        && child.feats_selected == gold_child.feats_selected
                })
        })
    }

    /// Morphology-aware LAS over content words only.
    pub fn score_mlas(&self) -> MetricScore {
        let system = self.system.tokens.iter().filter(|t| t.is_content()).count();
        let reference = self
            .reference
            .tokens
            .iter()
            .filter(|t| t.is_content())
            .count();
        let correct = self
            .pairs
            .iter()
            .filter(|&&(i, j)| {
                self.system.tokens[i].is_content()
                    && self.reference.tokens[j].is_content()
                    && self.mlas_correct(i, j)
            })
            .count();
        MetricScore::from_counts(correct, system, reference)
    }

    /// Tag accuracy over aligned tokens: UPOS and the full canonical feature
    /// set.
    pub fn score_tags(&self) -> (MetricScore, MetricScore) {
        let upos = self
            .pairs
            .iter()
            .filter(|&&(i, j)| self.system.tokens[i].upos == self.reference.tokens[j].upos)
            .count();
        let feats = self
            .pairs
            .iter()
            .filter(|&&(i, j)| self.system.tokens[i].feats == self.reference.tokens[j].feats)
            .count();
        let system = self.system.tokens.len();
        let reference = self.reference.tokens.len();
        (
            MetricScore::from_counts(upos, system, reference),
            MetricScore::from_counts(feats, system, reference),
        )
    }

    /// Segmentation quality: word spans and sentence spans (first to last
    /// character of the sentence) that appear identically on both sides.
    pub fn score_segmentation(&self) -> (MetricScore, MetricScore) {
        let words = MetricScore::from_counts(
            self.pairs.len(),
            self.system.tokens.len(),
            self.reference.tokens.len(),
        );
        let reference_sentences: std::collections::HashSet<(usize, usize)> =
            self.reference.sentence_spans.iter().copied().collect();
        let sentence_correct = self
            .system
            .sentence_spans
            .iter()
            .filter(|s| reference_sentences.contains(s))
            .count();
        let sentences = MetricScore::from_counts(
            sentence_correct,
            self.system.sentence_spans.len(),
            self.reference.sentence_spans.len(),
        );
        (words, sentences)
    }
}

/// All metrics for one system/reference pair, in reporting order.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub las: MetricScore,
    pub mlas: MetricScore,
    pub sentences: MetricScore,
    pub words: MetricScore,
    pub upos: MetricScore,
    pub ufeats: MetricScore,
}

impl EvalReport {
    /// Rows in the fixed reporting order.
    pub fn rows(&self) -> [(&'static str, MetricScore); 6] {
        [
            ("LAS", self.las),
            ("MLAS", self.mlas),
            ("Sentences", self.sentences),
            ("Words", self.words),
            ("UPOS", self.upos),
            ("UFeats", self.ufeats),
        ]
    }

    /// Line-oriented `metric.field = value` form for scripted consumers.
    pub fn to_key_values(&self) -> String {
        let mut out = String::new();
        for (name, score) in self.rows() {
            let key = name.to_lowercase();
            out.push_str(&format!("{key}.precision = {:.2}\n", score.precision));
            out.push_str(&format!("{key}.recall = {:.2}\n", score.recall));
            out.push_str(&format!("{key}.f1 = {:.2}\n", score.f1));
        }
        out
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<10} | {:>9} | {:>9} | {:>9}", "Metric", "Precision", "Recall", "F1")?;
        writeln!(f, "{:-<10}-+-{:->9}-+-{:->9}-+-{:->9}", "", "", "", "")?;
        for (name, score) in self.rows() {
            writeln!(
                f,
                "{name:<10} | {:>9.2} | {:>9.2} | {:>9.2}",
                score.precision, score.recall, score.f1
            )?;
        }
        Ok(())
    }
}

/// Scores a system parse against its reference and collects every metric.
pub fn evaluate(system: &[Sentence], reference: &[Sentence]) -> Result<EvalReport, EvalError> {
    let alignment = align_tokens(system, reference)?;
    let (words, sentences) = alignment.score_segmentation();
    let (upos, ufeats) = alignment.score_tags();
    Ok(EvalReport {
        las: alignment.score_las(),
        mlas: alignment.score_mlas(),
        sentences,
        words,
        upos,
        ufeats,
    })
}
