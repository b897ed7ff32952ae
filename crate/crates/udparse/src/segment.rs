//! Zero-resource segmentation: trie maximum matching, length-based sentence
//! alignment, and cross-corpus boundary voting.
//!
//! [`max_match`] segments unspaced text against a lexicon trie, emitting a
//! single code point wherever the lexicon has no match, so segmentation is
//! lossless. [`gale_church_align`] aligns two sides of a parallel text using
//! sentence lengths alone, and [`vote_boundaries`] reconciles the sentence
//! boundaries proposed by several parallel corpora.

use std::collections::HashMap;
use std::fmt;
use std::ops::Range;
use std::path::Path;

use thiserror::Error;

/// Errors from the alignment routines.
#[derive(Debug, Error)]
pub enum SegmentError {
    /// A sentence on one side has no characters; the length model needs
    /// positive lengths.
    #[error("{side} sentence {index} has zero length")]
    EmptySentence {
        /// "source" or "target".
        side: &'static str,
        /// Index of the offending sentence.
        index: usize,
    },
    /// The permitted bead-kind set is empty.
    #[error("no bead kinds permitted")]
    NoKinds,
    /// No monotone bead sequence covers both sides, e.g. one side is empty
    /// while insertion/deletion beads are disabled.
    #[error("no bead sequence covers both sides with the permitted kinds")]
    Infeasible,
}

#[derive(Debug, Default)]
struct TrieNode {
    children: HashMap<char, usize>,
    terminal: bool,
}

/// Immutable prefix tree over code points.
///
/// Built once with [`build_trie`] and then shared freely; lookups never
/// mutate.
#[derive(Debug)]
pub struct TrieLexicon {
    nodes: Vec<TrieNode>,
    entries: usize,
}

impl TrieLexicon {
    /// Number of distinct words inserted.
    pub fn len(&self) -> usize {
        self.entries
    }

    /// Whether the lexicon holds no words.
    pub fn is_empty(&self) -> bool {
        self.entries == 0
    }

    /// Whether `word` was inserted as a full entry.
    pub fn contains(&self, word: &str) -> bool {
        let mut node = 0;
        for ch in word.chars() {
            match self.nodes[node].children.get(&ch) {
                Some(&next) => node = next,
                None => return false,
            }
        }
        self.nodes[node].terminal
    }

    /// Length in code points of the longest entry that prefixes `chars`.
    pub fn longest_match(&self, chars: &[char]) -> Option<usize> {
        let mut node = 0;
        let mut best = None;
        for (i, ch) in chars.iter().enumerate() {
            match self.nodes[node].children.get(ch) {
                Some(&next) => {
                    node = next;
                    if self.nodes[node].terminal {
                        best = Some(i + 1);
                    }
                }
                None => break,
            }
        }
        best
    }
}

/// Builds a lexicon trie from a word list.
///
/// Duplicates collapse into a single entry; empty words are skipped with a
/// warning.
pub fn build_trie<S: AsRef<str>>(words: &[S]) -> TrieLexicon {
    let mut lex = TrieLexicon { nodes: vec![TrieNode::default()], entries: 0 };
    for word in words {
        let word = word.as_ref();
        if word.is_empty() {
            log::warn!("skipping empty lexicon entry");
            continue;
        }
        let mut node = 0;
        for ch in word.chars() {
            node = match lex.nodes[node].children.get(&ch).copied() {
                Some(next) => next,
                None => {
                    lex.nodes.push(TrieNode::default());
                    let next = lex.nodes.len() - 1;
                    lex.nodes[node].children.insert(ch, next);
                    next
                }
            };
        }
        if !lex.nodes[node].terminal {
            lex.nodes[node].terminal = true;
            lex.entries += 1;
        }
    }
    lex
}

/// Reads a lexicon file with one word per line (UTF-8, blank lines ignored).
pub fn load_lexicon(path: &Path) -> std::io::Result<TrieLexicon> {
    let text = std::fs::read_to_string(path)?;
    let words: Vec<&str> = text.lines().map(str::trim).filter(|w| !w.is_empty()).collect();
    Ok(build_trie(&words))
}

/// Segments `text` by greedy forward maximum matching.
///
/// At each position the longest lexicon entry is emitted; where the lexicon
/// has no match a single code point is emitted instead. The concatenation of
/// the returned tokens always equals the input.
pub fn max_match(text: &str, lex: &TrieLexicon) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut pos = 0;
    while pos < chars.len() {
        let take = lex.longest_match(&chars[pos..]).unwrap_or(1);
        tokens.push(chars[pos..pos + take].iter().collect());
        pos += take;
    }
    tokens
}

/// Length model: expected target characters per source character.
const LENGTH_RATIO: f64 = 1.0;
/// Length model: variance of the per-character length ratio.
const LENGTH_VARIANCE: f64 = 6.8;
/// Cost substituted when the tail probability underflows to zero.
const BIG_MATCH_COST: f64 = 25.0;

/// Bead shapes the aligner may use, named by source-target sentence counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BeadKind {
    /// One source sentence aligned to one target sentence.
    OneOne,
    /// A source sentence with no target counterpart (deletion).
    OneZero,
    /// A target sentence with no source counterpart (insertion).
    ZeroOne,
    /// Two source sentences merged into one target sentence.
    TwoOne,
    /// One source sentence split into two target sentences.
    OneTwo,
    /// Two source sentences rearranged into two target sentences.
    TwoTwo,
}

impl BeadKind {
    /// All six kinds in canonical order.
    pub const ALL: [BeadKind; 6] = [
        BeadKind::OneOne,
        BeadKind::OneZero,
        BeadKind::ZeroOne,
        BeadKind::TwoOne,
        BeadKind::OneTwo,
        BeadKind::TwoTwo,
    ];

    /// Source and target sentence counts consumed by the bead.
    pub fn counts(self) -> (usize, usize) {
        match self {
            BeadKind::OneOne => (1, 1),
            BeadKind::OneZero => (1, 0),
            BeadKind::ZeroOne => (0, 1),
            BeadKind::TwoOne => (2, 1),
            BeadKind::OneTwo => (1, 2),
            BeadKind::TwoTwo => (2, 2),
        }
    }

    /// Prior probability of the bead shape.
    pub fn prior(self) -> f64 {
        match self {
            BeadKind::OneOne => 0.89,
            BeadKind::OneZero | BeadKind::ZeroOne => 0.0099,
            BeadKind::TwoOne | BeadKind::OneTwo => 0.089,
            BeadKind::TwoTwo => 0.011,
        }
    }

    /// Short label used in reports ("1-1", "2-1", ...).
    pub fn label(self) -> &'static str {
        match self {
            BeadKind::OneOne => "1-1",
            BeadKind::OneZero => "1-0",
            BeadKind::ZeroOne => "0-1",
            BeadKind::TwoOne => "2-1",
            BeadKind::OneTwo => "1-2",
            BeadKind::TwoTwo => "2-2",
        }
    }
}

/// One aligned group of sentences.
///
/// Spans index into the input length lists; across a bead sequence they are
/// contiguous, monotone, and jointly cover both sides.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentBead {
    /// Shape of the bead.
    pub kind: BeadKind,
    /// Source sentences covered (empty for insertions).
    pub src: Range<usize>,
    /// Target sentences covered (empty for deletions).
    pub tgt: Range<usize>,
    /// Cost charged for this bead.
    pub cost: f64,
}

impl fmt::Display for AlignmentBead {
    /// Tab-separated rendering: kind, source range, target range, cost.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}\t{}..{}\t{}..{}\t{:.4}",
            self.kind.label(),
            self.src.start,
            self.src.end,
            self.tgt.start,
            self.tgt.end,
            self.cost
        )
    }
}

// Polynomial approximation of the standard normal CDF (max error ~7.5e-8).
fn normal_cdf(x: f64) -> f64 {
    if x < 0.0 {
        return 1.0 - normal_cdf(-x);
    }
    let t = 1.0 / (1.0 + 0.2316419 * x);
    let poly = t
        * (0.319381530
            + t * (-0.356563782 + t * (1.781477937 + t * (-1.821255978 + t * 1.330274429))));
    let pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    1.0 - pdf * poly
}

// Two-sided tail probability of the length deviation for one bead.
fn length_match_probability(src_len: usize, tgt_len: usize) -> f64 {
    if src_len == 0 && tgt_len == 0 {
        return 1.0;
    }
    let (l1, l2) = (src_len as f64, tgt_len as f64);
    let mean = (l1 + l2 / LENGTH_RATIO) / 2.0;
    let z = (LENGTH_RATIO * l1 - l2) / (LENGTH_VARIANCE * mean).sqrt();
    2.0 * (1.0 - normal_cdf(z.abs()))
}

/// Cost of one bead: negative log prior plus negative log probability of the
/// observed length pair under the length model.
pub fn bead_cost(kind: BeadKind, src_len: usize, tgt_len: usize) -> f64 {
    let p = length_match_probability(src_len, tgt_len);
    let length_cost = if p > 0.0 { -p.ln() } else { BIG_MATCH_COST };
    -kind.prior().ln() + length_cost
}

/// Aligns two sides by sentence length with all six bead kinds permitted.
///
/// `src_lens` and `tgt_lens` are character counts per sentence. Returns the
/// minimum-cost monotone bead sequence covering both sides entirely.
pub fn gale_church_align(
    src_lens: &[usize],
    tgt_lens: &[usize],
) -> Result<Vec<AlignmentBead>, SegmentError> {
    gale_church_align_with(src_lens, tgt_lens, &BeadKind::ALL)
}

/// Aligns two sides using only the permitted bead kinds.
pub fn gale_church_align_with(
    src_lens: &[usize],
    tgt_lens: &[usize],
    kinds: &[BeadKind],
) -> Result<Vec<AlignmentBead>, SegmentError> {
    if kinds.is_empty() {
        return Err(SegmentError::NoKinds);
    }
    for (index, &len) in src_lens.iter().enumerate() {
        if len == 0 {
            return Err(SegmentError::EmptySentence { side: "source", index });
        }
    }
    for (index, &len) in tgt_lens.iter().enumerate() {
        if len == 0 {
            return Err(SegmentError::EmptySentence { side: "target", index });
        }
    }
    let (n, m) = (src_lens.len(), tgt_lens.len());
    // dp[i][j]: cheapest cover of the first i source and j target sentences.
    let mut dp = vec![vec![f64::INFINITY; m + 1]; n + 1];
    let mut back: Vec<Vec<Option<BeadKind>>> = vec![vec![None; m + 1]; n + 1];
    dp[0][0] = 0.0;
    for i in 0..=n {
        for j in 0..=m {
            if i == 0 && j == 0 {
                continue;
            }
            for &kind in kinds {
                let (ds, dt) = kind.counts();
                if ds > i || dt > j {
                    continue;
                }
                let prev = dp[i - ds][j - dt];
                if !prev.is_finite() {
                    continue;
                }
                let src_len: usize = src_lens[i - ds..i].iter().sum();
                let tgt_len: usize = tgt_lens[j - dt..j].iter().sum();
                let cost = prev + bead_cost(kind, src_len, tgt_len);
                if cost < dp[i][j] {
                    dp[i][j] = cost;
                    back[i][j] = Some(kind);
                }
            }
        }
    }
    if !dp[n][m].is_finite() {
        return Err(SegmentError::Infeasible);
    }
    // Walk the backpointers from the full cover to the origin.
    let mut beads = Vec::new();
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let kind = back[i][j].expect("finite dp cells record a producing bead");
        let (ds, dt) = kind.counts();
        let src = i - ds..i;
        let tgt = j - dt..j;
        let cost = bead_cost(
            kind,
            src_lens[src.clone()].iter().sum(),
            tgt_lens[tgt.clone()].iter().sum(),
        );
        beads.push(AlignmentBead { kind, src, tgt, cost });
        i -= ds;
        j -= dt;
    }
    beads.reverse();
    Ok(beads)
}

/// Vote tally for one candidate sentence boundary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundaryVote {
    /// Boundary position: a bead boundary after this many source sentences.
    pub position: usize,
    /// How many alignments place a bead boundary at `position`.
    pub votes: usize,
    /// Number of alignments consulted; `votes <= k` always.
    pub k: usize,
}

/// Counts, per candidate position, the alignments with a bead ending there.
///
/// Each alignment contributes at most one vote per position.
pub fn tally_boundaries(
    candidates: &[usize],
    alignments: &[Vec<AlignmentBead>],
) -> Vec<BoundaryVote> {
    candidates
        .iter()
        .map(|&position| {
            let votes = alignments
                .iter()
                .filter(|beads| beads.iter().any(|b| b.src.end == position))
                .count();
            BoundaryVote { position, votes, k: alignments.len() }
        })
        .collect()
}

/// Keeps the candidate boundaries confirmed by at least `threshold`
/// alignments.
///
/// The result is always a subset of `candidates`: the voter never invents
/// positions, it only filters the proposed ones.
pub fn vote_boundaries(
    candidates: &[usize],
    alignments: &[Vec<AlignmentBead>],
    threshold: usize,
) -> Vec<usize> {
    tally_boundaries(candidates, alignments)
        .into_iter()
        .filter(|vote| vote.votes >= threshold)
        .map(|vote| vote.position)
        .collect()
}
