//! Reading and writing treebanks in the CoNLL-U format.
//!
//! A treebank file is a sequence of sentences separated by blank lines. Each
//! sentence consists of optional `#` comment lines followed by one line per
//! token with ten tab-separated columns:
//!
//! ```text
//! ID  FORM  LEMMA  UPOS  XPOS  FEATS  HEAD  DEPREL  DEPS  MISC
//! ```
//!
//! Multiword token lines (`ID` of the form `a-b`) are kept as [`MultiwordSpan`]
//! entries alongside the syntactic words they cover. Empty nodes (`ID` of the
//! form `a.b`) are not supported and are rejected with an error.
//!
//! Writing is the exact inverse of reading: for a file that uses `\n` line
//! endings and canonical morphological feature ordering, `parse` followed by
//! `write` reproduces the input byte for byte.
//!
//! ```
//! use udparse::conllu::{parse_conllu, write_conllu};
//!
//! let text = "# sent_id = 1\n1\tRivers\triver\tNOUN\t_\tNumber=Plur\t2\tnsubj\t_\t_\n\
//!             2\tflow\tflow\tVERB\t_\t_\t0\troot\t_\t_\n\n";
//! let sentences = parse_conllu(text).unwrap();
//! assert_eq!(sentences.len(), 1);
//! assert_eq!(sentences[0].tokens[0].form, "Rivers");
//! assert_eq!(write_conllu(&sentences), text);
//! ```

use std::fmt::Write as _;

use thiserror::Error;

/// One syntactic word.
///
/// `head == Some(0)` marks the root arc. `head == None` / `deprel == None`
/// represent an underscore column (unannotated input).
#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    /// 1-based position within the sentence.
    pub id: usize,
    pub form: String,
    pub lemma: String,
    pub upos: String,
    pub xpos: String,
    /// Morphological features, kept sorted case-insensitively by attribute.
    pub feats: Vec<(String, String)>,
    pub head: Option<usize>,
    pub deprel: Option<String>,
    /// Enhanced-dependency column, preserved verbatim.
    pub deps: String,
    /// Miscellaneous column, preserved verbatim.
    pub misc: String,
}

impl Token {
    /// A bare token with only id and form set; the annotation columns default
    /// to underscores.
    pub fn new(id: usize, form: &str) -> Self {
        Token {
            id,
            form: form.to_string(),
            lemma: "_".to_string(),
            upos: "_".to_string(),
            xpos: "_".to_string(),
            feats: Vec::new(),
            head: None,
            deprel: None,
            deps: "_".to_string(),
            misc: "_".to_string(),
        }
    }

    /// Feature column in canonical `A=x|B=y` form, `_` when empty.
    pub fn feats_string(&self) -> String {
        feats_to_string(&self.feats)
    }
}

/// A surface multiword token covering the syntactic words `start..=end`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiwordSpan {
    pub start: usize,
    pub end: usize,
    pub form: String,
    /// MISC column of the range line, preserved verbatim.
    pub misc: String,
}

/// One sentence: comment lines, tokens, and any multiword spans.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Sentence {
    /// Comment lines exactly as they appeared, including the leading `#`.
    pub comments: Vec<String>,
    pub tokens: Vec<Token>,
    pub spans: Vec<MultiwordSpan>,
}

impl Sentence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Head array indexed by token id (entry 0 unused), or an error if any
    /// head is missing.
    pub fn heads(&self) -> Result<Vec<usize>, TreeError> {
        let mut heads = vec![0; self.tokens.len() + 1];
        for t in &self.tokens {
            heads[t.id] = t.head.ok_or(TreeError::MissingHead { id: t.id })?;
        }
        Ok(heads)
    }
}

/// A named collection of sentences.
#[derive(Debug, Clone, PartialEq)]
pub struct Treebank {
    pub id: String,
    pub sentences: Vec<Sentence>,
}

impl Treebank {
    pub fn new(id: &str, sentences: Vec<Sentence>) -> Self {
        Treebank { id: id.to_string(), sentences }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConlluError {
    #[error("line {line}: expected 10 tab-separated fields, found {found}")]
    FieldCount { line: usize, found: usize },
    #[error("line {line}: empty nodes (id `{id}`) are not supported")]
    EmptyNode { line: usize, id: String },
    #[error("line {line}: malformed token id `{id}`")]
    BadId { line: usize, id: String },
    #[error("line {line}: expected token id {expected}, found {found}")]
    NonConsecutiveId { line: usize, expected: usize, found: usize },
    #[error("line {line}: malformed head `{head}`")]
    BadHead { line: usize, head: String },
    #[error("line {line}: head {head} out of range for a sentence of {n} tokens")]
    HeadOutOfRange { line: usize, head: usize, n: usize },
    #[error("line {line}: token {id} has itself as head")]
    SelfHead { line: usize, id: usize },
    #[error("line {line}: malformed feature `{feat}`")]
    BadFeature { line: usize, feat: String },
    #[error("line {line}: malformed multiword range `{id}`")]
    BadRange { line: usize, id: String },
    #[error("line {line}: multiword range {start}-{end} does not cover existing token ids")]
    RangeOutOfBounds { line: usize, start: usize, end: usize },
    #[error("line {line}: multiword range {start}-{end} overlaps a previous range")]
    OverlappingRange { line: usize, start: usize, end: usize },
    #[error("line {line}: comment after the first token of a sentence")]
    LateComment { line: usize },
}

#[derive(Debug, Error, PartialEq)]
pub enum TreeError {
    #[error("token {id} has no head")]
    MissingHead { id: usize },
    #[error("no token is attached to the root")]
    NoRoot,
    #[error("tokens {first} and {second} are both attached to the root")]
    MultipleRoots { first: usize, second: usize },
    #[error("token {id} is part of a cycle")]
    Cycle { id: usize },
}

/// Checks that the (fully annotated) sentence forms a single tree: every head
/// set, exactly one token attached to 0, and every token reachable from the
/// root.
pub fn check_tree(sentence: &Sentence) -> Result<(), TreeError> {
    let heads = sentence.heads()?;
    let n = sentence.tokens.len();
    let mut root = None;
    for id in 1..=n {
        if heads[id] == 0 {
            match root {
                None => root = Some(id),
                Some(first) => return Err(TreeError::MultipleRoots { first, second: id }),
            }
        }
    }
    if n > 0 && root.is_none() {
        return Err(TreeError::NoRoot);
    }
    // Walk up from every token; a walk that does not reach 0 within n steps
    // is stuck in a cycle.
    for id in 1..=n {
        let mut cur = id;
        let mut steps = 0;
        while cur != 0 {
            cur = heads[cur];
            steps += 1;
            if steps > n {
                return Err(TreeError::Cycle { id });
            }
        }
    }
    Ok(())
}

/// Replaces every lemma with the lowercased form.
///
/// This is the lemma strategy for models that do not predict lemmas: scoring
/// treats a lowercased copy of the surface form as the lemma.
pub fn lemma_fallback(sentence: &mut Sentence) {
    for token in &mut sentence.tokens {
        token.lemma = token.form.to_lowercase();
    }
}

fn parse_feats(field: &str, line: usize) -> Result<Vec<(String, String)>, ConlluError> {
    if field == "_" {
        return Ok(Vec::new());
    }
    let mut feats = Vec::new();
    for pair in field.split('|') {
        let Some((attr, value)) = pair.split_once('=') else {
            return Err(ConlluError::BadFeature { line, feat: pair.to_string() });
        };
        if attr.is_empty() {
            return Err(ConlluError::BadFeature { line, feat: pair.to_string() });
        }
        feats.push((attr.to_string(), value.to_string()));
    }
    sort_feats(&mut feats);
    Ok(feats)
}

/// Canonical feature order: case-insensitive by attribute name, with the
/// case-sensitive name and the value as tie-breakers.
pub fn sort_feats(feats: &mut [(String, String)]) {
    feats.sort_by(|a, b| {
        (a.0.to_lowercase(), &a.0, &a.1).cmp(&(b.0.to_lowercase(), &b.0, &b.1))
    });
}

fn feats_to_string(feats: &[(String, String)]) -> String {
    if feats.is_empty() {
        return "_".to_string();
    }
    let mut out = String::new();
    for (i, (a, v)) in feats.iter().enumerate() {
        if i > 0 {
            out.push('|');
        }
        out.push_str(a);
        out.push('=');
        out.push_str(v);
    }
    out
}

/// Parses a whole CoNLL-U document. The empty string yields no sentences.
pub fn parse_conllu(text: &str) -> Result<Vec<Sentence>, ConlluError> {
    let mut sentences = Vec::new();
    let mut current = Sentence::default();
    // (line, head) pairs deferred until the sentence length is known.
    let mut pending_heads: Vec<(usize, usize)> = Vec::new();

    let flush = |current: &mut Sentence,
                     pending_heads: &mut Vec<(usize, usize)>,
                     sentences: &mut Vec<Sentence>|
     -> Result<(), ConlluError> {
        if current.tokens.is_empty() && current.comments.is_empty() {
            return Ok(());
        }
        let n = current.tokens.len();
        for &(line, head) in pending_heads.iter() {
            if head > n {
                return Err(ConlluError::HeadOutOfRange { line, head, n });
            }
        }
        for span in &current.spans {
            if span.start < 1 || span.end > n {
                // The line number is lost here, but ranges are validated as
                // they are read whenever possible; this catches end > n.
                return Err(ConlluError::RangeOutOfBounds {
                    line: 0,
                    start: span.start,
                    end: span.end,
                });
            }
        }
        pending_heads.clear();
        sentences.push(std::mem::take(current));
        Ok(())
    };

    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.is_empty() {
            flush(&mut current, &mut pending_heads, &mut sentences)?;
            continue;
        }
        if let Some(_rest) = line.strip_prefix('#') {
            if !current.tokens.is_empty() {
                return Err(ConlluError::LateComment { line: lineno });
            }
            current.comments.push(line.to_string());
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 10 {
            return Err(ConlluError::FieldCount { line: lineno, found: fields.len() });
        }
        let id_field = fields[0];
        if id_field.contains('.') {
            return Err(ConlluError::EmptyNode { line: lineno, id: id_field.to_string() });
        }
        if let Some((a, b)) = id_field.split_once('-') {
            let (Ok(start), Ok(end)) = (a.parse::<usize>(), b.parse::<usize>()) else {
                return Err(ConlluError::BadRange { line: lineno, id: id_field.to_string() });
            };
            if start == 0 || end < start {
                return Err(ConlluError::BadRange { line: lineno, id: id_field.to_string() });
            }
            if start != current.tokens.len() + 1 {
                return Err(ConlluError::RangeOutOfBounds { line: lineno, start, end });
            }
            if let Some(prev) = current.spans.last() {
                if start <= prev.end {
                    return Err(ConlluError::OverlappingRange { line: lineno, start, end });
                }
            }
            current.spans.push(MultiwordSpan {
                start,
                end,
                form: fields[1].to_string(),
                misc: fields[9].to_string(),
            });
            continue;
        }
        let id: usize = id_field
            .parse()
            .map_err(|_| ConlluError::BadId { line: lineno, id: id_field.to_string() })?;
        if id != current.tokens.len() + 1 {
            return Err(ConlluError::NonConsecutiveId {
                line: lineno,
                expected: current.tokens.len() + 1,
                found: id,
            });
        }
        let head = match fields[6] {
            "_" => None,
            h => {
                let head: usize = h
                    .parse()
                    .map_err(|_| ConlluError::BadHead { line: lineno, head: h.to_string() })?;
                if head == id {
                    return Err(ConlluError::SelfHead { line: lineno, id });
                }
                pending_heads.push((lineno, head));
                Some(head)
            }
        };
        let deprel = match fields[7] {
            "_" => None,
            d => Some(d.to_string()),
        };
        current.tokens.push(Token {
            id,
            form: fields[1].to_string(),
            lemma: fields[2].to_string(),
            upos: fields[3].to_string(),
            xpos: fields[4].to_string(),
            feats: parse_feats(fields[5], lineno)?,
            head,
            deprel,
            deps: fields[8].to_string(),
            misc: fields[9].to_string(),
        });
    }
    flush(&mut current, &mut pending_heads, &mut sentences)?;
    Ok(sentences)
}

/// Serializes sentences back to CoNLL-U text. Each sentence is followed by a
/// blank line; the empty slice yields the empty string.
pub fn write_conllu(sentences: &[Sentence]) -> String {
    let mut out = String::new();
    for sentence in sentences {
        for comment in &sentence.comments {
            out.push_str(comment);
            out.push('\n');
        }
        let mut spans = sentence.spans.iter().peekable();
        for token in &sentence.tokens {
            if let Some(span) = spans.peek() {
                if span.start == token.id {
                    let _ = writeln!(
                        out,
                        "{}-{}\t{}\t_\t_\t_\t_\t_\t_\t_\t{}",
                        span.start, span.end, span.form, span.misc
                    );
                    spans.next();
                }
            }
            let head = match token.head {
                Some(h) => h.to_string(),
                None => "_".to_string(),
            };
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                token.id,
                token.form,
                token.lemma,
                token.upos,
                token.xpos,
                token.feats_string(),
                head,
                token.deprel.as_deref().unwrap_or("_"),
                token.deps,
                token.misc
            );
        }
        out.push('\n');
    }
    out
}
