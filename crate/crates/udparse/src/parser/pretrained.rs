//! External word vectors in the word2vec text convention: an optional
//! `<count> <dim>` header line, then one `word v1 .. vdim` line per entry.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ParserError;

/// A fixed-dimension word-vector table.  Frozen tables initialize the word
/// embedding matrix and keep it untrainable; unfrozen tables only seed it.
/// Either way the table stays available at decoding time as a fallback for
/// words outside the trained vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainedTable {
    pub dim: usize,
    pub frozen: bool,
    /// Ordered so that serialization is deterministic.
    vectors: BTreeMap<String, Vec<f64>>,
}

impl PretrainedTable {
    pub fn new(dim: usize, frozen: bool) -> Self {
        PretrainedTable {
            dim,
            frozen,
            vectors: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, word: &str, vector: Vec<f64>) {
        assert_eq!(vector.len(), self.dim, "vector dimension mismatch");
        self.vectors.insert(word.to_string(), vector);
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.vectors.get(word).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

/// Parses a word2vec text file.  `expect_dim` pins the dimension; with
/// `None` it is inferred from the first data row.  Rows whose value count
/// does not match are skipped; the skip count is returned so callers can
/// warn.  A file with no usable rows is an error.
pub fn load_pretrained(
    path: &Path,
    expect_dim: Option<usize>,
) -> Result<(PretrainedTable, usize), ParserError> {
    let text = std::fs::read_to_string(path)?;
    let name = path.display().to_string();
    let bad = |message: String| ParserError::BadEmbeddings {
        path: name.clone(),
        message,
    };

    let mut dim = expect_dim;
    let mut rows: Vec<(String, Vec<f64>)> = Vec::new();
    let mut skipped = 0usize;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        // Header: the first line, exactly two fields, both integers.
        if i == 0 && fields.len() == 2 {
            if let (Ok(_), Ok(d)) = (fields[0].parse::<u64>(), fields[1].parse::<usize>()) {
                match dim {
                    Some(expected) if expected != d => {
                        return Err(bad(format!("header says dim {d}, expected {expected}")));
                    }
                    _ => dim = Some(d),
                }
                continue;
            }
        }
        if fields.len() < 2 {
            skipped += 1;
            continue;
        }
        let word = fields[0];
        let values: Result<Vec<f64>, _> = fields[1..].iter().map(|v| v.parse::<f64>()).collect();
        let values = match values {
            Ok(v) => v,
            Err(_) => {
                skipped += 1;
                continue;
            }
        };
        let d = *dim.get_or_insert(values.len());
        if values.len() != d {
            skipped += 1;
            continue;
        }
        rows.push((word.to_string(), values));
    }

    let dim = dim.ok_or_else(|| bad("no data rows".to_string()))?;
    if rows.is_empty() {
        return Err(bad("no usable rows".to_string()));
    }
    let mut table = PretrainedTable::new(dim, false);
    for (word, values) in rows {
        table.insert(&word, values);
    }
    Ok((table, skipped))
}
