//! The training manifest: a line-oriented `key = value` file describing
//! which treebanks to train on and with what settings.
//!
//! Keys before the first `treebank` line are global (seed, hyperparameter
//! overrides, transliteration file, proxy assignments); each `treebank = id`
//! line opens a stanza whose `train`, `dev`, `embeddings`, and `frozen` keys
//! apply to that treebank.  `#` starts a comment line and blank lines are
//! ignored.
//!
//! ```text
//! seed = 42
//! epochs = 30
//! proxy = test-bank train-bank
//!
//! treebank = train-bank
//! train = train-bank/train.conllu
//! dev = train-bank/dev.conllu
//! embeddings = vectors.txt
//! frozen = true
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::conllu::parse_conllu;

use super::pretrained::load_pretrained;
use super::train::TreebankData;
use super::{Hyperparams, ParserError};

/// One treebank stanza.  Paths are kept as written; [`Manifest::load_data`]
/// resolves relative ones against a base directory.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestTreebank {
    pub id: String,
    pub train: PathBuf,
    pub dev: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub frozen: bool,
}

/// A parsed manifest with hyperparameter overrides already applied.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub seed: Option<u64>,
    pub translit: Option<PathBuf>,
    /// Test-treebank id to training-treebank id.
    pub proxies: BTreeMap<String, String>,
    pub hyper: Hyperparams,
    pub treebanks: Vec<ManifestTreebank>,
}

fn bad(line: usize, message: impl Into<String>) -> ParserError {
    ParserError::BadManifest {
        line,
        message: message.into(),
    }
}

fn parse_num<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T, ParserError> {
    value
        .parse()
        .map_err(|_| bad(line, format!("{key} wants a number, got {value:?}")))
}

/// Applies a `key = value` override to the hyperparameters.  Returns false
/// when the key is not a hyperparameter.
fn apply_hyper(h: &mut Hyperparams, line: usize, key: &str, value: &str) -> Result<bool, ParserError> {
    match key {
        "char_emb_dim" => h.char_emb_dim = parse_num(line, key, value)?,
        "char_bilstm_layers" => h.char_bilstm_layers = parse_num(line, key, value)?,
        "char_hidden_dim" => h.char_hidden_dim = parse_num(line, key, value)?,
        "word_emb_dim" => h.word_emb_dim = parse_num(line, key, value)?,
        "pos_emb_dim" => h.pos_emb_dim = parse_num(line, key, value)?,
        "tb_emb_dim" => h.tb_emb_dim = parse_num(line, key, value)?,
        "word_bilstm_layers" => h.word_bilstm_layers = parse_num(line, key, value)?,
        "word_hidden_dim" => h.word_hidden_dim = parse_num(line, key, value)?,
        "mlp_hidden_dim" => h.mlp_hidden_dim = parse_num(line, key, value)?,
        "word_dropout" => h.word_dropout = parse_num(line, key, value)?,
        "alpha_oov" => h.alpha_oov = parse_num(line, key, value)?,
        "char_dropout" => h.char_dropout = parse_num(line, key, value)?,
        "p_agg" => h.p_agg = parse_num(line, key, value)?,
        "epochs" => h.epochs = parse_num(line, key, value)?,
        "sentence_cap" => h.sentence_cap = parse_num(line, key, value)?,
        "feats_emb_dim" => h.feats_emb_dim = parse_num(line, key, value)?,
        _ => return Ok(false),
    }
    Ok(true)
}

impl Manifest {
    pub fn parse(text: &str) -> Result<Manifest, ParserError> {
        let mut manifest = Manifest {
            seed: None,
            translit: None,
            proxies: BTreeMap::new(),
            hyper: Hyperparams::default(),
            treebanks: Vec::new(),
        };
        let mut current: Option<ManifestTreebank> = None;
        let mut pending_train: Option<usize> = None;

        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(line_no, format!("expected `key = value`, got {line:?}")))?;
            let key = key.trim();
            let value = value.trim();
            if value.is_empty() {
                return Err(bad(line_no, format!("{key} has an empty value")));
            }

            if key == "treebank" {
                if let Some(done) = current.take() {
                    manifest.treebanks.push(done);
                }
                if let Some(at) = pending_train {
                    return Err(bad(at, "treebank stanza is missing a train path"));
                }
                current = Some(ManifestTreebank {
                    id: value.to_string(),
                    train: PathBuf::new(),
                    dev: None,
                    embeddings: None,
                    frozen: false,
                });
                pending_train = Some(line_no);
                continue;
            }

            if let Some(stanza) = current.as_mut() {
                match key {
                    "train" => {
                        stanza.train = PathBuf::from(value);
                        pending_train = None;
                    }
                    "dev" => stanza.dev = Some(PathBuf::from(value)),
                    "embeddings" => stanza.embeddings = Some(PathBuf::from(value)),
                    "frozen" => {
                        stanza.frozen = match value {
                            "true" => true,
                            "false" => false,
                            other => {
                                return Err(bad(line_no, format!("frozen wants true/false, got {other:?}")))
                            }
                        }
                    }
                    other => return Err(bad(line_no, format!("unknown treebank key {other:?}"))),
                }
                continue;
            }

            match key {
                "seed" => manifest.seed = Some(parse_num(line_no, key, value)?),
                "translit" => manifest.translit = Some(PathBuf::from(value)),
                "proxy" => {
                    let mut parts = value.split_whitespace();
                    let (test, train) = match (parts.next(), parts.next(), parts.next()) {
                        (Some(a), Some(b), None) => (a, b),
                        _ => {
                            return Err(bad(
                                line_no,
                                "proxy wants exactly `test-id train-id`",
                            ))
                        }
                    };
                    manifest.proxies.insert(test.to_string(), train.to_string());
                }
                other => {
                    if !apply_hyper(&mut manifest.hyper, line_no, other, value)? {
                        return Err(bad(line_no, format!("unknown key {other:?}")));
                    }
                }
            }
        }
        if let Some(done) = current.take() {
            manifest.treebanks.push(done);
        }
        if let Some(at) = pending_train {
            return Err(bad(at, "treebank stanza is missing a train path"));
        }
        manifest.hyper.validate()?;
        Ok(manifest)
    }

    pub fn load(path: &Path) -> Result<Manifest, ParserError> {
        Manifest::parse(&std::fs::read_to_string(path)?)
    }

    /// Reads every referenced file.  Relative paths resolve against `base`
    /// (normally the manifest's directory).  Returns the loaded treebanks
    /// and the transliteration map.
    pub fn load_data(
        &self,
        base: &Path,
    ) -> Result<(Vec<TreebankData>, BTreeMap<char, char>), ParserError> {
        let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
        let mut data = Vec::with_capacity(self.treebanks.len());
        for tb in &self.treebanks {
            let train = parse_conllu(&std::fs::read_to_string(resolve(&tb.train))?)?;
            let dev = match &tb.dev {
                Some(p) => parse_conllu(&std::fs::read_to_string(resolve(p))?)?,
                None => Vec::new(),
            };
            let pretrained = match &tb.embeddings {
                Some(p) => {
                    let (mut table, skipped) = load_pretrained(&resolve(p), None)?;
                    if skipped > 0 {
                        log::warn!("{}: skipped {skipped} malformed embedding rows", p.display());
                    }
                    table.frozen = tb.frozen;
                    Some(table)
                }
                None => None,
            };
            data.push(TreebankData {
                id: tb.id.clone(),
                train,
                dev,
                pretrained,
            });
        }
        let translit = match &self.translit {
            Some(p) => load_transliteration(&resolve(p))?,
            None => BTreeMap::new(),
        };
        Ok((data, translit))
    }

    /// The fully resolved settings, for logging at the start of a run.
    pub fn render_resolved(&self, seed: u64) -> String {
        let mut out = String::new();
        let h = &self.hyper;
        let _ = writeln!(out, "seed = {seed}");
        let _ = writeln!(out, "epochs = {}", h.epochs);
        let _ = writeln!(out, "sentence_cap = {}", h.sentence_cap);
        let _ = writeln!(out, "char_emb_dim = {}", h.char_emb_dim);
        let _ = writeln!(out, "char_bilstm_layers = {}", h.char_bilstm_layers);
        let _ = writeln!(out, "char_hidden_dim = {}", h.char_hidden_dim);
        let _ = writeln!(out, "word_emb_dim = {}", h.word_emb_dim);
        let _ = writeln!(out, "pos_emb_dim = {}", h.pos_emb_dim);
        let _ = writeln!(out, "tb_emb_dim = {}", h.tb_emb_dim);
        let _ = writeln!(out, "word_bilstm_layers = {}", h.word_bilstm_layers);
        let _ = writeln!(out, "word_hidden_dim = {}", h.word_hidden_dim);
        let _ = writeln!(out, "mlp_hidden_dim = {}", h.mlp_hidden_dim);
        let _ = writeln!(out, "word_dropout = {}", h.word_dropout);
        let _ = writeln!(out, "alpha_oov = {}", h.alpha_oov);
        let _ = writeln!(out, "char_dropout = {}", h.char_dropout);
        let _ = writeln!(out, "p_agg = {}", h.p_agg);
        let _ = writeln!(out, "feats_emb_dim = {}", h.feats_emb_dim);
        if let Some(p) = &self.translit {
            let _ = writeln!(out, "translit = {}", p.display());
        }
        for (test, train) in &self.proxies {
            let _ = writeln!(out, "proxy = {test} {train}");
        }
        for tb in &self.treebanks {
            let _ = writeln!(out, "treebank = {}", tb.id);
            let _ = writeln!(out, "train = {}", tb.train.display());
            if let Some(p) = &tb.dev {
                let _ = writeln!(out, "dev = {}", p.display());
            }
            if let Some(p) = &tb.embeddings {
                let _ = writeln!(out, "embeddings = {}", p.display());
                let _ = writeln!(out, "frozen = {}", tb.frozen);
            }
        }
        out
    }
}

/// Reads a transliteration file: one `from to` pair of single code points
/// per line, `#` comments allowed.
pub fn load_transliteration(path: &Path) -> Result<BTreeMap<char, char>, ParserError> {
    let text = std::fs::read_to_string(path)?;
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (from, to) = match (parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(b), None) => (a, b),
            _ => return Err(bad(i + 1, "expected `from to`")),
        };
        let single = |s: &str| -> Result<char, ParserError> {
            let mut chars = s.chars();
            match (chars.next(), chars.next()) {
                (Some(c), None) => Ok(c),
                _ => Err(bad(i + 1, format!("{s:?} is not a single code point"))),
            }
        };
        map.insert(single(from)?, single(to)?);
    }
    Ok(map)
}
