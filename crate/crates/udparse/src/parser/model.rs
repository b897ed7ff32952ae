//! Parameter layout, input composition, scoring, and greedy decoding.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::conllu::{Sentence, Token};
use crate::neural::{
    glorot, BiLstm, BiLstmSpec, Mlp, NodeId, ParamId, ParamSet, Tape, Tensor,
};
use crate::transitions::{Config, Transition, TransitionKind};

use super::{Hyperparams, ParserError, PretrainedTable, Vocabulary};

/// Applies a character substitution map to a form, yielding the key used for
/// word and character lookups.  The original form is never modified in the
/// output.
pub fn transliterate_form(form: &str, map: &BTreeMap<char, char>) -> String {
    if map.is_empty() {
        return form.to_string();
    }
    form.chars().map(|c| map.get(&c).copied().unwrap_or(c)).collect()
}

/// Parameter handles; rebuilt deterministically from the vocabulary sizes.
#[derive(Debug)]
struct Handles {
    char_emb: ParamId,
    char_lstm: BiLstm,
    /// Trained out-of-vocabulary word vector, trainable even when the word
    /// matrix is frozen.
    word_oov: ParamId,
    word_emb: ParamId,
    pos_emb: ParamId,
    tb_emb: Option<ParamId>,
    feats_emb: Option<ParamId>,
    /// Input vector for the artificial root position.
    root_input: ParamId,
    /// Stand-in contextual vector for feature slots that are empty.
    pad_ctx: ParamId,
    word_lstm: BiLstm,
    trans_mlp: Mlp,
    label_mlp: Mlp,
}

/// A treebank request resolved through the proxy map.
#[derive(Debug)]
pub struct ResolvedTreebank {
    /// Embedding row, `None` for mono-treebank models.
    pub index: Option<usize>,
    /// Resolved treebank id, used to prioritize pretrained lookups.
    pub name: Option<String>,
}

/// A trained (or initializing) parser.  Forward passes take the parameter
/// set explicitly so that gradient checking can run them against a perturbed
/// copy; `parse_sentence` and friends use the owned parameters.
#[derive(Debug)]
pub struct Model {
    /// Effective settings; `word_emb_dim` reflects any pretrained override.
    pub hyper: Hyperparams,
    pub vocab: Vocabulary,
    /// Test-treebank id to training-treebank id.
    pub proxies: BTreeMap<String, String>,
    pub translit: BTreeMap<char, char>,
    /// Pretrained tables in manifest order, keyed by treebank id.
    pub pretrained: Vec<(String, PretrainedTable)>,
    /// True when any pretrained table was loaded frozen; the word matrix is
    /// then excluded from updates.
    pub frozen_words: bool,
    pub params: ParamSet,
    handles: Handles,
}

fn glorot_vector(name: &str, params: &mut ParamSet, dim: usize, rng: &mut impl Rng) -> ParamId {
    let t = glorot(1, dim, rng);
    params.add(name, Tensor::vector(t.data), true)
}

impl Model {
    /// Lays out and initializes all parameters.  The registration order is
    /// fixed, so one seed always produces the same parameter set for a given
    /// vocabulary.
    pub fn build(
        hyper: &Hyperparams,
        vocab: Vocabulary,
        proxies: BTreeMap<String, String>,
        translit: BTreeMap<char, char>,
        pretrained: Vec<(String, PretrainedTable)>,
        seed: u64,
    ) -> Result<Model, ParserError> {
        hyper.validate()?;
        let mut hyper = hyper.clone();
        let mut frozen_words = false;
        for (_, table) in &pretrained {
            if table.dim != pretrained[0].1.dim {
                return Err(ParserError::EmbeddingDimMismatch {
                    left: pretrained[0].1.dim,
                    right: table.dim,
                });
            }
            frozen_words |= table.frozen;
        }
        if let Some((_, table)) = pretrained.first() {
            hyper.word_emb_dim = table.dim;
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        let char_emb = params.add_glorot("char_emb", vocab.n_chars(), hyper.char_emb_dim, &mut rng);
        let char_lstm = BiLstm::init(
            &mut params,
            "char_lstm",
            BiLstmSpec {
                layers: hyper.char_bilstm_layers,
                input_dim: hyper.char_emb_dim,
                hidden_dim: hyper.char_hidden_dim,
            },
            &mut rng,
        );
        let word_oov = glorot_vector("word_oov", &mut params, hyper.word_emb_dim, &mut rng);
        let mut word_table = glorot(vocab.n_words(), hyper.word_emb_dim, &mut rng);
        let dim = hyper.word_emb_dim;
        for wi in 1..vocab.n_words() {
            let word = vocab.word_name(wi);
            if let Some(vector) = pretrained.iter().find_map(|(_, t)| t.get(word)) {
                word_table.data[wi * dim..(wi + 1) * dim].copy_from_slice(vector);
            }
        }
        let word_emb = params.add("word_emb", word_table, !frozen_words);
        let pos_emb = params.add_glorot("pos_emb", vocab.n_upos(), hyper.pos_emb_dim, &mut rng);
        let tb_emb = vocab.is_multi().then(|| {
            params.add_glorot("tb_emb", vocab.n_treebanks(), hyper.tb_emb_dim, &mut rng)
        });
        let feats_emb = (hyper.feats_emb_dim > 0).then(|| {
            params.add_glorot(
                "feats_emb",
                vocab.n_feat_bundles(),
                hyper.feats_emb_dim,
                &mut rng,
            )
        });

        let input_dim = hyper.word_emb_dim
            + hyper.pos_emb_dim
            + 2 * hyper.char_hidden_dim
            + if vocab.is_multi() { hyper.tb_emb_dim } else { 0 }
            + hyper.feats_emb_dim;
        let ctx_dim = 2 * hyper.word_hidden_dim;
        let root_input = glorot_vector("root_input", &mut params, input_dim, &mut rng);
        let pad_ctx = params.add_zero_vector("pad_ctx", ctx_dim);
        let word_lstm = BiLstm::init(
            &mut params,
            "word_lstm",
            BiLstmSpec {
                layers: hyper.word_bilstm_layers,
                input_dim,
                hidden_dim: hyper.word_hidden_dim,
            },
            &mut rng,
        );
        let feature_dim = 5 * ctx_dim;
        let trans_mlp = Mlp::init(
            &mut params,
            "trans_mlp",
            feature_dim,
            hyper.mlp_hidden_dim,
            4,
            &mut rng,
        );
        let label_mlp = Mlp::init(
            &mut params,
            "label_mlp",
            feature_dim,
            hyper.mlp_hidden_dim,
            2 * vocab.n_labels(),
            &mut rng,
        );

        Ok(Model {
            hyper,
            vocab,
            proxies,
            translit,
            pretrained,
            frozen_words,
            params,
            handles: Handles {
                char_emb,
                char_lstm,
                word_oov,
                word_emb,
                pos_emb,
                tb_emb,
                feats_emb,
                root_input,
                pad_ctx,
                word_lstm,
                trans_mlp,
                label_mlp,
            },
        })
    }

    /// Dimension of one composed token vector.
    pub fn input_dim(&self) -> usize {
        self.hyper.word_emb_dim
            + self.hyper.pos_emb_dim
            + 2 * self.hyper.char_hidden_dim
            + if self.vocab.is_multi() { self.hyper.tb_emb_dim } else { 0 }
            + self.hyper.feats_emb_dim
    }

    /// Dimension of one contextual (BiLSTM output) vector.
    pub fn context_dim(&self) -> usize {
        2 * self.hyper.word_hidden_dim
    }

    /// Maps a requested treebank id through the proxy table and into the
    /// embedding table.  Multi-treebank models require a known id; for mono
    /// models the id only steers pretrained-table priority.
    pub fn resolve_treebank(&self, requested: Option<&str>) -> Result<ResolvedTreebank, ParserError> {
        let name = requested.map(|r| {
            self.proxies
                .get(r)
                .cloned()
                .unwrap_or_else(|| r.to_string())
        });
        if !self.vocab.is_multi() {
            return Ok(ResolvedTreebank { index: None, name });
        }
        let name = name.ok_or(ParserError::MissingTreebank)?;
        let index = self
            .vocab
            .treebank_index(&name)
            .ok_or_else(|| ParserError::UnknownTreebank {
                id: requested.unwrap_or_default().to_string(),
            })?;
        Ok(ResolvedTreebank {
            index: Some(index),
            name: Some(name),
        })
    }

    /// Looks a raw form up in the pretrained tables, trying the resolved
    /// treebank's table before the others.
    fn pretrained_vector(&self, form: &str, resolved: Option<&str>) -> Option<&[f64]> {
        if let Some(name) = resolved {
            if let Some((_, table)) = self.pretrained.iter().find(|(id, _)| id == name) {
                if let Some(v) = table.get(form) {
                    return Some(v);
                }
            }
        }
        self.pretrained
            .iter()
            .filter(|(id, _)| resolved != Some(id.as_str()))
            .find_map(|(_, table)| table.get(form))
    }

    /// Inverted-scaling dropout: zero with probability `p`, otherwise scale
    /// by `1/(1-p)` so the expectation is unchanged.
    fn dropout(tape: &mut Tape, x: NodeId, p: f64, rng: &mut ChaCha8Rng) -> NodeId {
        if p == 0.0 {
            return x;
        }
        let mask: Vec<f64> = (0..tape.value(x).len())
            .map(|_| if rng.gen::<f64>() < p { 0.0 } else { 1.0 / (1.0 - p) })
            .collect();
        let m = tape.constant(mask);
        tape.mul(x, m)
    }

    /// Composes one token's input vector: word, UPOS, character summary, and
    /// optional treebank and feature-bundle embeddings.  In training mode
    /// (`dropout` supplied) the word embedding is stochastically replaced by
    /// the OOV vector at rate `alpha/(alpha+freq)` and both the word and
    /// character terms get elementwise dropout.  In test mode unknown words
    /// fall back to the pretrained tables before the OOV vector.
    pub fn compose_input(
        &self,
        params: &ParamSet,
        tape: &mut Tape,
        token: &Token,
        resolved: &ResolvedTreebank,
        mut dropout: Option<&mut ChaCha8Rng>,
    ) -> NodeId {
        let key = transliterate_form(&token.form, &self.translit);
        let mut wi = self.vocab.word_index(&key);
        if let Some(rng) = dropout.as_deref_mut() {
            if wi != 0 {
                let alpha = self.hyper.alpha_oov;
                let freq = self.vocab.word_freq(wi) as f64;
                if alpha > 0.0 && rng.gen::<f64>() < alpha / (alpha + freq) {
                    wi = 0;
                }
            }
        }
        let mut word = if wi != 0 {
            tape.param_row(params, self.handles.word_emb, wi)
        } else if dropout.is_none() {
            match self.pretrained_vector(&token.form, resolved.name.as_deref()) {
                Some(v) => tape.constant(v.to_vec()),
                None => tape.param_vec(params, self.handles.word_oov),
            }
        } else {
            tape.param_vec(params, self.handles.word_oov)
        };
        if let Some(rng) = dropout.as_deref_mut() {
            word = Self::dropout(tape, word, self.hyper.word_dropout, rng);
        }

        let pos = tape.param_row(params, self.handles.pos_emb, self.vocab.upos_index(&token.upos));

        let char_inputs: Vec<NodeId> = key
            .chars()
            .map(|c| tape.param_row(params, self.handles.char_emb, self.vocab.char_index(c)))
            .collect();
        let mut chars = self
            .handles
            .char_lstm
            .final_state(tape, params, &char_inputs)
            .expect("character input dimension is fixed by construction")
            .unwrap_or_else(|| tape.zeros(2 * self.hyper.char_hidden_dim));
        if let Some(rng) = dropout.as_deref_mut() {
            chars = Self::dropout(tape, chars, self.hyper.char_dropout, rng);
        }

        let mut parts = vec![word, pos, chars];
        if let Some(tb_emb) = self.handles.tb_emb {
            let row = resolved.index.expect("multi-treebank model resolved an index");
            parts.push(tape.param_row(params, tb_emb, row));
        }
        if let Some(feats_emb) = self.handles.feats_emb {
            let row = self.vocab.feats_bundle_index(&token.feats_string());
            parts.push(tape.param_row(params, feats_emb, row));
        }
        tape.concat(&parts)
    }

    /// Runs the word BiLSTM over the whole sentence.  Position 0 is the
    /// artificial root (a learned input vector); position `i` is token `i`.
    pub fn encode_sentence(
        &self,
        params: &ParamSet,
        tape: &mut Tape,
        tokens: &[Token],
        treebank: Option<&str>,
        mut dropout: Option<&mut ChaCha8Rng>,
    ) -> Result<Vec<NodeId>, ParserError> {
        let resolved = self.resolve_treebank(treebank)?;
        let mut inputs = Vec::with_capacity(tokens.len() + 1);
        inputs.push(tape.param_vec(params, self.handles.root_input));
        for token in tokens {
            inputs.push(self.compose_input(params, tape, token, &resolved, dropout.as_deref_mut()));
        }
        Ok(self.handles.word_lstm.run(tape, params, &inputs)?)
    }

    /// Scores a configuration.  Returns the 4 transition scores and the
    /// `2 * n_labels` label scores (left-arc labels first), over the feature
    /// window `[s2, s1, s0, b0, leftmost-dep(b0)]`; empty slots read the
    /// trained padding vector.
    pub fn score_config(
        &self,
        params: &ParamSet,
        tape: &mut Tape,
        config: &Config,
        ctx: &[NodeId],
    ) -> (NodeId, NodeId) {
        let b0 = config.buffer_front();
        let slots = [
            config.stack_item(2),
            config.stack_item(1),
            config.stack_item(0),
            b0,
            b0.and_then(|b| config.leftmost_dep(b)),
        ];
        let features: Vec<NodeId> = slots
            .iter()
            .map(|slot| match slot {
                Some(id) => ctx[*id],
                None => tape.param_vec(params, self.handles.pad_ctx),
            })
            .collect();
        let x = tape.concat(&features);
        let transitions = self.handles.trans_mlp.score(tape, params, x);
        let labels = self.handles.label_mlp.score(tape, params, x);
        (transitions, labels)
    }

    /// Greedy argmax over the legal transitions, ties broken by the fixed
    /// order shift < left-arc < right-arc < swap and by lower label index.
    pub fn best_legal(
        &self,
        t_vals: &[f64],
        l_vals: &[f64],
        config: &Config,
    ) -> Transition {
        let n_labels = self.vocab.n_labels();
        let mut best: Option<(f64, Transition)> = None;
        let consider = |score: f64, t: Transition, best: &mut Option<(f64, Transition)>| {
            if best.map_or(true, |(b, _)| score > b) {
                *best = Some((score, t));
            }
        };
        if config.is_legal(TransitionKind::Shift) {
            consider(t_vals[0], Transition::Shift, &mut best);
        }
        for (kind_idx, make) in [
            (1usize, Transition::LeftArc as fn(usize) -> Transition),
            (2usize, Transition::RightArc as fn(usize) -> Transition),
        ] {
            let kind = if kind_idx == 1 { TransitionKind::LeftArc } else { TransitionKind::RightArc };
            if !config.is_legal(kind) {
                continue;
            }
            let base = (kind_idx - 1) * n_labels;
            let mut label = 0usize;
            for l in 1..n_labels {
                if l_vals[base + l] > l_vals[base + label] {
                    label = l;
                }
            }
            consider(t_vals[kind_idx] + l_vals[base + label], make(label), &mut best);
        }
        if config.is_legal(TransitionKind::Swap) {
            consider(t_vals[3], Transition::Swap, &mut best);
        }
        best.expect("a non-terminal configuration always has a legal transition").1
    }

    /// Combined score of one transition from already-evaluated score nodes.
    pub fn transition_score(&self, t_vals: &[f64], l_vals: &[f64], t: Transition) -> f64 {
        let n_labels = self.vocab.n_labels();
        match t {
            Transition::Shift => t_vals[0],
            Transition::LeftArc(l) => t_vals[1] + l_vals[l],
            Transition::RightArc(l) => t_vals[2] + l_vals[n_labels + l],
            Transition::Swap => t_vals[3],
        }
    }

    /// Builds the tape node for a transition's combined score.
    pub fn transition_score_node(
        &self,
        tape: &mut Tape,
        t_node: NodeId,
        l_node: NodeId,
        t: Transition,
    ) -> NodeId {
        let n_labels = self.vocab.n_labels();
        match t {
            Transition::Shift => tape.pick(t_node, 0),
            Transition::LeftArc(l) => {
                let a = tape.pick(t_node, 1);
                let b = tape.pick(l_node, l);
                tape.add(a, b)
            }
            Transition::RightArc(l) => {
                let a = tape.pick(t_node, 2);
                let b = tape.pick(l_node, n_labels + l);
                tape.add(a, b)
            }
            Transition::Swap => tape.pick(t_node, 3),
        }
    }

    /// Parses one sentence greedily and returns a copy with heads and
    /// relations filled in.  The output is always a single-rooted tree: if
    /// decoding attaches several tokens to the root, all but the first are
    /// re-attached under it with the fallback relation.
    pub fn parse_sentence(
        &self,
        sentence: &Sentence,
        treebank: Option<&str>,
    ) -> Result<Sentence, ParserError> {
        let mut out = sentence.clone();
        let n = sentence.tokens.len();
        if n == 0 {
            return Ok(out);
        }
        let mut tape = Tape::new();
        let ctx = self.encode_sentence(&self.params, &mut tape, &sentence.tokens, treebank, None)?;
        let mut config = Config::initial(n);
        let step_limit = n * n + 2 * n + 4;
        let mut steps = 0usize;
        while !config.is_terminal() {
            let (t_node, l_node) = self.score_config(&self.params, &mut tape, &config, &ctx);
            let t_vals = tape.value(t_node).to_vec();
            let l_vals = tape.value(l_node).to_vec();
            let t = self.best_legal(&t_vals, &l_vals, &config);
            config.apply(t).expect("the chosen transition was legality-checked");
            steps += 1;
            assert!(steps <= step_limit, "decoding exceeded the transition bound");
        }

        let mut heads = vec![0usize; n];
        let mut labels = vec![0usize; n];
        for arc in config.arcs() {
            heads[arc.dep - 1] = arc.head;
            labels[arc.dep - 1] = arc.label;
        }
        let roots: Vec<usize> = (1..=n).filter(|&i| heads[i - 1] == 0).collect();
        for &extra in roots.iter().skip(1) {
            heads[extra - 1] = roots[0];
            labels[extra - 1] = 0;
        }
        for (i, token) in out.tokens.iter_mut().enumerate() {
            token.head = Some(heads[i]);
            token.deprel = Some(self.vocab.label_name(labels[i]).to_string());
        }
        Ok(out)
    }

    /// Treebank ids and their embedding rows, in table order (the reserved
    /// row is skipped).  Empty for mono-treebank models.
    pub fn treebank_embeddings(&self) -> Vec<(String, Vec<f64>)> {
        let Some(tb_emb) = self.handles.tb_emb else {
            return Vec::new();
        };
        let tensor = &self.params.get(tb_emb).value;
        self.vocab
            .treebank_names()
            .iter()
            .enumerate()
            .skip(1)
            .map(|(row, name)| (name.clone(), tensor.row(row).to_vec()))
            .collect()
    }
}
