//! Multi-treebank training with the static-dynamic oracle.
//!
//! Each epoch draws a fresh capped sample from every treebank, shuffles the
//! union, and runs one greedy pass per sentence.  At every configuration the
//! candidate transitions are split by exact cost into correct (zero cost,
//! plus swap whenever the static oracle mandates it) and wrong; a margin of
//! one is enforced between the best correct and the best wrong candidate.
//! The parser follows the best correct transition, except that a mandated
//! swap is always taken and, with probability `p_agg`, a higher-scoring
//! wrong transition is followed instead to expose training to its own
//! mistakes.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::conllu::Sentence;
use crate::eval::align_tokens;
use crate::neural::{Adam, ParamSet, Tape};
use crate::transitions::{
    swap_mandated, Config, CostCache, GoldTree, Transition, TransitionKind, DEFAULT_COST_BUDGET,
};

use super::{Hyperparams, Model, ParserError, PretrainedTable, Vocabulary};

/// One treebank's training material.  A pretrained table's `frozen` flag
/// decides whether the whole word matrix is trainable.
pub struct TreebankData {
    pub id: String,
    pub train: Vec<Sentence>,
    pub dev: Vec<Sentence>,
    pub pretrained: Option<PretrainedTable>,
}

/// Parameters snapshotted after one epoch.
pub struct Checkpoint {
    /// 1-based epoch number.
    pub epoch: usize,
    pub params: ParamSet,
}

/// A distinct, reproducible random stream per epoch.
fn epoch_rng(seed: u64, epoch: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (epoch as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

/// Indices of this epoch's sample: everything when the treebank fits under
/// the cap, otherwise a uniform sample without replacement.
fn sample_indices(len: usize, cap: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    if len <= cap {
        (0..len).collect()
    } else {
        rand::seq::index::sample(rng, len, cap).into_vec()
    }
}

fn gold_of(vocab: &Vocabulary, id: &str, index: usize, sentence: &Sentence) -> Result<GoldTree, ParserError> {
    let mut heads = Vec::with_capacity(sentence.tokens.len());
    let mut labels = Vec::with_capacity(sentence.tokens.len());
    for token in &sentence.tokens {
        let head = token.head.ok_or_else(|| ParserError::BadTraining {
            id: id.to_string(),
            sentence: index,
            message: format!("token {} has no head", token.id),
        })?;
        let deprel = token.deprel.as_deref().ok_or_else(|| ParserError::BadTraining {
            id: id.to_string(),
            sentence: index,
            message: format!("token {} has no relation", token.id),
        })?;
        let label = vocab.label_index(deprel).ok_or_else(|| ParserError::BadTraining {
            id: id.to_string(),
            sentence: index,
            message: format!("relation {deprel:?} missing from the label table"),
        })?;
        heads.push(head);
        labels.push(label);
    }
    Ok(GoldTree::new(&heads, &labels)?)
}

struct Prepared {
    model: Model,
    /// Gold trees parallel to each treebank's training sentences.
    golds: Vec<Vec<GoldTree>>,
}

fn prepare(
    data: &[TreebankData],
    hyper: &Hyperparams,
    translit: &BTreeMap<char, char>,
    proxies: &BTreeMap<String, String>,
    seed: u64,
) -> Result<Prepared, ParserError> {
    hyper.validate()?;
    if data.is_empty() {
        return Err(ParserError::NoTreebanks);
    }
    for (i, d) in data.iter().enumerate() {
        if d.train.is_empty() {
            return Err(ParserError::EmptyTreebank { id: d.id.clone() });
        }
        if data[..i].iter().any(|other| other.id == d.id) {
            return Err(ParserError::DuplicateTreebank { id: d.id.clone() });
        }
    }
    let banks: Vec<(String, &[Sentence])> = data
        .iter()
        .map(|d| (d.id.clone(), d.train.as_slice()))
        .collect();
    let vocab = Vocabulary::build(&banks, translit, hyper.feats_emb_dim > 0);
    let golds: Result<Vec<Vec<GoldTree>>, ParserError> = data
        .iter()
        .map(|d| {
            d.train
                .iter()
                .enumerate()
                .map(|(i, s)| gold_of(&vocab, &d.id, i, s))
                .collect()
        })
        .collect();
    let pretrained: Vec<(String, PretrainedTable)> = data
        .iter()
        .filter_map(|d| d.pretrained.clone().map(|t| (d.id.clone(), t)))
        .collect();
    let model = Model::build(hyper, vocab, proxies.clone(), translit.clone(), pretrained, seed)?;
    Ok(Prepared { model, golds: golds? })
}

/// The per-sentence oracle pass: accumulates the hinge loss over all
/// configurations, then takes one optimizer step.
fn train_step(
    model: &mut Model,
    opt: &mut Adam,
    sentence: &Sentence,
    gold: &GoldTree,
    treebank: &str,
    rng: &mut ChaCha8Rng,
) -> Result<(), ParserError> {
    let n = sentence.tokens.len();
    if n == 0 {
        return Ok(());
    }
    let mut tape = Tape::new();
    let ctx = model.encode_sentence(
        &model.params,
        &mut tape,
        &sentence.tokens,
        Some(treebank),
        Some(rng),
    )?;
    let mut config = Config::initial(n);
    let mut cache = CostCache::new(DEFAULT_COST_BUDGET);
    let n_labels = model.vocab.n_labels();
    let mut loss = None;

    while !config.is_terminal() {
        let (t_node, l_node) = model.score_config(&model.params, &mut tape, &config, &ctx);
        let t_vals = tape.value(t_node).to_vec();
        let l_vals = tape.value(l_node).to_vec();
        let mandated = swap_mandated(&config, gold);

        // Candidates in canonical order; strict comparisons keep the first
        // best, which realizes the shift < left < right < swap tie-break.
        // Per arc kind only the best-scoring label of each cost class is
        // kept, which is all the hinge and the follow rule ever look at.
        let mut correct: Vec<(f64, Transition)> = Vec::new();
        let mut wrong: Vec<(f64, Transition)> = Vec::new();

        if config.is_legal(TransitionKind::Shift) {
            let cost = cache.cost(&config, Transition::Shift, gold);
            let set = if cost == 0 { &mut correct } else { &mut wrong };
            set.push((t_vals[0], Transition::Shift));
        }
        for (kind, head_of_dep) in [
            (TransitionKind::LeftArc, config.buffer_front()),
            (TransitionKind::RightArc, config.stack_item(1)),
        ] {
            if !config.is_legal(kind) {
                continue;
            }
            let s0 = config.stack_item(0).expect("arc transitions need a stack item");
            let head = head_of_dep.expect("legality implies the head position exists");
            let make: fn(usize) -> Transition = match kind {
                TransitionKind::LeftArc => Transition::LeftArc,
                _ => Transition::RightArc,
            };
            let (kind_idx, base) = match kind {
                TransitionKind::LeftArc => (1usize, 0usize),
                _ => (2usize, n_labels),
            };
            // The structural part of the cost does not depend on the label,
            // so one evaluation covers the whole label set.  With the right
            // head, only the gold label avoids the immediate unit; with a
            // wrong head every label costs the same (possibly zero, when the
            // gold head is no longer reachable anyway).
            let head_match = gold.head_of(s0) == head;
            let gold_label = if head_match { gold.label_of(s0) } else { 0 };
            let base_cost = cache.cost(&config, make(gold_label), gold);
            let best_label = |skip: Option<usize>| -> Option<usize> {
                let mut best: Option<usize> = None;
                for l in 0..n_labels {
                    if skip == Some(l) {
                        continue;
                    }
                    if best.is_none_or(|b| l_vals[base + l] > l_vals[base + b]) {
                        best = Some(l);
                    }
                }
                best
            };
            if head_match {
                let target = if base_cost == 0 { &mut correct } else { &mut wrong };
                target.push((t_vals[kind_idx] + l_vals[base + gold_label], make(gold_label)));
                if let Some(l) = best_label(Some(gold_label)) {
                    // All non-gold labels pay at least the immediate unit.
                    wrong.push((t_vals[kind_idx] + l_vals[base + l], make(l)));
                }
            } else if let Some(l) = best_label(None) {
                let target = if base_cost == 0 { &mut correct } else { &mut wrong };
                target.push((t_vals[kind_idx] + l_vals[base + l], make(l)));
            }
        }
        let swap_legal = config.is_legal(TransitionKind::Swap);
        if swap_legal {
            let set = if mandated { &mut correct } else { &mut wrong };
            set.push((t_vals[3], Transition::Swap));
        }

        let best_of = |set: &[(f64, Transition)]| {
            set.iter()
                .copied()
                .reduce(|best, cand| if cand.0 > best.0 { cand } else { best })
        };
        let best_correct = best_of(&correct);
        let best_wrong = best_of(&wrong);

        if let (Some((correct_score, bc)), Some((wrong_score, bw))) = (best_correct, best_wrong) {
            if 1.0 + wrong_score - correct_score > 0.0 {
                let sc = model.transition_score_node(&mut tape, t_node, l_node, bc);
                let sw = model.transition_score_node(&mut tape, t_node, l_node, bw);
                let diff = tape.sub(sw, sc);
                let margin = tape.add_scalar(diff, 1.0);
                let hinge = tape.relu(margin);
                loss = Some(match loss {
                    None => hinge,
                    Some(acc) => tape.add(acc, hinge),
                });
            }
        }

        // A mandated swap is always taken when it is available.  Off the
        // gold path the swap may have become illegal (or every legal
        // transition may carry cost); then the best remaining candidate is
        // followed without a loss term against it.
        let follow = if mandated && swap_legal {
            Transition::Swap
        } else {
            match (best_correct, best_wrong) {
                (Some((correct_score, bc)), Some((wrong_score, bw))) => {
                    if wrong_score > correct_score && rng.gen::<f64>() < model.hyper.p_agg {
                        bw
                    } else {
                        bc
                    }
                }
                (Some((_, bc)), None) => bc,
                (None, Some((_, bw))) => bw,
                (None, None) => unreachable!("a non-terminal configuration has legal transitions"),
            }
        };
        config
            .apply(follow)
            .expect("followed transitions come from the legal set");
    }

    if let Some(loss) = loss {
        tape.backward(&mut model.params, loss)?;
        opt.step(&mut model.params)?;
    }
    Ok(())
}

fn run_epoch(
    model: &mut Model,
    data: &[TreebankData],
    golds: &[Vec<GoldTree>],
    epoch: usize,
    seed: u64,
    opt: &mut Adam,
) -> Result<(), ParserError> {
    let mut rng = epoch_rng(seed, epoch);
    let cap = model.hyper.sentence_cap;
    let mut batch: Vec<(usize, usize)> = Vec::new();
    for (b, d) in data.iter().enumerate() {
        for i in sample_indices(d.train.len(), cap, &mut rng) {
            batch.push((b, i));
        }
    }
    batch.shuffle(&mut rng);
    for (b, i) in batch {
        train_step(model, opt, &data[b].train[i], &golds[b][i], &data[b].id, &mut rng)?;
    }
    Ok(())
}

/// Mean LAS over every treebank that has development data, parsed with the
/// current parameters (gold tokenization and tags, as during training).
fn mean_dev_las(model: &Model, data: &[TreebankData]) -> Result<Option<f64>, ParserError> {
    let with_dev: Vec<&TreebankData> = data.iter().filter(|d| !d.dev.is_empty()).collect();
    if with_dev.is_empty() {
        return Ok(None);
    }
    let mut total = 0.0;
    for d in &with_dev {
        let parsed: Result<Vec<Sentence>, ParserError> = d
            .dev
            .iter()
            .map(|s| model.parse_sentence(s, Some(&d.id)))
            .collect();
        total += align_tokens(&parsed?, &d.dev)?.score_las().f1;
    }
    Ok(Some(total / with_dev.len() as f64))
}

/// Trains for the configured number of epochs and snapshots the parameters
/// after each one.  Returns the model in its final-epoch state along with
/// all checkpoints; pick one with [`select_epoch`].
pub fn train_multi(
    data: &[TreebankData],
    hyper: &Hyperparams,
    translit: &BTreeMap<char, char>,
    proxies: &BTreeMap<String, String>,
    seed: u64,
) -> Result<(Model, Vec<Checkpoint>), ParserError> {
    let Prepared { mut model, golds } = prepare(data, hyper, translit, proxies, seed)?;
    let mut opt = Adam::new(1e-3);
    let mut checkpoints = Vec::with_capacity(model.hyper.epochs);
    for epoch in 1..=model.hyper.epochs {
        run_epoch(&mut model, data, &golds, epoch, seed, &mut opt)?;
        checkpoints.push(Checkpoint {
            epoch,
            params: model.params.clone(),
        });
    }
    Ok((model, checkpoints))
}

/// Installs the checkpoint with the best mean dev LAS into `model` and
/// returns its epoch.  Ties go to the earliest epoch; with no development
/// data at all, the final epoch wins by rule.
pub fn select_epoch(
    model: &mut Model,
    checkpoints: Vec<Checkpoint>,
    data: &[TreebankData],
) -> Result<usize, ParserError> {
    assert!(!checkpoints.is_empty(), "training produced no checkpoints");
    let has_dev = data.iter().any(|d| !d.dev.is_empty());
    if !has_dev {
        let last = checkpoints.into_iter().last().expect("nonempty");
        model.params = last.params;
        return Ok(last.epoch);
    }
    let mut best: Option<(f64, usize)> = None;
    for cp in &checkpoints {
        model.params = cp.params.clone();
        let mean = mean_dev_las(model, data)?.expect("has_dev was checked");
        if best.is_none_or(|(b, _)| mean > b) {
            best = Some((mean, cp.epoch));
        }
    }
    let (_, epoch) = best.expect("at least one checkpoint was scored");
    model.params = checkpoints
        .into_iter()
        .find(|c| c.epoch == epoch)
        .expect("chosen epoch exists")
        .params;
    Ok(epoch)
}

/// Trains and selects in one pass, holding at most one extra parameter
/// snapshot instead of one per epoch.  Returns the model with the selected
/// parameters installed and the chosen epoch.
pub fn train_and_select(
    data: &[TreebankData],
    hyper: &Hyperparams,
    translit: &BTreeMap<char, char>,
    proxies: &BTreeMap<String, String>,
    seed: u64,
) -> Result<(Model, usize), ParserError> {
    let Prepared { mut model, golds } = prepare(data, hyper, translit, proxies, seed)?;
    let mut opt = Adam::new(1e-3);
    let mut best: Option<(f64, usize, ParamSet)> = None;
    let epochs = model.hyper.epochs;
    for epoch in 1..=epochs {
        run_epoch(&mut model, data, &golds, epoch, seed, &mut opt)?;
        if let Some(mean) = mean_dev_las(&model, data)? {
            log::info!("epoch {epoch}: mean dev LAS {mean:.2}");
            if best.as_ref().is_none_or(|(b, _, _)| mean > *b) {
                best = Some((mean, epoch, model.params.clone()));
            }
        }
    }
    match best {
        Some((_, epoch, params)) => {
            model.params = params;
            Ok((model, epoch))
        }
        None => Ok((model, epochs)),
    }
}
