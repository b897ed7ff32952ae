//! Deterministic synthetic treebanks.
//!
//! Used by the test suite and the documentation: random (possibly
//! non-projective) trees for oracle checks, fully random annotated treebanks
//! for evaluation round trips, and a tiny template grammar that produces
//! learnable sentences for end-to-end training runs.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::conllu::{Sentence, Token, Treebank};

/// Uniformly samples a head for each token and rejects until the result is a
/// single-rooted acyclic tree. `heads[i]` is the head of token `i + 1`.
pub fn random_tree(n: usize, rng: &mut impl Rng) -> Vec<usize> {
    assert!(n >= 1);
    loop {
        let heads: Vec<usize> = (1..=n)
            .map(|dep| loop {
                let h = rng.gen_range(0..=n);
                if h != dep {
                    break h;
                }
            })
            .collect();
        if heads.iter().filter(|&&h| h == 0).count() != 1 {
            continue;
        }
        let ok = (1..=n).all(|start| {
            let mut cur = start;
            let mut steps = 0;
            while cur != 0 && steps <= n {
                cur = heads[cur - 1];
                steps += 1;
            }
            cur == 0
        });
        if ok {
            return heads;
        }
    }
}

/// True if some pair of arcs (including the root arc) crosses.
pub fn is_non_projective(heads: &[usize]) -> bool {
    let arcs: Vec<(usize, usize)> =
        heads.iter().enumerate().map(|(i, &h)| (h.min(i + 1), h.max(i + 1))).collect();
    for (i, &(a1, b1)) in arcs.iter().enumerate() {
        for &(a2, b2) in &arcs[i + 1..] {
            if (a1 < a2 && a2 < b1 && b1 < b2) || (a2 < a1 && a1 < b2 && b2 < b1) {
                return true;
            }
        }
    }
    false
}

const UPOS_SET: [&str; 6] = ["NOUN", "VERB", "DET", "ADJ", "ADP", "ADV"];
const LABEL_SET: [&str; 8] =
    ["nsubj", "obj", "det", "amod", "advmod", "nmod", "nmod:poss", "obl:tmod"];
const FEAT_CHOICES: [(&str, &str); 4] =
    [("Number", "Sing"), ("Number", "Plur"), ("Gender", "Fem"), ("Tense", "Past")];

/// A sentence with random forms, tags, features, and a random tree over it.
/// The root arc is always labeled `root`.
pub fn random_sentence(n: usize, rng: &mut impl Rng) -> Sentence {
    let heads = random_tree(n, rng);
    let mut sentence = Sentence::default();
    for i in 1..=n {
        let len = rng.gen_range(1..=6);
        let form: String = (0..len).map(|_| rng.gen_range(b'a'..=b'z') as char).collect();
        let mut token = Token::new(i, &form);
        token.lemma = form.to_lowercase();
        token.upos = UPOS_SET.choose(rng).unwrap().to_string();
        if rng.gen_bool(0.5) {
            token.feats.push({
                let (a, v) = FEAT_CHOICES.choose(rng).unwrap();
                (a.to_string(), v.to_string())
            });
        }
        token.head = Some(heads[i - 1]);
        token.deprel = Some(if heads[i - 1] == 0 {
            "root".to_string()
        } else {
            LABEL_SET.choose(rng).unwrap().to_string()
        });
        sentence.tokens.push(token);
    }
    sentence
}

/// A treebank of [`random_sentence`]s with lengths in `1..=max_len`.
pub fn random_treebank(id: &str, sentences: usize, max_len: usize, rng: &mut impl Rng) -> Treebank {
    let sents =
        (0..sentences).map(|_| random_sentence(rng.gen_range(1..=max_len), rng)).collect();
    Treebank::new(id, sents)
}

const DETS: [&str; 2] = ["the", "a"];
const NOUNS: [&str; 8] = ["dog", "cat", "bird", "fish", "horse", "cow", "fox", "owl"];
const VERBS: [&str; 4] = ["sees", "likes", "chases", "finds"];
const ADJS: [&str; 3] = ["big", "small", "red"];
const ADPS: [&str; 2] = ["near", "under"];

/// One sentence from a small subject-verb-object grammar with optional
/// adjectives and an optional prepositional phrase, fully annotated and
/// always projective. The grammar is deliberately simple enough for a tiny
/// model to learn, while using several labels and tags.
pub fn grammar_sentence(rng: &mut impl Rng) -> Sentence {
    // Noun phrase: DET (ADJ)? NOUN; returns the index of its head noun.
    fn noun_phrase(
        rng: &mut impl Rng,
        tokens: &mut Vec<(String, &'static str, usize, &'static str)>,
    ) -> usize {
        let det = DETS.choose(rng).unwrap().to_string();
        let adj = rng.gen_bool(0.4).then(|| ADJS.choose(rng).unwrap().to_string());
        let noun = NOUNS.choose(rng).unwrap().to_string();
        let noun_idx = tokens.len() + 1 + 1 + usize::from(adj.is_some());
        tokens.push((det, "DET", noun_idx, "det"));
        if let Some(adj) = adj {
            tokens.push((adj, "ADJ", noun_idx, "amod"));
        }
        tokens.push((noun, "NOUN", 0, "root")); // head fixed up by caller
        noun_idx
    }

    let mut tokens: Vec<(String, &'static str, usize, &'static str)> = Vec::new();
    let subj = noun_phrase(rng, &mut tokens);
    let verb_idx = tokens.len() + 1;
    tokens.push((VERBS.choose(rng).unwrap().to_string(), "VERB", 0, "root"));
    tokens[subj - 1].2 = verb_idx;
    tokens[subj - 1].3 = "nsubj";
    let obj = noun_phrase(rng, &mut tokens);
    tokens[obj - 1].2 = verb_idx;
    tokens[obj - 1].3 = "obj";
    if rng.gen_bool(0.5) {
        let adp_idx = tokens.len() + 1;
        tokens.push((ADPS.choose(rng).unwrap().to_string(), "ADP", 0, "case"));
        let pobj = noun_phrase(rng, &mut tokens);
        tokens[adp_idx - 1].2 = pobj;
        tokens[pobj - 1].2 = obj;
        tokens[pobj - 1].3 = "nmod";
    }

    let mut sentence = Sentence::default();
    for (i, (form, upos, head, deprel)) in tokens.into_iter().enumerate() {
        let mut token = Token::new(i + 1, &form);
        token.lemma = form.clone();
        token.upos = upos.to_string();
        token.head = Some(head);
        token.deprel = Some(deprel.to_string());
        sentence.tokens.push(token);
    }
    sentence
}

/// A treebank of grammar sentences.
pub fn grammar_treebank(id: &str, sentences: usize, rng: &mut impl Rng) -> Treebank {
    Treebank::new(id, (0..sentences).map(|_| grammar_sentence(rng)).collect())
}
