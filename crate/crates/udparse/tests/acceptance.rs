//! End-to-end acceptance checks, one test per numbered criterion. Each test
//! prints a single `ACCEPTANCE <n> (<name>): PASS` or `... FAIL` line and
//! fails the build on any violation.

use std::panic::{catch_unwind, resume_unwind, AssertUnwindSafe};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn criterion<F: FnOnce()>(number: u32, name: &str, body: F) {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(()) => println!("ACCEPTANCE {number} ({name}): PASS"),
        Err(cause) => {
            println!("ACCEPTANCE {number} ({name}): FAIL");
            resume_unwind(cause);
        }
    }
}

mod oracle_completeness {
    use udparse::synth::random_tree;
    use udparse::transitions::{static_oracle, Config, GoldTree};

    use super::*;

    /// Criterion 2: oracle replay rebuilds 500 random trees (n <= 6),
    /// projective and non-projective, with exact labeled arcs.
    #[test]
    fn criterion_02_oracle_replay_reconstructs_gold_trees() {
        criterion(2, "oracle completeness", || {
            let mut rng = ChaCha8Rng::seed_from_u64(2002);
            for _ in 0..500 {
                let n = rng.gen_range(1..=6);
                let heads = random_tree(n, &mut rng);
                let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..4)).collect();
                let gold = GoldTree::new(&heads, &labels).unwrap();
                let mut config = Config::initial(n);
                let mut steps = 0;
                while !config.is_terminal() {
                    let t = static_oracle(&config, &gold).expect("oracle stuck on gold path");
                    config.apply(t).expect("oracle proposed an illegal transition");
                    steps += 1;
                    assert!(steps < 1000, "oracle did not terminate for {heads:?}");
                }
                let mut got: Vec<(usize, usize, usize)> =
                    config.arcs().iter().map(|a| (a.dep, a.head, a.label)).collect();
                got.sort_unstable();
                let want: Vec<(usize, usize, usize)> =
                    (1..=n).map(|d| (d, heads[d - 1], labels[d - 1])).collect();
                assert_eq!(got, want, "replay mismatch for {heads:?}");
            }
        });
    }
}

mod cost_exactness {
    use std::collections::{HashMap, HashSet, VecDeque};

    use udparse::synth::random_tree;
    use udparse::transitions::{dynamic_cost, swap_mandated, Config, GoldTree, Transition};

    use super::*;

    /// Stack then buffer, both bottom-to-top / front-to-back. Arcs and swap
    /// bookkeeping do not influence costs, so this identifies a configuration.
    type State = (Vec<usize>, Vec<usize>);

    /// Reference in-order numbering, written directly from the head array.
    fn proj_order(heads: &[usize]) -> Vec<usize> {
        let n = heads.len();
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); n + 1];
        for d in 1..=n {
            children[heads[d - 1]].push(d);
        }
        fn visit(node: usize, children: &[Vec<usize>], order: &mut [usize], next: &mut usize) {
            for &c in children[node].iter().filter(|&&c| c < node) {
                visit(c, children, order, next);
            }
            if node != 0 {
                order[node - 1] = *next;
                *next += 1;
            }
            for &c in children[node].iter().filter(|&&c| c > node) {
                visit(c, children, order, next);
            }
        }
        let mut order = vec![0; n];
        let mut next = 1;
        visit(0, &children, &mut order, &mut next);
        order
    }

    /// Minimal number of tokens that any completion from `state` pops with a
    /// wrong head, where completions may swap exactly when the projective
    /// order mandates it. Labels are free in the future, so they do not
    /// contribute. Exhaustive over all successor states.
    ///
    /// Recursion terminates because (token count, projective inversions of
    /// the stack-buffer sequence, buffer length) drops lexicographically on
    /// every move.
    fn future_loss(
        state: &State,
        heads: &[usize],
        proj: &[usize],
        memo: &mut HashMap<State, usize>,
    ) -> usize {
        let (stack, buffer) = state;
        if buffer.is_empty() && stack.len() == 1 {
            return 0;
        }
        if let Some(&v) = memo.get(state) {
            return v;
        }
        let mut best = usize::MAX;
        if !buffer.is_empty() {
            let mut s = stack.clone();
            let mut b = buffer.clone();
            s.push(b.remove(0));
            best = best.min(future_loss(&(s, b), heads, proj, memo));
        }
        if stack.len() >= 2 {
            let s0 = stack[stack.len() - 1];
            let s1 = stack[stack.len() - 2];
            let popped = stack[..stack.len() - 1].to_vec();
            if let Some(&b0) = buffer.first() {
                let miss = usize::from(heads[s0 - 1] != b0);
                best = best.min(miss + future_loss(&(popped.clone(), buffer.clone()), heads, proj, memo));
                if proj[s0 - 1] > proj[b0 - 1] {
                    let mut b = buffer.clone();
                    b.insert(1, s0);
                    best = best.min(future_loss(&(popped.clone(), b), heads, proj, memo));
                }
            }
            let miss = usize::from(heads[s0 - 1] != s1);
            best = best.min(miss + future_loss(&(popped, buffer.clone()), heads, proj, memo));
        }
        memo.insert(state.clone(), best);
        best
    }

    /// Loss delta of taking `t` from `state`: the labeled immediate miss plus
    /// the change in minimal future loss.
    fn transition_loss(
        state: &State,
        t: Transition,
        heads: &[usize],
        labels: &[usize],
        proj: &[usize],
        memo: &mut HashMap<State, usize>,
    ) -> usize {
        let (stack, buffer) = state;
        let (immediate, next) = match t {
            Transition::Shift => {
                let mut s = stack.clone();
                let mut b = buffer.clone();
                s.push(b.remove(0));
                (0, (s, b))
            }
            Transition::LeftArc(l) => {
                let s0 = *stack.last().unwrap();
                let b0 = buffer[0];
                let miss = usize::from(heads[s0 - 1] != b0 || labels[s0 - 1] != l);
                (miss, (stack[..stack.len() - 1].to_vec(), buffer.clone()))
            }
            Transition::RightArc(l) => {
                let s0 = *stack.last().unwrap();
                let s1 = stack[stack.len() - 2];
                let miss = usize::from(heads[s0 - 1] != s1 || labels[s0 - 1] != l);
                (miss, (stack[..stack.len() - 1].to_vec(), buffer.clone()))
            }
            Transition::Swap => unreachable!("swap is never costed"),
        };
        let after = future_loss(&next, heads, proj, memo);
        let before = future_loss(state, heads, proj, memo);
        (immediate + after).checked_sub(before).expect("taking a transition cannot reduce total loss")
    }

    fn key(config: &Config) -> State {
        (config.stack().to_vec(), config.buffer().iter().copied().collect())
    }

    /// Criterion 3: dynamic_cost equals the exhaustive-completion loss delta
    /// on every configuration reachable through legal non-swap transitions
    /// and mandated swaps, for 100 random gold trees with n <= 5.
    #[test]
    fn criterion_03_dynamic_cost_matches_exhaustive_search() {
        criterion(3, "dynamic-cost exactness", || {
            let mut rng = ChaCha8Rng::seed_from_u64(2003);
            let mut checked = 0u64;
            for _ in 0..100 {
                let n = rng.gen_range(1..=5);
                let heads = random_tree(n, &mut rng);
                let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..2)).collect();
                let gold = GoldTree::new(&heads, &labels).unwrap();
                let proj = proj_order(&heads);
                for d in 1..=n {
                    assert_eq!(proj[d - 1], gold.proj_of(d), "projective order disagrees");
                }

                let mut memo = HashMap::new();
                let initial = Config::initial(n);
                let mut seen = HashSet::from([key(&initial)]);
                let mut queue = VecDeque::from([initial]);
                while let Some(config) = queue.pop_front() {
                    let state = key(&config);
                    let candidates = [
                        Transition::Shift,
                        Transition::LeftArc(0),
                        Transition::LeftArc(1),
                        Transition::RightArc(0),
                        Transition::RightArc(1),
                    ];
                    for t in candidates {
                        if !config.is_legal(t.kind()) {
                            continue;
                        }
                        let got = dynamic_cost(&config, t, &gold);
                        let want = transition_loss(&state, t, &heads, &labels, &proj, &mut memo);
                        assert_eq!(
                            got, want,
                            "cost mismatch for {t:?} at {state:?} under heads {heads:?}"
                        );
                        checked += 1;
                        let mut next = config.clone();
                        next.apply(t).unwrap();
                        if seen.insert(key(&next)) {
                            queue.push_back(next);
                        }
                    }
                    if swap_mandated(&config, &gold) {
                        let mut next = config.clone();
                        next.apply(Transition::Swap).expect("mandated swap was illegal");
                        if seen.insert(key(&next)) {
                            queue.push_back(next);
                        }
                    }
                }
            }
            assert!(checked > 10_000, "only {checked} transitions checked");
        });
    }
}

mod gradient_soundness {
    use std::collections::BTreeMap;

    use udparse::conllu::{Sentence, Token};
    use udparse::neural::{grad_check, NodeId, ParamSet};
    use udparse::parser::{Hyperparams, Model, Vocabulary};
    use udparse::transitions::{Config, Transition, TransitionKind};

    use super::*;

    fn sentence(words: &[(&str, &str)]) -> Sentence {
        let mut s = Sentence::default();
        for (i, (form, upos)) in words.iter().enumerate() {
            let mut t = Token::new(i + 1, form);
            t.upos = upos.to_string();
            s.tokens.push(t);
        }
        s
    }

    /// Criterion 1: analytic gradients of the full composed parser (char
    /// BiLSTM, word + POS + treebank embeddings, 2-layer word BiLSTM, both
    /// MLPs) match central finite differences over 20 seeds.
    #[test]
    fn criterion_01_composed_parser_gradients_match_finite_differences() {
        criterion(1, "gradient soundness", || {
            let hyper = Hyperparams {
                char_emb_dim: 3,
                char_hidden_dim: 2,
                word_emb_dim: 4,
                pos_emb_dim: 2,
                tb_emb_dim: 2,
                word_bilstm_layers: 2,
                word_hidden_dim: 3,
                mlp_hidden_dim: 4,
                ..Hyperparams::default()
            };
            let bank_a = vec![sentence(&[("ab", "X"), ("cd", "Y"), ("ef", "X")])];
            let bank_b = vec![sentence(&[("cd", "Y"), ("gh", "X"), ("ab", "Y")])];
            let mut worst = 0.0_f64;
            for seed in 0..20u64 {
                let vocab = Vocabulary::build(
                    &[
                        ("a".to_string(), bank_a.as_slice()),
                        ("b".to_string(), bank_b.as_slice()),
                    ],
                    &BTreeMap::new(),
                    false,
                );
                let mut model = Model::build(
                    &hyper,
                    vocab,
                    BTreeMap::new(),
                    BTreeMap::new(),
                    Vec::new(),
                    1000 + seed,
                )
                .unwrap();
                let mut params = std::mem::replace(&mut model.params, ParamSet::new());
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let report = grad_check(
                    &mut params,
                    |p, tape| {
                        let mut loss: Option<NodeId> = None;
                        for (bank, name) in [(&bank_a, "a"), (&bank_b, "b")] {
                            let s = &bank[0];
                            let ctx = model
                                .encode_sentence(p, tape, &s.tokens, Some(name), None)
                                .unwrap();
                            let mut config = Config::initial(s.tokens.len());
                            // Score several configurations so padded and
                            // filled feature slots both contribute.
                            for _ in 0..3 {
                                let (t, l) = model.score_config(p, tape, &config, &ctx);
                                let t = tape.tanh(t);
                                let l = tape.tanh(l);
                                let t = tape.sum(t);
                                let l = tape.sum(l);
                                let both = tape.add(t, l);
                                loss = Some(match loss {
                                    Some(acc) => tape.add(acc, both),
                                    None => both,
                                });
                                if config.is_legal(TransitionKind::Shift) {
                                    config.apply(Transition::Shift).unwrap();
                                }
                            }
                        }
                        loss.expect("loss was accumulated")
                    },
                    1e-5,
                    3,
                    &mut rng,
                )
                .unwrap();
                assert!(
                    report.max_rel_err < 1e-4,
                    "seed {seed}: rel err {} at {}[{}] (analytic {}, numeric {})",
                    report.max_rel_err,
                    report.worst_param,
                    report.worst_index,
                    report.analytic,
                    report.numeric
                );
                worst = worst.max(report.max_rel_err);
            }
            println!("  worst relative error over 20 seeds: {worst:.3e}");
        });
    }
}

mod overfit {
    use std::collections::{BTreeMap, HashSet};

    use udparse::conllu::Sentence;
    use udparse::eval::align_tokens;
    use udparse::parser::{train_multi, Hyperparams, TreebankData};
    use udparse::synth::grammar_sentence;

    use super::*;

    /// Criterion 4: the parser memorizes a 50-sentence treebank to at least
    /// 99% LAS within 30 epochs.
    #[test]
    fn criterion_04_overfits_fifty_sentences() {
        criterion(4, "overfit", || {
            let mut rng = ChaCha8Rng::seed_from_u64(2004);
            let mut seen = HashSet::new();
            let mut bank: Vec<Sentence> = Vec::new();
            // Deduplicate by form sequence so the target is consistent.
            while bank.len() < 50 {
                let s = grammar_sentence(&mut rng);
                let forms: Vec<String> = s.tokens.iter().map(|t| t.form.clone()).collect();
                if seen.insert(forms) {
                    bank.push(s);
                }
            }
            let hyper = Hyperparams {
                char_emb_dim: 8,
                char_hidden_dim: 6,
                word_emb_dim: 16,
                pos_emb_dim: 4,
                word_bilstm_layers: 1,
                word_hidden_dim: 16,
                mlp_hidden_dim: 24,
                epochs: 30,
                ..Hyperparams::default()
            };
            let data = vec![TreebankData {
                id: "t".to_string(),
                train: bank.clone(),
                dev: Vec::new(),
                pretrained: None,
            }];
            let (model, _) =
                train_multi(&data, &hyper, &BTreeMap::new(), &BTreeMap::new(), 2044).unwrap();
            let parsed: Vec<Sentence> =
                bank.iter().map(|s| model.parse_sentence(s, Some("t")).unwrap()).collect();
            let las = align_tokens(&parsed, &bank).unwrap().score_las().f1;
            println!("  training-set LAS after 30 epochs: {las:.2}");
            assert!(las >= 99.0, "training-set LAS {las:.2} < 99");
        });
    }
}

mod multi_treebank_trend {
    use std::collections::BTreeMap;

    use udparse::conllu::Sentence;
    use udparse::eval::align_tokens;
    use udparse::parser::{train_multi, Hyperparams, Model, TreebankData};
    use udparse::synth::grammar_sentence;

    use super::*;

    fn bank(n: usize, rng: &mut ChaCha8Rng) -> Vec<Sentence> {
        (0..n).map(|_| grammar_sentence(rng)).collect()
    }

    fn held_out_las(model: &Model, treebank: &str, test: &[Sentence]) -> f64 {
        let parsed: Vec<Sentence> =
            test.iter().map(|s| model.parse_sentence(s, Some(treebank)).unwrap()).collect();
        align_tokens(&parsed, test).unwrap().score_las().f1
    }

    /// Criterion 5: adding a 200-sentence donor treebank to a 10-sentence
    /// treebank does not hurt held-out accuracy, on average over 5 seeds.
    #[test]
    fn criterion_05_donor_treebank_does_not_hurt() {
        criterion(5, "multi-treebank trend", || {
            let hyper = Hyperparams {
                char_emb_dim: 8,
                char_hidden_dim: 6,
                word_emb_dim: 12,
                pos_emb_dim: 4,
                tb_emb_dim: 4,
                word_bilstm_layers: 1,
                word_hidden_dim: 12,
                mlp_hidden_dim: 16,
                epochs: 8,
                ..Hyperparams::default()
            };
            let mut mono_scores = Vec::new();
            let mut multi_scores = Vec::new();
            for seed in 0..5u64 {
                let mut rng = ChaCha8Rng::seed_from_u64(3000 + seed);
                let low = bank(10, &mut rng);
                let donor = bank(200, &mut rng);
                let test = bank(40, &mut rng);

                let mono_data = vec![TreebankData {
                    id: "low".to_string(),
                    train: low.clone(),
                    dev: Vec::new(),
                    pretrained: None,
                }];
                let (mono_model, _) = train_multi(
                    &mono_data,
                    &hyper,
                    &BTreeMap::new(),
                    &BTreeMap::new(),
                    7000 + seed,
                )
                .unwrap();
                mono_scores.push(held_out_las(&mono_model, "low", &test));

                let multi_data = vec![
                    TreebankData {
                        id: "low".to_string(),
                        train: low,
                        dev: Vec::new(),
                        pretrained: None,
                    },
                    TreebankData {
                        id: "donor".to_string(),
                        train: donor,
                        dev: Vec::new(),
                        pretrained: None,
                    },
                ];
                let (multi_model, _) = train_multi(
                    &multi_data,
                    &hyper,
                    &BTreeMap::new(),
                    &BTreeMap::new(),
                    7000 + seed,
                )
                .unwrap();
                multi_scores.push(held_out_las(&multi_model, "low", &test));
            }
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            let mono_mean = mean(&mono_scores);
            let multi_mean = mean(&multi_scores);
            println!("  mono mean LAS {mono_mean:.2}, multi mean LAS {multi_mean:.2}");
            assert!(
                multi_mean >= mono_mean,
                "multi mean {multi_mean:.2} < mono mean {mono_mean:.2} \
                 (per-seed mono {mono_scores:?}, multi {multi_scores:?})"
            );
        });
    }
}

mod word_dropout_rate {
    use std::collections::BTreeMap;

    use udparse::conllu::{Sentence, Token};
    use udparse::neural::Tape;
    use udparse::parser::{Hyperparams, Model, Vocabulary};

    use super::*;

    /// Criterion 6: a frequency-1 word is swapped for the OOV vector at rate
    /// alpha/(alpha+1) = 0.2 with the default alpha = 0.25, within 0.02 over
    /// 10k draws.
    #[test]
    fn criterion_06_oov_replacement_rate() {
        criterion(6, "word-dropout rate", || {
            let hyper = Hyperparams {
                char_emb_dim: 3,
                char_hidden_dim: 2,
                word_emb_dim: 4,
                pos_emb_dim: 2,
                word_bilstm_layers: 1,
                word_hidden_dim: 3,
                mlp_hidden_dim: 4,
                // Mask dropouts off so the word slice is exactly either the
                // embedding row or the OOV vector.
                word_dropout: 0.0,
                char_dropout: 0.0,
                ..Hyperparams::default()
            };
            assert_eq!(hyper.alpha_oov, 0.25, "default alpha changed");
            let mut s = Sentence::default();
            for (i, (form, upos)) in [("cat", "NOUN"), ("sat", "VERB")].iter().enumerate() {
                let mut t = Token::new(i + 1, form);
                t.upos = upos.to_string();
                s.tokens.push(t);
            }
            let bank = vec![s];
            let vocab = Vocabulary::build(
                &[("t".to_string(), bank.as_slice())],
                &BTreeMap::new(),
                false,
            );
            let model = Model::build(
                &hyper,
                vocab,
                BTreeMap::new(),
                BTreeMap::new(),
                Vec::new(),
                5,
            )
            .unwrap();
            let wi = model.vocab.word_index("cat");
            assert_eq!(model.vocab.word_freq(wi), 1, "fixture word is not frequency 1");
            let resolved = model.resolve_treebank(None).unwrap();
            let token = bank[0].tokens[0].clone();
            let dim = model.hyper.word_emb_dim;

            // Reference word slices: the trained embedding row (plain
            // composition) and the OOV vector (unknown form in train mode).
            let mut tape = Tape::new();
            let node = model.compose_input(&model.params, &mut tape, &token, &resolved, None);
            let emb_slice = tape.value(node)[..dim].to_vec();
            let unknown = Token::new(1, "zzz");
            let mut aux_rng = ChaCha8Rng::seed_from_u64(0);
            let mut tape = Tape::new();
            let node = model.compose_input(
                &model.params,
                &mut tape,
                &unknown,
                &resolved,
                Some(&mut aux_rng),
            );
            let oov_slice = tape.value(node)[..dim].to_vec();
            assert_ne!(emb_slice, oov_slice);

            let mut rng = ChaCha8Rng::seed_from_u64(2006);
            let mut replaced = 0usize;
            for _ in 0..10_000 {
                let mut tape = Tape::new();
                let node = model.compose_input(
                    &model.params,
                    &mut tape,
                    &token,
                    &resolved,
                    Some(&mut rng),
                );
                let slice = &tape.value(node)[..dim];
                if slice == oov_slice.as_slice() {
                    replaced += 1;
                } else {
                    assert_eq!(
                        slice,
                        emb_slice.as_slice(),
                        "composition is neither the embedding nor the OOV vector"
                    );
                }
            }
            let rate = replaced as f64 / 10_000.0;
            println!("  empirical replacement rate: {rate:.4}");
            assert!((rate - 0.2).abs() <= 0.02, "rate {rate:.4} outside 0.2 +/- 0.02");
        });
    }
}

mod eval_identity {
    use udparse::conllu::{Sentence, Token};
    use udparse::eval::evaluate;
    use udparse::synth::random_treebank;

    use super::*;

    fn sentence(rows: &[(&str, &str, usize, &str)]) -> Sentence {
        let mut s = Sentence::default();
        for (i, (form, upos, head, deprel)) in rows.iter().enumerate() {
            let mut t = Token::new(i + 1, form);
            t.upos = upos.to_string();
            t.head = Some(*head);
            t.deprel = Some(deprel.to_string());
            s.tokens.push(t);
        }
        s
    }

    /// Criterion 7: score(X, X) is 100.00 everywhere on 100 random
    /// treebanks, and a constructed 3-sentence file with one segmentation
    /// error and one label error matches hand-computed scores to 0.01.
    #[test]
    fn criterion_07_eval_identity_and_hand_fixture() {
        criterion(7, "evaluation identity and hand oracle", || {
            let mut rng = ChaCha8Rng::seed_from_u64(2007);
            for i in 0..100 {
                let bank = random_treebank(&format!("r{i}"), 8, 7, &mut rng);
                let report = evaluate(&bank.sentences, &bank.sentences).unwrap();
                for (name, score) in report.rows() {
                    assert_eq!(score.precision, 100.0, "{name} precision on identity");
                    assert_eq!(score.recall, 100.0, "{name} recall on identity");
                    assert_eq!(score.f1, 100.0, "{name} f1 on identity");
                }
            }

            // Gold: "the cat", "dogs run", "it rains". The system splits
            // "dogs" into "dog"+"s" (segmentation error) and labels "it" as
            // obj instead of nsubj (label error).
            let gold = vec![
                sentence(&[("the", "DET", 2, "det"), ("cat", "NOUN", 0, "root")]),
                sentence(&[("dogs", "NOUN", 2, "nsubj"), ("run", "VERB", 0, "root")]),
                sentence(&[("it", "PRON", 2, "nsubj"), ("rains", "VERB", 0, "root")]),
            ];
            let system = vec![
                sentence(&[("the", "DET", 2, "det"), ("cat", "NOUN", 0, "root")]),
                sentence(&[
                    ("dog", "NOUN", 3, "nsubj"),
                    ("s", "NOUN", 3, "dep"),
                    ("run", "VERB", 0, "root"),
                ]),
                sentence(&[("it", "PRON", 2, "obj"), ("rains", "VERB", 0, "root")]),
            ];
            let report = evaluate(&system, &gold).unwrap();
            // 5 of 7 system words align with 5 of 6 gold words; 4 aligned
            // words carry correct head+label; content words are 6 (system)
            // and 5 (gold) with 3 full MLAS matches.
            let expect = [
                ("LAS", 400.0 / 7.0, 400.0 / 6.0, 800.0 / 13.0),
                ("MLAS", 50.0, 60.0, 600.0 / 11.0),
                ("Sentences", 100.0, 100.0, 100.0),
                ("Words", 500.0 / 7.0, 500.0 / 6.0, 1000.0 / 13.0),
                ("UPOS", 500.0 / 7.0, 500.0 / 6.0, 1000.0 / 13.0),
                ("UFeats", 500.0 / 7.0, 500.0 / 6.0, 1000.0 / 13.0),
            ];
            for ((name, score), (want_name, p, r, f)) in report.rows().iter().zip(expect) {
                assert_eq!(*name, want_name);
                assert!((score.precision - p).abs() < 0.01, "{name} precision {}", score.precision);
                assert!((score.recall - r).abs() < 0.01, "{name} recall {}", score.recall);
                assert!((score.f1 - f).abs() < 0.01, "{name} f1 {}", score.f1);
            }
        });
    }
}

mod alignment_optimality {
    use std::collections::HashMap;

    use udparse::segment::{bead_cost, gale_church_align, vote_boundaries, AlignmentBead, BeadKind};

    use super::*;

    /// Cheapest total cost over every bead sequence, computed over suffixes
    /// with memoization (top-down, independent of the aligner's bottom-up
    /// prefix recurrence).
    fn suffix_optimum(
        src: &[usize],
        tgt: &[usize],
        i: usize,
        j: usize,
        memo: &mut HashMap<(usize, usize), Option<f64>>,
    ) -> Option<f64> {
        if i == src.len() && j == tgt.len() {
            return Some(0.0);
        }
        if let Some(&v) = memo.get(&(i, j)) {
            return v;
        }
        let mut best: Option<f64> = None;
        for kind in BeadKind::ALL {
            let (ds, dt) = kind.counts();
            if i + ds > src.len() || j + dt > tgt.len() {
                continue;
            }
            if let Some(rest) = suffix_optimum(src, tgt, i + ds, j + dt, memo) {
                let total = bead_cost(
                    kind,
                    src[i..i + ds].iter().sum(),
                    tgt[j..j + dt].iter().sum(),
                ) + rest;
                if best.is_none_or(|b| total < b) {
                    best = Some(total);
                }
            }
        }
        memo.insert((i, j), best);
        best
    }

    /// Plain enumeration of every bead sequence, no memoization at all; used
    /// to cross-check the memoized oracle on small instances.
    fn enumerate_optimum(src: &[usize], tgt: &[usize], i: usize, j: usize) -> Option<f64> {
        if i == src.len() && j == tgt.len() {
            return Some(0.0);
        }
        let mut best: Option<f64> = None;
        for kind in BeadKind::ALL {
            let (ds, dt) = kind.counts();
            if i + ds > src.len() || j + dt > tgt.len() {
                continue;
            }
            if let Some(rest) = enumerate_optimum(src, tgt, i + ds, j + dt) {
                let total = bead_cost(
                    kind,
                    src[i..i + ds].iter().sum(),
                    tgt[j..j + dt].iter().sum(),
                ) + rest;
                if best.is_none_or(|b| total < b) {
                    best = Some(total);
                }
            }
        }
        best
    }

    /// Criterion 8: the alignment DP matches exhaustive search on 1000
    /// random profiles with up to 8 sentences per side, and the 3-of-4
    /// boundary vote accepts exactly the expected set.
    #[test]
    fn criterion_08_alignment_dp_and_voting() {
        criterion(8, "alignment optimality and voting", || {
            let mut rng = ChaCha8Rng::seed_from_u64(2008);
            for case in 0..1000 {
                let n = rng.gen_range(0..=8);
                let m = rng.gen_range(0..=8);
                let src: Vec<usize> = (0..n).map(|_| rng.gen_range(1..=80)).collect();
                let tgt: Vec<usize> = (0..m).map(|_| rng.gen_range(1..=80)).collect();
                let mut memo = HashMap::new();
                let oracle = suffix_optimum(&src, &tgt, 0, 0, &mut memo)
                    .expect("all bead kinds enabled, so a cover exists");
                if n <= 5 && m <= 5 {
                    let brute = enumerate_optimum(&src, &tgt, 0, 0).unwrap();
                    assert!(
                        (oracle - brute).abs() < 1e-9,
                        "case {case}: memoized oracle {oracle} vs enumeration {brute}"
                    );
                }
                let beads = gale_church_align(&src, &tgt).unwrap();
                let total: f64 = beads.iter().map(|b| b.cost).sum();
                assert!(
                    (total - oracle).abs() < 1e-9,
                    "case {case}: dp cost {total} vs exhaustive {oracle} for {src:?} / {tgt:?}"
                );
                // Structural invariants: contiguous monotone full cover.
                let (mut i, mut j) = (0, 0);
                for bead in &beads {
                    assert_eq!(bead.src.start, i);
                    assert_eq!(bead.tgt.start, j);
                    i = bead.src.end;
                    j = bead.tgt.end;
                }
                assert_eq!((i, j), (n, m));
            }

            // Boundary voting over four parallel corpora.
            let with_ends = |ends: &[usize]| -> Vec<AlignmentBead> {
                let mut beads = Vec::new();
                let mut start = 0;
                for (t, &end) in ends.iter().enumerate() {
                    beads.push(AlignmentBead {
                        kind: BeadKind::OneOne,
                        src: start..end,
                        tgt: t..t + 1,
                        cost: 0.0,
                    });
                    start = end;
                }
                beads
            };
            let alignments = vec![
                with_ends(&[1, 3, 6]),
                with_ends(&[1, 3, 4, 6]),
                with_ends(&[1, 3, 6]),
                with_ends(&[2, 4, 6]),
            ];
            let candidates = [1, 2, 3, 4, 5];
            // Position 1 is shared by 3 corpora, position 3 by 3, position 4
            // by 2, positions 2 and 5 by 1 and 0.
            assert_eq!(vote_boundaries(&candidates, &alignments, 3), vec![1, 3]);
            let all = vote_boundaries(&candidates, &alignments, 0);
            assert_eq!(all, vec![1, 2, 3, 4, 5], "threshold 0 keeps every candidate");
            let accepted = vote_boundaries(&candidates, &alignments, 2);
            assert!(accepted.iter().all(|p| candidates.contains(p)), "vote invented a position");
        });
    }
}

mod max_match_losslessness {
    use udparse::segment::{build_trie, max_match};

    use super::*;

    /// Criterion 9: segmentation is lossless on 10k fuzzed strings and the
    /// dictionary examples segment exactly as specified.
    #[test]
    fn criterion_09_max_match_is_lossless() {
        criterion(9, "max-match losslessness", || {
            let lex = build_trie(&["ab", "abc", "d"]);
            assert_eq!(max_match("abcd", &lex), vec!["abc", "d"]);
            assert_eq!(max_match("", &lex), Vec::<String>::new());
            let lex = build_trie(&["ab", "cd"]);
            assert_eq!(max_match("abxcd", &lex), vec!["ab", "x", "cd"]);

            let mut rng = ChaCha8Rng::seed_from_u64(2009);
            let alphabet: Vec<char> = "abcdeกขคฆ語言日本नम".chars().collect();
            let words: Vec<String> = (0..500)
                .map(|_| {
                    let len = rng.gen_range(1..=6);
                    (0..len).map(|_| alphabet[rng.gen_range(0..alphabet.len())]).collect()
                })
                .collect();
            let lex = build_trie(&words);
            for _ in 0..10_000 {
                let len = rng.gen_range(0..80);
                let text: String =
                    (0..len).map(|_| alphabet[rng.gen_range(0..alphabet.len())]).collect();
                let tokens = max_match(&text, &lex);
                assert_eq!(tokens.concat(), text, "lost characters segmenting {text:?}");
            }
        });
    }
}

mod cli_determinism {
    use udparse::cli::run;
    use udparse::conllu::write_conllu;
    use udparse::synth::grammar_sentence;

    use super::*;

    /// Criterion 10: `train` twice with one manifest and seed writes
    /// byte-identical model files, and `parse` twice writes byte-identical
    /// CoNLL-U (including across thread counts).
    #[test]
    fn criterion_10_cli_runs_are_byte_identical() {
        criterion(10, "CLI determinism", || {
            let dir = tempfile::tempdir().unwrap();
            let path = |name: &str| dir.path().join(name);
            let mut rng = ChaCha8Rng::seed_from_u64(2010);
            let mut bank = |n: usize| -> String {
                let sentences: Vec<_> = (0..n).map(|_| grammar_sentence(&mut rng)).collect();
                write_conllu(&sentences)
            };
            std::fs::write(path("a-train.conllu"), bank(6)).unwrap();
            std::fs::write(path("a-dev.conllu"), bank(3)).unwrap();
            std::fs::write(path("b-train.conllu"), bank(6)).unwrap();
            std::fs::write(
                path("a-vectors.txt"),
                "2 8\n\
                 the 0.1 0.2 0.3 0.4 0.5 0.6 0.7 0.8\n\
                 cat -0.1 -0.2 -0.3 -0.4 -0.5 -0.6 -0.7 -0.8\n",
            )
            .unwrap();
            std::fs::write(path("translit.txt"), "\u{cd} I\n").unwrap();
            std::fs::write(
                path("manifest.txt"),
                "seed = 5\n\
                 translit = translit.txt\n\
                 proxy = c a\n\
                 char_emb_dim = 6\n\
                 char_hidden_dim = 4\n\
                 word_emb_dim = 8\n\
                 pos_emb_dim = 3\n\
                 tb_emb_dim = 3\n\
                 word_bilstm_layers = 1\n\
                 word_hidden_dim = 8\n\
                 mlp_hidden_dim = 8\n\
                 epochs = 2\n\
                 treebank = a\n\
                 train = a-train.conllu\n\
                 dev = a-dev.conllu\n\
                 embeddings = a-vectors.txt\n\
                 treebank = b\n\
                 train = b-train.conllu\n",
            )
            .unwrap();

            for model in ["model1.json", "model2.json"] {
                let code = run([
                    "udparse",
                    "train",
                    "--manifest",
                    path("manifest.txt").to_str().unwrap(),
                    "--output",
                    path(model).to_str().unwrap(),
                ]);
                assert_eq!(code, 0, "train run failed");
            }
            let m1 = std::fs::read(path("model1.json")).unwrap();
            let m2 = std::fs::read(path("model2.json")).unwrap();
            assert!(!m1.is_empty());
            assert_eq!(m1, m2, "model files differ between identical runs");

            for (out, threads) in [("out1.conllu", "1"), ("out2.conllu", "1"), ("out3.conllu", "4")]
            {
                let code = run([
                    "udparse",
                    "parse",
                    "--model",
                    path("model1.json").to_str().unwrap(),
                    "--input",
                    path("a-dev.conllu").to_str().unwrap(),
                    "--output",
                    path(out).to_str().unwrap(),
                    "--treebank",
                    "a",
                    "--threads",
                    threads,
                ]);
                assert_eq!(code, 0, "parse run failed");
            }
            let o1 = std::fs::read(path("out1.conllu")).unwrap();
            let o2 = std::fs::read(path("out2.conllu")).unwrap();
            let o3 = std::fs::read(path("out3.conllu")).unwrap();
            assert!(!o1.is_empty());
            assert_eq!(o1, o2, "parse outputs differ between identical runs");
            assert_eq!(o1, o3, "parse output depends on the thread count");
        });
    }
}

mod ward_agreement {
    use std::collections::BTreeSet;

    use udparse::cluster::ward_cluster;

    use super::*;

    fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
    }

    /// Exhaustive centroid-based agglomeration: every pair cost is recomputed
    /// from pooled points, never from previous distances.
    fn centroid_oracle(points: &[(String, Vec<f64>)]) -> Vec<(BTreeSet<usize>, f64)> {
        fn ess(members: &[usize], points: &[(String, Vec<f64>)]) -> f64 {
            let dim = points[0].1.len();
            let mut centroid = vec![0.0; dim];
            for &m in members {
                for (c, x) in centroid.iter_mut().zip(&points[m].1) {
                    *c += x;
                }
            }
            for c in &mut centroid {
                *c /= members.len() as f64;
            }
            members.iter().map(|&m| squared_distance(&points[m].1, &centroid)).sum()
        }
        let mut clusters: Vec<Vec<usize>> = (0..points.len()).map(|i| vec![i]).collect();
        let mut merges = Vec::new();
        while clusters.len() > 1 {
            let mut best: Option<(f64, String, String, usize, usize)> = None;
            for i in 0..clusters.len() {
                for j in i + 1..clusters.len() {
                    let mut union = clusters[i].clone();
                    union.extend(&clusters[j]);
                    let delta =
                        ess(&union, points) - ess(&clusters[i], points) - ess(&clusters[j], points);
                    let label = |c: &[usize]| -> String {
                        c.iter().map(|&m| points[m].0.clone()).min().unwrap()
                    };
                    let (la, lb) = {
                        let (x, y) = (label(&clusters[i]), label(&clusters[j]));
                        if x <= y {
                            (x, y)
                        } else {
                            (y, x)
                        }
                    };
                    let better = match &best {
                        None => true,
                        Some((bd, bla, blb, _, _)) => {
                            delta < *bd
                                || (delta == *bd
                                    && (la.as_str(), lb.as_str()) < (bla.as_str(), blb.as_str()))
                        }
                    };
                    if better {
                        best = Some((delta, la, lb, i, j));
                    }
                }
            }
            let (delta, _, _, i, j) = best.unwrap();
            let merged: Vec<usize> = clusters[i].iter().chain(&clusters[j]).copied().collect();
            merges.push((merged.iter().copied().collect(), delta));
            clusters.remove(j);
            clusters.remove(i);
            clusters.push(merged);
        }
        merges
    }

    /// Criterion 11: the Lance-Williams implementation reproduces the
    /// centroid oracle's merge sets and distances (tolerance 1e-9) on 300
    /// random point sets with up to 6 points.
    #[test]
    fn criterion_11_ward_matches_centroid_oracle() {
        criterion(11, "Ward agreement", || {
            let mut rng = ChaCha8Rng::seed_from_u64(2011);
            for case in 0..300 {
                let n = rng.gen_range(2..=6);
                let dim = rng.gen_range(1..=4);
                let points: Vec<(String, Vec<f64>)> = (0..n)
                    .map(|i| {
                        (format!("t{i}"), (0..dim).map(|_| rng.gen_range(-3.0..3.0)).collect())
                    })
                    .collect();
                let dendrogram = ward_cluster(&points).unwrap();
                let oracle = centroid_oracle(&points);
                assert_eq!(dendrogram.merges.len(), oracle.len());
                let mut members: Vec<BTreeSet<usize>> =
                    (0..n).map(|i| BTreeSet::from([i])).collect();
                for (merge, (oracle_set, oracle_delta)) in dendrogram.merges.iter().zip(&oracle) {
                    let set: BTreeSet<usize> =
                        members[merge.a].union(&members[merge.b]).copied().collect();
                    assert_eq!(&set, oracle_set, "case {case}: merge sets diverge");
                    assert!(
                        (merge.distance - oracle_delta).abs() < 1e-9,
                        "case {case}: distance {} vs oracle {}",
                        merge.distance,
                        oracle_delta
                    );
                    members.push(set);
                }
            }
        });
    }
}

mod ewt_smoke {
    use std::collections::BTreeMap;
    use std::path::Path;

    use udparse::conllu::{parse_conllu, Sentence};
    use udparse::eval::align_tokens;
    use udparse::parser::{train_and_select, Hyperparams, TreebankData};

    use super::*;

    fn load(path: &Path) -> Vec<Sentence> {
        let raw = std::fs::read_to_string(path)
            .unwrap_or_else(|e| panic!("cannot read {}: {e}", path.display()));
        // Strip enhanced-only empty nodes (ids like "8.1"); the parser works
        // on basic trees.
        let filtered: String = raw
            .lines()
            .filter(|line| {
                line.split('\t').next().is_none_or(|id| !id.contains('.'))
            })
            .map(|line| format!("{line}\n"))
            .collect();
        parse_conllu(&filtered).unwrap()
    }

    /// Criterion 12 (optional, external data): a 30-epoch run with the
    /// default hyperparameters on a 2000-sentence English EWT subsample
    /// reaches at least 60 dev LAS. This is a smoke benchmark that takes
    /// several hours; point UDPARSE_EWT_DIR at a directory containing
    /// en_ewt-ud-train.conllu and en_ewt-ud-dev.conllu and run
    /// `cargo test --test acceptance -- --ignored --nocapture`.
    #[test]
    #[ignore = "multi-hour benchmark; set UDPARSE_EWT_DIR to enable"]
    fn criterion_12_ewt_dev_las_smoke() {
        criterion(12, "EWT smoke benchmark", || {
            let dir = match std::env::var("UDPARSE_EWT_DIR") {
                Ok(d) => d,
                Err(_) => {
                    println!("  UDPARSE_EWT_DIR not set; nothing to do");
                    return;
                }
            };
            let train_all = load(&Path::new(&dir).join("en_ewt-ud-train.conllu"));
            let dev = load(&Path::new(&dir).join("en_ewt-ud-dev.conllu"));
            let mut rng = ChaCha8Rng::seed_from_u64(2012);
            let take = train_all.len().min(2000);
            let mut idx = rand::seq::index::sample(&mut rng, train_all.len(), take).into_vec();
            idx.sort_unstable();
            let train: Vec<Sentence> = idx.into_iter().map(|i| train_all[i].clone()).collect();
            println!("  training on {} sentences, evaluating on {}", train.len(), dev.len());
            let hyper = Hyperparams::default();
            let data = vec![TreebankData {
                id: "en_ewt".to_string(),
                train,
                dev: dev.clone(),
                pretrained: None,
            }];
            let (model, epoch) =
                train_and_select(&data, &hyper, &BTreeMap::new(), &BTreeMap::new(), 12).unwrap();
            let parsed: Vec<Sentence> =
                dev.iter().map(|s| model.parse_sentence(s, Some("en_ewt")).unwrap()).collect();
            let las = align_tokens(&parsed, &dev).unwrap().score_las().f1;
            println!("  dev LAS {las:.2} from epoch {epoch}");
            assert!(las >= 60.0, "dev LAS {las:.2} < 60");
        });
    }
}
