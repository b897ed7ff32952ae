//! The `udparse` command-line front end.
//!
//! Thin adapters over the library modules, one subcommand each: `train`,
//! `parse`, `segment`, `align`, `cluster`, and `eval`. Reports go to
//! stdout and diagnostics to stderr; set `RUST_LOG` to adjust verbosity.
//! Exit codes: 0 on success, 1 on usage errors, 2 on data errors.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use crate::cluster::ward_cluster;
use crate::conllu::{lemma_fallback, parse_conllu, write_conllu, Sentence};
use crate::eval::evaluate;
use crate::parser::{train_and_select, Manifest, ModelFile};
use crate::segment::{gale_church_align, load_lexicon, max_match};

/// Seed used when neither the command line nor the manifest supplies one.
pub const DEFAULT_SEED: u64 = 1;

type DynError = Box<dyn std::error::Error>;

#[derive(Parser)]
#[command(
    name = "udparse",
    version,
    about = "Transition-based dependency parsing toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a parser from a manifest and save the model
    Train {
        /// Manifest describing treebanks, paths, and hyperparameters
        #[arg(long)]
        manifest: PathBuf,
        /// Where to write the trained model (JSON)
        #[arg(long)]
        output: PathBuf,
        /// Seed overriding the manifest's; all randomness flows from it
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Parse a CoNLL-U file with a trained model
    Parse {
        /// Trained model file
        #[arg(long)]
        model: PathBuf,
        /// CoNLL-U input with forms and UPOS tags
        #[arg(long)]
        input: PathBuf,
        /// Output path; stdout when omitted
        #[arg(long)]
        output: Option<PathBuf>,
        /// Treebank id, required for multi-treebank models
        #[arg(long)]
        treebank: Option<String>,
        /// Fill each lemma with the lowercased form
        #[arg(long)]
        copy_lemmas: bool,
        /// Worker threads; output is identical regardless
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
    /// Segment unspaced text by maximum matching against a lexicon
    Segment {
        /// Lexicon file, one word per line
        #[arg(long)]
        lexicon: PathBuf,
        /// Text input, one line per unit to segment
        #[arg(long)]
        input: PathBuf,
        /// Output path; stdout when omitted
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Align two sentence-per-line files by character length
    Align {
        /// Source side, one sentence per line
        #[arg(long)]
        source: PathBuf,
        /// Target side, one sentence per line
        #[arg(long)]
        target: PathBuf,
        /// Output path; stdout when omitted
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Cluster a model's treebank embeddings with Ward's method
    Cluster {
        /// Trained multi-treebank model file
        #[arg(long)]
        model: PathBuf,
        /// Also print this many groups, one per line
        #[arg(long)]
        groups: Option<usize>,
    },
    /// Score a system CoNLL-U file against a reference
    Eval {
        /// System output to score
        #[arg(long)]
        system: PathBuf,
        /// Reference (gold) file
        #[arg(long)]
        gold: PathBuf,
    },
}

/// Parses `argv` and runs the selected subcommand, returning the process
/// exit code: 0 success, 1 usage error, 2 data error.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default())
        .format_timestamp(None)
        .try_init();
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            2
        }
    }
}

fn dispatch(command: Command) -> Result<(), DynError> {
    match command {
        Command::Train { manifest, output, seed } => cmd_train(&manifest, &output, seed),
        Command::Parse { model, input, output, treebank, copy_lemmas, threads } => {
            cmd_parse(&model, &input, output.as_deref(), treebank.as_deref(), copy_lemmas, threads)
        }
        Command::Segment { lexicon, input, output } => {
            cmd_segment(&lexicon, &input, output.as_deref())
        }
        Command::Align { source, target, output } => {
            cmd_align(&source, &target, output.as_deref())
        }
        Command::Cluster { model, groups } => cmd_cluster(&model, groups),
        Command::Eval { system, gold } => cmd_eval(&system, &gold),
    }
}

fn read_text(path: &Path) -> Result<String, DynError> {
    std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()).into())
}

fn write_text(path: &Path, text: &str) -> Result<(), DynError> {
    std::fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()).into())
}

fn emit(output: Option<&Path>, text: &str) -> Result<(), DynError> {
    match output {
        Some(path) => write_text(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_train(manifest_path: &Path, output: &Path, seed: Option<u64>) -> Result<(), DynError> {
    let manifest = Manifest::load(manifest_path)?;
    let seed = seed.or(manifest.seed).unwrap_or(DEFAULT_SEED);
    log::info!("resolved configuration:\n{}", manifest.render_resolved(seed));
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let (data, translit) = manifest.load_data(base)?;
    let (model, epoch) =
        train_and_select(&data, &manifest.hyper, &translit, &manifest.proxies, seed)?;
    ModelFile::save(&model, output)?;
    println!("selected epoch {epoch}; model written to {}", output.display());
    Ok(())
}

fn cmd_parse(
    model_path: &Path,
    input: &Path,
    output: Option<&Path>,
    treebank: Option<&str>,
    copy_lemmas: bool,
    threads: usize,
) -> Result<(), DynError> {
    log::info!(
        "parse: model {}, input {}, treebank {:?}, threads {threads}",
        model_path.display(),
        input.display(),
        treebank
    );
    let model = ModelFile::load(model_path)?;
    let sentences = parse_conllu(&read_text(input)?)?;
    let mut parsed: Vec<Sentence> = Vec::with_capacity(sentences.len());
    if threads <= 1 || sentences.len() <= 1 {
        for sentence in &sentences {
            parsed.push(model.parse_sentence(sentence, treebank)?);
        }
    } else {
        // Contiguous chunks joined in spawn order: the output is identical
        // to the sequential one for any thread count.
        let chunk = sentences.len().div_ceil(threads);
        let results = std::thread::scope(|scope| {
            let handles: Vec<_> = sentences
                .chunks(chunk)
                .map(|chunk| {
                    let model = &model;
                    scope.spawn(move || {
                        chunk
                            .iter()
                            .map(|s| model.parse_sentence(s, treebank))
                            .collect::<Result<Vec<_>, _>>()
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("parser thread panicked"))
                .collect::<Vec<_>>()
        });
        for result in results {
            parsed.extend(result?);
        }
    }
    if copy_lemmas {
        for sentence in &mut parsed {
            lemma_fallback(sentence);
        }
    }
    emit(output, &write_conllu(&parsed))
}

fn cmd_segment(lexicon: &Path, input: &Path, output: Option<&Path>) -> Result<(), DynError> {
    let lex = load_lexicon(lexicon).map_err(|e| format!("{}: {e}", lexicon.display()))?;
    log::info!("segment: {} lexicon entries", lex.len());
    let text = read_text(input)?;
    let mut out = String::new();
    for line in text.lines() {
        out.push_str(&max_match(line, &lex).join(" "));
        out.push('\n');
    }
    emit(output, &out)
}

fn cmd_align(source: &Path, target: &Path, output: Option<&Path>) -> Result<(), DynError> {
    let src_text = read_text(source)?;
    let tgt_text = read_text(target)?;
    let src_lens: Vec<usize> = src_text.lines().map(|l| l.chars().count()).collect();
    let tgt_lens: Vec<usize> = tgt_text.lines().map(|l| l.chars().count()).collect();
    log::info!("align: {} source x {} target sentences", src_lens.len(), tgt_lens.len());
    let beads = gale_church_align(&src_lens, &tgt_lens)?;
    let mut out = String::new();
    for bead in &beads {
        out.push_str(&bead.to_string());
        out.push('\n');
    }
    emit(output, &out)
}

fn cmd_cluster(model_path: &Path, groups: Option<usize>) -> Result<(), DynError> {
    let model = ModelFile::load(model_path)?;
    let rows = model.treebank_embeddings();
    if rows.len() < 2 {
        return Err("model has fewer than two treebank embeddings to cluster".into());
    }
    let dendrogram = ward_cluster(&rows)?;
    print!("{dendrogram}");
    if let Some(k) = groups {
        for group in dendrogram.cut_groups(k)? {
            println!("{}", group.join(" "));
        }
    }
    Ok(())
}

fn cmd_eval(system: &Path, gold: &Path) -> Result<(), DynError> {
    let sys = parse_conllu(&read_text(system)?)?;
    let reference = parse_conllu(&read_text(gold)?)?;
    let report = evaluate(&sys, &reference)?;
    print!("{report}");
    print!("{}", report.to_key_values());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> i32 {
        run(args.iter().copied())
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run_args(&["udparse", "bogus"]), 1);
        assert_eq!(run_args(&["udparse", "eval", "--system", "x"]), 1);
        assert_eq!(run_args(&["udparse"]), 1);
        assert_eq!(run_args(&["udparse", "--help"]), 0);
    }

    #[test]
    fn data_errors_exit_two() {
        assert_eq!(
            run_args(&["udparse", "eval", "--system", "/no/such/file", "--gold", "/no/such/file"]),
            2
        );
    }

    #[test]
    fn segment_writes_space_separated_tokens() {
        let dir = tempfile::tempdir().unwrap();
        let lexicon = dir.path().join("words.txt");
        let input = dir.path().join("raw.txt");
        let output = dir.path().join("seg.txt");
        std::fs::write(&lexicon, "ab\nabc\nd\n").unwrap();
        std::fs::write(&input, "abcd\n").unwrap();
        let code = run_args(&[
            "udparse",
            "segment",
            "--lexicon",
            lexicon.to_str().unwrap(),
            "--input",
            input.to_str().unwrap(),
            "--output",
            output.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        assert_eq!(std::fs::read_to_string(&output).unwrap(), "abc d\n");
    }

    #[test]
    fn align_writes_bead_rows() {
        let dir = tempfile::tempdir().unwrap();
        let source = dir.path().join("src.txt");
        let target = dir.path().join("tgt.txt");
        let output = dir.path().join("beads.tsv");
        std::fs::write(&source, "hello there\nshort one\n").unwrap();
        std::fs::write(&target, "hello there\nshort one\n").unwrap();
        let code = run_args(&[
            "udparse",
            "align",
            "--source",
            source.to_str().unwrap(),
            "--target",
            target.to_str().unwrap(),
            "--output",
            output.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        let beads = std::fs::read_to_string(&output).unwrap();
        let lines: Vec<&str> = beads.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines.iter().all(|l| l.starts_with("1-1\t")));
    }

    #[test]
    fn eval_of_identical_files_succeeds() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("gold.conllu");
        let text = "\
# sent_id = 1
1\tThe\tthe\tDET\t_\t_\t2\tdet\t_\t_
2\tcat\tcat\tNOUN\t_\t_\t0\troot\t_\t_

";
        std::fs::write(&file, text).unwrap();
        let code = run_args(&[
            "udparse",
            "eval",
            "--system",
            file.to_str().unwrap(),
            "--gold",
            file.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
    }

    #[test]
    fn train_then_parse_round_trips_deterministically() {
        let dir = tempfile::tempdir().unwrap();
        let train = dir.path().join("train.conllu");
        let manifest = dir.path().join("manifest.txt");
        let model = dir.path().join("model.json");
        let out_a = dir.path().join("a.conllu");
        let out_b = dir.path().join("b.conllu");
        let text = "\
1\ta\t_\tX\t_\t_\t2\tdep\t_\t_
2\tb\t_\tY\t_\t_\t0\troot\t_\t_

1\tc\t_\tX\t_\t_\t2\tdep\t_\t_
2\td\t_\tY\t_\t_\t0\troot\t_\t_

";
        std::fs::write(&train, text).unwrap();
        std::fs::write(
            &manifest,
            "seed = 7\n\
             char_emb_dim = 4\n\
             char_hidden_dim = 4\n\
             word_emb_dim = 6\n\
             pos_emb_dim = 2\n\
             word_bilstm_layers = 1\n\
             word_hidden_dim = 6\n\
             mlp_hidden_dim = 6\n\
             epochs = 1\n\
             treebank = toy\n\
             train = train.conllu\n",
        )
        .unwrap();
        let code = run_args(&[
            "udparse",
            "train",
            "--manifest",
            manifest.to_str().unwrap(),
            "--output",
            model.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        assert!(model.exists());

        for (out, threads) in [(&out_a, "1"), (&out_b, "3")] {
            let code = run_args(&[
                "udparse",
                "parse",
                "--model",
                model.to_str().unwrap(),
                "--input",
                train.to_str().unwrap(),
                "--output",
                out.to_str().unwrap(),
                "--copy-lemmas",
                "--threads",
                threads,
            ]);
            assert_eq!(code, 0);
        }
        let a = std::fs::read_to_string(&out_a).unwrap();
        let b = std::fs::read_to_string(&out_b).unwrap();
        assert_eq!(a, b);
        let parsed = parse_conllu(&a).unwrap();
        assert_eq!(parsed.len(), 2);
        // Lemma fallback filled the lemma column from the form.
        assert_eq!(parsed[0].tokens[0].lemma, "a");
        for sentence in &parsed {
            assert!(sentence.tokens.iter().all(|t| t.head.is_some()));
        }
    }
}
