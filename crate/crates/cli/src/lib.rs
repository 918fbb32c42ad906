//! The `cvsc` command line.
//!
//! Exit status is 0 on success, 1 when `scan` reports findings and 2 on any
//! usage or operational error.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use cvsc::dataset::{self, Corpus, CweMap, Label};
use cvsc::encoding::{encode_function, MAX_TOKENS};
use cvsc::eval;
use cvsc::lexer::{tokenize_with_diagnostics, TokenTable};
use cvsc::nn::{self, Model, ModelConfig, TrainConfig};
use cvsc::scan::{self, DEFAULT_THRESHOLD};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FINDINGS: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "cvsc", version, about = "Classify C functions by likely weakness")]
struct Cli {
    /// Token table file; the built-in table is used when absent.
    #[arg(long, global = true, env = "CVSC_TOKEN_TABLE")]
    token_table: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Debug, Args)]
struct CorpusIn {
    /// Corpus file, one JSON record per line.
    input: PathBuf,
    /// CWE-to-label mapping; the built-in mapping is used when absent.
    #[arg(long)]
    cwe_map: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the tokens of a source file.
    Tokenize {
        file: PathBuf,
        /// Print the padded bit matrix instead of the token list.
        #[arg(long)]
        encoded: bool,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Validate and label raw records, writing a normalized corpus.
    Ingest {
        #[command(flatten)]
        corpus: CorpusIn,
        #[arg(long)]
        out: PathBuf,
    },
    /// Drop samples whose token sequence was already seen.
    Dedup {
        #[command(flatten)]
        corpus: CorpusIn,
        #[arg(long)]
        out: PathBuf,
    },
    /// Duplicate buggy samples up to a target fraction.
    Balance {
        #[command(flatten)]
        corpus: CorpusIn,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        target: f64,
        #[arg(long)]
        seed: u64,
    },
    /// Split into train and test sets with no token sequence in both.
    Split {
        #[command(flatten)]
        corpus: CorpusIn,
        #[arg(long)]
        train_out: PathBuf,
        #[arg(long)]
        test_out: PathBuf,
        /// Share of samples that go to the training set.
        #[arg(long, default_value_t = 0.8)]
        fraction: f64,
        #[arg(long)]
        seed: u64,
    },
    /// Generate a labeled synthetic corpus.
    Synth {
        /// Functions per label.
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a fresh model on a corpus.
    Train {
        #[command(flatten)]
        corpus: CorpusIn,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 30)]
        epochs: usize,
        #[arg(long, default_value_t = 32)]
        batch_size: usize,
        #[arg(long, default_value_t = 1e-3)]
        learning_rate: f64,
        /// Seeds both the initial weights and the per-epoch shuffles.
        #[arg(long)]
        seed: u64,
    },
    /// Precision-recall curves, areas and a confusion matrix on a test corpus.
    Eval {
        #[command(flatten)]
        corpus: CorpusIn,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: f64,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Report likely-vulnerable functions under the given paths.
    Scan {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: f64,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
}

/// Parses `args` (program name first) and runs one subcommand.
pub fn run_pipeline<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{text}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(stderr, "{text}");
                    EXIT_ERROR
                }
            };
        }
    };
    match run(cli, stdout, stderr) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e:#}");
            EXIT_ERROR
        }
    }
}

fn load_table(path: Option<&Path>) -> Result<TokenTable> {
    match path {
        Some(p) => TokenTable::load(p).with_context(|| format!("loading token table {}", p.display())),
        None => Ok(TokenTable::default()),
    }
}

fn read_corpus(args: &CorpusIn, table: &TokenTable, stderr: &mut dyn Write) -> Result<Corpus> {
    let mapping = match &args.cwe_map {
        Some(p) => CweMap::load(p).with_context(|| format!("loading CWE map {}", p.display()))?,
        None => CweMap::default(),
    };
    let ingested = dataset::ingest(&args.input, table, &mapping)
        .with_context(|| format!("reading corpus {}", args.input.display()))?;
    if !ingested.skipped.is_empty() {
        writeln!(
            stderr,
            "{}: skipped {} malformed record(s)",
            args.input.display(),
            ingested.skipped.len()
        )?;
    }
    Ok(ingested.corpus)
}

fn write_corpus(corpus: &Corpus, path: &Path) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    corpus
        .write_records(BufWriter::new(file))
        .with_context(|| format!("writing {}", path.display()))
}

fn describe(corpus: &Corpus) -> String {
    let counts = corpus.label_counts();
    let per_label: Vec<String> = Label::ALL
        .iter()
        .map(|l| format!("{l} {}", counts[l.index()]))
        .collect();
    format!("{} samples ({})", corpus.len(), per_label.join(", "))
}

fn load_model(path: &Path) -> Result<Model> {
    nn::load_model(path).with_context(|| format!("loading model {}", path.display()))
}

fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let table = load_table(cli.token_table.as_deref())?;
    match cli.command {
        Command::Tokenize { file, encoded, format } => {
            let text = std::fs::read_to_string(&file).with_context(|| format!("reading {}", file.display()))?;
            let lexed = tokenize_with_diagnostics(&text, &table)?;
            for s in &lexed.skipped {
                writeln!(err, "{}: skipped {:?} at byte {}", file.display(), s.text, s.byte_offset)?;
            }
            if encoded {
                let enc = encode_function(&lexed.tokens, MAX_TOKENS);
                match format {
                    Format::Text => write!(out, "{}", enc.to_bit_lines())?,
                    Format::Json => {
                        let rows: Vec<&[u8]> = enc.as_rows().chunks(8).collect();
                        writeln!(out, "{}", serde_json::json!({ "true_length": enc.true_length(), "rows": rows }))?;
                    }
                }
            } else {
                for t in &lexed.tokens {
                    match format {
                        Format::Text => writeln!(out, "{}\t{}\t{}\t{}", t.byte_offset, t.token_id, t.group, t.lexeme)?,
                        Format::Json => writeln!(
                            out,
                            "{}",
                            serde_json::json!({
                                "byte_offset": t.byte_offset,
                                "token_id": t.token_id,
                                "group": t.group.as_str(),
                                "lexeme": t.lexeme,
                            })
                        )?,
                    }
                }
            }
            Ok(EXIT_OK)
        }
        Command::Ingest { corpus, out: path } => {
            let c = read_corpus(&corpus, &table, err)?;
            write_corpus(&c, &path)?;
            writeln!(err, "ingested {}", describe(&c))?;
            Ok(EXIT_OK)
        }
        Command::Dedup { corpus, out: path } => {
            let c = read_corpus(&corpus, &table, err)?;
            let d = dataset::deduplicate(&c);
            write_corpus(&d, &path)?;
            writeln!(err, "kept {} of {} samples", d.len(), c.len())?;
            Ok(EXIT_OK)
        }
        Command::Balance {
            corpus,
            out: path,
            target,
            seed,
        } => {
            let c = read_corpus(&corpus, &table, err)?;
            let b = dataset::balance(&c, target, seed)?;
            write_corpus(&b, &path)?;
            writeln!(err, "balanced to {} (buggy fraction {:.3})", describe(&b), b.buggy_fraction())?;
            Ok(EXIT_OK)
        }
        Command::Split {
            corpus,
            train_out,
            test_out,
            fraction,
            seed,
        } => {
            let c = read_corpus(&corpus, &table, err)?;
            let (train, test) = dataset::split(&c, fraction, seed)?;
            write_corpus(&train, &train_out)?;
            write_corpus(&test, &test_out)?;
            writeln!(err, "train: {}\ntest: {}", describe(&train), describe(&test))?;
            Ok(EXIT_OK)
        }
        Command::Synth { n, seed, out: path } => {
            if n == 0 {
                bail!("--n must be positive");
            }
            let c = dataset::generate_synthetic_corpus(n, seed, &table);
            write_corpus(&c, &path)?;
            writeln!(err, "generated {}", describe(&c))?;
            Ok(EXIT_OK)
        }
        Command::Train {
            corpus,
            out: path,
            epochs,
            batch_size,
            learning_rate,
            seed,
        } => {
            let c = read_corpus(&corpus, &table, err)?;
            let model = Model::init(ModelConfig::default(), table.fingerprint(), seed)?;
            let tc = TrainConfig {
                epochs,
                batch_size,
                learning_rate,
                seed,
                ..TrainConfig::default()
            };
            let (model, _) = nn::train_with_progress(model, &c, &tc, |m| {
                let _ = writeln!(
                    err,
                    "epoch {:>3}  loss {:.4}  accuracy {:.3}",
                    m.epoch, m.mean_loss, m.accuracy
                );
            })?;
            nn::save_model(&model, &path).with_context(|| format!("writing model {}", path.display()))?;
            Ok(EXIT_OK)
        }
        Command::Eval {
            corpus,
            model,
            threshold,
            format,
        } => {
            let m = load_model(&model)?;
            let c = read_corpus(&corpus, &table, err)?;
            let probs = eval::score_corpus(&m, &c)?;
            let truth: Vec<Label> = c.samples.iter().map(|s| s.label).collect();
            let curves = eval::pr_curves_from_scores(&probs, &truth)?;
            let confusion = eval::confusion_from_scores(&probs, &truth, threshold)?;
            match format {
                Format::Json => writeln!(
                    out,
                    "{}",
                    serde_json::json!({
                        "curves": curves.curves,
                        "skipped": curves.skipped,
                        "threshold": threshold,
                        "confusion": confusion,
                        "macro_accuracy": confusion.macro_accuracy(),
                    })
                )?,
                Format::Text => write_eval_text(out, &curves, &confusion, threshold)?,
            }
            Ok(EXIT_OK)
        }
        Command::Scan {
            paths,
            model,
            threshold,
            format,
        } => {
            let m = load_model(&model)?;
            let report = scan::scan(&paths, &m, &table, threshold)?;
            for f in &report.findings {
                match format {
                    Format::Json => writeln!(out, "{}", serde_json::to_string(f)?)?,
                    Format::Text => writeln!(
                        out,
                        "{}:{}-{}\t{}\t{}\t{:.3}{}",
                        f.file.display(),
                        f.byte_range.0,
                        f.byte_range.1,
                        f.function_name,
                        f.label,
                        f.confidence,
                        if f.truncated { "\ttruncated" } else { "" }
                    )?,
                }
            }
            let s = &report.summary;
            let per_label: Vec<String> = s.findings_per_label.iter().map(|(l, n)| format!("{l} {n}")).collect();
            writeln!(
                err,
                "scanned {} files ({} skipped), analyzed {} functions, {} findings{}",
                s.files_scanned,
                s.files_skipped,
                s.functions_analyzed,
                report.findings.len(),
                if per_label.is_empty() {
                    String::new()
                } else {
                    format!(": {}", per_label.join(", "))
                }
            )?;
            Ok(if report.findings.is_empty() { EXIT_OK } else { EXIT_FINDINGS })
        }
    }
}

fn write_eval_text(
    out: &mut dyn Write,
    curves: &eval::ClassCurves,
    confusion: &eval::ConfusionMatrix,
    threshold: f64,
) -> Result<()> {
    for c in &curves.curves {
        writeln!(out, "# {}\nthreshold\tprecision\trecall", c.class_label)?;
        for p in &c.points {
            writeln!(out, "{:.6}\t{:.6}\t{:.6}", p.threshold, p.precision, p.recall)?;
        }
        writeln!(out)?;
    }
    writeln!(out, "# area under PR curve\nclass\tauc")?;
    for c in &curves.curves {
        writeln!(out, "{}\t{:.4}", c.class_label, c.auc)?;
    }
    for l in &curves.skipped {
        writeln!(out, "{l}\t-")?;
    }
    writeln!(out, "\n# confusion at threshold {threshold} (rows true, columns predicted)")?;
    let header: Vec<&str> = Label::ALL.iter().map(|l| l.as_str()).collect();
    writeln!(out, "\t{}", header.join("\t"))?;
    for l in Label::ALL {
        let row: Vec<String> = confusion.counts[l.index()].iter().map(|n| n.to_string()).collect();
        writeln!(out, "{l}\t{}", row.join("\t"))?;
    }
    writeln!(out, "abstained\t{}", confusion.abstained)?;
    writeln!(out, "macro accuracy\t{:.4}", confusion.macro_accuracy())?;
    Ok(())
}
