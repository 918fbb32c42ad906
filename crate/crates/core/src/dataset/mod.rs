//! Labeled corpora: ingestion, CWE mapping, deduplication, class balancing
//! and leakage-free train/test splits.
//!
//! Every randomized transform takes an explicit seed and is a pure function
//! of its inputs.

mod cwe;
mod synth;

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoding::{encode_ids, EncodedFunction};
use crate::lexer::{tokenize_ids, TokenTable};

pub use cwe::{map_cwe_to_label, CweMap};
pub use synth::generate_synthetic_corpus;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    FileUnreadable {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("no valid records")]
    EmptyCorpus,
    #[error("cannot balance: {0}")]
    Degenerate(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid CWE map: {0}")]
    InvalidCweMap(String),
    #[error("corpora were tokenized under different tables")]
    TableMismatch,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The five output classes, in class-index order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Label {
    Buffer,
    Logic,
    Memory,
    Numerical,
    Clean,
}

impl Label {
    pub const COUNT: usize = 5;
    pub const ALL: [Label; Label::COUNT] = [
        Label::Buffer,
        Label::Logic,
        Label::Memory,
        Label::Numerical,
        Label::Clean,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Label> {
        Label::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Buffer => "BUFFER",
            Label::Logic => "LOGIC",
            Label::Memory => "MEMORY",
            Label::Numerical => "NUMERICAL",
            Label::Clean => "CLEAN",
        }
    }

    pub fn is_buggy(self) -> bool {
        self != Label::Clean
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Label::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| format!("unknown label `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledSample {
    pub source: String,
    pub tokens: Vec<u8>,
    pub cwe_ids: Vec<u32>,
    pub label: Label,
    pub origin: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub samples: Vec<LabeledSample>,
    pub table_fingerprint: u64,
}

impl Corpus {
    pub fn new(table_fingerprint: u64) -> Self {
        Corpus {
            samples: Vec::new(),
            table_fingerprint,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn label_counts(&self) -> [usize; Label::COUNT] {
        let mut counts = [0; Label::COUNT];
        for s in &self.samples {
            counts[s.label.index()] += 1;
        }
        counts
    }

    pub fn buggy_fraction(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        let buggy = self.samples.iter().filter(|s| s.label.is_buggy()).count();
        buggy as f64 / self.samples.len() as f64
    }

    /// Encodes sample `i`, bound to this corpus' table.
    pub fn encode(&self, i: usize, max_len: usize) -> EncodedFunction {
        encode_ids(&self.samples[i].tokens, max_len).with_table(self.table_fingerprint)
    }

    fn with_samples(&self, samples: Vec<LabeledSample>) -> Corpus {
        Corpus {
            samples,
            table_fingerprint: self.table_fingerprint,
        }
    }

    /// Writes the corpus in the line-delimited record format, one JSON
    /// object per line. The label is written explicitly so classes without
    /// a CWE mapping survive a round trip.
    pub fn write_records<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for s in &self.samples {
            let rec = Record {
                source: s.source.clone(),
                cwe_ids: s.cwe_ids.clone(),
                origin: Some(s.origin.clone()),
                label: Some(s.label),
            };
            serde_json::to_writer(&mut out, &rec)?;
            out.write_all(b"\n")?;
        }
        out.flush()
    }
}

/// One line of a corpus file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Record {
    pub source: String,
    #[serde(default)]
    pub cwe_ids: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<String>,
    /// Overrides the label derived from `cwe_ids`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedRecord {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub corpus: Corpus,
    pub skipped: Vec<SkippedRecord>,
}

pub fn ingest(path: &Path, table: &TokenTable, mapping: &CweMap) -> Result<Ingested, DatasetError> {
    let unreadable = |source| DatasetError::FileUnreadable {
        path: path.to_path_buf(),
        source,
    };
    let file = std::fs::File::open(path).map_err(unreadable)?;
    let origin = path.display().to_string();
    let mut lines = Vec::new();
    for line in BufReader::new(file).lines() {
        lines.push(line.map_err(unreadable)?);
    }
    ingest_lines(lines.iter().map(String::as_str), &origin, table, mapping)
}

/// [`ingest`] over in-memory text.
pub fn ingest_str(text: &str, table: &TokenTable, mapping: &CweMap) -> Result<Ingested, DatasetError> {
    ingest_lines(text.lines(), "<memory>", table, mapping)
}

fn ingest_lines<'a>(
    lines: impl Iterator<Item = &'a str>,
    default_origin: &str,
    table: &TokenTable,
    mapping: &CweMap,
) -> Result<Ingested, DatasetError> {
    let mut corpus = Corpus::new(table.fingerprint());
    let mut skipped = Vec::new();
    for (n, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = n + 1;
        let mut skip = |reason: String| skipped.push(SkippedRecord { line: line_no, reason });
        let rec: Record = match serde_json::from_str(line) {
            Ok(rec) => rec,
            Err(e) => {
                skip(e.to_string());
                continue;
            }
        };
        let derived = mapping.label_for(&rec.cwe_ids);
        let label = match rec.label {
            Some(l) if (l == Label::Clean) != rec.cwe_ids.is_empty() => {
                skip(format!("label {l} contradicts cwe_ids {:?}", rec.cwe_ids));
                continue;
            }
            Some(l) => l,
            None => derived,
        };
        let tokens = match tokenize_ids(&rec.source, table) {
            Ok(t) => t,
            Err(e) => {
                skip(e.to_string());
                continue;
            }
        };
        corpus.samples.push(LabeledSample {
            source: rec.source,
            tokens,
            cwe_ids: rec.cwe_ids,
            label,
            origin: rec
                .origin
                .unwrap_or_else(|| format!("{default_origin}:{line_no}")),
        });
    }
    for s in &skipped {
        log::warn!("skipping record on line {}: {}", s.line, s.reason);
    }
    if corpus.is_empty() {
        return Err(DatasetError::EmptyCorpus);
    }
    Ok(Ingested { corpus, skipped })
}

/// Keeps the first sample of every distinct token sequence.
pub fn deduplicate(c: &Corpus) -> Corpus {
    let mut seen = std::collections::HashSet::new();
    let kept = c
        .samples
        .iter()
        .filter(|s| seen.insert(s.tokens.as_slice()))
        .cloned()
        .collect();
    c.with_samples(kept)
}

/// Tolerance on the buggy fraction reached by [`balance`].
pub const BALANCE_TOLERANCE: f64 = 0.02;

/// Duplicates buggy samples, chosen uniformly with replacement, until the
/// buggy fraction is as close to `target_buggy_fraction` as whole samples
/// allow, then shuffles. Clean samples are never added or removed, so a
/// corpus already at or above the target is only shuffled.
pub fn balance(c: &Corpus, target_buggy_fraction: f64, seed: u64) -> Result<Corpus, DatasetError> {
    if !(target_buggy_fraction > 0.0 && target_buggy_fraction < 1.0) {
        return Err(DatasetError::InvalidArgument(format!(
            "target fraction {target_buggy_fraction} is not in (0, 1)"
        )));
    }
    let buggy: Vec<usize> = (0..c.len()).filter(|&i| c.samples[i].label.is_buggy()).collect();
    let clean = c.len() - buggy.len();
    if buggy.is_empty() || clean == 0 {
        return Err(DatasetError::Degenerate(format!(
            "{} buggy and {clean} clean samples; both classes are required",
            buggy.len()
        )));
    }
    let wanted = (target_buggy_fraction * clean as f64 / (1.0 - target_buggy_fraction)).round() as usize;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = c.samples.clone();
    for _ in buggy.len()..wanted.max(buggy.len()) {
        let pick = buggy[rng.gen_range(0..buggy.len())];
        samples.push(c.samples[pick].clone());
    }
    samples.shuffle(&mut rng);
    Ok(c.with_samples(samples))
}

/// Seeded split that keeps every copy of a token sequence on the same side.
///
/// Groups of identical sequences are shuffled and assigned to the training
/// side until it holds at least `train_fraction` of the samples, so the
/// training side can overshoot by less than one group.
pub fn split(c: &Corpus, train_fraction: f64, seed: u64) -> Result<(Corpus, Corpus), DatasetError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(DatasetError::InvalidArgument(format!(
            "train fraction {train_fraction} is not in (0, 1)"
        )));
    }
    if c.is_empty() {
        return Err(DatasetError::EmptyCorpus);
    }
    let mut index: HashMap<&[u8], usize> = HashMap::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, s) in c.samples.iter().enumerate() {
        let g = *index.entry(s.tokens.as_slice()).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    groups.shuffle(&mut rng);

    let target = ((c.len() as f64) * train_fraction).round() as usize;
    let mut cut = 0;
    let mut filled = 0;
    while cut < groups.len() && filled < target {
        filled += groups[cut].len();
        cut += 1;
    }
    if cut == groups.len() && groups.len() > 1 {
        cut -= 1;
    }
    let take = |gs: &[Vec<usize>]| -> Vec<LabeledSample> {
        gs.iter()
            .flat_map(|g| g.iter().map(|&i| c.samples[i].clone()))
            .collect()
    };
    Ok((c.with_samples(take(&groups[..cut])), c.with_samples(take(&groups[cut..]))))
}
