//! Whole-tree scanning: find C functions, classify them, report the buggy ones.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;
use walkdir::WalkDir;

use crate::dataset::Label;
use crate::encoding::encode_function;
use crate::lexer::{extract_functions, tokenize, TokenTable};
use crate::nn::{Model, NnError};

/// The operating point used on real code.
pub const DEFAULT_THRESHOLD: f64 = 0.7;

#[derive(Debug, Error)]
pub enum ScanError {
    #[error("no .c or .h files under the given paths")]
    NoInputs,
    #[error("{0} does not exist")]
    MissingPath(PathBuf),
    #[error("threshold {0} is outside [0, 1]")]
    BadThreshold(f64),
    #[error("could not load model: {0}")]
    ModelLoad(NnError),
    #[error(transparent)]
    Model(#[from] NnError),
    #[error("walking {path}: {source}")]
    Walk {
        path: PathBuf,
        #[source]
        source: walkdir::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Finding {
    pub file: PathBuf,
    pub function_name: String,
    pub byte_range: (usize, usize),
    pub label: Label,
    pub confidence: f64,
    /// The function had more tokens than the model reads.
    pub truncated: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ScanSummary {
    pub files_scanned: usize,
    pub functions_analyzed: usize,
    /// Files that could not be read or split into functions.
    pub files_skipped: usize,
    pub findings_per_label: BTreeMap<Label, usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ScanReport {
    pub findings: Vec<Finding>,
    pub summary: ScanSummary,
}

fn is_c_source(path: &Path) -> bool {
    matches!(path.extension().and_then(|e| e.to_str()), Some("c" | "h"))
}

/// Every `.c` and `.h` file under `paths`, sorted and without duplicates.
pub fn discover(paths: &[PathBuf]) -> Result<Vec<PathBuf>, ScanError> {
    let mut files = Vec::new();
    for root in paths {
        if !root.exists() {
            return Err(ScanError::MissingPath(root.clone()));
        }
        for entry in WalkDir::new(root).follow_links(false) {
            let entry = entry.map_err(|source| ScanError::Walk {
                path: root.clone(),
                source,
            })?;
            if entry.file_type().is_file() && is_c_source(entry.path()) {
                files.push(entry.into_path());
            }
        }
    }
    files.sort();
    files.dedup();
    Ok(files)
}

/// Classifies every function found under `paths` and reports those whose
/// top label is not CLEAN with confidence at least `threshold`. Files are
/// only read. Unreadable or unparseable files are skipped with a warning.
pub fn scan(paths: &[PathBuf], model: &Model, table: &TokenTable, threshold: f64) -> Result<ScanReport, ScanError> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(ScanError::BadThreshold(threshold));
    }
    if table.fingerprint() != model.table_fingerprint {
        return Err(NnError::TableMismatch {
            model: model.table_fingerprint,
            input: table.fingerprint(),
        }
        .into());
    }
    let files = discover(paths)?;
    if files.is_empty() {
        return Err(ScanError::NoInputs);
    }

    let mut report = ScanReport::default();
    for file in files {
        report.summary.files_scanned += 1;
        let bytes = match std::fs::read(&file) {
            Ok(b) => b,
            Err(e) => {
                log::warn!("{}: {e}", file.display());
                report.summary.files_skipped += 1;
                continue;
            }
        };
        let text = String::from_utf8_lossy(&bytes);
        let functions = match extract_functions(&text) {
            Ok(f) => f,
            Err(e) => {
                log::warn!("{}: {e}", file.display());
                report.summary.files_skipped += 1;
                continue;
            }
        };
        for f in functions {
            let tokens = match tokenize(&f.text, table) {
                Ok(t) => t,
                Err(e) => {
                    log::warn!("{}: {}: {e}", file.display(), f.name);
                    continue;
                }
            };
            report.summary.functions_analyzed += 1;
            let encoded = encode_function(&tokens, model.config.input_len).with_table(table.fingerprint());
            let p = model.predict(&encoded)?;
            if p.label != Label::Clean && p.confidence >= threshold {
                *report.summary.findings_per_label.entry(p.label).or_default() += 1;
                report.findings.push(Finding {
                    file: file.clone(),
                    function_name: f.name,
                    byte_range: (f.start_byte, f.end_byte),
                    label: p.label,
                    confidence: p.confidence,
                    truncated: tokens.len() > model.config.input_len,
                });
            }
        }
    }
    report
        .findings
        .sort_by(|a, b| a.file.cmp(&b.file).then(a.byte_range.cmp(&b.byte_range)));
    Ok(report)
}
