//! C source lexing: function extraction and tokenization into the fixed
//! 91-category vocabulary.
//!
//! Comments and preprocessor lines carry no category and are dropped.
//! Every numeric literal collapses to one NUMBER token, every string literal
//! to one STRING token and every character literal to one CHAR token. Names
//! that match a FUNCTION entry keep their own id wherever they appear; all
//! other names become IDENTIFIER.

mod extract;
mod table;

use thiserror::Error;

pub use extract::{extract_functions, FunctionSpan};
pub use table::{default_token_table, TableEntry, TokenGroup, TokenTable, PAD_ID, TABLE_SIZE};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LexError {
    /// A string or character literal runs into a newline or the end of input.
    #[error("unterminated literal starting at byte {offset}")]
    UnterminatedString { offset: usize },
    #[error("unterminated block comment starting at byte {offset}")]
    UnterminatedComment { offset: usize },
    #[error("file ends inside the brace opened at byte {offset}")]
    UnbalancedBraces { offset: usize },
    #[error("invalid token table: {0}")]
    InvalidTable(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub token_id: u8,
    pub group: TokenGroup,
    pub lexeme: String,
    pub byte_offset: usize,
}

/// A byte the lexer could not place in any category.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Skipped {
    pub byte_offset: usize,
    pub text: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexed {
    pub tokens: Vec<Token>,
    pub skipped: Vec<Skipped>,
}

impl Lexed {
    pub fn ids(&self) -> Vec<u8> {
        self.tokens.iter().map(|t| t.token_id).collect()
    }
}

/// Tokenizes one function's text, dropping diagnostics for skipped bytes
/// (they are logged at debug level).
pub fn tokenize(function_text: &str, table: &TokenTable) -> Result<Vec<Token>, LexError> {
    let lexed = tokenize_with_diagnostics(function_text, table)?;
    for s in &lexed.skipped {
        log::debug!("skipped unknown input {:?} at byte {}", s.text, s.byte_offset);
    }
    Ok(lexed.tokens)
}

/// Token ids only.
pub fn tokenize_ids(function_text: &str, table: &TokenTable) -> Result<Vec<u8>, LexError> {
    Ok(tokenize(function_text, table)?
        .into_iter()
        .map(|t| t.token_id)
        .collect())
}

pub fn tokenize_with_diagnostics(text: &str, table: &TokenTable) -> Result<Lexed, LexError> {
    let bytes = text.as_bytes();
    let mut out = Lexed::default();
    let mut i = 0;
    let mut line_start = true;

    while i < bytes.len() {
        let b = bytes[i];
        match b {
            b'\n' => {
                line_start = true;
                i += 1;
                continue;
            }
            b' ' | b'\t' | b'\r' | b'\x0b' | b'\x0c' => {
                i += 1;
                continue;
            }
            b'\\' if is_line_splice(bytes, i) => {
                i = skip_line_splice(bytes, i);
                continue;
            }
            b'/' if bytes.get(i + 1) == Some(&b'/') => {
                i = skip_line_comment(bytes, i);
                continue;
            }
            b'/' if bytes.get(i + 1) == Some(&b'*') => {
                i = skip_block_comment(bytes, i)
                    .ok_or(LexError::UnterminatedComment { offset: i })?;
                continue;
            }
            b'#' if line_start => {
                i = skip_directive(bytes, i);
                continue;
            }
            _ => {}
        }
        line_start = false;

        let start = i;
        let (len, id) = if b == b'"' || b == b'\'' {
            let end = scan_quoted(bytes, i).ok_or(LexError::UnterminatedString { offset: i })?;
            let id = if b == b'"' { table.string_id() } else { table.char_id() };
            (end - i, id)
        } else if b.is_ascii_digit()
            || (b == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit))
        {
            (scan_number(bytes, i) - i, table.number_id())
        } else if is_ident_start(b) {
            let end = scan_word(bytes, i);
            let word = &text[i..end];
            match bytes.get(end) {
                Some(&q @ (b'"' | b'\'')) if matches!(word, "L" | "u" | "U" | "u8") => {
                    let lit_end = scan_quoted(bytes, end)
                        .ok_or(LexError::UnterminatedString { offset: end })?;
                    let id = if q == b'"' { table.string_id() } else { table.char_id() };
                    (lit_end - i, id)
                }
                _ => (end - i, table.classify_word(word)),
            }
        } else if let Some((len, id)) = table.match_symbol(&bytes[i..]) {
            (len, id)
        } else {
            let ch_len = text[i..].chars().next().map_or(1, char::len_utf8);
            out.skipped.push(Skipped {
                byte_offset: i,
                text: text[i..i + ch_len].to_string(),
            });
            i += ch_len;
            continue;
        };

        let group = table
            .group_of(id)
            .expect("table lookups only return ids present in the table");
        out.tokens.push(Token {
            token_id: id,
            group,
            lexeme: text[start..start + len].to_string(),
            byte_offset: start,
        });
        i += len;
    }
    Ok(out)
}

fn is_ident_start(b: u8) -> bool {
    b.is_ascii_alphabetic() || b == b'_'
}

fn is_ident_continue(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

fn scan_word(bytes: &[u8], start: usize) -> usize {
    let mut i = start;
    while i < bytes.len() && is_ident_continue(bytes[i]) {
        i += 1;
    }
    i
}

/// Consumes a preprocessing number: digits, letters, `_`, `.`, and a sign
/// directly after an exponent marker. Covers hex, octal, floats and suffixes.
fn scan_number(bytes: &[u8], start: usize) -> usize {
    let mut i = start + 1;
    while i < bytes.len() {
        let b = bytes[i];
        let signed_exponent = matches!(b, b'+' | b'-') && matches!(bytes[i - 1], b'e' | b'E' | b'p' | b'P');
        if signed_exponent || is_ident_continue(b) || b == b'.' {
            i += 1;
        } else {
            break;
        }
    }
    i
}

/// End (exclusive) of the quoted literal starting at `start`, or `None` when
/// it is not closed before a raw newline or end of input.
fn scan_quoted(bytes: &[u8], start: usize) -> Option<usize> {
    let quote = bytes[start];
    let mut i = start + 1;
    while i < bytes.len() {
        match bytes[i] {
            b'\\' => i += 2,
            b'\n' => return None,
            b if b == quote => return Some(i + 1),
            _ => i += 1,
        }
    }
    None
}

fn is_line_splice(bytes: &[u8], i: usize) -> bool {
    match bytes.get(i + 1) {
        Some(b'\n') => true,
        Some(b'\r') => bytes.get(i + 2) == Some(&b'\n'),
        _ => false,
    }
}

fn skip_line_splice(bytes: &[u8], i: usize) -> usize {
    if bytes.get(i + 1) == Some(&b'\r') {
        i + 3
    } else {
        i + 2
    }
}

/// Stops at the newline so the caller sees the line break.
fn skip_line_comment(bytes: &[u8], start: usize) -> usize {
    let mut i = start + 2;
    while i < bytes.len() && bytes[i] != b'\n' {
        i += 1;
    }
    i
}

fn skip_block_comment(bytes: &[u8], start: usize) -> Option<usize> {
    bytes[start + 2..]
        .windows(2)
        .position(|w| w == b"*/")
        .map(|p| start + 2 + p + 2)
}

/// Skips a directive line including backslash continuations. Stops at the
/// terminating newline.
fn skip_directive(bytes: &[u8], start: usize) -> usize {
    let mut i = start;
    while i < bytes.len() {
        match bytes[i] {
            b'\\' if is_line_splice(bytes, i) => i = skip_line_splice(bytes, i),
            b'\n' => break,
            b'/' if bytes.get(i + 1) == Some(&b'*') => match skip_block_comment(bytes, i) {
                Some(end) => i = end,
                None => return bytes.len(),
            },
            _ => i += 1,
        }
    }
    i
}

/// Copy of `text` with comments, literal bodies and directive lines blanked
/// out. Newlines and byte offsets are preserved. Unterminated constructs are
/// blanked to the end of their line (literals) or of the input (comments).
pub(crate) fn mask_source(text: &str) -> Vec<u8> {
    let bytes = text.as_bytes();
    let mut out = bytes.to_vec();
    let blank = |out: &mut Vec<u8>, from: usize, to: usize| {
        for b in &mut out[from..to] {
            if *b != b'\n' {
                *b = b' ';
            }
        }
    };
    let mut i = 0;
    let mut line_start = true;
    while i < bytes.len() {
        let b = bytes[i];
        match b {
            b'\n' => {
                line_start = true;
                i += 1;
            }
            b' ' | b'\t' | b'\r' | b'\x0b' | b'\x0c' => i += 1,
            b'/' if bytes.get(i + 1) == Some(&b'/') => {
                let end = skip_line_comment(bytes, i);
                blank(&mut out, i, end);
                i = end;
            }
            b'/' if bytes.get(i + 1) == Some(&b'*') => {
                let end = skip_block_comment(bytes, i).unwrap_or(bytes.len());
                blank(&mut out, i, end);
                i = end;
            }
            b'#' if line_start => {
                let end = skip_directive(bytes, i);
                blank(&mut out, i, end);
                i = end;
            }
            b'"' | b'\'' => {
                let end = scan_quoted(bytes, i).unwrap_or_else(|| {
                    bytes[i..]
                        .iter()
                        .position(|&c| c == b'\n')
                        .map_or(bytes.len(), |p| i + p)
                });
                blank(&mut out, i, end);
                line_start = false;
                i = end;
            }
            _ if is_ident_start(b) => {
                line_start = false;
                i = scan_word(bytes, i);
            }
            b'0'..=b'9' => {
                // Keeps `'` digit separators and the like from opening literals.
                line_start = false;
                i = scan_number(bytes, i);
            }
            _ => {
                line_start = false;
                i += 1;
            }
        }
    }
    out
}
