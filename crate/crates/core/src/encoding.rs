//! Fixed-size binary input representation.
//!
//! Each token id becomes its 8-bit binary expansion, least significant bit
//! first, so id 3 is `[1, 1, 0, 0, 0, 0, 0, 0]`. A function becomes a
//! `max_len × 8` matrix: one row per token, truncated to the first `max_len`
//! tokens and padded with all-zero rows. Id 0 is reserved for padding and
//! shares the all-zero code.

use thiserror::Error;

use crate::lexer::{Token, TABLE_SIZE};

/// Bits per token.
pub const TOKEN_BITS: usize = 8;

/// Default cap on tokens per function.
pub const MAX_TOKENS: usize = 500;

const MAX_ID: u8 = (TABLE_SIZE - 1) as u8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodingError {
    #[error("token id {0} is outside 0..={MAX_ID}")]
    OutOfRange(i64),
    #[error("bit vector decodes to {0}, which is not a token id")]
    NotAToken(u8),
}

/// Eight 0/1 values, least significant bit first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct BitVector8(pub [u8; TOKEN_BITS]);

impl BitVector8 {
    pub fn bits(&self) -> &[u8; TOKEN_BITS] {
        &self.0
    }

    /// The byte these bits spell. Any nonzero entry counts as a set bit.
    pub fn value(&self) -> u8 {
        self.0
            .iter()
            .enumerate()
            .fold(0u8, |acc, (i, &b)| acc | (u8::from(b != 0) << i))
    }
}

pub fn encode_token(token_id: i64) -> Result<BitVector8, EncodingError> {
    if !(0..=MAX_ID as i64).contains(&token_id) {
        return Err(EncodingError::OutOfRange(token_id));
    }
    let id = token_id as u8;
    let mut bits = [0u8; TOKEN_BITS];
    for (i, bit) in bits.iter_mut().enumerate() {
        *bit = (id >> i) & 1;
    }
    Ok(BitVector8(bits))
}

pub fn decode_token(v: &BitVector8) -> Result<u8, EncodingError> {
    match v.value() {
        id if id <= MAX_ID => Ok(id),
        other => Err(EncodingError::NotAToken(other)),
    }
}

/// Network input for one function.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedFunction {
    /// Row-major `len × 8` bits.
    matrix: Vec<u8>,
    len: usize,
    true_length: usize,
    /// Fingerprint of the table the tokens came from, when known. Models
    /// refuse inputs bound to a different table.
    pub table_fingerprint: Option<u64>,
}

impl EncodedFunction {
    /// Number of rows (the padded length).
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Tokens present before padding.
    pub fn true_length(&self) -> usize {
        self.true_length
    }

    pub fn row(&self, i: usize) -> BitVector8 {
        let mut bits = [0u8; TOKEN_BITS];
        bits.copy_from_slice(&self.matrix[i * TOKEN_BITS..(i + 1) * TOKEN_BITS]);
        BitVector8(bits)
    }

    /// Row-major bits.
    pub fn as_rows(&self) -> &[u8] {
        &self.matrix
    }

    /// Token ids of the unpadded rows.
    pub fn token_ids(&self) -> Vec<u8> {
        (0..self.true_length).map(|i| self.row(i).value()).collect()
    }

    pub fn with_table(mut self, fingerprint: u64) -> Self {
        self.table_fingerprint = Some(fingerprint);
        self
    }

    /// One line of eight `0`/`1` characters per row.
    pub fn to_bit_lines(&self) -> String {
        let mut out = String::with_capacity(self.len * (TOKEN_BITS + 1));
        for row in self.matrix.chunks(TOKEN_BITS) {
            out.extend(row.iter().map(|&b| if b != 0 { '1' } else { '0' }));
            out.push('\n');
        }
        out
    }
}

/// Encodes a token sequence, keeping the first `max_len` tokens.
///
/// # Panics
///
/// If `max_len` is zero or a token carries an id outside the table range.
pub fn encode_function(tokens: &[Token], max_len: usize) -> EncodedFunction {
    let ids: Vec<u8> = tokens.iter().map(|t| t.token_id).collect();
    encode_ids(&ids, max_len)
}

/// [`encode_function`] over bare token ids.
pub fn encode_ids(ids: &[u8], max_len: usize) -> EncodedFunction {
    assert!(max_len >= 1, "max_len must be at least 1");
    let true_length = ids.len().min(max_len);
    let mut matrix = vec![0u8; max_len * TOKEN_BITS];
    for (row, &id) in matrix.chunks_mut(TOKEN_BITS).zip(&ids[..true_length]) {
        let bits = encode_token(i64::from(id)).expect("token ids come from the table");
        row.copy_from_slice(bits.bits());
    }
    EncodedFunction {
        matrix,
        len: max_len,
        true_length,
        table_fingerprint: None,
    }
}
