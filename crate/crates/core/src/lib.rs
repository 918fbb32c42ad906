//! Vulnerability classification for C functions.
//!
//! Source text is split into functions, each function is lexed into a fixed
//! 91-entry token vocabulary, every token id becomes an 8-bit row, and a
//! small convolutional network assigns one of five labels:
//! [`Label::Buffer`], [`Label::Logic`], [`Label::Memory`],
//! [`Label::Numerical`] or [`Label::Clean`].
//!
//! ```
//! use cvsc::encoding::encode_function;
//! use cvsc::lexer::{tokenize, TokenTable};
//! use cvsc::nn::{Model, ModelConfig};
//!
//! let table = TokenTable::default();
//! let tokens = tokenize("void f(char *d, char *s) { strcpy(d, s); }", &table).unwrap();
//! let x = encode_function(&tokens, 500).with_table(table.fingerprint());
//! let model = Model::<f32>::init(ModelConfig::default(), table.fingerprint(), 7).unwrap();
//! let p = model.predict(&x).unwrap();
//! assert!((p.probs.iter().sum::<f64>() - 1.0).abs() < 1e-6);
//! ```
//!
//! [`Label::Buffer`]: dataset::Label::Buffer
//! [`Label::Logic`]: dataset::Label::Logic
//! [`Label::Memory`]: dataset::Label::Memory
//! [`Label::Numerical`]: dataset::Label::Numerical
//! [`Label::Clean`]: dataset::Label::Clean

pub mod dataset;
pub mod encoding;
pub mod eval;
pub mod lexer;
pub mod nn;
pub mod scan;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/tokens.md")]
    mod tokens {}
    #[doc = include_str!("../../../book/src/corpus.md")]
    mod corpus {}
    #[doc = include_str!("../../../book/src/network.md")]
    mod network {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/scanning.md")]
    mod scanning {}
}
