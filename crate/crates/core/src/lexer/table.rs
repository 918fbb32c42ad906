use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use super::LexError;

/// Number of categories in every token table.
pub const TABLE_SIZE: usize = 91;

/// Id reserved for padding. The lexer never emits it.
pub const PAD_ID: u8 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TokenGroup {
    Pad,
    Keyword,
    Symbol,
    Number,
    String,
    Char,
    Function,
    Identifier,
}

impl TokenGroup {
    pub fn as_str(self) -> &'static str {
        match self {
            TokenGroup::Pad => "PAD",
            TokenGroup::Keyword => "KEYWORD",
            TokenGroup::Symbol => "SYMBOL",
            TokenGroup::Number => "NUMBER",
            TokenGroup::String => "STRING",
            TokenGroup::Char => "CHAR",
            TokenGroup::Function => "FUNCTION",
            TokenGroup::Identifier => "IDENTIFIER",
        }
    }

    /// Groups that stand for a whole class of lexemes rather than one spelling.
    pub fn is_catch_all(self) -> bool {
        matches!(
            self,
            TokenGroup::Pad
                | TokenGroup::Number
                | TokenGroup::String
                | TokenGroup::Char
                | TokenGroup::Identifier
        )
    }
}

impl fmt::Display for TokenGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TokenGroup {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "PAD" => TokenGroup::Pad,
            "KEYWORD" => TokenGroup::Keyword,
            "SYMBOL" => TokenGroup::Symbol,
            "NUMBER" => TokenGroup::Number,
            "STRING" => TokenGroup::String,
            "CHAR" => TokenGroup::Char,
            "FUNCTION" => TokenGroup::Function,
            "IDENTIFIER" => TokenGroup::Identifier,
            other => return Err(format!("unknown token group `{other}`")),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableEntry {
    pub id: u8,
    pub group: TokenGroup,
    /// Exact spelling, or `None` for catch-all groups.
    pub lexeme: Option<String>,
}

const KEYWORDS: [&str; 32] = [
    "auto", "break", "case", "char", "const", "continue", "default", "do", "double", "else",
    "enum", "extern", "float", "for", "goto", "if", "int", "long", "register", "return", "short",
    "signed", "sizeof", "static", "struct", "switch", "typedef", "union", "unsigned", "void",
    "volatile", "while",
];

// `...`, `<<=`, `>>=`, `^=` and `%=` have no entry of their own and lex as
// their shorter prefixes.
const SYMBOLS: [&str; 41] = [
    "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "+=", "-=", "*=", "/=",
    "&=", "|=", "(", ")", "[", "]", "{", "}", ".", ",", ";", ":", "?", "+", "-", "*", "/", "%",
    "&", "|", "^", "~", "!", "=", "<", ">",
];

const FUNCTIONS: [&str; 13] = [
    "strcpy", "strncpy", "strcat", "strncat", "sprintf", "snprintf", "memcpy", "memmove", "memset",
    "gets", "scanf", "malloc", "free",
];

/// The 91-category vocabulary.
///
/// Lookup structures are derived from the entry list at construction, so a
/// table is immutable once built and can be shared freely between threads.
#[derive(Debug, Clone)]
pub struct TokenTable {
    entries: Vec<TableEntry>,
    words: HashMap<String, u8>,
    // Sorted longest first so the first prefix hit is the maximal munch.
    symbols: Vec<(String, u8)>,
    number: u8,
    string: u8,
    char_lit: u8,
    identifier: u8,
    fingerprint: u64,
}

impl TokenTable {
    /// Validates `entries` and builds the lookup structures.
    pub fn from_entries(mut entries: Vec<TableEntry>) -> Result<Self, LexError> {
        let bad = |msg: String| LexError::InvalidTable(msg);
        if entries.len() != TABLE_SIZE {
            return Err(bad(format!(
                "expected {TABLE_SIZE} entries, found {}",
                entries.len()
            )));
        }
        entries.sort_by_key(|e| e.id);
        for (i, e) in entries.iter().enumerate() {
            if e.id as usize != i {
                return Err(bad(format!("ids must cover 0..{} exactly; missing {i}", TABLE_SIZE - 1)));
            }
        }
        if entries[0].group != TokenGroup::Pad {
            return Err(bad("id 0 must be PAD".into()));
        }

        let mut words = HashMap::new();
        let mut symbols = Vec::new();
        let mut singles: HashMap<TokenGroup, u8> = HashMap::new();
        for e in &entries {
            if e.group.is_catch_all() {
                if e.lexeme.is_some() {
                    return Err(bad(format!("catch-all entry {} must use `*`", e.id)));
                }
                if singles.insert(e.group, e.id).is_some() {
                    return Err(bad(format!("duplicate {} entry at id {}", e.group, e.id)));
                }
                continue;
            }
            let lexeme = e
                .lexeme
                .clone()
                .ok_or_else(|| bad(format!("entry {} needs an exact lexeme", e.id)))?;
            let is_word = lexeme
                .bytes()
                .all(|b| b.is_ascii_alphanumeric() || b == b'_');
            let duplicate = match e.group {
                TokenGroup::Symbol if !is_word => {
                    let dup = symbols.iter().any(|(s, _)| *s == lexeme);
                    symbols.push((lexeme.clone(), e.id));
                    dup
                }
                TokenGroup::Symbol => {
                    return Err(bad(format!("symbol `{lexeme}` looks like a word")))
                }
                _ if is_word => words.insert(lexeme.clone(), e.id).is_some(),
                _ => return Err(bad(format!("`{lexeme}` is not a valid {}", e.group))),
            };
            if duplicate {
                return Err(bad(format!("duplicate lexeme `{lexeme}`")));
            }
        }
        let single = |g: TokenGroup| {
            singles
                .get(&g)
                .copied()
                .ok_or_else(|| bad(format!("missing {g} entry")))
        };
        symbols.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then(a.1.cmp(&b.1)));

        let mut table = TokenTable {
            number: single(TokenGroup::Number)?,
            string: single(TokenGroup::String)?,
            char_lit: single(TokenGroup::Char)?,
            identifier: single(TokenGroup::Identifier)?,
            entries,
            words,
            symbols,
            fingerprint: 0,
        };
        table.fingerprint = fingerprint_of(&table.to_config_string());
        Ok(table)
    }

    /// Parses the `<id> <GROUP> <lexeme-or-*>` line format. Blank lines and
    /// lines starting with `#` are ignored.
    pub fn parse_config(text: &str) -> Result<Self, LexError> {
        let mut entries = Vec::with_capacity(TABLE_SIZE);
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: &str| LexError::InvalidTable(format!("line {}: {msg}", n + 1));
            let fields: Vec<&str> = line.split_whitespace().collect();
            let [id, group, lexeme] = fields[..] else {
                return Err(err("expected `<id> <GROUP> <lexeme-or-*>`"));
            };
            let id: u8 = id.parse().map_err(|_| err("bad id"))?;
            let group: TokenGroup = group.parse().map_err(|e: String| err(&e))?;
            // `*` marks a catch-all group; for symbols it is the operator.
            let lexeme = if group.is_catch_all() {
                if lexeme != "*" {
                    return Err(err("catch-all groups take `*` as their lexeme"));
                }
                None
            } else {
                Some(lexeme.to_string())
            };
            entries.push(TableEntry { id, group, lexeme });
        }
        Self::from_entries(entries)
    }

    pub fn load(path: &Path) -> Result<Self, LexError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LexError::InvalidTable(format!("{}: {e}", path.display())))?;
        Self::parse_config(&text)
    }

    pub fn to_config_string(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let lexeme = e.lexeme.as_deref().unwrap_or("*");
            out.push_str(&format!("{} {} {}\n", e.id, e.group, lexeme));
        }
        out
    }

    pub fn entries(&self) -> &[TableEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, id: u8) -> Option<&TableEntry> {
        self.entries.get(id as usize)
    }

    pub fn group_of(&self, id: u8) -> Option<TokenGroup> {
        self.entry(id).map(|e| e.group)
    }

    /// Id of the entry spelled exactly `lexeme`, if any.
    pub fn id_of(&self, lexeme: &str) -> Option<u8> {
        self.words
            .get(lexeme)
            .or_else(|| self.symbols.iter().find(|(s, _)| s == lexeme).map(|(_, id)| id))
            .copied()
    }

    /// Keyword or function id for a word, falling back to IDENTIFIER.
    pub(crate) fn classify_word(&self, word: &str) -> u8 {
        self.words.get(word).copied().unwrap_or(self.identifier)
    }

    /// Longest symbol that prefixes `rest`.
    pub(crate) fn match_symbol(&self, rest: &[u8]) -> Option<(usize, u8)> {
        self.symbols
            .iter()
            .find(|(s, _)| rest.starts_with(s.as_bytes()))
            .map(|(s, id)| (s.len(), *id))
    }

    pub fn number_id(&self) -> u8 {
        self.number
    }

    pub fn string_id(&self) -> u8 {
        self.string
    }

    pub fn char_id(&self) -> u8 {
        self.char_lit
    }

    pub fn identifier_id(&self) -> u8 {
        self.identifier
    }

    /// Stable hash of the table's canonical config text. Models and corpora
    /// record it so data tokenized under one table is never fed to a model
    /// trained under another.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }
}

impl Default for TokenTable {
    fn default() -> Self {
        default_token_table()
    }
}

fn fingerprint_of(config: &str) -> u64 {
    let digest = Sha256::digest(config.as_bytes());
    let mut first = [0u8; 8];
    first.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(first)
}

/// The built-in table: PAD, the 32 C89 keywords, 41 operators and
/// punctuators, NUMBER, STRING, CHAR, 13 library functions that commonly
/// appear in memory-safety bugs, and IDENTIFIER.
pub fn default_token_table() -> TokenTable {
    let mut entries = Vec::with_capacity(TABLE_SIZE);
    let mut push = |group: TokenGroup, lexeme: Option<&str>| {
        let id = entries.len() as u8;
        entries.push(TableEntry {
            id,
            group,
            lexeme: lexeme.map(str::to_string),
        });
    };
    push(TokenGroup::Pad, None);
    for kw in KEYWORDS {
        push(TokenGroup::Keyword, Some(kw));
    }
    for sym in SYMBOLS {
        push(TokenGroup::Symbol, Some(sym));
    }
    push(TokenGroup::Number, None);
    push(TokenGroup::String, None);
    push(TokenGroup::Char, None);
    for f in FUNCTIONS {
        push(TokenGroup::Function, Some(f));
    }
    push(TokenGroup::Identifier, None);
    TokenTable::from_entries(entries).expect("built-in token table is valid")
}
