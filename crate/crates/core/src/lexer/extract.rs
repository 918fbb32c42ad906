use super::{is_ident_continue, mask_source, LexError};

/// A top-level function definition located in a source file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionSpan {
    pub name: String,
    pub start_byte: usize,
    pub end_byte: usize,
    pub text: String,
}

const NOT_FUNCTIONS: [&str; 6] = ["if", "for", "while", "switch", "sizeof", "return"];

/// Finds every top-level function definition by signature-then-brace
/// matching over a masked copy of the source, so braces inside comments,
/// literals and directive lines never count.
///
/// A brace block at file scope is a function body when the text between the
/// previous top-level `;`/`}` and the `{` ends in a parenthesised parameter
/// list preceded by a name. Other blocks (struct, enum and initializer
/// bodies) are skipped whole.
pub fn extract_functions(source_text: &str) -> Result<Vec<FunctionSpan>, LexError> {
    let masked = mask_source(source_text);
    let mut spans = Vec::new();
    let mut boundary = 0;
    let mut i = 0;

    while i < masked.len() {
        match masked[i] {
            b';' | b'}' => {
                boundary = i + 1;
                i += 1;
            }
            b'{' => {
                let close = matching_brace(&masked, i).ok_or(LexError::UnbalancedBraces { offset: i })?;
                if let Some(name) = function_name(&masked[boundary..i]) {
                    let start = boundary
                        + masked[boundary..i]
                            .iter()
                            .position(|b| !b.is_ascii_whitespace())
                            .unwrap_or(0);
                    spans.push(FunctionSpan {
                        name: String::from_utf8_lossy(name).into_owned(),
                        start_byte: start,
                        end_byte: close + 1,
                        text: source_text[start..close + 1].to_string(),
                    });
                }
                boundary = close + 1;
                i = close + 1;
            }
            _ => i += 1,
        }
    }
    Ok(spans)
}

fn matching_brace(masked: &[u8], open: usize) -> Option<usize> {
    let mut depth = 0usize;
    for (k, &b) in masked[open..].iter().enumerate() {
        match b {
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(open + k);
                }
            }
            _ => {}
        }
    }
    None
}

/// Name of the function whose header is `header`, or `None` when the header
/// is not a function signature. Trailing `__attribute__((...))` style
/// annotations are stepped over.
fn function_name(header: &[u8]) -> Option<&[u8]> {
    let mut end = trim_end(header, header.len());
    loop {
        if end == 0 || header[end - 1] != b')' {
            return None;
        }
        let open = matching_paren_back(header, end - 1)?;
        let name_end = trim_end(header, open);
        let mut name_start = name_end;
        while name_start > 0 && is_ident_continue(header[name_start - 1]) {
            name_start -= 1;
        }
        let name = &header[name_start..name_end];
        if name.is_empty() || name[0].is_ascii_digit() {
            return None;
        }
        if name.starts_with(b"__") && trim_end(header, name_start) > 0 {
            let before = trim_end(header, name_start);
            if header[before - 1] == b')' {
                end = before;
                continue;
            }
        }
        if NOT_FUNCTIONS.iter().any(|kw| kw.as_bytes() == name) {
            return None;
        }
        // `x = f(y) {` style initializers are not definitions.
        if header[..name_start].contains(&b'=') {
            return None;
        }
        return Some(name);
    }
}

fn trim_end(bytes: &[u8], mut end: usize) -> usize {
    while end > 0 && bytes[end - 1].is_ascii_whitespace() {
        end -= 1;
    }
    end
}

fn matching_paren_back(bytes: &[u8], close: usize) -> Option<usize> {
    let mut depth = 0usize;
    for k in (0..=close).rev() {
        match bytes[k] {
            b')' => depth += 1,
            b'(' => {
                depth -= 1;
                if depth == 0 {
                    return Some(k);
                }
            }
            _ => {}
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexer::{default_token_table, tokenize};

    #[test]
    fn single_function() {
        let spans = extract_functions("int f(void){return 0;}").unwrap();
        assert_eq!(spans.len(), 1);
        assert_eq!(spans[0].name, "f");
        assert_eq!(spans[0].start_byte, 0);
        assert_eq!(spans[0].text, "int f(void){return 0;}");
    }

    #[test]
    fn empty_input() {
        assert!(extract_functions("").unwrap().is_empty());
    }

    const FIXTURE: &str = r#"#include <string.h>
/* helper { not a brace } */
static int counter = 0;

static int
copy_name(char *dst, const char *src)
{
    if (src == NULL) {
        return -1;
    }
    strcpy(dst, src); // "}" in a comment
    return 0;
}

struct pair {
    int a;
    int b;
};

int table[] = { 1, 2, 3 };

void __attribute__((noinline)) reset(struct pair *p)
{
    char c = '{';
    p->a = 0;
#ifdef DEBUG
    p->a = 1;
#endif
    p->b = 0;
}
"#;

    #[test]
    fn struct_between_functions_is_excluded() {
        let spans = extract_functions(FIXTURE).unwrap();
        let names: Vec<_> = spans.iter().map(|s| s.name.as_str()).collect();
        assert_eq!(names, ["copy_name", "reset"]);

        // Hand-annotated boundaries.
        assert!(spans[0].text.starts_with("static int\ncopy_name("));
        assert!(spans[0].text.ends_with("return 0;\n}"));
        assert!(spans[1].text.starts_with("void __attribute__((noinline)) reset("));
        assert!(spans[1].text.ends_with("p->b = 0;\n}"));
        assert!(spans[0].end_byte <= spans[1].start_byte);
        for s in &spans {
            assert_eq!(&FIXTURE[s.start_byte..s.end_byte], s.text);
        }
    }

    #[test]
    fn span_tokens_cover_exactly_the_function_regions() {
        let table = default_token_table();
        let spans = extract_functions(FIXTURE).unwrap();
        let inside = |off: usize| spans.iter().any(|s| s.start_byte <= off && off < s.end_byte);
        let from_file: Vec<_> = tokenize(FIXTURE, &table)
            .unwrap()
            .into_iter()
            .filter(|t| inside(t.byte_offset))
            .map(|t| t.token_id)
            .collect();
        let from_spans: Vec<_> = spans
            .iter()
            .flat_map(|s| tokenize(&s.text, &table).unwrap())
            .map(|t| t.token_id)
            .collect();
        assert_eq!(from_file, from_spans);
    }

    #[test]
    fn unbalanced_braces_report_the_open_brace() {
        let src = "int ok(void) { return 1; }\nint bad(void) {\n  if (x) {\n";
        let open = src.find("bad(void) {").unwrap() + "bad(void) ".len();
        assert_eq!(
            extract_functions(src),
            Err(LexError::UnbalancedBraces { offset: open })
        );
    }

    #[test]
    fn prototypes_and_initializers_are_not_functions() {
        let src = "int f(int);\nstruct s v = { 0 };\nint (*fp)(int) = 0;\nint g(int a) { return a; }";
        let spans = extract_functions(src).unwrap();
        assert_eq!(spans.len(), 1);
        assert_eq!(spans[0].name, "g");
    }
}
