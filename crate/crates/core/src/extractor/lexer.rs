//! Java tokenizer.
//!
//! `>` is always emitted as a single-character token carrying a `joined`
//! flag (no whitespace before the next token) so that the parser can close
//! nested type arguments (`List<List<T>>`) and still rebuild `>>`, `>>>`,
//! `>=`, `>>=` and `>>>=` in expression position. [`merge_angles`] performs
//! that reconstruction for consumers that only want lexical tokens.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Ident,
    Keyword,
    IntLiteral,
    FloatLiteral,
    CharLiteral,
    StringLiteral,
    Operator,
    Eof,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    pub line: u32,
    pub column: u32,
    pub start: usize,
    pub end: usize,
    /// The next token starts immediately after this one.
    pub joined: bool,
}

impl Token {
    pub fn is(&self, text: &str) -> bool {
        matches!(self.kind, TokenKind::Operator | TokenKind::Keyword) && self.text == text
    }

    pub fn is_ident(&self) -> bool {
        self.kind == TokenKind::Ident
    }

    pub fn is_literal(&self) -> bool {
        matches!(
            self.kind,
            TokenKind::IntLiteral | TokenKind::FloatLiteral | TokenKind::CharLiteral | TokenKind::StringLiteral
        ) || (self.kind == TokenKind::Keyword && matches!(self.text.as_str(), "true" | "false" | "null"))
    }
}

const KEYWORDS: &[&str] = &[
    "abstract",
    "assert",
    "boolean",
    "break",
    "byte",
    "case",
    "catch",
    "char",
    "class",
    "const",
    "continue",
    "default",
    "do",
    "double",
    "else",
    "enum",
    "extends",
    "final",
    "finally",
    "float",
    "for",
    "goto",
    "if",
    "implements",
    "import",
    "instanceof",
    "int",
    "interface",
    "long",
    "native",
    "new",
    "package",
    "private",
    "protected",
    "public",
    "return",
    "short",
    "static",
    "strictfp",
    "super",
    "switch",
    "synchronized",
    "this",
    "throw",
    "throws",
    "transient",
    "try",
    "void",
    "volatile",
    "while",
    "true",
    "false",
    "null",
];

// Longest first within each leading character.
const OPERATORS: &[&str] = &[
    "...", "<<=", "->", "::", "++", "--", "&&", "||", "==", "!=", "<=", "<<", "+=", "-=", "*=", "/=", "%=", "&=", "|=",
    "^=", "(", ")", "{", "}", "[", "]", ";", ",", ".", "@", "=", "<", ">", "!", "~", "?", ":", "+", "-", "*", "/", "&",
    "|", "^", "%",
];

pub fn is_keyword(word: &str) -> bool {
    KEYWORDS.contains(&word)
}

pub fn tokenize(source: &str) -> Result<Vec<Token>> {
    let bytes = source.as_bytes();
    let mut tokens: Vec<Token> = Vec::new();
    let mut pos = 0usize;
    let mut line = 1u32;
    let mut line_start = 0usize;

    let err = |line: u32, column: u32, message: String| Error::Parse { line, column, message };

    while pos < bytes.len() {
        let c = bytes[pos];
        if c == b'\n' {
            line += 1;
            pos += 1;
            line_start = pos;
            continue;
        }
        if c.is_ascii_whitespace() {
            pos += 1;
            continue;
        }
        if c == b'/' && bytes.get(pos + 1) == Some(&b'/') {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        if c == b'/' && bytes.get(pos + 1) == Some(&b'*') {
            let (start_line, start_col) = (line, (pos - line_start) as u32 + 1);
            pos += 2;
            loop {
                if pos + 1 >= bytes.len() {
                    return Err(err(start_line, start_col, "unterminated comment".into()));
                }
                if bytes[pos] == b'*' && bytes[pos + 1] == b'/' {
                    pos += 2;
                    break;
                }
                if bytes[pos] == b'\n' {
                    line += 1;
                    line_start = pos + 1;
                }
                pos += 1;
            }
            continue;
        }

        let start = pos;
        let column = (pos - line_start) as u32 + 1;
        let tok_line = line;
        let kind;

        if c == b'_' || c == b'$' || c.is_ascii_alphabetic() || c >= 0x80 {
            while pos < bytes.len() {
                let b = bytes[pos];
                if b == b'_' || b == b'$' || b.is_ascii_alphanumeric() || b >= 0x80 {
                    pos += 1;
                } else {
                    break;
                }
            }
            kind = if is_keyword(&source[start..pos]) {
                TokenKind::Keyword
            } else {
                TokenKind::Ident
            };
        } else if c.is_ascii_digit() || (c == b'.' && bytes.get(pos + 1).is_some_and(u8::is_ascii_digit)) {
            kind = lex_number(bytes, &mut pos);
        } else if c == b'"' {
            if bytes[pos..].starts_with(b"\"\"\"") {
                pos += 3;
                loop {
                    if pos >= bytes.len() {
                        return Err(err(tok_line, column, "unterminated text block".into()));
                    }
                    if bytes[pos] == b'\\' {
                        pos += 2;
                        continue;
                    }
                    if bytes[pos..].starts_with(b"\"\"\"") {
                        pos += 3;
                        break;
                    }
                    if bytes[pos] == b'\n' {
                        line += 1;
                        line_start = pos + 1;
                    }
                    pos += 1;
                }
            } else {
                pos += 1;
                loop {
                    match bytes.get(pos) {
                        None | Some(b'\n') => return Err(err(tok_line, column, "unterminated string literal".into())),
                        Some(b'\\') => pos += 2,
                        Some(b'"') => {
                            pos += 1;
                            break;
                        }
                        Some(_) => pos += 1,
                    }
                }
            }
            kind = TokenKind::StringLiteral;
        } else if c == b'\'' {
            pos += 1;
            loop {
                match bytes.get(pos) {
                    None | Some(b'\n') => return Err(err(tok_line, column, "unterminated char literal".into())),
                    Some(b'\\') => pos += 2,
                    Some(b'\'') => {
                        pos += 1;
                        break;
                    }
                    Some(_) => pos += 1,
                }
            }
            kind = TokenKind::CharLiteral;
        } else if c == b'>' {
            pos += 1;
            kind = TokenKind::Operator;
        } else if let Some(op) = OPERATORS.iter().find(|op| bytes[pos..].starts_with(op.as_bytes())) {
            pos += op.len();
            kind = TokenKind::Operator;
        } else {
            let ch = source[pos..].chars().next().unwrap_or('?');
            return Err(err(tok_line, column, format!("unexpected character `{ch}`")));
        }

        if let Some(prev) = tokens.last_mut() {
            prev.joined = prev.end == start;
        }
        tokens.push(Token {
            kind,
            text: source[start..pos].to_string(),
            line: tok_line,
            column,
            start,
            end: pos,
            joined: false,
        });
    }

    tokens.push(Token {
        kind: TokenKind::Eof,
        text: String::new(),
        line,
        column: (pos - line_start) as u32 + 1,
        start: pos,
        end: pos,
        joined: false,
    });
    Ok(tokens)
}

fn lex_number(bytes: &[u8], pos: &mut usize) -> TokenKind {
    let start = *pos;
    let digit_like = |b: u8| b.is_ascii_hexdigit() || b == b'_';
    if bytes[start] == b'0' && matches!(bytes.get(start + 1), Some(b'x' | b'X' | b'b' | b'B')) {
        *pos += 2;
        while *pos < bytes.len() && digit_like(bytes[*pos]) {
            *pos += 1;
        }
        if matches!(bytes.get(*pos), Some(b'l' | b'L')) {
            *pos += 1;
        }
        return TokenKind::IntLiteral;
    }
    let mut float = false;
    while *pos < bytes.len() && (bytes[*pos].is_ascii_digit() || bytes[*pos] == b'_') {
        *pos += 1;
    }
    if bytes.get(*pos) == Some(&b'.')
        && bytes
            .get(*pos + 1)
            .is_none_or(|b| b.is_ascii_digit() || !b.is_ascii_alphabetic() && *b != b'.')
    {
        float = true;
        *pos += 1;
        while *pos < bytes.len() && (bytes[*pos].is_ascii_digit() || bytes[*pos] == b'_') {
            *pos += 1;
        }
    }
    if matches!(bytes.get(*pos), Some(b'e' | b'E')) {
        let mut p = *pos + 1;
        if matches!(bytes.get(p), Some(b'+' | b'-')) {
            p += 1;
        }
        if bytes.get(p).is_some_and(u8::is_ascii_digit) {
            float = true;
            *pos = p;
            while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
                *pos += 1;
            }
        }
    }
    match bytes.get(*pos) {
        Some(b'f' | b'F' | b'd' | b'D') => {
            *pos += 1;
            TokenKind::FloatLiteral
        }
        Some(b'l' | b'L') => {
            *pos += 1;
            TokenKind::IntLiteral
        }
        _ if float => TokenKind::FloatLiteral,
        _ => TokenKind::IntLiteral,
    }
}

/// Rebuilds `>`-prefixed operators split by [`tokenize`].
pub fn merge_angles(tokens: &[Token]) -> Vec<Token> {
    let mut out: Vec<Token> = Vec::with_capacity(tokens.len());
    let mut i = 0;
    while i < tokens.len() {
        let tok = &tokens[i];
        if tok.kind == TokenKind::Operator && tok.text == ">" {
            let (text, used) = angle_operator(tokens, i);
            let last = &tokens[i + used - 1];
            out.push(Token {
                kind: TokenKind::Operator,
                text: text.to_string(),
                line: tok.line,
                column: tok.column,
                start: tok.start,
                end: last.end,
                joined: last.joined,
            });
            i += used;
        } else {
            out.push(tok.clone());
            i += 1;
        }
    }
    out
}

/// The operator formed by the `>` at `i` and the tokens glued to it:
/// one of `>`, `>=`, `>>`, `>>=`, `>>>`, `>>>=`, with the token count used.
pub(crate) fn angle_operator(tokens: &[Token], i: usize) -> (&'static str, usize) {
    let glued = |k: usize, text: &str| -> bool {
        tokens[i + k - 1].joined
            && tokens
                .get(i + k)
                .is_some_and(|t| t.kind == TokenKind::Operator && t.text == text)
    };
    if glued(1, ">") {
        if glued(2, ">") {
            if glued(3, "=") {
                return (">>>=", 4);
            }
            return (">>>", 3);
        }
        if glued(2, "=") {
            return (">>=", 3);
        }
        return (">>", 2);
    }
    if glued(1, "=") {
        return (">=", 2);
    }
    if glued(1, "==") {
        // `a >== b` is not Java; keep the `>` alone.
        return (">", 1);
    }
    (">", 1)
}

/// Lexical tokens of a code fragment with angle operators merged.
pub fn fragment_tokens(fragment: &str) -> Result<Vec<String>> {
    let toks = tokenize(fragment)?;
    Ok(merge_angles(&toks)
        .into_iter()
        .filter(|t| t.kind != TokenKind::Eof)
        .map(|t| t.text)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts(src: &str) -> Vec<String> {
        fragment_tokens(src).unwrap()
    }

    #[test]
    fn relational_and_shift_operators_merge() {
        assert_eq!(texts("a >= b"), ["a", ">=", "b"]);
        assert_eq!(texts("a >>> 2"), ["a", ">>>", "2"]);
        assert_eq!(texts("x >>= 1"), ["x", ">>=", "1"]);
        assert_eq!(texts("x >>>= 1"), ["x", ">>>=", "1"]);
        assert_eq!(texts("a > = b"), ["a", ">", "=", "b"]);
    }

    #[test]
    fn generics_keep_separate_angles() {
        let toks = tokenize("List<List<String>> x;").unwrap();
        let gts: Vec<_> = toks.iter().filter(|t| t.text == ">").collect();
        assert_eq!(gts.len(), 2);
        assert!(gts[0].joined);
    }

    #[test]
    fn literals_and_comments() {
        let src = "/* c */ x = 0x1F + 1_000L + 3.5e-2f + .5 + 'c' + \"s\\\"t\"; // tail";
        assert_eq!(
            texts(src),
            [
                "x",
                "=",
                "0x1F",
                "+",
                "1_000L",
                "+",
                "3.5e-2f",
                "+",
                ".5",
                "+",
                "'c'",
                "+",
                "\"s\\\"t\"",
                ";"
            ]
        );
    }

    #[test]
    fn tracks_lines() {
        let toks = tokenize("a\n/* x\n y */ b\n\"\"\"\ntext\n\"\"\" c").unwrap();
        assert_eq!(toks[0].line, 1);
        assert_eq!(toks[1].line, 3);
        assert_eq!(toks[2].line, 4);
        assert_eq!(toks[3].line, 6);
    }

    #[test]
    fn method_reference_and_varargs() {
        assert_eq!(texts("String::valueOf"), ["String", "::", "valueOf"]);
        assert_eq!(texts("int... xs"), ["int", "...", "xs"]);
        assert_eq!(texts("x++;"), ["x", "++", ";"]);
    }

    #[test]
    fn rejects_unterminated_string() {
        assert!(matches!(tokenize("\"abc"), Err(Error::Parse { .. })));
    }
}
