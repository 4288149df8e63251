use super::error::{ParseError, ParseErrorKind};

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    Word(String),
    /// Numeric literal; `int` is set when it has no fraction or exponent.
    Number {
        value: f64,
        int: Option<u64>,
    },
    /// Numeric literal with an `i` suffix.
    Imag(f64),
    Str(String),
    Sym(char),
    Newline,
}

impl TokenKind {
    pub fn describe(&self) -> String {
        match self {
            TokenKind::Word(w) => format!("`{w}`"),
            TokenKind::Number { .. } => "number".into(),
            TokenKind::Imag(_) => "imaginary number".into(),
            TokenKind::Str(_) => "string".into(),
            TokenKind::Sym(c) => format!("`{c}`"),
            TokenKind::Newline => "end of line".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub line: usize,
    pub column: usize,
}

const SYMBOLS: &[char] = &['(', ')', ',', '=', '[', ']', ';', '+', '-'];

fn ident_start(c: char) -> bool {
    c.is_alphabetic() || c == '_'
}

fn ident_continue(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '\''
}

/// Splits source text into tokens. Comments run from `#` to end of line;
/// every source line ends with a `Newline` token.
pub fn tokenize(source: &str) -> Result<Vec<Token>, ParseError> {
    let mut tokens = Vec::new();
    for (li, line) in source.split('\n').enumerate() {
        let line_no = li + 1;
        let chars: Vec<char> = line.trim_end_matches('\r').chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let column = i + 1;
            let err = |kind, msg: String| ParseError::new(kind, line_no, column, msg);
            if c == '#' {
                break;
            }
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            if ident_start(c) {
                let start = i;
                i += 1;
                loop {
                    while i < chars.len() && ident_continue(chars[i]) {
                        i += 1;
                    }
                    // hyphenated words such as `spin-z` and `cross-check`
                    if i + 1 < chars.len() && chars[i] == '-' && ident_start(chars[i + 1]) {
                        i += 1;
                        continue;
                    }
                    break;
                }
                let word: String = chars[start..i].iter().collect();
                tokens.push(Token { kind: TokenKind::Word(word), line: line_no, column });
                continue;
            }
            if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
                let start = i;
                let mut int = true;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                if i < chars.len() && chars[i] == '.' {
                    int = false;
                    i += 1;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                        j += 1;
                    }
                    let digits_start = j;
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                    if j == digits_start {
                        return Err(err(ParseErrorKind::Lexical, "malformed exponent in number".into()));
                    }
                    int = false;
                    i = j;
                }
                let text: String = chars[start..i].iter().collect();
                let value: f64 =
                    text.parse().map_err(|_| err(ParseErrorKind::Lexical, format!("malformed number `{text}`")))?;
                if !value.is_finite() {
                    return Err(err(ParseErrorKind::Lexical, format!("number `{text}` is out of range")));
                }
                let imaginary =
                    i < chars.len() && chars[i] == 'i' && !chars.get(i + 1).is_some_and(|&d| ident_continue(d));
                if imaginary {
                    i += 1;
                    tokens.push(Token { kind: TokenKind::Imag(value), line: line_no, column });
                    continue;
                }
                if i < chars.len() && (ident_continue(chars[i]) || chars[i] == '.') {
                    return Err(ParseError::new(
                        ParseErrorKind::Lexical,
                        line_no,
                        i + 1,
                        format!("unexpected character `{}` after number", chars[i]),
                    ));
                }
                let int = if int { text.parse::<u64>().ok() } else { None };
                tokens.push(Token { kind: TokenKind::Number { value, int }, line: line_no, column });
                continue;
            }
            if c == '"' {
                let mut text = String::new();
                i += 1;
                let mut closed = false;
                while i < chars.len() {
                    match chars[i] {
                        '"' => {
                            closed = true;
                            i += 1;
                            break;
                        }
                        '\\' if i + 1 < chars.len() && matches!(chars[i + 1], '"' | '\\') => {
                            text.push(chars[i + 1]);
                            i += 2;
                        }
                        '\\' => {
                            return Err(ParseError::new(
                                ParseErrorKind::Lexical,
                                line_no,
                                i + 1,
                                "unknown escape in string".into(),
                            ))
                        }
                        ch => {
                            text.push(ch);
                            i += 1;
                        }
                    }
                }
                if !closed {
                    return Err(err(ParseErrorKind::Lexical, "unterminated string".into()));
                }
                tokens.push(Token { kind: TokenKind::Str(text), line: line_no, column });
                continue;
            }
            if SYMBOLS.contains(&c) {
                tokens.push(Token { kind: TokenKind::Sym(c), line: line_no, column });
                i += 1;
                continue;
            }
            return Err(err(ParseErrorKind::Lexical, format!("unexpected character `{c}`")));
        }
        tokens.push(Token { kind: TokenKind::Newline, line: line_no, column: chars.len() + 1 });
    }
    Ok(tokens)
}
