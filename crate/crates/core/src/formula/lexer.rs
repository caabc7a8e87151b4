use super::FormulaError;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    LParen,
    RParen,
    Comma,
    Eof,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Token {
    pub tok: Tok,
    pub pos: usize,
}

const BLOCKED_WORDS: &[&str] = &[
    "import", "from", "exec", "eval", "open", "lambda", "for", "while", "if", "else", "elif",
    "def", "class", "return", "yield", "with", "try", "except", "raise", "global", "nonlocal",
    "del", "assert", "pass", "break", "continue", "globals", "locals", "getattr", "setattr",
    "compile", "input", "print", "os", "sys", "subprocess", "and", "or", "not", "in", "is",
];

fn blocked(pos: usize, construct: impl Into<String>) -> FormulaError {
    FormulaError::Blocked {
        pos,
        construct: construct.into(),
    }
}

pub(crate) fn tokenize(src: &str) -> Result<Vec<Token>, FormulaError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let pos = i;
        match c {
            ' ' | '\t' | '\r' => {
                i += 1;
                continue;
            }
            '\n' => return Err(blocked(pos, "multiple statements (newline)")),
            '+' => out.push(Token { tok: Tok::Plus, pos }),
            '-' => out.push(Token { tok: Tok::Minus, pos }),
            '*' if bytes.get(i + 1) == Some(&b'*') => {
                return Err(blocked(pos, "power operator `**`"))
            }
            '*' => out.push(Token { tok: Tok::Star, pos }),
            '/' => out.push(Token { tok: Tok::Slash, pos }),
            '(' => out.push(Token { tok: Tok::LParen, pos }),
            ')' => out.push(Token { tok: Tok::RParen, pos }),
            ',' => out.push(Token { tok: Tok::Comma, pos }),
            '^' => return Err(blocked(pos, "power operator `^`")),
            ';' => return Err(blocked(pos, "statement separator `;`")),
            '=' => return Err(blocked(pos, "assignment or comparison `=`")),
            '<' | '>' | '!' | '&' | '|' => {
                return Err(blocked(pos, format!("comparison/logical operator `{c}`")))
            }
            '\'' | '"' => return Err(blocked(pos, "string literal")),
            '[' | ']' | '{' | '}' => return Err(blocked(pos, format!("indexing or collection `{c}`"))),
            '0'..='9' | '.' => {
                let (value, end) = lex_number(src, i)?;
                i = end;
                out.push(Token { tok: Tok::Num(value), pos });
                continue;
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < bytes.len()
                    && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'.')
                {
                    i += 1;
                }
                let word = &src[start..i];
                out.push(Token {
                    tok: Tok::Ident(resolve_ident(word, start)?),
                    pos,
                });
                continue;
            }
            other => {
                return Err(FormulaError::Syntax {
                    pos,
                    message: format!("unexpected character `{other}`"),
                })
            }
        }
        i += 1;
    }
    out.push(Token {
        tok: Tok::Eof,
        pos: src.len(),
    });
    Ok(out)
}

/// Strips an `np.`/`numpy.` prefix; any other dotted name is attribute access.
fn resolve_ident(word: &str, pos: usize) -> Result<String, FormulaError> {
    let base = match word.split_once('.') {
        None => word,
        Some(("np" | "numpy", rest)) if !rest.contains('.') && !rest.is_empty() => rest,
        Some(_) => return Err(blocked(pos, format!("attribute access `{word}`"))),
    };
    if base.starts_with("__") || BLOCKED_WORDS.contains(&base) {
        return Err(blocked(pos, format!("`{base}`")));
    }
    Ok(base.to_string())
}

fn lex_number(src: &str, start: usize) -> Result<(f64, usize), FormulaError> {
    let bytes = src.as_bytes();
    let mut i = start;
    let digits = |i: &mut usize| {
        let s = *i;
        while *i < bytes.len() && bytes[*i].is_ascii_digit() {
            *i += 1;
        }
        *i - s
    };
    let mut n = digits(&mut i);
    if i < bytes.len() && bytes[i] == b'.' {
        i += 1;
        n += digits(&mut i);
    }
    if n == 0 {
        return Err(FormulaError::Syntax {
            pos: start,
            message: "malformed number".into(),
        });
    }
    if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
        let mut j = i + 1;
        if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
            j += 1;
        }
        let mut k = j;
        if digits(&mut k) > 0 {
            i = k;
        }
    }
    if i < bytes.len() && ((bytes[i] as char).is_ascii_alphabetic() || bytes[i] == b'_' || bytes[i] == b'.') {
        return Err(FormulaError::Syntax {
            pos: i,
            message: "identifier directly after number".into(),
        });
    }
    let value: f64 = src[start..i].parse().map_err(|_| FormulaError::Syntax {
        pos: start,
        message: "malformed number".into(),
    })?;
    if !value.is_finite() {
        return Err(FormulaError::Syntax {
            pos: start,
            message: "numeric literal overflows".into(),
        });
    }
    Ok((value, i))
}
