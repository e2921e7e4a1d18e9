use super::QueryError;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    /// Identifier; `quoted` for backtick form, which never reads as a keyword.
    Ident {
        text: String,
        quoted: bool,
    },
    Str(String),
    /// Numeric literal text, sign excluded.
    Number(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Colon,
    Comma,
    Dot,
    Minus,
    Plus,
    Star,
    Gt,
    Lt,
    Eq,
    Ne,
    Le,
    Ge,
    Semicolon,
    Dollar,
    Pipe,
    Eof,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Ident { text, .. } => format!("'{text}'"),
            Tok::Str(s) => format!("string '{s}'"),
            Tok::Number(n) => format!("number {n}"),
            Tok::Eof => "end of input".to_string(),
            other => format!("'{}'", other.symbol()),
        }
    }

    fn symbol(&self) -> &'static str {
        match self {
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBracket => "[",
            Tok::RBracket => "]",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::Colon => ":",
            Tok::Comma => ",",
            Tok::Dot => ".",
            Tok::Minus => "-",
            Tok::Plus => "+",
            Tok::Star => "*",
            Tok::Gt => ">",
            Tok::Lt => "<",
            Tok::Eq => "=",
            Tok::Ne => "<>",
            Tok::Le => "<=",
            Tok::Ge => ">=",
            Tok::Semicolon => ";",
            Tok::Dollar => "$",
            Tok::Pipe => "|",
            _ => "?",
        }
    }
}

/// A token plus its 1-based character offset.
#[derive(Debug, Clone)]
pub(crate) struct Spanned {
    pub tok: Tok,
    pub pos: usize,
}

pub(crate) fn tokenize(text: &str) -> Result<Vec<Spanned>, QueryError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let pos = i + 1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let simple = match c {
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '[' => Some(Tok::LBracket),
            ']' => Some(Tok::RBracket),
            '{' => Some(Tok::LBrace),
            '}' => Some(Tok::RBrace),
            ':' => Some(Tok::Colon),
            ',' => Some(Tok::Comma),
            '-' => Some(Tok::Minus),
            '+' => Some(Tok::Plus),
            '*' => Some(Tok::Star),
            '=' => Some(Tok::Eq),
            ';' => Some(Tok::Semicolon),
            '$' => Some(Tok::Dollar),
            '|' => Some(Tok::Pipe),
            _ => None,
        };
        if let Some(tok) = simple {
            out.push(Spanned { tok, pos });
            i += 1;
            continue;
        }
        match c {
            '<' => {
                let tok = match chars.get(i + 1) {
                    Some('>') => {
                        i += 1;
                        Tok::Ne
                    }
                    Some('=') => {
                        i += 1;
                        Tok::Le
                    }
                    _ => Tok::Lt,
                };
                out.push(Spanned { tok, pos });
                i += 1;
            }
            '>' => {
                let tok = if chars.get(i + 1) == Some(&'=') {
                    i += 1;
                    Tok::Ge
                } else {
                    Tok::Gt
                };
                out.push(Spanned { tok, pos });
                i += 1;
            }
            '.' if !chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()) => {
                out.push(Spanned { tok: Tok::Dot, pos });
                i += 1;
            }
            '\'' | '"' => {
                let quote = c;
                let mut s = String::new();
                i += 1;
                loop {
                    match chars.get(i) {
                        None => {
                            return Err(QueryError::Syntax {
                                position: pos,
                                expected: vec![format!("closing {quote}")],
                                found: "end of input".into(),
                            })
                        }
                        Some('\\') => {
                            let esc = chars.get(i + 1).copied().ok_or(QueryError::Syntax {
                                position: i + 1,
                                expected: vec!["escape character".into()],
                                found: "end of input".into(),
                            })?;
                            s.push(match esc {
                                'n' => '\n',
                                't' => '\t',
                                'r' => '\r',
                                other => other,
                            });
                            i += 2;
                        }
                        Some(&ch) if ch == quote => {
                            i += 1;
                            break;
                        }
                        Some(&ch) => {
                            s.push(ch);
                            i += 1;
                        }
                    }
                }
                out.push(Spanned { tok: Tok::Str(s), pos });
            }
            '`' => {
                let mut s = String::new();
                i += 1;
                loop {
                    match chars.get(i) {
                        None => {
                            return Err(QueryError::Syntax {
                                position: pos,
                                expected: vec!["closing `".into()],
                                found: "end of input".into(),
                            })
                        }
                        Some('`') if chars.get(i + 1) == Some(&'`') => {
                            s.push('`');
                            i += 2;
                        }
                        Some('`') => {
                            i += 1;
                            break;
                        }
                        Some(&ch) => {
                            s.push(ch);
                            i += 1;
                        }
                    }
                }
                if s.is_empty() {
                    return Err(QueryError::Syntax {
                        position: pos,
                        expected: vec!["identifier".into()],
                        found: "``".into(),
                    });
                }
                out.push(Spanned {
                    tok: Tok::Ident { text: s, quoted: true },
                    pos,
                });
            }
            c if c.is_ascii_digit() || c == '.' => {
                let start = i;
                while chars.get(i).is_some_and(|d| d.is_ascii_digit()) {
                    i += 1;
                }
                if chars.get(i) == Some(&'.') && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()) {
                    i += 1;
                    while chars.get(i).is_some_and(|d| d.is_ascii_digit()) {
                        i += 1;
                    }
                }
                if matches!(chars.get(i), Some('e' | 'E')) {
                    let mut j = i + 1;
                    if matches!(chars.get(j), Some('+' | '-')) {
                        j += 1;
                    }
                    if chars.get(j).is_some_and(|d| d.is_ascii_digit()) {
                        i = j;
                        while chars.get(i).is_some_and(|d| d.is_ascii_digit()) {
                            i += 1;
                        }
                    }
                }
                let text: String = chars[start..i].iter().collect();
                out.push(Spanned {
                    tok: Tok::Number(text),
                    pos,
                });
            }
            c if c.is_alphabetic() || c == '_' => {
                let start = i;
                while chars.get(i).is_some_and(|d| d.is_alphanumeric() || *d == '_') {
                    i += 1;
                }
                out.push(Spanned {
                    tok: Tok::Ident {
                        text: chars[start..i].iter().collect(),
                        quoted: false,
                    },
                    pos,
                });
            }
            other => {
                return Err(QueryError::Syntax {
                    position: pos,
                    expected: vec!["token".into()],
                    found: format!("'{other}'"),
                })
            }
        }
    }
    out.push(Spanned {
        tok: Tok::Eof,
        pos: chars.len() + 1,
    });
    Ok(out)
}
