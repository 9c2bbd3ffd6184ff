use std::fmt;

use super::DslError;

/// Location of a token in the source (1-based line and column).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Span {
    pub line: usize,
    pub column: usize,
    pub offset: usize,
    pub len: usize,
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Keyword {
    FiniteElement,
    VectorElement,
    TestFunction,
    TrialFunction,
    Function,
    Dx,
    Def,
    Return,
    Grad,
    Div,
    Dot,
    Transp,
    Mult,
}

impl Keyword {
    pub fn from_ident(s: &str) -> Option<Self> {
        Some(match s {
            "FiniteElement" => Keyword::FiniteElement,
            "VectorElement" => Keyword::VectorElement,
            "TestFunction" => Keyword::TestFunction,
            "TrialFunction" => Keyword::TrialFunction,
            "Function" | "Coefficient" => Keyword::Function,
            "dx" => Keyword::Dx,
            "def" => Keyword::Def,
            "return" => Keyword::Return,
            "grad" => Keyword::Grad,
            "div" => Keyword::Div,
            "dot" | "inner" => Keyword::Dot,
            "transp" => Keyword::Transp,
            "mult" => Keyword::Mult,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Keyword::FiniteElement => "FiniteElement",
            Keyword::VectorElement => "VectorElement",
            Keyword::TestFunction => "TestFunction",
            Keyword::TrialFunction => "TrialFunction",
            Keyword::Function => "Function",
            Keyword::Dx => "dx",
            Keyword::Def => "def",
            Keyword::Return => "return",
            Keyword::Grad => "grad",
            Keyword::Div => "div",
            Keyword::Dot => "dot",
            Keyword::Transp => "transp",
            Keyword::Mult => "mult",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Punct {
    LParen,
    RParen,
    Comma,
    Assign,
    Plus,
    Minus,
    Star,
    Slash,
    Colon,
}

impl Punct {
    pub fn as_str(self) -> &'static str {
        match self {
            Punct::LParen => "(",
            Punct::RParen => ")",
            Punct::Comma => ",",
            Punct::Assign => "=",
            Punct::Plus => "+",
            Punct::Minus => "-",
            Punct::Star => "*",
            Punct::Slash => "/",
            Punct::Colon => ":",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    Identifier(String),
    Number(f64),
    Str(String),
    Keyword(Keyword),
    Punct(Punct),
    /// End of a logical line (not emitted inside parentheses or after `\`).
    Newline,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Identifier(s) => write!(f, "identifier `{s}`"),
            TokenKind::Number(v) => write!(f, "number `{v}`"),
            TokenKind::Str(s) => write!(f, "string \"{s}\""),
            TokenKind::Keyword(k) => write!(f, "`{}`", k.as_str()),
            TokenKind::Punct(p) => write!(f, "`{}`", p.as_str()),
            TokenKind::Newline => f.write_str("end of line"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: Span,
}

pub fn tokenize(source: &str) -> Result<Vec<Token>, DslError> {
    let chars: Vec<(usize, char)> = source.char_indices().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    let mut line = 1;
    let mut line_start = 0usize;
    let mut depth = 0usize;

    let span_at = |offset: usize, len: usize, line: usize, line_start: usize| Span {
        line,
        column: source[line_start..offset].chars().count() + 1,
        offset,
        len,
    };

    while i < chars.len() {
        let (off, c) = chars[i];
        match c {
            '\n' => {
                if depth == 0 && !matches!(tokens.last(), None | Some(Token { kind: TokenKind::Newline, .. })) {
                    tokens.push(Token {
                        kind: TokenKind::Newline,
                        span: span_at(off, 1, line, line_start),
                    });
                }
                line += 1;
                line_start = off + 1;
                i += 1;
            }
            ' ' | '\t' | '\r' => i += 1,
            '#' => {
                while i < chars.len() && chars[i].1 != '\n' {
                    i += 1;
                }
            }
            '\\' => {
                // explicit line continuation: backslash, optional blanks, newline
                let mut j = i + 1;
                while j < chars.len() && matches!(chars[j].1, ' ' | '\t' | '\r') {
                    j += 1;
                }
                if j < chars.len() && chars[j].1 == '\n' {
                    line += 1;
                    line_start = chars[j].0 + 1;
                    i = j + 1;
                } else if j == chars.len() {
                    i = j;
                } else {
                    let s = span_at(off, 1, line, line_start);
                    return Err(DslError::IllegalCharacter {
                        ch: c,
                        line: s.line,
                        column: s.column,
                    });
                }
            }
            '"' | '\'' => {
                let quote = c;
                let mut j = i + 1;
                let mut text = String::new();
                while j < chars.len() && chars[j].1 != quote {
                    if chars[j].1 == '\n' {
                        break;
                    }
                    text.push(chars[j].1);
                    j += 1;
                }
                if j >= chars.len() || chars[j].1 != quote {
                    let s = span_at(off, 1, line, line_start);
                    return Err(DslError::UnterminatedString {
                        line: s.line,
                        column: s.column,
                    });
                }
                let end = chars[j].0 + 1;
                tokens.push(Token {
                    kind: TokenKind::Str(text),
                    span: span_at(off, end - off, line, line_start),
                });
                i = j + 1;
            }
            c if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|n| n.1.is_ascii_digit())) => {
                let mut j = i;
                while j < chars.len() && chars[j].1.is_ascii_digit() {
                    j += 1;
                }
                if j < chars.len() && chars[j].1 == '.' {
                    j += 1;
                    while j < chars.len() && chars[j].1.is_ascii_digit() {
                        j += 1;
                    }
                }
                if j < chars.len() && matches!(chars[j].1, 'e' | 'E') {
                    let mut k = j + 1;
                    if k < chars.len() && matches!(chars[k].1, '+' | '-') {
                        k += 1;
                    }
                    if k < chars.len() && chars[k].1.is_ascii_digit() {
                        while k < chars.len() && chars[k].1.is_ascii_digit() {
                            k += 1;
                        }
                        j = k;
                    }
                }
                let end = chars.get(j).map_or(source.len(), |x| x.0);
                let text = &source[off..end];
                let value: f64 = text.parse().map_err(|_| {
                    let s = span_at(off, end - off, line, line_start);
                    DslError::IllegalCharacter {
                        ch: c,
                        line: s.line,
                        column: s.column,
                    }
                })?;
                tokens.push(Token {
                    kind: TokenKind::Number(value),
                    span: span_at(off, end - off, line, line_start),
                });
                i = j;
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut j = i;
                while j < chars.len() && (chars[j].1.is_ascii_alphanumeric() || chars[j].1 == '_') {
                    j += 1;
                }
                let end = chars.get(j).map_or(source.len(), |x| x.0);
                let text = &source[off..end];
                let kind = match Keyword::from_ident(text) {
                    Some(k) => TokenKind::Keyword(k),
                    None => TokenKind::Identifier(text.to_string()),
                };
                tokens.push(Token {
                    kind,
                    span: span_at(off, end - off, line, line_start),
                });
                i = j;
            }
            _ => {
                let p = match c {
                    '(' => Punct::LParen,
                    ')' => Punct::RParen,
                    ',' => Punct::Comma,
                    '=' => Punct::Assign,
                    '+' => Punct::Plus,
                    '-' => Punct::Minus,
                    '*' => Punct::Star,
                    '/' => Punct::Slash,
                    ':' => Punct::Colon,
                    _ => {
                        let s = span_at(off, c.len_utf8(), line, line_start);
                        return Err(DslError::IllegalCharacter {
                            ch: c,
                            line: s.line,
                            column: s.column,
                        });
                    }
                };
                match p {
                    Punct::LParen => depth += 1,
                    Punct::RParen => depth = depth.saturating_sub(1),
                    _ => {}
                }
                tokens.push(Token {
                    kind: TokenKind::Punct(p),
                    span: span_at(off, c.len_utf8(), line, line_start),
                });
                i += 1;
            }
        }
    }
    Ok(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weighted_laplacian_statement() {
        let toks = tokenize("a = w*dot(grad(v), grad(u))*dx").unwrap();
        assert_eq!(toks.len(), 18);
        assert_eq!(toks.last().unwrap().kind, TokenKind::Keyword(Keyword::Dx));
        assert_eq!(toks[4].kind, TokenKind::Keyword(Keyword::Dot));
    }

    #[test]
    fn empty_source() {
        assert!(tokenize("").unwrap().is_empty());
    }

    #[test]
    fn illegal_character_position() {
        let err = tokenize("u @ v").unwrap_err();
        assert_eq!(
            err,
            DslError::IllegalCharacter {
                ch: '@',
                line: 1,
                column: 3
            }
        );
    }

    #[test]
    fn comments_and_continuations() {
        let src = "# header\na = f*\\\n  g*dx # trailing\n";
        let toks = tokenize(src).unwrap();
        let kinds: Vec<_> = toks.iter().map(|t| t.kind.clone()).collect();
        assert_eq!(kinds.iter().filter(|k| **k == TokenKind::Newline).count(), 1);
        assert_eq!(toks[0].span.line, 2);
        assert_eq!(toks.len(), 8);
    }

    #[test]
    fn newlines_inside_parentheses_are_joined() {
        let toks = tokenize("a = (f +\n g)*dx\n").unwrap();
        assert_eq!(toks.iter().filter(|t| t.kind == TokenKind::Newline).count(), 1);
    }

    #[test]
    fn numbers() {
        let toks = tokenize("0.25 10 1e-3 .5").unwrap();
        let vals: Vec<f64> = toks
            .iter()
            .map(|t| match t.kind {
                TokenKind::Number(v) => v,
                _ => panic!(),
            })
            .collect();
        assert_eq!(vals, vec![0.25, 10.0, 1e-3, 0.5]);
    }
}
