use super::SqlError;
use crate::xml::line_col;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Word(String),
    Quoted(String),
    Number(String),
    Str(String),
    /// Raw text between `[` and the matching `]`.
    Bracketed(String),
    LParen,
    RParen,
    Comma,
    Dot,
    Star,
    Plus,
    Minus,
    Slash,
    Concat,
    Eq,
    Lt,
    Le,
    Gt,
    Ge,
    Ne,
    Semi,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Word(w) => format!("`{w}`"),
            Tok::Quoted(w) => format!("\"{w}\""),
            Tok::Number(n) => n.clone(),
            Tok::Str(s) => format!("'{s}'"),
            Tok::Bracketed(b) => format!("[{b}]"),
            other => format!("`{}`", other.symbol()),
        }
    }

    fn symbol(&self) -> &'static str {
        match self {
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::Comma => ",",
            Tok::Dot => ".",
            Tok::Star => "*",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Slash => "/",
            Tok::Concat => "||",
            Tok::Eq => "=",
            Tok::Lt => "<",
            Tok::Le => "<=",
            Tok::Gt => ">",
            Tok::Ge => ">=",
            Tok::Ne => "<>",
            Tok::Semi => ";",
            _ => "",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub pos: usize,
}

pub fn tokenize(text: &str) -> Result<Vec<Token>, SqlError> {
    let err = |pos: usize, msg: &str| {
        let (line, column) = line_col(text, pos);
        SqlError::Syntax {
            position: pos,
            line,
            column,
            expected: vec![msg.to_string()],
            found: text[pos..].chars().next().map(|c| format!("`{c}`")).unwrap_or("end of input".into()),
        }
    };
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = text[i..].chars().next().unwrap_or(' ');
        let start = i;
        if c.is_whitespace() {
            i += c.len_utf8();
            continue;
        }
        if text[i..].starts_with("--") {
            i += text[i..].find('\n').unwrap_or(text.len() - i);
            continue;
        }
        let two = text.get(i..i + 2).unwrap_or("");
        let tok = match two {
            "<=" => Some(Tok::Le),
            ">=" => Some(Tok::Ge),
            "<>" | "!=" => Some(Tok::Ne),
            "||" => Some(Tok::Concat),
            _ => None,
        };
        if let Some(tok) = tok {
            out.push(Token { tok, pos: start });
            i += 2;
            continue;
        }
        let tok = match c {
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ',' => Tok::Comma,
            '*' => Tok::Star,
            '+' => Tok::Plus,
            '-' => Tok::Minus,
            '/' => Tok::Slash,
            '=' => Tok::Eq,
            '<' => Tok::Lt,
            '>' => Tok::Gt,
            ';' => Tok::Semi,
            '.' if !text[i + 1..].starts_with(|d: char| d.is_ascii_digit()) => Tok::Dot,
            '\'' => {
                let mut s = String::new();
                let mut j = i + 1;
                loop {
                    let Some(k) = text[j..].find('\'') else {
                        return Err(err(i, "closing `'`"));
                    };
                    s.push_str(&text[j..j + k]);
                    j += k + 1;
                    if text[j..].starts_with('\'') {
                        s.push('\'');
                        j += 1;
                    } else {
                        break;
                    }
                }
                i = j;
                out.push(Token { tok: Tok::Str(s), pos: start });
                continue;
            }
            '"' => {
                let mut s = String::new();
                let mut j = i + 1;
                loop {
                    let Some(k) = text[j..].find('"') else {
                        return Err(err(i, "closing `\"`"));
                    };
                    s.push_str(&text[j..j + k]);
                    j += k + 1;
                    if text[j..].starts_with('"') {
                        s.push('"');
                        j += 1;
                    } else {
                        break;
                    }
                }
                if s.is_empty() {
                    return Err(err(i, "non-empty quoted identifier"));
                }
                i = j;
                out.push(Token { tok: Tok::Quoted(s), pos: start });
                continue;
            }
            '[' => {
                let mut depth = 0usize;
                let mut quote: Option<char> = None;
                let mut end = None;
                for (k, ch) in text[i..].char_indices() {
                    match (quote, ch) {
                        (Some(q), ch) if ch == q => quote = None,
                        (Some(_), _) => {}
                        (None, '\'' | '"') => quote = Some(ch),
                        (None, '[') => depth += 1,
                        (None, ']') => {
                            depth -= 1;
                            if depth == 0 {
                                end = Some(i + k);
                                break;
                            }
                        }
                        _ => {}
                    }
                }
                let Some(end) = end else {
                    return Err(err(i, "closing `]`"));
                };
                out.push(Token {
                    tok: Tok::Bracketed(text[i + 1..end].to_string()),
                    pos: start,
                });
                i = end + 1;
                continue;
            }
            c if c.is_ascii_digit() || c == '.' => {
                let len = text[i..]
                    .find(|d: char| !(d.is_ascii_digit() || d == '.'))
                    .unwrap_or(text.len() - i);
                let lexeme = &text[i..i + len];
                if lexeme.matches('.').count() > 1 {
                    return Err(err(i, "a number"));
                }
                if text[i + len..].starts_with(|d: char| d.is_alphabetic() || d == '_') {
                    return Err(err(i + len, "a separator after the number"));
                }
                out.push(Token {
                    tok: Tok::Number(lexeme.to_string()),
                    pos: start,
                });
                i += len;
                continue;
            }
            c if c.is_alphabetic() || c == '_' => {
                let len = text[i..]
                    .find(|d: char| !(d.is_alphanumeric() || d == '_'))
                    .unwrap_or(text.len() - i);
                out.push(Token {
                    tok: Tok::Word(text[i..i + len].to_string()),
                    pos: start,
                });
                i += len;
                continue;
            }
            _ => return Err(err(i, "a token")),
        };
        out.push(Token { tok, pos: start });
        i += c.len_utf8();
    }
    Ok(out)
}
