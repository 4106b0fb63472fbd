use super::parser::SyntaxError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum Tok {
    Ident(String),
    Var(String),
    Int(i128),
    Str(String),
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Semi,
    Colon,
    If,
    Dot,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Plus,
    Minus,
    Star,
    Slash,
    Backslash,
    Bar,
    Eof,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Ident(s) | Tok::Var(s) => format!("`{s}`"),
            Tok::Int(i) => format!("`{i}`"),
            Tok::Str(s) => format!("string \"{s}\""),
            Tok::Eof => "end of input".to_string(),
            other => format!("`{}`", other.symbol()),
        }
    }

    fn symbol(&self) -> &'static str {
        match self {
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::Comma => ",",
            Tok::Semi => ";",
            Tok::Colon => ":",
            Tok::If => ":-",
            Tok::Dot => ".",
            Tok::Eq => "=",
            Tok::Ne => "!=",
            Tok::Lt => "<",
            Tok::Le => "<=",
            Tok::Gt => ">",
            Tok::Ge => ">=",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::Slash => "/",
            Tok::Backslash => "\\",
            Tok::Bar => "|",
            _ => "",
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Spanned {
    pub tok: Tok,
    pub line: usize,
    pub column: usize,
}

pub(crate) fn tokenize(src: &str) -> Result<Vec<Spanned>, SyntaxError> {
    let mut lexer = Lexer {
        chars: src.chars().collect(),
        pos: 0,
        line: 1,
        column: 1,
    };
    let mut out = Vec::new();
    loop {
        let t = lexer.next_token()?;
        let eof = t.tok == Tok::Eof;
        out.push(t);
        if eof {
            return Ok(out);
        }
    }
}

struct Lexer {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    column: usize,
}

impl Lexer {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn peek_at(&self, n: usize) -> Option<char> {
        self.chars.get(self.pos + n).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.get(self.pos).copied()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn skip_trivia(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.bump();
            } else if c == '%' {
                while let Some(c) = self.peek() {
                    if c == '\n' {
                        break;
                    }
                    self.bump();
                }
            } else {
                break;
            }
        }
    }

    fn next_token(&mut self) -> Result<Spanned, SyntaxError> {
        self.skip_trivia();
        let (line, column) = (self.line, self.column);
        let err = |message: String| SyntaxError {
            line,
            column,
            message,
        };
        let spanned = |tok| Spanned { tok, line, column };
        let Some(c) = self.bump() else {
            return Ok(spanned(Tok::Eof));
        };
        let tok = match c {
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '{' => Tok::LBrace,
            '}' => Tok::RBrace,
            ',' => Tok::Comma,
            ';' => Tok::Semi,
            '+' => Tok::Plus,
            '-' => Tok::Minus,
            '*' => Tok::Star,
            '/' => Tok::Slash,
            '\\' => Tok::Backslash,
            '|' => Tok::Bar,
            '=' => {
                if self.peek() == Some('=') {
                    return Err(err("`==` is not supported; use `=`".into()));
                }
                Tok::Eq
            }
            '!' => {
                if self.peek() == Some('=') {
                    self.bump();
                    Tok::Ne
                } else {
                    return Err(err("expected `!=`".into()));
                }
            }
            '<' => {
                if self.peek() == Some('=') {
                    self.bump();
                    Tok::Le
                } else {
                    Tok::Lt
                }
            }
            '>' => {
                if self.peek() == Some('=') {
                    self.bump();
                    Tok::Ge
                } else {
                    Tok::Gt
                }
            }
            ':' => match self.peek() {
                Some('-') => {
                    self.bump();
                    Tok::If
                }
                Some('~') => {
                    return Err(err(
                        "weak constraints (`:~`) are outside the fragment".into()
                    ))
                }
                _ => Tok::Colon,
            },
            '.' => {
                if self.peek() == Some('.') {
                    return Err(err("intervals (`..`) are outside the fragment".into()));
                }
                Tok::Dot
            }
            '#' => {
                return Err(err(
                    "directives and aggregates (`#...`) are outside the fragment".into(),
                ))
            }
            '"' => {
                let mut s = String::new();
                loop {
                    match self.bump() {
                        None | Some('\n') => return Err(err("unterminated string".into())),
                        Some('"') => break,
                        Some('\\') => match self.bump() {
                            Some('"') => s.push('"'),
                            Some('\\') => s.push('\\'),
                            Some('n') => s.push('\n'),
                            _ => return Err(err("invalid escape in string".into())),
                        },
                        Some(c) => s.push(c),
                    }
                }
                Tok::Str(s)
            }
            c if c.is_ascii_digit() => {
                let mut digits = String::from(c);
                while let Some(d) = self.peek().filter(char::is_ascii_digit) {
                    digits.push(d);
                    self.bump();
                }
                if self.peek().is_some_and(|c| c.is_alphabetic() || c == '_') {
                    return Err(err(format!(
                        "malformed number `{digits}{}`",
                        self.peek().unwrap_or_default()
                    )));
                }
                let value: i128 = digits
                    .parse()
                    .map_err(|_| err(format!("integer `{digits}` out of range")))?;
                if value > i64::MAX as i128 + 1 {
                    return Err(err(format!("integer `{digits}` out of range")));
                }
                Tok::Int(value)
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut ident = String::from(c);
                while let Some(d) = self
                    .peek()
                    .filter(|d| d.is_ascii_alphanumeric() || *d == '_')
                {
                    ident.push(d);
                    self.bump();
                }
                if c == '_' {
                    return Err(err(format!(
                        "anonymous or underscore variable `{ident}` is outside the fragment"
                    )));
                }
                if ident == "not" && self.peek_at(0).is_some_and(char::is_whitespace) {
                    return Err(err(
                        "default negation (`not`) is outside the fragment".into()
                    ));
                }
                if c.is_ascii_uppercase() {
                    Tok::Var(ident)
                } else {
                    Tok::Ident(ident)
                }
            }
            other => return Err(err(format!("unexpected character `{other}`"))),
        };
        Ok(spanned(tok))
    }
}
