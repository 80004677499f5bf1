//! Tokenizer for the model DSL family.
//!
//! One lexer serves all five document kinds. It is whitespace-insensitive,
//! supports `//` line comments, and tracks line/column positions for error
//! reporting. Word-like tokens may embed `*` (globs) and `$` (pattern
//! placeholders); the parser decides where those are legal.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    /// Plain identifier (no `*` or `$`), not a keyword.
    Ident(String),
    /// Word containing at least one `*` and no `$`.
    Glob(String),
    /// Word containing at least one `$` placeholder.
    Template(String),
    Keyword(Keyword),
    Number(f64),
    Str(String),
    LBrace,
    RBrace,
    LParen,
    RParen,
    Colon,
    Semi,
    Eq,
    Arrow,
    PathSep,
    Le,
    Ge,
    Comma,
    Eof,
}

impl TokenKind {
    /// Short description used in "expected ..., found ..." messages.
    pub fn describe(&self) -> String {
        match self {
            TokenKind::Ident(s) => format!("identifier '{s}'"),
            TokenKind::Glob(s) => format!("glob '{s}'"),
            TokenKind::Template(s) => format!("'{s}'"),
            TokenKind::Keyword(k) => format!("'{}'", k.as_str()),
            TokenKind::Number(n) => format!("number {}", crate::model::fmt_number(*n)),
            TokenKind::Str(_) => "string".to_string(),
            TokenKind::LBrace => "'{'".to_string(),
            TokenKind::RBrace => "'}'".to_string(),
            TokenKind::LParen => "'('".to_string(),
            TokenKind::RParen => "')'".to_string(),
            TokenKind::Colon => "':'".to_string(),
            TokenKind::Semi => "';'".to_string(),
            TokenKind::Eq => "'='".to_string(),
            TokenKind::Arrow => "'->'".to_string(),
            TokenKind::PathSep => "'::'".to_string(),
            TokenKind::Le => "'<='".to_string(),
            TokenKind::Ge => "'>='".to_string(),
            TokenKind::Comma => "','".to_string(),
            TokenKind::Eof => "end of input".to_string(),
        }
    }
}

macro_rules! keywords {
    ($($variant:ident => $text:literal),* $(,)?) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq)]
        pub enum Keyword {
            $($variant),*
        }

        impl Keyword {
            pub fn as_str(&self) -> &'static str {
                match self {
                    $(Keyword::$variant => $text),*
                }
            }

            pub fn lookup(s: &str) -> Option<Keyword> {
                match s {
                    $($text => Some(Keyword::$variant),)*
                    _ => None,
                }
            }
        }

        impl fmt::Display for Keyword {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

keywords! {
    Architecture => "architecture",
    QosPattern => "qos_pattern",
    Platform => "platform",
    Mapping => "mapping",
    Resources => "resources",
    Types => "types",
    Stage => "stage",
    Component => "component",
    Connector => "connector",
    Port => "port",
    Role => "role",
    Attach => "attach",
    To => "to",
    Property => "property",
    Attr => "attr",
    Provides => "provides",
    Requires => "requires",
    Accepts => "accepts",
    Emits => "emits",
    Param => "param",
    Fragment => "fragment",
    Action => "action",
    Ensures => "ensures",
    Include => "include",
    Exclude => "exclude",
    ExcludeType => "exclude_type",
    Replicate => "replicate",
    Unify => "unify",
    Decompose => "decompose",
    With => "with",
    Into => "into",
    Element => "element",
    Integer => "integer",
    NumberKind => "number",
    Adapter => "adapter",
    Rewrite => "rewrite",
    Portmap => "portmap",
    Rule => "rule",
    Template => "template",
    Manifest => "manifest",
    Strict => "strict",
    Node => "node",
    Capacity => "capacity",
    Connection => "connection",
    AllPortsConnected => "allPortsConnected",
    TypeClosed => "typeClosed",
    Exists => "exists",
    Replication => "replication",
    Connected => "connected",
    AttrSum => "attrSum",
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub line: usize,
    pub col: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("lex error at {line}:{col}: {message}")]
pub struct LexError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

pub fn tokenize(source: &str) -> Result<Vec<Token>, LexError> {
    Lexer::new(source).run()
}

struct Lexer<'a> {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    col: usize,
    _source: &'a str,
}

fn is_word_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_' || c == '$' || c == '*'
}

fn is_word_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '$' || c == '*'
}

impl<'a> Lexer<'a> {
    fn new(source: &'a str) -> Self {
        Lexer {
            chars: source.chars().collect(),
            pos: 0,
            line: 1,
            col: 1,
            _source: source,
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn peek2(&self) -> Option<char> {
        self.chars.get(self.pos + 1).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn error(&self, message: impl Into<String>) -> LexError {
        LexError {
            line: self.line,
            col: self.col,
            message: message.into(),
        }
    }

    fn run(mut self) -> Result<Vec<Token>, LexError> {
        let mut tokens = Vec::new();
        loop {
            self.skip_trivia();
            let (line, col) = (self.line, self.col);
            let c = match self.peek() {
                None => {
                    tokens.push(Token {
                        kind: TokenKind::Eof,
                        line,
                        col,
                    });
                    return Ok(tokens);
                }
                Some(c) => c,
            };
            let kind = if is_word_start(c) {
                self.lex_word()
            } else if c.is_ascii_digit() {
                self.lex_number(false)?
            } else {
                match c {
                    '"' => self.lex_string()?,
                    '{' => self.punct(TokenKind::LBrace),
                    '}' => self.punct(TokenKind::RBrace),
                    '(' => self.punct(TokenKind::LParen),
                    ')' => self.punct(TokenKind::RParen),
                    ';' => self.punct(TokenKind::Semi),
                    '=' => self.punct(TokenKind::Eq),
                    ',' => self.punct(TokenKind::Comma),
                    ':' => {
                        self.bump();
                        if self.peek() == Some(':') {
                            self.bump();
                            TokenKind::PathSep
                        } else {
                            TokenKind::Colon
                        }
                    }
                    '-' => {
                        self.bump();
                        match self.peek() {
                            Some('>') => {
                                self.bump();
                                TokenKind::Arrow
                            }
                            Some(d) if d.is_ascii_digit() => self.lex_number(true)?,
                            _ => return Err(self.error("expected '->' or a number after '-'")),
                        }
                    }
                    '<' => {
                        self.bump();
                        if self.peek() == Some('=') {
                            self.bump();
                            TokenKind::Le
                        } else {
                            return Err(self.error("expected '<='"));
                        }
                    }
                    '>' => {
                        self.bump();
                        if self.peek() == Some('=') {
                            self.bump();
                            TokenKind::Ge
                        } else {
                            return Err(self.error("expected '>='"));
                        }
                    }
                    other => return Err(self.error(format!("unexpected character '{other}'"))),
                }
            };
            tokens.push(Token { kind, line, col });
        }
    }

    fn punct(&mut self, kind: TokenKind) -> TokenKind {
        self.bump();
        kind
    }

    fn skip_trivia(&mut self) {
        loop {
            match self.peek() {
                Some(c) if c.is_whitespace() => {
                    self.bump();
                }
                Some('/') if self.peek2() == Some('/') => {
                    while let Some(c) = self.peek() {
                        if c == '\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                _ => break,
            }
        }
    }

    fn lex_word(&mut self) -> TokenKind {
        let mut word = String::new();
        while let Some(c) = self.peek() {
            if is_word_char(c) {
                word.push(c);
                self.bump();
            } else {
                break;
            }
        }
        if word.contains('$') {
            TokenKind::Template(word)
        } else if word.contains('*') {
            TokenKind::Glob(word)
        } else if let Some(kw) = Keyword::lookup(&word) {
            TokenKind::Keyword(kw)
        } else {
            TokenKind::Ident(word)
        }
    }

    fn lex_number(&mut self, negative: bool) -> Result<TokenKind, LexError> {
        let mut text = String::new();
        if negative {
            text.push('-');
        }
        let mut seen_dot = false;
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() {
                text.push(c);
                self.bump();
            } else if c == '.' && !seen_dot && self.peek2().is_some_and(|d| d.is_ascii_digit()) {
                seen_dot = true;
                text.push(c);
                self.bump();
            } else {
                break;
            }
        }
        text.parse::<f64>()
            .map(TokenKind::Number)
            .map_err(|_| self.error(format!("invalid number '{text}'")))
    }

    fn lex_string(&mut self) -> Result<TokenKind, LexError> {
        self.bump(); // opening quote
        let mut out = String::new();
        loop {
            match self.bump() {
                None => return Err(self.error("unterminated string")),
                Some('"') => return Ok(TokenKind::Str(out)),
                Some('\n') => return Err(self.error("newline in string literal (use \\n)")),
                Some('\\') => match self.bump() {
                    Some('n') => out.push('\n'),
                    Some('t') => out.push('\t'),
                    Some('"') => out.push('"'),
                    Some('\\') => out.push('\\'),
                    other => {
                        return Err(self.error(format!(
                            "unknown escape '\\{}'",
                            other.map(String::from).unwrap_or_default()
                        )))
                    }
                },
                Some(c) => out.push(c),
            }
        }
    }
}

/// Escapes a string for re-emission as a DSL string literal.
pub fn escape_string(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            other => out.push(other),
        }
    }
    out.push('"');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<TokenKind> {
        tokenize(src).unwrap().into_iter().map(|t| t.kind).collect()
    }

    #[test]
    fn words_classify_into_idents_keywords_globs_and_templates() {
        assert_eq!(
            kinds("component Queue* FTConnector_$target b"),
            vec![
                TokenKind::Keyword(Keyword::Component),
                TokenKind::Glob("Queue*".into()),
                TokenKind::Template("FTConnector_$target".into()),
                TokenKind::Ident("b".into()),
                TokenKind::Eof,
            ]
        );
    }

    #[test]
    fn punctuation_and_operators() {
        assert_eq!(
            kinds("a::b -> c <= >= : ; = ( ) , { }"),
            vec![
                TokenKind::Ident("a".into()),
                TokenKind::PathSep,
                TokenKind::Ident("b".into()),
                TokenKind::Arrow,
                TokenKind::Ident("c".into()),
                TokenKind::Le,
                TokenKind::Ge,
                TokenKind::Colon,
                TokenKind::Semi,
                TokenKind::Eq,
                TokenKind::LParen,
                TokenKind::RParen,
                TokenKind::Comma,
                TokenKind::LBrace,
                TokenKind::RBrace,
                TokenKind::Eof,
            ]
        );
    }

    #[test]
    fn numbers_and_strings() {
        assert_eq!(
            kinds("10 2.5 -3 \"a\\nb\""),
            vec![
                TokenKind::Number(10.0),
                TokenKind::Number(2.5),
                TokenKind::Number(-3.0),
                TokenKind::Str("a\nb".into()),
                TokenKind::Eof,
            ]
        );
    }

    #[test]
    fn comments_are_skipped_and_positions_tracked() {
        let tokens = tokenize("// head\n  attr x = 1").unwrap();
        assert_eq!(tokens[0].kind, TokenKind::Keyword(Keyword::Attr));
        assert_eq!((tokens[0].line, tokens[0].col), (2, 3));
        assert_eq!((tokens[1].line, tokens[1].col), (2, 8));
    }

    #[test]
    fn bad_input_reports_position() {
        let err = tokenize("attach a @ b").unwrap_err();
        assert_eq!((err.line, err.col), (1, 10));
        let err = tokenize("\"open").unwrap_err();
        assert!(err.message.contains("unterminated"));
    }

    #[test]
    fn string_escapes_round_trip() {
        let s = "line1\nline2\t\"quoted\" back\\slash";
        let toks = kinds(&escape_string(s));
        assert_eq!(toks[0], TokenKind::Str(s.into()));
    }
}
