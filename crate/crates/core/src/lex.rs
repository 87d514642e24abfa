//! Tokenizer shared by the formula and script parsers.

use crate::formula::Axis;
use crate::value::ErrorKind;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Number(String),
    Str(String),
    Ident(String),
    QuotedIdent(String),
    /// `B2`, `$B$2`, `$B2`, `B$2` (zero-based indices).
    A1 {
        col: usize,
        col_abs: bool,
        row: usize,
        row_abs: bool,
    },
    /// `R[-1]C[0]`, `R2C[-1]`; host-independent relative notation.
    R1C1 {
        row: Axis,
        col: Axis,
    },
    /// `@17`, reference by cell id.
    Explicit(u64),
    ErrorLit(ErrorKind),
    Op(&'static str),
    /// `-- group N` trailing a statement.
    GroupTag(u64),
    Eof,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub offset: usize,
    pub line: usize,
    pub col: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexError {
    pub offset: usize,
    pub line: usize,
    pub col: usize,
    pub message: String,
}

const OPS: [&str; 19] = [
    "<>", "<=", ">=", "!=", "||", "+", "-", "*", "/", "&", "=", "<", ">", "(", ")", ",", ":", ";",
    "[",
];

pub fn is_ident_start(c: char) -> bool {
    c.is_alphabetic() || c == '_'
}

pub fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

struct Lexer<'a> {
    src: &'a str,
    chars: Vec<(usize, char)>,
    i: usize,
    line: usize,
    line_start: usize,
    comments: bool,
}

impl<'a> Lexer<'a> {
    fn peek(&self, k: usize) -> Option<char> {
        self.chars.get(self.i + k).map(|(_, c)| *c)
    }

    fn offset(&self) -> usize {
        self.chars.get(self.i).map_or(self.src.len(), |(o, _)| *o)
    }

    fn err(&self, message: impl Into<String>) -> LexError {
        LexError {
            offset: self.offset(),
            line: self.line,
            col: self.i - self.line_start + 1,
            message: message.into(),
        }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek(0)?;
        self.i += 1;
        if c == '\n' {
            self.line += 1;
            self.line_start = self.i;
        }
        Some(c)
    }

    fn ident_follows(&self, k: usize) -> bool {
        self.peek(k).is_some_and(is_ident_char)
    }

    fn try_a1(&self) -> Option<(Tok, usize)> {
        let mut k = 0;
        let col_abs = self.peek(k) == Some('$');
        if col_abs {
            k += 1;
        }
        let start = k;
        while self.peek(k).is_some_and(|c| c.is_ascii_uppercase()) {
            k += 1;
        }
        let letters: String = (start..k).filter_map(|j| self.peek(j)).collect();
        if letters.is_empty() || letters.len() > 3 {
            return None;
        }
        let row_abs = self.peek(k) == Some('$');
        if row_abs {
            k += 1;
        }
        let dstart = k;
        while self.peek(k).is_some_and(|c| c.is_ascii_digit()) {
            k += 1;
        }
        let digits: String = (dstart..k).filter_map(|j| self.peek(j)).collect();
        if digits.is_empty() || digits.starts_with('0') || self.ident_follows(k) {
            return None;
        }
        let row: usize = digits.parse().ok()?;
        let col = crate::model::parse_column_letters(&letters)?;
        Some((
            Tok::A1 {
                col,
                col_abs,
                row: row - 1,
                row_abs,
            },
            k,
        ))
    }

    fn r1c1_axis(&self, k: &mut usize, bracketed: &mut bool) -> Option<Axis> {
        if self.peek(*k) == Some('[') {
            *bracketed = true;
            *k += 1;
            let mut s = String::new();
            if let Some(c @ ('-' | '+')) = self.peek(*k) {
                s.push(c);
                *k += 1;
            }
            while let Some(c) = self.peek(*k).filter(|c| c.is_ascii_digit()) {
                s.push(c);
                *k += 1;
            }
            if self.peek(*k) != Some(']') {
                return None;
            }
            *k += 1;
            s.parse::<i64>().ok().map(Axis::Rel)
        } else if self.peek(*k).is_some_and(|c| c.is_ascii_digit()) {
            let mut s = String::new();
            while let Some(c) = self.peek(*k).filter(|c| c.is_ascii_digit()) {
                s.push(c);
                *k += 1;
            }
            let n: usize = s.parse().ok()?;
            (n >= 1).then(|| Axis::Abs(n - 1))
        } else {
            Some(Axis::Rel(0))
        }
    }

    fn try_r1c1(&self) -> Option<(Tok, usize)> {
        if self.peek(0) != Some('R') {
            return None;
        }
        let mut k = 1;
        let mut bracketed = false;
        let row = self.r1c1_axis(&mut k, &mut bracketed)?;
        if self.peek(k) != Some('C') {
            return None;
        }
        k += 1;
        let col = self.r1c1_axis(&mut k, &mut bracketed)?;
        if !bracketed || self.ident_follows(k) {
            return None;
        }
        Some((Tok::R1C1 { row, col }, k))
    }

    fn next_token(&mut self) -> Result<Option<Token>, LexError> {
        loop {
            match self.peek(0) {
                None => return Ok(None),
                Some(c) if c.is_whitespace() => {
                    self.bump();
                }
                Some('-') if self.comments && self.peek(1) == Some('-') => {
                    let (offset, line, col) = (self.offset(), self.line, self.i - self.line_start + 1);
                    let mut text = String::new();
                    self.bump();
                    self.bump();
                    while let Some(c) = self.peek(0).filter(|c| *c != '\n') {
                        text.push(c);
                        self.bump();
                    }
                    let t = text.trim();
                    if let Some(n) = t
                        .strip_prefix("group")
                        .map(str::trim)
                        .and_then(|n| n.parse::<u64>().ok())
                    {
                        return Ok(Some(Token {
                            tok: Tok::GroupTag(n),
                            offset,
                            line,
                            col,
                        }));
                    }
                }
                Some(_) => break,
            }
        }
        let (offset, line, col) = (self.offset(), self.line, self.i - self.line_start + 1);
        let c = self.peek(0).unwrap();
        let mk = |tok| Token {
            tok,
            offset,
            line,
            col,
        };

        if c == '$' || c == 'R' || c.is_ascii_uppercase() {
            if let Some((tok, len)) = self.try_r1c1().or_else(|| self.try_a1()) {
                for _ in 0..len {
                    self.bump();
                }
                return Ok(Some(mk(tok)));
            }
            if c == '$' {
                return Err(self.err("malformed absolute reference"));
            }
        }
        if is_ident_start(c) {
            let mut s = String::new();
            while let Some(ch) = self.peek(0).filter(|ch| is_ident_char(*ch)) {
                s.push(ch);
                self.bump();
            }
            return Ok(Some(mk(Tok::Ident(s))));
        }
        if c.is_ascii_digit() || (c == '.' && self.peek(1).is_some_and(|d| d.is_ascii_digit())) {
            let mut s = String::new();
            while let Some(d) = self.peek(0).filter(|d| d.is_ascii_digit()) {
                s.push(d);
                self.bump();
            }
            if self.peek(0) == Some('.') && self.peek(1).is_some_and(|d| d.is_ascii_digit()) {
                s.push('.');
                self.bump();
                while let Some(d) = self.peek(0).filter(|d| d.is_ascii_digit()) {
                    s.push(d);
                    self.bump();
                }
            }
            if matches!(self.peek(0), Some('e' | 'E')) {
                let sign = matches!(self.peek(1), Some('+' | '-'));
                let digit_at = if sign { 2 } else { 1 };
                if self.peek(digit_at).is_some_and(|d| d.is_ascii_digit()) {
                    for _ in 0..digit_at {
                        s.push(self.bump().unwrap());
                    }
                    while let Some(d) = self.peek(0).filter(|d| d.is_ascii_digit()) {
                        s.push(d);
                        self.bump();
                    }
                }
            }
            return Ok(Some(mk(Tok::Number(s))));
        }
        if c == '\'' || c == '"' {
            self.bump();
            let mut s = String::new();
            loop {
                match self.bump() {
                    None => return Err(self.err("unterminated quoted text")),
                    Some(q) if q == c => {
                        if self.peek(0) == Some(c) {
                            self.bump();
                            s.push(c);
                        } else {
                            break;
                        }
                    }
                    Some(ch) => s.push(ch),
                }
            }
            let tok = if c == '\'' {
                Tok::Str(s)
            } else {
                Tok::QuotedIdent(s)
            };
            return Ok(Some(mk(tok)));
        }
        if c == '@' {
            self.bump();
            let mut s = String::new();
            while let Some(d) = self.peek(0).filter(|d| d.is_ascii_digit()) {
                s.push(d);
                self.bump();
            }
            return s
                .parse::<u64>()
                .map(|n| Some(mk(Tok::Explicit(n))))
                .map_err(|_| self.err("expected a cell id after '@'"));
        }
        if c == '#' {
            let mut s = String::new();
            let mut k = 0;
            while let Some(ch) = self.peek(k) {
                s.push(ch);
                k += 1;
                if ch == '!' || k > 10 {
                    break;
                }
            }
            if let Some(kind) = ErrorKind::from_literal(&s) {
                for _ in 0..k {
                    self.bump();
                }
                return Ok(Some(mk(Tok::ErrorLit(kind))));
            }
            return Err(self.err("unknown error literal"));
        }
        if c == ']' {
            self.bump();
            return Ok(Some(mk(Tok::Op("]"))));
        }
        for op in OPS {
            let matches = op.chars().enumerate().all(|(k, oc)| self.peek(k) == Some(oc));
            if matches {
                for _ in 0..op.chars().count() {
                    self.bump();
                }
                let op = if op == "!=" { "<>" } else { op };
                return Ok(Some(mk(Tok::Op(op))));
            }
        }
        Err(self.err(format!("unexpected character '{c}'")))
    }
}

/// Tokenize `src`. With `comments`, `--` starts a line comment.
pub fn tokenize(src: &str, comments: bool) -> Result<Vec<Token>, LexError> {
    let mut lx = Lexer {
        src,
        chars: src.char_indices().collect(),
        i: 0,
        line: 1,
        line_start: 0,
        comments,
    };
    let mut out = Vec::new();
    while let Some(t) = lx.next_token()? {
        out.push(t);
    }
    out.push(Token {
        tok: Tok::Eof,
        offset: src.len(),
        line: lx.line,
        col: lx.i - lx.line_start + 1,
    });
    Ok(out)
}
