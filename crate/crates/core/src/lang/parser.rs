use super::{Expr, ExprKind, Span};
use crate::rational::{parse_rational, Rational};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, serde::Serialize)]
#[error("syntax error at byte {offset}: expected {}, found {found}", expected.join(" or "))]
pub struct SyntaxError {
    pub offset: usize,
    pub expected: Vec<String>,
    pub found: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(Rational),
    P,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Num(_) => "number".into(),
        Tok::P => "'p'".into(),
        Tok::Plus => "'+'".into(),
        Tok::Minus => "'-'".into(),
        Tok::Star => "'*'".into(),
        Tok::Slash => "'/'".into(),
        Tok::Caret => "'^'".into(),
        Tok::LParen => "'('".into(),
        Tok::RParen => "')'".into(),
        Tok::End => "end of input".into(),
    }
}

/// Numbers are `123`, `0.25` or `num/den` written without spaces around the slash.
fn lex(text: &str) -> Result<Vec<(Tok, Span)>, SyntaxError> {
    let b = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < b.len() {
        let c = b[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'/' => Tok::Slash,
            b'^' => Tok::Caret,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b'p' => Tok::P,
            b'0'..=b'9' | b'.' => {
                while i < b.len() && (b[i].is_ascii_digit() || b[i] == b'.') {
                    i += 1;
                }
                let int_part = !text[start..i].contains('.');
                if int_part && i + 1 < b.len() && b[i] == b'/' && b[i + 1].is_ascii_digit() {
                    i += 1;
                    while i < b.len() && b[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                let r = parse_rational(&text[start..i]).map_err(|_| SyntaxError {
                    offset: start,
                    expected: vec!["number".into()],
                    found: format!("{:?}", &text[start..i]),
                })?;
                out.push((Tok::Num(r), Span { start, end: i }));
                continue;
            }
            _ => {
                let ch = text[i..].chars().next().unwrap_or('?');
                return Err(SyntaxError {
                    offset: i,
                    expected: vec!["number".into(), "'p'".into(), "operator".into(), "parenthesis".into()],
                    found: format!("{ch:?}"),
                });
            }
        };
        i += 1;
        out.push((tok, Span { start, end: i }));
    }
    out.push((Tok::End, Span { start: b.len(), end: b.len() }));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, Span)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn span(&self) -> Span {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, Span) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &[&str]) -> SyntaxError {
        SyntaxError {
            offset: self.span().start,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: describe(self.peek()),
        }
    }

    fn expr(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.term()?;
        loop {
            let op = self.peek().clone();
            if op != Tok::Plus && op != Tok::Minus {
                return Ok(lhs);
            }
            self.bump();
            let rhs = self.term()?;
            let span = Span { start: lhs.span.start, end: rhs.span.end };
            let kind = if op == Tok::Plus {
                ExprKind::Add(Box::new(lhs), Box::new(rhs))
            } else {
                ExprKind::Sub(Box::new(lhs), Box::new(rhs))
            };
            lhs = Expr { kind, span };
        }
    }

    fn term(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.factor()?;
        loop {
            let op = self.peek().clone();
            if op != Tok::Star && op != Tok::Slash {
                return Ok(lhs);
            }
            self.bump();
            let rhs = self.factor()?;
            let span = Span { start: lhs.span.start, end: rhs.span.end };
            let kind = if op == Tok::Star {
                ExprKind::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                ExprKind::Div(Box::new(lhs), Box::new(rhs))
            };
            lhs = Expr { kind, span };
        }
    }

    fn factor(&mut self) -> Result<Expr, SyntaxError> {
        let mut base = self.primary()?;
        while *self.peek() == Tok::Caret {
            self.bump();
            let (tok, sp) = self.bump();
            let e = match tok {
                Tok::Num(r) if r.is_integer() => u32::try_from(r.to_integer()).map_err(|_| SyntaxError {
                    offset: sp.start,
                    expected: vec!["small nonnegative integer exponent".into()],
                    found: "number".into(),
                })?,
                other => {
                    return Err(SyntaxError {
                        offset: sp.start,
                        expected: vec!["integer exponent".into()],
                        found: describe(&other),
                    })
                }
            };
            let span = Span { start: base.span.start, end: sp.end };
            base = Expr { kind: ExprKind::Pow(Box::new(base), e), span };
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, SyntaxError> {
        match self.peek().clone() {
            Tok::Num(r) => {
                let (_, span) = self.bump();
                Ok(Expr { kind: ExprKind::Number(r), span })
            }
            Tok::P => {
                let (_, span) = self.bump();
                Ok(Expr { kind: ExprKind::Var, span })
            }
            Tok::LParen => {
                let (_, open) = self.bump();
                let inner = self.expr()?;
                if *self.peek() != Tok::RParen {
                    return Err(self.error(&["')'", "operator"]));
                }
                let (_, close) = self.bump();
                Ok(Expr { kind: ExprKind::Paren(Box::new(inner)), span: Span { start: open.start, end: close.end } })
            }
            _ => Err(self.error(&["number", "'p'", "'('"])),
        }
    }
}

/// Recursive-descent parse of an expression in `p`.
pub fn parse(text: &str) -> Result<Expr, SyntaxError> {
    let mut p = Parser { toks: lex(text)?, pos: 0 };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(p.error(&["operator", "end of input"]));
    }
    Ok(e)
}
