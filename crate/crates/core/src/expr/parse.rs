//! Recursive-descent parser for the expression surface syntax.
//!
//! Grammar:
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := '-' factor | base ('^' exponent)?
//! base   := integer | identifier | '(' expr ')'
//! ```
//! Identifiers match `[a-zA-Z][a-zA-Z0-9]*` and must name variables of the
//! supplied table. Rational literals arise from division (`1/2`), and an
//! exponent must evaluate to an integer constant, so `v1^(1/2)` reports a
//! non-integer exponent rather than a syntax error. Whitespace is
//! insignificant. Printing a parsed expression and re-parsing it reproduces
//! the same canonical form.

use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive};

use super::error::ExprError;
use super::rational::RationalExpr;
use super::table::VarTable;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Int(BigInt),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

#[derive(Debug, Clone, Copy)]
struct Pos {
    line: usize,
    col: usize,
}

struct Lexer<'a> {
    src: &'a [u8],
    at: usize,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src: src.as_bytes(),
            at: 0,
            line: 1,
            col: 1,
        }
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.src.get(self.at).copied()?;
        self.at += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.at).copied()
    }

    fn tokens(mut self) -> Result<Vec<(Tok, Pos)>, ExprError> {
        let mut out = Vec::new();
        loop {
            while matches!(self.peek(), Some(c) if c.is_ascii_whitespace()) {
                self.bump();
            }
            let pos = Pos {
                line: self.line,
                col: self.col,
            };
            let c = match self.peek() {
                None => {
                    out.push((Tok::End, pos));
                    return Ok(out);
                }
                Some(c) => c,
            };
            let tok = match c {
                b'+' => {
                    self.bump();
                    Tok::Plus
                }
                b'-' => {
                    self.bump();
                    Tok::Minus
                }
                b'*' => {
                    self.bump();
                    Tok::Star
                }
                b'/' => {
                    self.bump();
                    Tok::Slash
                }
                b'^' => {
                    self.bump();
                    Tok::Caret
                }
                b'(' => {
                    self.bump();
                    Tok::LParen
                }
                b')' => {
                    self.bump();
                    Tok::RParen
                }
                b'0'..=b'9' => {
                    let mut digits = String::new();
                    while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                        digits.push(self.bump().unwrap() as char);
                    }
                    Tok::Int(digits.parse().expect("digit string"))
                }
                c if c.is_ascii_alphabetic() => {
                    let mut name = String::new();
                    while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric()) {
                        name.push(self.bump().unwrap() as char);
                    }
                    Tok::Ident(name)
                }
                other => {
                    return Err(ExprError::Syntax {
                        line: pos.line,
                        col: pos.col,
                        msg: format!("unexpected character `{}`", other as char),
                    })
                }
            };
            out.push((tok, pos));
        }
    }
}

struct Parser<'a> {
    toks: Vec<(Tok, Pos)>,
    at: usize,
    table: &'a Arc<VarTable>,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> (Tok, Pos) {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn syntax(&self, msg: impl Into<String>) -> ExprError {
        let p = self.pos();
        ExprError::Syntax {
            line: p.line,
            col: p.col,
            msg: msg.into(),
        }
    }

    fn expr(&mut self) -> Result<RationalExpr, ExprError> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    acc = acc.add(&self.term()?);
                }
                Tok::Minus => {
                    self.bump();
                    acc = acc.sub(&self.term()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<RationalExpr, ExprError> {
        let mut acc = self.factor()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    acc = acc.mul(&self.factor()?);
                }
                Tok::Slash => {
                    let pos = self.pos();
                    self.bump();
                    let rhs = self.factor()?;
                    if rhs.is_zero() {
                        return Err(ExprError::DivisionByZero {
                            line: pos.line,
                            col: pos.col,
                        });
                    }
                    acc = acc.div_exact(&rhs);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn factor(&mut self) -> Result<RationalExpr, ExprError> {
        if matches!(self.peek(), Tok::Minus) {
            self.bump();
            return Ok(self.factor()?.neg());
        }
        let base = self.base()?;
        if matches!(self.peek(), Tok::Caret) {
            let caret_pos = self.pos();
            self.bump();
            let e = self.exponent(caret_pos)?;
            if e < 0 && base.is_zero() {
                return Err(ExprError::DivisionByZero {
                    line: caret_pos.line,
                    col: caret_pos.col,
                });
            }
            return base.pow(e);
        }
        Ok(base)
    }

    /// An exponent is either a signed integer literal or a parenthesized
    /// expression that must collapse to an integer constant.
    fn exponent(&mut self, caret: Pos) -> Result<i32, ExprError> {
        let value = match self.peek().clone() {
            Tok::Minus => {
                self.bump();
                match self.bump() {
                    (Tok::Int(k), _) => -num_rational::BigRational::from_integer(k),
                    _ => return Err(self.syntax("expected integer exponent after `-`")),
                }
            }
            Tok::Int(k) => {
                self.bump();
                num_rational::BigRational::from_integer(k)
            }
            Tok::LParen => {
                self.bump();
                let inner = self.expr()?;
                match self.bump() {
                    (Tok::RParen, _) => {}
                    _ => return Err(self.syntax("expected `)` in exponent")),
                }
                match inner.as_constant() {
                    Some(c) => c,
                    None => {
                        return Err(ExprError::NonIntegerExponent {
                            line: caret.line,
                            col: caret.col,
                        })
                    }
                }
            }
            _ => return Err(self.syntax("expected exponent")),
        };
        if !value.denom().is_one() {
            return Err(ExprError::NonIntegerExponent {
                line: caret.line,
                col: caret.col,
            });
        }
        value
            .numer()
            .to_i32()
            .filter(|e| e.unsigned_abs() <= 4096)
            .ok_or(ExprError::Syntax {
                line: caret.line,
                col: caret.col,
                msg: "exponent out of range".into(),
            })
    }

    fn base(&mut self) -> Result<RationalExpr, ExprError> {
        let pos = self.pos();
        match self.bump().0 {
            Tok::Int(k) => Ok(RationalExpr::from_constant(
                self.table,
                num_rational::BigRational::from_integer(k),
            )),
            Tok::Ident(name) => match self.table.index_of(&name) {
                Some(idx) => Ok(RationalExpr::var(self.table, idx)),
                None => Err(ExprError::UnknownIdentifier {
                    line: pos.line,
                    col: pos.col,
                    name,
                }),
            },
            Tok::LParen => {
                let inner = self.expr()?;
                match self.bump() {
                    (Tok::RParen, _) => Ok(inner),
                    _ => Err(self.syntax("expected `)`")),
                }
            }
            t => Err(self.syntax(format!("unexpected token {:?}", t))),
        }
    }
}

/// Parse `text` into a canonical rational expression over `table`.
pub fn parse(text: &str, table: &Arc<VarTable>) -> Result<RationalExpr, ExprError> {
    let toks = Lexer::new(text).tokens()?;
    let mut p = Parser {
        toks,
        at: 0,
        table,
    };
    let e = p.expr()?;
    match p.peek() {
        Tok::End => Ok(e),
        _ => Err(p.syntax("trailing input")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::rational::{big, big_ratio};

    fn table2() -> Arc<VarTable> {
        VarTable::for_lagrangian(2, &[]).unwrap()
    }

    #[test]
    fn forced_expansion_of_quadratic() {
        let t = table2();
        let e = parse("(1/2)*(v1 - v2)^2", &t).unwrap();
        // integer-content numerator over den = 2, terms descending (v2 > v1)
        assert_eq!(e.to_string(), "(v2^2 - 2*v1*v2 + v1^2)/(2)");
        let v1 = RationalExpr::var(&t, t.velocity(0));
        let v2 = RationalExpr::var(&t, t.velocity(1));
        assert_eq!(e, v1.sub(&v2).pow_unsigned(2).mul_scalar(&big_ratio(1, 2)));
    }

    #[test]
    fn precedence_and_unary_minus() {
        let t = table2();
        let e = parse("-v1^2 + q1*q2/2", &t).unwrap();
        let v1 = RationalExpr::var(&t, t.velocity(0));
        let q1 = RationalExpr::var(&t, t.position(0));
        let q2 = RationalExpr::var(&t, t.position(1));
        let expect = v1
            .pow_unsigned(2)
            .neg()
            .add(&q1.mul(&q2).mul_scalar(&big_ratio(1, 2)));
        assert_eq!(e, expect);
    }

    #[test]
    fn rational_literals_via_division() {
        let t = table2();
        let e = parse("3/4", &t).unwrap();
        assert_eq!(e.as_constant().unwrap(), big_ratio(3, 4));
        let e = parse("q1^-2", &t).unwrap();
        assert_eq!(
            e.same_repr(
                &RationalExpr::one(&t)
                    .div_exact(&RationalExpr::var(&t, t.position(0)).pow_unsigned(2))
            ),
            true
        );
    }

    #[test]
    fn error_cases() {
        let t = table2();
        assert!(matches!(
            parse("v1^(1/2)", &t),
            Err(ExprError::NonIntegerExponent { .. })
        ));
        assert!(matches!(
            parse("q3 + 1", &t),
            Err(ExprError::UnknownIdentifier { name, .. }) if name == "q3"
        ));
        assert!(matches!(
            parse("1/(2 - 2)", &t),
            Err(ExprError::DivisionByZero { .. })
        ));
        assert!(matches!(
            parse("q1 +", &t),
            Err(ExprError::Syntax { .. })
        ));
        assert!(matches!(
            parse("q1 q2", &t),
            Err(ExprError::Syntax { .. })
        ));
        assert!(matches!(
            parse("1.5", &t),
            Err(ExprError::Syntax { .. })
        ));
    }

    #[test]
    fn print_parse_round_trip() {
        let t = table2();
        for src in [
            "(1/2)*(v1 - v2)^2",
            "q1/(q1 + 1) + 1/(q1 + 1)",
            "(3*q1^2 - 2)/(q2 - 7) + v1*v2",
            "-q1 - q2 - 1/3",
        ] {
            let e = parse(src, &t).unwrap();
            let printed = e.to_string();
            let e2 = parse(&printed, &t).unwrap();
            assert!(e.same_repr(&e2), "round trip failed for {}", src);
        }
        let konst = parse("q1/(q1+1) + 1/(q1+1)", &t).unwrap();
        assert_eq!(konst.as_constant(), Some(big(1)));
    }
}
