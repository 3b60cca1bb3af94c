//! Recursive-descent parser for the symbol grammar:
//!
//! ```text
//! expr   := term (("+"|"-") term)*
//! term   := factor (("*"|"/") factor)*
//! factor := ("-")? power
//! power  := atom ("^" factor)?
//! atom   := NUMBER | "x" | IDENT "(" expr ("," expr)? ")" | "(" expr ")"
//! ```

use super::ast::{BinOp, Expr, Func};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdent { offset: usize, name: String },
    #[error("`{name}` takes {expected} argument(s), found {found} (offset {offset})")]
    Arity {
        offset: usize,
        name: String,
        expected: usize,
        found: usize,
    },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. }
            | ParseError::UnknownIdent { offset, .. }
            | ParseError::Arity { offset, .. } => *offset,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    End,
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Num(v) => format!("number {v}"),
        Tok::Ident(s) => format!("identifier `{s}`"),
        Tok::Plus => "`+`".into(),
        Tok::Minus => "`-`".into(),
        Tok::Star => "`*`".into(),
        Tok::Slash => "`/`".into(),
        Tok::Caret => "`^`".into(),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::Comma => "`,`".into(),
        Tok::End => "end of input".into(),
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
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
            b',' => Tok::Comma,
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                let mantissa = &text[start..i];
                if !mantissa.bytes().any(|b| b.is_ascii_digit()) {
                    return Err(ParseError::Syntax {
                        offset: start,
                        message: "malformed number".into(),
                    });
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    let digits_start = j;
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    if j == digits_start {
                        return Err(ParseError::Syntax {
                            offset: j,
                            message: "missing exponent digits".into(),
                        });
                    }
                    i = j;
                }
                let v: f64 = text[start..i].parse().map_err(|_| ParseError::Syntax {
                    offset: start,
                    message: "malformed number".into(),
                })?;
                if !v.is_finite() {
                    return Err(ParseError::Syntax {
                        offset: start,
                        message: "number out of range".into(),
                    });
                }
                out.push((Tok::Num(v), start));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Tok::Ident(text[start..i].to_string()), start));
                continue;
            }
            _ => {
                return Err(ParseError::Syntax {
                    offset: start,
                    message: format!("unexpected character `{}`", text[start..].chars().next().unwrap_or('?')),
                })
            }
        };
        out.push((tok, start));
        i += 1;
    }
    out.push((Tok::End, text.len()));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, wanted: &str) -> ParseError {
        ParseError::Syntax {
            offset: self.offset(),
            message: format!("expected {wanted}, found {}", describe(self.peek())),
        }
    }

    fn expect(&mut self, tok: Tok, wanted: &str) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(wanted))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.factor()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            Ok(Expr::Neg(Box::new(self.power()?)))
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if *self.peek() == Tok::Caret {
            self.bump();
            let exponent = self.factor()?;
            Ok(Expr::binary(BinOp::Pow, base, exponent))
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let start = self.offset();
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::Num(v))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                self.bump();
                if name == "x" {
                    return Ok(Expr::Var);
                }
                let func = Func::from_name(&name).ok_or_else(|| ParseError::UnknownIdent {
                    offset: start,
                    name: name.clone(),
                })?;
                self.expect(Tok::LParen, "`(` after function name")?;
                let mut args = vec![self.expr()?];
                while *self.peek() == Tok::Comma {
                    self.bump();
                    args.push(self.expr()?);
                }
                self.expect(Tok::RParen, "`)`")?;
                if args.len() != func.arity() {
                    return Err(ParseError::Arity {
                        offset: start,
                        name,
                        expected: func.arity(),
                        found: args.len(),
                    });
                }
                Ok(Expr::Call(func, args))
            }
            _ => Err(self.unexpected("number, `x`, function call or `(`")),
        }
    }
}

/// Parses a symbol expression in the variable `x`.
pub fn parse(text: &str) -> Result<Expr, ParseError> {
    let mut p = Parser { toks: lex(text)?, pos: 0 };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(p.unexpected("operator or end of input"));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn add(a: Expr, b: Expr) -> Expr {
        Expr::binary(BinOp::Add, a, b)
    }

    #[test]
    fn sqrt_of_shifted_variable() {
        let e = parse("sqrt(x+1)").unwrap();
        assert_eq!(e, Expr::call(Func::Sqrt, add(Expr::Var, Expr::Num(1.0))));
    }

    #[test]
    fn counterexample_symbol() {
        let e = parse("2*x - log(cosh(x-10)) + 100").unwrap();
        let expected = add(
            Expr::binary(
                BinOp::Sub,
                Expr::binary(BinOp::Mul, Expr::Num(2.0), Expr::Var),
                Expr::call(
                    Func::Log,
                    Expr::call(Func::Cosh, Expr::binary(BinOp::Sub, Expr::Var, Expr::Num(10.0))),
                ),
            ),
            Expr::Num(100.0),
        );
        assert_eq!(e, expected);
    }

    #[test]
    fn incomplete_expression_reports_offset() {
        let err = parse("x +").unwrap_err();
        assert!(matches!(err, ParseError::Syntax { offset: 3, .. }), "{err:?}");
    }

    #[test]
    fn precedence_and_associativity() {
        // ^ binds tighter than unary minus, and is right-associative
        assert_eq!(
            parse("-x^2").unwrap(),
            Expr::Neg(Box::new(Expr::binary(BinOp::Pow, Expr::Var, Expr::Num(2.0))))
        );
        assert_eq!(
            parse("2^3^2").unwrap(),
            Expr::binary(
                BinOp::Pow,
                Expr::Num(2.0),
                Expr::binary(BinOp::Pow, Expr::Num(3.0), Expr::Num(2.0))
            )
        );
        assert_eq!(
            parse("1-2-3").unwrap(),
            Expr::binary(
                BinOp::Sub,
                Expr::binary(BinOp::Sub, Expr::Num(1.0), Expr::Num(2.0)),
                Expr::Num(3.0)
            )
        );
        assert_eq!(
            parse("x^-1").unwrap(),
            Expr::binary(BinOp::Pow, Expr::Var, Expr::Neg(Box::new(Expr::Num(1.0))))
        );
    }

    #[test]
    fn whitespace_insensitive() {
        assert_eq!(parse(" exp ( - x ) ").unwrap(), parse("exp(-x)").unwrap());
    }

    #[test]
    fn numbers_with_fraction_and_exponent() {
        assert_eq!(parse("1.5e-3").unwrap(), Expr::Num(1.5e-3));
        assert_eq!(parse(".25").unwrap(), Expr::Num(0.25));
        assert_eq!(parse("3.").unwrap(), Expr::Num(3.0));
        assert!(parse("1e").is_err());
        assert!(parse("1e999").is_err());
    }

    #[test]
    fn unknown_identifier() {
        let err = parse("x + sin(x)").unwrap_err();
        assert_eq!(
            err,
            ParseError::UnknownIdent {
                offset: 4,
                name: "sin".into()
            }
        );
        assert!(matches!(parse("y").unwrap_err(), ParseError::UnknownIdent { offset: 0, .. }));
    }

    #[test]
    fn arity_mismatch() {
        assert!(matches!(parse("pow(x)").unwrap_err(), ParseError::Arity { expected: 2, found: 1, .. }));
        assert!(matches!(parse("exp(x, 2)").unwrap_err(), ParseError::Arity { expected: 1, found: 2, .. }));
    }

    #[test]
    fn rejects_double_minus_and_trailing_tokens() {
        assert!(parse("--x").is_err());
        assert!(matches!(parse("x x").unwrap_err(), ParseError::Syntax { offset: 2, .. }));
        assert!(matches!(parse("(x").unwrap_err(), ParseError::Syntax { offset: 2, .. }));
        assert!(matches!(parse("x $").unwrap_err(), ParseError::Syntax { offset: 2, .. }));
    }
}
