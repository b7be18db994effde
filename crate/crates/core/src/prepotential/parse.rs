//! Recursive-descent parser for the prepotential expression language.
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := atom ('^' integer)? | '-' factor
//! atom   := number | 'i' | var | func '(' expr ')' | '(' expr ')'
//! var    := 'w' integer          (1..n)
//! func   := 'exp' | 'log' | 'sqrt'
//! ```

use num_complex::Complex64;

use super::expr::{Expr, Func, PrepotentialExpr};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Int(u64),
    Imag,
    Var(String, usize),
    Func(Func),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    Invalid(char),
    Eof,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn skip_ws(&mut self) {
        let rest = &self.src[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    /// Next token and its starting byte offset.
    fn next(&mut self) -> (Tok, usize) {
        self.skip_ws();
        let start = self.pos;
        let rest = &self.src[start..];
        let Some(c) = rest.chars().next() else {
            return (Tok::Eof, start);
        };
        let single = |t| (t, start);
        let tok = match c {
            '+' => single(Tok::Plus),
            '-' => single(Tok::Minus),
            '*' => single(Tok::Star),
            '/' => single(Tok::Slash),
            '^' => single(Tok::Caret),
            '(' => single(Tok::LParen),
            ')' => single(Tok::RParen),
            ',' => single(Tok::Comma),
            c if c.is_ascii_digit() || c == '.' => {
                let int_len = rest.bytes().take_while(u8::is_ascii_digit).count();
                let mut len = int_len;
                let mut fractional = false;
                if rest[len..].starts_with('.') {
                    fractional = true;
                    len += 1;
                    len += rest[len..].bytes().take_while(u8::is_ascii_digit).count();
                }
                self.pos += len;
                let text = &rest[..len];
                return match (fractional, text.parse::<u64>()) {
                    (false, Ok(k)) => (Tok::Int(k), start),
                    _ => match text.parse::<f64>() {
                        Ok(v) if text != "." => (Tok::Num(v), start),
                        _ => (Tok::Invalid('.'), start),
                    },
                };
            }
            c if c.is_ascii_alphabetic() => {
                let len = rest
                    .bytes()
                    .take_while(|b| b.is_ascii_alphanumeric() || *b == b'_')
                    .count();
                self.pos += len;
                let word = &rest[..len];
                let tok = if word == "i" {
                    Tok::Imag
                } else if let Some(f) = Func::from_name(word) {
                    Tok::Func(f)
                } else if let Some(idx) = word.strip_prefix('w').and_then(|d| d.parse::<usize>().ok()) {
                    Tok::Var(word.to_string(), idx)
                } else {
                    Tok::Ident(word.to_string())
                };
                return (tok, start);
            }
            other => single(Tok::Invalid(other)),
        };
        self.pos += c.len_utf8();
        tok
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    tok: Tok,
    offset: usize,
    n: usize,
}

const ATOM_START: &[&str] = &["number", "'i'", "variable", "function", "'('", "'-'"];

impl<'a> Parser<'a> {
    fn new(src: &'a str, n: usize) -> Self {
        let mut lexer = Lexer { src, pos: 0 };
        let (tok, offset) = lexer.next();
        Parser { lexer, tok, offset, n }
    }

    fn bump(&mut self) {
        let (tok, offset) = self.lexer.next();
        self.tok = tok;
        self.offset = offset;
    }

    fn syntax<T>(&self, expected: &[&str]) -> Result<T> {
        Err(Error::Syntax {
            offset: self.offset,
            expected: expected.iter().map(|s| s.to_string()).collect(),
        })
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.tok {
                Tok::Plus => {
                    self.bump();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Minus => {
                    self.bump();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        loop {
            match self.tok {
                Tok::Star => {
                    self.bump();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                Tok::Slash => {
                    self.bump();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.factor()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        if self.tok == Tok::Minus {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.factor()?)));
        }
        let base = self.atom()?;
        if self.tok != Tok::Caret {
            return Ok(base);
        }
        self.bump();
        match self.tok {
            Tok::Int(k) => {
                let k = u32::try_from(k).map_err(|_| Error::Syntax {
                    offset: self.offset,
                    expected: vec!["integer exponent below 2^32".into()],
                })?;
                self.bump();
                Ok(Expr::Pow(Box::new(base), k))
            }
            _ => self.syntax(&["integer"]),
        }
    }

    fn atom(&mut self) -> Result<Expr> {
        let expr = match std::mem::replace(&mut self.tok, Tok::Eof) {
            Tok::Int(k) => Expr::Num(Complex64::new(k as f64, 0.0)),
            Tok::Num(v) => Expr::Num(Complex64::new(v, 0.0)),
            Tok::Imag => Expr::Num(Complex64::new(0.0, 1.0)),
            Tok::Var(name, idx) => {
                if idx == 0 || idx > self.n {
                    return Err(Error::UnknownVariable {
                        name,
                        offset: self.offset,
                        n: self.n,
                    });
                }
                Expr::Var(idx - 1)
            }
            Tok::Ident(name) => {
                return Err(Error::UnknownVariable {
                    name,
                    offset: self.offset,
                    n: self.n,
                });
            }
            Tok::Func(f) => {
                self.bump();
                if self.tok != Tok::LParen {
                    return self.syntax(&["'('"]);
                }
                self.bump();
                let arg = self.expr()?;
                if self.tok == Tok::Comma {
                    return Err(Error::Arity(format!(
                        "{}() takes exactly one argument (extra argument at byte {})",
                        f.name(),
                        self.offset
                    )));
                }
                if self.tok != Tok::RParen {
                    return self.syntax(&["')'", "operator"]);
                }
                Expr::Call(f, Box::new(arg))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.expr()?;
                if self.tok != Tok::RParen {
                    return self.syntax(&["')'", "operator"]);
                }
                inner
            }
            other => {
                self.tok = other;
                return self.syntax(ATOM_START);
            }
        };
        self.bump();
        Ok(expr)
    }
}

/// Parses `text` as a prepotential in the variables `w1..wn`.
pub fn parse(text: &str, n: usize) -> Result<PrepotentialExpr> {
    if n == 0 {
        return Err(Error::Arity("a prepotential needs at least one variable".into()));
    }
    let mut parser = Parser::new(text, n);
    let ast = parser.expr()?;
    if parser.tok != Tok::Eof {
        return parser.syntax(&["operator", "end of input"]);
    }
    PrepotentialExpr::new(ast, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_cubic() {
        let f = parse("w1^3/3", 1).unwrap();
        let want = Expr::Div(
            Box::new(Expr::Pow(Box::new(Expr::Var(0)), 3)),
            Box::new(Expr::Num(Complex64::new(3.0, 0.0))),
        );
        assert_eq!(f.ast(), &want);
        assert_eq!(f.to_string(), "w1^3/3");
    }

    #[test]
    fn parses_quadratic() {
        let f = parse("(1/2)*(w1^2+w2^2)", 2).unwrap();
        assert_eq!(f.n(), 2);
        assert_eq!(f.to_string(), "1/2*(w1^2+w2^2)");
        assert_eq!(parse(&f.to_string(), 2).unwrap(), f);
    }

    #[test]
    fn double_caret_is_a_syntax_error_at_offset_3() {
        match parse("w1^^2", 1) {
            Err(Error::Syntax { offset, expected }) => {
                assert_eq!(offset, 3);
                assert_eq!(expected, vec!["integer".to_string()]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn errors() {
        assert!(matches!(parse("w3", 2), Err(Error::UnknownVariable { offset: 0, .. })));
        assert!(matches!(parse("1 + w0", 2), Err(Error::UnknownVariable { offset: 4, .. })));
        assert!(matches!(parse("x1", 1), Err(Error::UnknownVariable { .. })));
        assert!(matches!(parse("exp(w1, w1)", 1), Err(Error::Arity(_))));
        assert!(matches!(parse("(w1", 1), Err(Error::Syntax { offset: 3, .. })));
        assert!(matches!(parse("w1 w1", 1), Err(Error::Syntax { offset: 3, .. })));
        assert!(matches!(parse("", 1), Err(Error::Syntax { offset: 0, .. })));
        assert!(matches!(parse("w1^1.5", 1), Err(Error::Syntax { offset: 3, .. })));
        assert!(matches!(parse("2 $ 3", 1), Err(Error::Syntax { offset: 2, .. })));
        assert!(matches!(parse("w1", 0), Err(Error::Arity(_))));
    }

    #[test]
    fn precedence_and_unary_minus() {
        // -w1^2 is -(w1^2); 2*-w1 is allowed.
        let f = parse("-w1^2", 1).unwrap();
        assert!(matches!(f.ast(), Expr::Neg(inner) if matches!(**inner, Expr::Pow(..))));
        assert!(parse("2*-w1", 1).is_ok());
        let g = parse("(-w1)^2", 1).unwrap();
        assert_eq!(g.to_string(), "(-w1)^2");
        let h = parse("w1-(w1-w1)", 1).unwrap();
        assert_eq!(h.to_string(), "w1-(w1-w1)");
        assert_eq!(parse("  i * sqrt( w1 )  ", 1).unwrap().to_string(), "i*sqrt(w1)");
    }

    fn arb_expr(n: usize) -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (0usize..n).prop_map(Expr::Var),
            (0u32..1000, 0u32..4).prop_map(|(k, d)| Expr::Num(Complex64::new(k as f64 / 10f64.powi(d as i32), 0.0))),
            Just(Expr::Num(Complex64::new(0.0, 1.0))),
        ];
        leaf.prop_recursive(4, 32, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(|a| Expr::Neg(Box::new(a))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Add(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Sub(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Mul(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Div(Box::new(a), Box::new(b))),
                (inner.clone(), 0u32..5).prop_map(|(a, k)| Expr::Pow(Box::new(a), k)),
                inner.clone().prop_map(|a| Expr::Call(Func::Exp, Box::new(a))),
                inner.prop_map(|a| Expr::Call(Func::Sqrt, Box::new(a))),
            ]
        })
    }

    proptest! {
        #[test]
        fn canonical_printer_round_trips(ast in arb_expr(3)) {
            let f = PrepotentialExpr::new(ast, 3).unwrap();
            let printed = f.to_string();
            let reparsed = parse(&printed, 3).unwrap();
            prop_assert_eq!(&reparsed, &f, "printed as {}", printed);
        }
    }
}
