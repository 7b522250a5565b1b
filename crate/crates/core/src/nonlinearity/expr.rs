//! Small arithmetic-expression language for user-supplied nonlinearities.
//!
//! Grammar (`^` binds tighter than unary minus and is right associative):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?
//! atom   := number | 't' | 'u' | 'pi' | func '(' expr ')' | '(' expr ')'
//! func   := 'sin' | 'cos' | 'exp'
//! ```

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    T,
    U,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Exp(Box<Expr>),
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let tokens = lex(src)?;
        let mut p = Parser { tokens, pos: 0 };
        let e = p.expr()?;
        match p.peek() {
            None => Ok(e),
            Some((col, tok)) => Err(Error::Parse {
                column: col,
                message: format!("unexpected trailing token {tok:?}"),
            }),
        }
    }

    pub fn eval(&self, t: f64, u: f64) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::T => t,
            Expr::U => u,
            Expr::Neg(a) => -a.eval(t, u),
            Expr::Add(a, b) => a.eval(t, u) + b.eval(t, u),
            Expr::Sub(a, b) => a.eval(t, u) - b.eval(t, u),
            Expr::Mul(a, b) => a.eval(t, u) * b.eval(t, u),
            Expr::Div(a, b) => a.eval(t, u) / b.eval(t, u),
            Expr::Pow(a, b) => {
                let base = a.eval(t, u);
                match **b {
                    // integer exponents keep negative bases real
                    Expr::Const(k) if k.fract() == 0.0 && k.abs() < 64.0 => base.powi(k as i32),
                    _ => base.powf(b.eval(t, u)),
                }
            }
            Expr::Sin(a) => a.eval(t, u).sin(),
            Expr::Cos(a) => a.eval(t, u).cos(),
            Expr::Exp(a) => a.eval(t, u).exp(),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::T => write!(f, "t"),
            Expr::U => write!(f, "u"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, b) => write!(f, "({a}^{b})"),
            Expr::Sin(a) => write!(f, "sin({a})"),
            Expr::Cos(a) => write!(f, "cos({a})"),
            Expr::Exp(a) => write!(f, "exp({a})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            // exponent part, e.g. 1e-3
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v = text.parse::<f64>().map_err(|_| Error::Parse {
                column: col,
                message: format!("malformed number {text:?}"),
            })?;
            out.push((col, Tok::Num(v)));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((col, Tok::Ident(chars[start..i].iter().collect())));
        } else if "+-*/^".contains(c) {
            out.push((col, Tok::Op(c)));
            i += 1;
        } else if c == '(' {
            out.push((col, Tok::LParen));
            i += 1;
        } else if c == ')' {
            out.push((col, Tok::RParen));
            i += 1;
        } else {
            return Err(Error::Parse {
                column: col,
                message: format!("unexpected character {c:?}"),
            });
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<(usize, Tok)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<(usize, &Tok)> {
        self.tokens.get(self.pos).map(|(c, t)| (*c, t))
    }

    fn column(&self) -> usize {
        self.tokens
            .get(self.pos)
            .map(|(c, _)| *c)
            .or_else(|| self.tokens.last().map(|(c, _)| c + 1))
            .unwrap_or(1)
    }

    fn eat_op(&mut self, op: char) -> bool {
        if let Some((_, Tok::Op(c))) = self.peek() {
            if *c == op {
                self.pos += 1;
                return true;
            }
        }
        false
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat_op('+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat_op('-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat_op('*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat_op('/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat_op('-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.eat_op('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.eat_op('^') {
            let exp = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let col = self.column();
        let tok = match self.tokens.get(self.pos) {
            Some((_, t)) => t.clone(),
            None => {
                return Err(Error::Parse {
                    column: col,
                    message: "unexpected end of expression".into(),
                })
            }
        };
        self.pos += 1;
        match tok {
            Tok::Num(v) => Ok(Expr::Const(v)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect_rparen()?;
                Ok(e)
            }
            Tok::Ident(name) => match name.as_str() {
                "t" => Ok(Expr::T),
                "u" => Ok(Expr::U),
                "pi" => Ok(Expr::Const(std::f64::consts::PI)),
                "sin" | "cos" | "exp" => {
                    match self.peek() {
                        Some((_, Tok::LParen)) => self.pos += 1,
                        _ => {
                            return Err(Error::Parse {
                                column: self.column(),
                                message: format!("expected '(' after {name}"),
                            })
                        }
                    }
                    let arg = Box::new(self.expr()?);
                    self.expect_rparen()?;
                    Ok(match name.as_str() {
                        "sin" => Expr::Sin(arg),
                        "cos" => Expr::Cos(arg),
                        _ => Expr::Exp(arg),
                    })
                }
                other => Err(Error::Parse {
                    column: col,
                    message: format!("unknown identifier {other:?}"),
                }),
            },
            other => Err(Error::Parse {
                column: col,
                message: format!("unexpected token {other:?}"),
            }),
        }
    }

    fn expect_rparen(&mut self) -> Result<()> {
        match self.peek() {
            Some((_, Tok::RParen)) => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(Error::Parse {
                column: self.column(),
                message: "expected ')'".into(),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_and_associativity() {
        let e = Expr::parse("1 + 2 * 3 ^ 2").unwrap();
        assert_eq!(e.eval(0.0, 0.0), 19.0);
        let e = Expr::parse("2 ^ 3 ^ 2").unwrap();
        assert_eq!(e.eval(0.0, 0.0), 512.0);
        let e = Expr::parse("-2 ^ 2").unwrap();
        assert_eq!(e.eval(0.0, 0.0), -4.0);
        let e = Expr::parse("8 / 4 / 2").unwrap();
        assert_eq!(e.eval(0.0, 0.0), 1.0);
    }

    #[test]
    fn variables_and_functions() {
        let e = Expr::parse("u*(1-u)*(1 + 0.5*sin(2*pi*t))").unwrap();
        let v = e.eval(0.25, 0.5);
        assert!((v - 0.25 * 1.5).abs() < 1e-15);
        let e = Expr::parse("exp(-u) * cos(t)").unwrap();
        assert!((e.eval(0.0, 1.0) - (-1.0f64).exp()).abs() < 1e-15);
        let e = Expr::parse("1.5e-1*u").unwrap();
        assert!((e.eval(0.0, 2.0) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn negative_base_integer_power() {
        let e = Expr::parse("(u-1)^5").unwrap();
        assert_eq!(e.eval(0.0, 0.0), -1.0);
    }

    #[test]
    fn errors_carry_columns() {
        match Expr::parse("u + * 2") {
            Err(Error::Parse { column, .. }) => assert_eq!(column, 5),
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(Expr::parse("sin u").is_err());
        assert!(Expr::parse("foo(u)").is_err());
        assert!(Expr::parse("(u").is_err());
        assert!(Expr::parse("u $ 2").is_err());
        assert!(Expr::parse("").is_err());
    }

    #[test]
    fn display_reparses_to_same_value() {
        let e = Expr::parse("u^2*(3-u) - 0.1*sin(t)*u").unwrap();
        let again = Expr::parse(&e.to_string()).unwrap();
        for &(t, u) in &[(0.0, 0.5), (1.3, 2.0), (-0.7, -1.1)] {
            assert_eq!(e.eval(t, u), again.eval(t, u));
        }
    }
}
