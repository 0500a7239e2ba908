//! A small expression language for planar vector field components.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?
//! atom   := number | ident | ident '(' expr ')' | '(' expr ')'
//! ```
//!
//! Variables are `x`, `y`, `r = sqrt(x²+y²)` and `theta = atan2(y, x)`;
//! `pi` and caller-supplied named constants are substituted at parse time.
//! Functions: `sin`, `cos`, `ln`, `exp`, `sqrt`.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::model::PlanarFormula;
use crate::series::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    X,
    Y,
    R,
    Theta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Ln,
    Exp,
    Sqrt,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var(v) => f.write_str(match v {
                Var::X => "x",
                Var::Y => "y",
                Var::R => "r",
                Var::Theta => "theta",
            }),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, b) => write!(f, "({a} ^ {b})"),
            Expr::Call(func, a) => {
                let name = match func {
                    Func::Sin => "sin",
                    Func::Cos => "cos",
                    Func::Ln => "ln",
                    Func::Exp => "exp",
                    Func::Sqrt => "sqrt",
                };
                write!(f, "{name}({a})")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(src: &str) -> Result<Vec<(usize, Tok)>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text = &src[start..i];
            let v = text.parse::<f64>().map_err(|_| Error::Parse {
                offset: start,
                message: format!("bad number '{text}'"),
            })?;
            out.push((start, Tok::Num(v)));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Ident(src[start..i].to_string())));
        } else if "+-*/^()".contains(c) {
            out.push((i, Tok::Op(c)));
            i += 1;
        } else {
            return Err(Error::Parse {
                offset: i,
                message: format!("unexpected character '{c}'"),
            });
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    len: usize,
    constants: &'a BTreeMap<String, f64>,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.len, |(o, _)| *o)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            offset: self.offset(),
            message: message.into(),
        })
    }

    fn eat(&mut self, op: char) -> bool {
        if self.peek() == Some(&Tok::Op(op)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat('/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat('-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.eat('^') {
            // right-associative; -x^2 parses as -(x^2) via unary above
            Ok(Expr::Pow(Box::new(base), Box::new(self.unary()?)))
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Expr::Num(v))
            }
            Some(Tok::Op('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(')') {
                    return self.err("expected ')'");
                }
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                let start = self.offset();
                self.pos += 1;
                let func = match name.as_str() {
                    "sin" => Some(Func::Sin),
                    "cos" => Some(Func::Cos),
                    "ln" => Some(Func::Ln),
                    "exp" => Some(Func::Exp),
                    "sqrt" => Some(Func::Sqrt),
                    _ => None,
                };
                if let Some(func) = func {
                    if !self.eat('(') {
                        return self.err(format!("expected '(' after {name}"));
                    }
                    let arg = self.expr()?;
                    if !self.eat(')') {
                        return self.err("expected ')'");
                    }
                    return Ok(Expr::Call(func, Box::new(arg)));
                }
                match name.as_str() {
                    "x" => Ok(Expr::Var(Var::X)),
                    "y" => Ok(Expr::Var(Var::Y)),
                    "r" => Ok(Expr::Var(Var::R)),
                    "theta" => Ok(Expr::Var(Var::Theta)),
                    "pi" => Ok(Expr::Num(std::f64::consts::PI)),
                    other => match self.constants.get(other) {
                        Some(&v) => Ok(Expr::Num(v)),
                        None => Err(Error::Parse {
                            offset: start,
                            message: format!("unknown identifier '{other}'"),
                        }),
                    },
                }
            }
            Some(Tok::Op(c)) => self.err(format!("unexpected '{c}'")),
            None => self.err("unexpected end of expression"),
        }
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        Self::parse_with(src, &BTreeMap::new())
    }

    pub fn parse_with(src: &str, constants: &BTreeMap<String, f64>) -> Result<Expr> {
        let mut p = Parser {
            toks: tokenize(src)?,
            pos: 0,
            len: src.len(),
            constants,
        };
        let e = p.expr()?;
        if p.pos != p.toks.len() {
            return p.err("trailing input");
        }
        Ok(e)
    }

    pub fn eval<S: Scalar>(&self, x: &S, y: &S) -> Result<S> {
        let mut env = Env {
            x,
            y,
            r: None,
            theta: None,
        };
        self.eval_in(&mut env)
    }

    pub fn has_variables(&self) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::Var(_) => true,
            Expr::Neg(a) | Expr::Call(_, a) => a.has_variables(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.has_variables() || b.has_variables()
            }
        }
    }

    /// Value of a variable-free subexpression.
    fn constant_value(&self) -> Option<f64> {
        if self.has_variables() {
            None
        } else {
            self.eval(&0.0, &0.0).ok()
        }
    }

    fn eval_in<S: Scalar>(&self, env: &mut Env<'_, S>) -> Result<S> {
        Ok(match self {
            Expr::Num(v) => env.x.lift(*v),
            Expr::Var(Var::X) => env.x.clone(),
            Expr::Var(Var::Y) => env.y.clone(),
            Expr::Var(Var::R) => env.r()?,
            Expr::Var(Var::Theta) => env.theta(),
            Expr::Neg(a) => -a.eval_in(env)?,
            Expr::Add(a, b) => a.eval_in(env)? + b.eval_in(env)?,
            Expr::Sub(a, b) => a.eval_in(env)? - b.eval_in(env)?,
            Expr::Mul(a, b) => a.eval_in(env)? * b.eval_in(env)?,
            Expr::Div(a, b) => a.eval_in(env)?.try_div(&b.eval_in(env)?)?,
            Expr::Pow(a, b) => {
                let base = a.eval_in(env)?;
                match b.constant_value() {
                    Some(p) if p.fract() == 0.0 && p.abs() <= 64.0 => base.powi(p as i32)?,
                    Some(p) => base.try_powf(p)?,
                    None => (b.eval_in(env)? * base.try_ln()?).exp(),
                }
            }
            Expr::Call(func, a) => {
                let v = a.eval_in(env)?;
                match func {
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Ln => v.try_ln()?,
                    Func::Exp => v.exp(),
                    Func::Sqrt => v.try_powf(0.5)?,
                }
            }
        })
    }
}

struct Env<'a, S> {
    x: &'a S,
    y: &'a S,
    r: Option<S>,
    theta: Option<S>,
}

impl<S: Scalar> Env<'_, S> {
    fn r(&mut self) -> Result<S> {
        if self.r.is_none() {
            let r2 = self.x.clone() * self.x.clone() + self.y.clone() * self.y.clone();
            self.r = Some(r2.try_powf(0.5)?);
        }
        Ok(self.r.clone().unwrap())
    }

    fn theta(&mut self) -> S {
        self.theta.get_or_insert_with(|| self.y.atan2(self.x)).clone()
    }
}

/// A variable-free expression such as `-pi/4` or `2^0.5`, evaluated.
pub fn parse_constant(src: &str) -> Result<f64> {
    let e = Expr::parse(src).map_err(|e| Error::Config(format!("bad value '{src}': {e}")))?;
    if e.has_variables() {
        return Err(Error::Config(format!("value '{src}' must be constant")));
    }
    e.eval(&0.0, &0.0)
}

/// A planar component `(ẋ, ẏ)` given by two expressions.
#[derive(Debug, Clone, PartialEq)]
pub struct ExprField {
    pub xdot: Expr,
    pub ydot: Expr,
}

impl ExprField {
    pub fn parse(xdot: &str, ydot: &str, constants: &BTreeMap<String, f64>) -> Result<Self> {
        Ok(ExprField {
            xdot: Expr::parse_with(xdot, constants)?,
            ydot: Expr::parse_with(ydot, constants)?,
        })
    }
}

impl PlanarFormula for ExprField {
    fn apply<S: Scalar>(&self, x: &S, y: &S) -> Result<[S; 2]> {
        Ok([self.xdot.eval(x, y)?, self.ydot.eval(x, y)?])
    }
}
