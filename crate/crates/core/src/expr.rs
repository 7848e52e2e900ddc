//! Closed-form expressions over named real variables.

use std::fmt;

use meval::tokenizer::{Operation, Token};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
enum Op {
    Num(f64),
    X,
    H,
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Pow,
    Neg,
    F1(fn(f64) -> f64),
    F2(fn(f64, f64) -> f64),
    Max(usize),
    Min(usize),
}

fn unary(name: &str) -> Option<fn(f64) -> f64> {
    Some(match name {
        "sqrt" => f64::sqrt,
        "exp" => f64::exp,
        "ln" => f64::ln,
        "abs" => f64::abs,
        "sin" => f64::sin,
        "cos" => f64::cos,
        "tan" => f64::tan,
        "asin" => f64::asin,
        "acos" => f64::acos,
        "atan" => f64::atan,
        "sinh" => f64::sinh,
        "cosh" => f64::cosh,
        "tanh" => f64::tanh,
        "asinh" => f64::asinh,
        "acosh" => f64::acosh,
        "atanh" => f64::atanh,
        "floor" => f64::floor,
        "ceil" => f64::ceil,
        "round" => f64::round,
        "signum" => f64::signum,
        _ => return None,
    })
}

const STACK: usize = 64;

/// A parsed expression in one or two variables (`x`, and optionally `h`),
/// compiled to a postfix program over the usual elementary functions and the
/// constants `pi` and `e`.
#[derive(Clone)]
pub struct Expression {
    source: String,
    program: Vec<Op>,
}

impl Expression {
    pub fn parse(source: &str) -> Result<Self> {
        let fail = |reason: String| Error::Expression { expr: source.trim().to_string(), reason };
        let tokens = meval::tokenizer::tokenize(source).map_err(|e| fail(e.to_string()))?;
        let rpn = meval::shunting_yard::to_rpn(&tokens).map_err(|e| fail(e.to_string()))?;
        let mut program = Vec::with_capacity(rpn.len());
        let mut depth = 0usize;
        for token in rpn {
            let (op, pops) = match token {
                Token::Number(v) => (Op::Num(v), 0),
                Token::Var(ref n) => match n.as_str() {
                    "x" => (Op::X, 0),
                    "h" => (Op::H, 0),
                    "pi" => (Op::Num(std::f64::consts::PI), 0),
                    "e" => (Op::Num(std::f64::consts::E), 0),
                    _ => return Err(fail(format!("unknown variable `{n}`"))),
                },
                Token::Binary(op) => (
                    match op {
                        Operation::Plus => Op::Add,
                        Operation::Minus => Op::Sub,
                        Operation::Times => Op::Mul,
                        Operation::Div => Op::Div,
                        Operation::Rem => Op::Rem,
                        Operation::Pow => Op::Pow,
                    },
                    2,
                ),
                Token::Unary(Operation::Minus) => (Op::Neg, 1),
                Token::Unary(Operation::Plus) => continue,
                Token::Func(ref n, Some(k)) => match (n.as_str(), k) {
                    ("atan2", 2) => (Op::F2(f64::atan2), 2),
                    ("max", k) if k >= 1 => (Op::Max(k), k),
                    ("min", k) if k >= 1 => (Op::Min(k), k),
                    (name, 1) if unary(name).is_some() => (Op::F1(unary(name).unwrap()), 1),
                    _ => return Err(fail(format!("unknown function `{n}` with {k} arguments"))),
                },
                other => return Err(fail(format!("unexpected token {other:?}"))),
            };
            if depth < pops {
                return Err(fail("malformed expression".into()));
            }
            depth = depth - pops + 1;
            if depth > STACK {
                return Err(fail(format!("expression nests deeper than {STACK}")));
            }
            program.push(op);
        }
        if depth != 1 {
            return Err(fail("malformed expression".into()));
        }
        Ok(Expression { source: source.trim().to_string(), program })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Evaluates at `x` (with `h = 0`).
    pub fn eval(&self, x: f64) -> f64 {
        self.eval2(x, 0.0)
    }

    pub fn eval2(&self, x: f64, h: f64) -> f64 {
        let mut stack = [0.0f64; STACK];
        let mut n = 0usize;
        for op in &self.program {
            match *op {
                Op::Num(v) => {
                    stack[n] = v;
                    n += 1;
                }
                Op::X => {
                    stack[n] = x;
                    n += 1;
                }
                Op::H => {
                    stack[n] = h;
                    n += 1;
                }
                Op::Neg => stack[n - 1] = -stack[n - 1],
                Op::F1(f) => stack[n - 1] = f(stack[n - 1]),
                Op::Max(k) | Op::Min(k) => {
                    let args = &stack[n - k..n];
                    let v = if matches!(op, Op::Max(_)) {
                        args.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                    } else {
                        args.iter().cloned().fold(f64::INFINITY, f64::min)
                    };
                    n -= k;
                    stack[n] = v;
                    n += 1;
                }
                binary => {
                    let (l, r) = (stack[n - 2], stack[n - 1]);
                    n -= 1;
                    stack[n - 1] = match binary {
                        Op::Add => l + r,
                        Op::Sub => l - r,
                        Op::Mul => l * r,
                        Op::Div => l / r,
                        Op::Rem => l % r,
                        Op::Pow => l.powf(r),
                        Op::F2(f) => f(l, r),
                        _ => unreachable!(),
                    };
                }
            }
        }
        stack[0]
    }
}

impl fmt::Debug for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expression({:?})", self.source)
    }
}

impl PartialEq for Expression {
    fn eq(&self, other: &Self) -> bool {
        self.source == other.source
    }
}
