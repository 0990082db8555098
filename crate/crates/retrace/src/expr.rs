//! Arithmetic expressions: parsing, rendering, evaluation, one-step reduction.
//!
//! An expression is either an integer literal, a placeholder letter (used in
//! decomposition skeletons like `(A - B)`), or a flat run of terms joined by
//! operators. Runs render with surrounding parentheses, so a binary node and
//! a two-term run are the same thing. Evaluation of a run applies the usual
//! precedence: multiplication first (left to right), then addition and
//! subtraction (left to right).

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{PipelineError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Op {
    Add,
    Sub,
    Mul,
}

impl Op {
    pub fn symbol(self) -> char {
        match self {
            Op::Add => '+',
            Op::Sub => '-',
            Op::Mul => '*',
        }
    }

    pub fn apply(self, a: i128, b: i128) -> i128 {
        match self {
            Op::Add => a + b,
            Op::Sub => a - b,
            Op::Mul => a * b,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Num(i128),
    /// Placeholder letter in a decomposition skeleton.
    Sym(char),
    /// Flat run `t0 op0 t1 op1 t2 ...`; invariant: `ops.len() + 1 == terms.len()`
    /// and `terms.len() >= 2`. Renders with surrounding parentheses.
    Run { terms: Vec<Expr>, ops: Vec<Op> },
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(n) => write!(f, "{n}"),
            Expr::Sym(c) => write!(f, "{c}"),
            Expr::Run { terms, ops } => {
                write!(f, "({}", terms[0])?;
                for (op, t) in ops.iter().zip(&terms[1..]) {
                    write!(f, " {} {t}", op.symbol())?;
                }
                write!(f, ")")
            }
        }
    }
}

impl Expr {
    pub fn render(&self) -> String {
        self.to_string()
    }

    pub fn run(terms: Vec<Expr>, ops: Vec<Op>) -> Expr {
        debug_assert!(terms.len() >= 2 && ops.len() + 1 == terms.len());
        Expr::Run { terms, ops }
    }

    pub fn bin(a: Expr, op: Op, b: Expr) -> Expr {
        Expr::run(vec![a, b], vec![op])
    }

    pub fn is_num(&self) -> bool {
        matches!(self, Expr::Num(_))
    }

    pub fn as_num(&self) -> Option<i128> {
        match self {
            Expr::Num(n) => Some(*n),
            _ => None,
        }
    }

    /// Evaluates with standard precedence. `None` if any placeholder remains.
    pub fn eval(&self) -> Option<i128> {
        match self {
            Expr::Num(n) => Some(*n),
            Expr::Sym(_) => None,
            Expr::Run { terms, ops } => {
                let vals: Vec<i128> = terms.iter().map(Expr::eval).collect::<Option<_>>()?;
                // Collapse multiplication runs, then fold +/- left to right.
                let mut factors = vec![vals[0]];
                let mut adds: Vec<Op> = Vec::new();
                for (op, v) in ops.iter().zip(&vals[1..]) {
                    if *op == Op::Mul {
                        *factors.last_mut().expect("nonempty") *= *v;
                    } else {
                        adds.push(*op);
                        factors.push(*v);
                    }
                }
                let mut acc = factors[0];
                for (op, v) in adds.iter().zip(&factors[1..]) {
                    acc = op.apply(acc, *v);
                }
                Some(acc)
            }
        }
    }

    /// Replaces placeholder letters by literals. `None` if a letter is unmapped.
    pub fn substitute(&self, map: &BTreeMap<char, i128>) -> Option<Expr> {
        match self {
            Expr::Num(n) => Some(Expr::Num(*n)),
            Expr::Sym(c) => map.get(c).map(|v| Expr::Num(*v)),
            Expr::Run { terms, ops } => {
                let terms: Vec<Expr> = terms
                    .iter()
                    .map(|t| t.substitute(map))
                    .collect::<Option<_>>()?;
                Some(Expr::Run {
                    terms,
                    ops: ops.clone(),
                })
            }
        }
    }

    /// Placeholder letters in left-to-right render order.
    pub fn symbols(&self) -> Vec<char> {
        let mut out = Vec::new();
        fn walk(e: &Expr, out: &mut Vec<char>) {
            match e {
                Expr::Sym(c) => out.push(*c),
                Expr::Run { terms, .. } => terms.iter().for_each(|t| walk(t, out)),
                Expr::Num(_) => {}
            }
        }
        walk(self, &mut out);
        out
    }
}

/// Result of evaluating the leftmost-innermost fully-numeric subexpression.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reduction {
    /// The whole expression with the site replaced by its value.
    pub expr: Expr,
    /// Render of the subexpression that was evaluated, e.g. `(-33 * -44)`.
    pub site: String,
    pub value: i128,
}

/// One reduction step: evaluate the leftmost-innermost run whose terms are
/// all literals. `None` when the expression is already a literal or contains
/// placeholders everywhere reduction would apply.
pub fn reduce_once(e: &Expr) -> Option<Reduction> {
    match e {
        Expr::Num(_) | Expr::Sym(_) => None,
        Expr::Run { terms, ops } => {
            for (k, t) in terms.iter().enumerate() {
                if let Some(r) = reduce_once(t) {
                    let mut nt = terms.clone();
                    nt[k] = r.expr;
                    return Some(Reduction {
                        expr: Expr::Run {
                            terms: nt,
                            ops: ops.clone(),
                        },
                        site: r.site,
                        value: r.value,
                    });
                }
            }
            let value = e.eval()?;
            Some(Reduction {
                expr: Expr::Num(value),
                site: e.render(),
                value,
            })
        }
    }
}

/// Structural differences between two expressions. Walks both in lockstep;
/// where arity or operators disagree the whole subtree is one site.
pub fn diff_sites(a: &Expr, b: &Expr) -> Vec<(Expr, Expr)> {
    let mut out = Vec::new();
    fn walk(a: &Expr, b: &Expr, out: &mut Vec<(Expr, Expr)>) {
        match (a, b) {
            (Expr::Run { terms: ta, ops: oa }, Expr::Run { terms: tb, ops: ob })
                if ta.len() == tb.len() && oa == ob =>
            {
                for (x, y) in ta.iter().zip(tb) {
                    walk(x, y, out);
                }
            }
            _ => {
                if a != b {
                    out.push((a.clone(), b.clone()));
                }
            }
        }
    }
    walk(a, b, &mut out);
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Num(i128),
    Sym(char),
    Op(Op),
    LPar,
    RPar,
}

fn tokenize(s: &str) -> Result<Vec<Tok>> {
    let mut toks = Vec::new();
    let bytes = s.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '(' => {
                toks.push(Tok::LPar);
                i += 1;
            }
            ')' => {
                toks.push(Tok::RPar);
                i += 1;
            }
            '+' => {
                toks.push(Tok::Op(Op::Add));
                i += 1;
            }
            '*' => {
                toks.push(Tok::Op(Op::Mul));
                i += 1;
            }
            '-' => {
                // A minus binds to the following digits as a sign when it
                // cannot be a binary operator here.
                let unary = matches!(toks.last(), None | Some(Tok::Op(_)) | Some(Tok::LPar));
                if unary && i + 1 < bytes.len() && bytes[i + 1].is_ascii_digit() {
                    let (n, next) = scan_number(s, i + 1)?;
                    toks.push(Tok::Num(-n));
                    i = next;
                } else {
                    toks.push(Tok::Op(Op::Sub));
                    i += 1;
                }
            }
            '0'..='9' => {
                let (n, next) = scan_number(s, i)?;
                toks.push(Tok::Num(n));
                i = next;
            }
            'A'..='Z' => {
                toks.push(Tok::Sym(c));
                i += 1;
            }
            other => {
                return Err(PipelineError::Parse(format!(
                    "unexpected character {other:?} in expression {s:?}"
                )))
            }
        }
    }
    Ok(toks)
}

fn scan_number(s: &str, start: usize) -> Result<(i128, usize)> {
    let bytes = s.as_bytes();
    let mut end = start;
    while end < bytes.len() && bytes[end].is_ascii_digit() {
        end += 1;
    }
    let n: i128 = s[start..end]
        .parse()
        .map_err(|_| PipelineError::Parse(format!("bad number in expression {s:?}")))?;
    Ok((n, end))
}

/// Parses an expression like `((7 - -1 + -1 + -4) - (-7 + 7 * 3 * -9))` or a
/// skeleton like `((A * B) - (C * D))`. Round-trips with [`Expr::render`].
pub fn parse_expr(s: &str) -> Result<Expr> {
    let toks = tokenize(s)?;
    let (e, used) = parse_run(&toks, 0, s)?;
    if used != toks.len() {
        return Err(PipelineError::Parse(format!(
            "trailing tokens in expression {s:?}"
        )));
    }
    Ok(e)
}

fn parse_run(toks: &[Tok], mut i: usize, src: &str) -> Result<(Expr, usize)> {
    let (first, next) = parse_atom(toks, i, src)?;
    i = next;
    let mut terms = vec![first];
    let mut ops = Vec::new();
    while let Some(Tok::Op(op)) = toks.get(i) {
        ops.push(*op);
        let (t, next) = parse_atom(toks, i + 1, src)?;
        terms.push(t);
        i = next;
    }
    if terms.len() == 1 {
        Ok((terms.pop().expect("nonempty"), i))
    } else {
        Ok((Expr::Run { terms, ops }, i))
    }
}

fn parse_atom(toks: &[Tok], i: usize, src: &str) -> Result<(Expr, usize)> {
    match toks.get(i) {
        Some(Tok::Num(n)) => Ok((Expr::Num(*n), i + 1)),
        Some(Tok::Sym(c)) => Ok((Expr::Sym(*c), i + 1)),
        Some(Tok::LPar) => {
            let (e, next) = parse_run(toks, i + 1, src)?;
            match toks.get(next) {
                Some(Tok::RPar) => Ok((e, next + 1)),
                _ => Err(PipelineError::Parse(format!(
                    "unbalanced parentheses in expression {src:?}"
                ))),
            }
        }
        _ => Err(PipelineError::Parse(format!(
            "expected a term in expression {src:?}"
        ))),
    }
}
