//! Gold rationales for multistep arithmetic, with optional corruption hooks.
//!
//! The canonical rationale names each innermost parenthesized group with a
//! letter, computes each letter through an explicit reduction chain
//! (multiplication runs nest first, then the +/- spine folds left to right),
//! and finally combines the letters through the skeleton:
//!
//! ```text
//! (1) This equation can be written as "(A - B)", where A = ... and B = ...
//! (2) Let's calculate A = (flat) = (nested) = ... = value.
//! ...
//! (k) Then, the final equation is (A - B) = (substituted) = ... = value.
//! (Final response) So the answer is value.
//! ```
//!
//! Corruption hooks produce *consistent* wrong attempts: a perturbed value
//! or flipped operator propagates through every later link and step, so the
//! first broken transition in the whole attempt is exactly the injected one.

use std::collections::BTreeMap;

use crate::error::{PipelineError, Result};
use crate::expr::{Expr, Op};
use crate::feedback::{DefectMark, ErrorKind};
use crate::parse::{parse_attempt, parse_attempt_strict};
use crate::step::{Attempt, StepLabel};
use crate::task::{TaskInstance, TaskKind};

pub const ARITH_PREAMBLE: &str = "Let's think step by step. Recall that the order of operations \
in mathematics is as follows: (1) Parentheses, (2) exponents, (3) multiplication and division \
(from left to right), (4) addition and multiplication (from left to right). So, remember to \
always compute the expressions inside parentheses or brackets first.";

/// Which equation chain a tweak applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainId {
    /// The i-th letter step (0-based).
    Letter(usize),
    /// The final-equation step.
    Final,
}

/// Perturb the value produced by the n-th reduction of a chain.
#[derive(Debug, Clone, Copy)]
pub struct CalcTweak {
    pub chain: ChainId,
    pub reduction_idx: usize,
    pub delta: i128,
}

/// Flip one operator (pre-order index) when copying the chain's nested form
/// into the next link.
#[derive(Debug, Clone, Copy)]
pub struct CopyTweak {
    pub chain: ChainId,
    pub op_index: usize,
    pub new_op: Op,
}

/// Replace one operand inside a letter definition of step (1).
#[derive(Debug, Clone, Copy)]
pub struct DecompTweak {
    pub letter_idx: usize,
    pub term_idx: usize,
    pub new_value: i128,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ArithHooks {
    pub calc_tweak: Option<CalcTweak>,
    pub copy_tweak: Option<CopyTweak>,
    pub decomp_tweak: Option<DecompTweak>,
    /// Replace the final response's answer without touching the steps.
    pub final_override: Option<i128>,
}

impl ArithHooks {
    pub fn is_clean(&self) -> bool {
        self.calc_tweak.is_none()
            && self.copy_tweak.is_none()
            && self.decomp_tweak.is_none()
            && self.final_override.is_none()
    }
}

#[derive(Debug, Clone)]
pub struct ArithBuild {
    pub attempt: Attempt,
    pub marks: Vec<DefectMark>,
}

/// The clean gold rationale.
pub fn gold_rationale_arithmetic(inst: &TaskInstance) -> Result<Attempt> {
    let b = build_arith_attempt(inst, &ArithHooks::default())?;
    // Gold output must satisfy the strict parse contract.
    parse_attempt_strict(TaskKind::MultistepArithmetic, &b.attempt.text)
}

/// Builds a rationale, applying any corruption hooks consistently.
pub fn build_arith_attempt(inst: &TaskInstance, hooks: &ArithHooks) -> Result<ArithBuild> {
    let expr = inst.arithmetic_expression()?;
    let (skeleton, mut groups) = decompose(&expr);
    if groups.is_empty() || groups.len() > 26 {
        return Err(PipelineError::Parameter(format!(
            "expression does not decompose into letter groups: {}",
            expr.render()
        )));
    }
    let letters: Vec<char> = (0..groups.len()).map(|i| (b'A' + i as u8) as char).collect();
    let mut marks: Vec<DefectMark> = Vec::new();

    if let Some(dt) = &hooks.decomp_tweak {
        apply_decomp_tweak(&mut groups, dt)?;
        marks.push(DefectMark {
            label: StepLabel::new("1"),
            kind: ErrorKind::Decomposition,
        });
    }

    let mut lines: Vec<String> = vec![ARITH_PREAMBLE.to_string()];
    lines.push(format!(
        "(1) This equation can be written as \"{}\", where {}.",
        skeleton.render(),
        render_defs(&letters, &groups)
    ));

    let mut claimed: BTreeMap<char, i128> = BTreeMap::new();
    for (i, g) in groups.iter().enumerate() {
        let label = StepLabel::new((i + 2).to_string());
        let mut links = vec![g.render()];
        let nested = nested_form(g)?;
        if nested.render() != links[0] {
            links.push(nested.render());
        }
        let calc = chain_tweak(hooks.calc_tweak, ChainId::Letter(i));
        let copy = copy_tweak(hooks.copy_tweak, ChainId::Letter(i));
        let (chain_links, value, tweaked) = reduce_chain(nested, calc, copy)?;
        links.extend(chain_links);
        if let Some(kind) = tweaked {
            marks.push(DefectMark {
                label: label.clone(),
                kind,
            });
        }
        claimed.insert(letters[i], value);
        lines.push(format!(
            "({}) Let's calculate {} = {}.",
            i + 2,
            letters[i],
            links.join(" = ")
        ));
    }

    let final_label = StepLabel::new((groups.len() + 2).to_string());
    let substituted = skeleton
        .substitute(&claimed)
        .expect("all letters have claimed values");
    let mut links = vec![skeleton.render()];
    if substituted.render() != links[0] {
        links.push(substituted.render());
    }
    let calc = chain_tweak(hooks.calc_tweak, ChainId::Final);
    let copy = copy_tweak(hooks.copy_tweak, ChainId::Final);
    let (chain_links, combined, tweaked) = reduce_chain(substituted, calc, copy)?;
    links.extend(chain_links);
    if let Some(kind) = tweaked {
        marks.push(DefectMark {
            label: final_label.clone(),
            kind,
        });
    }
    lines.push(format!(
        "({}) Then, the final equation is {}.",
        groups.len() + 2,
        links.join(" = ")
    ));

    let answer = match hooks.final_override {
        Some(v) => {
            marks.push(DefectMark {
                label: StepLabel::final_response(),
                kind: ErrorKind::FinalInconsistent,
            });
            v
        }
        None => combined,
    };
    lines.push(format!("(Final response) So the answer is {answer}."));

    marks.sort_by(|a, b| a.label.document_cmp(&b.label));
    let text = lines.join("\n");
    let attempt = parse_attempt(TaskKind::MultistepArithmetic, &text)?;
    Ok(ArithBuild { attempt, marks })
}

fn chain_tweak(t: Option<CalcTweak>, chain: ChainId) -> Option<(usize, i128)> {
    t.filter(|t| t.chain == chain)
        .map(|t| (t.reduction_idx, t.delta))
}

fn copy_tweak(t: Option<CopyTweak>, chain: ChainId) -> Option<(usize, Op)> {
    t.filter(|t| t.chain == chain).map(|t| (t.op_index, t.new_op))
}

fn render_defs(letters: &[char], groups: &[Expr]) -> String {
    let defs: Vec<String> = letters
        .iter()
        .zip(groups)
        .map(|(c, g)| format!("{c} = {}", g.render()))
        .collect();
    match defs.len() {
        1 => defs[0].clone(),
        n => format!("{} and {}", defs[..n - 1].join(", "), defs[n - 1]),
    }
}

/// Splits an expression into its skeleton (innermost all-literal groups
/// replaced by letters, in left-to-right order) and the groups themselves.
pub fn decompose(expr: &Expr) -> (Expr, Vec<Expr>) {
    fn walk(e: &Expr, groups: &mut Vec<Expr>) -> Expr {
        match e {
            Expr::Run { terms, ops } => {
                if terms.iter().all(Expr::is_num) {
                    let letter = (b'A' + groups.len() as u8) as char;
                    groups.push(e.clone());
                    Expr::Sym(letter)
                } else {
                    Expr::Run {
                        terms: terms.iter().map(|t| walk(t, groups)).collect(),
                        ops: ops.clone(),
                    }
                }
            }
            other => other.clone(),
        }
    }
    let mut groups = Vec::new();
    let skeleton = walk(expr, &mut groups);
    (skeleton, groups)
}

/// The fully-nested form of a flat run: multiplication runs fold first
/// (left-nested), then the +/- spine folds left-nested.
pub fn nested_form(flat: &Expr) -> Result<Expr> {
    let Expr::Run { terms, ops } = flat else {
        return Ok(flat.clone());
    };
    let mut factors: Vec<Expr> = vec![terms[0].clone()];
    let mut spine: Vec<Op> = Vec::new();
    for (op, t) in ops.iter().zip(&terms[1..]) {
        if *op == Op::Mul {
            let last = factors.pop().expect("nonempty");
            factors.push(Expr::bin(last, Op::Mul, t.clone()));
        } else {
            spine.push(*op);
            factors.push(t.clone());
        }
    }
    let mut acc = factors[0].clone();
    for (op, t) in spine.iter().zip(&factors[1..]) {
        acc = Expr::bin(acc, *op, t.clone());
    }
    Ok(acc)
}

/// Reduces `e` to a literal, emitting one link per step. `calc` corrupts the
/// value of the n-th reduction; `copy` flips an operator before the first
/// reduction. Returns the links (excluding `e` itself), the chain's claimed
/// final value, and the kind of tweak applied, if any.
fn reduce_chain(
    mut e: Expr,
    calc: Option<(usize, i128)>,
    copy: Option<(usize, Op)>,
) -> Result<(Vec<String>, i128, Option<ErrorKind>)> {
    let mut links = Vec::new();
    let mut applied = None;
    let mut k = 0usize;

    if let Some((op_index, new_op)) = copy {
        let (flipped, changed) = flip_op(&e, op_index, new_op);
        if !changed {
            return Err(PipelineError::Parameter(format!(
                "copy tweak did not change the expression {}",
                e.render()
            )));
        }
        // A mark means "this step states a falsehood". Flips like
        // (2 + 2) -> (2 * 2) rewrite the text without breaking the claimed
        // equality, so the chain stays valid and earns no mark.
        let preserves_value = flipped.eval() == e.eval();
        e = flipped;
        links.push(e.render());
        if !preserves_value {
            applied = Some(ErrorKind::Copy);
        }
        k += 1;
    }

    loop {
        if e.is_num() {
            break;
        }
        // Reduction indices count the links produced after the nested form;
        // the copy link, if any, shifted them by one (matching what the
        // caller sees in the rendered chain).
        let delta = calc.and_then(|(idx, d)| (idx == k).then_some(d));
        let next = reduce_once_override(&e, delta).ok_or_else(|| {
            PipelineError::Parameter(format!("expression {} cannot reduce", e.render()))
        })?;
        // Like the copy case above: if the corrupted site is annihilated
        // (e.g. multiplied by zero) the stated equality stays true and the
        // chain carries no falsehood.
        if delta.is_some() && next.eval() != e.eval() {
            applied = Some(ErrorKind::Calculation);
        }
        links.push(next.render());
        e = next;
        k += 1;
    }
    let value = e.as_num().expect("loop ends on a literal");
    Ok((links, value, applied))
}

/// One leftmost-innermost reduction, writing `true value + delta` at the
/// reduction site when a corruption is requested. Applying the override
/// inside the traversal guarantees it lands on the reduced site itself even
/// when an earlier literal happens to carry the same value.
fn reduce_once_override(e: &Expr, delta: Option<i128>) -> Option<Expr> {
    match e {
        Expr::Num(_) | Expr::Sym(_) => None,
        Expr::Run { terms, ops } => {
            for (k, t) in terms.iter().enumerate() {
                if let Some(sub) = reduce_once_override(t, delta) {
                    let mut nt = terms.clone();
                    nt[k] = sub;
                    return Some(Expr::Run {
                        terms: nt,
                        ops: ops.clone(),
                    });
                }
            }
            let v = e.eval()?;
            Some(Expr::Num(v + delta.unwrap_or(0)))
        }
    }
}

/// Flips the operator with the given pre-order index. Returns the new
/// expression and whether anything changed.
pub fn flip_op(e: &Expr, target: usize, new_op: Op) -> (Expr, bool) {
    fn walk(e: &Expr, target: usize, new_op: Op, seen: &mut usize, changed: &mut bool) -> Expr {
        match e {
            Expr::Run { terms, ops } => {
                let mut new_ops = Vec::with_capacity(ops.len());
                for op in ops {
                    if *seen == target {
                        if *op != new_op {
                            *changed = true;
                        }
                        new_ops.push(new_op);
                    } else {
                        new_ops.push(*op);
                    }
                    *seen += 1;
                }
                Expr::Run {
                    terms: terms
                        .iter()
                        .map(|t| walk(t, target, new_op, seen, changed))
                        .collect(),
                    ops: new_ops,
                }
            }
            other => other.clone(),
        }
    }
    let mut seen = 0;
    let mut changed = false;
    let out = walk(e, target, new_op, &mut seen, &mut changed);
    (out, changed)
}

/// Number of operators in an expression (pre-order flip targets).
pub fn count_ops(e: &Expr) -> usize {
    match e {
        Expr::Run { terms, ops } => {
            ops.len() + terms.iter().map(count_ops).sum::<usize>()
        }
        _ => 0,
    }
}

fn apply_decomp_tweak(groups: &mut [Expr], dt: &DecompTweak) -> Result<()> {
    let g = groups.get_mut(dt.letter_idx).ok_or_else(|| {
        PipelineError::Parameter(format!("no letter group {}", dt.letter_idx))
    })?;
    let Expr::Run { terms, .. } = g else {
        return Err(PipelineError::Parameter("group is not a run".into()));
    };
    let t = terms.get_mut(dt.term_idx).ok_or_else(|| {
        PipelineError::Parameter(format!("no term {} in group", dt.term_idx))
    })?;
    if *t == Expr::Num(dt.new_value) {
        return Err(PipelineError::Parameter(
            "decomposition tweak does not change the term".into(),
        ));
    }
    *t = Expr::Num(dt.new_value);
    Ok(())
}
