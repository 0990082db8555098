//! Rule-based feedback for multistep arithmetic attempts.
//!
//! Walks the attempt in document order and returns the earliest
//! inconsistency as non-terminal feedback: a decomposition that does not
//! match the question, a chain link that copies or computes wrongly, a final
//! equation that disagrees with the claimed letter values, or a final answer
//! inconsistent with the final equation. An attempt that passes every check
//! and states the gold answer gets terminal feedback.
//!
//! Every check compares a step against the *claimed* state of earlier steps,
//! so the located error is the first place the attempt disagrees with
//! itself or the question, not merely the first wrong number.

use std::collections::BTreeMap;

use crate::chain::analyze_links;
use crate::error::Result;
use crate::expr::{diff_sites, parse_expr, Expr};
use crate::feedback::{nonterminal_feedback, terminal_feedback, ErrorKind, Feedback};
use crate::step::{Attempt, LinkSpan, Payload, Step, StepLabel};
use crate::task::TaskInstance;

#[derive(Default)]
struct Ctx {
    skeleton_text: Option<String>,
    skeleton: Option<Expr>,
    /// Validated letter definitions from step (1).
    defs: BTreeMap<char, Expr>,
    /// Claimed value of each letter chain.
    claimed: BTreeMap<char, i128>,
    /// Claimed result of the final equation and its step label.
    final_value: Option<(i128, StepLabel)>,
    answered: bool,
}

/// Checks an arithmetic attempt against its instance.
pub fn check_arithmetic(inst: &TaskInstance, attempt: &Attempt) -> Result<Feedback> {
    let question = inst.arithmetic_expression()?;
    let mut ctx = Ctx::default();
    for step in &attempt.steps {
        if let Some(fb) = check_step(inst, attempt, &question, step, &mut ctx) {
            return Ok(fb);
        }
    }
    if !ctx.answered {
        let last = attempt.steps.last().expect("attempt has steps");
        return Ok(nonterminal_feedback(
            attempt,
            last.label.clone(),
            first_line(last),
            ErrorKind::FinalInconsistent,
            "the response does not state a final answer".into(),
        ));
    }
    Ok(terminal_feedback(attempt))
}

fn check_step(
    inst: &TaskInstance,
    attempt: &Attempt,
    question: &Expr,
    step: &Step,
    ctx: &mut Ctx,
) -> Option<Feedback> {
    let fail = |segment: String, kind: ErrorKind, reason: String| {
        Some(nonterminal_feedback(
            attempt,
            step.label.clone(),
            segment,
            kind,
            reason,
        ))
    };
    match &step.payload {
        Payload::Decomposition { skeleton, defs } => {
            let decomp_fail = |segment: String, detail: String| {
                fail(
                    segment,
                    ErrorKind::Decomposition,
                    format!("the decomposition is inconsistent with the question{detail}"),
                )
            };
            let quoted = format!("\"{skeleton}\"");
            let Ok(skel) = parse_expr(skeleton) else {
                return decomp_fail(quoted, String::new());
            };
            let mut expected = BTreeMap::new();
            if !match_structure(&skel, question, &mut expected) {
                return decomp_fail(quoted, String::new());
            }
            for def in defs {
                let Some(exp) = expected.get(&def.letter) else {
                    return decomp_fail(
                        def.raw.clone(),
                        format!(", since {} does not appear in the skeleton", def.letter),
                    );
                };
                let matches = parse_expr(&def.expr_text).map_or(false, |got| &got == exp);
                if !matches {
                    return decomp_fail(
                        def.raw.clone(),
                        format!(", since {} should be {}", def.letter, exp.render()),
                    );
                }
            }
            for sym in skel.symbols() {
                if !defs.iter().any(|d| d.letter == sym) {
                    return decomp_fail(quoted, format!(", since {sym} is not defined"));
                }
            }
            ctx.skeleton_text = Some(skeleton.clone());
            ctx.skeleton = Some(skel);
            ctx.defs = defs
                .iter()
                .filter_map(|d| parse_expr(&d.expr_text).ok().map(|e| (d.letter, e)))
                .collect();
            None
        }
        Payload::Chain {
            lead: Some(c),
            links,
        } => {
            if let (Some(def), Ok(first)) = (ctx.defs.get(c), parse_expr(&links[0].text)) {
                if &first != def {
                    return fail(
                        links[0].text.clone(),
                        ErrorKind::Copy,
                        format!(
                            "there is a copy error, since {} should be {}",
                            links[0].text,
                            def.render()
                        ),
                    );
                }
            }
            let analysis = analyze_links(&step.raw_text, links);
            if let Some(bad) = analysis.bad {
                return fail(bad.segment, bad.kind, bad.reason);
            }
            if let Some(v) = analysis.last_value {
                ctx.claimed.insert(*c, v);
            }
            None
        }
        Payload::Chain { lead: None, links } => {
            if let Some(st) = &ctx.skeleton_text {
                let same = match (parse_expr(st), parse_expr(&links[0].text)) {
                    (Ok(a), Ok(b)) => a == b,
                    _ => st == &links[0].text,
                };
                if !same {
                    return fail(
                        links[0].text.clone(),
                        ErrorKind::Copy,
                        format!(
                            "there is a copy error, since {} should be {st}",
                            links[0].text
                        ),
                    );
                }
            }
            if links.len() >= 2 {
                if let Some(fb) = check_substitution(attempt, step, links, ctx) {
                    return Some(fb);
                }
            }
            let analysis = analyze_links(&step.raw_text, &links[1..]);
            if let Some(bad) = analysis.bad {
                return fail(bad.segment, bad.kind, bad.reason);
            }
            ctx.final_value = analysis.last_value.map(|v| (v, step.label.clone()));
            None
        }
        Payload::Final { answer, claim } => {
            let Some(ans) = answer else {
                return fail(
                    first_line(step),
                    ErrorKind::FinalInconsistent,
                    "the final response does not state an answer".into(),
                );
            };
            ctx.answered = true;
            let segment = claim.clone().unwrap_or_else(|| first_line(step));
            let ans_num: Option<i128> = ans.parse().ok();
            if let Some((v, vl)) = &ctx.final_value {
                if ans_num != Some(*v) {
                    return fail(
                        segment,
                        ErrorKind::FinalInconsistent,
                        format!(
                            "{ans} is inconsistent with the result \"{v}\" in step {}",
                            vl.render()
                        ),
                    );
                }
            }
            if ans_num != inst.gold_answer.parse().ok() {
                return fail(
                    segment,
                    ErrorKind::FinalInconsistent,
                    format!("the answer {ans} is incorrect"),
                );
            }
            None
        }
        _ => fail(
            first_line(step),
            ErrorKind::Decomposition,
            "the response does not follow the step-by-step format".into(),
        ),
    }
}

/// The substituted link of the final equation must equal the skeleton with
/// every claimed letter value written in.
fn check_substitution(
    attempt: &Attempt,
    step: &Step,
    links: &[LinkSpan],
    ctx: &Ctx,
) -> Option<Feedback> {
    let skel = ctx.skeleton.as_ref()?;
    let expected = skel.substitute(&ctx.claimed)?;
    let got = parse_expr(&links[1].text).ok()?;
    if got == expected {
        return None;
    }
    let diffs = diff_sites(&expected, &got);
    let reason = if diffs.len() == 1 {
        format!(
            "there is a copy error, since {} should be {}",
            diffs[0].1.render(),
            diffs[0].0.render()
        )
    } else {
        format!(
            "there is a copy error, since {} should be {}",
            links[1].text,
            expected.render()
        )
    };
    Some(nonterminal_feedback(
        attempt,
        step.label.clone(),
        step.raw_text[links[0].start..links[1].end].to_string(),
        ErrorKind::Copy,
        reason,
    ))
}

/// Matches a claimed skeleton against the question, binding each letter to
/// the question subtree it stands for. Letters may bind any subtree, but
/// literal parts must agree exactly.
fn match_structure(skel: &Expr, q: &Expr, map: &mut BTreeMap<char, Expr>) -> bool {
    match (skel, q) {
        (Expr::Sym(c), sub) => match map.get(c) {
            Some(prev) => prev == sub,
            None => {
                map.insert(*c, sub.clone());
                true
            }
        },
        (Expr::Num(a), Expr::Num(b)) => a == b,
        (
            Expr::Run { terms: ts, ops: os },
            Expr::Run { terms: tq, ops: oq },
        ) => {
            os == oq
                && ts.len() == tq.len()
                && ts.iter().zip(tq).all(|(s, t)| match_structure(s, t, map))
        }
        _ => false,
    }
}

fn first_line(step: &Step) -> String {
    step.content().lines().next().unwrap_or("").trim().to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith_gold::{
        build_arith_attempt, ArithHooks, CalcTweak, ChainId, CopyTweak, DecompTweak,
    };
    use crate::expr::Op;
    use crate::feedback::scripted_feedback;
    use crate::parse::parse_attempt;
    use crate::task::{Split, SubtaskParams, TaskKind};

    fn instance(question: &str, gold: &str) -> TaskInstance {
        TaskInstance {
            id: "t".into(),
            kind: TaskKind::MultistepArithmetic,
            params: SubtaskParams::with_depth(4, 2),
            question: format!("Q: {question} ="),
            gold_answer: gold.into(),
            split: Split::Seen,
        }
    }

    fn check_text(inst: &TaskInstance, text: &str) -> Feedback {
        let a = parse_attempt(TaskKind::MultistepArithmetic, text).unwrap();
        check_arithmetic(inst, &a).unwrap()
    }

    const Q: &str = "((7 - -1 + -1 + -4) - (-7 + 7 * 3 * -9))";

    #[test]
    fn gold_rationale_is_terminal() {
        let inst = instance(Q, "199");
        let a = crate::arith_gold::gold_rationale_arithmetic(&inst).unwrap();
        let fb = check_arithmetic(&inst, &a).unwrap();
        assert!(fb.terminal);
        assert_eq!(
            fb.rendered,
            "Step 1 to step 4 is correct, and the final response is also correct."
        );
    }

    #[test]
    fn every_hook_is_located_at_its_mark() {
        let inst = instance(Q, "199");
        let hooked: Vec<ArithHooks> = vec![
            ArithHooks {
                calc_tweak: Some(CalcTweak {
                    chain: ChainId::Letter(1),
                    reduction_idx: 1,
                    delta: 10,
                }),
                ..Default::default()
            },
            ArithHooks {
                copy_tweak: Some(CopyTweak {
                    chain: ChainId::Letter(0),
                    op_index: 1,
                    new_op: Op::Mul,
                }),
                ..Default::default()
            },
            ArithHooks {
                decomp_tweak: Some(DecompTweak {
                    letter_idx: 0,
                    term_idx: 0,
                    new_value: 9,
                }),
                ..Default::default()
            },
            ArithHooks {
                final_override: Some(-140),
                ..Default::default()
            },
        ];
        for hooks in hooked {
            let b = build_arith_attempt(&inst, &hooks).unwrap();
            let fb = scripted_feedback(&inst, &b.attempt).unwrap();
            assert!(!fb.terminal);
            assert_eq!(fb.error_step.as_ref(), Some(&b.marks[0].label), "{hooks:?}");
            assert_eq!(fb.reason_kind, Some(b.marks[0].kind), "{hooks:?}");
            // The quoted segment is verbatim text of the named step.
            let idx = b.attempt.position_of(&b.marks[0].label).unwrap();
            assert!(b.attempt.steps[idx].raw_text.contains(&fb.error_segment));
        }
    }

    #[test]
    fn calc_tweak_reason_names_the_bad_reduction() {
        let inst = instance(Q, "199");
        let hooks = ArithHooks {
            calc_tweak: Some(CalcTweak {
                chain: ChainId::Letter(1),
                reduction_idx: 1,
                delta: 10,
            }),
            ..Default::default()
        };
        let b = build_arith_attempt(&inst, &hooks).unwrap();
        let fb = check_arithmetic(&inst, &b.attempt).unwrap();
        assert_eq!(
            fb.reason_text,
            "there is a calculation error, since (21 * -9) should be -189"
        );
        assert_eq!(fb.error_segment, "(-7 + (21 * -9)) = (-7 + -179)");
        assert_eq!(
            fb.rendered,
            "Step (1) to step (2) are correct. In step (3) the part \
             \"(-7 + (21 * -9)) = (-7 + -179)\" is incorrect. This is because \
             there is a calculation error, since (21 * -9) should be -189."
        );
    }

    #[test]
    fn final_override_reason_cites_the_final_equation() {
        let inst = instance(Q, "199");
        let hooks = ArithHooks {
            final_override: Some(-140),
            ..Default::default()
        };
        let b = build_arith_attempt(&inst, &hooks).unwrap();
        let fb = check_arithmetic(&inst, &b.attempt).unwrap();
        assert_eq!(fb.error_segment, "the answer is -140");
        assert_eq!(
            fb.reason_text,
            "-140 is inconsistent with the result \"199\" in step (4)"
        );
        assert_eq!(fb.reason_kind, Some(ErrorKind::FinalInconsistent));
    }

    #[test]
    fn decomposition_mismatch_names_the_letter() {
        let inst = instance(Q, "199");
        let text = "Let's think step by step.\n\
            (1) This equation can be written as \"(A - B)\", where A = (9 - -1 + -1 + -4) and B = (-7 + 7 * 3 * -9).\n\
            (Final response) So the answer is 199.";
        let fb = check_text(&inst, text);
        assert_eq!(fb.error_step, Some(StepLabel::new("1")));
        assert_eq!(fb.error_segment, "A = (9 - -1 + -1 + -4)");
        assert_eq!(
            fb.reason_text,
            "the decomposition is inconsistent with the question, since A should be (7 - -1 + -1 + -4)"
        );
        assert_eq!(fb.reason_kind, Some(ErrorKind::Decomposition));
    }

    #[test]
    fn definition_copied_wrongly_into_a_letter_step() {
        let inst = instance(Q, "199");
        let text = "Let's think step by step.\n\
            (1) This equation can be written as \"(A - B)\", where A = (7 - -1 + -1 + -4) and B = (-7 + 7 * 3 * -9).\n\
            (2) Let's calculate A = (7 + -1 + -1 + -4) = 1.\n\
            (Final response) So the answer is 199.";
        let fb = check_text(&inst, text);
        assert_eq!(fb.error_step, Some(StepLabel::new("2")));
        assert_eq!(fb.error_segment, "(7 + -1 + -1 + -4)");
        assert_eq!(
            fb.reason_text,
            "there is a copy error, since (7 + -1 + -1 + -4) should be (7 - -1 + -1 + -4)"
        );
    }

    #[test]
    fn wrong_substitution_in_the_final_equation() {
        let inst = instance("((1 + 1) + (2 + 3))", "7");
        let text = "Let's think step by step.\n\
            (1) This equation can be written as \"(A + B)\", where A = (1 + 1) and B = (2 + 3).\n\
            (2) Let's calculate A = (1 + 1) = 2.\n\
            (3) Let's calculate B = (2 + 3) = 5.\n\
            (4) Then, the final equation is (A + B) = (2 + 4) = 6.\n\
            (Final response) So the answer is 6.";
        let fb = check_text(&inst, text);
        assert_eq!(fb.error_step, Some(StepLabel::new("4")));
        assert_eq!(fb.error_segment, "(A + B) = (2 + 4)");
        assert_eq!(fb.reason_text, "there is a copy error, since 4 should be 5");
    }

    #[test]
    fn skeleton_copied_wrongly_into_the_final_equation() {
        let inst = instance("((1 + 1) + (2 + 3))", "7");
        let text = "Let's think step by step.\n\
            (1) This equation can be written as \"(A + B)\", where A = (1 + 1) and B = (2 + 3).\n\
            (2) Let's calculate A = (1 + 1) = 2.\n\
            (3) Let's calculate B = (2 + 3) = 5.\n\
            (4) Then, the final equation is (A - B) = (2 - 5) = -3.\n\
            (Final response) So the answer is -3.";
        let fb = check_text(&inst, text);
        assert_eq!(fb.error_step, Some(StepLabel::new("4")));
        assert_eq!(fb.error_segment, "(A - B)");
        assert_eq!(
            fb.reason_text,
            "there is a copy error, since (A - B) should be (A + B)"
        );
    }

    #[test]
    fn missing_final_response_is_flagged_at_the_last_step() {
        let inst = instance("((1 + 1) + (2 + 3))", "7");
        let text = "(1) This equation can be written as \"(A + B)\", where A = (1 + 1) and B = (2 + 3).\n\
            (2) Let's calculate A = (1 + 1) = 2.";
        let fb = check_text(&inst, text);
        assert!(!fb.terminal);
        assert_eq!(fb.error_step, Some(StepLabel::new("2")));
        assert_eq!(
            fb.reason_text,
            "the response does not state a final answer"
        );
    }

    #[test]
    fn consistent_but_wrong_attempt_fails_at_the_first_bad_link() {
        // The classic single-reduction slip: the located segment and reason
        // quote the offending transition verbatim.
        let inst = instance(Q, "199");
        let text = "Let's think step by step.\n\
            (1) This equation can be written as \"(A - B)\", where A = (7 - -1 + -1 + -4) and B = (-7 + 7 * 3 * -9).\n\
            (2) Let's calculate A = (7 - -1 + -1 + -4) = (((7 - -1) + -1) + -4) = ((6 + -1) + -4) = (5 + -4) = 1.\n\
            (3) Let's calculate B = (-7 + 7 * 3 * -9) = (-7 + ((7 * 3) * -9)) = (-7 + (21 * -9)) = (-7 + -189) = -196.\n\
            (4) Then, the final equation is (A - B) = (1 - -196) = 197.\n\
            (Final response) So the answer is 197.";
        let fb = check_text(&inst, text);
        assert_eq!(fb.error_step, Some(StepLabel::new("2")));
        assert_eq!(
            fb.reason_text,
            "there is a calculation error, since (7 - -1) should be 8"
        );
        assert_eq!(fb.error_segment, "(((7 - -1) + -1) + -4) = ((6 + -1) + -4)");
    }
}
