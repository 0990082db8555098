//! Scripted improvement: regenerate an attempt from the located error on.
//!
//! Given non-terminal feedback, the improver keeps every step before the
//! named error verbatim and replaces the rest with the reference rationale's
//! continuation. This only makes sense when the kept prefix actually agrees
//! with the reference; if it does not (for example the feedback located the
//! error too late), the improvement is reported as impossible rather than
//! splicing together an inconsistent attempt.

use crate::arith_gold::gold_rationale_arithmetic;
use crate::error::{PipelineError, Result};
use crate::feedback::{scripted_feedback, Feedback};
use crate::sort_gold::gold_rationale_wordsort;
use crate::step::Attempt;
use crate::task::{TaskInstance, TaskKind};

/// The reference rationale used for repairs.
pub fn gold_rationale(inst: &TaskInstance) -> Result<Attempt> {
    match inst.kind {
        TaskKind::MultistepArithmetic => gold_rationale_arithmetic(inst),
        TaskKind::WordSorting => gold_rationale_wordsort(inst),
        other => Err(PipelineError::Kind {
            expected: "a scriptable task",
            got: other.name().into(),
        }),
    }
}

/// Repairs `prev` according to `fb`: steps before the error are kept
/// byte-for-byte, the remainder is regenerated.
pub fn scripted_improve(inst: &TaskInstance, prev: &Attempt, fb: &Feedback) -> Result<Attempt> {
    if fb.terminal {
        return Err(PipelineError::Parameter(
            "terminal feedback leaves nothing to improve".into(),
        ));
    }
    let error_step = fb.error_step.as_ref().ok_or_else(|| {
        PipelineError::Parameter("non-terminal feedback has no error step".into())
    })?;
    let gold = gold_rationale(inst)?;
    let idx = prev.position_of(error_step).ok_or_else(|| {
        PipelineError::ImprovementImpossible(format!(
            "the attempt has no step {}",
            error_step.render()
        ))
    })?;
    if idx == 0 {
        return Ok(gold);
    }
    if gold.steps.len() < idx {
        return Err(PipelineError::ImprovementImpossible(format!(
            "the reference rationale is shorter than the kept prefix ({idx} steps)"
        )));
    }
    let steps = prev.steps[..idx]
        .iter()
        .chain(&gold.steps[idx..])
        .cloned()
        .collect();
    let candidate = Attempt::from_parts(prev.preamble.clone(), steps);
    // A step the feedback declared correct may still differ textually from
    // the reference (a true statement has more than one phrasing), so prefix
    // agreement is judged semantically: the spliced attempt must itself pass
    // the task checker. A prefix hiding a real error fails that check and
    // the improvement is refused rather than compounded.
    match scripted_feedback(inst, &candidate) {
        Ok(v) if v.terminal => Ok(candidate),
        Ok(v) => Err(PipelineError::ImprovementImpossible(format!(
            "the kept prefix still contains an error at step {}",
            v.error_step
                .map(|s| s.render())
                .unwrap_or_else(|| "?".into())
        ))),
        Err(e) => Err(PipelineError::ImprovementImpossible(format!(
            "the spliced attempt cannot be verified: {e}"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith_gold::{build_arith_attempt, ArithHooks, CalcTweak, ChainId, DecompTweak};
    use crate::feedback::scripted_feedback;
    use crate::sort_gold::{build_wordsort_attempt, KeyOverride, SortHooks};
    use crate::step::StepLabel;
    use crate::task::{Split, SubtaskParams};

    fn arith_instance() -> TaskInstance {
        TaskInstance {
            id: "t".into(),
            kind: TaskKind::MultistepArithmetic,
            params: SubtaskParams::with_depth(4, 2),
            question: "Q: ((7 - -1 + -1 + -4) - (-7 + 7 * 3 * -9)) =".into(),
            gold_answer: "199".into(),
            split: Split::Seen,
        }
    }

    fn sort_instance() -> TaskInstance {
        let words = ["cosh", "inferno", "every", "foyer", "coterie", "mcfadden", "halifax"];
        let mut sorted = words.to_vec();
        sorted.sort_unstable();
        TaskInstance {
            id: "t".into(),
            kind: TaskKind::WordSorting,
            params: SubtaskParams::new(7),
            question: format!(
                "Q: Sort the following words alphabetically:\nList: {}",
                words.join(" ")
            ),
            gold_answer: sorted.join(" "),
            split: Split::Seen,
        }
    }

    #[test]
    fn repair_keeps_the_prefix_and_lands_on_gold() {
        let inst = arith_instance();
        let hooks = ArithHooks {
            calc_tweak: Some(CalcTweak {
                chain: ChainId::Letter(1),
                reduction_idx: 1,
                delta: 10,
            }),
            ..Default::default()
        };
        let b = build_arith_attempt(&inst, &hooks).unwrap();
        let fb = scripted_feedback(&inst, &b.attempt).unwrap();
        let improved = scripted_improve(&inst, &b.attempt, &fb).unwrap();
        let gold = gold_rationale(&inst).unwrap();
        assert_eq!(improved.text, gold.text);
        // The prefix really was kept, not regenerated from scratch.
        assert_eq!(improved.steps[0].raw_text, b.attempt.steps[0].raw_text);
        assert_eq!(improved.steps[1].raw_text, b.attempt.steps[1].raw_text);
        assert!(scripted_feedback(&inst, &improved).unwrap().terminal);
    }

    #[test]
    fn error_in_the_first_step_regenerates_everything() {
        let inst = arith_instance();
        let hooks = ArithHooks {
            decomp_tweak: Some(DecompTweak {
                letter_idx: 0,
                term_idx: 0,
                new_value: 9,
            }),
            ..Default::default()
        };
        let b = build_arith_attempt(&inst, &hooks).unwrap();
        let fb = scripted_feedback(&inst, &b.attempt).unwrap();
        assert_eq!(fb.error_step, Some(StepLabel::new("1")));
        let improved = scripted_improve(&inst, &b.attempt, &fb).unwrap();
        assert_eq!(improved.text, gold_rationale(&inst).unwrap().text);
    }

    #[test]
    fn sorting_repair_regenerates_the_block_continuation() {
        let inst = sort_instance();
        let hooks = SortHooks {
            key_override: Some(KeyOverride {
                word: "coterie".into(),
                position: 3,
                letter: 'c',
            }),
            ..Default::default()
        };
        let b = build_wordsort_attempt(&inst, &hooks).unwrap();
        let fb = scripted_feedback(&inst, &b.attempt).unwrap();
        assert_eq!(fb.error_step, Some(StepLabel::new("3.2")));
        let improved = scripted_improve(&inst, &b.attempt, &fb).unwrap();
        let lines: Vec<&str> = improved.text.lines().collect();
        assert_eq!(
            lines[5],
            "(3.2) Now sort this subpart [\"cosh\" ? \"coterie\"] by looking at their third \
             letters: \"cosh\"=\"s\" (19), \"coterie\"=\"t\" (20)."
        );
        assert_eq!(lines[6], "(3.3) We now have: (19) \"cosh\" < (20) \"coterie\".");
        assert_eq!(
            lines[9],
            "(Final response) So the answer is: cosh coterie every foyer halifax inferno mcfadden."
        );
        assert_eq!(improved.text, gold_rationale(&inst).unwrap().text);
    }

    #[test]
    fn terminal_feedback_is_rejected() {
        let inst = arith_instance();
        let gold = gold_rationale(&inst).unwrap();
        let fb = scripted_feedback(&inst, &gold).unwrap();
        assert!(fb.terminal);
        assert!(matches!(
            scripted_improve(&inst, &gold, &fb),
            Err(PipelineError::Parameter(_))
        ));
    }

    #[test]
    fn diverging_prefix_is_impossible_to_improve() {
        let inst = sort_instance();
        let hooks = SortHooks {
            key_override: Some(KeyOverride {
                word: "coterie".into(),
                position: 3,
                letter: 'c',
            }),
            ..Default::default()
        };
        let b = build_wordsort_attempt(&inst, &hooks).unwrap();
        // Mislocalized feedback: one step past the actual error, so the kept
        // prefix would contain the corrupted step.
        let mut fb = scripted_feedback(&inst, &b.attempt).unwrap();
        fb.error_step = Some(StepLabel::new("3.3"));
        assert!(matches!(
            scripted_improve(&inst, &b.attempt, &fb),
            Err(PipelineError::ImprovementImpossible(_))
        ));
    }

    #[test]
    fn unknown_error_step_is_impossible_to_improve() {
        let inst = arith_instance();
        let gold = gold_rationale(&inst).unwrap();
        let mut fb = scripted_feedback(&inst, &gold).unwrap();
        fb.terminal = false;
        fb.error_step = Some(StepLabel::new("9"));
        assert!(matches!(
            scripted_improve(&inst, &gold, &fb),
            Err(PipelineError::ImprovementImpossible(_))
        ));
    }
}
