//! Rule-based feedback for word-sorting attempts.
//!
//! The checker replays the attempt as a stack of sorting blocks: the
//! first-letter step opens the top-level block, each `Now sort this
//! subpart` step either opens a child block for the next unresolved tie or
//! continues the current block at the next letter position, `We now have:`
//! steps lay out a block's claimed chain, and `Hence, we have` steps close
//! blocks by combining resolved pieces. Each step is validated against the
//! claimed state of the steps before it, and the earliest disagreement is
//! returned as non-terminal feedback.

use std::collections::BTreeMap;

use crate::error::Result;
use crate::feedback::{nonterminal_feedback, terminal_feedback, ErrorKind, Feedback};
use crate::lexicon::alphabet_index;
use crate::step::{ordinal_word, Assign, Attempt, OrderItem, Payload, Step, StepLabel};
use crate::task::TaskInstance;

struct Block {
    /// Step whose letter assignments key this block.
    source: StepLabel,
    /// Letter position of those assignments (1-based).
    pos: u32,
    /// Claimed alphabet index per word.
    claimed: BTreeMap<String, u32>,
    /// Words this block must account for.
    members: Vec<String>,
    /// Claimed chain from the latest ordering step, with the step it came
    /// from.
    chain: Vec<OrderItem>,
    chain_source: Option<StepLabel>,
    /// Resolution of each tie item, filled in as child blocks combine.
    resolved: BTreeMap<usize, Vec<String>>,
    /// Chain index this block resolves in its parent.
    parent_tie: Option<usize>,
    top: bool,
}

impl Block {
    /// Chain index of the next tie without a resolution.
    fn next_tie(&self) -> Option<usize> {
        self.chain
            .iter()
            .enumerate()
            .position(|(i, item)| item.is_tie() && !self.resolved.contains_key(&i))
    }

    /// Flattens the chain, substituting tie resolutions. `None` while any
    /// tie is unresolved.
    fn flatten(&self) -> Option<Vec<String>> {
        let mut out = Vec::new();
        for (i, item) in self.chain.iter().enumerate() {
            if item.is_tie() {
                out.extend(self.resolved.get(&i)?.iter().cloned());
            } else {
                out.push(item.members[0].clone());
            }
        }
        Some(out)
    }
}

struct State {
    question: Vec<String>,
    stack: Vec<Block>,
    /// Claimed top-level combined order and the step that stated it.
    top_result: Option<(Vec<String>, StepLabel)>,
    answered: bool,
}

/// Checks a word-sorting attempt against its instance.
pub fn check_wordsort(inst: &TaskInstance, attempt: &Attempt) -> Result<Feedback> {
    let question = inst.sorting_words()?;
    let mut st = State {
        question,
        stack: Vec::new(),
        top_result: None,
        answered: false,
    };
    for step in &attempt.steps {
        if let Some(fb) = st.check_step(inst, attempt, step) {
            return Ok(fb);
        }
    }
    if !st.answered {
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

impl State {
    fn check_step(
        &mut self,
        inst: &TaskInstance,
        attempt: &Attempt,
        step: &Step,
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
            Payload::LetterAssign { position, assigns } => {
                if !self.stack.is_empty() {
                    return fail(
                        first_line(step),
                        ErrorKind::Copy,
                        "there is a copy error, since the step does not follow the expected format"
                            .into(),
                    );
                }
                if *position != 1 {
                    return fail(
                        first_line(step),
                        ErrorKind::Copy,
                        "there is a copy error, since the words must first be compared by their first letters"
                            .into(),
                    );
                }
                let members = self.question.clone();
                if let Some(fb) =
                    check_assigns(attempt, step, assigns, &members, 1, "the question")
                {
                    return Some(fb);
                }
                self.stack.push(Block {
                    source: step.label.clone(),
                    pos: 1,
                    claimed: claimed_map(assigns),
                    members,
                    chain: Vec::new(),
                    chain_source: None,
                    resolved: BTreeMap::new(),
                    parent_tie: None,
                    top: true,
                });
                None
            }
            Payload::Ordering { items } => {
                let Some(block) = self.stack.last_mut() else {
                    return fail(
                        first_line(step),
                        ErrorKind::Copy,
                        "there is a copy error, since the step does not follow the expected format"
                            .into(),
                    );
                };
                for item in items {
                    for w in &item.members {
                        let Some(&want) = block.claimed.get(w) else {
                            return fail(
                                step.raw_text[item.start..item.end].to_string(),
                                ErrorKind::Copy,
                                format!(
                                    "there is a copy error, since \"{w}\" does not appear in step {}",
                                    block.source.render()
                                ),
                            );
                        };
                        if item.index != want {
                            return fail(
                                step.raw_text[item.start..item.end].to_string(),
                                ErrorKind::Copy,
                                format!(
                                    "there is a copy error, since ({}) \"{w}\" should be ({want}) \"{w}\"",
                                    item.index
                                ),
                            );
                        }
                    }
                }
                for w in items.windows(2) {
                    if w[0].index > w[1].index {
                        let min = items.iter().map(|i| i.index).min().expect("items nonempty");
                        return fail(
                            step.raw_text[w[0].start..w[1].end].to_string(),
                            ErrorKind::SortOrder,
                            format!(
                                "words are not sorted in ascending order. Using results from step {}, the first and smallest number should be {min}",
                                block.source.render()
                            ),
                        );
                    }
                }
                let listed: Vec<&String> = items.iter().flat_map(|i| &i.members).collect();
                for w in &block.members {
                    if !listed.contains(&w) {
                        return fail(
                            step.content().trim().to_string(),
                            ErrorKind::MissingItem,
                            format!("it is missing the word \"{w}\""),
                        );
                    }
                }
                block.chain = items.clone();
                block.chain_source = Some(step.label.clone());
                block.resolved.clear();
                None
            }
            Payload::Subsort {
                group,
                position,
                assigns,
            } => {
                let Some(block) = self.stack.last_mut() else {
                    return fail(
                        first_line(step),
                        ErrorKind::Copy,
                        "there is a copy error, since the step does not follow the expected format"
                            .into(),
                    );
                };
                let continuation = !block.top && *group == block.members;
                let tie = if continuation {
                    None
                } else {
                    let Some(i) = block.next_tie() else {
                        return fail(
                            bracket(group),
                            ErrorKind::Copy,
                            "there is a copy error, since there is no subpart left to sort".into(),
                        );
                    };
                    if *group != block.chain[i].members {
                        return fail(
                            bracket(group),
                            ErrorKind::Copy,
                            format!(
                                "there is a copy error, since this subpart should be {}",
                                bracket(&block.chain[i].members)
                            ),
                        );
                    }
                    Some(i)
                };
                if *position != block.pos + 1 {
                    return fail(
                        bracket(group),
                        ErrorKind::Copy,
                        format!(
                            "there is a copy error, since this subpart should be sorted by the {} letters",
                            ordinal_word(block.pos + 1)
                        ),
                    );
                }
                if let Some(fb) =
                    check_assigns(attempt, step, assigns, group, *position, "this subpart")
                {
                    return Some(fb);
                }
                if continuation {
                    block.pos = *position;
                    block.claimed = claimed_map(assigns);
                    block.source = step.label.clone();
                    block.chain.clear();
                    block.chain_source = None;
                    block.resolved.clear();
                } else {
                    self.stack.push(Block {
                        source: step.label.clone(),
                        pos: *position,
                        claimed: claimed_map(assigns),
                        members: group.clone(),
                        chain: Vec::new(),
                        chain_source: None,
                        resolved: BTreeMap::new(),
                        parent_tie: tie,
                        top: false,
                    });
                }
                None
            }
            Payload::Combine { words } => {
                let Some(block) = self.stack.last() else {
                    return fail(
                        first_line(step),
                        ErrorKind::Copy,
                        "there is a copy error, since the step does not follow the expected format"
                            .into(),
                    );
                };
                if block.chain.is_empty() {
                    return fail(
                        quoted_seq(words),
                        ErrorKind::Copy,
                        "there is a copy error, since there is no ordering to combine".into(),
                    );
                }
                let Some(expected) = block.flatten() else {
                    let i = block.next_tie().expect("unresolved tie exists");
                    return fail(
                        quoted_seq(words),
                        ErrorKind::Copy,
                        format!(
                            "there is a copy error, since the subpart {} has not been sorted yet",
                            bracket(&block.chain[i].members)
                        ),
                    );
                };
                if *words != expected {
                    return fail(
                        quoted_seq(words),
                        ErrorKind::Copy,
                        format!(
                            "there is a copy error, since the sequence should be {}",
                            quoted_seq(&expected)
                        ),
                    );
                }
                if block.top {
                    self.top_result = Some((words.clone(), step.label.clone()));
                } else {
                    let done = self.stack.pop().expect("checked nonempty");
                    let parent = self.stack.last_mut()?;
                    if let Some(i) = done.parent_tie {
                        parent.resolved.insert(i, words.clone());
                    }
                }
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
                self.answered = true;
                let segment = claim.clone().unwrap_or_else(|| first_line(step));
                let reference = self.top_result.clone().or_else(|| {
                    let top = self.stack.first().filter(|b| b.top && !b.chain.is_empty())?;
                    Some((top.flatten()?, top.chain_source.clone()?))
                });
                if let Some((words, label)) = reference {
                    let want = words.join(" ");
                    if *ans != want {
                        return fail(
                            segment,
                            ErrorKind::FinalInconsistent,
                            format!(
                                "{ans} is inconsistent with the result \"{want}\" in step {}",
                                label.render()
                            ),
                        );
                    }
                }
                if *ans != inst.gold_answer {
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
                ErrorKind::Copy,
                "there is a copy error, since the step does not follow the expected format".into(),
            ),
        }
    }
}

/// Validates letter assignments: every word must belong to the scope, carry
/// its true letter at the position, carry that letter's true alphabet index,
/// and no scope word may be missing.
fn check_assigns(
    attempt: &Attempt,
    step: &Step,
    assigns: &[Assign],
    expected_words: &[String],
    pos: u32,
    scope: &str,
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
    for a in assigns {
        if !expected_words.contains(&a.word) {
            return fail(
                a.raw.clone(),
                ErrorKind::Copy,
                format!("there is a copy error, since \"{}\" is not in {scope}", a.word),
            );
        }
        let Some(c) = a.word.chars().nth(pos as usize - 1) else {
            return fail(
                a.raw.clone(),
                ErrorKind::LetterIndex,
                format!(
                    "the word \"{}\" has no {} letter",
                    a.word,
                    ordinal_word(pos)
                ),
            );
        };
        if a.letter != c.to_string() {
            return fail(
                a.raw.clone(),
                ErrorKind::LetterIndex,
                format!(
                    "the {} letter of \"{}\" should be \"{c}\"",
                    ordinal_word(pos),
                    a.word
                ),
            );
        }
        if let Some(idx) = alphabet_index(c) {
            if a.index != idx {
                return fail(
                    a.raw.clone(),
                    ErrorKind::LetterIndex,
                    format!("the alphabet index of \"{}\" should be {idx}", a.letter),
                );
            }
        }
    }
    for w in expected_words {
        if !assigns.iter().any(|a| &a.word == w) {
            return fail(
                step.content().trim().to_string(),
                ErrorKind::MissingItem,
                format!("it is missing the word \"{w}\" from {scope}"),
            );
        }
    }
    None
}

fn claimed_map(assigns: &[Assign]) -> BTreeMap<String, u32> {
    let mut map = BTreeMap::new();
    for a in assigns {
        map.entry(a.word.clone()).or_insert(a.index);
    }
    map
}

fn bracket(members: &[String]) -> String {
    format!(
        "[{}]",
        members
            .iter()
            .map(|w| format!("\"{w}\""))
            .collect::<Vec<_>>()
            .join(" ? ")
    )
}

fn quoted_seq(words: &[String]) -> String {
    words
        .iter()
        .map(|w| format!("\"{w}\""))
        .collect::<Vec<_>>()
        .join(" < ")
}

fn first_line(step: &Step) -> String {
    step.content().lines().next().unwrap_or("").trim().to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feedback::scripted_feedback;
    use crate::parse::parse_attempt;
    use crate::sort_gold::{
        build_wordsort_attempt, gold_rationale_wordsort, IndexBump, KeyOverride, OrderSwap,
        SortHooks,
    };
    use crate::task::{Split, SubtaskParams, TaskKind};

    fn instance(words: &[&str]) -> TaskInstance {
        let mut sorted: Vec<&str> = words.to_vec();
        sorted.sort_unstable();
        TaskInstance {
            id: "t".into(),
            kind: TaskKind::WordSorting,
            params: SubtaskParams::new(words.len() as u32),
            question: format!(
                "Q: Sort the following words alphabetically:\nList: {}",
                words.join(" ")
            ),
            gold_answer: sorted.join(" "),
            split: Split::Seen,
        }
    }

    #[test]
    fn gold_rationales_are_terminal() {
        for words in [
            vec!["sioux", "fortescue", "purloin", "percept", "helmsman"],
            vec!["cosh", "inferno", "every", "foyer", "coterie", "mcfadden", "halifax"],
            vec!["barn", "bone", "bard", "mist"],
            vec!["pear", "apple"],
        ] {
            let inst = instance(&words);
            let a = gold_rationale_wordsort(&inst).unwrap();
            let fb = check_wordsort(&inst, &a).unwrap();
            assert!(fb.terminal, "{}: {}", words.join(" "), fb.rendered);
        }
    }

    #[test]
    fn wrong_third_letter_feedback_matches_known_transcript() {
        let inst = instance(&[
            "cosh", "inferno", "every", "foyer", "coterie", "mcfadden", "halifax",
        ]);
        let hooks = SortHooks {
            key_override: Some(KeyOverride {
                word: "coterie".into(),
                position: 3,
                letter: 'c',
            }),
            ..Default::default()
        };
        let b = build_wordsort_attempt(&inst, &hooks).unwrap();
        let fb = check_wordsort(&inst, &b.attempt).unwrap();
        assert_eq!(
            fb.rendered,
            "Step (1) to step (3.1) are correct. In step (3.2) the part \
             \"\"coterie\"=\"c\" (3)\" is incorrect. This is because the third letter \
             of \"coterie\" should be \"t\"."
        );
        assert_eq!(fb.error_step, Some(StepLabel::new("3.2")));
        assert_eq!(fb.reason_kind, Some(ErrorKind::LetterIndex));
    }

    #[test]
    fn descending_subsort_feedback_matches_known_transcript() {
        // The student re-sorts ["cole" ? "coda"] at the third letters but
        // writes the ordering backwards under a mislabelled step.
        let inst = instance(&["cole", "estonia", "brian", "redneck", "coda"]);
        let text = "Let's think step by step.\n\
            (1) The first letter: \"cole\"=\"c\" (3), \"estonia\"=\"e\" (5), \"brian\"=\"b\" (2), \"redneck\"=\"r\" (18), \"coda\"=\"c\" (3).\n\
            (2) We now have: (2) \"brian\" < (3) [\"cole\" ? \"coda\"] < (5) \"estonia\" < (18) \"redneck\".\n\
            (3) Now sort this subpart [\"cole\" ? \"coda\"] by looking at their second letters: \"cole\"=\"o\" (15), \"coda\"=\"o\" (15).\n\
            (3.1) We now have: (15) [\"cole\" ? \"coda\"].\n\
            (3.2) Now sort this subpart [\"cole\" ? \"coda\"] by looking at their third letters: \"cole\"=\"l\" (12), \"coda\"=\"d\" (4).\n\
            (3.2.1) We now have: (12) \"cole\" < (4) \"coda\".\n\
            (3.2.2) Hence, we have \"cole\" < \"coda\".\n\
            (4) Hence, we have \"brian\" < \"cole\" < \"coda\" < \"estonia\" < \"redneck\".\n\
            (Final response) So the answer is: brian cole coda estonia redneck.";
        let a = parse_attempt(TaskKind::WordSorting, text).unwrap();
        let fb = check_wordsort(&inst, &a).unwrap();
        assert_eq!(fb.error_step, Some(StepLabel::new("3.2.1")));
        assert_eq!(fb.error_segment, "(12) \"cole\" < (4) \"coda\"");
        assert_eq!(
            fb.reason_text,
            "words are not sorted in ascending order. Using results from step (3.2), \
             the first and smallest number should be 4"
        );
        assert_eq!(fb.reason_kind, Some(ErrorKind::SortOrder));
        assert_eq!(fb.last_correct_step, Some(StepLabel::new("3.2")));
    }

    #[test]
    fn every_hook_is_located_at_its_mark() {
        let inst = instance(&["sioux", "fortescue", "purloin", "percept", "helmsman"]);
        let hooked: Vec<SortHooks> = vec![
            SortHooks {
                key_override: Some(KeyOverride {
                    word: "purloin".into(),
                    position: 1,
                    letter: 'z',
                }),
                ..Default::default()
            },
            SortHooks {
                key_override: Some(KeyOverride {
                    word: "percept".into(),
                    position: 2,
                    letter: 'a',
                }),
                ..Default::default()
            },
            SortHooks {
                order_swap: Some(OrderSwap {
                    ordering_seq: 0,
                    item_idx: 1,
                }),
                ..Default::default()
            },
            SortHooks {
                order_swap: Some(OrderSwap {
                    ordering_seq: 1,
                    item_idx: 0,
                }),
                ..Default::default()
            },
            SortHooks {
                index_bump: Some(IndexBump {
                    ordering_seq: 0,
                    item_idx: 2,
                    new_index: 17,
                }),
                ..Default::default()
            },
            SortHooks {
                drop_word: Some("helmsman".into()),
                ..Default::default()
            },
            SortHooks {
                final_swap: Some(1),
                ..Default::default()
            },
        ];
        for hooks in hooked {
            let b = build_wordsort_attempt(&inst, &hooks).unwrap();
            let fb = scripted_feedback(&inst, &b.attempt).unwrap();
            assert!(!fb.terminal, "{hooks:?}");
            assert_eq!(fb.error_step.as_ref(), Some(&b.marks[0].label), "{hooks:?}");
            assert_eq!(fb.reason_kind, Some(b.marks[0].kind), "{hooks:?}");
            let idx = b.attempt.position_of(&b.marks[0].label).unwrap();
            assert!(
                b.attempt.steps[idx].raw_text.contains(&fb.error_segment),
                "{hooks:?}: {:?} not in {:?}",
                fb.error_segment,
                b.attempt.steps[idx].raw_text
            );
        }
    }

    #[test]
    fn missing_word_feedback() {
        let inst = instance(&["sioux", "fortescue", "purloin", "percept", "helmsman"]);
        let hooks = SortHooks {
            drop_word: Some("helmsman".into()),
            ..Default::default()
        };
        let b = build_wordsort_attempt(&inst, &hooks).unwrap();
        let fb = check_wordsort(&inst, &b.attempt).unwrap();
        assert_eq!(fb.error_step, Some(StepLabel::new("1")));
        assert_eq!(
            fb.reason_text,
            "it is missing the word \"helmsman\" from the question"
        );
        assert_eq!(fb.reason_kind, Some(ErrorKind::MissingItem));
        // No lead sentence: the error is in the very first step.
        assert!(fb.rendered.starts_with("In step (1) the part"));
    }

    #[test]
    fn index_bump_feedback_quotes_the_item() {
        let inst = instance(&["sioux", "fortescue", "purloin", "percept", "helmsman"]);
        let hooks = SortHooks {
            index_bump: Some(IndexBump {
                ordering_seq: 0,
                item_idx: 3,
                new_index: 20,
            }),
            ..Default::default()
        };
        let b = build_wordsort_attempt(&inst, &hooks).unwrap();
        let fb = check_wordsort(&inst, &b.attempt).unwrap();
        assert_eq!(fb.error_step, Some(StepLabel::new("2")));
        assert_eq!(fb.error_segment, "(20) \"sioux\"");
        assert_eq!(
            fb.reason_text,
            "there is a copy error, since (20) \"sioux\" should be (19) \"sioux\""
        );
    }

    #[test]
    fn final_swap_is_inconsistent_with_the_combine_step() {
        let inst = instance(&["sioux", "fortescue", "purloin", "percept", "helmsman"]);
        let hooks = SortHooks {
            final_swap: Some(2),
            ..Default::default()
        };
        let b = build_wordsort_attempt(&inst, &hooks).unwrap();
        let fb = check_wordsort(&inst, &b.attempt).unwrap();
        assert_eq!(fb.error_step, Some(StepLabel::final_response()));
        assert_eq!(
            fb.error_segment,
            "the answer is: fortescue helmsman purloin percept sioux"
        );
        assert_eq!(
            fb.reason_text,
            "fortescue helmsman purloin percept sioux is inconsistent with the result \
             \"fortescue helmsman percept purloin sioux\" in step (4)"
        );
    }

    #[test]
    fn no_tie_final_references_the_ordering_step() {
        let inst = instance(&["pear", "apple"]);
        let text = "Let's think step by step.\n\
            (1) The first letter: \"pear\"=\"p\" (16), \"apple\"=\"a\" (1).\n\
            (2) We now have: (1) \"apple\" < (16) \"pear\".\n\
            (Final response) So the answer is: pear apple.";
        let a = parse_attempt(TaskKind::WordSorting, text).unwrap();
        let fb = check_wordsort(&inst, &a).unwrap();
        assert_eq!(fb.error_step, Some(StepLabel::final_response()));
        assert_eq!(
            fb.reason_text,
            "pear apple is inconsistent with the result \"apple pear\" in step (2)"
        );
    }

    #[test]
    fn wrong_subpart_is_flagged() {
        let inst = instance(&["sioux", "fortescue", "purloin", "percept", "helmsman"]);
        let text = "Let's think step by step.\n\
            (1) The first letter: \"sioux\"=\"s\" (19), \"fortescue\"=\"f\" (6), \"purloin\"=\"p\" (16), \"percept\"=\"p\" (16), \"helmsman\"=\"h\" (8).\n\
            (2) We now have: (6) \"fortescue\" < (8) \"helmsman\" < (16) [\"purloin\" ? \"percept\"] < (19) \"sioux\".\n\
            (3) Now sort this subpart [\"purloin\" ? \"sioux\"] by looking at their second letters: \"purloin\"=\"u\" (21), \"sioux\"=\"i\" (9).\n\
            (Final response) So the answer is: fortescue helmsman percept purloin sioux.";
        let a = parse_attempt(TaskKind::WordSorting, text).unwrap();
        let fb = check_wordsort(&inst, &a).unwrap();
        assert_eq!(fb.error_step, Some(StepLabel::new("3")));
        assert_eq!(fb.error_segment, "[\"purloin\" ? \"sioux\"]");
        assert_eq!(
            fb.reason_text,
            "there is a copy error, since this subpart should be [\"purloin\" ? \"percept\"]"
        );
    }

    #[test]
    fn wrong_combine_sequence_is_flagged() {
        let inst = instance(&["sioux", "fortescue", "purloin", "percept", "helmsman"]);
        let text = "Let's think step by step.\n\
            (1) The first letter: \"sioux\"=\"s\" (19), \"fortescue\"=\"f\" (6), \"purloin\"=\"p\" (16), \"percept\"=\"p\" (16), \"helmsman\"=\"h\" (8).\n\
            (2) We now have: (6) \"fortescue\" < (8) \"helmsman\" < (16) [\"purloin\" ? \"percept\"] < (19) \"sioux\".\n\
            (3) Now sort this subpart [\"purloin\" ? \"percept\"] by looking at their second letters: \"purloin\"=\"u\" (21), \"percept\"=\"e\" (5).\n\
            (3.1) We now have: (5) \"percept\" < (21) \"purloin\".\n\
            (3.2) Hence, we have \"purloin\" < \"percept\".\n\
            (Final response) So the answer is: fortescue helmsman purloin percept sioux.";
        let a = parse_attempt(TaskKind::WordSorting, text).unwrap();
        let fb = check_wordsort(&inst, &a).unwrap();
        assert_eq!(fb.error_step, Some(StepLabel::new("3.2")));
        assert_eq!(fb.error_segment, "\"purloin\" < \"percept\"");
        assert_eq!(
            fb.reason_text,
            "there is a copy error, since the sequence should be \"percept\" < \"purloin\""
        );
    }

    #[test]
    fn alphabet_index_slip_is_flagged() {
        let inst = instance(&["pear", "apple"]);
        let text = "Let's think step by step.\n\
            (1) The first letter: \"pear\"=\"p\" (17), \"apple\"=\"a\" (1).\n\
            (2) We now have: (1) \"apple\" < (17) \"pear\".\n\
            (Final response) So the answer is: apple pear.";
        let a = parse_attempt(TaskKind::WordSorting, text).unwrap();
        let fb = check_wordsort(&inst, &a).unwrap();
        assert_eq!(fb.error_step, Some(StepLabel::new("1")));
        assert_eq!(fb.error_segment, "\"pear\"=\"p\" (17)");
        assert_eq!(
            fb.reason_text,
            "the alphabet index of \"p\" should be 16"
        );
    }
}
