//! Property tests for the pipeline's structural invariants.

mod common;

use proptest::prelude::*;

use retrace::editor::{
    edit_trajectory, ScriptedFeedbackModule, ScriptedImproveModule, TrajElement,
};
use retrace::emit::{emit_dataset, Role};
use retrace::expr::parse_expr;
use retrace::feedback::{contains_terminal_phrase, scripted_feedback, Feedback};
use retrace::improve::gold_rationale;
use retrace::metrics::evaluate;
use retrace::parse::parse_attempt_strict;
use retrace::postprocess::{rebalance, split_trajectories, ImprovementTriplet, TerminalPair};
use retrace::rng::stream;
use retrace::student::{SimulatedStudent, Student, StudentProfile};
use retrace::task::{gen_batch, grid, Split, TaskInstance, TaskKind};

const SCRIPTED: [TaskKind; 2] = [TaskKind::MultistepArithmetic, TaskKind::WordSorting];

fn kind_and_cell() -> impl Strategy<Value = (TaskKind, usize)> {
    (prop_oneof![Just(SCRIPTED[0]), Just(SCRIPTED[1])], 0..64usize)
}

fn instance(kind: TaskKind, cell_idx: usize, seed: u64, n: usize) -> Vec<TaskInstance> {
    let cells = grid(kind);
    let cell = &cells[cell_idx % cells.len()];
    gen_batch(kind, cell, seed, n).unwrap()
}

fn student(seed: u64, comp: f64, si: f64) -> SimulatedStudent {
    let mut p = StudentProfile::new(seed, &SCRIPTED);
    for c in p.competence.values_mut() {
        *c = comp;
    }
    p.si_propensity = si;
    SimulatedStudent::new(p)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Same seed, same batch — and the batch lies in the requested cell.
    #[test]
    fn generation_is_deterministic((kind, ci) in kind_and_cell(), seed in any::<u64>(), n in 1..6usize) {
        let a = instance(kind, ci, seed, n);
        let b = instance(kind, ci, seed, n);
        prop_assert_eq!(&a, &b);
        let mut ids = std::collections::BTreeSet::new();
        for inst in &a {
            prop_assert!(ids.insert(inst.id.clone()), "duplicate id {}", inst.id);
            prop_assert_eq!(inst.kind, kind);
            prop_assert!(!inst.gold_answer.is_empty());
        }
    }

    /// The reference rationale reparses strictly into its own text, with
    /// strictly increasing labels and the gold final answer.
    #[test]
    fn gold_rationales_reparse_strictly((kind, ci) in kind_and_cell(), seed in any::<u64>()) {
        for inst in instance(kind, ci, seed, 1) {
            let gold = gold_rationale(&inst).unwrap();
            let parsed = parse_attempt_strict(kind, &gold.text).unwrap();
            prop_assert_eq!(&parsed.text, &gold.text);
            prop_assert_eq!(parsed.final_answer.as_deref(), Some(inst.gold_answer.as_str()));
            // Reconstruction: preamble + raw step texts partition the text.
            let mut rebuilt = parsed.preamble.clone();
            for s in &parsed.steps {
                if !rebuilt.is_empty() {
                    rebuilt.push('\n');
                }
                rebuilt.push_str(&s.raw_text);
            }
            prop_assert_eq!(&rebuilt, &gold.text);
            for w in parsed.steps.windows(2) {
                prop_assert_eq!(
                    w[0].label.document_cmp(&w[1].label),
                    std::cmp::Ordering::Less,
                    "labels out of order: {} then {}", w[0].label, w[1].label
                );
            }
        }
    }

    /// Printed and reparsed expressions are the same expression, and the
    /// precedence-nested form keeps the value.
    #[test]
    fn arithmetic_expressions_round_trip(ci in 0..64usize, seed in any::<u64>()) {
        for inst in instance(TaskKind::MultistepArithmetic, ci, seed, 2) {
            let e = inst.arithmetic_expression().unwrap();
            let back = parse_expr(&e.render()).unwrap();
            prop_assert_eq!(&back, &e);
            let nested = retrace::arith_gold::nested_form(&e).unwrap();
            prop_assert_eq!(nested.eval(), e.eval());
            prop_assert_eq!(e.eval().unwrap().to_string(), inst.gold_answer);
        }
    }

    /// Scripted feedback is terminal exactly on correct attempts, and when
    /// it is not, the quoted segment appears verbatim in the named step.
    #[test]
    fn feedback_quotes_are_verbatim(
        (kind, ci) in kind_and_cell(),
        seed in any::<u64>(),
        comp in 0.0..1.0f64,
    ) {
        let st = student(seed ^ 0x5eed, comp, 0.0);
        for inst in instance(kind, ci, seed, 2) {
            let sa = st.attempt(&inst).unwrap();
            let fb = scripted_feedback(&inst, &sa.attempt).unwrap();
            let correct = sa.attempt.final_answer.as_deref() == Some(inst.gold_answer.as_str());
            prop_assert_eq!(fb.terminal, correct);
            prop_assert_eq!(contains_terminal_phrase(&fb.rendered), fb.terminal);
            if !fb.terminal {
                let label = fb.error_step.clone().unwrap();
                let pos = sa.attempt.position_of(&label).unwrap();
                let step = &sa.attempt.steps[pos];
                prop_assert!(!fb.error_segment.is_empty());
                prop_assert!(
                    step.raw_text.contains(&fb.error_segment),
                    "segment {:?} not in step {:?}", fb.error_segment, step.raw_text
                );
                prop_assert!(fb.rendered.contains(&fb.error_segment));
            }
        }
    }

    /// Editing yields units conservatively: one per attempt element, one
    /// terminal pair per accepted trajectory.
    #[test]
    fn editing_conserves_units(
        (kind, ci) in kind_and_cell(),
        seed in any::<u64>(),
        comp in 0.0..1.0f64,
    ) {
        let st = student(seed ^ 0xed17, comp, 0.0);
        let instances = instance(kind, ci, seed, 3);
        let trajs: Vec<_> = instances
            .iter()
            .map(|i| {
                edit_trajectory(i, &st, &ScriptedFeedbackModule, &ScriptedImproveModule, 3, 1)
                    .unwrap()
            })
            .collect();
        prop_assert!(trajs.iter().all(|t| t.accepted));
        let attempts: usize = trajs
            .iter()
            .flat_map(|t| &t.elements)
            .filter(|e| matches!(e, TrajElement::Attempt { .. }))
            .count();
        let (triplets, pairs) = split_trajectories(&trajs, &instances).unwrap();
        prop_assert_eq!(triplets.len() + pairs.len(), attempts);
        prop_assert_eq!(pairs.len(), trajs.len());
        for t in &triplets {
            prop_assert_ne!(&t.attempt_text, &t.updated_text);
            prop_assert!(t.source_final_correct);
        }
    }

    /// Rebalancing lands within one unit of the target share, keeps order,
    /// and never invents units.
    #[test]
    fn rebalance_bound_holds(
        t in 1..300usize,
        p in 1..300usize,
        target in 0.01..0.99f64,
        seed in any::<u64>(),
    ) {
        let triplets: Vec<ImprovementTriplet> = (0..t).map(synthetic_triplet).collect();
        let pairs: Vec<TerminalPair> = (0..p).map(synthetic_pair).collect();
        let mut r = stream(seed, &["prop", "rebalance"]);
        let (t2, p2) = rebalance(triplets.clone(), pairs.clone(), target, &mut r).unwrap();
        let total = t2.len() + p2.len();
        prop_assert!(total > 0);
        let achieved = t2.len() as f64 / total as f64;
        prop_assert!(
            (achieved - target).abs() <= 1.0 / total as f64 + 1e-12,
            "target {} achieved {} over {} units", target, achieved, total
        );
        // One side is untouched, the other side is an ordered subsequence.
        prop_assert!(t2.len() == t || p2.len() == p);
        prop_assert!(is_subsequence(&t2, &triplets, |x| x.source_id.clone()));
        prop_assert!(is_subsequence(&p2, &pairs, |x| x.source_id.clone()));
    }

    /// Emission puts the configured weight on exactly the feedback and
    /// revision spans of improvement examples, nothing else.
    #[test]
    fn emission_weights_are_placed_exactly(
        t in 1..20usize,
        p in 1..20usize,
        weight in 0.1..8.0f64,
    ) {
        let triplets: Vec<ImprovementTriplet> = (0..t).map(synthetic_triplet).collect();
        let pairs: Vec<TerminalPair> = (0..p).map(synthetic_pair).collect();
        let examples = emit_dataset(&triplets, &pairs, weight).unwrap();
        prop_assert_eq!(examples.len(), t + p);
        for ex in &examples {
            let text = ex.serialized_text();
            let mut offset = 0usize;
            for s in &ex.spans {
                prop_assert_eq!(&text[offset..offset + s.text.len()], s.text.as_str());
                offset += s.text.len();
                let expected = match s.role {
                    Role::Feedback | Role::UpdatedAttempt => weight,
                    _ => 1.0,
                };
                prop_assert_eq!(s.weight, expected);
            }
            prop_assert_eq!(offset, text.len());
        }
    }

    /// Correct totals always decompose into direct solves plus revised
    /// solves, whatever the student looks like.
    #[test]
    fn metrics_identity_decomposes(
        (kind, ci) in kind_and_cell(),
        seed in any::<u64>(),
        comp in 0.0..1.0f64,
        si in 0.0..1.0f64,
    ) {
        let st = student(seed ^ 0x3a17, comp, si);
        let instances = instance(kind, ci, seed, 4);
        let trajs: Vec<_> = instances
            .iter()
            .map(|i| retrace::editor::inference_trajectory(i, &st, 2, "p").unwrap())
            .collect();
        for r in evaluate(&instances, &trajs).unwrap() {
            prop_assert_eq!(r.total_correct(), r.directly_correct + r.si_contrib());
            prop_assert!(r.si_contrib() <= r.si_attempts);
            prop_assert!(r.si_attempts <= r.n_total());
            prop_assert_eq!(r.n_total(), instances.len());
            for v in [r.seen_accuracy(), r.unseen_accuracy(), r.total_accuracy(), r.si_freq()] {
                if let Some(x) = v {
                    prop_assert!((0.0..=1.0).contains(&x));
                }
            }
        }
    }

    /// Purpose-keyed streams are reproducible and tag-sensitive.
    #[test]
    fn rng_streams_are_pure(seed in any::<u64>(), a in "[a-z]{1,8}", b in "[a-z]{1,8}") {
        use rand::RngCore;
        let mut s1 = stream(seed, &[&a, &b]);
        let mut s2 = stream(seed, &[&a, &b]);
        let x: Vec<u64> = (0..4).map(|_| s1.next_u64()).collect();
        let y: Vec<u64> = (0..4).map(|_| s2.next_u64()).collect();
        prop_assert_eq!(x, y);
        if a != b {
            let mut s3 = stream(seed, &[&b, &a]);
            let z: Vec<u64> = (0..4).map(|_| s3.next_u64()).collect();
            let w: Vec<u64> = {
                let mut s = stream(seed, &[&a, &b]);
                (0..4).map(|_| s.next_u64()).collect()
            };
            prop_assert_ne!(z, w, "swapping tags must change the stream");
        }
    }
}

fn synthetic_feedback(i: usize, terminal: bool) -> Feedback {
    Feedback {
        terminal,
        last_correct_step: None,
        error_step: None,
        error_segment: String::new(),
        reason_kind: None,
        reason_text: String::new(),
        rendered: if terminal {
            format!("Step 1 to step {i} is correct, and the final response is also correct.")
        } else {
            format!("In step ({i}) the part \"x\" is incorrect.")
        },
    }
}

fn synthetic_triplet(i: usize) -> ImprovementTriplet {
    ImprovementTriplet {
        question: format!("Q: problem {i}"),
        attempt_text: format!("(1) guess {i}.\n(Final response) So the answer is 0."),
        feedback: synthetic_feedback(i, false),
        updated_text: format!("(1) fix {i}.\n(Final response) So the answer is 1."),
        source_id: format!("t{i}"),
        instance_id: format!("inst{i}"),
        task: TaskKind::MultistepArithmetic,
        split: Split::Seen,
        source_final_correct: true,
    }
}

fn synthetic_pair(i: usize) -> TerminalPair {
    TerminalPair {
        question: format!("Q: problem {i}"),
        attempt_text: format!("(1) work {i}.\n(Final response) So the answer is 1."),
        feedback: synthetic_feedback(i, true),
        source_id: format!("p{i}"),
        instance_id: format!("inst{i}"),
        task: TaskKind::WordSorting,
        split: Split::Seen,
    }
}

/// `sub` appears in `full` in order, matching by a key.
fn is_subsequence<T, K: PartialEq, F: Fn(&T) -> K>(sub: &[T], full: &[T], key: F) -> bool {
    let mut it = full.iter();
    sub.iter()
        .all(|s| it.by_ref().any(|f| key(f) == key(s)))
}
