//! Post-processing: split trajectories into training units, filter the
//! improvement units, and rebalance the unit mix.
//!
//! A trajectory `attempt, feedback, attempt, feedback, …` splits into one
//! unit per attempt: every non-terminal feedback yields an improvement
//! triplet (attempt, feedback, updated attempt) and the closing terminal
//! feedback yields a terminal pair. Only accepted trajectories can be split;
//! a trajectory ending in non-terminal feedback is malformed here.

use std::collections::BTreeMap;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::editor::{TrajElement, Trajectory};
use crate::error::{PipelineError, Result};
use crate::feedback::Feedback;
use crate::parse::parse_attempt;
use crate::step::{Attempt, Payload};
use crate::task::{Split, TaskInstance, TaskKind};

/// One "locate the error and revise" training unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImprovementTriplet {
    pub question: String,
    pub attempt_text: String,
    pub feedback: Feedback,
    pub updated_text: String,
    /// Trajectory this unit was cut from.
    pub source_id: String,
    pub instance_id: String,
    pub task: TaskKind,
    pub split: Split,
    /// Whether the source trajectory's last attempt answered correctly.
    pub source_final_correct: bool,
}

/// One "recognize the attempt as finished" training unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerminalPair {
    pub question: String,
    pub attempt_text: String,
    pub feedback: Feedback,
    pub source_id: String,
    pub instance_id: String,
    pub task: TaskKind,
    pub split: Split,
}

/// Splits trajectories into units. Every attempt heads exactly one unit, so
/// `triplets.len() + pairs.len()` equals the number of attempt elements.
pub fn split_trajectories(
    trajs: &[Trajectory],
    instances: &[TaskInstance],
) -> Result<(Vec<ImprovementTriplet>, Vec<TerminalPair>)> {
    let by_id: BTreeMap<&str, &TaskInstance> =
        instances.iter().map(|i| (i.id.as_str(), i)).collect();
    let mut triplets = Vec::new();
    let mut pairs = Vec::new();
    for traj in trajs {
        let bad = |msg: &str| {
            Err(PipelineError::Data {
                id: traj.id.clone(),
                msg: msg.into(),
            })
        };
        let Some(inst) = by_id.get(traj.instance_id.as_str()) else {
            return bad("trajectory references an unknown instance");
        };
        let els = &traj.elements;
        if els.is_empty() || els.len() % 2 != 0 {
            return bad("elements must alternate attempt/feedback and end with feedback");
        }
        let final_correct = match &els[els.len() - 2] {
            TrajElement::Attempt { final_answer, .. } => {
                final_answer.as_deref() == Some(inst.gold_answer.as_str())
            }
            _ => return bad("the next-to-last element must be an attempt"),
        };
        for i in (0..els.len()).step_by(2) {
            let TrajElement::Attempt { text, .. } = &els[i] else {
                return bad("even positions must hold attempts");
            };
            let TrajElement::Feedback { feedback } = &els[i + 1] else {
                return bad("odd positions must hold feedback");
            };
            if feedback.terminal {
                if i + 2 != els.len() {
                    return bad("terminal feedback must close the trajectory");
                }
                pairs.push(TerminalPair {
                    question: inst.question.clone(),
                    attempt_text: text.clone(),
                    feedback: feedback.clone(),
                    source_id: traj.id.clone(),
                    instance_id: inst.id.clone(),
                    task: inst.kind,
                    split: inst.split,
                });
            } else {
                let Some(TrajElement::Attempt { text: updated, .. }) = els.get(i + 2) else {
                    return bad("non-terminal feedback must be followed by an updated attempt");
                };
                triplets.push(ImprovementTriplet {
                    question: inst.question.clone(),
                    attempt_text: text.clone(),
                    feedback: feedback.clone(),
                    updated_text: updated.clone(),
                    source_id: traj.id.clone(),
                    instance_id: inst.id.clone(),
                    task: inst.kind,
                    split: inst.split,
                    source_final_correct: final_correct,
                });
            }
        }
    }
    Ok((triplets, pairs))
}

/// Why improvement units were dropped, one counter per check.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterTally {
    /// Source trajectory never reached a correct answer.
    pub source_incorrect: usize,
    /// The revision left every step unchanged.
    pub no_edit: usize,
    /// The revised final answer does not follow from its own work.
    pub final_inconsistent: usize,
    /// An attempt failed to parse into steps at all.
    pub malformed: usize,
}

impl FilterTally {
    pub fn dropped(&self) -> usize {
        self.source_incorrect + self.no_edit + self.final_inconsistent + self.malformed
    }
}

/// Quality filter for improvement units, checks applied in a fixed order
/// with the first failure tallied. Filtering is idempotent: survivors pass
/// all checks again.
pub fn filter_triplets(
    triplets: Vec<ImprovementTriplet>,
    instances: &[TaskInstance],
) -> (Vec<ImprovementTriplet>, FilterTally) {
    let by_id: BTreeMap<&str, &TaskInstance> =
        instances.iter().map(|i| (i.id.as_str(), i)).collect();
    let mut tally = FilterTally::default();
    let mut kept = Vec::new();
    for t in triplets {
        if !t.source_final_correct {
            tally.source_incorrect += 1;
            continue;
        }
        let (Ok(before), Ok(after)) = (
            parse_attempt(t.task, &t.attempt_text),
            parse_attempt(t.task, &t.updated_text),
        ) else {
            tally.malformed += 1;
            continue;
        };
        let same_steps = before.steps.len() == after.steps.len()
            && before
                .steps
                .iter()
                .zip(&after.steps)
                .all(|(a, b)| a.raw_text == b.raw_text);
        if same_steps {
            tally.no_edit += 1;
            continue;
        }
        let inst = by_id.get(t.instance_id.as_str()).copied();
        if !final_follows_from_work(t.task, &after, inst) {
            tally.final_inconsistent += 1;
            continue;
        }
        kept.push(t);
    }
    (kept, tally)
}

/// Whether the attempt's stated final answer is supported by its own
/// next-to-last step (the claimed state, not ground truth).
pub fn final_follows_from_work(
    task: TaskKind,
    attempt: &Attempt,
    inst: Option<&TaskInstance>,
) -> bool {
    let Some(answer) = attempt.final_answer.as_deref() else {
        return false;
    };
    let n = attempt.steps.len();
    if n < 2 || !attempt.steps[n - 1].label.is_final() {
        return false;
    }
    let prev = &attempt.steps[n - 2];
    match task {
        TaskKind::MultistepArithmetic => {
            let Payload::Chain { links, .. } = &prev.payload else {
                return false;
            };
            let Some(last) = links.last() else { return false };
            let (Ok(expr), Ok(v)) = (crate::expr::parse_expr(&last.text), answer.parse::<i128>())
            else {
                return false;
            };
            expr.as_num() == Some(v)
        }
        TaskKind::WordSorting => {
            let words: Vec<&str> = answer.split_whitespace().collect();
            match &prev.payload {
                Payload::Combine { words: w } => {
                    w.iter().map(String::as_str).collect::<Vec<_>>() == words
                }
                Payload::Ordering { items } => {
                    items.iter().all(|i| i.members.len() == 1)
                        && items
                            .iter()
                            .map(|i| i.members[0].as_str())
                            .collect::<Vec<_>>()
                            == words
                }
                _ => false,
            }
        }
        _ => {
            // Multiple choice: the chosen option's content must be grounded
            // in the next-to-last step's text.
            let Some(inst) = inst else { return false };
            let Some((_, content)) = inst.options().into_iter().find(|(l, _)| l == answer) else {
                return false;
            };
            let step_tokens = content_tokens(prev.content());
            content_tokens(&content)
                .iter()
                .all(|t| step_tokens.contains(t))
        }
    }
}

const STOPWORDS: [&str; 16] = [
    "the", "is", "a", "an", "of", "from", "be", "to", "in", "will", "would", "so", "it", "and",
    "that", "are",
];

fn content_tokens(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| {
            w.trim_matches(|c: char| !c.is_alphanumeric() && c != '/')
                .to_ascii_lowercase()
        })
        .filter(|w| !w.is_empty() && !STOPWORDS.contains(&w.as_str()))
        .collect()
}

/// Downsamples one side so improvement units make up the `target` share of
/// all units, within rounding. Selection is seeded and keeps the original
/// order of the survivors.
pub fn rebalance(
    triplets: Vec<ImprovementTriplet>,
    pairs: Vec<TerminalPair>,
    target: f64,
    r: &mut ChaCha8Rng,
) -> Result<(Vec<ImprovementTriplet>, Vec<TerminalPair>)> {
    if !(0.0..=1.0).contains(&target) {
        return Err(PipelineError::Balance(format!(
            "target share must lie in [0, 1], got {target}"
        )));
    }
    let (t, p) = (triplets.len(), pairs.len());
    if target > 0.0 && t == 0 {
        return Err(PipelineError::Balance(format!(
            "target share {target} needs at least one improvement unit"
        )));
    }
    if target < 1.0 && p == 0 {
        return Err(PipelineError::Balance(format!(
            "target share {target} needs at least one terminal pair"
        )));
    }
    let current = t as f64 / (t + p) as f64;
    if current < target {
        // Too few triplets: thin the pairs.
        let keep = (t as f64 * (1.0 - target) / target).round() as usize;
        let idx = rand::seq::index::sample(r, p, keep.min(p)).into_vec();
        Ok((triplets, take_indices(pairs, idx)))
    } else if current > target {
        let keep = (target * p as f64 / (1.0 - target)).round() as usize;
        let idx = rand::seq::index::sample(r, t, keep.min(t)).into_vec();
        Ok((take_indices(triplets, idx), pairs))
    } else {
        Ok((triplets, pairs))
    }
}

/// No-downsampling variant: keeps every unit and reports the achieved share
/// of improvement units.
pub fn rebalance_auto(
    triplets: &[ImprovementTriplet],
    pairs: &[TerminalPair],
) -> Result<f64> {
    let total = triplets.len() + pairs.len();
    if total == 0 {
        return Err(PipelineError::Balance(
            "cannot balance an empty unit pool".into(),
        ));
    }
    Ok(triplets.len() as f64 / total as f64)
}

fn take_indices<T>(items: Vec<T>, mut idx: Vec<usize>) -> Vec<T> {
    idx.sort_unstable();
    let mut it = idx.into_iter().peekable();
    let mut out = Vec::new();
    for (i, item) in items.into_iter().enumerate() {
        if it.peek() == Some(&i) {
            out.push(item);
            it.next();
        }
    }
    out
}
