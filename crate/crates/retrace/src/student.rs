//! Simulated student: a parameterized solver whose competence, error mix,
//! and self-improvement propensity evolve in response to training data.
//!
//! The simulator stands in for the model being trained so the whole
//! generate → edit → filter → rebalance → train loop can run end to end at
//! desk scale. Draws are keyed by purpose and instance id (never by
//! iteration), so a run uses common random numbers: an instance solved at
//! some competence level stays solved at any higher one, which makes the
//! loop's accuracy trends monotone rather than merely monotone in
//! expectation.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::arith_gold::{
    build_arith_attempt, ArithHooks, CalcTweak, ChainId, CopyTweak, DecompTweak,
};
use crate::emit::{Role, TrainingExample};
use crate::error::{PipelineError, Result};
use crate::expr::Op;
use crate::feedback::{
    classify_reason, nonterminal_feedback, scripted_feedback, terminal_feedback, DefectMark,
    ErrorKind, Feedback,
};
use crate::improve::{gold_rationale, scripted_improve};
use crate::rng::{stream, unit};
use crate::sort_gold::{build_wordsort_attempt, KeyOverride, OrderSwap, SortHooks};
use crate::step::Attempt;
use crate::task::{classify_split, grid, Split, SubtaskParams, TaskInstance, TaskKind};

/// The student's trainable state. Serialized between iterations so a run can
/// be resumed from any stage boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudentProfile {
    /// How many training updates this profile has absorbed.
    pub version: u32,
    pub seed: u64,
    /// Relative propensity to exhibit each error kind when wrong.
    pub error_rate: BTreeMap<ErrorKind, f64>,
    /// Probability of attempting self-correction on a wrong answer.
    pub si_propensity: f64,
    /// Probability of solving an instance outright, keyed by difficulty cell.
    pub competence: BTreeMap<String, f64>,
}

impl StudentProfile {
    /// A fresh untrained student covering the difficulty grids of `tasks`.
    pub fn new(seed: u64, tasks: &[TaskKind]) -> StudentProfile {
        let mut error_rate = BTreeMap::new();
        for k in ErrorKind::ALL {
            error_rate.insert(k, 1.0);
        }
        let mut competence = BTreeMap::new();
        for &t in tasks {
            for cell in grid(t) {
                competence.insert(cell.cell_key(t), default_competence(t, &cell));
            }
        }
        StudentProfile {
            version: 0,
            seed,
            error_rate,
            si_propensity: 0.0,
            competence,
        }
    }

    pub fn competence_for(&self, inst: &TaskInstance) -> f64 {
        self.competence
            .get(&inst.params.cell_key(inst.kind))
            .copied()
            .unwrap_or(0.2)
    }
}

/// Untrained per-cell competence: harder cells (more operands, deeper
/// nesting, longer lists) start lower, floored at 2%.
fn default_competence(kind: TaskKind, cell: &SubtaskParams) -> f64 {
    let c = match kind {
        TaskKind::MultistepArithmetic => {
            let l = cell.l as f64;
            let d = cell.d.unwrap_or(2) as f64;
            0.55 - 0.08 * (l - 3.0) - 0.25 * (d - 2.0)
        }
        TaskKind::WordSorting => 0.65 - 0.05 * (cell.l as f64 - 2.0),
        _ => 0.25,
    };
    c.max(0.02)
}

/// An attempt plus the ground-truth defect locations the simulator injected
/// (empty for a correct attempt). Tests use the marks to verify that error
/// localization points exactly where the defect landed.
#[derive(Debug, Clone)]
pub struct StudentAttempt {
    pub attempt: Attempt,
    pub marks: Vec<DefectMark>,
}

/// The model-under-training interface the editing loop drives.
pub trait Student {
    fn attempt(&self, inst: &TaskInstance) -> Result<StudentAttempt>;
    /// The student's own opinion of an attempt. `round` distinguishes
    /// repeated asks within one trajectory.
    fn self_feedback(&self, inst: &TaskInstance, attempt: &Attempt, round: u32)
        -> Result<Feedback>;
    fn self_improve(&self, inst: &TaskInstance, prev: &Attempt, fb: &Feedback) -> Result<Attempt>;
}

/// Deterministic simulated student driven by a [`StudentProfile`].
#[derive(Debug, Clone)]
pub struct SimulatedStudent {
    pub profile: StudentProfile,
}

impl SimulatedStudent {
    pub fn new(profile: StudentProfile) -> SimulatedStudent {
        SimulatedStudent { profile }
    }
}

impl Student for SimulatedStudent {
    fn attempt(&self, inst: &TaskInstance) -> Result<StudentAttempt> {
        let p = &self.profile;
        if unit(p.seed, &["attempt", &inst.id]) < p.competence_for(inst) {
            return Ok(StudentAttempt {
                attempt: gold_rationale(inst)?,
                marks: vec![],
            });
        }
        let kinds = {
            let mut r = stream(p.seed, &["defects", &inst.id]);
            let k = match r.gen::<f64>() {
                x if x < 0.5 => 1,
                x if x < 0.75 => 2,
                _ => 3,
            };
            draw_kinds(p, inst.kind, k, &mut r)
        };
        let mut r = stream(p.seed, &["inject", &inst.id]);
        inject(inst, &kinds, &mut r)
    }

    fn self_feedback(
        &self,
        inst: &TaskInstance,
        attempt: &Attempt,
        round: u32,
    ) -> Result<Feedback> {
        let p = &self.profile;
        if attempt.final_answer.as_deref() == Some(inst.gold_answer.as_str()) {
            return Ok(terminal_feedback(attempt));
        }
        let rd = round.to_string();
        if unit(p.seed, &["si", &inst.id, &rd]) >= p.si_propensity {
            // Does not try to self-correct: declares the attempt finished.
            return Ok(terminal_feedback(attempt));
        }
        let exact = scripted_feedback(inst, attempt)?;
        if unit(p.seed, &["fb", &inst.id, &rd]) < p.competence_for(inst) {
            return Ok(exact);
        }
        // Plausible but mislocated self-assessment: the right reason pinned
        // to a neighbouring step.
        let (Some(step), false) = (exact.error_step.as_ref(), exact.terminal) else {
            return Ok(exact);
        };
        let Some(idx) = attempt.position_of(step) else {
            return Ok(exact);
        };
        let shifted = if idx + 1 < attempt.steps.len() {
            idx + 1
        } else {
            idx.saturating_sub(1)
        };
        if shifted == idx {
            return Ok(exact);
        }
        let target = &attempt.steps[shifted];
        Ok(nonterminal_feedback(
            attempt,
            target.label.clone(),
            target.content().trim().to_string(),
            exact.reason_kind.unwrap_or(ErrorKind::FinalInconsistent),
            exact.reason_text.clone(),
        ))
    }

    fn self_improve(&self, inst: &TaskInstance, prev: &Attempt, fb: &Feedback) -> Result<Attempt> {
        scripted_improve(inst, prev, fb)
    }
}

/// Defect kinds the simulator can plant for a task. Word sorting's copy
/// defect (a transcription slip in a displayed index) is excluded because it
/// preserves the final answer; localization tests exercise it through the
/// builder hooks directly.
pub fn injectable(task: TaskKind) -> &'static [ErrorKind] {
    match task {
        TaskKind::MultistepArithmetic => &[
            ErrorKind::Calculation,
            ErrorKind::Copy,
            ErrorKind::Decomposition,
            ErrorKind::FinalInconsistent,
        ],
        TaskKind::WordSorting => &[
            ErrorKind::LetterIndex,
            ErrorKind::SortOrder,
            ErrorKind::MissingItem,
            ErrorKind::FinalInconsistent,
        ],
        _ => &[],
    }
}

/// Samples `k` distinct kinds, weighted by the profile's error rates. Kinds
/// whose rate has decayed to nothing are out of the running (unless that
/// would empty the pool entirely).
fn draw_kinds(p: &StudentProfile, task: TaskKind, k: usize, r: &mut ChaCha8Rng) -> Vec<ErrorKind> {
    let mut pool: Vec<ErrorKind> = injectable(task)
        .iter()
        .copied()
        .filter(|e| p.error_rate.get(e).copied().unwrap_or(1.0) > 1e-6)
        .collect();
    if pool.is_empty() {
        pool = injectable(task).to_vec();
    }
    let mut out = Vec::new();
    while out.len() < k && !pool.is_empty() {
        let weights: Vec<f64> = pool
            .iter()
            .map(|e| p.error_rate.get(e).copied().unwrap_or(1.0).max(1e-9))
            .collect();
        let total: f64 = weights.iter().sum();
        let mut x = r.gen::<f64>() * total;
        let mut idx = pool.len() - 1;
        for (i, w) in weights.iter().enumerate() {
            if x < *w {
                idx = i;
                break;
            }
            x -= w;
        }
        out.push(pool.remove(idx));
    }
    out
}

fn delta(r: &mut ChaCha8Rng, max: i128) -> i128 {
    let m = r.gen_range(1..=max);
    if r.gen_bool(0.5) {
        m
    } else {
        -m
    }
}

/// Builds a defective attempt exhibiting `kinds`. Parameter draws that fail
/// to change the final answer (or fail to land a mark at all) are redrawn a
/// bounded number of times; the fallback flips only the final response,
/// which always produces a wrong, marked attempt.
fn inject(inst: &TaskInstance, kinds: &[ErrorKind], r: &mut ChaCha8Rng) -> Result<StudentAttempt> {
    let gold = inst.gold_answer.as_str();
    for _ in 0..12 {
        let built = match inst.kind {
            TaskKind::MultistepArithmetic => {
                let hooks = draw_arith_hooks(inst, kinds, r)?;
                build_arith_attempt(inst, &hooks).map(|b| StudentAttempt {
                    attempt: b.attempt,
                    marks: b.marks,
                })
            }
            TaskKind::WordSorting => {
                let hooks = draw_sort_hooks(inst, kinds, r)?;
                build_wordsort_attempt(inst, &hooks).map(|b| StudentAttempt {
                    attempt: b.attempt,
                    marks: b.marks,
                })
            }
            other => {
                return Err(PipelineError::Kind {
                    expected: "a scriptable task",
                    got: other.name().into(),
                })
            }
        };
        if let Ok(sa) = built {
            if !sa.marks.is_empty() && sa.attempt.final_answer.as_deref() != Some(gold) {
                return Ok(sa);
            }
        }
    }
    match inst.kind {
        TaskKind::MultistepArithmetic => {
            let v: i128 = gold.parse().map_err(|_| {
                PipelineError::Parse(format!("gold answer {gold:?} is not an integer"))
            })?;
            let hooks = ArithHooks {
                final_override: Some(v + 1),
                ..Default::default()
            };
            let b = build_arith_attempt(inst, &hooks)?;
            Ok(StudentAttempt {
                attempt: b.attempt,
                marks: b.marks,
            })
        }
        TaskKind::WordSorting => {
            let hooks = SortHooks {
                final_swap: Some(0),
                ..Default::default()
            };
            let b = build_wordsort_attempt(inst, &hooks)?;
            Ok(StudentAttempt {
                attempt: b.attempt,
                marks: b.marks,
            })
        }
        _ => unreachable!("checked above"),
    }
}

fn draw_arith_hooks(
    inst: &TaskInstance,
    kinds: &[ErrorKind],
    r: &mut ChaCha8Rng,
) -> Result<ArithHooks> {
    let l = inst.params.l as usize;
    let d = inst.params.d.unwrap_or(2);
    let groups = 1usize << (d - 1);
    // A letter chain reduces l operands; the final chain reduces the group
    // values. Both have one op (and one reduction) fewer than operands.
    let ops_in = |chain: &ChainId| match chain {
        ChainId::Letter(_) => l - 1,
        ChainId::Final => groups - 1,
    };
    let mut hooks = ArithHooks::default();
    for k in kinds {
        match k {
            ErrorKind::Calculation => {
                let chain = if r.gen_range(0..=groups) < groups {
                    ChainId::Letter(r.gen_range(0..groups))
                } else {
                    ChainId::Final
                };
                let n = ops_in(&chain);
                hooks.calc_tweak = Some(CalcTweak {
                    reduction_idx: r.gen_range(0..n),
                    chain,
                    delta: delta(r, 9),
                });
            }
            ErrorKind::Copy => {
                let chain = if r.gen_range(0..=groups) < groups {
                    ChainId::Letter(r.gen_range(0..groups))
                } else {
                    ChainId::Final
                };
                let n = ops_in(&chain);
                hooks.copy_tweak = Some(CopyTweak {
                    op_index: r.gen_range(0..n),
                    chain,
                    new_op: [Op::Add, Op::Sub, Op::Mul][r.gen_range(0..3)],
                });
            }
            ErrorKind::Decomposition => {
                hooks.decomp_tweak = Some(DecompTweak {
                    letter_idx: r.gen_range(0..groups),
                    term_idx: r.gen_range(0..l),
                    new_value: r.gen_range(-9..=9),
                });
            }
            ErrorKind::FinalInconsistent => {
                let v: i128 = inst.gold_answer.parse().map_err(|_| {
                    PipelineError::Parse(format!(
                        "gold answer {:?} is not an integer",
                        inst.gold_answer
                    ))
                })?;
                hooks.final_override = Some(v + delta(r, 50));
            }
            other => {
                return Err(PipelineError::Parameter(format!(
                    "kind {} is not injectable for arithmetic",
                    other.as_str()
                )))
            }
        }
    }
    Ok(hooks)
}

fn draw_sort_hooks(
    inst: &TaskInstance,
    kinds: &[ErrorKind],
    r: &mut ChaCha8Rng,
) -> Result<SortHooks> {
    let words = inst.sorting_words()?;
    let n = words.len();
    let mut hooks = SortHooks::default();
    for k in kinds {
        match k {
            ErrorKind::LetterIndex => {
                let w = &words[r.gen_range(0..n)];
                // Push the word to the far end of the alphabet so the
                // grouping (and with it the final order) actually moves.
                let letter = if w.starts_with('z') { 'a' } else { 'z' };
                hooks.key_override = Some(KeyOverride {
                    word: w.clone(),
                    position: 1,
                    letter,
                });
            }
            ErrorKind::SortOrder => {
                hooks.order_swap = Some(OrderSwap {
                    ordering_seq: 0,
                    item_idx: r.gen_range(0..(n - 1).max(1)),
                });
            }
            ErrorKind::MissingItem => {
                hooks.drop_word = Some(words[r.gen_range(0..n)].clone());
            }
            ErrorKind::FinalInconsistent => {
                hooks.final_swap = Some(r.gen_range(0..(n - 1).max(1)));
            }
            other => {
                return Err(PipelineError::Parameter(format!(
                    "kind {} is not injectable for word sorting",
                    other.as_str()
                )))
            }
        }
    }
    Ok(hooks)
}

/// One training update: error rates decay in proportion to the feedback mass
/// of their kind, per-cell competence grows with the share of correct
/// demonstrations for that task (unseen cells at a quarter rate), and the
/// self-improvement propensity tracks the share of improvement examples.
pub fn train_update(
    profile: &StudentProfile,
    dataset: &[TrainingExample],
    eta: f64,
) -> Result<StudentProfile> {
    if dataset.is_empty() {
        return Err(PipelineError::Update("the training dataset is empty".into()));
    }
    if !(0.0..=1.0).contains(&eta) {
        return Err(PipelineError::Update(format!(
            "learning rate must lie in [0, 1], got {eta}"
        )));
    }
    let n = dataset.len() as f64;
    let mut kind_mass: BTreeMap<ErrorKind, f64> = BTreeMap::new();
    let mut seen_pairs: BTreeMap<TaskKind, f64> = BTreeMap::new();
    let mut triplets = 0usize;
    for ex in dataset {
        let fb_span = ex.spans.iter().find(|s| s.role == Role::Feedback);
        match fb_span {
            Some(fb) if ex.spans.iter().any(|s| s.role == Role::UpdatedAttempt) => {
                triplets += 1;
                *kind_mass.entry(classify_reason(&fb.text)).or_insert(0.0) += fb.weight;
            }
            _ => {
                if ex.split == Split::Seen {
                    *seen_pairs.entry(ex.task).or_insert(0.0) += 1.0;
                }
            }
        }
    }

    let mut cell_split: BTreeMap<String, (TaskKind, Split)> = BTreeMap::new();
    for t in [
        TaskKind::MultistepArithmetic,
        TaskKind::WordSorting,
        TaskKind::DateUnderstanding,
        TaskKind::LogicalDeduction,
    ] {
        for cell in grid(t) {
            let s = classify_split(t, &cell)?;
            cell_split.insert(cell.cell_key(t), (t, s));
        }
    }

    let mut out = profile.clone();
    for (k, m) in kind_mass {
        if let Some(rate) = out.error_rate.get_mut(&k) {
            *rate *= (-eta * m / n).exp();
        }
    }
    for (cell, comp) in out.competence.iter_mut() {
        let Some((task, split)) = cell_split.get(cell) else {
            continue;
        };
        let share = seen_pairs.get(task).copied().unwrap_or(0.0) / n;
        if share <= 0.0 {
            continue;
        }
        let factor = match split {
            Split::Seen => 1.0,
            Split::Unseen => 0.25,
        };
        *comp += eta * factor * share * (1.0 - *comp);
    }
    out.si_propensity = 0.5 * out.si_propensity + 0.5 * (triplets as f64 / n);
    out.version += 1;
    Ok(out)
}
