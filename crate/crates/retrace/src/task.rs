//! Task instances: generation for scriptable tasks, fixtures for the rest.
//!
//! Two task families are fully scriptable (question, gold rationale, feedback
//! can all be computed): multistep arithmetic and word sorting. Date
//! understanding and logical deduction are multiple-choice tasks whose
//! instances are loaded from fixture files and whose feedback comes from a
//! completion provider.

use std::collections::BTreeSet;
use std::fmt;
use std::io::BufRead;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{PipelineError, Result};
use crate::expr::{Expr, Op};
use crate::lexicon;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    MultistepArithmetic,
    WordSorting,
    DateUnderstanding,
    LogicalDeduction,
}

impl TaskKind {
    pub fn name(self) -> &'static str {
        match self {
            TaskKind::MultistepArithmetic => "multistep_arithmetic",
            TaskKind::WordSorting => "word_sorting",
            TaskKind::DateUnderstanding => "date_understanding",
            TaskKind::LogicalDeduction => "logical_deduction",
        }
    }

    pub fn from_name(s: &str) -> Result<TaskKind> {
        match s {
            "multistep_arithmetic" => Ok(TaskKind::MultistepArithmetic),
            "word_sorting" => Ok(TaskKind::WordSorting),
            "date_understanding" => Ok(TaskKind::DateUnderstanding),
            "logical_deduction" => Ok(TaskKind::LogicalDeduction),
            other => Err(PipelineError::Parse(format!("unknown task kind {other:?}"))),
        }
    }

    /// Whether gold rationales and feedback can be computed without a provider.
    pub fn is_scriptable(self) -> bool {
        matches!(
            self,
            TaskKind::MultistepArithmetic | TaskKind::WordSorting
        )
    }

    /// Whether answers are multiple-choice option letters like `(B)`.
    pub fn is_multiple_choice(self) -> bool {
        !self.is_scriptable()
    }

    /// Short id prefix used in generated instance ids.
    pub fn tag(self) -> &'static str {
        match self {
            TaskKind::MultistepArithmetic => "arith",
            TaskKind::WordSorting => "sort",
            TaskKind::DateUnderstanding => "date",
            TaskKind::LogicalDeduction => "deduction",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Difficulty coordinates of a subtask cell. `l` is the length axis (operands
/// per group, words to sort, reasoning steps, objects to order); `d` is the
/// nesting depth and only applies to arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SubtaskParams {
    pub l: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<u32>,
}

impl SubtaskParams {
    pub fn new(l: u32) -> Self {
        SubtaskParams { l, d: None }
    }

    pub fn with_depth(l: u32, d: u32) -> Self {
        SubtaskParams { l, d: Some(d) }
    }

    /// Cell key used in profiles and reports, e.g. `arith:l4:d2`, `sort:l5`.
    pub fn cell_key(&self, kind: TaskKind) -> String {
        match self.d {
            Some(d) => format!("{}:l{}:d{}", kind.tag(), self.l, d),
            None => format!("{}:l{}", kind.tag(), self.l),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Seen,
    Unseen,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Seen => "seen",
            Split::Unseen => "unseen",
        }
    }
}

/// Assigns an instance to the seen (in-distribution, trainable) or unseen
/// (harder, evaluation-only) side of the difficulty grid.
pub fn classify_split(kind: TaskKind, params: &SubtaskParams) -> Result<Split> {
    let bad = |msg: String| Err(PipelineError::Parameter(msg));
    match kind {
        TaskKind::MultistepArithmetic => {
            let d = params
                .d
                .ok_or_else(|| PipelineError::Parameter("arithmetic requires depth d".into()))?;
            if !(3..=6).contains(&params.l) || !(2..=3).contains(&d) {
                return bad(format!("arithmetic cell out of range: l={}, d={d}", params.l));
            }
            if (params.l == 3 || params.l == 4) && d == 2 {
                Ok(Split::Seen)
            } else {
                Ok(Split::Unseen)
            }
        }
        TaskKind::WordSorting => {
            if params.d.is_some() {
                return bad("word sorting has no depth parameter".into());
            }
            match params.l {
                2..=7 => Ok(Split::Seen),
                8..=16 => Ok(Split::Unseen),
                l => bad(format!("word sorting length out of range: l={l}")),
            }
        }
        TaskKind::DateUnderstanding => {
            if params.d.is_some() {
                return bad("date understanding has no depth parameter".into());
            }
            match params.l {
                1..=2 => Ok(Split::Seen),
                3..=10 => Ok(Split::Unseen),
                l => bad(format!("date understanding steps out of range: l={l}")),
            }
        }
        TaskKind::LogicalDeduction => {
            if params.d.is_some() {
                return bad("logical deduction has no depth parameter".into());
            }
            match params.l {
                3 | 5 => Ok(Split::Seen),
                7 => Ok(Split::Unseen),
                l => bad(format!("logical deduction size out of range: l={l}")),
            }
        }
    }
}

/// The full difficulty grid for a task, seen cells first.
pub fn grid(kind: TaskKind) -> Vec<SubtaskParams> {
    match kind {
        TaskKind::MultistepArithmetic => {
            let mut cells: Vec<SubtaskParams> = vec![
                SubtaskParams::with_depth(3, 2),
                SubtaskParams::with_depth(4, 2),
            ];
            for l in 3..=6 {
                for d in 2..=3 {
                    let p = SubtaskParams::with_depth(l, d);
                    if !cells.contains(&p) {
                        cells.push(p);
                    }
                }
            }
            cells
        }
        TaskKind::WordSorting => (2..=16).map(SubtaskParams::new).collect(),
        TaskKind::DateUnderstanding => (1..=2).map(SubtaskParams::new).collect(),
        TaskKind::LogicalDeduction => vec![
            SubtaskParams::new(3),
            SubtaskParams::new(5),
            SubtaskParams::new(7),
        ],
    }
}

/// Cells of the grid belonging to one split.
pub fn grid_split(kind: TaskKind, split: Split) -> Vec<SubtaskParams> {
    grid(kind)
        .into_iter()
        .filter(|p| classify_split(kind, p).expect("grid cells are valid") == split)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskInstance {
    pub id: String,
    pub kind: TaskKind,
    pub params: SubtaskParams,
    /// Full question text as shown to the student, including the `Q: ` lead.
    pub question: String,
    /// Canonical final answer: an integer string, a space-joined word list,
    /// or an option letter like `(B)`.
    pub gold_answer: String,
    pub split: Split,
}

impl TaskInstance {
    /// The arithmetic expression inside the question, without `Q: ` or ` =`.
    pub fn arithmetic_expression(&self) -> Result<Expr> {
        if self.kind != TaskKind::MultistepArithmetic {
            return Err(PipelineError::Kind {
                expected: "multistep_arithmetic",
                got: self.kind.name().into(),
            });
        }
        let body = self
            .question
            .strip_prefix("Q: ")
            .and_then(|s| s.strip_suffix(" ="))
            .ok_or_else(|| {
                PipelineError::Parse(format!("malformed arithmetic question: {:?}", self.question))
            })?;
        crate::expr::parse_expr(body)
    }

    /// The word list inside a sorting question, in question order.
    pub fn sorting_words(&self) -> Result<Vec<String>> {
        if self.kind != TaskKind::WordSorting {
            return Err(PipelineError::Kind {
                expected: "word_sorting",
                got: self.kind.name().into(),
            });
        }
        let list = self
            .question
            .lines()
            .find_map(|l| l.strip_prefix("List: "))
            .ok_or_else(|| {
                PipelineError::Parse(format!("malformed sorting question: {:?}", self.question))
            })?;
        Ok(list.split_whitespace().map(str::to_string).collect())
    }

    /// Multiple-choice options as `(letter, content)` pairs, parsed from the
    /// question's `Options:` block.
    pub fn options(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let mut in_options = false;
        for line in self.question.lines() {
            if line.trim() == "Options:" {
                in_options = true;
                continue;
            }
            if !in_options {
                continue;
            }
            let t = line.trim();
            if t.starts_with('(') {
                if let Some(close) = t.find(')') {
                    let letter = t[..=close].to_string();
                    let content = t[close + 1..].trim().to_string();
                    out.push((letter, content));
                }
            }
        }
        out
    }
}

/// Generates one arithmetic instance: a nesting skeleton of depth `d` whose
/// `2^(d-1)` leaves are flat groups of exactly `l` operands in `[-9, 9]`.
pub fn gen_arithmetic(params: &SubtaskParams, seed: u64) -> Result<TaskInstance> {
    let kind = TaskKind::MultistepArithmetic;
    let split = classify_split(kind, params)?;
    let d = params.d.expect("classify_split checked depth");
    let mut r = rng::stream(seed, &["gen", "arith", &params.cell_key(kind)]);

    let ops = [Op::Add, Op::Sub, Op::Mul];
    let n_groups = 1usize << (d - 1);
    let mut groups = Vec::with_capacity(n_groups);
    for _ in 0..n_groups {
        let terms: Vec<Expr> = (0..params.l)
            .map(|_| Expr::Num(r.gen_range(-9..=9)))
            .collect();
        let g_ops: Vec<Op> = (0..params.l - 1)
            .map(|_| *ops.choose(&mut r).expect("nonempty"))
            .collect();
        groups.push(Expr::Run {
            terms,
            ops: g_ops,
        });
    }
    // Fold leaves into a balanced binary skeleton, left to right.
    let mut level = groups;
    while level.len() > 1 {
        let mut next = Vec::with_capacity(level.len() / 2);
        let mut it = level.into_iter();
        while let (Some(a), Some(b)) = (it.next(), it.next()) {
            let op = *ops.choose(&mut r).expect("nonempty");
            next.push(Expr::bin(a, op, b));
        }
        level = next;
    }
    let root = level.pop().expect("at least one group");
    let gold = root.eval().expect("no placeholders in generated expression");

    Ok(TaskInstance {
        id: format!("{}-l{}d{}-{seed:016x}", kind.tag(), params.l, d),
        kind,
        params: *params,
        question: format!("Q: {} =", root.render()),
        gold_answer: gold.to_string(),
        split,
    })
}

/// Generates one word-sorting instance: `l` distinct lexicon words, none of
/// which is a prefix of another (so letter-by-letter comparison always
/// resolves ties before either word runs out).
pub fn gen_wordsort(params: &SubtaskParams, seed: u64) -> Result<TaskInstance> {
    let kind = TaskKind::WordSorting;
    let split = classify_split(kind, params)?;
    let pool = lexicon::words();
    let mut r = rng::stream(seed, &["gen", "sort", &params.cell_key(kind)]);

    let mut chosen: Vec<&str> = Vec::with_capacity(params.l as usize);
    let mut guard = 0;
    while chosen.len() < params.l as usize {
        guard += 1;
        if guard > 10_000 {
            return Err(PipelineError::Parameter(
                "could not sample a prefix-free word set".into(),
            ));
        }
        let w = *pool.choose(&mut r).expect("lexicon is nonempty");
        if chosen
            .iter()
            .any(|c| c == &w || c.starts_with(w) || w.starts_with(c))
        {
            continue;
        }
        chosen.push(w);
    }

    let mut sorted: Vec<&str> = chosen.clone();
    sorted.sort_unstable();

    Ok(TaskInstance {
        id: format!("{}-l{}-{seed:016x}", kind.tag(), params.l),
        kind,
        params: *params,
        question: format!(
            "Q: Sort the following words alphabetically:\nList: {}",
            chosen.join(" ")
        ),
        gold_answer: sorted.join(" "),
        split,
    })
}

/// Generates one instance of a scriptable task.
pub fn gen_instance(kind: TaskKind, params: &SubtaskParams, seed: u64) -> Result<TaskInstance> {
    match kind {
        TaskKind::MultistepArithmetic => gen_arithmetic(params, seed),
        TaskKind::WordSorting => gen_wordsort(params, seed),
        other => Err(PipelineError::Kind {
            expected: "a scriptable task",
            got: other.name().into(),
        }),
    }
}

/// Generates `count` instances of one cell with derived per-instance seeds.
pub fn gen_batch(
    kind: TaskKind,
    params: &SubtaskParams,
    seed: u64,
    count: usize,
) -> Result<Vec<TaskInstance>> {
    let mut out = Vec::with_capacity(count);
    let mut ids = BTreeSet::new();
    for i in 0..count {
        let s = rng::derive_seed(seed, &["batch", &params.cell_key(kind), &i.to_string()]);
        let mut inst = gen_instance(kind, params, s)?;
        inst.id = format!("{}-{i}", inst.id);
        if !ids.insert(inst.id.clone()) {
            return Err(PipelineError::Parameter(format!(
                "duplicate instance id {}",
                inst.id
            )));
        }
        out.push(inst);
    }
    Ok(out)
}

/// One line of a fixture instance file.
#[derive(Debug, Deserialize)]
struct FixtureLine {
    id: String,
    kind: TaskKind,
    l: u32,
    #[serde(default)]
    d: Option<u32>,
    question: String,
    gold_answer: String,
}

/// Loads non-generated instances (multiple-choice tasks, or hand-written
/// cases for the scriptable ones) from a JSONL file. Each line must carry
/// `id`, `kind`, `l`, optional `d`, `question`, and `gold_answer`; the split
/// is derived from the difficulty grid. Errors name the offending line.
pub fn load_fixture_instances(path: &Path) -> Result<Vec<TaskInstance>> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let mut out = Vec::new();
    let mut ids = BTreeSet::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fx: FixtureLine = serde_json::from_str(&line).map_err(|e| {
            PipelineError::Parse(format!("{}:{}: {e}", path.display(), lineno + 1))
        })?;
        let params = SubtaskParams { l: fx.l, d: fx.d };
        let split = classify_split(fx.kind, &params).map_err(|e| {
            PipelineError::Parse(format!("{}:{}: {e}", path.display(), lineno + 1))
        })?;
        if !ids.insert(fx.id.clone()) {
            return Err(PipelineError::Parse(format!(
                "{}:{}: duplicate instance id {:?}",
                path.display(),
                lineno + 1,
                fx.id
            )));
        }
        out.push(TaskInstance {
            id: fx.id,
            kind: fx.kind,
            params,
            question: fx.question,
            gold_answer: fx.gold_answer,
            split,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_grid_matches_difficulty_table() {
        let msa = TaskKind::MultistepArithmetic;
        for (l, d, want) in [
            (3, 2, Split::Seen),
            (4, 2, Split::Seen),
            (3, 3, Split::Unseen),
            (4, 3, Split::Unseen),
            (5, 2, Split::Unseen),
            (5, 3, Split::Unseen),
            (6, 2, Split::Unseen),
            (6, 3, Split::Unseen),
        ] {
            assert_eq!(
                classify_split(msa, &SubtaskParams::with_depth(l, d)).unwrap(),
                want,
                "l={l} d={d}"
            );
        }
        for l in 2..=7 {
            assert_eq!(
                classify_split(TaskKind::WordSorting, &SubtaskParams::new(l)).unwrap(),
                Split::Seen
            );
        }
        for l in 8..=16 {
            assert_eq!(
                classify_split(TaskKind::WordSorting, &SubtaskParams::new(l)).unwrap(),
                Split::Unseen
            );
        }
        assert_eq!(
            classify_split(TaskKind::DateUnderstanding, &SubtaskParams::new(2)).unwrap(),
            Split::Seen
        );
        assert_eq!(
            classify_split(TaskKind::LogicalDeduction, &SubtaskParams::new(7)).unwrap(),
            Split::Unseen
        );
        assert!(classify_split(msa, &SubtaskParams::new(3)).is_err());
        assert!(classify_split(TaskKind::WordSorting, &SubtaskParams::new(17)).is_err());
    }

    #[test]
    fn arithmetic_generation_is_deterministic_and_well_formed() {
        let p = SubtaskParams::with_depth(4, 3);
        let a = gen_arithmetic(&p, 99).unwrap();
        let b = gen_arithmetic(&p, 99).unwrap();
        assert_eq!(a, b);
        let c = gen_arithmetic(&p, 100).unwrap();
        assert_ne!(a.question, c.question);

        assert!(a.question.starts_with("Q: (("));
        assert!(a.question.ends_with(" ="));
        let e = a.arithmetic_expression().unwrap();
        assert_eq!(e.eval().unwrap().to_string(), a.gold_answer);
        // Depth 3 means two levels of nesting over 4 groups of 4 operands.
        match &e {
            Expr::Run { terms, .. } => assert_eq!(terms.len(), 2),
            _ => panic!("expected a run"),
        }
    }

    #[test]
    fn wordsort_generation_is_prefix_free_and_sorted() {
        let p = SubtaskParams::new(8);
        let inst = gen_wordsort(&p, 5).unwrap();
        let words = inst.sorting_words().unwrap();
        assert_eq!(words.len(), 8);
        for (i, a) in words.iter().enumerate() {
            for (j, b) in words.iter().enumerate() {
                if i != j {
                    assert!(!a.starts_with(b.as_str()), "{a} has prefix {b}");
                }
            }
        }
        let mut sorted = words.clone();
        sorted.sort();
        assert_eq!(inst.gold_answer, sorted.join(" "));
        assert_eq!(inst.split, Split::Unseen);
    }

    #[test]
    fn batch_ids_are_unique_and_stable() {
        let p = SubtaskParams::with_depth(3, 2);
        let a = gen_batch(TaskKind::MultistepArithmetic, &p, 7, 20).unwrap();
        let b = gen_batch(TaskKind::MultistepArithmetic, &p, 7, 20).unwrap();
        assert_eq!(a, b);
        let ids: BTreeSet<_> = a.iter().map(|i| i.id.clone()).collect();
        assert_eq!(ids.len(), 20);
    }

    #[test]
    fn options_parse_from_question() {
        let inst = TaskInstance {
            id: "x".into(),
            kind: TaskKind::DateUnderstanding,
            params: SubtaskParams::new(2),
            question: "Q: What is the date tomorrow?\nOptions:\n(A) 12/31/1929\n(B) 01/01/1930\n(C) 01/02/1930".into(),
            gold_answer: "(C)".into(),
            split: Split::Seen,
        };
        let opts = inst.options();
        assert_eq!(opts.len(), 3);
        assert_eq!(opts[1], ("(B)".to_string(), "01/01/1930".to_string()));
    }
}
