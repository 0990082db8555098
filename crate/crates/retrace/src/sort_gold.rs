//! Gold rationales for word sorting, with optional corruption hooks.
//!
//! The canonical rationale assigns alphabet indices to first letters, lays
//! out the resulting order with tie brackets, then breaks each tie in its
//! own sub-sorting block:
//!
//! ```text
//! (1) The first letter: "sioux"="s" (19), ...
//! (2) We now have: (6) "fortescue" < ... < (16) ["purloin" ? "percept"] < ...
//! (3) Now sort this subpart ["purloin" ? "percept"] by looking at their
//!     second letters: "purloin"="u" (21), "percept"="e" (5).
//! (3.1) We now have: (5) "percept" < (21) "purloin".
//! (3.2) Hence, we have "percept" < "purloin".
//! (4) Hence, we have "fortescue" < ... < "sioux".
//! (Final response) So the answer is: fortescue helmsman percept purloin sioux.
//! ```
//!
//! When a sub-sort pass leaves the whole group tied, sorting continues
//! inside the same block at the next letter ((3.2) Now sort..., (3.3) We now
//! have..., and so on). When no tie exists at all, step (2) already shows
//! the full order and the rationale goes straight to the final response.
//!
//! Hooks corrupt the build *consistently*: an overridden letter key or a
//! swapped ordering propagates through grouping, sub-sorts, the combined
//! sequence, and the final answer, so the first inconsistent step in the
//! corrupted attempt is exactly the injected one.

use crate::error::{PipelineError, Result};
use crate::feedback::{DefectMark, ErrorKind};
use crate::lexicon::alphabet_index;
use crate::parse::{parse_attempt, parse_attempt_strict};
use crate::step::{ordinal_word, Attempt, StepLabel};
use crate::task::{TaskInstance, TaskKind};

pub const SORT_PREAMBLE: &str = "Let's think step by step.";

/// Claim a wrong letter for one word at one position; grouping and all
/// later steps use the claimed letter.
#[derive(Debug, Clone)]
pub struct KeyOverride {
    pub word: String,
    pub position: u32,
    pub letter: char,
}

/// Swap two adjacent items of the n-th ordering step (0-based over all
/// `We now have:` steps in emission order); later steps follow the swapped
/// order.
#[derive(Debug, Clone, Copy)]
pub struct OrderSwap {
    pub ordering_seq: usize,
    pub item_idx: usize,
}

/// Display a wrong index for one item of an ordering step. Purely cosmetic:
/// grouping and the final answer still use the true claimed index.
#[derive(Debug, Clone, Copy)]
pub struct IndexBump {
    pub ordering_seq: usize,
    pub item_idx: usize,
    pub new_index: u32,
}

#[derive(Debug, Clone, Default)]
pub struct SortHooks {
    pub key_override: Option<KeyOverride>,
    pub order_swap: Option<OrderSwap>,
    pub index_bump: Option<IndexBump>,
    /// Build the whole rationale as if this question word did not exist.
    pub drop_word: Option<String>,
    /// Swap the final response's words at this position with the next one,
    /// without touching any step.
    pub final_swap: Option<usize>,
}

impl SortHooks {
    pub fn is_clean(&self) -> bool {
        self.key_override.is_none()
            && self.order_swap.is_none()
            && self.index_bump.is_none()
            && self.drop_word.is_none()
            && self.final_swap.is_none()
    }
}

#[derive(Debug, Clone)]
pub struct SortBuild {
    pub attempt: Attempt,
    pub marks: Vec<DefectMark>,
}

/// The clean gold rationale.
pub fn gold_rationale_wordsort(inst: &TaskInstance) -> Result<Attempt> {
    let b = build_wordsort_attempt(inst, &SortHooks::default())?;
    parse_attempt_strict(TaskKind::WordSorting, &b.attempt.text)
}

/// Builds a rationale for the instance, applying any corruption hooks.
pub fn build_wordsort_attempt(inst: &TaskInstance, hooks: &SortHooks) -> Result<SortBuild> {
    let words = inst.sorting_words()?;
    build_rationale(&words, hooks)
}

/// One item of an ordering chain during construction.
#[derive(Debug, Clone)]
struct ChainGroup {
    index: u32,
    members: Vec<String>,
}

struct Builder<'h> {
    hooks: &'h SortHooks,
    lines: Vec<String>,
    marks: Vec<DefectMark>,
    ordering_seq: usize,
}

pub(crate) fn build_rationale(words: &[String], hooks: &SortHooks) -> Result<SortBuild> {
    if words.is_empty() {
        return Err(PipelineError::Parameter("no words to sort".into()));
    }
    let mut b = Builder {
        hooks,
        lines: vec![SORT_PREAMBLE.to_string()],
        marks: Vec::new(),
        ordering_seq: 0,
    };

    let mut active: Vec<String> = words.to_vec();
    if let Some(drop) = &hooks.drop_word {
        let before = active.len();
        active.retain(|w| w != drop);
        if active.len() == before || active.is_empty() {
            return Err(PipelineError::Parameter(format!(
                "cannot drop word {drop:?} from the question"
            )));
        }
        b.marks.push(DefectMark {
            label: StepLabel::new("1"),
            kind: ErrorKind::MissingItem,
        });
    }

    let assigns = b.render_assigns(&active, 1, &StepLabel::new("1"))?;
    b.lines.push(format!("(1) The first letter: {assigns}."));

    let mut groups = b.group(&active, 1)?;
    let label2 = StepLabel::new("2");
    let bump = b.apply_order_hooks(&mut groups, &label2);
    b.lines
        .push(format!("(2) We now have: {}.", render_chain(&groups, bump)));

    let has_tie = groups.iter().any(|g| g.members.len() > 1);
    let resolution: Vec<String> = if has_tie {
        let mut next_top = 3u32;
        let mut res = Vec::new();
        for g in groups.clone() {
            if g.members.len() == 1 {
                res.push(g.members[0].clone());
            } else {
                let r = b.emit_block(g.members, 2, vec![next_top])?;
                next_top += 1;
                res.extend(r);
            }
        }
        b.lines
            .push(format!("({next_top}) Hence, we have {}.", quoted_seq(&res)));
        res
    } else {
        groups.into_iter().map(|g| g.members[0].clone()).collect()
    };

    let mut answer = resolution;
    if let Some(i) = hooks.final_swap {
        if i + 1 < answer.len() {
            answer.swap(i, i + 1);
            b.marks.push(DefectMark {
                label: StepLabel::final_response(),
                kind: ErrorKind::FinalInconsistent,
            });
        }
    }
    b.lines
        .push(format!("(Final response) So the answer is: {}.", answer.join(" ")));

    let mut marks = b.marks;
    marks.sort_by(|a, z| a.label.document_cmp(&z.label));
    let text = b.lines.join("\n");
    let attempt = parse_attempt(TaskKind::WordSorting, &text)?;
    Ok(SortBuild { attempt, marks })
}

impl Builder<'_> {
    /// Claimed key of a word at a letter position (1-based), honouring the
    /// override hook. Errors if the word is too short for the position.
    fn key(&self, word: &str, pos: u32) -> Result<(char, u32)> {
        let c = match &self.hooks.key_override {
            Some(o) if o.word == word && o.position == pos => o.letter,
            _ => word.chars().nth(pos as usize - 1).ok_or_else(|| {
                PipelineError::Parameter(format!(
                    "word {word:?} has no letter at position {pos}"
                ))
            })?,
        };
        let idx = alphabet_index(c).ok_or_else(|| {
            PipelineError::Parameter(format!("{c:?} is not a lowercase letter"))
        })?;
        Ok((c, idx))
    }

    fn render_assigns(&mut self, words: &[String], pos: u32, label: &StepLabel) -> Result<String> {
        let mut parts = Vec::with_capacity(words.len());
        for w in words {
            let (c, idx) = self.key(w, pos)?;
            if let Some(o) = &self.hooks.key_override {
                if &o.word == w && o.position == pos {
                    self.marks.push(DefectMark {
                        label: label.clone(),
                        kind: ErrorKind::LetterIndex,
                    });
                }
            }
            parts.push(format!("\"{w}\"=\"{c}\" ({idx})"));
        }
        Ok(parts.join(", "))
    }

    /// Groups words by their claimed key at `pos`, ascending by index,
    /// members kept in input order.
    fn group(&self, members: &[String], pos: u32) -> Result<Vec<ChainGroup>> {
        let keyed: Vec<(u32, &String)> = members
            .iter()
            .map(|w| self.key(w, pos).map(|(_, i)| (i, w)))
            .collect::<Result<_>>()?;
        let mut indices: Vec<u32> = keyed.iter().map(|(i, _)| *i).collect();
        indices.sort_unstable();
        indices.dedup();
        Ok(indices
            .into_iter()
            .map(|index| ChainGroup {
                index,
                members: keyed
                    .iter()
                    .filter(|(i, _)| *i == index)
                    .map(|(_, w)| (*w).clone())
                    .collect(),
            })
            .collect())
    }

    /// Applies swap/bump hooks to the chain about to be rendered. Returns
    /// the display-only bump, if any.
    fn apply_order_hooks(
        &mut self,
        groups: &mut [ChainGroup],
        label: &StepLabel,
    ) -> Option<(usize, u32)> {
        let seq = self.ordering_seq;
        self.ordering_seq += 1;
        if let Some(s) = self.hooks.order_swap {
            if s.ordering_seq == seq && s.item_idx + 1 < groups.len() {
                groups.swap(s.item_idx, s.item_idx + 1);
                self.marks.push(DefectMark {
                    label: label.clone(),
                    kind: ErrorKind::SortOrder,
                });
            }
        }
        if let Some(bmp) = self.hooks.index_bump {
            if bmp.ordering_seq == seq
                && bmp.item_idx < groups.len()
                && groups[bmp.item_idx].index != bmp.new_index
            {
                self.marks.push(DefectMark {
                    label: label.clone(),
                    kind: ErrorKind::Copy,
                });
                return Some((bmp.item_idx, bmp.new_index));
            }
        }
        None
    }

    /// Emits a sub-sorting block rooted at `path`, sorting `members` by the
    /// letter at `pos`. Returns the resolved order.
    fn emit_block(&mut self, members: Vec<String>, pos: u32, path: Vec<u32>) -> Result<Vec<String>> {
        let plabel = label_of(&path);
        let assigns = self.render_assigns(&members, pos, &plabel)?;
        self.lines.push(format!(
            "({plabel}) Now sort this subpart {} by looking at their {} letters: {assigns}.",
            bracket(&members),
            ordinal_word(pos)
        ));

        let mut c = 1u32;
        let mut cur = members;
        let mut pos = pos;
        loop {
            let mut groups = self.group(&cur, pos)?;
            let olabel = label_of(&child(&path, c));
            let bump = self.apply_order_hooks(&mut groups, &olabel);
            self.lines
                .push(format!("({olabel}) We now have: {}.", render_chain(&groups, bump)));
            c += 1;

            if groups.iter().all(|g| g.members.len() == 1) {
                let res: Vec<String> =
                    groups.into_iter().map(|g| g.members.pop_or_first()).collect();
                self.lines.push(format!(
                    "({}) Hence, we have {}.",
                    label_of(&child(&path, c)),
                    quoted_seq(&res)
                ));
                return Ok(res);
            }

            if groups.len() == 1 && groups[0].members.len() == cur.len() {
                // The whole group is still tied: continue at the next letter.
                pos += 1;
                cur = groups.into_iter().next().expect("one group").members;
                let slabel = label_of(&child(&path, c));
                let assigns = self.render_assigns(&cur, pos, &slabel)?;
                self.lines.push(format!(
                    "({slabel}) Now sort this subpart {} by looking at their {} letters: {assigns}.",
                    bracket(&cur),
                    ordinal_word(pos)
                ));
                c += 1;
                continue;
            }

            // Mixed split: nested blocks for the remaining ties, then the
            // block's own combined sequence.
            let mut res = Vec::new();
            for g in groups {
                if g.members.len() == 1 {
                    res.extend(g.members);
                } else {
                    let r = self.emit_block(g.members, pos + 1, child(&path, c))?;
                    c += 1;
                    res.extend(r);
                }
            }
            self.lines.push(format!(
                "({}) Hence, we have {}.",
                label_of(&child(&path, c)),
                quoted_seq(&res)
            ));
            return Ok(res);
        }
    }
}

trait PopOrFirst {
    fn pop_or_first(self) -> String;
}

impl PopOrFirst for Vec<String> {
    fn pop_or_first(mut self) -> String {
        self.pop().expect("singleton group")
    }
}

fn child(path: &[u32], c: u32) -> Vec<u32> {
    let mut p = path.to_vec();
    p.push(c);
    p
}

fn label_of(path: &[u32]) -> StepLabel {
    StepLabel::new(
        path.iter()
            .map(|n| n.to_string())
            .collect::<Vec<_>>()
            .join("."),
    )
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

fn render_chain(groups: &[ChainGroup], bump: Option<(usize, u32)>) -> String {
    groups
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let idx = match bump {
                Some((bi, v)) if bi == i => v,
                _ => g.index,
            };
            if g.members.len() == 1 {
                format!("({idx}) \"{}\"", g.members[0])
            } else {
                format!("({idx}) {}", bracket(&g.members))
            }
        })
        .collect::<Vec<_>>()
        .join(" < ")
}
