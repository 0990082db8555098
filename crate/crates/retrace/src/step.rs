//! The step-structured attempt model shared by every task.
//!
//! An attempt is an optional preamble line followed by labelled steps:
//! `(1) ...`, `(3.2.1) ...`, `(Final response) ...`. Labels may nest with
//! dots (sub-sorting in the word task) and a step's raw text keeps its label
//! prefix and any continuation lines, so error segments quoted by feedback
//! are verbatim substrings of the step they point at.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

pub const FINAL_LABEL: &str = "Final response";

/// A step label: the text between the parentheses, e.g. `1`, `3.2.1`,
/// `Final response`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StepLabel(pub String);

impl StepLabel {
    pub fn new(s: impl Into<String>) -> Self {
        StepLabel(s.into())
    }

    pub fn final_response() -> Self {
        StepLabel(FINAL_LABEL.to_string())
    }

    pub fn is_final(&self) -> bool {
        self.0 == FINAL_LABEL
    }

    /// Dotted labels as a numeric path: `3.2.1` -> `[3, 2, 1]`.
    pub fn numeric_path(&self) -> Option<Vec<u32>> {
        if self.is_final() {
            return None;
        }
        self.0.split('.').map(|p| p.parse().ok()).collect()
    }

    /// Renders with parentheses as the label appears in text: `(3.2)`.
    pub fn render(&self) -> String {
        format!("({})", self.0)
    }

    /// Document order: numeric paths compare lexicographically (a parent
    /// precedes its children), and the final response comes last.
    pub fn document_cmp(&self, other: &StepLabel) -> Ordering {
        match (self.numeric_path(), other.numeric_path()) {
            (Some(a), Some(b)) => a.cmp(&b),
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (None, None) => Ordering::Equal,
        }
    }
}

impl fmt::Display for StepLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    /// Arithmetic: rewriting the question as a lettered skeleton.
    Decomposition,
    /// Arithmetic: an equation chain for one letter (also the fallback kind
    /// for lines matching no known pattern).
    Calculation,
    /// Arithmetic: the chain that combines the letters into the result.
    FinalEquation,
    /// Sorting: the first-letter (or deeper-letter) index assignments.
    LetterAssign,
    /// Sorting: a `We now have:` ordering with optional tie brackets.
    Ordering,
    /// Sorting: a `Now sort this subpart ...` tie-breaking step.
    Subsort,
    /// Sorting: a `Hence, we have ...` resolved sequence.
    Combine,
    FinalResponse,
}

/// One equation-chain link with its byte span inside the step's raw text,
/// so multi-link error segments can be quoted verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkSpan {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

/// One letter definition in a decomposition step, e.g. `A = (7 - -1 + -1 + -4)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LetterDef {
    pub letter: char,
    pub expr_text: String,
    /// Verbatim slice covering `<letter> = <expr>`.
    pub raw: String,
}

/// One `"word"="c" (3)` assignment in a sorting step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assign {
    pub word: String,
    pub letter: String,
    pub index: u32,
    /// Verbatim slice covering the whole assignment.
    pub raw: String,
}

/// One item of an ordering chain: `(6) "fortescue"` or a tie bracket
/// `(16) ["purloin" ? "percept"]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderItem {
    pub index: u32,
    pub members: Vec<String>,
    /// Byte span of the item inside the step's raw text.
    pub start: usize,
    pub end: usize,
}

impl OrderItem {
    pub fn is_tie(&self) -> bool {
        self.members.len() > 1
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Payload {
    Opaque,
    Decomposition {
        skeleton: String,
        defs: Vec<LetterDef>,
    },
    /// Equation chain. Letter steps carry `lead: Some(letter)` and their
    /// first link is the letter's definition; the final-equation step has no
    /// lead and its first link is the skeleton.
    Chain {
        lead: Option<char>,
        links: Vec<LinkSpan>,
    },
    LetterAssign {
        position: u32,
        assigns: Vec<Assign>,
    },
    Subsort {
        group: Vec<String>,
        position: u32,
        assigns: Vec<Assign>,
    },
    Ordering {
        items: Vec<OrderItem>,
    },
    Combine {
        words: Vec<String>,
    },
    Final {
        /// Normalized answer: integer string, space-joined words, or `(X)`.
        answer: Option<String>,
        /// Verbatim `the answer is ...` claim, for error segments.
        claim: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub label: StepLabel,
    /// Full verbatim text including the `(label) ` prefix and any
    /// continuation lines.
    pub raw_text: String,
    pub kind: StepKind,
    pub payload: Payload,
}

impl Step {
    /// Text after the label prefix (continuation lines included).
    pub fn content(&self) -> &str {
        let prefix = self.label.render();
        let rest = self.raw_text.strip_prefix(&prefix).unwrap_or(&self.raw_text);
        rest.strip_prefix(' ').unwrap_or(rest)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attempt {
    /// Text before the first labelled step, without a trailing newline.
    pub preamble: String,
    pub steps: Vec<Step>,
    /// Normalized final answer if a final-response step was found.
    pub final_answer: Option<String>,
    /// The exact full text of the attempt.
    pub text: String,
}

impl Attempt {
    /// Builds an attempt from parts, synthesizing the canonical text.
    pub fn from_parts(preamble: String, steps: Vec<Step>) -> Attempt {
        let mut text = String::new();
        if !preamble.is_empty() {
            text.push_str(&preamble);
        }
        for s in &steps {
            if !text.is_empty() {
                text.push('\n');
            }
            text.push_str(&s.raw_text);
        }
        let final_answer = steps.iter().rev().find_map(|s| match &s.payload {
            Payload::Final { answer, .. } => answer.clone(),
            _ => None,
        });
        Attempt {
            preamble,
            steps,
            final_answer,
            text,
        }
    }

    pub fn position_of(&self, label: &StepLabel) -> Option<usize> {
        self.steps.iter().position(|s| &s.label == label)
    }

    /// Label of the last numbered (non-final) step, if any.
    pub fn last_numbered_label(&self) -> Option<&StepLabel> {
        self.steps
            .iter()
            .rev()
            .map(|s| &s.label)
            .find(|l| !l.is_final())
    }
}

/// English ordinal words for letter positions, 1-based.
const ORDINALS: [&str; 20] = [
    "first",
    "second",
    "third",
    "fourth",
    "fifth",
    "sixth",
    "seventh",
    "eighth",
    "ninth",
    "tenth",
    "eleventh",
    "twelfth",
    "thirteenth",
    "fourteenth",
    "fifteenth",
    "sixteenth",
    "seventeenth",
    "eighteenth",
    "nineteenth",
    "twentieth",
];

pub fn ordinal_word(n: u32) -> &'static str {
    ORDINALS
        .get(n as usize - 1)
        .copied()
        .unwrap_or("umpteenth")
}

pub fn ordinal_from_word(s: &str) -> Option<u32> {
    ORDINALS
        .iter()
        .position(|o| *o == s)
        .map(|i| i as u32 + 1)
}
