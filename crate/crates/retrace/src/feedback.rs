//! Feedback: locating the earliest wrong step and rendering the verdict.
//!
//! Non-terminal feedback follows a fixed template:
//!
//! ```text
//! Step (1) to step (k) are correct. In step (m) the part "segment" is
//! incorrect. This is because reason.
//! ```
//!
//! with the leading sentence omitted when the very first step is wrong.
//! Terminal feedback is the sentence `Step 1 to step x is correct, and the
//! final response is also correct.` A trajectory is finished when its last
//! feedback *contains* the phrase `the final response is correct` (the
//! terminal sentence above contains it with "also" interposed, so the
//! detector accepts both wordings).

use serde::{Deserialize, Serialize};

use crate::error::{PipelineError, Result};
use crate::step::{Attempt, StepLabel};
use crate::task::{TaskInstance, TaskKind};

/// Reason taxonomy for located errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Calculation,
    Copy,
    SortOrder,
    LetterIndex,
    Decomposition,
    FinalInconsistent,
    MissingItem,
}

impl ErrorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorKind::Calculation => "calculation",
            ErrorKind::Copy => "copy",
            ErrorKind::SortOrder => "sort_order",
            ErrorKind::LetterIndex => "letter_index",
            ErrorKind::Decomposition => "decomposition",
            ErrorKind::FinalInconsistent => "final_inconsistent",
            ErrorKind::MissingItem => "missing_item",
        }
    }

    pub const ALL: [ErrorKind; 7] = [
        ErrorKind::Calculation,
        ErrorKind::Copy,
        ErrorKind::SortOrder,
        ErrorKind::LetterIndex,
        ErrorKind::Decomposition,
        ErrorKind::FinalInconsistent,
        ErrorKind::MissingItem,
    ];

    /// Kinds a task's attempts can actually exhibit.
    pub fn applicable(kind: TaskKind) -> &'static [ErrorKind] {
        match kind {
            TaskKind::MultistepArithmetic => &[
                ErrorKind::Calculation,
                ErrorKind::Copy,
                ErrorKind::Decomposition,
                ErrorKind::FinalInconsistent,
            ],
            TaskKind::WordSorting => &[
                ErrorKind::LetterIndex,
                ErrorKind::SortOrder,
                ErrorKind::Copy,
                ErrorKind::MissingItem,
                ErrorKind::FinalInconsistent,
            ],
            _ => &[ErrorKind::FinalInconsistent, ErrorKind::Copy],
        }
    }
}

/// An injected defect's location: which step it landed on and what kind of
/// error it shows up as. Rationale builders report these so tests and the
/// student simulator know where detection must point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DefectMark {
    pub label: StepLabel,
    pub kind: ErrorKind,
}

/// The phrase whose presence in a feedback marks a trajectory as finished.
pub const TERMINAL_PHRASE: &str = "the final response is correct";

/// Finished-trajectory detector. The canonical terminal sentence says
/// "... the final response is also correct", so both wordings count.
pub fn contains_terminal_phrase(text: &str) -> bool {
    text.contains(TERMINAL_PHRASE) || text.contains("the final response is also correct")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feedback {
    pub terminal: bool,
    /// Label of the last step before the error, if the error is not at the
    /// first step.
    pub last_correct_step: Option<StepLabel>,
    /// Label of the earliest wrong step (`None` for terminal feedback).
    pub error_step: Option<StepLabel>,
    /// Verbatim quote from the wrong step (empty for terminal feedback).
    pub error_segment: String,
    pub reason_kind: Option<ErrorKind>,
    /// Reason sentence body, without the closing period.
    pub reason_text: String,
    /// The full feedback text.
    pub rendered: String,
}

/// Builds the canonical terminal feedback for a finished attempt.
pub fn terminal_feedback(attempt: &Attempt) -> Feedback {
    let x = attempt
        .last_numbered_label()
        .map(|l| l.0.clone())
        .unwrap_or_else(|| "1".to_string());
    let rendered =
        format!("Step 1 to step {x} is correct, and the final response is also correct.");
    Feedback {
        terminal: true,
        last_correct_step: None,
        error_step: None,
        error_segment: String::new(),
        reason_kind: None,
        reason_text: String::new(),
        rendered,
    }
}

/// Builds non-terminal feedback pointing at `error_step`, deriving the
/// last-correct label from the attempt's step order.
pub fn nonterminal_feedback(
    attempt: &Attempt,
    error_step: StepLabel,
    error_segment: String,
    reason_kind: ErrorKind,
    reason_text: String,
) -> Feedback {
    let idx = attempt.position_of(&error_step);
    let last_correct_step = match idx {
        Some(0) | None => None,
        Some(i) => Some(attempt.steps[i - 1].label.clone()),
    };
    let rendered = render_feedback_parts(
        last_correct_step.as_ref(),
        &error_step,
        &error_segment,
        &reason_text,
    );
    Feedback {
        terminal: false,
        last_correct_step,
        error_step: Some(error_step),
        error_segment,
        reason_kind: Some(reason_kind),
        reason_text,
        rendered,
    }
}

/// Renders the non-terminal template from its parts.
pub fn render_feedback_parts(
    last_correct: Option<&StepLabel>,
    error_step: &StepLabel,
    segment: &str,
    reason: &str,
) -> String {
    let mut out = String::new();
    if let Some(k) = last_correct {
        out.push_str(&format!("Step (1) to step {} are correct. ", k.render()));
    }
    out.push_str(&format!(
        "In step {} the part \"{segment}\" is incorrect. This is because {reason}.",
        error_step.render()
    ));
    out
}

/// Re-renders a feedback's text from its fields (used to normalize
/// provider-sourced feedback).
pub fn render_feedback(fb: &Feedback) -> String {
    if fb.terminal {
        return fb.rendered.clone();
    }
    render_feedback_parts(
        fb.last_correct_step.as_ref(),
        fb.error_step.as_ref().expect("non-terminal has a step"),
        &fb.error_segment,
        &fb.reason_text,
    )
}

/// Scripted feedback for tasks that support it: terminal exactly when every
/// check passes and the final answer matches gold, otherwise the earliest
/// located error. An attempt whose text yields zero parsable steps gets
/// feedback at step "1" with a decomposition reason.
pub fn scripted_feedback(inst: &TaskInstance, attempt: &Attempt) -> Result<Feedback> {
    match inst.kind {
        TaskKind::MultistepArithmetic => Ok(crate::arith_check::check_arithmetic(inst, attempt)?),
        TaskKind::WordSorting => Ok(crate::sort_check::check_wordsort(inst, attempt)?),
        other => Err(PipelineError::Kind {
            expected: "a scriptable task",
            got: other.name().into(),
        }),
    }
}

/// Feedback for raw text that may not even contain steps: the degenerate
/// fallback points at step "1".
pub fn scripted_feedback_text(inst: &TaskInstance, text: &str) -> Result<Feedback> {
    match crate::parse::parse_attempt(inst.kind, text) {
        Ok(attempt) => scripted_feedback(inst, &attempt),
        Err(_) => {
            let error_step = StepLabel::new("1");
            let segment = text.lines().next().unwrap_or("").trim().to_string();
            let reason_text =
                "the response does not follow the step-by-step format".to_string();
            let rendered =
                render_feedback_parts(None, &error_step, &segment, &reason_text);
            Ok(Feedback {
                terminal: false,
                last_correct_step: None,
                error_step: Some(error_step),
                error_segment: segment,
                reason_kind: Some(ErrorKind::Decomposition),
                reason_text,
                rendered,
            })
        }
    }
}

/// Keyword classification of a reason sentence into an [`ErrorKind`]; used
/// for provider-sourced feedback and for recovering kinds from emitted
/// training text.
pub fn classify_reason(text: &str) -> ErrorKind {
    let t = text.to_ascii_lowercase();
    if t.contains("calculation error") {
        ErrorKind::Calculation
    } else if t.contains("copy error") {
        ErrorKind::Copy
    } else if t.contains("not sorted") || t.contains("ascending order") {
        ErrorKind::SortOrder
    } else if t.contains("letter of") || t.contains("alphabet index") {
        ErrorKind::LetterIndex
    } else if t.contains("missing") {
        ErrorKind::MissingItem
    } else if t.contains("decompos") || t.contains("follow the step-by-step") {
        ErrorKind::Decomposition
    } else {
        ErrorKind::FinalInconsistent
    }
}
