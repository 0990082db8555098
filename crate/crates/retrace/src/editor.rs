//! Interactive trajectory editing.
//!
//! A trajectory alternates attempts and feedback. The editing loop asks the
//! student for its own feedback on its latest attempt; when that agrees
//! structurally with the module feedback (same error step and quoted
//! segment), the student's feedback and improvement are kept. When it does
//! not, the module's feedback is spliced in and the module produces the
//! improvement. Either way the initial attempt is preserved byte-for-byte,
//! so the training data teaches correction of the student's genuine
//! mistakes, not of synthetic ones.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::feedback::{scripted_feedback, Feedback};
use crate::improve::scripted_improve;
use crate::step::Attempt;
use crate::student::Student;
use crate::task::TaskInstance;

/// How a trajectory came to be.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Reference rationale emitted directly (no student involved).
    Gold,
    /// The student's first attempt was already correct.
    DirectlyCorrect,
    /// Built by the editing loop.
    Edited,
    /// Student-only evaluation rollout.
    Inference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajElement {
    Attempt {
        text: String,
        final_answer: Option<String>,
    },
    Feedback {
        feedback: Feedback,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub id: String,
    pub instance_id: String,
    pub provenance: Provenance,
    pub iteration: u32,
    /// Whether the trajectory is usable as training material.
    pub accepted: bool,
    pub reject_reason: Option<String>,
    pub elements: Vec<TrajElement>,
}

impl Trajectory {
    /// Final answer of the last attempt in the trajectory.
    pub fn final_answer(&self) -> Option<&str> {
        self.elements.iter().rev().find_map(|e| match e {
            TrajElement::Attempt { final_answer, .. } => final_answer.as_deref(),
            _ => None,
        })
    }

    /// True when any feedback in the trajectory asked for a revision.
    pub fn improvement_attempted(&self) -> bool {
        self.elements.iter().any(|e| match e {
            TrajElement::Feedback { feedback } => !feedback.terminal,
            _ => false,
        })
    }

    fn push_attempt(&mut self, a: &Attempt) {
        self.elements.push(TrajElement::Attempt {
            text: a.text.clone(),
            final_answer: a.final_answer.clone(),
        });
    }

    fn push_feedback(&mut self, fb: Feedback) {
        self.elements.push(TrajElement::Feedback { feedback: fb });
    }
}

/// Source of authoritative feedback during editing.
pub trait FeedbackModule {
    fn feedback(&self, inst: &TaskInstance, attempt: &Attempt) -> Result<Feedback>;
}

/// Source of authoritative improvements during editing.
pub trait ImproveModule {
    fn improve(&self, inst: &TaskInstance, prev: &Attempt, fb: &Feedback) -> Result<Attempt>;
}

/// Rule-based feedback for the scriptable tasks.
pub struct ScriptedFeedbackModule;

impl FeedbackModule for ScriptedFeedbackModule {
    fn feedback(&self, inst: &TaskInstance, attempt: &Attempt) -> Result<Feedback> {
        scripted_feedback(inst, attempt)
    }
}

/// Rule-based improvement for the scriptable tasks.
pub struct ScriptedImproveModule;

impl ImproveModule for ScriptedImproveModule {
    fn improve(&self, inst: &TaskInstance, prev: &Attempt, fb: &Feedback) -> Result<Attempt> {
        scripted_improve(inst, prev, fb)
    }
}

/// Two non-terminal feedbacks agree when they locate the same step and quote
/// the same segment; the wording of the reason may differ.
pub fn feedback_agrees(own: &Feedback, reference: &Feedback) -> bool {
    !own.terminal
        && !reference.terminal
        && own.error_step == reference.error_step
        && own.error_segment == reference.error_segment
}

/// Runs the editing loop for one instance.
///
/// Accepted trajectories alternate attempt/feedback and end with terminal
/// feedback. Rejected ones end with the non-terminal feedback that could not
/// be acted on (`improvement_failed`) or that remained after the round
/// budget (`max_rounds_exhausted`).
pub fn edit_trajectory(
    inst: &TaskInstance,
    student: &dyn Student,
    fb_module: &dyn FeedbackModule,
    imp_module: &dyn ImproveModule,
    max_rounds: u32,
    iteration: u32,
) -> Result<Trajectory> {
    let sa = student.attempt(inst)?;
    let mut traj = Trajectory {
        id: format!("{}:it{}", inst.id, iteration),
        instance_id: inst.id.clone(),
        provenance: Provenance::Edited,
        iteration,
        accepted: false,
        reject_reason: None,
        elements: Vec::new(),
    };
    traj.push_attempt(&sa.attempt);
    let mut fb_star = fb_module.feedback(inst, &sa.attempt)?;
    if fb_star.terminal {
        traj.provenance = Provenance::DirectlyCorrect;
        traj.accepted = true;
        traj.push_feedback(fb_star);
        return Ok(traj);
    }
    let mut cur = sa.attempt;
    for round in 1..=max_rounds {
        let own = student.self_feedback(inst, &cur, round)?;
        let (fb_used, improved) = if feedback_agrees(&own, &fb_star) {
            let imp = student.self_improve(inst, &cur, &own);
            (own, imp)
        } else {
            let imp = imp_module.improve(inst, &cur, &fb_star);
            (fb_star.clone(), imp)
        };
        traj.push_feedback(fb_used);
        let next = match improved {
            Ok(a) => a,
            Err(_) => {
                traj.reject_reason = Some("improvement_failed".into());
                return Ok(traj);
            }
        };
        traj.push_attempt(&next);
        fb_star = fb_module.feedback(inst, &next)?;
        cur = next;
        if fb_star.terminal {
            traj.push_feedback(fb_star);
            traj.accepted = true;
            return Ok(traj);
        }
    }
    traj.push_feedback(fb_star);
    traj.reject_reason = Some("max_rounds_exhausted".into());
    Ok(traj)
}

/// Student-only rollout used for evaluation: no module ever intervenes.
/// Always ends with a feedback element; `accepted` records whether the
/// student itself declared the trajectory finished.
pub fn inference_trajectory(
    inst: &TaskInstance,
    student: &dyn Student,
    max_rounds: u32,
    tag: &str,
) -> Result<Trajectory> {
    let sa = student.attempt(inst)?;
    let mut traj = Trajectory {
        id: format!("{}:{tag}", inst.id),
        instance_id: inst.id.clone(),
        provenance: Provenance::Inference,
        iteration: 0,
        accepted: false,
        reject_reason: None,
        elements: Vec::new(),
    };
    traj.push_attempt(&sa.attempt);
    let mut cur = sa.attempt;
    let mut round = 0;
    loop {
        let fb = student.self_feedback(inst, &cur, round)?;
        let terminal = fb.terminal;
        traj.push_feedback(fb.clone());
        if terminal {
            traj.accepted = true;
            break;
        }
        if round >= max_rounds {
            break;
        }
        match student.self_improve(inst, &cur, &fb) {
            Err(_) => break,
            Ok(next) => {
                traj.push_attempt(&next);
                cur = next;
                round += 1;
            }
        }
    }
    Ok(traj)
}

/// The reference rationale packaged as a one-pair trajectory, used to seed
/// the training buffer with known-good demonstrations.
pub fn gold_trajectory(inst: &TaskInstance) -> Result<Trajectory> {
    let gold = crate::improve::gold_rationale(inst)?;
    let fb = crate::feedback::terminal_feedback(&gold);
    let mut traj = Trajectory {
        id: format!("{}:gold", inst.id),
        instance_id: inst.id.clone(),
        provenance: Provenance::Gold,
        iteration: 0,
        accepted: true,
        reject_reason: None,
        elements: Vec::new(),
    };
    traj.push_attempt(&gold);
    traj.push_feedback(fb);
    Ok(traj)
}
