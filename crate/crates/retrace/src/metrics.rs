//! Evaluation metrics over rollout trajectories.
//!
//! Counts are integers; ratios are derived views. For every report the exact
//! identity `total_correct == directly_correct + si_contrib()` holds: a
//! correct trajectory either solved the problem outright or reached the
//! answer through at least one revision, never both.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::editor::Trajectory;
use crate::error::{PipelineError, Result};
use crate::task::{Split, TaskInstance, TaskKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskReport {
    pub task: TaskKind,
    pub n_seen: usize,
    pub n_unseen: usize,
    pub seen_correct: usize,
    pub unseen_correct: usize,
    /// Trajectories containing at least one revision request.
    pub si_attempts: usize,
    /// Correct trajectories that went through at least one revision.
    pub si_contrib_seen: usize,
    pub si_contrib_unseen: usize,
    /// Correct without any revision request.
    pub directly_correct: usize,
}

impl TaskReport {
    pub fn n_total(&self) -> usize {
        self.n_seen + self.n_unseen
    }

    pub fn total_correct(&self) -> usize {
        self.seen_correct + self.unseen_correct
    }

    pub fn si_contrib(&self) -> usize {
        self.si_contrib_seen + self.si_contrib_unseen
    }

    pub fn seen_accuracy(&self) -> Option<f64> {
        ratio(self.seen_correct, self.n_seen)
    }

    pub fn unseen_accuracy(&self) -> Option<f64> {
        ratio(self.unseen_correct, self.n_unseen)
    }

    /// Sample-weighted accuracy over both splits.
    pub fn total_accuracy(&self) -> Option<f64> {
        ratio(self.total_correct(), self.n_total())
    }

    /// Share of problems where a revision was attempted.
    pub fn si_freq(&self) -> Option<f64> {
        ratio(self.si_attempts, self.n_total())
    }

    /// Share of problems solved thanks to revision.
    pub fn si_contrib_rate(&self) -> Option<f64> {
        ratio(self.si_contrib(), self.n_total())
    }

    pub fn directly_correct_rate(&self) -> Option<f64> {
        ratio(self.directly_correct, self.n_total())
    }
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Scores one trajectory per instance. Every instance must have exactly one
/// trajectory; reports come back ordered by task.
pub fn evaluate(instances: &[TaskInstance], trajs: &[Trajectory]) -> Result<Vec<TaskReport>> {
    let mut by_instance: BTreeMap<&str, &Trajectory> = BTreeMap::new();
    for t in trajs {
        if by_instance.insert(t.instance_id.as_str(), t).is_some() {
            return Err(PipelineError::Data {
                id: t.instance_id.clone(),
                msg: "multiple trajectories for one instance".into(),
            });
        }
    }
    let mut reports: BTreeMap<TaskKind, TaskReport> = BTreeMap::new();
    for inst in instances {
        let traj = by_instance.get(inst.id.as_str()).ok_or_else(|| {
            PipelineError::Data {
                id: inst.id.clone(),
                msg: "no trajectory for instance".into(),
            }
        })?;
        let r = reports.entry(inst.kind).or_insert(TaskReport {
            task: inst.kind,
            n_seen: 0,
            n_unseen: 0,
            seen_correct: 0,
            unseen_correct: 0,
            si_attempts: 0,
            si_contrib_seen: 0,
            si_contrib_unseen: 0,
            directly_correct: 0,
        });
        let correct = traj.final_answer() == Some(inst.gold_answer.as_str());
        let attempted = traj.improvement_attempted();
        match inst.split {
            Split::Seen => {
                r.n_seen += 1;
                if correct {
                    r.seen_correct += 1;
                    if attempted {
                        r.si_contrib_seen += 1;
                    }
                }
            }
            Split::Unseen => {
                r.n_unseen += 1;
                if correct {
                    r.unseen_correct += 1;
                    if attempted {
                        r.si_contrib_unseen += 1;
                    }
                }
            }
        }
        if attempted {
            r.si_attempts += 1;
        }
        if correct && !attempted {
            r.directly_correct += 1;
        }
    }
    Ok(reports.into_values().collect())
}

fn pct(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{:.1}%", 100.0 * x),
        None => "\u{2014}".to_string(),
    }
}

/// Fixed-width text table over the reports.
pub fn render_report_text(reports: &[TaskReport]) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "{:<22} {:>6} {:>8} {:>8} {:>8} {:>9} {:>11} {:>8}",
        "task", "n", "seen", "unseen", "total", "si_freq", "si_contrib", "direct"
    )
    .unwrap();
    for r in reports {
        writeln!(
            out,
            "{:<22} {:>6} {:>8} {:>8} {:>8} {:>9} {:>11} {:>8}",
            r.task.name(),
            r.n_total(),
            pct(r.seen_accuracy()),
            pct(r.unseen_accuracy()),
            pct(r.total_accuracy()),
            pct(r.si_freq()),
            pct(r.si_contrib_rate()),
            pct(r.directly_correct_rate()),
        )
        .unwrap();
    }
    out
}

pub fn write_reports_csv(path: &Path, reports: &[TaskReport]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    for r in reports {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_reports_csv(path: &Path) -> Result<Vec<TaskReport>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in r.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}

/// One row of a balance-parameter sweep: final-iteration metrics at one
/// improvement-share target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub task: TaskKind,
    pub target_share: f64,
    pub si_freq: f64,
    pub si_contrib: f64,
    pub total_accuracy: f64,
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_sweep_csv(path: &Path) -> Result<Vec<SweepRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in r.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}
