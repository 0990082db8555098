//! Training-example emission: weighted spans and JSONL round-tripping.
//!
//! Each training unit becomes one example made of contiguous spans. Question
//! and attempt spans carry weight 1.0; for improvement units the feedback
//! and the revised attempt (including their `Feedback: ` / `Updated
//! Answer: ` lead-ins) carry the configured span weight, which is how the
//! trainer is told to emphasize the correction behaviour. Concatenating the
//! span texts in order reproduces the exact text a trainer would consume.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write as _};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{PipelineError, Result};
use crate::postprocess::{ImprovementTriplet, TerminalPair};
use crate::task::{Split, TaskKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Question,
    InitAttempt,
    Feedback,
    UpdatedAttempt,
    TerminalFeedback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Span {
    pub role: Role,
    pub text: String,
    pub weight: f64,
}

impl Span {
    pub fn new(role: Role, text: impl Into<String>, weight: f64) -> Span {
        Span {
            role,
            text: text.into(),
            weight,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingExample {
    pub id: String,
    pub task: TaskKind,
    pub split: Split,
    pub spans: Vec<Span>,
}

impl TrainingExample {
    /// The exact text a trainer would consume: span texts concatenated in
    /// order, nothing added, nothing dropped.
    pub fn serialized_text(&self) -> String {
        self.spans.iter().map(|s| s.text.as_str()).collect()
    }
}

/// Builds the example for one improvement unit. `k` distinguishes multiple
/// units cut from the same trajectory.
pub fn triplet_example(t: &ImprovementTriplet, k: usize, weight: f64) -> TrainingExample {
    TrainingExample {
        id: format!("{}#imp{k}", t.source_id),
        task: t.task,
        split: t.split,
        spans: vec![
            Span::new(Role::Question, format!("{}\n", t.question), 1.0),
            Span::new(Role::InitAttempt, format!("Answer: {}\n", t.attempt_text), 1.0),
            Span::new(
                Role::Feedback,
                format!("Feedback: {}\n", t.feedback.rendered),
                weight,
            ),
            Span::new(
                Role::UpdatedAttempt,
                format!("Updated Answer: {}", t.updated_text),
                weight,
            ),
        ],
    }
}

/// Builds the example for one terminal pair; all spans carry weight 1.0.
pub fn pair_example(p: &TerminalPair) -> TrainingExample {
    TrainingExample {
        id: format!("{}#t", p.source_id),
        task: p.task,
        split: p.split,
        spans: vec![
            Span::new(Role::Question, format!("{}\n", p.question), 1.0),
            Span::new(Role::InitAttempt, format!("Answer: {}\n", p.attempt_text), 1.0),
            Span::new(
                Role::TerminalFeedback,
                format!("Feedback: {}", p.feedback.rendered),
                1.0,
            ),
        ],
    }
}

/// Emits every unit as a training example, improvement units first, in
/// input order. (Callers wanting a shuffled dataset shuffle the result.)
pub fn emit_dataset(
    triplets: &[ImprovementTriplet],
    pairs: &[TerminalPair],
    weight: f64,
) -> Result<Vec<TrainingExample>> {
    if !(weight > 0.0) {
        return Err(PipelineError::Parameter(format!(
            "span weight must be positive, got {weight}"
        )));
    }
    let mut per_source: std::collections::BTreeMap<&str, usize> = Default::default();
    let mut out = Vec::with_capacity(triplets.len() + pairs.len());
    for t in triplets {
        let k = per_source.entry(t.source_id.as_str()).or_insert(0);
        out.push(triplet_example(t, *k, weight));
        *k += 1;
    }
    for p in pairs {
        out.push(pair_example(p));
    }
    Ok(out)
}

/// Writes items as JSON Lines with a trailing newline per line.
pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = BufWriter::new(File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a JSON Lines file written by [`write_jsonl`]; blank lines are
/// ignored, anything else must deserialize.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::editor::{edit_trajectory, ScriptedFeedbackModule, ScriptedImproveModule};
    use crate::postprocess::split_trajectories;
    use crate::student::{SimulatedStudent, StudentProfile};
    use crate::task::{gen_batch, SubtaskParams, TaskInstance};

    fn units() -> (Vec<ImprovementTriplet>, Vec<TerminalPair>) {
        let mut instances = gen_batch(
            TaskKind::MultistepArithmetic,
            &SubtaskParams::with_depth(3, 2),
            5,
            6,
        )
        .unwrap();
        instances
            .extend(gen_batch(TaskKind::WordSorting, &SubtaskParams::new(3), 5, 6).unwrap());
        let mut profile = StudentProfile::new(
            13,
            &[TaskKind::MultistepArithmetic, TaskKind::WordSorting],
        );
        for c in profile.competence.values_mut() {
            *c = 0.5;
        }
        let student = SimulatedStudent::new(profile);
        let trajs: Vec<_> = instances
            .iter()
            .map(|i: &TaskInstance| {
                edit_trajectory(
                    i,
                    &student,
                    &ScriptedFeedbackModule,
                    &ScriptedImproveModule,
                    3,
                    1,
                )
                .unwrap()
            })
            .collect();
        split_trajectories(&trajs, &instances).unwrap()
    }

    #[test]
    fn spans_partition_the_serialized_text() {
        let (triplets, pairs) = units();
        let examples = emit_dataset(&triplets, &pairs, 1.5).unwrap();
        assert_eq!(examples.len(), triplets.len() + pairs.len());
        for ex in &examples {
            let text = ex.serialized_text();
            let total: usize = ex.spans.iter().map(|s| s.text.len()).sum();
            assert_eq!(total, text.len());
            let mut offset = 0;
            for s in &ex.spans {
                assert_eq!(&text[offset..offset + s.text.len()], s.text);
                offset += s.text.len();
            }
        }
    }

    #[test]
    fn weights_land_on_feedback_and_revision_only() {
        let (triplets, pairs) = units();
        assert!(!triplets.is_empty());
        let examples = emit_dataset(&triplets, &pairs, 2.5).unwrap();
        for ex in &examples {
            for s in &ex.spans {
                let expected = match s.role {
                    Role::Feedback | Role::UpdatedAttempt => 2.5,
                    _ => 1.0,
                };
                assert_eq!(s.weight, expected, "{}", ex.id);
                match s.role {
                    Role::Feedback | Role::TerminalFeedback => {
                        assert!(s.text.starts_with("Feedback: "))
                    }
                    Role::UpdatedAttempt => assert!(s.text.starts_with("Updated Answer: ")),
                    Role::InitAttempt => assert!(s.text.starts_with("Answer: ")),
                    Role::Question => assert!(s.text.starts_with("Q: ")),
                }
            }
        }
        // Weight 1.0 gives a flat example.
        let flat = emit_dataset(&triplets, &pairs, 1.0).unwrap();
        assert!(flat
            .iter()
            .flat_map(|e| &e.spans)
            .all(|s| s.weight == 1.0));
        assert!(emit_dataset(&triplets, &pairs, 0.0).is_err());
    }

    #[test]
    fn ids_are_unique_and_name_their_source() {
        let (triplets, pairs) = units();
        let examples = emit_dataset(&triplets, &pairs, 1.5).unwrap();
        let mut seen = std::collections::BTreeSet::new();
        for ex in &examples {
            assert!(seen.insert(ex.id.clone()), "duplicate id {}", ex.id);
            assert!(ex.id.contains("#imp") || ex.id.ends_with("#t"));
        }
    }

    #[test]
    fn jsonl_round_trip_is_lossless_and_deterministic() {
        let (triplets, pairs) = units();
        let examples = emit_dataset(&triplets, &pairs, 1.5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dataset.jsonl");
        write_jsonl(&path, &examples).unwrap();
        let back: Vec<TrainingExample> = read_jsonl(&path).unwrap();
        assert_eq!(back, examples);
        let bytes1 = std::fs::read(&path).unwrap();
        write_jsonl(&path, &examples).unwrap();
        let bytes2 = std::fs::read(&path).unwrap();
        assert_eq!(bytes1, bytes2);
    }
}
