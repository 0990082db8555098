//! Helpers shared across the integration suite.
#![allow(dead_code)]

use std::path::PathBuf;

use retrace::error::Result;
use retrace::feedback::{terminal_feedback, Feedback};
use retrace::improve::scripted_improve;
use retrace::step::Attempt;
use retrace::student::{Student, StudentAttempt};
use retrace::task::{load_fixture_instances, TaskInstance};

/// A student that always hands in one fixed attempt and always believes it
/// is finished, forcing the editing loop onto the module path.
pub struct PinnedStudent {
    pub attempt: Attempt,
}

impl Student for PinnedStudent {
    fn attempt(&self, _inst: &TaskInstance) -> Result<StudentAttempt> {
        Ok(StudentAttempt {
            attempt: self.attempt.clone(),
            marks: Vec::new(),
        })
    }
    fn self_feedback(
        &self,
        _inst: &TaskInstance,
        attempt: &Attempt,
        _round: u32,
    ) -> Result<Feedback> {
        Ok(terminal_feedback(attempt))
    }
    fn self_improve(&self, inst: &TaskInstance, prev: &Attempt, fb: &Feedback) -> Result<Attempt> {
        scripted_improve(inst, prev, fb)
    }
}

pub fn testdata(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("testdata")
        .join(name)
}

/// Reads a golden file. The single trailing newline is a storage artifact,
/// not part of the golden text.
pub fn golden(name: &str) -> String {
    let text = std::fs::read_to_string(testdata(name)).unwrap();
    text.strip_suffix('\n').unwrap_or(&text).to_string()
}

pub fn fixtures() -> Vec<TaskInstance> {
    load_fixture_instances(&testdata("instances.jsonl")).unwrap()
}

pub fn fixture(id: &str) -> TaskInstance {
    fixtures()
        .into_iter()
        .find(|i| i.id == id)
        .unwrap_or_else(|| panic!("no fixture instance {id:?}"))
}
