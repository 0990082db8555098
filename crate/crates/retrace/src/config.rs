//! Run configuration: JSON-backed, with defaults for every field so a
//! config file only needs to state what differs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{PipelineError, Result};
use crate::task::TaskKind;

/// Target share of improvement units in the emitted dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BalanceTarget {
    /// Downsample one side until improvement units make up this share.
    Fixed(f64),
    /// Keep every unit and let the share fall where it falls.
    Auto,
}

/// How many instances to generate per difficulty cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CellCounts {
    pub train_per_seen_cell: usize,
    pub test_per_seen_cell: usize,
    pub test_per_unseen_cell: usize,
    /// Reference demonstrations seeding the unit buffer.
    pub gold_per_seen_cell: usize,
}

impl Default for CellCounts {
    fn default() -> CellCounts {
        CellCounts {
            train_per_seen_cell: 25,
            test_per_seen_cell: 10,
            test_per_unseen_cell: 5,
            gold_per_seen_cell: 5,
        }
    }
}

/// Where feedback and improvements come from during editing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderChoice {
    /// Rule-based checkers (scriptable tasks only).
    Scripted,
    /// External completion endpoint.
    Http { endpoint: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    /// Number of generate–edit–train rounds.
    pub iterations: u32,
    pub balance: BalanceTarget,
    /// Span weight on feedback and revised-attempt spans.
    pub feedback_weight: f64,
    /// Revision rounds per trajectory before giving up.
    pub max_rounds: u32,
    /// Simulated-student learning rate.
    pub eta: f64,
    pub tasks: Vec<TaskKind>,
    pub counts: CellCounts,
    pub provider: ProviderChoice,
    pub out_dir: PathBuf,
    /// Stop scheduling further iterations when an iteration contributes
    /// fewer new improvement units than this.
    pub min_improvements: usize,
    /// Start each iteration's unit buffer fresh instead of accumulating.
    pub fresh_buffer: bool,
}

impl Default for RunConfig {
    fn default() -> RunConfig {
        RunConfig {
            seed: 17,
            iterations: 3,
            balance: BalanceTarget::Fixed(0.43),
            feedback_weight: 1.5,
            max_rounds: 3,
            eta: 0.8,
            tasks: vec![TaskKind::MultistepArithmetic, TaskKind::WordSorting],
            counts: CellCounts::default(),
            provider: ProviderChoice::Scripted,
            out_dir: PathBuf::from("out"),
            min_improvements: 10,
            fresh_buffer: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(PipelineError::Parameter(msg));
        if self.iterations == 0 {
            return bad("iterations must be at least 1".into());
        }
        if !(self.feedback_weight > 0.0) {
            return bad(format!(
                "feedback_weight must be positive, got {}",
                self.feedback_weight
            ));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return bad(format!("eta must lie in (0, 1], got {}", self.eta));
        }
        if let BalanceTarget::Fixed(p) = self.balance {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("balance target must lie in [0, 1], got {p}"));
            }
        }
        if self.max_rounds == 0 {
            return bad("max_rounds must be at least 1".into());
        }
        if self.tasks.is_empty() {
            return bad("at least one task is required".into());
        }
        let mut sorted = self.tasks.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.tasks.len() {
            return bad("tasks must not repeat".into());
        }
        // The loop drives a simulated student, which only produces rationales
        // for the scriptable tasks regardless of the feedback provider.
        if let Some(t) = self.tasks.iter().find(|t| !t.is_scriptable()) {
            return bad(format!(
                "task {} has no scripted rationale generator and cannot run in the loop",
                t.name()
            ));
        }
        if self.counts.train_per_seen_cell == 0 || self.counts.test_per_seen_cell == 0 {
            return bad("train and seen-test counts must be at least 1".into());
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        let cfg: RunConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }
}
