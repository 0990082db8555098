//! Staged run orchestration with checkpoint/resume.
//!
//! A run is a fixed stage list: `gen` and a baseline `eval_0`, then per
//! iteration `traj_t` (collect edited trajectories), `post_t` (split,
//! filter, rebalance, emit the dataset), `train_t` (update the student),
//! and `eval_t`. Every artifact a stage writes is hashed into `state.json`;
//! resuming verifies those hashes before continuing. All randomness is
//! purpose-keyed by the run seed, so a resumed run produces byte-identical
//! artifacts to an uninterrupted one.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{BalanceTarget, ProviderChoice, RunConfig};
use crate::editor::{
    edit_trajectory, gold_trajectory, inference_trajectory, FeedbackModule, ImproveModule,
    ScriptedFeedbackModule, ScriptedImproveModule, Trajectory,
};
use crate::emit::{emit_dataset, read_jsonl, write_jsonl, TrainingExample};
use crate::error::{PipelineError, Result};
use crate::metrics::{
    evaluate, read_reports_csv, render_report_text, write_reports_csv, write_sweep_csv, SweepRow,
};
use crate::postprocess::{
    filter_triplets, rebalance, rebalance_auto, split_trajectories, FilterTally,
    ImprovementTriplet, TerminalPair,
};
use crate::provider::{HttpProvider, RemoteFeedbackModule, RemoteImproveModule};
use crate::rng::{derive_seed, stream};
use crate::student::{train_update, SimulatedStudent, StudentProfile};
use crate::task::{gen_batch, grid_split, Split, TaskInstance};

/// Progress ledger persisted as `state.json` in the run directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunState {
    pub completed: Vec<String>,
    /// sha256 of every artifact written so far, keyed by path relative to
    /// the run directory.
    pub hashes: BTreeMap<String, String>,
    /// Set when an iteration contributed too few new improvement units;
    /// later iterations are skipped.
    pub stopped_after_iteration: Option<u32>,
}

/// Per-iteration bookkeeping persisted as `stats.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationStats {
    pub iteration: u32,
    /// Improvement units contributed by this iteration, after filtering.
    pub new_triplets: usize,
    pub new_pairs: usize,
    pub filter: FilterTally,
    pub buffer_triplets: usize,
    pub buffer_pairs: usize,
    pub dataset_triplets: usize,
    pub dataset_pairs: usize,
    /// Achieved share of improvement units in the emitted dataset.
    pub achieved_share: f64,
    pub low_improvements: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOutcome {
    /// False when the run was deliberately stopped after a named stage.
    pub finished: bool,
    /// Largest iteration with a completed evaluation.
    pub last_eval: u32,
}

/// File layout of a run directory.
pub struct Paths {
    root: PathBuf,
}

impl Paths {
    pub fn new(root: &Path) -> Paths {
        Paths {
            root: root.to_path_buf(),
        }
    }

    pub fn config(&self) -> PathBuf {
        self.root.join("config.json")
    }
    pub fn state(&self) -> PathBuf {
        self.root.join("state.json")
    }
    pub fn instances(&self) -> PathBuf {
        self.root.join("instances.jsonl")
    }
    pub fn test_instances(&self) -> PathBuf {
        self.root.join("test_instances.jsonl")
    }
    pub fn gold_instances(&self) -> PathBuf {
        self.root.join("gold_instances.jsonl")
    }
    pub fn gold_trajectories(&self) -> PathBuf {
        self.root.join("gold.jsonl")
    }
    pub fn iter_dir(&self, t: u32) -> PathBuf {
        self.root.join(format!("iter_{t}"))
    }
    /// Profile produced by iteration `t` (0 is the untrained student).
    pub fn profile(&self, t: u32) -> PathBuf {
        if t == 0 {
            self.root.join("profile_0.json")
        } else {
            self.iter_dir(t).join("profile.json")
        }
    }
    pub fn trajectories(&self, t: u32) -> PathBuf {
        self.iter_dir(t).join("trajectories.jsonl")
    }
    pub fn eval_trajectories(&self, t: u32) -> PathBuf {
        self.iter_dir(t).join("eval_trajectories.jsonl")
    }
    pub fn buffer_triplets(&self, t: u32) -> PathBuf {
        self.iter_dir(t).join("buffer_triplets.jsonl")
    }
    pub fn buffer_pairs(&self, t: u32) -> PathBuf {
        self.iter_dir(t).join("buffer_pairs.jsonl")
    }
    pub fn dataset(&self, t: u32) -> PathBuf {
        self.iter_dir(t).join("dataset.jsonl")
    }
    pub fn report_csv(&self, t: u32) -> PathBuf {
        self.iter_dir(t).join("report.csv")
    }
    pub fn report_txt(&self, t: u32) -> PathBuf {
        self.iter_dir(t).join("report.txt")
    }
    pub fn stats(&self, t: u32) -> PathBuf {
        self.iter_dir(t).join("stats.json")
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

fn file_hash(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    let mut h = Sha256::new();
    h.update(&bytes);
    Ok(format!("{:x}", h.finalize()))
}

/// The full stage list for a run of `iterations` rounds.
pub fn stage_list(iterations: u32) -> Vec<String> {
    let mut v = vec!["gen".to_string(), "eval_0".to_string()];
    for t in 1..=iterations {
        v.push(format!("traj_{t}"));
        v.push(format!("post_{t}"));
        v.push(format!("train_{t}"));
        v.push(format!("eval_{t}"));
    }
    v
}

fn stage_iteration(stage: &str) -> u32 {
    stage
        .rsplit('_')
        .next()
        .and_then(|s| s.parse().ok())
        .unwrap_or(0)
}

struct Runner<'a> {
    cfg: &'a RunConfig,
    paths: Paths,
    state: RunState,
}

impl Runner<'_> {
    fn record(&mut self, files: &[PathBuf]) -> Result<()> {
        for f in files {
            let rel = f
                .strip_prefix(&self.paths.root)
                .unwrap_or(f)
                .to_string_lossy()
                .into_owned();
            self.state.hashes.insert(rel, file_hash(f)?);
        }
        Ok(())
    }

    fn verify(&self) -> Result<()> {
        for (rel, expect) in &self.state.hashes {
            let path = self.paths.root.join(rel);
            let got = file_hash(&path).map_err(|_| {
                PipelineError::Integrity(format!("artifact {rel} is missing"))
            })?;
            if got != *expect {
                return Err(PipelineError::Integrity(format!(
                    "artifact {rel} changed on disk since it was written"
                )));
            }
        }
        Ok(())
    }

    fn execute(&mut self, stage: &str) -> Result<()> {
        match stage {
            "gen" => self.stage_gen(),
            s if s.starts_with("eval_") => self.stage_eval(stage_iteration(s)),
            s if s.starts_with("traj_") => self.stage_traj(stage_iteration(s)),
            s if s.starts_with("post_") => self.stage_post(stage_iteration(s)),
            s if s.starts_with("train_") => self.stage_train(stage_iteration(s)),
            other => Err(PipelineError::Parameter(format!("unknown stage {other}"))),
        }
    }

    fn stage_gen(&mut self) -> Result<()> {
        let cfg = self.cfg;
        self.cfg.save(&self.paths.config())?;
        let mut train = Vec::new();
        let mut test = Vec::new();
        let mut gold_instances = Vec::new();
        for &task in &cfg.tasks {
            for cell in grid_split(task, Split::Seen) {
                train.extend(gen_batch(
                    task,
                    &cell,
                    derive_seed(cfg.seed, &["train"]),
                    cfg.counts.train_per_seen_cell,
                )?);
                test.extend(gen_batch(
                    task,
                    &cell,
                    derive_seed(cfg.seed, &["test"]),
                    cfg.counts.test_per_seen_cell,
                )?);
                if cfg.counts.gold_per_seen_cell > 0 {
                    gold_instances.extend(gen_batch(
                        task,
                        &cell,
                        derive_seed(cfg.seed, &["gold"]),
                        cfg.counts.gold_per_seen_cell,
                    )?);
                }
            }
            if cfg.counts.test_per_unseen_cell > 0 {
                for cell in grid_split(task, Split::Unseen) {
                    test.extend(gen_batch(
                        task,
                        &cell,
                        derive_seed(cfg.seed, &["test"]),
                        cfg.counts.test_per_unseen_cell,
                    )?);
                }
            }
        }
        let gold_trajs = gold_instances
            .iter()
            .map(gold_trajectory)
            .collect::<Result<Vec<_>>>()?;
        let profile = StudentProfile::new(cfg.seed, &cfg.tasks);
        write_jsonl(&self.paths.instances(), &train)?;
        write_jsonl(&self.paths.test_instances(), &test)?;
        write_jsonl(&self.paths.gold_instances(), &gold_instances)?;
        write_jsonl(&self.paths.gold_trajectories(), &gold_trajs)?;
        write_json(&self.paths.profile(0), &profile)?;
        self.record(&[
            self.paths.config(),
            self.paths.instances(),
            self.paths.test_instances(),
            self.paths.gold_instances(),
            self.paths.gold_trajectories(),
            self.paths.profile(0),
        ])
    }

    fn stage_eval(&mut self, t: u32) -> Result<()> {
        let test: Vec<TaskInstance> = read_jsonl(&self.paths.test_instances())?;
        let profile: StudentProfile = read_json(&self.paths.profile(t))?;
        let student = SimulatedStudent::new(profile);
        let tag = format!("eval{t}");
        let trajs = test
            .iter()
            .map(|i| inference_trajectory(i, &student, self.cfg.max_rounds, &tag))
            .collect::<Result<Vec<_>>>()?;
        let reports = evaluate(&test, &trajs)?;
        write_jsonl(&self.paths.eval_trajectories(t), &trajs)?;
        write_reports_csv(&self.paths.report_csv(t), &reports)?;
        std::fs::write(self.paths.report_txt(t), render_report_text(&reports))?;
        self.record(&[
            self.paths.eval_trajectories(t),
            self.paths.report_csv(t),
            self.paths.report_txt(t),
        ])
    }

    fn stage_traj(&mut self, t: u32) -> Result<()> {
        let instances: Vec<TaskInstance> = read_jsonl(&self.paths.instances())?;
        let profile: StudentProfile = read_json(&self.paths.profile(t - 1))?;
        let student = SimulatedStudent::new(profile);
        let max_rounds = self.cfg.max_rounds;
        let trajs = with_modules(self.cfg, |fb, imp| {
            instances
                .iter()
                .map(|i| edit_trajectory(i, &student, fb, imp, max_rounds, t))
                .collect::<Result<Vec<_>>>()
        })?;
        write_jsonl(&self.paths.trajectories(t), &trajs)?;
        self.record(&[self.paths.trajectories(t)])
    }

    fn stage_post(&mut self, t: u32) -> Result<()> {
        let cfg = self.cfg;
        let instances: Vec<TaskInstance> = read_jsonl(&self.paths.instances())?;
        let trajs: Vec<Trajectory> = read_jsonl(&self.paths.trajectories(t))?;
        let accepted: Vec<Trajectory> = trajs.into_iter().filter(|x| x.accepted).collect();
        let (raw_triplets, new_pairs) = split_trajectories(&accepted, &instances)?;
        let (new_triplets, tally) = filter_triplets(raw_triplets, &instances);

        let (mut buf_t, mut buf_p): (Vec<ImprovementTriplet>, Vec<TerminalPair>) = if t == 1 {
            // Seed the buffer with the reference demonstrations.
            let gold_instances: Vec<TaskInstance> = read_jsonl(&self.paths.gold_instances())?;
            let gold_trajs: Vec<Trajectory> = read_jsonl(&self.paths.gold_trajectories())?;
            split_trajectories(&gold_trajs, &gold_instances)?
        } else if cfg.fresh_buffer {
            (Vec::new(), Vec::new())
        } else {
            (
                read_jsonl(&self.paths.buffer_triplets(t - 1))?,
                read_jsonl(&self.paths.buffer_pairs(t - 1))?,
            )
        };
        buf_t.extend(new_triplets.iter().cloned());
        buf_p.extend(new_pairs.iter().cloned());
        write_jsonl(&self.paths.buffer_triplets(t), &buf_t)?;
        write_jsonl(&self.paths.buffer_pairs(t), &buf_p)?;

        let (ds_t, ds_p) = match cfg.balance {
            BalanceTarget::Fixed(p) => {
                let mut r = stream(cfg.seed, &["rebalance", &t.to_string()]);
                rebalance(buf_t.clone(), buf_p.clone(), p, &mut r)?
            }
            BalanceTarget::Auto => {
                rebalance_auto(&buf_t, &buf_p)?;
                (buf_t.clone(), buf_p.clone())
            }
        };
        let achieved = ds_t.len() as f64 / (ds_t.len() + ds_p.len()).max(1) as f64;
        let mut examples = emit_dataset(&ds_t, &ds_p, cfg.feedback_weight)?;
        examples.shuffle(&mut stream(cfg.seed, &["shuffle", &t.to_string()]));
        write_jsonl(&self.paths.dataset(t), &examples)?;

        let low = new_triplets.len() < cfg.min_improvements;
        let stats = IterationStats {
            iteration: t,
            new_triplets: new_triplets.len(),
            new_pairs: new_pairs.len(),
            filter: tally,
            buffer_triplets: buf_t.len(),
            buffer_pairs: buf_p.len(),
            dataset_triplets: ds_t.len(),
            dataset_pairs: ds_p.len(),
            achieved_share: achieved,
            low_improvements: low,
        };
        write_json(&self.paths.stats(t), &stats)?;
        if low && self.state.stopped_after_iteration.is_none() {
            self.state.stopped_after_iteration = Some(t);
        }
        self.record(&[
            self.paths.buffer_triplets(t),
            self.paths.buffer_pairs(t),
            self.paths.dataset(t),
            self.paths.stats(t),
        ])
    }

    fn stage_train(&mut self, t: u32) -> Result<()> {
        let dataset: Vec<TrainingExample> = read_jsonl(&self.paths.dataset(t))?;
        let profile: StudentProfile = read_json(&self.paths.profile(t - 1))?;
        let next = train_update(&profile, &dataset, self.cfg.eta)?;
        write_json(&self.paths.profile(t), &next)?;
        self.record(&[self.paths.profile(t)])
    }
}

/// Runs editing with the configured feedback/improvement source.
fn with_modules<R>(
    cfg: &RunConfig,
    f: impl FnOnce(&dyn FeedbackModule, &dyn ImproveModule) -> Result<R>,
) -> Result<R> {
    match &cfg.provider {
        ProviderChoice::Scripted => f(&ScriptedFeedbackModule, &ScriptedImproveModule),
        ProviderChoice::Http { endpoint } => {
            let http = HttpProvider::new(endpoint.clone());
            f(
                &RemoteFeedbackModule { client: &http },
                &RemoteImproveModule { client: &http },
            )
        }
    }
}

/// Runs every remaining stage, optionally stopping after a named one (used
/// to test interruption). Picks up from `state.json` when one exists.
pub fn run_until(cfg: &RunConfig, stop_after: Option<&str>) -> Result<RunOutcome> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    let paths = Paths::new(&cfg.out_dir);
    let state = if paths.state().exists() {
        let state: RunState = read_json(&paths.state())?;
        // A partially complete run must be continued with the exact config
        // it started with.
        if !state.completed.is_empty() {
            let mut expect = serde_json::to_string_pretty(cfg)?;
            expect.push('\n');
            let on_disk = std::fs::read_to_string(paths.config())?;
            if expect != on_disk {
                return Err(PipelineError::Integrity(
                    "the run directory was started with a different config".into(),
                ));
            }
        }
        state
    } else {
        RunState::default()
    };
    let mut runner = Runner { cfg, paths, state };
    runner.verify()?;
    for stage in stage_list(cfg.iterations) {
        if runner.state.completed.iter().any(|s| s == &stage) {
            continue;
        }
        if let Some(stop_iter) = runner.state.stopped_after_iteration {
            if stage_iteration(&stage) > stop_iter {
                continue;
            }
        }
        runner.execute(&stage)?;
        runner.state.completed.push(stage.clone());
        write_json(&runner.paths.state(), &runner.state)?;
        if stop_after == Some(stage.as_str()) {
            return Ok(RunOutcome {
                finished: false,
                last_eval: last_eval(&runner.state),
            });
        }
    }
    Ok(RunOutcome {
        finished: true,
        last_eval: last_eval(&runner.state),
    })
}

fn last_eval(state: &RunState) -> u32 {
    state
        .completed
        .iter()
        .filter_map(|s| s.strip_prefix("eval_"))
        .filter_map(|s| s.parse::<u32>().ok())
        .max()
        .unwrap_or(0)
}

/// Runs a configuration to completion.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome> {
    run_until(cfg, None)
}

/// Resumes the run living in `dir`, verifying artifact integrity first.
pub fn resume(dir: &Path) -> Result<RunOutcome> {
    let mut cfg = RunConfig::load(&Paths::new(dir).config())?;
    cfg.out_dir = dir.to_path_buf();
    run_until(&cfg, None)
}

/// Runs the loop once per balance target (same seed throughout) and collects
/// final-iteration metrics into `sweep.csv` under the base out dir.
pub fn sweep(cfg: &RunConfig, targets: &[f64]) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for &p in targets {
        let mut sub = cfg.clone();
        sub.balance = BalanceTarget::Fixed(p);
        sub.out_dir = cfg.out_dir.join(format!("share_{p}"));
        let outcome = run(&sub)?;
        let reports = read_reports_csv(&Paths::new(&sub.out_dir).report_csv(outcome.last_eval))?;
        for r in reports {
            rows.push(SweepRow {
                task: r.task,
                target_share: p,
                si_freq: r.si_freq().unwrap_or(0.0),
                si_contrib: r.si_contrib_rate().unwrap_or(0.0),
                total_accuracy: r.total_accuracy().unwrap_or(0.0),
            });
        }
    }
    write_sweep_csv(&cfg.out_dir.join("sweep.csv"), &rows)?;
    Ok(rows)
}
