//! File-level pipeline flow: trajectories through splitting, filtering,
//! rebalancing, and emission, with every intermediate surviving a JSONL
//! round trip.

mod common;

use retrace::editor::{
    edit_trajectory, ScriptedFeedbackModule, ScriptedImproveModule, TrajElement, Trajectory,
};
use retrace::emit::{emit_dataset, read_jsonl, write_jsonl, Role, TrainingExample};
use retrace::postprocess::{
    filter_triplets, rebalance, split_trajectories, ImprovementTriplet, TerminalPair,
};
use retrace::rng::stream;
use retrace::student::{SimulatedStudent, StudentProfile};
use retrace::task::{gen_batch, grid_split, Split, TaskInstance, TaskKind};

const TASKS: [TaskKind; 2] = [TaskKind::MultistepArithmetic, TaskKind::WordSorting];

/// Edited trajectories over every seen difficulty cell of both tasks.
fn edited_corpus(seed: u64, per_cell: usize) -> (Vec<TaskInstance>, Vec<Trajectory>) {
    let mut profile = StudentProfile::new(seed, &TASKS);
    for c in profile.competence.values_mut() {
        *c = 0.4;
    }
    let student = SimulatedStudent::new(profile);
    let mut instances = Vec::new();
    for &kind in &TASKS {
        for cell in grid_split(kind, Split::Seen) {
            instances.extend(gen_batch(kind, &cell, seed, per_cell).unwrap());
        }
    }
    let trajs = instances
        .iter()
        .map(|i| {
            edit_trajectory(i, &student, &ScriptedFeedbackModule, &ScriptedImproveModule, 3, 1)
                .unwrap()
        })
        .collect();
    (instances, trajs)
}

#[test]
fn the_full_chain_conserves_counts_and_survives_disk() {
    let (instances, trajs) = edited_corpus(31, 4);
    let dir = tempfile::tempdir().unwrap();

    // Trajectories round-trip (enum payloads, optional fields and all).
    let traj_path = dir.path().join("trajectories.jsonl");
    write_jsonl(&traj_path, &trajs).unwrap();
    let trajs_back: Vec<Trajectory> = read_jsonl(&traj_path).unwrap();
    assert_eq!(trajs_back, trajs);

    // Split: one unit per attempt element, exactly one pair per accepted
    // trajectory (edits always end terminal with the scripted modules).
    let accepted: Vec<Trajectory> = trajs.into_iter().filter(|t| t.accepted).collect();
    assert_eq!(accepted.len(), instances.len());
    let attempts: usize = accepted
        .iter()
        .flat_map(|t| &t.elements)
        .filter(|e| matches!(e, TrajElement::Attempt { .. }))
        .count();
    let (triplets, pairs) = split_trajectories(&accepted, &instances).unwrap();
    assert_eq!(triplets.len() + pairs.len(), attempts);
    assert_eq!(pairs.len(), accepted.len());
    assert!(!triplets.is_empty(), "some students must have needed editing");

    // Units round-trip.
    let tri_path = dir.path().join("triplets.jsonl");
    let pair_path = dir.path().join("pairs.jsonl");
    write_jsonl(&tri_path, &triplets).unwrap();
    write_jsonl(&pair_path, &pairs).unwrap();
    let tri_back: Vec<ImprovementTriplet> = read_jsonl(&tri_path).unwrap();
    let pair_back: Vec<TerminalPair> = read_jsonl(&pair_path).unwrap();
    assert_eq!(tri_back, triplets);
    assert_eq!(pair_back, pairs);

    // A corpus produced by the scripted editor is already sound: the filter
    // keeps every unit.
    let n = triplets.len();
    let (kept, tally) = filter_triplets(triplets, &instances);
    assert_eq!(kept.len(), n, "dropped units: {tally:?}");
    assert_eq!(tally.dropped(), 0);

    // Rebalance to the configured share, then emit.
    let mut r = stream(31, &["rebalance", "1"]);
    let (t2, p2) = rebalance(kept, pairs, 0.43, &mut r).unwrap();
    let total = t2.len() + p2.len();
    let achieved = t2.len() as f64 / total as f64;
    assert!((achieved - 0.43).abs() <= 0.5 / total as f64 + 1e-12);

    let examples = emit_dataset(&t2, &p2, 1.5).unwrap();
    assert_eq!(examples.len(), total);

    // Both tasks and the split labels make it into the final dataset.
    for &kind in &TASKS {
        assert!(examples.iter().any(|e| e.task == kind));
    }
    assert!(examples.iter().all(|e| e.split == Split::Seen));

    // Dataset bytes are stable across rewrites and lossless on read.
    let ds_path = dir.path().join("dataset.jsonl");
    write_jsonl(&ds_path, &examples).unwrap();
    let first = std::fs::read(&ds_path).unwrap();
    let back: Vec<TrainingExample> = read_jsonl(&ds_path).unwrap();
    assert_eq!(back, examples);
    write_jsonl(&ds_path, &back).unwrap();
    assert_eq!(std::fs::read(&ds_path).unwrap(), first);
}

#[test]
fn emitted_weights_survive_serialization() {
    let (instances, trajs) = edited_corpus(32, 2);
    let (triplets, pairs) = split_trajectories(&trajs, &instances).unwrap();
    let examples = emit_dataset(&triplets, &pairs, 1.5).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("weighted.jsonl");
    write_jsonl(&path, &examples).unwrap();
    let back: Vec<TrainingExample> = read_jsonl(&path).unwrap();
    for ex in &back {
        for s in &ex.spans {
            let expected = match s.role {
                Role::Feedback | Role::UpdatedAttempt => 1.5,
                _ => 1.0,
            };
            assert_eq!(s.weight, expected);
        }
    }
    // The weight is visible in the raw bytes, not an in-memory artifact.
    let raw = std::fs::read_to_string(&path).unwrap();
    assert!(raw.contains("\"weight\":1.5"));
}

#[test]
fn whole_pipeline_is_reproducible_from_the_seed() {
    let once = || {
        let (instances, trajs) = edited_corpus(33, 3);
        let (triplets, pairs) = split_trajectories(&trajs, &instances).unwrap();
        let (kept, _) = filter_triplets(triplets, &instances);
        let mut r = stream(33, &["rebalance", "1"]);
        let (t2, p2) = rebalance(kept, pairs, 0.43, &mut r).unwrap();
        emit_dataset(&t2, &p2, 1.5).unwrap()
    };
    let a = once();
    let b = once();
    assert_eq!(a, b);
    let sa = serde_json::to_string(&a).unwrap();
    let sb = serde_json::to_string(&b).unwrap();
    assert_eq!(sa, sb);
}
