//! Seeded synthetic performance tables for demos, tests and benchmarks.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{canonical_id, generate_candidate_ids, CandidateNetwork, PerformanceTable, TaskMask, TaskSet};

/// Full template set (`2^k - 1` full-cost groups plus `k` half-cost
/// singles) with structured losses.
///
/// Each task gets a base loss in `[0.5, 1.5)` and each task pair a random
/// affinity in `[-0.15, 0.15)`. A network's loss on a task is the base loss
/// scaled by one minus the task's mean affinity to its group mates, plus a
/// capacity penalty per extra task and a little noise. Half-size singles pay
/// a fixed penalty.
pub fn template_table(task_set: &TaskSet, full_cost_msnt: u64, half_cost_msnt: u64, seed: u64) -> PerformanceTable {
    let k = task_set.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base: Vec<f64> = (0..k).map(|_| rng.random_range(0.5..1.5)).collect();
    let mut affinity = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in i + 1..k {
            let a = rng.random_range(-0.15..0.15);
            affinity[i][j] = a;
            affinity[j][i] = a;
        }
    }
    let networks = generate_candidate_ids(task_set, full_cost_msnt, half_cost_msnt)
        .into_iter()
        .map(|tpl| {
            let members: Vec<usize> = (0..k).filter(|t| tpl.mask & (1 << t) != 0).collect();
            let g = members.len();
            let losses: Vec<(String, f64)> = members
                .iter()
                .map(|&t| {
                    let mates = members.iter().filter(|&&u| u != t);
                    let effect = if g > 1 {
                        mates.map(|&u| affinity[t][u]).sum::<f64>() / (g - 1) as f64
                    } else {
                        0.0
                    };
                    let capacity = 0.03 * (g - 1) as f64;
                    let size = if tpl.cost_msnt < full_cost_msnt { 0.12 } else { 0.0 };
                    let noise = rng.random_range(-0.02..0.02);
                    let loss = base[t] * (1.0 - effect + capacity + size + noise);
                    (task_set.get(t).expect("in range").to_string(), loss.max(0.0))
                })
                .collect();
            CandidateNetwork::new(tpl.id, tpl.cost_msnt, losses).expect("valid synthetic network")
        })
        .collect();
    PerformanceTable::new(task_set.clone(), networks).expect("templates cover every task")
}

/// Random instance: `candidates` networks, each over a uniformly random
/// non-empty task subset, with a cost drawn from `costs` and losses uniform
/// on `(0, 1)`. Redraws until every task is covered.
pub fn random_table(task_set: &TaskSet, candidates: usize, costs: &[u64], seed: u64) -> PerformanceTable {
    assert!(!costs.is_empty(), "at least one cost");
    assert!(candidates > 0, "at least one candidate");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let full = task_set.full_mask();
    loop {
        let mut seen = HashSet::new();
        let mut covered: TaskMask = 0;
        let mut networks = Vec::with_capacity(candidates);
        for i in 0..candidates {
            let mask = rng.random_range(1..=full);
            let cost = costs[rng.random_range(0..costs.len())];
            covered |= mask;
            let mut id = canonical_id(task_set, mask, cost);
            if !seen.insert(id.clone()) {
                id = format!("{id}#{i}");
                seen.insert(id.clone());
            }
            let losses: Vec<(String, f64)> = task_set
                .tasks_in(mask)
                .into_iter()
                .map(|t| {
                    let mut l: f64 = rng.random();
                    while l == 0.0 {
                        l = rng.random();
                    }
                    (t.to_string(), l)
                })
                .collect();
            networks.push(CandidateNetwork::new(id, cost, losses).expect("valid random network"));
        }
        if covered == full {
            return PerformanceTable::new(task_set.clone(), networks).expect("covered");
        }
    }
}

/// `count` task identifiers `a`, `b`, ... (single letters up to 26).
pub fn letter_tasks(count: usize) -> TaskSet {
    assert!((1..=26).contains(&count), "1..=26 tasks");
    TaskSet::new((0..count).map(|i| char::from(b'a' + i as u8).to_string())).expect("distinct letters")
}
