//! Cheaper ways to feed the selector: predicting higher-order networks from
//! pairs, selecting on an early-stopped proxy table, and the bookkeeping of
//! how much training each strategy needs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;
use thiserror::Error;

use crate::model::{canonical_id, CandidateNetwork, ModelError, PerformanceTable, TaskMask};
use crate::solver::{solve_optimal, Budget, SolveError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ApproxError {
    #[error("group needs at least 3 tasks, got {0}")]
    GroupTooSmall(usize),
    #[error("unknown task {0:?} in group")]
    UnknownTask(String),
    #[error("no trained pair network for {0}&{1} at the requested cost")]
    MissingPairNetwork(String, String),
    #[error("no trained pair networks to infer the full network cost from")]
    NoPairNetworks,
    #[error("proxy and final tables differ: {0}")]
    TableMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Trained networks plus networks whose losses were predicted rather than
/// measured. Predicted losses are estimates used for selection only.
#[derive(Debug, Clone)]
pub struct PredictedTable {
    pub base: PerformanceTable,
    pub predicted: Vec<CandidateNetwork>,
}

impl PredictedTable {
    pub fn is_predicted(&self, id: &str) -> bool {
        self.predicted.iter().any(|n| n.id() == id)
    }

    /// Trained and predicted networks in one table.
    pub fn combined(&self) -> Result<PerformanceTable, ModelError> {
        let mut networks = self.base.networks().to_vec();
        networks.extend(self.predicted.iter().cloned());
        PerformanceTable::new(self.base.task_set().clone(), networks)
    }
}

/// Pair network over exactly `{a, b}` at `cost_msnt`; the smallest id wins
/// if there are several.
fn pair_network(base: &PerformanceTable, mask: TaskMask, cost_msnt: u64) -> Option<usize> {
    (0..base.len())
        .filter(|&n| base.coverage(n) == mask && base.cost(n) == cost_msnt)
        .min_by(|&a, &b| base.network(a).id().cmp(base.network(b).id()))
}

/// Predict a network over `group` (3+ tasks): each task's loss is the mean of
/// its losses in the group's pair networks at `cost_msnt`.
pub fn hoa_predict<S: AsRef<str>>(
    base: &PerformanceTable,
    group: &[S],
    cost_msnt: u64,
) -> Result<CandidateNetwork, ApproxError> {
    let ts = base.task_set();
    let mut mask: TaskMask = 0;
    for t in group {
        let i = ts
            .index_of(t.as_ref())
            .ok_or_else(|| ApproxError::UnknownTask(t.as_ref().to_string()))?;
        mask |= 1 << i;
    }
    let members: Vec<usize> = (0..ts.len()).filter(|i| mask & (1 << i) != 0).collect();
    if members.len() < 3 {
        return Err(ApproxError::GroupTooSmall(members.len()));
    }
    let mut losses = Vec::with_capacity(members.len());
    for &t in &members {
        let mut sum = 0.0;
        for &u in members.iter().filter(|&&u| u != t) {
            let pair = pair_network(base, (1 << t) | (1 << u), cost_msnt).ok_or_else(|| {
                let (a, b) = (t.min(u), t.max(u));
                ApproxError::MissingPairNetwork(
                    ts.get(a).unwrap_or_default().to_string(),
                    ts.get(b).unwrap_or_default().to_string(),
                )
            })?;
            sum += base.loss(pair, t).expect("pair network covers both tasks");
        }
        let task = ts.get(t).expect("index in range").to_string();
        losses.push((task, sum / (members.len() - 1) as f64));
    }
    Ok(CandidateNetwork::new(canonical_id(ts, mask, cost_msnt), cost_msnt, losses)?)
}

/// Cost shared by the trained pair networks, taken as the full network cost.
fn full_cost(base: &PerformanceTable) -> Result<u64, ApproxError> {
    (0..base.len())
        .filter(|&n| base.coverage(n).count_ones() == 2)
        .map(|n| base.cost(n))
        .max()
        .ok_or(ApproxError::NoPairNetworks)
}

/// Predict every group of 3+ tasks that has no trained network at full cost.
pub fn hoa_extend(base: &PerformanceTable) -> Result<PredictedTable, ApproxError> {
    let cost = full_cost(base)?;
    let ts = base.task_set();
    let mut groups: Vec<TaskMask> = (1..=ts.full_mask()).filter(|m| m.count_ones() >= 3).collect();
    groups.sort_by_key(|&m| (m.count_ones(), (0..ts.len()).filter(|i| m & (1 << i) != 0).collect::<Vec<_>>()));
    let mut predicted = Vec::new();
    for mask in groups {
        let trained = (0..base.len()).any(|n| base.coverage(n) == mask && base.cost(n) == cost);
        if trained {
            continue;
        }
        predicted.push(hoa_predict(base, &ts.tasks_in(mask), cost)?);
    }
    Ok(PredictedTable {
        base: base.clone(),
        predicted,
    })
}

/// Result of selecting over trained plus predicted networks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HoaOutcome {
    /// Chosen solution; losses of predicted members are estimates.
    pub solution: crate::model::Solution,
    /// Chosen networks that were predicted and must now be trained.
    pub retrain: Vec<String>,
    pub candidates: usize,
    pub predicted: usize,
}

pub fn hoa_pipeline(base: &PerformanceTable, budget: Budget) -> Result<HoaOutcome, ApproxError> {
    let extended = hoa_extend(base)?;
    let combined = extended.combined()?;
    let solution = solve_optimal(&combined, budget)?;
    let retrain = solution
        .network_ids
        .iter()
        .filter(|id| extended.is_predicted(id))
        .cloned()
        .collect();
    Ok(HoaOutcome {
        solution,
        retrain,
        candidates: combined.len(),
        predicted: extended.predicted.len(),
    })
}

/// Selection on a proxy table, realised on the final table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EsaOutcome {
    pub chosen: crate::model::Solution,
    pub realized: crate::model::Solution,
    pub final_optimal: crate::model::Solution,
    /// `realized.total_loss - final_optimal.total_loss`, never negative.
    pub gap: f64,
}

fn check_compatible(proxy: &PerformanceTable, fin: &PerformanceTable) -> Result<(), ApproxError> {
    if proxy.task_set() != fin.task_set() {
        return Err(ApproxError::TableMismatch("task sets differ".into()));
    }
    if proxy.len() != fin.len() {
        return Err(ApproxError::TableMismatch("network counts differ".into()));
    }
    for n in proxy.networks() {
        match fin.get(n.id()) {
            None => return Err(ApproxError::TableMismatch(format!("{} missing from final table", n.id()))),
            Some(f) if f.cost_msnt() != n.cost_msnt() => {
                return Err(ApproxError::TableMismatch(format!("cost of {} differs", n.id())))
            }
            Some(f) if f.losses().keys().ne(n.losses().keys()) => {
                return Err(ApproxError::TableMismatch(format!("tasks of {} differ", n.id())))
            }
            Some(_) => {}
        }
    }
    Ok(())
}

pub fn esa_pipeline(
    proxy: &PerformanceTable,
    fin: &PerformanceTable,
    budget: Budget,
) -> Result<EsaOutcome, ApproxError> {
    check_compatible(proxy, fin)?;
    let chosen = solve_optimal(proxy, budget)?;
    let realized = fin
        .evaluate(&chosen.network_ids)?
        .with_budget(budget.msnt());
    let final_optimal = solve_optimal(fin, budget)?;
    let gap = realized.total_loss - final_optimal.total_loss;
    Ok(EsaOutcome {
        chosen,
        realized,
        final_optimal,
        gap,
    })
}

/// Synthetic proxy: every loss perturbed by Gaussian noise of scale `sigma`
/// and clamped at zero. A stand-in for early-stopped training in tests and
/// demos, not a model of it.
pub fn synthesize_proxy(
    fin: &PerformanceTable,
    sigma: f64,
    seed: u64,
) -> Result<PerformanceTable, ApproxError> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(ApproxError::InvalidParameter(format!("sigma must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(fin.clone());
    }
    let noise = Normal::new(0.0, sigma).expect("valid sigma");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(fin.map_losses(|_, l| (l + noise.sample(&mut rng)).max(0.0))?)
}

/// How candidate networks get trained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrainingStrategy {
    /// Train every candidate to convergence.
    Full,
    /// Train singles (both sizes) and pairs; predict the rest.
    HigherOrder,
    /// Train every candidate for `fraction` of a full run, then retrain the
    /// `selected` chosen networks to convergence.
    EarlyStopping { fraction: f64, selected: usize },
}

/// Training effort relative to fully training all `2^k - 1 + k` candidates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrainingBudget {
    pub task_count: usize,
    pub candidates: u64,
    /// Networks trained before selection, in full-run units.
    pub networks_trained: f64,
    pub fraction: f64,
    /// Higher-order networks that selection may ask to retrain, as an extra
    /// fraction on top of `fraction`: `[0, retrain_max]`.
    pub retrain_max: f64,
}

impl TrainingBudget {
    pub fn savings(&self) -> f64 {
        1.0 - self.fraction
    }
}

pub fn training_budget_report(
    task_count: usize,
    strategy: TrainingStrategy,
) -> Result<TrainingBudget, ApproxError> {
    if !(2..=crate::model::MAX_TASKS).contains(&task_count) {
        return Err(ApproxError::InvalidParameter(format!(
            "task count must be in 2..={}, got {task_count}",
            crate::model::MAX_TASKS
        )));
    }
    let k = task_count as u64;
    let candidates = (1u64 << k) - 1 + k;
    let total = candidates as f64;
    let report = |trained: f64, retrain: f64| TrainingBudget {
        task_count,
        candidates,
        networks_trained: trained,
        fraction: trained / total,
        retrain_max: retrain / total,
    };
    Ok(match strategy {
        TrainingStrategy::Full => report(total, 0.0),
        TrainingStrategy::HigherOrder => {
            let trained = 2 * k + k * (k - 1) / 2;
            let higher = candidates - trained;
            report(trained as f64, higher.min(k) as f64)
        }
        TrainingStrategy::EarlyStopping { fraction, selected } => {
            if !(fraction > 0.0 && fraction < 1.0) {
                return Err(ApproxError::InvalidParameter(format!(
                    "early-stopping fraction must be in (0, 1), got {fraction}"
                )));
            }
            if selected as u64 > candidates {
                return Err(ApproxError::InvalidParameter(format!(
                    "{selected} selected networks exceed {candidates} candidates"
                )));
            }
            report(fraction * total + selected as f64, 0.0)
        }
    })
}
