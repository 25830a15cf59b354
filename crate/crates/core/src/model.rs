//! Domain types: task sets, candidate networks, performance tables and the
//! arithmetic of scoring a set of networks as a solution.
//!
//! A network that does not attempt a task simply has no entry for it. Absence
//! plays the role of an infinite loss everywhere: a task is covered by a set
//! of networks only if at least one member reports a loss for it, and the
//! solution loss on a task is the minimum over the members that do.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

/// Bit set over the positions of a [`TaskSet`].
pub type TaskMask = u32;

/// Largest number of tasks a [`TaskSet`] may hold.
pub const MAX_TASKS: usize = 32;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("task set is empty")]
    EmptyTaskSet,
    #[error("task set holds {count} tasks, at most {max} are supported")]
    TooManyTasks { count: usize, max: usize },
    #[error("task identifier must be non-empty and free of whitespace, got {0:?}")]
    InvalidTaskId(String),
    #[error("duplicate task identifier {0:?}")]
    DuplicateTask(String),
    #[error("network {id:?} is invalid: {reason}")]
    InvalidNetwork { id: String, reason: String },
    #[error("network {network:?} reports a loss for unknown task {task:?}")]
    UnknownTask { network: String, task: String },
    #[error("duplicate network id {0:?}")]
    DuplicateNetworkId(String),
    #[error("no network solves task {0:?}")]
    UnsolvableTask(String),
    #[error("unknown network id {0:?}")]
    UnknownNetworkId(String),
    #[error("task {0:?} is not covered by the selected networks")]
    UncoveredTask(String),
}

/// Ordered collection of unique task identifiers.
///
/// The order is fixed at construction and is the index order used by every
/// mask, matrix and per-task listing in the crate.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TaskSet {
    tasks: Vec<String>,
}

impl TaskSet {
    pub fn new<I, S>(tasks: I) -> Result<Self, ModelError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let tasks: Vec<String> = tasks.into_iter().map(Into::into).collect();
        if tasks.is_empty() {
            return Err(ModelError::EmptyTaskSet);
        }
        if tasks.len() > MAX_TASKS {
            return Err(ModelError::TooManyTasks {
                count: tasks.len(),
                max: MAX_TASKS,
            });
        }
        let mut seen = BTreeSet::new();
        for t in &tasks {
            if t.is_empty() || t.chars().any(|c| c.is_whitespace() || c == ',' || c == '@') {
                return Err(ModelError::InvalidTaskId(t.clone()));
            }
            if !seen.insert(t.as_str()) {
                return Err(ModelError::DuplicateTask(t.clone()));
            }
        }
        Ok(TaskSet { tasks })
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    /// Always false; kept for API symmetry with collections.
    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &str> + '_ {
        self.tasks.iter().map(String::as_str)
    }

    pub fn as_slice(&self) -> &[String] {
        &self.tasks
    }

    pub fn get(&self, index: usize) -> Option<&str> {
        self.tasks.get(index).map(String::as_str)
    }

    pub fn index_of(&self, task: &str) -> Option<usize> {
        self.tasks.iter().position(|t| t == task)
    }

    pub fn contains(&self, task: &str) -> bool {
        self.index_of(task).is_some()
    }

    /// Mask with one bit per task.
    pub fn full_mask(&self) -> TaskMask {
        if self.len() == 32 {
            TaskMask::MAX
        } else {
            (1 << self.len()) - 1
        }
    }

    /// Mask of the named tasks; `None` if any name is not in the set.
    pub fn mask_of<S: AsRef<str>>(&self, tasks: &[S]) -> Option<TaskMask> {
        tasks.iter().try_fold(0, |acc, t| {
            self.index_of(t.as_ref()).map(|i| acc | (1 << i))
        })
    }

    /// Task identifiers selected by `mask`, in set order.
    pub fn tasks_in(&self, mask: TaskMask) -> Vec<&str> {
        self.iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, t)| t)
            .collect()
    }

    /// Compact label for a task subset: identifiers concatenated in set
    /// order, or joined with `+` when any identifier is longer than one
    /// character.
    pub fn label(&self, mask: TaskMask) -> String {
        let tasks = self.tasks_in(mask);
        if self.tasks.iter().all(|t| t.chars().count() == 1) {
            tasks.concat()
        } else {
            tasks.join("+")
        }
    }
}

impl fmt::Display for TaskSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.tasks.join(","))
    }
}

/// Canonical network id: task label, `@`, cost in milli-SNT (`"dnk@1000"`).
pub fn canonical_id(task_set: &TaskSet, mask: TaskMask, cost_msnt: u64) -> String {
    format!("{}@{}", task_set.label(mask), cost_msnt)
}

/// One predictor: an id, an inference cost in milli-SNT and a partial map of
/// per-task losses.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateNetwork {
    id: String,
    cost_msnt: u64,
    losses: BTreeMap<String, f64>,
}

impl CandidateNetwork {
    pub fn new<I, S>(id: impl Into<String>, cost_msnt: u64, losses: I) -> Result<Self, ModelError>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        let id = id.into();
        let invalid = |reason: &str| ModelError::InvalidNetwork {
            id: id.clone(),
            reason: reason.to_string(),
        };
        if id.is_empty() || id.chars().any(char::is_whitespace) {
            return Err(invalid("id must be non-empty and free of whitespace"));
        }
        if cost_msnt == 0 {
            return Err(invalid("cost must be positive"));
        }
        let mut map = BTreeMap::new();
        for (task, loss) in losses {
            let task = task.into();
            if !loss.is_finite() || loss < 0.0 {
                return Err(invalid(&format!("loss on {task:?} must be finite and >= 0, got {loss}")));
            }
            if map.insert(task.clone(), loss).is_some() {
                return Err(invalid(&format!("task {task:?} listed twice")));
            }
        }
        if map.is_empty() {
            return Err(invalid("network solves no task"));
        }
        Ok(CandidateNetwork {
            id,
            cost_msnt,
            losses: map,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn cost_msnt(&self) -> u64 {
        self.cost_msnt
    }

    pub fn losses(&self) -> &BTreeMap<String, f64> {
        &self.losses
    }

    /// Loss on `task`, `None` when the network does not attempt it.
    pub fn loss(&self, task: &str) -> Option<f64> {
        self.losses.get(task).copied()
    }
}

/// Per-task result inside a [`Solution`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaskOutcome {
    pub task: String,
    pub network: String,
    pub loss: f64,
}

/// A covering set of networks with its derived cost and losses.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Solution {
    /// Member ids, sorted.
    pub network_ids: Vec<String>,
    pub budget_msnt: Option<u64>,
    /// One entry per task, in task-set order.
    pub per_task: Vec<TaskOutcome>,
    pub total_loss: f64,
    pub cost_msnt: u64,
}

impl Solution {
    pub(crate) fn with_budget(mut self, budget_msnt: u64) -> Self {
        self.budget_msnt = Some(budget_msnt);
        self
    }
}

/// Immutable collection of candidate networks over one task set.
#[derive(Debug, Clone)]
pub struct PerformanceTable {
    task_set: TaskSet,
    networks: Vec<CandidateNetwork>,
    /// `dense[network][task]`
    dense: Vec<Vec<Option<f64>>>,
    masks: Vec<TaskMask>,
    by_id: HashMap<String, usize>,
}

impl PartialEq for PerformanceTable {
    fn eq(&self, other: &Self) -> bool {
        self.task_set == other.task_set && self.networks == other.networks
    }
}

impl PerformanceTable {
    pub fn new(task_set: TaskSet, networks: Vec<CandidateNetwork>) -> Result<Self, ModelError> {
        let mut by_id = HashMap::with_capacity(networks.len());
        let mut dense = Vec::with_capacity(networks.len());
        let mut masks = Vec::with_capacity(networks.len());
        for (i, n) in networks.iter().enumerate() {
            if by_id.insert(n.id.clone(), i).is_some() {
                return Err(ModelError::DuplicateNetworkId(n.id.clone()));
            }
            let mut row = vec![None; task_set.len()];
            let mut mask = 0;
            for (task, &loss) in &n.losses {
                let t = task_set.index_of(task).ok_or_else(|| ModelError::UnknownTask {
                    network: n.id.clone(),
                    task: task.clone(),
                })?;
                row[t] = Some(loss);
                mask |= 1 << t;
            }
            dense.push(row);
            masks.push(mask);
        }
        let covered = masks.iter().fold(0, |acc, m| acc | m);
        if let Some(t) = (0..task_set.len()).find(|t| covered & (1 << t) == 0) {
            return Err(ModelError::UnsolvableTask(task_set.tasks[t].clone()));
        }
        Ok(PerformanceTable {
            task_set,
            networks,
            dense,
            masks,
            by_id,
        })
    }

    pub fn task_set(&self) -> &TaskSet {
        &self.task_set
    }

    pub fn networks(&self) -> &[CandidateNetwork] {
        &self.networks
    }

    pub fn len(&self) -> usize {
        self.networks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.networks.is_empty()
    }

    pub fn network(&self, index: usize) -> &CandidateNetwork {
        &self.networks[index]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.by_id.get(id).copied()
    }

    pub fn get(&self, id: &str) -> Option<&CandidateNetwork> {
        self.index_of(id).map(|i| &self.networks[i])
    }

    pub fn loss(&self, network: usize, task: usize) -> Option<f64> {
        self.dense[network][task]
    }

    pub fn coverage(&self, network: usize) -> TaskMask {
        self.masks[network]
    }

    pub fn cost(&self, network: usize) -> u64 {
        self.networks[network].cost_msnt
    }

    pub fn total_cost(&self) -> u64 {
        self.networks.iter().map(|n| n.cost_msnt).sum()
    }

    /// Rebuild the table with every loss passed through `f(task, loss)`.
    pub fn map_losses<F>(&self, mut f: F) -> Result<Self, ModelError>
    where
        F: FnMut(&str, f64) -> f64,
    {
        let networks = self
            .networks
            .iter()
            .map(|n| {
                CandidateNetwork::new(
                    n.id.clone(),
                    n.cost_msnt,
                    n.losses.iter().map(|(t, &l)| (t.clone(), f(t, l))),
                )
            })
            .collect::<Result<Vec<_>, _>>()?;
        PerformanceTable::new(self.task_set.clone(), networks)
    }

    /// Subtable holding the networks accepted by `keep`, in original order.
    pub fn filter<F>(&self, mut keep: F) -> Result<Self, ModelError>
    where
        F: FnMut(&CandidateNetwork) -> bool,
    {
        let networks = self.networks.iter().filter(|n| keep(n)).cloned().collect();
        PerformanceTable::new(self.task_set.clone(), networks)
    }

    /// True when `challenger` beats `incumbent` on a task: lower loss, ties
    /// to the lexicographically smaller id.
    pub(crate) fn beats(&self, challenger: (usize, f64), incumbent: (usize, f64)) -> bool {
        challenger.1 < incumbent.1
            || (challenger.1 == incumbent.1
                && self.networks[challenger.0].id < self.networks[incumbent.0].id)
    }

    /// Winning `(network, loss)` per task among `members`.
    pub(crate) fn winners(&self, members: &[usize]) -> Vec<Option<(usize, f64)>> {
        let mut best: Vec<Option<(usize, f64)>> = vec![None; self.task_set.len()];
        for &n in members {
            for (t, slot) in best.iter_mut().enumerate() {
                if let Some(loss) = self.dense[n][t] {
                    match slot {
                        Some(cur) if !self.beats((n, loss), *cur) => {}
                        _ => *slot = Some((n, loss)),
                    }
                }
            }
        }
        best
    }

    /// Total loss of `members`, `None` if some task is uncovered. Summation
    /// runs in task order from zero, the same arithmetic as [`evaluate`].
    ///
    /// [`evaluate`]: PerformanceTable::evaluate
    pub(crate) fn total_loss_of(&self, members: &[usize]) -> Option<f64> {
        let mut total = 0.0;
        for t in 0..self.task_set.len() {
            let best = members
                .iter()
                .filter_map(|&n| self.dense[n][t])
                .fold(None, |acc: Option<f64>, l| Some(acc.map_or(l, |a| a.min(l))))?;
            total += best;
        }
        Some(total)
    }

    pub(crate) fn resolve_ids<I, S>(&self, ids: I) -> Result<Vec<usize>, ModelError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut out = ids
            .into_iter()
            .map(|id| {
                self.index_of(id.as_ref())
                    .ok_or_else(|| ModelError::UnknownNetworkId(id.as_ref().to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }

    /// Score a set of networks given by id.
    pub fn evaluate<I, S>(&self, ids: I) -> Result<Solution, ModelError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let members = self.resolve_ids(ids)?;
        self.evaluate_indices(&members)
    }

    /// Score a set of networks given by table index.
    pub fn evaluate_indices(&self, members: &[usize]) -> Result<Solution, ModelError> {
        let winners = self.winners(members);
        let mut per_task = Vec::with_capacity(winners.len());
        let mut total_loss = 0.0;
        for (t, w) in winners.into_iter().enumerate() {
            let (n, loss) = w.ok_or_else(|| ModelError::UncoveredTask(self.task_set.tasks[t].clone()))?;
            total_loss += loss;
            per_task.push(TaskOutcome {
                task: self.task_set.tasks[t].clone(),
                network: self.networks[n].id.clone(),
                loss,
            });
        }
        let mut network_ids: Vec<String> = members.iter().map(|&n| self.networks[n].id.clone()).collect();
        network_ids.sort();
        network_ids.dedup();
        let mut unique = members.to_vec();
        unique.sort_unstable();
        unique.dedup();
        Ok(Solution {
            network_ids,
            budget_msnt: None,
            per_task,
            total_loss,
            cost_msnt: unique.iter().map(|&n| self.networks[n].cost_msnt).sum(),
        })
    }

    /// Drop every member that wins no task. Winners, per-task losses and the
    /// total are unchanged; the result has at most one network per task.
    pub fn prune_dominated<I, S>(&self, ids: I) -> Result<BTreeSet<String>, ModelError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let solution = self.evaluate(ids)?;
        Ok(solution.per_task.into_iter().map(|o| o.network).collect())
    }
}

/// A candidate network to be trained (or predicted): a task subset and its
/// cost.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateTemplate {
    pub mask: TaskMask,
    pub cost_msnt: u64,
    pub id: String,
}

impl CandidateTemplate {
    pub fn task_count(&self) -> usize {
        self.mask.count_ones() as usize
    }
}

/// Every non-empty task subset at `full_cost_msnt`, followed by one
/// single-task template per task at `half_cost_msnt`.
///
/// Subsets are listed by increasing size, and within one size in
/// lexicographic order of task positions.
pub fn generate_candidate_ids(
    task_set: &TaskSet,
    full_cost_msnt: u64,
    half_cost_msnt: u64,
) -> Vec<CandidateTemplate> {
    let k = task_set.len();
    let mut masks: Vec<TaskMask> = (1..=task_set.full_mask()).collect();
    masks.sort_by_key(|&m| (m.count_ones(), positions_key(m, k)));
    let mut out: Vec<CandidateTemplate> = masks
        .into_iter()
        .map(|mask| CandidateTemplate {
            mask,
            cost_msnt: full_cost_msnt,
            id: canonical_id(task_set, mask, full_cost_msnt),
        })
        .collect();
    out.extend((0..k).map(|t| CandidateTemplate {
        mask: 1 << t,
        cost_msnt: half_cost_msnt,
        id: canonical_id(task_set, 1 << t, half_cost_msnt),
    }));
    out
}

fn positions_key(mask: TaskMask, k: usize) -> Vec<usize> {
    (0..k).filter(|i| mask & (1 << i) != 0).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tasks5() -> TaskSet {
        TaskSet::new(["s", "d", "n", "k", "e"]).unwrap()
    }

    fn net(id: &str, cost: u64, losses: &[(&str, f64)]) -> CandidateNetwork {
        CandidateNetwork::new(id, cost, losses.iter().map(|&(t, l)| (t, l))).unwrap()
    }

    #[test]
    fn task_set_rejects_bad_input() {
        assert_eq!(TaskSet::new(Vec::<String>::new()), Err(ModelError::EmptyTaskSet));
        assert_eq!(TaskSet::new(["a", "a"]), Err(ModelError::DuplicateTask("a".into())));
        assert!(matches!(TaskSet::new(["a b"]), Err(ModelError::InvalidTaskId(_))));
        let many: Vec<String> = (0..33).map(|i| format!("t{i}")).collect();
        assert!(matches!(TaskSet::new(many), Err(ModelError::TooManyTasks { .. })));
    }

    #[test]
    fn canonical_ids_follow_set_order() {
        let ts = tasks5();
        let mask = ts.mask_of(&["k", "d", "n"]).unwrap();
        assert_eq!(canonical_id(&ts, mask, 1000), "dnk@1000");
        let long = TaskSet::new(["SemSeg", "Depth"]).unwrap();
        assert_eq!(canonical_id(&long, 0b11, 500), "SemSeg+Depth@500");
    }

    #[test]
    fn network_validation() {
        assert!(CandidateNetwork::new("x", 0, [("s", 0.1)]).is_err());
        assert!(CandidateNetwork::new("x", 10, [("s", -0.1)]).is_err());
        assert!(CandidateNetwork::new("x", 10, [("s", f64::NAN)]).is_err());
        assert!(CandidateNetwork::new("x", 10, [("s", f64::INFINITY)]).is_err());
        assert!(CandidateNetwork::new("x", 10, Vec::<(String, f64)>::new()).is_err());
        assert!(CandidateNetwork::new("x", 10, [("s", 0.0)]).is_ok());
    }

    #[test]
    fn table_validation() {
        let ts = TaskSet::new(["s", "d"]).unwrap();
        let a = net("a", 1, &[("s", 0.1)]);
        assert_eq!(
            PerformanceTable::new(ts.clone(), vec![a.clone()]),
            Err(ModelError::UnsolvableTask("d".into()))
        );
        let dup = vec![net("a", 1, &[("s", 0.1), ("d", 0.2)]), a.clone()];
        assert_eq!(
            PerformanceTable::new(ts.clone(), dup),
            Err(ModelError::DuplicateNetworkId("a".into()))
        );
        let unknown = vec![net("b", 1, &[("s", 0.1), ("d", 0.2), ("z", 0.3)])];
        assert!(matches!(
            PerformanceTable::new(ts, unknown),
            Err(ModelError::UnknownTask { .. })
        ));
    }

    #[test]
    fn evaluate_single_network() {
        let ts = tasks5();
        let all = net(
            "sdnke@1000",
            1000,
            &[("s", 0.1), ("d", 0.1), ("n", 0.1), ("k", 0.1), ("e", 0.1)],
        );
        let table = PerformanceTable::new(ts, vec![all]).unwrap();
        let sol = table.evaluate(["sdnke@1000"]).unwrap();
        assert!((sol.total_loss - 0.5).abs() < 1e-12);
        assert_eq!(sol.cost_msnt, 1000);
        assert_eq!(sol.per_task.len(), 5);
    }

    #[test]
    fn evaluate_takes_min_and_breaks_ties_by_id() {
        let ts = TaskSet::new(["s"]).unwrap();
        let table = PerformanceTable::new(
            ts,
            vec![
                net("b", 1, &[("s", 0.3)]),
                net("a", 1, &[("s", 0.2)]),
                net("c", 1, &[("s", 0.2)]),
            ],
        )
        .unwrap();
        let sol = table.evaluate(["b", "c"]).unwrap();
        assert_eq!(sol.per_task[0].loss, 0.2);
        assert_eq!(sol.per_task[0].network, "c");
        let sol = table.evaluate(["c", "a", "b"]).unwrap();
        assert_eq!(sol.per_task[0].network, "a");
        assert_eq!(sol.network_ids, vec!["a", "b", "c"]);
    }

    #[test]
    fn evaluate_errors() {
        let ts = tasks5();
        let table = PerformanceTable::new(
            ts,
            vec![
                net("sdnk", 1000, &[("s", 0.1), ("d", 0.1), ("n", 0.1), ("k", 0.1)]),
                net("e", 500, &[("e", 0.1)]),
            ],
        )
        .unwrap();
        assert_eq!(table.evaluate(["sdnk"]), Err(ModelError::UncoveredTask("e".into())));
        assert_eq!(table.evaluate(["zz"]), Err(ModelError::UnknownNetworkId("zz".into())));
        assert_eq!(table.evaluate(Vec::<String>::new()), Err(ModelError::UncoveredTask("s".into())));
    }

    #[test]
    fn prune_drops_losers_only() {
        let ts = TaskSet::new(["s", "d"]).unwrap();
        let table = PerformanceTable::new(
            ts,
            vec![
                net("A", 1, &[("s", 0.1), ("d", 0.1)]),
                net("B", 1, &[("s", 0.5), ("d", 0.5)]),
                net("C", 1, &[("d", 0.05)]),
            ],
        )
        .unwrap();
        let kept = table.prune_dominated(["A", "B"]).unwrap();
        assert_eq!(kept.into_iter().collect::<Vec<_>>(), vec!["A"]);
        let kept = table.prune_dominated(["A", "C"]).unwrap();
        assert_eq!(kept.into_iter().collect::<Vec<_>>(), vec!["A", "C"]);
    }

    #[test]
    fn template_counts() {
        let one = TaskSet::new(["s"]).unwrap();
        assert_eq!(generate_candidate_ids(&one, 1000, 500).len(), 2);
        let three = TaskSet::new(["a", "b", "c"]).unwrap();
        assert_eq!(generate_candidate_ids(&three, 1000, 500).len(), 10);
        let five = generate_candidate_ids(&tasks5(), 1000, 500);
        assert_eq!(five.len(), 36);
        assert_eq!(five.iter().filter(|t| t.cost_msnt == 500).count(), 5);
        assert_eq!(five[0].id, "s@1000");
        assert_eq!(five[30].id, "sdnke@1000");
        assert_eq!(five[35].id, "e@500");
        let ids: BTreeSet<_> = five.iter().map(|t| t.id.clone()).collect();
        assert_eq!(ids.len(), 36);
    }
}
