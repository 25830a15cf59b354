//! Budgeted network selection.
//!
//! The exact solver is a depth-first branch and bound over sets of at most
//! `|tasks|` networks. Only sets in which every member wins at least one
//! task can be the preferred optimum (a member that wins nothing can be
//! dropped without changing any per-task loss, and costs are positive), and
//! such a set never holds more networks than tasks.
//!
//! Ties between co-optimal solutions are broken by smaller cost, then by the
//! lexicographically smaller sorted id list. Every solver in this module
//! uses the same ordering, so their outputs can be compared for equality.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::model::{ModelError, PerformanceTable, Solution, TaskMask};

/// Task sets larger than this are rejected by the solvers; several of them
/// keep per-mask tables of size `2^|tasks|`.
pub const MAX_SOLVER_TASKS: usize = 20;

/// Upper limit on the number of subsets the exhaustive oracle may visit.
pub const ORACLE_SUBSET_LIMIT: u128 = 50_000_000;

/// Independent random streams used by [`solve_random_mean`].
pub const RANDOM_SHARDS: u64 = 64;

/// Consecutive rejected draws after which a random shard gives up.
pub const MAX_CONSECUTIVE_REJECTIONS: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("no covering solution fits the budget; the cheapest cover costs {min_required_msnt} mSNT")]
    BudgetInfeasible { min_required_msnt: u64 },
    #[error("exhaustive search would visit {subsets} subsets of {candidates} candidates (limit {limit})")]
    TooManyCandidates {
        candidates: usize,
        subsets: u128,
        limit: u128,
    },
    #[error("{count} tasks exceed the solver limit of {max}")]
    TooManyTasks { count: usize, max: usize },
    #[error("no valid task partition fits the budget (gave up after {attempts} draws)")]
    NoFeasiblePartition { attempts: u64 },
    #[error("no network solves every task")]
    NoAllInOneNetwork,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Inference-time budget in milli-SNT.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Budget(u64);

impl Budget {
    pub fn from_msnt(msnt: u64) -> Result<Self, SolveError> {
        if msnt == 0 {
            return Err(SolveError::InvalidParameter("budget must be positive".into()));
        }
        Ok(Budget(msnt))
    }

    pub fn msnt(self) -> u64 {
        self.0
    }
}

impl fmt::Display for Budget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:03} SNT", self.0 / 1000, self.0 % 1000)
    }
}

fn check_task_count(table: &PerformanceTable) -> Result<(), SolveError> {
    let count = table.task_set().len();
    if count > MAX_SOLVER_TASKS {
        return Err(SolveError::TooManyTasks {
            count,
            max: MAX_SOLVER_TASKS,
        });
    }
    Ok(())
}

/// `costs[mask]` is the cheapest total cost of networks jointly covering
/// `mask`, or `u64::MAX` when impossible.
pub(crate) fn min_cover_costs(table: &PerformanceTable) -> Vec<u64> {
    let k = table.task_set().len();
    let mut by_task: Vec<Vec<usize>> = vec![Vec::new(); k];
    for n in 0..table.len() {
        let cov = table.coverage(n);
        for (t, list) in by_task.iter_mut().enumerate() {
            if cov & (1 << t) != 0 {
                list.push(n);
            }
        }
    }
    let size = 1usize << k;
    let mut costs = vec![u64::MAX; size];
    costs[0] = 0;
    for mask in 1..size {
        let low = (mask as TaskMask).trailing_zeros() as usize;
        let mut best = u64::MAX;
        for &n in &by_task[low] {
            let rest = costs[mask & !(table.coverage(n) as usize)];
            if rest != u64::MAX {
                best = best.min(rest.saturating_add(table.cost(n)));
            }
        }
        costs[mask] = best;
    }
    costs
}

/// Cheapest cost of any covering solution.
pub fn min_cover_cost(table: &PerformanceTable) -> Result<u64, SolveError> {
    check_task_count(table)?;
    Ok(min_cover_costs(table)[table.task_set().full_mask() as usize])
}

/// A scored candidate solution, ordered best-first for minimisation.
#[derive(Debug, Clone)]
struct Scored {
    loss: f64,
    cost: u64,
    members: Vec<usize>,
}

fn sorted_ids<'t>(table: &'t PerformanceTable, members: &[usize]) -> Vec<&'t str> {
    let mut ids: Vec<&str> = members.iter().map(|&n| table.network(n).id()).collect();
    ids.sort_unstable();
    ids
}

/// Tie-break shared by every solver: cost ascending, then sorted ids.
fn tie_break(table: &PerformanceTable, a: &Scored, b: &Scored) -> Ordering {
    a.cost
        .cmp(&b.cost)
        .then_with(|| sorted_ids(table, &a.members).cmp(&sorted_ids(table, &b.members)))
}

/// `Less` when `a` is the preferred minimiser.
fn cmp_min(table: &PerformanceTable, a: &Scored, b: &Scored) -> Ordering {
    a.loss
        .partial_cmp(&b.loss)
        .expect("losses are finite")
        .then_with(|| tie_break(table, a, b))
}

/// `Less` when `a` is the preferred maximiser.
fn cmp_max(table: &PerformanceTable, a: &Scored, b: &Scored) -> Ordering {
    b.loss
        .partial_cmp(&a.loss)
        .expect("losses are finite")
        .then_with(|| tie_break(table, a, b))
}

fn finish(table: &PerformanceTable, best: Scored, budget: Budget) -> Result<Solution, SolveError> {
    Ok(table.evaluate_indices(&best.members)?.with_budget(budget.msnt()))
}

/// Knobs for [`solve_optimal_with`].
#[derive(Debug, Clone, Copy)]
pub struct SearchOptions {
    /// Prune with the optimistic loss bounds. Feasibility pruning and the
    /// win-a-task rule stay on regardless.
    pub use_bounds: bool,
    /// Bound with per-subset cost/loss frontiers when the instance is small
    /// enough; otherwise a fractional-knapsack bound is used.
    pub subset_frontiers: bool,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            use_bounds: true,
            subset_frontiers: true,
        }
    }
}

/// Counters from one branch-and-bound run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SearchStats {
    pub nodes: u64,
    pub pruned_by_bound: u64,
}

/// Lowest-loss covering solution with cost within `budget`.
pub fn solve_optimal(table: &PerformanceTable, budget: Budget) -> Result<Solution, SolveError> {
    solve_optimal_with(table, budget, SearchOptions::default()).map(|(s, _)| s)
}

pub fn solve_optimal_with(
    table: &PerformanceTable,
    budget: Budget,
    options: SearchOptions,
) -> Result<(Solution, SearchStats), SolveError> {
    check_task_count(table)?;
    let cover = min_cover_costs(table);
    let full = table.task_set().full_mask();
    let min_required = cover[full as usize];
    if min_required > budget.msnt() {
        return Err(SolveError::BudgetInfeasible {
            min_required_msnt: min_required,
        });
    }
    let mut search = BranchAndBound::new(table, budget.msnt(), cover, options);
    search.seed_greedy();
    search.seed_frontier();
    let k = table.task_set().len();
    let mut winners = vec![None; k];
    let mut members = Vec::with_capacity(k);
    search.descend(0, &mut members, &mut winners, 0, full);
    let best = search.best.take().expect("a feasible cover exists");
    Ok((finish(table, best, budget)?, search.stats))
}

struct BranchAndBound<'a> {
    table: &'a PerformanceTable,
    budget: u64,
    cover: Vec<u64>,
    options: SearchOptions,
    /// Candidate indices in search order.
    order: Vec<usize>,
    /// `suffix_min[pos][t]`: lowest loss on `t` among `order[pos..]`.
    suffix_min: Vec<Vec<Option<f64>>>,
    /// Cost/loss frontiers per task subset, when small enough to build.
    frontiers: Option<Frontiers>,
    best: Option<Scored>,
    stats: SearchStats,
}

impl<'a> BranchAndBound<'a> {
    fn new(table: &'a PerformanceTable, budget: u64, cover: Vec<u64>, options: SearchOptions) -> Self {
        let k = table.task_set().len();
        let best_single = |n: usize| {
            (0..k)
                .filter_map(|t| table.loss(n, t))
                .fold(f64::INFINITY, f64::min)
        };
        let mut order: Vec<usize> = (0..table.len()).collect();
        order.sort_by(|&a, &b| {
            best_single(a)
                .partial_cmp(&best_single(b))
                .expect("finite")
                .then_with(|| table.network(a).id().cmp(table.network(b).id()))
        });
        let m = order.len();
        let mut suffix_min = vec![vec![None; k]; m + 1];
        for pos in (0..m).rev() {
            let n = order[pos];
            for t in 0..k {
                let below = suffix_min[pos + 1][t];
                suffix_min[pos][t] = match (table.loss(n, t), below) {
                    (Some(a), Some(b)) => Some(f64::min(a, b)),
                    (a, b) => a.or(b),
                };
            }
        }
        let frontiers = if options.use_bounds && options.subset_frontiers {
            Frontiers::build(table, &order, budget)
        } else {
            None
        };
        BranchAndBound {
            table,
            budget,
            cover,
            options,
            order,
            suffix_min,
            frontiers,
            best: None,
            stats: SearchStats::default(),
        }
    }

    fn offer(&mut self, candidate: Scored) {
        let better = match &self.best {
            None => true,
            Some(b) => cmp_min(self.table, &candidate, b) == Ordering::Less,
        };
        if better {
            self.best = Some(candidate);
        }
    }

    /// Greedy start: repeatedly add the affordable network with the best
    /// optimistic outcome until nothing improves.
    fn seed_greedy(&mut self) {
        let table = self.table;
        let k = table.task_set().len();
        let full = table.task_set().full_mask();
        let mut members: Vec<usize> = Vec::new();
        let mut winners: Vec<Option<(usize, f64)>> = vec![None; k];
        let mut cost = 0;
        let mut uncovered = full;
        loop {
            let mut pick: Option<(f64, usize)> = None;
            for n in 0..table.len() {
                if members.contains(&n) {
                    continue;
                }
                let c = cost + table.cost(n);
                let rest = uncovered & !table.coverage(n);
                if self.cover[rest as usize] == u64::MAX || c + self.cover[rest as usize] > self.budget {
                    continue;
                }
                let mut score = 0.0;
                for (t, w) in winners.iter().enumerate() {
                    let cur = w.map(|(_, l)| l);
                    let v = match (cur, table.loss(n, t)) {
                        (Some(a), Some(b)) => a.min(b),
                        (a, b) => a.or(b).unwrap_or_else(|| self.suffix_min[0][t].unwrap_or(0.0)),
                    };
                    score += v;
                }
                if pick.is_none_or(|(s, _)| score < s) {
                    pick = Some((score, n));
                }
            }
            let Some((_, n)) = pick else { break };
            let before = if uncovered == 0 {
                table.total_loss_of(&members)
            } else {
                None
            };
            members.push(n);
            cost += table.cost(n);
            uncovered &= !table.coverage(n);
            for (t, w) in winners.iter_mut().enumerate() {
                if let Some(l) = table.loss(n, t) {
                    if w.is_none_or(|cur| table.beats((n, l), cur)) {
                        *w = Some((n, l));
                    }
                }
            }
            if uncovered == 0 {
                let loss = table.total_loss_of(&members).expect("covered");
                if before.is_some_and(|b| loss >= b) {
                    members.pop();
                    break;
                }
            }
            if members.len() >= k {
                break;
            }
        }
        self.offer_members(&members);
    }

    /// Start from a lowest-loss split read off the frontiers, if built.
    fn seed_frontier(&mut self) {
        let full = self.table.task_set().full_mask() as usize;
        let members = self.frontiers.as_ref().and_then(|f| f.recover(full, self.budget));
        if let Some(members) = members {
            self.offer_members(&members);
        }
    }

    /// Offer the winners of `members` as a solution, scored exactly.
    fn offer_members(&mut self, members: &[usize]) {
        let table = self.table;
        if let Some(loss) = table.total_loss_of(members) {
            let members = table.evaluate_indices(members).map(|s| {
                s.per_task
                    .iter()
                    .map(|o| table.index_of(&o.network).expect("member"))
                    .collect::<Vec<_>>()
            });
            if let Ok(mut members) = members {
                members.sort_unstable();
                members.dedup();
                let cost: u64 = members.iter().map(|&n| table.cost(n)).sum();
                if cost <= self.budget {
                    self.offer(Scored { loss, cost, members });
                }
            }
        }
    }

    fn descend(
        &mut self,
        pos: usize,
        members: &mut Vec<usize>,
        winners: &mut Vec<Option<(usize, f64)>>,
        cost: u64,
        uncovered: TaskMask,
    ) {
        self.stats.nodes += 1;
        let table = self.table;
        let k = winners.len();
        if uncovered == 0 {
            let loss = winners.iter().fold(0.0, |acc, w| acc + w.expect("covered").1);
            self.offer(Scored {
                loss,
                cost,
                members: members.clone(),
            });
        }
        if members.len() == k || pos == self.order.len() {
            return;
        }
        if self.options.use_bounds && self.bounded_out(pos, winners, cost) {
            self.stats.pruned_by_bound += 1;
            return;
        }
        for idx in pos..self.order.len() {
            let n = self.order[idx];
            let c = cost + table.cost(n);
            if c > self.budget {
                continue;
            }
            let rest = uncovered & !table.coverage(n);
            let need = self.cover[rest as usize];
            if need == u64::MAX || c + need > self.budget {
                continue;
            }
            let mut changed: Vec<(usize, Option<(usize, f64)>)> = Vec::new();
            for (t, w) in winners.iter_mut().enumerate() {
                if let Some(l) = table.loss(n, t) {
                    if w.is_none_or(|cur| table.beats((n, l), cur)) {
                        changed.push((t, *w));
                        *w = Some((n, l));
                    }
                }
            }
            if changed.is_empty() {
                continue;
            }
            members.push(n);
            self.descend(idx + 1, members, winners, c, rest);
            members.pop();
            for (t, prev) in changed {
                winners[t] = prev;
            }
        }
    }

    /// True when no extension from `order[pos..]` can beat the incumbent.
    fn bounded_out(&self, pos: usize, winners: &[Option<(usize, f64)>], cost: u64) -> bool {
        let Some(best) = &self.best else {
            return false;
        };
        let table = self.table;
        let suffix = &self.suffix_min[pos];

        // Every task at least as good as its best remaining candidate.
        // Each term is >= the true final loss term, and rounded addition is
        // monotone, so the comparison is exact-safe.
        let mut optimistic = 0.0;
        for (t, w) in winners.iter().enumerate() {
            let v = match (w.map(|(_, l)| l), suffix[t]) {
                (Some(a), Some(b)) => a.min(b),
                (Some(a), None) => a,
                (None, Some(b)) => b,
                (None, None) => return true,
            };
            optimistic += v;
        }
        if optimistic > best.loss {
            return true;
        }

        let remaining = self.budget - cost;
        let margin = 1e-9 * best.loss.abs().max(1.0);
        if let Some(frontiers) = &self.frontiers {
            return frontiers.completion_bound(pos, winners, remaining) > best.loss + margin;
        }

        // Budget-aware bound: the improvement over the current per-task
        // losses is subadditive over added networks, so it is at most the
        // fractional-knapsack optimum of individual improvements.
        let mut base = 0.0;
        for (t, w) in winners.iter().enumerate() {
            base += match w {
                Some((_, l)) => *l,
                None => suffix[t].expect("checked above"),
            };
        }
        let mut items: Vec<(f64, u64)> = Vec::new();
        for &n in &self.order[pos..] {
            let c = table.cost(n);
            if c > remaining {
                continue;
            }
            let mut gain = 0.0;
            for (t, w) in winners.iter().enumerate() {
                if let (Some((_, cur)), Some(l)) = (w, table.loss(n, t)) {
                    if l < *cur {
                        gain += cur - l;
                    }
                }
            }
            if gain > 0.0 {
                items.push((gain, c));
            }
        }
        items.sort_by(|a, b| {
            (b.0 / b.1 as f64)
                .partial_cmp(&(a.0 / a.1 as f64))
                .expect("finite")
        });
        let mut room = remaining as f64;
        let mut gain = 0.0;
        for (g, c) in items {
            if room <= 0.0 {
                break;
            }
            let c = c as f64;
            if c <= room {
                gain += g;
                room -= c;
            } else {
                gain += g * room / c;
                room = 0.0;
            }
        }
        // Subtraction is not monotone under rounding; keep a margin.
        base - gain > best.loss + margin
    }
}

/// Largest task count for which the subset frontiers are built.
const FRONTIER_MAX_TASKS: usize = 12;
/// Cap on `sum over networks of 2^|coverage|`, the work to seed them.
const FRONTIER_MAX_SEEDS: u64 = 1 << 22;
/// Cap on `candidates * 3^tasks` for building one frontier set per search
/// position; above it a single set over all candidates is used.
const FRONTIER_MAX_LEVEL_WORK: u64 = 20_000_000;

type Front = Vec<Vec<(u64, f64)>>;
type Blocks = Vec<Vec<(u64, f64, usize)>>;

/// `levels[pos][mask]`: Pareto frontier of `(cost, loss)` over ways to split
/// `mask` into blocks, each block scored by one candidate from
/// `order[pos..]` that covers it, at total cost within the budget. Sorted by
/// cost; loss strictly decreasing.
///
/// Any set of added networks induces such a split (each task goes to its
/// winner), so a frontier lower-bounds what those networks can achieve.
struct Frontiers {
    levels: Vec<Front>,
    /// Per block, Pareto options over every candidate, with the network.
    blocks: Blocks,
}

impl Frontiers {
    fn build(table: &PerformanceTable, order: &[usize], budget: u64) -> Option<Self> {
        let k = table.task_set().len();
        if k > FRONTIER_MAX_TASKS {
            return None;
        }
        let seeds: u64 = (0..table.len()).map(|n| 1u64 << table.coverage(n).count_ones()).sum();
        if seeds > FRONTIER_MAX_SEEDS {
            return None;
        }
        let size = 1usize << k;
        let mut block: Blocks = vec![Vec::new(); size];
        let add = |block: &mut Blocks, n: usize| {
            let cost = table.cost(n);
            if cost > budget {
                return;
            }
            let cov = table.coverage(n) as usize;
            let mut sub = cov;
            while sub != 0 {
                let loss = (0..k)
                    .filter(|t| sub & (1 << t) != 0)
                    .map(|t| table.loss(n, t).expect("covered"))
                    .sum();
                let list = &mut block[sub];
                list.push((cost, loss, n));
                list.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.partial_cmp(&b.1).expect("finite")));
                let mut last = f64::INFINITY;
                list.retain(|&(_, l, _)| {
                    let keep = l < last;
                    if keep {
                        last = l;
                    }
                    keep
                });
                sub = (sub - 1) & cov;
            }
        };
        let per_level = (order.len() as u64).saturating_mul(3u64.pow(k as u32)) <= FRONTIER_MAX_LEVEL_WORK;
        if !per_level {
            for &n in order {
                add(&mut block, n);
            }
            return Some(Frontiers {
                levels: vec![combine(&block, budget)],
                blocks: block,
            });
        }
        let mut levels = vec![Vec::new(); order.len() + 1];
        levels[order.len()] = combine(&block, budget);
        for pos in (0..order.len()).rev() {
            add(&mut block, order[pos]);
            levels[pos] = combine(&block, budget);
        }
        Some(Frontiers { levels, blocks: block })
    }

    /// Networks of a lowest-loss split of all tasks within `budget`, read
    /// back from the frontier over every candidate.
    fn recover(&self, full: usize, budget: u64) -> Option<Vec<usize>> {
        let mut out = Vec::new();
        let (mut mask, mut room) = (full, budget);
        let mut target = self.lowest(0, mask, room);
        if !target.is_finite() {
            return None;
        }
        while mask != 0 {
            let low = mask & mask.wrapping_neg();
            let rest = mask ^ low;
            let mut s = rest;
            let step = loop {
                let b = low | s;
                let other = mask ^ b;
                let found = self.blocks[b].iter().find_map(|&(c1, l1, n)| {
                    let front = &self.levels[0][other];
                    front
                        .iter()
                        .take_while(|e| c1 + e.0 <= room)
                        .find(|e| l1 + e.1 == target)
                        .map(|e| (n, c1, other, e.1, e.0))
                });
                if found.is_some() || s == 0 {
                    break found;
                }
                s = (s - 1) & rest;
            };
            let (n, c1, other, rest_loss, _) = step?;
            out.push(n);
            mask = other;
            room -= c1;
            target = rest_loss;
        }
        out.sort_unstable();
        out.dedup();
        Some(out)
    }

    /// Lowest loss for splitting `mask` among networks from `order[pos..]`
    /// costing at most `room` in total.
    fn lowest(&self, pos: usize, mask: usize, room: u64) -> f64 {
        let level = if self.levels.len() == 1 { 0 } else { pos };
        let list = &self.levels[level][mask];
        match list.partition_point(|e| e.0 <= room) {
            0 => f64::INFINITY,
            i => list[i - 1].1,
        }
    }

    /// Lower bound on the final loss: tasks either keep their current winner
    /// or move to networks from `order[pos..]` added within `room`;
    /// uncovered tasks must move. Every current member keeps at least one of
    /// its tasks, since an optimum has no member that wins nothing.
    fn completion_bound(&self, pos: usize, winners: &[Option<(usize, f64)>], room: u64) -> f64 {
        let mut covered = 0usize;
        let mut uncovered = 0usize;
        let mut won: Vec<(usize, usize)> = Vec::new();
        for (t, w) in winners.iter().enumerate() {
            match w {
                Some((n, _)) => {
                    covered |= 1 << t;
                    match won.iter_mut().find(|(m, _)| m == n) {
                        Some((_, mask)) => *mask |= 1 << t,
                        None => won.push((*n, 1 << t)),
                    }
                }
                None => uncovered |= 1 << t,
            }
        }
        // `kept[s]`: summed current losses over `s`, for `s` within `covered`.
        let mut kept = vec![0.0; covered + 1];
        let mut best = f64::INFINITY;
        let mut s = 0usize;
        loop {
            if s != 0 {
                let low = s.trailing_zeros() as usize;
                kept[s] = kept[s & (s - 1)] + winners[low].expect("covered").1;
            }
            if won.iter().all(|&(_, mask)| s & mask != 0) {
                let moved = (covered ^ s) | uncovered;
                best = best.min(kept[s] + self.lowest(pos, moved, room));
            }
            if s == covered {
                break;
            }
            s = ((s | !covered) + 1) & covered;
        }
        best
    }
}

/// Frontiers for every mask from per-block options.
fn combine(block: &Blocks, budget: u64) -> Front {
    let size = block.len();
    let mut front: Front = vec![Vec::new(); size];
    front[0].push((0, 0.0));
    for mask in 1..size {
        let low = mask & mask.wrapping_neg();
        let rest = mask ^ low;
        let mut out = Vec::new();
        // Blocks holding the lowest task: `low | s` for `s` within `rest`.
        let mut s = rest;
        loop {
            let b = low | s;
            let other = mask ^ b;
            for &(c1, l1, _) in &block[b] {
                for &(c2, l2) in &front[other] {
                    if c1 + c2 > budget {
                        break;
                    }
                    out.push((c1 + c2, l1 + l2));
                }
            }
            if s == 0 {
                break;
            }
            s = (s - 1) & rest;
        }
        pareto(&mut out);
        front[mask] = out;
    }
    front
}

/// Keep the `(cost, loss)` points not dominated by a cheaper-or-equal,
/// lower-or-equal point; sorted by cost.
fn pareto(list: &mut Vec<(u64, f64)>) {
    list.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.partial_cmp(&b.1).expect("finite")));
    let mut last = f64::INFINITY;
    list.retain(|&(_, l)| {
        if l < last {
            last = l;
            true
        } else {
            false
        }
    });
}

fn subsets_up_to(m: usize, k: usize) -> u128 {
    let mut total: u128 = 0;
    let mut c: u128 = 1;
    for i in 1..=k.min(m) {
        c = c * (m - i + 1) as u128 / i as u128;
        total += c;
    }
    total
}

/// Exhaustive reference solver: scores every subset of at most `|tasks|`
/// candidates that fits the budget.
pub fn solve_oracle(table: &PerformanceTable, budget: Budget) -> Result<Solution, SolveError> {
    check_task_count(table)?;
    let k = table.task_set().len();
    let m = table.len();
    let subsets = subsets_up_to(m, k);
    if subsets > ORACLE_SUBSET_LIMIT {
        return Err(SolveError::TooManyCandidates {
            candidates: m,
            subsets,
            limit: ORACLE_SUBSET_LIMIT,
        });
    }
    let mut best: Option<Scored> = None;
    let mut members = Vec::with_capacity(k);
    enumerate_subsets(table, 0, k, budget.msnt(), 0, &mut members, &mut |members, cost| {
        if let Some(loss) = table.total_loss_of(members) {
            let candidate = Scored {
                loss,
                cost,
                members: members.to_vec(),
            };
            if best
                .as_ref()
                .is_none_or(|b| cmp_min(table, &candidate, b) == Ordering::Less)
            {
                best = Some(candidate);
            }
        }
    });
    match best {
        Some(b) => finish(table, b, budget),
        None => Err(SolveError::BudgetInfeasible {
            min_required_msnt: min_cover_costs(table)[table.task_set().full_mask() as usize],
        }),
    }
}

fn enumerate_subsets<F: FnMut(&[usize], u64)>(
    table: &PerformanceTable,
    start: usize,
    max_size: usize,
    budget: u64,
    cost: u64,
    members: &mut Vec<usize>,
    visit: &mut F,
) {
    if members.len() == max_size {
        return;
    }
    for n in start..table.len() {
        let c = cost + table.cost(n);
        if c > budget {
            continue;
        }
        members.push(n);
        visit(members, c);
        enumerate_subsets(table, n + 1, max_size, budget, c, members, visit);
        members.pop();
    }
}

/// Highest-loss covering solution within the budget, each task still scored
/// by its best member. The search runs over inclusion-minimal covers, where
/// the maximum is always attained.
pub fn solve_pessimal(table: &PerformanceTable, budget: Budget) -> Result<Solution, SolveError> {
    check_task_count(table)?;
    let cover = min_cover_costs(table);
    let full = table.task_set().full_mask();
    let min_required = cover[full as usize];
    if min_required > budget.msnt() {
        return Err(SolveError::BudgetInfeasible {
            min_required_msnt: min_required,
        });
    }
    let k = table.task_set().len();
    let worst: Vec<f64> = (0..k)
        .map(|t| {
            (0..table.len())
                .filter_map(|n| table.loss(n, t))
                .fold(0.0, f64::max)
        })
        .collect();
    let mut search = Pessimal {
        table,
        budget: budget.msnt(),
        cover,
        worst,
        best: None,
    };
    let mut members = Vec::with_capacity(k);
    search.descend(&mut members, full, 0);
    let best = search.best.take().expect("a feasible cover exists");
    finish(table, best, budget)
}

struct Pessimal<'a> {
    table: &'a PerformanceTable,
    budget: u64,
    cover: Vec<u64>,
    worst: Vec<f64>,
    best: Option<Scored>,
}

impl Pessimal<'_> {
    /// Every member still covers some task no other member covers.
    fn all_private(&self, members: &[usize]) -> bool {
        members.iter().enumerate().all(|(i, &n)| {
            let others = members
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .fold(0, |acc, (_, &o)| acc | self.table.coverage(o));
            self.table.coverage(n) & !others != 0
        })
    }

    fn descend(&mut self, members: &mut Vec<usize>, uncovered: TaskMask, cost: u64) {
        let table = self.table;
        if uncovered == 0 {
            let loss = table.total_loss_of(members).expect("covered");
            let candidate = Scored {
                loss,
                cost,
                members: members.clone(),
            };
            if self
                .best
                .as_ref()
                .is_none_or(|b| cmp_max(table, &candidate, b) == Ordering::Less)
            {
                self.best = Some(candidate);
            }
            return;
        }
        if let Some(best) = &self.best {
            // Covered tasks can only get better, uncovered ones are at most
            // their worst reported loss.
            let mut upper = 0.0;
            for t in 0..table.task_set().len() {
                upper += if uncovered & (1 << t) != 0 {
                    self.worst[t]
                } else {
                    members
                        .iter()
                        .filter_map(|&n| table.loss(n, t))
                        .fold(f64::INFINITY, f64::min)
                };
            }
            if upper < best.loss {
                return;
            }
        }
        let t = uncovered.trailing_zeros() as usize;
        for n in 0..table.len() {
            if table.coverage(n) & (1 << t) == 0 || members.contains(&n) {
                continue;
            }
            let c = cost + table.cost(n);
            let rest = uncovered & !table.coverage(n);
            let need = self.cover[rest as usize];
            if need == u64::MAX || c + need > self.budget {
                continue;
            }
            members.push(n);
            if self.all_private(members) {
                self.descend(members, rest, c);
            }
            members.pop();
        }
    }
}

/// Summary of a Monte Carlo random-grouping baseline.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RandomMeanReport {
    pub budget_msnt: u64,
    pub trials: u64,
    pub seed: u64,
    pub mean_loss: f64,
    pub std_dev: f64,
    pub rejected: u64,
    pub max_cost_msnt: u64,
}

/// Restricted-growth-string counts: `ways[r][m]` is the number of ways to
/// finish a string with `r` positions left and `m` blocks opened so far.
struct PartitionCounts {
    ways: Vec<Vec<u128>>,
}

impl PartitionCounts {
    fn new(k: usize) -> Self {
        let mut ways = vec![vec![0u128; k + 2]; k + 1];
        for m in 0..=k + 1 {
            ways[0][m] = 1;
        }
        for r in 1..=k {
            for m in 0..=k {
                ways[r][m] = m as u128 * ways[r - 1][m] + ways[r - 1][m + 1];
            }
        }
        PartitionCounts { ways }
    }

    /// Uniformly random set partition of `k` items as block labels.
    fn sample<R: Rng>(&self, k: usize, rng: &mut R, labels: &mut Vec<usize>) -> usize {
        labels.clear();
        let mut blocks = 0;
        for i in 0..k {
            let r = k - i - 1;
            let total = self.ways[r + 1][blocks];
            let draw = rng.random_range(0..total);
            let per_existing = self.ways[r][blocks];
            let existing = blocks as u128 * per_existing;
            if draw < existing {
                labels.push((draw / per_existing) as usize);
            } else {
                labels.push(blocks);
                blocks += 1;
            }
        }
        blocks
    }
}

/// Networks keyed by the exact task subset they solve, ids ascending.
fn exact_coverage_index(table: &PerformanceTable) -> HashMap<TaskMask, Vec<usize>> {
    let mut index: HashMap<TaskMask, Vec<usize>> = HashMap::new();
    for n in 0..table.len() {
        index.entry(table.coverage(n)).or_default().push(n);
    }
    for list in index.values_mut() {
        list.sort_by(|&a, &b| table.network(a).id().cmp(table.network(b).id()));
    }
    index
}

#[derive(Default, Clone, Copy)]
struct Running {
    count: u64,
    mean: f64,
    m2: f64,
    rejected: u64,
    max_cost: u64,
}

impl Running {
    fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(self, other: Running) -> Running {
        if self.count == 0 {
            return Running {
                rejected: self.rejected + other.rejected,
                max_cost: self.max_cost.max(other.max_cost),
                ..other
            };
        }
        if other.count == 0 {
            return Running {
                rejected: self.rejected + other.rejected,
                max_cost: self.max_cost.max(other.max_cost),
                ..self
            };
        }
        let count = self.count + other.count;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * other.count as f64 / count as f64;
        let m2 = self.m2 + other.m2 + delta * delta * (self.count as f64 * other.count as f64) / count as f64;
        Running {
            count,
            mean,
            m2,
            rejected: self.rejected + other.rejected,
            max_cost: self.max_cost.max(other.max_cost),
        }
    }
}

/// Mean total loss of random valid groupings.
///
/// Each trial draws a uniformly random partition of the tasks into non-empty
/// groups and maps each group to a network solving exactly that group,
/// picking uniformly when several exist (e.g. the full- and half-size
/// single-task networks). Draws that miss a network or exceed the budget
/// are rejected and redrawn. Trials are split over [`RANDOM_SHARDS`] fixed
/// ChaCha streams derived from `seed`, so the result does not depend on the
/// thread count.
pub fn solve_random_mean(
    table: &PerformanceTable,
    budget: Budget,
    trials: u64,
    seed: u64,
) -> Result<RandomMeanReport, SolveError> {
    check_task_count(table)?;
    if trials == 0 {
        return Err(SolveError::InvalidParameter("trials must be positive".into()));
    }
    let min_required = min_cover_cost(table)?;
    if min_required > budget.msnt() {
        return Err(SolveError::BudgetInfeasible {
            min_required_msnt: min_required,
        });
    }
    let k = table.task_set().len();
    let index = exact_coverage_index(table);
    if k <= 10 && !feasible_partition_exists(table, &index, budget.msnt()) {
        return Err(SolveError::NoFeasiblePartition { attempts: 0 });
    }
    let counts = PartitionCounts::new(k);

    let shards: Vec<Result<Running, SolveError>> = (0..RANDOM_SHARDS)
        .into_par_iter()
        .map(|shard| {
            let share = trials / RANDOM_SHARDS + u64::from(shard < trials % RANDOM_SHARDS);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(shard);
            let mut acc = Running::default();
            let mut labels = Vec::with_capacity(k);
            let mut groups: Vec<TaskMask> = Vec::with_capacity(k);
            let mut picks: Vec<usize> = Vec::with_capacity(k);
            let mut streak = 0u64;
            while acc.count < share {
                let blocks = counts.sample(k, &mut rng, &mut labels);
                groups.clear();
                groups.resize(blocks, 0);
                for (t, &b) in labels.iter().enumerate() {
                    groups[b] |= 1 << t;
                }
                picks.clear();
                let mut cost = 0;
                let mut valid = true;
                for g in &groups {
                    match index.get(g) {
                        Some(options) => {
                            let n = if options.len() == 1 {
                                options[0]
                            } else {
                                options[rng.random_range(0..options.len())]
                            };
                            cost += table.cost(n);
                            picks.push(n);
                        }
                        None => valid = false,
                    }
                }
                if !valid || cost > budget.msnt() {
                    acc.rejected += 1;
                    streak += 1;
                    if streak >= MAX_CONSECUTIVE_REJECTIONS {
                        return Err(SolveError::NoFeasiblePartition { attempts: acc.rejected });
                    }
                    continue;
                }
                streak = 0;
                picks.sort_unstable();
                let loss = table.total_loss_of(&picks).expect("partition covers every task");
                acc.push(loss);
                acc.max_cost = acc.max_cost.max(cost);
            }
            Ok(acc)
        })
        .collect();

    let mut total = Running::default();
    for shard in shards {
        total = total.merge(shard?);
    }
    let std_dev = if total.count > 1 {
        (total.m2 / (total.count - 1) as f64).max(0.0).sqrt()
    } else {
        0.0
    };
    Ok(RandomMeanReport {
        budget_msnt: budget.msnt(),
        trials,
        seed,
        mean_loss: total.mean,
        std_dev,
        rejected: total.rejected,
        max_cost_msnt: total.max_cost,
    })
}

/// Exhaustive check that some partition maps to networks within budget.
fn feasible_partition_exists(
    table: &PerformanceTable,
    index: &HashMap<TaskMask, Vec<usize>>,
    budget: u64,
) -> bool {
    fn go(
        t: usize,
        k: usize,
        groups: &mut Vec<TaskMask>,
        table: &PerformanceTable,
        index: &HashMap<TaskMask, Vec<usize>>,
        budget: u64,
    ) -> bool {
        if t == k {
            let cost: Option<u64> = groups
                .iter()
                .map(|g| {
                    index
                        .get(g)
                        .map(|opts| opts.iter().map(|&n| table.cost(n)).min().expect("non-empty"))
                })
                .sum();
            return cost.is_some_and(|c| c <= budget);
        }
        for b in 0..groups.len() {
            groups[b] |= 1 << t;
            let ok = go(t + 1, k, groups, table, index, budget);
            groups[b] &= !(1 << t);
            if ok {
                return true;
            }
        }
        groups.push(1 << t);
        let ok = go(t + 1, k, groups, table, index, budget);
        groups.pop();
        ok
    }
    let mut groups = Vec::new();
    go(0, table.task_set().len(), &mut groups, table, index, budget)
}

/// Best single network solving every task within the budget.
pub fn solve_all_in_one(table: &PerformanceTable, budget: Budget) -> Result<Solution, SolveError> {
    let full = table.task_set().full_mask();
    let all: Vec<usize> = (0..table.len()).filter(|&n| table.coverage(n) == full).collect();
    if all.is_empty() {
        return Err(SolveError::NoAllInOneNetwork);
    }
    let best = all
        .iter()
        .filter(|&&n| table.cost(n) <= budget.msnt())
        .map(|&n| Scored {
            loss: table.total_loss_of(&[n]).expect("covers all"),
            cost: table.cost(n),
            members: vec![n],
        })
        .min_by(|a, b| cmp_min(table, a, b));
    match best {
        Some(b) => finish(table, b, budget),
        None => Err(SolveError::BudgetInfeasible {
            min_required_msnt: all.iter().map(|&n| table.cost(n)).min().expect("non-empty"),
        }),
    }
}

/// Best combination of single-task networks within the budget.
pub fn solve_independent(table: &PerformanceTable, budget: Budget) -> Result<Solution, SolveError> {
    let singles = table.filter(|n| n.losses().len() == 1)?;
    solve_optimal(&singles, budget)
}

/// Selection strategy compared in a budget sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Optimal,
    Pessimal,
    RandomMean,
    AllInOne,
    Independent,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Optimal => "optimal",
            Method::Pessimal => "pessimal",
            Method::RandomMean => "random_mean",
            Method::AllInOne => "all_in_one",
            Method::Independent => "independent",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = SolveError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "optimal" => Ok(Method::Optimal),
            "pessimal" => Ok(Method::Pessimal),
            "random" | "random_mean" => Ok(Method::RandomMean),
            "all_in_one" | "all-in-one" => Ok(Method::AllInOne),
            "independent" => Ok(Method::Independent),
            other => Err(SolveError::InvalidParameter(format!("unknown method {other:?}"))),
        }
    }
}

/// One solved (budget, method) cell of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub budget: Budget,
    pub method: Method,
    /// For [`Method::RandomMean`] this carries the mean loss, the largest
    /// sampled cost and no network ids.
    pub solution: Solution,
    pub random: Option<RandomMeanReport>,
}

/// Sweep cell: a point, or an explicit marker when the method has no
/// feasible answer at that budget.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepOutcome {
    Point(SweepPoint),
    Infeasible {
        budget: Budget,
        method: Method,
        error: SolveError,
    },
}

impl SweepOutcome {
    pub fn budget(&self) -> Budget {
        match self {
            SweepOutcome::Point(p) => p.budget,
            SweepOutcome::Infeasible { budget, .. } => *budget,
        }
    }

    pub fn method(&self) -> Method {
        match self {
            SweepOutcome::Point(p) => p.method,
            SweepOutcome::Infeasible { method, .. } => *method,
        }
    }

    pub fn point(&self) -> Option<&SweepPoint> {
        match self {
            SweepOutcome::Point(p) => Some(p),
            SweepOutcome::Infeasible { .. } => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub from_msnt: u64,
    pub to_msnt: u64,
    pub step_msnt: u64,
    pub methods: Vec<Method>,
    pub trials: u64,
    pub seed: u64,
}

impl SweepConfig {
    pub fn budgets(&self) -> Result<Vec<Budget>, SolveError> {
        if self.step_msnt == 0 {
            return Err(SolveError::InvalidParameter("step must be positive".into()));
        }
        if self.from_msnt > self.to_msnt {
            return Err(SolveError::InvalidParameter("sweep start exceeds its end".into()));
        }
        (self.from_msnt..=self.to_msnt)
            .step_by(self.step_msnt as usize)
            .map(Budget::from_msnt)
            .collect()
    }
}

/// Solve every (budget, method) pair. Rows come out budget-major in the
/// order of `config.methods`; cells are computed in parallel.
pub fn sweep(table: &PerformanceTable, config: &SweepConfig) -> Result<Vec<SweepOutcome>, SolveError> {
    check_task_count(table)?;
    let cells: Vec<(Budget, Method)> = config
        .budgets()?
        .into_iter()
        .flat_map(|b| config.methods.iter().map(move |&m| (b, m)))
        .collect();
    Ok(cells
        .into_par_iter()
        .map(|(budget, method)| match solve_point(table, budget, method, config) {
            Ok(point) => SweepOutcome::Point(point),
            Err(error) => SweepOutcome::Infeasible { budget, method, error },
        })
        .collect())
}

fn solve_point(
    table: &PerformanceTable,
    budget: Budget,
    method: Method,
    config: &SweepConfig,
) -> Result<SweepPoint, SolveError> {
    let (solution, random) = match method {
        Method::Optimal => (solve_optimal(table, budget)?, None),
        Method::Pessimal => (solve_pessimal(table, budget)?, None),
        Method::AllInOne => (solve_all_in_one(table, budget)?, None),
        Method::Independent => (solve_independent(table, budget)?, None),
        Method::RandomMean => {
            let report = solve_random_mean(table, budget, config.trials, config.seed)?;
            let solution = Solution {
                network_ids: Vec::new(),
                budget_msnt: Some(budget.msnt()),
                per_task: Vec::new(),
                total_loss: report.mean_loss,
                cost_msnt: report.max_cost_msnt,
            };
            (solution, Some(report))
        }
    };
    Ok(SweepPoint {
        budget,
        method,
        solution,
        random,
    })
}
