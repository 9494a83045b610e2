//! Exact solver for the global labelling-and-partitioning problem at small
//! scale.
//!
//! Each proposal is either suppressed or given one of `J` labels, and kept
//! proposals are partitioned into persons; the cost of a pair applies when
//! both are kept and in the same person. The search first branches on the
//! labels of all proposals, then enumerates partitions of the kept ones as
//! restricted-growth strings, pruning both levels with admissible bounds.

use crate::error::{Error, Result};
use crate::model::{log_odds_cost, GlobalInstance, GlobalSolution, PairTable, Point};

pub const DEFAULT_MAX_PROPOSALS: usize = 10;
pub const DEFAULT_MAX_LABELS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlobalSolverConfig {
    pub max_proposals: usize,
    pub max_labels: usize,
}

impl Default for GlobalSolverConfig {
    fn default() -> Self {
        Self {
            max_proposals: DEFAULT_MAX_PROPOSALS,
            max_labels: DEFAULT_MAX_LABELS,
        }
    }
}

/// Stores the probabilities and their log-odds costs.
///
/// `p_pair` blocks are `J x J` row-major, indexed by the labels of the
/// lower and higher proposal of each pair. Probabilities are clamped away
/// from 0 and 1 first.
pub fn build_global_instance(
    proposals: Vec<Point>,
    p_label: Vec<Vec<f64>>,
    p_pair: PairTable<Vec<f64>>,
    single_person: bool,
) -> Result<GlobalInstance> {
    let num_labels = p_label.first().map_or(0, Vec::len);
    if num_labels == 0 && !proposals.is_empty() {
        return Err(Error::Structure("global instance needs at least one label".into()));
    }
    let p_label: Vec<Vec<f64>> = p_label
        .into_iter()
        .map(|r| r.into_iter().map(crate::model::clamp_probability).collect())
        .collect();
    let p_pair = p_pair.map(|b| {
        b.iter()
            .copied()
            .map(crate::model::clamp_probability)
            .collect::<Vec<_>>()
    });
    let alpha = p_label
        .iter()
        .map(|r| r.iter().copied().map(log_odds_cost).collect())
        .collect();
    let beta = p_pair.map(|b| b.iter().copied().map(log_odds_cost).collect::<Vec<_>>());
    let inst = GlobalInstance {
        proposals,
        num_labels: num_labels.max(1),
        p_label,
        p_pair,
        alpha,
        beta,
        single_person,
    };
    inst.validate()?;
    Ok(inst)
}

fn tie_tolerance(best: f64) -> f64 {
    1e-11 * best.abs().max(1.0)
}

struct GlobalSearch<'a> {
    inst: &'a GlobalInstance,
    n: usize,
    k: usize,
    label: Vec<Option<usize>>,
    /// `min(0, min over label pairs of beta)` per proposal pair.
    pair_floor: PairTable<f64>,
    best: f64,
    best_label: Vec<Option<usize>>,
    best_cluster: Vec<Option<usize>>,
    nodes: u64,
}

impl<'a> GlobalSearch<'a> {
    fn new(inst: &'a GlobalInstance) -> Self {
        let n = inst.len();
        let pair_floor = inst.beta.map(|b| b.iter().copied().fold(0.0_f64, f64::min));
        Self {
            inst,
            n,
            k: inst.num_labels,
            label: vec![None; n],
            pair_floor,
            best: 0.0,
            best_label: vec![None; n],
            best_cluster: vec![None; n],
            nodes: 0,
        }
    }

    /// Pair cost as it can contribute to the lower bound: exact when kept
    /// pairs are forced together, otherwise only its attractive part.
    fn decided_pair(&self, c: f64) -> f64 {
        if self.inst.single_person {
            c
        } else {
            c.min(0.0)
        }
    }

    fn label_bound(&self, depth: usize) -> f64 {
        let inst = self.inst;
        let mut bound = 0.0;
        for d in 0..depth {
            let Some(jd) = self.label[d] else { continue };
            bound += inst.alpha[d][jd];
            for e in d + 1..depth {
                if let Some(je) = self.label[e] {
                    bound += self.decided_pair(inst.pair_cost(d, jd, e, je));
                }
            }
        }
        for d in depth..self.n {
            let half: f64 = (depth..self.n)
                .filter(|&e| e != d)
                .map(|e| 0.5 * self.pair_floor.get(d, e))
                .sum();
            let best_label = (0..self.k)
                .map(|j| {
                    let mut c = inst.alpha[d][j];
                    for e in 0..depth {
                        if let Some(je) = self.label[e] {
                            c += self.decided_pair(inst.pair_cost(d, j, e, je));
                        }
                    }
                    c
                })
                .fold(f64::INFINITY, f64::min);
            bound += (best_label + half).min(0.0);
        }
        bound
    }

    fn search_labels(&mut self, depth: usize) {
        self.nodes += 1;
        if self.label_bound(depth) >= self.best - tie_tolerance(self.best) {
            return;
        }
        if depth == self.n {
            self.partition_kept();
            return;
        }
        // Suppression first, then labels from high to low: this visits label
        // matrices in ascending lexicographic order.
        let options = std::iter::once(None).chain((0..self.k).rev().map(Some));
        for opt in options {
            self.label[depth] = opt;
            self.search_labels(depth + 1);
        }
        self.label[depth] = None;
    }

    fn partition_kept(&mut self) {
        let kept: Vec<usize> = (0..self.n).filter(|&d| self.label[d].is_some()).collect();
        let unary: f64 = kept.iter().map(|&d| self.inst.alpha[d][self.label[d].unwrap()]).sum();
        let m = kept.len();
        let w = PairTable::from_fn(m, |a, b| {
            let (da, db) = (kept[a], kept[b]);
            self.inst
                .pair_cost(da, self.label[da].unwrap(), db, self.label[db].unwrap())
        });
        if self.inst.single_person {
            let total = unary + w.values().iter().sum::<f64>();
            if total < self.best - tie_tolerance(self.best) {
                self.record(total, &kept, &vec![0; m]);
            }
            return;
        }
        let mut part = PartitionSearch {
            w: &w,
            m,
            cluster_of: vec![0; m],
            members: Vec::new(),
            best: self.best - unary,
            best_assign: None,
            nodes: 0,
        };
        part.run(0, 0.0);
        self.nodes += part.nodes;
        if let Some(assign) = part.best_assign {
            self.record(unary + part.best, &kept, &assign);
        }
    }

    fn record(&mut self, objective: f64, kept: &[usize], assign: &[usize]) {
        self.best = objective;
        self.best_label = self.label.clone();
        self.best_cluster = vec![None; self.n];
        for (&d, &c) in kept.iter().zip(assign) {
            self.best_cluster[d] = Some(c);
        }
    }
}

struct PartitionSearch<'a> {
    w: &'a PairTable<f64>,
    m: usize,
    cluster_of: Vec<usize>,
    members: Vec<Vec<usize>>,
    best: f64,
    best_assign: Option<Vec<usize>>,
    nodes: u64,
}

impl PartitionSearch<'_> {
    fn bound(&self, depth: usize, cost: f64) -> f64 {
        let mut bound = cost;
        for a in depth..self.m {
            let join = self
                .members
                .iter()
                .map(|c| c.iter().map(|&i| self.w.get(a, i)).sum::<f64>())
                .fold(0.0_f64, f64::min);
            let half: f64 = (depth..self.m)
                .filter(|&b| b != a)
                .map(|b| 0.5 * self.w.get(a, b).min(0.0))
                .sum();
            bound += join + half;
        }
        bound
    }

    fn run(&mut self, depth: usize, cost: f64) {
        self.nodes += 1;
        if self.bound(depth, cost) >= self.best - tie_tolerance(self.best) {
            return;
        }
        if depth == self.m {
            self.best = cost;
            self.best_assign = Some(self.cluster_of.clone());
            return;
        }
        // A fresh person first, then each existing one in creation order.
        self.members.push(vec![depth]);
        self.cluster_of[depth] = self.members.len() - 1;
        self.run(depth + 1, cost);
        self.members.pop();
        for c in 0..self.members.len() {
            let extra: f64 = self.members[c].iter().map(|&i| self.w.get(depth, i)).sum();
            self.members[c].push(depth);
            self.cluster_of[depth] = c;
            self.run(depth + 1, cost + extra);
            self.members[c].pop();
        }
    }
}

/// Exact minimiser with the default caps (10 proposals, 4 labels).
pub fn solve_global_exact(inst: &GlobalInstance) -> Result<GlobalSolution> {
    solve_global_exact_with(inst, &GlobalSolverConfig::default()).map(|(s, _)| s)
}

/// Exact minimiser; also returns the number of search nodes visited.
///
/// Among optimal solutions the one with the lexicographically smallest
/// label matrix is returned; partitions tie-break by enumeration order.
pub fn solve_global_exact_with(inst: &GlobalInstance, cfg: &GlobalSolverConfig) -> Result<(GlobalSolution, u64)> {
    if inst.len() > cfg.max_proposals {
        return Err(Error::InstanceTooLarge {
            what: "proposals in global instance",
            size: inst.len(),
            cap: cfg.max_proposals,
        });
    }
    if inst.num_labels > cfg.max_labels {
        return Err(Error::InstanceTooLarge {
            what: "labels in global instance",
            size: inst.num_labels,
            cap: cfg.max_labels,
        });
    }
    inst.validate()?;
    let mut search = GlobalSearch::new(inst);
    search.search_labels(0);
    let sol = GlobalSolution::from_assignment(inst, &search.best_label, &search.best_cluster);
    Ok((sol, search.nodes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_global_solution;

    fn points(n: usize) -> Vec<Point> {
        (0..n).map(|i| Point::new(i as f64, 0.0)).collect()
    }

    #[test]
    fn half_probabilities_cost_nothing() {
        let inst = build_global_instance(
            points(3),
            vec![vec![0.5; 2]; 3],
            PairTable::filled(3, vec![0.5; 4]),
            false,
        )
        .unwrap();
        assert!(inst.alpha.iter().flatten().all(|&a| a == 0.0));
        assert!(inst.beta.values().iter().flatten().all(|&b| b == 0.0));
    }

    #[test]
    fn single_unary_cost() {
        let inst = build_global_instance(points(1), vec![vec![0.9]], PairTable::filled(1, vec![]), false).unwrap();
        assert!((inst.alpha[0][0] - (0.1f64 / 0.9).ln()).abs() < 1e-15);
        assert!((inst.alpha[0][0] + 2.197_224_577_336_219_6).abs() < 1e-12);
    }

    #[test]
    fn pair_cost_is_antisymmetric_in_probability() {
        for p in [0.01, 0.3, 0.5, 0.77] {
            assert!((log_odds_cost(p) + log_odds_cost(1.0 - p)).abs() < 1e-12);
        }
    }

    #[test]
    fn costly_everything_is_suppressed() {
        let inst = build_global_instance(
            points(4),
            vec![vec![0.2; 2]; 4],
            PairTable::filled(4, vec![0.3; 4]),
            false,
        )
        .unwrap();
        let sol = solve_global_exact(&inst).unwrap();
        assert_eq!(sol.objective, 0.0);
        assert!(sol.labels.iter().flatten().all(|&x| !x));
        assert!(sol.clusters.is_empty());
    }

    #[test]
    fn two_proposals_single_person() {
        // alpha = (-1, -1), beta = -1; best is both kept and grouped: -3.
        let mut inst =
            build_global_instance(points(2), vec![vec![0.5]; 2], PairTable::filled(2, vec![0.5]), true).unwrap();
        inst.alpha = vec![vec![-1.0], vec![-1.0]];
        inst.beta = PairTable::filled(2, vec![-1.0]);
        let sol = solve_global_exact(&inst).unwrap();
        assert_eq!(sol.objective, -3.0);
        assert_eq!(sol.clusters, vec![vec![0, 1]]);
        assert!(validate_global_solution(&inst, &sol).unwrap().is_empty());
    }

    #[test]
    fn repulsive_pair_splits_persons() {
        let mut inst =
            build_global_instance(points(2), vec![vec![0.5]; 2], PairTable::filled(2, vec![0.5]), false).unwrap();
        inst.alpha = vec![vec![-1.0], vec![-1.0]];
        inst.beta = PairTable::filled(2, vec![5.0]);
        let sol = solve_global_exact(&inst).unwrap();
        assert_eq!(sol.objective, -2.0);
        assert_eq!(sol.clusters, vec![vec![0], vec![1]]);
        inst.single_person = true;
        let sol = solve_global_exact(&inst).unwrap();
        assert_eq!(sol.objective, -1.0);
    }

    #[test]
    fn caps() {
        let big =
            build_global_instance(points(11), vec![vec![0.5]; 11], PairTable::filled(11, vec![0.5]), false).unwrap();
        assert!(matches!(solve_global_exact(&big), Err(Error::InstanceTooLarge { .. })));
        let wide = build_global_instance(
            points(2),
            vec![vec![0.5; 5]; 2],
            PairTable::filled(2, vec![0.5; 25]),
            false,
        )
        .unwrap();
        assert!(matches!(solve_global_exact(&wide), Err(Error::InstanceTooLarge { .. })));
    }

    #[test]
    fn probabilities_are_clamped() {
        let inst = build_global_instance(
            points(2),
            vec![vec![0.0, 1.0]; 2],
            PairTable::filled(2, vec![1.0; 4]),
            false,
        )
        .unwrap();
        assert!(inst.alpha.iter().flatten().all(|a| a.is_finite()));
        assert!(inst.beta.values().iter().flatten().all(|b| b.is_finite()));
    }
}
