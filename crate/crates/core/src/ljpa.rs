//! Exact solver for the per-person association problem.
//!
//! The linking constraints force `y_dd' = x_d AND x_d'` in every feasible
//! point: `y <= x_d`, `y <= x_d'` give `y <= x_d x_d'`, and
//! `x_d + x_d' - 1 <= y` gives `y >= x_d x_d'`. Transitivity then holds
//! automatically because the linked set is a clique on the kept detections.
//! Substituting removes `y` and leaves a binary quadratic program in `x`
//! alone, which [`solve_exact`] minimises by depth-first branch-and-bound.

use crate::error::{Error, Result};
use crate::model::{AssociationInstance, AssociationSolution, Keypoint, PairTable, PersonPose, Region, NUM_JOINTS};

/// Largest instance [`solve_bruteforce`] will enumerate.
pub const BRUTEFORCE_CAP: usize = 20;

/// Default detection cap for [`solve_exact`].
pub const DEFAULT_MAX_DETECTIONS: usize = 200;

/// Minimise `sum_d a_d x_d + sum_{d<d'} b_dd' x_d x_d'` over binary `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Qubo {
    pub linear: Vec<f64>,
    pub quadratic: PairTable<f64>,
}

impl Qubo {
    pub fn len(&self) -> usize {
        self.linear.len()
    }

    pub fn is_empty(&self) -> bool {
        self.linear.is_empty()
    }

    /// Evaluates the form, summing in canonical order.
    pub fn evaluate(&self, x: &[bool]) -> f64 {
        let n = self.len();
        let mut total = 0.0;
        for i in 0..n {
            if !x[i] {
                continue;
            }
            total += self.linear[i];
            for j in i + 1..n {
                if x[j] {
                    total += self.quadratic.get(i, j);
                }
            }
        }
        total
    }
}

/// Eliminates the pair variables: `a = alpha`, `b = beta`.
pub fn reduce_to_qubo(inst: &AssociationInstance) -> Qubo {
    Qubo {
        linear: inst.alpha.clone(),
        quadratic: inst.beta.clone(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub max_detections: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_detections: DEFAULT_MAX_DETECTIONS,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SearchStats {
    pub nodes: u64,
    pub leaves: u64,
}

fn tie_tolerance(best: f64) -> f64 {
    1e-11 * best.abs().max(1.0)
}

/// `a < b` in lexicographic order with `false < true`.
fn lex_less(a: &[bool], b: &[bool]) -> bool {
    a.iter().zip(b).find(|(x, y)| x != y).is_some_and(|(x, _)| !*x)
}

/// Admissible lower bound on the form over all completions of `partial`.
///
/// With `F1` the variables fixed to one and `U` the free ones:
/// `cost(F1) + sum_{d in U} min(0, a_d + sum_{e in F1} b_de + h_d)`, where
/// `h_d = 1/2 sum_{e in U, e != d} min(0, b_de)`. It holds because each
/// negative free pair satisfies `b x_d x_e >= b (x_d + x_e) / 2`. This
/// dominates the simpler bound that adds all negative free-pair costs
/// separately from the unaries.
pub fn lower_bound(qubo: &Qubo, partial: &[Option<bool>]) -> f64 {
    let n = qubo.len();
    let mut bound = 0.0;
    for i in 0..n {
        match partial[i] {
            Some(true) => {
                bound += qubo.linear[i];
                for j in i + 1..n {
                    if partial[j] == Some(true) {
                        bound += qubo.quadratic.get(i, j);
                    }
                }
            }
            Some(false) => {}
            None => {
                let mut lin = qubo.linear[i];
                let mut half_neg = 0.0;
                for j in 0..n {
                    if j == i {
                        continue;
                    }
                    let b = *qubo.quadratic.get(i, j);
                    match partial[j] {
                        Some(true) => lin += b,
                        None => half_neg += 0.5 * b.min(0.0),
                        Some(false) => {}
                    }
                }
                bound += (lin + half_neg).min(0.0);
            }
        }
    }
    bound
}

struct Search<'a> {
    qubo: &'a Qubo,
    order: Vec<usize>,
    assign: Vec<Option<bool>>,
    fixed_cost: f64,
    lin: Vec<f64>,
    half_neg: Vec<f64>,
    best: f64,
    best_x: Vec<bool>,
    stats: SearchStats,
}

impl<'a> Search<'a> {
    fn new(qubo: &'a Qubo) -> Self {
        let n = qubo.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| qubo.linear[b].abs().total_cmp(&qubo.linear[a].abs()).then(a.cmp(&b)));
        let half_neg = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| j != i)
                    .map(|j| 0.5 * qubo.quadratic.get(i, j).min(0.0))
                    .sum()
            })
            .collect();
        let (best_x, best) = greedy_incumbent(qubo);
        Self {
            qubo,
            order,
            assign: vec![None; n],
            fixed_cost: 0.0,
            lin: qubo.linear.clone(),
            half_neg,
            best,
            best_x,
            stats: SearchStats::default(),
        }
    }

    fn bound(&self) -> f64 {
        let free: f64 = self
            .assign
            .iter()
            .enumerate()
            .filter(|(_, a)| a.is_none())
            .map(|(i, _)| (self.lin[i] + self.half_neg[i]).min(0.0))
            .sum();
        self.fixed_cost + free
    }

    /// Whether the lexicographically smallest completion (all free variables
    /// zero) precedes the incumbent.
    fn subtree_may_precede_incumbent(&self) -> bool {
        let lexmin: Vec<bool> = self.assign.iter().map(|a| a.unwrap_or(false)).collect();
        lex_less(&lexmin, &self.best_x)
    }

    fn fix(&mut self, k: usize, value: bool) {
        self.assign[k] = Some(value);
        if value {
            self.fixed_cost += self.lin[k];
        }
        for d in 0..self.assign.len() {
            if self.assign[d].is_some() {
                continue;
            }
            let b = *self.qubo.quadratic.get(d, k);
            self.half_neg[d] -= 0.5 * b.min(0.0);
            if value {
                self.lin[d] += b;
            }
        }
    }

    fn unfix(&mut self, k: usize, value: bool) {
        for d in 0..self.assign.len() {
            if self.assign[d].is_some() {
                continue;
            }
            let b = *self.qubo.quadratic.get(d, k);
            self.half_neg[d] += 0.5 * b.min(0.0);
            if value {
                self.lin[d] -= b;
            }
        }
        if value {
            self.fixed_cost -= self.lin[k];
        }
        self.assign[k] = None;
    }

    fn run(&mut self, depth: usize) {
        self.stats.nodes += 1;
        let bound = self.bound();
        let tol = tie_tolerance(self.best);
        if bound > self.best + tol {
            return;
        }
        if bound >= self.best - tol && !self.subtree_may_precede_incumbent() {
            return;
        }
        if depth == self.order.len() {
            self.stats.leaves += 1;
            let x: Vec<bool> = self.assign.iter().map(|a| a.unwrap_or(false)).collect();
            let obj = self.qubo.evaluate(&x);
            if obj < self.best - tol || (obj <= self.best + tol && lex_less(&x, &self.best_x)) {
                self.best = obj;
                self.best_x = x;
            }
            return;
        }
        let k = self.order[depth];
        let first = self.lin[k] + self.half_neg[k] < 0.0;
        for value in [first, !first] {
            self.fix(k, value);
            self.run(depth + 1);
            self.unfix(k, value);
        }
    }
}

/// Best single-flip descent from the empty selection.
fn greedy_incumbent(qubo: &Qubo) -> (Vec<bool>, f64) {
    let n = qubo.len();
    let mut x = vec![false; n];
    let mut gain: Vec<f64> = qubo.linear.clone();
    for _ in 0..n * n + 1 {
        let mut pick = None;
        let mut best_delta = -1e-12;
        for i in 0..n {
            let delta = if x[i] { -gain[i] } else { gain[i] };
            if delta < best_delta {
                best_delta = delta;
                pick = Some(i);
            }
        }
        let Some(i) = pick else { break };
        x[i] = !x[i];
        let sign = if x[i] { 1.0 } else { -1.0 };
        for j in 0..n {
            if j != i {
                gain[j] += sign * qubo.quadratic.get(i, j);
            }
        }
    }
    let obj = qubo.evaluate(&x);
    if obj < 0.0 {
        (x, obj)
    } else {
        (vec![false; n], 0.0)
    }
}

/// Minimises the association objective exactly with the default cap.
pub fn solve_exact(inst: &AssociationInstance) -> Result<AssociationSolution> {
    solve_exact_with(inst, &SolverConfig::default()).map(|(s, _)| s)
}

/// Branch-and-bound over the selection variables.
///
/// Variables are branched in order of decreasing `|alpha|`. Among optimal
/// selections the lexicographically smallest `x` is returned, matching
/// [`solve_bruteforce`].
pub fn solve_exact_with(inst: &AssociationInstance, cfg: &SolverConfig) -> Result<(AssociationSolution, SearchStats)> {
    if inst.len() > cfg.max_detections {
        return Err(Error::InstanceTooLarge {
            what: "detections in local instance",
            size: inst.len(),
            cap: cfg.max_detections,
        });
    }
    let qubo = reduce_to_qubo(inst);
    let mut search = Search::new(&qubo);
    search.run(0);
    let stats = search.stats;
    Ok((AssociationSolution::from_selection(inst, search.best_x), stats))
}

/// Exhaustive enumeration of all selections; the test oracle.
pub fn solve_bruteforce(inst: &AssociationInstance) -> Result<AssociationSolution> {
    let n = inst.len();
    if n > BRUTEFORCE_CAP {
        return Err(Error::InstanceTooLarge {
            what: "detections for exhaustive enumeration",
            size: n,
            cap: BRUTEFORCE_CAP,
        });
    }
    let qubo = reduce_to_qubo(inst);
    let mut best = 0.0;
    let mut best_x = vec![false; n];
    let mut x = vec![false; n];
    // Counting with x[0] as the most significant bit visits selections in
    // ascending lexicographic order, so the first optimum found is the
    // lexicographically smallest.
    for mask in 1u64..(1u64 << n) {
        for (i, xi) in x.iter_mut().enumerate() {
            *xi = (mask >> (n - 1 - i)) & 1 == 1;
        }
        let obj = qubo.evaluate(&x);
        if obj < best - tie_tolerance(best) {
            best = obj;
            best_x.copy_from_slice(&x);
        }
    }
    Ok(AssociationSolution::from_selection(inst, best_x))
}

/// The primary person's pose from the kept detections.
///
/// For each joint type the kept detection with the highest confidence wins
/// (ties to the smaller id); types without kept detections stay absent.
/// Locations are mapped from the region frame to the image frame.
pub fn extract_pose(inst: &AssociationInstance, sol: &AssociationSolution, region: &Region) -> PersonPose {
    let mut best: [Option<usize>; NUM_JOINTS] = [None; NUM_JOINTS];
    for id in sol.selected_ids() {
        let d = &inst.detections[id];
        let slot = &mut best[d.joint.index()];
        match slot {
            Some(cur) if inst.detections[*cur].confidence >= d.confidence => {}
            _ => *slot = Some(id),
        }
    }
    let mut pose = PersonPose::default();
    for (out, pick) in pose.joints.iter_mut().zip(best) {
        *out = pick.map(|id| {
            let d = &inst.detections[id];
            Keypoint {
                location: region.to_image(d.location),
                confidence: d.confidence,
            }
        });
    }
    pose
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_association_solution, Detection, JointType, Point};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn instance(alpha: Vec<f64>, beta: impl FnMut(usize, usize) -> f64) -> AssociationInstance {
        let n = alpha.len();
        let dets = (0..n)
            .map(|id| Detection {
                id,
                joint: JointType::ALL[id % NUM_JOINTS],
                location: Point::new(id as f64, 2.0 * id as f64),
                confidence: 0.5,
            })
            .collect();
        AssociationInstance::new(dets, alpha, PairTable::from_fn(n, beta)).unwrap()
    }

    fn random_instance(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> AssociationInstance {
        let alpha = (0..n).map(|_| rng.gen_range(-scale..scale)).collect();
        let beta: Vec<f64> = (0..n * n.saturating_sub(1) / 2)
            .map(|_| rng.gen_range(-scale..scale))
            .collect();
        let mut it = beta.into_iter();
        instance(alpha, |_, _| it.next().unwrap())
    }

    #[test]
    fn single_negative_unary() {
        let s = solve_exact(&instance(vec![-1.0], |_, _| 0.0)).unwrap();
        assert_eq!(s.selected, vec![true]);
        assert_eq!(s.objective, -1.0);
    }

    #[test]
    fn attractive_pair_outweighs_unaries() {
        // (0,0) -> 0, (1,0) -> 1, (0,1) -> 1, (1,1) -> 1 + 1 - 10
        let s = solve_exact(&instance(vec![1.0, 1.0], |_, _| -10.0)).unwrap();
        assert_eq!(s.selected, vec![true, true]);
        assert_eq!(s.objective, -8.0);
    }

    #[test]
    fn qubo_matches_substitution() {
        let inst = instance(vec![0.3, -1.2], |_, _| 0.7);
        let q = reduce_to_qubo(&inst);
        assert_eq!(q.evaluate(&[true, true]), 0.3 - 1.2 + 0.7);
        assert_eq!(q.evaluate(&[false, false]), 0.0);
    }

    #[test]
    fn empty_instance() {
        let inst = AssociationInstance::empty();
        for s in [solve_exact(&inst).unwrap(), solve_bruteforce(&inst).unwrap()] {
            assert!(s.selected.is_empty());
            assert_eq!(s.objective, 0.0);
        }
    }

    #[test]
    fn caps_are_enforced() {
        let inst = instance(vec![0.0; 21], |_, _| 0.0);
        assert!(matches!(solve_bruteforce(&inst), Err(Error::InstanceTooLarge { .. })));
        let cfg = SolverConfig { max_detections: 20 };
        assert!(matches!(
            solve_exact_with(&inst, &cfg),
            Err(Error::InstanceTooLarge { .. })
        ));
        assert!(solve_exact(&inst).is_ok());
    }

    #[test]
    fn flat_instance_keeps_nothing_without_search_blowup() {
        let inst = instance(vec![0.0; 60], |_, _| 0.0);
        let (s, stats) = solve_exact_with(&inst, &SolverConfig::default()).unwrap();
        assert!(s.selected.iter().all(|x| !x));
        assert!(stats.nodes < 1000, "explored {} nodes", stats.nodes);
    }

    #[test]
    fn ties_go_to_lexicographically_smallest() {
        // Either detection alone gives -1; together they give -1 as well.
        let inst = instance(vec![-1.0, -1.0], |_, _| 1.0);
        let exact = solve_exact(&inst).unwrap();
        let brute = solve_bruteforce(&inst).unwrap();
        assert_eq!(exact.selected, vec![false, true]);
        assert_eq!(brute.selected, exact.selected);
    }

    #[test]
    fn matches_bruteforce_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..200 {
            let n = rng.gen_range(0..=12);
            let scale = [0.1, 1.0, 10.0][trial % 3];
            let inst = random_instance(&mut rng, n, scale);
            let exact = solve_exact(&inst).unwrap();
            let brute = solve_bruteforce(&inst).unwrap();
            assert!((exact.objective - brute.objective).abs() <= 1e-9, "trial {trial}");
            assert_eq!(exact.selected, brute.selected, "trial {trial}");
            assert!(brute.objective <= 0.0);
            assert!(validate_association_solution(&inst, &exact).unwrap().is_empty());
        }
    }

    #[test]
    fn bound_is_admissible_on_partial_assignments() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let n = rng.gen_range(1..=10);
            let inst = random_instance(&mut rng, n, 2.0);
            let q = reduce_to_qubo(&inst);
            let partial: Vec<Option<bool>> = (0..n)
                .map(|_| match rng.gen_range(0..3) {
                    0 => None,
                    1 => Some(false),
                    _ => Some(true),
                })
                .collect();
            let free: Vec<usize> = (0..n).filter(|&i| partial[i].is_none()).collect();
            let mut best = f64::INFINITY;
            for mask in 0u32..(1 << free.len()) {
                let x: Vec<bool> = (0..n)
                    .map(|i| match partial[i] {
                        Some(v) => v,
                        None => mask >> free.iter().position(|&f| f == i).unwrap() & 1 == 1,
                    })
                    .collect();
                best = best.min(q.evaluate(&x));
            }
            assert!(lower_bound(&q, &partial) <= best + 1e-12);
        }
    }

    #[test]
    fn extract_pose_takes_most_confident_and_maps_to_image() {
        let mut inst = instance(vec![-1.0; 3], |_, _| 0.0);
        inst.detections[0].joint = JointType::Head;
        inst.detections[1].joint = JointType::Head;
        inst.detections[2].joint = JointType::Neck;
        inst.detections[0].confidence = 0.7;
        inst.detections[1].confidence = 0.9;
        let sol = AssociationSolution::from_selection(&inst, vec![true, true, false]);
        let region = Region {
            person: 0,
            x: 10,
            y: 20,
            width: 50,
            height: 50,
            noise_seed: 0,
        };
        let pose = extract_pose(&inst, &sol, &region);
        let head = pose.get(JointType::Head).unwrap();
        assert_eq!(head.confidence, 0.9);
        assert_eq!(head.location, Point::new(11.0, 22.0));
        assert!(pose.get(JointType::Neck).is_none());
        assert_eq!(pose.visible_count(), 1);
    }

    #[test]
    fn extract_pose_tie_prefers_smaller_id() {
        let mut inst = instance(vec![-1.0; 2], |_, _| 0.0);
        inst.detections[1].joint = JointType::Head;
        let sol = AssociationSolution::from_selection(&inst, vec![true, true]);
        let region = Region {
            person: 0,
            x: 0,
            y: 0,
            width: 5,
            height: 5,
            noise_seed: 0,
        };
        let pose = extract_pose(&inst, &sol, &region);
        assert_eq!(pose.get(JointType::Head).unwrap().location, Point::new(0.0, 0.0));
    }
}
