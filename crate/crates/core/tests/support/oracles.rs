//! Independent reference computations for the solvers. Nothing here calls
//! into the solver modules.
#![allow(dead_code)]

use jpa_core::model::{AssociationInstance, Detection, GlobalInstance, JointType, PairTable, Point, NUM_JOINTS};
use rand::Rng;

/// Linking and transitivity constraints of the local problem, checked
/// literally on explicit `x` and `y` (pairs in canonical order).
pub fn local_feasible(n: usize, x: &[bool], y: &[bool]) -> bool {
    let idx = |a: usize, b: usize| {
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        a * (2 * n - a - 1) / 2 + (b - a - 1)
    };
    for a in 0..n {
        for b in a + 1..n {
            let yab = y[idx(a, b)] as i32;
            if yab > x[a] as i32 || yab > x[b] as i32 {
                return false;
            }
            if x[a] as i32 + x[b] as i32 - 1 > yab {
                return false;
            }
        }
    }
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                if a == b || b == c || a == c {
                    continue;
                }
                if y[idx(a, b)] as i32 + y[idx(b, c)] as i32 - 1 > y[idx(a, c)] as i32 {
                    return false;
                }
            }
        }
    }
    true
}

/// Linear objective `<alpha, x> + <beta, y>` over explicit variables.
pub fn local_linear_objective(inst: &AssociationInstance, x: &[bool], y: &[bool]) -> f64 {
    let mut total = 0.0;
    for (a, &xa) in inst.alpha.iter().zip(x) {
        if xa {
            total += a;
        }
    }
    for (b, &yb) in inst.beta.values().iter().zip(y) {
        if yb {
            total += b;
        }
    }
    total
}

/// Every feasible `(x, y)` of a local instance, by full enumeration.
pub fn local_feasible_points(n: usize) -> Vec<(Vec<bool>, Vec<bool>)> {
    let pairs = n * n.saturating_sub(1) / 2;
    let mut out = Vec::new();
    for xm in 0u64..(1 << n) {
        let x: Vec<bool> = (0..n).map(|i| xm >> i & 1 == 1).collect();
        for ym in 0u64..(1 << pairs) {
            let y: Vec<bool> = (0..pairs).map(|i| ym >> i & 1 == 1).collect();
            if local_feasible(n, &x, &y) {
                out.push((x.clone(), y));
            }
        }
    }
    out
}

/// Minimum local objective by enumerating all selections.
pub fn local_min_by_selection(inst: &AssociationInstance) -> f64 {
    let n = inst.len();
    let mut best = 0.0f64;
    for m in 0u64..(1 << n) {
        let mut v = 0.0;
        for a in 0..n {
            if m >> a & 1 == 0 {
                continue;
            }
            v += inst.alpha[a];
            for b in a + 1..n {
                if m >> b & 1 == 1 {
                    v += inst.beta.get(a, b);
                }
            }
        }
        best = best.min(v);
    }
    best
}

/// Optimum of a global instance over every `(x, y)` with `z` derived from
/// the linking inequalities, filtering on all constraints.
pub fn global_bruteforce(inst: &GlobalInstance) -> f64 {
    let n = inst.len();
    let k = inst.num_labels;
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
    let np = pairs.len();
    let mut best = f64::INFINITY;
    for xm in 0u64..(1 << (n * k)) {
        let x = |d: usize, j: usize| xm >> (d * k + j) & 1 == 1;
        // at most one label per proposal
        if (0..n).any(|d| (0..k).filter(|&j| x(d, j)).count() > 1) {
            continue;
        }
        let kept = |d: usize| (0..k).any(|j| x(d, j));
        let mut unary = 0.0;
        for d in 0..n {
            for j in 0..k {
                if x(d, j) {
                    unary += inst.alpha[d][j];
                }
            }
        }
        for ym in 0u64..(1 << np) {
            let y = |a: usize, b: usize| {
                let (a, b) = if a < b { (a, b) } else { (b, a) };
                let p = pairs.iter().position(|&q| q == (a, b)).unwrap();
                ym >> p & 1 == 1
            };
            let mut ok = true;
            for &(a, b) in &pairs {
                if y(a, b) && !(kept(a) && kept(b)) {
                    ok = false;
                    break;
                }
                if inst.single_person && kept(a) && kept(b) && !y(a, b) {
                    ok = false;
                    break;
                }
            }
            if !ok {
                continue;
            }
            'tri: for a in 0..n {
                for b in 0..n {
                    for c in 0..n {
                        if a != b && b != c && a != c && y(a, b) && y(b, c) && !y(a, c) {
                            ok = false;
                            break 'tri;
                        }
                    }
                }
            }
            if !ok {
                continue;
            }
            let mut v = unary;
            for &(a, b) in &pairs {
                let block = inst.beta.get(a, b);
                for ja in 0..k {
                    for jb in 0..k {
                        // z is pinned between x + x + y - 2 and min(x, x, y)
                        let lo = x(a, ja) as i32 + x(b, jb) as i32 + y(a, b) as i32 - 2;
                        let hi = (x(a, ja) as i32).min(x(b, jb) as i32).min(y(a, b) as i32);
                        assert!(lo <= hi);
                        if hi == 1 {
                            v += block[ja * k + jb];
                        }
                    }
                }
            }
            best = best.min(v);
        }
    }
    best
}

pub fn random_local_instance(rng: &mut impl Rng, n: usize, scale: f64) -> AssociationInstance {
    let dets = (0..n)
        .map(|id| Detection {
            id,
            joint: JointType::ALL[rng.gen_range(0..NUM_JOINTS)],
            location: Point::new(rng.gen_range(0.0..100.0), rng.gen_range(0.0..100.0)),
            confidence: rng.gen_range(0.0..=1.0),
        })
        .collect();
    let alpha = (0..n).map(|_| rng.gen_range(-scale..scale)).collect();
    let beta = PairTable::from_fn(n, |_, _| rng.gen_range(-scale..scale));
    AssociationInstance::new(dets, alpha, beta).unwrap()
}

/// Random global instance with costs drawn directly (probabilities are
/// filled consistently so the instance validates).
pub fn random_global_instance(
    rng: &mut impl Rng,
    n: usize,
    k: usize,
    scale: f64,
    single_person: bool,
) -> GlobalInstance {
    let alpha: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..k).map(|_| rng.gen_range(-scale..scale)).collect())
        .collect();
    let beta: PairTable<Vec<f64>> =
        PairTable::from_fn(n, |_, _| (0..k * k).map(|_| rng.gen_range(-scale..scale)).collect());
    let prob = |c: f64| 1.0 / (1.0 + c.exp());
    GlobalInstance {
        proposals: (0..n).map(|i| Point::new(i as f64, 0.0)).collect(),
        num_labels: k,
        p_label: alpha.iter().map(|r| r.iter().map(|&c| prob(c)).collect()).collect(),
        p_pair: beta.map(|b| b.iter().map(|&c| prob(c)).collect()),
        alpha,
        beta,
        single_person,
    }
}
