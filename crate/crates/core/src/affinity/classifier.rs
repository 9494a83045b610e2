//! Binary classifiers over standardized pair features.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Per-dimension mean and standard deviation; constant dimensions keep a
/// unit scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let dim = rows.first().map_or(0, Vec::len);
        let n = rows.len().max(1) as f64;
        let mut mean = vec![0.0; dim];
        for r in rows {
            for (m, x) in mean.iter_mut().zip(r) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for r in rows {
            for ((v, x), m) in var.iter_mut().zip(r).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let std = var
            .into_iter()
            .map(|v| {
                let s = (v / n).sqrt();
                if s > 1e-12 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, std }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((x, m), s)| (x - m) / s)
            .collect()
    }
}

/// Which classifier to fit, with its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassifierKind {
    /// L2-regularized logistic regression; the bias is not penalized.
    Logistic { l2: f64 },
    /// Soft-margin SVM with `exp(-gamma * |x - x'|^2)`; `gamma <= 0` means
    /// one over the feature dimension.
    Rbf { c: f64, gamma: f64 },
}

impl Default for ClassifierKind {
    fn default() -> Self {
        ClassifierKind::Logistic { l2: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Classifier {
    Linear {
        weights: Vec<f64>,
        bias: f64,
    },
    Rbf {
        gamma: f64,
        support: Vec<Vec<f64>>,
        /// `alpha_i * y_i` per support vector.
        coef: Vec<f64>,
        bias: f64,
    },
}

impl Classifier {
    /// Signed margin; positive favours the positive class.
    pub fn margin(&self, x: &[f64]) -> f64 {
        match self {
            Classifier::Linear { weights, bias } => weights.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + bias,
            Classifier::Rbf {
                gamma,
                support,
                coef,
                bias,
            } => {
                support
                    .iter()
                    .zip(coef)
                    .map(|(s, c)| c * (-gamma * sq_dist(s, x)).exp())
                    .sum::<f64>()
                    + bias
            }
        }
    }

    pub fn dim(&self) -> Option<usize> {
        match self {
            Classifier::Linear { weights, .. } => Some(weights.len()),
            Classifier::Rbf { support, .. } => support.first().map(Vec::len),
        }
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Fits a classifier to standardized rows.
pub fn fit_classifier(kind: ClassifierKind, rows: &[Vec<f64>], labels: &[bool]) -> Classifier {
    match kind {
        ClassifierKind::Logistic { l2 } => fit_logistic(rows, labels, l2),
        ClassifierKind::Rbf { c, gamma } => {
            let dim = rows.first().map_or(1, Vec::len).max(1);
            let gamma = if gamma > 0.0 { gamma } else { 1.0 / dim as f64 };
            fit_rbf(rows, labels, c, gamma)
        }
    }
}

fn log1p_exp(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn logistic(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Newton's method with backtracking on the penalized log-loss.
pub fn fit_logistic(rows: &[Vec<f64>], labels: &[bool], l2: f64) -> Classifier {
    let n = rows.len();
    let dim = rows.first().map_or(0, Vec::len);
    // last column is the intercept
    let x = DMatrix::from_fn(n, dim + 1, |i, j| if j < dim { rows[i][j] } else { 1.0 });
    let y = DVector::from_fn(n, |i, _| if labels[i] { 1.0 } else { 0.0 });
    let penalty = DVector::from_fn(dim + 1, |j, _| if j < dim { l2 } else { 1e-10 });
    let loss = |w: &DVector<f64>| -> f64 {
        let z = &x * w;
        let data: f64 = z
            .iter()
            .zip(y.iter())
            .map(|(&z, &y)| if y > 0.5 { log1p_exp(-z) } else { log1p_exp(z) })
            .sum();
        data + 0.5 * w.iter().zip(penalty.iter()).map(|(w, p)| p * w * w).sum::<f64>()
    };
    let mut w = DVector::zeros(dim + 1);
    let mut f = loss(&w);
    for _ in 0..100 {
        let z = &x * &w;
        let p = z.map(logistic);
        let g = x.transpose() * (&p - &y) + penalty.component_mul(&w);
        if g.amax() < 1e-9 * (n.max(1) as f64) {
            break;
        }
        let s = p.map(|p| p * (1.0 - p));
        let xs = DMatrix::from_fn(n, dim + 1, |i, j| x[(i, j)] * s[i]);
        let mut h = x.transpose() * xs;
        for j in 0..=dim {
            h[(j, j)] += penalty[j];
        }
        let step = match h.cholesky() {
            Some(ch) => ch.solve(&g),
            None => g.clone(),
        };
        let slope = g.dot(&step);
        let mut t = 1.0;
        let mut moved = false;
        while t > 1e-12 {
            let cand = &w - &step * t;
            let fc = loss(&cand);
            if fc <= f - 1e-4 * t * slope {
                w = cand;
                f = fc;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
    Classifier::Linear {
        weights: w.rows(0, dim).iter().copied().collect(),
        bias: w[dim],
    }
}

/// Dual SMO with maximal-violating-pair selection.
pub fn fit_rbf(rows: &[Vec<f64>], labels: &[bool], c: f64, gamma: f64) -> Classifier {
    const EPS: f64 = 1e-3;
    const TAU: f64 = 1e-12;
    let n = rows.len();
    let y: Vec<f64> = labels.iter().map(|&l| if l { 1.0 } else { -1.0 }).collect();
    let mut k = vec![0.0f32; n * n];
    for i in 0..n {
        for j in i..n {
            let v = (-gamma * sq_dist(&rows[i], &rows[j])).exp() as f32;
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    let q = |i: usize, j: usize| y[i] * y[j] * k[i * n + j] as f64;
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let max_iter = 100_000usize.max(100 * n);
    for _ in 0..max_iter {
        let up = |t: usize, a: &[f64]| (y[t] > 0.0 && a[t] < c) || (y[t] < 0.0 && a[t] > 0.0);
        let low = |t: usize, a: &[f64]| (y[t] < 0.0 && a[t] < c) || (y[t] > 0.0 && a[t] > 0.0);
        let mut i = usize::MAX;
        let mut gmax = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut gmin = f64::INFINITY;
        for t in 0..n {
            let v = -y[t] * grad[t];
            if up(t, &alpha) && v > gmax {
                gmax = v;
                i = t;
            }
            if low(t, &alpha) && v < gmin {
                gmin = v;
                j = t;
            }
        }
        if i == usize::MAX || j == usize::MAX || gmax - gmin < EPS {
            break;
        }
        let (oi, oj) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let quad = (q(i, i) + q(j, j) + 2.0 * q(i, j)).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (q(i, i) + q(j, j) - 2.0 * q(i, j)).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - oi, alpha[j] - oj);
        for (t, g) in grad.iter_mut().enumerate() {
            *g += q(t, i) * di + q(t, j) * dj;
        }
    }
    // rho from free variables, else the midpoint of the feasible interval
    let (mut sum, mut free) = (0.0, 0usize);
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] > 0.0 && alpha[t] < c {
            sum += yg;
            free += 1;
        } else if (alpha[t] >= c && y[t] < 0.0) || (alpha[t] <= 0.0 && y[t] > 0.0) {
            ub = ub.min(yg);
        } else {
            lb = lb.max(yg);
        }
    }
    let rho = if free > 0 {
        sum / free as f64
    } else if ub.is_finite() && lb.is_finite() {
        0.5 * (ub + lb)
    } else {
        0.0
    };
    let mut support = Vec::new();
    let mut coef = Vec::new();
    for t in 0..n {
        if alpha[t] > 0.0 {
            support.push(rows[t].clone());
            coef.push(alpha[t] * y[t]);
        }
    }
    Classifier::Rbf {
        gamma,
        support,
        coef,
        bias: -rho,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn blobs(n: usize, sep: f64, seed: u64) -> (Vec<Vec<f64>>, Vec<bool>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let pos = i % 2 == 0;
            let c = if pos { sep } else { -sep };
            rows.push(vec![c + noise.sample(&mut rng), noise.sample(&mut rng)]);
            labels.push(pos);
        }
        (rows, labels)
    }

    fn accuracy(c: &Classifier, rows: &[Vec<f64>], labels: &[bool]) -> f64 {
        let ok = rows
            .iter()
            .zip(labels)
            .filter(|(r, &l)| (c.margin(r) > 0.0) == l)
            .count();
        ok as f64 / rows.len() as f64
    }

    #[test]
    fn standardizer_centres_and_scales() {
        let rows = vec![vec![1.0, 5.0], vec![3.0, 5.0], vec![5.0, 5.0]];
        let s = Standardizer::fit(&rows);
        assert_eq!(s.mean, vec![3.0, 5.0]);
        assert_eq!(s.std[1], 1.0);
        let z = s.apply(&[5.0, 5.0]);
        assert!((z[0] - 2.0 / (8.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(z[1], 0.0);
    }

    #[test]
    fn logistic_separates_blobs() {
        let (rows, labels) = blobs(400, 3.0, 1);
        let c = fit_logistic(&rows, &labels, 1.0);
        assert!(accuracy(&c, &rows, &labels) > 0.97);
        let Classifier::Linear { weights, .. } = &c else {
            unreachable!()
        };
        assert!(weights[0] > 0.0);
    }

    #[test]
    fn logistic_gradient_vanishes_at_solution() {
        let (rows, labels) = blobs(300, 0.5, 2);
        let l2 = 2.0;
        let Classifier::Linear { weights, bias } = fit_logistic(&rows, &labels, l2) else {
            unreachable!()
        };
        let mut g = [0.0; 3];
        for (r, &l) in rows.iter().zip(&labels) {
            let z = weights[0] * r[0] + weights[1] * r[1] + bias;
            let e = logistic(z) - if l { 1.0 } else { 0.0 };
            g[0] += e * r[0];
            g[1] += e * r[1];
            g[2] += e;
        }
        g[0] += l2 * weights[0];
        g[1] += l2 * weights[1];
        for v in g {
            assert!(v.abs() < 1e-6, "{g:?}");
        }
    }

    #[test]
    fn rbf_learns_a_ring() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..300 {
            let x: f64 = rng.gen_range(-2.0..2.0);
            let y: f64 = rng.gen_range(-2.0..2.0);
            let r = x.hypot(y);
            if (r - 1.0).abs() < 0.15 {
                continue;
            }
            rows.push(vec![x, y]);
            labels.push(r < 1.0);
        }
        let c = fit_classifier(ClassifierKind::Rbf { c: 10.0, gamma: 2.0 }, &rows, &labels);
        assert!(accuracy(&c, &rows, &labels) > 0.95);
        // a linear model cannot do this
        let lin = fit_logistic(&rows, &labels, 1.0);
        assert!(accuracy(&lin, &rows, &labels) < 0.9);
    }

    #[test]
    fn rbf_dual_is_feasible() {
        let (rows, labels) = blobs(120, 1.0, 5);
        let c_reg = 1.0;
        let Classifier::Rbf { coef, .. } = fit_rbf(&rows, &labels, c_reg, 0.5) else {
            unreachable!()
        };
        // sum of alpha_i y_i is zero and each alpha is inside the box
        let s: f64 = coef.iter().sum();
        assert!(s.abs() < 1e-9);
        assert!(coef.iter().all(|c| c.abs() <= c_reg + 1e-12));
    }
}
