//! Sigmoid calibration of classifier margins.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAX_ITER: usize = 100;
const MIN_STEP: f64 = 1e-10;
const HESSIAN_RIDGE: f64 = 1e-12;
const GRAD_TOL: f64 = 1e-7;

/// `p(m) = 1 / (1 + exp(a * m + b))`, the probability of the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlattScaler {
    pub a: f64,
    pub b: f64,
}

impl PlattScaler {
    pub fn probability(&self, margin: f64) -> f64 {
        sigmoid_of_neg(self.a * margin + self.b)
    }

    /// True when probability grows with the margin.
    pub fn is_increasing(&self) -> bool {
        self.a < 0.0
    }
}

/// `1 / (1 + exp(t))` without overflow.
fn sigmoid_of_neg(t: f64) -> f64 {
    if t >= 0.0 {
        let e = (-t).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + t.exp())
    }
}

/// Smoothed targets: `(N+ + 1) / (N+ + 2)` for positives, `1 / (N- + 2)` for
/// negatives.
fn targets(labels: &[bool]) -> Vec<f64> {
    let pos = labels.iter().filter(|&&l| l).count() as f64;
    let neg = labels.len() as f64 - pos;
    let hi = (pos + 1.0) / (pos + 2.0);
    let lo = 1.0 / (neg + 2.0);
    labels.iter().map(|&l| if l { hi } else { lo }).collect()
}

/// Cross-entropy of the sigmoid against the smoothed targets.
pub fn platt_nll(a: f64, b: f64, margins: &[f64], labels: &[bool]) -> f64 {
    margins
        .iter()
        .zip(targets(labels))
        .map(|(&m, t)| {
            let f = a * m + b;
            // t * f + log(1 + exp(-f)), arranged for stability
            if f >= 0.0 {
                t * f + (-f).exp().ln_1p()
            } else {
                (t - 1.0) * f + f.exp().ln_1p()
            }
        })
        .sum()
}

/// Gradient of [`platt_nll`] with respect to `(a, b)`.
pub fn platt_gradient(a: f64, b: f64, margins: &[f64], labels: &[bool]) -> (f64, f64) {
    let mut ga = 0.0;
    let mut gb = 0.0;
    for (&m, t) in margins.iter().zip(targets(labels)) {
        let p = sigmoid_of_neg(a * m + b);
        let d = t - p;
        ga += m * d;
        gb += d;
    }
    (ga, gb)
}

/// Fits `(a, b)` by damped Newton iterations with backtracking.
///
/// Both classes must be present. When every margin is identical the slope
/// is not identifiable; `a = 0` is returned with `b` at the prior log-odds.
pub fn platt_fit(margins: &[f64], labels: &[bool]) -> Result<PlattScaler> {
    assert_eq!(margins.len(), labels.len());
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::DegenerateClass {
            pair: "calibration set".into(),
            positives: pos,
            negatives: neg,
        });
    }
    let first = margins[0];
    if margins.iter().all(|&m| m == first) {
        // fit b alone: the constant sigmoid matching the smoothed rate
        let t = targets(labels);
        let rate = t.iter().sum::<f64>() / t.len() as f64;
        return Ok(PlattScaler {
            a: 0.0,
            b: ((1.0 - rate) / rate).ln(),
        });
    }
    let t = targets(labels);
    let (mut a, mut b) = (0.0, ((neg as f64 + 1.0) / (pos as f64 + 1.0)).ln());
    let mut fval = platt_nll(a, b, margins, labels);
    for _ in 0..MAX_ITER {
        let (mut h11, mut h22, mut h21) = (HESSIAN_RIDGE, HESSIAN_RIDGE, 0.0);
        let (mut g1, mut g2) = (0.0, 0.0);
        for (&m, &ti) in margins.iter().zip(&t) {
            let p = sigmoid_of_neg(a * m + b);
            let w = p * (1.0 - p);
            h11 += m * m * w;
            h22 += w;
            h21 += m * w;
            g1 += m * (ti - p);
            g2 += ti - p;
        }
        if g1.abs() < GRAD_TOL * margins.len() as f64 && g2.abs() < GRAD_TOL * margins.len() as f64 {
            break;
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let gd = g1 * da + g2 * db;
        let mut step = 1.0;
        while step >= MIN_STEP {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = platt_nll(na, nb, margins, labels);
            if nf < fval + 1e-4 * step * gd {
                a = na;
                b = nb;
                fval = nf;
                break;
            }
            step *= 0.5;
        }
        if step < MIN_STEP {
            break;
        }
    }
    Ok(PlattScaler { a, b })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample(a: f64, b: f64, n: usize, seed: u64) -> (Vec<f64>, Vec<bool>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = Vec::with_capacity(n);
        let mut l = Vec::with_capacity(n);
        for _ in 0..n {
            let x: f64 = rng.gen_range(-3.0..3.0);
            let p = 1.0 / (1.0 + (a * x + b).exp());
            m.push(x);
            l.push(rng.gen::<f64>() < p);
        }
        (m, l)
    }

    #[test]
    fn recovers_known_sigmoid() {
        let (m, l) = sample(-2.0, 0.5, 10_000, 17);
        let s = platt_fit(&m, &l).unwrap();
        assert!((s.a + 2.0).abs() < 0.1, "a = {}", s.a);
        assert!((s.b - 0.5).abs() < 0.1, "b = {}", s.b);
        assert!(s.is_increasing());
    }

    #[test]
    fn symmetric_data_gives_zero_offset() {
        let m = vec![-1.0, -1.0, 1.0, 1.0];
        let l = vec![false, false, true, true];
        let s = platt_fit(&m, &l).unwrap();
        assert!(s.b.abs() < 1e-6);
        assert!(s.a < 0.0);
    }

    #[test]
    fn one_class_is_degenerate() {
        assert!(matches!(
            platt_fit(&[0.1, 0.2], &[true, true]),
            Err(Error::DegenerateClass { .. })
        ));
    }

    #[test]
    fn equal_margins_fall_back_to_flat() {
        let s = platt_fit(&[0.3; 4], &[true, false, false, false]).unwrap();
        assert_eq!(s.a, 0.0);
        // smoothed positive rate: (2/3 + 3 * 1/5) / 4
        let rate = (2.0 / 3.0 + 3.0 / 5.0) / 4.0;
        assert!((s.probability(0.3) - rate).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (m, l) = sample(-1.3, 0.2, 500, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let a = rng.gen_range(-4.0..4.0);
            let b = rng.gen_range(-4.0..4.0);
            let (ga, gb) = platt_gradient(a, b, &m, &l);
            let h = 1e-5;
            let fa = (platt_nll(a + h, b, &m, &l) - platt_nll(a - h, b, &m, &l)) / (2.0 * h);
            let fb = (platt_nll(a, b + h, &m, &l) - platt_nll(a, b - h, &m, &l)) / (2.0 * h);
            assert!((ga - fa).abs() <= 1e-5 * fa.abs().max(1.0), "{ga} vs {fa}");
            assert!((gb - fb).abs() <= 1e-5 * fb.abs().max(1.0), "{gb} vs {fb}");
        }
    }

    #[test]
    fn probability_is_strictly_inside_unit_interval_for_moderate_inputs() {
        let s = PlattScaler { a: -1.5, b: 0.2 };
        let mut last = 0.0;
        for i in -20..=20 {
            let p = s.probability(i as f64);
            assert!(p > 0.0 && p < 1.0);
            assert!(p > last);
            last = p;
        }
    }
}
