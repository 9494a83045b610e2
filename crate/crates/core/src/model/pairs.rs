use serde::{Deserialize, Serialize};

/// Values indexed by unordered pairs `{i, j}`, `i != j`, over `0..n`.
///
/// Storage is the strict upper triangle in canonical order
/// `(0,1), (0,2), …, (0,n-1), (1,2), …`, so `get(i, j) == get(j, i)` holds
/// by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairTable<T> {
    n: usize,
    values: Vec<T>,
}

impl<T> PairTable<T> {
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut values = Vec::with_capacity(pair_count(n));
        for i in 0..n {
            for j in i + 1..n {
                values.push(f(i, j));
            }
        }
        Self { n, values }
    }

    /// Builds a table from values already in canonical order.
    pub fn from_vec(n: usize, values: Vec<T>) -> Option<Self> {
        (values.len() == pair_count(n)).then_some(Self { n, values })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn num_pairs(&self) -> usize {
        self.values.len()
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        assert!(
            i != j && i < self.n && j < self.n,
            "invalid pair ({i}, {j}) for n = {}",
            self.n
        );
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        a * (2 * self.n - a - 1) / 2 + (b - a - 1)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> &T {
        &self.values[self.slot(i, j)]
    }

    #[inline]
    pub fn get_mut(&mut self, i: usize, j: usize) -> &mut T {
        let s = self.slot(i, j);
        &mut self.values[s]
    }

    pub fn set(&mut self, i: usize, j: usize, value: T) {
        *self.get_mut(i, j) = value;
    }

    /// `(i, j, value)` with `i < j`, in canonical order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, &T)> {
        let n = self.n;
        (0..n)
            .flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
            .zip(self.values.iter())
            .map(|((i, j), v)| (i, j, v))
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> PairTable<U> {
        PairTable {
            n: self.n,
            values: self.values.iter().map(&mut f).collect(),
        }
    }
}

impl<T: Clone> PairTable<T> {
    pub fn filled(n: usize, value: T) -> Self {
        Self {
            n,
            values: vec![value; pair_count(n)],
        }
    }
}

pub fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_layout() {
        let t = PairTable::from_fn(4, |i, j| (i, j));
        let order: Vec<_> = t.iter().map(|(i, j, _)| (i, j)).collect();
        assert_eq!(order, vec![(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
        for (i, j, v) in t.iter() {
            assert_eq!(*v, (i, j));
            assert_eq!(t.get(j, i), &(i, j));
        }
    }

    #[test]
    fn empty_and_single() {
        assert_eq!(PairTable::<f64>::filled(0, 0.0).num_pairs(), 0);
        assert_eq!(PairTable::<f64>::filled(1, 0.0).num_pairs(), 0);
        assert!(PairTable::from_vec(3, vec![1, 2]).is_none());
    }

    #[test]
    #[should_panic]
    fn diagonal_is_excluded() {
        PairTable::filled(3, 0u8).get(1, 1);
    }
}
