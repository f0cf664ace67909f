use std::fmt;

use smallvec::SmallVec;

use crate::scalar::{int, Rational};

/// An element of ℕ^{d+1}: node decorations, edge derivatives, raise amounts.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct MultiIndex(SmallVec<[u32; 4]>);

impl MultiIndex {
    pub fn zeros(dim: usize) -> Self {
        MultiIndex(SmallVec::from_elem(0, dim))
    }

    pub fn unit(dim: usize, i: usize) -> Self {
        let mut m = Self::zeros(dim);
        m.0[i] = 1;
        m
    }

    pub fn from_slice(c: &[u32]) -> Self {
        MultiIndex(SmallVec::from_slice(c))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn components(&self) -> &[u32] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    /// Plain order `Σ k_i`.
    pub fn total(&self) -> u32 {
        self.0.iter().sum()
    }

    /// Scaled order `|k|_𝔰 = Σ 𝔰_i k_i`.
    pub fn scaled(&self, scaling: &MultiIndex) -> i128 {
        self.0.iter().zip(scaling.0.iter()).map(|(&k, &s)| k as i128 * s as i128).sum()
    }

    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        debug_assert_eq!(self.len(), other.len());
        MultiIndex(self.0.iter().zip(other.0.iter()).map(|(a, b)| a + b).collect())
    }

    /// Componentwise difference, `None` as soon as one component would go negative.
    pub fn checked_sub(&self, other: &MultiIndex) -> Option<MultiIndex> {
        debug_assert_eq!(self.len(), other.len());
        let mut out = SmallVec::with_capacity(self.len());
        for (a, b) in self.0.iter().zip(other.0.iter()) {
            out.push(a.checked_sub(*b)?);
        }
        Some(MultiIndex(out))
    }

    /// Componentwise `self ≤ other`.
    pub fn le(&self, other: &MultiIndex) -> bool {
        self.0.iter().zip(other.0.iter()).all(|(a, b)| a <= b)
    }

    /// `k! = ∏ k_i!`
    pub fn factorial(&self) -> Rational {
        int(self.0.iter().map(|&k| factorial(k)).product())
    }

    /// `(self choose m) = ∏ (self_i choose m_i)`, zero unless `m ≤ self`.
    pub fn binomial(&self, m: &MultiIndex) -> i128 {
        self.0.iter().zip(m.0.iter()).map(|(&n, &k)| binomial(n, k)).product()
    }

    /// All `m` with `m ≤ self` componentwise, in lexicographic order.
    pub fn below(&self) -> Vec<MultiIndex> {
        let mut out = vec![MultiIndex(SmallVec::new())];
        for &n in self.0.iter() {
            let mut next = Vec::with_capacity(out.len() * (n as usize + 1));
            for prefix in &out {
                for v in 0..=n {
                    let mut p = prefix.clone();
                    p.0.push(v);
                    next.push(p);
                }
            }
            out = next;
        }
        out
    }

    /// All multi-indices of the given length with total order at most `max_total`.
    pub fn all_up_to(dim: usize, max_total: u32) -> Vec<MultiIndex> {
        fn rec(dim: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
            if cur.len() == dim {
                out.push(MultiIndex::from_slice(cur));
                return;
            }
            for v in 0..=left {
                cur.push(v);
                rec(dim, left - v, cur, out);
                cur.pop();
            }
        }
        let mut out = Vec::new();
        rec(dim, max_total, &mut Vec::with_capacity(dim), &mut out);
        out.sort();
        out
    }

    /// All ways of writing `self` as an ordered sum of `parts` multi-indices.
    pub fn compositions(&self, parts: usize) -> Vec<Vec<MultiIndex>> {
        if parts == 0 {
            return if self.is_zero() { vec![vec![]] } else { vec![] };
        }
        let mut out = Vec::new();
        let mut cur = Vec::with_capacity(parts);
        fn rec(rest: &MultiIndex, parts: usize, cur: &mut Vec<MultiIndex>, out: &mut Vec<Vec<MultiIndex>>) {
            if parts == 1 {
                cur.push(rest.clone());
                out.push(cur.clone());
                cur.pop();
                return;
            }
            for first in rest.below() {
                let remaining = rest.checked_sub(&first).expect("first ≤ rest");
                cur.push(first);
                rec(&remaining, parts - 1, cur, out);
                cur.pop();
            }
        }
        rec(self, parts, &mut cur, &mut out);
        out
    }
}

pub fn factorial(n: u32) -> i128 {
    (1..=n as i128).product()
}

pub fn binomial(n: u32, k: u32) -> i128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: i128 = 1;
    for i in 0..k as i128 {
        acc = acc * (n as i128 - i) / (i + 1);
    }
    acc
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subtraction_is_partial() {
        let a = MultiIndex::from_slice(&[1, 0]);
        let b = MultiIndex::from_slice(&[0, 1]);
        assert_eq!(a.checked_sub(&b), None);
        assert_eq!(a.checked_sub(&a), Some(MultiIndex::zeros(2)));
    }

    #[test]
    fn compositions_count_matches_stars_and_bars() {
        // (2,1) split into 3 ordered parts: C(4,2) * C(3,2) = 18
        let k = MultiIndex::from_slice(&[2, 1]);
        assert_eq!(k.compositions(3).len(), 18);
        assert_eq!(MultiIndex::zeros(2).compositions(0).len(), 1);
        assert_eq!(k.compositions(0).len(), 0);
    }

    #[test]
    fn scaled_norm_and_factorial() {
        let s = MultiIndex::from_slice(&[2, 1]);
        let k = MultiIndex::from_slice(&[1, 3]);
        assert_eq!(k.scaled(&s), 5);
        assert_eq!(k.factorial(), int(6));
        assert_eq!(k.binomial(&MultiIndex::from_slice(&[1, 2])), 3);
        assert_eq!(k.binomial(&MultiIndex::from_slice(&[2, 0])), 0);
    }

    #[test]
    fn all_up_to_enumerates_simplex() {
        assert_eq!(MultiIndex::all_up_to(2, 1).len(), 3);
        assert_eq!(MultiIndex::all_up_to(3, 2).len(), 10);
    }
}
