//! Parameter-side harmonic indices `k ∈ {-1,0,1}^m` and truncated
//! column sets.

use std::cmp::Ordering;
use std::collections::HashSet;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Default cap on the number of truncated columns.
pub const DEFAULT_K_CAP: usize = 20_000;

/// Sparse `k ∈ {-1,0,1}^m`: sorted `(index, sign)` pairs with sign `±1`.
///
/// Ordering is canonical: by Hamming weight, then lexicographically over
/// the pairs with `-1 < +1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HarmonicIndex(Vec<(u32, i8)>);

impl HarmonicIndex {
    pub fn zero() -> Self {
        HarmonicIndex(Vec::new())
    }

    /// From unsorted pairs. Panics on repeated indices or signs other than `±1`.
    pub fn from_pairs(mut pairs: Vec<(u32, i8)>) -> Self {
        pairs.sort_unstable();
        assert!(pairs.windows(2).all(|w| w[0].0 != w[1].0), "repeated index in harmonic");
        assert!(pairs.iter().all(|p| p.1 == 1 || p.1 == -1), "harmonic entries must be ±1");
        HarmonicIndex(pairs)
    }

    pub fn from_dense(k: &[i8]) -> Self {
        HarmonicIndex(k.iter().enumerate().filter(|(_, &s)| s != 0).map(|(a, &s)| (a as u32, s)).collect())
    }

    pub fn to_dense(&self, m: usize) -> Vec<i8> {
        let mut out = vec![0; m];
        for &(a, s) in &self.0 {
            out[a as usize] = s;
        }
        out
    }

    pub fn entries(&self) -> &[(u32, i8)] {
        &self.0
    }

    pub fn weight(&self) -> usize {
        self.0.len()
    }

    /// `‖k‖²`, equal to the weight for entries in `{-1,0,1}`.
    pub fn norm_sqr(&self) -> f64 {
        self.0.len() as f64
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max_index(&self) -> Option<u32> {
        self.0.last().map(|p| p.0)
    }

    pub fn neg(&self) -> Self {
        HarmonicIndex(self.0.iter().map(|&(a, s)| (a, -s)).collect())
    }

    pub fn dot(&self, other: &HarmonicIndex) -> i64 {
        let (mut i, mut j, mut acc) = (0, 0, 0i64);
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].0.cmp(&other.0[j].0) {
                Ordering::Less => i += 1,
                Ordering::Greater => j += 1,
                Ordering::Equal => {
                    acc += self.0[i].1 as i64 * other.0[j].1 as i64;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    /// `k · θ`.
    pub fn dot_theta(&self, theta: &[f64]) -> f64 {
        self.0.iter().map(|&(a, s)| s as f64 * theta[a as usize]).sum()
    }

    /// `e^{-i k·θ}` from precomputed `e^{-iθ_a}`.
    #[inline]
    pub fn conj_character(&self, e_minus: &[Complex64]) -> Complex64 {
        let mut acc = Complex64::new(1.0, 0.0);
        for &(a, s) in &self.0 {
            let f = e_minus[a as usize];
            acc *= if s > 0 { f } else { f.conj() };
        }
        acc
    }
}

impl Ord for HarmonicIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.len().cmp(&other.0.len()).then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for HarmonicIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl std::fmt::Display for HarmonicIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.0.is_empty() {
            return f.write_str("0");
        }
        let parts: Vec<String> =
            self.0.iter().map(|&(a, s)| format!("{}{a}", if s > 0 { '+' } else { '-' })).collect();
        f.write_str(&parts.join(","))
    }
}

/// Ordered column set of a truncated harmonic matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruncatedK {
    pub m: usize,
    pub hamming: usize,
    pub cap: usize,
    ks: Vec<HarmonicIndex>,
}

impl TruncatedK {
    pub fn ks(&self) -> &[HarmonicIndex] {
        &self.ks
    }

    pub fn len(&self) -> usize {
        self.ks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ks.is_empty()
    }

    pub fn position(&self, k: &HarmonicIndex) -> Option<usize> {
        self.ks.binary_search(k).ok()
    }

    /// True when every weight class up to `hamming` is complete.
    pub fn is_complete(&self) -> bool {
        self.ks.len() as u128 == full_count(self.m, self.hamming)
    }
}

/// `Σ_{w ≤ h} C(m, w) 2^w`.
pub fn full_count(m: usize, h: usize) -> u128 {
    let mut total = 0u128;
    let mut binom = 1u128;
    for w in 0..=h.min(m) {
        total += binom << w;
        binom = binom * (m - w) as u128 / (w + 1) as u128;
    }
    total
}

/// All `k ∈ {-1,0,1}^m` of weight at most `h`, in canonical order.
///
/// When the full set exceeds `cap`, whole weight classes are kept while
/// they fit; the first class that does not fit is filled in canonical order
/// with `k` and `-k` added together, so the result stays closed under
/// negation (possibly leaving one slot unused). `cap` is clamped to ≥ 1.
pub fn enumerate_k(m: usize, h: usize, cap: usize) -> TruncatedK {
    let cap = cap.max(1);
    let mut ks = vec![HarmonicIndex::zero()];
    for w in 1..=h.min(m) {
        let room = cap - ks.len();
        let class_size = full_count_class(m, w);
        if class_size <= room as u128 {
            for_each_of_weight(m, w, &mut |pairs| {
                ks.push(HarmonicIndex(pairs.to_vec()));
                true
            });
            continue;
        }
        let mut partial: Vec<HarmonicIndex> = Vec::new();
        let mut taken: HashSet<HarmonicIndex> = HashSet::new();
        for_each_of_weight(m, w, &mut |pairs| {
            if room - partial.len() < 2 {
                return false;
            }
            let k = HarmonicIndex(pairs.to_vec());
            if !taken.contains(&k) {
                let nk = k.neg();
                taken.insert(k.clone());
                taken.insert(nk.clone());
                partial.push(k);
                partial.push(nk);
            }
            true
        });
        partial.sort();
        ks.extend(partial);
        break;
    }
    TruncatedK { m, hamming: h, cap, ks }
}

fn full_count_class(m: usize, w: usize) -> u128 {
    full_count(m, w) - full_count(m, w - 1)
}

/// Visits weight-`w` harmonics in canonical order until `visit` returns false.
fn for_each_of_weight(m: usize, w: usize, visit: &mut dyn FnMut(&[(u32, i8)]) -> bool) {
    fn rec(m: usize, w: usize, start: usize, buf: &mut Vec<(u32, i8)>, visit: &mut dyn FnMut(&[(u32, i8)]) -> bool) -> bool {
        if buf.len() == w {
            return visit(buf);
        }
        let left = w - buf.len();
        for a in start..=m - left {
            for s in [-1i8, 1] {
                buf.push((a as u32, s));
                let go = rec(m, w, a + 1, buf, visit);
                buf.pop();
                if !go {
                    return false;
                }
            }
        }
        true
    }
    rec(m, w, 0, &mut Vec::with_capacity(w), visit);
}
