//! Encoder-side frequency combinatorics for scalar inputs.
//!
//! With the half-angle convention every single-qubit Pauli encoder has
//! eigenvalues `±1/2`, so an `n`-qubit uniform block has generator
//! spectrum `{-n/2, …, n/2}` and integer difference set `{-n, …, n}`.

use std::collections::BTreeSet;

use crate::circuit::{Circuit, Encoder};
use crate::error::{Error, Result};

/// Largest redundancy for which tuples are enumerated by default.
pub const ENUMERATION_CAP: u64 = 10_000;

/// Sorted, symmetric integer frequency set together with its per-layer
/// difference sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequencySet {
    omegas: Vec<i64>,
    layers: Vec<Vec<i64>>,
}

impl FrequencySet {
    pub fn omegas(&self) -> &[i64] {
        &self.omegas
    }

    pub fn layer_sets(&self) -> &[Vec<i64>] {
        &self.layers
    }

    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }

    pub fn max(&self) -> i64 {
        self.omegas.last().copied().unwrap_or(0)
    }

    pub fn index_of(&self, omega: i64) -> Option<usize> {
        self.omegas.binary_search(&omega).ok()
    }

    /// `|R(ω)|` for every `ω` in the set, in order.
    pub fn redundancy_profile(&self) -> Vec<u64> {
        let counts = redundancy_table(&self.layers);
        self.omegas.iter().map(|w| counts.get(w).copied().unwrap_or(0)).collect()
    }

    /// Accessible frequencies of a circuit: Minkowski sum over its layers.
    pub fn of_circuit(circuit: &Circuit) -> Result<Self> {
        let layers = circuit
            .layers()
            .iter()
            .enumerate()
            .map(|(i, l)| difference_set(&l.encoder).map_err(|_| Error::MixedEncoderAxes { layer: i }))
            .collect::<Result<Vec<_>>>()?;
        Ok(minkowski_sum(&layers))
    }
}

/// Difference set of a block of single-qubit Pauli encoders sharing one axis.
pub fn difference_set(block: &[Encoder]) -> Result<Vec<i64>> {
    if let Some(first) = block.first() {
        if block.iter().any(|e| e.axis != first.axis) {
            return Err(Error::MixedEncoderAxes { layer: 0 });
        }
    }
    let n = block.len() as i64;
    Ok((-n..=n).collect())
}

/// `Ω^{(1)} ⊕ … ⊕ Ω^{(L)}`. An empty list gives `{0}`.
pub fn minkowski_sum(layers: &[Vec<i64>]) -> FrequencySet {
    let mut acc: BTreeSet<i64> = BTreeSet::from([0]);
    for set in layers {
        let mut next = BTreeSet::new();
        for a in &acc {
            for b in set {
                next.insert(a + b);
            }
        }
        acc = next;
    }
    FrequencySet { omegas: acc.into_iter().collect(), layers: layers.to_vec() }
}

/// Number of tuples `(δ_1, …, δ_L)`, `δ_ℓ ∈ Ω^{(ℓ)}`, summing to each
/// reachable `ω`, by convolution of per-layer indicators.
fn redundancy_table(layers: &[Vec<i64>]) -> std::collections::BTreeMap<i64, u64> {
    let mut acc = std::collections::BTreeMap::from([(0i64, 1u64)]);
    for set in layers {
        let mut next = std::collections::BTreeMap::new();
        for (&w, &c) in &acc {
            for &d in set {
                *next.entry(w + d).or_insert(0u64) += c;
            }
        }
        acc = next;
    }
    acc
}

/// Path-set size `|R(ω)|` and, when it does not exceed `enumeration_cap`,
/// the tuples themselves. Frequencies outside the accessible set count 0.
pub fn redundancy(layers: &[Vec<i64>], omega: i64, enumeration_cap: u64) -> (u64, Option<Vec<Vec<i64>>>) {
    let count = redundancy_table(layers).get(&omega).copied().unwrap_or(0);
    if count > enumeration_cap {
        return (count, None);
    }
    let mut out = Vec::new();
    let mut prefix = Vec::with_capacity(layers.len());
    // Reachable partial sums from each suffix, to prune the search.
    let suffix: Vec<std::collections::BTreeMap<i64, u64>> =
        (0..=layers.len()).map(|i| redundancy_table(&layers[i..])).collect();
    enumerate(layers, &suffix, 0, omega, &mut prefix, &mut out);
    debug_assert_eq!(out.len() as u64, count);
    (count, Some(out))
}

fn enumerate(
    layers: &[Vec<i64>],
    suffix: &[std::collections::BTreeMap<i64, u64>],
    depth: usize,
    remaining: i64,
    prefix: &mut Vec<i64>,
    out: &mut Vec<Vec<i64>>,
) {
    if depth == layers.len() {
        if remaining == 0 {
            out.push(prefix.clone());
        }
        return;
    }
    for &d in &layers[depth] {
        if suffix[depth + 1].contains_key(&(remaining - d)) {
            prefix.push(d);
            enumerate(layers, suffix, depth + 1, remaining - d, prefix, out);
            prefix.pop();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::Axis;

    fn block(n: usize) -> Vec<Encoder> {
        (0..n).map(|qubit| Encoder { axis: Axis::Z, qubit }).collect()
    }

    /// Differences of all joint eigenvalues of `Σ_q Z_q / 2`.
    fn brute_difference_set(n: usize) -> Vec<i64> {
        let eig: Vec<i64> = (0..1u32 << n).map(|b| n as i64 - 2 * b.count_ones() as i64).collect(); // 2λ
        let set: BTreeSet<i64> = eig.iter().flat_map(|a| eig.iter().map(move |b| (a - b) / 2)).collect();
        set.into_iter().collect()
    }

    #[test]
    fn difference_sets() {
        assert_eq!(difference_set(&block(1)).unwrap(), vec![-1, 0, 1]);
        assert_eq!(difference_set(&block(2)).unwrap(), brute_difference_set(2));
        assert_eq!(difference_set(&block(6)).unwrap().len(), 13);
        for n in 1..=6 {
            assert_eq!(difference_set(&block(n)).unwrap(), brute_difference_set(n));
        }
        let mixed = vec![Encoder { axis: Axis::X, qubit: 0 }, Encoder { axis: Axis::Y, qubit: 1 }];
        assert!(difference_set(&mixed).is_err());
    }

    #[test]
    fn minkowski_sums() {
        let unit = vec![-1, 0, 1];
        assert_eq!(minkowski_sum(std::slice::from_ref(&unit)).omegas(), &[-1, 0, 1]);
        assert_eq!(minkowski_sum(&[unit.clone(), unit]).omegas(), &[-2, -1, 0, 1, 2]);
        let six: Vec<i64> = (-6..=6).collect();
        assert_eq!(minkowski_sum(&[six.clone(), six]).omegas(), (-12..=12).collect::<Vec<_>>().as_slice());
    }

    #[test]
    fn redundancy_counts() {
        let unit = vec![-1, 0, 1];
        assert_eq!(redundancy(std::slice::from_ref(&unit), 1, ENUMERATION_CAP).0, 1);
        let (count, tuples) = redundancy(&[unit.clone(), unit.clone()], 0, ENUMERATION_CAP);
        assert_eq!(count, 3);
        let mut tuples = tuples.unwrap();
        tuples.sort();
        assert_eq!(tuples, vec![vec![-1, 1], vec![0, 0], vec![1, -1]]);
        assert_eq!(redundancy(&[unit.clone(), unit.clone()], 2, ENUMERATION_CAP).0, 1);
        assert_eq!(redundancy(&[unit.clone(), unit.clone()], 5, ENUMERATION_CAP), (0, Some(vec![])));
        assert_eq!(redundancy(&[unit.clone(), unit], 0, 2), (3, None));
    }

    #[test]
    fn redundancy_profile_sums_to_product_and_is_symmetric() {
        let layers = vec![(-2..=2).collect::<Vec<_>>(), vec![-1, 0, 1], (-3..=3).collect()];
        let set = minkowski_sum(&layers);
        let profile = set.redundancy_profile();
        assert_eq!(profile.iter().sum::<u64>(), 5 * 3 * 7);
        let rev: Vec<u64> = profile.iter().rev().copied().collect();
        assert_eq!(profile, rev);
    }
}
