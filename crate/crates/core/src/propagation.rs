//! Exact construction of `C` by Heisenberg back-propagation.
//!
//! Each observable term is conjugated gate by gate from the end of the
//! circuit towards the input. A rotation `exp(-iφP/2)` leaves a commuting
//! string alone and splits an anti-commuting string `Q` into
//! `cos φ · Q + sin φ · iPQ`. Cliffords relabel deterministically.
//! Encoder gates branch like rotations with the input `x` as angle.
//!
//! Branches with identical Pauli string and identical trigonometric
//! monomials are merged as they appear, adding their coefficients.
//! At the end only `{I,Z}` strings survive, since every other string has
//! zero expectation in `|0…0⟩`.

use std::collections::{BTreeMap, HashMap};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::circuit::{Circuit, Gate};
use crate::cmatrix::CMatrix;
use crate::error::{Error, Result};
use crate::harmonic::HarmonicIndex;
use crate::io::Provenance;
use crate::pauli::{Phase, PauliString};
use crate::spectral::FrequencySet;

pub const DEFAULT_NODE_BUDGET: usize = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Trig {
    Cos,
    Sin,
}

/// Product of `cos θ_a` / `sin θ_a` factors, at most one per parameter,
/// sorted by parameter index.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize)]
pub struct TrigMonomial(Vec<(u32, Trig)>);

impl TrigMonomial {
    pub fn new(mut factors: Vec<(u32, Trig)>) -> Self {
        factors.sort_unstable();
        assert!(factors.windows(2).all(|w| w[0].0 != w[1].0), "repeated variable in monomial");
        TrigMonomial(factors)
    }

    pub fn factors(&self) -> &[(u32, Trig)] {
        &self.0
    }

    /// Size of the active set.
    pub fn degree(&self) -> usize {
        self.0.len()
    }

    fn with(&self, a: u32, t: Trig) -> Self {
        let mut f = self.0.clone();
        let pos = f.partition_point(|p| p.0 < a);
        f.insert(pos, (a, t));
        TrigMonomial(f)
    }

    pub fn evaluate(&self, theta: &[f64]) -> f64 {
        self.0
            .iter()
            .map(|&(a, t)| match t {
                Trig::Cos => theta[a as usize].cos(),
                Trig::Sin => theta[a as usize].sin(),
            })
            .product()
    }
}

/// `cos^c x · sin^s x`; all encoder insertions share the one input variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize)]
pub struct XMonomial {
    pub cos: u32,
    pub sin: u32,
}

impl XMonomial {
    pub fn evaluate(&self, x: f64) -> f64 {
        x.cos().powi(self.cos as i32) * x.sin().powi(self.sin as i32)
    }
}

/// One surviving branch: contributes `coeff · x_monomial(x) · theta_monomial(θ)`
/// to `f(x;θ)`, with `coeff = d_ν` already including the observable weight
/// and `Tr[P_ν ρ]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PropNode {
    pub pauli: PauliString,
    pub coeff: Complex64,
    pub x_monomial: XMonomial,
    pub theta_monomial: TrigMonomial,
}

/// Result of one conjugation step `U† Q U` with `U = exp(-iφP/2)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Branch {
    Unchanged,
    /// `U† Q U = cos φ · cos_branch + sin φ · sin_branch`, with
    /// `sin_branch = iPQ` (Hermitian, phase `±1`).
    Split { cos_branch: PauliString, sin_branch: PauliString },
}

pub fn conjugate_rotation(q: &PauliString, p: &PauliString) -> Branch {
    if p.commutes(q) {
        Branch::Unchanged
    } else {
        Branch::Split { cos_branch: *q, sin_branch: p.mul(q).scale(Phase::I) }
    }
}

#[derive(Debug, Clone)]
pub struct PropagationOptions {
    pub node_budget: usize,
    /// Merge identical branches as they appear.
    pub merge: bool,
    /// Sign applied to every sine branch. Always `+1` in real use; flipping
    /// it is a mutation check for the identity suite.
    #[doc(hidden)]
    pub sin_sign: f64,
}

impl Default for PropagationOptions {
    fn default() -> Self {
        PropagationOptions { node_budget: DEFAULT_NODE_BUDGET, merge: true, sin_sign: 1.0 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct PropagationStats {
    /// Branches alive after the last gate, before pruning.
    pub nodes_before_pruning: usize,
    pub nodes_after_pruning: usize,
    /// Number of gates that split at least one branch.
    pub splitting_gates: usize,
}

type Key = (PauliString, XMonomial, TrigMonomial);

enum Step {
    Clifford(crate::circuit::Clifford),
    Rotation { axis: PauliString, param: u32, sign: f64 },
    Encoder(PauliString),
}

fn steps(circuit: &Circuit) -> Result<Vec<Step>> {
    let shared = circuit.shared_parameters();
    if !shared.is_empty() {
        return Err(Error::SharedParameters(shared));
    }
    let n = circuit.num_qubits();
    let mut out = Vec::new();
    for layer in circuit.layers() {
        out.extend(layer.encoder.iter().map(|e| Step::Encoder(e.generator(n))));
        for g in &layer.trainable {
            out.push(match g {
                Gate::Clifford(c) => Step::Clifford(*c),
                Gate::Rotation(r) => {
                    let sign = r.mult.unit_sign().ok_or_else(|| Error::UnsupportedMultiplier {
                        param: r.param,
                        mult: r.mult.to_string(),
                    })?;
                    Step::Rotation { axis: r.axis, param: r.param as u32, sign: sign as f64 }
                }
            });
        }
    }
    Ok(out)
}

fn insert(map: &mut Vec<(Key, Complex64)>, index: &mut HashMap<Key, usize>, merge: bool, key: Key, c: Complex64) {
    if merge {
        if let Some(&i) = index.get(&key) {
            map[i].1 += c;
            return;
        }
        index.insert(key.clone(), map.len());
    }
    map.push((key, c));
}

/// Back-propagates the observable through the whole circuit and returns
/// the surviving nodes in canonical order.
pub fn backpropagate(circuit: &Circuit) -> Result<Vec<PropNode>> {
    backpropagate_with(circuit, &PropagationOptions::default()).map(|(nodes, _)| nodes)
}

pub fn backpropagate_with(circuit: &Circuit, opts: &PropagationOptions) -> Result<(Vec<PropNode>, PropagationStats)> {
    let steps = steps(circuit)?;
    let mut live: Vec<(Key, Complex64)> = Vec::new();
    let mut index = HashMap::new();
    for t in circuit.observable() {
        let c = Complex64::new(t.weight, 0.0) * t.pauli.phase().to_complex();
        insert(&mut live, &mut index, opts.merge, (t.pauli.unsigned(), XMonomial::default(), TrigMonomial::default()), c);
    }
    let mut stats = PropagationStats::default();
    for step in steps.iter().rev() {
        let mut next: Vec<(Key, Complex64)> = Vec::with_capacity(live.len());
        let mut next_index = HashMap::new();
        let mut split = false;
        for ((q, xm, tm), c) in live.drain(..) {
            match step {
                Step::Clifford(g) => {
                    let img = g.conjugate(&q);
                    let c = c * img.phase().to_complex();
                    insert(&mut next, &mut next_index, opts.merge, (img.unsigned(), xm, tm), c);
                }
                Step::Rotation { axis, param, sign } => match conjugate_rotation(&q, axis) {
                    Branch::Unchanged => insert(&mut next, &mut next_index, opts.merge, (q, xm, tm), c),
                    Branch::Split { cos_branch, sin_branch } => {
                        split = true;
                        let sc = c * sin_branch.phase().to_complex() * (sign * opts.sin_sign);
                        insert(&mut next, &mut next_index, opts.merge, (cos_branch, xm, tm.with(*param, Trig::Cos)), c);
                        insert(&mut next, &mut next_index, opts.merge, (sin_branch.unsigned(), xm, tm.with(*param, Trig::Sin)), sc);
                    }
                },
                Step::Encoder(axis) => match conjugate_rotation(&q, axis) {
                    Branch::Unchanged => insert(&mut next, &mut next_index, opts.merge, (q, xm, tm), c),
                    Branch::Split { cos_branch, sin_branch } => {
                        split = true;
                        let sc = c * sin_branch.phase().to_complex() * opts.sin_sign;
                        let xc = XMonomial { cos: xm.cos + 1, ..xm };
                        let xs = XMonomial { sin: xm.sin + 1, ..xm };
                        insert(&mut next, &mut next_index, opts.merge, (cos_branch, xc, tm.clone()), c);
                        insert(&mut next, &mut next_index, opts.merge, (sin_branch.unsigned(), xs, tm), sc);
                    }
                },
            }
        }
        if opts.merge {
            next.retain(|(_, c)| *c != Complex64::new(0.0, 0.0));
        }
        if next.len() > opts.node_budget {
            return Err(Error::NodeBudget { budget: opts.node_budget });
        }
        stats.splitting_gates += split as usize;
        live = next;
    }
    stats.nodes_before_pruning = live.len();
    let mut nodes: Vec<PropNode> = live
        .into_iter()
        .filter(|((p, _, _), _)| p.is_diagonal())
        .map(|((pauli, x_monomial, theta_monomial), coeff)| PropNode { pauli, coeff, x_monomial, theta_monomial })
        .collect();
    nodes.sort_by(|a, b| {
        (a.pauli, a.x_monomial, &a.theta_monomial).cmp(&(b.pauli, b.x_monomial, &b.theta_monomial))
    });
    stats.nodes_after_pruning = nodes.len();
    Ok((nodes, stats))
}

/// Evaluates `Σ_ν d_ν N_ν(x) M_ν(θ)` directly from the node list.
pub fn evaluate_nodes(nodes: &[PropNode], x: f64, theta: &[f64]) -> Complex64 {
    nodes.iter().map(|nd| nd.coeff * nd.x_monomial.evaluate(x) * nd.theta_monomial.evaluate(theta)).sum()
}

fn cos_chars() -> [(i8, Complex64); 2] {
    [(-1, Complex64::new(0.5, 0.0)), (1, Complex64::new(0.5, 0.0))]
}

fn sin_chars() -> [(i8, Complex64); 2] {
    // sin t = (e^{it} - e^{-it}) / 2i
    [(-1, Complex64::new(0.0, 0.5)), (1, Complex64::new(0.0, -0.5))]
}

/// Character expansion of a parameter monomial: exactly `2^|A|` entries.
pub fn trig_to_characters(monomial: &TrigMonomial) -> Vec<(HarmonicIndex, Complex64)> {
    let mut acc: Vec<(Vec<(u32, i8)>, Complex64)> = vec![(Vec::new(), Complex64::new(1.0, 0.0))];
    for &(a, t) in monomial.factors() {
        let chars = if t == Trig::Cos { cos_chars() } else { sin_chars() };
        acc = acc
            .into_iter()
            .flat_map(|(k, v)| {
                chars.iter().map(move |&(s, w)| {
                    let mut k = k.clone();
                    k.push((a, s));
                    (k, v * w)
                })
            })
            .collect();
    }
    acc.into_iter().map(|(k, v)| (HarmonicIndex::from_pairs(k), v)).collect()
}

/// Character expansion of `cos^c x sin^s x` over integer frequencies.
pub fn x_characters(m: XMonomial) -> BTreeMap<i64, Complex64> {
    let mut acc = BTreeMap::from([(0i64, Complex64::new(1.0, 0.0))]);
    let factors = std::iter::repeat_n(cos_chars(), m.cos as usize).chain(std::iter::repeat_n(sin_chars(), m.sin as usize));
    for chars in factors {
        let mut next = BTreeMap::new();
        for (&w, &v) in &acc {
            for &(s, c) in &chars {
                *next.entry(w + s as i64).or_insert(Complex64::new(0.0, 0.0)) += v * c;
            }
        }
        acc = next;
    }
    acc
}

/// Exact `C` for a single-use circuit. Rows cover the accessible frequency
/// set; columns are the union of node supports plus `k = 0`, in canonical
/// order.
pub fn exact_c(circuit: &Circuit) -> Result<CMatrix> {
    exact_c_with(circuit, &PropagationOptions::default())
}

pub fn exact_c_with(circuit: &Circuit, opts: &PropagationOptions) -> Result<CMatrix> {
    let omegas = FrequencySet::of_circuit(circuit)?;
    let (nodes, _) = backpropagate_with(circuit, opts)?;
    assemble_c(circuit, &nodes, omegas.omegas())
}

fn assemble_c(circuit: &Circuit, nodes: &[PropNode], omegas: &[i64]) -> Result<CMatrix> {
    let mut x_cache: HashMap<XMonomial, BTreeMap<i64, Complex64>> = HashMap::new();
    let mut cols: BTreeMap<HarmonicIndex, Vec<Complex64>> = BTreeMap::new();
    cols.insert(HarmonicIndex::zero(), vec![Complex64::new(0.0, 0.0); omegas.len()]);
    for nd in nodes {
        let xc = x_cache.entry(nd.x_monomial).or_insert_with(|| x_characters(nd.x_monomial));
        for (k, mk) in trig_to_characters(&nd.theta_monomial) {
            let col = cols.entry(k).or_insert_with(|| vec![Complex64::new(0.0, 0.0); omegas.len()]);
            for (&w, &nx) in xc.iter() {
                let r = omegas
                    .binary_search(&w)
                    .map_err(|_| Error::Invariant(format!("node frequency {w} outside the accessible set")))?;
                col[r] += nd.coeff * nx * mk;
            }
        }
    }
    let ks: Vec<HarmonicIndex> = cols.keys().cloned().collect();
    let data = DMatrix::from_fn(omegas.len(), ks.len(), |r, c| cols[&ks[c]][r]);
    let desc = format!("n={} L={} m={}", circuit.num_qubits(), circuit.num_layers(), circuit.num_params());
    CMatrix::new(omegas.to_vec(), ks, data, Provenance::exact(desc))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SupportBound {
    /// Largest active-set size over surviving nodes.
    pub b_max: usize,
    /// `2^b_max` (zero when no node survives).
    pub lower_bound: u64,
    /// Size of the union of node `k`-supports.
    pub generated: usize,
}

/// Node-induced lower bound on the generated `k`-support.
pub fn support_bound(nodes: &[PropNode]) -> Result<SupportBound> {
    let b_max = nodes.iter().map(|n| n.theta_monomial.degree()).max().unwrap_or(0);
    let mut union = std::collections::HashSet::new();
    for nd in nodes {
        union.extend(trig_to_characters(&nd.theta_monomial).into_iter().map(|(k, _)| k));
    }
    let lower_bound = if nodes.is_empty() { 0 } else { 1u64 << b_max };
    let out = SupportBound { b_max, lower_bound, generated: union.len() };
    if (out.generated as u64) < out.lower_bound {
        return Err(Error::Invariant(format!("generated support {} below bound {}", out.generated, out.lower_bound)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{Axis, Clifford, Encoder, Layer, Multiplier, Rotation};
    use crate::pauli::Letter;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn rx_ry() -> Circuit {
        let layer = Layer {
            encoder: vec![Encoder { axis: Axis::X, qubit: 0 }],
            trainable: vec![Gate::Rotation(Rotation {
                axis: PauliString::single(1, 0, Letter::Y),
                param: 0,
                mult: Multiplier::ONE,
            })],
        };
        Circuit::new(1, 1, vec![layer], Circuit::mean_magnetisation(1)).unwrap()
    }

    #[test]
    fn conjugation_examples() {
        let z: PauliString = "Z".parse().unwrap();
        let x: PauliString = "X".parse().unwrap();
        assert_eq!(conjugate_rotation(&z, &z), Branch::Unchanged);
        let Branch::Split { cos_branch, sin_branch } = conjugate_rotation(&x, &z) else { panic!() };
        assert_eq!(cos_branch, x);
        assert_eq!(sin_branch, "-Y".parse().unwrap());
        let zi: PauliString = "ZI".parse().unwrap();
        let xx: PauliString = "XX".parse().unwrap();
        let Branch::Split { sin_branch, .. } = conjugate_rotation(&zi, &xx) else { panic!() };
        assert_eq!(sin_branch, "YX".parse().unwrap());
    }

    #[test]
    fn single_qubit_nodes() {
        let (nodes, stats) = backpropagate_with(&rx_ry(), &PropagationOptions::default()).unwrap();
        assert_eq!(stats.nodes_before_pruning, 3);
        assert_eq!(nodes.len(), 1);
        let nd = &nodes[0];
        assert_eq!(nd.pauli, "Z".parse().unwrap());
        assert_eq!(nd.coeff, c(1.0, 0.0));
        assert_eq!(nd.x_monomial, XMonomial { cos: 1, sin: 0 });
        assert_eq!(nd.theta_monomial, TrigMonomial::new(vec![(0, Trig::Cos)]));
    }

    #[test]
    fn clifford_only_circuit_has_one_node() {
        let layer = Layer {
            encoder: vec![],
            trainable: vec![
                Gate::Clifford(Clifford::Cnot { control: 0, target: 1 }),
                Gate::Clifford(Clifford::H(1)),
                Gate::Clifford(Clifford::H(1)),
            ],
        };
        let obs = vec![crate::circuit::ObservableTerm { weight: 1.0, pauli: "IZ".parse().unwrap() }];
        let circ = Circuit::new(2, 0, vec![layer], obs).unwrap();
        let nodes = backpropagate(&circ).unwrap();
        assert_eq!(nodes.len(), 1);
        assert_eq!(nodes[0].pauli, "ZZ".parse().unwrap());
        assert_eq!(nodes[0].theta_monomial.degree(), 0);
        let cm = exact_c(&circ).unwrap();
        assert_eq!(cm.ks(), &[HarmonicIndex::zero()]);
    }

    #[test]
    fn characters_of_single_factors() {
        let cos = trig_to_characters(&TrigMonomial::new(vec![(0, Trig::Cos)]));
        assert_eq!(cos, vec![(HarmonicIndex::from_pairs(vec![(0, -1)]), c(0.5, 0.0)), (HarmonicIndex::from_pairs(vec![(0, 1)]), c(0.5, 0.0))]);
        let sin = trig_to_characters(&TrigMonomial::new(vec![(0, Trig::Sin)]));
        assert_eq!(sin, vec![(HarmonicIndex::from_pairs(vec![(0, -1)]), c(0.0, 0.5)), (HarmonicIndex::from_pairs(vec![(0, 1)]), c(0.0, -0.5))]);
    }

    #[test]
    fn characters_of_cos_sin_product() {
        // Oracle: expand (e^{it}+e^{-it})/2 · (e^{iu}-e^{-iu})/2i by hand.
        let chars = trig_to_characters(&TrigMonomial::new(vec![(0, Trig::Cos), (1, Trig::Sin)]));
        assert_eq!(chars.len(), 4);
        let get = |a: i8, b: i8| {
            chars.iter().find(|(k, _)| *k == HarmonicIndex::from_pairs(vec![(0, a), (1, b)])).unwrap().1
        };
        assert_eq!(get(1, 1), c(0.0, -0.25));
        assert_eq!(get(-1, 1), c(0.0, -0.25));
        assert_eq!(get(1, -1), c(0.0, 0.25));
        assert_eq!(get(-1, -1), c(0.0, 0.25));
        // And numerically against the monomial at a few points.
        for (t0, t1) in [(0.3, 1.1), (-2.0, 0.7)] {
            let v: Complex64 =
                chars.iter().map(|(k, w)| w * Complex64::from_polar(1.0, k.dot_theta(&[t0, t1]))).sum();
            assert!((v.re - t0.cos() * t1.sin()).abs() < 1e-15 && v.im.abs() < 1e-15);
        }
    }

    #[test]
    fn x_characters_of_powers() {
        let m = XMonomial { cos: 2, sin: 1 };
        let chars = x_characters(m);
        for x in [0.1, 0.9, 2.5] {
            let v: Complex64 = chars.iter().map(|(&w, &c)| c * Complex64::from_polar(1.0, w as f64 * x)).sum();
            assert!((v.re - m.evaluate(x)).abs() < 1e-15 && v.im.abs() < 1e-15);
        }
        assert_eq!(chars.keys().copied().collect::<Vec<_>>(), vec![-3, -1, 1, 3]);
    }

    #[test]
    fn exact_c_single_qubit() {
        let cm = exact_c(&rx_ry()).unwrap();
        assert_eq!(cm.omegas(), &[-1, 0, 1]);
        assert_eq!(cm.ks().len(), 3);
        for w in [-1i64, 0, 1] {
            for k in cm.ks() {
                let want = if w != 0 && !k.is_zero() { 0.25 } else { 0.0 };
                assert_eq!(cm.entry(w, k), c(want, 0.0), "ω={w} k={k}");
            }
        }
    }

    #[test]
    fn support_bounds() {
        let nodes = backpropagate(&rx_ry()).unwrap();
        let b = support_bound(&nodes).unwrap();
        assert_eq!((b.b_max, b.lower_bound, b.generated), (1, 2, 2));
        let three = PropNode {
            pauli: "Z".parse().unwrap(),
            coeff: c(1.0, 0.0),
            x_monomial: XMonomial::default(),
            theta_monomial: TrigMonomial::new(vec![(0, Trig::Cos), (1, Trig::Sin), (4, Trig::Cos)]),
        };
        let b = support_bound(&[three]).unwrap();
        assert_eq!((b.b_max, b.lower_bound, b.generated), (3, 8, 8));
        let flat = PropNode { theta_monomial: TrigMonomial::default(), ..nodes[0].clone() };
        let b = support_bound(&[flat]).unwrap();
        assert_eq!((b.b_max, b.lower_bound, b.generated), (0, 1, 1));
    }

    #[test]
    fn rejects_shared_parameters_and_fractional_multipliers() {
        let c16 = crate::families::build_family(crate::families::Family::Circuit16, Axis::Y, 4, 1, 1).unwrap();
        match exact_c(&c16) {
            Err(Error::SharedParameters(p)) => assert_eq!(p, vec![8, 9, 10]),
            other => panic!("expected rejection, got {other:?}"),
        }
        let layer = Layer {
            encoder: vec![],
            trainable: vec![Gate::Rotation(Rotation {
                axis: PauliString::single(1, 0, Letter::Y),
                param: 0,
                mult: Multiplier::new(1, 2).unwrap(),
            })],
        };
        let half = Circuit::new(1, 1, vec![layer], Circuit::mean_magnetisation(1)).unwrap();
        assert!(matches!(exact_c(&half), Err(Error::UnsupportedMultiplier { .. })));
    }

    #[test]
    fn node_budget_is_enforced() {
        let circ = crate::families::build_family(crate::families::Family::YzyEnt, Axis::X, 3, 1, 2).unwrap();
        let opts = PropagationOptions { node_budget: 4, ..Default::default() };
        assert!(matches!(exact_c_with(&circ, &opts), Err(Error::NodeBudget { budget: 4 })));
    }

    #[test]
    fn unmerged_tree_doubles_per_split() {
        // Z observable through alternating Y and X rotations: every gate anti-commutes
        // with every live branch only on the first step, so count the tree directly.
        let rot = |param, l| {
            Gate::Rotation(Rotation { axis: PauliString::single(1, 0, l), param, mult: Multiplier::ONE })
        };
        let layer = Layer { encoder: vec![], trainable: vec![rot(0, Letter::Y), rot(1, Letter::Y), rot(2, Letter::Y)] };
        let circ = Circuit::new(1, 3, vec![layer], Circuit::mean_magnetisation(1)).unwrap();
        let opts = PropagationOptions { merge: false, ..Default::default() };
        let (_, stats) = backpropagate_with(&circ, &opts).unwrap();
        // Y anticommutes with both Z and X, so every branch splits at every gate.
        assert_eq!(stats.nodes_before_pruning, 8);
        assert_eq!(stats.splitting_gates, 3);
    }
}
