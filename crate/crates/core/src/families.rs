//! The four benchmark families: YZY with and without entanglers, and
//! Circuits 16 and 17 of the Sim et al. expressibility catalogue.
//!
//! Every layer is one encoder gate per qubit followed by `depth`
//! repetitions of the family's training pattern. Parameters are numbered in
//! gate order, continuing across repetitions and layers.
//!
//! Controlled rotations are stored pre-decomposed as two commuting Pauli
//! rotations sharing one parameter,
//! `CR_P(θ) = R_{P_t}(θ/2) · R_{Z_c P_t}(-θ/2)`, which is exact for any
//! target axis. The ladder order for `n` qubits is: first the pairs
//! `(control 2i+1 → target 2i)`, then `(control 2i+2 → target 2i+1)`,
//! which reproduces the four-qubit diagrams and extends them to any `n`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::circuit::{Axis, Circuit, Clifford, Encoder, Gate, Layer, Multiplier, Rotation};
use crate::error::{Error, Result};
use crate::pauli::{Letter, PauliString};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "yzy-noent")]
    YzyNoEnt,
    #[serde(rename = "yzy-ent")]
    YzyEnt,
    #[serde(rename = "circuit16")]
    Circuit16,
    #[serde(rename = "circuit17")]
    Circuit17,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::YzyNoEnt, Family::YzyEnt, Family::Circuit16, Family::Circuit17];

    pub fn name(self) -> &'static str {
        match self {
            Family::YzyNoEnt => "yzy-noent",
            Family::YzyEnt => "yzy-ent",
            Family::Circuit16 => "circuit16",
            Family::Circuit17 => "circuit17",
        }
    }

    pub fn is_entangling(self) -> bool {
        self != Family::YzyNoEnt
    }

    /// Closed-form trainable parameter count.
    pub fn param_count(self, n: usize, layers: usize, depth: usize) -> usize {
        match self {
            Family::YzyNoEnt | Family::YzyEnt => 3 * n * depth * layers,
            Family::Circuit16 | Family::Circuit17 => (3 * n - 1) * depth * layers,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownFamily(s.to_string()))
    }
}

/// Controlled-rotation pairs `(control, target)` in ladder order.
pub fn ladder_pairs(n: usize) -> Vec<(usize, usize)> {
    let mut pairs: Vec<(usize, usize)> = (0..n / 2).filter(|i| 2 * i + 1 < n).map(|i| (2 * i + 1, 2 * i)).collect();
    pairs.extend((0..n).filter(|i| 2 * i + 2 < n).map(|i| (2 * i + 2, 2 * i + 1)));
    pairs
}

struct Builder {
    n: usize,
    next: usize,
    gates: Vec<Gate>,
}

impl Builder {
    fn rot(&mut self, q: usize, l: Letter) {
        let axis = PauliString::single(self.n, q, l);
        self.gates.push(Gate::Rotation(Rotation { axis, param: self.next, mult: Multiplier::ONE }));
        self.next += 1;
    }

    fn controlled_rot(&mut self, control: usize, target: usize, l: Letter) {
        let on_target = PauliString::single(self.n, target, l);
        let zp = PauliString::single(self.n, control, Letter::Z).mul(&on_target);
        let half = Multiplier::new(1, 2).expect("valid");
        let minus_half = Multiplier::new(-1, 2).expect("valid");
        self.gates.push(Gate::Rotation(Rotation { axis: on_target, param: self.next, mult: half }));
        self.gates.push(Gate::Rotation(Rotation { axis: zp, param: self.next, mult: minus_half }));
        self.next += 1;
    }
}

/// Builds a benchmark circuit with observable `(1/n) Σ Z_q`.
pub fn build_family(family: Family, encoder_axis: Axis, n: usize, layers: usize, depth: usize) -> Result<Circuit> {
    if n == 0 || layers == 0 || depth == 0 {
        return Err(Error::InvalidCircuit(format!("need n, L, d >= 1 (got n={n}, L={layers}, d={depth})")));
    }
    if family.is_entangling() && n < 2 {
        return Err(Error::InvalidCircuit(format!("{family} needs at least two qubits")));
    }
    let mut b = Builder { n, next: 0, gates: Vec::new() };
    let mut out = Vec::with_capacity(layers);
    for _ in 0..layers {
        for _ in 0..depth {
            match family {
                Family::YzyNoEnt | Family::YzyEnt => {
                    for q in 0..n {
                        b.rot(q, Letter::Y);
                        b.rot(q, Letter::Z);
                        b.rot(q, Letter::Y);
                    }
                    if family == Family::YzyEnt {
                        for control in 0..n {
                            for target in control + 1..n {
                                b.gates.push(Gate::Clifford(Clifford::Cnot { control, target }));
                            }
                        }
                    }
                }
                Family::Circuit16 | Family::Circuit17 => {
                    for q in 0..n {
                        b.rot(q, Letter::X);
                        b.rot(q, Letter::Z);
                    }
                    let target_axis = if family == Family::Circuit16 { Letter::Z } else { Letter::X };
                    for (c, t) in ladder_pairs(n) {
                        b.controlled_rot(c, t, target_axis);
                    }
                }
            }
        }
        let encoder = (0..n).map(|qubit| Encoder { axis: encoder_axis, qubit }).collect();
        out.push(Layer { encoder, trainable: std::mem::take(&mut b.gates) });
    }
    let m = b.next;
    debug_assert_eq!(m, family.param_count(n, layers, depth));
    Circuit::new(n, m, out, Circuit::mean_magnetisation(n))
}

/// A random single-use circuit for oracle checks: `layers` encoder blocks
/// on a random common axis, each followed by a shuffled mix of Pauli
/// rotations (single- and multi-qubit axes, multipliers ±1) and CNOTs.
/// Observable is `(1/n) Σ Z_q`.
pub fn random_single_use(n: usize, layers: usize, seed: u64) -> Result<Circuit> {
    use rand::{Rng, SeedableRng};
    if n == 0 || layers == 0 {
        return Err(Error::InvalidCircuit("random circuit needs n, L >= 1".into()));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let axes = [Axis::X, Axis::Y, Axis::Z];
    let letters = [Letter::I, Letter::X, Letter::Y, Letter::Z];
    let mut next = 0;
    let mut out = Vec::with_capacity(layers);
    for _ in 0..layers {
        let axis = axes[rng.random_range(0..3)];
        let encoder = (0..n).map(|qubit| Encoder { axis, qubit }).collect();
        let mut trainable = Vec::new();
        for _ in 0..rng.random_range(3..=6) {
            if n > 1 && rng.random_bool(0.3) {
                let control = rng.random_range(0..n);
                let target = (control + rng.random_range(1..n)) % n;
                trainable.push(Gate::Clifford(Clifford::Cnot { control, target }));
                continue;
            }
            let mut word: Vec<Letter> = (0..n).map(|_| letters[rng.random_range(0..4)]).collect();
            if word.iter().all(|&l| l == Letter::I) {
                word[rng.random_range(0..n)] = letters[rng.random_range(1..4)];
            }
            let mult = if rng.random_bool(0.5) { Multiplier::ONE } else { Multiplier::new(-1, 1)? };
            trainable.push(Gate::Rotation(Rotation { axis: PauliString::from_letters(&word), param: next, mult }));
            next += 1;
        }
        out.push(Layer { encoder, trainable });
    }
    Circuit::new(n, next, out, Circuit::mean_magnetisation(n))
}
