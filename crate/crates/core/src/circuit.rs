//! Layered circuit IR: encoder blocks carrying the input `x`, trainable
//! blocks of Pauli rotations and Clifford gates, and a Pauli-sum observable.
//!
//! Rotations use `R_P(φ) = exp(-i φ P / 2)` with `φ = mult · θ[param]`;
//! encoders are `exp(-i x σ / 2)` on one qubit.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{Letter, PauliString};

pub const FORMAT_VERSION: u32 = 1;

/// Axis of a single-qubit encoder gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn letter(self) -> Letter {
        match self {
            Axis::X => Letter::X,
            Axis::Y => Letter::Y,
            Axis::Z => Letter::Z,
        }
    }
}

impl FromStr for Axis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "x" => Ok(Axis::X),
            "y" => Ok(Axis::Y),
            "z" => Ok(Axis::Z),
            _ => Err(Error::InvalidCircuit(format!("unknown axis {s:?}"))),
        }
    }
}

/// Rational angle multiplier `num / den`, `den > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Multiplier {
    num: i32,
    den: u32,
}

impl Multiplier {
    pub const ONE: Multiplier = Multiplier { num: 1, den: 1 };

    pub fn new(num: i32, den: u32) -> Result<Self> {
        if den == 0 {
            return Err(Error::InvalidCircuit("multiplier with zero denominator".into()));
        }
        if num == 0 {
            return Err(Error::InvalidCircuit("multiplier must be non-zero".into()));
        }
        let g = gcd(num.unsigned_abs(), den);
        Ok(Multiplier { num: num / g as i32, den: den / g })
    }

    pub fn value(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn numerator(self) -> i32 {
        self.num
    }

    pub fn denominator(self) -> u32 {
        self.den
    }

    /// `Some(±1)` when the multiplier is a unit integer.
    pub fn unit_sign(self) -> Option<i8> {
        match (self.num, self.den) {
            (1, 1) => Some(1),
            (-1, 1) => Some(-1),
            _ => None,
        }
    }
}

fn gcd(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.max(1)
}

impl Default for Multiplier {
    fn default() -> Self {
        Multiplier::ONE
    }
}

impl fmt::Display for Multiplier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl FromStr for Multiplier {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidCircuit(format!("bad multiplier {s:?}"));
        let (num, den) = match s.split_once('/') {
            Some((a, b)) => (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?),
            None => (s.trim().parse().map_err(|_| bad())?, 1),
        };
        Multiplier::new(num, den)
    }
}

impl Serialize for Multiplier {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Multiplier {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Encoder {
    pub axis: Axis,
    pub qubit: usize,
}

impl Encoder {
    pub fn generator(&self, n: usize) -> PauliString {
        PauliString::single(n, self.qubit, self.axis.letter())
    }
}

/// `exp(-i · mult · θ[param] · axis / 2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rotation {
    pub axis: PauliString,
    pub param: usize,
    pub mult: Multiplier,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Clifford {
    Cnot { control: usize, target: usize },
    Cz { a: usize, b: usize },
    H(usize),
    S(usize),
}

impl Clifford {
    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            Clifford::Cnot { control, target } => vec![control, target],
            Clifford::Cz { a, b } => vec![a, b],
            Clifford::H(q) | Clifford::S(q) => vec![q],
        }
    }

    /// Heisenberg image `U† P U` of a Pauli string.
    pub fn conjugate(&self, p: &PauliString) -> PauliString {
        let n = p.num_qubits();
        let mut out = PauliString::identity(n).with_phase(p.phase());
        for q in 0..n {
            let img = match p.letter(q) {
                Letter::I => continue,
                Letter::X => self.image(n, q, Letter::X),
                Letter::Z => self.image(n, q, Letter::Z),
                // Y = i X Z
                Letter::Y => self
                    .image(n, q, Letter::X)
                    .mul(&self.image(n, q, Letter::Z))
                    .scale(crate::pauli::Phase::I),
            };
            out = out.mul(&img);
        }
        out
    }

    fn image(&self, n: usize, q: usize, l: Letter) -> PauliString {
        use Letter::*;
        let single = |qq: usize, ll: Letter| PauliString::single(n, qq, ll);
        match *self {
            Clifford::Cnot { control, target } => match (q, l) {
                (q, X) if q == control => single(control, X).mul(&single(target, X)),
                (q, Z) if q == target => single(control, Z).mul(&single(target, Z)),
                _ => single(q, l),
            },
            Clifford::Cz { a, b } => match (q, l) {
                (q, X) if q == a => single(a, X).mul(&single(b, Z)),
                (q, X) if q == b => single(a, Z).mul(&single(b, X)),
                _ => single(q, l),
            },
            Clifford::H(h) if h == q => single(q, if l == X { Z } else { X }),
            // S† X S = -Y
            Clifford::S(s) if s == q && l == X => single(q, Y).scale(crate::pauli::Phase::MINUS_ONE),
            _ => single(q, l),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Rotation(Rotation),
    Clifford(Clifford),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Layer {
    pub encoder: Vec<Encoder>,
    pub trainable: Vec<Gate>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservableTerm {
    pub weight: f64,
    pub pauli: PauliString,
}

/// A re-uploading circuit `U(θ,x) = Π_ℓ W_ℓ(θ) S_ℓ(x)` acting on `|0…0⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    n: usize,
    m: usize,
    layers: Vec<Layer>,
    observable: Vec<ObservableTerm>,
}

/// One finding of [`Circuit::validate`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// Parameter index carried by more than one rotation.
    SharedParameter { param: usize, uses: usize },
    /// Parameter index in `[0, m)` carried by no rotation.
    UnusedParameter { param: usize },
    /// Encoder block mixing axes.
    MixedEncoderAxes { layer: usize },
    /// Encoder block that does not cover each qubit exactly once.
    EncoderCoverage { layer: usize },
    /// Observable term whose Pauli carries an imaginary phase.
    NonRealObservable { term: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::SharedParameter { param, uses } => write!(f, "parameter {param} used by {uses} rotations"),
            Violation::UnusedParameter { param } => write!(f, "parameter {param} unused"),
            Violation::MixedEncoderAxes { layer } => write!(f, "encoder block {layer} mixes axes"),
            Violation::EncoderCoverage { layer } => {
                write!(f, "encoder block {layer} does not cover every qubit exactly once")
            }
            Violation::NonRealObservable { term } => write!(f, "observable term {term} is not Hermitian"),
        }
    }
}

impl Circuit {
    /// Builds a circuit and checks structural well-formedness (qubit ranges,
    /// parameter ranges, rotation axes). Modelling assumptions such as
    /// single use are reported by [`Circuit::validate`] instead.
    pub fn new(n: usize, m: usize, layers: Vec<Layer>, observable: Vec<ObservableTerm>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidCircuit("circuit needs at least one qubit".into()));
        }
        if n > crate::pauli::MAX_QUBITS {
            return Err(Error::TooManyQubits(n));
        }
        let check_q = |q: usize| if q < n { Ok(()) } else { Err(Error::QubitOutOfRange { qubit: q, n }) };
        for layer in &layers {
            for e in &layer.encoder {
                check_q(e.qubit)?;
            }
            for g in &layer.trainable {
                match g {
                    Gate::Rotation(r) => {
                        if r.axis.num_qubits() != n {
                            return Err(Error::InvalidCircuit("rotation axis has wrong qubit count".into()));
                        }
                        if r.axis.is_identity_letters() {
                            return Err(Error::InvalidCircuit("rotation axis is the identity".into()));
                        }
                        if r.axis.phase() != crate::pauli::Phase::ONE {
                            return Err(Error::InvalidCircuit("rotation axis must have phase +1".into()));
                        }
                        if r.param >= m {
                            return Err(Error::ParamOutOfRange { index: r.param, m });
                        }
                    }
                    Gate::Clifford(c) => {
                        let qs = c.qubits();
                        for &q in &qs {
                            check_q(q)?;
                        }
                        if qs.len() == 2 && qs[0] == qs[1] {
                            return Err(Error::InvalidCircuit(format!("two-qubit gate on a single qubit {}", qs[0])));
                        }
                    }
                }
            }
        }
        for t in &observable {
            if t.pauli.num_qubits() != n {
                return Err(Error::InvalidCircuit("observable term has wrong qubit count".into()));
            }
            if !t.weight.is_finite() {
                return Err(Error::InvalidCircuit("observable weight is not finite".into()));
            }
        }
        Ok(Circuit { n, m, layers, observable })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn num_params(&self) -> usize {
        self.m
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn observable(&self) -> &[ObservableTerm] {
        &self.observable
    }

    pub fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.m {
            return Err(Error::ThetaLength { expected: self.m, got: theta.len() });
        }
        Ok(())
    }

    pub fn rotations(&self) -> impl Iterator<Item = &Rotation> {
        self.layers.iter().flat_map(|l| l.trainable.iter()).filter_map(|g| match g {
            Gate::Rotation(r) => Some(r),
            Gate::Clifford(_) => None,
        })
    }

    pub fn two_qubit_gate_count(&self) -> usize {
        self.layers
            .iter()
            .flat_map(|l| l.trainable.iter())
            .filter(|g| match g {
                Gate::Clifford(c) => c.qubits().len() == 2,
                Gate::Rotation(r) => r.axis.weight() >= 2,
            })
            .count()
    }

    /// Number of rotations carrying each parameter index.
    pub fn parameter_uses(&self) -> Vec<usize> {
        let mut uses = vec![0; self.m];
        for r in self.rotations() {
            uses[r.param] += 1;
        }
        uses
    }

    /// Parameter indices carried by more than one rotation.
    pub fn shared_parameters(&self) -> Vec<usize> {
        self.parameter_uses().iter().enumerate().filter(|(_, &u)| u > 1).map(|(a, _)| a).collect()
    }

    /// Common encoder axis of a layer, or an error for mixed axes.
    pub fn encoder_axis(&self, layer: usize) -> Result<Option<Axis>> {
        let enc = &self.layers[layer].encoder;
        match enc.first() {
            None => Ok(None),
            Some(first) if enc.iter().all(|e| e.axis == first.axis) => Ok(Some(first.axis)),
            Some(_) => Err(Error::MixedEncoderAxes { layer }),
        }
    }

    /// Report-only check of the modelling assumptions: single use of every
    /// parameter, one common-axis encoder per qubit per block, Hermitian
    /// observable terms. An empty report means all assumptions hold.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for (param, &uses) in self.parameter_uses().iter().enumerate() {
            match uses {
                0 => out.push(Violation::UnusedParameter { param }),
                1 => {}
                uses => out.push(Violation::SharedParameter { param, uses }),
            }
        }
        for (layer, l) in self.layers.iter().enumerate() {
            if self.encoder_axis(layer).is_err() {
                out.push(Violation::MixedEncoderAxes { layer });
            }
            let mut seen = vec![0usize; self.n];
            for e in &l.encoder {
                seen[e.qubit] += 1;
            }
            if seen.iter().any(|&c| c != 1) {
                out.push(Violation::EncoderCoverage { layer });
            }
        }
        for (term, t) in self.observable.iter().enumerate() {
            if !t.pauli.phase().is_real() {
                out.push(Violation::NonRealObservable { term });
            }
        }
        out
    }

    /// The mean magnetisation `(1/n) Σ_q Z_q`.
    pub fn mean_magnetisation(n: usize) -> Vec<ObservableTerm> {
        (0..n)
            .map(|q| ObservableTerm { weight: 1.0 / n as f64, pauli: PauliString::single(n, q, Letter::Z) })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&CircuitFile::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: CircuitFile = serde_json::from_str(s)?;
        file.try_into()
    }
}

// ---- on-disk format -------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct CircuitFile {
    version: u32,
    n: usize,
    #[serde(rename = "L")]
    num_layers: usize,
    m: usize,
    layers: Vec<LayerFile>,
    observable: Vec<TermFile>,
}

#[derive(Debug, Serialize, Deserialize)]
struct LayerFile {
    encoder: Vec<EncoderFile>,
    trainable: Vec<GateFile>,
}

#[derive(Debug, Serialize, Deserialize)]
struct EncoderFile {
    axis: Axis,
    qubit: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum GateFile {
    Rot { axis: String, qubits: Vec<usize>, param: usize, mult: Multiplier },
    Cnot { control: usize, target: usize },
    Cz { a: usize, b: usize },
    H { qubit: usize },
    S { qubit: usize },
}

#[derive(Debug, Serialize, Deserialize)]
struct TermFile {
    weight: f64,
    pauli: String,
}

impl From<&Circuit> for CircuitFile {
    fn from(c: &Circuit) -> Self {
        let layers = c
            .layers
            .iter()
            .map(|l| LayerFile {
                encoder: l.encoder.iter().map(|e| EncoderFile { axis: e.axis, qubit: e.qubit }).collect(),
                trainable: l
                    .trainable
                    .iter()
                    .map(|g| match *g {
                        Gate::Rotation(r) => {
                            let qubits: Vec<usize> = (0..c.n).filter(|&q| r.axis.letter(q) != Letter::I).collect();
                            let axis = qubits.iter().map(|&q| r.axis.letter(q).as_char()).collect();
                            GateFile::Rot { axis, qubits, param: r.param, mult: r.mult }
                        }
                        Gate::Clifford(Clifford::Cnot { control, target }) => GateFile::Cnot { control, target },
                        Gate::Clifford(Clifford::Cz { a, b }) => GateFile::Cz { a, b },
                        Gate::Clifford(Clifford::H(qubit)) => GateFile::H { qubit },
                        Gate::Clifford(Clifford::S(qubit)) => GateFile::S { qubit },
                    })
                    .collect(),
            })
            .collect();
        CircuitFile {
            version: FORMAT_VERSION,
            n: c.n,
            num_layers: c.layers.len(),
            m: c.m,
            layers,
            observable: c
                .observable
                .iter()
                .map(|t| TermFile { weight: t.weight, pauli: t.pauli.to_string() })
                .collect(),
        }
    }
}

impl TryFrom<CircuitFile> for Circuit {
    type Error = Error;

    fn try_from(f: CircuitFile) -> Result<Self> {
        if f.version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported circuit format version {}", f.version)));
        }
        if f.num_layers != f.layers.len() {
            return Err(Error::Format(format!("L = {} but {} layers listed", f.num_layers, f.layers.len())));
        }
        let n = f.n;
        let layers = f
            .layers
            .into_iter()
            .map(|l| {
                let trainable = l
                    .trainable
                    .into_iter()
                    .map(|g| {
                        Ok(match g {
                            GateFile::Rot { axis, qubits, param, mult } => {
                                let letters = axis
                                    .chars()
                                    .map(|ch| {
                                        Letter::from_char(ch)
                                            .ok_or_else(|| Error::InvalidPauli(format!("bad letter {ch:?}")))
                                    })
                                    .collect::<Result<Vec<_>>>()?;
                                let axis = PauliString::embed(n, &qubits, &letters)?;
                                Gate::Rotation(Rotation { axis, param, mult })
                            }
                            GateFile::Cnot { control, target } => Gate::Clifford(Clifford::Cnot { control, target }),
                            GateFile::Cz { a, b } => Gate::Clifford(Clifford::Cz { a, b }),
                            GateFile::H { qubit } => Gate::Clifford(Clifford::H(qubit)),
                            GateFile::S { qubit } => Gate::Clifford(Clifford::S(qubit)),
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Layer {
                    encoder: l.encoder.into_iter().map(|e| Encoder { axis: e.axis, qubit: e.qubit }).collect(),
                    trainable,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let observable = f
            .observable
            .into_iter()
            .map(|t| {
                let pauli: PauliString = t.pauli.parse()?;
                if pauli.num_qubits() != n {
                    return Err(Error::InvalidCircuit(format!("observable {:?} is not on {n} qubits", t.pauli)));
                }
                // Fold a sign into the weight; an imaginary phase is kept and reported by validate().
                let (weight, pauli) = match pauli.phase().power() {
                    2 => (-t.weight, pauli.unsigned()),
                    _ if pauli.phase().is_real() => (t.weight, pauli.unsigned()),
                    _ => (t.weight, pauli),
                };
                Ok(ObservableTerm { weight, pauli })
            })
            .collect::<Result<Vec<_>>>()?;
        Circuit::new(n, f.m, layers, observable)
    }
}
