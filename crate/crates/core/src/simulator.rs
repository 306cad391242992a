//! Dense statevector evaluation of `f(x;θ) = ⟨0|U† O U|0⟩` and its
//! parameter gradients.
//!
//! Basis index bit `q` is qubit `q`. Gates are applied in place: Pauli
//! rotations as paired-amplitude updates, Cliffords as permutations and
//! phases. The observable is never materialised; each Pauli term is
//! evaluated directly on the state.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;

use crate::circuit::{Circuit, Clifford, Gate};
use crate::error::{Error, Result};
use crate::pauli::PauliString;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Imaginary residue tolerated in `⟨ψ|O|ψ⟩` before it is reported.
pub const IMAG_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amps: Vec<Complex64>,
}

impl StateVector {
    pub fn zero_state(n: usize) -> Self {
        let mut amps = vec![ZERO; 1 << n];
        amps[0] = ONE;
        StateVector { amps }
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn apply_rotation(&mut self, axis: &PauliString, angle: f64) {
        apply_pauli_rotation(&mut self.amps, axis, angle);
    }

    pub fn apply_clifford(&mut self, c: &Clifford) {
        apply_clifford(&mut self.amps, c);
    }

    /// `⟨ψ|P|ψ⟩` (complex in general).
    pub fn pauli_expectation(&self, p: &PauliString) -> Complex64 {
        pauli_inner(&self.amps, p, &self.amps)
    }
}

/// Applies `exp(-i angle P / 2)`; `P` must have phase `+1`.
pub fn apply_pauli_rotation(psi: &mut [Complex64], axis: &PauliString, angle: f64) {
    let (s, c) = (angle / 2.0).sin_cos();
    let x = axis.x_mask();
    if x == 0 {
        // Diagonal generator: P|b⟩ = ±|b⟩.
        let plus = Complex64::new(c, -s);
        let minus = Complex64::new(c, s);
        let z = axis.z_mask();
        for (b, amp) in psi.iter_mut().enumerate() {
            *amp *= if (b as u64 & z).count_ones().is_multiple_of(2) { plus } else { minus };
        }
        return;
    }
    let low = x & x.wrapping_neg();
    let mis = Complex64::new(0.0, -s);
    for b in 0..psi.len() as u64 {
        if b & low != 0 {
            continue;
        }
        let b2 = b ^ x;
        let (_, cb) = axis.apply_to_basis(b);
        let (_, cb2) = axis.apply_to_basis(b2);
        let (u, v) = (psi[b as usize], psi[b2 as usize]);
        // (P ψ)[b] = c_{b2} ψ[b2], (P ψ)[b2] = c_b ψ[b]
        psi[b as usize] = u * c + mis * cb2 * v;
        psi[b2 as usize] = v * c + mis * cb * u;
    }
}

pub fn apply_clifford(psi: &mut [Complex64], g: &Clifford) {
    match *g {
        Clifford::Cnot { control, target } => {
            let (cm, tm) = (1usize << control, 1usize << target);
            for b in 0..psi.len() {
                if b & cm != 0 && b & tm == 0 {
                    psi.swap(b, b | tm);
                }
            }
        }
        Clifford::Cz { a, b } => {
            let mask = (1usize << a) | (1usize << b);
            for (i, amp) in psi.iter_mut().enumerate() {
                if i & mask == mask {
                    *amp = -*amp;
                }
            }
        }
        Clifford::H(q) => {
            let m = 1usize << q;
            let r = std::f64::consts::FRAC_1_SQRT_2;
            for b in 0..psi.len() {
                if b & m == 0 {
                    let (u, v) = (psi[b], psi[b | m]);
                    psi[b] = (u + v) * r;
                    psi[b | m] = (u - v) * r;
                }
            }
        }
        Clifford::S(q) => {
            let m = 1usize << q;
            for (b, amp) in psi.iter_mut().enumerate() {
                if b & m != 0 {
                    *amp *= Complex64::new(0.0, 1.0);
                }
            }
        }
    }
}

fn apply_clifford_inverse(psi: &mut [Complex64], g: &Clifford) {
    match *g {
        Clifford::S(q) => {
            let m = 1usize << q;
            for (b, amp) in psi.iter_mut().enumerate() {
                if b & m != 0 {
                    *amp *= Complex64::new(0.0, -1.0);
                }
            }
        }
        _ => apply_clifford(psi, g),
    }
}

/// `⟨bra|P|ket⟩`.
pub fn pauli_inner(bra: &[Complex64], p: &PauliString, ket: &[Complex64]) -> Complex64 {
    let mut acc = ZERO;
    for (b, k) in ket.iter().enumerate() {
        let (row, coeff) = p.apply_to_basis(b as u64);
        acc += bra[row as usize].conj() * coeff * k;
    }
    acc
}

fn add_pauli_applied(out: &mut [Complex64], weight: f64, p: &PauliString, ket: &[Complex64]) {
    for (b, k) in ket.iter().enumerate() {
        let (row, coeff) = p.apply_to_basis(b as u64);
        out[row as usize] += coeff * k * weight;
    }
}

#[derive(Debug, Clone)]
enum Op {
    Encoder(PauliString),
    Rotation { axis: PauliString, param: usize, mult: f64 },
    Clifford(Clifford),
}

/// A circuit compiled into a flat gate list, with reusable scratch space.
/// One evaluator per thread; evaluations never share mutable state.
#[derive(Debug, Clone)]
pub struct Evaluator<'c> {
    circuit: &'c Circuit,
    ops: Vec<Op>,
    psi: Vec<Complex64>,
    lambda: Vec<Complex64>,
}

impl<'c> Evaluator<'c> {
    pub fn new(circuit: &'c Circuit) -> Self {
        let n = circuit.num_qubits();
        let mut ops = Vec::new();
        for layer in circuit.layers() {
            ops.extend(layer.encoder.iter().map(|e| Op::Encoder(e.generator(n))));
            for g in &layer.trainable {
                ops.push(match g {
                    Gate::Rotation(r) => Op::Rotation { axis: r.axis, param: r.param, mult: r.mult.value() },
                    Gate::Clifford(c) => Op::Clifford(*c),
                });
            }
        }
        Evaluator { circuit, ops, psi: vec![ZERO; 1 << n], lambda: vec![ZERO; 1 << n] }
    }

    pub fn circuit(&self) -> &Circuit {
        self.circuit
    }

    fn prepare(&mut self, x: f64, theta: &[f64], shift: Option<(usize, f64)>) {
        self.psi.fill(ZERO);
        self.psi[0] = ONE;
        for (i, op) in self.ops.iter().enumerate() {
            match op {
                Op::Encoder(p) => apply_pauli_rotation(&mut self.psi, p, x),
                Op::Rotation { axis, param, mult } => {
                    let mut angle = mult * theta[*param];
                    if let Some((gate, s)) = shift {
                        if gate == i {
                            angle += s;
                        }
                    }
                    apply_pauli_rotation(&mut self.psi, axis, angle);
                }
                Op::Clifford(c) => apply_clifford(&mut self.psi, c),
            }
        }
    }

    fn observe(&self) -> Result<f64> {
        let mut acc = ZERO;
        for t in self.circuit.observable() {
            acc += pauli_inner(&self.psi, &t.pauli, &self.psi) * t.weight;
        }
        if acc.im.abs() > IMAG_TOLERANCE {
            return Err(Error::Invariant(format!("expectation has imaginary part {:e}", acc.im)));
        }
        Ok(acc.re)
    }

    /// `f(x;θ)`. `theta` length is checked by the free functions; here it is
    /// the caller's responsibility.
    pub fn expectation(&mut self, x: f64, theta: &[f64]) -> Result<f64> {
        self.prepare(x, theta, None);
        self.observe()
    }

    fn expectation_shifted(&mut self, x: f64, theta: &[f64], gate: usize, shift: f64) -> Result<f64> {
        self.prepare(x, theta, Some((gate, shift)));
        self.observe()
    }

    /// `∂f/∂θ_a` by the two-term shift rule applied to every rotation that
    /// carries index `a`, weighted by the rotation's multiplier.
    pub fn gradient_shift(&mut self, x: f64, theta: &[f64], a: usize) -> Result<f64> {
        let gates: Vec<(usize, f64)> = self
            .ops
            .iter()
            .enumerate()
            .filter_map(|(i, op)| match op {
                Op::Rotation { param, mult, .. } if *param == a => Some((i, *mult)),
                _ => None,
            })
            .collect();
        let mut grad = 0.0;
        for (gate, mult) in gates {
            let plus = self.expectation_shifted(x, theta, gate, FRAC_PI_2)?;
            let minus = self.expectation_shifted(x, theta, gate, -FRAC_PI_2)?;
            grad += mult * (plus - minus) / 2.0;
        }
        Ok(grad)
    }

    /// All `∂f/∂θ_a` at once by reverse-mode (adjoint) differentiation.
    /// Writes into `out`, which must have length `m`.
    pub fn gradient_all(&mut self, x: f64, theta: &[f64], out: &mut [f64]) {
        self.prepare(x, theta, None);
        self.lambda.fill(ZERO);
        for t in self.circuit.observable() {
            add_pauli_applied(&mut self.lambda, t.weight, &t.pauli, &self.psi);
        }
        out.fill(0.0);
        for op in self.ops.iter().rev() {
            match op {
                Op::Encoder(p) => {
                    apply_pauli_rotation(&mut self.psi, p, -x);
                    apply_pauli_rotation(&mut self.lambda, p, -x);
                }
                Op::Rotation { axis, param, mult } => {
                    out[*param] += mult * pauli_inner(&self.lambda, axis, &self.psi).im;
                    let angle = mult * theta[*param];
                    apply_pauli_rotation(&mut self.psi, axis, -angle);
                    apply_pauli_rotation(&mut self.lambda, axis, -angle);
                }
                Op::Clifford(c) => {
                    apply_clifford_inverse(&mut self.psi, c);
                    apply_clifford_inverse(&mut self.lambda, c);
                }
            }
        }
    }
}

/// `f(x;θ)` for a single point.
pub fn expectation(circuit: &Circuit, x: f64, theta: &[f64]) -> Result<f64> {
    circuit.check_theta(theta)?;
    Evaluator::new(circuit).expectation(x, theta)
}

/// Exact `∂f/∂θ_a` by the parameter-shift rule.
pub fn gradient(circuit: &Circuit, x: f64, theta: &[f64], a: usize) -> Result<f64> {
    circuit.check_theta(theta)?;
    if a >= circuit.num_params() {
        return Err(Error::ParamOutOfRange { index: a, m: circuit.num_params() });
    }
    Evaluator::new(circuit).gradient_shift(x, theta, a)
}

/// Full gradient `∇_θ f` by adjoint differentiation.
pub fn gradient_all(circuit: &Circuit, x: f64, theta: &[f64]) -> Result<Vec<f64>> {
    circuit.check_theta(theta)?;
    let mut out = vec![0.0; circuit.num_params()];
    Evaluator::new(circuit).gradient_all(x, theta, &mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{Axis, Encoder, Layer, Multiplier, ObservableTerm, Rotation};
    use crate::pauli::Letter;
    use std::f64::consts::PI;

    pub(crate) fn rx_ry_circuit() -> Circuit {
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
    fn empty_circuit_measures_z() {
        let c = Circuit::new(1, 0, vec![Layer::default()], Circuit::mean_magnetisation(1)).unwrap();
        assert_eq!(expectation(&c, 0.3, &[]).unwrap(), 1.0);
    }

    #[test]
    fn analytic_single_qubit_values() {
        let c = rx_ry_circuit();
        assert!((expectation(&c, 0.0, &[0.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!(expectation(&c, 0.0, &[PI / 2.0]).unwrap().abs() < 1e-15);
        let v = expectation(&c, PI / 3.0, &[PI / 4.0]).unwrap();
        assert!((v - (PI / 4.0).cos() * (PI / 3.0).cos()).abs() < 1e-15);
        assert!((v - 0.353_553_390_593_273_7).abs() < 1e-12);
    }

    #[test]
    fn analytic_single_qubit_gradients() {
        let c = rx_ry_circuit();
        assert!(gradient(&c, 0.0, &[0.0], 0).unwrap().abs() < 1e-15);
        assert!((gradient(&c, 0.0, &[PI / 2.0], 0).unwrap() + 1.0).abs() < 1e-15);
        assert!(matches!(gradient(&c, 0.0, &[0.0], 1), Err(Error::ParamOutOfRange { .. })));
    }

    #[test]
    fn theta_length_mismatch() {
        let c = rx_ry_circuit();
        assert!(matches!(expectation(&c, 0.0, &[0.0, 1.0]), Err(Error::ThetaLength { expected: 1, got: 2 })));
    }

    #[test]
    fn rotation_matches_dense_exponential() {
        // exp(-iφP/2) = cos(φ/2) I - i sin(φ/2) P, applied column by column.
        let p: PauliString = "YX".parse().unwrap();
        let phi = 0.731;
        let dense = p.to_dense();
        for b in 0..4 {
            let mut psi = vec![ZERO; 4];
            psi[b] = ONE;
            apply_pauli_rotation(&mut psi, &p, phi);
            for r in 0..4 {
                let want = if r == b { Complex64::new((phi / 2.0).cos(), 0.0) } else { ZERO }
                    - Complex64::new(0.0, (phi / 2.0).sin()) * dense[r * 4 + b];
                assert!((psi[r] - want).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn weighted_observable_terms() {
        let c = Circuit::new(
            2,
            0,
            vec![Layer { encoder: vec![], trainable: vec![Gate::Clifford(Clifford::H(0))] }],
            vec![
                ObservableTerm { weight: 0.5, pauli: "XI".parse().unwrap() },
                ObservableTerm { weight: -2.0, pauli: "IZ".parse().unwrap() },
            ],
        )
        .unwrap();
        assert!((expectation(&c, 0.0, &[]).unwrap() - (0.5 - 2.0)).abs() < 1e-14);
    }

    #[test]
    fn adjoint_matches_shift_rule_on_shared_parameters() {
        let c = crate::families::build_family(crate::families::Family::Circuit17, Axis::Y, 3, 1, 2).unwrap();
        let theta: Vec<f64> = (0..c.num_params()).map(|a| 0.37 * a as f64 + 0.1).collect();
        let adj = gradient_all(&c, 0.9, &theta).unwrap();
        for (a, g) in adj.iter().enumerate() {
            let shift = gradient(&c, 0.9, &theta, a).unwrap();
            assert!((g - shift).abs() < 1e-12, "param {a}: {g} vs {shift}");
        }
    }
}
