//! Pauli strings in symplectic form.
//!
//! A string on `n <= 64` qubits is stored as two bit masks plus a phase
//! `i^phase`. Qubit `q` corresponds to bit `q` of both masks, and to the
//! `q`-th character of the text form (`"XIZ"` is `X` on qubit 0).
//! Letters are encoded as `(x, z)`: `I = (0,0)`, `X = (1,0)`, `Y = (1,1)`,
//! `Z = (0,1)`; note `Y` is stored as itself, not as `XZ`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_QUBITS: usize = 64;

/// Single-qubit Pauli letter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Letter {
    I,
    X,
    Y,
    Z,
}

impl Letter {
    pub const ALL: [Letter; 4] = [Letter::I, Letter::X, Letter::Y, Letter::Z];

    fn bits(self) -> (bool, bool) {
        match self {
            Letter::I => (false, false),
            Letter::X => (true, false),
            Letter::Y => (true, true),
            Letter::Z => (false, true),
        }
    }

    fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Letter::I,
            (true, false) => Letter::X,
            (true, true) => Letter::Y,
            (false, true) => Letter::Z,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Letter::I => 'I',
            Letter::X => 'X',
            Letter::Y => 'Y',
            Letter::Z => 'Z',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c.to_ascii_uppercase() {
            'I' => Some(Letter::I),
            'X' => Some(Letter::X),
            'Y' => Some(Letter::Y),
            'Z' => Some(Letter::Z),
            _ => None,
        }
    }
}

/// Element of the phase group `{1, i, -1, -i}`, stored as the power of `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Phase(u8);

impl Phase {
    pub const ONE: Phase = Phase(0);
    pub const I: Phase = Phase(1);
    pub const MINUS_ONE: Phase = Phase(2);
    pub const MINUS_I: Phase = Phase(3);

    pub fn from_power(power: i64) -> Self {
        Phase(power.rem_euclid(4) as u8)
    }

    pub fn power(self) -> u8 {
        self.0
    }

    pub fn is_real(self) -> bool {
        self.0.is_multiple_of(2)
    }

    pub fn to_complex(self) -> Complex64 {
        match self.0 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        }
    }

    pub fn mul(self, other: Phase) -> Phase {
        Phase((self.0 + other.0) % 4)
    }
}

/// An `n`-qubit Pauli word with a phase in `{±1, ±i}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliString {
    n: u8,
    x: u64,
    z: u64,
    phase: Phase,
}

fn mask_for(n: usize) -> u64 {
    if n == 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

impl PauliString {
    pub fn identity(n: usize) -> Self {
        assert!(n <= MAX_QUBITS, "at most {MAX_QUBITS} qubits supported");
        PauliString { n: n as u8, x: 0, z: 0, phase: Phase::ONE }
    }

    /// Builds a string from raw masks. Bits above `n` are rejected.
    pub fn from_masks(n: usize, x: u64, z: u64, phase: Phase) -> Result<Self> {
        if n > MAX_QUBITS {
            return Err(Error::TooManyQubits(n));
        }
        let mask = mask_for(n);
        if (x | z) & !mask != 0 {
            return Err(Error::InvalidPauli(format!("mask bits set beyond qubit count {n}")));
        }
        Ok(PauliString { n: n as u8, x, z, phase })
    }

    /// A single non-trivial letter on qubit `q`.
    pub fn single(n: usize, q: usize, letter: Letter) -> Self {
        let mut p = Self::identity(n);
        p.set(q, letter);
        p
    }

    pub fn from_letters(letters: &[Letter]) -> Self {
        let mut p = Self::identity(letters.len());
        for (q, &l) in letters.iter().enumerate() {
            p.set(q, l);
        }
        p
    }

    /// Letters on `qubits` embedded into an `n`-qubit identity.
    pub fn embed(n: usize, qubits: &[usize], letters: &[Letter]) -> Result<Self> {
        if qubits.len() != letters.len() {
            return Err(Error::InvalidPauli(format!(
                "{} qubits given for {} letters",
                qubits.len(),
                letters.len()
            )));
        }
        let mut p = Self::identity(n);
        for (&q, &l) in qubits.iter().zip(letters) {
            if q >= n {
                return Err(Error::QubitOutOfRange { qubit: q, n });
            }
            if p.letter(q) != Letter::I {
                return Err(Error::InvalidPauli(format!("qubit {q} listed twice")));
            }
            p.set(q, l);
        }
        Ok(p)
    }

    pub fn num_qubits(&self) -> usize {
        self.n as usize
    }

    pub fn x_mask(&self) -> u64 {
        self.x
    }

    pub fn z_mask(&self) -> u64 {
        self.z
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn with_phase(mut self, phase: Phase) -> Self {
        self.phase = phase;
        self
    }

    /// Same letters, phase reset to `+1`.
    pub fn unsigned(self) -> Self {
        self.with_phase(Phase::ONE)
    }

    pub fn letter(&self, q: usize) -> Letter {
        Letter::from_bits(self.x >> q & 1 == 1, self.z >> q & 1 == 1)
    }

    pub fn set(&mut self, q: usize, letter: Letter) {
        assert!(q < self.n as usize, "qubit {q} out of range for {} qubits", self.n);
        let (bx, bz) = letter.bits();
        let bit = 1u64 << q;
        self.x = if bx { self.x | bit } else { self.x & !bit };
        self.z = if bz { self.z | bit } else { self.z & !bit };
    }

    pub fn letters(&self) -> Vec<Letter> {
        (0..self.n as usize).map(|q| self.letter(q)).collect()
    }

    pub fn weight(&self) -> u32 {
        (self.x | self.z).count_ones()
    }

    pub fn is_identity_letters(&self) -> bool {
        self.x | self.z == 0
    }

    /// True when every letter is `I` or `Z`, i.e. the string is diagonal in
    /// the computational basis.
    pub fn is_diagonal(&self) -> bool {
        self.x == 0
    }

    pub fn commutes(&self, other: &PauliString) -> bool {
        ((self.x & other.z) ^ (self.z & other.x)).count_ones().is_multiple_of(2)
    }

    pub fn anticommutes(&self, other: &PauliString) -> bool {
        !self.commutes(other)
    }

    /// Operator product `self · other`.
    pub fn mul(&self, other: &PauliString) -> PauliString {
        assert_eq!(self.n, other.n, "qubit count mismatch in Pauli product");
        let (x1, z1, x2, z2) = (self.x, self.z, other.x, other.z);
        let xs1 = x1 & !z1;
        let ys1 = x1 & z1;
        let zs1 = !x1 & z1;
        let xs2 = x2 & !z2;
        let ys2 = x2 & z2;
        let zs2 = !x2 & z2;
        // XY = iZ, YZ = iX, ZX = iY and the reversed orders give -i.
        let plus = (xs1 & ys2).count_ones() + (ys1 & zs2).count_ones() + (zs1 & xs2).count_ones();
        let minus = (ys1 & xs2).count_ones() + (zs1 & ys2).count_ones() + (xs1 & zs2).count_ones();
        let power = self.phase.0 as i64 + other.phase.0 as i64 + plus as i64 - minus as i64;
        PauliString { n: self.n, x: x1 ^ x2, z: z1 ^ z2, phase: Phase::from_power(power) }
    }

    pub fn scale(&self, phase: Phase) -> PauliString {
        self.with_phase(self.phase.mul(phase))
    }

    /// Trace against `|0…0⟩⟨0…0|`: the phase for `{I,Z}` words, zero otherwise.
    pub fn vacuum_expectation(&self) -> Complex64 {
        if self.is_diagonal() {
            self.phase.to_complex()
        } else {
            Complex64::new(0.0, 0.0)
        }
    }

    /// Action on a computational basis state: `P|b⟩ = coeff · |b ⊕ x⟩`.
    #[inline]
    pub fn apply_to_basis(&self, b: u64) -> (u64, Complex64) {
        let power = self.phase.0 as u32 + (self.x & self.z).count_ones() + 2 * (b & self.z).count_ones();
        (b ^ self.x, Phase((power % 4) as u8).to_complex())
    }

    /// Dense `2^n × 2^n` matrix, row-major. Only meant for small test oracles.
    pub fn to_dense(&self) -> Vec<Complex64> {
        let dim = 1usize << self.n;
        let mut out = vec![Complex64::new(0.0, 0.0); dim * dim];
        for b in 0..dim as u64 {
            let (row, c) = self.apply_to_basis(b);
            out[row as usize * dim + b as usize] = c;
        }
        out
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = match self.phase.0 {
            0 => "",
            1 => "i",
            2 => "-",
            _ => "-i",
        };
        f.write_str(prefix)?;
        for l in self.letters() {
            write!(f, "{}", l.as_char())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    /// Parses `[+|-][i]LETTERS`, e.g. `"IZZ"`, `"-iXY"`.
    fn from_str(s: &str) -> Result<Self> {
        let mut rest = s.trim();
        let mut power = 0i64;
        if let Some(r) = rest.strip_prefix('-') {
            power += 2;
            rest = r;
        } else if let Some(r) = rest.strip_prefix('+') {
            rest = r;
        }
        if let Some(r) = rest.strip_prefix('i') {
            power += 1;
            rest = r;
        }
        if rest.is_empty() {
            return Err(Error::InvalidPauli(format!("empty Pauli string {s:?}")));
        }
        let letters = rest
            .chars()
            .map(|c| Letter::from_char(c).ok_or_else(|| Error::InvalidPauli(format!("bad letter {c:?} in {s:?}"))))
            .collect::<Result<Vec<_>>>()?;
        if letters.len() > MAX_QUBITS {
            return Err(Error::TooManyQubits(letters.len()));
        }
        Ok(PauliString::from_letters(&letters).with_phase(Phase::from_power(power)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matmul(a: &[Complex64], b: &[Complex64], dim: usize) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            for k in 0..dim {
                for j in 0..dim {
                    out[i * dim + j] += a[i * dim + k] * b[k * dim + j];
                }
            }
        }
        out
    }

    fn close(a: &[Complex64], b: &[Complex64]) -> bool {
        a.iter().zip(b).all(|(u, v)| (u - v).norm() < 1e-14)
    }

    #[test]
    fn single_qubit_products_match_matrices() {
        for &a in &Letter::ALL {
            for &b in &Letter::ALL {
                for pa in 0..4 {
                    let p = PauliString::from_letters(&[a]).with_phase(Phase::from_power(pa));
                    let q = PauliString::from_letters(&[b]);
                    let prod = p.mul(&q);
                    let dense = matmul(&p.to_dense(), &q.to_dense(), 2);
                    assert!(close(&prod.to_dense(), &dense), "{p} * {q} = {prod}");
                }
            }
        }
    }

    #[test]
    fn two_qubit_products_match_matrices() {
        for &a in &Letter::ALL {
            for &b in &Letter::ALL {
                for &c in &Letter::ALL {
                    for &d in &Letter::ALL {
                        let p = PauliString::from_letters(&[a, b]);
                        let q = PauliString::from_letters(&[c, d]);
                        let dense = matmul(&p.to_dense(), &q.to_dense(), 4);
                        assert!(close(&p.mul(&q).to_dense(), &dense));
                        let pq = matmul(&p.to_dense(), &q.to_dense(), 4);
                        let qp = matmul(&q.to_dense(), &p.to_dense(), 4);
                        assert_eq!(p.commutes(&q), close(&pq, &qp));
                    }
                }
            }
        }
    }

    #[test]
    fn dense_matrices_are_the_standard_paulis() {
        let c = |re: f64, im: f64| Complex64::new(re, im);
        let o = c(0.0, 0.0);
        let expect = [
            (Letter::I, [c(1.0, 0.0), o, o, c(1.0, 0.0)]),
            (Letter::X, [o, c(1.0, 0.0), c(1.0, 0.0), o]),
            (Letter::Y, [o, c(0.0, -1.0), c(0.0, 1.0), o]),
            (Letter::Z, [c(1.0, 0.0), o, o, c(-1.0, 0.0)]),
        ];
        for (l, m) in expect {
            assert!(close(&PauliString::from_letters(&[l]).to_dense(), &m), "{l:?}");
        }
    }

    #[test]
    fn self_product_is_identity() {
        let p: PauliString = "XYZI".parse().unwrap();
        let sq = p.mul(&p);
        assert!(sq.is_identity_letters());
        assert_eq!(sq.phase(), Phase::ONE);
    }

    #[test]
    fn parse_and_display() {
        let p: PauliString = "-iXZ".parse().unwrap();
        assert_eq!(p.phase(), Phase::MINUS_I);
        assert_eq!(p.letter(0), Letter::X);
        assert_eq!(p.letter(1), Letter::Z);
        assert_eq!(p.to_string(), "-iXZ");
        assert!("XQ".parse::<PauliString>().is_err());
        assert!("".parse::<PauliString>().is_err());
    }

    #[test]
    fn vacuum_expectation_only_for_diagonal_words() {
        let zz: PauliString = "-ZZ".parse().unwrap();
        assert_eq!(zz.vacuum_expectation(), Complex64::new(-1.0, 0.0));
        let zx: PauliString = "ZX".parse().unwrap();
        assert_eq!(zx.vacuum_expectation(), Complex64::new(0.0, 0.0));
    }
}
