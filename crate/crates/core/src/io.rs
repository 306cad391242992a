//! Shared on-disk matrix format and provenance records.
//!
//! A matrix file is a JSON document: a header with labels, shape and
//! provenance, plus `payload`, the base64 encoding of interleaved
//! little-endian `(re, im)` f64 pairs in row-major order. Harmonic matrices
//! carry `k_labels`; `|Ω| × |Ω|` matrices carry `col_omega_labels`.

use std::fmt::Write as _;
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harmonic::HarmonicIndex;

pub const MATRIX_FORMAT_VERSION: u32 = 1;
pub const PAYLOAD_ENCODING: &str = "base64-f64le-interleaved-row-major";

/// Where a matrix came from, with enough detail to recompute it.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Provenance {
    /// `"exact"`, `"mc"`, or a derived object name such as `"corr_mc"`.
    pub method: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub circuit: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    /// Total ensemble size `S`.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub samples: Option<usize>,
    /// Half-open sample index range consumed, `[start, end)`.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sample_range: Option<[usize; 2]>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub hamming: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub k_cap: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub n_x: Option<usize>,
}

impl Provenance {
    pub fn exact(circuit: impl Into<String>) -> Self {
        Provenance { method: "exact".into(), circuit: Some(circuit.into()), ..Default::default() }
    }

    pub fn derived(&self, method: &str) -> Self {
        Provenance { method: method.into(), ..self.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixFile {
    pub version: u32,
    pub kind: String,
    pub shape: [usize; 2],
    pub omega_labels: Vec<i64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub k_labels: Option<Vec<HarmonicIndex>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub col_omega_labels: Option<Vec<i64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mask: Option<Vec<bool>>,
    pub provenance: Provenance,
    pub encoding: String,
    pub payload: String,
}

impl MatrixFile {
    pub fn new(kind: &str, omega_labels: Vec<i64>, data: &DMatrix<Complex64>, provenance: Provenance) -> Self {
        MatrixFile {
            version: MATRIX_FORMAT_VERSION,
            kind: kind.into(),
            shape: [data.nrows(), data.ncols()],
            omega_labels,
            k_labels: None,
            col_omega_labels: None,
            mask: None,
            provenance,
            encoding: PAYLOAD_ENCODING.into(),
            payload: encode_payload(data),
        }
    }

    pub fn data(&self) -> Result<DMatrix<Complex64>> {
        if self.version != MATRIX_FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported matrix format version {}", self.version)));
        }
        if self.encoding != PAYLOAD_ENCODING {
            return Err(Error::Format(format!("unknown payload encoding {:?}", self.encoding)));
        }
        if self.omega_labels.len() != self.shape[0] {
            return Err(Error::Format("row labels do not match shape".into()));
        }
        let cols = self.k_labels.as_ref().map(Vec::len).or(self.col_omega_labels.as_ref().map(Vec::len));
        if cols.is_some_and(|c| c != self.shape[1]) {
            return Err(Error::Format("column labels do not match shape".into()));
        }
        decode_payload(&self.payload, self.shape[0], self.shape[1])
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

pub fn encode_payload(data: &DMatrix<Complex64>) -> String {
    let mut bytes = Vec::with_capacity(data.len() * 16);
    for r in 0..data.nrows() {
        for c in 0..data.ncols() {
            let v = data[(r, c)];
            bytes.extend_from_slice(&v.re.to_le_bytes());
            bytes.extend_from_slice(&v.im.to_le_bytes());
        }
    }
    STANDARD.encode(bytes)
}

pub fn decode_payload(payload: &str, rows: usize, cols: usize) -> Result<DMatrix<Complex64>> {
    let bytes = STANDARD.decode(payload).map_err(|e| Error::Format(format!("payload: {e}")))?;
    if bytes.len() != rows * cols * 16 {
        return Err(Error::Format(format!("payload holds {} bytes, shape needs {}", bytes.len(), rows * cols * 16)));
    }
    let f = |i: usize| f64::from_le_bytes(bytes[i..i + 8].try_into().expect("8 bytes"));
    Ok(DMatrix::from_row_iterator(rows, cols, (0..rows * cols).map(|i| Complex64::new(f(16 * i), f(16 * i + 8)))))
}

/// Heatmap-ready CSV: `row,col,re,im,abs`, one line per entry.
pub fn heatmap_csv(row_labels: &[String], col_labels: &[String], data: &DMatrix<Complex64>) -> String {
    let mut out = String::from("row,col,re,im,abs\n");
    for (r, rl) in row_labels.iter().enumerate() {
        for (c, cl) in col_labels.iter().enumerate() {
            let v = data[(r, c)];
            let _ = writeln!(out, "{rl},{cl},{:e},{:e},{:e}", v.re, v.im, v.norm());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn payload_round_trips_bit_exactly(rows in 1usize..6, cols in 1usize..6, seed in any::<u64>()) {
            let mut s = seed;
            let mut next = || {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                f64::from_bits(s >> 2 | 0x3000_0000_0000_0000)
            };
            let m = DMatrix::from_fn(rows, cols, |_, _| Complex64::new(next(), -next()));
            let back = decode_payload(&encode_payload(&m), rows, cols).unwrap();
            for (a, b) in m.iter().zip(back.iter()) {
                prop_assert_eq!(a.re.to_bits(), b.re.to_bits());
                prop_assert_eq!(a.im.to_bits(), b.im.to_bits());
            }
        }
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let m = DMatrix::from_element(2, 2, Complex64::new(1.0, 0.0));
        let mut f = MatrixFile::new("cov", vec![-1, 1], &m, Provenance::default());
        f.shape = [2, 3];
        assert!(f.data().is_err());
        assert!(decode_payload("AAAA", 1, 1).is_err());
    }

    #[test]
    fn csv_layout() {
        let m = DMatrix::from_row_slice(1, 2, &[Complex64::new(3.0, 4.0), Complex64::new(0.0, 0.0)]);
        let csv = heatmap_csv(&["1".into()], &["-1".into(), "1".into()], &m);
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "row,col,re,im,abs");
        assert_eq!(lines[1], "1,-1,3e0,4e0,5e0");
        assert_eq!(lines.len(), 3);
    }
}
