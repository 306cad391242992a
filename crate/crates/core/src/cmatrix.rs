//! The circuit harmonic matrix `C_{ωk}`: joint Fourier coefficients of
//! `f(x;θ) = Σ_{ω,k} C_{ωk} e^{iωx} e^{ik·θ}`.

use std::collections::HashMap;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::harmonic::HarmonicIndex;
use crate::io::{MatrixFile, Provenance};

pub const C_MATRIX_KIND: &str = "c_matrix";

#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    omegas: Vec<i64>,
    ks: Vec<HarmonicIndex>,
    data: DMatrix<Complex64>,
    provenance: Provenance,
}

impl CMatrix {
    pub fn new(
        omegas: Vec<i64>,
        ks: Vec<HarmonicIndex>,
        data: DMatrix<Complex64>,
        provenance: Provenance,
    ) -> Result<Self> {
        if data.nrows() != omegas.len() || data.ncols() != ks.len() {
            return Err(Error::Shape(format!(
                "C data is {}x{} but labels are {}x{}",
                data.nrows(),
                data.ncols(),
                omegas.len(),
                ks.len()
            )));
        }
        Ok(CMatrix { omegas, ks, data, provenance })
    }

    pub fn omegas(&self) -> &[i64] {
        &self.omegas
    }

    pub fn ks(&self) -> &[HarmonicIndex] {
        &self.ks
    }

    pub fn data(&self) -> &DMatrix<Complex64> {
        &self.data
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn row_of(&self, omega: i64) -> Option<usize> {
        self.omegas.iter().position(|&w| w == omega)
    }

    pub fn col_of(&self, k: &HarmonicIndex) -> Option<usize> {
        self.ks.iter().position(|c| c == k)
    }

    pub fn zero_column(&self) -> Option<usize> {
        self.ks.iter().position(HarmonicIndex::is_zero)
    }

    /// `C_{ωk}`, zero for labels outside the stored support.
    pub fn entry(&self, omega: i64, k: &HarmonicIndex) -> Complex64 {
        match (self.row_of(omega), self.col_of(k)) {
            (Some(r), Some(c)) => self.data[(r, c)],
            _ => Complex64::new(0.0, 0.0),
        }
    }

    /// Evaluates `Σ C_{ωk} e^{iωx} e^{ik·θ}`; real for an exact `C`.
    pub fn reconstruct(&self, x: f64, theta: &[f64]) -> Complex64 {
        let col_phase: Vec<Complex64> =
            self.ks.iter().map(|k| Complex64::from_polar(1.0, k.dot_theta(theta))).collect();
        let mut acc = Complex64::new(0.0, 0.0);
        for (r, &w) in self.omegas.iter().enumerate() {
            let row_phase = Complex64::from_polar(1.0, w as f64 * x);
            let mut row = Complex64::new(0.0, 0.0);
            for (c, p) in col_phase.iter().enumerate() {
                row += self.data[(r, c)] * p;
            }
            acc += row * row_phase;
        }
        acc
    }

    /// `max |C_{-ω,-k} - conj(C_{ωk})|` over stored entries whose mirror is stored.
    pub fn conjugate_symmetry_defect(&self) -> f64 {
        let rows: HashMap<i64, usize> = self.omegas.iter().enumerate().map(|(i, &w)| (w, i)).collect();
        let cols: HashMap<&HarmonicIndex, usize> = self.ks.iter().enumerate().map(|(i, k)| (k, i)).collect();
        let negs: Vec<Option<usize>> = self.ks.iter().map(|k| cols.get(&k.neg()).copied()).collect();
        let mut worst = 0.0f64;
        for (r, w) in self.omegas.iter().enumerate() {
            let Some(&nr) = rows.get(&-w) else { continue };
            for (c, nc) in negs.iter().enumerate() {
                if let Some(nc) = nc {
                    worst = worst.max((self.data[(nr, *nc)] - self.data[(r, c)].conj()).norm());
                }
            }
        }
        worst
    }

    /// Columns re-indexed to `ks`; labels absent from `self` become zero columns.
    pub fn restrict_to(&self, ks: &[HarmonicIndex]) -> CMatrix {
        let cols: HashMap<&HarmonicIndex, usize> = self.ks.iter().enumerate().map(|(i, k)| (k, i)).collect();
        let data = DMatrix::from_fn(self.omegas.len(), ks.len(), |r, c| match cols.get(&ks[c]) {
            Some(&src) => self.data[(r, src)],
            None => Complex64::new(0.0, 0.0),
        });
        CMatrix { omegas: self.omegas.clone(), ks: ks.to_vec(), data, provenance: self.provenance.clone() }
    }

    pub fn to_file(&self) -> MatrixFile {
        let mut f = MatrixFile::new(C_MATRIX_KIND, self.omegas.clone(), &self.data, self.provenance.clone());
        f.k_labels = Some(self.ks.clone());
        f
    }

    pub fn from_file(f: &MatrixFile) -> Result<Self> {
        if f.kind != C_MATRIX_KIND {
            return Err(Error::Format(format!("expected a {C_MATRIX_KIND} file, found {:?}", f.kind)));
        }
        let ks = f.k_labels.clone().ok_or_else(|| Error::Format("C matrix file without k_labels".into()))?;
        CMatrix::new(f.omega_labels.clone(), ks, f.data()?, f.provenance.clone())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        self.to_file().write(path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_file(&MatrixFile::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn analytic() -> CMatrix {
        let ks = vec![
            HarmonicIndex::zero(),
            HarmonicIndex::from_pairs(vec![(0, -1)]),
            HarmonicIndex::from_pairs(vec![(0, 1)]),
        ];
        let q = Complex64::new(0.25, 0.0);
        let z = Complex64::new(0.0, 0.0);
        let data = DMatrix::from_row_slice(3, 3, &[z, q, q, z, z, z, z, q, q]);
        CMatrix::new(vec![-1, 0, 1], ks, data, Provenance::exact("test")).unwrap()
    }

    #[test]
    fn reconstruction_of_cos_cos() {
        let c = analytic();
        let v = c.reconstruct(0.4, &[1.3]);
        assert!((v.re - 0.4f64.cos() * 1.3f64.cos()).abs() < 1e-15);
        assert!(v.im.abs() < 1e-15);
        assert_eq!(c.conjugate_symmetry_defect(), 0.0);
    }

    #[test]
    fn file_round_trip() {
        let c = analytic();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        c.write(&p).unwrap();
        assert_eq!(CMatrix::read(&p).unwrap(), c);
    }

    #[test]
    fn restriction_pads_missing_columns() {
        let c = analytic();
        let extra = HarmonicIndex::from_pairs(vec![(1, 1)]);
        let r = c.restrict_to(&[HarmonicIndex::from_pairs(vec![(0, 1)]), extra.clone()]);
        assert_eq!(r.data()[(2, 0)], Complex64::new(0.25, 0.0));
        assert_eq!(r.entry(1, &extra), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn shape_checked() {
        let d = DMatrix::from_element(2, 2, Complex64::new(0.0, 0.0));
        assert!(CMatrix::new(vec![0], vec![HarmonicIndex::zero()], d, Provenance::default()).is_err());
    }
}
