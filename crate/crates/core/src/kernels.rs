//! Closed-form objects built from `C`: centred covariance, variances, row
//! energies, Pearson correlation, the character-gradient kernel `M(θ)`,
//! harmonic QNTKs and their data-space projection, plus the comparison
//! metrics used by the pipelines.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::cmatrix::CMatrix;
use crate::error::{Error, Result};
use crate::harmonic::HarmonicIndex;

pub const DEFAULT_MASK_THRESHOLD: f64 = 1e-10;

/// Above this many columns `H(θ)` is formed from the rank-`m` factor of
/// `M(θ)` instead of materialising `M`.
pub const M_MATERIALISE_LIMIT: usize = 4096;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `C` with the `k = 0` column zeroed.
fn centred(c: &CMatrix) -> Result<DMatrix<Complex64>> {
    let z = c.zero_column().ok_or(Error::MissingZeroColumn)?;
    let mut d = c.data().clone();
    d.column_mut(z).fill(ZERO);
    Ok(d)
}

/// `C P C†`.
pub fn covariance_from_c(c: &CMatrix) -> Result<DMatrix<Complex64>> {
    let d = centred(c)?;
    Ok(&d * d.adjoint())
}

/// `Σ_{k≠0} |C_{ωk}|²` per row.
pub fn variance_profile(c: &CMatrix) -> Result<Vec<f64>> {
    let d = centred(c)?;
    Ok(d.row_iter().map(|r| r.iter().map(|v| v.norm_sqr()).sum()).collect())
}

/// `|C_{ω0}|² + Var[a_ω]`, the full row energy.
pub fn row_energy(c: &CMatrix) -> Result<Vec<f64>> {
    let z = c.zero_column().ok_or(Error::MissingZeroColumn)?;
    let var = variance_profile(c)?;
    Ok(var.iter().enumerate().map(|(r, v)| v + c.data()[(r, z)].norm_sqr()).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub data: DMatrix<Complex64>,
    /// True where the row's variance vanished; such rows and columns are zero.
    pub mask: Vec<bool>,
    pub variance: Vec<f64>,
}

impl CorrelationMatrix {
    pub fn unmasked(&self) -> Vec<usize> {
        (0..self.mask.len()).filter(|&i| !self.mask[i]).collect()
    }
}

/// `D^{-1/2} Cov D^{-1/2}`, masking rows with `D < threshold · max D`.
pub fn correlation(cov: &DMatrix<Complex64>, variance: &[f64], threshold: f64) -> Result<CorrelationMatrix> {
    let n = cov.nrows();
    if cov.ncols() != n || variance.len() != n {
        return Err(Error::Shape(format!("covariance {}x{}, variance {}", n, cov.ncols(), variance.len())));
    }
    let max = variance.iter().copied().fold(0.0f64, f64::max);
    if max <= 0.0 {
        return Err(Error::AllMasked);
    }
    let mask: Vec<bool> = variance.iter().map(|&v| v < threshold * max).collect();
    let inv: Vec<f64> = variance.iter().zip(&mask).map(|(&v, &m)| if m { 0.0 } else { v.sqrt().recip() }).collect();
    let data = DMatrix::from_fn(n, n, |r, c| {
        if mask[r] || mask[c] {
            ZERO
        } else if r == c {
            Complex64::new(1.0, 0.0)
        } else {
            cov[(r, c)] * (inv[r] * inv[c])
        }
    });
    Ok(CorrelationMatrix { data, mask, variance: variance.to_vec() })
}

/// Diagonal normalisation of a Hermitian kernel, as for a covariance.
pub fn diagonal_normalise(h: &DMatrix<Complex64>, threshold: f64) -> Result<CorrelationMatrix> {
    let d: Vec<f64> = h.diagonal().iter().map(|v| v.re).collect();
    correlation(h, &d, threshold)
}

/// `M_{kl}(θ) = (k·l) e^{i(k-l)·θ}`.
pub fn m_kernel(ks: &[HarmonicIndex], theta: &[f64]) -> DMatrix<Complex64> {
    let phase: Vec<Complex64> = ks.iter().map(|k| Complex64::from_polar(1.0, k.dot_theta(theta))).collect();
    DMatrix::from_fn(ks.len(), ks.len(), |r, c| phase[r] * phase[c].conj() * ks[r].dot(&ks[c]) as f64)
}

/// Diagonal of `E_θ[M(θ)]`, namely `‖k‖²`.
pub fn m_averaged(ks: &[HarmonicIndex]) -> Vec<f64> {
    ks.iter().map(HarmonicIndex::norm_sqr).collect()
}

/// Coefficient Jacobian implied by `C`: `X = C · Dψ` with
/// `Dψ_{k,a} = i k_a e^{ik·θ}`.
pub fn jacobian_from_c(c: &CMatrix, theta: &[f64]) -> DMatrix<Complex64> {
    let m = theta.len();
    let mut d_psi = DMatrix::from_element(c.ks().len(), m, ZERO);
    for (r, k) in c.ks().iter().enumerate() {
        let e = Complex64::from_polar(1.0, k.dot_theta(theta));
        for &(a, s) in k.entries() {
            if (a as usize) < m {
                d_psi[(r, a as usize)] = Complex64::new(0.0, s as f64) * e;
            }
        }
    }
    c.data() * d_psi
}

/// `H(θ) = C M(θ) C†`.
pub fn h_kernel(c: &CMatrix, theta: &[f64]) -> Result<DMatrix<Complex64>> {
    if let Some(max) = c.ks().iter().filter_map(HarmonicIndex::max_index).max() {
        if max as usize >= theta.len() {
            return Err(Error::ThetaLength { expected: max as usize + 1, got: theta.len() });
        }
    }
    if c.ks().len() <= M_MATERIALISE_LIMIT {
        let m = m_kernel(c.ks(), theta);
        Ok(c.data() * m * c.data().adjoint())
    } else {
        let x = jacobian_from_c(c, theta);
        Ok(&x * x.adjoint())
    }
}

/// `H̄ = C diag(‖k‖²) C†`, formed by weighting columns with `‖k‖`.
pub fn h_averaged(c: &CMatrix) -> DMatrix<Complex64> {
    let mut w = c.data().clone();
    for (col, k) in w.column_iter_mut().zip(c.ks()) {
        let s = k.norm_sqr().sqrt();
        col.into_iter().for_each(|v| *v *= s);
    }
    &w * w.adjoint()
}

/// `V_{iω} = e^{iωx_i}`.
pub fn design_matrix(omegas: &[i64], xs: &[f64]) -> DMatrix<Complex64> {
    DMatrix::from_fn(xs.len(), omegas.len(), |i, w| Complex64::from_polar(1.0, omegas[w] as f64 * xs[i]))
}

/// `K = V H V†`.
pub fn data_qntk(v: &DMatrix<Complex64>, h: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    if v.ncols() != h.nrows() || h.nrows() != h.ncols() {
        return Err(Error::Shape(format!("V is {}x{}, H is {}x{}", v.nrows(), v.ncols(), h.nrows(), h.ncols())));
    }
    Ok(v * h * v.adjoint())
}

fn same_shape(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::Shape(format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(())
}

/// `‖A - B‖_F / ‖B‖_F`.
pub fn frobenius_error(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> Result<f64> {
    same_shape(a, b)?;
    let nb = b.norm();
    if nb == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok((a - b).norm() / nb)
}

/// `Re Tr(A†B) / (‖A‖_F ‖B‖_F)`.
pub fn cosine_similarity(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> Result<f64> {
    same_shape(a, b)?;
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let tr: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum();
    Ok(tr / (na * nb))
}

/// Mean `|entry|` over unmasked upper-triangle pairs; zero when fewer than
/// two rows survive.
pub fn mean_offdiag(corr: &CorrelationMatrix) -> f64 {
    let keep = corr.unmasked();
    let mut sum = 0.0;
    let mut count = 0usize;
    for (i, &r) in keep.iter().enumerate() {
        for &c in &keep[i + 1..] {
            sum += corr.data[(r, c)].norm();
            count += 1;
        }
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Submatrix on the given rows and columns.
pub fn submatrix(a: &DMatrix<Complex64>, keep: &[usize]) -> DMatrix<Complex64> {
    DMatrix::from_fn(keep.len(), keep.len(), |r, c| a[(keep[r], keep[c])])
}

/// `A / ‖A‖_F`.
pub fn unit_frobenius(a: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let n = a.norm();
    if n == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok(a / Complex64::new(n, 0.0))
}

/// Pearson correlation between two real vectors; `None` when either is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    (saa > 0.0 && sbb > 0.0).then(|| sab / (saa * sbb).sqrt())
}

/// `v / Σ v`.
pub fn normalise_sum(v: &[f64]) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    if s == 0.0 {
        v.to_vec()
    } else {
        v.iter().map(|x| x / s).collect()
    }
}

/// Hermitian within `tol · ‖A‖_F` and smallest eigenvalue at least
/// `-tol · |Tr A|`.
pub fn is_hermitian_psd(a: &DMatrix<Complex64>, tol: f64) -> bool {
    if a.nrows() != a.ncols() {
        return false;
    }
    let scale = a.norm().max(f64::MIN_POSITIVE);
    if (a - a.adjoint()).norm() > tol * scale {
        return false;
    }
    let trace = a.trace().re.abs();
    let sym = (a + a.adjoint()) * Complex64::new(0.5, 0.0);
    sym.symmetric_eigenvalues().iter().all(|&l| l >= -tol * trace.max(f64::MIN_POSITIVE))
}
