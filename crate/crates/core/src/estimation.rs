//! Monte-Carlo side: DFT extraction of `a_ω(θ)`, reproducible parameter
//! ensembles, the truncated estimate of `C`, and direct reference moments.
//!
//! The DFT uses `a_ω = (1/n_x) Σ_j f(x_j) e^{-iωx_j}` with `x_j = 2πj/n_x`,
//! so that `f(x) = Σ_ω a_ω e^{iωx}` reconstructs exactly for band-limited `f`.
//!
//! Every sum over samples is taken in fixed chunks of [`CHUNK`] samples,
//! chunk partials added in chunk order, so results do not depend on how
//! many threads ran.

use std::f64::consts::TAU;
use std::ops::Range;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::Circuit;
use crate::cmatrix::CMatrix;
use crate::error::{Error, Result};
use crate::harmonic::TruncatedK;
use crate::io::Provenance;
use crate::simulator::Evaluator;
use crate::spectral::FrequencySet;

pub const CHUNK: usize = 1024;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Uniform grid on `[0, 2π)` with precomputed DFT weights for a chosen
/// frequency list.
#[derive(Debug, Clone)]
pub struct DftGrid {
    n_x: usize,
    omegas: Vec<i64>,
    xs: Vec<f64>,
    /// `e^{-iωx_j}/n_x`, row per frequency.
    weights: Vec<Complex64>,
}

impl DftGrid {
    pub fn new(omegas: &[i64], n_x: usize) -> Result<Self> {
        let omega_max = omegas.iter().map(|w| w.abs()).max().unwrap_or(0);
        if (n_x as i64) <= 2 * omega_max {
            return Err(Error::Aliasing { n_x, omega_max });
        }
        let xs: Vec<f64> = (0..n_x).map(|j| TAU * j as f64 / n_x as f64).collect();
        let scale = 1.0 / n_x as f64;
        let weights = omegas
            .iter()
            .flat_map(|&w| {
                (0..n_x).map(move |j| {
                    // Reduce the phase index mod n_x so large ω·j stay exact.
                    let t = (w * j as i64).rem_euclid(n_x as i64) as f64;
                    Complex64::from_polar(scale, -TAU * t / n_x as f64)
                })
            })
            .collect();
        Ok(DftGrid { n_x, omegas: omegas.to_vec(), xs, weights })
    }

    /// Grid over a circuit's accessible frequencies.
    pub fn for_circuit(circuit: &Circuit, n_x: usize) -> Result<Self> {
        DftGrid::new(FrequencySet::of_circuit(circuit)?.omegas(), n_x)
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn omegas(&self) -> &[i64] {
        &self.omegas
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    /// `out[ω] = (1/n_x) Σ_j values[j·stride] e^{-iωx_j}`.
    pub fn transform_strided(&self, values: &[f64], stride: usize, out: &mut [Complex64]) {
        for (r, o) in out.iter_mut().enumerate() {
            let w = &self.weights[r * self.n_x..(r + 1) * self.n_x];
            *o = w.iter().enumerate().map(|(j, c)| c * values[j * stride]).sum();
        }
    }

    pub fn transform(&self, values: &[f64], out: &mut [Complex64]) {
        self.transform_strided(values, 1, out)
    }
}

/// `a_ω(θ)` over the circuit's accessible set.
pub fn dft_coefficients(circuit: &Circuit, theta: &[f64], n_x: usize) -> Result<Vec<Complex64>> {
    circuit.check_theta(theta)?;
    let grid = DftGrid::for_circuit(circuit, n_x)?;
    let mut ev = Evaluator::new(circuit);
    coefficients_into(&mut ev, &grid, theta, &mut vec![0.0; n_x])
}

fn coefficients_into(
    ev: &mut Evaluator<'_>,
    grid: &DftGrid,
    theta: &[f64],
    f: &mut [f64],
) -> Result<Vec<Complex64>> {
    for (fx, &x) in f.iter_mut().zip(grid.xs()) {
        *fx = ev.expectation(x, theta)?;
    }
    let mut a = vec![ZERO; grid.omegas().len()];
    grid.transform(f, &mut a);
    Ok(a)
}

/// Coefficient Jacobian `X_{ωa} = ∂a_ω/∂θ_a`, the DFT of the gradient of `f`
/// along the grid.
pub fn coefficient_jacobian(circuit: &Circuit, grid: &DftGrid, theta: &[f64]) -> Result<DMatrix<Complex64>> {
    circuit.check_theta(theta)?;
    let mut ev = Evaluator::new(circuit);
    let m = circuit.num_params();
    let mut grads = vec![0.0; grid.n_x() * m];
    Ok(jacobian_into(&mut ev, grid, theta, &mut grads))
}

fn jacobian_into(ev: &mut Evaluator<'_>, grid: &DftGrid, theta: &[f64], grads: &mut [f64]) -> DMatrix<Complex64> {
    let m = theta.len();
    for (j, &x) in grid.xs().iter().enumerate() {
        ev.gradient_all(x, theta, &mut grads[j * m..(j + 1) * m]);
    }
    let mut x_mat = DMatrix::from_element(grid.omegas().len(), m, ZERO);
    let mut col = vec![ZERO; grid.omegas().len()];
    for a in 0..m {
        grid.transform_strided(&grads[a..], m, &mut col);
        x_mat.column_mut(a).iter_mut().zip(&col).for_each(|(d, s)| *d = *s);
    }
    x_mat
}

/// A reproducible ensemble `θ^{(s)} ~ Unif(T^m)`, `s < samples`.
///
/// Sample `s` is drawn from its own ChaCha8 stream of the seed, so it does
/// not depend on which other samples were drawn or in what order. The first
/// half of the indices estimates `C`; the second half is the reference set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleEnsemble {
    pub seed: u64,
    pub samples: usize,
}

impl SampleEnsemble {
    pub fn new(seed: u64, samples: usize) -> Self {
        SampleEnsemble { seed, samples }
    }

    pub fn c_split(&self) -> Range<usize> {
        0..self.samples / 2
    }

    pub fn mc_split(&self) -> Range<usize> {
        self.samples / 2..self.samples
    }
}

pub fn sample_theta(ensemble: &SampleEnsemble, s: usize, m: usize) -> Vec<f64> {
    let mut out = vec![0.0; m];
    fill_theta(ensemble.seed, s, &mut out);
    out
}

fn fill_theta(seed: u64, s: usize, out: &mut [f64]) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(s as u64);
    let dist = Uniform::new(0.0, TAU).expect("non-empty range");
    out.iter_mut().for_each(|t| *t = dist.sample(&mut rng));
}

/// Parameters and coefficient vectors for a contiguous range of samples.
#[derive(Debug, Clone)]
pub struct CoefficientSamples {
    pub ensemble: SampleEnsemble,
    pub range: Range<usize>,
    pub n_x: usize,
    omegas: Vec<i64>,
    m: usize,
    thetas: Vec<f64>,
    coeffs: Vec<Complex64>,
}

impl CoefficientSamples {
    pub fn len(&self) -> usize {
        self.range.len()
    }

    pub fn is_empty(&self) -> bool {
        self.range.is_empty()
    }

    pub fn omegas(&self) -> &[i64] {
        &self.omegas
    }

    pub fn theta(&self, i: usize) -> &[f64] {
        &self.thetas[i * self.m..(i + 1) * self.m]
    }

    pub fn coefficients(&self, i: usize) -> &[Complex64] {
        let w = self.omegas.len();
        &self.coeffs[i * w..(i + 1) * w]
    }

    fn provenance(&self, method: &str, circuit: &Circuit) -> Provenance {
        Provenance {
            method: method.into(),
            circuit: Some(describe(circuit)),
            seed: Some(self.ensemble.seed),
            samples: Some(self.ensemble.samples),
            sample_range: Some([self.range.start, self.range.end]),
            n_x: Some(self.n_x),
            ..Default::default()
        }
    }
}

pub(crate) fn describe(circuit: &Circuit) -> String {
    format!("n={} L={} m={}", circuit.num_qubits(), circuit.num_layers(), circuit.num_params())
}

fn chunks(range: &Range<usize>) -> Vec<Range<usize>> {
    (range.start..range.end).step_by(CHUNK).map(|s| s..(s + CHUNK).min(range.end)).collect()
}

/// Draws `θ^{(s)}` for `s ∈ range` and computes `a(θ^{(s)})` for each.
pub fn sample_coefficients(
    circuit: &Circuit,
    ensemble: &SampleEnsemble,
    range: Range<usize>,
    grid: &DftGrid,
) -> Result<CoefficientSamples> {
    if range.end > ensemble.samples {
        return Err(Error::Config(format!("sample range {range:?} exceeds ensemble of {}", ensemble.samples)));
    }
    let m = circuit.num_params();
    let nw = grid.omegas().len();
    let parts: Vec<(Vec<f64>, Vec<Complex64>)> = chunks(&range)
        .into_par_iter()
        .map(|chunk| -> Result<_> {
            let mut ev = Evaluator::new(circuit);
            let mut f = vec![0.0; grid.n_x()];
            let mut thetas = vec![0.0; chunk.len() * m];
            let mut coeffs = Vec::with_capacity(chunk.len() * nw);
            for (i, s) in chunk.enumerate() {
                let theta = &mut thetas[i * m..(i + 1) * m];
                fill_theta(ensemble.seed, s, theta);
                coeffs.extend(coefficients_into(&mut ev, grid, theta, &mut f)?);
            }
            Ok((thetas, coeffs))
        })
        .collect::<Result<_>>()?;
    let (mut thetas, mut coeffs) = (Vec::new(), Vec::new());
    for (t, c) in parts {
        thetas.extend(t);
        coeffs.extend(c);
    }
    Ok(CoefficientSamples {
        ensemble: *ensemble,
        range,
        n_x: grid.n_x(),
        omegas: grid.omegas().to_vec(),
        m,
        thetas,
        coeffs,
    })
}

/// `Ĉ_{ωk} = (1/S_C) Σ_s a_ω(θ^{(s)}) e^{-ik·θ^{(s)}}` over the columns `ks`.
pub fn estimate_c(circuit: &Circuit, samples: &CoefficientSamples, ks: &TruncatedK) -> Result<CMatrix> {
    if samples.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    if ks.m != samples.m {
        return Err(Error::Shape(format!("K is over m = {}, samples over m = {}", ks.m, samples.m)));
    }
    let nw = samples.omegas.len();
    let e_minus: Vec<Complex64> = samples.thetas.iter().map(|&t| Complex64::from_polar(1.0, -t)).collect();
    let local = chunks(&(0..samples.len()));
    let columns: Vec<Vec<Complex64>> = ks
        .ks()
        .par_iter()
        .map(|k| {
            let mut total = vec![ZERO; nw];
            let mut part = vec![ZERO; nw];
            for chunk in &local {
                part.fill(ZERO);
                for i in chunk.clone() {
                    let ch = k.conj_character(&e_minus[i * samples.m..(i + 1) * samples.m]);
                    for (p, a) in part.iter_mut().zip(samples.coefficients(i)) {
                        *p += a * ch;
                    }
                }
                total.iter_mut().zip(&part).for_each(|(t, p)| *t += p);
            }
            let inv = 1.0 / samples.len() as f64;
            total.iter_mut().for_each(|t| *t *= inv);
            total
        })
        .collect();
    let data = DMatrix::from_fn(nw, ks.len(), |r, c| columns[c][r]);
    let mut prov = samples.provenance("mc", circuit);
    prov.hamming = Some(ks.hamming);
    prov.k_cap = Some(ks.cap);
    CMatrix::new(samples.omegas.clone(), ks.ks().to_vec(), data, prov)
}

/// Chunked in-order sum of a per-sample matrix contribution.
fn chunked_sum(
    len: usize,
    rows: usize,
    cols: usize,
    term: impl Fn(usize, &mut DMatrix<Complex64>) + Sync,
) -> DMatrix<Complex64> {
    let parts: Vec<DMatrix<Complex64>> = chunks(&(0..len))
        .into_par_iter()
        .map(|chunk| {
            let mut acc = DMatrix::from_element(rows, cols, ZERO);
            for i in chunk {
                term(i, &mut acc);
            }
            acc
        })
        .collect();
    parts.into_iter().fold(DMatrix::from_element(rows, cols, ZERO), |a, b| a + b)
}

/// `Ê[a]` over the samples.
pub fn mc_mean(samples: &CoefficientSamples) -> Vec<Complex64> {
    let nw = samples.omegas.len();
    let sum = chunked_sum(samples.len(), nw, 1, |i, acc| {
        for (r, a) in samples.coefficients(i).iter().enumerate() {
            acc[(r, 0)] += a;
        }
    });
    sum.iter().map(|v| v / samples.len() as f64).collect()
}

fn outer_average(samples: &CoefficientSamples, centre: &[Complex64]) -> DMatrix<Complex64> {
    let nw = samples.omegas.len();
    let sum = chunked_sum(samples.len(), nw, nw, |i, acc| {
        let a = samples.coefficients(i);
        for r in 0..nw {
            let ar = a[r] - centre[r];
            for c in 0..nw {
                acc[(r, c)] += ar * (a[c] - centre[c]).conj();
            }
        }
    });
    sum / Complex64::new(samples.len() as f64, 0.0)
}

/// `(1/S) Σ ã ã†` with `ã = a - Ê[a]`.
pub fn mc_covariance(samples: &CoefficientSamples) -> Result<DMatrix<Complex64>> {
    if samples.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: samples.len() });
    }
    Ok(outer_average(samples, &mc_mean(samples)))
}

/// Uncentred `(1/S) Σ a a†`.
pub fn mc_second_moment(samples: &CoefficientSamples) -> DMatrix<Complex64> {
    outer_average(samples, &vec![ZERO; samples.omegas.len()])
}

/// `(1/S) Σ |a_ω - Ê[a_ω]|²` per frequency.
pub fn mc_variance(samples: &CoefficientSamples) -> Result<Vec<f64>> {
    if samples.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: samples.len() });
    }
    let mean = mc_mean(samples);
    let nw = samples.omegas.len();
    let sum = chunked_sum(samples.len(), nw, 1, |i, acc| {
        for (r, a) in samples.coefficients(i).iter().enumerate() {
            acc[(r, 0)] += (a - mean[r]).norm_sqr();
        }
    });
    Ok(sum.iter().map(|v| v.re / samples.len() as f64).collect())
}

/// `Ĥ_MC = (1/S) Σ_s X(θ^{(s)}) X(θ^{(s)})†` over `range`, with the
/// coefficient Jacobian from adjoint gradients on the DFT grid.
pub fn mc_jacobian_gram(
    circuit: &Circuit,
    ensemble: &SampleEnsemble,
    range: Range<usize>,
    grid: &DftGrid,
) -> Result<(DMatrix<Complex64>, Provenance)> {
    if range.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    if range.end > ensemble.samples {
        return Err(Error::Config(format!("sample range {range:?} exceeds ensemble of {}", ensemble.samples)));
    }
    let m = circuit.num_params();
    let nw = grid.omegas().len();
    let parts: Vec<DMatrix<Complex64>> = chunks(&range)
        .into_par_iter()
        .map(|chunk| {
            let mut ev = Evaluator::new(circuit);
            let mut theta = vec![0.0; m];
            let mut grads = vec![0.0; grid.n_x() * m];
            let mut acc = DMatrix::from_element(nw, nw, ZERO);
            for s in chunk {
                fill_theta(ensemble.seed, s, &mut theta);
                let x = jacobian_into(&mut ev, grid, &theta, &mut grads);
                acc += &x * x.adjoint();
            }
            acc
        })
        .collect();
    let total = parts.into_iter().fold(DMatrix::from_element(nw, nw, ZERO), |a, b| a + b);
    let prov = Provenance {
        method: "mc_jacobian_gram".into(),
        circuit: Some(describe(circuit)),
        seed: Some(ensemble.seed),
        samples: Some(ensemble.samples),
        sample_range: Some([range.start, range.end]),
        n_x: Some(grid.n_x()),
        ..Default::default()
    };
    Ok((total / Complex64::new(range.len() as f64, 0.0), prov))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{Axis, Encoder, Gate, Layer, Multiplier, Rotation};
    use crate::harmonic::enumerate_k;
    use crate::pauli::{Letter, PauliString};

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
    fn dft_of_analytic_circuit() {
        let c = rx_ry();
        for n_x in [4, 5, 16, 128] {
            for theta in [0.0, 0.7, 2.9] {
                let a = dft_coefficients(&c, &[theta], n_x).unwrap();
                let half = 0.5 * f64::cos(theta);
                assert!((a[0] - half).norm() < 1e-12 && (a[2] - half).norm() < 1e-12);
                assert!(a[1].norm() < 1e-12);
            }
        }
        assert!(matches!(dft_coefficients(&c, &[0.0], 2), Err(Error::Aliasing { n_x: 2, omega_max: 1 })));
    }

    #[test]
    fn constant_function_has_only_dc() {
        let obs = vec![crate::circuit::ObservableTerm { weight: 1.0, pauli: "I".parse().unwrap() }];
        let layer = Layer { encoder: vec![Encoder { axis: Axis::Y, qubit: 0 }], trainable: vec![] };
        let c = Circuit::new(1, 0, vec![layer], obs).unwrap();
        let a = dft_coefficients(&c, &[], 8).unwrap();
        assert!((a[1] - 1.0).norm() < 1e-15);
        assert!(a[0].norm() < 1e-15 && a[2].norm() < 1e-15);
    }

    #[test]
    fn sampling_is_keyed_by_seed_and_index() {
        let e = SampleEnsemble::new(0, 10);
        assert_eq!(sample_theta(&e, 3, 5), sample_theta(&e, 3, 5));
        assert_ne!(sample_theta(&e, 3, 5), sample_theta(&e, 4, 5));
        assert_ne!(sample_theta(&e, 3, 5), sample_theta(&SampleEnsemble::new(1, 10), 3, 5));
        assert!(sample_theta(&e, 0, 100).iter().all(|t| (0.0..TAU).contains(t)));
        assert_eq!(e.c_split(), 0..5);
        assert_eq!(e.mc_split(), 5..10);
    }

    #[test]
    fn estimate_is_independent_of_thread_count() {
        let c = crate::families::build_family(crate::families::Family::YzyEnt, Axis::X, 2, 1, 1).unwrap();
        let e = SampleEnsemble::new(7, 3000);
        let grid = DftGrid::for_circuit(&c, 8).unwrap();
        let ks = enumerate_k(c.num_params(), 2, 100);
        let run = |threads| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| {
                let s = sample_coefficients(&c, &e, e.c_split(), &grid).unwrap();
                (estimate_c(&c, &s, &ks).unwrap(), mc_covariance(&s).unwrap())
            })
        };
        let (c1, v1) = run(1);
        let (c3, v3) = run(3);
        assert_eq!(c1, c3);
        assert_eq!(v1, v3);
    }

    #[test]
    fn second_moment_decomposes() {
        let c = crate::families::build_family(crate::families::Family::YzyEnt, Axis::Y, 2, 1, 1).unwrap();
        let e = SampleEnsemble::new(3, 400);
        let grid = DftGrid::for_circuit(&c, 8).unwrap();
        let s = sample_coefficients(&c, &e, 0..400, &grid).unwrap();
        let mean = mc_mean(&s);
        let mu = DMatrix::from_column_slice(mean.len(), 1, &mean);
        let lhs = mc_second_moment(&s);
        let rhs = mc_covariance(&s).unwrap() + &mu * mu.adjoint();
        assert!((lhs - rhs).norm() < 1e-10);
        let var = mc_variance(&s).unwrap();
        let cov = mc_covariance(&s).unwrap();
        for (r, v) in var.iter().enumerate() {
            assert!((cov[(r, r)].re - v).abs() < 1e-12);
        }
    }

    #[test]
    fn too_few_samples() {
        let c = rx_ry();
        let e = SampleEnsemble::new(0, 1);
        let grid = DftGrid::for_circuit(&c, 4).unwrap();
        let s = sample_coefficients(&c, &e, 0..1, &grid).unwrap();
        assert!(matches!(mc_variance(&s), Err(Error::TooFewSamples { needed: 2, got: 1 })));
        assert!(sample_coefficients(&c, &e, 0..2, &grid).is_err());
    }

    #[test]
    fn jacobian_matches_finite_differences_of_coefficients() {
        let c = crate::families::build_family(crate::families::Family::YzyEnt, Axis::X, 2, 1, 1).unwrap();
        let grid = DftGrid::for_circuit(&c, 8).unwrap();
        let theta = sample_theta(&SampleEnsemble::new(5, 1), 0, c.num_params());
        let x = coefficient_jacobian(&c, &grid, &theta).unwrap();
        let h = 1e-5;
        for a in 0..c.num_params() {
            let mut tp = theta.clone();
            tp[a] += h;
            let mut tm = theta.clone();
            tm[a] -= h;
            let ap = dft_coefficients(&c, &tp, 8).unwrap();
            let am = dft_coefficients(&c, &tm, 8).unwrap();
            for r in 0..ap.len() {
                assert!((x[(r, a)] - (ap[r] - am[r]) / (2.0 * h)).norm() < 1e-8);
            }
        }
    }
}
