//! Regression suite of exact-vs-simulator and exact-vs-Monte-Carlo
//! identities on one- and two-qubit circuits where everything is cheap.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::circuit::{Axis, Circuit, Encoder, Gate, Layer, Multiplier, Rotation};
use crate::cmatrix::CMatrix;
use crate::error::Result;
use crate::estimation::{
    coefficient_jacobian, estimate_c, mc_jacobian_gram, mc_second_moment, mc_variance, sample_coefficients, DftGrid,
    SampleEnsemble,
};
use crate::families::random_single_use;
use crate::harmonic::{enumerate_k, HarmonicIndex};
use crate::kernels::{
    cosine_similarity, covariance_from_c, data_qntk, design_matrix, frobenius_error, h_averaged, h_kernel, pearson,
    row_energy, variance_profile,
};
use crate::pauli::{Letter, PauliString};
use crate::propagation::{backpropagate_with, exact_c_with, support_bound, PropagationOptions};
use crate::simulator::{expectation, gradient};

/// Soft budget; exceeding it is reported but does not fail the suite.
pub const RUNTIME_BUDGET_S: f64 = 300.0;

#[derive(Debug, Clone)]
pub struct SuiteOptions {
    pub seed: u64,
    /// Monte-Carlo ensemble size for the estimator checks.
    pub samples: usize,
    /// Sign applied to sine branches during propagation; `-1` is a mutation
    /// that the reconstruction checks must catch.
    pub sin_sign: f64,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions { seed: 2024, samples: 100_000, sin_sign: 1.0 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub checks: Vec<Check>,
    pub runtime_s: f64,
    pub within_budget: bool,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

/// `Rx(x)` encoder then `Ry(θ_0)`, observing `Z`: `f = cos θ_0 cos x`.
pub fn analytic_circuit() -> Circuit {
    let layer = Layer {
        encoder: vec![Encoder { axis: Axis::X, qubit: 0 }],
        trainable: vec![Gate::Rotation(Rotation {
            axis: PauliString::single(1, 0, Letter::Y),
            param: 0,
            mult: Multiplier::ONE,
        })],
    };
    Circuit::new(1, 1, vec![layer], Circuit::mean_magnetisation(1)).expect("valid circuit")
}

/// The five random two-qubit circuits used throughout the suite.
pub fn random_oracle_circuits() -> Vec<Circuit> {
    (0..5).map(|i| random_single_use(2, 1 + i % 2, 100 + i as u64).expect("valid circuit")).collect()
}

struct Suite {
    checks: Vec<Check>,
}

impl Suite {
    fn record(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check { name: name.into(), passed, detail: detail.into() });
    }

    fn record_result(&mut self, name: &str, r: Result<(bool, String)>) {
        match r {
            Ok((p, d)) => self.record(name, p, d),
            Err(e) => self.record(name, false, format!("error: {e}")),
        }
    }
}

fn random_point(rng: &mut ChaCha8Rng, m: usize) -> (f64, Vec<f64>) {
    (rng.random_range(0.0..TAU), (0..m).map(|_| rng.random_range(0.0..TAU)).collect())
}

/// Worst `|Σ C e^{iωx} e^{ik·θ} - f(x;θ)|` over `points` random draws.
pub fn reconstruction_error(c: &CMatrix, circuit: &Circuit, points: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..points {
        let (x, theta) = random_point(&mut rng, circuit.num_params());
        let f = expectation(circuit, x, &theta)?;
        worst = worst.max((c.reconstruct(x, &theta) - f).norm());
    }
    Ok(worst)
}

/// Direct data-space Gram `Σ_a ∂_a f(x_i) ∂_a f(x_j)` from shift-rule gradients.
pub fn simulator_data_gram(circuit: &Circuit, xs: &[f64], theta: &[f64]) -> Result<DMatrix<Complex64>> {
    let m = circuit.num_params();
    let mut j = DMatrix::zeros(xs.len(), m);
    for (i, &x) in xs.iter().enumerate() {
        for a in 0..m {
            j[(i, a)] = gradient(circuit, x, theta, a)?;
        }
    }
    Ok((&j * j.transpose()).map(|v| Complex64::new(v, 0.0)))
}

/// Worst entrywise gap between `V H(θ) V†` and the simulator data Gram over
/// `thetas` random parameter points and an `n_grid`-point input grid.
pub fn pointwise_kernel_gap(c: &CMatrix, circuit: &Circuit, thetas: usize, n_grid: usize, seed: u64) -> Result<f64> {
    let xs: Vec<f64> = (0..n_grid).map(|j| TAU * j as f64 / n_grid as f64 + 0.1).collect();
    let v = design_matrix(c.omegas(), &xs);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..thetas {
        let (_, theta) = random_point(&mut rng, circuit.num_params());
        let k = data_qntk(&v, &h_kernel(c, &theta)?)?;
        let direct = simulator_data_gram(circuit, &xs, &theta)?;
        worst = worst.max((k - direct).iter().map(|z| z.norm()).fold(0.0, f64::max));
    }
    Ok(worst)
}

fn nx_for(circuit: &Circuit) -> usize {
    4 * circuit.num_qubits() * circuit.num_layers() + 2
}

pub fn run_analytic_suite(opts: &SuiteOptions) -> SuiteReport {
    let start = Instant::now();
    let mut s = Suite { checks: Vec::new() };
    let prop = PropagationOptions { sin_sign: opts.sin_sign, ..Default::default() };
    let analytic = analytic_circuit();
    let mut circuits = vec![("analytic".to_string(), analytic.clone())];
    circuits.extend(random_oracle_circuits().into_iter().enumerate().map(|(i, c)| (format!("random-{i}"), c)));

    let mut exact = Vec::new();
    for (name, circ) in &circuits {
        match exact_c_with(circ, &prop) {
            Ok(c) => exact.push(Some(c)),
            Err(e) => {
                s.record(format!("exact-c/{name}"), false, format!("error: {e}"));
                exact.push(None);
            }
        }
    }

    for ((name, circ), c) in circuits.iter().zip(&exact) {
        let Some(c) = c else { continue };
        s.record_result(
            &format!("reconstruction/{name}"),
            reconstruction_error(c, circ, 100, opts.seed).map(|e| (e <= 1e-10, format!("max error {e:.3e} over 100 points"))),
        );
        let defect = c.conjugate_symmetry_defect();
        s.record(format!("conjugate-symmetry/{name}"), defect <= 1e-12, format!("defect {defect:.3e}"));
        s.record_result(
            &format!("support-bound/{name}"),
            backpropagate_with(circ, &prop).and_then(|(nodes, _)| support_bound(&nodes)).map(|b| {
                (b.generated as u64 >= b.lower_bound, format!("b_max {} bound {} generated {}", b.b_max, b.lower_bound, b.generated))
            }),
        );
        s.record_result(
            &format!("pointwise-kernel/{name}"),
            pointwise_kernel_gap(c, circ, 20, 8, opts.seed + 1).map(|g| (g <= 1e-8, format!("max gap {g:.3e} at 20 θ on 8 inputs"))),
        );
        s.record_result(&format!("coefficient-jacobian/{name}"), coefficient_jacobian_gap(c, circ, opts.seed + 2));
        s.record_result(&format!("covariance-psd/{name}"), covariance_from_c(c).map(|cov| {
            let ok = crate::kernels::is_hermitian_psd(&cov, 1e-10);
            (ok, format!("Hermitian PSD: {ok}"))
        }));
    }

    if let Some(c) = &exact[0] {
        analytic_closed_forms(&mut s, c);
    }
    for ((name, circ), c) in circuits.iter().zip(&exact) {
        let Some(c) = c else { continue };
        monte_carlo_checks(&mut s, name, circ, c, opts);
    }

    let runtime_s = start.elapsed().as_secs_f64();
    SuiteReport { checks: s.checks, runtime_s, within_budget: runtime_s < RUNTIME_BUDGET_S }
}

/// `H(θ)` against the Gram of the DFT'd simulator Jacobian.
fn coefficient_jacobian_gap(c: &CMatrix, circ: &Circuit, seed: u64) -> Result<(bool, String)> {
    let grid = DftGrid::new(c.omegas(), nx_for(circ))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let (_, theta) = random_point(&mut rng, circ.num_params());
        let x = coefficient_jacobian(circ, &grid, &theta)?;
        let gap = (h_kernel(c, &theta)? - &x * x.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        worst = worst.max(gap);
    }
    Ok((worst <= 1e-8, format!("max gap {worst:.3e} at 20 θ")))
}

fn analytic_closed_forms(s: &mut Suite, c: &CMatrix) {
    let q = Complex64::new(0.25, 0.0);
    let plus = HarmonicIndex::from_pairs(vec![(0, 1)]);
    let minus = HarmonicIndex::from_pairs(vec![(0, -1)]);
    let entries_ok = c.omegas() == [-1, 0, 1]
        && [(-1, &minus), (-1, &plus), (1, &minus), (1, &plus)].iter().all(|&(w, k)| c.entry(w, k) == q)
        && c.data().iter().filter(|v| v.norm() != 0.0).count() == 4;
    s.record("c-entries/analytic", entries_ok, "four entries 1/4 at ω = ±1, k = ±1");

    match variance_profile(c) {
        Ok(v) => s.record("variance/analytic", v == [0.125, 0.0, 0.125], format!("{v:?}")),
        Err(e) => s.record("variance/analytic", false, e.to_string()),
    }
    match covariance_from_c(c) {
        Ok(cov) => {
            let ok = [(0, 0), (0, 2), (2, 0), (2, 2)].iter().all(|&(r, k)| cov[(r, k)] == Complex64::new(0.125, 0.0))
                && cov.row(1).iter().chain(cov.column(1).iter()).all(|v| v.norm() == 0.0);
            s.record("covariance/analytic", ok, "1/8 on the ω = ±1 block, zero elsewhere");
        }
        Err(e) => s.record("covariance/analytic", false, e.to_string()),
    }
    let h = h_averaged(c);
    let ok = [(0, 0), (0, 2), (2, 0), (2, 2)].iter().all(|&(r, k)| (h[(r, k)] - 0.125).norm() <= 1e-15)
        && h.row(1).iter().all(|v| v.norm() == 0.0);
    s.record("h-averaged/analytic", ok, "constant 1/8 on the ω = ±1 block");

    // At θ = 0 the gradient vanishes; at θ = π/2 it is -cos x.
    let ok = h_kernel(c, &[0.0]).map(|h| h.norm() < 1e-15).unwrap_or(false)
        && h_kernel(c, &[FRAC_PI_2]).map(|h| (h[(0, 2)] - 0.25).norm() < 1e-15).unwrap_or(false);
    s.record("h-pointwise/analytic", ok, "H(0) = 0, H(π/2) has 1/4 on the ω = ±1 block");
}

fn monte_carlo_checks(s: &mut Suite, name: &str, circ: &Circuit, c: &CMatrix, opts: &SuiteOptions) {
    let result = (|| -> Result<Vec<(String, bool, String)>> {
        let mut out = Vec::new();
        let ens = SampleEnsemble::new(opts.seed, opts.samples);
        let grid = DftGrid::new(c.omegas(), nx_for(circ))?;
        let c_samples = sample_coefficients(circ, &ens, ens.c_split(), &grid)?;
        let mc_samples = sample_coefficients(circ, &ens, ens.mc_split(), &grid)?;
        let s_c = c_samples.len() as f64;
        let s_mc = mc_samples.len() as f64;

        // Ĉ against the exact entries on every column of both.
        let ks = enumerate_k(circ.num_params(), circ.num_params(), usize::MAX);
        let c_hat = estimate_c(circ, &c_samples, &ks)?;
        let exact = c.restrict_to(c_hat.ks());
        let missing = c.ks().iter().filter(|k| c_hat.col_of(k).is_none()).count();
        let worst = (c_hat.data() - exact.data()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        let tol = 3.0 / s_c.sqrt();
        out.push(("c-estimate".into(), worst <= tol && missing == 0, format!("max |Ĉ - C| {worst:.2e}, 3/√S_C {tol:.2e}")));

        // Parseval: E|a_ω|² against the full row energy.
        let energy = row_energy(c)?;
        let m2 = mc_second_moment(&mc_samples);
        let tol = 4.0 / s_mc.sqrt();
        let worst = energy.iter().enumerate().map(|(r, e)| (m2[(r, r)].re - e).abs()).fold(0.0, f64::max);
        out.push(("parseval".into(), worst <= tol, format!("max gap {worst:.2e}, 4/√S_MC {tol:.2e}")));

        // Variance profiles.
        let v_mc = mc_variance(&mc_samples)?;
        let v_c = variance_profile(c)?;
        let worst = v_mc.iter().zip(&v_c).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let r = pearson(&v_mc, &v_c).unwrap_or(1.0);
        out.push(("variance-profile".into(), worst <= tol && r >= 0.999, format!("max gap {worst:.2e}, Pearson {r:.6}")));

        // Averaged kernel against the Jacobian Gram.
        let (h_mc, _) = mc_jacobian_gram(circ, &ens, ens.mc_split(), &grid)?;
        let h_c = h_averaged(c);
        if h_c.norm() > 0.0 {
            let eps = frobenius_error(&h_mc, &h_c)?;
            let cos = cosine_similarity(&h_mc, &h_c)?;
            out.push(("h-averaged-mc".into(), eps <= 0.05 && cos >= 0.99, format!("ε_F {eps:.3e}, 𝒜 {cos:.6}")));
        }
        Ok(out)
    })();
    match result {
        Ok(rows) => {
            for (check, ok, detail) in rows {
                s.record(format!("{check}/{name}"), ok, detail);
            }
        }
        Err(e) => s.record(format!("monte-carlo/{name}"), false, format!("error: {e}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mutation_is_caught() {
        let report = run_analytic_suite(&SuiteOptions { sin_sign: -1.0, samples: 2000, ..Default::default() });
        assert!(!report.passed());
        let failing: Vec<_> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        assert!(failing.iter().any(|n| n.starts_with("reconstruction/")), "{failing:?}");
    }

    #[test]
    fn random_circuits_are_single_use_and_entangling() {
        let circuits = random_oracle_circuits();
        assert_eq!(circuits.len(), 5);
        for c in &circuits {
            assert_eq!(c.num_qubits(), 2);
            assert!(c.validate().is_empty(), "{:?}", c.validate());
        }
        assert!(circuits.iter().any(|c| c.two_qubit_gate_count() > 0));
    }
}
