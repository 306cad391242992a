//! Configuration-driven experiment pipelines.
//!
//! Each pipeline runs once per training-block depth. Samples `[0, S/2)`
//! estimate `Ĉ`; samples `[S/2, S)` feed the direct Monte-Carlo reference.
//! Reports are plain JSON with a schema version and no timestamps, so
//! identical configurations give byte-identical output.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::ops::Range;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::circuit::{Axis, Circuit};
use crate::cmatrix::CMatrix;
use crate::error::{Error, Result};
use crate::estimation::{
    estimate_c, mc_covariance, mc_jacobian_gram, mc_variance, sample_coefficients, CoefficientSamples, DftGrid,
    SampleEnsemble,
};
use crate::families::{build_family, Family};
use crate::harmonic::{enumerate_k, DEFAULT_K_CAP};
use crate::io::{heatmap_csv, MatrixFile, Provenance};
use crate::kernels::{
    correlation, cosine_similarity, covariance_from_c, diagonal_normalise, frobenius_error, h_averaged, mean_offdiag,
    normalise_sum, pearson, submatrix, unit_frobenius, variance_profile, CorrelationMatrix, DEFAULT_MASK_THRESHOLD,
};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pipeline {
    Variance,
    Correlation,
    Qntk,
    All,
}

impl std::str::FromStr for Pipeline {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "variance" => Ok(Pipeline::Variance),
            "correlation" => Ok(Pipeline::Correlation),
            "qntk" => Ok(Pipeline::Qntk),
            "all" => Ok(Pipeline::All),
            _ => Err(Error::Config(format!("unknown pipeline {s:?}"))),
        }
    }
}

/// Depth list written either as an array or as text like `"1..5"` / `"1,3"`.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(untagged)]
pub enum DepthSpec {
    List(Vec<usize>),
    Text(String),
}

impl DepthSpec {
    pub fn resolve(&self) -> Result<Vec<usize>> {
        match self {
            DepthSpec::List(v) => Ok(v.clone()),
            DepthSpec::Text(s) => parse_depths(s),
        }
    }
}

/// `"1..5"` (inclusive), `"2"`, or `"1,2,4"`.
pub fn parse_depths(s: &str) -> Result<Vec<usize>> {
    let bad = || Error::Config(format!("depths: cannot parse {s:?}; use e.g. 1..5 or 1,2,3"));
    if let Some((a, b)) = s.split_once("..") {
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    s.split(',').map(|t| t.trim().parse().map_err(|_| bad())).collect()
}

/// Optional overrides, as read from a config file or from command-line flags.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    pub pipeline: Option<Pipeline>,
    pub family: Option<Family>,
    pub encoder: Option<Axis>,
    pub qubits: Option<usize>,
    pub layers: Option<usize>,
    pub depths: Option<DepthSpec>,
    pub samples: Option<usize>,
    pub nx: Option<usize>,
    pub hamming: Option<usize>,
    pub kcap: Option<usize>,
    pub seed: Option<u64>,
    pub mask_threshold: Option<f64>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
}

impl ConfigOverrides {
    /// Parses a config file; serde reports the line and column of any error.
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("config file: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub pipeline: Pipeline,
    pub family: Family,
    pub encoder: Axis,
    pub qubits: usize,
    pub layers: usize,
    pub depths: Vec<usize>,
    pub samples: usize,
    /// Grid size; `None` picks 128 for variance and 126 otherwise.
    pub nx: Option<usize>,
    /// Hamming limit; `None` picks 3 for `d > 1` and `m` for `d = 1`.
    pub hamming: Option<usize>,
    pub kcap: usize,
    pub seed: u64,
    pub mask_threshold: f64,
    /// Execution-only settings, kept out of reports so they stay comparable.
    #[serde(skip)]
    pub threads: Option<usize>,
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Defaults, then `file`, then `flags`. The seed has no default.
    pub fn resolve(file: &ConfigOverrides, flags: &ConfigOverrides) -> Result<Self> {
        macro_rules! pick {
            ($f:ident, $default:expr) => {
                flags.$f.clone().or_else(|| file.$f.clone()).unwrap_or($default)
            };
        }
        let seed = flags.seed.or(file.seed).ok_or_else(|| Error::Config("seed: required".into()))?;
        let depths = match flags.depths.as_ref().or(file.depths.as_ref()) {
            Some(d) => d.resolve()?,
            None => (1..=5).collect(),
        };
        let cfg = ExperimentConfig {
            pipeline: pick!(pipeline, Pipeline::All),
            family: pick!(family, Family::YzyEnt),
            encoder: pick!(encoder, Axis::X),
            qubits: pick!(qubits, 6),
            layers: pick!(layers, 1),
            depths,
            samples: pick!(samples, 100_096),
            nx: flags.nx.or(file.nx),
            hamming: flags.hamming.or(file.hamming),
            kcap: pick!(kcap, DEFAULT_K_CAP),
            seed,
            mask_threshold: pick!(mask_threshold, DEFAULT_MASK_THRESHOLD),
            threads: flags.threads.or(file.threads),
            out: flags.out.clone().or_else(|| file.out.clone()),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Desk-scale preset: four qubits, 20000 samples, default Hamming rule.
    pub fn desk(family: Family, encoder: Axis, seed: u64) -> Self {
        ExperimentConfig {
            pipeline: Pipeline::All,
            family,
            encoder,
            qubits: 4,
            layers: 1,
            depths: vec![1, 2, 3],
            samples: 20_000,
            nx: None,
            hamming: None,
            kcap: DEFAULT_K_CAP,
            seed,
            mask_threshold: DEFAULT_MASK_THRESHOLD,
            threads: None,
            out: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |field: &str, msg: String| Err(Error::Config(format!("{field}: {msg}")));
        if self.qubits == 0 || self.qubits > 20 {
            return fail("qubits", format!("must be in 1..=20, got {}", self.qubits));
        }
        if self.family.is_entangling() && self.qubits < 2 {
            return fail("qubits", format!("{} needs at least 2", self.family));
        }
        if self.layers == 0 {
            return fail("layers", "must be at least 1".into());
        }
        if self.depths.is_empty() || self.depths.contains(&0) {
            return fail("depths", format!("need a non-empty list of depths >= 1, got {:?}", self.depths));
        }
        if self.samples < 4 || !self.samples.is_multiple_of(2) {
            return fail("samples", format!("must be even and at least 4, got {}", self.samples));
        }
        let omega_max = self.qubits * self.layers;
        if let Some(nx) = self.nx {
            if nx <= 2 * omega_max {
                return fail("nx", format!("{nx} aliases; need nx > 2·n·L = {}", 2 * omega_max));
            }
        } else if 126 <= 2 * omega_max {
            return fail("nx", format!("default grid aliases for n·L = {omega_max}; set nx > {}", 2 * omega_max));
        }
        if self.kcap == 0 {
            return fail("kcap", "must be at least 1".into());
        }
        if !(self.mask_threshold > 0.0 && self.mask_threshold < 1.0) {
            return fail("mask_threshold", format!("must lie in (0, 1), got {}", self.mask_threshold));
        }
        if self.threads == Some(0) {
            return fail("threads", "must be at least 1".into());
        }
        Ok(())
    }

    pub fn ensemble(&self) -> SampleEnsemble {
        SampleEnsemble::new(self.seed, self.samples)
    }

    pub fn nx_for(&self, p: Pipeline) -> usize {
        self.nx.unwrap_or(if p == Pipeline::Variance { 128 } else { 126 })
    }

    pub fn hamming_for(&self, depth: usize, m: usize) -> usize {
        self.hamming.unwrap_or(if depth > 1 { 3 } else { m })
    }

    pub fn circuit(&self, depth: usize) -> Result<Circuit> {
        build_family(self.family, self.encoder, self.qubits, self.layers, depth)
    }
}

fn assert_disjoint(a: &Range<usize>, b: &Range<usize>) -> Result<()> {
    if a.start < b.end && b.start < a.end {
        return Err(Error::Invariant(format!("sample ranges {a:?} and {b:?} overlap")));
    }
    Ok(())
}

/// A matrix written next to a report: JSON always, CSV heatmap optionally.
#[derive(Debug, Clone)]
pub struct Artifact {
    pub name: String,
    pub file: MatrixFile,
    pub heatmap: bool,
}

impl Artifact {
    fn omega_square(name: String, kind: &str, omegas: &[i64], data: &DMatrix<Complex64>, mask: Option<&[bool]>, prov: Provenance) -> Self {
        let mut file = MatrixFile::new(kind, omegas.to_vec(), data, prov);
        file.col_omega_labels = Some(omegas.to_vec());
        file.mask = mask.map(<[bool]>::to_vec);
        Artifact { name, file, heatmap: true }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CircuitSummary {
    pub family: Family,
    pub encoder: Axis,
    pub qubits: usize,
    pub layers: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Splits {
    pub c: [usize; 2],
    pub mc: [usize; 2],
}

#[derive(Debug, Clone, Serialize)]
pub struct KSummary {
    pub hamming: usize,
    pub cap: usize,
    pub count: usize,
    pub complete: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct VarianceDepth {
    pub depth: usize,
    pub m: usize,
    pub nx: usize,
    pub omegas: Vec<i64>,
    pub k: KSummary,
    pub splits: Splits,
    pub var_mc: Vec<f64>,
    /// `Σ_{k≠0} |Ĉ_{ωk}|²` over the truncated columns.
    pub row_energy_c: Vec<f64>,
    pub var_mc_norm: Vec<f64>,
    pub row_energy_c_norm: Vec<f64>,
    pub pearson: Option<f64>,
    /// `var_mc < mask_threshold · max var_mc`.
    pub vanishing: Vec<bool>,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CorrelationDepth {
    pub depth: usize,
    pub m: usize,
    pub nx: usize,
    pub omegas: Vec<i64>,
    pub k: KSummary,
    pub splits: Splits,
    pub mask_c: Vec<bool>,
    pub mask_mc: Vec<bool>,
    /// Rows kept in the comparison: unmasked in both estimators.
    pub compared: Vec<i64>,
    pub eps_f: f64,
    pub cosine: f64,
    /// Mean |entry| over unmasked upper-triangle pairs.
    pub mean_offdiag_c: f64,
    pub mean_offdiag_mc: f64,
    /// Mean |entry| over all upper-triangle pairs, masked ones counting zero.
    pub mean_offdiag_all_c: f64,
    pub mean_offdiag_all_mc: f64,
    /// `ε_F` of the Monte-Carlo correlation against the previous depth's.
    pub eps_f_prev_depth_mc: Option<f64>,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct QntkDepth {
    pub depth: usize,
    pub m: usize,
    pub nx: usize,
    pub omegas: Vec<i64>,
    pub k: KSummary,
    pub splits: Splits,
    pub mask_c: Vec<bool>,
    pub mask_mc: Vec<bool>,
    pub compared: Vec<i64>,
    pub eps_f: f64,
    pub cosine: f64,
    /// Alignment of the normalised `Ĥ_C` with the `Ĉ`-derived correlation.
    pub cosine_vs_corr_c: Option<f64>,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report<D> {
    pub schema_version: u32,
    pub pipeline: Pipeline,
    pub config: ExperimentConfig,
    pub circuit: CircuitSummary,
    pub depths: Vec<D>,
    #[serde(skip)]
    pub artifacts: Vec<Artifact>,
    #[serde(skip)]
    pub tables: Vec<(String, String)>,
}

impl<D: Serialize> Report<D> {
    fn new(pipeline: Pipeline, cfg: &ExperimentConfig) -> Self {
        Report {
            schema_version: REPORT_SCHEMA_VERSION,
            pipeline,
            config: cfg.clone(),
            circuit: CircuitSummary { family: cfg.family, encoder: cfg.encoder, qubits: cfg.qubits, layers: cfg.layers },
            depths: Vec::new(),
            artifacts: Vec::new(),
            tables: Vec::new(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Writes `report_<pipeline>.json` plus every matrix and table.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        for a in &self.artifacts {
            a.file.write(&dir.join(format!("{}.json", a.name)))?;
            if a.heatmap {
                let rows: Vec<String> = a.file.omega_labels.iter().map(i64::to_string).collect();
                let cols: Vec<String> = match (&a.file.col_omega_labels, &a.file.k_labels) {
                    (Some(c), _) => c.iter().map(i64::to_string).collect(),
                    (None, Some(k)) => k.iter().map(|k| k.to_string()).collect(),
                    (None, None) => (0..a.file.shape[1]).map(|i| i.to_string()).collect(),
                };
                std::fs::write(dir.join(format!("{}.csv", a.name)), heatmap_csv(&rows, &cols, &a.file.data()?))?;
            }
        }
        for (name, body) in &self.tables {
            std::fs::write(dir.join(name), body)?;
        }
        let name = serde_json::to_value(self.pipeline)?.as_str().unwrap_or("report").to_string();
        let path = dir.join(format!("report_{name}.json"));
        std::fs::write(&path, self.to_json()?)?;
        Ok(path)
    }
}

/// Per-depth cache so that pipelines run together share samples and `Ĉ`.
struct DepthRun<'c> {
    cfg: &'c ExperimentConfig,
    depth: usize,
    circuit: Circuit,
    by_nx: HashMap<usize, Estimates>,
}

struct Estimates {
    c_samples: CoefficientSamples,
    mc_samples: CoefficientSamples,
    c_hat: CMatrix,
    k: KSummary,
    written: bool,
}

impl<'c> DepthRun<'c> {
    fn new(cfg: &'c ExperimentConfig, depth: usize) -> Result<Self> {
        Ok(DepthRun { cfg, depth, circuit: cfg.circuit(depth)?, by_nx: HashMap::new() })
    }

    fn m(&self) -> usize {
        self.circuit.num_params()
    }

    fn estimates(&mut self, nx: usize) -> Result<&mut Estimates> {
        if !self.by_nx.contains_key(&nx) {
            let ens = self.cfg.ensemble();
            let (c_range, mc_range) = (ens.c_split(), ens.mc_split());
            assert_disjoint(&c_range, &mc_range)?;
            let grid = DftGrid::for_circuit(&self.circuit, nx)?;
            let c_samples = sample_coefficients(&self.circuit, &ens, c_range, &grid)?;
            let mc_samples = sample_coefficients(&self.circuit, &ens, mc_range, &grid)?;
            let h = self.cfg.hamming_for(self.depth, self.m());
            let ks = enumerate_k(self.m(), h, self.cfg.kcap);
            let k = KSummary { hamming: h, cap: ks.cap, count: ks.len(), complete: ks.is_complete() };
            let c_hat = estimate_c(&self.circuit, &c_samples, &ks)?;
            self.by_nx.insert(nx, Estimates { c_samples, mc_samples, c_hat, k, written: false });
        }
        Ok(self.by_nx.get_mut(&nx).expect("inserted above"))
    }

    fn splits(&self) -> Splits {
        let ens = self.cfg.ensemble();
        let (c, mc) = (ens.c_split(), ens.mc_split());
        Splits { c: [c.start, c.end], mc: [mc.start, mc.end] }
    }

    /// The `Ĉ` file, emitted once per grid size.
    fn c_hat_artifact(&mut self, nx: usize) -> Result<Option<Artifact>> {
        let depth = self.depth;
        let est = self.estimates(nx)?;
        if est.written {
            return Ok(None);
        }
        est.written = true;
        Ok(Some(Artifact { name: format!("c_hat_d{depth}_nx{nx}"), file: est.c_hat.to_file(), heatmap: false }))
    }
}

struct Compared {
    keep: Vec<usize>,
    eps_f: f64,
    cosine: f64,
}

/// Unit-Frobenius comparison of two normalised matrices on the rows
/// unmasked in both.
fn compare(a: &CorrelationMatrix, b: &CorrelationMatrix) -> Result<Compared> {
    let keep: Vec<usize> = (0..a.mask.len()).filter(|&i| !a.mask[i] && !b.mask[i]).collect();
    if keep.is_empty() {
        return Err(Error::AllMasked);
    }
    let (sa, sb) = (unit_frobenius(&submatrix(&a.data, &keep))?, unit_frobenius(&submatrix(&b.data, &keep))?);
    Ok(Compared { eps_f: frobenius_error(&sa, &sb)?, cosine: cosine_similarity(&sa, &sb)?, keep })
}

fn mean_offdiag_all(corr: &CorrelationMatrix) -> f64 {
    let n = corr.data.nrows();
    if n < 2 {
        return 0.0;
    }
    let mut sum = 0.0;
    for r in 0..n {
        for c in r + 1..n {
            sum += corr.data[(r, c)].norm();
        }
    }
    sum / (n * (n - 1) / 2) as f64
}

fn variance_depth(run: &mut DepthRun<'_>, report: &mut Report<VarianceDepth>) -> Result<()> {
    let nx = run.cfg.nx_for(Pipeline::Variance);
    let (depth, m, splits, threshold) = (run.depth, run.m(), run.splits(), run.cfg.mask_threshold);
    if let Some(a) = run.c_hat_artifact(nx)? {
        report.artifacts.push(a);
    }
    let est = run.estimates(nx)?;
    let var_mc = mc_variance(&est.mc_samples)?;
    let row_energy_c = variance_profile(&est.c_hat)?;
    let (var_mc_norm, row_energy_c_norm) = (normalise_sum(&var_mc), normalise_sum(&row_energy_c));
    let max = var_mc.iter().copied().fold(0.0, f64::max);
    let omegas = est.c_hat.omegas().to_vec();
    let mut csv = String::from("omega,var_mc,row_energy_c,var_mc_norm,row_energy_c_norm\n");
    for i in 0..omegas.len() {
        let _ = writeln!(csv, "{},{:e},{:e},{:e},{:e}", omegas[i], var_mc[i], row_energy_c[i], var_mc_norm[i], row_energy_c_norm[i]);
    }
    let table = format!("variance_d{depth}.csv");
    report.tables.push((table.clone(), csv));
    report.depths.push(VarianceDepth {
        depth,
        m,
        nx,
        k: est.k.clone(),
        splits,
        pearson: pearson(&var_mc_norm, &row_energy_c_norm),
        vanishing: var_mc.iter().map(|&v| v < threshold * max).collect(),
        var_mc,
        row_energy_c,
        var_mc_norm,
        row_energy_c_norm,
        omegas,
        files: vec![table, format!("c_hat_d{depth}_nx{nx}.json")],
    });
    Ok(())
}

fn correlation_depth(
    run: &mut DepthRun<'_>,
    report: &mut Report<CorrelationDepth>,
    prev_mc: &mut Option<CorrelationMatrix>,
) -> Result<()> {
    let nx = run.cfg.nx_for(Pipeline::Correlation);
    let (depth, m, splits, threshold) = (run.depth, run.m(), run.splits(), run.cfg.mask_threshold);
    if let Some(a) = run.c_hat_artifact(nx)? {
        report.artifacts.push(a);
    }
    let est = run.estimates(nx)?;
    let corr_c = correlation(&covariance_from_c(&est.c_hat)?, &variance_profile(&est.c_hat)?, threshold)?;
    let corr_mc = correlation(&mc_covariance(&est.mc_samples)?, &mc_variance(&est.mc_samples)?, threshold)?;
    let cmp = compare(&corr_c, &corr_mc)?;
    let omegas = est.c_hat.omegas().to_vec();
    let eps_prev = match prev_mc.as_ref() {
        Some(p) if p.data.shape() == corr_mc.data.shape() => compare(&corr_mc, p).ok().map(|c| c.eps_f),
        _ => None,
    };
    let prov_c = est.c_hat.provenance().derived("corr_c");
    let mut prov_mc = est.c_hat.provenance().derived("corr_mc");
    prov_mc.sample_range = Some(splits.mc);
    prov_mc.hamming = None;
    prov_mc.k_cap = None;
    let names = [format!("corr_c_d{depth}"), format!("corr_mc_d{depth}")];
    report.artifacts.push(Artifact::omega_square(names[0].clone(), "corr", &omegas, &corr_c.data, Some(&corr_c.mask), prov_c));
    report.artifacts.push(Artifact::omega_square(names[1].clone(), "corr", &omegas, &corr_mc.data, Some(&corr_mc.mask), prov_mc));
    report.depths.push(CorrelationDepth {
        depth,
        m,
        nx,
        k: est.k.clone(),
        splits,
        mask_c: corr_c.mask.clone(),
        mask_mc: corr_mc.mask.clone(),
        compared: cmp.keep.iter().map(|&i| omegas[i]).collect(),
        eps_f: cmp.eps_f,
        cosine: cmp.cosine,
        mean_offdiag_c: mean_offdiag(&corr_c),
        mean_offdiag_mc: mean_offdiag(&corr_mc),
        mean_offdiag_all_c: mean_offdiag_all(&corr_c),
        mean_offdiag_all_mc: mean_offdiag_all(&corr_mc),
        eps_f_prev_depth_mc: eps_prev,
        omegas,
        files: names.iter().flat_map(|n| [format!("{n}.json"), format!("{n}.csv")]).collect(),
    });
    *prev_mc = Some(corr_mc);
    Ok(())
}

fn qntk_depth(run: &mut DepthRun<'_>, report: &mut Report<QntkDepth>) -> Result<()> {
    let nx = run.cfg.nx_for(Pipeline::Qntk);
    let (depth, m, splits, threshold) = (run.depth, run.m(), run.splits(), run.cfg.mask_threshold);
    if let Some(a) = run.c_hat_artifact(nx)? {
        report.artifacts.push(a);
    }
    let ens = run.cfg.ensemble();
    let grid = DftGrid::for_circuit(&run.circuit, nx)?;
    let (h_mc, prov_mc) = mc_jacobian_gram(&run.circuit, &ens, ens.mc_split(), &grid)?;
    let est = run.estimates(nx)?;
    assert_disjoint(&est.c_samples.range, &ens.mc_split())?;
    let h_c = diagonal_normalise(&h_averaged(&est.c_hat), threshold)?;
    let h_mc = diagonal_normalise(&h_mc, threshold)?;
    let cmp = compare(&h_c, &h_mc)?;
    let corr_c = correlation(&covariance_from_c(&est.c_hat)?, &variance_profile(&est.c_hat)?, threshold)?;
    let omegas = est.c_hat.omegas().to_vec();
    let names = [format!("qntk_c_d{depth}"), format!("qntk_mc_d{depth}")];
    let prov_c = est.c_hat.provenance().derived("qntk_c");
    report.artifacts.push(Artifact::omega_square(names[0].clone(), "qntk", &omegas, &h_c.data, Some(&h_c.mask), prov_c));
    report.artifacts.push(Artifact::omega_square(names[1].clone(), "qntk", &omegas, &h_mc.data, Some(&h_mc.mask), prov_mc));
    report.depths.push(QntkDepth {
        depth,
        m,
        nx,
        k: est.k.clone(),
        splits,
        mask_c: h_c.mask.clone(),
        mask_mc: h_mc.mask.clone(),
        compared: cmp.keep.iter().map(|&i| omegas[i]).collect(),
        eps_f: cmp.eps_f,
        cosine: cmp.cosine,
        cosine_vs_corr_c: compare(&h_c, &corr_c).ok().map(|c| c.cosine),
        omegas,
        files: names.iter().flat_map(|n| [format!("{n}.json"), format!("{n}.csv")]).collect(),
    });
    Ok(())
}

#[derive(Debug, Clone, Default)]
pub struct Reports {
    pub variance: Option<Report<VarianceDepth>>,
    pub correlation: Option<Report<CorrelationDepth>>,
    pub qntk: Option<Report<QntkDepth>>,
}

impl Reports {
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let mut out = Vec::new();
        if let Some(r) = &self.variance {
            out.push(r.write(dir)?);
        }
        if let Some(r) = &self.correlation {
            out.push(r.write(dir)?);
        }
        if let Some(r) = &self.qntk {
            out.push(r.write(dir)?);
        }
        Ok(out)
    }
}

/// Runs the configured pipeline(s), sharing samples and `Ĉ` across them.
pub fn run(cfg: &ExperimentConfig) -> Result<Reports> {
    cfg.validate()?;
    let want = |p| cfg.pipeline == p || cfg.pipeline == Pipeline::All;
    let mut reports = Reports {
        variance: want(Pipeline::Variance).then(|| Report::new(Pipeline::Variance, cfg)),
        correlation: want(Pipeline::Correlation).then(|| Report::new(Pipeline::Correlation, cfg)),
        qntk: want(Pipeline::Qntk).then(|| Report::new(Pipeline::Qntk, cfg)),
    };
    let mut prev_mc = None;
    for &depth in &cfg.depths {
        let mut run = DepthRun::new(cfg, depth)?;
        if let Some(r) = reports.variance.as_mut() {
            variance_depth(&mut run, r)?;
        }
        if let Some(r) = reports.correlation.as_mut() {
            correlation_depth(&mut run, r, &mut prev_mc)?;
        }
        if let Some(r) = reports.qntk.as_mut() {
            qntk_depth(&mut run, r)?;
        }
    }
    Ok(reports)
}

fn single(cfg: &ExperimentConfig, p: Pipeline) -> Result<Reports> {
    run(&ExperimentConfig { pipeline: p, ..cfg.clone() })
}

pub fn run_variance_pipeline(cfg: &ExperimentConfig) -> Result<Report<VarianceDepth>> {
    Ok(single(cfg, Pipeline::Variance)?.variance.expect("requested"))
}

pub fn run_correlation_pipeline(cfg: &ExperimentConfig) -> Result<Report<CorrelationDepth>> {
    Ok(single(cfg, Pipeline::Correlation)?.correlation.expect("requested"))
}

pub fn run_qntk_pipeline(cfg: &ExperimentConfig) -> Result<Report<QntkDepth>> {
    Ok(single(cfg, Pipeline::Qntk)?.qntk.expect("requested"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flags(seed: u64) -> ConfigOverrides {
        ConfigOverrides { seed: Some(seed), ..Default::default() }
    }

    #[test]
    fn depth_parsing() {
        assert_eq!(parse_depths("1..5").unwrap(), vec![1, 2, 3, 4, 5]);
        assert_eq!(parse_depths("1..=3").unwrap(), vec![1, 2, 3]);
        assert_eq!(parse_depths("2, 4").unwrap(), vec![2, 4]);
        assert!(parse_depths("3..1").is_err());
        assert!(parse_depths("x").is_err());
    }

    #[test]
    fn defaults_and_precedence() {
        let file = ConfigOverrides::from_json(r#"{"qubits": 3, "samples": 10, "depths": "1..2", "family": "circuit17"}"#).unwrap();
        let cli = ConfigOverrides { qubits: Some(2), ..flags(9) };
        let cfg = ExperimentConfig::resolve(&file, &cli).unwrap();
        assert_eq!(cfg.qubits, 2);
        assert_eq!(cfg.samples, 10);
        assert_eq!(cfg.depths, vec![1, 2]);
        assert_eq!(cfg.family, Family::Circuit17);
        assert_eq!(cfg.layers, 1);
        assert_eq!(cfg.nx_for(Pipeline::Variance), 128);
        assert_eq!(cfg.nx_for(Pipeline::Qntk), 126);
        assert_eq!(cfg.hamming_for(1, 12), 12);
        assert_eq!(cfg.hamming_for(2, 24), 3);
    }

    #[test]
    fn validation_errors() {
        let none = ConfigOverrides::default();
        assert!(matches!(ExperimentConfig::resolve(&none, &none), Err(Error::Config(m)) if m.contains("seed")));
        let odd = ConfigOverrides { samples: Some(11), ..flags(1) };
        assert!(matches!(ExperimentConfig::resolve(&none, &odd), Err(Error::Config(m)) if m.starts_with("samples")));
        let alias = ConfigOverrides { nx: Some(12), ..flags(1) };
        assert!(matches!(ExperimentConfig::resolve(&none, &alias), Err(Error::Config(m)) if m.starts_with("nx")));
        let err = ConfigOverrides::from_json("{\n  \"qubits\": 4,\n  \"bogus\": 1\n}").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn small_run_produces_consistent_reports() {
        let cfg = ExperimentConfig {
            qubits: 2,
            depths: vec![1, 2],
            samples: 400,
            nx: Some(8),
            ..ExperimentConfig::desk(Family::YzyEnt, Axis::X, 11)
        };
        let reports = run(&cfg).unwrap();
        let v = reports.variance.as_ref().unwrap();
        assert_eq!(v.depths.len(), 2);
        assert_eq!(v.depths[0].splits.c, [0, 200]);
        assert_eq!(v.depths[0].splits.mc, [200, 400]);
        let c = reports.correlation.as_ref().unwrap();
        assert!(c.depths[1].eps_f_prev_depth_mc.is_some());
        let dir = tempfile::tempdir().unwrap();
        let paths = reports.write(dir.path()).unwrap();
        assert_eq!(paths.len(), 3);
        assert!(dir.path().join("variance_d1.csv").exists());
        assert!(dir.path().join("corr_mc_d2.json").exists());
        assert!(dir.path().join("c_hat_d1_nx8.json").exists());
        let text = std::fs::read_to_string(&paths[0]).unwrap();
        assert!(!text.contains("threads"));
        let back = MatrixFile::read(&dir.path().join("corr_c_d1.json")).unwrap();
        assert_eq!(back.kind, "corr");
    }
}
