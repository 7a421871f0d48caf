//! Per-kind experiment parameters. Every field has a default so configs
//! only spell out what they change; unknown keys are rejected.

use serde::{Deserialize, Serialize};

use super::ExperimentConfig;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Experiment {
    KernelCheck(KernelCheck),
    DualityDiscrete(DualityDiscrete),
    DualityContinuum(DualityContinuum),
    Equivalence(DualityDiscrete),
    Stationary(Stationary),
    Doob(Doob),
    Scaling(Scaling),
    Orthogonality(Orthogonality),
    CkCheck(CkCheck),
    Simulate(Simulate),
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::KernelCheck(_) => "kernel-check",
            Experiment::DualityDiscrete(_) => "duality-discrete",
            Experiment::DualityContinuum(_) => "duality-continuum",
            Experiment::Equivalence(_) => "equivalence",
            Experiment::Stationary(_) => "stationary",
            Experiment::Doob(_) => "doob",
            Experiment::Scaling(_) => "scaling",
            Experiment::Orthogonality(_) => "orthogonality",
            Experiment::CkCheck(_) => "ck-check",
            Experiment::Simulate(_) => "simulate",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelCheck {
    /// Chain lengths for the transition-table identities.
    pub chain_sizes: Vec<usize>,
    pub chain_times: Vec<f64>,
    /// Random `(N, s, t)` triples for Chapman–Kolmogorov, `N <= 32`, `s, t <= 5`.
    pub chain_ck_cases: usize,
    /// Random `(N, s, t)` triples for the intensity semigroup, `N <= 16`.
    pub chain_semigroup_cases: usize,
    /// Random `(x, t)` points for conservation of mass.
    pub conservation_cases: usize,
    /// Random `(x, y, s, t)` for the continuum Chapman–Kolmogorov identity.
    pub continuum_ck_cases: usize,
    /// Random `(y, s, t)` for the continuum intensity semigroup.
    pub continuum_semigroup_cases: usize,
    pub lambda_left: f64,
    pub lambda_right: f64,
    pub tol_stochastic: f64,
    pub tol_chain_ck: f64,
    pub tol_chain_semigroup: f64,
    pub tol_conservation: f64,
    pub tol_continuum_ck: f64,
    pub tol_continuum_semigroup: f64,
}

impl Default for KernelCheck {
    fn default() -> Self {
        Self {
            chain_sizes: vec![1, 2, 5, 16, 32],
            chain_times: vec![0.1, 0.5, 1.0, 2.5, 5.0],
            chain_ck_cases: 20,
            chain_semigroup_cases: 20,
            conservation_cases: 40,
            continuum_ck_cases: 15,
            continuum_semigroup_cases: 15,
            lambda_left: 1.0,
            lambda_right: 2.0,
            tol_stochastic: 1e-12,
            tol_chain_ck: 1e-9,
            tol_chain_semigroup: 1e-10,
            tol_conservation: 1e-8,
            tol_continuum_ck: 1e-7,
            tol_continuum_semigroup: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DualityDiscrete {
    pub n_sites: usize,
    pub lambda_left: f64,
    pub lambda_right: f64,
    pub times: Vec<f64>,
    pub initial: Vec<i64>,
    /// Largest total dual mass (interior plus tallies).
    pub max_dual: u64,
    /// Largest number of distinct interior sites carrying dual mass.
    pub max_support: usize,
    /// Largest tally at each absorbing site.
    pub max_absorbed: u64,
}

impl Default for DualityDiscrete {
    fn default() -> Self {
        Self {
            n_sites: 5,
            lambda_left: 1.0,
            lambda_right: 2.0,
            times: vec![0.3, 0.7, 2.0],
            initial: vec![2, 0, 1, 0, 3],
            max_dual: 3,
            max_support: 2,
            max_absorbed: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DualityContinuum {
    pub lambda_left: f64,
    pub lambda_right: f64,
    pub times: Vec<f64>,
    pub initial_sets: Vec<Vec<f64>>,
    /// Two disjoint boxes `(a, b]`.
    pub boxes: Vec<[f64; 2]>,
    pub quad_tol: f64,
}

impl Default for DualityContinuum {
    fn default() -> Self {
        Self {
            lambda_left: 1.0,
            lambda_right: 2.0,
            times: vec![0.1, 0.5],
            initial_sets: vec![vec![], vec![0.3], vec![0.3, 0.7]],
            boxes: vec![[0.2, 0.4], [0.6, 0.9]],
            quad_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Stationary {
    pub lambda_left: f64,
    pub lambda_right: f64,
    /// Time at which the gas started from its stationary law is inspected.
    pub t_stationary: f64,
    pub bins: Vec<f64>,
    /// Times for the relaxation from `initial`.
    pub times: Vec<f64>,
    pub initial: Vec<f64>,
    /// Relative bin-mean discrepancy allowed at the last time.
    pub rel_tol: f64,
}

impl Default for Stationary {
    fn default() -> Self {
        Self {
            lambda_left: 1.0,
            lambda_right: 2.0,
            t_stationary: 1.0,
            bins: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            times: vec![0.5, 1.0, 2.0, 4.0],
            initial: vec![0.2, 0.5, 0.8],
            rel_tol: 0.02,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Doob {
    pub n_sites: usize,
    pub theta: f64,
    pub t: f64,
    /// Continuum part: gas with these reservoirs started from a Poisson
    /// process of constant density `rho`.
    pub continuum_lambda: [f64; 2],
    pub continuum_rho: f64,
    pub continuum_t: f64,
    pub bins: Vec<f64>,
}

impl Default for Doob {
    fn default() -> Self {
        Self {
            n_sites: 5,
            theta: 1.5,
            t: 1.0,
            continuum_lambda: [1.0, 2.0],
            continuum_rho: 0.5,
            continuum_t: 0.3,
            bins: vec![0.0, 0.25, 0.5, 0.75, 1.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalingStartConfig {
    Empty,
    Point,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Scaling {
    pub lambda_left: f64,
    pub lambda_right: f64,
    pub t: f64,
    pub n_list: Vec<usize>,
    pub bins: Vec<f64>,
    pub start: ScalingStartConfig,
    pub x0: f64,
    /// Final-N relative error allowed for the deterministic intensity.
    pub intensity_rel_tol: f64,
}

impl Default for Scaling {
    fn default() -> Self {
        Self {
            lambda_left: 1.0,
            lambda_right: 2.0,
            t: 0.1,
            n_list: vec![32, 64, 128],
            bins: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            start: ScalingStartConfig::Point,
            x0: 0.5,
            intensity_rel_tol: 0.02,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Orthogonality {
    pub theta: f64,
    pub boxes: Vec<[f64; 2]>,
    /// Time of the equilibrium continuum gas.
    pub t: f64,
    pub n_sites: usize,
    pub chain_lambda: [f64; 2],
    pub chain_t: f64,
    pub chain_initial: Vec<i64>,
    /// Exhaustive subset-expansion inputs: chains up to this length ...
    pub exhaustive_sites: usize,
    /// ... occupations up to this value ...
    pub exhaustive_count: u64,
    /// ... and dual mass up to this value.
    pub exhaustive_dual: u64,
}

impl Default for Orthogonality {
    fn default() -> Self {
        Self {
            theta: 1.5,
            boxes: vec![[0.1, 0.4], [0.5, 0.8]],
            t: 0.5,
            n_sites: 3,
            chain_lambda: [2.5, 0.5],
            chain_t: 0.7,
            chain_initial: vec![1, 0, 2],
            exhaustive_sites: 3,
            exhaustive_count: 3,
            exhaustive_dual: 4,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CkCheck {
    pub n_sites: usize,
    pub lambda_left: f64,
    pub lambda_right: f64,
    pub s: f64,
    pub t: f64,
    pub initial: Vec<i64>,
    pub continuum_initial: Vec<f64>,
    pub bins: Vec<f64>,
}

impl Default for CkCheck {
    fn default() -> Self {
        Self {
            n_sites: 4,
            lambda_left: 1.0,
            lambda_right: 2.0,
            s: 0.5,
            t: 0.5,
            initial: vec![1, 0, 2, 1],
            continuum_initial: vec![0.3, 0.6],
            bins: vec![0.0, 0.25, 0.5, 0.75, 1.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Geometry {
    Chain,
    Interval,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Simulate {
    pub geometry: Geometry,
    /// Chain initial occupations (chain geometry).
    pub counts: Vec<i64>,
    /// Initial positions in `(0, 1)` (interval geometry).
    pub positions: Vec<f64>,
    pub lambda_left: f64,
    pub lambda_right: f64,
    pub t: f64,
    pub replicas: u64,
    /// Chain only: `reservoir` runs the event-driven process, `gas` the
    /// absorbed-plus-injected construction.
    pub method: SimulationMethod,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimulationMethod {
    Reservoir,
    Gas,
}

impl Default for Simulate {
    fn default() -> Self {
        Self {
            geometry: Geometry::Chain,
            counts: vec![1, 0, 2],
            positions: vec![0.5],
            lambda_left: 1.0,
            lambda_right: 2.0,
            t: 1.0,
            replicas: 10,
            method: SimulationMethod::Reservoir,
        }
    }
}

/// A semantic config error tied to the key that caused it.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationError {
    pub key: String,
    pub message: String,
}

fn fail(key: &str, message: impl Into<String>) -> std::result::Result<(), ValidationError> {
    Err(ValidationError {
        key: key.to_string(),
        message: message.into(),
    })
}

fn lambda(key: &str, v: f64) -> std::result::Result<(), ValidationError> {
    if !(v >= 0.0 && v.is_finite()) {
        return fail(key, format!("{key} must be a finite non-negative number, got {v}"));
    }
    Ok(())
}

fn positive(key: &str, v: f64) -> std::result::Result<(), ValidationError> {
    if !(v > 0.0 && v.is_finite()) {
        return fail(key, format!("{key} must be positive, got {v}"));
    }
    Ok(())
}

fn times(key: &str, v: &[f64]) -> std::result::Result<(), ValidationError> {
    if v.is_empty() {
        return fail(key, format!("{key} must not be empty"));
    }
    for &t in v {
        positive(key, t)?;
    }
    Ok(())
}

fn counts(key: &str, v: &[i64], n_sites: usize) -> std::result::Result<(), ValidationError> {
    if v.len() != n_sites {
        return fail(key, format!("{key} has {} entries, expected n_sites = {n_sites}", v.len()));
    }
    if let Some(c) = v.iter().find(|&&c| c < 0) {
        return fail(key, format!("{key} contains negative occupation {c}"));
    }
    Ok(())
}

fn points(key: &str, v: &[f64]) -> std::result::Result<(), ValidationError> {
    if let Some(x) = v.iter().find(|&&x| !(x > 0.0 && x < 1.0)) {
        return fail(key, format!("{key} contains {x}, outside (0, 1)"));
    }
    Ok(())
}

fn bins(key: &str, v: &[f64]) -> std::result::Result<(), ValidationError> {
    if v.len() < 2 || v[0] != 0.0 || v[v.len() - 1] != 1.0 || v.windows(2).any(|w| w[0] >= w[1]) {
        return fail(key, format!("{key} must be increasing edges from 0 to 1"));
    }
    Ok(())
}

fn boxes(key: &str, v: &[[f64; 2]]) -> std::result::Result<(), ValidationError> {
    if v.len() != 2 {
        return fail(key, format!("{key} must list exactly two boxes"));
    }
    for b in v {
        if !(0.0 <= b[0] && b[0] < b[1] && b[1] <= 1.0) {
            return fail(key, format!("{key} entry [{}, {}] is not a box inside [0, 1]", b[0], b[1]));
        }
    }
    if v[0][1] > v[1][0] && v[1][1] > v[0][0] {
        return fail(key, format!("{key} must be disjoint"));
    }
    Ok(())
}

fn sites(key: &str, n: usize) -> std::result::Result<(), ValidationError> {
    if n == 0 {
        return fail(key, "n_sites must be at least 1");
    }
    Ok(())
}

pub(super) fn validate(cfg: &ExperimentConfig) -> std::result::Result<(), ValidationError> {
    if cfg.mc.n_samples < 2 {
        return fail("n_samples", "n_samples must be at least 2");
    }
    if cfg.mc.streams == 0 || cfg.mc.streams > cfg.mc.n_samples {
        return fail("streams", "streams must lie between 1 and n_samples");
    }
    positive("z_max", cfg.mc.z_max)?;
    positive("tol", cfg.kernel.tol)?;
    positive("t_switch", cfg.kernel.t_switch)?;
    match &cfg.experiment {
        Experiment::KernelCheck(k) => {
            lambda("lambda_left", k.lambda_left)?;
            lambda("lambda_right", k.lambda_right)?;
            if k.chain_sizes.contains(&0) {
                return fail("chain_sizes", "chain sizes must be at least 1");
            }
            for &t in &k.chain_times {
                if !(t >= 0.0 && t.is_finite()) {
                    return fail("chain_times", format!("chain_times entry {t} is negative"));
                }
            }
        }
        Experiment::DualityDiscrete(d) | Experiment::Equivalence(d) => {
            sites("n_sites", d.n_sites)?;
            lambda("lambda_left", d.lambda_left)?;
            lambda("lambda_right", d.lambda_right)?;
            times("times", &d.times)?;
            counts("initial", &d.initial, d.n_sites)?;
            if d.max_dual == 0 || d.max_dual > 6 {
                return fail("max_dual", "max_dual must lie in 1..=6");
            }
        }
        Experiment::DualityContinuum(d) => {
            lambda("lambda_left", d.lambda_left)?;
            lambda("lambda_right", d.lambda_right)?;
            times("times", &d.times)?;
            for s in &d.initial_sets {
                points("initial_sets", s)?;
            }
            boxes("boxes", &d.boxes)?;
            positive("quad_tol", d.quad_tol)?;
        }
        Experiment::Stationary(s) => {
            lambda("lambda_left", s.lambda_left)?;
            lambda("lambda_right", s.lambda_right)?;
            if s.lambda_left + s.lambda_right <= 0.0 {
                return fail("lambda_left", "stationary suite needs a positive reservoir");
            }
            positive("t_stationary", s.t_stationary)?;
            bins("bins", &s.bins)?;
            times("times", &s.times)?;
            points("initial", &s.initial)?;
            positive("rel_tol", s.rel_tol)?;
        }
        Experiment::Doob(d) => {
            sites("n_sites", d.n_sites)?;
            positive("theta", d.theta)?;
            positive("t", d.t)?;
            lambda("continuum_lambda", d.continuum_lambda[0])?;
            lambda("continuum_lambda", d.continuum_lambda[1])?;
            lambda("continuum_rho", d.continuum_rho)?;
            positive("continuum_t", d.continuum_t)?;
            bins("bins", &d.bins)?;
        }
        Experiment::Scaling(s) => {
            lambda("lambda_left", s.lambda_left)?;
            lambda("lambda_right", s.lambda_right)?;
            positive("t", s.t)?;
            if s.n_list.is_empty() || s.n_list.iter().any(|&n| n < 8) {
                return fail("n_list", "n_list entries must be at least 8");
            }
            bins("bins", &s.bins)?;
            points("x0", &[s.x0])?;
            positive("intensity_rel_tol", s.intensity_rel_tol)?;
        }
        Experiment::Orthogonality(o) => {
            positive("theta", o.theta)?;
            boxes("boxes", &o.boxes)?;
            positive("t", o.t)?;
            sites("n_sites", o.n_sites)?;
            lambda("chain_lambda", o.chain_lambda[0])?;
            lambda("chain_lambda", o.chain_lambda[1])?;
            positive("chain_t", o.chain_t)?;
            counts("chain_initial", &o.chain_initial, o.n_sites)?;
            if o.exhaustive_sites == 0 || o.exhaustive_sites > 4 || o.exhaustive_dual > 4 {
                return fail("exhaustive_sites", "exhaustive inputs are limited to 4 sites and dual mass 4");
            }
        }
        Experiment::CkCheck(c) => {
            sites("n_sites", c.n_sites)?;
            lambda("lambda_left", c.lambda_left)?;
            lambda("lambda_right", c.lambda_right)?;
            if !(c.s >= 0.0) {
                return fail("s", "s must be non-negative");
            }
            positive("t", c.t)?;
            counts("initial", &c.initial, c.n_sites)?;
            points("continuum_initial", &c.continuum_initial)?;
            bins("bins", &c.bins)?;
        }
        Experiment::Simulate(s) => {
            lambda("lambda_left", s.lambda_left)?;
            lambda("lambda_right", s.lambda_right)?;
            if !(s.t >= 0.0 && s.t.is_finite()) {
                return fail("t", "t must be non-negative");
            }
            match s.geometry {
                Geometry::Chain => {
                    if s.counts.is_empty() {
                        return fail("counts", "counts must not be empty");
                    }
                    counts("counts", &s.counts, s.counts.len())?;
                }
                Geometry::Interval => points("positions", &s.positions)?,
            }
            if s.replicas == 0 {
                return fail("replicas", "replicas must be at least 1");
            }
        }
    }
    Ok(())
}
