//! Parallel Monte Carlo, z-score checks and the scaling-limit experiment.
//!
//! Replicas are split into `streams` contiguous blocks; block `s` draws only
//! from substream `s` of the master seed and accumulates its own running
//! moments. Blocks are merged in index order, so the result does not depend
//! on the thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::chain::{ChainSpec, GasSampler};
use crate::dualities::falling_factorial_f64;
use crate::error::{ensure, Result};
use crate::interval::{self, BdbgSampler, HeatKernelConfig};
use crate::quadrature;
use crate::rng::{stream, StreamRng};
use crate::types::{ContinuumConfiguration, DiscreteConfiguration, Estimate, KernelValue, ReservoirParams};

/// Two-sided tail mass of a 3-sigma z-test.
pub const THREE_SIGMA_ALPHA: f64 = 0.0027;

/// Running mean and centred second moment.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub n: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    /// Pairwise combination of two disjoint blocks.
    pub fn merge(&self, other: &Moments) -> Moments {
        if self.n == 0 {
            return *other;
        }
        if other.n == 0 {
            return *self;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        let w = other.n as f64 / n as f64;
        Moments {
            n,
            mean: self.mean + d * w,
            m2: self.m2 + other.m2 + d * d * self.n as f64 * w,
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        (self.m2.max(0.0) / (self.n - 1) as f64 / self.n as f64).sqrt()
    }
}

/// Deterministic 64-bit mix used to derive independent seeds for the sides
/// of a comparison.
pub fn derive_seed(seed: u64, label: u64) -> u64 {
    let mut z = seed ^ label.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn block_sizes(n: u64, streams: u64) -> Vec<u64> {
    (0..streams)
        .map(|s| n / streams + u64::from(s < n % streams))
        .collect()
}

/// Monte Carlo estimates of `k` statistics computed jointly from each
/// replica. `replica` fills its output slice with one value per statistic.
pub fn run_mc_multi<F>(n: u64, seed: u64, streams: u64, k: usize, replica: F) -> Result<Vec<Estimate>>
where
    F: Fn(&mut StreamRng, &mut [f64]) -> Result<()> + Sync,
{
    ensure(n >= 2, || format!("need at least two samples, got {n}"))?;
    ensure(streams >= 1 && streams <= n, || format!("stream count {streams} must lie in 1..={n}"))?;
    let blocks = block_sizes(n, streams)
        .into_par_iter()
        .enumerate()
        .map(|(s, size)| {
            let mut rng = stream(seed, s as u64);
            let mut acc = vec![Moments::default(); k];
            let mut out = vec![0.0; k];
            for _ in 0..size {
                replica(&mut rng, &mut out)?;
                for (m, &x) in acc.iter_mut().zip(&out) {
                    m.push(x);
                }
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total = vec![Moments::default(); k];
    for block in &blocks {
        for (t, b) in total.iter_mut().zip(block) {
            *t = t.merge(b);
        }
    }
    Ok(total
        .iter()
        .map(|m| Estimate {
            mean: m.mean,
            stderr: m.stderr(),
            n_samples: m.n,
            seed,
            stream_count: streams,
        })
        .collect())
}

/// Monte Carlo estimate of `E[statistic(X)]` for replicas `X` drawn by `sampler`.
pub fn run_mc<T, S, G>(sampler: S, statistic: G, n: u64, seed: u64, streams: u64) -> Result<Estimate>
where
    S: Fn(&mut StreamRng) -> Result<T> + Sync,
    G: Fn(&T) -> f64 + Sync,
{
    let est = run_mc_multi(n, seed, streams, 1, |rng, out| {
        out[0] = statistic(&sampler(rng)?);
        Ok(())
    })?;
    Ok(est[0])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckMode {
    /// `pass <=> |z| <= z_max` with `z` in standard errors.
    Statistical,
    /// `pass <=> |observed - expected| <= tol`; `z` is the difference in units of `tol`.
    Deterministic,
    /// `pass <=> observed <= expected`; `z` is the signed excess `observed - expected`.
    Bound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub observed: f64,
    pub expected: f64,
    pub stderr: f64,
    pub z_score: f64,
    pub pass: bool,
    pub n_samples: u64,
    pub seed: u64,
    pub mode: CheckMode,
    /// Threshold used for `pass`: `z_max` or the absolute tolerance.
    pub threshold: f64,
    /// Deliberately corrupted comparison that must fail.
    #[serde(default)]
    pub negative_control: bool,
}

fn z_of(diff: f64, scale: f64) -> f64 {
    if diff == 0.0 {
        0.0
    } else if scale > 0.0 {
        diff / scale
    } else {
        diff.signum() * f64::INFINITY
    }
}

impl CheckReport {
    /// Monte Carlo estimate against a deterministic value whose own error
    /// `expected.trunc_error_bound` is granted before the z-score is formed.
    pub fn duality(name: impl Into<String>, mc: &Estimate, expected: KernelValue, z_max: f64) -> Self {
        let diff = mc.mean - expected.value;
        let slack = (diff.abs() - expected.trunc_error_bound).max(0.0);
        let z = z_of(diff.signum() * slack, mc.stderr);
        Self {
            name: name.into(),
            observed: mc.mean,
            expected: expected.value,
            stderr: mc.stderr,
            z_score: z,
            pass: z.abs() <= z_max,
            n_samples: mc.n_samples,
            seed: mc.seed,
            mode: CheckMode::Statistical,
            threshold: z_max,
            negative_control: false,
        }
    }

    pub fn statistical(name: impl Into<String>, mc: &Estimate, expected: f64, z_max: f64) -> Self {
        Self::duality(name, mc, KernelValue::exact(expected), z_max)
    }

    /// Two independent estimates of the same quantity.
    pub fn equivalence(name: impl Into<String>, a: &Estimate, b: &Estimate, z_max: f64) -> Self {
        let se = (a.stderr * a.stderr + b.stderr * b.stderr).sqrt();
        let z = z_of(a.mean - b.mean, se);
        Self {
            name: name.into(),
            observed: a.mean,
            expected: b.mean,
            stderr: se,
            z_score: z,
            pass: z.abs() <= z_max,
            n_samples: a.n_samples.min(b.n_samples),
            seed: a.seed,
            mode: CheckMode::Statistical,
            threshold: z_max,
            negative_control: false,
        }
    }

    pub fn deterministic(name: impl Into<String>, observed: f64, expected: f64, tol: f64) -> Self {
        let diff = observed - expected;
        Self {
            name: name.into(),
            observed,
            expected,
            stderr: 0.0,
            z_score: z_of(diff, tol),
            pass: diff.abs() <= tol,
            n_samples: 0,
            seed: 0,
            mode: CheckMode::Deterministic,
            threshold: tol,
            negative_control: false,
        }
    }

    /// One-sided deterministic check `observed <= bound`.
    pub fn upper_bound(name: impl Into<String>, observed: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            observed,
            expected: bound,
            stderr: 0.0,
            z_score: observed - bound,
            pass: observed <= bound,
            n_samples: 0,
            seed: 0,
            mode: CheckMode::Bound,
            threshold: bound,
            negative_control: false,
        }
    }

    /// A copy of this comparison with the expected side moved by ten units of
    /// its own scale (standard errors or tolerance), marked as a negative
    /// control. A working harness must fail it.
    pub fn corrupted(&self) -> Self {
        let mut c = self.clone();
        match self.mode {
            CheckMode::Statistical => {
                let scale = if self.stderr > 0.0 { self.stderr } else { self.expected.abs().max(1.0) };
                c.expected += 10.0 * scale;
                c.z_score = z_of(c.observed - c.expected, self.stderr);
                c.pass = c.z_score.abs() <= c.threshold;
            }
            CheckMode::Deterministic => {
                c.expected += 10.0 * self.threshold;
                c.z_score = z_of(c.observed - c.expected, self.threshold);
                c.pass = (c.observed - c.expected).abs() <= c.threshold;
            }
            CheckMode::Bound => {
                c.expected = self.observed - 1.0 - self.observed.abs();
                c.threshold = c.expected;
                c.z_score = c.observed - c.expected;
                c.pass = false;
            }
        }
        c.as_negative_control()
    }

    /// Marks the report as a negative control.
    pub fn as_negative_control(mut self) -> Self {
        self.negative_control = true;
        self.name = format!("negative-control/{}", self.name);
        self
    }
}

/// Factorial moments `E[(X)_k] = lambda^k`, `k = 1, 2, 3`, of observed counts.
pub fn poissonity_check(name: &str, counts: &[u64], mean: f64, z_max: f64, seed: u64) -> Vec<CheckReport> {
    (1..=3u64)
        .map(|k| {
            let mut m = Moments::default();
            for &c in counts {
                m.push(falling_factorial_f64(c, k));
            }
            let est = Estimate {
                mean: m.mean,
                stderr: m.stderr(),
                n_samples: m.n,
                seed,
                stream_count: 1,
            };
            CheckReport::statistical(format!("{name}/factorial-moment-{k}"), &est, mean.powi(k as i32), z_max)
        })
        .collect()
}

/// As [`poissonity_check`], on jointly estimated factorial moments.
pub fn poissonity_from_estimates(name: &str, moments: &[Estimate], mean: f64, z_max: f64) -> Vec<CheckReport> {
    moments
        .iter()
        .enumerate()
        .map(|(i, est)| {
            let k = i as i32 + 1;
            CheckReport::statistical(format!("{name}/factorial-moment-{k}"), est, mean.powi(k), z_max)
        })
        .collect()
}

pub fn duality_check(name: &str, side_mc: &Estimate, side_exact: KernelValue, z_max: f64) -> CheckReport {
    CheckReport::duality(name, side_mc, side_exact, z_max)
}

/// Critical `|z|` that keeps the family-wise false-failure rate of `k`
/// two-sided tests at `alpha`.
pub fn bonferroni_z(k: usize, alpha: f64) -> f64 {
    let k = k.max(1) as f64;
    Normal::standard().inverse_cdf(1.0 - alpha / (2.0 * k))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteVerdict {
    pub name: String,
    pub statistical_checks: usize,
    pub deterministic_checks: usize,
    /// Statistical checks outside their own `z_max`.
    pub individual_failures: usize,
    pub bonferroni_z: f64,
    pub bonferroni_pass: bool,
    pub deterministic_pass: bool,
    /// Every negative control failed, as it must.
    pub negative_controls_failed: bool,
    pub pass: bool,
    pub max_abs_z: f64,
}

/// Suite gate: deterministic checks must each pass, statistical checks must
/// all lie within the Bonferroni bound of the family, and every negative
/// control must fail. Negative controls make the suite itself fail, so a
/// run with them enabled exits non-zero exactly when the harness works.
pub fn suite_verdict(name: &str, reports: &[CheckReport]) -> SuiteVerdict {
    let regular: Vec<&CheckReport> = reports.iter().filter(|r| !r.negative_control).collect();
    let controls: Vec<&CheckReport> = reports.iter().filter(|r| r.negative_control).collect();
    let stats: Vec<&&CheckReport> = regular.iter().filter(|r| r.mode == CheckMode::Statistical).collect();
    let zb = bonferroni_z(stats.len(), THREE_SIGMA_ALPHA);
    let max_abs_z = stats.iter().map(|r| r.z_score.abs()).fold(0.0, f64::max);
    let bonferroni_pass = stats.iter().all(|r| r.z_score.abs() <= zb);
    let deterministic_pass = regular
        .iter()
        .filter(|r| r.mode != CheckMode::Statistical)
        .all(|r| r.pass);
    let negative_controls_failed = controls.iter().all(|r| !r.pass);
    SuiteVerdict {
        name: name.to_string(),
        statistical_checks: stats.len(),
        deterministic_checks: regular.len() - stats.len(),
        individual_failures: stats.iter().filter(|r| !r.pass).count(),
        bonferroni_z: zb,
        bonferroni_pass,
        deterministic_pass,
        negative_controls_failed,
        pass: bonferroni_pass && deterministic_pass && controls.is_empty(),
        max_abs_z,
    }
}

/// Rescaled chain site `i -> i / N` falls in bin `(a, b]`.
fn bin_of(edges: &[f64], x: f64) -> Option<usize> {
    (0..edges.len() - 1).find(|&b| x > edges[b] && x <= edges[b + 1])
}

/// Initial condition of the scaling experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalingStart {
    Empty,
    /// One particle at macroscopic position `x0`, i.e. chain site `round(x0 N)`.
    Point(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub n_sites: usize,
    /// `max_i |N lambda^N_{t N^2}(i) - lambda(t, i / N)|`.
    pub intensity_max_error: f64,
    /// Per statistic: bin means, then bin second factorial moments.
    pub labels: Vec<String>,
    pub chain_exact: Vec<f64>,
    pub mc: Vec<Estimate>,
    pub reference: Vec<f64>,
    /// `max_j |chain_exact - reference|`.
    pub exact_discrepancy: f64,
    /// `max_j |mc - reference|`.
    pub mc_discrepancy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingTable {
    pub t: f64,
    pub bins: Vec<f64>,
    pub start: ScalingStart,
    pub rows: Vec<ScalingRow>,
}

/// Continuum reference moments of bin counts: means and second factorial
/// moments, from the first two dual densities.
fn bdbg_bin_moments(t: f64, p: &ReservoirParams, edges: &[f64], start: ScalingStart, cfg: &HeatKernelConfig) -> Result<(Vec<f64>, Vec<f64>)> {
    let eta0 = match start {
        ScalingStart::Empty => ContinuumConfiguration::empty(),
        ScalingStart::Point(x) => ContinuumConfiguration::new(vec![x])?,
    };
    let mut means = Vec::new();
    let mut second = Vec::new();
    for b in 0..edges.len() - 1 {
        let (lo, hi) = (edges[b], edges[b + 1]);
        let inj = quadrature::integrate(&|z: f64| interval::gas_intensity(z, t, p, cfg).unwrap_or(0.0), lo, hi, 1e-11);
        let evolved: Vec<f64> = eta0
            .positions
            .iter()
            .map(|&x| quadrature::integrate(&|z: f64| interval::abs_density(x, z, t, cfg).map(|k| k.value).unwrap_or(0.0), lo, hi, 1e-11))
            .collect();
        let mean = inj + evolved.iter().sum::<f64>();
        // Poisson part plus independent Bernoulli parts: E[(X)_2] = E[X]^2 - sum p_j^2
        means.push(mean);
        second.push(mean * mean - evolved.iter().map(|q| q * q).sum::<f64>());
    }
    Ok((means, second))
}

/// Diffusive scaling of the chain gas towards the Brownian gas.
///
/// For each `N` the chain runs with reservoir rates `lambda / N` up to time
/// `t N^2`, sites are placed at `i / N`, and bin-count means and second
/// factorial moments are compared with the continuum references.
#[allow(clippy::too_many_arguments)]
pub fn scaling_experiment(
    n_list: &[usize],
    t: f64,
    p: &ReservoirParams,
    bins: &[f64],
    start: ScalingStart,
    n: u64,
    seed: u64,
    streams: u64,
    cfg: &HeatKernelConfig,
) -> Result<ScalingTable> {
    ensure(bins.len() >= 2 && bins[0] == 0.0 && bins[bins.len() - 1] == 1.0, || {
        "scaling bins must partition (0, 1]".into()
    })?;
    ensure(bins.windows(2).all(|w| w[0] < w[1]), || "bin edges must increase".into())?;
    ensure(t > 0.0, || "scaling time must be positive".into())?;
    let n_bins = bins.len() - 1;
    let (ref_mean, ref_second) = bdbg_bin_moments(t, p, bins, start, cfg)?;
    let mut labels: Vec<String> = (0..n_bins).map(|b| format!("mean/bin{b}")).collect();
    labels.extend((0..n_bins).map(|b| format!("factorial2/bin{b}")));
    let reference: Vec<f64> = ref_mean.iter().chain(&ref_second).copied().collect();
    let mut rows = Vec::new();
    for (idx, &size) in n_list.iter().enumerate() {
        ensure(size >= 8, || format!("scaling needs N >= 8, got {size}"))?;
        let spec = ChainSpec::new(size, p.scaled(size as f64))?;
        let micro_t = t * (size * size) as f64;
        let sampler = GasSampler::new(&spec, micro_t)?;
        let nf = size as f64;
        let intensity_max_error = (1..=size)
            .map(|i| {
                let x = i as f64 / nf;
                let cont = if x < 1.0 { interval::gas_intensity(x, t, p, cfg).unwrap_or(0.0) } else { p.lambda_right };
                (nf * sampler.intensity[i - 1] - cont).abs()
            })
            .fold(0.0, f64::max);
        let site_bin: Vec<Option<usize>> = (1..=size).map(|i| bin_of(bins, i as f64 / nf)).collect();
        let eta0 = match start {
            ScalingStart::Empty => DiscreteConfiguration::empty(size),
            ScalingStart::Point(x0) => {
                let site = ((x0 * nf).round() as usize).clamp(1, size);
                DiscreteConfiguration::from_sites(size, &[site])?
            }
        };
        // exact chain moments from the same construction
        let mut lam_bin = vec![0.0; n_bins];
        let mut walk_bin = vec![vec![0.0; n_bins]; eta0.interior_mass() as usize];
        for i in 1..=size {
            if let Some(b) = site_bin[i - 1] {
                lam_bin[b] += sampler.intensity[i - 1];
                for (j, &x) in eta0.particle_sites().iter().enumerate() {
                    walk_bin[j][b] += sampler.table.get(x, i);
                }
            }
        }
        let mut chain_exact: Vec<f64> = (0..n_bins)
            .map(|b| lam_bin[b] + walk_bin.iter().map(|w| w[b]).sum::<f64>())
            .collect();
        let second: Vec<f64> = (0..n_bins)
            .map(|b| chain_exact[b] * chain_exact[b] - walk_bin.iter().map(|w| w[b] * w[b]).sum::<f64>())
            .collect();
        chain_exact.extend(second);
        let mc = run_mc_multi(n, derive_seed(seed, idx as u64), streams, 2 * n_bins, |rng, out| {
            let eta = sampler.sample(&eta0, rng)?;
            let mut counts = vec![0u64; n_bins];
            for (i, &c) in eta.counts.iter().enumerate() {
                if let Some(b) = site_bin[i] {
                    counts[b] += c;
                }
            }
            for b in 0..n_bins {
                out[b] = counts[b] as f64;
                out[n_bins + b] = falling_factorial_f64(counts[b], 2);
            }
            Ok(())
        })?;
        let exact_discrepancy = chain_exact
            .iter()
            .zip(&reference)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let mc_discrepancy = mc
            .iter()
            .zip(&reference)
            .map(|(a, b)| (a.mean - b).abs())
            .fold(0.0, f64::max);
        rows.push(ScalingRow {
            n_sites: size,
            intensity_max_error,
            labels: labels.clone(),
            chain_exact,
            mc,
            reference: reference.clone(),
            exact_discrepancy,
            mc_discrepancy,
        });
    }
    Ok(ScalingTable {
        t,
        bins: bins.to_vec(),
        start,
        rows,
    })
}

/// Site-count means and second factorial moments of a discrete configuration.
fn site_moments(eta: &DiscreteConfiguration, out: &mut [f64]) {
    let n = eta.n_sites();
    for (i, &c) in eta.counts.iter().enumerate() {
        out[i] = c as f64;
        out[n + i] = falling_factorial_f64(c, 2);
    }
}

fn bin_moments(eta: &ContinuumConfiguration, edges: &[f64], out: &mut [f64]) {
    let k = edges.len() - 1;
    for b in 0..k {
        let c = eta.count_in(edges[b], edges[b + 1]);
        out[b] = c as f64;
        out[k + b] = falling_factorial_f64(c, 2);
    }
}

/// Operational Chapman–Kolmogorov for the discrete gas: `eta_{s+t}` drawn in
/// one shot versus drawn to time `s` and restarted for time `t`, compared
/// through site means and second factorial moments.
pub fn ck_check_gas_discrete(
    eta0: &DiscreteConfiguration,
    s: f64,
    t: f64,
    spec: &ChainSpec,
    n: u64,
    seed: u64,
    streams: u64,
    z_max: f64,
) -> Result<Vec<CheckReport>> {
    let k = 2 * spec.n_sites;
    let one = GasSampler::new(spec, s + t)?;
    let first = GasSampler::new(spec, s)?;
    let second = GasSampler::new(spec, t)?;
    let a = run_mc_multi(n, derive_seed(seed, 1), streams, k, |rng, out| {
        site_moments(&one.sample(eta0, rng)?, out);
        Ok(())
    })?;
    let b = run_mc_multi(n, derive_seed(seed, 2), streams, k, |rng, out| {
        let mid = first.sample(eta0, rng)?.restrict_interior();
        site_moments(&second.sample(&mid, rng)?, out);
        Ok(())
    })?;
    Ok(compare_moment_sets("ck-discrete", "site", spec.n_sites, &a, &b, z_max))
}

/// Continuum version of [`ck_check_gas_discrete`] on bin counts.
#[allow(clippy::too_many_arguments)]
pub fn ck_check_gas_continuum(
    eta0: &ContinuumConfiguration,
    s: f64,
    t: f64,
    p: &ReservoirParams,
    edges: &[f64],
    cfg: &HeatKernelConfig,
    n: u64,
    seed: u64,
    streams: u64,
    z_max: f64,
) -> Result<Vec<CheckReport>> {
    let k = 2 * (edges.len() - 1);
    let one = BdbgSampler::new(s + t, p, cfg)?;
    let first = BdbgSampler::new(s, p, cfg)?;
    let second = BdbgSampler::new(t, p, cfg)?;
    let a = run_mc_multi(n, derive_seed(seed, 1), streams, k, |rng, out| {
        bin_moments(&one.sample(eta0, rng)?, edges, out);
        Ok(())
    })?;
    let b = run_mc_multi(n, derive_seed(seed, 2), streams, k, |rng, out| {
        let mid = first.sample(eta0, rng)?.restrict_interior();
        bin_moments(&second.sample(&mid, rng)?, edges, out);
        Ok(())
    })?;
    Ok(compare_moment_sets("ck-continuum", "bin", edges.len() - 1, &a, &b, z_max))
}

fn compare_moment_sets(prefix: &str, unit: &str, m: usize, a: &[Estimate], b: &[Estimate], z_max: f64) -> Vec<CheckReport> {
    (0..2 * m)
        .map(|j| {
            let (what, i) = if j < m { ("mean", j) } else { ("factorial2", j - m) };
            CheckReport::equivalence(format!("{prefix}/{unit}{}/{what}", i + 1), &a[j], &b[j], z_max)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn constant_statistic() {
        let e = run_mc(|_| Ok(2.5), |x: &f64| *x, 1000, 1, 4).unwrap();
        assert_eq!(e.mean, 2.5);
        assert_eq!(e.stderr, 0.0);
        assert_eq!(e.n_samples, 1000);
    }

    #[test]
    fn bernoulli_mean() {
        let n = 100_000;
        let e = run_mc(|rng| Ok(rng.random::<bool>()), |&b| f64::from(u8::from(b)), n, 9, 8).unwrap();
        assert!(((e.mean - 0.5) / (0.5 / (n as f64).sqrt())).abs() < 4.0);
    }

    #[test]
    fn reproducible_and_thread_independent() {
        let f = |rng: &mut StreamRng| Ok(rng.random::<f64>().powi(2));
        let a = run_mc(f, |x| *x, 10_001, 42, 7).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| run_mc(f, |x| *x, 10_001, 42, 7).unwrap());
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
    }

    #[test]
    fn stderr_halves_when_samples_quadruple() {
        let f = |rng: &mut StreamRng| Ok(rng.random::<f64>());
        let a = run_mc(f, |x| *x, 20_000, 3, 4).unwrap();
        let b = run_mc(f, |x| *x, 80_000, 4, 4).unwrap();
        let ratio = a.stderr / b.stderr;
        assert!((ratio / 2.0 - 1.0).abs() < 0.2, "{ratio}");
    }

    #[test]
    fn merge_matches_single_pass() {
        let xs: Vec<f64> = (0..50).map(|i| ((i * 37) % 11) as f64 * 0.3).collect();
        let mut whole = Moments::default();
        xs.iter().for_each(|&x| whole.push(x));
        let (mut a, mut b) = (Moments::default(), Moments::default());
        xs[..17].iter().for_each(|&x| a.push(x));
        xs[17..].iter().for_each(|&x| b.push(x));
        let m = a.merge(&b);
        assert!((m.mean - whole.mean).abs() < 1e-13);
        assert!((m.m2 - whole.m2).abs() < 1e-11);
    }

    #[test]
    fn poissonity_examples() {
        let zeros = vec![0u64; 100];
        assert!(poissonity_check("zero", &zeros, 0.0, 3.0, 0).iter().all(|r| r.pass && r.z_score == 0.0));
        let ones = vec![1u64; 100];
        let r = poissonity_check("ones", &ones, 1.0, 3.0, 0);
        assert!(r[0].pass);
        assert!(!r[1].pass);
    }

    #[test]
    fn duality_check_uses_truncation_bound() {
        let est = Estimate { mean: 1.0, stderr: 0.01, n_samples: 100, seed: 0, stream_count: 1 };
        assert_eq!(duality_check("eq", &est, KernelValue::exact(1.0), 3.0).z_score, 0.0);
        let r = duality_check("slack", &est, KernelValue::new(1.05, 0.04), 3.0);
        assert!((r.z_score + 1.0).abs() < 1e-9);
        let bad = duality_check("bad", &est, KernelValue::exact(1.0 + 10.0 * 0.01), 3.0);
        assert!(!bad.pass);
    }

    #[test]
    fn bonferroni_levels() {
        assert!((bonferroni_z(1, THREE_SIGMA_ALPHA) - 3.0).abs() < 1e-3);
        assert!(bonferroni_z(100, THREE_SIGMA_ALPHA) > 4.0);
    }

    #[test]
    fn suite_with_control_fails() {
        let est = Estimate { mean: 1.0, stderr: 0.01, n_samples: 100, seed: 0, stream_count: 1 };
        let ok = CheckReport::statistical("a", &est, 1.0, 3.0);
        let ctl = CheckReport::statistical("a", &est, 1.1, 3.0).as_negative_control();
        let v = suite_verdict("s", std::slice::from_ref(&ok));
        assert!(v.pass);
        let v = suite_verdict("s", &[ok, ctl]);
        assert!(!v.pass && v.negative_controls_failed);
    }
}
