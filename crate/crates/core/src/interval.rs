//! Absorbed standard Brownian motion on `[0, 1]` and the boundary driven
//! Brownian gas.
//!
//! The generator is `(1/2) d^2/dx^2`, so every spectral exponent reads
//! `k^2 pi^2 t / 2` and the free kernel has variance `t`.

use std::f64::consts::PI;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use serde::{Deserialize, Serialize};
use libm::erfc;

use crate::dualities::{check_cap, for_each_injective, DEFAULT_ENUMERATION_CAP};
use crate::error::{ensure, Error, Result};
use crate::quadrature;
use crate::rng::{open01, poisson, standard_normal};
use crate::types::{ContinuumConfiguration, KernelValue, ReservoirParams};

/// Default cap on the order of `dual_density`.
pub const DEFAULT_DENSITY_CAP: usize = 4;

const REJECTION_CAP: u32 = 10_000;
const FALLBACK_GRID: usize = 1 << 12;
const INTENSITY_QUAD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatKernelConfig {
    pub tol: f64,
    pub t_switch: f64,
}

impl Default for HeatKernelConfig {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            t_switch: 0.1,
        }
    }
}

impl HeatKernelConfig {
    pub fn new(tol: f64, t_switch: f64) -> Result<Self> {
        ensure(tol > 0.0, || format!("kernel tolerance must be positive, got {tol}"))?;
        ensure(t_switch > 0.0, || format!("t_switch must be positive, got {t_switch}"))?;
        Ok(Self { tol, t_switch })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbsorptionSplit {
    pub q0: f64,
    pub q1: f64,
    pub survive: f64,
    pub trunc_error_bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outcome {
    AbsorbedLeft,
    AbsorbedRight,
    Interior(f64),
}

fn gaussian(d: f64, t: f64) -> f64 {
    (-d * d / (2.0 * t)).exp() / (2.0 * PI * t).sqrt()
}

/// `sum_{j > k} c e^{-j^2 a}` bounded by a geometric series.
fn spectral_tail(k: usize, a: f64, c: f64) -> f64 {
    let j = (k + 1) as f64;
    c * (-j * j * a).exp() / (1.0 - (-(2.0 * j + 1.0) * a).exp())
}

fn check_time(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::NonPositiveTime(t));
    }
    Ok(())
}

/// `2 sum_k e^{-k^2 pi^2 t / 2} sin(k pi x) sin(k pi y)`.
pub fn abs_density_spectral(x: f64, y: f64, t: f64, tol: f64) -> KernelValue {
    let a = PI * PI * t / 2.0;
    let mut sum = 0.0;
    let mut k = 0;
    loop {
        k += 1;
        let kf = k as f64;
        let decay = (-kf * kf * a).exp();
        sum += 2.0 * decay * (kf * PI * x).sin() * (kf * PI * y).sin();
        if 2.0 * decay < tol {
            break;
        }
    }
    KernelValue::new(sum, spectral_tail(k, a, 2.0))
}

/// `sum_k [phi_t(y - x + 2k) - phi_t(y + x + 2k)]`.
pub fn abs_density_images(x: f64, y: f64, t: f64, tol: f64) -> KernelValue {
    let term = |k: f64| gaussian(y - x + 2.0 * k, t) - gaussian(y + x + 2.0 * k, t);
    let mut sum = term(0.0);
    let mut k = 0usize;
    loop {
        k += 1;
        let kf = k as f64;
        sum += term(kf) + term(-kf);
        // every remaining image sits at distance at least 2k from (0, 1)
        let bound = 4.0 * gaussian(2.0 * kf, t) / (1.0 - (-2.0 * (2.0 * kf + 1.0) / t).exp());
        if bound < tol {
            return KernelValue::new(sum, bound);
        }
    }
}

/// Transition density of absorbed Brownian motion.
pub fn abs_density(x: f64, y: f64, t: f64, cfg: &HeatKernelConfig) -> Result<KernelValue> {
    check_time(t)?;
    if !(x > 0.0 && x < 1.0 && y > 0.0 && y < 1.0) {
        return Ok(KernelValue::ZERO);
    }
    // order the arguments so the result is symmetric bit-for-bit
    let (u, v) = if x <= y { (x, y) } else { (y, x) };
    Ok(if t >= cfg.t_switch {
        abs_density_spectral(u, v, t, cfg.tol)
    } else {
        abs_density_images(u, v, t, cfg.tol)
    })
}

/// `P_x(tau_0 <= t, tau_0 < tau_1) = (1 - x) - sum_k (2/(k pi)) e^{-k^2 pi^2 t/2} sin(k pi x)`.
pub fn q0_spectral(x: f64, t: f64, tol: f64) -> KernelValue {
    let a = PI * PI * t / 2.0;
    let mut sum = 0.0;
    let mut k = 0;
    loop {
        k += 1;
        let kf = k as f64;
        let c = 2.0 / (kf * PI);
        let decay = (-kf * kf * a).exp();
        sum += c * decay * (kf * PI * x).sin();
        if c * decay < tol {
            break;
        }
    }
    KernelValue::new((1.0 - x) - sum, spectral_tail(k, a, 2.0 / ((k + 1) as f64 * PI)))
}

/// The same probability from the first-passage image series
/// `sum_k sgn(x + 2k) erfc(|x + 2k| / sqrt(2t))`.
pub fn q0_images(x: f64, t: f64, tol: f64) -> KernelValue {
    let s = (2.0 * t).sqrt();
    let term = |a: f64| a.signum() * erfc(a.abs() / s);
    let mut sum = term(x);
    let mut k = 0usize;
    loop {
        k += 1;
        let kf = k as f64;
        sum += term(x + 2.0 * kf) + term(x - 2.0 * kf);
        let bound = 2.0 * erfc((2.0 * kf) / s);
        if bound < tol {
            return KernelValue::new(sum, 2.0 * bound);
        }
    }
}

fn q0_value(x: f64, t: f64, cfg: &HeatKernelConfig) -> KernelValue {
    if t == 0.0 {
        return KernelValue::ZERO;
    }
    if t < 1e-6 && x > 8.0 * t.sqrt() {
        // erfc(8 / sqrt 2) is far below double resolution of the other terms
        return KernelValue::new(0.0, erfc(8.0 / 2f64.sqrt()));
    }
    if t >= cfg.t_switch {
        q0_spectral(x, t, cfg.tol)
    } else {
        q0_images(x, t, cfg.tol)
    }
}

fn survive_spectral(x: f64, t: f64, tol: f64) -> KernelValue {
    let a = PI * PI * t / 2.0;
    let mut sum = 0.0;
    let mut k = 1;
    loop {
        let kf = k as f64;
        let c = 4.0 / (kf * PI);
        let decay = (-kf * kf * a).exp();
        sum += c * decay * (kf * PI * x).sin();
        if c * decay < tol {
            break;
        }
        k += 2;
    }
    KernelValue::new(sum, spectral_tail(k, a, 4.0 / ((k + 2) as f64 * PI)))
}

/// Absorption probabilities at each end by time `t`, and the survival
/// probability.
pub fn absorption_split(x: f64, t: f64, cfg: &HeatKernelConfig) -> Result<AbsorptionSplit> {
    ensure(t >= 0.0 && t.is_finite(), || format!("time must be non-negative, got {t}"))?;
    ensure(x > 0.0 && x < 1.0, || format!("starting point {x} outside (0, 1)"))?;
    if t == 0.0 {
        return Ok(AbsorptionSplit {
            q0: 0.0,
            q1: 0.0,
            survive: 1.0,
            trunc_error_bound: 0.0,
        });
    }
    let q0 = q0_value(x, t, cfg);
    let q1 = q0_value(1.0 - x, t, cfg);
    let survive = if t >= cfg.t_switch {
        survive_spectral(x, t, cfg.tol)
    } else {
        KernelValue::new(1.0 - q0.value - q1.value, q0.trunc_error_bound + q1.trunc_error_bound)
    };
    Ok(AbsorptionSplit {
        q0: q0.value.max(0.0),
        q1: q1.value.max(0.0),
        survive: survive.value.max(0.0),
        trunc_error_bound: q0.trunc_error_bound + q1.trunc_error_bound + survive.trunc_error_bound,
    })
}

/// `lambda(t, x) = lambda_L q0(x, t) + lambda_R q1(x, t)`.
pub fn gas_intensity(x: f64, t: f64, p: &ReservoirParams, cfg: &HeatKernelConfig) -> Result<f64> {
    Ok(gas_intensity_value(x, t, p, cfg)?.value)
}

fn gas_intensity_value(x: f64, t: f64, p: &ReservoirParams, cfg: &HeatKernelConfig) -> Result<KernelValue> {
    let s = absorption_split(x, t, cfg)?;
    let err = (p.lambda_left + p.lambda_right) * s.trunc_error_bound;
    Ok(KernelValue::new(p.lambda_left * s.q0 + p.lambda_right * s.q1, err))
}

/// `lambda_inf(x) = lambda_L (1 - x) + lambda_R x`.
pub fn stationary_intensity(x: f64, p: &ReservoirParams) -> f64 {
    p.lambda_left * (1.0 - x) + p.lambda_right * x
}

/// `Lambda_t = int_0^1 lambda(t, x) dx` by adaptive quadrature.
pub fn total_intensity(t: f64, p: &ReservoirParams, cfg: &HeatKernelConfig) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    let f = |x: f64| gas_intensity(x, t, p, cfg).unwrap_or(0.0);
    quadrature::integrate(&f, 0.0, 0.5, 0.5 * INTENSITY_QUAD_TOL)
        + quadrature::integrate(&f, 0.5, 1.0, 0.5 * INTENSITY_QUAD_TOL)
}

/// Inverse-CDF table of the normalized interior density `p_t(x, .)`.
fn interior_cdf_sample<R: Rng + ?Sized>(x: f64, t: f64, cfg: &HeatKernelConfig, rng: &mut R) -> f64 {
    let h = 1.0 / FALLBACK_GRID as f64;
    let dens: Vec<f64> = (0..=FALLBACK_GRID)
        .map(|i| abs_density(x, i as f64 * h, t, cfg).map(|k| k.value.max(0.0)).unwrap_or(0.0))
        .collect();
    let mut cdf = vec![0.0; FALLBACK_GRID + 1];
    for i in 1..=FALLBACK_GRID {
        cdf[i] = cdf[i - 1] + 0.5 * h * (dens[i - 1] + dens[i]);
    }
    let u = open01(rng) * cdf[FALLBACK_GRID];
    let i = cdf.partition_point(|&c| c < u).clamp(1, FALLBACK_GRID);
    // linear interpolation of a non-decreasing table stays monotone
    let (c0, c1) = (cdf[i - 1], cdf[i]);
    let frac = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
    ((i - 1) as f64 + frac) * h
}

fn sample_marginal<R: Rng + ?Sized>(
    x: f64,
    t: f64,
    cfg: &HeatKernelConfig,
    rng: &mut R,
    fallbacks: Option<&AtomicU64>,
) -> Result<Outcome> {
    check_time(t)?;
    let split = absorption_split(x, t, cfg)?;
    let u = open01(rng) * (split.q0 + split.q1 + split.survive);
    if u < split.q0 {
        return Ok(Outcome::AbsorbedLeft);
    }
    if u < split.q0 + split.q1 {
        return Ok(Outcome::AbsorbedRight);
    }
    let sd = t.sqrt();
    for _ in 0..REJECTION_CAP {
        let y = x + sd * standard_normal(rng);
        if !(y > 0.0 && y < 1.0) {
            continue;
        }
        let ratio = abs_density(x, y, t, cfg)?.value / gaussian(y - x, t);
        if open01(rng) < ratio {
            return Ok(Outcome::Interior(y));
        }
    }
    if let Some(c) = fallbacks {
        c.fetch_add(1, Ordering::Relaxed);
    }
    Ok(Outcome::Interior(interior_cdf_sample(x, t, cfg, rng)))
}

/// Exact time-`t` marginal of absorbed Brownian motion started at `x`.
pub fn sample_abs_bm_marginal<R: Rng + ?Sized>(x: f64, t: f64, rng: &mut R, cfg: &HeatKernelConfig) -> Result<Outcome> {
    sample_marginal(x, t, cfg, rng, None)
}

/// Sampler of the boundary driven Brownian gas at a fixed time, with the
/// injected mass precomputed.
#[derive(Debug)]
pub struct BdbgSampler {
    pub t: f64,
    pub params: ReservoirParams,
    pub cfg: HeatKernelConfig,
    pub total_intensity: f64,
    fallbacks: AtomicU64,
}

impl BdbgSampler {
    pub fn new(t: f64, params: &ReservoirParams, cfg: &HeatKernelConfig) -> Result<Self> {
        check_time(t)?;
        Ok(Self {
            t,
            params: *params,
            cfg: *cfg,
            total_intensity: total_intensity(t, params, cfg),
            fallbacks: AtomicU64::new(0),
        })
    }

    /// Interior draws that needed the tabulated inverse-CDF fallback.
    pub fn fallback_count(&self) -> u64 {
        self.fallbacks.load(Ordering::Relaxed)
    }

    /// Injected particles `Theta_t`: a Poisson(`Lambda_t`) number of points,
    /// each placed by thinning uniform proposals against `max(lambda_L, lambda_R)`.
    pub fn sample_injected<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let lam = |x: f64| gas_intensity(x, self.t, &self.params, &self.cfg).unwrap_or(0.0);
        sample_poisson_process(rng, lam, self.total_intensity, self.params.max_lambda())
    }

    pub fn sample<R: Rng + ?Sized>(&self, eta0: &ContinuumConfiguration, rng: &mut R) -> Result<ContinuumConfiguration> {
        let mut positions = Vec::with_capacity(eta0.len());
        let (mut left, mut right) = (0, 0);
        for &x in &eta0.positions {
            match sample_marginal(x, self.t, &self.cfg, rng, Some(&self.fallbacks))? {
                Outcome::AbsorbedLeft => left += 1,
                Outcome::AbsorbedRight => right += 1,
                Outcome::Interior(y) => positions.push(y),
            }
        }
        positions.extend(self.sample_injected(rng));
        Ok(ContinuumConfiguration {
            positions,
            absorbed_left: left,
            absorbed_right: right,
        })
    }
}

/// One draw of `eta_t = xi_t restricted to (0, 1) + Theta_t`; reuse a
/// [`BdbgSampler`] across replicas.
pub fn sample_bdbg<R: Rng + ?Sized>(
    eta0: &ContinuumConfiguration,
    t: f64,
    p: &ReservoirParams,
    rng: &mut R,
    cfg: &HeatKernelConfig,
) -> Result<ContinuumConfiguration> {
    BdbgSampler::new(t, p, cfg)?.sample(eta0, rng)
}

/// Poisson point process on `(0, 1)` with intensity `rho`, by a Poisson
/// number of points of mean `total = int rho` placed by thinning against
/// `bound >= sup rho`.
pub fn sample_poisson_process<R: Rng + ?Sized>(rng: &mut R, rho: impl Fn(f64) -> f64, total: f64, bound: f64) -> Vec<f64> {
    let count = poisson(rng, total);
    let mut out = Vec::with_capacity(count as usize);
    while (out.len() as u64) < count {
        let x = open01(rng);
        if open01(rng) * bound < rho(x) {
            out.push(x);
        }
    }
    out
}

struct DualInputs {
    lam: Vec<KernelValue>,
    kernel: Vec<Vec<KernelValue>>,
}

fn dual_inputs(z: &[f64], t: f64, eta0: &ContinuumConfiguration, p: &ReservoirParams, cfg: &HeatKernelConfig) -> Result<DualInputs> {
    check_time(t)?;
    ensure(z.len() <= DEFAULT_DENSITY_CAP, || {
        format!("density order {} exceeds cap {DEFAULT_DENSITY_CAP}", z.len())
    })?;
    check_cap(eta0.len(), z.len(), DEFAULT_ENUMERATION_CAP)?;
    let lam = z
        .iter()
        .map(|&zi| gas_intensity_value(zi, t, p, cfg))
        .collect::<Result<Vec<_>>>()?;
    let kernel = z
        .iter()
        .map(|&zi| {
            eta0.positions
                .iter()
                .map(|&x| abs_density(zi, x, t, cfg))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DualInputs { lam, kernel })
}

/// `sum over injective maps sigma: coords -> particles of prod_i p_t(z_i, x_sigma(i))`.
fn injective_kernel_sum(inputs: &DualInputs, coords: &[usize], m: usize) -> KernelValue {
    let mut acc = KernelValue::ZERO;
    for_each_injective(m, coords.len(), |sigma| {
        acc = acc
            + coords
                .iter()
                .zip(sigma)
                .map(|(&i, &j)| inputs.kernel[i][j])
                .product::<KernelValue>();
    });
    acc
}

fn split_mask(n: usize, mask: u32) -> (Vec<usize>, Vec<usize>) {
    (0..n).partition(|&i| mask & (1 << i) != 0)
}

/// Density of the `n`-th factorial moment measure of the gas at time `t`,
/// `sum_{I subset [n]} prod_{i in I} lambda(t, z_i) * sum_sigma prod_{i not in I} p_t(z_i, x_sigma(i))`.
pub fn dual_density(
    z: &[f64],
    t: f64,
    eta0: &ContinuumConfiguration,
    p: &ReservoirParams,
    cfg: &HeatKernelConfig,
) -> Result<KernelValue> {
    let inputs = dual_inputs(z, t, eta0, p, cfg)?;
    let n = z.len();
    let mut total = KernelValue::ZERO;
    for mask in 0u32..(1 << n) {
        let (injected, evolved) = split_mask(n, mask);
        let lam: KernelValue = injected.iter().map(|&i| inputs.lam[i]).product();
        total = total + lam * injective_kernel_sum(&inputs, &evolved, eta0.len());
    }
    Ok(total)
}

/// Density of `E[eta_t^{(n), theta}]` with respect to Lebesgue measure.
///
/// Coordinates in `J` are filled by injected mass; the rest are integrated
/// against the deformed initial configuration, where each `-theta` slot
/// carries `int p_t(z, .) d(m + delta_0 + delta_1) = 1`.
pub fn theta_dual_density(
    z: &[f64],
    t: f64,
    eta0: &ContinuumConfiguration,
    p: &ReservoirParams,
    cfg: &HeatKernelConfig,
) -> Result<KernelValue> {
    let theta = p.theta()?;
    let inputs = dual_inputs(z, t, eta0, p, cfg)?;
    let n = z.len();
    let unit_mass = z
        .iter()
        .map(|&zi| {
            let s = absorption_split(zi, t, cfg)?;
            Ok(KernelValue::new(s.q0 + s.q1 + s.survive, s.trunc_error_bound))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total = KernelValue::ZERO;
    for mask in 0u32..(1 << n) {
        let (injected, rest) = split_mask(n, mask);
        let lam: KernelValue = injected.iter().map(|&i| inputs.lam[i]).product();
        let mut deformed = KernelValue::ZERO;
        for sub in 0u32..(1 << rest.len()) {
            let kept: Vec<usize> = (0..rest.len()).filter(|k| sub & (1 << k) != 0).map(|k| rest[k]).collect();
            let deform: Vec<usize> = (0..rest.len()).filter(|k| sub & (1 << k) == 0).map(|k| rest[k]).collect();
            let weight: KernelValue = deform.iter().map(|&i| unit_mass[i].scale(-theta)).product();
            deformed = deformed + weight * injective_kernel_sum(&inputs, &kept, eta0.len());
        }
        total = total + lam * deformed;
    }
    Ok(total)
}

/// `z -> int rho(y) p_t(y, z) dy + lambda(t, z)`: the intensity at time `t`
/// of the gas started from a Poisson process with density `rho`.
pub fn doob_intensity<'a, F: Fn(f64) -> f64 + 'a>(
    rho: F,
    t: f64,
    p: &'a ReservoirParams,
    cfg: &'a HeatKernelConfig,
) -> Result<impl Fn(f64) -> f64 + 'a> {
    check_time(t)?;
    Ok(move |z: f64| {
        let f = |y: f64| rho(y) * abs_density(y, z, t, cfg).map(|k| k.value).unwrap_or(0.0);
        // split at z where the kernel peaks for small t
        let evolved = quadrature::integrate(&f, 0.0, z, 1e-11) + quadrature::integrate(&f, z, 1.0, 1e-11);
        evolved + gas_intensity(z, t, p, cfg).unwrap_or(0.0)
    })
}
