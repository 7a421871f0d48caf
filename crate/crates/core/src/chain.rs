//! The chain `{1, .., N}` with absorbing exterior sites `0` and `N + 1`.
//!
//! A single particle performs the absorbed walk: from an interior site it
//! jumps to each neighbour at rate 1/2, and sites `0`, `N + 1` are absorbing.
//!
//! In the reservoir process every particle leaves through an end at the
//! same rate 1/2 at which the walk steps into the exterior, and particles
//! enter at rate `lambda_L / 2` into site 1 and `lambda_R / 2` into site `N`.
//! These are the rates dual to the absorbed walk under
//! `lambda_L^{xi(0)} lambda_R^{xi(N+1)} D^cl`; the stationary profile is the
//! harmonic interpolation of `lambda_L`, `lambda_R` on `{0, .., N + 1}`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dualities::falling_factorial_f64;
use crate::error::{ensure, Error, Result};
use crate::rng::{exponential, open01, poisson};
use crate::types::{DiscreteConfiguration, DualConfiguration, KernelValue, ReservoirParams};

/// Default cap on the number of dual particles enumerated exactly.
pub const DEFAULT_DUAL_CAP: usize = 6;

/// Rate of every step into the exterior, and the factor applied to the
/// reservoir intensities to obtain injection rates.
pub const BOUNDARY_RATE: f64 = 0.5;

/// Default truncation tolerance of the uniformized series.
pub const DEFAULT_TABLE_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub n_sites: usize,
    pub params: ReservoirParams,
}

impl ChainSpec {
    pub fn new(n_sites: usize, params: ReservoirParams) -> Result<Self> {
        ensure(n_sites >= 1, || "chain needs at least one site".into())?;
        Ok(Self { n_sites, params })
    }

    fn check(&self, c: &DiscreteConfiguration) -> Result<()> {
        if c.n_sites() != self.n_sites {
            return Err(Error::LengthMismatch {
                expected: self.n_sites,
                got: c.n_sites(),
            });
        }
        Ok(())
    }
}

/// Time-`t` transition matrix of the absorbed walk over states `0..=N+1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionTable {
    pub t: f64,
    pub n_sites: usize,
    /// Row-major `(N + 2) x (N + 2)` matrix.
    pub rows: Vec<f64>,
    /// Poisson mass dropped by the truncated series; bounds the L1 error of
    /// every row.
    pub tolerance: f64,
}

impl TransitionTable {
    pub fn dim(&self) -> usize {
        self.n_sites + 2
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.rows[x * self.dim() + y]
    }

    pub fn row(&self, x: usize) -> &[f64] {
        let d = self.dim();
        &self.rows[x * d..(x + 1) * d]
    }

    /// `P_s P_t` as a table for time `s + t`.
    pub fn compose(&self, other: &TransitionTable) -> TransitionTable {
        let d = self.dim();
        assert_eq!(d, other.dim());
        let mut rows = vec![0.0; d * d];
        for i in 0..d {
            for l in 0..d {
                let a = self.rows[i * d + l];
                if a == 0.0 {
                    continue;
                }
                for j in 0..d {
                    rows[i * d + j] += a * other.rows[l * d + j];
                }
            }
        }
        TransitionTable {
            t: self.t + other.t,
            n_sites: self.n_sites,
            rows,
            tolerance: self.tolerance + other.tolerance,
        }
    }

    /// Largest entrywise difference.
    pub fn max_diff(&self, other: &TransitionTable) -> f64 {
        self.rows
            .iter()
            .zip(&other.rows)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Poisson(t) weights for `k` in the kept window `[lo, lo + w.len())` and
/// the mass left outside it.
///
/// Weights are generated relative to the mode and normalized by their own
/// sum, which avoids the cancellation in `-t + k ln t - ln k!` for large `t`.
fn poisson_window(t: f64, tol: f64) -> (usize, Vec<f64>, f64) {
    if t == 0.0 {
        return (0, vec![1.0], 0.0);
    }
    let mode = t.floor() as usize;
    let mut right = vec![1.0];
    let mut k = mode;
    let tail = loop {
        let next = right[right.len() - 1] * t / (k + 1) as f64;
        k += 1;
        let ratio = t / (k + 1) as f64;
        if ratio < 1.0 {
            let bound = next / (1.0 - ratio);
            if bound < 1e-3 * tol {
                break bound;
            }
        }
        right.push(next);
    };
    let mut left = Vec::with_capacity(mode);
    let mut w = 1.0;
    for j in (1..=mode).rev() {
        w *= j as f64 / t;
        left.push(w);
        if w < 1e-300 {
            break;
        }
    }
    let total: f64 = left.iter().sum::<f64>() + right.iter().sum::<f64>() + tail;
    left.iter_mut().chain(right.iter_mut()).for_each(|w| *w /= total);
    // drop the smallest left weights while their total stays below tol / 2
    let mut dropped = (mode - left.len()) as f64 * 1e-300 / total;
    let mut cut = left.len();
    while cut > 0 && dropped + left[cut - 1] < 0.5 * tol {
        dropped += left[cut - 1];
        cut -= 1;
    }
    let lo = mode - cut;
    let mut weights: Vec<f64> = left[..cut].iter().rev().copied().collect();
    weights.extend(right);
    (lo, weights, tail / total + dropped)
}

/// `M <- M R` with `R = I + Q` the uniformized jump matrix at rate 1.
fn step(m: &[f64], out: &mut [f64], d: usize) {
    let last = d - 1;
    for i in 0..d {
        let row = &m[i * d..(i + 1) * d];
        let o = &mut out[i * d..(i + 1) * d];
        o[0] = row[0] + if last > 1 { 0.5 * row[1] } else { 0.0 };
        o[last] = row[last] + if last > 1 { 0.5 * row[last - 1] } else { 0.0 };
        for j in 1..last {
            let mut v = 0.0;
            if j > 1 {
                v += 0.5 * row[j - 1];
            }
            if j + 1 < last {
                v += 0.5 * row[j + 1];
            }
            o[j] = v;
        }
    }
}

/// Transition matrix of the absorbed walk at time `t`, by uniformization
/// with the Poisson series truncated once the dropped mass is below `tol`.
pub fn transition_table(spec: &ChainSpec, t: f64, tol: f64) -> Result<TransitionTable> {
    ensure(t >= 0.0 && t.is_finite(), || format!("time must be non-negative, got {t}"))?;
    ensure(tol > 0.0, || "tolerance must be positive".into())?;
    let d = spec.n_sites + 2;
    let mut m = vec![0.0; d * d];
    for i in 0..d {
        m[i * d + i] = 1.0;
    }
    let (lo, weights, dropped) = poisson_window(t, tol);
    let mut acc = vec![0.0; d * d];
    let mut scratch = vec![0.0; d * d];
    let hi = lo + weights.len();
    for k in 0..hi {
        if k >= lo {
            let w = weights[k - lo];
            for (a, x) in acc.iter_mut().zip(&m) {
                *a += w * x;
            }
        }
        if k + 1 < hi {
            step(&m, &mut scratch, d);
            std::mem::swap(&mut m, &mut scratch);
        }
    }
    // absorbing rows are exact unit vectors
    let last = d - 1;
    for j in 0..d {
        acc[j] = f64::from(u8::from(j == 0));
        acc[last * d + j] = f64::from(u8::from(j == last));
    }
    // exact symmetry of the interior block
    for x in 1..=spec.n_sites {
        for y in x + 1..=spec.n_sites {
            let v = 0.5 * (acc[x * d + y] + acc[y * d + x]);
            acc[x * d + y] = v;
            acc[y * d + x] = v;
        }
    }
    Ok(TransitionTable {
        t,
        n_sites: spec.n_sites,
        rows: acc,
        tolerance: dropped,
    })
}

/// `lambda_t(i) = lambda_L p_t(i, 0) + lambda_R p_t(i, N + 1)` for `i = 1..=N`.
pub fn intensity_from_table(spec: &ChainSpec, table: &TransitionTable) -> Vec<f64> {
    let right = spec.n_sites + 1;
    (1..=spec.n_sites)
        .map(|i| spec.params.lambda_left * table.get(i, 0) + spec.params.lambda_right * table.get(i, right))
        .collect()
}

pub fn chain_intensity(spec: &ChainSpec, t: f64) -> Result<Vec<f64>> {
    let table = transition_table(spec, t, DEFAULT_TABLE_TOL)?;
    Ok(intensity_from_table(spec, &table))
}

/// Harmonic interpolation `h(i) = lambda_L + (lambda_R - lambda_L) i / (N + 1)`.
pub fn stationary_profile(spec: &ChainSpec) -> Vec<f64> {
    let (l, r) = (spec.params.lambda_left, spec.params.lambda_right);
    let n1 = (spec.n_sites + 1) as f64;
    (1..=spec.n_sites).map(|i| l + (r - l) * i as f64 / n1).collect()
}

/// Max-norm residual of `lambda_s^T P_t = lambda_{t+s} - lambda_t` over the
/// interior sites.
pub fn verify_intensity_semigroup(spec: &ChainSpec, s: f64, t: f64) -> Result<f64> {
    let lam_s = chain_intensity(spec, s)?;
    let lam_t = chain_intensity(spec, t)?;
    let lam_ts = chain_intensity(spec, t + s)?;
    let p = transition_table(spec, t, DEFAULT_TABLE_TOL)?;
    let n = spec.n_sites;
    let mut worst: f64 = 0.0;
    for y in 1..=n {
        let lhs: f64 = (1..=n).map(|x| lam_s[x - 1] * p.get(x, y)).sum();
        worst = worst.max((lhs - (lam_ts[y - 1] - lam_t[y - 1])).abs());
    }
    Ok(worst)
}

/// Exact event-driven simulation of the reservoir process up to time `t`.
///
/// Exits are tallied in the absorbed fields of the result; the interior
/// counts are the reservoir process itself.
pub fn simulate_reservoir<R: Rng + ?Sized>(
    eta0: &DiscreteConfiguration,
    t: f64,
    spec: &ChainSpec,
    rng: &mut R,
) -> Result<DiscreteConfiguration> {
    spec.check(eta0)?;
    ensure(t >= 0.0, || format!("time must be non-negative, got {t}"))?;
    let n = spec.n_sites;
    let mut counts = eta0.counts.clone();
    let (mut exits_left, mut exits_right) = (0u64, 0u64);
    // every particle steps left and right at rate 1/2; a step out of the
    // chain is an exit into the reservoir
    let inflow_left = BOUNDARY_RATE * spec.params.lambda_left;
    let inflow_right = BOUNDARY_RATE * spec.params.lambda_right;
    let inflow = inflow_left + inflow_right;
    let mut particles: u64 = counts.iter().sum();
    let mut now = 0.0;
    loop {
        let total = inflow + particles as f64;
        if total <= 0.0 {
            break;
        }
        now += exponential(rng, total);
        if now > t {
            break;
        }
        let u = open01(rng) * total;
        if u < inflow_left {
            counts[0] += 1;
            particles += 1;
            continue;
        }
        if u < inflow {
            counts[n - 1] += 1;
            particles += 1;
            continue;
        }
        // pick a particle uniformly, then a direction
        let mut k = rng.random_range(0..particles);
        let site = counts
            .iter()
            .position(|&c| {
                if k < c {
                    true
                } else {
                    k -= c;
                    false
                }
            })
            .expect("particle index within total");
        counts[site] -= 1;
        if rng.random::<bool>() {
            if site == 0 {
                exits_left += 1;
                particles -= 1;
            } else {
                counts[site - 1] += 1;
            }
        } else if site == n - 1 {
            exits_right += 1;
            particles -= 1;
        } else {
            counts[site + 1] += 1;
        }
    }
    Ok(DiscreteConfiguration::new(counts).with_absorbed(exits_left, exits_right))
}

/// Precomputed ingredients of the gas construction at a fixed time: the
/// transition table, cumulative rows for sampling, and the injection
/// intensity.
#[derive(Debug, Clone)]
pub struct GasSampler {
    pub spec: ChainSpec,
    pub table: TransitionTable,
    pub intensity: Vec<f64>,
    cumulative: Vec<Vec<f64>>,
}

impl GasSampler {
    pub fn new(spec: &ChainSpec, t: f64) -> Result<Self> {
        let table = transition_table(spec, t, DEFAULT_TABLE_TOL)?;
        let intensity = intensity_from_table(spec, &table);
        let cumulative = (0..table.dim())
            .map(|x| {
                let mut acc = 0.0;
                table
                    .row(x)
                    .iter()
                    .map(|p| {
                        acc += p;
                        acc
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            spec: *spec,
            table,
            intensity,
            cumulative,
        })
    }

    /// Time-`t` state of a walker started at `x`.
    pub fn move_particle<R: Rng + ?Sized>(&self, x: usize, rng: &mut R) -> usize {
        let cdf = &self.cumulative[x];
        let u = open01(rng) * cdf[cdf.len() - 1];
        cdf.partition_point(|&c| c < u).min(cdf.len() - 1)
    }

    /// `eta_t = xi_t restricted to the interior + Theta_t`. The absorbed
    /// tallies of the result count initial particles absorbed at each end.
    pub fn sample<R: Rng + ?Sized>(&self, eta0: &DiscreteConfiguration, rng: &mut R) -> Result<DiscreteConfiguration> {
        self.spec.check(eta0)?;
        let n = self.spec.n_sites;
        let mut counts = vec![0u64; n];
        let (mut left, mut right) = (0, 0);
        for (i, &c) in eta0.counts.iter().enumerate() {
            for _ in 0..c {
                match self.move_particle(i + 1, rng) {
                    0 => left += 1,
                    y if y == n + 1 => right += 1,
                    y => counts[y - 1] += 1,
                }
            }
        }
        for (c, &lam) in counts.iter_mut().zip(&self.intensity) {
            *c += poisson(rng, lam);
        }
        Ok(DiscreteConfiguration::new(counts).with_absorbed(left, right))
    }
}

/// One draw of the gas construction; reuse a [`GasSampler`] across replicas.
pub fn sample_gas_discrete<R: Rng + ?Sized>(
    eta0: &DiscreteConfiguration,
    t: f64,
    spec: &ChainSpec,
    rng: &mut R,
) -> Result<DiscreteConfiguration> {
    GasSampler::new(spec, t)?.sample(eta0, rng)
}

/// Visits every joint time-`t` outcome of the dual particles at `sites`,
/// with its probability. `prune(y, counts)` may reject a partial assignment.
fn enumerate_dual(
    table: &TransitionTable,
    sites: &[usize],
    mut prune: impl FnMut(usize, &[u64]) -> bool,
    mut visit: impl FnMut(&[u64], f64),
) {
    fn rec(
        table: &TransitionTable,
        sites: &[usize],
        k: usize,
        prob: f64,
        state: &mut Vec<u64>,
        prune: &mut dyn FnMut(usize, &[u64]) -> bool,
        visit: &mut dyn FnMut(&[u64], f64),
    ) {
        if k == sites.len() {
            visit(state, prob);
            return;
        }
        let row = table.row(sites[k]);
        for (y, &p) in row.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            state[y] += 1;
            if !prune(y, state) {
                rec(table, sites, k + 1, prob * p, state, prune, visit);
            }
            state[y] -= 1;
        }
    }
    let mut state = vec![0u64; table.dim()];
    rec(table, sites, 0, 1.0, &mut state, &mut prune, &mut visit);
}

fn dual_from_state(state: &[u64], xi: &DualConfiguration) -> DualConfiguration {
    let d = state.len();
    DiscreteConfiguration::new(state[1..d - 1].to_vec())
        .with_absorbed(state[0] + xi.absorbed_left, state[d - 1] + xi.absorbed_right)
}

fn check_dual_cap(xi: &DualConfiguration, cap: usize) -> Result<()> {
    let n = xi.interior_mass() as usize;
    if n > cap {
        return Err(Error::CapExceeded {
            terms: n as u128,
            cap: cap as u128,
        });
    }
    Ok(())
}

/// `E^abs_xi[lambda_L^{xi_t(0)} lambda_R^{xi_t(N+1)} D^cl(xi_t, eta0)]` by exact
/// enumeration over the `(N + 2)^n` joint outcomes of the independent dual
/// walkers, pruned as soon as a site holds more dual particles than `eta0`.
///
/// The bound accounts for the uniformization truncation of each row.
pub fn dual_expectation_discrete_with_table(
    xi: &DualConfiguration,
    eta0: &DiscreteConfiguration,
    table: &TransitionTable,
    params: &ReservoirParams,
    cap: usize,
) -> Result<KernelValue> {
    check_dual_cap(xi, cap)?;
    if xi.n_sites() != table.n_sites || eta0.n_sites() != table.n_sites {
        return Err(Error::LengthMismatch {
            expected: table.n_sites,
            got: xi.n_sites().min(eta0.n_sites()),
        });
    }
    let n_sites = table.n_sites;
    let (l, r) = (params.lambda_left, params.lambda_right);
    let sites = xi.particle_sites();
    let mut total = 0.0;
    enumerate_dual(
        table,
        &sites,
        |y, state| (1..=n_sites).contains(&y) && state[y] > eta0.counts[y - 1],
        |state, prob| {
            let d: f64 = (1..=n_sites)
                .map(|y| falling_factorial_f64(eta0.counts[y - 1], state[y]))
                .product();
            total += prob * l.powi(state[0] as i32) * r.powi(state[n_sites + 1] as i32) * d;
        },
    );
    let fixed = l.powi(xi.absorbed_left as i32) * r.powi(xi.absorbed_right as i32);
    let n = sites.len() as i32;
    let scale = l.max(r).max(1.0).powi(n) * (eta0.interior_mass().max(1) as f64).powi(n);
    Ok(KernelValue::new(fixed * total, fixed * n as f64 * table.tolerance * scale))
}

pub fn dual_expectation_discrete(
    xi: &DualConfiguration,
    eta0: &DiscreteConfiguration,
    t: f64,
    spec: &ChainSpec,
) -> Result<f64> {
    spec.check(xi)?;
    spec.check(eta0)?;
    let table = transition_table(spec, t, DEFAULT_TABLE_TOL)?;
    Ok(dual_expectation_discrete_with_table(xi, eta0, &table, &spec.params, DEFAULT_DUAL_CAP)?.value)
}

/// `E^abs_xi[f(xi_t)]` for an arbitrary function of the dual configuration,
/// by unpruned enumeration.
pub fn dual_expectation_with(
    xi: &DualConfiguration,
    table: &TransitionTable,
    f: impl Fn(&DualConfiguration) -> f64,
    cap: usize,
) -> Result<f64> {
    check_dual_cap(xi, cap)?;
    let sites = xi.particle_sites();
    let mut total = 0.0;
    enumerate_dual(table, &sites, |_, _| false, |state, prob| {
        total += prob * f(&dual_from_state(state, xi));
    });
    Ok(total)
}

/// Upper bound on the terms an unpruned enumeration would visit.
pub fn dual_enumeration_terms(xi: &DualConfiguration) -> u128 {
    ((xi.n_sites() + 2) as u128).saturating_pow(xi.interior_mass() as u32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dualities::reservoir_duality;
    use crate::rng::stream;

    fn spec(n: usize, l: f64, r: f64) -> ChainSpec {
        ChainSpec::new(n, ReservoirParams::new(l, r).unwrap()).unwrap()
    }

    #[test]
    fn table_single_site() {
        let s = spec(1, 0.0, 0.0);
        for &t in &[0.0, 0.3, 1.0, 4.0, 30.0] {
            let p = transition_table(&s, t, 1e-14).unwrap();
            assert!((p.get(1, 1) - (-t).exp()).abs() < 1e-13);
            assert!((p.get(1, 0) - 0.5 * (1.0 - (-t).exp())).abs() < 1e-13);
            assert!((p.get(1, 2) - p.get(1, 0)).abs() < 1e-15);
            assert_eq!(p.get(0, 0), 1.0);
            assert_eq!(p.get(2, 2), 1.0);
        }
    }

    #[test]
    fn table_at_zero_is_identity() {
        let p = transition_table(&spec(4, 1.0, 1.0), 0.0, 1e-14).unwrap();
        for x in 0..6 {
            for y in 0..6 {
                assert_eq!(p.get(x, y), if x == y { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn table_large_time_rows() {
        let p = transition_table(&spec(128, 0.0, 0.0), 3000.0, 1e-14).unwrap();
        for x in 0..p.dim() {
            let s: f64 = p.row(x).iter().sum();
            assert!((s - 1.0).abs() < 1e-12, "row {x}: {s}");
        }
    }

    #[test]
    fn stationary_profile_examples() {
        assert_eq!(stationary_profile(&spec(3, 2.0, 2.0)), vec![2.0; 3]);
        assert_eq!(stationary_profile(&spec(1, 1.0, 3.0)), vec![2.0]);
        assert_eq!(stationary_profile(&spec(3, 0.0, 4.0)), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn intensity_examples() {
        let s = spec(1, 1.0, 2.0);
        assert_eq!(chain_intensity(&s, 0.0).unwrap(), vec![0.0]);
        let t = 0.8;
        let lam = chain_intensity(&s, t).unwrap()[0];
        assert!((lam - 3.0 * (1.0 - (-t).exp()) / 2.0).abs() < 1e-13);
        let s = spec(6, 1.0, 2.0);
        let far = chain_intensity(&s, 400.0).unwrap();
        for (a, b) in far.iter().zip(stationary_profile(&s)) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn semigroup_residual_examples() {
        let s = spec(8, 1.0, 2.0);
        assert_eq!(verify_intensity_semigroup(&s, 0.0, 0.7).unwrap(), 0.0);
        assert!(verify_intensity_semigroup(&s, 0.7, 0.0).unwrap() < 1e-15);
        assert!(verify_intensity_semigroup(&s, 0.5, 0.5).unwrap() <= 1e-10);
    }

    #[test]
    fn simulate_at_zero_echoes() {
        let s = spec(3, 1.0, 2.0);
        let eta = DiscreteConfiguration::new(vec![2, 0, 5]);
        let out = simulate_reservoir(&eta, 0.0, &s, &mut stream(1, 0)).unwrap();
        assert_eq!(out, eta);
    }

    #[test]
    fn dual_expectation_examples() {
        let s = spec(1, 1.0, 2.0);
        let eta0 = DiscreteConfiguration::new(vec![3]);
        let xi = DiscreteConfiguration::new(vec![1]);
        let t = 0.6;
        let v = dual_expectation_discrete(&xi, &eta0, t, &s).unwrap();
        let e = (-t).exp();
        assert!((v - (e * 3.0 + (1.0 - e) * 1.5)).abs() < 1e-12);

        let s = spec(4, 1.0, 2.0);
        let eta0 = DiscreteConfiguration::new(vec![2, 1, 0, 3]);
        let xi = DiscreteConfiguration::new(vec![1, 0, 0, 1]).with_absorbed(1, 0);
        let v0 = dual_expectation_discrete(&xi, &eta0, 0.0, &s).unwrap();
        assert_eq!(v0, reservoir_duality(&xi, &eta0, &s.params).unwrap());

        let xi = DiscreteConfiguration::new(vec![0, 2, 1, 0]);
        let far = dual_expectation_discrete(&xi, &eta0, 500.0, &s).unwrap();
        let h = stationary_profile(&s);
        assert!((far - h[1] * h[1] * h[2]).abs() < 1e-9);
    }

    #[test]
    fn dual_cap_enforced() {
        let s = spec(2, 1.0, 1.0);
        let xi = DiscreteConfiguration::new(vec![4, 3]);
        let r = dual_expectation_discrete(&xi, &DiscreteConfiguration::new(vec![9, 9]), 1.0, &s);
        assert!(matches!(r, Err(Error::CapExceeded { .. })));
    }

    #[test]
    fn generic_enumeration_matches_pruned() {
        let s = spec(3, 1.3, 0.4);
        let eta0 = DiscreteConfiguration::new(vec![1, 2, 0]);
        let xi = DiscreteConfiguration::new(vec![1, 1, 1]);
        let table = transition_table(&s, 0.9, 1e-14).unwrap();
        let a = dual_expectation_discrete_with_table(&xi, &eta0, &table, &s.params, 6).unwrap();
        let b = dual_expectation_with(&xi, &table, |x| reservoir_duality(x, &eta0, &s.params).unwrap(), 6).unwrap();
        assert!((a.value - b).abs() < 1e-13);
    }
}
