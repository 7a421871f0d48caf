//! One runner per experiment kind.

use rand::Rng;
use serde_json::json;

use super::*;
use crate::chain::{self, ChainSpec, GasSampler, DEFAULT_DUAL_CAP, DEFAULT_TABLE_TOL};
use crate::dualities::{
    binomial, charlier, classical_duality, falling_factorial_f64, orthogonal_duality, orthogonal_reservoir_duality,
    poisson_orthogonality_expectation, reservoir_duality, theta_factorial_functional, Interval, ProductIndicator,
};
use crate::estimators::{
    derive_seed, poissonity_from_estimates, run_mc_multi, scaling_experiment, suite_verdict, CheckReport, ScalingStart,
};
use crate::interval::{self as iv, BdbgSampler};
use crate::quadrature;
use crate::rng::{poisson, stream};
use crate::types::{ContinuumConfiguration, DiscreteConfiguration, DualConfiguration, KernelValue, ReservoirParams};

struct Collector {
    mc: McConfig,
    negative_control: bool,
    checks: Vec<CheckReport>,
    estimates: Vec<NamedEstimate>,
    details: serde_json::Map<String, serde_json::Value>,
    tables: Vec<Table>,
}

impl Collector {
    fn new(mc: McConfig, negative_control: bool) -> Self {
        Self {
            mc,
            negative_control,
            checks: Vec::new(),
            estimates: Vec::new(),
            details: serde_json::Map::new(),
            tables: Vec::new(),
        }
    }

    fn push(&mut self, r: CheckReport) {
        self.checks.push(r);
    }

    /// Adds the corrupted twin of `r` when negative controls are enabled.
    fn control(&mut self, r: &CheckReport) {
        if self.negative_control {
            self.checks.push(r.corrupted());
        }
    }

    fn estimate(&mut self, name: &str, e: &Estimate) {
        self.estimates.push(NamedEstimate {
            name: name.to_string(),
            estimate: *e,
        });
    }

    fn detail(&mut self, key: &str, v: serde_json::Value) {
        self.details.insert(key.to_string(), v);
    }

    fn seed(&self, label: u64) -> u64 {
        derive_seed(self.mc.seed, label)
    }

    fn finish(self) -> RunResult {
        let mut families: Vec<String> = Vec::new();
        for c in &self.checks {
            let f = family(&c.name);
            if !families.contains(&f) {
                families.push(f);
            }
        }
        let suites = families
            .iter()
            .map(|f| {
                let members: Vec<CheckReport> = self.checks.iter().filter(|c| &family(&c.name) == f).cloned().collect();
                suite_verdict(f, &members)
            })
            .collect();
        RunResult {
            checks: self.checks,
            estimates: self.estimates,
            suites,
            details: serde_json::Value::Object(self.details),
            tables: self.tables,
        }
    }
}

/// First path segment of a check name, ignoring the negative-control prefix.
fn family(name: &str) -> String {
    let n = name.strip_prefix("negative-control/").unwrap_or(name);
    n.split('/').next().unwrap_or(n).to_string()
}

fn label(c: &DiscreteConfiguration) -> String {
    let inner: Vec<String> = c.counts.iter().map(u64::to_string).collect();
    if c.absorbed_left == 0 && c.absorbed_right == 0 {
        format!("[{}]", inner.join(","))
    } else {
        format!("[{}]+({},{})", inner.join(","), c.absorbed_left, c.absorbed_right)
    }
}

fn params(l: f64, r: f64) -> Result<ReservoirParams> {
    ReservoirParams::new(l, r)
}

fn discrete(counts: &[i64]) -> Result<DiscreteConfiguration> {
    crate::types::make_discrete_config(counts)
}

/// Executes the experiment described by `cfg`. With `negative_control`,
/// every check family gains a corrupted comparison that must fail, so the
/// run as a whole fails.
pub fn run_experiment(cfg: &ExperimentConfig, negative_control: bool) -> Result<RunResult> {
    config::validate(cfg).map_err(|e| Error::Config(format!("{}: {}", e.key, e.message)))?;
    let kernel = cfg.kernel.resolve()?;
    let mut c = Collector::new(cfg.mc, negative_control);
    match &cfg.experiment {
        Experiment::KernelCheck(k) => kernel_check(k, &kernel, &mut c)?,
        Experiment::DualityDiscrete(d) => duality_discrete(d, &mut c)?,
        Experiment::Equivalence(d) => equivalence(d, &mut c)?,
        Experiment::DualityContinuum(d) => duality_continuum(d, &kernel, &mut c)?,
        Experiment::Stationary(s) => stationary(s, &kernel, &mut c)?,
        Experiment::Doob(d) => doob(d, &kernel, &mut c)?,
        Experiment::Scaling(s) => scaling(s, &kernel, &mut c)?,
        Experiment::Orthogonality(o) => orthogonality(o, &kernel, &mut c)?,
        Experiment::CkCheck(k) => ck_check(k, &kernel, &mut c)?,
        Experiment::Simulate(s) => simulate(s, &kernel, &mut c)?,
    }
    Ok(c.finish())
}

fn kernel_check(k: &KernelCheck, kernel: &iv::HeatKernelConfig, c: &mut Collector) -> Result<()> {
    let p = params(k.lambda_left, k.lambda_right)?;
    let mut rng = stream(c.mc.seed, 0);
    let mut first = true;
    for &n in &k.chain_sizes {
        let spec = ChainSpec::new(n, p)?;
        for &t in &k.chain_times {
            let table = chain::transition_table(&spec, t, DEFAULT_TABLE_TOL)?;
            let row_err = (0..table.dim())
                .map(|x| (table.row(x).iter().sum::<f64>() - 1.0).abs())
                .fold(0.0, f64::max);
            let mut sym_err: f64 = 0.0;
            for x in 1..=n {
                for y in 1..=n {
                    sym_err = sym_err.max((table.get(x, y) - table.get(y, x)).abs());
                }
            }
            let r = CheckReport::deterministic(format!("kernel-chain/row-sums/N={n}/t={t}"), row_err, 0.0, k.tol_stochastic);
            if first {
                c.control(&r);
                first = false;
            }
            c.push(r);
            c.push(CheckReport::deterministic(format!("kernel-chain/symmetry/N={n}/t={t}"), sym_err, 0.0, k.tol_stochastic));
        }
    }
    for i in 0..k.chain_ck_cases {
        let n = rng.random_range(1..=32usize);
        let (s, t) = (5.0 * rng.random::<f64>(), 5.0 * rng.random::<f64>());
        let spec = ChainSpec::new(n, p)?;
        let ps = chain::transition_table(&spec, s, DEFAULT_TABLE_TOL)?;
        let pt = chain::transition_table(&spec, t, DEFAULT_TABLE_TOL)?;
        let pst = chain::transition_table(&spec, s + t, DEFAULT_TABLE_TOL)?;
        let err = pst.max_diff(&ps.compose(&pt));
        let r = CheckReport::deterministic(format!("kernel-chain/chapman-kolmogorov/N={n}/s={s:.4}/t={t:.4}"), err, 0.0, k.tol_chain_ck);
        if i == 0 {
            c.control(&r);
        }
        c.push(r);
    }
    for i in 0..k.chain_semigroup_cases {
        let n = rng.random_range(1..=16usize);
        let (s, t) = (5.0 * rng.random::<f64>(), 5.0 * rng.random::<f64>());
        let spec = ChainSpec::new(n, p)?;
        let res = chain::verify_intensity_semigroup(&spec, s, t)?;
        let r = CheckReport::deterministic(format!("semigroup/chain/N={n}/s={s:.4}/t={t:.4}"), res, 0.0, k.tol_chain_semigroup);
        if i == 0 {
            c.control(&r);
        }
        c.push(r);
    }
    for i in 0..k.conservation_cases {
        let x = rng.random_range(0.01..0.99);
        let t = rng.random_range(0.01..3.0);
        let split = iv::absorption_split(x, t, kernel)?;
        let f = |y: f64| iv::abs_density(x, y, t, kernel).map(|v| v.value).unwrap_or(f64::NAN);
        let mass = quadrature::integrate(&f, 0.0, x, 1e-12) + quadrature::integrate(&f, x, 1.0, 1e-12);
        let r = CheckReport::deterministic(
            format!("kernel-continuum/conservation/x={x:.4}/t={t:.4}"),
            split.q0 + split.q1 + mass,
            1.0,
            k.tol_conservation,
        );
        if i == 0 {
            c.control(&r);
        }
        c.push(r);
    }
    for &factor in &[0.8, 1.0, 1.25] {
        let t = kernel.t_switch * factor;
        let mut worst: f64 = 0.0;
        for i in 1..=50 {
            for j in 1..=50 {
                let (x, y) = (i as f64 / 51.0, j as f64 / 51.0);
                let a = iv::abs_density_spectral(x, y, t, kernel.tol).value;
                let b = iv::abs_density_images(x, y, t, kernel.tol).value;
                worst = worst.max((a - b).abs());
            }
            let x = i as f64 / 51.0;
            worst = worst.max((iv::q0_spectral(x, t, kernel.tol).value - iv::q0_images(x, t, kernel.tol).value).abs());
        }
        c.push(CheckReport::deterministic(format!("kernel-continuum/cross-series/t={t}"), worst, 0.0, 10.0 * kernel.tol));
    }
    for i in 0..k.continuum_ck_cases {
        let (x, y) = (rng.random_range(0.02..0.98), rng.random_range(0.02..0.98));
        let (s, t) = (rng.random_range(0.05..2.0), rng.random_range(0.05..2.0));
        let f = |u: f64| {
            iv::abs_density(x, u, s, kernel).map(|v| v.value).unwrap_or(f64::NAN)
                * iv::abs_density(u, y, t, kernel).map(|v| v.value).unwrap_or(f64::NAN)
        };
        let (a, b) = (x.min(y), x.max(y));
        let lhs = quadrature::integrate(&f, 0.0, a, 1e-12) + quadrature::integrate(&f, a, b, 1e-12) + quadrature::integrate(&f, b, 1.0, 1e-12);
        let rhs = iv::abs_density(x, y, s + t, kernel)?.value;
        let r = CheckReport::deterministic(
            format!("kernel-continuum/chapman-kolmogorov/x={x:.4}/y={y:.4}/s={s:.4}/t={t:.4}"),
            lhs,
            rhs,
            k.tol_continuum_ck,
        );
        if i == 0 {
            c.control(&r);
        }
        c.push(r);
    }
    for i in 0..k.continuum_semigroup_cases {
        let y = rng.random_range(0.02..0.98);
        let (s, t) = (rng.random_range(0.05..2.0), rng.random_range(0.05..2.0));
        let f = |x: f64| {
            iv::abs_density(x, y, t, kernel).map(|v| v.value).unwrap_or(f64::NAN)
                * iv::gas_intensity(x, s, &p, kernel).unwrap_or(f64::NAN)
        };
        let lhs = quadrature::integrate(&f, 0.0, y, 1e-11) + quadrature::integrate(&f, y, 1.0, 1e-11);
        let rhs = iv::gas_intensity(y, t + s, &p, kernel)? - iv::gas_intensity(y, t, &p, kernel)?;
        let r = CheckReport::deterministic(
            format!("semigroup/continuum/y={y:.4}/s={s:.4}/t={t:.4}"),
            lhs,
            rhs,
            k.tol_continuum_semigroup,
        );
        if i == 0 {
            c.control(&r);
        }
        c.push(r);
    }
    Ok(())
}

/// Dual configurations with interior mass at least one on at most
/// `max_support` sites, tallies at most `max_absorbed`, total mass at most
/// `max_dual`.
pub fn dual_battery(n_sites: usize, max_dual: u64, max_support: usize, max_absorbed: u64) -> Vec<DualConfiguration> {
    let mut interior: Vec<Vec<u64>> = Vec::new();
    let mut cur = vec![0u64; n_sites];
    fn rec(i: usize, left: u64, cur: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if i == cur.len() {
            out.push(cur.clone());
            return;
        }
        for v in 0..=left {
            cur[i] = v;
            rec(i + 1, left - v, cur, out);
        }
        cur[i] = 0;
    }
    rec(0, max_dual, &mut cur, &mut interior);
    let mut out = Vec::new();
    for counts in interior {
        let mass: u64 = counts.iter().sum();
        let support = counts.iter().filter(|&&c| c > 0).count();
        if mass == 0 || support > max_support {
            continue;
        }
        for l in 0..=max_absorbed {
            for r in 0..=max_absorbed {
                if mass + l + r <= max_dual {
                    out.push(DiscreteConfiguration::new(counts.clone()).with_absorbed(l, r));
                }
            }
        }
    }
    out.sort_by_key(|x| (x.total_mass(), x.absorbed_left + x.absorbed_right, std::cmp::Reverse(x.counts.clone())));
    out
}

fn battery_stats(battery: &[DualConfiguration], zeta: &DiscreteConfiguration, p: &ReservoirParams, out: &mut [f64]) -> Result<()> {
    for (o, xi) in out.iter_mut().zip(battery) {
        *o = reservoir_duality(xi, zeta, p)?;
    }
    Ok(())
}

fn duality_discrete(d: &DualityDiscrete, c: &mut Collector) -> Result<()> {
    let p = params(d.lambda_left, d.lambda_right)?;
    let spec = ChainSpec::new(d.n_sites, p)?;
    let eta0 = discrete(&d.initial)?;
    let battery = dual_battery(d.n_sites, d.max_dual, d.max_support, d.max_absorbed);
    c.detail("battery_size", json!(battery.len()));
    for (ti, &t) in d.times.iter().enumerate() {
        let table = chain::transition_table(&spec, t, DEFAULT_TABLE_TOL)?;
        let mc = run_mc_multi(c.mc.n_samples, c.seed(ti as u64), c.mc.streams, battery.len(), |rng, out| {
            let zeta = chain::simulate_reservoir(&eta0, t, &spec, rng)?;
            battery_stats(&battery, &zeta, &p, out)
        })?;
        for (j, xi) in battery.iter().enumerate() {
            let exact = chain::dual_expectation_discrete_with_table(xi, &eta0, &table, &p, DEFAULT_DUAL_CAP)?;
            let name = format!("duality-discrete/t={t}/xi={}", label(xi));
            let r = CheckReport::duality(&name, &mc[j], exact, c.mc.z_max);
            if ti == 0 && j == 0 {
                c.control(&r);
            }
            c.estimate(&name, &mc[j]);
            c.push(r);
        }
    }
    Ok(())
}

fn equivalence(d: &DualityDiscrete, c: &mut Collector) -> Result<()> {
    let p = params(d.lambda_left, d.lambda_right)?;
    let spec = ChainSpec::new(d.n_sites, p)?;
    let eta0 = discrete(&d.initial)?;
    let battery = dual_battery(d.n_sites, d.max_dual, d.max_support, d.max_absorbed);
    c.detail("battery_size", json!(battery.len()));
    for (ti, &t) in d.times.iter().enumerate() {
        let gas = GasSampler::new(&spec, t)?;
        let res = run_mc_multi(c.mc.n_samples, c.seed(2 * ti as u64), c.mc.streams, battery.len(), |rng, out| {
            let zeta = chain::simulate_reservoir(&eta0, t, &spec, rng)?;
            battery_stats(&battery, &zeta, &p, out)
        })?;
        let gmc = run_mc_multi(c.mc.n_samples, c.seed(2 * ti as u64 + 1), c.mc.streams, battery.len(), |rng, out| {
            let eta = gas.sample(&eta0, rng)?;
            battery_stats(&battery, &eta, &p, out)
        })?;
        for (j, xi) in battery.iter().enumerate() {
            let name = format!("equivalence/t={t}/xi={}", label(xi));
            c.estimate(&format!("{name}/reservoir"), &res[j]);
            c.estimate(&format!("{name}/gas"), &gmc[j]);
            c.push(CheckReport::equivalence(name, &res[j], &gmc[j], c.mc.z_max));
        }
        if ti == 0 && c.negative_control {
            // the gas side is built with a wrong right reservoir
            let bad = ChainSpec::new(d.n_sites, params(d.lambda_left, 2.0 * d.lambda_right + 1.0)?)?;
            let bad_gas = GasSampler::new(&bad, t)?;
            let mut probe = DiscreteConfiguration::empty(d.n_sites);
            probe.counts[d.n_sites - 1] = 1;
            let j = battery.iter().position(|x| *x == probe).unwrap_or(0);
            let xi = [battery[j].clone()];
            let bmc = run_mc_multi(c.mc.n_samples, c.seed(1_000), c.mc.streams, 1, |rng, out| {
                let eta = bad_gas.sample(&eta0, rng)?;
                battery_stats(&xi, &eta, &p, out)
            })?;
            let name = format!("equivalence/t={t}/xi={}/corrupted-lambda-right", label(&xi[0]));
            c.push(CheckReport::equivalence(name, &res[j], &bmc[0], c.mc.z_max).as_negative_control());
        }
    }
    Ok(())
}

fn interval_of(b: &[f64; 2]) -> Result<Interval> {
    Interval::new(b[0], b[1])
}

fn duality_continuum(d: &DualityContinuum, kernel: &iv::HeatKernelConfig, c: &mut Collector) -> Result<()> {
    let p = params(d.lambda_left, d.lambda_right)?;
    let (b1, b2) = (interval_of(&d.boxes[0])?, interval_of(&d.boxes[1])?);
    let labels = ["n=1/B1", "n=1/B2", "n=2/B1xB1", "n=2/B1xB2", "n=2/B2xB2"];
    let mut fallbacks = 0;
    let mut label_seed = 0;
    for set in &d.initial_sets {
        let eta0 = ContinuumConfiguration::new(set.clone())?;
        for &t in &d.times {
            let density1 = |z: f64| iv::dual_density(&[z], t, &eta0, &p, kernel).map(|v| v.value).unwrap_or(f64::NAN);
            let density2 = |z1: f64, z2: f64| iv::dual_density(&[z1, z2], t, &eta0, &p, kernel).map(|v| v.value).unwrap_or(f64::NAN);
            let exact = [
                quadrature::integrate(&density1, b1.lo, b1.hi, d.quad_tol),
                quadrature::integrate(&density1, b2.lo, b2.hi, d.quad_tol),
                quadrature::integrate_2d(&density2, (b1.lo, b1.hi), (b1.lo, b1.hi), d.quad_tol),
                quadrature::integrate_2d(&density2, (b1.lo, b1.hi), (b2.lo, b2.hi), d.quad_tol),
                quadrature::integrate_2d(&density2, (b2.lo, b2.hi), (b2.lo, b2.hi), d.quad_tol),
            ];
            let sampler = BdbgSampler::new(t, &p, kernel)?;
            let mc = run_mc_multi(c.mc.n_samples, c.seed(label_seed), c.mc.streams, 5, |rng, out| {
                let eta = sampler.sample(&eta0, rng)?;
                let (n1, n2) = (eta.count_in(b1.lo, b1.hi), eta.count_in(b2.lo, b2.hi));
                out.copy_from_slice(&[
                    n1 as f64,
                    n2 as f64,
                    falling_factorial_f64(n1, 2),
                    (n1 * n2) as f64,
                    falling_factorial_f64(n2, 2),
                ]);
                Ok(())
            })?;
            fallbacks += sampler.fallback_count();
            for (j, l) in labels.iter().enumerate() {
                let name = format!("duality-continuum/eta0={set:?}/t={t}/{l}");
                let r = CheckReport::duality(&name, &mc[j], KernelValue::new(exact[j], 10.0 * d.quad_tol), c.mc.z_max);
                if label_seed == 0 && j == 0 {
                    c.control(&r);
                }
                c.estimate(&name, &mc[j]);
                c.push(r);
            }
            label_seed += 1;
        }
    }
    c.detail("rejection_fallbacks", json!(fallbacks));
    Ok(())
}

fn bin_counts(eta: &ContinuumConfiguration, edges: &[f64]) -> Vec<u64> {
    edges.windows(2).map(|w| eta.count_in(w[0], w[1])).collect()
}

fn stationary_mass(p: &ReservoirParams, a: f64, b: f64) -> f64 {
    // exact integral of the linear profile
    p.lambda_left * ((1.0 - a).powi(2) - (1.0 - b).powi(2)) / 2.0 + p.lambda_right * (b * b - a * a) / 2.0
}

fn stationary(s: &Stationary, kernel: &iv::HeatKernelConfig, c: &mut Collector) -> Result<()> {
    let p = params(s.lambda_left, s.lambda_right)?;
    let nb = s.bins.len() - 1;
    let stat: Vec<f64> = s.bins.windows(2).map(|w| stationary_mass(&p, w[0], w[1])).collect();
    // started from the stationary Poisson process
    let sampler = BdbgSampler::new(s.t_stationary, &p, kernel)?;
    let total = 0.5 * (p.lambda_left + p.lambda_right);
    let mc = run_mc_multi(c.mc.n_samples, c.seed(0), c.mc.streams, 3 * nb, |rng, out| {
        let start = iv::sample_poisson_process(rng, |x| iv::stationary_intensity(x, &p), total, p.max_lambda());
        let eta = sampler.sample(&ContinuumConfiguration { positions: start, absorbed_left: 0, absorbed_right: 0 }, rng)?;
        for (b, n) in bin_counts(&eta, &s.bins).into_iter().enumerate() {
            for k in 0..3 {
                out[3 * b + k] = falling_factorial_f64(n, k as u64 + 1);
            }
        }
        Ok(())
    })?;
    for b in 0..nb {
        let name = format!("stationary-start/t={}/bin{}", s.t_stationary, b + 1);
        let reports = poissonity_from_estimates(&name, &mc[3 * b..3 * b + 3], stat[b], c.mc.z_max);
        for (k, r) in reports.into_iter().enumerate() {
            if b == 0 && k == 0 {
                c.control(&r);
            }
            c.estimate(&r.name, &mc[3 * b + k]);
            c.push(r);
        }
    }
    // relaxation from a fixed configuration
    let eta0 = ContinuumConfiguration::new(s.initial.clone())?;
    let mut exact_disc = Vec::new();
    let mut mc_disc = Vec::new();
    for (ti, &t) in s.times.iter().enumerate() {
        let density = |z: f64| iv::dual_density(&[z], t, &eta0, &p, kernel).map(|v| v.value).unwrap_or(f64::NAN);
        let exact: Vec<f64> = s.bins.windows(2).map(|w| quadrature::integrate(&density, w[0], w[1], 1e-11)).collect();
        let sampler = BdbgSampler::new(t, &p, kernel)?;
        let mc = run_mc_multi(c.mc.n_samples, c.seed(1 + ti as u64), c.mc.streams, nb, |rng, out| {
            let eta = sampler.sample(&eta0, rng)?;
            for (o, n) in out.iter_mut().zip(bin_counts(&eta, &s.bins)) {
                *o = n as f64;
            }
            Ok(())
        })?;
        for b in 0..nb {
            let name = format!("relaxation/t={t}/bin{}/mean", b + 1);
            let r = CheckReport::duality(&name, &mc[b], KernelValue::new(exact[b], 1e-10), c.mc.z_max);
            if ti == 0 && b == 0 {
                c.control(&r);
            }
            c.estimate(&name, &mc[b]);
            c.push(r);
        }
        let rel = |v: f64, b: usize| (v - stat[b]).abs() / stat[b];
        exact_disc.push((0..nb).map(|b| rel(exact[b], b)).fold(0.0, f64::max));
        let (worst_b, worst) = (0..nb)
            .map(|b| (b, rel(mc[b].mean, b)))
            .fold((0, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        mc_disc.push((worst, mc[worst_b].stderr / stat[worst_b]));
    }
    for i in 1..s.times.len() {
        let (a, b) = (s.times[i - 1], s.times[i]);
        c.push(CheckReport::upper_bound(
            format!("relaxation/exact-discrepancy-decreasing/t={a}->{b}"),
            exact_disc[i] - exact_disc[i - 1],
            0.0,
        ));
        let noise = c.mc.z_max * (mc_disc[i].1.powi(2) + mc_disc[i - 1].1.powi(2)).sqrt();
        c.push(CheckReport::upper_bound(
            format!("relaxation/mc-discrepancy-nonincreasing-within-noise/t={a}->{b}"),
            mc_disc[i].0 - mc_disc[i - 1].0,
            noise,
        ));
    }
    let last = s.times.len() - 1;
    c.push(CheckReport::upper_bound(
        format!("relaxation/mc-final-relative-discrepancy/t={}", s.times[last]),
        mc_disc[last].0,
        s.rel_tol,
    ));
    let strictly = mc_disc.windows(2).all(|w| w[1].0 < w[0].0);
    c.detail(
        "relaxation",
        json!({
            "times": s.times,
            "exact_relative_discrepancy": exact_disc,
            "mc_relative_discrepancy": mc_disc.iter().map(|d| d.0).collect::<Vec<_>>(),
            "mc_relative_discrepancy_stderr": mc_disc.iter().map(|d| d.1).collect::<Vec<_>>(),
            "mc_strictly_decreasing": strictly,
        }),
    );
    c.tables.push(Table {
        file_name: "relaxation.csv".into(),
        header: vec!["t".into(), "exact_relative_discrepancy".into(), "mc_relative_discrepancy".into(), "mc_stderr".into()],
        rows: (0..s.times.len())
            .map(|i| vec![fmt_float(s.times[i]), fmt_float(exact_disc[i]), fmt_float(mc_disc[i].0), fmt_float(mc_disc[i].1)])
            .collect(),
    });
    Ok(())
}

fn doob(d: &Doob, kernel: &iv::HeatKernelConfig, c: &mut Collector) -> Result<()> {
    let theta = d.theta;
    let p = params(theta, theta)?;
    let spec = ChainSpec::new(d.n_sites, p)?;
    let n = d.n_sites;
    let mc = run_mc_multi(c.mc.n_samples, c.seed(0), c.mc.streams, 3 * n, |rng, out| {
        let start = DiscreteConfiguration::new((0..n).map(|_| poisson(rng, theta)).collect());
        let zeta = chain::simulate_reservoir(&start, d.t, &spec, rng)?;
        for (i, &k) in zeta.counts.iter().enumerate() {
            for m in 0..3 {
                out[3 * i + m] = falling_factorial_f64(k, m as u64 + 1);
            }
        }
        Ok(())
    })?;
    for i in 0..n {
        let name = format!("doob-chain/t={}/site{}", d.t, i + 1);
        for (m, r) in poissonity_from_estimates(&name, &mc[3 * i..3 * i + 3], theta, c.mc.z_max).into_iter().enumerate() {
            if i == 0 && m == 0 {
                c.control(&r);
            }
            c.estimate(&r.name, &mc[3 * i + m]);
            c.push(r);
        }
    }
    // continuum: Poisson(rho) initial data stays Poisson with the evolved intensity
    let cp = params(d.continuum_lambda[0], d.continuum_lambda[1])?;
    let rho = d.continuum_rho;
    let evolved = iv::doob_intensity(|_| rho, d.continuum_t, &cp, kernel)?;
    let means: Vec<f64> = d.bins.windows(2).map(|w| quadrature::integrate(&evolved, w[0], w[1], 1e-9)).collect();
    let stat = iv::doob_intensity(|x| iv::stationary_intensity(x, &cp), d.continuum_t, &cp, kernel)?;
    let residual = (1..50)
        .map(|i| {
            let z = i as f64 / 50.0;
            (stat(z) - iv::stationary_intensity(z, &cp)).abs()
        })
        .fold(0.0, f64::max);
    let r = CheckReport::deterministic("doob-continuum/stationary-fixed-point", residual, 0.0, 1e-6);
    c.control(&r);
    c.push(r);
    let sampler = BdbgSampler::new(d.continuum_t, &cp, kernel)?;
    let nb = d.bins.len() - 1;
    let mc = run_mc_multi(c.mc.n_samples, c.seed(1), c.mc.streams, 3 * nb, |rng, out| {
        let start = iv::sample_poisson_process(rng, |_| rho, rho, rho.max(f64::MIN_POSITIVE));
        let eta = sampler.sample(&ContinuumConfiguration { positions: start, absorbed_left: 0, absorbed_right: 0 }, rng)?;
        for (b, k) in bin_counts(&eta, &d.bins).into_iter().enumerate() {
            for m in 0..3 {
                out[3 * b + m] = falling_factorial_f64(k, m as u64 + 1);
            }
        }
        Ok(())
    })?;
    for b in 0..nb {
        let name = format!("doob-continuum/t={}/bin{}", d.continuum_t, b + 1);
        for (m, r) in poissonity_from_estimates(&name, &mc[3 * b..3 * b + 3], means[b], c.mc.z_max).into_iter().enumerate() {
            c.estimate(&r.name, &mc[3 * b + m]);
            c.push(r);
        }
    }
    Ok(())
}

fn scaling(s: &Scaling, kernel: &iv::HeatKernelConfig, c: &mut Collector) -> Result<()> {
    let p = params(s.lambda_left, s.lambda_right)?;
    let start = match s.start {
        ScalingStartConfig::Empty => ScalingStart::Empty,
        ScalingStartConfig::Point => ScalingStart::Point(s.x0),
    };
    let table = scaling_experiment(&s.n_list, s.t, &p, &s.bins, start, c.mc.n_samples, c.mc.seed, c.mc.streams, kernel)?;
    let rows = &table.rows;
    let scale = p.max_lambda().max(f64::MIN_POSITIVE);
    for i in 1..rows.len() {
        let (a, b) = (&rows[i - 1], &rows[i]);
        let r = CheckReport::upper_bound(
            format!("scaling-intensity/decreasing/N={}->{}", a.n_sites, b.n_sites),
            b.intensity_max_error - a.intensity_max_error,
            0.0,
        );
        if i == 1 {
            c.control(&r);
        }
        c.push(r);
        c.push(CheckReport::upper_bound(
            format!("scaling-moments/exact-discrepancy-decreasing/N={}->{}", a.n_sites, b.n_sites),
            b.exact_discrepancy - a.exact_discrepancy,
            0.0,
        ));
        c.push(CheckReport::upper_bound(
            format!("scaling-moments/mc-discrepancy-decreasing/N={}->{}", a.n_sites, b.n_sites),
            b.mc_discrepancy - a.mc_discrepancy,
            0.0,
        ));
    }
    let last = rows.last().expect("non-empty n_list");
    c.push(CheckReport::upper_bound(
        format!("scaling-intensity/final-relative-error/N={}", last.n_sites),
        last.intensity_max_error / scale,
        s.intensity_rel_tol,
    ));
    for (ri, row) in rows.iter().enumerate() {
        for (j, l) in row.labels.iter().enumerate() {
            let name = format!("scaling-moments/mc-vs-chain/N={}/{l}", row.n_sites);
            let r = CheckReport::duality(&name, &row.mc[j], KernelValue::new(row.chain_exact[j], 1e-10), c.mc.z_max);
            if ri == 0 && j == 0 {
                c.control(&r);
            }
            c.estimate(&name, &row.mc[j]);
            c.push(r);
        }
    }
    for (j, l) in last.labels.iter().enumerate() {
        let gap = (last.chain_exact[j] - last.reference[j]).abs();
        c.push(CheckReport::duality(
            format!("scaling-moments/mc-vs-limit-up-to-exact-gap/N={}/{l}", last.n_sites),
            &last.mc[j],
            KernelValue::new(last.reference[j], gap + 1e-9),
            c.mc.z_max,
        ));
    }
    c.detail("scaling", serde_json::to_value(&table).map_err(|e| Error::Io(e.to_string()))?);
    let mut header = vec!["n_sites".to_string(), "intensity_max_error".into(), "exact_discrepancy".into(), "mc_discrepancy".into()];
    for l in &last.labels {
        header.push(format!("{l}/chain_exact"));
        header.push(format!("{l}/mc_mean"));
        header.push(format!("{l}/mc_stderr"));
        header.push(format!("{l}/limit"));
    }
    c.tables.push(Table {
        file_name: "scaling.csv".into(),
        header,
        rows: rows
            .iter()
            .map(|row| {
                let mut v = vec![
                    row.n_sites.to_string(),
                    fmt_float(row.intensity_max_error),
                    fmt_float(row.exact_discrepancy),
                    fmt_float(row.mc_discrepancy),
                ];
                for j in 0..row.labels.len() {
                    v.extend([
                        fmt_float(row.chain_exact[j]),
                        fmt_float(row.mc[j].mean),
                        fmt_float(row.mc[j].stderr),
                        fmt_float(row.reference[j]),
                    ]);
                }
                v
            })
            .collect(),
    });
    Ok(())
}

/// `E[C_j(X) C_k(X)]` for `X ~ Poisson(theta)` by direct summation over the
/// pmf. The polynomial weights grow in the tail, so the sum runs until the
/// terms themselves are negligible rather than the tail mass.
pub fn charlier_product_moment(j: u64, k: u64, theta: f64) -> f64 {
    let mut pmf = (-theta).exp();
    let mut total = 0.0;
    let mut n = 0u64;
    loop {
        let term = pmf * charlier(j, n, theta) * charlier(k, n, theta);
        total += term;
        if (n as f64) > theta + 10.0 && (term.abs() < 1e-20 || pmf == 0.0) {
            break;
        }
        n += 1;
        pmf *= theta / n as f64;
    }
    total
}

fn orthogonality(o: &Orthogonality, kernel: &iv::HeatKernelConfig, c: &mut Collector) -> Result<()> {
    let theta = o.theta;
    // Charlier polynomials under Poisson(theta)
    let pairs: Vec<(u64, u64)> = (0..=3).flat_map(|j| (j..=3).map(move |k| (j, k))).collect();
    let mc = run_mc_multi(c.mc.n_samples, c.seed(0), c.mc.streams, pairs.len(), |rng, out| {
        let x = poisson(rng, theta);
        for (o, &(j, k)) in out.iter_mut().zip(&pairs) {
            *o = charlier(j, x, theta) * charlier(k, x, theta);
        }
        Ok(())
    })?;
    for (i, &(j, k)) in pairs.iter().enumerate() {
        let expected = if j == k { (1..=j).map(|v| v as f64).product::<f64>() * theta.powi(j as i32) } else { 0.0 };
        let name = format!("charlier/E[C{j}C{k}]");
        let r = CheckReport::statistical(&name, &mc[i], expected, c.mc.z_max);
        if i == 0 {
            c.control(&r);
        }
        c.estimate(&name, &mc[i]);
        c.push(r);
        let r = CheckReport::deterministic(format!("charlier-exact/E[C{j}C{k}]"), charlier_product_moment(j, k, theta), expected, 1e-9);
        if i == 0 {
            c.control(&r);
        }
        c.push(r);
    }
    // orthogonality relation for deformed factorial measures of a Poisson process
    let (b1, b2) = (interval_of(&o.boxes[0])?, interval_of(&o.boxes[1])?);
    let fns = vec![
        ("1B1", ProductIndicator::new(vec![(b1, 1)])?),
        ("1B2", ProductIndicator::new(vec![(b2, 1)])?),
        ("1B1^2", ProductIndicator::new(vec![(b1, 2)])?),
        ("1B1x1B2", ProductIndicator::new(vec![(b1, 1), (b2, 1)])?),
        ("1B2^2", ProductIndicator::new(vec![(b2, 2)])?),
    ];
    let fpairs: Vec<(usize, usize)> = (0..fns.len()).flat_map(|a| (a..fns.len()).map(move |b| (a, b))).collect();
    let mc = run_mc_multi(c.mc.n_samples, c.seed(1), c.mc.streams, fpairs.len(), |rng, out| {
        let zeta = iv::sample_poisson_process(rng, |_| theta, theta, theta);
        let vals: Vec<f64> = fns.iter().map(|(_, f)| theta_factorial_functional(&zeta, f, theta)).collect();
        for (o, &(a, b)) in out.iter_mut().zip(&fpairs) {
            *o = vals[a] * vals[b];
        }
        Ok(())
    })?;
    for (i, &(a, b)) in fpairs.iter().enumerate() {
        let expected = poisson_orthogonality_expectation(&fns[a].1, &fns[b].1, theta);
        let name = format!("orthogonality-relation/{}*{}", fns[a].0, fns[b].0);
        let r = CheckReport::statistical(&name, &mc[i], expected, c.mc.z_max);
        if i == 0 {
            c.control(&r);
        }
        c.estimate(&name, &mc[i]);
        c.push(r);
    }
    // deformed moments of the equilibrium gas vanish
    let eq = params(theta, theta)?.with_theta(theta)?;
    let sampler = BdbgSampler::new(o.t, &eq, kernel)?;
    let mc = run_mc_multi(c.mc.n_samples, c.seed(2), c.mc.streams, fns.len(), |rng, out| {
        let start = iv::sample_poisson_process(rng, |_| theta, theta, theta);
        let eta = sampler.sample(&ContinuumConfiguration { positions: start, absorbed_left: 0, absorbed_right: 0 }, rng)?;
        for (o, (_, f)) in out.iter_mut().zip(&fns) {
            *o = theta_factorial_functional(&eta.positions, f, theta);
        }
        Ok(())
    })?;
    for (i, (l, _)) in fns.iter().enumerate() {
        let name = format!("equilibrium-deformed/t={}/{l}", o.t);
        let r = CheckReport::statistical(&name, &mc[i], 0.0, c.mc.z_max);
        if i == 0 {
            c.control(&r);
        }
        c.estimate(&name, &mc[i]);
        c.push(r);
    }
    // orthogonal reservoir duality on the chain
    let p = params(o.chain_lambda[0], o.chain_lambda[1])?.with_theta(theta)?;
    let spec = ChainSpec::new(o.n_sites, p)?;
    let eta0 = discrete(&o.chain_initial)?;
    let battery = dual_battery(o.n_sites, 2, o.n_sites, 1);
    let table = chain::transition_table(&spec, o.chain_t, DEFAULT_TABLE_TOL)?;
    let mc = run_mc_multi(c.mc.n_samples, c.seed(3), c.mc.streams, battery.len(), |rng, out| {
        let zeta = chain::simulate_reservoir(&eta0, o.chain_t, &spec, rng)?;
        for (o, xi) in out.iter_mut().zip(&battery) {
            *o = orthogonal_reservoir_duality(xi, &zeta, &p)?;
        }
        Ok(())
    })?;
    for (j, xi) in battery.iter().enumerate() {
        let exact = chain::dual_expectation_with(
            xi,
            &table,
            |x| orthogonal_reservoir_duality(x, &eta0, &p).unwrap_or(f64::NAN),
            DEFAULT_DUAL_CAP,
        )?;
        let name = format!("orthogonal-duality-chain/t={}/xi={}", o.chain_t, label(xi));
        let r = CheckReport::statistical(&name, &mc[j], exact, c.mc.z_max);
        if j == 0 {
            c.control(&r);
        }
        c.estimate(&name, &mc[j]);
        c.push(r);
    }
    // subset expansion, exhaustively on small inputs
    for n in 1..=o.exhaustive_sites {
        for &th in &[0.5, theta] {
            let worst = subset_expansion_error(n, o.exhaustive_count, o.exhaustive_dual, th);
            let r = CheckReport::deterministic(format!("subset-expansion/N={n}/theta={th}"), worst, 0.0, 1e-9);
            if n == 1 && th == 0.5 {
                c.control(&r);
            }
            c.push(r);
        }
    }
    Ok(())
}

fn odometer(v: &mut [u64], max: u64) -> bool {
    for x in v.iter_mut() {
        if *x < max {
            *x += 1;
            return true;
        }
        *x = 0;
    }
    false
}

/// Largest `|D_theta^or(xi, eta) - sum_{xi' <= xi} binom(xi, xi') (-theta)^{|xi - xi'|} D^cl(xi', eta)|`
/// over all `eta` with entries up to `max_count` and `xi` of mass up to `max_dual`.
pub fn subset_expansion_error(n: usize, max_count: u64, max_dual: u64, theta: f64) -> f64 {
    let mut worst: f64 = 0.0;
    let mut xi = vec![0u64; n];
    loop {
        if xi.iter().sum::<u64>() <= max_dual {
            let x = DiscreteConfiguration::new(xi.clone());
            let mut eta = vec![0u64; n];
            loop {
                let e = DiscreteConfiguration::new(eta.clone());
                let direct = orthogonal_duality(&x, &e, theta).unwrap_or(f64::NAN);
                let mut sum = 0.0;
                let mut sub = vec![0u64; n];
                loop {
                    if sub.iter().zip(&xi).all(|(a, b)| a <= b) {
                        let w: f64 = sub.iter().zip(&xi).map(|(&a, &b)| binomial(b, a)).product();
                        let drop = (xi.iter().sum::<u64>() - sub.iter().sum::<u64>()) as i32;
                        let d = classical_duality(&DiscreteConfiguration::new(sub.clone()), &e).unwrap_or(0) as f64;
                        sum += w * (-theta).powi(drop) * d;
                    }
                    if !odometer(&mut sub, max_dual) {
                        break;
                    }
                }
                worst = worst.max((direct - sum).abs());
                if !odometer(&mut eta, max_count) {
                    break;
                }
            }
        }
        if !odometer(&mut xi, max_dual) {
            break;
        }
    }
    worst
}

fn ck_check(k: &CkCheck, kernel: &iv::HeatKernelConfig, c: &mut Collector) -> Result<()> {
    let p = params(k.lambda_left, k.lambda_right)?;
    let spec = ChainSpec::new(k.n_sites, p)?;
    let eta0 = discrete(&k.initial)?;
    let reports = crate::estimators::ck_check_gas_discrete(&eta0, k.s, k.t, &spec, c.mc.n_samples, c.seed(0), c.mc.streams, c.mc.z_max)?;
    for (i, r) in reports.into_iter().enumerate() {
        if i == 0 {
            c.control(&r);
        }
        c.push(r);
    }
    let res = chain::verify_intensity_semigroup(&spec, k.s, k.t)?;
    let r = CheckReport::deterministic("ck-deterministic/chain-intensity-semigroup", res, 0.0, 1e-10);
    c.control(&r);
    c.push(r);
    if k.s > 0.0 {
        let eta0 = ContinuumConfiguration::new(k.continuum_initial.clone())?;
        let reports = crate::estimators::ck_check_gas_continuum(
            &eta0, k.s, k.t, &p, &k.bins, kernel, c.mc.n_samples, c.seed(1), c.mc.streams, c.mc.z_max,
        )?;
        for (i, r) in reports.into_iter().enumerate() {
            if i == 0 {
                c.control(&r);
            }
            c.push(r);
        }
        // one-shot injected intensity versus injected-then-evolved plus fresh injection
        let mut worst: f64 = 0.0;
        for i in 1..20 {
            let y = i as f64 / 20.0;
            let f = |x: f64| iv::abs_density(x, y, k.t, kernel).map(|v| v.value).unwrap_or(f64::NAN) * iv::gas_intensity(x, k.s, &p, kernel).unwrap_or(f64::NAN);
            let two_stage = quadrature::integrate(&f, 0.0, y, 1e-11) + quadrature::integrate(&f, y, 1.0, 1e-11) + iv::gas_intensity(y, k.t, &p, kernel)?;
            worst = worst.max((two_stage - iv::gas_intensity(y, k.s + k.t, &p, kernel)?).abs());
        }
        c.push(CheckReport::deterministic("ck-deterministic/continuum-intensity-semigroup", worst, 0.0, 1e-6));
    }
    Ok(())
}

fn simulate(s: &Simulate, kernel: &iv::HeatKernelConfig, c: &mut Collector) -> Result<()> {
    let p = params(s.lambda_left, s.lambda_right)?;
    match s.geometry {
        Geometry::Chain => {
            let eta0 = discrete(&s.counts)?;
            let spec = ChainSpec::new(eta0.n_sites(), p)?;
            let gas = match s.method {
                SimulationMethod::Gas => Some(GasSampler::new(&spec, s.t)?),
                SimulationMethod::Reservoir => None,
            };
            let mut header = vec!["replica".to_string()];
            header.extend((1..=spec.n_sites).map(|i| format!("site_{i}")));
            header.extend(["absorbed_left".to_string(), "absorbed_right".to_string()]);
            let mut rows = Vec::new();
            let mut samples = Vec::new();
            for r in 0..s.replicas {
                let mut rng = stream(c.mc.seed, r);
                let eta = match &gas {
                    Some(g) => g.sample(&eta0, &mut rng)?,
                    None => chain::simulate_reservoir(&eta0, s.t, &spec, &mut rng)?,
                };
                let mut row = vec![r.to_string()];
                row.extend(eta.counts.iter().map(u64::to_string));
                row.extend([eta.absorbed_left.to_string(), eta.absorbed_right.to_string()]);
                rows.push(row);
                samples.push(eta);
            }
            c.detail("samples", serde_json::to_value(&samples).map_err(|e| Error::Io(e.to_string()))?);
            c.tables.push(Table { file_name: "samples.csv".into(), header, rows });
        }
        Geometry::Interval => {
            let eta0 = ContinuumConfiguration::new(s.positions.clone())?;
            let sampler = if s.t > 0.0 { Some(BdbgSampler::new(s.t, &p, kernel)?) } else { None };
            let mut rows = Vec::new();
            let mut samples = Vec::new();
            for r in 0..s.replicas {
                let mut rng = stream(c.mc.seed, r);
                let eta = match &sampler {
                    Some(sm) => sm.sample(&eta0, &mut rng)?,
                    None => eta0.clone(),
                };
                for (i, x) in eta.positions.iter().enumerate() {
                    rows.push(vec![r.to_string(), i.to_string(), fmt_float(*x)]);
                }
                samples.push(eta);
            }
            c.detail("samples", serde_json::to_value(&samples).map_err(|e| Error::Io(e.to_string()))?);
            c.tables.push(Table {
                file_name: "samples.csv".into(),
                header: vec!["replica".into(), "index".into(), "position".into()],
                rows,
            });
            c.tables.push(Table {
                file_name: "absorbed.csv".into(),
                header: vec!["replica".into(), "absorbed_left".into(), "absorbed_right".into()],
                rows: samples
                    .iter()
                    .enumerate()
                    .map(|(r, e)| vec![r.to_string(), e.absorbed_left.to_string(), e.absorbed_right.to_string()])
                    .collect(),
            });
        }
    }
    Ok(())
}

/// Profile kinds written by [`emit_profile`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileKind {
    Intensity,
    Stationary,
    Kernel,
}

/// Plot data on the uniform grid `x_i = i / (points - 1)`: the gas intensity
/// `lambda(t, .)`, the stationary profile, or the kernel row `p_t(x0, .)`.
pub fn emit_profile(
    kind: ProfileKind,
    points: usize,
    p: &ReservoirParams,
    t: f64,
    x0: f64,
    kernel: &iv::HeatKernelConfig,
) -> Result<Table> {
    crate::error::ensure(points >= 2, || "profile grid needs at least two points".into())?;
    let grid: Vec<f64> = (0..points).map(|i| i as f64 / (points - 1) as f64).collect();
    let (column, values): (&str, Vec<f64>) = match kind {
        ProfileKind::Stationary => ("stationary_intensity", grid.iter().map(|&x| iv::stationary_intensity(x, p)).collect()),
        ProfileKind::Intensity => (
            "intensity",
            grid.iter()
                .map(|&x| {
                    if t == 0.0 {
                        Ok(0.0)
                    } else if x <= 0.0 {
                        Ok(p.lambda_left)
                    } else if x >= 1.0 {
                        Ok(p.lambda_right)
                    } else {
                        iv::gas_intensity(x, t, p, kernel)
                    }
                })
                .collect::<Result<_>>()?,
        ),
        ProfileKind::Kernel => (
            "density",
            grid.iter().map(|&y| iv::abs_density(x0, y, t, kernel).map(|v| v.value)).collect::<Result<_>>()?,
        ),
    };
    Ok(Table {
        file_name: "profile.csv".into(),
        header: vec!["x".into(), column.into()],
        rows: grid.iter().zip(values).map(|(x, v)| vec![fmt_float(*x), fmt_float(v)]).collect(),
    })
}

