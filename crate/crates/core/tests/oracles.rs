//! Independent reference computations for the kernels, absorption split and
//! reservoir dynamics.

use bdgas::chain::{self, ChainSpec, DEFAULT_TABLE_TOL};
use bdgas::estimators::run_mc_multi;
use bdgas::experiments::charlier_product_moment;
use bdgas::interval::{self as iv, HeatKernelConfig, Outcome};
use bdgas::rng::{standard_normal, stream};
use bdgas::types::{ContinuumConfiguration, DiscreteConfiguration, ReservoirParams};
use rand::Rng;

fn params(l: f64, r: f64) -> ReservoirParams {
    ReservoirParams::new(l, r).unwrap()
}

/// Eigen-expansion of the absorbed walk with rate 1/2 to each neighbour.
fn spectral_chain(n: usize, x: usize, y: usize, t: f64) -> f64 {
    let n1 = (n + 1) as f64;
    (1..=n)
        .map(|k| {
            let a = k as f64 * std::f64::consts::PI / n1;
            2.0 / n1 * (a * x as f64).sin() * (a * y as f64).sin() * (t * (a.cos() - 1.0)).exp()
        })
        .sum()
}

#[test]
fn transition_table_matches_spectral_formula() {
    for &n in &[1usize, 3, 8, 20] {
        let spec = ChainSpec::new(n, params(1.0, 2.0)).unwrap();
        for &t in &[0.01, 0.4, 3.0, 25.0] {
            let table = chain::transition_table(&spec, t, DEFAULT_TABLE_TOL).unwrap();
            for x in 1..=n {
                for y in 1..=n {
                    let d = (table.get(x, y) - spectral_chain(n, x, y, t)).abs();
                    assert!(d < 1e-12, "N={n} t={t} ({x},{y}) off by {d}");
                }
            }
        }
    }
}

/// `(d/dt) m_i = (m_{i-1} + m_{i+1}) / 2 - m_i` with `m_0 = lambda_L`,
/// `m_{N+1} = lambda_R`, integrated by classical RK4.
fn reservoir_mean_ode(m0: &[f64], p: &ReservoirParams, t: f64, steps: usize) -> Vec<f64> {
    let n = m0.len();
    let rhs = |m: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| {
                let l = if i == 0 { p.lambda_left } else { m[i - 1] };
                let r = if i + 1 == n { p.lambda_right } else { m[i + 1] };
                0.5 * (l + r) - m[i]
            })
            .collect()
    };
    let h = t / steps as f64;
    let mut m = m0.to_vec();
    for _ in 0..steps {
        let k1 = rhs(&m);
        let a: Vec<f64> = m.iter().zip(&k1).map(|(x, k)| x + 0.5 * h * k).collect();
        let k2 = rhs(&a);
        let b: Vec<f64> = m.iter().zip(&k2).map(|(x, k)| x + 0.5 * h * k).collect();
        let k3 = rhs(&b);
        let c: Vec<f64> = m.iter().zip(&k3).map(|(x, k)| x + h * k).collect();
        let k4 = rhs(&c);
        for i in 0..n {
            m[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    m
}

#[test]
fn reservoir_means_follow_the_mean_ode() {
    let p = params(1.0, 3.0);
    let spec = ChainSpec::new(3, p).unwrap();
    let eta0 = DiscreteConfiguration::new(vec![2, 0, 1]);
    let t = 0.8;
    let ode = reservoir_mean_ode(&[2.0, 0.0, 1.0], &p, t, 4000);
    for i in 0..3 {
        let mut xi = DiscreteConfiguration::empty(3);
        xi.counts[i] = 1;
        let exact = chain::dual_expectation_discrete(&xi, &eta0, t, &spec).unwrap();
        assert!((exact - ode[i]).abs() < 1e-10, "site {}: {exact} vs {}", i + 1, ode[i]);
    }
    let mc = run_mc_multi(100_000, 11, 16, 3, |rng, out| {
        let z = chain::simulate_reservoir(&eta0, t, &spec, rng)?;
        for (o, &c) in out.iter_mut().zip(&z.counts) {
            *o = c as f64;
        }
        Ok(())
    })
    .unwrap();
    for i in 0..3 {
        let z = (mc[i].mean - ode[i]) / mc[i].stderr;
        assert!(z.abs() < 4.0, "site {}: z = {z}", i + 1);
    }
}

/// Crank-Nicolson for `u_t = u_xx / 2` on (0,1) with `u(0) = 1`, `u(1) = 0`,
/// `u(., 0) = 0`, started with a few implicit Euler steps to damp the
/// corner discontinuity.
fn q0_pde(t: f64, m: usize, steps: usize) -> Vec<f64> {
    let h = 1.0 / m as f64;
    let dt = t / steps as f64;
    let mut u = vec![0.0; m + 1];
    u[0] = 1.0;
    for step in 0..steps {
        let theta = if step < 4 { 1.0 } else { 0.5 };
        let r = 0.5 * dt / (h * h);
        let k = m - 1;
        let (mut a, mut b, mut c, mut d) = (vec![0.0; k], vec![0.0; k], vec![0.0; k], vec![0.0; k]);
        for j in 0..k {
            let i = j + 1;
            a[j] = -theta * r;
            b[j] = 1.0 + 2.0 * theta * r;
            c[j] = -theta * r;
            d[j] = u[i] + (1.0 - theta) * r * (u[i - 1] - 2.0 * u[i] + u[i + 1]);
        }
        d[0] += theta * r * u[0];
        // Thomas algorithm
        for j in 1..k {
            let w = a[j] / b[j - 1];
            b[j] -= w * c[j - 1];
            d[j] -= w * d[j - 1];
        }
        let mut x = vec![0.0; k];
        x[k - 1] = d[k - 1] / b[k - 1];
        for j in (0..k - 1).rev() {
            x[j] = (d[j] - c[j] * x[j + 1]) / b[j];
        }
        u[1..m].copy_from_slice(&x);
    }
    u
}

#[test]
fn q0_matches_heat_equation_solve() {
    let cfg = HeatKernelConfig::default();
    let m = 400;
    for &t in &[0.05, 0.5] {
        let u = q0_pde(t, m, 4000);
        for i in (20..m).step_by(20) {
            let x = i as f64 / m as f64;
            let q0 = iv::absorption_split(x, t, &cfg).unwrap().q0;
            assert!((q0 - u[i]).abs() < 1e-4, "t={t} x={x}: {q0} vs {}", u[i]);
        }
    }
}

#[test]
fn absorption_split_matches_bridge_corrected_paths() {
    let cfg = HeatKernelConfig::default();
    let (x, t, steps) = (0.3, 0.2, 200);
    let dt = t / steps as f64;
    let mc = run_mc_multi(200_000, 5, 16, 2, |rng, out| {
        let mut a = x;
        out.fill(0.0);
        for _ in 0..steps {
            let b = a + dt.sqrt() * standard_normal(rng);
            // a crossing between grid times has probability exp(-2 d_a d_b / dt)
            if b <= 0.0 || rng.random::<f64>() < (-2.0 * a * b / dt).exp() {
                out[0] = 1.0;
                return Ok(());
            }
            if b >= 1.0 || rng.random::<f64>() < (-2.0 * (1.0 - a) * (1.0 - b) / dt).exp() {
                out[1] = 1.0;
                return Ok(());
            }
            a = b;
        }
        Ok(())
    })
    .unwrap();
    let split = iv::absorption_split(x, t, &cfg).unwrap();
    for (est, exact) in [(&mc[0], split.q0), (&mc[1], split.q1)] {
        let z = (est.mean - exact) / est.stderr;
        assert!(z.abs() < 4.0, "{} vs {exact}: z = {z}", est.mean);
    }
}

#[test]
fn marginal_sampler_frequencies_match_split() {
    let cfg = HeatKernelConfig::default();
    let (x, t) = (0.7, 0.3);
    let split = iv::absorption_split(x, t, &cfg).unwrap();
    let mut rng = stream(3, 0);
    let n = 200_000;
    let (mut left, mut right, mut inside_low) = (0u64, 0u64, 0u64);
    for _ in 0..n {
        match iv::sample_abs_bm_marginal(x, t, &mut rng, &cfg).unwrap() {
            Outcome::AbsorbedLeft => left += 1,
            Outcome::AbsorbedRight => right += 1,
            Outcome::Interior(y) => inside_low += u64::from(y < 0.5),
        }
    }
    let low = bdgas::quadrature::integrate(&|y: f64| iv::abs_density(x, y, t, &cfg).unwrap().value, 0.0, 0.5, 1e-12);
    for (count, p) in [(left, split.q0), (right, split.q1), (inside_low, low)] {
        let se = (p * (1.0 - p) / n as f64).sqrt();
        let z = (count as f64 / n as f64 - p) / se;
        assert!(z.abs() < 4.0, "frequency {count}/{n} vs {p}: z = {z}");
    }
}

#[test]
fn second_order_density_factorizes() {
    let cfg = HeatKernelConfig::default();
    let p = params(1.0, 2.0);
    let t = 0.4;
    let lam = |z: f64| iv::gas_intensity(z, t, &p, &cfg).unwrap();
    let k = |a: f64, b: f64| iv::abs_density(a, b, t, &cfg).unwrap().value;
    for &(z1, z2) in &[(0.2, 0.7), (0.5, 0.55), (0.9, 0.1)] {
        let empty = iv::dual_density(&[z1, z2], t, &ContinuumConfiguration::empty(), &p, &cfg).unwrap().value;
        assert!((empty - lam(z1) * lam(z2)).abs() < 1e-12);
        let one = ContinuumConfiguration::new(vec![0.4]).unwrap();
        let got = iv::dual_density(&[z1, z2], t, &one, &p, &cfg).unwrap().value;
        // a single particle cannot occupy both coordinates
        let want = lam(z1) * lam(z2) + k(z1, 0.4) * lam(z2) + lam(z1) * k(z2, 0.4);
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        let two = ContinuumConfiguration::new(vec![0.4, 0.8]).unwrap();
        let got = iv::dual_density(&[z1, z2], t, &two, &p, &cfg).unwrap().value;
        let m = |z: f64| lam(z) + k(z, 0.4) + k(z, 0.8);
        let want = m(z1) * m(z2) - k(z1, 0.4) * k(z2, 0.4) - k(z1, 0.8) * k(z2, 0.8);
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }
}

#[test]
fn charlier_moments_by_pmf_summation() {
    for &theta in &[0.3f64, 1.5, 6.0] {
        for j in 0..=4u64 {
            for k in 0..=4u64 {
                let want = if j == k { (1..=j).product::<u64>() as f64 * theta.powi(j as i32) } else { 0.0 };
                let got = charlier_product_moment(j, k, theta);
                assert!((got - want).abs() < 1e-9 * want.max(1.0), "theta={theta} ({j},{k}): {got}");
            }
        }
    }
}

#[test]
fn small_time_interior_kernel_is_gaussian() {
    let cfg = HeatKernelConfig::default();
    let t: f64 = 1e-4;
    let x: f64 = 0.5;
    for &y in &[0.49, 0.5, 0.51, 0.53] {
        let g = (-(y - x) * (y - x) / (2.0 * t)).exp() / (2.0 * std::f64::consts::PI * t).sqrt();
        let p = iv::abs_density(x, y, t, &cfg).unwrap().value;
        assert!((p - g).abs() < 1e-10 * g.max(1.0));
    }
}
