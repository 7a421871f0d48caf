//! Duality functions and factorial-measure functionals.
//!
//! Everything here is a pure function of its arguments. The chain-indexed
//! functions take a dual configuration `xi` (interior counts plus tallies at
//! the two absorbing sites) and an occupation vector `eta` of the same chain
//! length.

use crate::error::{ensure, Error, Result};
use crate::types::{DiscreteConfiguration, DualConfiguration, ReservoirParams};

/// Default bound on the number of ordered tuples a factorial functional may
/// enumerate.
pub const DEFAULT_ENUMERATION_CAP: u128 = 10_000_000;

/// `d(k, n) = n! / (n - k)!` for `k <= n`, zero otherwise. `None` on `u128`
/// overflow.
pub fn falling_factorial_checked(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let mut acc: u128 = 1;
    for j in 0..k {
        acc = acc.checked_mul(u128::from(n - j))?;
    }
    Some(acc)
}

/// Single-site classical self-duality function `d(k, n)`.
///
/// Panics if the result does not fit in a `u128`; use
/// [`falling_factorial_f64`] for large arguments.
pub fn falling_factorial(n: u64, k: u64) -> u128 {
    falling_factorial_checked(n, k).expect("falling factorial overflows u128")
}

/// Falling factorial as a float: exact integer product while it fits,
/// floating-point product afterwards.
pub fn falling_factorial_f64(n: u64, k: u64) -> f64 {
    match falling_factorial_checked(n, k) {
        Some(v) => v as f64,
        None => (0..k).map(|j| (n - j) as f64).product(),
    }
}

/// Falling factorial `(x)_k` of a real argument.
pub fn falling_factorial_real(x: f64, k: u64) -> f64 {
    (0..k).map(|j| x - j as f64).product()
}

pub fn binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

fn check_len(xi: &DiscreteConfiguration, eta: &DiscreteConfiguration) -> Result<()> {
    if xi.n_sites() != eta.n_sites() {
        return Err(Error::LengthMismatch {
            expected: xi.n_sites(),
            got: eta.n_sites(),
        });
    }
    Ok(())
}

/// `D^cl(xi, eta) = prod_x d(xi(x), eta(x))` over the interior sites.
/// Absorbed tallies of `xi` are ignored.
pub fn classical_duality(xi: &DualConfiguration, eta: &DiscreteConfiguration) -> Result<u128> {
    check_len(xi, eta)?;
    let mut acc: u128 = 1;
    for (&k, &n) in xi.counts.iter().zip(&eta.counts) {
        let d = falling_factorial_checked(n, k)
            .ok_or_else(|| Error::Validation("classical duality overflows u128".into()))?;
        if d == 0 {
            return Ok(0);
        }
        acc = acc
            .checked_mul(d)
            .ok_or_else(|| Error::Validation("classical duality overflows u128".into()))?;
    }
    Ok(acc)
}

/// Float version of [`classical_duality`] without the overflow check.
pub fn classical_duality_f64(xi: &DualConfiguration, eta: &DiscreteConfiguration) -> f64 {
    xi.counts
        .iter()
        .zip(&eta.counts)
        .map(|(&k, &n)| falling_factorial_f64(n, k))
        .product()
}

/// `lambda_L^{xi(0)} lambda_R^{xi(N+1)} D^cl(xi, eta)`.
pub fn reservoir_duality(
    xi: &DualConfiguration,
    eta: &DiscreteConfiguration,
    p: &ReservoirParams,
) -> Result<f64> {
    check_len(xi, eta)?;
    Ok(boundary_weight(xi, p.lambda_left, p.lambda_right) * classical_duality_f64(xi, eta))
}

fn boundary_weight(xi: &DualConfiguration, left: f64, right: f64) -> f64 {
    left.powi(xi.absorbed_left as i32) * right.powi(xi.absorbed_right as i32)
}

/// Charlier polynomial `C_k(n, theta) = sum_l binom(k, l) (-theta)^{k-l} (n)_l`.
pub fn charlier(k: u64, n: u64, theta: f64) -> f64 {
    (0..=k)
        .map(|l| binomial(k, l) * (-theta).powi((k - l) as i32) * falling_factorial_f64(n, l))
        .sum()
}

/// `D_theta^or(xi, eta) = prod_x C_{xi(x)}(eta(x), theta)` over interior sites.
pub fn orthogonal_duality(xi: &DualConfiguration, eta: &DiscreteConfiguration, theta: f64) -> Result<f64> {
    check_len(xi, eta)?;
    Ok(xi
        .counts
        .iter()
        .zip(&eta.counts)
        .map(|(&k, &n)| charlier(k, n, theta))
        .product())
}

/// `(lambda_L - theta)^{xi(0)} D_theta^or(xi, eta) (lambda_R - theta)^{xi(N+1)}`.
pub fn orthogonal_reservoir_duality(
    xi: &DualConfiguration,
    eta: &DiscreteConfiguration,
    p: &ReservoirParams,
) -> Result<f64> {
    let theta = p.theta()?;
    let core = orthogonal_duality(xi, eta, theta)?;
    Ok(boundary_weight(xi, p.lambda_left - theta, p.lambda_right - theta) * core)
}

/// Visits every ordered `n`-tuple of distinct indices into `0..m`.
pub(crate) fn for_each_injective(m: usize, n: usize, mut visit: impl FnMut(&[usize])) {
    fn rec(m: usize, n: usize, used: &mut Vec<bool>, cur: &mut Vec<usize>, visit: &mut dyn FnMut(&[usize])) {
        if cur.len() == n {
            visit(cur);
            return;
        }
        for i in 0..m {
            if !used[i] {
                used[i] = true;
                cur.push(i);
                rec(m, n, used, cur, visit);
                cur.pop();
                used[i] = false;
            }
        }
    }
    if n > m {
        return;
    }
    let mut used = vec![false; m];
    let mut cur = Vec::with_capacity(n);
    rec(m, n, &mut used, &mut cur, &mut visit);
}

pub(crate) fn check_cap(m: usize, n: usize, cap: u128) -> Result<()> {
    let terms = falling_factorial_checked(m as u64, n as u64).unwrap_or(u128::MAX);
    if terms > cap {
        return Err(Error::CapExceeded { terms, cap });
    }
    Ok(())
}

/// `int f d eta^(n)`: the sum of `f` over all ordered `n`-tuples of distinct
/// particles of `points`.
///
/// Refuses with [`Error::CapExceeded`] when `(|points|)_n` exceeds `cap`.
pub fn factorial_functional<T: Copy>(
    points: &[T],
    n: usize,
    f: impl Fn(&[T]) -> f64,
    cap: u128,
) -> Result<f64> {
    check_cap(points.len(), n, cap)?;
    let mut acc = 0.0;
    let mut buf = Vec::with_capacity(n);
    for_each_injective(points.len(), n, |idx| {
        buf.clear();
        buf.extend(idx.iter().map(|&i| points[i]));
        acc += f(&buf);
    });
    Ok(acc)
}

/// A measurable set with a reference mass, used to build product-indicator
/// test functions.
pub trait Region: Clone {
    type Point: Copy;
    fn contains(&self, p: &Self::Point) -> bool;
    /// Reference measure of the set (Lebesgue length or number of sites).
    fn mass(&self) -> f64;
    /// Reference measure of the intersection with `other`.
    fn overlap_mass(&self, other: &Self) -> f64;
}

/// Half-open interval `(lo, hi]` with Lebesgue mass.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        ensure(lo < hi, || format!("empty interval ({lo}, {hi}]"))?;
        Ok(Self { lo, hi })
    }
}

impl Region for Interval {
    type Point = f64;
    fn contains(&self, p: &f64) -> bool {
        *p > self.lo && *p <= self.hi
    }
    fn mass(&self) -> f64 {
        self.hi - self.lo
    }
    fn overlap_mass(&self, other: &Self) -> f64 {
        (self.hi.min(other.hi) - self.lo.max(other.lo)).max(0.0)
    }
}

/// Set of chain sites with counting mass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SiteSet(pub Vec<usize>);

impl Region for SiteSet {
    type Point = usize;
    fn contains(&self, p: &usize) -> bool {
        self.0.contains(p)
    }
    fn mass(&self) -> f64 {
        self.0.len() as f64
    }
    fn overlap_mass(&self, other: &Self) -> f64 {
        self.0.iter().filter(|s| other.0.contains(s)).count() as f64
    }
}

/// `1_{B_1}^{(x) d_1} (x) .. (x) 1_{B_K}^{(x) d_K}` on `n = sum d_l` coordinates,
/// with mutually disjoint `B_l`.
#[derive(Debug, Clone)]
pub struct ProductIndicator<S: Region> {
    factors: Vec<(S, usize)>,
}

impl<S: Region> ProductIndicator<S> {
    pub fn new(factors: Vec<(S, usize)>) -> Result<Self> {
        for (i, (a, _)) in factors.iter().enumerate() {
            for (b, _) in &factors[i + 1..] {
                if a.overlap_mass(b) > 0.0 {
                    return Err(Error::Validation("product indicator sets overlap".into()));
                }
            }
        }
        Ok(Self { factors })
    }

    pub fn factors(&self) -> &[(S, usize)] {
        &self.factors
    }

    /// Number of coordinates `n`.
    pub fn order(&self) -> usize {
        self.factors.iter().map(|(_, d)| d).sum()
    }

    /// The set attached to each coordinate, in order.
    pub fn coordinate_sets(&self) -> Vec<&S> {
        self.factors
            .iter()
            .flat_map(|(s, d)| std::iter::repeat_n(s, *d))
            .collect()
    }

    pub fn eval(&self, z: &[S::Point]) -> f64 {
        let sets = self.coordinate_sets();
        debug_assert_eq!(sets.len(), z.len());
        if sets.iter().zip(z).all(|(s, p)| s.contains(p)) {
            1.0
        } else {
            0.0
        }
    }

    /// `int f d eta^(n) = prod_l (eta(B_l))_{d_l}` for disjoint sets.
    pub fn factorial_moment(&self, points: &[S::Point]) -> f64 {
        self.factors
            .iter()
            .map(|(s, d)| {
                let count = points.iter().filter(|p| s.contains(p)).count() as u64;
                falling_factorial_f64(count, *d as u64)
            })
            .product()
    }
}

/// `int f d eta^{(n),theta}` through the Charlier product
/// `prod_l C_{d_l}(eta(B_l), theta m(B_l))`.
pub fn theta_factorial_functional<S: Region>(points: &[S::Point], f: &ProductIndicator<S>, theta: f64) -> f64 {
    f.factors
        .iter()
        .map(|(s, d)| {
            let count = points.iter().filter(|p| s.contains(p)).count() as u64;
            charlier(*d as u64, count, theta * s.mass())
        })
        .product()
}

/// `int f d eta^{(n),theta}` by the defining subset sum
/// `sum_{I subset [n]} (-theta)^{n-|I|} int f d(eta^(|I|) (x) m^{n-|I|})`,
/// enumerating particle tuples explicitly.
pub fn theta_factorial_functional_subset_sum<S: Region>(
    points: &[S::Point],
    f: &ProductIndicator<S>,
    theta: f64,
    cap: u128,
) -> Result<f64> {
    let sets = f.coordinate_sets();
    let n = sets.len();
    let mut total = 0.0;
    for mask in 0u32..(1 << n) {
        let inside: Vec<&S> = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| sets[i]).collect();
        let outside_mass: f64 = (0..n).filter(|i| mask & (1 << i) == 0).map(|i| sets[i].mass()).product();
        let k = inside.len();
        let tuples = factorial_functional(
            points,
            k,
            |z| {
                if inside.iter().zip(z).all(|(s, p)| s.contains(p)) {
                    1.0
                } else {
                    0.0
                }
            },
            cap,
        )?;
        total += (-theta).powi((n - k) as i32) * tuples * outside_mass;
    }
    Ok(total)
}

/// `int f d eta^{(n),theta}` for an arbitrary test function, with the
/// reference measure `m` given as weighted atoms (exact for counting
/// measures, a quadrature rule otherwise).
pub fn theta_factorial_functional_general<T: Copy>(
    points: &[T],
    n: usize,
    theta: f64,
    f: impl Fn(&[T]) -> f64,
    measure: &[(T, f64)],
    cap: u128,
) -> Result<f64> {
    check_cap(points.len(), n, cap)?;
    let mut total = 0.0;
    let mut z: Vec<T> = Vec::with_capacity(n);
    for mask in 0u32..(1 << n) {
        let inside: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let outside: Vec<usize> = (0..n).filter(|i| mask & (1 << i) == 0).collect();
        let mut part = 0.0;
        for_each_injective(points.len(), inside.len(), |idx| {
            // integrate the remaining coordinates against the atoms of m
            let mut stack = vec![0usize; outside.len()];
            loop {
                if measure.is_empty() && !outside.is_empty() {
                    break;
                }
                z.clear();
                z.resize(n, points.first().copied().unwrap_or(measure[0].0));
                for (slot, &i) in inside.iter().enumerate() {
                    z[i] = points[idx[slot]];
                }
                let mut w = 1.0;
                for (slot, &i) in outside.iter().enumerate() {
                    let (p, m) = measure[stack[slot]];
                    z[i] = p;
                    w *= m;
                }
                part += w * f(&z);
                // odometer over the atoms
                let mut j = 0;
                while j < stack.len() {
                    stack[j] += 1;
                    if stack[j] < measure.len() {
                        break;
                    }
                    stack[j] = 0;
                    j += 1;
                }
                if j == stack.len() {
                    break;
                }
            }
        });
        total += (-theta).powi(outside.len() as i32) * part;
    }
    Ok(total)
}

/// Right-hand side of the Poisson orthogonality relation:
/// `E[(int f d zeta^{(n),theta}) (int g d zeta^{(n'),theta})]` for `zeta`
/// Poisson with intensity `theta m` equals `1{n = n'} n! int sym(f) g d(theta m)^n`.
pub fn poisson_orthogonality_expectation<S: Region>(
    f: &ProductIndicator<S>,
    g: &ProductIndicator<S>,
    theta: f64,
) -> f64 {
    let fs = f.coordinate_sets();
    let gs = g.coordinate_sets();
    if fs.len() != gs.len() {
        return 0.0;
    }
    // n! * mean over permutations = sum over permutations
    let n = fs.len();
    let mut total = 0.0;
    for_each_injective(n, n, |perm| {
        total += (0..n)
            .map(|i| theta * fs[perm[i]].overlap_mass(gs[i]))
            .product::<f64>();
    });
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::make_discrete_config;
    use proptest::prelude::*;

    fn dc(v: &[i64]) -> DiscreteConfiguration {
        make_discrete_config(v).unwrap()
    }

    /// Three-term recurrence `C_{k+1} = (n - k - theta) C_k - k theta C_{k-1}`,
    /// independent of the defining sum.
    fn charlier_recurrence(k: u64, n: u64, theta: f64) -> f64 {
        let (mut prev, mut cur) = (1.0, n as f64 - theta);
        if k == 0 {
            return prev;
        }
        for j in 1..k {
            let next = (n as f64 - j as f64 - theta) * cur - j as f64 * theta * prev;
            prev = cur;
            cur = next;
        }
        cur
    }

    #[test]
    fn falling_factorial_examples() {
        assert_eq!(falling_factorial(3, 2), 6);
        assert_eq!(falling_factorial(3, 4), 0);
        for n in 0..10 {
            assert_eq!(falling_factorial(n, 0), 1);
        }
        assert_eq!(falling_factorial_checked(200, 100), None);
        assert!(falling_factorial_f64(200, 100).is_finite());
    }

    #[test]
    fn classical_duality_examples() {
        assert_eq!(classical_duality(&dc(&[1, 0]), &dc(&[3, 5])).unwrap(), 3);
        assert_eq!(classical_duality(&dc(&[2]), &dc(&[1])).unwrap(), 0);
        assert_eq!(classical_duality(&dc(&[0, 0]), &dc(&[3, 5])).unwrap(), 1);
        assert!(matches!(
            classical_duality(&dc(&[0]), &dc(&[3, 5])),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn reservoir_duality_examples() {
        let p = ReservoirParams::new(2.0, 3.0).unwrap();
        let xi = dc(&[0]).with_absorbed(1, 0);
        assert_eq!(reservoir_duality(&xi, &dc(&[7]), &p).unwrap(), 2.0);
        assert_eq!(reservoir_duality(&dc(&[0]), &dc(&[7]), &p).unwrap(), 1.0);
        let xi = dc(&[1]).with_absorbed(0, 2);
        assert_eq!(reservoir_duality(&xi, &dc(&[4]), &p).unwrap(), 36.0);
    }

    #[test]
    fn charlier_examples() {
        for n in 0..6 {
            assert_eq!(charlier(0, n, 1.7), 1.0);
        }
        assert_eq!(charlier(1, 5, 2.0), 3.0);
        // theta^2 - 2 theta (n)_1 + (n)_2 = 1 - 8 + 12
        assert_eq!(charlier(2, 4, 1.0), 5.0);
    }

    #[test]
    fn charlier_matches_recurrence() {
        for k in 0..8 {
            for n in 0..12 {
                for &theta in &[0.3, 1.0, 2.5] {
                    let a = charlier(k, n, theta);
                    let b = charlier_recurrence(k, n, theta);
                    assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()), "k={k} n={n} θ={theta}: {a} vs {b}");
                }
            }
        }
        // floating regime of the falling factorials
        for k in [20u64, 30] {
            let a = charlier(k, 180, 2.0);
            let b = charlier_recurrence(k, 180, 2.0);
            assert!((a - b).abs() <= 1e-9 * b.abs());
        }
    }

    #[test]
    fn orthogonal_duality_examples() {
        assert_eq!(orthogonal_duality(&dc(&[0, 0]), &dc(&[4, 2]), 1.5).unwrap(), 1.0);
        assert_eq!(orthogonal_duality(&dc(&[1]), &dc(&[5]), 2.0).unwrap(), 3.0);
    }

    #[test]
    fn orthogonal_reservoir_examples() {
        let eq = ReservoirParams::new(1.5, 1.5).unwrap().with_theta(1.5).unwrap();
        let xi = dc(&[1, 0]).with_absorbed(1, 0);
        assert_eq!(orthogonal_reservoir_duality(&xi, &dc(&[3, 1]), &eq).unwrap(), 0.0);
        assert_eq!(orthogonal_reservoir_duality(&dc(&[0, 0]), &dc(&[3, 1]), &eq).unwrap(), 1.0);
        let p = ReservoirParams::new(4.0, 1.0).unwrap().with_theta(2.0).unwrap();
        let xi = dc(&[1]).with_absorbed(1, 0);
        assert_eq!(orthogonal_reservoir_duality(&xi, &dc(&[5]), &p).unwrap(), 6.0);
        let no_theta = ReservoirParams::new(4.0, 1.0).unwrap();
        assert!(matches!(
            orthogonal_reservoir_duality(&xi, &dc(&[5]), &no_theta),
            Err(Error::MissingTheta)
        ));
    }

    #[test]
    fn factorial_functional_examples() {
        let pts = [0.1, 0.3, 0.5, 0.7];
        let all = factorial_functional(&pts, 2, |_| 1.0, DEFAULT_ENUMERATION_CAP).unwrap();
        assert_eq!(all, 12.0);
        let inside = factorial_functional(&pts, 1, |z| f64::from(z[0] > 0.2 && z[0] < 0.6), DEFAULT_ENUMERATION_CAP)
            .unwrap();
        assert_eq!(inside, 2.0);
        assert_eq!(factorial_functional(&[0.4], 2, |_| 5.0, DEFAULT_ENUMERATION_CAP).unwrap(), 0.0);
        let many: Vec<f64> = (0..200).map(|i| i as f64 / 200.0).collect();
        assert!(matches!(
            factorial_functional(&many, 4, |_| 1.0, DEFAULT_ENUMERATION_CAP),
            Err(Error::CapExceeded { .. })
        ));
    }

    #[test]
    fn theta_functional_examples() {
        let unit = ProductIndicator::new(vec![(Interval::new(0.0, 1.0).unwrap(), 1)]).unwrap();
        let theta = 0.8;
        // single I = {} term: -theta * m(0, 1)
        assert!((theta_factorial_functional(&[], &unit, theta) + theta).abs() < 1e-15);
        assert!((theta_factorial_functional_subset_sum(&[], &unit, theta, DEFAULT_ENUMERATION_CAP).unwrap() + theta).abs() < 1e-15);
        // theta = 0 leaves only the plain factorial moment
        let f = ProductIndicator::new(vec![
            (Interval::new(0.0, 0.5).unwrap(), 2),
            (Interval::new(0.5, 1.0).unwrap(), 1),
        ])
        .unwrap();
        let pts = [0.1, 0.2, 0.3, 0.7, 0.9];
        assert_eq!(theta_factorial_functional(&pts, &f, 0.0), f.factorial_moment(&pts));
        assert_eq!(f.factorial_moment(&pts), 6.0 * 2.0);
    }

    #[test]
    fn overlapping_sets_rejected() {
        let r = ProductIndicator::new(vec![
            (Interval::new(0.0, 0.5).unwrap(), 1),
            (Interval::new(0.4, 1.0).unwrap(), 1),
        ]);
        assert!(r.is_err());
    }

    #[test]
    fn general_functional_matches_indicator_route() {
        let a = SiteSet(vec![1, 2]);
        let b = SiteSet(vec![4]);
        let f = ProductIndicator::new(vec![(a, 2), (b, 1)]).unwrap();
        let pts = [1usize, 1, 2, 3, 4, 4];
        let atoms: Vec<(usize, f64)> = (1..=5).map(|s| (s, 1.0)).collect();
        let g = theta_factorial_functional_general(&pts, 3, 0.7, |z| f.eval(z), &atoms, DEFAULT_ENUMERATION_CAP).unwrap();
        let c = theta_factorial_functional(&pts, &f, 0.7);
        assert!((g - c).abs() < 1e-10, "{g} vs {c}");
    }

    #[test]
    fn orthogonality_expectation_cases() {
        let b1 = Interval::new(0.1, 0.4).unwrap();
        let b2 = Interval::new(0.5, 0.8).unwrap();
        let f1 = ProductIndicator::new(vec![(b1, 1)]).unwrap();
        let f11 = ProductIndicator::new(vec![(b1, 2)]).unwrap();
        let f12 = ProductIndicator::new(vec![(b1, 1), (b2, 1)]).unwrap();
        let th = 2.0;
        assert!((poisson_orthogonality_expectation(&f1, &f1, th) - th * 0.3).abs() < 1e-12);
        assert_eq!(poisson_orthogonality_expectation(&f1, &f11, th), 0.0);
        assert!((poisson_orthogonality_expectation(&f11, &f11, th) - 2.0 * (th * 0.3f64).powi(2)).abs() < 1e-12);
        assert!((poisson_orthogonality_expectation(&f12, &f12, th) - (th * 0.3) * (th * 0.3)).abs() < 1e-12);
    }

    /// `binom(xi, xi') (-theta)^{|xi|-|xi'|} D^cl(xi', eta)` summed over all `xi' <= xi`.
    fn subset_expansion(xi: &DiscreteConfiguration, eta: &DiscreteConfiguration, theta: f64) -> f64 {
        let n = xi.n_sites();
        let mut total = 0.0;
        let mut cur = vec![0u64; n];
        loop {
            let sub = DiscreteConfiguration::new(cur.clone());
            let w: f64 = (0..n).map(|i| binomial(xi.counts[i], cur[i])).product();
            let drop = xi.interior_mass() - sub.interior_mass();
            total += w * (-theta).powi(drop as i32) * classical_duality(&sub, eta).unwrap() as f64;
            let mut j = 0;
            while j < n {
                if cur[j] < xi.counts[j] {
                    cur[j] += 1;
                    break;
                }
                cur[j] = 0;
                j += 1;
            }
            if j == n {
                return total;
            }
        }
    }

    proptest! {
        #[test]
        fn orthogonal_equals_subset_expansion(
            xi in prop::collection::vec(0i64..=2, 1..=4),
            eta in prop::collection::vec(0i64..=6, 4),
            theta in 0.1f64..3.0,
        ) {
            let xi = dc(&xi);
            let eta = dc(&eta[..xi.n_sites()]);
            prop_assume!(xi.interior_mass() <= 4);
            let a = orthogonal_duality(&xi, &eta, theta).unwrap();
            let b = subset_expansion(&xi, &eta, theta);
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
        }

        #[test]
        fn theta_functional_two_routes(
            pts in prop::collection::vec(0.001f64..0.999, 0..7),
            d1 in 0usize..=2, d2 in 0usize..=2,
            theta in 0.1f64..3.0,
        ) {
            prop_assume!(d1 + d2 >= 1);
            let f = ProductIndicator::new(vec![
                (Interval::new(0.1, 0.45).unwrap(), d1),
                (Interval::new(0.5, 0.95).unwrap(), d2),
            ]).unwrap();
            let a = theta_factorial_functional(&pts, &f, theta);
            let b = theta_factorial_functional_subset_sum(&pts, &f, theta, DEFAULT_ENUMERATION_CAP).unwrap();
            prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
        }
    }
}
