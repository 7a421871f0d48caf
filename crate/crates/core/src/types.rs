//! Value types shared across the crate.

use std::ops::{Add, Mul};

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

/// Occupation numbers on the chain `{1, .., N}` together with the number of
/// particles sitting at the exterior sites `0` and `N + 1`.
///
/// `counts[i - 1]` is the occupation of site `i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DiscreteConfiguration {
    pub counts: Vec<u64>,
    pub absorbed_left: u64,
    pub absorbed_right: u64,
}

/// The dual configuration `xi` has the same shape: interior counts plus
/// tallies at the two absorbing sites.
pub type DualConfiguration = DiscreteConfiguration;

impl DiscreteConfiguration {
    pub fn new(counts: Vec<u64>) -> Self {
        Self {
            counts,
            absorbed_left: 0,
            absorbed_right: 0,
        }
    }

    pub fn empty(n_sites: usize) -> Self {
        Self::new(vec![0; n_sites])
    }

    pub fn with_absorbed(mut self, left: u64, right: u64) -> Self {
        self.absorbed_left = left;
        self.absorbed_right = right;
        self
    }

    pub fn n_sites(&self) -> usize {
        self.counts.len()
    }

    /// Number of particles on the interior sites.
    pub fn interior_mass(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Interior particles plus both absorbed tallies.
    pub fn total_mass(&self) -> u64 {
        self.interior_mass() + self.absorbed_left + self.absorbed_right
    }

    /// Occupation of site `i` in `1..=N`.
    pub fn at(&self, site: usize) -> u64 {
        self.counts[site - 1]
    }

    pub fn restrict_interior(&self) -> Self {
        Self::new(self.counts.clone())
    }

    /// Site label of every interior particle, each repeated by its
    /// multiplicity, in increasing order.
    pub fn particle_sites(&self) -> Vec<usize> {
        self.counts
            .iter()
            .enumerate()
            .flat_map(|(i, &c)| std::iter::repeat_n(i + 1, c as usize))
            .collect()
    }

    /// Builds a configuration from an explicit list of occupied sites.
    pub fn from_sites(n_sites: usize, sites: &[usize]) -> Result<Self> {
        let mut counts = vec![0; n_sites];
        for &s in sites {
            ensure((1..=n_sites).contains(&s), || {
                format!("site {s} outside 1..={n_sites}")
            })?;
            counts[s - 1] += 1;
        }
        Ok(Self::new(counts))
    }
}

/// Validating constructor for occupation vectors coming from user input.
pub fn make_discrete_config(counts: &[i64]) -> Result<DiscreteConfiguration> {
    ensure(!counts.is_empty(), || "chain needs at least one site".into())?;
    let mut out = Vec::with_capacity(counts.len());
    for (i, &c) in counts.iter().enumerate() {
        ensure(c >= 0, || format!("negative occupation {c} at site {}", i + 1))?;
        out.push(c as u64);
    }
    Ok(DiscreteConfiguration::new(out))
}

/// A finite multiset of points in `(0, 1)` with absorbed tallies at `0` and `1`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ContinuumConfiguration {
    pub positions: Vec<f64>,
    pub absorbed_left: u64,
    pub absorbed_right: u64,
}

impl ContinuumConfiguration {
    pub fn new(positions: Vec<f64>) -> Result<Self> {
        for &x in &positions {
            ensure(x > 0.0 && x < 1.0, || {
                format!("position {x} is not inside (0, 1)")
            })?;
        }
        Ok(Self {
            positions,
            absorbed_left: 0,
            absorbed_right: 0,
        })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn total_mass(&self) -> u64 {
        self.positions.len() as u64 + self.absorbed_left + self.absorbed_right
    }

    /// Multiset union; absorbed tallies add up.
    pub fn superpose(&self, other: &Self) -> Self {
        let mut positions = Vec::with_capacity(self.len() + other.len());
        positions.extend_from_slice(&self.positions);
        positions.extend_from_slice(&other.positions);
        Self {
            positions,
            absorbed_left: self.absorbed_left + other.absorbed_left,
            absorbed_right: self.absorbed_right + other.absorbed_right,
        }
    }

    pub fn restrict_interior(&self) -> Self {
        Self {
            positions: self.positions.clone(),
            absorbed_left: 0,
            absorbed_right: 0,
        }
    }

    pub fn sorted_positions(&self) -> Vec<f64> {
        let mut v = self.positions.clone();
        v.sort_by(f64::total_cmp);
        v
    }

    /// Number of points in the half-open box `(a, b]`.
    pub fn count_in(&self, a: f64, b: f64) -> u64 {
        self.positions.iter().filter(|&&x| x > a && x <= b).count() as u64
    }

    /// Multiset equality: the sorted position lists are bitwise equal.
    pub fn same_multiset(&self, other: &Self) -> bool {
        let a = self.sorted_positions();
        let b = other.sorted_positions();
        a.len() == b.len() && a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits())
    }
}

pub fn superpose(a: &ContinuumConfiguration, b: &ContinuumConfiguration) -> ContinuumConfiguration {
    a.superpose(b)
}

pub fn restrict_interior(c: &ContinuumConfiguration) -> ContinuumConfiguration {
    c.restrict_interior()
}

/// Reservoir intensities `lambda_left`, `lambda_right` and the optional
/// deformation parameter `theta` of the orthogonal dualities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReservoirParams {
    pub lambda_left: f64,
    pub lambda_right: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
}

impl ReservoirParams {
    pub fn new(lambda_left: f64, lambda_right: f64) -> Result<Self> {
        ensure(lambda_left >= 0.0 && lambda_left.is_finite(), || {
            format!("lambda_left must be a finite non-negative number, got {lambda_left}")
        })?;
        ensure(lambda_right >= 0.0 && lambda_right.is_finite(), || {
            format!("lambda_right must be a finite non-negative number, got {lambda_right}")
        })?;
        Ok(Self {
            lambda_left,
            lambda_right,
            theta: None,
        })
    }

    pub fn with_theta(mut self, theta: f64) -> Result<Self> {
        ensure(theta > 0.0 && theta.is_finite(), || {
            format!("theta must be positive, got {theta}")
        })?;
        self.theta = Some(theta);
        Ok(self)
    }

    pub fn theta(&self) -> Result<f64> {
        self.theta.ok_or(Error::MissingTheta)
    }

    pub fn max_lambda(&self) -> f64 {
        self.lambda_left.max(self.lambda_right)
    }

    /// Reservoir intensities divided by `n`, as used by the diffusive scaling.
    pub fn scaled(&self, n: f64) -> Self {
        Self {
            lambda_left: self.lambda_left / n,
            lambda_right: self.lambda_right / n,
            theta: self.theta,
        }
    }
}

/// Monte Carlo mean with its standard error and the identifiers that
/// reproduce it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_samples: u64,
    pub seed: u64,
    pub stream_count: u64,
}

/// A numerically evaluated quantity together with a bound on the error from
/// truncating the series that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct KernelValue {
    pub value: f64,
    pub trunc_error_bound: f64,
}

impl KernelValue {
    pub const ZERO: Self = Self::exact(0.0);
    pub const ONE: Self = Self::exact(1.0);

    pub const fn new(value: f64, trunc_error_bound: f64) -> Self {
        Self {
            value,
            trunc_error_bound,
        }
    }

    pub const fn exact(value: f64) -> Self {
        Self::new(value, 0.0)
    }

    pub fn scale(self, c: f64) -> Self {
        Self::new(self.value * c, self.trunc_error_bound * c.abs())
    }
}

impl Add for KernelValue {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(
            self.value + rhs.value,
            self.trunc_error_bound + rhs.trunc_error_bound,
        )
    }
}

impl Mul for KernelValue {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let (a, ea) = (self.value, self.trunc_error_bound);
        let (b, eb) = (rhs.value, rhs.trunc_error_bound);
        Self::new(a * b, a.abs() * eb + b.abs() * ea + ea * eb)
    }
}

impl std::iter::Sum for KernelValue {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::ZERO, |acc, x| acc + x)
    }
}

impl std::iter::Product for KernelValue {
    fn product<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::ONE, |acc, x| acc * x)
    }
}
