//! Even base densities, their distribution functions, and seeded samplers
//! for the translation model and two-component mixtures.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaseDistribution {
    Gaussian,
    Laplace,
}

impl BaseDistribution {
    pub fn pdf(self, x: f64) -> f64 {
        match self {
            BaseDistribution::Gaussian => FRAC_1_SQRT_2PI * (-0.5 * x * x).exp(),
            BaseDistribution::Laplace => 0.5 * (-x.abs()).exp(),
        }
    }

    /// `P(Z > x)`, accurate in both tails.
    pub fn survival(self, x: f64) -> f64 {
        match self {
            BaseDistribution::Gaussian => 0.5 * libm::erfc(x / std::f64::consts::SQRT_2),
            BaseDistribution::Laplace => {
                if x >= 0.0 {
                    0.5 * (-x).exp()
                } else {
                    1.0 - 0.5 * x.exp()
                }
            }
        }
    }

    pub fn cdf(self, x: f64) -> f64 {
        // evenness: P(Z <= x) = P(Z >= -x)
        self.survival(-x)
    }

    /// The `x` with `survival(x) = p`.
    pub fn inverse_survival(self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::domain(format!("inverse_survival needs p in (0,1), got {p}")));
        }
        Ok(match self {
            BaseDistribution::Laplace => {
                if p <= 0.5 {
                    -(2.0 * p).ln()
                } else {
                    (2.0 * (1.0 - p)).ln()
                }
            }
            BaseDistribution::Gaussian => bisect_survival(self, p),
        })
    }

    /// `∫ x² φ(x) dx`.
    pub fn variance(self) -> f64 {
        match self {
            BaseDistribution::Gaussian => 1.0,
            BaseDistribution::Laplace => 2.0,
        }
    }

    /// `∫ x⁴ φ(x) dx`.
    pub fn fourth_moment(self) -> f64 {
        match self {
            BaseDistribution::Gaussian => 3.0,
            BaseDistribution::Laplace => 24.0,
        }
    }

    /// One draw from the centered density.
    #[inline]
    pub fn draw(self, rng: &mut RngStream) -> f64 {
        match self {
            BaseDistribution::Gaussian => rng.inner().sample(StandardNormal),
            BaseDistribution::Laplace => {
                let r = rng.inner();
                let e: f64 = r.sample(Exp1);
                if r.random::<bool>() {
                    e
                } else {
                    -e
                }
            }
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BaseDistribution::Gaussian => "gaussian",
            BaseDistribution::Laplace => "laplace",
        }
    }
}

impl fmt::Display for BaseDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BaseDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(BaseDistribution::Gaussian),
            "laplace" => Ok(BaseDistribution::Laplace),
            other => Err(Error::domain(format!("unknown base distribution `{other}`"))),
        }
    }
}

/// Bisection on `[-40, 40]`, run until the bracket stops shrinking.
fn bisect_survival(d: BaseDistribution, p: f64) -> f64 {
    let (mut lo, mut hi) = (-40.0f64, 40.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        // survival is decreasing
        if d.survival(mid) > p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (slo, shi) = (d.survival(lo), d.survival(hi));
    if (slo - p).abs() <= (shi - p).abs() {
        lo
    } else {
        hi
    }
}

/// Parameters `(ε, μ₁, μ₂)` of `(1−ε) φ(x−μ₁) + ε φ(x−μ₂)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureParams {
    epsilon: f64,
    mu1: f64,
    mu2: f64,
    base: BaseDistribution,
}

impl MixtureParams {
    pub fn new(epsilon: f64, mu1: f64, mu2: f64, base: BaseDistribution) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::domain(format!("mixture weight must lie in (0,1), got {epsilon}")));
        }
        if !(mu1.is_finite() && mu2.is_finite() && mu1 < mu2) {
            return Err(Error::domain(format!("need finite mu1 < mu2, got mu1={mu1}, mu2={mu2}")));
        }
        Ok(Self { epsilon, mu1, mu2, base })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
    pub fn mu1(&self) -> f64 {
        self.mu1
    }
    pub fn mu2(&self) -> f64 {
        self.mu2
    }
    pub fn base(&self) -> BaseDistribution {
        self.base
    }
    pub fn separation(&self) -> f64 {
        self.mu2 - self.mu1
    }

    pub fn pdf(&self, x: f64) -> f64 {
        (1.0 - self.epsilon) * self.base.pdf(x - self.mu1) + self.epsilon * self.base.pdf(x - self.mu2)
    }

    pub fn mean(&self) -> f64 {
        (1.0 - self.epsilon) * self.mu1 + self.epsilon * self.mu2
    }

    /// `σ² + ε(1−ε)(μ₂−μ₁)²`.
    pub fn variance(&self) -> f64 {
        let tau = self.separation();
        self.base.variance() + self.epsilon * (1.0 - self.epsilon) * tau * tau
    }

    #[inline]
    pub fn draw(&self, rng: &mut RngStream) -> f64 {
        let loc = if rng.uniform() < self.epsilon { self.mu2 } else { self.mu1 };
        loc + self.base.draw(rng)
    }
}

/// What generates a sample: the translation model or a mixture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Model {
    Pure { base: BaseDistribution, mu: f64 },
    Mixture(MixtureParams),
}

impl Model {
    pub fn fill(&self, out: &mut [f64], rng: &mut RngStream) {
        match *self {
            Model::Pure { base, mu } => out.iter_mut().for_each(|x| *x = mu + base.draw(rng)),
            Model::Mixture(p) => out.iter_mut().for_each(|x| *x = p.draw(rng)),
        }
    }
}

/// A real-valued sample, optionally known to be sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleVector {
    values: Vec<f64>,
    sorted: bool,
}

impl SampleVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::domain("sample must contain at least one value"));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::domain(format!("sample contains non-finite value {bad}")));
        }
        Ok(Self { values, sorted: false })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_sorted(&self) -> bool {
        self.sorted
    }

    pub fn sort(&mut self) {
        if !self.sorted {
            self.values.sort_by(f64::total_cmp);
            self.sorted = true;
        }
    }

    pub fn sorted(mut self) -> Self {
        self.sort();
        self
    }

    pub fn shifted(&self, c: f64) -> Self {
        Self {
            values: self.values.iter().map(|x| x + c).collect(),
            sorted: self.sorted,
        }
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

pub fn sample_pure(base: BaseDistribution, mu: f64, n: usize, rng: &mut RngStream) -> Result<SampleVector> {
    if n < 1 {
        return Err(Error::domain("sample size must be at least 1"));
    }
    let mut values = vec![0.0; n];
    Model::Pure { base, mu }.fill(&mut values, rng);
    SampleVector::new(values)
}

pub fn sample_mixture(params: &MixtureParams, n: usize, rng: &mut RngStream) -> Result<SampleVector> {
    if n < 1 {
        return Err(Error::domain("sample size must be at least 1"));
    }
    let mut values = vec![0.0; n];
    Model::Mixture(*params).fill(&mut values, rng);
    SampleVector::new(values)
}
