//! Closed-form separation radii, detection boundaries and side conditions.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::decision::Threshold;
use crate::dist::BaseDistribution;
use crate::error::{Error, Result};
use crate::spacing::{analytic_threshold, CalibrationTable, DyadicScales};

/// Grid half-width (number of points on each side of `t/2`) for the witness search.
pub const WITNESS_GRID: i64 = 2048;
/// Strict inequalities `> ρ` are evaluated as `≥ ρ + STRICT_MARGIN`.
pub const STRICT_MARGIN: f64 = 1e-12;

fn check_open_unit(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must lie in (0,1), got {x}")))
    }
}

/// Lower bound `ρ*` on the minimax separation rate for Gaussian mixtures
/// with `0 < μ₂ − μ₁ ≤ M`.
pub fn rho_lower_bound(n: usize, alpha: f64, beta: f64, m: f64) -> Result<f64> {
    check_open_unit("alpha", alpha)?;
    if !(beta > 0.0 && beta < 1.0 - alpha) {
        return Err(Error::domain(format!("beta must lie in (0, 1 - alpha), got {beta}")));
    }
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::domain(format!("M must be positive, got {m}")));
    }
    if n < 1 {
        return Err(Error::domain("n must be positive"));
    }
    let c = 1.0 - (1.0 - alpha - beta).powi(2) / 2.0;
    let big_c = (0.5 + 2.0 * m * m / 3.0 * (m * m / 4.0).exp()).sqrt();
    let nf = n as f64;
    let log_c = c.ln();
    Ok((-2.0 * log_c / nf).sqrt() * (1.0 + log_c / (2.0 * nf)).sqrt() / big_c)
}

/// `ρ(k,n) = k/n + (1 + √(1 + 2kβ))/(nβ)`.
pub fn rho_k_n(k: usize, n: usize, beta: f64) -> Result<f64> {
    check_open_unit("beta", beta)?;
    if k < 1 || 2 * k > n {
        return Err(Error::domain(format!("scale k = {k} must lie in 1..=n/2 for n = {n}")));
    }
    let (kf, nf) = (k as f64, n as f64);
    Ok(kf / nf + (1.0 + (1.0 + 2.0 * kf * beta).sqrt()) / (nf * beta))
}

/// The per-scale level used inside theoretical formulas: the calibrated
/// `α_n` when a table is available, else the Bonferroni value `α/|K_n|`.
pub fn effective_alpha_n(n: usize, alpha: f64, table: Option<&CalibrationTable>) -> Result<f64> {
    match table {
        Some(t) => Ok(t.alpha_n),
        None => Ok(alpha / DyadicScales::new(n)?.len() as f64),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Membership {
    pub member: bool,
    /// Grid point `c` maximising the smaller of the two left-hand sides.
    pub witness: Option<f64>,
    pub threshold: Threshold,
    /// `max_c min(first, second)` over the grid.
    pub margin: f64,
}

/// `(1−ε) Φ̄(t − c + ετ) + ε Φ̄(t − c − (1−ε)τ)` and
/// `(1−ε) Φ̄(c − ετ) + ε Φ̄(c + (1−ε)τ)`.
pub fn separation_sides(eps: f64, tau: f64, t: f64, c: f64, base: BaseDistribution) -> (f64, f64) {
    let s = |x: f64| base.survival(x);
    let first = (1.0 - eps) * s(t - c + eps * tau) + eps * s(t - c - (1.0 - eps) * tau);
    let second = (1.0 - eps) * s(c - eps * tau) + eps * s(c + (1.0 - eps) * tau);
    (first, second)
}

/// Grid search for a `c` making both separation inequalities hold at level `rho`.
#[allow(clippy::too_many_arguments)]
pub fn separation_set_member(
    eps: f64,
    mu1: f64,
    mu2: f64,
    alpha_n: f64,
    rho: f64,
    k: usize,
    n: usize,
    base: BaseDistribution,
) -> Result<Membership> {
    check_open_unit("epsilon", eps)?;
    if mu1.partial_cmp(&mu2) != Some(std::cmp::Ordering::Less) {
        return Err(Error::domain(format!("need mu1 < mu2, got {mu1}, {mu2}")));
    }
    let threshold = analytic_threshold(n, k, alpha_n, base)?;
    let Threshold::Finite(t) = threshold else {
        return Ok(Membership {
            member: false,
            witness: None,
            threshold,
            margin: f64::NEG_INFINITY,
        });
    };
    let tau = mu2 - mu1;
    let step = (t / 2.0 + tau.abs() + 10.0) / WITNESS_GRID as f64;
    let mut best = (f64::NEG_INFINITY, t / 2.0);
    for j in -WITNESS_GRID..=WITNESS_GRID {
        let c = t / 2.0 + j as f64 * step;
        let (a, b) = separation_sides(eps, tau, t, c, base);
        let m = a.min(b);
        if m > best.0 {
            best = (m, c);
        }
    }
    let member = best.0 >= rho + STRICT_MARGIN;
    Ok(Membership {
        member,
        witness: member.then_some(best.1),
        threshold,
        margin: best.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Dense,
    SparseGaussian,
    SparseLaplace,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Dense => "dense",
            Regime::SparseGaussian => "sparse_gaussian",
            Regime::SparseLaplace => "sparse_laplace",
        }
    }

    /// Whether `delta` lies in the regime's sparsity range.
    pub fn admits_delta(self, delta: f64) -> bool {
        match self {
            Regime::Dense => delta > 0.0 && delta <= 0.5,
            Regime::SparseGaussian | Regime::SparseLaplace => delta > 0.5 && delta < 1.0,
        }
    }

    fn admits_r(self, r: f64) -> bool {
        match self {
            Regime::Dense => r > 0.0 && r < 0.5,
            Regime::SparseGaussian | Regime::SparseLaplace => r > 0.0 && r < 1.0,
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "dense" => Ok(Regime::Dense),
            "sparse_gaussian" => Ok(Regime::SparseGaussian),
            "sparse_laplace" => Ok(Regime::SparseLaplace),
            other => Err(Error::domain(format!("unknown regime `{other}`"))),
        }
    }
}

/// `(δ, r)` with `ε ~ n^{−δ}` and a regime-specific signal exponent `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimePoint {
    delta: f64,
    r: f64,
    regime: Regime,
}

impl RegimePoint {
    pub fn new(delta: f64, r: f64, regime: Regime) -> Result<Self> {
        if !regime.admits_delta(delta) || !regime.admits_r(r) {
            return Err(Error::domain(format!("(delta={delta}, r={r}) is outside the {regime} regime")));
        }
        Ok(Self { delta, r, regime })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
    pub fn r(&self) -> f64 {
        self.r
    }
    pub fn regime(&self) -> Regime {
        self.regime
    }

    /// Whether the point lies on the detectable side of the boundary.
    ///
    /// In the dense regime `r` is a decay exponent (`μ₂ − μ₁ ~ n^{−r}`), so
    /// smaller `r` is easier; in the sparse regimes larger `r` is easier.
    pub fn detectable(&self) -> bool {
        let r_star = detection_boundary(self.regime, self.delta).expect("validated delta");
        match self.regime {
            Regime::Dense => self.r < r_star,
            Regime::SparseGaussian | Regime::SparseLaplace => self.r > r_star,
        }
    }
}

/// `r*(δ)` for the given regime.
pub fn detection_boundary(regime: Regime, delta: f64) -> Result<f64> {
    if !regime.admits_delta(delta) {
        return Err(Error::domain(format!("delta = {delta} is outside the {regime} range")));
    }
    Ok(match regime {
        Regime::Dense => 0.25 - delta / 2.0,
        Regime::SparseGaussian if delta < 0.75 => delta - 0.5,
        Regime::SparseGaussian => (1.0 - (1.0 - delta).sqrt()).powi(2),
        Regime::SparseLaplace => 2.0 * delta - 1.0,
    })
}

/// `2√(2Δ log n)`: upper bound on `t_{α_n,k}` (Gaussian) when
/// `k ≥ 8 log(4/α_n)` and `k/n ≥ n^{−Δ}`.
pub fn threshold_upper_bound(n: usize, delta: f64) -> f64 {
    2.0 * (2.0 * delta * (n as f64).ln()).sqrt()
}

/// Shape `√(log log n / n)` of the spacing test's dense-regime rate (no constant).
pub fn dense_rate_shape(n: usize) -> f64 {
    let nf = n as f64;
    (nf.ln().ln() / nf).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Condition {
    pub holds: bool,
    pub lhs: f64,
    pub rhs: f64,
}

/// Side conditions of the non-asymptotic power results, evaluated with the
/// conservative substitution `α_n ≥ α / log₂(n/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SideConditions {
    pub n: usize,
    pub alpha: f64,
    pub m: f64,
    pub base: BaseDistribution,
    pub alpha_n_conservative: f64,
    /// `8 log(4 log₂(n/2)/α) ≤ n`.
    pub scale_exists: Condition,
    /// `n ≥ 3` and `8.25 log(4 log₂(n/2)/α)/n ≤ Φ̄(M)`.
    pub dense_upper_bound: Condition,
}

pub fn check_side_conditions(n: usize, alpha: f64, m: f64, base: BaseDistribution) -> Result<SideConditions> {
    check_open_unit("alpha", alpha)?;
    let nf = n as f64;
    let log_scales = (nf / 2.0).log2();
    let (scale_exists, dense_upper_bound, alpha_n) = if log_scales > 0.0 {
        let log_term = (4.0 * log_scales / alpha).ln();
        let lhs_a = 8.0 * log_term;
        let lhs_b = 8.25 * log_term / nf;
        let rhs_b = base.survival(m);
        (
            Condition {
                holds: lhs_a <= nf,
                lhs: lhs_a,
                rhs: nf,
            },
            Condition {
                holds: n >= 3 && lhs_b <= rhs_b,
                lhs: lhs_b,
                rhs: rhs_b,
            },
            alpha / log_scales,
        )
    } else {
        let fail = Condition {
            holds: false,
            lhs: f64::INFINITY,
            rhs: nf,
        };
        (fail, fail, alpha)
    };
    Ok(SideConditions {
        n,
        alpha,
        m,
        base,
        alpha_n_conservative: alpha_n,
        scale_exists,
        dense_upper_bound,
    })
}
