//! Parameterized smooth surrogates of nonsmooth primitives: LogSumExp for
//! the max-function and five families for |x|, each with a certified error
//! envelope kappa * omega(mu) (omega(mu) = mu for all of them).
//!
//! All evaluations are numerically guarded: LogSumExp uses the max-shift
//! identity unconditionally, and the exp/tanh/erf based families saturate
//! cleanly instead of overflowing.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest admissible smoothing parameter. Below this the surrogates are
/// numerically saturated in double precision, so operations reject rather
/// than silently degrade.
pub const MU_FLOOR: f64 = 1e-12;

fn check_mu(mu: f64) -> Result<()> {
    if !mu.is_finite() || mu < MU_FLOOR {
        return Err(Error::Domain(format!(
            "smoothing parameter must satisfy {MU_FLOOR:e} <= mu < inf, got {mu:e}"
        )));
    }
    Ok(())
}

/// Softmax weights: a point of the unit simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxWeights(DVector<f64>);

impl SoftmaxWeights {
    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl std::ops::Index<usize> for SoftmaxWeights {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Stable LogSumExp: mu * log(sum_i exp((x_i - max)/mu)) + max.
///
/// The term for one occurrence of the maximum is split off so the log goes
/// through `ln_1p`, which keeps the value strictly above max(x) whenever
/// the remaining mass is representable.
pub fn lse_value(x: &[f64], mu: f64) -> Result<f64> {
    check_mu(mu)?;
    if x.is_empty() {
        return Err(Error::Domain("lse of an empty vector".into()));
    }
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::Domain(format!(
            "lse of non-finite input (max = {max})"
        )));
    }
    let argmax = x.iter().position(|&v| v == max).expect("max attained");
    let mut rest = 0.0;
    for (i, &v) in x.iter().enumerate() {
        if i != argmax {
            rest += ((v - max) / mu).exp();
        }
    }
    Ok(max + mu * rest.ln_1p())
}

/// Gradient of [`lse_value`]: the softmax weights
/// sigma_i = exp((x_i - max)/mu) / sum_j exp((x_j - max)/mu).
pub fn lse_gradient(x: &[f64], mu: f64) -> Result<SoftmaxWeights> {
    check_mu(mu)?;
    if x.is_empty() {
        return Err(Error::Domain("lse gradient of an empty vector".into()));
    }
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::Domain(format!(
            "lse gradient of non-finite input (max = {max})"
        )));
    }
    let mut w = DVector::from_iterator(x.len(), x.iter().map(|&v| ((v - max) / mu).exp()));
    let total: f64 = w.iter().sum();
    w /= total;
    Ok(SoftmaxWeights(w))
}

/// The five smoothing families for the absolute value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AbsKind {
    /// f1: |x| outside |x| > mu/2, x^2/mu + mu/4 inside.
    F1,
    /// f2: sqrt(mu^2 + x^2) (pseudo-Huber).
    F2,
    /// f3: 2 mu log(1 + e^{x/mu}) - x.
    F3,
    /// f4: x tanh(x/mu).
    F4,
    /// f5: x erf(x/mu).
    F5,
}

impl AbsKind {
    pub const ALL: [AbsKind; 5] = [
        AbsKind::F1,
        AbsKind::F2,
        AbsKind::F3,
        AbsKind::F4,
        AbsKind::F5,
    ];

    /// Error-envelope constant kappa (omega(mu) = mu for every family).
    pub fn kappa(self) -> f64 {
        match self {
            AbsKind::F1 => 0.25,
            AbsKind::F2 => 1.0,
            AbsKind::F3 => 2.0 * std::f64::consts::LN_2,
            AbsKind::F4 => 1.0,
            AbsKind::F5 => 2.0 / (std::f64::consts::E * std::f64::consts::PI.sqrt()),
        }
    }

    /// Whether the family approximates |x| from above with values strictly
    /// ordered in mu (the first three do; the tanh and erf families
    /// approach |x| from below instead).
    pub fn satisfies_ap1(self) -> bool {
        matches!(self, AbsKind::F1 | AbsKind::F2 | AbsKind::F3)
    }

    pub fn value(self, t: f64, mu: f64) -> Result<f64> {
        check_mu(mu)?;
        Ok(match self {
            AbsKind::F1 => {
                // Both branches agree at |t| = mu/2; the quadratic branch
                // is evaluated on the closed region.
                if t.abs() <= 0.5 * mu {
                    t * t / mu + 0.25 * mu
                } else {
                    t.abs()
                }
            }
            AbsKind::F2 => (mu * mu + t * t).sqrt(),
            AbsKind::F3 => {
                // 2 mu softplus(t/mu) - t with softplus(z) = max(z, 0)
                // + ln(1 + e^{-|z|}), stable for any t/mu.
                let z = t / mu;
                2.0 * mu * (z.max(0.0) + (-z.abs()).exp().ln_1p()) - t
            }
            AbsKind::F4 => t * (t / mu).tanh(),
            AbsKind::F5 => t * libm::erf(t / mu),
        })
    }

    pub fn deriv(self, t: f64, mu: f64) -> Result<f64> {
        check_mu(mu)?;
        Ok(match self {
            AbsKind::F1 => {
                if t.abs() <= 0.5 * mu {
                    2.0 * t / mu
                } else {
                    t.signum()
                }
            }
            AbsKind::F2 => t / (mu * mu + t * t).sqrt(),
            AbsKind::F3 => (t / (2.0 * mu)).tanh(),
            AbsKind::F4 => {
                let z = t / mu;
                if !z.is_finite() || z.abs() > 350.0 {
                    t.signum()
                } else {
                    let sech = 1.0 / z.cosh();
                    z.tanh() + z * sech * sech
                }
            }
            AbsKind::F5 => {
                let z = t / mu;
                if !z.is_finite() || z.abs() > 30.0 {
                    t.signum()
                } else {
                    libm::erf(z) + z * std::f64::consts::FRAC_2_SQRT_PI * (-z * z).exp()
                }
            }
        })
    }
}

impl std::fmt::Display for AbsKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            AbsKind::F1 => "f1",
            AbsKind::F2 => "f2",
            AbsKind::F3 => "f3",
            AbsKind::F4 => "f4",
            AbsKind::F5 => "f5",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for AbsKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "f1" => Ok(AbsKind::F1),
            "f2" => Ok(AbsKind::F2),
            "f3" => Ok(AbsKind::F3),
            "f4" => Ok(AbsKind::F4),
            "f5" => Ok(AbsKind::F5),
            other => Err(Error::Domain(format!(
                "unknown smoothing kind '{other}' (expected f1..f5)"
            ))),
        }
    }
}

/// What a [`SmoothingFamily`] smooths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SmoothingKind {
    /// LogSumExp surrogate of max(x) over `len` entries.
    Lse { len: usize },
    /// Surrogate of |x|.
    Abs(AbsKind),
}

/// A smoothing family together with its certified error envelope
/// |f~(x, mu) - f(x)| <= kappa * omega(mu) and its AP1 status.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothingFamily {
    pub kind: SmoothingKind,
    pub kappa: f64,
    pub satisfies_ap1: bool,
}

impl SmoothingFamily {
    /// LogSumExp over vectors of length `len`: kappa = log(len).
    pub fn lse(len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::Domain("lse family over zero entries".into()));
        }
        Ok(Self {
            kind: SmoothingKind::Lse { len },
            kappa: (len as f64).ln(),
            satisfies_ap1: true,
        })
    }

    pub fn abs(kind: AbsKind) -> Self {
        Self {
            kind: SmoothingKind::Abs(kind),
            kappa: kind.kappa(),
            satisfies_ap1: kind.satisfies_ap1(),
        }
    }

    pub fn omega(&self, mu: f64) -> f64 {
        mu
    }

    /// The certified bound kappa * omega(mu).
    pub fn envelope(&self, mu: f64) -> f64 {
        self.kappa * self.omega(mu)
    }
}

/// Smoothed l1 norm: sum of the per-entry surrogate values. The error is
/// bounded by len(z) * kappa * omega(mu).
pub fn separable_l1_value(z: &DVector<f64>, mu: f64, kind: AbsKind) -> Result<f64> {
    check_mu(mu)?;
    let mut total = 0.0;
    for &t in z.iter() {
        total += kind.value(t, mu)?;
    }
    Ok(total)
}

/// Entrywise derivative vector of [`separable_l1_value`].
pub fn separable_l1_gradient(z: &DVector<f64>, mu: f64, kind: AbsKind) -> Result<DVector<f64>> {
    check_mu(mu)?;
    let mut g = DVector::zeros(z.len());
    for (i, &t) in z.iter().enumerate() {
        g[i] = kind.deriv(t, mu)?;
    }
    Ok(g)
}

/// One order reversal found by [`ap1_check_abs`] / [`ap1_check_lse`].
#[derive(Debug, Clone)]
pub struct Ap1Violation {
    pub x: Vec<f64>,
    pub mu_hi: f64,
    pub mu_lo: f64,
    pub value_hi: f64,
    pub value_lo: f64,
}

/// Result of probing the approximation-from-above ordering on a grid.
#[derive(Debug, Clone)]
pub struct Ap1Report {
    pub pairs_checked: usize,
    pub violations: usize,
    pub first_violation: Option<Ap1Violation>,
}

impl Ap1Report {
    /// True when no sampled pair had f~(x, mu_lo) above f~(x, mu_hi).
    pub fn holds(&self) -> bool {
        self.violations == 0
    }
}

// The ordering check tolerates exact ties: the piecewise-quadratic family
// is constant in mu wherever |x| > mu/2, so demanding a strict drop there
// would reject a family the ordering genuinely holds for. A violation is a
// resolvable increase of the value as mu shrinks.
fn ap1_violates(value_hi: f64, value_lo: f64) -> bool {
    value_lo > value_hi + 1e-12 * (1.0 + value_hi.abs())
}

fn mu_pairs(mus: &[f64]) -> Vec<(f64, f64)> {
    let mut pairs = Vec::new();
    for (i, &hi) in mus.iter().enumerate() {
        for &lo in &mus[i + 1..] {
            if lo < hi {
                pairs.push((hi, lo));
            }
        }
    }
    pairs
}

/// Probes AP1 for an absolute-value family on all (x, mu_hi > mu_lo)
/// combinations from the given grids.
pub fn ap1_check_abs(kind: AbsKind, xs: &[f64], mus: &[f64]) -> Result<Ap1Report> {
    let mut report = Ap1Report {
        pairs_checked: 0,
        violations: 0,
        first_violation: None,
    };
    for &(mu_hi, mu_lo) in &mu_pairs(mus) {
        for &x in xs {
            let value_hi = kind.value(x, mu_hi)?;
            let value_lo = kind.value(x, mu_lo)?;
            report.pairs_checked += 1;
            if ap1_violates(value_hi, value_lo) {
                report.violations += 1;
                report.first_violation.get_or_insert(Ap1Violation {
                    x: vec![x],
                    mu_hi,
                    mu_lo,
                    value_hi,
                    value_lo,
                });
            }
        }
    }
    Ok(report)
}

/// Probes AP1 for LogSumExp on vector samples.
pub fn ap1_check_lse(points: &[Vec<f64>], mus: &[f64]) -> Result<Ap1Report> {
    let mut report = Ap1Report {
        pairs_checked: 0,
        violations: 0,
        first_violation: None,
    };
    for &(mu_hi, mu_lo) in &mu_pairs(mus) {
        for x in points {
            let value_hi = lse_value(x, mu_hi)?;
            let value_lo = lse_value(x, mu_lo)?;
            report.pairs_checked += 1;
            if ap1_violates(value_hi, value_lo) {
                report.violations += 1;
                report.first_violation.get_or_insert(Ap1Violation {
                    x: x.clone(),
                    mu_hi,
                    mu_lo,
                    value_hi,
                    value_lo,
                });
            }
        }
    }
    Ok(report)
}

/// The grid used by the default AP1 probes: sign-symmetric x values around
/// the switching scale of the piecewise families, and mu spanning two
/// decades.
pub fn ap1_standard_grid() -> (Vec<f64>, Vec<f64>) {
    let xs = vec![
        -3.0, -2.0, -1.0, -0.5, -0.2, -0.05, 0.0, 0.05, 0.2, 0.5, 1.0, 2.0, 3.0,
    ];
    let mus = vec![2.0, 1.0, 0.5, 0.25, 0.1, 0.05, 0.02];
    (xs, mus)
}
