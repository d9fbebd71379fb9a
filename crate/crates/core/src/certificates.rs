//! Sufficient conditions for consensus expressed as integral inequalities
//! in the initial dispersions `(X0, V0)`.
//!
//! The baseline condition is
//!
//! ```text
//! int_{sqrt X0}^inf a(sqrt(2N) r) dr >= sqrt V0
//! ```
//!
//! and the radius-limited feedback adds
//! `(gamma N / eta_bound) int_{sqrt X0}^inf psi(sqrt(2N) r) dr` to the left side,
//! where `psi` is the cut-off profile of the controller family.
//!
//! Divergence is always decided from the decay exponent, never numerically.
//! Finite power-law integrals are split at `r_max = max(sqrt X0, 1e3)`:
//! adaptive quadrature below, a convergent binomial series above.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernel::KernelSpec;
use crate::quadrature;

const QUAD_ABS_TOL: f64 = 1e-10;
const SPLIT_RADIUS: f64 = 1e3;

/// Value of an improper tail integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailIntegral {
    Finite(f64),
    Divergent,
}

impl TailIntegral {
    pub fn value(self) -> f64 {
        match self {
            Self::Finite(v) => v,
            Self::Divergent => f64::INFINITY,
        }
    }

    pub fn is_divergent(self) -> bool {
        matches!(self, Self::Divergent)
    }
}

/// `int_lower^inf (1 + c^2 r^2)^(-exponent) dr`.
pub fn power_law_tail(exponent: f64, c: f64, lower: f64) -> Result<TailIntegral> {
    if exponent <= 0.5 {
        return Ok(TailIntegral::Divergent);
    }
    let split = lower.max(SPLIT_RADIUS);
    let body = quadrature::integrate(
        |r| (1.0 + c * c * r * r).powf(-exponent),
        lower,
        split,
        QUAD_ABS_TOL,
        0.0,
    )?;
    Ok(TailIntegral::Finite(
        body.value + power_law_series_tail(exponent, c, split),
    ))
}

/// `int_R^inf (1 + c^2 r^2)^(-p) dr` for `c R >= 1` by term-wise integration of
/// `(c r)^(-2p) (1 + (c r)^-2)^(-p) = sum_k binom(-p, k) (c r)^(-2(p + k))`.
fn power_law_series_tail(p: f64, c: f64, r: f64) -> f64 {
    let inv_s = 1.0 / (c * r * c * r);
    let mut coeff = 1.0; // binom(-p, k)
    let mut power = (c * r).powf(-2.0 * p); // (c R)^(-2(p + k))
    let mut sum = 0.0;
    for k in 0..64 {
        let kf = k as f64;
        let term = coeff * r * power / (2.0 * (p + kf) - 1.0);
        sum += term;
        if term.abs() <= 1e-18 * sum.abs().max(1e-300) {
            break;
        }
        coeff *= (-p - kf) / (kf + 1.0);
        power *= inv_s;
    }
    sum
}

/// `int_lower^inf a(sqrt(2N) r) dr`.
///
/// Power law: divergent iff `delta <= 1/2`. Tabulated kernels: divergent iff
/// the extrapolated tail value is positive, otherwise the piecewise-linear
/// integral over the tabulated support (exact).
pub fn kernel_tail_integral(kernel: &KernelSpec, lower: f64, n: usize) -> Result<TailIntegral> {
    if lower.is_nan() || lower < 0.0 {
        return Err(Error::Domain(format!(
            "lower limit must be >= 0, got {lower}"
        )));
    }
    if n == 0 {
        return Err(invalid("N", "must be >= 1"));
    }
    kernel.validate()?;
    let c = (2.0 * n as f64).sqrt();
    match kernel {
        KernelSpec::PowerLaw { delta } => power_law_tail(*delta, c, lower),
        KernelSpec::Custom(t) => {
            if t.tail_value() > 0.0 {
                return Ok(TailIntegral::Divergent);
            }
            // substitute s = c r: (1/c) int_{c lower}^inf a(s) ds
            let start = c * lower;
            let k = t.knots();
            let mut acc = 0.0;
            for w in 0..k.len().saturating_sub(1) {
                let (a, b) = (k[w].max(start), k[w + 1]);
                if b <= a {
                    continue;
                }
                acc += 0.5 * (t.eval(a) + t.eval(b)) * (b - a);
            }
            Ok(TailIntegral::Finite(acc / c))
        }
    }
}

/// Cut-off profile `psi` of the radius-limited feedback.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum CertificateFamily {
    /// No feedback term; reduces to the baseline condition.
    #[default]
    NoControl,
    /// `psi = chi_[0, R]`.
    ChiRadius { radius: f64 },
    /// `psi = 1` on `[0, R]`, `(r - R + 1)^(-theta)` beyond.
    PsiRTheta { radius: f64, theta: f64 },
    /// `psi = (1 + r^2)^(-epsilon)`.
    PsiPowerLaw { epsilon: f64 },
}

impl CertificateFamily {
    fn validate(&self) -> Result<()> {
        let radius_ok = |r: f64| {
            if r.is_nan() || r < 0.0 {
                Err(invalid("radius", format!("must be >= 0, got {r}")))
            } else {
                Ok(())
            }
        };
        match *self {
            Self::NoControl => Ok(()),
            Self::ChiRadius { radius } => radius_ok(radius),
            Self::PsiRTheta { radius, theta } => {
                radius_ok(radius)?;
                if theta.is_nan() || theta <= 1.0 {
                    return Err(Error::DivergentFamily(format!(
                        "psi_(R,theta) needs theta > 1, got {theta}"
                    )));
                }
                Ok(())
            }
            Self::PsiPowerLaw { epsilon } => {
                if epsilon.is_nan() || epsilon < 0.0 {
                    return Err(invalid("epsilon", format!("must be >= 0, got {epsilon}")));
                }
                Ok(())
            }
        }
    }

    /// `int_lower^inf psi(sqrt(2N) r) dr` in closed form where available.
    pub fn tail_integral(&self, lower: f64, n: usize) -> Result<TailIntegral> {
        self.validate()?;
        let c = (2.0 * n as f64).sqrt();
        let scaled = c * lower;
        Ok(match *self {
            Self::NoControl => TailIntegral::Finite(0.0),
            Self::ChiRadius { radius } => {
                if radius.is_infinite() {
                    TailIntegral::Divergent
                } else if scaled <= radius {
                    TailIntegral::Finite(radius / c - lower)
                } else {
                    TailIntegral::Finite(0.0)
                }
            }
            Self::PsiRTheta { radius, theta } => {
                if radius.is_infinite() {
                    TailIntegral::Divergent
                } else if scaled <= radius {
                    TailIntegral::Finite(radius / c - lower + 1.0 / (c * (theta - 1.0)))
                } else {
                    TailIntegral::Finite(
                        1.0 / (c * (theta - 1.0) * (scaled - radius + 1.0).powf(theta - 1.0)),
                    )
                }
            }
            Self::PsiPowerLaw { epsilon } => return power_law_tail(epsilon, c, lower),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateQuery {
    pub n: usize,
    pub x0: f64,
    pub v0: f64,
    pub kernel: KernelSpec,
    #[serde(default)]
    pub gamma: f64,
    #[serde(default)]
    pub family: CertificateFamily,
    /// Upper bound on the normalizer `eta`; defaults to `N`.
    #[serde(default)]
    pub eta_bound: Option<f64>,
}

impl CertificateQuery {
    pub fn baseline(n: usize, x0: f64, v0: f64, kernel: KernelSpec) -> Self {
        Self {
            n,
            x0,
            v0,
            kernel,
            gamma: 0.0,
            family: CertificateFamily::NoControl,
            eta_bound: None,
        }
    }

    pub fn eta(&self) -> f64 {
        self.eta_bound.unwrap_or(self.n as f64)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(invalid("N", "must be >= 1"));
        }
        for (name, x) in [("X0", self.x0), ("V0", self.v0), ("gamma", self.gamma)] {
            if !(x.is_finite() && x >= 0.0) {
                return Err(invalid(name, format!("must be finite and >= 0, got {x}")));
            }
        }
        let eta = self.eta();
        if !(eta >= 1.0 && eta <= self.n as f64) {
            return Err(invalid(
                "eta_bound",
                format!("must lie in [1, N = {}], got {eta}", self.n),
            ));
        }
        self.kernel.validate()?;
        self.family.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Fails,
    Unconditional,
}

/// Outcome of a certificate evaluation. `lhs` and `margin` are `None` when
/// the left side diverges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertificateResult {
    pub verdict: Verdict,
    pub lhs: Option<f64>,
    pub rhs: f64,
    pub margin: Option<f64>,
}

impl CertificateResult {
    pub fn holds(&self) -> bool {
        self.verdict != Verdict::Fails
    }

    /// `lhs^2`: the largest certified `V0` at this `X0`.
    pub fn certified_v(&self) -> f64 {
        self.lhs.map_or(f64::INFINITY, |l| l * l)
    }
}

/// Total left-hand side of the extended condition at `X0`.
fn total_lhs(query: &CertificateQuery) -> Result<TailIntegral> {
    let lower = query.x0.sqrt();
    let base = kernel_tail_integral(&query.kernel, lower, query.n)?;
    let coeff = query.gamma * query.n as f64 / query.eta();
    if coeff == 0.0 || matches!(query.family, CertificateFamily::NoControl) {
        return Ok(base);
    }
    let extra = query.family.tail_integral(lower, query.n)?;
    Ok(match (base, extra) {
        (TailIntegral::Finite(a), TailIntegral::Finite(b)) => TailIntegral::Finite(a + coeff * b),
        _ => TailIntegral::Divergent,
    })
}

/// Extended condition with the feedback term.
pub fn extended_certificate(query: &CertificateQuery) -> Result<CertificateResult> {
    query.validate()?;
    let rhs = query.v0.sqrt();
    Ok(match total_lhs(query)? {
        TailIntegral::Divergent => CertificateResult {
            verdict: Verdict::Unconditional,
            lhs: None,
            rhs,
            margin: None,
        },
        TailIntegral::Finite(lhs) => {
            let margin = lhs - rhs;
            CertificateResult {
                verdict: if margin >= 0.0 {
                    Verdict::Holds
                } else {
                    Verdict::Fails
                },
                lhs: Some(lhs),
                rhs,
                margin: Some(margin),
            }
        }
    })
}

/// Baseline condition without feedback.
pub fn hhk_certificate(
    n: usize,
    x0: f64,
    v0: f64,
    kernel: &KernelSpec,
) -> Result<CertificateResult> {
    extended_certificate(&CertificateQuery::baseline(n, x0, v0, kernel.clone()))
}

/// Largest certified `V0` for each `X0` in `x_grid` (`+inf` when unconditional).
pub fn certified_boundary(
    n: usize,
    kernel: &KernelSpec,
    gamma: f64,
    family: CertificateFamily,
    eta_bound: Option<f64>,
    x_grid: &[f64],
) -> Result<Vec<f64>> {
    if x_grid.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(invalid("X_grid", "entries must be finite and >= 0"));
    }
    if x_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("X_grid", "must be strictly increasing"));
    }
    x_grid
        .iter()
        .map(|&x0| {
            let q = CertificateQuery {
                n,
                x0,
                v0: 0.0,
                kernel: kernel.clone(),
                gamma,
                family,
                eta_bound,
            };
            q.validate()?;
            Ok(total_lhs(&q)?.value().powi(2))
        })
        .collect()
}
