//! Interaction kernels `a(r)`: bounded, non-negative, non-increasing.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    /// `a(r) = (1 + r^2)^(-delta)`.
    PowerLaw { delta: f64 },
    /// Piecewise-linear interpolation of tabulated samples.
    Custom(TabulatedKernel),
}

impl KernelSpec {
    pub fn power_law(delta: f64) -> Result<Self> {
        if !(delta.is_finite() && delta >= 0.0) {
            return Err(invalid(
                "delta",
                format!("must be finite and >= 0, got {delta}"),
            ));
        }
        Ok(Self::PowerLaw { delta })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::PowerLaw { delta } => Self::power_law(*delta).map(|_| ()),
            Self::Custom(t) => t.validate(),
        }
    }

    /// `a(0)`, the supremum of the kernel.
    pub fn upper_bound(&self) -> f64 {
        match self {
            Self::PowerLaw { .. } => 1.0,
            Self::Custom(t) => t.values[0],
        }
    }

    /// Evaluates `a(r)`; negative `r` is a domain error.
    pub fn eval(&self, r: f64) -> Result<f64> {
        if r.is_nan() || r < 0.0 {
            return Err(Error::Domain(format!(
                "kernel argument must be >= 0, got {r}"
            )));
        }
        Ok(match self {
            Self::PowerLaw { delta } => power_law_sq(*delta, r * r),
            Self::Custom(t) => t.eval(r),
        })
    }

    /// Evaluates `a(r)` given `r^2`. Hot path of the right-hand side; the
    /// power-law family never needs the square root.
    #[inline]
    pub fn eval_sq(&self, r2: f64) -> f64 {
        match self {
            Self::PowerLaw { delta } => power_law_sq(*delta, r2),
            Self::Custom(t) => t.eval(r2.sqrt()),
        }
    }
}

#[inline]
fn power_law_sq(delta: f64, r2: f64) -> f64 {
    let base = 1.0 + r2;
    if delta == 0.0 {
        1.0
    } else if delta == 1.0 {
        1.0 / base
    } else if delta == 0.5 {
        1.0 / base.sqrt()
    } else {
        base.powf(-delta)
    }
}

/// Tabulated kernel: knots `0 = r_0 < r_1 < ... < r_m` with non-increasing,
/// non-negative values. Linear in between, constant (last value) beyond `r_m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTable", into = "RawTable")]
pub struct TabulatedKernel {
    knots: Vec<f64>,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTable {
    knots: Vec<f64>,
    values: Vec<f64>,
}

impl TryFrom<RawTable> for TabulatedKernel {
    type Error = Error;
    fn try_from(raw: RawTable) -> Result<Self> {
        Self::new(raw.knots, raw.values)
    }
}

impl From<TabulatedKernel> for RawTable {
    fn from(t: TabulatedKernel) -> Self {
        RawTable {
            knots: t.knots,
            values: t.values,
        }
    }
}

impl TabulatedKernel {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let t = Self { knots, values };
        t.validate()?;
        Ok(t)
    }

    fn validate(&self) -> Result<()> {
        let (k, v) = (&self.knots, &self.values);
        if k.is_empty() || k.len() != v.len() {
            return Err(invalid(
                "custom kernel",
                "need equally many (>= 1) knots and values",
            ));
        }
        if k[0] != 0.0 {
            return Err(invalid("custom kernel", "first knot must be r = 0"));
        }
        if k.iter().chain(v).any(|x| !x.is_finite()) {
            return Err(invalid("custom kernel", "entries must be finite"));
        }
        if k.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid(
                "custom kernel",
                "knots must be strictly increasing",
            ));
        }
        if v.iter().any(|&x| x < 0.0) {
            return Err(invalid("custom kernel", "values must be non-negative"));
        }
        if v.windows(2).any(|w| w[1] > w[0]) {
            return Err(invalid("custom kernel", "values must be non-increasing"));
        }
        Ok(())
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value carried beyond the last knot.
    pub fn tail_value(&self) -> f64 {
        *self.values.last().expect("validated non-empty")
    }

    pub fn eval(&self, r: f64) -> f64 {
        let k = &self.knots;
        let last = k.len() - 1;
        if r >= k[last] {
            return self.values[last];
        }
        // first knot strictly greater than r
        let hi = k.partition_point(|&x| x <= r);
        let lo = hi - 1;
        let t = (r - k[lo]) / (k[hi] - k[lo]);
        self.values[lo] + t * (self.values[hi] - self.values[lo])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_law_values() {
        let k = KernelSpec::power_law(1.0).unwrap();
        assert_eq!(k.eval(0.0).unwrap(), 1.0);
        assert_eq!(k.eval(1.0).unwrap(), 0.5);
        assert_eq!(k.eval(2.0).unwrap(), 0.2);
        let flat = KernelSpec::power_law(0.0).unwrap();
        assert_eq!(flat.eval(17.3).unwrap(), 1.0);
        let gen = KernelSpec::power_law(0.75).unwrap();
        assert!((gen.eval(3.0).unwrap() - 10f64.powf(-0.75)).abs() < 1e-15);
    }

    #[test]
    fn negative_argument_is_domain_error() {
        let k = KernelSpec::power_law(1.0).unwrap();
        assert!(matches!(k.eval(-0.1), Err(Error::Domain(_))));
        assert!(matches!(k.eval(f64::NAN), Err(Error::Domain(_))));
    }

    #[test]
    fn negative_delta_rejected() {
        assert!(KernelSpec::power_law(-1.0).is_err());
        assert!(KernelSpec::power_law(f64::NAN).is_err());
    }

    #[test]
    fn tabulated_interpolates_and_extrapolates() {
        let t = TabulatedKernel::new(vec![0.0, 1.0, 3.0], vec![1.0, 0.5, 0.1]).unwrap();
        assert_eq!(t.eval(0.0), 1.0);
        assert_eq!(t.eval(0.5), 0.75);
        assert!((t.eval(2.0) - 0.3).abs() < 1e-15);
        assert_eq!(t.eval(3.0), 0.1);
        assert_eq!(t.eval(100.0), 0.1);
        let k = KernelSpec::Custom(t);
        assert_eq!(k.upper_bound(), 1.0);
        assert_eq!(k.eval_sq(0.25), 0.75);
    }

    #[test]
    fn tabulated_validation() {
        assert!(TabulatedKernel::new(vec![0.0, 1.0], vec![0.5, 0.7]).is_err());
        assert!(TabulatedKernel::new(vec![0.1, 1.0], vec![0.5, 0.4]).is_err());
        assert!(TabulatedKernel::new(vec![0.0, 0.0], vec![0.5, 0.4]).is_err());
        assert!(TabulatedKernel::new(vec![0.0, 1.0], vec![0.5, -0.1]).is_err());
        assert!(TabulatedKernel::new(vec![], vec![]).is_err());
    }

    #[test]
    fn serde_roundtrip_validates() {
        let k: KernelSpec = serde_json::from_str(r#"{"kind":"power_law","delta":1.0}"#).unwrap();
        assert_eq!(k, KernelSpec::PowerLaw { delta: 1.0 });
        let bad = serde_json::from_str::<KernelSpec>(
            r#"{"kind":"custom","knots":[0,1],"values":[0.1,0.2]}"#,
        );
        assert!(bad.is_err());
    }
}
