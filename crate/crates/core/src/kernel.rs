//! Generating kernels and their singularity classification.
//!
//! Four families are supported:
//!
//! * `power_model`: the one-dimensional model `|x|^{-alpha}`;
//! * `cauchy`: `conj(x) / (omega_n |x|^n)`, the fundamental solution of the
//!   Dirac operator;
//! * `laplace_iterate`: the scalar kernel `-1 / (omega_n |x|^{n+2})`;
//! * `dirac_iterate`: `theta x / (omega_n |x|^{n-l+1})` for odd `l` and
//!   `theta / (omega_n |x|^{n-l+1})` for even `l`, with `1 <= l < n`.
//!
//! Every kernel norm is radial, `|k(x)| = m * |x|^{-h}`, where `h` is the
//! homogeneity degree and `m` the norm on the unit sphere.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clifford::{CliffordError, Multivector, MAX_DIM};
use crate::rational::{self, Rational};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("kernel evaluated at its singular point x = 0")]
    SingularPoint,
    #[error("point has {got} coordinates, kernel dimension is {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid kernel: {0}")]
    Invalid(String),
    #[error(transparent)]
    Clifford(#[from] CliffordError),
}

/// Surface area of the unit sphere `S^{n-1}` in `R^n`, `2 pi^{n/2} / Gamma(n/2)`.
pub fn unit_sphere_area(n: usize) -> f64 {
    assert!(n >= 1, "sphere area needs n >= 1");
    // omega_{n+2} = 2 pi omega_n / n
    let mut area = if n % 2 == 1 { 2.0 } else { 2.0 * PI };
    let mut k = if n % 2 == 1 { 1 } else { 2 };
    while k < n {
        area *= 2.0 * PI / k as f64;
        k += 2;
    }
    area
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    PowerModel,
    Cauchy,
    LaplaceIterate,
    DiracIterate,
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            KernelFamily::PowerModel => "power_model",
            KernelFamily::Cauchy => "cauchy",
            KernelFamily::LaplaceIterate => "laplace_iterate",
            KernelFamily::DiracIterate => "dirac_iterate",
        };
        f.write_str(name)
    }
}

/// Weak, singular or hyper singular, by effective homogeneity versus dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SingularityClass {
    Weak,
    Singular,
    Hyper,
}

/// Identifies one generating kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawKernelSpec", into = "RawKernelSpec")]
pub struct KernelSpec {
    family: KernelFamily,
    n: usize,
    l: usize,
    alpha: f64,
    theta: f64,
    degree: Rational,
}

#[derive(Serialize, Deserialize)]
struct RawKernelSpec {
    family: KernelFamily,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    l: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    theta: Option<f64>,
}

impl TryFrom<RawKernelSpec> for KernelSpec {
    type Error = KernelError;

    fn try_from(raw: RawKernelSpec) -> Result<Self, KernelError> {
        let missing = |field: &str| KernelError::Invalid(format!("{} requires `{field}`", raw.family));
        match raw.family {
            KernelFamily::PowerModel => {
                if let Some(n) = raw.n.filter(|&n| n != 1) {
                    return Err(KernelError::Invalid(format!(
                        "power_model is one-dimensional, got n = {n}"
                    )));
                }
                KernelSpec::power_model(raw.alpha.ok_or_else(|| missing("alpha"))?)
            }
            KernelFamily::Cauchy => KernelSpec::cauchy(raw.n.ok_or_else(|| missing("n"))?),
            KernelFamily::LaplaceIterate => {
                KernelSpec::laplace_iterate(raw.n.ok_or_else(|| missing("n"))?)
            }
            KernelFamily::DiracIterate => {
                let spec = KernelSpec::dirac_iterate(
                    raw.n.ok_or_else(|| missing("n"))?,
                    raw.l.ok_or_else(|| missing("l"))?,
                )?;
                match raw.theta {
                    Some(theta) => spec.with_theta(theta),
                    None => Ok(spec),
                }
            }
        }
    }
}

impl From<KernelSpec> for RawKernelSpec {
    fn from(spec: KernelSpec) -> Self {
        let dirac = spec.family == KernelFamily::DiracIterate;
        RawKernelSpec {
            family: spec.family,
            n: Some(spec.n),
            l: dirac.then_some(spec.l),
            alpha: (spec.family == KernelFamily::PowerModel).then_some(spec.alpha),
            theta: dirac.then_some(spec.theta),
        }
    }
}

fn check_dimension(n: usize) -> Result<(), KernelError> {
    if n == 0 || n > MAX_DIM {
        return Err(KernelError::Invalid(format!(
            "dimension {n} outside 1..={MAX_DIM}"
        )));
    }
    Ok(())
}

impl KernelSpec {
    /// `|x|^{-alpha}` on the real line.
    pub fn power_model(alpha: f64) -> Result<Self, KernelError> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(KernelError::Invalid(format!("alpha must be > 0, got {alpha}")));
        }
        let degree = rational::from_f64(alpha)
            .map_err(|e| KernelError::Invalid(format!("alpha: {e}")))?;
        Ok(Self {
            family: KernelFamily::PowerModel,
            n: 1,
            l: 0,
            alpha,
            theta: 1.0,
            degree,
        })
    }

    pub fn cauchy(n: usize) -> Result<Self, KernelError> {
        check_dimension(n)?;
        if n < 2 {
            return Err(KernelError::Invalid(
                "cauchy kernel needs n >= 2 (degree n - 1 must be positive)".into(),
            ));
        }
        Ok(Self {
            family: KernelFamily::Cauchy,
            n,
            l: 0,
            alpha: 0.0,
            theta: 1.0,
            degree: Rational::from_integer(n as i64 - 1),
        })
    }

    pub fn laplace_iterate(n: usize) -> Result<Self, KernelError> {
        check_dimension(n)?;
        Ok(Self {
            family: KernelFamily::LaplaceIterate,
            n,
            l: 0,
            alpha: 0.0,
            theta: 1.0,
            degree: Rational::from_integer(n as i64 + 2),
        })
    }

    /// Iterated Dirac kernel of order `l`, `1 <= l < n`, with `theta = 1`.
    pub fn dirac_iterate(n: usize, l: usize) -> Result<Self, KernelError> {
        check_dimension(n)?;
        if l == 0 || l >= n {
            return Err(KernelError::Invalid(format!(
                "dirac_iterate needs 1 <= l < n, got l = {l}, n = {n}"
            )));
        }
        let degree = if l % 2 == 1 { n - l } else { n - l + 1 };
        Ok(Self {
            family: KernelFamily::DiracIterate,
            n,
            l,
            alpha: 0.0,
            theta: 1.0,
            degree: Rational::from_integer(degree as i64),
        })
    }

    /// Replaces the normalization constant of a `dirac_iterate` kernel.
    pub fn with_theta(mut self, theta: f64) -> Result<Self, KernelError> {
        if self.family != KernelFamily::DiracIterate {
            return Err(KernelError::Invalid(format!(
                "theta only applies to dirac_iterate, not {}",
                self.family
            )));
        }
        if !(theta.is_finite() && theta != 0.0) {
            return Err(KernelError::Invalid(format!(
                "theta must be finite and non-zero, got {theta}"
            )));
        }
        self.theta = theta;
        Ok(self)
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Iterate order; zero for families other than `dirac_iterate`.
    pub fn l(&self) -> usize {
        self.l
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Exact `h` with `|k(r u)| = r^{-h} |k(u)|`.
    pub fn homogeneity_degree(&self) -> Rational {
        self.degree
    }

    pub fn homogeneity_degree_f64(&self) -> f64 {
        rational::to_f64(&self.degree)
    }

    /// Norm of the kernel on the unit sphere (the same in every direction).
    pub fn unit_norm(&self) -> f64 {
        match self.family {
            KernelFamily::PowerModel => 1.0,
            KernelFamily::Cauchy | KernelFamily::LaplaceIterate => 1.0 / unit_sphere_area(self.n),
            KernelFamily::DiracIterate => self.theta.abs() / unit_sphere_area(self.n),
        }
    }

    /// Grade of the kernel's values: 1 for vector kernels, 0 for scalar ones.
    pub fn value_grade(&self) -> u32 {
        match self.family {
            KernelFamily::Cauchy => 1,
            KernelFamily::DiracIterate if self.l % 2 == 1 => 1,
            _ => 0,
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<Multivector, KernelError> {
        let mut out = Multivector::zero(self.n)?;
        self.evaluate_into(x, out.coeffs_mut())?;
        Ok(out)
    }

    /// Writes the kernel value at `x` into a zeroed coefficient buffer of length `2^n`.
    pub fn evaluate_into(&self, x: &[f64], out: &mut [f64]) -> Result<(), KernelError> {
        if x.len() != self.n {
            return Err(KernelError::DimensionMismatch {
                expected: self.n,
                got: x.len(),
            });
        }
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r == 0.0 {
            return Err(KernelError::SingularPoint);
        }
        let n = self.n as i32;
        match self.family {
            KernelFamily::PowerModel => out[0] = r.powf(-self.alpha),
            KernelFamily::Cauchy => {
                let scale = -1.0 / (unit_sphere_area(self.n) * r.powi(n));
                for (j, &xj) in x.iter().enumerate() {
                    out[1 << j] = scale * xj;
                }
            }
            KernelFamily::LaplaceIterate => {
                out[0] = -1.0 / (unit_sphere_area(self.n) * r.powi(n + 2));
            }
            KernelFamily::DiracIterate => {
                let scale = self.theta / (unit_sphere_area(self.n) * r.powi(n - self.l as i32 + 1));
                if self.l % 2 == 1 {
                    for (j, &xj) in x.iter().enumerate() {
                        out[1 << j] = scale * xj;
                    }
                } else {
                    out[0] = scale;
                }
            }
        }
        Ok(())
    }

    /// Classifies the induced operator under the measure `|x|^w dx`.
    pub fn classify(&self, weight_exponent: f64) -> SingularityClass {
        let n = Rational::from_integer(self.n as i64);
        let ordering = match rational::from_f64(weight_exponent) {
            Ok(w) => (self.degree - w).cmp(&n),
            Err(_) => {
                let eff = self.homogeneity_degree_f64() - weight_exponent;
                eff.partial_cmp(&(self.n as f64))
                    .unwrap_or(std::cmp::Ordering::Greater)
            }
        };
        match ordering {
            std::cmp::Ordering::Less => SingularityClass::Weak,
            std::cmp::Ordering::Equal => SingularityClass::Singular,
            std::cmp::Ordering::Greater => SingularityClass::Hyper,
        }
    }

    /// `|k(lambda x) - lambda^{-h} k(x)|`.
    pub fn homogeneity_check(&self, x: &[f64], lambda: f64) -> Result<f64, KernelError> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(KernelError::Invalid(format!("scale must be > 0, got {lambda}")));
        }
        let scaled: Vec<f64> = x.iter().map(|v| lambda * v).collect();
        let lhs = self.evaluate(&scaled)?;
        let rhs = self
            .evaluate(x)?
            .scale(lambda.powf(-self.homogeneity_degree_f64()));
        Ok(lhs.try_sub(&rhs)?.norm())
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            KernelFamily::PowerModel => write!(f, "power_model(alpha={})", self.alpha),
            KernelFamily::DiracIterate => write!(
                f,
                "dirac_iterate(n={}, l={}, theta={})",
                self.n, self.l, self.theta
            ),
            family => write!(f, "{family}(n={})", self.n),
        }
    }
}
