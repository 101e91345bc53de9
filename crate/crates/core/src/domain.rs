//! Radially symmetric domains centred at the kernel singularity and radial
//! power-weighted measures `d mu = |x|^w dx`.
//!
//! Because every kernel norm is radial, an integral of `|k|^p` against `mu`
//! over such a domain collapses to `c * int r^a dr` with an exact angular
//! constant `c = omega_n * m^p` (`m` the kernel norm on the unit sphere) and
//! exponent `a = -h p + w + n - 1`.

use std::fmt;

use num_traits::{CheckedAdd, CheckedMul, CheckedSub};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::{unit_sphere_area, KernelSpec};
use crate::rational::{self, Rational};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("invalid domain: {0}")]
    Invalid(String),
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("domain dimension {domain} does not match kernel dimension {kernel}")]
    DimensionMismatch { domain: usize, kernel: usize },
    #[error("exponent p must be positive and finite, got {0}")]
    InvalidExponent(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    /// `(-r_out, r_out) \ [-r_in, r_in]` on the line.
    Interval,
    Annulus,
    PuncturedBall,
    Exterior,
}

impl fmt::Display for DomainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DomainKind::Interval => "interval",
            DomainKind::Annulus => "annulus",
            DomainKind::PuncturedBall => "punctured_ball",
            DomainKind::Exterior => "exterior",
        })
    }
}

/// `{ r_in < |x| < r_out }` in `R^n`, with `r_out` absent for exterior domains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDomain", into = "RawDomain")]
pub struct RadialDomain {
    kind: DomainKind,
    n: usize,
    r_in: f64,
    r_out: Option<f64>,
    r_max: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawDomain {
    kind: DomainKind,
    n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    r_in: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    r_out: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    r_max: Option<f64>,
}

impl TryFrom<RawDomain> for RadialDomain {
    type Error = DomainError;

    fn try_from(raw: RawDomain) -> Result<Self, DomainError> {
        let r_in = raw
            .r_in
            .ok_or_else(|| DomainError::Invalid(format!("{} requires r_in", raw.kind)))?;
        let need_out = || DomainError::Invalid(format!("{} requires r_out", raw.kind));
        let domain = match raw.kind {
            DomainKind::Interval => {
                if raw.n != 1 {
                    return Err(DomainError::Invalid("interval domains have n = 1".into()));
                }
                RadialDomain::interval(r_in, raw.r_out.ok_or_else(need_out)?)?
            }
            DomainKind::Annulus => RadialDomain::annulus(raw.n, r_in, raw.r_out.ok_or_else(need_out)?)?,
            DomainKind::PuncturedBall => {
                RadialDomain::punctured_ball(raw.n, r_in, raw.r_out.ok_or_else(need_out)?)?
            }
            DomainKind::Exterior => {
                if raw.r_out.is_some() {
                    return Err(DomainError::Invalid("exterior domains have no r_out".into()));
                }
                RadialDomain::exterior(raw.n, r_in)?
            }
        };
        match raw.r_max {
            Some(r_max) => domain.with_truncation(r_max),
            None => Ok(domain),
        }
    }
}

impl From<RadialDomain> for RawDomain {
    fn from(d: RadialDomain) -> Self {
        RawDomain {
            kind: d.kind,
            n: d.n,
            r_in: Some(d.r_in),
            r_out: d.r_out,
            r_max: d.r_max,
        }
    }
}

fn bounded(kind: DomainKind, n: usize, r_in: f64, r_out: f64) -> Result<RadialDomain, DomainError> {
    if n == 0 {
        return Err(DomainError::Invalid("dimension must be >= 1".into()));
    }
    if !(r_in > 0.0 && r_in.is_finite()) {
        return Err(DomainError::Invalid(format!("r_in must be > 0, got {r_in}")));
    }
    if !(r_out > r_in && r_out.is_finite()) {
        return Err(DomainError::Invalid(format!(
            "need r_in < r_out < inf, got r_in = {r_in}, r_out = {r_out}"
        )));
    }
    Ok(RadialDomain {
        kind,
        n,
        r_in,
        r_out: Some(r_out),
        r_max: None,
    })
}

impl RadialDomain {
    /// The punctured interval `(-r_out, r_out) \ [-r_in, r_in]`.
    pub fn interval(r_in: f64, r_out: f64) -> Result<Self, DomainError> {
        bounded(DomainKind::Interval, 1, r_in, r_out)
    }

    pub fn annulus(n: usize, r_in: f64, r_out: f64) -> Result<Self, DomainError> {
        bounded(DomainKind::Annulus, n, r_in, r_out)
    }

    /// Ball of radius `r_out` with the ball of radius `r_in` removed.
    pub fn punctured_ball(n: usize, r_in: f64, r_out: f64) -> Result<Self, DomainError> {
        bounded(DomainKind::PuncturedBall, n, r_in, r_out)
    }

    pub fn exterior(n: usize, r_in: f64) -> Result<Self, DomainError> {
        if n == 0 {
            return Err(DomainError::Invalid("dimension must be >= 1".into()));
        }
        if !(r_in > 0.0 && r_in.is_finite()) {
            return Err(DomainError::Invalid(format!("r_in must be > 0, got {r_in}")));
        }
        Ok(RadialDomain {
            kind: DomainKind::Exterior,
            n,
            r_in,
            r_out: None,
            r_max: None,
        })
    }

    /// Sets the radius at which numeric integrators cut an exterior domain.
    pub fn with_truncation(mut self, r_max: f64) -> Result<Self, DomainError> {
        if !(r_max > self.r_in && r_max.is_finite()) {
            return Err(DomainError::Invalid(format!(
                "truncation radius {r_max} must exceed r_in = {}",
                self.r_in
            )));
        }
        if self.kind != DomainKind::Exterior {
            return Err(DomainError::Invalid(
                "truncation radius only applies to exterior domains".into(),
            ));
        }
        self.r_max = Some(r_max);
        Ok(self)
    }

    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r_in(&self) -> f64 {
        self.r_in
    }

    /// Outer radius, `None` when unbounded.
    pub fn r_out(&self) -> Option<f64> {
        self.r_out
    }

    pub fn truncation_radius(&self) -> Option<f64> {
        self.r_max
    }

    pub fn is_bounded(&self) -> bool {
        self.r_out.is_some()
    }

    /// Radial extent used by numeric integrators: the outer radius, or the
    /// truncation radius for exterior domains.
    pub fn numeric_extent(&self) -> Option<(f64, f64)> {
        self.r_out.or(self.r_max).map(|r1| (self.r_in, r1))
    }

    /// Upper radial limit, `+inf` for exterior domains.
    pub fn upper_radius(&self) -> f64 {
        self.r_out.unwrap_or(f64::INFINITY)
    }

    /// Angular measure: the area of `S^{n-1}` (two points when `n = 1`).
    pub fn angular_measure(&self) -> f64 {
        unit_sphere_area(self.n)
    }
}

/// `d mu = |x|^w dx` with `w >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMeasure", into = "RawMeasure")]
pub struct WeightedMeasure {
    weight_exponent: f64,
}

#[derive(Serialize, Deserialize)]
struct RawMeasure {
    #[serde(default)]
    weight_exponent: f64,
}

impl TryFrom<RawMeasure> for WeightedMeasure {
    type Error = DomainError;

    fn try_from(raw: RawMeasure) -> Result<Self, DomainError> {
        WeightedMeasure::new(raw.weight_exponent)
    }
}

impl From<WeightedMeasure> for RawMeasure {
    fn from(m: WeightedMeasure) -> Self {
        RawMeasure {
            weight_exponent: m.weight_exponent,
        }
    }
}

impl Default for WeightedMeasure {
    fn default() -> Self {
        Self::lebesgue()
    }
}

impl WeightedMeasure {
    pub fn new(weight_exponent: f64) -> Result<Self, DomainError> {
        if !(weight_exponent >= 0.0 && weight_exponent.is_finite()) {
            return Err(DomainError::InvalidMeasure(format!(
                "weight exponent must be finite and >= 0, got {weight_exponent}"
            )));
        }
        Ok(Self { weight_exponent })
    }

    pub fn lebesgue() -> Self {
        Self {
            weight_exponent: 0.0,
        }
    }

    pub fn weight_exponent(&self) -> f64 {
        self.weight_exponent
    }

    /// Density `|x|^w` at radius `r`.
    #[inline]
    pub fn density(&self, r: f64) -> f64 {
        if self.weight_exponent == 0.0 {
            1.0
        } else {
            r.powf(self.weight_exponent)
        }
    }
}

/// `constant * int r^exponent dr` over the domain's radial extent.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialIntegralForm {
    pub constant: f64,
    pub exponent: f64,
    /// Exact exponent when `p`, `h` and `w` are all representable as decimals.
    #[serde(with = "optional_rational")]
    pub exponent_exact: Option<Rational>,
    pub domain: RadialDomain,
}

mod optional_rational {
    use crate::rational::{self, Rational};
    use serde::Serializer;

    pub fn serialize<S: Serializer>(r: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
        match r {
            Some(r) => s.serialize_some(&rational::format(r)),
            None => s.serialize_none(),
        }
    }
}

/// Reduces `int_domain |k|^p d mu` to a one-dimensional radial power integral.
pub fn radial_reduction(
    spec: &KernelSpec,
    p: f64,
    measure: &WeightedMeasure,
    domain: &RadialDomain,
) -> Result<RadialIntegralForm, DomainError> {
    if domain.n != spec.n() {
        return Err(DomainError::DimensionMismatch {
            domain: domain.n,
            kernel: spec.n(),
        });
    }
    if !(p > 0.0 && p.is_finite()) {
        return Err(DomainError::InvalidExponent(p));
    }
    let h = spec.homogeneity_degree_f64();
    let w = measure.weight_exponent();
    let n = spec.n() as f64;
    let constant = domain.angular_measure() * spec.unit_norm().powf(p);
    let exponent_exact = exact_exponent(spec.homogeneity_degree(), p, w, spec.n());
    let exponent = match exponent_exact {
        Some(a) => rational::to_f64(&a),
        None => -h * p + w + n - 1.0,
    };
    Ok(RadialIntegralForm {
        constant,
        exponent,
        exponent_exact,
        domain: domain.clone(),
    })
}

/// `-h p + w + n - 1` in exact arithmetic.
pub fn exact_exponent(h: Rational, p: f64, w: f64, n: usize) -> Option<Rational> {
    let p = rational::from_f64(p).ok()?;
    let w = rational::from_f64(w).ok()?;
    let hp = h.checked_mul(&p)?;
    let shift = w.checked_add(&Rational::from_integer(n as i64 - 1))?;
    shift.checked_sub(&hp)
}

/// `mu(domain)`, `+inf` for exterior domains.
pub fn measure_of(domain: &RadialDomain, measure: &WeightedMeasure) -> f64 {
    match domain.r_out {
        None => f64::INFINITY,
        Some(r_out) => {
            let e = domain.n as f64 + measure.weight_exponent();
            domain.angular_measure() * (r_out.powf(e) - domain.r_in.powf(e)) / e
        }
    }
}
