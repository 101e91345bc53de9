//! Integrability thresholds in exact rational arithmetic.
//!
//! For a kernel of homogeneity degree `h` against `|x|^w dx` in `R^n`, the
//! radial integrand of `|d^j k|^p` behaves like `r^{-(h+j)p + w + n - 1}`, so
//! the critical exponent is `p* = (n + w) / (h + j)` at both ends. Above it
//! the exterior integral is finite; below it the punctured-ball integral is.

use std::fmt;

use num_traits::{CheckedAdd, CheckedDiv};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::domain::{DomainError, DomainKind, RadialDomain, WeightedMeasure};
use crate::kernel::{KernelError, KernelFamily, KernelSpec};
use crate::norm::{self, NormError};
use crate::quadrature::{self, DivergenceEnd};
use crate::rational::{self, Rational};

/// Doubling budget for the numeric divergence witness.
pub const MAX_DOUBLINGS: usize = 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ThresholdError {
    #[error("kernel does not decay: h + j = {0} <= 0")]
    NotDecaying(Rational),
    #[error("weight exponent must be >= 0, got {0}")]
    NegativeWeight(Rational),
    #[error("delta must satisfy 0 < delta < p*/2 = {limit}, got {delta}")]
    InvalidDelta { delta: f64, limit: f64 },
    #[error("threshold does not fit an i64 rational")]
    Overflow,
    #[error("numeric witness needs an exterior domain, got {0:?}")]
    NotExterior(DomainKind),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Norm(#[from] NormError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum End {
    AtInfinity,
    AtOrigin,
}

/// Upper end of the conjugate range `(1, q*)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QStar {
    Finite(Rational),
    /// `p* <= 1`: every `q > 1` is admissible.
    Infinite,
}

impl QStar {
    /// `1 < q < q*`.
    pub fn admits(&self, q: Rational) -> bool {
        q > Rational::from_integer(1)
            && match self {
                QStar::Finite(bound) => q < *bound,
                QStar::Infinite => true,
            }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            QStar::Finite(r) => rational::to_f64(r),
            QStar::Infinite => f64::INFINITY,
        }
    }
}

impl fmt::Display for QStar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QStar::Finite(r) => write!(f, "{r}"),
            QStar::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for QStar {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for QStar {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        if text == "inf" {
            return Ok(QStar::Infinite);
        }
        rational::parse(&text)
            .map(QStar::Finite)
            .map_err(serde::de::Error::custom)
    }
}

/// `p* = (n + w) / (h + j)`.
///
/// At infinity the kernel lies in `L^p` for `p > p*`; at the origin for
/// `p < p*`. The formula is the same; `end` only fixes the side.
pub fn critical_exponent(
    spec: &KernelSpec,
    weight_exponent: Rational,
    _end: End,
    derivative_order: u32,
) -> Result<Rational, ThresholdError> {
    if weight_exponent < Rational::from_integer(0) {
        return Err(ThresholdError::NegativeWeight(weight_exponent));
    }
    let decay = spec
        .homogeneity_degree()
        .checked_add(&Rational::from_integer(derivative_order as i64))
        .ok_or(ThresholdError::Overflow)?;
    if decay <= Rational::from_integer(0) {
        return Err(ThresholdError::NotDecaying(decay));
    }
    Rational::from_integer(spec.n() as i64)
        .checked_add(&weight_exponent)
        .and_then(|num| num.checked_div(&decay))
        .ok_or(ThresholdError::Overflow)
}

/// `q* = p*/(p* - 1)`, or [`QStar::Infinite`] when `p* <= 1`.
pub fn conjugate_range(p_star: Rational) -> QStar {
    let one = Rational::from_integer(1);
    if p_star <= one {
        QStar::Infinite
    } else {
        QStar::Finite(p_star / (p_star - one))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    #[serde(with = "rational::as_string")]
    pub p_star: Rational,
    pub q_star: QStar,
    #[serde(with = "rational::as_string")]
    pub w: Rational,
    pub j: u32,
    /// `2` lies in the conjugate range.
    pub hilbert_viable: bool,
    pub p_range: String,
    pub q_range: String,
    /// Both endpoints of both ranges are excluded.
    pub endpoints_open: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl ThresholdReport {
    fn from_thresholds(p_star: Rational, q_star: QStar, w: Rational, j: u32) -> Self {
        Self {
            p_star,
            q_star,
            w,
            j,
            hilbert_viable: q_star.admits(Rational::from_integer(2)),
            p_range: format!("({p_star},inf)"),
            q_range: format!("(1,{q_star})"),
            endpoints_open: true,
            note: None,
        }
    }

    pub fn p_star_f64(&self) -> f64 {
        rational::to_f64(&self.p_star)
    }
}

/// Exterior-domain thresholds for `d^j k` under `|x|^w dx`.
pub fn threshold_report(
    spec: &KernelSpec,
    weight_exponent: Rational,
    derivative_order: u32,
) -> Result<ThresholdReport, ThresholdError> {
    let p_star = critical_exponent(spec, weight_exponent, End::AtInfinity, derivative_order)?;
    Ok(ThresholdReport::from_thresholds(
        p_star,
        conjugate_range(p_star),
        weight_exponent,
        derivative_order,
    ))
}

/// The `n = l = 3` iterated Dirac case, where the order equals the dimension
/// and the general kernel is undefined. It carries its own stated range
/// `p* = 3`, `q in (1, 3/2)`.
pub fn equal_order_report() -> ThresholdReport {
    let p_star = Rational::from_integer(3);
    let mut report = ThresholdReport::from_thresholds(
        p_star,
        conjugate_range(p_star),
        Rational::from_integer(0),
        0,
    );
    report.note = Some("dirac_iterate n=3, l=3: order equals dimension, fixed range".into());
    report
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Viability {
    pub viable: bool,
    #[serde(with = "rational::as_string")]
    pub target_q: Rational,
    pub report: ThresholdReport,
}

fn viability_of(report: ThresholdReport, target_q: Rational) -> Viability {
    Viability {
        viable: report.q_star.admits(target_q),
        target_q,
        report,
    }
}

/// Whether `W^{target_q, k}` is a workable density space for `spec`.
pub fn viability(
    spec: &KernelSpec,
    weight_exponent: Rational,
    target_q: Rational,
) -> Result<Viability, ThresholdError> {
    Ok(viability_of(threshold_report(spec, weight_exponent, 0)?, target_q))
}

pub fn equal_order_viability(target_q: Rational) -> Viability {
    viability_of(equal_order_report(), target_q)
}

/// Finite above, divergent below: a numeric check on a computed `p*`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdWitness {
    #[serde(with = "rational::as_string")]
    pub p_star: Rational,
    pub delta: f64,
    pub p_above: f64,
    #[serde(with = "norm::extended")]
    pub norm_above: f64,
    pub finite_above: bool,
    pub p_below: f64,
    pub divergent_below: bool,
    pub divergence_end: DivergenceEnd,
    pub doublings: usize,
    /// Shell ratio at the final doubling.
    pub shell_ratio: f64,
    pub passed: bool,
}

/// Closed-form norm at `p* + delta` and a radius-doubling divergence test on
/// the sampled kernel at `p* - delta`, over an exterior domain.
pub fn verify_threshold_numerically(
    spec: &KernelSpec,
    weight_exponent: Rational,
    delta: f64,
    domain: &RadialDomain,
) -> Result<ThresholdWitness, ThresholdError> {
    if domain.kind() != DomainKind::Exterior {
        return Err(ThresholdError::NotExterior(domain.kind()));
    }
    if domain.n() != spec.n() {
        return Err(DomainError::DimensionMismatch {
            domain: domain.n(),
            kernel: spec.n(),
        }
        .into());
    }
    let p_star = critical_exponent(spec, weight_exponent, End::AtInfinity, 0)?;
    let p_star_f = rational::to_f64(&p_star);
    if !(delta > 0.0 && delta < 0.5 * p_star_f) {
        return Err(ThresholdError::InvalidDelta {
            delta,
            limit: 0.5 * p_star_f,
        });
    }
    let w = rational::to_f64(&weight_exponent);
    let measure = WeightedMeasure::new(w)?;

    let p_above = p_star_f + delta;
    let above = norm::kernel_lp_norm(spec, p_above, &measure, domain)?;

    let p_below = p_star_f - delta;
    let n = spec.n();
    let sphere = domain.angular_measure();
    let radial_power = w + n as f64 - 1.0;
    let integrand = |r: f64| {
        let mut x = vec![0.0; n];
        x[0] = r;
        match spec.evaluate(&x) {
            Ok(k) => sphere * k.norm().powf(p_below) * r.powf(radial_power),
            Err(_) => f64::NAN,
        }
    };
    let tail = quadrature::tail_doubling_test(integrand, domain.r_in(), MAX_DOUBLINGS);
    let divergent_below = tail.decided && tail.diverges;

    Ok(ThresholdWitness {
        p_star,
        delta,
        p_above,
        norm_above: above.value,
        finite_above: above.is_finite(),
        p_below,
        divergent_below,
        divergence_end: if divergent_below {
            DivergenceEnd::AtInfinity
        } else {
            DivergenceEnd::None
        },
        doublings: tail.doublings,
        shell_ratio: tail.ratio,
        passed: above.is_finite() && divergent_below,
    })
}

/// A kernel configuration with its independently stated threshold pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCase {
    pub label: String,
    pub spec: KernelSpec,
    pub weight_exponent: Rational,
    pub expected_p_star: Rational,
    pub expected_q_star: QStar,
}

fn r(num: i64, den: i64) -> Rational {
    Rational::new(num, den)
}

/// Every stated family instance: Cauchy for `n = 2..8`, the unweighted
/// Laplace iterate for `n = 1..8`, the weighted Laplace iterate with
/// `w = 2 + eps`, `eps in {1, 2, 4}`, `n in {2, 3}`, and the iterated Dirac
/// kernels for `1 <= l < n <= 8`. Expected values are the family-specific
/// closed forms, not the unified `(n + w)/(h + j)`.
pub fn family_sweep() -> Vec<SweepCase> {
    let mut cases = Vec::new();
    for n in 2..=8i64 {
        cases.push(SweepCase {
            label: format!("cauchy n={n}"),
            spec: KernelSpec::cauchy(n as usize).expect("valid dimension"),
            weight_exponent: r(0, 1),
            expected_p_star: r(n, n - 1),
            expected_q_star: QStar::Finite(r(n, 1)),
        });
    }
    for n in 1..=8i64 {
        cases.push(SweepCase {
            label: format!("laplace_iterate n={n}"),
            spec: KernelSpec::laplace_iterate(n as usize).expect("valid dimension"),
            weight_exponent: r(0, 1),
            expected_p_star: r(n, n + 2),
            expected_q_star: QStar::Infinite,
        });
    }
    for eps in [1i64, 2, 4] {
        for n in [2i64, 3] {
            cases.push(SweepCase {
                label: format!("laplace_iterate n={n} w=2+{eps}"),
                spec: KernelSpec::laplace_iterate(n as usize).expect("valid dimension"),
                weight_exponent: r(2 + eps, 1),
                expected_p_star: r(1, 1) + r(eps, n + 2),
                expected_q_star: QStar::Finite(r(1, 1) + r(n + 2, eps)),
            });
        }
    }
    for n in 2..=8i64 {
        for l in 1..n {
            let (p, q) = if l % 2 == 1 {
                (r(n, n - l), r(n, l))
            } else {
                (r(n, n + 1 - l), r(n, l - 1))
            };
            cases.push(SweepCase {
                label: format!("dirac_iterate n={n} l={l}"),
                spec: KernelSpec::dirac_iterate(n as usize, l as usize).expect("valid order"),
                weight_exponent: r(0, 1),
                expected_p_star: p,
                expected_q_star: QStar::Finite(q),
            });
        }
    }
    cases
}

/// Outcome of one sweep case: exact identities plus the numeric witness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub label: String,
    pub family: KernelFamily,
    pub exact_p_star: bool,
    pub exact_q_star: bool,
    pub witness: ThresholdWitness,
    pub passed: bool,
}

/// Runs [`family_sweep`] with witness offset `delta` on `EXTERIOR(r_in)`.
pub fn run_sweep(delta: f64, r_in: f64) -> Result<Vec<SweepOutcome>, ThresholdError> {
    family_sweep()
        .into_iter()
        .map(|case| {
            let report = threshold_report(&case.spec, case.weight_exponent, 0)?;
            let domain = RadialDomain::exterior(case.spec.n(), r_in)?;
            let witness =
                verify_threshold_numerically(&case.spec, case.weight_exponent, delta, &domain)?;
            let exact_p_star = report.p_star == case.expected_p_star;
            let exact_q_star = report.q_star == case.expected_q_star;
            Ok(SweepOutcome {
                passed: exact_p_star && exact_q_star && witness.passed,
                label: case.label,
                family: case.spec.family(),
                exact_p_star,
                exact_q_star,
                witness,
            })
        })
        .collect()
}
