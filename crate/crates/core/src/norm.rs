//! Weighted `L^p` and Sobolev norms.
//!
//! Kernel norms are exact: the radial reduction turns `int |k|^p d mu` into a
//! power integral evaluated in closed form. Grid norms are trapezoid sums of
//! pointwise multivector norms against `|x|^w`, with finite-difference
//! derivatives up to order two. All grid reductions use a pairwise sum over
//! node order, so results do not depend on the thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clifford::ProductTable;
use crate::domain::{self, DomainError, RadialDomain, WeightedMeasure};
use crate::grid::{GridError, GridFunction};
use crate::kernel::KernelSpec;
use crate::quadrature::{self, DivergenceEnd, QuadratureError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NormError {
    #[error("exponent must satisfy p >= 1 for grid norms, got {0}")]
    InvalidExponent(f64),
    #[error("derivative order {0} unsupported (k <= 2)")]
    UnsupportedOrder(usize),
    #[error("exponents {p} and {q} are not conjugate (1/p + 1/q = 1)")]
    NotConjugate { p: f64, q: f64 },
    #[error("invalid scan: {0}")]
    InvalidScan(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum NormMethod {
    ClosedForm,
    Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormResult {
    pub p: f64,
    pub k: usize,
    pub weight_exponent: f64,
    /// `+inf` when the defining integral diverges.
    #[serde(with = "extended")]
    pub value: f64,
    pub method: NormMethod,
    pub divergence_end: DivergenceEnd,
}

impl NormResult {
    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
    }
}

/// Extended reals in JSON: finite values as numbers, `+inf` as `"inf"`.
pub mod extended {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else if *v < 0.0 {
            s.serialize_str("-inf")
        } else {
            s.serialize_str("nan")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("bad extended real {other:?}"))),
            },
        }
    }
}

/// Sum in a fixed binary-tree order.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        len if len <= 8 => values.iter().sum(),
        len => {
            let (a, b) = values.split_at(len / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

/// Closed-form `(int_domain |k|^p d mu)^{1/p}`; `+inf` when divergent.
///
/// Exponents in `(0, 1)` are accepted and give the quasi-norm, which is
/// what threshold verification needs below `p = 1`.
pub fn kernel_lp_norm(
    spec: &KernelSpec,
    p: f64,
    measure: &WeightedMeasure,
    domain: &RadialDomain,
) -> Result<NormResult, NormError> {
    let form = domain::radial_reduction(spec, p, measure, domain)?;
    let integral = quadrature::power_integral(form.exponent, domain.r_in(), domain.upper_radius())?;
    let value = match integral.value {
        Some(v) => (form.constant * v).powf(1.0 / p),
        None => f64::INFINITY,
    };
    Ok(NormResult {
        p,
        k: 0,
        weight_exponent: measure.weight_exponent(),
        value,
        method: NormMethod::ClosedForm,
        divergence_end: integral.divergence_end,
    })
}

fn check_exponent(p: f64) -> Result<(), NormError> {
    if p >= 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(NormError::InvalidExponent(p))
    }
}

/// Quadrature weights `trapezoid * |x|^w` per node.
fn node_weights(f: &GridFunction, measure: &WeightedMeasure) -> Vec<f64> {
    (0..f.node_count())
        .into_par_iter()
        .map(|idx| {
            let x = f.position(idx);
            let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            f.trapezoid_weight(idx) * measure.density(r)
        })
        .collect()
}

/// `sum_nodes weight * |f|^p`.
fn weighted_power_sum(f: &GridFunction, p: f64, weights: &[f64]) -> f64 {
    let terms: Vec<f64> = f
        .pointwise_norms()
        .into_par_iter()
        .zip(weights.par_iter())
        .map(|(v, w)| w * v.powf(p))
        .collect();
    pairwise_sum(&terms)
}

/// Every partial derivative `d^beta f` with `1 <= |beta| <= k`, each multi-index once.
fn derivatives(f: &GridFunction, k: usize) -> Result<Vec<GridFunction>, NormError> {
    let mut out = Vec::new();
    if k == 0 {
        return Ok(out);
    }
    let first: Vec<GridFunction> = (0..f.n()).map(|a| f.partial(a)).collect();
    if k >= 2 {
        for i in 0..f.n() {
            out.push(f.second_partial(i)?);
            for j in i + 1..f.n() {
                out.push(first[i].partial(j));
            }
        }
    }
    out.splice(0..0, first);
    Ok(out)
}

/// Discrete `W^{p,k}` norm `(sum_{|beta| <= k} ||d^beta f||_p^p)^{1/p}`.
pub fn grid_norm(
    f: &GridFunction,
    p: f64,
    k: usize,
    measure: &WeightedMeasure,
) -> Result<NormResult, NormError> {
    check_exponent(p)?;
    if k > 2 {
        return Err(NormError::UnsupportedOrder(k));
    }
    let weights = node_weights(f, measure);
    let mut total = weighted_power_sum(f, p, &weights);
    for d in derivatives(f, k)? {
        total += weighted_power_sum(&d, p, &weights);
    }
    Ok(NormResult {
        p,
        k,
        weight_exponent: measure.weight_exponent(),
        value: total.powf(1.0 / p),
        method: NormMethod::Grid,
        divergence_end: DivergenceEnd::None,
    })
}

pub fn check_conjugate(p: f64, q: f64) -> Result<(), NormError> {
    if p > 1.0 && q > 1.0 && (1.0 / p + 1.0 / q - 1.0).abs() <= 1e-12 {
        Ok(())
    } else {
        Err(NormError::NotConjugate { p, q })
    }
}

/// Conjugate exponent `p / (p - 1)`.
pub fn conjugate_exponent(p: f64) -> f64 {
    p / (p - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderCheck {
    /// `int |g f| d mu` with the pointwise geometric product.
    pub lhs: f64,
    /// `||g||_p ||f||_q`.
    pub rhs: f64,
    pub holds: bool,
}

/// Checks `||g f||_1 <= ||g||_p ||f||_q` on a shared lattice.
pub fn holder_check(
    g: &GridFunction,
    f: &GridFunction,
    p: f64,
    q: f64,
    measure: &WeightedMeasure,
) -> Result<HolderCheck, NormError> {
    check_conjugate(p, q)?;
    if !g.same_lattice(f) {
        return Err(GridError::LatticeMismatch.into());
    }
    let weights = node_weights(g, measure);
    let table = ProductTable::new(g.n());
    let b = g.blades();
    let terms: Vec<f64> = (0..g.node_count())
        .into_par_iter()
        .map(|idx| {
            let mut prod = vec![0.0; b];
            table.mul_add_into(g.value(idx), f.value(idx), 1.0, &mut prod);
            weights[idx] * prod.iter().map(|c| c * c).sum::<f64>().sqrt()
        })
        .collect();
    let lhs = pairwise_sum(&terms);
    let g_norm = weighted_power_sum(g, p, &weights).powf(1.0 / p);
    let f_norm = weighted_power_sum(f, q, &weights).powf(1.0 / q);
    let rhs = g_norm * f_norm;
    Ok(HolderCheck {
        lhs,
        rhs,
        holds: lhs <= rhs * (1.0 + 1e-9),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub q: f64,
    pub p: f64,
    #[serde(with = "extended")]
    pub kernel_norm: f64,
    pub f_norm: f64,
    #[serde(with = "extended")]
    pub product: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitScan {
    pub q_star: f64,
    pub rows: Vec<ScanRow>,
    /// Product in the final row.
    #[serde(with = "extended")]
    pub limit: f64,
    /// `||f||_{q*}`, the endpoint the `f` factor approaches.
    pub f_norm_at_q_star: f64,
    /// Kernel norm at the endpoint exponent `p* = q*/(q* - 1)`.
    #[serde(with = "extended")]
    pub kernel_norm_at_endpoint: f64,
}

impl LimitScan {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("q,p,kernel_norm,f_norm,product\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                row.q, row.p, row.kernel_norm, row.f_norm, row.product
            ));
        }
        out
    }
}

/// Exponents `q_i = 1 + (q* - 1)(1 - 2^{-i})`, `i = 1..=steps`.
pub fn scan_exponents(q_star: f64, steps: usize) -> Vec<f64> {
    (1..=steps)
        .map(|i| 1.0 + (q_star - 1.0) * (1.0 - 0.5f64.powi(i as i32)))
        .collect()
}

/// Tabulates `||k||_{p,w} ||f||_{q,w}` as `q` rises towards `q*`.
///
/// The kernel factor is the closed-form norm over `domain`; the `f` factor is
/// the weighted grid norm. The `f` factor converges to `||f||_{q*}`; on an
/// exterior domain the kernel factor grows without bound at the endpoint,
/// which `kernel_norm_at_endpoint` records.
pub fn norm_limit_scan(
    spec: &KernelSpec,
    f: &GridFunction,
    measure: &WeightedMeasure,
    domain: &RadialDomain,
    q_star: f64,
    steps: usize,
) -> Result<LimitScan, NormError> {
    if !(q_star > 1.0 && q_star.is_finite()) {
        return Err(NormError::InvalidScan(format!("q* must be finite and > 1, got {q_star}")));
    }
    if steps == 0 {
        return Err(NormError::InvalidScan("at least one step required".into()));
    }
    let mut rows = Vec::with_capacity(steps);
    for q in scan_exponents(q_star, steps) {
        let p = conjugate_exponent(q);
        check_conjugate(p, q)?;
        let kernel_norm = kernel_lp_norm(spec, p, measure, domain)?.value;
        let f_norm = grid_norm(f, q, 0, measure)?.value;
        let product = if f_norm == 0.0 { 0.0 } else { kernel_norm * f_norm };
        rows.push(ScanRow {
            q,
            p,
            kernel_norm,
            f_norm,
            product,
        });
    }
    let limit = rows.last().map(|r| r.product).unwrap_or(0.0);
    let f_norm_at_q_star = grid_norm(f, q_star, 0, measure)?.value;
    let kernel_norm_at_endpoint = kernel_lp_norm(spec, conjugate_exponent(q_star), measure, domain)?.value;
    Ok(LimitScan {
        q_star,
        rows,
        limit,
        f_norm_at_q_star,
        kernel_norm_at_endpoint,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn unit_line(nodes: usize, f: impl Fn(f64) -> f64) -> GridFunction {
        GridFunction::from_fn(1, vec![0.0], vec![1.0], vec![nodes], |x, out| out[0] = f(x[0])).unwrap()
    }

    #[test]
    fn cauchy_plane_exterior_needs_p_above_two() {
        let spec = KernelSpec::cauchy(2).unwrap();
        let ext = RadialDomain::exterior(2, 0.5).unwrap();
        let r = kernel_lp_norm(&spec, 2.0, &WeightedMeasure::lebesgue(), &ext).unwrap();
        assert_eq!(r.value, f64::INFINITY);
        assert_eq!(r.divergence_end, DivergenceEnd::AtInfinity);
    }

    #[test]
    fn cauchy_plane_cubic_norm() {
        let spec = KernelSpec::cauchy(2).unwrap();
        let ext = RadialDomain::exterior(2, 1.0).unwrap();
        let r = kernel_lp_norm(&spec, 3.0, &WeightedMeasure::lebesgue(), &ext).unwrap();
        // c = (2 pi)^{-2}, int_1^inf r^{-2} dr = 1
        let expected = (2.0 * PI).powi(-2).powf(1.0 / 3.0);
        assert!((r.value - expected).abs() < 1e-15);
        assert_eq!(r.method, NormMethod::ClosedForm);
    }

    #[test]
    fn weighted_laplace_threshold() {
        let spec = KernelSpec::laplace_iterate(2).unwrap();
        let ext = RadialDomain::exterior(2, 0.5).unwrap();
        for eps in [0.5, 1.0, 2.0] {
            let m = WeightedMeasure::new(2.0 + eps).unwrap();
            assert!(!kernel_lp_norm(&spec, 1.0, &m, &ext).unwrap().is_finite());
        }
        let m = WeightedMeasure::new(4.0).unwrap();
        assert!(kernel_lp_norm(&spec, 2.0, &m, &ext).unwrap().is_finite());
    }

    #[test]
    fn zero_function_has_zero_norm() {
        let f = GridFunction::zeros(2, vec![-1.0, -1.0], vec![1.0, 1.0], vec![5, 5]).unwrap();
        for k in 0..=2 {
            for w in [0.0, 2.0] {
                let r = grid_norm(&f, 2.5, k, &WeightedMeasure::new(w).unwrap()).unwrap();
                assert_eq!(r.value, 0.0);
            }
        }
    }

    #[test]
    fn constant_on_unit_interval() {
        let f = unit_line(7, |_| 1.0);
        let r = grid_norm(&f, 2.0, 0, &WeightedMeasure::lebesgue()).unwrap();
        assert!((r.value - 1.0).abs() < 1e-15);
    }

    #[test]
    fn identity_sobolev_norm_converges() {
        let target = (1.0f64 / 3.0 + 1.0).sqrt();
        let mut last = f64::INFINITY;
        for nodes in [5, 17, 65, 257] {
            let f = unit_line(nodes, |x| x);
            let r = grid_norm(&f, 2.0, 1, &WeightedMeasure::lebesgue()).unwrap();
            let err = (r.value - target).abs();
            assert!(err < last);
            last = err;
        }
        assert!(last < 1e-5);
    }

    #[test]
    fn second_order_norm_counts_each_multi_index_once() {
        // f = x y on [0,1]^2: f_x = y, f_y = x, f_xy = 1, f_xx = f_yy = 0
        let f = GridFunction::from_fn(2, vec![0.0; 2], vec![1.0; 2], vec![41, 41], |x, out| out[0] = x[0] * x[1])
            .unwrap();
        let r = grid_norm(&f, 2.0, 2, &WeightedMeasure::lebesgue()).unwrap();
        let exact = (1.0f64 / 9.0 + 1.0 / 3.0 + 1.0 / 3.0 + 1.0).sqrt();
        assert!((r.value - exact).abs() < 1e-3);
    }

    #[test]
    fn order_three_rejected() {
        let f = unit_line(5, |x| x);
        assert_eq!(
            grid_norm(&f, 2.0, 3, &WeightedMeasure::lebesgue()).unwrap_err(),
            NormError::UnsupportedOrder(3)
        );
        assert!(grid_norm(&f, 0.5, 0, &WeightedMeasure::lebesgue()).is_err());
    }

    #[test]
    fn holder_rejects_bad_inputs() {
        let f = unit_line(5, |x| x);
        let g = unit_line(6, |x| x);
        let m = WeightedMeasure::lebesgue();
        assert!(matches!(holder_check(&f, &f, 2.0, 3.0, &m), Err(NormError::NotConjugate { .. })));
        assert!(matches!(holder_check(&f, &g, 2.0, 2.0, &m), Err(NormError::Grid(GridError::LatticeMismatch))));
    }

    #[test]
    fn cauchy_schwarz_on_bump() {
        let bump = GridFunction::from_fn(2, vec![-1.0; 2], vec![1.0; 2], vec![21, 21], |x, out| {
            let r2 = x[0] * x[0] + x[1] * x[1];
            out[0] = if r2 < 1.0 { (-1.0 / (1.0 - r2)).exp() } else { 0.0 };
        })
        .unwrap();
        let m = WeightedMeasure::lebesgue();
        let c = holder_check(&bump, &bump, 2.0, 2.0, &m).unwrap();
        assert!(c.holds);
        // equality case of Cauchy-Schwarz
        assert!((c.lhs - c.rhs).abs() < 1e-12 * c.rhs);
        let scaled = holder_check(&bump, &bump.scale(1000.0), 2.0, 2.0, &m).unwrap();
        assert!(scaled.holds);
        assert!((scaled.lhs - 1000.0 * c.lhs).abs() < 1e-9 * scaled.lhs);
    }

    #[test]
    fn scan_of_zero_function() {
        let spec = KernelSpec::cauchy(2).unwrap();
        let f = GridFunction::zeros(2, vec![-1.0; 2], vec![1.0; 2], vec![5, 5]).unwrap();
        let ext = RadialDomain::exterior(2, 0.5).unwrap();
        let scan = norm_limit_scan(&spec, &f, &WeightedMeasure::lebesgue(), &ext, 2.0, 6).unwrap();
        assert!(scan.rows.iter().all(|r| r.product == 0.0));
        assert!(scan.rows.iter().all(|r| (1.0 / r.p + 1.0 / r.q - 1.0).abs() < 1e-12));
    }

    #[test]
    fn pairwise_sum_is_exact_on_integers() {
        let v: Vec<f64> = (1..=1000).map(f64::from).collect();
        assert_eq!(pairwise_sum(&v), 500500.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }

    #[test]
    fn extended_reals_serialize() {
        let r = NormResult {
            p: 2.0,
            k: 0,
            weight_exponent: 0.0,
            value: f64::INFINITY,
            method: NormMethod::ClosedForm,
            divergence_end: DivergenceEnd::AtInfinity,
        };
        let text = serde_json::to_string(&r).unwrap();
        assert!(text.contains(r#""value":"inf""#));
        let back: NormResult = serde_json::from_str(&text).unwrap();
        assert_eq!(back, r);
    }
}
