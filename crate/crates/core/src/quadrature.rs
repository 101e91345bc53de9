//! Radial power integrals, divergence detection and principal-value limits.
//!
//! `power_integral` is the closed-form workhorse behind every kernel norm.
//! The numeric side has three independent tools: Gauss-Legendre shells with
//! radius doubling for tails at infinity, Richardson extrapolation for limits
//! as a puncture radius shrinks to zero, and a seeded polar Monte Carlo
//! integrator that evaluates kernels pointwise in `R^n`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{self, DomainError, RadialDomain, WeightedMeasure};
use crate::kernel::{KernelError, KernelSpec};

/// Seed used when none is supplied.
pub const DEFAULT_SEED: u64 = 0x5EED;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadratureError {
    #[error("invalid bounds: need 0 < r0 < r1, got r0 = {r0}, r1 = {r1}")]
    InvalidBounds { r0: f64, r1: f64 },
    #[error("schedule must hold at least 4 strictly decreasing positive radii")]
    InvalidSchedule,
    #[error("unbounded domain requires a truncation radius for numeric integration")]
    UnboundedDomain,
    #[error("sample budget must be positive")]
    EmptyBudget,
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DivergenceEnd {
    AtZero,
    AtInfinity,
    None,
}

/// Verdict on an improper integral.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub converges: bool,
    /// Present iff `converges`.
    pub value: Option<f64>,
    pub divergence_end: DivergenceEnd,
    pub closed_form_used: bool,
    pub numeric_estimate: Option<f64>,
    /// Radial exponent `a` of the integrand `r^a`, when known.
    pub tail_exponent: Option<f64>,
}

impl ConvergenceReport {
    fn finite(value: f64, closed_form: bool, exponent: Option<f64>) -> Self {
        Self {
            converges: true,
            value: Some(value),
            divergence_end: DivergenceEnd::None,
            closed_form_used: closed_form,
            numeric_estimate: (!closed_form).then_some(value),
            tail_exponent: exponent,
        }
    }

    fn divergent(end: DivergenceEnd, closed_form: bool, exponent: Option<f64>) -> Self {
        Self {
            converges: false,
            value: None,
            divergence_end: end,
            closed_form_used: closed_form,
            numeric_estimate: None,
            tail_exponent: exponent,
        }
    }

    /// The value, or `+inf` for a divergent integral.
    pub fn value_or_infinity(&self) -> f64 {
        self.value.unwrap_or(f64::INFINITY)
    }
}

/// `int_{r0}^{r1} r^a dr` in closed form; `r1` may be `+inf`.
pub fn power_integral(a: f64, r0: f64, r1: f64) -> Result<ConvergenceReport, QuadratureError> {
    if !(r0 > 0.0 && r0.is_finite() && r1 > r0) {
        return Err(QuadratureError::InvalidBounds { r0, r1 });
    }
    if r1.is_infinite() {
        if a < -1.0 {
            let e = a + 1.0;
            return Ok(ConvergenceReport::finite(-r0.powf(e) / e, true, Some(a)));
        }
        return Ok(ConvergenceReport::divergent(DivergenceEnd::AtInfinity, true, Some(a)));
    }
    let value = if a == -1.0 {
        (r1 / r0).ln()
    } else {
        let e = a + 1.0;
        (r1.powf(e) - r0.powf(e)) / e
    };
    Ok(ConvergenceReport::finite(value, true, Some(a)))
}

/// Whether `int_0^{r1} r^a dr` is finite at the lower limit.
pub fn converges_at_zero(a: f64) -> bool {
    a > -1.0
}

/// `int_0^{r1} r^a dr`, finite iff `a > -1`.
pub fn power_integral_from_zero(a: f64, r1: f64) -> Result<ConvergenceReport, QuadratureError> {
    if !(r1 > 0.0 && r1.is_finite()) {
        return Err(QuadratureError::InvalidBounds { r0: 0.0, r1 });
    }
    if converges_at_zero(a) {
        let e = a + 1.0;
        Ok(ConvergenceReport::finite(r1.powf(e) / e, true, Some(a)))
    } else {
        Ok(ConvergenceReport::divergent(DivergenceEnd::AtZero, true, Some(a)))
    }
}

/// `int_{eps < |x| < r_out} |k|^p d mu`, the truncated integral whose
/// `eps -> 0` limit is the principal value. Uses the punctured interval for
/// `n = 1` and the punctured ball otherwise.
pub fn punctured_integral(
    spec: &KernelSpec,
    p: f64,
    measure: &WeightedMeasure,
    eps: f64,
    r_out: f64,
) -> Result<f64, QuadratureError> {
    let domain = if spec.n() == 1 {
        RadialDomain::interval(eps, r_out)?
    } else {
        RadialDomain::punctured_ball(spec.n(), eps, r_out)?
    };
    let form = domain::radial_reduction(spec, p, measure, &domain)?;
    let integral = power_integral(form.exponent, eps, r_out)?;
    Ok(form.constant * integral.value_or_infinity())
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1);
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let m = order.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (order as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=order {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if order == 1 {
                p1 = x;
                p0 = 1.0;
            }
            dp = order as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[order - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[order - 1 - i] = w;
    }
    (nodes, weights)
}

/// Composite Gauss-Legendre integral of `f` over `[lo, hi]` in the variable
/// `s = ln r`, which keeps power laws smooth on wide shells.
pub fn integrate_log_shell<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, panels: usize) -> f64 {
    let (nodes, weights) = gauss_legendre(16);
    let (s0, s1) = (lo.ln(), hi.ln());
    let width = (s1 - s0) / panels as f64;
    let mut total = 0.0;
    for k in 0..panels {
        let a = s0 + k as f64 * width;
        let mid = a + 0.5 * width;
        let half = 0.5 * width;
        let mut panel = 0.0;
        for (x, w) in nodes.iter().zip(&weights) {
            let r = (mid + half * x).exp();
            panel += w * f(r) * r;
        }
        total += panel * half;
    }
    total
}

/// Result of integrating over successively doubled radii `[r0, r0 2^k]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailVerdict {
    /// True once a verdict was reached within the doubling budget.
    pub decided: bool,
    pub diverges: bool,
    pub doublings: usize,
    /// Integral up to the last radius reached.
    pub partial: f64,
    /// Extrapolated total when convergent.
    pub estimate: Option<f64>,
    /// Ratio of the last two shell contributions.
    pub ratio: f64,
}

/// Radius-doubling tail test for `int_{r0}^inf f(r) dr` with `f >= 0`.
///
/// Each shell `[R, 2R]` is integrated numerically. Three consecutive shell
/// ratios `>= 1` flag divergence at infinity; three ratios below one that have
/// settled flag convergence and the tail is summed geometrically.
pub fn tail_doubling_test<F: Fn(f64) -> f64>(f: F, r0: f64, max_doublings: usize) -> TailVerdict {
    const WINDOW: usize = 3;
    let mut shells: Vec<f64> = Vec::new();
    let mut ratios: Vec<f64> = Vec::new();
    let mut partial = 0.0;
    let mut radius = r0;
    for k in 1..=max_doublings {
        let shell = integrate_log_shell(&f, radius, 2.0 * radius, 4);
        radius *= 2.0;
        partial += shell;
        if let Some(&prev) = shells.last() {
            ratios.push(if prev > 0.0 { shell / prev } else { f64::INFINITY });
        }
        shells.push(shell);
        if !partial.is_finite() {
            return TailVerdict {
                decided: true,
                diverges: true,
                doublings: k,
                partial,
                estimate: None,
                ratio: f64::INFINITY,
            };
        }
        if ratios.len() < WINDOW {
            continue;
        }
        let recent = &ratios[ratios.len() - WINDOW..];
        let last = *recent.last().unwrap();
        if recent.iter().all(|&q| q >= 1.0 - 1e-9) {
            return TailVerdict {
                decided: true,
                diverges: true,
                doublings: k,
                partial,
                estimate: None,
                ratio: last,
            };
        }
        let settled = recent.windows(2).all(|w| (w[1] - w[0]).abs() <= 1e-6 * w[1].abs());
        if recent.iter().all(|&q| q < 1.0) && settled {
            let tail = shell * last / (1.0 - last);
            return TailVerdict {
                decided: true,
                diverges: false,
                doublings: k,
                partial,
                estimate: Some(partial + tail),
                ratio: last,
            };
        }
    }
    TailVerdict {
        decided: false,
        diverges: false,
        doublings: max_doublings,
        partial,
        estimate: None,
        ratio: ratios.last().copied().unwrap_or(f64::NAN),
    }
}

/// Tuning for [`cpv_limit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpvOptions {
    /// Values beyond this magnitude count as unbounded.
    pub cap: f64,
    /// Candidate convergence rates `gamma` for the model `L + c eps^gamma`.
    pub rates: Vec<f64>,
    /// Increments contracting slower than `eps^min_rate` count as divergent.
    pub min_rate: f64,
    /// Largest accepted relative disagreement between the last two
    /// extrapolants before the verdict is declared inconclusive.
    pub tolerance: f64,
}

impl Default for CpvOptions {
    fn default() -> Self {
        Self {
            cap: 1e12,
            rates: (1..=19).map(|k| k as f64 / 10.0).collect(),
            min_rate: 0.05,
            tolerance: 1e-4,
        }
    }
}

/// Principal value estimate with the evidence behind it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CpvResult {
    pub report: ConvergenceReport,
    /// Selected rate `gamma`, when the limit converged.
    pub rate: Option<f64>,
    /// Disagreement between the last two extrapolants.
    pub residual: Option<f64>,
    /// Least-squares slope of `ln |v_{i+1} - v_i|` against `ln eps_i`.
    pub increment_slope: Option<f64>,
    /// `(eps, value)` pairs in schedule order.
    pub samples: Vec<[f64; 2]>,
}

#[derive(Debug, Error)]
pub enum CpvError<E> {
    #[error("schedule must hold at least 4 strictly decreasing positive radii")]
    InvalidSchedule,
    #[error("evaluator failed: {0}")]
    Evaluator(E),
    #[error("no convergence verdict: extrapolants disagree by {}", .0.residual.unwrap_or(f64::NAN))]
    Inconclusive(Box<CpvResult>),
}

/// Geometric schedule `first, first*ratio, ...` with `len` entries.
pub fn geometric_schedule(first: f64, ratio: f64, len: usize) -> Vec<f64> {
    (0..len).map(|k| first * ratio.powi(k as i32)).collect()
}

/// Neville extrapolation of `(t_i, v_i)` to `t = 0` using every point.
/// Returns the estimates built from the last `k + 1` points, `k = 0..m`.
fn neville_to_zero(t: &[f64], v: &[f64]) -> Vec<f64> {
    let m = t.len();
    let mut table = v.to_vec();
    let mut diagonal = vec![v[m - 1]];
    // after pass k, table[i] holds the interpolant through points i..=i+k
    for k in 1..m {
        for i in 0..m - k {
            let j = i + k;
            table[i] = (t[i] * table[i + 1] - t[j] * table[i]) / (t[i] - t[j]);
        }
        diagonal.push(table[m - 1 - k]);
    }
    diagonal
}

fn increment_slope(eps: &[f64], values: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = values
        .windows(2)
        .zip(eps)
        .filter_map(|(w, &e)| {
            let d = (w[1] - w[0]).abs();
            (d > 0.0).then(|| (e.ln(), d.ln()))
        })
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

/// Estimates `lim_{eps -> 0} evaluator(eps)` along a decreasing schedule.
pub fn cpv_limit<F, E>(
    mut evaluator: F,
    schedule: &[f64],
    options: &CpvOptions,
) -> Result<CpvResult, CpvError<E>>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    let valid = schedule.len() >= 4
        && schedule.iter().all(|&e| e > 0.0 && e.is_finite())
        && schedule.windows(2).all(|w| w[1] < w[0]);
    if !valid {
        return Err(CpvError::InvalidSchedule);
    }
    let mut values = Vec::with_capacity(schedule.len());
    for &eps in schedule {
        values.push(evaluator(eps).map_err(CpvError::Evaluator)?);
    }
    let samples: Vec<[f64; 2]> = schedule.iter().zip(&values).map(|(&e, &v)| [e, v]).collect();
    let divergent = |slope: Option<f64>| CpvResult {
        report: ConvergenceReport::divergent(DivergenceEnd::AtZero, false, None),
        rate: None,
        residual: None,
        increment_slope: slope,
        samples: samples.clone(),
    };

    if values.iter().any(|v| !v.is_finite() || v.abs() > options.cap) {
        return Ok(divergent(None));
    }
    let increments: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let last = *values.last().unwrap();
    if increments.iter().all(|&d| d == 0.0) {
        return Ok(CpvResult {
            report: ConvergenceReport::finite(last, false, None),
            rate: None,
            residual: Some(0.0),
            increment_slope: None,
            samples,
        });
    }
    let slope = increment_slope(schedule, &values);
    let tail = &increments[increments.len() - 3..];
    let non_contracting = tail.windows(2).all(|w| w[1] >= w[0]) && tail[2] > 0.0;
    if non_contracting || slope.is_some_and(|s| s < options.min_rate) {
        return Ok(divergent(slope));
    }

    let mut best: Option<(f64, f64, f64)> = None;
    for &gamma in &options.rates {
        let t: Vec<f64> = schedule.iter().map(|e| e.powf(gamma)).collect();
        let diag = neville_to_zero(&t, &values);
        let estimate = diag[diag.len() - 1];
        let residual = (estimate - diag[diag.len() - 2]).abs();
        if !estimate.is_finite() {
            continue;
        }
        if best.is_none_or(|(_, _, r)| residual < r) {
            best = Some((gamma, estimate, residual));
        }
    }
    let Some((gamma, estimate, residual)) = best else {
        return Ok(divergent(slope));
    };
    let result = CpvResult {
        report: ConvergenceReport::finite(estimate, false, None),
        rate: Some(gamma),
        residual: Some(residual),
        increment_slope: slope,
        samples,
    };
    if residual > options.tolerance * estimate.abs().max(1.0) {
        return Err(CpvError::Inconclusive(Box::new(result)));
    }
    Ok(result)
}

/// Radial sampling density for [`numeric_lp_integral`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RadialProposal {
    /// Density proportional to the reduced integrand `r^a`.
    #[default]
    Matched,
    /// Density proportional to the measure's radial marginal `r^{w+n-1}`.
    Volume,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloConfig {
    pub samples: usize,
    pub seed: u64,
    pub proposal: RadialProposal,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        Self {
            samples: 1_000_000,
            seed: DEFAULT_SEED,
            proposal: RadialProposal::Matched,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub value: f64,
    pub std_error: f64,
    pub samples: usize,
    pub seed: u64,
}

const CHUNK: usize = 4096;

/// Running mean and sum of squared deviations.
#[derive(Clone, Copy, Default)]
struct Moments {
    count: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.count += 1.0;
        let d = x - self.mean;
        self.mean += d / self.count;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if other.count == 0.0 {
            return self;
        }
        if self.count == 0.0 {
            return other;
        }
        let count = self.count + other.count;
        let d = other.mean - self.mean;
        Moments {
            count,
            mean: self.mean + d * other.count / count,
            m2: self.m2 + other.m2 + d * d * self.count * other.count / count,
        }
    }
}

/// Inverse-CDF sample from the density proportional to `r^b` on `[r0, r1]`.
fn sample_power_radius(b: f64, r0: f64, r1: f64, u: f64) -> f64 {
    let e = b + 1.0;
    if e.abs() < 1e-12 {
        r0 * (r1 / r0).powf(u)
    } else {
        let span = (r1 / r0).powf(e) - 1.0;
        r0 * (1.0 + u * span).powf(1.0 / e)
    }
}

fn power_mass(b: f64, r0: f64, r1: f64) -> f64 {
    let e = b + 1.0;
    if e.abs() < 1e-12 {
        (r1 / r0).ln()
    } else {
        (r1.powf(e) - r0.powf(e)) / e
    }
}

/// Seeded polar Monte Carlo estimate of `int_domain |k(x)|^p |x|^w dx`.
///
/// Directions are uniform on the sphere and radii come from the chosen
/// proposal density; each sample evaluates the kernel at the actual point
/// `x = r u`. Chunks own independent RNG streams and are merged in index order,
/// so the result depends only on the seed and the sample count.
pub fn numeric_lp_integral(
    spec: &KernelSpec,
    p: f64,
    measure: &WeightedMeasure,
    domain: &RadialDomain,
    config: &MonteCarloConfig,
) -> Result<MonteCarloEstimate, QuadratureError> {
    if config.samples == 0 {
        return Err(QuadratureError::EmptyBudget);
    }
    let (r0, r1) = domain.numeric_extent().ok_or(QuadratureError::UnboundedDomain)?;
    let form = domain::radial_reduction(spec, p, measure, domain)?;
    let n = spec.n();
    let w = measure.weight_exponent();
    let b = match config.proposal {
        RadialProposal::Matched => form.exponent,
        RadialProposal::Volume => w + n as f64 - 1.0,
    };
    let mass = power_mass(b, r0, r1);
    let sphere = domain.angular_measure();
    let chunks = config.samples.div_ceil(CHUNK);

    let partials: Vec<Result<Moments, QuadratureError>> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(chunk as u64);
            let count = CHUNK.min(config.samples - chunk * CHUNK);
            let mut moments = Moments::default();
            let mut dir = vec![0.0; n];
            let mut value = vec![0.0; 1 << n];
            for _ in 0..count {
                let r = sample_power_radius(b, r0, r1, rng.random::<f64>());
                if n == 1 {
                    dir[0] = if rng.random::<bool>() { r } else { -r };
                } else {
                    let mut norm2 = 0.0;
                    while norm2 < 1e-24 {
                        norm2 = 0.0;
                        for d in dir.iter_mut() {
                            *d = rng.sample::<f64, _>(StandardNormal);
                            norm2 += *d * *d;
                        }
                    }
                    let scale = r / norm2.sqrt();
                    dir.iter_mut().for_each(|d| *d *= scale);
                }
                value.iter_mut().for_each(|c| *c = 0.0);
                spec.evaluate_into(&dir, &mut value)?;
                let k_norm = value.iter().map(|c| c * c).sum::<f64>().sqrt();
                let radius = dir.iter().map(|c| c * c).sum::<f64>().sqrt();
                let integrand = k_norm.powf(p) * measure.density(radius);
                let jacobian = sphere * r.powi(n as i32 - 1) * mass / r.powf(b);
                moments.push(integrand * jacobian);
            }
            Ok(moments)
        })
        .collect();

    let mut total = Moments::default();
    for part in partials {
        total = total.merge(part?);
    }
    let variance = if total.count > 1.0 {
        (total.m2 / (total.count - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(MonteCarloEstimate {
        value: total.mean,
        std_error: (variance / total.count).sqrt(),
        samples: config.samples,
        seed: config.seed,
    })
}
