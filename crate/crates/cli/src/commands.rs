//! Command execution against a resolved [`RunConfig`].

use std::path::PathBuf;

use serde_json::{json, Value};
use skl_core::domain;
use skl_core::norm;
use skl_core::quadrature::{self, CpvError, CpvOptions, MonteCarloConfig, RadialProposal, DEFAULT_SEED};
use skl_core::rational::{self, Rational};
use skl_core::threshold::{self, ThresholdReport};
use skl_core::transform::{self, ConvolutionPlan, PunctureHandling, TransformError};
use skl_core::{GridFunction, KernelSpec, RadialDomain, WeightedMeasure};

use crate::config::RunConfig;
use crate::error::{CliError, Outcome, EXIT_CHECK_FAILED, EXIT_DIVERGENT, EXIT_INCONCLUSIVE};

pub const COMMANDS: [&str; 8] = [
    "classify",
    "threshold",
    "cpv",
    "norm",
    "holder",
    "scan",
    "teodorescu",
    "verify-all",
];

pub fn seed(cfg: &RunConfig) -> Result<u64, CliError> {
    Ok(cfg.value("numeric", "seed")?.unwrap_or(DEFAULT_SEED))
}

pub fn run(command: &str, cfg: &RunConfig) -> Result<Outcome, CliError> {
    match command {
        "classify" => classify(cfg),
        "threshold" => threshold_cmd(cfg),
        "cpv" => cpv(cfg),
        "norm" => norm_cmd(cfg),
        "holder" => holder(cfg),
        "scan" => scan(cfg),
        "teodorescu" => teodorescu(cfg),
        "verify-all" => verify_all(cfg),
        other => Err(CliError::validation(format!("unknown command `{other}`"))),
    }
}

fn kernel(cfg: &RunConfig) -> Result<KernelSpec, CliError> {
    cfg.typed_section("kernel")?
        .ok_or_else(|| CliError::validation("a kernel is required (--family or `kernel` section)"))
}

fn measure(cfg: &RunConfig) -> Result<WeightedMeasure, CliError> {
    Ok(cfg.typed_section("measure")?.unwrap_or_default())
}

/// The configured domain, or `fallback` when none was given.
fn domain_or(cfg: &RunConfig, fallback: impl FnOnce() -> Result<RadialDomain, CliError>) -> Result<RadialDomain, CliError> {
    if cfg.has_section("domain") {
        Ok(cfg.typed_section("domain")?.expect("section present"))
    } else {
        fallback()
    }
}

fn exact_weight(m: &WeightedMeasure) -> Result<Rational, CliError> {
    rational::from_f64(m.weight_exponent()).map_err(|e| CliError::validation(format!("weight exponent: {e}")))
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

fn load_grid(path: &PathBuf) -> Result<GridFunction, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::validation(format!("cannot read grid {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::validation(format!("invalid grid {}: {e}", path.display())))
}

fn grid_param(cfg: &RunConfig, key: &str) -> Result<GridFunction, CliError> {
    load_grid(&cfg.require::<PathBuf>("params", key)?)
}

fn classify(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let spec = kernel(cfg)?;
    let m = measure(cfg)?;
    let h = spec.homogeneity_degree();
    let w = exact_weight(&m)?;
    Ok(Outcome::ok(json!({
        "kernel": to_value(&spec),
        "homogeneity_degree": rational::format(&h),
        "weight_exponent": rational::format(&w),
        "effective_degree": rational::format(&(h - w)),
        "n": spec.n(),
        "class": to_value(&spec.classify(m.weight_exponent())),
        "unit_norm": spec.unit_norm(),
    })))
}

fn threshold_cmd(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let target_q = match cfg.value::<Value>("params", "target_q")? {
        None => None,
        Some(Value::String(s)) => Some(rational::parse(&s).map_err(|e| CliError::validation(e.to_string()))?),
        Some(Value::Number(n)) => Some(
            rational::from_f64(n.as_f64().unwrap_or(f64::NAN)).map_err(|e| CliError::validation(e.to_string()))?,
        ),
        Some(other) => return Err(CliError::validation(format!("invalid params.target_q {other}"))),
    };
    let report: ThresholdReport = if cfg.value::<bool>("params", "equal_order_case")?.unwrap_or(false) {
        let n: Option<usize> = cfg.value("kernel", "n")?;
        let l: Option<usize> = cfg.value("kernel", "l")?;
        let family: Option<String> = cfg.value("kernel", "family")?;
        if family.as_deref().is_some_and(|f| f != "dirac_iterate") || n.is_some_and(|n| n != 3) || l.is_some_and(|l| l != 3)
        {
            return Err(CliError::validation(
                "--equal-order-case applies only to dirac_iterate with n = 3, l = 3",
            ));
        }
        threshold::equal_order_report()
    } else {
        let spec = kernel(cfg)?;
        let j: u32 = cfg.value("params", "j")?.unwrap_or(0);
        threshold::threshold_report(&spec, exact_weight(&measure(cfg)?)?, j).map_err(|e| CliError::validation(e.to_string()))?
    };
    let mut result = to_value(&report);
    if let Some(q) = target_q {
        result["target_q"] = json!(rational::format(&q));
        result["viable"] = json!(report.q_star.admits(q));
    }
    Ok(Outcome::ok(result))
}

fn cpv(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let spec = kernel(cfg)?;
    let m = measure(cfg)?;
    let p: f64 = cfg.value("params", "p")?.unwrap_or(1.0);
    let r_out: f64 = cfg.value("params", "r_out")?.unwrap_or(1.0);
    let first: f64 = cfg.value("params", "eps_first")?.unwrap_or(0.1);
    let ratio: f64 = cfg.value("params", "eps_ratio")?.unwrap_or(0.1);
    let count: usize = cfg.value("params", "eps_count")?.unwrap_or(5);
    if !(first > 0.0 && first < r_out && ratio > 0.0 && ratio < 1.0) {
        return Err(CliError::validation("schedule needs 0 < eps_first < r_out and 0 < eps_ratio < 1"));
    }
    let schedule = quadrature::geometric_schedule(first, ratio, count);
    let outcome = quadrature::cpv_limit(
        |eps| quadrature::punctured_integral(&spec, p, &m, eps, r_out),
        &schedule,
        &CpvOptions::default(),
    );
    let (res, status) = match outcome {
        Ok(res) => {
            let status = if res.report.converges { 0 } else { EXIT_DIVERGENT };
            (res, status)
        }
        Err(CpvError::Inconclusive(res)) => (*res, EXIT_INCONCLUSIVE),
        Err(CpvError::InvalidSchedule) => {
            return Err(CliError::validation("schedule must hold at least 4 strictly decreasing radii"))
        }
        Err(CpvError::Evaluator(e)) => return Err(CliError::validation(e.to_string())),
    };
    let limit = match res.report.value {
        Some(v) => json!(v),
        None => json!("inf"),
    };
    Ok(Outcome::ok(json!({
        "limit": limit,
        "converged": res.report.converges,
        "inconclusive": status == EXIT_INCONCLUSIVE,
        "divergence_end": to_value(&res.report.divergence_end),
        "rate": res.rate,
        "residual": res.residual,
        "increment_slope": res.increment_slope,
        "samples": res.samples,
        "p": p,
        "r_out": r_out,
    }))
    .with_status(status))
}

fn norm_cmd(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let m = measure(cfg)?;
    let p: f64 = cfg.require("params", "p")?;
    if cfg.get("params", "grid").is_some() {
        let f = grid_param(cfg, "grid")?;
        let k: usize = cfg.value("params", "k")?.unwrap_or(0);
        let r = norm::grid_norm(&f, p, k, &m).map_err(|e| CliError::validation(e.to_string()))?;
        return Ok(Outcome::ok(to_value(&r)));
    }
    let spec = kernel(cfg)?;
    let dom = domain_or(cfg, || {
        RadialDomain::exterior(spec.n(), 1.0).map_err(|e| CliError::validation(e.to_string()))
    })?;
    let method: String = cfg.value("params", "method")?.unwrap_or_else(|| "closed_form".into());
    match method.as_str() {
        "closed_form" => {
            let r = norm::kernel_lp_norm(&spec, p, &m, &dom).map_err(|e| CliError::validation(e.to_string()))?;
            let status = if r.is_finite() { 0 } else { EXIT_DIVERGENT };
            let mut result = to_value(&r);
            result["domain"] = to_value(&dom);
            Ok(Outcome::ok(result).with_status(status))
        }
        "monte_carlo" => {
            let mc = MonteCarloConfig {
                samples: cfg.value("numeric", "samples")?.unwrap_or(1_000_000),
                seed: seed(cfg)?,
                proposal: cfg.value::<RadialProposal>("params", "proposal")?.unwrap_or_default(),
            };
            let est = quadrature::numeric_lp_integral(&spec, p, &m, &dom, &mc)
                .map_err(|e| CliError::validation(e.to_string()))?;
            let form = domain::radial_reduction(&spec, p, &m, &dom).map_err(|e| CliError::validation(e.to_string()))?;
            let (lo, hi) = dom.numeric_extent().expect("bounded after sampling");
            let closed = quadrature::power_integral(form.exponent, lo, hi)
                .map_err(|e| CliError::validation(e.to_string()))?
                .value_or_infinity()
                * form.constant;
            Ok(Outcome::ok(json!({
                "integral": est.value,
                "std_error": est.std_error,
                "norm": est.value.powf(1.0 / p),
                "closed_form_integral": closed,
                "samples": est.samples,
                "p": p,
                "domain": to_value(&dom),
            })))
        }
        other => Err(CliError::validation(format!("unknown norm method `{other}` (closed_form | monte_carlo)"))),
    }
}

fn holder(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let g = grid_param(cfg, "g")?;
    let f = grid_param(cfg, "f")?;
    let p: f64 = cfg.require("params", "p")?;
    let q: f64 = match cfg.value("params", "q")? {
        Some(q) => q,
        None => norm::conjugate_exponent(p),
    };
    let check = norm::holder_check(&g, &f, p, q, &measure(cfg)?).map_err(|e| CliError::validation(e.to_string()))?;
    let status = if check.holds { 0 } else { EXIT_CHECK_FAILED };
    let mut result = to_value(&check);
    result["p"] = json!(p);
    result["q"] = json!(q);
    Ok(Outcome::ok(result).with_status(status))
}

fn scan(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let spec = kernel(cfg)?;
    let m = measure(cfg)?;
    let f = grid_param(cfg, "grid")?;
    let dom = domain_or(cfg, || {
        RadialDomain::exterior(spec.n(), 1.0).map_err(|e| CliError::validation(e.to_string()))
    })?;
    let q_star: f64 = match cfg.value("params", "q_star")? {
        Some(q) => q,
        None => threshold::threshold_report(&spec, exact_weight(&m)?, 0)
            .map_err(|e| CliError::validation(e.to_string()))?
            .q_star
            .to_f64(),
    };
    let steps: usize = cfg.value("params", "steps")?.unwrap_or(10);
    let table = norm::norm_limit_scan(&spec, &f, &m, &dom, q_star, steps).map_err(|e| CliError::validation(e.to_string()))?;
    let mut out = Outcome::ok(to_value(&table));
    out.csv = Some(table.to_csv());
    Ok(out)
}

fn teodorescu(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let spec = kernel(cfg)?;
    let m = measure(cfg)?;
    let psi = if cfg.get("params", "grid").is_some() {
        grid_param(cfg, "grid")?
    } else {
        let nodes: usize = cfg.value("params", "nodes")?.unwrap_or(64);
        let half_width: f64 = cfg.value("params", "half_width")?.unwrap_or(1.5);
        if !(half_width > 1.0) {
            return Err(CliError::validation("half_width must exceed the bump radius 1"));
        }
        transform::unit_bump(spec.n(), half_width, nodes).map_err(|e| CliError::validation(e.to_string()))?
    };
    let plan = ConvolutionPlan {
        spec: spec.clone(),
        refine: cfg.value("numeric", "refine")?.unwrap_or(transform::DEFAULT_REFINE),
        puncture: cfg.value::<PunctureHandling>("params", "puncture")?.unwrap_or(PunctureHandling::SubgridRefine),
        measure: m,
    };
    let map_err = |e: TransformError| match e {
        TransformError::Kernel(_) => CliError::runtime(e),
        other => CliError::validation(other.to_string()),
    };
    let transformed = transform::teodorescu(&psi, &plan).map_err(map_err)?;
    let mut result = json!({
        "plan": to_value(&plan),
        "shape": psi.shape(),
        "truncation_box": psi.lo().iter().zip(psi.hi()).map(|(a, b)| [*a, *b]).collect::<Vec<_>>(),
    });
    if spec.family() == skl_core::KernelFamily::Cauchy {
        let residual = transform::left_inverse_residual(&psi, &transformed, 1).map_err(map_err)?;
        result["left_inverse_residual"] = json!(residual);
    }
    if let Some(q) = cfg.value::<f64>("params", "q")? {
        match transform::mapping_property_probe(&psi, &spec, q, &m) {
            Ok(probe) => result["probe"] = to_value(&probe),
            Err(TransformError::Inadmissible { q, report }) => {
                return Err(CliError::validation(format!(
                    "q = {q} outside the admissible range {}: {}",
                    report.q_range,
                    serde_json::to_string(&report).expect("report serializes")
                )))
            }
            Err(e) => return Err(map_err(e)),
        }
    }
    if let Some(path) = cfg.value::<PathBuf>("params", "grid_out")? {
        let text = serde_json::to_string(&transformed).expect("grid serializes");
        std::fs::write(&path, text).map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))?;
        result["grid_out"] = json!(path);
    }
    Ok(Outcome::ok(result))
}

fn verify_all(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let delta: f64 = cfg.value("numeric", "delta")?.unwrap_or(0.1);
    let r_in: f64 = cfg.value("params", "r_in")?.unwrap_or(1.0);
    let outcomes = threshold::run_sweep(delta, r_in).map_err(|e| CliError::validation(e.to_string()))?;
    let mut lines = Vec::new();
    let mut all = true;
    for o in &outcomes {
        all &= o.passed;
        lines.push(format!(
            "{} {}: p*={} finite at {:.4}, divergent at {:.4} after {} doublings",
            if o.passed { "PASS" } else { "FAIL" },
            o.label,
            o.witness.p_star,
            o.witness.p_above,
            o.witness.p_below,
            o.witness.doublings,
        ));
    }
    let checks = [
        (
            "cauchy n=2 q=2 not viable",
            KernelSpec::cauchy(2).ok().and_then(|s| threshold::viability(&s, Rational::from_integer(0), Rational::from_integer(2)).ok()).is_some_and(|v| !v.viable),
        ),
        (
            "cauchy n=3 q=2 viable",
            KernelSpec::cauchy(3).ok().and_then(|s| threshold::viability(&s, Rational::from_integer(0), Rational::from_integer(2)).ok()).is_some_and(|v| v.viable),
        ),
        ("dirac_iterate n=3 l=3 q=2 not viable, range (1,3/2)", {
            let v = threshold::equal_order_viability(Rational::from_integer(2));
            !v.viable && v.report.q_range == "(1,3/2)"
        }),
    ];
    for (label, ok) in checks {
        all &= ok;
        lines.push(format!("{} {label}", if ok { "PASS" } else { "FAIL" }));
    }
    let mut out = Outcome::ok(json!({
        "delta": delta,
        "r_in": r_in,
        "passed": all,
        "cases": to_value(&outcomes),
        "viability_checks": checks.iter().map(|(l, ok)| json!({"label": l, "passed": ok})).collect::<Vec<_>>(),
    }));
    out.lines = lines;
    if !all {
        out.status = EXIT_CHECK_FAILED;
    }
    Ok(out)
}

