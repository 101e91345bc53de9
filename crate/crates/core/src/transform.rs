//! Teodorescu transform and the finite-difference Dirac operator.
//!
//! The transform `(T psi)(x) = int K(x - y) psi(y) dy` is evaluated on the
//! lattice of `psi` as a direct sum over source nodes. Because the lattice is
//! uniform, the kernel is tabulated once per lattice offset. Offsets in the
//! near field use the cell average of the kernel over a refined subgrid, which
//! also handles the integrable singularity in the source node's own cell.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clifford::ProductTable;
use crate::domain::WeightedMeasure;
use crate::grid::{GridError, GridFunction};
use crate::kernel::{KernelError, KernelFamily, KernelSpec, SingularityClass};
use crate::norm::{self, NormError};
use crate::rational;
use crate::threshold::{self, ThresholdError, ThresholdReport};

/// Subgrid factor per axis for near-field cells.
pub const DEFAULT_REFINE: usize = 8;
/// Offsets with `max |d_i| <= NEAR_FIELD` are cell-averaged.
pub const NEAR_FIELD: usize = 1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransformError {
    #[error("kernel is {class:?} under |x|^{weight}; {handling:?} needs {needed}")]
    ClassMismatch {
        class: SingularityClass,
        weight: f64,
        handling: PunctureHandling,
        needed: &'static str,
    },
    #[error("refinement factor {got} too small (minimum {min})")]
    Refinement { got: usize, min: usize },
    #[error("kernel dimension {kernel} does not match grid dimension {grid}")]
    DimensionMismatch { kernel: usize, grid: usize },
    #[error("q = {q} outside the admissible range {}", report.q_range)]
    Inadmissible { q: f64, report: Box<ThresholdReport> },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Norm(#[from] NormError),
    #[error(transparent)]
    Threshold(#[from] ThresholdError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PunctureHandling {
    /// Integrate the singular cell on a refined subgrid.
    SubgridRefine,
    /// Drop the singular cell.
    CellExclude,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvolutionPlan {
    pub spec: KernelSpec,
    pub refine: usize,
    pub puncture: PunctureHandling,
    /// Measure used to classify the kernel.
    #[serde(default)]
    pub measure: WeightedMeasure,
}

impl ConvolutionPlan {
    pub fn new(spec: KernelSpec) -> Self {
        Self {
            spec,
            refine: DEFAULT_REFINE,
            puncture: PunctureHandling::SubgridRefine,
            measure: WeightedMeasure::lebesgue(),
        }
    }

    pub fn with_refine(mut self, refine: usize) -> Self {
        self.refine = refine;
        self
    }

    pub fn with_puncture(mut self, puncture: PunctureHandling) -> Self {
        self.puncture = puncture;
        self
    }

    pub fn validate(&self) -> Result<(), TransformError> {
        let class = self.spec.classify(self.measure.weight_exponent());
        let mismatch = |needed| TransformError::ClassMismatch {
            class,
            weight: self.measure.weight_exponent(),
            handling: self.puncture,
            needed,
        };
        match self.puncture {
            PunctureHandling::SubgridRefine => {
                if class != SingularityClass::Weak {
                    return Err(mismatch("a WEAK kernel"));
                }
                if self.refine < 4 {
                    return Err(TransformError::Refinement { got: self.refine, min: 4 });
                }
            }
            PunctureHandling::CellExclude => {
                if class == SingularityClass::Weak {
                    return Err(mismatch("a SINGULAR or HYPER kernel"));
                }
                if self.refine == 0 {
                    return Err(TransformError::Refinement { got: 0, min: 1 });
                }
            }
        }
        Ok(())
    }
}

/// Kernel values on every lattice offset `d`, `|d_i| < shape_i`.
struct OffsetTable {
    /// Extent `2 shape_i - 1` per axis.
    extent: Vec<usize>,
    shape: Vec<usize>,
    /// Blades that can be non-zero.
    blades: Vec<usize>,
    /// `values[offset * blades.len() + k]` is the coefficient on `blades[k]`.
    values: Vec<f64>,
}

impl OffsetTable {
    fn build(plan: &ConvolutionPlan, grid: &GridFunction) -> Result<Self, TransformError> {
        let n = grid.n();
        let spacing = grid.spacings();
        let shape = grid.shape().to_vec();
        let extent: Vec<usize> = shape.iter().map(|s| 2 * s - 1).collect();
        let total: usize = extent.iter().product();
        let full = grid.blades();

        let blades: Vec<usize> = match plan.spec.family() {
            KernelFamily::Cauchy => (0..n).map(|j| 1 << j).collect(),
            KernelFamily::DiracIterate if plan.spec.l() % 2 == 1 => (0..n).map(|j| 1 << j).collect(),
            _ => vec![0],
        };
        let m = plan.refine;
        let sub: Vec<f64> = spacing.iter().map(|h| h / m as f64).collect();
        let sub_count = m.pow(n as u32);

        let values: Result<Vec<Vec<f64>>, TransformError> = (0..total)
            .into_par_iter()
            .map(|offset| {
                let mut d = vec![0i64; n];
                let mut rest = offset;
                for axis in (0..n).rev() {
                    d[axis] = (rest % extent[axis]) as i64 - (shape[axis] as i64 - 1);
                    rest /= extent[axis];
                }
                let centre: Vec<f64> = d.iter().zip(&spacing).map(|(&k, h)| k as f64 * h).collect();
                let near = d.iter().all(|k| k.unsigned_abs() as usize <= NEAR_FIELD);
                let is_self = d.iter().all(|&k| k == 0);
                let mut acc = vec![0.0; full];
                let mut buf = vec![0.0; full];
                if is_self && plan.puncture == PunctureHandling::CellExclude {
                    // singular cell dropped
                } else if near {
                    let mut x = vec![0.0; n];
                    for s in 0..sub_count {
                        let mut r = s;
                        for axis in 0..n {
                            let i = r % m;
                            r /= m;
                            x[axis] = centre[axis] + (i as f64 + 0.5) * sub[axis] - 0.5 * spacing[axis];
                        }
                        if x.iter().all(|&v| v == 0.0) {
                            continue;
                        }
                        buf.iter_mut().for_each(|c| *c = 0.0);
                        plan.spec.evaluate_into(&x, &mut buf)?;
                        acc.iter_mut().zip(&buf).for_each(|(a, b)| *a += b);
                    }
                    acc.iter_mut().for_each(|a| *a /= sub_count as f64);
                } else {
                    plan.spec.evaluate_into(&centre, &mut acc)?;
                }
                Ok(blades.iter().map(|&b| acc[b]).collect())
            })
            .collect();
        Ok(Self {
            extent,
            shape,
            blades,
            values: values?.concat(),
        })
    }

    /// Flat offset index of `target - source`.
    #[inline]
    fn offset(&self, target: &[usize], source: &[usize]) -> usize {
        let mut idx = 0;
        for axis in 0..target.len() {
            let d = target[axis] + self.shape[axis] - 1 - source[axis];
            idx = idx * self.extent[axis] + d;
        }
        idx
    }
}

/// `T psi` on the lattice of `psi`, with the kernel on the left of the product.
pub fn teodorescu(psi: &GridFunction, plan: &ConvolutionPlan) -> Result<GridFunction, TransformError> {
    if plan.spec.n() != psi.n() {
        return Err(TransformError::DimensionMismatch {
            kernel: plan.spec.n(),
            grid: psi.n(),
        });
    }
    plan.validate()?;
    let table = OffsetTable::build(plan, psi)?;
    let products = ProductTable::new(psi.n());
    let b = psi.blades();
    let kb = table.blades.len();

    struct Source {
        index: Vec<usize>,
        terms: Vec<(usize, f64)>,
    }
    let sources: Vec<Source> = (0..psi.node_count())
        .filter_map(|idx| {
            let w = psi.trapezoid_weight(idx);
            let terms: Vec<(usize, f64)> = psi
                .value(idx)
                .iter()
                .enumerate()
                .filter(|(_, &c)| c != 0.0)
                .map(|(blade, &c)| (blade, c * w))
                .collect();
            (!terms.is_empty()).then(|| Source {
                index: psi.multi_index(idx),
                terms,
            })
        })
        .collect();

    let out: Vec<Vec<f64>> = (0..psi.node_count())
        .into_par_iter()
        .map(|target| {
            let t = psi.multi_index(target);
            let mut acc = vec![0.0; b];
            for src in &sources {
                let k = &table.values[table.offset(&t, &src.index) * kb..][..kb];
                for (ka, &kv) in table.blades.iter().zip(k) {
                    if kv == 0.0 {
                        continue;
                    }
                    for &(blade, c) in &src.terms {
                        acc[ka ^ blade] += products.sign(*ka, blade) * kv * c;
                    }
                }
            }
            acc
        })
        .collect();
    Ok(psi.with_coeffs(out.concat())?)
}

/// `D f` together with the width of the band that used one-sided stencils.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiracOutput {
    pub field: GridFunction,
    pub boundary_band: usize,
}

impl DiracOutput {
    pub fn is_interior(&self, idx: usize) -> bool {
        self.field.face_distance(idx) >= self.boundary_band
    }
}

/// `D f = sum_j e_j d_j f`.
pub fn dirac_apply(f: &GridFunction) -> Result<DiracOutput, TransformError> {
    if let Some(&small) = f.shape().iter().find(|&&s| s < 3) {
        return Err(GridError::TooSmall { needed: 3, got: small }.into());
    }
    let products = ProductTable::new(f.n());
    let b = f.blades();
    let mut out = vec![0.0; f.coeffs().len()];
    for axis in 0..f.n() {
        let d = f.partial(axis);
        let e = 1usize << axis;
        for (node, chunk) in d.coeffs().chunks(b).enumerate() {
            let target = &mut out[node * b..(node + 1) * b];
            for (blade, &c) in chunk.iter().enumerate() {
                if c != 0.0 {
                    target[e ^ blade] += products.sign(e, blade) * c;
                }
            }
        }
    }
    Ok(DiracOutput {
        field: f.with_coeffs(out)?,
        boundary_band: 1,
    })
}

/// `D-bar f = sum_j conj(e_j) d_j f = -D f`.
pub fn dirac_conjugate_apply(f: &GridFunction) -> Result<DiracOutput, TransformError> {
    let mut out = dirac_apply(f)?;
    out.field = out.field.scale(-1.0);
    Ok(out)
}

/// `||D(T psi) - psi||_2 / ||psi||_2` over nodes at least `band` from the faces.
pub fn left_inverse_residual(
    psi: &GridFunction,
    transformed: &GridFunction,
    band: usize,
) -> Result<f64, TransformError> {
    if !psi.same_lattice(transformed) {
        return Err(GridError::LatticeMismatch.into());
    }
    let d = dirac_apply(transformed)?;
    let b = psi.blades();
    let mut num = Vec::new();
    let mut den = Vec::new();
    for idx in 0..psi.node_count() {
        if psi.face_distance(idx) < band.max(d.boundary_band) {
            continue;
        }
        let p = psi.value(idx);
        let q = &d.field.coeffs()[idx * b..(idx + 1) * b];
        num.push(p.iter().zip(q).map(|(a, c)| (c - a).powi(2)).sum::<f64>());
        den.push(p.iter().map(|a| a * a).sum::<f64>());
    }
    Ok((norm::pairwise_sum(&num) / norm::pairwise_sum(&den)).sqrt())
}

/// Norms of `psi` and `T psi` at one admissible exponent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingProbe {
    pub q: f64,
    pub report: ThresholdReport,
    /// `||psi||_{q,k}` for `k = 0, 1`.
    pub density_norms: [f64; 2],
    /// `||T psi||_{q,k}` for `k = 0, 1`.
    pub transform_norms: [f64; 2],
    /// Left-inverse residual; present for the Cauchy kernel only.
    pub residual: Option<f64>,
    /// Box bounds the unbounded integral is truncated to.
    pub truncation_box: Vec<[f64; 2]>,
    pub all_finite: bool,
}

/// Checks `q` against the conjugate range, then reports the norms of `psi`
/// and of its transform (the transform gains one derivative).
pub fn mapping_property_probe(
    psi: &GridFunction,
    spec: &KernelSpec,
    q: f64,
    measure: &WeightedMeasure,
) -> Result<MappingProbe, TransformError> {
    let w = rational::from_f64(measure.weight_exponent())
        .map_err(|e| ThresholdError::Kernel(KernelError::Invalid(e.to_string())))?;
    let report = threshold::threshold_report(spec, w, 0)?;
    let admissible = rational::from_f64(q)
        .map(|qr| report.q_star.admits(qr))
        .unwrap_or(false);
    if !admissible {
        return Err(TransformError::Inadmissible {
            q,
            report: Box::new(report),
        });
    }
    let plan = ConvolutionPlan {
        measure: *measure,
        ..ConvolutionPlan::new(spec.clone())
    };
    let transformed = teodorescu(psi, &plan)?;
    let density_norms = [
        norm::grid_norm(psi, q, 0, measure)?.value,
        norm::grid_norm(psi, q, 1, measure)?.value,
    ];
    let transform_norms = [
        norm::grid_norm(&transformed, q, 0, measure)?.value,
        norm::grid_norm(&transformed, q, 1, measure)?.value,
    ];
    let residual = if spec.family() == KernelFamily::Cauchy {
        Some(left_inverse_residual(psi, &transformed, 1)?)
    } else {
        None
    };
    let all_finite = density_norms.iter().chain(&transform_norms).all(|v| v.is_finite())
        && residual.is_none_or(f64::is_finite);
    Ok(MappingProbe {
        q,
        report,
        density_norms,
        transform_norms,
        residual,
        truncation_box: psi.lo().iter().zip(psi.hi()).map(|(&a, &b)| [a, b]).collect(),
        all_finite,
    })
}

/// Smooth bump `exp(-1 / (1 - |x|^2))` on the unit ball, scalar-valued.
pub fn unit_bump(n: usize, half_width: f64, nodes: usize) -> Result<GridFunction, GridError> {
    GridFunction::from_fn(n, vec![-half_width; n], vec![half_width; n], vec![nodes; n], |x, out| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        if r2 < 1.0 {
            out[0] = (-1.0 / (1.0 - r2)).exp();
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cauchy_plan(n: usize) -> ConvolutionPlan {
        ConvolutionPlan::new(KernelSpec::cauchy(n).unwrap())
    }

    #[test]
    fn zero_maps_to_zero() {
        let psi = GridFunction::zeros(2, vec![-1.0; 2], vec![1.0; 2], vec![9, 9]).unwrap();
        let out = teodorescu(&psi, &cauchy_plan(2)).unwrap();
        assert!(out.coeffs().iter().all(|&c| c == 0.0));
    }

    #[test]
    fn plan_validation() {
        let laplace = ConvolutionPlan::new(KernelSpec::laplace_iterate(2).unwrap());
        assert!(matches!(laplace.validate(), Err(TransformError::ClassMismatch { .. })));
        assert!(laplace.clone().with_puncture(PunctureHandling::CellExclude).validate().is_ok());
        assert!(matches!(
            cauchy_plan(2).with_refine(2).validate(),
            Err(TransformError::Refinement { .. })
        ));
        assert!(cauchy_plan(2).with_puncture(PunctureHandling::CellExclude).validate().is_err());
        let psi = GridFunction::zeros(3, vec![-1.0; 3], vec![1.0; 3], vec![3, 3, 3]).unwrap();
        assert!(matches!(
            teodorescu(&psi, &cauchy_plan(2)),
            Err(TransformError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn constant_has_no_interior_derivative() {
        let f = GridFunction::from_fn(2, vec![0.0; 2], vec![1.0; 2], vec![6, 7], |_, out| {
            out.copy_from_slice(&[1.0, -2.0, 0.5, 3.0]);
        })
        .unwrap();
        let d = dirac_apply(&f).unwrap();
        assert!(d.field.coeffs().iter().all(|c| c.abs() < 1e-12));
    }

    #[test]
    fn linear_field_gives_generator() {
        let f = GridFunction::from_fn(2, vec![-1.0; 2], vec![2.0; 2], vec![7, 5], |x, out| out[0] = x[0]).unwrap();
        let d = dirac_apply(&f).unwrap();
        for idx in 0..f.node_count() {
            let v = &d.field.coeffs()[idx * 4..idx * 4 + 4];
            assert!((v[1] - 1.0).abs() < 1e-12);
            assert!(v[0].abs() < 1e-12 && v[2].abs() < 1e-12 && v[3].abs() < 1e-12);
        }
    }

    #[test]
    fn grid_too_small_for_dirac() {
        let f = GridFunction::zeros(2, vec![0.0; 2], vec![1.0; 2], vec![2, 5]).unwrap();
        assert!(matches!(
            dirac_apply(&f),
            Err(TransformError::Grid(GridError::TooSmall { needed: 3, got: 2 }))
        ));
    }

    #[test]
    fn dirac_factorizes_laplacian() {
        let sample = |nodes: usize| {
            let f = GridFunction::from_fn(2, vec![0.0; 2], vec![3.0; 2], vec![nodes; 2], |x, out| {
                out[0] = x[0].sin() * x[1].sin();
            })
            .unwrap();
            let dd = dirac_apply(&dirac_conjugate_apply(&f).unwrap().field).unwrap();
            let mut worst: f64 = 0.0;
            for idx in 0..f.node_count() {
                if f.face_distance(idx) < 2 {
                    continue;
                }
                let lap = -2.0 * f.value(idx)[0];
                let got = &dd.field.coeffs()[idx * 4..idx * 4 + 4];
                worst = worst.max((got[0] - lap).abs()).max(got[3].abs());
            }
            worst
        };
        let coarse = sample(31);
        let fine = sample(61);
        assert!(coarse < 0.05);
        // second order: halving h cuts the error by about four
        assert!(fine < coarse / 3.0);
    }

    #[test]
    fn grade_zero_goes_to_grade_one() {
        let f = unit_bump(3, 1.2, 9).unwrap();
        let d = dirac_apply(&f).unwrap();
        for idx in 0..f.node_count() {
            assert!(d.field.multivector(idx).is_grade(1));
        }
    }

    #[test]
    fn left_inverse_on_coarse_grid() {
        let psi = unit_bump(2, 1.5, 33).unwrap();
        let t = teodorescu(&psi, &cauchy_plan(2)).unwrap();
        let res = left_inverse_residual(&psi, &t, 1).unwrap();
        assert!(res < 0.2, "residual {res}");
    }

    #[test]
    fn probe_rejects_endpoint() {
        let psi = unit_bump(2, 1.5, 9).unwrap();
        let spec = KernelSpec::cauchy(2).unwrap();
        let m = WeightedMeasure::lebesgue();
        match mapping_property_probe(&psi, &spec, 2.0, &m) {
            Err(TransformError::Inadmissible { report, .. }) => assert_eq!(report.q_range, "(1,2)"),
            other => panic!("expected rejection, got {other:?}"),
        }
        let ok = mapping_property_probe(&psi, &spec, 1.5, &m).unwrap();
        assert!(ok.all_finite);
        assert!(ok.residual.is_some());
    }
}
