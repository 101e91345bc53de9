//! Clifford-valued functions sampled on a uniform axis-aligned lattice.
//!
//! Nodes are stored in row-major order (last axis fastest); each node carries
//! the `2^n` coefficients of a multivector in `Cl_n`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clifford::{Multivector, MAX_DIM};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("invalid grid: {0}")]
    Invalid(String),
    #[error("grids do not share a lattice")]
    LatticeMismatch,
    #[error("grid needs at least {needed} nodes per axis, has {got}")]
    TooSmall { needed: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridFile", into = "GridFile")]
pub struct GridFunction {
    n: usize,
    lo: Vec<f64>,
    hi: Vec<f64>,
    shape: Vec<usize>,
    weight: Option<f64>,
    coeffs: Vec<f64>,
}

/// On-disk layout: header fields plus one coefficient array per node.
#[derive(Serialize, Deserialize)]
struct GridFile {
    n: usize,
    #[serde(rename = "box")]
    bounds: Vec<[f64; 2]>,
    shape: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weight: Option<f64>,
    values: Vec<Vec<f64>>,
}

impl TryFrom<GridFile> for GridFunction {
    type Error = GridError;

    fn try_from(file: GridFile) -> Result<Self, GridError> {
        let blades = 1usize << file.n.min(MAX_DIM);
        if let Some(bad) = file.values.iter().find(|v| v.len() != blades) {
            return Err(GridError::Invalid(format!(
                "node has {} coefficients, expected {blades}",
                bad.len()
            )));
        }
        let lo = file.bounds.iter().map(|b| b[0]).collect();
        let hi = file.bounds.iter().map(|b| b[1]).collect();
        let coeffs = file.values.into_iter().flatten().collect();
        let mut grid = GridFunction::from_coeffs(file.n, lo, hi, file.shape, coeffs)?;
        grid.weight = file.weight;
        Ok(grid)
    }
}

impl From<GridFunction> for GridFile {
    fn from(g: GridFunction) -> Self {
        let blades = g.blades();
        GridFile {
            n: g.n,
            bounds: g.lo.iter().zip(&g.hi).map(|(&a, &b)| [a, b]).collect(),
            shape: g.shape.clone(),
            weight: g.weight,
            values: g.coeffs.chunks(blades).map(<[f64]>::to_vec).collect(),
        }
    }
}

impl GridFunction {
    pub fn from_coeffs(
        n: usize,
        lo: Vec<f64>,
        hi: Vec<f64>,
        shape: Vec<usize>,
        coeffs: Vec<f64>,
    ) -> Result<Self, GridError> {
        if n == 0 || n > MAX_DIM {
            return Err(GridError::Invalid(format!("dimension {n} outside 1..={MAX_DIM}")));
        }
        if lo.len() != n || hi.len() != n || shape.len() != n {
            return Err(GridError::Invalid(format!(
                "box and shape need {n} axes"
            )));
        }
        for axis in 0..n {
            if shape[axis] < 2 {
                return Err(GridError::Invalid(format!("axis {axis} has fewer than 2 nodes")));
            }
            if !(lo[axis].is_finite() && hi[axis].is_finite() && hi[axis] > lo[axis]) {
                return Err(GridError::Invalid(format!(
                    "axis {axis} bounds must satisfy lo < hi"
                )));
            }
        }
        let nodes: usize = shape.iter().product();
        if coeffs.len() != nodes << n {
            return Err(GridError::Invalid(format!(
                "expected {} coefficients, got {}",
                nodes << n,
                coeffs.len()
            )));
        }
        Ok(Self {
            n,
            lo,
            hi,
            shape,
            weight: None,
            coeffs,
        })
    }

    pub fn zeros(n: usize, lo: Vec<f64>, hi: Vec<f64>, shape: Vec<usize>) -> Result<Self, GridError> {
        let nodes: usize = shape.iter().product();
        Self::from_coeffs(n, lo, hi, shape, vec![0.0; nodes << n])
    }

    /// Samples `f` at every node; `f` writes into a zeroed coefficient buffer.
    pub fn from_fn<F>(n: usize, lo: Vec<f64>, hi: Vec<f64>, shape: Vec<usize>, mut f: F) -> Result<Self, GridError>
    where
        F: FnMut(&[f64], &mut [f64]),
    {
        let mut grid = Self::zeros(n, lo, hi, shape)?;
        let blades = grid.blades();
        let mut x = vec![0.0; n];
        for idx in 0..grid.node_count() {
            grid.position_into(idx, &mut x);
            f(&x, &mut grid.coeffs[idx * blades..(idx + 1) * blades]);
        }
        Ok(grid)
    }

    /// A lattice with the same geometry and new node values.
    pub fn with_coeffs(&self, coeffs: Vec<f64>) -> Result<Self, GridError> {
        let mut g = Self::from_coeffs(self.n, self.lo.clone(), self.hi.clone(), self.shape.clone(), coeffs)?;
        g.weight = self.weight;
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn blades(&self) -> usize {
        1 << self.n
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    /// Weight exponent recorded in the file header, if any.
    pub fn weight(&self) -> Option<f64> {
        self.weight
    }

    pub fn set_weight(&mut self, weight: Option<f64>) {
        self.weight = weight;
    }

    pub fn node_count(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        (self.hi[axis] - self.lo[axis]) / (self.shape[axis] - 1) as f64
    }

    pub fn spacings(&self) -> Vec<f64> {
        (0..self.n).map(|a| self.spacing(a)).collect()
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.n).map(|a| self.spacing(a)).product()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn value(&self, idx: usize) -> &[f64] {
        let b = self.blades();
        &self.coeffs[idx * b..(idx + 1) * b]
    }

    pub fn multivector(&self, idx: usize) -> Multivector {
        Multivector::from_coeffs(self.n, self.value(idx).to_vec())
            .expect("grid values have 2^n coefficients")
    }

    /// Flat index to per-axis indices.
    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.n];
        for axis in (0..self.n).rev() {
            out[axis] = idx % self.shape[axis];
            idx /= self.shape[axis];
        }
        out
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi
            .iter()
            .zip(&self.shape)
            .fold(0, |acc, (&i, &s)| acc * s + i)
    }

    /// Row-major stride of one step along `axis`.
    pub fn stride(&self, axis: usize) -> usize {
        self.shape[axis + 1..].iter().product()
    }

    pub fn position_into(&self, idx: usize, x: &mut [f64]) {
        let mut rest = idx;
        for axis in (0..self.n).rev() {
            let i = rest % self.shape[axis];
            rest /= self.shape[axis];
            x[axis] = self.lo[axis] + i as f64 * self.spacing(axis);
        }
    }

    pub fn position(&self, idx: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.n];
        self.position_into(idx, &mut x);
        x
    }

    /// Product trapezoid weight of a node (halved once per face it lies on).
    pub fn trapezoid_weight(&self, idx: usize) -> f64 {
        let mut w = self.cell_volume();
        let mut rest = idx;
        for axis in (0..self.n).rev() {
            let i = rest % self.shape[axis];
            rest /= self.shape[axis];
            if i == 0 || i == self.shape[axis] - 1 {
                w *= 0.5;
            }
        }
        w
    }

    /// Number of nodes between `idx` and the nearest face, minimised over axes.
    pub fn face_distance(&self, idx: usize) -> usize {
        self.multi_index(idx)
            .iter()
            .zip(&self.shape)
            .map(|(&i, &s)| i.min(s - 1 - i))
            .min()
            .unwrap_or(0)
    }

    pub fn same_lattice(&self, other: &Self) -> bool {
        self.n == other.n && self.shape == other.shape && self.lo == other.lo && self.hi == other.hi
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|c| *c *= s);
        out
    }

    /// `a * self + b * other` on a shared lattice.
    pub fn linear_combination(&self, a: f64, other: &Self, b: f64) -> Result<Self, GridError> {
        if !self.same_lattice(other) {
            return Err(GridError::LatticeMismatch);
        }
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(x, y)| a * x + b * y)
            .collect();
        self.with_coeffs(coeffs)
    }

    /// Pointwise multivector norms.
    pub fn pointwise_norms(&self) -> Vec<f64> {
        self.coeffs
            .chunks(self.blades())
            .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect()
    }

    /// First partial derivative along `axis`: central differences inside,
    /// second-order one-sided differences on the faces (two-point when the
    /// axis has only two nodes).
    pub fn partial(&self, axis: usize) -> Self {
        let h = self.spacing(axis);
        let stride = self.stride(axis);
        let len = self.shape[axis];
        let b = self.blades();
        let mut out = vec![0.0; self.coeffs.len()];
        for idx in 0..self.node_count() {
            let i = (idx / stride) % len;
            let at = |k: usize| &self.coeffs[(idx - i * stride + k * stride) * b..][..b];
            let target = &mut out[idx * b..(idx + 1) * b];
            for c in 0..b {
                target[c] = if len == 2 {
                    (at(1)[c] - at(0)[c]) / h
                } else if i == 0 {
                    (-3.0 * at(0)[c] + 4.0 * at(1)[c] - at(2)[c]) / (2.0 * h)
                } else if i == len - 1 {
                    (3.0 * at(len - 1)[c] - 4.0 * at(len - 2)[c] + at(len - 3)[c]) / (2.0 * h)
                } else {
                    (at(i + 1)[c] - at(i - 1)[c]) / (2.0 * h)
                };
            }
        }
        self.with_coeffs(out).expect("same lattice")
    }

    /// Second partial derivative along `axis` with the three-point stencil,
    /// shifted inward at the faces. Needs three nodes on the axis.
    pub fn second_partial(&self, axis: usize) -> Result<Self, GridError> {
        let len = self.shape[axis];
        if len < 3 {
            return Err(GridError::TooSmall { needed: 3, got: len });
        }
        let h2 = self.spacing(axis).powi(2);
        let stride = self.stride(axis);
        let b = self.blades();
        let mut out = vec![0.0; self.coeffs.len()];
        for idx in 0..self.node_count() {
            let i = (idx / stride) % len;
            let centre = i.clamp(1, len - 2);
            let at = |k: usize| &self.coeffs[(idx - i * stride + k * stride) * b..][..b];
            let target = &mut out[idx * b..(idx + 1) * b];
            for c in 0..b {
                target[c] = (at(centre - 1)[c] - 2.0 * at(centre)[c] + at(centre + 1)[c]) / h2;
            }
        }
        self.with_coeffs(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n_nodes: usize, f: impl Fn(f64) -> f64) -> GridFunction {
        GridFunction::from_fn(1, vec![0.0], vec![1.0], vec![n_nodes], |x, out| out[0] = f(x[0])).unwrap()
    }

    #[test]
    fn indexing_is_row_major() {
        let g = GridFunction::zeros(2, vec![0.0, 0.0], vec![1.0, 2.0], vec![3, 5]).unwrap();
        assert_eq!(g.node_count(), 15);
        assert_eq!(g.multi_index(7), vec![1, 2]);
        assert_eq!(g.flat_index(&[1, 2]), 7);
        assert_eq!(g.stride(0), 5);
        assert_eq!(g.stride(1), 1);
        assert_eq!(g.position(7), vec![0.5, 1.0]);
        assert_eq!(g.spacings(), vec![0.5, 0.5]);
    }

    #[test]
    fn trapezoid_weights_sum_to_volume() {
        let g = GridFunction::zeros(3, vec![0.0; 3], vec![1.0, 2.0, 0.5], vec![4, 6, 3]).unwrap();
        let total: f64 = (0..g.node_count()).map(|i| g.trapezoid_weight(i)).sum();
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn derivatives_exact_on_quadratics() {
        let g = line(9, |x| x * x);
        let d = g.partial(0);
        for i in 0..9 {
            let x = g.position(i)[0];
            assert!((d.value(i)[0] - 2.0 * x).abs() < 1e-12);
        }
        let d2 = g.second_partial(0).unwrap();
        assert!(d2.coeffs().chunks(2).all(|c| (c[0] - 2.0).abs() < 1e-10));
    }

    #[test]
    fn two_node_axis_uses_forward_difference() {
        let g = line(2, |x| 3.0 * x + 1.0);
        assert!(g.partial(0).coeffs().chunks(2).all(|c| (c[0] - 3.0).abs() < 1e-14));
        assert!(g.second_partial(0).is_err());
    }

    #[test]
    fn rejects_malformed_grids() {
        assert!(GridFunction::zeros(2, vec![0.0, 0.0], vec![1.0, 1.0], vec![1, 4]).is_err());
        assert!(GridFunction::zeros(2, vec![0.0, 1.0], vec![1.0, 1.0], vec![3, 4]).is_err());
        assert!(GridFunction::from_coeffs(1, vec![0.0], vec![1.0], vec![3], vec![0.0; 5]).is_err());
    }

    #[test]
    fn file_format_round_trip() {
        let mut g = GridFunction::from_fn(2, vec![-1.0, -1.0], vec![1.0, 1.0], vec![2, 3], |x, out| {
            out[0] = x[0];
            out[3] = x[1];
        })
        .unwrap();
        g.set_weight(Some(2.5));
        let text = serde_json::to_string(&g).unwrap();
        assert!(text.starts_with(r#"{"n":2,"box":[[-1.0,1.0],[-1.0,1.0]],"shape":[2,3],"weight":2.5,"values":[[-1.0,0.0,0.0,-1.0],"#));
        let back: GridFunction = serde_json::from_str(&text).unwrap();
        assert_eq!(back, g);
        let bad = r#"{"n":1,"box":[[0,1]],"shape":[2],"values":[[1,0],[2]]}"#;
        assert!(serde_json::from_str::<GridFunction>(bad).is_err());
    }
}
