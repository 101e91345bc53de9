//! Dense universal Clifford algebra `Cl_n` over Euclidean `R^n`.
//!
//! Generators square to `-1` (`e_j * e_j = -1`) and anticommute. A multivector
//! stores one coefficient per basis blade; the blade `e_{i1} e_{i2} ... e_{ik}`
//! with `i1 < i2 < ... < ik` lives at the index whose bit `i - 1` is set for
//! every generator `e_i` it contains. With this signature a pure vector `x`
//! satisfies `x * conj(x) = |x|^2`.

use std::fmt;
use std::ops::{Add, AddAssign, Index, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest supported dimension.
pub const MAX_DIM: usize = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CliffordError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("unsupported dimension {0} (must be 1..={MAX_DIM})")]
    UnsupportedDimension(usize),
    #[error("expected {expected} coefficients for n = {n}, got {got}")]
    CoefficientCount { n: usize, expected: usize, got: usize },
}

/// Sign of the product of basis blades `a * b` under `e_j^2 = -1`.
///
/// The reordering sign counts transpositions needed to sort the generators;
/// every generator shared by both blades contributes one more factor `-1`.
#[inline]
pub fn blade_product_sign(a: usize, b: usize) -> f64 {
    let mut swaps = 0u32;
    let mut shifted = a >> 1;
    while shifted != 0 {
        swaps += (shifted & b).count_ones();
        shifted >>= 1;
    }
    swaps += (a & b).count_ones();
    if swaps % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Sign applied by Clifford conjugation to a blade of grade `r`.
#[inline]
pub fn conjugation_sign(grade: u32) -> f64 {
    match grade % 4 {
        0 | 3 => 1.0,
        _ => -1.0,
    }
}

/// Precomputed blade multiplication signs for one dimension.
///
/// `sign(i, j)` is the sign of `e_i * e_j`; the resulting blade is `i ^ j`.
#[derive(Debug, Clone)]
pub struct ProductTable {
    n: usize,
    signs: Vec<f64>,
}

impl ProductTable {
    pub fn new(n: usize) -> Self {
        let m = 1usize << n;
        let mut signs = Vec::with_capacity(m * m);
        for i in 0..m {
            for j in 0..m {
                signs.push(blade_product_sign(i, j));
            }
        }
        Self { n, signs }
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn sign(&self, i: usize, j: usize) -> f64 {
        self.signs[(i << self.n) | j]
    }

    /// Accumulates `scale * a * b` into `out`, all slices of length `2^n`.
    #[inline]
    pub fn mul_add_into(&self, a: &[f64], b: &[f64], scale: f64, out: &mut [f64]) {
        for (i, &ai) in a.iter().enumerate() {
            if ai == 0.0 {
                continue;
            }
            let s = scale * ai;
            let row = &self.signs[i << self.n..(i + 1) << self.n];
            for (j, &bj) in b.iter().enumerate() {
                out[i ^ j] += row[j] * s * bj;
            }
        }
    }
}

/// Element of `Cl_n`, stored densely over the `2^n` basis blades.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMultivector", into = "RawMultivector")]
pub struct Multivector {
    n: usize,
    coeffs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawMultivector {
    n: usize,
    coeffs: Vec<f64>,
}

impl TryFrom<RawMultivector> for Multivector {
    type Error = CliffordError;

    fn try_from(raw: RawMultivector) -> Result<Self, Self::Error> {
        Multivector::from_coeffs(raw.n, raw.coeffs)
    }
}

impl From<Multivector> for RawMultivector {
    fn from(mv: Multivector) -> Self {
        RawMultivector {
            n: mv.n,
            coeffs: mv.coeffs,
        }
    }
}

fn check_dimension(n: usize) -> Result<(), CliffordError> {
    if n == 0 || n > MAX_DIM {
        Err(CliffordError::UnsupportedDimension(n))
    } else {
        Ok(())
    }
}

impl Multivector {
    pub fn zero(n: usize) -> Result<Self, CliffordError> {
        check_dimension(n)?;
        Ok(Self {
            n,
            coeffs: vec![0.0; 1 << n],
        })
    }

    pub fn scalar(n: usize, value: f64) -> Result<Self, CliffordError> {
        let mut mv = Self::zero(n)?;
        mv.coeffs[0] = value;
        Ok(mv)
    }

    /// Unit basis blade identified by its bit mask.
    pub fn blade(n: usize, mask: usize) -> Result<Self, CliffordError> {
        let mut mv = Self::zero(n)?;
        let len = mv.coeffs.len();
        mv.coeffs[mask % len] = 1.0;
        Ok(mv)
    }

    /// Generator `e_j`, with `j` counted from 1.
    pub fn generator(n: usize, j: usize) -> Result<Self, CliffordError> {
        assert!(j >= 1 && j <= n, "generator index {j} out of range for n = {n}");
        Self::blade(n, 1 << (j - 1))
    }

    pub fn from_coeffs(n: usize, coeffs: Vec<f64>) -> Result<Self, CliffordError> {
        check_dimension(n)?;
        let expected = 1 << n;
        if coeffs.len() != expected {
            return Err(CliffordError::CoefficientCount {
                n,
                expected,
                got: coeffs.len(),
            });
        }
        Ok(Self { n, coeffs })
    }

    /// Grade-1 multivector `sum_j x_j e_j`; the dimension is `x.len()`.
    pub fn vector_from_point(x: &[f64]) -> Result<Self, CliffordError> {
        let mut mv = Self::zero(x.len())?;
        for (j, &xj) in x.iter().enumerate() {
            mv.coeffs[1 << j] = xj;
        }
        Ok(mv)
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn scalar_part(&self) -> f64 {
        self.coeffs[0]
    }

    /// Euclidean norm of the coefficient array.
    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    /// True when every coefficient outside grade `r` is exactly zero.
    pub fn is_grade(&self, r: u32) -> bool {
        self.coeffs
            .iter()
            .enumerate()
            .all(|(mask, &c)| c == 0.0 || (mask as u32).count_ones() == r)
    }

    /// Projection onto grade `r`.
    pub fn grade_part(&self, r: u32) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(mask, &c)| if (mask as u32).count_ones() == r { c } else { 0.0 })
            .collect();
        Self { n: self.n, coeffs }
    }

    pub fn geometric_product(&self, other: &Self) -> Result<Self, CliffordError> {
        if self.n != other.n {
            return Err(CliffordError::DimensionMismatch {
                left: self.n,
                right: other.n,
            });
        }
        let mut out = vec![0.0; self.coeffs.len()];
        for (i, &a) in self.coeffs.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (j, &b) in other.coeffs.iter().enumerate() {
                if b == 0.0 {
                    continue;
                }
                out[i ^ j] += blade_product_sign(i, j) * a * b;
            }
        }
        Ok(Self {
            n: self.n,
            coeffs: out,
        })
    }

    /// Clifford conjugation: a grade-`r` blade picks up `(-1)^{r(r+1)/2}`.
    pub fn conjugate(&self) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(mask, &c)| conjugation_sign((mask as u32).count_ones()) * c)
            .collect();
        Self { n: self.n, coeffs }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            n: self.n,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    pub fn try_add(&self, other: &Self) -> Result<Self, CliffordError> {
        if self.n != other.n {
            return Err(CliffordError::DimensionMismatch {
                left: self.n,
                right: other.n,
            });
        }
        Ok(Self {
            n: self.n,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self, CliffordError> {
        self.try_add(&other.scale(-1.0))
    }
}

impl Index<usize> for Multivector {
    type Output = f64;

    fn index(&self, mask: usize) -> &f64 {
        &self.coeffs[mask]
    }
}

// Operator forms panic on dimension mismatch; use the `try_*` methods and
// `geometric_product` where the dimensions are not known to agree.

impl Add for &Multivector {
    type Output = Multivector;

    fn add(self, rhs: &Multivector) -> Multivector {
        self.try_add(rhs).expect("multivector dimensions differ")
    }
}

impl AddAssign<&Multivector> for Multivector {
    fn add_assign(&mut self, rhs: &Multivector) {
        assert_eq!(self.n, rhs.n, "multivector dimensions differ");
        for (a, b) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
            *a += b;
        }
    }
}

impl Sub for &Multivector {
    type Output = Multivector;

    fn sub(self, rhs: &Multivector) -> Multivector {
        self.try_sub(rhs).expect("multivector dimensions differ")
    }
}

impl Mul for &Multivector {
    type Output = Multivector;

    fn mul(self, rhs: &Multivector) -> Multivector {
        self.geometric_product(rhs)
            .expect("multivector dimensions differ")
    }
}

impl Mul<f64> for &Multivector {
    type Output = Multivector;

    fn mul(self, s: f64) -> Multivector {
        self.scale(s)
    }
}

impl Neg for &Multivector {
    type Output = Multivector;

    fn neg(self) -> Multivector {
        self.scale(-1.0)
    }
}

impl fmt::Display for Multivector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (mask, &c) in self.coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            if mask == 0 {
                write!(f, "{c}")?;
            } else {
                write!(f, "{c}e")?;
                for bit in 0..self.n {
                    if mask & (1 << bit) != 0 {
                        write!(f, "{}", bit + 1)?;
                    }
                }
            }
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_one_is_identity() {
        let one = Multivector::scalar(3, 1.0).unwrap();
        let b = Multivector::from_coeffs(3, (0..8).map(|i| i as f64 - 2.5).collect()).unwrap();
        assert_eq!(&one * &b, b);
        assert_eq!(&b * &one, b);
    }

    #[test]
    fn generators_square_to_minus_one() {
        let e1 = Multivector::generator(2, 1).unwrap();
        assert_eq!(&e1 * &e1, Multivector::scalar(2, -1.0).unwrap());
    }

    #[test]
    fn generators_anticommute() {
        let e1 = Multivector::generator(2, 1).unwrap();
        let e2 = Multivector::generator(2, 2).unwrap();
        let e12 = Multivector::blade(2, 0b11).unwrap();
        assert_eq!(&e1 * &e2, e12);
        assert_eq!(&e2 * &e1, -&e12);
    }

    #[test]
    fn bivector_squares_to_minus_one() {
        let e12 = Multivector::blade(2, 0b11).unwrap();
        assert_eq!(&e12 * &e12, Multivector::scalar(2, -1.0).unwrap());
    }

    #[test]
    fn conjugation_signs_by_grade() {
        let c = Multivector::scalar(2, 4.0).unwrap();
        assert_eq!(c.conjugate(), c);
        let e1 = Multivector::generator(2, 1).unwrap();
        assert_eq!(e1.conjugate(), -&e1);
        let e12 = Multivector::blade(2, 0b11).unwrap();
        assert_eq!(e12.conjugate(), -&e12);
        let e123 = Multivector::blade(3, 0b111).unwrap();
        assert_eq!(e123.conjugate(), e123);
    }

    #[test]
    fn vector_times_conjugate_is_squared_norm() {
        let x = Multivector::vector_from_point(&[3.0, 4.0]).unwrap();
        let prod = &x * &x.conjugate();
        assert_eq!(prod, Multivector::scalar(2, 25.0).unwrap());
    }

    #[test]
    fn vector_from_point_layout() {
        assert!(Multivector::vector_from_point(&[0.0, 0.0]).unwrap().is_zero());
        assert_eq!(
            Multivector::vector_from_point(&[1.0, 0.0, 0.0]).unwrap(),
            Multivector::generator(3, 1).unwrap()
        );
        let v = Multivector::vector_from_point(&[1.0, -2.0, 2.0]).unwrap();
        assert!(v.is_grade(1));
        assert_eq!(v.norm(), 3.0);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let a = Multivector::scalar(2, 1.0).unwrap();
        let b = Multivector::scalar(3, 1.0).unwrap();
        assert!(matches!(
            a.geometric_product(&b),
            Err(CliffordError::DimensionMismatch { left: 2, right: 3 })
        ));
    }

    #[test]
    fn unsupported_dimensions() {
        assert!(Multivector::zero(0).is_err());
        assert!(Multivector::zero(MAX_DIM + 1).is_err());
        assert!(Multivector::from_coeffs(2, vec![0.0; 3]).is_err());
    }

    #[test]
    fn product_table_matches_dense_product() {
        let n = 3;
        let table = ProductTable::new(n);
        let a: Vec<f64> = (0..8).map(|i| (i as f64 * 0.7).sin()).collect();
        let b: Vec<f64> = (0..8).map(|i| (i as f64 * 1.3).cos()).collect();
        let mut out = vec![0.0; 8];
        table.mul_add_into(&a, &b, 2.0, &mut out);
        let dense = &Multivector::from_coeffs(n, a).unwrap()
            * &Multivector::from_coeffs(n, b).unwrap();
        for (x, y) in out.iter().zip(dense.coeffs()) {
            assert!((x - 2.0 * y).abs() < 1e-14);
        }
    }

    #[test]
    fn json_round_trip_and_validation() {
        let v = Multivector::vector_from_point(&[1.5, -0.25]).unwrap();
        let text = serde_json::to_string(&v).unwrap();
        assert_eq!(text, r#"{"n":2,"coeffs":[0.0,1.5,-0.25,0.0]}"#);
        let back: Multivector = serde_json::from_str(&text).unwrap();
        assert_eq!(back, v);
        assert!(serde_json::from_str::<Multivector>(r#"{"n":2,"coeffs":[1.0]}"#).is_err());
    }

    #[test]
    fn display_lists_blades() {
        let v = Multivector::from_coeffs(2, vec![1.0, 0.0, -2.0, 0.5]).unwrap();
        assert_eq!(v.to_string(), "1 + -2e2 + 0.5e12");
    }
}
