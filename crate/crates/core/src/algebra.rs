//! Vector-field algebra on flat `N x d` arrays: means, deviations from the
//! mean, dispersion sums and the symmetric-weight alignment identity.
//!
//! Arrays are row-major: agent `i` occupies `data[i * dim..(i + 1) * dim]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Arithmetic mean of the rows of an `N x d` array.
pub fn mean(vectors: &[f64], dim: usize) -> Vec<f64> {
    let mut acc = vec![0.0; dim];
    let n = vectors.len() / dim;
    if n == 0 {
        return acc;
    }
    // shifted by the first row so identical rows average exactly
    let base = &vectors[..dim];
    for row in vectors.chunks_exact(dim).skip(1) {
        for ((a, v), b) in acc.iter_mut().zip(row).zip(base) {
            *a += v - b;
        }
    }
    for (a, b) in acc.iter_mut().zip(base) {
        *a = b + *a / n as f64;
    }
    acc
}

/// Deviations `a_i - mean(a)` of every row.
pub fn deviations(vectors: &[f64], dim: usize) -> Vec<f64> {
    let m = mean(vectors, dim);
    let mut out = vectors.to_vec();
    for row in out.chunks_exact_mut(dim) {
        for (a, c) in row.iter_mut().zip(&m) {
            *a -= c;
        }
    }
    out
}

/// `(1/N) sum_i |a_i - mean|^2`, the O(Nd) form of the dispersion functional.
pub fn spread(vectors: &[f64], dim: usize) -> f64 {
    let n = vectors.len() / dim;
    if n == 0 {
        return 0.0;
    }
    let m = mean(vectors, dim);
    let mut acc = 0.0;
    for row in vectors.chunks_exact(dim) {
        for (a, c) in row.iter().zip(&m) {
            let t = a - c;
            acc += t * t;
        }
    }
    acc / n as f64
}

/// `(1/2N^2) sum_{i,j} |a_i - a_j|^2`, the O(N^2 d) pairwise form.
pub fn spread_pairwise(vectors: &[f64], dim: usize) -> f64 {
    let n = vectors.len() / dim;
    if n == 0 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..n {
        let ai = &vectors[i * dim..(i + 1) * dim];
        for j in 0..n {
            let aj = &vectors[j * dim..(j + 1) * dim];
            acc += sq_dist(ai, aj);
        }
    }
    acc / (2.0 * (n * n) as f64)
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Dense `N x N` matrix of interaction weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightMatrix {
    n: usize,
    data: Vec<f64>,
}

impl WeightMatrix {
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self { n, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Shape(format!(
                "weight matrix rows must all have length {n}"
            )));
        }
        Ok(Self {
            n,
            data: rows.concat(),
        })
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn constant(n: usize, value: f64) -> Self {
        Self {
            n,
            data: vec![value; n * n],
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.row(i).iter().sum()
    }

    pub fn max_row_sum(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row_sum(i))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_entry(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Exact symmetry check (`w_ij == w_ji` bitwise).
    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (i + 1..self.n).all(|j| self.get(i, j) == self.get(j, i)))
    }
}

/// Both sides of the symmetric-weight alignment identity
///
/// ```text
/// (1/N^2) sum_ij w_ij <a_j - a_i, a_i>  ==  -(1/2N^2) sum_ij w_ij |a_i - a_j|^2
/// ```
///
/// Returned as `(lhs, rhs)`. The two double sums are evaluated separately so
/// the pair can serve as an oracle for code that relies on the identity.
pub fn weighted_alignment_quadratic(
    weights: &WeightMatrix,
    vectors: &[f64],
    dim: usize,
) -> Result<(f64, f64)> {
    let n = weights.size();
    if vectors.len() != n * dim {
        return Err(Error::Shape(format!(
            "expected {n} x {dim} vectors, got {} entries",
            vectors.len()
        )));
    }
    if !weights.is_symmetric() {
        return Err(Error::Contract("weight matrix must be symmetric".into()));
    }
    let norm = (n * n) as f64;
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for i in 0..n {
        let ai = &vectors[i * dim..(i + 1) * dim];
        for j in 0..n {
            let aj = &vectors[j * dim..(j + 1) * dim];
            let w = weights.get(i, j);
            let inner: f64 = aj.iter().zip(ai).map(|(x, y)| (x - y) * y).sum();
            lhs += w * inner;
            rhs += w * sq_dist(ai, aj);
        }
    }
    Ok((lhs / norm, -rhs / (2.0 * norm)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deviations_of_two_points() {
        let d = deviations(&[1.0, 0.0, 3.0, 0.0], 2);
        assert_eq!(d, vec![-1.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn deviations_of_equal_vectors_vanish() {
        let d = deviations(&[0.3, -2.0, 0.3, -2.0, 0.3, -2.0], 2);
        assert!(d.iter().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn alignment_identity_two_points() {
        let w = WeightMatrix::constant(2, 1.0);
        let (l, r) = weighted_alignment_quadratic(&w, &[1.0, 0.0, -1.0, 0.0], 2).unwrap();
        assert_eq!(l, -1.0);
        assert_eq!(r, -1.0);
    }

    #[test]
    fn alignment_identity_equal_vectors() {
        let w = WeightMatrix::from_fn(3, |i, j| 1.0 + (i + j) as f64);
        let (l, r) = weighted_alignment_quadratic(&w, &[2.0; 6], 2).unwrap();
        assert_eq!((l, r), (0.0, 0.0));
    }

    #[test]
    fn alignment_rejects_asymmetric_weights() {
        let w = WeightMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 1.0]]).unwrap();
        let err = weighted_alignment_quadratic(&w, &[0.0, 1.0], 1).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }

    #[test]
    fn alignment_rejects_shape_mismatch() {
        let w = WeightMatrix::identity(3);
        assert!(matches!(
            weighted_alignment_quadratic(&w, &[0.0, 1.0], 1),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn ragged_rows_rejected() {
        assert!(WeightMatrix::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }
}
