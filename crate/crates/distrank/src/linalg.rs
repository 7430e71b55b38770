//! Minimal dense linear-algebra kernels shared by the rest of the crate.
//!
//! Everything computes in f64. Persisted artifacts (embedding tables,
//! projections, index vectors) quantize to f32 at the file boundary; the
//! quantization lives in the owning modules, not here.

use crate::error::{Error, Result};

// ─────────────────────────────────────────────────────────────────────────────
// Vector kernels
// ─────────────────────────────────────────────────────────────────────────────

/// Inner product of two equal-length vectors.
pub fn dot(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput("dot"));
    }
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(a.iter().zip(b).map(|(x, y)| x * y).sum())
}

/// Euclidean norm.
pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Scale a vector to unit Euclidean norm. Errors on the zero vector.
pub fn l2_normalize(v: &[f64]) -> Result<Vec<f64>> {
    let norm = l2_norm(v);
    if norm == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok(v.iter().map(|x| x / norm).collect())
}

/// Temperature softmax with max-subtraction so large scores cannot overflow.
pub fn softmax(scores: &[f64], temperature: f64) -> Result<Vec<f64>> {
    if scores.is_empty() {
        return Err(Error::EmptyInput("softmax"));
    }
    if temperature <= 0.0 || !temperature.is_finite() {
        return Err(Error::NonPositiveTemperature(temperature));
    }
    let scaled: Vec<f64> = scores.iter().map(|s| s / temperature).collect();
    let max = scaled.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scaled.iter().map(|s| (s - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / sum).collect())
}

/// KL divergence sum p̂ᵢ·ln(p̂ᵢ/pᵢ) with the convention 0·ln(0/x) = 0.
///
/// Both arguments must be probability vectors of equal length; a zero
/// reference probability opposite positive mass is an error (the divergence
/// would be infinite). The result is clamped at 0 so rounding on
/// near-identical distributions cannot produce a negative value.
pub fn kl_divergence(p_hat: &[f64], p: &[f64]) -> Result<f64> {
    if p_hat.len() != p.len() {
        return Err(Error::DimensionMismatch {
            left: p_hat.len(),
            right: p.len(),
        });
    }
    check_distribution(p_hat)?;
    check_distribution(p)?;
    let mut sum = 0.0;
    for (i, (&ph, &q)) in p_hat.iter().zip(p).enumerate() {
        if ph == 0.0 {
            continue;
        }
        if q == 0.0 {
            return Err(Error::InfiniteDivergence { index: i });
        }
        sum += ph * (ph / q).ln();
    }
    Ok(sum.max(0.0))
}

fn check_distribution(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::EmptyInput("distribution"));
    }
    if p.iter().any(|&x| !(0.0..=1.0 + 1e-9).contains(&x)) {
        return Err(Error::NotADistribution("entry outside [0, 1]".into()));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(Error::NotADistribution(format!("sums to {sum}")));
    }
    Ok(())
}

// ─────────────────────────────────────────────────────────────────────────────
// Matrix
// ─────────────────────────────────────────────────────────────────────────────

/// Row-major dense f64 matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            values: vec![0.0; rows * cols],
        }
    }

    pub fn from_values(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                left: rows * cols,
                right: values.len(),
            });
        }
        Ok(Matrix { rows, cols, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyInput("matrix rows"));
        }
        let cols = rows[0].len();
        let mut values = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    left: cols,
                    right: r.len(),
                });
            }
            values.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            values,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.values[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.cols)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.values[r * self.cols + c] = v;
    }

    /// self (m×k) · rhs (k×n) → m×n.
    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch {
                left: self.cols,
                right: rhs.rows,
            });
        }
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let a_row = self.row(i);
            let out_row = out.row_mut(i);
            for (k, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let b_row = rhs.row(k);
                for (j, &b) in b_row.iter().enumerate() {
                    out_row[j] += a * b;
                }
            }
        }
        Ok(out)
    }

    /// Project a single row vector: v (1×k) · self (k×n) → n.
    pub fn project(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.rows {
            return Err(Error::DimensionMismatch {
                left: v.len(),
                right: self.rows,
            });
        }
        let mut out = vec![0.0; self.cols];
        for (k, &a) in v.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (j, &b) in self.row(k).iter().enumerate() {
                out[j] += a * b;
            }
        }
        Ok(out)
    }

    /// Mean of the rows, as a length-`cols` vector.
    pub fn column_mean(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.cols];
        for row in self.row_iter() {
            for (m, &v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        let n = self.rows as f64;
        for m in &mut mean {
            *m /= n;
        }
        mean
    }

    /// self += factor · other. Shapes must match.
    pub fn scaled_add(&mut self, other: &Matrix, factor: f64) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch {
                left: self.values.len(),
                right: other.values.len(),
            });
        }
        for (a, &b) in self.values.iter_mut().zip(&other.values) {
            *a += factor * b;
        }
        Ok(())
    }

    /// Rank-1 update: self += scale · col ⊗ row, where col has `rows`
    /// entries and row has `cols` entries.
    pub fn add_outer(&mut self, col: &[f64], row: &[f64], scale: f64) -> Result<()> {
        if col.len() != self.rows || row.len() != self.cols {
            return Err(Error::DimensionMismatch {
                left: col.len() * row.len(),
                right: self.values.len(),
            });
        }
        for (i, &c) in col.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let out_row = self.row_mut(i);
            for (o, &r) in out_row.iter_mut().zip(row) {
                *o += scale * c * r;
            }
        }
        Ok(())
    }

    pub fn frobenius_norm(&self) -> f64 {
        l2_norm(&self.values)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

// ─────────────────────────────────────────────────────────────────────────────
// Tests
// ─────────────────────────────────────────────────────────────────────────────


#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    fn arb_scores() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-30.0f64..30.0, 1..12)
    }

    fn arb_distribution() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(0.01f64..1.0, 2..8).prop_map(|v| {
            let s: f64 = v.iter().sum();
            v.into_iter().map(|x| x / s).collect()
        })
    }

    proptest! {
        #[test]
        fn softmax_sums_to_one(scores in arb_scores()) {
            for tau in [0.05, 0.25, 1.0, 10.0] {
                let p = softmax(&scores, tau).unwrap();
                let sum: f64 = p.iter().sum();
                prop_assert!((sum - 1.0).abs() < 1e-9);
                prop_assert!(p.iter().all(|&x| (0.0..=1.0).contains(&x)));
            }
        }

        /// Entries stay strictly positive while sᵢ/τ differences are small
        /// enough not to underflow.
        #[test]
        fn softmax_entries_positive(scores in proptest::collection::vec(-15.0f64..15.0, 1..12)) {
            for tau in [0.05, 0.25, 1.0, 10.0] {
                let p = softmax(&scores, tau).unwrap();
                prop_assert!(p.iter().all(|&x| x > 0.0 && x <= 1.0));
            }
        }

        #[test]
        fn softmax_shift_invariant(scores in arb_scores(), shift in -10.0f64..10.0) {
            for tau in [0.05, 0.25, 1.0, 10.0] {
                let a = softmax(&scores, tau).unwrap();
                let shifted: Vec<f64> = scores.iter().map(|s| s + shift).collect();
                let b = softmax(&shifted, tau).unwrap();
                for (x, y) in a.iter().zip(&b) {
                    prop_assert!((x - y).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn kl_nonnegative_and_zero_on_self(p_hat in arb_distribution(), noise in arb_distribution()) {
            prop_assert_eq!(kl_divergence(&p_hat, &p_hat).unwrap(), 0.0);
            if p_hat.len() == noise.len() {
                prop_assert!(kl_divergence(&p_hat, &noise).unwrap() >= 0.0);
            }
        }

        #[test]
        fn normalize_idempotent(v in proptest::collection::vec(-5.0f64..5.0, 1..10)) {
            prop_assume!(l2_norm(&v) > 1e-6);
            let once = l2_normalize(&v).unwrap();
            let twice = l2_normalize(&once).unwrap();
            prop_assert!((l2_norm(&once) - 1.0).abs() < 1e-6);
            for (a, b) in once.iter().zip(&twice) {
                prop_assert!((a - b).abs() < 1e-6);
            }
        }
    }
}
