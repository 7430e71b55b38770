//! The two similarity functions: late-interaction MaxSim for the teacher
//! and the pooled dot product for the student.

use crate::encoder::EncodedText;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// MaxSim: for every query token row, take the best dot product against any
/// document token row, and sum those maxima. Asymmetric — the first
/// argument is always the query side.
pub fn maxsim(query_tokens: &Matrix, doc_tokens: &Matrix) -> Result<f64> {
    if query_tokens.rows() == 0 || doc_tokens.rows() == 0 {
        return Err(Error::EmptyInput("maxsim token matrix"));
    }
    if query_tokens.cols() != doc_tokens.cols() {
        return Err(Error::DimensionMismatch {
            left: query_tokens.cols(),
            right: doc_tokens.cols(),
        });
    }
    let mut total = 0.0;
    for q in query_tokens.row_iter() {
        let mut best = f64::NEG_INFINITY;
        for d in doc_tokens.row_iter() {
            let s: f64 = q.iter().zip(d).map(|(a, b)| a * b).sum();
            if s > best {
                best = s;
            }
        }
        total += best;
    }
    Ok(total)
}

/// Per-query-row argmax over document rows, alongside the score. Ties keep
/// the first (lowest-index) document row. Used by the teacher trainer.
pub fn maxsim_with_argmax(query_tokens: &Matrix, doc_tokens: &Matrix) -> Result<(f64, Vec<usize>)> {
    if query_tokens.rows() == 0 || doc_tokens.rows() == 0 {
        return Err(Error::EmptyInput("maxsim token matrix"));
    }
    if query_tokens.cols() != doc_tokens.cols() {
        return Err(Error::DimensionMismatch {
            left: query_tokens.cols(),
            right: doc_tokens.cols(),
        });
    }
    let mut total = 0.0;
    let mut argmax = Vec::with_capacity(query_tokens.rows());
    for q in query_tokens.row_iter() {
        let mut best = f64::NEG_INFINITY;
        let mut best_j = 0;
        for (j, d) in doc_tokens.row_iter().enumerate() {
            let s: f64 = q.iter().zip(d).map(|(a, b)| a * b).sum();
            if s > best {
                best = s;
                best_j = j;
            }
        }
        total += best;
        argmax.push(best_j);
    }
    Ok((total, argmax))
}

/// Dot product of the two pooled vectors. Both encodings must carry a
/// pooled field.
pub fn pool_dot(query: &EncodedText, doc: &EncodedText) -> Result<f64> {
    let q = query.pooled.as_ref().ok_or(Error::MissingPooled)?;
    let d = doc.pooled.as_ref().ok_or(Error::MissingPooled)?;
    crate::linalg::dot(q, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dot;

    fn m(rows: &[Vec<f64>]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn maxsim_single_query_row_takes_best_match() {
        let q = m(&[vec![1.0, 0.0]]);
        let d = m(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(maxsim(&q, &d).unwrap(), 1.0);
    }

    #[test]
    fn maxsim_each_row_finds_its_match() {
        let q = m(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let d = m(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(maxsim(&q, &d).unwrap(), 2.0);
    }

    #[test]
    fn maxsim_matches_double_loop_oracle() {
        // 4×8 query vs 6×8 doc against exhaustive enumeration of all pairs.
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 33) as f64 / (1u64 << 31) as f64) - 0.5
        };
        let q_rows: Vec<Vec<f64>> = (0..4).map(|_| (0..8).map(|_| next()).collect()).collect();
        let d_rows: Vec<Vec<f64>> = (0..6).map(|_| (0..8).map(|_| next()).collect()).collect();
        let mut expect = 0.0;
        for qr in &q_rows {
            let mut best = f64::NEG_INFINITY;
            for dr in &d_rows {
                let s = dot(qr, dr).unwrap();
                if s > best {
                    best = s;
                }
            }
            expect += best;
        }
        let got = maxsim(&m(&q_rows), &m(&d_rows)).unwrap();
        assert!((got - expect).abs() < 1e-9);
    }

    #[test]
    fn maxsim_dimension_mismatch() {
        let q = m(&[vec![1.0, 0.0]]);
        let d = m(&[vec![1.0, 0.0, 0.0]]);
        assert!(matches!(
            maxsim(&q, &d),
            Err(Error::DimensionMismatch { left: 2, right: 3 })
        ));
    }

    #[test]
    fn maxsim_single_token_each_side_reduces_to_dot() {
        let q = m(&[vec![0.3, -0.7, 0.1]]);
        let d = m(&[vec![1.5, 0.2, -0.4]]);
        assert_eq!(
            maxsim(&q, &d).unwrap(),
            dot(q.row(0), d.row(0)).unwrap()
        );
    }

    #[test]
    fn maxsim_row_permutation_invariant() {
        let q = m(&[vec![1.0, 0.2], vec![-0.3, 0.9]]);
        let d = m(&[vec![0.5, 0.5], vec![0.9, -0.1], vec![0.0, 1.0]]);
        let d_perm = m(&[vec![0.0, 1.0], vec![0.5, 0.5], vec![0.9, -0.1]]);
        let q_perm = m(&[vec![-0.3, 0.9], vec![1.0, 0.2]]);
        let base = maxsim(&q, &d).unwrap();
        assert!((maxsim(&q, &d_perm).unwrap() - base).abs() < 1e-12);
        assert!((maxsim(&q_perm, &d).unwrap() - base).abs() < 1e-12);
    }

    #[test]
    fn maxsim_adding_doc_tokens_never_decreases() {
        let q = m(&[vec![1.0, 0.2], vec![-0.3, 0.9]]);
        let d = m(&[vec![0.5, 0.5], vec![0.9, -0.1]]);
        let d_more = m(&[vec![0.5, 0.5], vec![0.9, -0.1], vec![-2.0, -2.0]]);
        assert!(maxsim(&q, &d_more).unwrap() >= maxsim(&q, &d).unwrap());
    }

    #[test]
    fn pool_dot_basic_and_zero() {
        let q = crate::encoder::EncodedText {
            token_vectors: m(&[vec![1.0, 0.0]]),
            pooled: Some(vec![1.0, 0.0]),
            source_len: 1,
        };
        let d_same = crate::encoder::EncodedText {
            token_vectors: m(&[vec![1.0, 0.0]]),
            pooled: Some(vec![1.0, 0.0]),
            source_len: 1,
        };
        let d_zero = crate::encoder::EncodedText {
            token_vectors: m(&[vec![0.0, 0.0]]),
            pooled: Some(vec![0.0, 0.0]),
            source_len: 1,
        };
        assert_eq!(pool_dot(&q, &d_same).unwrap(), 1.0);
        let q23 = crate::encoder::EncodedText {
            token_vectors: m(&[vec![2.0, 3.0]]),
            pooled: Some(vec![2.0, 3.0]),
            source_len: 1,
        };
        assert_eq!(pool_dot(&q23, &d_zero).unwrap(), 0.0);
    }

    #[test]
    fn pool_dot_requires_pooled_field() {
        let teacher_style = crate::encoder::EncodedText {
            token_vectors: m(&[vec![1.0, 0.0]]),
            pooled: None,
            source_len: 1,
        };
        let pooled = crate::encoder::EncodedText {
            token_vectors: m(&[vec![1.0, 0.0]]),
            pooled: Some(vec![1.0, 0.0]),
            source_len: 1,
        };
        assert!(matches!(
            pool_dot(&teacher_style, &pooled),
            Err(Error::MissingPooled)
        ));
    }

    #[test]
    fn pool_dot_matches_dot_oracle() {
        let a = vec![0.3, -1.1, 0.7, 2.0];
        let b = vec![1.2, 0.4, -0.9, 0.5];
        let qa = crate::encoder::EncodedText {
            token_vectors: m(&[a.clone()]),
            pooled: Some(a.clone()),
            source_len: 1,
        };
        let db = crate::encoder::EncodedText {
            token_vectors: m(&[b.clone()]),
            pooled: Some(b.clone()),
            source_len: 1,
        };
        assert_eq!(pool_dot(&qa, &db).unwrap(), dot(&a, &b).unwrap());
    }
}
