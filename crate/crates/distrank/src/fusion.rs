//! Hybrid sparse–dense score fusion with min-score substitution, plus the
//! grid search that picks the sparse weight α on labeled queries.
//!
//! For a doc present in both runs the fused score is α·sparse + dense.
//! A doc missing from one run substitutes that run's per-query minimum
//! score, so every candidate in the union gets a comparable value.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::eval::Metric;
use crate::trec::{sort_ranked, Qrels, RankedList, Run};

/// Fuse one query's ranked lists. Both lists must be non-empty (the
/// substituted minima would otherwise be undefined).
pub fn fuse_query(
    sparse: &RankedList,
    dense: &RankedList,
    alpha: f64,
    k: usize,
) -> Result<RankedList> {
    if alpha < 0.0 || !alpha.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "alpha must be finite and non-negative, got {alpha}"
        )));
    }
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if sparse.is_empty() || dense.is_empty() {
        return Err(Error::EmptyInput("ranked list"));
    }
    let sparse_min = sparse
        .iter()
        .map(|(_, s)| *s)
        .fold(f64::INFINITY, f64::min);
    let dense_min = dense.iter().map(|(_, s)| *s).fold(f64::INFINITY, f64::min);

    let mut candidates: BTreeMap<&str, (Option<f64>, Option<f64>)> = BTreeMap::new();
    for (id, s) in sparse {
        candidates.entry(id).or_default().0 = Some(*s);
    }
    for (id, s) in dense {
        candidates.entry(id).or_default().1 = Some(*s);
    }

    let mut fused: RankedList = candidates
        .into_iter()
        .map(|(id, (sp, ds))| {
            let score = match (sp, ds) {
                (Some(sp), Some(ds)) => alpha * sp + ds,
                (Some(sp), None) => alpha * sp + dense_min,
                (None, Some(ds)) => alpha * sparse_min + ds,
                (None, None) => unreachable!("candidate came from one of the runs"),
            };
            (id.to_string(), score)
        })
        .collect();
    sort_ranked(&mut fused);
    fused.truncate(k);
    Ok(fused)
}

/// Fuse whole runs query by query. The two runs must cover the same
/// queries; a query present on only one side is an error.
pub fn fuse(sparse: &Run, dense: &Run, alpha: f64, k: usize) -> Result<Run> {
    for qid in sparse.keys() {
        if !dense.contains_key(qid) {
            return Err(Error::RunMismatch(qid.clone()));
        }
    }
    let mut out = Run::new();
    for (qid, dense_list) in dense {
        let sparse_list = sparse
            .get(qid)
            .ok_or_else(|| Error::RunMismatch(qid.clone()))?;
        if sparse_list.is_empty() || dense_list.is_empty() {
            return Err(Error::EmptyRankedList(qid.clone()));
        }
        out.insert(qid.clone(), fuse_query(sparse_list, dense_list, alpha, k)?);
    }
    Ok(out)
}

/// The default α grid: 0.00 to 1.00 in steps of 0.02.
pub fn default_alpha_grid() -> Vec<f64> {
    (0..=50).map(|i| i as f64 * 0.02).collect()
}

/// Pick the α that maximizes the mean metric over the labeled queries.
/// Ties go to the smallest candidate.
pub fn tune_alpha(
    sparse: &Run,
    dense: &Run,
    qrels: &Qrels,
    candidates: &[f64],
    metric: Metric,
    k: usize,
) -> Result<f64> {
    if candidates.is_empty() {
        return Err(Error::EmptyInput("alpha candidates"));
    }
    if qrels.is_empty() {
        return Err(Error::EmptyInput("qrels"));
    }
    let mut best_alpha = f64::NAN;
    let mut best_score = f64::NEG_INFINITY;
    for &alpha in candidates {
        let fused = fuse(sparse, dense, alpha, k)?;
        let score = metric.evaluate(&fused, qrels);
        if score > best_score || (score == best_score && alpha < best_alpha) {
            best_score = score;
            best_alpha = alpha;
        }
    }
    Ok(best_alpha)
}

// ─────────────────────────────────────────────────────────────────────────────
// Tests
// ─────────────────────────────────────────────────────────────────────────────
