//! Ranking metrics: MRR@k, Recall@k, NDCG@k over TREC-style runs and qrels.
//!
//! Exclusion rules follow the usual trec_eval conventions: run queries
//! without judgments are skipped (with a warning), recall skips queries
//! with no relevant documents, and NDCG skips queries whose ideal DCG is
//! zero. A grade of 1 or higher counts as relevant for the binary metrics.

use crate::trec::{Qrels, Run};

/// Metric selector, used by the fusion grid search and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    MrrAt(usize),
    RecallAt(usize),
    NdcgAt(usize),
}

impl Metric {
    pub fn evaluate(&self, run: &Run, qrels: &Qrels) -> f64 {
        match *self {
            Metric::MrrAt(k) => mrr_at_k(run, qrels, k),
            Metric::RecallAt(k) => recall_at_k(run, qrels, k),
            Metric::NdcgAt(k) => ndcg_at_k(run, qrels, k),
        }
    }

    pub fn name(&self) -> String {
        match *self {
            Metric::MrrAt(k) => format!("MRR@{k}"),
            Metric::RecallAt(k) => format!("R@{k}"),
            Metric::NdcgAt(k) => format!("NDCG@{k}"),
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = String;

    /// Accepts `mrr@10`, `recall@1000`, `ndcg@10` (case-insensitive).
    fn from_str(s: &str) -> Result<Self, String> {
        let lower = s.to_ascii_lowercase();
        let (name, k) = lower
            .split_once('@')
            .ok_or_else(|| format!("bad metric {s:?}, expected name@k"))?;
        let k: usize = k.parse().map_err(|e| format!("bad metric cutoff: {e}"))?;
        match name {
            "mrr" => Ok(Metric::MrrAt(k)),
            "recall" | "r" => Ok(Metric::RecallAt(k)),
            "ndcg" => Ok(Metric::NdcgAt(k)),
            other => Err(format!("unknown metric {other:?}")),
        }
    }
}

/// Mean over judged queries of 1/rank of the first relevant doc within the
/// top k, or 0 when none appears there.
pub fn mrr_at_k(run: &Run, qrels: &Qrels, k: usize) -> f64 {
    let mut total = 0.0;
    let mut count = 0usize;
    for (qid, list) in run {
        let Some(judged) = qrels.get(qid) else {
            log::warn!("query {qid} missing from qrels; excluded from MRR");
            continue;
        };
        count += 1;
        for (rank, (docid, _)) in list.iter().take(k).enumerate() {
            if judged.get(docid).copied().unwrap_or(0) >= 1 {
                total += 1.0 / (rank + 1) as f64;
                break;
            }
        }
    }
    if count == 0 {
        return 0.0;
    }
    total / count as f64
}

/// Mean over queries of |relevant ∩ top-k| / |relevant|.
pub fn recall_at_k(run: &Run, qrels: &Qrels, k: usize) -> f64 {
    let mut total = 0.0;
    let mut count = 0usize;
    for (qid, list) in run {
        let Some(judged) = qrels.get(qid) else {
            log::warn!("query {qid} missing from qrels; excluded from recall");
            continue;
        };
        let relevant: Vec<&String> = judged
            .iter()
            .filter(|(_, &g)| g >= 1)
            .map(|(d, _)| d)
            .collect();
        if relevant.is_empty() {
            log::warn!("query {qid} has no relevant docs; excluded from recall");
            continue;
        }
        count += 1;
        let hit = list
            .iter()
            .take(k)
            .filter(|(docid, _)| judged.get(docid).copied().unwrap_or(0) >= 1)
            .count();
        total += hit as f64 / relevant.len() as f64;
    }
    if count == 0 {
        return 0.0;
    }
    total / count as f64
}

/// Graded NDCG with gain 2^grade − 1 and discount 1/log₂(rank + 1),
/// normalized by the ideal DCG at the same cutoff.
pub fn ndcg_at_k(run: &Run, qrels: &Qrels, k: usize) -> f64 {
    let mut total = 0.0;
    let mut count = 0usize;
    for (qid, list) in run {
        let Some(judged) = qrels.get(qid) else {
            log::warn!("query {qid} missing from qrels; excluded from NDCG");
            continue;
        };
        let mut grades: Vec<u32> = judged.values().copied().filter(|&g| g > 0).collect();
        grades.sort_unstable_by(|a, b| b.cmp(a));
        let ideal: f64 = grades
            .iter()
            .take(k)
            .enumerate()
            .map(|(rank, &g)| gain(g) * discount(rank))
            .sum();
        if ideal == 0.0 {
            log::warn!("query {qid} has zero ideal DCG; excluded from NDCG");
            continue;
        }
        count += 1;
        let dcg: f64 = list
            .iter()
            .take(k)
            .enumerate()
            .map(|(rank, (docid, _))| {
                gain(judged.get(docid).copied().unwrap_or(0)) * discount(rank)
            })
            .sum();
        total += dcg / ideal;
    }
    if count == 0 {
        return 0.0;
    }
    total / count as f64
}

fn gain(grade: u32) -> f64 {
    2f64.powi(grade as i32) - 1.0
}

fn discount(zero_based_rank: usize) -> f64 {
    1.0 / ((zero_based_rank + 2) as f64).log2()
}

// ─────────────────────────────────────────────────────────────────────────────
// Tests
// ─────────────────────────────────────────────────────────────────────────────
