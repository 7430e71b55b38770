//! Okapi BM25 inverted index: first-stage sparse retrieval and the
//! training-time negative sampler.
//!
//! Tokenization is shared with the encoder module so negative sampling and
//! training see the same lexical view of the corpus.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dense_index::SearchResult;
use crate::encoder::{create, open, split_tokens};
use crate::error::{Error, Result};

pub const DEFAULT_K1: f64 = 0.9;
pub const DEFAULT_B: f64 = 0.4;
/// Depth of the BM25 pool negatives are drawn from.
pub const DEFAULT_NEGATIVE_POOL: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Posting {
    pub doc: u32,
    pub tf: u32,
}

/// Inverted index with per-document lengths. Immutable after build.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseIndex {
    /// term → postings, each list sorted by ascending doc id.
    pub postings: BTreeMap<String, Vec<Posting>>,
    pub doc_ids: Vec<String>,
    pub doc_lengths: Vec<u32>,
    pub avg_doc_length: f64,
    pub k1: f64,
    pub b: f64,
}

/// Build from `(doc_id, text)` pairs. Duplicate ids are an error.
pub fn build_sparse(corpus: &[(String, String)], k1: f64, b: f64) -> Result<SparseIndex> {
    if corpus.is_empty() {
        return Err(Error::EmptyInput("corpus"));
    }
    let mut seen = HashSet::new();
    let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
    let mut doc_ids = Vec::with_capacity(corpus.len());
    let mut doc_lengths = Vec::with_capacity(corpus.len());

    for (doc_idx, (id, text)) in corpus.iter().enumerate() {
        if !seen.insert(id.as_str()) {
            return Err(Error::DuplicateDocId(id.clone()));
        }
        let tokens = split_tokens(text);
        let mut tf: BTreeMap<&str, u32> = BTreeMap::new();
        for t in &tokens {
            *tf.entry(t.as_str()).or_insert(0) += 1;
        }
        for (term, count) in tf {
            postings.entry(term.to_string()).or_default().push(Posting {
                doc: doc_idx as u32,
                tf: count,
            });
        }
        doc_ids.push(id.clone());
        doc_lengths.push(tokens.len() as u32);
    }

    // Docs were visited in input order; re-sort each list by the doc id
    // string so the posting order matches the search tie-break rule.
    let by_id = |a: &Posting, b: &Posting| doc_ids[a.doc as usize].cmp(&doc_ids[b.doc as usize]);
    for list in postings.values_mut() {
        list.sort_by(by_id);
    }

    let avg_doc_length = doc_lengths.iter().map(|&l| l as f64).sum::<f64>() / doc_ids.len() as f64;
    Ok(SparseIndex {
        postings,
        doc_ids,
        doc_lengths,
        avg_doc_length,
        k1,
        b,
    })
}

impl SparseIndex {
    pub fn n_docs(&self) -> usize {
        self.doc_ids.len()
    }

    /// Smoothed idf: ln(1 + (N − df + 0.5)/(df + 0.5)). Positive even when
    /// the term occurs in every document.
    pub fn idf(&self, term: &str) -> Option<f64> {
        let df = self.postings.get(term)?.len() as f64;
        let n = self.n_docs() as f64;
        Some((1.0 + (n - df + 0.5) / (df + 0.5)).ln())
    }

    /// Okapi BM25 top-k. Query terms absent from the index contribute
    /// nothing; a query with no indexed terms yields an empty result.
    pub fn search(&self, query_tokens: &[String], k: usize) -> Result<SearchResult> {
        if k == 0 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        let mut scores: HashMap<u32, f64> = HashMap::new();
        for term in query_tokens {
            let Some(list) = self.postings.get(term.as_str()) else {
                continue;
            };
            let idf = self.idf(term).expect("term has postings");
            for posting in list {
                let tf = posting.tf as f64;
                let len = self.doc_lengths[posting.doc as usize] as f64;
                let norm = tf + self.k1 * (1.0 - self.b + self.b * len / self.avg_doc_length);
                *scores.entry(posting.doc).or_insert(0.0) += idf * tf / norm;
            }
        }
        let mut entries: Vec<(usize, f64)> =
            scores.into_iter().map(|(d, s)| (d as usize, s)).collect();
        entries.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .expect("scores are finite")
                .then_with(|| self.doc_ids[a.0].cmp(&self.doc_ids[b.0]))
        });
        entries.truncate(k);
        Ok(SearchResult {
            entries: entries
                .into_iter()
                .map(|(d, s)| (self.doc_ids[d].clone(), s))
                .collect(),
        })
    }

    /// Search raw text through the shared tokenizer.
    pub fn search_text(&self, query: &str, k: usize) -> Result<SearchResult> {
        self.search(&split_tokens(query), k)
    }

    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let file = create(path.as_ref())?;
        let w = BufWriter::new(file);
        serde_json::to_writer(w, self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self> {
        let file = open(path.as_ref())?;
        let r = BufReader::new(file);
        serde_json::from_reader(r).map_err(|e| Error::Format(e.to_string()))
    }
}

/// Uniform draw from the top-`pool_k` BM25 results that are not positives.
pub fn sample_bm25_negative<R: Rng>(
    index: &SparseIndex,
    query_tokens: &[String],
    positives: &HashSet<String>,
    rng: &mut R,
    pool_k: usize,
) -> Result<String> {
    let result = index.search(query_tokens, pool_k)?;
    let eligible: Vec<&String> = result
        .entries
        .iter()
        .map(|(id, _)| id)
        .filter(|id| !positives.contains(*id))
        .collect();
    if eligible.is_empty() {
        return Err(Error::NoEligibleNegative);
    }
    Ok(eligible[rng.random_range(0..eligible.len())].clone())
}

// ─────────────────────────────────────────────────────────────────────────────
// Tests
// ─────────────────────────────────────────────────────────────────────────────

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn corpus(rows: &[(&str, &str)]) -> Vec<(String, String)> {
        rows.iter()
            .map(|(id, text)| (id.to_string(), text.to_string()))
            .collect()
    }

    fn hand_corpus() -> Vec<(String, String)> {
        corpus(&[
            ("a", "cat sat mat"),
            ("b", "cat cat dog"),
            ("c", "bird song bird dawn"),
        ])
    }

    #[test]
    fn shared_term_has_two_posting_entries() {
        let idx = build_sparse(&hand_corpus(), DEFAULT_K1, DEFAULT_B).unwrap();
        assert_eq!(idx.postings["cat"].len(), 2);
        assert_eq!(idx.postings["bird"].len(), 1);
        assert_eq!(idx.postings["bird"][0].tf, 2);
    }

    #[test]
    fn term_in_every_doc_keeps_positive_idf() {
        let idx = build_sparse(
            &corpus(&[("a", "common x"), ("b", "common y"), ("c", "common z")]),
            DEFAULT_K1,
            DEFAULT_B,
        )
        .unwrap();
        // df = N: the +1 smoothing keeps idf above ln(1 + 0.5/3.5).
        let idf = idx.idf("common").unwrap();
        assert!(idf > 0.0);
        assert!((idf - (1.0f64 + 0.5 / 3.5).ln()).abs() < 1e-12);
    }

    #[test]
    fn idf_matches_closed_form_on_hand_corpus() {
        let idx = build_sparse(&hand_corpus(), DEFAULT_K1, DEFAULT_B).unwrap();
        let n = 3.0f64;
        for (term, df) in [("cat", 2.0f64), ("dog", 1.0), ("bird", 1.0)] {
            let expect = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
            assert!((idx.idf(term).unwrap() - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn duplicate_doc_id_is_error() {
        let r = build_sparse(
            &corpus(&[("a", "x"), ("a", "y")]),
            DEFAULT_K1,
            DEFAULT_B,
        );
        assert!(matches!(r, Err(Error::DuplicateDocId(id)) if id == "a"));
    }

    #[test]
    fn single_term_query_ranks_owning_doc_first() {
        let idx = build_sparse(&hand_corpus(), DEFAULT_K1, DEFAULT_B).unwrap();
        let result = idx.search(&["dog".to_string()], 10).unwrap();
        assert_eq!(result.entries[0].0, "b");
        assert_eq!(result.entries.len(), 1);
    }

    #[test]
    fn k1_zero_reduces_to_idf_sum() {
        let idx = build_sparse(&hand_corpus(), 0.0, DEFAULT_B).unwrap();
        let result = idx
            .search(&["cat".to_string(), "dog".to_string()], 10)
            .unwrap();
        let b_score = result.entries.iter().find(|(id, _)| id == "b").unwrap().1;
        let expect = idx.idf("cat").unwrap() + idx.idf("dog").unwrap();
        assert!((b_score - expect).abs() < 1e-12);
    }

    #[test]
    fn scores_match_hand_evaluated_formula() {
        // k1 = 0.9, b = 0.4; scores recomputed term by term by hand.
        let idx = build_sparse(&hand_corpus(), 0.9, 0.4).unwrap();
        let avg = (3.0 + 3.0 + 4.0) / 3.0;
        let result = idx.search(&["cat".to_string()], 10).unwrap();
        for (id, got) in &result.entries {
            let (tf, len) = match id.as_str() {
                "a" => (1.0, 3.0),
                "b" => (2.0, 3.0),
                _ => panic!("unexpected doc {id}"),
            };
            let idf = (1.0f64 + (3.0 - 2.0 + 0.5) / 2.5).ln();
            let expect = idf * tf / (tf + 0.9 * (1.0 - 0.4 + 0.4 * len / avg));
            assert!((got - expect).abs() < 1e-12, "doc {id}");
        }
        // Higher tf must win with equal lengths.
        assert_eq!(result.entries[0].0, "b");
    }

    #[test]
    fn unknown_terms_give_empty_result_not_error() {
        let idx = build_sparse(&hand_corpus(), DEFAULT_K1, DEFAULT_B).unwrap();
        let result = idx.search(&["zebra".to_string()], 10).unwrap();
        assert!(result.entries.is_empty());
    }

    #[test]
    fn tf_monotonicity() {
        let idx1 = build_sparse(
            &corpus(&[("a", "cat dog"), ("b", "fish fowl")]),
            DEFAULT_K1,
            DEFAULT_B,
        )
        .unwrap();
        let idx2 = build_sparse(
            &corpus(&[("a", "cat cat"), ("b", "fish fowl")]),
            DEFAULT_K1,
            DEFAULT_B,
        )
        .unwrap();
        let s1 = idx1.search(&["cat".to_string()], 1).unwrap().entries[0].1;
        let s2 = idx2.search(&["cat".to_string()], 1).unwrap().entries[0].1;
        assert!(s2 > s1);
    }

    #[test]
    fn prefix_property_over_k() {
        let idx = build_sparse(&hand_corpus(), DEFAULT_K1, DEFAULT_B).unwrap();
        let q: Vec<String> = ["cat", "bird", "mat"].iter().map(|s| s.to_string()).collect();
        let small = idx.search(&q, 1).unwrap();
        let large = idx.search(&q, 3).unwrap();
        assert_eq!(&large.entries[..1], &small.entries[..]);
    }

    #[test]
    fn negative_sampling_forced_choice() {
        let idx = build_sparse(&hand_corpus(), DEFAULT_K1, DEFAULT_B).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let positives: HashSet<String> = ["b".to_string()].into_iter().collect();
        let q: Vec<String> = vec!["cat".to_string()];
        // Only docs a and b contain "cat"; with b positive, a is forced.
        let neg = sample_bm25_negative(&idx, &q, &positives, &mut rng, 100).unwrap();
        assert_eq!(neg, "a");
    }

    #[test]
    fn negative_sampling_is_seeded() {
        let idx = build_sparse(&hand_corpus(), DEFAULT_K1, DEFAULT_B).unwrap();
        let positives = HashSet::new();
        let q: Vec<String> = vec!["cat".to_string(), "bird".to_string()];
        let a = sample_bm25_negative(&idx, &q, &positives, &mut ChaCha8Rng::seed_from_u64(7), 100)
            .unwrap();
        let b = sample_bm25_negative(&idx, &q, &positives, &mut ChaCha8Rng::seed_from_u64(7), 100)
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn negative_never_in_positive_set() {
        let idx = build_sparse(&hand_corpus(), DEFAULT_K1, DEFAULT_B).unwrap();
        let positives: HashSet<String> = ["a".to_string()].into_iter().collect();
        let q: Vec<String> = vec!["cat".to_string(), "mat".to_string()];
        for seed in 0..1000 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let neg = sample_bm25_negative(&idx, &q, &positives, &mut rng, 100).unwrap();
            assert!(!positives.contains(&neg));
        }
    }

    #[test]
    fn no_eligible_negative_is_error() {
        let idx = build_sparse(&hand_corpus(), DEFAULT_K1, DEFAULT_B).unwrap();
        let positives: HashSet<String> = ["a".to_string(), "b".to_string()].into_iter().collect();
        let q: Vec<String> = vec!["cat".to_string()];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(
            sample_bm25_negative(&idx, &q, &positives, &mut rng, 100),
            Err(Error::NoEligibleNegative)
        ));
    }

    #[test]
    fn save_load_round_trip() {
        let idx = build_sparse(&hand_corpus(), DEFAULT_K1, DEFAULT_B).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sparse.json");
        idx.save(&path).unwrap();
        assert_eq!(SparseIndex::load(&path).unwrap(), idx);
    }

    #[test]
    fn scores_are_nonnegative() {
        let idx = build_sparse(&hand_corpus(), DEFAULT_K1, DEFAULT_B).unwrap();
        let q: Vec<String> = ["cat", "sat", "bird", "dawn"].iter().map(|s| s.to_string()).collect();
        for (_, s) in idx.search(&q, 10).unwrap().entries {
            assert!(s >= 0.0);
        }
    }
}
