//! Seeded synthetic corpus, query, qrels, and triplet generator.
//!
//! Documents are drawn from a topic-token mixture. Each topic owns an
//! exclusive token slice, with a configurable fraction of document tokens
//! coming from a shared cross-topic pool; topical token frequencies are
//! Zipf-skewed so BM25-sampled negatives are lexically close to the
//! positive. Within its topic slice every document additionally reserves a
//! few identity tokens of its own (repeated, like entity mentions), which
//! is what makes ranking *within* a topic solvable for pooled
//! representations and not just for exact token matching.
//!
//! Queries anchor on two of their relevant passage's identity tokens. The
//! remaining slots either copy a passage token or paraphrase one: every
//! common topic token has a partner token that occurs in queries only,
//! never in the corpus. Exact lexical matching (and BM25) gets nothing
//! from partner tokens; a trained encoder can learn the pairing from the
//! triplets, which is what separates trained from untrained scorers here.
//!
//! Generation is single-threaded on one seeded RNG; the same config always
//! yields the same dataset.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Zipf};

use crate::error::{Error, Result};
use crate::sparse_index::{build_sparse, sample_bm25_negative, DEFAULT_B, DEFAULT_K1,
    DEFAULT_NEGATIVE_POOL};
use crate::trec::Qrels;

/// Identity tokens reserved per document, and how often each occurs.
const IDENTITY_TOKENS: usize = 3;
const IDENTITY_REPEATS: usize = 5;
/// Identity tokens an anchored query copies from its relevant passage.
const QUERY_IDENTITY_TOKENS: usize = 3;
/// Fraction of queries that carry identity anchors at all. The rest are
/// pure topical paraphrases and separate trained from untrained scorers.
const ANCHORED_QUERY_RATE: f64 = 0.7;
/// Smallest usable common (non-identity) pool per topic.
const MIN_COMMON_TOKENS: usize = 8;
const ZIPF_EXPONENT: f64 = 1.1;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub num_topics: usize,
    pub docs_per_topic: usize,
    pub vocab_size: usize,
    /// Fraction of doc tokens drawn from the shared cross-topic pool.
    pub topic_vocab_overlap: f64,
    /// Fraction of query tokens paraphrased: drawn from the topic pool at
    /// large instead of copied from the relevant passage. Exact lexical
    /// match is insufficient once this is above zero.
    pub query_noise: f64,
    /// Fraction of training triplets whose labeled positive is replaced by
    /// a random same-topic document. Mimics annotation noise in harvested
    /// training pairs; qrels always keep the true judgment.
    pub label_noise: f64,
    pub query_len: usize,
    pub doc_len: usize,
    /// Total query count; the last `heldout_fraction` of them are reserved
    /// for evaluation and get no training triplet.
    pub num_queries: usize,
    pub heldout_fraction: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            num_topics: 20,
            docs_per_topic: 50,
            vocab_size: 5000,
            topic_vocab_overlap: 0.3,
            query_noise: 0.45,
            label_noise: 0.3,
            query_len: 8,
            doc_len: 24,
            num_queries: 2000,
            heldout_fraction: 0.25,
            seed: 42,
        }
    }
}

/// Everything one run of the generator produces.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    /// (doc id, text) in topic-major order.
    pub corpus: Vec<(String, String)>,
    /// Topic index of each corpus entry.
    pub doc_topics: Vec<usize>,
    /// (query id, text) for the training split.
    pub train_queries: Vec<(String, String)>,
    /// (query id, text) reserved for evaluation.
    pub heldout_queries: Vec<(String, String)>,
    /// Grade-1 judgment for every query's single relevant passage.
    pub qrels: Qrels,
    /// (query, positive, negative) texts for the training split.
    pub triples: Vec<(String, String, String)>,
}

pub fn generate(config: &SynthConfig) -> Result<SynthData> {
    validate(config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    // Token pools. The vocabulary splits into a shared cross-topic slice
    // followed by one exclusive slice per topic; each topic slice holds
    // its common pool, the query-side partner of each common token, and
    // per-document identity reserves.
    let tokens: Vec<String> = (0..config.vocab_size).map(|i| format!("w{i:05}")).collect();
    let shared_len = (config.vocab_size as f64 * config.topic_vocab_overlap).round() as usize;
    let per_topic = (config.vocab_size - shared_len) / config.num_topics;
    let common_len = (per_topic - config.docs_per_topic * IDENTITY_TOKENS) / 2;
    let shared_pool = &tokens[..shared_len];
    let common_pool = |topic: usize| -> &[String] {
        let start = shared_len + topic * per_topic;
        &tokens[start..start + common_len]
    };
    let partner_pool = |topic: usize| -> &[String] {
        let start = shared_len + topic * per_topic + common_len;
        &tokens[start..start + common_len]
    };
    let identity_pool = |topic: usize, doc: usize| -> &[String] {
        let start = shared_len + topic * per_topic + 2 * common_len + doc * IDENTITY_TOKENS;
        &tokens[start..start + IDENTITY_TOKENS]
    };

    let zipf_shared = if shared_len > 0 {
        Some(Zipf::new(shared_len as f64, ZIPF_EXPONENT).expect("valid zipf"))
    } else {
        None
    };
    let zipf_common = Zipf::new(common_len as f64, ZIPF_EXPONENT).expect("valid zipf");

    // Corpus, topic-major. Each document carries its identity mentions
    // plus a Zipf mixture of common and shared tokens, in shuffled order.
    let mut corpus = Vec::with_capacity(config.num_topics * config.docs_per_topic);
    let mut doc_topics = Vec::with_capacity(corpus.capacity());
    for topic in 0..config.num_topics {
        let common = common_pool(topic);
        for doc in 0..config.docs_per_topic {
            let identities = identity_pool(topic, doc);
            let mut words: Vec<&str> = Vec::with_capacity(config.doc_len);
            for mention in 0..IDENTITY_TOKENS * IDENTITY_REPEATS {
                words.push(&identities[mention % IDENTITY_TOKENS]);
            }
            while words.len() < config.doc_len {
                let from_shared = match &zipf_shared {
                    Some(_) => rng.random_bool(config.topic_vocab_overlap),
                    None => false,
                };
                let word = if from_shared {
                    let rank = zipf_shared.as_ref().unwrap().sample(&mut rng) as usize;
                    &shared_pool[rank.min(shared_len) - 1]
                } else {
                    let rank = zipf_common.sample(&mut rng) as usize;
                    &common[rank.min(common_len) - 1]
                };
                words.push(word);
            }
            words.shuffle(&mut rng);
            let id = format!("d{:05}", corpus.len());
            corpus.push((id, words.join(" ")));
            doc_topics.push(topic);
        }
    }

    // Queries: two identity anchors from the relevant passage; the other
    // slots copy a passage token, or paraphrase one of the passage's
    // common tokens by emitting its query-side partner instead.
    let mut queries = Vec::with_capacity(config.num_queries);
    let mut qrels = Qrels::new();
    for q in 0..config.num_queries {
        let topic = rng.random_range(0..config.num_topics);
        let doc = rng.random_range(0..config.docs_per_topic);
        let doc_idx = topic * config.docs_per_topic + doc;
        let (doc_id, doc_text) = &corpus[doc_idx];
        let doc_words: Vec<&str> = doc_text.split(' ').collect();
        let identities = identity_pool(topic, doc);
        let common = common_pool(topic);
        let partners = partner_pool(topic);
        let doc_commons: Vec<usize> = doc_words
            .iter()
            .filter_map(|w| common.iter().position(|c| c == w))
            .collect();
        // Copy slots draw from the passage's non-identity tokens so the
        // query shares searchable vocabulary with other documents.
        let mixture_words: Vec<&str> = doc_words
            .iter()
            .copied()
            .filter(|w| !identities.iter().any(|t| t == w))
            .collect();
        let copy_pool: &[&str] = if mixture_words.is_empty() {
            &doc_words
        } else {
            &mixture_words
        };
        // Anchored queries name the passage's identity tokens and mix
        // copies with paraphrases. Unanchored ones are pure paraphrase:
        // nothing in them occurs in the corpus, so lexical matching is
        // blind until a model has learned the partner pairing.
        let anchored = rng.random_bool(ANCHORED_QUERY_RATE);
        let mut words: Vec<&str> = Vec::with_capacity(config.query_len);
        if anchored {
            let mut order: Vec<usize> = (0..IDENTITY_TOKENS).collect();
            order.shuffle(&mut rng);
            for &pick in order.iter().take(QUERY_IDENTITY_TOKENS) {
                words.push(&identities[pick]);
            }
        }
        while words.len() < config.query_len {
            let paraphrase = !doc_commons.is_empty()
                && (!anchored || (config.query_noise > 0.0 && rng.random_bool(config.query_noise)));
            if paraphrase {
                let pick = doc_commons[rng.random_range(0..doc_commons.len())];
                words.push(&partners[pick]);
            } else {
                words.push(copy_pool[rng.random_range(0..copy_pool.len())]);
            }
        }
        let qid = format!("q{q:04}");
        qrels
            .entry(qid.clone())
            .or_default()
            .insert(doc_id.clone(), 1);
        queries.push((qid, words.join(" "), doc_idx));
    }

    // Split: the tail of the query list is held out for evaluation.
    let heldout = (config.num_queries as f64 * config.heldout_fraction).round() as usize;
    let train_count = config.num_queries - heldout;

    // BM25 negatives for the training split. When BM25 returns nothing
    // usable (a query can consist of tokens unique to its passage), fall
    // back to a random same-topic document.
    let index = build_sparse(&corpus, DEFAULT_K1, DEFAULT_B)?;
    let mut triples = Vec::with_capacity(train_count);
    for (_, text, doc_idx) in queries.iter().take(train_count) {
        let topic = doc_idx / config.docs_per_topic;
        let topic_range = (
            topic * config.docs_per_topic,
            (topic + 1) * config.docs_per_topic,
        );
        // Label noise: sometimes a neighbor gets credited instead of the
        // truly relevant passage.
        let labeled_idx = if config.label_noise > 0.0 && rng.random_bool(config.label_noise) {
            let mut other = topic_range.0 + rng.random_range(0..config.docs_per_topic);
            while other == *doc_idx {
                other = topic_range.0 + rng.random_range(0..config.docs_per_topic);
            }
            other
        } else {
            *doc_idx
        };
        let (pos_id, pos_text) = &corpus[labeled_idx];
        let positives: HashSet<String> = [pos_id.clone()].into_iter().collect();
        let query_tokens: Vec<String> = text.split(' ').map(str::to_string).collect();
        let neg_text = draw_negative(
            &index,
            &corpus,
            &query_tokens,
            &positives,
            pos_text,
            &mut rng,
        )?;
        triples.push((text.clone(), pos_text.clone(), neg_text));
    }

    let train_queries = queries
        .iter()
        .take(train_count)
        .map(|(id, text, _)| (id.clone(), text.clone()))
        .collect();
    let heldout_queries = queries
        .iter()
        .skip(train_count)
        .map(|(id, text, _)| (id.clone(), text.clone()))
        .collect();

    Ok(SynthData {
        corpus,
        doc_topics,
        train_queries,
        heldout_queries,
        qrels,
        triples,
    })
}

/// Draw a BM25 negative whose text differs from the positive; identical
/// texts under different ids would make an unusable triplet. Falls back
/// to a uniform corpus document when BM25 has no usable candidate (pure
/// paraphrase queries match nothing lexically).
fn draw_negative(
    index: &crate::sparse_index::SparseIndex,
    corpus: &[(String, String)],
    query_tokens: &[String],
    positives: &HashSet<String>,
    positive_text: &str,
    rng: &mut ChaCha8Rng,
) -> Result<String> {
    for _ in 0..16 {
        match sample_bm25_negative(index, query_tokens, positives, rng, DEFAULT_NEGATIVE_POOL) {
            Ok(neg_id) => {
                let neg_text = &corpus
                    .iter()
                    .find(|(id, _)| *id == neg_id)
                    .expect("sampled id exists")
                    .1;
                if neg_text != positive_text {
                    return Ok(neg_text.clone());
                }
            }
            Err(Error::NoEligibleNegative) => break,
            Err(e) => return Err(e),
        }
    }
    for _ in 0..64 {
        let idx = rng.random_range(0..corpus.len());
        let (id, text) = &corpus[idx];
        if !positives.contains(id) && text != positive_text {
            return Ok(text.clone());
        }
    }
    Err(Error::NoEligibleNegative)
}

fn validate(config: &SynthConfig) -> Result<()> {
    for (name, value) in [
        ("num_topics", config.num_topics),
        ("docs_per_topic", config.docs_per_topic),
        ("vocab_size", config.vocab_size),
        ("query_len", config.query_len),
        ("doc_len", config.doc_len),
        ("num_queries", config.num_queries),
    ] {
        if value == 0 {
            return Err(Error::InvalidParameter(format!("{name} must be at least 1")));
        }
    }
    if !(0.0..=1.0).contains(&config.topic_vocab_overlap) {
        return Err(Error::InvalidParameter(format!(
            "topic_vocab_overlap must be in [0, 1], got {}",
            config.topic_vocab_overlap
        )));
    }
    if !(0.0..=1.0).contains(&config.query_noise) {
        return Err(Error::InvalidParameter(format!(
            "query_noise must be in [0, 1], got {}",
            config.query_noise
        )));
    }
    if !(0.0..=1.0).contains(&config.label_noise) {
        return Err(Error::InvalidParameter(format!(
            "label_noise must be in [0, 1], got {}",
            config.label_noise
        )));
    }
    if config.label_noise > 0.0 && config.docs_per_topic < 2 {
        return Err(Error::InvalidParameter(
            "label_noise needs at least 2 docs per topic".into(),
        ));
    }
    if !(0.0..1.0).contains(&config.heldout_fraction) {
        return Err(Error::InvalidParameter(format!(
            "heldout_fraction must be in [0, 1), got {}",
            config.heldout_fraction
        )));
    }
    let heldout = (config.num_queries as f64 * config.heldout_fraction).round() as usize;
    if heldout >= config.num_queries {
        return Err(Error::InvalidParameter(
            "heldout fraction leaves no training queries".into(),
        ));
    }
    if config.query_len <= QUERY_IDENTITY_TOKENS {
        return Err(Error::InvalidParameter(format!(
            "query_len must exceed {QUERY_IDENTITY_TOKENS}"
        )));
    }
    let identity_span = IDENTITY_TOKENS * IDENTITY_REPEATS;
    if config.doc_len < identity_span + 4 {
        return Err(Error::InvalidParameter(format!(
            "doc_len must be at least {}",
            identity_span + 4
        )));
    }
    let shared = (config.vocab_size as f64 * config.topic_vocab_overlap).round() as usize;
    let per_topic_needed = config.docs_per_topic * IDENTITY_TOKENS + 2 * MIN_COMMON_TOKENS;
    let needed = shared + config.num_topics * per_topic_needed;
    if config.vocab_size < needed {
        return Err(Error::VocabTooSmall {
            topics: config.num_topics,
            needed,
            have: config.vocab_size,
        });
    }
    Ok(())
}

// ─────────────────────────────────────────────────────────────────────────────
// Tests
// ─────────────────────────────────────────────────────────────────────────────

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> SynthConfig {
        SynthConfig {
            num_topics: 4,
            docs_per_topic: 10,
            vocab_size: 240,
            topic_vocab_overlap: 0.2,
            query_noise: 0.4,
            label_noise: 0.2,
            query_len: 5,
            doc_len: 20,
            num_queries: 20,
            heldout_fraction: 0.25,
            seed: 7,
        }
    }

    #[test]
    fn fixed_seed_reproduces_dataset() {
        let a = generate(&small_config()).unwrap();
        let b = generate(&small_config()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn different_seed_changes_dataset() {
        let a = generate(&small_config()).unwrap();
        let b = generate(&SynthConfig {
            seed: 8,
            ..small_config()
        })
        .unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn shapes_match_config() {
        let cfg = small_config();
        let data = generate(&cfg).unwrap();
        assert_eq!(data.corpus.len(), 40);
        assert_eq!(data.doc_topics.len(), 40);
        assert_eq!(data.train_queries.len(), 15);
        assert_eq!(data.heldout_queries.len(), 5);
        assert_eq!(data.triples.len(), 15);
        assert_eq!(data.qrels.len(), 20);
        for (_, text) in &data.corpus {
            assert_eq!(text.split(' ').count(), cfg.doc_len);
        }
    }

    #[test]
    fn every_query_has_exactly_one_positive() {
        let data = generate(&small_config()).unwrap();
        for judged in data.qrels.values() {
            assert_eq!(judged.len(), 1);
            assert!(judged.values().all(|&g| g == 1));
        }
    }

    #[test]
    fn negatives_never_equal_positives() {
        let data = generate(&small_config()).unwrap();
        for (_, pos, neg) in &data.triples {
            assert_ne!(pos, neg);
        }
    }

    #[test]
    fn zero_overlap_keeps_bm25_within_topic() {
        let cfg = SynthConfig {
            topic_vocab_overlap: 0.0,
            ..small_config()
        };
        let data = generate(&cfg).unwrap();
        let index = build_sparse(&data.corpus, DEFAULT_K1, DEFAULT_B).unwrap();
        let topic_of: std::collections::HashMap<&str, usize> = data
            .corpus
            .iter()
            .zip(&data.doc_topics)
            .map(|((id, _), &t)| (id.as_str(), t))
            .collect();
        let mut nonempty = 0;
        for (qid, text) in data.train_queries.iter().chain(&data.heldout_queries) {
            let query_topic = {
                let pos = data.qrels[qid].keys().next().unwrap();
                topic_of[pos.as_str()]
            };
            // Pure-paraphrase queries legitimately match nothing; anchored
            // ones must stay within their topic.
            let result = index.search_text(text, 100).unwrap();
            nonempty += usize::from(!result.entries.is_empty());
            for (doc, _) in &result.entries {
                assert_eq!(topic_of[doc.as_str()], query_topic, "query {qid} leaked topics");
            }
        }
        assert!(nonempty > 0);
    }

    #[test]
    fn vocab_too_small_is_error() {
        let cfg = SynthConfig {
            vocab_size: 10,
            num_topics: 4,
            ..small_config()
        };
        assert!(matches!(generate(&cfg), Err(Error::VocabTooSmall { .. })));
    }

    #[test]
    fn bad_fractions_are_errors() {
        assert!(generate(&SynthConfig {
            topic_vocab_overlap: 1.5,
            ..small_config()
        })
        .is_err());
        assert!(generate(&SynthConfig {
            heldout_fraction: 1.0,
            ..small_config()
        })
        .is_err());
    }
}
