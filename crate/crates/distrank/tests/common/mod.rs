//! Shared pipeline helpers for the integration suites.

use std::collections::BTreeMap;

use distrank::datagen::{generate, SynthConfig, SynthData};
use distrank::dense_index::DenseIndex;
use distrank::distill::{tokenize_triplets, TrainingTriplet};
use distrank::encoder::{Encoder, Projection, Vocabulary, DEFAULT_PASSAGE_LEN, DEFAULT_QUERY_LEN};
use distrank::scoring::maxsim;
use distrank::trec::{Qrels, Run};

/// Everything a training-and-retrieval experiment needs, derived from one
/// synthetic dataset. Seed layout: the embedding table uses `seed`, the
/// initial projection `seed + 1`; trainers take their own seeds.
pub struct Pipeline {
    pub data: SynthData,
    pub encoder: Encoder,
    pub init: Projection,
    pub triplets: Vec<TrainingTriplet>,
    pub docs: Vec<(String, Vec<u32>)>,
    pub heldout_qrels: Qrels,
}

pub fn setup(config: &SynthConfig, token_dim: usize, output_dim: usize, seed: u64) -> Pipeline {
    let data = generate(config).expect("datagen");
    // The vocabulary covers what the training stage can see: corpus plus
    // training triples (query-side paraphrase tokens live only there).
    let vocab = Vocabulary::from_texts(
        data.corpus
            .iter()
            .map(|(_, t)| t.as_str())
            .chain(data.triples.iter().flat_map(|(q, p, n)| {
                [q.as_str(), p.as_str(), n.as_str()]
            })),
    );
    let encoder = Encoder::seeded(vocab, token_dim, seed);
    let init = Projection::seeded(token_dim, output_dim, seed.wrapping_add(1));
    let triplets = tokenize_triplets(
        &encoder,
        &data.triples,
        DEFAULT_QUERY_LEN,
        DEFAULT_PASSAGE_LEN,
    )
    .expect("triplets");
    let docs: Vec<(String, Vec<u32>)> = data
        .corpus
        .iter()
        .map(|(id, text)| {
            (
                id.clone(),
                encoder.tokenize(text, DEFAULT_PASSAGE_LEN).expect("tokenize doc"),
            )
        })
        .collect();
    let heldout_qrels: Qrels = data
        .heldout_queries
        .iter()
        .filter_map(|(qid, _)| data.qrels.get(qid).map(|j| (qid.clone(), j.clone())))
        .collect();
    Pipeline {
        data,
        encoder,
        init,
        triplets,
        docs,
        heldout_qrels,
    }
}

/// Retrieve with the pooled scorer through the dense index.
pub fn dense_run(
    encoder: &Encoder,
    proj: &Projection,
    index: &DenseIndex,
    queries: &[(String, String)],
    k: usize,
) -> Run {
    let mut run = Run::new();
    for (qid, text) in queries {
        let ids = encoder.tokenize(text, DEFAULT_QUERY_LEN).expect("tokenize query");
        let pooled = encoder
            .encode_pooled(&ids, proj)
            .expect("encode query")
            .pooled
            .expect("pooled set");
        let result = index.search(&pooled, k).expect("search");
        run.insert(qid.clone(), result.entries);
    }
    run
}

/// Retrieve with the late-interaction scorer by brute force over the
/// whole corpus.
pub fn teacher_run(
    encoder: &Encoder,
    proj: &Projection,
    docs: &[(String, Vec<u32>)],
    queries: &[(String, String)],
    k: usize,
) -> Run {
    let doc_encodings: Vec<(String, distrank::encoder::EncodedText)> = docs
        .iter()
        .map(|(id, ids)| {
            (
                id.clone(),
                encoder.encode_teacher_doc(ids, proj).expect("encode doc"),
            )
        })
        .collect();
    let mut run = Run::new();
    for (qid, text) in queries {
        let ids = encoder.tokenize(text, DEFAULT_QUERY_LEN).expect("tokenize query");
        let q = encoder.encode_teacher_query(&ids, proj).expect("encode query");
        let mut scored: Vec<(String, f64)> = doc_encodings
            .iter()
            .map(|(doc_id, d)| {
                (
                    doc_id.clone(),
                    maxsim(&q.token_vectors, &d.token_vectors).expect("maxsim"),
                )
            })
            .collect();
        scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
        scored.truncate(k);
        run.insert(qid.clone(), scored);
    }
    run
}

/// A compact synthetic config for tests that only need the shape of the
/// pipeline, not the full default dataset.
pub fn small_synth_config(seed: u64) -> SynthConfig {
    SynthConfig {
        num_topics: 4,
        docs_per_topic: 8,
        vocab_size: 220,
        topic_vocab_overlap: 0.2,
        query_noise: 0.4,
        label_noise: 0.25,
        query_len: 5,
        doc_len: 20,
        num_queries: 40,
        heldout_fraction: 0.25,
        seed,
    }
}

/// Restrict a qrels table to the queries of a run.
pub fn qrels_for(run: &Run, qrels: &Qrels) -> Qrels {
    run.keys()
        .filter_map(|qid| qrels.get(qid).map(|j| (qid.clone(), j.clone())))
        .collect::<BTreeMap<_, _>>()
}
