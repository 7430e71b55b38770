//! Scratch experiment runner for pinning ablation defaults. Not part of
//! the deliverable.

use std::time::Instant;

use distrank::datagen::{generate, SynthConfig};
use distrank::dense_index::DenseIndex;
use distrank::distill::{
    distill_student, tokenize_triplets, train_teacher, DistillConfig, DistillMode, TrainConfig,
};
use distrank::encoder::{Encoder, Projection, Vocabulary, DEFAULT_PASSAGE_LEN, DEFAULT_QUERY_LEN};
use distrank::eval::mrr_at_k;
use distrank::scoring::maxsim;
use distrank::trec::{Qrels, Run};

fn dense_run(
    encoder: &Encoder,
    proj: &Projection,
    index: &DenseIndex,
    queries: &[(String, String)],
    k: usize,
) -> Run {
    let mut run = Run::new();
    for (qid, text) in queries {
        let ids = encoder.tokenize(text, DEFAULT_QUERY_LEN).unwrap();
        let pooled = encoder.encode_pooled(&ids, proj).unwrap().pooled.unwrap();
        let result = index.search(&pooled, k).unwrap();
        run.insert(qid.clone(), result.entries);
    }
    run
}

fn teacher_run(
    encoder: &Encoder,
    proj: &Projection,
    docs: &[(String, Vec<u32>)],
    queries: &[(String, String)],
    k: usize,
) -> Run {
    let mut run = Run::new();
    for (qid, text) in queries {
        let ids = encoder.tokenize(text, DEFAULT_QUERY_LEN).unwrap();
        let q = encoder.encode_teacher_query(&ids, proj).unwrap();
        let mut scored: Vec<(String, f64)> = docs
            .iter()
            .map(|(doc_id, doc_ids)| {
                let d = encoder.encode_teacher_doc(doc_ids, proj).unwrap();
                (
                    doc_id.clone(),
                    maxsim(&q.token_vectors, &d.token_vectors).unwrap(),
                )
            })
            .collect();
        scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
        scored.truncate(k);
        run.insert(qid.clone(), scored);
    }
    run
}

fn heldout_qrels(qrels: &Qrels, heldout: &[(String, String)]) -> Qrels {
    heldout
        .iter()
        .filter_map(|(qid, _)| qrels.get(qid).map(|j| (qid.clone(), j.clone())))
        .collect()
}

fn env_or<T: std::str::FromStr>(name: &str, default: T) -> T {
    std::env::var(name)
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(default)
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let seed: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(42);
    let steps: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(2000);
    let t = env_or("T_DIM", 64usize);
    let h = env_or("H_DIM", 32usize);
    let student_lr = env_or("STUDENT_LR", 0.05f64);
    let teacher_lr = env_or("TEACHER_LR", 0.05f64);

    let cfg = SynthConfig {
        num_topics: env_or("TOPICS", 20),
        docs_per_topic: env_or("DPT", 50),
        vocab_size: env_or("VOCAB", 5000),
        topic_vocab_overlap: env_or("OVERLAP", 0.3),
        query_noise: env_or("NOISE", 0.45),
        label_noise: env_or("LNOISE", 0.2),
        query_len: env_or("QLEN", 8),
        doc_len: env_or("DLEN", 24),
        num_queries: env_or("NQ", 2000),
        seed,
        ..SynthConfig::default()
    };
    println!("cfg: {cfg:?} t={t} h={h} slr={student_lr} tlr={teacher_lr}");
    let t0 = Instant::now();
    let data = generate(&cfg).unwrap();
    println!(
        "datagen: {} docs, {} train q, {} heldout q ({:?})",
        data.corpus.len(),
        data.train_queries.len(),
        data.heldout_queries.len(),
        t0.elapsed()
    );

    // Vocabulary comes from everything the training stage can see: the
    // corpus plus the training triples (query-side tokens included).
    let vocab = Vocabulary::from_texts(
        data.corpus
            .iter()
            .map(|(_, t)| t.as_str())
            .chain(data.triples.iter().flat_map(|(q, p, n)| {
                [q.as_str(), p.as_str(), n.as_str()]
            })),
    );
    println!("vocab size {}", vocab.size());
    let encoder = Encoder::seeded(vocab, t, seed);
    let mut init = Projection::seeded(t, h, seed.wrapping_add(1));
    let scale: f64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(1.0);
    for v in init.weights.values_mut() {
        *v *= scale;
    }
    println!("init scale {scale}");

    let triplets = tokenize_triplets(
        &encoder,
        &data.triples,
        DEFAULT_QUERY_LEN,
        DEFAULT_PASSAGE_LEN,
    )
    .unwrap();

    let docs: Vec<(String, Vec<u32>)> = data
        .corpus
        .iter()
        .map(|(id, text)| {
            (
                id.clone(),
                encoder.tokenize(text, DEFAULT_PASSAGE_LEN).unwrap(),
            )
        })
        .collect();

    let hq = heldout_qrels(&data.qrels, &data.heldout_queries);

    // BM25 reference.
    let sparse = distrank::sparse_index::build_sparse(
        &data.corpus,
        distrank::sparse_index::DEFAULT_K1,
        distrank::sparse_index::DEFAULT_B,
    )
    .unwrap();
    let mut bm25_run = Run::new();
    for (qid, text) in &data.heldout_queries {
        bm25_run.insert(qid.clone(), sparse.search_text(text, 10).unwrap().entries);
    }
    println!("BM25 MRR@10: {:.4}", mrr_at_k(&bm25_run, &hq, 10));

    // Anchored vs pure-paraphrase heldout subsets (diagnostic): a query is
    // "anchored" iff it shares any token with its relevant passage.
    let mut anchored_ids = std::collections::HashSet::new();
    for (qid, text) in &data.heldout_queries {
        let pos_id = data.qrels[qid].keys().next().unwrap();
        let pos_text = &data.corpus.iter().find(|(id, _)| id == pos_id).unwrap().1;
        let pos_words: std::collections::HashSet<&str> = pos_text.split(' ').collect();
        if text.split(' ').any(|w| pos_words.contains(w)) {
            anchored_ids.insert(qid.clone());
        }
    }
    let subset_mrr = |run: &Run, keep_anchored: bool| -> f64 {
        let sub: Run = run
            .iter()
            .filter(|(qid, _)| anchored_ids.contains(*qid) == keep_anchored)
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        mrr_at_k(&sub, &hq, 10)
    };

    // Untrained references.
    let untrained_teacher_run = teacher_run(&encoder, &init, &docs, &data.heldout_queries, 10);
    println!(
        "teacher MRR@10 untrained: {:.4} (anchored {:.4} / paraphrase {:.4})",
        mrr_at_k(&untrained_teacher_run, &hq, 10),
        subset_mrr(&untrained_teacher_run, true),
        subset_mrr(&untrained_teacher_run, false),
    );
    let index_init = DenseIndex::build(&docs, &encoder, &init).unwrap();
    let run_init = dense_run(&encoder, &init, &index_init, &data.heldout_queries, 10);
    println!("student MRR@10 at init: {:.4}", mrr_at_k(&run_init, &hq, 10));

    // Teacher training.
    let tcfg = TrainConfig {
        steps: env_or("TEACHER_STEPS", steps),
        learning_rate: teacher_lr,
        seed: seed.wrapping_add(2),
        ..TrainConfig::default()
    };
    let t1 = Instant::now();
    let (teacher, trec) = train_teacher(&triplets, &encoder, &init, &tcfg).unwrap();
    println!(
        "teacher trained in {:?}; loss {:.4} -> {:.4}",
        t1.elapsed(),
        trec.first().map(|r| r.total).unwrap_or(f64::NAN),
        trec.last().map(|r| r.total).unwrap_or(f64::NAN)
    );
    let trained_teacher_run = teacher_run(&encoder, &teacher, &docs, &data.heldout_queries, 10);
    println!(
        "teacher MRR@10 trained:   {:.4} (anchored {:.4} / paraphrase {:.4})",
        mrr_at_k(&trained_teacher_run, &hq, 10),
        subset_mrr(&trained_teacher_run, true),
        subset_mrr(&trained_teacher_run, false),
    );

    // Teacher-as-student (pooled with teacher weights, before distillation).
    let index_t = DenseIndex::build(&docs, &encoder, &teacher).unwrap();
    let run_t = dense_run(&encoder, &teacher, &index_t, &data.heldout_queries, 10);
    println!(
        "student MRR@10 teacher-init (no training): {:.4}",
        mrr_at_k(&run_t, &hq, 10)
    );

    // Three conditions, all with the default gamma.
    let gamma = env_or("GAMMA", 0.1);
    for (label, mode) in [
        ("cond1 none    ", DistillMode::None),
        ("cond2 triplet ", DistillMode::Triplet),
        ("cond3 in_batch", DistillMode::InBatch),
    ] {
        let dcfg = DistillConfig {
            gamma,
            mode,
            steps,
            learning_rate: student_lr,
            seed: seed.wrapping_add(3),
            ..DistillConfig::default()
        };
        let t2 = Instant::now();
        let (student, recs) = distill_student(&triplets, &encoder, &teacher, &dcfg).unwrap();
        let index = DenseIndex::build(&docs, &encoder, &student).unwrap();
        let run = dense_run(&encoder, &student, &index, &data.heldout_queries, 10);
        let mrr = mrr_at_k(&run, &hq, 10);
        let train_run = dense_run(&encoder, &student, &index, &data.train_queries, 10);
        let train_qrels: Qrels = data
            .train_queries
            .iter()
            .filter_map(|(qid, _)| data.qrels.get(qid).map(|j| (qid.clone(), j.clone())))
            .collect();
        let train_mrr = mrr_at_k(&train_run, &train_qrels, 10);
        let window = |r: &[distrank::distill::StepRecord]| -> (f64, f64) {
            let w = 50.min(r.len());
            let head: f64 = r[..w].iter().map(|x| x.total).sum::<f64>() / w as f64;
            let tail: f64 = r[r.len() - w..].iter().map(|x| x.total).sum::<f64>() / w as f64;
            (head, tail)
        };
        let (head, tail) = window(&recs);
        println!(
            "{label}: heldout MRR {:.4} | train MRR {:.4} | loss(50w) {:.4} -> {:.4} | {:?}",
            mrr, train_mrr, head, tail, t2.elapsed()
        );
    }
}
