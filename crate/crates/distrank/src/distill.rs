//! The two-step trainer: pairwise fine-tuning of the late-interaction
//! teacher, then distillation of the frozen teacher into the pooled
//! dot-product student.
//!
//! Each distillation step scores every query in the batch against the
//! candidate pool (its own positive and negative plus every other
//! triplet's passages) under both scorers. The student learns from a
//! convex combination of hard-label cross entropy and the KL divergence
//! from the teacher's tempered softmax. Three strategies are supported:
//! no soft labels at all, soft labels over each query's own pair only, or
//! soft labels over the whole in-batch pool.
//!
//! Candidate scoring is data-parallel; weight updates are strictly
//! sequential, and per-query contributions are reduced in a fixed order so
//! results do not depend on thread count.

use std::fmt;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::encoder::{create, Encoder, Projection};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::scoring::maxsim_with_argmax;

// ─────────────────────────────────────────────────────────────────────────────
// Configuration
// ─────────────────────────────────────────────────────────────────────────────

/// Which passages receive teacher soft labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistillMode {
    /// Hard labels only; the KL term is forced to zero.
    None,
    /// Soft labels over each query's own (positive, negative) pair.
    Triplet,
    /// Soft labels over the whole in-batch candidate pool.
    InBatch,
}

impl fmt::Display for DistillMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DistillMode::None => "none",
            DistillMode::Triplet => "triplet",
            DistillMode::InBatch => "in_batch",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for DistillMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "none" => Ok(DistillMode::None),
            "triplet" => Ok(DistillMode::Triplet),
            "in_batch" => Ok(DistillMode::InBatch),
            other => Err(format!(
                "unknown mode {other:?} (expected none | triplet | in_batch)"
            )),
        }
    }
}

/// Distillation hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct DistillConfig {
    /// Weight of the hard-label cross-entropy term, in [0, 1].
    pub gamma: f64,
    /// Teacher softmax temperature; the student distribution always uses 1.
    pub tau: f64,
    pub mode: DistillMode,
    pub learning_rate: f64,
    pub steps: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for DistillConfig {
    fn default() -> Self {
        DistillConfig {
            gamma: 0.1,
            tau: 0.25,
            mode: DistillMode::InBatch,
            learning_rate: 0.05,
            steps: 2000,
            batch_size: 8,
            seed: 42,
        }
    }
}

impl DistillConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::InvalidParameter(format!(
                "gamma must be in [0, 1], got {}",
                self.gamma
            )));
        }
        if self.tau <= 0.0 || !self.tau.is_finite() {
            return Err(Error::NonPositiveTemperature(self.tau));
        }
        if self.learning_rate <= 0.0 || !self.learning_rate.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter("batch size must be at least 1".into()));
        }
        if self.mode == DistillMode::InBatch && self.batch_size < 2 {
            return Err(Error::BatchTooSmall(self.batch_size));
        }
        Ok(())
    }
}

/// Plain mini-batch gradient-descent settings for the teacher.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub steps: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        // The late-interaction gradient passes through row normalization,
        // which shrinks it by the pre-normalization norms; the pairwise
        // loss needs a much larger step size than the distillation loss.
        TrainConfig {
            learning_rate: 2.0,
            steps: 8000,
            batch_size: 8,
            seed: 42,
        }
    }
}

// ─────────────────────────────────────────────────────────────────────────────
// Triplets
// ─────────────────────────────────────────────────────────────────────────────

/// One training example: tokenized query, positive passage, and a
/// BM25-sampled negative.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingTriplet {
    pub query_ids: Vec<u32>,
    pub positive_ids: Vec<u32>,
    pub negative_ids: Vec<u32>,
}

impl TrainingTriplet {
    pub fn new(query_ids: Vec<u32>, positive_ids: Vec<u32>, negative_ids: Vec<u32>) -> Result<Self> {
        if query_ids.is_empty() || positive_ids.is_empty() || negative_ids.is_empty() {
            return Err(Error::EmptyInput("training triplet"));
        }
        if positive_ids == negative_ids {
            return Err(Error::InvalidParameter(
                "positive and negative passages are identical".into(),
            ));
        }
        Ok(TrainingTriplet {
            query_ids,
            positive_ids,
            negative_ids,
        })
    }
}

/// Tokenize raw triple texts with the standard query/passage caps.
pub fn tokenize_triplets(
    encoder: &Encoder,
    rows: &[(String, String, String)],
    query_len: usize,
    passage_len: usize,
) -> Result<Vec<TrainingTriplet>> {
    rows.iter()
        .map(|(q, pos, neg)| {
            TrainingTriplet::new(
                encoder.tokenize(q, query_len)?,
                encoder.tokenize(pos, passage_len)?,
                encoder.tokenize(neg, passage_len)?,
            )
        })
        .collect()
}

// ─────────────────────────────────────────────────────────────────────────────
// Batch construction
// ─────────────────────────────────────────────────────────────────────────────

/// A batch scored under both similarity functions.
///
/// `candidates` is the deduplicated pool: each query's positive and
/// negative in triplet order, first occurrence kept. Rows of the score
/// matrices are queries, columns are pool entries. The cached mean
/// embeddings and their projections are what the student gradient needs.
#[derive(Debug, Clone)]
pub struct ScoredBatch {
    pub candidates: Vec<Vec<u32>>,
    /// Mean raw-embedding vector of each candidate (length t).
    pub candidate_means: Vec<Vec<f64>>,
    /// Projected candidate means under the student (length h).
    pub candidate_proj: Vec<Vec<f64>>,
    pub query_means: Vec<Vec<f64>>,
    pub query_proj: Vec<Vec<f64>>,
    pub teacher_scores: Matrix,
    pub student_scores: Matrix,
    /// Pool index of each query's positive / negative.
    pub positive: Vec<usize>,
    pub negative: Vec<usize>,
}

impl ScoredBatch {
    pub fn batch_size(&self) -> usize {
        self.positive.len()
    }

    pub fn pool_size(&self) -> usize {
        self.candidates.len()
    }
}

#[cfg(feature = "parallel")]
fn try_map<T: Sync, R: Send>(
    items: &[T],
    parallel: bool,
    f: impl Fn(&T) -> Result<R> + Sync + Send,
) -> Result<Vec<R>> {
    if parallel {
        items.par_iter().map(f).collect()
    } else {
        items.iter().map(f).collect()
    }
}

#[cfg(not(feature = "parallel"))]
fn try_map<T, R>(items: &[T], _parallel: bool, f: impl Fn(&T) -> Result<R>) -> Result<Vec<R>> {
    items.iter().map(f).collect()
}

/// Score a batch of triplets against the shared candidate pool under both
/// the teacher (late interaction) and the student (pooled dot product).
pub fn build_batch(
    triplets: &[TrainingTriplet],
    encoder: &Encoder,
    teacher: &Projection,
    student: &Projection,
) -> Result<ScoredBatch> {
    build_batch_with(triplets, encoder, teacher, student, cfg!(feature = "parallel"))
}

pub fn build_batch_sequential(
    triplets: &[TrainingTriplet],
    encoder: &Encoder,
    teacher: &Projection,
    student: &Projection,
) -> Result<ScoredBatch> {
    build_batch_with(triplets, encoder, teacher, student, false)
}

#[cfg(feature = "parallel")]
pub fn build_batch_parallel(
    triplets: &[TrainingTriplet],
    encoder: &Encoder,
    teacher: &Projection,
    student: &Projection,
) -> Result<ScoredBatch> {
    build_batch_with(triplets, encoder, teacher, student, true)
}

fn build_batch_with(
    triplets: &[TrainingTriplet],
    encoder: &Encoder,
    teacher: &Projection,
    student: &Projection,
    parallel: bool,
) -> Result<ScoredBatch> {
    if triplets.is_empty() {
        return Err(Error::EmptyInput("triplet batch"));
    }

    // Deduplicated candidate pool, first occurrence kept.
    let mut candidates: Vec<Vec<u32>> = Vec::with_capacity(2 * triplets.len());
    let mut positive = Vec::with_capacity(triplets.len());
    let mut negative = Vec::with_capacity(triplets.len());
    let intern = |ids: &Vec<u32>, candidates: &mut Vec<Vec<u32>>| -> usize {
        match candidates.iter().position(|c| c == ids) {
            Some(idx) => {
                log::warn!("duplicate passage in candidate pool; deduplicated");
                idx
            }
            None => {
                candidates.push(ids.clone());
                candidates.len() - 1
            }
        }
    };
    for t in triplets {
        positive.push(intern(&t.positive_ids, &mut candidates));
        negative.push(intern(&t.negative_ids, &mut candidates));
    }

    // Teacher encodings and per-query MaxSim rows.
    let doc_encodings = try_map(&candidates, parallel, |ids| {
        late_encode(encoder, ids, teacher, true)
    })?;
    let teacher_rows = try_map(triplets, parallel, |t| {
        let q = late_encode(encoder, &t.query_ids, teacher, false)?;
        doc_encodings
            .iter()
            .map(|d| Ok(maxsim_with_argmax(&q.rows, &d.rows)?.0))
            .collect::<Result<Vec<f64>>>()
    })?;

    // Student side: average pooling commutes with the projection, so the
    // mean raw embedding is all the pooled scorer needs.
    let candidate_means = try_map(&candidates, parallel, |ids| encoder.mean_embedding(ids))?;
    let query_means = try_map(triplets, parallel, |t| encoder.mean_embedding(&t.query_ids))?;
    let candidate_proj = candidate_means
        .iter()
        .map(|m| student.weights.project(m))
        .collect::<Result<Vec<_>>>()?;
    let query_proj = query_means
        .iter()
        .map(|m| student.weights.project(m))
        .collect::<Result<Vec<_>>>()?;

    let teacher_scores = Matrix::from_rows(&teacher_rows)?;
    let student_rows: Vec<Vec<f64>> = query_proj
        .iter()
        .map(|u| {
            candidate_proj
                .iter()
                .map(|v| linalg::dot(u, v))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let student_scores = Matrix::from_rows(&student_rows)?;

    Ok(ScoredBatch {
        candidates,
        candidate_means,
        candidate_proj,
        query_means,
        query_proj,
        teacher_scores,
        student_scores,
        positive,
        negative,
    })
}

// ─────────────────────────────────────────────────────────────────────────────
// Distributions, loss, gradient
// ─────────────────────────────────────────────────────────────────────────────

/// Per-query candidate slots and the two probability distributions over
/// them: the teacher's tempered softmax and the student's softmax.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryDistributions {
    /// Pool indices the distributions range over.
    pub candidates: Vec<usize>,
    pub teacher: Vec<f64>,
    pub student: Vec<f64>,
}

/// Compute both distributions for every query. Triplet mode restricts the
/// candidate slots to the query's own (positive, negative) pair; the other
/// modes use the whole pool.
pub fn distributions(batch: &ScoredBatch, config: &DistillConfig) -> Result<Vec<QueryDistributions>> {
    if config.mode == DistillMode::InBatch && batch.batch_size() < 2 {
        return Err(Error::BatchTooSmall(batch.batch_size()));
    }
    (0..batch.batch_size())
        .map(|i| {
            let candidates: Vec<usize> = match config.mode {
                DistillMode::Triplet => vec![batch.positive[i], batch.negative[i]],
                _ => (0..batch.pool_size()).collect(),
            };
            let teacher_scores: Vec<f64> = candidates
                .iter()
                .map(|&j| batch.teacher_scores.get(i, j))
                .collect();
            let student_scores: Vec<f64> = candidates
                .iter()
                .map(|&j| batch.student_scores.get(i, j))
                .collect();
            Ok(QueryDistributions {
                candidates,
                teacher: linalg::softmax(&teacher_scores, config.tau)?,
                student: linalg::softmax(&student_scores, 1.0)?,
            })
        })
        .collect()
}

/// Loss value with its decomposition and the audited distributions.
/// `total = gamma·ce_term + (1 − gamma)·kl_term` holds by construction;
/// both terms are sums over queries divided by the batch size.
#[derive(Debug, Clone)]
pub struct LossReport {
    pub total: f64,
    pub ce_term: f64,
    pub kl_term: f64,
    pub per_query: Vec<QueryDistributions>,
}

pub fn loss(batch: &ScoredBatch, config: &DistillConfig) -> Result<LossReport> {
    let per_query = distributions(batch, config)?;
    let inv_b = 1.0 / batch.batch_size() as f64;
    let mut ce_sum = 0.0;
    let mut kl_sum = 0.0;
    for (i, qd) in per_query.iter().enumerate() {
        let pos_slot = qd
            .candidates
            .iter()
            .position(|&c| c == batch.positive[i])
            .ok_or(Error::PositiveMissing { query: i })?;
        ce_sum -= qd.student[pos_slot].ln();
        if config.mode != DistillMode::None {
            kl_sum += linalg::kl_divergence(&qd.teacher, &qd.student)?;
        }
    }
    let ce_term = ce_sum * inv_b;
    let kl_term = kl_sum * inv_b;
    Ok(LossReport {
        total: config.gamma * ce_term + (1.0 - config.gamma) * kl_term,
        ce_term,
        kl_term,
        per_query,
    })
}

/// Analytic gradient of the loss with respect to the student projection.
/// The teacher is frozen and receives no gradient.
///
/// For a query mean q̄ and candidate mean d̄ the score is (q̄W)·(d̄W), so
/// each candidate contributes the rank-1 terms q̄ ⊗ v and d̄ ⊗ u weighted
/// by the softmax error coefficient.
pub fn gradient(batch: &ScoredBatch, config: &DistillConfig) -> Result<Matrix> {
    let per_query = distributions(batch, config)?;
    let t = batch.query_means[0].len();
    let h = batch.query_proj[0].len();
    let inv_b = 1.0 / batch.batch_size() as f64;
    let mut grad = Matrix::zeros(t, h);
    for (i, qd) in per_query.iter().enumerate() {
        let pos_slot = qd
            .candidates
            .iter()
            .position(|&c| c == batch.positive[i])
            .ok_or(Error::PositiveMissing { query: i })?;
        let mut weighted_v = vec![0.0; h];
        let mut weighted_mean = vec![0.0; t];
        for (slot, &j) in qd.candidates.iter().enumerate() {
            let p = qd.student[slot];
            let mut coeff = config.gamma * (p - if slot == pos_slot { 1.0 } else { 0.0 });
            if config.mode != DistillMode::None {
                coeff += (1.0 - config.gamma) * (p - qd.teacher[slot]);
            }
            let coeff = coeff * inv_b;
            if coeff == 0.0 {
                continue;
            }
            for (w, v) in weighted_v.iter_mut().zip(&batch.candidate_proj[j]) {
                *w += coeff * v;
            }
            for (w, m) in weighted_mean.iter_mut().zip(&batch.candidate_means[j]) {
                *w += coeff * m;
            }
        }
        grad.add_outer(&batch.query_means[i], &weighted_v, 1.0)?;
        grad.add_outer(&weighted_mean, &batch.query_proj[i], 1.0)?;
    }
    Ok(grad)
}

// ─────────────────────────────────────────────────────────────────────────────
// Teacher training
// ─────────────────────────────────────────────────────────────────────────────

/// Token rows for the late-interaction scorer plus what its gradient
/// needs: the contributing token ids and each row's pre-normalization norm.
struct LateEncoding {
    ids: Vec<u32>,
    rows: Matrix,
    norms: Vec<f64>,
}

fn late_encode(
    encoder: &Encoder,
    ids: &[u32],
    proj: &Projection,
    filter_punctuation: bool,
) -> Result<LateEncoding> {
    let kept: Vec<u32> = if filter_punctuation {
        ids.iter()
            .copied()
            .filter(|&id| !encoder.vocab.is_punctuation(id))
            .collect()
    } else {
        ids.to_vec()
    };
    if kept.is_empty() {
        return Err(Error::AllTokensFiltered);
    }
    let mut rows = Vec::with_capacity(kept.len());
    let mut norms = Vec::with_capacity(kept.len());
    for (position, &id) in kept.iter().enumerate() {
        let projected = proj.weights.project(encoder.table.row(id))?;
        let norm = linalg::l2_norm(&projected);
        if norm == 0.0 {
            return Err(Error::ZeroNormRow { position });
        }
        norms.push(norm);
        rows.push(projected.into_iter().map(|v| v / norm).collect::<Vec<f64>>());
    }
    Ok(LateEncoding {
        ids: kept,
        rows: Matrix::from_rows(&rows)?,
        norms,
    })
}

/// Accumulate coeff · ∂maxsim/∂W for one (query, doc) pair. Each query row
/// pulls on its selected document row; the normalization Jacobian projects
/// out the component along the row itself.
fn add_maxsim_grad(
    grad: &mut Matrix,
    encoder: &Encoder,
    query: &LateEncoding,
    doc: &LateEncoding,
    argmax: &[usize],
    coeff: f64,
) -> Result<()> {
    let h = grad.cols();
    for (i, &j) in argmax.iter().enumerate() {
        let nq = query.rows.row(i);
        let nd = doc.rows.row(j);
        let cos: f64 = nq.iter().zip(nd).map(|(a, b)| a * b).sum();
        let mut d_query = vec![0.0; h];
        let mut d_doc = vec![0.0; h];
        for k in 0..h {
            d_query[k] = (nd[k] - cos * nq[k]) / query.norms[i];
            d_doc[k] = (nq[k] - cos * nd[k]) / doc.norms[j];
        }
        grad.add_outer(encoder.table.row(query.ids[i]), &d_query, coeff)?;
        grad.add_outer(encoder.table.row(doc.ids[j]), &d_doc, coeff)?;
    }
    Ok(())
}

/// Pairwise softmax cross-entropy over the triplet's MaxSim scores, with
/// its gradient. This is the teacher's training signal.
fn teacher_pair_step(
    triplet: &TrainingTriplet,
    encoder: &Encoder,
    proj: &Projection,
) -> Result<(f64, Matrix)> {
    let query = late_encode(encoder, &triplet.query_ids, proj, false)?;
    let pos = late_encode(encoder, &triplet.positive_ids, proj, true)?;
    let neg = late_encode(encoder, &triplet.negative_ids, proj, true)?;
    let (s_pos, am_pos) = maxsim_with_argmax(&query.rows, &pos.rows)?;
    let (s_neg, am_neg) = maxsim_with_argmax(&query.rows, &neg.rows)?;
    let max = s_pos.max(s_neg);
    let e_pos = (s_pos - max).exp();
    let e_neg = (s_neg - max).exp();
    let p_pos = e_pos / (e_pos + e_neg);
    let loss = -p_pos.ln();
    let mut grad = Matrix::zeros(proj.input_dim(), proj.output_dim());
    add_maxsim_grad(&mut grad, encoder, &query, &pos, &am_pos, p_pos - 1.0)?;
    add_maxsim_grad(&mut grad, encoder, &query, &neg, &am_neg, 1.0 - p_pos)?;
    Ok((loss, grad))
}

/// One line of the loss stream.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub total: f64,
    pub ce: f64,
    pub kl: f64,
}

/// Re-tag numerical failures inside a training step as divergence at that
/// step; anything else passes through unchanged.
fn diverged_at<T>(step: usize, result: Result<T>) -> Result<T> {
    match result {
        Err(e) if e.is_numerical() => Err(Error::Diverged { step }),
        other => other,
    }
}

/// Deterministic epoch batcher: reshuffles the triplet order whenever it
/// runs out, always yielding full batches.
struct Batcher {
    order: Vec<usize>,
    cursor: usize,
    rng: ChaCha8Rng,
}

impl Batcher {
    fn new(n: usize, seed: u64) -> Batcher {
        Batcher {
            order: (0..n).collect(),
            cursor: n, // force a shuffle on first use
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn next_batch(&mut self, size: usize) -> Vec<usize> {
        let mut batch = Vec::with_capacity(size);
        while batch.len() < size {
            if self.cursor >= self.order.len() {
                self.order.shuffle(&mut self.rng);
                self.cursor = 0;
            }
            batch.push(self.order[self.cursor]);
            self.cursor += 1;
        }
        batch
    }
}

/// Fine-tune the late-interaction scorer with pairwise cross entropy over
/// (positive, negative) MaxSim scores. Returns the trained projection and
/// the per-step loss stream; `steps = 0` returns the initialization
/// untouched.
pub fn train_teacher(
    triplets: &[TrainingTriplet],
    encoder: &Encoder,
    init: &Projection,
    config: &TrainConfig,
) -> Result<(Projection, Vec<StepRecord>)> {
    if triplets.is_empty() {
        return Err(Error::EmptyInput("training triplets"));
    }
    if config.batch_size == 0 {
        return Err(Error::InvalidParameter("batch size must be at least 1".into()));
    }
    let mut proj = init.clone();
    let mut batcher = Batcher::new(triplets.len(), config.seed);
    let mut records = Vec::with_capacity(config.steps);
    for step in 0..config.steps {
        let batch_idx = batcher.next_batch(config.batch_size);
        let batch: Vec<&TrainingTriplet> = batch_idx.iter().map(|&i| &triplets[i]).collect();
        let contributions = diverged_at(
            step,
            try_map(&batch, cfg!(feature = "parallel"), |t| {
                teacher_pair_step(t, encoder, &proj)
            }),
        )?;
        let mut grad = Matrix::zeros(proj.input_dim(), proj.output_dim());
        let mut loss_sum = 0.0;
        for (l, g) in &contributions {
            loss_sum += l;
            grad.scaled_add(g, 1.0)?;
        }
        let mean_loss = loss_sum / batch.len() as f64;
        if !mean_loss.is_finite() || !grad.is_finite() {
            return Err(Error::Diverged { step });
        }
        proj.weights
            .scaled_add(&grad, -config.learning_rate / batch.len() as f64)?;
        records.push(StepRecord {
            step,
            total: mean_loss,
            ce: mean_loss,
            kl: 0.0,
        });
    }
    Ok((proj, records))
}

// ─────────────────────────────────────────────────────────────────────────────
// Student distillation
// ─────────────────────────────────────────────────────────────────────────────

/// Distill the frozen teacher into the pooled student. The student is
/// initialized from the teacher's weights; only the student projection is
/// ever updated.
pub fn distill_student(
    triplets: &[TrainingTriplet],
    encoder: &Encoder,
    teacher: &Projection,
    config: &DistillConfig,
) -> Result<(Projection, Vec<StepRecord>)> {
    config.validate()?;
    if triplets.is_empty() {
        return Err(Error::EmptyInput("training triplets"));
    }
    let mut student = teacher.clone();
    let mut batcher = Batcher::new(triplets.len(), config.seed);
    let mut records = Vec::with_capacity(config.steps);
    for step in 0..config.steps {
        let batch_idx = batcher.next_batch(config.batch_size);
        let batch: Vec<TrainingTriplet> =
            batch_idx.iter().map(|&i| triplets[i].clone()).collect();
        let scored = diverged_at(step, build_batch(&batch, encoder, teacher, &student))?;
        if !scored.student_scores.is_finite() || !scored.teacher_scores.is_finite() {
            return Err(Error::Diverged { step });
        }
        let report = diverged_at(step, loss(&scored, config))?;
        if !report.total.is_finite() {
            return Err(Error::Diverged { step });
        }
        let grad = diverged_at(step, gradient(&scored, config))?;
        if !grad.is_finite() {
            return Err(Error::Diverged { step });
        }
        student.weights.scaled_add(&grad, -config.learning_rate)?;
        records.push(StepRecord {
            step,
            total: report.total,
            ce: report.ce_term,
            kl: report.kl_term,
        });
    }
    Ok((student, records))
}

/// Write the loss stream as line-delimited `step total ce kl` records.
pub fn write_loss_stream<P: AsRef<Path>>(
    path: P,
    records: &[StepRecord],
    header: Option<&str>,
) -> Result<()> {
    let file = create(path.as_ref())?;
    let mut w = BufWriter::new(file);
    if let Some(h) = header {
        writeln!(w, "# {h}")?;
    }
    writeln!(w, "# step\ttotal\tce\tkl")?;
    for r in records {
        writeln!(w, "{}\t{}\t{}\t{}", r.step, r.total, r.ce, r.kl)?;
    }
    Ok(())
}

// ─────────────────────────────────────────────────────────────────────────────
// Tests
// ─────────────────────────────────────────────────────────────────────────────
