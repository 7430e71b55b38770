//! Token encoder: a frozen token-embedding table plus trainable per-token
//! linear projections.
//!
//! Three encoding flavours are exposed. The late-interaction scorer consumes
//! per-token rows that are projected and L2-normalized, with an additional
//! punctuation filter on the document side. The pooled scorer consumes a
//! single vector: the average of the projected token rows, with no
//! normalization and no filter.
//!
//! The embedding table is sampled once from a seeded Gaussian and never
//! updated; only projections train. Table entries are quantized to f32 at
//! creation so the in-memory values match the persisted file exactly.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::binfmt;
use crate::error::{Error, Result};
use crate::linalg::{l2_norm, Matrix};

pub const UNK_TOKEN: &str = "<unk>";

/// Default query token cap.
pub const DEFAULT_QUERY_LEN: usize = 32;
/// Default passage token cap.
pub const DEFAULT_PASSAGE_LEN: usize = 150;
/// Default embedding-table width t.
pub const DEFAULT_TOKEN_DIM: usize = 64;
/// Default projection output width h.
pub const DEFAULT_OUTPUT_DIM: usize = 32;

const ENCODER_MAGIC: &[u8; 4] = b"TCTE";
const PROJECTION_MAGIC: &[u8; 4] = b"TCTP";
const FORMAT_VERSION: u32 = 1;

// ─────────────────────────────────────────────────────────────────────────────
// Tokenization
// ─────────────────────────────────────────────────────────────────────────────

/// Lowercased whitespace-and-punctuation tokenization. Punctuation
/// characters are emitted as their own single-character tokens so the
/// document-side filter has something to remove.
pub fn split_tokens(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_whitespace() {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
        } else if ch.is_ascii_punctuation() {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
            tokens.push(ch.to_string());
        } else {
            for lower in ch.to_lowercase() {
                current.push(lower);
            }
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

fn is_punctuation_token(token: &str) -> bool {
    token.len() == 1 && token.as_bytes()[0].is_ascii_punctuation()
}

// ─────────────────────────────────────────────────────────────────────────────
// Vocabulary
// ─────────────────────────────────────────────────────────────────────────────

/// Dense token-id map with a reserved UNK id and a derived set of
/// punctuation token ids.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    tokens: Vec<String>,
    ids: HashMap<String, u32>,
    punctuation: Vec<bool>,
}

impl Vocabulary {
    /// Build from an iterator of tokens. Ids are assigned in first-seen
    /// order; the UNK token always takes id 0.
    pub fn build<I, S>(words: I) -> Vocabulary
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut tokens = vec![UNK_TOKEN.to_string()];
        let mut ids = HashMap::new();
        ids.insert(UNK_TOKEN.to_string(), 0u32);
        for w in words {
            let w = w.as_ref();
            if !ids.contains_key(w) {
                ids.insert(w.to_string(), tokens.len() as u32);
                tokens.push(w.to_string());
            }
        }
        let punctuation = tokens.iter().map(|t| is_punctuation_token(t)).collect();
        Vocabulary {
            tokens,
            ids,
            punctuation,
        }
    }

    /// Build from raw corpus texts using the shared tokenizer.
    pub fn from_texts<'a, I: IntoIterator<Item = &'a str>>(texts: I) -> Vocabulary {
        let mut words = Vec::new();
        for text in texts {
            words.extend(split_tokens(text));
        }
        Vocabulary::build(words)
    }

    pub fn size(&self) -> usize {
        self.tokens.len()
    }

    pub fn unk_id(&self) -> u32 {
        0
    }

    pub fn token(&self, id: u32) -> &str {
        &self.tokens[id as usize]
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.ids.get(token).copied()
    }

    pub fn is_punctuation(&self, id: u32) -> bool {
        self.punctuation[id as usize]
    }

    /// Map text to token ids: lowercase, split, unknown → UNK, truncate to
    /// `max_len`. Errors when nothing survives tokenization.
    pub fn tokenize(&self, text: &str, max_len: usize) -> Result<Vec<u32>> {
        let words = split_tokens(text);
        if words.is_empty() {
            return Err(Error::EmptyTokenization);
        }
        Ok(words
            .iter()
            .take(max_len)
            .map(|w| self.id(w).unwrap_or(0))
            .collect())
    }
}

// ─────────────────────────────────────────────────────────────────────────────
// Embedding table and projections
// ─────────────────────────────────────────────────────────────────────────────

/// Frozen per-token embedding table, vocab_size × t. Immutable after
/// construction; the trainers only ever touch projections.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    table: Matrix,
}

impl EmbeddingTable {
    /// Sample from a seeded Gaussian with mean 0 and σ = 1/√t, quantized to
    /// f32 so memory and file contents agree bit for bit.
    pub fn seeded(vocab_size: usize, token_dim: usize, seed: u64) -> EmbeddingTable {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0 / (token_dim as f64).sqrt()).unwrap();
        let mut values = Vec::with_capacity(vocab_size * token_dim);
        for _ in 0..vocab_size * token_dim {
            values.push(normal.sample(&mut rng) as f32 as f64);
        }
        EmbeddingTable {
            table: Matrix::from_values(vocab_size, token_dim, values).unwrap(),
        }
    }

    pub fn from_matrix(table: Matrix) -> EmbeddingTable {
        EmbeddingTable { table }
    }

    pub fn vocab_size(&self) -> usize {
        self.table.rows()
    }

    pub fn token_dim(&self) -> usize {
        self.table.cols()
    }

    pub fn row(&self, id: u32) -> &[f64] {
        self.table.row(id as usize)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.table
    }
}

/// Trainable linear map t × h applied to every token row.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub weights: Matrix,
}

impl Projection {
    /// Seeded unit-variance Gaussian init, f32-quantized like the table.
    /// Unit variance keeps pooled dot products at a scale where softmax
    /// gradients are usable; the normalized late-interaction scorer is
    /// insensitive to it.
    pub fn seeded(token_dim: usize, output_dim: usize, seed: u64) -> Projection {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut values = Vec::with_capacity(token_dim * output_dim);
        for _ in 0..token_dim * output_dim {
            values.push(normal.sample(&mut rng) as f32 as f64);
        }
        Projection {
            weights: Matrix::from_values(token_dim, output_dim, values).unwrap(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.cols()
    }
}

/// A single encoded text: projected token rows and, for pooled encodings,
/// the average of those rows.
#[derive(Debug, Clone)]
pub struct EncodedText {
    pub token_vectors: Matrix,
    pub pooled: Option<Vec<f64>>,
    pub source_len: usize,
}

// ─────────────────────────────────────────────────────────────────────────────
// Encoder
// ─────────────────────────────────────────────────────────────────────────────

/// Vocabulary plus frozen embedding table; all encodings are pure functions
/// of (self, projection, ids) and safe to run concurrently.
#[derive(Debug, Clone)]
pub struct Encoder {
    pub vocab: Vocabulary,
    pub table: EmbeddingTable,
}

impl Encoder {
    pub fn new(vocab: Vocabulary, table: EmbeddingTable) -> Result<Encoder> {
        if vocab.size() != table.vocab_size() {
            return Err(Error::DimensionMismatch {
                left: vocab.size(),
                right: table.vocab_size(),
            });
        }
        Ok(Encoder { vocab, table })
    }

    /// Vocabulary plus a fresh seeded table of width `token_dim`.
    pub fn seeded(vocab: Vocabulary, token_dim: usize, seed: u64) -> Encoder {
        let table = EmbeddingTable::seeded(vocab.size(), token_dim, seed);
        Encoder { vocab, table }
    }

    pub fn token_dim(&self) -> usize {
        self.table.token_dim()
    }

    pub fn tokenize(&self, text: &str, max_len: usize) -> Result<Vec<u32>> {
        self.vocab.tokenize(text, max_len)
    }

    /// Raw embedding rows for a token-id sequence (l × t).
    pub fn embed(&self, ids: &[u32]) -> Result<Matrix> {
        if ids.is_empty() {
            return Err(Error::EmptyInput("token ids"));
        }
        let rows: Vec<Vec<f64>> = ids.iter().map(|&id| self.table.row(id).to_vec()).collect();
        Matrix::from_rows(&rows)
    }

    /// Mean of the raw embedding rows (length t). Average pooling commutes
    /// with the linear projection, so the pooled scorer only needs this.
    pub fn mean_embedding(&self, ids: &[u32]) -> Result<Vec<f64>> {
        Ok(self.embed(ids)?.column_mean())
    }

    /// Query-side late-interaction encoding: projected rows, each
    /// L2-normalized. The pooled field stays unset.
    pub fn encode_teacher_query(&self, ids: &[u32], proj: &Projection) -> Result<EncodedText> {
        let projected = self.embed(ids)?.matmul(&proj.weights)?;
        let mut rows = Vec::with_capacity(projected.rows());
        for (position, row) in projected.row_iter().enumerate() {
            let norm = l2_norm(row);
            if norm == 0.0 {
                return Err(Error::ZeroNormRow { position });
            }
            rows.push(row.iter().map(|v| v / norm).collect());
        }
        Ok(EncodedText {
            token_vectors: Matrix::from_rows(&rows)?,
            pooled: None,
            source_len: ids.len(),
        })
    }

    /// Document-side late-interaction encoding: like the query side, then
    /// rows at punctuation-token positions are dropped.
    pub fn encode_teacher_doc(&self, ids: &[u32], proj: &Projection) -> Result<EncodedText> {
        let kept: Vec<u32> = ids
            .iter()
            .copied()
            .filter(|&id| !self.vocab.is_punctuation(id))
            .collect();
        if kept.is_empty() {
            return Err(Error::AllTokensFiltered);
        }
        let encoded = self.encode_teacher_query(&kept, proj)?;
        Ok(EncodedText {
            token_vectors: encoded.token_vectors,
            pooled: None,
            source_len: ids.len(),
        })
    }

    /// Pooled encoding for the dot-product scorer: projected rows averaged,
    /// no normalization, no filter. Used for queries and passages alike.
    pub fn encode_pooled(&self, ids: &[u32], proj: &Projection) -> Result<EncodedText> {
        let projected = self.embed(ids)?.matmul(&proj.weights)?;
        let pooled = projected.column_mean();
        Ok(EncodedText {
            token_vectors: projected,
            pooled: Some(pooled),
            source_len: ids.len(),
        })
    }

    /// Number of document rows the teacher encoding would keep, without
    /// projecting anything. Drives the storage report.
    pub fn filtered_len(&self, ids: &[u32]) -> usize {
        ids.iter()
            .filter(|&&id| !self.vocab.is_punctuation(id))
            .count()
    }
}

// ─────────────────────────────────────────────────────────────────────────────
// Persistence
// ─────────────────────────────────────────────────────────────────────────────

/// Write vocabulary + table: magic "TCTE", version, vocab_size, t, the
/// token strings length-prefixed, then the f32 table row-major.
pub fn save_encoder<P: AsRef<Path>>(path: P, encoder: &Encoder) -> Result<()> {
    let file = create(path.as_ref())?;
    let mut w = BufWriter::new(file);
    binfmt::write_magic(&mut w, ENCODER_MAGIC)?;
    binfmt::write_u32(&mut w, FORMAT_VERSION)?;
    binfmt::write_u32(&mut w, encoder.vocab.size() as u32)?;
    binfmt::write_u32(&mut w, encoder.token_dim() as u32)?;
    for id in 0..encoder.vocab.size() {
        binfmt::write_string(&mut w, encoder.vocab.token(id as u32))?;
    }
    binfmt::write_f32_from_f64(&mut w, encoder.table.matrix().values())?;
    Ok(())
}

pub fn load_encoder<P: AsRef<Path>>(path: P) -> Result<Encoder> {
    let file = open(path.as_ref())?;
    let mut r = BufReader::new(file);
    binfmt::expect_magic(&mut r, ENCODER_MAGIC)?;
    binfmt::check_version(binfmt::read_u32(&mut r)?, FORMAT_VERSION, "encoder")?;
    let vocab_size = binfmt::read_u32(&mut r)? as usize;
    let token_dim = binfmt::read_u32(&mut r)? as usize;
    let mut tokens = Vec::with_capacity(vocab_size);
    for _ in 0..vocab_size {
        tokens.push(binfmt::read_string(&mut r)?);
    }
    if tokens.first().map(String::as_str) != Some(UNK_TOKEN) {
        return Err(Error::Format("encoder file lacks UNK at id 0".into()));
    }
    let values = binfmt::read_f32_vec(&mut r, vocab_size * token_dim)?;
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Format("non-finite embedding values".into()));
    }
    let matrix = Matrix::from_values(
        vocab_size,
        token_dim,
        values.into_iter().map(f64::from).collect(),
    )?;
    // Rebuild the id map from stored order; ids stay dense by construction.
    let vocab = Vocabulary::build(tokens.iter().skip(1));
    if vocab.size() != vocab_size {
        return Err(Error::Format("duplicate tokens in encoder file".into()));
    }
    Encoder::new(vocab, EmbeddingTable::from_matrix(matrix))
}

/// Write a projection: magic "TCTP", version, t, h, f32 weights row-major.
pub fn save_projection<P: AsRef<Path>>(path: P, proj: &Projection) -> Result<()> {
    let file = create(path.as_ref())?;
    let mut w = BufWriter::new(file);
    binfmt::write_magic(&mut w, PROJECTION_MAGIC)?;
    binfmt::write_u32(&mut w, FORMAT_VERSION)?;
    binfmt::write_u32(&mut w, proj.input_dim() as u32)?;
    binfmt::write_u32(&mut w, proj.output_dim() as u32)?;
    binfmt::write_f32_from_f64(&mut w, proj.weights.values())?;
    Ok(())
}

pub fn load_projection<P: AsRef<Path>>(path: P) -> Result<Projection> {
    let file = open(path.as_ref())?;
    let mut r = BufReader::new(file);
    binfmt::expect_magic(&mut r, PROJECTION_MAGIC)?;
    binfmt::check_version(binfmt::read_u32(&mut r)?, FORMAT_VERSION, "projection")?;
    let t = binfmt::read_u32(&mut r)? as usize;
    let h = binfmt::read_u32(&mut r)? as usize;
    let values = binfmt::read_f32_vec(&mut r, t * h)?;
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Format("non-finite projection values".into()));
    }
    Ok(Projection {
        weights: Matrix::from_values(t, h, values.into_iter().map(f64::from).collect())?,
    })
}

pub(crate) fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|source| Error::File {
        path: path.display().to_string(),
        source,
    })
}

pub(crate) fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|source| Error::File {
        path: path.display().to_string(),
        source,
    })
}

// ─────────────────────────────────────────────────────────────────────────────
// Tests
// ─────────────────────────────────────────────────────────────────────────────
