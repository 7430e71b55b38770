//! Flat store of pooled passage vectors with exact top-k inner-product
//! search.
//!
//! The scan is a brute-force pass over all rows: f32 storage, f64
//! accumulation. Rows are scored in fixed-size chunks; each chunk yields a
//! local top-k and the locals are merged with a total-order comparator
//! (descending score, ascending doc id), so the parallel and sequential
//! paths return identical results.

use std::collections::HashSet;
use std::io::{BufReader, BufWriter};
use std::path::Path;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::binfmt;
use crate::encoder::{create, open, Encoder, Projection};
use crate::error::{Error, Result};

const INDEX_MAGIC: &[u8; 4] = b"TCTI";
const FORMAT_VERSION: u32 = 1;
const SCAN_CHUNK: usize = 1024;

/// Pooled vectors for a corpus, in input order.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseIndex {
    pub dim: usize,
    pub doc_ids: Vec<String>,
    /// Row-major N × dim, quantized to f32 like the persisted file.
    pub vectors: Vec<f32>,
}

/// Ordered (doc id, score) entries, best first; ties broken by ascending
/// doc id.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub entries: Vec<(String, f64)>,
}

impl DenseIndex {
    /// Encode every passage with the pooled encoder and store the result.
    /// Input order is preserved; duplicate ids are an error.
    pub fn build(docs: &[(String, Vec<u32>)], encoder: &Encoder, proj: &Projection) -> Result<Self> {
        #[cfg(feature = "parallel")]
        {
            Self::build_parallel(docs, encoder, proj)
        }
        #[cfg(not(feature = "parallel"))]
        {
            Self::build_sequential(docs, encoder, proj)
        }
    }

    pub fn build_sequential(
        docs: &[(String, Vec<u32>)],
        encoder: &Encoder,
        proj: &Projection,
    ) -> Result<Self> {
        let pooled = docs
            .iter()
            .map(|(_, ids)| pooled_f32(encoder, proj, ids))
            .collect::<Result<Vec<_>>>()?;
        Self::assemble(docs, pooled, proj.output_dim())
    }

    #[cfg(feature = "parallel")]
    pub fn build_parallel(
        docs: &[(String, Vec<u32>)],
        encoder: &Encoder,
        proj: &Projection,
    ) -> Result<Self> {
        let pooled = docs
            .par_iter()
            .map(|(_, ids)| pooled_f32(encoder, proj, ids))
            .collect::<Result<Vec<_>>>()?;
        Self::assemble(docs, pooled, proj.output_dim())
    }

    fn assemble(
        docs: &[(String, Vec<u32>)],
        pooled: Vec<Vec<f32>>,
        dim: usize,
    ) -> Result<Self> {
        if docs.is_empty() {
            return Err(Error::EmptyInput("corpus"));
        }
        let mut seen = HashSet::new();
        for (id, _) in docs {
            if !seen.insert(id.as_str()) {
                return Err(Error::DuplicateDocId(id.clone()));
            }
        }
        let mut vectors = Vec::with_capacity(docs.len() * dim);
        for row in &pooled {
            vectors.extend_from_slice(row);
        }
        Ok(DenseIndex {
            dim,
            doc_ids: docs.iter().map(|(id, _)| id.clone()).collect(),
            vectors,
        })
    }

    pub fn len(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doc_ids.is_empty()
    }

    pub fn vector(&self, row: usize) -> &[f32] {
        &self.vectors[row * self.dim..(row + 1) * self.dim]
    }

    /// Exact top-k by dot product over all rows.
    pub fn search(&self, query: &[f64], k: usize) -> Result<SearchResult> {
        #[cfg(feature = "parallel")]
        {
            self.search_parallel(query, k)
        }
        #[cfg(not(feature = "parallel"))]
        {
            self.search_sequential(query, k)
        }
    }

    pub fn search_sequential(&self, query: &[f64], k: usize) -> Result<SearchResult> {
        self.check_query(query, k)?;
        let chunks: Vec<_> = self.chunk_bounds().collect();
        let locals: Vec<Vec<(usize, f64)>> = chunks
            .iter()
            .map(|&(start, end)| self.scan_chunk(query, start, end, k))
            .collect();
        Ok(self.merge(locals, k))
    }

    #[cfg(feature = "parallel")]
    pub fn search_parallel(&self, query: &[f64], k: usize) -> Result<SearchResult> {
        self.check_query(query, k)?;
        let chunks: Vec<_> = self.chunk_bounds().collect();
        let locals: Vec<Vec<(usize, f64)>> = chunks
            .par_iter()
            .map(|&(start, end)| self.scan_chunk(query, start, end, k))
            .collect();
        Ok(self.merge(locals, k))
    }

    fn check_query(&self, query: &[f64], k: usize) -> Result<()> {
        if query.len() != self.dim {
            return Err(Error::DimensionMismatch {
                left: query.len(),
                right: self.dim,
            });
        }
        if k == 0 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        Ok(())
    }

    fn chunk_bounds(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.len();
        (0..n.div_ceil(SCAN_CHUNK)).map(move |c| (c * SCAN_CHUNK, ((c + 1) * SCAN_CHUNK).min(n)))
    }

    /// Score rows [start, end) and keep the chunk-local top k.
    fn scan_chunk(&self, query: &[f64], start: usize, end: usize, k: usize) -> Vec<(usize, f64)> {
        let mut scored: Vec<(usize, f64)> = (start..end)
            .map(|row| {
                let v = self.vector(row);
                let mut s = 0.0f64;
                for (q, &x) in query.iter().zip(v) {
                    s += q * f64::from(x);
                }
                (row, s)
            })
            .collect();
        scored.sort_by(|a, b| self.compare(a, b));
        scored.truncate(k);
        scored
    }

    fn compare(&self, a: &(usize, f64), b: &(usize, f64)) -> std::cmp::Ordering {
        b.1.partial_cmp(&a.1)
            .expect("scores are finite")
            .then_with(|| self.doc_ids[a.0].cmp(&self.doc_ids[b.0]))
    }

    fn merge(&self, locals: Vec<Vec<(usize, f64)>>, k: usize) -> SearchResult {
        let mut all: Vec<(usize, f64)> = locals.into_iter().flatten().collect();
        all.sort_by(|a, b| self.compare(a, b));
        all.truncate(k);
        SearchResult {
            entries: all
                .into_iter()
                .map(|(row, s)| (self.doc_ids[row].clone(), s))
                .collect(),
        }
    }

    // ─────────────────────────────────────────────────────────────────────
    // Persistence
    // ─────────────────────────────────────────────────────────────────────

    /// File layout: magic "TCTI", version u32, N u64, dim u32,
    /// length-prefixed doc ids, then f32 vectors row-major.
    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let file = create(path.as_ref())?;
        let mut w = BufWriter::new(file);
        binfmt::write_magic(&mut w, INDEX_MAGIC)?;
        binfmt::write_u32(&mut w, FORMAT_VERSION)?;
        binfmt::write_u64(&mut w, self.len() as u64)?;
        binfmt::write_u32(&mut w, self.dim as u32)?;
        for id in &self.doc_ids {
            binfmt::write_string(&mut w, id)?;
        }
        binfmt::write_f32_slice(&mut w, &self.vectors)?;
        Ok(())
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self> {
        let file = open(path.as_ref())?;
        let mut r = BufReader::new(file);
        binfmt::expect_magic(&mut r, INDEX_MAGIC)?;
        binfmt::check_version(binfmt::read_u32(&mut r)?, FORMAT_VERSION, "index")?;
        let n = binfmt::read_u64(&mut r)? as usize;
        let dim = binfmt::read_u32(&mut r)? as usize;
        let mut doc_ids = Vec::with_capacity(n);
        for _ in 0..n {
            doc_ids.push(binfmt::read_string(&mut r)?);
        }
        let vectors = binfmt::read_f32_vec(&mut r, n * dim)?;
        if vectors.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format("non-finite index vectors".into()));
        }
        Ok(DenseIndex {
            dim,
            doc_ids,
            vectors,
        })
    }

    /// Exact on-disk size of `save`'s output, in bytes.
    pub fn file_bytes(&self) -> u64 {
        let header = 4 + 4 + 8 + 4;
        let id_table: u64 = self.doc_ids.iter().map(|id| 4 + id.len() as u64).sum();
        header + id_table + (self.len() * self.dim * 4) as u64
    }

    /// Contrast pooled storage with what a per-token store of the same
    /// corpus would take, given the filtered token count of each document.
    pub fn storage_report(&self, filtered_doc_lens: &[usize]) -> StorageReport {
        let pooled_vector_bytes = (self.len() * self.dim * 4) as u64;
        let per_token_vector_bytes: u64 = filtered_doc_lens
            .iter()
            .map(|&l| (l * self.dim * 4) as u64)
            .sum();
        let mean_filtered_doc_len =
            filtered_doc_lens.iter().sum::<usize>() as f64 / filtered_doc_lens.len() as f64;
        StorageReport {
            num_docs: self.len(),
            dim: self.dim,
            pooled_vector_bytes,
            pooled_file_bytes: self.file_bytes(),
            per_token_vector_bytes,
            mean_filtered_doc_len,
            ratio: per_token_vector_bytes as f64 / pooled_vector_bytes as f64,
        }
    }
}

fn pooled_f32(encoder: &Encoder, proj: &Projection, ids: &[u32]) -> Result<Vec<f32>> {
    let encoded = encoder.encode_pooled(ids, proj)?;
    Ok(encoded
        .pooled
        .expect("encode_pooled always sets pooled")
        .into_iter()
        .map(|v| v as f32)
        .collect())
}

/// Storage contrast between the pooled index and a per-token store.
#[derive(Debug, Clone, PartialEq)]
pub struct StorageReport {
    pub num_docs: usize,
    pub dim: usize,
    /// N · dim · 4 — the vector payload alone.
    pub pooled_vector_bytes: u64,
    /// Payload plus header and id table; equals the size of the saved file.
    pub pooled_file_bytes: u64,
    /// Σ filtered_len · dim · 4 for the whole corpus.
    pub per_token_vector_bytes: u64,
    pub mean_filtered_doc_len: f64,
    /// per_token_vector_bytes / pooled_vector_bytes.
    pub ratio: f64,
}

// ─────────────────────────────────────────────────────────────────────────────
// Tests
// ─────────────────────────────────────────────────────────────────────────────
