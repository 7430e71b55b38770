//! Exchange file formats: 6-column TREC runs, 4-column qrels, and the TSV
//! layouts for corpora, queries, and training triples.
//!
//! Lines starting with `#` are treated as comments everywhere, which is how
//! the CLI embeds provenance headers in text outputs.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::encoder::{create, open};
use crate::error::{Error, Result};

/// Ordered (doc id, score) results for one query, best first.
pub type RankedList = Vec<(String, f64)>;

/// A whole run: query id → ranked list. BTreeMap keeps emission order
/// deterministic.
pub type Run = BTreeMap<String, RankedList>;

/// Relevance judgments: query id → doc id → grade.
pub type Qrels = BTreeMap<String, BTreeMap<String, u32>>;

/// Sort a ranked list by descending score, ties by ascending doc id.
pub fn sort_ranked(list: &mut RankedList) {
    list.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .expect("scores must be finite")
            .then_with(|| a.0.cmp(&b.0))
    });
}

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let file = open(path)?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let trimmed = line.trim_end();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        out.push((idx + 1, trimmed.to_string()));
    }
    Ok(out)
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

// ─────────────────────────────────────────────────────────────────────────────
// TREC runs
// ─────────────────────────────────────────────────────────────────────────────

/// Read a 6-column run file (`qid Q0 docid rank score tag`). The rank
/// column is ignored; each list is re-sorted by descending score with
/// ascending doc-id tie-breaks so downstream stages see one canonical order.
pub fn read_run<P: AsRef<Path>>(path: P) -> Result<Run> {
    let path = path.as_ref();
    let mut run: Run = BTreeMap::new();
    for (lineno, line) in read_lines(path)? {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 6 {
            return Err(parse_err(
                path,
                lineno,
                format!("expected 6 fields, found {}", fields.len()),
            ));
        }
        let score: f64 = fields[4]
            .parse()
            .map_err(|e| parse_err(path, lineno, format!("bad score: {e}")))?;
        if !score.is_finite() {
            return Err(parse_err(path, lineno, "non-finite score"));
        }
        run.entry(fields[0].to_string())
            .or_default()
            .push((fields[2].to_string(), score));
    }
    for list in run.values_mut() {
        sort_ranked(list);
    }
    Ok(run)
}

/// Write a run in 6-column TREC form with 1-based ranks. An optional
/// header is emitted as a leading `#` comment line.
pub fn write_run<P: AsRef<Path>>(path: P, run: &Run, tag: &str, header: Option<&str>) -> Result<()> {
    let file = create(path.as_ref())?;
    let mut w = BufWriter::new(file);
    if let Some(h) = header {
        writeln!(w, "# {h}")?;
    }
    for (qid, list) in run {
        for (rank, (docid, score)) in list.iter().enumerate() {
            writeln!(w, "{qid} Q0 {docid} {} {score:.6} {tag}", rank + 1)?;
        }
    }
    Ok(())
}

// ─────────────────────────────────────────────────────────────────────────────
// Qrels
// ─────────────────────────────────────────────────────────────────────────────

/// Read 4-column qrels (`qid 0 docid grade`).
pub fn read_qrels<P: AsRef<Path>>(path: P) -> Result<Qrels> {
    let path = path.as_ref();
    let mut qrels: Qrels = BTreeMap::new();
    for (lineno, line) in read_lines(path)? {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(parse_err(
                path,
                lineno,
                format!("expected 4 fields, found {}", fields.len()),
            ));
        }
        let grade: u32 = fields[3]
            .parse()
            .map_err(|e| parse_err(path, lineno, format!("bad grade: {e}")))?;
        qrels
            .entry(fields[0].to_string())
            .or_default()
            .insert(fields[2].to_string(), grade);
    }
    Ok(qrels)
}

pub fn write_qrels<P: AsRef<Path>>(path: P, qrels: &Qrels, header: Option<&str>) -> Result<()> {
    let file = create(path.as_ref())?;
    let mut w = BufWriter::new(file);
    if let Some(h) = header {
        writeln!(w, "# {h}")?;
    }
    for (qid, docs) in qrels {
        for (docid, grade) in docs {
            writeln!(w, "{qid} 0 {docid} {grade}")?;
        }
    }
    Ok(())
}

// ─────────────────────────────────────────────────────────────────────────────
// TSV layouts
// ─────────────────────────────────────────────────────────────────────────────

/// Read an `id<TAB>text` file (corpus or query set), preserving order.
pub fn read_pairs_tsv<P: AsRef<Path>>(path: P) -> Result<Vec<(String, String)>> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for (lineno, line) in read_lines(path)? {
        match line.split_once('\t') {
            Some((id, text)) if !id.is_empty() && !text.is_empty() => {
                out.push((id.to_string(), text.to_string()));
            }
            _ => return Err(parse_err(path, lineno, "expected id<TAB>text")),
        }
    }
    Ok(out)
}

pub fn write_pairs_tsv<P: AsRef<Path>>(
    path: P,
    pairs: &[(String, String)],
    header: Option<&str>,
) -> Result<()> {
    let file = create(path.as_ref())?;
    let mut w = BufWriter::new(file);
    if let Some(h) = header {
        writeln!(w, "# {h}")?;
    }
    for (id, text) in pairs {
        writeln!(w, "{id}\t{text}")?;
    }
    Ok(())
}

/// Read training triples: `query<TAB>positive<TAB>negative` texts.
pub fn read_triples_tsv<P: AsRef<Path>>(path: P) -> Result<Vec<(String, String, String)>> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for (lineno, line) in read_lines(path)? {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 || fields.iter().any(|f| f.is_empty()) {
            return Err(parse_err(path, lineno, "expected query<TAB>positive<TAB>negative"));
        }
        out.push((
            fields[0].to_string(),
            fields[1].to_string(),
            fields[2].to_string(),
        ));
    }
    Ok(out)
}

pub fn write_triples_tsv<P: AsRef<Path>>(
    path: P,
    triples: &[(String, String, String)],
    header: Option<&str>,
) -> Result<()> {
    let file = create(path.as_ref())?;
    let mut w = BufWriter::new(file);
    if let Some(h) = header {
        writeln!(w, "# {h}")?;
    }
    for (q, pos, neg) in triples {
        writeln!(w, "{q}\t{pos}\t{neg}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_round_trip_and_resort() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.run");
        // Deliberately out of order with a tie: d1/d2 share a score.
        std::fs::write(
            &path,
            "# header\nq1 Q0 d2 1 0.500000 t\nq1 Q0 d3 2 0.900000 t\nq1 Q0 d1 3 0.500000 t\n",
        )
        .unwrap();
        let run = read_run(&path).unwrap();
        let list = &run["q1"];
        assert_eq!(list[0].0, "d3");
        assert_eq!(list[1].0, "d1"); // tie broken by ascending doc id
        assert_eq!(list[2].0, "d2");

        let out = dir.path().join("b.run");
        write_run(&out, &run, "tct-fused", Some("prov")).unwrap();
        let reread = read_run(&out).unwrap();
        assert_eq!(reread, run);
        let text = std::fs::read_to_string(&out).unwrap();
        assert!(text.starts_with("# prov\n"));
        assert!(text.contains(" tct-fused"));
    }

    #[test]
    fn run_rejects_bad_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.run");
        std::fs::write(&path, "q1 Q0 d1 1 nope tag\n").unwrap();
        assert!(matches!(read_run(&path), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn qrels_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("q.qrels");
        let mut qrels: Qrels = BTreeMap::new();
        qrels
            .entry("q1".into())
            .or_default()
            .insert("d1".into(), 2);
        qrels
            .entry("q2".into())
            .or_default()
            .insert("d9".into(), 1);
        write_qrels(&path, &qrels, None).unwrap();
        assert_eq!(read_qrels(&path).unwrap(), qrels);
    }

    #[test]
    fn pairs_and_triples_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let pairs = vec![
            ("d1".to_string(), "some text".to_string()),
            ("d2".to_string(), "more text".to_string()),
        ];
        let p = dir.path().join("c.tsv");
        write_pairs_tsv(&p, &pairs, Some("gen")).unwrap();
        assert_eq!(read_pairs_tsv(&p).unwrap(), pairs);

        let triples = vec![(
            "query words".to_string(),
            "positive passage".to_string(),
            "negative passage".to_string(),
        )];
        let t = dir.path().join("t.tsv");
        write_triples_tsv(&t, &triples, None).unwrap();
        assert_eq!(read_triples_tsv(&t).unwrap(), triples);
    }

    #[test]
    fn missing_file_reports_path() {
        let err = read_run("/nonexistent/x.run").unwrap_err();
        assert!(err.to_string().contains("x.run"));
    }
}
