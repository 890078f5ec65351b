//! Minimal streaming FASTA/FASTQ readers and writers.
//!
//! FASTQ qualities are phred+33; records carry decoded quality values, not
//! ASCII. Sequence ids ending in `/1` or `/2` expose that pair slot.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FastxError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("{path}:{line}: {msg}")]
    Format {
        path: String,
        line: u64,
        msg: String,
    },
}

/// A read with per-base qualities.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QualSeq {
    pub id: String,
    pub bases: Vec<u8>,
    /// Decoded phred values, same length as `bases`.
    pub quals: Vec<u8>,
    /// 1 or 2 when the id carries a `/1` `/2` suffix.
    pub pair: Option<u8>,
}

impl QualSeq {
    pub fn new(id: impl Into<String>, bases: Vec<u8>, quals: Vec<u8>) -> QualSeq {
        let id = id.into();
        let pair = match id.as_bytes() {
            [.., b'/', b'1'] => Some(1),
            [.., b'/', b'2'] => Some(2),
            _ => None,
        };
        QualSeq { id, bases, quals, pair }
    }

    /// Id without any `/1` `/2` suffix: the fragment both mates share.
    pub fn fragment_id(&self) -> &str {
        if self.pair.is_some() {
            &self.id[..self.id.len() - 2]
        } else {
            &self.id
        }
    }
}

/// Streaming FASTQ reader over any buffered source.
pub struct FastqReader<R: BufRead> {
    src: R,
    path: String,
    line: u64,
    buf: String,
}

impl FastqReader<BufReader<File>> {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, FastxError> {
        let p = path.as_ref();
        let file = File::open(p)?;
        Ok(FastqReader::new(
            BufReader::new(file),
            p.display().to_string(),
        ))
    }
}

impl<R: BufRead> FastqReader<R> {
    pub fn new(src: R, path: String) -> Self {
        FastqReader {
            src,
            path,
            line: 0,
            buf: String::new(),
        }
    }

    fn err(&self, msg: impl Into<String>) -> FastxError {
        FastxError::Format {
            path: self.path.clone(),
            line: self.line,
            msg: msg.into(),
        }
    }

    fn next_line(&mut self) -> Result<Option<&str>, FastxError> {
        self.buf.clear();
        let n = self.src.read_line(&mut self.buf)?;
        if n == 0 {
            return Ok(None);
        }
        self.line += 1;
        Ok(Some(self.buf.trim_end_matches(['\n', '\r'])))
    }
}

impl<R: BufRead> Iterator for FastqReader<R> {
    type Item = Result<QualSeq, FastxError>;

    fn next(&mut self) -> Option<Self::Item> {
        let head = match self.next_line() {
            Ok(None) => return None,
            Ok(Some(l)) if l.is_empty() => return self.next(), // tolerate blank tail lines
            Ok(Some(l)) => l.to_string(),
            Err(e) => return Some(Err(e)),
        };
        let parse = (|| {
            let id = head
                .strip_prefix('@')
                .ok_or_else(|| self.err("expected '@' header"))?
                .split_whitespace()
                .next()
                .unwrap_or("")
                .to_string();
            if id.is_empty() {
                return Err(self.err("empty record id"));
            }
            let bases = match self.next_line()? {
                Some(l) => l.as_bytes().to_vec(),
                None => return Err(self.err("truncated record: missing sequence")),
            };
            match self.next_line()? {
                Some(l) if l.starts_with('+') => {}
                _ => return Err(self.err("expected '+' separator")),
            }
            let qline = match self.next_line()? {
                Some(l) => l.as_bytes().to_vec(),
                None => return Err(self.err("truncated record: missing qualities")),
            };
            if qline.len() != bases.len() {
                return Err(self.err(format!(
                    "quality length {} != sequence length {}",
                    qline.len(),
                    bases.len()
                )));
            }
            let mut quals = Vec::with_capacity(qline.len());
            for &q in &qline {
                if !(b'!'..=b'~').contains(&q) {
                    return Err(self.err(format!("quality byte {:#x} outside phred+33", q)));
                }
                quals.push(q - b'!');
            }
            Ok(QualSeq::new(id, bases, quals))
        })();
        Some(parse)
    }
}

/// Reads a whole FASTA file keeping the full header line after `>`
/// (id plus any description). Sequence may wrap over any number of
/// lines; `#` comment lines are skipped anywhere.
pub fn read_fasta_full(path: impl AsRef<Path>) -> Result<Vec<(String, Vec<u8>)>, FastxError> {
    let p = path.as_ref();
    let file = File::open(p)?;
    let mut out: Vec<(String, Vec<u8>)> = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(head) = line.strip_prefix('>') {
            if head.split_whitespace().next().is_none() {
                return Err(FastxError::Format {
                    path: p.display().to_string(),
                    line: n as u64 + 1,
                    msg: "empty FASTA id".into(),
                });
            }
            out.push((head.to_string(), Vec::new()));
        } else {
            match out.last_mut() {
                Some((_, seq)) => seq.extend(line.trim_end().as_bytes()),
                None => {
                    return Err(FastxError::Format {
                        path: p.display().to_string(),
                        line: n as u64 + 1,
                        msg: "sequence before any '>' header".into(),
                    })
                }
            }
        }
    }
    Ok(out)
}

/// Reads a whole FASTA file. Ids stop at the first whitespace; sequence may
/// wrap over any number of lines; `#` comment lines are skipped.
pub fn read_fasta(path: impl AsRef<Path>) -> Result<Vec<(String, Vec<u8>)>, FastxError> {
    Ok(read_fasta_full(path)?
        .into_iter()
        .map(|(head, seq)| {
            let id = head.split_whitespace().next().unwrap_or("").to_string();
            (id, seq)
        })
        .collect())
}

/// Writes FASTA with 80-column wrapping. Each item is (header, sequence);
/// the header goes after '>' verbatim, so it may carry a description.
pub fn write_fasta<'a>(
    path: impl AsRef<Path>,
    records: impl IntoIterator<Item = (&'a str, &'a [u8])>,
) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for (id, seq) in records {
        writeln!(w, ">{}", id)?;
        for chunk in seq.chunks(80) {
            w.write_all(chunk)?;
            w.write_all(b"\n")?;
        }
    }
    w.flush()
}

/// Writes FASTQ with phred+33 qualities.
pub fn write_fastq<'a>(
    path: impl AsRef<Path>,
    records: impl IntoIterator<Item = &'a QualSeq>,
) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in records {
        writeln!(w, "@{}", r.id)?;
        w.write_all(&r.bases)?;
        w.write_all(b"\n+\n")?;
        let ascii: Vec<u8> = r.quals.iter().map(|&q| q + b'!').collect();
        w.write_all(&ascii)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}
