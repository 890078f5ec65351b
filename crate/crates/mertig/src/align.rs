//! Seed-and-extend read mapping against assembled sequence.
//!
//! Assembly k-mers occur at most once across the UU contigs and diplotigs,
//! so a single exact k-mer match pins a read placement completely. Each
//! read is scanned for its leftmost and rightmost seeding windows; when
//! both imply one placement and the bases between them match exactly, the
//! read is reported once, extended to each end with at most one mismatch
//! or one single-base indel per end (one indel total). Otherwise the two
//! seeds are reported separately, extended inward with zero tolerance, and
//! the stretch between them is scanned for further exact placements.

use std::collections::HashMap;
use std::io::{self, BufRead, Write};

use rayon::prelude::*;
use thiserror::Error;

use crate::fastx::QualSeq;
use crate::kmer::{for_each_kmer, revcomp};

/// Where one assembly k-mer lives.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeedLoc {
    pub seq: u32,
    pub pos: u32,
    /// True when the canonical k-mer is the reverse complement of the
    /// sequence window at `pos`.
    pub flipped: bool,
}

/// Canonical k-mer → unique location over the indexed sequences.
#[derive(Debug)]
pub struct SeedIndex {
    k: usize,
    map: HashMap<u128, SeedLoc>,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("seed k-mer {kmer} occurs twice: seq {} at {} and seq {} at {}", first.0, first.1, second.0, second.1)]
pub struct DuplicateKmer {
    pub kmer: String,
    pub first: (u32, u32),
    pub second: (u32, u32),
}

impl SeedIndex {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn get(&self, word: u128) -> Option<&SeedLoc> {
        self.map.get(&word)
    }
}

/// Indexes every k-mer of every sequence. A k-mer seen twice violates the
/// uniqueness guarantee the mapper rests on, so the build refuses it and
/// names both occurrences.
pub fn build_index<S: AsRef<[u8]>>(seqs: &[S], k: usize) -> Result<SeedIndex, DuplicateKmer> {
    let mut map = HashMap::new();
    for (si, s) in seqs.iter().enumerate() {
        let mut dup = None;
        for_each_kmer(s.as_ref(), None, k, |inst| {
            if dup.is_some() {
                return;
            }
            let loc = SeedLoc { seq: si as u32, pos: inst.pos as u32, flipped: inst.flipped };
            if let Some(prev) = map.insert(inst.kmer.word(), loc) {
                dup = Some(DuplicateKmer {
                    kmer: inst.kmer.to_string(),
                    first: (prev.seq, prev.pos),
                    second: (loc.seq, loc.pos),
                });
            }
        });
        if let Some(d) = dup {
            return Err(d);
        }
    }
    Ok(SeedIndex { k, map })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum AlnClass {
    /// One combined placement covering both outermost seeds.
    Full,
    /// One end's seed, extended inward exactly and outward with tolerance.
    EndExtended,
    /// A further exact placement found between the outermost seeds.
    InnerScan,
}

impl AlnClass {
    pub fn token(self) -> &'static str {
        match self {
            AlnClass::Full => "full",
            AlnClass::EndExtended => "end-extended",
            AlnClass::InnerScan => "inner-scan",
        }
    }

    pub fn from_token(t: &str) -> Option<AlnClass> {
        Some(match t {
            "full" => AlnClass::Full,
            "end-extended" => AlnClass::EndExtended,
            "inner-scan" => AlnClass::InnerScan,
            _ => return None,
        })
    }
}

/// One read placement. Intervals are half-open; read coordinates are
/// always on the read as sequenced, sequence coordinates on the indexed
/// sequence's forward strand. On the minus strand, `read_start` pairs with
/// `seq_end - 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct ReadAlignment {
    /// Index of the read within the aligned batch.
    pub read: u32,
    /// 0 = unpaired, otherwise 1 or 2.
    pub pair_slot: u8,
    pub read_start: u32,
    pub read_end: u32,
    pub seq: u32,
    pub seq_start: u32,
    pub seq_end: u32,
    pub minus: bool,
    pub mismatches: u32,
    pub indels: u32,
    pub class: AlnClass,
}

impl ReadAlignment {
    pub fn read_len(&self) -> u32 {
        self.read_end - self.read_start
    }
}

/// Why an exact run stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Stop {
    ReadEnd,
    SeqEnd,
    Conflict,
}

/// Matches `r` against `s` from (`ri`, `si`) stepping by `dir`, returning
/// the number of matched bases and what ended the run.
fn run_exact(r: &[u8], s: &[u8], ri: isize, si: isize, dir: isize) -> (usize, Stop) {
    let mut n = 0usize;
    let (mut ri, mut si) = (ri, si);
    loop {
        if ri < 0 || ri >= r.len() as isize {
            return (n, Stop::ReadEnd);
        }
        if si < 0 || si >= s.len() as isize {
            return (n, Stop::SeqEnd);
        }
        if r[ri as usize] != s[si as usize] {
            return (n, Stop::Conflict);
        }
        n += 1;
        ri += dir;
        si += dir;
    }
}

/// One way of extending an end: how far it got and what it spent.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct EndCand {
    read_adv: usize,
    seq_adv: usize,
    mm: u32,
    indels: u32,
    reached: bool,
}

/// All maximal single-event extensions from (`ri`, `si`) toward one read
/// end. The event sits at the first conflict — placing it earlier can
/// never do better — and an indel must be followed by at least one match,
/// while a mismatch may also consume the final read base.
fn extend_end(r: &[u8], s: &[u8], ri: isize, si: isize, dir: isize) -> Vec<EndCand> {
    let (a, stop) = run_exact(r, s, ri, si, dir);
    let a_i = a as isize;
    let mut out = vec![EndCand {
        read_adv: a,
        seq_adv: a,
        mm: 0,
        indels: 0,
        reached: stop == Stop::ReadEnd,
    }];
    if stop != Stop::Conflict {
        return out;
    }
    let (cr, cs) = (ri + a_i * dir, si + a_i * dir);
    // mismatch: consume the conflicting pair, run on
    {
        let (n, st) = run_exact(r, s, cr + dir, cs + dir, dir);
        if n >= 1 || st == Stop::ReadEnd {
            out.push(EndCand {
                read_adv: a + 1 + n,
                seq_adv: a + 1 + n,
                mm: 1,
                indels: 0,
                reached: st == Stop::ReadEnd,
            });
        }
    }
    // insertion: the read carries an extra base
    {
        let (n, st) = run_exact(r, s, cr + dir, cs, dir);
        if n >= 1 {
            out.push(EndCand {
                read_adv: a + 1 + n,
                seq_adv: a + n,
                mm: 0,
                indels: 1,
                reached: st == Stop::ReadEnd,
            });
        }
    }
    // deletion: the sequence carries an extra base
    {
        let (n, st) = run_exact(r, s, cr, cs + dir, dir);
        if n >= 1 {
            out.push(EndCand {
                read_adv: a + n,
                seq_adv: a + 1 + n,
                mm: 0,
                indels: 1,
                reached: st == Stop::ReadEnd,
            });
        }
    }
    out
}

/// Ranking key: reach the read end first, then cover more of the read,
/// with fewer mismatches, then fewer indels; a final deterministic nudge
/// prefers the variant consuming more sequence.
fn cand_key(c: &EndCand) -> (bool, usize, i64, i64, usize) {
    (c.reached, c.read_adv, -i64::from(c.mm), -i64::from(c.indels), c.seq_adv)
}

fn best_pair(left: &[EndCand], right: &[EndCand]) -> (EndCand, EndCand) {
    let mut best: Option<(EndCand, EndCand)> = None;
    for l in left {
        for r in right {
            if l.indels + r.indels > 1 {
                continue;
            }
            let key = (
                u8::from(l.reached) + u8::from(r.reached),
                l.read_adv + r.read_adv,
                -i64::from(l.mm + r.mm),
                -i64::from(l.indels + r.indels),
                l.seq_adv + r.seq_adv,
            );
            let better = match &best {
                None => true,
                Some((bl, br)) => {
                    key > (
                        u8::from(bl.reached) + u8::from(br.reached),
                        bl.read_adv + br.read_adv,
                        -i64::from(bl.mm + br.mm),
                        -i64::from(bl.indels + br.indels),
                        bl.seq_adv + br.seq_adv,
                    )
                }
            };
            if better {
                best = Some((*l, *r));
            }
        }
    }
    best.expect("the zero-event candidates always pair")
}

/// A seed hit in read-forward coordinates.
#[derive(Clone, Copy, Debug)]
struct Hit {
    /// Window start in the read as sequenced.
    pos: usize,
    loc: SeedLoc,
    /// Read aligns to the sequence's reverse strand.
    minus: bool,
}

/// Placement identity: sequence, strand, and the diagonal in oriented-read
/// space.
fn placement(h: &Hit, k: usize, read_len: usize) -> (u32, bool, i64) {
    let opos = if h.minus { read_len - k - h.pos } else { h.pos } as i64;
    (h.loc.seq, h.minus, i64::from(h.loc.pos) - opos)
}

struct Ctx<'a> {
    seqs: &'a [&'a [u8]],
    k: usize,
    read_idx: u32,
    pair_slot: u8,
    fwd: Vec<u8>,
    rc: Vec<u8>,
}

impl<'a> Ctx<'a> {
    fn oriented_read(&self, minus: bool) -> &[u8] {
        if minus {
            &self.rc
        } else {
            &self.fwd
        }
    }

    /// Converts an oriented-read interval back to as-sequenced coordinates.
    fn read_interval(&self, minus: bool, os: usize, oe: usize) -> (u32, u32) {
        if minus {
            ((self.fwd.len() - oe) as u32, (self.fwd.len() - os) as u32)
        } else {
            (os as u32, oe as u32)
        }
    }

    fn make(&self, h: &Hit, os: usize, oe: usize, ss: usize, se: usize, mm: u32, indels: u32, class: AlnClass) -> ReadAlignment {
        let (read_start, read_end) = self.read_interval(h.minus, os, oe);
        ReadAlignment {
            read: self.read_idx,
            pair_slot: self.pair_slot,
            read_start,
            read_end,
            seq: h.loc.seq,
            seq_start: ss as u32,
            seq_end: se as u32,
            minus: h.minus,
            mismatches: mm,
            indels,
            class,
        }
    }

    /// The combined placement: the exact block spanning both outermost
    /// seeds, extended to each read end under the shared indel budget.
    fn combined(&self, l: &Hit, r: &Hit) -> ReadAlignment {
        let k = self.k;
        let read = self.oriented_read(l.minus);
        let s = self.seqs[l.loc.seq as usize];
        let (ol, or) = if l.minus {
            (read.len() - k - r.pos, read.len() - k - l.pos)
        } else {
            (l.pos, r.pos)
        };
        let diag = i64::from(if l.minus { r.loc.pos } else { l.loc.pos }) - ol as i64;
        let sl = (ol as i64 + diag) as usize;
        let left = extend_end(read, s, ol as isize - 1, sl as isize - 1, -1);
        let right = extend_end(
            read,
            s,
            (or + k) as isize,
            (or as i64 + diag + k as i64) as isize,
            1,
        );
        let (lb, rb) = best_pair(&left, &right);
        self.make(
            l,
            ol - lb.read_adv,
            or + k + rb.read_adv,
            sl - lb.seq_adv,
            (or as i64 + diag) as usize + k + rb.seq_adv,
            lb.mm + rb.mm,
            lb.indels + rb.indels,
            AlnClass::Full,
        )
    }

    /// One outermost seed reported alone: outward tolerates one event,
    /// inward is exact.
    fn end_alignment(&self, h: &Hit, outward_is_read_start: bool) -> ReadAlignment {
        let k = self.k;
        let read = self.oriented_read(h.minus);
        let s = self.seqs[h.loc.seq as usize];
        let o = if h.minus { read.len() - k - h.pos } else { h.pos };
        let so = h.loc.pos as usize;
        // In oriented space the read start maps to the left end exactly
        // when the hit is on the plus strand.
        let outward_left = outward_is_read_start != h.minus;
        let (mut os, mut oe, mut ss, mut se) = (o, o + k, so, so + k);
        let best;
        if outward_left {
            let cands = extend_end(read, s, os as isize - 1, ss as isize - 1, -1);
            best = *cands.iter().max_by_key(|c| cand_key(c)).unwrap();
            os -= best.read_adv;
            ss -= best.seq_adv;
            let (n, _) = run_exact(read, s, oe as isize, se as isize, 1);
            oe += n;
            se += n;
        } else {
            let cands = extend_end(read, s, oe as isize, se as isize, 1);
            best = *cands.iter().max_by_key(|c| cand_key(c)).unwrap();
            oe += best.read_adv;
            se += best.seq_adv;
            let (n, _) = run_exact(read, s, os as isize - 1, ss as isize - 1, -1);
            os -= n;
            ss -= n;
        }
        self.make(h, os, oe, ss, se, best.mm, best.indels, AlnClass::EndExtended)
    }

    /// A middle hit extended exactly in both directions, zero tolerance.
    fn inner_alignment(&self, h: &Hit) -> ReadAlignment {
        let k = self.k;
        let read = self.oriented_read(h.minus);
        let s = self.seqs[h.loc.seq as usize];
        let o = if h.minus { read.len() - k - h.pos } else { h.pos };
        let so = h.loc.pos as usize;
        let (nl, _) = run_exact(read, s, o as isize - 1, so as isize - 1, -1);
        let (nr, _) = run_exact(read, s, (o + k) as isize, (so + k) as isize, 1);
        self.make(h, o - nl, o + k + nr, so - nl, so + k + nr, 0, 0, AlnClass::InnerScan)
    }

    /// The bases between two same-placement seeds must match the sequence
    /// exactly for the placements to merge into one alignment.
    fn middle_exact(&self, l: &Hit, r: &Hit) -> bool {
        let k = self.k;
        let read = self.oriented_read(l.minus);
        let s = self.seqs[l.loc.seq as usize];
        let (ol, or) = if l.minus {
            (read.len() - k - r.pos, read.len() - k - l.pos)
        } else {
            (l.pos, r.pos)
        };
        let diag = i64::from(if l.minus { r.loc.pos } else { l.loc.pos }) - ol as i64;
        (ol..or + k).all(|p| {
            let sp = p as i64 + diag;
            sp >= 0 && (sp as usize) < s.len() && read[p] == s[sp as usize]
        })
    }
}

/// Aligns one read. `seqs` must be the sequences the index was built from,
/// in the same order; `read_idx` tags the output records.
pub fn align_read(
    read: &QualSeq,
    index: &SeedIndex,
    seqs: &[&[u8]],
    read_idx: u32,
) -> Vec<ReadAlignment> {
    let k = index.k();
    let mut hits: Vec<Hit> = Vec::new();
    for_each_kmer(&read.bases, None, k, |inst| {
        if let Some(&loc) = index.get(inst.kmer.word()) {
            hits.push(Hit { pos: inst.pos, loc, minus: inst.flipped != loc.flipped });
        }
    });
    if hits.is_empty() {
        return Vec::new();
    }
    let ctx = Ctx {
        seqs,
        k,
        read_idx,
        pair_slot: read.pair.unwrap_or(0),
        fwd: read.bases.clone(),
        rc: revcomp(&read.bases),
    };
    let rl = read.bases.len();
    let l = hits[0];
    let r = hits[hits.len() - 1];
    if placement(&l, k, rl) == placement(&r, k, rl) && ctx.middle_exact(&l, &r) {
        return vec![ctx.combined(&l, &r)];
    }
    let mut out = vec![ctx.end_alignment(&l, true), ctx.end_alignment(&r, false)];
    let taken = [placement(&l, k, rl), placement(&r, k, rl)];
    for h in &hits[1..hits.len() - 1] {
        let p = placement(h, k, rl);
        if taken.contains(&p) {
            continue;
        }
        let a = ctx.inner_alignment(h);
        if !out.contains(&a) {
            out.push(a);
        }
    }
    out
}

/// Aligns a batch in parallel; output records keep read order.
pub fn align_reads(reads: &[QualSeq], index: &SeedIndex, seqs: &[&[u8]]) -> Vec<ReadAlignment> {
    reads
        .par_iter()
        .enumerate()
        .map(|(i, r)| align_read(r, index, seqs, i as u32))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

/// Where a contig sits inside a scaffold, for projecting alignments
/// forward.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ContigPlacement {
    pub scaffold: u32,
    /// Scaffold coordinate where the contig's span begins.
    pub offset: u32,
    pub len: u32,
    /// Contig is reverse-complemented within the scaffold.
    pub minus: bool,
}

/// Rewrites a contig-coordinate alignment into scaffold coordinates.
pub fn project_alignment(aln: &ReadAlignment, p: &ContigPlacement) -> ReadAlignment {
    debug_assert!(aln.seq_end <= p.len);
    let (seq_start, seq_end) = if p.minus {
        (p.offset + p.len - aln.seq_end, p.offset + p.len - aln.seq_start)
    } else {
        (p.offset + aln.seq_start, p.offset + aln.seq_end)
    };
    ReadAlignment {
        seq: p.scaffold,
        seq_start,
        seq_end,
        minus: aln.minus != p.minus,
        ..*aln
    }
}

/// Inverse of [`project_alignment`] for the same placement. The caller
/// names the contig, since the placement alone does not identify it.
pub fn unproject_alignment(aln: &ReadAlignment, p: &ContigPlacement, contig: u32) -> ReadAlignment {
    let (seq_start, seq_end) = if p.minus {
        (p.offset + p.len - aln.seq_end, p.offset + p.len - aln.seq_start)
    } else {
        (aln.seq_start - p.offset, aln.seq_end - p.offset)
    };
    ReadAlignment {
        seq: contig,
        seq_start,
        seq_end,
        minus: aln.minus != p.minus,
        ..*aln
    }
}

/// Writes the alignment rows consumed by scaffolding and gap closure:
/// read id, pair slot, read interval, sequence name, sequence interval,
/// strand, mismatches, indels, class.
pub fn write_alignments<W: Write>(
    mut w: W,
    alns: &[ReadAlignment],
    reads: &[QualSeq],
    seq_names: &[String],
) -> io::Result<()> {
    for a in alns {
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            reads[a.read as usize].id,
            a.pair_slot,
            a.read_start,
            a.read_end,
            seq_names[a.seq as usize],
            a.seq_start,
            a.seq_end,
            if a.minus { '-' } else { '+' },
            a.mismatches,
            a.indels,
            a.class.token(),
        )?;
    }
    Ok(())
}

/// Parses alignment rows back, resolving read ids and sequence names
/// through the supplied tables. Lines starting with '#' are skipped.
pub fn read_alignments<R: BufRead>(
    r: R,
    read_ids: &HashMap<String, u32>,
    seq_ids: &HashMap<String, u32>,
) -> io::Result<Vec<ReadAlignment>> {
    let bad = |line: usize, msg: &str| {
        io::Error::new(io::ErrorKind::InvalidData, format!("alignment line {}: {}", line, msg))
    };
    let mut out = Vec::new();
    for (ln, line) in r.lines().enumerate() {
        let line = line?;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 11 {
            return Err(bad(ln + 1, "expected 11 fields"));
        }
        let read = *read_ids.get(f[0]).ok_or_else(|| bad(ln + 1, "unknown read id"))?;
        let seq = *seq_ids.get(f[4]).ok_or_else(|| bad(ln + 1, "unknown sequence name"))?;
        let num = |s: &str| s.parse::<u32>().map_err(|_| bad(ln + 1, "bad number"));
        out.push(ReadAlignment {
            read,
            pair_slot: num(f[1])? as u8,
            read_start: num(f[2])?,
            read_end: num(f[3])?,
            seq,
            seq_start: num(f[5])?,
            seq_end: num(f[6])?,
            minus: match f[7] {
                "+" => false,
                "-" => true,
                _ => return Err(bad(ln + 1, "bad strand")),
            },
            mismatches: num(f[8])?,
            indels: num(f[9])?,
            class: AlnClass::from_token(f[10]).ok_or_else(|| bad(ln + 1, "bad class"))?,
        });
    }
    Ok(out)
}
