//! Synthetic ground truth: genomes, haplotype pairs, and paired reads.
//!
//! Every operation runs single-threaded off one seeded ChaCha20 stream, so
//! a spec plus a seed pins every output byte. Each generator returns truth
//! alongside its sequence — repeat placements for a genome, the variant
//! list for a haplotype pair, per-read origins for read sets — with enough
//! detail to score any downstream stage against what was planted.

use std::io::{self, Write};

use rand::distributions::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use statrs::distribution::Normal;

use crate::fastx::QualSeq;
use crate::kmer::revcomp;
use crate::scaffold::ReadPair;

/// One family of near-identical sequence planted over the background.
#[derive(Clone, Debug)]
pub struct RepeatSpec {
    pub unit_len: usize,
    pub copies: usize,
    /// Per-base substitution probability applied independently to each copy.
    pub divergence: f64,
}

#[derive(Clone, Debug)]
pub struct GenomeSpec {
    pub length: usize,
    /// Probability that a background position is G or C.
    pub gc: f64,
    pub repeats: Vec<RepeatSpec>,
    pub seed: u64,
}

/// Where one repeat copy landed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RepeatPlacement {
    pub family: u32,
    pub copy: u32,
    pub start: usize,
    pub len: usize,
}

fn random_base(rng: &mut ChaCha20Rng, gc: f64) -> u8 {
    match (rng.gen::<f64>() < gc, rng.gen::<bool>()) {
        (true, true) => b'G',
        (true, false) => b'C',
        (false, true) => b'A',
        (false, false) => b'T',
    }
}

/// Uniform pick among the three bases that differ from `b`.
fn substitute(rng: &mut ChaCha20Rng, b: u8) -> u8 {
    loop {
        let c = b"ACGT"[rng.gen_range(0..4)];
        if c != b {
            return c;
        }
    }
}

fn place(
    rng: &mut ChaCha20Rng,
    genome_len: usize,
    len: usize,
    occupied: &mut Vec<(usize, usize)>,
) -> usize {
    assert!(len <= genome_len, "repeat unit longer than the genome");
    for _ in 0..10_000 {
        let start = rng.gen_range(0..=genome_len - len);
        if occupied.iter().all(|&(s, e)| start + len <= s || e <= start) {
            occupied.push((start, start + len));
            return start;
        }
    }
    panic!("no room left for a {len} bp repeat copy");
}

/// Random genome with planted repeats. The background honours the GC
/// fraction; each repeat family gets a fresh random unit whose copies are
/// written over non-overlapping positions, independently mutated at the
/// family's divergence. Placements come back sorted by start.
pub fn generate_genome(spec: &GenomeSpec) -> (Vec<u8>, Vec<RepeatPlacement>) {
    assert!(spec.length > 0, "genome length must be positive");
    for r in &spec.repeats {
        assert!(
            (0.0..1.0).contains(&r.divergence),
            "divergence must be in [0,1)"
        );
    }
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let mut genome: Vec<u8> = (0..spec.length)
        .map(|_| random_base(&mut rng, spec.gc))
        .collect();
    let mut placements = Vec::new();
    let mut occupied: Vec<(usize, usize)> = Vec::new();
    for (family, rep) in spec.repeats.iter().enumerate() {
        let unit: Vec<u8> = (0..rep.unit_len)
            .map(|_| random_base(&mut rng, spec.gc))
            .collect();
        for copy in 0..rep.copies {
            let start = place(&mut rng, spec.length, rep.unit_len, &mut occupied);
            for (i, &b) in unit.iter().enumerate() {
                genome[start + i] = if rep.divergence > 0.0 && rng.gen::<f64>() < rep.divergence {
                    substitute(&mut rng, b)
                } else {
                    b
                };
            }
            placements.push(RepeatPlacement {
                family: family as u32,
                copy: copy as u32,
                start,
                len: rep.unit_len,
            });
        }
    }
    placements.sort_by_key(|p| p.start);
    (genome, placements)
}

#[derive(Clone, Debug)]
pub struct DiploidSpec {
    /// Per-base probability of a substitution.
    pub snv_rate: f64,
    /// Per-base probability of an insertion or deletion (split evenly).
    pub indel_rate: f64,
    /// Indel sizes are uniform in 1..=max_indel.
    pub max_indel: usize,
    /// Minimum distance between variant anchors, and past any deleted
    /// span, so planted events stay isolated from each other.
    pub min_spacing: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum VariantKind {
    /// Replacement base at the anchor position.
    Snv(u8),
    /// Bases inserted immediately after the anchor position.
    Ins(Vec<u8>),
    /// Number of bases deleted starting at the anchor position.
    Del(usize),
}

/// One planted difference, anchored at a haplotype-A position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Variant {
    pub pos: usize,
    pub kind: VariantKind,
}

impl Variant {
    /// Haplotype-A span consumed by the event (1 except for deletions).
    fn span(&self) -> usize {
        match &self.kind {
            VariantKind::Del(n) => *n,
            _ => 1,
        }
    }
}

/// Replays a sorted, non-overlapping variant list over haplotype A. This
/// is the definition of haplotype B: `diploidize` calls it, and tests can
/// hold it against the truth list.
pub fn apply_variants(genome: &[u8], variants: &[Variant]) -> Vec<u8> {
    let mut out = Vec::with_capacity(genome.len() + genome.len() / 16);
    let mut at = 0usize;
    for v in variants {
        assert!(v.pos >= at, "variants must be sorted and non-overlapping");
        out.extend_from_slice(&genome[at..v.pos]);
        match &v.kind {
            VariantKind::Snv(to) => out.push(*to),
            VariantKind::Ins(seq) => {
                out.push(genome[v.pos]);
                out.extend_from_slice(seq);
            }
            VariantKind::Del(_) => {}
        }
        at = v.pos + v.span();
    }
    out.extend_from_slice(&genome[at..]);
    out
}

/// Derives haplotype B from A by scattering SNVs and indels at the spec
/// rates. Returns B plus the variant truth list in anchor order;
/// `apply_variants(a, &truth)` reproduces B exactly.
pub fn diploidize(genome: &[u8], spec: &DiploidSpec) -> (Vec<u8>, Vec<Variant>) {
    assert!(
        spec.snv_rate >= 0.0 && spec.indel_rate >= 0.0,
        "rates must be non-negative"
    );
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let mut variants: Vec<Variant> = Vec::new();
    let mut pos = 0usize;
    while pos < genome.len() {
        let r = rng.gen::<f64>();
        let kind = if r < spec.snv_rate {
            Some(VariantKind::Snv(substitute(&mut rng, genome[pos])))
        } else if r < spec.snv_rate + spec.indel_rate {
            let n = rng.gen_range(1..=spec.max_indel.max(1));
            if rng.gen::<bool>() {
                let ins = (0..n).map(|_| b"ACGT"[rng.gen_range(0..4)]).collect();
                Some(VariantKind::Ins(ins))
            } else if pos + n <= genome.len() {
                Some(VariantKind::Del(n))
            } else {
                None
            }
        } else {
            None
        };
        match kind {
            Some(kind) => {
                let v = Variant { pos, kind };
                pos = v.pos + v.span().max(spec.min_spacing.max(1));
                variants.push(v);
            }
            None => pos += 1,
        }
    }
    let hap_b = apply_variants(genome, &variants);
    (hap_b, variants)
}

#[derive(Clone, Debug)]
pub struct LibrarySpec {
    /// Prefixes read ids: `{name}:{pair}/{1,2}`.
    pub name: String,
    pub read_len: usize,
    pub insert_mean: f64,
    pub insert_sd: f64,
    /// Read bases per haplotype-A base; pair count = coverage·G / 2L.
    pub coverage: f64,
    /// Per-base substitution probability on the finished read.
    pub err_rate: f64,
}

/// Where a read truly came from: the 5'-most forward-strand coordinate of
/// its span on the source chromosome.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Origin {
    pub hap: u8,
    pub chrom: u32,
    pub pos: usize,
    pub minus: bool,
    pub lib: u32,
}

pub struct SimReads {
    /// Mates adjacent: read 2i is the forward mate of pair i, 2i+1 the
    /// reverse.
    pub reads: Vec<QualSeq>,
    pub pairs: Vec<ReadPair>,
    /// Parallel to `reads`.
    pub origins: Vec<Origin>,
}

/// Quality written at correct positions.
pub const HIGH_Q: u8 = 40;
/// Quality written at simulated error positions, low enough that any
/// sensible quality floor discards them.
pub const ERROR_Q: u8 = 8;

fn pick_fragment(
    rng: &mut ChaCha20Rng,
    haps: &[Vec<Vec<u8>>],
    totals: &[usize],
    lib: &LibrarySpec,
    normal: &Option<Normal>,
) -> (usize, usize, usize, usize) {
    for _ in 0..10_000 {
        let hap = rng.gen_range(0..haps.len());
        let mut t = rng.gen_range(0..totals[hap]);
        let mut chrom = 0usize;
        while t >= haps[hap][chrom].len() {
            t -= haps[hap][chrom].len();
            chrom += 1;
        }
        let insert = match normal {
            Some(n) => n.sample(rng).round() as i64,
            None => lib.insert_mean.round() as i64,
        };
        let insert = insert.max(lib.read_len as i64) as usize;
        if insert <= haps[hap][chrom].len() {
            let start = rng.gen_range(0..=haps[hap][chrom].len() - insert);
            return (hap, chrom, start, insert);
        }
    }
    panic!(
        "no chromosome can hold a fragment near {} bp",
        lib.insert_mean
    );
}

fn finish_read(rng: &mut ChaCha20Rng, id: String, mut bases: Vec<u8>, err: f64) -> QualSeq {
    let mut quals = vec![HIGH_Q; bases.len()];
    if err > 0.0 {
        for i in 0..bases.len() {
            if rng.gen::<f64>() < err {
                bases[i] = substitute(rng, bases[i]);
                quals[i] = ERROR_Q;
            }
        }
    }
    QualSeq::new(id, bases, quals)
}

/// Paired reads off one or more haplotypes, each a list of chromosomes.
/// Fragments pick a haplotype uniformly, a chromosome by length, a start
/// uniformly, and an insert from Normal(mean, sd) clamped to at least the
/// read length. Mates face inward: the forward mate reads the fragment's
/// left end, the reverse mate the right end reverse-complemented.
/// Coverage is measured against the first haplotype's total length.
pub fn simulate_reads(haps: &[Vec<Vec<u8>>], libs: &[LibrarySpec], seed: u64) -> SimReads {
    assert!(
        !haps.is_empty() && haps.iter().all(|h| !h.is_empty()),
        "need at least one chromosome per haplotype"
    );
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let totals: Vec<usize> = haps
        .iter()
        .map(|h| h.iter().map(|c| c.len()).sum())
        .collect();
    let mut sim = SimReads {
        reads: Vec::new(),
        pairs: Vec::new(),
        origins: Vec::new(),
    };
    for (li, lib) in libs.iter().enumerate() {
        assert!(lib.coverage > 0.0, "coverage must be positive");
        assert!(
            lib.insert_mean >= lib.read_len as f64,
            "insert mean shorter than the read length"
        );
        let n_pairs =
            (lib.coverage * totals[0] as f64 / (2.0 * lib.read_len as f64)).round() as usize;
        let normal = if lib.insert_sd > 0.0 {
            Some(Normal::new(lib.insert_mean, lib.insert_sd).unwrap())
        } else {
            None
        };
        for pi in 0..n_pairs {
            let (hap, chrom, start, insert) = pick_fragment(&mut rng, haps, &totals, lib, &normal);
            let seq = &haps[hap][chrom];
            let l = lib.read_len;
            let fwd = seq[start..start + l].to_vec();
            let rev = revcomp(&seq[start + insert - l..start + insert]);
            let a = sim.reads.len() as u32;
            sim.reads
                .push(finish_read(&mut rng, format!("{}:{pi}/1", lib.name), fwd, lib.err_rate));
            sim.reads
                .push(finish_read(&mut rng, format!("{}:{pi}/2", lib.name), rev, lib.err_rate));
            let at = |pos, minus| Origin {
                hap: hap as u8,
                chrom: chrom as u32,
                pos,
                minus,
                lib: li as u32,
            };
            sim.origins.push(at(start, false));
            sim.origins.push(at(start + insert - l, true));
            sim.pairs.push(ReadPair {
                read_a: a,
                read_b: a + 1,
                lib: li as u32,
            });
        }
    }
    sim
}

/// A genomic window whose read bases get their quality capped — the knob
/// for opening low-confidence gaps without touching any base.
#[derive(Clone, Copy, Debug)]
pub struct DegradeSpan {
    pub hap: u8,
    pub chrom: u32,
    pub start: usize,
    pub end: usize,
}

/// Caps the quality of every read base whose true genomic position falls
/// inside one of the spans. Bases and read placement stay untouched.
pub fn degrade_quality(reads: &mut [QualSeq], origins: &[Origin], spans: &[DegradeSpan], q: u8) {
    assert_eq!(reads.len(), origins.len());
    for (read, o) in reads.iter_mut().zip(origins) {
        let len = read.quals.len();
        for s in spans {
            if s.hap != o.hap || s.chrom != o.chrom {
                continue;
            }
            let lo = s.start.max(o.pos);
            let hi = s.end.min(o.pos + len);
            for g in lo..hi {
                let j = if o.minus { o.pos + len - 1 - g } else { g - o.pos };
                read.quals[j] = read.quals[j].min(q);
            }
        }
    }
}

/// Tab-separated repeat truth: family, copy, start, len.
pub fn write_repeat_truth(w: &mut impl Write, placements: &[RepeatPlacement]) -> io::Result<()> {
    writeln!(w, "#family\tcopy\tstart\tlen")?;
    for p in placements {
        writeln!(w, "{}\t{}\t{}\t{}", p.family, p.copy, p.start, p.len)?;
    }
    Ok(())
}

/// Tab-separated variant truth: haplotype-A position, kind, detail
/// (replacement base, inserted sequence, or deleted length).
pub fn write_variant_truth(w: &mut impl Write, variants: &[Variant]) -> io::Result<()> {
    writeln!(w, "#pos\tkind\tdetail")?;
    for v in variants {
        match &v.kind {
            VariantKind::Snv(to) => writeln!(w, "{}\tsnv\t{}", v.pos, *to as char)?,
            VariantKind::Ins(seq) => {
                writeln!(w, "{}\tins\t{}", v.pos, std::str::from_utf8(seq).unwrap())?
            }
            VariantKind::Del(n) => writeln!(w, "{}\tdel\t{n}", v.pos)?,
        }
    }
    Ok(())
}

/// Tab-separated read truth: read id, haplotype, chromosome, forward
/// start, strand.
pub fn write_read_truth(w: &mut impl Write, reads: &[QualSeq], origins: &[Origin]) -> io::Result<()> {
    assert_eq!(reads.len(), origins.len());
    writeln!(w, "#read\thap\tchrom\tpos\tstrand")?;
    for (r, o) in reads.iter().zip(origins) {
        let strand = if o.minus { '-' } else { '+' };
        writeln!(w, "{}\t{}\t{}\t{}\t{strand}", r.id, o.hap, o.chrom, o.pos)?;
    }
    Ok(())
}
