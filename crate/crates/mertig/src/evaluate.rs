//! Reference-based assembly assessment without alignments.
//!
//! The unit of assessment is a *marker*: an m-mer (m odd, default 101)
//! that appears in both reference haplotypes, stored canonically with
//! its copy number in each. Markers with equal frequency in both
//! haplotypes grade completeness by copy number; single-copy markers
//! whose following base agrees between haplotypes grade base fidelity
//! (how often the assembly predicts that next base); a deterministic
//! sample of single-copy markers grades scaffold chromosome assignment
//! and marker order/orientation.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::kmer::{complement, encode_base};

#[derive(Clone, Debug)]
pub struct EvalParams {
    /// Marker length; odd so no marker equals its own reverse complement.
    pub m: usize,
    /// Fraction of single-copy markers sampled for scaffold metrics.
    pub sample_frac: f64,
    /// Markers a scaffold needs on a chromosome before it counts.
    pub min_markers: usize,
    /// Seed for the marker sample, recorded in the report.
    pub seed: u64,
}

impl Default for EvalParams {
    fn default() -> EvalParams {
        EvalParams { m: 101, sample_frac: 0.001, min_markers: 10, seed: 0 }
    }
}

/// One marker: an m-mer present in both haplotypes. Position fields
/// describe its first maternal occurrence; `flipped` says whether the
/// canonical form is the reverse complement of the text there. The
/// following base is recorded in canonical orientation (0 at a boundary).
#[derive(Clone, Debug)]
pub struct Marker {
    pub chrom: u32,
    pub pos: u32,
    pub flipped: bool,
    pub n_mat: u32,
    pub n_pat: u32,
    pub next_mat: u8,
    pub next_pat: u8,
    pub sampled: bool,
}

impl Marker {
    pub fn equal_frequency(&self) -> bool {
        self.n_mat == self.n_pat
    }
    pub fn single_copy(&self) -> bool {
        self.n_mat == 1 && self.n_pat == 1
    }
    /// Eligible for the next-base check: single copy in both haplotypes
    /// and both haplotypes agree on an unambiguous following base.
    pub fn fidelity_eligible(&self) -> bool {
        self.single_copy() && self.next_mat == self.next_pat && matches!(self.next_mat, b'A' | b'C' | b'G' | b'T')
    }
}

/// All markers, ordered by first maternal occurrence, with a lookup
/// index keyed on the packed canonical m-mer.
#[derive(Clone, Debug)]
pub struct MarkerTable {
    pub m: usize,
    pub seed: u64,
    pub sample_frac: f64,
    pub markers: Vec<Marker>,
    index: HashMap<Box<[u8]>, u32>,
}

impl MarkerTable {
    pub fn len(&self) -> usize {
        self.markers.len()
    }
    pub fn is_empty(&self) -> bool {
        self.markers.is_empty()
    }
    pub fn sampled_count(&self) -> usize {
        self.markers.iter().filter(|k| k.sampled).count()
    }
}

/// Packs 2-bit base codes four to a byte, first base in the high bits.
fn pack(codes: impl Iterator<Item = u8>, m: usize) -> Box<[u8]> {
    let mut out = vec![0u8; (m + 3) / 4];
    for (i, c) in codes.enumerate() {
        out[i / 4] |= c << (6 - 2 * (i % 4));
    }
    out.into_boxed_slice()
}

/// Visits every ACGT-clean window of `seq`: position, packed canonical
/// m-mer, whether canonical is the reverse complement, and the following
/// base in canonical orientation (uppercase; 0 when the window touches
/// the sequence boundary on that side).
fn for_each_marker_window<F: FnMut(usize, Box<[u8]>, bool, u8)>(seq: &[u8], m: usize, mut f: F) {
    if seq.len() < m {
        return;
    }
    let mut codes: Vec<u8> = Vec::with_capacity(m);
    for pos in 0..=seq.len() - m {
        let win = &seq[pos..pos + m];
        codes.clear();
        if !win.iter().all(|&b| match encode_base(b) {
            Some(c) => {
                codes.push(c);
                true
            }
            None => false,
        }) {
            continue;
        }
        // first differing position against the reverse complement decides
        // the orientation; the middle base guarantees a difference
        let mut flipped = false;
        for i in 0..m {
            let fwd = codes[i];
            let rev = 3 - codes[m - 1 - i];
            if fwd != rev {
                flipped = fwd > rev;
                break;
            }
        }
        let packed = if flipped {
            pack(codes.iter().rev().map(|&c| 3 - c), m)
        } else {
            pack(codes.iter().copied(), m)
        };
        let next = if flipped {
            if pos > 0 {
                complement(seq[pos - 1])
            } else {
                0
            }
        } else if pos + m < seq.len() {
            seq[pos + m]
        } else {
            0
        };
        f(pos, packed, flipped, next.to_ascii_uppercase());
    }
}

/// Builds the marker table: every distinct m-mer occurring in both
/// haplotypes, with per-haplotype copy numbers and a seeded sample of
/// the single-copy subset.
pub fn extract_markers(
    maternal: &[Vec<u8>],
    paternal: &[Vec<u8>],
    params: &EvalParams,
) -> MarkerTable {
    assert!(params.m % 2 == 1 && params.m >= 3, "marker length must be odd");
    let mut map: HashMap<Box<[u8]>, Marker> = HashMap::new();
    for (ci, seq) in maternal.iter().enumerate() {
        for_each_marker_window(seq, params.m, |pos, w, flipped, next| {
            map.entry(w)
                .and_modify(|d| d.n_mat += 1)
                .or_insert(Marker {
                    chrom: ci as u32,
                    pos: pos as u32,
                    flipped,
                    n_mat: 1,
                    n_pat: 0,
                    next_mat: next,
                    next_pat: 0,
                    sampled: false,
                });
        });
    }
    for seq in paternal {
        for_each_marker_window(seq, params.m, |_, w, _, next| {
            // paternal-private m-mers are not markers; skip them
            if let Some(d) = map.get_mut(&w) {
                if d.n_pat == 0 {
                    d.next_pat = next;
                }
                d.n_pat += 1;
            }
        });
    }
    let mut entries: Vec<(Box<[u8]>, Marker)> =
        map.into_iter().filter(|(_, d)| d.n_pat > 0).collect();
    entries.sort_by_key(|(_, d)| (d.chrom, d.pos));
    let mut rng = ChaCha20Rng::seed_from_u64(params.seed);
    let mut markers = Vec::with_capacity(entries.len());
    let mut index = HashMap::with_capacity(entries.len());
    for (i, (w, mut d)) in entries.into_iter().enumerate() {
        if d.single_copy() {
            d.sampled = rng.gen::<f64>() < params.sample_frac;
        }
        index.insert(w, i as u32);
        markers.push(d);
    }
    MarkerTable {
        m: params.m,
        seed: params.seed,
        sample_frac: params.sample_frac,
        markers,
        index,
    }
}

/// Copy-number row: markers present in `n` copies in both haplotypes,
/// graded by their assembly copy count.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CopyRow {
    pub markers: u64,
    pub absent: u64,
    pub below: u64,
    pub equal: u64,
    pub above: u64,
}

impl CopyRow {
    fn pct(&self, part: u64) -> f64 {
        if self.markers == 0 {
            0.0
        } else {
            100.0 * part as f64 / self.markers as f64
        }
    }
    pub fn absent_pct(&self) -> f64 {
        self.pct(self.absent)
    }
    pub fn below_pct(&self) -> f64 {
        self.pct(self.below)
    }
    pub fn equal_pct(&self) -> f64 {
        self.pct(self.equal)
    }
    pub fn above_pct(&self) -> f64 {
        self.pct(self.above)
    }
}

/// Rows for n = 1, 2, 3, 4+.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Completeness {
    pub rows: [CopyRow; 4],
}

pub const COPY_LABELS: [&str; 4] = ["1", "2", "3", "4+"];

fn copy_bucket(n: u32) -> usize {
    match n {
        1 => 0,
        2 => 1,
        3 => 2,
        _ => 3,
    }
}

fn assembly_counts(table: &MarkerTable, assembly: &[Vec<u8>]) -> Vec<u32> {
    let mut counts = vec![0u32; table.markers.len()];
    for seq in assembly {
        for_each_marker_window(seq, table.m, |_, w, _, _| {
            if let Some(&i) = table.index.get(&w) {
                counts[i as usize] += 1;
            }
        });
    }
    counts
}

/// Grades equal-frequency markers by assembly copy count: absent,
/// fewer than n, exactly n, or more than n copies.
pub fn completeness_by_copy(table: &MarkerTable, assembly: &[Vec<u8>]) -> Completeness {
    let counts = assembly_counts(table, assembly);
    let mut out = Completeness::default();
    for (d, &c) in table.markers.iter().zip(&counts) {
        if !d.equal_frequency() {
            continue;
        }
        let row = &mut out.rows[copy_bucket(d.n_mat)];
        row.markers += 1;
        let n = d.n_mat;
        if c == 0 {
            row.absent += 1;
        } else if c < n {
            row.below += 1;
        } else if c == n {
            row.equal += 1;
        } else {
            row.above += 1;
        }
    }
    out
}

/// Next-base prediction rates over assessed marker loci, events per
/// 10 kbp: mismatched bases (μ_M) and unspecified bases (μ_U).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FidelityRates {
    pub loci: u64,
    pub mismatches: u64,
    pub unspecified: u64,
}

impl FidelityRates {
    fn per_10k(&self, events: u64) -> f64 {
        if self.loci == 0 {
            0.0
        } else {
            1.0e4 * events as f64 / self.loci as f64
        }
    }
    pub fn mu_m(&self) -> f64 {
        self.per_10k(self.mismatches)
    }
    pub fn mu_u(&self) -> f64 {
        self.per_10k(self.unspecified)
    }
    pub fn mu(&self) -> f64 {
        self.per_10k(self.mismatches + self.unspecified)
    }
}

/// Checks the 102nd base: at every assembly occurrence of an eligible
/// marker, the following base (in the marker's canonical orientation)
/// is compared against the haplotype-agreed base. An N, or a marker
/// flush against a scaffold end, counts as unspecified.
pub fn base_fidelity(table: &MarkerTable, assembly: &[Vec<u8>]) -> FidelityRates {
    let mut rates = FidelityRates::default();
    for seq in assembly {
        for_each_marker_window(seq, table.m, |_, w, _, next| {
            let Some(&i) = table.index.get(&w) else { return };
            let d = &table.markers[i as usize];
            if !d.fidelity_eligible() {
                return;
            }
            rates.loci += 1;
            if matches!(next, b'A' | b'C' | b'G' | b'T') {
                if next != d.next_mat {
                    rates.mismatches += 1;
                }
            } else {
                rates.unspecified += 1;
            }
        });
    }
    rates
}

/// Scaffold-level accuracy: length fractions by chromosome assignment
/// and order/orientation precision (P) and recall (R) over sampled
/// markers. Error forms are π_i = 1 − P_i and ρ_i = 1 − R_i.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaffoldAccuracy {
    pub f_u: f64,
    pub f_m: f64,
    pub f_n: f64,
    /// P_0 same chromosome; P_1 also same strand; P_2 also
    /// reference-adjacent — over consecutive scaffold marker pairs.
    pub p: [f64; 3],
    /// R_0 same scaffold; R_1 also same strand; R_2 also
    /// scaffold-adjacent — over consecutive reference marker pairs.
    pub r: [f64; 3],
    pub precision_pairs: u64,
    pub recall_pairs: u64,
}

impl ScaffoldAccuracy {
    pub fn pi(&self, i: usize) -> f64 {
        1.0 - self.p[i]
    }
    pub fn rho(&self, i: usize) -> f64 {
        1.0 - self.r[i]
    }
}

struct Placement {
    marker: u32,
    /// Marker appears in the same orientation as its reference locus.
    forward: bool,
}

/// Computes chromosome-assignment fractions and order metrics in one
/// pass over the assembly.
pub fn assess_scaffolds(
    table: &MarkerTable,
    assembly: &[Vec<u8>],
    min_markers: usize,
) -> ScaffoldAccuracy {
    // rank of each sampled marker along its chromosome
    let mut ref_rank: Vec<Option<(u32, u32)>> = vec![None; table.markers.len()];
    let mut per_chrom: HashMap<u32, u32> = HashMap::new();
    for (i, d) in table.markers.iter().enumerate() {
        if d.sampled {
            let r = per_chrom.entry(d.chrom).or_insert(0);
            ref_rank[i] = Some((d.chrom, *r));
            *r += 1;
        }
    }
    let mut placements: Vec<Vec<Placement>> = Vec::with_capacity(assembly.len());
    for seq in assembly {
        let mut scaffold = Vec::new();
        for_each_marker_window(seq, table.m, |_, w, flipped, _| {
            let Some(&i) = table.index.get(&w) else { return };
            let d = &table.markers[i as usize];
            if d.sampled {
                scaffold.push(Placement { marker: i, forward: flipped == d.flipped });
            }
        });
        placements.push(scaffold);
    }

    // length fractions
    let total_len: u64 = assembly.iter().map(|s| s.len() as u64).sum();
    let (mut f_u, mut f_m, mut f_n) = (0u64, 0u64, 0u64);
    for (seq, scaffold) in assembly.iter().zip(&placements) {
        let mut seen: HashMap<u32, HashSet<u32>> = HashMap::new();
        for p in scaffold {
            let chrom = table.markers[p.marker as usize].chrom;
            seen.entry(chrom).or_default().insert(p.marker);
        }
        let total: usize = seen.values().map(|s| s.len()).sum();
        let strong = seen.values().filter(|s| s.len() >= min_markers).count();
        if total < min_markers {
            f_n += seq.len() as u64;
        } else if strong >= 2 {
            f_m += seq.len() as u64;
        } else if strong == 1 {
            f_u += seq.len() as u64;
        }
        // ≥ min markers spread thin over several chromosomes counts
        // toward none of the fractions
    }

    // precision over consecutive scaffold pairs
    let (mut pairs, mut p0, mut p1, mut p2) = (0u64, 0u64, 0u64, 0u64);
    for scaffold in &placements {
        for ab in scaffold.windows(2) {
            let (a, b) = (&ab[0], &ab[1]);
            let (ca, ra) = ref_rank[a.marker as usize].unwrap();
            let (cb, rb) = ref_rank[b.marker as usize].unwrap();
            pairs += 1;
            if ca != cb {
                continue;
            }
            p0 += 1;
            if a.forward != b.forward {
                continue;
            }
            p1 += 1;
            if ra.abs_diff(rb) == 1 {
                p2 += 1;
            }
        }
    }

    // recall over consecutive reference pairs; first assembly placement
    // of each marker decides its scaffold, rank, and orientation
    let mut placed: Vec<Option<(u32, u32, bool)>> = vec![None; table.markers.len()];
    for (si, scaffold) in placements.iter().enumerate() {
        for (rank, p) in scaffold.iter().enumerate() {
            let slot = &mut placed[p.marker as usize];
            if slot.is_none() {
                *slot = Some((si as u32, rank as u32, p.forward));
            }
        }
    }
    let (mut rpairs, mut r0, mut r1, mut r2) = (0u64, 0u64, 0u64, 0u64);
    let sampled: Vec<u32> = (0..table.markers.len() as u32)
        .filter(|&i| table.markers[i as usize].sampled)
        .collect();
    for ab in sampled.windows(2) {
        let (a, b) = (ab[0] as usize, ab[1] as usize);
        if table.markers[a].chrom != table.markers[b].chrom {
            continue;
        }
        rpairs += 1;
        let (Some(pa), Some(pb)) = (placed[a], placed[b]) else { continue };
        if pa.0 != pb.0 {
            continue;
        }
        r0 += 1;
        if pa.2 != pb.2 {
            continue;
        }
        r1 += 1;
        if pa.1.abs_diff(pb.1) == 1 {
            r2 += 1;
        }
    }

    let frac = |num: u64, den: u64| if den == 0 { 1.0 } else { num as f64 / den as f64 };
    ScaffoldAccuracy {
        f_u: if total_len == 0 { 0.0 } else { f_u as f64 / total_len as f64 },
        f_m: if total_len == 0 { 0.0 } else { f_m as f64 / total_len as f64 },
        f_n: if total_len == 0 { 0.0 } else { f_n as f64 / total_len as f64 },
        p: [frac(p0, pairs), frac(p1, pairs), frac(p2, pairs)],
        r: [frac(r0, rpairs), frac(r1, rpairs), frac(r2, rpairs)],
        precision_pairs: pairs,
        recall_pairs: rpairs,
    }
}

/// Length fractions of scaffolds assigned to a unique chromosome, to
/// multiple chromosomes, or to none.
pub fn chromosome_assignment(
    table: &MarkerTable,
    assembly: &[Vec<u8>],
    min_markers: usize,
) -> (f64, f64, f64) {
    let a = assess_scaffolds(table, assembly, min_markers);
    (a.f_u, a.f_m, a.f_n)
}

/// Order/orientation precision and recall fractions (P_0..2, R_0..2).
pub fn order_precision_recall(table: &MarkerTable, assembly: &[Vec<u8>]) -> ([f64; 3], [f64; 3]) {
    let a = assess_scaffolds(table, assembly, usize::MAX);
    (a.p, a.r)
}

/// Everything the evaluator measures, in one pass-friendly bundle.
#[derive(Clone, Debug)]
pub struct Assessment {
    pub markers: usize,
    pub equal_frequency: usize,
    pub single_copy: usize,
    pub sampled: usize,
    pub completeness: Completeness,
    pub fidelity: FidelityRates,
    pub scaffolds: ScaffoldAccuracy,
}

pub fn evaluate(
    maternal: &[Vec<u8>],
    paternal: &[Vec<u8>],
    assembly: &[Vec<u8>],
    params: &EvalParams,
) -> (MarkerTable, Assessment) {
    let table = extract_markers(maternal, paternal, params);
    let assessment = assess(&table, assembly, params);
    (table, assessment)
}

pub fn assess(table: &MarkerTable, assembly: &[Vec<u8>], params: &EvalParams) -> Assessment {
    Assessment {
        markers: table.len(),
        equal_frequency: table.markers.iter().filter(|d| d.equal_frequency()).count(),
        single_copy: table.markers.iter().filter(|d| d.single_copy()).count(),
        sampled: table.sampled_count(),
        completeness: completeness_by_copy(table, assembly),
        fidelity: base_fidelity(table, assembly),
        scaffolds: assess_scaffolds(table, assembly, params.min_markers),
    }
}

/// Renders the report: a human-readable shape mirroring the assessment
/// tables, every value also greppable as a key=value line.
pub fn render_report(table: &MarkerTable, a: &Assessment) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "marker-len={}", table.m);
    let _ = writeln!(s, "seed={}", table.seed);
    let _ = writeln!(s, "sample-frac={}", table.sample_frac);
    let _ = writeln!(s, "markers={}", a.markers);
    let _ = writeln!(s, "equal-frequency={}", a.equal_frequency);
    let _ = writeln!(s, "single-copy={}", a.single_copy);
    let _ = writeln!(s, "sampled={}", a.sampled);
    let _ = writeln!(s, "[completeness]");
    for (label, row) in COPY_LABELS.iter().zip(&a.completeness.rows) {
        let dash_below = if row.markers > 0 && *label == "1" { "-".to_string() } else { format!("{:.2}", row.below_pct()) };
        let _ = writeln!(
            s,
            "n={} markers={} absent={:.2} below={} equal={:.2} above={:.2}",
            label,
            row.markers,
            row.absent_pct(),
            dash_below,
            row.equal_pct(),
            row.above_pct(),
        );
    }
    let _ = writeln!(s, "[fidelity]");
    let f = &a.fidelity;
    let _ = writeln!(s, "loci={} mismatches={} unspecified={}", f.loci, f.mismatches, f.unspecified);
    let _ = writeln!(s, "mu_M={:.3} mu_U={:.3} mu={:.3}", f.mu_m(), f.mu_u(), f.mu());
    let _ = writeln!(s, "[scaffolds]");
    let sc = &a.scaffolds;
    let _ = writeln!(s, "f_U={:.4} f_M={:.4} f_N={:.4}", sc.f_u, sc.f_m, sc.f_n);
    let _ = writeln!(s, "precision-pairs={} recall-pairs={}", sc.precision_pairs, sc.recall_pairs);
    for i in 0..3 {
        let _ = writeln!(
            s,
            "pi_{i}_per_10k={:.3} pi_{i}_per_1k={:.4}",
            1.0e4 * sc.pi(i),
            1.0e3 * sc.pi(i),
        );
    }
    for i in 0..3 {
        let _ = writeln!(
            s,
            "rho_{i}_per_10k={:.3} rho_{i}_per_1k={:.4}",
            1.0e4 * sc.rho(i),
            1.0e3 * sc.rho(i),
        );
    }
    s
}
