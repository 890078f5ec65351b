//! Allelic bubbles and diplotigs.
//!
//! A heterozygous site splits the otherwise shared k-mer path of a diploid
//! genome into two parallel UU-contig branches that rejoin after the
//! variant: a bubble. Both branches reach the same k-mer one step beyond
//! each end — the anchors — via their terminal unique extensions. Chaining
//! contigs and bubbles through those anchors yields diplotigs:
//! contig-(bubble-contig)* paths whose consensus takes the deeper branch of
//! every bubble and records the other branch as an alternate allele.
//!
//! Because pieces on either side of an anchor skip exactly one k-mer
//! window, consecutive chain pieces overlap by exactly k−2 bases, and the
//! two branches of a bubble share their first and last k−1 bases.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{self, Write};

use rayon::prelude::*;

use crate::kmer::{complement, encode_base, revcomp, revcomp_word, CanonicalKmer};
use crate::ufx::{ExtCode, UfxTable, UuContig, LEFT, RIGHT};

/// A pair of UU contigs joined to the same anchor k-mer one step beyond
/// each end: the two alleles of a heterozygous locus (or of a two-copy
/// repeat carrying a fixed difference).
#[derive(Clone, Debug)]
pub struct Bubble {
    /// Branch contig ids; `branch_a < branch_b`.
    pub branch_a: u32,
    pub branch_b: u32,
    /// The anchor k-mers, canonical form.
    pub left_anchor: CanonicalKmer,
    pub right_anchor: CanonicalKmer,
    pub depth_a: f64,
    pub depth_b: f64,
    /// Absolute branch length difference in bases.
    pub len_diff: usize,
    /// Anchors as oriented words: walking rightward from `la_word` enters
    /// the branches, which end immediately left of `ra_word`.
    la_word: u128,
    ra_word: u128,
    /// Branch orientations relative to the bubble's stored direction.
    flip_a: bool,
    flip_b: bool,
}

impl Bubble {
    /// Branch bases oriented in the bubble's stored direction.
    pub fn oriented_branches(&self, contigs: &[UuContig]) -> (Vec<u8>, Vec<u8>) {
        (
            oriented_bases(&contigs[self.branch_a as usize], self.flip_a),
            oriented_bases(&contigs[self.branch_b as usize], self.flip_b),
        )
    }
}

/// One element of a diplotig chain, with the orientation it is read in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChainPiece {
    Contig { id: u32, flip: bool },
    Bubble { id: u32, flip: bool },
}

impl ChainPiece {
    fn flipped(self) -> ChainPiece {
        match self {
            ChainPiece::Contig { id, flip } => ChainPiece::Contig { id, flip: !flip },
            ChainPiece::Bubble { id, flip } => ChainPiece::Bubble { id, flip: !flip },
        }
    }
}

/// The branch not used for consensus at one bubble of a diplotig.
///
/// Both alleles are reported as the varying core only — the branch bases
/// minus the k−1 shared on each side — so an allele may be empty (a
/// heterozygous deletion).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AltAllele {
    /// Start of the varying core in consensus coordinates.
    pub offset: usize,
    pub consensus_allele: Vec<u8>,
    pub alternate_allele: Vec<u8>,
}

/// An alternating contig-(bubble-contig)* chain with its spelled consensus.
#[derive(Clone, Debug)]
pub struct Diplotig {
    pub chain: Vec<ChainPiece>,
    /// Consensus bases, oriented to the lexicographic minimum of the two
    /// strands; a mosaic of the two input haplotypes.
    pub consensus: Vec<u8>,
    /// Base-weighted mean depth over all constituent contigs, both bubble
    /// branches included.
    pub mean_depth: f64,
    pub alt_alleles: Vec<AltAllele>,
}

pub struct ChainOutcome {
    pub diplotigs: Vec<Diplotig>,
    /// Contigs consumed by no diplotig: unchained plain contigs plus the
    /// branches of bubbles that never joined a chain.
    pub leftovers: Vec<u32>,
}

/// A leftover contig retained for scaffolding.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Isotig {
    pub contig: u32,
    pub depth: f64,
}

/// Packs clean ACGT bases into the low `2·len` bits, first base highest.
fn word_of(bases: &[u8]) -> u128 {
    let mut w = 0u128;
    for &b in bases {
        w = (w << 2) | u128::from(encode_base(b).expect("clean base"));
    }
    w
}

fn oriented_bases(c: &UuContig, flip: bool) -> Vec<u8> {
    if flip {
        revcomp(&c.bases)
    } else {
        c.bases.clone()
    }
}

fn oriented_base(c: &UuContig, flip: bool, i: usize) -> u8 {
    if flip {
        complement(c.bases[c.len() - 1 - i])
    } else {
        c.bases[i]
    }
}

/// The k-mer one step beyond the left end, oriented so that walking right
/// from it enters the contig. Absent when the end has no unique extension.
fn left_anchor_word(c: &UuContig, k: usize) -> Option<u128> {
    let e = c.left_ext?;
    let mut w = u128::from(encode_base(e).expect("clean extension base"));
    for &b in &c.bases[..k - 1] {
        w = (w << 2) | u128::from(encode_base(b).expect("clean base"));
    }
    Some(w)
}

/// The k-mer one step beyond the right end, oriented so the contig lies on
/// its left.
fn right_anchor_word(c: &UuContig, k: usize) -> Option<u128> {
    let e = c.right_ext?;
    let mut w = word_of(&c.bases[c.len() - (k - 1)..]);
    w = (w << 2) | u128::from(encode_base(e).expect("clean extension base"));
    Some(w)
}

/// The extension code of the anchor at `word` on `side` of the walking
/// orientation, or None when the k-mer was not retained.
fn anchor_code(table: &UfxTable, word: u128, side: usize) -> Option<ExtCode> {
    let (ck, flip) = CanonicalKmer::canonicalize_word(word, table.k());
    table.get(&ck).map(|r| r.oriented_code(side, flip))
}

/// Finds all bubbles: pairs of contigs whose left anchors coincide and
/// whose right anchors coincide, as oriented words. Anchor sets with three
/// or more attached branches are ambiguous and yield no bubble, and an
/// anchor that forks outward is rejected — it could never be the unique
/// extension of a flanking contig.
pub fn detect_bubbles(contigs: &[UuContig], table: &UfxTable) -> Vec<Bubble> {
    let k = table.k();
    // The ordered anchor pair, canonicalized over the two reading
    // directions so both branches land on one key whatever their stored
    // orientation.
    let keyed: Vec<Option<((u128, u128), bool)>> = contigs
        .par_iter()
        .map(|c| {
            if c.cyclic {
                return None;
            }
            let la = left_anchor_word(c, k)?;
            let ra = right_anchor_word(c, k)?;
            let alt = (revcomp_word(ra, k), revcomp_word(la, k));
            Some(if (la, ra) <= alt {
                ((la, ra), false)
            } else {
                (alt, true)
            })
        })
        .collect();

    let mut groups: HashMap<(u128, u128), Vec<(u32, bool)>> = HashMap::new();
    for (i, key) in keyed.iter().enumerate() {
        if let Some((key, flip)) = key {
            groups.entry(*key).or_default().push((i as u32, *flip));
        }
    }

    let mut bubbles = Vec::new();
    for ((la_word, ra_word), members) in groups {
        if members.len() != 2 {
            continue;
        }
        if matches!(anchor_code(table, la_word, LEFT), Some(ExtCode::Fork))
            || matches!(anchor_code(table, ra_word, RIGHT), Some(ExtCode::Fork))
        {
            continue;
        }
        let (mut a, mut b) = (members[0], members[1]);
        if a.0 > b.0 {
            std::mem::swap(&mut a, &mut b);
        }
        let (ca, cb) = (&contigs[a.0 as usize], &contigs[b.0 as usize]);
        let bubble = Bubble {
            branch_a: a.0,
            branch_b: b.0,
            left_anchor: CanonicalKmer::canonicalize_word(la_word, k).0,
            right_anchor: CanonicalKmer::canonicalize_word(ra_word, k).0,
            depth_a: ca.depth,
            depth_b: cb.depth,
            len_diff: ca.len().abs_diff(cb.len()),
            la_word,
            ra_word,
            flip_a: a.1,
            flip_b: b.1,
        };
        #[cfg(debug_assertions)]
        {
            let (ba, bb) = bubble.oriented_branches(contigs);
            debug_assert_eq!(ba[..k - 1], bb[..k - 1]);
            debug_assert_eq!(ba[ba.len() - (k - 1)..], bb[bb.len() - (k - 1)..]);
        }
        bubbles.push(bubble);
    }
    bubbles.sort_by_key(|b| (b.branch_a, b.branch_b));
    bubbles
}

struct Chainer<'a> {
    contigs: &'a [UuContig],
    bubbles: &'a [Bubble],
    table: &'a UfxTable,
    k: usize,
    /// Oriented left-anchor word of each bubble → (bubble, direction).
    bubble_port: HashMap<u128, Vec<(u32, bool)>>,
    /// Oriented left-anchor word of each plain contig → (contig, flip).
    contig_port: HashMap<u128, Vec<(u32, bool)>>,
}

impl<'a> Chainer<'a> {
    /// The anchor word leaving the oriented contig rightward.
    fn out_word(&self, id: u32, flip: bool) -> Option<u128> {
        let c = &self.contigs[id as usize];
        if flip {
            left_anchor_word(c, self.k).map(|w| revcomp_word(w, self.k))
        } else {
            right_anchor_word(c, self.k)
        }
    }

    fn anchor_unique(&self, word: u128, side: usize) -> Option<u8> {
        match anchor_code(self.table, word, side)? {
            ExtCode::Unique(code) => Some(code),
            _ => None,
        }
    }

    /// One grammar step rightward from an oriented contig: the bubble
    /// behind its anchor and the contig beyond the bubble's far anchor.
    /// Both anchors must extend uniquely outward onto the contig they
    /// attach — the reciprocal of the contig pointing at the anchor.
    fn step_right(&self, id: u32, flip: bool) -> Option<((u32, bool), (u32, bool))> {
        let w = self.out_word(id, flip)?;
        let ports = self.bubble_port.get(&w)?;
        if ports.len() != 1 {
            return None;
        }
        let (bi, bflip) = ports[0];
        let c = &self.contigs[id as usize];
        let back = self.anchor_unique(w, LEFT)?;
        if back != encode_base(oriented_base(c, flip, c.len() - self.k)).unwrap() {
            return None;
        }
        let b = &self.bubbles[bi as usize];
        let exit = if bflip {
            revcomp_word(b.la_word, self.k)
        } else {
            b.ra_word
        };
        let ports = self.contig_port.get(&exit)?;
        if ports.len() != 1 {
            return None;
        }
        let (ci, cflip) = ports[0];
        let fwd = self.anchor_unique(exit, RIGHT)?;
        let d = &self.contigs[ci as usize];
        if fwd != encode_base(oriented_base(d, cflip, self.k - 1)).unwrap() {
            return None;
        }
        Some(((bi, bflip), (ci, cflip)))
    }

    /// Spells the chain and collects alternate alleles. Consecutive pieces
    /// overlap by exactly k−2 bases: the single window skipped at each
    /// anchor.
    fn spell(&self, pieces: &[ChainPiece]) -> (Vec<u8>, Vec<AltAllele>) {
        let k = self.k;
        let ov = k - 2;
        let mut cur: Vec<u8> = Vec::new();
        let mut alts = Vec::new();
        for (pi, p) in pieces.iter().enumerate() {
            let (bases, alt) = match *p {
                ChainPiece::Contig { id, flip } => {
                    (oriented_bases(&self.contigs[id as usize], flip), None)
                }
                ChainPiece::Bubble { id, flip } => {
                    let b = &self.bubbles[id as usize];
                    let a_wins = consensus_is_branch_a(b, self.contigs);
                    let (cons, other) = if a_wins {
                        ((b.branch_a, b.flip_a), (b.branch_b, b.flip_b))
                    } else {
                        ((b.branch_b, b.flip_b), (b.branch_a, b.flip_a))
                    };
                    (
                        oriented_bases(&self.contigs[cons.0 as usize], cons.1 ^ flip),
                        Some(oriented_bases(&self.contigs[other.0 as usize], other.1 ^ flip)),
                    )
                }
            };
            if pi == 0 {
                cur = bases;
                continue;
            }
            debug_assert_eq!(
                &cur[cur.len() - ov..],
                &bases[..ov],
                "chain pieces must agree on their anchor overlap"
            );
            let start = cur.len() - ov;
            if let Some(other) = alt {
                alts.push(AltAllele {
                    offset: start + (k - 1),
                    consensus_allele: branch_core(&bases, k).to_vec(),
                    alternate_allele: branch_core(&other, k).to_vec(),
                });
            }
            cur.extend_from_slice(&bases[ov..]);
        }
        (cur, alts)
    }

    fn mean_depth(&self, pieces: &[ChainPiece]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        let mut add = |c: &UuContig| {
            num += c.depth * c.len() as f64;
            den += c.len() as f64;
        };
        for p in pieces {
            match *p {
                ChainPiece::Contig { id, .. } => add(&self.contigs[id as usize]),
                ChainPiece::Bubble { id, .. } => {
                    let b = &self.bubbles[id as usize];
                    add(&self.contigs[b.branch_a as usize]);
                    add(&self.contigs[b.branch_b as usize]);
                }
            }
        }
        num / den
    }
}

/// The deeper branch wins the consensus; a depth tie goes to the branch
/// whose stored (canonical) bases are lexicographically smaller, which is
/// independent of the direction the chain is read in.
fn consensus_is_branch_a(b: &Bubble, contigs: &[UuContig]) -> bool {
    match b.depth_a.partial_cmp(&b.depth_b) {
        Some(std::cmp::Ordering::Greater) => true,
        Some(std::cmp::Ordering::Less) => false,
        _ => contigs[b.branch_a as usize].bases <= contigs[b.branch_b as usize].bases,
    }
}

/// The varying part of a branch: its bases minus the k−1 shared with the
/// partner branch on each side. Empty for the short side of a deletion.
fn branch_core(bases: &[u8], k: usize) -> &[u8] {
    if bases.len() >= 2 * (k - 1) {
        &bases[k - 1..bases.len() - (k - 1)]
    } else {
        &[]
    }
}

/// Builds all maximal diplotig chains and returns them with the contigs
/// nothing consumed.
pub fn chain_diplotigs(
    contigs: &[UuContig],
    bubbles: &[Bubble],
    table: &UfxTable,
) -> ChainOutcome {
    let k = table.k();
    let mut is_branch = vec![false; contigs.len()];
    for b in bubbles {
        is_branch[b.branch_a as usize] = true;
        is_branch[b.branch_b as usize] = true;
    }

    let mut bubble_port: HashMap<u128, Vec<(u32, bool)>> = HashMap::new();
    for (bi, b) in bubbles.iter().enumerate() {
        bubble_port.entry(b.la_word).or_default().push((bi as u32, false));
        bubble_port
            .entry(revcomp_word(b.ra_word, k))
            .or_default()
            .push((bi as u32, true));
    }
    let mut contig_port: HashMap<u128, Vec<(u32, bool)>> = HashMap::new();
    for (i, c) in contigs.iter().enumerate() {
        if is_branch[i] || c.cyclic {
            continue;
        }
        if let Some(w) = left_anchor_word(c, k) {
            contig_port.entry(w).or_default().push((i as u32, false));
        }
        if let Some(w) = right_anchor_word(c, k) {
            contig_port
                .entry(revcomp_word(w, k))
                .or_default()
                .push((i as u32, true));
        }
    }

    let chainer = Chainer { contigs, bubbles, table, k, bubble_port, contig_port };

    let mut consumed = vec![false; contigs.len()];
    let mut bubble_used = vec![false; bubbles.len()];
    let mut diplotigs = Vec::new();

    for s in 0..contigs.len() as u32 {
        if is_branch[s as usize] || consumed[s as usize] || contigs[s as usize].cyclic {
            continue;
        }
        let mut in_chain: HashSet<u32> = HashSet::from([s]);
        let mut walk = |start_flip: bool, in_chain: &mut HashSet<u32>| {
            let mut pieces = Vec::new();
            let mut cur = (s, start_flip);
            while let Some(((bi, bf), (ci, cf))) = chainer.step_right(cur.0, cur.1) {
                if in_chain.contains(&ci) || bubble_used[bi as usize] || consumed[ci as usize] {
                    break;
                }
                pieces.push(ChainPiece::Bubble { id: bi, flip: bf });
                pieces.push(ChainPiece::Contig { id: ci, flip: cf });
                in_chain.insert(ci);
                bubble_used[bi as usize] = true;
                cur = (ci, cf);
            }
            pieces
        };
        let right = walk(false, &mut in_chain);
        let left = walk(true, &mut in_chain);

        let mut pieces: Vec<ChainPiece> = left.iter().rev().map(|p| p.flipped()).collect();
        pieces.push(ChainPiece::Contig { id: s, flip: false });
        pieces.extend(right);

        if pieces.len() == 1 {
            continue; // no bubble joined: the seed stays a leftover
        }

        for p in &pieces {
            match *p {
                ChainPiece::Contig { id, .. } => consumed[id as usize] = true,
                ChainPiece::Bubble { id, .. } => {
                    let b = &bubbles[id as usize];
                    consumed[b.branch_a as usize] = true;
                    consumed[b.branch_b as usize] = true;
                }
            }
        }

        let (consensus, alts) = chainer.spell(&pieces);
        let rc = revcomp(&consensus);
        let (pieces, consensus, alts) = if rc < consensus {
            let flipped: Vec<ChainPiece> = pieces.iter().rev().map(|p| p.flipped()).collect();
            let (c2, a2) = chainer.spell(&flipped);
            debug_assert_eq!(c2, rc);
            (flipped, c2, a2)
        } else {
            (pieces, consensus, alts)
        };
        let mean_depth = chainer.mean_depth(&pieces);
        diplotigs.push(Diplotig { chain: pieces, consensus, mean_depth, alt_alleles: alts });
    }

    let leftovers = (0..contigs.len() as u32).filter(|&i| !consumed[i as usize]).collect();
    ChainOutcome { diplotigs, leftovers }
}

/// Keeps the leftover contigs long enough to scaffold (≥ 2k bases) whose
/// depth is consistent with homozygosity: within `band` (relative bounds)
/// of the fitted peak depth `d_max`.
pub fn select_isotigs(
    contigs: &[UuContig],
    leftovers: &[u32],
    k: usize,
    d_max: f64,
    band: (f64, f64),
) -> Vec<Isotig> {
    let (lo, hi) = (band.0 * d_max, band.1 * d_max);
    leftovers
        .iter()
        .filter_map(|&i| {
            let c = &contigs[i as usize];
            (c.len() >= 2 * k && c.depth >= lo && c.depth <= hi)
                .then_some(Isotig { contig: i, depth: c.depth })
        })
        .collect()
}

/// Distributions over a bubble set for the assembly report: how long the
/// branches are relative to each other, and where their depths sit.
#[derive(Clone, Debug, Default)]
pub struct BubbleStats {
    pub len_diff_hist: BTreeMap<usize, u64>,
    /// (low, high) branch mean depths, rounded to integers.
    pub depth_heat: BTreeMap<(u32, u32), u64>,
}

pub fn bubble_stats(bubbles: &[Bubble]) -> BubbleStats {
    let mut stats = BubbleStats::default();
    for b in bubbles {
        *stats.len_diff_hist.entry(b.len_diff).or_insert(0) += 1;
        let (lo, hi) = if b.depth_a <= b.depth_b {
            (b.depth_a, b.depth_b)
        } else {
            (b.depth_b, b.depth_a)
        };
        *stats.depth_heat.entry((lo.round() as u32, hi.round() as u32)).or_insert(0) += 1;
    }
    stats
}

/// Counts bubbles whose branch depths sit away from the heterozygous
/// half-depth band around `d_max / 2` — typically fixed differences
/// between the copies of a two-copy repeat, which run at full depth.
pub fn off_half_depth_count(bubbles: &[Bubble], d_max: f64) -> usize {
    bubbles
        .iter()
        .filter(|b| {
            let half = d_max / 2.0;
            (b.depth_a - half).abs() > d_max / 4.0 || (b.depth_b - half).abs() > d_max / 4.0
        })
        .count()
}

/// Writes the alternate-allele sidecar rows: diplotig id, offset,
/// consensus allele, alternate allele. Empty alleles print as ".".
pub fn write_alt_sidecar<'a, W, I>(mut w: W, items: I) -> io::Result<()>
where
    W: Write,
    I: IntoIterator<Item = (&'a str, &'a Diplotig)>,
{
    let fmt = |a: &[u8]| {
        if a.is_empty() {
            ".".to_string()
        } else {
            String::from_utf8_lossy(a).into_owned()
        }
    };
    for (id, d) in items {
        for a in &d.alt_alleles {
            writeln!(
                w,
                "{}\t{}\t{}\t{}",
                id,
                a.offset,
                fmt(&a.consensus_allele),
                fmt(&a.alternate_allele)
            )?;
        }
    }
    Ok(())
}
