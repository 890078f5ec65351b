//! Ordering and orienting assembled sequences with paired reads.
//!
//! Reads connect sequences two ways: a single read running off one
//! sequence into another ("splint") pins their relative offset exactly,
//! while a pair whose mates land on different sequences ("span") bounds
//! the gap through the library's insert-size distribution. Edges are
//! screened for topological defects, then walked under a closest-partner
//! discipline, longest sequences first; leftover short sequences may be
//! suspended into gaps they link on both sides. The whole construction
//! reruns per support threshold and the layout with the best scaffold
//! N50 wins.

use std::collections::{HashMap, HashSet};
use std::io::{self, BufRead, Write};

use rayon::prelude::*;
use statrs::distribution::{Continuous, Normal};

use crate::align::{ContigPlacement, ReadAlignment};

/// One end of a sequence: `tail` is the right (3') end of the forward
/// orientation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SeqEnd {
    pub seq: u32,
    pub tail: bool,
}

impl SeqEnd {
    pub fn head(seq: u32) -> SeqEnd {
        SeqEnd { seq, tail: false }
    }

    pub fn tail(seq: u32) -> SeqEnd {
        SeqEnd { seq, tail: true }
    }

    fn opposite(self) -> SeqEnd {
        SeqEnd { seq: self.seq, tail: !self.tail }
    }
}

/// Length and depth of a scaffolding input sequence.
#[derive(Clone, Copy, Debug)]
pub struct SeqMeta {
    pub len: u32,
    pub depth: f64,
}

/// Paired-read library parameters.
#[derive(Clone, Copy, Debug)]
pub struct Library {
    pub insert_mean: f64,
    pub insert_sd: f64,
}

/// A mate pair pointing at two read indices of the aligned batch.
#[derive(Clone, Copy, Debug)]
pub struct ReadPair {
    pub read_a: u32,
    pub read_b: u32,
    pub lib: u32,
}

/// One piece of evidence behind a link.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LinkObs {
    /// Distances from each read's (virtual) outermost base to its
    /// sequence's linking end.
    Span { tail_a: i64, tail_b: i64, lib: u32 },
    /// Exact signed gap implied by a read bridging both sequences.
    Splint { gap: i64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LinkKind {
    Splint,
    Span,
}

/// An aggregated connection between two sequence ends.
#[derive(Clone, Debug)]
pub struct LinkEdge {
    pub end_a: SeqEnd,
    pub end_b: SeqEnd,
    pub kind: LinkKind,
    pub support: u32,
    pub gap: f64,
    pub gap_sd: f64,
    pub obs: Vec<LinkObs>,
}

impl LinkEdge {
    /// The end of this edge that is not `e`.
    fn other(&self, e: SeqEnd) -> SeqEnd {
        if self.end_a == e {
            self.end_b
        } else {
            self.end_a
        }
    }
}

/// Which end a plus/minus alignment points its mate toward.
fn linked_end(a: &ReadAlignment) -> SeqEnd {
    SeqEnd { seq: a.seq, tail: !a.minus }
}

/// Distance from the read's outermost (5') base to the linked end,
/// extending the alignment virtually over any clipped prefix so partial
/// alignments report the full-read footprint.
fn outward_tail(a: &ReadAlignment, seq_len: u32) -> i64 {
    if a.minus {
        i64::from(a.seq_end) + i64::from(a.read_start)
    } else {
        i64::from(seq_len) - (i64::from(a.seq_start) - i64::from(a.read_start))
    }
}

fn end_key(a: SeqEnd, b: SeqEnd) -> (SeqEnd, SeqEnd) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Splint evidence from one read's alignment records: the record covering
/// the read start must run exactly to its sequence's linking end, and the
/// record covering the read end must start exactly at its sequence's
/// entering end. The signed distance between the two records in read
/// coordinates is the gap.
fn splint_from_records(recs: &[ReadAlignment], seqs: &[SeqMeta]) -> Option<(SeqEnd, SeqEnd, i64)> {
    if recs.len() < 2 {
        return None;
    }
    let left = recs.iter().min_by_key(|r| (r.read_start, r.read_end))?;
    let right = recs.iter().max_by_key(|r| (r.read_end, r.read_start))?;
    if left.seq == right.seq {
        return None;
    }
    let left_ok = if left.minus {
        left.seq_start == 0
    } else {
        left.seq_end == seqs[left.seq as usize].len
    };
    let right_ok = if right.minus {
        right.seq_end == seqs[right.seq as usize].len
    } else {
        right.seq_start == 0
    };
    if !left_ok || !right_ok {
        return None;
    }
    let from = SeqEnd { seq: left.seq, tail: !left.minus };
    let into = SeqEnd { seq: right.seq, tail: right.minus };
    let gap = i64::from(right.read_start) - i64::from(left.read_end);
    Some((from, into, gap))
}

/// Builds link edges from alignments: splints from individual reads,
/// spans from mate pairs with unique placements. Pairs whose implied
/// separation exceeds mean + 3 sd are discarded; edges below
/// `min_support` are dropped.
pub fn build_links(
    alns: &[ReadAlignment],
    n_reads: usize,
    pairs: &[ReadPair],
    libs: &[Library],
    seqs: &[SeqMeta],
    min_support: u32,
) -> Vec<LinkEdge> {
    // alignments arrive in read order; index the per-read slices
    let mut spans_of: Vec<(usize, usize)> = vec![(0, 0); n_reads];
    let mut i = 0;
    while i < alns.len() {
        let r = alns[i].read as usize;
        let mut j = i;
        while j < alns.len() && alns[j].read as usize == r {
            j += 1;
        }
        spans_of[r] = (i, j);
        i = j;
    }
    let recs = |r: u32| &alns[spans_of[r as usize].0..spans_of[r as usize].1];

    let splints: Vec<((SeqEnd, SeqEnd), LinkObs)> = (0..n_reads)
        .into_par_iter()
        .filter_map(|r| {
            let (from, into, gap) = splint_from_records(recs(r as u32), seqs)?;
            Some((end_key(from, into), LinkObs::Splint { gap }))
        })
        .collect();

    let spans: Vec<((SeqEnd, SeqEnd), LinkObs)> = pairs
        .par_iter()
        .filter_map(|p| {
            let (ra, rb) = (recs(p.read_a), recs(p.read_b));
            if ra.len() != 1 || rb.len() != 1 || ra[0].seq == rb[0].seq {
                return None;
            }
            let lib = &libs[p.lib as usize];
            let (ea, eb) = (linked_end(&ra[0]), linked_end(&rb[0]));
            let ta = outward_tail(&ra[0], seqs[ea.seq as usize].len);
            let tb = outward_tail(&rb[0], seqs[eb.seq as usize].len);
            if (ta + tb) as f64 > lib.insert_mean + 3.0 * lib.insert_sd {
                return None;
            }
            // tail_a belongs to the smaller end of the canonical key
            let (ta, tb) = if ea <= eb { (ta, tb) } else { (tb, ta) };
            Some((end_key(ea, eb), LinkObs::Span { tail_a: ta, tail_b: tb, lib: p.lib }))
        })
        .collect();

    let mut grouped: HashMap<(SeqEnd, SeqEnd), Vec<LinkObs>> = HashMap::new();
    for (key, obs) in splints.into_iter().chain(spans) {
        grouped.entry(key).or_default().push(obs);
    }
    let mut edges: Vec<LinkEdge> = grouped
        .into_iter()
        .filter(|(_, obs)| obs.len() as u32 >= min_support)
        .map(|((a, b), obs)| {
            let kind = if obs.iter().any(|o| matches!(o, LinkObs::Splint { .. })) {
                LinkKind::Splint
            } else {
                LinkKind::Span
            };
            let (gap, gap_sd) = estimate_gap_size(
                &obs,
                libs,
                seqs[a.seq as usize].len,
                seqs[b.seq as usize].len,
            );
            LinkEdge { end_a: a, end_b: b, kind, support: obs.len() as u32, gap, gap_sd, obs }
        })
        .collect();
    edges.sort_by_key(|e| (e.end_a, e.end_b));
    edges
}

/// Mean insert size of the pairs that can actually be observed across a
/// gap of size `g` with flank lengths `la`, `lb`. A fragment of length F
/// spans the gap from w(F) = |{t_a : t_a ≤ la, F − g − t_a ≤ lb}| distinct
/// placements, so observed fragments follow pdf(F)·w(F): longer fragments
/// are seen more often (length bias) until the flanks cut them off.
fn observable_mean(mean: f64, sd: f64, g: f64, la: f64, lb: f64) -> f64 {
    if sd <= f64::EPSILON {
        return mean; // exact inserts need no conditioning
    }
    let t_min = 1.0;
    let lo = (g + 2.0 * t_min).max(mean - 6.0 * sd);
    let hi = (g + la + lb).min(mean + 6.0 * sd);
    if hi <= lo {
        return mean;
    }
    let n = Normal::new(mean, sd).unwrap();
    let steps = 400;
    let h = (hi - lo) / f64::from(steps);
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..=steps {
        let f = lo + h * f64::from(i);
        let spread = f - g;
        let w = (la.min(spread - t_min) - t_min.max(spread - lb)).max(0.0);
        let p = n.pdf(f) * w;
        let c = if i == 0 || i == steps {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        num += c * p * f;
        den += c * p;
    }
    if den <= 1e-300 {
        mean
    } else {
        num / den
    }
}

/// Gap estimate for one edge. Splint observations are exact, so their
/// plurality value wins outright (ties toward the smaller gap) with a
/// 1-base sd. Span observations give per-pair gaps insert − tail_a −
/// tail_b; the naive mean is biased because only fragments whose tails
/// fit the flanks are observable, so the insert mean is conditioned on
/// the observable-placement weighting and the estimate solved by
/// fixed-point iteration. The sd is insert_sd/√support.
pub fn estimate_gap_size(obs: &[LinkObs], libs: &[Library], len_a: u32, len_b: u32) -> (f64, f64) {
    let splint_gaps: Vec<i64> = obs
        .iter()
        .filter_map(|o| match o {
            LinkObs::Splint { gap } => Some(*gap),
            _ => None,
        })
        .collect();
    if !splint_gaps.is_empty() {
        let mut tally: HashMap<i64, usize> = HashMap::new();
        for g in &splint_gaps {
            *tally.entry(*g).or_insert(0) += 1;
        }
        let best = tally
            .iter()
            .map(|(g, n)| (*n, -*g))
            .max()
            .map(|(_, neg)| -neg)
            .unwrap();
        return (best as f64, 1.0);
    }
    let mut sum_s = 0.0;
    let mut sum_mu = 0.0;
    let mut sum_var = 0.0;
    let mut n = 0.0;
    for o in obs {
        if let LinkObs::Span { tail_a, tail_b, lib } = o {
            sum_s += (tail_a + tail_b) as f64;
            sum_mu += libs[*lib as usize].insert_mean;
            sum_var += libs[*lib as usize].insert_sd.powi(2);
            n += 1.0;
        }
    }
    assert!(n > 0.0, "edge without observations");
    let s = sum_s / n;
    let mu = sum_mu / n;
    let sd = (sum_var / n).sqrt();
    let mut g = mu - s;
    for _ in 0..40 {
        let next = observable_mean(mu, sd, g, f64::from(len_a), f64::from(len_b)) - s;
        if (next - g).abs() < 1e-3 {
            g = next;
            break;
        }
        g = next;
    }
    (g, sd / n.sqrt())
}

/// Ends barred from extension by rule-1 topology checks.
#[derive(Debug, Default)]
pub struct EndEligibility {
    ineligible: HashSet<SeqEnd>,
}

impl EndEligibility {
    pub fn eligible(&self, e: SeqEnd) -> bool {
        !self.ineligible.contains(&e)
    }
}

/// Extra placement slack allowed before two partners of one end are
/// declared mutually conflicting.
const CONFLICT_SLACK: f64 = 5.0;

/// Screens edges and ends: links between sequences whose depths differ by
/// more than `depth_factor` are dropped; ends that link their own
/// sequence, both ends of one partner, or two partners whose implied
/// placements overlap are marked ineligible.
pub fn check_end_defects(
    edges: &[LinkEdge],
    seqs: &[SeqMeta],
    depth_factor: f64,
) -> (Vec<LinkEdge>, EndEligibility) {
    let kept: Vec<LinkEdge> = edges
        .iter()
        .filter(|e| {
            let (da, db) = (seqs[e.end_a.seq as usize].depth, seqs[e.end_b.seq as usize].depth);
            let (lo, hi) = if da < db { (da, db) } else { (db, da) };
            lo <= 0.0 || hi <= depth_factor * lo
        })
        .cloned()
        .collect();

    let mut ineligible: HashSet<SeqEnd> = HashSet::new();
    let mut by_end: HashMap<SeqEnd, Vec<&LinkEdge>> = HashMap::new();
    for e in &kept {
        if e.end_a.seq == e.end_b.seq {
            ineligible.insert(e.end_a);
            ineligible.insert(e.end_b);
            continue;
        }
        by_end.entry(e.end_a).or_default().push(e);
        by_end.entry(e.end_b).or_default().push(e);
    }
    for (end, links) in &by_end {
        // both ends of one partner
        let mut partner_ends: HashMap<u32, HashSet<bool>> = HashMap::new();
        for e in links {
            let o = e.other(*end);
            partner_ends.entry(o.seq).or_default().insert(o.tail);
        }
        if partner_ends.values().any(|s| s.len() > 1) {
            ineligible.insert(*end);
            continue;
        }
        // mutually conflicting placements: the farther partner would have
        // to begin before the closer one ends
        let mut order: Vec<&&LinkEdge> = links.iter().collect();
        order.sort_by(|a, b| a.gap.total_cmp(&b.gap));
        'pairs: for i in 0..order.len() {
            for j in i + 1..order.len() {
                let (ei, ej) = (order[i], order[j]);
                let li = f64::from(seqs[ei.other(*end).seq as usize].len);
                let slack = 3.0 * (ei.gap_sd + ej.gap_sd) + CONFLICT_SLACK;
                if ej.gap < ei.gap + li - slack {
                    ineligible.insert(*end);
                    break 'pairs;
                }
            }
        }
    }
    (kept, EndEligibility { ineligible })
}

/// A sequence placed in a scaffold.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlacedSeq {
    pub seq: u32,
    pub minus: bool,
    pub start: u64,
    pub len: u32,
    pub depth: f64,
}

/// A gap between consecutive placed sequences. Negative sizes encode
/// overlapping flanks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GapEntry {
    pub size: i64,
    pub sd: f64,
}

/// An ordered, oriented sequence layout; `gaps.len() == contigs.len() - 1`.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ScaffoldLayout {
    pub contigs: Vec<PlacedSeq>,
    pub gaps: Vec<GapEntry>,
}

impl ScaffoldLayout {
    /// Total span from the first placed base to the last, gaps included.
    pub fn span_len(&self) -> u64 {
        self.contigs.last().map_or(0, |c| c.start + u64::from(c.len))
    }

    /// Length-weighted mean depth over the placed sequences.
    pub fn mean_depth(&self) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for c in &self.contigs {
            num += c.depth * f64::from(c.len);
            den += f64::from(c.len);
        }
        if den > 0.0 {
            num / den
        } else {
            0.0
        }
    }

    /// Placements of the member sequences within scaffold `scaffold`.
    pub fn placements(&self, scaffold: u32) -> Vec<(u32, ContigPlacement)> {
        self.contigs
            .iter()
            .map(|c| {
                (
                    c.seq,
                    ContigPlacement {
                        scaffold,
                        offset: c.start as u32,
                        len: c.len,
                        minus: c.minus,
                    },
                )
            })
            .collect()
    }
}

/// Builds a layout from an oriented chain and the gaps between entries,
/// computing offsets. A gap may be negative but never so negative that
/// placements stop strictly increasing.
fn layout_from_chain(chain: &[(u32, bool)], gaps: &[(f64, f64)], seqs: &[SeqMeta]) -> ScaffoldLayout {
    assert_eq!(gaps.len() + 1, chain.len().max(1));
    let mut contigs = Vec::with_capacity(chain.len());
    let mut out_gaps = Vec::with_capacity(gaps.len());
    let mut start: i64 = 0;
    for (i, &(seq, minus)) in chain.iter().enumerate() {
        let meta = seqs[seq as usize];
        if i > 0 {
            let prev: &PlacedSeq = contigs.last().unwrap();
            let mut g = gaps[i - 1].0.round() as i64;
            let floor = -(i64::from(prev.len.min(meta.len)) - 1);
            if g < floor {
                g = floor;
            }
            out_gaps.push(GapEntry { size: g, sd: gaps[i - 1].1 });
            start = prev.start as i64 + i64::from(prev.len) + g;
        }
        contigs.push(PlacedSeq {
            seq,
            minus,
            start: start as u64,
            len: meta.len,
            depth: meta.depth,
        });
    }
    debug_assert!(contigs.windows(2).all(|w| w[1].start > w[0].start));
    ScaffoldLayout { contigs, gaps: out_gaps }
}

/// One chosen extension during traversal.
struct Step<'a> {
    edge: &'a LinkEdge,
    enter: SeqEnd,
}

struct Walker<'a> {
    seqs: &'a [SeqMeta],
    elig: &'a EndEligibility,
    adj: HashMap<SeqEnd, Vec<&'a LinkEdge>>,
    long_min: u32,
}

/// Outcome of rule 2 at one end.
enum Rule2<'a> {
    NoLongPartners,
    Ambiguous,
    Choice(&'a LinkEdge),
}

impl<'a> Walker<'a> {
    fn new(edges: &'a [LinkEdge], seqs: &'a [SeqMeta], elig: &'a EndEligibility, long_min: u32) -> Walker<'a> {
        let mut adj: HashMap<SeqEnd, Vec<&LinkEdge>> = HashMap::new();
        for e in edges {
            if e.end_a.seq == e.end_b.seq {
                continue;
            }
            adj.entry(e.end_a).or_default().push(e);
            adj.entry(e.end_b).or_default().push(e);
        }
        Walker { seqs, elig, adj, long_min }
    }

    fn is_long(&self, seq: u32) -> bool {
        self.seqs[seq as usize].len > self.long_min
    }

    /// Rule-2 selection at `e`: the unique closest long partner,
    /// independent of placement. Near-ties (within 1 base) are resolved
    /// by a support majority or declared ambiguous.
    fn rule2_choice(&self, e: SeqEnd) -> Rule2<'a> {
        let mut cands: Vec<&'a LinkEdge> = match self.adj.get(&e) {
            Some(v) => v
                .iter()
                .filter(|edge| {
                    let o = edge.other(e);
                    self.is_long(o.seq) && self.elig.eligible(o)
                })
                .copied()
                .collect(),
            None => return Rule2::NoLongPartners,
        };
        if cands.is_empty() {
            return Rule2::NoLongPartners;
        }
        cands.sort_by_key(|edge| {
            let o = edge.other(e);
            ((edge.gap * 10.0).round() as i64, std::cmp::Reverse(edge.support), o.seq, o.tail)
        });
        let g0 = cands[0].gap;
        let near: Vec<&'a LinkEdge> =
            cands.iter().filter(|edge| edge.gap - g0 <= 1.0).copied().collect();
        if near.len() == 1 {
            return Rule2::Choice(near[0]);
        }
        let smax = near.iter().map(|edge| edge.support).max().unwrap();
        let top: Vec<&'a LinkEdge> =
            near.iter().filter(|edge| edge.support == smax).copied().collect();
        if top.len() == 1 {
            Rule2::Choice(top[0])
        } else {
            Rule2::Ambiguous
        }
    }

    /// Applies rules 2-4 at end `e`. Returns the step to take, or None to
    /// stop the walk.
    fn extend(&self, e: SeqEnd, placed: &[bool]) -> Option<Step<'a>> {
        if !self.elig.eligible(e) {
            return None;
        }
        let mut cands: Vec<&'a LinkEdge> = Vec::new();
        for edge in self.adj.get(&e)? {
            let enter = edge.other(e);
            if !placed[enter.seq as usize] && self.elig.eligible(enter) {
                cands.push(edge);
            }
        }
        // deterministic closest-first order: gap, then support, then id
        cands.sort_by_key(|edge| {
            let o = edge.other(e);
            ((edge.gap * 10.0).round() as i64, std::cmp::Reverse(edge.support), o.seq, o.tail)
        });

        // rule 2: a long sequence chains to its unique closest long
        // partner, and only when that partner uniquely picks it back —
        // otherwise the ambiguity stops the walk
        if self.is_long(e.seq) {
            match self.rule2_choice(e) {
                Rule2::NoLongPartners => {}
                Rule2::Ambiguous => return None,
                Rule2::Choice(edge) => {
                    let enter = edge.other(e);
                    if placed[enter.seq as usize] {
                        return None;
                    }
                    return match self.rule2_choice(enter) {
                        Rule2::Choice(back) if std::ptr::eq(back, edge) => {
                            Some(Step { edge, enter })
                        }
                        _ => None,
                    };
                }
            }
        }
        // rule 3: closest extendable partner; rule 4: otherwise the
        // closest partner terminates the walk (its far end is defective,
        // so the next step stops there)
        let extendable = cands
            .iter()
            .find(|edge| self.elig.eligible(edge.other(e).opposite()))
            .copied();
        let chosen = extendable.or_else(|| cands.first().copied())?;
        Some(Step { edge: chosen, enter: chosen.other(e) })
    }
}

/// Orders and orients sequences along link edges under rules 2-5. Every
/// input sequence appears in exactly one returned layout; sequences that
/// join nothing come back as singletons. `long_min` is half the tier's
/// largest insert size.
pub fn traverse(
    edges: &[LinkEdge],
    elig: &EndEligibility,
    seqs: &[SeqMeta],
    long_min: u32,
) -> Vec<ScaffoldLayout> {
    let walker = Walker::new(edges, seqs, elig, long_min);
    let mut placed = vec![false; seqs.len()];
    let mut chains: Vec<(Vec<(u32, bool)>, Vec<(f64, f64)>)> = Vec::new();

    let mut seed_order: Vec<u32> = (0..seqs.len() as u32).collect();
    seed_order.sort_by_key(|&s| (std::cmp::Reverse(seqs[s as usize].len), s));

    for seed in seed_order {
        if placed[seed as usize] {
            continue;
        }
        placed[seed as usize] = true;
        // rightward then leftward from the seed, in seed-forward frame
        let mut right: Vec<((u32, bool), (f64, f64))> = Vec::new();
        let mut e = SeqEnd::tail(seed);
        while let Some(step) = walker.extend(e, &placed) {
            let p = step.enter.seq;
            placed[p as usize] = true;
            // entering at the head keeps the partner forward
            right.push(((p, step.enter.tail), (step.edge.gap, step.edge.gap_sd)));
            e = step.enter.opposite();
        }
        let mut left: Vec<((u32, bool), (f64, f64))> = Vec::new();
        let mut e = SeqEnd::head(seed);
        while let Some(step) = walker.extend(e, &placed) {
            let p = step.enter.seq;
            placed[p as usize] = true;
            // the partner sits leftward; entering at its tail keeps it forward
            left.push(((p, !step.enter.tail), (step.edge.gap, step.edge.gap_sd)));
            e = step.enter.opposite();
        }
        if left.is_empty() && right.is_empty() {
            placed[seed as usize] = false; // stays available for other walks
            continue;
        }
        let mut chain: Vec<(u32, bool)> = Vec::new();
        let mut gaps: Vec<(f64, f64)> = Vec::new();
        for ((sq, minus), gap) in left.into_iter().rev() {
            chain.push((sq, minus));
            gaps.push(gap);
        }
        chain.push((seed, false));
        for ((sq, minus), gap) in right {
            gaps.push(gap);
            chain.push((sq, minus));
        }
        chains.push((chain, gaps));
    }

    // rule 5: suspend an unplaced sequence into a gap it links on both
    // sides, one candidate only
    let edge_between = |a: SeqEnd, b: SeqEnd| -> Option<&LinkEdge> {
        walker.adj.get(&a)?.iter().find(|e| e.other(a) == b).copied()
    };
    for (chain, gaps) in &mut chains {
        let mut gi = 0;
        while gi < gaps.len() {
            let (ls, lminus) = chain[gi];
            let (rs, rminus) = chain[gi + 1];
            let left_end = SeqEnd { seq: ls, tail: !lminus };
            let right_end = SeqEnd { seq: rs, tail: rminus };
            let mut found: Vec<(u32, bool, f64, f64, f64, f64)> = Vec::new();
            for s in 0..seqs.len() as u32 {
                if placed[s as usize]
                    || !walker.elig.eligible(SeqEnd::head(s))
                    || !walker.elig.eligible(SeqEnd::tail(s))
                {
                    continue;
                }
                for &facing_tail in &[false, true] {
                    let near = SeqEnd { seq: s, tail: facing_tail };
                    if let (Some(e1), Some(e2)) =
                        (edge_between(left_end, near), edge_between(near.opposite(), right_end))
                    {
                        // facing the left neighbor with its tail means reversed
                        found.push((s, facing_tail, e1.gap, e1.gap_sd, e2.gap, e2.gap_sd));
                    }
                }
            }
            if found.len() == 1 {
                let (s, minus, g1, sd1, g2, sd2) = found[0];
                placed[s as usize] = true;
                chain.insert(gi + 1, (s, minus));
                gaps[gi] = (g1, sd1);
                gaps.insert(gi + 1, (g2, sd2));
                gi += 2; // examine the remainder, not the fresh gaps
            } else {
                gi += 1;
            }
        }
    }

    let mut layouts: Vec<ScaffoldLayout> =
        chains.iter().map(|(c, g)| layout_from_chain(c, g, seqs)).collect();
    for s in 0..seqs.len() as u32 {
        if !placed[s as usize] {
            layouts.push(layout_from_chain(&[(s, false)], &[], seqs));
        }
    }
    layouts
}

/// N50/L50 over `lengths` at least `floor`, plus their total.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct N50Stats {
    pub n50: u64,
    pub l50: usize,
    pub total: u64,
}

/// N50 = largest x such that pieces ≥ x sum to at least half the total.
pub fn compute_n50(lengths: &[u64], floor: u64) -> N50Stats {
    let mut ls: Vec<u64> = lengths.iter().copied().filter(|&l| l >= floor).collect();
    ls.sort_unstable_by(|a, b| b.cmp(a));
    let total: u64 = ls.iter().sum();
    if total == 0 {
        return N50Stats { n50: 0, l50: 0, total: 0 };
    }
    let mut cum = 0u64;
    for (i, &l) in ls.iter().enumerate() {
        cum += l;
        if 2 * cum >= total {
            return N50Stats { n50: l, l50: i + 1, total };
        }
    }
    unreachable!("cumulative sum reaches the total");
}

/// Runs the defect check and traversal once per support threshold and
/// keeps the layout set with the best scaffold N50; ties go to the larger
/// (more conservative) threshold.
pub fn sweep_min_support(
    edges: &[LinkEdge],
    seqs: &[SeqMeta],
    long_min: u32,
    depth_factor: f64,
    thresholds: &[u32],
) -> (Vec<ScaffoldLayout>, u32) {
    assert!(!thresholds.is_empty());
    let mut best: Option<(u64, u32, Vec<ScaffoldLayout>)> = None;
    for &t in thresholds {
        let passing: Vec<LinkEdge> =
            edges.iter().filter(|e| e.support >= t).cloned().collect();
        let (kept, elig) = check_end_defects(&passing, seqs, depth_factor);
        let layouts = traverse(&kept, &elig, seqs, long_min);
        let lens: Vec<u64> = layouts.iter().map(|l| l.span_len()).collect();
        let n50 = compute_n50(&lens, 0).n50;
        let better = match &best {
            None => true,
            Some((bn, bt, _)) => n50 > *bn || (n50 == *bn && t > *bt),
        };
        if better {
            best = Some((n50, t, layouts));
        }
    }
    let (_, t, layouts) = best.unwrap();
    (layouts, t)
}

/// Replaces each outer layout's member ids (which name inner layouts)
/// with the inner layouts' own contigs, composing orientation and
/// keeping every gap.
pub fn flatten(outer: &[ScaffoldLayout], inner: &[ScaffoldLayout], seqs: &[SeqMeta]) -> Vec<ScaffoldLayout> {
    outer
        .iter()
        .map(|o| {
            let mut chain: Vec<(u32, bool)> = Vec::new();
            let mut gaps: Vec<(f64, f64)> = Vec::new();
            for (i, pc) in o.contigs.iter().enumerate() {
                if i > 0 {
                    gaps.push((o.gaps[i - 1].size as f64, o.gaps[i - 1].sd));
                }
                let il = &inner[pc.seq as usize];
                if pc.minus {
                    for (j, c) in il.contigs.iter().enumerate().rev() {
                        chain.push((c.seq, !c.minus));
                        if j > 0 {
                            gaps.push((il.gaps[j - 1].size as f64, il.gaps[j - 1].sd));
                        }
                    }
                } else {
                    for (j, c) in il.contigs.iter().enumerate() {
                        if j > 0 {
                            gaps.push((il.gaps[j - 1].size as f64, il.gaps[j - 1].sd));
                        }
                        chain.push((c.seq, c.minus));
                    }
                }
            }
            layout_from_chain(&chain, &gaps, seqs)
        })
        .collect()
}

/// Writes the scaffold report: one line per placed object,
/// `scaffold TAB index TAB CONTIG|GAP TAB id TAB strand TAB start TAB
/// length_or_gapsize TAB depth_or_sd`.
pub fn write_srf<W: Write>(
    mut w: W,
    layouts: &[ScaffoldLayout],
    seq_names: &[String],
) -> io::Result<()> {
    for (si, l) in layouts.iter().enumerate() {
        let name = format!("scaffold{}", si + 1);
        let mut index = 0;
        for (ci, c) in l.contigs.iter().enumerate() {
            if ci > 0 {
                let g = l.gaps[ci - 1];
                let gap_start = l.contigs[ci - 1].start + u64::from(l.contigs[ci - 1].len);
                writeln!(w, "{}\t{}\tGAP\t-\t-\t{}\t{}\t{:.3}", name, index, gap_start, g.size, g.sd)?;
                index += 1;
            }
            writeln!(
                w,
                "{}\t{}\tCONTIG\t{}\t{}\t{}\t{}\t{:.3}",
                name,
                index,
                seq_names[c.seq as usize],
                if c.minus { '-' } else { '+' },
                c.start,
                c.len,
                c.depth,
            )?;
            index += 1;
        }
    }
    Ok(())
}

/// Parses a scaffold report written by [`write_srf`]. Layouts come back
/// in file order; member ids resolve through `seq_ids`.
pub fn read_srf<R: BufRead>(r: R, seq_ids: &HashMap<String, u32>) -> io::Result<Vec<ScaffoldLayout>> {
    let bad = |line: usize, msg: &str| {
        io::Error::new(io::ErrorKind::InvalidData, format!("srf line {}: {}", line, msg))
    };
    let mut layouts: Vec<ScaffoldLayout> = Vec::new();
    let mut names: HashMap<String, usize> = HashMap::new();
    let mut pending_gap: HashMap<usize, GapEntry> = HashMap::new();
    for (ln, line) in r.lines().enumerate() {
        let line = line?;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 8 {
            return Err(bad(ln + 1, "expected 8 fields"));
        }
        let li = match names.get(f[0]) {
            Some(&i) => i,
            None => {
                names.insert(f[0].to_string(), layouts.len());
                layouts.push(ScaffoldLayout::default());
                layouts.len() - 1
            }
        };
        match f[2] {
            "GAP" => {
                let size: i64 = f[6].parse().map_err(|_| bad(ln + 1, "bad gap size"))?;
                let sd: f64 = f[7].parse().map_err(|_| bad(ln + 1, "bad gap sd"))?;
                pending_gap.insert(li, GapEntry { size, sd });
            }
            "CONTIG" => {
                let seq = *seq_ids.get(f[3]).ok_or_else(|| bad(ln + 1, "unknown sequence id"))?;
                let minus = match f[4] {
                    "+" => false,
                    "-" => true,
                    _ => return Err(bad(ln + 1, "bad strand")),
                };
                let start: u64 = f[5].parse().map_err(|_| bad(ln + 1, "bad start"))?;
                let len: u32 = f[6].parse().map_err(|_| bad(ln + 1, "bad length"))?;
                let depth: f64 = f[7].parse().map_err(|_| bad(ln + 1, "bad depth"))?;
                let l = &mut layouts[li];
                if !l.contigs.is_empty() {
                    let g = pending_gap
                        .remove(&li)
                        .ok_or_else(|| bad(ln + 1, "missing gap between contigs"))?;
                    l.gaps.push(g);
                }
                l.contigs.push(PlacedSeq { seq, minus, start, len, depth });
            }
            _ => return Err(bad(ln + 1, "bad record type")),
        }
    }
    Ok(layouts)
}
