//! Closing intra-scaffold gaps from the reads that belong to them.
//!
//! Each gap becomes an independent task holding the reads that either
//! align into a flank or are pulled in by an aligned mate. Three closure
//! attempts run in order: bridging reads anchored on both flanks
//! ("splints"), a quality-binned k-mer walk from either flank with
//! dynamic k shifting, and a splice of the two maximal walks when they
//! overlap exactly. Accepted closures must fit the estimated gap size
//! within three standard deviations unless aggressive mode is on.

use std::collections::{HashMap, HashSet};
use std::io::{self, Write};

use rayon::prelude::*;

use crate::align::{project_alignment, ReadAlignment};
use crate::fastx::QualSeq;
use crate::kmer::revcomp;
use crate::scaffold::{Library, ReadPair, ScaffoldLayout};

/// One read assigned to a gap, already oriented to the scaffold's
/// forward strand.
#[derive(Clone, Debug)]
pub struct TaskRead {
    pub bases: Vec<u8>,
    pub quals: Vec<u8>,
}

/// Everything needed to close one gap, detached from the rest of the
/// assembly so tasks can run in parallel.
#[derive(Clone, Debug)]
pub struct GapTask {
    pub scaffold: u32,
    pub gap_index: usize,
    /// Scaffold-forward suffix of the sequence left of the gap.
    pub left_flank: Vec<u8>,
    /// Scaffold-forward prefix of the sequence right of the gap.
    pub right_flank: Vec<u8>,
    pub gap_estimate: f64,
    pub gap_sd: f64,
    pub reads: Vec<TaskRead>,
    /// Scaffold depth is at least repeat_copy_count × d_max.
    pub repeat_class: bool,
}

/// Gap-closing knobs.
#[derive(Clone, Debug)]
pub struct GapParams {
    /// Rendered N-runs are never shorter than this; shorter estimates
    /// trim the flanks back to make room.
    pub min_gap_ns: usize,
    /// Scaffolds at this multiple of d_max or deeper keep their gaps.
    pub repeat_copy_count: f64,
    /// Disables the 3-sd closure size window.
    pub aggressive: bool,
    /// Splint consensus by plurality instead of unanimity.
    pub polymorphic: bool,
    /// Anchor k-mer size and the walk's starting k.
    pub k_anchor: usize,
    /// Walks never downshift below this k.
    pub k_floor: usize,
    /// Combined budget of up- and downshifts per walk.
    pub max_shifts: usize,
    /// How much flank sequence each task carries.
    pub flank_len: usize,
}

impl GapParams {
    pub fn with_k(k: usize) -> GapParams {
        GapParams {
            min_gap_ns: 10,
            repeat_copy_count: 2.0,
            aggressive: false,
            polymorphic: true,
            k_anchor: k,
            k_floor: 21.min(k),
            max_shifts: 8,
            flank_len: 160,
        }
    }
}

/// What fills a gap: literal bases, or a merge of flanks that overlap by
/// `n` duplicated bases.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Fill {
    Seq(Vec<u8>),
    Merge(usize),
}

impl Fill {
    /// Signed closure length: negative when the flanks merge.
    pub fn len(&self) -> i64 {
        match self {
            Fill::Seq(s) => s.len() as i64,
            Fill::Merge(n) => -(*n as i64),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CloseMethod {
    Splint,
    RightWalk,
    LeftWalk,
    Patch,
}

impl CloseMethod {
    pub fn token(self) -> &'static str {
        match self {
            CloseMethod::Splint => "splint",
            CloseMethod::RightWalk => "right-walk",
            CloseMethod::LeftWalk => "left-walk",
            CloseMethod::Patch => "patch",
        }
    }
}

/// A computed closure for one gap, before and after size validation.
#[derive(Clone, Debug, PartialEq)]
pub struct Closure {
    pub scaffold: u32,
    pub gap_index: usize,
    pub method: CloseMethod,
    pub fill: Fill,
    /// Splinting reads behind a splint closure; zero for walks.
    pub support: u32,
    pub accepted: bool,
}

/// Groups alignment records by read index; records must arrive read-sorted.
fn record_ranges(alns: &[ReadAlignment], n_reads: usize) -> Vec<(usize, usize)> {
    let mut spans = vec![(0, 0); n_reads];
    let mut i = 0;
    while i < alns.len() {
        let r = alns[i].read as usize;
        let mut j = i;
        while j < alns.len() && alns[j].read as usize == r {
            j += 1;
        }
        spans[r] = (i, j);
        i = j;
    }
    spans
}

/// Builds one task per gap: reads whose (virtually extended) footprint
/// overlaps the gap join it with their aligned strand; unaligned reads
/// join every gap overlapping the footprint their uniquely aligned mate
/// implies, on the opposite strand. `infer_libs` marks the libraries
/// trusted for mate inference. `repeat_depth` is
/// repeat_copy_count × d_max.
pub fn project_reads(
    alns: &[ReadAlignment],
    reads: &[QualSeq],
    pairs: &[ReadPair],
    libs: &[Library],
    infer_libs: &[bool],
    layouts: &[ScaffoldLayout],
    contigs: &[Vec<u8>],
    repeat_depth: f64,
    params: &GapParams,
) -> Vec<GapTask> {
    let spans = record_ranges(alns, reads.len());
    let recs = |r: u32| &alns[spans[r as usize].0..spans[r as usize].1];

    // contig id → (scaffold, placement)
    let mut place = HashMap::new();
    for (si, l) in layouts.iter().enumerate() {
        for (seq, p) in l.placements(si as u32) {
            place.insert(seq, p);
        }
    }
    // per-scaffold gap windows
    let mut tasks: Vec<GapTask> = Vec::new();
    let mut task_of: HashMap<(u32, usize), usize> = HashMap::new();
    for (si, l) in layouts.iter().enumerate() {
        let repeat_class = repeat_depth > 0.0 && l.mean_depth() >= repeat_depth;
        for gi in 0..l.gaps.len() {
            let (lc, rc) = (&l.contigs[gi], &l.contigs[gi + 1]);
            let left_seq = if lc.minus {
                revcomp(&contigs[lc.seq as usize])
            } else {
                contigs[lc.seq as usize].clone()
            };
            let right_seq = if rc.minus {
                revcomp(&contigs[rc.seq as usize])
            } else {
                contigs[rc.seq as usize].clone()
            };
            let lf = left_seq.len().saturating_sub(params.flank_len);
            let rf = params.flank_len.min(right_seq.len());
            task_of.insert((si as u32, gi), tasks.len());
            tasks.push(GapTask {
                scaffold: si as u32,
                gap_index: gi,
                left_flank: left_seq[lf..].to_vec(),
                right_flank: right_seq[..rf].to_vec(),
                gap_estimate: l.gaps[gi].size as f64,
                gap_sd: l.gaps[gi].sd,
                reads: Vec::new(),
                repeat_class,
            });
        }
    }
    let gap_window = |si: u32, gi: usize| -> (i64, i64) {
        let l = &layouts[si as usize];
        let g0 = (l.contigs[gi].start + u64::from(l.contigs[gi].len)) as i64;
        let g1 = l.contigs[gi + 1].start as i64;
        (g0.min(g1), g0.max(g1).max(g0.min(g1) + 1))
    };

    let mut assigned: HashSet<(usize, u32)> = HashSet::new();
    let assign = |tasks: &mut Vec<GapTask>,
                      assigned: &mut HashSet<(usize, u32)>,
                      si: u32,
                      gi: usize,
                      read: u32,
                      minus: bool| {
        let ti = task_of[&(si, gi)];
        if !assigned.insert((ti, read)) {
            return;
        }
        let q = &reads[read as usize];
        let (bases, quals) = if minus {
            (revcomp(&q.bases), q.quals.iter().rev().copied().collect())
        } else {
            (q.bases.clone(), q.quals.clone())
        };
        tasks[ti].reads.push(TaskRead { bases, quals });
    };

    // flank-overhanging reads via their virtual full-read footprint
    for (r, q) in reads.iter().enumerate() {
        for a in recs(r as u32) {
            let Some(p) = place.get(&a.seq) else { continue };
            let s = project_alignment(a, p);
            let rlen = q.bases.len() as i64;
            let vs = i64::from(s.seq_start) - i64::from(s.read_start);
            let ve = i64::from(s.seq_end) + (rlen - i64::from(s.read_end));
            let (vs, ve) = if s.minus {
                // mirror the clipped portions for minus placements
                (
                    i64::from(s.seq_start) - (rlen - i64::from(s.read_end)),
                    i64::from(s.seq_end) + i64::from(s.read_start),
                )
            } else {
                (vs, ve)
            };
            for gi in 0..layouts[s.seq as usize].gaps.len() {
                let (g0, g1) = gap_window(s.seq, gi);
                if vs < g1 && g0 < ve {
                    assign(&mut tasks, &mut assigned, s.seq, gi, r as u32, s.minus);
                }
            }
        }
    }
    // mate-inferred reads: the unaligned mate of a placed read lands one
    // insert away, pointing back
    for p in pairs {
        if !infer_libs[p.lib as usize] {
            continue;
        }
        for (placed, missing) in [(p.read_a, p.read_b), (p.read_b, p.read_a)] {
            let pr = recs(placed);
            if pr.len() != 1 || !recs(missing).is_empty() {
                continue;
            }
            let Some(pl) = place.get(&pr[0].seq) else { continue };
            let s = project_alignment(&pr[0], pl);
            let lib = &libs[p.lib as usize];
            let rlen = reads[missing as usize].bases.len() as i64;
            let (mu, sd2) = (lib.insert_mean, 2.0 * lib.insert_sd);
            let (w0, w1, minus) = if s.minus {
                let five = i64::from(s.seq_end) + i64::from(s.read_start);
                let start = five as f64 - mu;
                (start - sd2, start + rlen as f64 + sd2, false)
            } else {
                let five = i64::from(s.seq_start) - i64::from(s.read_start);
                let end = five as f64 + mu;
                (end - rlen as f64 - sd2, end + sd2, true)
            };
            for gi in 0..layouts[s.seq as usize].gaps.len() {
                let (g0, g1) = gap_window(s.seq, gi);
                if (w0 as i64) < g1 && g0 < w1 as i64 {
                    assign(&mut tasks, &mut assigned, s.seq, gi, missing, minus);
                }
            }
        }
    }
    tasks
}

/// Splint evidence from one read: the left flank's terminal anchor and
/// the right flank's initial anchor both occur, in order; the bases
/// between them (possibly negative) are the fill.
fn splint_fill(read: &[u8], left_anchor: &[u8], right_anchor: &[u8]) -> Option<Fill> {
    let k = left_anchor.len();
    let lp = read.windows(k).position(|w| w == left_anchor)?;
    let rp = read[lp + 1..].windows(k).position(|w| w == right_anchor)? + lp + 1;
    if rp >= lp + k {
        Some(Fill::Seq(read[lp + k..rp].to_vec()))
    } else {
        Some(Fill::Merge(lp + k - rp))
    }
}

/// Consensus over the splinting reads: unanimity of at least two in
/// haploid mode, plurality (ties fail) in polymorphic mode; the winner
/// always needs two observations.
pub fn close_by_splint(task: &GapTask, params: &GapParams) -> Option<(Fill, u32)> {
    let k = params.k_anchor;
    if task.left_flank.len() < k || task.right_flank.len() < k {
        return None;
    }
    let la = &task.left_flank[task.left_flank.len() - k..];
    let ra = &task.right_flank[..k];
    let mut tally: HashMap<Fill, u32> = HashMap::new();
    for r in &task.reads {
        if let Some(f) = splint_fill(&r.bases, la, ra) {
            *tally.entry(f).or_insert(0) += 1;
        }
    }
    if tally.is_empty() {
        return None;
    }
    if params.polymorphic {
        let best = tally.values().max().copied().unwrap();
        let winners: Vec<&Fill> = tally.iter().filter(|(_, &n)| n == best).map(|(f, _)| f).collect();
        if winners.len() == 1 && best >= 2 {
            return Some((winners[0].clone(), best));
        }
        None
    } else {
        if tally.len() == 1 {
            let (f, n) = tally.into_iter().next().unwrap();
            if n >= 2 {
                return Some((f, n));
            }
        }
        None
    }
}

fn quality_bin(q: u8) -> usize {
    match q {
        0..=10 => 0,
        11..=20 => 1,
        21..=30 => 2,
        _ => 3,
    }
}

/// Per-context tallies of the next base by quality bin.
type CtxIndex = HashMap<Vec<u8>, [[u32; 4]; 4]>;

fn build_ctx_index(reads: &[TaskRead], k: usize) -> CtxIndex {
    let mut map: CtxIndex = HashMap::new();
    for r in reads {
        if r.bases.len() < k {
            continue;
        }
        for i in 0..=r.bases.len() - k {
            let w = &r.bases[i..i + k];
            let Some(b) = crate::kmer::encode_base(w[k - 1]) else { continue };
            if w[..k - 1].iter().any(|&c| crate::kmer::encode_base(c).is_none()) {
                continue;
            }
            let e = map.entry(w[..k - 1].to_vec()).or_insert([[0; 4]; 4]);
            e[b as usize][quality_bin(r.quals[i + k - 1])] += 1;
        }
    }
    map
}

enum StepOutcome {
    Base(u8),
    Fork,
    Exhausted,
}

/// The bin-based acceptance rule: the extension base must be the only
/// one with support in the two highest occupied bins, backed by two
/// observations above Q20 or three above Q10.
fn step(idx: &CtxIndex, ctx: &[u8]) -> StepOutcome {
    let Some(t) = idx.get(ctx) else { return StepOutcome::Exhausted };
    let mut occupied = [false; 4];
    for b in t {
        for (bin, &n) in b.iter().enumerate() {
            if n > 0 {
                occupied[bin] = true;
            }
        }
    }
    let top: Vec<usize> = (0..4).rev().filter(|&b| occupied[b]).take(2).collect();
    let mut cands: Vec<usize> = Vec::new();
    for (base, bins) in t.iter().enumerate() {
        if top.iter().any(|&b| bins[b] > 0) {
            cands.push(base);
        }
    }
    match cands.len() {
        0 => StepOutcome::Exhausted,
        1 => {
            let bins = &t[cands[0]];
            let q20 = bins[2] + bins[3];
            let q10 = bins[1] + q20;
            if q20 >= 2 || q10 >= 3 {
                StepOutcome::Base(crate::kmer::decode_base(cands[0] as u8))
            } else {
                StepOutcome::Exhausted
            }
        }
        _ => StepOutcome::Fork,
    }
}

/// The result of one directional walk: the extension beyond the flank
/// and whether the opposite anchor was reached. A reached walk's fill
/// may be negative when the anchor straddles the flank boundary.
#[derive(Clone, Debug, PartialEq)]
pub struct Walk {
    pub ext: Vec<u8>,
    pub reached: bool,
    pub fill: Option<Fill>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WalkDir {
    Right,
    Left,
}

/// Greedy unique extension from one flank toward the other, upshifting k
/// on forks and downshifting on dead ends within the shift budget.
pub fn mer_walk(task: &GapTask, dir: WalkDir, params: &GapParams) -> Walk {
    // leftward walking is rightward walking on the mirrored task
    let (flank, target, reads): (&[u8], Vec<u8>, Vec<TaskRead>) = match dir {
        WalkDir::Right => {
            let t = task.right_flank[..params.k_anchor.min(task.right_flank.len())].to_vec();
            (&task.left_flank, t, task.reads.clone())
        }
        WalkDir::Left => {
            let f = revcomp(&task.right_flank);
            let lt = revcomp(&task.left_flank);
            let t = lt[..params.k_anchor.min(lt.len())].to_vec();
            let mirrored = task
                .reads
                .iter()
                .map(|r| TaskRead {
                    bases: revcomp(&r.bases),
                    quals: r.quals.iter().rev().copied().collect(),
                })
                .collect();
            return walk_forward(&f, &t, mirrored, task, params).mirrored();
        }
    };
    walk_forward(flank, &target, reads, task, params)
}

impl Walk {
    fn mirrored(mut self) -> Walk {
        self.ext = revcomp(&self.ext);
        if let Some(Fill::Seq(s)) = &self.fill {
            self.fill = Some(Fill::Seq(revcomp(s)));
        }
        self
    }
}

fn walk_forward(
    flank: &[u8],
    target: &[u8],
    reads: Vec<TaskRead>,
    task: &GapTask,
    params: &GapParams,
) -> Walk {
    let ka = target.len();
    let longest = reads.iter().map(|r| r.bases.len()).max().unwrap_or(0);
    if ka == 0 || longest == 0 || flank.is_empty() {
        return Walk { ext: Vec::new(), reached: false, fill: None };
    }
    let cap = task.gap_estimate.max(0.0) as usize
        + (3.0 * task.gap_sd).ceil() as usize
        + ka
        + longest;
    let mut k = params.k_anchor;
    let mut idx = build_ctx_index(&reads, k);
    let mut walked = flank.to_vec();
    let mut shifts = 0usize;
    loop {
        if walked.len() - flank.len() > cap {
            break;
        }
        if walked.len() + 1 < k {
            break;
        }
        let ctx = walked[walked.len() + 1 - k..].to_vec();
        match step(&idx, &ctx) {
            StepOutcome::Base(b) => {
                walked.push(b);
                if walked.len() > flank.len().saturating_sub(ka) && walked.ends_with(target) {
                    let fill = walked.len() as i64 - ka as i64 - flank.len() as i64;
                    let fill = if fill >= 0 {
                        Fill::Seq(walked[flank.len()..walked.len() - ka].to_vec())
                    } else {
                        Fill::Merge((-fill) as usize)
                    };
                    return Walk {
                        ext: walked[flank.len()..].to_vec(),
                        reached: true,
                        fill: Some(fill),
                    };
                }
            }
            StepOutcome::Fork => {
                if shifts >= params.max_shifts
                    || k + 2 > longest.saturating_sub(1)
                    || k + 1 > walked.len()
                {
                    break;
                }
                k += 2;
                shifts += 1;
                idx = build_ctx_index(&reads, k);
            }
            StepOutcome::Exhausted => {
                if shifts >= params.max_shifts || k < params.k_floor + 2 {
                    break;
                }
                k -= 2;
                shifts += 1;
                idx = build_ctx_index(&reads, k);
            }
        }
    }
    Walk { ext: walked[flank.len()..].to_vec(), reached: false, fill: None }
}

/// Splices two maximal walks that face each other across the gap,
/// requiring an exact overlap of at least `MIN_PATCH_OVERLAP` bases;
/// the largest such overlap wins.
pub const MIN_PATCH_OVERLAP: usize = 10;

pub fn patch_walks(right_ext: &[u8], left_ext: &[u8]) -> Option<Fill> {
    if right_ext.is_empty() || left_ext.is_empty() {
        return None;
    }
    let max_o = right_ext.len().min(left_ext.len());
    for o in (MIN_PATCH_OVERLAP..=max_o).rev() {
        if right_ext[right_ext.len() - o..] == left_ext[..o] {
            let mut fill = right_ext[..right_ext.len() - o].to_vec();
            fill.extend_from_slice(left_ext);
            return Some(Fill::Seq(fill));
        }
    }
    None
}

/// Runs the closure ladder for one gap: splints, then a walk from either
/// flank, then a patch of the two maximal walks. The result carries the
/// size-window verdict.
pub fn close_gap(task: &GapTask, params: &GapParams) -> Option<Closure> {
    let (method, fill, support) = if let Some((fill, n)) = close_by_splint(task, params) {
        (CloseMethod::Splint, fill, n)
    } else {
        let right = mer_walk(task, WalkDir::Right, params);
        if right.reached {
            (CloseMethod::RightWalk, right.fill.unwrap(), 0)
        } else {
            let left = mer_walk(task, WalkDir::Left, params);
            if left.reached {
                (CloseMethod::LeftWalk, left.fill.unwrap(), 0)
            } else if let Some(fill) = patch_walks(&right.ext, &left.ext) {
                (CloseMethod::Patch, fill, 0)
            } else {
                return None;
            }
        }
    };
    let within =
        (fill.len() as f64 - task.gap_estimate).abs() <= 3.0 * task.gap_sd;
    Some(Closure {
        scaffold: task.scaffold,
        gap_index: task.gap_index,
        method,
        fill,
        support,
        accepted: within || params.aggressive,
    })
}

/// Closes every task in parallel; output keeps task order.
pub fn close_gaps(tasks: &[GapTask], params: &GapParams) -> Vec<Option<Closure>> {
    tasks.par_iter().map(|t| close_gap(t, params)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GapStatus {
    Closed,
    SizeRejected,
    Unclosed,
    RepeatSkipped,
}

impl GapStatus {
    pub fn token(self) -> &'static str {
        match self {
            GapStatus::Closed => "closed",
            GapStatus::SizeRejected => "size-rejected",
            GapStatus::Unclosed => "unclosed",
            GapStatus::RepeatSkipped => "repeat-skipped",
        }
    }
}

/// One row of the closure report.
#[derive(Clone, Debug, PartialEq)]
pub struct GapReport {
    pub scaffold: u32,
    pub gap_index: usize,
    pub estimate: i64,
    pub sd: f64,
    pub method: Option<CloseMethod>,
    pub closed_len: Option<i64>,
    pub status: GapStatus,
}

/// Splices accepted closures into the layouts and renders the rest as
/// N-runs, trimming flanks so no run is shorter than `min_gap_ns`.
/// Scaffolds at or above `repeat_copy_count × d_max` keep all their gaps.
/// Returns the final sequences (named like the scaffold report) and the
/// per-gap report.
pub fn validate_and_emit(
    layouts: &[ScaffoldLayout],
    contigs: &[Vec<u8>],
    closures: &[Option<Closure>],
    d_max: f64,
    params: &GapParams,
) -> (Vec<(String, Vec<u8>)>, Vec<GapReport>) {
    let mut by_gap: HashMap<(u32, usize), &Closure> = HashMap::new();
    for c in closures.iter().flatten() {
        by_gap.insert((c.scaffold, c.gap_index), c);
    }
    let repeat_depth = params.repeat_copy_count * d_max;
    let mut out = Vec::new();
    let mut reports = Vec::new();
    for (si, l) in layouts.iter().enumerate() {
        let repeat = d_max > 0.0 && l.mean_depth() >= repeat_depth;
        let mut bases: Vec<u8> = Vec::new();
        for (ci, pc) in l.contigs.iter().enumerate() {
            let mut seq = if pc.minus {
                revcomp(&contigs[pc.seq as usize])
            } else {
                contigs[pc.seq as usize].clone()
            };
            if ci == 0 {
                bases = seq;
                continue;
            }
            let gi = ci - 1;
            let est = l.gaps[gi].size;
            let closure = by_gap.get(&(si as u32, gi));
            let (status, method, closed_len);
            if repeat {
                status = GapStatus::RepeatSkipped;
                method = closure.map(|c| c.method);
                closed_len = None;
            } else if let Some(c) = closure {
                method = Some(c.method);
                if c.accepted {
                    status = GapStatus::Closed;
                    closed_len = Some(c.fill.len());
                } else {
                    status = GapStatus::SizeRejected;
                    closed_len = None;
                }
            } else {
                status = GapStatus::Unclosed;
                method = None;
                closed_len = None;
            }
            if status == GapStatus::Closed {
                match &closure.unwrap().fill {
                    Fill::Seq(s) => bases.extend_from_slice(s),
                    Fill::Merge(o) => {
                        debug_assert!(*o < seq.len() && bases.ends_with(&seq[..*o]));
                        seq.drain(..*o);
                    }
                }
            } else if est < params.min_gap_ns as i64 {
                // trim the flanks so exactly min_gap_ns Ns stand in
                let d = (params.min_gap_ns as i64 - est) as usize;
                let tl = (d / 2).min(bases.len());
                let tr = (d - tl).min(seq.len());
                bases.truncate(bases.len() - tl);
                seq.drain(..tr);
                bases.extend(std::iter::repeat(b'N').take(params.min_gap_ns));
            } else {
                bases.extend(std::iter::repeat(b'N').take(est as usize));
            }
            bases.extend_from_slice(&seq);
            reports.push(GapReport {
                scaffold: si as u32,
                gap_index: gi,
                estimate: est,
                sd: l.gaps[gi].sd,
                method,
                closed_len,
                status,
            });
        }
        out.push((format!("scaffold{}", si + 1), bases));
    }
    (out, reports)
}

/// Writes the closure report: scaffold, gap index, estimate, sd, method,
/// closed size, status.
pub fn write_closure_report<W: Write>(mut w: W, reports: &[GapReport]) -> io::Result<()> {
    for r in reports {
        writeln!(
            w,
            "scaffold{}\t{}\t{}\t{:.3}\t{}\t{}\t{}",
            r.scaffold + 1,
            r.gap_index,
            r.estimate,
            r.sd,
            r.method.map_or("-", |m| m.token()),
            r.closed_len.map_or_else(|| "-".to_string(), |n| n.to_string()),
            r.status.token(),
        )?;
    }
    Ok(())
}
