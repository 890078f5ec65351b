//! Stage orchestration: the assembly as a resumable run directory.
//!
//! Stages run in a fixed order — import, mercount, mergraph, ufx,
//! contigs, bubble (diploid runs only), merblast, ono, gap_closure —
//! each reading its inputs from files earlier stages wrote into the
//! output directory. Completion is tracked by chained fingerprints: a
//! stage's fingerprint hashes the config digest, its predecessor's
//! fingerprint, and (for import) the read files themselves, so a rerun
//! skips every stage whose world is unchanged and any upstream edit
//! cascades downstream on its own. Every output file opens with a
//! `# produced_by=<stage> config_digest=<hex>` header and contains no
//! timestamps, so byte-identical inputs give byte-identical outputs
//! whatever the worker count.

use std::collections::HashMap;
use std::fmt;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Cursor, Read, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::align::{self, ReadAlignment};
use crate::bubble;
use crate::config::{validate_config, ConfigError, LibraryConfig, RunConfig};
use crate::fastx::{read_fasta_full, FastqReader, QualSeq};
use crate::gapclose::{self, GapParams};
use crate::scaffold::{self, compute_n50, Library, ReadPair, ScaffoldLayout, SeqMeta};
use crate::spectrum;
use crate::ufx::{self, CountParams, UfxTable, UuContig};

/// Depth band (relative to the fitted peak) a leftover contig must sit in
/// to scaffold alongside the diplotigs.
const ISOTIG_BAND: (f64, f64) = (0.66, 1.5);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Import,
    Mercount,
    Mergraph,
    Ufx,
    Contigs,
    Bubble,
    Merblast,
    Ono,
    GapClosure,
}

impl Stage {
    pub const ALL: [Stage; 9] = [
        Stage::Import,
        Stage::Mercount,
        Stage::Mergraph,
        Stage::Ufx,
        Stage::Contigs,
        Stage::Bubble,
        Stage::Merblast,
        Stage::Ono,
        Stage::GapClosure,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Import => "import",
            Stage::Mercount => "mercount",
            Stage::Mergraph => "mergraph",
            Stage::Ufx => "ufx",
            Stage::Contigs => "contigs",
            Stage::Bubble => "bubble",
            Stage::Merblast => "merblast",
            Stage::Ono => "ono",
            Stage::GapClosure => "gap_closure",
        }
    }

    pub fn from_name(s: &str) -> Option<Stage> {
        Stage::ALL.into_iter().find(|st| st.name() == s)
    }

    /// Files the stage writes, relative to the run directory.
    fn outputs(self) -> &'static [&'static str] {
        match self {
            Stage::Import => &["import.tsv"],
            Stage::Mercount => &["mercount.hist.tsv", "mercount.stats.tsv"],
            Stage::Mergraph => &["mergraph.ufx.bin"],
            Stage::Ufx => &["ufx.tsv"],
            Stage::Contigs => &["contigs.fa"],
            Stage::Bubble => &["bubbletigs.fa", "bubble.alleles.tsv"],
            Stage::Merblast => &["merblast.tsv"],
            Stage::Ono => &["ono.srf", "ono.stats.tsv"],
            Stage::GapClosure => &["assembly.fa", "gapclose.tsv", "assembly.stats.tsv"],
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug)]
pub enum PipelineError {
    Config(ConfigError),
    Stage { stage: Stage, msg: String },
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PipelineError::Config(e) => write!(f, "{e}"),
            PipelineError::Stage { stage, msg } => write!(f, "stage {stage}: {msg}"),
        }
    }
}

impl std::error::Error for PipelineError {}

impl From<ConfigError> for PipelineError {
    fn from(e: ConfigError) -> Self {
        PipelineError::Config(e)
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunSummary {
    pub executed: Vec<Stage>,
    /// Stages whose recorded fingerprint matched — nothing re-ran.
    pub cached: Vec<Stage>,
    pub outdir: PathBuf,
}

fn header(stage: Stage, digest: &str) -> String {
    format!("# produced_by={} config_digest={digest}\n", stage.name())
}

fn out_path(cfg: &RunConfig, name: &str) -> PathBuf {
    cfg.outdir.join(name)
}

/// The scaffolding sequence set: bubbletigs when a diploid run chains
/// them, plain UU contigs otherwise.
fn tig_file(cfg: &RunConfig) -> &'static str {
    if cfg.diploid {
        "bubbletigs.fa"
    } else {
        "contigs.fa"
    }
}

// ---- small file helpers ----------------------------------------------

fn write_text(path: &Path, text: &str) -> Result<(), String> {
    fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))
}

fn fasta_out(
    path: &Path,
    head: &str,
    records: impl IntoIterator<Item = (String, Vec<u8>)>,
) -> Result<(), String> {
    let err = |e: io::Error| format!("{}: {e}", path.display());
    let mut w = BufWriter::new(File::create(path).map_err(err)?);
    w.write_all(head.as_bytes()).map_err(err)?;
    for (id, seq) in records {
        writeln!(w, ">{id}").map_err(err)?;
        for chunk in seq.chunks(80) {
            w.write_all(chunk).map_err(err)?;
            w.write_all(b"\n").map_err(err)?;
        }
    }
    w.flush().map_err(err)
}

fn sha256_file(path: &Path) -> Result<String, String> {
    let mut f = File::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut h = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(|e| format!("{}: {e}", path.display()))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex(&h.finalize()))
}

fn hex(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        use fmt::Write as _;
        let _ = write!(s, "{b:02x}");
    }
    s
}

/// key = value lines, `#` lines skipped.
fn read_stats(path: &Path) -> Result<HashMap<String, String>, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut out = HashMap::new();
    for line in text.lines() {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some((k, v)) = line.split_once('=') {
            out.insert(k.trim().to_string(), v.trim().to_string());
        }
    }
    Ok(out)
}

fn stat_f64(stats: &HashMap<String, String>, key: &str) -> Result<f64, String> {
    stats
        .get(key)
        .ok_or_else(|| format!("mercount.stats.tsv: missing {key}"))?
        .parse()
        .map_err(|e| format!("mercount.stats.tsv: bad {key}: {e}"))
}

/// `key=value` attributes from a FASTA description (everything after the
/// id token).
fn attrs(head: &str) -> HashMap<&str, &str> {
    head.split_whitespace()
        .skip(1)
        .filter_map(|t| t.split_once('='))
        .collect()
}

fn attr<T: std::str::FromStr>(
    map: &HashMap<&str, &str>,
    key: &str,
    what: &str,
) -> Result<T, String> {
    map.get(key)
        .ok_or_else(|| format!("{what}: missing {key}="))?
        .parse()
        .map_err(|_| format!("{what}: bad {key}="))
}

// ---- read loading ------------------------------------------------------

pub struct LoadedReads {
    /// All libraries' reads in config order, mates adjacent.
    pub reads: Vec<QualSeq>,
    /// Pairs with `lib` pointing at the config library index.
    pub pairs: Vec<ReadPair>,
}

fn read_fastq_all(path: &Path) -> Result<Vec<QualSeq>, String> {
    let reader = FastqReader::open(path).map_err(|e| e.to_string())?;
    reader
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())
}

fn load_library(lib_files: &[PathBuf]) -> Result<Vec<QualSeq>, String> {
    match lib_files {
        [one] => {
            let reads = read_fastq_all(one)?;
            if reads.len() % 2 != 0 {
                return Err(format!(
                    "{}: interleaved file holds an odd number of reads",
                    one.display()
                ));
            }
            Ok(reads)
        }
        [a, b] => {
            let fwd = read_fastq_all(a)?;
            let rev = read_fastq_all(b)?;
            if fwd.len() != rev.len() {
                return Err(format!(
                    "{} and {}: mate files hold {} vs {} reads",
                    a.display(),
                    b.display(),
                    fwd.len(),
                    rev.len()
                ));
            }
            Ok(fwd
                .into_iter()
                .zip(rev)
                .flat_map(|(x, y)| [x, y])
                .collect())
        }
        _ => unreachable!("config validation enforces one or two files"),
    }
}

/// Loads every library, in config order, pairing mates by position.
pub fn load_all_reads(cfg: &RunConfig) -> Result<LoadedReads, String> {
    let mut out = LoadedReads {
        reads: Vec::new(),
        pairs: Vec::new(),
    };
    for (li, lib) in cfg.libraries.iter().enumerate() {
        let reads = load_library(&lib.files)?;
        for p in 0..reads.len() / 2 {
            let a = (out.reads.len() + 2 * p) as u32;
            out.pairs.push(ReadPair {
                read_a: a,
                read_b: a + 1,
                lib: li as u32,
            });
        }
        out.reads.extend(reads);
    }
    Ok(out)
}

/// Loads only the libraries flagged for k-mer counting.
pub fn load_counting_reads(cfg: &RunConfig) -> Result<Vec<QualSeq>, String> {
    let mut reads = Vec::new();
    for lib in cfg.libraries.iter().filter(|l| l.count) {
        reads.extend(load_library(&lib.files)?);
    }
    Ok(reads)
}

// ---- shared stage inputs -----------------------------------------------

fn load_ufx(cfg: &RunConfig) -> Result<UfxTable, String> {
    let path = out_path(cfg, "mergraph.ufx.bin");
    let f = File::open(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    let (table, _meta) = UfxTable::read(BufReader::new(f)).map_err(|e| e.to_string())?;
    Ok(table)
}

/// The scaffolding inputs: names, bases, and per-sequence meta.
fn load_tigs(cfg: &RunConfig) -> Result<(Vec<String>, Vec<Vec<u8>>, Vec<SeqMeta>), String> {
    let path = out_path(cfg, tig_file(cfg));
    let recs = read_fasta_full(&path).map_err(|e| e.to_string())?;
    let mut names = Vec::with_capacity(recs.len());
    let mut seqs = Vec::with_capacity(recs.len());
    let mut metas = Vec::with_capacity(recs.len());
    for (head, bases) in recs {
        let what = format!("{}: {head}", path.display());
        let depth: f64 = attr(&attrs(&head), "depth", &what)?;
        names.push(head.split_whitespace().next().unwrap().to_string());
        metas.push(SeqMeta {
            len: bases.len() as u32,
            depth,
        });
        seqs.push(bases);
    }
    Ok((names, seqs, metas))
}

fn load_contigs(cfg: &RunConfig) -> Result<Vec<UuContig>, String> {
    let path = out_path(cfg, "contigs.fa");
    let recs = read_fasta_full(&path).map_err(|e| e.to_string())?;
    let mut out = Vec::with_capacity(recs.len());
    for (head, bases) in recs {
        let what = format!("{}: {head}", path.display());
        let a = attrs(&head);
        let ext = |key: &str| -> Result<Option<u8>, String> {
            let v: String = attr(&a, key, &what)?;
            match v.as_bytes() {
                [b'.'] => Ok(None),
                [b] => Ok(Some(*b)),
                _ => Err(format!("{what}: bad {key}=")),
            }
        };
        out.push(UuContig {
            kmers: attr(&a, "kmers", &what)?,
            depth: attr(&a, "depth", &what)?,
            left_ext: ext("left")?,
            right_ext: ext("right")?,
            cyclic: attr::<u8>(&a, "cyclic", &what)? != 0,
            bases,
        });
    }
    Ok(out)
}

fn load_alignments(cfg: &RunConfig, reads: &[QualSeq], names: &[String]) -> Result<Vec<ReadAlignment>, String> {
    let read_ids: HashMap<String, u32> = reads
        .iter()
        .enumerate()
        .map(|(i, r)| (r.id.clone(), i as u32))
        .collect();
    let seq_ids: HashMap<String, u32> = names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.clone(), i as u32))
        .collect();
    let path = out_path(cfg, "merblast.tsv");
    let f = File::open(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    align::read_alignments(BufReader::new(f), &read_ids, &seq_ids).map_err(|e| e.to_string())
}

fn scaffold_libs(cfg: &RunConfig) -> Vec<Library> {
    cfg.libraries
        .iter()
        .map(|l| Library {
            insert_mean: l.insert_mean,
            insert_sd: l.insert_sd,
        })
        .collect()
}

// ---- stages --------------------------------------------------------------

fn stage_import(cfg: &RunConfig, digest: &str) -> Result<(), String> {
    let mut body = header(Stage::Import, digest);
    body.push_str("#library\trole\ttier\tcount\tfile\treads\tsha256\n");
    for lib in &cfg.libraries {
        let mut counts = Vec::new();
        for f in &lib.files {
            let reads = read_fastq_all(f)?;
            for r in &reads {
                if r.bases.len() < cfg.k {
                    return Err(format!(
                        "{}: read {} is shorter than k={}",
                        f.display(),
                        r.id,
                        cfg.k
                    ));
                }
            }
            counts.push(reads.len());
            use fmt::Write as _;
            let _ = writeln!(
                body,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                lib.name,
                if lib.matepair { "matepair" } else { "fragment" },
                lib.tier,
                lib.count,
                f.display(),
                reads.len(),
                sha256_file(f)?,
            );
        }
        if counts.len() == 2 && counts[0] != counts[1] {
            return Err(format!(
                "library {}: mate files hold {} vs {} reads",
                lib.name, counts[0], counts[1]
            ));
        }
    }
    write_text(&out_path(cfg, "import.tsv"), &body)
}

fn count_params(cfg: &RunConfig) -> CountParams {
    CountParams {
        k: cfg.k,
        d_min: cfg.d_min,
        q_min: cfg.q_min,
    }
}

fn stage_mercount(cfg: &RunConfig, digest: &str) -> Result<(), String> {
    let reads = load_counting_reads(cfg)?;
    let (_table, hist) = ufx::count_kmers(&reads, &count_params(cfg));

    let mut hist_text = header(Stage::Mercount, digest).into_bytes();
    hist.write_tsv(&mut hist_text).map_err(|e| e.to_string())?;
    write_text(
        &out_path(cfg, "mercount.hist.tsv"),
        &String::from_utf8(hist_text).unwrap(),
    )?;

    let mut s = header(Stage::Mercount, digest);
    use fmt::Write as _;
    let read_bases: u64 = reads.iter().map(|r| r.bases.len() as u64).sum();
    let _ = writeln!(s, "kmer_len = {}", cfg.k);
    let _ = writeln!(s, "reads = {}", reads.len());
    let _ = writeln!(s, "read_bases = {read_bases}");
    let _ = writeln!(s, "distinct_kmers = {}", hist.distinct());
    let _ = writeln!(s, "kmer_mass = {}", hist.mass());
    let fit = spectrum::fit_two_gaussians(&hist).map_err(|e| format!("spectrum fit: {e}"))?;
    let genome_size = spectrum::estimate_genome_size(&hist, fit.d_max);
    let _ = writeln!(s, "d_max = {:.6}", fit.d_max);
    let _ = writeln!(s, "sigma_full = {:.6}", fit.sigma_full);
    let _ = writeln!(s, "sigma_half = {:.6}", fit.sigma_half);
    let _ = writeln!(s, "genome_size = {genome_size:.1}");
    if cfg.diploid {
        let het = spectrum::estimate_heterozygosity(&fit, cfg.k, genome_size);
        let _ = writeln!(s, "het_rate = {het:.8}");
    }
    write_text(&out_path(cfg, "mercount.stats.tsv"), &s)
}

fn stage_mergraph(cfg: &RunConfig, digest: &str) -> Result<(), String> {
    let reads = load_counting_reads(cfg)?;
    let (table, _hist) = ufx::count_kmers(&reads, &count_params(cfg));
    let path = out_path(cfg, "mergraph.ufx.bin");
    let f = File::create(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    let meta = format!("produced_by=mergraph config_digest={digest}");
    table
        .write(BufWriter::new(f), &meta)
        .map_err(|e| e.to_string())
}

fn stage_ufx(cfg: &RunConfig, digest: &str) -> Result<(), String> {
    let table = load_ufx(cfg)?;
    let mut buf = header(Stage::Ufx, digest).into_bytes();
    table.write_debug_tsv(&mut buf).map_err(|e| e.to_string())?;
    let path = out_path(cfg, "ufx.tsv");
    fs::write(&path, buf).map_err(|e| format!("{}: {e}", path.display()))
}

fn contig_rec(name: String, c: &UuContig) -> (String, Vec<u8>) {
    let ext = |e: Option<u8>| e.map_or('.', char::from);
    (
        format!(
            "{name} depth={:.4} kmers={} left={} right={} cyclic={}",
            c.depth,
            c.kmers,
            ext(c.left_ext),
            ext(c.right_ext),
            u8::from(c.cyclic),
        ),
        c.bases.clone(),
    )
}

fn stage_contigs(cfg: &RunConfig, digest: &str) -> Result<(), String> {
    let table = load_ufx(cfg)?;
    let contigs = ufx::traverse_uu_contigs(&table);
    fasta_out(
        &out_path(cfg, "contigs.fa"),
        &header(Stage::Contigs, digest),
        contigs
            .iter()
            .enumerate()
            .map(|(i, c)| contig_rec(format!("contig{}", i + 1), c)),
    )
}

fn stage_bubble(cfg: &RunConfig, digest: &str) -> Result<(), String> {
    let table = load_ufx(cfg)?;
    let contigs = load_contigs(cfg)?;
    let stats = read_stats(&out_path(cfg, "mercount.stats.tsv"))?;
    let d_max = stat_f64(&stats, "d_max")?;

    let bubbles = bubble::detect_bubbles(&contigs, &table);
    let outcome = bubble::chain_diplotigs(&contigs, &bubbles, &table);
    let isotigs = bubble::select_isotigs(&contigs, &outcome.leftovers, cfg.k, d_max, ISOTIG_BAND);

    let mut names = Vec::new();
    let mut records = Vec::new();
    for (i, d) in outcome.diplotigs.iter().enumerate() {
        let name = format!("diplotig{}", i + 1);
        records.push((
            format!("{name} depth={:.4} alleles={}", d.mean_depth, d.alt_alleles.len()),
            d.consensus.clone(),
        ));
        names.push(name);
    }
    for iso in &isotigs {
        let c = &contigs[iso.contig as usize];
        records.push(contig_rec(format!("contig{}", iso.contig + 1), c));
    }
    fasta_out(
        &out_path(cfg, "bubbletigs.fa"),
        &header(Stage::Bubble, digest),
        records,
    )?;

    let mut buf = header(Stage::Bubble, digest).into_bytes();
    let _ = writeln!(buf, "#diplotig\toffset\tconsensus\talternate");
    bubble::write_alt_sidecar(
        &mut buf,
        names.iter().map(|n| n.as_str()).zip(&outcome.diplotigs),
    )
    .map_err(|e| e.to_string())?;
    let path = out_path(cfg, "bubble.alleles.tsv");
    fs::write(&path, buf).map_err(|e| format!("{}: {e}", path.display()))
}

fn stage_merblast(cfg: &RunConfig, digest: &str) -> Result<(), String> {
    let (names, seqs, _metas) = load_tigs(cfg)?;
    let loaded = load_all_reads(cfg)?;
    let index = align::build_index(&seqs, cfg.k).map_err(|e| e.to_string())?;
    let refs: Vec<&[u8]> = seqs.iter().map(|s| s.as_slice()).collect();
    let alns = align::align_reads(&loaded.reads, &index, &refs);

    let mut buf = header(Stage::Merblast, digest).into_bytes();
    let _ = writeln!(
        buf,
        "#read\tslot\tread_start\tread_end\tseq\tseq_start\tseq_end\tstrand\tmismatches\tindels\tclass"
    );
    align::write_alignments(&mut buf, &alns, &loaded.reads, &names).map_err(|e| e.to_string())?;
    let path = out_path(cfg, "merblast.tsv");
    fs::write(&path, buf).map_err(|e| format!("{}: {e}", path.display()))
}

fn stage_ono(cfg: &RunConfig, digest: &str) -> Result<(), String> {
    let (names, _seqs, tig_metas) = load_tigs(cfg)?;
    let loaded = load_all_reads(cfg)?;
    let base_alns = load_alignments(cfg, &loaded.reads, &names)?;
    let libs = scaffold_libs(cfg);
    let min_threshold = *cfg.min_support.iter().min().unwrap();

    let max_tier = cfg.libraries.iter().map(|l| l.tier).max().unwrap();
    let mut stats = header(Stage::Ono, digest);
    stats.push_str("#tier\tmin_support\tscaffolds\tspan_n50\n");
    let mut flat: Vec<ScaffoldLayout> = Vec::new();
    let mut cur_alns = base_alns.clone();
    let mut cur_metas = tig_metas.clone();
    for tier in 1..=max_tier {
        let tier_libs: Vec<&LibraryConfig> =
            cfg.libraries.iter().filter(|l| l.tier == tier).collect();
        let pairs: Vec<ReadPair> = loaded
            .pairs
            .iter()
            .filter(|p| cfg.libraries[p.lib as usize].tier == tier)
            .copied()
            .collect();
        let long_min = tier_libs
            .iter()
            .map(|l| (l.insert_mean / 2.0) as u32)
            .max()
            .unwrap();
        let edges = scaffold::build_links(
            &cur_alns,
            loaded.reads.len(),
            &pairs,
            &libs,
            &cur_metas,
            min_threshold,
        );
        let (layouts, chosen) = scaffold::sweep_min_support(
            &edges,
            &cur_metas,
            long_min,
            cfg.repeat_copy_count,
            &cfg.min_support,
        );
        flat = if flat.is_empty() {
            layouts
        } else {
            scaffold::flatten(&layouts, &flat, &tig_metas)
        };
        let spans: Vec<u64> = flat.iter().map(|l| l.span_len()).collect();
        use fmt::Write as _;
        let _ = writeln!(
            stats,
            "{tier}\t{chosen}\t{}\t{}",
            flat.len(),
            compute_n50(&spans, 0).n50
        );
        if tier < max_tier {
            cur_metas = flat
                .iter()
                .map(|l| SeqMeta {
                    len: l.span_len() as u32,
                    depth: l.mean_depth(),
                })
                .collect();
            // Re-project the original tig-space alignments through the
            // cumulative placements; `flat` always maps base tigs.
            let mut place = vec![None; tig_metas.len()];
            for (si, l) in flat.iter().enumerate() {
                for (tig, p) in l.placements(si as u32) {
                    place[tig as usize] = Some(p);
                }
            }
            cur_alns = base_alns
                .iter()
                .map(|a| align::project_alignment(a, place[a.seq as usize].as_ref().unwrap()))
                .collect();
        }
    }

    let mut buf = header(Stage::Ono, digest).into_bytes();
    let _ = writeln!(buf, "#scaffold\tindex\tkind\tid\tstrand\tstart\tlen_or_gap\tdepth_or_sd");
    scaffold::write_srf(&mut buf, &flat, &names).map_err(|e| e.to_string())?;
    let path = out_path(cfg, "ono.srf");
    fs::write(&path, buf).map_err(|e| format!("{}: {e}", path.display()))?;
    write_text(&out_path(cfg, "ono.stats.tsv"), &stats)
}

fn gap_params(cfg: &RunConfig) -> GapParams {
    GapParams {
        min_gap_ns: cfg.min_gap_ns,
        repeat_copy_count: cfg.repeat_copy_count,
        aggressive: cfg.aggressive,
        polymorphic: cfg.diploid,
        ..GapParams::with_k(cfg.k)
    }
}

fn stage_gap_closure(cfg: &RunConfig, digest: &str) -> Result<(), String> {
    let (names, seqs, _metas) = load_tigs(cfg)?;
    let loaded = load_all_reads(cfg)?;
    let alns = load_alignments(cfg, &loaded.reads, &names)?;
    let seq_ids: HashMap<String, u32> = names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.clone(), i as u32))
        .collect();
    let srf = fs::read_to_string(out_path(cfg, "ono.srf")).map_err(|e| e.to_string())?;
    let layouts = scaffold::read_srf(Cursor::new(srf), &seq_ids).map_err(|e| e.to_string())?;
    let stats = read_stats(&out_path(cfg, "mercount.stats.tsv"))?;
    let d_max = stat_f64(&stats, "d_max")?;

    let params = gap_params(cfg);
    let infer: Vec<bool> = cfg.libraries.iter().map(|l| !l.matepair).collect();
    let libs = scaffold_libs(cfg);
    let tasks = gapclose::project_reads(
        &alns,
        &loaded.reads,
        &loaded.pairs,
        &libs,
        &infer,
        &layouts,
        &seqs,
        cfg.repeat_copy_count * d_max,
        &params,
    );
    let closures = gapclose::close_gaps(&tasks, &params);
    let (scaffolds, reports) = gapclose::validate_and_emit(&layouts, &seqs, &closures, d_max, &params);

    fasta_out(
        &out_path(cfg, "assembly.fa"),
        &header(Stage::GapClosure, digest),
        scaffolds.iter().cloned(),
    )?;

    let mut buf = header(Stage::GapClosure, digest).into_bytes();
    let _ = writeln!(buf, "#scaffold\tgap\testimate\tsd\tmethod\tclosed_len\tstatus");
    gapclose::write_closure_report(&mut buf, &reports).map_err(|e| e.to_string())?;
    let path = out_path(cfg, "gapclose.tsv");
    fs::write(&path, buf).map_err(|e| format!("{}: {e}", path.display()))?;

    let lens: Vec<u64> = scaffolds.iter().map(|(_, s)| s.len() as u64).collect();
    let n50 = compute_n50(&lens, 0);
    let count_status = |s: gapclose::GapStatus| reports.iter().filter(|r| r.status == s).count();
    let mut s = header(Stage::GapClosure, digest);
    use fmt::Write as _;
    let _ = writeln!(s, "scaffolds = {}", scaffolds.len());
    let _ = writeln!(s, "total_bases = {}", n50.total);
    let _ = writeln!(s, "scaffold_n50 = {}", n50.n50);
    let _ = writeln!(s, "scaffold_l50 = {}", n50.l50);
    let _ = writeln!(s, "gaps = {}", reports.len());
    let _ = writeln!(s, "closed = {}", count_status(gapclose::GapStatus::Closed));
    let _ = writeln!(s, "size_rejected = {}", count_status(gapclose::GapStatus::SizeRejected));
    let _ = writeln!(s, "unclosed = {}", count_status(gapclose::GapStatus::Unclosed));
    let _ = writeln!(s, "repeat_skipped = {}", count_status(gapclose::GapStatus::RepeatSkipped));
    write_text(&out_path(cfg, "assembly.stats.tsv"), &s)
}

fn run_stage(stage: Stage, cfg: &RunConfig, digest: &str) -> Result<(), String> {
    match stage {
        Stage::Import => stage_import(cfg, digest),
        Stage::Mercount => stage_mercount(cfg, digest),
        Stage::Mergraph => stage_mergraph(cfg, digest),
        Stage::Ufx => stage_ufx(cfg, digest),
        Stage::Contigs => stage_contigs(cfg, digest),
        Stage::Bubble => stage_bubble(cfg, digest),
        Stage::Merblast => stage_merblast(cfg, digest),
        Stage::Ono => stage_ono(cfg, digest),
        Stage::GapClosure => stage_gap_closure(cfg, digest),
    }
}

// ---- state tracking -----------------------------------------------------

const STATE_FILE: &str = "state.tsv";

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Status {
    Done,
    Skipped,
    Failed,
}

impl Status {
    fn token(self) -> &'static str {
        match self {
            Status::Done => "done",
            Status::Skipped => "skipped",
            Status::Failed => "failed",
        }
    }

    fn complete(self) -> bool {
        matches!(self, Status::Done | Status::Skipped)
    }
}

fn read_state(path: &Path) -> HashMap<String, (Status, String)> {
    let Ok(text) = fs::read_to_string(path) else {
        return HashMap::new();
    };
    let mut out = HashMap::new();
    for line in text.lines() {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 3 {
            continue;
        }
        let status = match f[1] {
            "done" => Status::Done,
            "skipped" => Status::Skipped,
            _ => Status::Failed,
        };
        out.insert(f[0].to_string(), (status, f[2].to_string()));
    }
    out
}

fn write_state(
    path: &Path,
    digest: &str,
    state: &HashMap<String, (Status, String)>,
) -> Result<(), String> {
    let mut s = format!("# produced_by=pipeline config_digest={digest}\n#stage\tstatus\tfingerprint\n");
    for stage in Stage::ALL {
        if let Some((status, fp)) = state.get(stage.name()) {
            use fmt::Write as _;
            let _ = writeln!(s, "{}\t{}\t{fp}", stage.name(), status.token());
        }
    }
    write_text(path, &s)
}

/// Chains the stage identity: config digest, predecessor fingerprint,
/// and for import the read files' own content digests.
fn fingerprint(stage: Stage, cfg: &RunConfig, digest: &str, prev: &str) -> Result<String, String> {
    let mut h = Sha256::new();
    h.update(stage.name().as_bytes());
    h.update([0]);
    h.update(digest.as_bytes());
    h.update([0]);
    h.update(prev.as_bytes());
    if stage == Stage::Import {
        for lib in &cfg.libraries {
            for f in &lib.files {
                h.update([0]);
                h.update(sha256_file(f)?.as_bytes());
            }
        }
    }
    Ok(hex(&h.finalize()))
}

fn outputs_exist(cfg: &RunConfig, stage: Stage) -> bool {
    stage.outputs().iter().all(|f| out_path(cfg, f).exists())
}

// ---- orchestration --------------------------------------------------------

/// Runs stages `from..=to` (the full order by default), skipping any stage
/// whose recorded fingerprint matches and whose outputs exist. `--from`
/// forces re-execution from that stage; everything before it must already
/// be complete.
pub fn run(
    cfg: &RunConfig,
    from: Option<Stage>,
    to: Option<Stage>,
) -> Result<RunSummary, PipelineError> {
    validate_config(cfg)?;
    let serr = |stage: Stage, msg: String| PipelineError::Stage { stage, msg };

    fs::create_dir_all(&cfg.outdir)
        .map_err(|e| serr(Stage::Import, format!("{}: {e}", cfg.outdir.display())))?;
    let digest = cfg.digest();
    write_text(
        &out_path(cfg, "config.resolved"),
        &format!("# produced_by=pipeline config_digest={digest}\n{}", cfg.to_text()),
    )
    .map_err(|e| serr(Stage::Import, e))?;

    let state_path = out_path(cfg, STATE_FILE);
    let mut state = read_state(&state_path);
    let mut summary = RunSummary {
        outdir: cfg.outdir.clone(),
        ..RunSummary::default()
    };

    let mut pool = None;
    if cfg.workers > 0 {
        pool = Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(cfg.workers)
                .build()
                .map_err(|e| serr(Stage::Import, e.to_string()))?,
        );
    }

    let mut prev_fp = digest.clone();
    for stage in Stage::ALL {
        let fp = fingerprint(stage, cfg, &digest, &prev_fp).map_err(|e| serr(stage, e))?;
        prev_fp = fp.clone();

        let recorded_ok = state
            .get(stage.name())
            .is_some_and(|(st, rec)| st.complete() && *rec == fp)
            && (outputs_exist(cfg, stage) || (stage == Stage::Bubble && !cfg.diploid));

        if stage == Stage::Bubble && !cfg.diploid {
            state.insert(stage.name().to_string(), (Status::Skipped, fp));
            write_state(&state_path, &digest, &state).map_err(|e| serr(stage, e))?;
            if to == Some(stage) {
                break;
            }
            continue;
        }

        if from.is_some_and(|f| stage < f) {
            if !recorded_ok {
                return Err(serr(
                    stage,
                    "not up to date; rerun without --from".to_string(),
                ));
            }
            summary.cached.push(stage);
            continue;
        }

        let force = from.is_some_and(|f| stage >= f);
        if !force && recorded_ok {
            summary.cached.push(stage);
            if to == Some(stage) {
                break;
            }
            continue;
        }

        let result = match &pool {
            Some(p) => p.install(|| run_stage(stage, cfg, &digest)),
            None => run_stage(stage, cfg, &digest),
        };
        if let Err(msg) = result {
            state.insert(stage.name().to_string(), (Status::Failed, fp));
            let _ = write_state(&state_path, &digest, &state);
            return Err(serr(stage, msg));
        }
        state.insert(stage.name().to_string(), (Status::Done, fp));
        write_state(&state_path, &digest, &state).map_err(|e| serr(stage, e))?;
        summary.executed.push(stage);
        if to == Some(stage) {
            break;
        }
    }
    Ok(summary)
}
