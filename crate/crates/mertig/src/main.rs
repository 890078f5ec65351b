//! `assemble` — the command-line front end.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 stage failure.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use mertig::config::RunConfig;
use mertig::evaluate::{self, EvalParams};
use mertig::fastx::{read_fasta, write_fasta, write_fastq, FastqReader, QualSeq};
use mertig::pipeline::{self, PipelineError, Stage};
use mertig::sim::{self, DiploidSpec, GenomeSpec, LibrarySpec, RepeatSpec};
use mertig::spectrum;
use mertig::ufx::{self, CountParams};

#[derive(Parser)]
#[command(
    name = "assemble",
    version,
    about = "Diploid-aware short-read assembler",
    subcommand_required = true,
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the assembly pipeline described by a config file.
    Run(RunArgs),
    /// Count k-mers in FASTQ files and report the fitted depth spectrum.
    Spectrum(SpectrumArgs),
    /// Score an assembly against two haplotype reference FASTAs.
    Evaluate(EvaluateArgs),
    /// Simulate a genome (optionally diploid) and paired reads.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Config file (key = value lines with [library] sections).
    #[arg(short, long)]
    config: PathBuf,
    /// Force re-execution from this stage (earlier stages must be done).
    #[arg(long, value_parser = parse_stage)]
    from: Option<Stage>,
    /// Stop after this stage.
    #[arg(long, value_parser = parse_stage)]
    to: Option<Stage>,
}

#[derive(Args)]
struct SpectrumArgs {
    /// FASTQ files to count.
    #[arg(required = true)]
    files: Vec<PathBuf>,
    #[arg(short, default_value_t = 31)]
    k: usize,
    /// Quality floor for extension tallies.
    #[arg(long, default_value_t = 20)]
    q_min: u8,
    /// Minimum count for a k-mer to survive error filtering.
    #[arg(long, default_value_t = 2)]
    d_min: u32,
    /// Also write the full count histogram as TSV.
    #[arg(long)]
    hist_out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Maternal haplotype FASTA.
    maternal: PathBuf,
    /// Paternal haplotype FASTA.
    paternal: PathBuf,
    /// Assembly FASTA to score.
    assembly: PathBuf,
    /// Marker length (odd).
    #[arg(long, default_value_t = 101)]
    marker_len: usize,
    /// Fraction of single-copy markers sampled for scaffold metrics.
    #[arg(long, default_value_t = 0.001)]
    sample_frac: f64,
    /// Markers a scaffold needs on a chromosome before it counts.
    #[arg(long, default_value_t = 10)]
    min_markers: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SimulateArgs {
    /// Genome length in bases.
    #[arg(long)]
    length: usize,
    /// GC fraction of the background sequence.
    #[arg(long, default_value_t = 0.5)]
    gc: f64,
    /// Repeat family as LEN,COPIES,DIVERGENCE; repeatable.
    #[arg(long = "repeat", value_name = "LEN,COPIES,DIV")]
    repeats: Vec<String>,
    /// Per-base SNV rate between the haplotypes; > 0 makes the run diploid.
    #[arg(long, default_value_t = 0.0)]
    snv_rate: f64,
    /// Per-base indel rate between the haplotypes.
    #[arg(long, default_value_t = 0.0)]
    indel_rate: f64,
    /// Indel sizes are uniform in 1..=MAX.
    #[arg(long, default_value_t = 3, value_name = "MAX")]
    max_indel: usize,
    /// Minimum spacing between planted variants.
    #[arg(long, default_value_t = 0)]
    min_spacing: usize,
    /// Read library as NAME,READLEN,INSERT_MEAN,INSERT_SD,COVERAGE,ERR_RATE;
    /// repeatable.
    #[arg(long = "lib", value_name = "NAME,LEN,MEAN,SD,COV,ERR", required = true)]
    libs: Vec<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory the genome, reads, truth files, and starter config land in.
    #[arg(long)]
    out: PathBuf,
}

fn parse_stage(s: &str) -> Result<Stage, String> {
    Stage::from_name(s).ok_or_else(|| {
        let names: Vec<&str> = Stage::ALL.iter().map(|st| st.name()).collect();
        format!("unknown stage '{s}' (stages: {})", names.join(", "))
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.cmd {
        Cmd::Run(a) => cmd_run(a),
        Cmd::Spectrum(a) => cmd_spectrum(a).map_err(CmdError::Usage),
        Cmd::Evaluate(a) => cmd_evaluate(a).map_err(CmdError::Usage),
        Cmd::Simulate(a) => cmd_simulate(a).map_err(CmdError::Usage),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CmdError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CmdError::Stage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

enum CmdError {
    /// Bad input or configuration — exit 1.
    Usage(String),
    /// A pipeline stage failed — exit 2.
    Stage(String),
}

fn cmd_run(a: RunArgs) -> Result<(), CmdError> {
    let (cfg, warnings) =
        RunConfig::load(&a.config).map_err(|e| CmdError::Usage(e.to_string()))?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let summary = pipeline::run(&cfg, a.from, a.to).map_err(|e| match e {
        PipelineError::Config(c) => CmdError::Usage(c.to_string()),
        PipelineError::Stage { .. } => CmdError::Stage(e.to_string()),
    })?;
    for s in &summary.cached {
        println!("{s}: up to date");
    }
    for s in &summary.executed {
        println!("{s}: done");
    }
    println!("run directory: {}", summary.outdir.display());
    Ok(())
}

fn cmd_spectrum(a: SpectrumArgs) -> Result<(), String> {
    let mut reads: Vec<QualSeq> = Vec::new();
    for f in &a.files {
        let reader = FastqReader::open(f).map_err(|e| e.to_string())?;
        for r in reader {
            reads.push(r.map_err(|e| e.to_string())?);
        }
    }
    let params = CountParams { k: a.k, d_min: a.d_min, q_min: a.q_min };
    let (_table, hist) = ufx::count_kmers(&reads, &params);
    if let Some(path) = &a.hist_out {
        let f = File::create(path).map_err(|e| format!("{}: {e}", path.display()))?;
        hist.write_tsv(BufWriter::new(f)).map_err(|e| e.to_string())?;
    }
    println!("k = {}", a.k);
    println!("reads = {}", reads.len());
    println!("distinct_kmers = {}", hist.distinct());
    println!("kmer_mass = {}", hist.mass());
    let fit = spectrum::fit_two_gaussians(&hist).map_err(|e| format!("spectrum fit: {e}"))?;
    let genome_size = spectrum::estimate_genome_size(&hist, fit.d_max);
    println!("d_max = {:.6}", fit.d_max);
    println!("sigma_full = {:.6}", fit.sigma_full);
    println!("sigma_half = {:.6}", fit.sigma_half);
    println!("amp_full = {:.6}", fit.amp_full);
    println!("amp_half = {:.6}", fit.amp_half);
    println!("genome_size = {genome_size:.1}");
    println!(
        "het_rate = {:.8}",
        spectrum::estimate_heterozygosity(&fit, a.k, genome_size)
    );
    Ok(())
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<(), String> {
    let seqs = |p: &PathBuf| -> Result<Vec<Vec<u8>>, String> {
        Ok(read_fasta(p)
            .map_err(|e| e.to_string())?
            .into_iter()
            .map(|(_, s)| s)
            .collect())
    };
    let maternal = seqs(&a.maternal)?;
    let paternal = seqs(&a.paternal)?;
    let assembly = seqs(&a.assembly)?;
    if a.marker_len % 2 == 0 {
        return Err("marker-len must be odd".to_string());
    }
    let params = EvalParams {
        m: a.marker_len,
        sample_frac: a.sample_frac,
        min_markers: a.min_markers,
        seed: a.seed,
    };
    let (table, assessment) = evaluate::evaluate(&maternal, &paternal, &assembly, &params);
    print!("{}", evaluate::render_report(&table, &assessment));
    Ok(())
}

fn split_spec<'s, const N: usize>(kind: &str, s: &'s str) -> Result<[&'s str; N], String> {
    let parts: Vec<&str> = s.split(',').collect();
    parts
        .try_into()
        .map_err(|_| format!("--{kind} {s}: expected {N} comma-separated fields"))
}

fn field<T: std::str::FromStr>(kind: &str, name: &str, v: &str) -> Result<T, String> {
    v.parse()
        .map_err(|_| format!("--{kind}: bad {name} '{v}'"))
}

fn cmd_simulate(a: SimulateArgs) -> Result<(), String> {
    let mut repeats = Vec::new();
    for r in &a.repeats {
        let [len, copies, div] = split_spec::<3>("repeat", r)?;
        repeats.push(RepeatSpec {
            unit_len: field("repeat", "LEN", len)?,
            copies: field("repeat", "COPIES", copies)?,
            divergence: field("repeat", "DIV", div)?,
        });
    }
    let mut libs = Vec::new();
    for l in &a.libs {
        let [name, len, mean, sd, cov, err] = split_spec::<6>("lib", l)?;
        libs.push(LibrarySpec {
            name: name.to_string(),
            read_len: field("lib", "READLEN", len)?,
            insert_mean: field("lib", "INSERT_MEAN", mean)?,
            insert_sd: field("lib", "INSERT_SD", sd)?,
            coverage: field("lib", "COVERAGE", cov)?,
            err_rate: field("lib", "ERR_RATE", err)?,
        });
    }

    fs::create_dir_all(&a.out).map_err(|e| format!("{}: {e}", a.out.display()))?;
    let fail = |p: &PathBuf| {
        let p = p.display().to_string();
        move |e: std::io::Error| format!("{p}: {e}")
    };

    let (genome, placements) = sim::generate_genome(&GenomeSpec {
        length: a.length,
        gc: a.gc,
        repeats,
        seed: a.seed,
    });
    let ga = a.out.join("genome_a.fa");
    write_fasta(&ga, [("chr1", genome.as_slice())]).map_err(fail(&ga))?;
    let rt = a.out.join("repeats.truth.tsv");
    let mut w = BufWriter::new(File::create(&rt).map_err(fail(&rt))?);
    sim::write_repeat_truth(&mut w, &placements).map_err(fail(&rt))?;
    w.flush().map_err(fail(&rt))?;

    let diploid = a.snv_rate > 0.0 || a.indel_rate > 0.0;
    let mut haps = vec![vec![genome.clone()]];
    if diploid {
        let (b, variants) = sim::diploidize(
            &genome,
            &DiploidSpec {
                snv_rate: a.snv_rate,
                indel_rate: a.indel_rate,
                max_indel: a.max_indel,
                min_spacing: a.min_spacing,
                seed: a.seed + 1,
            },
        );
        let gb = a.out.join("genome_b.fa");
        write_fasta(&gb, [("chr1", b.as_slice())]).map_err(fail(&gb))?;
        let vt = a.out.join("variants.truth.tsv");
        let mut w = BufWriter::new(File::create(&vt).map_err(fail(&vt))?);
        sim::write_variant_truth(&mut w, &variants).map_err(fail(&vt))?;
        w.flush().map_err(fail(&vt))?;
        haps.push(vec![b]);
    }

    let reads = sim::simulate_reads(&haps, &libs, a.seed + 2);
    for (li, lib) in libs.iter().enumerate() {
        let of: Vec<(PathBuf, usize)> = [1usize, 2].iter().map(|&slot| {
            (a.out.join(format!("{}_{}.fq", lib.name, slot)), slot - 1)
        }).collect();
        for (path, parity) in &of {
            let subset = reads
                .reads
                .iter()
                .enumerate()
                .filter(|(i, _)| i % 2 == *parity && reads.origins[*i].lib == li as u32)
                .map(|(_, r)| r);
            write_fastq(path, subset).map_err(fail(path))?;
        }
    }
    let rt = a.out.join("reads.truth.tsv");
    let mut w = BufWriter::new(File::create(&rt).map_err(fail(&rt))?);
    sim::write_read_truth(&mut w, &reads.reads, &reads.origins).map_err(fail(&rt))?;
    w.flush().map_err(fail(&rt))?;

    // A starter config pointing at everything just written, so
    // `assemble run -c <out>/run.config` works as-is.
    let mut cfg = String::new();
    {
        use std::fmt::Write as _;
        let _ = writeln!(cfg, "k = 31");
        let _ = writeln!(cfg, "diploid = {diploid}");
        let _ = writeln!(cfg, "outdir = {}", a.out.join("run").display());
        let _ = writeln!(cfg, "seed = {}", a.seed);
        for lib in &libs {
            let _ = writeln!(cfg, "\n[library]");
            let _ = writeln!(cfg, "name = {}", lib.name);
            let _ = writeln!(
                cfg,
                "files = {},{}",
                a.out.join(format!("{}_1.fq", lib.name)).display(),
                a.out.join(format!("{}_2.fq", lib.name)).display(),
            );
            let _ = writeln!(cfg, "insert_mean = {}", lib.insert_mean);
            let _ = writeln!(cfg, "insert_sd = {}", lib.insert_sd);
        }
    }
    let cp = a.out.join("run.config");
    fs::write(&cp, cfg).map_err(fail(&cp))?;

    println!("genome: {} bases, {} reads", a.length, reads.reads.len());
    println!("wrote {}", a.out.display());
    Ok(())
}
