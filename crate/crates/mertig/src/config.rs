//! Run configuration: a plain-text key=value file with one `[library]`
//! section per read library.
//!
//! Global keys come first; each `[library]` header opens a new library
//! block. Full-line `#` comments and blank lines are ignored. Parsing
//! fills documented defaults and rejects unknown or misplaced keys;
//! validation checks the semantic rules (odd k, existing files,
//! contiguous scaffolding tiers) and reports every problem with the
//! field it belongs to. The canonical rendering of a resolved config is
//! also its identity: the run digest hashes that text, nothing else.

use std::fmt;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::kmer::MAX_K;

/// One read library: its files, insert geometry, and scaffolding role.
#[derive(Clone, Debug, PartialEq)]
pub struct LibraryConfig {
    pub name: String,
    /// Two files zip mates by record index; one file interleaves them.
    pub files: Vec<PathBuf>,
    pub insert_mean: f64,
    pub insert_sd: f64,
    /// Scaffolding round this library joins; rounds run 1, 2, ….
    pub tier: u32,
    /// Mate-pair (jump) library rather than a short fragment library.
    pub matepair: bool,
    /// Whether the library's reads feed k-mer counting. Fragment
    /// libraries count; mate-pairs default out.
    pub count: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub k: usize,
    /// Minimum count for a k-mer to survive error filtering.
    pub d_min: u32,
    /// Minimum base quality for a k-mer's extension to tally.
    pub q_min: u8,
    pub diploid: bool,
    pub libraries: Vec<LibraryConfig>,
    /// Link-support thresholds swept during scaffolding; best N50 wins.
    pub min_support: Vec<u32>,
    /// Smallest run of Ns an unclosed gap keeps.
    pub min_gap_ns: usize,
    /// Depth multiple over which a contig end counts as repeat.
    pub repeat_copy_count: f64,
    /// Accept gap closures outside the 3·sd size window.
    pub aggressive: bool,
    pub outdir: PathBuf,
    pub seed: u64,
    /// Worker threads; 0 takes every core.
    pub workers: usize,
}

/// Everything wrong with a config, one message per field.
#[derive(Debug)]
pub struct ConfigError {
    pub errors: Vec<String>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.errors.join("\n"))
    }
}

impl std::error::Error for ConfigError {}

fn fail(errors: Vec<String>) -> ConfigError {
    ConfigError { errors }
}

const GLOBAL_KEYS: &[&str] = &[
    "k",
    "d_min",
    "q_min",
    "diploid",
    "min_support",
    "min_gap_ns",
    "repeat_copy_count",
    "aggressive",
    "outdir",
    "seed",
    "workers",
];
const LIBRARY_KEYS: &[&str] = &[
    "name",
    "files",
    "insert_mean",
    "insert_sd",
    "tier",
    "role",
    "count",
];

#[derive(Default)]
struct LibraryDraft {
    name: Option<String>,
    files: Option<Vec<PathBuf>>,
    insert_mean: Option<f64>,
    insert_sd: Option<f64>,
    tier: Option<u32>,
    matepair: Option<bool>,
    count: Option<bool>,
}

fn parse_bool(key: &str, v: &str, errors: &mut Vec<String>) -> bool {
    match v {
        "true" => true,
        "false" => false,
        _ => {
            errors.push(format!("{key}: expected true or false, got '{v}'"));
            false
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str, errors: &mut Vec<String>) -> Option<T> {
    match v.parse() {
        Ok(x) => Some(x),
        Err(_) => {
            errors.push(format!("{key}: cannot parse '{v}'"));
            None
        }
    }
}

impl RunConfig {
    /// Parses config text, filling defaults. Syntax problems, unknown or
    /// misplaced keys, and missing required fields all come back at once.
    pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        let mut errors: Vec<String> = Vec::new();
        let mut seen: Vec<String> = Vec::new();

        let mut k: Option<usize> = None;
        let mut d_min: Option<u32> = None;
        let mut q_min: Option<u8> = None;
        let mut diploid = false;
        let mut min_support: Option<Vec<u32>> = None;
        let mut min_gap_ns: Option<usize> = None;
        let mut repeat_copy_count: Option<f64> = None;
        let mut aggressive = false;
        let mut outdir: Option<PathBuf> = None;
        let mut seed: u64 = 0;
        let mut workers: usize = 0;
        let mut drafts: Vec<LibraryDraft> = Vec::new();

        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(section) = line.strip_prefix('[') {
                match section.strip_suffix(']') {
                    Some("library") => drafts.push(LibraryDraft::default()),
                    _ => errors.push(format!("line {}: unknown section '{line}'", n + 1)),
                }
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                errors.push(format!("line {}: expected key = value, got '{line}'", n + 1));
                continue;
            };
            let (key, value) = (key.trim(), value.trim());
            let scope = match drafts.last_mut() {
                Some(_) if LIBRARY_KEYS.contains(&key) => "library",
                None if GLOBAL_KEYS.contains(&key) => "global",
                _ if GLOBAL_KEYS.contains(&key) => {
                    errors.push(format!(
                        "line {}: {key} is a global key; it must come before any [library]",
                        n + 1
                    ));
                    continue;
                }
                _ if LIBRARY_KEYS.contains(&key) => {
                    errors.push(format!(
                        "line {}: {key} belongs inside a [library] section",
                        n + 1
                    ));
                    continue;
                }
                _ => {
                    errors.push(format!("line {}: unknown key '{key}'", n + 1));
                    continue;
                }
            };
            let slot = match scope {
                "global" => key.to_string(),
                _ => format!("library{}.{key}", drafts.len()),
            };
            if seen.contains(&slot) {
                errors.push(format!("line {}: duplicate key '{key}'", n + 1));
                continue;
            }
            seen.push(slot);

            if scope == "global" {
                match key {
                    "k" => k = parse_num(key, value, &mut errors),
                    "d_min" => d_min = parse_num(key, value, &mut errors),
                    "q_min" => q_min = parse_num(key, value, &mut errors),
                    "diploid" => diploid = parse_bool(key, value, &mut errors),
                    "min_support" => {
                        let mut list: Vec<u32> = Vec::new();
                        for part in value.split(',') {
                            if let Some(x) = parse_num(key, part.trim(), &mut errors) {
                                list.push(x);
                            }
                        }
                        list.sort_unstable();
                        list.dedup();
                        min_support = Some(list);
                    }
                    "min_gap_ns" => min_gap_ns = parse_num(key, value, &mut errors),
                    "repeat_copy_count" => repeat_copy_count = parse_num(key, value, &mut errors),
                    "aggressive" => aggressive = parse_bool(key, value, &mut errors),
                    "outdir" => outdir = Some(PathBuf::from(value)),
                    "seed" => seed = parse_num(key, value, &mut errors).unwrap_or(0),
                    "workers" => workers = parse_num(key, value, &mut errors).unwrap_or(0),
                    _ => unreachable!(),
                }
                continue;
            }
            let lib_index = drafts.len();
            let draft = drafts.last_mut().unwrap();
            match key {
                "name" => draft.name = Some(value.to_string()),
                "files" => {
                    let files: Vec<PathBuf> =
                        value.split(',').map(|p| PathBuf::from(p.trim())).collect();
                    if files.len() > 2 || files.iter().any(|p| p.as_os_str().is_empty()) {
                        errors.push(format!(
                            "library{lib_index}.files: expected one interleaved or two mate files"
                        ));
                    } else {
                        draft.files = Some(files);
                    }
                }
                "insert_mean" => draft.insert_mean = parse_num(key, value, &mut errors),
                "insert_sd" => draft.insert_sd = parse_num(key, value, &mut errors),
                "tier" => draft.tier = parse_num(key, value, &mut errors),
                "role" => match value {
                    "fragment" => draft.matepair = Some(false),
                    "matepair" => draft.matepair = Some(true),
                    _ => errors.push(format!(
                        "library{lib_index}.role: expected fragment or matepair, got '{value}'"
                    )),
                },
                "count" => draft.count = Some(parse_bool(key, value, &mut errors)),
                _ => unreachable!(),
            }
        }

        let mut libraries = Vec::with_capacity(drafts.len());
        for (i, d) in drafts.into_iter().enumerate() {
            let matepair = d.matepair.unwrap_or(false);
            let mut need = |field: &str| {
                errors.push(format!("library{}.{field}: required", i + 1));
            };
            if d.files.is_none() {
                need("files");
            }
            if d.insert_mean.is_none() {
                need("insert_mean");
            }
            if d.insert_sd.is_none() {
                need("insert_sd");
            }
            libraries.push(LibraryConfig {
                name: d.name.unwrap_or_else(|| format!("lib{}", i + 1)),
                files: d.files.unwrap_or_default(),
                insert_mean: d.insert_mean.unwrap_or(0.0),
                insert_sd: d.insert_sd.unwrap_or(0.0),
                tier: d.tier.unwrap_or(1),
                matepair,
                count: d.count.unwrap_or(!matepair),
            });
        }
        if k.is_none() {
            errors.push("k: required".into());
        }
        if outdir.is_none() {
            errors.push("outdir: required".into());
        }
        if !errors.is_empty() {
            return Err(fail(errors));
        }
        Ok(RunConfig {
            k: k.unwrap(),
            d_min: d_min.unwrap_or(2),
            q_min: q_min.unwrap_or(20),
            diploid,
            libraries,
            min_support: min_support.unwrap_or_else(|| (2..=10).collect()),
            min_gap_ns: min_gap_ns.unwrap_or(10),
            repeat_copy_count: repeat_copy_count.unwrap_or(2.0),
            aggressive,
            outdir: outdir.unwrap(),
            seed,
            workers,
        })
    }

    /// Reads, parses, and validates a config file. Warnings ride along on
    /// success.
    pub fn load(path: impl AsRef<Path>) -> Result<(RunConfig, Vec<String>), ConfigError> {
        let text = std::fs::read_to_string(&path)
            .map_err(|e| fail(vec![format!("{}: {e}", path.as_ref().display())]))?;
        let cfg = RunConfig::parse(&text)?;
        let warnings = validate_config(&cfg)?;
        Ok((cfg, warnings))
    }

    /// Canonical rendering: fixed key order, defaults spelled out. Parsing
    /// it back reproduces the config. `with_env` adds `outdir` and
    /// `workers`; the digest leaves them out because where a run lands and
    /// how many threads drive it must not change what it computes.
    fn render(&self, with_env: bool) -> String {
        use std::fmt::Write as _;
        let mut s = String::new();
        let _ = writeln!(s, "k = {}", self.k);
        let _ = writeln!(s, "d_min = {}", self.d_min);
        let _ = writeln!(s, "q_min = {}", self.q_min);
        let _ = writeln!(s, "diploid = {}", self.diploid);
        let support: Vec<String> = self.min_support.iter().map(|x| x.to_string()).collect();
        let _ = writeln!(s, "min_support = {}", support.join(","));
        let _ = writeln!(s, "min_gap_ns = {}", self.min_gap_ns);
        let _ = writeln!(s, "repeat_copy_count = {}", self.repeat_copy_count);
        let _ = writeln!(s, "aggressive = {}", self.aggressive);
        if with_env {
            let _ = writeln!(s, "outdir = {}", self.outdir.display());
        }
        let _ = writeln!(s, "seed = {}", self.seed);
        if with_env {
            let _ = writeln!(s, "workers = {}", self.workers);
        }
        for lib in &self.libraries {
            let files: Vec<String> = lib.files.iter().map(|p| p.display().to_string()).collect();
            let _ = writeln!(s, "\n[library]");
            let _ = writeln!(s, "name = {}", lib.name);
            let _ = writeln!(s, "files = {}", files.join(","));
            let _ = writeln!(s, "insert_mean = {}", lib.insert_mean);
            let _ = writeln!(s, "insert_sd = {}", lib.insert_sd);
            let _ = writeln!(s, "tier = {}", lib.tier);
            let _ = writeln!(
                s,
                "role = {}",
                if lib.matepair { "matepair" } else { "fragment" }
            );
            let _ = writeln!(s, "count = {}", lib.count);
        }
        s
    }

    /// Canonical rendering of the whole config; parsing it back reproduces
    /// the config.
    pub fn to_text(&self) -> String {
        self.render(true)
    }

    /// Hex SHA-256 of the result-determining settings — the identity
    /// stamped into every stage output header.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.render(false).as_bytes());
        let out = h.finalize();
        let mut hex = String::with_capacity(64);
        for b in out {
            use std::fmt::Write as _;
            let _ = write!(hex, "{b:02x}");
        }
        hex
    }
}

/// Semantic checks over a parsed config. Ok carries warnings; Err lists
/// every violated rule with its field.
pub fn validate_config(cfg: &RunConfig) -> Result<Vec<String>, ConfigError> {
    let mut errors = Vec::new();
    let mut warnings = Vec::new();
    if cfg.k % 2 == 0 {
        errors.push("k must be odd".to_string());
    }
    if cfg.k < 3 || cfg.k > MAX_K {
        errors.push(format!("k: must be in 3..={MAX_K}, got {}", cfg.k));
    }
    if cfg.d_min == 0 {
        errors.push("d_min: must be at least 1".into());
    }
    if cfg.libraries.is_empty() {
        errors.push("libraries: at least one [library] section required".into());
    }
    if cfg.min_support.is_empty() {
        errors.push("min_support: at least one threshold required".into());
    }
    if cfg.repeat_copy_count <= 0.0 {
        errors.push("repeat_copy_count: must be positive".into());
    }
    if !cfg.libraries.iter().any(|l| l.count) {
        errors.push("libraries: no library is marked for counting".into());
    }
    let mut tiers: Vec<u32> = cfg.libraries.iter().map(|l| l.tier).collect();
    tiers.sort_unstable();
    tiers.dedup();
    for (i, &t) in tiers.iter().enumerate() {
        let want = i as u32 + 1;
        if t != want {
            errors.push(format!("library tiers skip {want}: tiers must run 1, 2, …"));
            break;
        }
    }
    for lib in &cfg.libraries {
        for f in &lib.files {
            if !f.exists() {
                errors.push(format!("library {}: missing file {}", lib.name, f.display()));
            }
        }
        if lib.insert_mean <= 0.0 {
            errors.push(format!("library {}: insert_mean must be positive", lib.name));
        }
        if lib.insert_sd < 0.0 {
            errors.push(format!(
                "library {}: insert_sd must be non-negative",
                lib.name
            ));
        }
        if lib.matepair && lib.count {
            warnings.push(format!(
                "library {}: mate-pair library marked for counting; only fragment libraries usually count",
                lib.name
            ));
        }
    }
    if errors.is_empty() {
        Ok(warnings)
    } else {
        Err(fail(errors))
    }
}
