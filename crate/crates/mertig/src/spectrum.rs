//! K-mer frequency spectrum diagnostics.
//!
//! The histogram of how many distinct k-mers occur at each frequency carries
//! the core unknowns of a shotgun data set before any assembly exists: modal
//! depth, genome size, and (for a diploid sample) the heterozygosity rate.
//! Homozygous k-mers pile up in a quasi-normal peak at the modal depth
//! `d_max`; k-mers that straddle a heterozygous site appear on only one
//! haplotype and pile up at `d_max / 2`. Fitting both peaks jointly separates
//! the two populations.
//!
//! Each isolated heterozygous SNV creates k haplotype-specific k-mers on each
//! haplotype, so the half-depth peak area `amp_half` relates to the per-base
//! heterozygosity as `het = amp_half / (2 k G)` for genome size `G`.

use std::collections::BTreeMap;
use std::io::{self, BufRead, Write};

use thiserror::Error;

/// Frequency histogram: distinct k-mer count per occurrence frequency.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KmerHistogram {
    k: usize,
    counts: BTreeMap<u32, u64>,
}

impl KmerHistogram {
    pub fn new(k: usize) -> KmerHistogram {
        KmerHistogram { k, counts: BTreeMap::new() }
    }

    pub fn from_counts(k: usize, freqs: impl IntoIterator<Item = u32>) -> KmerHistogram {
        let mut h = KmerHistogram::new(k);
        for f in freqs {
            h.record(f);
        }
        h
    }

    /// Records one distinct k-mer observed `freq` times.
    pub fn record(&mut self, freq: u32) {
        if freq > 0 {
            *self.counts.entry(freq).or_insert(0) += 1;
        }
    }

    pub fn merge(&mut self, other: &KmerHistogram) {
        assert_eq!(self.k, other.k);
        for (&f, &n) in &other.counts {
            *self.counts.entry(f).or_insert(0) += n;
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, freq: u32) -> u64 {
        self.counts.get(&freq).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, u64)> + '_ {
        self.counts.iter().map(|(&f, &n)| (f, n))
    }

    pub fn max_freq(&self) -> u32 {
        self.counts.keys().next_back().copied().unwrap_or(0)
    }

    /// Number of distinct k-mers.
    pub fn distinct(&self) -> u64 {
        self.counts.values().sum()
    }

    /// Total k-mer observations (sum of freq * count).
    pub fn mass(&self) -> u64 {
        self.counts.iter().map(|(&f, &n)| u64::from(f) * n).sum()
    }

    pub fn write_tsv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "# k={}", self.k)?;
        for (f, n) in self.iter() {
            writeln!(w, "{}\t{}", f, n)?;
        }
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(r: R) -> io::Result<KmerHistogram> {
        let mut k = 0usize;
        let mut counts = BTreeMap::new();
        for line in r.lines() {
            let line = line?;
            if let Some(rest) = line.strip_prefix('#') {
                for field in rest.split_whitespace() {
                    if let Some(v) = field.strip_prefix("k=") {
                        k = v.parse().map_err(|e| {
                            io::Error::new(io::ErrorKind::InvalidData, format!("bad k: {e}"))
                        })?;
                    }
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let mut it = line.split('\t');
            let parse = |s: Option<&str>| -> io::Result<u64> {
                s.unwrap_or("")
                    .trim()
                    .parse()
                    .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("{e}")))
            };
            let f = parse(it.next())? as u32;
            let n = parse(it.next())?;
            counts.insert(f, n);
        }
        Ok(KmerHistogram { k, counts })
    }
}

#[derive(Debug, Error)]
pub enum FitError {
    #[error("histogram has no usable peak above the error floor")]
    NoPeak,
    #[error("fit did not converge")]
    DidNotConverge,
}

/// Result of the two-peak fit: a full-depth normal at `d_max` and a
/// half-depth normal pinned to mean `d_max / 2`.
#[derive(Clone, Copy, Debug)]
pub struct SpectrumFit {
    /// Modal depth of the homozygous peak.
    pub d_max: f64,
    pub sigma_full: f64,
    pub sigma_half: f64,
    /// Area (distinct k-mers) under the full-depth peak.
    pub amp_full: f64,
    /// Area under the half-depth peak.
    pub amp_half: f64,
    /// Frequencies at or below this floor were excluded from the fit.
    pub fit_floor: f64,
}

impl SpectrumFit {
    /// Model value (distinct k-mers) at frequency `x`.
    pub fn model(&self, x: f64) -> f64 {
        self.full_component(x) + self.half_component(x)
    }

    pub fn full_component(&self, x: f64) -> f64 {
        gauss(x, self.d_max, self.sigma_full) * self.amp_full
    }

    pub fn half_component(&self, x: f64) -> f64 {
        gauss(x, self.d_max / 2.0, self.sigma_half) * self.amp_half
    }
}

#[inline]
fn gauss(x: f64, mean: f64, sigma: f64) -> f64 {
    let z = (x - mean) / sigma;
    (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
}

/// Finds the error floor: the lowest frequency that is a local minimum, i.e.
/// where the error-driven low-frequency slope stops falling. Returns the
/// floor and the modal frequency above it.
fn floor_and_mode(hist: &KmerHistogram) -> Option<(u32, u32)> {
    let pts: Vec<(u32, u64)> = hist.iter().collect();
    if pts.len() < 2 {
        return None;
    }
    // A monotone decreasing histogram is all error tail: no peak to fit.
    let floor = pts.windows(2).find(|w| w[0].1 < w[1].1)?[0].0;
    let (mode, _) = pts
        .iter()
        .filter(|&&(f, _)| f >= floor)
        .fold((0u32, 0u64), |best, &(f, n)| if n > best.1 { (f, n) } else { best });
    Some((floor, mode))
}

/// Fits the sum of a full-depth and a mean-constrained half-depth normal to
/// the spectrum, restricted to frequencies above `d_max / 4`.
///
/// Amplitudes are solved linearly for each candidate shape (a variable
/// projection), and the shape parameters `(d_max, sigma_full, sigma_half)`
/// are minimized by Nelder-Mead. Residuals are weighted by inverse observed
/// counts — count variance grows with the count, and an unweighted fit lets
/// the homozygous peak, orders of magnitude taller, trade away the
/// half-depth shoulder for a marginally better fit of its own tails. The
/// fit runs twice: once from the raw modal estimate, then with the
/// exclusion floor recomputed from the fitted depth.
pub fn fit_two_gaussians(hist: &KmerHistogram) -> Result<SpectrumFit, FitError> {
    let (_, mode) = floor_and_mode(hist).ok_or(FitError::NoPeak)?;
    if hist.iter().filter(|&(f, _)| f > mode / 4).count() < 4 {
        return Err(FitError::NoPeak);
    }
    let mut d = f64::from(mode);
    let mut fit = None;
    for _round in 0..2 {
        let floor = d / 4.0;
        let hi = d + 5.0 * d.sqrt().max(2.0);
        let xs: Vec<f64> = ((floor.floor() as u32 + 1)..=(hi.ceil() as u32))
            .map(f64::from)
            .collect();
        if xs.len() < 4 {
            return Err(FitError::NoPeak);
        }
        let ys: Vec<f64> = xs.iter().map(|&x| hist.get(x as u32) as f64).collect();
        let ws: Vec<f64> = ys.iter().map(|&y| 1.0 / y.max(1.0)).collect();
        let sse = |theta: &[f64]| -> (f64, [f64; 4]) {
            let (dm, sf, sh) = (theta[0], theta[1].exp(), theta[2].exp());
            if !(floor < dm && dm < 2.0 * hi) || sf < 0.3 || sh < 0.3 || sf > hi || sh > hi {
                return (f64::INFINITY, [0.0; 4]);
            }
            let b1: Vec<f64> = xs.iter().map(|&x| gauss(x, dm, sf)).collect();
            let b2: Vec<f64> = xs.iter().map(|&x| gauss(x, dm / 2.0, sh)).collect();
            let (a1, a2) = solve_amplitudes(&b1, &b2, &ys, &ws);
            let err: f64 = xs
                .iter()
                .enumerate()
                .map(|(i, _)| {
                    let r = ys[i] - a1 * b1[i] - a2 * b2[i];
                    ws[i] * r * r
                })
                .sum();
            (err, [a1, a2, sf, sh])
        };
        let start = [d, (d.sqrt().max(1.0)).ln(), ((d / 2.0).sqrt().max(1.0)).ln()];
        let theta = nelder_mead(&start, 0.08, 600, |t| sse(t).0);
        let (err, aux) = sse(&theta);
        if !err.is_finite() {
            return Err(FitError::DidNotConverge);
        }
        d = theta[0];
        fit = Some(SpectrumFit {
            d_max: theta[0],
            sigma_full: aux[2],
            sigma_half: aux[3],
            amp_full: aux[0],
            amp_half: aux[1],
            fit_floor: floor,
        });
    }
    Ok(fit.unwrap())
}

/// Least-squares amplitudes for two fixed basis shapes, clamped nonnegative.
fn solve_amplitudes(b1: &[f64], b2: &[f64], y: &[f64]) -> (f64, f64) {
    let dot = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| x * y).sum() };
    let (g11, g12, g22) = (dot(b1, b1), dot(b1, b2), dot(b2, b2));
    let (p1, p2) = (dot(b1, y), dot(b2, y));
    let det = g11 * g22 - g12 * g12;
    let (mut a1, mut a2) = if det.abs() > 1e-30 {
        ((g22 * p1 - g12 * p2) / det, (g11 * p2 - g12 * p1) / det)
    } else {
        (if g11 > 0.0 { p1 / g11 } else { 0.0 }, 0.0)
    };
    if a2 < 0.0 {
        a2 = 0.0;
        a1 = if g11 > 0.0 { (p1 / g11).max(0.0) } else { 0.0 };
    } else if a1 < 0.0 {
        a1 = 0.0;
        a2 = if g22 > 0.0 { (p2 / g22).max(0.0) } else { 0.0 };
    }
    (a1, a2)
}

/// Plain Nelder-Mead over `f` starting from `start`, with the initial simplex
/// scaled by `spread`. Deterministic.
fn nelder_mead(start: &[f64], spread: f64, iters: usize, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let n = start.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((start.to_vec(), f(start)));
    for i in 0..n {
        let mut p = start.to_vec();
        p[i] += if p[i].abs() > 1e-9 { p[i] * spread } else { spread };
        let v = f(&p);
        simplex.push((p, v));
    }
    for _ in 0..iters {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        let best = simplex[0].1;
        let worst = simplex[n].1;
        if worst.is_finite() && (worst - best).abs() <= 1e-12 * (1.0 + best.abs()) {
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|(p, _)| p[j]).sum::<f64>() / n as f64)
            .collect();
        let blend = |a: f64, pts: &Vec<f64>| -> Vec<f64> {
            (0..n).map(|j| centroid[j] + a * (pts[j] - centroid[j])).collect()
        };
        let refl = blend(-1.0, &simplex[n].0);
        let fr = f(&refl);
        if fr < simplex[0].1 {
            let exp = blend(-2.0, &simplex[n].0);
            let fe = f(&exp);
            simplex[n] = if fe < fr { (exp, fe) } else { (refl, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (refl, fr);
        } else {
            let contr = blend(0.5, &simplex[n].0);
            let fc = f(&contr);
            if fc < simplex[n].1 {
                simplex[n] = (contr, fc);
            } else {
                let best_pt = simplex[0].0.clone();
                for s in simplex.iter_mut().skip(1) {
                    let shrunk: Vec<f64> = s.0.iter().zip(&best_pt).map(|(x, b)| b + 0.5 * (x - b)).collect();
                    s.1 = f(&shrunk);
                    s.0 = shrunk;
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    simplex[0].0.clone()
}

/// Genome size from total k-mer mass above the error floor divided by modal
/// depth. Every genomic locus contributes `d_max` observations on average
/// (half-depth loci contribute half as often but exist on both haplotypes),
/// so the division recovers the haploid genome length.
pub fn estimate_genome_size(hist: &KmerHistogram, d_max: f64) -> f64 {
    let floor = d_max / 4.0;
    let mass: f64 = hist
        .iter()
        .filter(|&(f, _)| f64::from(f) > floor)
        .map(|(f, n)| f64::from(f) * n as f64)
        .sum();
    mass / d_max
}

/// Per-base heterozygosity from the half-depth peak area: each isolated
/// variant site yields k haplotype-private k-mers per haplotype.
pub fn estimate_heterozygosity(fit: &SpectrumFit, k: usize, genome_size: f64) -> f64 {
    fit.amp_half / (2.0 * k as f64 * genome_size)
}

/// Fraction of above-floor distinct k-mers with frequency at most
/// `ratio * d_max`. `ratio` must exceed 0.25, the exclusion floor.
pub fn cumulative_unique_fraction(hist: &KmerHistogram, d_max: f64, ratio: f64) -> f64 {
    assert!(ratio > 0.25, "ratio must lie above the d_max/4 floor");
    let floor = d_max / 4.0;
    let cut = ratio * d_max;
    let (mut below, mut all) = (0u64, 0u64);
    for (f, n) in hist.iter() {
        let x = f64::from(f);
        if x > floor {
            all += n;
            if x <= cut {
                below += n;
            }
        }
    }
    if all == 0 {
        0.0
    } else {
        below as f64 / all as f64
    }
}

/// Expected modal k-mer depth for `n_reads` reads of length `read_len` over a
/// genome of `genome_size` bases.
pub fn nominal_depth(n_reads: u64, read_len: usize, k: usize, genome_size: u64) -> f64 {
    n_reads as f64 * (read_len - k + 1) as f64 / genome_size as f64
}

/// Writes the three plot-ready panels: the raw spectrum, the fitted model
/// with its components, and the cumulative distinct fraction against depth
/// scaled by `d_max`.
pub fn write_plot_data<W: Write>(
    hist: &KmerHistogram,
    fit: &SpectrumFit,
    mut spectrum: W,
    mut model: W,
    mut cumulative: W,
) -> io::Result<()> {
    writeln!(spectrum, "freq\tdistinct")?;
    for (f, n) in hist.iter() {
        writeln!(spectrum, "{}\t{}", f, n)?;
    }
    writeln!(model, "freq\tmodel\tfull\thalf")?;
    let hi = (fit.d_max + 5.0 * fit.sigma_full).ceil() as u32;
    for f in 1..=hi.max(1) {
        let x = f64::from(f);
        writeln!(
            model,
            "{}\t{:.3}\t{:.3}\t{:.3}",
            f,
            fit.model(x),
            fit.full_component(x),
            fit.half_component(x)
        )?;
    }
    writeln!(cumulative, "scaled_depth\tcumulative_fraction")?;
    let total: u64 = hist
        .iter()
        .filter(|&(f, _)| f64::from(f) > fit.d_max / 4.0)
        .map(|(_, n)| n)
        .sum();
    let mut acc = 0u64;
    for (f, n) in hist.iter() {
        if f64::from(f) <= fit.d_max / 4.0 {
            continue;
        }
        acc += n;
        writeln!(
            cumulative,
            "{:.4}\t{:.6}",
            f64::from(f) / fit.d_max,
            acc as f64 / total.max(1) as f64
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_records_and_merges() {
        let mut h = KmerHistogram::from_counts(21, [1, 1, 2, 3, 3, 3]);
        assert_eq!(h.get(1), 2);
        assert_eq!(h.get(2), 1);
        assert_eq!(h.get(3), 3);
        assert_eq!(h.distinct(), 6);
        assert_eq!(h.mass(), 1 + 1 + 2 + 3 + 3 + 3);
        let other = KmerHistogram::from_counts(21, [3, 9]);
        h.merge(&other);
        assert_eq!(h.get(3), 4);
        assert_eq!(h.get(9), 1);
        assert_eq!(h.max_freq(), 9);
    }

    #[test]
    fn histogram_tsv_round_trip() {
        let h = KmerHistogram::from_counts(31, [1, 5, 5, 40, 40, 40]);
        let mut buf = Vec::new();
        h.write_tsv(&mut buf).unwrap();
        let back = KmerHistogram::read_tsv(io::Cursor::new(buf)).unwrap();
        assert_eq!(back, h);
    }

    /// Builds a histogram by evaluating the two-normal model at integer
    /// frequencies and rounding, the reverse direction of the fit.
    fn synthetic(d: f64, sf: f64, sh: f64, a_full: f64, a_half: f64, hi: u32) -> KmerHistogram {
        let mut h = KmerHistogram::new(31);
        for f in 1..=hi {
            let x = f64::from(f);
            let y = (a_full * gauss(x, d, sf) + a_half * gauss(x, d / 2.0, sh)).round() as u64;
            if y > 0 {
                h.counts.insert(f, y);
            }
        }
        h
    }

    #[test]
    fn fit_recovers_synthetic_two_peak_mixture() {
        let hist = synthetic(60.0, 6.0, 4.5, 1.0e6, 5.0e4, 120);
        let fit = fit_two_gaussians(&hist).unwrap();
        assert!((fit.d_max - 60.0).abs() / 60.0 < 0.01, "d_max {}", fit.d_max);
        assert!((fit.amp_full - 1.0e6).abs() / 1.0e6 < 0.02, "amp_full {}", fit.amp_full);
        assert!((fit.amp_half - 5.0e4).abs() / 5.0e4 < 0.02, "amp_half {}", fit.amp_half);
        // Residual stays below 1% of the peak height.
        let peak = fit.model(fit.d_max);
        for f in 20..=90u32 {
            let r = (fit.model(f64::from(f)) - hist.get(f) as f64).abs();
            assert!(r < 0.01 * peak, "residual {r} at {f}");
        }
    }

    #[test]
    fn fit_on_haploid_spectrum_leaves_half_peak_empty() {
        let hist = synthetic(40.0, 5.0, 3.0, 8.0e5, 0.0, 90);
        let fit = fit_two_gaussians(&hist).unwrap();
        assert!((fit.d_max - 40.0).abs() / 40.0 < 0.01);
        assert!(fit.amp_half / fit.amp_full < 0.02, "spurious half peak {}", fit.amp_half);
    }

    #[test]
    fn fit_rejects_peakless_histogram() {
        // Strictly decreasing: pure error tail, nothing to fit.
        let mut h = KmerHistogram::new(31);
        for f in 1..=10u32 {
            h.counts.insert(f, 1000 / u64::from(f * f));
        }
        assert!(matches!(fit_two_gaussians(&h), Err(FitError::NoPeak)));
        assert!(matches!(fit_two_gaussians(&KmerHistogram::new(31)), Err(FitError::NoPeak)));
    }

    #[test]
    fn genome_size_recovers_constructed_mass() {
        // G distinct k-mers all at depth 50, plus error noise below floor.
        let mut h = KmerHistogram::new(31);
        h.counts.insert(1, 500_000);
        h.counts.insert(50, 1_000_000);
        let g = estimate_genome_size(&h, 50.0);
        assert!((g - 1_000_000.0).abs() < 1.0);
    }

    #[test]
    fn heterozygosity_formula() {
        let fit = SpectrumFit {
            d_max: 42.0,
            sigma_full: 5.0,
            sigma_half: 4.0,
            amp_full: 1e6,
            amp_half: 62_000.0,
            fit_floor: 10.5,
        };
        let het = estimate_heterozygosity(&fit, 31, 1.0e6);
        assert!((het - 1.0e-3).abs() < 1e-9);
    }

    #[test]
    fn cumulative_fraction_monotone_and_bounded() {
        let hist = synthetic(60.0, 6.0, 4.5, 1.0e6, 5.0e4, 120);
        let mut prev = 0.0;
        for i in 1..=20 {
            let ratio = 0.26 + 0.1 * f64::from(i);
            let v = cumulative_unique_fraction(&hist, 60.0, ratio);
            assert!((0.0..=1.0).contains(&v));
            assert!(v >= prev);
            prev = v;
        }
        assert!(cumulative_unique_fraction(&hist, 60.0, 2.1) > 0.999);
    }

    #[test]
    fn nominal_depth_formula() {
        // 30x read coverage at L=100, k=31 leaves 70% of windows per read.
        let d = nominal_depth(30_000, 100, 31, 100_000);
        assert!((d - 21.0).abs() < 1e-9);
    }
}
