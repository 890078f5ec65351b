//! Temporary diagnostic for the half-peak amplitude bias. Not part of the
//! suite; deleted once the fit is fixed.

use std::collections::HashSet;

use mertig::sim::{diploidize, generate_genome, simulate_reads, DiploidSpec, GenomeSpec, LibrarySpec};
use mertig::spectrum::{estimate_genome_size, estimate_heterozygosity, fit_two_gaussians};
use mertig::ufx::{count_kmers, CountParams};

fn canon_set(seq: &[u8], k: usize) -> HashSet<Vec<u8>> {
    let rc = |w: &[u8]| -> Vec<u8> {
        w.iter()
            .rev()
            .map(|&b| match b {
                b'A' => b'T',
                b'C' => b'G',
                b'G' => b'C',
                _ => b'A',
            })
            .collect()
    };
    let mut out = HashSet::new();
    for p in 0..=seq.len() - k {
        let w = &seq[p..p + k];
        let r = rc(w);
        out.insert(if w <= r.as_slice() { w.to_vec() } else { r });
    }
    out
}

#[test]
fn diagnose_half_peak() {
    let genome_len = 1_000_000usize;
    let (hap_a, _) =
        generate_genome(&GenomeSpec { length: genome_len, gc: 0.5, repeats: vec![], seed: 303 });
    let spec =
        DiploidSpec { snv_rate: 1.0e-3, indel_rate: 0.0, max_indel: 1, min_spacing: 1, seed: 304 };
    let (hap_b, variants) = diploidize(&hap_a, &spec);
    println!("variants planted: {}", variants.len());

    let k = 31;
    let sa = canon_set(&hap_a, k);
    let sb = canon_set(&hap_b, k);
    let het = sa.symmetric_difference(&sb).count();
    println!("true one-haplotype k-mers: {het} (nominal 2k*snv = {})", 62 * variants.len());
    println!("true het rate from truth: {:.4e}", het as f64 / (2.0 * k as f64 * genome_len as f64));

    let lib = LibrarySpec {
        name: "frag".into(),
        read_len: 100,
        insert_mean: 300.0,
        insert_sd: 30.0,
        coverage: 40.0,
        err_rate: 0.0,
    };
    let sim = simulate_reads(&[vec![hap_a], vec![hap_b]], &[lib], 305);
    let (_, hist) = count_kmers(&sim.reads, &CountParams { k, d_min: 2, q_min: 20 });

    let fit = fit_two_gaussians(&hist).unwrap();
    println!(
        "fit: d_max {:.3} sigma_full {:.3} sigma_half {:.3} amp_full {:.0} amp_half {:.0} floor {:.2}",
        fit.d_max, fit.sigma_full, fit.sigma_half, fit.amp_full, fit.amp_half, fit.fit_floor
    );
    let g = estimate_genome_size(&hist, fit.d_max);
    println!("genome size {g:.0}");
    println!("het estimate {:.4e}", estimate_heterozygosity(&fit, k, g));

    // raw counts around both peaks for reference
    for f in 6..=40u32 {
        println!("hist {f}: {}", hist.get(f));
    }
}
