//! mertig assembles short paired-end reads into scaffolds, staying aware of
//! the two haplotypes of a diploid sample the whole way through.
//!
//! The pipeline runs in stages over a k-mer extension graph:
//!
//! 1. count canonical k-mers and tally high-quality single-base extensions
//!    ([`ufx`]), with spectrum diagnostics for depth, genome size, and
//!    heterozygosity ([`spectrum`]);
//! 2. walk unambiguous extensions into contigs, then fold heterozygous
//!    bubbles into diplotigs ([`bubble`]);
//! 3. map reads back by their guaranteed-unique seed k-mers ([`align`]),
//!    order and orient sequences into scaffolds ([`scaffold`]), and close the
//!    gaps between them ([`gapclose`]).
//!
//! [`evaluate`] scores an assembly against trusted haplotype references with
//! long marker k-mers, and [`sim`] generates the synthetic genomes, diploid
//! variants, and paired reads used across the test suites. [`pipeline`] wires
//! the stages together behind the `assemble` binary.

pub mod align;
pub mod bubble;
pub mod config;
pub mod evaluate;
pub mod fastx;
pub mod gapclose;
pub mod guide;
pub mod kmer;
pub mod pipeline;
pub mod scaffold;
pub mod sim;
pub mod spectrum;
pub mod ufx;
