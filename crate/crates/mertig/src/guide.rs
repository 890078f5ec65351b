//! A guided tour of the assembler, structured as a book.
//!
//! Every chapter below is one file of the mdBook under `book/` — rendered
//! there for reading, included here so its code blocks compile and run as
//! doc-tests. `mdbook build book/` produces the browsable version; `cargo
//! test --doc` keeps every snippet honest.

#[doc = include_str!("../../../book/src/index.md")]
pub mod index {}

#[doc = include_str!("../../../book/src/kmers.md")]
pub mod kmers {}

#[doc = include_str!("../../../book/src/contigs.md")]
pub mod contigs {}

#[doc = include_str!("../../../book/src/spectrum.md")]
pub mod spectrum {}

#[doc = include_str!("../../../book/src/diploid.md")]
pub mod diploid {}

#[doc = include_str!("../../../book/src/alignment.md")]
pub mod alignment {}

#[doc = include_str!("../../../book/src/scaffolding.md")]
pub mod scaffolding {}

#[doc = include_str!("../../../book/src/gaps.md")]
pub mod gaps {}

#[doc = include_str!("../../../book/src/evaluation.md")]
pub mod evaluation {}

#[doc = include_str!("../../../book/src/simulation.md")]
pub mod simulation {}

#[doc = include_str!("../../../book/src/pipeline.md")]
pub mod pipeline {}
