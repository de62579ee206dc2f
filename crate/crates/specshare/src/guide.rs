//! The user guide, one chapter per module below.
//!
//! The same markdown renders two ways: as an mdbook (the `book/` directory
//! at the repository root) and as the rustdoc modules here.  Including the
//! chapters with `#[doc = include_str!(..)]` makes every Rust code block a
//! doc-test, so `cargo test` keeps the guide's examples compiling and their
//! assertions true.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/full-csi.md")]
pub mod full_csi_benchmark {}

#[doc = include_str!("../../../book/src/codebook-design.md")]
pub mod codebook_design {}

#[doc = include_str!("../../../book/src/dual-search.md")]
pub mod pricing_the_constraints {}

#[doc = include_str!("../../../book/src/approximate-design.md")]
pub mod fast_approximate_codebooks {}

#[doc = include_str!("../../../book/src/noisy-feedback.md")]
pub mod noisy_feedback {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod command_line_driver {}
