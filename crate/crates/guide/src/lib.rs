//! The book's code blocks, run as doctests.
//!
//! mdbook cannot test snippets against crate dependencies, so each chapter
//! is included here as a module doc and `cargo test --doc -p guide` runs
//! every ```rust block. One module per chapter keeps failures attributable.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/spectral.md")]
pub mod spectral {}

#[doc = include_str!("../../../book/src/multifluid.md")]
pub mod multifluid {}

#[doc = include_str!("../../../book/src/fields.md")]
pub mod fields {}

#[doc = include_str!("../../../book/src/oscillators.md")]
pub mod oscillators {}

#[doc = include_str!("../../../book/src/evolution.md")]
pub mod evolution {}

#[doc = include_str!("../../../book/src/filtering.md")]
pub mod filtering {}

#[doc = include_str!("../../../book/src/emhd.md")]
pub mod emhd {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
