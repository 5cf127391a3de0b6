//! Pseudo-spectral tools for the scaled relativistic Euler–Maxwell multifluid
//! system on the periodic torus, and for exhibiting its quasineutral limit.
//!
//! The crate evolves a finite family of monokinetic fluid layers coupled to
//! Maxwell's equations in the quasineutral scaling, where the electric field
//! oscillates with frequency O(1/ε). The stiff electromagnetic part is solved
//! exactly per Fourier mode via oscillatory Duhamel propagators, sources are
//! integrated with Filon-type quadrature, and post-processing (time-window
//! filtering, modulation, corrector extraction) compares filtered states
//! against the electron-MHD limit system.
//!
//! The accompanying guide under `book/` walks through each piece with
//! runnable snippets; those snippets double as doctests in the `guide` crate.

pub mod config;
pub mod correctors;
pub mod decomposition;
pub mod diagnostics;
pub mod emhd;
pub mod error;
pub mod evolution;
pub mod export;
pub mod field;
pub mod filtering;
pub mod lattice;
pub mod layers;
pub mod norms;
pub mod oscillatory;
pub mod picard;
pub mod resonance;

pub use error::{Error, Result};
pub use field::{forward_transform, inverse_transform, GridField, Rank, SpectralField};
pub use lattice::Lattice;
pub use norms::{analytic_norm, uniform_analytic_norm, AnalyticNormParams};
