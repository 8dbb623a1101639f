//! Color measurement and group-based color difference testing.
//!
//! The crate is organized as a small pipeline:
//!
//! * [`colorimetry`] — sampled spectra, tristimulus integration against the
//!   CIE 1931 observer, and XYZ ↔ sRGB conversion (fixed 3×3 matrix plus the
//!   piecewise gamma transfer function).
//! * [`perceptual`] — the multiplicative group model of perceived colors:
//!   the componentwise `-ln` map from the open unit cube onto `(R+)^3`, the
//!   induced group structure, cone activation coefficients, and metamerism.
//! * [`mvstat`] — two-sample Hotelling T² statistics with F-based p-values
//!   and pairwise test matrices over labeled groups of 3-vectors.
//! * [`ingest`] — reduction of photographs to per-channel mean colors,
//!   grouped by directory, with CSV persistence.
//!
//! The `chromastat` binary exposes the pipeline on the command line.

pub mod colorimetry;
pub mod ingest;
pub mod mvstat;
pub mod perceptual;
pub mod quad;
