//! Weighted sums of squared (possibly shifted) standard normals:
//! densities, distribution functions, the density maximum, and two-sided
//! bounds on it, with Monte Carlo verification utilities.

pub mod bounds;
pub mod charfn;
pub mod density;
pub mod error;
mod inversion;
mod linalg;
pub mod oracle;
mod quad;
pub mod spectrum;
pub mod sweep;

pub use bounds::{build_report, BoundEntry, BoundKind, BoundReport, Verdict};
pub use density::{cdf_point, density_max, pdf_point, profile, DensityMax, EvalConfig, ProfilePoint};
pub use error::{Error, Result};
pub use oracle::{empirical_max, ks_check, sample, MCEstimate};
pub use spectrum::{decompose_gaussian, derived_stats, DerivedStats, Spectrum};
pub use sweep::{flatten_to_dominance, run_reports, ShiftLaw, SweepConstraint, SweepSpec, WeightLaw};
