//! Brown measure of x + i y where x has a given compactly supported
//! distribution and y is free Poisson, freely independent of x.
//!
//! The crate computes, for a rate p and an input measure:
//!
//! - the parameter domain where the regularized subordination map admits a
//!   positive boundary value delta_0, and its boundary curve;
//! - the image set (the support of the Brown measure) and its boundary;
//! - the density of the Brown measure on the image, by inverting the map
//!   h and assembling the density from its Jacobian;
//! - finite random matrix counterparts for Monte Carlo comparison.
//!
//! Everything is checked against one exactly solvable model (the symmetric
//! two-point input at rate 1) in `oracle`.

pub mod boundary;
pub mod config;
pub mod density;
pub mod domain;
pub mod error;
pub mod export;
pub mod hmap;
pub mod measure;
pub mod oracle;
pub mod quad;
pub mod rmt;

// Guide chapters double as doc-tests so their snippets track the API.
#[cfg(doctest)]
mod book {
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            mod $name {}
        };
    }
    chapter!(overview, "../../../book/src/overview.md");
    chapter!(measures, "../../../book/src/measures.md");
    chapter!(map, "../../../book/src/map.md");
    chapter!(boundaries, "../../../book/src/boundaries.md");
    chapter!(density, "../../../book/src/density.md");
    chapter!(solvable, "../../../book/src/solvable.md");
    chapter!(montecarlo, "../../../book/src/montecarlo.md");
    chapter!(cli, "../../../book/src/cli.md");
}

pub use boundary::BoundaryTrace;
pub use config::{Tolerances, Window};
pub use density::{DensityGrid, DensityPoint, Preimage};
pub use error::{Error, Result};
pub use hmap::{FreeSum, HHat, Jacobian3};
pub use measure::{SpectralMeasure, StdIntegrals, StdPartials};
pub use rmt::{DensityReport, EigenCloud, MatrixModel};
