//! Numerical direction sets, tangent cones and geometric directional bundles
//! of semialgebraic germs at the origin.

pub mod acceptance;
pub mod conealg;
pub mod dircone;
pub mod error;
pub mod expr;
pub mod gditer;
pub mod linalg;
pub mod oracle;
pub mod report;
pub mod setdesc;
pub mod spatial;
pub mod sampler;
pub mod sphere;

pub use error::{GdError, Result};
