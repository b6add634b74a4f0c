//! Gaussian and discrete noise stability.
//!
//! - [`gaussian`]: densities, the Mehler kernel, the Ornstein–Uhlenbeck
//!   operator, regions, partitions and their noise stability.
//! - [`voting`]: voting rules on `{1..m}^n`, the corruption channel, exact and
//!   Monte Carlo discrete stability, influences.
//! - [`partition`]: volume-constrained optimization over grid assignments,
//!   interface meshes and variational checks.

pub mod error;
pub mod gaussian;
pub mod mc;
pub mod par;
pub mod partition;
pub mod special;
pub mod voting;

pub use error::{Error, Result};
pub use gaussian::{Correlation, SimplexVector};
