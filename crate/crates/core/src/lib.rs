//! Randomized projections onto the PSD cone and their use in first-order
//! dual methods for semidefinite least squares and SOS relaxations.

pub mod bounds;
pub mod error;
pub mod experiments;
pub mod io;
pub mod projection;
pub mod sdls;
pub mod sketch;
pub mod sos;
pub mod symcore;

pub use error::{Error, Result};
pub use projection::{project, ran_proj, ran_proj_scal, Method, ProjectionReport, ProjectorConfig};
pub use sketch::{min_eig_magnitude, power_iteration, range_finder, OrthoBasis, RangeParams};
pub use symcore::{eigh, exact_psd_projection, polar_psd_projection, Norm, RngStream, SymMatrix};
