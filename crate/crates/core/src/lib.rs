//! Mean curvature flow with surgery for quadratically pinched hypersurfaces of
//! spheres, computed in the SO(n)-invariant reduction.

pub mod exact;
pub mod geometry;
pub mod oracle;
pub mod profile;
pub mod curvature;
pub mod flow;
pub mod inscribed;
pub mod estimates;
pub mod poincare;
pub mod surgery;
pub mod config;
pub mod controller;
pub mod report;

pub use exact::{ProductSphereState, Trajectory};
pub use geometry::{DerivedConstants, FlowParams, PrincipalCurvatures};
