//! Numerical skew-product semiflows for state-dependent delay equations
//! driven by torus flows: nonlinear and variational integration, upper
//! Lyapunov exponents in the sup and Lipschitz norms, and stability, cover
//! and basin diagnostics built on them.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod driving;
pub mod error;
pub mod expr;
pub mod lyapunov;
pub mod presets;
pub mod sdde;
pub mod segment;
pub mod variational;

pub use driving::{phase_distance, Phase, TorusFlow};
pub use error::{Error, Result};
pub use sdde::{SddeModel, StepControl, Trajectory};
pub use segment::{History, Segment, Side};
