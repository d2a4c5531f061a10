//! Numerical analysis of linear time-varying systems
//!
//! ```text
//! x'(t) = A(t) x(t) + B(t) u(t)
//! y(t)  = C(t) x(t)
//! ```
//!
//! Matrix entries are expressions in `t` (see [`expr`]). On top of an adaptive
//! transition-matrix integrator the crate computes the four Gramians, fits
//! exponential envelopes to `‖Φ(t,s)‖`, classifies observability and
//! controllability on finite windows with tri-valued verdicts, and checks the
//! bounds of the non-uniform observability/controllability theory on
//! concrete systems.

pub mod catalog;
pub mod classify;
pub mod cli;
pub mod envelope;
pub mod error;
pub mod expr;
pub mod gramian;
pub mod grid;
pub mod integrate;
pub mod linalg;
pub mod matrix;
pub mod report;
pub mod system;
pub mod transforms;
pub mod transition;
pub mod verify;

pub use error::{Error, Result};
pub use expr::{parse_expr, TimeExpr};
pub use matrix::ExprMatrix;
pub use system::LtvSystem;
pub use transition::{IntegratorSettings, TransitionEvaluator};
