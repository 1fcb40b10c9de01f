//! Safety protection & extension governor for constrained linear systems.
//!
//! Given discrete-time dynamics `x⁺ = Ax + Bu + Ew` with polyhedral state
//! and input constraints and a bounded disturbance, this crate supervises a
//! nominal controller: at every step it minimally adjusts the nominal input
//! so the state can be kept safe indefinitely whenever that is possible
//! (protection), and otherwise maximizes the number of constraint-violation
//! free steps ahead (extension). Both behaviors come out of one strictly
//! convex quadratic program per step whose geometrically weighted slack
//! pattern reveals the attainable safety depth.
//!
//! The crate splits into:
//!
//! * [`polytope`] — H-representation sets, projections, redundancy removal,
//!   containment;
//! * [`qp`] — the dense active-set QP solver and the LP layer on top of it;
//! * [`safesets`] — the offline pipeline producing the k-step sets, the
//!   infinite-step invariant set, and the deduplicated constraint ladder;
//! * [`governor`] — the per-step one-shot QP;
//! * [`oracle`] — the naive series-of-problems reference the governor is
//!   validated against;
//! * [`sim`] — closed-loop simulation and CSV traces;
//! * [`config`] — the TOML problem document;
//! * [`acc`] — a bundled car-following instance with three reference
//!   scenarios.

pub mod acc;
pub mod config;
mod error;
pub mod governor;
pub mod oracle;
pub mod polytope;
pub mod qp;
pub mod safesets;
pub mod sim;
pub mod tol;
mod wire;

pub use config::ProblemConfig;
pub use error::{Error, Result};
pub use governor::{govern, GovernorSolution, PenaltyConfig};
pub use oracle::{solve_series, OracleResult};
pub use polytope::{DisturbanceSet, Polytope};
pub use qp::{QpSolution, QpStatus, QuadraticProgram};
pub use safesets::{ConstraintGroup, GroupDepth, LinearSystem, SafeSetLadder, VirtualFeedback};
pub use sim::{DisturbanceProfile, NominalControl, SimTrace};
pub use tol::Tolerances;
