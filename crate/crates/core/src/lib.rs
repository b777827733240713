//! Exact homotopic-distance invariants of finite T0 spaces.
//!
//! * [`finspace`]: finite spaces as posets, maps, homotopy via fences, cores.
//! * [`distance`]: the higher homotopic distance `D(f_1, ..., f_m)` with witness covers.
//! * [`invariants`]: LS-category and the topological complexity family built on `D`.
//! * [`ledger`]: interval propagation over known inequalities between these invariants.
//! * [`conformance`]: randomized checking of the distance inequalities on finite models.

pub mod conformance;
pub mod distance;
pub mod finspace;
pub mod invariants;
pub mod ledger;
