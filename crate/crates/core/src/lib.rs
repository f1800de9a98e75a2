//! Numerical laboratory for horizontal rigidity of surfaces `z = f(x, y)`:
//! whether graph(f(c·)) is isometric to graph(f) for the scales `c` tested.
//!
//! - [`expr`]: expression language for the fields.
//! - [`sphere`]: unit vectors, the ψ_c map, rigid isometries.
//! - [`directions`]: chord direction sets, their arc profile, Cases A–D.
//! - [`funceq`]: the scale–shift functional equation and its solutions.
//! - [`rigidity`]: isometry search, obstructions, verdicts.
//! - [`report`]: command implementations behind the `hrigid` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod directions;
pub mod expr;
pub mod funceq;
pub mod numeric;
pub mod report;
pub mod rigidity;
pub mod spatial;
pub mod sphere;

pub use expr::{Arity, ScalarField};
pub use sphere::{psi, RigidIsometry, UnitVec3};
