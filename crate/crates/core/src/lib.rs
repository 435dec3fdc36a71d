//! Invariant submanifolds of affine control systems `x' = f + sum_j g_j u_j`:
//! derived flags of the annihilating Pfaffian system, first integrals and
//! generalized first integrals from torsion, and numeric verification.

pub mod cli;
pub mod dsl;
pub mod flag;
pub mod forms;
pub mod integrals;
pub mod kernel;
pub mod linalg;
pub mod numeric;
pub mod report;
