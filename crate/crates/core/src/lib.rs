//! Information-theoretic cardinality bounds for conjunctive queries under
//! degree constraints, with proof sequences for simple constraints.

pub mod dual_lift;
pub mod error;
pub mod flow;
pub mod flow_bound;
pub mod lp;
pub mod model;
pub mod oracle;
pub mod proof;
pub mod random;
pub mod reductions;
pub mod rational;

pub use error::{Error, Result};
pub use model::{classify, topological_permutation, Classification, DegreeConstraint, Instance, VarSet};
pub use rational::{ExtRational, Rational};
