//! Utility-optimized Bayesian hierarchical models for basket trials.

pub mod designs;
pub mod error;
pub mod inference;
pub mod model;
pub mod optimizer;
pub mod partition;
pub mod seed;
pub mod simulator;
pub mod utility;

pub use error::{Error, Result};

#[cfg(test)]
pub(crate) mod testutil {
    use crate::model::{ArmSpec, TrialSpec};

    pub(crate) fn four_arm() -> TrialSpec {
        let arm = |p0, p1| ArmSpec::new(p0, p1, 20, vec![10, 20]).unwrap();
        TrialSpec::new(vec![
            arm(0.05, 0.20),
            arm(0.05, 0.20),
            arm(0.05, 0.20),
            arm(0.15, 0.30),
        ])
        .unwrap()
    }
}
