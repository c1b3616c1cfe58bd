//! Shared fixtures for the benchmarks.

use lienard_core::bifurcate::{staircase_assignment, staircase_system, StaircaseShape};
use lienard_core::integrate::{Anchor, Section};
use lienard_core::polysys::Instance;

/// Two-cycle staircase around the origin with its section `(0, 10)`.
pub fn staircase_k2() -> (Instance, Section) {
    let sys = staircase_system(2, StaircaseShape::Canonical).expect("fixed system");
    let inst = Instance::new(&sys, &staircase_assignment(2, 10.0, 1.0, -1.0)).expect("complete assignment");
    let section = Section::new(&inst, 0.0, 10.0, -1, Anchor::Low).expect("section clear of equilibria");
    (inst, section)
}
