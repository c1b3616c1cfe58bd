//! Liénard-family polynomial systems: exact construction, field-rotation checks and
//! numerical limit-cycle and bifurcation analysis.

pub mod bifurcate;
pub mod cubic;
pub mod cycles;
pub mod description;
pub mod error;
pub mod integrate;
pub mod polysys;
pub mod rotation;

pub use bifurcate::{
    continue_cycle, find_fold, hopf_scan, staircase_construct, Branch, BranchEvent, FoldPoint, HopfPoint,
    StaircaseOptions, StaircaseShape, StepPolicy,
};
pub use cubic::{analyze_distribution, double_hopf_locus, sweep_distributions, Distribution, SweepCell};
pub use cycles::{find_cycles, fine_focus_order, return_map, CycleReport, GridSpec, LimitCycle, Stability};
pub use description::SystemDescription;
pub use error::{Error, Result};
pub use integrate::{integrate, next_crossing, Anchor, IntegratorConfig, Section, Trajectory};
pub use polysys::{
    classify_infinity, find_equilibria, Equilibrium, EquilibriumKind, Family, Instance, ParamCoefficient,
    ParamPolynomial, ParameterAssignment, PlanarSystem,
};
pub use rotation::{canonicalize, rotation_determinant, semidefinite_verdict, Definiteness};
