//! Parameter-affine planar polynomial systems.

pub mod equilibria;
pub mod field;
pub mod infinity;
pub mod poly;
pub mod system;
pub mod upoly;

pub use equilibria::{classify, find_equilibria, Equilibrium, EquilibriumKind, Region};
pub use field::{Field, Instance, Reversed, VectorField};
pub use infinity::{classify_exact, classify_infinity, Chart, InfinityKind, InfinitySingularity};
pub use poly::{format_rational, parse_rational, Monomial, ParamCoefficient, ParamPolynomial, ParameterAssignment};
pub use system::{
    build_canonical, build_cubic, build_cubic_symbolic, build_lienard, build_lienard_symbolic, build_rychkov,
    lienard_coefficients, linear_center, Entry, Family, PlanarSystem,
};
pub use upoly::UPoly;

/// `(P, Q)` at `point` with parameters taken from `a`.
pub fn eval_field(sys: &PlanarSystem, a: &ParameterAssignment, point: [f64; 2]) -> crate::Result<[f64; 2]> {
    Ok(Field::new(sys, a)?.eval(point[0], point[1]))
}

/// Jacobian of `(P, Q)` at `point`.
pub fn jacobian(sys: &PlanarSystem, a: &ParameterAssignment, point: [f64; 2]) -> crate::Result<[[f64; 2]; 2]> {
    Ok(Field::new(sys, a)?.jacobian(point[0], point[1]))
}
