//! Float evaluation of an assigned system.

use std::sync::OnceLock;

use super::equilibria::{find_equilibria, Equilibrium, Region};
use super::poly::{ParamPolynomial, ParameterAssignment};
use super::system::PlanarSystem;
use crate::error::{Error, Result};

/// A planar vector field the integrator can follow.
pub trait VectorField: Sync {
    fn eval(&self, x: f64, y: f64) -> [f64; 2];

    /// `∂P/∂x + ∂Q/∂y`.
    fn divergence(&self, x: f64, y: f64) -> f64;

    fn eval_with_divergence(&self, x: f64, y: f64) -> ([f64; 2], f64) {
        (self.eval(x, y), self.divergence(x, y))
    }
}

const MAX_CACHED_DEGREE: usize = 15;

#[derive(Debug, Clone)]
struct Compiled {
    terms: Vec<(usize, usize, f64)>,
}

impl Compiled {
    fn new(p: &ParamPolynomial) -> Result<Self> {
        Ok(Self {
            terms: p
                .float_terms()?
                .into_iter()
                .map(|(i, j, c)| (i as usize, j as usize, c))
                .collect(),
        })
    }

    #[inline]
    fn eval(&self, xp: &[f64], yp: &[f64]) -> f64 {
        self.terms.iter().map(|&(i, j, c)| c * xp[i] * yp[j]).sum()
    }
}

#[inline]
fn powers(x: f64, out: &mut [f64; MAX_CACHED_DEGREE + 1], n: usize) {
    out[0] = 1.0;
    for k in 1..=n {
        out[k] = out[k - 1] * x;
    }
}

/// `(P, Q)` and their first derivatives compiled to float terms.
#[derive(Debug, Clone)]
pub struct Field {
    p: Compiled,
    q: Compiled,
    px: Compiled,
    py: Compiled,
    qx: Compiled,
    qy: Compiled,
    div: Compiled,
    degree: usize,
}

impl Field {
    pub fn new(sys: &PlanarSystem, a: &ParameterAssignment) -> Result<Self> {
        let p = sys.p.substitute(a)?;
        let q = sys.q.substitute(a)?;
        Self::from_exact(&p, &q)
    }

    /// From parameter-free polynomials.
    pub fn from_exact(p: &ParamPolynomial, q: &ParamPolynomial) -> Result<Self> {
        let degree = p.degree().max(q.degree()) as usize;
        if degree > MAX_CACHED_DEGREE {
            return Err(Error::Invalid(format!(
                "degree {degree} exceeds the supported maximum {MAX_CACHED_DEGREE}"
            )));
        }
        let px = p.derivative_x();
        let qy = q.derivative_y();
        Ok(Self {
            p: Compiled::new(p)?,
            q: Compiled::new(q)?,
            px: Compiled::new(&px)?,
            py: Compiled::new(&p.derivative_y())?,
            qx: Compiled::new(&q.derivative_x())?,
            qy: Compiled::new(&qy)?,
            div: Compiled::new(&(&px + &qy))?,
            degree,
        })
    }

    pub fn jacobian(&self, x: f64, y: f64) -> [[f64; 2]; 2] {
        let (mut xp, mut yp) = ([0.0; MAX_CACHED_DEGREE + 1], [0.0; MAX_CACHED_DEGREE + 1]);
        powers(x, &mut xp, self.degree);
        powers(y, &mut yp, self.degree);
        [
            [self.px.eval(&xp, &yp), self.py.eval(&xp, &yp)],
            [self.qx.eval(&xp, &yp), self.qy.eval(&xp, &yp)],
        ]
    }

}

impl VectorField for Field {
    #[inline]
    fn eval(&self, x: f64, y: f64) -> [f64; 2] {
        let (mut xp, mut yp) = ([0.0; MAX_CACHED_DEGREE + 1], [0.0; MAX_CACHED_DEGREE + 1]);
        powers(x, &mut xp, self.degree);
        powers(y, &mut yp, self.degree);
        [self.p.eval(&xp, &yp), self.q.eval(&xp, &yp)]
    }

    fn divergence(&self, x: f64, y: f64) -> f64 {
        let (mut xp, mut yp) = ([0.0; MAX_CACHED_DEGREE + 1], [0.0; MAX_CACHED_DEGREE + 1]);
        powers(x, &mut xp, self.degree);
        powers(y, &mut yp, self.degree);
        self.div.eval(&xp, &yp)
    }

    /// Field and divergence sharing one power table.
    #[inline]
    fn eval_with_divergence(&self, x: f64, y: f64) -> ([f64; 2], f64) {
        let (mut xp, mut yp) = ([0.0; MAX_CACHED_DEGREE + 1], [0.0; MAX_CACHED_DEGREE + 1]);
        powers(x, &mut xp, self.degree);
        powers(y, &mut yp, self.degree);
        (
            [self.p.eval(&xp, &yp), self.q.eval(&xp, &yp)],
            self.div.eval(&xp, &yp),
        )
    }
}

/// Time-reversed field.
pub struct Reversed<'a, F: VectorField + ?Sized>(pub &'a F);

impl<F: VectorField + ?Sized> VectorField for Reversed<'_, F> {
    fn eval(&self, x: f64, y: f64) -> [f64; 2] {
        let [a, b] = self.0.eval(x, y);
        [-a, -b]
    }

    fn divergence(&self, x: f64, y: f64) -> f64 {
        -self.0.divergence(x, y)
    }

    fn eval_with_divergence(&self, x: f64, y: f64) -> ([f64; 2], f64) {
        let ([a, b], d) = self.0.eval_with_divergence(x, y);
        ([-a, -b], -d)
    }
}

/// A system with every parameter assigned: exact substituted polynomials, the compiled
/// field and (lazily) its finite equilibria.
#[derive(Debug)]
pub struct Instance {
    pub system: PlanarSystem,
    pub assignment: ParameterAssignment,
    pub p: ParamPolynomial,
    pub q: ParamPolynomial,
    pub field: Field,
    region: Region,
    equilibria: OnceLock<Result<Vec<Equilibrium>>>,
}

impl Instance {
    pub fn new(sys: &PlanarSystem, a: &ParameterAssignment) -> Result<Self> {
        Self::with_region(sys, a, Region::default())
    }

    /// Equilibria are searched for inside `region`.
    pub fn with_region(sys: &PlanarSystem, a: &ParameterAssignment, region: Region) -> Result<Self> {
        for name in sys.parameters() {
            a.get(name)?;
        }
        let p = sys.p.substitute(a)?;
        let q = sys.q.substitute(a)?;
        let field = Field::from_exact(&p, &q)?;
        Ok(Self {
            system: sys.clone(),
            assignment: a.clone(),
            p,
            q,
            field,
            region,
            equilibria: OnceLock::new(),
        })
    }

    pub fn equilibria(&self) -> Result<&[Equilibrium]> {
        self.equilibria
            .get_or_init(|| find_equilibria(&self.system, &self.assignment, &self.region))
            .as_ref()
            .map(Vec::as_slice)
            .map_err(Clone::clone)
    }

    /// Anti-saddles (positive Jacobian determinant).
    pub fn antisaddles(&self) -> Result<Vec<Equilibrium>> {
        Ok(self
            .equilibria()?
            .iter()
            .filter(|e| e.determinant > 0.0)
            .cloned()
            .collect())
    }
}

impl VectorField for Instance {
    #[inline]
    fn eval(&self, x: f64, y: f64) -> [f64; 2] {
        self.field.eval(x, y)
    }

    fn divergence(&self, x: f64, y: f64) -> f64 {
        self.field.divergence(x, y)
    }

    #[inline]
    fn eval_with_divergence(&self, x: f64, y: f64) -> ([f64; 2], f64) {
        self.field.eval_with_divergence(x, y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polysys::system::{build_canonical, build_cubic_symbolic, linear_center};

    #[test]
    fn canonical_vanishes_at_origin() {
        let sys = build_canonical(2).unwrap();
        let a = ParameterAssignment::from_pairs([("mu1", 0.3), ("mu3", -1.0), ("mu5", 2.0)]);
        let f = Field::new(&sys, &a).unwrap();
        assert_eq!(f.eval(0.0, 0.0), [0.0, 0.0]);
    }

    #[test]
    fn lienard_on_x_axis() {
        let sys = build_canonical(1).unwrap();
        let a = ParameterAssignment::from_pairs([("mu1", 0.3), ("mu3", -1.0)]);
        let f = Field::new(&sys, &a).unwrap();
        for x in [-2.0, 0.5, 3.25] {
            assert_eq!(f.eval(x, 0.0), [0.0, -x]);
        }
    }

    #[test]
    fn cubic_vanishes_at_two() {
        let sys = build_cubic_symbolic().unwrap();
        for (l, m, al) in [(0.0, 0.0, 0.0), (1.3, -0.7, 2.2), (-5.0, 3.0, -0.125)] {
            let a = ParameterAssignment::from_pairs([("lambda", l), ("mu", m), ("alpha", al)]);
            let f = Field::new(&sys, &a).unwrap();
            assert_eq!(f.eval(2.0, 0.0), [0.0, 0.0]);
        }
    }

    #[test]
    fn missing_parameter_reported() {
        let sys = build_canonical(1).unwrap();
        let a = ParameterAssignment::from_pairs([("mu1", 0.3)]);
        assert_eq!(Field::new(&sys, &a).unwrap_err(), Error::MissingParameter("mu3".into()));
    }

    #[test]
    fn jacobians() {
        let sys = build_canonical(1).unwrap();
        let a = ParameterAssignment::from_pairs([("mu1", 0.25), ("mu3", -1.0)]);
        assert_eq!(Field::new(&sys, &a).unwrap().jacobian(0.0, 0.0), [[0.0, 1.0], [-1.0, 0.25]]);

        let cubic = build_cubic_symbolic().unwrap();
        let (l, m, al) = (0.3, -0.2, 0.7);
        let a = ParameterAssignment::from_pairs([("lambda", l), ("mu", m), ("alpha", al)]);
        let f = Field::new(&cubic, &a).unwrap();
        let j1 = f.jacobian(1.0, 0.0);
        assert_eq!(j1[1][0], 0.5);
        assert!((j1[1][1] - (l + al)).abs() < 1e-15);
        let j2 = f.jacobian(2.0, 0.0);
        assert_eq!(j2[1][0], -1.0);
        assert!((j2[1][1] - (l + m + 4.0 * al)).abs() < 1e-15);

        let lc = Field::new(&linear_center(), &ParameterAssignment::new()).unwrap();
        assert_eq!(lc.divergence(0.3, -2.0), 0.0);
    }
}
