use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use num::{BigRational, One};

use super::poly::{rat, ParamCoefficient, ParamPolynomial};
use crate::error::{Error, Result};

/// Which family of planar systems a [`PlanarSystem`] was built as.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// `x' = y, y' = -x + Σ μ_i y^i`, i = 1..2k+1.
    Lienard,
    /// Liénard with every even coefficient equal to 1 and symbolic odd ones.
    Canonical,
    /// Liénard with every odd coefficient zero (reversible, center at the origin).
    Symmetric,
    /// `y' = -x + μ1 y + μ3 y^3 + μ5 y^5`.
    Rychkov,
    /// `y' = -x + (λ-μ)y + 3/2 x^2 + μxy - 1/2 x^3 + αx^2y`.
    Cubic,
    /// Any parameter-affine polynomial system.
    General,
}

impl Family {
    pub const ALL: [Family; 6] = [
        Family::Lienard,
        Family::Canonical,
        Family::Symmetric,
        Family::Rychkov,
        Family::Cubic,
        Family::General,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Family::Lienard => "lienard",
            Family::Canonical => "canonical",
            Family::Symmetric => "symmetric",
            Family::Rychkov => "rychkov",
            Family::Cubic => "cubic",
            Family::General => "general",
        }
    }

    pub fn is_lienard(self) -> bool {
        matches!(
            self,
            Family::Lienard | Family::Canonical | Family::Symmetric | Family::Rychkov
        )
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.tag() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown family tag `{s}`")))
    }
}

/// A coefficient given to a builder: an exact number or a parameter name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Entry {
    Number(BigRational),
    Symbol(String),
}

impl Entry {
    pub fn int(n: i64) -> Self {
        Entry::Number(BigRational::from_integer(n.into()))
    }

    pub fn ratio(n: i64, d: i64) -> Self {
        Entry::Number(rat(n, d))
    }

    pub fn sym(name: &str) -> Self {
        Entry::Symbol(name.to_string())
    }

    fn coefficient(&self) -> ParamCoefficient {
        match self {
            Entry::Number(r) => ParamCoefficient::constant(r.clone()),
            Entry::Symbol(s) => ParamCoefficient::param(s),
        }
    }

    fn is_number(&self, v: i64) -> bool {
        matches!(self, Entry::Number(r) if *r == BigRational::from_integer(v.into()))
    }
}

/// `x' = P(x, y), y' = Q(x, y)` with parameter-affine coefficients.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanarSystem {
    pub p: ParamPolynomial,
    pub q: ParamPolynomial,
    parameters: Vec<String>,
    pub family: Family,
}

impl PlanarSystem {
    /// Builds a system, checking that every parameter used is declared and the family shape holds.
    pub fn new(
        p: ParamPolynomial,
        q: ParamPolynomial,
        parameters: Vec<String>,
        family: Family,
    ) -> Result<Self> {
        let declared: BTreeSet<&str> = parameters.iter().map(String::as_str).collect();
        if declared.len() != parameters.len() {
            return Err(Error::Invalid("duplicate parameter names".into()));
        }
        for used in p.parameters().union(&q.parameters()) {
            if !declared.contains(used.as_str()) {
                return Err(Error::UnknownParameter(used.clone()));
            }
        }
        let sys = Self {
            p,
            q,
            parameters,
            family,
        };
        sys.check_family()?;
        Ok(sys)
    }

    pub fn parameters(&self) -> &[String] {
        &self.parameters
    }

    pub fn has_parameter(&self, name: &str) -> bool {
        self.parameters.iter().any(|p| p == name)
    }

    pub fn degree(&self) -> u32 {
        self.p.degree().max(self.q.degree())
    }

    fn check_family(&self) -> Result<()> {
        match self.family {
            Family::General => Ok(()),
            Family::Cubic => check_cubic_shape(self),
            f => {
                let coeffs = lienard_coefficients(self)
                    .ok_or_else(|| Error::NotLienardShape(format!("family {f} requires p = y and q = -x + Σ c_i y^i")))?;
                let odd_zero = coeffs.iter().step_by(2).all(ParamCoefficient::is_zero);
                let even_zero = coeffs.iter().skip(1).step_by(2).all(ParamCoefficient::is_zero);
                let even_one = coeffs
                    .iter()
                    .skip(1)
                    .step_by(2)
                    .all(|c| c.is_constant() && c.constant_part().is_one());
                let ok = match f {
                    Family::Symmetric => odd_zero,
                    Family::Canonical => even_one,
                    Family::Rychkov => even_zero && coeffs.len() <= 5,
                    _ => true,
                };
                if ok {
                    Ok(())
                } else {
                    Err(Error::NotLienardShape(format!("coefficients do not match family {f}")))
                }
            }
        }
    }

    /// Same system with some parameters fixed to exact values; they leave the parameter list.
    pub fn fix_parameters(&self, values: &std::collections::BTreeMap<String, BigRational>, family: Family) -> Result<Self> {
        let parameters = self
            .parameters
            .iter()
            .filter(|p| !values.contains_key(*p))
            .cloned()
            .collect();
        Self::new(
            self.p.substitute_partial(values),
            self.q.substitute_partial(values),
            parameters,
            family,
        )
    }
}

impl fmt::Display for PlanarSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x' = {}\ny' = {}", self.p, self.q)
    }
}

/// Coefficients `c_1..c_n` of `q = -x + Σ c_i y^i` when `p = y` exactly; `None` otherwise.
pub fn lienard_coefficients(sys: &PlanarSystem) -> Option<Vec<ParamCoefficient>> {
    if sys.p != ParamPolynomial::y() {
        return None;
    }
    let minus_one = ParamCoefficient::integer(-1);
    let mut max_j = 0;
    for (&(i, j), c) in sys.q.terms() {
        match (i, j) {
            (1, 0) if *c == minus_one => {}
            (0, j) if j >= 1 => max_j = max_j.max(j),
            _ => return None,
        }
    }
    if sys.q.coefficient(1, 0) != minus_one {
        return None;
    }
    Some((1..=max_j).map(|j| sys.q.coefficient(0, j)).collect())
}

fn check_cubic_shape(sys: &PlanarSystem) -> Result<()> {
    let bad = |m: &str| Err(Error::NotLienardShape(format!("cubic: {m}")));
    if sys.p != ParamPolynomial::y() {
        return bad("p must equal y");
    }
    let fixed = [
        ((1, 0), ParamCoefficient::integer(-1)),
        ((2, 0), ParamCoefficient::constant(rat(3, 2))),
        ((3, 0), ParamCoefficient::constant(rat(-1, 2))),
    ];
    for (m, c) in &fixed {
        if sys.q.coefficient(m.0, m.1) != *c {
            return bad("fixed coefficients of x, x^2, x^3 must be -1, 3/2, -1/2");
        }
    }
    for (&m, _) in sys.q.terms() {
        if !matches!(m, (1, 0) | (0, 1) | (2, 0) | (1, 1) | (3, 0) | (2, 1)) {
            return bad("unexpected monomial");
        }
    }
    Ok(())
}

fn declared_symbols<'a>(entries: impl IntoIterator<Item = &'a Entry>) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for e in entries {
        if let Entry::Symbol(s) = e {
            if !out.contains(s) {
                out.push(s.clone());
            }
        }
    }
    out
}

/// `x' = y, y' = -x + Σ μ_i y^i`. `odd` holds the k+1 coefficients of y, y^3, …, y^(2k+1);
/// `even` the k coefficients of y^2, …, y^(2k).
pub fn build_lienard(k: usize, odd: &[Entry], even: &[Entry]) -> Result<PlanarSystem> {
    if k == 0 {
        return Err(Error::Invalid("k must be positive".into()));
    }
    if odd.len() != k + 1 {
        return Err(Error::LengthMismatch {
            what: "odd coefficients",
            expected: k + 1,
            found: odd.len(),
        });
    }
    if even.len() != k {
        return Err(Error::LengthMismatch {
            what: "even coefficients",
            expected: k,
            found: even.len(),
        });
    }
    let mut q = ParamPolynomial::term((1, 0), ParamCoefficient::integer(-1));
    for (idx, e) in odd.iter().enumerate() {
        q.add_term((0, 2 * idx as u32 + 1), &e.coefficient());
    }
    for (idx, e) in even.iter().enumerate() {
        q.add_term((0, 2 * idx as u32 + 2), &e.coefficient());
    }
    let family = if odd.iter().all(|e| e.is_number(0)) {
        Family::Symmetric
    } else if even.iter().all(|e| e.is_number(1)) && odd.iter().all(|e| matches!(e, Entry::Symbol(_))) {
        Family::Canonical
    } else if k == 2 && even.iter().all(|e| e.is_number(0)) {
        Family::Rychkov
    } else {
        Family::Lienard
    };
    let parameters = declared_symbols(odd.iter().chain(even));
    PlanarSystem::new(ParamPolynomial::y(), q, parameters, family)
}

/// Canonical form with symbolic odd parameters `mu1, mu3, …, mu{2k+1}` and unit even coefficients.
pub fn build_canonical(k: usize) -> Result<PlanarSystem> {
    let odd: Vec<Entry> = (0..=k).map(|i| Entry::Symbol(format!("mu{}", 2 * i + 1))).collect();
    build_lienard(k, &odd, &vec![Entry::int(1); k])
}

/// Liénard system with every coefficient symbolic, `mu1 … mu{2k+1}`.
pub fn build_lienard_symbolic(k: usize) -> Result<PlanarSystem> {
    let odd: Vec<Entry> = (0..=k).map(|i| Entry::Symbol(format!("mu{}", 2 * i + 1))).collect();
    let even: Vec<Entry> = (1..=k).map(|i| Entry::Symbol(format!("mu{}", 2 * i))).collect();
    build_lienard(k, &odd, &even)
}

/// `y' = -x + μ1 y + μ3 y^3 + μ5 y^5`.
pub fn build_rychkov() -> Result<PlanarSystem> {
    build_lienard(
        2,
        &[Entry::sym("mu1"), Entry::sym("mu3"), Entry::sym("mu5")],
        &[Entry::int(0), Entry::int(0)],
    )
}

/// The generalized cubic Liénard system.
pub fn build_cubic(lambda: Entry, mu: Entry, alpha: Entry) -> Result<PlanarSystem> {
    let l = lambda.coefficient();
    let m = mu.coefficient();
    let q = ParamPolynomial::from_terms([
        ((1, 0), ParamCoefficient::integer(-1)),
        ((0, 1), &l - &m),
        ((2, 0), ParamCoefficient::constant(rat(3, 2))),
        ((1, 1), m.clone()),
        ((3, 0), ParamCoefficient::constant(rat(-1, 2))),
        ((2, 1), alpha.coefficient()),
    ]);
    let parameters = declared_symbols([&lambda, &mu, &alpha]);
    PlanarSystem::new(ParamPolynomial::y(), q, parameters, Family::Cubic)
}

pub fn build_cubic_symbolic() -> Result<PlanarSystem> {
    build_cubic(Entry::sym("lambda"), Entry::sym("mu"), Entry::sym("alpha"))
}

/// `x' = y, y' = -x`.
pub fn linear_center() -> PlanarSystem {
    build_lienard(1, &[Entry::int(0), Entry::int(0)], &[Entry::int(0)]).expect("static system")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_k2_matches_canonical_form() {
        let sys = build_canonical(2).unwrap();
        assert_eq!(sys.family, Family::Canonical);
        assert_eq!(sys.q.to_string(), "-x + mu1*y + y^2 + mu3*y^3 + y^4 + mu5*y^5");
        assert_eq!(sys.parameters(), ["mu1", "mu3", "mu5"]);
    }

    #[test]
    fn linear_center_shape() {
        let sys = linear_center();
        assert_eq!(sys.p.to_string(), "y");
        assert_eq!(sys.q.to_string(), "-x");
        assert_eq!(sys.family, Family::Symmetric);
    }

    #[test]
    fn symmetric_tag() {
        let sys = build_lienard(1, &[Entry::int(0), Entry::int(0)], &[Entry::int(1)]).unwrap();
        assert_eq!(sys.q.to_string(), "-x + y^2");
        assert_eq!(sys.family, Family::Symmetric);
    }

    #[test]
    fn length_mismatch() {
        let err = build_lienard(2, &[Entry::int(0)], &[Entry::int(0), Entry::int(0)]).unwrap_err();
        assert!(matches!(err, Error::LengthMismatch { expected: 3, found: 1, .. }));
        assert!(build_lienard(1, &[Entry::int(0), Entry::int(0)], &[]).is_err());
    }

    #[test]
    fn cubic_terms_are_exact() {
        let sys = build_cubic_symbolic().unwrap();
        assert_eq!(
            sys.q.to_string(),
            "-x + (lambda - mu)*y + 3/2*x^2 + mu*x*y - 1/2*x^3 + alpha*x^2*y"
        );
        assert_eq!(sys.q.len(), 6);
        let numeric = build_cubic(Entry::int(0), Entry::int(0), Entry::int(0)).unwrap();
        assert_eq!(numeric.q.to_string(), "-x + 3/2*x^2 - 1/2*x^3");
    }

    #[test]
    fn undeclared_parameter_rejected() {
        let q = ParamPolynomial::term((0, 1), ParamCoefficient::param("nu"));
        let err = PlanarSystem::new(ParamPolynomial::y(), q, vec![], Family::General).unwrap_err();
        assert_eq!(err, Error::UnknownParameter("nu".into()));
    }

    #[test]
    fn family_shape_enforced() {
        let cubic = build_cubic_symbolic().unwrap();
        assert!(PlanarSystem::new(cubic.p.clone(), cubic.q.clone(), cubic.parameters().to_vec(), Family::Lienard).is_err());
        assert!(lienard_coefficients(&cubic).is_none());
    }
}
