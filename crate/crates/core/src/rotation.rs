//! Field-rotation parameters: exact rotation determinants, sign certificates, the
//! reversibility center test and reduction of Liénard systems to canonical form.

use std::collections::BTreeMap;
use std::fmt;

use num::{BigRational, One};

use crate::error::{Error, Result};
use crate::polysys::poly::{format_rational, rat, sign};
use crate::polysys::{lienard_coefficients, Family, ParamPolynomial, ParameterAssignment, PlanarSystem};

/// `P·∂Q/∂param − Q·∂P/∂param`.
pub fn rotation_determinant(sys: &PlanarSystem, param: &str) -> Result<ParamPolynomial> {
    if !sys.has_parameter(param) {
        return Err(Error::UnknownParameter(param.to_string()));
    }
    let dp = sys.p.derivative_param(param);
    let dq = sys.q.derivative_param(param);
    Ok(&sys.p.checked_mul(&dq)? - &sys.q.checked_mul(&dp)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
pub enum Definiteness {
    #[serde(rename = "PSD")]
    Psd,
    #[serde(rename = "NSD")]
    Nsd,
    #[serde(rename = "INDEFINITE")]
    Indefinite,
    #[serde(rename = "UNKNOWN")]
    Unknown,
}

impl fmt::Display for Definiteness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Definiteness::Psd => "PSD",
            Definiteness::Nsd => "NSD",
            Definiteness::Indefinite => "INDEFINITE",
            Definiteness::Unknown => "UNKNOWN",
        })
    }
}

/// Two points where the polynomial takes opposite signs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    pub positive: [BigRational; 2],
    pub negative: [BigRational; 2],
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pt = |p: &[BigRational; 2]| format!("({}, {})", format_rational(&p[0]), format_rational(&p[1]));
        write!(f, "+ at {}, - at {}", pt(&self.positive), pt(&self.negative))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SemidefiniteVerdict {
    pub verdict: Definiteness,
    pub witness: Option<Witness>,
}

impl SemidefiniteVerdict {
    pub fn is_semidefinite(&self) -> bool {
        matches!(self.verdict, Definiteness::Psd | Definiteness::Nsd)
    }
}

/// Sample coordinates, in search order.
fn sample_values() -> Vec<BigRational> {
    let base = [(1, 1), (2, 1), (1, 2), (3, 1), (1, 3), (5, 1), (1, 5), (3, 2), (10, 1), (1, 10)];
    let mut out = vec![rat(0, 1)];
    for (n, d) in base {
        out.push(rat(n, d));
        out.push(rat(-n, d));
    }
    out
}

/// Sign-semidefiniteness of a parameter-free polynomial.
///
/// PSD and NSD come only from the structural certificate "every term is an even monomial
/// and all coefficients share a sign". INDEFINITE needs an exact pair of opposite-sign samples.
pub fn semidefinite_verdict(poly: &ParamPolynomial) -> Result<SemidefiniteVerdict> {
    if !poly.is_parameter_free() {
        return Err(Error::FreeParameters(poly.parameters().into_iter().collect()));
    }
    let signs: Vec<i8> = poly.terms().map(|(_, c)| sign(c.constant_part())).collect();
    let all_even = poly.terms().all(|(&(i, j), _)| i % 2 == 0 && j % 2 == 0);
    if all_even && signs.iter().all(|&s| s >= 0) {
        return Ok(SemidefiniteVerdict { verdict: Definiteness::Psd, witness: None });
    }
    if all_even && signs.iter().all(|&s| s <= 0) {
        return Ok(SemidefiniteVerdict { verdict: Definiteness::Nsd, witness: None });
    }
    let eval = |x: &BigRational, y: &BigRational| sign(&poly.eval_exact(x, y).expect("parameter-free"));
    let values = sample_values();
    let mut positive = None;
    let mut negative = None;
    'outer: for x in &values {
        for y in &values {
            let s = eval(x, y);
            if s == 0 {
                continue;
            }
            // Odd symmetry in either variable or jointly gives the opposite sign for free.
            for (mx, my) in [(x.clone(), -y.clone()), (-x.clone(), y.clone()), (-x.clone(), -y.clone())] {
                if eval(&mx, &my) == -s {
                    let (p, n) = ([x.clone(), y.clone()], [mx, my]);
                    let (p, n) = if s > 0 { (p, n) } else { (n, p) };
                    positive = Some(p);
                    negative = Some(n);
                    break 'outer;
                }
            }
            let slot = if s > 0 { &mut positive } else { &mut negative };
            if slot.is_none() {
                *slot = Some([x.clone(), y.clone()]);
            }
            if positive.is_some() && negative.is_some() {
                break 'outer;
            }
        }
    }
    Ok(match (positive, negative) {
        (Some(positive), Some(negative)) => SemidefiniteVerdict {
            verdict: Definiteness::Indefinite,
            witness: Some(Witness { positive, negative }),
        },
        _ => SemidefiniteVerdict { verdict: Definiteness::Unknown, witness: None },
    })
}

/// Whether the assigned system is reversible under `(x, y, t) → (x, −y, −t)`:
/// `P(x, −y) = −P(x, y)` and `Q(x, −y) = Q(x, y)` exactly.
pub fn reversibility_center_check(sys: &PlanarSystem, a: &ParameterAssignment) -> Result<bool> {
    let p = sys.p.substitute(a)?;
    let q = sys.q.substitute(a)?;
    Ok(is_reversible(&p, &q))
}

pub(crate) fn is_reversible(p: &ParamPolynomial, q: &ParamPolynomial) -> bool {
    p.terms().all(|(&(_, j), _)| j % 2 == 1) && q.terms().all(|(&(_, j), _)| j % 2 == 0)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RotationParameter {
    pub name: String,
    pub determinant: ParamPolynomial,
    pub verdict: SemidefiniteVerdict,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CanonicalizationReport {
    pub system: PlanarSystem,
    pub rotation: Vec<RotationParameter>,
    /// Parameters that were fixed, with their values.
    pub fixed: Vec<(String, BigRational)>,
}

/// Fixes every even-power parameter of a Liénard system to 1 and certifies each remaining
/// parameter as a field rotation parameter.
pub fn canonicalize(sys: &PlanarSystem) -> Result<CanonicalizationReport> {
    if !sys.family.is_lienard() {
        return Err(Error::NotLienardShape(format!("family {} cannot be canonicalized", sys.family)));
    }
    let coeffs = lienard_coefficients(sys)
        .ok_or_else(|| Error::NotLienardShape("expected p = y and q = -x + Σ c_i y^i".into()))?;
    let mut values = BTreeMap::new();
    for (idx, c) in coeffs.iter().enumerate().skip(1).step_by(2) {
        if c.is_constant() {
            continue;
        }
        match c.as_single_parameter() {
            Some(name) => {
                values.insert(name.to_string(), BigRational::one());
            }
            None => {
                return Err(Error::NotLienardShape(format!(
                    "coefficient of y^{} must be a bare parameter or a constant",
                    idx + 1
                )))
            }
        }
    }
    let fixed: Vec<(String, BigRational)> = values.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
    let evens_become_one = coeffs
        .iter()
        .skip(1)
        .step_by(2)
        .all(|c| c.as_single_parameter().is_some() || (c.is_constant() && c.constant_part().is_one()));
    let family = match sys.family {
        Family::Lienard if evens_become_one => Family::Canonical,
        f => f,
    };
    let system = sys.fix_parameters(&values, family)?;
    let mut rotation = Vec::new();
    for name in system.parameters() {
        let determinant = rotation_determinant(&system, name)?;
        let verdict = semidefinite_verdict(&determinant)?;
        if !verdict.is_semidefinite() {
            return Err(Error::NotRotationParameter {
                param: name.clone(),
                verdict: verdict.verdict.to_string(),
            });
        }
        rotation.push(RotationParameter {
            name: name.clone(),
            determinant,
            verdict,
        });
    }
    Ok(CanonicalizationReport { system, rotation, fixed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polysys::{build_canonical, build_cubic_symbolic, build_lienard, build_lienard_symbolic, linear_center, Entry};

    fn y_pow(n: u32) -> ParamPolynomial {
        ParamPolynomial::monomial(0, n)
    }

    #[test]
    fn canonical_mu1_gives_y_squared() {
        let sys = build_canonical(2).unwrap();
        assert_eq!(rotation_determinant(&sys, "mu1").unwrap(), y_pow(2));
    }

    #[test]
    fn even_parameter_gives_odd_power() {
        let sys = build_lienard_symbolic(1).unwrap();
        let d = rotation_determinant(&sys, "mu2").unwrap();
        // Independent route: y times the coefficient polynomial of mu2 in Q.
        let oracle = ParamPolynomial::y().checked_mul(&y_pow(2)).unwrap();
        assert_eq!(d, oracle);
        assert_eq!(d, y_pow(3));
    }

    #[test]
    fn absent_and_unknown_parameters() {
        let sys = build_lienard(1, &[Entry::sym("a"), Entry::int(1)], &[Entry::int(0)]).unwrap();
        assert_eq!(rotation_determinant(&sys, "b").unwrap_err(), Error::UnknownParameter("b".into()));
        let with_unused = PlanarSystem::new(sys.p.clone(), sys.q.clone(), vec!["a".into(), "b".into()], sys.family).unwrap();
        assert!(rotation_determinant(&with_unused, "b").unwrap().is_zero());
    }

    #[test]
    fn verdicts() {
        assert_eq!(semidefinite_verdict(&y_pow(2)).unwrap().verdict, Definiteness::Psd);
        assert_eq!(semidefinite_verdict(&-&y_pow(4)).unwrap().verdict, Definiteness::Nsd);
        let odd = semidefinite_verdict(&y_pow(3)).unwrap();
        assert_eq!(odd.verdict, Definiteness::Indefinite);
        let w = odd.witness.unwrap();
        assert_eq!(w.positive[1], rat(1, 1));
        assert_eq!(w.negative[1], rat(-1, 1));
        // x^2 - 2xy + y^2 = (x - y)^2 has no structural certificate.
        let sq = &(&ParamPolynomial::monomial(2, 0) + &ParamPolynomial::monomial(0, 2))
            - &(&ParamPolynomial::monomial(1, 1) * &rat(2, 1));
        assert_eq!(semidefinite_verdict(&sq).unwrap().verdict, Definiteness::Unknown);
    }

    #[test]
    fn verdict_rejects_parameters() {
        let sys = build_canonical(1).unwrap();
        assert!(matches!(semidefinite_verdict(&sys.q), Err(Error::FreeParameters(_))));
    }

    #[test]
    fn reversibility() {
        let sym = build_lienard(2, &[Entry::int(0), Entry::int(0), Entry::int(0)], &[Entry::sym("a"), Entry::sym("b")]).unwrap();
        let a = ParameterAssignment::from_pairs([("a", 0.7), ("b", -3.0)]);
        assert!(reversibility_center_check(&sym, &a).unwrap());
        let can = build_canonical(1).unwrap();
        let a = ParameterAssignment::from_pairs([("mu1", 0.1), ("mu3", 0.0)]);
        assert!(!reversibility_center_check(&can, &a).unwrap());
        assert!(reversibility_center_check(&linear_center(), &ParameterAssignment::new()).unwrap());
    }

    #[test]
    fn canonicalize_k2() {
        let report = canonicalize(&build_lienard_symbolic(2).unwrap()).unwrap();
        assert_eq!(report.system, build_canonical(2).unwrap());
        assert_eq!(report.system.family, Family::Canonical);
        let names: Vec<&str> = report.rotation.iter().map(|r| r.name.as_str()).collect();
        assert_eq!(names, ["mu1", "mu3", "mu5"]);
        for (i, r) in report.rotation.iter().enumerate() {
            assert_eq!(r.determinant, y_pow(2 * i as u32 + 2));
            assert_eq!(r.verdict.verdict, Definiteness::Psd);
        }
        let fixed: Vec<&str> = report.fixed.iter().map(|(n, _)| n.as_str()).collect();
        assert_eq!(fixed, ["mu2", "mu4"]);
    }

    #[test]
    fn canonicalize_is_idempotent() {
        let once = canonicalize(&build_lienard_symbolic(3).unwrap()).unwrap();
        let twice = canonicalize(&once.system).unwrap();
        assert_eq!(once.system, twice.system);
        assert_eq!(once.rotation, twice.rotation);
        assert!(twice.fixed.is_empty());
    }

    #[test]
    fn canonicalize_rejects_cubic() {
        assert!(matches!(
            canonicalize(&build_cubic_symbolic().unwrap()),
            Err(Error::NotLienardShape(_))
        ));
    }
}
