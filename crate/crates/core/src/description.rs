//! Plain-text system descriptions.
//!
//! ```toml
//! family = "canonical"
//! degree = 3
//! parameters = ["mu1", "mu3"]
//!
//! [p]
//! "y" = "1"
//!
//! [q]
//! "x" = "-1"
//! "y" = "mu1"
//! "y^2" = "1"
//! "y^3" = "mu3"
//!
//! [assignment]
//! mu1 = 0.1
//! mu3 = -1.0
//! ```
//!
//! Keys of `[p]` and `[q]` are monomials (`1`, `x`, `x^2*y`, …); values are exact affine
//! forms in the parameters. Assignments are the only place floats appear.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Deserialize;
use toml::Spanned;

use crate::error::{Error, Result};
use crate::polysys::{Family, Monomial, ParamCoefficient, ParamPolynomial, ParameterAssignment, PlanarSystem};

#[derive(Debug, Clone, PartialEq)]
pub struct SystemDescription {
    pub system: PlanarSystem,
    pub assignment: Option<ParameterAssignment>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Raw {
    family: Spanned<String>,
    degree: Option<Spanned<u32>>,
    #[serde(default)]
    parameters: Vec<String>,
    p: BTreeMap<Spanned<String>, Spanned<String>>,
    q: BTreeMap<Spanned<String>, Spanned<String>>,
    assignment: Option<BTreeMap<Spanned<String>, Spanned<f64>>>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|b| *b == b'\n').count() + 1
}

fn at<T>(text: &str, s: &Spanned<T>, message: impl Into<String>) -> Error {
    Error::Description {
        line: line_of(text, s.span().start),
        message: message.into(),
    }
}

/// `1`, `x`, `y^3`, `x^2*y`.
pub fn parse_monomial(text: &str) -> Result<Monomial> {
    let bad = || Error::Invalid(format!("`{text}` is not a monomial in x and y"));
    let t: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    if t == "1" {
        return Ok((0, 0));
    }
    let (mut i, mut j) = (None, None);
    for factor in t.split('*') {
        let (var, exp) = match factor.split_once('^') {
            Some((v, e)) => (v, e.parse::<u32>().map_err(|_| bad())?),
            None => (factor, 1),
        };
        let slot = match var {
            "x" => &mut i,
            "y" => &mut j,
            _ => return Err(bad()),
        };
        if slot.is_some() || exp == 0 {
            return Err(bad());
        }
        *slot = Some(exp);
    }
    Ok((i.unwrap_or(0), j.unwrap_or(0)))
}

fn monomial_key(m: Monomial) -> String {
    let part = |v: &str, e: u32| match e {
        0 => None,
        1 => Some(v.to_string()),
        _ => Some(format!("{v}^{e}")),
    };
    let parts: Vec<String> = [part("x", m.0), part("y", m.1)].into_iter().flatten().collect();
    if parts.is_empty() {
        "1".into()
    } else {
        parts.join("*")
    }
}

fn polynomial(text: &str, table: &BTreeMap<Spanned<String>, Spanned<String>>) -> Result<ParamPolynomial> {
    let mut out = ParamPolynomial::zero();
    for (key, value) in table {
        let mono = parse_monomial(key.get_ref()).map_err(|e| at(text, key, e.to_string()))?;
        let c: ParamCoefficient = value.get_ref().parse().map_err(|e: Error| at(text, value, e.to_string()))?;
        out.add_term(mono, &c);
    }
    Ok(out)
}

impl SystemDescription {
    pub fn parse(text: &str) -> Result<Self> {
        let raw: Raw = toml::from_str(text).map_err(|e| Error::Description {
            line: e.span().map_or(1, |s| line_of(text, s.start)),
            message: e.message().trim().to_string(),
        })?;
        let family: Family = raw
            .family
            .get_ref()
            .parse()
            .map_err(|e: Error| at(text, &raw.family, e.to_string()))?;
        let p = polynomial(text, &raw.p)?;
        let q = polynomial(text, &raw.q)?;
        let system = PlanarSystem::new(p, q, raw.parameters, family).map_err(|e| at(text, &raw.family, e.to_string()))?;
        if let Some(d) = &raw.degree {
            if *d.get_ref() != system.degree() {
                return Err(at(text, d, format!("degree {} declared, polynomials have degree {}", d.get_ref(), system.degree())));
            }
        }
        let assignment = match raw.assignment {
            None => None,
            Some(table) => {
                let mut a = ParameterAssignment::new();
                for (k, v) in &table {
                    if !system.has_parameter(k.get_ref()) {
                        return Err(at(text, k, format!("`{}` is not a declared parameter", k.get_ref())));
                    }
                    if !v.get_ref().is_finite() {
                        return Err(at(text, v, "assignment values must be finite"));
                    }
                    a.set(k.get_ref(), *v.get_ref());
                }
                Some(a)
            }
        };
        Ok(Self { system, assignment })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Invalid(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Normalized text: terms in display order, parameters as declared.
    pub fn to_text(&self) -> String {
        let sys = &self.system;
        let mut out = String::new();
        let _ = writeln!(out, "family = \"{}\"", sys.family);
        let _ = writeln!(out, "degree = {}", sys.degree());
        let params: Vec<String> = sys.parameters().iter().map(|p| format!("\"{p}\"")).collect();
        let _ = writeln!(out, "parameters = [{}]", params.join(", "));
        for (name, poly) in [("p", &sys.p), ("q", &sys.q)] {
            let _ = writeln!(out, "\n[{name}]");
            for (m, c) in poly.ordered_terms() {
                let _ = writeln!(out, "\"{}\" = \"{c}\"", monomial_key(m));
            }
        }
        if let Some(a) = &self.assignment {
            out.push_str("\n[assignment]\n");
            for (k, v) in &a.values {
                let _ = writeln!(out, "{k} = {v:?}");
            }
        }
        out
    }

    /// The stored assignment, or an error naming the first parameter without a value.
    pub fn require_assignment(&self) -> Result<&ParameterAssignment> {
        match &self.assignment {
            Some(a) => {
                for p in self.system.parameters() {
                    a.get(p)?;
                }
                Ok(a)
            }
            None => match self.system.parameters().first() {
                Some(p) => Err(Error::MissingParameter(p.clone())),
                None => {
                    static EMPTY: std::sync::OnceLock<ParameterAssignment> = std::sync::OnceLock::new();
                    Ok(EMPTY.get_or_init(ParameterAssignment::new))
                }
            },
        }
    }
}
