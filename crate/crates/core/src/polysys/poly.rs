//! Exact bivariate polynomials whose coefficients are affine forms in named parameters.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Real values for the parameters of a system.
#[derive(Debug, Clone, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ParameterAssignment {
    pub values: BTreeMap<String, f64>,
}

impl ParameterAssignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, f64)>) -> Self {
        Self {
            values: pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        }
    }

    pub fn get(&self, name: &str) -> Result<f64> {
        self.values
            .get(name)
            .copied()
            .ok_or_else(|| Error::MissingParameter(name.to_string()))
    }

    pub fn set(&mut self, name: &str, value: f64) {
        self.values.insert(name.to_string(), value);
    }

    /// Copy with one value replaced.
    pub fn with(&self, name: &str, value: f64) -> Self {
        let mut out = self.clone();
        out.set(name, value);
        out
    }

    /// Exact rational images of the assigned floats (every finite f64 is a rational).
    pub fn exact(&self) -> Result<BTreeMap<String, BigRational>> {
        self.values
            .iter()
            .map(|(k, &v)| {
                BigRational::from_float(v)
                    .map(|r| (k.clone(), r))
                    .ok_or_else(|| Error::Invalid(format!("parameter `{k}` is not finite")))
            })
            .collect()
    }
}

/// Parses `p/q`, integers and finite decimals into an exact rational.
pub fn parse_rational(text: &str) -> Result<BigRational> {
    let t = text.trim();
    let bad = || Error::Invalid(format!("`{text}` is not an exact rational"));
    if let Some((n, d)) = t.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(BigRational::new(n, d));
    }
    if let Some((int, frac)) = t.split_once('.') {
        if frac.is_empty() || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let negative = int.starts_with('-');
        let int_part: BigInt = match int.trim_start_matches(['-', '+']) {
            "" => BigInt::zero(),
            s => s.parse().map_err(|_| bad())?,
        };
        let scale = num::pow(BigInt::from(10), frac.len());
        let frac_part: BigInt = frac.parse().map_err(|_| bad())?;
        let mag = BigRational::new(int_part * &scale + frac_part, scale);
        return Ok(if negative { -mag } else { mag });
    }
    let n: BigInt = t.parse().map_err(|_| bad())?;
    Ok(BigRational::from_integer(n))
}

/// Canonical text of a rational: `3/2`, `-1`, `0`.
pub fn format_rational(r: &BigRational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub(crate) fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub(crate) fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// `constant + Σ linear[name]·name`, zero entries never stored.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct ParamCoefficient {
    constant: BigRational,
    linear: BTreeMap<String, BigRational>,
}

impl ParamCoefficient {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: BigRational) -> Self {
        Self {
            constant: c,
            linear: BTreeMap::new(),
        }
    }

    pub fn integer(n: i64) -> Self {
        Self::constant(BigRational::from_integer(n.into()))
    }

    pub fn param(name: &str) -> Self {
        Self::from_parts(BigRational::zero(), [(name.to_string(), BigRational::one())])
    }

    pub fn from_parts(
        constant: BigRational,
        linear: impl IntoIterator<Item = (String, BigRational)>,
    ) -> Self {
        let mut out = Self::constant(constant);
        for (name, c) in linear {
            out.add_linear(&name, &c);
        }
        out
    }

    fn add_linear(&mut self, name: &str, c: &BigRational) {
        let entry = self
            .linear
            .entry(name.to_string())
            .or_insert_with(BigRational::zero);
        *entry += c;
        if entry.is_zero() {
            self.linear.remove(name);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.constant.is_zero() && self.linear.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.linear.is_empty()
    }

    pub fn constant_part(&self) -> &BigRational {
        &self.constant
    }

    pub fn linear_part(&self) -> &BTreeMap<String, BigRational> {
        &self.linear
    }

    pub fn parameters(&self) -> impl Iterator<Item = &str> {
        self.linear.keys().map(String::as_str)
    }

    /// ∂/∂name of the affine form.
    pub fn coefficient_of(&self, name: &str) -> BigRational {
        self.linear.get(name).cloned().unwrap_or_else(BigRational::zero)
    }

    /// `Some(name)` when the form is exactly `1·name`.
    pub fn as_single_parameter(&self) -> Option<&str> {
        if !self.constant.is_zero() || self.linear.len() != 1 {
            return None;
        }
        let (name, c) = self.linear.iter().next()?;
        c.is_one().then_some(name.as_str())
    }

    pub fn eval(&self, a: &ParameterAssignment) -> Result<f64> {
        let mut v = to_f64(&self.constant);
        for (name, c) in &self.linear {
            v += to_f64(c) * a.get(name)?;
        }
        Ok(v)
    }

    pub fn substitute_exact(&self, values: &BTreeMap<String, BigRational>) -> Result<BigRational> {
        let mut v = self.constant.clone();
        for (name, c) in &self.linear {
            let x = values
                .get(name)
                .ok_or_else(|| Error::MissingParameter(name.clone()))?;
            v += c * x;
        }
        Ok(v)
    }

    /// Replaces only the parameters present in `values`.
    pub fn substitute_partial(&self, values: &BTreeMap<String, BigRational>) -> Self {
        let mut out = Self::constant(self.constant.clone());
        for (name, c) in &self.linear {
            match values.get(name) {
                Some(x) => out.constant += c * x,
                None => out.add_linear(name, c),
            }
        }
        out
    }

    pub fn scale(&self, k: &BigRational) -> Self {
        if k.is_zero() {
            return Self::zero();
        }
        Self {
            constant: &self.constant * k,
            linear: self.linear.iter().map(|(n, c)| (n.clone(), c * k)).collect(),
        }
    }

    /// Product staying affine; `None` when both factors carry parameters.
    pub fn checked_mul(&self, other: &Self) -> Option<Self> {
        if self.is_constant() {
            Some(other.scale(&self.constant))
        } else if other.is_constant() {
            Some(self.scale(&other.constant))
        } else {
            None
        }
    }

    fn parts(&self) -> Vec<String> {
        let mut parts = Vec::new();
        if !self.constant.is_zero() {
            parts.push(format_rational(&self.constant));
        }
        for (name, c) in &self.linear {
            parts.push(if c.is_one() {
                name.clone()
            } else if (-c).is_one() {
                format!("-{name}")
            } else {
                format!("{}*{name}", format_rational(c))
            });
        }
        parts
    }

    fn is_single_part(&self) -> bool {
        self.parts().len() <= 1
    }
}

fn join_signed(parts: impl IntoIterator<Item = String>) -> String {
    let mut out = String::new();
    for (i, p) in parts.into_iter().enumerate() {
        if i == 0 {
            out.push_str(&p);
        } else if let Some(rest) = p.strip_prefix('-') {
            out.push_str(" - ");
            out.push_str(rest);
        } else {
            out.push_str(" + ");
            out.push_str(&p);
        }
    }
    out
}

impl fmt::Display for ParamCoefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts = self.parts();
        if parts.is_empty() {
            f.write_str("0")
        } else {
            f.write_str(&join_signed(parts))
        }
    }
}

impl std::str::FromStr for ParamCoefficient {
    type Err = Error;

    /// Parses the display form: `3/2*lambda - mu + 1/2`, `-x0`, `0.25`.
    fn from_str(text: &str) -> Result<Self> {
        let bad = |why: &str| Error::Invalid(format!("`{text}` is not an affine coefficient: {why}"));
        let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        if compact.is_empty() {
            return Err(bad("empty"));
        }
        let mut terms = Vec::new();
        let mut start = 0;
        for (i, ch) in compact.char_indices() {
            if i > 0 && (ch == '+' || ch == '-') {
                terms.push(&compact[start..i]);
                start = i;
            }
        }
        terms.push(&compact[start..]);
        let mut out = ParamCoefficient::zero();
        for term in terms {
            let (negative, body) = match term.as_bytes().first() {
                Some(b'-') => (true, &term[1..]),
                Some(b'+') => (false, &term[1..]),
                _ => (false, term),
            };
            if body.is_empty() {
                return Err(bad("dangling sign"));
            }
            let (factor, name) = match body.rsplit_once('*') {
                Some((k, n)) => (parse_rational(k).map_err(|_| bad("bad factor"))?, Some(n)),
                None if body.starts_with(|c: char| c.is_ascii_alphabetic() || c == '_') => (BigRational::one(), Some(body)),
                None => (parse_rational(body).map_err(|_| bad("bad number"))?, None),
            };
            let factor = if negative { -factor } else { factor };
            match name {
                Some(n) => {
                    let valid = n.starts_with(|c: char| c.is_ascii_alphabetic() || c == '_')
                        && n.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
                    if !valid {
                        return Err(bad("bad parameter name"));
                    }
                    out.add_linear(n, &factor);
                }
                None => out.constant += factor,
            }
        }
        Ok(out)
    }
}

impl Add for &ParamCoefficient {
    type Output = ParamCoefficient;
    fn add(self, rhs: Self) -> ParamCoefficient {
        let mut out = self.clone();
        out.constant += &rhs.constant;
        for (n, c) in &rhs.linear {
            out.add_linear(n, c);
        }
        out
    }
}

impl Neg for &ParamCoefficient {
    type Output = ParamCoefficient;
    fn neg(self) -> ParamCoefficient {
        self.scale(&-BigRational::one())
    }
}

impl Sub for &ParamCoefficient {
    type Output = ParamCoefficient;
    fn sub(self, rhs: Self) -> ParamCoefficient {
        self + &(-rhs)
    }
}

/// Exponent pair `(i, j)` of the monomial `x^i y^j`.
pub type Monomial = (u32, u32);

/// Sparse `Σ c_ij x^i y^j` with affine-form coefficients. Identically-zero terms are never stored.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ParamPolynomial {
    terms: BTreeMap<Monomial, ParamCoefficient>,
}

impl ParamPolynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn term(mono: Monomial, c: ParamCoefficient) -> Self {
        let mut p = Self::zero();
        p.add_term(mono, &c);
        p
    }

    /// `x^i y^j` with unit coefficient.
    pub fn monomial(i: u32, j: u32) -> Self {
        Self::term((i, j), ParamCoefficient::integer(1))
    }

    pub fn x() -> Self {
        Self::monomial(1, 0)
    }

    pub fn y() -> Self {
        Self::monomial(0, 1)
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (Monomial, ParamCoefficient)>) -> Self {
        let mut p = Self::zero();
        for (m, c) in terms {
            p.add_term(m, &c);
        }
        p
    }

    pub fn add_term(&mut self, mono: Monomial, c: &ParamCoefficient) {
        let entry = self.terms.entry(mono).or_default();
        *entry = &*entry + c;
        if entry.is_zero() {
            self.terms.remove(&mono);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &ParamCoefficient)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, i: u32, j: u32) -> ParamCoefficient {
        self.terms.get(&(i, j)).cloned().unwrap_or_default()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Maximum total degree; 0 for the zero polynomial.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|&(i, j)| i + j).max().unwrap_or(0)
    }

    pub fn parameters(&self) -> BTreeSet<String> {
        self.terms
            .values()
            .flat_map(|c| c.parameters().map(str::to_string))
            .collect()
    }

    pub fn is_parameter_free(&self) -> bool {
        self.terms.values().all(ParamCoefficient::is_constant)
    }

    /// Homogeneous part of total degree `d`.
    pub fn homogeneous_part(&self, d: u32) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .filter(|((i, j), _)| i + j == d)
                .map(|(m, c)| (*m, c.clone()))
                .collect(),
        }
    }

    pub fn scale(&self, k: &BigRational) -> Self {
        Self::from_terms(self.terms.iter().map(|(m, c)| (*m, c.scale(k))))
    }

    pub fn derivative_x(&self) -> Self {
        Self::from_terms(
            self.terms
                .iter()
                .filter(|((i, _), _)| *i > 0)
                .map(|(&(i, j), c)| ((i - 1, j), c.scale(&BigRational::from_integer(i.into())))),
        )
    }

    pub fn derivative_y(&self) -> Self {
        Self::from_terms(
            self.terms
                .iter()
                .filter(|((_, j), _)| *j > 0)
                .map(|(&(i, j), c)| ((i, j - 1), c.scale(&BigRational::from_integer(j.into())))),
        )
    }

    /// ∂/∂name. Parameters enter affinely, so this is the parameter-free coefficient polynomial.
    pub fn derivative_param(&self, name: &str) -> Self {
        Self::from_terms(
            self.terms
                .iter()
                .map(|(m, c)| (*m, ParamCoefficient::constant(c.coefficient_of(name)))),
        )
    }

    /// Product, failing if both factors depend on parameters.
    pub fn checked_mul(&self, other: &Self) -> Result<Self> {
        let mut out = Self::zero();
        for (&(i1, j1), c1) in &self.terms {
            for (&(i2, j2), c2) in &other.terms {
                let c = c1.checked_mul(c2).ok_or(Error::NonAffineProduct)?;
                out.add_term((i1 + i2, j1 + j2), &c);
            }
        }
        Ok(out)
    }

    /// Substitutes every parameter exactly; the result is parameter-free.
    pub fn substitute_exact(&self, values: &BTreeMap<String, BigRational>) -> Result<Self> {
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            out.add_term(*m, &ParamCoefficient::constant(c.substitute_exact(values)?));
        }
        Ok(out)
    }

    pub fn substitute_partial(&self, values: &BTreeMap<String, BigRational>) -> Self {
        Self::from_terms(self.terms.iter().map(|(m, c)| (*m, c.substitute_partial(values))))
    }

    pub fn substitute(&self, a: &ParameterAssignment) -> Result<Self> {
        let needed: BTreeMap<String, BigRational> = a.exact()?;
        self.substitute_exact(&needed)
    }

    /// Evaluates a parameter-free polynomial exactly.
    pub fn eval_exact(&self, x: &BigRational, y: &BigRational) -> Result<BigRational> {
        let mut v = BigRational::zero();
        for ((i, j), c) in &self.terms {
            if !c.is_constant() {
                return Err(Error::FreeParameters(self.parameters().into_iter().collect()));
            }
            v += c.constant_part() * num::pow(x.clone(), *i as usize) * num::pow(y.clone(), *j as usize);
        }
        Ok(v)
    }

    pub fn eval(&self, a: &ParameterAssignment, x: f64, y: f64) -> Result<f64> {
        let mut v = 0.0;
        for ((i, j), c) in &self.terms {
            v += c.eval(a)? * x.powi(*i as i32) * y.powi(*j as i32);
        }
        Ok(v)
    }

    /// Parameter-free terms as `(i, j, c)` floats.
    pub(crate) fn float_terms(&self) -> Result<Vec<(u32, u32, f64)>> {
        self.terms
            .iter()
            .map(|(&(i, j), c)| {
                if c.is_constant() {
                    Ok((i, j, to_f64(c.constant_part())))
                } else {
                    Err(Error::FreeParameters(self.parameters().into_iter().collect()))
                }
            })
            .collect()
    }

    /// Terms in display order: total degree ascending, then x-degree descending.
    pub fn ordered_terms(&self) -> Vec<(Monomial, &ParamCoefficient)> {
        let mut v: Vec<_> = self.terms.iter().map(|(m, c)| (*m, c)).collect();
        v.sort_by(|(a, _), (b, _)| (a.0 + a.1, std::cmp::Reverse(a.0)).cmp(&(b.0 + b.1, std::cmp::Reverse(b.0))));
        v
    }
}

fn monomial_text(i: u32, j: u32) -> String {
    let var = |v: &str, e: u32| match e {
        0 => None,
        1 => Some(v.to_string()),
        _ => Some(format!("{v}^{e}")),
    };
    [var("x", i), var("y", j)].into_iter().flatten().collect::<Vec<_>>().join("*")
}

impl fmt::Display for ParamPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return f.write_str("0");
        }
        let parts = self.ordered_terms().into_iter().map(|((i, j), c)| {
            if i + j == 0 {
                return c.to_string();
            }
            let mono = monomial_text(i, j);
            if c.is_constant() {
                let k = c.constant_part();
                if k.is_one() {
                    mono
                } else if (-k).is_one() {
                    format!("-{mono}")
                } else {
                    format!("{}*{mono}", format_rational(k))
                }
            } else if c.is_single_part() {
                format!("{c}*{mono}")
            } else {
                format!("({c})*{mono}")
            }
        });
        f.write_str(&join_signed(parts))
    }
}

impl Add for &ParamPolynomial {
    type Output = ParamPolynomial;
    fn add(self, rhs: Self) -> ParamPolynomial {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(*m, c);
        }
        out
    }
}

impl Neg for &ParamPolynomial {
    type Output = ParamPolynomial;
    fn neg(self) -> ParamPolynomial {
        self.scale(&-BigRational::one())
    }
}

impl Sub for &ParamPolynomial {
    type Output = ParamPolynomial;
    fn sub(self, rhs: Self) -> ParamPolynomial {
        self + &(-rhs)
    }
}

impl Mul<&BigRational> for &ParamPolynomial {
    type Output = ParamPolynomial;
    fn mul(self, k: &BigRational) -> ParamPolynomial {
        self.scale(k)
    }
}

/// Sign of an exact rational as -1, 0, 1.
pub(crate) fn sign(r: &BigRational) -> i8 {
    if r.is_zero() {
        0
    } else if r.is_positive() {
        1
    } else {
        -1
    }
}
