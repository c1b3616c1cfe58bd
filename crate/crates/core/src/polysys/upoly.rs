//! Exact univariate polynomials over the rationals and real-root isolation.

use num::{BigInt, BigRational, One, Signed, Zero};

use super::poly::{sign, to_f64};

/// Dense `Σ coeffs[i] t^i`; no trailing zeros.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UPoly {
    coeffs: Vec<BigRational>,
}

impl UPoly {
    pub fn new(mut coeffs: Vec<BigRational>) -> Self {
        while coeffs.last().is_some_and(Zero::is_zero) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn coeffs(&self) -> &[BigRational] {
        &self.coeffs
    }

    fn lead(&self) -> &BigRational {
        self.coeffs.last().expect("nonzero polynomial")
    }

    pub fn eval(&self, t: &BigRational) -> BigRational {
        self.coeffs
            .iter()
            .rev()
            .fold(BigRational::zero(), |acc, c| acc * t + c)
    }

    pub fn sign_at(&self, t: &BigRational) -> i8 {
        sign(&self.eval(t))
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| c * BigRational::from_integer(BigInt::from(i)))
                .collect(),
        )
    }

    /// Quotient and remainder of Euclidean division.
    pub fn div_rem(&self, d: &Self) -> (Self, Self) {
        let dd = d.degree().expect("division by zero polynomial");
        let mut rem = self.coeffs.clone();
        let mut quot = vec![BigRational::zero(); self.coeffs.len().saturating_sub(dd)];
        let lead = d.lead().clone();
        while rem.len() > dd && !rem.is_empty() {
            let k = rem.len() - 1 - dd;
            let f = rem.last().unwrap() / &lead;
            for (i, c) in d.coeffs.iter().enumerate() {
                rem[k + i] -= &f * c;
            }
            quot[k] = f;
            rem.pop();
            while rem.last().is_some_and(Zero::is_zero) {
                rem.pop();
            }
        }
        (Self::new(quot), Self::new(rem))
    }

    fn monic(&self) -> Self {
        let l = self.lead().clone();
        Self::new(self.coeffs.iter().map(|c| c / &l).collect())
    }

    pub fn gcd(&self, other: &Self) -> Self {
        let (mut a, mut b) = (self.clone(), other.clone());
        while !b.is_zero() {
            let (_, r) = a.div_rem(&b);
            a = b;
            b = r;
        }
        if a.is_zero() {
            a
        } else {
            a.monic()
        }
    }

    /// Same real roots, all simple.
    pub fn square_free(&self) -> Self {
        if self.degree().unwrap_or(0) < 1 {
            return self.clone();
        }
        let g = self.gcd(&self.derivative());
        if g.degree() == Some(0) {
            self.clone()
        } else {
            self.div_rem(&g).0
        }
    }

    fn sturm_sequence(&self) -> Vec<Self> {
        let mut seq = vec![self.clone(), self.derivative()];
        loop {
            let n = seq.len();
            if seq[n - 1].is_zero() {
                seq.pop();
                break;
            }
            let (_, r) = seq[n - 2].div_rem(&seq[n - 1]);
            if r.is_zero() {
                break;
            }
            seq.push(Self::new(r.coeffs.into_iter().map(|c| -c).collect()));
        }
        seq
    }

    /// Upper bound on the absolute value of every root (Cauchy).
    pub fn root_bound(&self) -> BigRational {
        let lead = self.lead().abs();
        let m = self.coeffs[..self.coeffs.len() - 1]
            .iter()
            .map(|c| c.abs() / &lead)
            .fold(BigRational::zero(), |a, b| if b > a { b } else { a });
        m + BigRational::one()
    }

    /// Real roots in the closed interval `[lo, hi]`, ascending, each accurate to a few ulps.
    pub fn real_roots_in(&self, lo: &BigRational, hi: &BigRational) -> Vec<f64> {
        if self.degree().unwrap_or(0) < 1 || lo > hi {
            return Vec::new();
        }
        let sf = self.square_free();
        let seq = sf.sturm_sequence();
        let variations = |t: &BigRational| -> usize {
            let signs: Vec<i8> = seq.iter().map(|p| p.sign_at(t)).filter(|&s| s != 0).collect();
            signs.windows(2).filter(|w| w[0] != w[1]).count()
        };
        let mut roots = Vec::new();
        // Sturm counts roots in (a, b]; pick up a root sitting exactly at lo separately.
        if sf.sign_at(lo) == 0 {
            roots.push(to_f64(lo));
        }
        let mut stack = vec![(lo.clone(), hi.clone(), variations(lo), variations(hi))];
        while let Some((a, b, va, vb)) = stack.pop() {
            let count = va.saturating_sub(vb);
            if count == 0 {
                continue;
            }
            if count == 1 {
                roots.push(refine_simple_root(&sf, a, b));
                continue;
            }
            let mid = (&a + &b) / BigRational::from_integer(2.into());
            let vm = variations(&mid);
            stack.push((a, mid.clone(), va, vm));
            stack.push((mid, b, vm, vb));
        }
        roots.sort_by(f64::total_cmp);
        roots.dedup();
        roots
    }

    /// All real roots.
    pub fn real_roots(&self) -> Vec<f64> {
        if self.degree().unwrap_or(0) < 1 {
            return Vec::new();
        }
        let b = self.root_bound();
        self.real_roots_in(&-b.clone(), &b)
    }

    /// Number of distinct real roots in the open interval `(lo, hi)`.
    pub fn count_roots_open(&self, lo: &BigRational, hi: &BigRational) -> usize {
        if self.degree().unwrap_or(0) < 1 {
            return 0;
        }
        let sf = self.square_free();
        let seq = sf.sturm_sequence();
        let variations = |t: &BigRational| -> usize {
            let signs: Vec<i8> = seq.iter().map(|p| p.sign_at(t)).filter(|&s| s != 0).collect();
            signs.windows(2).filter(|w| w[0] != w[1]).count()
        };
        let in_half_open = variations(lo).saturating_sub(variations(hi));
        in_half_open - usize::from(sf.sign_at(hi) == 0)
    }
}

/// Bisection on an isolating interval `(a, b]` of a square-free polynomial. Tries the
/// simplest rational of the current interval first so rational roots come out exact.
fn refine_simple_root(p: &UPoly, mut a: BigRational, mut b: BigRational) -> f64 {
    let two = BigRational::from_integer(2.into());
    if p.sign_at(&b) == 0 {
        return to_f64(&b);
    }
    let sb = p.sign_at(&b);
    for step in 0..200 {
        let width = &b - &a;
        let scale = a.abs().max(b.abs()).max(BigRational::one());
        if to_f64(&(width / scale)) < 1e-17 {
            break;
        }
        if step < 40 {
            if let Some(c) = simplest_between(&a, &b) {
                if c > a && c <= b && p.sign_at(&c) == 0 {
                    return to_f64(&c);
                }
            }
        }
        let mid = (&a + &b) / &two;
        let sm = p.sign_at(&mid);
        if sm == 0 {
            return to_f64(&mid);
        }
        if sm == sb {
            b = mid;
        } else {
            a = mid;
        }
    }
    to_f64(&((&a + &b) / two))
}

/// The rational with the smallest denominator in `[lo, hi]`.
pub fn simplest_between(lo: &BigRational, hi: &BigRational) -> Option<BigRational> {
    if lo > hi {
        return None;
    }
    if !lo.is_positive() && !hi.is_negative() {
        return Some(BigRational::zero());
    }
    if hi.is_negative() {
        return simplest_between(&-hi.clone(), &-lo.clone()).map(|r| -r);
    }
    simplest_positive(lo.clone(), hi.clone(), 0)
}

fn simplest_positive(lo: BigRational, hi: BigRational, depth: usize) -> Option<BigRational> {
    if depth > 64 {
        return None;
    }
    let fl = lo.floor();
    if fl == lo {
        return Some(lo);
    }
    let next = &fl + BigRational::one();
    if next <= hi {
        return Some(next);
    }
    // lo, hi share the integer part: recurse on reciprocals of the fractional parts.
    let inner = simplest_positive((&hi - &fl).recip(), (&lo - &fl).recip(), depth + 1)?;
    Some(fl + inner.recip())
}
