//! Finite equilibria: location, linearization and classification.

use num::BigRational;

use super::field::Field;
use super::poly::{ParamPolynomial, ParameterAssignment};
use super::system::PlanarSystem;
use super::upoly::UPoly;
use crate::error::{Error, Result};

/// |trace| and |determinant| below this are treated as zero.
pub const CLASSIFY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub x: (f64, f64),
    pub y: (f64, f64),
}

impl Region {
    pub fn new(x: (f64, f64), y: (f64, f64)) -> Self {
        Self { x, y }
    }

    fn contains(&self, p: [f64; 2]) -> bool {
        (self.x.0..=self.x.1).contains(&p[0]) && (self.y.0..=self.y.1).contains(&p[1])
    }
}

impl Default for Region {
    fn default() -> Self {
        Self {
            x: (-100.0, 100.0),
            y: (-100.0, 100.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EquilibriumKind {
    Saddle,
    StableNode,
    UnstableNode,
    StableFocus,
    UnstableFocus,
    CenterCandidate,
    Degenerate,
}

impl EquilibriumKind {
    pub fn is_antisaddle(self) -> bool {
        !matches!(self, EquilibriumKind::Saddle | EquilibriumKind::Degenerate)
    }

    pub fn label(self) -> &'static str {
        match self {
            EquilibriumKind::Saddle => "saddle",
            EquilibriumKind::StableNode => "stable node",
            EquilibriumKind::UnstableNode => "unstable node",
            EquilibriumKind::StableFocus => "stable focus",
            EquilibriumKind::UnstableFocus => "unstable focus",
            EquilibriumKind::CenterCandidate => "center-candidate",
            EquilibriumKind::Degenerate => "degenerate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Equilibrium {
    pub location: [f64; 2],
    pub jacobian: [[f64; 2]; 2],
    pub trace: f64,
    pub determinant: f64,
    pub kind: EquilibriumKind,
}

impl Equilibrium {
    pub fn from_jacobian(location: [f64; 2], jacobian: [[f64; 2]; 2]) -> Self {
        let trace = jacobian[0][0] + jacobian[1][1];
        let determinant = jacobian[0][0] * jacobian[1][1] - jacobian[0][1] * jacobian[1][0];
        Self {
            location,
            jacobian,
            trace,
            determinant,
            kind: classify(trace, determinant),
        }
    }
}

pub fn classify(trace: f64, determinant: f64) -> EquilibriumKind {
    if determinant.abs() <= CLASSIFY_TOL {
        EquilibriumKind::Degenerate
    } else if determinant < 0.0 {
        EquilibriumKind::Saddle
    } else if trace.abs() <= CLASSIFY_TOL {
        EquilibriumKind::CenterCandidate
    } else {
        let node = trace * trace - 4.0 * determinant >= 0.0;
        match (node, trace < 0.0) {
            (true, true) => EquilibriumKind::StableNode,
            (true, false) => EquilibriumKind::UnstableNode,
            (false, true) => EquilibriumKind::StableFocus,
            (false, false) => EquilibriumKind::UnstableFocus,
        }
    }
}

/// `poly(x, 0)` of a parameter-free polynomial as an exact univariate polynomial.
pub(crate) fn restrict_to_x_axis(poly: &ParamPolynomial) -> Result<UPoly> {
    let degree = poly.degree() as usize;
    let mut coeffs = vec![BigRational::from_integer(0.into()); degree + 1];
    for (&(i, j), c) in poly.terms() {
        if !c.is_constant() {
            return Err(Error::FreeParameters(poly.parameters().into_iter().collect()));
        }
        if j == 0 {
            coeffs[i as usize] = c.constant_part().clone();
        }
    }
    Ok(UPoly::new(coeffs))
}

fn exact_bound(v: f64) -> Result<BigRational> {
    BigRational::from_float(v).ok_or_else(|| Error::Invalid("region bounds must be finite".into()))
}

/// Every equilibrium inside `region`, classified and sorted by x.
///
/// With `P = y` the search is the exact real-root isolation of `Q(x, 0)`; otherwise boxes are
/// subdivided while interval bounds of both components straddle zero and the survivors are
/// polished by damped Newton.
pub fn find_equilibria(
    sys: &PlanarSystem,
    a: &ParameterAssignment,
    region: &Region,
) -> Result<Vec<Equilibrium>> {
    let p = sys.p.substitute(a)?;
    let q = sys.q.substitute(a)?;
    let field = Field::from_exact(&p, &q)?;
    let mut points: Vec<[f64; 2]> = if p == ParamPolynomial::y() {
        if !(region.y.0..=region.y.1).contains(&0.0) {
            Vec::new()
        } else {
            let on_axis = restrict_to_x_axis(&q)?;
            if on_axis.is_zero() {
                return Err(Error::Invalid("the x-axis consists of equilibria".into()));
            }
            on_axis
                .real_roots_in(&exact_bound(region.x.0)?, &exact_bound(region.x.1)?)
                .into_iter()
                .map(|x| [x, 0.0])
                .collect()
        }
    } else {
        subdivide(&p, &q, &field, region)?
    };
    points.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    Ok(points
        .into_iter()
        .map(|pt| Equilibrium::from_jacobian(pt, field.jacobian(pt[0], pt[1])))
        .collect())
}

#[derive(Debug, Clone, Copy)]
struct Interval(f64, f64);

impl Interval {
    fn pow(self, n: u32) -> Interval {
        if n == 0 {
            return Interval(1.0, 1.0);
        }
        let (a, b) = (self.0.powi(n as i32), self.1.powi(n as i32));
        if n % 2 == 1 {
            Interval(a, b)
        } else if self.0 >= 0.0 {
            Interval(a, b)
        } else if self.1 <= 0.0 {
            Interval(b, a)
        } else {
            Interval(0.0, a.max(b))
        }
    }

    fn mul(self, o: Interval) -> Interval {
        let c = [self.0 * o.0, self.0 * o.1, self.1 * o.0, self.1 * o.1];
        Interval(
            c.iter().copied().fold(f64::INFINITY, f64::min),
            c.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        )
    }
}

fn interval_eval(terms: &[(u32, u32, f64)], x: Interval, y: Interval) -> Interval {
    let mut acc = Interval(0.0, 0.0);
    for &(i, j, c) in terms {
        let m = x.pow(i).mul(y.pow(j)).mul(Interval(c, c));
        acc = Interval(acc.0 + m.0, acc.1 + m.1);
    }
    let pad = 1e-12 * (acc.0.abs() + acc.1.abs()) + 1e-300;
    Interval(acc.0 - pad, acc.1 + pad)
}

const MAX_DEPTH: u32 = 16;
const MAX_CANDIDATES: usize = 4096;

fn subdivide(p: &ParamPolynomial, q: &ParamPolynomial, field: &Field, region: &Region) -> Result<Vec<[f64; 2]>> {
    use super::field::VectorField;
    let pt = p.float_terms()?;
    let qt = q.float_terms()?;
    let mut stack = vec![(region.x, region.y, 0u32)];
    let mut leaves = Vec::new();
    while let Some((bx, by, depth)) = stack.pop() {
        let (ix, iy) = (Interval(bx.0, bx.1), Interval(by.0, by.1));
        let vp = interval_eval(&pt, ix, iy);
        let vq = interval_eval(&qt, ix, iy);
        if vp.0 > 0.0 || vp.1 < 0.0 || vq.0 > 0.0 || vq.1 < 0.0 {
            continue;
        }
        if depth == MAX_DEPTH {
            leaves.push([(bx.0 + bx.1) / 2.0, (by.0 + by.1) / 2.0]);
            if leaves.len() > MAX_CANDIDATES {
                return Err(Error::RegionTooCoarse { boxes: leaves.len() });
            }
            continue;
        }
        let mx = (bx.0 + bx.1) / 2.0;
        let my = (by.0 + by.1) / 2.0;
        for sx in [(bx.0, mx), (mx, bx.1)] {
            for sy in [(by.0, my), (my, by.1)] {
                stack.push((sx, sy, depth + 1));
            }
        }
    }
    let scale = (region.x.1 - region.x.0).max(region.y.1 - region.y.0);
    let mut found: Vec<[f64; 2]> = Vec::new();
    for start in leaves {
        let Some(root) = newton(field, start) else { continue };
        let [fx, fy] = field.eval(root[0], root[1]);
        if fx.abs().max(fy.abs()) > 1e-9 || !region.contains(root) {
            continue;
        }
        if found
            .iter()
            .all(|f| (f[0] - root[0]).abs().max((f[1] - root[1]).abs()) > 1e-7 * (1.0 + scale))
        {
            found.push(root);
        }
    }
    Ok(found)
}

/// Damped Newton on `(P, Q) = 0`.
pub(crate) fn newton(field: &Field, start: [f64; 2]) -> Option<[f64; 2]> {
    use super::field::VectorField;
    let norm = |v: [f64; 2]| v[0].abs().max(v[1].abs());
    let mut z = start;
    let mut f = field.eval(z[0], z[1]);
    for _ in 0..100 {
        if norm(f) <= 1e-15 * (1.0 + norm(z)) {
            return Some(z);
        }
        let j = field.jacobian(z[0], z[1]);
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let dx = (j[1][1] * f[0] - j[0][1] * f[1]) / det;
        let dy = (-j[1][0] * f[0] + j[0][0] * f[1]) / det;
        let mut lambda = 1.0;
        loop {
            let cand = [z[0] - lambda * dx, z[1] - lambda * dy];
            let fc = field.eval(cand[0], cand[1]);
            if norm(fc) < norm(f) || lambda < 1e-6 {
                let step = lambda * dx.abs().max(dy.abs());
                z = cand;
                f = fc;
                if step <= 1e-15 * (1.0 + norm(z)) {
                    return Some(z);
                }
                break;
            }
            lambda /= 2.0;
        }
    }
    (norm(f) <= 1e-10).then_some(z)
}
