//! Singular points on the Poincaré circle.
//!
//! Directions are the real zeros of `x·Q_d − y·P_d`. Each one is examined in the chart
//! `U1` (`u = y/x`, `v = 1/x`) or, for the vertical direction, `U2` (`u = x/y`, `v = 1/y`),
//! where the point sits at `v = 0` and the linearization is triangular.

use std::f64::consts::PI;

use num::{BigRational, Zero};

use super::field::{Field, VectorField};
use super::poly::{ParamCoefficient, ParamPolynomial, ParameterAssignment};
use super::system::PlanarSystem;
use super::upoly::UPoly;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InfinityKind {
    Node,
    Saddle,
    Degenerate,
}

impl InfinityKind {
    pub fn label(self) -> &'static str {
        match self {
            InfinityKind::Node => "node",
            InfinityKind::Saddle => "saddle",
            InfinityKind::Degenerate => "degenerate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Chart {
    U1,
    U2,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct InfinitySingularity {
    /// Unit representative of the direction pair `±direction`.
    pub direction: [f64; 2],
    pub kind: InfinityKind,
    pub hyperbolic: bool,
    pub chart: Chart,
    /// Eigenvalues of the chart linearization (`∂u'/∂u`, `∂v'/∂v`).
    pub eigenvalues: [f64; 2],
    /// Topological index from winding, computed when the linearization is degenerate.
    pub index: Option<i32>,
}

impl InfinitySingularity {
    pub fn is_x_axis(&self) -> bool {
        self.direction[1].abs() < 1e-14
    }

    pub fn is_y_axis(&self) -> bool {
        self.direction[0].abs() < 1e-14
    }
}

const EIG_TOL: f64 = 1e-12;

fn top_forms(p: &ParamPolynomial, q: &ParamPolynomial) -> (u32, ParamPolynomial, ParamPolynomial) {
    let d = p.degree().max(q.degree());
    (d, p.homogeneous_part(d), q.homogeneous_part(d))
}

fn push(poly: &mut ParamPolynomial, i: u32, j: u32, c: &BigRational) {
    poly.add_term((i, j), &ParamCoefficient::constant(c.clone()));
}

/// Chart field in `(u, v)`, with `u` stored as the first variable.
fn chart_field(p: &ParamPolynomial, q: &ParamPolynomial, d: u32, chart: Chart) -> (ParamPolynomial, ParamPolynomial) {
    let (mut du, mut dv) = (ParamPolynomial::zero(), ParamPolynomial::zero());
    let (lead, other) = match chart {
        Chart::U1 => (p, q),
        Chart::U2 => (q, p),
    };
    // U1: u' = Q~ - u P~, v' = -v P~ with P~ = Σ c u^j v^(d-i-j).
    // U2: u' = P~ - u Q~, v' = -v Q~ with P~ = Σ c u^i v^(d-i-j).
    let pick = |i: u32, j: u32| match chart {
        Chart::U1 => j,
        Chart::U2 => i,
    };
    for (&(i, j), c) in other.terms() {
        push(&mut du, pick(i, j), d - i - j, c.constant_part());
    }
    for (&(i, j), c) in lead.terms() {
        let c = c.constant_part();
        push(&mut du, pick(i, j) + 1, d - i - j, &-c.clone());
        push(&mut dv, pick(i, j), d + 1 - i - j, &-c.clone());
    }
    (du, dv)
}

/// Classify the singular points at infinity of the assigned system.
pub fn classify_infinity(sys: &PlanarSystem, a: &ParameterAssignment) -> Result<Vec<InfinitySingularity>> {
    let p = sys.p.substitute(a)?;
    let q = sys.q.substitute(a)?;
    classify_exact(&p, &q)
}

/// As [`classify_infinity`] for parameter-free polynomials.
pub fn classify_exact(p: &ParamPolynomial, q: &ParamPolynomial) -> Result<Vec<InfinitySingularity>> {
    if !p.is_parameter_free() || !q.is_parameter_free() {
        let mut names = p.parameters();
        names.extend(q.parameters());
        return Err(Error::FreeParameters(names.into_iter().collect()));
    }
    let (d, pd, qd) = top_forms(p, q);
    // G(1, t) = Q_d(1, t) - t P_d(1, t).
    let mut g = vec![BigRational::zero(); d as usize + 2];
    for (&(_, j), c) in qd.terms() {
        g[j as usize] += c.constant_part();
    }
    for (&(_, j), c) in pd.terms() {
        g[j as usize + 1] -= c.constant_part();
    }
    let g = UPoly::new(g);
    if g.is_zero() {
        return Err(Error::ZeroTopForm);
    }
    let vertical = g.degree() != Some(d as usize + 1);

    let mut out = Vec::new();
    let roots = g.real_roots();
    if !roots.is_empty() {
        let (du, dv) = chart_field(p, q, d, Chart::U1);
        let field = Field::from_exact(&du, &dv)?;
        for (k, &t) in roots.iter().enumerate() {
            let gap = neighbour_gap(&roots, k);
            let n = (1.0 + t * t).sqrt();
            out.push(examine(&field, t, gap, [1.0 / n, t / n], Chart::U1));
        }
    }
    if vertical {
        let (du, dv) = chart_field(p, q, d, Chart::U2);
        let field = Field::from_exact(&du, &dv)?;
        // In U2 the other directions sit at u = 1/t.
        let inv: Vec<f64> = roots.iter().filter(|t| **t != 0.0).map(|t| 1.0 / t).collect();
        let gap = inv.iter().map(|u| u.abs()).fold(f64::INFINITY, f64::min);
        out.push(examine(&field, 0.0, gap, [0.0, 1.0], Chart::U2));
    }
    Ok(out)
}

fn neighbour_gap(roots: &[f64], k: usize) -> f64 {
    let mut gap = f64::INFINITY;
    if k > 0 {
        gap = gap.min(roots[k] - roots[k - 1]);
    }
    if k + 1 < roots.len() {
        gap = gap.min(roots[k + 1] - roots[k]);
    }
    gap
}

fn examine(field: &Field, u0: f64, gap: f64, direction: [f64; 2], chart: Chart) -> InfinitySingularity {
    let j = field.jacobian(u0, 0.0);
    let eigenvalues = [j[0][0], j[1][1]];
    let hyperbolic = eigenvalues.iter().all(|e| e.abs() > EIG_TOL);
    let (kind, index) = if hyperbolic {
        let kind = if eigenvalues[0] * eigenvalues[1] > 0.0 {
            InfinityKind::Node
        } else {
            InfinityKind::Saddle
        };
        (kind, None)
    } else {
        let r = (gap / 4.0).min(1e-2);
        let index = match (winding_index(field, u0, r), winding_index(field, u0, r / 8.0)) {
            (Some(a), Some(b)) if a == b => Some(a),
            _ => None,
        };
        let kind = if index == Some(-1) {
            InfinityKind::Saddle
        } else {
            InfinityKind::Degenerate
        };
        (kind, index)
    };
    InfinitySingularity {
        direction,
        kind,
        hyperbolic,
        chart,
        eigenvalues,
        index,
    }
}

/// Index of the chart field on a circle of radius `r` around `(u0, 0)`, with arcs split
/// until the field direction turns by less than π/8 on each piece.
fn winding_index(field: &Field, u0: f64, r: f64) -> Option<i32> {
    let angle_at = |theta: f64| {
        let [a, b] = field.eval(u0 + r * theta.cos(), r * theta.sin());
        (a != 0.0 || b != 0.0).then(|| b.atan2(a))
    };
    let wrap = |d: f64| (d + PI).rem_euclid(2.0 * PI) - PI;
    let mut total = 0.0;
    let n = 256;
    for k in 0..n {
        let (t0, t1) = (2.0 * PI * k as f64 / n as f64, 2.0 * PI * (k + 1) as f64 / n as f64);
        let mut stack = vec![(t0, t1, angle_at(t0)?, angle_at(t1)?, 0u32)];
        while let Some((a, b, fa, fb, depth)) = stack.pop() {
            let step = wrap(fb - fa);
            if step.abs() < PI / 8.0 || depth > 40 {
                total += step;
                continue;
            }
            let m = (a + b) / 2.0;
            let fm = angle_at(m)?;
            stack.push((m, b, fm, fb, depth + 1));
            stack.push((a, m, fa, fm, depth + 1));
        }
    }
    let w = total / (2.0 * PI);
    ((w - w.round()).abs() < 0.1).then_some(w.round() as i32)
}
