//! Return maps on x-axis sections, limit-cycle detection and classification.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrate::{
    integrate, run_to_crossing, Anchor, Crossing, IntegratorConfig, Section, TerminationReason,
};
use crate::polysys::{Equilibrium, Instance};

/// Multiplier band around 1 treated as non-hyperbolic.
pub const MULTIPLIER_TAU: f64 = 1e-3;
/// Displacement minima below this without a sign change are semistable candidates.
pub const SEMISTABLE_THRESHOLD: f64 = 1e-7;
/// Relative disagreement of the two multiplier estimates that marks a cycle unresolved.
pub const MULTIPLIER_AGREEMENT: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReturnOutcome {
    Ok,
    Escape,
    EquilibriumApproach,
    LeftSection,
    TimeOut,
    /// The integrator reported step-size underflow.
    Stiff,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReturnSample {
    pub s: f64,
    pub image: f64,
    pub displacement: f64,
    pub period: f64,
    pub arc_length: f64,
    pub divergence_integral: f64,
    pub outcome: ReturnOutcome,
}

impl ReturnSample {
    pub fn is_ok(&self) -> bool {
        self.outcome == ReturnOutcome::Ok
    }

    fn failed(s: f64, outcome: ReturnOutcome) -> Self {
        Self {
            s,
            image: f64::NAN,
            displacement: f64::NAN,
            period: f64::NAN,
            arc_length: f64::NAN,
            divergence_integral: f64::NAN,
            outcome,
        }
    }
}

/// First return to the line `y = 0` in the section's direction, starting at section
/// coordinate `s`.
pub fn return_map(inst: &Instance, section: &Section, s: f64, config: &IntegratorConfig) -> Result<ReturnSample> {
    let x0 = section.point(s);
    if !section.contains(x0) {
        return Err(Error::InvalidSection(format!("coordinate {s} is outside ({}, {})", section.a, section.b)));
    }
    let crossing = match run_to_crossing(inst, [x0, 0.0], section.sign, config, |_| true) {
        Ok(c) => c,
        Err(Error::StepUnderflow { .. }) => return Ok(ReturnSample::failed(s, ReturnOutcome::Stiff)),
        Err(e) => return Err(e),
    };
    Ok(match crossing {
        Crossing::Hit(ev) if section.contains(ev.point[0]) => {
            let image = section.offset(ev.point[0]);
            ReturnSample {
                s,
                image,
                displacement: image - s,
                period: ev.time,
                arc_length: ev.arc_length,
                divergence_integral: ev.divergence_integral,
                outcome: ReturnOutcome::Ok,
            }
        }
        Crossing::Hit(_) => ReturnSample::failed(s, ReturnOutcome::LeftSection),
        Crossing::Stopped(t) => ReturnSample::failed(
            s,
            match t.reason {
                TerminationReason::Escape => ReturnOutcome::Escape,
                TerminationReason::EquilibriumApproach => ReturnOutcome::EquilibriumApproach,
                _ => ReturnOutcome::TimeOut,
            },
        ),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stability {
    Stable,
    Unstable,
    SemistableCandidate,
}

impl Stability {
    pub fn from_multiplier(m: f64) -> Self {
        if m < 1.0 - MULTIPLIER_TAU {
            Stability::Stable
        } else if m > 1.0 + MULTIPLIER_TAU {
            Stability::Unstable
        } else {
            Stability::SemistableCandidate
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Stability::Stable => "stable",
            Stability::Unstable => "unstable",
            Stability::SemistableCandidate => "semistable-candidate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Multiplicity {
    Simple,
    DoubleCandidate,
    Unresolved,
}

impl Multiplicity {
    pub fn label(self) -> &'static str {
        match self {
            Multiplicity::Simple => "simple",
            Multiplicity::DoubleCandidate => "double-candidate",
            Multiplicity::Unresolved => "unresolved",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MultiplierEstimate {
    /// `exp ∮ div f dt`.
    pub divergence: f64,
    /// Central difference of the return map.
    pub finite_difference: f64,
}

impl MultiplierEstimate {
    pub fn relative_gap(&self) -> f64 {
        (self.divergence - self.finite_difference).abs() / self.divergence.abs().max(f64::MIN_POSITIVE)
    }

    pub fn agree(&self, rel: f64) -> bool {
        self.relative_gap() <= rel
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Enclosed {
    pub location: [f64; 2],
    /// Winding number of the orbit around the point, 0 or 1.
    pub winding: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitCycle {
    pub section: Section,
    /// Fixed point as a section coordinate; also the cycle's amplitude.
    pub s: f64,
    /// x-coordinate of the fixed point.
    pub x: f64,
    pub displacement: f64,
    pub period: f64,
    pub multiplier: MultiplierEstimate,
    pub stability: Stability,
    pub multiplicity: Multiplicity,
    pub enclosed: Vec<Enclosed>,
    /// +1 counterclockwise, -1 clockwise, 0 if unknown.
    pub orientation: i8,
    pub arc_length: f64,
}

impl LimitCycle {
    pub fn amplitude(&self) -> f64 {
        self.s
    }

    /// Primary multiplier estimate.
    pub fn m(&self) -> f64 {
        self.multiplier.divergence
    }

    /// Windings around each equilibrium, in equilibrium order.
    pub fn signature(&self) -> Vec<i32> {
        self.enclosed.iter().map(|e| e.winding).collect()
    }

    /// `"1,0,1"`-style winding signature.
    pub fn signature_text(&self) -> String {
        self.signature().iter().map(i32::to_string).collect::<Vec<_>>().join(",")
    }
}

/// Spacing of the initial grid of section coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Spacing {
    Geometric,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSpec {
    pub count: usize,
    pub spacing: Spacing,
    pub min: f64,
    /// Upper end; the section length when `None`.
    pub max: Option<f64>,
    /// Additional coordinates merged into the grid.
    pub extra: Vec<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            count: 64,
            spacing: Spacing::Geometric,
            min: 1e-3,
            max: None,
            extra: Vec::new(),
        }
    }
}

impl GridSpec {
    pub fn geometric(count: usize) -> Self {
        Self {
            count,
            ..Self::default()
        }
    }

    pub fn with_range(mut self, min: f64, max: f64) -> Self {
        self.min = min;
        self.max = Some(max);
        self
    }

    pub fn with_extra(mut self, extra: impl IntoIterator<Item = f64>) -> Self {
        self.extra.extend(extra);
        self
    }

    /// Sorted, deduplicated coordinates strictly inside the section.
    pub fn points(&self, section: &Section) -> Result<Vec<f64>> {
        if self.count < 8 {
            return Err(Error::Invalid(format!("grid needs at least 8 points, got {}", self.count)));
        }
        let len = section.length();
        let hi = self.max.unwrap_or(len).min(len * (1.0 - 1e-9));
        let lo = self.min;
        if !(lo > 0.0 && lo < hi) {
            return Err(Error::Invalid(format!("grid range ({lo}, {hi}) is empty")));
        }
        let n = self.count;
        let mut pts: Vec<f64> = (0..n)
            .map(|i| {
                let f = i as f64 / (n - 1) as f64;
                match self.spacing {
                    Spacing::Geometric => lo * (hi / lo).powf(f),
                    Spacing::Uniform => lo + (hi - lo) * f,
                }
            })
            .chain(self.extra.iter().copied().filter(|s| *s > 0.0 && *s < len))
            .collect();
        pts.sort_by(f64::total_cmp);
        pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * b.abs());
        Ok(pts)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CycleReport {
    pub section: Section,
    /// Cycles from displacement sign changes, ordered by `s`.
    pub cycles: Vec<LimitCycle>,
    /// Near-double roots without a sign change; never counted.
    pub semistable: Vec<LimitCycle>,
    /// Every displacement on the grid is at the noise level.
    pub center_candidate: bool,
    pub samples: Vec<ReturnSample>,
    pub diagnostics: Vec<String>,
}

impl CycleReport {
    pub fn count(&self) -> usize {
        self.cycles.len()
    }

    pub fn non_ok(&self) -> impl Iterator<Item = &ReturnSample> {
        self.samples.iter().filter(|s| !s.is_ok())
    }
}

/// Grid value of |d| below which a whole grid counts as a center.
fn center_threshold(cfg: &IntegratorConfig, s: f64) -> f64 {
    100.0 * (cfg.atol + cfg.rtol * s.max(1.0))
}

/// Scan the displacement on a grid, refine every sign change and every suspicious minimum.
pub fn find_cycles(inst: &Instance, section: &Section, grid: &GridSpec, config: &IntegratorConfig) -> Result<CycleReport> {
    config.validate()?;
    let points = grid.points(section)?;
    let samples: Vec<ReturnSample> = points
        .par_iter()
        .map(|&s| return_map(inst, section, s, config))
        .collect::<Result<_>>()?;
    analyse_samples(inst, section, samples, config)
}

fn analyse_samples(
    inst: &Instance,
    section: &Section,
    samples: Vec<ReturnSample>,
    config: &IntegratorConfig,
) -> Result<CycleReport> {
    let mut diagnostics = Vec::new();
    for s in samples.iter().filter(|s| !s.is_ok()) {
        diagnostics.push(format!("s = {:.6e}: {:?}", s.s, s.outcome));
    }
    let ok: Vec<&ReturnSample> = samples.iter().filter(|s| s.is_ok()).collect();
    let center_candidate = ok.len() >= 2 && ok.iter().all(|r| r.displacement.abs() <= center_threshold(config, r.s));
    let mut report = CycleReport {
        section: *section,
        cycles: Vec::new(),
        semistable: Vec::new(),
        center_candidate,
        samples: Vec::new(),
        diagnostics,
    };
    if center_candidate {
        report.samples = samples;
        return Ok(report);
    }

    let d = |s: f64| -> Option<ReturnSample> {
        return_map(inst, section, s, config).ok().filter(ReturnSample::is_ok)
    };
    let mut roots: Vec<ReturnSample> = Vec::new();
    let mut minima: Vec<ReturnSample> = Vec::new();
    let n = samples.len();
    for i in 0..n {
        let cur = &samples[i];
        if !cur.is_ok() {
            continue;
        }
        if cur.displacement == 0.0 {
            roots.push(*cur);
            continue;
        }
        if i + 1 < n && samples[i + 1].is_ok() {
            let next = &samples[i + 1];
            if next.displacement != 0.0 && cur.displacement.signum() != next.displacement.signum() {
                match refine_root(&d, *cur, *next) {
                    Some(r) => roots.push(r),
                    None => report
                        .diagnostics
                        .push(format!("root in ({:.6e}, {:.6e}) could not be refined", cur.s, next.s)),
                }
            }
        }
        if i > 0 && i + 1 < n && samples[i - 1].is_ok() && samples[i + 1].is_ok() {
            let (l, r) = (&samples[i - 1], &samples[i + 1]);
            let sg = cur.displacement.signum();
            let same = l.displacement.signum() == sg && r.displacement.signum() == sg;
            let dip = cur.displacement.abs() < l.displacement.abs() && cur.displacement.abs() < r.displacement.abs();
            if same && dip {
                match refine_minimum(&d, *l, *cur, *r) {
                    MinimumSearch::SignChange(a, b, c) => {
                        for (p, q) in [(a, b), (b, c)] {
                            if let Some(root) = refine_root(&d, p, q) {
                                roots.push(root);
                            }
                        }
                    }
                    MinimumSearch::Minimum(m) => {
                        let noise = 10.0 * center_threshold(config, m.s) / 100.0;
                        if m.displacement.abs() < SEMISTABLE_THRESHOLD
                            && l.displacement.abs() > noise
                            && r.displacement.abs() > noise
                        {
                            minima.push(m);
                        }
                    }
                    MinimumSearch::Failed => {}
                }
            }
        }
    }
    roots.sort_by(|a, b| a.s.total_cmp(&b.s));
    roots.dedup_by(|a, b| (a.s - b.s).abs() <= 1e-9 * (1.0 + b.s));
    let promoted: Vec<Result<LimitCycle>> = roots.par_iter().map(|r| promote(inst, section, r, config)).collect();
    let top = section.length() * (1.0 - 1e-9);
    for c in promoted {
        match c {
            Ok(c) if c.stability == Stability::SemistableCandidate && !sign_changes_across(&d, c.s, top) => {
                let mut c = c;
                c.multiplicity = Multiplicity::DoubleCandidate;
                report.semistable.push(c);
            }
            Ok(c) => report.cycles.push(c),
            Err(e) => report.diagnostics.push(format!("cycle rejected: {e}")),
        }
    }
    for m in minima {
        match promote(inst, section, &m, config) {
            Ok(mut c) => {
                c.stability = Stability::SemistableCandidate;
                c.multiplicity = Multiplicity::DoubleCandidate;
                report.semistable.push(c);
            }
            Err(e) => report.diagnostics.push(format!("semistable candidate rejected: {e}")),
        }
    }
    report.semistable.sort_by(|a, b| a.s.total_cmp(&b.s));
    report.semistable.dedup_by(|a, b| {
        let close = (a.s - b.s).abs() <= 0.1 * b.s;
        if close && a.displacement.abs() < b.displacement.abs() {
            std::mem::swap(a, b);
        }
        close
    });
    report.samples = samples;
    Ok(report)
}

/// Whether `d` takes opposite signs at `s(1 ± 0.1)`.
fn sign_changes_across(d: &impl Fn(f64) -> Option<ReturnSample>, s: f64, top: f64) -> bool {
    match (d(0.9 * s), d((1.1 * s).min(top))) {
        (Some(l), Some(r)) => l.displacement * r.displacement < 0.0,
        _ => true,
    }
}

/// Bisection first, then Illinois, on a sign-changing pair.
pub(crate) fn refine_root(
    d: &(impl Fn(f64) -> Option<ReturnSample> + ?Sized),
    a: ReturnSample,
    b: ReturnSample,
) -> Option<ReturnSample> {
    let (mut lo, mut hi) = if a.s < b.s { (a, b) } else { (b, a) };
    let done = |r: &ReturnSample| r.displacement.abs() <= 1e-10 * (1.0 + r.s.abs());
    let mut best = if lo.displacement.abs() < hi.displacement.abs() { lo } else { hi };
    if done(&best) {
        return Some(best);
    }
    for _ in 0..4 {
        let mid = d(0.5 * (lo.s + hi.s))?;
        if mid.displacement.abs() < best.displacement.abs() {
            best = mid;
        }
        if mid.displacement == 0.0 || done(&mid) {
            return Some(mid);
        }
        if mid.displacement.signum() == lo.displacement.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (mut flo, mut fhi) = (lo.displacement, hi.displacement);
    let mut side = 0i8;
    for _ in 0..100 {
        if hi.s - lo.s <= 1e-15 * (1.0 + hi.s.abs()) {
            break;
        }
        let mut s = (lo.s * fhi - hi.s * flo) / (fhi - flo);
        if !(s > lo.s && s < hi.s) {
            s = 0.5 * (lo.s + hi.s);
        }
        let r = d(s)?;
        if r.displacement.abs() < best.displacement.abs() {
            best = r;
        }
        if r.displacement == 0.0 || done(&r) {
            return Some(r);
        }
        if r.displacement.signum() == lo.displacement.signum() {
            lo = r;
            flo = r.displacement;
            if side == -1 {
                fhi *= 0.5;
            }
            side = -1;
        } else {
            hi = r;
            fhi = r.displacement;
            if side == 1 {
                flo *= 0.5;
            }
            side = 1;
        }
    }
    Some(best)
}

enum MinimumSearch {
    SignChange(ReturnSample, ReturnSample, ReturnSample),
    Minimum(ReturnSample),
    Failed,
}

/// Golden-section search for the minimum of `σ·d` on `[l, r]` where `σ` is the common sign.
fn refine_minimum(
    d: &(impl Fn(f64) -> Option<ReturnSample> + ?Sized),
    l: ReturnSample,
    mid: ReturnSample,
    r: ReturnSample,
) -> MinimumSearch {
    let sg = mid.displacement.signum();
    let g = 0.5 * (3.0 - 5f64.sqrt());
    let (mut a, mut b) = (l, r);
    let mut best = mid;
    let (mut x1, mut x2) = (a.s + g * (b.s - a.s), b.s - g * (b.s - a.s));
    let Some(mut f1) = d(x1) else { return MinimumSearch::Failed };
    let Some(mut f2) = d(x2) else { return MinimumSearch::Failed };
    for _ in 0..80 {
        for f in [f1, f2] {
            if f.displacement.signum() != sg && f.displacement != 0.0 {
                // l and r share the sign of the dip, so both halves bracket a root.
                return MinimumSearch::SignChange(l, f, r);
            }
            if f.displacement.abs() < best.displacement.abs() {
                best = f;
            }
        }
        if b.s - a.s <= 1e-10 * (1.0 + best.s) {
            break;
        }
        if sg * f1.displacement < sg * f2.displacement {
            b = f2;
            f2 = f1;
            x2 = x1;
            x1 = a.s + g * (b.s - a.s);
            let Some(v) = d(x1) else { return MinimumSearch::Failed };
            f1 = v;
        } else {
            a = f1;
            f1 = f2;
            x1 = x2;
            x2 = b.s - g * (b.s - a.s);
            let Some(v) = d(x2) else { return MinimumSearch::Failed };
            f2 = v;
        }
    }
    MinimumSearch::Minimum(best)
}

/// Both multiplier estimates at a fixed point sample.
pub fn multipliers(inst: &Instance, section: &Section, fixed: &ReturnSample, config: &IntegratorConfig) -> MultiplierEstimate {
    let divergence = fixed.divergence_integral.exp();
    let s = fixed.s;
    let room = (section.length() - s).min(s);
    let h = (1e-4 * (1.0 + s.abs())).min(0.1 * room);
    let at = |v: f64| return_map(inst, section, v, config).ok().filter(ReturnSample::is_ok);
    let finite_difference = match (at(s + h), at(s - h)) {
        (Some(p), Some(m)) => (p.image - m.image) / (2.0 * h),
        (Some(p), None) => (p.image - fixed.image) / h,
        (None, Some(m)) => (fixed.image - m.image) / h,
        (None, None) => f64::NAN,
    };
    MultiplierEstimate {
        divergence,
        finite_difference,
    }
}

/// Multiplier estimates of a detected cycle, recomputed from its fixed point.
pub fn cycle_multiplier(inst: &Instance, cycle: &LimitCycle, config: &IntegratorConfig) -> Result<MultiplierEstimate> {
    let fixed = return_map(inst, &cycle.section, cycle.s, config)?;
    if !fixed.is_ok() {
        return Err(Error::SeedNotVerified {
            expected: cycle.s,
            found: None,
        });
    }
    Ok(multipliers(inst, &cycle.section, &fixed, config))
}

/// Builds a [`LimitCycle`] from a refined displacement root.
pub fn promote(inst: &Instance, section: &Section, root: &ReturnSample, config: &IntegratorConfig) -> Result<LimitCycle> {
    let multiplier = multipliers(inst, section, root, config);
    let m = multiplier.divergence;
    let stability = Stability::from_multiplier(m);
    let multiplicity = if !multiplier.agree(MULTIPLIER_AGREEMENT) {
        Multiplicity::Unresolved
    } else if stability == Stability::SemistableCandidate {
        Multiplicity::DoubleCandidate
    } else {
        Multiplicity::Simple
    };
    let x = section.point(root.s);
    let (enclosed, orientation) = orbit_enclosure(inst, x, root.period, config)?;
    Ok(LimitCycle {
        section: *section,
        s: root.s,
        x,
        displacement: root.displacement,
        period: root.period,
        multiplier,
        stability,
        multiplicity,
        enclosed,
        orientation,
        arc_length: root.arc_length,
    })
}

/// Closed polyline of the orbit through `(x, 0)` sampled at steps of at most `period / 400`.
pub fn orbit_polyline(inst: &Instance, x: f64, period: f64, config: &IntegratorConfig) -> Result<Vec<[f64; 2]>> {
    let cfg = config.with_max_time(period).with_max_step(period / 400.0);
    let traj = integrate(inst, [x, 0.0], &cfg)?;
    Ok(traj.samples.iter().map(|&[_, x, y]| [x, y]).collect())
}

fn orbit_enclosure(inst: &Instance, x: f64, period: f64, config: &IntegratorConfig) -> Result<(Vec<Enclosed>, i8)> {
    let orbit = orbit_polyline(inst, x, period, config)?;
    let eqs: Vec<[f64; 2]> = inst.equilibria()?.iter().map(|e| e.location).collect();
    let raw = enclosure(&orbit, &eqs)?;
    let orientation = raw.iter().find(|w| **w != 0).map_or(0, |w| w.signum() as i8);
    let enclosed = eqs
        .iter()
        .zip(&raw)
        .map(|(&location, &w)| Enclosed {
            location,
            winding: w.abs(),
        })
        .collect();
    Ok((enclosed, orientation))
}

/// Signed winding number of a closed polyline around each point.
pub fn enclosure(orbit: &[[f64; 2]], points: &[[f64; 2]]) -> Result<Vec<i32>> {
    if orbit.len() < 3 {
        return Err(Error::OrbitNotClosed { gap: f64::INFINITY });
    }
    let scale = orbit.iter().fold(0.0f64, |m, p| m.max(p[0].abs()).max(p[1].abs()));
    let (first, last) = (orbit[0], orbit[orbit.len() - 1]);
    let gap = (first[0] - last[0]).hypot(first[1] - last[1]);
    if gap > 1e-6 * (1.0 + scale) {
        return Err(Error::OrbitNotClosed { gap });
    }
    let mut out = Vec::with_capacity(points.len());
    for (index, p) in points.iter().enumerate() {
        let mut total = 0.0;
        let n = orbit.len();
        for k in 0..n {
            // The last segment closes the polyline back to the first point.
            let a = orbit[k];
            let b = orbit[(k + 1) % n];
            let (ax, ay) = (a[0] - p[0], a[1] - p[1]);
            let (bx, by) = (b[0] - p[0], b[1] - p[1]);
            let distance = segment_distance(ax, ay, bx, by);
            if distance < 1e-6 {
                return Err(Error::PointOnOrbit { index, distance });
            }
            total += (ax * by - ay * bx).atan2(ax * bx + ay * by);
        }
        let w = total / (2.0 * PI);
        if (w - w.round()).abs() >= 0.1 {
            return Err(Error::WindingNotInteger { value: w });
        }
        out.push(w.round() as i32);
    }
    Ok(out)
}

/// Distance from the origin to the segment between two points.
fn segment_distance(ax: f64, ay: f64, bx: f64, by: f64) -> f64 {
    let (dx, dy) = (bx - ax, by - ay);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 { 0.0 } else { (-(ax * dx + ay * dy) / len2).clamp(0.0, 1.0) };
    (ax + t * dx).hypot(ay + t * dy)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FocusOrder {
    Order(u32),
    CenterLike,
    Unresolved,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FocusOrderEstimate {
    pub order: FocusOrder,
    /// Sign of the displacement near the focus: -1 attracting, +1 repelling.
    pub leading_sign: i8,
    pub exponent: f64,
    /// RMS residual of the fit of `ln |d|` against `ln s`.
    pub residual: f64,
    pub samples: Vec<(f64, f64)>,
}

const FIT_EXPONENT_TOL: f64 = 0.15;
const FIT_RESIDUAL_TOL: f64 = 0.05;

/// Order of a weak focus from the power law of its displacement.
///
/// The section runs right from the focus along the x-axis; the ladder is `base·2^-k` for
/// `k = 4..=12`, integrated at tolerances at least as tight as 1e-12 / 1e-15.
pub fn fine_focus_order(inst: &Instance, eq: &Equilibrium, config: &IntegratorConfig) -> Result<FocusOrderEstimate> {
    if eq.trace.abs() > 1e-10 || eq.determinant <= 0.0 {
        return Err(Error::NotFineFocus { trace: eq.trace });
    }
    if eq.location[1] != 0.0 {
        return Err(Error::InvalidSection("focus is not on the x-axis".into()));
    }
    let x0 = eq.location[0];
    let next = inst
        .equilibria()?
        .iter()
        .map(|e| e.location[0])
        .filter(|&x| x > x0)
        .fold(f64::INFINITY, f64::min);
    let length = if next.is_finite() { next - x0 } else { 1.0 };
    let section = Section::detect(inst, x0, x0 + length, Anchor::Low)?;
    let base = (0.5 * length).min(0.5);
    let cfg = config.with_tolerances(config.rtol.min(1e-12), config.atol.min(1e-15));
    let ladder: Vec<f64> = (4..=12).map(|k| base * 2f64.powi(-k)).collect();
    let samples: Vec<ReturnSample> = ladder
        .par_iter()
        .map(|&s| return_map(inst, &section, s, &cfg))
        .collect::<Result<_>>()?;
    let pairs: Vec<(f64, f64)> = samples.iter().filter(|r| r.is_ok()).map(|r| (r.s, r.displacement)).collect();
    let noise = |s: f64| 100.0 * (cfg.atol + cfg.rtol * s);
    let usable: Vec<(f64, f64)> = pairs.iter().copied().filter(|&(s, d)| d.abs() > noise(s)).collect();
    let mut est = FocusOrderEstimate {
        order: FocusOrder::Unresolved,
        leading_sign: 0,
        exponent: f64::NAN,
        residual: f64::NAN,
        samples: pairs.clone(),
    };
    if !pairs.is_empty() && usable.is_empty() {
        est.order = FocusOrder::CenterLike;
        return Ok(est);
    }
    if usable.len() < 4 {
        return Ok(est);
    }
    let sign = usable[0].1.signum();
    if usable.iter().any(|&(_, d)| d.signum() != sign) {
        return Ok(est);
    }
    let (slope, residual) = log_fit(&usable);
    est.leading_sign = sign as i8;
    est.exponent = slope;
    est.residual = residual;
    let n = ((slope - 1.0) / 2.0).round();
    if n >= 1.0 && (slope - (2.0 * n + 1.0)).abs() <= FIT_EXPONENT_TOL && residual < FIT_RESIDUAL_TOL {
        est.order = FocusOrder::Order(n as u32);
    }
    Ok(est)
}

/// Least-squares slope of `ln|d|` on `ln s` and the RMS residual.
fn log_fit(points: &[(f64, f64)]) -> (f64, f64) {
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.abs().ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - icpt - slope * x).powi(2)).sum();
    (slope, (rss / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polysys::{build_canonical, build_lienard, linear_center, Entry, ParameterAssignment};

    fn canonical1(mu1: f64, mu3: f64) -> Instance {
        Instance::new(&build_canonical(1).unwrap(), &ParameterAssignment::from_pairs([("mu1", mu1), ("mu3", mu3)]))
            .unwrap()
    }

    #[test]
    fn linear_center_return() {
        let inst = Instance::new(&linear_center(), &ParameterAssignment::new()).unwrap();
        let sec = Section::detect(&inst, 0.0, 1.0, Anchor::Low).unwrap();
        let r = return_map(&inst, &sec, 0.5, &IntegratorConfig::default()).unwrap();
        assert!(r.is_ok());
        assert!((r.image - 0.5).abs() < 1e-9);
        assert!(r.displacement.abs() < 1e-9);
        assert!((r.period - 2.0 * PI).abs() < 1e-9);
    }

    #[test]
    fn linear_center_has_no_cycles() {
        let inst = Instance::new(&linear_center(), &ParameterAssignment::new()).unwrap();
        let sec = Section::detect(&inst, 0.0, 1.0, Anchor::Low).unwrap();
        let rep = find_cycles(&inst, &sec, &GridSpec::geometric(16), &IntegratorConfig::default()).unwrap();
        assert!(rep.center_candidate);
        assert_eq!(rep.count(), 0);
    }

    #[test]
    fn unstable_focus_pushes_out() {
        let inst = canonical1(0.1, 0.0);
        let sec = Section::detect(&inst, 0.0, 1.0, Anchor::Low).unwrap();
        // Oracle: trace 0.1 and determinant 1 give eigenvalues 0.05 ± i·0.9987, an unstable focus.
        let eq = &inst.equilibria().unwrap()[0];
        let disc = eq.trace * eq.trace - 4.0 * eq.determinant;
        assert!(disc < 0.0 && eq.trace > 0.0);
        let r = return_map(&inst, &sec, 0.01, &IntegratorConfig::default()).unwrap();
        assert!(r.displacement > 0.0);
    }

    #[test]
    fn symmetric_center_displacements_vanish() {
        let sys = build_lienard(2, &[Entry::int(0), Entry::int(0), Entry::int(0)], &[Entry::int(1), Entry::int(1)]).unwrap();
        let inst = Instance::new(&sys, &ParameterAssignment::new()).unwrap();
        let sec = Section::detect(&inst, 0.0, 1.0, Anchor::Low).unwrap();
        for k in 0..20 {
            let s = 0.8 * 0.75f64.powi(k);
            let r = return_map(&inst, &sec, s, &IntegratorConfig::default()).unwrap();
            assert!(r.displacement.abs() <= 1e-8, "s = {s}: {}", r.displacement);
        }
    }

    #[test]
    fn stable_cycle_multipliers_agree() {
        let inst = canonical1(0.2, -1.0);
        let sec = Section::detect(&inst, 0.0, 10.0, Anchor::Low).unwrap();
        let rep = find_cycles(&inst, &sec, &GridSpec::default(), &IntegratorConfig::default()).unwrap();
        assert_eq!(rep.count(), 1);
        let c = &rep.cycles[0];
        assert_eq!(c.stability, Stability::Stable);
        assert!(c.multiplier.agree(1e-3), "{:?}", c.multiplier);
        assert_eq!(c.signature(), vec![1]);
        assert_eq!(c.orientation, -1);
    }

    #[test]
    fn winding_of_far_circle() {
        let circle: Vec<[f64; 2]> = (0..=400)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / 400.0;
                [5.0 + t.cos(), 5.0 + t.sin()]
            })
            .collect();
        assert_eq!(enclosure(&circle, &[[0.0, 0.0], [5.0, 5.0]]).unwrap(), vec![0, 1]);
        assert!(matches!(enclosure(&circle, &[[6.0, 5.0]]), Err(Error::PointOnOrbit { .. })));
        assert!(matches!(enclosure(&circle[..200], &[[0.0, 0.0]]), Err(Error::OrbitNotClosed { .. })));
    }

    #[test]
    fn linear_center_is_center_like() {
        let inst = Instance::new(&linear_center(), &ParameterAssignment::new()).unwrap();
        let eq = inst.equilibria().unwrap()[0].clone();
        let est = fine_focus_order(&inst, &eq, &IntegratorConfig::default()).unwrap();
        assert_eq!(est.order, FocusOrder::CenterLike);
    }

    #[test]
    fn weak_focus_of_order_one() {
        let inst = canonical1(0.0, -0.5);
        let eq = inst.equilibria().unwrap()[0].clone();
        let est = fine_focus_order(&inst, &eq, &IntegratorConfig::default()).unwrap();
        assert_eq!(est.order, FocusOrder::Order(1), "{est:?}");
        assert_eq!(est.leading_sign, -1);
        // Direct displacement signs agree with the fitted sign.
        assert!(est.samples.iter().all(|&(_, d)| d < 0.0));
    }

    #[test]
    fn strong_focus_rejected() {
        let inst = canonical1(0.3, -0.5);
        let eq = inst.equilibria().unwrap()[0].clone();
        assert!(matches!(
            fine_focus_order(&inst, &eq, &IntegratorConfig::default()),
            Err(Error::NotFineFocus { .. })
        ));
    }

    #[test]
    fn grid_needs_eight_points() {
        let inst = canonical1(0.3, -0.5);
        let sec = Section::detect(&inst, 0.0, 1.0, Anchor::Low).unwrap();
        assert!(GridSpec::geometric(7).points(&sec).is_err());
        let pts = GridSpec::geometric(8).with_extra([0.5]).points(&sec).unwrap();
        assert_eq!(pts.len(), 9);
        assert!(pts.windows(2).all(|w| w[0] < w[1]));
    }
}
