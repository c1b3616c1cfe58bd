//! Hopf scans, natural-parameter continuation of limit cycles, fold location and
//! staircase construction of nested cycles.

use rayon::prelude::*;
use serde::Serialize;

use crate::cycles::{
    find_cycles, multipliers, promote, refine_root, return_map, CycleReport, GridSpec, LimitCycle,
    MultiplierEstimate, ReturnOutcome, ReturnSample,
};
use crate::error::{Error, Result};
use crate::integrate::{Anchor, IntegratorConfig, Section};
use crate::polysys::{build_lienard, Entry, Instance, ParameterAssignment, PlanarSystem};

/// Amplitude below which a continued branch is considered to have collapsed.
pub const AMPLITUDE_FLOOR: f64 = 1e-4;
const HOPF_BISECTION_WIDTH: f64 = 1e-12;
const COLLISION_DISTANCE: f64 = 1e-6;

/// One-parameter slice of a system.
struct Slice<'a> {
    sys: &'a PlanarSystem,
    base: &'a ParameterAssignment,
    param: &'a str,
}

impl Slice<'_> {
    fn new<'a>(sys: &'a PlanarSystem, base: &'a ParameterAssignment, param: &'a str) -> Result<Slice<'a>> {
        if !sys.has_parameter(param) {
            return Err(Error::UnknownParameter(param.to_string()));
        }
        Ok(Slice { sys, base, param })
    }

    fn at(&self, p: f64) -> Result<Instance> {
        Instance::new(self.sys, &self.base.with(self.param, p))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HopfPoint {
    pub param: String,
    pub value: f64,
    pub location: [f64; 2],
    /// Sign of d(trace)/dp across the crossing.
    pub direction: i8,
}

struct EqState {
    location: [f64; 2],
    trace: f64,
    det: f64,
}

fn equilibria_at(slice: &Slice, p: f64) -> Result<Vec<EqState>> {
    let inst = slice.at(p)?;
    let eqs: Vec<EqState> = inst
        .equilibria()?
        .iter()
        .map(|e| EqState {
            location: e.location,
            trace: e.trace,
            det: e.determinant,
        })
        .collect();
    for (i, a) in eqs.iter().enumerate() {
        for b in &eqs[i + 1..] {
            if dist(a.location, b.location) < COLLISION_DISTANCE {
                return Err(Error::EquilibriumCollision {
                    param: slice.param.to_string(),
                    value: p,
                });
            }
        }
    }
    Ok(eqs)
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn nearest(eqs: &[EqState], at: [f64; 2]) -> Option<&EqState> {
    eqs.iter().min_by(|a, b| dist(a.location, at).total_cmp(&dist(b.location, at)))
}

/// Parameter values in `interval` where an antisaddle's trace changes sign.
///
/// The interval is sampled at `steps + 1` points; each sign change is bisected to a
/// width of 1e-12. Equilibria are matched between samples by position.
pub fn hopf_scan(
    sys: &PlanarSystem,
    a: &ParameterAssignment,
    param: &str,
    interval: (f64, f64),
    steps: usize,
) -> Result<Vec<HopfPoint>> {
    let slice = Slice::new(sys, a, param)?;
    let (lo, hi) = interval;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) || steps == 0 {
        return Err(Error::Invalid(format!("bad scan interval ({lo}, {hi}) with {steps} steps")));
    }
    let values: Vec<f64> = (0..=steps)
        .map(|i| if i == steps { hi } else { lo + (hi - lo) * i as f64 / steps as f64 })
        .collect();
    let states: Vec<Vec<EqState>> = values
        .par_iter()
        .map(|&p| equilibria_at(&slice, p))
        .collect::<Result<_>>()?;
    for w in 0..steps {
        if states[w].len() != states[w + 1].len() {
            return Err(Error::EquilibriumCollision {
                param: param.to_string(),
                value: 0.5 * (values[w] + values[w + 1]),
            });
        }
    }

    let mut out: Vec<HopfPoint> = Vec::new();
    for j in 0..states[0].len() {
        // Track equilibrium j through the samples.
        let mut track: Vec<&EqState> = vec![&states[0][j]];
        for w in 1..=steps {
            let prev = track[w - 1].location;
            track.push(nearest(&states[w], prev).expect("same count"));
        }
        for w in 0..=steps {
            let e = track[w];
            if e.trace == 0.0 && e.det > 0.0 {
                let before = if w > 0 { track[w - 1].trace } else { 0.0 };
                let after = if w < steps { track[w + 1].trace } else { 0.0 };
                let direction = (after - before).signum();
                if direction != 0.0 && before * after <= 0.0 {
                    out.push(HopfPoint {
                        param: param.to_string(),
                        value: values[w],
                        location: e.location,
                        direction: direction as i8,
                    });
                }
            }
            if w < steps {
                let n = track[w + 1];
                if e.trace * n.trace < 0.0 && (e.det > 0.0 || n.det > 0.0) {
                    if let Some(h) = bisect_trace(&slice, (values[w], values[w + 1]), e, n)? {
                        out.push(h);
                    }
                }
            }
        }
    }
    out.sort_by(|a, b| a.value.total_cmp(&b.value).then(a.location[0].total_cmp(&b.location[0])));
    out.dedup_by(|a, b| (a.value - b.value).abs() <= HOPF_BISECTION_WIDTH && dist(a.location, b.location) < 1e-9);
    Ok(out)
}

fn bisect_trace(slice: &Slice, (mut lo, mut hi): (f64, f64), first: &EqState, last: &EqState) -> Result<Option<HopfPoint>> {
    let direction = (last.trace - first.trace).signum() as i8;
    let t_lo = first.trace;
    let mut loc = first.location;
    let mut det = first.det;
    while hi - lo > HOPF_BISECTION_WIDTH {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let eqs = equilibria_at(slice, mid)?;
        let Some(e) = nearest(&eqs, loc) else {
            return Ok(None);
        };
        loc = e.location;
        det = e.det;
        if e.trace == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if e.trace.signum() == t_lo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if det <= 0.0 {
        return Ok(None);
    }
    Ok(Some(HopfPoint {
        param: slice.param.to_string(),
        value: 0.5 * (lo + hi),
        location: loc,
        direction,
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldPoint {
    pub param: String,
    pub value: f64,
    /// Section coordinate of the double cycle.
    pub s: f64,
    pub x: f64,
    pub period: f64,
    pub multiplier: MultiplierEstimate,
    /// Cycle counts just below and just above `value`.
    pub side_counts: (usize, usize),
}

impl FoldPoint {
    pub fn m(&self) -> f64 {
        self.multiplier.divergence
    }
}

/// Cycle count at `p` with a grid refined around the coordinates in `focus`.
fn count_at(slice: &Slice, p: f64, section: &Section, focus: &[(f64, f64)], config: &IntegratorConfig) -> Result<CycleReport> {
    let inst = slice.at(p)?;
    let mut grid = GridSpec::default();
    for &(a, b) in focus {
        grid = grid.with_extra((0..=32).map(|i| a + (b - a) * i as f64 / 32.0));
    }
    find_cycles(&inst, section, &grid, config)
}

/// Largest value of `σ·d` on `[a, b]` by golden-section search.
fn dip_extremum(inst: &Instance, section: &Section, sigma: f64, (mut a, mut b): (f64, f64), config: &IntegratorConfig) -> Option<ReturnSample> {
    let g = 0.5 * (3.0 - 5f64.sqrt());
    let d = |s: f64| return_map(inst, section, s, config).ok().filter(ReturnSample::is_ok);
    let mut x1 = a + g * (b - a);
    let mut x2 = b - g * (b - a);
    let mut f1 = d(x1)?;
    let mut f2 = d(x2)?;
    while b - a > 1e-9 * (1.0 + b) {
        if sigma * f1.displacement > sigma * f2.displacement {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = a + g * (b - a);
            f1 = d(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = b - g * (b - a);
            f2 = d(x2)?;
        }
    }
    Some(if sigma * f1.displacement > sigma * f2.displacement { f1 } else { f2 })
}

/// Saddle-node of cycles in `bracket`, where the cycle counts at the two ends differ by 2.
pub fn find_fold(
    sys: &PlanarSystem,
    a: &ParameterAssignment,
    param: &str,
    bracket: (f64, f64),
    section: &Section,
    config: &IntegratorConfig,
) -> Result<FoldPoint> {
    find_fold_near(sys, a, param, bracket, section, &[], config)
}

fn find_fold_near(
    sys: &PlanarSystem,
    a: &ParameterAssignment,
    param: &str,
    bracket: (f64, f64),
    section: &Section,
    focus: &[(f64, f64)],
    config: &IntegratorConfig,
) -> Result<FoldPoint> {
    let slice = Slice::new(sys, a, param)?;
    let (p_lo, p_hi) = if bracket.0 <= bracket.1 { bracket } else { (bracket.1, bracket.0) };
    let rep_lo = count_at(&slice, p_lo, section, focus, config)?;
    let rep_hi = count_at(&slice, p_hi, section, focus, config)?;
    let (n_lo, n_hi) = (rep_lo.count(), rep_hi.count());
    if n_lo.abs_diff(n_hi) != 2 {
        return Err(Error::NotBracketed { lower: n_lo, upper: n_hi });
    }
    let (many, few, p_many, p_few) = if n_lo > n_hi { (&rep_lo, &rep_hi, p_lo, p_hi) } else { (&rep_hi, &rep_lo, p_hi, p_lo) };

    // The pair that disappears: cycles of `many` left unmatched by `few`.
    let mut taken = vec![false; many.count()];
    for c in &few.cycles {
        let best = (0..many.count())
            .filter(|i| !taken[*i])
            .min_by(|&i, &j| (many.cycles[i].s - c.s).abs().total_cmp(&(many.cycles[j].s - c.s).abs()));
        if let Some(i) = best {
            taken[i] = true;
        }
    }
    let pair: Vec<f64> = (0..many.count()).filter(|i| !taken[*i]).map(|i| many.cycles[i].s).collect();
    let (s1, s2) = (pair[0], pair[1]);
    let half = 0.5 * (s2 - s1);
    let len = section.length();
    let window = ((s1 - half).max(0.5 * s1), (s2 + half).min(len * (1.0 - 1e-9)));
    let inst_many = slice.at(p_many)?;
    let mid = return_map(&inst_many, section, 0.5 * (s1 + s2), config)?;
    if !mid.is_ok() || mid.displacement == 0.0 {
        return Err(Error::NotBracketed { lower: n_lo, upper: n_hi });
    }
    let sigma = mid.displacement.signum();

    let g = |p: f64| -> Result<ReturnSample> {
        let inst = slice.at(p)?;
        dip_extremum(&inst, section, sigma, window, config).ok_or(Error::ContinuationStalled {
            param: param.to_string(),
            value: p,
        })
    };
    // Illinois on the extremal displacement, positive on the `many` side.
    let (mut pa, mut pb) = (p_many, p_few);
    let mut fa = sigma * g(pa)?.displacement;
    let mut fb = sigma * g(pb)?.displacement;
    if !(fa > 0.0 && fb < 0.0) {
        return Err(Error::NotBracketed { lower: n_lo, upper: n_hi });
    }
    let mut side = 0i8;
    let mut best: Option<(f64, ReturnSample)> = None;
    for _ in 0..200 {
        let mut p = (pa * fb - pb * fa) / (fb - fa);
        let (lo, hi) = (pa.min(pb), pa.max(pb));
        if !(p > lo && p < hi) {
            p = 0.5 * (pa + pb);
        }
        let r = g(p)?;
        let f = sigma * r.displacement;
        if best.as_ref().is_none_or(|(_, b)| f.abs() < (sigma * b.displacement).abs()) {
            best = Some((p, r));
        }
        if f == 0.0 || f.abs() <= 1e-13 * (1.0 + r.s) || (pb - pa).abs() <= 1e-13 * (1.0 + p.abs()) {
            break;
        }
        if f > 0.0 {
            pa = p;
            fa = f;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        } else {
            pb = p;
            fb = f;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        }
    }
    let (value, fixed) = best.expect("at least one iteration");
    let inst = slice.at(value)?;
    let multiplier = multipliers(&inst, section, &fixed, config);

    // Side counts: widen the offset until the pair is resolved on the `many` side.
    let span = (p_hi - p_lo).abs();
    let around = [(0.5 * fixed.s, (1.5 * fixed.s).min(len * (1.0 - 1e-9)))];
    let mut delta = 1e-3 * span;
    let mut counts = (0, 0);
    while delta <= 0.5 * span {
        let below = count_at(&slice, value - delta, section, &around, config)?.count();
        let above = count_at(&slice, value + delta, section, &around, config)?.count();
        counts = (below, above);
        if below.abs_diff(above) == 2 {
            break;
        }
        delta *= 4.0;
    }
    if counts.0.abs_diff(counts.1) != 2 {
        return Err(Error::NotBracketed {
            lower: counts.0,
            upper: counts.1,
        });
    }
    Ok(FoldPoint {
        param: param.to_string(),
        value,
        s: fixed.s,
        x: section.point(fixed.s),
        period: fixed.period,
        multiplier,
        side_counts: counts,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepPolicy {
    /// Absolute size of the first step.
    pub initial: f64,
    pub min: f64,
    pub max: f64,
    /// Growth factor after an accepted step.
    pub growth: f64,
}

impl StepPolicy {
    pub fn for_range(start: f64, end: f64) -> Self {
        let span = (end - start).abs().max(f64::MIN_POSITIVE);
        Self {
            initial: 0.05 * span,
            min: 1e-12 * span.max(1.0),
            max: 0.1 * span,
            growth: 1.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "event", rename_all = "kebab-case")]
pub enum BranchEvent {
    Fold(FoldPoint),
    AmplitudeToZero {
        hopf: HopfPoint,
        /// Parameter where the squared amplitude extrapolates to zero.
        extrapolated: f64,
    },
    Escape { value: f64 },
    RangeEnd,
}

impl BranchEvent {
    pub fn label(&self) -> &'static str {
        match self {
            BranchEvent::Fold(_) => "fold",
            BranchEvent::AmplitudeToZero { .. } => "amplitude-to-zero",
            BranchEvent::Escape { .. } => "escape",
            BranchEvent::RangeEnd => "range-end",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchSample {
    pub value: f64,
    pub cycle: LimitCycle,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Branch {
    pub param: String,
    pub samples: Vec<BranchSample>,
    pub termination: BranchEvent,
}

enum Solve {
    Found(ReturnSample),
    Missing { escaped: bool },
}

/// Root of the displacement nearest to `guess`, expanding geometrically on both sides,
/// with multiplier on the `side` of 1 when given.
fn solve_near(inst: &Instance, section: &Section, guess: f64, side: Option<f64>, config: &IntegratorConfig) -> Result<Solve> {
    let top = section.length() * (1.0 - 1e-9);
    let guess = guess.clamp(1e-12, top);
    let cfg = config.with_tolerances(config.rtol, config.atol.min(1e-2 * config.rtol * guess));
    let d = |s: f64| return_map(inst, section, s, &cfg).ok().filter(ReturnSample::is_ok);
    let center = return_map(inst, section, guess, &cfg)?;
    let mut escaped = matches!(center.outcome, ReturnOutcome::Escape | ReturnOutcome::LeftSection);
    let accept = |r: &ReturnSample| match side {
        Some(sg) => (r.divergence_integral.exp() - 1.0).signum() == sg,
        None => true,
    };
    if center.is_ok() && center.displacement == 0.0 && accept(&center) {
        return Ok(Solve::Found(center));
    }
    let mut up = center.is_ok().then_some(center);
    let mut down = up;
    let (mut up_open, mut down_open) = (true, true);
    for k in 0..14 {
        let f = 1.0 + 0.01 * 2f64.powi(k);
        for dir in [1.0, -1.0] {
            let (open, last) = if dir > 0.0 { (&mut up_open, &mut up) } else { (&mut down_open, &mut down) };
            if !*open {
                continue;
            }
            let s = if dir > 0.0 { guess * f } else { guess / f };
            if s >= top {
                *open = false;
                let r = return_map(inst, section, top, &cfg)?;
                escaped |= !r.is_ok();
            }
            let s = s.min(top);
            let r = return_map(inst, section, s, &cfg)?;
            if !r.is_ok() {
                escaped |= dir > 0.0 && matches!(r.outcome, ReturnOutcome::Escape | ReturnOutcome::LeftSection);
                *open = false;
                continue;
            }
            if let Some(prev) = *last {
                if prev.displacement.signum() != r.displacement.signum() {
                    if let Some(root) = refine_root(&d, prev, r) {
                        if accept(&root) {
                            return Ok(Solve::Found(root));
                        }
                    }
                }
            }
            *last = Some(r);
        }
        if !up_open && !down_open {
            break;
        }
    }
    Ok(Solve::Missing { escaped })
}

/// Follows `seed` as `param` moves from its assigned value toward `target`.
pub fn continue_cycle(
    sys: &PlanarSystem,
    a: &ParameterAssignment,
    param: &str,
    target: f64,
    seed: &LimitCycle,
    policy: &StepPolicy,
    config: &IntegratorConfig,
) -> Result<Branch> {
    config.validate()?;
    let slice = Slice::new(sys, a, param)?;
    let start = a.get(param)?;
    let section = seed.section;
    let dir = (target - start).signum();

    let inst0 = slice.at(start)?;
    let root = match solve_near(&inst0, &section, seed.s, None, config)? {
        Solve::Found(r) if (r.s - seed.s).abs() <= 1e-4 * (1.0 + seed.s) => r,
        Solve::Found(r) => {
            return Err(Error::SeedNotVerified {
                expected: seed.s,
                found: Some(r.s),
            })
        }
        Solve::Missing { .. } => {
            return Err(Error::SeedNotVerified {
                expected: seed.s,
                found: None,
            })
        }
    };
    let first = promote(&inst0, &section, &root, config)?;
    let side = (first.m() - 1.0).signum();
    let mut samples = vec![BranchSample { value: start, cycle: first }];
    let mut h = policy.initial.min(policy.max);
    let mut escaped = false;

    let termination = loop {
        let last = samples.last().expect("seeded");
        if dir == 0.0 || last.value == target {
            break BranchEvent::RangeEnd;
        }
        if last.cycle.s < AMPLITUDE_FLOOR {
            break amplitude_event(&slice, &samples)?;
        }
        if h < policy.min {
            break stalled_event(sys, a, &slice, &samples, &section, escaped, target, config)?;
        }
        let mut p = last.value + dir * h;
        if (p - target) * dir > 0.0 {
            p = target;
        }
        let guess = predict(&samples, p);
        let inst = slice.at(p)?;
        match solve_near(&inst, &section, guess, Some(side), config)? {
            Solve::Found(r) if plausible(last.cycle.s, guess, r.s) => {
                let cycle = promote(&inst, &section, &r, config)?;
                samples.push(BranchSample { value: p, cycle });
                h = (h * policy.growth).min(policy.max);
                escaped = false;
            }
            Solve::Found(_) => h *= 0.5,
            Solve::Missing { escaped: e } => {
                escaped = e;
                h *= 0.5;
            }
        }
    };
    Ok(Branch {
        param: param.to_string(),
        samples,
        termination,
    })
}

fn plausible(prev: f64, guess: f64, found: f64) -> bool {
    let scale = (prev - guess).abs().max(0.05 * prev);
    (found - guess).abs() <= 20.0 * scale
}

/// Secant prediction of `s` at `p`; on the square of `s` once amplitudes are small.
fn predict(samples: &[BranchSample], p: f64) -> f64 {
    let n = samples.len();
    let last = &samples[n - 1];
    if n < 2 {
        return last.cycle.s;
    }
    let prev = &samples[n - 2];
    let dp = last.value - prev.value;
    if dp == 0.0 {
        return last.cycle.s;
    }
    let t = (p - last.value) / dp;
    let (s0, s1) = (prev.cycle.s, last.cycle.s);
    let guess = if s1 < s0 && s1 < 0.05 {
        let q = s1 * s1 + t * (s1 * s1 - s0 * s0);
        if q > 0.0 { q.sqrt() } else { 0.5 * s1 }
    } else {
        s1 + t * (s1 - s0)
    };
    if guess > 0.0 { guess } else { 0.5 * s1 }
}

/// Extrapolates the squared amplitude to zero and checks it against a trace zero.
fn amplitude_event(slice: &Slice, samples: &[BranchSample]) -> Result<BranchEvent> {
    let n = samples.len();
    let last = &samples[n - 1];
    let extrapolated = if n >= 2 {
        let prev = &samples[n - 2];
        let (q0, q1) = (prev.cycle.s.powi(2), last.cycle.s.powi(2));
        if q0 != q1 {
            last.value - q1 * (last.value - prev.value) / (q1 - q0)
        } else {
            last.value
        }
    } else {
        last.value
    };
    let reach = 4.0 * (extrapolated - last.value).abs().max(1e-9 * (1.0 + last.value.abs()));
    let interval = (extrapolated.min(last.value) - reach, extrapolated.max(last.value) + reach);
    let hopfs = hopf_scan(slice.sys, slice.base, slice.param, interval, 8)?;
    let hopf = hopfs
        .into_iter()
        .min_by(|a, b| (a.value - extrapolated).abs().total_cmp(&(b.value - extrapolated).abs()))
        .ok_or(Error::ContinuationStalled {
            param: slice.param.to_string(),
            value: last.value,
        })?;
    Ok(BranchEvent::AmplitudeToZero { hopf, extrapolated })
}

#[allow(clippy::too_many_arguments)]
fn stalled_event(
    sys: &PlanarSystem,
    a: &ParameterAssignment,
    slice: &Slice,
    samples: &[BranchSample],
    section: &Section,
    escaped: bool,
    target: f64,
    config: &IntegratorConfig,
) -> Result<BranchEvent> {
    let last = samples.last().expect("seeded");
    let n = samples.len();
    let growing = n >= 2 && last.cycle.s > samples[n - 2].cycle.s;
    if escaped && (growing || n == 1) {
        return Ok(BranchEvent::Escape { value: last.value });
    }
    if last.cycle.s < 0.05 && n >= 2 && !growing {
        return amplitude_event(slice, samples);
    }
    if (last.cycle.m() - 1.0).abs() < 0.05 {
        let mut j = n - 1;
        while j > 0 && (samples[j].cycle.m() - 1.0).abs() < 1e-2 {
            j -= 1;
        }
        let lo = samples[j].value;
        let dir = (target - lo).signum();
        let reach = (last.value - lo).abs().max(1e-6 * (1.0 + lo.abs()));
        let hi = last.value + dir * reach;
        let s = last.cycle.s;
        let focus = [(0.5 * s, (1.5 * s).min(section.length() * (1.0 - 1e-9)))];
        let a = a.with(slice.param, last.value);
        let fold = find_fold_near(sys, &a, slice.param, (lo, hi), section, &focus, config)?;
        return Ok(BranchEvent::Fold(fold));
    }
    Err(Error::ContinuationStalled {
        param: slice.param.to_string(),
        value: last.value,
    })
}

/// Odd-only (`y' = -x + Σ μ y^(2i+1)`) or full Liénard shape with unit even coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StaircaseShape {
    OddOnly,
    Canonical,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StaircaseOptions {
    pub shape: StaircaseShape,
    /// Sign of the top odd coefficient. Negative makes the outermost cycle stable.
    pub top_sign: f64,
    pub section_length: f64,
    pub ratios: Vec<f64>,
    pub scales: Vec<f64>,
    pub grids: Vec<usize>,
}

impl Default for StaircaseOptions {
    fn default() -> Self {
        Self {
            shape: StaircaseShape::Canonical,
            top_sign: -1.0,
            section_length: 10.0,
            ratios: vec![10.0, 100.0, 1000.0],
            scales: vec![1.0, 10.0, 100.0],
            grids: vec![64, 128, 256],
        }
    }
}

/// The system a staircase is built on: odd coefficients `mu1 … mu{2k+1}`.
pub fn staircase_system(k: usize, shape: StaircaseShape) -> Result<PlanarSystem> {
    let odd: Vec<Entry> = (0..=k).map(|i| Entry::Symbol(format!("mu{}", 2 * i + 1))).collect();
    let even = match shape {
        StaircaseShape::OddOnly => vec![Entry::int(0); k],
        StaircaseShape::Canonical => vec![Entry::int(1); k],
    };
    build_lienard(k, &odd, &even)
}

/// Alternating odd coefficients `μ_{2k+1-2j} = top_sign·(-1)^j·scale·ratio^(-j(j+1)/2)`.
pub fn staircase_assignment(k: usize, ratio: f64, scale: f64, top_sign: f64) -> ParameterAssignment {
    let mut a = ParameterAssignment::new();
    for j in 0..=k {
        let sign = if j % 2 == 0 { top_sign.signum() } else { -top_sign.signum() };
        let e = (j * (j + 1) / 2) as i32;
        a.set(&format!("mu{}", 2 * (k - j) + 1), sign * scale * ratio.powi(-e));
    }
    a
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StaircaseAttempt {
    pub ratio: f64,
    pub scale: f64,
    pub grid: usize,
    pub count: usize,
    pub nested: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StaircaseOutcome {
    pub k: usize,
    #[serde(skip)]
    pub system: PlanarSystem,
    pub assignment: ParameterAssignment,
    pub section: Section,
    pub cycles: Vec<LimitCycle>,
    pub attempts: Vec<StaircaseAttempt>,
    pub achieved: bool,
}

impl StaircaseOutcome {
    /// Turns an unsuccessful search into [`Error::BudgetExhausted`].
    pub fn require(self) -> Result<Self> {
        if self.achieved {
            Ok(self)
        } else {
            Err(Error::BudgetExhausted {
                attempts: self.attempts.len(),
                best: self.cycles.len(),
            })
        }
    }
}

/// `k` nested cycles around the origin, with multipliers alternating sides of 1 in increasing `s`.
fn is_staircase(k: usize, cycles: &[LimitCycle]) -> bool {
    let side = |c: &LimitCycle| (c.m() - 1.0).signum();
    cycles.len() == k
        && cycles.windows(2).all(|w| w[0].s < w[1].s && side(&w[0]) == -side(&w[1]))
        && cycles.iter().all(|c| c.m() != 1.0 && c.signature_text() == "1")
}

/// Searches for `k` nested limit cycles, starting from `(ratio, scale)` and then walking a
/// ladder of ratios, scales and grid sizes until `budget` attempts are spent.
pub fn staircase_construct(
    k: usize,
    ratio: f64,
    scale: f64,
    budget: usize,
    options: &StaircaseOptions,
    config: &IntegratorConfig,
) -> Result<StaircaseOutcome> {
    if budget == 0 {
        return Err(Error::Invalid("staircase budget must be positive".into()));
    }
    let system = staircase_system(k, options.shape)?;
    let first_grid = options.grids.first().copied().unwrap_or(64);
    let mut plan = vec![(ratio, scale, first_grid)];
    for &g in &options.grids {
        for &r in &options.ratios {
            for &s in &options.scales {
                if !plan.contains(&(r, s, g)) {
                    plan.push((r, s, g));
                }
            }
        }
    }
    plan.truncate(budget);

    let attempt = |&(r, s, g): &(f64, f64, usize)| -> Result<(StaircaseAttempt, ParameterAssignment, Section, Vec<LimitCycle>)> {
        let assignment = staircase_assignment(k, r, s, options.top_sign);
        let inst = Instance::new(&system, &assignment)?;
        let section = Section::new(&inst, 0.0, options.section_length, -1, Anchor::Low)?;
        let report = find_cycles(&inst, &section, &GridSpec::geometric(g), config)?;
        let nested = is_staircase(k, &report.cycles);
        let a = StaircaseAttempt {
            ratio: r,
            scale: s,
            grid: g,
            count: report.count(),
            nested,
        };
        Ok((a, assignment, section, report.cycles))
    };

    let mut attempts = Vec::new();
    let mut best: Option<(ParameterAssignment, Section, Vec<LimitCycle>)> = None;
    let width = rayon::current_num_threads().max(1);
    let mut done = 0;
    while done < plan.len() {
        // The first entry alone, then batches the width of the thread pool.
        let end = if done == 0 { 1 } else { (done + width).min(plan.len()) };
        let results: Vec<_> = plan[done..end].par_iter().map(attempt).collect::<Result<_>>()?;
        done = end;
        for (att, assignment, section, cycles) in results {
            let nested = att.nested;
            let better = best.as_ref().is_none_or(|(_, _, c)| cycles.len().abs_diff(k) < c.len().abs_diff(k));
            attempts.push(att);
            if nested {
                return Ok(StaircaseOutcome {
                    k,
                    system,
                    assignment,
                    section,
                    cycles,
                    attempts,
                    achieved: true,
                });
            }
            if better {
                best = Some((assignment, section, cycles));
            }
        }
    }
    let (assignment, section, cycles) = best.expect("budget is positive");
    Ok(StaircaseOutcome {
        k,
        system,
        assignment,
        section,
        cycles,
        attempts,
        achieved: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polysys::{build_canonical, build_rychkov};

    fn canonical1(mu1: f64, mu3: f64) -> (PlanarSystem, ParameterAssignment) {
        (build_canonical(1).unwrap(), ParameterAssignment::from_pairs([("mu1", mu1), ("mu3", mu3)]))
    }

    #[test]
    fn hopf_of_canonical_k1_is_at_zero() {
        let (sys, a) = canonical1(0.0, -1.0);
        let h = hopf_scan(&sys, &a, "mu1", (-1.0, 1.0), 40).unwrap();
        assert_eq!(h.len(), 1);
        assert_eq!(h[0].value, 0.0);
        assert_eq!(h[0].direction, 1);
        let h = hopf_scan(&sys, &a, "mu1", (-0.7, 0.9), 7).unwrap();
        assert_eq!(h.len(), 1);
        assert!(h[0].value.abs() < 1e-10, "{}", h[0].value);
    }

    #[test]
    fn hopf_scan_rejects_unknown_parameter() {
        let (sys, a) = canonical1(0.0, -1.0);
        assert!(matches!(hopf_scan(&sys, &a, "nu", (0.0, 1.0), 4), Err(Error::UnknownParameter(_))));
    }

    #[test]
    fn staircase_assignment_alternates() {
        let a = staircase_assignment(2, 10.0, 1.0, -1.0);
        assert_eq!(a.get("mu5").unwrap(), -1.0);
        assert_eq!(a.get("mu3").unwrap(), 0.1);
        assert!((a.get("mu1").unwrap() + 1e-3).abs() < 1e-18);
    }

    #[test]
    fn continuation_is_monotone_and_ends_at_range() {
        let (sys, a) = canonical1(0.2, -2.0);
        let inst = Instance::new(&sys, &a).unwrap();
        let section = Section::detect(&inst, 0.0, 10.0, Anchor::Low).unwrap();
        let cfg = IntegratorConfig::verification();
        let rep = find_cycles(&inst, &section, &GridSpec::default(), &cfg).unwrap();
        assert_eq!(rep.count(), 1);
        let br = continue_cycle(&sys, &a, "mu3", -0.5, &rep.cycles[0], &StepPolicy::for_range(-2.0, -0.5), &cfg).unwrap();
        assert_eq!(br.termination, BranchEvent::RangeEnd);
        assert_eq!(br.samples.last().unwrap().value, -0.5);
        for w in br.samples.windows(2) {
            assert!(w[1].cycle.s > w[0].cycle.s);
        }
        // The end of the branch is the cycle found from scratch at the target value.
        let end = Instance::new(&sys, &a.with("mu3", -0.5)).unwrap();
        let direct = find_cycles(&end, &section, &GridSpec::default(), &cfg).unwrap();
        assert_eq!(direct.count(), 1);
        let r = br.samples.last().unwrap().cycle.s;
        assert!((r - direct.cycles[0].s).abs() < 1e-8 * (1.0 + r), "{r} {}", direct.cycles[0].s);
    }

    #[test]
    fn continuation_toward_hopf_collapses() {
        let (sys, a) = canonical1(0.2, -1.0);
        let inst = Instance::new(&sys, &a).unwrap();
        let section = Section::detect(&inst, 0.0, 10.0, Anchor::Low).unwrap();
        let cfg = IntegratorConfig::verification();
        let rep = find_cycles(&inst, &section, &GridSpec::default(), &cfg).unwrap();
        let br = continue_cycle(&sys, &a, "mu1", -0.5, &rep.cycles[0], &StepPolicy::for_range(0.2, -0.5), &cfg).unwrap();
        match &br.termination {
            BranchEvent::AmplitudeToZero { hopf, extrapolated } => {
                assert!(hopf.value.abs() < 1e-8, "{}", hopf.value);
                assert!((extrapolated - hopf.value).abs() < 1e-6, "{extrapolated}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rychkov_outer_branch_folds() {
        let sys = build_rychkov().unwrap();
        let a = staircase_assignment(2, 10.0, 1.0, -1.0);
        let inst = Instance::new(&sys, &a).unwrap();
        let section = Section::detect(&inst, 0.0, 10.0, Anchor::Low).unwrap();
        let cfg = IntegratorConfig::verification();
        let rep = find_cycles(&inst, &section, &GridSpec::default(), &cfg).unwrap();
        assert_eq!(rep.count(), 2);
        let outer = rep.cycles.last().unwrap();
        let br = continue_cycle(&sys, &a, "mu3", 0.0, outer, &StepPolicy::for_range(0.1, 0.0), &cfg).unwrap();
        let BranchEvent::Fold(f) = &br.termination else { panic!("{:?}", br.termination) };
        assert!((f.m() - 1.0).abs() <= 1e-3, "{}", f.m());
        assert_eq!(f.side_counts.0.abs_diff(f.side_counts.1), 2);
        // Averaging places the fold near 0.0667.
        assert!((f.value - 0.2 / 3.0).abs() < 0.01, "{}", f.value);
        let at = Instance::new(&sys, &a.with("mu3", f.value)).unwrap();
        let rep = find_cycles(&at, &section, &GridSpec::default(), &cfg).unwrap();
        assert_eq!((rep.count(), rep.semistable.len()), (0, 1));
        let same = find_fold(&sys, &a, "mu3", (0.1, 0.09), &section, &cfg);
        assert!(matches!(same, Err(Error::NotBracketed { lower: 2, upper: 2 })));
    }

    #[test]
    fn staircase_builds_nested_cycles() {
        let cfg = IntegratorConfig::verification();
        for k in 1..=3 {
            let out = staircase_construct(k, 10.0, 1.0, 12, &StaircaseOptions::default(), &cfg).unwrap();
            assert!(out.achieved);
            assert_eq!(out.attempts.len(), 1);
            assert_eq!(out.cycles.last().unwrap().stability, crate::cycles::Stability::Stable);
        }
        let odd = StaircaseOptions {
            shape: StaircaseShape::OddOnly,
            ..StaircaseOptions::default()
        };
        let out = staircase_construct(2, 10.0, 1.0, 1, &odd, &cfg).unwrap();
        assert!(out.achieved);
        // Averaging roots of mu1 + 3/4 mu3 r^2 + 5/8 mu5 r^4.
        let (u1, u2) = ((0.075 - 0.003125f64.sqrt()) / 1.25, (0.075 + 0.003125f64.sqrt()) / 1.25);
        assert!((out.cycles[0].s - u1.sqrt()).abs() < 1e-2);
        assert!((out.cycles[1].s - u2.sqrt()).abs() < 1e-2);
        let same = staircase_assignment(1, 10.0, 1.0, -1.0).with("mu1", -0.1);
        let sys = staircase_system(1, StaircaseShape::Canonical).unwrap();
        let inst = Instance::new(&sys, &same).unwrap();
        let section = Section::new(&inst, 0.0, 10.0, -1, Anchor::Low).unwrap();
        assert_eq!(find_cycles(&inst, &section, &GridSpec::default(), &cfg).unwrap().count(), 0);
        assert!(staircase_construct(1, 10.0, 1.0, 0, &StaircaseOptions::default(), &cfg).is_err());
    }
}
