//! Adaptive Dormand–Prince 5(4) integration with escape, equilibrium and section-crossing
//! detection.
//!
//! Alongside `(x, y)` the stepper carries the arc length and the integral of the divergence,
//! so a single pass around an orbit yields its length and its multiplier. Error control only
//! looks at `(x, y)`.

use std::io::{self, Write};

use num::BigRational;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polysys::equilibria::restrict_to_x_axis;
use crate::polysys::{Instance, VectorField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub rtol: f64,
    pub atol: f64,
    pub initial_step: f64,
    pub max_step: f64,
    /// Max-norm bound on `(x, y)`.
    pub escape_radius: f64,
    pub max_time: f64,
    /// Field max-norm below which the state counts as sitting at an equilibrium.
    pub equilibrium_tol: f64,
    /// Time the field must stay below `equilibrium_tol` before stopping.
    pub equilibrium_dwell: f64,
}

impl IntegratorConfig {
    pub fn verification() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            initial_step: 1e-3,
            max_step: 0.5,
            escape_radius: 1e3,
            max_time: 1e3,
            equilibrium_tol: 1e-12,
            equilibrium_dwell: 1.0,
        }
    }

    pub fn sweep() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
            ..Self::verification()
        }
    }

    pub fn with_tolerances(mut self, rtol: f64, atol: f64) -> Self {
        self.rtol = rtol;
        self.atol = atol;
        self
    }

    pub fn with_max_step(mut self, h: f64) -> Self {
        self.max_step = h;
        self
    }

    pub fn with_max_time(mut self, t: f64) -> Self {
        self.max_time = t;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rtol", self.rtol),
            ("atol", self.atol),
            ("initial_step", self.initial_step),
            ("max_step", self.max_step),
            ("escape_radius", self.escape_radius),
            ("max_time", self.max_time),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Invalid(format!("integrator {name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }

    /// Noise level of a displacement value at section coordinate `s`.
    pub fn noise_floor(&self, s: f64) -> f64 {
        self.atol + self.rtol * s.abs()
    }
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self::verification()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TerminationReason {
    SectionHit,
    Escape,
    EquilibriumApproach,
    TimeOut,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Termination {
    pub reason: TerminationReason,
    pub state: [f64; 2],
    pub time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SectionEvent {
    pub point: [f64; 2],
    pub time: f64,
    pub arc_length: f64,
    /// `∫ div f dt` from the start to the crossing.
    pub divergence_integral: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Crossing {
    Hit(SectionEvent),
    Stopped(Termination),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// `(t, x, y)` at every accepted step.
    pub samples: Vec<[f64; 3]>,
    pub termination: Termination,
}

impl Trajectory {
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,x,y")?;
        for [t, x, y] in &self.samples {
            writeln!(w, "{t:.12e},{x:.12e},{y:.12e}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Anchor {
    Low,
    High,
}

/// A segment `(a, b)` of the x-axis crossed with `sign(y') = sign`.
///
/// Section coordinates are offsets from the anchored end: `a + s` for [`Anchor::Low`],
/// `b - s` for [`Anchor::High`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub a: f64,
    pub b: f64,
    pub sign: i8,
    pub anchor: Anchor,
}

impl Section {
    /// Validated against the exact sign of `Q(x, 0)` on `(a, b)`.
    pub fn new(inst: &Instance, a: f64, b: f64, sign: i8, anchor: Anchor) -> Result<Self> {
        let detected = Self::detect(inst, a, b, anchor)?;
        if detected.sign != sign {
            return Err(Error::InvalidSection(format!(
                "y' has sign {} on ({a}, {b}), not {sign}",
                detected.sign
            )));
        }
        Ok(detected)
    }

    /// Takes the crossing sign from the system.
    pub fn detect(inst: &Instance, a: f64, b: f64, anchor: Anchor) -> Result<Self> {
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidSection(format!("need finite a < b, got ({a}, {b})")));
        }
        let on_axis = restrict_to_x_axis(&inst.q)?;
        let (ea, eb) = (BigRational::from_float(a).unwrap(), BigRational::from_float(b).unwrap());
        if on_axis.is_zero() || on_axis.count_roots_open(&ea, &eb) > 0 {
            return Err(Error::InvalidSection(format!("y' vanishes inside ({a}, {b})")));
        }
        let sign = on_axis.sign_at(&((&ea + &eb) / BigRational::from_integer(2.into())));
        for k in 1..32 {
            let x = a + (b - a) * k as f64 / 32.0;
            let s = inst.eval(x, 0.0)[1];
            if s != 0.0 && s.signum() as i8 != sign {
                return Err(Error::InvalidSection(format!("sampled y' changes sign at x = {x}")));
            }
        }
        Ok(Self { a, b, sign, anchor })
    }

    pub fn contains(&self, x: f64) -> bool {
        self.a < x && x < self.b
    }

    pub fn length(&self) -> f64 {
        self.b - self.a
    }

    /// x-coordinate of section coordinate `s`.
    pub fn point(&self, s: f64) -> f64 {
        match self.anchor {
            Anchor::Low => self.a + s,
            Anchor::High => self.b - s,
        }
    }

    /// Section coordinate of `x`.
    pub fn offset(&self, x: f64) -> f64 {
        match self.anchor {
            Anchor::Low => x - self.a,
            Anchor::High => self.b - x,
        }
    }
}

type State = [f64; 4];

#[inline]
fn deriv<F: VectorField + ?Sized>(f: &F, s: &State) -> State {
    let ([a, b], d) = f.eval_with_divergence(s[0], s[1]);
    [a, b, (a * a + b * b).sqrt(), d]
}

#[inline]
fn axpy(s: &State, terms: &[(f64, &State)], h: f64) -> State {
    let mut out = *s;
    for (c, k) in terms {
        for i in 0..4 {
            out[i] += h * c * k[i];
        }
    }
    out
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// One Dormand–Prince step: new state, derivative there and the `(x, y)` error estimate.
fn dp_step<F: VectorField + ?Sized>(f: &F, s: &State, k1: &State, h: f64) -> (State, State, [f64; 2]) {
    let k2 = deriv(f, &axpy(s, &[(A21, k1)], h));
    let k3 = deriv(f, &axpy(s, &[(A31, k1), (A32, &k2)], h));
    let k4 = deriv(f, &axpy(s, &[(A41, k1), (A42, &k2), (A43, &k3)], h));
    let k5 = deriv(f, &axpy(s, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)], h));
    let k6 = deriv(f, &axpy(s, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)], h));
    let next = axpy(s, &[(B1, k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)], h);
    let k7 = deriv(f, &next);
    let mut err = [0.0; 2];
    for (i, e) in err.iter_mut().enumerate() {
        *e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
    }
    (next, k7, err)
}

struct Step {
    t0: f64,
    s0: State,
    k0: State,
    h: f64,
}

struct Stepper<'a, F: VectorField + ?Sized> {
    field: &'a F,
    cfg: &'a IntegratorConfig,
    t: f64,
    s: State,
    k: State,
    h: f64,
    below_since: Option<f64>,
}

impl<'a, F: VectorField + ?Sized> Stepper<'a, F> {
    fn new(field: &'a F, start: [f64; 2], cfg: &'a IntegratorConfig) -> Self {
        let s = [start[0], start[1], 0.0, 0.0];
        Self {
            field,
            cfg,
            t: 0.0,
            s,
            k: deriv(field, &s),
            h: cfg.initial_step.min(cfg.max_step),
            below_since: None,
        }
    }

    fn field_norm(&self) -> f64 {
        self.k[0].abs().max(self.k[1].abs())
    }

    fn termination(&self, reason: TerminationReason) -> Termination {
        Termination {
            reason,
            state: [self.s[0], self.s[1]],
            time: self.t,
        }
    }

    /// Takes one accepted step no longer than `cap`.
    fn advance(&mut self, cap: f64) -> Result<Step> {
        loop {
            let h = self.h.min(self.cfg.max_step).min(cap);
            if self.h < 1e-14 * self.t.abs().max(1.0) {
                return Err(Error::StepUnderflow {
                    t: self.t,
                    x: self.s[0],
                    y: self.s[1],
                });
            }
            let (next, k7, e) = dp_step(self.field, &self.s, &self.k, h);
            let mut err = 0.0;
            for i in 0..2 {
                let sc = self.cfg.atol + self.cfg.rtol * self.s[i].abs().max(next[i].abs());
                err += (e[i] / sc).powi(2);
            }
            let err = (err / 2.0).sqrt();
            if err.is_finite() && next.iter().all(|v| v.is_finite()) && err <= 1.0 {
                let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                let step = Step {
                    t0: self.t,
                    s0: self.s,
                    k0: self.k,
                    h,
                };
                self.t += h;
                self.s = next;
                self.k = k7;
                // Only grow from the step actually taken when it was capped.
                self.h = (h * grow).max(if h < self.h { self.h } else { 0.0 });
                return Ok(step);
            }
            let shrink = if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.2, 1.0) } else { 0.2 };
            self.h = h * shrink;
        }
    }

    /// Escape, sustained equilibrium approach or time-out after the latest step.
    fn stop_reason(&mut self) -> Option<TerminationReason> {
        if self.s[0].abs().max(self.s[1].abs()) > self.cfg.escape_radius {
            return Some(TerminationReason::Escape);
        }
        if self.field_norm() <= self.cfg.equilibrium_tol {
            let since = *self.below_since.get_or_insert(self.t);
            if self.t - since >= self.cfg.equilibrium_dwell {
                return Some(TerminationReason::EquilibriumApproach);
            }
        } else {
            self.below_since = None;
        }
        if self.t >= self.cfg.max_time * (1.0 - 1e-15) {
            return Some(TerminationReason::TimeOut);
        }
        None
    }
}

/// Follows the trajectory from `state0` until escape, equilibrium approach or `max_time`.
pub fn integrate<F: VectorField + ?Sized>(field: &F, state0: [f64; 2], config: &IntegratorConfig) -> Result<Trajectory> {
    config.validate()?;
    check_finite(state0)?;
    let mut st = Stepper::new(field, state0, config);
    let mut samples = vec![[0.0, state0[0], state0[1]]];
    if st.field_norm() <= config.equilibrium_tol {
        return Ok(Trajectory {
            samples,
            termination: st.termination(TerminationReason::EquilibriumApproach),
        });
    }
    loop {
        st.advance(config.max_time - st.t)?;
        samples.push([st.t, st.s[0], st.s[1]]);
        if let Some(reason) = st.stop_reason() {
            return Ok(Trajectory {
                samples,
                termination: st.termination(reason),
            });
        }
    }
}

fn check_finite(state: [f64; 2]) -> Result<()> {
    if state.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Invalid(format!("initial state {state:?} is not finite")))
    }
}

/// Crossings closer than this to the start time are ignored.
const DEPARTURE_GUARD: f64 = 1e-9;

/// Integrates until a crossing of `y = 0` with `sign(y') = sign` for which `stop` returns true.
pub(crate) fn run_to_crossing<F: VectorField + ?Sized>(
    field: &F,
    state0: [f64; 2],
    sign: i8,
    config: &IntegratorConfig,
    mut stop: impl FnMut(&SectionEvent) -> bool,
) -> Result<Crossing> {
    config.validate()?;
    check_finite(state0)?;
    let mut st = Stepper::new(field, state0, config);
    if st.field_norm() <= config.equilibrium_tol {
        return Ok(Crossing::Stopped(st.termination(TerminationReason::EquilibriumApproach)));
    }
    let sigma = f64::from(sign);
    loop {
        let step = st.advance(config.max_time - st.t)?;
        let (y0, y1) = (step.s0[1], st.s[1]);
        if sigma * y0 < 0.0 && sigma * y1 >= 0.0 {
            let event = locate(field, &step, st.s);
            if event.time > DEPARTURE_GUARD && stop(&event) {
                return Ok(Crossing::Hit(event));
            }
        }
        if let Some(reason) = st.stop_reason() {
            return Ok(Crossing::Stopped(st.termination(reason)));
        }
    }
}

/// Root of `y(t0 + τ)` on `(0, h]`, with `y(t0 + τ)` recomputed by a single step of size τ.
fn locate<F: VectorField + ?Sized>(field: &F, step: &Step, end: State) -> SectionEvent {
    let event = |s: &State, tau: f64| SectionEvent {
        point: [s[0], s[1]],
        time: step.t0 + tau,
        arc_length: s[2],
        divergence_integral: s[3],
    };
    if end[1] == 0.0 {
        return event(&end, step.h);
    }
    let (mut lo, mut hi) = (0.0, step.h);
    let (mut glo, mut ghi) = (step.s0[1], end[1]);
    let mut best = (end, step.h);
    let mut side = 0i8;
    for _ in 0..200 {
        let mut tau = (lo * ghi - hi * glo) / (ghi - glo);
        if !(tau > lo && tau < hi) {
            tau = 0.5 * (lo + hi);
        }
        let (s, _, _) = dp_step(field, &step.s0, &step.k0, tau);
        let g = s[1];
        best = (s, tau);
        if g.abs() <= 1e-12 * (1.0 + s[0].abs()) || hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
        if (g < 0.0) == (glo < 0.0) {
            lo = tau;
            glo = g;
            if side == -1 {
                ghi *= 0.5;
            }
            side = -1;
        } else {
            hi = tau;
            ghi = g;
            if side == 1 {
                glo *= 0.5;
            }
            side = 1;
        }
    }
    event(&best.0, best.1)
}

/// Next crossing of `section` in its direction; crossings outside `(a, b)` are skipped.
pub fn next_crossing<F: VectorField + ?Sized>(
    field: &F,
    state: [f64; 2],
    section: &Section,
    config: &IntegratorConfig,
) -> Result<Crossing> {
    run_to_crossing(field, state, section.sign, config, |ev| section.contains(ev.point[0]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polysys::{build_canonical, build_lienard, linear_center, Entry, ParameterAssignment};
    use std::f64::consts::PI;

    fn center() -> Instance {
        Instance::new(&linear_center(), &ParameterAssignment::new()).unwrap()
    }

    #[test]
    fn linear_center_full_turn() {
        let cfg = IntegratorConfig::verification().with_max_time(2.0 * PI);
        let traj = integrate(&center(), [1.0, 0.0], &cfg).unwrap();
        let end = traj.termination;
        assert_eq!(end.reason, TerminationReason::TimeOut);
        assert!((end.time - 2.0 * PI).abs() < 1e-12);
        assert!((end.state[0] - 1.0).abs() < 1e-9 && end.state[1].abs() < 1e-9);
        // Exact solution (cos t, -sin t) at every sample.
        for [t, x, y] in &traj.samples {
            assert!((x - t.cos()).abs() < 1e-9 && (y + t.sin()).abs() < 1e-9);
        }
    }

    #[test]
    fn unstable_top_coefficient_grows() {
        let sys = build_canonical(1).unwrap();
        let inst = Instance::new(&sys, &ParameterAssignment::from_pairs([("mu1", 0.0), ("mu3", 0.5)])).unwrap();
        let section = Section::new(&inst, 0.0, 10.0, -1, Anchor::Low).unwrap();
        let Crossing::Hit(ev) = next_crossing(&inst, [0.01, 0.0], &section, &IntegratorConfig::default()).unwrap() else {
            panic!("no return");
        };
        assert!(ev.point[0] > 0.01);
    }

    #[test]
    fn equilibrium_start() {
        let traj = integrate(&center(), [0.0, 0.0], &IntegratorConfig::default()).unwrap();
        assert_eq!(traj.termination.reason, TerminationReason::EquilibriumApproach);
        assert_eq!(traj.termination.time, 0.0);
    }

    #[test]
    fn return_to_start_on_center() {
        let inst = center();
        let section = Section::new(&inst, 0.0, 1.0, -1, Anchor::Low).unwrap();
        let Crossing::Hit(ev) = next_crossing(&inst, [0.5, 0.0], &section, &IntegratorConfig::default()).unwrap() else {
            panic!("no return");
        };
        assert!((ev.point[0] - 0.5).abs() < 1e-9);
        assert!((ev.time - 2.0 * PI).abs() < 1e-9);
        assert!((ev.arc_length - PI).abs() < 1e-8);
        assert!(ev.point[1].abs() <= 1e-12 * 1.5);
    }

    #[test]
    fn symmetric_center_returns() {
        let sys = build_lienard(1, &[Entry::int(0), Entry::int(0)], &[Entry::int(1)]).unwrap();
        let inst = Instance::new(&sys, &ParameterAssignment::new()).unwrap();
        let section = Section::detect(&inst, 0.0, 0.5, Anchor::Low).unwrap();
        let Crossing::Hit(ev) = next_crossing(&inst, [0.3, 0.0], &section, &IntegratorConfig::default()).unwrap() else {
            panic!("no return");
        };
        assert!((ev.point[0] - 0.3).abs() <= 1e-8);
    }

    #[test]
    fn escape_before_crossing() {
        let sys = build_canonical(1).unwrap();
        let inst = Instance::new(&sys, &ParameterAssignment::from_pairs([("mu1", 0.0), ("mu3", 1.0)])).unwrap();
        let section = Section::new(&inst, 0.0, 10.0, -1, Anchor::Low).unwrap();
        let out = next_crossing(&inst, [0.0, 50.0], &section, &IntegratorConfig::default()).unwrap();
        match out {
            Crossing::Stopped(t) => assert_eq!(t.reason, TerminationReason::Escape),
            Crossing::Hit(ev) => panic!("unexpected crossing {ev:?}"),
        }
    }

    #[test]
    fn section_validation() {
        let inst = center();
        assert!(matches!(Section::detect(&inst, -1.0, 1.0, Anchor::Low), Err(Error::InvalidSection(_))));
        assert!(matches!(Section::new(&inst, 0.0, 1.0, 1, Anchor::Low), Err(Error::InvalidSection(_))));
        assert!(matches!(Section::detect(&inst, 1.0, 1.0, Anchor::Low), Err(Error::InvalidSection(_))));
        let s = Section::detect(&inst, -2.0, -1.0, Anchor::High).unwrap();
        assert_eq!(s.sign, 1);
        assert_eq!(s.point(0.25), -1.25);
        assert_eq!(s.offset(-1.25), 0.25);
    }

    #[test]
    fn invalid_config() {
        let cfg = IntegratorConfig::default().with_tolerances(0.0, 1e-12);
        assert!(integrate(&center(), [1.0, 0.0], &cfg).is_err());
    }

    #[test]
    fn csv_dump() {
        let cfg = IntegratorConfig::default().with_max_time(0.1);
        let traj = integrate(&center(), [1.0, 0.0], &cfg).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,x,y\n0.000000000000e0,1.000000000000e0,0.000000000000e0\n"));
        assert_eq!(text.lines().count(), traj.samples.len() + 1);
    }
}
