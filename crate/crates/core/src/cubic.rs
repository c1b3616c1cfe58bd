//! Cycle distributions of the cubic system
//! `x' = y, y' = -x + (λ-μ)y + 3/2 x² + μxy - 1/2 x³ + αx²y`
//! with equilibria (0,0), (1,0), (2,0).

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use crate::cycles::{find_cycles, fine_focus_order, GridSpec, LimitCycle};
use crate::error::{Error, Result};
use crate::integrate::{Anchor, IntegratorConfig, Section};
use crate::polysys::{build_cubic_symbolic, Instance, ParameterAssignment, PlanarSystem};

/// Right end of the large-cycle section unless the escape radius is smaller.
pub const X_MAX_CAP: f64 = 12.0;
/// Relative period agreement under which two detections are the same orbit.
pub const PERIOD_MATCH: f64 = 1e-6;
/// Fraction of S0 and S2, measured from the antisaddle, that is sampled.
pub const SADDLE_MARGIN: f64 = 0.99;
/// Values of μ tried in order when seeding from the double-Hopf locus.
pub const SEED_MUS: [f64; 4] = [-0.5, -1.0, -2.0, -4.0];
/// Perturbation sizes tried in order at each seed.
pub const SEED_EPSILONS: [f64; 3] = [1e-2, 3e-3, 1e-3];

/// The five distributions listed for the cubic system, as `((n0, n2), nbig)`.
pub const LISTED: [((usize, usize), usize); 5] = [((1, 1), 1), ((1, 2), 0), ((2, 1), 0), ((1, 0), 2), ((0, 1), 2)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bucket {
    /// Encloses only (0,0).
    Origin,
    /// Encloses only (2,0).
    Right,
    /// Encloses all three equilibria.
    Big,
}

impl Bucket {
    fn of(signature: &[i32]) -> Option<Self> {
        match signature {
            [1, 0, 0] => Some(Bucket::Origin),
            [0, 0, 1] => Some(Bucket::Right),
            [1, 1, 1] => Some(Bucket::Big),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize)]
pub struct Distribution {
    pub n0: usize,
    pub n2: usize,
    pub nbig: usize,
    /// Winding signatures that fit no bucket.
    pub anomalous: Vec<String>,
}

impl Distribution {
    pub fn new(n0: usize, n2: usize, nbig: usize) -> Self {
        Self {
            n0,
            n2,
            nbig,
            anomalous: Vec::new(),
        }
    }

    pub fn total(&self) -> usize {
        self.n0 + self.n2 + self.nbig
    }

    pub fn exceeds_bound(&self) -> bool {
        self.total() > 3
    }

    /// Exactly one of the five listed distributions.
    pub fn is_listed(&self) -> bool {
        LISTED.contains(&((self.n0, self.n2), self.nbig))
    }

    /// Not dominated componentwise by any listed distribution.
    pub fn outside_list(&self) -> bool {
        !LISTED
            .iter()
            .any(|&((a, b), c)| self.n0 <= a && self.n2 <= b && self.nbig <= c)
    }

    /// Flags raised for this distribution, in a fixed order.
    pub fn flags(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.exceeds_bound() {
            out.push("exceeds-bound");
        }
        if self.outside_list() {
            out.push("outside-list");
        }
        if !self.anomalous.is_empty() {
            out.push("anomalous");
        }
        out
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(({},{}),{})", self.n0, self.n2, self.nbig)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassifiedCycle {
    pub bucket: Option<Bucket>,
    /// Index of the section it was first found on: 0 for S0, 1 for S2, 2 for S_big.
    pub section: usize,
    pub cycle: LimitCycle,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributionReport {
    pub lambda: f64,
    pub mu: f64,
    pub alpha: f64,
    pub distribution: Distribution,
    pub cycles: Vec<ClassifiedCycle>,
    pub semistable: Vec<LimitCycle>,
    /// Center-candidate flags of the sections around (0,0) and (2,0).
    pub center_flags: [bool; 2],
    /// Largest |d| seen on each section's grid.
    pub max_displacement: [f64; 3],
    pub diagnostics: Vec<String>,
}

pub fn cubic_assignment(lambda: f64, mu: f64, alpha: f64) -> ParameterAssignment {
    ParameterAssignment::from_pairs([("lambda", lambda), ("mu", mu), ("alpha", alpha)])
}

/// The three sections S0 = (0,1), S2 = (1,2) and S_big = (2, x_max).
pub fn cubic_sections(inst: &Instance, config: &IntegratorConfig) -> Result<[Section; 3]> {
    let x_max = X_MAX_CAP.min(0.5 * config.escape_radius);
    Ok([
        Section::new(inst, 0.0, 1.0, -1, Anchor::Low)?,
        Section::new(inst, 1.0, 2.0, 1, Anchor::High)?,
        Section::new(inst, 2.0, x_max, -1, Anchor::Low)?,
    ])
}

/// Cycles on all three sections, merged by enclosure signature and period.
pub fn analyze_distribution(
    lambda: f64,
    mu: f64,
    alpha: f64,
    grid: &GridSpec,
    config: &IntegratorConfig,
) -> Result<DistributionReport> {
    let sys = build_cubic_symbolic()?;
    analyze_on(&sys, lambda, mu, alpha, grid, config)
}

fn analyze_on(
    sys: &PlanarSystem,
    lambda: f64,
    mu: f64,
    alpha: f64,
    grid: &GridSpec,
    config: &IntegratorConfig,
) -> Result<DistributionReport> {
    let inst = Instance::new(sys, &cubic_assignment(lambda, mu, alpha))?;
    let sections = cubic_sections(&inst, config)?;
    let mut report = DistributionReport {
        lambda,
        mu,
        alpha,
        distribution: Distribution::default(),
        cycles: Vec::new(),
        semistable: Vec::new(),
        center_flags: [false; 2],
        max_displacement: [0.0; 3],
        diagnostics: Vec::new(),
    };
    for (idx, section) in sections.iter().enumerate() {
        let mut g = grid.clone();
        if idx < 2 {
            // Orbits through the last 1% of S0 and S2 graze the saddle and lose accuracy.
            g.max = Some(g.max.unwrap_or(f64::INFINITY).min(SADDLE_MARGIN * section.length()));
        }
        let rep = find_cycles(&inst, section, &g, config)?;
        if idx < 2 {
            report.center_flags[idx] = rep.center_candidate;
        }
        report.max_displacement[idx] = rep
            .samples
            .iter()
            .filter(|s| s.is_ok())
            .map(|s| s.displacement.abs())
            .fold(0.0, f64::max);
        let name = ["S0", "S2", "S_big"][idx];
        report.diagnostics.extend(rep.diagnostics.iter().map(|d| format!("{name}: {d}")));
        for c in rep.cycles {
            let bucket = Bucket::of(&c.signature());
            let seen = report.cycles.iter().any(|o| {
                o.cycle.signature() == c.signature()
                    && (o.cycle.period - c.period).abs() <= PERIOD_MATCH * o.cycle.period.abs()
            });
            if !seen {
                report.cycles.push(ClassifiedCycle {
                    bucket,
                    section: idx,
                    cycle: c,
                });
            }
        }
        report.semistable.extend(rep.semistable);
    }
    let mut d = Distribution::default();
    for c in &report.cycles {
        match c.bucket {
            Some(Bucket::Origin) => d.n0 += 1,
            Some(Bucket::Right) => d.n2 += 1,
            Some(Bucket::Big) => d.nbig += 1,
            None => d.anomalous.push(c.cycle.signature_text()),
        }
    }
    report.distribution = d;
    Ok(report)
}

/// `(λ, α) = (μ, -μ/2)`: both antisaddles have zero trace.
pub fn double_hopf_locus(mu: f64) -> (f64, f64) {
    (mu, -mu / 2.0)
}

/// Linear traces at (0,0) and (2,0).
pub fn antisaddle_traces(lambda: f64, mu: f64, alpha: f64) -> [f64; 2] {
    [lambda - mu, lambda + mu + 4.0 * alpha]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DoubleHopfSeed {
    pub mu: f64,
    /// Displacement signs of the two weak foci at the locus: -1 attracting.
    pub focus_signs: [i8; 2],
    pub epsilon: f64,
    pub report: DistributionReport,
}

/// Unfolds the double-Hopf point at `mu` by giving each focus a small trace of the sign
/// opposite to its weak-focus displacement, so each sheds one small cycle. The perturbation
/// shrinks through `epsilons` until the distribution is ((1,1),0).
pub fn perturbed_double_hopf(mu: f64, epsilons: &[f64], grid: &GridSpec, config: &IntegratorConfig) -> Result<DoubleHopfSeed> {
    let sys = build_cubic_symbolic()?;
    let (lambda, alpha) = double_hopf_locus(mu);
    let inst = Instance::new(&sys, &cubic_assignment(lambda, mu, alpha))?;
    let mut signs = [0i8; 2];
    for e in inst.antisaddles()? {
        let idx = if e.location[0] < 1.0 { 0 } else { 1 };
        signs[idx] = fine_focus_order(&inst, &e, config)?.leading_sign;
    }
    if signs.contains(&0) {
        return Err(Error::Invalid(format!("weak foci at mu = {mu} are not of finite order")));
    }
    let mut last = None;
    for &eps in epsilons {
        // Trace 0 is e1; trace 2 is e1 + 4 e2.
        let e1 = -f64::from(signs[0]) * eps;
        let t2 = -f64::from(signs[1]) * eps;
        let e2 = (t2 - e1) / 4.0;
        let report = analyze_on(&sys, lambda + e1, mu, alpha + e2, grid, config)?;
        let hit = report.distribution == Distribution::new(1, 1, 0);
        let seed = DoubleHopfSeed {
            mu,
            focus_signs: signs,
            epsilon: eps,
            report,
        };
        if hit {
            return Ok(seed);
        }
        last = Some(seed);
    }
    last.ok_or_else(|| Error::Invalid("no perturbation sizes given".into()))
}

/// First seed in `mus` whose unfolding gives ((1,1),0), with every seed tried.
pub fn double_hopf_search(mus: &[f64], grid: &GridSpec, config: &IntegratorConfig) -> Result<(Option<usize>, Vec<DoubleHopfSeed>)> {
    let mut tried = Vec::new();
    for &mu in mus {
        let seed = perturbed_double_hopf(mu, &SEED_EPSILONS, grid, config)?;
        let hit = seed.report.distribution == Distribution::new(1, 1, 0);
        tried.push(seed);
        if hit {
            return Ok((Some(tried.len() - 1), tried));
        }
    }
    Ok((None, tried))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BigCycleSearch {
    pub seed_mu: f64,
    /// Every scanned cell, in scan order.
    pub cells: Vec<SweepCell>,
    /// Index into `cells` of the first cell with a large cycle.
    pub found: Option<usize>,
}

/// Searches for a cycle around all three equilibria: from the perturbed double-Hopf seed at
/// `mu`, `alpha` is moved in `steps` equal increments of `delta` with λ and μ fixed.
pub fn big_cycle_search(
    mu: f64,
    delta: f64,
    steps: usize,
    grid: &GridSpec,
    config: &IntegratorConfig,
) -> Result<BigCycleSearch> {
    let seed = perturbed_double_hopf(mu, &SEED_EPSILONS, grid, config)?;
    let (lambda, alpha0) = (seed.report.lambda, seed.report.alpha);
    let sys = build_cubic_symbolic()?;
    let cells: Vec<SweepCell> = (1..=steps)
        .into_par_iter()
        .map(|i| cell(&sys, lambda, mu, alpha0 + delta * i as f64, grid, config))
        .collect();
    let found = cells.iter().position(|c| c.distribution.as_ref().is_some_and(|d| d.nbig >= 1));
    Ok(BigCycleSearch {
        seed_mu: mu,
        cells,
        found,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    pub lambda: f64,
    pub mu: f64,
    pub alpha: f64,
    pub distribution: Option<Distribution>,
    pub center_flags: [bool; 2],
    pub escapes: usize,
    pub unresolved: usize,
    pub semistable: usize,
    pub diagnostics: Vec<String>,
}

impl SweepCell {
    pub fn flags(&self) -> Vec<&'static str> {
        match &self.distribution {
            Some(d) => d.flags(),
            None => vec!["failed"],
        }
    }
}

fn cell(sys: &PlanarSystem, lambda: f64, mu: f64, alpha: f64, grid: &GridSpec, config: &IntegratorConfig) -> SweepCell {
    match analyze_on(sys, lambda, mu, alpha, grid, config) {
        Ok(r) => SweepCell {
            lambda,
            mu,
            alpha,
            escapes: r.diagnostics.iter().filter(|d| d.contains("Escape")).count(),
            unresolved: r
                .cycles
                .iter()
                .filter(|c| c.cycle.multiplicity == crate::cycles::Multiplicity::Unresolved)
                .count(),
            semistable: r.semistable.len(),
            center_flags: r.center_flags,
            distribution: Some(r.distribution),
            diagnostics: r.diagnostics,
        },
        Err(e) => SweepCell {
            lambda,
            mu,
            alpha,
            distribution: None,
            center_flags: [false; 2],
            escapes: 0,
            unresolved: 0,
            semistable: 0,
            diagnostics: vec![e.to_string()],
        },
    }
}

/// Cartesian grid of parameter values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepGrid {
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    pub alpha: Vec<f64>,
}

impl SweepGrid {
    /// `n` equally spaced values in `[-half, half]` on every axis.
    pub fn centered(n: usize, half: f64) -> Self {
        let axis: Vec<f64> = (0..n)
            .map(|i| if n == 1 { 0.0 } else { -half + 2.0 * half * i as f64 / (n - 1) as f64 })
            .map(|v| if v.abs() < 1e-15 { 0.0 } else { v })
            .collect();
        Self {
            lambda: axis.clone(),
            mu: axis.clone(),
            alpha: axis,
        }
    }

    /// Cells in λ-major order.
    pub fn cells(&self) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::new();
        for &l in &self.lambda {
            for &m in &self.mu {
                for &a in &self.alpha {
                    out.push((l, m, a));
                }
            }
        }
        out
    }
}

/// Every cell of `grid`; failures are recorded in the cell and never abort the sweep.
pub fn sweep_distributions(grid: &SweepGrid, sections: &GridSpec, config: &IntegratorConfig) -> Result<Vec<SweepCell>> {
    let sys = build_cubic_symbolic()?;
    Ok(grid
        .cells()
        .par_iter()
        .map(|&(l, m, a)| cell(&sys, l, m, a, sections, config))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub distribution: String,
    pub flags: Vec<&'static str>,
    pub cells: usize,
    /// First cell in sweep order with this distribution.
    pub representative: (f64, f64, f64),
}

/// Distinct distributions with counts, ordered by their rendering.
pub fn summarize(cells: &[SweepCell]) -> Vec<SummaryRow> {
    let mut rows: BTreeMap<String, SummaryRow> = BTreeMap::new();
    for c in cells {
        let key = match &c.distribution {
            Some(d) if d.anomalous.is_empty() => d.to_string(),
            Some(d) => format!("{d} anomalous[{}]", d.anomalous.join(";")),
            None => "failed".to_string(),
        };
        rows.entry(key.clone())
            .and_modify(|r| r.cells += 1)
            .or_insert(SummaryRow {
                distribution: key,
                flags: c.flags(),
                cells: 1,
                representative: (c.lambda, c.mu, c.alpha),
            });
    }
    rows.into_values().collect()
}

/// Plain-text rendering of a summary.
pub fn summary_text(rows: &[SummaryRow]) -> String {
    let mut out = String::from("distribution cells flags representative(lambda,mu,alpha)\n");
    for r in rows {
        let flags = if r.flags.is_empty() { "-".to_string() } else { r.flags.join(",") };
        let (l, m, a) = r.representative;
        out.push_str(&format!("{} {} {} ({l},{m},{a})\n", r.distribution, r.cells, flags));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polysys::equilibria::restrict_to_x_axis;
    use num::BigRational;

    #[test]
    fn locus_values() {
        assert_eq!(double_hopf_locus(1.0), (1.0, -0.5));
        assert_eq!(double_hopf_locus(0.0), (0.0, -0.0));
        let (l, a) = double_hopf_locus(0.3);
        assert_eq!(antisaddle_traces(l, 0.3, a), [0.0, 0.0]);
    }

    #[test]
    fn distribution_flags() {
        assert!(Distribution::new(1, 1, 1).is_listed());
        assert!(!Distribution::new(1, 1, 0).outside_list());
        assert!(!Distribution::new(0, 0, 0).outside_list());
        assert!(Distribution::new(2, 2, 0).outside_list());
        assert!(Distribution::new(2, 2, 0).exceeds_bound());
        assert!(Distribution::new(0, 0, 3).outside_list());
        assert!(!Distribution::new(0, 0, 3).exceeds_bound());
        assert_eq!(Distribution::new(1, 0, 2).to_string(), "((1,0),2)");
    }

    #[test]
    fn section_zeros_are_rigid() {
        let sys = build_cubic_symbolic().unwrap();
        // -(x/2)(x-1)(x-2) = -x^3/2 + 3x^2/2 - x
        let r = |n: i64, d: i64| BigRational::new(n.into(), d.into());
        for (l, m, a) in [(0.0, 0.0, 0.0), (0.3, -1.7, 2.5), (-4.0, 0.125, -0.01)] {
            let inst = Instance::new(&sys, &cubic_assignment(l, m, a)).unwrap();
            let on_axis = restrict_to_x_axis(&inst.q).unwrap();
            assert_eq!(on_axis.coeffs(), &[r(0, 1), r(-1, 1), r(3, 2), r(-1, 2)]);
            assert!(cubic_sections(&inst, &IntegratorConfig::default()).is_ok());
        }
    }

    #[test]
    fn conservative_point_has_no_cycles() {
        let cfg = IntegratorConfig::verification();
        let r = analyze_distribution(0.0, 0.0, 0.0, &GridSpec::default(), &cfg).unwrap();
        assert_eq!(r.distribution, Distribution::default());
        assert_eq!(r.center_flags, [true, true]);
        for d in r.max_displacement {
            assert!(d <= 100.0 * (cfg.rtol + cfg.atol) * X_MAX_CAP, "{d}");
        }
    }

    #[test]
    fn double_hopf_unfolds_to_one_and_one() {
        let cfg = IntegratorConfig::verification();
        let (hit, tried) = double_hopf_search(&SEED_MUS, &GridSpec::default(), &cfg).unwrap();
        let seed = &tried[hit.expect("a seed unfolds to ((1,1),0)")];
        assert_eq!(seed.focus_signs, [-1, -1]);
        assert_eq!(seed.report.distribution, Distribution::new(1, 1, 0));
        for c in &seed.report.cycles {
            assert!(c.cycle.multiplier.agree(1e-3));
        }
        let [t0, t2] = antisaddle_traces(seed.report.lambda, seed.report.mu, seed.report.alpha);
        assert!(t0 > 0.0 && t2 > 0.0);
    }

    #[test]
    fn big_cycle_search_reports_a_listed_distribution() {
        let cfg = IntegratorConfig::verification();
        let out = big_cycle_search(-0.5, 0.0, 1, &GridSpec::default(), &cfg).unwrap();
        let i = out.found.expect("large cycle");
        let d = out.cells[i].distribution.clone().unwrap();
        assert!(d.nbig >= 1);
        assert!(d.flags().is_empty(), "{d}");
    }

    #[test]
    fn sweep_is_deterministic() {
        let cfg = IntegratorConfig::sweep();
        let grid = SweepGrid::centered(2, 0.2);
        let a = summarize(&sweep_distributions(&grid, &GridSpec::default(), &cfg).unwrap());
        let b = summarize(&sweep_distributions(&grid, &GridSpec::default(), &cfg).unwrap());
        assert_eq!(summary_text(&a), summary_text(&b));
        assert_eq!(a.iter().map(|r| r.cells).sum::<usize>(), 8);
    }
}
