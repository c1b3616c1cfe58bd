//! Command-line front end.
//!
//! Exit codes: 0 success, 1 input error, 2 analysis failure.

pub mod portrait;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Context as _;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::{json, Value};

use lienard_core::bifurcate::{continue_cycle, staircase_construct, StaircaseOptions, StaircaseShape, StepPolicy};
use lienard_core::cubic::{analyze_distribution, summarize, summary_text, sweep_distributions, Bucket, SweepGrid};
use lienard_core::cycles::{find_cycles, CycleReport, GridSpec, LimitCycle};
use lienard_core::integrate::{Anchor, IntegratorConfig, Section};
use lienard_core::polysys::{classify_infinity, Family, Instance, ParameterAssignment, PlanarSystem};
use lienard_core::rotation::{canonicalize, rotation_determinant, semidefinite_verdict};
use lienard_core::{Error, SystemDescription};

use crate::portrait::{render_portrait, PortraitSpec};

#[derive(Debug, Parser)]
#[command(name = "lienard", version, about = "Limit cycles and rotation parameters of polynomial planar systems")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// System description file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for artifacts and the manifest.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    rtol: Option<f64>,
    #[arg(long, global = true)]
    atol: Option<f64>,
    /// Number of points in the return-map seed grid.
    #[arg(long = "seed-grid", global = true)]
    seed_grid: Option<usize>,
    /// Print JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AnchorArg {
    Low,
    High,
}

impl From<AnchorArg> for Anchor {
    fn from(a: AnchorArg) -> Self {
        match a {
            AnchorArg::Low => Anchor::Low,
            AnchorArg::High => Anchor::High,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ShapeArg {
    Canonical,
    OddOnly,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Finite equilibria and singularities at infinity.
    Analyze,
    /// Rotation determinant and its sign verdict for every parameter.
    VerifyRotation {
        /// Also fix the even coefficients and print the reduced system.
        #[arg(long)]
        canonicalize: bool,
    },
    /// Limit cycles crossing a section of the x-axis.
    Cycles {
        /// Section as `a,b`.
        #[arg(long, default_value = "0,10")]
        section: String,
        #[arg(long, value_enum, default_value = "low")]
        anchor: AnchorArg,
    },
    /// Follows one cycle while a parameter moves.
    Continue {
        #[arg(long)]
        param: String,
        #[arg(long, allow_hyphen_values = true)]
        to: f64,
        /// Index of the seed cycle in increasing amplitude; the outermost by default.
        #[arg(long)]
        cycle: Option<usize>,
        #[arg(long, default_value = "0,10")]
        section: String,
        #[arg(long, value_enum, default_value = "low")]
        anchor: AnchorArg,
    },
    /// Searches coefficients with k nested cycles around the origin.
    Staircase {
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 10.0)]
        ratio: f64,
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        #[arg(long, default_value_t = 27)]
        budget: usize,
        #[arg(long, value_enum, default_value = "canonical")]
        shape: ShapeArg,
        /// Sign of the highest odd coefficient.
        #[arg(long = "top-sign", default_value_t = -1.0, allow_hyphen_values = true)]
        top_sign: f64,
    },
    /// Cycle distributions of the cubic system over a parameter grid.
    CubicSweep {
        /// Grid file with `lambda`, `mu` and `alpha` arrays.
        #[arg(long)]
        grid: Option<PathBuf>,
        /// Points per axis of the default centered grid.
        #[arg(long, default_value_t = 5)]
        points: usize,
        /// Half-width of the default centered grid.
        #[arg(long, default_value_t = 0.2)]
        half: f64,
    },
    /// SVG phase portrait.
    Portrait {
        /// Window as `x0,x1,y0,y1`.
        #[arg(long, allow_hyphen_values = true)]
        window: Option<String>,
        /// Seeds as `x,y;x,y;...`.
        #[arg(long, allow_hyphen_values = true)]
        seeds: Option<String>,
        #[arg(long, default_value_t = 15)]
        arrows: usize,
        #[arg(long, default_value_t = 20.0)]
        duration: f64,
        #[arg(long, default_value_t = 600.0)]
        width: f64,
        /// Overlay the limit cycles found on `--section`.
        #[arg(long)]
        overlay: bool,
        #[arg(long, default_value = "0,10")]
        section: String,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Analyze => "analyze",
            Command::VerifyRotation { .. } => "verify-rotation",
            Command::Cycles { .. } => "cycles",
            Command::Continue { .. } => "continue",
            Command::Staircase { .. } => "staircase",
            Command::CubicSweep { .. } => "cubic-sweep",
            Command::Portrait { .. } => "portrait",
        }
    }
}

/// What a command produced.
struct Outcome {
    text: String,
    json: Value,
    artifacts: Vec<(String, String)>,
    parameters: Value,
    /// Analysis failure detected after artifacts were produced.
    failure: Option<Error>,
}

impl Outcome {
    fn new(text: String, json: Value) -> Self {
        Self {
            text,
            json,
            artifacts: Vec::new(),
            parameters: Value::Null,
            failure: None,
        }
    }

    fn artifact(mut self, name: &str, body: String) -> Self {
        self.artifacts.push((name.to_string(), body));
        self
    }
}

struct Context {
    common: Common,
    config: IntegratorConfig,
    grid: GridSpec,
    description: Option<SystemDescription>,
}

impl Context {
    fn description(&self) -> anyhow::Result<&SystemDescription> {
        self.description
            .as_ref()
            .ok_or_else(|| Error::Invalid("--config FILE is required for this command".into()).into())
    }

    fn assigned(&self) -> anyhow::Result<(&PlanarSystem, &ParameterAssignment)> {
        let d = self.description()?;
        Ok((&d.system, d.require_assignment()?))
    }
}

/// Formats a float with the fixed precision used in every artifact.
pub fn num(v: f64) -> String {
    format!("{v:.12e}")
}

fn assignment_json(a: &ParameterAssignment) -> Value {
    json!(a.values)
}

fn parse_list(text: &str, n: usize, what: &str) -> anyhow::Result<Vec<f64>> {
    let vals: Result<Vec<f64>, _> = text.split(',').map(|t| t.trim().parse::<f64>()).collect();
    match vals {
        Ok(v) if v.len() == n => Ok(v),
        _ => Err(Error::Invalid(format!("{what} `{text}` needs {n} comma-separated numbers")).into()),
    }
}

fn section_arg(inst: &Instance, text: &str, anchor: AnchorArg) -> anyhow::Result<Section> {
    let v = parse_list(text, 2, "section")?;
    Ok(Section::detect(inst, v[0], v[1], anchor.into())?)
}

/// Exit code for an error that ended a command.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    if let Some(e) = err.downcast_ref::<Error>() {
        return match e {
            Error::MissingParameter(_)
            | Error::UnknownParameter(_)
            | Error::LengthMismatch { .. }
            | Error::NotLienardShape(_)
            | Error::FreeParameters(_)
            | Error::NonAffineProduct
            | Error::InvalidSection(_)
            | Error::Description { .. }
            | Error::Invalid(_) => 1,
            _ => 2,
        };
    }
    1
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let name = cli.command.name();
    match execute(cli, &argv) {
        Ok(failure) => match failure {
            None => 0,
            Some(e) => {
                eprintln!("{name}: {e}");
                2
            }
        },
        Err(e) => {
            eprintln!("{name}: {e:#}");
            exit_code(&e)
        }
    }
}

fn execute(cli: Cli, argv: &[OsString]) -> anyhow::Result<Option<Error>> {
    let base = match cli.command {
        Command::CubicSweep { .. } => IntegratorConfig::sweep(),
        _ => IntegratorConfig::verification(),
    };
    let config = base.with_tolerances(cli.common.rtol.unwrap_or(base.rtol), cli.common.atol.unwrap_or(base.atol));
    config.validate()?;
    let grid = GridSpec::geometric(cli.common.seed_grid.unwrap_or(64));
    let description = match &cli.common.config {
        Some(p) => Some(SystemDescription::load(p)?),
        None => None,
    };
    let ctx = Context {
        common: cli.common,
        config,
        grid,
        description,
    };
    let outcome = match &cli.command {
        Command::Analyze => analyze(&ctx)?,
        Command::VerifyRotation { canonicalize } => verify_rotation(&ctx, *canonicalize)?,
        Command::Cycles { section, anchor } => cycles(&ctx, section, *anchor)?,
        Command::Continue {
            param,
            to,
            cycle,
            section,
            anchor,
        } => continuation(&ctx, param, *to, *cycle, section, *anchor)?,
        Command::Staircase {
            k,
            ratio,
            scale,
            budget,
            shape,
            top_sign,
        } => staircase(&ctx, *k, *ratio, *scale, *budget, *shape, *top_sign)?,
        Command::CubicSweep { grid, points, half } => cubic_sweep(&ctx, grid.as_deref(), *points, *half)?,
        Command::Portrait {
            window,
            seeds,
            arrows,
            duration,
            width,
            overlay,
            section,
        } => portrait(&ctx, window.as_deref(), seeds.as_deref(), *arrows, *duration, *width, *overlay, section)?,
    };
    if let Some(dir) = &ctx.common.out {
        write_artifacts(dir, &ctx, cli.command.name(), argv, &outcome)?;
    }
    if ctx.common.json {
        println!("{}", serde_json::to_string_pretty(&outcome.json)?);
    } else {
        print!("{}", outcome.text);
    }
    Ok(outcome.failure)
}

fn write_artifacts(dir: &Path, ctx: &Context, command: &str, argv: &[OsString], outcome: &Outcome) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    for (name, body) in &outcome.artifacts {
        let path = dir.join(name);
        std::fs::write(&path, body).with_context(|| format!("cannot write {}", path.display()))?;
    }
    let parameters = match (&outcome.parameters, &ctx.description) {
        (Value::Null, Some(d)) => d.assignment.as_ref().map_or(Value::Null, assignment_json),
        (p, _) => p.clone(),
    };
    let timestamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    let manifest = json!({
        "tool": "lienard",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "arguments": argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect::<Vec<_>>(),
        "inputs": {
            "config": ctx.common.config.as_ref().map(|p| p.display().to_string()),
            "description": ctx.description.as_ref().map(SystemDescription::to_text),
        },
        "tolerances": {
            "integrator": ctx.config,
            "seed_grid": ctx.grid,
        },
        "parameters": parameters,
        "artifacts": outcome.artifacts.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>(),
        "timestamp": timestamp,
    });
    let path = dir.join("manifest.json");
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn analyze(ctx: &Context) -> anyhow::Result<Outcome> {
    let (sys, a) = ctx.assigned()?;
    let inst = Instance::new(sys, a)?;
    let eqs = inst.equilibria()?;
    let inf = classify_infinity(sys, a)?;

    let mut eq_csv = String::from("x,y,kind,trace,determinant\n");
    let mut text = format!("system: {sys}\n\nequilibria\n");
    let _ = writeln!(text, "{:>14} {:>14} {:>18} {:>14} {:>14}", "x", "y", "kind", "trace", "det");
    for e in eqs {
        let _ = writeln!(
            eq_csv,
            "{},{},{},{},{}",
            num(e.location[0]),
            num(e.location[1]),
            e.kind.label().replace(' ', "-"),
            num(e.trace),
            num(e.determinant)
        );
        let _ = writeln!(
            text,
            "{:>14.6e} {:>14.6e} {:>18} {:>14.6e} {:>14.6e}",
            e.location[0],
            e.location[1],
            e.kind.label(),
            e.trace,
            e.determinant
        );
    }
    let mut inf_csv = String::from("dx,dy,kind,hyperbolic,chart,eigen_u,eigen_v,index\n");
    text.push_str("\ninfinity\n");
    let _ = writeln!(text, "{:>10} {:>10} {:>11} {:>10} {:>5} {:>6}", "dx", "dy", "kind", "hyperbolic", "chart", "index");
    for s in &inf {
        let index = s.index.map_or(String::new(), |i| i.to_string());
        let _ = writeln!(
            inf_csv,
            "{},{},{},{},{:?},{},{},{}",
            num(s.direction[0]),
            num(s.direction[1]),
            s.kind.label(),
            s.hyperbolic,
            s.chart,
            num(s.eigenvalues[0]),
            num(s.eigenvalues[1]),
            index
        );
        let _ = writeln!(
            text,
            "{:>10.6} {:>10.6} {:>11} {:>10} {:>5} {:>6}",
            s.direction[0],
            s.direction[1],
            s.kind.label(),
            s.hyperbolic,
            format!("{:?}", s.chart),
            if index.is_empty() { "-" } else { &index }
        );
    }
    let json = json!({ "system": sys.to_string(), "equilibria": eqs, "infinity": inf });
    Ok(Outcome::new(text, json)
        .artifact("equilibria.csv", eq_csv)
        .artifact("infinity.csv", inf_csv))
}

fn verify_rotation(ctx: &Context, reduce: bool) -> anyhow::Result<Outcome> {
    let sys = &ctx.description()?.system;
    let mut report = String::new();
    let mut rows = Vec::new();
    for p in sys.parameters() {
        let delta = rotation_determinant(sys, p)?;
        let verdict = semidefinite_verdict(&delta)?;
        let witness = verdict.witness.as_ref().map(ToString::to_string);
        let _ = writeln!(report, "[{p}]\ndelta = \"{delta}\"\nverdict = \"{}\"", verdict.verdict);
        if let Some(w) = &witness {
            let _ = writeln!(report, "witness = \"{w}\"");
        }
        report.push('\n');
        rows.push(json!({
            "parameter": p,
            "delta": delta.to_string(),
            "verdict": verdict.verdict,
            "witness": witness,
        }));
    }
    let mut out = Outcome::new(report.clone(), json!({ "parameters": rows }));
    if reduce {
        let c = canonicalize(sys)?;
        let fixed: Vec<String> = c.fixed.iter().map(|(n, v)| format!("{n} = {v}")).collect();
        let reduced = SystemDescription {
            system: c.system,
            assignment: None,
        }
        .to_text();
        let _ = writeln!(out.text, "# fixed: {}\n{reduced}", fixed.join(", "));
        out.json["canonical"] = json!({ "fixed": fixed, "description": reduced });
        out = out.artifact("canonical.cfg", reduced);
    }
    Ok(out.artifact("rotation.toml", report))
}

const CYCLE_HEADER: &str = "section,s,x,period,multiplier_divergence,multiplier_fd,stability,multiplicity,signature,bucket\n";

fn cycle_row(out: &mut String, section: usize, c: &LimitCycle, bucket: Option<Bucket>) {
    let bucket = match bucket {
        Some(b) => format!("{b:?}").to_lowercase(),
        None => String::new(),
    };
    let _ = writeln!(
        out,
        "{section},{},{},{},{},{},{},{},\"{}\",{bucket}",
        num(c.s),
        num(c.x),
        num(c.period),
        num(c.multiplier.divergence),
        num(c.multiplier.finite_difference),
        c.stability.label(),
        c.multiplicity.label(),
        c.signature_text(),
    );
}

fn cycle_line(text: &mut String, c: &LimitCycle) {
    let _ = writeln!(
        text,
        "  s = {:.9}  x = {:.9}  T = {:.6}  m = {:.9} (fd {:.9})  {} {}  [{}]",
        c.s,
        c.x,
        c.period,
        c.multiplier.divergence,
        c.multiplier.finite_difference,
        c.stability.label(),
        c.multiplicity.label(),
        c.signature_text()
    );
}

fn samples_csv(report: &CycleReport) -> String {
    let mut out = String::from("s,image,displacement,period,outcome\n");
    for r in &report.samples {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            num(r.s),
            num(r.image),
            num(r.displacement),
            num(r.period),
            serde_json::to_value(r.outcome).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
        );
    }
    out
}

fn cycles(ctx: &Context, section: &str, anchor: AnchorArg) -> anyhow::Result<Outcome> {
    let (sys, a) = ctx.assigned()?;
    let mut csv = String::from(CYCLE_HEADER);
    let mut text = String::new();
    if sys.family == Family::Cubic {
        let r = analyze_distribution(a.get("lambda")?, a.get("mu")?, a.get("alpha")?, &ctx.grid, &ctx.config)?;
        let _ = writeln!(text, "distribution {}", r.distribution);
        for c in &r.cycles {
            cycle_row(&mut csv, c.section, &c.cycle, c.bucket);
            cycle_line(&mut text, &c.cycle);
        }
        for c in &r.semistable {
            cycle_row(&mut csv, 3, c, None);
            text.push_str("  semistable candidate:\n");
            cycle_line(&mut text, c);
        }
        let _ = writeln!(text, "center candidates (0,0), (2,0): {:?}", r.center_flags);
        for d in &r.diagnostics {
            let _ = writeln!(text, "  note: {d}");
        }
        let mut out = Outcome::new(text, json!(r)).artifact("cycles.csv", csv);
        out.json["distribution_text"] = json!(r.distribution.to_string());
        return Ok(out);
    }
    let inst = Instance::new(sys, a)?;
    let sec = section_arg(&inst, section, anchor)?;
    let r = find_cycles(&inst, &sec, &ctx.grid, &ctx.config)?;
    let _ = writeln!(text, "{} cycle(s) on ({}, {})", r.count(), sec.a, sec.b);
    for c in &r.cycles {
        cycle_row(&mut csv, 0, c, None);
        cycle_line(&mut text, c);
    }
    for c in &r.semistable {
        cycle_row(&mut csv, 1, c, None);
        text.push_str("  semistable candidate:\n");
        cycle_line(&mut text, c);
    }
    if r.center_candidate {
        text.push_str("center candidate: the return map is the identity to tolerance\n");
    }
    for d in &r.diagnostics {
        let _ = writeln!(text, "  note: {d}");
    }
    let samples = samples_csv(&r);
    Ok(Outcome::new(text, json!(r))
        .artifact("cycles.csv", csv)
        .artifact("samples.csv", samples))
}

fn continuation(
    ctx: &Context,
    param: &str,
    to: f64,
    index: Option<usize>,
    section: &str,
    anchor: AnchorArg,
) -> anyhow::Result<Outcome> {
    let (sys, a) = ctx.assigned()?;
    if !sys.has_parameter(param) {
        return Err(Error::UnknownParameter(param.to_string()).into());
    }
    let inst = Instance::new(sys, a)?;
    let sec = section_arg(&inst, section, anchor)?;
    let report = find_cycles(&inst, &sec, &ctx.grid, &ctx.config)?;
    let seed = match index {
        Some(i) => report.cycles.get(i),
        None => report.cycles.last(),
    }
    .ok_or_else(|| {
        Error::Invalid(format!(
            "no seed cycle {} among {} found at the starting assignment",
            index.map_or("(outermost)".to_string(), |i| i.to_string()),
            report.count()
        ))
    })?;
    let start = a.get(param)?;
    let branch = continue_cycle(sys, a, param, to, seed, &StepPolicy::for_range(start, to), &ctx.config)?;
    let mut csv = String::from("value,s,period,multiplier\n");
    for b in &branch.samples {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            num(b.value),
            num(b.cycle.s),
            num(b.cycle.period),
            num(b.cycle.m())
        );
    }
    let event = serde_json::to_string_pretty(&branch.termination)? + "\n";
    let last = branch.samples.last().map_or(start, |b| b.value);
    let text = format!(
        "{} samples of {param} from {start} to {last}\nevent: {}\n{event}",
        branch.samples.len(),
        branch.termination.label()
    );
    Ok(Outcome::new(text, json!(branch))
        .artifact("branch.csv", csv)
        .artifact("event.json", event))
}

fn staircase(
    ctx: &Context,
    k: usize,
    ratio: f64,
    scale: f64,
    budget: usize,
    shape: ShapeArg,
    top_sign: f64,
) -> anyhow::Result<Outcome> {
    let options = StaircaseOptions {
        shape: match shape {
            ShapeArg::Canonical => StaircaseShape::Canonical,
            ShapeArg::OddOnly => StaircaseShape::OddOnly,
        },
        top_sign,
        ..StaircaseOptions::default()
    };
    let r = staircase_construct(k, ratio, scale, budget, &options, &ctx.config)?;
    let description = SystemDescription {
        system: r.system.clone(),
        assignment: Some(r.assignment.clone()),
    }
    .to_text();
    let mut csv = String::from(CYCLE_HEADER);
    let mut text = format!(
        "k = {k}: {} after {} attempt(s), {} cycle(s)\n",
        if r.achieved { "achieved" } else { "not achieved" },
        r.attempts.len(),
        r.cycles.len()
    );
    for c in &r.cycles {
        cycle_row(&mut csv, 0, c, None);
        cycle_line(&mut text, c);
    }
    let mut attempts = String::from("ratio,scale,grid,count,nested\n");
    for t in &r.attempts {
        let _ = writeln!(attempts, "{},{},{},{},{}", num(t.ratio), num(t.scale), t.grid, t.count, t.nested);
    }
    let mut out = Outcome::new(text, json!(r))
        .artifact("staircase.cfg", description)
        .artifact("cycles.csv", csv)
        .artifact("attempts.csv", attempts);
    out.parameters = assignment_json(&r.assignment);
    if !r.achieved {
        out.failure = Some(Error::BudgetExhausted {
            attempts: r.attempts.len(),
            best: r.cycles.len(),
        });
    }
    Ok(out)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GridFile {
    lambda: Vec<f64>,
    mu: Vec<f64>,
    alpha: Vec<f64>,
}

fn cubic_sweep(ctx: &Context, file: Option<&Path>, points: usize, half: f64) -> anyhow::Result<Outcome> {
    let grid = match file {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Invalid(format!("cannot read {}: {e}", p.display())))?;
            let g: GridFile = toml::from_str(&text).map_err(|e| Error::Invalid(format!("{}: {}", p.display(), e.message())))?;
            SweepGrid {
                lambda: g.lambda,
                mu: g.mu,
                alpha: g.alpha,
            }
        }
        None => SweepGrid::centered(points, half),
    };
    if grid.cells().is_empty() {
        return Err(Error::Invalid("sweep grid has no cells".into()).into());
    }
    let cells = sweep_distributions(&grid, &ctx.grid, &ctx.config)?;
    let mut csv = String::from("lambda,mu,alpha,distribution,n0,n2,nbig,flags,center0,center2,escapes,unresolved,semistable\n");
    for c in &cells {
        let (dist, n) = match &c.distribution {
            Some(d) => (d.to_string(), [d.n0, d.n2, d.nbig].map(|v| v.to_string())),
            None => ("failed".to_string(), [String::new(), String::new(), String::new()]),
        };
        let _ = writeln!(
            csv,
            "{},{},{},\"{dist}\",{},{},{},{},{},{},{},{},{}",
            num(c.lambda),
            num(c.mu),
            num(c.alpha),
            n[0],
            n[1],
            n[2],
            c.flags().join(";"),
            c.center_flags[0],
            c.center_flags[1],
            c.escapes,
            c.unresolved,
            c.semistable
        );
    }
    let rows = summarize(&cells);
    let summary = summary_text(&rows);
    let text = format!("{} cells\n{summary}", cells.len());
    let mut out = Outcome::new(text, json!({ "cells": cells, "summary": rows }))
        .artifact("sweep.csv", csv)
        .artifact("summary.txt", summary);
    out.parameters = json!(grid);
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn portrait(
    ctx: &Context,
    window: Option<&str>,
    seeds: Option<&str>,
    arrows: usize,
    duration: f64,
    width: f64,
    overlay: bool,
    section: &str,
) -> anyhow::Result<Outcome> {
    let (sys, a) = ctx.assigned()?;
    let inst = Instance::new(sys, a)?;
    let (x, y) = match window {
        Some(w) => {
            let v = parse_list(w, 4, "window")?;
            ((v[0], v[1]), (v[2], v[3]))
        }
        None => {
            let xs: Vec<f64> = inst.equilibria()?.iter().map(|e| e.location[0]).collect();
            let lo = xs.iter().copied().fold(0.0, f64::min);
            let hi = xs.iter().copied().fold(0.0, f64::max);
            let c = 0.5 * (lo + hi);
            let h = (0.5 * (hi - lo) + 1.5).max(2.0);
            ((c - h, c + h), (-h, h))
        }
    };
    let mut spec = PortraitSpec::new(x, y);
    spec.arrows = arrows;
    spec.duration = duration;
    spec.width = width;
    spec.seeds = match seeds {
        Some(text) => text
            .split(';')
            .map(|p| parse_list(p, 2, "seed").map(|v| [v[0], v[1]]))
            .collect::<anyhow::Result<_>>()?,
        None => {
            let c = 0.5 * (x.0 + x.1);
            let h = 0.5 * (x.1 - x.0);
            (1..=6).map(|i| [c + h * i as f64 / 7.0, 0.0]).collect()
        }
    };
    let mut detected = Vec::new();
    let mut notes = Vec::new();
    if overlay {
        let found = if sys.family == Family::Cubic {
            analyze_distribution(a.get("lambda")?, a.get("mu")?, a.get("alpha")?, &ctx.grid, &ctx.config)
                .map(|r| r.cycles.into_iter().map(|c| c.cycle).collect::<Vec<_>>())
        } else {
            section_arg(&inst, section, AnchorArg::Low)
                .map_err(|e| match e.downcast::<Error>() {
                    Ok(e) => e,
                    Err(e) => Error::Invalid(e.to_string()),
                })
                .and_then(|sec| find_cycles(&inst, &sec, &ctx.grid, &ctx.config).map(|r| r.cycles))
        };
        match found {
            Ok(c) => detected = c,
            Err(e) => notes.push(format!("cycle overlay: {e}")),
        }
    }
    let mut svg = render_portrait(&inst, &spec, &detected, &ctx.config)?;
    for n in &notes {
        svg.push_str(&format!("<!-- {} -->\n", n.replace("--", "- -")));
    }
    let text = if ctx.common.out.is_some() {
        format!("portrait with {} seed(s) and {} cycle(s)\n", spec.seeds.len(), detected.len())
    } else {
        svg.clone()
    };
    let json = json!({
        "window": { "x": [x.0, x.1], "y": [y.0, y.1] },
        "seeds": spec.seeds,
        "cycles": detected.len(),
        "notes": notes,
    });
    Ok(Outcome::new(text, json).artifact("portrait.svg", svg))
}
