//! SVG phase portraits.

use std::fmt::Write as _;

use lienard_core::cycles::{orbit_polyline, LimitCycle, Stability};
use lienard_core::integrate::{integrate, IntegratorConfig};
use lienard_core::polysys::{EquilibriumKind, Instance, VectorField};
use lienard_core::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PortraitSpec {
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub seeds: Vec<[f64; 2]>,
    /// Arrow glyphs per side of the window; 0 disables them.
    pub arrows: usize,
    /// Integration time per seed.
    pub duration: f64,
    /// Width of the picture in pixels.
    pub width: f64,
}

impl PortraitSpec {
    pub fn new(x: (f64, f64), y: (f64, f64)) -> Self {
        Self {
            x,
            y,
            seeds: Vec::new(),
            arrows: 15,
            duration: 20.0,
            width: 600.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |(a, b): (f64, f64)| a.is_finite() && b.is_finite() && a < b;
        if !ok(self.x) || !ok(self.y) {
            return Err(Error::Invalid(format!("empty portrait window {:?} x {:?}", self.x, self.y)));
        }
        if !(self.duration > 0.0 && self.width > 0.0) {
            return Err(Error::Invalid("portrait duration and width must be positive".into()));
        }
        Ok(())
    }
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
    w: f64,
    h: f64,
}

impl Frame {
    fn px(&self, p: [f64; 2]) -> (f64, f64) {
        let u = (p[0] - self.x.0) / (self.x.1 - self.x.0) * self.w;
        let v = self.h - (p[1] - self.y.0) / (self.y.1 - self.y.0) * self.h;
        (u, v)
    }

    fn inside(&self, p: [f64; 2]) -> bool {
        (self.x.0..=self.x.1).contains(&p[0]) && (self.y.0..=self.y.1).contains(&p[1])
    }
}

/// Splits a polyline into runs inside the frame and renders each as path data.
fn path_data(frame: &Frame, points: &[[f64; 2]], closed: bool) -> Vec<String> {
    let mut runs: Vec<Vec<(f64, f64)>> = Vec::new();
    let mut current = Vec::new();
    for &p in points {
        if frame.inside(p) {
            current.push(frame.px(p));
        } else if !current.is_empty() {
            runs.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        runs.push(current);
    }
    let whole = runs.len() == 1 && runs[0].len() == points.len();
    runs.into_iter()
        .filter(|r| r.len() >= 2)
        .map(|r| {
            let mut d = String::new();
            for (i, (u, v)) in r.iter().enumerate() {
                let _ = write!(d, "{}{u:.2},{v:.2}", if i == 0 { "M" } else { " L" });
            }
            if closed && whole {
                d.push_str(" Z");
            }
            d
        })
        .collect()
}

fn cycle_style(s: Stability) -> (&'static str, &'static str) {
    match s {
        Stability::Stable => ("#1f5fbf", ""),
        Stability::Unstable => ("#c0392b", " stroke-dasharray=\"6 4\""),
        Stability::SemistableCandidate => ("#7d3c98", " stroke-dasharray=\"2 3\""),
    }
}

/// Trajectories from the seeds, field arrows, classified equilibria and detected cycles.
pub fn render_portrait(inst: &Instance, spec: &PortraitSpec, detected: &[LimitCycle], config: &IntegratorConfig) -> Result<String> {
    spec.validate()?;
    let aspect = (spec.y.1 - spec.y.0) / (spec.x.1 - spec.x.0);
    let frame = Frame {
        x: spec.x,
        y: spec.y,
        w: spec.width,
        h: (spec.width * aspect).clamp(50.0, 4.0 * spec.width),
    };
    let diag = (spec.x.1 - spec.x.0).hypot(spec.y.1 - spec.y.0);
    let mut cfg = config.with_max_time(spec.duration).with_max_step(spec.duration / 2000.0);
    let reach = spec.x.0.abs().max(spec.x.1.abs()).max(spec.y.0.abs()).max(spec.y.1.abs());
    cfg.escape_radius = 2.0 * (reach + diag);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.2} {h:.2}\">",
        w = frame.w,
        h = frame.h
    );
    let _ = writeln!(svg, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");

    let (ox, oy) = frame.px([0.0, 0.0]);
    let _ = writeln!(svg, "<g class=\"axes\" stroke=\"#bbbbbb\" stroke-width=\"1\">");
    if frame.inside([spec.x.0, 0.0]) || (spec.y.0..=spec.y.1).contains(&0.0) {
        let _ = writeln!(svg, "<line x1=\"0\" y1=\"{oy:.2}\" x2=\"{:.2}\" y2=\"{oy:.2}\"/>", frame.w);
    }
    if (spec.x.0..=spec.x.1).contains(&0.0) {
        let _ = writeln!(svg, "<line x1=\"{ox:.2}\" y1=\"0\" x2=\"{ox:.2}\" y2=\"{:.2}\"/>", frame.h);
    }
    let _ = writeln!(svg, "</g>");

    if spec.arrows > 0 {
        let n = spec.arrows;
        let cell = frame.w.min(frame.h) / n as f64;
        let _ = writeln!(svg, "<g class=\"arrows\" stroke=\"#999999\" stroke-width=\"1\" fill=\"none\">");
        for i in 0..n {
            for j in 0..n {
                let x = spec.x.0 + (spec.x.1 - spec.x.0) * (i as f64 + 0.5) / n as f64;
                let y = spec.y.0 + (spec.y.1 - spec.y.0) * (j as f64 + 0.5) / n as f64;
                let [fx, fy] = inst.eval(x, y);
                // Pixel-space direction; the y axis points down.
                let (du, dv) = (fx / (spec.x.1 - spec.x.0) * frame.w, -fy / (spec.y.1 - spec.y.0) * frame.h);
                let norm = du.hypot(dv);
                if !(norm > 0.0) || !norm.is_finite() {
                    continue;
                }
                let (du, dv) = (du / norm * 0.35 * cell, dv / norm * 0.35 * cell);
                let (u, v) = frame.px([x, y]);
                let (u0, v0, u1, v1) = (u - du, v - dv, u + du, v + dv);
                let (hu, hv) = (-du * 0.4, -dv * 0.4);
                let _ = writeln!(
                    svg,
                    "<path d=\"M{u0:.2},{v0:.2} L{u1:.2},{v1:.2} M{:.2},{:.2} L{u1:.2},{v1:.2} L{:.2},{:.2}\"/>",
                    u1 + hu - hv * 0.6,
                    v1 + hv + hu * 0.6,
                    u1 + hu + hv * 0.6,
                    v1 + hv - hu * 0.6,
                );
            }
        }
        let _ = writeln!(svg, "</g>");
    }

    let _ = writeln!(svg, "<g class=\"trajectories\" stroke=\"#333333\" stroke-width=\"1.2\" fill=\"none\">");
    for (k, seed) in spec.seeds.iter().enumerate() {
        match integrate(inst, *seed, &cfg) {
            Ok(traj) => {
                let pts: Vec<[f64; 2]> = traj.samples.iter().map(|s| [s[1], s[2]]).collect();
                for d in path_data(&frame, &pts, false) {
                    let _ = writeln!(svg, "<path class=\"trajectory\" data-seed=\"{k}\" d=\"{d}\"/>");
                }
            }
            Err(e) => {
                let _ = writeln!(svg, "<!-- seed {k} ({:.4}, {:.4}): {} -->", seed[0], seed[1], comment_safe(&e.to_string()));
            }
        }
    }
    let _ = writeln!(svg, "</g>");

    let _ = writeln!(svg, "<g class=\"cycles\" stroke-width=\"2.5\" fill=\"none\">");
    for (k, c) in detected.iter().enumerate() {
        match orbit_polyline(inst, c.x, c.period, config) {
            Ok(orbit) => {
                let (color, dash) = cycle_style(c.stability);
                for d in path_data(&frame, &orbit, true) {
                    let _ = writeln!(
                        svg,
                        "<path class=\"cycle {}\" data-cycle=\"{k}\" stroke=\"{color}\"{dash} d=\"{d}\"/>",
                        c.stability.label()
                    );
                }
            }
            Err(e) => {
                let _ = writeln!(svg, "<!-- cycle {k}: {} -->", comment_safe(&e.to_string()));
            }
        }
    }
    let _ = writeln!(svg, "</g>");

    let _ = writeln!(svg, "<g class=\"equilibria\" stroke=\"black\" stroke-width=\"1.5\">");
    match inst.equilibria() {
        Ok(eqs) => {
            for e in eqs.iter().filter(|e| frame.inside(e.location)) {
                let (u, v) = frame.px(e.location);
                let _ = writeln!(svg, "{}", glyph(e.kind, u, v));
            }
        }
        Err(e) => {
            let _ = writeln!(svg, "<!-- equilibria: {} -->", comment_safe(&e.to_string()));
        }
    }
    let _ = writeln!(svg, "</g>");
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn glyph(kind: EquilibriumKind, u: f64, v: f64) -> String {
    let r = 5.0;
    let class = kind.label().replace(' ', "-");
    match kind {
        EquilibriumKind::Saddle => format!(
            "<path class=\"equilibrium {class}\" fill=\"none\" d=\"M{:.2},{:.2} L{:.2},{:.2} M{:.2},{:.2} L{:.2},{:.2}\"/>",
            u - r,
            v - r,
            u + r,
            v + r,
            u - r,
            v + r,
            u + r,
            v - r
        ),
        EquilibriumKind::StableNode | EquilibriumKind::StableFocus => {
            format!("<circle class=\"equilibrium {class}\" cx=\"{u:.2}\" cy=\"{v:.2}\" r=\"{r}\" fill=\"black\"/>")
        }
        EquilibriumKind::UnstableNode | EquilibriumKind::UnstableFocus => {
            format!("<circle class=\"equilibrium {class}\" cx=\"{u:.2}\" cy=\"{v:.2}\" r=\"{r}\" fill=\"white\"/>")
        }
        EquilibriumKind::CenterCandidate => format!(
            "<g class=\"equilibrium {class}\"><circle cx=\"{u:.2}\" cy=\"{v:.2}\" r=\"{r}\" fill=\"white\"/><circle cx=\"{u:.2}\" cy=\"{v:.2}\" r=\"1.5\" fill=\"black\"/></g>"
        ),
        EquilibriumKind::Degenerate => format!(
            "<rect class=\"equilibrium {class}\" x=\"{:.2}\" y=\"{:.2}\" width=\"{}\" height=\"{}\" fill=\"gray\"/>",
            u - r,
            v - r,
            2.0 * r,
            2.0 * r
        ),
    }
}

fn comment_safe(s: &str) -> String {
    s.replace("--", "- -")
}

#[cfg(test)]
mod tests {
    use super::*;
    use lienard_core::polysys::{linear_center, ParameterAssignment};

    #[test]
    fn linear_center_gives_closed_rings() {
        let inst = Instance::new(&linear_center(), &ParameterAssignment::new()).unwrap();
        let mut spec = PortraitSpec::new((-2.0, 2.0), (-2.0, 2.0));
        spec.seeds = vec![[0.4, 0.0], [0.8, 0.0], [1.2, 0.0], [1.6, 0.0]];
        spec.duration = 7.0;
        let svg = render_portrait(&inst, &spec, &[], &IntegratorConfig::verification()).unwrap();
        assert_eq!(svg.matches("class=\"trajectory\"").count(), 4);
        assert!(svg.contains("center-candidate"));
        let again = render_portrait(&inst, &spec, &[], &IntegratorConfig::verification()).unwrap();
        assert_eq!(svg, again);
    }

    #[test]
    fn empty_window_is_rejected() {
        let inst = Instance::new(&linear_center(), &ParameterAssignment::new()).unwrap();
        let spec = PortraitSpec::new((1.0, 1.0), (-1.0, 1.0));
        assert!(render_portrait(&inst, &spec, &[], &IntegratorConfig::default()).is_err());
    }
}
