//! Phase-portrait SVG: unsafe region, initial box, trajectories and the
//! certified level curve.
//!
//! Geometry is written in data coordinates inside one transformed group, so
//! element attributes can be read back without undoing a pixel mapping.
//! Numbers use Rust's shortest round-trip formatting; equal inputs give
//! equal bytes.

use std::fmt::Write as _;

use anyhow::{bail, Result};
use barricade::certify::{Certificate, SafetySpec};
use barricade::simulate::Trace;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 48.0;
/// View extends this fraction of the safe rectangle beyond each side.
const PAD: f64 = 0.25;

/// Rotated ellipse `{x : (x - c)ᵀ P (x - c) = r²}` in SVG terms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EllipseShape {
    pub cx: f64,
    pub cy: f64,
    pub rx: f64,
    pub ry: f64,
    /// Rotation of the `rx` axis from the `+x` axis, degrees.
    pub angle_deg: f64,
}

impl EllipseShape {
    /// Level curve `{v = level}` of a planar certificate, or `None` when it
    /// is empty or `P` is not positive definite.
    pub fn of(cert: &Certificate) -> Option<Self> {
        let g = &cert.generator;
        Self::from_quadratic(&g.p, &g.q, g.c, cert.level)
    }

    /// Level curve `{xᵀPx + qᵀx + c0 = level}` in the plane.
    pub fn from_quadratic(p: &[Vec<f64>], q: &[f64], c0: f64, level: f64) -> Option<Self> {
        if p.len() != 2 || q.len() != 2 {
            return None;
        }
        let (a, b, c) = (p[0][0], p[0][1], p[1][1]);
        let det = a * c - b * b;
        if !(a > 0.0 && det > 0.0) {
            return None;
        }
        // center solves 2 P x = -q
        let cx = (-q[0] * c + q[1] * b) / (2.0 * det);
        let cy = (-q[1] * a + q[0] * b) / (2.0 * det);
        let min_value = a * cx * cx + 2.0 * b * cx * cy + c * cy * cy + q[0] * cx + q[1] * cy + c0;
        let r2 = level - min_value;
        if !(r2 > 0.0) {
            return None;
        }
        let mean = 0.5 * (a + c);
        let spread = (0.25 * (a - c) * (a - c) + b * b).sqrt();
        let (big, small) = (mean + spread, mean - spread);
        // eigenvector of the larger eigenvalue is the short axis
        let phi = 0.5 * (2.0 * b).atan2(a - c);
        Some(EllipseShape {
            cx,
            cy,
            rx: (r2 / big).sqrt(),
            ry: (r2 / small).sqrt(),
            angle_deg: phi.to_degrees(),
        })
    }

    /// Point at parameter `t` on the drawn curve.
    pub fn point(&self, t: f64) -> [f64; 2] {
        let (s, c) = self.angle_deg.to_radians().sin_cos();
        let (u, v) = (self.rx * t.cos(), self.ry * t.sin());
        [self.cx + c * u - s * v, self.cy + s * u + c * v]
    }
}

struct View {
    x: (f64, f64),
    y: (f64, f64),
}

impl View {
    fn of(spec: &SafetySpec) -> Self {
        let pad = |lo: f64, hi: f64| {
            let w = hi - lo;
            (lo - PAD * w, hi + PAD * w)
        };
        let (d, t) = (spec.safe.dims[0], spec.safe.dims[1]);
        View {
            x: pad(d.lo, d.hi),
            y: pad(t.lo, t.hi),
        }
    }

    fn sx(&self) -> f64 {
        (WIDTH - 2.0 * MARGIN) / (self.x.1 - self.x.0)
    }

    fn sy(&self) -> f64 {
        (HEIGHT - 2.0 * MARGIN) / (self.y.1 - self.y.0)
    }

    fn px(&self, p: &[f64]) -> (f64, f64) {
        (
            MARGIN + (p[0] - self.x.0) * self.sx(),
            HEIGHT - MARGIN - (p[1] - self.y.0) * self.sy(),
        )
    }
}

fn rect_path(x0: f64, y0: f64, x1: f64, y1: f64) -> String {
    format!("M{x0} {y0}H{x1}V{y1}H{x0}Z")
}

/// Renders the portrait. Traces and spec must be planar; a certificate, when
/// given, must match the spec's arity.
pub fn render(spec: &SafetySpec, traces: &[Trace], cert: Option<&Certificate>) -> Result<String> {
    if spec.arity() != 2 {
        bail!("phase portraits need a 2-state system, got {}", spec.arity());
    }
    if let Some(c) = cert {
        if c.spec.arity() != spec.arity() || c.generator.p.len() != spec.arity() {
            bail!(
                "certificate is for {} states, system has {}",
                c.spec.arity(),
                spec.arity()
            );
        }
    }
    if let Some(t) = traces.iter().find(|t| t.states.iter().any(|s| s.len() != 2)) {
        bail!("trace has {} states, expected 2", t.states[0].len());
    }
    let v = View::of(spec);
    let mut s = String::new();
    let w = &mut s;
    writeln!(w, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#)?;
    writeln!(w, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#)?;
    // data → pixel: x' = MARGIN + (x - x0)·sx, y' = HEIGHT - MARGIN - (y - y0)·sy
    let (sx, sy) = (v.sx(), v.sy());
    let tx = MARGIN - v.x.0 * sx;
    let ty = HEIGHT - MARGIN + v.y.0 * sy;
    writeln!(w, r#"<g id="data" transform="matrix({sx} 0 0 {} {tx} {ty})">"#, -sy)?;
    let (d, t) = (spec.safe.dims[0], spec.safe.dims[1]);
    writeln!(
        w,
        r#"<path class="unsafe" fill="rgb(244,182,182)" fill-rule="evenodd" d="{}{}"/>"#,
        rect_path(v.x.0, v.y.0, v.x.1, v.y.1),
        rect_path(d.lo, t.lo, d.hi, t.hi)
    )?;
    let (a, b) = (spec.initial.dims[0], spec.initial.dims[1]);
    writeln!(
        w,
        r#"<rect class="initial" x="{}" y="{}" width="{}" height="{}" fill="rgb(155,212,155)" stroke="rgb(46,125,50)" vector-effect="non-scaling-stroke"/>"#,
        a.lo,
        b.lo,
        a.hi - a.lo,
        b.hi - b.lo
    )?;
    for tr in traces {
        let pts: Vec<String> = tr.states.iter().map(|p| format!("{},{}", p[0], p[1])).collect();
        writeln!(
            w,
            r#"<polyline class="trace" fill="none" stroke="rgb(31,78,156)" vector-effect="non-scaling-stroke" points="{}"/>"#,
            pts.join(" ")
        )?;
    }
    if let Some(e) = cert.and_then(EllipseShape::of) {
        writeln!(
            w,
            r#"<ellipse class="level-set" cx="{}" cy="{}" rx="{}" ry="{}" transform="rotate({} {} {})" fill="none" stroke="black" stroke-width="2" vector-effect="non-scaling-stroke"/>"#,
            e.cx, e.cy, e.rx, e.ry, e.angle_deg, e.cx, e.cy
        )?;
    }
    writeln!(w, "</g>")?;
    // markers in pixel space so they stay round
    for tr in traces {
        if let (Some(first), Some(last)) = (tr.states.first(), tr.states.last()) {
            let (x, y) = v.px(first);
            writeln!(w, r#"<text class="start" x="{x}" y="{y}" text-anchor="middle" dominant-baseline="central" font-size="14">∗</text>"#)?;
            let (x, y) = v.px(last);
            writeln!(w, r#"<circle class="end" cx="{x}" cy="{y}" r="3" fill="white" stroke="black"/>"#)?;
        }
    }
    let (x0, y0) = v.px(&[v.x.0, v.y.0]);
    let (x1, y1) = v.px(&[v.x.1, v.y.1]);
    writeln!(w, r#"<path class="frame" fill="none" stroke="black" d="{}"/>"#, rect_path(x0, y1, x1, y0))?;
    for k in [d.lo, 0.0, d.hi] {
        let (x, _) = v.px(&[k, 0.0]);
        writeln!(w, r#"<text x="{x}" y="{}" text-anchor="middle" font-size="12">{k}</text>"#, y0 + 16.0)?;
    }
    for k in [t.lo, 0.0, t.hi] {
        let (_, y) = v.px(&[0.0, k]);
        writeln!(w, r#"<text x="{}" y="{y}" text-anchor="end" dominant-baseline="central" font-size="12">{}</text>"#, x0 - 6.0, (k * 1000.0).round() / 1000.0)?;
    }
    writeln!(w, r#"<text x="{}" y="{}" text-anchor="middle" font-size="14">d_err</text>"#, 0.5 * (x0 + x1), HEIGHT - 8.0)?;
    writeln!(w, r#"<text x="14" y="{}" text-anchor="middle" font-size="14" transform="rotate(-90 14 {})">θ_e</text>"#, 0.5 * (y0 + y1), 0.5 * (y0 + y1))?;
    writeln!(w, "</svg>")?;
    Ok(s)
}
