//! Minimal SVG step plots of a fitted baseline (with its pointwise band) and
//! survivor curve.
//!
//! Every jump is drawn as one `<polyline class="step">` carrying its
//! location and value in `data-` attributes; band pieces are
//! `<rect class="band">` elements carrying the band ends and `c_hat`.

use std::fmt::Write as _;
use std::path::Path;

use super::fit_file::FitFile;
use crate::error::Result;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;

struct Frame {
    x_max: f64,
    y_max: f64,
}

impl Frame {
    fn x(&self, t: f64) -> f64 {
        MARGIN + (WIDTH - 2.0 * MARGIN) * t / self.x_max
    }

    fn y(&self, v: f64) -> f64 {
        HEIGHT - MARGIN - (HEIGHT - 2.0 * MARGIN) * v.clamp(0.0, self.y_max) / self.y_max
    }
}

fn header(out: &mut String, title: &str, frame: &Frame) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(out, r#"<title>{title}</title>"#);
    let (x0, y0) = (frame.x(0.0), frame.y(0.0));
    let _ = writeln!(
        out,
        r#"<line class="axis" x1="{x0:.3}" y1="{y0:.3}" x2="{:.3}" y2="{y0:.3}" stroke="black"/>"#,
        frame.x(frame.x_max)
    );
    let _ = writeln!(
        out,
        r#"<line class="axis" x1="{x0:.3}" y1="{y0:.3}" x2="{x0:.3}" y2="{:.3}" stroke="black"/>"#,
        frame.y(frame.y_max)
    );
    for i in 0..=4 {
        let t = frame.x_max * i as f64 / 4.0;
        let v = frame.y_max * i as f64 / 4.0;
        let _ = writeln!(
            out,
            r#"<text class="tick" x="{:.3}" y="{:.3}" font-size="11" text-anchor="middle">{t:.3}</text>"#,
            frame.x(t),
            y0 + 16.0
        );
        let _ = writeln!(
            out,
            r#"<text class="tick" x="{:.3}" y="{:.3}" font-size="11" text-anchor="end">{v:.3}</text>"#,
            x0 - 6.0,
            frame.y(v) + 4.0
        );
    }
}

/// Step polylines for jumps at `points` starting from `initial`.
fn steps(out: &mut String, frame: &Frame, initial: f64, points: &[(f64, f64)], color: &str) {
    if points.is_empty() {
        return;
    }
    let _ = writeln!(
        out,
        r#"<polyline class="base" points="{:.3},{:.3} {:.3},{:.3}" fill="none" stroke="{color}"/>"#,
        frame.x(0.0),
        frame.y(initial),
        frame.x(points[0].0),
        frame.y(initial)
    );
    let mut previous = initial;
    for (i, &(t, v)) in points.iter().enumerate() {
        let next = points.get(i + 1).map_or(frame.x_max, |p| p.0);
        let _ = writeln!(
            out,
            r#"<polyline class="step" data-t="{t:.16e}" data-value="{v:.16e}" points="{:.3},{:.3} {:.3},{:.3} {:.3},{:.3}" fill="none" stroke="{color}"/>"#,
            frame.x(t),
            frame.y(previous),
            frame.x(t),
            frame.y(v),
            frame.x(next),
            frame.y(v)
        );
        previous = v;
    }
}

fn x_max(fit: &FitFile) -> f64 {
    let last = fit.baseline.last().map_or(0.0, |r| r.location);
    let t = fit.diagnostics.t_star.max(last);
    if t.is_finite() && t > 0.0 {
        t
    } else {
        1.0
    }
}

pub fn baseline_svg(fit: &FitFile) -> String {
    let top = fit
        .baseline
        .iter()
        .flat_map(|r| [r.cumulative, r.upper])
        .filter(|v| v.is_finite())
        .fold(0.0f64, f64::max);
    let frame = Frame {
        x_max: x_max(fit),
        y_max: if top > 0.0 { top * 1.05 } else { 1.0 },
    };
    let mut out = String::new();
    header(&mut out, "Cumulative baseline hazard", &frame);
    for (i, r) in fit.baseline.iter().enumerate() {
        if !(r.lower.is_finite() && r.upper.is_finite()) {
            continue;
        }
        let next = fit.baseline.get(i + 1).map_or(frame.x_max, |n| n.location);
        let _ = writeln!(
            out,
            r##"<rect class="band" data-t="{:.16e}" data-lower="{:.16e}" data-upper="{:.16e}" data-c-hat="{:.16e}" x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="#9ecae1" fill-opacity="0.5"/>"##,
            r.location,
            r.lower,
            r.upper,
            r.c_hat,
            frame.x(r.location),
            frame.y(r.upper),
            frame.x(next) - frame.x(r.location),
            frame.y(r.lower) - frame.y(r.upper)
        );
    }
    let points: Vec<(f64, f64)> = fit.baseline.iter().map(|r| (r.location, r.cumulative)).collect();
    steps(&mut out, &frame, 0.0, &points, "#08519c");
    out.push_str("</svg>\n");
    out
}

pub fn survivor_svg(fit: &FitFile) -> String {
    let frame = Frame {
        x_max: x_max(fit),
        y_max: 1.0,
    };
    let mut out = String::new();
    header(&mut out, "Baseline survivor", &frame);
    steps(&mut out, &frame, 1.0, &fit.survivor, "#a50f15");
    out.push_str("</svg>\n");
    out
}

/// Writes `baseline.svg` and `survivor.svg` into `dir`.
pub fn emit_plots(fit: &FitFile, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("baseline.svg"), baseline_svg(fit))?;
    std::fs::write(dir.join("survivor.svg"), survivor_svg(fit))?;
    Ok(())
}
