//! Static SVG figures: loss traces and camera-pose comparisons.
//!
//! Deterministic text output with no external renderer; the files open in
//! any browser or image viewer.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector3;

use crate::io::{atomic_write, IoError};
use crate::rotation::RotationSO3;

struct SvgCanvas {
    body: String,
    width: f64,
    height: f64,
}

impl SvgCanvas {
    fn new(width: f64, height: f64) -> Self {
        Self {
            body: String::new(),
            width,
            height,
        }
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, color: &str, width: f64) {
        writeln!(
            self.body,
            r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="{color}" stroke-width="{width}"/>"#
        )
        .unwrap();
    }

    fn polyline(&mut self, pts: &[(f64, f64)], color: &str) {
        if pts.is_empty() {
            return;
        }
        let coords: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        writeln!(
            self.body,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            coords.join(" ")
        )
        .unwrap();
    }

    fn circle(&mut self, x: f64, y: f64, r: f64, color: &str) {
        writeln!(
            self.body,
            r#"<circle cx="{x:.2}" cy="{y:.2}" r="{r:.2}" fill="{color}"/>"#
        )
        .unwrap();
    }

    fn text(&mut self, x: f64, y: f64, size: f64, content: &str) {
        writeln!(
            self.body,
            r#"<text x="{x:.2}" y="{y:.2}" font-size="{size}" font-family="sans-serif">{content}</text>"#
        )
        .unwrap();
    }

    fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0}\" height=\"{:.0}\" viewBox=\"0 0 {:.0} {:.0}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{}</svg>\n",
            self.width, self.height, self.width, self.height, self.body
        )
    }
}

/// Per-iteration loss curves of a calibration run.
pub fn plot_loss_trace(path: &Path, trace: &[(f64, f64)]) -> Result<(), IoError> {
    let (w, h, margin) = (640.0, 360.0, 48.0);
    let mut svg = SvgCanvas::new(w, h);
    let n = trace.len().max(1);
    let max_y = trace
        .iter()
        .flat_map(|(a, b)| [*a, *b])
        .filter(|v| v.is_finite())
        .fold(1e-9f64, f64::max);
    let sx = (w - 2.0 * margin) / n as f64;
    let sy = (h - 2.0 * margin) / max_y;
    let to_xy = |i: usize, v: f64| (margin + i as f64 * sx, h - margin - v * sy);
    svg.line(margin, h - margin, w - margin, h - margin, "black", 1.0);
    svg.line(margin, margin, margin, h - margin, "black", 1.0);
    let match_curve: Vec<(f64, f64)> = trace
        .iter()
        .enumerate()
        .map(|(i, (m, _))| to_xy(i, *m))
        .collect();
    let geom_curve: Vec<(f64, f64)> = trace
        .iter()
        .enumerate()
        .map(|(i, (_, g))| to_xy(i, *g))
        .collect();
    svg.polyline(&match_curve, "#1f77b4");
    svg.polyline(&geom_curve, "#d62728");
    svg.text(margin, margin - 12.0, 13.0, "matching loss (blue), geometric loss (red)");
    svg.text(w - margin - 60.0, h - margin + 28.0, 12.0, "iteration");
    svg.text(8.0, margin, 12.0, &format!("{max_y:.3}"));
    svg.text(8.0, h - margin, 12.0, "0");
    atomic_write(path, svg.finish().as_bytes())
}

/// Top-down (XY) and side (XZ) comparison of two camera sets.
///
/// Ground truth is drawn in black, the estimate in red; the view axis of
/// each camera is a short stroke from its center.
pub fn plot_camera_poses(
    path: &Path,
    gt: &[(RotationSO3, Vector3<f64>)],
    estimate: &[(RotationSO3, Vector3<f64>)],
) -> Result<(), IoError> {
    let (w, h, margin) = (720.0, 380.0, 40.0);
    let mut svg = SvgCanvas::new(w, h);
    let panel_w = (w - 3.0 * margin) / 2.0;
    let all: Vec<&Vector3<f64>> = gt.iter().map(|(_, c)| c).chain(estimate.iter().map(|(_, c)| c)).collect();
    let span = all
        .iter()
        .map(|c| c.norm())
        .fold(1e-9f64, f64::max)
        * 1.2;
    let scale = (panel_w / 2.0).min((h - 2.0 * margin) / 2.0) / span;

    let draw_panel = |svg: &mut SvgCanvas, x0: f64, pick: &dyn Fn(&Vector3<f64>) -> (f64, f64), label: &str| {
        let cx = x0 + panel_w / 2.0;
        let cy = h / 2.0;
        svg.text(x0, margin - 10.0, 13.0, label);
        svg.line(x0, cy, x0 + panel_w, cy, "#dddddd", 1.0);
        svg.line(cx, margin, cx, h - margin, "#dddddd", 1.0);
        for (set, color) in [(gt, "black"), (estimate, "#d62728")] {
            for (idx, (rot, center)) in set.iter().enumerate() {
                let (px, py) = pick(center);
                let x = cx + px * scale;
                let y = cy - py * scale;
                svg.circle(x, y, 4.0, color);
                // Optical axis direction in world coordinates.
                let axis = rot.to_matrix().transpose() * Vector3::z();
                let (ax, ay) = pick(&axis);
                svg.line(x, y, x + ax * 18.0, y - ay * 18.0, color, 1.5);
                svg.text(x + 5.0, y - 5.0, 11.0, &format!("{idx}"));
            }
        }
    };
    draw_panel(&mut svg, margin, &|c| (c.x, c.y), "top view (x-y); truth black, estimate red");
    draw_panel(&mut svg, 2.0 * margin + panel_w, &|c| (c.x, c.z), "side view (x-z)");
    atomic_write(path, svg.finish().as_bytes())
}
