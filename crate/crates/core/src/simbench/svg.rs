use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::surface::SurfaceGrid;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvgStyle {
    pub width: f64,
    pub height: f64,
    pub margin: f64,
    pub show_points: bool,
    pub min_point_radius: f64,
    pub max_point_radius: f64,
}

impl Default for SvgStyle {
    fn default() -> Self {
        SvgStyle {
            width: 640.0,
            height: 640.0,
            margin: 48.0,
            show_points: true,
            min_point_radius: 1.5,
            max_point_radius: 6.0,
        }
    }
}

/// Affine map from parameter space to SVG pixels (y axis flipped).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewportMap {
    pub lower: [f64; 2],
    pub upper: [f64; 2],
    pub origin: [f64; 2],
    pub size: [f64; 2],
}

impl ViewportMap {
    pub fn new(grid: &SurfaceGrid, style: &SvgStyle) -> Self {
        let b = &grid.param_box;
        ViewportMap {
            lower: [b.lower[0], b.lower[1]],
            upper: [b.upper[0], b.upper[1]],
            origin: [style.margin, style.margin],
            size: [style.width - 2.0 * style.margin, style.height - 2.0 * style.margin],
        }
    }

    pub fn to_px(&self, theta: [f64; 2]) -> [f64; 2] {
        let u = (theta[0] - self.lower[0]) / (self.upper[0] - self.lower[0]);
        let v = (theta[1] - self.lower[1]) / (self.upper[1] - self.lower[1]);
        [self.origin[0] + u * self.size[0], self.origin[1] + (1.0 - v) * self.size[1]]
    }

    pub fn from_px(&self, px: [f64; 2]) -> [f64; 2] {
        let u = (px[0] - self.origin[0]) / self.size[0];
        let v = 1.0 - (px[1] - self.origin[1]) / self.size[1];
        [
            self.lower[0] + u * (self.upper[0] - self.lower[0]),
            self.lower[1] + v * (self.upper[1] - self.lower[1]),
        ]
    }
}

/// Five-stop viridis approximation, linearly interpolated.
fn palette(t: f64) -> String {
    const STOPS: [[f64; 3]; 5] = [
        [68.0, 1.0, 84.0],
        [59.0, 82.0, 139.0],
        [33.0, 145.0, 140.0],
        [94.0, 201.0, 98.0],
        [253.0, 231.0, 37.0],
    ];
    let t = t.clamp(0.0, 1.0) * 4.0;
    let i = (t.floor() as usize).min(3);
    let f = t - i as f64;
    let c: Vec<u8> = (0..3)
        .map(|k| (STOPS[i][k] + f * (STOPS[i + 1][k] - STOPS[i][k])).round() as u8)
        .collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

fn coord(v: f64) -> String {
    format!("{v:.3}")
}

fn star_points(center: [f64; 2], r: f64) -> String {
    (0..10)
        .map(|k| {
            let rad = if k % 2 == 0 { r } else { 0.45 * r };
            let a = std::f64::consts::PI * (k as f64 / 5.0 - 0.5);
            format!("{},{}", coord(center[0] + rad * a.cos()), coord(center[1] + rad * a.sin()))
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Cell edges along one axis: midpoints between lattice values, clipped to
/// the box.
fn edges(values: &[f64]) -> Vec<f64> {
    let mut e = Vec::with_capacity(values.len() + 1);
    e.push(values[0]);
    for w in values.windows(2) {
        e.push(0.5 * (w[0] + w[1]));
    }
    e.push(values[values.len() - 1]);
    e
}

/// Filled level-set map, one polygon per grid cell, with the evaluated
/// points (radius growing with precision) and a star at the best parameters.
pub fn render_contour_svg(grid: &SurfaceGrid, style: &SvgStyle) -> Result<String> {
    if grid.param_box.dim() != 2 || grid.resolution.len() != 2 {
        return Err(Error::argument(format!(
            "contour rendering needs a 2-dimensional grid, got {}",
            grid.param_box.dim()
        )));
    }
    let (n1, n2) = (grid.resolution[0], grid.resolution[1]);
    if grid.points.len() != n1 * n2 {
        return Err(Error::argument("grid points do not match its resolution"));
    }
    let map = ViewportMap::new(grid, style);
    let xs: Vec<f64> = (0..n1).map(|i| grid.points[i * n2].0[0]).collect();
    let ys: Vec<f64> = (0..n2).map(|j| grid.points[j].0[1]).collect();
    let (ex, ey) = (edges(&xs), edges(&ys));
    let levels = grid.distinct_levels();
    let color_of = |level: i64| -> String {
        if levels.len() < 2 {
            return palette(0.5);
        }
        let pos = levels.binary_search(&level).unwrap_or(0);
        palette(pos as f64 / (levels.len() - 1) as f64)
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">"#,
        style.width, style.height, style.width, style.height
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<g id="cells" stroke="none">"#);
    for i in 0..n1 {
        for j in 0..n2 {
            let k = i * n2 + j;
            let corners = [
                map.to_px([ex[i], ey[j]]),
                map.to_px([ex[i + 1], ey[j]]),
                map.to_px([ex[i + 1], ey[j + 1]]),
                map.to_px([ex[i], ey[j + 1]]),
            ];
            let pts = corners
                .iter()
                .map(|c| format!("{},{}", coord(c[0]), coord(c[1])))
                .collect::<Vec<_>>()
                .join(" ");
            let _ = writeln!(
                s,
                r#"<polygon class="cell" data-level="{}" points="{}" fill="{}"/>"#,
                grid.levels[k],
                pts,
                color_of(grid.levels[k])
            );
        }
    }
    let _ = writeln!(s, "</g>");

    if style.show_points && !grid.evaluated.is_empty() {
        let precision: Vec<f64> = grid
            .evaluated
            .iter()
            .map(|r| if r.std_dev > 0.0 { 1.0 / (r.std_dev * r.std_dev) } else { f64::INFINITY })
            .collect();
        let finite_max = precision.iter().copied().filter(|p| p.is_finite()).fold(0.0, f64::max);
        let _ = writeln!(s, r##"<g id="evaluations" fill="#ffffff" fill-opacity="0.7" stroke="#000000" stroke-width="0.5">"##);
        for (r, p) in grid.evaluated.iter().zip(&precision) {
            let frac = if !p.is_finite() || finite_max == 0.0 { 1.0 } else { p / finite_max };
            let radius = style.min_point_radius + frac * (style.max_point_radius - style.min_point_radius);
            let c = map.to_px([r.theta.0[0], r.theta.0[1]]);
            let _ = writeln!(
                s,
                r#"<circle class="evaluation" cx="{}" cy="{}" r="{}"/>"#,
                coord(c[0]),
                coord(c[1]),
                coord(radius)
            );
        }
        let _ = writeln!(s, "</g>");
    }

    if let Some(best) = &grid.best_theta {
        let c = map.to_px([best.0[0], best.0[1]]);
        let _ = writeln!(
            s,
            r##"<polygon id="best-theta" data-cx="{}" data-cy="{}" points="{}" fill="#ffffff" stroke="#000000" stroke-width="1"/>"##,
            coord(c[0]),
            coord(c[1]),
            star_points(c, 10.0)
        );
    }

    let b = &grid.param_box;
    let names = |i: usize| b.names.get(i).cloned().unwrap_or_else(|| format!("theta{}", i + 1));
    let _ = writeln!(
        s,
        r#"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        coord(map.origin[0]),
        coord(map.origin[1]),
        coord(map.size[0]),
        coord(map.size[1])
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="14">{}</text>"#,
        coord(style.width / 2.0),
        coord(style.height - style.margin / 4.0),
        names(0)
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="14" transform="rotate(-90 {} {})">{}</text>"#,
        coord(style.margin / 3.0),
        coord(style.height / 2.0),
        coord(style.margin / 3.0),
        coord(style.height / 2.0),
        names(1)
    );
    s.push_str("</svg>\n");
    Ok(s)
}
