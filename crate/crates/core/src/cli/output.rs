//! Text renderings: trajectory and occupancy CSV, plain PGM and SVG.

use std::fmt::Write as _;

use crate::control::Trajectory;
use crate::group::{GroupElement, QuotientElement};
use crate::kernel2d::Vec2;
use crate::reach::{Bitmap, ReachConfig};

pub fn trajectory_csv(tr: &Trajectory<GroupElement>, classes: Option<(&Trajectory<QuotientElement>, &[i64])>) -> String {
    let mut s = String::from("time,t,v1,v2");
    if classes.is_some() {
        s.push_str(",class_t,class_v1,class_v2,winding");
    }
    s.push('\n');
    for (i, (time, g)) in tr.samples.iter().enumerate() {
        let _ = write!(s, "{time},{},{},{}", g.t, g.v.x, g.v.y);
        if let Some((q, w)) = classes {
            let r = q.samples[i].1.rep;
            let _ = write!(s, ",{},{},{},{}", r.t, r.v.x, r.v.y, w[i]);
        }
        s.push('\n');
    }
    s
}

/// One row per cell: centre coordinates and the three layer flags.
pub fn occupancy_csv(cfg: &ReachConfig, plus: &Bitmap, minus: &Bitmap, estimate: &Bitmap) -> String {
    let n = cfg.resolution;
    let mut s = String::from("i,j,x,y,plus,minus,estimate\n");
    for j in 0..n {
        for i in 0..n {
            let c = cfg.cell_center(i, j);
            let _ = writeln!(
                s,
                "{i},{j},{},{},{},{},{}",
                c.x,
                c.y,
                plus.get(i, j) as u8,
                minus.get(i, j) as u8,
                estimate.get(i, j) as u8
            );
        }
    }
    s
}

/// Plain (P2) PGM, top row at the largest `y`; occupied cells are white.
pub fn pgm(map: &Bitmap) -> String {
    let n = map.resolution();
    let mut s = format!("P2\n{n} {n}\n255\n");
    for j in (0..n).rev() {
        let row: Vec<&str> = (0..n).map(|i| if map.get(i, j) { "255" } else { "0" }).collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}

/// Minimal SVG canvas over a data rectangle `[xmin, xmax] × [ymin, ymax]`.
pub struct Svg {
    bounds: [f64; 4],
    size: f64,
    body: String,
}

impl Svg {
    pub fn new(bounds: [f64; 4]) -> Self {
        Svg {
            bounds,
            size: 512.0,
            body: String::new(),
        }
    }

    /// Bounds enclosing `points` with a 5% margin.
    pub fn fit(points: impl IntoIterator<Item = Vec2>) -> Self {
        let mut b = [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY];
        for p in points {
            if p.is_finite() {
                b = [b[0].min(p.x), b[1].max(p.x), b[2].min(p.y), b[3].max(p.y)];
            }
        }
        if !b[0].is_finite() {
            b = [-1.0, 1.0, -1.0, 1.0];
        }
        let pad = 0.05 * (b[1] - b[0]).max(b[3] - b[2]).max(1e-9);
        Svg::new([b[0] - pad, b[1] + pad, b[2] - pad, b[3] + pad])
    }

    fn map(&self, p: Vec2) -> (f64, f64) {
        let [x0, x1, y0, y1] = self.bounds;
        (
            (p.x - x0) / (x1 - x0) * self.size,
            (y1 - p.y) / (y1 - y0) * self.size,
        )
    }

    pub fn polyline(&mut self, pts: &[Vec2], stroke: &str) {
        let coords: Vec<String> = pts
            .iter()
            .filter(|p| p.is_finite())
            .map(|&p| {
                let (x, y) = self.map(p);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        if coords.len() > 1 {
            let _ = writeln!(
                self.body,
                "<polyline fill=\"none\" stroke=\"{stroke}\" stroke-width=\"1\" points=\"{}\"/>",
                coords.join(" ")
            );
        }
    }

    pub fn dot(&mut self, p: Vec2, fill: &str) {
        let (x, y) = self.map(p);
        let _ = writeln!(self.body, "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"3\" fill=\"{fill}\"/>");
    }

    pub fn cells(&mut self, cfg: &ReachConfig, map: &Bitmap, fill: &str) {
        let (dx, dy) = cfg.cell_size();
        for (i, j) in map.iter_set() {
            let c = cfg.cell_center(i, j);
            let (x0, y0) = self.map(Vec2::new(c.x - 0.5 * dx, c.y + 0.5 * dy));
            let (x1, y1) = self.map(Vec2::new(c.x + 0.5 * dx, c.y - 0.5 * dy));
            let _ = writeln!(
                self.body,
                "<rect x=\"{x0:.2}\" y=\"{y0:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{fill}\"/>",
                x1 - x0,
                y1 - y0
            );
        }
    }

    pub fn label(&mut self, text: &str) {
        let _ = writeln!(
            self.body,
            "<text x=\"6\" y=\"16\" font-family=\"monospace\" font-size=\"12\">{}</text>",
            text.replace('&', "&amp;").replace('<', "&lt;")
        );
    }

    pub fn finish(self) -> String {
        let s = self.size;
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{s}\" height=\"{s}\" viewBox=\"0 0 {s} {s}\">\n\
             <rect width=\"{s}\" height=\"{s}\" fill=\"white\"/>\n{}</svg>\n",
            self.body
        )
    }
}
