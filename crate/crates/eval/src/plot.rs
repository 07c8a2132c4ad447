//! Standalone SVG charts of the evaluation files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::harness::{L2Row, Method, ProjRow};
use crate::report::{HistRow, MetricRow, RocRow};
use crate::Result;

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#7f7f7f", "#ff7f0e", "#9467bd"];

fn color(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

fn method_color(m: Method) -> &'static str {
    color(Method::ALL.iter().position(|&x| x == m).unwrap_or(0))
}

struct Svg {
    body: String,
    width: f64,
    height: f64,
}

impl Svg {
    fn new(width: f64, height: f64) -> Self {
        Svg {
            body: String::new(),
            width,
            height,
        }
    }

    fn text(&mut self, x: f64, y: f64, size: f64, anchor: &str, s: &str) {
        let _ = writeln!(
            self.body,
            r#"<text x="{x:.1}" y="{y:.1}" font-size="{size}" font-family="sans-serif" text-anchor="{anchor}">{}</text>"#,
            escape(s)
        );
    }

    fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{}</svg>\n",
            self.body,
            w = self.width,
            h = self.height
        )
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// A rectangular plotting area with data ranges.
struct Panel {
    x: f64,
    y: f64,
    w: f64,
    h: f64,
    xr: (f64, f64),
    yr: (f64, f64),
}

impl Panel {
    fn px(&self, v: f64) -> f64 {
        self.x + (v - self.xr.0) / (self.xr.1 - self.xr.0) * self.w
    }

    fn py(&self, v: f64) -> f64 {
        self.y + self.h - (v - self.yr.0) / (self.yr.1 - self.yr.0) * self.h
    }

    fn axes(&self, svg: &mut Svg, title: &str, xlabel: &str, ylabel: &str) {
        let _ = writeln!(
            svg.body,
            r#"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#,
            self.x, self.y, self.w, self.h
        );
        for k in 0..=4 {
            let t = k as f64 / 4.0;
            let xv = self.xr.0 + t * (self.xr.1 - self.xr.0);
            let yv = self.yr.0 + t * (self.yr.1 - self.yr.0);
            svg.text(self.px(xv), self.y + self.h + 14.0, 10.0, "middle", &tick(xv));
            svg.text(self.x - 4.0, self.py(yv) + 3.0, 10.0, "end", &tick(yv));
        }
        svg.text(self.x + self.w / 2.0, self.y - 8.0, 12.0, "middle", title);
        svg.text(self.x + self.w / 2.0, self.y + self.h + 30.0, 11.0, "middle", xlabel);
        let (lx, ly) = (self.x - 36.0, self.y + self.h / 2.0);
        let _ = writeln!(
            svg.body,
            r#"<text x="{lx:.1}" y="{ly:.1}" font-size="11" font-family="sans-serif" text-anchor="middle" transform="rotate(-90 {lx:.1} {ly:.1})">{}</text>"#,
            escape(ylabel)
        );
    }

    fn line(&self, svg: &mut Svg, pts: &[(f64, f64)], stroke: &str, dashed: bool) {
        if pts.is_empty() {
            return;
        }
        let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", self.px(x), self.py(y))).collect();
        let dash = if dashed { r#" stroke-dasharray="4 3""# } else { "" };
        let _ = writeln!(
            svg.body,
            r#"<polyline points="{}" fill="none" stroke="{stroke}" stroke-width="1.5"{dash}/>"#,
            coords.join(" ")
        );
    }

    fn dots(&self, svg: &mut Svg, pts: &[(f64, f64)], fill: &str, r: f64) {
        for &(x, y) in pts {
            let _ = writeln!(
                svg.body,
                r#"<circle cx="{:.2}" cy="{:.2}" r="{r}" fill="{fill}" fill-opacity="0.7"/>"#,
                self.px(x),
                self.py(y)
            );
        }
    }

    fn bar(&self, svg: &mut Svg, lo: f64, hi: f64, v: f64, fill: &str) {
        let (x0, x1) = (self.px(lo), self.px(hi));
        let (y0, y1) = (self.py(v), self.py(self.yr.0));
        let _ = writeln!(
            svg.body,
            r#"<rect x="{x0:.2}" y="{y0:.2}" width="{:.2}" height="{:.2}" fill="{fill}" fill-opacity="0.45"/>"#,
            (x1 - x0).max(0.0),
            (y1 - y0).max(0.0)
        );
    }
}

fn tick(v: f64) -> String {
    if v.abs() >= 100.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

fn legend(svg: &mut Svg, x: f64, y: f64, entries: &[(String, &str)]) {
    for (i, (name, c)) in entries.iter().enumerate() {
        let yy = y + i as f64 * 14.0;
        let _ = writeln!(svg.body, r#"<rect x="{x:.1}" y="{:.1}" width="10" height="10" fill="{c}"/>"#, yy - 9.0);
        svg.text(x + 14.0, yy, 10.0, "start", name);
    }
}

fn range(values: impl Iterator<Item = f64>, pad_zero: bool) -> (f64, f64) {
    let (mut lo, mut hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if pad_zero {
        lo = lo.min(0.0);
    }
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        hi = lo + 1.0;
    }
    let pad = 0.05 * (hi - lo);
    (if pad_zero && lo == 0.0 { 0.0 } else { lo - pad }, hi + pad)
}

fn depths<T>(rows: &[T], depth: impl Fn(&T) -> usize) -> Vec<usize> {
    let mut d: Vec<usize> = rows.iter().map(depth).collect();
    d.sort_unstable();
    d.dedup();
    d
}

/// Score histograms of the true embeddings (top) and ROC curves of every
/// method (bottom), one column per depth.
pub fn scores_chart(hist: &[HistRow], roc: &[RocRow]) -> String {
    let ds = depths(roc, |r| r.depth);
    let cols = ds.len().max(1) as f64;
    let mut svg = Svg::new(60.0 + cols * 230.0 + 110.0, 560.0);
    for (c, &d) in ds.iter().enumerate() {
        let x = 60.0 + c as f64 * 230.0;
        let bins: Vec<&HistRow> = hist.iter().filter(|h| h.depth == d && h.method == Method::True).collect();
        let (tp, tn) = bins.iter().fold((0, 0), |(a, b), h| (a + h.n_pos, b + h.n_neg));
        let dens = |n: usize, t: usize| if t == 0 { 0.0 } else { n as f64 / t as f64 };
        let top = Panel {
            x,
            y: 40.0,
            w: 180.0,
            h: 180.0,
            xr: range(bins.iter().flat_map(|b| [b.bin_lo, b.bin_hi]), false),
            yr: range(bins.iter().flat_map(|b| [dens(b.n_pos, tp), dens(b.n_neg, tn)]), true),
        };
        top.axes(&mut svg, &format!("depth {d}: true-vector scores"), "logit", "fraction");
        for b in &bins {
            top.bar(&mut svg, b.bin_lo, b.bin_hi, dens(b.n_neg, tn), color(3));
            top.bar(&mut svg, b.bin_lo, b.bin_hi, dens(b.n_pos, tp), color(2));
        }
        let bottom = Panel {
            x,
            y: 300.0,
            w: 180.0,
            h: 180.0,
            xr: (0.0, 1.0),
            yr: (0.0, 1.0),
        };
        bottom.axes(&mut svg, &format!("depth {d}: ROC"), "false positive rate", "true positive rate");
        bottom.line(&mut svg, &[(0.0, 0.0), (1.0, 1.0)], "#cccccc", true);
        for m in Method::ALL {
            let pts: Vec<(f64, f64)> = roc.iter().filter(|r| r.depth == d && r.method == m).map(|r| (r.fpr, r.tpr)).collect();
            bottom.line(&mut svg, &pts, method_color(m), false);
        }
    }
    let lx = 60.0 + cols * 230.0;
    legend(&mut svg, lx, 60.0, &[("success".into(), color(2)), ("failure".into(), color(3))]);
    let entries: Vec<(String, &str)> = Method::ALL.iter().map(|m| (m.to_string(), method_color(*m))).collect();
    legend(&mut svg, lx, 320.0, &entries);
    svg.finish()
}

pub fn auc_chart(metrics: &[MetricRow]) -> String {
    let mut svg = Svg::new(520.0, 340.0);
    let p = Panel {
        x: 60.0,
        y: 40.0,
        w: 300.0,
        h: 240.0,
        xr: range(metrics.iter().map(|m| m.depth as f64), false),
        yr: range(metrics.iter().map(|m| m.auc).chain([0.5, 1.0]), false),
    };
    p.axes(&mut svg, "AUC by rewrite depth", "depth", "AUC");
    for m in Method::ALL {
        let pts: Vec<(f64, f64)> = metrics.iter().filter(|r| r.method == m).map(|r| (r.depth as f64, r.auc)).collect();
        p.line(&mut svg, &pts, method_color(m), false);
        p.dots(&mut svg, &pts, method_color(m), 3.0);
    }
    let entries: Vec<(String, &str)> = Method::ALL.iter().map(|m| (m.to_string(), method_color(*m))).collect();
    legend(&mut svg, 380.0, 60.0, &entries);
    svg.finish()
}

pub fn l2_chart(rows: &[L2Row]) -> String {
    let mut svg = Svg::new(520.0, 340.0);
    let series: [(&str, fn(&L2Row) -> f64); 3] = [
        ("one step", |r| r.mean_onestep),
        ("multi step", |r| r.mean_multistep),
        ("random pair", |r| r.mean_random),
    ];
    let p = Panel {
        x: 60.0,
        y: 40.0,
        w: 300.0,
        h: 240.0,
        xr: range(rows.iter().map(|r| r.depth as f64), false),
        yr: range(rows.iter().flat_map(|r| series.iter().map(move |(_, f)| f(r))), true),
    };
    p.axes(&mut svg, "distance to the true embedding", "depth", "mean l2");
    let mut entries = Vec::new();
    for (i, (name, f)) in series.iter().enumerate() {
        let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.depth as f64, f(r))).collect();
        p.line(&mut svg, &pts, color(i), i == 2);
        p.dots(&mut svg, &pts, color(i), 3.0);
        entries.push((name.to_string(), color(i)));
    }
    legend(&mut svg, 380.0, 60.0, &entries);
    svg.finish()
}

pub fn projection_chart(rows: &[ProjRow]) -> String {
    let mut svg = Svg::new(520.0, 400.0);
    let p = Panel {
        x: 60.0,
        y: 40.0,
        w: 300.0,
        h: 300.0,
        xr: range(rows.iter().map(|r| r.x), false),
        yr: range(rows.iter().map(|r| r.y), false),
    };
    p.axes(&mut svg, "propagated vectors, first two components", "PC1", "PC2");
    let mut entries = Vec::new();
    for d in depths(rows, |r| r.depth) {
        let pts: Vec<(f64, f64)> = rows.iter().filter(|r| r.depth == d).map(|r| (r.x, r.y)).collect();
        p.dots(&mut svg, &pts, color(d), 2.5);
        entries.push((format!("depth {d}"), color(d)));
    }
    legend(&mut svg, 380.0, 60.0, &entries);
    svg.finish()
}

/// Writes the four charts into `dir` and returns their paths.
pub fn write_all(
    dir: &Path,
    metrics: &[MetricRow],
    roc: &[RocRow],
    hist: &[HistRow],
    l2: &[L2Row],
    projection: &[ProjRow],
) -> Result<Vec<PathBuf>> {
    let files = [
        ("scores.svg", scores_chart(hist, roc)),
        ("auc_by_depth.svg", auc_chart(metrics)),
        ("l2_by_depth.svg", l2_chart(l2)),
        ("projection.svg", projection_chart(projection)),
    ];
    let mut out = Vec::new();
    for (name, body) in files {
        let path = dir.join(name);
        std::fs::write(&path, body)?;
        out.push(path);
    }
    Ok(out)
}
