//! Static SVG line charts of x(t) and z(t), one panel each. When several
//! trajectories are given their series share the panels.

use std::fmt::Write;

use crate::io::TrajectoryTable;

const WIDTH: f64 = 900.0;
const PANEL_HEIGHT: f64 = 260.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 40.0;
const PANEL_GAP: f64 = 50.0;
const TICKS: usize = 5;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// A labelled trajectory to draw.
pub struct Series<'a> {
    pub label: &'a str,
    pub table: &'a TrajectoryTable,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Range {
    lo: f64,
    hi: f64,
}

impl Range {
    fn of(values: impl Iterator<Item = f64>) -> Range {
        let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        if lo == hi {
            Range { lo: lo - 1.0, hi: hi + 1.0 }
        } else {
            Range { lo, hi }
        }
    }

    fn frac(&self, v: f64) -> f64 {
        (v - self.lo) / (self.hi - self.lo)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

/// Renders the chart. Every series must be non-empty.
pub fn render_svg(series: &[Series<'_>]) -> String {
    assert!(!series.is_empty() && series.iter().all(|s| !s.table.is_empty()), "nothing to plot");
    let t_range = Range::of(series.iter().flat_map(|s| s.table.times.iter().copied()));
    let panels: [(&str, fn(&crate::lorenz::State3) -> f64); 2] = [("x", |s| s.x), ("z", |s| s.z)];
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let height = MARGIN_TOP + 2.0 * PANEL_HEIGHT + PANEL_GAP + 40.0;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let x = MARGIN_LEFT + 10.0 + 220.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<g class="legend"><line x1="{x}" y1="18" x2="{}" y2="18" stroke="{color}" stroke-width="2"/><text x="{}" y="22">{}</text></g>"#,
            x + 20.0,
            x + 25.0,
            escape(s.label)
        );
    }

    for (p, (name, pick)) in panels.iter().enumerate() {
        let top = MARGIN_TOP + p as f64 * (PANEL_HEIGHT + PANEL_GAP);
        let v_range = Range::of(series.iter().flat_map(|s| s.table.states.iter().map(pick)));
        let px = |t: f64| MARGIN_LEFT + t_range.frac(t) * plot_w;
        let py = |v: f64| top + (1.0 - v_range.frac(v)) * PANEL_HEIGHT;

        let _ = writeln!(
            out,
            r#"<g class="panel" data-series="{name}" data-tmin="{}" data-tmax="{}" data-vmin="{}" data-vmax="{}" data-top="{top}" data-height="{PANEL_HEIGHT}">"#,
            t_range.lo, t_range.hi, v_range.lo, v_range.hi
        );
        let _ = writeln!(
            out,
            r##"<rect x="{MARGIN_LEFT}" y="{top}" width="{plot_w}" height="{PANEL_HEIGHT}" fill="none" stroke="#444"/>"##
        );
        for k in 0..=TICKS {
            let f = k as f64 / TICKS as f64;
            let tv = t_range.lo + f * (t_range.hi - t_range.lo);
            let vv = v_range.lo + f * (v_range.hi - v_range.lo);
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                px(tv),
                top + PANEL_HEIGHT + 15.0,
                fmt_tick(tv)
            );
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
                MARGIN_LEFT - 6.0,
                py(vv) + 4.0,
                fmt_tick(vv)
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-weight="bold">{name}(t)</text>"#,
            MARGIN_LEFT / 3.0,
            top + PANEL_HEIGHT / 2.0
        );
        for (i, s) in series.iter().enumerate() {
            let mut points = String::with_capacity(s.table.len() * 16);
            for (t, st) in s.table.times.iter().zip(&s.table.states) {
                let _ = write!(points, "{:.2},{:.2} ", px(*t), py(pick(st)));
            }
            let _ = writeln!(
                out,
                r#"<polyline data-label="{}" fill="none" stroke="{}" stroke-width="1.2" points="{}"/>"#,
                escape(s.label),
                COLORS[i % COLORS.len()],
                points.trim_end()
            );
        }
        let _ = writeln!(out, "</g>");
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">t</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        height - 8.0
    );
    out.push_str("</svg>\n");
    out
}
