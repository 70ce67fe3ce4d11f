//! Self-contained SVG line and bar charts (no scripts, fonts or external
//! references).

use std::fmt::Write;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 130.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 60.0;

/// Ten-colour categorical palette.
pub const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

pub fn color(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

/// A named polyline. `None` y-values break the line.
#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, Option<f64>)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LineChart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    /// Fixed y range; `None` fits the data.
    pub y_range: Option<(f64, f64)>,
    pub series: Vec<Series>,
}

pub fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn header(svg: &mut String, title: &str) {
    let _ = write!(
        svg,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">
<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>
<text x="{:.1}" y="24" text-anchor="middle" font-size="16">{}</text>
"#,
        MARGIN_LEFT + plot_width() / 2.0,
        escape(title)
    );
}

fn plot_width() -> f64 {
    WIDTH - MARGIN_LEFT - MARGIN_RIGHT
}

fn plot_height() -> f64 {
    HEIGHT - MARGIN_TOP - MARGIN_BOTTOM
}

fn axis_labels(svg: &mut String, x_label: &str, y_label: &str) {
    let bottom = MARGIN_TOP + plot_height();
    let _ = writeln!(
        svg,
        r##"<line x1="{MARGIN_LEFT}" y1="{bottom}" x2="{:.1}" y2="{bottom}" stroke="#333"/>"##,
        MARGIN_LEFT + plot_width()
    );
    let _ = writeln!(
        svg,
        r##"<line x1="{MARGIN_LEFT}" y1="{MARGIN_TOP}" x2="{MARGIN_LEFT}" y2="{bottom}" stroke="#333"/>"##
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="13">{}</text>"#,
        MARGIN_LEFT + plot_width() / 2.0,
        HEIGHT - 14.0,
        escape(x_label)
    );
    let cy = MARGIN_TOP + plot_height() / 2.0;
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{cy:.1}" text-anchor="middle" font-size="13" transform="rotate(-90 18 {cy:.1})">{}</text>"#,
        escape(y_label)
    );
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.3}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

impl LineChart {
    fn x_bounds(&self) -> (f64, f64) {
        let xs = self
            .series
            .iter()
            .flat_map(|s| s.points.iter().map(|p| p.0))
            .filter(|x| !self.log_x || *x > 0.0);
        let (lo, hi) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
            (lo.min(x), hi.max(x))
        });
        if !lo.is_finite() {
            return if self.log_x { (0.1, 1.0) } else { (0.0, 1.0) };
        }
        if self.log_x {
            (
                lo.log10().floor(),
                hi.log10().ceil().max(lo.log10().floor() + 1.0),
            )
        } else if hi > lo {
            (lo, hi)
        } else {
            (lo - 0.5, lo + 0.5)
        }
    }

    fn y_bounds(&self) -> (f64, f64) {
        if let Some(r) = self.y_range {
            return r;
        }
        let ys = self
            .series
            .iter()
            .flat_map(|s| s.points.iter().filter_map(|p| p.1));
        let (lo, hi) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), y| {
            (lo.min(y), hi.max(y))
        });
        if !lo.is_finite() {
            (0.0, 1.0)
        } else if hi > lo {
            (lo, hi)
        } else {
            (lo - 0.5, lo + 0.5)
        }
    }

    pub fn render(&self) -> String {
        let (x0, x1) = self.x_bounds();
        let (y0, y1) = self.y_bounds();
        let sx = |x: f64| {
            let t = if self.log_x { x.log10() } else { x };
            MARGIN_LEFT + (t - x0) / (x1 - x0) * plot_width()
        };
        let sy = |y: f64| MARGIN_TOP + (1.0 - (y - y0) / (y1 - y0)) * plot_height();
        let bottom = MARGIN_TOP + plot_height();

        let mut svg = String::new();
        header(&mut svg, &self.title);

        for i in 0..=4 {
            let y = y0 + (y1 - y0) * i as f64 / 4.0;
            let py = sy(y);
            let _ = writeln!(
                svg,
                r##"<line x1="{MARGIN_LEFT}" y1="{py:.1}" x2="{:.1}" y2="{py:.1}" stroke="#e5e5e5"/>"##,
                MARGIN_LEFT + plot_width()
            );
            let _ = writeln!(
                svg,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="end" font-size="11">{}</text>"#,
                MARGIN_LEFT - 6.0,
                py + 4.0,
                tick_label(y)
            );
        }
        let x_ticks: Vec<f64> = if self.log_x {
            (x0 as i32..=x1 as i32).map(|e| 10f64.powi(e)).collect()
        } else {
            (0..=4).map(|i| x0 + (x1 - x0) * i as f64 / 4.0).collect()
        };
        for x in x_ticks {
            let px = sx(x);
            let label = if self.log_x {
                format!("10^{}", x.log10().round() as i32)
            } else {
                tick_label(x)
            };
            let _ = writeln!(
                svg,
                r##"<line x1="{px:.1}" y1="{bottom:.1}" x2="{px:.1}" y2="{:.1}" stroke="#333"/>"##,
                bottom + 5.0
            );
            let _ = writeln!(
                svg,
                r#"<text x="{px:.1}" y="{:.1}" text-anchor="middle" font-size="11">{label}</text>"#,
                bottom + 19.0
            );
        }
        axis_labels(&mut svg, &self.x_label, &self.y_label);

        for (i, s) in self.series.iter().enumerate() {
            let mut d = String::new();
            let mut pen_down = false;
            for &(x, y) in &s.points {
                match y {
                    Some(y) if !self.log_x || x > 0.0 => {
                        let cmd = if pen_down { 'L' } else { 'M' };
                        let _ = write!(d, "{cmd}{:.2},{:.2} ", sx(x), sy(y));
                        pen_down = true;
                    }
                    _ => pen_down = false,
                }
            }
            let _ = writeln!(
                svg,
                r#"<path class="series" d="{}" fill="none" stroke="{}" stroke-width="1.6"/>"#,
                d.trim_end(),
                color(i)
            );
            let ly = MARGIN_TOP + 14.0 + 18.0 * i as f64;
            let lx = WIDTH - MARGIN_RIGHT + 14.0;
            let _ = writeln!(
                svg,
                r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{}" stroke-width="2"/>"#,
                lx + 18.0,
                color(i)
            );
            let _ = writeln!(
                svg,
                r#"<text x="{:.1}" y="{:.1}" font-size="11">{}</text>"#,
                lx + 24.0,
                ly + 4.0,
                escape(&s.name)
            );
        }
        svg.push_str("</svg>\n");
        svg
    }
}

/// Vertical bars over `[0, max(1, values)]`, one per label.
pub fn bar_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    labels: &[String],
    values: &[f64],
) -> String {
    let mut svg = String::new();
    header(&mut svg, title);
    let y_max = values.iter().copied().fold(1.0f64, f64::max);
    let n = values.len().max(1) as f64;
    let slot = plot_width() / n;
    let bottom = MARGIN_TOP + plot_height();
    for i in 0..=4 {
        let y = y_max * i as f64 / 4.0;
        let py = bottom - y / y_max * plot_height();
        let _ = writeln!(
            svg,
            r##"<line x1="{MARGIN_LEFT}" y1="{py:.1}" x2="{:.1}" y2="{py:.1}" stroke="#e5e5e5"/>"##,
            MARGIN_LEFT + plot_width()
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end" font-size="11">{}</text>"#,
            MARGIN_LEFT - 6.0,
            py + 4.0,
            tick_label(y)
        );
    }
    for (i, (label, &v)) in labels.iter().zip(values).enumerate() {
        let h = v.max(0.0) / y_max * plot_height();
        let x = MARGIN_LEFT + slot * i as f64 + slot * 0.15;
        let _ = writeln!(
            svg,
            r#"<rect class="bar" x="{x:.1}" y="{:.1}" width="{:.1}" height="{h:.1}" fill="{}"><title>{}: {}</title></rect>"#,
            bottom - h,
            slot * 0.7,
            color(i),
            escape(label),
            tick_label(v)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="11">{}</text>"#,
            x + slot * 0.35,
            bottom + 16.0,
            escape(label)
        );
    }
    axis_labels(&mut svg, x_label, y_label);
    svg.push_str("</svg>\n");
    svg
}
