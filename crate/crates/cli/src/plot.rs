//! Minimal static SVG charts: grouped bars with interval whiskers and banded lines.

use std::fmt::Write;

const WIDTH: f64 = 900.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 180.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 50.0;
const PALETTE: [&str; 8] = [
    "#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#76b7b2", "#edc948", "#b07aa1", "#9c755f",
];

/// One bar: median with a 95 % interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Bar {
    pub series: String,
    pub median: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Bars sharing one position on the x axis.
#[derive(Debug, Clone, PartialEq)]
pub struct BarGroup {
    pub label: String,
    pub bars: Vec<Bar>,
}

/// One panel of a band chart: interval band, median line and optional observed points.
#[derive(Debug, Clone, PartialEq)]
pub struct BandPanel {
    pub title: String,
    pub lo: Vec<f64>,
    pub median: Vec<f64>,
    pub hi: Vec<f64>,
    pub observed: Option<Vec<f64>>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Upper axis limit: a round number not below `max`.
fn nice_ceiling(max: f64) -> f64 {
    if !(max > 0.0) || !max.is_finite() {
        return 1.0;
    }
    let magnitude = 10f64.powf(max.log10().floor());
    for step in [1.0, 2.0, 2.5, 5.0, 10.0] {
        if step * magnitude >= max {
            return step * magnitude;
        }
    }
    10.0 * magnitude
}

fn header(out: &mut String, height: f64, title: &str) {
    let _ = write!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = write!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = write!(
        out,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

/// Left axis with five ticks between `0` and `top` over the pixel range `y0..y1`.
fn y_axis(out: &mut String, top: f64, y0: f64, y1: f64, label: &str) {
    let x = MARGIN_LEFT;
    let _ = write!(out, r#"<line x1="{x}" y1="{y0}" x2="{x}" y2="{y1}" stroke="black"/>"#);
    for k in 0..=5 {
        let v = top * k as f64 / 5.0;
        let y = y1 - (y1 - y0) * k as f64 / 5.0;
        let _ = write!(
            out,
            r##"<line x1="{}" y1="{y:.1}" x2="{}" y2="{y:.1}" stroke="#ddd"/><text x="{}" y="{:.1}" text-anchor="end">{}</text>"##,
            x,
            WIDTH - MARGIN_RIGHT,
            x - 6.0,
            y + 4.0,
            format_tick(v)
        );
    }
    let _ = write!(
        out,
        r#"<text transform="translate(18,{:.1}) rotate(-90)" text-anchor="middle">{}</text>"#,
        (y0 + y1) / 2.0,
        escape(label)
    );
}

fn format_tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e5 || v.abs() < 1e-2 {
        format!("{v:.1e}")
    } else if v.fract() == 0.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

/// Grouped bar chart; series are coloured consistently across groups.
pub fn bar_chart(title: &str, y_label: &str, groups: &[BarGroup]) -> String {
    let height = 420.0;
    let mut series: Vec<&str> = Vec::new();
    for b in groups.iter().flat_map(|g| &g.bars) {
        if !series.contains(&b.series.as_str()) {
            series.push(&b.series);
        }
    }
    let max = groups
        .iter()
        .flat_map(|g| &g.bars)
        .map(|b| b.hi.max(b.median))
        .fold(0.0, f64::max);
    let top = nice_ceiling(max);
    let (y0, y1) = (MARGIN_TOP, height - MARGIN_BOTTOM);
    let scale = |v: f64| y1 - (y1 - y0) * (v.max(0.0) / top).min(1.0);

    let mut out = String::new();
    header(&mut out, height, title);
    y_axis(&mut out, top, y0, y1, y_label);
    let plot_width = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let slot = plot_width / groups.len().max(1) as f64;
    let bar_width = 0.8 * slot / series.len().max(1) as f64;
    for (i, group) in groups.iter().enumerate() {
        let left = MARGIN_LEFT + slot * i as f64 + 0.1 * slot;
        for bar in &group.bars {
            let k = series.iter().position(|s| *s == bar.series).unwrap_or(0);
            let x = left + bar_width * k as f64;
            let y = scale(bar.median);
            let _ = write!(
                out,
                r#"<rect x="{x:.1}" y="{y:.1}" width="{:.1}" height="{:.1}" fill="{}"><title>{}: {}</title></rect>"#,
                bar_width * 0.9,
                y1 - y,
                PALETTE[k % PALETTE.len()],
                escape(&bar.series),
                format_tick(bar.median)
            );
            let cx = x + bar_width * 0.45;
            let (ylo, yhi) = (scale(bar.lo), scale(bar.hi));
            let _ = write!(
                out,
                r#"<line x1="{cx:.1}" y1="{ylo:.1}" x2="{cx:.1}" y2="{yhi:.1}" stroke="black"/><line x1="{:.1}" y1="{ylo:.1}" x2="{:.1}" y2="{ylo:.1}" stroke="black"/><line x1="{:.1}" y1="{yhi:.1}" x2="{:.1}" y2="{yhi:.1}" stroke="black"/>"#,
                cx - 3.0,
                cx + 3.0,
                cx - 3.0,
                cx + 3.0
            );
        }
        let _ = write!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            MARGIN_LEFT + slot * (i as f64 + 0.5),
            y1 + 18.0,
            escape(&group.label)
        );
    }
    for (k, s) in series.iter().enumerate() {
        let y = MARGIN_TOP + 18.0 * k as f64;
        let x = WIDTH - MARGIN_RIGHT + 12.0;
        let _ = write!(
            out,
            r#"<rect x="{x}" y="{y}" width="12" height="12" fill="{}"/><text x="{}" y="{}">{}</text>"#,
            PALETTE[k % PALETTE.len()],
            x + 18.0,
            y + 10.0,
            escape(s)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Vertically stacked panels sharing the x axis (weeks, one-based labels).
pub fn band_chart(title: &str, y_label: &str, panels: &[BandPanel]) -> String {
    let panel_height = 160.0;
    let gap = 30.0;
    let height = MARGIN_TOP + MARGIN_BOTTOM + panels.len() as f64 * (panel_height + gap);
    let mut out = String::new();
    header(&mut out, height, title);
    let plot_width = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    for (p, panel) in panels.iter().enumerate() {
        let n = panel.median.len();
        let y0 = MARGIN_TOP + p as f64 * (panel_height + gap) + gap / 2.0;
        let y1 = y0 + panel_height;
        let max = panel
            .hi
            .iter()
            .chain(panel.observed.iter().flatten())
            .copied()
            .fold(0.0, f64::max);
        let top = nice_ceiling(max);
        let x = |t: usize| MARGIN_LEFT + plot_width * (t as f64 + 0.5) / n.max(1) as f64;
        let y = |v: f64| y1 - (y1 - y0) * (v.max(0.0) / top).min(1.0);
        y_axis(&mut out, top, y0, y1, y_label);
        let _ = write!(
            out,
            r#"<text x="{}" y="{:.1}" text-anchor="end">{}</text>"#,
            WIDTH - MARGIN_RIGHT,
            y0 + 12.0,
            escape(&panel.title)
        );
        if n == 0 {
            continue;
        }
        let mut band = String::new();
        for t in 0..n {
            let _ = write!(band, "{:.1},{:.1} ", x(t), y(panel.hi[t]));
        }
        for t in (0..n).rev() {
            let _ = write!(band, "{:.1},{:.1} ", x(t), y(panel.lo[t]));
        }
        let _ = write!(out, r##"<polygon points="{}" fill="#4e79a7" fill-opacity="0.3"/>"##, band.trim_end());
        let line: Vec<String> = (0..n).map(|t| format!("{:.1},{:.1}", x(t), y(panel.median[t]))).collect();
        let _ = write!(
            out,
            r##"<polyline points="{}" fill="none" stroke="#4e79a7" stroke-width="2"/>"##,
            line.join(" ")
        );
        if let Some(obs) = &panel.observed {
            for (t, &v) in obs.iter().enumerate() {
                let _ = write!(out, r#"<circle cx="{:.1}" cy="{:.1}" r="2.5" fill="black"/>"#, x(t), y(v));
            }
        }
        for t in (0..n).step_by(n.div_ceil(10).max(1)) {
            let _ = write!(
                out,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
                x(t),
                y1 + 14.0,
                t + 1
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bar(series: &str, median: f64) -> Bar {
        Bar {
            series: series.into(),
            median,
            lo: median * 0.8,
            hi: median * 1.2,
        }
    }

    #[test]
    fn ceiling_is_round_and_not_below_max() {
        for (max, want) in [(0.0, 1.0), (0.7, 1.0), (3.0, 5.0), (184.0, 200.0), (1e6, 1e6)] {
            assert_eq!(nice_ceiling(max), want, "max {max}");
        }
    }

    #[test]
    fn bar_chart_has_one_rect_per_bar_and_escapes_labels() {
        let groups = vec![
            BarGroup {
                label: "third".into(),
                bars: vec![bar("Factual", 184.0), bar("A<B", 177.0)],
            },
            BarGroup {
                label: "fourth".into(),
                bars: vec![bar("Factual", 126.0), bar("A<B", 84.0)],
            },
        ];
        let svg = bar_chart("severe & more", "per 100k", &groups);
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        // Background, four bars, two legend swatches.
        assert_eq!(svg.matches("<rect").count(), 7);
        assert!(svg.contains("A&lt;B") && svg.contains("severe &amp; more"));
    }

    #[test]
    fn band_chart_draws_points_for_observations() {
        let panel = BandPanel {
            title: "0-19".into(),
            lo: vec![1.0, 2.0, 3.0],
            median: vec![2.0, 3.0, 4.0],
            hi: vec![3.0, 4.0, 5.0],
            observed: Some(vec![2.0, 3.5, 4.2]),
        };
        let svg = band_chart("cases", "cases", &[panel.clone(), panel]);
        assert_eq!(svg.matches("<circle").count(), 6);
        assert_eq!(svg.matches("<polygon").count(), 2);
    }
}
