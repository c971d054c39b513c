//! Self-contained SVG figures: log-log convergence plots and 2D scatters.

use std::fmt::Write as _;

const W: f64 = 640.0;
const H: f64 = 440.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

pub struct Series {
    pub label: String,
    pub color: &'static str,
    pub dash: Option<&'static str>,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// Lower and upper edges of a shaded band.
    pub band: Option<(Vec<f64>, Vec<f64>)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(out: &mut String, title: &str) {
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
    writeln!(
        out,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        (LEFT + W - RIGHT) / 2.0,
        escape(title)
    )
    .unwrap();
}

/// Decade range covering every positive finite value.
fn decades(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = values
        .filter(|v| v.is_finite() && *v > 0.0)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return None;
    }
    let (lo, hi) = (lo.log10().floor(), hi.log10().ceil());
    Some((lo, if hi > lo { hi } else { lo + 1.0 }))
}

/// Log-log line plot with optional shaded bands.
pub fn log_log(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let mut out = String::new();
    header(&mut out, title);
    let xs = series.iter().flat_map(|s| s.xs.iter().copied());
    let ys = series.iter().flat_map(|s| {
        let band = s.band.iter().flat_map(|(lo, hi)| lo.iter().chain(hi)).copied();
        s.ys.iter().copied().chain(band)
    });
    let (Some((x0, x1)), Some((y0, y1))) = (decades(xs), decades(ys)) else {
        out.push_str("<text x=\"80\" y=\"80\">no positive data</text>\n</svg>\n");
        return out;
    };
    let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
    let px = |x: f64| LEFT + (x.log10() - x0) / (x1 - x0) * pw;
    let py = |y: f64| TOP + (y1 - y.log10()) / (y1 - y0) * ph;

    writeln!(out, r##"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>"##).unwrap();
    for e in x0 as i32..=x1 as i32 {
        let x = px(10f64.powi(e));
        writeln!(out, r##"<line x1="{x:.1}" y1="{TOP}" x2="{x:.1}" y2="{:.1}" stroke="#ddd"/>"##, TOP + ph).unwrap();
        writeln!(out, r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">1e{e}</text>"#, TOP + ph + 18.0).unwrap();
    }
    for e in y0 as i32..=y1 as i32 {
        let y = py(10f64.powi(e));
        writeln!(out, r##"<line x1="{LEFT}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/>"##, LEFT + pw).unwrap();
        writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">1e{e}</text>"#, LEFT - 6.0, y + 4.0).unwrap();
    }
    writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, H - 16.0, escape(x_label)).unwrap();
    writeln!(
        out,
        r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(y_label)
    )
    .unwrap();

    let ok = |x: f64, y: f64| x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite();
    for (i, s) in series.iter().enumerate() {
        if let Some((lo, hi)) = &s.band {
            let upper: Vec<String> = s.xs.iter().zip(hi).filter(|(x, y)| ok(**x, **y)).map(|(x, y)| format!("{:.1},{:.1}", px(*x), py(*y))).collect();
            let lower: Vec<String> = s.xs.iter().zip(lo).filter(|(x, y)| ok(**x, **y)).rev().map(|(x, y)| format!("{:.1},{:.1}", px(*x), py(*y))).collect();
            if !upper.is_empty() {
                writeln!(out, r#"<polygon points="{} {}" fill="{}" fill-opacity="0.18" stroke="none"/>"#, upper.join(" "), lower.join(" "), s.color).unwrap();
            }
        }
        let pts: Vec<String> = s.xs.iter().zip(&s.ys).filter(|(x, y)| ok(**x, **y)).map(|(x, y)| format!("{:.1},{:.1}", px(*x), py(*y))).collect();
        let dash = s.dash.map(|d| format!(r#" stroke-dasharray="{d}""#)).unwrap_or_default();
        writeln!(out, r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="2"{dash}/>"#, pts.join(" "), s.color).unwrap();
        for p in &pts {
            let (x, y) = p.split_once(',').unwrap();
            writeln!(out, r#"<circle cx="{x}" cy="{y}" r="3" fill="{}"/>"#, s.color).unwrap();
        }
        let ly = TOP + 14.0 + 20.0 * i as f64;
        let lx = LEFT + pw + 12.0;
        writeln!(out, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{}" stroke-width="2"{dash}/>"#, lx + 24.0, s.color).unwrap();
        writeln!(out, r#"<text x="{}" y="{}">{}</text>"#, lx + 30.0, ly + 4.0, escape(&s.label)).unwrap();
    }
    out.push_str("</svg>\n");
    out
}

/// Scatter of 2D points inside `[lo, hi]`.
pub fn scatter(title: &str, points: &[(f64, f64)], lo: [f64; 2], hi: [f64; 2]) -> String {
    let mut out = String::new();
    header(&mut out, title);
    let side = (H - TOP - BOTTOM).min(W - LEFT - RIGHT);
    let px = |x: f64| LEFT + (x - lo[0]) / (hi[0] - lo[0]) * side;
    let py = |y: f64| TOP + (hi[1] - y) / (hi[1] - lo[1]) * side;
    writeln!(out, r##"<rect x="{LEFT}" y="{TOP}" width="{side}" height="{side}" fill="none" stroke="#444"/>"##).unwrap();
    for (k, (v, anchor)) in [(lo[0], "start"), (hi[0], "end")].iter().enumerate() {
        let x = if k == 0 { LEFT } else { LEFT + side };
        writeln!(out, r#"<text x="{x}" y="{:.1}" text-anchor="{anchor}">{v}</text>"#, TOP + side + 18.0).unwrap();
    }
    writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, LEFT - 6.0, TOP + side, lo[1]).unwrap();
    writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, LEFT - 6.0, TOP + 10.0, hi[1]).unwrap();
    for (x, y) in points {
        writeln!(out, r##"<circle cx="{:.2}" cy="{:.2}" r="1.2" fill="#1f5fa8" fill-opacity="0.6"/>"##, px(*x), py(*y)).unwrap();
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decade_range_ignores_nonpositive_values() {
        assert_eq!(decades([0.0, -1.0, 3e-5, 20.0].into_iter()), Some((-5.0, 2.0)));
        assert_eq!(decades([1.0].into_iter()), Some((0.0, 1.0)));
        assert_eq!(decades([f64::NAN].into_iter()), None);
    }

    #[test]
    fn plots_are_well_formed() {
        let s = Series {
            label: "a<b".into(),
            color: "#000",
            dash: Some("4 2"),
            xs: vec![1.0, 10.0],
            ys: vec![1e-3, 1e-6],
            band: Some((vec![1e-4, 1e-7], vec![1e-2, 1e-5])),
        };
        let svg = log_log("t", "n", "err", &[s]);
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert!(svg.contains("a&lt;b") && svg.contains("polygon"));
        let svg = scatter("s", &[(0.5, 0.5)], [0.0, 0.0], [1.0, 1.0]);
        assert_eq!(svg.matches("<circle").count(), 1);
    }
}
