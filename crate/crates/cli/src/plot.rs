//! Static SVG charts for scan and extrapolation output.

use std::fmt::Write;

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    /// Half-length of a vertical error bar per point.
    pub errors: Option<Vec<f64>>,
    pub line: bool,
    pub color: &'static str,
}

const W: f64 = 640.0;
const H: f64 = 420.0;
const PAD: f64 = 60.0;

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let span = if hi > lo { hi - lo } else { lo.abs().max(1.0) * 1e-3 };
    (lo - 0.05 * span, hi + 0.05 * span)
}

pub fn chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let (x0, x1) = bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let (y0, y1) = bounds(series.iter().flat_map(|s| {
        let errs = s.errors.clone().unwrap_or_else(|| vec![0.0; s.points.len()]);
        s.points.iter().zip(errs).flat_map(|(p, e)| [p.1 - e, p.1 + e]).collect::<Vec<_>>()
    }));
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<path d="M{PAD} {PAD} V{} H{}" fill="none" stroke="black"/>"#,
        H - PAD,
        W - PAD
    );
    for i in 0..=4 {
        let fx = x0 + (x1 - x0) * i as f64 / 4.0;
        let fy = y0 + (y1 - y0) * i as f64 / 4.0;
        let _ = writeln!(s, r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#, sx(fx), H - PAD + 16.0, tick(fx));
        let _ = writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end">{}</text>"#, PAD - 6.0, sy(fy) + 4.0, tick(fy));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 16.0, escape(x_label));
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(y_label)
    );
    for (k, ser) in series.iter().enumerate() {
        if ser.line && ser.points.len() > 1 {
            let d: Vec<String> = ser.points.iter().map(|p| format!("{:.2},{:.2}", sx(p.0), sy(p.1))).collect();
            let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{}"/>"#, d.join(" "), ser.color);
        } else {
            for (i, p) in ser.points.iter().enumerate() {
                if let Some(e) = ser.errors.as_ref().map(|e| e[i]) {
                    let _ = writeln!(
                        s,
                        r#"<line x1="{x:.2}" x2="{x:.2}" y1="{:.2}" y2="{:.2}" stroke="{}"/>"#,
                        sy(p.1 - e),
                        sy(p.1 + e),
                        ser.color,
                        x = sx(p.0)
                    );
                }
                let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="{}"/>"#, sx(p.0), sy(p.1), ser.color);
            }
        }
        let ly = PAD + 16.0 * k as f64;
        let _ = writeln!(s, r#"<rect x="{}" y="{}" width="10" height="10" fill="{}"/>"#, W - PAD - 150.0, ly - 9.0, ser.color);
        let _ = writeln!(s, r#"<text x="{}" y="{ly}">{}</text>"#, W - PAD - 134.0, escape(&ser.name));
    }
    s.push_str("</svg>\n");
    s
}

fn tick(v: f64) -> String {
    let t = format!("{v:.4}");
    t.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
