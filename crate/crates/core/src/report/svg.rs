//! Bare-bones SVG charts for a quick look at the tables.

use std::fmt::Write as _;

const W: f64 = 480.0;
const H: f64 = 360.0;
const PAD: f64 = 48.0;
const COLORS: [&str; 8] = ["#1f77b4", "#2ca02c", "#ff7f0e", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];

/// File-name safe form of a city name.
pub fn slug(s: &str) -> String {
    let mut out: String =
        s.chars().map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' }).collect();
    out.truncate(64);
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn fit(points: impl Iterator<Item = (f64, f64)>) -> Self {
        let mut f = Frame { x0: f64::INFINITY, x1: f64::NEG_INFINITY, y0: f64::INFINITY, y1: f64::NEG_INFINITY };
        for (x, y) in points {
            f.x0 = f.x0.min(x);
            f.x1 = f.x1.max(x);
            f.y0 = f.y0.min(y);
            f.y1 = f.y1.max(y);
        }
        if !f.x0.is_finite() {
            return Frame { x0: 0.0, x1: 1.0, y0: 0.0, y1: 1.0 };
        }
        if f.x1 - f.x0 < 1e-12 {
            f.x1 = f.x0 + 1.0;
        }
        if f.y1 - f.y0 < 1e-12 {
            f.y1 = f.y0 + 1.0;
        }
        f
    }

    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        let px = PAD + (x - self.x0) / (self.x1 - self.x0) * (W - 2.0 * PAD);
        let py = H - PAD - (y - self.y0) / (self.y1 - self.y0) * (H - 2.0 * PAD);
        (px, py)
    }
}

fn open(title: &str, x_label: &str, y_label: &str, f: &Frame) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="13">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(s, r#"<path d="M{PAD} {PAD} V{b} H{r}" fill="none" stroke="black"/>"#, b = H - PAD, r = W - PAD);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 12.0, escape(x_label));
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(y_label)
    );
    let _ = writeln!(s, r#"<text x="{PAD}" y="{}" text-anchor="middle">{:.3}</text>"#, H - PAD + 14.0, f.x0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{:.3}</text>"#, W - PAD, H - PAD + 14.0, f.x1);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{:.3}</text>"#, PAD - 4.0, H - PAD, f.y0);
    let _ = writeln!(s, r#"<text x="{}" y="{PAD}" text-anchor="end">{:.3}</text>"#, PAD - 4.0, f.y1);
    s
}

pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    let f = Frame::fit(series.iter().flat_map(|(_, p)| p.iter().copied()));
    let mut s = open(title, x_label, y_label, &f);
    for (n, (name, pts)) in series.iter().enumerate() {
        let color = COLORS[n % COLORS.len()];
        let path: Vec<String> = pts
            .iter()
            .map(|&(x, y)| {
                let (px, py) = f.map(x, y);
                format!("{px:.2},{py:.2}")
            })
            .collect();
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}"/>"#, path.join(" "));
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            W - PAD + 4.0 - 120.0,
            PAD + 14.0 * n as f64,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Points coloured by group index.
pub fn scatter(title: &str, x_label: &str, y_label: &str, points: &[(f64, f64, usize)]) -> String {
    let f = Frame::fit(points.iter().map(|&(x, y, _)| (x, y)));
    let mut s = open(title, x_label, y_label, &f);
    for &(x, y, g) in points {
        let (px, py) = f.map(x, y);
        let _ = writeln!(s, r#"<circle cx="{px:.2}" cy="{py:.2}" r="2" fill="{}"/>"#, COLORS[g % COLORS.len()]);
    }
    s.push_str("</svg>\n");
    s
}
