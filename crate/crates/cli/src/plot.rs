//! Minimal SVG rendering of score traces and per-video errors.

use std::fmt::Write;

const W: f64 = 720.0;
const H: f64 = 240.0;
const PAD: f64 = 40.0;

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{PAD}" y="16">{}</text>"#, escape(title));
    let _ = writeln!(
        out,
        r#"<path d="M{PAD} {PAD} V{} H{}" fill="none" stroke="black"/>"#,
        H - PAD,
        W - PAD
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn polyline(out: &mut String, pts: &[(f64, f64)], color: &str) {
    let d: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.1},{y:.1}")).collect();
    let _ = writeln!(
        out,
        r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.2"/>"#,
        d.join(" ")
    );
}

/// Raw and filtered score traces with the threshold and, when known, the
/// annotated birth.
pub fn score_trace(title: &str, t: &[f64], raw: &[f64], filtered: Option<&[f64]>, gamma: f64, t_birth: Option<f64>) -> String {
    let mut out = String::new();
    header(&mut out, title);
    let (t0, t1) = match (t.first(), t.last()) {
        (Some(&a), Some(&b)) if b > a => (a, b),
        (Some(&a), _) => (a, a + 1.0),
        _ => (0.0, 1.0),
    };
    let x = |v: f64| PAD + (v - t0) / (t1 - t0) * (W - 2.0 * PAD);
    let y = |v: f64| H - PAD - v.clamp(0.0, 1.0) * (H - 2.0 * PAD);
    let _ = writeln!(
        out,
        r#"<line x1="{PAD}" x2="{}" y1="{:.1}" y2="{:.1}" stroke="red" stroke-dasharray="4 3"/>"#,
        W - PAD,
        y(gamma),
        y(gamma)
    );
    if let Some(tb) = t_birth {
        let _ = writeln!(
            out,
            r#"<line x1="{0:.1}" x2="{0:.1}" y1="{PAD}" y2="{1}" stroke="green"/>"#,
            x(tb),
            H - PAD
        );
    }
    let pts: Vec<(f64, f64)> = t.iter().zip(raw).map(|(&a, &b)| (x(a), y(b))).collect();
    polyline(&mut out, &pts, "#999999");
    if let Some(f) = filtered {
        let pts: Vec<(f64, f64)> = t.iter().zip(f).map(|(&a, &b)| (x(a), y(b))).collect();
        polyline(&mut out, &pts, "#1f5fbf");
    }
    let _ = writeln!(out, r#"<text x="{PAD}" y="{}">t = {t0} s</text>"#, H - 10.0);
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">t = {t1} s</text>"#, W - PAD, H - 10.0);
    out.push_str("</svg>\n");
    out
}

/// One bar per video for signed error; `None` is drawn as a "Missing" mark.
pub fn error_bars(rows: &[(String, Option<f64>)]) -> String {
    let mut out = String::new();
    header(&mut out, "t_hat - t_birth (s)");
    let max = rows
        .iter()
        .filter_map(|r| r.1)
        .fold(1.0f64, |m, e| m.max(e.abs()));
    let mid = H / 2.0;
    let scale = (H / 2.0 - PAD) / max;
    let step = (W - 2.0 * PAD) / rows.len().max(1) as f64;
    let _ = writeln!(out, r#"<line x1="{PAD}" x2="{}" y1="{mid}" y2="{mid}" stroke="black"/>"#, W - PAD);
    for (i, (id, err)) in rows.iter().enumerate() {
        let cx = PAD + (i as f64 + 0.5) * step;
        match err {
            Some(e) => {
                let h = e.abs() * scale;
                let top = if *e >= 0.0 { mid - h } else { mid };
                let _ = writeln!(
                    out,
                    r##"<rect x="{:.1}" y="{top:.1}" width="{:.1}" height="{h:.1}" fill="#1f5fbf"><title>{}: {e}</title></rect>"##,
                    cx - step * 0.35,
                    step * 0.7,
                    escape(id)
                );
            }
            None => {
                let _ = writeln!(
                    out,
                    r#"<text x="{cx:.1}" y="{:.1}" text-anchor="middle" fill="red">M<title>{}: Missing</title></text>"#,
                    mid - 4.0,
                    escape(id)
                );
            }
        }
    }
    out.push_str("</svg>\n");
    out
}
