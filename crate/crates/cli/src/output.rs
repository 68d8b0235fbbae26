//! CSV, JSON and SVG writers.

use std::fmt::Write as _;
use std::path::Path;

use perfhom_core::corrector::ConvergenceReport;
use perfhom_core::geometry::Mesh;

use crate::CliError;

/// 17 significant digits, enough to round-trip an f64.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    write(path, &(text + "\n"))
}

/// One row per point: x, y, then every column.
pub fn points_csv(points: &[[f64; 2]], columns: &[(String, &[f64])]) -> String {
    let mut out = String::from("x,y");
    for (name, _) in columns {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (k, p) in points.iter().enumerate() {
        out.push_str(&num(p[0]));
        out.push(',');
        out.push_str(&num(p[1]));
        for (_, col) in columns {
            out.push(',');
            out.push_str(&num(col[k]));
        }
        out.push('\n');
    }
    out
}

/// Nodal fields θ, u₁..u_N on a mesh.
pub fn state_csv(mesh: &Mesh, theta: &[f64], u: &[Vec<f64>]) -> String {
    let mut cols = vec![("theta".to_string(), theta)];
    for (i, ui) in u.iter().enumerate() {
        cols.push((format!("u{}", i + 1), ui.as_slice()));
    }
    points_csv(mesh.nodes(), &cols)
}

/// v₁..v_N at the pore-surface nodes.
pub fn surface_csv(mesh: &Mesh, v: &[Vec<f64>]) -> String {
    let pts: Vec<[f64; 2]> = mesh.surface_nodes().iter().map(|&n| mesh.nodes()[n]).collect();
    let cols: Vec<(String, &[f64])> = v.iter().enumerate().map(|(i, vi)| (format!("v{}", i + 1), vi.as_slice())).collect();
    points_csv(&pts, &cols)
}

fn color(t: f64) -> String {
    // Blue to red through white.
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.5 };
    let (r, g, b) = if t < 0.5 {
        let s = t / 0.5;
        (s, s, 1.0)
    } else {
        let s = (1.0 - t) / 0.5;
        (1.0, s, s)
    };
    format!("#{:02x}{:02x}{:02x}", (r * 255.0) as u8, (g * 255.0) as u8, (b * 255.0) as u8)
}

/// Element-average heat map of a nodal field; holes stay blank.
pub fn heatmap_svg(mesh: &Mesh, values: &[f64], title: &str) -> String {
    let size = 480.0;
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let h = mesh.h() * size;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{ht}" viewBox="0 0 {w} {ht}" shape-rendering="crispEdges">"#,
        w = size,
        ht = size + 30.0
    );
    let _ = writeln!(out, r#"<text x="4" y="18" font-family="sans-serif" font-size="13">{title}: [{lo:.4}, {hi:.4}]</text>"#);
    let _ = writeln!(out, r#"<g transform="translate(0,30)">"#);
    for e in mesh.elements() {
        let avg = e.nodes.iter().map(|&n| values[n]).sum::<f64>() / 4.0;
        let x = e.origin[0] * size;
        let y = size - e.origin[1] * size - h;
        let _ = writeln!(
            out,
            r#"<rect x="{x:.2}" y="{y:.2}" width="{w:.2}" height="{w:.2}" fill="{c}"/>"#,
            w = h + 0.05,
            c = color((avg - lo) / span)
        );
    }
    out.push_str("</g>\n</svg>\n");
    out
}

/// Log-log chart of the sweep quantities with a slope-1 reference line.
pub fn rates_svg(report: &ConvergenceReport) -> String {
    let (w, h, pad) = (560.0, 420.0, 60.0);
    type Series<'a> = (&'a str, &'a str, fn(&perfhom_core::corrector::ErrorRecord) -> f64);
    let series: [Series; 4] = [
        ("w1_sq", "#1f77b4", |r| r.w1_sq),
        ("w2_int", "#d62728", |r| r.w2_int),
        ("surf_sq", "#2ca02c", |r| r.surf_sq),
        ("w0", "#9467bd", |r| r.w0),
    ];
    let eps: Vec<f64> = report.records.iter().map(|r| r.epsilon.log10()).collect();
    let mut ys: Vec<f64> = Vec::new();
    for (_, _, f) in &series {
        ys.extend(report.records.iter().map(f).filter(|v| *v > 0.0).map(f64::log10));
    }
    let (x0, x1) = (
        eps.iter().copied().fold(f64::INFINITY, f64::min) - 0.05,
        eps.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 0.05,
    );
    let (y0, y1) = if ys.is_empty() {
        (-1.0, 0.0)
    } else {
        (
            ys.iter().copied().fold(f64::INFINITY, f64::min) - 0.2,
            ys.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 0.2,
        )
    };
    let px = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
    let py = |y: f64| h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);
    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<path d="M{a} {b} L{a} {c} L{d} {c}" fill="none" stroke="black"/>"#,
        a = pad,
        b = pad,
        c = h - pad,
        d = w - pad
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">log10 ε</text>"#,
        w / 2.0,
        h - 20.0
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{}" font-family="sans-serif" font-size="12" transform="rotate(-90 16 {})" text-anchor="middle">log10 error</text>"#,
        h / 2.0,
        h / 2.0
    );
    // Slope-1 reference anchored at the first w1_sq point.
    if let Some(r) = report.records.first().filter(|r| r.w1_sq > 0.0) {
        let a = r.w1_sq.log10() - r.epsilon.log10();
        let _ = writeln!(
            out,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="gray" stroke-dasharray="5,4"/>"#,
            px(x0),
            py(a + x0),
            px(x1),
            py(a + x1)
        );
    }
    for (k, (name, c, f)) in series.iter().enumerate() {
        let pts: Vec<String> = report
            .records
            .iter()
            .filter(|r| f(r) > 0.0)
            .map(|r| format!("{:.2},{:.2}", px(r.epsilon.log10()), py(f(r).log10())))
            .collect();
        if pts.is_empty() {
            continue;
        }
        let _ = writeln!(out, r#"<polyline points="{}" fill="none" stroke="{c}" stroke-width="2"/>"#, pts.join(" "));
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" fill="{c}">{name}</text>"#,
            w - pad - 70.0,
            pad + 16.0 * k as f64
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, 6.02214076e23, -2.5e-300] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn csv_layout() {
        let csv = points_csv(&[[0.0, 1.0]], &[("a".into(), &[2.0][..])]);
        assert_eq!(csv, "x,y,a\n0.0000000000000000e0,1.0000000000000000e0,2.0000000000000000e0\n");
    }
}
