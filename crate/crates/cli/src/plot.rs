//! `plot`: SVG figures from the CSV curves of a run directory.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use spinlight_core::VarianceCurve;

use crate::run::write_atomic;
use crate::{io, Failure};

/// Columns of a curve file.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveRows {
    pub beta_j: Vec<f64>,
    pub xi1: Vec<f64>,
    pub xi2: Vec<f64>,
    pub faraday: Vec<f64>,
    pub atomic: Vec<f64>,
}

/// Parses a curve CSV; empty, headerless or malformed files are errors.
pub fn read_curve(path: &Path) -> Result<CurveRows, Failure> {
    let bad = |msg: String| Failure::Io(format!("{}: {msg}", path.display()));
    let bytes = std::fs::read(path).map_err(|e| io(path.display(), e))?;
    if bytes.is_empty() {
        return Err(bad("file is empty".into()));
    }
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes.as_slice());
    let header = rdr.headers().map_err(|e| bad(e.to_string()))?.iter().collect::<Vec<_>>().join(",");
    if header != VarianceCurve::CSV_HEADER {
        return Err(bad(format!("unexpected header `{header}`")));
    }
    let mut rows = CurveRows {
        beta_j: vec![],
        xi1: vec![],
        xi2: vec![],
        faraday: vec![],
        atomic: vec![],
    };
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let vals = rec
            .iter()
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| bad(format!("row {}: {e}", i + 1)))?;
        if vals.len() != 5 || vals.iter().any(|v| !v.is_finite()) {
            return Err(bad(format!("row {}: expected five finite numbers", i + 1)));
        }
        rows.beta_j.push(vals[0]);
        rows.xi1.push(vals[1]);
        rows.xi2.push(vals[2]);
        rows.faraday.push(vals[3]);
        rows.atomic.push(vals[4]);
    }
    if rows.beta_j.is_empty() {
        return Err(bad("no data rows".into()));
    }
    Ok(rows)
}

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 55.0;

struct Series<'a> {
    name: &'a str,
    values: Vec<f64>,
    color: &'a str,
    dash: Option<&'a str>,
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if hi - lo <= 1e-12 * hi.abs().max(1.0) {
        let pad = hi.abs().max(1.0) * 0.5;
        (lo - pad, hi + pad)
    } else {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    }
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.to_string() }
}

/// Renders ξ₁ against βJ with the shot-noise level, the Faraday line and
/// the atomic term. Output depends only on the data.
pub fn render_svg(title: &str, c: &CurveRows) -> String {
    let series = [
        Series { name: "shot noise (ξ = 0)", values: vec![0.0; c.beta_j.len()], color: "#777777", dash: Some("2,4") },
        Series { name: "atomic term", values: c.atomic.clone(), color: "#2a9d8f", dash: Some("6,4") },
        Series { name: "Faraday line", values: c.faraday.clone(), color: "#e76f51", dash: Some("10,4,2,4") },
        Series { name: "ξ₁", values: c.xi1.clone(), color: "#264653", dash: None },
    ];
    let (x0, x1) = range(c.beta_j.iter().copied());
    let (y0, y1) = range(series.iter().flat_map(|s| s.values.iter().copied()));
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (y1 - y) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{:.1}" y="18" text-anchor="middle" font-size="14">{}</text>"#, LEFT + pw / 2.0, escape(title));
    let _ = writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let (px, py) = (sx(xv), sy(yv));
        let _ = writeln!(s, r#"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/>"#, TOP + ph, TOP + ph + 5.0);
        let _ = writeln!(s, r#"<text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, TOP + ph + 18.0, fmt_tick(xv));
        let _ = writeln!(s, r#"<line x1="{:.2}" y1="{py:.2}" x2="{LEFT}" y2="{py:.2}" stroke="black"/>"#, LEFT - 5.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 8.0, py + 4.0, fmt_tick(yv));
    }
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">βJ</text>"#, LEFT + pw / 2.0, H - 12.0);
    let _ = writeln!(s, r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">ξ</text>"#, TOP + ph / 2.0, TOP + ph / 2.0);

    for (k, ser) in series.iter().enumerate() {
        let dash = ser.dash.map(|d| format!(r#" stroke-dasharray="{d}""#)).unwrap_or_default();
        let pts: Vec<String> = c.beta_j.iter().zip(&ser.values).map(|(&x, &y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{}" stroke-width="1.8"{dash} points="{}"/>"#, ser.color, pts.join(" "));
        for (&x, &y) in c.beta_j.iter().zip(&ser.values) {
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{}"/>"#, sx(x), sy(y), ser.color);
        }
        let ly = TOP + 14.0 + 20.0 * k as f64;
        let lx = W - RIGHT + 12.0;
        let _ = writeln!(s, r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{}" stroke-width="1.8"{dash}/>"#, lx + 26.0, ser.color);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, lx + 32.0, ly + 4.0, escape(ser.name));
    }
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Plots every curve CSV of `dir`; all inputs are parsed before any SVG is
/// written.
pub fn plot_dir(dir: &Path) -> Result<Vec<PathBuf>, Failure> {
    let mut csvs: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| io(dir.display(), e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    csvs.sort();
    if csvs.is_empty() {
        return Err(Failure::Io(format!("{}: no curve files found", dir.display())));
    }
    let curves = csvs.iter().map(|p| read_curve(p).map(|c| (p, c))).collect::<Result<Vec<_>, _>>()?;
    let mut written = Vec::new();
    for (path, c) in curves {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("curve");
        let out = path.with_extension("svg");
        write_atomic(&out, render_svg(stem, &c).as_bytes())?;
        written.push(out);
    }
    Ok(written)
}
