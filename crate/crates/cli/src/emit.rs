//! Report writers: CSV rows, the full JSON report and static SVG charts.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use crate::config::Format;
use crate::run::{CaseReport, RunReport};

pub const CSV_HEADER: &str = "sequence,n,j_max,feller,m_n,tv_bound,tv_actual,k_actual,slack_ratio";

fn num(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn csv_row(c: &CaseReport) -> String {
    let b = c.bound.as_ref();
    [
        c.sequence.clone(),
        c.n.to_string(),
        num(b.and_then(|b| b.j_max)),
        num(b.map(|b| b.feller)),
        num(b.map(|b| b.m_n)),
        num(b.map(|b| b.tv_bound.value())),
        num(b.map(|b| b.tv_actual)),
        num(b.map(|b| b.k_actual)),
        num(b.and_then(|b| b.slack_ratio)),
    ]
    .join(",")
}

pub fn to_csv(report: &RunReport) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for c in &report.cases {
        out.push_str(&csv_row(c));
        out.push('\n');
    }
    out
}

pub fn to_json(report: &RunReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

pub fn from_json(text: &str) -> serde_json::Result<RunReport> {
    serde_json::from_str(text)
}

struct Series {
    name: String,
    points: Vec<(f64, f64)>,
    color: &'static str,
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
const W: f64 = 640.0;
const H: f64 = 420.0;
const PAD: f64 = 60.0;

fn axis_range(vals: impl Iterator<Item = f64>, log: bool) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in vals {
        let v = if log { v.log10() } else { v };
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    (lo, hi)
}

fn line_chart(title: &str, xlabel: &str, ylabel: &str, series: &[Series], log_x: bool, log_y: bool) -> String {
    let usable = |p: &&(f64, f64)| p.0.is_finite() && p.1.is_finite() && (!log_x || p.0 > 0.0) && (!log_y || p.1 > 0.0);
    let pts = || series.iter().flat_map(|s| s.points.iter().filter(usable));
    let (x0, x1) = axis_range(pts().map(|p| p.0), log_x);
    let (y0, y1) = axis_range(pts().map(|p| p.1), log_y);
    let sx = |x: f64| PAD + (if log_x { x.log10() } else { x } - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (if log_y { y.log10() } else { y } - y0) / (y1 - y0) * (H - 2.0 * PAD);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="15">{title}</text>"#, W / 2.0);
    let _ = writeln!(
        s,
        r#"<path d="M{PAD},{PAD} V{} H{}" fill="none" stroke="black"/>"#,
        H - PAD,
        W - PAD
    );
    let tick = |v: f64, log: bool| if log { format!("1e{v:.1}") } else { format!("{v:.3}") };
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let (xv, yv) = (x0 + t * (x1 - x0), y0 + t * (y1 - y0));
        let (px, py) = (PAD + t * (W - 2.0 * PAD), H - PAD - t * (H - 2.0 * PAD));
        let _ = writeln!(s, r#"<text x="{px:.1}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="11">{}</text>"#, H - PAD + 16.0, tick(xv, log_x));
        let _ = writeln!(s, r#"<text x="{}" y="{py:.1}" text-anchor="end" font-family="sans-serif" font-size="11">{}</text>"#, PAD - 6.0, tick(yv, log_y));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12">{xlabel}</text>"#, W / 2.0, H - 16.0);
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12" transform="rotate(-90 16 {})">{ylabel}</text>"#,
        H / 2.0,
        H / 2.0
    );
    for (k, ser) in series.iter().enumerate() {
        let path: Vec<String> = ser.points.iter().filter(usable).map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        if !path.is_empty() {
            let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="2"/>"#, path.join(" "), ser.color);
        }
        let ly = PAD + 16.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{ly:.1}" font-family="sans-serif" font-size="11" fill="{}">{}</text>"#,
            W - PAD - 150.0,
            ser.color,
            ser.name
        );
    }
    s.push_str("</svg>\n");
    s
}

/// `(file name, contents)` for every SVG chart of the report.
pub fn svg_charts(report: &RunReport) -> Vec<(String, String)> {
    let mut names: Vec<&str> = report.cases.iter().map(|c| c.sequence.as_str()).collect();
    names.dedup();
    let mut out = vec![];
    for name in names {
        let rows: Vec<_> = report.cases.iter().filter(|c| c.sequence == name).filter_map(|c| Some((c.n as f64, c.bound.as_ref()?))).collect();
        let series = vec![
            Series { name: "tv actual".into(), points: rows.iter().map(|(n, b)| (*n, b.tv_actual)).collect(), color: COLORS[0] },
            Series { name: "tv bound".into(), points: rows.iter().map(|(n, b)| (*n, b.tv_bound.value())).collect(), color: COLORS[1] },
            Series { name: "M_n".into(), points: rows.iter().map(|(n, b)| (*n, b.m_n)).collect(), color: COLORS[2] },
        ];
        out.push((format!("{name}_tv_decay.svg"), line_chart(&format!("{name}: distance to normal"), "n", "value", &series, true, true)));
    }
    for t in &report.lindeberg {
        let series: Vec<Series> = t
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| Series {
                name: format!("n = {}", r.n),
                points: t.epsilons.iter().copied().zip(r.values.iter().copied()).collect(),
                color: COLORS[i % COLORS.len()],
            })
            .collect();
        out.push((
            format!("{}_lindeberg.svg", t.sequence),
            line_chart(&format!("{}: Lindeberg functional", t.sequence), "epsilon", "L_n(epsilon)", &series, true, false),
        ));
    }
    out
}

/// Writes the requested formats into `dir`, returning the files written.
pub fn emit(report: &RunReport, formats: &[Format], dir: &Path) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = vec![];
    let mut put = |name: &str, body: &str| -> io::Result<()> {
        let p = dir.join(name);
        fs::write(&p, body)?;
        written.push(p);
        Ok(())
    };
    for f in formats {
        match f {
            Format::Csv => put("report.csv", &to_csv(report))?,
            Format::Json => put("report.json", &to_json(report))?,
            Format::Svg => {
                for (name, body) in svg_charts(report) {
                    put(&name, &body)?;
                }
            }
        }
    }
    Ok(written)
}
