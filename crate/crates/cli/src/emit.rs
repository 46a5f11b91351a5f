//! CSV and SVG output of benchmark rows.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use crate::bench::{median_errors, BenchmarkRow, Method};
use crate::error::{CliError, CliResult};

pub const CSV_HEADER: &str = "n,method,p,rep,error,seconds,seed";

/// Writes rows as CSV; an empty slice gives a header-only file.
pub fn write_csv<W: Write>(rows: &[BenchmarkRow], out: W) -> CliResult<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER.split(','))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> CliResult<Vec<BenchmarkRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header.join(",") != CSV_HEADER {
        return Err(CliError::Config(format!("unexpected CSV header '{}'", header.join(","))));
    }
    Ok(r.deserialize().collect::<Result<Vec<BenchmarkRow>, _>>()?)
}

pub fn write_csv_file(rows: &[BenchmarkRow], path: &Path) -> CliResult<()> {
    write_csv(rows, std::fs::File::create(path)?)
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;

fn colour(method: Method) -> &'static str {
    match method {
        Method::Deconv => "#1b6ca8",
        Method::NaiveSorted => "#d1495b",
        Method::PavaCoupled => "#3d9970",
    }
}

/// Log–log plot of median error against `n`, one polyline per method, at
/// exponent `p` (the smallest `p` present when `None`).
pub fn render_svg(rows: &[BenchmarkRow], p: Option<f64>) -> CliResult<String> {
    if rows.is_empty() {
        return Err(CliError::Config("cannot plot an empty benchmark".into()));
    }
    let p = p.unwrap_or_else(|| rows.iter().map(|r| r.p).fold(f64::INFINITY, f64::min));
    let series: Vec<(Method, Vec<(usize, f64)>)> = Method::ALL
        .iter()
        .map(|&m| {
            let pts = median_errors(rows, m, p)
                .into_iter()
                .filter(|&(_, e)| e > 0.0)
                .collect::<Vec<_>>();
            (m, pts)
        })
        .filter(|(_, pts)| !pts.is_empty())
        .collect();

    let all = series.iter().flat_map(|(_, pts)| pts.iter());
    let (mut xmin, mut xmax, mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(n, e) in all {
        let (lx, ly) = ((n as f64).log10(), e.log10());
        xmin = xmin.min(lx);
        xmax = xmax.max(lx);
        ymin = ymin.min(ly);
        ymax = ymax.max(ly);
    }
    if !xmin.is_finite() {
        (xmin, xmax, ymin, ymax) = (0.0, 1.0, -1.0, 0.0);
    }
    let pad = |lo: f64, hi: f64| if hi - lo < 1e-9 { (lo - 0.5, hi + 0.5) } else { (lo, hi) };
    let (xmin, xmax) = pad(xmin, xmax);
    let (ymin, ymax) = pad(ymin, ymax);
    let sx = |lx: f64| MARGIN + (lx - xmin) / (xmax - xmin) * (WIDTH - 2.0 * MARGIN);
    let sy = |ly: f64| HEIGHT - MARGIN - (ly - ymin) / (ymax - ymin) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (x0, y0, x1, y1) = (MARGIN, HEIGHT - MARGIN, WIDTH - MARGIN, MARGIN);
    let _ = writeln!(svg, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#);
    let _ = writeln!(svg, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#);
    for k in (xmin.ceil() as i32)..=(xmax.floor() as i32) {
        let x = sx(k as f64);
        let _ = writeln!(svg, r#"<text x="{x:.1}" y="{:.1}" font-size="12" text-anchor="middle">1e{k}</text>"#, y0 + 18.0);
    }
    for k in (ymin.ceil() as i32)..=(ymax.floor() as i32) {
        let y = sy(k as f64);
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{y:.1}" font-size="12" text-anchor="end">1e{k}</text>"#, x0 - 6.0);
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" font-size="13" text-anchor="middle">n</text>"#,
        WIDTH / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="15" y="{:.1}" font-size="13" text-anchor="middle" transform="rotate(-90 15 {:.1})">median l{p} error</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    for (i, (method, pts)) in series.iter().enumerate() {
        let points: Vec<String> = pts
            .iter()
            .map(|&(n, e)| format!("{:.2},{:.2}", sx((n as f64).log10()), sy(e.log10())))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{}" stroke-width="2" points="{}"><title>{}</title></polyline>"#,
            colour(*method),
            points.join(" "),
            method.name()
        );
        let ly = MARGIN + 16.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{ly:.1}" font-size="12" fill="{}">{}</text>"#,
            WIDTH - MARGIN - 90.0,
            colour(*method),
            method.name()
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn write_svg_file(rows: &[BenchmarkRow], p: Option<f64>, path: &Path) -> CliResult<()> {
    std::fs::write(path, render_svg(rows, p)?)?;
    Ok(())
}
