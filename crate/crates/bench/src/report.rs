//! Report emission: JSON array, CSV table or an SVG scatter plot.

use std::fmt::Write as _;

use crate::error::{BenchError, BenchResult};
use crate::record::BenchRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Json,
    Csv,
    Svg,
}

impl std::str::FromStr for OutputFormat {
    type Err = BenchError;

    fn from_str(s: &str) -> BenchResult<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            "svg" | "svg-scatter" => Ok(OutputFormat::Svg),
            _ => Err(BenchError::Usage(format!("unknown output format '{s}'"))),
        }
    }
}

pub fn emit_report(records: &[BenchRecord], format: OutputFormat) -> BenchResult<Vec<u8>> {
    match format {
        OutputFormat::Json => {
            let mut out = serde_json::to_vec_pretty(records)?;
            out.push(b'\n');
            Ok(out)
        }
        OutputFormat::Csv => emit_csv(records),
        OutputFormat::Svg => emit_svg(records).map(String::into_bytes),
    }
}

pub fn parse_json(bytes: &[u8]) -> BenchResult<Vec<BenchRecord>> {
    Ok(serde_json::from_slice(bytes)?)
}

const CSV_HEADER: [&str; 14] = [
    "benchmark",
    "executor",
    "problem",
    "problem_size",
    "bytes_moved",
    "flops",
    "elapsed",
    "achieved",
    "bound",
    "fraction_of_peak",
    "arithmetic_intensity",
    "iterations",
    "status",
    "note",
];

fn emit_csv(records: &[BenchRecord]) -> BenchResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    // written by hand so an empty report still has its header
    w.write_record(CSV_HEADER)?;
    for r in records {
        let status = serde_json::to_value(r.status)?;
        w.write_record([
            r.benchmark.clone(),
            r.executor.clone(),
            r.problem.clone(),
            r.problem_size.to_string(),
            r.bytes_moved.to_string(),
            r.flops.to_string(),
            format!("{:?}", r.elapsed),
            format!("{:?}", r.achieved),
            format!("{:?}", r.bound),
            format!("{:?}", r.fraction_of_peak),
            format!("{:?}", r.arithmetic_intensity),
            r.iterations.map(|i| i.to_string()).unwrap_or_default(),
            status.as_str().unwrap_or_default().to_string(),
            r.note.clone().unwrap_or_default(),
        ])?;
    }
    w.into_inner().map_err(|e| BenchError::Data(e.to_string()))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const MARGIN: f64 = 60.0;

/// Achieved rate against problem size (log scale) with the largest bound as
/// a horizontal reference line.
fn emit_svg(records: &[BenchRecord]) -> BenchResult<String> {
    let points: Vec<&BenchRecord> = records.iter().filter(|r| r.is_ok()).collect();
    if points.is_empty() {
        return Err(BenchError::Usage(
            "svg report needs at least one measured record".into(),
        ));
    }
    let bound = points.iter().map(|r| r.bound).fold(0.0, f64::max);
    let y_max = points
        .iter()
        .map(|r| r.achieved)
        .fold(bound, f64::max)
        .max(1e-12)
        * 1.1;
    let lx: Vec<f64> = points
        .iter()
        .map(|r| (r.problem_size.max(1) as f64).log10())
        .collect();
    let x_lo = lx.iter().copied().fold(f64::INFINITY, f64::min).floor();
    let x_hi = lx
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
        .ceil()
        .max(x_lo + 1.0);
    let plot_w = WIDTH - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let sx = |v: f64| MARGIN + (v - x_lo) / (x_hi - x_lo) * plot_w;
    let sy = |v: f64| HEIGHT - MARGIN - v / y_max * plot_h;
    let unit = if points.iter().any(|r| r.benchmark.starts_with("stream")) {
        "GB/s"
    } else {
        "GFLOP/s"
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{m} {t} V{b} H{r}" stroke="black" fill="none"/>"#,
        m = MARGIN,
        t = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    );
    for d in (x_lo as i64)..=(x_hi as i64) {
        let x = sx(d as f64);
        let _ = writeln!(
            s,
            r#"<text x="{x:.1}" y="{y:.1}" font-size="11" text-anchor="middle">1e{d}</text>"#,
            y = HEIGHT - MARGIN + 16.0
        );
    }
    for k in 0..=4 {
        let v = y_max * k as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{x:.1}" y="{y:.1}" font-size="11" text-anchor="end">{v:.3}</text>"#,
            x = MARGIN - 6.0,
            y = sy(v) + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{x:.1}" y="{y:.1}" font-size="13" text-anchor="middle">problem size (elements or nnz)</text>"#,
        x = WIDTH / 2.0,
        y = HEIGHT - 16.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{y:.1}" font-size="13" transform="rotate(-90 16 {y:.1})" text-anchor="middle">achieved {unit}</text>"#,
        y = HEIGHT / 2.0
    );
    let _ = writeln!(
        s,
        r#"<line x1="{x1}" y1="{y:.2}" x2="{x2}" y2="{y:.2}" stroke="red" stroke-dasharray="6 4"/>"#,
        x1 = MARGIN,
        x2 = WIDTH - MARGIN,
        y = sy(bound)
    );
    let _ = writeln!(
        s,
        r#"<text x="{x:.1}" y="{y:.1}" font-size="11" fill="red" text-anchor="end">bound {bound:.3} {unit}</text>"#,
        x = WIDTH - MARGIN,
        y = sy(bound) - 4.0
    );
    for (r, x) in points.iter().zip(&lx) {
        let _ = writeln!(
            s,
            r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="3" fill="steelblue"><title>{t}</title></circle>"#,
            cx = sx(*x),
            cy = sy(r.achieved),
            t = escape(&format!("{} {} {}", r.benchmark, r.problem, r.achieved))
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}
