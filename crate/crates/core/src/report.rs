//! Comma-separated exports of curves, traces and comparisons, plus simple
//! SVG charts. Every table may start with `#`-prefixed provenance lines.

use std::fmt::Write as _;
use std::io::{self, Write};

use crate::evolution::EvolutionTrace;
use crate::network::ErrorCurve;
use crate::pipeline::{ComparisonReport, SweepSummary};

fn provenance_lines<W: Write>(out: &mut W, provenance: &str) -> io::Result<()> {
    for line in provenance.lines() {
        writeln!(out, "# {line}")?;
    }
    Ok(())
}

pub fn write_curve<W: Write>(mut out: W, provenance: &str, curve: &ErrorCurve) -> io::Result<()> {
    provenance_lines(&mut out, provenance)?;
    writeln!(out, "iteration,sse,mse")?;
    for p in curve.iter() {
        writeln!(out, "{},{},{}", p.iteration, p.sse, p.mse)?;
    }
    Ok(())
}

pub fn write_trace<W: Write>(
    mut out: W,
    provenance: &str,
    trace: &EvolutionTrace,
) -> io::Result<()> {
    provenance_lines(&mut out, provenance)?;
    writeln!(out, "generation,best_sse,mean_sse")?;
    for g in &trace.generations {
        writeln!(out, "{},{},{}", g.generation, g.best_sse, g.mean_sse)?;
    }
    Ok(())
}

fn test_mse(r: &crate::pipeline::RunReport) -> f64 {
    r.test.as_ref().map_or(f64::NAN, |t| t.mse)
}

/// One row per paired seed, then a `median` row when `summary` is given.
pub fn write_comparison<W: Write>(
    mut out: W,
    provenance: &str,
    reports: &[ComparisonReport],
    summary: Option<&SweepSummary>,
) -> io::Result<()> {
    provenance_lines(&mut out, provenance)?;
    writeln!(
        out,
        "seed,bp_initial_sse,gabp_initial_sse,bp_train_mse,gabp_train_mse,bp_test_mse,gabp_test_mse,\
         bp_level_accuracy,gabp_level_accuracy,relative_reduction"
    )?;
    for r in reports {
        let acc =
            |x: &crate::pipeline::RunReport| x.test.as_ref().map_or(f64::NAN, |t| t.level_accuracy);
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.gabp.seed,
            r.bp.curve.first().map_or(f64::NAN, |p| p.sse),
            r.gabp.curve.first().map_or(f64::NAN, |p| p.sse),
            r.bp.train.mse,
            r.gabp.train.mse,
            test_mse(&r.bp),
            test_mse(&r.gabp),
            acc(&r.bp),
            acc(&r.gabp),
            r.relative_reduction
        )?;
    }
    if let Some(s) = summary {
        writeln!(
            out,
            "median,,,{},{},{},{},,,{}",
            s.median_bp_train_mse,
            s.median_gabp_train_mse,
            s.median_bp_test_mse,
            s.median_gabp_test_mse,
            s.median_relative_reduction
        )?;
    }
    Ok(())
}

pub fn write_sample_table<W: Write>(
    mut out: W,
    provenance: &str,
    reports: &[ComparisonReport],
) -> io::Result<()> {
    provenance_lines(&mut out, provenance)?;
    writeln!(
        out,
        "seed,sample,target,bp_prediction,gabp_prediction,bp_abs_error,gabp_abs_error"
    )?;
    for r in reports {
        for row in &r.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.gabp.seed,
                row.index,
                row.target,
                row.bp_prediction,
                row.gabp_prediction,
                row.bp_abs_error,
                row.gabp_abs_error
            )?;
        }
    }
    Ok(())
}

/// Training curves of both legs side by side; the shorter curve leaves blanks.
pub fn write_paired_curves<W: Write>(
    mut out: W,
    provenance: &str,
    reports: &[ComparisonReport],
) -> io::Result<()> {
    provenance_lines(&mut out, provenance)?;
    writeln!(out, "seed,iteration,bp_sse,gabp_sse")?;
    for r in reports {
        let n = r.bp.curve.len().max(r.gabp.curve.len());
        for i in 0..n {
            let cell = |c: &ErrorCurve| {
                c.points
                    .get(i)
                    .map(|p| p.sse.to_string())
                    .unwrap_or_default()
            };
            writeln!(
                out,
                "{},{},{},{}",
                r.gabp.seed,
                i,
                cell(&r.bp.curve),
                cell(&r.gabp.curve)
            )?;
        }
    }
    Ok(())
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 60.0;

struct Chart {
    svg: String,
    x: (f64, f64),
    y: (f64, f64),
}

impl Chart {
    fn new(title: &str, x_label: &str, y_label: &str, x: (f64, f64), y: (f64, f64)) -> Self {
        let pad = |(lo, hi): (f64, f64)| {
            if hi > lo {
                (lo, hi)
            } else {
                (lo - 0.5, hi + 0.5)
            }
        };
        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
        );
        let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="24" text-anchor="middle" font-size="16">{title}</text>"#,
            WIDTH / 2.0
        );
        let (x0, y0, x1, y1) = (MARGIN, HEIGHT - MARGIN, WIDTH - MARGIN, MARGIN);
        let _ = writeln!(
            svg,
            r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#
        );
        let _ = writeln!(
            svg,
            r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{x_label}</text>"#,
            WIDTH / 2.0,
            HEIGHT - 20.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="16" y="{}" text-anchor="middle" font-size="12" transform="rotate(-90 16 {})">{y_label}</text>"#,
            HEIGHT / 2.0,
            HEIGHT / 2.0
        );
        let mut chart = Self {
            svg,
            x: pad(x),
            y: pad(y),
        };
        chart.ticks();
        chart
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - 2.0 * MARGIN)
    }

    fn ticks(&mut self) {
        for i in 0..=4 {
            let t = i as f64 / 4.0;
            let (xv, yv) = (
                self.x.0 + t * (self.x.1 - self.x.0),
                self.y.0 + t * (self.y.1 - self.y.0),
            );
            let (px, py) = (self.px(xv), self.py(yv));
            let _ = writeln!(
                self.svg,
                r#"<text x="{px:.2}" y="{:.2}" text-anchor="middle" font-size="10">{xv:.3}</text>"#,
                HEIGHT - MARGIN + 14.0
            );
            let _ = writeln!(
                self.svg,
                r#"<text x="{:.2}" y="{py:.2}" text-anchor="end" font-size="10">{yv:.3}</text>"#,
                MARGIN - 4.0
            );
        }
    }

    fn series(&mut self, points: &[(f64, f64)], color: &str, label: &str, slot: usize) {
        let path: Vec<String> = points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", self.px(x), self.py(y)))
            .collect();
        let _ = writeln!(
            self.svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            path.join(" ")
        );
        for &(x, y) in points {
            let _ = writeln!(
                self.svg,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                self.px(x),
                self.py(y)
            );
        }
        let ly = MARGIN + 16.0 * slot as f64;
        let lx = WIDTH - MARGIN - 110.0;
        let _ = writeln!(
            self.svg,
            r#"<rect x="{lx}" y="{}" width="10" height="10" fill="{color}"/>"#,
            ly - 9.0
        );
        let _ = writeln!(
            self.svg,
            r#"<text x="{}" y="{ly}" font-size="12">{label}</text>"#,
            lx + 14.0
        );
    }

    fn finish(mut self) -> String {
        self.svg.push_str("</svg>\n");
        self.svg
    }
}

fn extent(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        })
}

/// log10 MSE against iteration for both legs; BP first, then GA-BP.
pub fn svg_error_curves(report: &ComparisonReport) -> String {
    let series = |c: &ErrorCurve| -> Vec<(f64, f64)> {
        c.iter()
            .map(|p| (p.iteration as f64, p.mse.max(1e-300).log10()))
            .collect()
    };
    let (bp, gabp) = (series(&report.bp.curve), series(&report.gabp.curve));
    let all = || bp.iter().chain(&gabp);
    let (x0, x1) = extent(all().map(|p| p.0));
    let (y0, y1) = extent(all().map(|p| p.1));
    let mut chart = Chart::new(
        "Training error",
        "iteration",
        "log10 MSE",
        (x0.min(0.0), x1),
        (y0, y1),
    );
    chart.series(&bp, "#d62728", "BP", 0);
    chart.series(&gabp, "#1f77b4", "GA-BP", 1);
    chart.finish()
}

/// Predicted against actual score per test sample.
pub fn svg_predictions(report: &ComparisonReport) -> String {
    let pick = |f: &dyn Fn(&crate::pipeline::SampleComparison) -> f64| -> Vec<(f64, f64)> {
        report
            .rows
            .iter()
            .map(|r| (r.index as f64 + 1.0, f(r)))
            .collect()
    };
    let actual = pick(&|r| r.target);
    let bp = pick(&|r| r.bp_prediction);
    let gabp = pick(&|r| r.gabp_prediction);
    let (y0, y1) = extent(actual.iter().chain(&bp).chain(&gabp).map(|p| p.1));
    let n = report.rows.len().max(1) as f64;
    let mut chart = Chart::new(
        "Test predictions",
        "test sample",
        "score",
        (1.0, n),
        (y0.min(0.0), y1.max(1.0)),
    );
    chart.series(&actual, "#2ca02c", "actual", 0);
    chart.series(&bp, "#d62728", "BP", 1);
    chart.series(&gabp, "#1f77b4", "GA-BP", 2);
    chart.finish()
}
