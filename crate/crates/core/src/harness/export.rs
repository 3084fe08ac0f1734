use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::envelope::EnvelopeSummary;
use crate::{Error, Result};

/// 17 significant digits: enough to round-trip any f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub const TRACES_HEADER: &str = "run,checkpoint_iter,running_mean";
pub const SUMMARY_HEADER: &str = "checkpoint_iter,band_lo,band_hi,q05,q95,single_run";

pub fn traces_csv(s: &EnvelopeSummary) -> String {
    let mut out = String::with_capacity(48 * s.runs() * s.iters_axis.len());
    out.push_str(TRACES_HEADER);
    out.push('\n');
    for (run, trace) in s.per_run_traces.iter().enumerate() {
        for (t, m) in s.iters_axis.iter().zip(trace) {
            let _ = writeln!(out, "{run},{t},{}", fmt_f64(*m));
        }
    }
    out
}

pub fn summary_csv(s: &EnvelopeSummary) -> String {
    let mut out = String::new();
    out.push_str(SUMMARY_HEADER);
    out.push('\n');
    for c in 0..s.iters_axis.len() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            s.iters_axis[c],
            fmt_f64(s.band_lo[c]),
            fmt_f64(s.band_hi[c]),
            fmt_f64(s.q05[c]),
            fmt_f64(s.q95[c]),
            fmt_f64(s.single_run[c]),
        );
    }
    out
}

/// Writes the per-run traces and the band summary.
pub fn export_csv(s: &EnvelopeSummary, traces_path: &Path, summary_path: &Path) -> Result<()> {
    write_file(traces_path, &traces_csv(s))?;
    write_file(summary_path, &summary_csv(s))
}

fn rows<'a>(text: &'a str, header: &str, path: &Path) -> Result<impl Iterator<Item = (usize, Vec<&'a str>)>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == header => {}
        other => {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                reason: format!("expected header `{header}`, found `{}`", other.unwrap_or("")),
            })
        }
    }
    let width = header.split(',').count();
    let rows: Vec<(usize, Vec<&str>)> = lines.enumerate().map(|(i, l)| (i + 2, l.split(',').collect())).collect();
    if let Some((line, r)) = rows.iter().find(|(_, r)| r.len() != width) {
        return Err(Error::Parse { path: path.to_path_buf(), reason: format!("line {line}: {} fields, expected {width}", r.len()) });
    }
    Ok(rows.into_iter())
}

fn field<T: std::str::FromStr>(s: &str, line: usize, path: &Path) -> Result<T> {
    s.parse().map_err(|_| Error::Parse { path: path.to_path_buf(), reason: format!("line {line}: cannot parse `{s}`") })
}

/// Reads back what [`export_csv`] wrote. The running standard error and the
/// reference value are not part of the files and come back empty.
pub fn read_csv(traces_path: &Path, summary_path: &Path) -> Result<EnvelopeSummary> {
    let traces = fs::read_to_string(traces_path).map_err(|e| Error::io(traces_path, e))?;
    let summary = fs::read_to_string(summary_path).map_err(|e| Error::io(summary_path, e))?;
    let mut s = EnvelopeSummary {
        iters_axis: Vec::new(),
        per_run_traces: Vec::new(),
        band_lo: Vec::new(),
        band_hi: Vec::new(),
        q05: Vec::new(),
        q95: Vec::new(),
        single_run: Vec::new(),
        single_run_se: Vec::new(),
        reference: None,
    };
    for (line, r) in rows(&summary, SUMMARY_HEADER, summary_path)? {
        s.iters_axis.push(field(r[0], line, summary_path)?);
        s.band_lo.push(field(r[1], line, summary_path)?);
        s.band_hi.push(field(r[2], line, summary_path)?);
        s.q05.push(field(r[3], line, summary_path)?);
        s.q95.push(field(r[4], line, summary_path)?);
        s.single_run.push(field(r[5], line, summary_path)?);
    }
    for (line, r) in rows(&traces, TRACES_HEADER, traces_path)? {
        let run: usize = field(r[0], line, traces_path)?;
        let t: usize = field(r[1], line, traces_path)?;
        let m: f64 = field(r[2], line, traces_path)?;
        if run == s.per_run_traces.len() {
            s.per_run_traces.push(Vec::with_capacity(s.iters_axis.len()));
        } else if run + 1 != s.per_run_traces.len() {
            return Err(Error::Parse { path: traces_path.to_path_buf(), reason: format!("line {line}: runs out of order") });
        }
        let trace = s.per_run_traces.last_mut().unwrap();
        if s.iters_axis.get(trace.len()) != Some(&t) {
            return Err(Error::Parse {
                path: traces_path.to_path_buf(),
                reason: format!("line {line}: checkpoint {t} does not match the summary"),
            });
        }
        trace.push(m);
    }
    Ok(s)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub color: &'static str,
    pub dashed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub name: String,
    /// (x, lo, hi)
    pub points: Vec<(f64, f64, f64)>,
    pub color: &'static str,
    pub opacity: f64,
}

/// A minimal 2-D line chart rendered straight to SVG.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub bands: Vec<Band>,
    pub series: Vec<Series>,
    pub reference: Option<f64>,
}

pub const SVG_WIDTH: f64 = 800.0;
pub const SVG_HEIGHT: f64 = 500.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 55.0;

/// Tick step from {1, 2, 5} × 10^k giving roughly `target` intervals.
pub fn nice_step(span: f64, target: usize) -> f64 {
    let raw = span / target.max(1) as f64;
    let pow = 10f64.powf(raw.log10().floor());
    let frac = raw / pow;
    let m = if frac <= 1.0 {
        1.0
    } else if frac <= 2.0 {
        2.0
    } else if frac <= 5.0 {
        5.0
    } else {
        10.0
    };
    m * pow
}

pub fn linear_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let step = nice_step(hi - lo, 6);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

/// 1, 2, 5 × 10^k within [lo, hi] (both > 0).
pub fn log_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let mut out = Vec::new();
    for k in lo.log10().floor() as i32..=hi.log10().ceil() as i32 {
        for m in [1.0, 2.0, 5.0] {
            let v = m * 10f64.powi(k);
            if v >= lo * (1.0 - 1e-12) && v <= hi * (1.0 + 1e-12) {
                out.push(v);
            }
        }
    }
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn tick_label(v: f64, step: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if v.abs() >= 1e5 || v.abs() < 1e-3 {
        return format!("{v:.0e}");
    }
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    format!("{v:.decimals$}")
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if !(hi > lo) {
        let d = if lo == 0.0 { 1.0 } else { 0.1 * lo.abs() };
        return (lo - d, hi + d);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

impl Plot {
    fn extents(&self) -> ((f64, f64), (f64, f64)) {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for s in &self.series {
            for &(x, y) in &s.points {
                xs.push(x);
                ys.push(y);
            }
        }
        for b in &self.bands {
            for &(x, lo, hi) in &b.points {
                xs.push(x);
                ys.push(lo);
                ys.push(hi);
            }
        }
        ys.extend(self.reference);
        let ok = |v: &&f64| v.is_finite() && (!self.log_x || **v > 0.0);
        let xs: Vec<f64> = xs.iter().filter(ok).copied().collect();
        let ys: Vec<f64> = ys.iter().filter(|v| v.is_finite()).copied().collect();
        let min = |v: &[f64], d: f64| v.iter().copied().reduce(f64::min).unwrap_or(d);
        let max = |v: &[f64], d: f64| v.iter().copied().reduce(f64::max).unwrap_or(d);
        let (x0, x1) = (min(&xs, 1.0), max(&xs, 10.0));
        let x_range = if self.log_x {
            if x1 > x0 {
                (x0, x1)
            } else {
                (x0 / 2.0, x0 * 2.0)
            }
        } else if x1 > x0 {
            (x0, x1)
        } else {
            padded(x0, x1)
        };
        (x_range, padded(min(&ys, 0.0), max(&ys, 1.0)))
    }

    pub fn render(&self) -> String {
        let ((x0, x1), (y0, y1)) = self.extents();
        let pw = SVG_WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
        let ph = SVG_HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
        let log_x = self.log_x;
        let tx = move |x: f64| {
            let f = if log_x { (x.log10() - x0.log10()) / (x1.log10() - x0.log10()) } else { (x - x0) / (x1 - x0) };
            MARGIN_LEFT + f * pw
        };
        let ty = move |y: f64| MARGIN_TOP + (1.0 - (y - y0) / (y1 - y0)) * ph;
        let keep = |x: f64, y: f64| x.is_finite() && y.is_finite() && (!log_x || x > 0.0);

        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {SVG_WIDTH} {SVG_HEIGHT}" width="{SVG_WIDTH}" height="{SVG_HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(svg, r#"<rect x="0" y="0" width="{SVG_WIDTH}" height="{SVG_HEIGHT}" fill="white"/>"#);
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
            SVG_WIDTH / 2.0,
            escape(&self.title)
        );

        // Axes and ticks.
        let (bottom, right) = (MARGIN_TOP + ph, MARGIN_LEFT + pw);
        let _ = writeln!(svg, r#"<g stroke="black" stroke-width="1" fill="none">"#);
        let _ = writeln!(svg, r#"<line x1="{MARGIN_LEFT}" y1="{bottom}" x2="{right}" y2="{bottom}"/>"#);
        let _ = writeln!(svg, r#"<line x1="{MARGIN_LEFT}" y1="{MARGIN_TOP}" x2="{MARGIN_LEFT}" y2="{bottom}"/>"#);
        let _ = writeln!(svg, "</g>");
        let (xt, x_step) = if log_x { (log_ticks(x0, x1), 1.0) } else { (linear_ticks(x0, x1), nice_step(x1 - x0, 6)) };
        let _ = writeln!(svg, r#"<g class="x-ticks" text-anchor="middle">"#);
        for v in xt {
            let x = tx(v);
            let _ = writeln!(svg, r#"<line x1="{x:.2}" y1="{bottom}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#, bottom + 5.0);
            let _ = writeln!(svg, r#"<text x="{x:.2}" y="{:.2}">{}</text>"#, bottom + 19.0, tick_label(v, x_step));
        }
        let _ = writeln!(svg, "</g>");
        let y_step = nice_step(y1 - y0, 6);
        let _ = writeln!(svg, r#"<g class="y-ticks" text-anchor="end">"#);
        for v in linear_ticks(y0, y1) {
            let y = ty(v);
            let _ = writeln!(svg, r#"<line x1="{:.2}" y1="{y:.2}" x2="{MARGIN_LEFT}" y2="{y:.2}" stroke="black"/>"#, MARGIN_LEFT - 5.0);
            let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, MARGIN_LEFT - 8.0, y + 4.0, tick_label(v, y_step));
        }
        let _ = writeln!(svg, "</g>");
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            MARGIN_LEFT + pw / 2.0,
            SVG_HEIGHT - 12.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            svg,
            r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
            MARGIN_TOP + ph / 2.0,
            MARGIN_TOP + ph / 2.0,
            escape(&self.y_label)
        );

        for b in &self.bands {
            let pts: Vec<_> = b.points.iter().filter(|p| keep(p.0, p.1) && p.2.is_finite()).collect();
            let mut coords: Vec<String> = pts.iter().map(|p| format!("{:.2},{:.2}", tx(p.0), ty(p.2))).collect();
            coords.extend(pts.iter().rev().map(|p| format!("{:.2},{:.2}", tx(p.0), ty(p.1))));
            let _ = writeln!(
                svg,
                r#"<polygon class="band" data-name="{}" points="{}" fill="{}" fill-opacity="{}" stroke="none"/>"#,
                escape(&b.name),
                coords.join(" "),
                b.color,
                b.opacity
            );
        }
        if let Some(r) = self.reference {
            let y = ty(r);
            let _ = writeln!(
                svg,
                r#"<line class="reference" x1="{MARGIN_LEFT}" y1="{y:.2}" x2="{right}" y2="{y:.2}" stroke="black" stroke-dasharray="2 3"/>"#
            );
        }
        for s in &self.series {
            let coords: Vec<String> = s
                .points
                .iter()
                .filter(|p| keep(p.0, p.1))
                .map(|p| format!("{:.2},{:.2}", tx(p.0), ty(p.1)))
                .collect();
            let dash = if s.dashed { r#" stroke-dasharray="6 4""# } else { "" };
            let _ = writeln!(
                svg,
                r#"<polyline class="series" data-name="{}" points="{}" fill="none" stroke="{}" stroke-width="1.5"{dash}/>"#,
                escape(&s.name),
                coords.join(" "),
                s.color
            );
        }
        svg.push_str("</svg>\n");
        svg
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_file(path, &self.render())
    }
}

/// Envelope chart: min/max band, 5–95% band, the single run, optional ±3 se
/// lines around it, and the reference value.
pub fn envelope_plot(s: &EnvelopeSummary, title: &str, with_se: bool) -> Plot {
    let x: Vec<f64> = s.iters_axis.iter().map(|&t| t as f64).collect();
    let band = |lo: &[f64], hi: &[f64]| x.iter().zip(lo.iter().zip(hi)).map(|(&x, (&l, &h))| (x, l, h)).collect();
    let mut series = vec![Series {
        name: "single run".into(),
        points: x.iter().copied().zip(s.single_run.iter().copied()).collect(),
        color: "#1f4e9c",
        dashed: false,
    }];
    if with_se && s.single_run_se.len() == s.single_run.len() {
        for (name, sign) in [("single run + 3 se", 1.0), ("single run - 3 se", -1.0)] {
            series.push(Series {
                name: name.into(),
                points: x.iter().zip(s.single_run.iter().zip(&s.single_run_se)).map(|(&x, (&m, &se))| (x, m + sign * 3.0 * se)).collect(),
                color: "#1f4e9c",
                dashed: true,
            });
        }
    }
    Plot {
        title: title.into(),
        x_label: "iterations".into(),
        y_label: "running mean".into(),
        log_x: true,
        bands: vec![
            Band { name: "min-max".into(), points: band(&s.band_lo, &s.band_hi), color: "#f2a65a", opacity: 0.45 },
            Band { name: "5-95%".into(), points: band(&s.q05, &s.q95), color: "#d9631e", opacity: 0.45 },
        ],
        series,
        reference: s.reference,
    }
}

pub fn export_svg(s: &EnvelopeSummary, path: &Path, title: &str) -> Result<()> {
    envelope_plot(s, title, false).write(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::envelope::run_envelope;
    use crate::RngStream;

    fn summary(runs: usize, iters: usize) -> EnvelopeSummary {
        run_envelope(|rng: &mut RngStream| Ok((0..iters).map(|_| rng.next_f64() - 0.5).collect()), runs, iters, 77).unwrap()
    }

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, -1.0 / 3.0, 1e-300, f64::MAX, 5e-324, 0.0] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let s = summary(7, 300);
        let (a, b) = (dir.path().join("t.csv"), dir.path().join("s.csv"));
        export_csv(&s, &a, &b).unwrap();
        let back = read_csv(&a, &b).unwrap();
        assert_eq!(back.iters_axis, s.iters_axis);
        for (x, y) in back.per_run_traces.iter().flatten().zip(s.per_run_traces.iter().flatten()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        assert_eq!(back.band_lo, s.band_lo);
        assert_eq!(back.band_hi, s.band_hi);
        assert_eq!(back.q05, s.q05);
        assert_eq!(back.q95, s.q95);
        assert_eq!(back.single_run, s.single_run);
        let text = std::fs::read_to_string(&a).unwrap();
        assert_eq!(text.lines().count(), 7 * s.iters_axis.len() + 1);
    }

    #[test]
    fn malformed_csv_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("t.csv"), dir.path().join("s.csv"));
        export_csv(&summary(2, 100), &a, &b).unwrap();
        std::fs::write(&a, "run,checkpoint_iter,running_mean\n0,10,abc\n").unwrap();
        assert!(matches!(read_csv(&a, &b), Err(Error::Parse { .. })));
        std::fs::write(&a, "bad header\n").unwrap();
        assert!(matches!(read_csv(&a, &b), Err(Error::Parse { .. })));
        assert!(matches!(read_csv(&dir.path().join("missing"), &b), Err(Error::Io { .. })));
    }

    #[test]
    fn unwritable_path_names_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let bad = dir.path().join("no/such/dir/x.csv");
        match export_csv(&summary(1, 100), &bad, &bad) {
            Err(Error::Io { path, .. }) => assert_eq!(path, bad),
            other => panic!("{other:?}"),
        }
    }

    fn check_svg(text: &str, series: usize) {
        let doc = roxmltree::Document::parse(text).unwrap();
        let root = doc.root_element();
        assert_eq!(root.tag_name().name(), "svg");
        assert_eq!(root.attribute("viewBox"), Some("0 0 800 500"));
        let polylines = doc.descendants().filter(|n| n.has_tag_name("polyline")).count();
        assert_eq!(polylines, series);
        assert!(doc.descendants().any(|n| n.has_tag_name("polygon")));
    }

    #[test]
    fn svg_structure() {
        let mut s = summary(10, 1000);
        s.reference = Some(0.0);
        let plot = envelope_plot(&s, "a <title> & more", true);
        let text = plot.render();
        check_svg(&text, plot.series.len());
        assert_eq!(plot.series.len(), 3);
        assert!(text.contains(r#"class="reference""#));
    }

    #[test]
    fn degenerate_summary_still_renders() {
        let dir = tempfile::tempdir().unwrap();
        let s = summary(1, 1);
        let p = dir.path().join("x.svg");
        export_svg(&s, &p, "tiny").unwrap();
        check_svg(&std::fs::read_to_string(&p).unwrap(), 1);
        let (a, b) = (dir.path().join("t.csv"), dir.path().join("s.csv"));
        export_csv(&s, &a, &b).unwrap();
        assert_eq!(read_csv(&a, &b).unwrap().per_run_traces, s.per_run_traces);
    }

    #[test]
    fn tick_rules() {
        assert_eq!(nice_step(10.0, 5), 2.0);
        assert_eq!(nice_step(0.7, 6), 0.2);
        assert_eq!(log_ticks(10.0, 1000.0), vec![10.0, 20.0, 50.0, 100.0, 200.0, 500.0, 1000.0]);
        let t = linear_ticks(-0.33, 0.41);
        assert!(t.contains(&0.0) && t.iter().all(|v| (-0.33..=0.41).contains(v)));
    }
}
