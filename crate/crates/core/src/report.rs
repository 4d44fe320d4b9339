//! Run artifacts: CSV time series, verdict listings and SVG plots.

use std::fmt::Write as _;
use std::io;

use crate::sim::Trajectory;
use crate::verify::Verdict;

/// Header `t, y_i, e_i, u_i, phi, phi_norm_e, w_norm` for `m` channels.
pub fn csv_header(m: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for name in ["y", "e", "u"] {
        h.extend((1..=m).map(|i| format!("{name}_{i}")));
    }
    h.extend(["phi", "phi_norm_e", "w_norm"].map(String::from));
    h
}

/// One row per sample, in header order.
pub fn csv_rows(traj: &Trajectory) -> Vec<Vec<f64>> {
    let m = traj.meta.m;
    (0..traj.len())
        .map(|i| {
            let mut row = vec![traj.t[i]];
            row.extend_from_slice(traj.y_deriv(i, 0));
            row.extend_from_slice(traj.e_deriv(i, 0));
            row.extend_from_slice(&traj.u[i][..m]);
            row.extend([traj.phi[i], traj.phi_norm_e[i], traj.w_norm(i)]);
            row
        })
        .collect()
}

/// Writes the samples with 17 significant digits, which round-trips `f64`.
pub fn write_csv(traj: &Trajectory, out: impl io::Write) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(csv_header(traj.meta.m))?;
    for row in csv_rows(traj) {
        w.write_record(row.iter().map(|v| format!("{v:.16e}")))?;
    }
    w.flush()?;
    Ok(())
}

/// Header `t, y{k}_i, e{k}_i` for every recorded derivative level `k < r`.
pub fn derivs_header(m: usize, r: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for name in ["y", "e"] {
        for k in 0..r {
            h.extend((1..=m).map(|i| format!("{name}{k}_{i}")));
        }
    }
    h
}

/// Companion file with all derivative levels of `y` and `e`.
pub fn write_derivs_csv(traj: &Trajectory, out: impl io::Write) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(derivs_header(traj.meta.m, traj.meta.r))?;
    for i in 0..traj.len() {
        let row = std::iter::once(traj.t[i]).chain(traj.y[i].iter().copied()).chain(traj.e[i].iter().copied());
        w.write_record(row.map(|v| format!("{v:.16e}")))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn read_csv(input: impl io::Read) -> Result<CsvTable, csv::Error> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|s| s.trim().parse::<f64>().map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e)))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok(CsvTable { header, rows })
}

pub fn verdict_report(id: &str, verdicts: &[Verdict]) -> String {
    let mut s = format!("scenario {id}\n");
    for v in verdicts {
        let _ = writeln!(s, "{v}");
    }
    let failed = verdicts.iter().filter(|v| !v.pass).count();
    let _ = writeln!(s, "{} checks, {failed} failed", verdicts.len());
    s
}

const WIDTH: f64 = 800.0;
const PANEL: f64 = 260.0;
const MARGIN: f64 = 40.0;
const MAX_POINTS: usize = 2000;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

struct Panel {
    top: f64,
    t_max: f64,
    y_lim: f64,
}

impl Panel {
    fn point(&self, t: f64, v: f64) -> (f64, f64) {
        let x = MARGIN + (WIDTH - 2.0 * MARGIN) * t / self.t_max;
        let v = v.clamp(-self.y_lim, self.y_lim);
        let y = self.top + PANEL / 2.0 - (PANEL / 2.0) * v / self.y_lim;
        (x, y)
    }

    fn polyline(&self, svg: &mut String, pts: impl Iterator<Item = (f64, f64)>, color: &str, dash: bool) {
        let coords: Vec<String> = pts
            .map(|(t, v)| {
                let (x, y) = self.point(t, v);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let dash = if dash { r#" stroke-dasharray="6 4""# } else { "" };
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.2"{dash} points="{}"/>"#,
            coords.join(" ")
        );
    }

    fn frame(&self, svg: &mut String, title: &str) {
        let _ = writeln!(
            svg,
            r##"<rect x="{MARGIN}" y="{}" width="{}" height="{PANEL}" fill="none" stroke="#888"/>"##,
            self.top,
            WIDTH - 2.0 * MARGIN
        );
        let (x0, y0) = self.point(0.0, 0.0);
        let _ = writeln!(
            svg,
            r##"<line x1="{x0:.2}" y1="{y0:.2}" x2="{:.2}" y2="{y0:.2}" stroke="#ccc"/>"##,
            WIDTH - MARGIN
        );
        let _ = writeln!(
            svg,
            r#"<text x="{MARGIN}" y="{}" font-family="sans-serif" font-size="13">{title} (|y| ≤ {:.3e}, t ≤ {:.3})</text>"#,
            self.top - 6.0,
            self.y_lim,
            self.t_max
        );
    }
}

fn stride(n: usize) -> usize {
    n.div_ceil(MAX_POINTS).max(1)
}

/// Tracking error with the funnel boundary `±1/φ` and the input, one
/// panel each. An optional second run is drawn dashed.
pub fn render_svg(traj: &Trajectory, other: Option<&Trajectory>) -> String {
    let runs: Vec<&Trajectory> = std::iter::once(traj).chain(other).collect();
    let t_max = runs.iter().map(|r| r.t_end()).fold(f64::MIN_POSITIVE, f64::max);
    let m = traj.meta.m;
    let peak = |f: &dyn Fn(&Trajectory, usize) -> f64| {
        runs.iter().flat_map(|r| (0..r.len()).map(move |i| (*r, i))).map(|(r, i)| f(r, i)).fold(0.0, f64::max)
    };
    let e_max = peak(&|r, i| r.e_deriv(i, 0).iter().fold(0.0, |a: f64, v| a.max(v.abs())));
    let radius_end = traj.phi.last().map_or(0.0, |p| if *p > 0.0 { 1.0 / p } else { 0.0 });
    let e_panel = Panel { top: MARGIN, t_max, y_lim: 1.1 * e_max.max(radius_end).max(1e-12) };
    let u_max = peak(&|r, i| r.u[i].iter().fold(0.0, |a: f64, v| a.max(v.abs())));
    let u_panel = Panel { top: 2.0 * MARGIN + PANEL, t_max, y_lim: 1.1 * u_max.max(1e-12) };

    let mut svg = String::new();
    let height = 3.0 * MARGIN + 2.0 * PANEL;
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    e_panel.frame(&mut svg, &format!("{}: error and funnel", traj.meta.label));
    u_panel.frame(&mut svg, "input");

    if traj.meta.phi.is_some() {
        let s = stride(traj.len());
        for sign in [1.0, -1.0] {
            let pts = (0..traj.len())
                .step_by(s)
                .filter(|&i| traj.phi[i] > 0.0)
                .map(|i| (traj.t[i], sign / traj.phi[i]));
            e_panel.polyline(&mut svg, pts, "#444", false);
        }
    }
    for (k, r) in runs.iter().enumerate() {
        let s = stride(r.len());
        for j in 0..m {
            let color = COLORS[j % COLORS.len()];
            e_panel.polyline(&mut svg, (0..r.len()).step_by(s).map(|i| (r.t[i], r.e_deriv(i, 0)[j])), color, k > 0);
            u_panel.polyline(&mut svg, (0..r.len()).step_by(s).map(|i| (r.t[i], r.u[i][j])), color, k > 0);
        }
    }
    svg.push_str("</svg>\n");
    svg
}
