//! Static SVG line charts of a run.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, Result};
use plotters::coord::Shift;
use plotters::prelude::*;
use setobs::scenarios::Scenario;
use setobs::sim::Sample;

const MAX_POINTS: usize = 2000;

struct Point {
    t: f64,
    x: Vec<f64>,
    xi: [Vec<f64>; 2],
    theta: Vec<f64>,
    theta_hat: [Vec<f64>; 2],
    ideal: Option<Vec<f64>>,
    bar: Option<[Vec<f64>; 2]>,
    theta_box: [Vec<f64>; 2],
    /// Indicator flags raised anywhere since the previous kept point.
    s: bool,
    d: bool,
    z: bool,
}

/// Decimated copy of a run, at most [`MAX_POINTS`] samples.
pub struct PlotData {
    stride: usize,
    seen: usize,
    flags: (bool, bool, bool),
    points: Vec<Point>,
}

impl PlotData {
    pub fn new(samples: usize) -> Self {
        PlotData {
            stride: samples.div_ceil(MAX_POINTS).max(1),
            seen: 0,
            flags: (false, false, false),
            points: Vec::new(),
        }
    }

    pub fn push(&mut self, scenario: &Scenario, s: &Sample) {
        let ind = &s.indicators;
        self.flags.0 |= ind.s.any;
        self.flags.1 |= ind.d.as_ref().is_some_and(|d| d.any);
        self.flags.2 |= ind.z.any;
        self.seen += 1;
        if !(self.seen - 1).is_multiple_of(self.stride) {
            return;
        }
        let v = |x: &setobs::numerics::RealVector| x.as_slice().to_vec();
        let pbox = scenario.spec.box_at(s.t);
        let (s_flag, d_flag, z_flag) = std::mem::take(&mut self.flags);
        self.points.push(Point {
            t: s.t,
            x: v(&s.x),
            xi: [v(&s.xi.lower), v(&s.xi.upper)],
            theta: v(&s.theta),
            theta_hat: [v(&s.theta_hat.lower), v(&s.theta_hat.upper)],
            ideal: s.ideal_theta_hat.as_ref().map(v),
            bar: s
                .report
                .theta_bar_inf
                .as_ref()
                .map(|b| [v(&b.lower), v(&b.upper)]),
            theta_box: [v(&pbox.lower), v(&pbox.upper)],
            s: s_flag,
            d: d_flag,
            z: z_flag,
        });
    }
}

struct Series {
    label: String,
    color: RGBColor,
    points: Vec<(f64, f64)>,
}

struct Panel {
    title: String,
    series: Vec<Series>,
    /// Fixed value axis; fitted to the data when `None`.
    range: Option<(f64, f64)>,
}

const LOWER: RGBColor = RGBColor(31, 119, 180);
const UPPER: RGBColor = RGBColor(214, 39, 40);
const TRUTH: RGBColor = RGBColor(0, 0, 0);
const EXTRA: RGBColor = RGBColor(44, 160, 44);
const BOUND: RGBColor = RGBColor(255, 127, 14);

fn series(
    label: &str,
    color: RGBColor,
    pts: &[Point],
    f: impl Fn(&Point) -> Option<f64>,
) -> Series {
    let points = pts
        .iter()
        .filter_map(|p| f(p).filter(|y| y.is_finite()).map(|y| (p.t, y)))
        .collect();
    Series {
        label: label.to_string(),
        color,
        points,
    }
}

/// Writes every figure into `dir` and returns the file paths.
pub fn write_all(data: &PlotData, dir: &Path) -> Result<Vec<PathBuf>> {
    let pts = &data.points;
    if pts.is_empty() {
        return Ok(Vec::new());
    }
    let q = pts[0].theta.len();
    let n = pts[0].x.len();

    let parameters = (0..q)
        .map(|j| {
            let mut s = vec![
                series("theta", TRUTH, pts, |p| Some(p.theta[j])),
                series("theta_hat_m", LOWER, pts, |p| Some(p.theta_hat[0][j])),
                series("theta_hat_M", UPPER, pts, |p| Some(p.theta_hat[1][j])),
            ];
            if pts[0].ideal.is_some() {
                s.push(series("theta_hat ideal", EXTRA, pts, |p| {
                    p.ideal.as_ref().map(|v| v[j])
                }));
            }
            Panel {
                title: format!("parameter {}", j + 1),
                series: s,
                range: None,
            }
        })
        .collect();

    let theta_bar = (0..q)
        .map(|j| Panel {
            title: format!("averaged equilibria theta_bar, parameter {}", j + 1),
            series: vec![
                series("theta_bar_m", LOWER, pts, |p| {
                    p.bar.as_ref().map(|b| b[0][j])
                }),
                series("theta_bar_M", UPPER, pts, |p| {
                    p.bar.as_ref().map(|b| b[1][j])
                }),
                series("box lower", BOUND, pts, |p| Some(p.theta_box[0][j])),
                series("box upper", BOUND, pts, |p| Some(p.theta_box[1][j])),
            ],
            range: None,
        })
        .collect();

    let states = (0..n)
        .map(|i| Panel {
            title: format!("state {}", i + 1),
            series: vec![
                series("x", TRUTH, pts, |p| Some(p.x[i])),
                series("xi_m", LOWER, pts, |p| Some(p.xi[0][i])),
                series("xi_M", UPPER, pts, |p| Some(p.xi[1][i])),
            ],
            range: None,
        })
        .collect();

    let flag = |b: bool| Some(if b { 1.0 } else { 0.0 });
    let indicator = |name: &str, color, f: fn(&Point) -> bool| Panel {
        title: name.to_string(),
        series: vec![series(name, color, pts, |p| flag(f(p)))],
        range: Some((-0.1, 1.1)),
    };
    let indicators = vec![
        indicator("S", UPPER, |p| p.s),
        indicator("D", LOWER, |p| p.d),
        indicator("Z", EXTRA, |p| p.z),
    ];

    let mut written = Vec::new();
    for (name, panels) in [
        ("parameters", parameters),
        ("theta_bar", theta_bar),
        ("states", states),
        ("indicators", indicators),
    ] {
        let path = dir.join(format!("{name}.svg"));
        draw(&path, &panels).map_err(|e| anyhow!("plotting {}: {e}", path.display()))?;
        written.push(path);
    }
    Ok(written)
}

fn draw(path: &Path, panels: &[Panel]) -> Result<(), Box<dyn std::error::Error>> {
    let root = SVGBackend::new(path, (900, 260 * panels.len().max(1) as u32)).into_drawing_area();
    root.fill(&WHITE)?;
    let areas = root.split_evenly((panels.len().max(1), 1));
    for (panel, area) in panels.iter().zip(&areas) {
        draw_panel(panel, area)?;
    }
    root.present()?;
    Ok(())
}

fn draw_panel(
    panel: &Panel,
    area: &DrawingArea<SVGBackend<'_>, Shift>,
) -> Result<(), Box<dyn std::error::Error>> {
    let all = panel.series.iter().flat_map(|s| s.points.iter());
    let (mut t0, mut t1, mut lo, mut hi) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for &(t, y) in all {
        t0 = t0.min(t);
        t1 = t1.max(t);
        lo = lo.min(y);
        hi = hi.max(y);
    }
    if !t0.is_finite() {
        (t0, t1, lo, hi) = (0.0, 1.0, 0.0, 1.0);
    }
    if t1 <= t0 {
        t1 = t0 + 1.0;
    }
    let pad = if hi > lo { 0.05 * (hi - lo) } else { 1.0 };
    let (lo, hi) = panel.range.unwrap_or((lo - pad, hi + pad));
    let mut chart = ChartBuilder::on(area)
        .caption(&panel.title, ("sans-serif", 16))
        .margin(8)
        .x_label_area_size(30)
        .y_label_area_size(70)
        .build_cartesian_2d(t0..t1, lo..hi)?;
    chart.configure_mesh().x_desc("t [s]").draw()?;
    for s in &panel.series {
        let color = s.color;
        chart
            .draw_series(LineSeries::new(
                s.points.iter().copied(),
                color.stroke_width(1),
            ))?
            .label(s.label.as_str())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()?;
    Ok(())
}
