//! Static SVG charts of a run or a sweep.

use std::path::Path;

use plotters::prelude::*;

use super::{HarnessError, SweepEntry, TimeSeriesRecord};

type Series = (String, Vec<(f64, f64)>);

const COLORS: [RGBColor; 6] = [BLUE, RED, GREEN, MAGENTA, CYAN, BLACK];

fn plot_err<E: std::fmt::Display>(e: E) -> HarnessError {
    HarnessError::Plot(e.to_string())
}

fn bounds(series: &[Series]) -> (f64, f64, f64, f64) {
    let pts = series.iter().flat_map(|(_, s)| s.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    let pad = ((y1 - y0) * 0.05).max(1e-6);
    (x0, x1, y0 - pad, y1 + pad)
}

fn line_chart(path: &Path, title: &str, x_label: &str, y_label: &str, series: &[Series]) -> Result<(), HarnessError> {
    let root = SVGBackend::new(path, (900, 500)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let (x0, x1, y0, y1) = bounds(series);
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(x0..x1, y0..y1)
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .x_desc(x_label)
        .y_desc(y_label)
        .draw()
        .map_err(plot_err)?;
    for (k, (name, pts)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        chart
            .draw_series(LineSeries::new(pts.iter().copied(), color))
            .map_err(plot_err)?
            .label(name.as_str())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], color));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(plot_err)?;
    root.present().map_err(plot_err)
}

/// Every `stride`-th record keeps the SVGs small.
fn decimate(records: &[TimeSeriesRecord]) -> impl Iterator<Item = &TimeSeriesRecord> {
    let stride = (records.len() / 2000).max(1);
    records.iter().step_by(stride)
}

/// Writes `tracking.svg`, `error.svg`, `tensions.svg`, `angles.svg` and
/// `solver.svg` into `dir`.
pub fn plot_run(dir: &Path, records: &[TimeSeriesRecord]) -> Result<(), HarnessError> {
    let Some(first) = records.first() else {
        return Err(HarnessError::EmptyRun);
    };
    let n = first.n();

    let track = vec![
        ("actual".to_string(), decimate(records).map(|r| (r.x_l.x, r.x_l.y)).collect()),
        ("desired".to_string(), decimate(records).map(|r| (r.x_ld.x, r.x_ld.y)).collect()),
    ];
    line_chart(&dir.join("tracking.svg"), "Load path (top view)", "x [m]", "y [m]", &track)?;

    let err = vec![("|e_L|".to_string(), decimate(records).map(|r| (r.t, r.e_l.norm())).collect())];
    line_chart(&dir.join("error.svg"), "Load tracking error", "t [s]", "m", &err)?;

    let mut tensions: Vec<Series> = Vec::new();
    for i in 0..n {
        tensions.push((format!("T{} actual", i + 1), decimate(records).map(|r| (r.t, r.tension_actual[i])).collect()));
    }
    line_chart(&dir.join("tensions.svg"), "Cable tensions", "t [s]", "N", &tensions)?;

    let angles = vec![("min pairwise".to_string(), decimate(records).map(|r| (r.t, r.min_angle())).collect())];
    line_chart(&dir.join("angles.svg"), "Minimum cable angle", "t [s]", "deg", &angles)?;

    let solver = vec![("solve time".to_string(), decimate(records).map(|r| (r.t, r.solve_time * 1e3)).collect())];
    line_chart(&dir.join("solver.svg"), "Allocator time per cycle", "t [s]", "ms", &solver)
}

/// Writes `sweep.svg`: minimum angle and integrated tension cost against mu.
pub fn plot_sweep(dir: &Path, entries: &[SweepEntry]) -> Result<(), HarnessError> {
    let series = vec![
        ("min angle [deg]".to_string(), entries.iter().map(|e| (e.mu, e.metrics.min_pairwise_angle)).collect()),
        ("J_T [N s]".to_string(), entries.iter().map(|e| (e.mu, e.metrics.j_t)).collect()),
    ];
    line_chart(&dir.join("sweep.svg"), "Penalty weight sweep", "mu", "", &series)
}
