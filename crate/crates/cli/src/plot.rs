use std::path::Path;

use cantm::analysis::BreakdownTable;
use chrono::NaiveDate;
use plotters::prelude::*;

use crate::commands::CliError;

const SIZE: (u32, u32) = (960, 540);

const PALETTE: [RGBColor; 10] = [
    RGBColor(31, 119, 180),
    RGBColor(255, 127, 14),
    RGBColor(44, 160, 44),
    RGBColor(214, 39, 40),
    RGBColor(148, 103, 189),
    RGBColor(140, 86, 75),
    RGBColor(227, 119, 194),
    RGBColor(127, 127, 127),
    RGBColor(188, 189, 34),
    RGBColor(23, 190, 207),
];

fn colour(i: usize) -> RGBColor {
    PALETTE[i % PALETTE.len()]
}

fn plot_err(path: &Path) -> impl Fn(String) -> CliError + '_ {
    move |message| CliError::Plot {
        path: path.to_path_buf(),
        message,
    }
}

/// Line chart of dated series on a shared 0-100 scale.
pub fn trend_lines(path: &Path, series: &[(String, Vec<(NaiveDate, f64)>)]) -> Result<(), CliError> {
    let err = plot_err(path);
    let dates = series.iter().flat_map(|(_, s)| s.iter().map(|(d, _)| *d));
    let (Some(first), Some(last)) = (dates.clone().min(), dates.max()) else {
        return Err(err("nothing to draw".into()));
    };
    let days = (last - first).num_days().max(1) as f64;
    let ymax = series
        .iter()
        .flat_map(|(_, s)| s.iter().map(|(_, v)| *v))
        .fold(100.0f64, f64::max);

    let root = SVGBackend::new(path, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(|e| err(e.to_string()))?;
    let mut chart = ChartBuilder::on(&root)
        .margin(20)
        .x_label_area_size(40)
        .y_label_area_size(50)
        .build_cartesian_2d(0.0..days, 0.0..ymax * 1.05)
        .map_err(|e| err(e.to_string()))?;
    let label = |x: &f64| (first + chrono::Duration::days(x.round() as i64)).format("%Y-%m-%d").to_string();
    chart
        .configure_mesh()
        .x_label_formatter(&label)
        .y_desc("Relative frequency")
        .draw()
        .map_err(|e| err(e.to_string()))?;
    for (i, (name, points)) in series.iter().enumerate() {
        let c = colour(i);
        let xy = points.iter().map(|(d, v)| ((*d - first).num_days() as f64, *v));
        chart
            .draw_series(LineSeries::new(xy, c.stroke_width(2)))
            .map_err(|e| err(e.to_string()))?
            .label(name.as_str())
            .legend(move |(x, y)| PathElement::new([(x, y), (x + 20, y)], c.stroke_width(2)));
    }
    chart
        .configure_series_labels()
        .border_style(BLACK)
        .background_style(WHITE)
        .draw()
        .map_err(|e| err(e.to_string()))?;
    root.present().map_err(|e| err(e.to_string()))
}

/// One column per table column, stacked by row share in percent.
pub fn stacked_columns(path: &Path, table: &BreakdownTable) -> Result<(), CliError> {
    let err = plot_err(path);
    let n = table.columns.len();
    if n == 0 {
        return Err(err("nothing to draw".into()));
    }
    let root = SVGBackend::new(path, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(|e| err(e.to_string()))?;
    let mut chart = ChartBuilder::on(&root)
        .margin(20)
        .x_label_area_size(60)
        .y_label_area_size(50)
        .build_cartesian_2d(0.0..n as f64, 0.0..100.0)
        .map_err(|e| err(e.to_string()))?;
    let columns = table.columns.clone();
    let label = move |x: &f64| {
        let i = x.floor() as usize;
        columns.get(i).cloned().unwrap_or_default()
    };
    chart
        .configure_mesh()
        .disable_x_mesh()
        .x_labels(n * 2 + 1)
        .x_label_formatter(&|x| if x.fract() == 0.5 { label(x) } else { String::new() })
        .y_desc("%")
        .draw()
        .map_err(|e| err(e.to_string()))?;

    let mut base = vec![0.0; n];
    for (r, name) in table.rows.iter().enumerate() {
        let c = colour(r);
        let bars: Vec<_> = (0..n)
            .map(|j| {
                let top = base[j] + table.percentages[r][j];
                let rect = Rectangle::new([(j as f64 + 0.1, base[j]), (j as f64 + 0.9, top)], c.filled());
                base[j] = top;
                rect
            })
            .collect();
        chart
            .draw_series(bars)
            .map_err(|e| err(e.to_string()))?
            .label(name.as_str())
            .legend(move |(x, y)| Rectangle::new([(x, y - 5), (x + 10, y + 5)], c.filled()));
    }
    chart
        .configure_series_labels()
        .border_style(BLACK)
        .background_style(WHITE)
        .draw()
        .map_err(|e| err(e.to_string()))?;
    root.present().map_err(|e| err(e.to_string()))
}
