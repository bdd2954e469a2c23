//! Reconstruction grids (PGM) and result figures (hand-written SVG).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::run::{Cluster, ResultRow};
use super::ExperimentError;
use crate::dataio::Dataset;
use crate::network::Autoencoder;
use crate::spectra::{Source, FLOOR};

const SIDE: usize = 28;

/// 8-bit grayscale raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl GrayImage {
    pub fn pixel(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }
}

fn to_byte(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Binary PGM (P5), maxval 255.
pub fn write_pgm(img: &GrayImage, path: &Path) -> Result<(), ExperimentError> {
    let mut bytes = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    bytes.extend_from_slice(&img.data);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| ExperimentError::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| ExperimentError::io(path, e))
}

/// One row per dataset: `k` (input, reconstruction) tile pairs from the
/// first `k` points. Pixels are clamped to [0, 1] for display only.
pub fn render_recon_grid(
    model: &Autoencoder,
    datasets: &[&Dataset],
    k: usize,
    path: &Path,
) -> Result<GrayImage, ExperimentError> {
    if model.input_dim() != SIDE * SIDE {
        return Err(ExperimentError::Config(format!(
            "reconstruction grid needs 784-pixel inputs, model has {}",
            model.input_dim()
        )));
    }
    let width = 2 * k * SIDE;
    let height = datasets.len() * SIDE;
    let mut data = vec![0u8; width * height];
    for (r, ds) in datasets.iter().enumerate() {
        for j in 0..k.min(ds.len()) {
            let x = ds.sample(j);
            let y = model.forward(x)?.reconstruction;
            for (tile, img) in [(2 * j, x), (2 * j + 1, &y[..])] {
                for py in 0..SIDE {
                    let row = (r * SIDE + py) * width + tile * SIDE;
                    for px in 0..SIDE {
                        data[row + px] = to_byte(img[py * SIDE + px]);
                    }
                }
            }
        }
    }
    let img = GrayImage { width, height, data };
    write_pgm(&img, path)?;
    Ok(img)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FigureFamily {
    EigDiff,
    Means,
    LogModulusBoxes,
    LogModulusStdev,
    FlipFraction,
    ArgumentBoxes,
}

impl FigureFamily {
    pub const ALL: [FigureFamily; 6] = [
        FigureFamily::EigDiff,
        FigureFamily::Means,
        FigureFamily::LogModulusBoxes,
        FigureFamily::LogModulusStdev,
        FigureFamily::FlipFraction,
        FigureFamily::ArgumentBoxes,
    ];

    pub fn slug(self) -> &'static str {
        match self {
            FigureFamily::EigDiff => "eig_diff",
            FigureFamily::Means => "means",
            FigureFamily::LogModulusBoxes => "log_modulus_box",
            FigureFamily::LogModulusStdev => "log_modulus_stdev",
            FigureFamily::FlipFraction => "flip_fraction",
            FigureFamily::ArgumentBoxes => "argument_box",
        }
    }

    fn title(self) -> &'static str {
        match self {
            FigureFamily::EigDiff => "Mean squared eigenvalue difference J_I vs J_L per latent dim",
            FigureFamily::Means => "Arithmetic (solid) and geometric (dashed) mean |eigenvalue|",
            FigureFamily::LogModulusBoxes => "log |eigenvalue|",
            FigureFamily::LogModulusStdev => "Standard deviation of log |eigenvalue|",
            FigureFamily::FlipFraction => "Fraction of points with negative determinant",
            FigureFamily::ArgumentBoxes => "|Arg eigenvalue|",
        }
    }

    fn is_box(self) -> bool {
        matches!(self, FigureFamily::LogModulusBoxes | FigureFamily::ArgumentBoxes)
    }
}

/// Seed-averaged values of one (dataset, d) cell.
#[derive(Debug, Clone, Default)]
struct Cell {
    values: Vec<[f64; 7]>,
}

impl Cell {
    fn mean(&self, k: usize) -> f64 {
        let v: Vec<f64> = self.values.iter().map(|r| r[k]).filter(|x| x.is_finite()).collect();
        if v.is_empty() {
            f64::NAN
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    }
}

struct Series {
    dataset: String,
    cluster: Cluster,
    cells: BTreeMap<usize, Cell>,
}

fn fields(row: &ResultRow, family: FigureFamily) -> [f64; 7] {
    let n = f64::NAN;
    match family {
        FigureFamily::EigDiff => [row.eig_diff_ratio_mean, n, n, n, n, n, n],
        FigureFamily::Means => [row.arith_mean_modulus, row.geo_mean_modulus, n, n, n, n, n],
        FigureFamily::LogModulusStdev => [row.log_modulus_stdev, n, n, n, n, n, n],
        FigureFamily::FlipFraction => [row.orientation_flip_fraction, n, n, n, n, n, n],
        FigureFamily::LogModulusBoxes => [
            row.log_modulus_whisker_lo,
            row.log_modulus_q1,
            row.log_modulus_median,
            row.log_modulus_q3,
            row.log_modulus_whisker_hi,
            n,
            n,
        ],
        FigureFamily::ArgumentBoxes => [
            row.abs_argument_whisker_lo,
            row.abs_argument_q1,
            row.abs_argument_median,
            row.abs_argument_q3,
            row.abs_argument_whisker_hi,
            n,
            n,
        ],
    }
}

/// Shades per cluster: blues for dark, greens for mid, oranges for bright.
fn color(cluster: Cluster, i: usize) -> &'static str {
    const TRAIN: [&str; 1] = ["#000000"];
    const DARK: [&str; 4] = ["#08306b", "#2171b5", "#6baed6", "#4292c6"];
    const MID: [&str; 4] = ["#00441b", "#238b45", "#74c476", "#41ab5d"];
    const BRIGHT: [&str; 4] = ["#7f2704", "#d94801", "#fd8d3c", "#f16913"];
    let palette: &[&str] = match cluster {
        Cluster::Train => &TRAIN,
        Cluster::Dark => &DARK,
        Cluster::Mid => &MID,
        Cluster::Bright => &BRIGHT,
    };
    palette[i % palette.len()]
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Roughly five round tick values covering [lo, hi].
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = (hi - lo).max(1e-300);
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| span / s <= 6.0)
        .unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + step * 1e-9 {
        out.push(if t.abs() < step * 1e-9 { 0.0 } else { t });
        t += step;
    }
    out
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

struct Frame {
    left: f64,
    top: f64,
    width: f64,
    height: f64,
    y_lo: f64,
    y_hi: f64,
    n_x: usize,
    log_y: bool,
}

impl Frame {
    fn x(&self, slot: f64) -> f64 {
        self.left + (slot + 0.5) / self.n_x as f64 * self.width
    }

    fn y(&self, v: f64) -> f64 {
        let v = if self.log_y { v.max(FLOOR).log10() } else { v };
        let t = if self.y_hi > self.y_lo {
            (v - self.y_lo) / (self.y_hi - self.y_lo)
        } else {
            0.5
        };
        self.top + (1.0 - t) * self.height
    }
}

fn render_one(series: &[Series], dims: &[usize], family: FigureFamily, source: Source) -> String {
    let log_y = family == FigureFamily::EigDiff;
    let components: &[usize] = match family {
        FigureFamily::Means => &[0, 1],
        f if f.is_box() => &[0, 1, 2, 3, 4],
        _ => &[0],
    };
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for s in series {
        for cell in s.cells.values() {
            for &k in components {
                let v = cell.mean(k);
                if v.is_finite() {
                    let v = if log_y { v.max(FLOOR).log10() } else { v };
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
        }
    }
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    if family == FigureFamily::FlipFraction {
        (lo, hi) = (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        (lo, hi) = (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    let (lo, hi) = (lo - pad, hi + pad);

    let legend_w = 190.0;
    let (w, h) = (820.0, 480.0);
    let f = Frame {
        left: 70.0,
        top: 40.0,
        width: w - 70.0 - legend_w - 20.0,
        height: h - 40.0 - 60.0,
        y_lo: lo,
        y_hi: hi,
        n_x: dims.len(),
        log_y,
    };

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="13">{} ({})</text>"#,
        f.left + f.width / 2.0,
        escape(family.title()),
        source.label()
    );

    // Axes and ticks.
    let _ = writeln!(svg, r#"<g class="axes" stroke="black" fill="none">"#);
    let _ = writeln!(
        svg,
        r#"<rect x="{}" y="{}" width="{}" height="{}"/>"#,
        f.left, f.top, f.width, f.height
    );
    let _ = writeln!(svg, "</g>");
    let _ = writeln!(svg, r#"<g class="ticks">"#);
    for t in ticks(lo, hi) {
        let y = f.top + (1.0 - (t - lo) / (hi - lo)) * f.height;
        let label = if log_y {
            format!("1e{}", fmt_tick(t))
        } else {
            fmt_tick(t)
        };
        let _ = writeln!(
            svg,
            r##"<line x1="{}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#dddddd"/><text x="{}" y="{:.2}" text-anchor="end">{label}</text>"##,
            f.left,
            f.left + f.width,
            f.left - 6.0,
            y + 4.0
        );
    }
    for (i, d) in dims.iter().enumerate() {
        let x = f.x(i as f64);
        let _ = writeln!(
            svg,
            r#"<text x="{x:.2}" y="{}" text-anchor="middle">{d}</text>"#,
            f.top + f.height + 16.0
        );
    }
    let _ = writeln!(svg, "</g>");
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">latent dimension d</text>"#,
        f.left + f.width / 2.0,
        h - 18.0
    );

    let slot = |d: usize| dims.iter().position(|&e| e == d).unwrap() as f64;
    let n = series.len().max(1) as f64;
    for (si, s) in series.iter().enumerate() {
        let c = color(s.cluster, si);
        let _ = writeln!(
            svg,
            r#"<g class="series" data-dataset="{}" data-cluster="{:?}" stroke="{c}" fill="{c}">"#,
            escape(&s.dataset),
            s.cluster
        );
        if family.is_box() {
            let bw = 0.8 / n / dims.len() as f64 * f.width;
            for (&d, cell) in &s.cells {
                let [wl, q1, med, q3, wh] = [0, 1, 2, 3, 4].map(|k| cell.mean(k));
                if ![wl, q1, med, q3, wh].iter().all(|v| v.is_finite()) {
                    continue;
                }
                let cx = f.x(slot(d) - 0.4 + (si as f64 + 0.5) * 0.8 / n);
                let _ = writeln!(
                    svg,
                    r#"<line x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}"/><rect x="{:.2}" y="{:.2}" width="{bw:.2}" height="{:.2}" fill-opacity="0.35"/><line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke-width="2"/>"#,
                    f.y(wl),
                    f.y(wh),
                    cx - bw / 2.0,
                    f.y(q3),
                    (f.y(q1) - f.y(q3)).max(0.5),
                    cx - bw / 2.0,
                    f.y(med),
                    cx + bw / 2.0,
                    f.y(med)
                );
            }
        } else {
            let lines: &[(usize, &str)] = if family == FigureFamily::Means {
                &[(0, ""), (1, r#" stroke-dasharray="4 3""#)]
            } else {
                &[(0, "")]
            };
            for &(k, dash) in lines {
                let pts: Vec<(f64, f64)> = s
                    .cells
                    .iter()
                    .map(|(&d, cell)| (slot(d), cell.mean(k)))
                    .filter(|(_, v)| v.is_finite())
                    .map(|(x, v)| (f.x(x), f.y(v)))
                    .collect();
                if pts.len() > 1 {
                    let path: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
                    let _ = writeln!(svg, r#"<polyline fill="none" points="{}"{dash}/>"#, path.join(" "));
                }
                for (x, y) in pts {
                    let _ = writeln!(svg, r#"<circle class="point" cx="{x:.2}" cy="{y:.2}" r="3"/>"#);
                }
            }
        }
        let ly = f.top + 14.0 * si as f64;
        let lx = f.left + f.width + 20.0;
        let _ = writeln!(
            svg,
            r#"<rect x="{lx}" y="{:.2}" width="10" height="10"/><text x="{}" y="{:.2}" stroke="none" fill="black">{}</text>"#,
            ly,
            lx + 16.0,
            ly + 9.0,
            escape(&s.dataset)
        );
        let _ = writeln!(svg, "</g>");
    }
    let _ = writeln!(svg, "</svg>");
    svg
}

/// Writes one SVG per figure family and source into `dir`. Rows sharing
/// (dataset, d) across seeds are averaged. Returns the written paths.
pub fn render_figures(rows: &[ResultRow], dir: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
    if rows.is_empty() {
        return Err(ExperimentError::Config("no result rows to plot".into()));
    }
    fs::create_dir_all(dir).map_err(|e| ExperimentError::io(dir, e))?;
    let mut paths = Vec::new();
    for source in Source::ALL {
        let rows: Vec<&ResultRow> = rows.iter().filter(|r| r.source == source).collect();
        if rows.is_empty() {
            continue;
        }
        let mut dims: Vec<usize> = rows.iter().map(|r| r.d).collect();
        dims.sort_unstable();
        dims.dedup();
        for family in FigureFamily::ALL {
            let mut series: Vec<Series> = Vec::new();
            for r in &rows {
                let idx = match series.iter().position(|s| s.dataset == r.dataset) {
                    Some(i) => i,
                    None => {
                        series.push(Series {
                            dataset: r.dataset.clone(),
                            cluster: r.cluster,
                            cells: BTreeMap::new(),
                        });
                        series.len() - 1
                    }
                };
                series[idx].cells.entry(r.d).or_default().values.push(fields(r, family));
            }
            let svg = render_one(&series, &dims, family, source);
            let path = dir.join(format!("{}_{}.svg", family.slug(), source.label()));
            fs::write(&path, svg).map_err(|e| ExperimentError::io(&path, e))?;
            paths.push(path);
        }
    }
    Ok(paths)
}
