//! Minimal rasterizer: heatmaps and line plots written as PNG.

use std::path::Path;

use image::{Rgb, RgbImage};

const MARGIN: u32 = 24;
const BACKGROUND: Rgb<u8> = Rgb([255, 255, 255]);
const FRAME: Rgb<u8> = Rgb([60, 60, 60]);
const GRID: Rgb<u8> = Rgb([225, 225, 225]);

/// Line colours for successive series.
pub const PALETTE: [Rgb<u8>; 4] = [
    Rgb([31, 119, 180]),
    Rgb([214, 39, 40]),
    Rgb([44, 160, 44]),
    Rgb([148, 103, 189]),
];

/// Blue-white-red diverging map for `v` in `[0, 1]`.
fn colormap(v: f64) -> Rgb<u8> {
    let v = if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.5 };
    let lerp = |a: f64, b: f64, s: f64| (a + (b - a) * s).round() as u8;
    if v < 0.5 {
        let s = v / 0.5;
        Rgb([lerp(33.0, 247.0, s), lerp(102.0, 247.0, s), lerp(172.0, 247.0, s)])
    } else {
        let s = (v - 0.5) / 0.5;
        Rgb([lerp(247.0, 178.0, s), lerp(247.0, 24.0, s), lerp(247.0, 43.0, s)])
    }
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-300 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn frame(img: &mut RgbImage) {
    let (w, h) = img.dimensions();
    for x in MARGIN - 1..=w - MARGIN {
        img.put_pixel(x, MARGIN - 1, FRAME);
        img.put_pixel(x, h - MARGIN, FRAME);
    }
    for y in MARGIN - 1..=h - MARGIN {
        img.put_pixel(MARGIN - 1, y, FRAME);
        img.put_pixel(w - MARGIN, y, FRAME);
    }
}

/// Heatmap of `values` given row-major on an `nx` by `ny` grid (x varies
/// slowest, matching grid point order). Each cell becomes a `cell` pixel
/// square; `y` grows upwards.
pub fn heatmap(values: &[f64], nx: usize, ny: usize, cell: u32, symmetric: bool) -> RgbImage {
    assert_eq!(values.len(), nx * ny, "heatmap needs nx * ny values");
    let (mut lo, mut hi) = range(values.iter().copied());
    if symmetric {
        let m = lo.abs().max(hi.abs());
        (lo, hi) = (-m, m);
    }
    let w = nx as u32 * cell + 2 * MARGIN;
    let h = ny as u32 * cell + 2 * MARGIN;
    let mut img = RgbImage::from_pixel(w, h, BACKGROUND);
    for i in 0..nx {
        for j in 0..ny {
            let c = colormap((values[i * ny + j] - lo) / (hi - lo));
            let x0 = MARGIN + i as u32 * cell;
            let y0 = h - MARGIN - (j as u32 + 1) * cell;
            for dx in 0..cell {
                for dy in 0..cell {
                    img.put_pixel(x0 + dx, y0 + dy, c);
                }
            }
        }
    }
    frame(&mut img);
    img
}

fn line(img: &mut RgbImage, (x0, y0): (i64, i64), (x1, y1): (i64, i64), color: Rgb<u8>) {
    let (w, h) = (img.width() as i64, img.height() as i64);
    let (dx, dy) = ((x1 - x0).abs(), -(y1 - y0).abs());
    let (sx, sy) = (if x0 < x1 { 1 } else { -1 }, if y0 < y1 { 1 } else { -1 });
    let (mut x, mut y, mut err) = (x0, y0, dx + dy);
    loop {
        if (0..w).contains(&x) && (0..h).contains(&y) {
            img.put_pixel(x as u32, y as u32, color);
        }
        if x == x1 && y == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

/// Polylines of `(x, y)` series on shared axes. A horizontal grid line
/// marks `y = 0` when it is in range.
pub fn line_plot(series: &[&[(f64, f64)]], width: u32, height: u32) -> RgbImage {
    let mut img = RgbImage::from_pixel(width, height, BACKGROUND);
    let all = || series.iter().flat_map(|s| s.iter());
    let (x_lo, x_hi) = range(all().map(|p| p.0));
    let (y_lo, y_hi) = range(all().map(|p| p.1));
    let pw = (width - 2 * MARGIN) as f64;
    let ph = (height - 2 * MARGIN) as f64;
    let to_px = |(x, y): (f64, f64)| {
        let px = MARGIN as f64 + (x - x_lo) / (x_hi - x_lo) * pw;
        let py = (height - MARGIN) as f64 - (y - y_lo) / (y_hi - y_lo) * ph;
        (px.round() as i64, py.round() as i64)
    };
    if y_lo < 0.0 && y_hi > 0.0 {
        let (_, y0) = to_px((x_lo, 0.0));
        line(&mut img, (MARGIN as i64, y0), ((width - MARGIN) as i64, y0), GRID);
    }
    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        for pair in s.windows(2) {
            if pair.iter().all(|p| p.0.is_finite() && p.1.is_finite()) {
                line(&mut img, to_px(pair[0]), to_px(pair[1]), color);
            }
        }
    }
    frame(&mut img);
    img
}

pub fn save(img: &RgbImage, path: &Path) -> image::ImageResult<()> {
    img.save_with_format(path, image::ImageFormat::Png)
}

/// Matplotlib script that redraws the run's figures from its CSV files.
pub const SCRIPT: &str = r#"import sys, csv
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

def read(path):
    with open(path) as f:
        rows = list(csv.reader(f))
    return rows[0], [[float(v) for v in r] for r in rows[1:]]

header, rows = read("results.csv")
coords = len(header) - 3
if coords == 1:
    t = [r[0] for r in rows]
    plt.plot(t, [r[1] for r in rows], label="prediction")
    plt.plot(t, [r[2] for r in rows], "--", label="exact")
    plt.xlabel(header[0]); plt.legend()
    plt.savefig("prediction.png", dpi=150)
else:
    tcol = coords - 1
    times = sorted({r[tcol] for r in rows}) if coords == 3 else [None]
    pick = times[len(times) // 2]
    sel = [r for r in rows if pick is None or r[tcol] == pick]
    for col, name in [(coords, "predicted"), (coords + 1, "exact"), (coords + 2, "abs_error")]:
        plt.figure()
        plt.tricontourf([r[0] for r in sel], [r[1] for r in sel], [r[col] for r in sel], 50)
        plt.colorbar(); plt.xlabel("x"); plt.ylabel("y"); plt.title(name)
        plt.savefig(name + ".png", dpi=150)
try:
    header, rows = read("inversion_history.csv")
    plt.figure()
    for k, name in enumerate(header[1:]):
        plt.plot([r[0] for r in rows], [r[k + 1] for r in rows], label=name)
    plt.xlabel("epoch"); plt.legend()
    plt.savefig("inversion_history.png", dpi=150)
except FileNotFoundError:
    pass
"#;
