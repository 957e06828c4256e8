//! Loss histograms as SVG, with a CSV companion holding the plotted numbers.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::io::{fmt_f64, write_atomic};
use crate::lossmodel::{gaussian_pdf, read_loss_dump, GmmParams, LossRecord};

pub const BINS: usize = 100;
/// Overlay curves are sampled at this many evenly spaced points, plus the
/// two component means.
const CURVE_POINTS: usize = 400;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 40.0;

#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn new(values: &[f64], bins: usize) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let mut hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(Error::Format("non-finite loss value".into()));
        }
        if lo == hi {
            lo -= 0.5;
            hi += 0.5;
        }
        let mut counts = vec![0; bins];
        for &v in values {
            let b = (((v - lo) / (hi - lo)) * bins as f64) as usize;
            counts[b.min(bins - 1)] += 1;
        }
        Ok(Self { lo, hi, counts })
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.counts.len() as f64
    }

    pub fn edges(&self, b: usize) -> (f64, f64) {
        let w = self.width();
        (self.lo + b as f64 * w, self.lo + (b + 1) as f64 * w)
    }
}

/// Points `(x, pi0 * N(x; mu0, s0), pi1 * N(x; mu1, s1))` over the range,
/// with both means included exactly.
pub fn overlay_points(gmm: &GmmParams, lo: f64, hi: f64) -> Vec<(f64, f64, f64)> {
    let mut xs: Vec<f64> = (0..CURVE_POINTS)
        .map(|i| lo + (hi - lo) * i as f64 / (CURVE_POINTS - 1) as f64)
        .collect();
    xs.push(gmm.mu0);
    xs.push(gmm.mu1);
    xs.sort_by(f64::total_cmp);
    xs.iter()
        .map(|&x| {
            (
                x,
                gmm.pi0 * gaussian_pdf(x, gmm.mu0, gmm.sigma0),
                gmm.pi1 * gaussian_pdf(x, gmm.mu1, gmm.sigma1),
            )
        })
        .collect()
}

/// Values plotted for a record: log losses, or the mixture's fit space when
/// one is given.
fn plotted_values(records: &[LossRecord], gmm: Option<&GmmParams>) -> Vec<f64> {
    records
        .iter()
        .map(|r| match gmm {
            Some(g) => g.to_fit_space(r.raw_loss),
            None => r.log_loss,
        })
        .collect()
}

pub fn render_csv(hist: &Histogram, overlay: &[(f64, f64, f64)]) -> String {
    let mut s = String::from("series,x_left,x_right,value\n");
    for (b, &c) in hist.counts.iter().enumerate() {
        let (l, r) = hist.edges(b);
        let _ = writeln!(s, "hist,{},{},{c}", fmt_f64(l), fmt_f64(r));
    }
    for &(x, d0, d1) in overlay {
        let x = fmt_f64(x);
        let _ = writeln!(s, "comp0,{x},{x},{}", fmt_f64(d0));
        let _ = writeln!(s, "comp1,{x},{x},{}", fmt_f64(d1));
    }
    s
}

pub fn render_svg(hist: &Histogram, overlay: &[(f64, f64, f64)], n: usize) -> String {
    // bars are drawn as densities so the overlay shares their scale
    let norm = n as f64 * hist.width();
    let bar_max = hist.counts.iter().copied().max().unwrap_or(0) as f64 / norm;
    let curve_max = overlay.iter().map(|p| p.1.max(p.2)).fold(0.0, f64::max);
    let ymax = bar_max.max(curve_max).max(f64::MIN_POSITIVE);
    let (pw, ph) = (WIDTH - 2.0 * MARGIN, HEIGHT - 2.0 * MARGIN);
    let sx = |x: f64| MARGIN + (x - hist.lo) / (hist.hi - hist.lo) * pw;
    let sy = |y: f64| HEIGHT - MARGIN - y / ymax * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    for (b, &c) in hist.counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let (l, r) = hist.edges(b);
        let top = sy(c as f64 / norm);
        let _ = writeln!(
            s,
            r##"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="#9ab"/>"##,
            sx(l),
            top,
            sx(r) - sx(l),
            HEIGHT - MARGIN - top
        );
    }
    for (k, color) in [(0, "#1a7f37"), (1, "#c0392b")] {
        if overlay.is_empty() {
            break;
        }
        let d: Vec<String> = overlay
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let y = if k == 0 { p.1 } else { p.2 };
                format!("{}{:.3},{:.3}", if i == 0 { "M" } else { "L" }, sx(p.0), sy(y))
            })
            .collect();
        let _ = writeln!(
            s,
            r#"<path d="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            d.join(" ")
        );
    }
    let _ = writeln!(
        s,
        r#"<line x1="{MARGIN}" y1="{0}" x2="{1}" y2="{0}" stroke="black"/>"#,
        HEIGHT - MARGIN,
        WIDTH - MARGIN
    );
    let _ = writeln!(
        s,
        r#"<text x="{MARGIN}" y="{}" font-size="12">{:.3}</text>"#,
        HEIGHT - MARGIN / 3.0,
        hist.lo
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="end">{:.3}</text>"#,
        WIDTH - MARGIN,
        HEIGHT - MARGIN / 3.0,
        hist.hi
    );
    s.push_str("</svg>\n");
    s
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlotOutput {
    pub svg: PathBuf,
    pub csv: PathBuf,
    pub histogram: Histogram,
}

/// Writes `out` (SVG) and `out` with a `.csv` extension.
pub fn plot_losses(dump: &Path, gmm: Option<&Path>, out: &Path) -> Result<PlotOutput> {
    let records = read_loss_dump(dump)?;
    let gmm = gmm.map(GmmParams::read).transpose()?;
    let values = plotted_values(&records, gmm.as_ref());
    let histogram = Histogram::new(&values, BINS)?;
    let overlay = gmm
        .as_ref()
        .map(|g| overlay_points(g, histogram.lo, histogram.hi))
        .unwrap_or_default();
    let csv = out.with_extension("csv");
    write_atomic(out, render_svg(&histogram, &overlay, values.len()).as_bytes())?;
    write_atomic(&csv, render_csv(&histogram, &overlay).as_bytes())?;
    Ok(PlotOutput {
        svg: out.to_path_buf(),
        csv,
        histogram,
    })
}
