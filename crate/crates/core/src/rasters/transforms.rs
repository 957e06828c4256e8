//! Pure raster transforms. None of these draw randomness; the caller passes
//! every realized parameter.

use super::Raster;
use crate::error::{Error, Result};

/// Fill intensity for cutout squares and translated-in borders.
pub const CUTOUT_FILL: u8 = 128;

/// Rotates clockwise by `k` quarter turns. Odd `k` swaps height and width.
pub fn rotate_quarter(img: &Raster, k: u8) -> Raster {
    let (h, w, ch) = (img.height(), img.width(), img.channels());
    let k = k % 4;
    let (oh, ow) = if k % 2 == 1 { (w, h) } else { (h, w) };
    let mut out = Raster::filled(oh, ow, ch, 0);
    for r in 0..oh {
        for c in 0..ow {
            let (sr, sc) = match k {
                0 => (r, c),
                1 => (h - 1 - c, r),
                2 => (h - 1 - r, w - 1 - c),
                _ => (c, w - 1 - r),
            };
            for k in 0..ch {
                out.set(r, c, k, img.get(sr, sc, k));
            }
        }
    }
    out
}

pub fn check_permutation(perm: &[usize]) -> Result<()> {
    let mut seen = vec![false; perm.len()];
    for &p in perm {
        if p >= perm.len() || seen[p] {
            return Err(Error::InvalidPermutation(perm.len()));
        }
        seen[p] = true;
    }
    Ok(())
}

/// Splits the image into a `grid_k` x `grid_k` grid of patches and writes
/// input patch `perm[i]` into output cell `i` (cells numbered row-major).
pub fn jigsaw_shuffle(img: &Raster, grid_k: usize, perm: &[usize]) -> Result<Raster> {
    if grid_k == 0 || !img.height().is_multiple_of(grid_k) {
        return Err(Error::NotDivisible {
            axis: "height",
            size: img.height(),
            grid: grid_k,
        });
    }
    if !img.width().is_multiple_of(grid_k) {
        return Err(Error::NotDivisible {
            axis: "width",
            size: img.width(),
            grid: grid_k,
        });
    }
    if perm.len() != grid_k * grid_k {
        return Err(Error::InvalidPermutation(grid_k * grid_k));
    }
    check_permutation(perm)?;

    let (ph, pw, ch) = (img.height() / grid_k, img.width() / grid_k, img.channels());
    let mut out = img.clone();
    for (cell, &src) in perm.iter().enumerate() {
        let (dr, dc) = (cell / grid_k * ph, cell % grid_k * pw);
        let (sr, sc) = (src / grid_k * ph, src % grid_k * pw);
        for r in 0..ph {
            let d = out.index(dr + r, dc, 0);
            let s = img.index(sr + r, sc, 0);
            out.pixels_mut()[d..d + pw * ch].copy_from_slice(&img.pixels()[s..s + pw * ch]);
        }
    }
    Ok(out)
}

/// Sets the `size` x `size` square centered at `(row, col)` to `fill`,
/// clipped to the image.
pub fn cutout(img: &Raster, size: usize, center: (usize, usize), fill: u8) -> Raster {
    let mut out = img.clone();
    if size == 0 {
        return out;
    }
    let half = (size / 2) as isize;
    let r0 = center.0 as isize - half;
    let c0 = center.1 as isize - half;
    let rows = r0.max(0)..(r0 + size as isize).min(img.height() as isize);
    let cols = c0.max(0)..(c0 + size as isize).min(img.width() as isize);
    for r in rows {
        for c in cols.clone() {
            for k in 0..img.channels() {
                out.set(r as usize, c as usize, k, fill);
            }
        }
    }
    out
}

pub fn hflip(img: &Raster) -> Raster {
    let mut out = img.clone();
    let w = img.width();
    for r in 0..img.height() {
        for c in 0..w {
            for k in 0..img.channels() {
                out.set(r, c, k, img.get(r, w - 1 - c, k));
            }
        }
    }
    out
}

/// Output pixel `(r, c)` takes input pixel `(r - dy, c - dx)`; positions that
/// fall outside the input receive `fill`.
pub fn shift(img: &Raster, dy: i32, dx: i32, fill: u8) -> Raster {
    let (h, w) = (img.height() as i64, img.width() as i64);
    let mut out = Raster::filled(img.height(), img.width(), img.channels(), fill);
    for r in 0..h {
        let sr = r - i64::from(dy);
        if sr < 0 || sr >= h {
            continue;
        }
        for c in 0..w {
            let sc = c - i64::from(dx);
            if sc < 0 || sc >= w {
                continue;
            }
            for k in 0..img.channels() {
                out.set(
                    r as usize,
                    c as usize,
                    k,
                    img.get(sr as usize, sc as usize, k),
                );
            }
        }
    }
    out
}

fn map_pixels(img: &Raster, f: impl Fn(u8) -> u8) -> Raster {
    let mut out = img.clone();
    out.pixels_mut().iter_mut().for_each(|p| *p = f(*p));
    out
}

#[inline]
fn clamp_round(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

pub fn invert(img: &Raster) -> Raster {
    map_pixels(img, |p| 255 - p)
}

/// Inverts every intensity at or above `threshold`; 256 leaves the image as is.
pub fn solarize(img: &Raster, threshold: u16) -> Raster {
    map_pixels(img, |p| if u16::from(p) >= threshold { 255 - p } else { p })
}

/// Keeps the top `bits` bits of each intensity.
pub fn posterize(img: &Raster, bits: u8) -> Raster {
    let bits = bits.clamp(1, 8);
    let mask = !((1u16 << (8 - bits)) - 1) as u8;
    map_pixels(img, |p| p & mask)
}

/// Per-channel linear stretch of [min, max] onto [0, 255].
pub fn autocontrast(img: &Raster) -> Raster {
    let mut out = img.clone();
    let ch = img.channels();
    for k in 0..ch {
        let vals = img.pixels().iter().skip(k).step_by(ch);
        let (lo, hi) = vals.fold((255u8, 0u8), |(lo, hi), &p| (lo.min(p), hi.max(p)));
        if hi <= lo {
            continue;
        }
        let scale = 255.0 / f64::from(hi - lo);
        for p in out.pixels_mut().iter_mut().skip(k).step_by(ch) {
            *p = clamp_round(f64::from(*p - lo) * scale);
        }
    }
    out
}

/// Per-channel histogram equalization with the cumulative-count lookup used
/// by common imaging libraries.
pub fn equalize(img: &Raster) -> Raster {
    let mut out = img.clone();
    let ch = img.channels();
    for k in 0..ch {
        let mut hist = [0usize; 256];
        for &p in img.pixels().iter().skip(k).step_by(ch) {
            hist[p as usize] += 1;
        }
        let total: usize = hist.iter().sum();
        let last = hist.iter().rev().find(|&&n| n > 0).copied().unwrap_or(0);
        let step = (total - last) / 255;
        if step == 0 {
            continue;
        }
        let mut lut = [0u8; 256];
        let mut n = step / 2;
        for (i, &count) in hist.iter().enumerate() {
            lut[i] = (n / step).min(255) as u8;
            n += count;
        }
        for p in out.pixels_mut().iter_mut().skip(k).step_by(ch) {
            *p = lut[*p as usize];
        }
    }
    out
}

/// Scales intensities toward black (factor < 1) or brighter (factor > 1).
pub fn adjust_brightness(img: &Raster, factor: f64) -> Raster {
    map_pixels(img, |p| clamp_round(f64::from(p) * factor))
}

/// Blends with the mean intensity of the image.
pub fn adjust_contrast(img: &Raster, factor: f64) -> Raster {
    let n = img.pixels().len().max(1) as f64;
    let mean = img.pixels().iter().map(|&p| f64::from(p)).sum::<f64>() / n;
    let mean = mean.round();
    map_pixels(img, |p| clamp_round(mean + factor * (f64::from(p) - mean)))
}

/// Blends with a 3x3 smoothed copy (center weight 5, neighbors 1). Border
/// pixels are left unchanged.
pub fn sharpness(img: &Raster, factor: f64) -> Raster {
    let (h, w, ch) = (img.height(), img.width(), img.channels());
    let mut out = img.clone();
    if h < 3 || w < 3 {
        return out;
    }
    for r in 1..h - 1 {
        for c in 1..w - 1 {
            for k in 0..ch {
                let mut acc = 0u32;
                for dr in 0..3 {
                    for dc in 0..3 {
                        let wgt = if dr == 1 && dc == 1 { 5 } else { 1 };
                        acc += wgt * u32::from(img.get(r + dr - 1, c + dc - 1, k));
                    }
                }
                let smooth = (f64::from(acc) / 13.0).round();
                let orig = f64::from(img.get(r, c, k));
                out.set(r, c, k, clamp_round(smooth + factor * (orig - smooth)));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(h: usize, w: usize) -> Raster {
        Raster::new(h, w, 1, (0..h * w).map(|i| (i * 7 % 256) as u8).collect()).unwrap()
    }

    fn sorted(img: &Raster) -> Vec<u8> {
        let mut v = img.pixels().to_vec();
        v.sort_unstable();
        v
    }

    #[test]
    fn rotate_two_by_two_clockwise() {
        // [[a,b],[c,d]] -> [[c,a],[d,b]]
        let img = Raster::new(2, 2, 1, vec![1, 2, 3, 4]).unwrap();
        assert_eq!(rotate_quarter(&img, 1).pixels(), &[3, 1, 4, 2]);
    }

    #[test]
    fn rotate_rectangular_swaps_dims() {
        let img = ramp(3, 5);
        let r = rotate_quarter(&img, 1);
        assert_eq!((r.height(), r.width()), (5, 3));
        assert_eq!(rotate_quarter(&r, 3), img);
        assert_eq!(rotate_quarter(&rotate_quarter(&img, 2), 2), img);
    }

    #[test]
    fn jigsaw_identity_and_inverse() {
        let img = ramp(16, 16);
        let id: Vec<usize> = (0..4).collect();
        assert_eq!(jigsaw_shuffle(&img, 2, &id).unwrap(), img);
        let perm = vec![2, 0, 3, 1];
        let mut inv = vec![0; 4];
        for (i, &p) in perm.iter().enumerate() {
            inv[p] = i;
        }
        let shuffled = jigsaw_shuffle(&img, 2, &perm).unwrap();
        assert_ne!(shuffled, img);
        assert_eq!(sorted(&shuffled), sorted(&img));
        assert_eq!(jigsaw_shuffle(&shuffled, 2, &inv).unwrap(), img);
    }

    #[test]
    fn jigsaw_reports_axis() {
        let img = ramp(16, 15);
        match jigsaw_shuffle(&img, 2, &[0, 1, 2, 3]) {
            Err(Error::NotDivisible { axis, .. }) => assert_eq!(axis, "width"),
            other => panic!("unexpected {other:?}"),
        }
        let img = ramp(9, 16);
        match jigsaw_shuffle(&img, 2, &[0, 1, 2, 3]) {
            Err(Error::NotDivisible { axis, .. }) => assert_eq!(axis, "height"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(jigsaw_shuffle(&ramp(4, 4), 2, &[0, 0, 1, 2]).is_err());
    }

    #[test]
    fn cutout_counts() {
        let img = Raster::filled(16, 16, 1, 3);
        assert_eq!(cutout(&img, 0, (8, 8), CUTOUT_FILL), img);
        let out = cutout(&img, 8, (8, 8), CUTOUT_FILL);
        let differing = img
            .pixels()
            .iter()
            .zip(out.pixels())
            .filter(|(a, b)| a != b)
            .count();
        assert_eq!(differing, 64);
        let full = cutout(&img, 32, (8, 8), CUTOUT_FILL);
        assert!(full.pixels().iter().all(|&p| p == CUTOUT_FILL));
        // clipped at the corner: rows 0..3, cols 0..3
        let corner = cutout(&img, 6, (0, 0), 200);
        assert_eq!(corner.pixels().iter().filter(|&&p| p == 200).count(), 9);
    }

    #[test]
    fn shift_and_flip() {
        let img = Raster::new(1, 4, 1, vec![1, 2, 3, 4]).unwrap();
        assert_eq!(hflip(&img).pixels(), &[4, 3, 2, 1]);
        assert_eq!(shift(&img, 0, 1, 0).pixels(), &[0, 1, 2, 3]);
        assert_eq!(shift(&img, 0, -2, 9).pixels(), &[3, 4, 9, 9]);
    }

    #[test]
    fn pointwise_ops() {
        let img = Raster::new(1, 4, 1, vec![0, 100, 200, 255]).unwrap();
        assert_eq!(invert(&img).pixels(), &[255, 155, 55, 0]);
        assert_eq!(solarize(&img, 256), img);
        assert_eq!(solarize(&img, 0), invert(&img));
        assert_eq!(solarize(&img, 150).pixels(), &[0, 100, 55, 0]);
        assert_eq!(posterize(&img, 8), img);
        assert_eq!(posterize(&img, 1).pixels(), &[0, 0, 128, 128]);
        assert_eq!(adjust_brightness(&img, 1.0), img);
        assert_eq!(adjust_contrast(&img, 1.0), img);
        assert_eq!(sharpness(&ramp(5, 5), 1.0), ramp(5, 5));
    }

    #[test]
    fn autocontrast_stretches() {
        let img = Raster::new(1, 3, 1, vec![50, 100, 150]).unwrap();
        assert_eq!(autocontrast(&img).pixels(), &[0, 127, 255]);
        let flat = Raster::filled(2, 2, 1, 9);
        assert_eq!(autocontrast(&flat), flat);
        assert_eq!(equalize(&flat), flat);
    }

    #[test]
    fn equalize_spreads_levels() {
        let img = ramp(16, 16);
        let eq = equalize(&img);
        let lo = *eq.pixels().iter().min().unwrap();
        let hi = *eq.pixels().iter().max().unwrap();
        assert!(lo < 10 && hi > 240, "{lo} {hi}");
    }
}
