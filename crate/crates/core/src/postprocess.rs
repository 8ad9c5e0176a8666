//! Turns an 8-bit saliency map into a single target box: local mean
//! thresholding, rectangular dilation, 8-connected labeling and selection of
//! the dominant component.

use crate::error::{Error, Result};
use crate::raster::{BoundingBox, GrayGrid, Grid, Region};

pub type BinaryMask = Grid<bool>;

pub const DEFAULT_BLOCK: usize = 5;
pub const DEFAULT_LAMBDA: f64 = 7.0;

/// Rectangular all-ones structuring element anchored at its center.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StructuringElement {
    rows: usize,
    cols: usize,
}

impl StructuringElement {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 || rows.is_multiple_of(2) || cols.is_multiple_of(2) {
            return Err(Error::Parameter(format!(
                "structuring element must have odd, positive extents, got {rows}x{cols}"
            )));
        }
        Ok(StructuringElement { rows, cols })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }
}

impl Default for StructuringElement {
    /// Five rows by three columns.
    fn default() -> Self {
        StructuringElement { rows: 5, cols: 3 }
    }
}

/// A labeled 8-connected foreground component.
#[derive(Clone, Debug, PartialEq)]
pub struct Component {
    pub size: usize,
    pub bounds: Region,
    pub mean_saliency: f64,
    /// Raster index of the first member pixel met in scan order.
    pub first_index: usize,
}

/// Marks in-region pixels whose value is at least the mean of their
/// `block` x `block` neighborhood minus `lambda`. The neighborhood is clipped
/// to the region and the mean taken over the pixels that remain. Pixels
/// outside the region are background.
pub fn adaptive_threshold(saliency: &GrayGrid, region: &Region, block: usize, lambda: f64) -> Result<BinaryMask> {
    check_block(block, lambda)?;
    region.check_fits(saliency.width(), saliency.height())?;
    let (rw, rh) = (region.w, region.h);
    // Summed-area table of the region with a zero top row and left column.
    let stride = rw + 1;
    let mut sat = vec![0u64; stride * (rh + 1)];
    for y in 0..rh {
        let src = &saliency.data()[saliency.index(region.x0, region.y0 + y)..][..rw];
        let mut run = 0u64;
        for x in 0..rw {
            run += src[x] as u64;
            sat[(y + 1) * stride + x + 1] = sat[y * stride + x + 1] + run;
        }
    }
    let r = block / 2;
    let mut mask = BinaryMask::new(saliency.width(), saliency.height(), false)?;
    for y in 0..rh {
        let ya = y.saturating_sub(r);
        let yb = (y + r + 1).min(rh);
        let row_start = saliency.index(region.x0, region.y0 + y);
        for x in 0..rw {
            let xa = x.saturating_sub(r);
            let xb = (x + r + 1).min(rw);
            let sum = sat[yb * stride + xb] + sat[ya * stride + xa] - sat[ya * stride + xb] - sat[yb * stride + xa];
            let count = ((yb - ya) * (xb - xa)) as u64;
            let g = saliency.data()[row_start + x];
            mask.data_mut()[row_start + x] = local_pass(g, sum, count, lambda);
        }
    }
    Ok(mask)
}

/// Whether `g` clears the local mean of `count` pixels summing to `sum`.
#[inline]
pub(crate) fn local_pass(g: u8, sum: u64, count: u64, lambda: f64) -> bool {
    g as f64 >= sum as f64 / count as f64 - lambda
}

fn check_block(block: usize, lambda: f64) -> Result<()> {
    if block == 0 || block.is_multiple_of(2) {
        return Err(Error::Parameter(format!(
            "threshold block must be odd and >= 1, got {block}"
        )));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Parameter(format!("threshold offset must be >= 0, got {lambda}")));
    }
    Ok(())
}

/// Binary dilation by a centered rectangle. Cells of the element that fall
/// outside the grid contribute nothing.
pub fn dilate(mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    let (w, h) = mask.dims();
    let rx = se.cols / 2;
    let ry = se.rows / 2;
    // The rectangle is separable: a horizontal run, then a vertical one.
    let mut horizontal = vec![false; w * h];
    for y in 0..h {
        let src = &mask.data()[y * w..(y + 1) * w];
        let dst = &mut horizontal[y * w..(y + 1) * w];
        spread(src, dst, rx);
    }
    let mut out = vec![false; w * h];
    let mut col = vec![false; h];
    let mut col_out = vec![false; h];
    for x in 0..w {
        for y in 0..h {
            col[y] = horizontal[y * w + x];
        }
        spread(&col, &mut col_out, ry);
        for y in 0..h {
            out[y * w + x] = col_out[y];
        }
    }
    BinaryMask::from_vec(w, h, out).expect("dimensions preserved")
}

/// `dst[i] = any(src[i - r ..= i + r])`, clipped at the ends.
fn spread(src: &[bool], dst: &mut [bool], r: usize) {
    let n = src.len();
    let mut last_on: Option<usize> = None;
    for i in 0..n {
        if src[i] {
            last_on = Some(i);
        }
        dst[i] = matches!(last_on, Some(j) if i - j <= r);
    }
    let mut next_on: Option<usize> = None;
    for i in (0..n).rev() {
        if src[i] {
            next_on = Some(i);
        }
        if !dst[i] {
            dst[i] = matches!(next_on, Some(j) if j - i <= r);
        }
    }
}

/// 8-connected components of `mask`, in order of their first pixel in
/// raster order. `saliency` supplies the per-component mean.
pub fn connected_components(mask: &BinaryMask, saliency: &GrayGrid) -> Result<Vec<Component>> {
    if !mask.same_dims(saliency) {
        return Err(Error::Dimension(format!(
            "mask {:?} vs saliency {:?}",
            mask.dims(),
            saliency.dims()
        )));
    }
    let (w, h) = mask.dims();
    let bits = mask.data();
    let mut seen = vec![false; w * h];
    let mut stack = Vec::new();
    let mut components = Vec::new();
    for start in 0..w * h {
        if !bits[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
        let mut size = 0usize;
        let mut total = 0u64;
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            size += 1;
            total += saliency.data()[i] as u64;
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
            for ny in y.saturating_sub(1)..(y + 2).min(h) {
                for nx in x.saturating_sub(1)..(x + 2).min(w) {
                    let j = ny * w + nx;
                    if bits[j] && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        components.push(Component {
            size,
            bounds: Region {
                x0,
                y0,
                w: x1 - x0 + 1,
                h: y1 - y0 + 1,
            },
            mean_saliency: total as f64 / size as f64,
            first_index: start,
        });
    }
    Ok(components)
}

/// Largest component; ties go to the higher mean saliency, then to the one
/// met first in raster order.
pub fn select_dominant(components: &[Component]) -> Option<&Component> {
    components.iter().reduce(|best, c| {
        let better = c.size > best.size
            || (c.size == best.size && c.mean_saliency > best.mean_saliency)
            || (c.size == best.size && c.mean_saliency == best.mean_saliency && c.first_index < best.first_index);
        if better {
            c
        } else {
            best
        }
    })
}

/// Parameters of the saliency-to-box stage.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExtractConfig {
    pub block: usize,
    pub lambda: f64,
    pub se: StructuringElement,
    /// Also require each foreground pixel to clear the region's Otsu level.
    pub global_gate: bool,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        ExtractConfig {
            block: DEFAULT_BLOCK,
            lambda: DEFAULT_LAMBDA,
            se: StructuringElement::default(),
            global_gate: true,
        }
    }
}

/// Otsu's threshold over the in-region histogram: the level `t` maximizing
/// the between-class variance of `{<= t}` and `{> t}`.
pub fn otsu_level(saliency: &GrayGrid, region: &Region) -> Result<u8> {
    region.check_fits(saliency.width(), saliency.height())?;
    let mut hist = [0u64; 256];
    for y in region.y0..region.y1() {
        for &v in &saliency.data()[saliency.index(region.x0, y)..][..region.w] {
            hist[v as usize] += 1;
        }
    }
    let total = region.area() as f64;
    let sum_all: f64 = hist.iter().enumerate().map(|(i, &c)| i as f64 * c as f64).sum();
    let (mut w0, mut sum0) = (0.0f64, 0.0f64);
    let (mut best, mut best_var) = (0u8, -1.0f64);
    for (t, &c) in hist.iter().enumerate() {
        w0 += c as f64;
        sum0 += t as f64 * c as f64;
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let m0 = sum0 / w0;
        let m1 = (sum_all - sum0) / w1;
        let var = w0 * w1 * (m0 - m1) * (m0 - m1);
        if var > best_var {
            best_var = var;
            best = t as u8;
        }
    }
    Ok(best)
}

/// Runs threshold, dilation and labeling inside `region` and returns the
/// tight box of the dominant component, or `None` when nothing survives.
/// The returned box always lies inside `region`.
pub fn extract_target_box(saliency: &GrayGrid, region: &Region, config: &ExtractConfig) -> Result<Option<BoundingBox>> {
    region.check_fits(saliency.width(), saliency.height())?;
    // Work on a crop so dilation and labeling stay inside the region.
    let crop = GrayGrid::from_fn(region.w, region.h, |x, y| saliency.get(region.x0 + x, region.y0 + y))?;
    let local = crop.full_region();
    let mut mask = adaptive_threshold(&crop, &local, config.block, config.lambda)?;
    if config.global_gate {
        let level = otsu_level(&crop, &local)?;
        for (bit, &g) in mask.data_mut().iter_mut().zip(crop.data()) {
            *bit &= g > level;
        }
    }
    let dilated = dilate(&mask, &config.se);
    let components = connected_components(&dilated, &crop)?;
    Ok(select_dominant(&components).map(|c| {
        let r = c.bounds;
        Region {
            x0: r.x0 + region.x0,
            y0: r.y0 + region.y0,
            ..r
        }
        .to_box()
    }))
}
