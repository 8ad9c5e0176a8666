//! Raster primitives shared by the saliency, post-processing and tracking
//! stages: a dense row-major grid, integer regions, real-valued boxes and
//! the handful of image utilities the pipeline needs.

use image::RgbImage;

use crate::error::{Error, Result};

/// A dense, row-major 2-D raster.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

/// 8-bit single channel raster.
pub type GrayGrid = Grid<u8>;
/// Real-valued raster (saliency distances and path envelopes).
pub type RealGrid = Grid<f32>;

impl<T: Copy> Grid<T> {
    pub fn new(width: usize, height: usize, fill: T) -> Result<Self> {
        check_dims(width, height)?;
        Ok(Grid {
            width,
            height,
            data: vec![fill; width * height],
        })
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        check_dims(width, height)?;
        if data.len() != width * height {
            return Err(Error::Dimension(format!(
                "{} samples for a {}x{} grid",
                data.len(),
                width,
                height
            )));
        }
        Ok(Grid { width, height, data })
    }

    /// Builds a grid by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Result<Self> {
        check_dims(width, height)?;
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Ok(Grid { width, height, data })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        debug_assert!(x < self.width && y < self.height);
        y * self.width + x
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[self.index(x, y)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: T) {
        let i = self.index(x, y);
        self.data[i] = value;
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    /// The region covering the whole grid.
    pub fn full_region(&self) -> Region {
        Region {
            x0: 0,
            y0: 0,
            w: self.width,
            h: self.height,
        }
    }

    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> Grid<U> {
        Grid {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn same_dims<U>(&self, other: &Grid<U>) -> bool {
        self.width == other.width && self.height == other.height
    }
}

fn check_dims(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::Dimension(format!(
            "grid must be at least 1x1, got {width}x{height}"
        )));
    }
    Ok(())
}

/// An axis-aligned rectangle of whole pixels, `[x0, x0 + w) x [y0, y0 + h)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Region {
    pub x0: usize,
    pub y0: usize,
    pub w: usize,
    pub h: usize,
}

impl Region {
    pub fn new(x0: usize, y0: usize, w: usize, h: usize) -> Result<Self> {
        if w == 0 || h == 0 {
            return Err(Error::Parameter(format!("empty region {w}x{h}")));
        }
        Ok(Region { x0, y0, w, h })
    }

    /// Exclusive right edge.
    #[inline]
    pub fn x1(&self) -> usize {
        self.x0 + self.w
    }

    /// Exclusive bottom edge.
    #[inline]
    pub fn y1(&self) -> usize {
        self.y0 + self.h
    }

    #[inline]
    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x0 && x < self.x1() && y >= self.y0 && y < self.y1()
    }

    pub fn contains_region(&self, other: &Region) -> bool {
        other.x0 >= self.x0 && other.y0 >= self.y0 && other.x1() <= self.x1() && other.y1() <= self.y1()
    }

    /// True when the region lies entirely inside a `width` x `height` grid.
    pub fn fits(&self, width: usize, height: usize) -> bool {
        self.w >= 1 && self.h >= 1 && self.x1() <= width && self.y1() <= height
    }

    pub fn area(&self) -> usize {
        self.w * self.h
    }

    pub(crate) fn check_fits(&self, width: usize, height: usize) -> Result<()> {
        if self.fits(width, height) {
            Ok(())
        } else {
            Err(Error::Bounds(format!(
                "region {:?} does not fit a {}x{} grid",
                self, width, height
            )))
        }
    }

    /// Center-based box covering exactly these pixels.
    pub fn to_box(&self) -> BoundingBox {
        BoundingBox {
            cx: self.x0 as f64 + self.w as f64 / 2.0,
            cy: self.y0 as f64 + self.h as f64 / 2.0,
            w: self.w as f64,
            h: self.h as f64,
        }
    }
}

/// A real-valued, center-based box. Pixel `i` spans `[i, i + 1)`, so a box
/// covering pixels `0..w` has `cx = w / 2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundingBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        BoundingBox { cx, cy, w, h }
    }

    pub fn from_top_left(x: f64, y: f64, w: f64, h: f64) -> Self {
        BoundingBox {
            cx: x + w / 2.0,
            cy: y + h / 2.0,
            w,
            h,
        }
    }

    pub fn left(&self) -> f64 {
        self.cx - self.w / 2.0
    }

    pub fn top(&self) -> f64 {
        self.cy - self.h / 2.0
    }

    pub fn right(&self) -> f64 {
        self.cx + self.w / 2.0
    }

    pub fn bottom(&self) -> f64 {
        self.cy + self.h / 2.0
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn is_valid(&self) -> bool {
        self.cx.is_finite()
            && self.cy.is_finite()
            && self.w.is_finite()
            && self.h.is_finite()
            && self.w > 0.0
            && self.h > 0.0
    }

    /// Smallest region of whole pixels containing the box.
    pub fn round_outward(&self) -> (i64, i64, i64, i64) {
        let x0 = self.left().floor() as i64;
        let y0 = self.top().floor() as i64;
        let x1 = self.right().ceil() as i64;
        let y1 = self.bottom().ceil() as i64;
        (x0, y0, x1, y1)
    }

    /// Intersection with `[0, width] x [0, height]`. A box entirely outside
    /// collapses onto the nearest edge with at least one pixel of extent.
    pub fn clip_to(&self, width: f64, height: f64) -> BoundingBox {
        let (x0, x1) = clip_span(self.left(), self.right(), width);
        let (y0, y1) = clip_span(self.top(), self.bottom(), height);
        BoundingBox::from_top_left(x0, y0, x1 - x0, y1 - y0)
    }
}

fn clip_span(lo: f64, hi: f64, limit: f64) -> (f64, f64) {
    let mut a = lo.clamp(0.0, limit);
    let mut b = hi.clamp(0.0, limit);
    if b - a < 1.0 {
        let min_extent = limit.min(1.0);
        if a + min_extent <= limit {
            b = a + min_extent;
        } else {
            a = limit - min_extent;
            b = limit;
        }
    }
    (a, b)
}

/// Maps working-resolution coordinates back to the original frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaleTransform {
    pub factor: f64,
}

impl ScaleTransform {
    pub const IDENTITY: ScaleTransform = ScaleTransform { factor: 1.0 };

    pub fn new(factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(Error::Parameter(format!("scale factor must be > 0, got {factor}")));
        }
        Ok(ScaleTransform { factor })
    }

    pub fn to_original(&self, b: &BoundingBox) -> BoundingBox {
        BoundingBox::new(
            b.cx * self.factor,
            b.cy * self.factor,
            b.w * self.factor,
            b.h * self.factor,
        )
    }

    pub fn to_working(&self, b: &BoundingBox) -> BoundingBox {
        BoundingBox::new(
            b.cx / self.factor,
            b.cy / self.factor,
            b.w / self.factor,
            b.h / self.factor,
        )
    }
}

#[inline]
fn luma(r: u8, g: u8, b: u8) -> u8 {
    let y = 0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64;
    y.round().clamp(0.0, 255.0) as u8
}

/// Luminance of a color frame (ITU-R BT.601 weights).
pub fn to_luma(image: &RgbImage) -> Result<GrayGrid> {
    let (w, h) = image.dimensions();
    let data = image.pixels().map(|p| luma(p[0], p[1], p[2])).collect();
    Grid::from_vec(w as usize, h as usize, data)
}

/// Luminance from three separate channel planes.
pub fn luma_from_planes(r: &GrayGrid, g: &GrayGrid, b: &GrayGrid) -> Result<GrayGrid> {
    if !r.same_dims(g) || !r.same_dims(b) {
        return Err(Error::Dimension(format!(
            "channel planes differ: {:?}, {:?}, {:?}",
            r.dims(),
            g.dims(),
            b.dims()
        )));
    }
    let data = r
        .data()
        .iter()
        .zip(g.data())
        .zip(b.data())
        .map(|((&r, &g), &b)| luma(r, g, b))
        .collect();
    Grid::from_vec(r.width(), r.height(), data)
}

/// Downscales so the larger dimension equals `max_dim`, preserving aspect
/// ratio. Images already within the limit are returned unchanged.
pub fn resize_max_dim(image: &GrayGrid, max_dim: usize) -> Result<(GrayGrid, ScaleTransform)> {
    if max_dim == 0 {
        return Err(Error::Parameter("max_dim must be >= 1".into()));
    }
    let (w, h) = image.dims();
    let major = w.max(h);
    if major <= max_dim {
        return Ok((image.clone(), ScaleTransform::IDENTITY));
    }
    let factor = major as f64 / max_dim as f64;
    let minor = |d: usize| ((d as f64 / factor).round() as usize).max(1);
    let (out_w, out_h) = if w >= h {
        (max_dim, minor(h))
    } else {
        (minor(w), max_dim)
    };
    Ok((bilinear(image, out_w, out_h), ScaleTransform::new(factor)?))
}

fn bilinear(src: &GrayGrid, out_w: usize, out_h: usize) -> GrayGrid {
    let (w, h) = src.dims();
    let sx = w as f64 / out_w as f64;
    let sy = h as f64 / out_h as f64;
    // Precompute horizontal taps once per column.
    let taps: Vec<(usize, usize, f64)> = (0..out_w).map(|x| tap((x as f64 + 0.5) * sx - 0.5, w)).collect();
    let mut data = Vec::with_capacity(out_w * out_h);
    for y in 0..out_h {
        let (y0, y1, fy) = tap((y as f64 + 0.5) * sy - 0.5, h);
        let row0 = &src.data()[y0 * w..(y0 + 1) * w];
        let row1 = &src.data()[y1 * w..(y1 + 1) * w];
        for &(x0, x1, fx) in &taps {
            let top = row0[x0] as f64 * (1.0 - fx) + row0[x1] as f64 * fx;
            let bottom = row1[x0] as f64 * (1.0 - fx) + row1[x1] as f64 * fx;
            let v = top * (1.0 - fy) + bottom * fy;
            data.push(v.round().clamp(0.0, 255.0) as u8);
        }
    }
    Grid {
        width: out_w,
        height: out_h,
        data,
    }
}

#[inline]
fn tap(pos: f64, len: usize) -> (usize, usize, f64) {
    let pos = pos.clamp(0.0, (len - 1) as f64);
    let i0 = pos.floor() as usize;
    let i1 = (i0 + 1).min(len - 1);
    (i0, i1, pos - i0 as f64)
}

/// Affine min-max stretch of the in-region samples onto `0..=255`.
/// Samples outside the region, and every sample of a constant region, map to 0.
pub fn normalize_to_u8(grid: &RealGrid, region: &Region) -> Result<GrayGrid> {
    region.check_fits(grid.width(), grid.height())?;
    let mut lo = f32::INFINITY;
    let mut hi = f32::NEG_INFINITY;
    for y in region.y0..region.y1() {
        for &v in &grid.data()[grid.index(region.x0, y)..grid.index(region.x0, y) + region.w] {
            if !v.is_finite() {
                return Err(Error::Numeric(format!("non-finite sample {v} in region {region:?}")));
            }
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    let mut out = Grid::new(grid.width(), grid.height(), 0u8)?;
    let range = hi - lo;
    if range > 0.0 {
        let scale = 255.0 / range as f64;
        for y in region.y0..region.y1() {
            let start = grid.index(region.x0, y);
            let src = &grid.data()[start..start + region.w];
            let dst = &mut out.data_mut()[start..start + region.w];
            for (d, &s) in dst.iter_mut().zip(src) {
                *d = ((s - lo) as f64 * scale).round().clamp(0.0, 255.0) as u8;
            }
        }
    }
    Ok(out)
}

/// Inflates `b` by `delta * w` on each horizontal side and `delta * h` on each
/// vertical side, rounds outward to whole pixels and clips to the grid. The
/// result always holds at least one pixel.
pub fn expand_region(b: &BoundingBox, delta: f64, width: usize, height: usize) -> Region {
    let grown = BoundingBox::new(b.cx, b.cy, b.w * (1.0 + 2.0 * delta), b.h * (1.0 + 2.0 * delta));
    let (x0, y0, x1, y1) = grown.round_outward();
    let (x0, x1) = clip_index_span(x0, x1, width);
    let (y0, y1) = clip_index_span(y0, y1, height);
    Region {
        x0,
        y0,
        w: x1 - x0,
        h: y1 - y0,
    }
}

fn clip_index_span(lo: i64, hi: i64, len: usize) -> (usize, usize) {
    let len = len as i64;
    let a = lo.clamp(0, len - 1);
    let b = hi.clamp(a + 1, len);
    (a as usize, b as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgb;

    fn rgb1(r: u8, g: u8, b: u8) -> RgbImage {
        RgbImage::from_pixel(1, 1, Rgb([r, g, b]))
    }

    #[test]
    fn luma_examples() {
        assert_eq!(to_luma(&rgb1(255, 255, 255)).unwrap().get(0, 0), 255);
        assert_eq!(to_luma(&rgb1(0, 0, 0)).unwrap().get(0, 0), 0);
        assert_eq!(to_luma(&rgb1(255, 0, 0)).unwrap().get(0, 0), 76);
    }

    #[test]
    fn luma_planes_reject_mismatch() {
        let a = GrayGrid::new(2, 2, 0).unwrap();
        let b = GrayGrid::new(2, 3, 0).unwrap();
        assert!(matches!(luma_from_planes(&a, &a, &b), Err(Error::Dimension(_))));
        let ok = luma_from_planes(&a, &a, &a).unwrap();
        assert_eq!(ok.dims(), (2, 2));
    }

    #[test]
    fn grid_rejects_empty_and_short() {
        assert!(GrayGrid::new(0, 3, 0).is_err());
        assert!(GrayGrid::from_vec(2, 2, vec![1, 2, 3]).is_err());
    }

    #[test]
    fn resize_examples() {
        let img = GrayGrid::new(1280, 720, 9).unwrap();
        let (out, t) = resize_max_dim(&img, 300).unwrap();
        assert_eq!(out.dims(), (300, 169));
        assert!((t.factor - 1280.0 / 300.0).abs() < 1e-12);
        assert!((t.factor - 4.2667).abs() < 1e-4);
        assert!(out.data().iter().all(|&v| v == 9));

        let small = GrayGrid::new(320, 240, 1).unwrap();
        let (out, t) = resize_max_dim(&small, 300).unwrap();
        assert_eq!(out.dims(), (300, 225));
        assert!((t.factor - 320.0 / 300.0).abs() < 1e-12);

        let sq = GrayGrid::new(300, 300, 1).unwrap();
        let (out, t) = resize_max_dim(&sq, 300).unwrap();
        assert_eq!(out, sq);
        assert_eq!(t.factor, 1.0);
    }

    #[test]
    fn resize_within_limit_is_identity() {
        let img = GrayGrid::from_fn(200, 150, |x, y| ((x + y) % 256) as u8).unwrap();
        let (out, t) = resize_max_dim(&img, 300).unwrap();
        assert_eq!(out, img);
        assert_eq!(t, ScaleTransform::IDENTITY);
    }

    #[test]
    fn resize_tall_and_thin() {
        let img = GrayGrid::new(1, 900, 5).unwrap();
        let (out, t) = resize_max_dim(&img, 300).unwrap();
        assert_eq!(out.dims(), (1, 300));
        assert!((t.factor - 3.0).abs() < 1e-12);
        assert!(resize_max_dim(&img, 0).is_err());
    }

    #[test]
    fn normalize_examples() {
        let g = RealGrid::from_vec(3, 1, vec![0.0, 5.0, 10.0]).unwrap();
        let n = normalize_to_u8(&g, &g.full_region()).unwrap();
        assert_eq!(n.data(), &[0, 128, 255]);

        let c = RealGrid::from_vec(3, 1, vec![7.0; 3]).unwrap();
        assert_eq!(normalize_to_u8(&c, &c.full_region()).unwrap().data(), &[0, 0, 0]);

        let two = RealGrid::from_vec(2, 1, vec![2.0, 4.0]).unwrap();
        assert_eq!(normalize_to_u8(&two, &two.full_region()).unwrap().data(), &[0, 255]);
    }

    #[test]
    fn normalize_zeroes_exterior_and_rejects_nonfinite_inside() {
        let g = RealGrid::from_vec(3, 1, vec![f32::INFINITY, 1.0, 3.0]).unwrap();
        let r = Region::new(1, 0, 2, 1).unwrap();
        assert_eq!(normalize_to_u8(&g, &r).unwrap().data(), &[0, 0, 255]);
        assert!(matches!(normalize_to_u8(&g, &g.full_region()), Err(Error::Numeric(_))));
    }

    #[test]
    fn expand_region_examples() {
        let b = BoundingBox::new(50.0, 50.0, 40.0, 20.0);
        assert_eq!(expand_region(&b, 0.25, 300, 200), Region::new(20, 35, 60, 30).unwrap());
        assert_eq!(expand_region(&b, 0.0, 300, 200), Region::new(30, 40, 40, 20).unwrap());

        let corner = BoundingBox::new(5.0, 5.0, 40.0, 40.0);
        let r = expand_region(&corner, 0.25, 300, 200);
        assert_eq!((r.x0, r.y0), (0, 0));
        assert_eq!((r.w, r.h), (35, 35));
    }

    #[test]
    fn expand_region_outside_grid_is_nonempty() {
        let b = BoundingBox::new(-50.0, 500.0, 4.0, 4.0);
        let r = expand_region(&b, 0.25, 30, 20);
        assert!(r.fits(30, 20));
        assert!(r.area() >= 1);
    }

    #[test]
    fn clip_keeps_box_inside() {
        let b = BoundingBox::from_top_left(-5.0, 10.0, 20.0, 50.0).clip_to(100.0, 40.0);
        assert_eq!((b.left(), b.top(), b.right(), b.bottom()), (0.0, 10.0, 15.0, 40.0));
        let far = BoundingBox::new(500.0, 500.0, 3.0, 3.0).clip_to(100.0, 40.0);
        assert!(far.right() <= 100.0 && far.bottom() <= 40.0 && far.is_valid());
    }
}
