//! Minimum barrier distance (MBD) saliency.
//!
//! The barrier of a path is the spread `max - min` of the intensities along
//! it; the distance of a pixel is the smallest barrier over all 4-adjacent
//! paths to a background seed. Background is assumed to touch the image
//! frame, so the frame pixels are the seeds and a salient object shows up as
//! a region of large distance.
//!
//! The exact transform is expensive. Here it is approximated by alternating
//! raster and inverse-raster sweeps that relax each pixel from its two causal
//! neighbors, carrying the running maximum (`upper`) and minimum (`lower`)
//! of every pixel's current best path. Sweeps can be restricted to a search
//! region: pixels outside keep whatever values they already hold and are
//! read as neighbors, which is how background distance enters a region that
//! does not touch the frame.

use crate::error::{Error, Result};
use crate::raster::{GrayGrid, RealGrid, Region};

/// Distance of a pixel not yet reached by any seed.
pub const UNREACHED: f32 = f32::INFINITY;

/// Default number of sweeps per update.
pub const DEFAULT_PASSES: usize = 3;

/// Distance map plus the intensity envelope of each pixel's best path.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMaps {
    pub distance: RealGrid,
    pub upper: RealGrid,
    pub lower: RealGrid,
}

impl DistanceMaps {
    pub fn width(&self) -> usize {
        self.distance.width()
    }

    pub fn height(&self) -> usize {
        self.distance.height()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.distance.dims()
    }
}

/// Background seed pixels, stored as `(row, col)`.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct SeedSet {
    pixels: Vec<(usize, usize)>,
}

impl SeedSet {
    pub fn new(pixels: Vec<(usize, usize)>, width: usize, height: usize) -> Result<Self> {
        if pixels.is_empty() {
            return Err(Error::Parameter("seed set must not be empty".into()));
        }
        let seeds = SeedSet { pixels };
        seeds.check_bounds(width, height)?;
        Ok(seeds)
    }

    pub fn pixels(&self) -> &[(usize, usize)] {
        &self.pixels
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    fn check_bounds(&self, width: usize, height: usize) -> Result<()> {
        match self.pixels.iter().find(|&&(r, c)| r >= height || c >= width) {
            Some(p) => Err(Error::Bounds(format!("seed {p:?} outside a {width}x{height} grid"))),
            None => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScanDirection {
    /// Row-major, relaxing from the left and upper neighbors.
    Forward,
    /// Reverse row-major, relaxing from the right and lower neighbors.
    Backward,
}

impl ScanDirection {
    /// Direction of the `i`-th sweep (0-based): forward first, then alternating.
    pub fn for_pass(i: usize) -> Self {
        if i.is_multiple_of(2) {
            ScanDirection::Forward
        } else {
            ScanDirection::Backward
        }
    }
}

/// Pixels of the image's outer one-pixel frame that fall inside `region`.
/// Empty when the region does not touch the frame.
pub fn boundary_seeds(width: usize, height: usize, region: &Region) -> SeedSet {
    let mut pixels = Vec::new();
    for row in region.y0..region.y1().min(height) {
        for col in region.x0..region.x1().min(width) {
            if row == 0 || col == 0 || row + 1 == height || col + 1 == width {
                pixels.push((row, col));
            }
        }
    }
    SeedSet { pixels }
}

/// Sets up maps for a fresh sweep over `region`.
///
/// Inside the region distances start unreached, except seeds at zero, and the
/// path envelope is the pixel's own intensity. Outside the region the prior
/// maps are copied when given; otherwise the exterior is unreached.
pub fn init_maps(
    image: &GrayGrid,
    seeds: &SeedSet,
    region: &Region,
    prior: Option<&DistanceMaps>,
) -> Result<DistanceMaps> {
    let (w, h) = image.dims();
    seeds.check_bounds(w, h)?;
    region.check_fits(w, h)?;
    let mut maps = match prior {
        Some(p) => {
            check_prior(p, image)?;
            p.clone()
        }
        None => {
            let intensity = image.map(f32::from);
            DistanceMaps {
                distance: RealGrid::new(w, h, UNREACHED)?,
                upper: intensity.clone(),
                lower: intensity,
            }
        }
    };
    reset_region(&mut maps, image, seeds, region);
    Ok(maps)
}

fn check_prior(prior: &DistanceMaps, image: &GrayGrid) -> Result<()> {
    let dims = image.dims();
    if prior.distance.dims() != dims || prior.upper.dims() != dims || prior.lower.dims() != dims {
        return Err(Error::Dimension(format!(
            "prior maps are {:?}, image is {:?}",
            prior.dims(),
            dims
        )));
    }
    Ok(())
}

fn reset_region(maps: &mut DistanceMaps, image: &GrayGrid, seeds: &SeedSet, region: &Region) {
    let w = image.width();
    for y in region.y0..region.y1() {
        let row = y * w;
        for i in row + region.x0..row + region.x1() {
            let v = f32::from(image.data()[i]);
            maps.distance.data_mut()[i] = UNREACHED;
            maps.upper.data_mut()[i] = v;
            maps.lower.data_mut()[i] = v;
        }
    }
    for &(r, c) in seeds.pixels() {
        if region.contains(c, r) {
            maps.distance.data_mut()[r * w + c] = 0.0;
        }
    }
}

/// One sweep over `region`, returning updated maps.
pub fn scan_pass(
    maps: &DistanceMaps,
    image: &GrayGrid,
    region: &Region,
    direction: ScanDirection,
) -> Result<DistanceMaps> {
    check_prior(maps, image)?;
    region.check_fits(image.width(), image.height())?;
    let mut out = maps.clone();
    sweep(&mut out, image, region, direction);
    Ok(out)
}

/// Relaxes every pixel of `region` from its causal neighbors; returns whether
/// any distance changed.
pub(crate) fn sweep(maps: &mut DistanceMaps, image: &GrayGrid, region: &Region, direction: ScanDirection) -> bool {
    let w = image.width();
    let h = image.height();
    let intensity = image.data();
    let DistanceMaps { distance, upper, lower } = maps;
    let d = distance.data_mut();
    let u = upper.data_mut();
    let l = lower.data_mut();
    let mut changed = false;

    // Relax pixel `z` through neighbor `m`.
    let mut relax = |z: usize, m: usize, iz: f32| {
        let dm = d[m];
        if dm == UNREACHED {
            return;
        }
        let hi = u[m].max(iz);
        let lo = l[m].min(iz);
        let cost = hi - lo;
        if cost < d[z] {
            d[z] = cost;
            u[z] = hi;
            l[z] = lo;
            changed = true;
        }
    };

    match direction {
        ScanDirection::Forward => {
            for y in region.y0..region.y1() {
                let row = y * w;
                for x in region.x0..region.x1() {
                    let z = row + x;
                    let iz = f32::from(intensity[z]);
                    if x > 0 {
                        relax(z, z - 1, iz);
                    }
                    if y > 0 {
                        relax(z, z - w, iz);
                    }
                }
            }
        }
        ScanDirection::Backward => {
            for y in (region.y0..region.y1()).rev() {
                let row = y * w;
                for x in (region.x0..region.x1()).rev() {
                    let z = row + x;
                    let iz = f32::from(intensity[z]);
                    if x + 1 < w {
                        relax(z, z + 1, iz);
                    }
                    if y + 1 < h {
                        relax(z, z + w, iz);
                    }
                }
            }
        }
    }
    changed
}

/// Initializes the maps over `region` and runs `passes` alternating sweeps,
/// starting with a forward sweep.
pub fn mbd_saliency(
    image: &GrayGrid,
    region: &Region,
    seeds: &SeedSet,
    passes: usize,
    prior: Option<&DistanceMaps>,
) -> Result<DistanceMaps> {
    check_passes(passes)?;
    let mut maps = init_maps(image, seeds, region, prior)?;
    for i in 0..passes {
        sweep(&mut maps, image, region, ScanDirection::for_pass(i));
    }
    Ok(maps)
}

/// Whole-image saliency seeded from the image frame.
pub fn full_saliency(image: &GrayGrid, passes: usize) -> Result<DistanceMaps> {
    let region = image.full_region();
    let seeds = boundary_seeds(image.width(), image.height(), &region);
    mbd_saliency(image, &region, &seeds, passes, None)
}

/// Recomputes saliency inside `search` only, keeping everything outside.
pub fn local_update(prior: &DistanceMaps, image: &GrayGrid, search: &Region, passes: usize) -> Result<DistanceMaps> {
    let mut maps = prior.clone();
    local_update_in_place(&mut maps, image, search, passes)?;
    Ok(maps)
}

/// In-place form of [`local_update`], used by the tracker to avoid
/// reallocating the maps every frame.
pub fn local_update_in_place(maps: &mut DistanceMaps, image: &GrayGrid, search: &Region, passes: usize) -> Result<()> {
    check_passes(passes)?;
    check_prior(maps, image)?;
    search.check_fits(image.width(), image.height())?;
    let seeds = boundary_seeds(image.width(), image.height(), search);
    reset_region(maps, image, &seeds, search);
    for i in 0..passes {
        sweep(maps, image, search, ScanDirection::for_pass(i));
    }
    Ok(())
}

fn check_passes(passes: usize) -> Result<()> {
    if passes == 0 {
        return Err(Error::Parameter("at least one pass is required".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(values: &[u8]) -> GrayGrid {
        GrayGrid::from_vec(values.len(), 1, values.to_vec()).unwrap()
    }

    fn left_seed(n: usize) -> SeedSet {
        SeedSet::new(vec![(0, 0)], n, 1).unwrap()
    }

    #[test]
    fn init_full_region_border_seeds() {
        let img = GrayGrid::from_vec(3, 3, vec![1, 2, 3, 4, 5, 6, 7, 8, 9]).unwrap();
        let region = img.full_region();
        let seeds = boundary_seeds(3, 3, &region);
        let maps = init_maps(&img, &seeds, &region, None).unwrap();
        for y in 0..3 {
            for x in 0..3 {
                let d = maps.distance.get(x, y);
                if (x, y) == (1, 1) {
                    assert_eq!(d, UNREACHED);
                } else {
                    assert_eq!(d, 0.0);
                }
                assert_eq!(maps.upper.get(x, y), f32::from(img.get(x, y)));
                assert_eq!(maps.lower.get(x, y), f32::from(img.get(x, y)));
            }
        }
    }

    #[test]
    fn init_prior_ignored_for_full_region() {
        let img = GrayGrid::from_fn(4, 4, |x, y| (x * 10 + y) as u8).unwrap();
        let region = img.full_region();
        let seeds = boundary_seeds(4, 4, &region);
        let prior = DistanceMaps {
            distance: RealGrid::new(4, 4, 3.0).unwrap(),
            upper: RealGrid::new(4, 4, 99.0).unwrap(),
            lower: RealGrid::new(4, 4, 1.0).unwrap(),
        };
        assert_eq!(
            init_maps(&img, &seeds, &region, Some(&prior)).unwrap(),
            init_maps(&img, &seeds, &region, None).unwrap()
        );
    }

    #[test]
    fn init_retains_exterior() {
        let img = GrayGrid::new(5, 5, 10).unwrap();
        let region = Region::new(1, 1, 3, 3).unwrap();
        let prior = DistanceMaps {
            distance: RealGrid::new(5, 5, 2.0).unwrap(),
            upper: RealGrid::new(5, 5, 12.0).unwrap(),
            lower: RealGrid::new(5, 5, 10.0).unwrap(),
        };
        let seeds = boundary_seeds(5, 5, &region);
        assert!(seeds.is_empty());
        let maps = init_maps(&img, &seeds, &region, Some(&prior)).unwrap();
        for y in 0..5 {
            for x in 0..5 {
                let expected = if region.contains(x, y) { UNREACHED } else { 2.0 };
                assert_eq!(maps.distance.get(x, y), expected);
            }
        }
    }

    #[test]
    fn init_rejects_bad_seed_and_prior() {
        let img = GrayGrid::new(3, 3, 0).unwrap();
        let bad = SeedSet { pixels: vec![(5, 0)] };
        assert!(matches!(
            init_maps(&img, &bad, &img.full_region(), None),
            Err(Error::Bounds(_))
        ));
        assert!(SeedSet::new(vec![(0, 3)], 3, 3).is_err());
        assert!(SeedSet::new(vec![], 3, 3).is_err());

        let small = DistanceMaps {
            distance: RealGrid::new(2, 2, 0.0).unwrap(),
            upper: RealGrid::new(2, 2, 0.0).unwrap(),
            lower: RealGrid::new(2, 2, 0.0).unwrap(),
        };
        let seeds = boundary_seeds(3, 3, &img.full_region());
        assert!(matches!(
            init_maps(&img, &seeds, &img.full_region(), Some(&small)),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            local_update(&small, &img, &img.full_region(), 3),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn forward_pass_on_lines() {
        let img = row(&[0, 5, 0]);
        let maps = init_maps(&img, &left_seed(3), &img.full_region(), None).unwrap();
        let out = scan_pass(&maps, &img, &img.full_region(), ScanDirection::Forward).unwrap();
        assert_eq!(out.distance.data(), &[0.0, 5.0, 5.0]);

        let img = row(&[0, 9, 1, 9]);
        let maps = init_maps(&img, &left_seed(4), &img.full_region(), None).unwrap();
        let out = scan_pass(&maps, &img, &img.full_region(), ScanDirection::Forward).unwrap();
        assert_eq!(out.distance.data(), &[0.0, 9.0, 9.0, 9.0]);
        assert_eq!(out.upper.data(), &[0.0, 9.0, 9.0, 9.0]);
        assert_eq!(out.lower.data(), &[0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn backward_pass_cannot_reach_right_of_left_seed() {
        let img = row(&[0, 5, 0]);
        let maps = init_maps(&img, &left_seed(3), &img.full_region(), None).unwrap();
        let out = scan_pass(&maps, &img, &img.full_region(), ScanDirection::Backward).unwrap();
        assert_eq!(out.distance.data(), &[0.0, UNREACHED, UNREACHED]);
    }

    #[test]
    fn constant_image_single_forward_pass() {
        let img = GrayGrid::new(6, 5, 42).unwrap();
        let region = img.full_region();
        let maps = init_maps(&img, &boundary_seeds(6, 5, &region), &region, None).unwrap();
        let out = scan_pass(&maps, &img, &region, ScanDirection::Forward).unwrap();
        assert!(out.distance.data().iter().all(|&d| d == 0.0));
    }

    #[test]
    fn pass_order_alternates() {
        let dirs: Vec<_> = (0..3).map(ScanDirection::for_pass).collect();
        assert_eq!(
            dirs,
            vec![ScanDirection::Forward, ScanDirection::Backward, ScanDirection::Forward]
        );
    }

    #[test]
    fn three_passes_match_manual_sequence() {
        let img = GrayGrid::from_fn(7, 6, |x, y| ((x * 37 + y * 91) % 256) as u8).unwrap();
        let region = img.full_region();
        let seeds = boundary_seeds(7, 6, &region);
        let mut manual = init_maps(&img, &seeds, &region, None).unwrap();
        for dir in [ScanDirection::Forward, ScanDirection::Backward, ScanDirection::Forward] {
            manual = scan_pass(&manual, &img, &region, dir).unwrap();
        }
        assert_eq!(mbd_saliency(&img, &region, &seeds, 3, None).unwrap(), manual);
        assert!(mbd_saliency(&img, &region, &seeds, 0, None).is_err());
    }

    #[test]
    fn boundary_seed_counts() {
        let full = Region::new(0, 0, 4, 4).unwrap();
        assert_eq!(boundary_seeds(4, 4, &full).len(), 12);

        let interior = Region::new(3, 3, 4, 4).unwrap();
        assert!(boundary_seeds(10, 10, &interior).is_empty());

        let left = Region::new(0, 2, 3, 4).unwrap();
        let seeds = boundary_seeds(10, 10, &left);
        assert_eq!(seeds.len(), 4);
        assert!(seeds.pixels().iter().all(|&(r, c)| c == 0 && (2..6).contains(&r)));
    }

    #[test]
    fn local_update_whole_image_matches_fresh() {
        let img = GrayGrid::from_fn(9, 8, |x, y| ((x * x + 3 * y) * 7 % 256) as u8).unwrap();
        let other = GrayGrid::from_fn(9, 8, |x, y| ((x + y) * 13 % 256) as u8).unwrap();
        let prior = full_saliency(&other, 3).unwrap();
        let fresh = full_saliency(&img, 3).unwrap();
        assert_eq!(local_update(&prior, &img, &img.full_region(), 3).unwrap(), fresh);
    }

    #[test]
    fn local_update_constant_image_zero_exterior() {
        let img = GrayGrid::new(10, 10, 80).unwrap();
        let prior = DistanceMaps {
            distance: RealGrid::new(10, 10, 0.0).unwrap(),
            upper: RealGrid::new(10, 10, 80.0).unwrap(),
            lower: RealGrid::new(10, 10, 80.0).unwrap(),
        };
        let out = local_update(&prior, &img, &Region::new(3, 2, 4, 5).unwrap(), 3).unwrap();
        assert!(out.distance.data().iter().all(|&d| d == 0.0));
    }

    #[test]
    fn seeds_zero_and_envelope_consistent() {
        let img = GrayGrid::from_fn(12, 9, |x, y| ((x * 53 + y * 29 + x * y) % 256) as u8).unwrap();
        let maps = full_saliency(&img, 3).unwrap();
        let seeds = boundary_seeds(12, 9, &img.full_region());
        for &(r, c) in seeds.pixels() {
            assert_eq!(maps.distance.get(c, r), 0.0);
        }
        for i in 0..img.data().len() {
            let d = maps.distance.data()[i];
            let u = maps.upper.data()[i];
            let l = maps.lower.data()[i];
            let v = f32::from(img.data()[i]);
            assert!(d.is_finite());
            assert_eq!(d, u - l);
            assert!(l <= v && v <= u);
        }
    }
}
