//! Generated test sequences: a bright square moving over a dark, optionally
//! noisy background. Used by `bench` and by the test suites.

use std::ops::Range;

use image::{Rgb, RgbImage};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::eval::GroundTruthTrack;
use crate::raster::BoundingBox;

#[derive(Clone, Debug, PartialEq)]
pub struct SquareSequence {
    pub width: u32,
    pub height: u32,
    pub frames: usize,
    pub size: u32,
    /// Top-left corner on frame 0.
    pub start: (f64, f64),
    /// Pixels per frame.
    pub velocity: (f64, f64),
    pub foreground: u8,
    pub background: u8,
    pub noise_sigma: f64,
    /// Frames on which the square is not drawn.
    pub absent: Option<Range<usize>>,
    pub seed: u64,
}

impl Default for SquareSequence {
    fn default() -> Self {
        SquareSequence {
            width: 300,
            height: 200,
            frames: 100,
            size: 20,
            start: (40.0, 40.0),
            velocity: (2.0, 1.0),
            foreground: 200,
            background: 40,
            noise_sigma: 5.0,
            absent: None,
            seed: 7,
        }
    }
}

impl SquareSequence {
    fn top_left(&self, i: usize) -> (f64, f64) {
        (
            (self.start.0 + self.velocity.0 * i as f64).round(),
            (self.start.1 + self.velocity.1 * i as f64).round(),
        )
    }

    pub fn is_visible(&self, i: usize) -> bool {
        !self.absent.as_ref().is_some_and(|r| r.contains(&i))
    }

    /// Ground-truth box of frame `i`, clipped to the frame; `None` when the
    /// square is absent or entirely outside.
    pub fn truth(&self, i: usize) -> Option<BoundingBox> {
        if !self.is_visible(i) {
            return None;
        }
        let (x, y) = self.top_left(i);
        let s = self.size as f64;
        let x0 = x.max(0.0);
        let y0 = y.max(0.0);
        let x1 = (x + s).min(self.width as f64);
        let y1 = (y + s).min(self.height as f64);
        (x1 > x0 && y1 > y0).then(|| BoundingBox::from_top_left(x0, y0, x1 - x0, y1 - y0))
    }

    pub fn ground_truth(&self) -> GroundTruthTrack {
        GroundTruthTrack::new((0..self.frames).map(|i| self.truth(i)).collect())
    }

    pub fn frame(&self, i: usize) -> RgbImage {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i as u64));
        let noise = Normal::new(0.0, self.noise_sigma.max(0.0)).expect("finite sigma");
        let truth = self.truth(i);
        RgbImage::from_fn(self.width, self.height, |x, y| {
            let inside = truth.is_some_and(|b| {
                let (fx, fy) = (x as f64 + 0.5, y as f64 + 0.5);
                fx > b.left() && fx < b.right() && fy > b.top() && fy < b.bottom()
            });
            let base = if inside { self.foreground } else { self.background } as f64;
            let v = if self.noise_sigma > 0.0 {
                base + noise.sample(&mut rng)
            } else {
                base
            };
            let v = v.round().clamp(0.0, 255.0) as u8;
            Rgb([v, v, v])
        })
    }

    pub fn frames(&self) -> impl Iterator<Item = RgbImage> + '_ {
        (0..self.frames).map(move |i| self.frame(i))
    }
}
