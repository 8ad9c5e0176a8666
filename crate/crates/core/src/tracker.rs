//! The predict / localize / correct loop.
//!
//! The first frame is localized from whole-image saliency, with no manual
//! initialization. Every later frame predicts the box with the motion model,
//! refreshes saliency only inside the inflated prediction, extracts a box
//! there and folds it back in as a measurement. Every `refresh_interval`
//! frames the whole map is recomputed; a lost tracker uses those frames to
//! search the whole image again.

use std::time::Instant;

use image::RgbImage;

use crate::error::{Error, Result};
use crate::kalman::{self, KalmanModel, Measurement, MotionState, StateCovariance};
use crate::postprocess::{self, ExtractConfig, StructuringElement};
use crate::raster::{self, BoundingBox, GrayGrid, Region, ScaleTransform};
use crate::saliency::{self, DistanceMaps};

#[derive(Clone, Debug, PartialEq)]
pub struct TrackerConfig {
    /// Per-side inflation of the predicted box, as a fraction of its size.
    pub delta: f64,
    pub passes: usize,
    pub refresh_interval: usize,
    pub block: usize,
    pub lambda: f64,
    pub se_rows: usize,
    pub se_cols: usize,
    pub q_diag: f64,
    pub r_diag: f64,
    pub max_dim: usize,
    /// Regions whose largest raw distance falls below this report no target.
    pub min_contrast: f64,
    /// Intersect the local threshold with the region's Otsu level.
    pub global_gate: bool,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            delta: 0.25,
            passes: saliency::DEFAULT_PASSES,
            refresh_interval: 10,
            block: postprocess::DEFAULT_BLOCK,
            lambda: postprocess::DEFAULT_LAMBDA,
            se_rows: 5,
            se_cols: 3,
            q_diag: kalman::DEFAULT_Q,
            r_diag: kalman::DEFAULT_R,
            max_dim: 300,
            min_contrast: 10.0,
            global_gate: true,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Parameter(format!("{name} must be > 0, got {v}")))
            }
        };
        if !(self.delta.is_finite() && self.delta >= 0.0) {
            return Err(Error::Parameter(format!("delta must be >= 0, got {}", self.delta)));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::Parameter(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.min_contrast.is_finite() && self.min_contrast >= 0.0) {
            return Err(Error::Parameter(format!(
                "min_contrast must be >= 0, got {}",
                self.min_contrast
            )));
        }
        positive("q_diag", self.q_diag)?;
        positive("r_diag", self.r_diag)?;
        for (name, v) in [
            ("passes", self.passes),
            ("refresh_interval", self.refresh_interval),
            ("max_dim", self.max_dim),
        ] {
            if v == 0 {
                return Err(Error::Parameter(format!("{name} must be >= 1")));
            }
        }
        if self.block.is_multiple_of(2) {
            return Err(Error::Parameter(format!("block must be odd, got {}", self.block)));
        }
        StructuringElement::new(self.se_rows, self.se_cols)?;
        Ok(())
    }

    pub fn extract_config(&self) -> Result<ExtractConfig> {
        Ok(ExtractConfig {
            block: self.block,
            lambda: self.lambda,
            se: StructuringElement::new(self.se_rows, self.se_cols)?,
            global_gate: self.global_gate,
        })
    }

    pub fn model(&self) -> Result<KalmanModel> {
        KalmanModel::constant_velocity(self.q_diag, self.r_diag)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrackStatus {
    Tracking,
    Lost,
}

impl TrackStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            TrackStatus::Tracking => "tracking",
            TrackStatus::Lost => "lost",
        }
    }
}

/// Outcome of one frame. `bbox` is in original-resolution pixels and is
/// present exactly when the status is tracking.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameResult {
    pub frame: usize,
    pub bbox: Option<BoundingBox>,
    pub status: TrackStatus,
    /// Algorithmic time: grayscale conversion through correction.
    pub ms: f64,
    /// Including frame decode, when the caller measured it.
    pub io_ms: f64,
}

impl FrameResult {
    /// Equality ignoring wall-clock timings.
    pub fn same_outcome(&self, other: &FrameResult) -> bool {
        self.frame == other.frame && self.status == other.status && self.bbox == other.bbox
    }
}

/// Everything carried from one frame to the next.
#[derive(Clone, Debug)]
pub struct TrackerState {
    pub motion: MotionState,
    pub covariance: StateCovariance,
    pub maps: DistanceMaps,
    pub frame_index: usize,
    pub frames_since_refresh: usize,
    pub status: TrackStatus,
    pub scale: ScaleTransform,
    /// Original frame size.
    pub frame_dims: (u32, u32),
}

pub struct Tracker {
    config: TrackerConfig,
    extract: ExtractConfig,
    model: KalmanModel,
    state: TrackerState,
}

impl Tracker {
    /// Localizes the target on the first frame from whole-image saliency.
    pub fn initialize(first_frame: &RgbImage, config: TrackerConfig) -> Result<(Tracker, FrameResult)> {
        let started = Instant::now();
        config.validate()?;
        let extract = config.extract_config()?;
        let model = config.model()?;
        let (gray, scale) = working_image(first_frame, config.max_dim)?;
        let maps = saliency::full_saliency(&gray, config.passes)?;
        let detection = localize(&maps, &gray.full_region(), &config, &extract)?;
        let (motion, covariance, status) = match detection {
            Some(b) => {
                let (s, g) = kalman::init_filter(&b);
                (s, g, TrackStatus::Tracking)
            }
            None => {
                let (w, h) = (gray.width() as f64, gray.height() as f64);
                let center = BoundingBox::new(w / 2.0, h / 2.0, (w / 4.0).max(1.0), (h / 4.0).max(1.0));
                let (s, g) = kalman::init_filter(&center);
                (s, g, TrackStatus::Lost)
            }
        };
        let tracker = Tracker {
            config,
            extract,
            model,
            state: TrackerState {
                motion,
                covariance,
                maps,
                frame_index: 0,
                frames_since_refresh: 0,
                status,
                scale,
                frame_dims: first_frame.dimensions(),
            },
        };
        let result = tracker.report(started);
        Ok((tracker, result))
    }

    /// Advances the tracker by one frame.
    pub fn process_frame(&mut self, frame: &RgbImage) -> Result<FrameResult> {
        let started = Instant::now();
        if frame.dimensions() != self.state.frame_dims {
            return Err(Error::Input(format!(
                "frame is {:?}, sequence started at {:?}",
                frame.dimensions(),
                self.state.frame_dims
            )));
        }
        let (gray, _) = working_image(frame, self.config.max_dim)?;
        let st = &mut self.state;
        st.frame_index += 1;
        st.frames_since_refresh += 1;

        let (prior, prior_cov) = kalman::predict(&st.motion, &st.covariance, &self.model)?;
        let search = raster::expand_region(&prior.to_box(), self.config.delta, gray.width(), gray.height());
        let refresh = st.frames_since_refresh >= self.config.refresh_interval;
        if refresh {
            st.maps = saliency::full_saliency(&gray, self.config.passes)?;
            st.frames_since_refresh = 0;
        } else {
            saliency::local_update_in_place(&mut st.maps, &gray, &search, self.config.passes)?;
        }

        match localize(&st.maps, &search, &self.config, &self.extract)? {
            Some(b) => {
                let (s, g) = kalman::correct(&prior, &prior_cov, &Measurement::from(b), &self.model)?;
                st.motion = s;
                st.covariance = g;
                st.status = TrackStatus::Tracking;
            }
            None => {
                st.motion = prior;
                st.covariance = prior_cov;
                st.status = TrackStatus::Lost;
            }
        }

        if st.status == TrackStatus::Lost && refresh {
            if let Some(b) = localize(&st.maps, &gray.full_region(), &self.config, &self.extract)? {
                let (s, g) = kalman::init_filter(&b);
                st.motion = s;
                st.covariance = g;
                st.status = TrackStatus::Tracking;
                st.frames_since_refresh = 0;
            }
        }
        Ok(self.report(started))
    }

    fn report(&self, started: Instant) -> FrameResult {
        let st = &self.state;
        let bbox = match st.status {
            TrackStatus::Tracking => {
                let (w, h) = st.frame_dims;
                Some(st.scale.to_original(&st.motion.to_box()).clip_to(w as f64, h as f64))
            }
            TrackStatus::Lost => None,
        };
        let ms = started.elapsed().as_secs_f64() * 1e3;
        FrameResult {
            frame: st.frame_index,
            bbox,
            status: st.status,
            ms,
            io_ms: ms,
        }
    }

    pub fn state(&self) -> &TrackerState {
        &self.state
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }
}

fn working_image(frame: &RgbImage, max_dim: usize) -> Result<(GrayGrid, ScaleTransform)> {
    let gray = raster::to_luma(frame)?;
    raster::resize_max_dim(&gray, max_dim)
}

/// Box of the salient target inside `region`, or `None` when the region is
/// too flat to hold one.
pub fn localize(
    maps: &DistanceMaps,
    region: &Region,
    config: &TrackerConfig,
    extract: &ExtractConfig,
) -> Result<Option<BoundingBox>> {
    let d = &maps.distance;
    let mut peak = 0.0f32;
    for y in region.y0..region.y1() {
        for &v in &d.data()[d.index(region.x0, y)..][..region.w] {
            if !v.is_finite() {
                return Ok(None);
            }
            peak = peak.max(v);
        }
    }
    if (peak as f64) < config.min_contrast {
        return Ok(None);
    }
    let normalized = raster::normalize_to_u8(d, region)?;
    postprocess::extract_target_box(&normalized, region, extract)
}

/// Whole-image saliency map of a single frame, as 8-bit.
pub fn detect_saliency(frame: &RgbImage, config: &TrackerConfig) -> Result<GrayGrid> {
    config.validate()?;
    let (gray, _) = working_image(frame, config.max_dim)?;
    let maps = saliency::full_saliency(&gray, config.passes)?;
    raster::normalize_to_u8(&maps.distance, &gray.full_region())
}

/// Runs the tracker over a frame source. Each item's decode time is folded
/// into `io_ms`; `ms` covers the tracker alone.
pub fn track_sequence<I>(frames: I, config: &TrackerConfig) -> Result<Vec<FrameResult>>
where
    I: IntoIterator<Item = Result<RgbImage>>,
{
    let mut frames = frames.into_iter();
    let mut results = Vec::new();
    let t0 = Instant::now();
    let first = frames
        .next()
        .ok_or_else(|| Error::Input("sequence has no frames".into()))??;
    let decode_ms = t0.elapsed().as_secs_f64() * 1e3;
    let (mut tracker, mut r) = Tracker::initialize(&first, config.clone())?;
    r.io_ms = r.ms + decode_ms;
    results.push(r);
    loop {
        let t0 = Instant::now();
        let Some(frame) = frames.next() else { break };
        let frame = frame?;
        let decode_ms = t0.elapsed().as_secs_f64() * 1e3;
        let mut r = tracker.process_frame(&frame)?;
        r.io_ms = r.ms + decode_ms;
        results.push(r);
    }
    Ok(results)
}
