//! Benchmark metrics and evaluation harnesses.
//!
//! Frames where the ground truth is absent are left out of every rate. A
//! frame where the truth is present but the tracker reports itself lost
//! counts with an infinite center error and zero overlap.

use image::RgbImage;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::raster::BoundingBox;
use crate::synthetic::SquareSequence;
use crate::tracker::{track_sequence, FrameResult, TrackerConfig};

/// Center-error threshold of the headline precision, in pixels.
pub const PRECISION_THRESHOLD: f64 = 20.0;
/// Overlap threshold of the headline success rate.
pub const SUCCESS_THRESHOLD: f64 = 0.5;
pub const DEFAULT_TRE_SEGMENTS: usize = 20;

/// Per-frame ground truth; `None` marks a frame without a visible target.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct GroundTruthTrack {
    entries: Vec<Option<BoundingBox>>,
}

impl GroundTruthTrack {
    pub fn new(entries: Vec<Option<BoundingBox>>) -> Self {
        GroundTruthTrack { entries }
    }

    pub fn entries(&self) -> &[Option<BoundingBox>] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Truth for frames `start..`.
    pub fn suffix(&self, start: usize) -> GroundTruthTrack {
        GroundTruthTrack {
            entries: self.entries[start.min(self.entries.len())..].to_vec(),
        }
    }
}

/// Random-access frames, so evaluation can start anywhere in a sequence.
pub trait FrameSource {
    fn len(&self) -> usize;
    fn frame(&self, index: usize) -> Result<RgbImage>;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl FrameSource for SquareSequence {
    fn len(&self) -> usize {
        self.frames
    }

    fn frame(&self, index: usize) -> Result<RgbImage> {
        Ok(SquareSequence::frame(self, index))
    }
}

impl FrameSource for [RgbImage] {
    fn len(&self) -> usize {
        <[RgbImage]>::len(self)
    }

    fn frame(&self, index: usize) -> Result<RgbImage> {
        Ok(self[index].clone())
    }
}

/// Center location error.
pub fn cle(predicted: &BoundingBox, truth: &BoundingBox) -> f64 {
    (predicted.cx - truth.cx).hypot(predicted.cy - truth.cy)
}

/// Intersection over union.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let iw = (a.right().min(b.right()) - a.left().max(b.left())).max(0.0);
    let ih = (a.bottom().min(b.bottom()) - a.top().max(b.top())).max(0.0);
    let inter = iw * ih;
    // Areas from the same edges as the intersection, so iou(a, a) is exactly 1.
    let edge_area = |r: &BoundingBox| (r.right() - r.left()) * (r.bottom() - r.top());
    let union = edge_area(a) + edge_area(b) - inter;
    if inter <= 0.0 || union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

/// Center error and overlap of one scored frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrameScore {
    pub cle: f64,
    pub iou: f64,
    pub lost: bool,
}

/// Scores per frame, `None` where the truth is absent.
pub fn frame_scores(results: &[FrameResult], truth: &GroundTruthTrack) -> Result<Vec<Option<FrameScore>>> {
    if results.len() != truth.len() {
        return Err(Error::Input(format!(
            "{} results but {} ground-truth entries",
            results.len(),
            truth.len()
        )));
    }
    Ok(results
        .iter()
        .zip(truth.entries())
        .map(|(r, t)| {
            t.map(|t| match r.bbox {
                Some(b) => FrameScore {
                    cle: cle(&b, &t),
                    iou: iou(&b, &t),
                    lost: false,
                },
                None => FrameScore {
                    cle: f64::INFINITY,
                    iou: 0.0,
                    lost: true,
                },
            })
        })
        .collect())
}

fn rate(scores: &[Option<FrameScore>], hit: impl Fn(&FrameScore) -> bool) -> f64 {
    let scored: Vec<_> = scores.iter().flatten().collect();
    if scored.is_empty() {
        return 0.0;
    }
    scored.iter().filter(|s| hit(s)).count() as f64 / scored.len() as f64
}

/// Fraction of scored frames with center error strictly below `threshold`.
pub fn precision_at(results: &[FrameResult], truth: &GroundTruthTrack, threshold: f64) -> Result<f64> {
    Ok(rate(&frame_scores(results, truth)?, |s| s.cle < threshold))
}

/// Fraction of scored frames with overlap strictly above `theta`.
pub fn success_at(results: &[FrameResult], truth: &GroundTruthTrack, theta: f64) -> Result<f64> {
    Ok(rate(&frame_scores(results, truth)?, |s| s.iou > theta))
}

/// `(threshold, value)` samples of a rate curve.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct MetricCurve {
    pub points: Vec<(f64, f64)>,
}

impl MetricCurve {
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.1)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Curves {
    /// Thresholds 0, 1, ..., 50 pixels.
    pub precision: MetricCurve,
    /// Thresholds 0, 0.05, ..., 1.
    pub success: MetricCurve,
    /// Mean of the success curve.
    pub auc: f64,
}

pub fn precision_thresholds() -> impl Iterator<Item = f64> {
    (0..=50).map(f64::from)
}

pub fn success_thresholds() -> impl Iterator<Item = f64> {
    (0..=20).map(|i| f64::from(i) / 20.0)
}

pub fn curves(results: &[FrameResult], truth: &GroundTruthTrack) -> Result<Curves> {
    let scores = frame_scores(results, truth)?;
    Ok(curves_from_scores(&scores))
}

fn curves_from_scores(scores: &[Option<FrameScore>]) -> Curves {
    let precision = MetricCurve {
        points: precision_thresholds()
            .map(|t| (t, rate(scores, |s| s.cle < t)))
            .collect(),
    };
    let success = MetricCurve {
        points: success_thresholds().map(|t| (t, rate(scores, |s| s.iou > t))).collect(),
    };
    let auc = success.values().sum::<f64>() / success.points.len() as f64;
    Curves {
        precision,
        success,
        auc,
    }
}

/// Frames-per-second statistics.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct FpsStats {
    /// Reciprocal of the median per-frame time.
    pub median: f64,
    /// Frames divided by total time.
    pub mean: f64,
    pub median_io: f64,
    pub mean_io: f64,
}

/// Throughput from the algorithmic timings, with I/O-inclusive alongside.
pub fn throughput(results: &[FrameResult]) -> FpsStats {
    let algo: Vec<f64> = results.iter().map(|r| r.ms).collect();
    let io: Vec<f64> = results.iter().map(|r| r.io_ms).collect();
    let (median, mean) = fps_of(&algo);
    let (median_io, mean_io) = fps_of(&io);
    FpsStats {
        median,
        mean,
        median_io,
        mean_io,
    }
}

fn fps_of(ms: &[f64]) -> (f64, f64) {
    if ms.is_empty() {
        return (0.0, 0.0);
    }
    // Clock resolution floor so an instantaneous frame does not read as infinite fps.
    const FLOOR_MS: f64 = 1e-6;
    let mut sorted: Vec<f64> = ms.iter().map(|&t| t.max(FLOOR_MS)).collect();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median_ms = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };
    let total: f64 = sorted.iter().sum();
    (1e3 / median_ms, n as f64 * 1e3 / total)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalSummary {
    pub frames: usize,
    /// Frames with the truth present.
    pub evaluated: usize,
    pub precision_20: f64,
    pub success_050: f64,
    /// Mean center error over scored frames where the tracker reported a box.
    pub cle_mean: f64,
    /// Mean overlap over scored frames, lost frames counting zero.
    pub iou_mean: f64,
    pub auc: f64,
    pub lost_frames: usize,
    pub fps: FpsStats,
}

/// Metrics of one run against its truth.
pub fn summarize(results: &[FrameResult], truth: &GroundTruthTrack) -> Result<(EvalSummary, Curves)> {
    let scores = frame_scores(results, truth)?;
    let scored: Vec<&FrameScore> = scores.iter().flatten().collect();
    let boxed: Vec<f64> = scored.iter().filter(|s| !s.lost).map(|s| s.cle).collect();
    let cle_mean = if boxed.is_empty() {
        f64::INFINITY
    } else {
        boxed.iter().sum::<f64>() / boxed.len() as f64
    };
    let iou_mean = if scored.is_empty() {
        0.0
    } else {
        scored.iter().map(|s| s.iou).sum::<f64>() / scored.len() as f64
    };
    let curves = curves_from_scores(&scores);
    let summary = EvalSummary {
        frames: results.len(),
        evaluated: scored.len(),
        precision_20: rate(&scores, |s| s.cle < PRECISION_THRESHOLD),
        success_050: rate(&scores, |s| s.iou > SUCCESS_THRESHOLD),
        cle_mean,
        iou_mean,
        auc: curves.auc,
        lost_frames: results.iter().filter(|r| r.bbox.is_none()).count(),
        fps: throughput(results),
    };
    Ok((summary, curves))
}

/// Output of a single run from one start frame.
#[derive(Clone, Debug)]
pub struct RunReport {
    pub start: usize,
    pub results: Vec<FrameResult>,
    pub summary: EvalSummary,
    pub curves: Curves,
}

fn run_from<S: FrameSource + ?Sized>(
    source: &S,
    truth: &GroundTruthTrack,
    config: &TrackerConfig,
    start: usize,
) -> Result<RunReport> {
    let frames = (start..source.len()).map(|i| source.frame(i));
    let mut results = track_sequence(frames, config)?;
    for r in &mut results {
        r.frame += start;
    }
    let (summary, curves) = summarize(&results, &truth.suffix(start))?;
    Ok(RunReport {
        start,
        results,
        summary,
        curves,
    })
}

fn check_truth<S: FrameSource + ?Sized>(source: &S, truth: &GroundTruthTrack) -> Result<()> {
    if source.is_empty() {
        return Err(Error::Input("sequence has no frames".into()));
    }
    if truth.is_empty() {
        return Err(Error::Input("ground truth is empty".into()));
    }
    if truth.len() != source.len() {
        return Err(Error::Input(format!(
            "{} frames but {} ground-truth entries",
            source.len(),
            truth.len()
        )));
    }
    Ok(())
}

/// One-pass evaluation: track from the first frame to the last.
pub fn run_ope<S: FrameSource + ?Sized>(
    source: &S,
    truth: &GroundTruthTrack,
    config: &TrackerConfig,
) -> Result<RunReport> {
    check_truth(source, truth)?;
    run_from(source, truth, config, 0)
}

/// Start frames for temporal robustness evaluation: frame 0 plus
/// `segments - 1` distinct others drawn uniformly with a seeded generator,
/// in increasing order.
pub fn tre_starts(len: usize, segments: usize, seed: u64) -> Result<Vec<usize>> {
    if segments == 0 {
        return Err(Error::Input("at least one segment is required".into()));
    }
    if segments > len {
        return Err(Error::Input(format!("{segments} segments for a {len}-frame sequence")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts: Vec<usize> = std::iter::once(0)
        .chain(
            index::sample(&mut rng, len - 1, segments - 1)
                .into_iter()
                .map(|i| i + 1),
        )
        .collect();
    starts.sort_unstable();
    Ok(starts)
}

#[derive(Clone, Debug)]
pub struct TreReport {
    pub segments: Vec<RunReport>,
    /// Equal-weight mean over segments.
    pub summary: EvalSummary,
    pub curves: Curves,
}

/// Temporal robustness evaluation: runs from several start frames to the end
/// and averages the per-segment metrics with equal weight.
pub fn run_tre<S: FrameSource + ?Sized>(
    source: &S,
    truth: &GroundTruthTrack,
    config: &TrackerConfig,
    segments: usize,
    seed: u64,
) -> Result<TreReport> {
    check_truth(source, truth)?;
    let starts = tre_starts(source.len(), segments, seed)?;
    let runs = starts
        .into_iter()
        .map(|s| run_from(source, truth, config, s))
        .collect::<Result<Vec<_>>>()?;
    let summary = average_summaries(runs.iter().map(|r| &r.summary));
    let curves = average_curves(runs.iter().map(|r| &r.curves));
    Ok(TreReport {
        segments: runs,
        summary,
        curves,
    })
}

fn average_summaries<'a>(items: impl Iterator<Item = &'a EvalSummary>) -> EvalSummary {
    let items: Vec<_> = items.collect();
    let n = items.len() as f64;
    let mean = |f: &dyn Fn(&EvalSummary) -> f64| items.iter().map(|s| f(s)).sum::<f64>() / n;
    EvalSummary {
        frames: items.iter().map(|s| s.frames).sum(),
        evaluated: items.iter().map(|s| s.evaluated).sum(),
        precision_20: mean(&|s| s.precision_20),
        success_050: mean(&|s| s.success_050),
        cle_mean: mean(&|s| s.cle_mean),
        iou_mean: mean(&|s| s.iou_mean),
        auc: mean(&|s| s.auc),
        lost_frames: items.iter().map(|s| s.lost_frames).sum(),
        fps: FpsStats {
            median: mean(&|s| s.fps.median),
            mean: mean(&|s| s.fps.mean),
            median_io: mean(&|s| s.fps.median_io),
            mean_io: mean(&|s| s.fps.mean_io),
        },
    }
}

fn average_curves<'a>(items: impl Iterator<Item = &'a Curves>) -> Curves {
    let items: Vec<_> = items.collect();
    let n = items.len() as f64;
    let avg = |pick: &dyn Fn(&Curves) -> &MetricCurve| MetricCurve {
        points: (0..pick(items[0]).points.len())
            .map(|i| {
                let t = pick(items[0]).points[i].0;
                (t, items.iter().map(|c| pick(c).points[i].1).sum::<f64>() / n)
            })
            .collect(),
    };
    let precision = avg(&|c| &c.precision);
    let success = avg(&|c| &c.success);
    let auc = items.iter().map(|c| c.auc).sum::<f64>() / n;
    Curves {
        precision,
        success,
        auc,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tracker::TrackStatus;

    fn result(frame: usize, bbox: Option<BoundingBox>, ms: f64) -> FrameResult {
        FrameResult {
            frame,
            status: if bbox.is_some() {
                TrackStatus::Tracking
            } else {
                TrackStatus::Lost
            },
            bbox,
            ms,
            io_ms: ms,
        }
    }

    fn at(cx: f64, cy: f64) -> BoundingBox {
        BoundingBox::new(cx, cy, 10.0, 10.0)
    }

    #[test]
    fn cle_examples() {
        assert_eq!(cle(&at(0.0, 0.0), &at(3.0, 4.0)), 5.0);
        assert_eq!(cle(&at(7.0, 2.0), &at(7.0, 2.0)), 0.0);
        assert_eq!(cle(&at(1.0, 1.0), &at(1.0, 2.0)), 1.0);
    }

    #[test]
    fn iou_examples() {
        let a = BoundingBox::from_top_left(0.0, 0.0, 2.0, 2.0);
        let b = BoundingBox::from_top_left(1.0, 0.0, 2.0, 2.0);
        assert_eq!(iou(&a, &a), 1.0);
        assert!((iou(&a, &b) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(iou(&a, &b), iou(&b, &a));
        let far = BoundingBox::from_top_left(10.0, 10.0, 2.0, 2.0);
        assert_eq!(iou(&a, &far), 0.0);
        let touching = BoundingBox::from_top_left(2.0, 0.0, 2.0, 2.0);
        assert_eq!(iou(&a, &touching), 0.0);
    }

    fn truth_at_origin(n: usize) -> GroundTruthTrack {
        GroundTruthTrack::new(vec![Some(at(0.0, 0.0)); n])
    }

    #[test]
    fn precision_counts() {
        let truth = truth_at_origin(3);
        let results = vec![
            result(0, Some(at(5.0, 0.0)), 1.0),
            result(1, Some(at(25.0, 0.0)), 1.0),
            result(2, Some(at(0.0, 10.0)), 1.0),
        ];
        assert!((precision_at(&results, &truth, 20.0).unwrap() - 2.0 / 3.0).abs() < 1e-15);

        let perfect: Vec<_> = (0..3).map(|i| result(i, Some(at(0.0, 0.0)), 1.0)).collect();
        assert_eq!(precision_at(&perfect, &truth, 20.0).unwrap(), 1.0);

        let with_lost = vec![
            result(0, Some(at(0.0, 0.0)), 1.0),
            result(1, None, 1.0),
            result(2, Some(at(0.0, 0.0)), 1.0),
        ];
        assert!((precision_at(&with_lost, &truth, 20.0).unwrap() - 2.0 / 3.0).abs() < 1e-15);

        assert!(matches!(
            precision_at(&with_lost[..2], &truth, 20.0),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn absent_truth_leaves_denominator() {
        let truth = GroundTruthTrack::new(vec![Some(at(0.0, 0.0)), None]);
        let results = vec![result(0, Some(at(0.0, 0.0)), 1.0), result(1, Some(at(90.0, 0.0)), 1.0)];
        assert_eq!(precision_at(&results, &truth, 20.0).unwrap(), 1.0);
    }

    #[test]
    fn success_counts() {
        // Boxes 10x10; shifting by dx gives IoU (10 - dx) / (10 + dx).
        let shift_for = |target: f64| 10.0 * (1.0 - target) / (1.0 + target);
        let truth = truth_at_origin(3);
        let results: Vec<_> = [0.6, 0.4, 0.9]
            .iter()
            .enumerate()
            .map(|(i, &t)| result(i, Some(at(shift_for(t), 0.0)), 1.0))
            .collect();
        assert!((success_at(&results, &truth, 0.5).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(success_at(&results, &truth, 0.0).unwrap(), 1.0);

        let lost: Vec<_> = (0..3).map(|i| result(i, None, 1.0)).collect();
        assert_eq!(success_at(&lost, &truth, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn curve_shapes() {
        let truth = truth_at_origin(4);
        let perfect: Vec<_> = (0..4).map(|i| result(i, Some(at(0.0, 0.0)), 1.0)).collect();
        let c = curves(&perfect, &truth).unwrap();
        assert_eq!(c.precision.points.len(), 51);
        assert_eq!(c.success.points.len(), 21);
        // CLE = 0 is not below a zero threshold.
        assert_eq!(c.precision.points[0].1, 0.0);
        assert!(c.precision.values().skip(1).all(|v| v == 1.0));
        assert!(c.success.values().take(20).all(|v| v == 1.0));
        assert_eq!(c.success.points[20], (1.0, 0.0));
        assert!((c.auc - 20.0 / 21.0).abs() < 1e-15);

        let lost: Vec<_> = (0..4).map(|i| result(i, None, 1.0)).collect();
        let c = curves(&lost, &truth).unwrap();
        assert!(c.precision.values().chain(c.success.values()).all(|v| v == 0.0));
        assert_eq!(c.auc, 0.0);
    }

    #[test]
    fn precision_step_placement() {
        let truth = truth_at_origin(1);
        let one = vec![result(0, Some(at(10.0, 0.0)), 1.0)];
        let c = curves(&one, &truth).unwrap();
        for &(t, v) in &c.precision.points {
            assert_eq!(v, if t >= 11.0 { 1.0 } else { 0.0 }, "threshold {t}");
        }
    }

    #[test]
    fn throughput_examples() {
        let rs: Vec<_> = (0..4).map(|i| result(i, None, 10.0)).collect();
        let f = throughput(&rs);
        assert!((f.median - 100.0).abs() < 1e-9 && (f.mean - 100.0).abs() < 1e-9);

        let single = throughput(&[result(0, None, 4.0)]);
        assert!((single.median - 250.0).abs() < 1e-9);

        let mixed: Vec<_> = [5.0, 10.0, 20.0]
            .iter()
            .enumerate()
            .map(|(i, &ms)| result(i, None, ms))
            .collect();
        assert!((throughput(&mixed).median - 100.0).abs() < 1e-9);
    }

    #[test]
    fn tre_start_sampling() {
        assert_eq!(tre_starts(10, 1, 3).unwrap(), vec![0]);
        let a = tre_starts(100, 20, 7).unwrap();
        assert_eq!(a, tre_starts(100, 20, 7).unwrap());
        assert_eq!(a.len(), 20);
        assert_eq!(a[0], 0);
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert!(a.iter().all(|&s| s < 100));
        assert_eq!(tre_starts(5, 5, 1).unwrap(), vec![0, 1, 2, 3, 4]);
        assert!(tre_starts(4, 5, 1).is_err());
        assert!(tre_starts(4, 0, 1).is_err());
    }

    #[test]
    fn suffix_slices_truth() {
        let t = GroundTruthTrack::new(vec![None, Some(at(1.0, 1.0)), Some(at(2.0, 2.0))]);
        assert_eq!(t.suffix(1).entries(), &t.entries()[1..]);
        assert!(t.suffix(9).is_empty());
    }

    #[test]
    fn harness_rejects_bad_truth() {
        let seq = SquareSequence {
            frames: 3,
            ..Default::default()
        };
        let config = TrackerConfig::default();
        assert!(matches!(
            run_ope(&seq, &GroundTruthTrack::default(), &config),
            Err(Error::Input(_))
        ));
        let short = GroundTruthTrack::new(vec![None; 2]);
        assert!(run_ope(&seq, &short, &config).is_err());
        assert!(run_tre(&seq, &seq.ground_truth(), &config, 4, 1).is_err());
    }

    #[test]
    fn single_frame_ope() {
        let seq = SquareSequence {
            frames: 1,
            ..Default::default()
        };
        let report = run_ope(&seq, &seq.ground_truth(), &TrackerConfig::default()).unwrap();
        assert_eq!(report.summary.frames, 1);
        assert_eq!(report.summary.evaluated, 1);
    }
}
