//! Files in and out: frame directories, ground-truth text, `key = value`
//! configuration, CSV/summary artifacts and PNG overlays.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use glob::Pattern;
use image::{Rgb, RgbImage};

use crate::error::{Error, Result};
use crate::eval::{Curves, EvalSummary, FrameScore, FrameSource, GroundTruthTrack, MetricCurve};
use crate::raster::BoundingBox;
use crate::tracker::{FrameResult, TrackStatus, TrackerConfig};

pub const DEFAULT_FRAME_PATTERN: &str = "*.jpg|*.png";

/// Ground-truth file names picked up automatically from a sequence directory.
const GROUNDTRUTH_NAMES: [&str; 2] = ["groundtruth_rect.txt", "groundtruth.txt"];

/// An ordered list of frame files. Frames are decoded on demand.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceManifest {
    pub name: String,
    pub frames: Vec<PathBuf>,
    pub groundtruth: Option<PathBuf>,
}

impl FrameSource for SequenceManifest {
    fn len(&self) -> usize {
        self.frames.len()
    }

    fn frame(&self, index: usize) -> Result<RgbImage> {
        load_frame(&self.frames[index])
    }
}

impl SequenceManifest {
    pub fn iter_frames(&self) -> impl Iterator<Item = Result<RgbImage>> + '_ {
        self.frames.iter().map(|p| load_frame(p))
    }
}

pub fn load_frame(path: &Path) -> Result<RgbImage> {
    image::open(path)
        .map(|img| img.to_rgb8())
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
}

/// Collects frames in `dir` whose file names match any of the `|`-separated
/// glob alternatives in `pattern`, in natural order. Falls back to an `img/`
/// subdirectory (the usual benchmark layout) when `dir` itself has none.
pub fn load_sequence(dir: &Path, pattern: &str) -> Result<SequenceManifest> {
    let patterns = pattern
        .split('|')
        .map(|p| Pattern::new(p.trim()).map_err(|e| Error::Parameter(format!("bad frame pattern {p:?}: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    let mut frames = matching_files(dir, &patterns)?;
    let img_dir = dir.join("img");
    if frames.is_empty() && img_dir.is_dir() {
        frames = matching_files(&img_dir, &patterns)?;
    }
    if frames.is_empty() {
        return Err(Error::Input(format!(
            "no frames matching {pattern:?} in {}",
            dir.display()
        )));
    }
    frames.sort_by(|a, b| natural_cmp(&file_stem(a), &file_stem(b)).then_with(|| a.cmp(b)));
    let groundtruth = GROUNDTRUTH_NAMES.iter().map(|n| dir.join(n)).find(|p| p.is_file());
    let name = dir
        .canonicalize()
        .ok()
        .and_then(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .unwrap_or_else(|| dir.display().to_string());
    Ok(SequenceManifest {
        name,
        frames,
        groundtruth,
    })
}

fn matching_files(dir: &Path, patterns: &[Pattern]) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if !path.is_file() {
            continue;
        }
        let name = entry.file_name();
        let name = name.to_string_lossy();
        if patterns.iter().any(|p| p.matches(&name)) {
            out.push(path);
        }
    }
    Ok(out)
}

fn file_stem(p: &Path) -> String {
    p.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Orders strings with embedded numbers by numeric value, so `img_2`
/// precedes `img_10`. Ties in value (`007` vs `7`) fall back to plain
/// byte order to keep the ordering total.
pub fn natural_cmp(a: &str, b: &str) -> Ordering {
    let (mut x, mut y) = (a.as_bytes(), b.as_bytes());
    loop {
        match (x.first(), y.first()) {
            (None, None) => return a.cmp(b),
            (None, Some(_)) => return Ordering::Less,
            (Some(_), None) => return Ordering::Greater,
            (Some(c), Some(d)) if c.is_ascii_digit() && d.is_ascii_digit() => {
                let (nx, rx) = split_digits(x);
                let (ny, ry) = split_digits(y);
                let tx = trim_zeros(nx);
                let ty = trim_zeros(ny);
                let ord = tx.len().cmp(&ty.len()).then_with(|| tx.cmp(ty));
                if ord != Ordering::Equal {
                    return ord;
                }
                x = rx;
                y = ry;
            }
            (Some(c), Some(d)) => {
                if c != d {
                    return c.cmp(d);
                }
                x = &x[1..];
                y = &y[1..];
            }
        }
    }
}

fn split_digits(s: &[u8]) -> (&[u8], &[u8]) {
    let n = s.iter().take_while(|c| c.is_ascii_digit()).count();
    s.split_at(n)
}

fn trim_zeros(s: &[u8]) -> &[u8] {
    let n = s.iter().take_while(|&&c| c == b'0').count();
    &s[n..]
}

/// Reads a ground-truth file: one `x,y,w,h` box per frame (top-left corner,
/// original pixels), fields separated by commas, tabs or spaces. A line of
/// `NaN`s or the word `absent` marks a frame without the target.
pub fn parse_groundtruth(path: &Path, frame_count: usize) -> Result<GroundTruthTrack> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_groundtruth_str(&text, path, frame_count)
}

pub fn parse_groundtruth_str(text: &str, path: &Path, frame_count: usize) -> Result<GroundTruthTrack> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines: Vec<&str> = text.lines().collect();
    while lines.last().is_some_and(|l| l.trim().is_empty()) {
        lines.pop();
    }
    if lines.is_empty() {
        return Err(Error::Input(format!("{}: ground truth is empty", path.display())));
    }
    let mut entries = Vec::with_capacity(lines.len());
    for (i, raw) in lines.iter().enumerate() {
        let line_no = i + 1;
        let fields: Vec<&str> = raw
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|f| !f.is_empty())
            .collect();
        if fields.len() == 1 && fields[0].eq_ignore_ascii_case("absent") {
            entries.push(None);
            continue;
        }
        if fields.len() != 4 {
            return Err(parse_err(line_no, format!("expected 4 fields, found {}", fields.len())));
        }
        let values = fields
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| parse_err(line_no, format!("not a number: {f:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        let nans = values.iter().filter(|v| v.is_nan()).count();
        if nans == 4 {
            entries.push(None);
            continue;
        }
        if nans > 0 || values.iter().any(|v| v.is_infinite()) {
            return Err(parse_err(line_no, "mix of numbers and NaN".into()));
        }
        let (x, y, w, h) = (values[0], values[1], values[2], values[3]);
        if w < 1.0 || h < 1.0 {
            return Err(parse_err(line_no, format!("box size {w}x{h} is below one pixel")));
        }
        entries.push(Some(BoundingBox::from_top_left(x, y, w, h)));
    }
    if entries.len() != frame_count {
        return Err(Error::Input(format!(
            "{}: {} ground-truth lines for {} frames",
            path.display(),
            entries.len(),
            frame_count
        )));
    }
    Ok(GroundTruthTrack::new(entries))
}

/// Serializes a track in the format read by [`parse_groundtruth`].
pub fn format_groundtruth(track: &GroundTruthTrack) -> String {
    let mut out = String::new();
    for entry in track.entries() {
        match entry {
            Some(b) => {
                let _ = writeln!(out, "{},{},{},{}", b.left(), b.top(), b.w, b.h);
            }
            None => out.push_str("NaN,NaN,NaN,NaN\n"),
        }
    }
    out
}

/// Applies `key = value` lines to `base`. Blank lines and `#` comments are
/// skipped; unknown keys and unparsable values are errors.
pub fn parse_config(text: &str, base: TrackerConfig) -> Result<TrackerConfig> {
    let mut config = base;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Parameter(format!("config line {}: expected `key = value`", i + 1)))?;
        set_config_value(&mut config, key.trim(), value.trim())
            .map_err(|e| Error::Parameter(format!("config line {}: {e}", i + 1)))?;
    }
    config.validate()?;
    Ok(config)
}

/// Sets one configuration field by name.
pub fn set_config_value(config: &mut TrackerConfig, key: &str, value: &str) -> std::result::Result<(), String> {
    fn num<T: std::str::FromStr>(key: &str, value: &str) -> std::result::Result<T, String> {
        value.parse().map_err(|_| format!("invalid value {value:?} for {key}"))
    }
    match key {
        "delta" => config.delta = num(key, value)?,
        "passes" => config.passes = num(key, value)?,
        "refresh_interval" => config.refresh_interval = num(key, value)?,
        "block" => config.block = num(key, value)?,
        "lambda" => config.lambda = num(key, value)?,
        "se_rows" => config.se_rows = num(key, value)?,
        "se_cols" => config.se_cols = num(key, value)?,
        "q_diag" => config.q_diag = num(key, value)?,
        "r_diag" => config.r_diag = num(key, value)?,
        "max_dim" => config.max_dim = num(key, value)?,
        "min_contrast" => config.min_contrast = num(key, value)?,
        "global_gate" => config.global_gate = num(key, value)?,
        _ => return Err(format!("unknown key {key:?}")),
    }
    Ok(())
}

/// One row of `results.csv`. Box in top-left form, original pixels.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub frame: usize,
    pub status: TrackStatus,
    pub bbox: Option<BoundingBox>,
    pub cle: Option<f64>,
    pub iou: Option<f64>,
    pub ms: Option<f64>,
}

/// Everything written for one run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunArtifacts {
    pub rows: Vec<ResultRow>,
    pub curves: Option<Curves>,
    /// Ordered `key=value` pairs for `summary.txt`.
    pub summary: Vec<(String, String)>,
}

impl RunArtifacts {
    /// Assembles artifacts from tracker output. `scores` aligns with
    /// `results` when ground truth is available. Timings are left out when
    /// `with_timings` is false, which makes every CSV reproducible byte for
    /// byte.
    pub fn new(
        results: &[FrameResult],
        scores: Option<&[Option<FrameScore>]>,
        summary: Option<(&EvalSummary, &Curves)>,
        with_timings: bool,
    ) -> Self {
        let rows = results
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let score = scores.and_then(|s| s[i]);
                ResultRow {
                    frame: r.frame,
                    status: r.status,
                    bbox: r.bbox,
                    cle: score.map(|s| s.cle),
                    iou: score.map(|s| s.iou),
                    ms: with_timings.then_some(r.ms),
                }
            })
            .collect();
        let mut kv: Vec<(String, String)> = Vec::new();
        let mut put = |k: &str, v: String| kv.push((k.to_string(), v));
        put("frames", results.len().to_string());
        put(
            "lost_frames",
            results.iter().filter(|r| r.bbox.is_none()).count().to_string(),
        );
        if let Some((s, _)) = summary {
            put("evaluated", s.evaluated.to_string());
            put("precision_20", fmt4(s.precision_20));
            put("success_050", fmt4(s.success_050));
            put("cle_mean", fmt4(s.cle_mean));
            put("iou_mean", fmt4(s.iou_mean));
            put("auc", fmt4(s.auc));
        }
        let fps = crate::eval::throughput(results);
        put("fps_median", fmt4(fps.median));
        put("fps_mean", fmt4(fps.mean));
        put("fps_median_io", fmt4(fps.median_io));
        put("fps_mean_io", fmt4(fps.mean_io));
        RunArtifacts {
            rows,
            curves: summary.map(|(_, c)| c.clone()),
            summary: kv,
        }
    }

    /// Sets or replaces one summary entry.
    pub fn set_summary(&mut self, key: &str, value: String) {
        match self.summary.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = value,
            None => self.summary.push((key.to_string(), value)),
        }
    }
}

fn fmt4(v: f64) -> String {
    format!("{v:.4}")
}

fn opt4(v: Option<f64>) -> String {
    v.map(fmt4).unwrap_or_default()
}

pub fn results_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from("frame,status,x,y,w,h,cle,iou,ms\n");
    for r in rows {
        let (x, y, w, h) = match r.bbox {
            Some(b) => (fmt4(b.left()), fmt4(b.top()), fmt4(b.w), fmt4(b.h)),
            None => Default::default(),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.frame,
            r.status.as_str(),
            x,
            y,
            w,
            h,
            opt4(r.cle),
            opt4(r.iou),
            opt4(r.ms)
        );
    }
    out
}

pub fn curve_csv(curve: &MetricCurve) -> String {
    let mut out = String::from("threshold,value\n");
    for &(t, v) in &curve.points {
        let _ = writeln!(out, "{},{}", fmt4(t), fmt4(v));
    }
    out
}

pub fn summary_text(summary: &[(String, String)]) -> String {
    summary.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
}

/// Writes `results.csv`, the two curve files (when scored) and
/// `summary.txt` into `dir`, creating it if needed. Returns the paths written.
pub fn write_artifacts(artifacts: &RunArtifacts, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = vec![("results.csv", results_csv(&artifacts.rows))];
    if let Some(c) = &artifacts.curves {
        files.push(("precision_curve.csv", curve_csv(&c.precision)));
        files.push(("success_curve.csv", curve_csv(&c.success)));
    }
    files.push(("summary.txt", summary_text(&artifacts.summary)));
    let mut written = Vec::new();
    for (name, body) in files {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

pub const PREDICTED_COLOR: Rgb<u8> = Rgb([0, 255, 0]);
pub const TRUTH_COLOR: Rgb<u8> = Rgb([255, 0, 0]);
const STAMP_COLOR: Rgb<u8> = Rgb([255, 255, 0]);

/// Draws the predicted box, the ground truth if any, and a status stamp.
pub fn render_overlay(frame: &RgbImage, result: &FrameResult, truth: Option<&BoundingBox>) -> RgbImage {
    let mut out = frame.clone();
    if let Some(t) = truth {
        draw_rect(&mut out, t, TRUTH_COLOR);
    }
    if let Some(b) = &result.bbox {
        draw_rect(&mut out, b, PREDICTED_COLOR);
    }
    let label = match result.status {
        TrackStatus::Tracking => "TRACK",
        TrackStatus::Lost => "LOST",
    };
    draw_text(&mut out, 3, 3, label, 2, STAMP_COLOR);
    out
}

pub fn write_overlay(image: &RgbImage, path: &Path) -> Result<()> {
    image.save(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

fn draw_rect(img: &mut RgbImage, b: &BoundingBox, color: Rgb<u8>) {
    let (w, h) = img.dimensions();
    if w == 0 || h == 0 {
        return;
    }
    let clamp = |v: f64, hi: u32| (v.round().max(0.0) as u32).min(hi - 1);
    let x0 = clamp(b.left(), w);
    let y0 = clamp(b.top(), h);
    let x1 = clamp(b.right() - 1.0, w).max(x0);
    let y1 = clamp(b.bottom() - 1.0, h).max(y0);
    for x in x0..=x1 {
        img.put_pixel(x, y0, color);
        img.put_pixel(x, y1, color);
    }
    for y in y0..=y1 {
        img.put_pixel(x0, y, color);
        img.put_pixel(x1, y, color);
    }
}

/// 5x7 glyphs for the status stamps, one byte per row, low 5 bits used.
fn glyph(c: char) -> [u8; 7] {
    match c {
        'A' => [0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11],
        'C' => [0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E],
        'K' => [0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11],
        'L' => [0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F],
        'O' => [0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E],
        'R' => [0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11],
        'S' => [0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E],
        'T' => [0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04],
        _ => [0; 7],
    }
}

fn draw_text(img: &mut RgbImage, x: u32, y: u32, text: &str, scale: u32, color: Rgb<u8>) {
    let (w, h) = img.dimensions();
    for (k, c) in text.chars().enumerate() {
        let gx = x + k as u32 * 6 * scale;
        for (row, bits) in glyph(c).iter().enumerate() {
            for col in 0..5u32 {
                if bits & (0x10 >> col) == 0 {
                    continue;
                }
                for dy in 0..scale {
                    for dx in 0..scale {
                        let (px, py) = (gx + col * scale + dx, y + row as u32 * scale + dy);
                        if px < w && py < h {
                            img.put_pixel(px, py, color);
                        }
                    }
                }
            }
        }
    }
}
