//! Image decoding and reduction to per-channel mean colors.
//!
//! Each image becomes one observation: the arithmetic mean of its pixels in
//! each channel, on the 0–255 scale, accumulated in exact integer arithmetic
//! before a single division. A directory tree with one subdirectory per
//! group maps onto labeled sample groups. Summaries persist in a CSV that
//! round-trips the mean vectors losslessly.

use std::fmt;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use image::{DynamicImage, GenericImageView};

use crate::colorimetry::{gamma_decode, UnitRgb, DEFAULT_CLAMP_EPS};
use crate::mvstat::{SampleGroup, StatError};

const SUMMARY_HEADER: [&str; 6] = ["group", "file", "n_pixels", "r_mean", "g_mean", "b_mean"];

#[derive(Debug)]
pub enum IngestError {
    /// Image has no pixels (possibly after cropping).
    EmptyImage(String),
    /// Image file could not be opened or decoded.
    Decode {
        path: PathBuf,
        message: String,
    },
    /// Root directory missing or not a directory.
    BadRoot(PathBuf),
    /// ROI fraction must lie in (0, 1].
    BadRoi(f64),
    /// Malformed summaries CSV.
    Csv {
        line: u64,
        message: String,
    },
    /// Summary fields violate their invariants.
    BadSummary {
        line: u64,
        message: String,
    },
    /// Groups rebuilt from CSV must satisfy sample-group invariants.
    Group(StatError),
    Io(io::Error),
}

impl fmt::Display for IngestError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IngestError::EmptyImage(source) => write!(f, "image {source} has no pixels"),
            IngestError::Decode { path, message } => {
                write!(f, "cannot decode {}: {message}", path.display())
            }
            IngestError::BadRoot(p) => write!(f, "{} is not a directory", p.display()),
            IngestError::BadRoi(r) => write!(f, "roi fraction {r} outside (0, 1]"),
            IngestError::Csv { line, message } => write!(f, "csv line {line}: {message}"),
            IngestError::BadSummary { line, message } => {
                write!(f, "csv line {line}: {message}")
            }
            IngestError::Group(e) => write!(f, "{e}"),
            IngestError::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for IngestError {}

impl From<io::Error> for IngestError {
    fn from(e: io::Error) -> Self {
        IngestError::Io(e)
    }
}

/// Knobs for image reduction.
#[derive(Debug, Clone, Copy)]
pub struct IngestOptions {
    /// Central crop fraction in (0, 1]; 1 keeps the whole image.
    pub roi_fraction: f64,
    /// Decode the transfer function per pixel and average in linear light
    /// instead of display values.
    pub linear_light: bool,
    /// Open-interval clamp width for the unit-scale mean.
    pub clamp_eps: f64,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            roi_fraction: 1.0,
            linear_light: false,
            clamp_eps: DEFAULT_CLAMP_EPS,
        }
    }
}

/// One image reduced to its mean color.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageSummary {
    /// Path or synthetic name the pixels came from.
    pub source: String,
    /// Per-channel mean on the 0–255 scale.
    pub mean_rgb_255: [f64; 3],
    /// The same mean scaled to the open unit cube.
    pub mean_rgb_unit: UnitRgb,
    pub pixel_count: u64,
}

/// Images of one directory, in lexicographic file order.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSummary {
    pub label: String,
    pub images: Vec<ImageSummary>,
}

impl GroupSummary {
    /// Observations on the 0–255 channel scale.
    pub fn observations_255(&self) -> Vec<[f64; 3]> {
        self.images.iter().map(|s| s.mean_rgb_255).collect()
    }

    /// Observations scaled into the open unit cube.
    pub fn observations_unit(&self) -> Vec<[f64; 3]> {
        self.images
            .iter()
            .map(|s| s.mean_rgb_unit.components())
            .collect()
    }

    pub fn to_sample_group_255(&self) -> Result<SampleGroup, StatError> {
        SampleGroup::new(self.label.clone(), self.observations_255())
    }

    pub fn to_sample_group_unit(&self) -> Result<SampleGroup, StatError> {
        SampleGroup::new(self.label.clone(), self.observations_unit())
    }
}

/// Outcome of walking a directory tree: surviving groups plus per-file and
/// per-group diagnostics.
#[derive(Debug, Default)]
pub struct IngestReport {
    pub groups: Vec<GroupSummary>,
    pub skipped_files: Vec<(PathBuf, String)>,
    pub rejected_groups: Vec<(String, String)>,
}

fn central_crop(img: &DynamicImage, fraction: f64) -> DynamicImage {
    if fraction >= 1.0 {
        return img.clone();
    }
    let (w, h) = img.dimensions();
    let cw = ((w as f64 * fraction).round() as u32).clamp(1, w);
    let ch = ((h as f64 * fraction).round() as u32).clamp(1, h);
    img.crop_imm((w - cw) / 2, (h - ch) / 2, cw, ch)
}

/// Reduces decoded pixels to their per-channel mean.
///
/// 8-bit channels accumulate as integers and divide once at the end; 16-bit
/// channels do the same and then rescale by 1/257 onto the 0–255 range.
/// With `linear_light` set, each pixel is transfer-decoded first and the
/// mean is taken in linear light (floating-point accumulation).
pub fn summarize_image(
    img: &DynamicImage,
    source: &str,
    options: &IngestOptions,
) -> Result<ImageSummary, IngestError> {
    if !(options.roi_fraction > 0.0 && options.roi_fraction <= 1.0) {
        return Err(IngestError::BadRoi(options.roi_fraction));
    }
    let img = central_crop(img, options.roi_fraction);
    let (w, h) = img.dimensions();
    let count = w as u64 * h as u64;
    if count == 0 {
        return Err(IngestError::EmptyImage(source.to_string()));
    }

    let mean_rgb_255 = if options.linear_light {
        let rgb = img.to_rgb8();
        let mut sums = [0.0f64; 3];
        for pixel in rgb.pixels() {
            for (sum, &value) in sums.iter_mut().zip(pixel.0.iter()) {
                *sum += gamma_decode(value as f64 / 255.0).expect("u8/255 lies in [0,1]");
            }
        }
        sums.map(|s| 255.0 * s / count as f64)
    } else {
        match img {
            DynamicImage::ImageRgb16(_)
            | DynamicImage::ImageRgba16(_)
            | DynamicImage::ImageLuma16(_)
            | DynamicImage::ImageLumaA16(_) => {
                let rgb = img.to_rgb16();
                let mut sums = [0u64; 3];
                for pixel in rgb.pixels() {
                    for (sum, &value) in sums.iter_mut().zip(pixel.0.iter()) {
                        *sum += value as u64;
                    }
                }
                sums.map(|s| s as f64 / count as f64 / 257.0)
            }
            _ => {
                let rgb = img.to_rgb8();
                let mut sums = [0u64; 3];
                for pixel in rgb.pixels() {
                    for (sum, &value) in sums.iter_mut().zip(pixel.0.iter()) {
                        *sum += value as u64;
                    }
                }
                sums.map(|s| s as f64 / count as f64)
            }
        }
    };

    let [r, g, b] = mean_rgb_255;
    let (mean_rgb_unit, _) = UnitRgb::clamped(r / 255.0, g / 255.0, b / 255.0, options.clamp_eps);
    Ok(ImageSummary {
        source: source.to_string(),
        mean_rgb_255,
        mean_rgb_unit,
        pixel_count: count,
    })
}

/// Decodes one file and reduces it.
pub fn summarize_path(path: &Path, options: &IngestOptions) -> Result<ImageSummary, IngestError> {
    let img = image::open(path).map_err(|e| IngestError::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    summarize_image(&img, &path.to_string_lossy(), options)
}

fn has_image_extension(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| {
            let e = e.to_ascii_lowercase();
            e == "png" || e == "jpg" || e == "jpeg"
        })
        .unwrap_or(false)
}

/// Walks the immediate subdirectories of `root`, one sample group per
/// subdirectory, label = directory name, images in lexicographic file
/// order. Undecodable images are reported and skipped; groups left with
/// fewer than two images are rejected; the run continues either way.
pub fn ingest_directory(root: &Path, options: &IngestOptions) -> Result<IngestReport, IngestError> {
    if !root.is_dir() {
        return Err(IngestError::BadRoot(root.to_path_buf()));
    }
    let mut dirs: Vec<PathBuf> = fs::read_dir(root)?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();

    let mut report = IngestReport::default();
    for dir in dirs {
        let label = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let mut files: Vec<PathBuf> = fs::read_dir(&dir)?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.is_file() && has_image_extension(p))
            .collect();
        files.sort();

        let mut images = Vec::new();
        for file in files {
            match summarize_path(&file, options) {
                Ok(summary) => images.push(summary),
                Err(e) => report.skipped_files.push((file, e.to_string())),
            }
        }
        if images.len() < 2 {
            report.rejected_groups.push((
                label,
                format!("{} decodable images, need at least 2", images.len()),
            ));
        } else {
            report.groups.push(GroupSummary { label, images });
        }
    }
    Ok(report)
}

/// Writes the summaries CSV: `group,file,n_pixels,r_mean,g_mean,b_mean`,
/// means on the 0–255 scale at 17 significant digits (lossless for f64).
pub fn write_summaries<W: Write>(groups: &[GroupSummary], writer: W) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(SUMMARY_HEADER).map_err(csv_error)?;
    for group in groups {
        for image in &group.images {
            let [r, g, b] = image.mean_rgb_255;
            w.write_record(&[
                group.label.clone(),
                image.source.clone(),
                image.pixel_count.to_string(),
                format!("{r:.16e}"),
                format!("{g:.16e}"),
                format!("{b:.16e}"),
            ])
            .map_err(csv_error)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_summaries_path(groups: &[GroupSummary], path: &Path) -> Result<(), IngestError> {
    write_summaries(groups, fs::File::create(path)?)
}

fn csv_error(e: csv::Error) -> IngestError {
    IngestError::Csv {
        line: e.position().map_or(0, |p| p.line()),
        message: e.to_string(),
    }
}

/// Reads the summaries CSV back; groups keep file order and appear in order
/// of first occurrence. A header-only file yields an empty list; a missing
/// header is an error.
pub fn read_summaries<R: Read>(reader: R) -> Result<Vec<GroupSummary>, IngestError> {
    read_summaries_eps(reader, DEFAULT_CLAMP_EPS)
}

pub fn read_summaries_eps<R: Read>(
    reader: R,
    clamp_eps: f64,
) -> Result<Vec<GroupSummary>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers().map_err(csv_error)?.clone();
    let names: Vec<&str> = header.iter().collect();
    if names.len() != SUMMARY_HEADER.len()
        || names
            .iter()
            .zip(SUMMARY_HEADER)
            .any(|(a, b)| !a.eq_ignore_ascii_case(b))
    {
        return Err(IngestError::Csv {
            line: 1,
            message: format!("expected header {SUMMARY_HEADER:?}, got {names:?}"),
        });
    }

    let mut groups: Vec<GroupSummary> = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != SUMMARY_HEADER.len() {
            return Err(IngestError::Csv {
                line,
                message: format!(
                    "expected {} fields, got {}",
                    SUMMARY_HEADER.len(),
                    record.len()
                ),
            });
        }
        let label = record[0].to_string();
        let source = record[1].to_string();
        let pixel_count: u64 = record[2].parse().map_err(|_| IngestError::BadSummary {
            line,
            message: format!("bad pixel count {:?}", &record[2]),
        })?;
        if pixel_count == 0 {
            return Err(IngestError::BadSummary {
                line,
                message: "pixel count must be at least 1".into(),
            });
        }
        let mut mean = [0.0f64; 3];
        for (slot, field) in mean.iter_mut().zip(record.iter().skip(3)) {
            *slot = field.parse().map_err(|_| IngestError::BadSummary {
                line,
                message: format!("bad mean value {field:?}"),
            })?;
            if !slot.is_finite() || *slot < 0.0 || *slot > 255.0 {
                return Err(IngestError::BadSummary {
                    line,
                    message: format!("mean {slot} outside [0, 255]"),
                });
            }
        }
        let (unit, _) =
            UnitRgb::clamped(mean[0] / 255.0, mean[1] / 255.0, mean[2] / 255.0, clamp_eps);
        let summary = ImageSummary {
            source,
            mean_rgb_255: mean,
            mean_rgb_unit: unit,
            pixel_count,
        };
        match groups.iter_mut().find(|g| g.label == label) {
            Some(group) => group.images.push(summary),
            _ => groups.push(GroupSummary {
                label,
                images: vec![summary],
            }),
        }
    }
    Ok(groups)
}

pub fn read_summaries_path(path: &Path) -> Result<Vec<GroupSummary>, IngestError> {
    read_summaries(fs::File::open(path)?)
}
