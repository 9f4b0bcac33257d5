//! Planar floating point images and their on-disk formats.
//!
//! Pixels are kept as `f64` intensities in `[0, r_max]`, one plane per colour
//! channel. Quantisation to 8 bits only happens in [`save_image`], which rounds
//! half to even.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ColorType, DynamicImage, ExtendedColorType, ImageEncoder, ImageReader};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::FaceRegion;

pub const DEFAULT_R_MAX: f64 = 255.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImagePlane {
    width: usize,
    height: usize,
    channels: Vec<Vec<f64>>,
    r_max: f64,
}

impl ImagePlane {
    /// Builds an image from row-major channel planes.
    pub fn new(width: usize, height: usize, channels: Vec<Vec<f64>>, r_max: f64) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::Argument("image needs at least one channel".into()));
        }
        if !(r_max > 0.0 && r_max.is_finite()) {
            return Err(Error::Argument(format!("r_max must be positive, got {r_max}")));
        }
        for plane in &channels {
            if plane.len() != width * height {
                return Err(Error::DimensionMismatch(format!(
                    "plane has {} samples, expected {}x{}",
                    plane.len(),
                    width,
                    height
                )));
            }
            if let Some(v) = plane.iter().find(|v| !(0.0..=r_max).contains(*v)) {
                return Err(Error::Argument(format!(
                    "intensity {v} outside [0, {r_max}]"
                )));
            }
        }
        Ok(Self {
            width,
            height,
            channels,
            r_max,
        })
    }

    /// Single-channel image with the default 8-bit dynamic range.
    pub fn gray(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(width, height, vec![data], DEFAULT_R_MAX)
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Result<Self> {
        Self::new(
            width,
            height,
            vec![vec![value; width * height]; channels.max(1)],
            DEFAULT_R_MAX,
        )
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        &self.channels[c]
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    pub fn get(&self, c: usize, x: usize, y: usize) -> f64 {
        self.channels[c][y * self.width + x]
    }

    /// Applies `f` to every channel plane independently. Results are clamped
    /// to `[0, r_max]` to absorb floating point drift of convex combinations.
    pub(crate) fn map_channels<F>(&self, mut f: F) -> Result<Self>
    where
        F: FnMut(&[f64]) -> Result<Vec<f64>>,
    {
        let r_max = self.r_max;
        let channels = self
            .channels
            .iter()
            .map(|plane| {
                f(plane).map(|mut out| {
                    out.iter_mut().for_each(|v| *v = v.clamp(0.0, r_max));
                    out
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            width: self.width,
            height: self.height,
            channels,
            r_max,
        })
    }

    pub(crate) fn from_parts_unchecked(
        width: usize,
        height: usize,
        channels: Vec<Vec<f64>>,
        r_max: f64,
    ) -> Self {
        debug_assert!(channels.iter().all(|c| c.len() == width * height));
        Self {
            width,
            height,
            channels,
            r_max,
        }
    }

    pub(crate) fn same_shape(&self, other: &Self) -> Result<()> {
        if self.width != other.width
            || self.height != other.height
            || self.channels.len() != other.channels.len()
        {
            return Err(Error::DimensionMismatch(format!(
                "{}x{}x{} vs {}x{}x{}",
                self.width,
                self.height,
                self.channels.len(),
                other.width,
                other.height,
                other.channels.len()
            )));
        }
        Ok(())
    }
}

/// Reads a PNG, binary PGM/PPM or JPEG file. 8-bit samples map to `0..=255` unchanged.
pub fn load_image(path: impl AsRef<Path>) -> Result<ImagePlane> {
    let path = path.as_ref();
    let reader = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    let decoded = reader.decode().map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::Format {
            path: path.to_path_buf(),
            reason: other.to_string(),
        },
    })?;
    from_dynamic(decoded, path)
}

fn from_dynamic(img: DynamicImage, path: &Path) -> Result<ImagePlane> {
    let (width, height) = (img.width() as usize, img.height() as usize);
    let channels = match img.color() {
        ColorType::L8 | ColorType::La8 => {
            let luma = img.to_luma8();
            vec![luma.as_raw().iter().map(|&v| f64::from(v)).collect()]
        }
        ColorType::Rgb8 | ColorType::Rgba8 => {
            let rgb = img.to_rgb8();
            let raw = rgb.as_raw();
            (0..3)
                .map(|c| raw.iter().skip(c).step_by(3).map(|&v| f64::from(v)).collect())
                .collect()
        }
        other => {
            return Err(Error::Format {
                path: path.to_path_buf(),
                reason: format!("unsupported sample layout {other:?}; only 8-bit images are handled"),
            })
        }
    };
    ImagePlane::new(width, height, channels, DEFAULT_R_MAX)
}

/// Quantises one intensity to 8 bits, rounding half to even.
pub fn quantize(value: f64, r_max: f64) -> u8 {
    let scaled = if r_max == DEFAULT_R_MAX {
        value
    } else {
        value * DEFAULT_R_MAX / r_max
    };
    scaled.round_ties_even().clamp(0.0, 255.0) as u8
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum OutputFormat {
    Png,
    Pgm,
    Ppm,
    Jpeg,
}

fn output_format(path: &Path) -> Result<OutputFormat> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default();
    match ext.as_str() {
        "png" => Ok(OutputFormat::Png),
        "pgm" => Ok(OutputFormat::Pgm),
        "ppm" | "pnm" => Ok(OutputFormat::Ppm),
        "jpg" | "jpeg" => Ok(OutputFormat::Jpeg),
        _ => Err(Error::Format {
            path: path.to_path_buf(),
            reason: format!("unknown output extension {ext:?}"),
        }),
    }
}

/// Interleaved 8-bit samples, as written to disk.
pub fn to_bytes(img: &ImagePlane) -> Vec<u8> {
    let n = img.width * img.height;
    let nc = img.channels.len();
    let mut out = Vec::with_capacity(n * nc);
    for i in 0..n {
        for plane in &img.channels {
            out.push(quantize(plane[i], img.r_max));
        }
    }
    out
}

/// Writes `img` as 8 bits per sample. PNG and PGM/PPM are lossless.
pub fn save_image(img: &ImagePlane, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let format = output_format(path)?;
    let color = match img.num_channels() {
        1 => ExtendedColorType::L8,
        3 => ExtendedColorType::Rgb8,
        n => {
            return Err(Error::Format {
                path: path.to_path_buf(),
                reason: format!("cannot encode {n} channels"),
            })
        }
    };
    let (w, h) = (img.width as u32, img.height as u32);
    let bytes = to_bytes(img);
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let writer = BufWriter::new(file);
    let encoded = match format {
        OutputFormat::Png => {
            image::codecs::png::PngEncoder::new(writer).write_image(&bytes, w, h, color)
        }
        OutputFormat::Pgm | OutputFormat::Ppm => {
            let subtype = if color == ExtendedColorType::L8 {
                if format == OutputFormat::Ppm {
                    return Err(Error::Format {
                        path: path.to_path_buf(),
                        reason: "PPM output needs three channels".into(),
                    });
                }
                PnmSubtype::Graymap(SampleEncoding::Binary)
            } else {
                if format == OutputFormat::Pgm {
                    return Err(Error::Format {
                        path: path.to_path_buf(),
                        reason: "PGM output needs a single channel".into(),
                    });
                }
                PnmSubtype::Pixmap(SampleEncoding::Binary)
            };
            PnmEncoder::new(writer)
                .with_subtype(subtype)
                .write_image(&bytes, w, h, color)
        }
        OutputFormat::Jpeg => {
            image::codecs::jpeg::JpegEncoder::new_with_quality(writer, 95)
                .write_image(&bytes, w, h, color)
        }
    };
    encoded.map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::Format {
            path: path.to_path_buf(),
            reason: other.to_string(),
        },
    })
}

fn check_bounds(img: &ImagePlane, region: &FaceRegion) -> Result<()> {
    let fits = region.width > 0
        && region.height > 0
        && region.x.checked_add(region.width).is_some_and(|r| r <= img.width)
        && region.y.checked_add(region.height).is_some_and(|b| b <= img.height);
    if fits {
        Ok(())
    } else {
        Err(Error::Bounds {
            x: region.x,
            y: region.y,
            width: region.width,
            height: region.height,
            image_width: img.width,
            image_height: img.height,
        })
    }
}

/// Copies the pixels covered by `region` into a new image.
pub fn crop(img: &ImagePlane, region: &FaceRegion) -> Result<ImagePlane> {
    check_bounds(img, region)?;
    let channels = img
        .channels
        .iter()
        .map(|plane| {
            let mut out = Vec::with_capacity(region.width * region.height);
            for y in region.y..region.y + region.height {
                let row = y * img.width;
                out.extend_from_slice(&plane[row + region.x..row + region.x + region.width]);
            }
            out
        })
        .collect();
    Ok(ImagePlane::from_parts_unchecked(
        region.width,
        region.height,
        channels,
        img.r_max,
    ))
}

/// Returns a copy of `dst` with `patch` written over `region`.
pub fn paste(patch: &ImagePlane, dst: &ImagePlane, region: &FaceRegion) -> Result<ImagePlane> {
    check_bounds(dst, region)?;
    if patch.width != region.width
        || patch.height != region.height
        || patch.num_channels() != dst.num_channels()
    {
        return Err(Error::DimensionMismatch(format!(
            "patch {}x{}x{} does not match region {}x{} of a {}-channel image",
            patch.width,
            patch.height,
            patch.num_channels(),
            region.width,
            region.height,
            dst.num_channels()
        )));
    }
    let mut out = dst.clone();
    for (plane, src) in out.channels.iter_mut().zip(&patch.channels) {
        for row in 0..region.height {
            let d = (region.y + row) * dst.width + region.x;
            plane[d..d + region.width]
                .copy_from_slice(&src[row * region.width..(row + 1) * region.width]);
        }
    }
    Ok(out)
}
