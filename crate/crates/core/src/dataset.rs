//! Multi-resolution face ladders and their on-disk layout.
//!
//! A 96x96 aligned face is downsampled by each factor (Gaussian pre-blur with
//! sigma `0.5 * factor`, then decimation) and labelled with the densities of a
//! face of `96 / factor` pixels seen at a given pitch. Pitch is only a label:
//! no pose synthesis is attempted.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{density_from_face_pixels, DensityThreshold, PixelDensity};
use crate::imageio::{save_image, to_bytes, ImagePlane};
use crate::kernel::{convolve, discretize, BorderRule, KernelSpec};

pub const MANIFEST_SCHEMA: &str = "ahgmm.dataset-manifest/1";
pub const SOURCE_SIZE: usize = 96;
pub const DEFAULT_FACTORS: [usize; 5] = [1, 2, 4, 8, 16];
pub const DEFAULT_PITCHES_DEG: [u32; 8] = [0, 10, 20, 30, 40, 50, 60, 70];

/// Faces at or below this many pixels across are never filtered.
pub const INHERENTLY_PROTECTED_SIZE: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct Rung {
    pub factor: usize,
    pub image: ImagePlane,
    pub density: PixelDensity,
    pub pitch_deg: f64,
    pub inherently_protected: bool,
}

impl Rung {
    /// Whether the filters act on this rung at threshold `thr`.
    pub fn needs_filtering(&self, thr: &DensityThreshold) -> bool {
        !self.inherently_protected && crate::geometry::gate(&self.density, thr)
    }
}

/// Downsamples `src` by an integer factor: Gaussian pre-blur with sigma
/// `0.5 * factor`, then keeps pixel `factor * i + factor / 2` on each axis.
pub fn downsample(src: &ImagePlane, factor: usize) -> Result<ImagePlane> {
    if factor == 0 || src.width() % factor != 0 || src.height() % factor != 0 {
        return Err(Error::Argument(format!(
            "factor {factor} does not divide a {}x{} image",
            src.width(),
            src.height()
        )));
    }
    if factor == 1 {
        return Ok(src.clone());
    }
    let blur = discretize(&KernelSpec::isotropic(0.5 * factor as f64)?)?;
    let smooth = convolve(src, &blur, BorderRule::Mirror);
    let (w, h) = (src.width() / factor, src.height() / factor);
    let off = factor / 2;
    let channels = smooth
        .channels()
        .iter()
        .map(|c| {
            (0..w * h)
                .map(|i| c[((i / w) * factor + off) * src.width() + (i % w) * factor + off])
                .collect()
        })
        .collect();
    ImagePlane::new(w, h, channels, src.r_max())
}

/// One rung per factor for a 96x96 source face labelled with `pitch_deg`.
pub fn build_ladder(src: &ImagePlane, factors: &[usize], pitch_deg: f64) -> Result<Vec<Rung>> {
    if src.width() != SOURCE_SIZE || src.height() != SOURCE_SIZE {
        return Err(Error::Argument(format!(
            "ladder source must be {SOURCE_SIZE}x{SOURCE_SIZE}, got {}x{}",
            src.width(),
            src.height()
        )));
    }
    if !(0.0..90.0).contains(&pitch_deg) {
        return Err(Error::Argument(format!("pitch must be in [0, 90) degrees, got {pitch_deg}")));
    }
    factors
        .iter()
        .map(|&factor| {
            let image = downsample(src, factor)?;
            let size = SOURCE_SIZE / factor;
            Ok(Rung {
                factor,
                density: density_from_face_pixels(size as f64, pitch_deg.to_radians())?,
                pitch_deg,
                inherently_protected: size <= INHERENTLY_PROTECTED_SIZE,
                image,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub image: String,
    /// Path relative to the dataset root.
    pub path: String,
    pub pitch_deg: u32,
    pub factor: usize,
    pub width: usize,
    pub height: usize,
    pub rho_h: f64,
    pub rho_v: f64,
    pub inherently_protected: bool,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub generator: String,
    pub resampler: String,
    /// `(name, sha256 of the 8-bit source pixels)` per source image.
    pub sources: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: String,
    pub provenance: Provenance,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let manifest: Self = serde_json::from_str(&text).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        if manifest.schema != MANIFEST_SCHEMA {
            return Err(Error::Format {
                path: path.to_path_buf(),
                reason: format!("unsupported manifest schema {:?}", manifest.schema),
            });
        }
        Ok(manifest)
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Directory of one rung relative to the dataset root, e.g. `10deg/48x48`.
pub fn rung_dir(pitch_deg: u32, width: usize, height: usize) -> PathBuf {
    PathBuf::from(format!("{pitch_deg}deg")).join(format!("{width}x{height}"))
}

/// Writes every ladder rung of every image under every pitch label, plus
/// `manifest.json`, below `root`. Returns the manifest path.
pub fn layout_dataset(
    root: impl AsRef<Path>,
    images: &[(String, ImagePlane)],
    factors: &[usize],
    pitches_deg: &[u32],
) -> Result<PathBuf> {
    let root = root.as_ref();
    let per_image: Vec<Vec<ManifestEntry>> = images
        .par_iter()
        .map(|(name, src)| {
            let mut entries = Vec::new();
            for &pitch in pitches_deg {
                for rung in build_ladder(src, factors, pitch as f64)? {
                    let (w, h) = (rung.image.width(), rung.image.height());
                    let rel = rung_dir(pitch, w, h).join(format!("{name}.png"));
                    let dest = root.join(&rel);
                    if let Some(parent) = dest.parent() {
                        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
                    }
                    save_image(&rung.image, &dest)?;
                    entries.push(ManifestEntry {
                        image: name.clone(),
                        path: rel.to_string_lossy().replace('\\', "/"),
                        pitch_deg: pitch,
                        factor: rung.factor,
                        width: w,
                        height: h,
                        rho_h: rung.density.rho_h,
                        rho_v: rung.density.rho_v,
                        inherently_protected: rung.inherently_protected,
                        sha256: sha256_hex(&to_bytes(&rung.image)),
                    });
                }
            }
            Ok(entries)
        })
        .collect::<Result<_>>()?;
    let manifest = Manifest {
        schema: MANIFEST_SCHEMA.into(),
        provenance: Provenance {
            generator: format!("ahgmm {}", env!("CARGO_PKG_VERSION")),
            resampler: "gaussian pre-blur sigma=0.5*factor (mirror border), decimate at offset factor/2"
                .into(),
            sources: images
                .iter()
                .map(|(name, img)| (name.clone(), sha256_hex(&to_bytes(img))))
                .collect(),
        },
        entries: per_image.into_iter().flatten().collect(),
    };
    let path = root.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
