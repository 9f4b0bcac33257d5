//! Gaussian-blur baselines: fixed (FGB), adaptive anisotropic (AGB) and
//! space-variant radially decaying (SVGB).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    density_from_face_pixels, gate, DensityThreshold, FaceRegion, PixelDensity,
};
use crate::imageio::{crop, paste, ImagePlane};
use crate::kernel::{
    correlate_plane, discretize, optimal_sigma, BorderRule, ConvolutionPath, KernelGrid,
    KernelSpec, PlaneRef,
};

/// Zero-mean kernel that pushes `density` below `thr` on both axes.
pub fn optimal_kernel(density: &PixelDensity, thr: &DensityThreshold) -> Result<KernelSpec> {
    KernelSpec::zero_mean(
        optimal_sigma(density.rho_h, thr.rho_h_o)?,
        optimal_sigma(density.rho_v, thr.rho_v_o)?,
    )
}

/// Density of the reference face used by FGB: 96 px wide, frontal.
pub fn fgb_reference_density() -> PixelDensity {
    density_from_face_pixels(96.0, 0.0).expect("reference face is valid")
}

/// Blurs only the face region of `img` with `grid`, mirroring at the face boundary.
pub(crate) fn blur_region(img: &ImagePlane, face: &FaceRegion, grid: &KernelGrid) -> Result<ImagePlane> {
    let patch = crop(img, face)?;
    let (w, h) = (patch.width(), patch.height());
    let blurred = patch.map_channels(|data| {
        Ok(correlate_plane(
            PlaneRef::new(data, w, h),
            grid,
            BorderRule::Mirror,
            ConvolutionPath::Auto,
        ))
    })?;
    paste(&blurred, img, face)
}

/// Fixed Gaussian blur sized for `ref_density`, applied whatever the face's own density.
pub fn filter_fgb(
    img: &ImagePlane,
    face: &FaceRegion,
    ref_density: &PixelDensity,
    thr: &DensityThreshold,
) -> Result<ImagePlane> {
    let grid = discretize(&optimal_kernel(ref_density, thr)?)?;
    blur_region(img, face, &grid)
}

/// Adaptive anisotropic Gaussian blur; faces below threshold pass through.
pub fn filter_agb(
    img: &ImagePlane,
    face: &FaceRegion,
    density: &PixelDensity,
    thr: &DensityThreshold,
) -> Result<ImagePlane> {
    if !gate(density, thr) {
        crop(img, face)?;
        return Ok(img.clone());
    }
    let grid = discretize(&optimal_kernel(density, thr)?)?;
    blur_region(img, face, &grid)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvgbConfig {
    pub n_rings: usize,
    /// Fraction by which sigma shrinks from one ring to the next one out.
    pub decay: f64,
}

impl Default for SvgbConfig {
    fn default() -> Self {
        Self {
            n_rings: 4,
            decay: 0.05,
        }
    }
}

impl SvgbConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_rings == 0 || !(0.0..1.0).contains(&self.decay) {
            return Err(Error::Argument(format!(
                "SVGB needs at least one ring and decay in [0, 1), got {self:?}"
            )));
        }
        Ok(())
    }

    /// Isotropic sigma of every ring, innermost first.
    pub fn ring_sigmas(&self, sigma_0: f64) -> Vec<f64> {
        (0..self.n_rings)
            .map(|k| sigma_0 * (1.0 - self.decay).powi(k as i32))
            .collect()
    }
}

/// Ring of pixel `(x, y)` in a `width` x `height` face: concentric annuli of
/// equal radial width about the centre, out to half the diagonal.
pub fn ring_index(x: usize, y: usize, width: usize, height: usize, n_rings: usize) -> usize {
    let dx = x as f64 + 0.5 - width as f64 / 2.0;
    let dy = y as f64 + 0.5 - height as f64 / 2.0;
    let max_r = (width as f64).hypot(height as f64) / 2.0;
    let k = (dx.hypot(dy) / (max_r / n_rings as f64)).floor() as usize;
    k.min(n_rings - 1)
}

/// Space-variant blur whose isotropic sigma decays geometrically from the face centre outwards.
pub fn filter_svgb(
    img: &ImagePlane,
    face: &FaceRegion,
    density: &PixelDensity,
    thr: &DensityThreshold,
    cfg: &SvgbConfig,
) -> Result<ImagePlane> {
    cfg.validate()?;
    if !gate(density, thr) {
        crop(img, face)?;
        return Ok(img.clone());
    }
    let opt = optimal_kernel(density, thr)?;
    let sigmas = cfg.ring_sigmas(opt.sigma_h.max(opt.sigma_v));
    let grids = sigmas
        .iter()
        .map(|&s| discretize(&KernelSpec::isotropic(s)?))
        .collect::<Result<Vec<_>>>()?;
    let patch = crop(img, face)?;
    let (w, h) = (patch.width(), patch.height());
    let rings: Vec<usize> = (0..w * h)
        .map(|i| ring_index(i % w, i / w, w, h, cfg.n_rings))
        .collect();
    let blurred = patch.map_channels(|data| {
        let plane = PlaneRef::new(data, w, h);
        let mut out = vec![0.0; w * h];
        for (k, grid) in grids.iter().enumerate() {
            if !rings.contains(&k) {
                continue;
            }
            let full = correlate_plane(plane, grid, BorderRule::Mirror, ConvolutionPath::Auto);
            for (i, v) in full.into_iter().enumerate() {
                if rings[i] == k {
                    out[i] = v;
                }
            }
        }
        Ok(out)
    })?;
    paste(&blurred, img, face)
}
