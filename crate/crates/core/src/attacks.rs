//! Reconstruction and parrot attacks against protected faces.
//!
//! Reconstruction uses frequency-domain Wiener deconvolution with a scalar
//! noise-to-signal ratio. The face is first extended by whole-sample mirror
//! reflection to period `2n - 2` per axis; on that domain, mirrored
//! correlation with a symmetric kernel is exactly a circular convolution, so
//! the deconvolution sees no artificial seams at the face boundary.
//!
//! Against the hopping filter, each block is deconvolved with its own mixture
//! kernel applied to the whole face, and only that block's pixels are kept:
//! the attacker necessarily treats the neighbouring blocks as if they had been
//! blurred by the same kernel.

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::Serialize;

use crate::baselines::filter_agb;
use crate::error::{Error, Result};
use crate::filter::{apply_plan, global_smoothing_spec, plan_for_face};
use crate::fourier::{mirror_extend, mirror_len, Fft2};
use crate::geometry::{gate, DensityThreshold, FaceRegion, PixelDensity};
use crate::hopping::{derive_plan, partition_dims, HoppingConfig, HoppingPlan};
use crate::imageio::{crop, paste, ImagePlane};
use crate::kernel::{discretize, KernelGrid, KernelSpec, Rect};

/// Smallest noise-to-signal ratio used in the Wiener denominator.
pub const NSR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AdversaryKind {
    /// Knows the filter sizing rule and uses the optimal zero-mean kernel.
    Optimal,
    /// Knows the hopping algorithm but guesses the key.
    Pseudo,
    /// Knows the hopping algorithm and the key (or the plan itself).
    Accurate,
}

impl std::str::FromStr for AdversaryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "optimal" => Ok(Self::Optimal),
            "pseudo" => Ok(Self::Pseudo),
            "accurate" => Ok(Self::Accurate),
            other => Err(Error::Argument(format!("unknown adversary kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdversaryModel {
    pub kind: AdversaryKind,
    /// Hopping parameters and key: the guessed key for `Pseudo`, the true one for `Accurate`.
    pub hopping: Option<HoppingConfig>,
    /// The genuine plan; takes precedence over `hopping` for `Accurate`.
    pub plan: Option<HoppingPlan>,
}

impl AdversaryModel {
    pub fn optimal() -> Self {
        Self {
            kind: AdversaryKind::Optimal,
            hopping: None,
            plan: None,
        }
    }

    pub fn pseudo(guess: HoppingConfig) -> Self {
        Self {
            kind: AdversaryKind::Pseudo,
            hopping: Some(guess),
            plan: None,
        }
    }

    pub fn accurate(truth: HoppingConfig) -> Self {
        Self {
            kind: AdversaryKind::Accurate,
            hopping: Some(truth),
            plan: None,
        }
    }

    pub fn accurate_from_plan(plan: HoppingPlan) -> Self {
        Self {
            kind: AdversaryKind::Accurate,
            hopping: None,
            plan: Some(plan),
        }
    }

    fn plan_for(&self, face: &FaceRegion, sigma_o: &KernelSpec) -> Result<HoppingPlan> {
        if let (AdversaryKind::Accurate, Some(plan)) = (self.kind, &self.plan) {
            return Ok(plan.clone());
        }
        let cfg = self.hopping.as_ref().ok_or_else(|| {
            Error::Argument(format!("{:?} adversary needs a seed or a plan", self.kind))
        })?;
        let n = partition_dims(face.width, face.height, cfg.q_h, cfg.q_v).len();
        derive_plan(sigma_o, n, cfg)
    }
}

/// Mirror-extended Fourier domain of one face.
struct WienerDomain {
    width: usize,
    height: usize,
    ext_w: usize,
    ext_h: usize,
    fft: Fft2,
    /// `exp(2 pi i k x / ext_w)` for every face column `x`, row-major in `x`.
    twiddle_x: Vec<Complex64>,
    /// `exp(2 pi i k y / ext_h)` for every face row `y`, row-major in `y`.
    twiddle_y: Vec<Complex64>,
    roots_x: Vec<Complex64>,
    roots_y: Vec<Complex64>,
}

/// Frequency response of a kernel, kept factored when the kernel is a sum of
/// separable terms.
enum Transfer {
    Separable(Vec<(f64, Vec<Complex64>, Vec<Complex64>)>),
    Dense(Vec<Complex64>),
}

impl Transfer {
    fn at(&self, kx: usize, ky: usize, ext_w: usize) -> Complex64 {
        match self {
            Transfer::Separable(terms) => terms
                .iter()
                .map(|(w, th, tv)| th[kx] * tv[ky] * *w)
                .sum(),
            Transfer::Dense(t) => t[ky * ext_w + kx],
        }
    }
}

fn twiddles(positions: usize, roots: &[Complex64]) -> Vec<Complex64> {
    let n = roots.len();
    (0..positions)
        .flat_map(|p| (0..n).map(move |k| roots[(k * p) % n]))
        .collect()
}

impl WienerDomain {
    fn new(width: usize, height: usize) -> Self {
        let (ext_w, ext_h) = (mirror_len(width), mirror_len(height));
        let (roots_x, roots_y) = (roots_of_unity(ext_w), roots_of_unity(ext_h));
        Self {
            width,
            height,
            ext_w,
            ext_h,
            fft: Fft2::new(ext_w, ext_h),
            twiddle_x: twiddles(width, &roots_x),
            twiddle_y: twiddles(height, &roots_y),
            roots_x,
            roots_y,
        }
    }

    fn spectrum(&self, data: &[f64]) -> Vec<Complex64> {
        self.fft.forward_real(&mirror_extend(data, self.width, self.height))
    }

    /// Transfer function of correlating with `grid` on the extended domain.
    fn transfer(&self, grid: &KernelGrid) -> Transfer {
        let (w, h) = (self.ext_w, self.ext_h);
        if !grid.terms().is_empty() {
            return Transfer::Separable(
                grid.terms()
                    .iter()
                    .map(|t| (t.weight, axis_transfer(&t.h, &self.roots_x), axis_transfer(&t.v, &self.roots_y)))
                    .collect(),
            );
        }
        let mut psf = vec![Complex64::new(0.0, 0.0); w * h];
        let (rh, rv) = (grid.radius_h() as isize, grid.radius_v() as isize);
        for dv in -rv..=rv {
            for dh in -rh..=rh {
                let x = (-dh).rem_euclid(w as isize) as usize;
                let y = (-dv).rem_euclid(h as isize) as usize;
                psf[y * w + x] += grid.at(dh, dv);
            }
        }
        self.fft.forward(&mut psf);
        Transfer::Dense(psf)
    }

    fn wiener(g: Complex64, p: Complex64, nsr: f64) -> Complex64 {
        p.conj() * g / (p.norm_sqr() + nsr)
    }

    /// Whole-face Wiener deconvolution, cropped back to the face.
    fn deconvolve(&self, data: &[f64], grid: &KernelGrid, nsr: f64) -> Vec<f64> {
        let transfer = self.transfer(grid);
        let mut x = self.spectrum(data);
        for ky in 0..self.ext_h {
            for kx in 0..self.ext_w {
                let i = ky * self.ext_w + kx;
                x[i] = Self::wiener(x[i], transfer.at(kx, ky, self.ext_w), nsr);
            }
        }
        self.fft.inverse(&mut x);
        let mut out = Vec::with_capacity(self.width * self.height);
        for y in 0..self.height {
            out.extend(x[y * self.ext_w..y * self.ext_w + self.width].iter().map(|c| c.re));
        }
        out
    }

    /// Wiener restoration of `spectrum` with `transfer`, evaluated only on the
    /// pixels of `rect`.
    ///
    /// The restored spectrum is Hermitian, so rows `ky` and `ext_h - ky` of the
    /// inverse DFT contribute complex conjugates; only the lower half of the
    /// rows is visited and the real part doubled.
    fn restore_block(&self, spectrum: &[Complex64], transfer: &Transfer, nsr: f64, rect: Rect) -> Vec<f64> {
        let (w, h) = (self.ext_w, self.ext_h);
        let mut out = vec![0.0; rect.area()];
        let mut row = vec![Complex64::new(0.0, 0.0); w];
        let mut row_at_x = vec![Complex64::new(0.0, 0.0); rect.width];
        for ky in 0..=h / 2 {
            let fold = if ky == 0 || 2 * ky == h { 1.0 } else { 2.0 };
            for (kx, r) in row.iter_mut().enumerate() {
                *r = Self::wiener(spectrum[ky * w + kx], transfer.at(kx, ky, w), nsr);
            }
            for (xi, acc) in row_at_x.iter_mut().enumerate() {
                let tw = &self.twiddle_x[(rect.x + xi) * w..(rect.x + xi + 1) * w];
                *acc = row.iter().zip(tw).map(|(a, b)| a * b).sum();
            }
            for yi in 0..rect.height {
                let t = self.twiddle_y[(rect.y + yi) * h + ky] * fold;
                for (o, s) in out[yi * rect.width..(yi + 1) * rect.width].iter_mut().zip(&row_at_x) {
                    *o += (s * t).re;
                }
            }
        }
        let scale = 1.0 / (w * h) as f64;
        out.iter_mut().for_each(|v| *v *= scale);
        out
    }
}

/// `exp(2 pi i m / n)` for `m` in `0..n`.
fn roots_of_unity(n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|m| {
            let phase = 2.0 * std::f64::consts::PI * m as f64 / n as f64;
            Complex64::new(phase.cos(), phase.sin())
        })
        .collect()
}

/// DFT of a centred 1-D kernel used as a correlation, over `roots.len()` samples.
fn axis_transfer(taps: &[f64], roots: &[Complex64]) -> Vec<Complex64> {
    let n = roots.len() as isize;
    let r = (taps.len() as isize - 1) / 2;
    (0..n)
        .map(|k| {
            taps.iter()
                .enumerate()
                .filter(|(_, &t)| t != 0.0)
                .map(|(i, &t)| roots[(k * (i as isize - r)).rem_euclid(n) as usize] * t)
                .sum()
        })
        .collect()
}

/// Wiener-deconvolves a whole plane with a single kernel.
pub fn wiener_deconvolve(img: &ImagePlane, grid: &KernelGrid, nsr: f64) -> Result<ImagePlane> {
    let nsr = effective_nsr(nsr)?;
    let domain = WienerDomain::new(img.width(), img.height());
    img.map_channels(|data| Ok(domain.deconvolve(data, grid, nsr)))
}

fn effective_nsr(nsr: f64) -> Result<f64> {
    if !nsr.is_finite() || nsr < 0.0 {
        return Err(Error::Argument(format!("nsr must be finite and >= 0, got {nsr}")));
    }
    Ok(nsr.max(NSR_FLOOR))
}

/// Deconvolves every block with its own mixture kernel, keeping only that block.
fn deconvolve_blocks(patch: &ImagePlane, plan: &HoppingPlan, nsr: f64) -> Result<ImagePlane> {
    let (w, h) = (patch.width(), patch.height());
    let domain = WienerDomain::new(w, h);
    let spectra: Vec<Vec<Complex64>> = patch.channels().iter().map(|c| domain.spectrum(c)).collect();
    let blocks = partition_dims(w, h, plan.q_h, plan.q_v);
    let restored: Vec<Vec<Vec<f64>>> = blocks
        .par_iter()
        .enumerate()
        .map(|(n, &rect)| {
            let transfer = domain.transfer(&plan.mixture(n)?);
            Ok(spectra
                .iter()
                .map(|g| domain.restore_block(g, &transfer, nsr, rect))
                .collect())
        })
        .collect::<Result<_>>()?;
    let mut channels = vec![vec![0.0; w * h]; patch.num_channels()];
    for (rect, per_channel) in blocks.iter().zip(restored) {
        for (dst, src) in channels.iter_mut().zip(per_channel) {
            for row in 0..rect.height {
                let d = (rect.y + row) * w + rect.x;
                dst[d..d + rect.width].copy_from_slice(&src[row * rect.width..(row + 1) * rect.width]);
            }
        }
    }
    let r_max = patch.r_max();
    channels.iter_mut().flatten().for_each(|v| *v = v.clamp(0.0, r_max));
    ImagePlane::new(w, h, channels, r_max)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttackReport {
    pub kind: AdversaryKind,
    pub nsr: f64,
    pub n_regions: Option<usize>,
    pub seed_fingerprint: Option<String>,
}

/// Reconstructs the face of a protected image under the given adversary model.
///
/// `assumed_sigma_o` is the zero-mean kernel the adversary believes was the
/// optimal one. The output is clamped to `[0, r_max]`.
pub fn attack_inverse(
    img_protected: &ImagePlane,
    face: &FaceRegion,
    adversary: &AdversaryModel,
    assumed_sigma_o: &KernelSpec,
    nsr: f64,
) -> Result<ImagePlane> {
    attack_inverse_with_report(img_protected, face, adversary, assumed_sigma_o, nsr).map(|(img, _)| img)
}

pub fn attack_inverse_with_report(
    img_protected: &ImagePlane,
    face: &FaceRegion,
    adversary: &AdversaryModel,
    assumed_sigma_o: &KernelSpec,
    nsr: f64,
) -> Result<(ImagePlane, AttackReport)> {
    let nsr = effective_nsr(nsr)?;
    if face.width == 0 || face.height == 0 {
        return Err(Error::Argument("face region is empty".into()));
    }
    let patch = crop(img_protected, face)?;
    let mut report = AttackReport {
        kind: adversary.kind,
        nsr,
        n_regions: None,
        seed_fingerprint: None,
    };
    let restored = match adversary.kind {
        AdversaryKind::Optimal => wiener_deconvolve(&patch, &discretize(assumed_sigma_o)?, nsr)?,
        AdversaryKind::Pseudo | AdversaryKind::Accurate => {
            let plan = adversary.plan_for(face, assumed_sigma_o)?;
            if partition_dims(face.width, face.height, plan.q_h, plan.q_v).len() != plan.n_regions() {
                return Err(Error::DimensionMismatch("plan does not match the face size".into()));
            }
            report.n_regions = Some(plan.n_regions());
            report.seed_fingerprint = Some(plan.seed_fingerprint.clone());
            // Undo the de-blocking pass first, then the per-block mixtures.
            let global = discretize(&global_smoothing_spec(&plan)?)?;
            let domain = WienerDomain::new(patch.width(), patch.height());
            let (w, h) = (patch.width(), patch.height());
            let unsmoothed = ImagePlane::from_parts_unchecked(
                w,
                h,
                patch.channels().iter().map(|c| domain.deconvolve(c, &global, nsr)).collect(),
                patch.r_max(),
            );
            deconvolve_blocks(&unsmoothed, &plan, nsr)?
        }
    };
    Ok((paste(&restored, img_protected, face)?, report))
}

/// Filters a gallery image the way the adversary believes probes were protected.
pub fn attack_parrot_transform(
    img_gallery: &ImagePlane,
    face: &FaceRegion,
    adversary: &AdversaryModel,
    density: &PixelDensity,
    thr: &DensityThreshold,
) -> Result<ImagePlane> {
    match adversary.kind {
        AdversaryKind::Optimal => filter_agb(img_gallery, face, density, thr),
        AdversaryKind::Pseudo | AdversaryKind::Accurate => {
            if !gate(density, thr) {
                crop(img_gallery, face)?;
                return Ok(img_gallery.clone());
            }
            let plan = match (&adversary.plan, &adversary.hopping) {
                (Some(plan), _) if adversary.kind == AdversaryKind::Accurate => plan.clone(),
                (_, Some(cfg)) => plan_for_face(face, density, thr, cfg)?
                    .expect("gate checked above"),
                _ => {
                    return Err(Error::Argument(format!(
                        "{:?} adversary needs a seed or a plan",
                        adversary.kind
                    )))
                }
            };
            apply_plan(img_gallery, face, &plan, true)
        }
    }
}
