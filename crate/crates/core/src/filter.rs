//! The adaptive hopping Gaussian mixture (AHGMM) filter.
//!
//! Pipeline: gate the face on its pixel density, size the optimal kernel per
//! axis, tile the face into `Q_h x Q_v` blocks, filter every block with its own
//! seed-derived mixture kernel, smooth the whole face with a zero-mean Gaussian
//! of `sigma_o / Q` to hide block seams, and paste the result back.
//!
//! Every block reads its neighbourhood from the original face (mirrored at the
//! face boundary), so the result does not depend on the order in which blocks
//! are processed.

use rayon::prelude::*;
use serde::Serialize;

use crate::baselines::optimal_kernel;
use crate::error::{Error, Result};
use crate::geometry::{gate, DensityThreshold, FaceRegion, PixelDensity};
use crate::hopping::{derive_plan, partition_dims, HoppingConfig, HoppingPlan};
use crate::imageio::{crop, paste, ImagePlane};
use crate::kernel::{
    correlate_plane, correlate_rect, discretize, BorderRule, ConvolutionPath, KernelSpec,
    PlaneRef,
};
use crate::metrics::{psnr, serialize_db};

pub const REPORT_SCHEMA: &str = "ahgmm.filter-report/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AhgmmOptions {
    /// Apply the de-blocking Gaussian after local filtering.
    pub global_smoothing: bool,
    /// Force every alpha and beta to zero.
    pub disable_hops: bool,
}

impl Default for AhgmmOptions {
    fn default() -> Self {
        Self {
            global_smoothing: true,
            disable_hops: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FilterReport {
    pub schema: &'static str,
    pub algo: String,
    pub gated: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_o: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_regions: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub global_sigma: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none", serialize_with = "serialize_db")]
    pub psnr_vs_original: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed_fingerprint: Option<String>,
}

impl FilterReport {
    pub fn passthrough(algo: &str) -> Self {
        Self {
            schema: REPORT_SCHEMA,
            algo: algo.to_string(),
            gated: false,
            sigma_o: None,
            n_regions: None,
            global_sigma: None,
            psnr_vs_original: None,
            seed_fingerprint: None,
        }
    }
}

/// Plan the filter would use on `face`, or `None` when the face is below threshold.
pub fn plan_for_face(
    face: &FaceRegion,
    density: &PixelDensity,
    thr: &DensityThreshold,
    cfg: &HoppingConfig,
) -> Result<Option<HoppingPlan>> {
    if !gate(density, thr) {
        return Ok(None);
    }
    let sigma_o = optimal_kernel(density, thr)?;
    let n = partition_dims(face.width, face.height, cfg.q_h, cfg.q_v).len();
    derive_plan(&sigma_o, n, cfg).map(Some)
}

/// De-blocking kernel parameters: `sigma_o / Q` per axis.
pub fn global_smoothing_spec(plan: &HoppingPlan) -> Result<KernelSpec> {
    KernelSpec::zero_mean(
        plan.sigma_o.sigma_h / plan.q_h as f64,
        plan.sigma_o.sigma_v / plan.q_v as f64,
    )
}

fn check_plan_fits(face: &FaceRegion, plan: &HoppingPlan) -> Result<()> {
    let n = partition_dims(face.width, face.height, plan.q_h, plan.q_v).len();
    if n != plan.n_regions() {
        return Err(Error::DimensionMismatch(format!(
            "plan has {} regions but a {}x{} face tiles into {n}",
            plan.n_regions(),
            face.width,
            face.height
        )));
    }
    Ok(())
}

/// Filters each block of the cropped face with its mixture kernel.
fn local_filter_patch(patch: &ImagePlane, plan: &HoppingPlan) -> Result<ImagePlane> {
    let (w, h) = (patch.width(), patch.height());
    let blocks = partition_dims(w, h, plan.q_h, plan.q_v);
    let filtered: Vec<Vec<Vec<f64>>> = blocks
        .par_iter()
        .enumerate()
        .map(|(n, &rect)| {
            let grid = plan.mixture(n)?;
            Ok(patch
                .channels()
                .iter()
                .map(|data| {
                    correlate_rect(
                        PlaneRef::new(data, w, h),
                        &grid,
                        BorderRule::Mirror,
                        rect,
                        ConvolutionPath::Auto,
                    )
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let mut channels = vec![vec![0.0; w * h]; patch.num_channels()];
    for (rect, per_channel) in blocks.iter().zip(filtered) {
        for (dst, src) in channels.iter_mut().zip(per_channel) {
            for row in 0..rect.height {
                let d = (rect.y + row) * w + rect.x;
                dst[d..d + rect.width].copy_from_slice(&src[row * rect.width..(row + 1) * rect.width]);
            }
        }
    }
    let r_max = patch.r_max();
    channels
        .iter_mut()
        .flatten()
        .for_each(|v| *v = v.clamp(0.0, r_max));
    ImagePlane::new(w, h, channels, r_max)
}

/// Local (per-block) filtering only, with no de-blocking pass.
pub fn filter_region_local_only(
    img: &ImagePlane,
    face: &FaceRegion,
    plan: &HoppingPlan,
) -> Result<ImagePlane> {
    check_plan_fits(face, plan)?;
    let patch = crop(img, face)?;
    paste(&local_filter_patch(&patch, plan)?, img, face)
}

/// Applies the full filter with a given plan: local mixtures, then optionally
/// the de-blocking Gaussian.
pub fn apply_plan(
    img: &ImagePlane,
    face: &FaceRegion,
    plan: &HoppingPlan,
    global_smoothing: bool,
) -> Result<ImagePlane> {
    check_plan_fits(face, plan)?;
    let patch = crop(img, face)?;
    let mut out = local_filter_patch(&patch, plan)?;
    if global_smoothing {
        let grid = discretize(&global_smoothing_spec(plan)?)?;
        let (w, h) = (out.width(), out.height());
        out = out.map_channels(|data| {
            Ok(correlate_plane(
                PlaneRef::new(data, w, h),
                &grid,
                BorderRule::Mirror,
                ConvolutionPath::Auto,
            ))
        })?;
    }
    paste(&out, img, face)
}

pub fn filter_ahgmm(
    img: &ImagePlane,
    face: &FaceRegion,
    density: &PixelDensity,
    thr: &DensityThreshold,
    cfg: &HoppingConfig,
) -> Result<(ImagePlane, FilterReport)> {
    filter_ahgmm_with(img, face, density, thr, cfg, &AhgmmOptions::default())
}

pub fn filter_ahgmm_with(
    img: &ImagePlane,
    face: &FaceRegion,
    density: &PixelDensity,
    thr: &DensityThreshold,
    cfg: &HoppingConfig,
    opts: &AhgmmOptions,
) -> Result<(ImagePlane, FilterReport)> {
    crop(img, face)?;
    let Some(mut plan) = plan_for_face(face, density, thr, cfg)? else {
        return Ok((img.clone(), FilterReport::passthrough("ahgmm")));
    };
    if opts.disable_hops {
        plan = plan.without_hops();
    }
    let out = apply_plan(img, face, &plan, opts.global_smoothing)?;
    let global = global_smoothing_spec(&plan)?;
    let report = FilterReport {
        schema: REPORT_SCHEMA,
        algo: "ahgmm".into(),
        gated: true,
        sigma_o: Some((plan.sigma_o.sigma_h, plan.sigma_o.sigma_v)),
        n_regions: Some(plan.n_regions()),
        global_sigma: opts
            .global_smoothing
            .then_some((global.sigma_h, global.sigma_v)),
        psnr_vs_original: Some(psnr(&crop(img, face)?, &crop(&out, face)?)?),
        seed_fingerprint: Some(cfg.seed.fingerprint()),
    };
    Ok((out, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::filter_agb;
    use crate::geometry::density_from_face_pixels;
    use crate::hopping::Seed;
    use crate::synth::synthetic_face;

    fn thr() -> DensityThreshold {
        DensityThreshold::uniform(0.5).unwrap()
    }

    fn cfg(seed: u64) -> HoppingConfig {
        HoppingConfig::new(Seed::from_u64(seed))
    }

    #[test]
    fn below_threshold_is_bit_exact_passthrough() {
        let img = synthetic_face(24, 1);
        let face = FaceRegion::full(24, 24);
        let d = PixelDensity { rho_h: 0.4, rho_v: 0.4 };
        let (out, report) = filter_ahgmm(&img, &face, &d, &thr(), &cfg(1)).unwrap();
        assert_eq!(out, img);
        assert!(!report.gated);
        assert!(report.sigma_o.is_none() && report.psnr_vs_original.is_none());
    }

    #[test]
    fn top_rung_report() {
        let img = synthetic_face(96, 2);
        let face = FaceRegion::full(96, 96);
        let d = PixelDensity { rho_h: 6.21, rho_v: 4.63 };
        let (_, r) = filter_ahgmm(&img, &face, &d, &thr(), &cfg(1)).unwrap();
        assert_eq!(r.n_regions, Some(576));
        let (sh, _) = r.sigma_o.unwrap();
        let (gh, _) = r.global_sigma.unwrap();
        assert!((sh - 11.86).abs() < 0.005);
        assert!((gh - sh / 4.0).abs() < 1e-12 && (gh - 2.965).abs() < 0.001);
        assert!(r.psnr_vs_original.unwrap().is_finite());
    }

    #[test]
    fn hop_free_degenerates_to_agb() {
        let img = synthetic_face(48, 4);
        let face = FaceRegion::full(48, 48);
        let d = density_from_face_pixels(48.0, 0.0).unwrap();
        let mut c = cfg(4);
        c.num_supplementary = 0;
        let opts = AhgmmOptions { global_smoothing: false, disable_hops: true };
        let (out, _) = filter_ahgmm_with(&img, &face, &d, &thr(), &c, &opts).unwrap();
        assert_eq!(out, filter_agb(&img, &face, &d, &thr()).unwrap());
    }

    #[test]
    fn uniform_face_stays_uniform() {
        let img = ImagePlane::filled(40, 40, 1, 90.0).unwrap();
        let face = FaceRegion::new(4, 4, 30, 30);
        let d = density_from_face_pixels(30.0, 0.0).unwrap();
        let plan = plan_for_face(&face, &d, &thr(), &cfg(8)).unwrap().unwrap();
        let local = filter_region_local_only(&img, &face, &plan).unwrap();
        assert!(local.channel(0).iter().all(|v| (v - 90.0).abs() < 1e-9));
        let (full, _) = filter_ahgmm(&img, &face, &d, &thr(), &cfg(8)).unwrap();
        assert!(full.channel(0).iter().all(|v| (v - 90.0).abs() < 1e-9));
    }

    #[test]
    fn outside_pixels_untouched_and_range_kept() {
        let img = synthetic_face(80, 6);
        let face = FaceRegion::new(13, 7, 50, 61);
        let d = density_from_face_pixels(50.0, 0.2).unwrap();
        let (out, _) = filter_ahgmm(&img, &face, &d, &thr(), &cfg(6)).unwrap();
        for y in 0..80 {
            for x in 0..80 {
                let v = out.get(0, x, y);
                assert!((0.0..=255.0).contains(&v));
                if !((13..63).contains(&x) && (7..68).contains(&y)) {
                    assert_eq!(v.to_bits(), img.get(0, x, y).to_bits());
                }
            }
        }
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let img = synthetic_face(64, 10);
        let face = FaceRegion::full(64, 64);
        let d = density_from_face_pixels(64.0, 0.1).unwrap();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| filter_ahgmm(&img, &face, &d, &thr(), &cfg(10)).unwrap().0)
        };
        let a = run(1);
        let b = run(8);
        assert!(a.channel(0).iter().zip(b.channel(0)).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn mismatched_plan_is_rejected() {
        let img = synthetic_face(32, 1);
        let d = density_from_face_pixels(32.0, 0.0).unwrap();
        let plan = plan_for_face(&FaceRegion::full(16, 16), &d, &thr(), &cfg(1)).unwrap().unwrap();
        assert!(filter_region_local_only(&img, &FaceRegion::full(32, 32), &plan).is_err());
    }

    #[test]
    fn out_of_bounds_face_is_an_error() {
        let img = synthetic_face(32, 1);
        let d = density_from_face_pixels(32.0, 0.0).unwrap();
        let face = FaceRegion::new(10, 10, 32, 32);
        assert!(matches!(
            filter_ahgmm(&img, &face, &d, &thr(), &cfg(1)),
            Err(Error::Bounds { .. })
        ));
    }
}
