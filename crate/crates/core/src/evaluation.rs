//! Experiment suites over synthetic faces, shared by the CLI, the benches and
//! the acceptance tests.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::Serialize;

use crate::attacks::{attack_inverse, AdversaryModel};
use crate::baselines::{
    fgb_reference_density, filter_agb, filter_fgb, filter_svgb, optimal_kernel, SvgbConfig,
};
use crate::dataset::{build_ladder, Rung, DEFAULT_FACTORS, DEFAULT_PITCHES_DEG};
use crate::error::{Error, Result};
use crate::filter::{apply_plan, filter_ahgmm, plan_for_face};
use crate::geometry::{density_from_face_pixels, DensityThreshold, FaceRegion, PixelDensity};
use crate::hopping::{HoppingConfig, Seed};
use crate::imageio::{crop, quantize, ImagePlane};
use crate::kernel::KernelSpec;
use crate::metrics::{band_power, blockiness, mse, DistortionPool};
use crate::synth::synthetic_face;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Ahgmm,
    Agb,
    Fgb,
    Svgb,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Self::Agb, Self::Svgb, Self::Ahgmm, Self::Fgb];

    pub fn name(self) -> &'static str {
        match self {
            Self::Ahgmm => "ahgmm",
            Self::Agb => "agb",
            Self::Fgb => "fgb",
            Self::Svgb => "svgb",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ahgmm" => Ok(Self::Ahgmm),
            "agb" => Ok(Self::Agb),
            "fgb" => Ok(Self::Fgb),
            "svgb" => Ok(Self::Svgb),
            other => Err(Error::Argument(format!("unknown algorithm {other:?}"))),
        }
    }
}

/// Runs one filter with default baseline settings.
pub fn apply_algorithm(
    algo: Algorithm,
    img: &ImagePlane,
    face: &FaceRegion,
    density: &PixelDensity,
    thr: &DensityThreshold,
    hopping: &HoppingConfig,
) -> Result<ImagePlane> {
    match algo {
        Algorithm::Ahgmm => filter_ahgmm(img, face, density, thr, hopping).map(|(out, _)| out),
        Algorithm::Agb => filter_agb(img, face, density, thr),
        Algorithm::Fgb => filter_fgb(img, face, &fgb_reference_density(), thr),
        Algorithm::Svgb => filter_svgb(img, face, density, thr, &SvgbConfig::default()),
    }
}

/// Rounds to the 8-bit grid, as a protected image would be published.
pub fn quantized(img: &ImagePlane) -> ImagePlane {
    let r_max = img.r_max();
    let scale = r_max / 255.0;
    ImagePlane::from_parts_unchecked(
        img.width(),
        img.height(),
        img.channels()
            .iter()
            .map(|c| c.iter().map(|&v| quantize(v, r_max) as f64 * scale).collect())
            .collect(),
        r_max,
    )
}

/// The first `n` ladder rungs that need filtering at `thr`, drawn from synthetic
/// sources `first_source, first_source + 1, ...` with pitch labels cycling through 0..70 degrees.
pub fn ladder_faces(n: usize, thr: &DensityThreshold, first_source: u64) -> Result<Vec<Rung>> {
    let mut out = Vec::with_capacity(n);
    let mut source = first_source;
    let mut guard = 0;
    while out.len() < n {
        let pitch = DEFAULT_PITCHES_DEG[(source - first_source) as usize % DEFAULT_PITCHES_DEG.len()];
        let src = synthetic_face(96, source);
        let before = out.len();
        out.extend(
            build_ladder(&src, &DEFAULT_FACTORS, pitch as f64)?
                .into_iter()
                .filter(|r| r.needs_filtering(thr))
                .take(n - before),
        );
        guard = if out.len() == before { guard + 1 } else { 0 };
        if guard > DEFAULT_PITCHES_DEG.len() {
            return Err(Error::Argument(format!("no ladder rung passes the gate at {thr:?}")));
        }
        source += 1;
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct PsnrRow {
    pub algo: Algorithm,
    pub faces: usize,
    pub mse: f64,
    pub psnr: f64,
}

/// Pooled distortion of every filter over `n` gated ladder faces.
pub fn psnr_ordering(n: usize, thr: &DensityThreshold, cfg: &HoppingConfig) -> Result<Vec<PsnrRow>> {
    let faces = ladder_faces(n, thr, 0)?;
    Algorithm::ALL
        .iter()
        .map(|&algo| {
            let mut pool = DistortionPool::default();
            for rung in &faces {
                let face = FaceRegion::full(rung.image.width(), rung.image.height());
                let out = apply_algorithm(algo, &rung.image, &face, &rung.density, thr, cfg)?;
                pool.add(&rung.image, &out)?;
            }
            Ok(PsnrRow {
                algo,
                faces: pool.images,
                mse: pool.mse(),
                psnr: pool.psnr(255.0),
            })
        })
        .collect()
}

/// True when mean PSNR is non-increasing in the order AGB, SVGB, AHGMM, FGB.
pub fn ordering_holds(rows: &[PsnrRow]) -> bool {
    let of = |a: Algorithm| rows.iter().find(|r| r.algo == a).map(|r| r.psnr);
    let seq: Option<Vec<f64>> = Algorithm::ALL.iter().map(|&a| of(a)).collect();
    seq.is_some_and(|s| s.windows(2).all(|w| w[0] >= w[1]))
}

#[derive(Debug, Clone, Serialize)]
pub struct AttackRow {
    pub rho_o: f64,
    pub faces: usize,
    /// Mean reconstruction MSE of the exact-kernel attack on AGB output.
    pub agb_mse: f64,
    /// Mean reconstruction MSE of the accurate-plan attack on AHGMM output.
    pub ahgmm_mse: f64,
}

fn frontal_face(size: usize, source: u64) -> Result<(ImagePlane, FaceRegion, PixelDensity)> {
    Ok((
        synthetic_face(size, source),
        FaceRegion::full(size, size),
        density_from_face_pixels(size as f64, 0.0)?,
    ))
}

/// Reconstruction error of an adversary who knows everything, against AGB and
/// against AHGMM, on `n` frontal faces of `size` pixels at each threshold.
pub fn attack_asymmetry(n: usize, size: usize, thresholds: &[f64], nsr: f64, seed: &Seed) -> Result<Vec<AttackRow>> {
    let cfg = HoppingConfig::new(seed.clone());
    thresholds
        .iter()
        .map(|&rho_o| {
            let thr = DensityThreshold::uniform(rho_o)?;
            let (mut agb, mut ahgmm) = (0.0, 0.0);
            for i in 0..n {
                let (img, face, d) = frontal_face(size, 50_000 + i as u64)?;
                let sigma_o = optimal_kernel(&d, &thr)?;
                let protected = quantized(&filter_agb(&img, &face, &d, &thr)?);
                let rec = attack_inverse(&protected, &face, &AdversaryModel::optimal(), &sigma_o, nsr)?;
                agb += mse(&img, &rec)?;
                let protected = quantized(&filter_ahgmm(&img, &face, &d, &thr, &cfg)?.0);
                let rec = attack_inverse(&protected, &face, &AdversaryModel::accurate(cfg.clone()), &sigma_o, nsr)?;
                ahgmm += mse(&img, &rec)?;
            }
            Ok(AttackRow {
                rho_o,
                faces: n,
                agb_mse: agb / n as f64,
                ahgmm_mse: ahgmm / n as f64,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct KnowledgeRow {
    pub faces: usize,
    pub optimal_mse: f64,
    pub pseudo_mse: f64,
    pub accurate_mse: f64,
    /// Single-kernel attack assuming twice the optimal sigma.
    pub wrong_sigma_mse: f64,
}

/// Reconstruction error against AHGMM for the three adversary models, plus a
/// single-kernel attacker who assumes twice the optimal sigma. The pseudo
/// adversary's key differs from the true one in a single bit.
pub fn attack_knowledge(n: usize, size: usize, rho_o: f64, nsr: f64, seed: &Seed) -> Result<KnowledgeRow> {
    let thr = DensityThreshold::uniform(rho_o)?;
    let cfg = HoppingConfig::new(seed.clone());
    let mut guess = cfg.clone();
    guess.seed = seed.flip_bit(0);
    let adversaries = [
        AdversaryModel::optimal(),
        AdversaryModel::pseudo(guess),
        AdversaryModel::accurate(cfg.clone()),
    ];
    let mut sums = [0.0; 4];
    for i in 0..n {
        let (img, face, d) = frontal_face(size, 70_000 + i as u64)?;
        let sigma_o = optimal_kernel(&d, &thr)?;
        let protected = quantized(&filter_ahgmm(&img, &face, &d, &thr, &cfg)?.0);
        for (sum, adv) in sums.iter_mut().zip(&adversaries) {
            *sum += mse(&img, &attack_inverse(&protected, &face, adv, &sigma_o, nsr)?)?;
        }
        let wrong = KernelSpec::zero_mean(2.0 * sigma_o.sigma_h, 2.0 * sigma_o.sigma_v)?;
        let rec = attack_inverse(&protected, &face, &AdversaryModel::optimal(), &wrong, nsr)?;
        sums[3] += mse(&img, &rec)?;
    }
    Ok(KnowledgeRow {
        faces: n,
        optimal_mse: sums[0] / n as f64,
        pseudo_mse: sums[1] / n as f64,
        accurate_mse: sums[2] / n as f64,
        wrong_sigma_mse: sums[3] / n as f64,
    })
}

/// Mean over `n` frontal faces of the filtered-to-original ratio of spectral
/// power above the privacy cutoff. The cutoff on each axis is the threshold's
/// Nyquist frequency, `rho_o / 2` cycles per cm, expressed in cycles per pixel.
pub fn spectral_privacy(n: usize, size: usize, rho_o: f64, seed: &Seed) -> Result<f64> {
    let thr = DensityThreshold::uniform(rho_o)?;
    let cfg = HoppingConfig::new(seed.clone());
    let mut total = 0.0;
    for i in 0..n {
        let (img, face, d) = frontal_face(size, 90_000 + i as u64)?;
        let (ch, cv) = (0.5 * rho_o / d.rho_h, 0.5 * rho_o / d.rho_v);
        let out = filter_ahgmm(&img, &face, &d, &thr, &cfg)?.0;
        let before = band_power(&img, ch, cv)?.above;
        let after = band_power(&out, ch, cv)?.above;
        total += after / before;
    }
    Ok(total / n as f64)
}

#[derive(Debug, Clone, Serialize)]
pub struct BlockinessRow {
    pub faces: usize,
    pub improved: usize,
    pub mean_local_only: f64,
    pub mean_smoothed: f64,
}

/// How often the de-blocking pass lowers the blockiness score.
pub fn blockiness_suite(n: usize, size: usize, rho_o: f64, seed: &Seed) -> Result<BlockinessRow> {
    let thr = DensityThreshold::uniform(rho_o)?;
    let cfg = HoppingConfig::new(seed.clone());
    let mut row = BlockinessRow {
        faces: n,
        improved: 0,
        mean_local_only: 0.0,
        mean_smoothed: 0.0,
    };
    for i in 0..n {
        let (img, face, d) = frontal_face(size, 110_000 + i as u64)?;
        let plan = plan_for_face(&face, &d, &thr, &cfg)?
            .ok_or_else(|| Error::Argument(format!("{size}px face is below threshold {rho_o}")))?;
        let local = blockiness(&apply_plan(&img, &face, &plan, false)?, plan.q_h, plan.q_v);
        let smooth = blockiness(&apply_plan(&img, &face, &plan, true)?, plan.q_h, plan.q_v);
        row.improved += usize::from(smooth < local);
        row.mean_local_only += local / n as f64;
        row.mean_smoothed += smooth / n as f64;
    }
    Ok(row)
}

#[derive(Debug, Clone, Serialize)]
pub struct TimingRow {
    pub algo: Algorithm,
    pub faces: usize,
    pub size: usize,
    pub total_seconds: f64,
    pub per_face_ms: f64,
}

/// Wall-clock cost of each filter on `n` frontal faces. Reported, not asserted.
pub fn timing(n: usize, size: usize, rho_o: f64, seed: &Seed) -> Result<Vec<TimingRow>> {
    let thr = DensityThreshold::uniform(rho_o)?;
    let cfg = HoppingConfig::new(seed.clone());
    let faces = (0..n)
        .map(|i| frontal_face(size, 130_000 + i as u64))
        .collect::<Result<Vec<_>>>()?;
    Algorithm::ALL
        .iter()
        .map(|&algo| {
            let start = Instant::now();
            for (img, face, d) in &faces {
                std::hint::black_box(apply_algorithm(algo, img, face, d, &thr, &cfg)?);
            }
            let secs = start.elapsed().as_secs_f64();
            Ok(TimingRow {
                algo,
                faces: n,
                size,
                total_seconds: secs,
                per_face_ms: 1e3 * secs / n.max(1) as f64,
            })
        })
        .collect()
}

/// MSE restricted to the face region.
pub fn face_mse(a: &ImagePlane, b: &ImagePlane, face: &FaceRegion) -> Result<f64> {
    mse(&crop(a, face)?, &crop(b, face)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert!("blur".parse::<Algorithm>().is_err());
    }

    #[test]
    fn ladder_faces_are_gated_and_counted() {
        let thr = DensityThreshold::uniform(0.5).unwrap();
        let faces = ladder_faces(13, &thr, 0).unwrap();
        assert_eq!(faces.len(), 13);
        assert!(faces.iter().all(|r| r.needs_filtering(&thr)));
        let none = DensityThreshold::uniform(50.0).unwrap();
        assert!(ladder_faces(1, &none, 0).is_err());
    }

    #[test]
    fn quantized_is_on_the_grid() {
        let q = quantized(&synthetic_face(16, 1));
        assert!(q.channel(0).iter().all(|v| v.fract() == 0.0));
    }
}
