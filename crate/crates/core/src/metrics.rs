//! Distortion and privacy measurements.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::fourier::{bin_frequency, mirror_extend, mirror_len, Fft2};
use crate::imageio::ImagePlane;

/// Mean squared intensity difference over all pixels and channels.
pub fn mse(a: &ImagePlane, b: &ImagePlane) -> Result<f64> {
    a.same_shape(b)?;
    let (sum, count) = squared_error(a, b);
    Ok(sum / count as f64)
}

fn squared_error(a: &ImagePlane, b: &ImagePlane) -> (f64, usize) {
    let sum = a
        .channels()
        .iter()
        .zip(b.channels())
        .flat_map(|(x, y)| x.iter().zip(y))
        .map(|(p, q)| (p - q) * (p - q))
        .sum();
    (sum, a.width() * a.height() * a.num_channels())
}

pub fn psnr_from_mse(mse: f64, r_max: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        20.0 * (r_max / mse.sqrt()).log10()
    }
}

/// Peak signal to noise ratio in dB; `+inf` for identical images.
pub fn psnr(a: &ImagePlane, b: &ImagePlane) -> Result<f64> {
    Ok(psnr_from_mse(mse(a, b)?, a.r_max()))
}

/// Serialises a decibel value, writing infinities as the string `"inf"`.
pub fn serialize_db<S: Serializer>(value: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match value {
        None => s.serialize_none(),
        Some(v) if v.is_infinite() => s.serialize_str(if *v > 0.0 { "inf" } else { "-inf" }),
        Some(v) => s.serialize_f64(*v),
    }
}

/// Dataset-level distortion: squared errors pooled over every pixel of every image.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct DistortionPool {
    pub sum_sq: f64,
    pub samples: usize,
    pub images: usize,
}

impl DistortionPool {
    pub fn add(&mut self, original: &ImagePlane, protected: &ImagePlane) -> Result<()> {
        original.same_shape(protected)?;
        let (sum, count) = squared_error(original, protected);
        self.sum_sq += sum;
        self.samples += count;
        self.images += 1;
        Ok(())
    }

    pub fn mse(&self) -> f64 {
        if self.samples == 0 {
            0.0
        } else {
            self.sum_sq / self.samples as f64
        }
    }

    pub fn psnr(&self, r_max: f64) -> f64 {
        psnr_from_mse(self.mse(), r_max)
    }
}

/// Spectral power of a plane split at an elliptical cutoff; DC is excluded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BandPower {
    pub above: f64,
    pub total: f64,
}

impl BandPower {
    pub fn fraction(&self) -> f64 {
        if self.total == 0.0 {
            0.0
        } else {
            self.above / self.total
        }
    }
}

/// Power strictly outside the ellipse with semi-axes `cutoff_h`, `cutoff_v`
/// (cycles per pixel), summed over channels.
///
/// The DFT is taken over the whole-sample mirror extension of each channel, so
/// the mismatch between opposite image edges does not show up as broadband
/// power.
pub fn band_power(img: &ImagePlane, cutoff_h: f64, cutoff_v: f64) -> Result<BandPower> {
    for c in [cutoff_h, cutoff_v] {
        if !(c > 0.0 && c <= 0.5) {
            return Err(Error::Argument(format!("cutoff {c} outside (0, 0.5]")));
        }
    }
    let (w, h) = (mirror_len(img.width()), mirror_len(img.height()));
    let fft = Fft2::new(w, h);
    let mut out = BandPower {
        above: 0.0,
        total: 0.0,
    };
    for plane in img.channels() {
        // Removing the mean first keeps round-off from the DC bin out of the AC bins.
        let mut ext = mirror_extend(plane, img.width(), img.height());
        let mean = ext.iter().sum::<f64>() / ext.len() as f64;
        ext.iter_mut().for_each(|v| *v -= mean);
        let spec = fft.forward_real(&ext);
        for ky in 0..h {
            let fy = bin_frequency(ky, h) / cutoff_v;
            for kx in 0..w {
                if kx == 0 && ky == 0 {
                    continue;
                }
                let fx = bin_frequency(kx, w) / cutoff_h;
                let p = spec[ky * w + kx].norm_sqr();
                out.total += p;
                if fx * fx + fy * fy > 1.0 {
                    out.above += p;
                }
            }
        }
    }
    Ok(out)
}

/// Fraction of AC spectral power at radial frequency above `cutoff` cycles/px.
pub fn band_energy(img: &ImagePlane, cutoff: f64) -> Result<f64> {
    Ok(band_power(img, cutoff, cutoff)?.fraction())
}

/// Mean absolute step across block boundaries minus the mean step inside
/// blocks, for a tiling by `q_h` x `q_v` blocks anchored at the origin.
pub fn blockiness(img: &ImagePlane, q_h: usize, q_v: usize) -> f64 {
    let (w, h) = (img.width(), img.height());
    let (mut edge, mut edge_n, mut inner, mut inner_n) = (0.0, 0usize, 0.0, 0usize);
    for plane in img.channels() {
        for y in 0..h {
            for x in 0..w {
                let v = plane[y * w + x];
                if x + 1 < w {
                    let d = (plane[y * w + x + 1] - v).abs();
                    if (x + 1) % q_h == 0 {
                        edge += d;
                        edge_n += 1;
                    } else {
                        inner += d;
                        inner_n += 1;
                    }
                }
                if y + 1 < h {
                    let d = (plane[(y + 1) * w + x] - v).abs();
                    if (y + 1) % q_v == 0 {
                        edge += d;
                        edge_n += 1;
                    } else {
                        inner += d;
                        inner_n += 1;
                    }
                }
            }
        }
    }
    let mean = |s: f64, n: usize| if n == 0 { 0.0 } else { s / n as f64 };
    mean(edge, edge_n) - mean(inner, inner_n)
}

/// Outcome counts of a face verification run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationTally {
    pub tp: u64,
    pub tn: u64,
    pub total: u64,
}

impl VerificationTally {
    pub fn new(tp: u64, tn: u64, total: u64) -> Result<Self> {
        if tp + tn > total {
            return Err(Error::Argument(format!(
                "tp + tn = {} exceeds total {total}",
                tp + tn
            )));
        }
        Ok(Self { tp, tn, total })
    }
}

/// Fraction of correct verification decisions.
pub fn accuracy_from_tally(t: &VerificationTally) -> Result<f64> {
    if t.total == 0 {
        return Err(Error::Argument("tally has no pairs".into()));
    }
    Ok((t.tp + t.tn) as f64 / t.total as f64)
}

#[derive(Debug, Deserialize)]
struct PairRow {
    #[allow(dead_code)]
    pair_id: String,
    same_subject: String,
    predicted_same: String,
}

fn parse_flag(text: &str) -> Result<bool> {
    match text.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" => Ok(true),
        "0" | "false" | "no" => Ok(false),
        other => Err(Error::Config(format!("expected a boolean, got {other:?}"))),
    }
}

/// Tallies a `pair_id,same_subject,predicted_same` CSV written by an external recogniser.
pub fn tally_from_csv<R: Read>(reader: R) -> Result<VerificationTally> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let (mut tp, mut tn, mut total) = (0, 0, 0);
    for row in rdr.deserialize::<PairRow>() {
        let row = row.map_err(|e| Error::Config(format!("bad tally row: {e}")))?;
        let same = parse_flag(&row.same_subject)?;
        let predicted = parse_flag(&row.predicted_same)?;
        match (same, predicted) {
            (true, true) => tp += 1,
            (false, false) => tn += 1,
            _ => {}
        }
        total += 1;
    }
    VerificationTally::new(tp, tn, total)
}

pub fn tally_from_csv_path(path: impl AsRef<Path>) -> Result<VerificationTally> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    tally_from_csv(file)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn gray(w: usize, h: usize, data: Vec<f64>) -> ImagePlane {
        ImagePlane::gray(w, h, data).unwrap()
    }

    #[test]
    fn mse_values() {
        let z = gray(2, 2, vec![0.0; 4]);
        let o = gray(2, 2, vec![1.0; 4]);
        assert_eq!(mse(&z, &z).unwrap(), 0.0);
        assert_eq!(mse(&z, &o).unwrap(), 1.0);
        assert_eq!(mse(&gray(2, 1, vec![0.0, 0.0]), &gray(2, 1, vec![3.0, 4.0])).unwrap(), 12.5);
        assert!(matches!(mse(&z, &gray(1, 1, vec![0.0])), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn psnr_values() {
        assert_eq!(psnr_from_mse(255.0 * 255.0, 255.0), 0.0);
        assert!((psnr_from_mse(1.0, 255.0) - 48.1308).abs() < 1e-4);
        let z = gray(2, 2, vec![5.0; 4]);
        assert_eq!(psnr(&z, &z).unwrap(), f64::INFINITY);
    }

    #[test]
    fn psnr_is_symmetric_and_offset_invariant() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(4);
        let a: Vec<f64> = (0..64).map(|_| rng.random_range(20.0..200.0)).collect();
        let b: Vec<f64> = (0..64).map(|_| rng.random_range(20.0..200.0)).collect();
        let (ia, ib) = (gray(8, 8, a.clone()), gray(8, 8, b.clone()));
        assert_eq!(psnr(&ia, &ib).unwrap(), psnr(&ib, &ia).unwrap());
        let shift = |v: &[f64]| gray(8, 8, v.iter().map(|x| x + 30.0).collect());
        assert!((psnr(&shift(&a), &shift(&b)).unwrap() - psnr(&ia, &ib).unwrap()).abs() < 1e-9);
        assert!(psnr_from_mse(2.0, 255.0) < psnr_from_mse(1.0, 255.0));
    }

    #[test]
    fn pooled_mse_weights_pixels() {
        let mut pool = DistortionPool::default();
        pool.add(&gray(1, 1, vec![0.0]), &gray(1, 1, vec![2.0])).unwrap();
        pool.add(&gray(3, 1, vec![0.0; 3]), &gray(3, 1, vec![0.0; 3])).unwrap();
        assert_eq!(pool.mse(), 1.0);
        assert_eq!(pool.images, 2);
    }

    #[test]
    fn band_energy_of_constant_and_checkerboard() {
        assert_eq!(band_energy(&gray(8, 8, vec![100.0; 64]), 0.25).unwrap(), 0.0);
        let checker: Vec<f64> = (0..64).map(|i| if (i % 8 + i / 8) % 2 == 0 { 0.0 } else { 255.0 }).collect();
        assert!((band_energy(&gray(8, 8, checker), 0.25).unwrap() - 1.0).abs() < 1e-12);
        assert!(band_energy(&gray(8, 8, vec![0.0; 64]), 0.0).is_err());
        assert!(band_energy(&gray(8, 8, vec![0.0; 64]), 0.6).is_err());
    }

    #[test]
    fn white_noise_splits_by_bin_count() {
        let n = 64;
        // Cutoff placing half of the AC bins above it, found by enumeration.
        let mut radii: Vec<f64> = (0..n * n)
            .filter(|&i| i != 0)
            .map(|i| bin_frequency(i % n, n).hypot(bin_frequency(i / n, n)))
            .collect();
        radii.sort_by(f64::total_cmp);
        let cutoff = radii[radii.len() / 2];
        let mut rng = rand::rngs::StdRng::seed_from_u64(8);
        let noise: Vec<f64> = (0..n * n).map(|_| rng.random_range(0.0..255.0)).collect();
        let e = band_energy(&gray(n, n, noise), cutoff).unwrap();
        assert!((e - 0.5).abs() < 0.05, "fraction {e}");
    }

    #[test]
    fn blockiness_detects_block_steps() {
        // Piecewise-constant 4x4 blocks: all variation sits on block edges.
        let data: Vec<f64> = (0..64).map(|i| (((i % 8) / 4 + (i / 8) / 4) * 50) as f64).collect();
        let img = gray(8, 8, data);
        assert!(blockiness(&img, 4, 4) > 0.0);
        let smooth: Vec<f64> = (0..64).map(|i| (i % 8) as f64 * 10.0).collect();
        assert!(blockiness(&gray(8, 8, smooth), 4, 4).abs() < 1e-12);
    }

    #[test]
    fn accuracy_values() {
        let t = VerificationTally::new(5, 5, 10).unwrap();
        assert_eq!(accuracy_from_tally(&t).unwrap(), 1.0);
        let t = VerificationTally::new(3, 2, 10).unwrap();
        assert_eq!(accuracy_from_tally(&t).unwrap(), 0.5);
        let t = VerificationTally::new(300, 280, 1200).unwrap();
        assert!((accuracy_from_tally(&t).unwrap() - 580.0 / 1200.0).abs() < 1e-15);
        assert!(accuracy_from_tally(&VerificationTally { tp: 0, tn: 0, total: 0 }).is_err());
        assert!(VerificationTally::new(6, 5, 10).is_err());
    }

    #[test]
    fn tally_csv() {
        let csv = "pair_id,same_subject,predicted_same\n1,1,1\n2,1,0\n3,0,0\n4,false,true\n5,true,true\n";
        let t = tally_from_csv(csv.as_bytes()).unwrap();
        assert_eq!(t, VerificationTally { tp: 2, tn: 1, total: 5 });
        assert!(tally_from_csv("pair_id,same_subject,predicted_same\n1,maybe,1\n".as_bytes()).is_err());
    }
}
