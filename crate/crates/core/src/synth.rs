//! Procedural face-like test images.
//!
//! These stand in for aligned face crops in tests, benchmarks and the CLI's
//! synthetic dataset mode: a head ellipse on a shaded background, hair, eyes,
//! brows, nose shading and a mouth, each randomly placed and shaded, plus a
//! little skin texture. Shapes are supersampled so edges are anti-aliased, and
//! the render is finally blurred by a small Gaussian standing in for the
//! camera's optics, so the spectrum falls off towards Nyquist as in captured
//! images.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::imageio::ImagePlane;
use crate::kernel::{convolve, discretize, BorderRule, KernelSpec};

/// Standard deviation, in pixels, of the simulated camera blur.
pub const CAMERA_BLUR_SIGMA: f64 = 1.0;

struct Ellipse {
    cx: f64,
    cy: f64,
    rx: f64,
    ry: f64,
    value: f64,
}

impl Ellipse {
    fn contains(&self, u: f64, v: f64) -> bool {
        let a = (u - self.cx) / self.rx;
        let b = (v - self.cy) / self.ry;
        a * a + b * b <= 1.0
    }
}

/// A `size` x `size` grayscale face-like image, fully determined by `seed`.
pub fn synthetic_face(size: usize, seed: u64) -> ImagePlane {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut jitter = |lo: f64, hi: f64| rng.random_range(lo..hi);

    let bg_top = jitter(40.0, 200.0);
    let bg_bottom = jitter(40.0, 200.0);
    let skin = jitter(110.0, 215.0);
    let hair = jitter(15.0, 90.0);
    let head = Ellipse {
        cx: 0.5 + jitter(-0.04, 0.04),
        cy: 0.52 + jitter(-0.03, 0.03),
        rx: jitter(0.32, 0.4),
        ry: jitter(0.42, 0.48),
        value: skin,
    };
    let hairline = head.cy - head.ry * jitter(0.55, 0.8);
    let eye_y = head.cy - head.ry * jitter(0.12, 0.25);
    let eye_dx = head.rx * jitter(0.38, 0.5);
    let eye_rx = head.rx * jitter(0.16, 0.22);
    let eye_ry = eye_rx * jitter(0.45, 0.65);
    let iris = jitter(10.0, 70.0);
    let sclera = jitter(190.0, 240.0);
    let brow = skin * jitter(0.25, 0.55);
    let brow_dy = eye_ry * jitter(1.6, 2.4);
    let nose_len = head.ry * jitter(0.3, 0.45);
    let nose_shade = skin * jitter(0.7, 0.85);
    let mouth = Ellipse {
        cx: head.cx + jitter(-0.02, 0.02),
        cy: head.cy + head.ry * jitter(0.45, 0.6),
        rx: head.rx * jitter(0.3, 0.5),
        ry: head.ry * jitter(0.05, 0.09),
        value: skin * jitter(0.4, 0.7),
    };

    let mut features = Vec::new();
    for side in [-1.0, 1.0] {
        let cx = head.cx + side * eye_dx;
        features.push(Ellipse { cx, cy: eye_y, rx: eye_rx, ry: eye_ry, value: sclera });
        features.push(Ellipse { cx, cy: eye_y, rx: eye_ry * 0.9, ry: eye_ry * 0.9, value: iris });
        features.push(Ellipse {
            cx,
            cy: eye_y - brow_dy,
            rx: eye_rx * 1.2,
            ry: eye_ry * 0.35,
            value: brow,
        });
    }
    features.push(Ellipse {
        cx: head.cx,
        cy: eye_y + nose_len,
        rx: head.rx * 0.18,
        ry: head.ry * 0.06,
        value: nose_shade * 0.8,
    });
    features.push(mouth);

    // Coarse value noise for skin texture and lighting.
    const GRID: usize = 9;
    let lattice: Vec<f64> = (0..GRID * GRID).map(|_| jitter(-1.0, 1.0)).collect();
    let texture_amp = jitter(4.0, 14.0);
    let light = jitter(-0.25, 0.25);
    let fine: Vec<f64> = (0..size * size).map(|_| jitter(-3.0, 3.0)).collect();

    let sample = |u: f64, v: f64| -> f64 {
        if head.contains(u, v) {
            if v < hairline {
                return hair;
            }
            if let Some(f) = features.iter().rev().find(|f| f.contains(u, v)) {
                return f.value;
            }
            let in_nose = (u - head.cx).abs() < head.rx * 0.08 && v > eye_y && v < eye_y + nose_len;
            let base = if in_nose { nose_shade } else { skin };
            base * (1.0 + light * (u - head.cx) / head.rx)
        } else if v < hairline && (u - head.cx).abs() < head.rx * 1.1 {
            hair
        } else {
            bg_top + (bg_bottom - bg_top) * v
        }
    };

    const SUB: usize = 4;
    let n = size as f64;
    let mut data = Vec::with_capacity(size * size);
    for y in 0..size {
        for x in 0..size {
            let mut acc = 0.0;
            for sy in 0..SUB {
                for sx in 0..SUB {
                    let u = (x as f64 + (sx as f64 + 0.5) / SUB as f64) / n;
                    let v = (y as f64 + (sy as f64 + 0.5) / SUB as f64) / n;
                    acc += sample(u, v);
                }
            }
            let (u, v) = ((x as f64 + 0.5) / n, (y as f64 + 0.5) / n);
            let gx = u * (GRID - 1) as f64;
            let gy = v * (GRID - 1) as f64;
            let (ix, iy) = ((gx as usize).min(GRID - 2), (gy as usize).min(GRID - 2));
            let (fx, fy) = (gx - ix as f64, gy - iy as f64);
            let l = |i: usize, j: usize| lattice[j * GRID + i];
            let smooth = l(ix, iy) * (1.0 - fx) * (1.0 - fy)
                + l(ix + 1, iy) * fx * (1.0 - fy)
                + l(ix, iy + 1) * (1.0 - fx) * fy
                + l(ix + 1, iy + 1) * fx * fy;
            let value = acc / (SUB * SUB) as f64 + texture_amp * smooth + fine[y * size + x];
            data.push(value.clamp(0.0, 255.0));
        }
    }
    let raw = ImagePlane::gray(size, size, data).expect("synthetic face is well formed");
    let optics = KernelSpec::isotropic(CAMERA_BLUR_SIGMA).and_then(|s| discretize(&s));
    convolve(&raw, &optics.expect("camera blur is valid"), BorderRule::Mirror)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_varied() {
        assert_eq!(synthetic_face(32, 1), synthetic_face(32, 1));
        assert_ne!(synthetic_face(32, 1), synthetic_face(32, 2));
        let f = synthetic_face(96, 3);
        let (lo, hi) = f
            .channel(0)
            .iter()
            .fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
        assert!(hi - lo > 60.0);
    }
}
