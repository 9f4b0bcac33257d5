//! Shared fixtures for the criterion benchmarks.

pub use ahgmm;

use ahgmm::geometry::density_from_face_pixels;
use ahgmm::synth::synthetic_face;
use ahgmm::{DensityThreshold, FaceRegion, HoppingConfig, ImagePlane, PixelDensity, Seed};

/// A frontal synthetic face of `size` pixels with its density, a 0.5 px/cm
/// threshold and a fixed demo key.
pub struct Fixture {
    pub image: ImagePlane,
    pub face: FaceRegion,
    pub density: PixelDensity,
    pub thr: DensityThreshold,
    pub hopping: HoppingConfig,
}

pub fn fixture(size: usize) -> Fixture {
    Fixture {
        image: synthetic_face(size, 7),
        face: FaceRegion::full(size, size),
        density: density_from_face_pixels(size as f64, 0.0).expect("valid face size"),
        thr: DensityThreshold::uniform(0.5).expect("valid threshold"),
        hopping: HoppingConfig::new(Seed::from_u64(42)),
    }
}
