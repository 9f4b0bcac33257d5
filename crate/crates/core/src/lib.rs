//! Seed-keyed visual privacy filters for faces captured in oblique aerial images.
//!
//! The crate implements the adaptive hopping Gaussian mixture filter (AHGMM) and
//! the three Gaussian-blur baselines it is compared against (FGB, AGB, SVGB),
//! together with the pieces they share:
//!
//! * [`geometry`]: pixel densities of a face from camera pose or face size, and the
//!   gate that decides whether a face needs filtering at all.
//! * [`kernel`]: optimal Gaussian sizing, discretised kernels and convolution.
//! * [`hopping`]: seed-derived per-block mixture parameters.
//! * [`filter`] and [`baselines`]: the filters themselves.
//! * [`attacks`]: Wiener deconvolution and parrot attacks against protected faces.
//! * [`metrics`]: MSE/PSNR, spectral band energy, blockiness, verification tallies.
//! * [`dataset`]: multi-resolution face ladders and on-disk dataset layout.
//! * [`evaluation`]: experiment suites shared by the CLI, benches and tests.

pub mod attacks;
pub mod baselines;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod filter;
pub(crate) mod fourier;
pub mod geometry;
pub mod hopping;
pub mod imageio;
pub mod kernel;
pub mod metrics;
pub mod synth;

pub use attacks::{attack_inverse, attack_parrot_transform, AdversaryKind, AdversaryModel};
pub use baselines::{filter_agb, filter_fgb, filter_svgb, SvgbConfig};
pub use error::{Error, ErrorClass, Result};
pub use filter::{filter_ahgmm, filter_region_local_only, AhgmmOptions, FilterReport};
pub use geometry::{
    density_from_camera, density_from_face_size, gate, CameraModel, DensityThreshold, FaceRegion,
    PixelDensity,
};
pub use hopping::{build_mixtures, derive_plan, partition, HoppingConfig, HoppingPlan, Seed};
pub use imageio::{crop, load_image, paste, save_image, ImagePlane};
pub use kernel::{convolve, discretize, optimal_sigma, BorderRule, KernelGrid, KernelSpec};
