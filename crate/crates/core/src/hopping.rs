//! Seed-derived hopping of Gaussian mixture parameters across sub-regions.
//!
//! A face is tiled into `Q_h x Q_v` blocks. Every block gets its own mixture of
//! `M + 1` Gaussians whose means and standard deviations are pseudo-random
//! perturbations of the optimal kernel, drawn from a ChaCha20 keystream keyed
//! by a 256-bit secret. The order of draws is fixed so that anybody holding the
//! key can regenerate the exact plan:
//!
//! ```text
//! for n in blocks (row-major):
//!     for m in 0..=M:
//!         for axis in (h, v):
//!             sign_mu (1 bit), alpha (uniform), sign_sigma (1 bit), beta (uniform)
//!     u_0 .. u_M (uniform); phi_m = u_m / sum(u)
//! ```
//!
//! A sign bit is the low bit of one 32-bit word (set means minus); a uniform is
//! the top 53 bits of one 64-bit word scaled into `[0, 1)`.

use std::fmt;
use std::str::FromStr;

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::FaceRegion;
use crate::kernel::{discretize, KernelGrid, KernelSpec, Rect};

pub const PLAN_SCHEMA: &str = "ahgmm.hopping-plan/1";

/// The 256-bit secret key. Its `Debug` output is redacted.
#[derive(Clone, PartialEq, Eq)]
pub struct Seed([u8; 32]);

impl Seed {
    pub fn from_bytes(bytes: [u8; 32]) -> Self {
        Self(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    /// Big-endian integer seed, convenient for tests and examples.
    pub fn from_u64(value: u64) -> Self {
        let mut bytes = [0u8; 32];
        bytes[24..].copy_from_slice(&value.to_be_bytes());
        Self(bytes)
    }

    /// Parses up to 64 hex digits, read as a big-endian number.
    pub fn from_hex(text: &str) -> Result<Self> {
        let digits = text.trim().trim_start_matches("0x");
        if digits.is_empty() || digits.len() > 64 || !digits.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(Error::Argument(
                "seed must be 1 to 64 hexadecimal digits".into(),
            ));
        }
        let padded = format!("{digits:0>64}");
        let mut bytes = [0u8; 32];
        hex::decode_to_slice(padded, &mut bytes)
            .map_err(|e| Error::Argument(format!("bad seed: {e}")))?;
        Ok(Self(bytes))
    }

    /// Short, non-reversible identifier safe to print in reports.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.0);
        hex::encode(&digest[..6])
    }

    /// Returns the seed with one bit flipped.
    pub fn flip_bit(&self, bit: usize) -> Self {
        let mut bytes = self.0;
        bytes[bit / 8 % 32] ^= 1 << (bit % 8);
        Self(bytes)
    }
}

impl fmt::Debug for Seed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Seed(sha256:{}..)", self.fingerprint())
    }
}

impl FromStr for Seed {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::from_hex(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HoppingConfig {
    /// Sub-region width in pixels.
    pub q_h: usize,
    /// Sub-region height in pixels.
    pub q_v: usize,
    /// Number of supplementary Gaussians per sub-region.
    pub num_supplementary: usize,
    /// Size of the supplementary Gaussians relative to the optimal one.
    pub gamma: f64,
    pub seed: Seed,
}

impl HoppingConfig {
    pub fn new(seed: Seed) -> Self {
        Self {
            q_h: 4,
            q_v: 4,
            num_supplementary: 1,
            gamma: 0.5,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.q_h == 0 || self.q_v == 0 {
            return Err(Error::Argument("sub-region size must be at least 1".into()));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Argument(format!(
                "gamma must lie in (0, 1], got {}",
                self.gamma
            )));
        }
        Ok(())
    }
}

/// Tiles a `width` x `height` area into row-major `q_h` x `q_v` blocks.
/// Blocks on the right and bottom edges may be smaller.
pub fn partition_dims(width: usize, height: usize, q_h: usize, q_v: usize) -> Vec<Rect> {
    let mut out = Vec::with_capacity(width.div_ceil(q_h.max(1)) * height.div_ceil(q_v.max(1)));
    for y in (0..height).step_by(q_v.max(1)) {
        for x in (0..width).step_by(q_h.max(1)) {
            out.push(Rect::new(x, y, q_h.min(width - x), q_v.min(height - y)));
        }
    }
    out
}

/// Sub-regions of `face`, in image coordinates.
pub fn partition(face: &FaceRegion, cfg: &HoppingConfig) -> Vec<Rect> {
    partition_dims(face.width, face.height, cfg.q_h, cfg.q_v)
        .into_iter()
        .map(|r| Rect::new(r.x + face.x, r.y + face.y, r.width, r.height))
        .collect()
}

/// Raw pseudo-random draws for one axis of one component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisDraw {
    pub mu_negative: bool,
    pub alpha: f64,
    pub sigma_negative: bool,
    pub beta: f64,
}

impl AxisDraw {
    const ZERO: AxisDraw = AxisDraw {
        mu_negative: false,
        alpha: 0.0,
        sigma_negative: false,
        beta: 0.0,
    };

    /// Mean and standard deviation on this axis, given the optimal sigma and
    /// the relative scale of the component (1 for the hopped optimal kernel).
    fn resolve(&self, sigma_o: f64, scale: f64) -> (f64, f64) {
        let sign = |neg: bool| if neg { -1.0 } else { 1.0 };
        let mu = sign(self.mu_negative) * self.alpha * sigma_o * scale;
        let sigma = (1.0 + sign(self.sigma_negative) * self.beta) * sigma_o * scale;
        (mu, sigma.max(sigma_floor(sigma_o)))
    }
}

/// Lower bound on any hopped sigma; `1 - beta` can otherwise reach zero.
pub fn sigma_floor(sigma_o: f64) -> f64 {
    (0.05 * sigma_o).max(0.3)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub spec: KernelSpec,
    pub phi: f64,
    pub draw_h: AxisDraw,
    pub draw_v: AxisDraw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionPlan {
    pub components: Vec<Component>,
}

/// Every hopped parameter and mixture weight for one face.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoppingPlan {
    pub schema: String,
    pub seed_fingerprint: String,
    pub sigma_o: KernelSpec,
    pub q_h: usize,
    pub q_v: usize,
    pub num_supplementary: usize,
    pub gamma: f64,
    pub regions: Vec<RegionPlan>,
}

struct DrawStream(ChaCha20Rng);

impl DrawStream {
    fn new(seed: &Seed) -> Self {
        Self(ChaCha20Rng::from_seed(*seed.as_bytes()))
    }

    fn bit(&mut self) -> bool {
        self.0.next_u32() & 1 == 1
    }

    fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    fn axis(&mut self) -> AxisDraw {
        let mu_negative = self.bit();
        let alpha = self.uniform();
        let sigma_negative = self.bit();
        let beta = self.uniform();
        AxisDraw {
            mu_negative,
            alpha,
            sigma_negative,
            beta,
        }
    }
}

fn component(sigma_o: &KernelSpec, m: usize, gamma: f64, draw_h: AxisDraw, draw_v: AxisDraw, phi: f64) -> Component {
    let scale = if m == 0 { 1.0 } else { gamma };
    let (mu_h, sigma_h) = draw_h.resolve(sigma_o.sigma_h, scale);
    let (mu_v, sigma_v) = draw_v.resolve(sigma_o.sigma_v, scale);
    Component {
        spec: KernelSpec {
            mu_h,
            mu_v,
            sigma_h,
            sigma_v,
        },
        phi,
        draw_h,
        draw_v,
    }
}

/// Derives the plan for `n_regions` blocks around the zero-mean optimal kernel `sigma_o`.
pub fn derive_plan(sigma_o: &KernelSpec, n_regions: usize, cfg: &HoppingConfig) -> Result<HoppingPlan> {
    cfg.validate()?;
    sigma_o.validate()?;
    if n_regions == 0 {
        return Err(Error::Argument("plan needs at least one region".into()));
    }
    if sigma_o.mu_h != 0.0 || sigma_o.mu_v != 0.0 {
        return Err(Error::Argument("optimal kernel must be zero-mean".into()));
    }
    let n_comp = cfg.num_supplementary + 1;
    let mut stream = DrawStream::new(&cfg.seed);
    let mut regions = Vec::with_capacity(n_regions);
    let mut draws = Vec::with_capacity(n_comp);
    let mut u = Vec::with_capacity(n_comp);
    for _ in 0..n_regions {
        draws.clear();
        for _ in 0..n_comp {
            let h = stream.axis();
            let v = stream.axis();
            draws.push((h, v));
        }
        u.clear();
        u.extend((0..n_comp).map(|_| stream.uniform()));
        let total: f64 = u.iter().sum();
        let components = draws
            .iter()
            .zip(&u)
            .enumerate()
            .map(|(m, (&(h, v), &um))| {
                let phi = if total > 0.0 {
                    um / total
                } else {
                    1.0 / n_comp as f64
                };
                component(sigma_o, m, cfg.gamma, h, v, phi)
            })
            .collect();
        regions.push(RegionPlan { components });
    }
    Ok(HoppingPlan {
        schema: PLAN_SCHEMA.to_string(),
        seed_fingerprint: cfg.seed.fingerprint(),
        sigma_o: *sigma_o,
        q_h: cfg.q_h,
        q_v: cfg.q_v,
        num_supplementary: cfg.num_supplementary,
        gamma: cfg.gamma,
        regions,
    })
}

impl HoppingPlan {
    pub fn n_regions(&self) -> usize {
        self.regions.len()
    }

    /// The same plan with every alpha and beta forced to zero, so each block
    /// uses the unshifted optimal kernel (and `gamma`-scaled copies of it).
    pub fn without_hops(&self) -> Self {
        let mut out = self.clone();
        for region in &mut out.regions {
            for (m, c) in region.components.iter_mut().enumerate() {
                *c = component(&self.sigma_o, m, self.gamma, AxisDraw::ZERO, AxisDraw::ZERO, c.phi);
            }
        }
        out
    }

    /// Overrides the mixture weights of one region.
    pub fn with_weights(mut self, region: usize, phi: &[f64]) -> Result<Self> {
        let comps = &mut self
            .regions
            .get_mut(region)
            .ok_or_else(|| Error::Argument(format!("no region {region}")))?
            .components;
        if phi.len() != comps.len() || phi.iter().any(|&p| p < 0.0) {
            return Err(Error::Argument("weights must be non-negative, one per component".into()));
        }
        for (c, &p) in comps.iter_mut().zip(phi) {
            c.phi = p;
        }
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != PLAN_SCHEMA {
            return Err(Error::Config(format!(
                "unsupported plan schema {:?}",
                self.schema
            )));
        }
        for (n, r) in self.regions.iter().enumerate() {
            if r.components.len() != self.num_supplementary + 1 {
                return Err(Error::Config(format!("region {n} has the wrong component count")));
            }
            let total: f64 = r.components.iter().map(|c| c.phi).sum();
            if (total - 1.0).abs() > 1e-9 || r.components.iter().any(|c| c.phi < 0.0) {
                return Err(Error::Config(format!("region {n} weights do not sum to one")));
            }
            for c in &r.components {
                c.spec.validate()?;
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let plan: Self =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("bad plan file: {e}")))?;
        plan.validate()?;
        Ok(plan)
    }

    /// Mixture kernel of one region.
    pub fn mixture(&self, region: usize) -> Result<KernelGrid> {
        let comps = &self.regions[region].components;
        let grids = comps
            .iter()
            .map(|c| discretize(&c.spec))
            .collect::<Result<Vec<_>>>()?;
        let weighted: Vec<(f64, &KernelGrid)> =
            comps.iter().map(|c| c.phi).zip(grids.iter()).collect();
        KernelGrid::mixture(&weighted)
    }
}

/// One mixture kernel per region of `plan`.
pub fn build_mixtures(plan: &HoppingPlan) -> Result<Vec<KernelGrid>> {
    (0..plan.n_regions()).map(|n| plan.mixture(n)).collect()
}
