//! Gaussian point spread functions: sizing, discretisation and convolution.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imageio::ImagePlane;

/// Largest kernel side accepted by [`discretize`].
pub const DEFAULT_MAX_SUPPORT: usize = 1025;

const FLUSH_BELOW: f64 = 1e-300;

/// Rows per work item when convolving whole planes in parallel.
const ROW_BAND: usize = 16;

/// Anisotropic Gaussian parameters, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub mu_h: f64,
    pub mu_v: f64,
    pub sigma_h: f64,
    pub sigma_v: f64,
}

impl KernelSpec {
    pub fn new(mu_h: f64, mu_v: f64, sigma_h: f64, sigma_v: f64) -> Result<Self> {
        let spec = Self {
            mu_h,
            mu_v,
            sigma_h,
            sigma_v,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn zero_mean(sigma_h: f64, sigma_v: f64) -> Result<Self> {
        Self::new(0.0, 0.0, sigma_h, sigma_v)
    }

    pub fn isotropic(sigma: f64) -> Result<Self> {
        Self::new(0.0, 0.0, sigma, sigma)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_h > 0.0 && self.sigma_v > 0.0)
            || !self.sigma_h.is_finite()
            || !self.sigma_v.is_finite()
        {
            return Err(Error::Argument(format!(
                "Gaussian needs positive finite sigmas, got ({}, {})",
                self.sigma_h, self.sigma_v
            )));
        }
        if !self.mu_h.is_finite() || !self.mu_v.is_finite() {
            return Err(Error::Argument("Gaussian mean must be finite".into()));
        }
        Ok(())
    }

    pub fn support_h(&self) -> usize {
        support(self.sigma_h)
    }

    pub fn support_v(&self) -> usize {
        support(self.sigma_v)
    }
}

/// Odd kernel side covering three standard deviations each way: `2*ceil(3*sigma) + 1`.
pub fn support(sigma: f64) -> usize {
    2 * (3.0 * sigma).ceil() as usize + 1
}

/// Smallest zero-mean Gaussian sigma (px) that brings density `rho` below `rho_o`.
pub fn optimal_sigma(rho: f64, rho_o: f64) -> Result<f64> {
    if !(rho > 0.0 && rho_o > 0.0) {
        return Err(Error::Argument(format!(
            "densities must be positive, got rho={rho}, rho_o={rho_o}"
        )));
    }
    Ok(3.0 * rho / (PI * rho_o))
}

/// Standard deviation (cycles/cm) of the Fourier transform of a spatial
/// Gaussian of `sigma_spatial` pixels sampled at `rho` px/cm.
pub fn to_frequency_sigma(sigma_spatial: f64, rho: f64) -> Result<f64> {
    if !(sigma_spatial > 0.0 && rho > 0.0) {
        return Err(Error::Argument(format!(
            "sigma and density must be positive, got sigma={sigma_spatial}, rho={rho}"
        )));
    }
    Ok(rho / (2.0 * PI * sigma_spatial))
}

/// One rank-one piece `weight * v ⊗ h` of a kernel grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparableTerm {
    pub weight: f64,
    pub h: Vec<f64>,
    pub v: Vec<f64>,
}

/// A dense, normalised kernel over odd supports centred on offset zero.
///
/// Alongside the dense weights the grid keeps a decomposition into separable
/// terms; Gaussian grids have exactly one term and mixtures one per component.
#[derive(Debug, Clone)]
pub struct KernelGrid {
    support_h: usize,
    support_v: usize,
    terms: Vec<SeparableTerm>,
    // Expanded from `terms` on first use unless the grid was built dense.
    dense: OnceLock<Vec<f64>>,
}

impl PartialEq for KernelGrid {
    fn eq(&self, other: &Self) -> bool {
        self.support_h == other.support_h
            && self.support_v == other.support_v
            && self.weights() == other.weights()
    }
}

impl KernelGrid {
    pub fn support_h(&self) -> usize {
        self.support_h
    }

    pub fn support_v(&self) -> usize {
        self.support_v
    }

    pub fn radius_h(&self) -> usize {
        (self.support_h - 1) / 2
    }

    pub fn radius_v(&self) -> usize {
        (self.support_v - 1) / 2
    }

    /// Row-major weights, `support_v` rows of `support_h` columns.
    pub fn weights(&self) -> &[f64] {
        self.dense.get_or_init(|| {
            let mut w = vec![0.0; self.support_h * self.support_v];
            for t in &self.terms {
                for (row, &kv) in w.chunks_mut(self.support_h).zip(&t.v) {
                    for (cell, &kh) in row.iter_mut().zip(&t.h) {
                        *cell += t.weight * (kv * kh);
                    }
                }
            }
            w
        })
    }

    pub fn terms(&self) -> &[SeparableTerm] {
        &self.terms
    }

    /// Weight at horizontal offset `dh` and vertical offset `dv` from the centre.
    pub fn at(&self, dh: isize, dv: isize) -> f64 {
        let (rh, rv) = (self.radius_h() as isize, self.radius_v() as isize);
        if dh.abs() > rh || dv.abs() > rv {
            return 0.0;
        }
        self.weights()[((dv + rv) as usize) * self.support_h + (dh + rh) as usize]
    }

    pub fn sum(&self) -> f64 {
        self.weights().iter().sum()
    }

    /// The 1x1 identity kernel.
    pub fn delta() -> Self {
        Self {
            support_h: 1,
            support_v: 1,
            terms: vec![SeparableTerm {
                weight: 1.0,
                h: vec![1.0],
                v: vec![1.0],
            }],
            dense: OnceLock::new(),
        }
    }

    /// Builds a grid from a dense weight array with no separable structure.
    /// Supports must be odd.
    pub fn from_dense(support_h: usize, support_v: usize, weights: Vec<f64>) -> Result<Self> {
        if support_h % 2 == 0 || support_v % 2 == 0 || weights.len() != support_h * support_v {
            return Err(Error::Argument(format!(
                "dense kernel must have odd supports and {support_h}x{support_v} weights"
            )));
        }
        Ok(Self {
            support_h,
            support_v,
            terms: Vec::new(),
            dense: OnceLock::from(weights),
        })
    }

    /// Weighted sum of grids on the union of their supports.
    pub fn mixture(components: &[(f64, &KernelGrid)]) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Argument("mixture needs at least one component".into()));
        }
        let support_h = components.iter().map(|(_, g)| g.support_h).max().unwrap_or(1);
        let support_v = components.iter().map(|(_, g)| g.support_v).max().unwrap_or(1);
        if components.iter().all(|(_, g)| !g.terms.is_empty()) {
            let terms = components
                .iter()
                .flat_map(|&(phi, grid)| {
                    grid.terms.iter().map(move |t| SeparableTerm {
                        weight: phi * t.weight,
                        h: pad_centered(&t.h, support_h),
                        v: pad_centered(&t.v, support_v),
                    })
                })
                .collect();
            return Ok(Self {
                support_h,
                support_v,
                terms,
                dense: OnceLock::new(),
            });
        }
        let mut weights = vec![0.0; support_h * support_v];
        for &(phi, grid) in components {
            let oh = (support_h - grid.support_h) / 2;
            let ov = (support_v - grid.support_v) / 2;
            for (row, src) in grid.weights().chunks(grid.support_h).enumerate() {
                let dst = &mut weights[(row + ov) * support_h + oh..][..grid.support_h];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += phi * s;
                }
            }
        }
        Ok(Self {
            support_h,
            support_v,
            terms: Vec::new(),
            dense: OnceLock::from(weights),
        })
    }

    /// Plain-text matrix dump: a header line then one row of weights per line.
    pub fn to_text(&self) -> String {
        let mut out = format!("# kernel {} x {}\n", self.support_h, self.support_v);
        for row in self.weights().chunks(self.support_h) {
            let line: Vec<String> = row.iter().map(|w| format!("{w:.17e}")).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }
}

fn pad_centered(values: &[f64], len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    let off = (len - values.len()) / 2;
    out[off..off + values.len()].copy_from_slice(values);
    out
}

/// Normalised samples of `exp(-(t - mu)^2 / 2 sigma^2)` at integer offsets
/// `-(support-1)/2 ..= (support-1)/2`.
fn gaussian_1d(mu: f64, sigma: f64, support: usize) -> Vec<f64> {
    let r = (support as isize - 1) / 2;
    let two_var = 2.0 * sigma * sigma;
    let mut vals: Vec<f64> = (-r..=r)
        .map(|t| {
            let d = t as f64 - mu;
            let g = (-(d * d) / two_var).exp();
            if g < FLUSH_BELOW {
                0.0
            } else {
                g
            }
        })
        .collect();
    let sum: f64 = vals.iter().sum();
    vals.iter_mut().for_each(|v| *v /= sum);
    vals
}

/// Discretises `spec` on a `support_h` x `support_v` grid and normalises it to unit mass.
pub fn discretize(spec: &KernelSpec) -> Result<KernelGrid> {
    discretize_with_max(spec, DEFAULT_MAX_SUPPORT)
}

pub fn discretize_with_max(spec: &KernelSpec, max_support: usize) -> Result<KernelGrid> {
    spec.validate()?;
    let (support_h, support_v) = (spec.support_h(), spec.support_v());
    let largest = support_h.max(support_v);
    if largest > max_support {
        return Err(Error::KernelTooLarge {
            support: largest,
            max: max_support,
        });
    }
    let h = gaussian_1d(spec.mu_h, spec.sigma_h, support_h);
    let v = gaussian_1d(spec.mu_v, spec.sigma_v, support_v);
    // A shifted mean can in principle push all mass off the grid; the
    // normalisation above would then be 0/0.
    if h.iter().any(|x| !x.is_finite()) || v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Argument(format!("degenerate kernel for {spec:?}")));
    }
    Ok(KernelGrid {
        support_h,
        support_v,
        terms: vec![SeparableTerm { weight: 1.0, h, v }],
        dense: OnceLock::new(),
    })
}

/// How samples outside the plane are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BorderRule {
    /// Reflection about the edge sample, which is not repeated (`dcb|abcd|cba`).
    #[default]
    Mirror,
    /// Reflection that repeats the edge sample (`cba|abcd|dcb`).
    Symmetric,
    /// Wrap around.
    Periodic,
    /// Repeat the edge sample.
    Replicate,
}

impl BorderRule {
    pub fn index(self, i: isize, n: usize) -> usize {
        let n_i = n as isize;
        if (0..n_i).contains(&i) {
            return i as usize;
        }
        match self {
            BorderRule::Mirror => {
                if n == 1 {
                    return 0;
                }
                let period = 2 * (n_i - 1);
                let m = i.rem_euclid(period);
                (if m >= n_i { period - m } else { m }) as usize
            }
            BorderRule::Symmetric => {
                let period = 2 * n_i;
                let m = i.rem_euclid(period);
                (if m >= n_i { period - 1 - m } else { m }) as usize
            }
            BorderRule::Periodic => i.rem_euclid(n_i) as usize,
            BorderRule::Replicate => i.clamp(0, n_i - 1) as usize,
        }
    }
}

/// Axis-aligned pixel rectangle inside a plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl Rect {
    pub fn new(x: usize, y: usize, width: usize, height: usize) -> Self {
        Self {
            x,
            y,
            width,
            height,
        }
    }

    pub fn area(&self) -> usize {
        self.width * self.height
    }
}

/// Single-channel view used by the convolution routines.
#[derive(Debug, Clone, Copy)]
pub struct PlaneRef<'a> {
    pub data: &'a [f64],
    pub width: usize,
    pub height: usize,
}

impl<'a> PlaneRef<'a> {
    pub fn new(data: &'a [f64], width: usize, height: usize) -> Self {
        debug_assert_eq!(data.len(), width * height);
        Self {
            data,
            width,
            height,
        }
    }
}

/// Which summation the convolution uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConvolutionPath {
    /// Separable passes when the grid carries a decomposition, dense otherwise.
    #[default]
    Auto,
    /// Always the dense 2-D sum over the full grid.
    Direct,
}

/// Correlates `plane` with `grid` on the pixels of `rect`; the result is
/// row-major over `rect`. Source samples outside the plane come from `border`.
///
/// The arithmetic for a given output pixel does not depend on `rect`, so
/// tiling an area into rectangles reproduces a single call bit for bit.
pub fn correlate_rect(
    plane: PlaneRef<'_>,
    grid: &KernelGrid,
    border: BorderRule,
    rect: Rect,
    path: ConvolutionPath,
) -> Vec<f64> {
    if rect.area() == 0 {
        return Vec::new();
    }
    match path {
        ConvolutionPath::Auto if !grid.terms.is_empty() => {
            correlate_separable(plane, grid, border, rect)
        }
        _ => correlate_direct(plane, grid, border, rect),
    }
}

fn source_indices(start: usize, len: usize, radius: usize, n: usize, border: BorderRule) -> Vec<usize> {
    (0..len + 2 * radius)
        .map(|k| border.index(start as isize + k as isize - radius as isize, n))
        .collect()
}

fn correlate_direct(plane: PlaneRef<'_>, grid: &KernelGrid, border: BorderRule, rect: Rect) -> Vec<f64> {
    let (rh, rv) = (grid.radius_h(), grid.radius_v());
    let cols = source_indices(rect.x, rect.width, rh, plane.width, border);
    let rows = source_indices(rect.y, rect.height, rv, plane.height, border);
    let weights = grid.weights();
    let mut out = Vec::with_capacity(rect.area());
    for oy in 0..rect.height {
        for ox in 0..rect.width {
            let mut acc = 0.0;
            for (kv, &sy) in rows[oy..oy + grid.support_v].iter().enumerate() {
                let src_row = &plane.data[sy * plane.width..(sy + 1) * plane.width];
                let krow = &weights[kv * grid.support_h..(kv + 1) * grid.support_h];
                for (k, &sx) in krow.iter().zip(&cols[ox..ox + grid.support_h]) {
                    acc += k * src_row[sx];
                }
            }
            out.push(acc);
        }
    }
    out
}

fn correlate_separable(
    plane: PlaneRef<'_>,
    grid: &KernelGrid,
    border: BorderRule,
    rect: Rect,
) -> Vec<f64> {
    let (rh, rv) = (grid.radius_h(), grid.radius_v());
    let cols = source_indices(rect.x, rect.width, rh, plane.width, border);
    let rows = source_indices(rect.y, rect.height, rv, plane.height, border);
    let mut out = vec![0.0; rect.area()];
    let mut tmp = vec![0.0; rows.len() * rect.width];
    for term in &grid.terms {
        // Horizontal pass over every source row the vertical pass will touch.
        for (ri, &sy) in rows.iter().enumerate() {
            let src_row = &plane.data[sy * plane.width..(sy + 1) * plane.width];
            for ox in 0..rect.width {
                let mut acc = 0.0;
                for (k, &sx) in term.h.iter().zip(&cols[ox..ox + grid.support_h]) {
                    acc += k * src_row[sx];
                }
                tmp[ri * rect.width + ox] = acc;
            }
        }
        for oy in 0..rect.height {
            for ox in 0..rect.width {
                let mut acc = 0.0;
                for (kv, k) in term.v.iter().enumerate() {
                    acc += k * tmp[(oy + kv) * rect.width + ox];
                }
                out[oy * rect.width + ox] += term.weight * acc;
            }
        }
    }
    out
}

/// Correlates a whole plane, parallelising over fixed bands of rows.
pub fn correlate_plane(
    plane: PlaneRef<'_>,
    grid: &KernelGrid,
    border: BorderRule,
    path: ConvolutionPath,
) -> Vec<f64> {
    let bands: Vec<Rect> = (0..plane.height)
        .step_by(ROW_BAND)
        .map(|y| Rect::new(0, y, plane.width, ROW_BAND.min(plane.height - y)))
        .collect();
    bands
        .par_iter()
        .map(|&band| correlate_rect(plane, grid, border, band, path))
        .collect::<Vec<_>>()
        .concat()
}

/// Filters every channel of `img` with `grid` centred on each pixel.
pub fn convolve(img: &ImagePlane, grid: &KernelGrid, border: BorderRule) -> ImagePlane {
    convolve_with(img, grid, border, ConvolutionPath::Auto)
}

pub fn convolve_with(
    img: &ImagePlane,
    grid: &KernelGrid,
    border: BorderRule,
    path: ConvolutionPath,
) -> ImagePlane {
    let (w, h) = (img.width(), img.height());
    img.map_channels(|data| Ok(correlate_plane(PlaneRef::new(data, w, h), grid, border, path)))
        .expect("convolution is infallible")
}
