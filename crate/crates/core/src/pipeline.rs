//! Rendering of per-scale clouds and the similarity curves built from them.
//!
//! At magnification `λ^k` the window about the base point has half-width
//! `r / |λ|^k`, so every scale is rendered at the same pixel count. The
//! iteration budget grows by one period per scale: near the cycle, the
//! return map carries the escape-time level set at depth `N + n` onto the
//! one at depth `N`, so the level sets form a self-similar family just like
//! the set itself.

use num_complex::Complex64;

use crate::corr::{EscapeConfig, Exponent};
use crate::error::{Error, Result};
use crate::misiurewicz::MisiurewiczReport;
use crate::raster::{
    extract_point_cloud, render_julia_with, render_multibrot_with, CloudMode, PointCloud,
    RenderOptions, Window,
};
use crate::similarity::{
    default_r, julia_vs_multibrot_curve_scaled, self_similarity_curve_scaled, SimilarityCurve,
};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurveOptions {
    /// Curves cover `k = 0..=k_max`.
    pub k_max: u32,
    /// Pixels per side of each per-scale window.
    pub px: u32,
    /// Iteration budget of the Julia render at `k = 0`.
    pub base_iter: u32,
    /// Truncation radius; `None` uses [`default_r`].
    pub r: Option<f64>,
    pub mode: CloudMode,
    pub render: RenderOptions,
}

impl Default for CurveOptions {
    fn default() -> Self {
        Self {
            k_max: 3,
            px: 1024,
            base_iter: DEFAULT_BASE_ITER,
            r: None,
            mode: CloudMode::Boundary,
            render: RenderOptions::default(),
        }
    }
}

pub const DEFAULT_BASE_ITER: u32 = 4;

impl CurveOptions {
    pub fn radius(&self, report: &MisiurewiczReport) -> Result<f64> {
        let r = self.r.unwrap_or_else(|| default_r(report));
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "truncation radius must be > 0, got {r}"
            )));
        }
        Ok(r)
    }

    /// Julia budget at scale `k`.
    pub fn julia_iter(&self, report: &MisiurewiczReport, k: u32) -> u32 {
        self.base_iter + k * report.period as u32
    }
}

fn pow(z: Complex64, k: u32) -> Complex64 {
    (0..k).fold(Complex64::new(1.0, 0.0), |acc, _| acc * z)
}

/// Square window about `center` that the magnification `factor` maps onto
/// the disk of radius `r`.
pub fn scale_window(center: Complex64, factor: Complex64, r: f64, px: u32) -> Result<Window> {
    Window::square(center, r / factor.norm(), px)
}

/// Filled-Julia cloud of `K_a` for each `(factor, max_iter)` pair.
#[allow(clippy::too_many_arguments)]
pub fn julia_clouds(
    exp: Exponent,
    a: Complex64,
    center: Complex64,
    scales: &[(Complex64, u32)],
    r: f64,
    px: u32,
    mode: CloudMode,
    render: &RenderOptions,
) -> Result<Vec<PointCloud>> {
    scales
        .iter()
        .map(|&(factor, iters)| {
            let win = scale_window(center, factor, r, px)?;
            let cfg = EscapeConfig::for_parameter(exp, a.norm(), iters)?;
            let bmp = render_julia_with(a, exp, &win, &cfg, render)?;
            extract_point_cloud(&bmp, &win, mode)
        })
        .collect()
}

/// Multibrot cloud about `a` for each `(factor, max_iter)` pair.
pub fn multibrot_clouds(
    exp: Exponent,
    a: Complex64,
    scales: &[(Complex64, u32)],
    r: f64,
    px: u32,
    mode: CloudMode,
    render: &RenderOptions,
) -> Result<Vec<PointCloud>> {
    scales
        .iter()
        .map(|&(factor, iters)| {
            let win = scale_window(a, factor, r, px)?;
            let bound = a.norm() + win.width;
            let cfg = EscapeConfig::for_parameter(exp, bound, iters)?;
            let bmp = render_multibrot_with(exp, &win, &cfg, render)?;
            extract_point_cloud(&bmp, &win, mode)
        })
        .collect()
}

/// Self-similarity curve of `K_a` about `about` (the parameter or a cycle
/// point), re-rendered at every scale.
pub fn self_similarity_pipeline(
    report: &MisiurewiczReport,
    about: Complex64,
    opts: &CurveOptions,
) -> Result<SimilarityCurve> {
    let r = opts.radius(report)?;
    let scales: Vec<(Complex64, u32)> = (0..=opts.k_max + 1)
        .map(|k| (pow(report.multiplier, k), opts.julia_iter(report, k)))
        .collect();
    let clouds = julia_clouds(
        report.exponent,
        report.a,
        about,
        &scales,
        r,
        opts.px,
        opts.mode,
        &opts.render,
    )?;
    self_similarity_curve_scaled(&clouds, report.multiplier, about, r)
}

/// Multibrot-versus-Julia curve about `a`, re-rendered at every scale.
///
/// The Multibrot render gets one more iteration than the Julia render:
/// `c ∈ M` is tested through the orbit of 0, whose first step lands on `c`.
pub fn julia_vs_multibrot_pipeline(
    report: &MisiurewiczReport,
    mu: Complex64,
    opts: &CurveOptions,
) -> Result<SimilarityCurve> {
    let r = opts.radius(report)?;
    let a = report.a;
    let ks = 0..=opts.k_max;
    let m_scales: Vec<(Complex64, u32)> = ks
        .clone()
        .map(|k| (pow(report.multiplier, k), opts.julia_iter(report, k) + 1))
        .collect();
    let k_scales: Vec<(Complex64, u32)> = ks
        .map(|k| (pow(report.multiplier, k) * mu, opts.julia_iter(report, k)))
        .collect();
    let m_clouds = multibrot_clouds(
        report.exponent,
        a,
        &m_scales,
        r,
        opts.px,
        opts.mode,
        &opts.render,
    )?;
    let k_clouds = julia_clouds(
        report.exponent,
        a,
        a,
        &k_scales,
        r,
        opts.px,
        opts.mode,
        &opts.render,
    )?;
    julia_vs_multibrot_curve_scaled(&m_clouds, &k_clouds, report.multiplier, mu, a, r)
}
