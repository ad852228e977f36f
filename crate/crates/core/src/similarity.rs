//! Koenigs linearisation at a repelling cycle, truncated and magnified point
//! clouds, exact Hausdorff distances, and the similarity curves built on
//! them.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::corr::LocalBranch;
use crate::error::{Error, Result};
use crate::misiurewicz::MisiurewiczReport;
use crate::raster::PointCloud;

/// Stop once successive Koenigs estimates differ by less than this, relative
/// to `max(1, |φ|)`.
pub const KOENIGS_TOL: f64 = 1e-12;
pub const KOENIGS_MAX_ITER: usize = 64;
/// A cloud's spacing after magnification must not exceed `r` divided by this.
pub const RESOLUTION_FACTOR: f64 = 50.0;
pub const MIN_CIRCLE_SAMPLES: usize = 64;
pub const DEFAULT_CIRCLE_SAMPLES: usize = 256;

#[derive(Clone, Debug)]
enum ReturnMap {
    Linear,
    /// Local branches `z_j -> z_{j+1}` around the cycle, starting at the
    /// fixed point of the return map.
    Cycle(Vec<LocalBranch>),
}

/// Linearising coordinate `φ` of the return map `h` at a repelling fixed
/// point: `φ(h(z)) = λ φ(z)`, `φ(z_ℓ) = 0`, `φ'(z_ℓ) = 1`.
///
/// `h` is expanding, so `φ` is evaluated through the contracting inverse:
/// `φ(z) = lim λ^m (h^{-m}(z) - z_ℓ)`.
#[derive(Clone, Debug)]
pub struct KoenigsMap {
    fixed_point: Complex64,
    multiplier: Complex64,
    domain_radius: f64,
    map: ReturnMap,
}

/// Builds the Koenigs map at the landing point of a report's critical orbit.
///
/// `domain_radius` of `None` picks [`default_domain_radius`].
pub fn koenigs_build(report: &MisiurewiczReport, domain_radius: Option<f64>) -> Result<KoenigsMap> {
    if !(report.multiplier.norm() > 1.0) {
        return Err(Error::NotRepelling {
            modulus: report.multiplier.norm(),
        });
    }
    let l = report.preperiod;
    let branches = (l..l + report.period)
        .map(|j| {
            LocalBranch::new(
                report.orbit[j],
                report.orbit[j + 1],
                report.a,
                report.exponent,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let multiplier = branches
        .iter()
        .fold(Complex64::new(1.0, 0.0), |acc, b| acc * b.derivative());
    let domain_radius = domain_radius.unwrap_or_else(|| default_domain_radius(report));
    if !(domain_radius > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "domain radius must be > 0, got {domain_radius}"
        )));
    }
    Ok(KoenigsMap {
        fixed_point: report.landing_point(),
        multiplier,
        domain_radius,
        map: ReturnMap::Cycle(branches),
    })
}

/// A quarter of the smallest `|z_j|` and `|z_{j+1} - a|` around the cycle,
/// which keeps every branch well inside its domain of univalence.
pub fn default_domain_radius(report: &MisiurewiczReport) -> f64 {
    let l = report.preperiod;
    (l..l + report.period)
        .map(|j| {
            report.orbit[j]
                .norm()
                .min((report.orbit[j + 1] - report.a).norm())
        })
        .fold(f64::INFINITY, f64::min)
        * 0.25
}

impl KoenigsMap {
    /// Koenigs map of the linear map `z ↦ z_ℓ + λ (z - z_ℓ)`.
    pub fn linear(
        fixed_point: Complex64,
        multiplier: Complex64,
        domain_radius: f64,
    ) -> Result<Self> {
        if !(multiplier.norm() > 1.0) {
            return Err(Error::NotRepelling {
                modulus: multiplier.norm(),
            });
        }
        Ok(Self {
            fixed_point,
            multiplier,
            domain_radius,
            map: ReturnMap::Linear,
        })
    }

    pub fn fixed_point(&self) -> Complex64 {
        self.fixed_point
    }

    pub fn multiplier(&self) -> Complex64 {
        self.multiplier
    }

    pub fn domain_radius(&self) -> f64 {
        self.domain_radius
    }

    /// Offset of `h(z)` from the fixed point, given the offset of `z`.
    fn forward_offset(&self, mut d: Complex64) -> Result<Complex64> {
        match &self.map {
            ReturnMap::Linear => Ok(d * self.multiplier),
            ReturnMap::Cycle(branches) => {
                for b in branches {
                    d = b.forward_offset(d)?;
                }
                Ok(d)
            }
        }
    }

    fn inverse_offset(&self, mut d: Complex64) -> Result<Complex64> {
        match &self.map {
            ReturnMap::Linear => Ok(d / self.multiplier),
            ReturnMap::Cycle(branches) => {
                for b in branches.iter().rev() {
                    d = b.inverse_offset(d)?;
                }
                Ok(d)
            }
        }
    }

    /// The return map `h` along the tracked branches.
    pub fn h(&self, z: Complex64) -> Result<Complex64> {
        Ok(self.fixed_point + self.forward_offset(z - self.fixed_point)?)
    }

    /// The inverse branch of `h` fixing `z_ℓ`.
    pub fn h_inverse(&self, z: Complex64) -> Result<Complex64> {
        Ok(self.fixed_point + self.inverse_offset(z - self.fixed_point)?)
    }

    /// `φ(z)`, with the number of inverse iterations used.
    pub fn eval_with_count(&self, z: Complex64) -> Result<(Complex64, usize)> {
        let mut d = z - self.fixed_point;
        if !(d.norm() <= self.domain_radius) {
            return Err(Error::DivergedFromDomain);
        }
        let mut scale = Complex64::new(1.0, 0.0);
        let mut estimate = d;
        for m in 1..=KOENIGS_MAX_ITER {
            d = self.inverse_offset(d)?;
            scale *= self.multiplier;
            let next = d * scale;
            let settled = (next - estimate).norm() < KOENIGS_TOL * next.norm().max(1.0);
            estimate = next;
            if settled {
                return Ok((estimate, m));
            }
        }
        Ok((estimate, KOENIGS_MAX_ITER))
    }

    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        self.eval_with_count(z).map(|(phi, _)| phi)
    }
}

/// Magnifies `a` about `center` by `factor`, keeps the points within the
/// closed disk of radius `r`, and adds `circle_samples` equispaced points of
/// the circle of radius `r`.
pub fn truncate_normalize(
    a: &PointCloud,
    center: Complex64,
    factor: Complex64,
    r: f64,
    circle_samples: usize,
) -> Result<PointCloud> {
    if !(r > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "truncation radius must be > 0, got {r}"
        )));
    }
    if circle_samples < MIN_CIRCLE_SAMPLES {
        return Err(Error::InvalidConfig(format!(
            "need at least {MIN_CIRCLE_SAMPLES} circle samples, got {circle_samples}"
        )));
    }
    let mut points: Vec<Complex64> = a
        .points
        .iter()
        .map(|&p| (p - center) * factor)
        .filter(|p| p.norm() <= r)
        .collect();
    points.extend(circle(r, circle_samples));
    Ok(PointCloud::new(points, a.spacing * factor.norm()))
}

fn circle(r: f64, n: usize) -> impl Iterator<Item = Complex64> {
    (0..n).map(move |k| Complex64::from_polar(r, TAU * k as f64 / n as f64))
}

/// `max(256, ⌈2πr / pixel⌉)` circle samples.
pub fn default_circle_samples(r: f64, pixel: f64) -> usize {
    if pixel > 0.0 {
        DEFAULT_CIRCLE_SAMPLES.max((TAU * r / pixel).ceil() as usize)
    } else {
        DEFAULT_CIRCLE_SAMPLES
    }
}

/// Uniform-grid bucket index over a point set for exact nearest-neighbour
/// queries.
struct GridIndex<'a> {
    points: &'a [Complex64],
    origin: Complex64,
    cell: f64,
    nx: i64,
    ny: i64,
    /// CSR layout: cell `k` holds `order[starts[k]..starts[k + 1]]`.
    starts: Vec<usize>,
    order: Vec<usize>,
}

impl<'a> GridIndex<'a> {
    fn new(points: &'a [Complex64]) -> Self {
        let (mut lo, mut hi) = (points[0], points[0]);
        for p in points {
            lo = Complex64::new(lo.re.min(p.re), lo.im.min(p.im));
            hi = Complex64::new(hi.re.max(p.re), hi.im.max(p.im));
        }
        let (w, h) = (hi.re - lo.re, hi.im - lo.im);
        let n = points.len() as f64;
        // About two points per cell on a filled box; a degenerate box falls
        // back to cells along its longer side.
        let mut cell = (2.0 * w * h / n).sqrt();
        if !(cell > 0.0) || w / cell * (h / cell) > 4.0 * n {
            cell = w.max(h) / n.sqrt().max(1.0);
        }
        if !(cell > 0.0 && cell.is_finite()) {
            cell = 1.0;
        }
        let nx = ((w / cell).floor() as i64 + 1).max(1);
        let ny = ((h / cell).floor() as i64 + 1).max(1);
        let mut counts = vec![0usize; (nx * ny) as usize + 1];
        let key = |p: &Complex64| {
            let ix = (((p.re - lo.re) / cell).floor() as i64).clamp(0, nx - 1);
            let iy = (((p.im - lo.im) / cell).floor() as i64).clamp(0, ny - 1);
            (iy * nx + ix) as usize
        };
        for p in points {
            counts[key(p) + 1] += 1;
        }
        for k in 1..counts.len() {
            counts[k] += counts[k - 1];
        }
        let mut fill = counts.clone();
        let mut order = vec![0; points.len()];
        for (i, p) in points.iter().enumerate() {
            let k = key(p);
            order[fill[k]] = i;
            fill[k] += 1;
        }
        Self {
            points,
            origin: lo,
            cell,
            nx,
            ny,
            starts: counts,
            order,
        }
    }

    fn scan_cell(&self, ix: i64, iy: i64, z: Complex64, best: &mut f64) {
        let k = (iy * self.nx + ix) as usize;
        for &i in &self.order[self.starts[k]..self.starts[k + 1]] {
            let d = (self.points[i] - z).norm();
            if d < *best {
                *best = d;
            }
        }
    }

    /// Exact distance from `z` to the nearest indexed point.
    fn nearest(&self, z: Complex64) -> f64 {
        // Cell coordinates of z, possibly outside the grid.
        let qx = ((z.re - self.origin.re) / self.cell).floor() as i64;
        let qy = ((z.im - self.origin.im) / self.cell).floor() as i64;
        let dist_to_range = |q: i64, n: i64| {
            if q < 0 {
                -q
            } else if q >= n {
                q - n + 1
            } else {
                0
            }
        };
        let first = dist_to_range(qx, self.nx).max(dist_to_range(qy, self.ny));
        let last = [qx, self.nx - 1 - qx, qy, self.ny - 1 - qy]
            .iter()
            .map(|v| v.abs())
            .max()
            .unwrap_or(0)
            + first;
        let mut best = f64::INFINITY;
        for ring in first..=last {
            // Any cell at Chebyshev index distance >= ring lies at least
            // (ring - 1) cells away.
            if (ring - 1) as f64 * self.cell > best {
                break;
            }
            let (x0, x1) = (qx - ring, qx + ring);
            let (y0, y1) = (qy - ring, qy + ring);
            for iy in y0.max(0)..=y1.min(self.ny - 1) {
                if iy == y0 || iy == y1 {
                    for ix in x0.max(0)..=x1.min(self.nx - 1) {
                        self.scan_cell(ix, iy, z, &mut best);
                    }
                } else {
                    for ix in [x0, x1] {
                        if (0..self.nx).contains(&ix) {
                            self.scan_cell(ix, iy, z, &mut best);
                        }
                    }
                }
            }
        }
        best
    }
}

/// `sup_{a ∈ A} inf_{b ∈ B} |a - b|`.
pub fn directed_hausdorff(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let index = GridIndex::new(&b.points);
    Ok(a.points
        .par_iter()
        .map(|&z| index.nearest(z))
        .reduce(|| 0.0, f64::max))
}

/// Symmetric Hausdorff distance between two finite clouds.
pub fn hausdorff_distance(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    Ok(directed_hausdorff(a, b)?.max(directed_hausdorff(b, a)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CurveMode {
    SelfSimilarity,
    JuliaVsMultibrot,
}

impl CurveMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            CurveMode::SelfSimilarity => "self_similarity",
            CurveMode::JuliaVsMultibrot => "julia_vs_multibrot",
        }
    }
}

/// Hausdorff distances between magnified, truncated clouds, one per
/// magnification exponent `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityCurve {
    pub mode: CurveMode,
    pub r: f64,
    /// Largest cloud spacing after magnification; the trend tolerance.
    pub pixel: f64,
    pub scales: Vec<u32>,
    /// `|λ|^k`.
    pub scale_abs: Vec<f64>,
    pub distances: Vec<f64>,
}

impl SimilarityCurve {
    /// Each distance exceeds its predecessor by at most one pixel, and the
    /// last does not exceed the first.
    pub fn trend_passes(&self) -> bool {
        trend_passes(&self.distances, self.pixel)
    }
}

pub fn trend_passes(distances: &[f64], pixel: f64) -> bool {
    let steps_ok = distances.windows(2).all(|w| w[1] <= w[0] + pixel);
    let ends_ok = match (distances.first(), distances.last()) {
        (Some(first), Some(last)) => last <= first,
        _ => false,
    };
    steps_ok && ends_ok
}

/// `0.5 |λ|^{-1}` times the distance from `a` to the nearest cycle point.
pub fn default_r(report: &MisiurewiczReport) -> f64 {
    let nearest = report
        .cycle()
        .iter()
        .map(|z| (z - report.a).norm())
        .fold(f64::INFINITY, f64::min);
    0.5 * nearest / report.multiplier.norm()
}

fn check_resolution(cloud: &PointCloud, factor: Complex64, r: f64) -> Result<f64> {
    let spacing = cloud.spacing * factor.norm();
    let limit = r / RESOLUTION_FACTOR;
    if spacing > limit {
        return Err(Error::ResolutionTooCoarse {
            spacing: cloud.spacing,
            scale: factor.norm(),
            limit,
        });
    }
    Ok(spacing)
}

fn pow(z: Complex64, k: u32) -> Complex64 {
    (0..k).fold(Complex64::new(1.0, 0.0), |acc, _| acc * z)
}

/// A magnified, truncated cloud ready for comparison, and its spacing.
fn prepared(
    cloud: &PointCloud,
    center: Complex64,
    factor: Complex64,
    r: f64,
    pixel: f64,
) -> Result<PointCloud> {
    truncate_normalize(cloud, center, factor, r, default_circle_samples(r, pixel))
}

/// Self-similarity curve from one cloud per magnification: `clouds[k]` is
/// compared at factor `λ^k` with `clouds[k+1]` at `λ^{k+1}`, for
/// `k = 0..clouds.len()-1`.
pub fn self_similarity_curve_scaled(
    clouds: &[PointCloud],
    lambda: Complex64,
    about: Complex64,
    r: f64,
) -> Result<SimilarityCurve> {
    if clouds.len() < 2 {
        return Err(Error::InvalidConfig(
            "need clouds for at least two scales".into(),
        ));
    }
    let factors: Vec<Complex64> = (0..clouds.len() as u32).map(|k| pow(lambda, k)).collect();
    let mut pixel = 0.0f64;
    for (cloud, &f) in clouds.iter().zip(&factors) {
        pixel = pixel.max(check_resolution(cloud, f, r)?);
    }
    let normalized = clouds
        .iter()
        .zip(&factors)
        .map(|(c, &f)| prepared(c, about, f, r, pixel))
        .collect::<Result<Vec<_>>>()?;
    let k_max = clouds.len() as u32 - 2;
    let distances = normalized
        .windows(2)
        .map(|w| hausdorff_distance(&w[0], &w[1]))
        .collect::<Result<Vec<_>>>()?;
    Ok(SimilarityCurve {
        mode: CurveMode::SelfSimilarity,
        r,
        pixel,
        scales: (0..=k_max).collect(),
        scale_abs: factors[..=k_max as usize]
            .iter()
            .map(|f| f.norm())
            .collect(),
        distances,
    })
}

/// Self-similarity curve of a single cloud about `about`, for
/// `k = 0..=k_max`. The cloud must resolve scale `λ^{k_max+1}`.
pub fn self_similarity_curve(
    k_cloud: &PointCloud,
    report: &MisiurewiczReport,
    about: Complex64,
    r: f64,
    k_max: u32,
) -> Result<SimilarityCurve> {
    let clouds = vec![k_cloud.clone(); k_max as usize + 2];
    self_similarity_curve_scaled(&clouds, report.multiplier, about, r)
}

/// Multibrot-versus-Julia curve from per-scale clouds: `m_clouds[k]` at
/// factor `λ^k` against `k_clouds[k]` at `μ λ^k`, both about `a`.
pub fn julia_vs_multibrot_curve_scaled(
    m_clouds: &[PointCloud],
    k_clouds: &[PointCloud],
    lambda: Complex64,
    mu: Complex64,
    a: Complex64,
    r: f64,
) -> Result<SimilarityCurve> {
    if m_clouds.is_empty() || m_clouds.len() != k_clouds.len() {
        return Err(Error::InvalidConfig(format!(
            "need matching nonempty cloud lists, got {} and {}",
            m_clouds.len(),
            k_clouds.len()
        )));
    }
    let n = m_clouds.len() as u32;
    let mut pixel = 0.0f64;
    for k in 0..n {
        let f = pow(lambda, k);
        pixel = pixel.max(check_resolution(&m_clouds[k as usize], f, r)?);
        pixel = pixel.max(check_resolution(&k_clouds[k as usize], f * mu, r)?);
    }
    let distances = (0..n)
        .map(|k| {
            let f = pow(lambda, k);
            let m = prepared(&m_clouds[k as usize], a, f, r, pixel)?;
            let j = prepared(&k_clouds[k as usize], a, f * mu, r, pixel)?;
            hausdorff_distance(&m, &j)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SimilarityCurve {
        mode: CurveMode::JuliaVsMultibrot,
        r,
        pixel,
        scales: (0..n).collect(),
        scale_abs: (0..n).map(|k| lambda.norm().powi(k as i32)).collect(),
        distances,
    })
}

/// Multibrot-versus-Julia curve of two single clouds, `k = 0..=k_max`, with
/// `μ` from the report.
pub fn julia_vs_multibrot_curve(
    m_cloud: &PointCloud,
    k_cloud: &PointCloud,
    report: &MisiurewiczReport,
    r: f64,
    k_max: u32,
) -> Result<SimilarityCurve> {
    let n = k_max as usize + 1;
    julia_vs_multibrot_curve_scaled(
        &vec![m_cloud.clone(); n],
        &vec![k_cloud.clone(); n],
        report.multiplier,
        report.mu,
        report.a,
        r,
    )
}

/// Limit models along the cycle: `B_ℓ = φ(cloud)`, then
/// `B_{ℓ+i} = d_i · B_{ℓ+i-1}` for each given branch derivative `d_i`.
pub fn limit_model(
    k_cloud: &PointCloud,
    koenigs: &KoenigsMap,
    pushforward_derivs: &[Complex64],
) -> Result<Vec<PointCloud>> {
    let base = k_cloud
        .points
        .par_iter()
        .map(|&z| koenigs.eval(z))
        .collect::<Result<Vec<_>>>()?;
    let mut models = vec![PointCloud::new(base, k_cloud.spacing)];
    for &d in pushforward_derivs {
        let prev = models.last().expect("nonempty");
        models.push(PointCloud::new(
            prev.points.iter().map(|&p| p * d).collect(),
            prev.spacing * d.norm(),
        ));
    }
    Ok(models)
}

/// The limit model about the parameter itself, `B_0 = B_ℓ / g'`, where `g'`
/// carries `z_1 = a` to the cycle. The Multibrot limit model is `μ B_0`.
pub fn parameter_limit_model(b_l: &PointCloud, g_prime: Complex64) -> PointCloud {
    PointCloud::new(
        b_l.points.iter().map(|&p| p / g_prime).collect(),
        b_l.spacing / g_prime.norm(),
    )
}
