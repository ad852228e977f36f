//! Parallel rasterisation of filled Julia sets and Multibrot sets, and
//! extraction of point clouds from the resulting bitmaps.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::corr::{escape_radius, EscapeConfig, Exponent};
use crate::error::{Error, Result};
use crate::orbit::{MembershipVerdict, SetIterator};

/// Upper bound on `pixels_x * pixels_y`.
pub const MAX_PIXELS: u64 = 1 << 26;

/// A rectangular viewport with square pixels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Window {
    pub center: Complex64,
    pub width: f64,
    pub pixels_x: u32,
    pub pixels_y: u32,
}

impl Window {
    pub fn new(center: Complex64, width: f64, pixels_x: u32, pixels_y: u32) -> Result<Self> {
        let win = Self {
            center,
            width,
            pixels_x,
            pixels_y,
        };
        win.validate()?;
        Ok(win)
    }

    /// Square window centred on `center` with half-width `half`.
    pub fn square(center: Complex64, half: f64, pixels: u32) -> Result<Self> {
        Self::new(center, 2.0 * half, pixels, pixels)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.width > 0.0 && self.width.is_finite()) {
            return Err(Error::InvalidWindow(format!(
                "width must be > 0, got {}",
                self.width
            )));
        }
        if !(self.center.re.is_finite() && self.center.im.is_finite()) {
            return Err(Error::InvalidWindow("center must be finite".into()));
        }
        if self.pixels_x == 0 || self.pixels_y == 0 {
            return Err(Error::InvalidWindow("pixel counts must be positive".into()));
        }
        let total = u64::from(self.pixels_x) * u64::from(self.pixels_y);
        if total > MAX_PIXELS {
            return Err(Error::InvalidWindow(format!(
                "{}x{} = {total} pixels exceeds the bound of {MAX_PIXELS}",
                self.pixels_x, self.pixels_y
            )));
        }
        Ok(())
    }

    pub fn pixel_size(&self) -> f64 {
        self.width / f64::from(self.pixels_x)
    }

    pub fn height(&self) -> f64 {
        self.width * f64::from(self.pixels_y) / f64::from(self.pixels_x)
    }

    /// Point at fractional pixel coordinates; `(i + 0.5, j + 0.5)` is the centre
    /// of pixel `(i, j)`. Row 0 is the top of the image.
    fn point_at(&self, x: f64, y: f64) -> Complex64 {
        let s = self.pixel_size();
        Complex64::new(
            self.center.re - 0.5 * self.width + x * s,
            self.center.im + 0.5 * self.height() - y * s,
        )
    }

    pub fn pixel_center(&self, i: u32, j: u32) -> Complex64 {
        self.point_at(f64::from(i) + 0.5, f64::from(j) + 0.5)
    }

    /// The pixel containing `z`, if any.
    pub fn pixel_of(&self, z: Complex64) -> Option<(u32, u32)> {
        let s = self.pixel_size();
        let x = (z.re - (self.center.re - 0.5 * self.width)) / s;
        let y = ((self.center.im + 0.5 * self.height()) - z.im) / s;
        if x < 0.0 || y < 0.0 {
            return None;
        }
        let (i, j) = (x.floor() as u64, y.floor() as u64);
        (i < u64::from(self.pixels_x) && j < u64::from(self.pixels_y))
            .then_some((i as u32, j as u32))
    }
}

/// Row-major 16-bit escape map: 0 is inside, otherwise escape step + 1
/// (saturating).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bitmap {
    width: u32,
    height: u32,
    data: Vec<u16>,
}

impl Bitmap {
    pub fn from_raw(width: u32, height: u32, data: Vec<u16>) -> Result<Self> {
        if data.len() as u64 != u64::from(width) * u64::from(height) {
            return Err(Error::InvalidWindow(format!(
                "bitmap data has {} samples, expected {width}x{height}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[u16] {
        &self.data
    }

    pub fn get(&self, i: u32, j: u32) -> u16 {
        self.data[j as usize * self.width as usize + i as usize]
    }

    pub fn is_inside(&self, i: u32, j: u32) -> bool {
        self.get(i, j) == 0
    }

    pub fn inside_count(&self) -> usize {
        self.data.iter().filter(|&&v| v == 0).count()
    }
}

fn pixel_value(v: MembershipVerdict) -> u16 {
    if v.is_inside() {
        0
    } else {
        u16::try_from(v.steps.saturating_add(1)).unwrap_or(u16::MAX)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RenderOptions {
    /// Rows per work unit; 0 picks a default. The output does not depend on it.
    pub band_rows: u32,
    /// Sample the four quarter-pixel points and keep the smallest value, so a
    /// pixel is inside when any sample is.
    pub supersample: bool,
    /// Escape-radius margin used per pixel by the Multibrot renderer.
    pub margin: f64,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            band_rows: 0,
            supersample: false,
            margin: EscapeConfig::DEFAULT_MARGIN,
        }
    }
}

const DEFAULT_BAND_ROWS: u32 = 4;
const SUBSAMPLES: [(f64, f64); 4] = [(0.25, 0.25), (0.75, 0.25), (0.25, 0.75), (0.75, 0.75)];

/// Splits the bitmap into row bands and fills them in parallel. `sample`
/// maps a point to its pixel value using per-band scratch state.
fn render_bands<S, F>(
    win: &Window,
    opts: &RenderOptions,
    init: impl Fn() -> S + Sync,
    sample: F,
) -> Bitmap
where
    F: Fn(&mut S, Complex64) -> u16 + Sync,
{
    let width = win.pixels_x as usize;
    let band_rows = if opts.band_rows == 0 {
        DEFAULT_BAND_ROWS
    } else {
        opts.band_rows
    } as usize;
    let mut data = vec![0u16; width * win.pixels_y as usize];
    data.par_chunks_mut(band_rows * width)
        .enumerate()
        .for_each(|(band, chunk)| {
            let mut state = init();
            for (offset, value) in chunk.iter_mut().enumerate() {
                let i = (offset % width) as f64;
                let j = (band * band_rows + offset / width) as f64;
                *value = if opts.supersample {
                    SUBSAMPLES
                        .iter()
                        .map(|&(dx, dy)| sample(&mut state, win.point_at(i + dx, j + dy)))
                        .min()
                        .expect("four subsamples")
                } else {
                    sample(&mut state, win.point_at(i + 0.5, j + 0.5))
                };
            }
        });
    Bitmap {
        width: win.pixels_x,
        height: win.pixels_y,
        data,
    }
}

/// Renders the filled Julia set `K_c` over `win`.
pub fn render_julia(
    c: Complex64,
    exp: Exponent,
    win: &Window,
    cfg: &EscapeConfig,
) -> Result<Bitmap> {
    render_julia_with(c, exp, win, cfg, &RenderOptions::default())
}

pub fn render_julia_with(
    c: Complex64,
    exp: Exponent,
    win: &Window,
    cfg: &EscapeConfig,
    opts: &RenderOptions,
) -> Result<Bitmap> {
    win.validate()?;
    cfg.validate()?;
    cfg.check_radius(exp, c.norm())?;
    Ok(render_bands(
        win,
        opts,
        || SetIterator::new(exp, c, *cfg),
        |it, z| pixel_value(it.membership(z)),
    ))
}

/// Renders the Multibrot set: pixel `c` is inside when the critical point 0
/// is in `K_c`. The escape radius is recomputed per pixel from `|c|`; the
/// other fields come from `cfg_proto`.
pub fn render_multibrot(exp: Exponent, win: &Window, cfg_proto: &EscapeConfig) -> Result<Bitmap> {
    render_multibrot_with(exp, win, cfg_proto, &RenderOptions::default())
}

pub fn render_multibrot_with(
    exp: Exponent,
    win: &Window,
    cfg_proto: &EscapeConfig,
    opts: &RenderOptions,
) -> Result<Bitmap> {
    win.validate()?;
    cfg_proto.validate()?;
    if !(opts.margin >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "margin must be >= 0, got {}",
            opts.margin
        )));
    }
    let origin = Complex64::new(0.0, 0.0);
    Ok(render_bands(
        win,
        opts,
        || SetIterator::new(exp, origin, *cfg_proto),
        |it, c| {
            let radius = escape_radius(exp, c.norm(), cfg_proto.lambda_esc, opts.margin)
                .expect("escape radius exists for finite |c| and lambda > 1");
            it.reset(
                c,
                EscapeConfig {
                    radius,
                    ..*cfg_proto
                },
            );
            pixel_value(it.membership(origin))
        },
    ))
}

/// Finite sample of a planar set. `spacing` is the distance between
/// neighbouring samples (the pixel size for rendered clouds; 0 if unknown).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Complex64>,
    pub spacing: f64,
}

impl PointCloud {
    pub fn new(points: Vec<Complex64>, spacing: f64) -> Self {
        Self { points, spacing }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CloudMode {
    /// Every inside pixel.
    Inside,
    /// Inside pixels with at least one escaped 4-neighbour.
    Boundary,
}

/// Centres of the qualifying pixels, in row-major order.
pub fn extract_point_cloud(bmp: &Bitmap, win: &Window, mode: CloudMode) -> Result<PointCloud> {
    if bmp.width != win.pixels_x || bmp.height != win.pixels_y {
        return Err(Error::InvalidWindow(format!(
            "bitmap is {}x{} but window is {}x{}",
            bmp.width, bmp.height, win.pixels_x, win.pixels_y
        )));
    }
    let (w, h) = (bmp.width, bmp.height);
    let escaped = |i: i64, j: i64| {
        i >= 0
            && j >= 0
            && i < i64::from(w)
            && j < i64::from(h)
            && !bmp.is_inside(i as u32, j as u32)
    };
    let mut points = Vec::new();
    for j in 0..h {
        for i in 0..w {
            if !bmp.is_inside(i, j) {
                continue;
            }
            let keep = match mode {
                CloudMode::Inside => true,
                CloudMode::Boundary => {
                    let (x, y) = (i64::from(i), i64::from(j));
                    escaped(x - 1, y) || escaped(x + 1, y) || escaped(x, y - 1) || escaped(x, y + 1)
                }
            };
            if keep {
                points.push(win.pixel_center(i, j));
            }
        }
    }
    if points.is_empty() {
        return Err(Error::EmptyCloud);
    }
    Ok(PointCloud::new(points, win.pixel_size()))
}
