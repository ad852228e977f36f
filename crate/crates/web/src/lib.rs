//! Browser bindings: Julia and Multibrot renders as RGBA buffers, and the
//! Misiurewicz finder returning a JSON report.
//!
//! The `*_rgba` and [`find_json`] functions are plain Rust and are what the
//! tests exercise; the `#[wasm_bindgen]` wrappers only convert errors.

use corrdyn_core::corr::{EscapeConfig, Exponent};
use corrdyn_core::misiurewicz::{
    refine_misiurewicz_auto, refine_misiurewicz_numeric, search_signs_42,
    solve_misiurewicz_42_with, MisiurewiczReport, SignSequence, SolveOptions,
};
use corrdyn_core::raster::{render_julia, render_multibrot, Bitmap, Window};
use corrdyn_core::{Complex64, Error};
use serde_json::json;
use wasm_bindgen::prelude::*;

/// Larger renders would stall the page.
pub const MAX_DEMO_PIXELS: u32 = 1 << 20;

fn window(center: Complex64, width: f64, px: u32, py: u32) -> Result<Window, Error> {
    if u64::from(px) * u64::from(py) > u64::from(MAX_DEMO_PIXELS) {
        return Err(Error::InvalidWindow(format!(
            "{px}x{py} is larger than the demo allows"
        )));
    }
    Window::new(center, width, px, py)
}

/// Escape-time shading: inside black, escaping points on a blue-to-white
/// ramp by `log(steps) / log(max_iter)`.
pub fn colorize(bmp: &Bitmap, max_iter: u32) -> Vec<u8> {
    let top = f64::from(max_iter.max(2)).ln();
    let mut out = Vec::with_capacity(bmp.data().len() * 4);
    for &v in bmp.data() {
        if v == 0 {
            out.extend_from_slice(&[0, 0, 0, 255]);
        } else {
            let t = (f64::from(v).ln() / top).clamp(0.0, 1.0);
            let ch = |lo: f64, hi: f64| (255.0 * (lo + (hi - lo) * t)) as u8;
            out.extend_from_slice(&[ch(0.05, 1.0), ch(0.1, 0.95), ch(0.3, 1.0), 255]);
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
pub fn julia_rgba(
    p: u32,
    q: u32,
    c: Complex64,
    center: Complex64,
    width: f64,
    px: u32,
    py: u32,
    max_iter: u32,
) -> Result<Vec<u8>, Error> {
    let exp = Exponent::new(p, q)?;
    let win = window(center, width, px, py)?;
    let cfg = EscapeConfig::for_parameter(exp, c.norm(), max_iter)?;
    Ok(colorize(&render_julia(c, exp, &win, &cfg)?, max_iter))
}

pub fn multibrot_rgba(
    p: u32,
    q: u32,
    center: Complex64,
    width: f64,
    px: u32,
    py: u32,
    max_iter: u32,
) -> Result<Vec<u8>, Error> {
    let exp = Exponent::new(p, q)?;
    let win = window(center, width, px, py)?;
    let cfg = EscapeConfig::for_parameter(exp, center.norm() + width, max_iter)?;
    Ok(colorize(&render_multibrot(exp, &win, &cfg)?, max_iter))
}

fn cjson(z: Complex64) -> serde_json::Value {
    json!([z.re, z.im])
}

pub fn report_json(rep: &MisiurewiczReport) -> String {
    json!({
        "p": rep.exponent.p(),
        "q": rep.exponent.q(),
        "a": cjson(rep.a),
        "preperiod": rep.preperiod,
        "period": rep.period,
        "signs": rep.signs.as_ref().map(|s| s.to_string()),
        "multiplier": cjson(rep.multiplier),
        "multiplier_abs": rep.multiplier.norm(),
        "w_prime": cjson(rep.w_prime),
        "mu": cjson(rep.mu),
        "residual": rep.residual,
        "orbit": rep.orbit.iter().map(|z| cjson(*z)).collect::<Vec<_>>(),
    })
    .to_string()
}

/// Locates a Misiurewicz parameter near `guess`. A `preperiod` or `period`
/// of 0 means "detect"; `signs` (for `(4,2)` only) may be empty.
pub fn find_json(
    p: u32,
    q: u32,
    guess: Complex64,
    signs: &str,
    preperiod: usize,
    period: usize,
) -> Result<String, Error> {
    let exp = Exponent::new(p, q)?;
    let is_42 = (p, q) == (4, 2);
    let opts = SolveOptions::default();
    let cfg = EscapeConfig::for_parameter(exp, guess.norm(), opts.survivor_depth)?;
    let auto = preperiod == 0 || period == 0;
    let rep = if !signs.is_empty() {
        if !is_42 || auto {
            return Err(Error::InvalidConfig(
                "signs need p=4, q=2 and an explicit preperiod and period".into(),
            ));
        }
        let s = SignSequence::parse(signs, preperiod, period)?;
        match solve_misiurewicz_42_with(&s, guess, &opts) {
            Err(Error::PatternMismatch { .. }) => search_signs_42(preperiod, period, guess, &opts),
            other => other,
        }
    } else if auto {
        refine_misiurewicz_auto(exp, guess, &cfg, 6, 4)
    } else if is_42 {
        search_signs_42(preperiod, period, guess, &opts)
    } else {
        refine_misiurewicz_numeric(exp, guess, preperiod, period, &cfg)
    }?;
    Ok(report_json(&rep))
}

fn js_err(e: Error) -> JsValue {
    JsValue::from_str(&e.to_string())
}

#[wasm_bindgen(js_name = renderJulia)]
#[allow(clippy::too_many_arguments)]
pub fn render_julia_js(
    p: u32,
    q: u32,
    c_re: f64,
    c_im: f64,
    center_re: f64,
    center_im: f64,
    width: f64,
    px: u32,
    py: u32,
    max_iter: u32,
) -> Result<Vec<u8>, JsValue> {
    julia_rgba(
        p,
        q,
        Complex64::new(c_re, c_im),
        Complex64::new(center_re, center_im),
        width,
        px,
        py,
        max_iter,
    )
    .map_err(js_err)
}

#[wasm_bindgen(js_name = renderMultibrot)]
#[allow(clippy::too_many_arguments)]
pub fn render_multibrot_js(
    p: u32,
    q: u32,
    center_re: f64,
    center_im: f64,
    width: f64,
    px: u32,
    py: u32,
    max_iter: u32,
) -> Result<Vec<u8>, JsValue> {
    multibrot_rgba(
        p,
        q,
        Complex64::new(center_re, center_im),
        width,
        px,
        py,
        max_iter,
    )
    .map_err(js_err)
}

#[wasm_bindgen(js_name = findMisiurewicz)]
pub fn find_misiurewicz_js(
    p: u32,
    q: u32,
    guess_re: f64,
    guess_im: f64,
    signs: &str,
    preperiod: u32,
    period: u32,
) -> Result<String, JsValue> {
    find_json(
        p,
        q,
        Complex64::new(guess_re, guess_im),
        signs,
        preperiod as usize,
        period as usize,
    )
    .map_err(js_err)
}
