//! File formats: 16-bit PGM (P5, big-endian), 8-bit PNG previews, curve CSV,
//! Misiurewicz report records and `key=value` metadata sidecars.
//!
//! Floats are written with 17 significant digits, which round-trips every
//! `f64` exactly. All writers go through [`atomic_write`].

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use num_complex::Complex64;

use crate::corr::Exponent;
use crate::error::{Error, Result};
use crate::misiurewicz::{MisiurewiczReport, SignSequence};
use crate::raster::Bitmap;
use crate::similarity::SimilarityCurve;

pub const REPORT_FORMAT: &str = "corrdyn-report-1";
pub const CSV_HEADER: &str = "k,scale_abs,d_hausdorff";

/// Writes `bytes` to a temporary file next to `path` and renames it into
/// place, so readers never see a partial file.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn format_complex(z: Complex64) -> String {
    format!("{},{}", format_f64(z.re), format_f64(z.im))
}

pub fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("not a number: {s:?}")))
}

/// Parses `re,im`. A bare real is accepted as `re,0`.
pub fn parse_complex(s: &str) -> Result<Complex64> {
    match s.split_once(',') {
        Some((re, im)) => Ok(Complex64::new(parse_f64(re)?, parse_f64(im)?)),
        None => Ok(Complex64::new(parse_f64(s)?, 0.0)),
    }
}

// ---------------------------------------------------------------- PGM / PNG

pub fn encode_pgm(bmp: &Bitmap) -> Vec<u8> {
    let header = format!("P5\n{} {}\n65535\n", bmp.width(), bmp.height());
    let mut out = Vec::with_capacity(header.len() + 2 * bmp.data().len());
    out.extend_from_slice(header.as_bytes());
    for &v in bmp.data() {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out
}

/// Reads a binary PGM with maxval 65535 (16-bit samples). Comments are not
/// supported.
pub fn decode_pgm(bytes: &[u8]) -> Result<Bitmap> {
    let bad = |msg: &str| Error::Parse(format!("PGM: {msg}"));
    let mut fields = Vec::with_capacity(4);
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("non-ASCII header"))?);
    }
    // Exactly one whitespace byte separates the header from the samples.
    pos += 1;
    if fields[0] != "P5" {
        return Err(bad("magic is not P5"));
    }
    let dim = |s: &str| s.parse::<u32>().map_err(|_| bad("bad dimension"));
    let (w, h) = (dim(fields[1])?, dim(fields[2])?);
    if fields[3] != "65535" {
        return Err(bad("maxval must be 65535"));
    }
    let n = u64::from(w) * u64::from(h);
    let body = bytes.get(pos..).unwrap_or(&[]);
    if body.len() as u64 != 2 * n {
        return Err(bad("sample count does not match dimensions"));
    }
    let data = body
        .chunks_exact(2)
        .map(|b| u16::from_be_bytes([b[0], b[1]]))
        .collect();
    Bitmap::from_raw(w, h, data)
}

pub fn write_pgm(path: &Path, bmp: &Bitmap) -> Result<()> {
    atomic_write(path, &encode_pgm(bmp))
}

pub fn read_pgm(path: &Path) -> Result<Bitmap> {
    decode_pgm(&std::fs::read(path)?)
}

/// 8-bit grayscale preview: inside pixels black, escape times clamped to 255.
pub fn encode_png(bmp: &Bitmap) -> Result<Vec<u8>> {
    let pixels: Vec<u8> = bmp.data().iter().map(|&v| v.min(255) as u8).collect();
    let img = image::GrayImage::from_raw(bmp.width(), bmp.height(), pixels)
        .ok_or_else(|| Error::Image("buffer size mismatch".into()))?;
    let mut out = std::io::Cursor::new(Vec::new());
    img.write_to(&mut out, image::ImageFormat::Png)
        .map_err(|e| Error::Image(e.to_string()))?;
    Ok(out.into_inner())
}

pub fn write_png(path: &Path, bmp: &Bitmap) -> Result<()> {
    atomic_write(path, &encode_png(bmp)?)
}

// ---------------------------------------------------------------- CSV

pub fn curve_to_csv(curve: &SimilarityCurve) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for ((k, s), d) in curve
        .scales
        .iter()
        .zip(&curve.scale_abs)
        .zip(&curve.distances)
    {
        let _ = writeln!(out, "{k},{},{}", format_f64(*s), format_f64(*d));
    }
    out
}

/// Parses the rows of a curve CSV as `(k, scale_abs, d_hausdorff)`.
pub fn parse_curve_csv(text: &str) -> Result<Vec<(u32, f64, f64)>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(CSV_HEADER) {
        return Err(Error::Parse(format!("CSV header must be {CSV_HEADER:?}")));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let cols: Vec<&str> = l.split(',').collect();
            if cols.len() != 3 {
                return Err(Error::Parse(format!("CSV row needs 3 columns: {l:?}")));
            }
            let k = cols[0]
                .trim()
                .parse::<u32>()
                .map_err(|_| Error::Parse(format!("bad k in {l:?}")))?;
            Ok((k, parse_f64(cols[1])?, parse_f64(cols[2])?))
        })
        .collect()
}

pub fn write_curve_csv(path: &Path, curve: &SimilarityCurve) -> Result<()> {
    atomic_write(path, curve_to_csv(curve).as_bytes())
}

// ---------------------------------------------------------------- key=value

/// Renders `key=value` lines. Keys may not contain `=` and values may not
/// contain line breaks.
pub fn format_key_values(entries: &[(String, String)]) -> Result<String> {
    let mut out = String::new();
    for (k, v) in entries {
        if k.is_empty() || k.contains(['=', '\n', '\r']) || v.contains(['\n', '\r']) {
            return Err(Error::InvalidConfig(format!(
                "cannot serialise entry {k:?}={v:?}"
            )));
        }
        let _ = writeln!(out, "{k}={v}");
    }
    Ok(out)
}

/// Parses `key=value` lines in order. Blank lines and lines starting with
/// `#` are skipped.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
    text.lines()
        .filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|l| {
            l.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| Error::Parse(format!("expected key=value, got {l:?}")))
        })
        .collect()
}

/// Path of the metadata sidecar for an output: `<out>.meta`.
pub fn meta_path(out: &Path) -> std::path::PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".meta");
    s.into()
}

pub fn write_meta(out: &Path, entries: &[(String, String)]) -> Result<()> {
    atomic_write(&meta_path(out), format_key_values(entries)?.as_bytes())
}

pub fn read_key_values(path: &Path) -> Result<Vec<(String, String)>> {
    parse_key_values(&std::fs::read_to_string(path)?)
}

// ---------------------------------------------------------------- reports

pub fn report_entries(rep: &MisiurewiczReport) -> Vec<(String, String)> {
    let mut e: Vec<(String, String)> = vec![
        ("format".into(), REPORT_FORMAT.into()),
        ("p".into(), rep.exponent.p().to_string()),
        ("q".into(), rep.exponent.q().to_string()),
        ("a".into(), format_complex(rep.a)),
        ("preperiod".into(), rep.preperiod.to_string()),
        ("period".into(), rep.period.to_string()),
        (
            "signs".into(),
            rep.signs
                .as_ref()
                .map_or_else(|| "none".to_string(), |s| s.to_string()),
        ),
        ("multiplier".into(), format_complex(rep.multiplier)),
        ("w_prime".into(), format_complex(rep.w_prime)),
        ("u_prime".into(), format_complex(rep.u_prime)),
        ("g_prime".into(), format_complex(rep.g_prime)),
        ("mu".into(), format_complex(rep.mu)),
        ("residual".into(), format_f64(rep.residual)),
        ("certified_depth".into(), rep.certified_depth.to_string()),
    ];
    e.extend(
        rep.orbit
            .iter()
            .enumerate()
            .map(|(j, z)| (format!("orbit.{j}"), format_complex(*z))),
    );
    e
}

pub fn report_to_string(rep: &MisiurewiczReport) -> String {
    format_key_values(&report_entries(rep)).expect("report entries are well formed")
}

pub fn parse_report(text: &str) -> Result<MisiurewiczReport> {
    let entries = parse_key_values(text)?;
    let mut map = std::collections::BTreeMap::new();
    for (k, v) in entries {
        if map.insert(k.clone(), v).is_some() {
            return Err(Error::Parse(format!("duplicate key {k:?}")));
        }
    }
    let mut take = |k: &str| {
        map.remove(k)
            .ok_or_else(|| Error::Parse(format!("missing key {k:?}")))
    };
    let int = |s: String| {
        s.parse::<usize>()
            .map_err(|_| Error::Parse(format!("not an integer: {s:?}")))
    };

    let format = take("format")?;
    if format != REPORT_FORMAT {
        return Err(Error::Parse(format!("unknown report format {format:?}")));
    }
    let p = int(take("p")?)? as u32;
    let q = int(take("q")?)? as u32;
    let exponent = Exponent::new(p, q)?;
    let a = parse_complex(&take("a")?)?;
    let preperiod = int(take("preperiod")?)?;
    let period = int(take("period")?)?;
    let signs = match take("signs")?.as_str() {
        "none" => None,
        word => Some(SignSequence::parse(word, preperiod, period)?),
    };
    let multiplier = parse_complex(&take("multiplier")?)?;
    let w_prime = parse_complex(&take("w_prime")?)?;
    let u_prime = parse_complex(&take("u_prime")?)?;
    let g_prime = parse_complex(&take("g_prime")?)?;
    let mu = parse_complex(&take("mu")?)?;
    let residual = parse_f64(&take("residual")?)?;
    let certified_depth = int(take("certified_depth")?)? as u32;
    let mut orbit = Vec::new();
    while let Ok(v) = take(&format!("orbit.{}", orbit.len())) {
        orbit.push(parse_complex(&v)?);
    }
    if let Some(extra) = map.keys().next() {
        return Err(Error::Parse(format!("unexpected key {extra:?}")));
    }
    let rep = MisiurewiczReport {
        a,
        exponent,
        preperiod,
        period,
        signs,
        orbit,
        multiplier,
        w_prime,
        u_prime,
        g_prime,
        mu,
        residual,
        certified_depth,
    };
    if rep.orbit.len() != preperiod + period + 1 {
        return Err(Error::Parse(format!(
            "report has {} orbit points, expected {}",
            rep.orbit.len(),
            preperiod + period + 1
        )));
    }
    Ok(rep)
}

pub fn write_report(path: &Path, rep: &MisiurewiczReport) -> Result<()> {
    atomic_write(path, report_to_string(rep).as_bytes())
}

pub fn read_report(path: &Path) -> Result<MisiurewiczReport> {
    parse_report(&std::fs::read_to_string(path)?)
}
