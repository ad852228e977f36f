use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use corrdyn_core::corr::{escape_radius, EscapeConfig, Exponent};
use corrdyn_core::io::{self, format_complex, format_f64, parse_complex};
use corrdyn_core::misiurewicz::{
    refine_misiurewicz_auto, refine_misiurewicz_numeric, search_signs_42,
    solve_misiurewicz_42_with, MisiurewiczReport, SignSequence, SolveOptions, DEFAULT_HORIZON,
    DEFAULT_SURVIVOR_DEPTH,
};
use corrdyn_core::pipeline::{
    julia_vs_multibrot_pipeline, self_similarity_pipeline, CurveOptions, DEFAULT_BASE_ITER,
};
use corrdyn_core::raster::{
    render_julia_with, render_multibrot_with, Bitmap, CloudMode, RenderOptions, Window,
};
use corrdyn_core::similarity::SimilarityCurve;
use corrdyn_core::{Complex64, Error};

use crate::Failure;

type CmdResult = Result<(), Failure>;

fn complex_arg(s: &str) -> Result<Complex64, String> {
    parse_complex(s).map_err(|_| format!("expected re,im but got {s:?}"))
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

/// Ordered `key=value` metadata for a sidecar.
struct Meta(Vec<(String, String)>);

impl Meta {
    fn new(command: &str) -> Self {
        let mut m = Meta(Vec::new());
        m.put("command", command);
        m.put("version", env!("CARGO_PKG_VERSION"));
        m.put("threads", rayon::current_num_threads());
        m
    }

    fn put(&mut self, key: &str, value: impl ToString) {
        self.0.push((key.to_string(), value.to_string()));
    }

    fn f64(&mut self, key: &str, v: f64) {
        self.put(key, format_f64(v));
    }

    fn complex(&mut self, key: &str, z: Complex64) {
        self.put(key, format_complex(z));
    }

    fn path(&mut self, key: &str, p: &Path) {
        self.put(key, p.display());
    }
}

#[derive(Args, Debug)]
pub struct ExponentArgs {
    /// Numerator of the exponent p/q.
    #[arg(long)]
    p: u32,
    /// Denominator of the exponent p/q.
    #[arg(long)]
    q: u32,
}

impl ExponentArgs {
    fn exponent(&self) -> Result<Exponent, Failure> {
        Ok(Exponent::new(self.p, self.q)?)
    }

    fn record(&self, m: &mut Meta) {
        m.put("p", self.p);
        m.put("q", self.q);
    }
}

#[derive(Args, Debug)]
pub struct EscapeArgs {
    /// Iteration budget N.
    #[arg(long, default_value_t = EscapeConfig::DEFAULT_MAX_ITER)]
    max_iter: u32,
    /// The lambda > 1 in the escape-radius equation.
    #[arg(long, default_value_t = EscapeConfig::DEFAULT_LAMBDA)]
    lambda_esc: f64,
    /// Relative margin added to the escape radius.
    #[arg(long, default_value_t = EscapeConfig::DEFAULT_MARGIN)]
    margin: f64,
    /// Maximum live branches per step.
    #[arg(long, default_value_t = EscapeConfig::DEFAULT_BRANCH_CAP)]
    branch_cap: usize,
}

impl EscapeArgs {
    fn config(&self, exp: Exponent, c_bound: f64) -> Result<EscapeConfig, Failure> {
        let radius = escape_radius(exp, c_bound, self.lambda_esc, self.margin)?;
        let cfg = EscapeConfig {
            lambda_esc: self.lambda_esc,
            radius,
            max_iter: self.max_iter,
            merge_eps: radius * EscapeConfig::MERGE_EPS_FACTOR,
            branch_cap: self.branch_cap,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn record(&self, m: &mut Meta) {
        m.put("max-iter", self.max_iter);
        m.f64("lambda-esc", self.lambda_esc);
        m.f64("margin", self.margin);
        m.put("branch-cap", self.branch_cap);
    }
}

#[derive(Args, Debug)]
pub struct ImageArgs {
    /// Horizontal pixel count.
    #[arg(long, default_value_t = 512)]
    px: u32,
    /// Vertical pixel count (default: same as --px).
    #[arg(long)]
    py: Option<u32>,
    /// Four samples per pixel; a pixel is inside if any sample is.
    #[arg(long)]
    supersample: bool,
    /// Output PGM path (default `julia.pgm` or `multibrot.pgm`); metadata
    /// goes to `<out>.meta`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write an 8-bit PNG preview next to the PGM.
    #[arg(long)]
    png: bool,
}

impl ImageArgs {
    fn window(&self, center: Complex64, width: f64) -> Result<Window, Failure> {
        Ok(Window::new(
            center,
            width,
            self.px,
            self.py.unwrap_or(self.px),
        )?)
    }

    fn record(&self, m: &mut Meta, out: &Path) {
        m.put("px", self.px);
        m.put("py", self.py.unwrap_or(self.px));
        m.put("supersample", self.supersample);
        m.path("out", out);
        m.put("png", self.png);
    }

    fn write(&self, out: &Path, bmp: &Bitmap, meta: &Meta) -> CmdResult {
        io::write_pgm(out, bmp)?;
        if self.png {
            io::write_png(&out.with_extension("png"), bmp)?;
        }
        io::write_meta(out, &meta.0)?;
        eprintln!(
            "wrote {} ({}x{}, {} inside pixels)",
            out.display(),
            bmp.width(),
            bmp.height(),
            bmp.inside_count()
        );
        Ok(())
    }
}

#[derive(Args, Debug)]
pub struct JuliaArgs {
    #[command(flatten)]
    exp: ExponentArgs,
    /// Parameter c as re,im.
    #[arg(long, value_parser = complex_arg, allow_hyphen_values = true)]
    c: Complex64,
    /// Window centre as re,im.
    #[arg(long, value_parser = complex_arg, allow_hyphen_values = true, default_value = "0,0")]
    center: Complex64,
    /// Window width along the real axis.
    #[arg(long, default_value_t = 4.0)]
    width: f64,
    #[command(flatten)]
    image: ImageArgs,
    #[command(flatten)]
    escape: EscapeArgs,
}

pub fn render_julia(a: &JuliaArgs) -> CmdResult {
    let exp = a.exp.exponent()?;
    let win = a.image.window(a.center, a.width)?;
    let cfg = a.escape.config(exp, a.c.norm())?;
    let opts = RenderOptions {
        supersample: a.image.supersample,
        margin: a.escape.margin,
        ..RenderOptions::default()
    };
    let bmp = render_julia_with(a.c, exp, &win, &cfg, &opts)?;

    let out = a.image.out.clone().unwrap_or_else(|| "julia.pgm".into());
    let mut m = Meta::new("render-julia");
    a.exp.record(&mut m);
    m.complex("c", a.c);
    m.complex("center", a.center);
    m.f64("width", a.width);
    a.image.record(&mut m, &out);
    a.escape.record(&mut m);
    m.f64("resolved.escape_radius", cfg.radius);
    a.image.write(&out, &bmp, &m)
}

#[derive(Args, Debug)]
pub struct MultibrotArgs {
    #[command(flatten)]
    exp: ExponentArgs,
    /// Window centre as re,im (default: the report's parameter, else 0,0).
    #[arg(long, value_parser = complex_arg, allow_hyphen_values = true)]
    center: Option<Complex64>,
    /// Window width before magnification.
    #[arg(long, default_value_t = 3.0)]
    width: f64,
    /// Divide the width by |λ|^k, with λ taken from --report.
    #[arg(long, requires = "report")]
    magnify: Option<u32>,
    /// Misiurewicz report supplying the centre and multiplier.
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    image: ImageArgs,
    #[command(flatten)]
    escape: EscapeArgs,
}

fn load_report(path: &Path) -> Result<MisiurewiczReport, Failure> {
    io::read_report(path).map_err(|e| usage(format!("cannot load report {}: {e}", path.display())))
}

pub fn render_multibrot(a: &MultibrotArgs) -> CmdResult {
    let exp = a.exp.exponent()?;
    let report = a.report.as_deref().map(load_report).transpose()?;
    if let Some(rep) = &report {
        if rep.exponent != exp {
            return Err(usage(format!("report is for {}, not {exp}", rep.exponent)));
        }
    }
    let center = a
        .center
        .or(report.as_ref().map(|r| r.a))
        .unwrap_or_default();
    let k = a.magnify.unwrap_or(0);
    let lambda = report.as_ref().map_or(1.0, |r| r.multiplier.norm());
    let width = a.width / lambda.powi(k as i32);
    let win = a.image.window(center, width)?;
    let cfg = a.escape.config(exp, center.norm() + width)?;
    let opts = RenderOptions {
        supersample: a.image.supersample,
        margin: a.escape.margin,
        ..RenderOptions::default()
    };
    let bmp = render_multibrot_with(exp, &win, &cfg, &opts)?;

    let out = a
        .image
        .out
        .clone()
        .unwrap_or_else(|| "multibrot.pgm".into());
    let mut m = Meta::new("render-multibrot");
    a.exp.record(&mut m);
    m.complex("center", center);
    m.f64("width", a.width);
    if let Some(k) = a.magnify {
        m.put("magnify", k);
    }
    if let Some(p) = &a.report {
        m.path("report", p);
    }
    a.image.record(&mut m, &out);
    a.escape.record(&mut m);
    m.f64("resolved.width", width);
    a.image.write(&out, &bmp, &m)
}

#[derive(Args, Debug)]
pub struct FindArgs {
    #[command(flatten)]
    exp: ExponentArgs,
    /// Initial guess for the parameter, as re,im.
    #[arg(long, value_parser = complex_arg, allow_hyphen_values = true)]
    guess: Complex64,
    /// Sign word such as `+-+` for the (4,2) solver (length preperiod+period-1).
    #[arg(long, allow_hyphen_values = true)]
    signs: Option<String>,
    /// Preperiod of the critical orbit, or `auto`.
    #[arg(long, default_value = "auto")]
    preperiod: String,
    /// Period of the cycle it lands on, or `auto`.
    #[arg(long, default_value = "auto")]
    period: String,
    /// Largest preperiod tried by `auto`.
    #[arg(long, default_value_t = 6)]
    max_preperiod: usize,
    /// Largest period tried by `auto`.
    #[arg(long, default_value_t = 4)]
    max_period: usize,
    /// Cap on the escape-time depth of the uniqueness check.
    #[arg(long, default_value_t = DEFAULT_SURVIVOR_DEPTH)]
    max_iter: u32,
    /// Steps searched for the orbit to close up.
    #[arg(long, default_value_t = DEFAULT_HORIZON)]
    horizon: usize,
    /// Output report path; metadata goes to `<out>.meta`.
    #[arg(long, default_value = "misiurewicz.report")]
    out: PathBuf,
}

fn shape_arg(name: &str, s: &str) -> Result<Option<usize>, Failure> {
    if s == "auto" {
        return Ok(None);
    }
    s.parse().map(Some).map_err(|_| {
        usage(format!(
            "--{name} must be a positive integer or auto, got {s:?}"
        ))
    })
}

pub fn find_misiurewicz(a: &FindArgs) -> CmdResult {
    let exp = a.exp.exponent()?;
    let is_42 = (exp.p(), exp.q()) == (4, 2);
    let shape = match (
        shape_arg("preperiod", &a.preperiod)?,
        shape_arg("period", &a.period)?,
    ) {
        (Some(l), Some(n)) => Some((l, n)),
        (None, None) => None,
        _ => {
            return Err(usage(
                "--preperiod and --period must both be numbers or both be auto",
            ))
        }
    };
    let opts = SolveOptions {
        survivor_depth: a.max_iter,
        horizon: a.horizon,
    };
    let cfg = EscapeConfig::for_parameter(exp, a.guess.norm(), a.max_iter)?;

    let report = match (&a.signs, shape) {
        (Some(_), _) if !is_42 => return Err(usage("--signs applies only to p=4, q=2")),
        (Some(_), None) => return Err(usage("--signs needs numeric --preperiod and --period")),
        (Some(word), Some((l, n))) => {
            let s = SignSequence::parse(word, l, n)?;
            match solve_misiurewicz_42_with(&s, a.guess, &opts) {
                Err(e @ Error::PatternMismatch { .. }) => {
                    eprintln!("note: {e}; searching all sign words of this shape");
                    search_signs_42(l, n, a.guess, &opts)
                }
                other => other,
            }
        }
        (None, Some((l, n))) if is_42 => search_signs_42(l, n, a.guess, &opts),
        (None, Some((l, n))) => refine_misiurewicz_numeric(exp, a.guess, l, n, &cfg),
        (None, None) => refine_misiurewicz_auto(exp, a.guess, &cfg, a.max_preperiod, a.max_period),
    }?;

    io::write_report(&a.out, &report)?;
    let mut m = Meta::new("find-misiurewicz");
    a.exp.record(&mut m);
    m.complex("guess", a.guess);
    if let Some(s) = &a.signs {
        m.put("signs", s);
    }
    m.put("preperiod", &a.preperiod);
    m.put("period", &a.period);
    m.put("max-preperiod", a.max_preperiod);
    m.put("max-period", a.max_period);
    m.put("max-iter", a.max_iter);
    m.put("horizon", a.horizon);
    m.path("out", &a.out);
    io::write_meta(&a.out, &m.0)?;

    println!("a            = {}", format_complex(report.a));
    println!("preperiod    = {}", report.preperiod);
    println!("period       = {}", report.period);
    if let Some(s) = &report.signs {
        println!("signs        = {s}");
    }
    println!(
        "multiplier   = {}  (|λ| = {})",
        format_complex(report.multiplier),
        format_f64(report.multiplier.norm())
    );
    println!("w_prime      = {}", format_complex(report.w_prime));
    println!("mu           = {}", format_complex(report.mu));
    println!("residual     = {}", format_f64(report.residual));
    println!("report       = {}", a.out.display());
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Curves {
    Both,
    SelfSimilarity,
    JuliaVsMultibrot,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Boundary,
    Inside,
}

#[derive(Args, Debug)]
pub struct SimilarityArgs {
    /// Misiurewicz report to verify.
    #[arg(long)]
    report: PathBuf,
    /// Largest magnification exponent k.
    #[arg(long, default_value_t = 3)]
    k_max: u32,
    /// Pixels per side of each per-scale render.
    #[arg(long, default_value_t = 1024)]
    px: u32,
    /// Julia iteration budget at k = 0; scale k uses base + k·period.
    #[arg(long, default_value_t = DEFAULT_BASE_ITER)]
    base_iter: u32,
    /// Truncation radius (default from the report).
    #[arg(long)]
    r: Option<f64>,
    /// Centre of the self-similarity curve: `a`, `cycle:J`, or re,im.
    #[arg(long, allow_hyphen_values = true, default_value = "a")]
    about: String,
    /// Use this μ instead of the report's (negative control).
    #[arg(long, value_parser = complex_arg, allow_hyphen_values = true)]
    mu_override: Option<Complex64>,
    #[arg(long, value_enum, default_value_t = Curves::Both)]
    curves: Curves,
    #[arg(long, value_enum, default_value_t = Mode::Boundary)]
    mode: Mode,
    #[arg(long)]
    supersample: bool,
    /// Output prefix: writes `<out>.self_similarity.csv` and
    /// `<out>.julia_vs_multibrot.csv`, each with a `.meta` sidecar.
    #[arg(long, default_value = "similarity")]
    out: PathBuf,
}

fn resolve_about(s: &str, rep: &MisiurewiczReport) -> Result<Complex64, Failure> {
    if s == "a" {
        return Ok(rep.a);
    }
    if let Some(j) = s.strip_prefix("cycle:") {
        let j: usize = j
            .parse()
            .map_err(|_| usage(format!("bad cycle index in {s:?}")))?;
        return rep.cycle().get(j).copied().ok_or_else(|| {
            usage(format!(
                "cycle has {} points, index {j} requested",
                rep.period
            ))
        });
    }
    complex_arg(s).map_err(usage)
}

fn curve_path(prefix: &Path, name: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(format!(".{name}.csv"));
    s.into()
}

fn print_curve(curve: &SimilarityCurve) -> bool {
    let name = curve.mode.as_str();
    for ((k, s), d) in curve
        .scales
        .iter()
        .zip(&curve.scale_abs)
        .zip(&curve.distances)
    {
        println!(
            "{name} k={k} scale_abs={} d_hausdorff={}",
            format_f64(*s),
            format_f64(*d)
        );
    }
    let pass = curve.trend_passes();
    println!(
        "{name}: {} (pixel {})",
        if pass { "PASS" } else { "FAIL" },
        format_f64(curve.pixel)
    );
    pass
}

pub fn similarity(a: &SimilarityArgs) -> CmdResult {
    let rep = load_report(&a.report)?;
    rep.validate()?;
    let about = resolve_about(&a.about, &rep)?;
    let mu = a.mu_override.unwrap_or(rep.mu);
    let opts = CurveOptions {
        k_max: a.k_max,
        px: a.px,
        base_iter: a.base_iter,
        r: a.r,
        mode: match a.mode {
            Mode::Boundary => CloudMode::Boundary,
            Mode::Inside => CloudMode::Inside,
        },
        render: RenderOptions {
            supersample: a.supersample,
            ..RenderOptions::default()
        },
    };
    let r = opts.radius(&rep)?;
    // Reject a pixel bound violation before any rendering.
    Window::square(about, r, a.px)?;

    let mut m = Meta::new("similarity");
    m.path("report", &a.report);
    m.put("k-max", a.k_max);
    m.put("px", a.px);
    m.put("base-iter", a.base_iter);
    m.f64("r", r);
    m.complex("about", about);
    if let Some(mu) = a.mu_override {
        m.complex("mu-override", mu);
    }
    m.put(
        "curves",
        a.curves
            .to_possible_value()
            .expect("not skipped")
            .get_name(),
    );
    m.put(
        "mode",
        a.mode.to_possible_value().expect("not skipped").get_name(),
    );
    m.put("supersample", a.supersample);
    m.path("out", &a.out);
    m.complex("resolved.a", rep.a);
    m.complex("resolved.multiplier", rep.multiplier);
    m.complex("resolved.mu", mu);

    let mut curves = Vec::new();
    if a.curves != Curves::JuliaVsMultibrot {
        curves.push(self_similarity_pipeline(&rep, about, &opts)?);
    }
    if a.curves != Curves::SelfSimilarity {
        curves.push(julia_vs_multibrot_pipeline(&rep, mu, &opts)?);
    }
    let mut all_pass = true;
    for curve in &curves {
        let path = curve_path(&a.out, curve.mode.as_str());
        io::write_curve_csv(&path, curve)?;
        io::write_meta(&path, &m.0)?;
        all_pass &= print_curve(curve);
    }
    println!("summary: {}", if all_pass { "PASS" } else { "FAIL" });
    Ok(())
}
