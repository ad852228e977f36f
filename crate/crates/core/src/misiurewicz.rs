//! Misiurewicz parameters.
//!
//! For `(p,q) = (4,2)` the forward images of `z` are `±z² + c`, so a critical
//! orbit is a word in the two polynomials `z² + c` and `-z² + c`. Fixing the
//! sign word `σ` turns the orbit into polynomials in `c`:
//!
//! ```text
//! F_1(c) = c,    F_{j+1}(c) = σ_j F_j(c)² + c
//! ```
//!
//! and the Misiurewicz condition `F_{ℓ+n}(a) = F_ℓ(a)` (with `ℓ` the preperiod
//! counted from `F_1`) becomes a polynomial root-finding problem. Every other
//! exponent goes through [`refine_misiurewicz_numeric`], which tracks orbit
//! points by branch continuation instead.
//!
//! Preperiods here always count from the critical point: `z_0 = 0`,
//! `z_1 = c`, and the orbit closes as `z_{ℓ+n} = z_ℓ`.

use std::fmt;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::corr::{escape_radius, Correspondence, EscapeConfig, Exponent};
use crate::error::{Error, Result};
use crate::orbit::{most_persistent_orbit, trace_unique_orbit, BoundedOrbit};

pub const NEWTON_MAX_ITER: usize = 64;
pub const NEWTON_RESIDUAL_TOL: f64 = 1e-13;
pub const NEWTON_STEP_TOL: f64 = 1e-14;
/// Coincidences closer than this count as orbit closures when checking
/// minimality and strict preperiodicity.
pub const MINIMALITY_TOL: f64 = 1e-9;
/// Largest closure residual accepted for a Misiurewicz parameter.
pub const RESIDUAL_LIMIT: f64 = 1e-10;
/// Relative tolerance when reading a sign off an engine orbit.
pub const SIGN_MATCH_TOL: f64 = 1e-6;
/// Smallest `|w'(a)|` accepted as nonzero.
pub const TRANSVERSALITY_FLOOR: f64 = 1e-8;
/// Upper bound on the survivor depth of the uniqueness check; see
/// [`survivor_depth`] for the depth actually used.
pub const DEFAULT_SURVIVOR_DEPTH: u32 = 40;
pub const DEFAULT_HORIZON: usize = 64;

fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Branch word `σ_1 .. σ_{ℓ+n-1}` for the `(4,2)` semigroup.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SignSequence {
    signs: Vec<i8>,
    preperiod: usize,
    period: usize,
}

impl SignSequence {
    pub fn new(signs: Vec<i8>, preperiod: usize, period: usize) -> Result<Self> {
        if preperiod < 2 {
            return Err(Error::InvalidSigns(format!(
                "preperiod must be >= 2, got {preperiod}"
            )));
        }
        if period < 1 {
            return Err(Error::InvalidSigns("period must be >= 1".into()));
        }
        if signs.len() != preperiod + period - 1 {
            return Err(Error::InvalidSigns(format!(
                "need {} signs for preperiod {preperiod} and period {period}, got {}",
                preperiod + period - 1,
                signs.len()
            )));
        }
        if let Some(bad) = signs.iter().find(|&&s| s != 1 && s != -1) {
            return Err(Error::InvalidSigns(format!("sign {bad} is not +1 or -1")));
        }
        Ok(Self {
            signs,
            preperiod,
            period,
        })
    }

    /// Parses a word over `+` and `-`, such as `"+-+"`.
    pub fn parse(word: &str, preperiod: usize, period: usize) -> Result<Self> {
        let signs = word
            .chars()
            .map(|ch| match ch {
                '+' => Ok(1),
                '-' => Ok(-1),
                other => Err(Error::InvalidSigns(format!(
                    "unexpected character {other:?} in {word:?}"
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(signs, preperiod, period)
    }

    /// All `2^(ℓ+n-1)` words for the given pattern, in lexicographic order
    /// with `+` first.
    pub fn all(preperiod: usize, period: usize) -> Result<Vec<Self>> {
        let len = (preperiod + period).saturating_sub(1);
        if len > 20 {
            return Err(Error::InvalidSigns(format!(
                "{len} signs is too many to enumerate"
            )));
        }
        (0u32..1 << len)
            .map(|bits| {
                let signs = (0..len)
                    .map(|i| {
                        if bits >> (len - 1 - i) & 1 == 0 {
                            1
                        } else {
                            -1
                        }
                    })
                    .collect();
                Self::new(signs, preperiod, period)
            })
            .collect()
    }

    pub fn preperiod(&self) -> usize {
        self.preperiod
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    /// `σ_j` for `1 <= j <= ℓ+n-1`.
    pub fn sigma(&self, j: usize) -> f64 {
        f64::from(self.signs[j - 1])
    }

    /// Index of the last polynomial in the word, `ℓ + n`.
    pub fn closing_index(&self) -> usize {
        self.preperiod + self.period
    }
}

impl fmt::Display for SignSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &s in &self.signs {
            f.write_str(if s > 0 { "+" } else { "-" })?;
        }
        Ok(())
    }
}

/// `(F_j(c), F_j'(c))` for `1 <= j <= ℓ+n`.
pub fn f_poly_eval(c: Complex64, s: &SignSequence, j: usize) -> Result<(Complex64, Complex64)> {
    if j == 0 || j > s.closing_index() {
        return Err(Error::InvalidSigns(format!(
            "index {j} outside 1..={}",
            s.closing_index()
        )));
    }
    let (f, d) = f_poly_table(c, s);
    Ok((f[j], d[j]))
}

/// `F_0 = 0, F_1, ..., F_{ℓ+n}` and their derivatives.
fn f_poly_table(c: Complex64, s: &SignSequence) -> (Vec<Complex64>, Vec<Complex64>) {
    let top = s.closing_index();
    let mut f = Vec::with_capacity(top + 1);
    let mut d = Vec::with_capacity(top + 1);
    f.push(c64(0.0, 0.0));
    d.push(c64(0.0, 0.0));
    f.push(c);
    d.push(c64(1.0, 0.0));
    for j in 1..top {
        let sigma = s.sigma(j);
        f.push(f[j] * f[j] * sigma + c);
        d.push(f[j] * d[j] * (2.0 * sigma) + 1.0);
    }
    (f, d)
}

fn w_value(c: Complex64, s: &SignSequence) -> (Complex64, Complex64) {
    let (f, d) = f_poly_table(c, s);
    let (top, l) = (s.closing_index(), s.preperiod);
    (f[top] - f[l], d[top] - d[l])
}

/// A located Misiurewicz parameter with the data attached to its critical
/// orbit.
#[derive(Clone, Debug, PartialEq)]
pub struct MisiurewiczReport {
    pub a: Complex64,
    pub exponent: Exponent,
    pub preperiod: usize,
    pub period: usize,
    /// The branch word, for `(4,2)` only.
    pub signs: Option<SignSequence>,
    /// `z_0 = 0, z_1 = a, ..., z_{preperiod+period}`.
    pub orbit: Vec<Complex64>,
    /// Derivative of the return map around the cycle.
    pub multiplier: Complex64,
    /// Derivative at `a` of `c ↦ z_{ℓ+n}(c) - z_ℓ(c)`.
    pub w_prime: Complex64,
    /// `w' / (λ - 1)`.
    pub u_prime: Complex64,
    /// Derivative of the branch composition carrying `z_1` to `z_ℓ`.
    pub g_prime: Complex64,
    /// `g' / u'`.
    pub mu: Complex64,
    /// `|z_{ℓ+n}(a) - z_ℓ(a)|`.
    pub residual: f64,
    /// Escape-time depth to which uniqueness of the orbit was checked.
    pub certified_depth: u32,
}

impl MisiurewiczReport {
    /// Cycle points `z_ℓ .. z_{ℓ+n-1}`.
    pub fn cycle(&self) -> &[Complex64] {
        &self.orbit[self.preperiod..self.preperiod + self.period]
    }

    /// The cycle point the critical orbit lands on.
    pub fn landing_point(&self) -> Complex64 {
        self.orbit[self.preperiod]
    }

    /// Checks the report invariants.
    pub fn validate(&self) -> Result<()> {
        if self.preperiod < 2
            || self.period < 1
            || self.orbit.len() != self.preperiod + self.period + 1
        {
            return Err(Error::Parse(format!(
                "orbit length {} does not fit preperiod {} and period {}",
                self.orbit.len(),
                self.preperiod,
                self.period
            )));
        }
        if !(self.residual <= RESIDUAL_LIMIT) {
            return Err(Error::ResidualTooLarge {
                residual: self.residual,
                limit: RESIDUAL_LIMIT,
            });
        }
        if !(self.multiplier.norm() > 1.0) {
            return Err(Error::NotRepelling {
                modulus: self.multiplier.norm(),
            });
        }
        Ok(())
    }
}

/// Options for the validation stage of the solvers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveOptions {
    pub survivor_depth: u32,
    pub horizon: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            survivor_depth: DEFAULT_SURVIVOR_DEPTH,
            horizon: DEFAULT_HORIZON,
        }
    }
}

/// Extra Newton steps taken after convergence while the residual keeps
/// falling, so that the root is accurate to rounding rather than to the
/// stopping tolerance.
const NEWTON_POLISH_STEPS: usize = 4;

fn newton<F>(c0: Complex64, mut eval: F) -> Result<Complex64>
where
    F: FnMut(Complex64) -> Result<(Complex64, Complex64)>,
{
    let mut c = c0;
    let mut residual = f64::INFINITY;
    for _ in 0..NEWTON_MAX_ITER {
        let (w, dw) = eval(c)?;
        residual = w.norm();
        if residual <= NEWTON_RESIDUAL_TOL {
            return Ok(polish(c, residual, &mut eval));
        }
        let step = w / dw;
        if !(step.re.is_finite() && step.im.is_finite()) {
            break;
        }
        c -= step;
        if step.norm() <= NEWTON_STEP_TOL {
            let (w, _) = eval(c)?;
            return Ok(polish(c, w.norm(), &mut eval));
        }
    }
    Err(Error::NoConvergence {
        iterations: NEWTON_MAX_ITER,
        residual,
    })
}

fn polish<F>(mut c: Complex64, mut residual: f64, eval: &mut F) -> Complex64
where
    F: FnMut(Complex64) -> Result<(Complex64, Complex64)>,
{
    for _ in 0..NEWTON_POLISH_STEPS {
        let Ok((w, dw)) = eval(c) else { break };
        let next = c - w / dw;
        match eval(next) {
            Ok((wn, _)) if wn.norm() < residual => {
                c = next;
                residual = wn.norm();
            }
            _ => break,
        }
    }
    c
}

/// Survivor depth for the uniqueness check at a parameter whose cycle has
/// the given multiplier and period.
///
/// Orbit points carry a rounding error near `1e-16` that the cycle magnifies
/// by `|λ|` per period, so past about `n ln(1e16) / ln|λ|` steps even the true
/// branch escapes. The depth is a fraction of that, capped at `max_depth`.
pub fn survivor_depth(multiplier: Complex64, period: usize, max_depth: u32) -> u32 {
    let growth = multiplier.norm().ln();
    if !(growth > 0.0) {
        return max_depth;
    }
    let budget =
        SURVIVOR_FRACTION * period as f64 * DRIFT_DIGITS * std::f64::consts::LN_10 / growth;
    (budget.floor() as u32).clamp(MIN_SURVIVOR_DEPTH, max_depth.max(MIN_SURVIVOR_DEPTH))
}

const SURVIVOR_FRACTION: f64 = 0.6;
const DRIFT_DIGITS: f64 = 14.0;
const MIN_SURVIVOR_DEPTH: u32 = 6;

fn proper_divisors(n: usize) -> impl Iterator<Item = usize> {
    (1..n).filter(move |d| n.is_multiple_of(*d))
}

/// Minimality and strict preperiodicity of an orbit `z_0 .. z_{ℓ+n}`.
fn check_orbit_shape(orbit: &[Complex64], preperiod: usize, period: usize) -> Result<()> {
    if orbit[1..].iter().any(|z| z.norm() <= MINIMALITY_TOL) {
        return Err(Error::NotStrictlyPreperiodic);
    }
    for l in 1..preperiod {
        if (orbit[l + period] - orbit[l]).norm() <= MINIMALITY_TOL {
            return Err(if l == 1 {
                // z_1 periodic forces z_0 = 0 onto the cycle too.
                Error::NotStrictlyPreperiodic
            } else {
                Error::NotMinimal {
                    what: "preperiod",
                    smaller: l,
                }
            });
        }
    }
    for d in proper_divisors(period) {
        if (orbit[preperiod + d] - orbit[preperiod]).norm() <= MINIMALITY_TOL {
            return Err(Error::NotMinimal {
                what: "period",
                smaller: d,
            });
        }
    }
    Ok(())
}

/// Engine configuration for survivor tests at parameter `a`.
fn survivor_config(
    exp: Exponent,
    a: Complex64,
    depth: u32,
    proto: Option<&EscapeConfig>,
) -> Result<EscapeConfig> {
    let mut cfg = match proto {
        Some(p) => {
            let radius = escape_radius(exp, a.norm(), p.lambda_esc, EscapeConfig::DEFAULT_MARGIN)?;
            EscapeConfig {
                radius: p.radius.max(radius),
                ..*p
            }
        }
        None => EscapeConfig::for_parameter(exp, a.norm(), depth)?,
    };
    cfg.max_iter = depth;
    cfg.validate()?;
    Ok(cfg)
}

/// Reads `σ_j` off an engine orbit: `+1` when `z_{j+1} - c ≈ z_j²`, `-1`
/// when `z_{j+1} - c ≈ -z_j²`, `0` when neither matches.
fn read_signs(orbit: &[Complex64], c: Complex64) -> Vec<i8> {
    orbit[1..]
        .windows(2)
        .map(|pair| {
            let sq = pair[0] * pair[0];
            let tol = SIGN_MATCH_TOL * sq.norm().max(1.0);
            let image = pair[1] - c;
            if (image - sq).norm() <= tol {
                1
            } else if (image + sq).norm() <= tol {
                -1
            } else {
                0
            }
        })
        .collect()
}

fn signs_to_string(signs: &[i8]) -> String {
    signs
        .iter()
        .map(|&s| match s {
            1 => '+',
            -1 => '-',
            _ => '?',
        })
        .collect()
}

fn exp42() -> Exponent {
    Exponent::new(4, 2).expect("(4,2) is a valid exponent")
}

fn check_residual(a: Complex64, s: &SignSequence) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let (f, d) = f_poly_table(a, s);
    let residual = (f[s.closing_index()] - f[s.preperiod]).norm();
    if !(residual <= RESIDUAL_LIMIT) {
        return Err(Error::ResidualTooLarge {
            residual,
            limit: RESIDUAL_LIMIT,
        });
    }
    Ok((f, d))
}

/// `w'(a) = F'_{ℓ+n}(a) - F'_ℓ(a)`.
pub fn transversality_42(a: Complex64, s: &SignSequence) -> Result<Complex64> {
    let (_, d) = check_residual(a, s)?;
    Ok(d[s.closing_index()] - d[s.preperiod])
}

/// Cycle multiplier `∏_{j=ℓ}^{ℓ+n-1} 2 σ_j F_j(a)`.
pub fn multiplier_42(a: Complex64, s: &SignSequence) -> Result<Complex64> {
    let (f, _) = check_residual(a, s)?;
    let lambda = (s.preperiod..s.closing_index())
        .fold(c64(1.0, 0.0), |acc, j| acc * f[j] * (2.0 * s.sigma(j)));
    if !(lambda.norm() > 1.0) {
        return Err(Error::NotRepelling {
            modulus: lambda.norm(),
        });
    }
    Ok(lambda)
}

/// `(g', u', μ)` with `g' = ∏_{j=1}^{ℓ-1} 2 σ_j F_j(a)`, `u' = w'/(λ-1)` and
/// `μ = g'/u'`.
pub fn mu_constant_42(a: Complex64, s: &SignSequence) -> Result<(Complex64, Complex64, Complex64)> {
    let lambda = multiplier_42(a, s)?;
    let w_prime = transversality_42(a, s)?;
    let (f, _) = f_poly_table(a, s);
    let g_prime = (1..s.preperiod).fold(c64(1.0, 0.0), |acc, j| acc * f[j] * (2.0 * s.sigma(j)));
    let u_prime = w_prime / (lambda - 1.0);
    Ok((g_prime, u_prime, g_prime / u_prime))
}

/// Newton's method on `w(c) = F_{ℓ+n}(c) - F_ℓ(c)` from `c0`, followed by
/// validation against the orbit engine.
pub fn solve_misiurewicz_42(s: &SignSequence, c0: Complex64) -> Result<MisiurewiczReport> {
    solve_misiurewicz_42_with(s, c0, &SolveOptions::default())
}

pub fn solve_misiurewicz_42_with(
    s: &SignSequence,
    c0: Complex64,
    opts: &SolveOptions,
) -> Result<MisiurewiczReport> {
    let a = newton(c0, |c| Ok(w_value(c, s)))?;
    let (f, _) = f_poly_table(a, s);
    let residual = (f[s.closing_index()] - f[s.preperiod]).norm();
    check_orbit_shape(&f, s.preperiod, s.period)?;

    let exp = exp42();
    let multiplier = multiplier_42(a, s)?;
    let depth = survivor_depth(multiplier, s.period, opts.survivor_depth);
    let cfg = survivor_config(exp, a, depth, None)?;
    let engine = trace_unique_orbit(c64(0.0, 0.0), a, exp, &cfg, opts.horizon)?;
    let found = read_signs(&engine.points, a);
    if engine.preperiod != s.preperiod || engine.period != s.period || found != s.signs {
        return Err(Error::PatternMismatch {
            found_preperiod: engine.preperiod,
            found_period: engine.period,
            found_signs: signs_to_string(&found),
        });
    }

    let w_prime = transversality_42(a, s)?;
    let (g_prime, u_prime, mu) = mu_constant_42(a, s)?;
    Ok(MisiurewiczReport {
        a,
        exponent: exp,
        preperiod: s.preperiod,
        period: s.period,
        signs: Some(s.clone()),
        orbit: f,
        multiplier,
        w_prime,
        u_prime,
        g_prime,
        mu,
        residual,
        certified_depth: depth,
    })
}

/// Tries every sign word of the given shape from `c0` and returns the
/// validated parameter nearest to `c0`. If none validates, returns the
/// error from the first word.
pub fn search_signs_42(
    preperiod: usize,
    period: usize,
    c0: Complex64,
    opts: &SolveOptions,
) -> Result<MisiurewiczReport> {
    let words = SignSequence::all(preperiod, period)?;
    let results: Vec<Result<MisiurewiczReport>> = words
        .par_iter()
        .map(|s| solve_misiurewicz_42_with(s, c0, opts))
        .collect();
    let mut first_err = None;
    let mut best: Option<MisiurewiczReport> = None;
    for r in results {
        match r {
            Ok(rep) => {
                if best
                    .as_ref()
                    .is_none_or(|b| (rep.a - c0).norm() < (b.a - c0).norm())
                {
                    best = Some(rep);
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    best.ok_or_else(|| first_err.expect("at least one sign word"))
}

/// Runs the `(4,2)` solver over every sign word with preperiod
/// `2..=max_preperiod` and period `1..=max_period`, from every guess, and
/// returns the distinct validated parameters sorted by `(re, im)`.
pub fn sweep_42(
    max_preperiod: usize,
    max_period: usize,
    guesses: &[Complex64],
    opts: &SolveOptions,
) -> Result<Vec<MisiurewiczReport>> {
    let mut words = Vec::new();
    for l in 2..=max_preperiod {
        for n in 1..=max_period {
            words.extend(SignSequence::all(l, n)?);
        }
    }
    let jobs: Vec<(&SignSequence, Complex64)> = words
        .iter()
        .flat_map(|s| guesses.iter().map(move |&g| (s, g)))
        .collect();
    let mut found: Vec<MisiurewiczReport> = jobs
        .par_iter()
        .filter_map(|&(s, g)| solve_misiurewicz_42_with(s, g, opts).ok())
        .collect();
    found.sort_by(|x, y| x.a.re.total_cmp(&y.a.re).then(x.a.im.total_cmp(&y.a.im)));
    let mut distinct: Vec<MisiurewiczReport> = Vec::new();
    for rep in found {
        if !distinct
            .iter()
            .any(|d| (d.a - rep.a).norm() <= MINIMALITY_TOL)
        {
            distinct.push(rep);
        }
    }
    Ok(distinct)
}

/// Critical orbit `z_0 .. z_len` at `c` following, at each step, the image
/// nearest to `reference`, with `dz_j/dc` by the chain rule.
fn track_orbit(
    map: &Correspondence,
    reference: &[Complex64],
    len: usize,
    ambiguity: f64,
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let c = map.parameter();
    let mut z = Vec::with_capacity(len + 1);
    let mut dz = Vec::with_capacity(len + 1);
    z.push(c64(0.0, 0.0));
    dz.push(c64(0.0, 0.0));
    z.push(c);
    dz.push(c64(1.0, 0.0));
    let mut images = Vec::new();
    for j in 1..len {
        images.clear();
        map.images_into(z[j], &mut images);
        let target = reference[j + 1];
        let mut order: Vec<(f64, Complex64)> =
            images.iter().map(|&w| ((w - target).norm(), w)).collect();
        order.sort_by(|x, y| x.0.total_cmp(&y.0));
        if order.len() > 1 && order[1].0 - order[0].0 <= ambiguity {
            return Err(Error::BranchJump { index: j + 1 });
        }
        let w = order[0].1;
        let derivative = map.branch_derivative(z[j], w)?;
        dz.push(derivative * dz[j] + 1.0);
        z.push(w);
    }
    Ok((z, dz))
}

/// `(W(c), W'(c))` with `W(c) = z_{ℓ+n}(c) - z_ℓ(c)`, along the branch word
/// selected by `reference`. Exposed for derivative cross-checks.
pub fn closure_function(
    exp: Exponent,
    c: Complex64,
    reference: &[Complex64],
    preperiod: usize,
    period: usize,
) -> Result<(Complex64, Complex64)> {
    let map = Correspondence::new(exp, c);
    let top = preperiod + period;
    let (z, dz) = track_orbit(&map, reference, top, 0.0)?;
    Ok((z[top] - z[preperiod], dz[top] - dz[preperiod]))
}

/// Newton refinement of an approximate Misiurewicz parameter for any
/// exponent. The orbit of `0` at `c0` (the most persistent one, as the
/// parameter is only approximate) fixes the branch word; Newton then runs on
/// `W(c) = z_{ℓ+n}(c) - z_ℓ(c)` with the orbit tracked by continuation.
///
/// `cfg.max_iter` caps the survivor depth of the final uniqueness check.
pub fn refine_misiurewicz_numeric(
    exp: Exponent,
    c0: Complex64,
    preperiod: usize,
    period: usize,
    cfg: &EscapeConfig,
) -> Result<MisiurewiczReport> {
    if preperiod < 2 || period < 1 {
        return Err(Error::InvalidConfig(format!(
            "need preperiod >= 2 and period >= 1, got {preperiod} and {period}"
        )));
    }
    let top = preperiod + period;
    let start_cfg = survivor_config(exp, c0, cfg.max_iter, Some(cfg))?;
    let reference = most_persistent_orbit(c64(0.0, 0.0), c0, exp, &start_cfg, top);
    if reference.len() < top + 1 {
        return Err(Error::UniquenessFailed {
            step: reference.len(),
            survivors: 0,
        });
    }
    refine_from_reference(exp, c0, reference, preperiod, period, cfg)
}

/// Detects `(preperiod, period)` from the most persistent orbit at `c0` and
/// refines. Candidate shapes are tried in order of `preperiod + period`; the
/// first that validates wins.
pub fn refine_misiurewicz_auto(
    exp: Exponent,
    c0: Complex64,
    cfg: &EscapeConfig,
    max_preperiod: usize,
    max_period: usize,
) -> Result<MisiurewiczReport> {
    let start_cfg = survivor_config(exp, c0, cfg.max_iter, Some(cfg))?;
    let reference = most_persistent_orbit(
        c64(0.0, 0.0),
        c0,
        exp,
        &start_cfg,
        max_preperiod + max_period,
    );
    let mut shapes: Vec<(usize, usize)> = (2..=max_preperiod)
        .flat_map(|l| (1..=max_period).map(move |n| (l, n)))
        .collect();
    shapes.sort_by_key(|&(l, n)| (l + n, n));
    let mut first_err = None;
    for (l, n) in shapes {
        if reference.len() < l + n + 1 {
            continue;
        }
        let gap = (reference[l + n] - reference[l]).norm();
        if gap > AUTO_CLOSURE_TOL * reference[l].norm().max(1.0) {
            continue;
        }
        match refine_from_reference(exp, c0, reference[..=l + n].to_vec(), l, n, cfg) {
            Ok(rep) => return Ok(rep),
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    Err(first_err.unwrap_or(Error::NoClosure {
        horizon: max_preperiod + max_period,
    }))
}

/// Relative gap `|z_{ℓ+n} - z_ℓ|` below which an approximate orbit is
/// considered a candidate for shape `(ℓ, n)`.
pub const AUTO_CLOSURE_TOL: f64 = 0.05;

fn refine_from_reference(
    exp: Exponent,
    c0: Complex64,
    mut reference: Vec<Complex64>,
    preperiod: usize,
    period: usize,
    cfg: &EscapeConfig,
) -> Result<MisiurewiczReport> {
    let top = preperiod + period;
    let ambiguity = 10.0 * cfg.merge_eps;
    let a = newton(c0, |c| {
        let map = Correspondence::new(exp, c);
        let (z, dz) = track_orbit(&map, &reference, top, ambiguity)?;
        let value = (z[top] - z[preperiod], dz[top] - dz[preperiod]);
        reference = z;
        Ok(value)
    })?;
    let map = Correspondence::new(exp, a);
    let (orbit, dz) = track_orbit(&map, &reference, top, ambiguity)?;
    let residual = (orbit[top] - orbit[preperiod]).norm();
    if !(residual <= RESIDUAL_LIMIT) {
        return Err(Error::ResidualTooLarge {
            residual,
            limit: RESIDUAL_LIMIT,
        });
    }
    check_orbit_shape(&orbit, preperiod, period)?;

    let branch_product = |from: usize, to: usize| -> Result<Complex64> {
        (from..to).try_fold(c64(1.0, 0.0), |acc, j| {
            Ok(acc * map.branch_derivative(orbit[j], orbit[j + 1])?)
        })
    };
    let multiplier = branch_product(preperiod, top)?;
    if !(multiplier.norm() > 1.0) {
        return Err(Error::NotRepelling {
            modulus: multiplier.norm(),
        });
    }
    let depth = survivor_depth(multiplier, period, cfg.max_iter);
    let check_cfg = survivor_config(exp, a, depth, Some(cfg))?;
    let engine = trace_unique_orbit(c64(0.0, 0.0), a, exp, &check_cfg, DEFAULT_HORIZON)?;
    if engine.preperiod != preperiod || engine.period != period || !orbits_agree(&engine, &orbit) {
        return Err(Error::PatternMismatch {
            found_preperiod: engine.preperiod,
            found_period: engine.period,
            found_signs: String::new(),
        });
    }
    let g_prime = branch_product(1, preperiod)?;
    let w_prime = dz[top] - dz[preperiod];
    let u_prime = w_prime / (multiplier - 1.0);
    let signs = if exp == exp42() {
        SignSequence::new(read_signs(&orbit, a)[..top - 1].to_vec(), preperiod, period).ok()
    } else {
        None
    };
    Ok(MisiurewiczReport {
        a,
        exponent: exp,
        preperiod,
        period,
        signs,
        orbit,
        multiplier,
        w_prime,
        u_prime,
        g_prime,
        mu: g_prime / u_prime,
        residual,
        certified_depth: depth,
    })
}

fn orbits_agree(engine: &BoundedOrbit, tracked: &[Complex64]) -> bool {
    engine.points.len() == tracked.len()
        && engine
            .points
            .iter()
            .zip(tracked)
            .all(|(e, t)| (e - t).norm() <= SIGN_MATCH_TOL * t.norm().max(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pp() -> SignSequence {
        SignSequence::parse("++", 2, 1).unwrap()
    }

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn sign_sequence_validation() {
        assert_eq!(pp().to_string(), "++");
        assert_eq!(pp().sigma(2), 1.0);
        assert!(SignSequence::parse("+x", 2, 1).is_err());
        assert!(SignSequence::parse("+", 2, 1).is_err());
        assert!(SignSequence::parse("+", 1, 1).is_err());
        assert!(SignSequence::new(vec![1, 0], 2, 1).is_err());
        let all = SignSequence::all(2, 2).unwrap();
        assert_eq!(all.len(), 8);
        assert_eq!(all[0].to_string(), "+++");
        assert_eq!(all[7].to_string(), "---");
    }

    #[test]
    fn f_poly_examples() {
        let s = pp();
        assert_eq!(
            f_poly_eval(c64(-2.0, 0.0), &s, 2).unwrap(),
            (c64(2.0, 0.0), c64(-3.0, 0.0))
        );
        assert_eq!(
            f_poly_eval(c64(-2.0, 0.0), &s, 3).unwrap(),
            (c64(2.0, 0.0), c64(-11.0, 0.0))
        );
        let long = SignSequence::parse("+-+-+", 3, 3).unwrap();
        for j in 1..=6 {
            assert_eq!(
                f_poly_eval(c64(0.0, 0.0), &long, j).unwrap(),
                (c64(0.0, 0.0), c64(1.0, 0.0))
            );
        }
        assert!(f_poly_eval(c64(0.0, 0.0), &s, 0).is_err());
        assert!(f_poly_eval(c64(0.0, 0.0), &s, 4).is_err());
    }

    /// `w(c) = (c² + c)² - c² = c³ (c + 2)` expanded by hand.
    fn w_oracle(c: Complex64) -> (Complex64, Complex64) {
        (c * c * c * (c + 2.0), c * c * c * 4.0 + c * c * 6.0)
    }

    #[test]
    fn w_matches_expanded_polynomial() {
        for c in [c64(-2.0, 0.0), c64(0.3, -1.1), c64(1.7, 0.4)] {
            let (w, dw) = w_value(c, &pp());
            let (wo, dwo) = w_oracle(c);
            assert!(close(w, wo, 1e-12 * wo.norm().max(1.0)));
            assert!(close(dw, dwo, 1e-12 * dwo.norm().max(1.0)));
        }
    }

    #[test]
    fn exact_benchmark_at_minus_two() {
        let rep = solve_misiurewicz_42(&pp(), c64(-2.1, 0.0)).unwrap();
        assert!(close(rep.a, c64(-2.0, 0.0), 1e-12));
        assert!(rep.residual <= 1e-13);
        assert!(close(rep.multiplier, c64(4.0, 0.0), 1e-10));
        assert!(close(rep.w_prime, c64(-8.0, 0.0), 1e-8));
        assert!(close(rep.g_prime, c64(-4.0, 0.0), 1e-10));
        assert!(close(rep.u_prime, c64(-8.0 / 3.0, 0.0), 1e-10));
        assert!(close(rep.mu, c64(1.5, 0.0), 1e-8));
        assert_eq!((rep.preperiod, rep.period), (2, 1));
        assert_eq!(rep.cycle().len(), 1);
        assert!(close(rep.landing_point(), c64(2.0, 0.0), 1e-12));
        rep.validate().unwrap();
    }

    #[test]
    fn transversality_rejects_perturbed_parameter() {
        let s = pp();
        assert!(close(
            transversality_42(c64(-2.0, 0.0), &s).unwrap(),
            c64(-8.0, 0.0),
            1e-12
        ));
        let err = transversality_42(c64(-2.0 + 1e-6, 0.0), &s).unwrap_err();
        assert!(matches!(err, Error::ResidualTooLarge { .. }));
    }

    #[test]
    fn periodic_critical_orbit_is_rejected() {
        // c = 0 is a triple root of w for "++"; the critical point is fixed.
        let err = solve_misiurewicz_42(&pp(), c64(0.05, 0.02)).unwrap_err();
        assert!(
            matches!(
                err,
                Error::NotStrictlyPreperiodic | Error::NoConvergence { .. }
            ),
            "{err:?}"
        );
        // c = -1 is a root of F_2 = c² + c: 0 -> -1 -> 0 is a 2-cycle.
        let s = SignSequence::parse("+++", 2, 2).unwrap();
        let err = solve_misiurewicz_42(&s, c64(-1.02, 0.01)).unwrap_err();
        assert!(matches!(err, Error::NotStrictlyPreperiodic), "{err:?}");
    }

    #[test]
    fn non_minimal_period_is_rejected() {
        // -2 with "+++" closes with period 2, but period 1 already closes.
        let s = SignSequence::parse("+++", 2, 2).unwrap();
        let err = solve_misiurewicz_42(&s, c64(-2.01, 0.0)).unwrap_err();
        assert!(
            matches!(
                err,
                Error::NotMinimal {
                    what: "period",
                    smaller: 1
                }
            ),
            "{err:?}"
        );
    }

    #[test]
    fn multiplier_of_a_period_two_word_is_a_product() {
        let rep = sweep_42(
            3,
            2,
            &[c64(-1.8, 0.1), c64(0.2, 1.1), c64(-0.1, 0.9)],
            &SolveOptions::default(),
        )
        .unwrap()
        .into_iter()
        .find(|r| r.period == 2)
        .expect("some period-2 parameter");
        let s = rep.signs.clone().unwrap();
        let (f, _) = f_poly_table(rep.a, &s);
        let l = rep.preperiod;
        let product = f[l] * (2.0 * s.sigma(l)) * f[l + 1] * (2.0 * s.sigma(l + 1));
        assert!(close(rep.multiplier, product, 1e-12 * product.norm()));
        assert!(rep.multiplier.norm() > 1.0);
    }

    #[test]
    fn numeric_refiner_on_the_quadratic_family() {
        let exp = Exponent::new(2, 1).unwrap();
        let cfg = EscapeConfig::for_parameter(exp, 2.0, DEFAULT_SURVIVOR_DEPTH).unwrap();
        let rep = refine_misiurewicz_numeric(exp, c64(-1.9, 0.0), 2, 1, &cfg).unwrap();
        assert!(close(rep.a, c64(-2.0, 0.0), 1e-12));
        assert!(close(rep.multiplier, c64(4.0, 0.0), 1e-10));
        assert!(rep.signs.is_none());
    }

    #[test]
    fn solvers_agree_on_four_two() {
        let exp = exp42();
        let cfg = EscapeConfig::for_parameter(exp, 2.0, DEFAULT_SURVIVOR_DEPTH).unwrap();
        let numeric = refine_misiurewicz_numeric(exp, c64(-2.0 + 1e-3, 0.0), 2, 1, &cfg).unwrap();
        let exact = solve_misiurewicz_42(&pp(), c64(-2.1, 0.0)).unwrap();
        assert!(close(numeric.a, exact.a, 1e-10));
        assert!(close(numeric.multiplier, exact.multiplier, 1e-8));
        assert!(close(numeric.mu, exact.mu, 1e-8));
        assert!(close(numeric.w_prime, exact.w_prime, 1e-8));
        assert_eq!(numeric.signs, exact.signs);
    }

    #[test]
    fn five_two_refines_near_reference_parameter() {
        let exp = Exponent::new(5, 2).unwrap();
        let cfg = EscapeConfig::for_parameter(exp, 2.0, DEFAULT_SURVIVOR_DEPTH).unwrap();
        let rep = refine_misiurewicz_auto(exp, c64(-1.027, 1.141), &cfg, 6, 4).unwrap();
        // Root of the (2,1) closure on branch word (0, 0), from an independent
        // branch-enumeration Newton solver.
        assert!(
            close(rep.a, c64(-1.027231769880474, 1.140856459259397), 1e-9),
            "a = {}",
            rep.a
        );
        assert_eq!((rep.preperiod, rep.period), (2, 1));
        assert!(rep.residual <= 1e-10);
        assert!(rep.multiplier.norm() > 1.0);
        // The reference coordinate is 2.2e-4 away; no Misiurewicz point of
        // preperiod <= 6 and period <= 3 is closer.
        let gap = (rep.a - c64(-1.027124, 1.141048)).norm();
        assert!((2.1e-4..2.3e-4).contains(&gap), "gap = {gap}");
    }

    #[test]
    fn chain_rule_matches_finite_differences() {
        let exp = Exponent::new(5, 2).unwrap();
        let cfg = EscapeConfig::for_parameter(exp, 2.0, DEFAULT_SURVIVOR_DEPTH).unwrap();
        let rep = refine_misiurewicz_auto(exp, c64(-1.027, 1.141), &cfg, 6, 4).unwrap();
        let c = rep.a + c64(3e-4, -2e-4);
        let (_, dw) = closure_function(exp, c, &rep.orbit, rep.preperiod, rep.period).unwrap();
        let h = 1e-7;
        let fd = |dir: Complex64| {
            let (wp, _) =
                closure_function(exp, c + dir * h, &rep.orbit, rep.preperiod, rep.period).unwrap();
            let (wm, _) =
                closure_function(exp, c - dir * h, &rep.orbit, rep.preperiod, rep.period).unwrap();
            (wp - wm) / (dir * (2.0 * h))
        };
        // Holomorphy: the derivative is the same along both axes.
        for dir in [c64(1.0, 0.0), c64(0.0, 1.0)] {
            let d = fd(dir);
            assert!((d - dw).norm() <= 1e-5 * dw.norm(), "{d} vs {dw}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]

        #[test]
        fn derivative_recursion_matches_finite_differences(
            re in -1.5f64..1.5,
            im in -1.5f64..1.5,
            bits in 0u32..256,
            len in 2usize..=8,
        ) {
            let signs = (0..len).map(|i| if bits >> i & 1 == 0 { 1 } else { -1 }).collect();
            let s = SignSequence::new(signs, 2, len - 1).unwrap();
            let c = c64(re, im);
            let top = s.closing_index();
            let (_, d) = f_poly_eval(c, &s, top).unwrap();
            let h = 1e-7;
            let (fp, _) = f_poly_eval(c + h, &s, top).unwrap();
            let (fm, _) = f_poly_eval(c - h, &s, top).unwrap();
            let fd = (fp - fm) / (2.0 * h);
            prop_assert!((fd - d).norm() <= 1e-6 * d.norm(), "fd {} vs {}", fd, d);
        }
    }
}
