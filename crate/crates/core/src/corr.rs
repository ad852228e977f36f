//! Primitive operations of the correspondence `w = (z^p)^(1/q) + c`.
//!
//! A nonzero `z` has exactly `q` forward images
//! `w_k = c + |z|^(p/q) * exp(i (p arg z + 2 pi k) / q)`, `k = 0..q`,
//! with `arg` the principal argument in `(-pi, pi]`. The critical point
//! `z = 0` has the single image `c`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest `p` or `q` accepted by [`Exponent::new`].
pub const MAX_EXPONENT: u32 = 64;

/// The pair `(p, q)`; the correspondence has exponent `r = p / q > 1`.
///
/// Exponents are taken literally: `(4, 2)` is not reduced to `(2, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Exponent {
    p: u32,
    q: u32,
}

impl Exponent {
    pub fn new(p: u32, q: u32) -> Result<Self> {
        if q == 0 || p <= q || p > MAX_EXPONENT || q > MAX_EXPONENT {
            return Err(Error::InvalidExponent { p, q });
        }
        Ok(Self { p, q })
    }

    pub fn p(self) -> u32 {
        self.p
    }

    pub fn q(self) -> u32 {
        self.q
    }

    /// `r = p / q`.
    pub fn ratio(self) -> f64 {
        f64::from(self.p) / f64::from(self.q)
    }

    /// `Some(p / q)` when `q` divides `p`.
    pub fn integral_power(self) -> Option<i32> {
        self.p
            .is_multiple_of(self.q)
            .then(|| (self.p / self.q) as i32)
    }
}

impl std::fmt::Display for Exponent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}:{})", self.p, self.q)
    }
}

/// Escape-time parameters shared by the orbit engine and the renderers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EscapeConfig {
    /// The `lambda > 1` of the escape-radius equation (not a cycle multiplier).
    pub lambda_esc: f64,
    /// Escape radius `R`; points with `|z| > R` are discarded.
    pub radius: f64,
    /// Iteration budget `N`.
    pub max_iter: u32,
    /// Points closer than this are merged after each step.
    pub merge_eps: f64,
    /// Maximum number of live points kept per step.
    pub branch_cap: usize,
}

impl EscapeConfig {
    pub const DEFAULT_LAMBDA: f64 = 2.0;
    pub const DEFAULT_MARGIN: f64 = 0.05;
    pub const DEFAULT_BRANCH_CAP: usize = 4096;
    pub const DEFAULT_MAX_ITER: u32 = 200;
    /// `merge_eps = radius * MERGE_EPS_FACTOR` unless set explicitly.
    pub const MERGE_EPS_FACTOR: f64 = 1e-9;

    /// Defaults for parameters with `|c| <= c_bound`.
    pub fn for_parameter(exp: Exponent, c_bound: f64, max_iter: u32) -> Result<Self> {
        let radius = escape_radius(exp, c_bound, Self::DEFAULT_LAMBDA, Self::DEFAULT_MARGIN)?;
        let cfg = Self {
            lambda_esc: Self::DEFAULT_LAMBDA,
            radius,
            max_iter,
            merge_eps: radius * Self::MERGE_EPS_FACTOR,
            branch_cap: Self::DEFAULT_BRANCH_CAP,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_max_iter(mut self, max_iter: u32) -> Self {
        self.max_iter = max_iter;
        self
    }

    /// Checks the field ranges. Whether `radius` is large enough for a given
    /// parameter is checked separately by [`EscapeConfig::check_radius`].
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_esc > 1.0 && self.lambda_esc.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "lambda_esc must be > 1, got {}",
                self.lambda_esc
            )));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "radius must be > 0, got {}",
                self.radius
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be >= 1".into()));
        }
        if !(self.merge_eps >= 0.0 && self.merge_eps < self.radius * 1e-4) {
            return Err(Error::InvalidConfig(format!(
                "merge_eps must lie in [0, radius/1e4), got {}",
                self.merge_eps
            )));
        }
        if self.branch_cap == 0 {
            return Err(Error::InvalidConfig("branch_cap must be >= 1".into()));
        }
        Ok(())
    }

    /// Fails unless `radius` exceeds the root `x0(lambda_esc)` for `|c| = c_bound`.
    pub fn check_radius(&self, exp: Exponent, c_bound: f64) -> Result<()> {
        let x0 = escape_radius(exp, c_bound, self.lambda_esc, 0.0)?;
        if self.radius <= x0 {
            return Err(Error::InvalidConfig(format!(
                "radius {} does not exceed x0 = {x0} for |c| <= {c_bound}",
                self.radius
            )));
        }
        Ok(())
    }
}

/// Principal argument in `(-pi, pi]`.
pub(crate) fn principal_arg(z: Complex64) -> f64 {
    let a = z.im.atan2(z.re);
    if a == -PI {
        PI
    } else {
        a
    }
}

/// `k`-th `q`-th root of unity, exact on the axes.
fn root_of_unity(k: u32, q: u32) -> Complex64 {
    if k == 0 {
        return Complex64::new(1.0, 0.0);
    }
    if (4 * k).is_multiple_of(q) {
        return match (4 * k / q) % 4 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        };
    }
    Complex64::from_polar(1.0, 2.0 * PI * f64::from(k) / f64::from(q))
}

/// The correspondence at a fixed parameter, with the roots of unity
/// precomputed. This is the hot-path form of the free functions below.
#[derive(Clone, Debug)]
pub struct Correspondence {
    exp: Exponent,
    c: Complex64,
    roots: Vec<Complex64>,
}

impl Correspondence {
    pub fn new(exp: Exponent, c: Complex64) -> Self {
        let roots = (0..exp.q).map(|k| root_of_unity(k, exp.q)).collect();
        Self { exp, c, roots }
    }

    pub fn exponent(&self) -> Exponent {
        self.exp
    }

    pub fn parameter(&self) -> Complex64 {
        self.c
    }

    pub(crate) fn set_parameter(&mut self, c: Complex64) {
        self.c = c;
    }

    /// `|z|^(p/q) exp(i p arg(z) / q)`, the `k = 0` root before adding `c`.
    #[inline]
    fn principal_power(&self, z: Complex64) -> Complex64 {
        match self.exp.integral_power() {
            Some(m) => z.powi(m),
            None => {
                let r = self.exp.ratio();
                let modulus = z.norm_sqr().powf(0.5 * r);
                Complex64::from_polar(modulus, r * principal_arg(z))
            }
        }
    }

    /// Appends the forward images of `z` to `out`, in ascending branch order.
    #[inline]
    pub fn images_into(&self, z: Complex64, out: &mut Vec<Complex64>) {
        if z == Complex64::new(0.0, 0.0) {
            out.push(self.c);
            return;
        }
        let base = self.principal_power(z);
        out.extend(self.roots.iter().map(|w| base * w + self.c));
    }

    pub fn images(&self, z: Complex64) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.roots.len());
        self.images_into(z, &mut out);
        out
    }

    /// Derivative of the local univalent branch sending `z` to `w`:
    /// `p z^(p-1) / (q (w-c)^(q-1))`, evaluated as `(p/q) (w-c) / z`,
    /// which is the same number whenever `(w-c)^q = z^p`.
    pub fn branch_derivative(&self, z: Complex64, w: Complex64) -> Result<Complex64> {
        if z == Complex64::new(0.0, 0.0) {
            return Err(Error::BranchPoint);
        }
        Ok((w - self.c) * self.exp.ratio() / z)
    }

    /// The image of `z` nearest to `target` and its branch index; ties go to
    /// the smallest index.
    pub fn branch_nearest(&self, z: Complex64, target: Complex64) -> Result<(Complex64, usize)> {
        if z == Complex64::new(0.0, 0.0) {
            return Err(Error::BranchPoint);
        }
        let base = self.principal_power(z);
        let mut best = (base + self.c, 0usize, f64::INFINITY);
        for (k, root) in self.roots.iter().enumerate() {
            let w = base * root + self.c;
            let d = (w - target).norm_sqr();
            if d < best.2 {
                best = (w, k, d);
            }
        }
        Ok((best.0, best.1))
    }
}

/// Forward images of `z` under the correspondence with parameter `c`.
pub fn forward_images(z: Complex64, c: Complex64, exp: Exponent) -> Vec<Complex64> {
    Correspondence::new(exp, c).images(z)
}

/// Derivative of the branch through `(z, w)`; see [`Correspondence::branch_derivative`].
pub fn branch_derivative(
    z: Complex64,
    w: Complex64,
    c: Complex64,
    exp: Exponent,
) -> Result<Complex64> {
    Correspondence::new(exp, c).branch_derivative(z, w)
}

/// See [`Correspondence::branch_nearest`].
pub fn branch_nearest(
    z: Complex64,
    c: Complex64,
    exp: Exponent,
    target: Complex64,
) -> Result<(Complex64, usize)> {
    Correspondence::new(exp, c).branch_nearest(z, target)
}

/// Escape radius `R = x0 (1 + margin)`, where `x0` is the larger positive root
/// of `x^(p/q) - lambda x - c_bound = 0`.
///
/// The root is bracketed from below by `x = 1` (where the function equals
/// `1 - lambda - c_bound < 0`) and from above by doubling, then bisected to a
/// relative width of `1e-12`. The upper end of the bracket is used, so the
/// result strictly exceeds `x0` even with `margin = 0`.
pub fn escape_radius(exp: Exponent, c_bound: f64, lambda_esc: f64, margin: f64) -> Result<f64> {
    if !(c_bound >= 0.0 && c_bound.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "c_bound must be finite and >= 0, got {c_bound}"
        )));
    }
    if !(lambda_esc > 1.0 && lambda_esc.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "lambda_esc must be > 1, got {lambda_esc}"
        )));
    }
    if !(margin >= 0.0 && margin.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "margin must be >= 0, got {margin}"
        )));
    }
    let r = exp.ratio();
    let f = |x: f64| x.powf(r) - lambda_esc * x - c_bound;

    let mut lo = 1.0_f64;
    let mut hi = 2.0 * c_bound.max(1.0);
    let mut doublings = 0;
    while f(hi) <= 0.0 {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > 1024 || !hi.is_finite() {
            return Err(Error::NoSignChange);
        }
    }
    for _ in 0..200 {
        if hi - lo <= 1e-12 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if f(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi * (1.0 + margin))
}

/// Complex `ln(1 + t)`, accurate for small `t`.
pub(crate) fn log1p(t: Complex64) -> Complex64 {
    let re = 0.5 * (2.0 * t.re + t.norm_sqr()).ln_1p();
    let im = t.im.atan2(1.0 + t.re);
    Complex64::new(re, im)
}

/// Complex `exp(u) - 1`, accurate for small `u`.
pub(crate) fn expm1(u: Complex64) -> Complex64 {
    let (s, c) = u.im.sin_cos();
    let half = (0.5 * u.im).sin();
    let em1 = u.re.exp_m1();
    Complex64::new(em1 * c - 2.0 * half * half, u.re.exp() * s)
}

/// Largest `|offset / reference|` for which a [`LocalBranch`] is evaluated.
pub const LOCAL_BRANCH_LIMIT: f64 = 0.9;

/// The univalent branch through a reference pair `z_ref -> w_ref`, written in
/// offset coordinates so that small displacements keep full relative
/// precision:
///
/// `w - w_ref = (w_ref - c) * ((1 + dz / z_ref)^(p/q) - 1)`.
#[derive(Clone, Copy, Debug)]
pub struct LocalBranch {
    z_ref: Complex64,
    rho_ref: Complex64,
    ratio: f64,
}

impl LocalBranch {
    pub fn new(z_ref: Complex64, w_ref: Complex64, c: Complex64, exp: Exponent) -> Result<Self> {
        if z_ref == Complex64::new(0.0, 0.0) {
            return Err(Error::BranchPoint);
        }
        Ok(Self {
            z_ref,
            rho_ref: w_ref - c,
            ratio: exp.ratio(),
        })
    }

    /// Derivative of the branch at `z_ref`.
    pub fn derivative(&self) -> Complex64 {
        self.rho_ref * self.ratio / self.z_ref
    }

    /// Maps an offset from `z_ref` to the offset of its image from `w_ref`.
    pub fn forward_offset(&self, dz: Complex64) -> Result<Complex64> {
        let t = dz / self.z_ref;
        if !(t.norm() < LOCAL_BRANCH_LIMIT) {
            return Err(Error::DivergedFromDomain);
        }
        Ok(self.rho_ref * expm1(log1p(t) * self.ratio))
    }

    /// Inverse of [`LocalBranch::forward_offset`].
    pub fn inverse_offset(&self, dw: Complex64) -> Result<Complex64> {
        let t = dw / self.rho_ref;
        if !(t.norm() < LOCAL_BRANCH_LIMIT) {
            return Err(Error::DivergedFromDomain);
        }
        Ok(self.z_ref * expm1(log1p(t) / self.ratio))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c64(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn exponent_bounds() {
        assert!(Exponent::new(2, 1).is_ok());
        assert!(Exponent::new(64, 63).is_ok());
        assert!(Exponent::new(2, 2).is_err());
        assert!(Exponent::new(1, 2).is_err());
        assert!(Exponent::new(3, 0).is_err());
        assert!(Exponent::new(65, 2).is_err());
    }

    #[test]
    fn critical_point_has_single_image() {
        let e = Exponent::new(5, 2).unwrap();
        assert_eq!(
            forward_images(c64(0.0, 0.0), c64(0.3, 0.1), e),
            vec![c64(0.3, 0.1)]
        );
    }

    #[test]
    fn square_roots_of_one() {
        let e = Exponent::new(4, 2).unwrap();
        let w = forward_images(c64(1.0, 0.0), c64(0.0, 0.0), e);
        assert_eq!(w, vec![c64(1.0, 0.0), c64(-1.0, 0.0)]);
    }

    #[test]
    fn images_of_two_at_minus_two() {
        let e = Exponent::new(4, 2).unwrap();
        let mut w = forward_images(c64(2.0, 0.0), c64(-2.0, 0.0), e);
        w.sort_by(|a, b| a.re.total_cmp(&b.re));
        assert!(close(w[0], c64(-6.0, 0.0), 1e-14));
        assert!(close(w[1], c64(2.0, 0.0), 1e-14));
    }

    #[test]
    fn general_branch_matches_formula() {
        // (5,2) at z = -1 - 0i: arg must be +pi, not -pi.
        let e = Exponent::new(5, 2).unwrap();
        let z = c64(-1.0, -0.0);
        let w = forward_images(z, c64(0.0, 0.0), e);
        let expect0 = Complex64::from_polar(1.0, 5.0 * PI / 2.0);
        assert!(close(w[0], expect0, 1e-15));
        assert!(close(w[1], -expect0, 1e-15));
    }

    #[test]
    fn branch_derivative_examples() {
        let e42 = Exponent::new(4, 2).unwrap();
        let e21 = Exponent::new(2, 1).unwrap();
        let d = branch_derivative(c64(2.0, 0.0), c64(2.0, 0.0), c64(-2.0, 0.0), e42).unwrap();
        assert!(close(d, c64(4.0, 0.0), 1e-14));
        let c = c64(0.7, -0.2);
        let d = branch_derivative(c64(3.0, 0.0), c64(9.0, 0.0) + c, c, e21).unwrap();
        assert!(close(d, c64(6.0, 0.0), 1e-13));
        let d = branch_derivative(c64(2.0, 0.0), c64(-6.0, 0.0), c64(-2.0, 0.0), e42).unwrap();
        assert!(close(d, c64(-4.0, 0.0), 1e-14));
        assert!(matches!(
            branch_derivative(c64(0.0, 0.0), c64(1.0, 0.0), c64(1.0, 0.0), e42),
            Err(Error::BranchPoint)
        ));
    }

    #[test]
    fn branch_derivative_matches_polynomial_form() {
        let e = Exponent::new(7, 3).unwrap();
        let c = c64(0.2, 0.4);
        let z = c64(0.8, -0.6);
        for w in forward_images(z, c, e) {
            let d = branch_derivative(z, w, c, e).unwrap();
            let poly = z.powi(6) * 7.0 / ((w - c).powi(2) * 3.0);
            assert!(close(d, poly, 1e-12 * poly.norm()));
        }
    }

    #[test]
    fn escape_radius_examples() {
        let e21 = Exponent::new(2, 1).unwrap();
        let e42 = Exponent::new(4, 2).unwrap();
        let root3 = 1.0 + 3f64.sqrt();
        assert!((escape_radius(e21, 0.0, 2.0, 0.0).unwrap() - 2.0).abs() <= 2e-12 * 2.0);
        assert!((escape_radius(e42, 2.0, 2.0, 0.0).unwrap() - root3).abs() <= 2e-12 * root3);
        assert!((escape_radius(e21, 2.0, 2.0, 0.0).unwrap() - root3).abs() <= 2e-12 * root3);
        let with_margin = escape_radius(e42, 2.0, 2.0, 0.05).unwrap();
        assert!((with_margin - 1.05 * root3).abs() < 1e-10);
    }

    #[test]
    fn escape_radius_when_root_is_below_c_bound() {
        // x0 < c_bound for large |c| and large r; the bracket must still hold.
        let e = Exponent::new(10, 1).unwrap();
        let r = escape_radius(e, 100.0, 2.0, 0.0).unwrap();
        let f = |x: f64| x.powi(10) - 2.0 * x - 100.0;
        assert!(f(r) > 0.0 && f(r * (1.0 - 1e-11)) < 0.0);
        assert!(r < 100.0);
    }

    #[test]
    fn escape_radius_rejects_bad_args() {
        let e = Exponent::new(2, 1).unwrap();
        assert!(escape_radius(e, -1.0, 2.0, 0.0).is_err());
        assert!(escape_radius(e, 1.0, 1.0, 0.0).is_err());
        assert!(escape_radius(e, 1.0, 2.0, -0.1).is_err());
    }

    #[test]
    fn branch_nearest_examples() {
        let e42 = Exponent::new(4, 2).unwrap();
        let (w, k) = branch_nearest(c64(2.0, 0.0), c64(-2.0, 0.0), e42, c64(2.1, 0.0)).unwrap();
        assert!(close(w, c64(2.0, 0.0), 1e-14));
        assert_eq!(k, 0);
        let (w, _) = branch_nearest(c64(1.0, 0.0), c64(0.0, 0.0), e42, c64(-0.9, 0.0)).unwrap();
        assert!(close(w, c64(-1.0, 0.0), 1e-15));
        let e21 = Exponent::new(2, 1).unwrap();
        let (w, k) = branch_nearest(c64(1.0, 0.0), c64(1.0, 0.0), e21, c64(0.0, 0.0)).unwrap();
        assert_eq!((w, k), (c64(2.0, 0.0), 0));
        assert!(branch_nearest(c64(0.0, 0.0), c64(1.0, 0.0), e42, c64(0.0, 0.0)).is_err());
    }

    #[test]
    fn branch_nearest_tie_goes_to_lowest_index() {
        // Target 0 is equidistant from the images +1 and -1.
        let e = Exponent::new(4, 2).unwrap();
        let (_, k) = branch_nearest(c64(1.0, 0.0), c64(0.0, 0.0), e, c64(0.0, 0.0)).unwrap();
        assert_eq!(k, 0);
    }

    #[test]
    fn local_branch_round_trip_and_derivative() {
        let e = Exponent::new(5, 2).unwrap();
        let c = c64(-1.0, 1.1);
        let z = c64(1.5, -0.3);
        for w in forward_images(z, c, e) {
            let br = LocalBranch::new(z, w, c, e).unwrap();
            let dz = c64(1e-3, -2e-3);
            let dw = br.forward_offset(dz).unwrap();
            // The offset lands on an actual image of z + dz.
            let (w2, _) = branch_nearest(z + dz, c, e, w).unwrap();
            assert!(close(w + dw, w2, 1e-13));
            assert!(close(br.inverse_offset(dw).unwrap(), dz, 1e-16));
            let d = branch_derivative(z, w, c, e).unwrap();
            assert!(close(br.derivative(), d, 1e-14));
            // Tiny offsets keep their relative precision.
            let tiny = c64(1e-14, 1e-14);
            let dw_tiny = br.forward_offset(tiny).unwrap();
            assert!(close(dw_tiny / tiny, d, 1e-12 * d.norm()));
        }
        let br = LocalBranch::new(z, forward_images(z, c, e)[0], c, e).unwrap();
        assert!(matches!(
            br.forward_offset(z),
            Err(Error::DivergedFromDomain)
        ));
    }

    fn exponent_strategy() -> impl Strategy<Value = Exponent> {
        (1u32..=6, 1u32..=8).prop_map(|(q, extra)| Exponent::new(q + extra, q).unwrap())
    }

    fn complex_strategy(bound: f64) -> impl Strategy<Value = Complex64> {
        (-bound..bound, -bound..bound).prop_map(|(a, b)| c64(a, b))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn images_satisfy_defining_relation(exp in exponent_strategy(), z in complex_strategy(2.0), c in complex_strategy(2.0)) {
            prop_assume!(z.norm() > 1e-6);
            let imgs = forward_images(z, c, exp);
            prop_assert_eq!(imgs.len(), exp.q() as usize);
            let zp = z.powi(exp.p() as i32);
            for w in imgs {
                let res = ((w - c).powi(exp.q() as i32) - zp).norm();
                prop_assert!(res <= 1e-10 * zp.norm().max(1.0), "residual {}", res);
            }
        }

        #[test]
        fn escape_radius_is_monotone(exp in exponent_strategy(), cb in 0.0f64..10.0, dc in 0.01f64..5.0, lam in 1.1f64..4.0, dl in 0.01f64..2.0) {
            let r0 = escape_radius(exp, cb, lam, 0.0).unwrap();
            prop_assert!(escape_radius(exp, cb + dc, lam, 0.0).unwrap() >= r0);
            prop_assert!(escape_radius(exp, cb, lam + dl, 0.0).unwrap() >= r0);
        }

        #[test]
        fn exterior_is_forward_invariant(exp in exponent_strategy(), c in complex_strategy(1.5), scale in 1.0f64..3.0, theta in -PI..PI) {
            let radius = escape_radius(exp, c.norm(), EscapeConfig::DEFAULT_LAMBDA, EscapeConfig::DEFAULT_MARGIN).unwrap();
            let z = Complex64::from_polar(radius * scale * (1.0 + 1e-9), theta);
            for w in forward_images(z, c, exp) {
                prop_assert!(w.norm() > z.norm());
            }
        }

        #[test]
        fn branch_derivative_matches_finite_difference(exp in exponent_strategy(), z in complex_strategy(2.0), c in complex_strategy(2.0)) {
            prop_assume!(z.norm() > 0.3);
            let h = 1e-6;
            let map = Correspondence::new(exp, c);
            for w in map.images(z) {
                let (wp, _) = map.branch_nearest(z + h, w).unwrap();
                let (wm, _) = map.branch_nearest(z - h, w).unwrap();
                let fd = (wp - wm) / (2.0 * h);
                let d = map.branch_derivative(z, w).unwrap();
                prop_assert!((fd - d).norm() <= 1e-5 * d.norm().max(1.0), "fd {} vs {}", fd, d);
            }
        }
    }
}
