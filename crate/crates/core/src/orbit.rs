//! Set-valued forward iteration with escape pruning.
//!
//! A point belongs to the filled Julia set when at least one of its forward
//! orbits stays bounded, so membership is decided by iterating the whole set
//! of live images and watching for it to become empty.

use std::cmp::Ordering;

use num_complex::Complex64;

use crate::corr::{Correspondence, EscapeConfig, Exponent};
use crate::error::{Error, Result};

/// Two orbit points closer than this are treated as the same point when
/// detecting cycle closure.
pub const RECURRENCE_TOL: f64 = 1e-9;

/// Live, deduplicated forward images at one iteration depth.
///
/// Points are kept in canonical lexicographic `(re, im)` order so that every
/// later step (dedup, truncation) is independent of how the set was built.
#[derive(Clone, Debug, PartialEq)]
pub struct OrbitSet {
    points: Vec<Complex64>,
    depth: u32,
    truncated: bool,
}

impl OrbitSet {
    /// The set `{z}` at depth 0; empty when `|z| > radius`.
    pub fn start(z: Complex64, cfg: &EscapeConfig) -> Self {
        let points = if z.norm_sqr() > cfg.radius * cfg.radius {
            Vec::new()
        } else {
            vec![z]
        };
        Self {
            points,
            depth: 0,
            truncated: false,
        }
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    /// `true` once `branch_cap` has been hit at this or any earlier depth.
    pub fn truncated(&self) -> bool {
        self.truncated
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }
}

fn canonical_cmp(a: &Complex64, b: &Complex64) -> Ordering {
    a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
}

/// Sorts, merges points within `merge_eps` (keeping the first of each
/// cluster), and applies the branch cap. Returns whether the cap was hit.
fn canonicalize(
    points: &mut Vec<Complex64>,
    scratch: &mut Vec<Complex64>,
    cfg: &EscapeConfig,
) -> bool {
    if points.len() > 1 {
        points.sort_unstable_by(canonical_cmp);
        scratch.clear();
        let eps = cfg.merge_eps;
        for &p in points.iter() {
            let dup = scratch
                .iter()
                .rev()
                .take_while(|k| p.re - k.re <= eps)
                .any(|k| (p - k).norm() <= eps);
            if !dup {
                scratch.push(p);
            }
        }
        std::mem::swap(points, scratch);
    }
    if points.len() > cfg.branch_cap {
        // Ties in modulus fall back to canonical order, so this stays deterministic.
        points.select_nth_unstable_by(cfg.branch_cap, |a, b| {
            a.norm_sqr()
                .total_cmp(&b.norm_sqr())
                .then(canonical_cmp(a, b))
        });
        points.truncate(cfg.branch_cap);
        points.sort_unstable_by(canonical_cmp);
        return true;
    }
    false
}

/// Whether a point was found to stay bounded for the whole iteration budget.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Membership {
    Inside,
    Escaped,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MembershipVerdict {
    pub status: Membership,
    /// First depth with an empty live set, or `max_iter` when inside.
    pub steps: u32,
    /// The branch cap was hit at least once; the verdict is then heuristic.
    pub truncated: bool,
}

impl MembershipVerdict {
    pub fn is_inside(&self) -> bool {
        self.status == Membership::Inside
    }
}

/// Reusable buffers for repeated set iteration at a fixed parameter.
pub(crate) struct SetIterator {
    map: Correspondence,
    cfg: EscapeConfig,
    current: Vec<Complex64>,
    next: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl SetIterator {
    pub(crate) fn new(exp: Exponent, c: Complex64, cfg: EscapeConfig) -> Self {
        Self {
            map: Correspondence::new(exp, c),
            cfg,
            current: Vec::new(),
            next: Vec::new(),
            scratch: Vec::new(),
        }
    }

    pub(crate) fn correspondence(&self) -> &Correspondence {
        &self.map
    }

    /// Moves to a new parameter and configuration, keeping the buffers.
    pub(crate) fn reset(&mut self, c: Complex64, cfg: EscapeConfig) {
        self.map.set_parameter(c);
        self.cfg = cfg;
    }

    /// One step from `self.current` into `self.current`; returns whether the cap was hit.
    fn step(&mut self) -> bool {
        let r2 = self.cfg.radius * self.cfg.radius;
        self.next.clear();
        for &z in &self.current {
            let start = self.next.len();
            self.map.images_into(z, &mut self.next);
            // Drop escaped images in place.
            let mut keep = start;
            for i in start..self.next.len() {
                let w = self.next[i];
                if w.norm_sqr() <= r2 {
                    self.next[keep] = w;
                    keep += 1;
                }
            }
            self.next.truncate(keep);
        }
        std::mem::swap(&mut self.current, &mut self.next);
        canonicalize(&mut self.current, &mut self.scratch, &self.cfg)
    }

    pub(crate) fn membership(&mut self, z: Complex64) -> MembershipVerdict {
        self.membership_with_budget(z, self.cfg.max_iter)
    }

    pub(crate) fn membership_with_budget(
        &mut self,
        z: Complex64,
        max_iter: u32,
    ) -> MembershipVerdict {
        let r2 = self.cfg.radius * self.cfg.radius;
        if z.norm_sqr() > r2 {
            return MembershipVerdict {
                status: Membership::Escaped,
                steps: 0,
                truncated: false,
            };
        }
        self.current.clear();
        self.current.push(z);
        let mut truncated = false;
        for k in 1..=max_iter {
            truncated |= self.step();
            if self.current.is_empty() {
                return MembershipVerdict {
                    status: Membership::Escaped,
                    steps: k,
                    truncated,
                };
            }
        }
        MembershipVerdict {
            status: Membership::Inside,
            steps: max_iter,
            truncated,
        }
    }
}

/// One step of the set-valued dynamics: all images of `s`, minus those with
/// modulus above the radius, canonicalised.
pub fn iterate_set(s: &OrbitSet, c: Complex64, exp: Exponent, cfg: &EscapeConfig) -> OrbitSet {
    let mut it = SetIterator::new(exp, c, *cfg);
    it.current.extend_from_slice(&s.points);
    let hit = it.step();
    OrbitSet {
        points: std::mem::take(&mut it.current),
        depth: s.depth + 1,
        truncated: s.truncated || hit,
    }
}

/// Escape-time membership test for the filled Julia set `K_c`.
pub fn in_filled_julia(
    z: Complex64,
    c: Complex64,
    exp: Exponent,
    cfg: &EscapeConfig,
) -> MembershipVerdict {
    SetIterator::new(exp, c, *cfg).membership(z)
}

/// The unique bounded forward orbit of a point, up to its first recurrence.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundedOrbit {
    /// `z_0 .. z_{preperiod + period}`; the last point repeats `z_preperiod`.
    pub points: Vec<Complex64>,
    pub preperiod: usize,
    pub period: usize,
    pub unique: bool,
    pub strictly_preperiodic: bool,
}

impl BoundedOrbit {
    /// The cycle points `z_preperiod .. z_{preperiod + period - 1}`.
    pub fn cycle(&self) -> &[Complex64] {
        &self.points[self.preperiod..self.preperiod + self.period]
    }
}

/// Follows the orbit of `z` while exactly one image survives the membership
/// test, until a point recurs within [`RECURRENCE_TOL`].
///
/// Returns `Ok(None)` when some step has zero or several surviving images.
/// Survival is certified only to depth `cfg.max_iter`.
pub fn unique_bounded_orbit(
    z: Complex64,
    c: Complex64,
    exp: Exponent,
    cfg: &EscapeConfig,
    horizon: usize,
) -> Result<Option<BoundedOrbit>> {
    match trace_unique_orbit(z, c, exp, cfg, horizon) {
        Ok(orbit) => Ok(Some(orbit)),
        Err(Error::UniquenessFailed { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// [`unique_bounded_orbit`] with the failing step reported as
/// [`Error::UniquenessFailed`] instead of `None`.
pub fn trace_unique_orbit(
    z: Complex64,
    c: Complex64,
    exp: Exponent,
    cfg: &EscapeConfig,
    horizon: usize,
) -> Result<BoundedOrbit> {
    if z.norm_sqr() > cfg.radius * cfg.radius {
        return Err(Error::UniquenessFailed {
            step: 0,
            survivors: 0,
        });
    }
    let mut it = SetIterator::new(exp, c, *cfg);
    let mut points = vec![z];
    for step in 1..=horizon {
        let current = *points.last().expect("orbit is never empty");
        let images = it.correspondence().images(current);
        let mut survivor = None;
        let mut survivors = 0;
        for w in images {
            if it.membership(w).is_inside() {
                survivors += 1;
                survivor = Some(w);
            }
        }
        let next = match (survivors, survivor) {
            (1, Some(w)) => w,
            _ => return Err(Error::UniquenessFailed { step, survivors }),
        };
        let recurrence = points
            .iter()
            .position(|p| (p - next).norm() <= RECURRENCE_TOL);
        points.push(next);
        if let Some(i) = recurrence {
            let period = points.len() - 1 - i;
            return Ok(BoundedOrbit {
                points,
                preperiod: i,
                period,
                unique: true,
                strictly_preperiodic: i >= 1,
            });
        }
    }
    Err(Error::NoClosure { horizon })
}

/// Like [`unique_bounded_orbit`], but without requiring uniqueness: at each
/// step it keeps the image that survives longest (inside beats any escape
/// time; ties go to the lowest branch index) and records `len` steps.
///
/// Meant for parameters that are only approximately Misiurewicz, where the
/// true orbit drifts off the repelling cycle and eventually escapes.
pub fn most_persistent_orbit(
    z: Complex64,
    c: Complex64,
    exp: Exponent,
    cfg: &EscapeConfig,
    len: usize,
) -> Vec<Complex64> {
    let mut it = SetIterator::new(exp, c, *cfg);
    let mut points = vec![z];
    for _ in 0..len {
        let current = *points.last().expect("orbit is never empty");
        let images = it.correspondence().images(current);
        let mut best: Option<(Complex64, u32)> = None;
        for w in images {
            let v = it.membership(w);
            let score = if v.is_inside() { u32::MAX } else { v.steps };
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((w, score));
            }
        }
        match best {
            Some((w, _)) => points.push(w),
            None => break,
        }
    }
    points
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corr::escape_radius;
    use proptest::prelude::*;

    fn c64(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn cfg(radius: f64, max_iter: u32) -> EscapeConfig {
        EscapeConfig {
            lambda_esc: 2.0,
            radius,
            max_iter,
            merge_eps: radius * 1e-9,
            branch_cap: 4096,
        }
    }

    #[test]
    fn iterate_set_examples() {
        let e = Exponent::new(4, 2).unwrap();
        let k = cfg(2.87, 10);
        let c = c64(-2.0, 0.0);
        let s0 = OrbitSet::start(c64(0.0, 0.0), &k);
        let s1 = iterate_set(&s0, c, e, &k);
        assert_eq!(s1.points(), &[c64(-2.0, 0.0)]);
        assert!(!s1.truncated());
        assert_eq!(s1.depth(), 1);
        let s2 = iterate_set(&s1, c, e, &k);
        assert_eq!(s2.points(), &[c64(2.0, 0.0)]);
        let s3 = iterate_set(&s2, c, e, &k);
        assert_eq!(s3.points(), &[c64(2.0, 0.0)]);
    }

    #[test]
    fn iterate_set_dedups_and_sorts() {
        let e = Exponent::new(4, 2).unwrap();
        let k = cfg(10.0, 10);
        // 1 and -1 have the same images under +-z^2.
        let s = OrbitSet {
            points: vec![c64(-1.0, 0.0), c64(1.0, 0.0)],
            depth: 3,
            truncated: false,
        };
        let s2 = iterate_set(&s, c64(0.5, 0.0), e, &k);
        assert_eq!(s2.points(), &[c64(-0.5, 0.0), c64(1.5, 0.0)]);
        assert_eq!(s2.depth(), 4);
    }

    #[test]
    fn iterate_set_truncates_to_smallest_moduli() {
        let e = Exponent::new(3, 1).unwrap();
        let mut k = cfg(100.0, 10);
        k.branch_cap = 2;
        let s = OrbitSet {
            points: vec![c64(0.1, 0.0), c64(1.0, 0.0), c64(-1.5, 0.0)],
            depth: 0,
            truncated: false,
        };
        let s2 = iterate_set(&s, c64(0.0, 0.0), e, &k);
        assert!(s2.truncated());
        assert_eq!(s2.len(), 2);
        assert!((s2.points()[0] - c64(0.001, 0.0)).norm() < 1e-15);
        assert_eq!(s2.points()[1], c64(1.0, 0.0));
    }

    #[test]
    fn membership_examples() {
        let e21 = Exponent::new(2, 1).unwrap();
        let v = in_filled_julia(c64(0.0, 0.0), c64(0.0, 0.0), e21, &cfg(2.0, 100));
        assert_eq!(v.status, Membership::Inside);
        assert_eq!(v.steps, 100);
        let v = in_filled_julia(c64(3.0, 0.0), c64(0.0, 0.0), e21, &cfg(2.0, 100));
        assert_eq!((v.status, v.steps), (Membership::Escaped, 0));
        let e42 = Exponent::new(4, 2).unwrap();
        let k = EscapeConfig::for_parameter(e42, 2.0, 200).unwrap();
        let v = in_filled_julia(c64(2.0, 0.0), c64(-2.0, 0.0), e42, &k);
        assert!(v.is_inside());
        assert!(!v.truncated);
    }

    #[test]
    fn unique_orbit_at_minus_two() {
        let e = Exponent::new(4, 2).unwrap();
        let k = EscapeConfig::for_parameter(e, 2.0, 50).unwrap();
        let orbit = unique_bounded_orbit(c64(0.0, 0.0), c64(-2.0, 0.0), e, &k, 10)
            .unwrap()
            .unwrap();
        assert_eq!(
            orbit.points,
            vec![c64(0.0, 0.0), c64(-2.0, 0.0), c64(2.0, 0.0), c64(2.0, 0.0)]
        );
        assert_eq!((orbit.preperiod, orbit.period), (2, 1));
        assert!(orbit.unique && orbit.strictly_preperiodic);
        assert_eq!(orbit.cycle(), &[c64(2.0, 0.0)]);
    }

    #[test]
    fn fixed_critical_point_is_not_strictly_preperiodic() {
        let e = Exponent::new(4, 2).unwrap();
        let k = EscapeConfig::for_parameter(e, 0.0, 50).unwrap();
        let orbit = unique_bounded_orbit(c64(0.0, 0.0), c64(0.0, 0.0), e, &k, 10)
            .unwrap()
            .unwrap();
        assert_eq!((orbit.preperiod, orbit.period), (0, 1));
        assert!(!orbit.strictly_preperiodic);
    }

    #[test]
    fn escaping_critical_orbit_has_no_bounded_orbit() {
        let e = Exponent::new(2, 1).unwrap();
        let k = EscapeConfig::for_parameter(e, 5.0, 50).unwrap();
        assert_eq!(
            unique_bounded_orbit(c64(0.0, 0.0), c64(5.0, 0.0), e, &k, 10).unwrap(),
            None
        );
    }

    #[test]
    fn non_unique_orbit_is_rejected() {
        // At c = 0 both images +-z^2 of z = 0.5 stay bounded.
        let e = Exponent::new(4, 2).unwrap();
        let k = EscapeConfig::for_parameter(e, 0.0, 30).unwrap();
        assert_eq!(
            unique_bounded_orbit(c64(0.5, 0.0), c64(0.0, 0.0), e, &k, 10).unwrap(),
            None
        );
    }

    #[test]
    fn no_closure_within_horizon() {
        // Irrational rotation on the unit circle never recurs.
        let e = Exponent::new(2, 1).unwrap();
        let k = EscapeConfig::for_parameter(e, 0.0, 30).unwrap();
        let z = Complex64::from_polar(1.0, 1.0);
        assert!(matches!(
            unique_bounded_orbit(z, c64(0.0, 0.0), e, &k, 20),
            Err(Error::NoClosure { horizon: 20 })
        ));
    }

    fn classical_escapes(mut z: Complex64, c: Complex64, max_iter: u32) -> bool {
        for _ in 0..max_iter {
            if z.norm_sqr() > 4.0 {
                return true;
            }
            z = z * z + c;
        }
        z.norm_sqr() > 4.0
    }

    #[test]
    fn agrees_with_classical_iteration_for_q1() {
        let e = Exponent::new(2, 1).unwrap();
        let n = 48;
        let mut disagree = 0;
        for j in 0..n {
            for i in 0..n {
                let c = c64(
                    -2.2 + 3.2 * (i as f64 + 0.5) / n as f64,
                    -1.5 + 3.0 * (j as f64 + 0.5) / n as f64,
                );
                let k = EscapeConfig::for_parameter(e, c.norm(), 300).unwrap();
                let engine = in_filled_julia(c64(0.0, 0.0), c, e, &k);
                if engine.is_inside() == classical_escapes(c64(0.0, 0.0), c, 300)
                    && engine.steps < 300
                {
                    disagree += 1;
                }
            }
        }
        assert!(
            disagree as f64 <= 0.005 * (n * n) as f64,
            "{disagree} disagreements"
        );
    }

    proptest! {
        #[test]
        fn inside_is_monotone_in_budget(re in -2.5f64..2.5, im in -2.5f64..2.5, n in 1u32..40, extra in 1u32..40) {
            let e = Exponent::new(5, 2).unwrap();
            let c = c64(-0.4, 0.6);
            let radius = escape_radius(e, c.norm(), 2.0, 0.05).unwrap();
            let lo = cfg(radius, n);
            let hi = cfg(radius, n + extra);
            let z = c64(re, im);
            if in_filled_julia(z, c, e, &hi).is_inside() {
                prop_assert!(in_filled_julia(z, c, e, &lo).is_inside());
            }
        }

        #[test]
        fn iterate_set_output_is_canonical(re in -1.5f64..1.5, im in -1.5f64..1.5, steps in 1usize..8) {
            let e = Exponent::new(7, 3).unwrap();
            let c = c64(0.1, -0.3);
            let k = EscapeConfig::for_parameter(e, c.norm(), 10).unwrap();
            let mut s = OrbitSet::start(c64(re, im), &k);
            for _ in 0..steps {
                s = iterate_set(&s, c, e, &k);
                for p in s.points() {
                    prop_assert!(p.norm() <= k.radius);
                }
                for w in s.points().windows(2) {
                    prop_assert_eq!(canonical_cmp(&w[0], &w[1]), Ordering::Less);
                }
                for (i, a) in s.points().iter().enumerate() {
                    for b in &s.points()[i + 1..] {
                        prop_assert!((a - b).norm() > k.merge_eps);
                    }
                }
            }
        }
    }
}
