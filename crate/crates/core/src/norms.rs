//! Hardy-space norms, arc masses and the oscillation seminorms (BMOA, VMOA
//! defect, Bloch, LMOA), all as explicit finite computations with a reported
//! numerical error.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::disc_fn::{AnalyticFn, DiscFunction};
use crate::error::{HvlError, Result};
use crate::point::{circular_distance, one_minus_conj_product, wrap_angle, DiscPoint, HotPoint};
use crate::quadrature::{check_resolvable, graded_breakpoints, trapezoid_nodes, PanelRule};

/// Relative change at which resolution doubling stops.
pub const DOUBLING_REL_TOL: f64 = 1e-9;
/// Hard cap on the number of samples of one estimate.
pub const MAX_SAMPLES: usize = 1 << 21;
/// Narrowest arc the graded rule accepts.
pub const MIN_ARC_HALF_WIDTH: f64 = 1e-280;

/// Open boundary arc `{e^{it} : dist(t, center) < half_width}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    pub center: f64,
    pub half_width: f64,
}

impl Arc {
    pub fn new(center: f64, half_width: f64) -> Result<Arc> {
        if !(half_width > 0.0 && half_width <= PI) || !center.is_finite() {
            return Err(HvlError::InvalidParameter(format!(
                "arc half-width must lie in (0, pi], got {half_width}"
            )));
        }
        Ok(Arc { center, half_width })
    }

    pub fn full_circle() -> Arc {
        Arc { center: 0.0, half_width: PI }
    }

    pub fn contains(&self, theta: f64) -> bool {
        circular_distance(theta, self.center) < self.half_width
    }

    /// The closure of the complementary arc (boundary points carry no mass);
    /// `None` when the arc is the whole circle.
    pub fn complement(&self) -> Option<Arc> {
        if self.half_width >= PI {
            None
        } else {
            Some(Arc { center: wrap_angle(self.center + PI), half_width: PI - self.half_width })
        }
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.center - self.half_width, self.center + self.half_width)
    }

    /// The complement as the two pieces `[c + h, c + pi]` and `[c - pi, c - h]`.
    /// Their inner endpoints keep full precision when `h` is tiny, which the
    /// single arc of half-width `pi - h` cannot.
    pub fn complement_pieces(&self) -> Vec<(f64, f64)> {
        if self.half_width >= PI {
            return Vec::new();
        }
        let (c, h) = (self.center, self.half_width);
        vec![(c + h, c + PI), (c - PI, c - h)]
    }

    /// Normalized length `m(A)`.
    pub fn measure(&self) -> f64 {
        self.half_width / PI
    }
}

/// A numerically obtained nonnegative quantity with the sample count used
/// and the change observed under the last resolution doubling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub value: f64,
    pub resolution: usize,
    pub error_bound: f64,
}

impl NormEstimate {
    pub fn exact(value: f64) -> Self {
        NormEstimate { value, resolution: 0, error_bound: 0.0 }
    }

    /// `value^{1/p}` with the error bound carried through.
    pub fn root(self, p: f64) -> NormEstimate {
        let value = self.value.powf(1.0 / p);
        let other = (self.value + self.error_bound).powf(1.0 / p);
        NormEstimate { value, resolution: self.resolution, error_bound: (other - value).abs() }
    }
}

fn validate_p(p: f64) -> Result<()> {
    if !(p.is_finite() && p > 0.0) {
        return Err(HvlError::InvalidParameter(format!("exponent must be positive, got {p}")));
    }
    Ok(())
}

/// Hot points as seen at radius `1 - defect`: singularities soften into
/// peaks of width `defect`.
fn hot_points_at(f: &dyn DiscFunction, defect: f64) -> Vec<HotPoint> {
    f.hot_points()
        .into_iter()
        .map(|h| {
            if defect > 0.0 {
                HotPoint::peak(h.angle, h.scale.max(defect))
            } else {
                h
            }
        })
        .collect()
}

/// Runs `eval(level)` for level `start`, `start + 1`, ... until two
/// successive values agree to `DOUBLING_REL_TOL` or the sample cap is reached.
fn stabilize_from<F>(start: u32, mut eval: F) -> Result<NormEstimate>
where
    F: FnMut(u32) -> Result<(f64, usize)>,
{
    let (mut prev, _) = eval(start)?;
    let mut level = start + 1;
    loop {
        let (value, n) = eval(level)?;
        let change = (value - prev).abs();
        if change <= DOUBLING_REL_TOL * value.abs() || n * 2 > MAX_SAMPLES {
            return Ok(NormEstimate { value, resolution: n, error_bound: change });
        }
        prev = value;
        level += 1;
    }
}

fn stabilize<F>(eval: F) -> Result<NormEstimate>
where
    F: FnMut(u32) -> Result<(f64, usize)>,
{
    stabilize_from(0, eval)
}

/// `int_arc |F|^p dm` with the graded rule at a fixed refinement level.
/// `weight` multiplies the integrand (used for Poisson-weighted means).
pub(crate) fn graded_mass<F>(arc: &Arc, hot: &[HotPoint], refine: u32, integrand: F) -> Result<(f64, usize)>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    graded_mass_on(arc.bounds(), hot, refine, integrand)
}

pub(crate) fn graded_mass_on<F>((lo, hi): (f64, f64), hot: &[HotPoint], refine: u32, integrand: F) -> Result<(f64, usize)>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    check_resolvable(hot)?;
    let rule = PanelRule::from_breakpoints(&graded_breakpoints(lo, hi, hot), refine);
    let v = rule.integrate(integrand)?;
    Ok((v / TAU, rule.len()))
}

/// p-mass of `f` on an arc of the circle, at a single refinement level.
pub fn arc_mass_at_level(f: &dyn DiscFunction, p: f64, arc: &Arc, refine: u32) -> Result<f64> {
    let hot = f.hot_points();
    Ok(graded_mass(arc, &hot, refine, |t| Ok(f.value_at(&DiscPoint::boundary(t))?.norm().powf(p)))?.0)
}

/// `int_A |f|^p dm` on the circle (`m(T) = 1`), NOT its p-th root.
pub fn arc_integral(f: &dyn DiscFunction, p: f64, arc: &Arc) -> Result<NormEstimate> {
    arc_integral_from(f, p, arc, 0)
}

/// [`arc_integral`] with the doubling started at refinement `start`; a
/// larger start replays the same quantity at a finer resolution.
pub fn arc_integral_from(f: &dyn DiscFunction, p: f64, arc: &Arc, start: u32) -> Result<NormEstimate> {
    validate_p(p)?;
    if arc.half_width < MIN_ARC_HALF_WIDTH {
        return Err(HvlError::InvalidParameter(format!(
            "arc half-width {:e} below the resolution limit",
            arc.half_width
        )));
    }
    let hot = f.hot_points();
    stabilize_from(start, |level| {
        graded_mass(arc, &hot, level, |t| Ok(f.value_at(&DiscPoint::boundary(t))?.norm().powf(p)))
    })
}

/// p-mass on the complement of `arc`; zero when the arc is the whole circle.
pub fn complement_integral(f: &dyn DiscFunction, p: f64, arc: &Arc) -> Result<NormEstimate> {
    complement_integral_from(f, p, arc, 0)
}

/// [`complement_integral`] with the doubling started at refinement `start`.
pub fn complement_integral_from(f: &dyn DiscFunction, p: f64, arc: &Arc, start: u32) -> Result<NormEstimate> {
    validate_p(p)?;
    let pieces = arc.complement_pieces();
    if pieces.is_empty() {
        return Ok(NormEstimate::exact(0.0));
    }
    let hot = f.hot_points();
    stabilize_from(start, |level| {
        let mut total = 0.0;
        let mut nodes = 0;
        for &piece in &pieces {
            let (m, n) =
                graded_mass_on(piece, &hot, level, |t| Ok(f.value_at(&DiscPoint::boundary(t))?.norm().powf(p)))?;
            total += m;
            nodes += n;
        }
        Ok((total, nodes))
    })
}

/// `(1/2pi int |f(r e^{it})|^p dt)^{1/p}`.
///
/// Functions without boundary features use the uniform trapezoid rule from
/// `samples` nodes, doubling until stable. Functions that declare peaks or
/// singularities use composite Gauss–Legendre panels graded toward them.
pub fn hardy_norm(f: &dyn DiscFunction, p: f64, samples: usize, radius: f64) -> Result<NormEstimate> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(HvlError::InvalidParameter(format!("p must be >= 1, got {p}")));
    }
    if !(radius > 0.0 && radius <= 1.0) {
        return Err(HvlError::InvalidParameter(format!("radius must lie in (0, 1], got {radius}")));
    }
    if samples < 64 || !samples.is_power_of_two() {
        return Err(HvlError::InvalidParameter(format!("samples must be a power of two >= 64, got {samples}")));
    }
    circle_mass(f, p, samples, 1.0 - radius).map(|m| m.root(p))
}

/// `1/2pi int |f((1 - defect) e^{it})|^p dt`.
pub fn circle_mass(f: &dyn DiscFunction, p: f64, samples: usize, defect: f64) -> Result<NormEstimate> {
    let hot = hot_points_at(f, defect);
    let at = |t: f64| DiscPoint { arg: t, defect };
    if hot.is_empty() {
        stabilize(|level| {
            let m = samples << level;
            let vals: Vec<f64> =
                trapezoid_nodes(m).map(|t| Ok(f.value_at(&at(t))?.norm().powf(p))).collect::<Result<_>>()?;
            Ok((vals.iter().sum::<f64>() / m as f64, m))
        })
    } else {
        stabilize(|level| graded_mass(&Arc::full_circle(), &hot, level, |t| Ok(f.value_at(&at(t))?.norm().powf(p))))
    }
}

/// Hardy norms along an increasing radius schedule; radii where the
/// function cannot be evaluated (series beyond its validity radius) end the
/// schedule.
pub fn hardy_norm_profile(f: &dyn DiscFunction, p: f64, samples: usize, radii: &[f64]) -> Result<Vec<(f64, NormEstimate)>> {
    let mut out = Vec::new();
    for &r in radii {
        match hardy_norm(f, p, samples, r) {
            Ok(est) => out.push((r, est)),
            Err(HvlError::OutsideValidityRadius { .. } | HvlError::TruncationTooShort { .. }) => break,
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// The supremum over the schedule, i.e. the value at the largest valid radius.
pub fn hardy_norm_sup(f: &dyn DiscFunction, p: f64, samples: usize, radii: &[f64]) -> Result<NormEstimate> {
    hardy_norm_profile(f, p, samples, radii)?
        .last()
        .map(|(_, e)| *e)
        .ok_or_else(|| HvlError::InvalidParameter("no valid radius in schedule".into()))
}

/// Poisson kernel `(1 - |a|^2)/|1 - conj(a) w|^2` for boundary `w`.
pub fn poisson_kernel(a: &DiscPoint, w: &DiscPoint) -> f64 {
    let d = one_minus_conj_product(a, w).norm();
    (a.one_minus_modulus_sq() / d) / d
}

fn check_boundary_evaluable(g: &AnalyticFn) -> Result<()> {
    if g.closed_form().is_none() && !g.is_exact() {
        return Err(HvlError::SeriesOnBoundary);
    }
    Ok(())
}

/// `||g o sigma_a - g(a)||_q`, computed after the substitution `w = sigma_a(zeta)`
/// as `(int |g(w) - g(a)|^q P_a(w) dm(w))^{1/q}`.
pub fn mean_oscillation(g: &AnalyticFn, a: &DiscPoint, q: f64) -> Result<NormEstimate> {
    validate_p(q)?;
    check_boundary_evaluable(g)?;
    if a.defect <= 0.0 {
        return Err(HvlError::OutsideDisc(a.modulus()));
    }
    let ga = g.value_at(a)?;
    let mut hot = g.hot_points();
    if a.defect < 0.5 {
        hot.push(HotPoint::peak(a.arg, a.defect));
    }
    let full = Arc::full_circle();
    let m = stabilize(|level| {
        graded_mass(&full, &hot, level, |t| {
            let w = DiscPoint::boundary(t);
            Ok((g.value_at(&w)? - ga).norm().powf(q) * poisson_kernel(a, &w))
        })
    })?;
    Ok(m.root(q))
}

/// Disc points on `rays` equally spaced rays (first ray at angle 0) at the
/// given modulus defects.
pub fn ray_grid(rays: usize, defects: &[f64]) -> Vec<DiscPoint> {
    let mut out = Vec::with_capacity(rays * defects.len());
    for &d in defects {
        for k in 0..rays {
            out.push(DiscPoint { arg: wrap_angle(TAU * k as f64 / rays as f64), defect: d });
        }
    }
    out
}

/// Defects `2^{-j/steps}` for `j = steps..=levels*steps`; `steps = 1` gives
/// the dyadic radii `1 - 2^{-j}`, `j = 1..=levels`.
pub fn dyadic_defects(levels: usize, steps_per_octave: usize) -> Vec<f64> {
    (steps_per_octave..=levels * steps_per_octave)
        .map(|j| 2f64.powf(-(j as f64) / steps_per_octave as f64))
        .collect()
}

/// The standard seminorm grid: 8 rays times radii `1 - 2^{-j}`, `j = 1..=levels`.
pub fn standard_grid(levels: usize) -> Vec<DiscPoint> {
    ray_grid(8, &dyadic_defects(levels, 1))
}

fn grid_max<F>(grid: &[DiscPoint], mut per_point: F) -> Result<NormEstimate>
where
    F: FnMut(&DiscPoint) -> Result<NormEstimate>,
{
    if grid.is_empty() {
        return Err(HvlError::InvalidParameter("empty grid".into()));
    }
    let mut best = NormEstimate::exact(0.0);
    let mut resolution = 0;
    let mut err: f64 = 0.0;
    for a in grid {
        let e = per_point(a)?;
        resolution += e.resolution;
        err = err.max(e.error_bound);
        if e.value > best.value {
            best = e;
        }
    }
    Ok(NormEstimate { value: best.value, resolution, error_bound: err })
}

/// `max_{a in grid} ||g o sigma_a - g(a)||_q`.
pub fn bmoa_seminorm(g: &AnalyticFn, grid: &[DiscPoint], q: f64) -> Result<NormEstimate> {
    if g.is_constant() {
        return Ok(NormEstimate::exact(0.0));
    }
    grid_max(grid, |a| mean_oscillation(g, a, q))
}

/// `d_j = max over rays of ||g o sigma_a - g(a)||_q` at `|a| = 1 - defects[j]`.
pub fn vmoa_defect(g: &AnalyticFn, defects: &[f64], rays: usize, q: f64) -> Result<Vec<f64>> {
    check_decreasing_defects(defects)?;
    defects
        .iter()
        .map(|&d| {
            if g.is_constant() {
                return Ok(0.0);
            }
            Ok(grid_max(&ray_grid(rays, &[d]), |a| mean_oscillation(g, a, q))?.value)
        })
        .collect()
}

fn check_decreasing_defects(defects: &[f64]) -> Result<()> {
    let ok = defects.iter().all(|d| *d > 0.0 && *d < 1.0) && defects.windows(2).all(|w| w[1] < w[0]);
    if !ok {
        return Err(HvlError::InvalidParameter("radii must increase strictly inside (0, 1)".into()));
    }
    Ok(())
}

/// Maximum over the last quarter of a profile; the finite stand-in for a
/// limsup along an eventually monotone sequence.
pub fn tail_max(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let start = values.len() - values.len().div_ceil(4);
    values[start..].iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// `max_{z in grid} (1 - |z|^2) |g'(z)|`.
pub fn bloch_seminorm(g: &AnalyticFn, grid: &[DiscPoint]) -> Result<NormEstimate> {
    let dg = g.derivative();
    grid_max(grid, |z| Ok(NormEstimate::exact(z.one_minus_modulus_sq() * dg.value_at(z)?.norm())))
}

/// `lambda(a) = log(2/(1 - |a|))`.
pub fn lmoa_weight(a: &DiscPoint) -> f64 {
    (2.0 / a.defect).ln()
}

/// `max_{a in grid} lambda(a) ||g o sigma_a - g(a)||_2`.
pub fn lmoa_seminorm(g: &AnalyticFn, grid: &[DiscPoint]) -> Result<NormEstimate> {
    if g.is_constant() {
        return Ok(NormEstimate::exact(0.0));
    }
    grid_max(grid, |a| {
        let e = mean_oscillation(g, a, 2.0)?;
        let w = lmoa_weight(a);
        Ok(NormEstimate { value: w * e.value, resolution: e.resolution, error_bound: w * e.error_bound })
    })
}

/// Per-radius LMOA profile (max over rays), for symbols outside LMOA whose
/// weighted oscillation grows without bound.
pub fn lmoa_profile(g: &AnalyticFn, defects: &[f64], rays: usize) -> Result<Vec<f64>> {
    check_decreasing_defects(defects)?;
    defects.iter().map(|&d| Ok(lmoa_seminorm(g, &ray_grid(rays, &[d]))?.value)).collect()
}

/// `(sum |alpha_n|^p)^{1/p}`.
pub fn lp_norm(alpha: &[Complex64], p: f64) -> f64 {
    alpha.iter().map(|a| a.norm().powf(p)).sum::<f64>().powf(1.0 / p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disc_fn::{make_symbol, make_test_function, test_function, SymbolSpec};

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn monomials_have_unit_norm() {
        for k in 0..5 {
            let f = make_symbol(&SymbolSpec::Monomial { k }, k).unwrap();
            for p in [1.0, 2.0, 3.5] {
                let n = hardy_norm(&f, p, 64, 1.0).unwrap();
                assert!((n.value - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn parseval_for_one_plus_z() {
        let f = AnalyticFn::polynomial(vec![c(1.0), c(1.0)]).unwrap();
        let n = hardy_norm(&f, 2.0, 64, 1.0).unwrap();
        assert!((n.value - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn hardy_norm_rejects_bad_arguments() {
        let f = AnalyticFn::constant(c(1.0));
        assert!(hardy_norm(&f, 0.5, 64, 1.0).is_err());
        assert!(hardy_norm(&f, 2.0, 100, 1.0).is_err());
        assert!(hardy_norm(&f, 2.0, 64, 1.5).is_err());
        let series = make_symbol(&SymbolSpec::Log1, 64).unwrap().derivative();
        let series = AnalyticFn::from_coeffs(series.coeffs().to_vec()).unwrap();
        assert!(hardy_norm(&series, 2.0, 64, 1.0).is_err());
    }

    #[test]
    fn constant_arc_mass_is_normalized_length() {
        let one = AnalyticFn::constant(c(1.0));
        for eps in [0.1, 1.0, 3.0] {
            let m = arc_integral(&one, 2.0, &Arc::new(0.4, eps).unwrap()).unwrap();
            assert!((m.value - eps / PI).abs() < 1e-14);
        }
    }

    #[test]
    fn full_circle_mass_of_test_function_is_one() {
        for (arg, defect, tol) in [(0.0, 1e-40, 1e-12), (0.0, 0.3, 1e-13), (1.0, 1e-6, 1e-9)] {
            let f = test_function(DiscPoint::interior(arg, defect).unwrap(), 1.5).unwrap();
            let m = arc_integral(&f, 1.5, &Arc::full_circle()).unwrap();
            assert!((m.value - 1.0).abs() < tol, "{m:?}");
        }
    }

    #[test]
    fn series_radius_profile_is_monotone() {
        let a = DiscPoint::from_complex(c(0.8)).unwrap();
        let f = make_test_function(a, 2.0, 512).unwrap();
        let series = AnalyticFn::from_coeffs(f.coeffs().to_vec()).unwrap();
        let radii = [0.5, 0.8, 0.9, 0.95, 0.999];
        let prof = hardy_norm_profile(&series, 2.0, 256, &radii).unwrap();
        assert_eq!(prof.len(), 4, "0.999 is beyond 1 - 10/512");
        assert!(prof.windows(2).all(|w| w[1].1.value >= w[0].1.value));
    }

    #[test]
    fn complement_of_full_circle_is_empty() {
        assert!(Arc::full_circle().complement().is_none());
        let a = Arc::new(1.0, 0.5).unwrap();
        let c = a.complement().unwrap();
        assert!((c.half_width - (PI - 0.5)).abs() < 1e-15);
        assert!(!c.contains(1.0) && c.contains(1.0 + PI));
    }

    #[test]
    fn seminorms_of_constants_vanish() {
        let g = AnalyticFn::constant(c(2.0));
        let grid = standard_grid(4);
        assert_eq!(bmoa_seminorm(&g, &grid, 2.0).unwrap().value, 0.0);
        assert_eq!(bloch_seminorm(&g, &grid).unwrap().value, 0.0);
        assert_eq!(lmoa_seminorm(&g, &grid).unwrap().value, 0.0);
        assert_eq!(vmoa_defect(&g, &[0.5, 0.25], 8, 2.0).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn identity_oscillation_closed_form() {
        let z = make_symbol(&SymbolSpec::Monomial { k: 1 }, 1).unwrap();
        for d in [0.5, 0.1, 1e-3] {
            let a = DiscPoint::interior(0.7, d).unwrap();
            let v = mean_oscillation(&z, &a, 2.0).unwrap().value;
            assert!((v - a.one_minus_modulus_sq().sqrt()).abs() < 1e-10);
        }
        let b = bloch_seminorm(&z, &standard_grid(6)).unwrap().value;
        assert!((b - 0.75).abs() < 1e-15, "max at the innermost radius 1/2");
    }

    #[test]
    fn tail_max_uses_last_quarter() {
        assert_eq!(tail_max(&[5.0, 1.0, 2.0, 3.0, 0.5, 0.4, 0.3, 0.2]), 0.3);
        assert_eq!(tail_max(&[1.0]), 1.0);
    }

    #[test]
    fn lp_norm_examples() {
        assert_eq!(lp_norm(&[c(1.0)], 3.0), 1.0);
        assert_eq!(lp_norm(&[c(1.0), c(1.0)], 1.0), 2.0);
        assert!((lp_norm(&[c(3.0), c(4.0)], 2.0) - 5.0).abs() < 1e-15);
    }
}
