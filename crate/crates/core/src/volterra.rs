//! The operator `T_g f(z) = int_0^z f(w) g'(w) dw` through two independent
//! backends: termwise integration of Taylor coefficients, and Gauss–Legendre
//! quadrature along the radius `s -> s z`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::disc_fn::{test_function, AnalyticFn, CandidateSequence, ClosedForm, DiscFunction};
use crate::error::{HvlError, Result};
use crate::norms::{hardy_norm, mean_oscillation, tail_max, NormEstimate};
use crate::point::{circular_distance, DiscPoint, HotPoint};
use crate::quadrature::gl16;

/// Smallest radial panel next to the endpoint `s = 1`.
const SIGMA_FLOOR: f64 = 1e-300;

/// Refinement cap for [`apply_volterra_quad`].
const MAX_RADIAL_REFINE: u32 = 12;

/// Trapezoid seed for boundary norms of images without boundary features.
const NORM_SAMPLES: usize = 256;

/// Radial refinement used by [`VolterraImage`] when sampled by norm routines.
pub const IMAGE_REFINE: u32 = 0;

/// Ratio between consecutive radial breakpoints.
const RADIAL_RATIO: f64 = 4.0;

/// Termwise `T_g f`: `h_0 = 0`, `h_k = (1/k) sum_{n+m=k-1} f_n g'_m`.
///
/// The output keeps only degrees fixed by the known coefficients of both
/// inputs, so it is exact for polynomial pairs and a truncation otherwise.
/// For constant `f = c` with a closed-form `g` the closed form
/// `c (g - g(0))` is attached.
pub fn apply_volterra_coeff(g: &AnalyticFn, f: &AnalyticFn) -> Result<AnalyticFn> {
    let dg = g.derivative();
    let (fc, dc) = (f.coeffs(), dg.coeffs());
    if fc.is_empty() || dc.is_empty() {
        return Err(HvlError::NoSeries);
    }
    let nf = fc.len() - 1;
    let ng = dc.len();
    let top = match (f.is_exact(), g.is_exact()) {
        (true, true) => nf + ng,
        (true, false) => ng,
        (false, true) => nf + 1,
        (false, false) => (nf + 1).min(ng),
    };
    let zero = Complex64::new(0.0, 0.0);
    let coeffs: Vec<Complex64> = (0..=top)
        .into_par_iter()
        .map(|k| {
            if k == 0 {
                return zero;
            }
            let lo = (k - 1).saturating_sub(ng - 1);
            let hi = (k - 1).min(nf);
            let mut acc = zero;
            for n in lo..=hi {
                acc += fc[n] * dc[k - 1 - n];
            }
            acc / k as f64
        })
        .collect();
    let exact = f.is_exact() && g.is_exact();
    let closed = match (f.is_exact() && fc.iter().skip(1).all(|c| c.norm() == 0.0), g.closed_form()) {
        (true, Some(form)) => {
            let c = fc[0];
            let g0 = form.value(&DiscPoint::ORIGIN)?;
            Some(ClosedForm::Sum { constant: -c * g0, terms: vec![(c, form.clone())] })
        }
        _ => None,
    };
    Ok(AnalyticFn::from_parts(coeffs, closed, exact))
}

/// Boundary-capable image `T_g f`, evaluated by radial quadrature.
#[derive(Debug, Clone)]
pub struct VolterraImage {
    f: AnalyticFn,
    dg: AnalyticFn,
    hot: Vec<HotPoint>,
    refine: u32,
}

impl VolterraImage {
    pub fn new(g: &AnalyticFn, f: &AnalyticFn) -> Self {
        Self::with_refine(g, f, IMAGE_REFINE)
    }

    pub fn with_refine(g: &AnalyticFn, f: &AnalyticFn, refine: u32) -> Self {
        let dg = g.derivative();
        let mut hot = f.hot_points();
        for h in dg.hot_points() {
            if !hot.contains(&h) {
                hot.push(h);
            }
        }
        VolterraImage { f: f.clone(), dg, hot, refine }
    }

    pub fn input(&self) -> &AnalyticFn {
        &self.f
    }

    /// Radial breakpoints in `sigma = 1 - s`, geometric from 1 toward the
    /// closest boundary feature seen from `z`.
    fn radial_breaks(&self, z: &DiscPoint) -> Result<Vec<f64>> {
        let mut sigma_min: f64 = 0.25;
        for h in &self.hot {
            let d = circular_distance(z.arg, h.angle).max(h.scale).max(z.defect);
            if d == 0.0 {
                return Err(HvlError::SingularPoint(z.arg));
            }
            sigma_min = sigma_min.min(d / 16.0);
        }
        let sigma_min = sigma_min.max(SIGMA_FLOOR);
        let mut breaks = vec![0.0];
        let mut s = 1.0;
        let mut upper = Vec::new();
        while s > sigma_min {
            upper.push(s);
            s /= RADIAL_RATIO;
        }
        breaks.push(sigma_min);
        breaks.extend(upper.into_iter().rev());
        breaks.dedup();
        Ok(breaks)
    }

    /// `int_0^1 f(s z) g'(s z) z ds` with every radial panel split into
    /// `2^refine` Gauss–Legendre panels.
    pub fn value_at_level(&self, z: &DiscPoint, refine: u32) -> Result<Complex64> {
        if z.defect >= 1.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let breaks = self.radial_breaks(z)?;
        let gl = gl16();
        let split = 1usize << refine;
        let mut acc = Complex64::new(0.0, 0.0);
        for w in breaks.windows(2) {
            let width = (w[1] - w[0]) / split as f64;
            for piece in 0..split {
                let half = 0.5 * width;
                let mid = w[0] + width * piece as f64 + half;
                let mut panel = Complex64::new(0.0, 0.0);
                for (x, wt) in gl.nodes.iter().zip(&gl.weights) {
                    let sigma = mid + half * x;
                    let q = z.shrink(sigma);
                    panel += self.f.value_at(&q)? * self.dg.value_at(&q)? * *wt;
                }
                acc += panel * half;
            }
        }
        Ok(acc * z.to_complex())
    }
}

impl DiscFunction for VolterraImage {
    fn value_at(&self, z: &DiscPoint) -> Result<Complex64> {
        self.value_at_level(z, self.refine)
    }

    fn hot_points(&self) -> Vec<HotPoint> {
        self.hot.clone()
    }
}

/// `T_g f(z)` by radial quadrature, refining until two successive levels
/// differ by less than `tol`.
pub fn apply_volterra_quad(g: &AnalyticFn, f: &AnalyticFn, z: Complex64, tol: f64) -> Result<Complex64> {
    apply_volterra_quad_at(g, f, &DiscPoint::from_complex(z)?, tol)
}

/// [`apply_volterra_quad`] for a point given in polar form.
pub fn apply_volterra_quad_at(g: &AnalyticFn, f: &AnalyticFn, z: &DiscPoint, tol: f64) -> Result<Complex64> {
    if !(tol > 0.0) {
        return Err(HvlError::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }
    let image = VolterraImage::with_refine(g, f, 0);
    let mut prev = image.value_at_level(z, 0)?;
    let mut change = f64::INFINITY;
    for level in 1..=MAX_RADIAL_REFINE {
        let next = image.value_at_level(z, level)?;
        change = (next - prev).norm();
        if change < tol {
            return Ok(next);
        }
        prev = next;
    }
    Err(HvlError::QuadratureNotConverged { tol, change })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolterraBackendReport {
    pub max_abs_discrepancy: f64,
    pub sample_points: Vec<Complex64>,
}

/// Largest disagreement between the two backends over `points`.
pub fn volterra_consistency(g: &AnalyticFn, f: &AnalyticFn, points: &[Complex64]) -> Result<VolterraBackendReport> {
    let mut worst: f64 = 0.0;
    if !points.is_empty() {
        let h = apply_volterra_coeff(g, f)?;
        for &z in points {
            let a = h.series_value(z)?;
            let b = apply_volterra_quad(g, f, z, 1e-14)?;
            worst = worst.max((a - b).norm());
        }
    }
    Ok(VolterraBackendReport { max_abs_discrepancy: worst, sample_points: points.to_vec() })
}

/// `||T_g f||_p` on the circle.
pub fn volterra_norm(g: &AnalyticFn, f: &AnalyticFn, p: f64) -> Result<NormEstimate> {
    hardy_norm(&VolterraImage::new(g, f), p, NORM_SAMPLES, 1.0)
}

/// `||g o sigma_a - g(a)||_t^t / ||T_g f_a||_p^t`, for `0 < t < p/2`.
pub fn aleman_cima_ratio(g: &AnalyticFn, a: &DiscPoint, p: f64, t: f64) -> Result<f64> {
    if !(t > 0.0 && t < p / 2.0) {
        return Err(HvlError::InvalidParameter(format!("need 0 < t < p/2, got t = {t}, p = {p}")));
    }
    if a.defect <= 0.0 {
        return Err(HvlError::OutsideDisc(a.modulus()));
    }
    let fa = test_function(*a, p)?;
    let den = volterra_norm(g, &fa, p)?.value.powf(t);
    if !(den >= 1e-14) {
        return Err(HvlError::DegenerateRatio(den));
    }
    let num = mean_oscillation(g, a, t)?.value.powf(t);
    Ok(num / den)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormLimitProfile {
    pub points: Vec<DiscPoint>,
    pub norms: Vec<NormEstimate>,
    /// Max over the last quarter of the profile.
    pub c_hat: f64,
    /// `c_hat` moved by less than 1% when the last path point was added.
    pub stabilized: bool,
    pub rel_change: f64,
}

/// Relative stabilization threshold for `c_hat`.
pub const C_HAT_REL_TOL: f64 = 0.01;

/// `||T_g f_{a_k}||_p` along the path, with the last-quarter estimate of
/// `limsup ||T_g f_a||_p`.
pub fn normlimit_profile(g: &AnalyticFn, p: f64, path: &CandidateSequence) -> Result<NormLimitProfile> {
    if path.len() < 2 {
        return Err(HvlError::InvalidParameter("norm-limit profile needs at least two path points".into()));
    }
    let norms: Vec<NormEstimate> = path
        .points
        .iter()
        .map(|a| volterra_norm(g, &test_function(*a, p)?, p))
        .collect::<Result<_>>()?;
    let values: Vec<f64> = norms.iter().map(|e| e.value).collect();
    let c_hat = tail_max(&values);
    let before = tail_max(&values[..values.len() - 1]);
    let rel_change = if c_hat == 0.0 && before == 0.0 { 0.0 } else { (c_hat - before).abs() / c_hat.max(before) };
    Ok(NormLimitProfile {
        points: path.points.clone(),
        norms,
        c_hat,
        stabilized: rel_change < C_HAT_REL_TOL,
        rel_change,
    })
}
