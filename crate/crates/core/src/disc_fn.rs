//! Analytic functions on the unit disc: truncated Taylor series with an
//! optional exact closed-form backend, the test functions `f_a`, Möbius
//! automorphisms, symbols `g`, and candidate sequences tending to the circle.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{HvlError, Result};
use crate::point::{circular_distance, one_minus_conj_product, DiscPoint, HotPoint};

/// Default truncation degree for series representations.
pub const DEFAULT_DEGREE: usize = 4096;

/// Largest admissible coefficient tail (absolute) at an evaluation radius.
pub const SERIES_TAIL_TOL: f64 = 1e-10;

/// Features wider than this are treated as smooth at unit scale.
const HOT_SCALE_CUTOFF: f64 = 0.5;

const ONE: DiscPoint = DiscPoint { arg: 0.0, defect: 0.0 };

/// Something that can be sampled on the closed disc, together with the
/// boundary features a quadrature rule needs to resolve.
pub trait DiscFunction: Sync {
    fn value_at(&self, z: &DiscPoint) -> Result<Complex64>;
    fn hot_points(&self) -> Vec<HotPoint>;
}

/// Built-in functions with exact evaluation everywhere on the closed disc
/// (except at a declared singular boundary point).
#[derive(Debug, Clone, PartialEq)]
pub enum ClosedForm {
    /// `f_a(z) = (1 - |a|^2)^{1/p} (1 - conj(a) z)^{-2/p}`
    TestFn { a: DiscPoint, p: f64 },
    /// `f_a'`
    TestFnDeriv { a: DiscPoint, p: f64 },
    /// `log(1 / (1 - z))`
    Log1,
    /// `1 / (1 - z)`
    Log1Deriv,
    /// `log(1 - conj(u) z)`
    CarlesonLog { u: DiscPoint },
    /// `-conj(u) / (1 - conj(u) z)`
    CarlesonLogDeriv { u: DiscPoint },
    /// `constant + sum c_j F_j`
    Sum { constant: Complex64, terms: Vec<(Complex64, ClosedForm)> },
}

fn conj_unit(p: &DiscPoint) -> Complex64 {
    p.to_complex().conj()
}

/// `w^{-beta}` on the principal branch.
fn pow_neg(w: Complex64, beta: f64) -> Complex64 {
    if beta == 1.0 {
        w.inv()
    } else if beta == 2.0 {
        w.inv() * w.inv()
    } else {
        (-w.ln() * beta).exp()
    }
}

fn test_kernel_base(a: &DiscPoint, z: &DiscPoint) -> Complex64 {
    let w = one_minus_conj_product(a, z);
    // Re(1 - conj(a) z) >= 1 - |a||z| > 0, so the principal branch is the
    // continuous one on the closed disc.
    assert!(w.re > 0.0, "principal branch violated: Re(1 - conj(a) z) = {}", w.re);
    w
}

impl ClosedForm {
    pub fn value(&self, z: &DiscPoint) -> Result<Complex64> {
        Ok(match self {
            ClosedForm::TestFn { a, p } => {
                // (1 - |a|^2)^{1/p} w^{-2/p} = (w / sqrt(1 - |a|^2))^{-2/p}, which
                // stays finite where w^{-2/p} alone overflows
                let w = test_kernel_base(a, z);
                pow_neg(w / a.one_minus_modulus_sq().sqrt(), 2.0 / p)
            }
            ClosedForm::TestFnDeriv { a, p } => {
                let w = test_kernel_base(a, z);
                let beta = 2.0 / p;
                pow_neg(w / a.one_minus_modulus_sq().sqrt(), beta) / w * conj_unit(a) * beta
            }
            ClosedForm::Log1 => -Self::one_minus_z(z)?.ln(),
            ClosedForm::Log1Deriv => Self::one_minus_z(z)?.inv(),
            ClosedForm::CarlesonLog { u } => one_minus_conj_product(u, z).ln(),
            ClosedForm::CarlesonLogDeriv { u } => -conj_unit(u) / one_minus_conj_product(u, z),
            ClosedForm::Sum { constant, terms } => {
                let mut acc = *constant;
                for (c, f) in terms {
                    if *c != Complex64::new(0.0, 0.0) {
                        acc += c * f.value(z)?;
                    }
                }
                acc
            }
        })
    }

    fn one_minus_z(z: &DiscPoint) -> Result<Complex64> {
        let w = one_minus_conj_product(&ONE, z);
        if w == Complex64::new(0.0, 0.0) {
            return Err(HvlError::SingularPoint(z.arg));
        }
        Ok(w)
    }

    pub fn derivative(&self) -> Option<ClosedForm> {
        match self {
            ClosedForm::TestFn { a, p } => Some(ClosedForm::TestFnDeriv { a: *a, p: *p }),
            ClosedForm::Log1 => Some(ClosedForm::Log1Deriv),
            ClosedForm::CarlesonLog { u } => Some(ClosedForm::CarlesonLogDeriv { u: *u }),
            ClosedForm::Sum { terms, .. } => {
                let mut out = Vec::with_capacity(terms.len());
                for (c, f) in terms {
                    out.push((*c, f.derivative()?));
                }
                Some(ClosedForm::Sum { constant: Complex64::new(0.0, 0.0), terms: out })
            }
            _ => None,
        }
    }

    pub fn hot_points(&self) -> Vec<HotPoint> {
        let mut out = Vec::new();
        self.collect_hot_points(&mut out);
        out
    }

    fn collect_hot_points(&self, out: &mut Vec<HotPoint>) {
        let mut push = |h: HotPoint| {
            if !out.contains(&h) {
                out.push(h);
            }
        };
        match self {
            ClosedForm::TestFn { a, .. }
            | ClosedForm::TestFnDeriv { a, .. }
            | ClosedForm::CarlesonLog { u: a }
            | ClosedForm::CarlesonLogDeriv { u: a } => {
                if a.defect < HOT_SCALE_CUTOFF {
                    push(HotPoint::peak(a.arg, a.defect));
                }
            }
            ClosedForm::Log1 | ClosedForm::Log1Deriv => push(HotPoint::singular(0.0)),
            ClosedForm::Sum { terms, .. } => {
                for (_, f) in terms {
                    f.collect_hot_points(out);
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    Series,
    Closed,
}

/// Truncated Taylor series `sum c_n z^n`, optionally backed by an exact
/// closed form. `exact` marks series that are the whole function
/// (polynomials), which are then valid on the closed disc.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticFn {
    coeffs: Vec<Complex64>,
    closed_form: Option<ClosedForm>,
    exact: bool,
}

fn check_finite(coeffs: &[Complex64]) -> Result<()> {
    if let Some(n) = coeffs.iter().position(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(HvlError::InvalidParameter(format!("coefficient {n} is not finite")));
    }
    Ok(())
}

impl AnalyticFn {
    /// A truncated series whose tail is unknown.
    pub fn from_coeffs(coeffs: Vec<Complex64>) -> Result<Self> {
        check_finite(&coeffs)?;
        if coeffs.is_empty() {
            return Err(HvlError::InvalidParameter("empty coefficient list".into()));
        }
        Ok(AnalyticFn { coeffs, closed_form: None, exact: false })
    }

    pub fn polynomial(coeffs: Vec<Complex64>) -> Result<Self> {
        let mut f = Self::from_coeffs(coeffs)?;
        f.exact = true;
        Ok(f)
    }

    pub fn constant(c: Complex64) -> Self {
        AnalyticFn { coeffs: vec![c], closed_form: None, exact: true }
    }

    pub fn zero() -> Self {
        Self::constant(Complex64::new(0.0, 0.0))
    }

    /// A function known only through its closed form.
    pub fn closed(form: ClosedForm) -> Self {
        AnalyticFn { coeffs: Vec::new(), closed_form: Some(form), exact: false }
    }

    pub fn with_closed_form(mut self, form: ClosedForm) -> Self {
        self.closed_form = Some(form);
        self
    }

    pub(crate) fn from_parts(coeffs: Vec<Complex64>, closed_form: Option<ClosedForm>, exact: bool) -> Self {
        AnalyticFn { coeffs, closed_form, exact }
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn closed_form(&self) -> Option<&ClosedForm> {
        self.closed_form.as_ref()
    }

    pub fn is_exact(&self) -> bool {
        self.exact
    }

    /// Truncation degree `N`, or `None` for closed-form-only functions.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    /// True when every coefficient vanishes beyond the constant term and
    /// there is no closed form saying otherwise.
    pub fn is_constant(&self) -> bool {
        self.closed_form.is_none() && self.exact && self.coeffs.iter().skip(1).all(|c| c.norm() == 0.0)
    }

    /// `1 - 10/N`, the radius up to which truncated series are trusted.
    pub fn validity_radius(&self) -> f64 {
        match self.degree() {
            _ if self.exact => 1.0,
            Some(n) if n > 0 => (1.0 - 10.0 / n as f64).max(0.0),
            _ => 0.0,
        }
    }

    /// Estimated `sum_{n > N} |c_n| r^n`, from the size of the last
    /// coefficients and a geometric continuation.
    pub fn tail_bound(&self, r: f64) -> f64 {
        if self.exact {
            return 0.0;
        }
        let Some(n) = self.degree() else { return f64::INFINITY };
        if r >= 1.0 {
            return f64::INFINITY;
        }
        let last = self.coeffs[n.saturating_sub(15)..].iter().map(|c| c.norm()).fold(0.0, f64::max);
        last * r.powi(n as i32 + 1) / (1.0 - r)
    }

    fn horner(&self, z: Complex64) -> Complex64 {
        self.coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c)
    }

    pub fn series_value(&self, z: Complex64) -> Result<Complex64> {
        if self.coeffs.is_empty() {
            return Err(HvlError::NoSeries);
        }
        let r = z.norm();
        if r > 1.0 {
            return Err(HvlError::OutsideDisc(r));
        }
        if !self.exact {
            let radius = self.validity_radius();
            if r > radius {
                return Err(HvlError::OutsideValidityRadius { modulus: r, radius });
            }
            let tail = self.tail_bound(r);
            if tail > SERIES_TAIL_TOL {
                return Err(HvlError::TruncationTooShort {
                    degree: self.degree().unwrap_or(0),
                    tail,
                    tol: SERIES_TAIL_TOL,
                });
            }
        }
        Ok(self.horner(z))
    }

    pub fn evaluate(&self, z: Complex64, backend: Backend) -> Result<Complex64> {
        match backend {
            Backend::Series => self.series_value(z),
            Backend::Closed => {
                let form = self.closed_form.as_ref().ok_or(HvlError::NoClosedForm)?;
                form.value(&DiscPoint::from_complex(z)?)
            }
        }
    }

    /// Coefficients shifted by termwise differentiation; closed forms are
    /// differentiated exactly where a derivative form exists.
    pub fn derivative(&self) -> AnalyticFn {
        let coeffs: Vec<Complex64> = if self.coeffs.len() > 1 {
            self.coeffs.iter().enumerate().skip(1).map(|(n, c)| c * n as f64).collect()
        } else if self.coeffs.is_empty() {
            Vec::new()
        } else {
            vec![Complex64::new(0.0, 0.0)]
        };
        let closed_form = self.closed_form.as_ref().and_then(|f| f.derivative());
        AnalyticFn { coeffs, closed_form, exact: self.exact }
    }
}

impl DiscFunction for AnalyticFn {
    fn value_at(&self, z: &DiscPoint) -> Result<Complex64> {
        if let Some(form) = &self.closed_form {
            return form.value(z);
        }
        if z.is_boundary() && !self.exact {
            return Err(HvlError::SeriesOnBoundary);
        }
        self.series_value(z.to_complex())
    }

    fn hot_points(&self) -> Vec<HotPoint> {
        self.closed_form.as_ref().map(|f| f.hot_points()).unwrap_or_default()
    }
}

fn validate_exponent(p: f64) -> Result<()> {
    if !(p.is_finite() && p >= 1.0) {
        return Err(HvlError::InvalidParameter(format!("exponent p must be >= 1, got {p}")));
    }
    Ok(())
}

/// `f_a` with `N + 1` Taylor coefficients and the exact closed form attached.
///
/// Coefficients follow `c_{n+1} = c_n (beta + n)/(n + 1) conj(a)` with
/// `beta = 2/p` and `c_0 = (1 - |a|^2)^{1/p}`.
pub fn make_test_function(a: DiscPoint, p: f64, degree: usize) -> Result<AnalyticFn> {
    validate_exponent(p)?;
    if a.defect <= 0.0 {
        return Err(HvlError::OutsideDisc(a.modulus()));
    }
    if degree < 1 {
        return Err(HvlError::InvalidParameter("truncation degree must be >= 1".into()));
    }
    let beta = 2.0 / p;
    let abar = a.to_complex().conj();
    let mut coeffs = Vec::with_capacity(degree + 1);
    let mut c = Complex64::new(a.one_minus_modulus_sq().powf(1.0 / p), 0.0);
    for n in 0..=degree {
        coeffs.push(c);
        c = c * abar * ((beta + n as f64) / (n as f64 + 1.0));
    }
    let f = AnalyticFn { coeffs, closed_form: Some(ClosedForm::TestFn { a, p }), exact: a.defect == 1.0 };
    let r = f.validity_radius();
    let tail = f.tail_bound(r);
    if tail > SERIES_TAIL_TOL {
        return Err(HvlError::TruncationTooShort { degree, tail, tol: SERIES_TAIL_TOL });
    }
    Ok(f)
}

/// `f_a` through its closed form only; usable for points arbitrarily close
/// to the circle.
pub fn test_function(a: DiscPoint, p: f64) -> Result<AnalyticFn> {
    validate_exponent(p)?;
    if a.defect <= 0.0 {
        return Err(HvlError::OutsideDisc(a.modulus()));
    }
    Ok(AnalyticFn::closed(ClosedForm::TestFn { a, p }))
}

/// The disc automorphism `sigma_a(z) = (a - z)/(1 - conj(a) z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MobiusMap {
    a: Complex64,
}

impl MobiusMap {
    pub fn center(&self) -> Complex64 {
        self.a
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        (self.a - z) / (Complex64::new(1.0, 0.0) - self.a.conj() * z)
    }
}

pub fn make_mobius(a: Complex64) -> Result<MobiusMap> {
    if !(a.norm() < 1.0) {
        return Err(HvlError::OutsideDisc(a.norm()));
    }
    Ok(MobiusMap { a })
}

/// Symbols `g` known to the laboratory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SymbolSpec {
    /// `log(1/(1 - z))`
    Log1,
    Monomial { k: usize },
    Polynomial { coeffs: Vec<Complex64> },
    /// `log(1 - conj(u) z)`
    CarlesonLog { u: Complex64 },
    /// A truncated series with unknown tail.
    Custom { coeffs: Vec<Complex64> },
}

impl SymbolSpec {
    pub fn label(&self) -> String {
        match self {
            SymbolSpec::Log1 => "log1".into(),
            SymbolSpec::Monomial { k } => format!("monomial{k}"),
            SymbolSpec::Polynomial { coeffs } => format!("polynomial{}", coeffs.len().saturating_sub(1)),
            SymbolSpec::CarlesonLog { u } => format!("carleson({},{})", u.re, u.im),
            SymbolSpec::Custom { coeffs } => format!("custom{}", coeffs.len().saturating_sub(1)),
        }
    }
}

pub fn make_symbol(spec: &SymbolSpec, degree: usize) -> Result<AnalyticFn> {
    let zero = Complex64::new(0.0, 0.0);
    match spec {
        SymbolSpec::Log1 => {
            let coeffs = (0..=degree)
                .map(|n| if n == 0 { zero } else { Complex64::new(1.0 / n as f64, 0.0) })
                .collect();
            Ok(AnalyticFn::from_parts(coeffs, Some(ClosedForm::Log1), false))
        }
        SymbolSpec::Monomial { k } => {
            let mut coeffs = vec![zero; degree.max(*k) + 1];
            coeffs[*k] = Complex64::new(1.0, 0.0);
            AnalyticFn::polynomial(coeffs)
        }
        SymbolSpec::Polynomial { coeffs } => AnalyticFn::polynomial(coeffs.clone()),
        SymbolSpec::Custom { coeffs } => AnalyticFn::from_coeffs(coeffs.clone()),
        SymbolSpec::CarlesonLog { u } => carleson_log(DiscPoint::from_complex_interior(*u)?, degree),
    }
}

/// `log(1 - conj(u) z)` for a polar point `u`, with `N + 1` coefficients
/// `c_n = -conj(u)^n / n`.
pub fn carleson_log(u: DiscPoint, degree: usize) -> Result<AnalyticFn> {
    if u.defect <= 0.0 {
        return Err(HvlError::OutsideDisc(u.modulus()));
    }
    let ubar = u.to_complex().conj();
    let mut coeffs = Vec::with_capacity(degree + 1);
    coeffs.push(Complex64::new(0.0, 0.0));
    let mut power = Complex64::new(1.0, 0.0);
    for n in 1..=degree {
        power *= ubar;
        coeffs.push(-power / n as f64);
    }
    Ok(AnalyticFn::from_parts(coeffs, Some(ClosedForm::CarlesonLog { u }), false))
}

/// `g(sigma_a(e^{i theta})) - g(a)`; the closed form is used whenever present,
/// otherwise `g` must be an exact polynomial because `sigma_a` maps the circle
/// onto itself.
pub fn compose_with_mobius(g: &AnalyticFn, a: Complex64, theta: f64) -> Result<Complex64> {
    let sigma = make_mobius(a)?;
    if g.closed_form().is_none() && !g.is_exact() {
        return Err(HvlError::SeriesOnBoundary);
    }
    let w = sigma.eval(Complex64::from_polar(1.0, theta));
    let on_circle = DiscPoint::boundary(w.arg());
    Ok(g.value_at(&on_circle)? - g.value_at(&DiscPoint::from_complex(a)?)?)
}

/// Points `a_k` with strictly increasing moduli heading to `omega = e^{i omega_arg}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSequence {
    pub omega_arg: f64,
    pub points: Vec<DiscPoint>,
    pub label: String,
}

impl CandidateSequence {
    /// Validates `|a_1| < |a_2| < ... < 1` and non-increasing angular
    /// distance to `omega` along the list.
    pub fn new(omega_arg: f64, points: Vec<DiscPoint>, label: impl Into<String>) -> Result<Self> {
        for (k, w) in points.windows(2).enumerate() {
            if !(w[1].defect < w[0].defect) {
                return Err(HvlError::InvalidParameter(format!(
                    "moduli must increase strictly (index {})",
                    k + 1
                )));
            }
            if circular_distance(w[1].arg, omega_arg) > circular_distance(w[0].arg, omega_arg) + 1e-15 {
                return Err(HvlError::InvalidParameter(format!(
                    "arguments must approach omega (index {})",
                    k + 1
                )));
            }
        }
        if let Some(k) = points.iter().position(|p| p.defect <= 0.0 || p.defect > 1.0) {
            return Err(HvlError::InvalidParameter(format!("point {k} is not in the open disc")));
        }
        Ok(CandidateSequence { omega_arg, points, label: label.into() })
    }

    /// `a_k = (1 - base^{-k}) omega`, `k = 1..=count`.
    pub fn geometric(omega_arg: f64, base: f64, count: usize) -> Result<Self> {
        if !(base > 1.0) {
            return Err(HvlError::InvalidParameter(format!("path base must exceed 1, got {base}")));
        }
        let points = (1..=count)
            .map(|k| DiscPoint { arg: omega_arg, defect: base.powi(-(k as i32)) })
            .collect();
        Self::new(omega_arg, points, format!("geometric(base={base},omega_arg={omega_arg},k=1..{count})"))
    }

    /// The default dyadic path `a_k = (1 - 2^{-k}) omega`.
    pub fn dyadic(omega_arg: f64, count: usize) -> Result<Self> {
        Self::geometric(omega_arg, 2.0, count)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn prefix(&self, count: usize) -> CandidateSequence {
        CandidateSequence {
            omega_arg: self.omega_arg,
            points: self.points[..count.min(self.points.len())].to_vec(),
            label: format!("{}[..{}]", self.label, count.min(self.points.len())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn test_function_at_origin_is_one() {
        let f = make_test_function(DiscPoint::ORIGIN, 2.0, 8).unwrap();
        assert_eq!(f.coeffs()[0], c(1.0));
        assert!(f.coeffs()[1..].iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn test_function_p2_is_geometric() {
        let a = DiscPoint::from_complex(c(0.5)).unwrap();
        let f = make_test_function(a, 2.0, 32).unwrap();
        for (n, z) in f.coeffs().iter().enumerate() {
            let want = 0.75f64.sqrt() * 0.5f64.powi(n as i32);
            assert!((z - c(want)).norm() < 1e-15 * want.max(1e-300), "n={n}");
        }
    }

    #[test]
    fn test_function_leading_coefficient_for_p1() {
        let a = DiscPoint::from_complex(c(0.9)).unwrap();
        let f = make_test_function(a, 1.0, 2048).unwrap();
        assert!((f.coeffs()[0].re - 0.19).abs() < 1e-15);
    }

    #[test]
    fn test_function_rejects_short_truncation_and_boundary() {
        let a = DiscPoint::from_complex(c(0.999)).unwrap();
        assert!(matches!(make_test_function(a, 2.0, 64), Err(HvlError::TruncationTooShort { .. })));
        assert!(make_test_function(DiscPoint::boundary(0.0), 2.0, 64).is_err());
        assert!(make_test_function(a, 0.5, 64).is_err());
    }

    #[test]
    fn mobius_examples() {
        let s0 = make_mobius(c(0.0)).unwrap();
        let z = Complex64::new(0.3, -0.2);
        assert!((s0.eval(z) + z).norm() < 1e-16);
        let s = make_mobius(c(0.5)).unwrap();
        assert!(s.eval(c(0.5)).norm() < 1e-16);
        let s = make_mobius(Complex64::new(0.0, 0.3)).unwrap();
        assert!((s.eval(Complex64::from_polar(1.0, PI / 3.0)).norm() - 1.0).abs() < 1e-15);
        assert!(make_mobius(c(1.0)).is_err());
    }

    #[test]
    fn symbol_coefficients() {
        let f = make_symbol(&SymbolSpec::Log1, 4).unwrap();
        let want = [0.0, 1.0, 0.5, 1.0 / 3.0, 0.25];
        for (z, w) in f.coeffs().iter().zip(want) {
            assert!((z - c(w)).norm() < 1e-16);
        }
        let m = make_symbol(&SymbolSpec::Monomial { k: 2 }, 4).unwrap();
        assert_eq!(m.coeffs(), &[c(0.0), c(0.0), c(1.0), c(0.0), c(0.0)]);
        let cl = make_symbol(&SymbolSpec::CarlesonLog { u: c(0.75) }, 3).unwrap();
        let want = [0.0, -0.75, -0.28125, -0.140625];
        for (z, w) in cl.coeffs().iter().zip(want) {
            assert!((z - c(w)).norm() < 1e-16);
        }
        assert!(make_symbol(&SymbolSpec::CarlesonLog { u: c(1.0) }, 3).is_err());
    }

    #[test]
    fn evaluate_examples() {
        let m3 = make_symbol(&SymbolSpec::Monomial { k: 3 }, 3).unwrap();
        let v = m3.evaluate(Complex64::new(0.0, 0.5), Backend::Series).unwrap();
        assert!((v - Complex64::new(0.0, -0.125)).norm() < 1e-16);

        let log1 = make_symbol(&SymbolSpec::Log1, 16).unwrap();
        assert_eq!(log1.evaluate(c(0.0), Backend::Closed).unwrap(), c(0.0));

        let fa = make_test_function(DiscPoint::from_complex(c(0.5)).unwrap(), 2.0, 64).unwrap();
        let want = 0.75f64.sqrt() / 0.9;
        for backend in [Backend::Series, Backend::Closed] {
            assert!((fa.evaluate(c(0.2), backend).unwrap() - c(want)).norm() < 1e-12);
        }
        assert_eq!(m3.evaluate(c(0.1), Backend::Closed), Err(HvlError::NoClosedForm));
        assert!(matches!(
            log1.evaluate(c(0.99), Backend::Series),
            Err(HvlError::OutsideValidityRadius { .. })
        ));
    }

    #[test]
    fn derivative_examples() {
        let m3 = make_symbol(&SymbolSpec::Monomial { k: 3 }, 3).unwrap();
        assert_eq!(m3.derivative().coeffs(), &[c(0.0), c(0.0), c(3.0)]);
        let d = make_symbol(&SymbolSpec::Log1, 6).unwrap().derivative();
        assert!(d.coeffs().iter().all(|z| (z - c(1.0)).norm() < 1e-15));
        assert_eq!(d.closed_form(), Some(&ClosedForm::Log1Deriv));
        assert_eq!(AnalyticFn::constant(c(1.0)).derivative().coeffs(), &[c(0.0)]);
    }

    #[test]
    fn compose_examples() {
        let z1 = make_symbol(&SymbolSpec::Monomial { k: 1 }, 1).unwrap();
        let v = compose_with_mobius(&z1, c(0.6), 0.0).unwrap();
        assert!((v - c(-1.6)).norm() < 1e-12);
        let one = AnalyticFn::constant(c(1.0));
        assert_eq!(compose_with_mobius(&one, c(0.3), 1.0).unwrap(), c(0.0));
        let series = AnalyticFn::from_coeffs(vec![c(0.0), c(1.0)]).unwrap();
        assert_eq!(compose_with_mobius(&series, c(0.3), 1.0), Err(HvlError::SeriesOnBoundary));
    }

    #[test]
    fn log1_is_singular_at_one() {
        let log1 = AnalyticFn::closed(ClosedForm::Log1);
        assert!(matches!(log1.value_at(&DiscPoint::boundary(0.0)), Err(HvlError::SingularPoint(_))));
        let v = log1.value_at(&DiscPoint::boundary(PI)).unwrap();
        assert!((v - c(-(2.0f64).ln())).norm() < 1e-15);
    }

    #[test]
    fn candidate_sequence_validation() {
        let path = CandidateSequence::dyadic(0.0, 10).unwrap();
        assert_eq!(path.points[2].defect, 0.125);
        let bad = vec![DiscPoint { arg: 0.0, defect: 0.1 }, DiscPoint { arg: 0.0, defect: 0.2 }];
        assert!(CandidateSequence::new(0.0, bad, "bad").is_err());
    }
}
