//! Drivers that turn the limit statements about `f_a` and `T_g f_a` into
//! finite decay sequences, plus the seminorm statistics of the sequence
//! `h_n = log(1 - conj(u_{n+1}) z) - log(1 - conj(u_n) z)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::disc_fn::{test_function, AnalyticFn, CandidateSequence, ClosedForm};
use crate::error::{HvlError, Result};
use crate::norms::{arc_integral, bmoa_seminorm, complement_integral, standard_grid, Arc, NormEstimate};
use crate::point::{circular_distance, DiscPoint};
use crate::volterra::VolterraImage;

/// Default "≈ 0" threshold for the mass lemmas.
pub const MASS_THRESHOLD: f64 = 1e-3;
/// Default threshold for the localization remainder.
pub const LOCALIZATION_THRESHOLD: f64 = 5e-2;
/// Default threshold for both parts of the fixed-arc localization.
pub const LOCALIZATION2_THRESHOLD: f64 = 1e-2;
/// Default bound on `max ||h_n||_* / min ||h_n||_*`.
pub const LEIBOV_STAR_RATIO: f64 = 10.0;

const MIN_PATH: usize = 4;
const DECREASE_SLACK: f64 = 1e-14;

/// A finite sequence that should tend to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecaySequenceReport {
    /// The index variable: `k` along a path or `eps` along a schedule.
    pub labels: Vec<f64>,
    pub values: Vec<f64>,
    pub error_bounds: Vec<f64>,
    /// Non-increasing (up to the quadrature error) from some index in the
    /// first half of the sequence onward.
    pub eventually_decreasing: bool,
    pub final_value: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl DecaySequenceReport {
    pub fn new(labels: Vec<f64>, estimates: &[NormEstimate], threshold: f64) -> Result<Self> {
        if labels.len() != estimates.len() || labels.is_empty() {
            return Err(HvlError::InvalidParameter("decay report needs equally many labels and values".into()));
        }
        let values: Vec<f64> = estimates.iter().map(|e| e.value).collect();
        let error_bounds: Vec<f64> = estimates.iter().map(|e| e.error_bound).collect();
        let eventually_decreasing = decreasing_from(&values, &error_bounds) <= values.len() / 2;
        let final_value = *values.last().unwrap();
        Ok(DecaySequenceReport {
            labels,
            passed: eventually_decreasing && final_value < threshold,
            values,
            error_bounds,
            eventually_decreasing,
            final_value,
            threshold,
        })
    }
}

/// Smallest index from which the sequence never increases by more than the
/// combined error bounds of neighbours.
fn decreasing_from(values: &[f64], errors: &[f64]) -> usize {
    let mut start = values.len().saturating_sub(1);
    while start > 0 {
        let j = start - 1;
        if values[j + 1] > values[j] + errors[j] + errors[j + 1] + DECREASE_SLACK {
            break;
        }
        start = j;
    }
    start
}

fn check_path(path: &CandidateSequence) -> Result<()> {
    if path.len() < MIN_PATH {
        return Err(HvlError::InvalidParameter(format!(
            "path needs at least {MIN_PATH} points, got {}",
            path.len()
        )));
    }
    Ok(())
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps <= PI) {
        return Err(HvlError::InvalidParameter(format!("eps must lie in (0, pi], got {eps}")));
    }
    Ok(())
}

fn check_schedule(schedule: &[f64]) -> Result<()> {
    let ok = !schedule.is_empty()
        && schedule.iter().all(|e| *e > 0.0 && *e <= PI)
        && schedule.windows(2).all(|w| w[1] < w[0]);
    if !ok {
        return Err(HvlError::InvalidParameter("eps schedule must decrease strictly inside (0, pi]".into()));
    }
    Ok(())
}

fn path_labels(path: &CandidateSequence) -> Vec<f64> {
    (1..=path.len()).map(|k| k as f64).collect()
}

/// `eps_j = 2^{-j} pi`, `j = 1..=count`.
pub fn dyadic_eps_schedule(count: usize) -> Vec<f64> {
    (1..=count).map(|j| PI * 2f64.powi(-(j as i32))).collect()
}

/// `int_{T \ A_eps} |f_{a_k}|^p dm` along the path.
pub fn verify_masslemma_i(p: f64, path: &CandidateSequence, eps: f64, threshold: f64) -> Result<DecaySequenceReport> {
    check_path(path)?;
    check_eps(eps)?;
    let arc = Arc::new(path.omega_arg, eps)?;
    let values = path
        .points
        .par_iter()
        .map(|a| complement_integral(&test_function(*a, p)?, p, &arc))
        .collect::<Result<Vec<_>>>()?;
    DecaySequenceReport::new(path_labels(path), &values, threshold)
}

/// `int_{A_eps} |f_a|^p dm` for a fixed `a` as `eps` shrinks; the arcs are
/// centred at the argument of `a`.
pub fn verify_masslemma_ii(p: f64, a: DiscPoint, schedule: &[f64], threshold: f64) -> Result<DecaySequenceReport> {
    check_schedule(schedule)?;
    let f = test_function(a, p)?;
    let values = schedule
        .par_iter()
        .map(|&eps| arc_integral(&f, p, &Arc::new(a.arg, eps)?))
        .collect::<Result<Vec<_>>>()?;
    DecaySequenceReport::new(schedule.to_vec(), &values, threshold)
}

/// Half-width `(1 - |a|)^{1/(2(2+p))}` of the arc `I(a)`.
pub fn localization_half_width(a: &DiscPoint, p: f64) -> f64 {
    a.defect.powf(1.0 / (2.0 * (2.0 + p))).min(PI)
}

fn check_symbol(g: &AnalyticFn) -> Result<()> {
    if g.closed_form().is_none() && !g.is_exact() {
        return Err(HvlError::SeriesOnBoundary);
    }
    Ok(())
}

fn image(g: &AnalyticFn, a: &DiscPoint, p: f64) -> Result<VolterraImage> {
    Ok(VolterraImage::new(g, &test_function(*a, p)?))
}

/// `int_{T \ I(a_k)} |T_g f_{a_k}|^p dm` along the path, with `I(a)` centred
/// at the argument of `a`.
pub fn verify_localization(g: &AnalyticFn, p: f64, path: &CandidateSequence, threshold: f64) -> Result<DecaySequenceReport> {
    check_path(path)?;
    check_symbol(g)?;
    let values = path
        .points
        .par_iter()
        .map(|a| {
            if g.is_constant() {
                return Ok(NormEstimate::exact(0.0));
            }
            let arc = Arc::new(a.arg, localization_half_width(a, p))?;
            complement_integral(&image(g, a, p)?, p, &arc)
        })
        .collect::<Result<Vec<_>>>()?;
    DecaySequenceReport::new(path_labels(path), &values, threshold)
}

/// Part (i): `int_{T \ A_eps} |T_g f_{a_k}|^p dm` along the path.
/// Part (ii): `int_{A_eps} |T_g f_{a_index}|^p dm` along `schedule`.
pub fn verify_localization2(
    g: &AnalyticFn,
    p: f64,
    path: &CandidateSequence,
    eps: f64,
    index: usize,
    schedule: &[f64],
    threshold: f64,
) -> Result<(DecaySequenceReport, DecaySequenceReport)> {
    check_path(path)?;
    check_eps(eps)?;
    check_schedule(schedule)?;
    check_symbol(g)?;
    let a = *path.points.get(index).ok_or_else(|| {
        HvlError::InvalidParameter(format!("index {index} outside a path of {} points", path.len()))
    })?;
    let arc = Arc::new(path.omega_arg, eps)?;
    let constant = g.is_constant();
    let first = path
        .points
        .par_iter()
        .map(|b| {
            if constant {
                return Ok(NormEstimate::exact(0.0));
            }
            complement_integral(&image(g, b, p)?, p, &arc)
        })
        .collect::<Result<Vec<_>>>()?;
    let fixed = image(g, &a, p)?;
    let second = schedule
        .par_iter()
        .map(|&e| {
            if constant {
                return Ok(NormEstimate::exact(0.0));
            }
            arc_integral(&fixed, p, &Arc::new(path.omega_arg, e)?)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((
        DecaySequenceReport::new(path_labels(path), &first, threshold)?,
        DecaySequenceReport::new(schedule.to_vec(), &second, threshold)?,
    ))
}

/// First index `k` such that every later `I(a_j)` satisfies the two
/// sufficient conditions for `I(a_j) ⊂ A_eps`: half-width below `eps/2` and
/// argument within `eps/2` of `omega`.
pub fn containment_index(p: f64, path: &CandidateSequence, eps: f64) -> Option<usize> {
    let good = |a: &DiscPoint| {
        localization_half_width(a, p) < eps / 2.0 && circular_distance(a.arg, path.omega_arg) < eps / 2.0
    };
    let mut k = path.len();
    while k > 0 && good(&path.points[k - 1]) {
        k -= 1;
    }
    (k < path.len()).then_some(k)
}

/// Seminorm statistics of `h_n = f_{n+1} - f_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeibovStats {
    /// `|I_n|` for each computed `h_n`.
    pub arcs: Vec<f64>,
    /// `||h_n||_*` on the grid.
    pub stars: Vec<f64>,
    /// `||h_n||_2`.
    pub l2s: Vec<f64>,
}

impl LeibovStats {
    pub fn star_ratio(&self) -> f64 {
        let max = self.stars.iter().copied().fold(0.0, f64::max);
        let min = self.stars.iter().copied().fold(f64::INFINITY, f64::min);
        max / min
    }

    pub fn l2_strictly_decreasing(&self) -> bool {
        self.l2s.windows(2).all(|w| w[1] < w[0])
    }
}

/// `|I_1| = first`, `|I_{n+1}| = |I_n|^2`.
pub fn squared_shrinkage_schedule(first: f64, count: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(count);
    let mut x = first;
    for _ in 0..count {
        out.push(x);
        x *= x;
    }
    out
}

/// `Li_2(x)` for `0 <= x <= 1/2` by its power series.
fn dilog_small(x: f64) -> f64 {
    let mut sum = 0.0f64;
    let mut power = x;
    let mut k = 1.0;
    while power > 1e-18 * sum.max(f64::MIN_POSITIVE) {
        sum += power / (k * k);
        power *= x;
        k += 1.0;
    }
    sum
}

/// `log(1 - s) log(s) + Li_2(s)`, so that `Li_2(1 - s) = pi^2/6 - A(s)`.
fn reflected(s: f64) -> f64 {
    (-s).ln_1p() * s.ln() + dilog_small(s)
}

/// `||log(1 - r_1 z) - log(1 - r_2 z)||_2` for `r_i = 1 - d_i`, i.e. the
/// square root of `sum_k (r_1^k - r_2^k)^2 / k^2`, summed in closed form
/// with the dilogarithm so that it stays exact as `d_i -> 0`.
pub fn leibov_l2(d1: f64, d2: f64) -> Result<f64> {
    let ok = |d: f64| d > 0.0 && d <= 0.25;
    if !ok(d1) || !ok(d2) {
        return Err(HvlError::InvalidParameter(format!("defects must lie in (0, 1/4], got {d1}, {d2}")));
    }
    if d1 == d2 {
        return Ok(0.0);
    }
    let s11 = d1 * (2.0 - d1);
    let s22 = d2 * (2.0 - d2);
    let s12 = d1 + d2 - d1 * d2;
    let sq = -(reflected(s11) - 2.0 * reflected(s12) + reflected(s22));
    Ok(sq.max(0.0).sqrt())
}

/// `h = log(1 - conj(u2) z) - log(1 - conj(u1) z)` with `degree + 1`
/// coefficients and the closed form attached.
pub fn leibov_difference(u1: DiscPoint, u2: DiscPoint, degree: usize) -> AnalyticFn {
    let (b1, b2) = (u1.to_complex().conj(), u2.to_complex().conj());
    let mut coeffs = vec![Complex64::new(0.0, 0.0)];
    let (mut p1, mut p2) = (Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0));
    for n in 1..=degree {
        p1 *= b1;
        p2 *= b2;
        coeffs.push((p1 - p2) / n as f64);
    }
    let one = Complex64::new(1.0, 0.0);
    let form = ClosedForm::Sum {
        constant: Complex64::new(0.0, 0.0),
        terms: vec![(one, ClosedForm::CarlesonLog { u: u2 }), (-one, ClosedForm::CarlesonLog { u: u1 })],
    };
    AnalyticFn::from_parts(coeffs, Some(form), false)
}

/// Degree of the coefficient vector stored with each `h_n`.
const LEIBOV_DEGREE: usize = 64;

/// Statistics of `h_n` for base points `u_n = 1 - |I_n|` (arcs centred at 1).
/// `grid` overrides the default per-`n` [`leibov_grid`], which resolves radii
/// down to `|I_{n+1}| / 256`.
pub fn leibov_sequence_stats(arc_lengths: &[f64], grid: Option<&[DiscPoint]>) -> Result<LeibovStats> {
    if arc_lengths.len() < 2 {
        return Err(HvlError::InvalidParameter("need at least two arcs".into()));
    }
    if !arc_lengths.windows(2).all(|w| w[1] < w[0]) || !arc_lengths.iter().all(|d| *d > 0.0 && *d <= 0.25) {
        return Err(HvlError::InvalidParameter("arc lengths must decrease strictly inside (0, 1/4]".into()));
    }
    let rows = arc_lengths
        .par_windows(2)
        .map(|w| {
            let (u1, u2) = (DiscPoint::interior(0.0, w[0])?, DiscPoint::interior(0.0, w[1])?);
            let h = leibov_difference(u1, u2, LEIBOV_DEGREE);
            let star = match grid {
                Some(g) => bmoa_seminorm(&h, g, 2.0)?,
                None => bmoa_seminorm(&h, &leibov_grid(leibov_grid_levels(w[1])), 2.0)?,
            };
            Ok((star.value, leibov_l2(w[0], w[1])?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LeibovStats {
        arcs: arc_lengths[..arc_lengths.len() - 1].to_vec(),
        stars: rows.iter().map(|r| r.0).collect(),
        l2s: rows.iter().map(|r| r.1).collect(),
    })
}

/// Dyadic levels reaching eight octaves past the smallest arc.
pub fn leibov_grid_levels(smallest: f64) -> usize {
    (-smallest.log2()).ceil() as usize + 8
}

/// Levels of the full eight-ray grid; deeper radii stay on the ray through
/// 1, the only direction where `h_n` has features.
pub const LEIBOV_SHALLOW_LEVELS: usize = 32;

/// The standard grid down to `1 - 2^{-32}`, continued by the points
/// `1 - 2^{-j}` on the positive axis up to `j = levels`.
pub fn leibov_grid(levels: usize) -> Vec<DiscPoint> {
    let mut grid = standard_grid(levels.min(LEIBOV_SHALLOW_LEVELS));
    grid.extend((LEIBOV_SHALLOW_LEVELS + 1..=levels).map(|j| DiscPoint { arg: 0.0, defect: 2f64.powi(-(j as i32)) }));
    grid
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decay_report_examples() {
        let est = |v: &[f64]| v.iter().map(|x| NormEstimate::exact(*x)).collect::<Vec<_>>();
        let r = DecaySequenceReport::new(vec![1.0, 2.0, 3.0, 4.0], &est(&[0.1, 0.5, 0.2, 0.01]), 0.05).unwrap();
        assert!(r.eventually_decreasing && r.passed);
        let r = DecaySequenceReport::new(vec![1.0, 2.0, 3.0, 4.0], &est(&[0.5, 0.2, 0.01, 0.02]), 0.05).unwrap();
        assert!(!r.eventually_decreasing && !r.passed);
        let r = DecaySequenceReport::new(vec![1.0], &est(&[0.5]), 0.05).unwrap();
        assert!(r.eventually_decreasing && !r.passed);
    }

    #[test]
    fn origin_and_full_arc() {
        let path = CandidateSequence::new(
            0.0,
            vec![
                DiscPoint::ORIGIN,
                DiscPoint::interior(0.0, 0.5).unwrap(),
                DiscPoint::interior(0.0, 0.25).unwrap(),
                DiscPoint::interior(0.0, 0.125).unwrap(),
            ],
            "t",
        )
        .unwrap();
        let r = verify_masslemma_i(2.0, &path, 1.0, MASS_THRESHOLD).unwrap();
        assert!((r.values[0] - (1.0 - 1.0 / PI)).abs() < 1e-12);
        let r = verify_masslemma_i(2.0, &path, PI, MASS_THRESHOLD).unwrap();
        assert!(r.values.iter().all(|v| *v == 0.0));
        let r = verify_masslemma_ii(1.0, DiscPoint::ORIGIN, &[1.0, 0.5], MASS_THRESHOLD).unwrap();
        assert!((r.values[0] - 1.0 / PI).abs() < 1e-12 && (r.values[1] - 0.5 / PI).abs() < 1e-12);
    }

    #[test]
    fn leibov_l2_matches_coefficient_sum() {
        for (d1, d2) in [(0.25, 0.0625), (0.1, 0.05), (0.2, 0.19)] {
            let (r1, r2) = (1.0f64 - d1, 1.0f64 - d2);
            let direct: f64 =
                (1..20000).map(|k| (r1.powi(k) - r2.powi(k)).powi(2) / (k as f64 * k as f64)).sum();
            assert!((leibov_l2(d1, d2).unwrap() - direct.sqrt()).abs() < 1e-12, "{d1} {d2}");
        }
        assert_eq!(leibov_l2(0.1, 0.1).unwrap(), 0.0);
    }

    #[test]
    fn containment_examples() {
        let path = CandidateSequence::geometric(0.0, 4.0, 8).unwrap();
        // 2^{-k/4} < 1/2 once k > 4, i.e. from the fifth point
        assert_eq!(containment_index(2.0, &path, 1.0), Some(4));
        assert_eq!(containment_index(2.0, &path, 1e-3), None);
    }
}
