//! Composite Gauss–Legendre rules on panels graded geometrically toward
//! boundary features, and the uniform periodic trapezoid rule.

use std::f64::consts::{PI, TAU};
use std::sync::OnceLock;

use rayon::prelude::*;

use crate::error::{HvlError, Result};
use crate::point::{wrap_angle, HotPoint};

pub const GAUSS_ORDER: usize = 16;

/// Grading below a singular feature continues this many halvings past the
/// smallest scale present.
pub const SINGULAR_DEPTH: i32 = 48;

/// Uniform panels laid over any arc before grading.
pub const BASE_PANELS: usize = 16;

/// A peak must span this many units of `EPSILON * |angle|`.
const RESOLVABLE_ULPS: f64 = 1024.0;

pub(crate) struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Nodes and weights on `[-1, 1]` by Newton iteration on `P_n`.
pub(crate) fn gauss_legendre(n: usize) -> GaussLegendre {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    GaussLegendre { nodes, weights }
}

pub(crate) fn gl16() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(GAUSS_ORDER))
}

/// Nodes and weights of a composite rule.
#[derive(Debug, Clone)]
pub struct PanelRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl PanelRule {
    /// Gauss–Legendre on every panel between consecutive breakpoints, each
    /// panel first bisected `refine` times.
    pub fn from_breakpoints(breaks: &[f64], refine: u32) -> PanelRule {
        let gl = gl16();
        let split = 1usize << refine;
        let mut nodes = Vec::with_capacity(breaks.len() * split * GAUSS_ORDER);
        let mut weights = Vec::with_capacity(nodes.capacity());
        for w in breaks.windows(2) {
            let width = (w[1] - w[0]) / split as f64;
            for s in 0..split {
                let lo = w[0] + width * s as f64;
                let half = 0.5 * width;
                let mid = lo + half;
                for (x, wt) in gl.nodes.iter().zip(&gl.weights) {
                    nodes.push(mid + half * x);
                    weights.push(half * wt);
                }
            }
        }
        PanelRule { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `f` at every node, evaluated in parallel, in node order.
    pub fn sample<T, F>(&self, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(f64) -> Result<T> + Sync,
    {
        self.nodes.par_iter().map(|&x| f(x)).collect()
    }

    /// `sum w_i f(x_i)`; evaluations may run in parallel, the reduction is
    /// sequential so results do not depend on scheduling.
    pub fn integrate<F>(&self, f: F) -> Result<f64>
    where
        F: Fn(f64) -> Result<f64> + Sync,
    {
        let values: Vec<f64> = self.nodes.par_iter().map(|&x| f(x)).collect::<Result<_>>()?;
        Ok(values.iter().zip(&self.weights).map(|(v, w)| v * w).sum())
    }
}

/// Breakpoints on `[lo, hi]` graded toward every feature (and its images
/// shifted by `2 pi`): `c +- pi 2^{-j}` down to `scale / 8` for peaks and
/// `2^{-48}` times the smallest scale present for singular points. The
/// feature location itself is a breakpoint, so Gauss nodes never land on it.
pub fn graded_breakpoints(lo: f64, hi: f64, hot: &[HotPoint]) -> Vec<f64> {
    let width = hi - lo;
    let mut pts: Vec<f64> = (1..BASE_PANELS).map(|k| lo + width * k as f64 / BASE_PANELS as f64).collect();
    pts.push(lo);
    pts.push(hi);
    let floor = hot
        .iter()
        .map(|h| h.scale)
        .filter(|s| *s > 0.0)
        .fold(width.min(1.0), f64::min);
    for h in hot {
        let depth = if h.singular {
            floor * 2f64.powi(-SINGULAR_DEPTH)
        } else if h.scale < 0.5 {
            h.scale / 8.0
        } else {
            continue;
        };
        let base = lo + (h.angle - lo).rem_euclid(TAU);
        for c in [base - TAU, base] {
            if c < lo - PI || c > hi + PI {
                continue;
            }
            pts.push(c);
            let mut d = PI;
            while d >= depth {
                pts.push(c - d);
                pts.push(c + d);
                d *= 0.5;
            }
        }
    }
    pts.retain(|x| *x >= lo && *x <= hi);
    pts.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
    pts.dedup();
    pts
}

/// Rejects peaks too narrow for the spacing of doubles at their angle. Only
/// features at angle 0 can be arbitrarily thin.
pub fn check_resolvable(hot: &[HotPoint]) -> Result<()> {
    for h in hot {
        if !h.singular && h.scale < RESOLVABLE_ULPS * f64::EPSILON * wrap_angle(h.angle).abs() {
            return Err(HvlError::InvalidParameter(format!(
                "boundary feature of width {:e} at angle {} is below the angular resolution there; \
                 rotate it to angle 0",
                h.scale, h.angle
            )));
        }
    }
    Ok(())
}

/// Uniform trapezoid nodes `2 pi (k + 1/2)/M` on the circle.
pub fn trapezoid_nodes(samples: usize) -> impl Iterator<Item = f64> {
    let h = TAU / samples as f64;
    (0..samples).map(move |k| h * (k as f64 + 0.5))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let rule = PanelRule::from_breakpoints(&[0.0, 1.0], 0);
        let v = rule.integrate(|x| Ok(x.powi(31))).unwrap();
        assert!((v - 1.0 / 32.0).abs() < 1e-15);
        let w: f64 = gl16().weights.iter().sum();
        assert!((w - 2.0).abs() < 1e-14);
    }

    #[test]
    fn graded_rule_handles_log_singularity() {
        let hot = [HotPoint::singular(0.0)];
        let bps = graded_breakpoints(-PI, PI, &hot);
        assert!(bps.contains(&0.0));
        let rule = PanelRule::from_breakpoints(&bps, 0);
        // int_{-pi}^{pi} log|t| dt = 2 (pi log pi - pi)
        let v = rule.integrate(|t| Ok(t.abs().ln())).unwrap();
        let want = 2.0 * (PI * PI.ln() - PI);
        assert!((v - want).abs() < 1e-12, "{v} vs {want}");
    }

    #[test]
    fn graded_rule_resolves_narrow_peak() {
        // Angles are absolute, so a peak at c != 0 is resolved only down to
        // widths well above |c| * 1e-16; at c = 0 any width works.
        for (c, eta, tol) in [(0.0, 1e-60, 1e-12), (0.0, 1e-9, 1e-12), (0.3, 1e-6, 1e-9)] {
            let hot = [HotPoint::peak(c, eta)];
            let rule = PanelRule::from_breakpoints(&graded_breakpoints(-PI, PI, &hot), 0);
            let v = rule.integrate(|t| Ok((eta / (t - c)) / (t - c) / (1.0 + (eta / (t - c)).powi(2)))).unwrap();
            let want = ((PI - c) / eta).atan() + ((PI + c) / eta).atan();
            assert!((v - want).abs() < tol * want, "c={c} eta={eta}: {v} vs {want}");
        }
    }
}
