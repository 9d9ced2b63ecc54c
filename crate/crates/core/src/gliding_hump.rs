//! Inductive selection of pairs `(eps_n, b_n)` from a candidate path so
//! that the test functions `f_{b_n}` (flat kind) or their images
//! `T_g f_{b_n}` (volterra kind) concentrate on nested arcs `A_n` around the
//! limit direction, and the certification of the resulting `l^p` bounds on
//! finite sections.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::disc_fn::{make_symbol, test_function, AnalyticFn, CandidateSequence, ClosedForm, DiscFunction, SymbolSpec};
use crate::error::{HvlError, Result};
use crate::norms::{arc_integral_from, complement_integral_from, hardy_norm, lp_norm, Arc, NormEstimate};
use crate::point::{DiscPoint, HotPoint};
use crate::quadrature::{check_resolvable, graded_breakpoints, PanelRule};
use crate::volterra::{normlimit_profile, NormLimitProfile, VolterraImage};

/// Default cap on the number of halvings of `eps` at one level.
pub const HALVING_CAP: u32 = 120;

/// Path points used for the `c_hat` profile preceding a volterra selection.
pub const PROFILE_POINTS: usize = 16;

/// Degree used when a symbol has to be rebuilt from its spec.
pub const SYMBOL_DEGREE: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateKind {
    Flat,
    Volterra,
}

/// Quadrature resolution: `outer` is the first doubling level on the circle,
/// `radial` the panel splitting of the radial integrals defining `T_g f`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resolution {
    pub outer: u32,
    pub radial: u32,
}

impl Resolution {
    pub const BASE: Resolution = Resolution { outer: 0, radial: 0 };

    pub fn doubled(self) -> Resolution {
        Resolution { outer: self.outer + 1, radial: self.radial + 1 }
    }
}

impl Default for Resolution {
    fn default() -> Self {
        Self::BASE
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub cond_i: f64,
    pub cond_ii: f64,
    pub cond_iii_lower: f64,
    pub cond_iii_upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Margins {
    pub cond_i: Vec<f64>,
    pub cond_ii: f64,
    pub cond_iii: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBounds {
    pub cond_i: Vec<f64>,
    pub cond_ii: f64,
    pub cond_iii: f64,
}

/// One level of a selection. Condition values are `p`-th roots of masses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub n: usize,
    pub candidate_index: usize,
    pub b_n: DiscPoint,
    pub eps_n: f64,
    pub halvings: u32,
    pub cond_i_values: Vec<f64>,
    pub cond_ii_value: f64,
    pub cond_iii_value: f64,
    pub error_bounds: ErrorBounds,
    pub thresholds: Thresholds,
    pub margins: Margins,
}

impl LevelRecord {
    pub fn min_margin(&self) -> f64 {
        self.margins.cond_i.iter().copied().fold(self.margins.cond_ii.min(self.margins.cond_iii), f64::min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionCertificate {
    /// SHA-256 of the certificate serialized with an empty id.
    pub id: String,
    pub kind: CertificateKind,
    pub p: f64,
    pub symbol: Option<SymbolSpec>,
    pub c_hat: Option<f64>,
    pub c_hat_rel_change: Option<f64>,
    pub delta: Option<f64>,
    pub omega_arg: f64,
    pub path_provenance: String,
    pub resolution: Resolution,
    pub levels: Vec<LevelRecord>,
    /// All margins strictly positive.
    pub passed: bool,
    pub notes: Vec<String>,
}

impl SelectionCertificate {
    fn seal(mut self) -> Result<Self> {
        self.passed = !self.levels.is_empty() && self.levels.iter().all(|l| l.min_margin() > 0.0);
        self.id = self.content_id()?;
        Ok(self)
    }

    /// SHA-256 hex digest of the certificate with its id field emptied.
    pub fn content_id(&self) -> Result<String> {
        let mut blank = self.clone();
        blank.id.clear();
        let bytes = serde_json::to_vec(&blank).map_err(|e| HvlError::InvalidParameter(e.to_string()))?;
        Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
    }

    /// Checks the stored id against the content.
    pub fn verify_id(&self) -> Result<()> {
        let id = self.content_id()?;
        if id != self.id {
            return Err(HvlError::CertificateMismatch(format!("id {} does not match content {id}", self.id)));
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<DiscPoint> {
        self.levels.iter().map(|l| l.b_n).collect()
    }

    pub fn min_margin(&self) -> f64 {
        self.levels.iter().map(|l| l.min_margin()).fold(f64::INFINITY, f64::min)
    }

    /// `|2^{-2p} - 2 delta^p - 2^{-2p-1}|` for volterra certificates.
    pub fn threshold_algebra_residual(&self) -> Option<f64> {
        self.delta.map(|d| threshold_algebra_residual(self.p, d))
    }
}

/// `delta = 2^{-2 - 2/p}`, the solution of `2^{-2p} - 2 delta^p = 2^{-2p-1}`.
pub fn delta_for(p: f64) -> f64 {
    (2f64).powf(-2.0 - 2.0 / p)
}

pub fn threshold_algebra_residual(p: f64, delta: f64) -> f64 {
    ((2f64).powf(-2.0 * p) - 2.0 * delta.powf(p) - (2f64).powf(-2.0 * p - 1.0)).abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    CHatGate,
    CondI,
    CondII,
    CondIII,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Condition::CHatGate => "c_hat stability gate",
            Condition::CondI => "condition (i)",
            Condition::CondII => "condition (ii)",
            Condition::CondIII => "condition (iii)",
        };
        f.write_str(s)
    }
}

/// A selection that could not be completed. Level 0 is the `c_hat` gate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionFailure {
    pub kind: CertificateKind,
    pub level: usize,
    pub condition: Condition,
    pub detail: String,
    pub completed: Vec<LevelRecord>,
}

impl fmt::Display for SelectionFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "selection failed at level {} on {}: {}", self.level, self.condition, self.detail)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Selection {
    Certified(SelectionCertificate),
    Failed(SelectionFailure),
}

impl Selection {
    pub fn certificate(&self) -> Option<&SelectionCertificate> {
        match self {
            Selection::Certified(c) => Some(c),
            Selection::Failed(_) => None,
        }
    }

    pub fn failure(&self) -> Option<&SelectionFailure> {
        match self {
            Selection::Failed(f) => Some(f),
            Selection::Certified(_) => None,
        }
    }

    pub fn passed(&self) -> bool {
        self.certificate().is_some_and(|c| c.passed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionConfig {
    pub levels: usize,
    pub halving_cap: u32,
    pub profile_points: usize,
    pub resolution: Resolution,
}

impl SelectionConfig {
    pub fn new(levels: usize) -> Self {
        SelectionConfig { levels, halving_cap: HALVING_CAP, profile_points: PROFILE_POINTS, resolution: Resolution::BASE }
    }
}

/// The functions whose masses the conditions constrain.
#[derive(Clone, Copy)]
enum Family<'a> {
    Flat,
    Volterra(&'a AnalyticFn),
}

impl Family<'_> {
    fn image(&self, b: &DiscPoint, p: f64, radial: u32) -> Result<Box<dyn DiscFunction>> {
        let f = test_function(*b, p)?;
        Ok(match self {
            Family::Flat => Box::new(f),
            Family::Volterra(g) => Box::new(VolterraImage::with_refine(g, &f, radial)),
        })
    }
}

fn in_arc(f: &dyn DiscFunction, p: f64, omega: f64, eps: f64, res: Resolution) -> Result<NormEstimate> {
    Ok(arc_integral_from(f, p, &Arc::new(omega, eps)?, res.outer)?.root(p))
}

fn off_arc_mass(f: &dyn DiscFunction, p: f64, omega: f64, eps: f64, res: Resolution) -> Result<NormEstimate> {
    complement_integral_from(f, p, &Arc::new(omega, eps)?, res.outer)
}

/// Measured (ii) and (iii) for one candidate.
struct CandidateValues {
    ii: NormEstimate,
    iii: NormEstimate,
    iii_margin: f64,
}

impl CandidateValues {
    fn failing(&self, th: &Thresholds) -> Option<Condition> {
        if !(self.ii.value < th.cond_ii) {
            Some(Condition::CondII)
        } else if !(self.iii_margin > 0.0) {
            Some(Condition::CondIII)
        } else {
            None
        }
    }
}

struct Selector<'a> {
    family: Family<'a>,
    p: f64,
    omega: f64,
    res: Resolution,
    thresholds: Box<dyn Fn(usize) -> Thresholds + 'a>,
}

impl Selector<'_> {
    fn measure_candidate(&self, image: &dyn DiscFunction, eps: f64, th: &Thresholds) -> Result<CandidateValues> {
        let mass = off_arc_mass(image, self.p, self.omega, eps, self.res)?;
        let ii = mass.root(self.p);
        match self.family {
            Family::Flat => {
                // `||f_b||_p = 1`, so the arc mass is `1 - x` for the complement mass `x`.
                let x = mass.value.min(1.0);
                let log_root = (-x).ln_1p() / self.p;
                let value = log_root.exp();
                let err = mass.error_bound / self.p;
                Ok(CandidateValues {
                    ii,
                    iii: NormEstimate { value, resolution: mass.resolution, error_bound: err },
                    iii_margin: -log_root.exp_m1(),
                })
            }
            Family::Volterra(_) => {
                let iii = in_arc(image, self.p, self.omega, eps, self.res)?;
                let margin = (iii.value - th.cond_iii_lower).min(th.cond_iii_upper - iii.value);
                Ok(CandidateValues { ii, iii, iii_margin: margin })
            }
        }
    }

    /// Condition (i) at `eps`; stops at the first violation.
    fn cond_i(&self, chosen: &[Box<dyn DiscFunction>], eps: f64, bound: f64) -> Result<(bool, Vec<NormEstimate>)> {
        let mut values = vec![NormEstimate::exact(0.0); chosen.len()];
        // The latest function is the least concentrated at the scale of `eps`.
        for j in (0..chosen.len()).rev() {
            values[j] = in_arc(chosen[j].as_ref(), self.p, self.omega, eps, self.res)?;
            if !(values[j].value < bound) {
                return Ok((false, values));
            }
        }
        Ok((true, values))
    }

    fn run(&self, path: &CandidateSequence, levels: usize, cap: u32) -> Result<std::result::Result<Vec<LevelRecord>, SelectionFailure>> {
        let kind = match self.family {
            Family::Flat => CertificateKind::Flat,
            Family::Volterra(_) => CertificateKind::Volterra,
        };
        let mut records: Vec<LevelRecord> = Vec::new();
        let mut chosen: Vec<Box<dyn DiscFunction>> = Vec::new();
        let fail = |level, condition, detail: String, done: &[LevelRecord]| SelectionFailure {
            kind,
            level,
            condition,
            detail,
            completed: done.to_vec(),
        };
        for n in 1..=levels {
            let th = (self.thresholds)(n);
            let eps_prev = records.last().map_or(PI, |r| r.eps_n);

            // Condition (i): smallest halving count h that works, by
            // doubling h and then bisecting (masses shrink with the arc).
            let at = |h: u32| eps_prev * (2f64).powi(-(h as i32));
            let mut lo = 0;
            let mut h = 1;
            let mut best = loop {
                let (ok, vals) = self.cond_i(&chosen, at(h), th.cond_i)?;
                if ok {
                    break (h, vals);
                }
                if h >= cap {
                    let worst = vals.iter().map(|v| v.value).fold(0.0, f64::max);
                    return Ok(Err(fail(
                        n,
                        Condition::CondI,
                        format!("halving cap {cap} reached with value {worst:e} >= threshold {:e}", th.cond_i),
                        &records,
                    )));
                }
                lo = h;
                h = (2 * h).min(cap);
            };
            while best.0 - lo > 1 {
                let mid = lo + (best.0 - lo) / 2;
                let (ok, vals) = self.cond_i(&chosen, at(mid), th.cond_i)?;
                if ok {
                    best = (mid, vals);
                } else {
                    lo = mid;
                }
            }
            let (halvings, cond_i) = best;
            let eps = at(halvings);

            // Conditions (ii) and (iii): smallest admissible candidate
            // index, by galloping and then bisecting.
            let start = records.last().map_or(0, |r| r.candidate_index + 1);
            if start >= path.len() {
                return Ok(Err(fail(n, Condition::CondII, "candidate path exhausted".into(), &records)));
            }
            let probe = |k: usize| -> Result<(Box<dyn DiscFunction>, CandidateValues)> {
                let image = self.family.image(&path.points[k], self.p, self.res.radial)?;
                let vals = self.measure_candidate(image.as_ref(), eps, &th)?;
                Ok((image, vals))
            };
            let mut last_fail: Option<(usize, Condition, f64)> = None;
            let mut step = 1;
            let mut k = start;
            let mut found = loop {
                let (image, vals) = probe(k)?;
                match vals.failing(&th) {
                    None => break (k, image, vals),
                    Some(c) => {
                        let v = if c == Condition::CondII { vals.ii.value } else { vals.iii.value };
                        last_fail = Some((k, c, v));
                    }
                }
                if k + 1 >= path.len() {
                    let (_, c, v) = last_fail.expect("at least one candidate probed");
                    return Ok(Err(fail(
                        n,
                        c,
                        format!("no admissible candidate up to index {k}; last value {v:e}"),
                        &records,
                    )));
                }
                k = (k + step).min(path.len() - 1);
                step *= 2;
            };
            if let Some((mut bad, _, _)) = last_fail {
                while found.0 - bad > 1 {
                    let mid = bad + (found.0 - bad) / 2;
                    let (image, vals) = probe(mid)?;
                    if vals.failing(&th).is_none() {
                        found = (mid, image, vals);
                    } else {
                        bad = mid;
                    }
                }
            }
            let (index, image, vals) = found;
            records.push(LevelRecord {
                n,
                candidate_index: index,
                b_n: path.points[index],
                eps_n: eps,
                halvings,
                cond_i_values: cond_i.iter().map(|v| v.value).collect(),
                cond_ii_value: vals.ii.value,
                cond_iii_value: vals.iii.value,
                error_bounds: ErrorBounds {
                    cond_i: cond_i.iter().map(|v| v.error_bound).collect(),
                    cond_ii: vals.ii.error_bound,
                    cond_iii: vals.iii.error_bound,
                },
                margins: Margins {
                    cond_i: cond_i.iter().map(|v| th.cond_i - v.value).collect(),
                    cond_ii: th.cond_ii - vals.ii.value,
                    cond_iii: vals.iii_margin,
                },
                thresholds: th,
            });
            chosen.push(image);
        }
        Ok(Ok(records))
    }
}

fn validate_selection(p: f64, path: &CandidateSequence, levels: usize) -> Result<()> {
    if !(p.is_finite() && p >= 1.0) {
        return Err(HvlError::InvalidParameter(format!("p must be >= 1, got {p}")));
    }
    if levels == 0 {
        return Err(HvlError::InvalidParameter("at least one level is required".into()));
    }
    if path.len() < 4 * levels {
        return Err(HvlError::InvalidParameter(format!(
            "candidate path has {} points; need at least {} for {levels} levels",
            path.len(),
            4 * levels
        )));
    }
    Ok(())
}

fn flat_thresholds(n: usize) -> Thresholds {
    let t = (4f64).powi(-(n as i32));
    Thresholds { cond_i: t, cond_ii: t, cond_iii_lower: 0.0, cond_iii_upper: 1.0 }
}

/// Selection for the map `S alpha = sum alpha_n f_{b_n}`: thresholds `4^{-n}`.
pub fn select_flat(p: f64, candidates: &CandidateSequence, config: &SelectionConfig) -> Result<Selection> {
    validate_selection(p, candidates, config.levels)?;
    let selector = Selector {
        family: Family::Flat,
        p,
        omega: candidates.omega_arg,
        res: config.resolution,
        thresholds: Box::new(flat_thresholds),
    };
    Ok(match selector.run(candidates, config.levels, config.halving_cap)? {
        Err(f) => Selection::Failed(f),
        Ok(levels) => Selection::Certified(
            SelectionCertificate {
                id: String::new(),
                kind: CertificateKind::Flat,
                p,
                symbol: None,
                c_hat: None,
                c_hat_rel_change: None,
                delta: None,
                omega_arg: candidates.omega_arg,
                path_provenance: candidates.label.clone(),
                resolution: config.resolution,
                levels,
                passed: false,
                notes: Vec::new(),
            }
            .seal()?,
        ),
    })
}

const PATH_NOTE: &str = "c_hat is estimated along the candidate path only; path independence of the limsup is not certified";

/// Selection for `U alpha = sum alpha_n T_g f_{b_n}`, with `c_hat` from the
/// norm-limit profile over the first `config.profile_points` candidates.
pub fn select_volterra(g: &SymbolSpec, p: f64, candidates: &CandidateSequence, config: &SelectionConfig) -> Result<Selection> {
    validate_selection(p, candidates, config.levels)?;
    let symbol = make_symbol(g, SYMBOL_DEGREE)?;
    let profile = normlimit_profile(&symbol, p, &candidates.prefix(config.profile_points))?;
    select_volterra_with_profile(g, p, candidates, &profile, config)
}

/// [`select_volterra`] with a precomputed profile.
pub fn select_volterra_with_profile(
    g: &SymbolSpec,
    p: f64,
    candidates: &CandidateSequence,
    profile: &NormLimitProfile,
    config: &SelectionConfig,
) -> Result<Selection> {
    validate_selection(p, candidates, config.levels)?;
    let symbol = make_symbol(g, SYMBOL_DEGREE)?;
    if symbol.is_constant() {
        return Err(HvlError::InvalidParameter("constant symbols have T_g = 0".into()));
    }
    let c_hat = profile.c_hat;
    if !profile.stabilized || !(c_hat > 0.0) {
        return Ok(Selection::Failed(SelectionFailure {
            kind: CertificateKind::Volterra,
            level: 0,
            condition: Condition::CHatGate,
            detail: format!(
                "norm-limit estimate c_hat = {c_hat:e} moved by {:.3}% under the last path point",
                100.0 * profile.rel_change
            ),
            completed: Vec::new(),
        }));
    }
    let delta = delta_for(p);
    let thresholds = move |n: usize| {
        let t = (4f64).powi(-(n as i32)) * delta * c_hat;
        Thresholds { cond_i: t, cond_ii: t, cond_iii_lower: 0.5 * c_hat, cond_iii_upper: 2.0 * c_hat }
    };
    let selector = Selector {
        family: Family::Volterra(&symbol),
        p,
        omega: candidates.omega_arg,
        res: config.resolution,
        thresholds: Box::new(thresholds),
    };
    Ok(match selector.run(candidates, config.levels, config.halving_cap)? {
        Err(f) => Selection::Failed(f),
        Ok(levels) => Selection::Certified(
            SelectionCertificate {
                id: String::new(),
                kind: CertificateKind::Volterra,
                p,
                symbol: Some(g.clone()),
                c_hat: Some(c_hat),
                c_hat_rel_change: Some(profile.rel_change),
                delta: Some(delta),
                omega_arg: candidates.omega_arg,
                path_provenance: candidates.label.clone(),
                resolution: config.resolution,
                levels,
                passed: false,
                notes: vec![PATH_NOTE.into()],
            }
            .seal()?,
        ),
    })
}

/// The symbol of a volterra certificate at the degree used for selection.
pub fn certificate_symbol(cert: &SelectionCertificate) -> Result<AnalyticFn> {
    let spec = cert
        .symbol
        .as_ref()
        .ok_or_else(|| HvlError::CertificateMismatch("volterra certificate without a symbol".into()))?;
    make_symbol(spec, SYMBOL_DEGREE)
}

fn family_of<'a>(cert: &SelectionCertificate, g: &'a Option<AnalyticFn>) -> Family<'a> {
    match (cert.kind, g) {
        (CertificateKind::Volterra, Some(g)) => Family::Volterra(g),
        _ => Family::Flat,
    }
}

/// Measures the flat conditions at the points and arcs of another
/// certificate, so that the maps `V` and `U` share their `b_n`.
pub fn remeasure_flat(cert: &SelectionCertificate) -> Result<SelectionCertificate> {
    let selector = Selector {
        family: Family::Flat,
        p: cert.p,
        omega: cert.omega_arg,
        res: cert.resolution,
        thresholds: Box::new(flat_thresholds),
    };
    let mut chosen: Vec<Box<dyn DiscFunction>> = Vec::new();
    let mut levels = Vec::with_capacity(cert.levels.len());
    for rec in &cert.levels {
        let th = flat_thresholds(rec.n);
        let cond_i: Vec<NormEstimate> = chosen
            .iter()
            .map(|f| in_arc(f.as_ref(), cert.p, cert.omega_arg, rec.eps_n, cert.resolution))
            .collect::<Result<_>>()?;
        let image = Family::Flat.image(&rec.b_n, cert.p, 0)?;
        let vals = selector.measure_candidate(image.as_ref(), rec.eps_n, &th)?;
        levels.push(LevelRecord {
            n: rec.n,
            candidate_index: rec.candidate_index,
            b_n: rec.b_n,
            eps_n: rec.eps_n,
            halvings: rec.halvings,
            cond_i_values: cond_i.iter().map(|v| v.value).collect(),
            cond_ii_value: vals.ii.value,
            cond_iii_value: vals.iii.value,
            error_bounds: ErrorBounds {
                cond_i: cond_i.iter().map(|v| v.error_bound).collect(),
                cond_ii: vals.ii.error_bound,
                cond_iii: vals.iii.error_bound,
            },
            margins: Margins {
                cond_i: cond_i.iter().map(|v| th.cond_i - v.value).collect(),
                cond_ii: th.cond_ii - vals.ii.value,
                cond_iii: vals.iii_margin,
            },
            thresholds: th,
        });
        chosen.push(image);
    }
    SelectionCertificate {
        id: String::new(),
        kind: CertificateKind::Flat,
        p: cert.p,
        symbol: None,
        c_hat: None,
        c_hat_rel_change: None,
        delta: None,
        omega_arg: cert.omega_arg,
        path_provenance: format!("remeasured at the points of certificate {}", cert.id),
        resolution: cert.resolution,
        levels,
        passed: false,
        notes: Vec::new(),
    }
    .seal()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayEntry {
    pub level: usize,
    pub condition: String,
    pub stored: f64,
    pub replayed: f64,
    pub margin: f64,
    /// `|replayed - stored| / margin`.
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub certificate_id: String,
    pub resolution: Resolution,
    pub entries: Vec<ReplayEntry>,
    pub max_fraction: f64,
    /// Every value moved by less than 10% of its margin.
    pub passed: bool,
}

pub const REPLAY_FRACTION: f64 = 0.1;

/// Re-measures every stored condition value at double resolution.
pub fn replay_certificate(cert: &SelectionCertificate) -> Result<ReplayReport> {
    let g = match cert.kind {
        CertificateKind::Volterra => Some(certificate_symbol(cert)?),
        CertificateKind::Flat => None,
    };
    let family = family_of(cert, &g);
    let res = cert.resolution.doubled();
    let selector = Selector { family, p: cert.p, omega: cert.omega_arg, res, thresholds: Box::new(flat_thresholds) };
    let mut entries = Vec::new();
    let mut chosen: Vec<Box<dyn DiscFunction>> = Vec::new();
    let mut push = |level, condition: String, stored: f64, replayed: f64, margin: f64| {
        entries.push(ReplayEntry { level, condition, stored, replayed, margin, fraction: (replayed - stored).abs() / margin });
    };
    for rec in &cert.levels {
        for (j, f) in chosen.iter().enumerate() {
            let v = in_arc(f.as_ref(), cert.p, cert.omega_arg, rec.eps_n, res)?;
            push(rec.n, format!("i[{}]", j + 1), rec.cond_i_values[j], v.value, rec.margins.cond_i[j]);
        }
        let image = family.image(&rec.b_n, cert.p, res.radial)?;
        let vals = selector.measure_candidate(image.as_ref(), rec.eps_n, &rec.thresholds)?;
        push(rec.n, "ii".into(), rec.cond_ii_value, vals.ii.value, rec.margins.cond_ii);
        match cert.kind {
            // Margin of the flat (iii) is `1 - value` itself; compare the
            // replayed margin directly to avoid rounding at 1.
            CertificateKind::Flat => push(
                rec.n,
                "iii".into(),
                rec.margins.cond_iii,
                vals.iii_margin,
                rec.margins.cond_iii,
            ),
            CertificateKind::Volterra => {
                push(rec.n, "iii".into(), rec.cond_iii_value, vals.iii.value, rec.margins.cond_iii)
            }
        }
        chosen.push(image);
    }
    let max_fraction = entries.iter().map(|e| e.fraction).fold(0.0, f64::max);
    Ok(ReplayReport {
        certificate_id: cert.id.clone(),
        resolution: res,
        passed: max_fraction < REPLAY_FRACTION,
        max_fraction,
        entries,
    })
}

/// A finite section of `S`, `V` or `U` applied to `alpha`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub norm: NormEstimate,
    pub alpha_norm: f64,
    /// The asserted bound on `norm / alpha_norm`.
    pub bound: f64,
    pub within_bound: bool,
}

fn check_support(cert: &SelectionCertificate, alpha: &[Complex64]) -> Result<()> {
    if alpha.len() > cert.levels.len() {
        return Err(HvlError::SupportExceedsLevels { support: alpha.len(), levels: cert.levels.len() });
    }
    Ok(())
}

fn section(cert: &SelectionCertificate, alpha: &[Complex64]) -> AnalyticFn {
    let terms = alpha
        .iter()
        .zip(&cert.levels)
        .filter(|(a, _)| a.norm() > 0.0)
        .map(|(a, l)| (*a, ClosedForm::TestFn { a: l.b_n, p: cert.p }))
        .collect();
    AnalyticFn::closed(ClosedForm::Sum { constant: Complex64::new(0.0, 0.0), terms })
}

const EMBED_SAMPLES: usize = 256;

/// `S alpha = sum alpha_n f_{b_n}` and its norm, checked against
/// `||S alpha||_p <= 2^{(p+1)/p} ||alpha||`.
pub fn embed_flat(cert: &SelectionCertificate, alpha: &[Complex64]) -> Result<(AnalyticFn, Embedding)> {
    if cert.kind != CertificateKind::Flat {
        return Err(HvlError::CertificateMismatch("embed_flat needs a flat certificate".into()));
    }
    check_support(cert, alpha)?;
    let s = section(cert, alpha);
    let norm = hardy_norm(&s, cert.p, EMBED_SAMPLES, 1.0)?;
    let alpha_norm = lp_norm(alpha, cert.p);
    let bound = (2f64).powf((cert.p + 1.0) / cert.p);
    let within_bound = norm.value <= bound * alpha_norm;
    Ok((s, Embedding { norm, alpha_norm, bound, within_bound }))
}

/// `U alpha = T_g(sum alpha_n f_{b_n})` and its norm, checked against
/// `||U alpha||_p >= 2^{-(2p+1)/p} c_hat ||alpha||`.
pub fn embed_volterra(cert: &SelectionCertificate, g: &AnalyticFn, alpha: &[Complex64]) -> Result<(VolterraImage, Embedding)> {
    if cert.kind != CertificateKind::Volterra {
        return Err(HvlError::CertificateMismatch("embed_volterra needs a volterra certificate".into()));
    }
    check_support(cert, alpha)?;
    let c_hat = cert.c_hat.unwrap_or(0.0);
    let image = VolterraImage::new(g, &section(cert, alpha));
    let norm = hardy_norm(&image, cert.p, EMBED_SAMPLES, 1.0)?;
    let alpha_norm = lp_norm(alpha, cert.p);
    let bound = (2f64).powf(-(2.0 * cert.p + 1.0) / cert.p) * c_hat;
    let within_bound = norm.value >= bound * alpha_norm;
    Ok((image, Embedding { norm, alpha_norm, bound, within_bound }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub alpha: Vec<Complex64>,
    pub alpha_norm: f64,
    pub flat_norm: f64,
    pub flat_error: f64,
    pub volterra_norm: f64,
    pub volterra_error: f64,
    pub flat_ratio: f64,
    pub volterra_ratio: f64,
    pub restriction_ratio: f64,
    pub within_bounds: bool,
}

/// `||T_g f_{b_n}||_p` for the unit vectors `e_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeRecord {
    pub n: usize,
    pub flat_norm: f64,
    pub volterra_norm: f64,
    pub lower: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingReport {
    pub certificate_id: String,
    pub flat_certificate_id: String,
    pub p: f64,
    pub c_hat: f64,
    pub seed: u64,
    pub trials: usize,
    pub records: Vec<TrialRecord>,
    pub spikes: Vec<SpikeRecord>,
    /// Extremes of `||U alpha|| / ||alpha||`.
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// Largest `||V alpha|| / ||alpha||`.
    pub flat_max_ratio: f64,
    /// `2^{(p+1)/p}`.
    pub bound_upper: f64,
    /// `2^{-(2p+1)/p} c_hat`.
    pub bound_lower: f64,
    pub all_within_bounds: bool,
    /// `min ||T_g(V alpha)|| / ||V alpha||` over trials.
    pub restriction_lower: f64,
    /// `bound_lower / bound_upper`.
    pub restriction_bound: f64,
    pub passed: bool,
}

/// Boundary values of every `f_{b_n}` and `T_g f_{b_n}` on one rule.
struct SharedSamples {
    weights: Vec<f64>,
    flat: Vec<Vec<Complex64>>,
    volterra: Vec<Vec<Complex64>>,
}

impl SharedSamples {
    fn new(points: &[DiscPoint], p: f64, g: &AnalyticFn, hot: &[HotPoint], level: u32, radial: u32) -> Result<Self> {
        check_resolvable(hot)?;
        let rule = PanelRule::from_breakpoints(&graded_breakpoints(-PI, PI, hot), level);
        let mut flat = Vec::with_capacity(points.len());
        let mut volterra = Vec::with_capacity(points.len());
        for b in points {
            let f = test_function(*b, p)?;
            let tf = VolterraImage::with_refine(g, &f, radial);
            flat.push(rule.sample(|t| f.value_at(&DiscPoint::boundary(t)))?);
            volterra.push(rule.sample(|t| tf.value_at(&DiscPoint::boundary(t)))?);
        }
        Ok(SharedSamples { weights: rule.weights().to_vec(), flat, volterra })
    }

    fn norm(&self, rows: &[Vec<Complex64>], alpha: &[Complex64], p: f64) -> f64 {
        let mut total = 0.0;
        for (i, w) in self.weights.iter().enumerate() {
            let v: Complex64 = alpha.iter().zip(rows).map(|(a, row)| a * row[i]).sum();
            total += w * v.norm().powf(p);
        }
        (total / (2.0 * PI)).powf(1.0 / p)
    }
}

fn ensure_same_points(flat: &SelectionCertificate, volterra: &SelectionCertificate) -> Result<()> {
    if flat.kind != CertificateKind::Flat || volterra.kind != CertificateKind::Volterra {
        return Err(HvlError::CertificateMismatch("expected one flat and one volterra certificate".into()));
    }
    if flat.p != volterra.p {
        return Err(HvlError::CertificateMismatch(format!("p differs: {} vs {}", flat.p, volterra.p)));
    }
    if flat.points() != volterra.points() {
        return Err(HvlError::CertificateMismatch("certificates select different points".into()));
    }
    Ok(())
}

/// Random finite sections of `V` and `U` over the shared points, checked
/// against the flat upper constant, the volterra lower constant and their
/// quotient for the restriction of `T_g` to the span.
pub fn isomorphism_report(
    cert_flat: &SelectionCertificate,
    cert_volterra: &SelectionCertificate,
    g: &SymbolSpec,
    trials: usize,
    seed: u64,
) -> Result<EmbeddingReport> {
    ensure_same_points(cert_flat, cert_volterra)?;
    if cert_volterra.symbol.as_ref() != Some(g) {
        return Err(HvlError::CertificateMismatch(format!("certificate symbol differs from {}", g.label())));
    }
    let p = cert_volterra.p;
    let c_hat = cert_volterra.c_hat.unwrap_or(0.0);
    let symbol = make_symbol(g, SYMBOL_DEGREE)?;
    let points = cert_volterra.points();
    let mut hot: Vec<HotPoint> = symbol.derivative().hot_points();
    for b in &points {
        hot.extend(test_function(*b, p)?.hot_points());
    }
    let res = cert_volterra.resolution;
    let coarse = SharedSamples::new(&points, p, &symbol, &hot, res.outer, res.radial)?;
    let fine = SharedSamples::new(&points, p, &symbol, &hot, res.outer + 1, res.radial)?;

    let bound_upper = (2f64).powf((p + 1.0) / p);
    let bound_lower = (2f64).powf(-(2.0 * p + 1.0) / p) * c_hat;
    let restriction_bound = bound_lower / bound_upper;

    let spikes: Vec<SpikeRecord> = (0..points.len())
        .map(|n| {
            let mut e = vec![Complex64::new(0.0, 0.0); points.len()];
            e[n] = Complex64::new(1.0, 0.0);
            let volterra_norm = fine.norm(&fine.volterra, &e, p);
            SpikeRecord {
                n: n + 1,
                flat_norm: fine.norm(&fine.flat, &e, p),
                volterra_norm,
                lower: 0.5 * c_hat,
                passed: volterra_norm >= 0.5 * c_hat,
            }
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::with_capacity(trials);
    for _ in 0..trials {
        let alpha: Vec<Complex64> = (0..points.len())
            .map(|_| {
                let r: f64 = rng.gen::<f64>().sqrt();
                let t: f64 = rng.gen::<f64>() * 2.0 * PI;
                Complex64::from_polar(r, t)
            })
            .collect();
        let alpha_norm = lp_norm(&alpha, p);
        let flat_norm = fine.norm(&fine.flat, &alpha, p);
        let volterra_norm = fine.norm(&fine.volterra, &alpha, p);
        let flat_error = (flat_norm - coarse.norm(&coarse.flat, &alpha, p)).abs();
        let volterra_error = (volterra_norm - coarse.norm(&coarse.volterra, &alpha, p)).abs();
        let flat_ratio = flat_norm / alpha_norm;
        let volterra_ratio = volterra_norm / alpha_norm;
        records.push(TrialRecord {
            within_bounds: flat_ratio <= bound_upper && volterra_ratio >= bound_lower,
            alpha,
            alpha_norm,
            flat_norm,
            flat_error,
            volterra_norm,
            volterra_error,
            flat_ratio,
            volterra_ratio,
            restriction_ratio: volterra_norm / flat_norm,
        });
    }
    let fold = |f: fn(&TrialRecord) -> f64, init: f64, pick: fn(f64, f64) -> f64| records.iter().map(f).fold(init, pick);
    let min_ratio = fold(|r| r.volterra_ratio, f64::INFINITY, f64::min);
    let max_ratio = fold(|r| r.volterra_ratio, 0.0, f64::max);
    let flat_max_ratio = fold(|r| r.flat_ratio, 0.0, f64::max);
    let restriction_lower = fold(|r| r.restriction_ratio, f64::INFINITY, f64::min);
    let all_within_bounds = records.iter().all(|r| r.within_bounds);
    let passed = trials > 0 && all_within_bounds && restriction_lower >= restriction_bound && spikes.iter().all(|s| s.passed);
    Ok(EmbeddingReport {
        certificate_id: cert_volterra.id.clone(),
        flat_certificate_id: cert_flat.id.clone(),
        p,
        c_hat,
        seed,
        trials,
        records,
        spikes,
        min_ratio,
        max_ratio,
        flat_max_ratio,
        bound_upper,
        bound_lower,
        all_within_bounds,
        restriction_lower,
        restriction_bound,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_solves_its_defining_equation() {
        assert_eq!(delta_for(2.0), 0.125);
        for p in [1.0, 4.0 / 3.0, 2.0, 3.0, 4.0] {
            assert!(threshold_algebra_residual(p, delta_for(p)) < 1e-16);
        }
    }

    #[test]
    fn single_level_flat_selection() {
        let path = CandidateSequence::dyadic(0.0, 8).unwrap();
        let sel = select_flat(2.0, &path, &SelectionConfig::new(1)).unwrap();
        let cert = sel.certificate().expect("one level always succeeds");
        assert!(cert.passed);
        assert!(cert.levels[0].cond_i_values.is_empty());
        assert_eq!(cert.id.len(), 64);
    }

    #[test]
    fn short_path_is_rejected() {
        let path = CandidateSequence::dyadic(0.0, 7).unwrap();
        assert!(select_flat(2.0, &path, &SelectionConfig::new(2)).is_err());
    }
}
