//! `hvl`: norms, seminorms, norm-limit profiles, lemma drivers, gliding-hump
//! selections and embedding reports for Volterra-type operators on Hardy
//! spaces.
//!
//! Exit status is 0 when the run passes, 1 when a check fails or a
//! computation does not converge, and 2 on usage errors.

mod args;
mod output;

use std::f64::consts::FRAC_PI_2;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

use hvl_core::disc_fn::{make_symbol, test_function, AnalyticFn, CandidateSequence, DiscFunction, SymbolSpec, DEFAULT_DEGREE};
use hvl_core::gliding_hump::{
    certificate_symbol, embed_flat, embed_volterra, isomorphism_report, remeasure_flat, replay_certificate,
    select_flat, select_volterra, CertificateKind, Selection, SelectionCertificate, SelectionConfig, HALVING_CAP,
    PROFILE_POINTS, SYMBOL_DEGREE,
};
use hvl_core::lemma_lab::{
    dyadic_eps_schedule, leibov_sequence_stats, squared_shrinkage_schedule, verify_localization, verify_localization2,
    verify_masslemma_i, verify_masslemma_ii, DecaySequenceReport, LEIBOV_STAR_RATIO, LOCALIZATION2_THRESHOLD,
    LOCALIZATION_THRESHOLD, MASS_THRESHOLD,
};
use hvl_core::norms::{bloch_seminorm, bmoa_seminorm, dyadic_defects, hardy_norm, lmoa_seminorm, ray_grid, vmoa_defect};
use hvl_core::volterra::{normlimit_profile, VolterraImage};
use hvl_core::HvlError;

use output::{envelope_json, rows_csv, write_file, Row};

#[derive(Parser)]
#[command(name = "hvl", version, about = "Hardy-space Volterra operator laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// H^p norm of a test function, a symbol, or its Volterra image
    Norm(NormArgs),
    /// BMOA, Bloch, LMOA or VMOA seminorm of a symbol on the standard grid
    Seminorm(SeminormArgs),
    /// ||T_g f_{a_k}||_p along a path and the limsup estimate c_hat
    Profile(ProfileArgs),
    /// Decay sequences of the mass and localization lemmas, Leibov statistics
    Lemma(LemmaArgs),
    /// Gliding-hump selection certificate
    Select(SelectArgs),
    /// Finite section of a certified map applied to one coefficient vector
    Embed(EmbedArgs),
    /// Randomized embedding report for a volterra certificate
    Report(ReportArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Args, Clone)]
struct OutputArgs {
    /// Output file; JSON unless it ends in `.csv`
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format (default: text on stdout, or inferred from --out)
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Add a Unix timestamp to JSON output
    #[arg(long)]
    timestamp: bool,
}

#[derive(Args, Serialize)]
struct NormArgs {
    /// `testfn` or a symbol: log1, monomial:K, poly:c0;c1;..., carleson:re,im, custom:c0;c1;...
    #[arg(long, default_value = "testfn")]
    symbol: String,
    /// Base point of the test function as `re` or `re,im`
    #[arg(long, value_parser = args::parse_complex, allow_hyphen_values = true)]
    a: Option<Complex64>,
    /// Base point given by its modulus defect 1 - |a| (with --arg)
    #[arg(long)]
    defect: Option<f64>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    arg: f64,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    /// Radius of the circle
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    /// Apply T_g with this symbol before taking the norm
    #[arg(long, value_parser = args::parse_symbol)]
    apply: Option<SymbolSpec>,
    /// Initial sample count for functions without boundary features
    #[arg(long, default_value_t = 256)]
    samples: usize,
    /// Fail unless the norm is within --tol of this value
    #[arg(long)]
    expect: Option<f64>,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    #[command(flatten)]
    #[serde(skip)]
    output: OutputArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum SeminormKind {
    Bmoa,
    Bloch,
    Lmoa,
    Vmoa,
}

#[derive(Args, Serialize)]
struct SeminormArgs {
    #[arg(long, value_parser = args::parse_symbol)]
    symbol: SymbolSpec,
    #[arg(long, value_enum, default_value_t = SeminormKind::Bmoa)]
    kind: SeminormKind,
    /// Radii 1 - 2^{-j}, j = 1..=levels
    #[arg(long, default_value_t = 10)]
    levels: usize,
    #[arg(long, default_value_t = 8)]
    rays: usize,
    /// Exponent of the mean oscillation
    #[arg(long, default_value_t = 2.0)]
    q: f64,
    #[command(flatten)]
    #[serde(skip)]
    output: OutputArgs,
}

#[derive(Args, Serialize)]
struct PathArgs {
    /// Path a_k = (1 - base^{-k}) e^{i omega}
    #[arg(long, default_value_t = 2.0)]
    base: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    omega: f64,
}

impl PathArgs {
    fn path(&self, count: usize) -> Result<CandidateSequence, CliError> {
        Ok(CandidateSequence::geometric(self.omega, self.base, count)?)
    }
}

#[derive(Args, Serialize)]
struct ProfileArgs {
    #[arg(long, value_parser = args::parse_symbol)]
    symbol: SymbolSpec,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[arg(long, default_value_t = 16)]
    count: usize,
    #[command(flatten)]
    path: PathArgs,
    /// Fail unless c_hat moved by less than 1% under the last point
    #[arg(long)]
    expect_stable: bool,
    /// Fail unless the last norm lies below this value
    #[arg(long)]
    expect_below: Option<f64>,
    #[command(flatten)]
    #[serde(skip)]
    output: OutputArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum Lemma {
    MassI,
    MassIi,
    Localization,
    Localization2,
    Leibov,
}

#[derive(Args)]
struct LemmaArgs {
    #[arg(value_enum)]
    which: Lemma,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[arg(long, value_parser = args::parse_symbol, default_value = "log1")]
    symbol: SymbolSpec,
    /// Half-width of the fixed arc A_eps (default pi/2)
    #[arg(long)]
    eps: Option<f64>,
    /// Fixed point for mass-ii (default 0.9)
    #[arg(long, value_parser = args::parse_complex, allow_hyphen_values = true)]
    a: Option<Complex64>,
    /// Path length (default 16, or 8 for localization)
    #[arg(long)]
    count: Option<usize>,
    /// Path base (default 2, or 4 for localization)
    #[arg(long)]
    base: Option<f64>,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    omega: f64,
    /// Number of arcs eps_j = 2^{-j} pi in shrinking schedules (default 20, or 24 for localization2)
    #[arg(long)]
    schedule: Option<usize>,
    /// Path index held fixed in part (ii) of localization2
    #[arg(long, default_value_t = 1)]
    index: usize,
    /// Override the default pass threshold
    #[arg(long)]
    threshold: Option<f64>,
    /// Number of h_n in the Leibov statistics
    #[arg(long, default_value_t = 6)]
    terms: usize,
    /// |I_1| for the squared-shrinkage schedule
    #[arg(long, default_value_t = 0.25)]
    first_arc: f64,
    /// Bound on max/min of ||h_n||_*
    #[arg(long, default_value_t = LEIBOV_STAR_RATIO)]
    star_ratio: f64,
    #[command(flatten)]
    output: OutputArgs,
}

/// Lemma options with every default resolved, echoed as the run config.
#[derive(Serialize)]
struct LemmaConfig {
    which: Lemma,
    p: f64,
    symbol: Option<SymbolSpec>,
    eps: Option<f64>,
    a: Option<Complex64>,
    count: Option<usize>,
    base: Option<f64>,
    omega: f64,
    schedule: Option<usize>,
    index: Option<usize>,
    threshold: Option<f64>,
    terms: Option<usize>,
    first_arc: Option<f64>,
    star_ratio: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum SelectKind {
    Flat,
    Volterra,
}

#[derive(Args, Serialize)]
struct SelectArgs {
    #[arg(long, value_enum, default_value_t = SelectKind::Volterra)]
    kind: SelectKind,
    #[arg(long, value_parser = args::parse_symbol)]
    symbol: Option<SymbolSpec>,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[arg(long, default_value_t = 6)]
    levels: usize,
    /// Recorded in the config; the selection itself is deterministic
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Candidate path length
    #[arg(long, default_value_t = 400)]
    count: usize,
    #[command(flatten)]
    path: PathArgs,
    #[arg(long, default_value_t = HALVING_CAP)]
    halving_cap: u32,
    /// Path points used for the norm-limit profile
    #[arg(long, default_value_t = PROFILE_POINTS)]
    profile_points: usize,
    /// Re-measure every condition at double resolution
    #[arg(long)]
    replay: bool,
    #[command(flatten)]
    #[serde(skip)]
    output: OutputArgs,
}

#[derive(Args, Serialize)]
struct EmbedArgs {
    #[arg(long)]
    cert: PathBuf,
    /// Coefficients alpha_1;alpha_2;..., each `re` or `re,im`
    #[arg(long, allow_hyphen_values = true)]
    alpha: String,
    #[command(flatten)]
    #[serde(skip)]
    output: OutputArgs,
}

#[derive(Args, Serialize)]
struct ReportArgs {
    /// Volterra certificate
    #[arg(long)]
    cert: PathBuf,
    /// Flat certificate on the same points (default: re-measured from --cert)
    #[arg(long)]
    flat_cert: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[command(flatten)]
    #[serde(skip)]
    output: OutputArgs,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Failure(String),
}

impl From<HvlError> for CliError {
    fn from(e: HvlError) -> Self {
        match e {
            HvlError::InvalidParameter(_)
            | HvlError::OutsideDisc(_)
            | HvlError::SeriesOnBoundary
            | HvlError::NoClosedForm
            | HvlError::NoSeries
            | HvlError::OutsideValidityRadius { .. }
            | HvlError::CertificateMismatch(_)
            | HvlError::SupportExceedsLevels { .. } => CliError::Usage(e.to_string()),
            _ => CliError::Failure(e.to_string()),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

/// What a subcommand produced.
struct Outcome {
    config: Value,
    result: Value,
    rows: Vec<Row>,
    summary: String,
    passed: bool,
}

fn to_value<T: Serialize>(x: &T) -> Result<Value, CliError> {
    serde_json::to_value(x).map_err(|e| CliError::Failure(e.to_string()))
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn run_norm(a: &NormArgs) -> Result<Outcome, CliError> {
    let f: AnalyticFn = if a.symbol == "testfn" {
        test_function(args::disc_point(a.a, a.defect, a.arg).map_err(usage)?, a.p)?
    } else {
        if a.a.is_some() || a.defect.is_some() {
            return Err(usage("--a and --defect only apply to --symbol testfn"));
        }
        make_symbol(&args::parse_symbol(&a.symbol).map_err(usage)?, DEFAULT_DEGREE)?
    };
    let target: Box<dyn DiscFunction> = match &a.apply {
        Some(g) => Box::new(VolterraImage::new(&make_symbol(g, SYMBOL_DEGREE)?, &f)),
        None => Box::new(f),
    };
    let est = hardy_norm(target.as_ref(), a.p, a.samples, a.radius)?;
    let passed = a.expect.is_none_or(|e| (est.value - e).abs() <= a.tol);
    Ok(Outcome {
        config: to_value(a)?,
        result: json!({ "norm": est, "passed": passed }),
        rows: vec![Row::new("norm", est.value, est.error_bound)],
        summary: format!("{:.4} ± {:.1e}", est.value, est.error_bound),
        passed,
    })
}

fn run_seminorm(a: &SeminormArgs) -> Result<Outcome, CliError> {
    let g = make_symbol(&a.symbol, SYMBOL_DEGREE)?;
    if a.levels == 0 || a.rays == 0 {
        return Err(usage("--levels and --rays must be positive"));
    }
    let grid = ray_grid(a.rays, &dyadic_defects(a.levels, 1));
    let est = match a.kind {
        SeminormKind::Bmoa => Some(bmoa_seminorm(&g, &grid, a.q)?),
        SeminormKind::Bloch => Some(bloch_seminorm(&g, &grid)?),
        SeminormKind::Lmoa => Some(lmoa_seminorm(&g, &grid)?),
        SeminormKind::Vmoa => None,
    };
    let (result, rows, summary) = match est {
        Some(e) => (
            json!({ "seminorm": e }),
            vec![Row::new(format!("{:?}", a.kind).to_lowercase(), e.value, e.error_bound)],
            format!("{:.6} ± {:.1e}", e.value, e.error_bound),
        ),
        None => {
            let defects = dyadic_defects(a.levels, 1);
            let values = vmoa_defect(&g, &defects, a.rays, a.q)?;
            let rows: Vec<Row> =
                defects.iter().zip(&values).map(|(d, v)| Row::new(format!("defect={d:e}"), *v, 0.0)).collect();
            let last = values.last().copied().unwrap_or(0.0);
            (json!({ "defects": defects, "values": values }), rows, format!("vmoa profile, last {last:.6}"))
        }
    };
    Ok(Outcome { config: to_value(a)?, result, rows, summary, passed: true })
}

fn run_profile(a: &ProfileArgs) -> Result<Outcome, CliError> {
    let g = make_symbol(&a.symbol, SYMBOL_DEGREE)?;
    let profile = normlimit_profile(&g, a.p, &a.path.path(a.count)?)?;
    let last = profile.norms.last().map_or(0.0, |e| e.value);
    let passed = (!a.expect_stable || profile.stabilized) && a.expect_below.is_none_or(|t| last < t);
    let rows = profile
        .norms
        .iter()
        .enumerate()
        .map(|(k, e)| Row::new(format!("k={}", k + 1), e.value, e.error_bound))
        .collect();
    Ok(Outcome {
        config: to_value(a)?,
        summary: format!(
            "c_hat = {:.6} (last change {:.2e}, stabilized: {}), last norm {:.6}",
            profile.c_hat, profile.rel_change, profile.stabilized, last
        ),
        result: json!({ "profile": profile, "passed": passed }),
        rows,
        passed,
    })
}

fn decay_rows(prefix: &str, r: &DecaySequenceReport, out: &mut Vec<Row>) {
    for ((l, v), e) in r.labels.iter().zip(&r.values).zip(&r.error_bounds) {
        out.push(Row::new(format!("{prefix}{l}"), *v, *e));
    }
}

fn decay_summary(name: &str, r: &DecaySequenceReport) -> String {
    format!(
        "{name}: final {:.3e} (threshold {:.1e}), eventually decreasing: {}, {}",
        r.final_value,
        r.threshold,
        r.eventually_decreasing,
        if r.passed { "PASS" } else { "FAIL" }
    )
}

fn resolve_lemma(a: &LemmaArgs) -> LemmaConfig {
    let path_like = matches!(a.which, Lemma::MassI | Lemma::Localization | Lemma::Localization2);
    let loc = matches!(a.which, Lemma::Localization | Lemma::Localization2);
    let uses_eps = matches!(a.which, Lemma::MassI | Lemma::Localization2);
    let shrinking = matches!(a.which, Lemma::MassIi | Lemma::Localization2);
    let threshold = match a.which {
        Lemma::MassI | Lemma::MassIi => Some(MASS_THRESHOLD),
        Lemma::Localization => Some(LOCALIZATION_THRESHOLD),
        Lemma::Localization2 => Some(LOCALIZATION2_THRESHOLD),
        Lemma::Leibov => None,
    };
    let leibov = a.which == Lemma::Leibov;
    LemmaConfig {
        which: a.which,
        p: a.p,
        symbol: loc.then(|| a.symbol.clone()),
        eps: uses_eps.then(|| a.eps.unwrap_or(FRAC_PI_2)),
        a: (a.which == Lemma::MassIi).then(|| a.a.unwrap_or(Complex64::new(0.9, 0.0))),
        count: path_like.then(|| a.count.unwrap_or(if loc { 8 } else { 16 })),
        base: path_like.then(|| a.base.unwrap_or(if loc { 4.0 } else { 2.0 })),
        omega: a.omega,
        schedule: shrinking.then(|| a.schedule.unwrap_or(if loc { 24 } else { 20 })),
        index: (a.which == Lemma::Localization2).then_some(a.index),
        threshold: a.threshold.or(threshold),
        terms: leibov.then_some(a.terms),
        first_arc: leibov.then_some(a.first_arc),
        star_ratio: leibov.then_some(a.star_ratio),
    }
}

fn run_lemma(a: &LemmaArgs) -> Result<Outcome, CliError> {
    let c = resolve_lemma(a);
    let config = to_value(&c)?;
    let path = || -> Result<CandidateSequence, CliError> {
        Ok(CandidateSequence::geometric(c.omega, c.base.unwrap_or(2.0), c.count.unwrap_or(16))?)
    };
    let symbol = || -> Result<AnalyticFn, CliError> { Ok(make_symbol(&a.symbol, SYMBOL_DEGREE)?) };
    let threshold = c.threshold.unwrap_or(0.0);
    let mut rows = Vec::new();
    let (result, summary, passed) = match a.which {
        Lemma::MassI => {
            let r = verify_masslemma_i(c.p, &path()?, c.eps.unwrap_or(FRAC_PI_2), threshold)?;
            decay_rows("k=", &r, &mut rows);
            (json!({ "report": r }), decay_summary("mass lemma (i)", &r), r.passed)
        }
        Lemma::MassIi => {
            let point = hvl_core::point::DiscPoint::from_complex_interior(c.a.unwrap_or_default())?;
            let r = verify_masslemma_ii(c.p, point, &dyadic_eps_schedule(c.schedule.unwrap_or(20)), threshold)?;
            decay_rows("eps=", &r, &mut rows);
            (json!({ "report": r }), decay_summary("mass lemma (ii)", &r), r.passed)
        }
        Lemma::Localization => {
            let r = verify_localization(&symbol()?, c.p, &path()?, threshold)?;
            decay_rows("k=", &r, &mut rows);
            (json!({ "report": r }), decay_summary("localization", &r), r.passed)
        }
        Lemma::Localization2 => {
            let (r1, r2) = verify_localization2(
                &symbol()?,
                c.p,
                &path()?,
                c.eps.unwrap_or(FRAC_PI_2),
                a.index,
                &dyadic_eps_schedule(c.schedule.unwrap_or(24)),
                threshold,
            )?;
            decay_rows("i:k=", &r1, &mut rows);
            decay_rows("ii:eps=", &r2, &mut rows);
            let summary = format!("{}\n{}", decay_summary("part (i)", &r1), decay_summary("part (ii)", &r2));
            (json!({ "part_i": r1, "part_ii": r2 }), summary, r1.passed && r2.passed)
        }
        Lemma::Leibov => {
            if a.terms == 0 {
                return Err(usage("--terms must be positive"));
            }
            let stats = leibov_sequence_stats(&squared_shrinkage_schedule(a.first_arc, a.terms + 1), None)?;
            let ratio = stats.star_ratio();
            let l2_first = stats.l2s.first().copied().unwrap_or(0.0);
            let l2_last = stats.l2s.last().copied().unwrap_or(0.0);
            let passed = stats.l2_strictly_decreasing() && ratio <= a.star_ratio;
            for (n, (s, l)) in stats.stars.iter().zip(&stats.l2s).enumerate() {
                rows.push(Row::new(format!("star:n={}", n + 1), *s, 0.0));
                rows.push(Row::new(format!("l2:n={}", n + 1), *l, 0.0));
            }
            let summary = format!(
                "||h_n||_2 from {l2_first:.3e} to {l2_last:.3e} (strictly decreasing: {}), max/min ||h_n||_* = {ratio:.3}",
                stats.l2_strictly_decreasing()
            );
            (json!({ "stats": stats, "star_ratio": ratio, "passed": passed }), summary, passed)
        }
    };
    Ok(Outcome { config, result, rows, summary, passed })
}

fn run_select(a: &SelectArgs) -> Result<Outcome, CliError> {
    let path = a.path.path(a.count)?;
    let mut config = SelectionConfig::new(a.levels);
    config.halving_cap = a.halving_cap;
    config.profile_points = a.profile_points;
    let selection = match a.kind {
        SelectKind::Flat => select_flat(a.p, &path, &config)?,
        SelectKind::Volterra => {
            let g = a.symbol.as_ref().ok_or_else(|| usage("--kind volterra needs --symbol"))?;
            select_volterra(g, a.p, &path, &config)?
        }
    };
    let replay = match (&selection, a.replay) {
        (Selection::Certified(cert), true) => Some(replay_certificate(cert)?),
        _ => None,
    };
    let passed = selection.passed() && replay.as_ref().is_none_or(|r| r.passed);
    let summary = match &selection {
        Selection::Certified(cert) => {
            let mut s = format!(
                "certificate {} over {} levels, min margin {:.3e}, passed: {}",
                &cert.id[..12],
                cert.levels.len(),
                cert.min_margin(),
                cert.passed
            );
            if let Some(r) = &replay {
                s.push_str(&format!("\nreplay at double resolution: max fraction {:.3e}, passed: {}", r.max_fraction, r.passed));
            }
            s
        }
        Selection::Failed(f) => f.to_string(),
    };
    let rows = selection
        .certificate()
        .map(|c| c.levels.iter().map(|l| Row::new(format!("margin:n={}", l.n), l.min_margin(), 0.0)).collect())
        .unwrap_or_default();
    Ok(Outcome {
        config: to_value(a)?,
        result: json!({ "selection": selection, "replay": replay, "passed": passed }),
        rows,
        summary,
        passed,
    })
}

/// Reads a certificate from a raw certificate, a selection, or an `hvl
/// select` output file, and checks its id.
fn load_certificate(path: &Path) -> Result<SelectionCertificate, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    let mut v: Value = serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    if let Some(r) = v.get("result") {
        v = r.clone();
    }
    if let Some(s) = v.get("selection") {
        v = s.clone();
    }
    let cert = if v.get("status").is_some() {
        let sel: Selection = serde_json::from_value(v).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        match sel {
            Selection::Certified(c) => c,
            Selection::Failed(f) => return Err(usage(format!("{} holds a failed selection: {f}", path.display()))),
        }
    } else {
        serde_json::from_value(v).map_err(|e| usage(format!("{}: {e}", path.display())))?
    };
    cert.verify_id()?;
    Ok(cert)
}

fn run_embed(a: &EmbedArgs) -> Result<Outcome, CliError> {
    let alpha = args::parse_coeffs(&a.alpha).map_err(usage)?;
    let cert = load_certificate(&a.cert)?;
    let emb = match cert.kind {
        CertificateKind::Flat => embed_flat(&cert, &alpha)?.1,
        CertificateKind::Volterra => embed_volterra(&cert, &certificate_symbol(&cert)?, &alpha)?.1,
    };
    let relation = if cert.kind == CertificateKind::Flat { "<=" } else { ">=" };
    Ok(Outcome {
        config: json!({ "cert": a.cert, "certificate_id": cert.id, "alpha": alpha }),
        summary: format!(
            "||image||_p = {:.6} ± {:.1e}, ||alpha|| = {:.6}, bound {relation} {:.6} * ||alpha||: {}",
            emb.norm.value, emb.norm.error_bound, emb.alpha_norm, emb.bound, emb.within_bound
        ),
        rows: vec![Row::new("norm", emb.norm.value, emb.norm.error_bound)],
        passed: emb.within_bound,
        result: to_value(&emb)?,
    })
}

fn run_report(a: &ReportArgs) -> Result<Outcome, CliError> {
    let cert = load_certificate(&a.cert)?;
    if cert.kind != CertificateKind::Volterra {
        return Err(usage("--cert must be a volterra certificate"));
    }
    let flat = match &a.flat_cert {
        Some(p) => load_certificate(p)?,
        None => remeasure_flat(&cert)?,
    };
    let spec = cert.symbol.clone().ok_or_else(|| usage("certificate carries no symbol"))?;
    let report = isomorphism_report(&flat, &cert, &spec, a.trials, a.seed)?;
    let rows = report
        .records
        .iter()
        .enumerate()
        .map(|(i, r)| Row::new(format!("trial={}", i + 1), r.volterra_ratio, r.volterra_error / r.alpha_norm))
        .collect();
    Ok(Outcome {
        config: json!({
            "cert": a.cert,
            "flat_cert": a.flat_cert,
            "certificate_id": cert.id,
            "trials": a.trials,
            "seed": a.seed,
        }),
        summary: format!(
            "||U a||/||a|| in [{:.6}, {:.6}] (lower bound {:.6}), ||V a||/||a|| <= {:.6} (upper bound {:.6}), restriction {:.6} >= {:.6}: {}",
            report.min_ratio,
            report.max_ratio,
            report.bound_lower,
            report.flat_max_ratio,
            report.bound_upper,
            report.restriction_lower,
            report.restriction_bound,
            if report.passed { "PASS" } else { "FAIL" }
        ),
        rows,
        passed: report.passed,
        result: to_value(&report)?,
    })
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("HVL_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| usage(format!("HVL_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Failure(e.to_string()))
}

fn emit(outcome: &Outcome, out: &OutputArgs) -> Result<(), CliError> {
    let format = out.format.unwrap_or(match &out.out {
        Some(p) if p.extension().is_some_and(|e| e == "csv") => Format::Csv,
        Some(_) => Format::Json,
        None => Format::Text,
    });
    let timestamp =
        out.timestamp.then(|| SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0));
    let body = match format {
        Format::Json => envelope_json(&outcome.config, &outcome.result, timestamp)?,
        Format::Csv => rows_csv(&outcome.rows)?,
        Format::Text => format!("{}\n", outcome.summary),
    };
    match &out.out {
        Some(path) => {
            write_file(path, &body)?;
            println!("{}", outcome.summary);
        }
        None => print!("{body}"),
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<bool, CliError> {
    configure_threads()?;
    let (outcome, out) = match &cli.command {
        Command::Norm(a) => (run_norm(a)?, &a.output),
        Command::Seminorm(a) => (run_seminorm(a)?, &a.output),
        Command::Profile(a) => (run_profile(a)?, &a.output),
        Command::Lemma(a) => (run_lemma(a)?, &a.output),
        Command::Select(a) => (run_select(a)?, &a.output),
        Command::Embed(a) => (run_embed(a)?, &a.output),
        Command::Report(a) => (run_report(a)?, &a.output),
    };
    emit(&outcome, out)?;
    Ok(outcome.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Failure(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
