use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;

use hvl_core::disc_fn::{make_mobius, make_symbol, test_function, AnalyticFn, CandidateSequence, SymbolSpec};
use hvl_core::gliding_hump::{delta_for, threshold_algebra_residual};
use hvl_core::lemma_lab::{containment_index, localization_half_width, DecaySequenceReport};
use hvl_core::norms::{arc_integral, complement_integral, hardy_norm, Arc, NormEstimate};
use hvl_core::point::{circular_distance, one_minus_conj_product, DiscPoint};
use hvl_core::volterra::{apply_volterra_coeff, apply_volterra_quad};

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

fn disc_point(max_r: f64) -> impl Strategy<Value = Complex64> {
    (0.0..max_r, -PI..PI).prop_map(|(r, t)| Complex64::from_polar(r, t))
}

fn exponent() -> impl Strategy<Value = f64> {
    prop_oneof![Just(1.0), Just(4.0 / 3.0), Just(2.0), Just(4.0), 1.0..6.0f64]
}

fn poly(max_len: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64).prop_map(|(a, b)| Complex64::new(a, b)), 1..max_len)
}

/// `(1/2pi) int_{t1}^{t2} P_a`, valid while the arc avoids the antipode of `a`.
fn poisson_arc(r: f64, phi: f64, t1: f64, t2: f64) -> f64 {
    let k = (1.0 + r) / (1.0 - r);
    let f = |t: f64| (k * ((t - phi) / 2.0).tan()).atan();
    (f(t2) - f(t1)) / PI
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn mobius_is_an_involution(a in disc_point(0.99), z in disc_point(1.0)) {
        let m = make_mobius(a).unwrap();
        prop_assert!((m.eval(m.eval(z)) - z).norm() < 1e-9);
        prop_assert!((m.eval(a)).norm() < 1e-12);
    }

    #[test]
    fn conj_product_matches_cartesian(a in disc_point(0.99), z in disc_point(1.0)) {
        let pa = DiscPoint::from_complex(a).unwrap();
        let pz = DiscPoint::from_complex(z).unwrap();
        let direct = Complex64::new(1.0, 0.0) - a.conj() * z;
        prop_assert!((one_minus_conj_product(&pa, &pz) - direct).norm() < 1e-14);
    }

    #[test]
    fn test_function_mass_is_poisson_measure(
        r in 0.0..0.999f64,
        phi in -PI..PI,
        offset in -1.0..1.0f64,
        h in 0.01..1.0f64,
        p in exponent(),
    ) {
        let f = test_function(DiscPoint::from_complex(Complex64::from_polar(r, phi)).unwrap(), p).unwrap();
        let c = phi + offset;
        let arc = Arc::new(c, h).unwrap();
        let m = arc_integral(&f, p, &arc).unwrap().value;
        prop_assert!((m - poisson_arc(r, phi, c - h, c + h)).abs() < 1e-8, "{m}");
    }

    #[test]
    fn arc_additivity_and_complement(r in 0.0..0.999f64, c in -PI..PI, h in 0.01..3.0f64, p in exponent()) {
        let f = test_function(DiscPoint::interior(0.3, 1.0 - r).unwrap(), p).unwrap();
        let whole = arc_integral(&f, p, &Arc::new(c, h).unwrap()).unwrap().value;
        let left = arc_integral(&f, p, &Arc::new(c - h / 2.0, h / 2.0).unwrap()).unwrap().value;
        let right = arc_integral(&f, p, &Arc::new(c + h / 2.0, h / 2.0).unwrap()).unwrap().value;
        prop_assert!((whole - left - right).abs() < 1e-9);
        let rest = complement_integral(&f, p, &Arc::new(c, h).unwrap()).unwrap().value;
        prop_assert!((whole + rest - 1.0).abs() < 1e-6);
    }

    #[test]
    fn parseval_for_polynomials(c in poly(12)) {
        let f = AnalyticFn::polynomial(c.clone()).unwrap();
        let norm = hardy_norm(&f, 2.0, 64, 1.0).unwrap().value;
        let direct = c.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        prop_assert!((norm - direct).abs() < 1e-10 * direct.max(1.0));
    }

    #[test]
    fn delta_solves_threshold_algebra(p in 1.0..8.0f64) {
        prop_assert!(threshold_algebra_residual(p, delta_for(p)) < 1e-15);
    }
}

proptest! {
    #![proptest_config(config(24))]

    #[test]
    fn volterra_is_linear_and_vanishes_at_origin(
        f in poly(8),
        h in poly(8),
        s in -2.0..2.0f64,
        z in disc_point(0.95),
    ) {
        let g = make_symbol(&SymbolSpec::Log1, 0).unwrap();
        let len = f.len().max(h.len());
        let pad = |v: &Vec<Complex64>| {
            let mut v = v.clone();
            v.resize(len, Complex64::new(0.0, 0.0));
            v
        };
        let (fp, hp) = (pad(&f), pad(&h));
        let combo: Vec<Complex64> = fp.iter().zip(&hp).map(|(a, b)| a * s + b).collect();
        let tf = apply_volterra_quad(&g, &AnalyticFn::polynomial(fp).unwrap(), z, 1e-13).unwrap();
        let th = apply_volterra_quad(&g, &AnalyticFn::polynomial(hp).unwrap(), z, 1e-13).unwrap();
        let tc = apply_volterra_quad(&g, &AnalyticFn::polynomial(combo).unwrap(), z, 1e-13).unwrap();
        prop_assert!((tc - (tf * s + th)).norm() < 1e-10);
        let zero = apply_volterra_quad(&g, &AnalyticFn::polynomial(f).unwrap(), Complex64::new(0.0, 0.0), 1e-13).unwrap();
        prop_assert_eq!(zero, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn volterra_of_one_is_g_minus_g0(g in poly(10), z in disc_point(0.95)) {
        let sym = AnalyticFn::polynomial(g.clone()).unwrap();
        let one = AnalyticFn::constant(Complex64::new(1.0, 0.0));
        let expected = sym.series_value(z).unwrap() - g[0];
        prop_assert!((apply_volterra_quad(&sym, &one, z, 1e-13).unwrap() - expected).norm() < 1e-12);
        let coeff = apply_volterra_coeff(&sym, &one).unwrap();
        prop_assert!((coeff.series_value(z).unwrap() - expected).norm() < 1e-13);
    }

    #[test]
    fn decay_report_flags_are_consistent(
        values in prop::collection::vec(0.0..1.0f64, 1..20),
        threshold in 0.0..1.0f64,
    ) {
        let est: Vec<NormEstimate> = values.iter().map(|v| NormEstimate::exact(*v)).collect();
        let labels = (1..=values.len()).map(|k| k as f64).collect();
        let r = DecaySequenceReport::new(labels, &est, threshold).unwrap();
        prop_assert_eq!(r.labels.len(), r.values.len());
        prop_assert_eq!(r.passed, r.eventually_decreasing && r.final_value < threshold);
        let tail = &values[values.len() / 2..];
        if tail.windows(2).all(|w| w[1] <= w[0]) {
            prop_assert!(r.eventually_decreasing);
        }
    }

    #[test]
    fn localization_arcs_shrink_into_a_eps(
        base in 1.5..8.0f64,
        omega in -PI..PI,
        eps in 0.05..2.0f64,
        p in exponent(),
    ) {
        let path = CandidateSequence::geometric(omega, base, 40).unwrap();
        let widths: Vec<f64> = path.points.iter().map(|a| localization_half_width(a, p)).collect();
        prop_assert!(widths.windows(2).all(|w| w[1] < w[0]));
        let k = containment_index(p, &path, eps);
        for (j, a) in path.points.iter().enumerate() {
            let inside = widths[j] + circular_distance(a.arg, omega) <= eps;
            if k.is_some_and(|k| j >= k) {
                prop_assert!(inside, "I(a_{j}) leaves A_eps");
            }
        }
        if let Some(k) = k {
            if k > 0 {
                prop_assert!(widths[k - 1] >= eps / 2.0);
            }
        }
    }
}
