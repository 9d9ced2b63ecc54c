//! Parsers for symbols, disc points and coefficient lists given on the
//! command line.

use num_complex::Complex64;

use hvl_core::disc_fn::SymbolSpec;
use hvl_core::point::DiscPoint;

/// A complex number written `x` or `x,y`.
pub fn parse_complex(s: &str) -> Result<Complex64, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let num = |t: &str| t.parse::<f64>().map_err(|_| format!("not a number: {t:?}"));
    match parts.as_slice() {
        [re] => Ok(Complex64::new(num(re)?, 0.0)),
        [re, im] => Ok(Complex64::new(num(re)?, num(im)?)),
        _ => Err(format!("expected `re` or `re,im`, got {s:?}")),
    }
}

/// Coefficients separated by `;`, each `re` or `re,im`.
pub fn parse_coeffs(s: &str) -> Result<Vec<Complex64>, String> {
    s.split(';').map(parse_complex).collect()
}

/// `log1`, `monomial:K`, `poly:c0;c1;...`, `carleson:re,im` or
/// `custom:c0;c1;...`.
pub fn parse_symbol(s: &str) -> Result<SymbolSpec, String> {
    let (head, tail) = match s.split_once(':') {
        Some((h, t)) => (h, Some(t)),
        None => (s, None),
    };
    match (head, tail) {
        ("log1", None) => Ok(SymbolSpec::Log1),
        ("monomial", Some(k)) => {
            Ok(SymbolSpec::Monomial { k: k.parse().map_err(|_| format!("bad monomial degree {k:?}"))? })
        }
        ("poly", Some(c)) => Ok(SymbolSpec::Polynomial { coeffs: parse_coeffs(c)? }),
        ("custom", Some(c)) => Ok(SymbolSpec::Custom { coeffs: parse_coeffs(c)? }),
        ("carleson", Some(u)) => Ok(SymbolSpec::CarlesonLog { u: parse_complex(u)? }),
        _ => Err(format!(
            "unknown symbol {s:?}; expected log1, monomial:K, poly:c0;c1;..., carleson:re,im or custom:c0;c1;..."
        )),
    }
}

/// A point given either as `--a re[,im]` or as `--defect d [--arg t]`; the
/// second form reaches radii closer to 1 than a double can hold.
pub fn disc_point(a: Option<Complex64>, defect: Option<f64>, arg: f64) -> Result<DiscPoint, String> {
    match (a, defect) {
        (Some(_), Some(_)) => Err("give either --a or --defect, not both".into()),
        (Some(z), None) => DiscPoint::from_complex_interior(z).map_err(|e| e.to_string()),
        (None, Some(d)) => DiscPoint::interior(arg, d).map_err(|e| e.to_string()),
        (None, None) => Err("a point is required: --a re[,im] or --defect d".into()),
    }
}
