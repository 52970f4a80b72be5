//! Legendre polynomials, the three log-series appearing in the area
//! expansion, and residuals of the generating-function identities.

use crate::error::{Error, Result};

/// P_l(z) by the three-term upward recurrence; stable on [-1, 1].
pub fn legendre(l: usize, z: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&z) {
        return Err(Error::InvalidArgument(format!(
            "legendre argument {z} outside [-1, 1]"
        )));
    }
    Ok(legendre_unchecked(l, z))
}

pub(crate) fn legendre_unchecked(l: usize, z: f64) -> f64 {
    match l {
        0 => 1.0,
        1 => z,
        _ => {
            let mut p0 = 1.0;
            let mut p1 = z;
            for j in 2..=l {
                let jf = j as f64;
                let p2 = ((2.0 * jf - 1.0) * z * p1 - (jf - 1.0) * p0) / jf;
                p0 = p1;
                p1 = p2;
            }
            p1
        }
    }
}

/// The three series in r^-2l-2 from the area expansion:
/// A has coefficients 1/(l+2), B has 1/(2l+1), and C has
/// (l-1)/((l+2)(2l+1)) = 1/(l+2) - 1/(2l+1) termwise.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeriesKind {
    A,
    B,
    C,
}

fn check_r(r: f64) -> Result<()> {
    if r <= 1.0 {
        return Err(Error::Domain(format!("series require r > 1, got {r}")));
    }
    Ok(())
}

/// Closed form of the full series.
///
/// A sums to -1 - r^2 log((r^2-1)/r^2), B to (1/2r) log((r+1)/(r-1)),
/// and C = A - B. The logs are evaluated through ln_1p so the large-r
/// cancellation structure stays accurate.
pub fn series_closed_form(kind: SeriesKind, r: f64) -> Result<f64> {
    check_r(r)?;
    let a = || -1.0 - r * r * (-1.0 / (r * r)).ln_1p();
    let b = || 0.5 / r * (2.0 / (r - 1.0)).ln_1p();
    Ok(match kind {
        SeriesKind::A => a(),
        SeriesKind::B => b(),
        SeriesKind::C => a() - b(),
    })
}

fn series_coefficient(kind: SeriesKind, l: usize) -> f64 {
    let lf = l as f64;
    match kind {
        SeriesKind::A => 1.0 / (lf + 2.0),
        SeriesKind::B => 1.0 / (2.0 * lf + 1.0),
        SeriesKind::C => (lf - 1.0) / ((lf + 2.0) * (2.0 * lf + 1.0)),
    }
}

/// Partial sum of the first `terms` series terms (l = 0 .. terms-1).
pub fn series_truncated(kind: SeriesKind, r: f64, terms: usize) -> Result<f64> {
    check_r(r)?;
    if terms < 1 {
        return Err(Error::InvalidArgument("need at least one term".into()));
    }
    let q = 1.0 / (r * r);
    let mut power = q;
    let mut sum = 0.0;
    for l in 0..terms {
        sum += series_coefficient(kind, l) * power;
        power *= q;
    }
    Ok(sum)
}

/// Term count making the geometric tail r^-2n drop below 1e-14, capped at 1e4.
pub fn series_auto_terms(r: f64) -> usize {
    let n = (-14.0 * std::f64::consts::LN_10 / (2.0 * (1.0 / r).ln())).ceil();
    (n as usize).clamp(1, 10_000)
}

/// Absolute residuals of the two generating-function identities at (xi, y):
/// (i)  |y+xi|^-1        vs sum_{l<=L} |xi|^-l-1 P_l(-<y,xi>/|xi|)
/// (ii) |y+xi|^-3 <xi,y+xi> vs sum_{l<=L} (l+1) |xi|^-l-1 P_l(-<y,xi>/|xi|)
pub fn generating_residual(xi: [f64; 3], y: [f64; 3], l_max: usize) -> Result<(f64, f64)> {
    let xin = (xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]).sqrt();
    if xin <= 1.0 {
        return Err(Error::Domain(format!(
            "generating series requires |xi| > 1, got {xin}"
        )));
    }
    let w = [y[0] + xi[0], y[1] + xi[1], y[2] + xi[2]];
    let wn = (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt();
    let dot = (y[0] * xi[0] + y[1] * xi[1] + y[2] * xi[2]) / xin;
    let z = (-dot).clamp(-1.0, 1.0);
    let mut sum_i = 0.0;
    let mut sum_ii = 0.0;
    let mut power = 1.0 / xin;
    for l in 0..=l_max {
        let p = legendre_unchecked(l, z);
        sum_i += power * p;
        sum_ii += (l as f64 + 1.0) * power * p;
        power /= xin;
    }
    let lhs_i = 1.0 / wn;
    let lhs_ii = (xi[0] * w[0] + xi[1] * w[1] + xi[2] * w[2]) / (wn * wn * wn);
    Ok(((lhs_i - sum_i).abs(), (lhs_ii - sum_ii).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::RadialRule;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    #[test]
    fn legendre_low_orders() {
        assert_abs_diff_eq!(legendre(0, 0.3).unwrap(), 1.0);
        assert_abs_diff_eq!(legendre(1, -0.7).unwrap(), -0.7);
        assert_abs_diff_eq!(legendre(2, 0.5).unwrap(), -0.125);
        assert!(matches!(legendre(3, 1.2), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn legendre_stays_bounded() {
        for l in [5, 20, 60] {
            for i in 0..=200 {
                let z = -1.0 + i as f64 / 100.0;
                assert!(legendre(l, z).unwrap().abs() <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn closed_forms_match_frozen_values() {
        // digits frozen from a 50-digit evaluation of the closed forms
        let cases = [
            (SeriesKind::A, 1.5, 0.322_519_996_029_767_77),
            (SeriesKind::B, 1.5, 0.536_479_304_144_700_12),
            (SeriesKind::C, 1.5, -0.213_959_308_114_932_36),
            (SeriesKind::A, 2.0, 0.150_728_289_807_123_71),
            (SeriesKind::B, 2.0, 0.274_653_072_167_027_42),
            (SeriesKind::C, 2.0, -0.123_924_782_359_903_71),
            (SeriesKind::A, 5.0, 0.020_549_863_006_378_24),
            (SeriesKind::B, 5.0, 0.040_546_510_810_816_44),
            (SeriesKind::C, 5.0, -0.019_996_647_804_438_2),
        ];
        for (kind, r, want) in cases {
            assert_abs_diff_eq!(series_closed_form(kind, r).unwrap(), want, epsilon = 1e-14);
        }
        // B(2) is exactly (1/4) ln 3
        assert_abs_diff_eq!(
            series_closed_form(SeriesKind::B, 2.0).unwrap(),
            0.25 * 3.0f64.ln(),
            epsilon = 1e-16
        );
    }

    #[test]
    fn truncated_low_term_counts() {
        assert_abs_diff_eq!(
            series_truncated(SeriesKind::B, 2.0, 1).unwrap(),
            0.25,
            epsilon = 1e-16
        );
        assert_abs_diff_eq!(
            series_truncated(SeriesKind::A, 2.0, 2).unwrap(),
            1.0 / 8.0 + 1.0 / 48.0,
            epsilon = 1e-16
        );
    }

    #[test]
    fn truncated_converges_to_closed_form() {
        for kind in [SeriesKind::A, SeriesKind::B, SeriesKind::C] {
            for r in [1.5, 2.0, 5.0] {
                let n = series_auto_terms(r).max(400);
                let t = series_truncated(kind, r, n).unwrap();
                let c = series_closed_form(kind, r).unwrap();
                assert_abs_diff_eq!(t, c, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn truncation_error_decays_geometrically() {
        for r in [1.5, 2.0, 5.0] {
            let rate = 1.0 / (r * r);
            for kind in [SeriesKind::A, SeriesKind::B, SeriesKind::C] {
                let c = series_closed_form(kind, r).unwrap();
                for n in [4usize, 8, 16] {
                    let e_n = (series_truncated(kind, r, n).unwrap() - c).abs();
                    if e_n < 1e-14 * c.abs() {
                        // tail already below f64 rounding noise
                        continue;
                    }
                    let e_n1 = (series_truncated(kind, r, n + 1).unwrap() - c).abs();
                    // one extra term shrinks the tail by about r^-2
                    assert!(e_n1 <= e_n * rate * 1.5, "kind {kind:?} r {r} n {n}");
                }
            }
        }
    }

    #[test]
    fn c_coefficients_split_termwise() {
        for l in 0..=100i64 {
            // exact rational identity (l-1)/((l+2)(2l+1)) = 1/(l+2) - 1/(2l+1)
            let lhs = (l - 1) * (l + 2) * (2 * l + 1);
            let rhs = ((2 * l + 1) - (l + 2)) * (l + 2) * (2 * l + 1);
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn legendre_norms_via_radial_rule() {
        // int_{-1}^{1} P_l(-z)^2 dz = 2/(2l+1), radial rule mapped to [-1,1]
        let rule = RadialRule::new(48).unwrap();
        for l in 0..=20usize {
            let mut sum = 0.0;
            for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
                let z = 2.0 * x - 1.0;
                let p = legendre(l, -z).unwrap();
                sum += 2.0 * w * p * p;
            }
            assert_relative_eq!(sum, 2.0 / (2.0 * l as f64 + 1.0), max_relative = 1e-13);
        }
    }

    #[test]
    fn generating_residuals_at_reference_point() {
        // truncation at L = 30 for |xi| = 2, aligned y: tails are the exact
        // geometric remainders (frozen from a high-precision evaluation)
        let (r1, r2) = generating_residual([0.0, 0.0, 2.0], [0.0, 0.0, 1.0], 30).unwrap();
        assert!(r1 <= 2.0e-10, "residual(i) = {r1}");
        assert!(r2 <= 5.0e-9, "residual(ii) = {r2}");
        assert_relative_eq!(r1, 1.552_204_291e-10, max_relative = 1e-5);
        assert_relative_eq!(r2, 4.915_313_588e-9, max_relative = 1e-5);
    }

    #[test]
    fn generating_residual_single_term() {
        let (r1, _) = generating_residual([0.0, 0.0, 2.0], [0.0, 0.0, -1.0], 0).unwrap();
        assert_abs_diff_eq!(r1, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn generating_residuals_decay_geometrically() {
        let xi = [0.0, 0.0, 2.0];
        let y = [0.6, 0.0, 0.8];
        let mut prev = f64::INFINITY;
        for l in [5usize, 10, 15, 20, 25] {
            let (r1, r2) = generating_residual(xi, y, l).unwrap();
            let envelope = r1.max(r2);
            // five extra terms shrink the envelope by at least 2^4
            assert!(envelope < prev / 16.0, "L={l}: {envelope} vs {prev}");
            prev = envelope;
        }
    }

    #[test]
    fn generating_residual_rejects_inside_unit_ball() {
        assert!(matches!(
            generating_residual([0.3, 0.0, 0.4], [0.0, 0.0, 1.0], 5),
            Err(Error::Domain(_))
        ));
    }

    proptest! {
        #[test]
        fn truncated_approaches_closed(r in 1.3f64..6.0, kind_idx in 0usize..3) {
            let kind = [SeriesKind::A, SeriesKind::B, SeriesKind::C][kind_idx];
            let n = series_auto_terms(r);
            let t = series_truncated(kind, r, n).unwrap();
            let c = series_closed_form(kind, r).unwrap();
            prop_assert!((t - c).abs() < 1e-12);
        }

        #[test]
        fn legendre_recurrence_consistency(z in -1.0f64..1.0, l in 2usize..40) {
            // Bonnet recurrence holds pointwise
            let lf = l as f64;
            let lhs = (lf + 1.0) * legendre(l + 1, z).unwrap();
            let rhs = (2.0 * lf + 1.0) * z * legendre(l, z).unwrap() - lf * legendre(l - 1, z).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-12);
        }
    }
}
