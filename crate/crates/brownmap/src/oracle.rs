//! Closed forms for one exactly solvable model: the symmetric two-point
//! input (delta_{-1} + delta_{1}) / 2 at rate 1.
//!
//! Every quantity the numeric pipeline produces has an independent closed
//! form here: domain membership, the boundary value delta_0, the map h, its
//! inverse on the image, and the push-forward density. The `oracle-check`
//! command and the acceptance tests compare the two implementations.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest imaginary part reached by the image set: the positive root of
/// t^3 - 3 t^2 - t - 1.
pub const T_MAX: f64 = 3.382_975_767_906_237_5;

/// Preimage height of the top point: beta with h(i beta) = i T_MAX.
pub const BETA_STAR: f64 = 1.543_689_012_692_076_4;

/// delta_0 at lambda = 1 (an atom location), sqrt(sqrt(5) - 2).
pub const DELTA0_AT_ONE: f64 = 0.485_868_271_756_645_76;

/// Sign test for the parameter domain: negative inside, zero on the
/// boundary, positive outside.
///
/// P(alpha, beta) = (alpha^2 + beta^2 - beta + 1)^2 - (4 alpha^2 + beta^2 + 1).
pub fn domain_poly(alpha: f64, beta: f64) -> f64 {
    let a = alpha * alpha + beta * beta - beta + 1.0;
    a * a - (4.0 * alpha * alpha + beta * beta + 1.0)
}

/// True when alpha + i beta lies strictly inside the parameter domain.
pub fn in_domain(alpha: f64, beta: f64) -> bool {
    domain_poly(alpha, beta) < 0.0
}

/// The boundary value delta_0(lambda): the positive zero of the third
/// component ratio, in closed form
///
/// delta_0^2 = sqrt(4 alpha^2 + beta^2 + 1) - (alpha^2 + beta^2 - beta + 1).
///
/// Outside the domain the right side is negative and the request fails.
pub fn delta0(alpha: f64, beta: f64) -> Result<f64> {
    let a = alpha * alpha + beta * beta - beta + 1.0;
    let inner = (4.0 * alpha * alpha + beta * beta + 1.0).sqrt() - a;
    if inner < -1e-10 {
        return Err(Error::ComplexResult { residual: inner });
    }
    Ok(inner.max(0.0).sqrt())
}

/// The Cauchy transform of the two-point input, G(lambda) = lambda / (lambda^2 - 1).
pub fn cauchy_transform(lambda: Complex64) -> Complex64 {
    lambda / (lambda * lambda - 1.0)
}

/// The map h on the whole plane.
///
/// Inside the domain (delta_0 > 0) the subordination closed form applies:
///
/// h(alpha + i beta) = (sqrt(4 alpha^2 + beta^2 + 1) + beta + 4 i alpha beta)
///                     / (2 alpha - i).
///
/// Outside, h(lambda) = lambda - 1 / (i + G(lambda)). The two branches agree
/// on the boundary.
pub fn h(lambda: Complex64) -> Complex64 {
    let (alpha, beta) = (lambda.re, lambda.im);
    if domain_poly(alpha, beta) < 0.0 {
        let root = (4.0 * alpha * alpha + beta * beta + 1.0).sqrt();
        let numer = Complex64::new(root + beta, 4.0 * alpha * beta);
        numer / Complex64::new(2.0 * alpha, -1.0)
    } else {
        lambda - 1.0 / (Complex64::new(0.0, 1.0) + cauchy_transform(lambda))
    }
}

/// Sign test for the image set at s + i t with t > 0: negative inside.
///
/// M(s, t) = 4 (s^2 - 1) t^3 + 2 (s^2 + 1) (s^2 - 1)^2 t^2 + (s^2 - 1)^4
///           + (s^4 - s^2 + 1) t^4.
pub fn image_poly(s: f64, t: f64) -> f64 {
    let s2 = s * s;
    let e = s2 - 1.0;
    4.0 * e * t.powi(3)
        + 2.0 * (s2 + 1.0) * e * e * t * t
        + e.powi(4)
        + (s2 * s2 - s2 + 1.0) * t.powi(4)
}

/// True when s + i t lies strictly inside the image set.
pub fn in_image(s: f64, t: f64) -> bool {
    t > 0.0 && image_poly(s, t) < 0.0
}

/// Inverse of h on the open image set:
///
/// alpha = s t / (2 (1 - s^2)),  beta = (s^2 + t^2 - 1) / (2 t).
pub fn h_inverse(s: f64, t: f64) -> Result<Complex64> {
    if !in_image(s, t) {
        return Err(Error::NotInImage { re: s, im: t });
    }
    let alpha = s * t / (2.0 * (1.0 - s * s));
    let beta = (s * s + t * t - 1.0) / (2.0 * t);
    Ok(Complex64::new(alpha, beta))
}

/// Push-forward density at s + i t; zero outside the image set.
///
/// f(s, t) = (1 / 4 pi) [ (1 + s^2) / (1 - s^2)^2 + 2 (1 - s^2) / t^3 - 2 / t ].
pub fn density(s: f64, t: f64) -> f64 {
    if !in_image(s, t) {
        return 0.0;
    }
    let s2 = s * s;
    let e = 1.0 - s2;
    ((1.0 + s2) / (e * e) + 2.0 * e / t.powi(3) - 2.0 / t) / (4.0 * std::f64::consts::PI)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn domain_poly_signs() {
        // Atom locations sit strictly inside at rate 1.
        assert!(in_domain(1.0, 0.0));
        assert!(in_domain(-1.0, 0.0));
        assert!(in_domain(0.0, 0.5));
        // The origin is a boundary point.
        assert_eq!(domain_poly(0.0, 0.0), 0.0);
        // Far away and just below the origin are outside.
        assert!(!in_domain(3.0, 0.0));
        assert!(!in_domain(0.0, -0.1));
        // The domain dips below the real axis near the atoms.
        assert!(in_domain(1.0, -0.2));
    }

    #[test]
    fn delta0_frozen_value_at_atom() {
        let d = delta0(1.0, 0.0).unwrap();
        assert_relative_eq!(d, DELTA0_AT_ONE, max_relative = 1e-15);
        assert_relative_eq!(d * d, 5f64.sqrt() - 2.0, max_relative = 1e-14);
    }

    #[test]
    fn delta0_zero_on_boundary_and_fails_outside() {
        assert_eq!(delta0(0.0, 0.0).unwrap(), 0.0);
        assert!(matches!(delta0(3.0, 0.0), Err(Error::ComplexResult { .. })));
    }

    #[test]
    fn h_frozen_value_at_atom() {
        let z = h(Complex64::new(1.0, 0.0));
        assert_relative_eq!(z.re, 2.0 / 5f64.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(z.im, 1.0 / 5f64.sqrt(), max_relative = 1e-15);
    }

    #[test]
    fn h_branches_agree_on_boundary() {
        // The origin is on the boundary; both branch formulas give i.
        let inside_form = Complex64::new(1.0, 0.0) / Complex64::new(0.0, -1.0);
        assert_relative_eq!(inside_form.im, 1.0);
        let z = h(Complex64::new(0.0, 0.0));
        assert_relative_eq!(z.re, 0.0);
        assert_relative_eq!(z.im, 1.0, max_relative = 1e-15);
    }

    #[test]
    fn top_of_image_comes_from_beta_star() {
        let z = h(Complex64::new(0.0, BETA_STAR));
        assert_relative_eq!(z.re, 0.0);
        assert_relative_eq!(z.im, T_MAX, max_relative = 1e-14);
        // T_MAX is the root of t^3 - 3 t^2 - t - 1.
        let t = T_MAX;
        assert!((t.powi(3) - 3.0 * t * t - t - 1.0).abs() < 1e-12);
    }

    #[test]
    fn image_poly_boundary_points() {
        // Bottom of the central lobe at s = 0 is t = 1; top is T_MAX.
        assert_relative_eq!(image_poly(0.0, 1.0), 0.0);
        assert!(image_poly(0.0, T_MAX).abs() < 1e-11);
        assert!(in_image(0.0, 2.0));
        assert!(!in_image(0.0, 0.5));
        // Horn tips are isolated zeros, not interior points.
        assert_eq!(image_poly(1.0, 0.0), 0.0);
        assert!(!in_image(1.0, 0.0));
        // Thin horn interior near s = 0.95.
        assert!(in_image(0.95, 0.2));
    }

    #[test]
    fn h_inverse_round_trips() {
        for &(s, t) in &[(0.0, 2.0), (0.5, 1.2), (0.95, 0.2), (-0.3, 2.8)] {
            let lambda = h_inverse(s, t).unwrap();
            let z = h(lambda);
            assert_relative_eq!(z.re, s, epsilon = 1e-13);
            assert_relative_eq!(z.im, t, epsilon = 1e-13);
        }
    }

    #[test]
    fn h_inverse_of_horn_point_lies_below_axis() {
        let lambda = h_inverse(0.95, 0.2).unwrap();
        assert_relative_eq!(lambda.re, 0.974_358_974_358_974_3, max_relative = 1e-12);
        assert_relative_eq!(lambda.im, -0.143_75, max_relative = 1e-12);
        assert!(in_domain(lambda.re, lambda.im));
    }

    #[test]
    fn h_inverse_rejects_outside_points() {
        assert!(matches!(h_inverse(0.0, 0.5), Err(Error::NotInImage { .. })));
        assert!(matches!(h_inverse(2.0, 1.0), Err(Error::NotInImage { .. })));
    }

    #[test]
    fn density_frozen_value_and_support() {
        // f(0, 2) = (1/4pi)(1 + 2/8 - 1) = 1 / (16 pi).
        assert_relative_eq!(
            density(0.0, 2.0),
            1.0 / (16.0 * std::f64::consts::PI),
            max_relative = 1e-15
        );
        assert!(density(0.0, 0.5) == 0.0);
        assert!(density(0.0, -2.0) == 0.0);
        // Horns carry large but finite density.
        let f = density(0.95, 0.2);
        assert!(f > 1.0, "horn density {f}");
        assert!(f.is_finite());
    }

    #[test]
    fn density_positive_inside_sample_grid() {
        let mut checked = 0;
        for i in 0..40 {
            for j in 1..40 {
                let s = -1.2 + 2.4 * (i as f64) / 39.0;
                let t = 3.6 * (j as f64) / 39.0;
                if in_image(s, t) {
                    assert!(density(s, t) > 0.0, "f({s}, {t}) not positive");
                    checked += 1;
                }
            }
        }
        assert!(checked > 100, "grid too sparse, only {checked} interior points");
    }
}
