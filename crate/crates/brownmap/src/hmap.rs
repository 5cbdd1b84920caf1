//! The regularized subordination map for the sum x + iy, with y free
//! Poisson of the given rate.
//!
//! For parameters (alpha, beta, delta) the map is
//!
//! ```text
//! H1 = alpha - p S / D
//! H2 = beta + p (1 - beta T) / D
//! H3 = delta (1 - p T / D)
//! ```
//!
//! with S, T, D the standard integrals of the input measure. Everything the
//! domain test, the boundary tracer, and the density inversion need reduces
//! to this map, its third-component ratio, and its 3x3 Jacobian.

use crate::error::{Error, Result};
use crate::measure::SpectralMeasure;

/// The model x + iy: an input measure for x and a free Poisson rate for y.
#[derive(Debug, Clone, Copy)]
pub struct FreeSum<'a> {
    measure: &'a SpectralMeasure,
    rate: f64,
}

/// Value of the regularized map at one parameter point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HHat {
    pub h1: f64,
    pub h2: f64,
    pub h3: f64,
}

/// Jacobian of (H1, H2, H3) with respect to (alpha, beta, delta).
#[derive(Debug, Clone, Copy)]
pub struct Jacobian3 {
    /// Row-major entries m[i][j] = dHi/dxj.
    pub m: [[f64; 3]; 3],
}

impl<'a> FreeSum<'a> {
    pub fn new(measure: &'a SpectralMeasure, rate: f64) -> Result<Self> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::InvalidConfig(format!("rate must be positive, got {rate}")));
        }
        Ok(Self { measure, rate })
    }

    pub fn measure(&self) -> &'a SpectralMeasure {
        self.measure
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// The map itself.
    pub fn h_hat(&self, alpha: f64, beta: f64, delta: f64) -> Result<HHat> {
        let v = self.measure.std_integrals(alpha, beta, delta)?;
        Ok(self.assemble(alpha, beta, delta, v.s, v.t, v.d))
    }

    /// The factor multiplying delta in the third component: 1 - p T / D.
    ///
    /// Its sign at delta -> 0+ decides membership in the parameter domain,
    /// and its unique positive zero (when one exists) is the boundary value
    /// delta_0 used by the density inversion.
    pub fn h3_ratio(&self, alpha: f64, beta: f64, delta: f64) -> Result<f64> {
        let v = self.measure.std_integrals(alpha, beta, delta)?;
        Ok(1.0 - self.rate * v.t / v.d)
    }

    /// Map value and Jacobian from a single pass over the measure.
    pub fn h_hat_and_jacobian(&self, alpha: f64, beta: f64, delta: f64) -> Result<(HHat, Jacobian3)> {
        let p = self.rate;
        let sp = self.measure.std_partials(alpha, beta, delta)?;
        let (s, t, d) = (sp.vals.s, sp.vals.t, sp.vals.d);
        let (dd_da, dd_db, dd_dd) = sp.d_partials(beta, delta);
        let one_bt = 1.0 - beta * t;
        let d2 = d * d;

        // Quotient rule on each component; D > 0 always.
        let j11 = 1.0 - p * (sp.ds_dalpha * d - s * dd_da) / d2;
        let j12 = -p * (sp.ds_dbeta * d - s * dd_db) / d2;
        let j13 = -p * (sp.ds_ddelta * d - s * dd_dd) / d2;

        let j21 = p * ((-beta * sp.dt_dalpha) * d - one_bt * dd_da) / d2;
        let j22 = 1.0 + p * ((-t - beta * sp.dt_dbeta) * d - one_bt * dd_db) / d2;
        let j23 = p * ((-beta * sp.dt_ddelta) * d - one_bt * dd_dd) / d2;

        let j31 = -p * delta * (sp.dt_dalpha * d - t * dd_da) / d2;
        let j32 = -p * delta * (sp.dt_dbeta * d - t * dd_db) / d2;
        let j33 = 1.0 - p * ((t + delta * sp.dt_ddelta) * d - delta * t * dd_dd) / d2;

        let value = self.assemble(alpha, beta, delta, s, t, d);
        let jac = Jacobian3 { m: [[j11, j12, j13], [j21, j22, j23], [j31, j32, j33]] };
        Ok((value, jac))
    }

    /// Jacobian alone.
    pub fn jacobian_h_hat(&self, alpha: f64, beta: f64, delta: f64) -> Result<Jacobian3> {
        Ok(self.h_hat_and_jacobian(alpha, beta, delta)?.1)
    }

    fn assemble(&self, alpha: f64, beta: f64, delta: f64, s: f64, t: f64, d: f64) -> HHat {
        let p = self.rate;
        HHat {
            h1: alpha - p * s / d,
            h2: beta + p * (1.0 - beta * t) / d,
            h3: delta * (1.0 - p * t / d),
        }
    }
}

impl Jacobian3 {
    pub fn det(&self) -> f64 {
        let m = &self.m;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Solve J x = rhs by Cramer's rule, refusing near-singular systems.
    pub fn solve(&self, rhs: [f64; 3]) -> Result<[f64; 3]> {
        let det = self.det();
        let scale = self
            .m
            .iter()
            .flatten()
            .fold(0.0f64, |acc, &v| acc.max(v.abs()))
            .max(1e-30);
        if det.abs() < 1e-14 * scale * scale * scale {
            return Err(Error::JacobianSingular { det });
        }
        let col = |j: usize, r: &[f64; 3]| {
            let mut c = *self;
            for i in 0..3 {
                c.m[i][j] = r[i];
            }
            c.det() / det
        };
        Ok([col(0, &rhs), col(1, &rhs), col(2, &rhs)])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn bernoulli() -> SpectralMeasure {
        SpectralMeasure::symmetric_two_point(1.0).unwrap()
    }

    #[test]
    fn rejects_nonpositive_rate() {
        let m = bernoulli();
        assert!(FreeSum::new(&m, 0.0).is_err());
        assert!(FreeSum::new(&m, -1.0).is_err());
        assert!(FreeSum::new(&m, f64::NAN).is_err());
    }

    #[test]
    fn h_hat_hand_value() {
        // At (0, 0, 1): S = 0, T = 1/2, D = 5/4.
        let m = bernoulli();
        let fs = FreeSum::new(&m, 1.0).unwrap();
        let h = fs.h_hat(0.0, 0.0, 1.0).unwrap();
        assert_relative_eq!(h.h1, 0.0);
        assert_relative_eq!(h.h2, 0.8, max_relative = 1e-15);
        assert_relative_eq!(h.h3, 0.6, max_relative = 1e-15);
        assert_relative_eq!(fs.h3_ratio(0.0, 0.0, 1.0).unwrap(), 0.6, max_relative = 1e-15);
    }

    #[test]
    fn h_hat_large_delta_limits() {
        let m = bernoulli();
        for rate in [0.5, 1.0, 2.0] {
            let fs = FreeSum::new(&m, rate).unwrap();
            let (alpha, beta, delta) = (0.3, -0.2, 1e5);
            let h = fs.h_hat(alpha, beta, delta).unwrap();
            assert_relative_eq!(h.h1, alpha, epsilon = 1e-8);
            assert_relative_eq!(h.h2, beta + rate, epsilon = 1e-8);
            assert_relative_eq!(h.h3 / delta, 1.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn jacobian_exact_rational_point() {
        // At (0, 0, 1), rate 1: all integrals are rational and the Jacobian is
        // [[1, 0, 0], [0, 31/25, 0], [0, -8/25, 1]] with determinant 31/25.
        let m = bernoulli();
        let fs = FreeSum::new(&m, 1.0).unwrap();
        let j = fs.jacobian_h_hat(0.0, 0.0, 1.0).unwrap();
        let expect = [[1.0, 0.0, 0.0], [0.0, 31.0 / 25.0, 0.0], [0.0, -8.0 / 25.0, 1.0]];
        for i in 0..3 {
            for k in 0..3 {
                assert_relative_eq!(j.m[i][k], expect[i][k], epsilon = 1e-15);
            }
        }
        assert_relative_eq!(j.det(), 31.0 / 25.0, max_relative = 1e-15);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let m = bernoulli();
        let fs = FreeSum::new(&m, 0.7).unwrap();
        let (alpha, beta, delta) = (0.4, 0.3, 0.7);
        let j = fs.jacobian_h_hat(alpha, beta, delta).unwrap();
        let h = 1e-6;
        let dirs = [(h, 0.0, 0.0), (0.0, h, 0.0), (0.0, 0.0, h)];
        for (col, &(da, db, dd)) in dirs.iter().enumerate() {
            let plus = fs.h_hat(alpha + da, beta + db, delta + dd).unwrap();
            let minus = fs.h_hat(alpha - da, beta - db, delta - dd).unwrap();
            let fd = [
                (plus.h1 - minus.h1) / (2.0 * h),
                (plus.h2 - minus.h2) / (2.0 * h),
                (plus.h3 - minus.h3) / (2.0 * h),
            ];
            for row in 0..3 {
                assert_relative_eq!(j.m[row][col], fd[row], epsilon = 1e-7);
            }
        }
    }

    #[test]
    fn jacobian_third_column_vanishes_at_delta_zero() {
        // H1, H2 are even in delta, so dH1/ddelta = dH2/ddelta = 0 at delta = 0
        // and the matrix is block triangular there.
        let m = bernoulli();
        let fs = FreeSum::new(&m, 1.0).unwrap();
        let j = fs.jacobian_h_hat(0.3, 0.4, 0.0).unwrap();
        assert_eq!(j.m[0][2], 0.0);
        assert_eq!(j.m[1][2], 0.0);
        assert_eq!(j.m[2][0], 0.0);
        assert_eq!(j.m[2][1], 0.0);
        let block = j.m[0][0] * j.m[1][1] - j.m[0][1] * j.m[1][0];
        assert_relative_eq!(j.det(), block * j.m[2][2], max_relative = 1e-12);
    }

    #[test]
    fn solve_recovers_known_vector() {
        let m = bernoulli();
        let fs = FreeSum::new(&m, 1.3).unwrap();
        let j = fs.jacobian_h_hat(0.5, 0.2, 0.8).unwrap();
        let x = [0.3, -1.1, 0.7];
        let rhs = [
            j.m[0][0] * x[0] + j.m[0][1] * x[1] + j.m[0][2] * x[2],
            j.m[1][0] * x[0] + j.m[1][1] * x[1] + j.m[1][2] * x[2],
            j.m[2][0] * x[0] + j.m[2][1] * x[1] + j.m[2][2] * x[2],
        ];
        let got = j.solve(rhs).unwrap();
        for i in 0..3 {
            assert_relative_eq!(got[i], x[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn solve_rejects_singular_matrix() {
        let j = Jacobian3 { m: [[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [0.5, 1.0, 1.5]] };
        assert!(matches!(j.solve([1.0, 0.0, 0.0]), Err(Error::JacobianSingular { .. })));
    }
}
