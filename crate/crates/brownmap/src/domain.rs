//! Membership test for the parameter domain, the boundary value delta_0,
//! and the map h on the whole plane.
//!
//! The domain is the set of lambda = alpha + i beta where the third
//! component ratio 1 - p T / D stays negative as delta -> 0+. There the
//! ratio has a unique positive zero delta_0 (it increases strictly in delta
//! and tends to 1), and h(lambda) = H1 + i H2 evaluated at delta_0. Outside,
//! h(lambda) = lambda - p / (i + G(lambda)) with G the Cauchy transform,
//! which is the same formula continued to delta = 0.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hmap::FreeSum;

/// Default residual tolerance for the delta_0 root solve.
pub const ROOT_RESIDUAL_TOL: f64 = 1e-12;

/// Bracket width target for the delta_0 bisection.
const ROOT_WIDTH_TOL: f64 = 1e-13;

const ROOT_MAX_ITERS: usize = 200;

/// Regularization ladder for the one-sided limit inside the a.c. support.
const LIMIT_DELTAS: [f64; 3] = [1e-3, 5e-4, 2.5e-4];

impl<'a> FreeSum<'a> {
    /// One-sided limit of 1 - p T / D as delta -> 0+ at (alpha, beta).
    ///
    /// Negative limits mean lambda lies in the parameter domain. At an atom
    /// of weight w the limit is 1 - p / w exactly. Strictly inside the a.c.
    /// support on the real axis the ratio diverges to minus infinity; the
    /// returned value is then a finite same-sign estimate from the smallest
    /// regularization step.
    pub fn limit_ratio(&self, alpha: f64, beta: f64) -> Result<f64> {
        if beta == 0.0 {
            if let Some(atom) = self.measure().atom_at(alpha) {
                return Ok(1.0 - self.rate() / atom.w);
            }
            if let Some((lo, hi)) = self.measure().ac_support() {
                if alpha >= lo && alpha <= hi {
                    return self.limit_ratio_extrapolated(alpha, beta);
                }
            }
        }
        self.h3_ratio(alpha, beta, 0.0)
    }

    /// Richardson extrapolation of the ratio over a halving delta ladder,
    /// with a divergence guard: a geometrically growing sequence keeps the
    /// sign of its trend instead of extrapolating.
    fn limit_ratio_extrapolated(&self, alpha: f64, beta: f64) -> Result<f64> {
        let r: Vec<f64> = LIMIT_DELTAS
            .iter()
            .map(|&d| self.h3_ratio(alpha, beta, d))
            .collect::<Result<_>>()?;
        let (d1, d2) = (r[1] - r[0], r[2] - r[1]);
        if d2.abs() < 1e-14 {
            return Ok(r[2]);
        }
        // Diverging like 1/delta: steps grow instead of shrinking.
        if d2.abs() >= 1.2 * d1.abs() {
            return Ok(r[2]);
        }
        // r(delta) ~ L + c delta^k; with halving steps, q = d1/d2 ~ 2^k.
        let q = d1 / d2;
        if q > 1.25 {
            Ok(r[2] + d2 / (q - 1.0))
        } else {
            Ok(r[2])
        }
    }

    /// True when alpha + i beta lies in the open parameter domain.
    pub fn is_in_domain(&self, alpha: f64, beta: f64) -> Result<bool> {
        Ok(self.limit_ratio(alpha, beta)? < 0.0)
    }

    /// The boundary value delta_0(lambda): the unique positive zero of
    /// delta -> 1 - p T / D, or 0 when the limit at 0+ is already
    /// nonnegative (lambda outside the domain or on its boundary).
    pub fn delta0(&self, alpha: f64, beta: f64) -> Result<f64> {
        self.delta0_with_tol(alpha, beta, ROOT_RESIDUAL_TOL)
    }

    /// delta_0 with an explicit residual tolerance.
    pub fn delta0_with_tol(&self, alpha: f64, beta: f64, residual_tol: f64) -> Result<f64> {
        if self.limit_ratio(alpha, beta)? >= 0.0 {
            return Ok(0.0);
        }
        // The ratio tends to 1, so doubling always finds a sign change.
        let mut hi = 1.0;
        let mut hi_val = self.h3_ratio(alpha, beta, hi)?;
        while hi_val <= 0.0 {
            hi *= 2.0;
            if hi > 1e9 {
                return Err(Error::InvalidConfig(format!(
                    "no sign change for delta0 at ({alpha}, {beta})"
                )));
            }
            hi_val = self.h3_ratio(alpha, beta, hi)?;
        }
        let mut lo = 0.0;
        let mut mid = 0.5 * hi;
        for _ in 0..ROOT_MAX_ITERS {
            mid = 0.5 * (lo + hi);
            let val = self.h3_ratio(alpha, beta, mid)?;
            if val > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo < ROOT_WIDTH_TOL * mid.max(1.0) && val.abs() < residual_tol {
                return Ok(mid);
            }
        }
        Ok(mid)
    }

    /// The map h at any point of the plane.
    ///
    /// Inside the domain this is H1 + i H2 at delta_0; outside it is
    /// lambda - p / (i + G(lambda)), continuously extended by h = lambda at
    /// real atoms that fall outside the domain.
    pub fn h_map(&self, lambda: Complex64) -> Result<Complex64> {
        let (alpha, beta) = (lambda.re, lambda.im);
        if self.limit_ratio(alpha, beta)? < 0.0 {
            let d0 = self.delta0(alpha, beta)?;
            let h = self.h_hat(alpha, beta, d0)?;
            return Ok(Complex64::new(h.h1, h.h2));
        }
        if beta == 0.0 && self.measure().atom_at(alpha).is_some() {
            // G blows up at the atom, so p / (i + G) -> 0.
            return Ok(lambda);
        }
        let g = self.measure().cauchy_transform(lambda)?;
        Ok(lambda - self.rate() / (Complex64::new(0.0, 1.0) + g))
    }
}
