//! Inversion of h on its image and evaluation of the push-forward density.
//!
//! A point z = s + i t with t > 0 lies in the image set exactly when its
//! preimage under h falls inside the parameter domain with delta_0 > 0. The
//! density there combines the 2x2 Jacobian of h at the preimage with the
//! preimage height:
//!
//! ```text
//! f(s, t) = (1 / 4 pi) [ (2 / t) tr(J_h^{-1}) - 2 / t - 2 beta / t^2 ]
//! ```
//!
//! J_h adds the implicit motion of delta_0 to the explicit partials:
//! J_h[i][j] = dHi/dxj - dHi/ddelta * (dH3/dxj) / (dH3/ddelta).
//!
//! The inversion runs a damped 3D Newton solve on (H1 - s, H2 - t, H3) as
//! the fast path, then falls back to a 2D Newton solve over lambda alone
//! (with delta_0 re-solved each step), then to a fixed ladder of alternate
//! starting points. A converged preimage is accepted on its residual only,
//! so the order of attempts never changes the answer, only the cost.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::config::{Tolerances, Window};
use crate::error::{Error, Result};
use crate::hmap::FreeSum;

/// Newton iterations cap for both solvers.
const MAX_ITERS: usize = 60;

/// Step halvings cap inside one line search.
const MAX_HALVINGS: usize = 20;

/// A converged delta below this is the spurious delta = 0 root of H3.
const DELTA_FLOOR: f64 = 1e-9;

/// Preimage of an image point: h(alpha + i beta) = z with this delta_0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preimage {
    pub alpha: f64,
    pub beta: f64,
    pub delta0: f64,
}

/// One evaluated grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityPoint {
    pub s: f64,
    pub t: f64,
    pub inside: bool,
    pub alpha: f64,
    pub beta: f64,
    pub delta0: f64,
    pub f: f64,
}

impl DensityPoint {
    fn outside(s: f64, t: f64) -> Self {
        Self { s, t, inside: false, alpha: 0.0, beta: 0.0, delta0: 0.0, f: 0.0 }
    }
}

/// Midpoint-rule density grid over a window.
#[derive(Debug, Clone)]
pub struct DensityGrid {
    pub window: Window,
    pub resolution: usize,
    /// Row-major, rows ordered by increasing t, columns by increasing s.
    pub points: Vec<DensityPoint>,
    /// Sum of f times cell area over the grid.
    pub total_mass: f64,
    /// Cells where the inversion failed outright (not merely outside).
    pub failures: usize,
}

impl DensityGrid {
    pub fn point(&self, col: usize, row: usize) -> &DensityPoint {
        &self.points[row * self.resolution + col]
    }

    pub fn cell_area(&self) -> f64 {
        let n = self.resolution as f64;
        (self.window.width() / n) * (self.window.height() / n)
    }
}

impl<'a> FreeSum<'a> {
    /// h and its 2x2 Jacobian with respect to (alpha, beta), following
    /// delta_0 implicitly inside the domain and fixing delta = 0 outside.
    /// Also returns the delta_0 used.
    pub fn h_with_jacobian(
        &self,
        lambda: Complex64,
        root_tol: f64,
    ) -> Result<(Complex64, [[f64; 2]; 2], f64)> {
        let (alpha, beta) = (lambda.re, lambda.im);
        let inside = self.limit_ratio(alpha, beta)? < 0.0;
        let d0 = if inside { self.delta0_with_tol(alpha, beta, root_tol)? } else { 0.0 };
        let (h, j3) = self.h_hat_and_jacobian(alpha, beta, d0)?;
        let jh = if inside { jh_from_j3(&j3.m)? } else { [[j3.m[0][0], j3.m[0][1]], [j3.m[1][0], j3.m[1][1]]] };
        Ok((Complex64::new(h.h1, h.h2), jh, d0))
    }

    /// The 2x2 Jacobian of h at a known interior preimage.
    pub fn jacobian_h(&self, alpha: f64, beta: f64, delta0: f64) -> Result<[[f64; 2]; 2]> {
        let (_, j3) = self.h_hat_and_jacobian(alpha, beta, delta0)?;
        if delta0 > 0.0 {
            jh_from_j3(&j3.m)
        } else {
            Ok([[j3.m[0][0], j3.m[0][1]], [j3.m[1][0], j3.m[1][1]]])
        }
    }

    /// Find the interior preimage of z, or None when z is outside the image
    /// set. Errors only when no attempt could settle the question.
    ///
    /// `seed` accelerates grid sweeps; a wrong seed cannot change the
    /// answer because any accepted preimage is verified by its residual.
    pub fn h_inverse(
        &self,
        z: Complex64,
        seed: Option<&Preimage>,
        tol: Tolerances,
    ) -> Result<Option<Preimage>> {
        if z.im <= 0.0 {
            return Ok(None);
        }
        if let Some(p) = seed {
            if p.delta0 > DELTA_FLOOR {
                if let Some(pre) = self.newton3(z, [p.alpha, p.beta, p.delta0], tol.newton) {
                    return Ok(Some(pre));
                }
            }
        }
        if let Some(pre) = self.newton3(z, [z.re, z.im, 0.5 * self.rate()], tol.newton) {
            return Ok(Some(pre));
        }

        // 2D attempts: robust but slower, and able to certify "outside".
        let (s, t) = (z.re, z.im);
        let seeds2 = [
            Complex64::new(s, t),
            Complex64::new(s, 0.5 * t),
            Complex64::new(s, -0.25 * t),
            Complex64::new(s, 2.0 * t),
            Complex64::new(s + 0.3, t),
            Complex64::new(s - 0.3, t),
            Complex64::new(0.9 * s, 0.5 * t + 0.1),
        ];
        let mut last_err: Option<Error> = None;
        for &l0 in &seeds2 {
            match self.newton2(z, l0, tol) {
                Ok(Some((lambda, d0))) => {
                    if d0 > DELTA_FLOOR {
                        // Polish through the fast solver; fall back to the
                        // 2D answer if polishing stalls.
                        let pre = self
                            .newton3(z, [lambda.re, lambda.im, d0], tol.newton)
                            .unwrap_or(Preimage { alpha: lambda.re, beta: lambda.im, delta0: d0 });
                        return Ok(Some(pre));
                    }
                    // Converged onto the delta = 0 branch: z has a preimage
                    // outside the domain, so it is not in the image set.
                    return Ok(None);
                }
                Ok(None) => {}
                Err(e) => last_err = Some(e),
            }
        }
        Err(last_err.unwrap_or(Error::NotInImage { re: z.re, im: z.im }))
    }

    /// Damped Newton on (H1 - s, H2 - t, H3) over (alpha, beta, delta).
    fn newton3(&self, z: Complex64, seed: [f64; 3], tol: f64) -> Option<Preimage> {
        let bound = 50.0 * (1.0 + self.measure().support_radius() + self.rate());
        let mut x = seed;
        if x[2] <= 0.0 {
            x[2] = 0.5 * self.rate();
        }
        let mut fx = self.resid3(z, x)?;
        let mut norm = inf3(&fx);
        for _ in 0..MAX_ITERS {
            if norm < tol {
                return accept3(&x, &fx);
            }
            let (_, j) = self.h_hat_and_jacobian(x[0], x[1], x[2]).ok()?;
            let step = j.solve(fx).ok()?;
            let mut scale = 1.0;
            let mut advanced = false;
            for _ in 0..MAX_HALVINGS {
                let mut cand = [x[0] - scale * step[0], x[1] - scale * step[1], x[2] - scale * step[2]];
                if cand[2] <= 0.0 {
                    cand[2] = 0.5 * x[2];
                }
                if cand[0].abs() > bound || cand[1].abs() > bound || cand[2] > 1e6 {
                    scale *= 0.5;
                    continue;
                }
                if let Some(fc) = self.resid3(z, cand) {
                    let cn = inf3(&fc);
                    if cn < norm {
                        x = cand;
                        fx = fc;
                        norm = cn;
                        advanced = true;
                        break;
                    }
                }
                scale *= 0.5;
            }
            if !advanced {
                return None;
            }
        }
        if norm < tol {
            accept3(&x, &fx)
        } else {
            None
        }
    }

    fn resid3(&self, z: Complex64, x: [f64; 3]) -> Option<[f64; 3]> {
        let h = self.h_hat(x[0], x[1], x[2]).ok()?;
        Some([h.h1 - z.re, h.h2 - z.im, h.h3])
    }

    /// Damped Newton over lambda alone, re-solving delta_0 every step.
    /// Ok(Some((lambda, delta0))) on convergence (delta0 = 0 means the
    /// preimage fell outside the domain), Ok(None) when the iteration
    /// stalls, Err when evaluation itself failed.
    fn newton2(
        &self,
        z: Complex64,
        seed: Complex64,
        tol: Tolerances,
    ) -> Result<Option<(Complex64, f64)>> {
        let bound = 50.0 * (1.0 + self.measure().support_radius() + self.rate());
        let mut lambda = seed;
        let (mut h, mut jh, mut d0) = self.h_with_jacobian(lambda, tol.root)?;
        let mut norm = (h - z).norm();
        for _ in 0..MAX_ITERS {
            if norm < tol.newton {
                return Ok(Some((lambda, d0)));
            }
            let g = h - z;
            let det = jh[0][0] * jh[1][1] - jh[0][1] * jh[1][0];
            let scale2 = jh.iter().flatten().fold(0.0f64, |a, &v| a.max(v.abs()));
            if det.abs() < 1e-14 * scale2 * scale2 {
                return Ok(None);
            }
            let dx = (jh[1][1] * g.re - jh[0][1] * g.im) / det;
            let dy = (jh[0][0] * g.im - jh[1][0] * g.re) / det;
            let mut scale = 1.0;
            let mut advanced = false;
            for _ in 0..MAX_HALVINGS {
                let cand = lambda - Complex64::new(scale * dx, scale * dy);
                if cand.re.abs() > bound || cand.im.abs() > bound {
                    scale *= 0.5;
                    continue;
                }
                match self.h_with_jacobian(cand, tol.root) {
                    Ok((hc, jc, dc)) => {
                        let cn = (hc - z).norm();
                        if cn < norm {
                            lambda = cand;
                            h = hc;
                            jh = jc;
                            d0 = dc;
                            norm = cn;
                            advanced = true;
                            break;
                        }
                        scale *= 0.5;
                    }
                    Err(_) => scale *= 0.5,
                }
            }
            if !advanced {
                return Ok(None);
            }
        }
        Ok((norm < tol.newton).then_some((lambda, d0)))
    }

    /// Density at one image point.
    pub fn density_at(&self, z: Complex64) -> Result<DensityPoint> {
        self.density_at_seeded(z, None, Tolerances::default())
    }

    /// Density at one image point, optionally seeded by a nearby preimage.
    pub fn density_at_seeded(
        &self,
        z: Complex64,
        seed: Option<&Preimage>,
        tol: Tolerances,
    ) -> Result<DensityPoint> {
        let (s, t) = (z.re, z.im);
        if t <= 0.0 {
            return Ok(DensityPoint::outside(s, t));
        }
        let Some(pre) = self.h_inverse(z, seed, tol)? else {
            return Ok(DensityPoint::outside(s, t));
        };
        let jh = self.jacobian_h(pre.alpha, pre.beta, pre.delta0)?;
        let det = jh[0][0] * jh[1][1] - jh[0][1] * jh[1][0];
        if det.abs() < 1e-14 {
            return Err(Error::JacobianSingular { det });
        }
        let trace_inv = (jh[0][0] + jh[1][1]) / det;
        let raw = (2.0 / t) * trace_inv - 2.0 / t - 2.0 * pre.beta / (t * t);
        let mut f = raw / (4.0 * std::f64::consts::PI);
        if f < 0.0 {
            if f < -1e-10 {
                return Err(Error::NegativeDensity { s, t, f });
            }
            f = 0.0;
        }
        Ok(DensityPoint {
            s,
            t,
            inside: true,
            alpha: pre.alpha,
            beta: pre.beta,
            delta0: pre.delta0,
            f,
        })
    }

    /// Midpoint-rule density grid: resolution x resolution cell centers.
    ///
    /// Rows are swept outward from the middle so each cell can seed from the
    /// already-solved cell below (above in the lower half); columns within a
    /// row are independent and run in parallel. Failures are counted, not
    /// fatal: the failed cell is recorded as outside with zero density.
    pub fn density_grid(
        &self,
        window: Window,
        resolution: usize,
        tol: Tolerances,
    ) -> Result<DensityGrid> {
        if resolution == 0 {
            return Err(Error::InvalidConfig("resolution must be positive".into()));
        }
        let n = resolution;
        let ds = window.width() / n as f64;
        let dt = window.height() / n as f64;
        let centers_s: Vec<f64> = (0..n).map(|i| window.x0 + (i as f64 + 0.5) * ds).collect();
        let center_t = |j: usize| window.y0 + (j as f64 + 0.5) * dt;

        let mut rows: Vec<Option<Vec<DensityPoint>>> = vec![None; n];
        let mut failures = 0usize;
        let mid = n / 2;

        // Sweep plan: middle row unseeded, then upward, then downward, each
        // row seeded column-by-column from the last solved row on its side.
        let mut order: Vec<(usize, Option<usize>)> = Vec::with_capacity(n);
        order.push((mid, None));
        for j in mid + 1..n {
            order.push((j, Some(j - 1)));
        }
        for j in (0..mid).rev() {
            order.push((j, Some(j + 1)));
        }

        let mut col_seeds: Vec<Vec<Option<Preimage>>> = vec![Vec::new(); n];
        for (j, from) in order {
            let t = center_t(j);
            let seeds: Vec<Option<Preimage>> = match from {
                Some(prev) if !col_seeds[prev].is_empty() => col_seeds[prev].clone(),
                _ => vec![None; n],
            };
            let row: Vec<std::result::Result<DensityPoint, Error>> = centers_s
                .par_iter()
                .zip(seeds.par_iter())
                .map(|(&s, seed)| {
                    self.density_at_seeded(Complex64::new(s, t), seed.as_ref(), tol)
                })
                .collect();
            let mut solved = Vec::with_capacity(n);
            let mut seeds_out = Vec::with_capacity(n);
            for (i, res) in row.into_iter().enumerate() {
                match res {
                    Ok(p) => {
                        seeds_out.push(p.inside.then_some(Preimage {
                            alpha: p.alpha,
                            beta: p.beta,
                            delta0: p.delta0,
                        }));
                        solved.push(p);
                    }
                    Err(_) => {
                        failures += 1;
                        // Carry the previous seed past the failed cell.
                        seeds_out.push(seeds[i]);
                        solved.push(DensityPoint::outside(centers_s[i], t));
                    }
                }
            }
            col_seeds[j] = seeds_out;
            rows[j] = Some(solved);
        }

        let mut points = Vec::with_capacity(n * n);
        for row in rows.into_iter() {
            points.extend(row.expect("all rows solved"));
        }
        let total_mass: f64 = points.iter().map(|p| p.f).sum::<f64>() * ds * dt;
        Ok(DensityGrid { window, resolution: n, points, total_mass, failures })
    }
}

/// Reduce the 3x3 Jacobian to the 2x2 Jacobian of h by implicit
/// differentiation of the constraint H3 = 0.
fn jh_from_j3(m: &[[f64; 3]; 3]) -> Result<[[f64; 2]; 2]> {
    if m[2][2].abs() < 1e-14 {
        return Err(Error::JacobianSingular { det: m[2][2] });
    }
    let dd_da = -m[2][0] / m[2][2];
    let dd_db = -m[2][1] / m[2][2];
    Ok([
        [m[0][0] + m[0][2] * dd_da, m[0][1] + m[0][2] * dd_db],
        [m[1][0] + m[1][2] * dd_da, m[1][1] + m[1][2] * dd_db],
    ])
}

fn inf3(v: &[f64; 3]) -> f64 {
    v[0].abs().max(v[1].abs()).max(v[2].abs())
}

/// A small |H3| at tiny delta does not make delta a root of the ratio, so
/// acceptance demands the ratio itself be small, not just delta * ratio.
fn accept3(x: &[f64; 3], fx: &[f64; 3]) -> Option<Preimage> {
    (x[2] > DELTA_FLOOR && (fx[2] / x[2]).abs() < 1e-6)
        .then_some(Preimage { alpha: x[0], beta: x[1], delta0: x[2] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::SpectralMeasure;
    use crate::oracle;
    use approx::assert_relative_eq;

    fn fs(m: &SpectralMeasure) -> FreeSum<'_> {
        FreeSum::new(m, 1.0).unwrap()
    }

    fn bernoulli() -> SpectralMeasure {
        SpectralMeasure::symmetric_two_point(1.0).unwrap()
    }

    const SAMPLES: [(f64, f64); 4] = [(0.0, 2.0), (0.5, 1.2), (-0.3, 2.8), (0.95, 0.2)];

    #[test]
    fn preimage_matches_closed_form() {
        let m = bernoulli();
        let fs = fs(&m);
        for &(s, t) in &SAMPLES {
            let want = oracle::h_inverse(s, t).unwrap();
            let want_d0 = oracle::delta0(want.re, want.im).unwrap();
            let got = fs
                .h_inverse(Complex64::new(s, t), None, Tolerances::default())
                .unwrap()
                .unwrap_or_else(|| panic!("({s}, {t}) misclassified as outside"));
            assert_relative_eq!(got.alpha, want.re, epsilon = 1e-9);
            assert_relative_eq!(got.beta, want.im, epsilon = 1e-9);
            assert_relative_eq!(got.delta0, want_d0, epsilon = 1e-9);
        }
    }

    #[test]
    fn h_inverse_outside_returns_none() {
        let m = bernoulli();
        let fs = fs(&m);
        for &(s, t) in &[(0.0, 0.5), (0.0, -1.0), (3.0, 1.0), (0.0, 4.0), (1.3, 0.4)] {
            let got = fs.h_inverse(Complex64::new(s, t), None, Tolerances::default()).unwrap();
            assert!(got.is_none(), "({s}, {t}) wrongly classified inside: {got:?}");
        }
    }

    #[test]
    fn wrong_seed_cannot_change_the_answer() {
        let m = bernoulli();
        let fs = fs(&m);
        let bogus = Preimage { alpha: 0.9, beta: -0.1, delta0: 0.3 };
        let a = fs.h_inverse(Complex64::new(0.0, 2.0), Some(&bogus), Tolerances::default())
            .unwrap()
            .unwrap();
        assert_relative_eq!(a.alpha, 0.0, epsilon = 1e-9);
        assert_relative_eq!(a.beta, 0.75, epsilon = 1e-9);
    }

    #[test]
    fn density_matches_closed_form() {
        let m = bernoulli();
        let fs = fs(&m);
        for &(s, t) in &SAMPLES {
            let want = oracle::density(s, t);
            let got = fs.density_at(Complex64::new(s, t)).unwrap();
            assert!(got.inside, "({s}, {t}) should be inside");
            assert_relative_eq!(got.f, want, max_relative = 1e-8);
        }
    }

    #[test]
    fn density_frozen_value() {
        let m = bernoulli();
        let got = fs(&m).density_at(Complex64::new(0.0, 2.0)).unwrap();
        assert_relative_eq!(got.f, 1.0 / (16.0 * std::f64::consts::PI), max_relative = 1e-9);
    }

    #[test]
    fn density_outside_is_zero() {
        let m = bernoulli();
        let fs = fs(&m);
        for &(s, t) in &[(0.0, 0.5), (0.0, -1.0), (3.0, 3.0)] {
            let got = fs.density_at(Complex64::new(s, t)).unwrap();
            assert!(!got.inside);
            assert_eq!(got.f, 0.0);
        }
    }

    #[test]
    fn grid_agrees_with_closed_form() {
        let m = bernoulli();
        let fs = fs(&m);
        let window = Window::new(-1.2, 1.2, 0.5, 3.5).unwrap();
        let res = 40;
        let grid = fs.density_grid(window, res, Tolerances::default()).unwrap();
        assert_eq!(grid.failures, 0);
        assert_eq!(grid.points.len(), res * res);

        let mut mismatched_flags = 0;
        let mut oracle_mass = 0.0;
        for p in &grid.points {
            let want_inside = oracle::in_image(p.s, p.t);
            oracle_mass += oracle::density(p.s, p.t);
            if p.inside != want_inside {
                mismatched_flags += 1;
                continue;
            }
            if p.inside {
                assert_relative_eq!(p.f, oracle::density(p.s, p.t), max_relative = 1e-7);
            }
        }
        oracle_mass *= grid.cell_area();
        // Boundary cells may flip either way at float precision; none are
        // far from the boundary curve.
        assert!(mismatched_flags < 8, "{mismatched_flags} inside flags disagree");
        assert_relative_eq!(grid.total_mass, oracle_mass, epsilon = 2e-4);
    }

    #[test]
    fn grid_is_deterministic() {
        let m = bernoulli();
        let fs = fs(&m);
        let window = Window::new(-1.0, 1.0, 0.8, 3.2).unwrap();
        let a = fs.density_grid(window, 16, Tolerances::default()).unwrap();
        let b = fs.density_grid(window, 16, Tolerances::default()).unwrap();
        assert_eq!(a.points, b.points);
        assert_eq!(a.total_mass, b.total_mass);
    }

    #[test]
    fn grid_mass_zero_when_window_misses_image() {
        let m = bernoulli();
        let fs = fs(&m);
        let window = Window::new(5.0, 6.0, 5.0, 6.0).unwrap();
        let grid = fs.density_grid(window, 8, Tolerances::default()).unwrap();
        assert_eq!(grid.total_mass, 0.0);
        assert_eq!(grid.failures, 0);
        assert!(grid.points.iter().all(|p| !p.inside));
    }
}
