//! Randomized invariants of the scalar integrals, the regularized map, and
//! measure serialization, checked across random atomic and quadrature
//! measures rather than the single exactly solvable one.

use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use brownmap::{oracle, FreeSum, SpectralMeasure};

/// 2 to 5 atoms, positions separated by at least 1e-3, weights normalized.
fn atomic_measure() -> impl Strategy<Value = SpectralMeasure> {
    proptest::collection::vec((-3.0..3.0f64, 0.05..1.0f64), 2..6).prop_filter_map(
        "atom positions too close",
        |mut raw| {
            raw.sort_by(|l, r| l.0.total_cmp(&r.0));
            if raw.windows(2).any(|w| w[1].0 - w[0].0 < 1e-3) {
                return None;
            }
            let total: f64 = raw.iter().map(|&(_, w)| w).sum();
            let atoms: Vec<(f64, f64)> = raw.into_iter().map(|(t, w)| (t, w / total)).collect();
            SpectralMeasure::from_atoms(&atoms).ok()
        },
    )
}

/// Atomic or uniform quadrature, exercising both integral backends.
fn any_measure() -> impl Strategy<Value = SpectralMeasure> {
    prop_oneof![
        3 => atomic_measure(),
        1 => (-2.0..0.0f64, 0.2..2.5f64).prop_map(|(lo, len)| {
            SpectralMeasure::uniform_with_nodes(lo, lo + len, 201).unwrap()
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(192))]

    /// delta^2 T <= 1 pointwise: the integrand delta^2 / q never exceeds 1.
    #[test]
    fn delta_sq_t_never_exceeds_one(
        m in any_measure(),
        alpha in -4.0..4.0f64,
        beta in -3.0..3.0f64,
        delta in 1e-6..1e3f64,
    ) {
        let v = m.std_integrals(alpha, beta, delta).unwrap();
        prop_assert!(delta * delta * v.t <= 1.0 + 1e-12,
            "delta^2 T = {} at ({alpha}, {beta}, {delta})", delta * delta * v.t);
    }

    /// The third-component ratio increases strictly in delta and tends to 1.
    #[test]
    fn ratio_strictly_increasing_to_one(
        m in any_measure(),
        p in 0.2..3.0f64,
        alpha in -3.0..3.0f64,
        beta in -2.0..2.5f64,
        e1 in -6.0..3.0f64,
        e2 in -6.0..3.0f64,
    ) {
        prop_assume!((e1 - e2).abs() > 1e-9);
        let fs = FreeSum::new(&m, p).unwrap();
        let (lo, hi) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
        let r_lo = fs.h3_ratio(alpha, beta, 10f64.powf(lo)).unwrap();
        let r_hi = fs.h3_ratio(alpha, beta, 10f64.powf(hi)).unwrap();
        prop_assert!(r_lo < r_hi, "ratio {r_lo} !< {r_hi} at ({alpha}, {beta})");
        let r_far = fs.h3_ratio(alpha, beta, 1e8).unwrap();
        prop_assert!((r_far - 1.0).abs() < 1e-6, "ratio at delta = 1e8 is {r_far}");
    }

    /// The Cauchy transform maps the upper half plane into the lower one.
    #[test]
    fn cauchy_transform_flips_half_plane(
        m in any_measure(),
        alpha in -5.0..5.0f64,
        beta in 1e-3..4.0f64,
    ) {
        let g = m.cauchy_transform(Complex64::new(alpha, beta)).unwrap();
        prop_assert!(g.im < 0.0, "Im G = {} at ({alpha}, {beta})", g.im);
    }

    /// Large regularization drives the map to the trivial shift (alpha, beta + p).
    #[test]
    fn map_limit_at_large_delta(
        m in any_measure(),
        p in 0.2..3.0f64,
        alpha in -3.0..3.0f64,
        beta in -2.0..2.5f64,
    ) {
        let fs = FreeSum::new(&m, p).unwrap();
        let v = fs.h_hat(alpha, beta, 1e7).unwrap();
        prop_assert!((v.h1 - alpha).abs() < 1e-6, "H1 = {} vs alpha = {alpha}", v.h1);
        prop_assert!((v.h2 - (beta + p)).abs() < 1e-6, "H2 = {} vs beta + p = {}", v.h2, beta + p);
        prop_assert!((fs.h3_ratio(alpha, beta, 1e7).unwrap() - 1.0).abs() < 1e-6);
    }

    /// Row identity of the D partials: dD/dbeta - (beta/delta) dD/ddelta = -2T.
    #[test]
    fn d_partials_row_identity(
        m in any_measure(),
        alpha in -3.0..3.0f64,
        beta in -2.0..2.5f64,
        delta in 0.01..10.0f64,
    ) {
        let partials = m.std_partials(alpha, beta, delta).unwrap();
        let (_, d_beta, d_delta) = partials.d_partials(beta, delta);
        let lhs = d_beta - (beta / delta) * d_delta;
        let rhs = -2.0 * partials.vals.t;
        prop_assert!((lhs - rhs).abs() <= 1e-10 * partials.vals.t.abs().max(1.0),
            "row identity off: {lhs} vs {rhs} at ({alpha}, {beta}, {delta})");
    }

    /// Outside the domain the map moves points at most twice as fast.
    #[test]
    fn outside_lipschitz_bound(
        m in any_measure(),
        p in 0.2..3.0f64,
        a1 in -4.0..4.0f64,
        b1 in -3.0..3.0f64,
        a2 in -4.0..4.0f64,
        b2 in -3.0..3.0f64,
    ) {
        let fs = FreeSum::new(&m, p).unwrap();
        prop_assume!(fs.limit_ratio(a1, b1).unwrap() > 1e-3);
        prop_assume!(fs.limit_ratio(a2, b2).unwrap() > 1e-3);
        let l1 = Complex64::new(a1, b1);
        let l2 = Complex64::new(a2, b2);
        prop_assume!((l1 - l2).norm() > 1e-12);
        let dh = (fs.h_map(l1).unwrap() - fs.h_map(l2).unwrap()).norm();
        prop_assert!(dh <= 2.0 * (l1 - l2).norm() * (1.0 + 1e-12),
            "|dh| = {dh} over |dlambda| = {}", (l1 - l2).norm());
    }

    /// Serialized measures parse back to the same measure.
    #[test]
    fn measure_json_round_trip(m in any_measure()) {
        let back = SpectralMeasure::from_json_str(&m.to_json_string()).unwrap();
        prop_assert_eq!(m.atoms().len(), back.atoms().len());
        for (a, b) in m.atoms().iter().zip(back.atoms()) {
            prop_assert!(a.t == b.t && (a.w - b.w).abs() < 1e-14);
        }
        prop_assert_eq!(m.ac_support().is_some(), back.ac_support().is_some());
        for lambda in [Complex64::new(0.3, 1.0), Complex64::new(-2.0, 0.4), Complex64::new(4.0, 2.0)] {
            let ga = m.cauchy_transform(lambda).unwrap();
            let gb = back.cauchy_transform(lambda).unwrap();
            prop_assert!((ga - gb).norm() < 1e-12, "G mismatch {ga} vs {gb} at {lambda}");
        }
    }

    /// The 2x2 Jacobian determinant equals the 3x3 determinant divided by
    /// dH3/ddelta at the same interior point.
    #[test]
    fn jacobian_determinant_reduction(
        m in any_measure(),
        p in 0.3..2.5f64,
        alpha in -3.0..3.0f64,
        beta in -1.5..2.5f64,
    ) {
        let fs = FreeSum::new(&m, p).unwrap();
        prop_assume!(fs.limit_ratio(alpha, beta).unwrap() < -1e-3);
        let d0 = fs.delta0(alpha, beta).unwrap();
        prop_assume!(d0 > 1e-6);
        let j3 = fs.jacobian_h_hat(alpha, beta, d0).unwrap();
        prop_assume!(j3.m[2][2].abs() > 1e-9);
        let jh = fs.jacobian_h(alpha, beta, d0).unwrap();
        let det2 = jh[0][0] * jh[1][1] - jh[0][1] * jh[1][0];
        let reduced = j3.det() / j3.m[2][2];
        prop_assert!((det2 - reduced).abs() <= 1e-9 * det2.abs().max(1.0),
            "det J_h = {det2} vs det3 / dH3ddelta = {reduced}");
    }

    /// Outside the closed domain, delta0 is exactly zero.
    #[test]
    fn delta0_zero_outside(
        m in any_measure(),
        p in 0.2..3.0f64,
        alpha in -4.0..4.0f64,
        beta in -3.0..3.0f64,
    ) {
        let fs = FreeSum::new(&m, p).unwrap();
        prop_assume!(fs.limit_ratio(alpha, beta).unwrap() >= 0.0);
        prop_assert_eq!(fs.delta0(alpha, beta).unwrap(), 0.0);
    }
}

/// delta0 decays like the square root of the distance to the boundary.
#[test]
fn delta0_vanishes_approaching_boundary() {
    let m = SpectralMeasure::symmetric_two_point(1.0).unwrap();
    let fs = FreeSum::new(&m, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let anchor = Complex64::new(0.0, 0.5);
    let mut checked = 0usize;
    while checked < 200 {
        let theta = rng.gen_range(0.0..std::f64::consts::TAU);
        let dir = Complex64::new(theta.cos(), theta.sin());
        if oracle::domain_poly((anchor + 3.0 * dir).re, (anchor + 3.0 * dir).im) < 0.0 {
            continue;
        }
        // Bisect the ray from the interior anchor to the crossing.
        let (mut lo, mut hi) = (0.0f64, 3.0f64);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            let z = anchor + mid * dir;
            if oracle::domain_poly(z.re, z.im) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let boundary = anchor + lo * dir;
        let eps = 10f64.powf(rng.gen_range(-8.0..-2.0));
        let inward = boundary - eps * dir;
        if oracle::domain_poly(inward.re, inward.im) >= -1e-15 {
            continue;
        }
        checked += 1;
        let d0 = fs.delta0(inward.re, inward.im).unwrap();
        assert!(
            d0 <= 10.0 * eps.sqrt() + 1e-6,
            "delta0 = {d0} at distance {eps} from the boundary (point {inward})"
        );
    }
}

/// The map stays injective on interior points (closed-form cross check).
#[test]
fn h_injective_inside() {
    let m = SpectralMeasure::symmetric_two_point(1.0).unwrap();
    let fs = FreeSum::new(&m, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut points = Vec::new();
    while points.len() < 120 {
        let alpha = rng.gen_range(-1.5..1.5);
        let beta = rng.gen_range(-0.45..1.6);
        if oracle::domain_poly(alpha, beta) < -1e-6 {
            points.push(Complex64::new(alpha, beta));
        }
    }
    let images: Vec<Complex64> = points.iter().map(|&z| fs.h_map(z).unwrap()).collect();
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            if (points[i] - points[j]).norm() > 1e-3 {
                assert!(
                    (images[i] - images[j]).norm() > 1e-12,
                    "h collapses {} and {} to {}",
                    points[i],
                    points[j],
                    images[i]
                );
            }
        }
    }
}
