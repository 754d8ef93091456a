//! Verification batteries: each suite re-runs a module's invariants and
//! returns structured (name, expected, got, tolerance, pass) records, so a
//! caller can emit machine-readable reports and gate on the overall flag.

use crate::cumulant::UnitDirection;
use crate::geometry::{self, ChartPoint, ScanConfig};
use crate::mc::{self, McConfig};
use crate::specfun::{self, HalfInt};
use crate::tube;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

/// One verified quantity.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub expected: f64,
    pub got: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    /// Absolute comparison: |got - expected| <= tolerance.
    pub fn abs(name: &str, expected: f64, got: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            expected,
            got,
            tolerance,
            pass: got.is_finite() && (got - expected).abs() <= tolerance,
        }
    }

    /// Relative comparison: |got - expected| <= tolerance * |expected|.
    pub fn rel(name: &str, expected: f64, got: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            expected,
            got,
            tolerance,
            pass: got.is_finite() && (got - expected).abs() <= tolerance * expected.abs(),
        }
    }

    /// One-sided comparison: got <= bound.
    pub fn upper(name: &str, bound: f64, got: f64) -> Self {
        Self {
            name: name.into(),
            expected: bound,
            got,
            tolerance: 0.0,
            pass: got.is_finite() && got <= bound,
        }
    }

    /// A yes/no condition encoded as 1.0 / 0.0.
    pub fn flag(name: &str, ok: bool) -> Self {
        Self {
            name: name.into(),
            expected: 1.0,
            got: if ok { 1.0 } else { 0.0 },
            tolerance: 0.0,
            pass: ok,
        }
    }
}

/// A named batch of checks with an overall verdict.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerifyReport {
    pub suite: String,
    pub pass: bool,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn new(suite: &str, checks: Vec<Check>) -> Self {
        Self {
            suite: suite.into(),
            pass: checks.iter().all(|c| c.pass),
            checks,
        }
    }
}

/// Special-function battery: boundary digits, recurrence/oracle agreement,
/// the three-term identity, and tail-function sanity.
pub fn specfun_suite() -> Vec<Check> {
    let mut checks = Vec::new();
    let b = specfun::elliptic_boundary();
    checks.push(Check::abs("E(1/4) matches tabulated 1.46746", 1.46746, b.e_quarter, 5e-6));
    checks.push(Check::abs("K(1/4) matches tabulated 1.68575", 1.68575, b.k_quarter, 5e-6));
    checks.push(Check::abs(
        "E_{1/2} = 4 E(1/4)",
        4.0 * 1.46746,
        specfun::elliptic_moment(HalfInt::new(1)),
        2e-5,
    ));

    let mut worst_rel = 0.0_f64;
    for t in -8..=16 {
        let k = HalfInt::new(t);
        let rec = specfun::elliptic_moment(k);
        let oracle = specfun::elliptic_moment_quad(k.value());
        worst_rel = worst_rel.max(((rec - oracle) / oracle).abs());
    }
    checks.push(Check::upper(
        "elliptic moment recurrence vs quadrature, k in [-4, 8], relative",
        1e-9,
        worst_rel,
    ));

    let mut worst_identity = 0.0_f64;
    for t in 2..=16 {
        let k = HalfInt::new(t).value();
        let ek = specfun::elliptic_moment(HalfInt::new(t));
        let ek1 = specfun::elliptic_moment(HalfInt::new(t - 2));
        let ek2 = specfun::elliptic_moment(HalfInt::new(t - 4));
        let res = 2.0 * k * ek - 7.0 * (2.0 * k - 1.0) * ek1 + 24.0 * (k - 1.0) * ek2;
        worst_identity = worst_identity.max((res / (2.0 * k * ek)).abs());
    }
    checks.push(Check::upper(
        "three-term recurrence identity residual, relative",
        1e-9,
        worst_identity,
    ));

    let mut growth_ok = true;
    for t in 0..=16 {
        let k = HalfInt::new(t).value();
        let e = specfun::elliptic_moment(HalfInt::new(t));
        growth_ok &= e > 0.0 && PI * 3.0_f64.powf(k) <= e && e <= PI * 4.0_f64.powf(k);
    }
    checks.push(Check::flag("elliptic moments positive within growth bounds", growth_ok));

    let mut worst_exp = 0.0_f64;
    let mut x = 0.0;
    while x <= 40.0 {
        let got = specfun::chisq_upper(2, x).unwrap().value();
        let expected = (-x / 2.0).exp();
        worst_exp = worst_exp.max(((got - expected) / expected).abs());
        x += 0.5;
    }
    checks.push(Check::upper(
        "chi-square(2) upper tail vs exp(-x/2), relative",
        1e-12,
        worst_exp,
    ));

    let mut monotone = true;
    for nu in [1u32, 3, 7] {
        let mut prev = 1.0;
        for i in 0..160 {
            let p = specfun::chisq_upper(nu, i as f64 * 0.25).unwrap().value();
            monotone &= p <= prev + 1e-15;
            prev = p;
        }
    }
    for &(a, bb) in &[(1.5_f64, 10.5_f64), (0.5, 11.5)] {
        let mut prev = 1.0;
        for i in 0..=80 {
            let p = specfun::beta_upper(a, bb, i as f64 / 80.0).unwrap().value();
            monotone &= p <= prev + 1e-15;
            prev = p;
        }
    }
    checks.push(Check::flag("tail functions monotone in threshold", monotone));

    checks.push(Check::rel(
        "sphere surface of S^3",
        2.0 * PI * PI,
        specfun::sphere_surface(4).unwrap(),
        1e-13,
    ));
    checks
}

/// Tube battery: coefficient identities, the q = 2 closed form, and the
/// validity of the volume fraction.
pub fn tube_suite() -> Vec<Check> {
    let mut checks = Vec::new();
    let b = specfun::elliptic_boundary();

    let mut worst_collapse = 0.0_f64;
    for q in 2..=6u32 {
        let w = tube::weyl_coefficients(q).unwrap();
        let expected = specfun::sphere_surface(q).unwrap()
            * specfun::elliptic_moment(HalfInt::new(q as i64 - 1));
        worst_collapse = worst_collapse.max(((w.kappa0() - expected) / expected).abs());
    }
    checks.push(Check::upper(
        "kappa_0 = Omega_q E_{(q-1)/2} for q = 2..6, relative",
        1e-12,
        worst_collapse,
    ));

    let w2 = tube::weyl_coefficients(2).unwrap();
    checks.push(Check::rel(
        "q=2: kappa_0 = 8 pi E(1/4)",
        8.0 * PI * b.e_quarter,
        w2.kappa0(),
        1e-12,
    ));
    checks.push(Check::rel(
        "q=2: kappa_2 = -kappa_0",
        -w2.kappa0(),
        w2.kappa(2).unwrap(),
        1e-12,
    ));

    let mut worst_identity = 0.0_f64;
    for c in [1.0_f64, 2.0, 3.0, 4.0, 5.0, 6.0] {
        let sum = tube::tail_approx(2, c * c).unwrap().value;
        let closed = tube::tail_approx_q2(c * c).unwrap();
        worst_identity = worst_identity.max(((sum - closed) / closed).abs());
    }
    checks.push(Check::upper(
        "q=2 expansion equals closed form, c = 1..6, relative",
        1e-12,
        worst_identity,
    ));
    checks.push(Check::abs(
        "tail approximation at c = 3",
        0.078043,
        tube::tail_approx(2, 9.0).unwrap().value,
        1e-6,
    ));

    let constants = tube::critical_radius_constants();
    checks.push(Check::abs("rho_c = 25/16", 1.5625, constants.rho_c, 0.0));
    checks.push(Check::abs(
        "theta_c = atan(3/4)",
        (3.0_f64 / 4.0).atan(),
        constants.theta_c,
        0.0,
    ));
    checks.push(Check::abs(
        "1 + tan^2(theta_c) = rho_c",
        constants.rho_c,
        1.0 + constants.theta_c.tan().powi(2),
        1e-14,
    ));

    let mut fraction_ok = true;
    for q in 2..=4u32 {
        let f = tube::tube_volume_fraction(q, constants.theta_c).unwrap();
        fraction_ok &= (0.0..=1.0).contains(&f);
    }
    checks.push(Check::flag("tube volume fraction lies in [0, 1] at theta_c", fraction_ok));

    let mut tail_monotone = true;
    for q in 2..=5u32 {
        let mut prev = f64::INFINITY;
        let mut c2 = 9.0;
        while c2 <= 40.0 {
            let v = tube::tail_approx(q, c2).unwrap().value;
            tail_monotone &= v <= prev + 1e-15;
            prev = v;
            c2 += 0.5;
        }
    }
    checks.push(Check::flag("tail approximation monotone beyond c^2 = 9", tail_monotone));

    let p0 = tube::pvalue(2, 0.0).unwrap();
    checks.push(Check::flag("p-value at 0 clamps to 1", p0.p.value() == 1.0 && p0.clamped));
    checks
}

/// Geometry battery: metric blocks, volumes, curvature, the h(x, y)
/// reduction, and the critical radius scan.
pub fn geometry_suite() -> Vec<Check> {
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    let mut checks = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(0x9E0);

    for q in [2usize, 3] {
        let mut checked = 0;
        let mut ok = true;
        while checked < 100 {
            let coords: Vec<f64> = (0..q - 1).map(|_| -1.2 + 2.4 * rng.random::<f64>()).collect();
            if q == 3 && coords[0].sin().abs() < 0.2 {
                continue;
            }
            let theta = -1.4 + 2.8 * rng.random::<f64>();
            ok &= geometry::metric_numeric(q, &ChartPoint { coords, theta }).is_ok();
            checked += 1;
        }
        checks.push(Check::flag(
            &format!("metric block structure at 100 random chart points, q = {q}"),
            ok,
        ));
    }

    for q in 2..=4u32 {
        let numeric = geometry::manifold_volume_numeric(q).unwrap();
        let kappa0 = tube::weyl_coefficients(q).unwrap().kappa0();
        checks.push(Check::rel(
            &format!("manifold volume equals kappa_0, q = {q}"),
            kappa0,
            numeric,
            1e-6,
        ));
    }
    for (q, e) in [(2u32, 2u32), (3, 2)] {
        let numeric = geometry::weyl_invariant_numeric(q, e).unwrap();
        let closed = tube::weyl_coefficients(q).unwrap().kappa(e).unwrap();
        checks.push(Check::rel(
            &format!("curvature invariant kappa_{e} by quadrature, q = {q}"),
            closed,
            numeric,
            1e-6,
        ));
    }

    let mut worst_curv = 0.0_f64;
    for i in 0..=10 {
        let theta = -1.4 + 2.8 * i as f64 / 10.0;
        let c = geometry::curvature_check_q2(theta).unwrap();
        worst_curv = worst_curv.max((c.gauss_curv_fd - 1.0 - c.h2_closed).abs());
    }
    checks.push(Check::upper(
        "Gauss curvature minus 1 matches beta(theta), q = 2",
        1e-3,
        worst_curv,
    ));

    let mut worst_h = 0.0_f64;
    let mut tested = 0;
    while tested < 500 {
        let q = if tested % 2 == 0 { 2 } else { 3 };
        let h1 = UnitDirection::normalized((0..q).map(|_| rng.sample(StandardNormal)).collect()).unwrap();
        let h2 = UnitDirection::normalized((0..q).map(|_| rng.sample(StandardNormal)).collect()).unwrap();
        let t1 = -FRAC_PI_2 + PI * (rng.random::<f64>() * 0.999 + 5e-4);
        let t2 = -FRAC_PI_2 + PI * (rng.random::<f64>() * 0.999 + 5e-4);
        let x = crate::field::embed(&h1, t1).unwrap();
        let y = crate::field::embed(&h2, t2).unwrap();
        if 1.0 - crate::field::manifold_inner(&x, &y).unwrap() < 1e-3 {
            continue;
        }
        let ambient = geometry::h_func(&x, &y).unwrap();
        let psi = crate::cumulant::dot(h1.as_ref(), h2.as_ref())
            .clamp(-1.0, 1.0)
            .acos();
        let (f, g) = geometry::fg_reduced(psi, t1, t2).unwrap();
        worst_h = worst_h.max(((ambient - f / g) / (f / g).abs().max(1.0)).abs());
        tested += 1;
    }
    checks.push(Check::upper(
        "projection functional matches its f/g reduction, 500 pairs",
        1e-8,
        worst_h,
    ));

    let scan = geometry::sup_fg_scan(&ScanConfig::default()).unwrap();
    checks.push(Check::rel("local-limit supremum is 16/9", 16.0 / 9.0, scan.sup_fg, 1e-9));
    checks.push(Check::abs("supremum attained at u = 0", 0.0, scan.attained_u, 1e-3));
    checks.push(Check::abs("supremum attained at k = 3/2", 1.5, scan.attained_k, 1e-2));
    checks.push(Check::upper(
        "global f/g grid never exceeds 16/9 + 1e-3",
        16.0 / 9.0 + 1e-3,
        scan.grid_sup,
    ));
    checks.push(Check::abs(
        "critical radius atan(3/4) from the scan",
        (3.0_f64 / 4.0).atan(),
        scan.theta_c,
        1e-9,
    ));
    checks.push(Check::abs("rho_c = 25/16 from the scan", 25.0 / 16.0, scan.rho_c, 1e-9));

    match geometry::critical_points_check() {
        Ok(families) => {
            let mut sorted = families.clone();
            sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            let ok = sorted.len() == 2
                && (sorted[0].0 + 1.0).abs() < 1e-6
                && (sorted[0].1 - FRAC_PI_2).abs() < 1e-6
                && sorted[1].0.abs() < 1e-6
                && (sorted[1].1 - PI / 4.0).abs() < 1e-6;
            checks.push(Check::flag(
                "critical families are (r, half-angle) = (0, pi/4), (-1, pi/2)",
                ok,
            ));
            let min_half = sorted.iter().map(|f| f.1).fold(f64::INFINITY, f64::min);
            checks.push(Check::flag(
                "critical half-angles exceed the local radius",
                min_half > (3.0_f64 / 4.0).atan(),
            ));
        }
        Err(_) => checks.push(Check::flag("critical families recovered", false)),
    }
    checks
}

/// Monte Carlo battery. Fixed internal seeds keep it deterministic; the
/// workers hint only affects scheduling.
pub fn mc_suite(workers: Option<usize>) -> Vec<Check> {
    let mut checks = Vec::new();

    // limiting-field tail versus the tube approximation
    let cfg = McConfig {
        reps: 10_000,
        seed: 0x51AB,
        workers,
        ..McConfig::default()
    };
    let samples = mc::simulate_limit_max(2, &cfg).unwrap();
    let thresholds = [9.0, 11.0];
    let curve = mc::empirical_tail(&samples.values, &thresholds).unwrap();
    for (i, &c2) in thresholds.iter().enumerate() {
        let approx = tube::tail_approx(2, c2).unwrap().value;
        let z = (curve.probabilities[i] - approx) / curve.se[i].max(1e-12);
        checks.push(Check::abs(
            &format!("limit tail z-score vs tube approximation at c^2 = {c2}"),
            0.0,
            z,
            3.0,
        ));
    }

    // determinism across worker counts
    let seq = mc::simulate_limit_max(
        2,
        &McConfig {
            reps: 200,
            seed: 7,
            workers: Some(1),
            ..McConfig::default()
        },
    )
    .unwrap();
    let par = mc::simulate_limit_max(
        2,
        &McConfig {
            reps: 200,
            seed: 7,
            workers,
            ..McConfig::default()
        },
    )
    .unwrap();
    let identical = seq
        .values
        .iter()
        .zip(&par.values)
        .all(|(a, b)| a.to_bits() == b.to_bits());
    checks.push(Check::flag("replications identical across worker counts", identical));

    // marginal variances of sqrt(n) B1 and sqrt(n) B2
    let h = UnitDirection::normalized(vec![0.6, -0.8]).unwrap();
    let marg = mc::clt_marginal_check(
        2,
        &h,
        2000,
        &McConfig {
            reps: 5000,
            seed: 0xC17,
            workers,
            ..McConfig::default()
        },
    )
    .unwrap();
    checks.push(Check::abs("Var(sqrt(n) B1) near 3! = 6", 6.0, marg.var_b1_scaled, 0.5));
    checks.push(Check::abs("Var(sqrt(n) B2) near 4! = 24", 24.0, marg.var_b2_scaled, 2.5));

    // tube volume versus the exact fraction where uniform sampling can see
    // the tube (theta = 0.6, just under theta_c)
    let est = mc::tube_volume_mc(
        2,
        0.6,
        &McConfig {
            reps: 200_000,
            seed: 0x7B,
            workers,
            grid_resolution: 1024,
            ..McConfig::default()
        },
    )
    .unwrap();
    let formula = tube::tube_volume_fraction(2, 0.6).unwrap();
    let se = (formula * (1.0 - formula) / est.reps as f64).sqrt();
    checks.push(Check::abs(
        "tube volume MC z-score at theta = 0.6",
        0.0,
        (est.fraction - formula) / se,
        3.0,
    ));
    checks
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fast_suites_pass() {
        for (name, checks) in [
            ("specfun", specfun_suite()),
            ("tube", tube_suite()),
            ("geometry", geometry_suite()),
        ] {
            let report = VerifyReport::new(name, checks);
            for c in &report.checks {
                assert!(c.pass, "{name}: {} (expected {}, got {})", c.name, c.expected, c.got);
            }
            assert!(report.pass);
        }
    }

    #[test]
    fn report_serializes() {
        let report = VerifyReport::new("specfun", specfun_suite());
        let json = serde_json::to_string(&report).unwrap();
        let back: VerifyReport = serde_json::from_str(&json).unwrap();
        assert_eq!(report.pass, back.pass);
        assert_eq!(report.checks.len(), back.checks.len());
    }
}
