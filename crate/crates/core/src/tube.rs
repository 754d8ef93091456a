//! Closed-form tube machinery for the index manifold M in S^{p-1},
//! p = q^3 + q^4: Weyl curvature coefficients
//!
//! ```text
//!   kappa_e = Omega_q (-3)^{e/2} (q-1)!/(q-e)!
//!             sum_{j=0}^{e/2} (q-e-2j) (-2)^j / ((e/2-j)! j!) E_{(q-1-e)/2-j}
//! ```
//!
//! the tail approximation of the maximum of the limiting field,
//!
//! ```text
//!   P(max I >= c^2) ~ sum_{e even <= q} kappa_e psi_e(c),
//!   psi_e(c) = Gamma((q+1-e)/2) / (2^{1+e/2} pi^{(q+1)/2}) Gbar_{q+1-e}(c^2),
//! ```
//!
//! the exact tube-volume fraction below the critical radius, and the
//! resulting p-value.

use crate::error::{Error, Result};
use crate::specfun::{self, HalfInt, Probability};
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Mutex;
use std::sync::OnceLock;

/// Weyl curvature coefficients of the index manifold for one q; the
/// manifold dimension is d = q and only even degrees e <= q appear.
#[derive(Clone, Debug)]
pub struct WeylCoefficients {
    q: u32,
    /// kappa at e = 2 * index.
    kappas: Vec<f64>,
}

impl WeylCoefficients {
    pub fn q(&self) -> u32 {
        self.q
    }

    /// Manifold dimension d = q.
    pub fn d(&self) -> u32 {
        self.q
    }

    pub fn kappa(&self, e: u32) -> Option<f64> {
        if e % 2 != 0 {
            return None;
        }
        self.kappas.get((e / 2) as usize).copied()
    }

    pub fn kappa0(&self) -> f64 {
        self.kappas[0]
    }

    /// (e, kappa_e) pairs in increasing e.
    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.kappas.iter().enumerate().map(|(i, &k)| (2 * i as u32, k))
    }
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

fn compute_weyl(q: u32) -> WeylCoefficients {
    let omega_q = specfun::sphere_surface(q).expect("q >= 2");
    let mut kappas = Vec::new();
    let mut e = 0u32;
    while e <= q {
        let half_e = (e / 2) as i64;
        let mut sum = 0.0;
        for j in 0..=half_e {
            let count = (q as i64 - e as i64 - 2 * j) as f64;
            let denom = factorial((half_e - j) as u32) * factorial(j as u32);
            let moment = specfun::elliptic_moment(HalfInt::new(q as i64 - 1 - e as i64 - 2 * j));
            sum += count / denom * (-2.0_f64).powi(j as i32) * moment;
        }
        let kappa = omega_q * (-3.0_f64).powi(half_e as i32) * factorial(q - 1)
            / factorial(q - e)
            * sum;
        kappas.push(kappa);
        e += 2;
    }
    WeylCoefficients { q, kappas }
}

static WEYL_CACHE: OnceLock<Mutex<HashMap<u32, WeylCoefficients>>> = OnceLock::new();

/// Weyl coefficients for dimension q, computed once and cached.
pub fn weyl_coefficients(q: u32) -> Result<WeylCoefficients> {
    if q < 2 {
        return Err(Error::Domain("tube formulas need q >= 2".into()));
    }
    let cache = WEYL_CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().expect("weyl cache poisoned");
    Ok(map.entry(q).or_insert_with(|| compute_weyl(q)).clone())
}

/// psi_e(c) = Gamma((d+1-e)/2) / (2^{1+e/2} pi^{(d+1)/2}) Gbar_{d+1-e}(c^2)
/// for a d-dimensional manifold.
pub fn psi_term(d: u32, e: u32, c_squared: f64) -> Result<f64> {
    if e % 2 != 0 || e > d {
        return Err(Error::Domain(format!("psi needs even e <= d, got e={e}, d={d}")));
    }
    if c_squared < 0.0 {
        return Err(Error::Domain("threshold must be nonnegative".into()));
    }
    let nu = d + 1 - e;
    let coeff = (specfun::ln_gamma(nu as f64 / 2.0)
        - (1.0 + e as f64 / 2.0) * std::f64::consts::LN_2
        - (d as f64 + 1.0) / 2.0 * PI.ln())
    .exp();
    Ok(coeff * specfun::chisq_upper(nu, c_squared)?.value())
}

/// The tail approximation with its per-degree breakdown. The raw value is
/// reported as-is: it is an asymptotic expression and may leave [0, 1] at
/// small thresholds.
#[derive(Clone, Debug)]
pub struct TailApprox {
    pub q: u32,
    pub c_squared: f64,
    pub value: f64,
    /// (e, kappa_e * psi_e(c)) pairs.
    pub terms: Vec<(u32, f64)>,
}

/// P(max I >= c^2) by the tube expansion over even degrees e <= q.
pub fn tail_approx(q: u32, c_squared: f64) -> Result<TailApprox> {
    if c_squared < 0.0 {
        return Err(Error::Domain("threshold must be nonnegative".into()));
    }
    let weyl = weyl_coefficients(q)?;
    let mut terms = Vec::new();
    let mut value = 0.0;
    for (e, kappa) in weyl.iter() {
        let term = kappa * psi_term(q, e, c_squared)?;
        value += term;
        terms.push((e, term));
    }
    Ok(TailApprox {
        q,
        c_squared,
        value,
        terms,
    })
}

/// The q = 2 closed form w sqrt(2/pi) c exp(-c^2/2) with w = 2 E(1/4).
pub fn tail_approx_q2(c_squared: f64) -> Result<f64> {
    if c_squared < 0.0 {
        return Err(Error::Domain("threshold must be nonnegative".into()));
    }
    let w = 2.0 * specfun::elliptic_boundary().e_quarter;
    let c = c_squared.sqrt();
    Ok(w * (2.0 / PI).sqrt() * c * (-c_squared / 2.0).exp())
}

/// Critical-radius constants of the index manifold; they do not depend on q.
#[derive(Clone, Copy, Debug)]
pub struct CriticalRadiusInfo {
    /// theta_c = atan(3/4)
    pub theta_c: f64,
    /// rho_c = 1 + tan^2(theta_c) = 25/16
    pub rho_c: f64,
}

pub fn critical_radius_constants() -> CriticalRadiusInfo {
    CriticalRadiusInfo {
        theta_c: (3.0_f64 / 4.0).atan(),
        rho_c: 25.0 / 16.0,
    }
}

/// Fraction of S^{p-1} covered by the tube of radius theta about M, valid
/// for 0 <= theta <= theta_c:
///
/// ```text
///   Vol(Tube)/Omega_p = sum_e kappa_e J_e(theta),
///   J_e = Gamma((d+1-e)/2) / (2^{1+e/2} pi^{(d+1)/2})
///         Bbar_{(d+1-e)/2, (p-d-1+e)/2}(cos^2 theta).
/// ```
pub fn tube_volume_fraction(q: u32, theta: f64) -> Result<f64> {
    let theta_c = critical_radius_constants().theta_c;
    if !(0.0..=theta_c + 1e-15).contains(&theta) {
        return Err(Error::Domain(format!(
            "tube radius {theta} outside [0, theta_c = {theta_c}]"
        )));
    }
    let weyl = weyl_coefficients(q)?;
    let d = q as f64;
    let p = (q as f64).powi(3) + (q as f64).powi(4);
    let cos_sq = theta.cos().powi(2);
    let mut fraction = 0.0;
    for (e, kappa) in weyl.iter() {
        let a = (d + 1.0 - e as f64) / 2.0;
        let b = (p - d - 1.0 + e as f64) / 2.0;
        let coeff = (specfun::ln_gamma(a)
            - (1.0 + e as f64 / 2.0) * std::f64::consts::LN_2
            - (d + 1.0) / 2.0 * PI.ln())
        .exp();
        fraction += kappa * coeff * specfun::beta_upper(a, b, cos_sq)?.value();
    }
    Ok(fraction)
}

/// A p-value from the tail approximation, with a flag recording whether the
/// reported number had to be regularized.
#[derive(Clone, Copy, Debug)]
pub struct PValue {
    pub p: Probability,
    /// True when the observed maximum sat below the approximation's
    /// decreasing regime (or the raw value left [0, 1]), i.e. the asymptotic
    /// formula was not trustworthy pointwise and was regularized.
    pub clamped: bool,
}

/// P-value of an observed maximum: the monotone nonincreasing envelope of
/// the raw tail approximation, clamped to [0, 1]. Taking the envelope
/// sup_{t >= c^2} raw(t) keeps small observed maxima at p = 1 instead of
/// chasing the approximation back to 0 outside its asymptotic regime.
pub fn pvalue(q: u32, observed_max: f64) -> Result<PValue> {
    if observed_max < 0.0 {
        return Err(Error::Domain("observed maximum must be nonnegative".into()));
    }
    let raw = tail_approx(q, observed_max)?.value;
    let mut sup = raw;
    // scan the approximation to the right of the observed value; the raw
    // curve rises then falls, so a coarse grid plus the endpoint suffices
    let mut t = observed_max;
    let hi = observed_max + 80.0;
    while t <= hi {
        sup = sup.max(tail_approx(q, t)?.value);
        t += 0.125;
    }
    let (p, clipped) = Probability::clamped(sup);
    Ok(PValue {
        p,
        clamped: clipped || sup > raw * (1.0 + 1e-12) + 1e-300,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::{elliptic_boundary, elliptic_moment, sphere_surface};

    #[test]
    fn weyl_q2_values() {
        let w = weyl_coefficients(2).unwrap();
        let e_quarter = elliptic_boundary().e_quarter;
        let kappa0 = w.kappa(0).unwrap();
        let kappa2 = w.kappa(2).unwrap();
        // kappa_0 = Omega_2 E_{1/2} = 8 pi E(1/4); kappa_2 = -24 pi E_{-3/2}
        // = -8 pi E(1/4)
        assert!((kappa0 - 8.0 * PI * e_quarter).abs() < 1e-12 * kappa0);
        assert!((kappa2 + kappa0).abs() < 1e-12 * kappa0);
        assert!(w.kappa(4).is_none());
        assert!(w.kappa(1).is_none());
    }

    #[test]
    fn weyl_q3_kappa0() {
        let w = weyl_coefficients(3).unwrap();
        // kappa_0 = Omega_3 E_1 = 4 pi (7 pi / 2) = 14 pi^2
        let expected = 14.0 * PI * PI;
        assert!((w.kappa0() - expected).abs() < 1e-12 * expected);
        // kappa_2 = -24 pi^2 (1 + 1/sqrt 3) by hand
        let kappa2 = w.kappa(2).unwrap();
        let expected2 = -24.0 * PI * PI * (1.0 + 1.0 / 3.0_f64.sqrt());
        assert!((kappa2 - expected2).abs() < 1e-12 * expected2.abs());
    }

    #[test]
    fn weyl_kappa0_collapse() {
        // the e = 0 coefficient is Omega_q E_{(q-1)/2} for every q
        for q in 2..=6u32 {
            let w = weyl_coefficients(q).unwrap();
            let expected = sphere_surface(q).unwrap()
                * elliptic_moment(HalfInt::new(q as i64 - 1));
            assert!(
                (w.kappa0() - expected).abs() <= 1e-12 * expected.abs(),
                "q = {q}"
            );
        }
    }

    #[test]
    fn psi_examples() {
        // d=2, e=0, c^2=9: Gbar_3(9) / (4 pi)
        let got = psi_term(2, 0, 9.0).unwrap();
        let gbar3 = specfun::chisq_upper(3, 9.0).unwrap().value();
        assert!((got - gbar3 / (4.0 * PI)).abs() < 1e-15);
        assert!((gbar3 - 0.0292908).abs() < 1e-7);
        // d=2, e=2, c^2=0: 1 / (4 pi)
        let got = psi_term(2, 2, 0.0).unwrap();
        assert!((got - 1.0 / (4.0 * PI)).abs() < 1e-15);
        // e beyond d rejected
        assert!(psi_term(2, 4, 1.0).is_err());
        assert!(psi_term(3, 1, 1.0).is_err());
    }

    #[test]
    fn tail_q2_closed_form_identity() {
        for c in [1.0_f64, 2.0, 3.0, 4.0, 5.0, 6.0] {
            let c2 = c * c;
            let sum = tail_approx(2, c2).unwrap().value;
            let closed = tail_approx_q2(c2).unwrap();
            assert!(
                ((sum - closed) / closed).abs() <= 1e-12,
                "c = {c}: sum {sum}, closed {closed}"
            );
        }
        let at3 = tail_approx(2, 9.0).unwrap().value;
        assert!((at3 - 0.078043).abs() < 1e-6, "{at3}");
        assert_eq!(tail_approx_q2(0.0).unwrap(), 0.0);
    }

    #[test]
    fn tail_monotone_in_threshold() {
        for q in 2..=5u32 {
            let mut prev = f64::INFINITY;
            // the raw expansion still rises at small thresholds for q >= 4
            // (it exceeds 1 there, far outside its asymptotic regime)
            let mut c2 = if q <= 3 { 4.0 } else { 9.0 };
            while c2 <= 40.0 {
                let v = tail_approx(q, c2).unwrap().value;
                assert!(v <= prev + 1e-15, "q={q}, c2={c2}");
                prev = v;
                c2 += 0.5;
            }
        }
    }

    #[test]
    fn tail_term_magnitudes_decrease_in_e() {
        for q in 2..=4u32 {
            for c2 in [16.0, 25.0, 36.0] {
                let t = tail_approx(q, c2).unwrap();
                for pair in t.terms.windows(2) {
                    assert!(
                        pair[0].1.abs() > pair[1].1.abs(),
                        "q={q}, c2={c2}, terms {:?}",
                        t.terms
                    );
                }
            }
        }
    }

    #[test]
    fn critical_radius_values() {
        let c = critical_radius_constants();
        assert_eq!(c.rho_c, 1.5625);
        assert!((c.theta_c - 0.6435011).abs() < 1e-7);
        assert!((c.theta_c / PI - 0.205).abs() < 1e-3);
        assert!((1.0 + c.theta_c.tan().powi(2) - c.rho_c).abs() < 1e-14);
    }

    #[test]
    fn tube_volume_edge_cases() {
        assert_eq!(tube_volume_fraction(2, 0.0).unwrap(), 0.0);
        let theta_c = critical_radius_constants().theta_c;
        assert!(tube_volume_fraction(2, theta_c + 0.01).is_err());
        assert!(tube_volume_fraction(2, -0.1).is_err());
        // a volume fraction stays within the sphere for every q tested
        for q in 2..=4u32 {
            let f = tube_volume_fraction(q, theta_c).unwrap();
            assert!((0.0..=1.0).contains(&f), "q={q}: {f}");
        }
    }

    #[test]
    fn tube_volume_monotone_in_radius() {
        let theta_c = critical_radius_constants().theta_c;
        let mut prev = -1.0;
        for i in 0..=20 {
            let theta = theta_c * i as f64 / 20.0;
            let f = tube_volume_fraction(2, theta).unwrap();
            assert!(f >= prev);
            prev = f;
        }
    }

    #[test]
    fn pvalue_examples() {
        // far tail: envelope equals the raw value
        let p = pvalue(2, 9.0).unwrap();
        assert!(!p.clamped);
        assert!((p.p.value() - 0.0780).abs() < 1e-4);

        let p = pvalue(2, 25.0).unwrap();
        let expected = tail_approx_q2(25.0).unwrap();
        assert!((p.p.value() - expected).abs() < 1e-15);
        assert!((expected - 4.37e-5).abs() < 1e-7);

        // at zero the approximation is out of regime: report 1, flagged
        let p = pvalue(2, 0.0).unwrap();
        assert_eq!(p.p.value(), 1.0);
        assert!(p.clamped);

        // p-values are monotone nonincreasing in the observed maximum
        let mut prev = 1.0;
        for i in 0..=60 {
            let p = pvalue(2, i as f64 * 0.5).unwrap().p.value();
            assert!(p <= prev + 1e-12);
            prev = p;
        }
    }
}
