//! The limiting Gaussian random field of the maximized moment index:
//! coefficient sampling, evaluation of
//!
//! ```text
//!   Z1(h) = <h (x) h (x) h, xi1>,   Z2(h) = <h (x) h (x) h (x) h, xi2>,
//!   I(h)  = Z1(h)^2 + Z2(h)^2,      Z(h, t) = cos t Z1(h) + sin t Z2(h),
//! ```
//!
//! and the embedding of the index manifold
//! M = { (cos t (h (x) h (x) h), sin t (h (x) h (x) h (x) h)) } into S^{p-1}v
//! with p = q^3 + q^4.
//!
//! Tensor layout is row-major lexicographic: entry (i, j, k) of a cubic
//! tensor sits at (i q + j) q + k, and likewise for quartic tensors. All
//! contractions, the coefficient sampling order, and the embedding share
//! this layout.

use crate::cumulant::{dot, UnitDirection};
use crate::error::{Error, Result};
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::FRAC_PI_2;

/// One draw (xi1, xi2) of the limiting field's coefficient vectors,
/// lengths q^3 and q^4.
#[derive(Clone, Debug)]
pub struct FieldCoefficients {
    q: usize,
    xi1: Vec<f64>,
    xi2: Vec<f64>,
}

impl FieldCoefficients {
    pub fn new(q: usize, xi1: Vec<f64>, xi2: Vec<f64>) -> Result<Self> {
        if q < 2 {
            return Err(Error::Domain("field needs q >= 2".into()));
        }
        if xi1.len() != q * q * q {
            return Err(Error::DimensionMismatch {
                expected: q * q * q,
                got: xi1.len(),
            });
        }
        if xi2.len() != q * q * q * q {
            return Err(Error::DimensionMismatch {
                expected: q * q * q * q,
                got: xi2.len(),
            });
        }
        if xi1.iter().chain(&xi2).any(|x| !x.is_finite()) {
            return Err(Error::Domain("non-finite field coefficients".into()));
        }
        Ok(Self { q, xi1, xi2 })
    }

    /// Splits a length-(q^3 + q^4) vector into the two coefficient blocks.
    pub fn from_concat(q: usize, xi: &[f64]) -> Result<Self> {
        let p = q * q * q + q * q * q * q;
        if xi.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: xi.len(),
            });
        }
        let (a, b) = xi.split_at(q * q * q);
        Self::new(q, a.to_vec(), b.to_vec())
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn xi1(&self) -> &[f64] {
        &self.xi1
    }

    pub fn xi2(&self) -> &[f64] {
        &self.xi2
    }

    /// Total coefficient dimension p = q^3 + q^4.
    pub fn p(&self) -> usize {
        self.xi1.len() + self.xi2.len()
    }

    /// Rotates both coefficient tensors by an orthogonal Q (row-major):
    /// xi1'[i,j,k] = sum Q[i,a] Q[j,b] Q[k,c] xi1[a,b,c], and likewise for
    /// xi2. Then Z1'(h) = Z1(Q'h), so the law of the field is unchanged.
    pub fn rotated(&self, qmat: &[f64]) -> Result<Self> {
        let q = self.q;
        if qmat.len() != q * q {
            return Err(Error::DimensionMismatch {
                expected: q * q,
                got: qmat.len(),
            });
        }
        let mut xi1 = self.xi1.clone();
        for mode in 0..3 {
            xi1 = mode_multiply(&xi1, q, 3, mode, qmat);
        }
        let mut xi2 = self.xi2.clone();
        for mode in 0..4 {
            xi2 = mode_multiply(&xi2, q, 4, mode, qmat);
        }
        Self::new(q, xi1, xi2)
    }
}

/// Applies a q x q matrix along one mode of an order-`order` cubic-shaped
/// tensor stored row-major.
fn mode_multiply(t: &[f64], q: usize, order: usize, mode: usize, m: &[f64]) -> Vec<f64> {
    let stride = q.pow((order - 1 - mode) as u32);
    let outer = q.pow(mode as u32);
    let mut out = vec![0.0; t.len()];
    for o in 0..outer {
        for s in 0..stride {
            let base = o * q * stride + s;
            for inew in 0..q {
                let mut acc = 0.0;
                for iold in 0..q {
                    acc += m[inew * q + iold] * t[base + iold * stride];
                }
                out[base + inew * stride] = acc;
            }
        }
    }
    out
}

/// Draws q^3 + q^4 iid standard normal coefficients: the xi1 block first,
/// then xi2, each filled in layout order.
pub fn sample_coefficients<R: Rng + ?Sized>(q: usize, rng: &mut R) -> Result<FieldCoefficients> {
    if q < 2 {
        return Err(Error::Domain("field needs q >= 2".into()));
    }
    let xi1 = (0..q * q * q).map(|_| rng.sample(StandardNormal)).collect();
    let xi2 = (0..q * q * q * q).map(|_| rng.sample(StandardNormal)).collect();
    FieldCoefficients::new(q, xi1, xi2)
}

/// Field values at one direction.
#[derive(Clone, Copy, Debug)]
pub struct FieldValue {
    pub z1: f64,
    pub z2: f64,
    /// z1^2 + z2^2
    pub i_value: f64,
}

/// h (x) h (x) h flattened in the shared layout.
pub fn tensor_pow3(h: &[f64]) -> Vec<f64> {
    let q = h.len();
    let mut out = Vec::with_capacity(q * q * q);
    for &a in h {
        for &b in h {
            let ab = a * b;
            for &c in h {
                out.push(ab * c);
            }
        }
    }
    out
}

/// h (x) h (x) h (x) h flattened in the shared layout.
pub fn tensor_pow4(h: &[f64]) -> Vec<f64> {
    let q = h.len();
    let mut out = Vec::with_capacity(q * q * q * q);
    for &a in h {
        for &b in h {
            let ab = a * b;
            for &c in h {
                let abc = ab * c;
                for &d in h {
                    out.push(abc * d);
                }
            }
        }
    }
    out
}

pub(crate) fn contract3(xi1: &[f64], h: &[f64]) -> f64 {
    let q = h.len();
    let mut acc = 0.0;
    let mut idx = 0;
    for a in 0..q {
        let ha = h[a];
        for b in 0..q {
            let hab = ha * h[b];
            for c in 0..q {
                acc += xi1[idx] * hab * h[c];
                idx += 1;
            }
        }
    }
    acc
}

pub(crate) fn contract4(xi2: &[f64], h: &[f64]) -> f64 {
    let q = h.len();
    let mut acc = 0.0;
    let mut idx = 0;
    for a in 0..q {
        let ha = h[a];
        for b in 0..q {
            let hab = ha * h[b];
            for c in 0..q {
                let habc = hab * h[c];
                for d in 0..q {
                    acc += xi2[idx] * habc * h[d];
                    idx += 1;
                }
            }
        }
    }
    acc
}

/// Z1, Z2 and I at a direction h.
pub fn eval_z(coeffs: &FieldCoefficients, h: &UnitDirection) -> Result<FieldValue> {
    if coeffs.q() != h.q() {
        return Err(Error::DimensionMismatch {
            expected: coeffs.q(),
            got: h.q(),
        });
    }
    let z1 = contract3(&coeffs.xi1, h.as_ref());
    let z2 = contract4(&coeffs.xi2, h.as_ref());
    Ok(FieldValue {
        z1,
        z2,
        i_value: z1 * z1 + z2 * z2,
    })
}

/// Z(h, theta) = cos(theta) Z1(h) + sin(theta) Z2(h) for theta in
/// (-pi/2, pi/2]. Maximizing over theta at fixed h gives sqrt(I(h)).
pub fn eval_z_angle(coeffs: &FieldCoefficients, h: &UnitDirection, theta: f64) -> Result<f64> {
    check_theta(theta)?;
    let v = eval_z(coeffs, h)?;
    Ok(theta.cos() * v.z1 + theta.sin() * v.z2)
}

fn check_theta(theta: f64) -> Result<()> {
    if !(theta > -FRAC_PI_2 && theta <= FRAC_PI_2) {
        return Err(Error::Domain(format!("theta {theta} outside (-pi/2, pi/2]")));
    }
    Ok(())
}

/// A point of the index manifold M, carrying its chart coordinates and its
/// unit-norm embedding in R^p.
#[derive(Clone, Debug)]
pub struct ManifoldPoint {
    h: UnitDirection,
    theta: f64,
    embedding: Vec<f64>,
}

impl ManifoldPoint {
    pub fn h(&self) -> &UnitDirection {
        &self.h
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn embedding(&self) -> &[f64] {
        &self.embedding
    }

    pub fn q(&self) -> usize {
        self.h.q()
    }
}

/// The raw embedding map, defined for any theta; range checking is the
/// caller's concern. Used internally for finite differencing across the
/// chart boundary.
pub(crate) fn embed_raw(h: &[f64], theta: f64) -> Vec<f64> {
    let (ct, st) = (theta.cos(), theta.sin());
    let mut out = tensor_pow3(h);
    for x in &mut out {
        *x *= ct;
    }
    let mut quartic = tensor_pow4(h);
    for x in &mut quartic {
        *x *= st;
    }
    out.extend(quartic);
    out
}

/// Embeds (h, theta) into S^{p-1}: the first block is cos(theta) h(x)h(x)h,
/// the second sin(theta) h(x)h(x)h(x)h. Rejects theta outside (-pi/2, pi/2];
/// callers wanting the antipodal wrap must normalize themselves.
pub fn embed(h: &UnitDirection, theta: f64) -> Result<ManifoldPoint> {
    check_theta(theta)?;
    let embedding = embed_raw(h.as_ref(), theta);
    Ok(ManifoldPoint {
        h: h.clone(),
        theta,
        embedding,
    })
}

/// Inner product of two manifold points in the ambient space; equals
/// cos(t) cos(t~) cos^3(psi) + sin(t) sin(t~) cos^4(psi) with
/// cos(psi) = <h, h~>.
pub fn manifold_inner(p1: &ManifoldPoint, p2: &ManifoldPoint) -> Result<f64> {
    if p1.q() != p2.q() {
        return Err(Error::DimensionMismatch {
            expected: p1.q(),
            got: p2.q(),
        });
    }
    Ok(dot(&p1.embedding, &p2.embedding))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cumulant::norm2;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_direction(rng: &mut ChaCha8Rng, q: usize) -> UnitDirection {
        UnitDirection::normalized((0..q).map(|_| rng.sample(StandardNormal)).collect()).unwrap()
    }

    #[test]
    fn sample_lengths_and_determinism() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let c = sample_coefficients(2, &mut rng).unwrap();
        assert_eq!(c.xi1().len(), 8);
        assert_eq!(c.xi2().len(), 16);
        assert_eq!(c.p(), 24);

        let mut rng2 = ChaCha8Rng::seed_from_u64(42);
        let c2 = sample_coefficients(2, &mut rng2).unwrap();
        assert_eq!(c.xi1(), c2.xi1());
        assert_eq!(c.xi2(), c2.xi2());
        assert!(sample_coefficients(1, &mut rng).is_err());
    }

    #[test]
    fn sampled_coefficients_are_standard_normal() {
        let mut rng = ChaCha8Rng::seed_from_u64(4242);
        let mut pooled = Vec::new();
        while pooled.len() < 100_000 {
            let c = sample_coefficients(3, &mut rng).unwrap();
            pooled.extend_from_slice(c.xi1());
            pooled.extend_from_slice(c.xi2());
        }
        let n = pooled.len() as f64;
        let mean = pooled.iter().sum::<f64>() / n;
        let var = pooled.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        assert!(mean.abs() < 3.0 / n.sqrt(), "mean {mean}");
        assert!((var - 1.0).abs() < 3.0 * (2.0 / n).sqrt(), "var {var}");
    }

    #[test]
    fn eval_z_indicator_and_zero() {
        let mut xi1 = vec![0.0; 8];
        xi1[0] = 1.0; // entry (1,1,1)
        let coeffs = FieldCoefficients::new(2, xi1, vec![0.0; 16]).unwrap();
        let v = eval_z(&coeffs, &UnitDirection::axis(2, 0)).unwrap();
        assert_eq!((v.z1, v.z2, v.i_value), (1.0, 0.0, 1.0));

        let inv = 1.0 / 2.0_f64.sqrt();
        let h = UnitDirection::new(vec![inv, inv]).unwrap();
        let v = eval_z(&coeffs, &h).unwrap();
        assert!((v.z1 - 2.0_f64.powf(-1.5)).abs() < 1e-15);

        let zero = FieldCoefficients::new(2, vec![0.0; 8], vec![0.0; 16]).unwrap();
        let v = eval_z(&zero, &h).unwrap();
        assert_eq!((v.z1, v.z2, v.i_value), (0.0, 0.0, 0.0));
    }

    #[test]
    fn eval_z_angle_endpoints_and_maximum() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let coeffs = sample_coefficients(3, &mut rng).unwrap();
        let h = random_direction(&mut rng, 3);
        let v = eval_z(&coeffs, &h).unwrap();
        assert!((eval_z_angle(&coeffs, &h, 0.0).unwrap() - v.z1).abs() < 1e-15);
        assert!((eval_z_angle(&coeffs, &h, FRAC_PI_2).unwrap() - v.z2).abs() < 1e-15);
        assert!(eval_z_angle(&coeffs, &h, -FRAC_PI_2).is_err());

        let theta_star = v.z2.atan2(v.z1);
        if theta_star > -FRAC_PI_2 && theta_star <= FRAC_PI_2 {
            let at_star = eval_z_angle(&coeffs, &h, theta_star).unwrap();
            assert!((at_star - v.i_value.sqrt()).abs() < 1e-12);
        }
        // brute scan of the chart never beats sqrt(I(h))
        let mut best = f64::NEG_INFINITY;
        for i in 1..=2000 {
            let theta = -FRAC_PI_2 + PI * i as f64 / 2000.0;
            best = best.max(eval_z_angle(&coeffs, &h, theta).unwrap());
        }
        assert!(best <= v.i_value.sqrt() + 1e-9);
    }

    #[test]
    fn embedding_unit_norm_and_indicator() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let q = 2 + (rng.random::<u32>() % 3) as usize;
            let h = random_direction(&mut rng, q);
            let theta = -FRAC_PI_2 + PI * (rng.random::<f64>() * 0.999999 + 1e-9);
            let p = embed(&h, theta).unwrap();
            assert!((norm2(p.embedding()) - 1.0).abs() < 1e-12);
        }
        let p = embed(&UnitDirection::axis(2, 0), 0.0).unwrap();
        let mut expected = vec![0.0; 24];
        expected[0] = 1.0;
        assert_eq!(p.embedding(), &expected[..]);
    }

    #[test]
    fn embedding_inner_product_consistency() {
        // <embed(h, t), (xi1, xi2)> must equal Z(h, t) computed by
        // contraction, two independent code paths
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..50 {
            let coeffs = sample_coefficients(2, &mut rng).unwrap();
            let h = random_direction(&mut rng, 2);
            let theta = -FRAC_PI_2 + PI * (rng.random::<f64>() * 0.999999 + 1e-9);
            let p = embed(&h, theta).unwrap();
            let concat: Vec<f64> = coeffs.xi1().iter().chain(coeffs.xi2()).copied().collect();
            let via_embed = dot(p.embedding(), &concat);
            let via_eval = eval_z_angle(&coeffs, &h, theta).unwrap();
            assert!((via_embed - via_eval).abs() < 1e-12);
        }
    }

    #[test]
    fn manifold_inner_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for q in [2usize, 3] {
            for _ in 0..40 {
                let h1 = random_direction(&mut rng, q);
                let h2 = random_direction(&mut rng, q);
                let t1 = -FRAC_PI_2 + PI * (rng.random::<f64>() * 0.999999 + 1e-9);
                let t2 = -FRAC_PI_2 + PI * (rng.random::<f64>() * 0.999999 + 1e-9);
                let p1 = embed(&h1, t1).unwrap();
                let p2 = embed(&h2, t2).unwrap();
                let got = manifold_inner(&p1, &p2).unwrap();
                let cos_psi = dot(h1.as_ref(), h2.as_ref());
                let expected = t1.cos() * t2.cos() * cos_psi.powi(3)
                    + t1.sin() * t2.sin() * cos_psi.powi(4);
                assert!((got - expected).abs() < 1e-13);
            }
        }
        // self inner product is 1
        let h = random_direction(&mut rng, 2);
        let p = embed(&h, 0.4).unwrap();
        assert!((manifold_inner(&p, &p).unwrap() - 1.0).abs() < 1e-14);
        // orthogonal directions kill every term
        let p1 = embed(&UnitDirection::axis(2, 0), 0.3).unwrap();
        let p2 = embed(&UnitDirection::axis(2, 1), -0.2).unwrap();
        assert!(manifold_inner(&p1, &p2).unwrap().abs() < 1e-15);
        // antipodal pair with opposite angles: psi = pi, t~ = -t gives -1
        let h = UnitDirection::axis(2, 0);
        let p1 = embed(&h, 0.3).unwrap();
        let p2 = embed(&h.flipped(), -0.3).unwrap();
        assert!((manifold_inner(&p1, &p2).unwrap() + 1.0).abs() < 1e-14);
    }

    #[test]
    fn field_parity_in_h() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let coeffs = sample_coefficients(3, &mut rng).unwrap();
        for _ in 0..20 {
            let h = random_direction(&mut rng, 3);
            let v = eval_z(&coeffs, &h).unwrap();
            let w = eval_z(&coeffs, &h.flipped()).unwrap();
            assert!((v.z1 + w.z1).abs() < 1e-12);
            assert!((v.z2 - w.z2).abs() < 1e-12);
            assert!((v.i_value - w.i_value).abs() < 1e-12);
        }
    }

    #[test]
    fn rotation_preserves_values_at_rotated_argument() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let coeffs = sample_coefficients(2, &mut rng).unwrap();
        let angle = 0.7_f64;
        // rotation matrix by `angle`, row-major
        let qmat = vec![angle.cos(), -angle.sin(), angle.sin(), angle.cos()];
        let rotated = coeffs.rotated(&qmat).unwrap();
        for _ in 0..20 {
            let h = random_direction(&mut rng, 2);
            // Z1'(h) = Z1(Q' h)
            let qth = UnitDirection::normalized(vec![
                qmat[0] * h.as_ref()[0] + qmat[2] * h.as_ref()[1],
                qmat[1] * h.as_ref()[0] + qmat[3] * h.as_ref()[1],
            ])
            .unwrap();
            let a = eval_z(&rotated, &h).unwrap();
            let b = eval_z(&coeffs, &qth).unwrap();
            assert!((a.z1 - b.z1).abs() < 1e-12);
            assert!((a.z2 - b.z2).abs() < 1e-12);
        }
    }

    #[test]
    fn variance_normalization_and_covariance_law() {
        // with fixed (h, t) pairs, Z(h, t) is standard normal and
        // Cov(Z(x), Z(x~)) = <x, x~>
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let h1 = random_direction(&mut rng, 2);
        let h2 = random_direction(&mut rng, 2);
        let (t1, t2) = (0.25, -0.9);
        let p1 = embed(&h1, t1).unwrap();
        let p2 = embed(&h2, t2).unwrap();
        let reps = 40_000;
        let mut z1s = Vec::with_capacity(reps);
        let mut z2s = Vec::with_capacity(reps);
        for rep in 0..reps {
            let mut rng_rep = ChaCha8Rng::seed_from_u64(1000);
            rng_rep.set_stream(rep as u64);
            let c = sample_coefficients(2, &mut rng_rep).unwrap();
            z1s.push(eval_z_angle(&c, &h1, t1).unwrap());
            z2s.push(eval_z_angle(&c, &h2, t2).unwrap());
        }
        let nf = reps as f64;
        let m1 = z1s.iter().sum::<f64>() / nf;
        let m2 = z2s.iter().sum::<f64>() / nf;
        let v1 = z1s.iter().map(|z| (z - m1) * (z - m1)).sum::<f64>() / nf;
        let v2 = z2s.iter().map(|z| (z - m2) * (z - m2)).sum::<f64>() / nf;
        let cov = z1s
            .iter()
            .zip(&z2s)
            .map(|(a, b)| (a - m1) * (b - m2))
            .sum::<f64>()
            / nf;
        let se_var = (2.0 / nf).sqrt();
        assert!((v1 - 1.0).abs() < 3.0 * se_var, "var1 {v1}");
        assert!((v2 - 1.0).abs() < 3.0 * se_var, "var2 {v2}");
        let r = manifold_inner(&p1, &p2).unwrap();
        let se_cov = ((1.0 + r * r) / nf).sqrt();
        assert!((cov - r).abs() < 3.0 * se_cov, "cov {cov} vs r {r}");
    }
}
