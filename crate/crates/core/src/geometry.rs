//! Independent numerical verification of the index manifold's geometry:
//! the metric block structure, the volume element, Gauss curvature at
//! q = 2, the projection functional h(x, y) behind the critical radius,
//! its reduction to a three-variable ratio f/g, and the critical-point
//! families of the covariance function. Everything here recomputes, by
//! finite differences and quadrature, quantities that `tube` produces in
//! closed form.

use crate::cumulant::{dot, norm2};
use crate::error::{Error, Result};
use crate::field::{self, ManifoldPoint};
use crate::quad;
use crate::specfun;
use std::f64::consts::{FRAC_PI_2, PI};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// The squared-speed factor of the angular direction: v(t) = 3 cos^2 t +
/// 4 sin^2 t, always in [3, 4].
pub fn v_theta(theta: f64) -> f64 {
    let s = theta.sin();
    3.0 + s * s
}

/// alpha(t) = -6/v + 12/v^2, the sphere-pair curvature contraction.
pub fn alpha_theta(theta: f64) -> f64 {
    let v = v_theta(theta);
    -6.0 / v + 12.0 / (v * v)
}

/// beta(t) = -12/v^2, the mixed angular-spherical contraction.
pub fn beta_theta(theta: f64) -> f64 {
    let v = v_theta(theta);
    -12.0 / (v * v)
}

/// A point of the manifold chart: hyperspherical coordinates for the
/// direction plus the angular coordinate.
#[derive(Clone, Debug)]
pub struct ChartPoint {
    /// q - 1 sphere coordinates.
    pub coords: Vec<f64>,
    pub theta: f64,
}

fn chart_direction(q: usize, coords: &[f64]) -> Vec<f64> {
    match q {
        2 => vec![coords[0].cos(), coords[0].sin()],
        3 => {
            let (a, b) = (coords[0], coords[1]);
            vec![a.sin() * b.cos(), a.sin() * b.sin(), a.cos()]
        }
        _ => unreachable!("charts implemented for q = 2, 3"),
    }
}

fn chart_gbar(q: usize, coords: &[f64]) -> Vec<Vec<f64>> {
    match q {
        2 => vec![vec![1.0]],
        3 => {
            let s = coords[0].sin();
            vec![vec![1.0, 0.0], vec![0.0, s * s]]
        }
        _ => unreachable!(),
    }
}

/// Metric of M at a chart point, assembled from finite differences of the
/// embedding. The sphere block must equal v(theta) times the sphere metric,
/// the angular entry must be 1, and the blocks must not mix.
#[derive(Clone, Debug)]
pub struct MetricBlock {
    pub theta: f64,
    pub v: f64,
    /// Analytic sphere metric at the chart point.
    pub gbar: Vec<Vec<f64>>,
    /// Full (q x q) Gram matrix, sphere coordinates first, theta last.
    pub full: Vec<Vec<f64>>,
}

const FD_STEP: f64 = 1e-5;
const METRIC_TOL: f64 = 1e-6;

fn embedding_tangents(q: usize, point: &ChartPoint) -> Vec<Vec<f64>> {
    let d = q; // q - 1 sphere directions plus theta
    let mut tangents = Vec::with_capacity(d);
    for i in 0..q - 1 {
        let mut up = point.coords.clone();
        let mut dn = point.coords.clone();
        up[i] += FD_STEP;
        dn[i] -= FD_STEP;
        let e_up = field::embed_raw(&chart_direction(q, &up), point.theta);
        let e_dn = field::embed_raw(&chart_direction(q, &dn), point.theta);
        tangents.push(
            e_up.iter()
                .zip(&e_dn)
                .map(|(a, b)| (a - b) / (2.0 * FD_STEP))
                .collect(),
        );
    }
    let h = chart_direction(q, &point.coords);
    let e_up = field::embed_raw(&h, point.theta + FD_STEP);
    let e_dn = field::embed_raw(&h, point.theta - FD_STEP);
    tangents.push(
        e_up.iter()
            .zip(&e_dn)
            .map(|(a, b)| (a - b) / (2.0 * FD_STEP))
            .collect(),
    );
    tangents
}

pub fn metric_numeric(q: usize, point: &ChartPoint) -> Result<MetricBlock> {
    if !(q == 2 || q == 3) {
        return Err(Error::Domain("metric charts cover q = 2, 3".into()));
    }
    if point.coords.len() != q - 1 {
        return Err(Error::DimensionMismatch {
            expected: q - 1,
            got: point.coords.len(),
        });
    }
    if q == 3 && point.coords[0].sin().abs() < 0.05 {
        return Err(Error::Domain("chart point too close to the pole".into()));
    }
    let tangents = embedding_tangents(q, point);
    let d = q;
    let mut full = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in 0..d {
            full[i][j] = dot(&tangents[i], &tangents[j]);
        }
    }
    let v = v_theta(point.theta);
    let gbar = chart_gbar(q, &point.coords);
    // assert the block structure before handing the matrix out
    if (full[d - 1][d - 1] - 1.0).abs() > METRIC_TOL {
        return Err(Error::Numeric(format!(
            "metric g_tt = {} is not 1",
            full[d - 1][d - 1]
        )));
    }
    for i in 0..d - 1 {
        if full[i][d - 1].abs() > METRIC_TOL {
            return Err(Error::Numeric(format!(
                "metric mixes sphere and angular blocks: g[{i}][t] = {}",
                full[i][d - 1]
            )));
        }
        for j in 0..d - 1 {
            if (full[i][j] - v * gbar[i][j]).abs() > METRIC_TOL {
                return Err(Error::Numeric(format!(
                    "sphere block g[{i}][{j}] = {} differs from v gbar = {}",
                    full[i][j],
                    v * gbar[i][j]
                )));
            }
        }
    }
    Ok(MetricBlock {
        theta: point.theta,
        v,
        gbar,
        full,
    })
}

/// Volume of M by quadrature of the volume element:
/// Omega_q \int v(t)^{(q-1)/2} dt over (-pi/2, pi/2]. Equals kappa_0.
pub fn manifold_volume_numeric(q: u32) -> Result<f64> {
    if q < 2 {
        return Err(Error::Domain("manifold needs q >= 2".into()));
    }
    let omega = specfun::sphere_surface(q)?;
    let power = (q as f64 - 1.0) / 2.0;
    let integral = 2.0
        * quad::integrate(|t: f64| v_theta(t).powf(power), 0.0, FRAC_PI_2, 1e-12);
    Ok(omega * integral)
}

/// Gauss curvature comparison at q = 2: the closed forms alpha, beta versus
/// a Brioschi-formula evaluation on the finite-difference metric.
#[derive(Clone, Copy, Debug)]
pub struct CurvatureData {
    pub theta: f64,
    pub alpha: f64,
    pub beta: f64,
    /// For the 2-dimensional manifold the degree-2 contraction is beta.
    pub h2_closed: f64,
    /// Numerical Gauss curvature; K - 1 should match h2_closed.
    pub gauss_curv_fd: f64,
}

fn metric_entries_q2(phi: f64, theta: f64) -> (f64, f64, f64) {
    let point = ChartPoint {
        coords: vec![phi],
        theta,
    };
    let t = embedding_tangents(2, &point);
    (dot(&t[0], &t[0]), dot(&t[0], &t[1]), dot(&t[1], &t[1]))
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

pub fn curvature_check_q2(theta: f64) -> Result<CurvatureData> {
    let phi = 0.37; // metric is phi-independent; any nonsingular point works
    // outer step for metric derivatives: large enough that the inner FD
    // noise (~1e-10 on metric entries) stays below the second-difference
    // truncation error
    let h = 5e-3;
    let at = |u: f64, v: f64| metric_entries_q2(phi + u, theta + v);
    let (e0, f0, g0) = at(0.0, 0.0);
    let (ep, _, _) = at(0.0, h);
    let (em, _, _) = at(0.0, -h);
    let (_, _, gp) = at(h, 0.0);
    let (_, _, gm) = at(-h, 0.0);
    let e_v = (ep - em) / (2.0 * h);
    let e_vv = (ep - 2.0 * e0 + em) / (h * h);
    let g_u = (gp - gm) / (2.0 * h);
    let g_uu = (gp - 2.0 * g0 + gm) / (h * h);
    let (e_up, _, _) = at(h, 0.0);
    let (e_um, _, _) = at(-h, 0.0);
    let e_u = (e_up - e_um) / (2.0 * h);
    let (_, _, g_vp) = at(0.0, h);
    let (_, _, g_vm) = at(0.0, -h);
    let g_v = (g_vp - g_vm) / (2.0 * h);
    let (_, fpp, _) = at(h, h);
    let (_, fpm, _) = at(h, -h);
    let (_, fmp, _) = at(-h, h);
    let (_, fmm, _) = at(-h, -h);
    let f_uv = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
    let (_, f_up, _) = at(h, 0.0);
    let (_, f_um, _) = at(-h, 0.0);
    let f_u = (f_up - f_um) / (2.0 * h);
    let (_, f_vp, _) = at(0.0, h);
    let (_, f_vm, _) = at(0.0, -h);
    let f_v = (f_vp - f_vm) / (2.0 * h);

    let m1 = [
        [-0.5 * e_vv + f_uv - 0.5 * g_uu, 0.5 * e_u, f_u - 0.5 * e_v],
        [f_v - 0.5 * g_u, e0, f0],
        [0.5 * g_v, f0, g0],
    ];
    let m2 = [
        [0.0, 0.5 * e_v, 0.5 * g_u],
        [0.5 * e_v, e0, f0],
        [0.5 * g_u, f0, g0],
    ];
    let denom = (e0 * g0 - f0 * f0).powi(2);
    let k = (det3(&m1) - det3(&m2)) / denom;
    if !k.is_finite() {
        return Err(Error::Numeric("curvature finite differences diverged".into()));
    }
    Ok(CurvatureData {
        theta,
        alpha: alpha_theta(theta),
        beta: beta_theta(theta),
        h2_closed: beta_theta(theta),
        gauss_curv_fd: k,
    })
}

/// Degree e curvature invariant by direct assembly and quadrature:
/// the degree-2 contraction has (q-1 choose 2) sphere pairs contributing
/// alpha each and (q-1) mixed pairs contributing beta each. Implemented
/// for e = 0 (any q) and e = 2 (q = 2, 3); higher degrees would need
/// fourth-order contractions.
pub fn weyl_invariant_numeric(q: u32, e: u32) -> Result<f64> {
    match e {
        0 => manifold_volume_numeric(q),
        2 if q == 2 || q == 3 => {
            let omega = specfun::sphere_surface(q)?;
            let pairs = ((q - 1) * (q - 2) / 2) as f64;
            let mixed = (q - 1) as f64;
            let power = (q as f64 - 1.0) / 2.0;
            let integral = 2.0
                * quad::integrate(
                    |t: f64| {
                        (pairs * alpha_theta(t) + mixed * beta_theta(t))
                            * v_theta(t).powf(power)
                    },
                    0.0,
                    FRAC_PI_2,
                    1e-12,
                );
            Ok(omega * integral)
        }
        _ => Err(Error::Domain(format!(
            "numeric invariant verification covers e = 0 and e = 2 at q = 2, 3; got e = {e}, q = {q}"
        ))),
    }
}

/// The projection functional whose supremum determines the critical radius:
/// h(x, y) = (1 - <y, P_x y>) / (1 - <x, y>)^2 with P_x the orthogonal
/// projection onto span{x} + T_x M, the tangent basis built numerically.
pub fn h_func(x: &ManifoldPoint, y: &ManifoldPoint) -> Result<f64> {
    if x.q() != y.q() {
        return Err(Error::DimensionMismatch {
            expected: x.q(),
            got: y.q(),
        });
    }
    let inner = field::manifold_inner(x, y)?;
    if 1.0 - inner < 1e-12 {
        return Err(Error::Domain(
            "points coincide; use the local limit instead".into(),
        ));
    }
    let q = x.q();
    let h = x.h().as_ref();

    // orthonormal basis of the direction's tangent space on S^{q-1}
    let mut sphere_basis: Vec<Vec<f64>> = Vec::new();
    for j in 0..q {
        let mut v = vec![0.0; q];
        v[j] = 1.0;
        let r = dot(&v, h);
        for k in 0..q {
            v[k] -= r * h[k];
        }
        for u in &sphere_basis {
            let r = dot(&v, u);
            for k in 0..q {
                v[k] -= r * u[k];
            }
        }
        let n = norm2(&v);
        if n > 1e-8 {
            sphere_basis.push(v.into_iter().map(|x| x / n).collect());
        }
    }

    // tangent vectors of M at x by differencing the embedding
    let mut frame: Vec<Vec<f64>> = vec![x.embedding().to_vec()];
    for u in &sphere_basis {
        let mut up: Vec<f64> = h.iter().zip(u).map(|(hi, ui)| hi + FD_STEP * ui).collect();
        let mut dn: Vec<f64> = h.iter().zip(u).map(|(hi, ui)| hi - FD_STEP * ui).collect();
        let (nu, nd) = (norm2(&up), norm2(&dn));
        for v in &mut up {
            *v /= nu;
        }
        for v in &mut dn {
            *v /= nd;
        }
        let e_up = field::embed_raw(&up, x.theta());
        let e_dn = field::embed_raw(&dn, x.theta());
        frame.push(
            e_up.iter()
                .zip(&e_dn)
                .map(|(a, b)| (a - b) / (2.0 * FD_STEP))
                .collect(),
        );
    }
    let e_up = field::embed_raw(h, x.theta() + FD_STEP);
    let e_dn = field::embed_raw(h, x.theta() - FD_STEP);
    frame.push(
        e_up.iter()
            .zip(&e_dn)
            .map(|(a, b)| (a - b) / (2.0 * FD_STEP))
            .collect(),
    );

    // modified Gram-Schmidt
    let mut ortho: Vec<Vec<f64>> = Vec::with_capacity(frame.len());
    for mut v in frame {
        for u in &ortho {
            let r = dot(&v, u);
            for (vi, ui) in v.iter_mut().zip(u) {
                *vi -= r * ui;
            }
        }
        let n = norm2(&v);
        if n > 1e-10 {
            ortho.push(v.into_iter().map(|x| x / n).collect());
        }
    }

    let yv = y.embedding();
    let mut projected_sq = 0.0;
    for u in &ortho {
        let c = dot(yv, u);
        projected_sq += c * c;
    }
    Ok((1.0 - projected_sq) / (1.0 - inner).powi(2))
}

/// The reduced numerator f and denominator g of h(x, y) as functions of
/// the great-circle angle psi between the directions and the two angular
/// coordinates. The ratio depends on nothing else, whatever q is.
pub fn fg_reduced(psi: f64, theta: f64, theta_tilde: f64) -> Result<(f64, f64)> {
    if !(0.0..=PI + 1e-12).contains(&psi) {
        return Err(Error::Domain(format!("psi {psi} outside [0, pi]")));
    }
    for t in [theta, theta_tilde] {
        if !(t > -FRAC_PI_2 && t <= FRAC_PI_2) {
            return Err(Error::Domain(format!("angle {t} outside (-pi/2, pi/2]")));
        }
    }
    let cp = psi.cos();
    let sp = psi.sin();
    let (ct, st) = (theta.cos(), theta.sin());
    let (ctt, stt) = (theta_tilde.cos(), theta_tilde.sin());
    let v = 3.0 * ct * ct + 4.0 * st * st;
    let w = 3.0 * cp * cp * ctt * ct + 4.0 * cp * cp * cp * stt * st;
    let f = 1.0 - cp.powi(6) * ctt * ctt - cp.powi(8) * stt * stt - w * w / v * sp * sp;
    let g = (1.0 - cp.powi(3) * ctt * ct - cp.powi(4) * stt * st).powi(2);
    Ok((f, g))
}

fn covariance(psi: f64, theta: f64, theta_tilde: f64) -> f64 {
    let cp = psi.cos();
    theta.cos() * theta_tilde.cos() * cp.powi(3) + theta.sin() * theta_tilde.sin() * cp.powi(4)
}

/// The coincidence-limit ratio 12 ((1+u)(3+u) + 4k) / ((3+u)(k+3+u)^2)
/// governing the local critical radius; u = sin^2 theta, k the squared
/// ratio of the angular to spherical separation rates.
pub fn local_limit_ratio(u: f64, k: f64) -> f64 {
    12.0 * ((1.0 + u) * (3.0 + u) + 4.0 * k) / ((3.0 + u) * (k + 3.0 + u).powi(2))
}

/// Scan configuration for the critical-radius verification.
#[derive(Clone, Copy, Debug)]
pub struct ScanConfig {
    /// Grid points per axis for the global f/g scan (>= 64).
    pub resolution: usize,
    /// Coincidence-exclusion radius in (psi, delta).
    pub exclusion: f64,
    /// Upper bound of the k sweep in the local formula.
    pub k_max: f64,
    /// Grid points for the (u, k) sweep.
    pub local_resolution: usize,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            resolution: 128,
            exclusion: 1e-2,
            k_max: 12.0,
            local_resolution: 2000,
        }
    }
}

/// Everything the critical-radius verification produces.
#[derive(Clone, Debug)]
pub struct CriticalScanResult {
    /// Supremum of the local-limit formula (must be 16/9).
    pub sup_fg: f64,
    pub attained_u: f64,
    pub attained_k: f64,
    /// Largest ratio seen by the global grid away from coincidence.
    pub grid_sup: f64,
    pub grid_argmax: (f64, f64, f64),
    /// The non-diagonal critical families as (covariance, half-angle).
    pub critical_values: Vec<(f64, f64)>,
    pub theta_c: f64,
    pub rho_c: f64,
}

fn scan_slice(psi: f64, res: usize, exclusion: f64) -> (f64, (f64, f64, f64)) {
    let mut best = (f64::NEG_INFINITY, (0.0, 0.0, 0.0));
    for j in 0..res {
        let theta = -FRAC_PI_2 + PI * (j as f64 + 1.0) / res as f64;
        for l in 0..res {
            let theta_tilde = -FRAC_PI_2 + PI * (l as f64 + 1.0) / res as f64;
            let delta = theta_tilde - theta;
            if psi.abs() < exclusion && delta.abs() < exclusion {
                continue;
            }
            if covariance(psi, theta, theta_tilde) > 1.0 - 1e-9 {
                continue; // wrapped coincidence at the chart boundary
            }
            let (f, g) = fg_reduced(psi, theta, theta_tilde).expect("grid in range");
            if g < 1e-280 {
                continue;
            }
            let ratio = f / g;
            if ratio > best.0 {
                best = (ratio, (psi, theta, theta_tilde));
            }
        }
    }
    best
}

/// Verifies that the supremum of f/g is 16/9, attained only in the
/// coincidence limit at u = 0, k = 3/2, and assembles the critical radius
/// from the local limit and the critical-point families.
pub fn sup_fg_scan(config: &ScanConfig) -> Result<CriticalScanResult> {
    if config.resolution < 64 {
        return Err(Error::Domain("scan needs at least 64 points per axis".into()));
    }

    // local-limit sweep over (u, k); for each u also try the stationary
    // k(u) = (3+u)(1-u)/2 directly
    let mut sup_local = f64::NEG_INFINITY;
    let (mut at_u, mut at_k) = (0.0, 0.0);
    let lr = config.local_resolution;
    for iu in 0..=lr {
        let u = iu as f64 / lr as f64;
        let k_stat = (3.0 + u) * (1.0 - u) / 2.0;
        let mut candidates = vec![k_stat.max(0.0)];
        for ik in 0..=lr {
            candidates.push(config.k_max * ik as f64 / lr as f64);
        }
        for k in candidates {
            let val = local_limit_ratio(u, k);
            if val > sup_local {
                sup_local = val;
                at_u = u;
                at_k = k;
            }
        }
    }

    // global grid scan away from coincidence
    let res = config.resolution;
    let psis: Vec<f64> = (0..=res).map(|i| PI * i as f64 / res as f64).collect();
    #[cfg(feature = "parallel")]
    let slices: Vec<(f64, (f64, f64, f64))> = psis
        .par_iter()
        .map(|&psi| scan_slice(psi, res, config.exclusion))
        .collect();
    #[cfg(not(feature = "parallel"))]
    let slices: Vec<(f64, (f64, f64, f64))> = psis
        .iter()
        .map(|&psi| scan_slice(psi, res, config.exclusion))
        .collect();
    let mut grid_sup = f64::NEG_INFINITY;
    let mut grid_argmax = (0.0, 0.0, 0.0);
    for (val, arg) in slices {
        if val > grid_sup {
            grid_sup = val;
            grid_argmax = arg;
        }
    }

    let critical_values = critical_points_check()?;
    let min_half_angle = critical_values
        .iter()
        .map(|&(_, half)| half)
        .fold(f64::INFINITY, f64::min);
    let theta_local = (1.0 / sup_local.sqrt()).atan();
    let theta_c = theta_local.min(min_half_angle);
    Ok(CriticalScanResult {
        sup_fg: sup_local,
        attained_u: at_u,
        attained_k: at_k,
        grid_sup,
        grid_argmax,
        critical_values,
        theta_c,
        rho_c: 1.0 + theta_c.tan().powi(2),
    })
}

fn grad_covariance(x: &[f64; 3]) -> [f64; 3] {
    let (psi, theta, tt) = (x[0], x[1], x[2]);
    let (cp, sp) = (psi.cos(), psi.sin());
    let (ct, st) = (theta.cos(), theta.sin());
    let (ctt, stt) = (tt.cos(), tt.sin());
    [
        -sp * (3.0 * ct * ctt * cp * cp + 4.0 * st * stt * cp * cp * cp),
        -st * ctt * cp.powi(3) + ct * stt * cp.powi(4),
        -ct * stt * cp.powi(3) + st * ctt * cp.powi(4),
    ]
}

fn clamp_domain(x: &mut [f64; 3]) {
    x[0] = x[0].clamp(0.0, PI);
    for i in 1..3 {
        x[i] = x[i].clamp(-FRAC_PI_2 + 1e-9, FRAC_PI_2);
    }
}

fn solve3(a: &mut [[f64; 4]; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let mut pivot = col;
        for row in col + 1..3 {
            if a[row][col].abs() > a[pivot][col].abs() {
                pivot = row;
            }
        }
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        for row in col + 1..3 {
            let factor = a[row][col] / a[col][col];
            for k in col..4 {
                a[row][k] -= factor * a[col][k];
            }
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let mut acc = a[row][3];
        for k in row + 1..3 {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Some(x)
}

fn refine_critical(mut x: [f64; 3]) -> Option<[f64; 3]> {
    let fd = 1e-7;
    let mut lambda = 1e-3;
    for _ in 0..80 {
        let r = grad_covariance(&x);
        let res2: f64 = r.iter().map(|v| v * v).sum();
        if res2 < 1e-24 {
            return Some(x);
        }
        // Jacobian of the gradient (the Hessian of r) by central differences
        let mut jac = [[0.0; 3]; 3];
        for j in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[j] += fd;
            xm[j] -= fd;
            let rp = grad_covariance(&xp);
            let rm = grad_covariance(&xm);
            for i in 0..3 {
                jac[i][j] = (rp[i] - rm[i]) / (2.0 * fd);
            }
        }
        // Levenberg step on the least-squares problem
        let mut improved = false;
        for _ in 0..10 {
            let mut normal = [[0.0; 4]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    let mut acc = 0.0;
                    for k in 0..3 {
                        acc += jac[k][i] * jac[k][j];
                    }
                    normal[i][j] = acc + if i == j { lambda } else { 0.0 };
                }
                let mut acc = 0.0;
                for k in 0..3 {
                    acc += jac[k][i] * r[k];
                }
                normal[i][3] = -acc;
            }
            let Some(delta) = solve3(&mut normal) else {
                lambda *= 10.0;
                continue;
            };
            let mut cand = x;
            for i in 0..3 {
                cand[i] += delta[i];
            }
            clamp_domain(&mut cand);
            let rc = grad_covariance(&cand);
            let cand_res2: f64 = rc.iter().map(|v| v * v).sum();
            if cand_res2 < res2 {
                x = cand;
                lambda = (lambda / 3.0).max(1e-12);
                improved = true;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    let r = grad_covariance(&x);
    if r.iter().map(|v| v * v).sum::<f64>() < 1e-22 {
        Some(x)
    } else {
        None
    }
}

/// Solves the stationarity system of the covariance away from coincidence
/// and clusters the solutions by covariance value. The index manifold must
/// produce exactly two families: orthogonal directions (r = 0, half-angle
/// pi/4) and antipodal directions with reflected angles (r = -1, half-angle
/// pi/2). Anything else is reported as a verification failure.
pub fn critical_points_check() -> Result<Vec<(f64, f64)>> {
    let res = 40;
    let mut solutions: Vec<(f64, f64)> = Vec::new();
    let starts: Vec<[f64; 3]> = (0..=res)
        .flat_map(|i| {
            (0..res).flat_map(move |j| {
                (0..res).map(move |l| {
                    [
                        PI * i as f64 / res as f64,
                        -FRAC_PI_2 + PI * (j as f64 + 1.0) / res as f64,
                        -FRAC_PI_2 + PI * (l as f64 + 1.0) / res as f64,
                    ]
                })
            })
        })
        .collect();
    #[cfg(feature = "parallel")]
    let refined: Vec<[f64; 3]> = starts
        .par_iter()
        .filter(|x| {
            let r = grad_covariance(x);
            r.iter().map(|v| v * v).sum::<f64>() < 1e-2
        })
        .filter_map(|&x| refine_critical(x))
        .collect();
    #[cfg(not(feature = "parallel"))]
    let refined: Vec<[f64; 3]> = starts
        .iter()
        .filter(|x| {
            let r = grad_covariance(x);
            r.iter().map(|v| v * v).sum::<f64>() < 1e-2
        })
        .filter_map(|&x| refine_critical(x))
        .collect();

    for x in refined {
        let r = covariance(x[0], x[1], x[2]);
        if r > 1.0 - 1e-6 {
            continue; // coincidence (including the wrapped chart boundary)
        }
        let half = 0.5 * r.clamp(-1.0, 1.0).acos();
        solutions.push((r, half));
    }
    if solutions.is_empty() {
        return Err(Error::Numeric("no critical points found".into()));
    }

    // cluster by covariance value
    solutions.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut clusters: Vec<(f64, f64, usize)> = Vec::new();
    for (r, half) in solutions {
        match clusters.last_mut() {
            Some((cr, ch, count)) if (r - *cr / *count as f64).abs() < 1e-4 => {
                *cr += r;
                *ch += half;
                *count += 1;
            }
            _ => clusters.push((r, half, 1)),
        }
    }
    let families: Vec<(f64, f64)> = clusters
        .into_iter()
        .map(|(r, h, c)| (r / c as f64, h / c as f64))
        .collect();
    for &(r, _) in &families {
        if (r - 0.0).abs() > 1e-6 && (r + 1.0).abs() > 1e-6 {
            return Err(Error::Numeric(format!(
                "spurious critical family at covariance {r}"
            )));
        }
    }
    if families.len() != 2 {
        return Err(Error::Numeric(format!(
            "expected the two known critical families, found {}",
            families.len()
        )));
    }
    Ok(families)
}
