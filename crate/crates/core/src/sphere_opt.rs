//! Maximization of a smooth even objective over the unit sphere S^{q-1}:
//! a dense half-circle grid with golden-section refinement for q = 2, and
//! multi-start projected gradient ascent with backtracking for q >= 3.

use crate::cumulant::{dot, norm2, CumulantKind, DataMatrix, MomentProfile, UnitDirection};
use crate::error::{Error, Result};
use crate::field::{self, FieldCoefficients};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

/// An objective on the sphere. Both objectives in this crate satisfy
/// value(h) = value(-h), which the q = 2 grid exploits by scanning half the
/// circle. `value` may return -inf where the objective is undefined;
/// `gradient` is the Euclidean gradient (the optimizer projects it).
pub trait SphereObjective: Sync {
    fn dim(&self) -> usize;
    fn value(&self, h: &[f64]) -> f64;
    fn gradient(&self, h: &[f64]) -> Option<Vec<f64>> {
        let _ = h;
        None
    }
}

/// Wraps a closure (and optionally its Euclidean gradient) as an objective.
pub struct FnObjective<F, G = fn(&[f64]) -> Vec<f64>>
where
    F: Fn(&[f64]) -> f64 + Sync,
    G: Fn(&[f64]) -> Vec<f64> + Sync,
{
    pub q: usize,
    pub f: F,
    pub grad: Option<G>,
}

impl<F: Fn(&[f64]) -> f64 + Sync> FnObjective<F> {
    pub fn new(q: usize, f: F) -> Self {
        Self { q, f, grad: None }
    }
}

impl<F, G> SphereObjective for FnObjective<F, G>
where
    F: Fn(&[f64]) -> f64 + Sync,
    G: Fn(&[f64]) -> Vec<f64> + Sync,
{
    fn dim(&self) -> usize {
        self.q
    }

    fn value(&self, h: &[f64]) -> f64 {
        (self.f)(h)
    }

    fn gradient(&self, h: &[f64]) -> Option<Vec<f64>> {
        self.grad.as_ref().map(|g| g(h))
    }
}

impl SphereObjective for MomentProfile {
    fn dim(&self) -> usize {
        self.q()
    }

    fn value(&self, h: &[f64]) -> f64 {
        self.index_raw(h).unwrap_or(f64::NEG_INFINITY)
    }

    fn gradient(&self, h: &[f64]) -> Option<Vec<f64>> {
        self.gradient_raw(h)
    }
}

/// The limiting-field index I(h) = Z1(h)^2 + Z2(h)^2 as an objective.
pub struct FieldObjective<'a> {
    coeffs: &'a FieldCoefficients,
}

impl<'a> FieldObjective<'a> {
    pub fn new(coeffs: &'a FieldCoefficients) -> Self {
        Self { coeffs }
    }
}

impl SphereObjective for FieldObjective<'_> {
    fn dim(&self) -> usize {
        self.coeffs.q()
    }

    fn value(&self, h: &[f64]) -> f64 {
        let z1 = field::contract3(self.coeffs.xi1(), h);
        let z2 = field::contract4(self.coeffs.xi2(), h);
        z1 * z1 + z2 * z2
    }

    fn gradient(&self, h: &[f64]) -> Option<Vec<f64>> {
        let q = h.len();
        let xi1 = self.coeffs.xi1();
        let xi2 = self.coeffs.xi2();
        let z1 = field::contract3(xi1, h);
        let z2 = field::contract4(xi2, h);
        let mut grad = vec![0.0; q];
        // dZ1/dh_a: xi1 contracted over each slot holding `a`
        for a in 0..q {
            let mut d1 = 0.0;
            for j in 0..q {
                let hj = h[j];
                for k in 0..q {
                    let hjk = hj * h[k];
                    d1 += xi1[(a * q + j) * q + k] * hjk;
                    d1 += xi1[(j * q + a) * q + k] * hjk;
                    d1 += xi1[(j * q + k) * q + a] * hjk;
                }
            }
            let mut d2 = 0.0;
            for j in 0..q {
                let hj = h[j];
                for k in 0..q {
                    let hjk = hj * h[k];
                    for l in 0..q {
                        let hjkl = hjk * h[l];
                        d2 += xi2[((a * q + j) * q + k) * q + l] * hjkl;
                        d2 += xi2[((j * q + a) * q + k) * q + l] * hjkl;
                        d2 += xi2[((j * q + k) * q + a) * q + l] * hjkl;
                        d2 += xi2[((j * q + k) * q + l) * q + a] * hjkl;
                    }
                }
            }
            grad[a] = 2.0 * z1 * d1 + 2.0 * z2 * d2;
        }
        Some(grad)
    }
}

/// Outcome of a sphere maximization.
#[derive(Clone, Debug)]
pub struct OptResult {
    /// Argmax with canonical antipodal sign.
    pub h_star: UnitDirection,
    pub value: f64,
    pub starts_used: usize,
    pub converged: bool,
    /// Tangent-gradient norm at the reported point, when a gradient-based
    /// path produced one.
    pub best_gradient_norm: Option<f64>,
}

/// Multi-start configuration.
#[derive(Clone, Copy, Debug)]
pub struct OptConfig {
    /// Random starts on top of the q coordinate axes.
    pub starts: usize,
    pub seed: u64,
    /// Convergence threshold on the tangent-gradient norm.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for OptConfig {
    fn default() -> Self {
        Self {
            starts: 32,
            seed: 0,
            tol: 1e-10,
            max_iters: 500,
        }
    }
}

/// Evaluates the objective on the half-circle grid phi_i = pi i / resolution
/// and returns the best grid point, with no local refinement.
pub fn grid_search_q2<O: SphereObjective + ?Sized>(obj: &O, resolution: usize) -> Result<OptResult> {
    if obj.dim() != 2 {
        return Err(Error::Domain(format!("grid search needs q = 2, got q = {}", obj.dim())));
    }
    if resolution < 8 {
        return Err(Error::Domain("grid resolution must be >= 8".into()));
    }
    let (phi, value) = best_grid_angle(obj, resolution);
    finish_q2(obj, phi, value, resolution, None)
}

/// Dense grid plus golden-section refinement around the best grid angle,
/// the default q = 2 maximizer. When the objective carries an analytic
/// gradient the angle is additionally polished by bisecting the angular
/// derivative, which beats the float plateau of value comparisons.
pub fn grid_refine_q2<O: SphereObjective + ?Sized>(obj: &O, resolution: usize) -> Result<OptResult> {
    if obj.dim() != 2 {
        return Err(Error::Domain(format!("grid search needs q = 2, got q = {}", obj.dim())));
    }
    if resolution < 8 {
        return Err(Error::Domain("grid resolution must be >= 8".into()));
    }
    let (phi0, _) = best_grid_angle(obj, resolution);
    let width = PI / resolution as f64;
    let (phi, value) = refine_angle(obj, phi0, width);
    let grad_norm = obj.gradient(&[phi.cos(), phi.sin()]).map(|g| {
        (-g[0] * phi.sin() + g[1] * phi.cos()).abs()
    });
    finish_q2(obj, phi, value, resolution, grad_norm)
}

/// Polishes a bracketed angular maximum: golden section first, then, when
/// an analytic gradient exists, bisection on the angular derivative (value
/// comparisons flatten out at sqrt(ulp) from the peak; the derivative sign
/// stays resolvable to machine precision).
pub(crate) fn refine_angle<O: SphereObjective + ?Sized>(
    obj: &O,
    phi0: f64,
    width: f64,
) -> (f64, f64) {
    let (mut phi, mut value) =
        golden_max(|p| obj.value(&[p.cos(), p.sin()]), phi0 - width, phi0 + width);
    let deriv = |p: f64| -> Option<f64> {
        let h = [p.cos(), p.sin()];
        let g = obj.gradient(&h)?;
        Some(-g[0] * h[1] + g[1] * h[0])
    };
    if let (Some(mut dl), Some(mut dr)) = (deriv(phi0 - width), deriv(phi0 + width)) {
        if dl > 0.0 && dr < 0.0 {
            let (mut lo, mut hi) = (phi0 - width, phi0 + width);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid == lo || mid == hi {
                    break;
                }
                let dm = deriv(mid).unwrap_or(0.0);
                if dm > 0.0 {
                    lo = mid;
                    dl = dm;
                } else {
                    hi = mid;
                    dr = dm;
                }
            }
            let _ = (dl, dr);
            let root = 0.5 * (lo + hi);
            let refined = obj.value(&[root.cos(), root.sin()]);
            if refined >= value - value.abs() * 1e-12 {
                phi = root;
                value = refined;
            }
        }
    }
    (phi, value)
}

fn best_grid_angle<O: SphereObjective + ?Sized>(obj: &O, resolution: usize) -> (f64, f64) {
    let mut best = (0.0, f64::NEG_INFINITY);
    for i in 0..resolution {
        let phi = PI * i as f64 / resolution as f64;
        let v = obj.value(&[phi.cos(), phi.sin()]);
        if v > best.1 {
            best = (phi, v);
        }
    }
    best
}

fn finish_q2<O: SphereObjective + ?Sized>(
    obj: &O,
    phi: f64,
    value: f64,
    starts_used: usize,
    gradient_norm: Option<f64>,
) -> Result<OptResult> {
    if !value.is_finite() {
        return Err(Error::Numeric("objective not finite anywhere on the grid".into()));
    }
    let h = UnitDirection::normalized(vec![phi.cos(), phi.sin()])?.canonical();
    let value = obj.value(h.as_ref());
    Ok(OptResult {
        h_star: h,
        value,
        starts_used,
        converged: true,
        best_gradient_norm: gradient_norm,
    })
}

/// Golden-section maximization on [a, b]; assumes a single peak in the
/// bracket (the bracket spans one grid cell on either side of the best
/// sample, which the dense grid has already localized).
pub(crate) fn golden_max<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let (mut lo, mut hi) = (a, b);
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..80 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
    }
    let mid = 0.5 * (lo + hi);
    (mid, f(mid))
}

fn fd_gradient<O: SphereObjective + ?Sized>(obj: &O, h: &[f64]) -> Vec<f64> {
    let step = 1e-6;
    let mut g = vec![0.0; h.len()];
    for j in 0..h.len() {
        let mut hp = h.to_vec();
        let mut hm = h.to_vec();
        hp[j] += step;
        hm[j] -= step;
        let np = norm2(&hp);
        let nm = norm2(&hm);
        for x in &mut hp {
            *x /= np;
        }
        for x in &mut hm {
            *x /= nm;
        }
        g[j] = (obj.value(&hp) - obj.value(&hm)) / (2.0 * step);
    }
    g
}

struct StartOutcome {
    h: Vec<f64>,
    value: f64,
    grad_norm: f64,
    converged: bool,
}

fn tangent_gradient<O: SphereObjective + ?Sized>(obj: &O, h: &[f64]) -> Vec<f64> {
    let g = obj.gradient(h).unwrap_or_else(|| fd_gradient(obj, h));
    let radial = dot(&g, h);
    g.iter().zip(h).map(|(gi, hi)| gi - radial * hi).collect()
}

/// Newton iteration on the geodesic directional derivative; only sound with
/// an analytic gradient, where it pushes the tangent-gradient norm down to
/// rounding level past the plateau that value-based line searches hit.
fn newton_polish<O: SphereObjective + ?Sized>(obj: &O, h: &mut Vec<f64>, tol: f64) -> f64 {
    let mut best = h.clone();
    let mut best_gn = norm2(&tangent_gradient(obj, h));
    for _ in 0..60 {
        let gt = tangent_gradient(obj, h);
        let gn = norm2(&gt);
        if gn < best_gn {
            best = h.clone();
            best_gn = gn;
        }
        if gn <= tol || !gn.is_finite() {
            break;
        }
        let u: Vec<f64> = gt.iter().map(|x| x / gn).collect();
        // directional derivative along the great circle through h and u
        let dir_deriv = |s: f64| -> f64 {
            let (cs, sn) = (s.cos(), s.sin());
            let point: Vec<f64> = h.iter().zip(&u).map(|(hi, ui)| cs * hi + sn * ui).collect();
            let tangent: Vec<f64> = h.iter().zip(&u).map(|(hi, ui)| -sn * hi + cs * ui).collect();
            let g = obj.gradient(&point).unwrap_or_else(|| fd_gradient(obj, &point));
            dot(&g, &tangent)
        };
        let eps = 1e-6;
        let slope = (dir_deriv(eps) - gn) / eps;
        let mut s = if slope < -1e-300 { -gn / slope } else { eps };
        if !s.is_finite() || s <= 0.0 {
            s = eps;
        }
        s = s.min(0.4);
        let (cs, sn) = (s.cos(), s.sin());
        let cand: Vec<f64> = h.iter().zip(&u).map(|(hi, ui)| cs * hi + sn * ui).collect();
        let n = norm2(&cand);
        *h = cand.into_iter().map(|x| x / n).collect();
    }
    let final_gn = norm2(&tangent_gradient(obj, h));
    if best_gn < final_gn {
        *h = best;
        best_gn
    } else {
        final_gn
    }
}

fn ascend_from<O: SphereObjective + ?Sized>(obj: &O, start: Vec<f64>, cfg: &OptConfig) -> Option<StartOutcome> {
    let mut h = start;
    let mut fh = obj.value(&h);
    if !fh.is_finite() {
        return None;
    }
    let has_gradient = obj.gradient(&h).is_some();
    let mut step = 1.0;
    let mut grad_norm = f64::INFINITY;
    for _ in 0..cfg.max_iters {
        let gt = tangent_gradient(obj, &h);
        grad_norm = norm2(&gt);
        if !grad_norm.is_finite() {
            return None;
        }
        if grad_norm <= cfg.tol {
            break;
        }
        // backtracking line search along the tangent direction
        let mut s = step;
        let mut improved = false;
        for _ in 0..60 {
            let cand: Vec<f64> = h.iter().zip(&gt).map(|(hi, gi)| hi + s * gi).collect();
            let nc = norm2(&cand);
            let cand: Vec<f64> = cand.into_iter().map(|x| x / nc).collect();
            let fc = obj.value(&cand);
            if fc.is_finite() && fc >= fh + 1e-4 * s * grad_norm * grad_norm {
                h = cand;
                fh = fc;
                step = (s * 2.0).min(1e6);
                improved = true;
                break;
            }
            s *= 0.5;
            if s < 1e-18 {
                break;
            }
        }
        if !improved {
            break; // step collapse: value resolution exhausted
        }
    }
    if has_gradient && grad_norm > cfg.tol {
        grad_norm = newton_polish(obj, &mut h, cfg.tol);
        fh = obj.value(&h);
    }
    Some(StartOutcome {
        h,
        value: fh,
        grad_norm,
        converged: grad_norm <= cfg.tol,
    })
}

/// Multi-start projected gradient ascent. Starts are the q coordinate axes
/// plus `cfg.starts` directions drawn uniformly from the seed. The best
/// local maximum wins; exact value ties break to the lexicographically
/// smallest canonical direction so the reduction is order-independent.
pub fn maximize<O: SphereObjective + ?Sized>(obj: &O, cfg: &OptConfig) -> Result<OptResult> {
    if cfg.starts < 1 {
        return Err(Error::Domain("need at least one random start".into()));
    }
    if cfg.tol <= 0.0 {
        return Err(Error::Domain("tolerance must be positive".into()));
    }
    let q = obj.dim();
    let mut starts: Vec<Vec<f64>> = (0..q)
        .map(|j| {
            let mut v = vec![0.0; q];
            v[j] = 1.0;
            v
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 0..cfg.starts {
        loop {
            let v: Vec<f64> = (0..q).map(|_| rng.sample(StandardNormal)).collect();
            let n = norm2(&v);
            if n > 1e-12 {
                starts.push(v.into_iter().map(|x| x / n).collect());
                break;
            }
        }
    }
    let starts_used = starts.len();

    let mut best: Option<(StartOutcome, UnitDirection)> = None;
    for start in starts {
        if let Some(out) = ascend_from(obj, start, cfg) {
            let canon = UnitDirection::normalized(out.h.clone())?.canonical();
            let replace = match &best {
                None => true,
                Some((cur, cur_h)) => {
                    out.value > cur.value
                        || (out.value == cur.value
                            && lex_less(canon.as_ref(), cur_h.as_ref()))
                }
            };
            if replace {
                best = Some((out, canon));
            }
        }
    }
    let (out, h_star) = best.ok_or_else(|| {
        Error::Numeric("objective was not finite at any start".into())
    })?;
    Ok(OptResult {
        value: obj.value(h_star.as_ref()),
        h_star,
        starts_used,
        converged: out.converged,
        best_gradient_norm: Some(out.grad_norm),
    })
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return true;
        }
        if x > y {
            return false;
        }
    }
    false
}

/// Pursuit configuration: how the data index gets maximized.
#[derive(Clone, Copy, Debug)]
pub struct PursuitConfig {
    /// Half-circle grid resolution for q = 2.
    pub grid_resolution: usize,
    /// Multi-start settings for q >= 3.
    pub opt: OptConfig,
    pub kind: CumulantKind,
}

impl Default for PursuitConfig {
    fn default() -> Self {
        Self {
            grid_resolution: 4096,
            opt: OptConfig::default(),
            kind: CumulantKind::Moment,
        }
    }
}

/// Maximum of the moment index over directions: max_h I_n(h).
pub fn max_index_value(data: &DataMatrix, config: &PursuitConfig) -> Result<OptResult> {
    let result = match config.kind {
        CumulantKind::Moment => {
            let profile = MomentProfile::new(data);
            if data.q() == 2 {
                grid_refine_q2(&profile, config.grid_resolution)
            } else {
                maximize(&profile, &config.opt)
            }
        }
        CumulantKind::KStatistic => {
            let obj = FnObjective::new(data.q(), |h: &[f64]| {
                UnitDirection::normalized(h.to_vec())
                    .and_then(|u| crate::cumulant::moment_index_with(data, &u, CumulantKind::KStatistic))
                    .unwrap_or(f64::NEG_INFINITY)
            });
            if data.q() == 2 {
                grid_refine_q2(&obj, config.grid_resolution)
            } else {
                maximize(&obj, &config.opt)
            }
        }
    };
    // an objective that is finite nowhere means every projection was
    // degenerate
    match result {
        Err(Error::Numeric(_)) => Err(Error::DegenerateSample),
        other => other,
    }
}
