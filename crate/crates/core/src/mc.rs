//! Monte Carlo engines for the limiting-field maximum, the finite-sample
//! maximum, tube volumes, and the marginal scaling of skewness and
//! kurtosis.
//!
//! Reproducibility contract: replication r draws from a ChaCha8 stream
//! obtained by seeding with the run seed and selecting stream r
//! (`set_stream(r)`), so results are identical for any worker count and
//! any scheduling. Within a replication, draws happen in a fixed order:
//! field coefficients fill xi1 then xi2 in layout order; data matrices
//! fill row-major.

use crate::cumulant::{DataMatrix, MomentProfile, ProjectedSample, UnitDirection};
use crate::error::{Error, Result};
use crate::field::{self, FieldCoefficients};
use crate::sphere_opt::{self, FieldObjective, OptConfig};
use crate::tube;
use rand::Rng;
use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Monte Carlo run configuration.
#[derive(Clone, Copy, Debug)]
pub struct McConfig {
    pub reps: usize,
    pub seed: u64,
    /// Worker hint: `None` uses the global thread pool (all cores when the
    /// `parallel` feature is on), `Some(1)` forces a plain sequential loop,
    /// `Some(w)` runs a dedicated pool of w threads. Results do not depend
    /// on this choice.
    pub workers: Option<usize>,
    /// Half-circle grid resolution for inner q = 2 maximizations.
    pub grid_resolution: usize,
    /// Multi-start settings for inner q >= 3 maximizations.
    pub opt: OptConfig,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            reps: 1000,
            seed: 0,
            workers: None,
            grid_resolution: 4096,
            opt: OptConfig::default(),
        }
    }
}

/// The per-replication generator: stream r of the seeded ChaCha8 cipher.
pub fn rep_rng(seed: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}

#[cfg(feature = "parallel")]
fn run_reps<T: Send, F: Fn(u64) -> T + Sync + Send>(reps: usize, workers: Option<usize>, job: F) -> Vec<T> {
    match workers {
        Some(1) => (0..reps as u64).map(job).collect(),
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .expect("worker pool")
            .install(|| (0..reps as u64).into_par_iter().map(job).collect()),
        None => (0..reps as u64).into_par_iter().map(job).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
fn run_reps<T: Send, F: Fn(u64) -> T + Sync>(reps: usize, _workers: Option<usize>, job: F) -> Vec<T> {
    (0..reps as u64).map(job).collect()
}

/// Precomputed cubic and quartic direction tensors on the half-circle grid,
/// shared read-only across replications at q = 2.
struct CircleGrid {
    resolution: usize,
    pow3: Vec<f64>, // resolution x 8
    pow4: Vec<f64>, // resolution x 16
}

impl CircleGrid {
    fn new(resolution: usize) -> Self {
        let mut pow3 = Vec::with_capacity(resolution * 8);
        let mut pow4 = Vec::with_capacity(resolution * 16);
        for i in 0..resolution {
            let phi = PI * i as f64 / resolution as f64;
            let h = [phi.cos(), phi.sin()];
            pow3.extend_from_slice(&field::tensor_pow3(&h));
            pow4.extend_from_slice(&field::tensor_pow4(&h));
        }
        Self {
            resolution,
            pow3,
            pow4,
        }
    }

    /// Best grid angle for I(h) under the given coefficients.
    fn best_angle(&self, coeffs: &FieldCoefficients) -> f64 {
        let xi1 = coeffs.xi1();
        let xi2 = coeffs.xi2();
        let mut best = (0usize, f64::NEG_INFINITY);
        for i in 0..self.resolution {
            let mut z1 = 0.0;
            let base3 = i * 8;
            for j in 0..8 {
                z1 += xi1[j] * self.pow3[base3 + j];
            }
            let mut z2 = 0.0;
            let base4 = i * 16;
            for j in 0..16 {
                z2 += xi2[j] * self.pow4[base4 + j];
            }
            let value = z1 * z1 + z2 * z2;
            if value > best.1 {
                best = (i, value);
            }
        }
        PI * best.0 as f64 / self.resolution as f64
    }
}

/// max_h I(h) for one coefficient draw at q = 2: grid scan plus the same
/// angular refinement the public maximizer uses.
fn max_field_q2(coeffs: &FieldCoefficients, grid: &CircleGrid) -> f64 {
    let obj = FieldObjective::new(coeffs);
    let phi = grid.best_angle(coeffs);
    let width = PI / grid.resolution as f64;
    sphere_opt::refine_angle(&obj, phi, width).1
}

/// Samples of a maximized quantity plus per-replication diagnostics.
#[derive(Clone, Debug)]
pub struct MaxSamples {
    pub values: Vec<f64>,
    /// Replications whose inner maximizer did not meet its gradient
    /// tolerance (the best value found is still recorded).
    pub non_converged: usize,
    /// Replications that had to be redrawn because of a degenerate sample
    /// (finite-sample engine only).
    pub resampled: usize,
}

/// Distribution of max_h I(h) under the limiting Gaussian field: one inner
/// maximization per replication.
pub fn simulate_limit_max(q: u32, cfg: &McConfig) -> Result<MaxSamples> {
    if q < 2 {
        return Err(Error::Domain("field needs q >= 2".into()));
    }
    if cfg.reps == 0 {
        return Err(Error::Domain("need at least one replication".into()));
    }
    if q == 2 {
        let grid = CircleGrid::new(cfg.grid_resolution.max(8));
        let seed = cfg.seed;
        let values = run_reps(cfg.reps, cfg.workers, move |rep| {
            let mut rng = rep_rng(seed, rep);
            let coeffs = field::sample_coefficients(2, &mut rng).expect("q = 2");
            max_field_q2(&coeffs, &grid)
        });
        Ok(MaxSamples {
            values,
            non_converged: 0,
            resampled: 0,
        })
    } else {
        let seed = cfg.seed;
        let opt = cfg.opt;
        let outcomes = run_reps(cfg.reps, cfg.workers, move |rep| {
            let mut rng = rep_rng(seed, rep);
            let coeffs = field::sample_coefficients(q as usize, &mut rng).expect("q >= 2");
            let start_seed = rng.next_u64();
            let obj = FieldObjective::new(&coeffs);
            let result = sphere_opt::maximize(
                &obj,
                &OptConfig {
                    seed: start_seed,
                    ..opt
                },
            )
            .expect("field objective is finite");
            (result.value, result.converged)
        });
        let non_converged = outcomes.iter().filter(|(_, ok)| !ok).count();
        Ok(MaxSamples {
            values: outcomes.into_iter().map(|(v, _)| v).collect(),
            non_converged,
            resampled: 0,
        })
    }
}

fn draw_data(rng: &mut ChaCha8Rng, n: usize, q: usize) -> DataMatrix {
    let values: Vec<f64> = (0..n * q).map(|_| rng.sample(StandardNormal)).collect();
    DataMatrix::new(n, q, values).expect("gaussian draws are finite")
}

/// Distribution of max_h I_n(h) for n iid standard normal observations.
pub fn simulate_finite_max(q: u32, n: usize, cfg: &McConfig) -> Result<MaxSamples> {
    if q < 2 {
        return Err(Error::Domain("data needs q >= 2".into()));
    }
    if n < 5 {
        return Err(Error::Domain("finite-sample engine needs n >= 5".into()));
    }
    if cfg.reps == 0 {
        return Err(Error::Domain("need at least one replication".into()));
    }
    let seed = cfg.seed;
    let opt = cfg.opt;
    let grid_resolution = cfg.grid_resolution.max(8);
    let outcomes = run_reps(cfg.reps, cfg.workers, move |rep| {
        let mut rng = rep_rng(seed, rep);
        let mut redraws = 0usize;
        loop {
            let data = draw_data(&mut rng, n, q as usize);
            let profile = MomentProfile::new(&data);
            let result = if q == 2 {
                sphere_opt::grid_refine_q2(&profile, grid_resolution)
            } else {
                let start_seed = rng.next_u64();
                sphere_opt::maximize(
                    &profile,
                    &OptConfig {
                        seed: start_seed,
                        ..opt
                    },
                )
            };
            match result {
                Ok(r) => return (r.value, r.converged, redraws),
                Err(_) if redraws < 32 => redraws += 1, // degenerate draw
                Err(_) => return (f64::NAN, false, redraws),
            }
        }
    });
    let non_converged = outcomes.iter().filter(|&&(_, ok, _)| !ok).count();
    let resampled = outcomes.iter().map(|&(_, _, r)| r).sum();
    let values: Vec<f64> = outcomes.into_iter().map(|(v, _, _)| v).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("a replication kept drawing degenerate samples".into()));
    }
    Ok(MaxSamples {
        values,
        non_converged,
        resampled,
    })
}

/// Paired (threshold, upper probability) samples with binomial standard
/// errors; the unit of comparison between formulas and simulations.
#[derive(Clone, Debug)]
pub struct TailCurve {
    pub thresholds: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub se: Vec<f64>,
    pub reps: usize,
}

/// Empirical upper probabilities of `samples` at the given thresholds
/// (sorted ascending in the output).
pub fn empirical_tail(samples: &[f64], thresholds: &[f64]) -> Result<TailCurve> {
    if samples.is_empty() {
        return Err(Error::Domain("empirical tail needs samples".into()));
    }
    if thresholds.is_empty() {
        return Err(Error::Domain("empirical tail needs thresholds".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let mut ts = thresholds.to_vec();
    ts.sort_by(|a, b| a.partial_cmp(b).expect("finite thresholds"));
    let reps = samples.len();
    let nf = reps as f64;
    let mut probabilities = Vec::with_capacity(ts.len());
    let mut se = Vec::with_capacity(ts.len());
    for &c in &ts {
        let below = sorted.partition_point(|&s| s < c);
        let p = (reps - below) as f64 / nf;
        probabilities.push(p);
        se.push((p * (1.0 - p) / nf).sqrt());
    }
    Ok(TailCurve {
        thresholds: ts,
        probabilities,
        se,
        reps,
    })
}

/// A Monte Carlo tube-volume estimate.
#[derive(Clone, Copy, Debug)]
pub struct TubeVolumeEstimate {
    pub fraction: f64,
    pub se: f64,
    pub hits: usize,
    pub reps: usize,
    /// Points whose inner maximization did not converge; counted
    /// conservatively as a diagnostic, never dropped.
    pub flagged: usize,
}

/// Estimates the covered fraction of S^{p-1} by uniform sampling: a point
/// y counts as inside when acos(max_{x in M} <y, x>) <= theta. The inner
/// maximum over the angular coordinate is attained at sqrt(I(h)) (with y's
/// blocks treated as coefficients), so only the direction needs searching.
pub fn tube_volume_mc(q: u32, theta: f64, cfg: &McConfig) -> Result<TubeVolumeEstimate> {
    let theta_c = tube::critical_radius_constants().theta_c;
    if !(theta > 0.0 && theta <= theta_c) {
        return Err(Error::Domain(format!(
            "tube radius {theta} outside (0, theta_c = {theta_c}]"
        )));
    }
    if cfg.reps == 0 {
        return Err(Error::Domain("need at least one replication".into()));
    }
    let p = (q as usize).pow(3) + (q as usize).pow(4);
    let cos_theta = theta.cos();
    let seed = cfg.seed;
    let opt = cfg.opt;
    let grid = if q == 2 {
        Some(CircleGrid::new(cfg.grid_resolution.max(8)))
    } else {
        None
    };
    let grid = grid.as_ref();
    let outcomes = run_reps(cfg.reps, cfg.workers, move |rep| {
        let mut rng = rep_rng(seed, rep);
        let mut y: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
        let norm = crate::cumulant::norm2(&y);
        for v in &mut y {
            *v /= norm;
        }
        let coeffs = FieldCoefficients::from_concat(q as usize, &y).expect("length p");
        let (max_i, converged) = match grid {
            Some(g) => (max_field_q2(&coeffs, g), true),
            None => {
                let start_seed = rng.next_u64();
                let obj = FieldObjective::new(&coeffs);
                let r = sphere_opt::maximize(
                    &obj,
                    &OptConfig {
                        seed: start_seed,
                        ..opt
                    },
                )
                .expect("field objective is finite");
                (r.value, r.converged)
            }
        };
        // dist(y, M) <= theta  <=>  max <y, x> >= cos(theta)
        let hit = max_i.max(0.0).sqrt().min(1.0) >= cos_theta;
        (hit, converged)
    });
    let hits = outcomes.iter().filter(|&&(h, _)| h).count();
    let flagged = outcomes.iter().filter(|&&(_, ok)| !ok).count();
    let reps = cfg.reps;
    let fraction = hits as f64 / reps as f64;
    Ok(TubeVolumeEstimate {
        fraction,
        se: (fraction * (1.0 - fraction) / reps as f64).sqrt(),
        hits,
        reps,
        flagged,
    })
}

/// Sample moments of sqrt(n) B1 and sqrt(n) B2 at a fixed direction; the
/// limit variances are 3! = 6 and 4! = 24.
#[derive(Clone, Copy, Debug)]
pub struct CltMarginals {
    pub var_b1_scaled: f64,
    pub var_b2_scaled: f64,
    pub mean_b1_scaled: f64,
    pub mean_b2_scaled: f64,
}

pub fn clt_marginal_check(q: u32, h: &UnitDirection, n: usize, cfg: &McConfig) -> Result<CltMarginals> {
    if h.q() != q as usize {
        return Err(Error::DimensionMismatch {
            expected: q as usize,
            got: h.q(),
        });
    }
    if n < 5 {
        return Err(Error::Domain("marginal check needs n >= 5".into()));
    }
    let seed = cfg.seed;
    let hv: Vec<f64> = h.as_ref().to_vec();
    let pairs = run_reps(cfg.reps, cfg.workers, move |rep| {
        let mut rng = rep_rng(seed, rep);
        // draw row-major and project on the fly
        let mut z = Vec::with_capacity(n);
        for _ in 0..n {
            let mut acc = 0.0;
            for hj in &hv {
                let x: f64 = rng.sample(StandardNormal);
                acc += x * hj;
            }
            z.push(acc);
        }
        let c = crate::cumulant::sample_cumulants(
            &ProjectedSample::from_values(z).expect("n >= 5"),
        )
        .expect("continuous sample");
        let scale = (n as f64).sqrt();
        (scale * c.b1, scale * c.b2)
    });
    let nf = pairs.len() as f64;
    let mean_b1 = pairs.iter().map(|p| p.0).sum::<f64>() / nf;
    let mean_b2 = pairs.iter().map(|p| p.1).sum::<f64>() / nf;
    let var_b1 = pairs.iter().map(|p| (p.0 - mean_b1).powi(2)).sum::<f64>() / nf;
    let var_b2 = pairs.iter().map(|p| (p.1 - mean_b2).powi(2)).sum::<f64>() / nf;
    Ok(CltMarginals {
        var_b1_scaled: var_b1,
        var_b2_scaled: var_b2,
        mean_b1_scaled: mean_b1,
        mean_b2_scaled: mean_b2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::eval_z;

    #[test]
    fn limit_samples_deterministic_across_worker_counts() {
        let base = McConfig {
            reps: 96,
            seed: 2024,
            workers: Some(1),
            ..McConfig::default()
        };
        let sequential = simulate_limit_max(2, &base).unwrap();
        for workers in [None, Some(3), Some(8)] {
            let cfg = McConfig { workers, ..base };
            let run = simulate_limit_max(2, &cfg).unwrap();
            assert_eq!(sequential.values.len(), run.values.len());
            for (a, b) in sequential.values.iter().zip(&run.values) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn limit_sample_dominates_any_fixed_direction() {
        let cfg = McConfig {
            reps: 50,
            seed: 7,
            ..McConfig::default()
        };
        let samples = simulate_limit_max(2, &cfg).unwrap();
        for rep in 0..cfg.reps {
            let mut rng = rep_rng(cfg.seed, rep as u64);
            let coeffs = field::sample_coefficients(2, &mut rng).unwrap();
            let at_e1 = eval_z(&coeffs, &UnitDirection::axis(2, 0)).unwrap().i_value;
            assert!(samples.values[rep] >= at_e1 - 1e-12);
        }
    }

    #[test]
    fn limit_tail_tracks_tube_approximation() {
        let cfg = McConfig {
            reps: 4000,
            seed: 11,
            ..McConfig::default()
        };
        let samples = simulate_limit_max(2, &cfg).unwrap();
        assert_eq!(samples.non_converged, 0);
        let curve = empirical_tail(&samples.values, &[9.0]).unwrap();
        let expected = tube::tail_approx(2, 9.0).unwrap().value;
        let z = (curve.probabilities[0] - expected) / curve.se[0];
        assert!(z.abs() <= 3.5, "z = {z}");
    }

    #[test]
    fn limit_q3_runs_and_dominates_axes() {
        let cfg = McConfig {
            reps: 8,
            seed: 5,
            opt: OptConfig {
                starts: 12,
                ..OptConfig::default()
            },
            ..McConfig::default()
        };
        let samples = simulate_limit_max(3, &cfg).unwrap();
        for rep in 0..cfg.reps {
            let mut rng = rep_rng(cfg.seed, rep as u64);
            let coeffs = field::sample_coefficients(3, &mut rng).unwrap();
            for j in 0..3 {
                let axis = UnitDirection::axis(3, j);
                let v = eval_z(&coeffs, &axis).unwrap().i_value;
                assert!(samples.values[rep] >= v - 1e-9);
            }
        }
    }

    #[test]
    fn rotation_leaves_max_distribution_unchanged() {
        // rotating the coefficient tensors re-parametrizes the field, so
        // per-draw maxima agree and the KS distance collapses
        let cfg = McConfig {
            reps: 400,
            seed: 13,
            ..McConfig::default()
        };
        let plain = simulate_limit_max(2, &cfg).unwrap();
        let angle = 0.61_f64;
        let qmat = vec![angle.cos(), -angle.sin(), angle.sin(), angle.cos()];
        let grid = CircleGrid::new(cfg.grid_resolution);
        let rotated: Vec<f64> = (0..cfg.reps as u64)
            .map(|rep| {
                let mut rng = rep_rng(cfg.seed, rep);
                let coeffs = field::sample_coefficients(2, &mut rng).unwrap();
                max_field_q2(&coeffs.rotated(&qmat).unwrap(), &grid)
            })
            .collect();
        let mut a = plain.values.clone();
        let mut b = rotated.clone();
        a.sort_by(|x, y| x.partial_cmp(y).unwrap());
        b.sort_by(|x, y| x.partial_cmp(y).unwrap());
        // two-sample KS distance
        let (mut i, mut j, mut ks) = (0usize, 0usize, 0.0_f64);
        while i < a.len() && j < b.len() {
            if a[i] <= b[j] {
                i += 1;
            } else {
                j += 1;
            }
            ks = ks.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
        }
        let critical_1pct = 1.628 * ((a.len() + b.len()) as f64 / (a.len() * b.len()) as f64).sqrt();
        assert!(ks <= critical_1pct, "ks = {ks}, critical {critical_1pct}");
        // pointwise the maxima agree up to refinement error
        for (x, y) in plain.values.iter().zip(&rotated) {
            assert!((x - y).abs() <= 1e-7 * x.max(1.0));
        }
    }

    #[test]
    fn finite_samples_nonnegative_and_deterministic() {
        let cfg = McConfig {
            reps: 40,
            seed: 17,
            ..McConfig::default()
        };
        let run = simulate_finite_max(2, 100, &cfg).unwrap();
        assert!(run.values.iter().all(|&v| v >= 0.0));
        assert_eq!(run.resampled, 0);
        let again = simulate_finite_max(2, 100, &cfg).unwrap();
        assert_eq!(run.values, again.values);
        assert!(simulate_finite_max(2, 3, &cfg).is_err());
    }

    #[test]
    fn empirical_tail_bounds_and_median() {
        let samples: Vec<f64> = (1..=1001).map(|i| i as f64).collect();
        let curve = empirical_tail(&samples, &[0.0, 501.0, 2000.0]).unwrap();
        assert_eq!(curve.probabilities[0], 1.0);
        assert!((curve.probabilities[1] - 0.5).abs() < 2.0 / (samples.len() as f64).sqrt());
        assert_eq!(curve.probabilities[2], 0.0);
        assert_eq!(curve.se[0], 0.0);
        for w in curve.probabilities.windows(2) {
            assert!(w[1] <= w[0]);
        }
        assert!(empirical_tail(&[], &[1.0]).is_err());
    }

    #[test]
    fn tube_volume_validates_radius() {
        let cfg = McConfig {
            reps: 10,
            seed: 1,
            ..McConfig::default()
        };
        assert!(tube_volume_mc(2, 0.7, &cfg).is_err());
        assert!(tube_volume_mc(2, 0.0, &cfg).is_err());
    }

    #[test]
    fn tube_volume_matches_formula_near_critical_radius() {
        // theta = 0.6 is the only regime where 5e4 uniform points on S^23
        // can see the tube at all; the formula is exact below theta_c
        let cfg = McConfig {
            reps: 50_000,
            seed: 23,
            grid_resolution: 1024,
            ..McConfig::default()
        };
        let est = tube_volume_mc(2, 0.6, &cfg).unwrap();
        let formula = tube::tube_volume_fraction(2, 0.6).unwrap();
        let se = (formula * (1.0 - formula) / cfg.reps as f64).sqrt();
        let z = (est.fraction - formula) / se;
        assert!(z.abs() <= 3.5, "fraction {}, formula {formula}, z {z}", est.fraction);
        assert_eq!(est.flagged, 0);
    }

    #[test]
    fn tube_volume_monotone_in_radius() {
        let cfg = McConfig {
            reps: 4000,
            seed: 29,
            grid_resolution: 512,
            ..McConfig::default()
        };
        let mut prev = -1.0;
        for theta in [0.05, 0.1, 0.2, 0.45, 0.6] {
            let est = tube_volume_mc(2, theta, &cfg).unwrap();
            assert!(est.fraction >= prev);
            prev = est.fraction;
        }
    }

    #[test]
    fn clt_marginals_near_limit_variances() {
        let cfg = McConfig {
            reps: 1500,
            seed: 31,
            ..McConfig::default()
        };
        let h = UnitDirection::normalized(vec![0.6, -0.8]).unwrap();
        let m = clt_marginal_check(2, &h, 1000, &cfg).unwrap();
        assert!((m.var_b1_scaled - 6.0).abs() < 0.8, "var b1 {}", m.var_b1_scaled);
        assert!((m.var_b2_scaled - 24.0).abs() < 3.5, "var b2 {}", m.var_b2_scaled);
        let se_mean_b1 = (6.0_f64 / cfg.reps as f64).sqrt();
        let se_mean_b2 = (24.0_f64 / cfg.reps as f64).sqrt();
        assert!(m.mean_b1_scaled.abs() < 3.0 * se_mean_b1);
        assert!(m.mean_b2_scaled.abs() < 3.0 * se_mean_b2);
    }
}
