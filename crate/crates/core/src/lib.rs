//! Projection pursuit with the moment index and tube-method significance.
//!
//! The moment index of a q-dimensional sample projected onto a direction h
//! is I_n(h) = (n/6) B1(h)^2 + (n/24) B2(h)^2, with B1 and B2 the sample
//! skewness and kurtosis of the projections. Under multivariate normality,
//! the maximum of I_n over the unit sphere converges to the maximum of
//! I(h) = Z1(h)^2 + Z2(h)^2, a Gaussian field with a finite expansion in
//! q^3 + q^4 standard normal coefficients. That maximum lives on a
//! q-dimensional manifold embedded in a large sphere, and its tail
//! probability - the multiple-testing p-value of the best projection - has
//! a closed-form approximation built from the manifold's curvature
//! invariants and elliptic-integral moments.
//!
//! Module map:
//! - [`specfun`]: sphere surfaces, chi-square/beta upper tails, complete
//!   elliptic integrals, and the elliptic moments E_k with their
//!   recurrences.
//! - [`cumulant`]: projections, sample cumulants, the moment index, and
//!   its analytic gradient.
//! - [`field`]: the limiting Gaussian field and the manifold embedding.
//! - [`sphere_opt`]: maximization over the unit sphere (dense grid with
//!   derivative polish at q = 2, multi-start projected gradient above).
//! - [`tube`]: curvature coefficients, the tail approximation, the exact
//!   tube-volume fraction, and p-values.
//! - [`geometry`]: independent finite-difference and quadrature checks of
//!   the geometry behind `tube`, including the critical radius.
//! - [`mc`]: reproducible Monte Carlo engines (per-replication RNG
//!   streams; identical output for any worker count).
//! - [`report`]: the verification batteries behind `pptube verify`.
//!
//! The `parallel` feature (on by default) runs the Monte Carlo engines and
//! geometry scans on a rayon pool; without it every engine degrades to the
//! equivalent sequential loop with bit-identical results.

pub mod cumulant;
pub mod error;
pub mod field;
pub mod geometry;
pub mod mc;
pub(crate) mod quad;
pub mod report;
pub mod specfun;
pub mod sphere_opt;
pub mod tube;
