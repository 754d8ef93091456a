//! Sample moments, cumulants, skewness, kurtosis, and the moment index
//!
//! ```text
//!   I_n(h) = (n/6) B1(h)^2 + (n/24) B2(h)^2
//! ```
//!
//! of data projected onto a direction h, with an analytic gradient for
//! maximization over the unit sphere.

use crate::error::{Error, Result};

const UNIT_NORM_TOL: f64 = 1e-12;

/// Relative floor below which a projected variance counts as zero.
const DEGENERATE_REL: f64 = 1e-24;

/// A point of S^{q-1}: a q-dimensional unit vector.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitDirection {
    components: Vec<f64>,
}

impl UnitDirection {
    /// Accepts a vector already normalized to within 1e-12.
    pub fn new(components: Vec<f64>) -> Result<Self> {
        if components.len() < 2 {
            return Err(Error::Domain("direction needs dimension q >= 2".into()));
        }
        let norm = norm2(&components);
        if !norm.is_finite() || (norm - 1.0).abs() > UNIT_NORM_TOL {
            return Err(Error::Domain(format!("direction norm {norm} is not 1")));
        }
        Ok(Self { components })
    }

    /// Scales an arbitrary nonzero vector onto the sphere.
    pub fn normalized(v: Vec<f64>) -> Result<Self> {
        let norm = norm2(&v);
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::Domain("cannot normalize a zero or non-finite vector".into()));
        }
        let components = v.into_iter().map(|x| x / norm).collect();
        Ok(Self { components })
    }

    /// The j-th coordinate axis in R^q.
    pub fn axis(q: usize, j: usize) -> Self {
        assert!(q >= 2 && j < q);
        let mut components = vec![0.0; q];
        components[j] = 1.0;
        Self { components }
    }

    pub fn q(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[f64] {
        &self.components
    }

    pub fn flipped(&self) -> Self {
        Self {
            components: self.components.iter().map(|x| -x).collect(),
        }
    }

    /// Canonical antipodal representative: the first component larger than
    /// 1e-12 in magnitude is made positive, so equality checks across runs
    /// are well defined.
    pub fn canonical(mut self) -> Self {
        for &c in &self.components {
            if c.abs() > UNIT_NORM_TOL {
                if c < 0.0 {
                    for x in &mut self.components {
                        *x = -*x;
                    }
                }
                break;
            }
        }
        self
    }
}

impl AsRef<[f64]> for UnitDirection {
    fn as_ref(&self) -> &[f64] {
        &self.components
    }
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// An n x q sample, one observation per row.
#[derive(Clone, Debug)]
pub struct DataMatrix {
    n: usize,
    q: usize,
    values: Vec<f64>, // row-major
}

impl DataMatrix {
    pub fn new(n: usize, q: usize, values: Vec<f64>) -> Result<Self> {
        if n < 2 || q < 2 {
            return Err(Error::Domain(format!("data needs n >= 2 and q >= 2, got n={n}, q={q}")));
        }
        if values.len() != n * q {
            return Err(Error::DimensionMismatch {
                expected: n * q,
                got: values.len(),
            });
        }
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("data contains non-finite entries".into()));
        }
        Ok(Self { n, q, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let q = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != q) {
            return Err(Error::Domain("ragged rows in data".into()));
        }
        Self::new(n, q, rows.concat())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.q..(t + 1) * self.q]
    }

    /// Applies x_t -> Q x_t to every row, Q given row-major.
    pub fn rotated(&self, qmat: &[f64]) -> Result<Self> {
        let q = self.q;
        if qmat.len() != q * q {
            return Err(Error::DimensionMismatch {
                expected: q * q,
                got: qmat.len(),
            });
        }
        let mut values = vec![0.0; self.n * q];
        for t in 0..self.n {
            let row = self.row(t);
            for i in 0..q {
                values[t * q + i] = dot(&qmat[i * q..(i + 1) * q], row);
            }
        }
        Self::new(self.n, q, values)
    }

    fn column_means(&self) -> Vec<f64> {
        let mut means = vec![0.0; self.q];
        for t in 0..self.n {
            for (m, x) in means.iter_mut().zip(self.row(t)) {
                *m += x;
            }
        }
        for m in &mut means {
            *m /= self.n as f64;
        }
        means
    }
}

/// One-dimensional projection z_t = <x_t, h>.
#[derive(Clone, Debug)]
pub struct ProjectedSample {
    values: Vec<f64>,
}

impl ProjectedSample {
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::Domain("projected sample needs n >= 2".into()));
        }
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

pub fn project(data: &DataMatrix, h: &UnitDirection) -> Result<ProjectedSample> {
    if data.q() != h.q() {
        return Err(Error::DimensionMismatch {
            expected: data.q(),
            got: h.q(),
        });
    }
    let values = (0..data.n()).map(|t| dot(data.row(t), h.as_ref())).collect();
    ProjectedSample::from_values(values)
}

/// Which cumulant estimator to use. The limiting behavior of the index is
/// the same for both; `Moment` keeps the n/6 and n/24 scalings exact.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CumulantKind {
    /// k2 = m2, k3 = m3, k4 = m4 - 3 m2^2 with central moments m_r.
    #[default]
    Moment,
    /// Unbiased k-statistics (needs n >= 4).
    KStatistic,
}

/// Second through fourth cumulants plus standardized skewness and kurtosis.
#[derive(Clone, Copy, Debug)]
pub struct CumulantSet {
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
    /// skewness k3 / k2^{3/2}
    pub b1: f64,
    /// kurtosis k4 / k2^2
    pub b2: f64,
}

fn central_moments(z: &[f64]) -> (f64, f64, f64, f64) {
    let n = z.len() as f64;
    let mean = z.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in z {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    (mean, m2 / n, m3 / n, m4 / n)
}

pub fn sample_cumulants(z: &ProjectedSample) -> Result<CumulantSet> {
    sample_cumulants_with(z, CumulantKind::Moment)
}

pub fn sample_cumulants_with(z: &ProjectedSample, kind: CumulantKind) -> Result<CumulantSet> {
    let n = z.len();
    if kind == CumulantKind::KStatistic && n < 4 {
        return Err(Error::Domain("k-statistics need n >= 4".into()));
    }
    let values = z.values();
    let (_, m2, m3, m4) = central_moments(values);
    let mean_sq = values.iter().map(|v| v * v).sum::<f64>() / n as f64;
    if m2 <= DEGENERATE_REL * mean_sq {
        return Err(Error::DegenerateSample);
    }
    let nf = n as f64;
    let (k2, k3, k4) = match kind {
        CumulantKind::Moment => (m2, m3, m4 - 3.0 * m2 * m2),
        CumulantKind::KStatistic => {
            let k2 = nf / (nf - 1.0) * m2;
            let k3 = nf * nf / ((nf - 1.0) * (nf - 2.0)) * m3;
            let k4 = nf * nf * ((nf + 1.0) * m4 - 3.0 * (nf - 1.0) * m2 * m2)
                / ((nf - 1.0) * (nf - 2.0) * (nf - 3.0));
            (k2, k3, k4)
        }
    };
    Ok(CumulantSet {
        k2,
        k3,
        k4,
        b1: k3 / k2.powf(1.5),
        b2: k4 / (k2 * k2),
    })
}

/// The moment index I_n(h) = (n/6) b1^2 + (n/24) b2^2, always >= 0.
pub fn moment_index(data: &DataMatrix, h: &UnitDirection) -> Result<f64> {
    moment_index_with(data, h, CumulantKind::Moment)
}

pub fn moment_index_with(data: &DataMatrix, h: &UnitDirection, kind: CumulantKind) -> Result<f64> {
    let z = project(data, h)?;
    let c = sample_cumulants_with(&z, kind)?;
    let n = data.n() as f64;
    Ok(n / 6.0 * c.b1 * c.b1 + n / 24.0 * c.b2 * c.b2)
}

/// Euclidean gradient of I_n at h, projected onto the tangent space of
/// S^{q-1}. Uses the moment convention; the central moments are polynomials
/// in h so the chain rule is exact.
pub fn moment_index_gradient(data: &DataMatrix, h: &UnitDirection) -> Result<Vec<f64>> {
    if data.q() != h.q() {
        return Err(Error::DimensionMismatch {
            expected: data.q(),
            got: h.q(),
        });
    }
    let n = data.n();
    let q = data.q();
    let nf = n as f64;
    let means = data.column_means();

    // centered projections and the per-moment gradient accumulators
    let hv = h.as_ref();
    let mut z = vec![0.0; n];
    let mut mean_sq = 0.0;
    for t in 0..n {
        let row = data.row(t);
        let mut s = 0.0;
        for j in 0..q {
            s += (row[j] - means[j]) * hv[j];
        }
        z[t] = s;
        mean_sq += s * s;
    }
    mean_sq /= nf;

    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    let mut g2 = vec![0.0; q];
    let mut g3 = vec![0.0; q];
    let mut g4 = vec![0.0; q];
    for t in 0..n {
        let row = data.row(t);
        let zt = z[t];
        let z2 = zt * zt;
        m2 += z2;
        m3 += z2 * zt;
        m4 += z2 * z2;
        for j in 0..q {
            let y = row[j] - means[j];
            g2[j] += zt * y;
            g3[j] += z2 * y;
            g4[j] += z2 * zt * y;
        }
    }
    m2 /= nf;
    m3 /= nf;
    m4 /= nf;
    if m2 <= DEGENERATE_REL * mean_sq {
        return Err(Error::DegenerateSample);
    }
    for j in 0..q {
        g2[j] *= 2.0 / nf;
        g3[j] *= 3.0 / nf;
        g4[j] *= 4.0 / nf;
    }

    let b1 = m3 / m2.powf(1.5);
    let b2 = m4 / (m2 * m2) - 3.0;
    let mut grad = vec![0.0; q];
    for j in 0..q {
        let db1 = g3[j] / m2.powf(1.5) - 1.5 * m3 / m2.powf(2.5) * g2[j];
        let db2 = g4[j] / (m2 * m2) - 2.0 * m4 / m2.powi(3) * g2[j];
        grad[j] = nf / 3.0 * b1 * db1 + nf / 12.0 * b2 * db2;
    }
    // tangent projection (I - h h') grad; the index is scale-invariant in h
    // so this only removes rounding in the radial component
    let radial = dot(&grad, hv);
    for j in 0..q {
        grad[j] -= radial * hv[j];
    }
    Ok(grad)
}

/// Centered moment tensors of a sample, so the projected central moments
/// m_r(h) and their gradients can be evaluated in O(q^4) per direction
/// instead of O(n q). Exact up to rounding versus the per-observation path.
#[derive(Clone, Debug)]
pub struct MomentProfile {
    q: usize,
    n: usize,
    m2: Vec<f64>,
    m3: Vec<f64>,
    m4: Vec<f64>,
    trace_m2: f64,
}

impl MomentProfile {
    pub fn new(data: &DataMatrix) -> Self {
        let n = data.n();
        let q = data.q();
        let nf = n as f64;
        let means = data.column_means();
        let mut m2 = vec![0.0; q * q];
        let mut m3 = vec![0.0; q * q * q];
        let mut m4 = vec![0.0; q * q * q * q];
        let mut y = vec![0.0; q];
        for t in 0..n {
            let row = data.row(t);
            for j in 0..q {
                y[j] = row[j] - means[j];
            }
            for a in 0..q {
                let ya = y[a];
                for b in 0..q {
                    let yab = ya * y[b];
                    m2[a * q + b] += yab;
                    for c in 0..q {
                        let yabc = yab * y[c];
                        m3[(a * q + b) * q + c] += yabc;
                        for d in 0..q {
                            m4[((a * q + b) * q + c) * q + d] += yabc * y[d];
                        }
                    }
                }
            }
        }
        for v in &mut m2 {
            *v /= nf;
        }
        for v in &mut m3 {
            *v /= nf;
        }
        for v in &mut m4 {
            *v /= nf;
        }
        let trace_m2 = (0..q).map(|j| m2[j * q + j]).sum();
        Self { q, n, m2, m3, m4, trace_m2 }
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn contract(&self, h: &[f64]) -> (f64, f64, f64) {
        let q = self.q;
        let mut hh = vec![0.0; q * q];
        for a in 0..q {
            for b in 0..q {
                hh[a * q + b] = h[a] * h[b];
            }
        }
        let mut m2 = 0.0;
        for i in 0..q * q {
            m2 += self.m2[i] * hh[i];
        }
        let mut m3 = 0.0;
        let mut m4 = 0.0;
        for a in 0..q {
            let ha = h[a];
            for bc in 0..q * q {
                let w = ha * hh[bc];
                m3 += self.m3[a * q * q + bc] * w;
                for d in 0..q {
                    m4 += self.m4[(a * q * q + bc) * q + d] * w * h[d];
                }
            }
        }
        (m2, m3, m4)
    }

    /// Projected central moments (m2, m3, m4) at direction h.
    pub fn projected_moments(&self, h: &UnitDirection) -> Result<(f64, f64, f64)> {
        if h.q() != self.q {
            return Err(Error::DimensionMismatch {
                expected: self.q,
                got: h.q(),
            });
        }
        Ok(self.contract(h.as_ref()))
    }

    /// The moment index at h; errors on a degenerate projected variance.
    pub fn index(&self, h: &UnitDirection) -> Result<f64> {
        self.projected_moments(h).and_then(|m| self.index_from(m))
    }

    pub(crate) fn index_raw(&self, h: &[f64]) -> Option<f64> {
        let m = self.contract(h);
        self.index_from(m).ok()
    }

    fn index_from(&self, (m2, m3, m4): (f64, f64, f64)) -> Result<f64> {
        if m2 <= DEGENERATE_REL * self.trace_m2 {
            return Err(Error::DegenerateSample);
        }
        let b1 = m3 / m2.powf(1.5);
        let b2 = m4 / (m2 * m2) - 3.0;
        let nf = self.n as f64;
        Ok(nf / 6.0 * b1 * b1 + nf / 24.0 * b2 * b2)
    }

    /// Euclidean gradient of the index at h (not tangent-projected).
    pub(crate) fn gradient_raw(&self, h: &[f64]) -> Option<Vec<f64>> {
        let q = self.q;
        let (m2, m3, m4) = self.contract(h);
        if m2 <= DEGENERATE_REL * self.trace_m2 {
            return None;
        }
        let mut g2 = vec![0.0; q];
        let mut g3 = vec![0.0; q];
        let mut g4 = vec![0.0; q];
        for a in 0..q {
            let mut s2 = 0.0;
            for b in 0..q {
                s2 += self.m2[a * q + b] * h[b];
            }
            g2[a] = 2.0 * s2;
            let mut s3 = 0.0;
            let mut s4 = 0.0;
            for b in 0..q {
                let hb = h[b];
                for c in 0..q {
                    let hbc = hb * h[c];
                    s3 += self.m3[(a * q + b) * q + c] * hbc;
                    for d in 0..q {
                        s4 += self.m4[((a * q + b) * q + c) * q + d] * hbc * h[d];
                    }
                }
            }
            g3[a] = 3.0 * s3;
            g4[a] = 4.0 * s4;
        }
        let b1 = m3 / m2.powf(1.5);
        let b2 = m4 / (m2 * m2) - 3.0;
        let nf = self.n as f64;
        let mut grad = vec![0.0; q];
        for j in 0..q {
            let db1 = g3[j] / m2.powf(1.5) - 1.5 * m3 / m2.powf(2.5) * g2[j];
            let db2 = g4[j] / (m2 * m2) - 2.0 * m4 / m2.powi(3) * g2[j];
            grad[j] = nf / 3.0 * b1 * db1 + nf / 12.0 * b2 * db2;
        }
        Some(grad)
    }
}
