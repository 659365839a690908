use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::MetricsError;

/// Relative tolerance below which a negative eigenvalue is treated as round-off.
const EIG_TOLERANCE: f64 = 1e-6;

/// `n` feature vectors of dimension `d`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    n: usize,
    d: usize,
    data: Vec<f32>,
    pub source: String,
}

impl FeatureSet {
    pub fn new(n: usize, d: usize, data: Vec<f32>, source: impl Into<String>) -> Result<Self, MetricsError> {
        if d == 0 {
            return Err(MetricsError::InvalidFeatures("dimension must be positive".into()));
        }
        if data.len() != n * d {
            return Err(MetricsError::InvalidFeatures(format!(
                "expected {n} x {d} = {} values, got {}",
                n * d,
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite()) {
            return Err(MetricsError::InvalidFeatures(format!("non-finite value {v}")));
        }
        Ok(Self { n, d, data, source: source.into() })
    }

    pub fn from_rows(rows: &[Vec<f32>], source: impl Into<String>) -> Result<Self, MetricsError> {
        let d = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().find(|r| r.len() != d) {
            return Err(MetricsError::InvalidFeatures(format!("ragged rows: {} vs {d}", r.len())));
        }
        Self::new(rows.len(), d, rows.concat(), source)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    fn mean(&self) -> DVector<f64> {
        let mut m = DVector::zeros(self.d);
        for i in 0..self.n {
            for (k, v) in self.row(i).iter().enumerate() {
                m[k] += *v as f64;
            }
        }
        m / self.n as f64
    }

    /// Mean-subtracted samples as an `n x d` matrix.
    fn centered(&self, mean: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.d, |i, k| self.data[i * self.d + k] as f64 - mean[k])
    }

    fn moments(&self) -> (DVector<f64>, DMatrix<f64>) {
        let mu = self.mean();
        let x = self.centered(&mu);
        let cov = x.tr_mul(&x) / (self.n as f64 - 1.0);
        (mu, symmetrize(cov))
    }

    /// Total order on the raw contents, used to make the distance exactly symmetric.
    fn content_cmp(&self, other: &Self) -> Ordering {
        (self.n, self.d).cmp(&(other.n, other.d)).then_with(|| {
            self.data
                .iter()
                .map(|v| v.to_bits())
                .cmp(other.data.iter().map(|v| v.to_bits()))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrechetRoute {
    /// Eigendecomposition of the `d x d` covariance product.
    Covariance,
    /// Singular values of the `n_a x n_b` cross-Gram matrix; cheaper when `d` exceeds
    /// the sample counts.
    SampleSpace,
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// Eigenvalues with small negative round-off clamped to zero. Values within the
/// decomposition's noise floor are zeroed too, since their square roots would otherwise
/// add `sqrt(eps)`-sized error for every null direction.
fn clamped_eigenvalues(m: DMatrix<f64>) -> Result<Vec<f64>, MetricsError> {
    let n = m.nrows();
    let ev = SymmetricEigen::new(symmetrize(m)).eigenvalues;
    let max = ev.iter().cloned().fold(0.0f64, f64::max);
    let noise = n as f64 * f64::EPSILON * max;
    let mut out = Vec::with_capacity(ev.len());
    for &v in ev.iter() {
        if v < -EIG_TOLERANCE * max.max(f64::MIN_POSITIVE) {
            return Err(MetricsError::IndefiniteCovariance { value: v, max });
        }
        out.push(if v <= noise { 0.0 } else { v });
    }
    out.sort_by(f64::total_cmp);
    Ok(out)
}

fn psd_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>, MetricsError> {
    let eig = SymmetricEigen::new(symmetrize(m.clone()));
    let max = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let mut s = eig.eigenvalues.clone();
    for v in s.iter_mut() {
        if *v < -EIG_TOLERANCE * max.max(f64::MIN_POSITIVE) {
            return Err(MetricsError::IndefiniteCovariance { value: *v, max });
        }
        *v = v.max(0.0).sqrt();
    }
    let q = &eig.eigenvectors;
    Ok(symmetrize(q * DMatrix::from_diagonal(&s) * q.transpose()))
}

/// `Tr((S_a S_b)^(1/2))` computed as the eigenvalues of `S_a^(1/2) S_b S_a^(1/2)`.
fn trace_sqrt_product(sa: &DMatrix<f64>, sb: &DMatrix<f64>) -> Result<f64, MetricsError> {
    let root = psd_sqrt(sa)?;
    let inner = &root * sb * &root;
    Ok(clamped_eigenvalues(inner)?.iter().map(|v| v.sqrt()).sum())
}

fn check_pair(a: &FeatureSet, b: &FeatureSet) -> Result<(), MetricsError> {
    if a.d != b.d {
        return Err(MetricsError::DimensionMismatch(a.d, b.d));
    }
    for s in [a, b] {
        if s.n < 2 {
            return Err(MetricsError::TooFewSamples(s.n));
        }
    }
    Ok(())
}

fn finish(value: f64) -> f64 {
    value.max(0.0)
}

/// Fréchet distance between Gaussians fitted to two feature sets.
pub fn frechet_distance(a: &FeatureSet, b: &FeatureSet) -> Result<f64, MetricsError> {
    check_pair(a, b)?;
    let route = if a.d > a.n.min(b.n) {
        FrechetRoute::SampleSpace
    } else {
        FrechetRoute::Covariance
    };
    frechet_distance_with(a, b, route)
}

pub fn frechet_distance_with(a: &FeatureSet, b: &FeatureSet, route: FrechetRoute) -> Result<f64, MetricsError> {
    check_pair(a, b)?;
    let (a, b) = if a.content_cmp(b) == Ordering::Greater { (b, a) } else { (a, b) };
    match route {
        FrechetRoute::Covariance => {
            let (ma, sa) = a.moments();
            let (mb, sb) = b.moments();
            moments_distance(&ma, &sa, &mb, &sb)
        }
        FrechetRoute::SampleSpace => {
            let ma = a.mean();
            let mb = b.mean();
            let xa = a.centered(&ma);
            let xb = b.centered(&mb);
            let na1 = a.n as f64 - 1.0;
            let nb1 = b.n as f64 - 1.0;
            let tr_a = xa.iter().map(|v| v * v).sum::<f64>() / na1;
            let tr_b = xb.iter().map(|v| v * v).sum::<f64>() / nb1;
            let c = &xa * xb.transpose();
            let gram = if a.n <= b.n { &c * c.transpose() } else { c.transpose() * &c };
            let cross: f64 = clamped_eigenvalues(gram)?.iter().map(|v| v.sqrt()).sum::<f64>() / (na1 * nb1).sqrt();
            Ok(finish((ma - mb).norm_squared() + tr_a + tr_b - 2.0 * cross))
        }
    }
}

fn moments_distance(
    ma: &DVector<f64>,
    sa: &DMatrix<f64>,
    mb: &DVector<f64>,
    sb: &DMatrix<f64>,
) -> Result<f64, MetricsError> {
    let cross = trace_sqrt_product(sa, sb)?;
    Ok(finish((ma - mb).norm_squared() + sa.trace() + sb.trace() - 2.0 * cross))
}

/// Fréchet distance from given means and covariances.
pub fn frechet_from_moments(
    mu_a: &DVector<f64>,
    sigma_a: &DMatrix<f64>,
    mu_b: &DVector<f64>,
    sigma_b: &DMatrix<f64>,
) -> Result<f64, MetricsError> {
    let d = mu_a.len();
    for (r, c) in [sigma_a.shape(), sigma_b.shape(), (mu_b.len(), mu_b.len())] {
        if r != d || c != d {
            return Err(MetricsError::DimensionMismatch(d, r.max(c)));
        }
    }
    moments_distance(mu_a, sigma_a, mu_b, sigma_b)
}
