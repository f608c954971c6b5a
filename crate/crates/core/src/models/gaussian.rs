use serde::{Deserialize, Serialize};

use super::ModelError;

pub type Vec2 = [f64; 2];
pub type Mat2 = [[f64; 2]; 2];

/// Bivariate Gaussian with its inverse covariance cached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GaussianRepr", into = "GaussianRepr")]
pub struct GaussianParams {
    mean: Vec2,
    covariance: Mat2,
    inverse_covariance: Mat2,
}

/// On-disk form: covariance stored row-major, inverse recomputed on load.
#[derive(Serialize, Deserialize)]
struct GaussianRepr {
    mean: Vec2,
    covariance: [f64; 4],
}

impl TryFrom<GaussianRepr> for GaussianParams {
    type Error = ModelError;

    fn try_from(r: GaussianRepr) -> Result<Self, Self::Error> {
        let [a, b, c, d] = r.covariance;
        GaussianParams::new(r.mean, [[a, b], [c, d]])
    }
}

impl From<GaussianParams> for GaussianRepr {
    fn from(g: GaussianParams) -> Self {
        let [[a, b], [c, d]] = g.covariance;
        GaussianRepr {
            mean: g.mean,
            covariance: [a, b, c, d],
        }
    }
}

impl GaussianParams {
    /// Requires a finite mean and a symmetric positive-definite covariance.
    pub fn new(mean: Vec2, covariance: Mat2) -> Result<Self, ModelError> {
        if !mean.iter().all(|x| x.is_finite()) {
            return Err(ModelError::InvalidCovariance(format!("non-finite mean {mean:?}")));
        }
        let inverse_covariance = spd_inverse(&covariance)?;
        Ok(Self {
            mean,
            covariance,
            inverse_covariance,
        })
    }

    pub fn mean(&self) -> Vec2 {
        self.mean
    }

    pub fn covariance(&self) -> Mat2 {
        self.covariance
    }

    pub fn inverse_covariance(&self) -> Mat2 {
        self.inverse_covariance
    }

    /// Eigenvalues of the covariance, ascending.
    pub fn eigenvalues(&self) -> Vec2 {
        sym_eigenvalues(&self.covariance)
    }
}

fn sym_eigenvalues(m: &Mat2) -> Vec2 {
    let [[a, b], [_, d]] = *m;
    let half_trace = 0.5 * (a + d);
    let disc = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    [half_trace - disc, half_trace + disc]
}

/// Inverse through the Cholesky factor `Σ = L Lᵀ`, so `Σ⁻¹ = L⁻ᵀ L⁻¹`.
fn spd_inverse(m: &Mat2) -> Result<Mat2, ModelError> {
    let [[a, b], [c, d]] = *m;
    if ![a, b, c, d].iter().all(|x| x.is_finite()) {
        return Err(ModelError::InvalidCovariance(format!("non-finite entries {m:?}")));
    }
    if b != c {
        return Err(ModelError::InvalidCovariance(format!("not symmetric {m:?}")));
    }
    if a <= 0.0 {
        return Err(ModelError::InvalidCovariance(format!("not positive definite {m:?}")));
    }
    let l11 = a.sqrt();
    let l21 = b / l11;
    let rest = d - l21 * l21;
    if rest <= 0.0 {
        return Err(ModelError::InvalidCovariance(format!("not positive definite {m:?}")));
    }
    let l22 = rest.sqrt();
    // L⁻¹ = [[1/l11, 0], [-l21/(l11 l22), 1/l22]]
    let i11 = 1.0 / l11;
    let i21 = -l21 / (l11 * l22);
    let i22 = 1.0 / l22;
    let off = i21 * i22;
    Ok([[i11 * i11 + i21 * i21, off], [off, i22 * i22]])
}

/// Maximum-likelihood fit (`1/N` scatter) plus `epsilon` on the diagonal.
pub fn fit_gaussian(samples: &[Vec2], epsilon: f64) -> Result<GaussianParams, ModelError> {
    if samples.is_empty() {
        return Err(ModelError::NoSamples);
    }
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(ModelError::InvalidParameter(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let n = samples.len() as f64;
    let mut mean = [0.0; 2];
    for s in samples {
        mean[0] += s[0];
        mean[1] += s[1];
    }
    mean[0] /= n;
    mean[1] /= n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for s in samples {
        let dx = s[0] - mean[0];
        let dy = s[1] - mean[1];
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let cov = [[sxx / n + epsilon, sxy / n], [sxy / n, syy / n + epsilon]];
    GaussianParams::new(mean, cov)
}

/// `(e − μ)ᵀ Σ⁻¹ (e − μ)`.
pub fn mahalanobis(e: Vec2, g: &GaussianParams) -> f64 {
    let dx = e[0] - g.mean[0];
    let dy = e[1] - g.mean[1];
    let inv = &g.inverse_covariance;
    let q = inv[0][0] * dx * dx + 2.0 * inv[0][1] * dx * dy + inv[1][1] * dy * dy;
    q.max(0.0)
}

/// Smallest Mahalanobis distance over a set of cluster Gaussians.
pub fn spatial_cost(e: Vec2, clusters: &[GaussianParams]) -> Result<f64, ModelError> {
    clusters
        .iter()
        .map(|g| mahalanobis(e, g))
        .reduce(f64::min)
        .ok_or(ModelError::NoClusters)
}
