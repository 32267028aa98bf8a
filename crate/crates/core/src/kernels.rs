//! Stationary covariance functions and assembly of the regularized kernel
//! matrix `A = K + sigma2 * I`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::matrix::SymMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelFamily {
    /// Squared exponential, `theta * exp(-|x - z|^2 / (2 l^2))`.
    Rbf,
    /// Ornstein-Uhlenbeck (exponential), `theta * exp(-|x - z| / l)`.
    Ou,
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelFamily::Rbf => f.write_str("rbf"),
            KernelFamily::Ou => f.write_str("ou"),
        }
    }
}

impl FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rbf" => Ok(KernelFamily::Rbf),
            "ou" => Ok(KernelFamily::Ou),
            other => Err(Error::input(format!("unknown kernel family `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    family: KernelFamily,
    theta: f64,
    lengthscale: f64,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, theta: f64, lengthscale: f64) -> Result<Self> {
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::input(format!("theta must be positive, got {theta}")));
        }
        if !(lengthscale > 0.0 && lengthscale.is_finite()) {
            return Err(Error::input(format!(
                "lengthscale must be positive, got {lengthscale}"
            )));
        }
        Ok(KernelSpec {
            family,
            theta,
            lengthscale,
        })
    }

    pub fn rbf(theta: f64, lengthscale: f64) -> Result<Self> {
        Self::new(KernelFamily::Rbf, theta, lengthscale)
    }

    pub fn ou(theta: f64, lengthscale: f64) -> Result<Self> {
        Self::new(KernelFamily::Ou, theta, lengthscale)
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn lengthscale(&self) -> f64 {
        self.lengthscale
    }

    /// Evaluates `k(x, z)`.
    pub fn eval(&self, x: &[f64], z: &[f64]) -> Result<f64> {
        if x.len() != z.len() {
            return Err(Error::input(format!(
                "dimension mismatch: {} vs {}",
                x.len(),
                z.len()
            )));
        }
        Ok(self.eval_unchecked(x, z))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &[f64], z: &[f64]) -> f64 {
        let sq = squared_distance(x, z);
        match self.family {
            KernelFamily::Rbf => self.theta * (-sq / (2.0 * self.lengthscale * self.lengthscale)).exp(),
            KernelFamily::Ou => self.theta * (-sq.sqrt() / self.lengthscale).exp(),
        }
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}(theta={}, lengthscale={})",
            self.family, self.theta, self.lengthscale
        )
    }
}

/// Squared Euclidean distance with a scaled accumulation so that large
/// coordinates do not overflow before the exponential flattens them anyway.
#[inline]
fn squared_distance(x: &[f64], z: &[f64]) -> f64 {
    let mut scale = 0.0_f64;
    let mut sum = 1.0_f64;
    for (a, b) in x.iter().zip(z) {
        let d = (a - b).abs();
        if d == 0.0 {
            continue;
        }
        if scale < d {
            sum = 1.0 + sum * (scale / d) * (scale / d);
            scale = d;
        } else {
            sum += (d / scale) * (d / scale);
        }
    }
    if scale == 0.0 {
        0.0
    } else {
        scale * scale * sum
    }
}

/// Assembles `A[i][j] = k(x_i, x_j) + sigma2 * [i == j]`.
pub fn assemble_matrix(points: &[Vec<f64>], spec: &KernelSpec, sigma2: f64) -> Result<SymMatrix> {
    assemble_matrix_clamped(points, spec, sigma2, None)
}

/// Like [`assemble_matrix`], but off-diagonal kernel values strictly below
/// `clamp_below` are replaced by zero.
pub fn assemble_matrix_clamped(
    points: &[Vec<f64>],
    spec: &KernelSpec,
    sigma2: f64,
    clamp_below: Option<f64>,
) -> Result<SymMatrix> {
    let first = points
        .first()
        .ok_or_else(|| Error::input("cannot assemble a kernel matrix from zero points"))?;
    let dim = first.len();
    if let Some(bad) = points.iter().position(|p| p.len() != dim) {
        return Err(Error::input(format!(
            "point {bad} has dimension {} but point 0 has dimension {dim}",
            points[bad].len()
        )));
    }
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::input(format!("sigma2 must be positive, got {sigma2}")));
    }
    let threshold = clamp_below.unwrap_or(0.0);
    Ok(SymMatrix::from_lower_fn(points.len(), |i, j| {
        if i == j {
            spec.eval_unchecked(&points[i], &points[j]) + sigma2
        } else {
            let v = spec.eval_unchecked(&points[i], &points[j]);
            if v < threshold {
                0.0
            } else {
                v
            }
        }
    }))
}

/// Tightest almost-sure upper bound on `log A_jj` for a stationary kernel:
/// `log(theta + sigma2)`.
pub fn kappa_plus(spec: &KernelSpec, sigma2: f64) -> f64 {
    (spec.theta() + sigma2).ln()
}
