//! Reference computations that take a different algorithmic path from the
//! factorizations under test: eigendecomposition for log-determinants, an
//! LU solve for Gaussian-process posterior variances, and Monte-Carlo
//! checks of the statistical claims behind the stop rule.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{Beta, ContinuousCDF};

use crate::bounds::StoppingConfig;
use crate::cholesky::{cholesky_unblocked, stopped_cholesky_rowwise, StopOutcome};
use crate::data::rng_from_seed;
use crate::error::{Error, Result};
use crate::kernels::{assemble_matrix, kappa_plus, KernelSpec};
use crate::matrix::SymMatrix;

fn to_dense(a: &SymMatrix) -> DMatrix<f64> {
    let n = a.dim();
    DMatrix::from_fn(n, n, |i, j| a.sym(i, j))
}

/// Sum of log eigenvalues of the symmetric matrix.
pub fn logdet_reference(a: &SymMatrix) -> Result<f64> {
    if a.dim() == 0 {
        return Err(Error::input("empty matrix"));
    }
    let eig = to_dense(a).symmetric_eigenvalues();
    let mut sum = 0.0;
    for (i, &l) in eig.iter().enumerate() {
        if !(l > 0.0) {
            return Err(Error::input(format!(
                "matrix is not positive definite: eigenvalue {i} is {l:e}"
            )));
        }
        sum += l.ln();
    }
    Ok(sum)
}

/// Posterior variance at `query` given noisy observations at `conditioning`:
/// `k(x, x) + sigma2 - k^T (K + sigma2 I)^{-1} k`.
pub fn gp_posterior_variance(
    conditioning: &[Vec<f64>],
    query: &[f64],
    spec: &KernelSpec,
    sigma2: f64,
) -> Result<f64> {
    let prior = spec.eval(query, query)? + sigma2;
    if conditioning.is_empty() {
        return Ok(prior);
    }
    let m = conditioning.len();
    let gram = assemble_matrix(conditioning, spec, sigma2)?;
    let k = conditioning
        .iter()
        .map(|x| spec.eval(x, query))
        .collect::<Result<Vec<_>>>()?;
    let k = DVector::from_vec(k);
    let solved = DMatrix::from_fn(m, m, |i, j| gram.sym(i, j))
        .lu()
        .solve(&k)
        .ok_or_else(|| Error::Numerical("singular Gram matrix in posterior solve".into()))?;
    Ok(prior - k.dot(&solved))
}

/// How oracle experiments draw their input points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointDistribution {
    /// i.i.d. standard normal coordinates.
    StandardNormal,
    /// Every point equal to the origin.
    Duplicate,
}

pub fn sample_points(dist: PointDistribution, n: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    match dist {
        PointDistribution::StandardNormal => {
            let mut rng = rng_from_seed(seed);
            (0..n)
                .map(|_| (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect())
                .collect()
        }
        PointDistribution::Duplicate => vec![vec![0.0; dim]; n],
    }
}

/// Seed for trial `index` under root seed `root`.
pub fn trial_seed(root: u64, index: usize) -> u64 {
    root ^ index as u64
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecreasingExpectationReport {
    /// Sample mean of `f_j = 2 log C_jj` for each index.
    pub means: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// Indices `j` (0-based) where `mean[j + 1]` exceeds `mean[j]` by more
    /// than three combined standard errors.
    pub violations: Vec<usize>,
}

impl DecreasingExpectationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Estimates `E[f_j]` for `j = 1..n` over independent point sets and checks
/// that the sequence of sample means is non-increasing up to sampling noise.
pub fn check_decreasing_expectation(
    spec: &KernelSpec,
    sigma2: f64,
    n: usize,
    dim: usize,
    trials: usize,
    seed: u64,
    dist: PointDistribution,
) -> Result<DecreasingExpectationReport> {
    if n == 0 || trials < 2 {
        return Err(Error::input("need n >= 1 and at least two trials"));
    }
    let mut sum = vec![0.0; n];
    let mut sum_sq = vec![0.0; n];
    for t in 0..trials {
        let points = sample_points(dist, n, dim, trial_seed(seed, t));
        let mut a = assemble_matrix(&points, spec, sigma2)?;
        cholesky_unblocked(&mut a)?;
        for j in 0..n {
            let f = 2.0 * a.get(j, j).ln();
            sum[j] += f;
            sum_sq[j] += f * f;
        }
    }
    let tf = trials as f64;
    let means: Vec<f64> = sum.iter().map(|s| s / tf).collect();
    let std_errors: Vec<f64> = sum_sq
        .iter()
        .zip(&means)
        .map(|(sq, m)| {
            let var = ((sq - tf * m * m) / (tf - 1.0)).max(0.0);
            (var / tf).sqrt()
        })
        .collect();
    let violations = (0..n.saturating_sub(1))
        .filter(|&j| {
            let slack = 3.0 * (std_errors[j].powi(2) + std_errors[j + 1].powi(2)).sqrt();
            means[j + 1] > means[j] + slack
        })
        .collect();
    Ok(DecreasingExpectationReport {
        means,
        std_errors,
        violations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialRecord {
    pub seed: u64,
    /// Rows processed before the run ended.
    pub tau: usize,
    pub estimate: f64,
    pub reference: f64,
    pub relative_error: f64,
    pub stopped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GuaranteeReport {
    pub trials: Vec<TrialRecord>,
    /// Trials whose relative error exceeded `r`.
    pub failures: usize,
    pub failure_rate: f64,
    /// One-sided 95% Clopper-Pearson upper bound on the failure probability.
    pub failure_rate_upper95: f64,
}

/// One-sided upper Clopper-Pearson bound for `k` successes in `n` trials.
pub fn binomial_upper_bound(k: usize, n: usize, confidence: f64) -> f64 {
    if k >= n {
        return 1.0;
    }
    Beta::new(k as f64 + 1.0, (n - k) as f64)
        .map(|b| b.inverse_cdf(confidence))
        .unwrap_or(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuaranteeSetup {
    pub spec: KernelSpec,
    pub sigma2: f64,
    pub delta: f64,
    pub r: f64,
    pub n: usize,
    pub dim: usize,
    pub dist: PointDistribution,
}

/// Runs the row-wise stopped factorization on fresh point sets and measures
/// how often its answer misses the eigendecomposition reference by more than `r`.
pub fn check_guarantee(setup: &GuaranteeSetup, trials: usize, seed: u64) -> Result<GuaranteeReport> {
    if trials == 0 {
        return Err(Error::input("need at least one trial"));
    }
    let cfg = StoppingConfig::new(
        setup.n,
        setup.sigma2,
        setup.delta,
        setup.r,
        kappa_plus(&setup.spec, setup.sigma2),
    )?;
    let mut records = Vec::with_capacity(trials);
    for t in 0..trials {
        let trial = trial_seed(seed, t);
        let points = sample_points(setup.dist, setup.n, setup.dim, trial);
        let a = assemble_matrix(&points, &setup.spec, setup.sigma2)?;
        let mut work = a.clone();
        let outcome = stopped_cholesky_rowwise(&mut work, &cfg)?;
        let record = match outcome {
            StopOutcome::Stopped { estimate, tau, .. } => {
                let reference = logdet_reference(&a)?;
                if reference == 0.0 {
                    return Err(Error::Numerical("reference log-determinant is zero".into()));
                }
                TrialRecord {
                    seed: trial,
                    tau,
                    estimate,
                    reference,
                    relative_error: (reference - estimate).abs() / reference.abs(),
                    stopped: true,
                }
            }
            // completion returns the exact sum, so the error is zero by definition
            StopOutcome::Completed { log_det, rows_processed } => TrialRecord {
                seed: trial,
                tau: rows_processed,
                estimate: log_det,
                reference: log_det,
                relative_error: 0.0,
                stopped: false,
            },
        };
        records.push(record);
    }
    let failures = records.iter().filter(|r| r.relative_error > setup.r).count();
    Ok(GuaranteeReport {
        failure_rate: failures as f64 / trials as f64,
        failure_rate_upper95: binomial_upper_bound(failures, trials, 0.95),
        failures,
        trials: records,
    })
}
