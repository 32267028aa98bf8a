//! In-place Cholesky factorization, plain and with optional stopping.
//!
//! All routines overwrite the lower triangle of a [`SymMatrix`] with the factor
//! `C` (`C C^T = A`). The stopped variants accumulate `D_n = 2 sum log C_jj`
//! while factorizing and consult the stop rule of [`crate::bounds`] at each
//! checkpoint. Row `j` of the factor depends only on rows `0..=j` of `A`, so a
//! stopped run never reads the rows it skipped.
//!
//! When a run stops, only the first `tau` rows of the lower triangle hold the
//! factor; the rest of the matrix is left as it was.

use crate::bounds::{evaluate_bounds, BoundsState, StopDecision, StoppingConfig};
use crate::error::{Error, Result};
use crate::matrix::SymMatrix;

/// Pivots at or below this fraction of the largest diagonal entry are rejected.
const PIVOT_REL_TOL: f64 = 1e-14;

/// Column tile width for the blocked triangular solve.
const SOLVE_TILE: usize = 64;

/// Default per-thread block width for the blocked factorization.
pub const DEFAULT_BLOCK_WIDTH: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopOutcome {
    /// Stop rule fired at checkpoint `tau < N`.
    Stopped {
        estimate: f64,
        tau: usize,
        lower: f64,
        upper: f64,
    },
    /// Every row was processed; `log_det` is exact up to rounding.
    Completed { log_det: f64, rows_processed: usize },
}

impl StopOutcome {
    /// Estimate on `Stopped`, exact log-determinant on `Completed`.
    pub fn value(&self) -> f64 {
        match *self {
            StopOutcome::Stopped { estimate, .. } => estimate,
            StopOutcome::Completed { log_det, .. } => log_det,
        }
    }

    /// Number of rows of the factor that were computed.
    pub fn rows_processed(&self) -> usize {
        match *self {
            StopOutcome::Stopped { tau, .. } => tau,
            StopOutcome::Completed { rows_processed, .. } => rows_processed,
        }
    }

    pub fn is_stopped(&self) -> bool {
        matches!(self, StopOutcome::Stopped { .. })
    }
}

/// Block width and the checkpoint sequence `min(i * b, N)` it induces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockPlan {
    block_size: usize,
}

impl BlockPlan {
    pub fn new(block_size: usize) -> Result<Self> {
        if block_size == 0 {
            return Err(Error::input("block size must be positive"));
        }
        Ok(BlockPlan { block_size })
    }

    /// `available parallelism x 64`.
    pub fn default_for_host() -> Self {
        let cpus = std::thread::available_parallelism().map_or(1, |n| n.get());
        BlockPlan {
            block_size: cpus * DEFAULT_BLOCK_WIDTH,
        }
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn checkpoints(&self, n_total: usize) -> Vec<usize> {
        (1..)
            .map(|i| (i * self.block_size).min(n_total))
            .take(n_total.div_ceil(self.block_size))
            .collect()
    }
}

impl Default for BlockPlan {
    fn default() -> Self {
        Self::default_for_host()
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four independent accumulators let the compiler vectorize the loop.
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        let i = 4 * k;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

fn pivot_threshold(a: &SymMatrix) -> f64 {
    PIVOT_REL_TOL * a.max_diag().max(0.0)
}

/// Computes row `j` of the factor in place from rows `0..j`, which must
/// already hold the factor. Returns `C_jj`.
#[inline]
fn factor_row(data: &mut [f64], dim: usize, j: usize, threshold: f64) -> Result<f64> {
    let (done, rest) = data.split_at_mut(j * dim);
    let row = &mut rest[..=j];
    for i in 0..j {
        let prev = &done[i * dim..i * dim + i + 1];
        row[i] = (row[i] - dot(&row[..i], &prev[..i])) / prev[i];
    }
    let pivot = row[j] - dot(&row[..j], &row[..j]);
    if !(pivot > threshold) {
        return Err(Error::NotPositiveDefinite {
            index: j,
            value: pivot,
        });
    }
    row[j] = pivot.sqrt();
    Ok(row[j])
}

/// `2 sum log C_jj` over the diagonal of a lower-triangular factor.
pub fn log_det_from_factor(c: &SymMatrix) -> Result<f64> {
    let mut sum = 0.0;
    for j in 0..c.dim() {
        let d = c.get(j, j);
        if !(d > 0.0) {
            return Err(Error::input(format!(
                "factor diagonal entry {j} is not positive: {d}"
            )));
        }
        sum += d.ln();
    }
    Ok(2.0 * sum)
}

/// Full factorization with the default block plan and no stop checks.
pub fn cholesky_full(a: &mut SymMatrix) -> Result<()> {
    cholesky_blocked(a, BlockPlan::default_for_host())
}

/// Full factorization with an explicit block plan and no stop checks.
pub fn cholesky_blocked(a: &mut SymMatrix, plan: BlockPlan) -> Result<()> {
    blocked_driver(a, plan, None, &mut |_| {}).map(|_| ())
}

/// Unblocked row-by-row factorization; the textbook reference.
pub fn cholesky_unblocked(a: &mut SymMatrix) -> Result<()> {
    let dim = a.dim();
    let threshold = pivot_threshold(a);
    let data = a.as_mut_slice();
    for j in 0..dim {
        factor_row(data, dim, j, threshold)?;
    }
    Ok(())
}

/// Row-wise factorization with a stop check after every diagonal element.
pub fn stopped_cholesky_rowwise(a: &mut SymMatrix, cfg: &StoppingConfig) -> Result<StopOutcome> {
    stopped_cholesky_rowwise_observed(a, cfg, &mut |_| {})
}

/// [`stopped_cholesky_rowwise`], reporting every interior checkpoint to `observer`.
pub fn stopped_cholesky_rowwise_observed(
    a: &mut SymMatrix,
    cfg: &StoppingConfig,
    observer: &mut dyn FnMut(&BoundsState),
) -> Result<StopOutcome> {
    let dim = a.dim();
    check_dims(dim, cfg)?;
    let threshold = pivot_threshold(a);
    let data = a.as_mut_slice();
    let mut d = 0.0;
    for j in 0..dim {
        let cjj = factor_row(data, dim, j, threshold)?;
        d += 2.0 * cjj.ln();
        let n = j + 1;
        if n < dim {
            let (state, decision) = evaluate_bounds(n, d, cfg)?;
            observer(&state);
            if let StopDecision::Stop { estimate } = decision {
                return Ok(StopOutcome::Stopped {
                    estimate,
                    tau: n,
                    lower: state.lower,
                    upper: state.upper,
                });
            }
        }
    }
    Ok(StopOutcome::Completed {
        log_det: d,
        rows_processed: dim,
    })
}

/// Blocked left-looking factorization with a stop check once per block.
pub fn stopped_cholesky_blocked(
    a: &mut SymMatrix,
    plan: BlockPlan,
    cfg: &StoppingConfig,
) -> Result<StopOutcome> {
    stopped_cholesky_blocked_observed(a, plan, cfg, &mut |_| {})
}

/// [`stopped_cholesky_blocked`], reporting every interior checkpoint to `observer`.
pub fn stopped_cholesky_blocked_observed(
    a: &mut SymMatrix,
    plan: BlockPlan,
    cfg: &StoppingConfig,
    observer: &mut dyn FnMut(&BoundsState),
) -> Result<StopOutcome> {
    check_dims(a.dim(), cfg)?;
    blocked_driver(a, plan, Some(cfg), observer)
}

fn check_dims(dim: usize, cfg: &StoppingConfig) -> Result<()> {
    if dim == 0 {
        return Err(Error::input("cannot factorize an empty matrix"));
    }
    if dim != cfg.n_total() {
        return Err(Error::input(format!(
            "matrix has {dim} rows but the stopping config expects {}",
            cfg.n_total()
        )));
    }
    Ok(())
}

fn blocked_driver(
    a: &mut SymMatrix,
    plan: BlockPlan,
    cfg: Option<&StoppingConfig>,
    observer: &mut dyn FnMut(&BoundsState),
) -> Result<StopOutcome> {
    let dim = a.dim();
    let b = plan.block_size();
    let threshold = pivot_threshold(a);
    let data = a.as_mut_slice();
    let mut panel = Vec::new();
    let mut d = 0.0;
    let mut start = 0;
    while start < dim {
        let end = (start + b).min(dim);
        if start > 0 {
            panel_solve(data, dim, start, end);
            schur_update(data, dim, start, end, &mut panel);
        }
        for j in start..end {
            let cjj = diagonal_block_row(data, dim, start, j, threshold)?;
            d += 2.0 * cjj.ln();
        }
        if let Some(cfg) = cfg {
            if end < dim {
                let (state, decision) = evaluate_bounds(end, d, cfg)?;
                observer(&state);
                if let StopDecision::Stop { estimate } = decision {
                    return Ok(StopOutcome::Stopped {
                        estimate,
                        tau: end,
                        lower: state.lower,
                        upper: state.upper,
                    });
                }
            }
        }
        start = end;
    }
    Ok(StopOutcome::Completed {
        log_det: d,
        rows_processed: dim,
    })
}

/// Panel `X = A[start..end, 0..start]` is overwritten by `X C11^{-T}`, where
/// `C11` is the already factorized leading block. Column tiles of `C11` are
/// applied with a GEMM followed by a small triangular solve.
fn panel_solve(data: &mut [f64], dim: usize, start: usize, end: usize) {
    let rows = end - start;
    let mut k0 = 0;
    while k0 < start {
        let k1 = (k0 + SOLVE_TILE).min(start);
        if k0 > 0 {
            // X[:, k0..k1] -= X[:, 0..k0] * C[k0..k1, 0..k0]^T
            let base = data.as_mut_ptr();
            // SAFETY: the three regions are disjoint element sets of `data`:
            // reads from rows start..end cols 0..k0 and rows k0..k1 (< start)
            // cols 0..k0; writes to rows start..end cols k0..k1.
            unsafe {
                matrixmultiply::dgemm(
                    rows,
                    k0,
                    k1 - k0,
                    -1.0,
                    base.add(start * dim),
                    dim as isize,
                    1,
                    base.add(k0 * dim),
                    1,
                    dim as isize,
                    1.0,
                    base.add(start * dim + k0),
                    dim as isize,
                    1,
                );
            }
        }
        let (head, tail) = data.split_at_mut(start * dim);
        for r in 0..rows {
            let row = &mut tail[r * dim..r * dim + start];
            for c in k0..k1 {
                let crow = &head[c * dim..c * dim + c + 1];
                row[c] = (row[c] - dot(&row[k0..c], &crow[k0..c])) / crow[c];
            }
        }
        k0 = k1;
    }
}

/// `A[start..end, start..end] -= X X^T` with `X` the solved panel. The panel
/// is copied to scratch so the output block can be written through a plain
/// GEMM; the upper half of the diagonal block receives scratch values.
fn schur_update(data: &mut [f64], dim: usize, start: usize, end: usize, panel: &mut Vec<f64>) {
    let rows = end - start;
    panel.clear();
    for r in start..end {
        panel.extend_from_slice(&data[r * dim..r * dim + start]);
    }
    // SAFETY: `panel` is a separate allocation; output rows start..end,
    // cols start..end lie inside `data`.
    unsafe {
        matrixmultiply::dgemm(
            rows,
            start,
            rows,
            -1.0,
            panel.as_ptr(),
            start as isize,
            1,
            panel.as_ptr(),
            1,
            start as isize,
            1.0,
            data.as_mut_ptr().add(start * dim + start),
            dim as isize,
            1,
        );
    }
}

/// Factorizes row `j` of the diagonal block beginning at `start`; the columns
/// left of `start` have already been folded in by the Schur update.
#[inline]
fn diagonal_block_row(
    data: &mut [f64],
    dim: usize,
    start: usize,
    j: usize,
    threshold: f64,
) -> Result<f64> {
    let (done, rest) = data.split_at_mut(j * dim);
    let row = &mut rest[start..=j];
    let width = j - start;
    for i in 0..width {
        let prev = &done[(start + i) * dim + start..(start + i) * dim + start + i + 1];
        row[i] = (row[i] - dot(&row[..i], &prev[..i])) / prev[i];
    }
    let pivot = row[width] - dot(&row[..width], &row[..width]);
    if !(pivot > threshold) {
        return Err(Error::NotPositiveDefinite {
            index: j,
            value: pivot,
        });
    }
    row[width] = pivot.sqrt();
    Ok(row[width])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::reconstruct_from_factor;
    use approx::assert_relative_eq;

    fn spd(dim: usize, seed: u64) -> SymMatrix {
        // B B^T + dim * I from a simple LCG, enough for unit tests
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
        let mut next = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let b: Vec<Vec<f64>> = (0..dim).map(|_| (0..dim).map(|_| next()).collect()).collect();
        SymMatrix::from_lower_fn(dim, |i, j| {
            let s: f64 = (0..dim).map(|k| b[i][k] * b[j][k]).sum();
            s + if i == j { dim as f64 } else { 0.0 }
        })
    }

    #[test]
    fn identity_factor_is_identity() {
        let mut a = SymMatrix::identity(5);
        cholesky_full(&mut a).unwrap();
        for i in 0..5 {
            for j in 0..=i {
                assert_eq!(a.get(i, j), if i == j { 1.0 } else { 0.0 });
            }
        }
        assert_eq!(log_det_from_factor(&a).unwrap(), 0.0);
    }

    #[test]
    fn two_by_two_hand_factor() {
        for variant in 0..3 {
            let mut a = SymMatrix::from_rows(&[vec![4.0, 2.0], vec![2.0, 5.0]]).unwrap();
            match variant {
                0 => cholesky_unblocked(&mut a).unwrap(),
                1 => cholesky_full(&mut a).unwrap(),
                _ => cholesky_blocked(&mut a, BlockPlan::new(1).unwrap()).unwrap(),
            }
            assert_eq!(a.get(0, 0), 2.0);
            assert_eq!(a.get(1, 0), 1.0);
            assert_eq!(a.get(1, 1), 2.0);
            assert_relative_eq!(
                log_det_from_factor(&a).unwrap(),
                4.0 * 2f64.ln(),
                max_relative = 1e-15
            );
        }
    }

    #[test]
    fn log_det_rejects_nonpositive_diagonal() {
        let c = SymMatrix::from_rows(&[vec![1.0, 0.0], vec![0.5, 0.0]]).unwrap();
        assert!(matches!(log_det_from_factor(&c), Err(Error::Input(_))));
    }

    #[test]
    fn non_pd_reports_index() {
        let a = SymMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        for plan in [1, 64] {
            let mut m = a.clone();
            let err = cholesky_blocked(&mut m, BlockPlan::new(plan).unwrap()).unwrap_err();
            assert!(matches!(err, Error::NotPositiveDefinite { index: 1, .. }));
        }
        let mut m = a.clone();
        assert!(matches!(
            cholesky_unblocked(&mut m),
            Err(Error::NotPositiveDefinite { index: 1, .. })
        ));
    }

    #[test]
    fn blocked_matches_unblocked_across_block_sizes() {
        let a = spd(150, 3);
        let mut reference = a.clone();
        cholesky_unblocked(&mut reference).unwrap();
        for b in [1, 7, 32, 64, 149, 150, 400] {
            let mut m = a.clone();
            cholesky_blocked(&mut m, BlockPlan::new(b).unwrap()).unwrap();
            for i in 0..150 {
                for j in 0..=i {
                    assert_relative_eq!(m.get(i, j), reference.get(i, j), epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn reconstruction_is_close() {
        let a = spd(90, 11);
        let mut c = a.clone();
        cholesky_blocked(&mut c, BlockPlan::new(16).unwrap()).unwrap();
        let back = reconstruct_from_factor(&c);
        let scale = a.norm_inf();
        for i in 0..90 {
            for j in 0..=i {
                assert!((back.get(i, j) - a.get(i, j)).abs() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn block_plan_checkpoints() {
        assert_eq!(BlockPlan::new(4).unwrap().checkpoints(10), vec![4, 8, 10]);
        assert_eq!(BlockPlan::new(20).unwrap().checkpoints(10), vec![10]);
        assert_eq!(BlockPlan::new(1).unwrap().checkpoints(3), vec![1, 2, 3]);
        assert!(BlockPlan::new(0).is_err());
        assert!(BlockPlan::default_for_host().block_size() >= DEFAULT_BLOCK_WIDTH);
    }

    #[test]
    fn stopped_rejects_dimension_mismatch() {
        let cfg = StoppingConfig::new(3, 0.001, 0.1, 0.1, 1.0).unwrap();
        let mut a = SymMatrix::identity(2);
        assert!(stopped_cholesky_rowwise(&mut a, &cfg).is_err());
        assert!(stopped_cholesky_blocked(&mut a, BlockPlan::new(1).unwrap(), &cfg).is_err());
    }

    #[test]
    fn single_block_always_completes() {
        let a = spd(40, 5);
        let cfg = StoppingConfig::new(40, 1.0, 0.1, 100.0, a.max_diag().ln() + 1.0).unwrap();
        let mut m = a.clone();
        let out = stopped_cholesky_blocked(&mut m, BlockPlan::new(40).unwrap(), &cfg).unwrap();
        assert!(matches!(out, StopOutcome::Completed { rows_processed: 40, .. }));
    }
}
