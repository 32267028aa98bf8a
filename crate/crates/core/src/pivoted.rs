//! Cholesky decomposition with full (diagonal) pivoting, used as the
//! comparison baseline.
//!
//! Each step selects the index with the largest residual diagonal
//! `d_i = A_ii - sum_k L_ik^2`, materializes one column of the factor and
//! shrinks all residuals. After `n` steps the log-determinant is bracketed by
//!
//! * `L^P_n = D_n + (N - n) kappa_minus`,
//! * `U^P_n = D_n + sum_{remaining i} log d_i`,
//!
//! where `D_n` sums the logs of the selected residuals. Both bounds hold
//! deterministically, so the shared stop rule can be applied to them.

use crate::bounds::{decide, relative_error_bound, StopDecision, StoppingConfig};
use crate::error::{Error, Result};
use crate::matrix::SymMatrix;

const PIVOT_REL_TOL: f64 = 1e-14;

/// Residuals are floored at `sigma2 * (1 - RESIDUAL_SLACK)` before taking logs.
const RESIDUAL_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PivotStep {
    /// Number of pivots taken so far.
    pub n: usize,
    pub d_n: f64,
    pub lower: f64,
    pub upper: f64,
    /// Largest residual among the indices not yet pivoted (0 when none remain).
    pub max_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PivotedStop {
    /// Every remaining residual fell to at most the diagonal tolerance.
    DiagonalTolerance,
    /// The shared sign and relative-precision conditions held on the bounds.
    Bounds { estimate: f64 },
    /// All `N` pivots were taken.
    Completed { log_det: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PivotedOutcome {
    pub rank: usize,
    /// `perm[k]` is the original index selected at step `k`.
    pub perm: Vec<usize>,
    /// Factor columns in selection order, each of length `N` in original row order.
    pub columns: Vec<Vec<f64>>,
    /// Bounds after `0, 1, ..., rank` pivots.
    pub history: Vec<PivotStep>,
    pub stop: PivotedStop,
    /// Number of residuals raised to the floor before a log was taken.
    pub clamped: usize,
}

impl PivotedOutcome {
    pub fn final_step(&self) -> &PivotStep {
        self.history.last().expect("history always holds the initial step")
    }

    /// Estimate consistent with how the run ended: the exact value on
    /// completion, the midpoint of the final bounds otherwise.
    pub fn estimate(&self) -> f64 {
        match self.stop {
            PivotedStop::Completed { log_det } => log_det,
            PivotedStop::Bounds { estimate } => estimate,
            PivotedStop::DiagonalTolerance => {
                let s = self.final_step();
                0.5 * (s.lower + s.upper)
            }
        }
    }
}

/// Relative precision that the bounds at a pivoted run's final step guarantee.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GuaranteedPrecision {
    Defined(f64),
    /// The bounds straddle zero, so no relative precision can be certified.
    Undefined,
}

impl GuaranteedPrecision {
    /// Sentinel used as a precision target when nothing can be certified.
    pub const UNDEFINED_TARGET: f64 = 1.0;

    pub fn target(&self) -> f64 {
        match *self {
            GuaranteedPrecision::Defined(r) => r,
            GuaranteedPrecision::Undefined => Self::UNDEFINED_TARGET,
        }
    }

    pub fn is_defined(&self) -> bool {
        matches!(self, GuaranteedPrecision::Defined(_))
    }
}

pub fn guaranteed_precision_at_stop(history: &[PivotStep]) -> GuaranteedPrecision {
    let Some(last) = history.last() else {
        return GuaranteedPrecision::Undefined;
    };
    if last.lower == last.upper && last.lower != 0.0 {
        return GuaranteedPrecision::Defined(0.0);
    }
    match relative_error_bound(last.lower, last.upper) {
        Ok(Some(r)) => GuaranteedPrecision::Defined(r),
        _ => GuaranteedPrecision::Undefined,
    }
}

/// Runs the pivoted factorization until the largest remaining residual is at
/// most `diag_tol`, the shared stop rule fires (when `cfg` is given), or all
/// indices are pivoted. `sigma2` floors the residuals used in `U^P`; with
/// `cfg` it defaults to `cfg.sigma2()`.
pub fn pivoted_cholesky(
    a: &SymMatrix,
    diag_tol: f64,
    sigma2: Option<f64>,
    cfg: Option<&StoppingConfig>,
) -> Result<PivotedOutcome> {
    let dim = a.dim();
    if dim == 0 {
        return Err(Error::input("cannot factorize an empty matrix"));
    }
    if !(diag_tol > 0.0) {
        return Err(Error::input(format!(
            "diagonal tolerance must be positive, got {diag_tol}"
        )));
    }
    if let Some(cfg) = cfg {
        if cfg.n_total() != dim {
            return Err(Error::input(format!(
                "matrix has {dim} rows but the stopping config expects {}",
                cfg.n_total()
            )));
        }
    }
    let floor_sigma2 = sigma2.or(cfg.map(|c| c.sigma2()));
    let floor = floor_sigma2.map_or(f64::MIN_POSITIVE, |s| s * (1.0 - RESIDUAL_SLACK));
    let kappa_minus = match (cfg, floor_sigma2) {
        (Some(c), _) => c.kappa_minus(),
        (None, Some(s)) => s.ln(),
        // without a noise floor the only valid lower bound is the trivial one
        (None, None) => f64::NEG_INFINITY,
    };
    let threshold = PIVOT_REL_TOL * a.max_diag().max(0.0);

    let mut residual = a.diag();
    let mut active = vec![true; dim];
    let mut perm = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut history = Vec::new();
    let mut clamped = 0usize;
    let mut d_n = 0.0;

    loop {
        let n = perm.len();
        let mut log_remaining = 0.0;
        let mut best: Option<(usize, f64)> = None;
        for i in (0..dim).filter(|&i| active[i]) {
            let r = residual[i];
            if r < floor {
                clamped += 1;
            }
            log_remaining += r.max(floor).ln();
            if best.is_none_or(|(_, v)| r > v) {
                best = Some((i, r));
            }
        }
        let remaining = (dim - n) as f64;
        let lower = if n == dim { d_n } else { d_n + remaining * kappa_minus };
        let upper = d_n + log_remaining;
        let max_residual = best.map_or(0.0, |(_, v)| v);
        history.push(PivotStep {
            n,
            d_n,
            lower,
            upper,
            max_residual,
        });

        let Some((p, pivot)) = best else {
            return Ok(PivotedOutcome {
                rank: n,
                perm,
                columns,
                history,
                stop: PivotedStop::Completed { log_det: d_n },
                clamped,
            });
        };
        if max_residual <= diag_tol {
            return Ok(PivotedOutcome {
                rank: n,
                perm,
                columns,
                history,
                stop: PivotedStop::DiagonalTolerance,
                clamped,
            });
        }
        if let Some(cfg) = cfg {
            if let StopDecision::Stop { estimate } = decide(lower, upper, cfg.r()) {
                return Ok(PivotedOutcome {
                    rank: n,
                    perm,
                    columns,
                    history,
                    stop: PivotedStop::Bounds { estimate },
                    clamped,
                });
            }
        }
        if !(pivot > threshold) {
            return Err(Error::Numerical(format!(
                "pivoted Cholesky: selected residual {pivot:e} at index {p} is not positive"
            )));
        }

        // New column: (A[:, p] - sum_k L[:, k] L[p, k]) / sqrt(d_p)
        let mut col: Vec<f64> = (0..dim)
            .map(|i| if active[i] { a.sym(i, p) } else { 0.0 })
            .collect();
        for prev in &columns {
            let w = prev[p];
            if w != 0.0 {
                for (c, l) in col.iter_mut().zip(prev) {
                    *c -= w * l;
                }
            }
        }
        let scale = pivot.sqrt();
        active[p] = false;
        for i in 0..dim {
            if active[i] {
                col[i] /= scale;
                residual[i] -= col[i] * col[i];
            } else {
                col[i] = 0.0;
            }
        }
        col[p] = scale;
        residual[p] = 0.0;
        d_n += pivot.ln();
        perm.push(p);
        columns.push(col);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{assemble_matrix, KernelSpec};
    use approx::assert_relative_eq;

    fn diag3() -> SymMatrix {
        SymMatrix::from_rows(&[
            vec![2.0, 0.0, 0.0],
            vec![0.0, 3.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ])
        .unwrap()
    }

    #[test]
    fn diagonal_matrix_pivots_by_value() {
        let out = pivoted_cholesky(&diag3(), 0.5, None, None).unwrap();
        assert_eq!(out.perm, vec![1, 0, 2]);
        assert_eq!(out.rank, 3);
        match out.stop {
            PivotedStop::Completed { log_det } => {
                assert_relative_eq!(log_det, 6f64.ln(), max_relative = 1e-15)
            }
            other => panic!("unexpected stop {other:?}"),
        }
        let picked: Vec<f64> = out.history.iter().map(|s| s.max_residual).collect();
        assert_eq!(picked, vec![3.0, 2.0, 1.0, 0.0]);
    }

    #[test]
    fn identity_below_tolerance_needs_no_step() {
        let out = pivoted_cholesky(&SymMatrix::identity(4), 2.0, None, None).unwrap();
        assert_eq!(out.rank, 0);
        assert_eq!(out.stop, PivotedStop::DiagonalTolerance);
        assert_eq!(out.final_step().upper, 0.0);
    }

    #[test]
    fn duplicate_point_twin_residual() {
        let k = KernelSpec::rbf(1.0, 1.0).unwrap();
        let a = assemble_matrix(&[vec![0.0], vec![0.0]], &k, 1e-3).unwrap();
        let out = pivoted_cholesky(&a, 0.01, Some(1e-3), None).unwrap();
        assert_eq!(out.rank, 1);
        let twin = 1.001 - 1.0 / 1.001;
        assert_relative_eq!(out.final_step().max_residual, twin, max_relative = 1e-10);
        assert_relative_eq!(twin, 2e-3, max_relative = 1e-3);
    }

    #[test]
    fn rejects_bad_tolerance() {
        assert!(pivoted_cholesky(&diag3(), 0.0, None, None).is_err());
    }

    #[test]
    fn guaranteed_precision_cases() {
        let out = pivoted_cholesky(&diag3(), 0.5, Some(0.5), None).unwrap();
        assert_eq!(
            guaranteed_precision_at_stop(&out.history),
            GuaranteedPrecision::Defined(0.0)
        );
        let step = |lower, upper| PivotStep {
            n: 1,
            d_n: 0.0,
            lower,
            upper,
            max_residual: 0.0,
        };
        match guaranteed_precision_at_stop(&[step(-44.0, -40.0)]) {
            GuaranteedPrecision::Defined(r) => assert_relative_eq!(r, 0.05, max_relative = 1e-15),
            other => panic!("{other:?}"),
        }
        let undefined = guaranteed_precision_at_stop(&[step(-1.0, 1.0)]);
        assert_eq!(undefined, GuaranteedPrecision::Undefined);
        assert_eq!(undefined.target(), 1.0);
    }
}
