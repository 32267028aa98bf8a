//! Bounds on the final log-determinant after `n` processed diagonal entries,
//! and the stop rule built from them.
//!
//! With `D_n = sum_{j<=n} 2 log C_jj`:
//!
//! * lower bound `L_n = D_n + (N - n) * kappa_minus` (deterministic),
//! * probabilistic upper bound `U'_n = D_n + c + (N - n) * (D_n + c) / n`,
//! * deterministic upper bound `U''_n = D_n + (N - n) * kappa_plus`,
//! * `U_n = min(U'_n, U''_n)`.
//!
//! The slack `c = (kappa_plus - kappa_minus) * H_N^{-1}(delta / 2)` comes from a
//! Hoeffding-type inequality for supermartingales with bounded increments.

use crate::error::{Error, Result};

/// Tail function `H_N(x) = 1{x <= N} sqrt((N/(N+x))^(N+x) (N/(N-x))^(N-x))`,
/// evaluated in log space.
pub fn h_n(x: f64, n_total: usize) -> f64 {
    let n = n_total as f64;
    if x.is_nan() || x < 0.0 {
        return f64::NAN;
    }
    if x > n {
        return 0.0;
    }
    if x == 0.0 {
        return 1.0;
    }
    let u = x / n;
    // (N+x) ln(N/(N+x)) = -(N+x) ln(1+u); the (N-x) term vanishes at x = N.
    let plus = -(n + x) * u.ln_1p();
    let minus = if x < n { -(n - x) * (-u).ln_1p() } else { 0.0 };
    (0.5 * (plus + minus)).exp()
}

const INVERSE_MAX_ITER: usize = 200;

/// The unique `x` in `[0, N]` with `H_N(x) = target`, found by bisection.
///
/// Returns `N` when `target` is below `H_N(N) = 2^{-N}`.
pub fn h_n_inverse(target: f64, n_total: usize) -> Result<f64> {
    if !(target > 0.0 && target <= 1.0) {
        return Err(Error::input(format!(
            "H_N inverse target must lie in (0, 1], got {target}"
        )));
    }
    if n_total == 0 {
        return Err(Error::input("N must be positive"));
    }
    let n = n_total as f64;
    if target == 1.0 {
        return Ok(0.0);
    }
    if target <= h_n(n, n_total) {
        return Ok(n);
    }
    let tol = 1e-12 * n;
    let (mut lo, mut hi) = (0.0_f64, n);
    for _ in 0..INVERSE_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if h_n(mid, n_total) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= tol {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Problem constants for one stopped factorization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoppingConfig {
    n_total: usize,
    sigma2: f64,
    delta: f64,
    r: f64,
    kappa_plus: f64,
    kappa_minus: f64,
    c_delta: f64,
}

impl StoppingConfig {
    /// Validates the constants and derives `c_delta`. `kappa_minus` is `log sigma2`.
    pub fn new(n_total: usize, sigma2: f64, delta: f64, r: f64, kappa_plus: f64) -> Result<Self> {
        if n_total == 0 {
            return Err(Error::input("N must be positive"));
        }
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::input(format!("sigma2 must be positive, got {sigma2}")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::input(format!("delta must lie in (0, 1), got {delta}")));
        }
        if !(r > 0.0) || r.is_nan() {
            return Err(Error::input(format!("r must be positive, got {r}")));
        }
        let kappa_minus = sigma2.ln();
        if !(kappa_plus > kappa_minus) || !kappa_plus.is_finite() {
            return Err(Error::input(format!(
                "kappa_plus ({kappa_plus}) must exceed log(sigma2) ({kappa_minus})"
            )));
        }
        let c_delta = (kappa_plus - kappa_minus) * h_n_inverse(delta / 2.0, n_total)?;
        Ok(StoppingConfig {
            n_total,
            sigma2,
            delta,
            r,
            kappa_plus,
            kappa_minus,
            c_delta,
        })
    }

    /// Same constants with a different precision target.
    pub fn with_r(&self, r: f64) -> Result<Self> {
        Self::new(self.n_total, self.sigma2, self.delta, r, self.kappa_plus)
    }

    pub fn n_total(&self) -> usize {
        self.n_total
    }
    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }
    pub fn delta(&self) -> f64 {
        self.delta
    }
    pub fn r(&self) -> f64 {
        self.r
    }
    pub fn kappa_plus(&self) -> f64 {
        self.kappa_plus
    }
    pub fn kappa_minus(&self) -> f64 {
        self.kappa_minus
    }
    pub fn c_delta(&self) -> f64 {
        self.c_delta
    }

    /// Targets of one or more are accepted but trivially satisfiable by a zero
    /// estimate; callers surface this as a warning.
    pub fn r_at_least_one(&self) -> bool {
        self.r >= 1.0
    }
}

/// Bounds snapshot after `n` processed diagonal entries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundsState {
    pub n: usize,
    pub d_n: f64,
    pub lower: f64,
    pub upper: f64,
    pub upper_prob: f64,
    pub upper_det: f64,
}

impl BoundsState {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopDecision {
    Continue,
    Stop { estimate: f64 },
}

impl StopDecision {
    pub fn is_stop(&self) -> bool {
        matches!(self, StopDecision::Stop { .. })
    }
}

pub fn bounds_at(n: usize, d_n: f64, cfg: &StoppingConfig) -> Result<BoundsState> {
    let total = cfg.n_total;
    if n == 0 || n > total {
        return Err(Error::input(format!("checkpoint {n} outside 1..={total}")));
    }
    let remaining = (total - n) as f64;
    let lower = d_n + remaining * cfg.kappa_minus;
    let upper_prob = d_n + cfg.c_delta + remaining * (d_n + cfg.c_delta) / n as f64;
    let upper_det = d_n + remaining * cfg.kappa_plus;
    Ok(BoundsState {
        n,
        d_n,
        lower,
        upper: upper_prob.min(upper_det),
        upper_prob,
        upper_det,
    })
}

/// `(U - L) / (2 min(|L|, |U|))` when `L` and `U` share a nonzero sign, else `None`.
pub fn relative_error_bound(lower: f64, upper: f64) -> Result<Option<f64>> {
    if lower > upper || lower.is_nan() || upper.is_nan() {
        return Err(Error::input(format!(
            "lower bound {lower} exceeds upper bound {upper}"
        )));
    }
    if !same_nonzero_sign(lower, upper) {
        return Ok(None);
    }
    Ok(Some((upper - lower) / (2.0 * lower.abs().min(upper.abs()))))
}

fn same_nonzero_sign(a: f64, b: f64) -> bool {
    (a > 0.0 && b > 0.0) || (a < 0.0 && b < 0.0)
}

/// Stop rule on an arbitrary bracket `[lower, upper]`: stop with the midpoint
/// when both bounds share a nonzero sign and the relative error bound is at most `r`.
pub fn decide(lower: f64, upper: f64, r: f64) -> StopDecision {
    match relative_error_bound(lower, upper) {
        Ok(Some(bound)) if bound <= r => StopDecision::Stop {
            estimate: 0.5 * (lower + upper),
        },
        _ => StopDecision::Continue,
    }
}

/// Bounds and stop decision at checkpoint `n`. Returns the snapshot alongside
/// the decision so callers can record it.
pub fn evaluate_bounds(n: usize, d_n: f64, cfg: &StoppingConfig) -> Result<(BoundsState, StopDecision)> {
    let state = bounds_at(n, d_n, cfg)?;
    Ok((state, decide(state.lower, state.upper, cfg.r)))
}

pub fn evaluate_stop(n: usize, d_n: f64, cfg: &StoppingConfig) -> Result<StopDecision> {
    evaluate_bounds(n, d_n, cfg).map(|(_, d)| d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn h_n_at_zero_is_one() {
        for n in [1, 7, 1000, 100_000] {
            assert_eq!(h_n(0.0, n), 1.0);
        }
    }

    #[test]
    fn h_n_one_one_is_half() {
        assert_relative_eq!(h_n(1.0, 1), 0.5, max_relative = 1e-15);
    }

    #[test]
    fn h_n_beyond_n_is_zero() {
        assert_eq!(h_n(10.5, 10), 0.0);
    }

    #[test]
    fn h_n_at_n_is_two_to_minus_n() {
        assert_relative_eq!(h_n(10.0, 10), 2f64.powi(-10), max_relative = 1e-13);
    }

    #[test]
    fn h_n_matches_direct_formula_for_small_n() {
        // direct evaluation without log-space tricks
        let n = 12.0f64;
        for x in [0.5, 3.0, 7.25, 11.9] {
            let direct = ((n / (n + x)).powf(n + x) * (n / (n - x)).powf(n - x)).sqrt();
            assert_relative_eq!(h_n(x, 12), direct, max_relative = 1e-12);
        }
    }

    #[test]
    fn inverse_edge_values() {
        assert_eq!(h_n_inverse(1.0, 50).unwrap(), 0.0);
        assert_relative_eq!(h_n_inverse(0.5, 1).unwrap(), 1.0, epsilon = 1e-11);
        assert_eq!(h_n_inverse(1e-30, 10).unwrap(), 10.0);
    }

    #[test]
    fn inverse_round_trip() {
        let x = h_n_inverse(0.05, 1000).unwrap();
        assert!((h_n(x, 1000) - 0.05).abs() <= 1e-9);
    }

    #[test]
    fn inverse_rejects_out_of_range() {
        assert!(h_n_inverse(0.0, 10).is_err());
        assert!(h_n_inverse(1.5, 10).is_err());
        assert!(h_n_inverse(f64::NAN, 10).is_err());
    }

    #[test]
    fn config_c_delta_for_single_row() {
        // delta = 1 is outside the open interval, so exercise the same arithmetic
        // through h_n_inverse directly: 3 * H_1^{-1}(0.5) = 3.
        let c = 3.0 * h_n_inverse(0.5, 1).unwrap();
        assert_relative_eq!(c, 3.0, epsilon = 1e-10);
    }

    #[test]
    fn config_rejects_bad_constants() {
        assert!(StoppingConfig::new(10, 0.001, 2.0, 0.1, 0.0).is_err());
        assert!(StoppingConfig::new(10, 0.001, 0.0, 0.1, 0.0).is_err());
        assert!(StoppingConfig::new(10, 0.0, 0.1, 0.1, 0.0).is_err());
        assert!(StoppingConfig::new(10, 0.001, 0.1, 0.1, (0.001f64).ln()).is_err());
        assert!(StoppingConfig::new(0, 0.001, 0.1, 0.1, 0.0).is_err());
        assert!(StoppingConfig::new(10, 0.001, 0.1, 0.0, 0.0).is_err());
    }

    #[test]
    fn config_for_pumadyn_sized_problem() {
        let cfg = StoppingConfig::new(8192, 0.001, 0.1, 0.1, 1.001f64.ln()).unwrap();
        assert!(cfg.c_delta().is_finite() && cfg.c_delta() > 0.0);
        assert_eq!(cfg.kappa_minus(), 0.001f64.ln());
        assert!(!cfg.r_at_least_one());
        assert!(cfg.with_r(1.5).unwrap().r_at_least_one());
    }

    fn config_with(n_total: usize, c_delta: f64, kappa_plus: f64, sigma2: f64) -> StoppingConfig {
        StoppingConfig {
            n_total,
            sigma2,
            delta: 0.1,
            r: 0.1,
            kappa_plus,
            kappa_minus: sigma2.ln(),
            c_delta,
        }
    }

    #[test]
    fn bounds_at_final_row_collapse() {
        let cfg = config_with(10, 2.0, 0.001, 0.001);
        let s = bounds_at(10, -30.0, &cfg).unwrap();
        assert_eq!(s.lower, -30.0);
        assert_eq!(s.upper_det, -30.0);
        assert_eq!(s.upper, -30.0);
    }

    #[test]
    fn bounds_at_hand_values() {
        let cfg = config_with(10, 2.0, 0.001, 0.001);
        let s = bounds_at(5, -10.0, &cfg).unwrap();
        assert_relative_eq!(s.lower, -44.538_776_394_910_684, max_relative = 1e-12);
        assert_relative_eq!(s.upper_prob, -16.0, max_relative = 1e-15);
        assert_relative_eq!(s.upper_det, -9.995, max_relative = 1e-15);
        assert_eq!(s.upper, -16.0);
    }

    #[test]
    fn bounds_at_rejects_out_of_range() {
        let cfg = config_with(10, 2.0, 0.001, 0.001);
        assert!(bounds_at(0, 0.0, &cfg).is_err());
        assert!(bounds_at(11, 0.0, &cfg).is_err());
    }

    #[test]
    fn relative_error_bound_cases() {
        assert_eq!(relative_error_bound(-42.0, -42.0).unwrap(), Some(0.0));
        assert_relative_eq!(
            relative_error_bound(-44.0, -40.0).unwrap().unwrap(),
            0.05,
            max_relative = 1e-15
        );
        assert_eq!(relative_error_bound(-1.0, 1.0).unwrap(), None);
        assert_eq!(relative_error_bound(0.0, 1.0).unwrap(), None);
        assert!(relative_error_bound(2.0, 1.0).is_err());
    }

    #[test]
    fn decide_cases() {
        assert_eq!(decide(-44.0, -40.0, 0.1), StopDecision::Stop { estimate: -42.0 });
        assert_eq!(decide(-44.0, -40.0, 0.01), StopDecision::Continue);
        assert_eq!(decide(-1.0, 1.0, 1e9), StopDecision::Continue);
        // boundary is inclusive
        assert!(decide(-44.0, -40.0, 0.05).is_stop());
    }
}
