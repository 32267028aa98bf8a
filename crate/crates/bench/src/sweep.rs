//! Parameter sweeps over lengthscales, tolerances and permutations.
//!
//! Every permutation of every lengthscale times one full factorization; the
//! mean of those times is the denominator of the metric `m` for all records
//! of that lengthscale. When the pivoted baseline is selected, the precision
//! it can certify at its stopping point becomes the target `r` of the stopped
//! runs paired with it.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use stopdet_core::cholesky::{self, BlockPlan, StopOutcome};
use stopdet_core::pivoted::{self, GuaranteedPrecision, PivotedOutcome};
use stopdet_core::{data, kappa_plus, kernels, KernelSpec, StoppingConfig, SymMatrix};

use crate::config::{Algorithm, RunConfig};
use crate::error::Result;

pub const WARN_R_AT_LEAST_ONE: &str = "r>=1";
pub const WARN_PRECISION_UNDEFINED: &str = "precision-undefined";
pub const WARN_EXACT_TARGET: &str = "exact-target";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub dataset: String,
    pub kernel: String,
    pub theta: f64,
    pub lengthscale: f64,
    pub sigma2: f64,
    pub delta: f64,
    pub algorithm: String,
    pub permutation: usize,
    pub permutation_seed: u64,
    pub block_size: Option<usize>,
    pub target_r: Option<f64>,
    pub diag_tol: Option<f64>,
    pub wall_time_s: f64,
    pub cpu_time_s: Option<f64>,
    pub stopped: bool,
    pub stop_index: usize,
    pub estimate: f64,
    pub reference_logdet: Option<f64>,
    pub relative_error: Option<f64>,
    pub m: f64,
    pub warnings: String,
}

impl RunRecord {
    pub fn warning_list(&self) -> Vec<&str> {
        self.warnings.split(';').filter(|w| !w.is_empty()).collect()
    }
}

/// Seed of permutation `index` under the sweep's root seed.
pub fn permutation_seed(root: u64, index: usize) -> u64 {
    root ^ index as u64
}

fn process_cpu_time() -> Option<f64> {
    #[cfg(unix)]
    {
        let mut ts = libc::timespec {
            tv_sec: 0,
            tv_nsec: 0,
        };
        // SAFETY: `ts` is a valid, writable timespec.
        let rc = unsafe { libc::clock_gettime(libc::CLOCK_PROCESS_CPUTIME_ID, &mut ts) };
        (rc == 0).then_some(ts.tv_sec as f64 + ts.tv_nsec as f64 * 1e-9)
    }
    #[cfg(not(unix))]
    {
        None
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Timing {
    pub wall_s: f64,
    pub cpu_s: Option<f64>,
}

/// Times `f` with the monotonic clock and, where available, process CPU time.
pub fn timed<T>(f: impl FnOnce() -> T) -> (T, Timing) {
    let cpu0 = process_cpu_time();
    let start = Instant::now();
    let out = f();
    let wall_s = start.elapsed().as_secs_f64();
    let cpu_s = match (cpu0, process_cpu_time()) {
        (Some(a), Some(b)) => Some(b - a),
        _ => None,
    };
    (out, Timing { wall_s, cpu_s })
}

/// Times the default full factorization of a copy of `a`; returns the exact
/// log-determinant.
pub fn time_full(a: &SymMatrix, plan: BlockPlan) -> Result<(f64, Timing)> {
    let mut work = a.clone();
    let (res, t) = timed(|| cholesky::cholesky_blocked(&mut work, plan));
    res?;
    Ok((cholesky::log_det_from_factor(&work)?, t))
}

pub fn time_stopped(
    a: &SymMatrix,
    algo: Algorithm,
    plan: BlockPlan,
    cfg: &StoppingConfig,
) -> Result<(StopOutcome, Timing)> {
    let mut work = a.clone();
    let (res, t) = timed(|| match algo {
        Algorithm::Rowwise => cholesky::stopped_cholesky_rowwise(&mut work, cfg),
        _ => cholesky::stopped_cholesky_blocked(&mut work, plan, cfg),
    });
    Ok((res?, t))
}

pub fn time_pivoted(a: &SymMatrix, d: f64, sigma2: f64) -> Result<(PivotedOutcome, Timing)> {
    let (res, t) = timed(|| pivoted::pivoted_cholesky(a, d, Some(sigma2), None));
    Ok((res?, t))
}

struct Context<'a> {
    cfg: &'a RunConfig,
    dataset: String,
    lengthscale: f64,
    permutation: usize,
    permutation_seed: u64,
    reference: f64,
}

impl Context<'_> {
    fn record(&self, algo: Algorithm, timing: Timing, stopped: bool, stop_index: usize, estimate: f64) -> RunRecord {
        let relative_error = (self.reference != 0.0)
            .then(|| (self.reference - estimate).abs() / self.reference.abs());
        RunRecord {
            dataset: self.dataset.clone(),
            kernel: self.cfg.kernel.to_string(),
            theta: self.cfg.theta,
            lengthscale: self.lengthscale,
            sigma2: self.cfg.sigma2,
            delta: self.cfg.delta,
            algorithm: algo.to_string(),
            permutation: self.permutation,
            permutation_seed: self.permutation_seed,
            block_size: matches!(algo, Algorithm::Full | Algorithm::Blocked).then_some(self.cfg.block_size),
            target_r: None,
            diag_tol: None,
            wall_time_s: timing.wall_s,
            cpu_time_s: timing.cpu_s,
            stopped,
            stop_index,
            estimate,
            reference_logdet: Some(self.reference),
            relative_error,
            m: f64::NAN,
            warnings: String::new(),
        }
    }
}

fn push_warning(rec: &mut RunRecord, w: &str) {
    if !rec.warnings.is_empty() {
        rec.warnings.push(';');
    }
    rec.warnings.push_str(w);
}

/// Runs the configured sweep and returns one record per timed run, in a
/// deterministic order (lengthscale, permutation, algorithm, tolerance).
pub fn run_sweep(cfg: &RunConfig) -> Result<Vec<RunRecord>> {
    cfg.validate()?;
    let base = cfg.source.load()?;
    let plan = BlockPlan::new(cfg.block_size)?;
    let dataset = cfg.source.label();
    let stopped_algos: Vec<Algorithm> = cfg
        .algorithms
        .iter()
        .copied()
        .filter(|a| matches!(a, Algorithm::Rowwise | Algorithm::Blocked))
        .collect();
    let want_full = cfg.algorithms.contains(&Algorithm::Full);
    let want_pivoted = cfg.algorithms.contains(&Algorithm::Pivoted);

    let mut all = Vec::new();
    for &lengthscale in &cfg.lengthscales {
        let spec = KernelSpec::new(cfg.kernel, cfg.theta, lengthscale)?;
        let kplus = kappa_plus(&spec, cfg.sigma2);
        let mut group: Vec<RunRecord> = Vec::new();
        let mut full_times = Vec::with_capacity(cfg.permutations);

        for p in 0..cfg.permutations {
            let seed = permutation_seed(cfg.seed, p);
            let ds = data::permute(base.clone(), seed);
            let a = kernels::assemble_matrix(&ds.rows, &spec, cfg.sigma2)?;
            let n = a.dim();
            if p == 0 && cfg.warmup {
                time_full(&a, plan)?;
            }
            let (reference, t_full) = time_full(&a, plan)?;
            full_times.push(t_full.wall_s);
            let ctx = Context {
                cfg,
                dataset: dataset.clone(),
                lengthscale,
                permutation: p,
                permutation_seed: seed,
                reference,
            };
            if want_full {
                group.push(ctx.record(Algorithm::Full, t_full, false, n, reference));
            }

            // (target r, paired diagonal tolerance) for the stopped runs
            let mut targets: Vec<(f64, Option<f64>, Option<&str>)> = Vec::new();
            if want_pivoted {
                for &d in &cfg.d_grid {
                    let (out, t) = time_pivoted(&a, d, cfg.sigma2)?;
                    let precision = pivoted::guaranteed_precision_at_stop(&out.history);
                    let completed = matches!(out.stop, pivoted::PivotedStop::Completed { .. });
                    let mut rec = ctx.record(Algorithm::Pivoted, t, !completed, out.rank, out.estimate());
                    rec.target_r = Some(precision.target());
                    rec.diag_tol = Some(d);
                    let undefined = match precision {
                        GuaranteedPrecision::Undefined => {
                            push_warning(&mut rec, WARN_PRECISION_UNDEFINED);
                            Some(WARN_PRECISION_UNDEFINED)
                        }
                        GuaranteedPrecision::Defined(_) => None,
                    };
                    if precision.target() >= 1.0 {
                        push_warning(&mut rec, WARN_R_AT_LEAST_ONE);
                    }
                    if out.clamped > 0 {
                        push_warning(&mut rec, &format!("clamped-residuals={}", out.clamped));
                    }
                    group.push(rec);
                    targets.push((precision.target(), Some(d), undefined));
                }
            }
            if !stopped_algos.is_empty() {
                targets.extend(cfg.r_grid.iter().map(|&r| (r, None, None)));
            }

            for &algo in &stopped_algos {
                for &(r, d, inherited) in &targets {
                    // a zero target can only be met by the full sum
                    let effective = if r > 0.0 { r } else { f64::MIN_POSITIVE };
                    let stop_cfg = StoppingConfig::new(n, cfg.sigma2, cfg.delta, effective, kplus)?;
                    let (out, t) = time_stopped(&a, algo, plan, &stop_cfg)?;
                    let mut rec = ctx.record(algo, t, out.is_stopped(), out.rows_processed(), out.value());
                    rec.target_r = Some(r);
                    rec.diag_tol = d;
                    if r <= 0.0 {
                        push_warning(&mut rec, WARN_EXACT_TARGET);
                    }
                    if let Some(w) = inherited {
                        push_warning(&mut rec, w);
                    }
                    if stop_cfg.r_at_least_one() {
                        push_warning(&mut rec, WARN_R_AT_LEAST_ONE);
                    }
                    group.push(rec);
                }
            }
        }

        let mean_full = full_times.iter().sum::<f64>() / full_times.len() as f64;
        for rec in &mut group {
            rec.m = rec.wall_time_s / mean_full;
        }
        all.extend(group);
    }
    Ok(all)
}
