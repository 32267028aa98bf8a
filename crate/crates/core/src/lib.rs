//! Log-determinants of kernel matrices from a Cholesky decomposition that may
//! stop early.
//!
//! The factorization accumulates `D_n = 2 sum_{j<=n} log C_jj` row by row. At
//! each checkpoint a deterministic lower bound and a high-probability upper
//! bound on the full `log det A` are formed; once both share a sign and are
//! close relative to their magnitude, the midpoint is returned. For i.i.d.
//! inputs the returned value has relative error at most `r` with probability
//! at least `1 - delta`.
//!
//! ```
//! use stopdet_core::{
//!     assemble_matrix, kappa_plus, stopped_cholesky_rowwise, synth_gaussian, KernelSpec,
//!     StoppingConfig,
//! };
//!
//! let data = synth_gaussian(300, 3, 42).unwrap();
//! let kernel = KernelSpec::rbf(1.0, 5.0).unwrap();
//! let mut a = assemble_matrix(&data.rows, &kernel, 1e-3).unwrap();
//! let cfg = StoppingConfig::new(300, 1e-3, 0.1, 0.1, kappa_plus(&kernel, 1e-3)).unwrap();
//! let outcome = stopped_cholesky_rowwise(&mut a, &cfg).unwrap();
//! assert!(outcome.value() < 0.0);
//! ```

pub mod bounds;
pub mod cholesky;
pub mod data;
pub mod error;
pub mod kernels;
pub mod matrix;
pub mod oracle;
pub mod pivoted;

pub use bounds::{
    bounds_at, decide, evaluate_bounds, evaluate_stop, h_n, h_n_inverse, relative_error_bound,
    BoundsState, StopDecision, StoppingConfig,
};
pub use cholesky::{
    cholesky_blocked, cholesky_full, cholesky_unblocked, log_det_from_factor,
    stopped_cholesky_blocked, stopped_cholesky_blocked_observed, stopped_cholesky_rowwise,
    stopped_cholesky_rowwise_observed, BlockPlan, StopOutcome,
};
pub use data::{
    load_csv, one_hot, parse_csv, permute, standardize, synth_gaussian, ColumnKind, CsvOptions,
    Dataset, Schema,
};
pub use error::{Error, Result};
pub use kernels::{assemble_matrix, assemble_matrix_clamped, kappa_plus, KernelFamily, KernelSpec};
pub use matrix::SymMatrix;
pub use pivoted::{
    guaranteed_precision_at_stop, pivoted_cholesky, GuaranteedPrecision, PivotStep,
    PivotedOutcome, PivotedStop,
};
