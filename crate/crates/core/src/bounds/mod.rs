//! Closed-form heat kernel bounds and the constants that feed them.

mod estimates;
mod ledger;
mod legendre;

pub use estimates::{
    davies_long_range_bound, gaussian_upper_bound, valid_time_window, weak_gaussian_bound, BoundValue,
    CertifiedEnvelope, TimeWindow,
};
pub use ledger::{beta_infimum, solve_k_lambda, ConstantsLedger, InvariantCheck, LedgerEntry, DEFAULT_LAMBDA};
pub use legendre::legendre;
