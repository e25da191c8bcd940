//! Quantum birth-and-death chains on truncated Fock space.
//!
//! The crate builds maser-type channels, extracts their transition rates,
//! evaluates existence and non-existence criteria for normal invariant
//! states, constructs and checks Lyapunov and drift certificates, solves for
//! invariant states and averages channels over random interaction times.
//!
//! Everything here is `no_std` with `alloc`; file formats and the command
//! line live in the companion `qbdc` crate.

#![no_std]
// Float math comes from `num_traits::Float` without std; builds that link
// std (tests, feature-unified dev builds) see the inherent methods instead.
#![allow(unused_imports)]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod certificate;
pub mod channel;
pub mod criteria;
pub mod error;
pub mod invariant;
pub mod linalg;
pub mod random_tau;
pub mod toy_observable;

pub use channel::{
    build_maser_channel, closed_form_rates, extract_transition_rates, heisenberg_apply_window, verify_qbdc_structure,
    BoundaryPolicy, Coupling, MaserParams, QbdcStructureReport, TransitionRates, TruncatedChannel,
};
pub use certificate::{
    build_drift_certificate, build_lyapunov_certificate, search_lyapunov_certificate, verify_drift, verify_lyapunov,
    Certificate, CertificateBody,
};
pub use criteria::{
    check_existence, check_nonexistence, classical_profile, classify_maser_point, classify_rates, estimate_kappa,
    tridiagonal_psd_sufficient, ClassicalProfile, Criterion, KappaEstimate, RegionVerdict, TridiagonalTest, Verdict,
};
pub use error::{Error, Result};
pub use invariant::{
    convergence_trace, falloff_bound_check, falloff_fit, solve_invariant_cesaro, solve_invariant_direct,
    truncation_convergence, ConvergenceTrace, DensityMatrix, FalloffFit,
};
pub use random_tau::{averaged_rates, build_averaged_channel, eta_decay_check, QuadratureRule, TauDensity};
pub use toy_observable::{toy_conserved_observable, ToyObservable};
pub use linalg::{CMatrix, C64};
