//! Consensus with rational agents on a synchronous unidirectional ring.
//!
//! The crate runs the parity-leader protocol node by node ([`protocol`]) on a
//! lockstep ring ([`ring`]), drives coalitions of cheaters through it
//! ([`adversary`]), and computes exact outcome distributions and equilibrium
//! verdicts by exhaustive enumeration ([`analysis`]). [`impossibility`] checks the
//! declared-input model: which consensus functions survive an `n − 1` coalition of
//! input cheaters.
//!
//! ```
//! use rrl_core::analysis::{check_fairness, Limits};
//!
//! let report = check_fairness(4, &Limits::default()).unwrap();
//! assert!(report.passed());
//! assert_eq!(report.p_one, rrl_core::Prob::new(1, 2));
//! ```

pub mod adversary;
pub mod analysis;
pub mod bit;
pub mod error;
pub mod impossibility;
pub mod protocol;
pub mod ring;

pub use bit::Bit;
pub use error::{Error, Result};

/// Exact probability.
pub type Prob = num_rational::Ratio<u64>;

// The guide's code blocks run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/protocol.md")]
    mod protocol {}
    #[doc = include_str!("../../../book/src/ring.md")]
    mod ring {}
    #[doc = include_str!("../../../book/src/adversary.md")]
    mod adversary {}
    #[doc = include_str!("../../../book/src/analysis.md")]
    mod analysis {}
    #[doc = include_str!("../../../book/src/impossibility.md")]
    mod impossibility {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
