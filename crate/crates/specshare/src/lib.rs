//! Power-control codebook design for underlay spectrum sharing.
//!
//! A secondary transmitter reuses `M` licensed bands under two long-term
//! constraints: an average transmit-power budget across bands (ATP) and a
//! per-band cap on the average interference delivered to each primary
//! receiver (AIP).  With full channel knowledge the optimal transmit power
//! is a modified water-filling rule driven by two kinds of dual variables
//! (a power price `lambda` and interference prices `mu_i`).  When the
//! transmitter only receives a `B`-bit feedback index per band, the power
//! rule becomes a finite codebook plus a partition of the channel space,
//! designed here with a Lloyd-type alternation and the same dual search.
//!
//! Modules, bottom-up:
//!
//! * [`fading`] — channel-gain models and reproducible training sets.
//! * [`numeric`] — deterministic summation, bisection, adaptive quadrature.
//! * [`full_csi`] — the unquantized benchmark allocator and its dual solve.
//! * [`lloyd`] — codebook/partition alternation at fixed duals, decision
//!   boundaries, and structural property checks.
//! * [`dual`] — outer multiplier searches that make codebooks feasible
//!   (narrowband and multi-band).
//! * [`aqpa`] — a training-free approximate codebook built by quadrature.
//! * [`feedback`] — feedback-error-aware design over a binary symmetric
//!   index channel.
//! * [`eval`] — capacity and constraint estimators shared by everything.
//!
//! The [`guide`] module mirrors the rendered handbook in `book/` so its
//! examples compile and run with the test suite.

pub mod aqpa;
pub mod dual;
pub mod error;
pub mod eval;
pub mod fading;
pub mod feedback;
pub mod full_csi;
pub mod guide;
pub mod lloyd;
pub mod numeric;

pub use error::{Error, Result};

/// Convert a decibel quantity to linear scale: `10^(db/10)`.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Convert a linear quantity to decibels: `10 log10(x)`.
pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn db_round_trip() {
        assert!((db_to_linear(10.0) - 10.0).abs() < 1e-12);
        assert!((db_to_linear(-5.0) - 0.31622776601683794).abs() < 1e-15);
        assert!((linear_to_db(db_to_linear(7.3)) - 7.3).abs() < 1e-12);
    }
}
