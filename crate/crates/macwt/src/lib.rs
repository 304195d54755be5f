//! Exact rate regions, key-recycling slot protocols, and leakage audits for
//! two-user multiple-access channels observed by a wiretapper.
//!
//! The crate is organized bottom-up:
//!
//! * [`channel`]: finite transition laws p(y,z|x1,x2) and their exact
//!   mutual-information terms,
//! * [`region`]: secrecy and capacity pentagons, hulls over input grids, and
//!   the ramp schedule that trades key buildup against decoding rate,
//! * [`protocol`]: the slot-by-slot key ledger with FIFO recycling and an
//!   eligibility window,
//! * [`codec`]: random binning codebooks, keyed (one-time-pad) encoding, and
//!   exact leakage audits by dense enumeration,
//! * [`fading`]: the block-fading Gaussian analogue with ergodic targets.
//!
//! All information quantities are in bits (base-2 logs), all enumeration is
//! exact and dense, and anything random takes an explicit seed.

pub mod channel;
pub mod codec;
pub mod dist;
pub mod error;
pub mod fading;
pub mod protocol;
pub mod region;

pub use error::{Error, Result};

// The guide's code blocks compile and run with the test suite, so the book
// cannot drift from the crate. The runner chapter lives with the cli crate.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/channel-model.md")]
    mod channel_model {}
    #[doc = include_str!("../../../book/src/rate-regions.md")]
    mod rate_regions {}
    #[doc = include_str!("../../../book/src/slot-protocol.md")]
    mod slot_protocol {}
    #[doc = include_str!("../../../book/src/binning-and-leakage.md")]
    mod binning_and_leakage {}
    #[doc = include_str!("../../../book/src/fading.md")]
    mod fading {}
}
