//! Exact tooling for a learning-augmented online single-item auction.
//!
//! The auction sells one item to bidders that arrive and depart over time.
//! A prediction of the highest value steers a three-phase threshold policy:
//! observe, then post max(prediction-derived price, best seen so far), then
//! post the best seen so far. Everything here is built for desk-scale
//! verification rather than asymptotics:
//!
//! * [`instance`]: bidder types, tie-breaking, parameters, canonical
//!   worst-case instances, and the JSON wire format.
//! * [`engine`]: the event-driven allocation and payment rules, with full
//!   event traces and deliberately breakable variants for audits.
//! * [`eval`]: exact expected revenue by enumeration over all value-to-slot
//!   matchings, Monte Carlo estimation, and consistency/robustness ratios.
//! * [`audit`]: grid-based deviation search for strategyproofness witnesses.
//! * [`lp`]: the success-probability linear program, its hand-built dual
//!   certificate, and exact checks for rank-based stopping rules.
//! * [`family`]: sequential posted-price auction families, interchange
//!   arguments, and the consistency/robustness trade-off frontier.
//!
//! All auction arithmetic is exact (arbitrary-precision rationals); floating
//! point appears only in Monte Carlo summaries.

pub mod audit;
pub mod engine;
pub mod eval;
pub mod family;
pub mod instance;
pub mod lp;
pub mod rational;

pub use instance::{AuctionParams, BidderId, BidderType, Instance, Prediction};
pub use rational::{Rational, Threshold};
