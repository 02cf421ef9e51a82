//! Auction instances: bidder types, tie-breaking order, parameters, and
//! canonical worst-case instances.
//!
//! An [`Instance`] is the full input to one auction run: each bidder has an
//! arrival time, a departure time, and a value, all exact rationals, plus a
//! global tie-breaking permutation used whenever two bidders are otherwise
//! interchangeable. The JSON wire format mirrors the struct fields:
//!
//! ```json
//! {
//!   "bidders": [{"arrival": "0/1", "departure": "10/1", "value": "9/1"}],
//!   "tie_break": [0],
//!   "distinct": false
//! }
//! ```
//!
//! `tie_break` lists zero-based bidder ids from highest to lowest priority.
//! `distinct` asserts that all values are pairwise distinct; builders compute
//! it, the parser rejects a `true` flag that the values contradict, and a
//! missing flag reads as `false` (no assertion).

use crate::rational::{
    is_nonnegative, one, ratio, serde_rational, zero, ParseRationalError, Rational,
};
use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;

/// Zero-based index of a bidder within an instance.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct BidderId(pub usize);

impl fmt::Display for BidderId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One bidder's reported or true type.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BidderType {
    #[serde(with = "serde_rational")]
    pub arrival: Rational,
    #[serde(with = "serde_rational")]
    pub departure: Rational,
    #[serde(with = "serde_rational")]
    pub value: Rational,
}

impl BidderType {
    pub fn new(arrival: Rational, departure: Rational, value: Rational) -> Result<Self, CoreError> {
        let bidder = BidderType {
            arrival,
            departure,
            value,
        };
        bidder.validate(BidderId(0))?;
        Ok(bidder)
    }

    pub(crate) fn validate(&self, id: BidderId) -> Result<(), CoreError> {
        if self.arrival.is_negative() {
            return Err(CoreError::NegativeTime { bidder: id });
        }
        if !is_nonnegative(&self.value) {
            return Err(CoreError::NegativeValue { bidder: id });
        }
        if self.departure < self.arrival {
            return Err(CoreError::DepartureBeforeArrival { bidder: id });
        }
        Ok(())
    }
}

/// Full input to one auction run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    bidders: Vec<BidderType>,
    tie_break: Vec<BidderId>,
    #[serde(default)]
    distinct: bool,
}

impl Instance {
    /// Builds and validates an instance. The `tie_break` permutation lists
    /// bidder ids from highest to lowest priority.
    pub fn new(bidders: Vec<BidderType>, tie_break: Vec<BidderId>) -> Result<Self, CoreError> {
        let distinct = values_distinct(&bidders);
        Self::build(bidders, tie_break, distinct)
    }

    /// As [`Instance::new`] with the identity tie-break (bidder 0 first).
    pub fn with_identity_tie_break(bidders: Vec<BidderType>) -> Result<Self, CoreError> {
        let n = bidders.len();
        Self::new(bidders, (0..n).map(BidderId).collect())
    }

    fn build(
        bidders: Vec<BidderType>,
        tie_break: Vec<BidderId>,
        distinct: bool,
    ) -> Result<Self, CoreError> {
        if bidders.is_empty() {
            return Err(CoreError::EmptyInstance);
        }
        for (i, bidder) in bidders.iter().enumerate() {
            bidder.validate(BidderId(i))?;
        }
        let n = bidders.len();
        if tie_break.len() != n {
            return Err(CoreError::BadTieBreak);
        }
        let mut seen = vec![false; n];
        for id in &tie_break {
            if id.0 >= n || seen[id.0] {
                return Err(CoreError::BadTieBreak);
            }
            seen[id.0] = true;
        }
        if distinct && !values_distinct(&bidders) {
            return Err(CoreError::DistinctFlagContradicted);
        }
        Ok(Instance {
            bidders,
            tie_break,
            distinct,
        })
    }

    pub fn n(&self) -> usize {
        self.bidders.len()
    }

    pub fn bidders(&self) -> &[BidderType] {
        &self.bidders
    }

    pub fn bidder(&self, id: BidderId) -> &BidderType {
        &self.bidders[id.0]
    }

    pub fn tie_break(&self) -> &[BidderId] {
        &self.tie_break
    }

    /// True when all values are pairwise distinct.
    pub fn distinct(&self) -> bool {
        self.distinct
    }

    /// Priority rank per bidder id; rank 0 is the highest priority.
    pub fn priority_rank(&self) -> Vec<usize> {
        let mut rank = vec![0usize; self.n()];
        for (pos, id) in self.tie_break.iter().enumerate() {
            rank[id.0] = pos;
        }
        rank
    }

    /// Replaces the bidder list, keeping tie-break order; used for reported
    /// profiles that share the true instance's priorities.
    pub fn with_bidders(&self, bidders: Vec<BidderType>) -> Result<Self, CoreError> {
        if bidders.len() != self.n() {
            return Err(CoreError::ReportCountMismatch {
                expected: self.n(),
                got: bidders.len(),
            });
        }
        Self::new(bidders, self.tie_break.clone())
    }

    /// Parses the JSON wire format, re-validating all invariants. A
    /// `distinct: true` flag contradicted by the values is rejected.
    pub fn from_json(text: &str) -> Result<Self, CoreError> {
        let raw: Instance =
            serde_json::from_str(text).map_err(|e| CoreError::Json(e.to_string()))?;
        Self::build(raw.bidders, raw.tie_break, raw.distinct)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serialization cannot fail")
    }
}

fn values_distinct(bidders: &[BidderType]) -> bool {
    let mut seen = BTreeSet::new();
    bidders.iter().all(|b| seen.insert(b.value.clone()))
}

/// Assignment of values to arrival slots: slot `s` receives
/// `values[assignment[s]]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Matching {
    pub assignment: Vec<usize>,
}

impl Matching {
    pub fn identity(n: usize) -> Self {
        Matching {
            assignment: (0..n).collect(),
        }
    }

    fn validate(&self, n: usize) -> Result<(), CoreError> {
        if self.assignment.len() != n {
            return Err(CoreError::BadMatching);
        }
        let mut seen = vec![false; n];
        for &v in &self.assignment {
            if v >= n || seen[v] {
                return Err(CoreError::BadMatching);
            }
            seen[v] = true;
        }
        Ok(())
    }
}

/// Builds the instance in which slot `s` has interval `intervals[s]` and
/// value `values[matching.assignment[s]]`, with the identity tie-break.
pub fn instance_from_matching(
    values: &[Rational],
    intervals: &[(Rational, Rational)],
    matching: &Matching,
) -> Result<Instance, CoreError> {
    if values.is_empty() {
        return Err(CoreError::EmptyInstance);
    }
    if values.len() != intervals.len() {
        return Err(CoreError::SizeMismatch {
            values: values.len(),
            intervals: intervals.len(),
        });
    }
    matching.validate(values.len())?;
    let bidders = intervals
        .iter()
        .zip(&matching.assignment)
        .map(|((arrival, departure), &v)| BidderType {
            arrival: arrival.clone(),
            departure: departure.clone(),
            value: values[v].clone(),
        })
        .collect();
    Instance::with_identity_tie_break(bidders)
}

/// Draws a uniformly random matching of values to slots, deterministically
/// from the seed, and builds the corresponding instance.
pub fn random_matching(
    values: &[Rational],
    intervals: &[(Rational, Rational)],
    seed: u64,
) -> Result<(Matching, Instance), CoreError> {
    if values.is_empty() {
        return Err(CoreError::EmptyInstance);
    }
    if values.len() != intervals.len() {
        return Err(CoreError::SizeMismatch {
            values: values.len(),
            intervals: intervals.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment: Vec<usize> = (0..values.len()).collect();
    assignment.shuffle(&mut rng);
    let matching = Matching { assignment };
    let instance = instance_from_matching(values, intervals, &matching)?;
    Ok((matching, instance))
}

/// Disjoint unit-length slots: slot `s` arrives and departs at time `s + 1`.
pub fn sequential_intervals(n: usize) -> Vec<(Rational, Rational)> {
    (0..n)
        .map(|s| {
            let t = Rational::from_integer(BigInt::from(s + 1));
            (t.clone(), t)
        })
        .collect()
}

/// Instance in which bidder `s` arrives and departs at time `s + 1` with
/// value `values[s]`. Bidders never overlap, so every run is a sequence of
/// immediate arrival/departure pairs.
pub fn sequential_instance(values: &[Rational]) -> Result<Instance, CoreError> {
    instance_from_matching(
        values,
        &sequential_intervals(values.len()),
        &Matching::identity(values.len()),
    )
}

/// Canonical consistency witness: one bidder of value 1 among zeros, with
/// the prediction equal to the top value.
pub fn canonical_consistency_instance(n: usize) -> Result<(Vec<Rational>, Prediction), CoreError> {
    if n < 2 {
        return Err(CoreError::NeedTwoBidders { n });
    }
    let mut values = vec![zero(); n];
    values[0] = one();
    Ok((values, Prediction::new(one())?))
}

/// Canonical robustness witness: values (1, eps, 0, ..., 0) with predictions
/// that overshoot, undershoot, and land between the top two values.
pub struct RobustnessWitness {
    pub values: Vec<Rational>,
    pub scenarios: Vec<Prediction>,
}

pub fn canonical_robustness_instance(n: usize, eps: &Rational) -> Result<RobustnessWitness, CoreError> {
    if n < 2 {
        return Err(CoreError::NeedTwoBidders { n });
    }
    if !eps.is_positive() || *eps >= one() {
        return Err(CoreError::BadEpsilon);
    }
    let mut values = vec![zero(); n];
    values[0] = one();
    values[1] = eps.clone();
    let scenarios = vec![
        Prediction::new(one() + one())?,
        Prediction::new(eps / ratio(2, 1))?,
        Prediction::new((one() + eps) / ratio(2, 1))?,
    ];
    Ok(RobustnessWitness { values, scenarios })
}

/// Breaks ties by adding `0, delta, 2*delta, ...` to successive repeats of
/// each duplicated value (in slot order). Fails if the additions could reach
/// the next distinct value above, which would reorder the profile.
pub fn perturb_to_distinct(
    values: &[Rational],
    delta: &Rational,
) -> Result<Vec<Rational>, CoreError> {
    if !delta.is_positive() {
        return Err(CoreError::BadPerturbation);
    }
    let mut sorted: Vec<Rational> = values.to_vec();
    sorted.sort();
    sorted.dedup();
    for pair in sorted.windows(2) {
        let gap = &pair[1] - &pair[0];
        let group = values.iter().filter(|v| **v == pair[0]).count();
        if Rational::from_integer(BigInt::from(group - 1)) * delta >= gap {
            return Err(CoreError::BadPerturbation);
        }
    }
    let mut seen_count: Vec<(Rational, usize)> = Vec::new();
    let mut out = Vec::with_capacity(values.len());
    for v in values {
        let count = match seen_count.iter_mut().find(|(val, _)| val == v) {
            Some((_, c)) => {
                *c += 1;
                *c
            }
            None => {
                seen_count.push((v.clone(), 0));
                0
            }
        };
        out.push(v + Rational::from_integer(BigInt::from(count)) * delta);
    }
    Ok(out)
}

/// Prediction of the highest value; nonnegative.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Prediction(#[serde(with = "serde_rational")] pub Rational);

impl Prediction {
    pub fn new(value: Rational) -> Result<Self, CoreError> {
        if value.is_negative() {
            return Err(CoreError::BadPrediction);
        }
        Ok(Prediction(value))
    }

    pub fn value(&self) -> &Rational {
        &self.0
    }
}

/// Mechanism parameters: phase split `alpha`, prediction discount `gamma`,
/// and the market size `n` the phase milestones are computed from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuctionParams {
    #[serde(with = "serde_rational")]
    alpha: Rational,
    #[serde(with = "serde_rational")]
    gamma: Rational,
    n: usize,
    strict_grid: bool,
}

impl AuctionParams {
    /// `alpha`, `gamma` in [0, 1]; `n >= 1`.
    pub fn new(alpha: Rational, gamma: Rational, n: usize) -> Result<Self, CoreError> {
        if n == 0 {
            return Err(CoreError::BadMarketSize);
        }
        if alpha.is_negative() || alpha > one() {
            return Err(CoreError::BadAlpha);
        }
        if gamma.is_negative() || gamma > one() {
            return Err(CoreError::BadGamma);
        }
        Ok(AuctionParams {
            alpha,
            gamma,
            n,
            strict_grid: false,
        })
    }

    /// Three-phase parameters (no prediction discount).
    pub fn three_phase(alpha: Rational, n: usize) -> Result<Self, CoreError> {
        Self::new(alpha, one(), n)
    }

    /// Additionally requires `alpha` to sit on the exact grid for `n`, where
    /// both phase milestones are integers and the stated guarantees are
    /// exact. Off-grid parameters still run, they just round.
    pub fn require_exact_grid(mut self) -> Result<Self, CoreError> {
        if !alpha_on_exact_grid(&self.alpha, self.n) {
            return Err(CoreError::AlphaOffGrid {
                alpha: self.alpha.clone(),
                n: self.n,
            });
        }
        self.strict_grid = true;
        Ok(self)
    }

    pub fn alpha(&self) -> &Rational {
        &self.alpha
    }

    pub fn gamma(&self) -> &Rational {
        &self.gamma
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Discounted prediction `gamma * prediction`, the phase-two floor.
    pub fn discounted_prediction(&self, prediction: &Prediction) -> Rational {
        &self.gamma * prediction.value()
    }
}

/// True when `alpha * n` and `(1 - alpha) * n / 2` are both integers, so the
/// phase milestones land exactly on bidder counts.
pub fn alpha_on_exact_grid(alpha: &Rational, n: usize) -> bool {
    let n = Rational::from_integer(BigInt::from(n));
    let an = alpha * &n;
    let half_rest = (one() - alpha) * &n / ratio(2, 1);
    an.is_integer() && half_rest.is_integer()
}

/// All grid points of `alpha` for a given `n`, ascending.
pub fn exact_grid(n: usize) -> Vec<Rational> {
    let mut out = Vec::new();
    for k in 0..=n {
        let alpha = Rational::new(BigInt::from(k), BigInt::from(n));
        if alpha_on_exact_grid(&alpha, n) {
            out.push(alpha);
        }
    }
    out
}

pub(crate) fn rational_to_usize(value: &Rational) -> usize {
    debug_assert!(value.is_integer());
    value
        .to_integer()
        .to_usize()
        .expect("milestone count fits in usize")
}

/// Errors from instance and parameter construction.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CoreError {
    #[error("instance has no bidders")]
    EmptyInstance,
    #[error("bidder {bidder} has a negative value")]
    NegativeValue { bidder: BidderId },
    #[error("bidder {bidder} has a negative arrival time")]
    NegativeTime { bidder: BidderId },
    #[error("bidder {bidder} departs before arriving")]
    DepartureBeforeArrival { bidder: BidderId },
    #[error("tie_break is not a permutation of the bidder ids")]
    BadTieBreak,
    #[error("distinct flag is true but values repeat")]
    DistinctFlagContradicted,
    #[error("values and intervals differ in length ({values} vs {intervals})")]
    SizeMismatch { values: usize, intervals: usize },
    #[error("matching is not a permutation of the value indices")]
    BadMatching,
    #[error("alpha must lie in [0, 1]")]
    BadAlpha,
    #[error("gamma must lie in [0, 1]")]
    BadGamma,
    #[error("market size n must be at least 1")]
    BadMarketSize,
    #[error("alpha {alpha} is off the exact milestone grid for n = {n}")]
    AlphaOffGrid { alpha: Rational, n: usize },
    #[error("prediction must be nonnegative")]
    BadPrediction,
    #[error("epsilon must lie strictly between 0 and 1")]
    BadEpsilon,
    #[error("perturbation delta does not fit below the next distinct value")]
    BadPerturbation,
    #[error("need at least two bidders, got {n}")]
    NeedTwoBidders { n: usize },
    #[error("expected {expected} bidder reports, got {got}")]
    ReportCountMismatch { expected: usize, got: usize },
    #[error("invalid instance JSON: {0}")]
    Json(String),
    #[error(transparent)]
    Parse(#[from] ParseRationalError),
}
