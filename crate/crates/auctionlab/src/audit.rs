//! Deviation search certifying truthfulness on concrete instances.
//!
//! For each bidder the audit replays the auction under every misreport on a
//! finite grid and compares the resulting utility with the truthful one.
//! The grid is built so that between any two of its neighbouring points no
//! auction decision can change: candidate values straddle every value the
//! thresholds can take, candidate times straddle every arrival and
//! departure in the profile. Half the smallest positive gap separates a
//! straddling point from the critical point it brackets, so each strict
//! ordering regime of the reals contains a grid point.
//!
//! Misreports are constrained to the model: a bidder cannot claim an
//! arrival before her true arrival, and her reported departure cannot
//! precede her reported arrival. Values and times never go negative.
//!
//! The audit reports the lexicographically first best response in (value,
//! arrival, departure) order, making reruns reproducible. The truthful
//! report is always on the grid, so every gain is nonnegative; a positive
//! gain is a strategyproofness counterexample for the configured payment
//! rule, and the report carries the witness misreport for replay.

use crate::engine::{run_with_reports, EngineError, EngineOptions};
use crate::instance::{AuctionParams, BidderId, BidderType, CoreError, Instance, Prediction};
use crate::rational::{ratio, zero, Rational};
use num_traits::Signed;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Largest instance audited exhaustively; the grid has O(n) values and
/// O(n^2) time pairs per bidder, so runs grow like n^4.
pub const AUDIT_EXHAUSTIVE_CEILING: usize = 6;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AuditError {
    #[error(
        "exhaustive audit over {n} bidders exceeds the cap of {cap}; \
         sample the deviation grid instead"
    )]
    TooManyBidders { n: usize, cap: usize },
    #[error("sample size must be positive")]
    EmptySample,
    #[error("bidder {bidder} is not part of the instance")]
    UnknownBidder { bidder: BidderId },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Core(#[from] CoreError),
}

/// Candidate misreport coordinates shared by all bidders of an instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviationGrid {
    /// Candidate reported values, ascending; bidder-specific truthful
    /// values are merged in during the search.
    #[serde(with = "crate::rational::serde_rational_seq")]
    pub values: Vec<Rational>,
    /// Candidate reported times, ascending.
    #[serde(with = "crate::rational::serde_rational_seq")]
    pub times: Vec<Rational>,
    /// Half the smallest positive gap between critical points.
    #[serde(with = "crate::rational::serde_rational")]
    pub delta: Rational,
}

fn min_positive_gap(sorted: &[Rational]) -> Option<Rational> {
    sorted
        .windows(2)
        .map(|w| &w[1] - &w[0])
        .filter(|g| g.is_positive())
        .min()
}

/// Builds the misreport grid: values bracket the instance's values, zero,
/// and the raw and discounted predictions; times bracket every arrival and
/// departure.
pub fn deviation_grid(
    instance: &Instance,
    params: &AuctionParams,
    prediction: &Prediction,
) -> DeviationGrid {
    let mut critical_values: Vec<Rational> = instance
        .bidders()
        .iter()
        .map(|b| b.value.clone())
        .collect();
    critical_values.push(zero());
    critical_values.push(prediction.value().clone());
    critical_values.push(params.discounted_prediction(prediction));
    critical_values.sort();
    critical_values.dedup();

    let mut critical_times: Vec<Rational> = Vec::with_capacity(2 * instance.n());
    for b in instance.bidders() {
        critical_times.push(b.arrival.clone());
        critical_times.push(b.departure.clone());
    }
    critical_times.sort();
    critical_times.dedup();

    let gap = match (
        min_positive_gap(&critical_values),
        min_positive_gap(&critical_times),
    ) {
        (Some(a), Some(b)) => a.min(b),
        (Some(a), None) => a,
        (None, Some(b)) => b,
        (None, None) => ratio(1, 1),
    };
    let delta = gap / ratio(2, 1);

    let mut values = vec![zero()];
    for w in &critical_values {
        let below = w - &delta;
        if !below.is_negative() {
            values.push(below);
        }
        values.push(w + &delta);
    }
    values.sort();
    values.dedup();

    let mut times = Vec::with_capacity(3 * critical_times.len());
    for t in &critical_times {
        let below = t - &delta;
        if !below.is_negative() {
            times.push(below);
        }
        times.push(t.clone());
        times.push(t + &delta);
    }
    times.sort();
    times.dedup();

    DeviationGrid {
        values,
        times,
        delta,
    }
}

/// Optional random restriction of the per-bidder candidate list, for
/// instances too large to sweep exhaustively.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditSample {
    pub seed: u64,
    pub size: usize,
}

#[derive(Debug, Clone, Default)]
pub struct AuditOptions {
    pub engine: EngineOptions,
    pub sample: Option<AuditSample>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BidderAudit {
    pub bidder: BidderId,
    #[serde(with = "crate::rational::serde_rational")]
    pub truthful_utility: Rational,
    #[serde(with = "crate::rational::serde_rational")]
    pub best_utility: Rational,
    /// `best - truthful`; zero certifies the bidder on this grid.
    #[serde(with = "crate::rational::serde_rational")]
    pub gain: Rational,
    /// Lexicographically first report attaining `best_utility`.
    pub best_report: BidderType,
    pub candidates_tried: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviationWitness {
    pub bidder: BidderId,
    pub report: BidderType,
    #[serde(with = "crate::rational::serde_rational")]
    pub truthful_utility: Rational,
    #[serde(with = "crate::rational::serde_rational")]
    pub deviating_utility: Rational,
    #[serde(with = "crate::rational::serde_rational")]
    pub gain: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReport {
    pub n: usize,
    pub audits: Vec<BidderAudit>,
    #[serde(with = "crate::rational::serde_rational")]
    pub max_gain: Rational,
    /// True when no bidder on the grid can improve on truth-telling.
    pub truthful_dominates: bool,
    /// The largest-gain misreport when one exists.
    pub witness: Option<DeviationWitness>,
}

fn truthful_utility(
    instance: &Instance,
    params: &AuctionParams,
    prediction: &Prediction,
    options: &EngineOptions,
    bidder: BidderId,
) -> Result<Rational, EngineError> {
    let reports: Vec<BidderType> = instance.bidders().to_vec();
    let run = run_with_reports(instance, &reports, params, prediction, options)?;
    Ok(run.utilities[bidder.0].clone())
}

/// Sweeps the grid for one bidder, holding everyone else truthful.
pub fn audit_bidder(
    instance: &Instance,
    params: &AuctionParams,
    prediction: &Prediction,
    options: &AuditOptions,
    bidder: BidderId,
) -> Result<BidderAudit, AuditError> {
    if bidder.0 >= instance.n() {
        return Err(AuditError::UnknownBidder { bidder });
    }
    if options.sample.is_none() && instance.n() > AUDIT_EXHAUSTIVE_CEILING {
        return Err(AuditError::TooManyBidders {
            n: instance.n(),
            cap: AUDIT_EXHAUSTIVE_CEILING,
        });
    }
    let grid = deviation_grid(instance, params, prediction);
    let truth = instance.bidder(bidder).clone();

    let mut values = grid.values.clone();
    values.push(truth.value.clone());
    values.sort();
    values.dedup();

    let mut candidates: Vec<(Rational, Rational, Rational)> = Vec::new();
    for value in &values {
        for arrival in grid.times.iter().filter(|t| **t >= truth.arrival) {
            for departure in grid.times.iter().filter(|t| *t >= arrival) {
                candidates.push((value.clone(), arrival.clone(), departure.clone()));
            }
        }
    }
    if let Some(sample) = options.sample {
        if sample.size == 0 {
            return Err(AuditError::EmptySample);
        }
        if sample.size < candidates.len() {
            let mut rng = ChaCha8Rng::seed_from_u64(sample.seed ^ bidder.0 as u64);
            candidates.shuffle(&mut rng);
            candidates.truncate(sample.size);
            // Restore the lexicographic visit order after subsampling.
            candidates.sort();
        }
    }

    let base = truthful_utility(instance, params, prediction, &options.engine, bidder)?;
    let mut best_utility = base.clone();
    let mut best_report = truth.clone();
    let mut reports: Vec<BidderType> = instance.bidders().to_vec();
    let mut tried = 0u64;
    for (value, arrival, departure) in candidates {
        let report = BidderType::new(arrival, departure, value)?;
        reports[bidder.0] = report.clone();
        let run = run_with_reports(instance, &reports, params, prediction, &options.engine)?;
        tried += 1;
        let utility = run.utilities[bidder.0].clone();
        if utility > best_utility {
            best_utility = utility;
            best_report = report;
        }
    }
    let gain = &best_utility - &base;
    Ok(BidderAudit {
        bidder,
        truthful_utility: base,
        best_utility,
        gain,
        best_report,
        candidates_tried: tried,
    })
}

/// Audits every bidder of the instance.
pub fn audit_instance(
    instance: &Instance,
    params: &AuctionParams,
    prediction: &Prediction,
    options: &AuditOptions,
) -> Result<AuditReport, AuditError> {
    let mut audits = Vec::with_capacity(instance.n());
    for idx in 0..instance.n() {
        audits.push(audit_bidder(
            instance,
            params,
            prediction,
            options,
            BidderId(idx),
        )?);
    }
    let max_gain = audits
        .iter()
        .map(|a| a.gain.clone())
        .max()
        .unwrap_or_else(zero);
    let witness = audits
        .iter()
        .filter(|a| a.gain.is_positive())
        .max_by(|a, b| a.gain.cmp(&b.gain))
        .map(|a| DeviationWitness {
            bidder: a.bidder,
            report: a.best_report.clone(),
            truthful_utility: a.truthful_utility.clone(),
            deviating_utility: a.best_utility.clone(),
            gain: a.gain.clone(),
        });
    Ok(AuditReport {
        n: instance.n(),
        truthful_dominates: !max_gain.is_positive(),
        max_gain,
        audits,
        witness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::PaymentRule;

    /// Four overlapping bidders where the winner's payment depends on the
    /// rerun reduction: the long-lived high bidder clinches at the
    /// prediction-backed price 8 but a rerun without her stalls at 5.
    fn overlap_instance() -> (Instance, AuctionParams, Prediction) {
        let bidders = vec![
            BidderType::new(ratio(0, 1), ratio(10, 1), ratio(9, 1)).unwrap(),
            BidderType::new(ratio(1, 1), ratio(2, 1), ratio(3, 1)).unwrap(),
            BidderType::new(ratio(3, 1), ratio(4, 1), ratio(5, 1)).unwrap(),
            BidderType::new(ratio(5, 1), ratio(6, 1), ratio(2, 1)).unwrap(),
        ];
        let instance = Instance::with_identity_tie_break(bidders).unwrap();
        let params = AuctionParams::three_phase(ratio(1, 2), 4).unwrap();
        let prediction = Prediction::new(ratio(8, 1)).unwrap();
        (instance, params, prediction)
    }

    #[test]
    fn reduced_payments_leave_no_profitable_misreport() {
        let (instance, params, prediction) = overlap_instance();
        let report =
            audit_instance(&instance, &params, &prediction, &AuditOptions::default()).unwrap();
        assert!(report.truthful_dominates, "witness: {:?}", report.witness);
        assert_eq!(report.max_gain, zero());
        assert!(report.witness.is_none());
        // The high bidder keeps her reduced-payment utility of 4.
        assert_eq!(report.audits[0].truthful_utility, ratio(4, 1));
        assert!(report.audits.iter().all(|a| a.candidates_tried > 0));
    }

    #[test]
    fn disabling_the_rerun_makes_underbidding_profitable() {
        let (instance, params, prediction) = overlap_instance();
        let options = AuditOptions {
            engine: EngineOptions {
                payment_rule: PaymentRule::RerunDisabled,
                ..EngineOptions::default()
            },
            ..AuditOptions::default()
        };
        let report = audit_instance(&instance, &params, &prediction, &options).unwrap();
        assert!(!report.truthful_dominates);
        assert_eq!(report.max_gain, ratio(3, 1));
        let witness = report.witness.expect("a misreport witness");
        assert_eq!(witness.bidder, BidderId(0));
        // Truthfully she pays the prediction-backed 8; underbidding into
        // the final phase clinches at the market price 5.
        assert_eq!(witness.truthful_utility, ratio(1, 1));
        assert_eq!(witness.deviating_utility, ratio(4, 1));
        assert!(witness.report.value < ratio(8, 1));
        assert!(witness.report.value >= ratio(5, 1));
    }

    #[test]
    fn disabling_the_tie_break_reduction_is_also_exploitable() {
        // Six bidders; the rerun's winner is outranked by the true winner,
        // so the standard rule reduces the payment to 5. Dropping that
        // clause leaves the payment at 8 and underbidding gains 3.
        let bidders = vec![
            BidderType::new(ratio(0, 1), ratio(10, 1), ratio(9, 1)).unwrap(),
            BidderType::new(ratio(1, 1), ratio(2, 1), ratio(3, 1)).unwrap(),
            BidderType::new(ratio(3, 1), ratio(4, 1), ratio(5, 1)).unwrap(),
            BidderType::new(ratio(5, 1), ratio(6, 1), ratio(2, 1)).unwrap(),
            BidderType::new(ratio(7, 1), ratio(8, 1), ratio(1, 1)).unwrap(),
            BidderType::new(ratio(0, 1), ratio(29, 1), ratio(6, 1)).unwrap(),
        ];
        let instance = Instance::with_identity_tie_break(bidders).unwrap();
        let params = AuctionParams::three_phase(ratio(1, 3), 6).unwrap();
        let prediction = Prediction::new(ratio(8, 1)).unwrap();

        let standard =
            audit_instance(&instance, &params, &prediction, &AuditOptions::default()).unwrap();
        assert!(standard.truthful_dominates);

        let options = AuditOptions {
            engine: EngineOptions {
                payment_rule: PaymentRule::TieBreakReductionDisabled,
                ..EngineOptions::default()
            },
            ..AuditOptions::default()
        };
        let report = audit_instance(&instance, &params, &prediction, &options).unwrap();
        assert!(!report.truthful_dominates);
        let witness = report.witness.expect("a misreport witness");
        assert_eq!(witness.bidder, BidderId(0));
        assert_eq!(witness.gain, ratio(3, 1));
    }

    #[test]
    fn sampling_still_visits_the_truthful_baseline() {
        let (instance, params, prediction) = overlap_instance();
        let options = AuditOptions {
            engine: EngineOptions::default(),
            sample: Some(AuditSample { seed: 7, size: 40 }),
        };
        let report = audit_instance(&instance, &params, &prediction, &options).unwrap();
        // The baseline is computed outside the sampled sweep, so gains
        // remain nonnegative and the sweep size is bounded.
        for audit in &report.audits {
            assert!(!audit.gain.is_negative());
            assert!(audit.candidates_tried <= 40);
        }
        let rerun = audit_instance(&instance, &params, &prediction, &options).unwrap();
        assert_eq!(report, rerun);
    }

    #[test]
    fn oversized_instances_require_sampling() {
        let values: Vec<Rational> = (1..=7).map(|k| ratio(k, 1)).collect();
        let instance = crate::instance::sequential_instance(&values).unwrap();
        let params = AuctionParams::three_phase(zero(), 7).unwrap();
        let prediction = Prediction::new(ratio(3, 1)).unwrap();
        let err = audit_instance(&instance, &params, &prediction, &AuditOptions::default())
            .unwrap_err();
        assert!(matches!(
            err,
            AuditError::TooManyBidders { n: 7, cap: 6 }
        ));
        let options = AuditOptions {
            engine: EngineOptions::default(),
            sample: Some(AuditSample { seed: 1, size: 25 }),
        };
        assert!(audit_instance(&instance, &params, &prediction, &options).is_ok());
    }
}
