//! Event-driven allocation and payment for the three-phase online auction.
//!
//! The mechanism watches arrivals and departures and posts a threshold that
//! tightens as the market empties out:
//!
//! * Phase one (fewer than `i1_count` departures): threshold is infinite,
//!   nothing is for sale.
//! * Phase two (at least `i1_count`, fewer than `i2_count`): threshold is
//!   the larger of the best value seen so far and the discounted prediction.
//! * Phase three (at least `i2_count` departures): threshold is the best
//!   value seen so far.
//!
//! A bidder clinches the item the moment her bid meets the current
//! threshold: either on arrival, or right after a departure among the
//! currently active bidders (highest tie-break priority first). The item
//! changes hands at the winner's reported departure, which keeps the rule
//! implementable online.
//!
//! The payment starts at the clinching threshold. When the winner clinched
//! at a price propped up by the prediction (phase two, discounted prediction
//! strictly above the best value seen) and she stays in the market past the
//! `i2_count`-th departure, the mechanism reruns the allocation without her.
//! If that hypothetical market would not have produced an active clincher,
//! or its clincher has lower tie-break priority than the real winner, the
//! payment drops to the rerun's threshold. This reduction is what makes
//! truthful reporting safe for bidders who outlast the prediction window.
//!
//! [`EngineOptions`] exposes two deliberately broken payment variants (rerun
//! disabled, tie-break reduction disabled) so the deviation audit can show
//! the reduction is load-bearing, plus a literal two-step threshold updater
//! that matches the recompute rule whenever the milestones are ordered.

use crate::instance::{
    rational_to_usize, AuctionParams, BidderId, BidderType, CoreError, Instance, Prediction,
};
use crate::rational::{ratio, zero, Extended, Rational, Threshold};
use num_bigint::BigInt;
use num_traits::One;
use serde::{Deserialize, Serialize};

/// Departure counts at which the threshold changes regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseMilestones {
    /// Departures needed before the item goes on sale.
    pub i1_count: usize,
    /// Departures after which the prediction no longer props up the price.
    pub i2_count: usize,
}

/// `i1_count = ceil((1 - alpha) * n / 2)`, `i2_count = floor((1 + alpha) * n / 2)`.
pub fn milestones(n: usize, alpha: &Rational) -> PhaseMilestones {
    let n_rat = Rational::from_integer(BigInt::from(n));
    let half = ratio(1, 2);
    let i1 = ((Rational::one() - alpha) * &n_rat * &half).ceil();
    let i2 = ((Rational::one() + alpha) * &n_rat * &half).floor();
    PhaseMilestones {
        i1_count: rational_to_usize(&i1),
        i2_count: rational_to_usize(&i2),
    }
}

/// How the threshold reacts to departures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum AllocRule {
    /// Recompute the threshold from the departure count after every
    /// departure. Well-defined for any milestone pair.
    #[default]
    Recompute,
    /// Fire exactly two one-shot updates, at the `i1_count`-th and
    /// `i2_count`-th departures; a milestone of zero fires at
    /// initialization. Agrees with `Recompute` whenever
    /// `i1_count < i2_count`; kept for equivalence checks.
    TwoOneShotUpdates,
}

/// How the payment is derived from the allocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PaymentRule {
    #[default]
    Standard,
    /// Never rerun; the winner always pays her clinching threshold. Breaks
    /// strategyproofness for late-departing winners.
    RerunDisabled,
    /// Rerun, but only reduce when the hypothetical market has no active
    /// clincher; ignore tie-break priority. Also breaks strategyproofness.
    TieBreakReductionDisabled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EngineOptions {
    pub alloc_rule: AllocRule,
    pub payment_rule: PaymentRule,
    /// Rerun with milestones recomputed for `n - 1` bidders instead of the
    /// original counts. Off by default; the standard rule keeps the original
    /// counts so the rerun prices the same phase schedule.
    pub rerun_rescale: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Arrival,
    Departure,
    ThresholdUpdate,
    Clinch,
}

/// One row of an auction run transcript.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    #[serde(with = "crate::rational::serde_rational")]
    pub time: Rational,
    pub kind: EventKind,
    pub bidder: BidderId,
    pub tau_before: Threshold,
    pub tau_after: Threshold,
    #[serde(with = "crate::rational::serde_rational")]
    pub v_max: Rational,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventTrace {
    pub events: Vec<TraceEvent>,
}

/// Result of the allocation stage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AllocationResult {
    pub winner: Option<BidderId>,
    /// Threshold at the clinch, or the final threshold if the item never
    /// sold.
    pub threshold: Threshold,
    /// True when the winner clinched from the active set after a departure
    /// rather than on her own arrival.
    pub active_winner: bool,
    /// True when the clinch happened in phase two with the discounted
    /// prediction strictly above the best value seen, so the prediction set
    /// the price.
    pub prediction_priced: bool,
    pub trace: EventTrace,
}

/// Full outcome of a run: allocation plus payment and the derived summary
/// quantities.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outcome {
    pub winner: Option<BidderId>,
    #[serde(with = "crate::rational::serde_rational_opt")]
    pub allocation_time: Option<Rational>,
    #[serde(with = "crate::rational::serde_rational_opt")]
    pub price: Option<Rational>,
    #[serde(with = "crate::rational::serde_rational")]
    pub revenue: Rational,
    #[serde(with = "crate::rational::serde_rational")]
    pub welfare: Rational,
    pub threshold: Threshold,
}

/// Outcome of a run on reported types, with per-bidder utilities measured
/// against the true types.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportedRun {
    pub outcome: Outcome,
    #[serde(with = "crate::rational::serde_rational_seq")]
    pub utilities: Vec<Rational>,
    pub trace: EventTrace,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EngineError {
    #[error("params are for n = {params_n} but the instance has {instance_n} bidders")]
    SizeMismatch { params_n: usize, instance_n: usize },
    #[error("bidder {bidder} reports an arrival earlier than her true arrival")]
    ReportArrivalTooEarly { bidder: BidderId },
    #[error(transparent)]
    Core(#[from] CoreError),
}

// ---------------------------------------------------------------------------
// Event schedule
//
// The schedule is value-independent: it depends only on intervals and the
// tie-break order. The exact evaluator reuses one schedule across all n!
// value matchings.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum SchedKind {
    Arrival,
    Departure,
}

#[derive(Debug, Clone)]
pub(crate) struct SchedEvent {
    pub(crate) time: Rational,
    pub(crate) kind: SchedKind,
    pub(crate) slot: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct Schedule {
    pub(crate) events: Vec<SchedEvent>,
    /// Tie-break rank per slot; rank 0 wins ties.
    pub(crate) priority_rank: Vec<usize>,
    /// Slots sorted by ascending tie-break rank.
    pub(crate) priority_order: Vec<usize>,
    /// One-based position of each slot's departure in departure order.
    pub(crate) departure_index: Vec<usize>,
}

impl Schedule {
    pub(crate) fn from_intervals(
        intervals: &[(Rational, Rational)],
        priority_rank: Vec<usize>,
    ) -> Self {
        let n = intervals.len();
        let mut events = Vec::with_capacity(2 * n);
        for (slot, (arrival, departure)) in intervals.iter().enumerate() {
            events.push(SchedEvent {
                time: arrival.clone(),
                kind: SchedKind::Arrival,
                slot,
            });
            events.push(SchedEvent {
                time: departure.clone(),
                kind: SchedKind::Departure,
                slot,
            });
        }
        // Arrivals precede departures at equal times; equal (time, kind)
        // resolves by tie-break priority.
        events.sort_by(|a, b| {
            a.time
                .cmp(&b.time)
                .then_with(|| kind_order(a.kind).cmp(&kind_order(b.kind)))
                .then_with(|| priority_rank[a.slot].cmp(&priority_rank[b.slot]))
        });
        let mut priority_order: Vec<usize> = (0..n).collect();
        priority_order.sort_by_key(|&s| priority_rank[s]);
        let mut departure_index = vec![0usize; n];
        let mut seen = 0usize;
        for ev in &events {
            if matches!(ev.kind, SchedKind::Departure) {
                seen += 1;
                departure_index[ev.slot] = seen;
            }
        }
        Schedule {
            events,
            priority_rank,
            priority_order,
            departure_index,
        }
    }

    pub(crate) fn from_instance(instance: &Instance) -> Self {
        let intervals: Vec<(Rational, Rational)> = instance
            .bidders()
            .iter()
            .map(|b| (b.arrival.clone(), b.departure.clone()))
            .collect();
        Self::from_intervals(&intervals, instance.priority_rank())
    }
}

fn kind_order(kind: SchedKind) -> u8 {
    match kind {
        SchedKind::Arrival => 0,
        SchedKind::Departure => 1,
    }
}

// ---------------------------------------------------------------------------
// Generic allocation core
//
// The same loop runs on exact rationals (public API, traces) and on small
// integer ordinals (the exact evaluator's fast path). Only comparisons and
// max operations touch the values, so any totally ordered value type gives
// the identical decision sequence.

pub(crate) trait TraceSink<V> {
    fn arrival(&mut self, _event: usize, _tau: &Extended<V>, _v_max: &V) {}
    fn departure(&mut self, _event: usize, _before: &Extended<V>, _after: &Extended<V>, _v_max: &V) {
    }
    fn clinch(&mut self, _event: usize, _slot: usize, _tau: &Extended<V>, _v_max: &V) {}
}

pub(crate) struct NoTrace;

impl<V> TraceSink<V> for NoTrace {}

/// Builds the public trace rows from core callbacks; rational path only.
struct RecordingSink<'a> {
    schedule: &'a Schedule,
    events: Vec<TraceEvent>,
}

impl<'a> RecordingSink<'a> {
    fn new(schedule: &'a Schedule) -> Self {
        RecordingSink {
            schedule,
            events: Vec::with_capacity(schedule.events.len() + 4),
        }
    }

    fn push(
        &mut self,
        event: usize,
        kind: EventKind,
        bidder: usize,
        before: &Extended<Rational>,
        after: &Extended<Rational>,
        v_max: &Rational,
    ) {
        self.events.push(TraceEvent {
            time: self.schedule.events[event].time.clone(),
            kind,
            bidder: BidderId(bidder),
            tau_before: before.clone(),
            tau_after: after.clone(),
            v_max: v_max.clone(),
        });
    }
}

impl<'a> TraceSink<Rational> for RecordingSink<'a> {
    fn arrival(&mut self, event: usize, tau: &Threshold, v_max: &Rational) {
        let slot = self.schedule.events[event].slot;
        self.push(event, EventKind::Arrival, slot, tau, tau, v_max);
    }

    fn departure(&mut self, event: usize, before: &Threshold, after: &Threshold, v_max: &Rational) {
        let slot = self.schedule.events[event].slot;
        self.push(event, EventKind::Departure, slot, before, before, v_max);
        if before != after {
            self.push(event, EventKind::ThresholdUpdate, slot, before, after, v_max);
        }
    }

    fn clinch(&mut self, event: usize, slot: usize, tau: &Threshold, v_max: &Rational) {
        self.push(event, EventKind::Clinch, slot, tau, tau, v_max);
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct CoreOutcome<V> {
    pub(crate) winner_slot: Option<usize>,
    pub(crate) threshold: Extended<V>,
    pub(crate) active_winner: bool,
    pub(crate) prediction_priced: bool,
}

pub(crate) struct CoreInput<'a, V> {
    pub(crate) schedule: &'a Schedule,
    /// Value per slot.
    pub(crate) values: &'a [V],
    /// Identity for max; the smallest representable value (zero for
    /// rationals).
    pub(crate) floor: V,
    /// Discounted prediction, already multiplied by gamma.
    pub(crate) priced_prediction: V,
    pub(crate) milestones: PhaseMilestones,
    pub(crate) rule: AllocRule,
    /// Slot whose events are ignored; used by the payment rerun.
    pub(crate) skip: Option<usize>,
}

fn larger<'a, V: Ord>(a: &'a V, b: &'a V) -> &'a V {
    if b > a {
        b
    } else {
        a
    }
}

fn recompute_threshold<V: Ord + Clone>(
    departed: usize,
    v_max: &V,
    priced_prediction: &V,
    ms: &PhaseMilestones,
) -> Extended<V> {
    if departed < ms.i1_count {
        Extended::Infinite
    } else if departed < ms.i2_count {
        Extended::Finite(larger(v_max, priced_prediction).clone())
    } else {
        Extended::Finite(v_max.clone())
    }
}

fn meets<V: Ord>(bid: &V, tau: &Extended<V>) -> bool {
    match tau {
        Extended::Finite(t) => bid >= t,
        Extended::Infinite => false,
    }
}

pub(crate) fn alloc_core<V: Ord + Clone>(
    input: &CoreInput<'_, V>,
    sink: &mut impl TraceSink<V>,
) -> CoreOutcome<V> {
    let n = input.values.len();
    let ms = input.milestones;
    let mut active = vec![false; n];
    let mut departed = 0usize;
    let mut v_max = input.floor.clone();
    let mut tau: Extended<V> = match input.rule {
        AllocRule::Recompute => {
            recompute_threshold(0, &v_max, &input.priced_prediction, &ms)
        }
        AllocRule::TwoOneShotUpdates => {
            // A milestone of zero departures is already passed when the
            // auction opens, so its one-shot update fires at initialization.
            let mut tau = Extended::Infinite;
            if ms.i1_count == 0 {
                tau = Extended::Finite(larger(&v_max, &input.priced_prediction).clone());
            }
            if ms.i2_count == 0 {
                tau = Extended::Finite(v_max.clone());
            }
            tau
        }
    };
    let priced = |departed: usize, v_max: &V| {
        ms.i1_count <= departed
            && departed < ms.i2_count
            && input.priced_prediction > *v_max
    };
    for (idx, ev) in input.schedule.events.iter().enumerate() {
        if input.skip == Some(ev.slot) {
            continue;
        }
        match ev.kind {
            SchedKind::Arrival => {
                sink.arrival(idx, &tau, &v_max);
                if meets(&input.values[ev.slot], &tau) {
                    sink.clinch(idx, ev.slot, &tau, &v_max);
                    return CoreOutcome {
                        winner_slot: Some(ev.slot),
                        prediction_priced: priced(departed, &v_max),
                        threshold: tau,
                        active_winner: false,
                    };
                }
                active[ev.slot] = true;
            }
            SchedKind::Departure => {
                active[ev.slot] = false;
                departed += 1;
                if input.values[ev.slot] > v_max {
                    v_max = input.values[ev.slot].clone();
                }
                let before = tau.clone();
                match input.rule {
                    AllocRule::Recompute => {
                        tau = recompute_threshold(departed, &v_max, &input.priced_prediction, &ms);
                    }
                    AllocRule::TwoOneShotUpdates => {
                        if departed == ms.i1_count {
                            tau = Extended::Finite(
                                larger(&v_max, &input.priced_prediction).clone(),
                            );
                        } else if departed == ms.i2_count {
                            tau = Extended::Finite(v_max.clone());
                        }
                    }
                }
                sink.departure(idx, &before, &tau, &v_max);
                // Clinch check over the active set, best priority first.
                let clincher = input
                    .schedule
                    .priority_order
                    .iter()
                    .copied()
                    .find(|&s| active[s] && meets(&input.values[s], &tau));
                if let Some(slot) = clincher {
                    sink.clinch(idx, slot, &tau, &v_max);
                    return CoreOutcome {
                        winner_slot: Some(slot),
                        prediction_priced: priced(departed, &v_max),
                        threshold: tau,
                        active_winner: true,
                    };
                }
            }
        }
    }
    CoreOutcome {
        winner_slot: None,
        threshold: tau,
        active_winner: false,
        prediction_priced: false,
    }
}

/// Payment for the core outcome; `None` when the item never sold.
///
/// `rerun_milestones` are the counts used by the hypothetical market without
/// the winner; the standard rule passes the original milestones.
pub(crate) fn payment_core<V: Ord + Clone>(
    input: &CoreInput<'_, V>,
    outcome: &CoreOutcome<V>,
    payment_rule: PaymentRule,
    rerun_milestones: PhaseMilestones,
) -> Option<V> {
    let winner = outcome.winner_slot?;
    let Extended::Finite(clinch_price) = &outcome.threshold else {
        unreachable!("a clinch requires a finite threshold");
    };
    let mut price = clinch_price.clone();
    let rerun_applies = payment_rule != PaymentRule::RerunDisabled
        && outcome.prediction_priced
        && input.schedule.departure_index[winner] > input.milestones.i2_count;
    if rerun_applies {
        let rerun_input = CoreInput {
            schedule: input.schedule,
            values: input.values,
            floor: input.floor.clone(),
            priced_prediction: input.priced_prediction.clone(),
            milestones: rerun_milestones,
            rule: input.rule,
            skip: Some(winner),
        };
        let rerun = alloc_core(&rerun_input, &mut NoTrace);
        let reduce = match rerun.winner_slot {
            None => true,
            Some(other) => {
                !rerun.active_winner
                    || (payment_rule == PaymentRule::Standard
                        && input.schedule.priority_rank[winner]
                            < input.schedule.priority_rank[other])
            }
        };
        if reduce {
            // With at least two bidders the rerun always reaches the first
            // milestone, so its final threshold is finite.
            let Extended::Finite(rerun_price) = rerun.threshold else {
                unreachable!("rerun threshold is finite for n >= 2");
            };
            price = rerun_price;
        }
    }
    Some(price)
}

// ---------------------------------------------------------------------------
// Public API on instances

fn check_sizes(instance: &Instance, params: &AuctionParams) -> Result<(), EngineError> {
    if params.n() != instance.n() {
        return Err(EngineError::SizeMismatch {
            params_n: params.n(),
            instance_n: instance.n(),
        });
    }
    Ok(())
}

fn rerun_milestones_for(options: &EngineOptions, params: &AuctionParams) -> PhaseMilestones {
    if options.rerun_rescale && params.n() >= 2 {
        milestones(params.n() - 1, params.alpha())
    } else {
        milestones(params.n(), params.alpha())
    }
}

/// Runs the allocation stage with a full event trace.
pub fn alloc(
    instance: &Instance,
    params: &AuctionParams,
    prediction: &Prediction,
) -> Result<AllocationResult, EngineError> {
    alloc_with(instance, params, prediction, &EngineOptions::default())
}

pub fn alloc_with(
    instance: &Instance,
    params: &AuctionParams,
    prediction: &Prediction,
    options: &EngineOptions,
) -> Result<AllocationResult, EngineError> {
    check_sizes(instance, params)?;
    let schedule = Schedule::from_instance(instance);
    let values: Vec<Rational> = instance.bidders().iter().map(|b| b.value.clone()).collect();
    let input = CoreInput {
        schedule: &schedule,
        values: &values,
        floor: zero(),
        priced_prediction: params.discounted_prediction(prediction),
        milestones: milestones(params.n(), params.alpha()),
        rule: options.alloc_rule,
        skip: None,
    };
    let mut sink = RecordingSink::new(&schedule);
    let outcome = alloc_core(&input, &mut sink);
    Ok(AllocationResult {
        winner: outcome.winner_slot.map(BidderId),
        threshold: outcome.threshold,
        active_winner: outcome.active_winner,
        prediction_priced: outcome.prediction_priced,
        trace: EventTrace {
            events: sink.events,
        },
    })
}

/// Payment for an allocation result; `None` when the item never sold.
pub fn payment(
    instance: &Instance,
    params: &AuctionParams,
    prediction: &Prediction,
    allocation: &AllocationResult,
) -> Result<Option<Rational>, EngineError> {
    payment_with(
        instance,
        params,
        prediction,
        allocation,
        &EngineOptions::default(),
    )
}

pub fn payment_with(
    instance: &Instance,
    params: &AuctionParams,
    prediction: &Prediction,
    allocation: &AllocationResult,
    options: &EngineOptions,
) -> Result<Option<Rational>, EngineError> {
    check_sizes(instance, params)?;
    let schedule = Schedule::from_instance(instance);
    let values: Vec<Rational> = instance.bidders().iter().map(|b| b.value.clone()).collect();
    let input = CoreInput {
        schedule: &schedule,
        values: &values,
        floor: zero(),
        priced_prediction: params.discounted_prediction(prediction),
        milestones: milestones(params.n(), params.alpha()),
        rule: options.alloc_rule,
        skip: None,
    };
    let outcome = CoreOutcome {
        winner_slot: allocation.winner.map(|id| id.0),
        threshold: allocation.threshold.clone(),
        active_winner: allocation.active_winner,
        prediction_priced: allocation.prediction_priced,
    };
    Ok(payment_core(
        &input,
        &outcome,
        options.payment_rule,
        rerun_milestones_for(options, params),
    ))
}

/// Allocation and payment on truthful reports.
pub fn run(
    instance: &Instance,
    params: &AuctionParams,
    prediction: &Prediction,
) -> Result<Outcome, EngineError> {
    run_with(instance, params, prediction, &EngineOptions::default())
}

pub fn run_with(
    instance: &Instance,
    params: &AuctionParams,
    prediction: &Prediction,
    options: &EngineOptions,
) -> Result<Outcome, EngineError> {
    let reports: Vec<_> = instance.bidders().to_vec();
    Ok(run_with_reports_inner(instance, &reports, params, prediction, options)?.outcome)
}

/// Runs the mechanism on reported types and scores utilities against the
/// true instance. Reports may not claim an earlier arrival than the truth;
/// the winner's utility is value minus price when her reported departure
/// lies inside her true window, and minus the price otherwise.
pub fn run_with_reports(
    truth: &Instance,
    reports: &[BidderType],
    params: &AuctionParams,
    prediction: &Prediction,
    options: &EngineOptions,
) -> Result<ReportedRun, EngineError> {
    run_with_reports_inner(truth, reports, params, prediction, options)
}

fn run_with_reports_inner(
    truth: &Instance,
    reports: &[BidderType],
    params: &AuctionParams,
    prediction: &Prediction,
    options: &EngineOptions,
) -> Result<ReportedRun, EngineError> {
    check_sizes(truth, params)?;
    for (i, report) in reports.iter().enumerate() {
        if report.arrival < truth.bidder(BidderId(i)).arrival {
            return Err(EngineError::ReportArrivalTooEarly { bidder: BidderId(i) });
        }
    }
    let reported = truth.with_bidders(reports.to_vec())?;
    let allocation = alloc_with(&reported, params, prediction, options)?;
    let price = payment_with(&reported, params, prediction, &allocation, options)?;
    let mut utilities = vec![zero(); truth.n()];
    let (allocation_time, revenue, welfare) = match (allocation.winner, &price) {
        (Some(winner), Some(p)) => {
            let time = reported.bidder(winner).departure.clone();
            let true_type = truth.bidder(winner);
            let in_window = true_type.arrival <= time && time <= true_type.departure;
            let welfare = if in_window {
                true_type.value.clone()
            } else {
                zero()
            };
            utilities[winner.0] = &welfare - p;
            (Some(time), p.clone(), welfare)
        }
        _ => (None, zero(), zero()),
    };
    Ok(ReportedRun {
        outcome: Outcome {
            winner: allocation.winner,
            allocation_time,
            price,
            revenue,
            welfare,
            threshold: allocation.threshold.clone(),
        },
        utilities,
        trace: allocation.trace,
    })
}

/// Allocation with explicit milestone counts; the regular entry points
/// derive the counts from `params`. Used to check that a run truncated at
/// the winner's departure already determines the payment.
pub fn alloc_at_milestones(
    instance: &Instance,
    ms: PhaseMilestones,
    priced_prediction: &Rational,
    options: &EngineOptions,
) -> AllocationResult {
    let schedule = Schedule::from_instance(instance);
    let values: Vec<Rational> = instance.bidders().iter().map(|b| b.value.clone()).collect();
    let input = CoreInput {
        schedule: &schedule,
        values: &values,
        floor: zero(),
        priced_prediction: priced_prediction.clone(),
        milestones: ms,
        rule: options.alloc_rule,
        skip: None,
    };
    let mut sink = RecordingSink::new(&schedule);
    let outcome = alloc_core(&input, &mut sink);
    AllocationResult {
        winner: outcome.winner_slot.map(BidderId),
        threshold: outcome.threshold,
        active_winner: outcome.active_winner,
        prediction_priced: outcome.prediction_priced,
        trace: EventTrace {
            events: sink.events,
        },
    }
}

/// Payment with explicit milestone counts; see [`alloc_at_milestones`].
pub fn payment_at_milestones(
    instance: &Instance,
    ms: PhaseMilestones,
    rerun_ms: PhaseMilestones,
    priced_prediction: &Rational,
    allocation: &AllocationResult,
    options: &EngineOptions,
) -> Option<Rational> {
    let schedule = Schedule::from_instance(instance);
    let values: Vec<Rational> = instance.bidders().iter().map(|b| b.value.clone()).collect();
    let input = CoreInput {
        schedule: &schedule,
        values: &values,
        floor: zero(),
        priced_prediction: priced_prediction.clone(),
        milestones: ms,
        rule: options.alloc_rule,
        skip: None,
    };
    let outcome = CoreOutcome {
        winner_slot: allocation.winner.map(|id| id.0),
        threshold: allocation.threshold.clone(),
        active_winner: allocation.active_winner,
        prediction_priced: allocation.prediction_priced,
    };
    payment_core(&input, &outcome, options.payment_rule, rerun_ms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{sequential_instance, BidderType, Instance};
    use crate::rational::ratio;

    fn bidder(a: i64, d: i64, v: i64) -> BidderType {
        BidderType {
            arrival: ratio(a, 1),
            departure: ratio(d, 1),
            value: ratio(v, 1),
        }
    }

    fn params(alpha: (i64, i64), gamma: (i64, i64), n: usize) -> AuctionParams {
        AuctionParams::new(ratio(alpha.0, alpha.1), ratio(gamma.0, gamma.1), n).unwrap()
    }

    fn pred(p: i64) -> Prediction {
        Prediction::new(ratio(p, 1)).unwrap()
    }

    #[test]
    fn milestone_counts_match_known_pairs() {
        let cases: [(usize, (i64, i64), usize, usize); 6] = [
            (10, (3, 5), 2, 8),
            (4, (1, 1), 0, 4),
            (7, (5, 7), 1, 6),
            (4, (1, 2), 1, 3),
            (5, (3, 5), 1, 4),
            (6, (1, 3), 2, 4),
        ];
        for (n, alpha, i1, i2) in cases {
            let ms = milestones(n, &ratio(alpha.0, alpha.1));
            assert_eq!((ms.i1_count, ms.i2_count), (i1, i2), "n = {n}");
        }
    }

    #[test]
    fn degenerate_milestones_round_against_the_seller() {
        // Off the exact grid the counts can cross or collide; the recompute
        // rule stays well-defined.
        let ms = milestones(3, &ratio(0, 1));
        assert_eq!((ms.i1_count, ms.i2_count), (2, 1));
        let ms = milestones(10, &ratio(1, 20));
        assert_eq!((ms.i1_count, ms.i2_count), (5, 5));
    }

    // alpha = 1 yields i1_count = 0: the sale window opens immediately, so
    // the first one-shot update must fire at initialization. Bidder 0
    // arrives first (value 0, threshold gamma * 8 = 0 with prediction 0)
    // and clinches at price 0 under both update rules.
    #[test]
    fn two_shot_updates_fire_at_start_when_the_first_milestone_is_zero() {
        let instance = Instance::with_identity_tie_break(vec![
            bidder(0, 0, 0),
            bidder(0, 0, 3),
        ])
        .unwrap();
        let p = params((1, 1), (1, 4), 2);
        let recompute = run(&instance, &p, &pred(0)).unwrap();
        let two_shot = run_with(
            &instance,
            &p,
            &pred(0),
            &EngineOptions {
                alloc_rule: AllocRule::TwoOneShotUpdates,
                ..EngineOptions::default()
            },
        )
        .unwrap();
        assert_eq!(recompute, two_shot);
        assert_eq!(recompute.winner, Some(BidderId(0)));
        assert_eq!(recompute.price, Some(ratio(0, 1)));
    }

    // Sequential market, values (4, 7, 2, 5), alpha = 1/2, gamma = 1,
    // prediction 6: milestones (1, 3). After the first departure the
    // threshold is max(4, 6) = 6; bidder 1 (value 7) clinches on arrival and
    // departs immediately, paying 6. No rerun: her departure index 2 <= 3.
    #[test]
    fn sequential_run_sells_in_phase_two_at_prediction_price() {
        let instance =
            sequential_instance(&[ratio(4, 1), ratio(7, 1), ratio(2, 1), ratio(5, 1)]).unwrap();
        let p = params((1, 2), (1, 1), 4);
        let outcome = run(&instance, &p, &pred(6)).unwrap();
        assert_eq!(outcome.winner, Some(BidderId(1)));
        assert_eq!(outcome.price, Some(ratio(6, 1)));
        assert_eq!(outcome.revenue, ratio(6, 1));
        assert_eq!(outcome.welfare, ratio(7, 1));
        assert_eq!(outcome.allocation_time, Some(ratio(2, 1)));
    }

    // Same market, prediction 9: nobody meets max(v_max, 9) in phase two.
    // At the third departure the threshold drops to v_max = 7; bidder 3
    // (value 5) is active but 5 < 7, so the item expires unsold.
    #[test]
    fn overshooting_prediction_can_leave_the_item_unsold() {
        let instance =
            sequential_instance(&[ratio(4, 1), ratio(7, 1), ratio(2, 1), ratio(5, 1)]).unwrap();
        let p = params((1, 2), (1, 1), 4);
        let outcome = run(&instance, &p, &pred(9)).unwrap();
        assert_eq!(outcome.winner, None);
        assert_eq!(outcome.price, None);
        assert_eq!(outcome.revenue, ratio(0, 1));
        assert_eq!(outcome.threshold, Threshold::Finite(ratio(7, 1)));
    }

    // Same market, prediction 5: threshold in phase two is max(4, 5) = 5;
    // bidder 1 clinches at 5. Phase-three would have charged 4; the rerun
    // does not fire because her departure index is 2 <= i2_count = 3.
    #[test]
    fn early_winner_keeps_the_phase_two_price() {
        let instance =
            sequential_instance(&[ratio(4, 1), ratio(7, 1), ratio(2, 1), ratio(5, 1)]).unwrap();
        let p = params((1, 2), (1, 1), 4);
        let outcome = run(&instance, &p, &pred(5)).unwrap();
        assert_eq!(outcome.winner, Some(BidderId(1)));
        assert_eq!(outcome.price, Some(ratio(5, 1)));
    }

    // Overlapping market: A = [0, 10] value 9, B = [1, 2] value 3,
    // C = [3, 4] value 5, D = [5, 6] value 2; alpha = 1/2 (milestones
    // (1, 3)), prediction 8. After B departs the threshold is max(3, 8) = 8;
    // A clinches from the active set. A departs fourth, past i2_count = 3,
    // and the prediction set her price, so the mechanism reruns without
    // her: thresholds pass 3 -> max(3,8)=8, C and D never meet it, after the
    // third departure (D) tau' drops to v_max = 5 and nobody is left. The
    // rerun has no active clincher, so A pays tau' = 5 instead of 8.
    #[test]
    fn late_winner_price_drops_to_rerun_threshold() {
        let instance = Instance::with_identity_tie_break(vec![
            bidder(0, 10, 9),
            bidder(1, 2, 3),
            bidder(3, 4, 5),
            bidder(5, 6, 2),
        ])
        .unwrap();
        let p = params((1, 2), (1, 1), 4);
        let allocation = alloc(&instance, &p, &pred(8)).unwrap();
        assert_eq!(allocation.winner, Some(BidderId(0)));
        assert!(allocation.active_winner);
        assert!(allocation.prediction_priced);
        assert_eq!(allocation.threshold, Threshold::Finite(ratio(8, 1)));
        let outcome = run(&instance, &p, &pred(8)).unwrap();
        assert_eq!(outcome.price, Some(ratio(5, 1)));
        assert_eq!(outcome.allocation_time, Some(ratio(10, 1)));
    }

    // Disabling the rerun makes the same winner pay the full clinching
    // threshold.
    #[test]
    fn rerun_disabled_charges_the_clinch_threshold() {
        let instance = Instance::with_identity_tie_break(vec![
            bidder(0, 10, 9),
            bidder(1, 2, 3),
            bidder(3, 4, 5),
            bidder(5, 6, 2),
        ])
        .unwrap();
        let p = params((1, 2), (1, 1), 4);
        let options = EngineOptions {
            payment_rule: PaymentRule::RerunDisabled,
            ..EngineOptions::default()
        };
        let outcome = run_with(&instance, &p, &pred(8), &options).unwrap();
        assert_eq!(outcome.price, Some(ratio(8, 1)));
    }

    // Tie-break reduction: add F = [0, 29] value 6 ahead of everyone in
    // time but behind A in priority, n = 6, alpha = 1/3 (milestones (2, 4)),
    // prediction 8. A clinches at 8 after the second departure and departs
    // last (index 6 > 4). The rerun without A: after departures of B and C
    // the threshold is max(5, 8) = 8, F stays active, after D departs
    // (index 3) still 8, after E (index 4) it drops to v_max = 6... F
    // clinches at 6? F's value is 6 and v_max among departed (B, C, D, E)
    // is 5, so tau' = 5 and F clinches actively at 5. F wins the rerun from
    // the active set, but A precedes F in the tie-break, so A's price drops
    // to tau' = 5. With the tie-break reduction disabled A would keep
    // paying 8.
    #[test]
    fn tie_break_priority_still_reduces_the_price() {
        let instance = Instance::with_identity_tie_break(vec![
            bidder(0, 30, 9),  // A
            bidder(0, 29, 6),  // F
            bidder(1, 2, 3),   // B
            bidder(3, 4, 5),   // C
            bidder(5, 6, 2),   // D
            bidder(7, 8, 1),   // E
        ])
        .unwrap();
        let p = params((1, 3), (1, 1), 6);
        let outcome = run(&instance, &p, &pred(8)).unwrap();
        assert_eq!(outcome.winner, Some(BidderId(0)));
        assert_eq!(outcome.price, Some(ratio(5, 1)));

        let options = EngineOptions {
            payment_rule: PaymentRule::TieBreakReductionDisabled,
            ..EngineOptions::default()
        };
        let outcome = run_with(&instance, &p, &pred(8), &options).unwrap();
        assert_eq!(outcome.price, Some(ratio(8, 1)));
    }

    // With the priorities swapped (F ahead of A), the rerun clincher F
    // outranks A and the reduction does not apply.
    #[test]
    fn higher_priority_rerun_clincher_blocks_the_reduction() {
        let instance = Instance::new(
            vec![
                bidder(0, 30, 9), // A
                bidder(0, 29, 6), // F
                bidder(1, 2, 3),
                bidder(3, 4, 5),
                bidder(5, 6, 2),
                bidder(7, 8, 1),
            ],
            vec![
                BidderId(1),
                BidderId(0),
                BidderId(2),
                BidderId(3),
                BidderId(4),
                BidderId(5),
            ],
        )
        .unwrap();
        let p = params((1, 3), (1, 1), 6);
        let outcome = run(&instance, &p, &pred(8)).unwrap();
        assert_eq!(outcome.winner, Some(BidderId(0)));
        assert_eq!(outcome.price, Some(ratio(8, 1)));
    }

    #[test]
    fn price_never_exceeds_clinch_threshold() {
        let instance = Instance::with_identity_tie_break(vec![
            bidder(0, 10, 9),
            bidder(1, 2, 3),
            bidder(3, 4, 5),
            bidder(5, 6, 2),
        ])
        .unwrap();
        let p = params((1, 2), (1, 1), 4);
        let allocation = alloc(&instance, &p, &pred(8)).unwrap();
        let price = payment(&instance, &p, &pred(8), &allocation).unwrap().unwrap();
        let Threshold::Finite(tau) = &allocation.threshold else {
            panic!("clinch threshold must be finite");
        };
        assert!(price <= *tau);
    }

    #[test]
    fn alpha_one_posts_the_discounted_prediction_from_the_start() {
        // milestones (0, n): the item is on sale immediately at
        // max(v_max, gamma * prediction) = prediction.
        let instance = sequential_instance(&[ratio(0, 1), ratio(5, 1), ratio(3, 1)]).unwrap();
        let p = params((1, 1), (1, 1), 3);
        let outcome = run(&instance, &p, &pred(4)).unwrap();
        assert_eq!(outcome.winner, Some(BidderId(1)));
        assert_eq!(outcome.price, Some(ratio(4, 1)));
    }

    #[test]
    fn trace_records_arrivals_departures_updates_and_clinch() {
        // alpha = 1/3, n = 3: milestones (1, 2). The first departure lifts
        // the threshold to max(4, 6) = 6 and the second bidder clinches on
        // arrival.
        let instance = sequential_instance(&[ratio(4, 1), ratio(7, 1), ratio(2, 1)]).unwrap();
        let p = params((1, 3), (1, 1), 3);
        let allocation = alloc(&instance, &p, &pred(6)).unwrap();
        let kinds: Vec<EventKind> = allocation.trace.events.iter().map(|e| e.kind).collect();
        // Arrival 0, departure 0 (threshold update to 6), arrival 1, clinch.
        assert_eq!(
            kinds,
            vec![
                EventKind::Arrival,
                EventKind::Departure,
                EventKind::ThresholdUpdate,
                EventKind::Arrival,
                EventKind::Clinch,
            ]
        );
        let update = &allocation.trace.events[2];
        assert_eq!(update.tau_before, Threshold::Infinite);
        assert_eq!(update.tau_after, Threshold::Finite(ratio(6, 1)));
        // Times never decrease and v_max never decreases.
        for pair in allocation.trace.events.windows(2) {
            assert!(pair[0].time <= pair[1].time);
            assert!(pair[0].v_max <= pair[1].v_max);
        }
    }

    #[test]
    fn utilities_score_reports_against_true_types() {
        let truth = Instance::with_identity_tie_break(vec![
            bidder(0, 10, 9),
            bidder(1, 2, 3),
            bidder(3, 4, 5),
            bidder(5, 6, 2),
        ])
        .unwrap();
        let p = params((1, 2), (1, 1), 4);
        let truthful: Vec<_> = truth.bidders().to_vec();
        let run_t = run_with_reports(&truth, &truthful, &p, &pred(8), &EngineOptions::default())
            .unwrap();
        assert_eq!(run_t.utilities[0], ratio(4, 1)); // 9 - 5

        // Bidder 0 overstates her departure to 12: the item is handed over
        // at time 12, outside her true window, so she pays without winning.
        let mut exaggerated = truthful.clone();
        exaggerated[0].departure = ratio(12, 1);
        let run_x =
            run_with_reports(&truth, &exaggerated, &p, &pred(8), &EngineOptions::default())
                .unwrap();
        assert_eq!(run_x.outcome.welfare, ratio(0, 1));
        assert!(run_x.utilities[0] < ratio(0, 1));

        // Reports may not move the arrival earlier than the truth.
        let mut early = truthful;
        early[1].arrival = ratio(0, 1);
        assert!(matches!(
            run_with_reports(&truth, &early, &p, &pred(8), &EngineOptions::default()),
            Err(EngineError::ReportArrivalTooEarly { .. })
        ));
    }

    #[test]
    fn params_and_instance_sizes_must_agree() {
        let instance = sequential_instance(&[ratio(1, 1), ratio(2, 1)]).unwrap();
        let p = params((1, 2), (1, 1), 4);
        assert!(matches!(
            run(&instance, &p, &pred(1)),
            Err(EngineError::SizeMismatch { .. })
        ));
    }

    #[test]
    fn truncating_after_the_winners_departure_preserves_the_payment() {
        // Bidders arriving after the winner's reported departure cannot
        // change her payment: drop them, keep the original milestone
        // counts, and compare.
        let instance = Instance::with_identity_tie_break(vec![
            bidder(0, 10, 9),
            bidder(1, 2, 3),
            bidder(3, 4, 5),
            bidder(5, 6, 2),
            bidder(11, 12, 50),
            bidder(13, 14, 60),
        ])
        .unwrap();
        let ms = PhaseMilestones {
            i1_count: 1,
            i2_count: 3,
        };
        let options = EngineOptions::default();
        let gp = ratio(8, 1);
        let full_alloc = alloc_at_milestones(&instance, ms, &gp, &options);
        assert_eq!(full_alloc.winner, Some(BidderId(0)));
        let full_price =
            payment_at_milestones(&instance, ms, ms, &gp, &full_alloc, &options).unwrap();

        let survivors: Vec<BidderType> = instance
            .bidders()
            .iter()
            .filter(|b| b.arrival <= ratio(10, 1))
            .cloned()
            .collect();
        let truncated = Instance::with_identity_tie_break(survivors).unwrap();
        let trunc_alloc = alloc_at_milestones(&truncated, ms, &gp, &options);
        assert_eq!(trunc_alloc.winner, Some(BidderId(0)));
        let trunc_price =
            payment_at_milestones(&truncated, ms, ms, &gp, &trunc_alloc, &options).unwrap();
        assert_eq!(full_price, trunc_price);
        assert_eq!(full_price, ratio(5, 1));
    }
}
