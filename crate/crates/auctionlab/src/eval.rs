//! Exact and Monte Carlo evaluation over random value-to-slot matchings.
//!
//! The evaluation model fixes a multiset of values and a list of
//! arrival/departure slots, assigns values to slots uniformly at random, and
//! asks for the expected revenue of the mechanism. The exact path enumerates
//! all n! assignments; to keep that affordable the engine runs on small
//! integer ordinals instead of big rationals. The mechanism only ever
//! compares values and takes maxima, so mapping the distinct values (plus
//! zero and the discounted prediction) to their sorted ranks preserves every
//! decision, and revenue comes back exactly as a count per distinct price.
//!
//! Enumeration splits on the value placed in the first slot and sums integer
//! counts, so results are identical for any worker count. Monte Carlo draws
//! each trial's assignment from a counter-keyed stream cipher, making every
//! trial independent of scheduling; only its summary statistics are floating
//! point.

use crate::engine::{
    alloc_core, milestones, payment_core, AllocRule, CoreInput, EngineOptions, NoTrace,
    PaymentRule, PhaseMilestones, Schedule,
};
use crate::instance::{AuctionParams, CoreError, Prediction};
use crate::rational::{ratio, rational_to_f64, zero, Rational};
use num_bigint::BigInt;
use num_traits::{One, Zero};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Hard ceiling on exact enumeration; 11! runs is the most a desk machine
/// should ever be asked for.
pub const EXACT_ENUMERATION_CEILING: usize = 11;

/// Default soft cap, adjustable per call.
pub const DEFAULT_EXACT_CAP: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error(
        "exact enumeration over {n} bidders exceeds the cap of {cap}; \
         use Monte Carlo estimation instead"
    )]
    TooManyBidders { n: usize, cap: usize },
    #[error("values and intervals differ in length ({values} vs {intervals})")]
    SizeMismatch { values: usize, intervals: usize },
    #[error("params are for n = {params_n} but {given} values were given")]
    ParamsMismatch { params_n: usize, given: usize },
    #[error("the top value must be positive")]
    ZeroTopValue,
    #[error("the second-highest value must be positive")]
    ZeroSecondValue,
    #[error("need at least two bidders, got {n}")]
    NeedTwoBidders { n: usize },
    #[error("need at least one bidder")]
    Empty,
    #[error(transparent)]
    Core(#[from] CoreError),
}

fn check_shape(
    values: &[Rational],
    intervals: &[(Rational, Rational)],
    params: &AuctionParams,
) -> Result<(), EvalError> {
    if values.is_empty() {
        return Err(EvalError::Empty);
    }
    if values.len() != intervals.len() {
        return Err(EvalError::SizeMismatch {
            values: values.len(),
            intervals: intervals.len(),
        });
    }
    if params.n() != values.len() {
        return Err(EvalError::ParamsMismatch {
            params_n: params.n(),
            given: values.len(),
        });
    }
    Ok(())
}

fn check_cap(n: usize, cap: usize) -> Result<(), EvalError> {
    let cap = cap.min(EXACT_ENUMERATION_CEILING);
    if n > cap {
        return Err(EvalError::TooManyBidders { n, cap });
    }
    Ok(())
}

/// Ordinal encoding of a value profile: distinct values (plus zero and the
/// discounted prediction) sorted ascending, values replaced by their ranks.
struct Ordinals {
    universe: Vec<Rational>,
    value_ords: Vec<u32>,
    prediction_ord: u32,
    zero_ord: u32,
}

fn ordinals(values: &[Rational], priced_prediction: &Rational) -> Ordinals {
    let mut universe: Vec<Rational> = values.to_vec();
    universe.push(zero());
    universe.push(priced_prediction.clone());
    universe.sort();
    universe.dedup();
    let ord_of = |v: &Rational| -> u32 {
        universe.binary_search(v).expect("value is in the universe") as u32
    };
    Ordinals {
        value_ords: values.iter().map(&ord_of).collect(),
        prediction_ord: ord_of(priced_prediction),
        zero_ord: ord_of(&zero()),
        universe,
    }
}

fn factorial_u64(n: usize) -> u64 {
    (1..=n as u64).product()
}

struct OrdinalRun<'a> {
    schedule: &'a Schedule,
    milestones: PhaseMilestones,
    rerun_milestones: PhaseMilestones,
    prediction_ord: u32,
    zero_ord: u32,
    alloc_rule: AllocRule,
    payment_rule: PaymentRule,
}

impl<'a> OrdinalRun<'a> {
    /// Revenue of one assignment as an ordinal, or `None` for no sale.
    fn revenue_ord(&self, slot_ords: &[u32]) -> Option<u32> {
        let input = CoreInput {
            schedule: self.schedule,
            values: slot_ords,
            floor: self.zero_ord,
            priced_prediction: self.prediction_ord,
            milestones: self.milestones,
            rule: self.alloc_rule,
            skip: None,
        };
        let outcome = alloc_core(&input, &mut NoTrace);
        payment_core(&input, &outcome, self.payment_rule, self.rerun_milestones)
    }
}

/// Adds, for every permutation of `arr[k..]`, the revenue ordinal count.
fn count_suffix(arr: &mut [u32], k: usize, run: &OrdinalRun<'_>, counts: &mut [u64]) {
    if k == arr.len() {
        if let Some(ord) = run.revenue_ord(arr) {
            counts[ord as usize] += 1;
        }
        return;
    }
    for i in k..arr.len() {
        arr.swap(k, i);
        count_suffix(arr, k + 1, run, counts);
        arr.swap(k, i);
    }
}

fn revenue_counts(ords: &Ordinals, run: &OrdinalRun<'_>) -> Vec<u64> {
    let n = ords.value_ords.len();
    let bins = ords.universe.len();
    if n >= 9 {
        // Split on the first slot's value; integer counts merge exactly.
        (0..n)
            .into_par_iter()
            .map(|first| {
                let mut arr = ords.value_ords.clone();
                arr.swap(0, first);
                let mut counts = vec![0u64; bins];
                count_suffix(&mut arr, 1, run, &mut counts);
                counts
            })
            .reduce(
                || vec![0u64; bins],
                |mut a, b| {
                    for (x, y) in a.iter_mut().zip(b) {
                        *x += y;
                    }
                    a
                },
            )
    } else {
        let mut arr = ords.value_ords.clone();
        let mut counts = vec![0u64; bins];
        count_suffix(&mut arr, 0, run, &mut counts);
        counts
    }
}

/// Exact distribution of revenue over all assignments.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevenueDistribution {
    /// Distinct sale revenues with their assignment counts, ascending.
    pub entries: Vec<RevenueCount>,
    pub no_sale: u64,
    pub matchings: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevenueCount {
    #[serde(with = "crate::rational::serde_rational")]
    pub revenue: Rational,
    pub count: u64,
}

impl RevenueDistribution {
    pub fn expected_revenue(&self) -> Rational {
        let total: Rational = self
            .entries
            .iter()
            .map(|e| &e.revenue * Rational::from_integer(BigInt::from(e.count)))
            .sum();
        total / Rational::from_integer(BigInt::from(self.matchings))
    }

    /// Probability that revenue is at least `floor`.
    pub fn probability_at_least(&self, floor: &Rational) -> Rational {
        let hits: u64 = self
            .entries
            .iter()
            .filter(|e| &e.revenue >= floor)
            .map(|e| e.count)
            .sum();
        Rational::new(BigInt::from(hits), BigInt::from(self.matchings))
    }
}

/// Enumerates all n! assignments of `values` to `intervals` and returns the
/// exact revenue distribution.
pub fn exact_revenue_distribution(
    values: &[Rational],
    intervals: &[(Rational, Rational)],
    params: &AuctionParams,
    prediction: &Prediction,
    cap: usize,
) -> Result<RevenueDistribution, EvalError> {
    exact_revenue_distribution_with(
        values,
        intervals,
        params,
        prediction,
        cap,
        &EngineOptions::default(),
    )
}

pub fn exact_revenue_distribution_with(
    values: &[Rational],
    intervals: &[(Rational, Rational)],
    params: &AuctionParams,
    prediction: &Prediction,
    cap: usize,
    options: &EngineOptions,
) -> Result<RevenueDistribution, EvalError> {
    check_shape(values, intervals, params)?;
    let n = values.len();
    check_cap(n, cap)?;
    let schedule = Schedule::from_intervals(intervals, (0..n).collect());
    let ords = ordinals(values, &params.discounted_prediction(prediction));
    let ms = milestones(n, params.alpha());
    let rerun_ms = if options.rerun_rescale && n >= 2 {
        milestones(n - 1, params.alpha())
    } else {
        ms
    };
    let run = OrdinalRun {
        schedule: &schedule,
        milestones: ms,
        rerun_milestones: rerun_ms,
        prediction_ord: ords.prediction_ord,
        zero_ord: ords.zero_ord,
        alloc_rule: options.alloc_rule,
        payment_rule: options.payment_rule,
    };
    let counts = revenue_counts(&ords, &run);
    let matchings = factorial_u64(n);
    let sold: u64 = counts.iter().sum();
    let entries: Vec<RevenueCount> = counts
        .iter()
        .enumerate()
        .filter(|(_, c)| **c > 0)
        .map(|(ord, c)| RevenueCount {
            revenue: ords.universe[ord].clone(),
            count: *c,
        })
        .collect();
    Ok(RevenueDistribution {
        entries,
        no_sale: matchings - sold,
        matchings,
    })
}

/// Exact expected revenue over all n! assignments.
pub fn exact_expected_revenue(
    values: &[Rational],
    intervals: &[(Rational, Rational)],
    params: &AuctionParams,
    prediction: &Prediction,
    cap: usize,
) -> Result<Rational, EvalError> {
    Ok(exact_revenue_distribution(values, intervals, params, prediction, cap)?
        .expected_revenue())
}

/// Reference evaluator: the same expectation through the general-purpose
/// rational engine, one full instance per assignment. Slow; used to pin the
/// ordinal fast path.
pub fn exact_expected_revenue_reference(
    values: &[Rational],
    intervals: &[(Rational, Rational)],
    params: &AuctionParams,
    prediction: &Prediction,
    cap: usize,
) -> Result<Rational, EvalError> {
    use crate::instance::{instance_from_matching, Matching};
    check_shape(values, intervals, params)?;
    let n = values.len();
    check_cap(n, cap.min(8))?;
    let mut assignment: Vec<usize> = (0..n).collect();
    let mut total = zero();
    fn permute(
        assignment: &mut Vec<usize>,
        k: usize,
        values: &[Rational],
        intervals: &[(Rational, Rational)],
        params: &AuctionParams,
        prediction: &Prediction,
        total: &mut Rational,
    ) {
        if k == assignment.len() {
            let matching = Matching {
                assignment: assignment.clone(),
            };
            let instance = instance_from_matching(values, intervals, &matching)
                .expect("enumerated matching is valid");
            let outcome = crate::engine::run(&instance, params, prediction)
                .expect("enumerated instance runs");
            *total += outcome.revenue;
            return;
        }
        for i in k..assignment.len() {
            assignment.swap(k, i);
            permute(assignment, k + 1, values, intervals, params, prediction, total);
            assignment.swap(k, i);
        }
    }
    permute(
        &mut assignment,
        0,
        values,
        intervals,
        params,
        prediction,
        &mut total,
    );
    Ok(total / Rational::from_integer(BigInt::from(factorial_u64(n))))
}

/// Monte Carlo summary; the only floating-point surface in the crate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub mean: f64,
    pub stderr: f64,
    pub trials: u64,
}

/// Estimates expected revenue over `trials` random assignments. Each trial
/// seeds its own generator from (seed, trial index), so the estimate is
/// deterministic for a given seed and independent of the worker count.
pub fn mc_expected_revenue(
    values: &[Rational],
    intervals: &[(Rational, Rational)],
    params: &AuctionParams,
    prediction: &Prediction,
    trials: u64,
    seed: u64,
) -> Result<McSummary, EvalError> {
    check_shape(values, intervals, params)?;
    let n = values.len();
    let schedule = Schedule::from_intervals(intervals, (0..n).collect());
    let ords = ordinals(values, &params.discounted_prediction(prediction));
    let ms = milestones(n, params.alpha());
    let run = OrdinalRun {
        schedule: &schedule,
        milestones: ms,
        rerun_milestones: ms,
        prediction_ord: ords.prediction_ord,
        zero_ord: ords.zero_ord,
        alloc_rule: AllocRule::Recompute,
        payment_rule: PaymentRule::Standard,
    };
    let universe_f64: Vec<f64> = ords.universe.iter().map(rational_to_f64).collect();
    let samples: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut key = [0u8; 32];
            key[..8].copy_from_slice(&seed.to_le_bytes());
            key[8..16].copy_from_slice(&trial.to_le_bytes());
            let mut rng = ChaCha8Rng::from_seed(key);
            let mut arr = ords.value_ords.clone();
            for i in (1..arr.len()).rev() {
                let j = rng.gen_range(0..=i);
                arr.swap(i, j);
            }
            match run.revenue_ord(&arr) {
                Some(ord) => universe_f64[ord as usize],
                None => 0.0,
            }
        })
        .collect();
    let mean = pairwise_sum(&samples) / trials.max(1) as f64;
    let stderr = if trials >= 2 {
        let sq: Vec<f64> = samples.iter().map(|x| (x - mean) * (x - mean)).collect();
        let var = pairwise_sum(&sq) / (trials - 1) as f64;
        (var / trials as f64).sqrt()
    } else {
        0.0
    };
    Ok(McSummary {
        mean,
        stderr,
        trials,
    })
}

/// Deterministic summation independent of how the vector was produced.
fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        len => {
            let mid = len / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}

/// Expected revenue divided by the top value when the prediction is perfect.
pub fn consistency_ratio(
    values: &[Rational],
    intervals: &[(Rational, Rational)],
    params: &AuctionParams,
    cap: usize,
) -> Result<Rational, EvalError> {
    let top = values.iter().max().ok_or(EvalError::Empty)?.clone();
    if top.is_zero() {
        return Err(EvalError::ZeroTopValue);
    }
    let prediction = Prediction::new(top.clone()).expect("top value is nonnegative");
    let expected = exact_expected_revenue(values, intervals, params, &prediction, cap)?;
    Ok(expected / top)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioOutcome {
    #[serde(with = "crate::rational::serde_rational")]
    pub prediction: Rational,
    #[serde(with = "crate::rational::serde_rational")]
    pub expected_revenue: Rational,
    #[serde(with = "crate::rational::serde_rational")]
    pub ratio: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RobustnessReport {
    #[serde(with = "crate::rational::serde_rational")]
    pub min_ratio: Rational,
    pub scenarios: Vec<ScenarioOutcome>,
}

/// Worst case over prediction scenarios of expected revenue divided by the
/// second-highest value.
pub fn robustness_ratio(
    values: &[Rational],
    intervals: &[(Rational, Rational)],
    params: &AuctionParams,
    scenarios: &[Prediction],
    cap: usize,
) -> Result<RobustnessReport, EvalError> {
    if values.len() < 2 {
        return Err(EvalError::NeedTwoBidders { n: values.len() });
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.cmp(a));
    let second = sorted[1].clone();
    if second.is_zero() {
        return Err(EvalError::ZeroSecondValue);
    }
    let mut outcomes = Vec::with_capacity(scenarios.len());
    for prediction in scenarios {
        let expected = exact_expected_revenue(values, intervals, params, prediction, cap)?;
        outcomes.push(ScenarioOutcome {
            prediction: prediction.value().clone(),
            ratio: &expected / &second,
            expected_revenue: expected,
        });
    }
    let min_ratio = outcomes
        .iter()
        .map(|o| o.ratio.clone())
        .min()
        .expect("at least one scenario");
    Ok(RobustnessReport {
        min_ratio,
        scenarios: outcomes,
    })
}

/// Prediction scenarios spanning overshoot, undershoot, the gap between the
/// top two values, and near-boundary cases: `v1 + 1`, `v2 / 2`,
/// `(v1 + v2) / 2`, `0`, `v2 * 99/100`, `v1`, `v1 * 101/100`, deduplicated.
pub fn default_prediction_scenarios(values: &[Rational]) -> Result<Vec<Prediction>, EvalError> {
    if values.len() < 2 {
        return Err(EvalError::NeedTwoBidders { n: values.len() });
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.cmp(a));
    let v1 = &sorted[0];
    let v2 = &sorted[1];
    let mut raw = vec![
        v1 + Rational::one(),
        v2 / ratio(2, 1),
        (v1 + v2) / ratio(2, 1),
        zero(),
        v2 * ratio(99, 100),
        v1.clone(),
        v1 * ratio(101, 100),
    ];
    raw.sort();
    raw.dedup();
    Ok(raw
        .into_iter()
        .map(|v| Prediction::new(v).expect("scenario predictions are nonnegative"))
        .collect())
}

/// Prediction quality `q = min(prediction / v1, v1 / prediction)`, zero for
/// a zero prediction.
pub fn prediction_quality(
    prediction: &Prediction,
    values: &[Rational],
) -> Result<Rational, EvalError> {
    let top = values.iter().max().ok_or(EvalError::Empty)?;
    if top.is_zero() {
        return Err(EvalError::ZeroTopValue);
    }
    let p = prediction.value();
    if p.is_zero() {
        return Ok(zero());
    }
    let a = p / top;
    let b = top / p;
    Ok(if a <= b { a } else { b })
}

/// Exact check of the discounted-prediction revenue guarantee.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorToleranceReport {
    pub n: usize,
    pub i1_count: usize,
    pub i2_count: usize,
    #[serde(with = "crate::rational::serde_rational")]
    pub quality: Rational,
    #[serde(with = "crate::rational::serde_rational")]
    pub expected_revenue: Rational,
    /// `min(i1 (n - i1), i2 (n - i2)) / (n (n - 1)) * v2`: revenue the
    /// mechanism must earn no matter the prediction.
    #[serde(with = "crate::rational::serde_rational")]
    pub robustness_floor: Rational,
    /// `(i2 - i1) / n * gamma * q * v1`: revenue the mechanism must earn
    /// when the prediction quality is at least gamma. Absent otherwise.
    #[serde(with = "crate::rational::serde_rational_opt")]
    pub consistency_floor: Option<Rational>,
    pub passed: bool,
}

pub fn error_tolerance_check(
    values: &[Rational],
    intervals: &[(Rational, Rational)],
    params: &AuctionParams,
    prediction: &Prediction,
    cap: usize,
) -> Result<ErrorToleranceReport, EvalError> {
    if values.len() < 2 {
        return Err(EvalError::NeedTwoBidders { n: values.len() });
    }
    let n = values.len();
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.cmp(a));
    let v1 = sorted[0].clone();
    let v2 = sorted[1].clone();
    if v1.is_zero() {
        return Err(EvalError::ZeroTopValue);
    }
    let ms = milestones(n, params.alpha());
    let robustness_floor = robustness_floor_value(n, ms, &v2);
    let quality = prediction_quality(prediction, values)?;
    let consistency_floor = if quality >= *params.gamma() {
        let window = Rational::new(
            BigInt::from(ms.i2_count.saturating_sub(ms.i1_count)),
            BigInt::from(n),
        );
        Some(window * params.gamma() * &quality * &v1)
    } else {
        None
    };
    let expected_revenue = exact_expected_revenue(values, intervals, params, prediction, cap)?;
    let passed = expected_revenue >= robustness_floor
        && consistency_floor
            .as_ref()
            .map_or(true, |floor| expected_revenue >= *floor);
    Ok(ErrorToleranceReport {
        n,
        i1_count: ms.i1_count,
        i2_count: ms.i2_count,
        quality,
        expected_revenue,
        robustness_floor,
        consistency_floor,
        passed,
    })
}

/// `min(i1 (n - i1), i2 (n - i2)) / (n (n - 1)) * scale`.
pub fn robustness_floor_value(n: usize, ms: PhaseMilestones, scale: &Rational) -> Rational {
    let i1 = BigInt::from(ms.i1_count);
    let i2 = BigInt::from(ms.i2_count);
    let nn = BigInt::from(n);
    let a = &i1 * (&nn - &i1);
    let b = &i2 * (&nn - &i2);
    let num = if a <= b { a } else { b };
    Rational::new(num, &nn * (&nn - BigInt::from(1))) * scale
}

/// One row of the consistency/robustness trade-off sweep.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(with = "crate::rational::serde_rational")]
    pub alpha: Rational,
    pub i1_count: usize,
    pub i2_count: usize,
    #[serde(with = "crate::rational::serde_rational")]
    pub consistency: Rational,
    #[serde(with = "crate::rational::serde_rational")]
    pub robustness: Rational,
    /// Analytic floor `(1 - alpha^2) / 4` the robustness must clear.
    #[serde(with = "crate::rational::serde_rational")]
    pub floor: Rational,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sweep {
    pub rows: Vec<SweepRow>,
    /// Candidate alphas `k / n` whose milestones are not exact, skipped.
    #[serde(with = "crate::rational::serde_rational_seq")]
    pub skipped: Vec<Rational>,
}

/// Sweeps every exact-grid alpha for the canonical witnesses, reporting the
/// exact consistency and worst-case robustness per alpha.
pub fn tradeoff_sweep(n: usize, eps: &Rational, cap: usize) -> Result<Sweep, EvalError> {
    let (cons_values, _) = crate::instance::canonical_consistency_instance(n)?;
    let witness = crate::instance::canonical_robustness_instance(n, eps)?;
    let intervals = crate::instance::sequential_intervals(n);
    let scenarios = default_prediction_scenarios(&witness.values)?;
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for k in 0..=n {
        let alpha = Rational::new(BigInt::from(k), BigInt::from(n));
        if !crate::instance::alpha_on_exact_grid(&alpha, n) {
            skipped.push(alpha);
            continue;
        }
        let params = AuctionParams::three_phase(alpha.clone(), n)
            .expect("grid alpha is valid")
            .require_exact_grid()
            .expect("grid alpha is exact");
        let ms = milestones(n, &alpha);
        let consistency = consistency_ratio(&cons_values, &intervals, &params, cap)?;
        let robustness =
            robustness_ratio(&witness.values, &intervals, &params, &scenarios, cap)?.min_ratio;
        let floor = (Rational::one() - &alpha * &alpha) / ratio(4, 1);
        rows.push(SweepRow {
            alpha,
            i1_count: ms.i1_count,
            i2_count: ms.i2_count,
            consistency,
            robustness,
            floor,
            n,
        });
    }
    Ok(Sweep { rows, skipped })
}
