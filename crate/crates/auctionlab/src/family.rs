//! Posted-price rule families over sequential markets.
//!
//! Here bidders appear one at a time: step i's bidder arrives, faces a
//! posted price computed from the prediction and the values seen at steps
//! 1..i-1, buys if her value meets the price, and leaves. The event engine
//! reduces to exactly this process on sequential instances, so these
//! families are the combinatorial search space behind the three-phase
//! threshold choice.
//!
//! Two menus are studied. The prediction-or-maximum family (PM) prices each
//! step at nothing, at `max(prediction, best seen)`, or at `best seen`. The
//! wider order-statistic family (PA) may use any j-th highest seen value in
//! place of the maximum. Scores count, over all n! arrival orders of two
//! fixed value profiles, how often the auction extracts the top value (with
//! a correct prediction) and how often it extracts at least the second
//! value (under three prediction scenarios: far too high, far too low, and
//! between the top two values).
//!
//! The structural facts checked here: sorting a PM rule vector into the
//! none / prediction-or-max / max-seen phase shape never lowers any count,
//! every PA auction is dominated by its PM projection, the best threshold
//! pair for a window constraint is the centered one, and no PM auction
//! beats the consistency-robustness frontier of the three-phase schedule.
//! All counts are exact integers.

use crate::rational::{ratio, zero, Rational};
use num_bigint::BigInt;
use num_traits::{One, Signed};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Largest n for which whole-family enumerations (3^n rule vectors times
/// n! orders) stay interactive.
pub const FAMILY_SCAN_CEILING: usize = 7;
/// Largest n for which the PA family is enumerated; its size grows like
/// the double factorial of 2n-1.
pub const PA_SCAN_CEILING: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FamilyError {
    #[error("rule vector must not be empty")]
    EmptyRules,
    #[error("market must have at least two bidders, got {n}")]
    TooFewBidders { n: usize },
    #[error("step {step} may only reference seen values at indices 1..={max_j}, got {j}")]
    BadOrderStatistic { step: usize, j: usize, max_j: usize },
    #[error("family scan over {n} bidders exceeds the cap of {cap}")]
    ScanTooLarge { n: usize, cap: usize },
    #[error("epsilon must satisfy 0 < epsilon < 1")]
    BadEpsilon,
    #[error("alpha must lie in [0, 1]")]
    BadAlpha,
    #[error("thresholds must satisfy i1 <= i2 <= n, got ({i1}, {i2}) with n = {n}")]
    BadThresholds { i1: usize, i2: usize, n: usize },
    #[error("steps {index} and {next} are not an inversion of the phase order")]
    NotAnInversion { index: usize, next: usize },
    #[error("unknown rule token {token:?}")]
    BadRuleToken { token: String },
}

// ---------------------------------------------------------------------------
// Rule menus

/// Posted price at one step of the prediction-or-maximum family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PmRule {
    /// No sale offered at this step.
    Never,
    /// Price `max(prediction, best seen so far)`, with nothing seen = 0.
    PredOrMax,
    /// Price `best seen so far`, with nothing seen = 0.
    MaxSeen,
}

impl PmRule {
    /// Position in the phase order: sale-free steps first, prediction-backed
    /// steps second, pure market steps last.
    fn phase_rank(self) -> u8 {
        match self {
            PmRule::Never => 0,
            PmRule::PredOrMax => 1,
            PmRule::MaxSeen => 2,
        }
    }
}

impl fmt::Display for PmRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PmRule::Never => write!(f, "never"),
            PmRule::PredOrMax => write!(f, "pred_or_max"),
            PmRule::MaxSeen => write!(f, "max_seen"),
        }
    }
}

impl FromStr for PmRule {
    type Err = FamilyError;

    fn from_str(s: &str) -> Result<Self, FamilyError> {
        match s.trim().to_ascii_lowercase().as_str() {
            "never" | "n" => Ok(PmRule::Never),
            "pred_or_max" | "p" => Ok(PmRule::PredOrMax),
            "max_seen" | "m" => Ok(PmRule::MaxSeen),
            _ => Err(FamilyError::BadRuleToken {
                token: s.to_string(),
            }),
        }
    }
}

/// Posted price at one step of the order-statistic family. `j` counts from
/// the highest seen value, so `j = 1` recovers the PM prices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PaRule {
    Never,
    /// Price `max(prediction, j-th highest seen value)`.
    PredOrJth(usize),
    /// Price `j-th highest seen value`.
    JthSeen(usize),
}

impl fmt::Display for PaRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PaRule::Never => write!(f, "never"),
            PaRule::PredOrJth(j) => write!(f, "p{j}"),
            PaRule::JthSeen(j) => write!(f, "j{j}"),
        }
    }
}

impl FromStr for PaRule {
    type Err = FamilyError;

    fn from_str(s: &str) -> Result<Self, FamilyError> {
        let t = s.trim().to_ascii_lowercase();
        if t == "never" || t == "n" {
            return Ok(PaRule::Never);
        }
        let bad = || FamilyError::BadRuleToken {
            token: s.to_string(),
        };
        let (head, digits) = t.split_at(1);
        let j: usize = digits.parse().map_err(|_| bad())?;
        match head {
            "p" => Ok(PaRule::PredOrJth(j)),
            "j" => Ok(PaRule::JthSeen(j)),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PmAuction {
    rules: Vec<PmRule>,
}

impl PmAuction {
    pub fn new(rules: Vec<PmRule>) -> Result<Self, FamilyError> {
        if rules.is_empty() {
            return Err(FamilyError::EmptyRules);
        }
        Ok(PmAuction { rules })
    }

    pub fn n(&self) -> usize {
        self.rules.len()
    }

    pub fn rules(&self) -> &[PmRule] {
        &self.rules
    }
}

impl fmt::Display for PmAuction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.rules.iter().map(|r| r.to_string()).collect();
        write!(f, "{}", parts.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaAuction {
    rules: Vec<PaRule>,
}

impl PaAuction {
    /// Step i may reference only the i-1 values already seen, so step 1
    /// admits no sale and step i admits `1 <= j <= i-1`.
    pub fn new(rules: Vec<PaRule>) -> Result<Self, FamilyError> {
        if rules.is_empty() {
            return Err(FamilyError::EmptyRules);
        }
        for (idx, rule) in rules.iter().enumerate() {
            let step = idx + 1;
            let max_j = idx;
            let j = match rule {
                PaRule::Never => continue,
                PaRule::PredOrJth(j) | PaRule::JthSeen(j) => *j,
            };
            if j < 1 || j > max_j {
                return Err(FamilyError::BadOrderStatistic { step, j, max_j });
            }
        }
        Ok(PaAuction { rules })
    }

    pub fn n(&self) -> usize {
        self.rules.len()
    }

    pub fn rules(&self) -> &[PaRule] {
        &self.rules
    }
}

impl fmt::Display for PaAuction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.rules.iter().map(|r| r.to_string()).collect();
        write!(f, "{}", parts.join(","))
    }
}

/// Replaces every order statistic by the maximum, keeping the prediction
/// usage of each step.
pub fn pa_to_pm(pa: &PaAuction) -> PmAuction {
    let rules = pa
        .rules
        .iter()
        .map(|r| match r {
            PaRule::Never => PmRule::Never,
            PaRule::PredOrJth(_) => PmRule::PredOrMax,
            PaRule::JthSeen(_) => PmRule::MaxSeen,
        })
        .collect();
    PmAuction { rules }
}

/// The PM vector the event engine realizes on sequential instances with
/// phase milestones (i1, i2): no sales through step i1, prediction-backed
/// prices through step i2, pure market prices afterwards.
pub fn three_phase_pm(n: usize, i1_count: usize, i2_count: usize) -> Result<PmAuction, FamilyError> {
    if i1_count > i2_count || i2_count > n {
        return Err(FamilyError::BadThresholds {
            i1: i1_count,
            i2: i2_count,
            n,
        });
    }
    let rules = (1..=n)
        .map(|i| {
            if i <= i1_count {
                PmRule::Never
            } else if i <= i2_count {
                PmRule::PredOrMax
            } else {
                PmRule::MaxSeen
            }
        })
        .collect();
    Ok(PmAuction { rules })
}

// ---------------------------------------------------------------------------
// Exact scoring

enum Rules<'a> {
    Pm(&'a [PmRule]),
    Pa(&'a [PaRule]),
}

impl Rules<'_> {
    fn len(&self) -> usize {
        match self {
            Rules::Pm(r) => r.len(),
            Rules::Pa(r) => r.len(),
        }
    }

    fn needs_order_statistics(&self) -> bool {
        matches!(self, Rules::Pa(_))
    }

    /// Posted price at `step` (0-based) given the prefix state, or None for
    /// a sale-free step. Ordinal arithmetic: `zero` is the ordinal of value
    /// 0 and `seen_desc` holds the prefix sorted descending.
    fn price(
        &self,
        step: usize,
        pred: u32,
        prefix_max: u32,
        seen_desc: &[u32],
        zero: u32,
    ) -> Option<u32> {
        match self {
            Rules::Pm(r) => match r[step] {
                PmRule::Never => None,
                PmRule::PredOrMax => Some(pred.max(prefix_max)),
                PmRule::MaxSeen => Some(prefix_max),
            },
            Rules::Pa(r) => match r[step] {
                PaRule::Never => None,
                PaRule::PredOrJth(j) => {
                    let stat = seen_desc.get(j - 1).copied().unwrap_or(zero);
                    Some(pred.max(stat))
                }
                PaRule::JthSeen(j) => Some(seen_desc.get(j - 1).copied().unwrap_or(zero)),
            },
        }
    }
}

/// Runs one arrival order and reports whether the sale price reached the
/// floor ordinal.
fn order_reaches_floor(
    rules: &Rules<'_>,
    order: &[u32],
    pred: u32,
    floor: u32,
    zero: u32,
    seen_desc: &mut Vec<u32>,
) -> bool {
    seen_desc.clear();
    let mut prefix_max = zero;
    let track = rules.needs_order_statistics();
    for (step, &v) in order.iter().enumerate() {
        if let Some(price) = rules.price(step, pred, prefix_max, seen_desc, zero) {
            if v >= price {
                return price >= floor;
            }
        }
        prefix_max = prefix_max.max(v);
        if track {
            let pos = seen_desc.partition_point(|&s| s > v);
            seen_desc.insert(pos, v);
        }
    }
    false
}

fn count_orders_reaching_floor(
    rules: &Rules<'_>,
    values: &[Rational],
    prediction: &Rational,
    floor: &Rational,
) -> (u64, u64) {
    let n = values.len();
    let mut universe: Vec<Rational> = values.to_vec();
    universe.push(zero());
    universe.push(prediction.clone());
    universe.push(floor.clone());
    universe.sort();
    universe.dedup();
    let ord = |v: &Rational| -> u32 {
        universe.binary_search(v).expect("member of universe") as u32
    };
    let mut order: Vec<u32> = values.iter().map(ord).collect();
    let pred = ord(prediction);
    let floor = ord(floor);
    let zero_ord = ord(&zero());
    let mut seen = Vec::with_capacity(n);
    let mut count = 0u64;
    let mut total = 0u64;
    permute_orders(&mut order, 0, &mut |order| {
        total += 1;
        if order_reaches_floor(rules, order, pred, floor, zero_ord, &mut seen) {
            count += 1;
        }
    });
    (count, total)
}

fn permute_orders(order: &mut Vec<u32>, k: usize, visit: &mut impl FnMut(&[u32])) {
    let n = order.len();
    if k == n {
        visit(order);
        return;
    }
    for i in k..n {
        order.swap(k, i);
        permute_orders(order, k + 1, visit);
        order.swap(k, i);
    }
}

/// Exact counts for one rule vector over the two benchmark profiles.
///
/// Consistency: profile (1, 0, ..., 0) with a correct prediction of 1;
/// counts orders extracting revenue 1. Robustness: profile (1, eps, 0, ...,
/// 0) under predictions 2 (far above), eps/2 (far below), and (1+eps)/2
/// (between the top two); counts orders extracting at least eps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilyScore {
    pub n: usize,
    /// n!, the number of arrival orders behind each count.
    pub total: u64,
    pub consistency_count: u64,
    pub robustness_over_count: u64,
    pub robustness_under_count: u64,
    pub robustness_mid_count: u64,
    #[serde(with = "crate::rational::serde_rational")]
    pub consistency: Rational,
    #[serde(with = "crate::rational::serde_rational")]
    pub robustness_min: Rational,
}

impl FamilyScore {
    fn from_counts(n: usize, total: u64, c: u64, over: u64, under: u64, mid: u64) -> Self {
        let worst = over.min(under).min(mid);
        FamilyScore {
            n,
            total,
            consistency_count: c,
            robustness_over_count: over,
            robustness_under_count: under,
            robustness_mid_count: mid,
            consistency: Rational::new(BigInt::from(c), BigInt::from(total)),
            robustness_min: Rational::new(BigInt::from(worst), BigInt::from(total)),
        }
    }

    /// Componentwise comparison used by the interchange and dominance
    /// checks: no count may drop.
    pub fn dominates(&self, other: &FamilyScore) -> bool {
        self.consistency_count >= other.consistency_count
            && self.robustness_over_count >= other.robustness_over_count
            && self.robustness_under_count >= other.robustness_under_count
            && self.robustness_mid_count >= other.robustness_mid_count
    }
}

fn check_epsilon(eps: &Rational) -> Result<(), FamilyError> {
    if eps.is_positive() && *eps < Rational::one() {
        Ok(())
    } else {
        Err(FamilyError::BadEpsilon)
    }
}

fn score_rules(rules: Rules<'_>, eps: &Rational) -> Result<FamilyScore, FamilyError> {
    check_epsilon(eps)?;
    let n = rules.len();
    if n < 2 {
        return Err(FamilyError::TooFewBidders { n });
    }
    let one = Rational::one();
    let mut consistency_profile = vec![zero(); n];
    consistency_profile[0] = one.clone();
    let mut robustness_profile = consistency_profile.clone();
    robustness_profile[1] = eps.clone();

    let (c, total) = count_orders_reaching_floor(&rules, &consistency_profile, &one, &one);
    let over_pred = ratio(2, 1);
    let under_pred = eps / ratio(2, 1);
    let mid_pred = (&one + eps) / ratio(2, 1);
    let (over, _) = count_orders_reaching_floor(&rules, &robustness_profile, &over_pred, eps);
    let (under, _) = count_orders_reaching_floor(&rules, &robustness_profile, &under_pred, eps);
    let (mid, _) = count_orders_reaching_floor(&rules, &robustness_profile, &mid_pred, eps);
    Ok(FamilyScore::from_counts(n, total, c, over, under, mid))
}

pub fn score_pm(pm: &PmAuction, eps: &Rational) -> Result<FamilyScore, FamilyError> {
    score_rules(Rules::Pm(&pm.rules), eps)
}

pub fn score_pa(pa: &PaAuction, eps: &Rational) -> Result<FamilyScore, FamilyError> {
    score_rules(Rules::Pa(&pa.rules), eps)
}

// ---------------------------------------------------------------------------
// Interchange toward the phase shape

/// Swaps steps `index` and `index + 1` (0-based) when they invert the phase
/// order, moving the vector one transposition closer to a three-phase
/// shape. Pairs already in phase order are rejected.
pub fn interchange(pm: &PmAuction, index: usize) -> Result<PmAuction, FamilyError> {
    if index + 1 >= pm.rules.len() {
        return Err(FamilyError::NotAnInversion {
            index: index + 1,
            next: index + 2,
        });
    }
    let left = pm.rules[index];
    let right = pm.rules[index + 1];
    if left.phase_rank() <= right.phase_rank() {
        return Err(FamilyError::NotAnInversion {
            index: index + 1,
            next: index + 2,
        });
    }
    let mut rules = pm.rules.clone();
    rules.swap(index, index + 1);
    Ok(PmAuction { rules })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterchangeCheck {
    pub index: usize,
    pub before: FamilyScore,
    pub after: FamilyScore,
    /// True when no count decreased under the swap.
    pub monotone: bool,
}

pub fn verify_interchange(
    pm: &PmAuction,
    index: usize,
    eps: &Rational,
) -> Result<InterchangeCheck, FamilyError> {
    let swapped = interchange(pm, index)?;
    let before = score_pm(pm, eps)?;
    let after = score_pm(&swapped, eps)?;
    let monotone = after.dominates(&before);
    Ok(InterchangeCheck {
        index,
        before,
        after,
        monotone,
    })
}

/// Every PM rule vector of length n, in base-3 order with step 1 as the
/// most significant digit.
pub fn all_pm_auctions(n: usize) -> Result<Vec<PmAuction>, FamilyError> {
    if n < 2 {
        return Err(FamilyError::TooFewBidders { n });
    }
    if n > FAMILY_SCAN_CEILING {
        return Err(FamilyError::ScanTooLarge {
            n,
            cap: FAMILY_SCAN_CEILING,
        });
    }
    let count = 3usize.pow(n as u32);
    let mut out = Vec::with_capacity(count);
    for code in 0..count {
        let mut rules = Vec::with_capacity(n);
        let mut rest = code;
        for _ in 0..n {
            rules.push(match rest % 3 {
                0 => PmRule::Never,
                1 => PmRule::PredOrMax,
                _ => PmRule::MaxSeen,
            });
            rest /= 3;
        }
        rules.reverse();
        out.push(PmAuction { rules });
    }
    Ok(out)
}

/// Every PA rule vector of length n.
pub fn all_pa_auctions(n: usize) -> Result<Vec<PaAuction>, FamilyError> {
    if n < 2 {
        return Err(FamilyError::TooFewBidders { n });
    }
    if n > PA_SCAN_CEILING {
        return Err(FamilyError::ScanTooLarge {
            n,
            cap: PA_SCAN_CEILING,
        });
    }
    let mut out = Vec::new();
    let mut partial: Vec<PaRule> = Vec::with_capacity(n);
    fn extend(partial: &mut Vec<PaRule>, n: usize, out: &mut Vec<PaAuction>) {
        if partial.len() == n {
            out.push(PaAuction {
                rules: partial.clone(),
            });
            return;
        }
        let max_j = partial.len();
        partial.push(PaRule::Never);
        extend(partial, n, out);
        partial.pop();
        for j in 1..=max_j {
            for rule in [PaRule::PredOrJth(j), PaRule::JthSeen(j)] {
                partial.push(rule);
                extend(partial, n, out);
                partial.pop();
            }
        }
    }
    extend(&mut partial, n, &mut out);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterchangeViolation {
    pub rules: PmAuction,
    pub index: usize,
    pub before: FamilyScore,
    pub after: FamilyScore,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterchangeScan {
    pub n: usize,
    pub swaps_checked: u64,
    pub violations: Vec<InterchangeViolation>,
}

/// Applies every applicable adjacent interchange to every PM vector of
/// length n and records any score drop. Scores are computed once per
/// vector and looked up by base-3 code.
pub fn interchange_scan(n: usize, eps: &Rational) -> Result<InterchangeScan, FamilyError> {
    check_epsilon(eps)?;
    let auctions = all_pm_auctions(n)?;
    let scores: Vec<FamilyScore> = auctions
        .iter()
        .map(|pm| score_pm(pm, eps))
        .collect::<Result<_, _>>()?;
    let code_of = |rules: &[PmRule]| -> usize {
        rules
            .iter()
            .fold(0usize, |acc, r| acc * 3 + r.phase_rank() as usize)
    };
    let mut swaps_checked = 0u64;
    let mut violations = Vec::new();
    for (code, pm) in auctions.iter().enumerate() {
        for index in 0..n - 1 {
            let swapped = match interchange(pm, index) {
                Ok(s) => s,
                Err(_) => continue,
            };
            swaps_checked += 1;
            let after = &scores[code_of(&swapped.rules)];
            let before = &scores[code];
            if !after.dominates(before) {
                violations.push(InterchangeViolation {
                    rules: pm.clone(),
                    index,
                    before: before.clone(),
                    after: after.clone(),
                });
            }
        }
    }
    Ok(InterchangeScan {
        n,
        swaps_checked,
        violations,
    })
}

// ---------------------------------------------------------------------------
// Threshold optimality and the consistency-robustness frontier

/// Worst-case robustness score of the three-phase schedule with milestones
/// (i1, i2): the lesser of the two milestone products over n (n - 1).
pub fn threshold_score(n: usize, i1_count: usize, i2_count: usize) -> Rational {
    let a = i1_count * (n - i1_count);
    let b = i2_count * (n - i2_count);
    Rational::new(BigInt::from(a.min(b)), BigInt::from(n * (n - 1)))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThresholdSearch {
    pub n: usize,
    #[serde(with = "crate::rational::serde_rational")]
    pub alpha: Rational,
    /// All (i1, i2) pairs attaining the best score subject to the window
    /// constraint i2 - i1 >= alpha * n.
    pub argmax: Vec<(usize, usize)>,
    #[serde(with = "crate::rational::serde_rational")]
    pub best_score: Rational,
    /// The centered pair ((1-alpha) n / 2, (1+alpha) n / 2) when alpha sits
    /// on the exact grid for n.
    pub canonical: Option<(usize, usize)>,
    pub canonical_is_unique_argmax: bool,
    /// n (1 - alpha^2) / (4 (n - 1)), the frontier value the centered pair
    /// attains on the grid.
    #[serde(with = "crate::rational::serde_rational")]
    pub frontier: Rational,
    pub best_matches_frontier: bool,
}

pub fn optimal_thresholds(n: usize, alpha: &Rational) -> Result<ThresholdSearch, FamilyError> {
    if n < 2 {
        return Err(FamilyError::TooFewBidders { n });
    }
    if alpha.is_negative() || *alpha > Rational::one() {
        return Err(FamilyError::BadAlpha);
    }
    let window = alpha * Rational::from_integer(BigInt::from(n));
    let mut best: Option<Rational> = None;
    let mut argmax: Vec<(usize, usize)> = Vec::new();
    for i1 in 0..=n {
        for i2 in i1..=n {
            if Rational::from_integer(BigInt::from(i2 - i1)) < window {
                continue;
            }
            let score = threshold_score(n, i1, i2);
            match &best {
                Some(b) if *b > score => {}
                Some(b) if *b == score => argmax.push((i1, i2)),
                _ => {
                    best = Some(score);
                    argmax = vec![(i1, i2)];
                }
            }
        }
    }
    let best_score = best.expect("the pair (0, n) always satisfies the window constraint");
    let canonical = if crate::instance::alpha_on_exact_grid(alpha, n) {
        let ms = crate::engine::milestones(n, alpha);
        Some((ms.i1_count, ms.i2_count))
    } else {
        None
    };
    let canonical_is_unique_argmax = match &canonical {
        Some(pair) => argmax.len() == 1 && argmax[0] == *pair,
        None => false,
    };
    let frontier = Rational::new(BigInt::from(n), BigInt::from(4 * (n - 1)))
        * (Rational::one() - alpha * alpha);
    let best_matches_frontier = best_score == frontier;
    Ok(ThresholdSearch {
        n,
        alpha: alpha.clone(),
        argmax,
        best_score,
        canonical,
        canonical_is_unique_argmax,
        frontier,
        best_matches_frontier,
    })
}

/// Confirms, for every milestone pair, that the enumerated counts of the
/// three-phase schedule equal their closed forms: consistency (i2 - i1) /
/// n, worst-case robustness min(i1 (n - i1), i2 (n - i2)) / (n (n - 1)).
pub fn verify_threshold_scores(n: usize, eps: &Rational) -> Result<bool, FamilyError> {
    check_epsilon(eps)?;
    if n < 2 {
        return Err(FamilyError::TooFewBidders { n });
    }
    if n > FAMILY_SCAN_CEILING {
        return Err(FamilyError::ScanTooLarge {
            n,
            cap: FAMILY_SCAN_CEILING,
        });
    }
    for i1 in 0..=n {
        for i2 in i1..=n {
            let pm = three_phase_pm(n, i1, i2)?;
            let score = score_pm(&pm, eps)?;
            let want_c = Rational::new(BigInt::from(i2 - i1), BigInt::from(n));
            if score.consistency != want_c || score.robustness_min != threshold_score(n, i1, i2) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HardnessViolation {
    pub rules: PmAuction,
    pub score: FamilyScore,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HardnessScan {
    pub n: usize,
    #[serde(with = "crate::rational::serde_rational")]
    pub alpha: Rational,
    #[serde(with = "crate::rational::serde_rational")]
    pub frontier: Rational,
    pub rules_checked: u64,
    pub rules_meeting_consistency: u64,
    /// Rule vectors with consistency at least alpha whose worst-case
    /// robustness exceeds the frontier; empty when the frontier is tight.
    pub violations: Vec<HardnessViolation>,
}

/// Scans every PM rule vector of length n for a consistency-robustness
/// pair beating the frontier n (1 - alpha^2) / (4 (n - 1)).
pub fn hardness_scan(n: usize, alpha: &Rational, eps: &Rational) -> Result<HardnessScan, FamilyError> {
    if alpha.is_negative() || *alpha > Rational::one() {
        return Err(FamilyError::BadAlpha);
    }
    check_epsilon(eps)?;
    let auctions = all_pm_auctions(n)?;
    let frontier = Rational::new(BigInt::from(n), BigInt::from(4 * (n - 1)))
        * (Rational::one() - alpha * alpha);
    let mut meeting = 0u64;
    let mut violations = Vec::new();
    for pm in &auctions {
        let score = score_pm(pm, eps)?;
        if score.consistency < *alpha {
            continue;
        }
        meeting += 1;
        if score.robustness_min > frontier {
            violations.push(HardnessViolation {
                rules: pm.clone(),
                score,
            });
        }
    }
    Ok(HardnessScan {
        n,
        alpha: alpha.clone(),
        frontier,
        rules_checked: auctions.len() as u64,
        rules_meeting_consistency: meeting,
        violations,
    })
}

// ---------------------------------------------------------------------------
// PA dominance

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DominanceViolation {
    pub pa: PaAuction,
    pub pa_score: FamilyScore,
    pub pm_score: FamilyScore,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DominanceReport {
    pub n: usize,
    pub auctions_checked: u64,
    pub violations: Vec<DominanceViolation>,
}

/// Checks that projecting any PA auction onto the PM family never lowers a
/// count: using the full maximum instead of a deeper order statistic only
/// helps on the benchmark profiles.
pub fn pa_dominance_check(n: usize, eps: &Rational) -> Result<DominanceReport, FamilyError> {
    check_epsilon(eps)?;
    let auctions = all_pa_auctions(n)?;
    let mut violations = Vec::new();
    for pa in &auctions {
        let pa_score = score_pa(pa, eps)?;
        let image = pa_to_pm(pa);
        let pm_score = score_pm(&image, eps)?;
        if !pm_score.dominates(&pa_score) {
            violations.push(DominanceViolation {
                pa: pa.clone(),
                pa_score,
                pm_score,
            });
        }
    }
    Ok(DominanceReport {
        n,
        auctions_checked: auctions.len() as u64,
        violations,
    })
}
