//! The success-probability linear program and rank-based stopping rules.
//!
//! A stopping rule watches a uniformly random arrival order of n distinct
//! values and may stop on a bidder only while she is the best seen so far.
//! Writing `x_i` for the probability of stopping at step i, feasible vectors
//! satisfy `i * x_i <= 1 - sum_{j<i} x_j`: stopping at step i requires being
//! a running maximum (probability 1/i) and not having stopped earlier. The
//! payoff of stopping at step i is the probability that step i holds the
//! best value and the second best has already departed, `c_i = (i-1) i /
//! ((n-1) n)`, so the best achievable success probability is the linear
//! program
//!
//! ```text
//! max sum c_i x_i   s.t.   i * x_i + sum_{j<i} x_j <= 1,  x >= 0.
//! ```
//!
//! Its dual asks for `y >= 0` with `i * y_i + sum_{j>i} y_j >= c_i`; any
//! feasible dual objective bounds every stopping rule from above. The
//! hand-built certificate `y_i = max(0, 2i - n - 1) / (n (n - 1))` is
//! feasible for every n >= 2 and its objective stays below `1/4 + 2/n`,
//! which caps the whole family's success probability near one quarter.
//! Feasibility scales to integers with denominator `n (n - 1)`, so the
//! large-n sweep is exact integer arithmetic.

use crate::rational::{zero, Rational};
use num_bigint::BigInt;
use num_traits::{One, Signed};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LpError {
    #[error("n must be at least 2, got {n}")]
    BadN { n: usize },
    #[error("stopping probability at step {step} is outside [0, 1]")]
    RuleProbabilityOutOfRange { step: usize },
    #[error("enumeration over {n} steps exceeds the cap of {cap}")]
    EnumerationTooLarge { n: usize, cap: usize },
    #[error("stopping rule must have at least one step")]
    EmptyRule,
}

/// Payoff coefficient `c_i = (i-1) i / ((n-1) n)` for 1-based step i.
pub fn payoff_coefficient(n: usize, i: usize) -> Rational {
    Rational::new(
        BigInt::from(i - 1) * BigInt::from(i),
        BigInt::from(n - 1) * BigInt::from(n),
    )
}

// ---------------------------------------------------------------------------
// Dual certificate

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DualCertificate {
    pub n: usize,
    #[serde(with = "crate::rational::serde_rational_seq")]
    pub y: Vec<Rational>,
    #[serde(with = "crate::rational::serde_rational")]
    pub objective: Rational,
    /// `1/4 + 2/n`, which the objective must not exceed.
    #[serde(with = "crate::rational::serde_rational")]
    pub bound: Rational,
    pub bound_holds: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("dual constraint {index} violated: {lhs} < {rhs}")]
pub struct DualInfeasibility {
    pub index: usize,
    pub lhs: Rational,
    pub rhs: Rational,
}

/// Checks `i * y_i + sum_{j>i} y_j >= c_i` and `y >= 0` exactly.
pub fn check_dual_feasibility(n: usize, y: &[Rational]) -> Result<(), DualInfeasibility> {
    let mut tail = zero();
    let mut results: Vec<Option<DualInfeasibility>> = vec![None; n];
    for i in (1..=n).rev() {
        let yi = &y[i - 1];
        if yi.is_negative() {
            return Err(DualInfeasibility {
                index: i,
                lhs: yi.clone(),
                rhs: zero(),
            });
        }
        let lhs = Rational::from_integer(BigInt::from(i)) * yi + &tail;
        let rhs = payoff_coefficient(n, i);
        if lhs < rhs {
            results[i - 1] = Some(DualInfeasibility {
                index: i,
                lhs,
                rhs,
            });
        }
        tail += yi;
    }
    // Report the lowest violated index for reproducible messages.
    for r in results {
        if let Some(v) = r {
            return Err(v);
        }
    }
    Ok(())
}

/// The clamped dual certificate `y_i = max(0, 2i - n - 1) / (n (n - 1))`,
/// verified feasible before returning.
pub fn dual_certificate(n: usize) -> Result<DualCertificate, LpError> {
    if n < 2 {
        return Err(LpError::BadN { n });
    }
    let denom = BigInt::from(n) * BigInt::from(n - 1);
    let y: Vec<Rational> = (1..=n)
        .map(|i| {
            let raw = 2 * i as i64 - n as i64 - 1;
            Rational::new(BigInt::from(raw.max(0)), denom.clone())
        })
        .collect();
    check_dual_feasibility(n, &y).expect("the clamped certificate is feasible for n >= 2");
    let objective: Rational = y.iter().sum();
    let bound = Rational::new(BigInt::from(1), BigInt::from(4))
        + Rational::new(BigInt::from(2), BigInt::from(n));
    let bound_holds = objective <= bound;
    Ok(DualCertificate {
        n,
        y,
        objective,
        bound,
        bound_holds,
    })
}

/// Integer-only check that the clamped certificate is feasible and its
/// objective is at most `1/4 + 2/n`. Everything is scaled by `n (n - 1)`,
/// so a single i128 comparison per constraint suffices.
pub fn dual_certificate_holds_scaled(n: usize) -> bool {
    if n < 2 {
        return false;
    }
    let n_i = n as i128;
    let scaled = |i: i128| -> i128 { (2 * i - n_i - 1).max(0) };
    let mut tail: i128 = 0;
    let mut feasible = true;
    for i in (1..=n_i).rev() {
        let yi = scaled(i);
        // i * y_i + sum_{j>i} y_j >= (i - 1) * i, all scaled by n (n - 1).
        if i * yi + tail < (i - 1) * i {
            feasible = false;
            break;
        }
        tail += yi;
    }
    if !feasible {
        return false;
    }
    let total: i128 = (1..=n_i).map(scaled).sum();
    // total / (n (n-1)) <= 1/4 + 2/n  <=>  4 * total <= (n - 1) (n + 8).
    4 * total <= (n_i - 1) * (n_i + 8)
}

/// Sweep of the scaled certificate check over `lo..=hi`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DualSweep {
    pub lo: usize,
    pub hi: usize,
    pub checked: usize,
    pub failures: Vec<usize>,
}

pub fn dual_certificate_sweep(lo: usize, hi: usize) -> DualSweep {
    let lo = lo.max(2);
    let failures: Vec<usize> = (lo..=hi)
        .filter(|&n| !dual_certificate_holds_scaled(n))
        .collect();
    DualSweep {
        lo,
        hi,
        checked: hi.saturating_sub(lo) + 1,
        failures,
    }
}

// ---------------------------------------------------------------------------
// Primal threshold search

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrimalSolution {
    pub n: usize,
    /// First step at which the best rule starts accepting running maxima.
    pub threshold_step: usize,
    #[serde(with = "crate::rational::serde_rational_seq")]
    pub x: Vec<Rational>,
    #[serde(with = "crate::rational::serde_rational")]
    pub objective: Rational,
    /// Tight dual built from the solution's support; present when it
    /// certifies optimality by matching the objective exactly.
    #[serde(with = "crate::rational::serde_rational_seq")]
    pub dual_y: Vec<Rational>,
    #[serde(with = "crate::rational::serde_rational")]
    pub dual_objective: Rational,
    pub certified_optimal: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("primal constraint {index} violated")]
pub struct PrimalInfeasibility {
    pub index: usize,
}

/// Checks `x >= 0` and `i * x_i <= 1 - sum_{j<i} x_j` exactly.
pub fn check_primal_feasibility(x: &[Rational]) -> Result<(), PrimalInfeasibility> {
    let mut used = zero();
    for (idx, xi) in x.iter().enumerate() {
        let i = idx + 1;
        if xi.is_negative()
            || Rational::from_integer(BigInt::from(i)) * xi > Rational::one() - &used
        {
            return Err(PrimalInfeasibility { index: i });
        }
        used += xi;
    }
    Ok(())
}

/// Stopping vector of the threshold rule that starts accepting at step k:
/// `x_i = 0` below k, `x_k = 1/k`, and past k each step takes `1/i` of the
/// remaining probability.
fn threshold_rule_vector(n: usize, k: usize) -> Vec<Rational> {
    let mut x = vec![zero(); n];
    let mut remaining = Rational::one();
    for i in k..=n {
        let xi = &remaining / Rational::from_integer(BigInt::from(i));
        remaining -= &xi;
        x[i - 1] = xi;
    }
    x
}

fn objective_of(n: usize, x: &[Rational]) -> Rational {
    x.iter()
        .enumerate()
        .map(|(idx, xi)| payoff_coefficient(n, idx + 1) * xi)
        .sum()
}

/// Searches the threshold family for the best stopping rule and certifies
/// it against a tight dual assembled from its support.
pub fn solve_primal(n: usize) -> Result<PrimalSolution, LpError> {
    if n < 2 {
        return Err(LpError::BadN { n });
    }
    let mut best: Option<(usize, Vec<Rational>, Rational)> = None;
    for k in 1..=n {
        let x = threshold_rule_vector(n, k);
        let obj = objective_of(n, &x);
        let better = match &best {
            None => true,
            Some((_, _, best_obj)) => obj > *best_obj,
        };
        if better {
            best = Some((k, x, obj));
        }
    }
    let (threshold_step, x, objective) = best.expect("n >= 2 gives at least one rule");
    check_primal_feasibility(&x).expect("threshold rules are feasible");

    // Tight dual: columns i >= k hold with equality, columns below are slack
    // at y_i = 0. Assembled backwards from i = n.
    let mut dual_y = vec![zero(); n];
    let mut tail = zero();
    let mut constructed = true;
    for i in (threshold_step..=n).rev() {
        let yi = (payoff_coefficient(n, i) - &tail) / Rational::from_integer(BigInt::from(i));
        if yi.is_negative() {
            constructed = false;
            break;
        }
        tail += &yi;
        dual_y[i - 1] = yi;
    }
    let certified_optimal = constructed
        && check_dual_feasibility(n, &dual_y).is_ok()
        && dual_y.iter().sum::<Rational>() == objective;
    let dual_objective: Rational = dual_y.iter().sum();
    Ok(PrimalSolution {
        n,
        threshold_step,
        x,
        objective,
        dual_y,
        dual_objective,
        certified_optimal,
    })
}

// ---------------------------------------------------------------------------
// Rank-based stopping rule statistics

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleStats {
    /// Probability of stopping at each step.
    #[serde(with = "crate::rational::serde_rational_seq")]
    pub selection: Vec<Rational>,
    /// Probability of stopping at the best value after the second best has
    /// departed.
    #[serde(with = "crate::rational::serde_rational")]
    pub success_probability: Rational,
}

fn check_rule(stop: &[Rational]) -> Result<(), LpError> {
    if stop.is_empty() {
        return Err(LpError::EmptyRule);
    }
    for (idx, s) in stop.iter().enumerate() {
        if s.is_negative() || *s > Rational::one() {
            return Err(LpError::RuleProbabilityOutOfRange { step: idx + 1 });
        }
    }
    Ok(())
}

/// Closed-form statistics of the rule that, on seeing a running maximum at
/// step i, accepts with probability `stop[i-1]`. Running-maximum events at
/// different steps are independent, so the stopping probability factorizes:
/// `x_i = (s_i / i) * prod_{j<i} (1 - s_j / j)`, and each stop succeeds with
/// probability `c_i` independently of the path that led to it.
pub fn rule_stats(stop: &[Rational]) -> Result<RuleStats, LpError> {
    check_rule(stop)?;
    let n = stop.len();
    if n < 2 {
        return Err(LpError::BadN { n });
    }
    let mut reach = Rational::one();
    let mut selection = Vec::with_capacity(n);
    let mut success = zero();
    for (idx, s) in stop.iter().enumerate() {
        let i = idx + 1;
        let xi = &reach * s / Rational::from_integer(BigInt::from(i));
        reach -= &xi;
        success += payoff_coefficient(n, i) * &xi;
        selection.push(xi);
    }
    Ok(RuleStats {
        selection,
        success_probability: success,
    })
}

const RULE_ENUMERATION_CAP: usize = 8;

/// The same statistics by direct enumeration over all n! arrival orders,
/// tracking the acceptance probability along each order. Independent of the
/// closed form; exponential, capped at small n.
pub fn rule_stats_enumerated(stop: &[Rational]) -> Result<RuleStats, LpError> {
    check_rule(stop)?;
    let n = stop.len();
    if n < 2 {
        return Err(LpError::BadN { n });
    }
    if n > RULE_ENUMERATION_CAP {
        return Err(LpError::EnumerationTooLarge {
            n,
            cap: RULE_ENUMERATION_CAP,
        });
    }
    let mut selection = vec![zero(); n];
    let mut success = zero();
    let mut ranks: Vec<usize> = (0..n).collect();
    enumerate_rule(&mut ranks, 0, stop, &mut selection, &mut success);
    let total = Rational::from_integer(factorial_big(n));
    for xi in &mut selection {
        *xi /= &total;
    }
    success /= &total;
    Ok(RuleStats {
        selection,
        success_probability: success,
    })
}

fn factorial_big(n: usize) -> BigInt {
    (1..=n as u64).map(BigInt::from).product()
}

fn enumerate_rule(
    ranks: &mut Vec<usize>,
    k: usize,
    stop: &[Rational],
    selection: &mut [Rational],
    success: &mut Rational,
) {
    let n = ranks.len();
    if k == n {
        // ranks[pos] is the value's rank at position pos; n - 1 is best.
        let best_pos = ranks.iter().position(|&r| r == n - 1).expect("rank n-1");
        let second_pos = ranks.iter().position(|&r| r == n - 2).expect("rank n-2");
        let mut reach = Rational::one();
        let mut prefix_max: Option<usize> = None;
        for (pos, &rank) in ranks.iter().enumerate() {
            let is_running_max = prefix_max.map_or(true, |m| rank > m);
            if is_running_max {
                let accept = &reach * &stop[pos];
                selection[pos] += &accept;
                if pos == best_pos && second_pos < pos {
                    *success += &accept;
                }
                reach *= Rational::one() - &stop[pos];
                prefix_max = Some(rank);
            } else if let Some(m) = prefix_max {
                if rank > m {
                    prefix_max = Some(rank);
                }
            }
        }
        return;
    }
    for i in k..n {
        ranks.swap(k, i);
        enumerate_rule(ranks, k + 1, stop, selection, success);
        ranks.swap(k, i);
    }
}

/// Per-step comparison of the stopping probability conditioned on the
/// success event against the same probability conditioned only on the step
/// being a running maximum. The rule's decision depends on the prefix order
/// alone, which is independent of where the top two values sit, so the two
/// conditionals agree whenever both are defined.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionalComparison {
    pub step: usize,
    #[serde(with = "crate::rational::serde_rational")]
    pub given_success_pattern: Rational,
    #[serde(with = "crate::rational::serde_rational")]
    pub given_running_max: Rational,
    pub equal: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionalReport {
    pub comparisons: Vec<ConditionalComparison>,
    pub all_equal: bool,
}

pub fn rank_rule_conditional_check(stop: &[Rational]) -> Result<ConditionalReport, LpError> {
    check_rule(stop)?;
    let n = stop.len();
    if n < 2 {
        return Err(LpError::BadN { n });
    }
    if n > RULE_ENUMERATION_CAP {
        return Err(LpError::EnumerationTooLarge {
            n,
            cap: RULE_ENUMERATION_CAP,
        });
    }
    // For each step i: sum of P(stop at i | order) over orders in the
    // conditioning set, divided by the set size.
    let mut success_sum = vec![zero(); n];
    let mut success_orders = vec![0u64; n];
    let mut max_sum = vec![zero(); n];
    let mut max_orders = vec![0u64; n];
    let mut ranks: Vec<usize> = (0..n).collect();
    conditional_walk(
        &mut ranks,
        0,
        stop,
        &mut success_sum,
        &mut success_orders,
        &mut max_sum,
        &mut max_orders,
    );
    let mut comparisons = Vec::new();
    let mut all_equal = true;
    for i in 1..=n {
        if success_orders[i - 1] == 0 {
            continue;
        }
        let lhs = &success_sum[i - 1] / Rational::from_integer(BigInt::from(success_orders[i - 1]));
        let rhs = &max_sum[i - 1] / Rational::from_integer(BigInt::from(max_orders[i - 1]));
        let equal = lhs == rhs;
        all_equal &= equal;
        comparisons.push(ConditionalComparison {
            step: i,
            given_success_pattern: lhs,
            given_running_max: rhs,
            equal,
        });
    }
    Ok(ConditionalReport {
        comparisons,
        all_equal,
    })
}

fn conditional_walk(
    ranks: &mut Vec<usize>,
    k: usize,
    stop: &[Rational],
    success_sum: &mut [Rational],
    success_orders: &mut [u64],
    max_sum: &mut [Rational],
    max_orders: &mut [u64],
) {
    let n = ranks.len();
    if k == n {
        let best_pos = ranks.iter().position(|&r| r == n - 1).expect("rank n-1");
        let second_pos = ranks.iter().position(|&r| r == n - 2).expect("rank n-2");
        let mut reach = Rational::one();
        let mut prefix_max: Option<usize> = None;
        for (pos, &rank) in ranks.iter().enumerate() {
            let is_running_max = prefix_max.map_or(true, |m| rank > m);
            if is_running_max {
                let p_stop = &reach * &stop[pos];
                max_orders[pos] += 1;
                max_sum[pos] += &p_stop;
                if pos == best_pos && second_pos < pos {
                    success_orders[pos] += 1;
                    success_sum[pos] += &p_stop;
                }
                reach *= Rational::one() - &stop[pos];
                prefix_max = Some(rank);
            } else if let Some(m) = prefix_max {
                if rank > m {
                    prefix_max = Some(rank);
                }
            }
        }
        return;
    }
    for i in k..n {
        ranks.swap(k, i);
        conditional_walk(
            ranks,
            k + 1,
            stop,
            success_sum,
            success_orders,
            max_sum,
            max_orders,
        );
        ranks.swap(k, i);
    }
}
