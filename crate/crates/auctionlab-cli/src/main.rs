//! Command line front end for the auction library.
//!
//! Subcommands mirror the library modules: `run` replays one instance
//! through the event engine, `eval` computes exact or sampled revenue
//! statistics, `sweep` tabulates the consistency/robustness trade-off,
//! `audit` searches for profitable misreports, `lp` handles the stopping
//! rule program and its duality certificates, and `family` scores posted
//! price rule menus.
//!
//! Reports are printed as pretty JSON on stdout (`sweep` defaults to CSV).
//! Exit code 0 means the command ran and every checked property held, 1
//! means the command ran but found a property violation (a profitable
//! misreport, a failed revenue floor, a broken certificate), and 2 means
//! the input could not be processed.

use std::io::{Read as _, Write as _};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use auctionlab::audit::{audit_instance, AuditOptions, AuditSample};
use auctionlab::engine::{self, AllocRule, EngineOptions, EventTrace, Outcome, PaymentRule};
use auctionlab::eval;
use auctionlab::family::{self, PaAuction, PaRule, PmAuction, PmRule};
use auctionlab::instance::{AuctionParams, Instance, Prediction};
use auctionlab::lp;
use auctionlab::rational::{parse_rational, rational_to_f64, Rational};

#[derive(Parser)]
#[command(
    name = "auctionlab",
    version,
    about = "Learning-augmented online single-item auctions: exact evaluation, \
             deviation audits, and duality certificates"
)]
struct Cli {
    /// Worker threads for enumeration and sampling; 0 keeps the default.
    /// Results are identical for every worker count.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    /// Bidder cap for exact n! enumeration.
    #[arg(
        long,
        global = true,
        env = "AUCTIONLAB_CAP",
        default_value_t = eval::DEFAULT_EXACT_CAP
    )]
    cap: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the event engine on one instance and print the outcome.
    Run(RunArgs),
    /// Revenue statistics over random arrival orders.
    #[command(subcommand)]
    Eval(EvalCmd),
    /// Tabulate exact consistency and robustness over the alpha grid.
    Sweep(SweepArgs),
    /// Search a misreport grid for strategyproofness violations.
    Audit(AuditArgs),
    /// Stopping-rule linear program: certificates and rank statistics.
    #[command(subcommand)]
    Lp(LpCmd),
    /// Posted-price rule families on sequential markets.
    #[command(subcommand)]
    Family(FamilyCmd),
}

// ---------------------------------------------------------------------------
// Shared argument blocks

#[derive(Args)]
struct InstanceArg {
    /// Instance JSON file; '-' reads stdin.
    #[arg(long)]
    instance: String,
}

#[derive(Args)]
struct ParamArgs {
    /// Window width parameter in [0, 1], e.g. '3/5'.
    #[arg(long)]
    alpha: String,
    /// Prediction discount in [0, 1]; 1 recovers the undiscounted auction.
    #[arg(long, default_value = "1")]
    gamma: String,
    /// Reject alphas whose phase milestones are not exact integers.
    #[arg(long)]
    strict_grid: bool,
}

#[derive(Args)]
struct EngineArgs {
    #[arg(long, value_enum, default_value_t = AllocRuleArg::Recompute)]
    alloc_rule: AllocRuleArg,
    #[arg(long, value_enum, default_value_t = PaymentRuleArg::Standard)]
    payment_rule: PaymentRuleArg,
    /// Rescale the rerun's milestones to the market without the winner.
    #[arg(long)]
    rerun_rescale: bool,
}

#[derive(Copy, Clone, ValueEnum)]
enum AllocRuleArg {
    Recompute,
    TwoOneShot,
}

#[derive(Copy, Clone, ValueEnum)]
enum PaymentRuleArg {
    Standard,
    RerunDisabled,
    TieBreakReductionDisabled,
}

impl EngineArgs {
    fn to_options(&self) -> EngineOptions {
        EngineOptions {
            alloc_rule: match self.alloc_rule {
                AllocRuleArg::Recompute => AllocRule::Recompute,
                AllocRuleArg::TwoOneShot => AllocRule::TwoOneShotUpdates,
            },
            payment_rule: match self.payment_rule {
                PaymentRuleArg::Standard => PaymentRule::Standard,
                PaymentRuleArg::RerunDisabled => PaymentRule::RerunDisabled,
                PaymentRuleArg::TieBreakReductionDisabled => {
                    PaymentRule::TieBreakReductionDisabled
                }
            },
            rerun_rescale: self.rerun_rescale,
        }
    }
}

// ---------------------------------------------------------------------------
// Subcommand argument structs

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    instance: InstanceArg,
    #[command(flatten)]
    params: ParamArgs,
    /// Predicted top value, e.g. '8' or '17/2'.
    #[arg(long)]
    prediction: String,
    #[command(flatten)]
    engine: EngineArgs,
    /// Include the event trace in the output.
    #[arg(long)]
    trace: bool,
}

#[derive(Subcommand)]
enum EvalCmd {
    /// Exact expected revenue over all n! arrival orders.
    Exact(ExactArgs),
    /// Monte Carlo estimate over random arrival orders.
    Mc(McArgs),
    /// Exact revenue divided by the top value under a perfect prediction.
    Consistency(ConsistencyArgs),
    /// Worst-case revenue over prediction scenarios, relative to the
    /// second value.
    Robustness(RobustnessArgs),
    /// Check the revenue floors for a given prediction.
    Check(CheckArgs),
}

#[derive(Args)]
struct ExactArgs {
    #[command(flatten)]
    instance: InstanceArg,
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long)]
    prediction: String,
    /// Also print the full revenue distribution.
    #[arg(long)]
    distribution: bool,
}

#[derive(Args)]
struct McArgs {
    #[command(flatten)]
    instance: InstanceArg,
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long)]
    prediction: String,
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ConsistencyArgs {
    #[command(flatten)]
    instance: InstanceArg,
    #[command(flatten)]
    params: ParamArgs,
}

#[derive(Args)]
struct RobustnessArgs {
    #[command(flatten)]
    instance: InstanceArg,
    #[command(flatten)]
    params: ParamArgs,
    /// Prediction scenarios; defaults to a spread around the top two values.
    #[arg(long = "scenario")]
    scenarios: Vec<String>,
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    instance: InstanceArg,
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long)]
    prediction: String,
}

#[derive(Args)]
struct SweepArgs {
    /// Market size.
    #[arg(long)]
    n: usize,
    /// Second value of the robustness witness, in (0, 1).
    #[arg(long, default_value = "1/2")]
    eps: String,
    /// Emit JSON instead of CSV.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct AuditArgs {
    #[command(flatten)]
    instance: InstanceArg,
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long)]
    prediction: String,
    #[command(flatten)]
    engine: EngineArgs,
    /// Sample the misreport grid instead of sweeping it exhaustively.
    #[arg(long, requires = "sample_size")]
    sample_seed: Option<u64>,
    #[arg(long, requires = "sample_seed")]
    sample_size: Option<usize>,
}

#[derive(Subcommand)]
enum LpCmd {
    /// The hand-built dual certificate for one market size.
    Dual {
        #[arg(long)]
        n: usize,
    },
    /// Integer-arithmetic certificate check over a range of sizes.
    DualSweep {
        #[arg(long, default_value_t = 2)]
        lo: usize,
        #[arg(long, default_value_t = 10_000)]
        hi: usize,
    },
    /// Best threshold stopping rule with an optimality certificate.
    Primal {
        #[arg(long)]
        n: usize,
    },
    /// Closed-form statistics of a rank stopping rule.
    Rule {
        /// Comma-separated stop probabilities, e.g. '0,1/2,1'.
        #[arg(long)]
        stop: String,
        /// Cross-check the closed form against full enumeration.
        #[arg(long)]
        enumerate: bool,
    },
    /// Compare stopping probabilities under two conditionings.
    RankCheck {
        #[arg(long)]
        stop: String,
    },
}

#[derive(Subcommand)]
enum FamilyCmd {
    /// Score one rule vector on the benchmark profiles.
    Score {
        /// Comma-separated steps: n, p, m for the PM family; n, p<j>, j<j>
        /// for the order-statistic family.
        #[arg(long)]
        rules: String,
        /// Interpret the rules as the order-statistic family.
        #[arg(long)]
        pa: bool,
        #[arg(long, default_value = "1/2")]
        eps: String,
    },
    /// Best milestone pair under a window constraint.
    Thresholds {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        alpha: String,
    },
    /// Scan all PM vectors for a consistency-robustness pair beating the
    /// frontier.
    Hardness {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        alpha: String,
        #[arg(long, default_value = "1/2")]
        eps: String,
    },
    /// Check that sorting rule vectors toward the phase shape never lowers
    /// a score; pass --rules and --index for a single swap.
    Interchange {
        #[arg(long, conflicts_with_all = ["rules", "index"])]
        n: Option<usize>,
        #[arg(long, requires = "index")]
        rules: Option<String>,
        /// 0-based left position of the adjacent pair to swap.
        #[arg(long, requires = "rules")]
        index: Option<usize>,
        #[arg(long, default_value = "1/2")]
        eps: String,
    },
    /// Check that every order-statistic auction is dominated by its PM
    /// projection.
    Dominance {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value = "1/2")]
        eps: String,
    },
}

// ---------------------------------------------------------------------------
// Helpers

enum Verdict {
    Pass,
    Violation,
}

fn read_instance(path: &str) -> Result<Instance> {
    let text = if path == "-" {
        let mut buf = String::new();
        std::io::stdin()
            .read_to_string(&mut buf)
            .context("reading instance from stdin")?;
        buf
    } else {
        std::fs::read_to_string(path).with_context(|| format!("reading {path}"))?
    };
    Instance::from_json(&text).with_context(|| format!("parsing instance {path}"))
}

fn rat(text: &str, what: &str) -> Result<Rational> {
    parse_rational(text).with_context(|| format!("parsing {what} {text:?}"))
}

fn params_for(n: usize, args: &ParamArgs) -> Result<AuctionParams> {
    let alpha = rat(&args.alpha, "--alpha")?;
    let gamma = rat(&args.gamma, "--gamma")?;
    let params = AuctionParams::new(alpha, gamma, n)?;
    if args.strict_grid {
        Ok(params.require_exact_grid()?)
    } else {
        Ok(params)
    }
}

fn prediction_arg(text: &str) -> Result<Prediction> {
    Ok(Prediction::new(rat(text, "--prediction")?)?)
}

fn values_and_intervals(instance: &Instance) -> (Vec<Rational>, Vec<(Rational, Rational)>) {
    let values = instance.bidders().iter().map(|b| b.value.clone()).collect();
    let intervals = instance
        .bidders()
        .iter()
        .map(|b| (b.arrival.clone(), b.departure.clone()))
        .collect();
    (values, intervals)
}

/// Writes to stdout, treating a closed pipe as a successful stop so that
/// piping into `head` does not abort the process. The verdict (and with it
/// the exit code) is computed before printing and survives the truncation.
fn write_stdout(bytes: &[u8]) -> Result<()> {
    let mut out = std::io::stdout().lock();
    let result = out.write_all(bytes).and_then(|()| out.flush());
    match result {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_stdout(text.as_bytes())
}

fn parse_stop_vector(text: &str) -> Result<Vec<Rational>> {
    text.split(',')
        .map(|tok| rat(tok, "--stop entry"))
        .collect()
}

// ---------------------------------------------------------------------------
// Command handlers

#[derive(Serialize)]
struct RunReport {
    outcome: Outcome,
    active_winner: bool,
    prediction_priced: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    trace: Option<EventTrace>,
}

fn cmd_run(args: &RunArgs) -> Result<Verdict> {
    let instance = read_instance(&args.instance.instance)?;
    let params = params_for(instance.n(), &args.params)?;
    let prediction = prediction_arg(&args.prediction)?;
    let options = args.engine.to_options();
    let outcome = engine::run_with(&instance, &params, &prediction, &options)?;
    let allocation = engine::alloc_with(&instance, &params, &prediction, &options)?;
    print_json(&RunReport {
        outcome,
        active_winner: allocation.active_winner,
        prediction_priced: allocation.prediction_priced,
        trace: args.trace.then_some(allocation.trace),
    })?;
    Ok(Verdict::Pass)
}

#[derive(Serialize)]
struct ExactReport {
    n: usize,
    expected_revenue: String,
    expected_revenue_decimal: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    distribution: Option<eval::RevenueDistribution>,
}

fn cmd_eval_exact(args: &ExactArgs, cap: usize) -> Result<Verdict> {
    let instance = read_instance(&args.instance.instance)?;
    let params = params_for(instance.n(), &args.params)?;
    let prediction = prediction_arg(&args.prediction)?;
    let (values, intervals) = values_and_intervals(&instance);
    let dist = eval::exact_revenue_distribution(&values, &intervals, &params, &prediction, cap)?;
    let expected = dist.expected_revenue();
    print_json(&ExactReport {
        n: instance.n(),
        expected_revenue: auctionlab::rational::format_rational(&expected),
        expected_revenue_decimal: rational_to_f64(&expected),
        distribution: args.distribution.then_some(dist),
    })?;
    Ok(Verdict::Pass)
}

fn cmd_eval_mc(args: &McArgs) -> Result<Verdict> {
    let instance = read_instance(&args.instance.instance)?;
    let params = params_for(instance.n(), &args.params)?;
    let prediction = prediction_arg(&args.prediction)?;
    let (values, intervals) = values_and_intervals(&instance);
    let summary = eval::mc_expected_revenue(
        &values,
        &intervals,
        &params,
        &prediction,
        args.trials,
        args.seed,
    )?;
    print_json(&summary)?;
    Ok(Verdict::Pass)
}

#[derive(Serialize)]
struct ConsistencyReport {
    n: usize,
    consistency: String,
    consistency_decimal: f64,
}

fn cmd_eval_consistency(args: &ConsistencyArgs, cap: usize) -> Result<Verdict> {
    let instance = read_instance(&args.instance.instance)?;
    let params = params_for(instance.n(), &args.params)?;
    let (values, intervals) = values_and_intervals(&instance);
    let ratio = eval::consistency_ratio(&values, &intervals, &params, cap)?;
    print_json(&ConsistencyReport {
        n: instance.n(),
        consistency: auctionlab::rational::format_rational(&ratio),
        consistency_decimal: rational_to_f64(&ratio),
    })?;
    Ok(Verdict::Pass)
}

#[derive(Serialize)]
struct RobustnessCliReport {
    n: usize,
    min_ratio_decimal: f64,
    #[serde(flatten)]
    report: eval::RobustnessReport,
}

fn cmd_eval_robustness(args: &RobustnessArgs, cap: usize) -> Result<Verdict> {
    let instance = read_instance(&args.instance.instance)?;
    let params = params_for(instance.n(), &args.params)?;
    let (values, intervals) = values_and_intervals(&instance);
    let scenarios = if args.scenarios.is_empty() {
        eval::default_prediction_scenarios(&values)?
    } else {
        args.scenarios
            .iter()
            .map(|s| Ok(Prediction::new(rat(s, "--scenario")?)?))
            .collect::<Result<Vec<_>>>()?
    };
    let report = eval::robustness_ratio(&values, &intervals, &params, &scenarios, cap)?;
    print_json(&RobustnessCliReport {
        n: instance.n(),
        min_ratio_decimal: rational_to_f64(&report.min_ratio),
        report,
    })?;
    Ok(Verdict::Pass)
}

fn cmd_eval_check(args: &CheckArgs, cap: usize) -> Result<Verdict> {
    let instance = read_instance(&args.instance.instance)?;
    let params = params_for(instance.n(), &args.params)?;
    let prediction = prediction_arg(&args.prediction)?;
    let (values, intervals) = values_and_intervals(&instance);
    let report = eval::error_tolerance_check(&values, &intervals, &params, &prediction, cap)?;
    let verdict = if report.passed {
        Verdict::Pass
    } else {
        Verdict::Violation
    };
    print_json(&report)?;
    Ok(verdict)
}

fn cmd_sweep(args: &SweepArgs, cap: usize) -> Result<Verdict> {
    let eps = rat(&args.eps, "--eps")?;
    let sweep = eval::tradeoff_sweep(args.n, &eps, cap)?;
    for alpha in &sweep.skipped {
        eprintln!("warning: alpha = {alpha} is not on the exact grid for n = {}, skipped", args.n);
    }
    let violated = sweep.rows.iter().any(|row| row.robustness < row.floor);
    if args.json {
        print_json(&sweep)?;
    } else {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record([
            "n",
            "alpha",
            "alpha_decimal",
            "i1_count",
            "i2_count",
            "consistency",
            "consistency_decimal",
            "robustness",
            "robustness_decimal",
            "floor",
            "floor_decimal",
        ])?;
        for row in &sweep.rows {
            writer.write_record([
                row.n.to_string(),
                auctionlab::rational::format_rational(&row.alpha),
                rational_to_f64(&row.alpha).to_string(),
                row.i1_count.to_string(),
                row.i2_count.to_string(),
                auctionlab::rational::format_rational(&row.consistency),
                rational_to_f64(&row.consistency).to_string(),
                auctionlab::rational::format_rational(&row.robustness),
                rational_to_f64(&row.robustness).to_string(),
                auctionlab::rational::format_rational(&row.floor),
                rational_to_f64(&row.floor).to_string(),
            ])?;
        }
        let bytes = writer
            .into_inner()
            .map_err(|e| anyhow::anyhow!("flushing csv: {e}"))?;
        write_stdout(&bytes)?;
    }
    Ok(if violated {
        Verdict::Violation
    } else {
        Verdict::Pass
    })
}

fn cmd_audit(args: &AuditArgs) -> Result<Verdict> {
    let instance = read_instance(&args.instance.instance)?;
    let params = params_for(instance.n(), &args.params)?;
    let prediction = prediction_arg(&args.prediction)?;
    let sample = match (args.sample_seed, args.sample_size) {
        (Some(seed), Some(size)) => Some(AuditSample { seed, size }),
        _ => None,
    };
    let options = AuditOptions {
        engine: args.engine.to_options(),
        sample,
    };
    let report = audit_instance(&instance, &params, &prediction, &options)?;
    let verdict = if report.truthful_dominates {
        Verdict::Pass
    } else {
        Verdict::Violation
    };
    print_json(&report)?;
    Ok(verdict)
}

#[derive(Serialize)]
struct PrimalCliReport {
    #[serde(flatten)]
    solution: lp::PrimalSolution,
    dual_certificate_objective: String,
    within_dual_bound: bool,
}

fn cmd_lp(cmd: &LpCmd) -> Result<Verdict> {
    match cmd {
        LpCmd::Dual { n } => {
            let cert = lp::dual_certificate(*n)?;
            let verdict = if cert.bound_holds {
                Verdict::Pass
            } else {
                Verdict::Violation
            };
            print_json(&cert)?;
            Ok(verdict)
        }
        LpCmd::DualSweep { lo, hi } => {
            if lo > hi {
                bail!("--lo must not exceed --hi");
            }
            let sweep = lp::dual_certificate_sweep(*lo, *hi);
            let verdict = if sweep.failures.is_empty() {
                Verdict::Pass
            } else {
                Verdict::Violation
            };
            print_json(&sweep)?;
            Ok(verdict)
        }
        LpCmd::Primal { n } => {
            let solution = lp::solve_primal(*n)?;
            let cert = lp::dual_certificate(*n)?;
            let within = solution.objective <= cert.objective;
            let report = PrimalCliReport {
                dual_certificate_objective: auctionlab::rational::format_rational(
                    &cert.objective,
                ),
                within_dual_bound: within,
                solution,
            };
            print_json(&report)?;
            Ok(if within {
                Verdict::Pass
            } else {
                Verdict::Violation
            })
        }
        LpCmd::Rule { stop, enumerate } => {
            let stop = parse_stop_vector(stop)?;
            let stats = lp::rule_stats(&stop)?;
            if *enumerate {
                let slow = lp::rule_stats_enumerated(&stop)?;
                let matches = stats == slow;
                #[derive(Serialize)]
                struct RuleReport {
                    #[serde(flatten)]
                    stats: lp::RuleStats,
                    enumeration_matches: bool,
                }
                print_json(&RuleReport {
                    stats,
                    enumeration_matches: matches,
                })?;
                Ok(if matches {
                    Verdict::Pass
                } else {
                    Verdict::Violation
                })
            } else {
                print_json(&stats)?;
                Ok(Verdict::Pass)
            }
        }
        LpCmd::RankCheck { stop } => {
            let stop = parse_stop_vector(stop)?;
            let report = lp::rank_rule_conditional_check(&stop)?;
            let verdict = if report.all_equal {
                Verdict::Pass
            } else {
                Verdict::Violation
            };
            print_json(&report)?;
            Ok(verdict)
        }
    }
}

fn parse_pm_rules(text: &str) -> Result<PmAuction> {
    let rules = text
        .split(',')
        .map(|tok| tok.parse::<PmRule>())
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(PmAuction::new(rules)?)
}

fn parse_pa_rules(text: &str) -> Result<PaAuction> {
    let rules = text
        .split(',')
        .map(|tok| tok.parse::<PaRule>())
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(PaAuction::new(rules)?)
}

fn cmd_family(cmd: &FamilyCmd) -> Result<Verdict> {
    match cmd {
        FamilyCmd::Score { rules, pa, eps } => {
            let eps = rat(eps, "--eps")?;
            let score = if *pa {
                family::score_pa(&parse_pa_rules(rules)?, &eps)?
            } else {
                family::score_pm(&parse_pm_rules(rules)?, &eps)?
            };
            print_json(&score)?;
            Ok(Verdict::Pass)
        }
        FamilyCmd::Thresholds { n, alpha } => {
            let alpha = rat(alpha, "--alpha")?;
            let search = family::optimal_thresholds(*n, &alpha)?;
            print_json(&search)?;
            Ok(Verdict::Pass)
        }
        FamilyCmd::Hardness { n, alpha, eps } => {
            let alpha = rat(alpha, "--alpha")?;
            let eps = rat(eps, "--eps")?;
            let scan = family::hardness_scan(*n, &alpha, &eps)?;
            let verdict = if scan.violations.is_empty() {
                Verdict::Pass
            } else {
                Verdict::Violation
            };
            print_json(&scan)?;
            Ok(verdict)
        }
        FamilyCmd::Interchange {
            n,
            rules,
            index,
            eps,
        } => {
            let eps = rat(eps, "--eps")?;
            match (rules, index, n) {
                (Some(rules), Some(index), None) => {
                    let pm = parse_pm_rules(rules)?;
                    let check = family::verify_interchange(&pm, *index, &eps)?;
                    let verdict = if check.monotone {
                        Verdict::Pass
                    } else {
                        Verdict::Violation
                    };
                    print_json(&check)?;
                    Ok(verdict)
                }
                (None, None, Some(n)) => {
                    let scan = family::interchange_scan(*n, &eps)?;
                    let verdict = if scan.violations.is_empty() {
                        Verdict::Pass
                    } else {
                        Verdict::Violation
                    };
                    print_json(&scan)?;
                    Ok(verdict)
                }
                _ => bail!("pass either --n for a scan or --rules with --index"),
            }
        }
        FamilyCmd::Dominance { n, eps } => {
            let eps = rat(eps, "--eps")?;
            let report = family::pa_dominance_check(*n, &eps)?;
            let verdict = if report.violations.is_empty() {
                Verdict::Pass
            } else {
                Verdict::Violation
            };
            print_json(&report)?;
            Ok(verdict)
        }
    }
}

fn dispatch(cli: &Cli) -> Result<Verdict> {
    match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Eval(cmd) => match cmd {
            EvalCmd::Exact(args) => cmd_eval_exact(args, cli.cap),
            EvalCmd::Mc(args) => cmd_eval_mc(args),
            EvalCmd::Consistency(args) => cmd_eval_consistency(args, cli.cap),
            EvalCmd::Robustness(args) => cmd_eval_robustness(args, cli.cap),
            EvalCmd::Check(args) => cmd_eval_check(args, cli.cap),
        },
        Command::Sweep(args) => cmd_sweep(args, cli.cap),
        Command::Audit(args) => cmd_audit(args),
        Command::Lp(cmd) => cmd_lp(cmd),
        Command::Family(cmd) => cmd_family(cmd),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.workers > 0 {
        // Exact sums and per-trial seeding make results worker-independent;
        // this only bounds parallelism.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.workers)
            .build_global();
    }
    match dispatch(&cli) {
        Ok(Verdict::Pass) => ExitCode::SUCCESS,
        Ok(Verdict::Violation) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
