//! Acceptance checks. Each returns a one-line detail on success and a
//! reason on failure, so the acceptance runner can print both.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest as _, Sha256};

use xchain_core::agents::{IntermediaryMode, ValidatorMode};
use xchain_core::distribution::{
    DistributionContract, ExecutionStatusClaim, FinalOutcome, PayoutReason, Phase, ProtocolParams, VoteOutcome,
    VotingOutcome,
};
use xchain_core::orchestrator::{
    direct_execution, minutes, optimal_blocks, overhead_report, rounded_minutes, run_recursive_attack,
    run_scenario, verify_trace, ScenarioConfig, ScenarioTrace, StopReason, SummaryOutcome,
};
use xchain_core::simchain::{
    Call, ChainParams, DistributionCall, GasCostTable, Ledger, OpKind, RegisterArgs, ResultSubmission,
    SimChain, Transaction, TxStatus, World, DISTRIBUTION_ADDRESS,
};
use xchain_core::{Address, Value};

use super::*;

pub type Check = Result<String, String>;

/// A labelled function, e.g. a criterion or a contract method with its arguments.
pub type Named<T> = (&'static str, fn() -> T);

macro_rules! ensure {
    ($cond:expr, $($arg:tt)+) => {
        if !$cond {
            return Err(format!($($arg)+));
        }
    };
}

/// `(waiting_blocks, blocks_per_phase, optimal blocks, optimal minutes)`
/// as published for the nine measured configurations.
pub const PUBLISHED_LATENCY: [(u64, u64, u64, u64); 9] = [
    (30, 5, 164, 41),
    (30, 10, 174, 44),
    (30, 30, 214, 54),
    (50, 5, 264, 66),
    (50, 10, 274, 69),
    (50, 30, 314, 79),
    (100, 5, 514, 129),
    (100, 10, 524, 131),
    (100, 30, 564, 141),
];

pub fn honest_setter(waiting: u64, phase: u64) -> ScenarioConfig {
    single(waiting, phase, "set_int", vec![Value::Int(42)])
}

fn only_top(trace: &ScenarioTrace) -> Result<&xchain_core::orchestrator::InvocationSummary, String> {
    trace.top_level().next().ok_or_else(|| "no top-level invocation".to_string())
}

pub fn latency_formula() -> Check {
    let mut slowest = Duration::ZERO;
    for (w, b, published, _) in PUBLISHED_LATENCY {
        ensure!(optimal_blocks(w, b) == published, "formula gives {} for ({w},{b}), expected {published}", optimal_blocks(w, b));
        let start = Instant::now();
        let trace = run_scenario(&honest_setter(w, b)).map_err(|e| e.to_string())?;
        let elapsed = start.elapsed();
        slowest = slowest.max(elapsed);
        let span = only_top(&trace)?.block_span;
        ensure!(span == Some(published), "simulation at ({w},{b}) took {span:?} blocks, expected {published}");
        ensure!(elapsed < Duration::from_secs(5), "cell ({w},{b}) ran {elapsed:?}");
    }
    Ok(format!("9 cells exact, slowest cell {slowest:?}"))
}

pub fn latency_factor() -> Check {
    let mut lowest: Option<Ratio<u64>> = None;
    for (w, b, _, _) in PUBLISHED_LATENCY {
        let trace = run_scenario(&honest_setter(w, b)).map_err(|e| e.to_string())?;
        let span = only_top(&trace)?.block_span.ok_or("call did not finalize")?;
        let factor = Ratio::new(span, w);
        ensure!(factor >= Ratio::from_integer(5), "({w},{b}) factor {factor} below 5");
        lowest = Some(lowest.map_or(factor, |l| l.min(factor)));
    }
    Ok(format!("lowest factor {}", lowest.unwrap()))
}

pub fn minutes_conversion() -> Check {
    let mut exact = 0;
    for (w, b, blocks, published) in PUBLISHED_LATENCY {
        let got = rounded_minutes(optimal_blocks(w, b), 15);
        ensure!(got.abs_diff(published) <= 1, "({w},{b}) {got} min, published {published}");
        exact += usize::from(got == published);
        ensure!(minutes(blocks, 15) == Ratio::new(blocks * 15, 60), "minutes formula");
    }
    for (w, published) in [(30, Ratio::new(15, 2)), (50, Ratio::new(25, 2)), (100, Ratio::from_integer(25))] {
        ensure!(minutes(w, 15) == published, "manual {w} blocks gives {} min", minutes(w, 15));
    }
    Ok(format!("{exact}/9 optimal values exact, manual row exact"))
}

fn gas_of(trace: &ScenarioTrace, kind: OpKind) -> Vec<u64> {
    trace
        .blocks
        .iter()
        .flat_map(|b| &b.receipts)
        .filter(|r| r.status == TxStatus::Success && r.kind == kind)
        .map(|r| r.gas_used)
        .collect()
}

/// Three intermediaries bid 4, 3 and 5 in that order.
pub fn three_bidders() -> ScenarioConfig {
    let mut cfg = honest_setter(2, 2);
    cfg.intermediaries = [("dear", Ratio::new(4, 3)), ("cheap", Ratio::from_integer(1)), ("pricey", Ratio::new(5, 3))]
        .into_iter()
        .map(|(name, margin)| {
            let mut i = intermediary(name, IntermediaryMode::Honest);
            i.margin = margin;
            i
        })
        .collect();
    cfg
}

pub fn with_callback(mut cfg: ScenarioConfig) -> ScenarioConfig {
    for c in &mut cfg.calls {
        c.callback = Some(callback());
    }
    cfg
}

pub fn gas_properties() -> Check {
    let cfg = honest_setter(2, 2);
    let trace = run_scenario(&cfg).map_err(|e| e.to_string())?;
    let report = overhead_report(&trace, &cfg).ok_or("no finalized call")?;
    ensure!(
        report.cross_chain_gas > report.manual_gas && report.manual_gas > 0,
        "cross-chain {} vs manual {}",
        report.cross_chain_gas,
        report.manual_gas
    );

    let trace = run_scenario(&three_bidders()).map_err(|e| e.to_string())?;
    let [first, better, worse] = [OpKind::OfferFirst, OpKind::OfferBetter, OpKind::OfferWorse].map(|k| gas_of(&trace, k));
    ensure!(
        first.len() == 1 && better.len() == 1 && worse.len() == 1,
        "offer kinds seen: {first:?} {better:?} {worse:?}"
    );
    ensure!(first[0] > better[0] && better[0] > worse[0], "offer gas {first:?} {better:?} {worse:?}");

    let cb = run_scenario(&with_callback(honest_setter(2, 2))).map_err(|e| e.to_string())?;
    let fin = gas_of(&trace, OpKind::Finalize);
    let fin_cb = gas_of(&cb, OpKind::FinalizeCallback);
    ensure!(!fin.is_empty() && !fin_cb.is_empty(), "finalizations missing");
    ensure!(fin_cb[0] > fin[0], "finalize with callback {} vs without {}", fin_cb[0], fin[0]);

    let reg = gas_of(&trace, OpKind::Register);
    let reg_cb = gas_of(&cb, OpKind::RegisterCallback);
    ensure!(!reg.is_empty() && !reg_cb.is_empty(), "registrations missing");
    let (lo, hi) = (reg[0].min(reg_cb[0]), reg[0].max(reg_cb[0]));
    ensure!(lo > 0 && hi <= 2 * lo, "registration {} vs with callback {}", reg[0], reg_cb[0]);
    Ok(format!(
        "setter {} > manual {}; offers {}>{}>{}; finalize {}>{}; register {}/{}",
        report.cross_chain_gas, report.manual_gas, first[0], better[0], worse[0], fin_cb[0], fin[0], reg_cb[0], reg[0]
    ))
}

pub fn escrow_conservation(scenarios: u64) -> Check {
    let mut outcomes = BTreeSet::new();
    let violations: Vec<String> = std::thread::scope(|scope| {
        let workers = 8;
        let handles: Vec<_> = (0..workers)
            .map(|k| {
                scope.spawn(move || {
                    let mut found = Vec::new();
                    let mut seen = BTreeSet::new();
                    for seed in (k..scenarios).step_by(workers as usize) {
                        let trace = run_scenario(&random_scenario(seed)).expect("random configs are valid");
                        if let Err(v) = verify_trace(&trace) {
                            found.push(format!("seed {seed}: {v}"));
                        }
                        seen.extend(trace.invocations.iter().map(|s| format!("{:?}", s.outcome)));
                    }
                    (found, seen)
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| {
                let (found, seen) = h.join().unwrap();
                outcomes.extend(seen);
                found
            })
            .collect()
    });
    ensure!(violations.is_empty(), "{} violations, first: {}", violations.len(), violations[0]);
    Ok(format!("{scenarios} scenarios, outcomes {outcomes:?}"))
}

// adversaries

fn run_top(cfg: &ScenarioConfig) -> Result<(ScenarioTrace, xchain_core::orchestrator::InvocationSummary), String> {
    let trace = run_scenario(cfg).map_err(|e| e.to_string())?;
    verify_trace(&trace).map_err(|v| v.to_string())?;
    let top = only_top(&trace)?.clone();
    Ok((trace, top))
}

fn adversarial(mode: IntermediaryMode, validators: [ValidatorMode; 3]) -> ScenarioConfig {
    let mut cfg = honest_setter(2, 2);
    cfg.intermediaries = vec![intermediary("ivy", mode)];
    cfg.validators = ["vera", "vic", "val"]
        .into_iter()
        .zip(validators)
        .map(|(n, m)| validator(n, m))
        .collect();
    cfg
}

pub fn wrong_result_is_negative() -> Check {
    use ValidatorMode::*;
    let cfg = adversarial(IntermediaryMode::WrongResult, [Honest, Honest, ProIntermediary]);
    let (_, top) = run_top(&cfg)?;
    ensure!(top.outcome == SummaryOutcome::Negative, "outcome {:?}", top.outcome);
    let s = top.settlement.as_ref().ok_or("not settled")?;
    let fee = cfg.fees.validator;
    ensure!(s.paid(PayoutReason::CallerRefund) == top.deposit - fee, "refund {}", s.paid(PayoutReason::CallerRefund));
    ensure!(s.paid(PayoutReason::IntermediaryReimbursement) == 0, "intermediary was reimbursed");
    Ok(format!("refund {} of deposit {}", top.deposit - fee, top.deposit))
}

pub fn inflated_steps_is_a_mismatch() -> Check {
    let cfg = adversarial(IntermediaryMode::InflatedSteps, [ValidatorMode::Honest; 3]);
    let (_, top) = run_top(&cfg)?;
    ensure!(top.outcome == SummaryOutcome::StepsMismatch, "outcome {:?}", top.outcome);
    let s = top.settlement.as_ref().ok_or("not settled")?;
    ensure!(
        s.paid(PayoutReason::CallerRefund) == top.deposit - cfg.fees.validator
            && s.paid(PayoutReason::IntermediaryReimbursement) == 0,
        "payouts {:?}",
        s.payouts
    );
    Ok("refund deposit minus validator fee".into())
}

pub fn no_show_is_fraudulent() -> Check {
    use ValidatorMode::*;
    let mut cfg = adversarial(IntermediaryMode::NoShow, [Watchdog, Honest, Honest]);
    cfg.misbehavior_timeout = 1000;
    cfg.max_blocks = 3000;
    let (_, top) = run_top(&cfg)?;
    ensure!(top.outcome == SummaryOutcome::Fraudulent, "outcome {:?}", top.outcome);
    let round = top.misbehavior.first().ok_or("no misbehavior voting")?;
    let selected = top.registered_at + cfg.waiting_blocks + cfg.blocks_per_phase + 1;
    ensure!(round.started_at >= selected + 1000, "voting started at {}, winner known at {selected}", round.started_at);
    let s = top.settlement.as_ref().ok_or("not settled")?;
    let penalty = s.paid(PayoutReason::PenaltyToValidator) + s.paid(PayoutReason::PenaltyToCaller);
    let stake = cfg.fees.intermediary + cfg.fees.validator;
    ensure!(penalty == stake, "forfeited {penalty}, stake {stake}");
    ensure!(s.paid(PayoutReason::CallerRefund) == top.deposit, "caller not fully refunded");
    Ok(format!("voting {} blocks after selection, {penalty} forfeited", round.started_at - selected))
}

pub fn no_offer_aborts() -> Check {
    let mut cfg = honest_setter(2, 2);
    cfg.intermediaries.clear();
    let (_, top) = run_top(&cfg)?;
    ensure!(top.outcome == SummaryOutcome::Aborted, "outcome {:?}", top.outcome);
    let s = top.settlement.as_ref().ok_or("not settled")?;
    ensure!(s.paid(PayoutReason::CallerRefund) == top.deposit, "refund {}", s.paid(PayoutReason::CallerRefund));
    ensure!(s.outcome == FinalOutcome::Aborted, "settlement {:?}", s.outcome);
    Ok(format!("full refund of {}", top.deposit))
}

/// A bribed validator majority lets a fabricated result through. This is
/// the documented limit of majority voting, not a defect.
pub fn bribed_majority_accepts_forgery() -> Check {
    use ValidatorMode::*;
    let cfg = adversarial(IntermediaryMode::WrongResult, [ProIntermediary, ProIntermediary, Honest]);
    let (_, top) = run_top(&cfg)?;
    ensure!(top.outcome == SummaryOutcome::Positive, "outcome {:?}", top.outcome);
    ensure!(top.published_matches_target == Some(false), "published result was not forged");
    let (_, direct) = direct_execution(&cfg, 0).ok_or("no direct execution")?;
    ensure!(top.value != direct, "forged value equals the real one");
    Ok(format!("finalized {:?} instead of {:?}", top.value, direct))
}

pub fn adversary_outcomes() -> Check {
    let checks: [Named<Check>; 5] = [
        ("wrong result", wrong_result_is_negative),
        ("inflated steps", inflated_steps_is_a_mismatch),
        ("no show", no_show_is_fraudulent),
        ("no offer", no_offer_aborts),
        ("bribed majority", bribed_majority_accepts_forgery),
    ];
    for (name, check) in checks {
        check().map_err(|e| format!("{name}: {e}"))?;
    }
    Ok("5 scenarios as expected".into())
}

// winner selection oracle

fn oracle_digest(parts: &[&[u8]]) -> [u8; 32] {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    h.finalize().into()
}

/// Cheapest offer, ties to the lowest SHA-256 of id ‖ address ‖ price.
fn oracle_offer_winner(id: u64, offers: &[(Address, u64)]) -> Address {
    let mut best: Option<(u64, [u8; 32], Address)> = None;
    for (who, price) in offers {
        let key = (*price, oracle_digest(&[&id.to_be_bytes(), who.as_bytes(), &price.to_be_bytes()]), *who);
        if best.as_ref().is_none_or(|b| (key.0, key.1) < (b.0, b.1)) {
            best = Some(key);
        }
    }
    best.unwrap().2
}

/// Majority outcome and the voter of that outcome with the lowest
/// SHA-256 of voting id ‖ address.
fn oracle_tally(voting_id: u64, votes: &[(Address, VoteOutcome)]) -> (VotingOutcome, Address) {
    let valid = votes.iter().filter(|v| v.1 == VoteOutcome::Valid).count();
    let mismatch = votes.iter().filter(|v| v.1 == VoteOutcome::ValidStepsMismatch).count();
    let (outcome, option) = if 2 * (valid + mismatch) <= votes.len() {
        (VotingOutcome::Negative, VoteOutcome::Invalid)
    } else if 2 * mismatch > valid + mismatch {
        (VotingOutcome::StepsMismatch, VoteOutcome::ValidStepsMismatch)
    } else {
        (VotingOutcome::Positive, VoteOutcome::Valid)
    };
    let mut winner: Option<([u8; 32], Address)> = None;
    for (who, o) in votes {
        if *o == option {
            let d = oracle_digest(&[&voting_id.to_be_bytes(), who.as_bytes()]);
            if winner.as_ref().is_none_or(|w| d < w.0) {
                winner = Some((d, *who));
            }
        }
    }
    (outcome, winner.unwrap().1)
}

/// One random offer round and one random voting on a real chain; returns
/// a description of the first disagreement with the oracle.
fn selection_instance(seed: u64) -> Option<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_int = rng.gen_range(1..=5);
    let n_val = rng.gen_range(1..=6);
    let ints: Vec<Address> = (0..n_int).map(|i| Address::derive(seed, &format!("i{i}"))).collect();
    let vals: Vec<Address> = (0..n_val).map(|i| Address::derive(seed, &format!("v{i}"))).collect();
    let caller = Address::derive(seed, "caller");

    let mut ledger = Ledger::new();
    let params = ProtocolParams {
        waiting_blocks: 1,
        blocks_per_phase: 1,
        intermediaries: ints.iter().copied().collect(),
        validators: vals.iter().copied().collect(),
        known_chains: BTreeSet::from([SOURCE, TARGET]),
        ..ProtocolParams::default()
    };
    let mut dist = DistributionContract::new(params);
    for a in ints.iter().chain(&vals).chain([&caller]) {
        ledger.mint(*a, RICH);
    }
    for i in &ints {
        ledger.mint(DISTRIBUTION_ADDRESS, 1_000);
        dist.genesis_depot(*i, 1_000);
    }
    let chain_params = ChainParams {
        id: SOURCE,
        gas_price: 1,
        costs: GasCostTable::default(),
    };
    let mut chain = SimChain::new(chain_params, World::new(ledger, dist, Default::default()));
    let send = |chain: &mut SimChain, sender: Address, call: DistributionCall| {
        chain.submit_transaction(Transaction::new(sender, Call::Distribution(call), 1_000_000, 1)).unwrap();
    };

    let register = RegisterArgs {
        target_chain: TARGET,
        callee: Address::derive(seed, "callee"),
        method: "get_int".into(),
        params: vec![],
        startgas: 100,
        max_gas_price: 4,
        intermediary_fee: 0,
        validator_fee: 0,
        callback: None,
        deposit: 400,
    };
    send(&mut chain, caller, DistributionCall::Register(register));
    chain.mine_block();
    let id = 0;
    // small price range forces ties
    let offers: Vec<(Address, u64)> = ints.iter().map(|i| (*i, rng.gen_range(1..=3))).collect();
    for (who, price) in &offers {
        send(&mut chain, *who, DistributionCall::SubmitOffer { invocation_id: id, gas_price: *price });
    }
    chain.mine_block();
    let deadline = chain.world().distribution.record(id).unwrap().offer_deadline;
    while chain.height() < deadline {
        chain.mine_block();
    }
    send(&mut chain, caller, DistributionCall::DetermineWinner { invocation_id: id });
    chain.mine_block();
    let rec = chain.world().distribution.record(id).unwrap();
    let expected = oracle_offer_winner(id, &offers);
    if rec.winner != Some(expected) {
        return Some(format!("seed {seed}: winner {:?}, oracle {expected}", rec.winner));
    }

    let result = ResultSubmission {
        execution_id: 0,
        status: ExecutionStatusClaim::Success,
        return_value: Some(Value::Int(1)),
        steps_used: 50,
    };
    send(&mut chain, expected, DistributionCall::PublishResult { invocation_id: id, result });
    chain.mine_block();
    let options = [VoteOutcome::Valid, VoteOutcome::Invalid, VoteOutcome::ValidStepsMismatch];
    let votes: Vec<(Address, VoteOutcome)> = vals.iter().map(|v| (*v, options[rng.gen_range(0..3)])).collect();
    for (who, outcome) in &votes {
        let claimed_steps = (*outcome == VoteOutcome::ValidStepsMismatch).then_some(10);
        send(&mut chain, *who, DistributionCall::SubmitVote { invocation_id: id, outcome: *outcome, claimed_steps });
    }
    chain.mine_block();
    let rec = chain.world().distribution.record(id).unwrap();
    if rec.phase != Phase::VotingOpen {
        return Some(format!("seed {seed}: phase {:?} after voting", rec.phase));
    }
    let voting_id = rec.verification.as_ref().unwrap().voting_id;
    let deadline = rec.voting_deadline().unwrap();
    let tally = chain.world().distribution.tally_votes(id, deadline + 1).unwrap();
    let (outcome, reward) = oracle_tally(voting_id, &votes);
    if (tally.outcome, tally.reward_winner) != (outcome, reward) {
        return Some(format!("seed {seed}: tally {tally:?}, oracle {outcome:?} {reward}"));
    }
    None
}

pub fn winner_selection(instances: u64) -> Check {
    let disagreements: Vec<String> = std::thread::scope(|scope| {
        let workers = 8;
        let handles: Vec<_> = (0..workers)
            .map(|k| scope.spawn(move || (k..instances).step_by(workers as usize).filter_map(selection_instance).collect::<Vec<_>>()))
            .collect();
        handles.into_iter().flat_map(|h| h.join().unwrap()).collect()
    });
    ensure!(disagreements.is_empty(), "{} disagreements, first: {}", disagreements.len(), disagreements[0]);
    Ok(format!("{instances} instances, zero disagreements"))
}

// end-to-end oracle

pub const CONTRACT_MATRIX: [Named<Vec<Value>>; 6] = [
    ("get_int", Vec::new),
    ("get_string", Vec::new),
    ("get_bytes", Vec::new),
    ("set_int", || vec![Value::Int(-123_456)]),
    ("set_string", || vec![Value::String("cross-chain".into())]),
    ("set_bytes", || vec![Value::Bytes(vec![0, 1, 0xfe, 0xff])]),
];

pub fn end_to_end(method: &str, params: Vec<Value>) -> Check {
    let cfg = single(2, 2, method, params);
    let (_, top) = run_top(&cfg)?;
    ensure!(top.outcome == SummaryOutcome::Positive, "{method}: outcome {:?}", top.outcome);
    let (receipt, direct) = direct_execution(&cfg, 0).ok_or("no direct execution")?;
    ensure!(receipt.status == TxStatus::Success, "{method}: direct call failed");
    let got = top.value.as_ref().map(Value::encode);
    let want = direct.as_ref().map(Value::encode);
    ensure!(got.is_some() && got == want, "{method}: returned {:?}, direct {:?}", top.value, direct);
    Ok(format!("{method} -> {}", direct.unwrap().render()))
}

pub fn end_to_end_matrix() -> Check {
    for (method, params) in CONTRACT_MATRIX {
        end_to_end(method, params())?;
    }
    Ok("6 getters and setters byte-identical".into())
}

// recursion

pub fn benign_recursion_composes() -> Check {
    let (_, top) = run_top(&benign_recursion(Some(3)))?;
    let expected = Value::String("outer(middle(inner))".into());
    ensure!(top.outcome == SummaryOutcome::Positive, "outcome {:?}", top.outcome);
    ensure!(top.value.as_ref() == Some(&expected), "value {:?}", top.value);
    Ok(expected.render())
}

pub fn limited_attack_stops_at_three() -> Check {
    let report = run_recursive_attack(&mutual_recursion(Some(3), 5000)).map_err(|e| e.to_string())?;
    verify_trace(&report.trace).map_err(|v| v.to_string())?;
    ensure!(report.nested_executions == 3, "{} nested executions", report.nested_executions);
    ensure!(report.max_depth == 3 && report.terminated, "depth {} terminated {}", report.max_depth, report.terminated);
    let top = only_top(&report.trace)?;
    ensure!(
        top.status == Some(ExecutionStatusClaim::Failure) && top.value.is_none(),
        "top-level call returned {:?} {:?}",
        top.status,
        top.value
    );
    let failed = report.trace.events("ExecutionFailed").count();
    ensure!(failed == 4, "{failed} executions failed, expected the top call and 3 nested");
    Ok("3 nested executions, failure propagated to the caller".into())
}

pub fn unlimited_attack_never_terminates() -> Check {
    let report = run_recursive_attack(&mutual_recursion(None, 3000)).map_err(|e| e.to_string())?;
    ensure!(!report.terminated, "attack terminated");
    ensure!(report.trace.end.stop_reason == StopReason::BlockBudget, "stopped by {:?}", report.trace.end.stop_reason);
    ensure!(report.nested_executions > 3, "only {} nested executions", report.nested_executions);
    ensure!(report.drained_monotonically(), "intermediary funds recovered");
    Ok(format!(
        "{} nested executions by block {}, depth {}",
        report.nested_executions, report.trace.end.final_height, report.max_depth
    ))
}

pub fn recursion() -> Check {
    let a = benign_recursion_composes()?;
    limited_attack_stops_at_three()?;
    let c = unlimited_attack_never_terminates()?;
    Ok(format!("{a}; limit 3 holds; unlimited: {c}"))
}

// replay

pub fn replay_determinism() -> Check {
    let mut configs: Vec<ScenarioConfig> = (0..20).map(random_scenario).collect();
    configs.push(honest_setter(30, 5));
    configs.push(with_callback(three_bidders()));
    configs.push(benign_recursion(Some(3)));
    for cfg in &configs {
        let a = run_scenario(cfg).map_err(|e| e.to_string())?.to_jsonl();
        let b = run_scenario(cfg).map_err(|e| e.to_string())?.to_jsonl();
        ensure!(a == b, "seed {} produced different traces", cfg.seed);
        let parsed = ScenarioTrace::from_jsonl(&a).map_err(|e| e.to_string())?;
        verify_trace(&parsed).map_err(|v| format!("seed {}: {v}", cfg.seed))?;
    }
    Ok(format!("{} configs byte-identical and verified after reload", configs.len()))
}
