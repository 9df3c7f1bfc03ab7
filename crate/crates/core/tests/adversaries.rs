mod common;

use common::checks::{self, Check};
use common::*;
use xchain_core::agents::{IntermediaryMode, ValidatorMode};
use xchain_core::distribution::PayoutReason;
use xchain_core::orchestrator::{run_scenario, verify_trace, SummaryOutcome};
use xchain_core::Value;

fn pass(check: Check) {
    if let Err(reason) = check {
        panic!("{reason}");
    }
}

#[test]
fn wrong_result_with_honest_majority_finalizes_negative() {
    pass(checks::wrong_result_is_negative());
}

#[test]
fn inflated_steps_finalize_as_steps_mismatch() {
    pass(checks::inflated_steps_is_a_mismatch());
}

#[test]
fn no_show_is_punished_after_the_misbehavior_timeout() {
    pass(checks::no_show_is_fraudulent());
}

#[test]
fn missing_offers_abort_with_a_full_refund() {
    pass(checks::no_offer_aborts());
}

#[test]
fn bribed_validator_majority_finalizes_a_forged_result() {
    pass(checks::bribed_majority_accepts_forgery());
}

#[test]
fn intermediary_that_never_forwards_is_caught_by_a_watchdog() {
    let mut cfg = checks::honest_setter(2, 2);
    cfg.misbehavior_timeout = 20;
    cfg.intermediaries = vec![intermediary("ivy", IntermediaryMode::NoForward)];
    cfg.validators[0].mode = ValidatorMode::Watchdog;
    let trace = run_scenario(&cfg).unwrap();
    assert_eq!(verify_trace(&trace), Ok(()));
    let top = trace.top_level().next().unwrap();
    assert_eq!(top.outcome, SummaryOutcome::Fraudulent);
    // it executed on the target chain but never got paid for it
    assert!(top.execution.is_some());
    let s = top.settlement.as_ref().unwrap();
    assert_eq!(s.paid(PayoutReason::IntermediaryReimbursement), 0);
}

#[test]
fn no_show_without_a_watchdog_stays_unsettled() {
    let mut cfg = checks::honest_setter(2, 2);
    cfg.misbehavior_timeout = 20;
    cfg.max_blocks = 200;
    cfg.intermediaries = vec![intermediary("ivy", IntermediaryMode::NoShow)];
    let trace = run_scenario(&cfg).unwrap();
    assert_eq!(verify_trace(&trace), Ok(()));
    assert!(!trace.end.completed);
    assert_eq!(trace.top_level().next().unwrap().outcome, SummaryOutcome::Unfinished);
}

#[test]
fn pro_caller_majority_rejects_an_honest_result() {
    let mut cfg = checks::honest_setter(2, 2);
    cfg.validators[0].mode = ValidatorMode::ProCaller;
    cfg.validators[1].mode = ValidatorMode::ProCaller;
    let trace = run_scenario(&cfg).unwrap();
    let top = trace.top_level().next().unwrap();
    assert_eq!(top.outcome, SummaryOutcome::Negative);
    assert_eq!(top.published_matches_target, Some(true));
}

#[test]
fn callback_delivers_the_result_to_the_caller_contract() {
    let cfg = checks::with_callback(single(2, 2, "get_string", vec![]));
    let trace = run_scenario(&cfg).unwrap();
    assert_eq!(verify_trace(&trace), Ok(()));
    let top = trace.top_level().next().unwrap();
    assert_eq!(top.value, Some(Value::String("hello".into())));
    let s = top.settlement.as_ref().unwrap();
    let report = s.callback.as_ref().expect("callback ran");
    assert!(s.paid(PayoutReason::CallbackGas) > 0);
    assert!(report.success && report.gas_used > 0);
}
