//! Scenario builders shared by the integration tests.
#![allow(dead_code)]

pub mod checks;

use std::collections::BTreeMap;

use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use xchain_core::agents::{IntermediaryMode, ValidatorMode};
use xchain_core::distribution::CallbackSpec;
use xchain_core::orchestrator::{
    AccountConfig, CallConfig, ChainConfig, ContractConfig, FaultInjection, FeeConfig,
    IntermediaryConfig, RelayConfig, ScenarioConfig, ValidatorConfig,
};
use xchain_core::simchain::GasCostTable;
use xchain_core::{ChainId, Value};

pub const SOURCE: ChainId = ChainId(0);
pub const TARGET: ChainId = ChainId(1);
pub const STARTGAS: u64 = 20_000;
pub const MAX_PRICE: u64 = 5;
pub const RICH: u64 = 1_000_000_000;

pub fn store() -> ContractConfig {
    let storage = BTreeMap::from([
        ("int".to_string(), Value::Int(7)),
        ("string".to_string(), Value::String("hello".into())),
        ("bytes".to_string(), Value::Bytes(vec![0xde, 0xad])),
    ]);
    ContractConfig {
        name: "store".into(),
        balance: 0,
        storage,
        relay: None,
    }
}

pub fn intermediary(name: &str, mode: IntermediaryMode) -> IntermediaryConfig {
    IntermediaryConfig {
        name: name.into(),
        mode,
        margin: Ratio::from_integer(1),
        inflation_factor: 2,
        balance: RICH,
        depot: 1_000_000,
    }
}

pub fn validator(name: &str, mode: ValidatorMode) -> ValidatorConfig {
    ValidatorConfig {
        name: name.into(),
        mode,
        balance: RICH,
    }
}

pub fn call(method: &str, params: Vec<Value>) -> CallConfig {
    CallConfig {
        caller: "alice".into(),
        source_chain: SOURCE,
        target_chain: TARGET,
        callee: "store".into(),
        method: method.into(),
        params,
        startgas: STARTGAS,
        max_gas_price: MAX_PRICE,
        at_block: 1,
        deposit: None,
        intermediary_fee: None,
        validator_fee: None,
        callback: None,
    }
}

pub fn callback() -> CallbackSpec {
    CallbackSpec {
        method: "on_result".into(),
        cb_startgas: 5_000,
        cb_gas_price: 2,
    }
}

/// Two chains, a store contract on the target, one honest intermediary
/// and three honest validators. No calls.
pub fn base(seed: u64, waiting: u64, phase: u64) -> ScenarioConfig {
    ScenarioConfig {
        seed,
        waiting_blocks: waiting,
        blocks_per_phase: phase,
        misbehavior_timeout: 1000,
        exchange_rate: Ratio::from_integer(1),
        max_blocks: 5000,
        recursion_depth_limit: Some(3),
        penalty_stake: None,
        penalty_validator_share: Ratio::new(1, 2),
        initiator_stake: 100,
        fees: FeeConfig::default(),
        chains: vec![
            ChainConfig {
                id: SOURCE,
                gas_price: 2,
                gas_costs: GasCostTable::default(),
                accounts: vec![AccountConfig {
                    name: "alice".into(),
                    balance: RICH,
                }],
                contracts: vec![],
            },
            ChainConfig {
                id: TARGET,
                gas_price: 3,
                gas_costs: GasCostTable::default(),
                accounts: vec![],
                contracts: vec![store()],
            },
        ],
        intermediaries: vec![intermediary("ivy", IntermediaryMode::Honest)],
        validators: ["vera", "vic", "val"]
            .into_iter()
            .map(|n| validator(n, ValidatorMode::Honest))
            .collect(),
        calls: vec![],
        fault_injection: FaultInjection::default(),
    }
}

/// `base` with one call.
pub fn single(waiting: u64, phase: u64, method: &str, params: Vec<Value>) -> ScenarioConfig {
    let mut cfg = base(1, waiting, phase);
    cfg.calls.push(call(method, params));
    cfg
}

fn relay(target_chain: ChainId, callee: &str) -> RelayConfig {
    RelayConfig {
        target_chain,
        callee: callee.into(),
        method: "relay".into(),
        params: vec![],
        startgas: STARTGAS,
        max_gas_price: MAX_PRICE,
        intermediary_fee: None,
        validator_fee: None,
        repeat: 1,
    }
}

fn relay_contract(name: &str, relay: Option<RelayConfig>) -> ContractConfig {
    ContractConfig {
        name: name.into(),
        balance: RICH,
        storage: BTreeMap::new(),
        relay,
    }
}

/// `outer` on the target relays to `middle` on the source, which relays
/// to `inner.leaf` on the target: two nested levels below the top call.
pub fn benign_recursion(limit: Option<u32>) -> ScenarioConfig {
    let mut cfg = base(3, 1, 1);
    cfg.recursion_depth_limit = limit;
    let mut inner_relay = relay(TARGET, "inner");
    inner_relay.method = "leaf".into();
    cfg.chains[0].contracts.push(relay_contract("middle", Some(inner_relay)));
    cfg.chains[1].contracts.push(relay_contract("outer", Some(relay(SOURCE, "middle"))));
    cfg.chains[1].contracts.push(relay_contract("inner", None));
    let mut c = call("relay", vec![]);
    c.callee = "outer".into();
    cfg.calls.push(c);
    cfg
}

/// `ping` and `pong` relay to each other forever.
pub fn mutual_recursion(limit: Option<u32>, max_blocks: u64) -> ScenarioConfig {
    let mut cfg = base(4, 1, 1);
    cfg.recursion_depth_limit = limit;
    cfg.max_blocks = max_blocks;
    cfg.chains[0].contracts.push(relay_contract("pong", Some(relay(TARGET, "ping"))));
    cfg.chains[1].contracts.push(relay_contract("ping", Some(relay(SOURCE, "pong"))));
    let mut c = call("relay", vec![]);
    c.callee = "ping".into();
    cfg.calls.push(c);
    cfg
}

const INTERMEDIARY_MODES: [IntermediaryMode; 5] = [
    IntermediaryMode::Honest,
    IntermediaryMode::NoShow,
    IntermediaryMode::WrongResult,
    IntermediaryMode::InflatedSteps,
    IntermediaryMode::NoForward,
];

const VALIDATOR_MODES: [ValidatorMode; 5] = [
    ValidatorMode::Honest,
    ValidatorMode::MajorityFollower,
    ValidatorMode::ProCaller,
    ValidatorMode::ProIntermediary,
    ValidatorMode::Watchdog,
];

fn random_call(rng: &mut ChaCha8Rng, caller: &str) -> CallConfig {
    let (method, params) = match rng.gen_range(0..9) {
        0 => ("get_int", vec![]),
        1 => ("get_string", vec![]),
        2 => ("get_bytes", vec![]),
        3 => ("set_int", vec![Value::Int(rng.gen_range(-1000..1000))]),
        4 => ("set_string", vec![Value::String(format!("s{}", rng.gen::<u16>()))]),
        5 => ("set_bytes", vec![Value::Bytes(rng.gen::<[u8; 4]>().to_vec())]),
        6 => ("echo", vec![Value::Int(rng.gen())]),
        7 => ("burn", vec![Value::Int(rng.gen_range(0..30_000))]),
        _ => ("revert", vec![]),
    };
    let mut c = call(method, params);
    c.caller = caller.into();
    c.at_block = rng.gen_range(1..6);
    c.max_gas_price = rng.gen_range(3..10);
    c.startgas = rng.gen_range(5_000..25_000);
    if rng.gen_bool(0.25) {
        c.callback = Some(callback());
    }
    if rng.gen_bool(0.2) {
        c.intermediary_fee = Some(rng.gen_range(0..200));
        c.validator_fee = Some(rng.gen_range(0..200));
    }
    c
}

/// Random mix of rosters, behaviours and calls. Short timeouts keep
/// misbehavior rounds inside the block budget.
pub fn random_scenario(seed: u64) -> ScenarioConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cfg = base(seed, rng.gen_range(1..4), rng.gen_range(1..4));
    cfg.misbehavior_timeout = rng.gen_range(5..30);
    cfg.max_blocks = 400;
    cfg.exchange_rate = Ratio::new(rng.gen_range(1..3), rng.gen_range(1..3));
    cfg.penalty_validator_share = Ratio::new(rng.gen_range(0..=4), 4);
    if rng.gen_bool(0.3) {
        cfg.penalty_stake = Some(rng.gen_range(0..500));
    }
    cfg.chains[0].gas_price = rng.gen_range(1..4);
    cfg.chains[1].gas_price = rng.gen_range(1..4);
    cfg.chains[0].accounts.push(AccountConfig {
        name: "bob".into(),
        balance: RICH,
    });

    let n_int = if rng.gen_bool(0.1) { 0 } else { rng.gen_range(1..4) };
    cfg.intermediaries = (0..n_int)
        .map(|i| {
            let mut c = intermediary(&format!("i{i}"), *INTERMEDIARY_MODES.choose(&mut rng).unwrap());
            c.margin = Ratio::new(rng.gen_range(4..7), 4);
            c.inflation_factor = rng.gen_range(2..4);
            if rng.gen_bool(0.15) {
                c.depot = rng.gen_range(0..150);
            }
            c
        })
        .collect();
    let n_val = rng.gen_range(0..5);
    cfg.validators = (0..n_val)
        .map(|i| validator(&format!("v{i}"), *VALIDATOR_MODES.choose(&mut rng).unwrap()))
        .collect();
    let n_calls = rng.gen_range(1..4);
    cfg.calls = (0..n_calls)
        .map(|_| {
            let caller = if rng.gen_bool(0.5) { "alice" } else { "bob" };
            random_call(&mut rng, caller)
        })
        .collect();
    cfg
}
