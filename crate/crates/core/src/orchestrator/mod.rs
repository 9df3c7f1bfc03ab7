//! Scenario engine.
//!
//! [`run_scenario`] builds every chain from a [`ScenarioConfig`], then
//! repeats one step per block height:
//!
//! 1. every agent observes the network as of height `H`, in roster order
//!    (callers, intermediaries, validators);
//! 2. their transactions are submitted;
//! 3. every chain mines block `H + 1`.
//!
//! The run ends when all calls are settled, when nothing has happened for
//! longer than any protocol timeout, or at the block budget.

mod analytics;
mod config;
mod trace;
mod verify;

use std::collections::{BTreeMap, BTreeSet};

pub use analytics::{
    direct_execution, manual_baseline, minutes, optimal_blocks, overhead_report, rounded_minutes,
    run_recursive_attack, sweep, GasRow, OverheadReport, RecursionReport, SweepCell,
};
pub use config::{
    ratio_str, AccountConfig, CallConfig, ChainConfig, ConfigError, ContractConfig, FaultInjection,
    FeeConfig, IntermediaryConfig, RelayConfig, ScenarioConfig, ValidatorConfig,
};
pub use trace::{
    BlockRecord, EndRecord, GasByRole, GenesisRecord, InvocationSummary, ScenarioTrace, StopReason,
    SummaryOutcome, TraceHeader, TraceParseError, TraceRecord, TRACE_VERSION,
};
pub use verify::{check_conservation, verify_trace, Violation};

use crate::agents::{
    Agent, CallPlan, CallerAgent, IntermediaryAgent, IntermediaryPolicy, Observation, StepOutput,
    Timing, ValidatorAgent,
};
use crate::distribution::{
    required_deposit, DistributionContract, FinalOutcome, Phase, ProtocolParams,
};
use crate::hash::sha256_hex;
use crate::invocation::{RelaySpec, TestContract};
use crate::simchain::{
    Block, Call, ChainParams, DistributionCall, InvocationCall, Ledger, Network, Receipt,
    RegisterArgs, SimChain, World, DISTRIBUTION_ADDRESS, INVOCATION_ADDRESS,
};
use crate::types::{Address, ChainId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Caller,
    Intermediary,
    Validator,
}

/// A fully built scenario, ready to run.
pub struct Scenario {
    pub config: ScenarioConfig,
    pub network: Network,
    pub agents: Vec<Box<dyn Agent>>,
    pub roles: BTreeMap<Address, Role>,
}

/// Result of a run: the trace plus the final network state.
pub struct RunOutput {
    pub trace: ScenarioTrace,
    pub network: Network,
}

pub fn config_hash(config: &ScenarioConfig) -> String {
    sha256_hex(&serde_json::to_vec(config).expect("config serializes"))
}

pub fn protocol_params(config: &ScenarioConfig) -> ProtocolParams {
    ProtocolParams {
        waiting_blocks: config.waiting_blocks,
        blocks_per_phase: config.blocks_per_phase,
        misbehavior_timeout: config.misbehavior_timeout,
        intermediaries: config.intermediaries.iter().map(|i| config.address_of(&i.name)).collect(),
        validators: config.validators.iter().map(|v| config.address_of(&v.name)).collect(),
        penalty_stake: config.penalty_stake,
        penalty_validator_share: config.penalty_validator_share,
        initiator_stake: config.initiator_stake,
        recursion_depth_limit: config.recursion_depth_limit,
        known_chains: config.chains.iter().map(|c| c.id).collect(),
        double_refund_bug: config.fault_injection.double_refund,
    }
}

/// The registration a configured call turns into.
pub fn register_args(config: &ScenarioConfig, call: &CallConfig) -> RegisterArgs {
    let intermediary_fee = call.intermediary_fee.unwrap_or(config.fees.intermediary);
    let validator_fee = call.validator_fee.unwrap_or(config.fees.validator);
    let minimum = required_deposit(
        call.max_gas_price,
        call.startgas,
        intermediary_fee + validator_fee,
        call.callback.as_ref(),
    )
    .unwrap_or(u64::MAX);
    RegisterArgs {
        target_chain: call.target_chain,
        callee: config.address_of(&call.callee),
        method: call.method.clone(),
        params: call.params.clone(),
        startgas: call.startgas,
        max_gas_price: call.max_gas_price,
        intermediary_fee,
        validator_fee,
        callback: call.callback.clone(),
        deposit: call.deposit.unwrap_or(minimum),
    }
}

fn relay_spec(config: &ScenarioConfig, relay: &RelayConfig) -> RelaySpec {
    RelaySpec {
        target_chain: relay.target_chain,
        callee: config.address_of(&relay.callee),
        method: relay.method.clone(),
        params: relay.params.clone(),
        startgas: relay.startgas,
        max_gas_price: relay.max_gas_price,
        intermediary_fee: relay.intermediary_fee.unwrap_or(config.fees.intermediary),
        validator_fee: relay.validator_fee.unwrap_or(config.fees.validator),
        repeat: relay.repeat,
    }
}

/// Genesis state of one chain.
pub fn build_chain(config: &ScenarioConfig, chain: &ChainConfig) -> SimChain {
    let mut ledger = Ledger::new();
    ledger.open(DISTRIBUTION_ADDRESS);
    ledger.open(INVOCATION_ADDRESS);
    let mut distribution = DistributionContract::new(protocol_params(config));
    let mut contracts = BTreeMap::new();
    for a in &chain.accounts {
        ledger.mint(config.address_of(&a.name), a.balance);
    }
    for k in &chain.contracts {
        let addr = config.address_of(&k.name);
        ledger.mint(addr, k.balance);
        let mut contract = TestContract::new(addr, k.name.clone());
        contract.storage = k.storage.clone();
        contract.relay = k.relay.as_ref().map(|r| relay_spec(config, r));
        contracts.insert(addr, contract);
    }
    for i in &config.intermediaries {
        let addr = config.address_of(&i.name);
        ledger.mint(addr, i.balance);
        ledger.mint(DISTRIBUTION_ADDRESS, i.depot);
        distribution.genesis_depot(addr, i.depot);
    }
    for v in &config.validators {
        ledger.mint(config.address_of(&v.name), v.balance);
    }
    // callers that asked for a callback receive it in a contract at their address
    for call in config.calls.iter().filter(|c| c.source_chain == chain.id && c.callback.is_some()) {
        let addr = config.address_of(&call.caller);
        contracts
            .entry(addr)
            .or_insert_with(|| TestContract::new(addr, call.caller.clone()));
    }
    let params = ChainParams {
        id: chain.id,
        gas_price: chain.gas_price,
        costs: chain.gas_costs,
    };
    SimChain::new(params, World::new(ledger, distribution, contracts))
}

pub fn build_network(config: &ScenarioConfig) -> Network {
    let mut network = Network::new();
    for chain in &config.chains {
        network.add_chain(build_chain(config, chain));
    }
    network
}

pub fn build(config: &ScenarioConfig) -> Result<Scenario, ConfigError> {
    config.validate()?;
    let network = build_network(config);
    let mut agents: Vec<Box<dyn Agent>> = Vec::new();
    let mut roles = BTreeMap::new();

    let mut callers: Vec<&str> = Vec::new();
    for call in &config.calls {
        if !callers.contains(&call.caller.as_str()) {
            callers.push(&call.caller);
        }
    }
    for name in callers {
        let plans = config
            .calls
            .iter()
            .filter(|c| c.caller == name)
            .map(|c| CallPlan {
                source_chain: c.source_chain,
                args: register_args(config, c),
                at_block: c.at_block,
            })
            .collect();
        let addr = config.address_of(name);
        roles.insert(addr, Role::Caller);
        agents.push(Box::new(CallerAgent::new(name, addr, plans)));
    }
    for i in &config.intermediaries {
        let addr = config.address_of(&i.name);
        roles.insert(addr, Role::Intermediary);
        let policy = IntermediaryPolicy {
            mode: i.mode,
            margin: i.margin,
            inflation_factor: i.inflation_factor,
        };
        agents.push(Box::new(IntermediaryAgent::new(&i.name, addr, policy)));
    }
    for v in &config.validators {
        let addr = config.address_of(&v.name);
        roles.insert(addr, Role::Validator);
        agents.push(Box::new(ValidatorAgent::new(&v.name, addr, v.mode)));
    }
    Ok(Scenario {
        config: config.clone(),
        network,
        agents,
        roles,
    })
}

pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioTrace, ConfigError> {
    run(config).map(|o| o.trace)
}

pub fn run(config: &ScenarioConfig) -> Result<RunOutput, ConfigError> {
    let Scenario {
        config,
        mut network,
        mut agents,
        roles,
    } = build(config)?;

    let timing = Timing {
        waiting_blocks: config.waiting_blocks,
        blocks_per_phase: config.blocks_per_phase,
        misbehavior_timeout: config.misbehavior_timeout,
        initiator_stake: config.initiator_stake,
    };
    let header = TraceHeader {
        version: TRACE_VERSION,
        seed: config.seed,
        config_hash: config_hash(&config),
        config: config.clone(),
    };
    let genesis = network
        .chains()
        .map(|c| GenesisRecord {
            chain: c.id(),
            balances: c.ledger().balances().clone(),
            gas_sink: c.ledger().gas_sink(),
            total: u64::try_from(c.genesis_total()).expect("genesis supply fits in u64"),
        })
        .collect();

    let last_registration = config.calls.iter().map(|c| c.at_block).max().unwrap_or(0);
    let quiet_limit =
        config.misbehavior_timeout + 4 * config.waiting_blocks + 2 * config.blocks_per_phase + 8;
    let mut blocks = Vec::new();
    let mut quiet = 0;
    let mut stop_reason = StopReason::BlockBudget;
    let chain_ids = network.chain_ids();

    for height in 0..config.max_blocks {
        let mut out = StepOutput::default();
        {
            let obs = Observation {
                network: &network,
                height,
                timing,
                exchange_rate: config.exchange_rate,
            };
            for agent in agents.iter_mut() {
                agent.step(&obs, &mut out);
            }
        }
        let acted = !out.actions.is_empty();
        for action in out.actions {
            if let Err(e) = network.submit_transaction(action.chain, action.tx) {
                out.notes.push(format!("rejected at admission on {}: {e}", action.chain));
            }
        }
        let mut notes = Some(out.notes);
        for id in &chain_ids {
            let block = network.mine_block(*id).expect("chain exists");
            blocks.push(block_record(block, notes.take().unwrap_or_default()));
        }

        quiet = if acted { 0 } else { quiet + 1 };
        let next = height + 1;
        if next >= last_registration && all_settled(&network) {
            stop_reason = StopReason::AllSettled;
            break;
        }
        if next >= last_registration && quiet >= quiet_limit {
            stop_reason = StopReason::Quiescent;
            break;
        }
    }

    let final_height = network.chains().map(SimChain::height).max().unwrap_or(0);
    let invocations = summarize(&network, &blocks, &roles);
    let unsettled: Vec<_> = invocations
        .iter()
        .filter(|s| s.settlement.is_none())
        .map(|s| (s.chain, s.invocation_id))
        .collect();
    let trace = ScenarioTrace {
        header,
        genesis,
        blocks,
        invocations,
        end: EndRecord {
            final_height,
            completed: unsettled.is_empty(),
            unsettled,
            stop_reason,
        },
    };
    Ok(RunOutput { trace, network })
}

fn all_settled(network: &Network) -> bool {
    network
        .chains()
        .all(|c| c.pending_len() == 0 && c.world().distribution.records().all(|r| r.is_settled()))
}

fn block_record(block: &Block, notes: Vec<String>) -> BlockRecord {
    BlockRecord {
        chain: block.chain,
        height: block.height,
        receipts: block.receipts.clone(),
        events: block.events.clone(),
        deltas: block
            .balance_deltas
            .iter()
            .map(|(a, d)| (*a, i64::try_from(*d).expect("delta fits in i64")))
            .collect(),
        gas_sink: block.gas_sink,
        phase_changes: block.phase_changes.clone(),
        escrow: block.escrow,
        notes,
    }
}

/// Source-side invocation a receipt belongs to, failed ones included.
pub fn receipt_invocation(network: &Network, chain: ChainId, receipt: &Receipt) -> Option<(ChainId, u64)> {
    if let Some(r) = receipt.invocation {
        return Some((r.chain, r.invocation_id));
    }
    match &receipt.tx.call {
        Call::Distribution(call) => match call {
            DistributionCall::Register(_) | DistributionCall::DepositToDepot { .. } => None,
            DistributionCall::SubmitOffer { invocation_id, .. }
            | DistributionCall::DetermineWinner { invocation_id }
            | DistributionCall::ReportPending { invocation_id, .. }
            | DistributionCall::PublishResult { invocation_id, .. }
            | DistributionCall::SubmitVote { invocation_id, .. }
            | DistributionCall::Finalize { invocation_id }
            | DistributionCall::StartMisbehaviorVote { invocation_id, .. }
            | DistributionCall::MisbehaviorVote { invocation_id, .. }
            | DistributionCall::ResolveMisbehavior { invocation_id } => Some((chain, *invocation_id)),
        },
        Call::Invocation(InvocationCall::Execute(args)) => Some((args.source_chain, args.invocation_id)),
        Call::Invocation(InvocationCall::CompletePending { execution_id }) => network
            .chain(chain)
            .ok()?
            .world()
            .invocation
            .get_execution(*execution_id)
            .ok()
            .map(|e| (e.source_chain, e.invocation_id)),
        Call::Contract { .. } => None,
    }
}

fn summarize(
    network: &Network,
    blocks: &[BlockRecord],
    roles: &BTreeMap<Address, Role>,
) -> Vec<InvocationSummary> {
    let mut gas: BTreeMap<(ChainId, u64), GasByRole> = BTreeMap::new();
    for block in blocks {
        for receipt in &block.receipts {
            let Some(key) = receipt_invocation(network, block.chain, receipt) else {
                continue;
            };
            let row = gas.entry(key).or_default();
            match roles.get(&receipt.tx.sender) {
                Some(Role::Caller) => row.caller += receipt.gas_used,
                Some(Role::Intermediary) => row.intermediary += receipt.gas_used,
                Some(Role::Validator) => row.validator += receipt.gas_used,
                None => row.other += receipt.gas_used,
            }
        }
    }

    let mut out = Vec::new();
    for chain in network.chains() {
        let dist = &chain.world().distribution;
        for rec in dist.records() {
            let key = (chain.id(), rec.invocation_id);
            let settlement = rec.settlement.clone();
            let outcome = match (&settlement, rec.phase) {
                (Some(s), _) => match s.outcome {
                    FinalOutcome::Positive => SummaryOutcome::Positive,
                    FinalOutcome::Negative => SummaryOutcome::Negative,
                    FinalOutcome::StepsMismatch => SummaryOutcome::StepsMismatch,
                    FinalOutcome::Aborted => SummaryOutcome::Aborted,
                    FinalOutcome::Fraudulent => SummaryOutcome::Fraudulent,
                },
                (None, Phase::ResultPublished) => SummaryOutcome::VotingStalled,
                (None, _) => SummaryOutcome::Unfinished,
            };
            let view = dist
                .get_result(rec.invocation_id, chain.height())
                .expect("record exists");
            let execution = rec.published.as_ref().and_then(|p| {
                network
                    .chain(rec.target_chain)
                    .ok()?
                    .world()
                    .invocation
                    .get_execution(p.execution_id)
                    .ok()
                    .cloned()
            });
            let execution = execution.or_else(|| {
                network
                    .chain(rec.target_chain)
                    .ok()?
                    .world()
                    .invocation
                    .find(chain.id(), rec.invocation_id)
                    .cloned()
            });
            let published_matches_target = rec.published.as_ref().map(|p| {
                execution.as_ref().is_some_and(|e| {
                    e.status.claim() == Some(p.status) && e.return_value == p.return_value
                })
            });
            let finalized_at = settlement.as_ref().map(|s| s.settled_at);
            out.push(InvocationSummary {
                chain: chain.id(),
                invocation_id: rec.invocation_id,
                caller: rec.caller,
                target_chain: rec.target_chain,
                callee: rec.callee,
                method: rec.method.clone(),
                depth: rec.depth,
                deposit: rec.deposit,
                registered_at: rec.registered_at,
                finalized_at,
                block_span: finalized_at.map(|f| f - rec.registered_at),
                outcome,
                status: view.status,
                value: view.return_value,
                winner: rec.winner_at(chain.height()),
                winning_price: rec.winning_offer().map(|o| o.gas_price),
                settlement,
                misbehavior: rec.misbehavior.clone(),
                execution,
                published_matches_target,
                gas_by_role: gas.get(&key).copied().unwrap_or_default(),
            });
        }
    }
    out
}

/// Addresses of all configured intermediaries.
pub fn intermediary_addresses(config: &ScenarioConfig) -> BTreeSet<Address> {
    protocol_params(config).intermediaries
}
