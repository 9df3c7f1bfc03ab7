//! Offline invariant checks over a finished trace.
//!
//! Checks run in a fixed order and stop at the first violation, so a
//! corrupted trace always reports the same invariant. Escrow is checked
//! before token totals: an edited delta on the distribution contract
//! surfaces as an escrow breach.

use std::collections::BTreeMap;
use std::fmt;

use crate::distribution::{select_winner, Offer, Phase};
use crate::simchain::{
    Call, DistributionCall, InvocationCall, TxStatus, DISTRIBUTION_ADDRESS,
};
use crate::types::{Address, ChainId};

use super::analytics::started_depth;
use super::trace::{ScenarioTrace, SummaryOutcome};
use super::config_hash;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// Kebab-case invariant name.
    pub invariant: &'static str,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.invariant, self.detail)
    }
}

impl std::error::Error for Violation {}

fn fail<T>(invariant: &'static str, detail: String) -> Result<T, Violation> {
    Err(Violation { invariant, detail })
}

/// Per-chain token conservation and per-invocation escrow conservation.
pub fn check_conservation(trace: &ScenarioTrace) -> bool {
    check_escrow(trace).and_then(|_| check_tokens(trace)).is_ok()
}

pub fn verify_trace(trace: &ScenarioTrace) -> Result<(), Violation> {
    check_header(trace)?;
    check_continuity(trace)?;
    check_gas(trace)?;
    check_escrow(trace)?;
    check_tokens(trace)?;
    check_phases(trace)?;
    check_intermediary(trace)?;
    check_summaries(trace)?;
    check_depth(trace)
}

fn check_header(trace: &ScenarioTrace) -> Result<(), Violation> {
    let expected = config_hash(&trace.header.config);
    if trace.header.config_hash != expected {
        return fail("config-hash", format!("header says {}, config hashes to {expected}", trace.header.config_hash));
    }
    if trace.header.seed != trace.header.config.seed {
        return fail("config-hash", "header seed differs from config seed".into());
    }
    Ok(())
}

fn check_continuity(trace: &ScenarioTrace) -> Result<(), Violation> {
    let chains: Vec<ChainId> = trace.header.config.chains.iter().map(|c| c.id).collect();
    let genesis: Vec<ChainId> = trace.genesis.iter().map(|g| g.chain).collect();
    let mut sorted = chains.clone();
    sorted.sort_unstable();
    if genesis != sorted {
        return fail("block-continuity", format!("genesis chains {genesis:?}, configured {sorted:?}"));
    }
    let mut expected: BTreeMap<ChainId, u64> = sorted.iter().map(|c| (*c, 1)).collect();
    let mut last = (0, ChainId(0));
    for block in &trace.blocks {
        let Some(next) = expected.get_mut(&block.chain) else {
            return fail("block-continuity", format!("block for unknown chain {}", block.chain));
        };
        if block.height != *next || (block.height, block.chain) < last {
            return fail(
                "block-continuity",
                format!("chain {} block {} where {} was expected", block.chain, block.height, next),
            );
        }
        *next += 1;
        last = (block.height, block.chain);
    }
    let heights: Vec<u64> = expected.values().map(|h| h - 1).collect();
    if heights.iter().any(|h| *h != trace.end.final_height) {
        return fail("block-continuity", format!("chains end at {heights:?}, end record says {}", trace.end.final_height));
    }
    Ok(())
}

fn check_gas(trace: &ScenarioTrace) -> Result<(), Violation> {
    for block in &trace.blocks {
        for r in &block.receipts {
            if r.gas_used > r.tx.gas_limit {
                return fail("gas-bound", format!("tx {} used {} of limit {}", r.tx_id.0, r.gas_used, r.tx.gas_limit));
            }
            if Some(r.fee) != r.gas_used.checked_mul(r.tx.gas_price) {
                return fail("gas-bound", format!("tx {} fee {} is not gas times price", r.tx_id.0, r.fee));
            }
        }
    }
    Ok(())
}

fn check_escrow(trace: &ScenarioTrace) -> Result<(), Violation> {
    let mut balance: BTreeMap<ChainId, u64> = trace
        .genesis
        .iter()
        .map(|g| (g.chain, g.balances.get(&DISTRIBUTION_ADDRESS).copied().unwrap_or(0)))
        .collect();
    for block in &trace.blocks {
        let b = balance.entry(block.chain).or_default();
        let delta = block.deltas.get(&DISTRIBUTION_ADDRESS).copied().unwrap_or(0);
        let Some(next) = b.checked_add_signed(delta) else {
            return fail("escrow-conservation", format!("contract balance negative on chain {} at {}", block.chain, block.height));
        };
        *b = next;
        let snap = block.escrow;
        if snap.contract_balance != next || snap.liabilities != next {
            return fail(
                "escrow-conservation",
                format!(
                    "chain {} block {}: balance from deltas {next}, snapshot {}, liabilities {}",
                    block.chain, block.height, snap.contract_balance, snap.liabilities
                ),
            );
        }
    }
    for s in &trace.invocations {
        if let Some(settlement) = &s.settlement {
            if settlement.escrow_paid() != s.deposit {
                return fail(
                    "escrow-conservation",
                    format!(
                        "invocation {}/{} paid {} out of a deposit of {}",
                        s.chain,
                        s.invocation_id,
                        settlement.escrow_paid(),
                        s.deposit
                    ),
                );
            }
        }
    }
    Ok(())
}

fn check_tokens(trace: &ScenarioTrace) -> Result<(), Violation> {
    let mut state: BTreeMap<ChainId, (BTreeMap<Address, u64>, u64)> = BTreeMap::new();
    for g in &trace.genesis {
        let sum: u128 = g.balances.values().map(|v| u128::from(*v)).sum::<u128>() + u128::from(g.gas_sink);
        if sum != u128::from(g.total) {
            return fail("token-conservation", format!("chain {} genesis sums to {sum}, total {}", g.chain, g.total));
        }
        state.insert(g.chain, (g.balances.clone(), g.gas_sink));
    }
    for block in &trace.blocks {
        let (balances, sink) = state.get_mut(&block.chain).expect("continuity checked");
        let mut net: i128 = 0;
        for (addr, delta) in &block.deltas {
            let b = balances.entry(*addr).or_default();
            let Some(next) = b.checked_add_signed(*delta) else {
                return fail("token-conservation", format!("{addr} negative on chain {} at {}", block.chain, block.height));
            };
            *b = next;
            net += i128::from(*delta);
        }
        let burned = i128::from(block.gas_sink) - i128::from(*sink);
        let fees: u64 = block.receipts.iter().map(|r| r.fee).sum();
        *sink = block.gas_sink;
        if net + burned != 0 {
            return fail(
                "token-conservation",
                format!("chain {} block {}: deltas {net}, burned {burned}", block.chain, block.height),
            );
        }
        if burned < i128::from(fees) {
            return fail(
                "token-conservation",
                format!("chain {} block {}: fees {fees} exceed burned {burned}", block.chain, block.height),
            );
        }
    }
    Ok(())
}

fn check_phases(trace: &ScenarioTrace) -> Result<(), Violation> {
    let mut last: BTreeMap<(ChainId, u64), Phase> = BTreeMap::new();
    for block in &trace.blocks {
        for change in &block.phase_changes {
            let key = (block.chain, change.invocation_id);
            if let Some(prev) = last.get(&key) {
                if change.phase.rank() < prev.rank() || prev.is_terminal() {
                    return fail(
                        "phase-monotonicity",
                        format!("{}/{} moved from {prev:?} to {:?} at {}", key.0, key.1, change.phase, block.height),
                    );
                }
            }
            last.insert(key, change.phase);
        }
    }
    Ok(())
}

fn check_intermediary(trace: &ScenarioTrace) -> Result<(), Violation> {
    let mut offers: BTreeMap<(ChainId, u64), Vec<Offer>> = BTreeMap::new();
    let mut executors: BTreeMap<(ChainId, u64), Vec<Address>> = BTreeMap::new();
    let mut publishers: BTreeMap<(ChainId, u64), Vec<Address>> = BTreeMap::new();
    for block in &trace.blocks {
        for r in block.receipts.iter().filter(|r| r.status == TxStatus::Success) {
            match &r.tx.call {
                Call::Distribution(DistributionCall::SubmitOffer { invocation_id, gas_price }) => {
                    offers.entry((block.chain, *invocation_id)).or_default().push(Offer {
                        invocation_id: *invocation_id,
                        intermediary: r.tx.sender,
                        gas_price: *gas_price,
                        locked_penalty: 0,
                        lock_active: false,
                        submitted_at: block.height,
                    });
                }
                Call::Distribution(DistributionCall::PublishResult { invocation_id, .. }) => {
                    publishers.entry((block.chain, *invocation_id)).or_default().push(r.tx.sender);
                }
                Call::Invocation(InvocationCall::Execute(args)) => {
                    executors
                        .entry((args.source_chain, args.invocation_id))
                        .or_default()
                        .push(r.tx.sender);
                }
                _ => {}
            }
        }
    }
    for s in &trace.invocations {
        let key = (s.chain, s.invocation_id);
        let submitted = offers.get(&key).map(Vec::as_slice).unwrap_or_default();
        let best = select_winner(s.invocation_id, submitted).map(|i| submitted[i].intermediary);
        if s.winner.is_some() && s.winner != best {
            return fail(
                "winner-optimality",
                format!("{}/{} winner {:?}, best offer from {best:?}", key.0, key.1, s.winner),
            );
        }
        for (role, senders) in [("executed", &executors), ("published", &publishers)] {
            let Some(list) = senders.get(&key) else { continue };
            if list.len() > 1 || s.winner.is_none_or(|w| list[0] != w) {
                return fail(
                    "single-intermediary",
                    format!("{}/{} {role} by {list:?}, winner {:?}", key.0, key.1, s.winner),
                );
            }
        }
    }
    Ok(())
}

fn check_summaries(trace: &ScenarioTrace) -> Result<(), Violation> {
    let mut finalized: BTreeMap<(ChainId, u64), u64> = BTreeMap::new();
    for block in &trace.blocks {
        for e in block.events.iter().filter(|e| e.topic == "Finalized") {
            if let Some(id) = crate::types::decode_values(&e.payload)
                .ok()
                .and_then(|v| v.first().and_then(|x| x.as_int()))
            {
                finalized.insert((block.chain, id as u64), block.height);
            }
        }
    }
    let mut unsettled = Vec::new();
    for s in &trace.invocations {
        let key = (s.chain, s.invocation_id);
        let at = s.settlement.as_ref().map(|x| x.settled_at);
        let consistent = at == s.finalized_at
            && finalized.get(&key).copied() == s.finalized_at
            && s.block_span == s.finalized_at.map(|f| f - s.registered_at)
            && (s.settlement.is_some() == !matches!(s.outcome, SummaryOutcome::VotingStalled | SummaryOutcome::Unfinished));
        if !consistent {
            return fail("summary-consistency", format!("invocation {}/{} disagrees with its blocks", key.0, key.1));
        }
        if s.settlement.is_none() {
            unsettled.push(key);
        }
    }
    if unsettled != trace.end.unsettled || trace.end.completed != unsettled.is_empty() {
        return fail("summary-consistency", format!("end record lists {:?}, summaries {unsettled:?}", trace.end.unsettled));
    }
    Ok(())
}

fn check_depth(trace: &ScenarioTrace) -> Result<(), Violation> {
    let Some(limit) = trace.header.config.recursion_depth_limit else {
        return Ok(());
    };
    for (chain, e) in trace.events("ExecutionStarted") {
        let depth = started_depth(&e.payload).unwrap_or(u32::MAX);
        if depth > limit {
            return fail("depth-limit", format!("execution at depth {depth} on chain {chain}, limit {limit}"));
        }
    }
    if let Some(s) = trace.invocations.iter().find(|s| s.depth > limit) {
        return fail("depth-limit", format!("invocation {}/{} at depth {}", s.chain, s.invocation_id, s.depth));
    }
    Ok(())
}
