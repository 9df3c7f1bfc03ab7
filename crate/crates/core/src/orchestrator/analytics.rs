//! Latency and gas reporting, parameter sweeps and the recursion attack.

use std::collections::BTreeMap;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::simchain::{OpKind, Receipt, TxStatus};
use crate::types::{decode_values, Address, Value};

use super::config::{AccountConfig, ConfigError, ScenarioConfig};
use super::trace::ScenarioTrace;
use super::{build_network, intermediary_addresses, run_scenario};

/// Blocks an honest single call takes from registration to finalization.
pub fn optimal_blocks(waiting_blocks: u64, blocks_per_phase: u64) -> u64 {
    5 * waiting_blocks + 2 * blocks_per_phase + 4
}

/// Blocks a manual call waits before its result counts as valid.
pub fn manual_baseline(waiting_blocks: u64) -> u64 {
    waiting_blocks
}

pub fn minutes(blocks: u64, seconds_per_block: u64) -> Ratio<u64> {
    Ratio::new(blocks * seconds_per_block, 60)
}

/// Minutes rounded half up.
pub fn rounded_minutes(blocks: u64, seconds_per_block: u64) -> u64 {
    (blocks * seconds_per_block + 30) / 60
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GasRow {
    pub kind: OpKind,
    pub count: u64,
    pub total: u64,
    pub min: u64,
    pub max: u64,
}

impl GasRow {
    fn new(kind: OpKind, gas: u64) -> Self {
        Self {
            kind,
            count: 1,
            total: gas,
            min: gas,
            max: gas,
        }
    }

    fn add(&mut self, gas: u64) {
        self.count += 1;
        self.total += gas;
        self.min = self.min.min(gas);
        self.max = self.max.max(gas);
    }

    pub fn mean(&self) -> u64 {
        self.total / self.count
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverheadReport {
    pub block_span: u64,
    pub manual_blocks: u64,
    /// `block_span / manual_blocks`.
    pub latency_factor: Ratio<u64>,
    /// Successful transactions by operation, plus the manual call.
    pub gas: Vec<GasRow>,
    /// All gas spent on the first finalized top-level call, by every party.
    pub cross_chain_gas: u64,
    /// Gas of the same call sent directly to the target chain.
    pub manual_gas: u64,
}

impl OverheadReport {
    pub fn row(&self, kind: OpKind) -> Option<&GasRow> {
        self.gas.iter().find(|r| r.kind == kind)
    }
}

/// Runs configured call `index` directly against the target chain's
/// genesis state, from a funded account.
pub fn direct_execution(config: &ScenarioConfig, index: usize) -> Option<(Receipt, Option<Value>)> {
    const MANUAL: &str = "manual-caller";
    let call = config.calls.get(index)?;
    let mut config = config.clone();
    config.chains.iter_mut().find(|c| c.id == call.target_chain)?.accounts.push(AccountConfig {
        name: MANUAL.into(),
        balance: u64::MAX / 4,
    });
    let network = build_network(&config);
    let chain = network.chain(call.target_chain).ok()?;
    Some(chain.dry_run_call(
        config.address_of(MANUAL),
        config.address_of(&call.callee),
        &call.method,
        &call.params,
        call.startgas + crate::agents::PROTOCOL_GAS_LIMIT,
    ))
}

/// Latency and gas overhead of the first finalized top-level call.
pub fn overhead_report(trace: &ScenarioTrace, config: &ScenarioConfig) -> Option<OverheadReport> {
    let summary = trace.top_level().find(|s| s.block_span.is_some())?;
    let block_span = summary.block_span?;
    let manual_blocks = manual_baseline(config.waiting_blocks);

    let mut rows: BTreeMap<OpKind, GasRow> = BTreeMap::new();
    let mut record = |kind: OpKind, gas: u64| {
        rows.entry(kind)
            .and_modify(|r| r.add(gas))
            .or_insert_with(|| GasRow::new(kind, gas));
    };
    for receipt in trace.blocks.iter().flat_map(|b| &b.receipts) {
        if receipt.status == TxStatus::Success {
            record(receipt.kind, receipt.gas_used);
        }
    }
    let mut manual_gas = 0;
    for i in 0..config.calls.len() {
        if let Some((receipt, _)) = direct_execution(config, i) {
            record(OpKind::ManualCall, receipt.gas_used);
            let call = &config.calls[i];
            let same = call.source_chain == summary.chain
                && config.address_of(&call.callee) == summary.callee
                && call.method == summary.method;
            if same && manual_gas == 0 {
                manual_gas = receipt.gas_used;
            }
        }
    }
    Some(OverheadReport {
        block_span,
        manual_blocks,
        latency_factor: Ratio::new(block_span, manual_blocks),
        gas: rows.into_values().collect(),
        cross_chain_gas: summary.gas_by_role.total(),
        manual_gas,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepCell {
    pub waiting_blocks: u64,
    pub blocks_per_phase: u64,
    pub optimal: u64,
    pub manual: u64,
    /// Span of the first top-level call, if it finalized.
    pub block_span: Option<u64>,
}

/// Simulates `config` for every `(w, b)` pair. Cells run on separate
/// threads; the result is ordered by `(w, b)`.
pub fn sweep(config: &ScenarioConfig, waiting: &[u64], phase: &[u64]) -> Result<Vec<SweepCell>, ConfigError> {
    let mut cells: Vec<(u64, u64)> = waiting
        .iter()
        .flat_map(|w| phase.iter().map(move |b| (*w, *b)))
        .collect();
    cells.sort_unstable();
    cells.dedup();
    let results: Vec<Result<SweepCell, ConfigError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = cells
            .iter()
            .map(|&(w, b)| {
                scope.spawn(move || {
                    let mut cfg = config.clone();
                    cfg.waiting_blocks = w;
                    cfg.blocks_per_phase = b;
                    let optimal = optimal_blocks(w, b);
                    let last = cfg.calls.iter().map(|c| c.at_block).max().unwrap_or(0);
                    cfg.max_blocks = cfg.max_blocks.max(last + 2 * optimal);
                    let trace = run_scenario(&cfg)?;
                    let block_span = trace.top_level().find_map(|s| s.block_span);
                    Ok(SweepCell {
                        waiting_blocks: w,
                        blocks_per_phase: b,
                        optimal,
                        manual: manual_baseline(w),
                        block_span,
                    })
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep cell panicked"))
            .collect()
    });
    results.into_iter().collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecursionReport {
    pub trace: ScenarioTrace,
    /// Executions started for nested calls, i.e. at depth one or more.
    pub nested_executions: usize,
    pub max_depth: u32,
    /// Every registered invocation was settled before the block budget.
    pub terminated: bool,
    /// Summed intermediary balances over all chains, per height.
    pub intermediary_funds: Vec<u64>,
}

impl RecursionReport {
    pub fn drained_monotonically(&self) -> bool {
        self.intermediary_funds.windows(2).all(|w| w[1] <= w[0])
    }
}

/// Depth carried in an `ExecutionStarted` payload.
pub(crate) fn started_depth(payload: &[u8]) -> Option<u32> {
    let values = decode_values(payload).ok()?;
    u32::try_from(values.get(3)?.as_int()?).ok()
}

/// Runs a scenario built around mutually recursive callees and measures
/// how far the recursion got.
pub fn run_recursive_attack(config: &ScenarioConfig) -> Result<RecursionReport, ConfigError> {
    let trace = run_scenario(config)?;
    let depths: Vec<u32> = trace
        .events("ExecutionStarted")
        .filter_map(|(_, e)| started_depth(&e.payload))
        .collect();

    let watched: Vec<Address> = intermediary_addresses(config).into_iter().collect();
    let mut funds: u64 = trace
        .genesis
        .iter()
        .flat_map(|g| watched.iter().map(|a| g.balances.get(a).copied().unwrap_or(0)))
        .sum();
    let mut series = vec![funds];
    let mut current = None;
    for block in &trace.blocks {
        if current != Some(block.height) {
            if current.is_some() {
                series.push(funds);
            }
            current = Some(block.height);
        }
        let delta: i64 = watched.iter().filter_map(|a| block.deltas.get(a)).sum();
        funds = funds.checked_add_signed(delta).expect("balances stay non-negative");
    }
    if current.is_some() {
        series.push(funds);
    }

    Ok(RecursionReport {
        nested_executions: depths.iter().filter(|d| **d > 0).count(),
        max_depth: depths.into_iter().max().unwrap_or(0),
        terminated: trace.end.completed,
        intermediary_funds: series,
        trace,
    })
}
