//! Replayable run record, stored as JSON lines.
//!
//! Line order: header, one genesis record per chain, block records ordered
//! by `(height, chain)`, one summary per invocation, end record.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distribution::{ExecutionStatusClaim, MisbehaviorRound, PhaseChange, Settlement};
use crate::invocation::ExecutionRecord;
use crate::simchain::{EscrowSnapshot, Event, Receipt};
use crate::types::{Address, ChainId, Value};

use super::config::ScenarioConfig;

pub const TRACE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub version: u32,
    pub seed: u64,
    /// SHA-256 of the config's canonical JSON.
    pub config_hash: String,
    pub config: ScenarioConfig,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenesisRecord {
    pub chain: ChainId,
    pub balances: BTreeMap<Address, u64>,
    pub gas_sink: u64,
    pub total: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockRecord {
    pub chain: ChainId,
    pub height: u64,
    pub receipts: Vec<Receipt>,
    pub events: Vec<Event>,
    pub deltas: BTreeMap<Address, i64>,
    pub gas_sink: u64,
    pub phase_changes: Vec<PhaseChange>,
    pub escrow: EscrowSnapshot,
    /// Actions agents skipped before this block.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SummaryOutcome {
    Positive,
    Negative,
    StepsMismatch,
    Aborted,
    Fraudulent,
    /// A result was published but nobody voted.
    VotingStalled,
    Unfinished,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GasByRole {
    pub caller: u64,
    pub intermediary: u64,
    pub validator: u64,
    /// Gas paid by contracts or unknown senders.
    pub other: u64,
}

impl GasByRole {
    pub fn total(&self) -> u64 {
        self.caller + self.intermediary + self.validator + self.other
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvocationSummary {
    pub chain: ChainId,
    pub invocation_id: u64,
    pub caller: Address,
    pub target_chain: ChainId,
    pub callee: Address,
    pub method: String,
    pub depth: u32,
    pub deposit: u64,
    pub registered_at: u64,
    pub finalized_at: Option<u64>,
    pub block_span: Option<u64>,
    pub outcome: SummaryOutcome,
    /// Only set after a positive finalization.
    pub status: Option<ExecutionStatusClaim>,
    pub value: Option<Value>,
    pub winner: Option<Address>,
    pub winning_price: Option<u64>,
    pub settlement: Option<Settlement>,
    pub misbehavior: Vec<MisbehaviorRound>,
    pub execution: Option<ExecutionRecord>,
    /// Whether the published status and value equal the target-chain record.
    pub published_matches_target: Option<bool>,
    pub gas_by_role: GasByRole,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EndRecord {
    pub final_height: u64,
    /// Every registered invocation was settled.
    pub completed: bool,
    pub unsettled: Vec<(ChainId, u64)>,
    pub stop_reason: StopReason,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    AllSettled,
    Quiescent,
    BlockBudget,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum TraceRecord {
    Header(TraceHeader),
    Genesis(GenesisRecord),
    Block(BlockRecord),
    Invocation(Box<InvocationSummary>),
    End(EndRecord),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioTrace {
    pub header: TraceHeader,
    pub genesis: Vec<GenesisRecord>,
    pub blocks: Vec<BlockRecord>,
    pub invocations: Vec<InvocationSummary>,
    pub end: EndRecord,
}

#[derive(Debug, Error)]
pub enum TraceParseError {
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("trace has no header")]
    MissingHeader,
    #[error("trace has no end record")]
    MissingEnd,
    #[error("line {0}: record out of order")]
    OutOfOrder(usize),
}

impl ScenarioTrace {
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let mut line = |r: &TraceRecord| {
            out.push_str(&serde_json::to_string(r).expect("trace serializes"));
            out.push('\n');
        };
        line(&TraceRecord::Header(self.header.clone()));
        self.genesis.iter().for_each(|g| line(&TraceRecord::Genesis(g.clone())));
        self.blocks.iter().for_each(|b| line(&TraceRecord::Block(b.clone())));
        self.invocations
            .iter()
            .for_each(|s| line(&TraceRecord::Invocation(Box::new(s.clone()))));
        line(&TraceRecord::End(self.end.clone()));
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, TraceParseError> {
        let mut header = None;
        let mut genesis = Vec::new();
        let mut blocks = Vec::new();
        let mut invocations = Vec::new();
        let mut end = None;
        for (i, raw) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let line = i + 1;
            let record: TraceRecord =
                serde_json::from_str(raw).map_err(|source| TraceParseError::Json { line, source })?;
            if end.is_some() {
                return Err(TraceParseError::OutOfOrder(line));
            }
            match record {
                TraceRecord::Header(h) if header.is_none() => header = Some(h),
                TraceRecord::Header(_) => return Err(TraceParseError::OutOfOrder(line)),
                _ if header.is_none() => return Err(TraceParseError::MissingHeader),
                TraceRecord::Genesis(g) => genesis.push(g),
                TraceRecord::Block(b) => blocks.push(b),
                TraceRecord::Invocation(s) => invocations.push(*s),
                TraceRecord::End(e) => end = Some(e),
            }
        }
        Ok(Self {
            header: header.ok_or(TraceParseError::MissingHeader)?,
            genesis,
            blocks,
            invocations,
            end: end.ok_or(TraceParseError::MissingEnd)?,
        })
    }

    pub fn summary(&self, chain: ChainId, invocation_id: u64) -> Option<&InvocationSummary> {
        self.invocations
            .iter()
            .find(|s| s.chain == chain && s.invocation_id == invocation_id)
    }

    /// Invocations registered by accounts rather than by callees.
    pub fn top_level(&self) -> impl Iterator<Item = &InvocationSummary> {
        self.invocations.iter().filter(|s| s.depth == 0)
    }

    pub fn events<'a>(&'a self, topic: &'a str) -> impl Iterator<Item = (ChainId, &'a Event)> + 'a {
        self.blocks
            .iter()
            .flat_map(|b| b.events.iter().map(move |e| (b.chain, e)))
            .filter(move |(_, e)| e.topic == topic)
    }
}
