//! Target-chain contract that runs a forwarded call and keeps its inputs
//! and outputs for validators.
//!
//! A callee that itself needs a cross-chain call leaves its execution
//! `Pending`. The nested call is registered on this chain's distribution
//! contract with the depth counter raised by one. Once that invocation has
//! settled, anyone may submit `CompletePending` to resume the callee.

mod callee;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use callee::{CalleeOutcome, ReceivedCallback, RelaySpec, TestContract};

use crate::distribution::{DistributionContract, DistributionError, ExecutionStatusClaim, FinalOutcome};
use crate::simchain::{
    CallOutcome, ExecContext, ExecuteArgs, GasMeter, GasOp, InvocationCall, OpKind, OutOfGas,
    RegisterArgs, INVOCATION_ADDRESS,
};
use crate::types::{encode_values, Address, ChainId, ParamList, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecutionStatus {
    Pending,
    Completed,
    Failed,
}

impl ExecutionStatus {
    pub fn claim(self) -> Option<ExecutionStatusClaim> {
        match self {
            ExecutionStatus::Pending => None,
            ExecutionStatus::Completed => Some(ExecutionStatusClaim::Success),
            ExecutionStatus::Failed => Some(ExecutionStatusClaim::Failure),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionRecord {
    pub execution_id: u64,
    pub source_chain: ChainId,
    pub invocation_id: u64,
    pub callee: Address,
    pub method: String,
    pub params: ParamList,
    pub startgas: u64,
    pub gas_price: u64,
    pub depth: u32,
    pub status: ExecutionStatus,
    /// Set iff `status == Completed`.
    pub return_value: Option<Value>,
    pub steps_used: u64,
    pub executor: Address,
    pub started_at: u64,
    pub completed_at: Option<u64>,
    /// Nested invocation on this chain's distribution contract being waited on.
    pub awaiting: Option<u64>,
    pub nested_results: Vec<Option<Value>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InvocationError {
    #[error(transparent)]
    OutOfGas(#[from] OutOfGas),
    #[error("no contract at {0}")]
    UnknownCallee(Address),
    #[error("unknown execution {0}")]
    UnknownExecution(u64),
    #[error("execution {0} is not pending")]
    NotPending(u64),
    #[error("nested invocation {0} has not settled yet")]
    NestedNotSettled(u64),
    #[error("gas limit leaves {remaining} for startgas {startgas}")]
    GasLimitBelowStartgas { startgas: u64, remaining: u64 },
    #[error(transparent)]
    Distribution(#[from] DistributionError),
}

type Result<T> = std::result::Result<T, InvocationError>;

fn int(v: u64) -> Value {
    Value::Int(v as i64)
}

#[derive(Debug, Clone, Default)]
pub struct InvocationContract {
    /// Shared on clone; a write copies only the touched record.
    records: BTreeMap<u64, Arc<ExecutionRecord>>,
    /// Execution ids per `(source_chain, invocation_id)`, oldest first.
    by_source: BTreeMap<(ChainId, u64), Vec<u64>>,
    next_execution_id: u64,
}

impl InvocationContract {
    pub const ADDRESS: Address = INVOCATION_ADDRESS;

    pub fn new() -> Self {
        Self::default()
    }

    pub fn get_execution(&self, id: u64) -> Result<&ExecutionRecord> {
        self.records.get(&id).map(Arc::as_ref).ok_or(InvocationError::UnknownExecution(id))
    }

    pub fn executions(&self) -> impl Iterator<Item = &ExecutionRecord> {
        self.records.values().map(Arc::as_ref)
    }

    /// First execution started for `(source_chain, invocation_id)`, if any.
    pub fn find(&self, source_chain: ChainId, invocation_id: u64) -> Option<&ExecutionRecord> {
        self.find_all(source_chain, invocation_id).next()
    }

    pub fn find_all(&self, source_chain: ChainId, invocation_id: u64) -> impl Iterator<Item = &ExecutionRecord> {
        self.by_source
            .get(&(source_chain, invocation_id))
            .into_iter()
            .flatten()
            .map(|id| self.records[id].as_ref())
    }

    pub fn handle(
        &mut self,
        ctx: &mut ExecContext<'_>,
        distribution: &mut DistributionContract,
        contracts: &mut BTreeMap<Address, TestContract>,
        call: &InvocationCall,
    ) -> Result<CallOutcome> {
        match call {
            InvocationCall::Execute(args) => {
                self.execute(ctx, distribution, contracts, args)?;
                Ok(CallOutcome {
                    kind: OpKind::Execute,
                    invocation: None,
                })
            }
            InvocationCall::CompletePending { execution_id } => {
                self.resume(ctx, distribution, contracts, *execution_id)?;
                Ok(CallOutcome {
                    kind: OpKind::CompletePending,
                    invocation: None,
                })
            }
        }
    }

    pub fn execute(
        &mut self,
        ctx: &mut ExecContext<'_>,
        distribution: &mut DistributionContract,
        contracts: &mut BTreeMap<Address, TestContract>,
        args: &ExecuteArgs,
    ) -> Result<u64> {
        ctx.charge(GasOp::StorageRead)?;
        if !contracts.contains_key(&args.callee) {
            return Err(InvocationError::UnknownCallee(args.callee));
        }
        ctx.charge_n(GasOp::StorageAlloc, 4)?;
        let remaining = ctx.meter.remaining();
        if remaining < args.startgas {
            return Err(InvocationError::GasLimitBelowStartgas {
                startgas: args.startgas,
                remaining,
            });
        }
        let id = self.next_execution_id;
        self.next_execution_id += 1;
        self.by_source
            .entry((args.source_chain, args.invocation_id))
            .or_default()
            .push(id);
        self.records.insert(
            id,
            Arc::new(ExecutionRecord {
                execution_id: id,
                source_chain: args.source_chain,
                invocation_id: args.invocation_id,
                callee: args.callee,
                method: args.method.clone(),
                params: args.params.clone(),
                startgas: args.startgas,
                gas_price: ctx.gas_price,
                depth: args.depth,
                status: ExecutionStatus::Pending,
                return_value: None,
                steps_used: 0,
                executor: ctx.sender,
                started_at: ctx.height,
                completed_at: None,
                awaiting: None,
                nested_results: Vec::new(),
            }),
        );
        ctx.emit(
            Self::ADDRESS,
            "ExecutionStarted",
            encode_values(&[
                int(id),
                Value::Int(args.source_chain.0 as i64),
                int(args.invocation_id),
                int(args.depth as u64),
            ]),
        )?;

        let mut child = GasMeter::new(args.startgas, *ctx.meter.costs());
        let contract = contracts.get_mut(&args.callee).expect("checked above");
        let backup = contract.clone();
        let outcome = contract.call(&mut child, &args.method, &args.params);
        self.settle_step(ctx, distribution, contracts, id, child, outcome, backup)?;
        Ok(id)
    }

    /// Resumes a pending execution with the result of its nested call.
    fn resume(
        &mut self,
        ctx: &mut ExecContext<'_>,
        distribution: &mut DistributionContract,
        contracts: &mut BTreeMap<Address, TestContract>,
        id: u64,
    ) -> Result<()> {
        ctx.charge(GasOp::StorageRead)?;
        let rec = self.get_execution(id)?;
        let nested_id = match (rec.status, rec.awaiting) {
            (ExecutionStatus::Pending, Some(n)) => n,
            _ => return Err(InvocationError::NotPending(id)),
        };
        let nested = distribution.record(nested_id)?;
        let Some(settlement) = &nested.settlement else {
            return Err(InvocationError::NestedNotSettled(nested_id));
        };
        let value = match (settlement.outcome, &nested.published) {
            (FinalOutcome::Positive, Some(p)) if p.status == ExecutionStatusClaim::Success => {
                p.return_value.clone()
            }
            _ => None,
        };
        let (callee, budget) = (rec.callee, rec.startgas - rec.steps_used);
        ctx.charge(GasOp::StorageWrite)?;
        let rec = Arc::make_mut(self.records.get_mut(&id).expect("exists"));
        rec.nested_results.push(value);
        rec.awaiting = None;
        let nested_results = rec.nested_results.clone();

        let mut child = GasMeter::new(budget, *ctx.meter.costs());
        let contract = contracts
            .get_mut(&callee)
            .ok_or(InvocationError::UnknownCallee(callee))?;
        let backup = contract.clone();
        let outcome = contract.resume(&mut child, &nested_results);
        self.settle_step(ctx, distribution, contracts, id, child, outcome, backup)
    }

    /// Records what one slice of callee execution produced and charges its
    /// steps to the transaction.
    #[allow(clippy::too_many_arguments)]
    fn settle_step(
        &mut self,
        ctx: &mut ExecContext<'_>,
        distribution: &mut DistributionContract,
        contracts: &mut BTreeMap<Address, TestContract>,
        id: u64,
        mut child: GasMeter,
        outcome: std::result::Result<CalleeOutcome, OutOfGas>,
        backup: TestContract,
    ) -> Result<()> {
        let callee = self.get_execution(id)?.callee;
        let (return_value, more_calls) = match outcome {
            Ok(CalleeOutcome::Return(v)) => (Some(v), false),
            Ok(CalleeOutcome::Revert(_)) | Err(_) => {
                contracts.insert(callee, backup);
                (None, false)
            }
            Ok(CalleeOutcome::Nested(request)) => {
                let depth = self.get_execution(id)?.depth + 1;
                match register_nested(ctx, distribution, &mut child, callee, &request, depth) {
                    Some(nested_id) => {
                        Arc::make_mut(self.records.get_mut(&id).expect("exists")).awaiting = Some(nested_id);
                        (None, true)
                    }
                    None => {
                        contracts.insert(callee, backup);
                        (None, false)
                    }
                }
            }
        };
        let steps = child.used();
        ctx.meter.charge_raw(steps)?;
        Arc::make_mut(self.records.get_mut(&id).expect("exists")).steps_used += steps;
        self.complete_pending(ctx, id, return_value, more_calls)
    }

    /// Moves a pending execution on: it stays pending while `more_calls`,
    /// otherwise it completes with `return_value` or fails without one.
    pub fn complete_pending(
        &mut self,
        ctx: &mut ExecContext<'_>,
        id: u64,
        return_value: Option<Value>,
        more_calls: bool,
    ) -> Result<()> {
        let rec = self
            .records
            .get_mut(&id)
            .map(Arc::make_mut)
            .ok_or(InvocationError::UnknownExecution(id))?;
        if rec.status != ExecutionStatus::Pending {
            return Err(InvocationError::NotPending(id));
        }
        ctx.meter.charge(GasOp::StorageWrite)?;
        let (topic, payload) = if more_calls {
            (
                "ExecutionPending",
                vec![int(id), int(rec.awaiting.unwrap_or(u64::MAX))],
            )
        } else {
            rec.completed_at = Some(ctx.height);
            match return_value {
                Some(v) => {
                    ctx.meter.charge(GasOp::StorageAlloc)?;
                    rec.status = ExecutionStatus::Completed;
                    rec.return_value = Some(v.clone());
                    ("ExecutionCompleted", vec![int(id), int(rec.steps_used), v])
                }
                None => {
                    rec.status = ExecutionStatus::Failed;
                    ("ExecutionFailed", vec![int(id), int(rec.steps_used)])
                }
            }
        };
        ctx.emit(Self::ADDRESS, topic, encode_values(&payload))?;
        Ok(())
    }
}

/// Registers a callee's nested call, paid from the callee's own balance and
/// metered as part of its steps. Returns `None` (and leaves no trace) if
/// the registration is rejected.
fn register_nested(
    ctx: &mut ExecContext<'_>,
    distribution: &mut DistributionContract,
    child: &mut GasMeter,
    callee: Address,
    request: &RegisterArgs,
    depth: u32,
) -> Option<u64> {
    let dist_backup = distribution.clone();
    let ledger_backup = ctx.ledger.clone();
    let events_len = ctx.events.len();
    let mut nested_ctx = ExecContext {
        chain: ctx.chain,
        height: ctx.height,
        sender: callee,
        gas_price: ctx.gas_price,
        meter: child,
        ledger: ctx.ledger,
        events: ctx.events,
    };
    match distribution.register(&mut nested_ctx, callee, request, depth) {
        Ok(id) => Some(id),
        Err(_) => {
            *distribution = dist_backup;
            *ctx.ledger = ledger_backup;
            ctx.events.truncate(events_len);
            None
        }
    }
}
