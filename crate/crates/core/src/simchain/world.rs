use std::collections::BTreeMap;

use thiserror::Error;

use crate::distribution::{DistributionContract, DistributionError};
use crate::invocation::{CalleeOutcome, InvocationContract, InvocationError, TestContract};
use crate::types::{Address, Value};

use super::{
    Call, ChainParams, EscrowSnapshot, Event, ExecContext, GasMeter, GasOp, InvocationRef, OpKind,
    OutOfGas, Receipt, Transaction, TxId, TxStatus, DISTRIBUTION_ADDRESS,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TxError {
    #[error(transparent)]
    OutOfGas(#[from] OutOfGas),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
    #[error(transparent)]
    Invocation(#[from] InvocationError),
    #[error("no contract at {0}")]
    UnknownContract(Address),
    #[error("callee reverted: {0}")]
    Reverted(String),
    #[error("sender cannot cover max fee {required} (has {available})")]
    CannotPayGas { available: u64, required: u64 },
}

/// What a successful call reports back for accounting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CallOutcome {
    pub kind: OpKind,
    pub invocation: Option<InvocationRef>,
}

/// All mutable state of one chain.
#[derive(Debug, Clone)]
pub struct World {
    pub ledger: super::Ledger,
    pub distribution: DistributionContract,
    pub invocation: InvocationContract,
    pub contracts: BTreeMap<Address, TestContract>,
    /// Return value of the most recent direct contract call.
    pub(crate) last_direct_return: Option<Value>,
}

impl World {
    pub fn new(
        ledger: super::Ledger,
        distribution: DistributionContract,
        contracts: BTreeMap<Address, TestContract>,
    ) -> Self {
        Self {
            ledger,
            distribution,
            invocation: InvocationContract::new(),
            contracts,
            last_direct_return: None,
        }
    }

    pub fn escrow_snapshot(&self) -> EscrowSnapshot {
        EscrowSnapshot {
            contract_balance: self.ledger.balance_or_zero(&DISTRIBUTION_ADDRESS),
            liabilities: self.distribution.liabilities(),
        }
    }

    /// Executes one transaction. Failed calls leave no state behind except
    /// the gas fee.
    pub(crate) fn apply(
        &mut self,
        params: &ChainParams,
        height: u64,
        tx_id: TxId,
        tx: Transaction,
        block_events: &mut Vec<Event>,
    ) -> Receipt {
        let fallback = tx.call.fallback_kind();
        let max_fee = tx.max_fee().unwrap_or(u64::MAX);
        let available = self.ledger.balance_or_zero(&tx.sender);
        if available < max_fee {
            let err = TxError::CannotPayGas {
                available,
                required: max_fee,
            };
            return Receipt {
                tx_id,
                tx,
                kind: fallback,
                invocation: None,
                gas_used: 0,
                fee: 0,
                status: TxStatus::Failed,
                error: Some(err.to_string()),
            };
        }

        let snapshot = self.clone();
        let mut meter = GasMeter::new(tx.gas_limit, params.costs);
        let mut events = Vec::new();
        let result = self.dispatch(params, height, &tx, &mut meter, &mut events, max_fee);

        let (status, kind, invocation, error) = match result {
            Ok(outcome) => {
                block_events.extend(events);
                (TxStatus::Success, outcome.kind, outcome.invocation, None)
            }
            Err(err) => {
                *self = snapshot;
                (TxStatus::Failed, fallback, None, Some(err.to_string()))
            }
        };
        let gas_used = meter.used();
        let fee = gas_used * tx.gas_price;
        self.ledger
            .burn_fee(tx.sender, fee)
            .expect("fee bounded by reserved max fee");
        Receipt {
            tx_id,
            tx,
            kind,
            invocation,
            gas_used,
            fee,
            status,
            error,
        }
    }

    fn dispatch(
        &mut self,
        params: &ChainParams,
        height: u64,
        tx: &Transaction,
        meter: &mut GasMeter,
        events: &mut Vec<Event>,
        reserved_fee: u64,
    ) -> Result<CallOutcome, TxError> {
        meter.charge(GasOp::CallDispatch)?;
        let World {
            ledger,
            distribution,
            invocation,
            contracts,
            last_direct_return,
        } = self;
        // The sender's reserved fee is held back from what the call may move.
        let held = ledger.hold(tx.sender, reserved_fee);
        let mut ctx = ExecContext {
            chain: params.id,
            height,
            sender: tx.sender,
            gas_price: tx.gas_price,
            meter,
            ledger,
            events,
        };
        let result = match &tx.call {
            Call::Distribution(call) => distribution
                .handle(&mut ctx, contracts, call)
                .map_err(TxError::from),
            Call::Invocation(call) => invocation
                .handle(&mut ctx, distribution, contracts, call)
                .map_err(TxError::from),
            Call::Contract {
                callee,
                method,
                params,
            } => {
                let contract = contracts
                    .get_mut(callee)
                    .ok_or(TxError::UnknownContract(*callee))?;
                match contract.call(ctx.meter, method, params)? {
                    CalleeOutcome::Return(v) => {
                        *last_direct_return = Some(v);
                        Ok(CallOutcome {
                            kind: OpKind::ManualCall,
                            invocation: None,
                        })
                    }
                    CalleeOutcome::Revert(reason) => Err(TxError::Reverted(reason)),
                    CalleeOutcome::Nested(_) => Err(TxError::Reverted(
                        "cross-chain calls require the invocation contract".into(),
                    )),
                }
            }
        };
        ctx.ledger.release(tx.sender, held);
        result
    }
}
