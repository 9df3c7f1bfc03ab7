//! Abstract gas metering.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Per-operation gas costs for one chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GasCostTable {
    /// Overwrite of an existing storage slot.
    pub storage_write: u64,
    /// First write to a fresh storage slot.
    pub storage_alloc: u64,
    pub storage_read: u64,
    pub arithmetic: u64,
    pub event_emit: u64,
    /// Intrinsic cost of every transaction and of every contract-to-contract call.
    pub call_dispatch: u64,
}

impl Default for GasCostTable {
    fn default() -> Self {
        Self {
            storage_write: 100,
            storage_alloc: 400,
            storage_read: 10,
            arithmetic: 1,
            event_emit: 50,
            call_dispatch: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GasOp {
    StorageWrite,
    StorageAlloc,
    StorageRead,
    Arithmetic,
    EventEmit,
    CallDispatch,
}

impl GasCostTable {
    pub fn cost(&self, op: GasOp) -> u64 {
        match op {
            GasOp::StorageWrite => self.storage_write,
            GasOp::StorageAlloc => self.storage_alloc,
            GasOp::StorageRead => self.storage_read,
            GasOp::Arithmetic => self.arithmetic,
            GasOp::EventEmit => self.event_emit,
            GasOp::CallDispatch => self.call_dispatch,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("out of gas: needed {needed}, {remaining} remaining")]
pub struct OutOfGas {
    pub needed: u64,
    pub remaining: u64,
}

/// Tracks gas consumption against a fixed limit.
#[derive(Debug, Clone)]
pub struct GasMeter {
    limit: u64,
    used: u64,
    costs: GasCostTable,
}

impl GasMeter {
    pub fn new(limit: u64, costs: GasCostTable) -> Self {
        Self {
            limit,
            used: 0,
            costs,
        }
    }

    pub fn charge(&mut self, op: GasOp) -> Result<(), OutOfGas> {
        self.charge_raw(self.costs.cost(op))
    }

    pub fn charge_n(&mut self, op: GasOp, times: u64) -> Result<(), OutOfGas> {
        self.charge_raw(self.costs.cost(op).saturating_mul(times))
    }

    /// Charges a precomputed amount. On failure the meter is exhausted.
    pub fn charge_raw(&mut self, amount: u64) -> Result<(), OutOfGas> {
        let remaining = self.remaining();
        if amount > remaining {
            self.used = self.limit;
            return Err(OutOfGas {
                needed: amount,
                remaining,
            });
        }
        self.used += amount;
        Ok(())
    }

    pub fn used(&self) -> u64 {
        self.used
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }

    pub fn remaining(&self) -> u64 {
        self.limit - self.used
    }

    pub fn costs(&self) -> &GasCostTable {
        &self.costs
    }

    /// A child meter for a nested call, bounded by both `limit` and what
    /// this meter still has.
    pub fn child(&self, limit: u64) -> GasMeter {
        GasMeter::new(limit.min(self.remaining()), self.costs)
    }
}
