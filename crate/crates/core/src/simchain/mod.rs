//! Deterministic single-chain substrate.
//!
//! A [`SimChain`] keeps a FIFO pending pool, executes transactions with gas
//! metering when a block is mined, appends events, and moves tokens on its
//! [`Ledger`]. Both protocol contracts live on every chain. There are no
//! forks: blocks only ever get appended.

mod gas;
mod ledger;
mod tx;
mod world;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use gas::{GasCostTable, GasMeter, GasOp, OutOfGas};
pub use ledger::{Ledger, LedgerError};
pub use tx::{
    Call, DistributionCall, Event, ExecuteArgs, InvocationCall, InvocationRef, OpKind, Receipt,
    RegisterArgs, ResultSubmission, Transaction, TxId, TxStatus,
};
pub use world::{CallOutcome, World};

use crate::distribution::PhaseChange;
use crate::types::{Address, ChainId, ParamList, Value};

pub const DISTRIBUTION_ADDRESS: Address = Address::system(0xd1);
pub const INVOCATION_ADDRESS: Address = Address::system(0x1c);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChainError {
    #[error("unknown chain {0}")]
    UnknownChain(ChainId),
    #[error("unknown sender {0}")]
    UnknownSender(Address),
    #[error("unknown account {0}")]
    UnknownAccount(Address),
    #[error("insufficient balance for {sender}: have {available}, gas_limit*gas_price = {required}")]
    InsufficientBalance {
        sender: Address,
        available: u64,
        required: u64,
    },
    #[error("contract calls need a positive gas limit")]
    ZeroGasLimit,
    #[error("height {requested} is beyond the tip {tip}")]
    HeightOutOfRange { requested: u64, tip: u64 },
}

/// Mutable view handed to a contract while it executes one transaction.
pub struct ExecContext<'a> {
    pub chain: ChainId,
    pub height: u64,
    pub sender: Address,
    pub gas_price: u64,
    pub meter: &'a mut GasMeter,
    pub ledger: &'a mut Ledger,
    pub events: &'a mut Vec<Event>,
}

impl ExecContext<'_> {
    pub fn charge(&mut self, op: GasOp) -> Result<(), OutOfGas> {
        self.meter.charge(op)
    }

    pub fn charge_n(&mut self, op: GasOp, times: u64) -> Result<(), OutOfGas> {
        self.meter.charge_n(op, times)
    }

    pub fn emit(&mut self, emitter: Address, topic: &str, payload: Vec<u8>) -> Result<(), OutOfGas> {
        self.meter.charge(GasOp::EventEmit)?;
        self.events.push(Event {
            emitter,
            topic: topic.to_string(),
            payload,
            block_height: self.height,
        });
        Ok(())
    }
}

/// An immutable mined block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub chain: ChainId,
    pub height: u64,
    pub receipts: Vec<Receipt>,
    pub events: Vec<Event>,
    /// Per-account balance changes caused by this block.
    pub balance_deltas: BTreeMap<Address, i128>,
    pub gas_sink: u64,
    pub phase_changes: Vec<PhaseChange>,
    /// Distribution-contract balance and what it owes, after the block.
    pub escrow: EscrowSnapshot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EscrowSnapshot {
    pub contract_balance: u64,
    pub liabilities: u64,
}

/// Static per-chain configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainParams {
    pub id: ChainId,
    /// Gas price every agent pays on this chain.
    pub gas_price: u64,
    pub costs: GasCostTable,
}

#[derive(Debug, Clone)]
pub struct SimChain {
    params: ChainParams,
    blocks: Vec<Block>,
    pending: Vec<(TxId, Transaction)>,
    world: World,
    next_tx: u64,
    nonces: BTreeMap<Address, u64>,
    genesis_total: u128,
}

impl SimChain {
    /// Creates the chain and mines the empty genesis block at height 0.
    pub fn new(params: ChainParams, world: World) -> Self {
        let genesis_total = world.ledger.total();
        let escrow = world.escrow_snapshot();
        let genesis = Block {
            chain: params.id,
            height: 0,
            receipts: Vec::new(),
            events: Vec::new(),
            balance_deltas: BTreeMap::new(),
            gas_sink: world.ledger.gas_sink(),
            phase_changes: Vec::new(),
            escrow,
        };
        Self {
            params,
            blocks: vec![genesis],
            pending: Vec::new(),
            world,
            next_tx: 0,
            nonces: BTreeMap::new(),
            genesis_total,
        }
    }

    pub fn id(&self) -> ChainId {
        self.params.id
    }

    pub fn params(&self) -> &ChainParams {
        &self.params
    }

    pub fn gas_price(&self) -> u64 {
        self.params.gas_price
    }

    /// Height of the most recently mined block.
    pub fn height(&self) -> u64 {
        self.blocks.len() as u64 - 1
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn ledger(&self) -> &Ledger {
        &self.world.ledger
    }

    pub fn genesis_total(&self) -> u128 {
        self.genesis_total
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    /// Admits a transaction into the pending pool.
    pub fn submit_transaction(&mut self, mut tx: Transaction) -> Result<TxId, ChainError> {
        let available = self
            .world
            .ledger
            .balance(&tx.sender)
            .map_err(|_| ChainError::UnknownSender(tx.sender))?;
        if tx.gas_limit == 0 {
            return Err(ChainError::ZeroGasLimit);
        }
        let required = tx.max_fee().unwrap_or(u64::MAX);
        if required > available {
            return Err(ChainError::InsufficientBalance {
                sender: tx.sender,
                available,
                required,
            });
        }
        let nonce = self.nonces.entry(tx.sender).or_default();
        tx.nonce = *nonce;
        *nonce += 1;
        let id = TxId(self.next_tx);
        self.next_tx += 1;
        self.pending.push((id, tx));
        Ok(id)
    }

    /// Executes the whole pending pool in submission order and appends the block.
    pub fn mine_block(&mut self) -> &Block {
        let height = self.height() + 1;
        let before = self.world.ledger.clone();
        let mut receipts = Vec::with_capacity(self.pending.len());
        let mut events = Vec::new();
        for (tx_id, tx) in std::mem::take(&mut self.pending) {
            let receipt = self.world.apply(&self.params, height, tx_id, tx, &mut events);
            receipts.push(receipt);
        }
        let block = Block {
            chain: self.params.id,
            height,
            receipts,
            events,
            balance_deltas: self.world.ledger.deltas_since(&before),
            gas_sink: self.world.ledger.gas_sink(),
            phase_changes: self.world.distribution.take_phase_changes(),
            escrow: self.world.escrow_snapshot(),
        };
        self.blocks.push(block);
        self.blocks.last().expect("just pushed")
    }

    /// Events at or above `from_height`, in (height, emission) order.
    pub fn read_events(&self, from_height: u64, topic: Option<&str>) -> Result<Vec<&Event>, ChainError> {
        let tip = self.height();
        if from_height > tip {
            return Err(ChainError::HeightOutOfRange {
                requested: from_height,
                tip,
            });
        }
        Ok(self.blocks[from_height as usize..]
            .iter()
            .flat_map(|b| b.events.iter())
            .filter(|e| topic.is_none_or(|t| e.topic == t))
            .collect())
    }

    pub fn get_balance(&self, addr: &Address) -> Result<u64, ChainError> {
        self.world
            .ledger
            .balance(addr)
            .map_err(|_| ChainError::UnknownAccount(*addr))
    }

    /// Runs a direct contract call against a copy of the current state and
    /// returns what it would produce. The chain itself is not touched.
    pub fn dry_run_call(
        &self,
        sender: Address,
        callee: Address,
        method: &str,
        params: &ParamList,
        gas_limit: u64,
    ) -> (Receipt, Option<Value>) {
        let mut world = self.world.clone();
        let mut events = Vec::new();
        let tx = Transaction::new(
            sender,
            Call::Contract {
                callee,
                method: method.to_string(),
                params: params.clone(),
            },
            gas_limit,
            self.params.gas_price,
        );
        let receipt = world.apply(&self.params, self.height() + 1, TxId(u64::MAX), tx, &mut events);
        let value = world.last_direct_return.take();
        (receipt, value)
    }
}

/// All chains of a scenario, advanced in lockstep.
#[derive(Debug, Clone, Default)]
pub struct Network {
    chains: BTreeMap<ChainId, SimChain>,
}

impl Network {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_chain(&mut self, chain: SimChain) {
        self.chains.insert(chain.id(), chain);
    }

    pub fn chain(&self, id: ChainId) -> Result<&SimChain, ChainError> {
        self.chains.get(&id).ok_or(ChainError::UnknownChain(id))
    }

    pub fn chain_mut(&mut self, id: ChainId) -> Result<&mut SimChain, ChainError> {
        self.chains.get_mut(&id).ok_or(ChainError::UnknownChain(id))
    }

    pub fn chains(&self) -> impl Iterator<Item = &SimChain> {
        self.chains.values()
    }

    pub fn chain_ids(&self) -> Vec<ChainId> {
        self.chains.keys().copied().collect()
    }

    pub fn submit_transaction(&mut self, chain: ChainId, tx: Transaction) -> Result<TxId, ChainError> {
        self.chain_mut(chain)?.submit_transaction(tx)
    }

    pub fn mine_block(&mut self, chain: ChainId) -> Result<&Block, ChainError> {
        Ok(self.chain_mut(chain)?.mine_block())
    }

    pub fn read_events(
        &self,
        chain: ChainId,
        from_height: u64,
        topic: Option<&str>,
    ) -> Result<Vec<&Event>, ChainError> {
        self.chain(chain)?.read_events(from_height, topic)
    }

    pub fn get_balance(&self, chain: ChainId, addr: &Address) -> Result<u64, ChainError> {
        self.chain(chain)?.get_balance(addr)
    }
}

#[cfg(test)]
mod tests;
