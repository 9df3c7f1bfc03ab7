use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::Address;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LedgerError {
    #[error("insufficient balance at {account}: have {available}, need {required}")]
    InsufficientBalance {
        account: Address,
        available: u64,
        required: u64,
    },
    #[error("unknown account {0}")]
    UnknownAccount(Address),
}

/// Token balances of one chain plus the accumulated gas fees.
///
/// Tokens only move between accounts or into the gas sink, so
/// `sum(balances) + gas_sink` never changes after genesis.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ledger {
    balances: BTreeMap<Address, u64>,
    gas_sink: u64,
    /// Fees reserved for the transaction currently executing.
    #[serde(default)]
    held: u64,
}

impl Ledger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Creates (or tops up) an account. Only valid at genesis.
    pub fn mint(&mut self, account: Address, amount: u64) {
        *self.balances.entry(account).or_default() += amount;
    }

    /// Makes sure an account exists without funding it.
    pub fn open(&mut self, account: Address) {
        self.balances.entry(account).or_default();
    }

    pub fn exists(&self, account: &Address) -> bool {
        self.balances.contains_key(account)
    }

    pub fn balance(&self, account: &Address) -> Result<u64, LedgerError> {
        self.balances
            .get(account)
            .copied()
            .ok_or(LedgerError::UnknownAccount(*account))
    }

    pub fn balance_or_zero(&self, account: &Address) -> u64 {
        self.balances.get(account).copied().unwrap_or(0)
    }

    pub fn transfer(&mut self, from: Address, to: Address, amount: u64) -> Result<(), LedgerError> {
        if amount == 0 {
            self.open(to);
            return Ok(());
        }
        self.debit(from, amount)?;
        *self.balances.entry(to).or_default() += amount;
        Ok(())
    }

    /// Moves a gas fee from `payer` into the sink.
    pub fn burn_fee(&mut self, payer: Address, amount: u64) -> Result<(), LedgerError> {
        self.debit(payer, amount)?;
        self.gas_sink += amount;
        Ok(())
    }

    fn debit(&mut self, account: Address, amount: u64) -> Result<(), LedgerError> {
        let bal = self
            .balances
            .get_mut(&account)
            .ok_or(LedgerError::UnknownAccount(account))?;
        if *bal < amount {
            return Err(LedgerError::InsufficientBalance {
                account,
                available: *bal,
                required: amount,
            });
        }
        *bal -= amount;
        Ok(())
    }

    /// Sets aside up to `amount` of `account`'s balance so it cannot be spent
    /// until [`Ledger::release`]. Returns what was actually held.
    pub fn hold(&mut self, account: Address, amount: u64) -> u64 {
        let amount = amount.min(self.balance_or_zero(&account));
        if amount > 0 {
            self.debit(account, amount).expect("bounded by balance");
            self.held += amount;
        }
        amount
    }

    pub fn release(&mut self, account: Address, amount: u64) {
        self.held -= amount;
        *self.balances.entry(account).or_default() += amount;
    }

    pub fn gas_sink(&self) -> u64 {
        self.gas_sink
    }

    pub fn balances(&self) -> &BTreeMap<Address, u64> {
        &self.balances
    }

    /// `sum(balances) + gas_sink`, the conserved quantity.
    pub fn total(&self) -> u128 {
        self.balances.values().map(|v| *v as u128).sum::<u128>() + self.gas_sink as u128 + self.held as u128
    }

    /// Signed per-account changes from `before` to `self`, zero entries omitted.
    pub fn deltas_since(&self, before: &Ledger) -> BTreeMap<Address, i128> {
        let mut out = BTreeMap::new();
        for (addr, now) in &self.balances {
            let prev = before.balance_or_zero(addr);
            if *now != prev {
                out.insert(*addr, *now as i128 - prev as i128);
            }
        }
        for (addr, prev) in &before.balances {
            if !self.balances.contains_key(addr) && *prev != 0 {
                out.insert(*addr, -(*prev as i128));
            }
        }
        out
    }
}
