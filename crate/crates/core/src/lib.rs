//! Deterministic multi-chain simulator for brokered cross-chain smart
//! contract invocations.
//!
//! A caller on a *source* chain registers a call to a contract on a
//! *target* chain. Intermediaries compete on gas price for the right to
//! execute it, the winner forwards the result back, validators vote on its
//! correctness, and the distribution contract pays everyone out of the
//! caller's deposit.
//!
//! * [`simchain`]: blocks, gas metering, events and token ledgers.
//! * [`distribution`]: source-chain lifecycle contract.
//! * [`invocation`]: target-chain execution contract and test callees.
//! * [`agents`]: caller, intermediary and validator policies.
//! * [`orchestrator`]: scenario configs, the block loop, traces and analytics.

pub mod agents;
pub mod distribution;
pub mod hash;
pub mod invocation;
pub mod orchestrator;
pub mod simchain;
pub mod types;

pub use types::{Address, ChainId, ParamList, Value};
