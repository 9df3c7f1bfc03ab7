//! Table-driven test contracts deployed on the simulated chains.
//!
//! | method        | params           | returns                         |
//! |---------------|------------------|---------------------------------|
//! | `set_int`     | `[Int]`          | `Int(1)` ack                    |
//! | `set_string`  | `[String]`       | `Int(1)` ack                    |
//! | `set_bytes`   | `[Bytes]`        | `Int(1)` ack                    |
//! | `get_int`     | `[]`             | stored value or `Int(0)`        |
//! | `get_string`  | `[]`             | stored value or `""`            |
//! | `get_bytes`   | `[]`             | stored value or empty bytes     |
//! | `echo`        | `[v]`            | `v`                             |
//! | `burn`        | `[Int(n)]`       | `Int(n)` after `n` arithmetic ops |
//! | `revert`      | any              | reverts                         |
//! | `leaf`        | any              | `String(label)`                 |
//! | `relay`       | any              | nested cross-chain call         |
//! | `on_result`   | `[id, status, v]`| `Int(1)`; callback receiver     |

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::distribution::required_deposit;
use crate::simchain::{GasMeter, GasOp, OutOfGas, RegisterArgs};
use crate::types::{Address, ChainId, ParamList, Value};

/// A nested cross-chain call issued by the `relay` method.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelaySpec {
    pub target_chain: ChainId,
    pub callee: Address,
    pub method: String,
    #[serde(default)]
    pub params: ParamList,
    pub startgas: u64,
    pub max_gas_price: u64,
    #[serde(default)]
    pub intermediary_fee: u64,
    #[serde(default)]
    pub validator_fee: u64,
    /// Number of sequential nested calls before the relay returns.
    #[serde(default = "one")]
    pub repeat: u32,
}

fn one() -> u32 {
    1
}

impl RelaySpec {
    pub fn request(&self) -> RegisterArgs {
        let fees = self.intermediary_fee + self.validator_fee;
        RegisterArgs {
            target_chain: self.target_chain,
            callee: self.callee,
            method: self.method.clone(),
            params: self.params.clone(),
            startgas: self.startgas,
            max_gas_price: self.max_gas_price,
            intermediary_fee: self.intermediary_fee,
            validator_fee: self.validator_fee,
            callback: None,
            deposit: required_deposit(self.max_gas_price, self.startgas, fees, None).unwrap_or(u64::MAX),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CalleeOutcome {
    Return(Value),
    Revert(String),
    /// The callee wants a cross-chain call made on its behalf.
    Nested(RegisterArgs),
}

/// Callback delivered by the distribution contract at finalization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReceivedCallback {
    pub invocation_id: i64,
    pub status: i64,
    pub value: Value,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestContract {
    pub address: Address,
    pub label: String,
    pub storage: BTreeMap<String, Value>,
    pub relay: Option<RelaySpec>,
    pub callbacks: Vec<ReceivedCallback>,
}

fn revert<T: Into<String>>(reason: T) -> Result<CalleeOutcome, OutOfGas> {
    Ok(CalleeOutcome::Revert(reason.into()))
}

impl TestContract {
    pub fn new(address: Address, label: impl Into<String>) -> Self {
        Self {
            address,
            label: label.into(),
            storage: BTreeMap::new(),
            relay: None,
            callbacks: Vec::new(),
        }
    }

    pub fn with_storage(mut self, key: &str, value: Value) -> Self {
        self.storage.insert(key.to_string(), value);
        self
    }

    pub fn with_relay(mut self, relay: RelaySpec) -> Self {
        self.relay = Some(relay);
        self
    }

    /// Runs `method`. Callers restore the contract on revert or out-of-gas.
    pub fn call(&mut self, meter: &mut GasMeter, method: &str, params: &[Value]) -> Result<CalleeOutcome, OutOfGas> {
        meter.charge(GasOp::Arithmetic)?;
        match method {
            "set_int" => self.set(meter, "int", params, |v| matches!(v, Value::Int(_))),
            "set_string" => self.set(meter, "string", params, |v| matches!(v, Value::String(_))),
            "set_bytes" => self.set(meter, "bytes", params, |v| matches!(v, Value::Bytes(_))),
            "get_int" => self.get(meter, "int", Value::Int(0)),
            "get_string" => self.get(meter, "string", Value::String(String::new())),
            "get_bytes" => self.get(meter, "bytes", Value::Bytes(Vec::new())),
            "echo" => match params.first() {
                Some(v) => {
                    meter.charge_n(GasOp::Arithmetic, 1 + v.encode().len() as u64 / 32)?;
                    Ok(CalleeOutcome::Return(v.clone()))
                }
                None => revert("echo needs one argument"),
            },
            "burn" => match params.first().and_then(Value::as_int) {
                Some(n) if n >= 0 => {
                    meter.charge_n(GasOp::Arithmetic, n as u64)?;
                    Ok(CalleeOutcome::Return(Value::Int(n)))
                }
                _ => revert("burn needs a non-negative int"),
            },
            "revert" => revert("explicit revert"),
            "leaf" => Ok(CalleeOutcome::Return(Value::String(self.label.clone()))),
            "relay" => match &self.relay {
                Some(spec) => {
                    meter.charge(GasOp::StorageRead)?;
                    Ok(CalleeOutcome::Nested(spec.request()))
                }
                None => revert("no relay configured"),
            },
            "on_result" => self.on_result(meter, params),
            other => revert(format!("unknown method {other}")),
        }
    }

    /// Continues a `relay` after nested calls have settled. A `None` entry
    /// marks a nested call that did not return a value.
    pub fn resume(&mut self, meter: &mut GasMeter, nested: &[Option<Value>]) -> Result<CalleeOutcome, OutOfGas> {
        meter.charge(GasOp::StorageRead)?;
        let Some(spec) = &self.relay else {
            return revert("nothing to resume");
        };
        if nested.iter().any(Option::is_none) {
            return revert("nested call failed");
        }
        if (nested.len() as u32) < spec.repeat {
            return Ok(CalleeOutcome::Nested(spec.request()));
        }
        let parts: Vec<String> = nested.iter().flatten().map(Value::render).collect();
        meter.charge_n(GasOp::Arithmetic, 1 + parts.len() as u64)?;
        Ok(CalleeOutcome::Return(Value::String(format!(
            "{}({})",
            self.label,
            parts.join(",")
        ))))
    }

    fn set(
        &mut self,
        meter: &mut GasMeter,
        slot: &str,
        params: &[Value],
        accepts: fn(&Value) -> bool,
    ) -> Result<CalleeOutcome, OutOfGas> {
        let Some(value) = params.first().filter(|v| accepts(v)) else {
            return revert(format!("set_{slot} got the wrong argument type"));
        };
        meter.charge(GasOp::StorageRead)?;
        if self.storage.contains_key(slot) {
            meter.charge(GasOp::StorageWrite)?;
        } else {
            meter.charge(GasOp::StorageAlloc)?;
        }
        self.storage.insert(slot.to_string(), value.clone());
        Ok(CalleeOutcome::Return(Value::Int(1)))
    }

    fn get(&self, meter: &mut GasMeter, slot: &str, default: Value) -> Result<CalleeOutcome, OutOfGas> {
        meter.charge(GasOp::StorageRead)?;
        Ok(CalleeOutcome::Return(self.storage.get(slot).cloned().unwrap_or(default)))
    }

    fn on_result(&mut self, meter: &mut GasMeter, params: &[Value]) -> Result<CalleeOutcome, OutOfGas> {
        let (Some(Value::Int(id)), Some(Value::Int(status)), Some(value)) =
            (params.first(), params.get(1), params.get(2))
        else {
            return revert("on_result expects (id, status, value)");
        };
        meter.charge(GasOp::StorageAlloc)?;
        self.callbacks.push(ReceivedCallback {
            invocation_id: *id,
            status: *status,
            value: value.clone(),
        });
        Ok(CalleeOutcome::Return(Value::Int(1)))
    }
}
