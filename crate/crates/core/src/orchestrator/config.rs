//! Declarative scenario description, read from TOML.

use std::collections::{BTreeMap, BTreeSet};

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{IntermediaryMode, ValidatorMode};
use crate::distribution::CallbackSpec;
use crate::simchain::GasCostTable;
use crate::types::{Address, ChainId, ParamList, Value};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Rationals written as `"n/d"` or as plain integers.
pub mod ratio_str {
    use num_rational::Ratio;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Ratio<u64>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{}/{}", r.numer(), r.denom()))
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Int(u64),
        Text(String),
    }

    pub fn parse(text: &str) -> Result<Ratio<u64>, String> {
        let (n, d) = text.split_once('/').unwrap_or((text, "1"));
        let n: u64 = n.trim().parse().map_err(|_| format!("bad rational {text:?}"))?;
        let d: u64 = d.trim().parse().map_err(|_| format!("bad rational {text:?}"))?;
        if d == 0 {
            return Err(format!("zero denominator in {text:?}"));
        }
        Ok(Ratio::new(n, d))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Ratio<u64>, D::Error> {
        match Raw::deserialize(d)? {
            Raw::Int(n) => Ok(Ratio::from_integer(n)),
            Raw::Text(t) => parse(&t).map_err(serde::de::Error::custom),
        }
    }
}

fn one() -> Ratio<u64> {
    Ratio::from_integer(1)
}

fn half() -> Ratio<u64> {
    Ratio::new(1, 2)
}

fn default_timeout() -> u64 {
    1000
}

fn default_max_blocks() -> u64 {
    5000
}

fn default_initiator_stake() -> u64 {
    100
}

fn default_inflation() -> u64 {
    2
}

fn default_repeat() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub waiting_blocks: u64,
    pub blocks_per_phase: u64,
    #[serde(default = "default_timeout")]
    pub misbehavior_timeout: u64,
    #[serde(default = "one", with = "ratio_str")]
    pub exchange_rate: Ratio<u64>,
    /// Block budget; the run stops here even if calls are unfinished.
    #[serde(default = "default_max_blocks")]
    pub max_blocks: u64,
    #[serde(default)]
    pub recursion_depth_limit: Option<u32>,
    /// Tokens locked per offer; defaults to each invocation's fees.
    #[serde(default)]
    pub penalty_stake: Option<u64>,
    #[serde(default = "half", with = "ratio_str")]
    pub penalty_validator_share: Ratio<u64>,
    #[serde(default = "default_initiator_stake")]
    pub initiator_stake: u64,
    #[serde(default)]
    pub fees: FeeConfig,
    pub chains: Vec<ChainConfig>,
    #[serde(default)]
    pub intermediaries: Vec<IntermediaryConfig>,
    #[serde(default)]
    pub validators: Vec<ValidatorConfig>,
    #[serde(default)]
    pub calls: Vec<CallConfig>,
    #[serde(default)]
    pub fault_injection: FaultInjection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeeConfig {
    pub intermediary: u64,
    pub validator: u64,
}

impl Default for FeeConfig {
    fn default() -> Self {
        Self {
            intermediary: 60,
            validator: 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    pub id: ChainId,
    pub gas_price: u64,
    #[serde(default)]
    pub gas_costs: GasCostTable,
    #[serde(default)]
    pub accounts: Vec<AccountConfig>,
    #[serde(default)]
    pub contracts: Vec<ContractConfig>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccountConfig {
    pub name: String,
    pub balance: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContractConfig {
    pub name: String,
    #[serde(default)]
    pub balance: u64,
    #[serde(default)]
    pub storage: BTreeMap<String, Value>,
    #[serde(default)]
    pub relay: Option<RelayConfig>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelayConfig {
    pub target_chain: ChainId,
    /// Contract name on the target chain.
    pub callee: String,
    pub method: String,
    #[serde(default)]
    pub params: ParamList,
    pub startgas: u64,
    pub max_gas_price: u64,
    #[serde(default)]
    pub intermediary_fee: Option<u64>,
    #[serde(default)]
    pub validator_fee: Option<u64>,
    #[serde(default = "default_repeat")]
    pub repeat: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntermediaryConfig {
    pub name: String,
    #[serde(default)]
    pub mode: IntermediaryMode,
    #[serde(default = "one", with = "ratio_str")]
    pub margin: Ratio<u64>,
    #[serde(default = "default_inflation")]
    pub inflation_factor: u64,
    /// Funded on every chain.
    pub balance: u64,
    /// Penalty depot seeded on every chain.
    pub depot: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidatorConfig {
    pub name: String,
    #[serde(default)]
    pub mode: ValidatorMode,
    /// Funded on every chain.
    pub balance: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CallConfig {
    pub caller: String,
    pub source_chain: ChainId,
    pub target_chain: ChainId,
    /// Contract name on the target chain.
    pub callee: String,
    pub method: String,
    #[serde(default)]
    pub params: ParamList,
    pub startgas: u64,
    pub max_gas_price: u64,
    #[serde(default = "one_block")]
    pub at_block: u64,
    /// Defaults to the minimum the distribution contract accepts.
    #[serde(default)]
    pub deposit: Option<u64>,
    #[serde(default)]
    pub intermediary_fee: Option<u64>,
    #[serde(default)]
    pub validator_fee: Option<u64>,
    #[serde(default)]
    pub callback: Option<CallbackSpec>,
}

fn one_block() -> u64 {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultInjection {
    /// Every caller refund is paid twice.
    #[serde(default)]
    pub double_refund: bool,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let config: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn address_of(&self, name: &str) -> Address {
        Address::derive(self.seed, name)
    }

    pub fn chain(&self, id: ChainId) -> Option<&ChainConfig> {
        self.chains.iter().find(|c| c.id == id)
    }

    /// Checks everything a run relies on.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: String| Err(ConfigError::Invalid(msg));
        if self.waiting_blocks == 0 || self.blocks_per_phase == 0 {
            return bad("waiting_blocks and blocks_per_phase must be positive".into());
        }
        if self.misbehavior_timeout == 0 {
            return bad("misbehavior_timeout must be positive".into());
        }
        if *self.exchange_rate.numer() == 0 {
            return bad("exchange_rate must be positive".into());
        }
        if self.penalty_validator_share > one() {
            return bad("penalty_validator_share must be at most 1".into());
        }
        if self.recursion_depth_limit == Some(0) {
            return bad("recursion_depth_limit must be positive when set".into());
        }
        let mut ids = BTreeSet::new();
        for c in &self.chains {
            if !ids.insert(c.id) {
                return bad(format!("duplicate chain id {}", c.id));
            }
            if c.gas_price == 0 {
                return bad(format!("chain {} needs a positive gas price", c.id));
            }
        }
        if ids.len() < 2 {
            return bad("at least two chains are needed".into());
        }

        let intermediaries: BTreeMap<Address, &str> = self
            .intermediaries
            .iter()
            .map(|i| (self.address_of(&i.name), i.name.as_str()))
            .collect();
        if intermediaries.len() != self.intermediaries.len() {
            return bad("duplicate intermediary names".into());
        }
        for v in &self.validators {
            let addr = self.address_of(&v.name);
            if intermediaries.contains_key(&addr) {
                return bad(format!(
                    "rosters overlap: {} ({addr}) is both intermediary and validator",
                    v.name
                ));
            }
        }
        for i in &self.intermediaries {
            if i.margin < one() {
                return bad(format!("intermediary {} has margin below 1", i.name));
            }
        }

        let mut names: BTreeMap<(ChainId, &str), bool> = BTreeMap::new();
        for c in &self.chains {
            for a in &c.accounts {
                if names.insert((c.id, &a.name), false).is_some() {
                    return bad(format!("duplicate name {} on chain {}", a.name, c.id));
                }
            }
            for k in &c.contracts {
                if names.insert((c.id, &k.name), true).is_some() {
                    return bad(format!("duplicate name {} on chain {}", k.name, c.id));
                }
            }
        }
        for c in &self.chains {
            for k in &c.contracts {
                if let Some(r) = &k.relay {
                    if !ids.contains(&r.target_chain) || r.target_chain == c.id {
                        return bad(format!("relay of {} targets an invalid chain", k.name));
                    }
                    if names.get(&(r.target_chain, r.callee.as_str())) != Some(&true) {
                        return bad(format!("relay of {} names unknown contract {}", k.name, r.callee));
                    }
                }
            }
        }
        for (n, call) in self.calls.iter().enumerate() {
            if !ids.contains(&call.source_chain) || !ids.contains(&call.target_chain) {
                return bad(format!("call {n} names an unknown chain"));
            }
            if call.source_chain == call.target_chain {
                return bad(format!("call {n} must cross chains"));
            }
            if names.get(&(call.source_chain, call.caller.as_str())) != Some(&false) {
                return bad(format!("call {n}: caller {} has no account on chain {}", call.caller, call.source_chain));
            }
            if call.at_block == 0 {
                return bad(format!("call {n}: at_block must be at least 1"));
            }
        }
        Ok(())
    }
}
