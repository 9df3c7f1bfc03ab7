//! Off-chain actors. Each agent is a policy that looks at the network after
//! a block has been mined and decides which transactions to send; those
//! land in the next block.
//!
//! Every reaction to a fresh on-chain fact at height `T` waits out the
//! consistency delay: the agent acts once `H ≥ T + waiting_blocks`, so its
//! transaction is included at `T + waiting_blocks + 1`.

mod caller;
mod intermediary;
mod validator;

use std::collections::BTreeSet;

use num_rational::Ratio;

pub use caller::{CallPlan, CallerAgent};
pub use intermediary::{IntermediaryAgent, IntermediaryMode, IntermediaryPolicy};
pub use validator::{validator_verify, ValidatorAgent, ValidatorMode};

use crate::distribution::{DistributionContract, InvocationRecord};
use crate::invocation::InvocationContract;
use crate::simchain::{Call, DistributionCall, Network, SimChain, Transaction};
use crate::types::{Address, ChainId};

/// Gas limit for protocol transactions other than `execute`.
pub const PROTOCOL_GAS_LIMIT: u64 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Timing {
    pub waiting_blocks: u64,
    pub blocks_per_phase: u64,
    pub misbehavior_timeout: u64,
    pub initiator_stake: u64,
}

/// What every agent sees: the whole network as of `height`.
pub struct Observation<'a> {
    pub network: &'a Network,
    pub height: u64,
    pub timing: Timing,
    pub exchange_rate: Ratio<u64>,
}

impl Observation<'_> {
    /// Whether a fact that appeared at `at` has waited out the consistency delay.
    pub fn settled_since(&self, at: u64) -> bool {
        self.height >= at + self.timing.waiting_blocks
    }

    /// Height the next transaction will be included at.
    pub fn next(&self) -> u64 {
        self.height + 1
    }

    pub fn chain(&self, id: ChainId) -> Option<&SimChain> {
        self.network.chain(id).ok()
    }

    pub fn distribution(&self, id: ChainId) -> Option<&DistributionContract> {
        self.chain(id).map(|c| &c.world().distribution)
    }

    pub fn invocation(&self, id: ChainId) -> Option<&InvocationContract> {
        self.chain(id).map(|c| &c.world().invocation)
    }

    /// All unsettled invocation records, per source chain.
    pub fn open_records(&self) -> impl Iterator<Item = (ChainId, &InvocationRecord)> {
        self.network.chains().flat_map(|c| {
            c.world()
                .distribution
                .records()
                .filter(|r| !r.is_settled())
                .map(move |r| (c.id(), r))
        })
    }

    /// A transaction from `sender` priced at `chain`'s gas price.
    pub fn tx(&self, chain: ChainId, sender: Address, call: Call, gas_limit: u64) -> Action {
        let gas_price = self.chain(chain).map_or(1, SimChain::gas_price);
        Action {
            chain,
            tx: Transaction::new(sender, call, gas_limit, gas_price),
        }
    }

    pub fn distribution_tx(&self, chain: ChainId, sender: Address, call: DistributionCall) -> Action {
        self.tx(chain, sender, Call::Distribution(call), PROTOCOL_GAS_LIMIT)
    }
}

/// A transaction an agent wants included on `chain`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Action {
    pub chain: ChainId,
    pub tx: Transaction,
}

/// Decision of one agent in one step. `notes` records skipped actions.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StepOutput {
    pub actions: Vec<Action>,
    pub notes: Vec<String>,
}

impl StepOutput {
    pub fn push(&mut self, action: Action) {
        self.actions.push(action);
    }

    pub fn note(&mut self, note: String) {
        self.notes.push(note);
    }
}

pub trait Agent {
    fn name(&self) -> &str;
    fn address(&self) -> Address;
    fn step(&mut self, obs: &Observation<'_>, out: &mut StepOutput);
}

/// Work items an agent has already attempted; nothing is retried.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) enum Task {
    Register(usize),
    Offer(ChainId, u64),
    Execute(ChainId, u64),
    ReportPending(ChainId, u64),
    Publish(ChainId, u64),
    Relay(ChainId, u64, usize),
    FinalizeNested(ChainId, u64),
    Finalize(ChainId, u64),
    Vote(ChainId, u64),
    MisbehaviorStart(ChainId, u64, u64),
    MisbehaviorVote(ChainId, u64, u64),
    MisbehaviorResolve(ChainId, u64, u64),
}

#[derive(Debug, Clone, Default)]
pub(crate) struct Memo(BTreeSet<Task>);

impl Memo {
    /// Marks `task` as attempted; true the first time only.
    pub fn claim(&mut self, task: Task) -> bool {
        self.0.insert(task)
    }

    pub fn contains(&self, task: &Task) -> bool {
        self.0.contains(task)
    }
}
