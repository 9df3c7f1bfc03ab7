use serde::{Deserialize, Serialize};

use crate::distribution::{CallbackSpec, ExecutionStatusClaim, VoteOutcome};
use crate::types::{hex_bytes, Address, ChainId, ParamList, Value};

use super::{DISTRIBUTION_ADDRESS, INVOCATION_ADDRESS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TxId(pub u64);

/// A signed-in-spirit transaction: who pays, what is called, and how much gas
/// the sender is willing to buy at which price.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    pub sender: Address,
    pub call: Call,
    pub gas_limit: u64,
    pub gas_price: u64,
    /// Assigned by the chain on submission.
    pub nonce: u64,
}

impl Transaction {
    pub fn new(sender: Address, call: Call, gas_limit: u64, gas_price: u64) -> Self {
        Self {
            sender,
            call,
            gas_limit,
            gas_price,
            nonce: 0,
        }
    }

    pub fn target(&self) -> Address {
        self.call.target()
    }

    pub fn method(&self) -> &str {
        self.call.method()
    }

    /// Upper bound on what the sender can be charged.
    pub fn max_fee(&self) -> Option<u64> {
        self.gas_limit.checked_mul(self.gas_price)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Call {
    Distribution(DistributionCall),
    Invocation(InvocationCall),
    /// Direct call of a deployed test contract.
    Contract {
        callee: Address,
        method: String,
        params: ParamList,
    },
}

impl Call {
    pub fn target(&self) -> Address {
        match self {
            Call::Distribution(_) => DISTRIBUTION_ADDRESS,
            Call::Invocation(_) => INVOCATION_ADDRESS,
            Call::Contract { callee, .. } => *callee,
        }
    }

    pub fn method(&self) -> &str {
        match self {
            Call::Distribution(c) => c.method(),
            Call::Invocation(InvocationCall::Execute(_)) => "execute",
            Call::Invocation(InvocationCall::CompletePending { .. }) => "complete_pending",
            Call::Contract { method, .. } => method,
        }
    }

    /// Operation row a failed call is accounted under.
    pub fn fallback_kind(&self) -> OpKind {
        match self {
            Call::Distribution(c) => match c {
                DistributionCall::Register(a) if a.callback.is_some() => OpKind::RegisterCallback,
                DistributionCall::Register(_) => OpKind::Register,
                DistributionCall::DepositToDepot { .. } => OpKind::DepotDeposit,
                DistributionCall::SubmitOffer { .. } => OpKind::OfferWorse,
                DistributionCall::DetermineWinner { .. } => OpKind::DetermineWinner,
                DistributionCall::ReportPending { .. } => OpKind::ReportPending,
                DistributionCall::PublishResult { .. } => OpKind::Publish,
                DistributionCall::SubmitVote { .. } => OpKind::VoteOther,
                DistributionCall::Finalize { .. } => OpKind::Finalize,
                DistributionCall::StartMisbehaviorVote { .. } => OpKind::MisbehaviorStart,
                DistributionCall::MisbehaviorVote { .. } => OpKind::MisbehaviorVote,
                DistributionCall::ResolveMisbehavior { .. } => OpKind::MisbehaviorResolve,
            },
            Call::Invocation(InvocationCall::Execute(_)) => OpKind::Execute,
            Call::Invocation(InvocationCall::CompletePending { .. }) => OpKind::CompletePending,
            Call::Contract { .. } => OpKind::ManualCall,
        }
    }
}

/// Caller-supplied registration parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegisterArgs {
    pub target_chain: ChainId,
    pub callee: Address,
    pub method: String,
    pub params: ParamList,
    pub startgas: u64,
    pub max_gas_price: u64,
    pub intermediary_fee: u64,
    pub validator_fee: u64,
    pub callback: Option<CallbackSpec>,
    pub deposit: u64,
}

/// What an intermediary claims happened on the target chain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultSubmission {
    pub execution_id: u64,
    pub status: ExecutionStatusClaim,
    pub return_value: Option<Value>,
    pub steps_used: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistributionCall {
    Register(RegisterArgs),
    DepositToDepot { amount: u64 },
    SubmitOffer { invocation_id: u64, gas_price: u64 },
    DetermineWinner { invocation_id: u64 },
    ReportPending { invocation_id: u64, execution_id: u64 },
    PublishResult { invocation_id: u64, result: ResultSubmission },
    SubmitVote {
        invocation_id: u64,
        outcome: VoteOutcome,
        claimed_steps: Option<u64>,
    },
    Finalize { invocation_id: u64 },
    StartMisbehaviorVote { invocation_id: u64, stake: u64 },
    MisbehaviorVote { invocation_id: u64, fraudulent: bool },
    ResolveMisbehavior { invocation_id: u64 },
}

impl DistributionCall {
    pub fn method(&self) -> &'static str {
        match self {
            DistributionCall::Register(_) => "register",
            DistributionCall::DepositToDepot { .. } => "deposit_to_depot",
            DistributionCall::SubmitOffer { .. } => "submit_offer",
            DistributionCall::DetermineWinner { .. } => "determine_winner",
            DistributionCall::ReportPending { .. } => "report_pending",
            DistributionCall::PublishResult { .. } => "publish_result",
            DistributionCall::SubmitVote { .. } => "submit_vote",
            DistributionCall::Finalize { .. } => "finalize",
            DistributionCall::StartMisbehaviorVote { .. } => "start_misbehavior_vote",
            DistributionCall::MisbehaviorVote { .. } => "misbehavior_vote",
            DistributionCall::ResolveMisbehavior { .. } => "resolve_misbehavior",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecuteArgs {
    pub source_chain: ChainId,
    pub invocation_id: u64,
    pub callee: Address,
    pub method: String,
    pub params: ParamList,
    pub startgas: u64,
    /// Recursion depth relayed from the source-side record.
    pub depth: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InvocationCall {
    Execute(ExecuteArgs),
    CompletePending { execution_id: u64 },
}

/// Gas-report row a transaction belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    Register,
    RegisterCallback,
    DepotDeposit,
    OfferFirst,
    OfferBetter,
    OfferWorse,
    DetermineWinner,
    Execute,
    CompletePending,
    ReportPending,
    Publish,
    VoteFirst,
    VoteOther,
    Finalize,
    FinalizeCallback,
    MisbehaviorStart,
    MisbehaviorVote,
    MisbehaviorResolve,
    ManualCall,
}

impl OpKind {
    pub fn label(&self) -> &'static str {
        match self {
            OpKind::Register => "registration",
            OpKind::RegisterCallback => "registration (callback)",
            OpKind::DepotDeposit => "depot deposit",
            OpKind::OfferFirst => "offer (first)",
            OpKind::OfferBetter => "offer (better)",
            OpKind::OfferWorse => "offer (worse)",
            OpKind::DetermineWinner => "determine winner",
            OpKind::Execute => "target execution",
            OpKind::CompletePending => "complete pending",
            OpKind::ReportPending => "report pending",
            OpKind::Publish => "result forwarding",
            OpKind::VoteFirst => "voting (first)",
            OpKind::VoteOther => "voting (other)",
            OpKind::Finalize => "finalization",
            OpKind::FinalizeCallback => "finalization (callback)",
            OpKind::MisbehaviorStart => "misbehavior vote start",
            OpKind::MisbehaviorVote => "misbehavior vote",
            OpKind::MisbehaviorResolve => "misbehavior resolution",
            OpKind::ManualCall => "manual call",
        }
    }
}

/// The source-side invocation a transaction is about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct InvocationRef {
    pub chain: ChainId,
    pub invocation_id: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TxStatus {
    Success,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Receipt {
    pub tx_id: TxId,
    pub tx: Transaction,
    pub kind: OpKind,
    pub invocation: Option<InvocationRef>,
    pub gas_used: u64,
    /// Tokens moved from the sender into the gas sink.
    pub fee: u64,
    pub status: TxStatus,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub emitter: Address,
    pub topic: String,
    #[serde(with = "hex_bytes")]
    pub payload: Vec<u8>,
    pub block_height: u64,
}
