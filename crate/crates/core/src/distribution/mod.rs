//! Source-chain contract that manages a cross-chain call from registration
//! to settlement.
//!
//! Lifecycle of one invocation:
//!
//! ```text
//! Registered → OfferOpen → AwaitingResult → ResultPublished → VotingOpen → Finalized
//!                        ↘ Aborted (no offers)
//! ```
//!
//! All deadlines are the *last* block height at which the corresponding
//! action is still accepted. The offer window covers the consistency delay
//! plus `blocks_per_phase` blocks from registration. The verification
//! window starts with the first vote and lasts `blocks_per_phase` blocks.
//! The winning offer is determined implicitly by the first interaction
//! after the offer deadline; no dedicated transaction is needed.

mod selection;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use selection::{lowest_hash_voter, offer_key, select_winner, tally, VotingOutcome, VotingResult};

use crate::invocation::{CalleeOutcome, TestContract};
use crate::simchain::{
    CallOutcome, DistributionCall, ExecContext, GasMeter, GasOp, InvocationRef, LedgerError,
    OpKind, OutOfGas, RegisterArgs, ResultSubmission, DISTRIBUTION_ADDRESS,
};
use crate::types::{encode_values, Address, ChainId, ParamList, Value};

/// Contract-level protocol configuration, identical on every chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtocolParams {
    pub waiting_blocks: u64,
    pub blocks_per_phase: u64,
    pub misbehavior_timeout: u64,
    pub intermediaries: BTreeSet<Address>,
    pub validators: BTreeSet<Address>,
    /// Tokens locked per offer. Never below the invocation's fees.
    pub penalty_stake: Option<u64>,
    /// Share of a forfeited penalty paid to the winning validator; the caller gets the rest.
    pub penalty_validator_share: Ratio<u64>,
    pub initiator_stake: u64,
    pub recursion_depth_limit: Option<u32>,
    pub known_chains: BTreeSet<ChainId>,
    /// Fault injection: pay every caller refund twice.
    pub double_refund_bug: bool,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        Self {
            waiting_blocks: 1,
            blocks_per_phase: 1,
            misbehavior_timeout: 1000,
            intermediaries: BTreeSet::new(),
            validators: BTreeSet::new(),
            penalty_stake: None,
            penalty_validator_share: Ratio::new(1, 2),
            initiator_stake: 0,
            recursion_depth_limit: None,
            known_chains: BTreeSet::new(),
            double_refund_bug: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Registered,
    OfferOpen,
    AwaitingResult,
    ResultPublished,
    VotingOpen,
    Finalized,
    Aborted,
}

impl Phase {
    /// Position along the lifecycle; phases never move to a lower rank.
    pub fn rank(self) -> u8 {
        match self {
            Phase::Registered => 0,
            Phase::OfferOpen => 1,
            Phase::AwaitingResult | Phase::Aborted => 2,
            Phase::ResultPublished => 3,
            Phase::VotingOpen => 4,
            Phase::Finalized => 5,
        }
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, Phase::Finalized | Phase::Aborted)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseChange {
    pub invocation_id: u64,
    pub phase: Phase,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallbackSpec {
    pub method: String,
    pub cb_startgas: u64,
    pub cb_gas_price: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecutionStatusClaim {
    Success,
    Failure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OfferClass {
    First,
    Better,
    Worse,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Offer {
    pub invocation_id: u64,
    pub intermediary: Address,
    pub gas_price: u64,
    pub locked_penalty: u64,
    pub lock_active: bool,
    pub submitted_at: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublishedResult {
    pub execution_id: u64,
    pub status: ExecutionStatusClaim,
    pub return_value: Option<Value>,
    pub steps_used: u64,
    pub publisher: Address,
    pub published_at: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VoteOutcome {
    Invalid,
    Valid,
    ValidStepsMismatch,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vote {
    pub invocation_id: u64,
    pub validator: Address,
    pub outcome: VoteOutcome,
    pub claimed_steps: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VoteClass {
    FirstForOption,
    Subsequent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VotingRound {
    pub voting_id: u64,
    pub opened_at: u64,
    /// Set by the first vote.
    pub deadline: Option<u64>,
    pub votes: Vec<Vote>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MisbehaviorOutcome {
    Fraudulent,
    NotFraudulent,
    /// Nobody voted; the initiator gets the stake back.
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MisbehaviorBallot {
    pub validator: Address,
    pub fraudulent: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MisbehaviorRound {
    pub voting_id: u64,
    pub initiator: Address,
    pub stake: u64,
    pub started_at: u64,
    pub deadline: Option<u64>,
    pub ballots: Vec<MisbehaviorBallot>,
    pub resolution: Option<MisbehaviorResolution>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MisbehaviorResolution {
    pub outcome: MisbehaviorOutcome,
    pub reward_winner: Option<Address>,
    pub resolved_at: u64,
    pub payouts: Vec<Payout>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PenaltyDepot {
    pub owner: Address,
    pub total: u64,
    pub locked: u64,
}

impl PenaltyDepot {
    pub fn available(&self) -> u64 {
        self.total - self.locked
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinalOutcome {
    Positive,
    Negative,
    StepsMismatch,
    Aborted,
    Fraudulent,
}

impl From<VotingOutcome> for FinalOutcome {
    fn from(o: VotingOutcome) -> Self {
        match o {
            VotingOutcome::Positive => FinalOutcome::Positive,
            VotingOutcome::Negative => FinalOutcome::Negative,
            VotingOutcome::StepsMismatch => FinalOutcome::StepsMismatch,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PayoutReason {
    IntermediaryReimbursement,
    IntermediaryFee,
    ValidatorFee,
    CallbackGas,
    CallerRefund,
    PenaltyToValidator,
    PenaltyToCaller,
    StakeReturn,
    StakeReward,
}

impl PayoutReason {
    /// Whether the payout is funded from the caller's deposit.
    pub fn from_escrow(self) -> bool {
        matches!(
            self,
            PayoutReason::IntermediaryReimbursement
                | PayoutReason::IntermediaryFee
                | PayoutReason::ValidatorFee
                | PayoutReason::CallbackGas
                | PayoutReason::CallerRefund
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Payout {
    /// `None` for callback gas, which goes to the gas sink.
    pub to: Option<Address>,
    pub amount: u64,
    pub reason: PayoutReason,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallbackReport {
    pub success: bool,
    pub gas_used: u64,
    pub charged: u64,
}

/// How an invocation's deposit (and any forfeited penalty) was paid out.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Settlement {
    pub outcome: FinalOutcome,
    pub settled_at: u64,
    pub finalized_by: Address,
    pub reward_winner: Option<Address>,
    pub payouts: Vec<Payout>,
    pub callback: Option<CallbackReport>,
}

pub type FinalReport = Settlement;

impl Settlement {
    pub fn paid(&self, reason: PayoutReason) -> u64 {
        self.payouts
            .iter()
            .filter(|p| p.reason == reason)
            .map(|p| p.amount)
            .sum()
    }

    /// Everything funded from the deposit.
    pub fn escrow_paid(&self) -> u64 {
        self.payouts
            .iter()
            .filter(|p| p.reason.from_escrow())
            .map(|p| p.amount)
            .sum()
    }

    pub fn received_by(&self, who: &Address) -> u64 {
        self.payouts
            .iter()
            .filter(|p| p.to.as_ref() == Some(who))
            .map(|p| p.amount)
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvocationRecord {
    pub invocation_id: u64,
    pub caller: Address,
    pub target_chain: ChainId,
    pub callee: Address,
    pub method: String,
    pub params: ParamList,
    pub startgas: u64,
    pub max_gas_price: u64,
    pub intermediary_fee: u64,
    pub validator_fee: u64,
    pub deposit: u64,
    pub callback: Option<CallbackSpec>,
    pub depth: u32,
    pub penalty_stake: u64,
    pub registered_at: u64,
    pub offer_deadline: u64,
    pub phase: Phase,
    pub offers: Vec<Offer>,
    pub best_offer: Option<usize>,
    pub winner: Option<Address>,
    pub pending_execution: Option<u64>,
    pub published: Option<PublishedResult>,
    pub verification: Option<VotingRound>,
    pub misbehavior: Vec<MisbehaviorRound>,
    /// Height from which the misbehavior timeout is counted.
    pub misbehavior_anchor: u64,
    pub settlement: Option<Settlement>,
}

impl InvocationRecord {
    pub fn fees(&self) -> u64 {
        self.intermediary_fee + self.validator_fee
    }

    /// First height at which the winner is known.
    pub fn winner_selected_at(&self) -> u64 {
        self.offer_deadline + 1
    }

    pub fn voting_deadline(&self) -> Option<u64> {
        self.verification.as_ref().and_then(|v| v.deadline)
    }

    pub fn phase_deadlines(&self) -> BTreeMap<Phase, u64> {
        let mut out = BTreeMap::new();
        out.insert(Phase::OfferOpen, self.offer_deadline);
        if let Some(d) = self.voting_deadline() {
            out.insert(Phase::VotingOpen, d);
        }
        out
    }

    pub fn winning_offer(&self) -> Option<&Offer> {
        self.winner.and(self.best_offer).map(|i| &self.offers[i])
    }

    pub fn active_misbehavior(&self) -> Option<&MisbehaviorRound> {
        self.misbehavior.last().filter(|r| r.resolution.is_none())
    }

    /// Phase as of `height`, applying the implicit offer-phase close.
    pub fn phase_at(&self, height: u64) -> Phase {
        if self.phase == Phase::OfferOpen && height > self.offer_deadline {
            if self.best_offer.is_some() {
                Phase::AwaitingResult
            } else {
                Phase::Aborted
            }
        } else {
            self.phase
        }
    }

    /// Winner as of `height`.
    pub fn winner_at(&self, height: u64) -> Option<Address> {
        if height > self.offer_deadline {
            self.best_offer.map(|i| self.offers[i].intermediary)
        } else {
            None
        }
    }

    pub fn is_settled(&self) -> bool {
        self.settlement.is_some()
    }
}

/// Minimum deposit: `max_gas_price·startgas + fees (+ cb_startgas·cb_gas_price)`.
pub fn required_deposit(
    max_gas_price: u64,
    startgas: u64,
    fees: u64,
    callback: Option<&CallbackSpec>,
) -> Option<u64> {
    let base = max_gas_price.checked_mul(startgas)?.checked_add(fees)?;
    match callback {
        Some(cb) => base.checked_add(cb.cb_startgas.checked_mul(cb.cb_gas_price)?),
        None => Some(base),
    }
}

/// Read-only answer to "what happened to my call".
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultView {
    pub phase: Phase,
    pub outcome: Option<FinalOutcome>,
    pub status: Option<ExecutionStatusClaim>,
    pub return_value: Option<Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DistributionError {
    #[error(transparent)]
    OutOfGas(#[from] OutOfGas),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error("deposit {deposit} below required {required}")]
    InsufficientDeposit { required: u64, deposit: u64 },
    #[error("unknown target chain {0}")]
    UnknownTargetChain(ChainId),
    #[error("invalid arguments: {0}")]
    InvalidArguments(&'static str),
    #[error("recursion depth {depth} exceeds limit {limit}")]
    DepthLimitExceeded { depth: u32, limit: u32 },
    #[error("unknown invocation {0}")]
    UnknownInvocation(u64),
    #[error("offer phase of invocation {0} is closed")]
    OfferPhaseClosed(u64),
    #[error("gas price {offered} above maximum {max}")]
    GasPriceTooHigh { offered: u64, max: u64 },
    #[error("depot of {owner} has {available} unlocked, needs {required}")]
    DepotInsufficient {
        owner: Address,
        available: u64,
        required: u64,
    },
    #[error("{0} is not authorized for this role")]
    NotAuthorized(Address),
    #[error("deadline not reached")]
    DeadlineNotReached,
    #[error("{0} is not the winning intermediary")]
    NotWinner(Address),
    #[error("invocation is in phase {0:?}")]
    WrongPhase(Phase),
    #[error("published result is malformed: {0}")]
    MalformedResult(&'static str),
    #[error("voting is closed")]
    VotingClosed,
    #[error("{0} already voted")]
    AlreadyVoted(Address),
    #[error("the winning intermediary cannot vote")]
    IntermediaryCannotVote,
    #[error("no votes cast")]
    NoVotesCast,
    #[error("invocation already finalized")]
    AlreadyFinalized,
    #[error("misbehavior voting possible from height {allowed_from}")]
    TooEarly { allowed_from: u64 },
    #[error("stake {offered} below required {required}")]
    StakeTooLow { offered: u64, required: u64 },
    #[error("a misbehavior voting is already running")]
    MisbehaviorVoteActive,
    #[error("no misbehavior voting is running")]
    NoMisbehaviorVote,
}

type Result<T> = std::result::Result<T, DistributionError>;

fn int(v: u64) -> Value {
    Value::Int(v as i64)
}

#[derive(Debug, Clone)]
pub struct DistributionContract {
    params: ProtocolParams,
    /// Shared on clone; a write copies only the touched record.
    records: BTreeMap<u64, Arc<InvocationRecord>>,
    depots: BTreeMap<Address, PenaltyDepot>,
    next_invocation_id: u64,
    next_voting_id: u64,
    phase_log: Vec<PhaseChange>,
}

impl DistributionContract {
    pub const ADDRESS: Address = DISTRIBUTION_ADDRESS;

    pub fn new(params: ProtocolParams) -> Self {
        Self {
            params,
            records: BTreeMap::new(),
            depots: BTreeMap::new(),
            next_invocation_id: 0,
            next_voting_id: 0,
            phase_log: Vec::new(),
        }
    }

    pub fn params(&self) -> &ProtocolParams {
        &self.params
    }

    /// Seeds a depot at genesis. The matching tokens must be minted to the
    /// contract address by the caller.
    pub fn genesis_depot(&mut self, owner: Address, amount: u64) {
        self.depots
            .entry(owner)
            .or_insert(PenaltyDepot {
                owner,
                total: 0,
                locked: 0,
            })
            .total += amount;
    }

    pub fn record(&self, id: u64) -> Result<&InvocationRecord> {
        self.records
            .get(&id)
            .map(Arc::as_ref)
            .ok_or(DistributionError::UnknownInvocation(id))
    }

    pub fn records(&self) -> impl Iterator<Item = &InvocationRecord> {
        self.records.values().map(Arc::as_ref)
    }

    pub fn depot(&self, owner: &Address) -> Option<&PenaltyDepot> {
        self.depots.get(owner)
    }

    /// Tokens the contract owes: open deposits, depots, and running stakes.
    pub fn liabilities(&self) -> u64 {
        let deposits: u64 = self
            .records
            .values()
            .filter(|r| !r.is_settled())
            .map(|r| r.deposit)
            .sum();
        let depots: u64 = self.depots.values().map(|d| d.total).sum();
        let stakes: u64 = self
            .records
            .values()
            .filter_map(|r| r.active_misbehavior())
            .map(|m| m.stake)
            .sum();
        deposits + depots + stakes
    }

    pub fn take_phase_changes(&mut self) -> Vec<PhaseChange> {
        std::mem::take(&mut self.phase_log)
    }

    fn set_phase(&mut self, id: u64, phase: Phase) {
        if let Some(r) = self.records.get_mut(&id).map(Arc::make_mut) {
            r.phase = phase;
        }
        self.phase_log.push(PhaseChange {
            invocation_id: id,
            phase,
        });
    }

    fn record_mut(&mut self, id: u64) -> Result<&mut InvocationRecord> {
        self.records
            .get_mut(&id)
            .map(Arc::make_mut)
            .ok_or(DistributionError::UnknownInvocation(id))
    }

    /// Transaction entry point.
    pub fn handle(
        &mut self,
        ctx: &mut ExecContext<'_>,
        contracts: &mut BTreeMap<Address, TestContract>,
        call: &DistributionCall,
    ) -> Result<CallOutcome> {
        let chain = ctx.chain;
        let reference = |invocation_id| {
            Some(InvocationRef {
                chain,
                invocation_id,
            })
        };
        let outcome = match call {
            DistributionCall::Register(args) => {
                let sender = ctx.sender;
                let id = self.register(ctx, sender, args, 0)?;
                let kind = if args.callback.is_some() {
                    OpKind::RegisterCallback
                } else {
                    OpKind::Register
                };
                CallOutcome {
                    kind,
                    invocation: reference(id),
                }
            }
            DistributionCall::DepositToDepot { amount } => {
                self.deposit_to_depot(ctx, *amount)?;
                CallOutcome {
                    kind: OpKind::DepotDeposit,
                    invocation: None,
                }
            }
            DistributionCall::SubmitOffer {
                invocation_id,
                gas_price,
            } => {
                let kind = match self.submit_offer(ctx, *invocation_id, *gas_price)? {
                    OfferClass::First => OpKind::OfferFirst,
                    OfferClass::Better => OpKind::OfferBetter,
                    OfferClass::Worse => OpKind::OfferWorse,
                };
                CallOutcome {
                    kind,
                    invocation: reference(*invocation_id),
                }
            }
            DistributionCall::DetermineWinner { invocation_id } => {
                self.determine_winner(ctx, *invocation_id)?;
                CallOutcome {
                    kind: OpKind::DetermineWinner,
                    invocation: reference(*invocation_id),
                }
            }
            DistributionCall::ReportPending {
                invocation_id,
                execution_id,
            } => {
                self.report_pending(ctx, *invocation_id, *execution_id)?;
                CallOutcome {
                    kind: OpKind::ReportPending,
                    invocation: reference(*invocation_id),
                }
            }
            DistributionCall::PublishResult {
                invocation_id,
                result,
            } => {
                self.publish_result(ctx, *invocation_id, result)?;
                CallOutcome {
                    kind: OpKind::Publish,
                    invocation: reference(*invocation_id),
                }
            }
            DistributionCall::SubmitVote {
                invocation_id,
                outcome,
                claimed_steps,
            } => {
                let kind = match self.submit_vote(ctx, *invocation_id, *outcome, *claimed_steps)? {
                    VoteClass::FirstForOption => OpKind::VoteFirst,
                    VoteClass::Subsequent => OpKind::VoteOther,
                };
                CallOutcome {
                    kind,
                    invocation: reference(*invocation_id),
                }
            }
            DistributionCall::Finalize { invocation_id } => {
                let report = self.finalize(ctx, contracts, *invocation_id)?;
                let kind = if report.callback.is_some() {
                    OpKind::FinalizeCallback
                } else {
                    OpKind::Finalize
                };
                CallOutcome {
                    kind,
                    invocation: reference(*invocation_id),
                }
            }
            DistributionCall::StartMisbehaviorVote {
                invocation_id,
                stake,
            } => {
                self.start_misbehavior_vote(ctx, *invocation_id, *stake)?;
                CallOutcome {
                    kind: OpKind::MisbehaviorStart,
                    invocation: reference(*invocation_id),
                }
            }
            DistributionCall::MisbehaviorVote {
                invocation_id,
                fraudulent,
            } => {
                self.misbehavior_vote(ctx, *invocation_id, *fraudulent)?;
                CallOutcome {
                    kind: OpKind::MisbehaviorVote,
                    invocation: reference(*invocation_id),
                }
            }
            DistributionCall::ResolveMisbehavior { invocation_id } => {
                self.resolve_misbehavior(ctx, *invocation_id)?;
                CallOutcome {
                    kind: OpKind::MisbehaviorResolve,
                    invocation: reference(*invocation_id),
                }
            }
        };
        Ok(outcome)
    }

    /// Registers a cross-chain call and escrows the caller's deposit.
    ///
    /// `depth` is 0 for calls registered by accounts and the parent depth
    /// plus one for calls registered by a callee during execution.
    pub fn register(
        &mut self,
        ctx: &mut ExecContext<'_>,
        caller: Address,
        args: &RegisterArgs,
        depth: u32,
    ) -> Result<u64> {
        ctx.charge_n(GasOp::Arithmetic, 6)?;
        ctx.charge(GasOp::StorageRead)?;
        if args.target_chain == ctx.chain || !self.params.known_chains.contains(&args.target_chain) {
            return Err(DistributionError::UnknownTargetChain(args.target_chain));
        }
        if args.startgas == 0 {
            return Err(DistributionError::InvalidArguments("startgas must be positive"));
        }
        if args.max_gas_price == 0 {
            return Err(DistributionError::InvalidArguments("max gas price must be positive"));
        }
        if let Some(cb) = &args.callback {
            if cb.cb_startgas == 0 || cb.cb_gas_price == 0 {
                return Err(DistributionError::InvalidArguments(
                    "callback gas fields must be positive",
                ));
            }
        }
        if let Some(limit) = self.params.recursion_depth_limit {
            if depth > limit {
                return Err(DistributionError::DepthLimitExceeded { depth, limit });
            }
        }
        let fees = args
            .intermediary_fee
            .checked_add(args.validator_fee)
            .ok_or(DistributionError::InvalidArguments("fees overflow"))?;
        let required = required_deposit(args.max_gas_price, args.startgas, fees, args.callback.as_ref())
            .unwrap_or(u64::MAX);
        if args.deposit < required {
            return Err(DistributionError::InsufficientDeposit {
                required,
                deposit: args.deposit,
            });
        }
        ctx.charge_n(GasOp::StorageWrite, 2)?;
        ctx.ledger.transfer(caller, Self::ADDRESS, args.deposit)?;

        // metadata slots; the callback spec takes one more
        ctx.charge_n(GasOp::StorageAlloc, 6)?;
        if args.callback.is_some() {
            ctx.charge(GasOp::StorageAlloc)?;
        }
        let id = self.next_invocation_id;
        self.next_invocation_id += 1;
        let height = ctx.height;
        let offer_deadline = height + self.params.waiting_blocks + self.params.blocks_per_phase;
        let penalty_stake = self.params.penalty_stake.unwrap_or(fees).max(fees);
        let record = InvocationRecord {
            invocation_id: id,
            caller,
            target_chain: args.target_chain,
            callee: args.callee,
            method: args.method.clone(),
            params: args.params.clone(),
            startgas: args.startgas,
            max_gas_price: args.max_gas_price,
            intermediary_fee: args.intermediary_fee,
            validator_fee: args.validator_fee,
            deposit: args.deposit,
            callback: args.callback.clone(),
            depth,
            penalty_stake,
            registered_at: height,
            offer_deadline,
            phase: Phase::Registered,
            offers: Vec::new(),
            best_offer: None,
            winner: None,
            pending_execution: None,
            published: None,
            verification: None,
            misbehavior: Vec::new(),
            misbehavior_anchor: offer_deadline + 1,
            settlement: None,
        };
        self.records.insert(id, Arc::new(record));
        self.set_phase(id, Phase::Registered);
        self.set_phase(id, Phase::OfferOpen);
        ctx.emit(
            Self::ADDRESS,
            "Registered",
            encode_values(&[
                int(id),
                Value::Int(args.target_chain.0 as i64),
                Value::Bytes(args.callee.as_bytes().to_vec()),
                Value::String(args.method.clone()),
                Value::Bytes(encode_values(&args.params)),
                int(args.startgas),
                int(args.max_gas_price),
                int(fees),
                int(args.deposit),
                int(depth as u64),
                int(offer_deadline),
            ]),
        )?;
        Ok(id)
    }

    pub fn deposit_to_depot(&mut self, ctx: &mut ExecContext<'_>, amount: u64) -> Result<()> {
        ctx.charge(GasOp::StorageRead)?;
        ctx.charge_n(GasOp::StorageWrite, 3)?;
        let owner = ctx.sender;
        ctx.ledger.transfer(owner, Self::ADDRESS, amount)?;
        self.genesis_depot(owner, amount);
        Ok(())
    }

    pub fn submit_offer(
        &mut self,
        ctx: &mut ExecContext<'_>,
        invocation_id: u64,
        gas_price: u64,
    ) -> Result<OfferClass> {
        let sender = ctx.sender;
        let height = ctx.height;
        ctx.charge(GasOp::StorageRead)?;
        ctx.charge_n(GasOp::Arithmetic, 3)?;
        let (stake, best_key, max) = {
            let rec = self.record(invocation_id)?;
            if rec.phase != Phase::OfferOpen || height > rec.offer_deadline {
                return Err(DistributionError::OfferPhaseClosed(invocation_id));
            }
            let best_key = rec.best_offer.map(|i| {
                let o = &rec.offers[i];
                offer_key(invocation_id, &o.intermediary, o.gas_price)
            });
            (rec.penalty_stake, best_key, rec.max_gas_price)
        };
        if !self.params.intermediaries.contains(&sender) {
            return Err(DistributionError::NotAuthorized(sender));
        }
        if gas_price == 0 {
            return Err(DistributionError::InvalidArguments("gas price must be positive"));
        }
        if gas_price > max {
            return Err(DistributionError::GasPriceTooHigh {
                offered: gas_price,
                max,
            });
        }
        ctx.charge(GasOp::StorageRead)?;
        let available = self.depots.get(&sender).map_or(0, PenaltyDepot::available);
        if available < stake {
            return Err(DistributionError::DepotInsufficient {
                owner: sender,
                available,
                required: stake,
            });
        }

        let key = offer_key(invocation_id, &sender, gas_price);
        let class = match best_key {
            None => OfferClass::First,
            Some(best) => {
                ctx.charge(GasOp::StorageRead)?;
                ctx.charge_n(GasOp::Arithmetic, 2)?;
                if key < best {
                    OfferClass::Better
                } else {
                    OfferClass::Worse
                }
            }
        };

        ctx.charge(GasOp::StorageWrite)?;
        self.depots.get_mut(&sender).expect("checked above").locked += stake;
        ctx.charge(GasOp::StorageAlloc)?;
        let rec = Arc::make_mut(self.records.get_mut(&invocation_id).expect("checked above"));
        rec.offers.push(Offer {
            invocation_id,
            intermediary: sender,
            gas_price,
            locked_penalty: stake,
            lock_active: true,
            submitted_at: height,
        });
        let index = rec.offers.len() - 1;
        match class {
            OfferClass::First => {
                ctx.charge(GasOp::StorageAlloc)?;
                rec.best_offer = Some(index);
            }
            OfferClass::Better => {
                // the beaten offer's lock becomes available again
                let prev = rec.best_offer.expect("better implies a previous best");
                let prev_offer = &mut rec.offers[prev];
                prev_offer.lock_active = false;
                let (owner, amount) = (prev_offer.intermediary, prev_offer.locked_penalty);
                rec.best_offer = Some(index);
                ctx.charge(GasOp::StorageRead)?;
                ctx.charge_n(GasOp::StorageWrite, 2)?;
                self.depots.get_mut(&owner).expect("offer had a depot").locked -= amount;
            }
            OfferClass::Worse => {}
        }
        ctx.emit(
            Self::ADDRESS,
            "OfferSubmitted",
            encode_values(&[
                int(invocation_id),
                Value::Bytes(sender.as_bytes().to_vec()),
                int(gas_price),
            ]),
        )?;
        Ok(class)
    }

    /// Closes the offer phase if its deadline has passed. Returns the winner.
    fn close_offer_phase(&mut self, ctx: &mut ExecContext<'_>, id: u64) -> Result<Option<Address>> {
        let height = ctx.height;
        let rec = self.record(id)?;
        if rec.phase != Phase::OfferOpen || height <= rec.offer_deadline {
            return Ok(rec.winner);
        }
        ctx.charge(GasOp::StorageRead)?;
        ctx.charge(GasOp::StorageWrite)?;
        let winner = rec.best_offer.map(|i| rec.offers[i].intermediary);
        match winner {
            Some(w) => {
                self.record_mut(id)?.winner = Some(w);
                self.set_phase(id, Phase::AwaitingResult);
            }
            None => self.set_phase(id, Phase::Aborted),
        }
        Ok(winner)
    }

    /// Explicitly settles the offer competition. Usually this happens
    /// implicitly with the first later interaction.
    pub fn determine_winner(&mut self, ctx: &mut ExecContext<'_>, id: u64) -> Result<Option<Address>> {
        ctx.charge(GasOp::StorageRead)?;
        let rec = self.record(id)?;
        if ctx.height <= rec.offer_deadline {
            return Err(DistributionError::DeadlineNotReached);
        }
        self.close_offer_phase(ctx, id)
    }

    /// The winner tells validators the call is still running (pending flag).
    pub fn report_pending(&mut self, ctx: &mut ExecContext<'_>, id: u64, execution_id: u64) -> Result<()> {
        ctx.charge(GasOp::StorageRead)?;
        self.close_offer_phase(ctx, id)?;
        let sender = ctx.sender;
        let rec = self.record(id)?;
        if rec.phase != Phase::AwaitingResult {
            return Err(DistributionError::WrongPhase(rec.phase));
        }
        if rec.winner != Some(sender) {
            return Err(DistributionError::NotWinner(sender));
        }
        let slot = if rec.pending_execution.is_some() {
            GasOp::StorageWrite
        } else {
            GasOp::StorageAlloc
        };
        ctx.charge(slot)?;
        self.record_mut(id)?.pending_execution = Some(execution_id);
        ctx.emit(
            Self::ADDRESS,
            "PendingReported",
            encode_values(&[int(id), int(execution_id)]),
        )?;
        Ok(())
    }

    pub fn publish_result(
        &mut self,
        ctx: &mut ExecContext<'_>,
        id: u64,
        result: &ResultSubmission,
    ) -> Result<()> {
        ctx.charge(GasOp::StorageRead)?;
        self.close_offer_phase(ctx, id)?;
        let sender = ctx.sender;
        let rec = self.record(id)?;
        if rec.phase != Phase::AwaitingResult {
            return Err(DistributionError::WrongPhase(rec.phase));
        }
        if rec.winner != Some(sender) {
            return Err(DistributionError::NotWinner(sender));
        }
        if rec.active_misbehavior().is_some() {
            return Err(DistributionError::MisbehaviorVoteActive);
        }
        ctx.charge_n(GasOp::Arithmetic, 2)?;
        if result.steps_used > rec.startgas {
            return Err(DistributionError::MalformedResult("steps_used exceeds startgas"));
        }
        match (result.status, &result.return_value) {
            (ExecutionStatusClaim::Success, None) => {
                return Err(DistributionError::MalformedResult("success without a value"))
            }
            (ExecutionStatusClaim::Failure, Some(_)) => {
                return Err(DistributionError::MalformedResult("failure with a value"))
            }
            _ => {}
        }
        // result slots plus the voting round header
        ctx.charge_n(GasOp::StorageAlloc, 3)?;
        let voting_id = self.next_voting_id;
        self.next_voting_id += 1;
        let height = ctx.height;
        let rec = self.record_mut(id)?;
        rec.published = Some(PublishedResult {
            execution_id: result.execution_id,
            status: result.status,
            return_value: result.return_value.clone(),
            steps_used: result.steps_used,
            publisher: sender,
            published_at: height,
        });
        rec.verification = Some(VotingRound {
            voting_id,
            opened_at: height,
            deadline: None,
            votes: Vec::new(),
        });
        self.set_phase(id, Phase::ResultPublished);
        ctx.emit(
            Self::ADDRESS,
            "ResultPublished",
            encode_values(&[int(id), int(result.execution_id), int(voting_id)]),
        )?;
        Ok(())
    }

    pub fn submit_vote(
        &mut self,
        ctx: &mut ExecContext<'_>,
        id: u64,
        outcome: VoteOutcome,
        claimed_steps: Option<u64>,
    ) -> Result<VoteClass> {
        let sender = ctx.sender;
        let height = ctx.height;
        ctx.charge_n(GasOp::StorageRead, 2)?;
        let rec = self.record(id)?;
        match rec.phase {
            Phase::ResultPublished => {}
            Phase::VotingOpen if rec.voting_deadline().is_some_and(|d| height <= d) => {}
            Phase::VotingOpen | Phase::Finalized => return Err(DistributionError::VotingClosed),
            other => return Err(DistributionError::WrongPhase(other)),
        }
        if rec.winner == Some(sender) {
            return Err(DistributionError::IntermediaryCannotVote);
        }
        if !self.params.validators.contains(&sender) {
            return Err(DistributionError::NotAuthorized(sender));
        }
        let round = rec.verification.as_ref().expect("published implies a round");
        ctx.charge_n(GasOp::Arithmetic, 2)?;
        if round.votes.iter().any(|v| v.validator == sender) {
            return Err(DistributionError::AlreadyVoted(sender));
        }
        if (outcome == VoteOutcome::ValidStepsMismatch) != claimed_steps.is_some() {
            return Err(DistributionError::InvalidArguments(
                "claimed_steps is required exactly for step-mismatch votes",
            ));
        }
        let class = if round.votes.iter().any(|v| v.outcome == outcome) {
            VoteClass::Subsequent
        } else {
            VoteClass::FirstForOption
        };
        let first_vote = round.votes.is_empty();
        let voting_id = round.voting_id;

        // a new option needs its tally slot; later votes update it
        match class {
            VoteClass::FirstForOption => ctx.charge(GasOp::StorageAlloc)?,
            VoteClass::Subsequent => ctx.charge(GasOp::StorageWrite)?,
        }
        ctx.charge(GasOp::StorageAlloc)?;
        let blocks_per_phase = self.params.blocks_per_phase;
        let rec = self.record_mut(id)?;
        let round = rec.verification.as_mut().expect("checked");
        round.votes.push(Vote {
            invocation_id: id,
            validator: sender,
            outcome,
            claimed_steps,
        });
        if first_vote {
            ctx.charge(GasOp::StorageWrite)?;
            round.deadline = Some(height + blocks_per_phase);
            self.set_phase(id, Phase::VotingOpen);
        }
        ctx.emit(
            Self::ADDRESS,
            "VoteCast",
            encode_values(&[
                int(id),
                int(voting_id),
                Value::Bytes(sender.as_bytes().to_vec()),
                Value::Int(outcome as i64),
            ]),
        )?;
        Ok(class)
    }

    /// Result of the verification voting, available once its deadline has passed.
    pub fn tally_votes(&self, id: u64, height: u64) -> Result<VotingResult> {
        let rec = self.record(id)?;
        match rec.phase {
            Phase::ResultPublished => Err(DistributionError::NoVotesCast),
            Phase::VotingOpen | Phase::Finalized => {
                let round = rec.verification.as_ref().ok_or(DistributionError::NoVotesCast)?;
                let deadline = round.deadline.ok_or(DistributionError::NoVotesCast)?;
                if height <= deadline {
                    return Err(DistributionError::DeadlineNotReached);
                }
                tally(round.voting_id, &round.votes).ok_or(DistributionError::NoVotesCast)
            }
            other => Err(DistributionError::WrongPhase(other)),
        }
    }

    pub fn finalize(
        &mut self,
        ctx: &mut ExecContext<'_>,
        contracts: &mut BTreeMap<Address, TestContract>,
        id: u64,
    ) -> Result<FinalReport> {
        ctx.charge(GasOp::StorageRead)?;
        self.close_offer_phase(ctx, id)?;
        let height = ctx.height;
        let rec = self.record(id)?;
        if rec.is_settled() {
            return Err(DistributionError::AlreadyFinalized);
        }
        let mut payouts = Vec::new();
        let mut reward_winner = None;
        let mut callback_report = None;
        let outcome = match rec.phase {
            Phase::Aborted => {
                payouts.push(Payout {
                    to: Some(rec.caller),
                    amount: rec.deposit,
                    reason: PayoutReason::CallerRefund,
                });
                FinalOutcome::Aborted
            }
            Phase::VotingOpen => {
                let result = self.tally_votes(id, height)?;
                ctx.charge_n(GasOp::StorageRead, rec.verification.as_ref().map_or(0, |v| v.votes.len() as u64))?;
                ctx.charge_n(GasOp::Arithmetic, 8)?;
                reward_winner = Some(result.reward_winner);
                let offer = rec.winning_offer().expect("voting implies a winner").clone();
                let published = rec.published.clone().expect("voting implies a result");
                let pay = |payouts: &mut Vec<Payout>, to: Option<Address>, amount: u64, reason| {
                    if amount > 0 {
                        payouts.push(Payout { to, amount, reason });
                    }
                };
                match result.outcome {
                    VotingOutcome::Positive => {
                        pay(
                            &mut payouts,
                            Some(offer.intermediary),
                            published.steps_used * offer.gas_price,
                            PayoutReason::IntermediaryReimbursement,
                        );
                        pay(&mut payouts, Some(offer.intermediary), rec.intermediary_fee, PayoutReason::IntermediaryFee);
                        pay(&mut payouts, Some(result.reward_winner), rec.validator_fee, PayoutReason::ValidatorFee);
                        if let Some(cb) = rec.callback.clone() {
                            ctx.charge(GasOp::CallDispatch)?;
                            let report = run_callback(ctx, contracts, rec, &cb, &published);
                            pay(&mut payouts, None, report.charged, PayoutReason::CallbackGas);
                            callback_report = Some(report);
                        }
                    }
                    VotingOutcome::Negative | VotingOutcome::StepsMismatch => {
                        pay(&mut payouts, Some(result.reward_winner), rec.validator_fee, PayoutReason::ValidatorFee);
                    }
                }
                let spent: u64 = payouts.iter().map(|p| p.amount).sum();
                pay(&mut payouts, Some(rec.caller), rec.deposit - spent, PayoutReason::CallerRefund);
                result.outcome.into()
            }
            other => return Err(DistributionError::WrongPhase(other)),
        };

        if matches!(outcome, FinalOutcome::Negative | FinalOutcome::StepsMismatch) {
            let rec = self.record(id)?;
            let (caller, winner) = (rec.caller, reward_winner.expect("voting outcome"));
            let penalty = self.forfeit_winner_lock(id)?;
            payouts.extend(self.split_penalty(penalty, winner, caller));
        }
        if self.params.double_refund_bug {
            if let Some(refund) = payouts.iter().find(|p| p.reason == PayoutReason::CallerRefund).cloned() {
                payouts.push(refund);
            }
        }
        self.pay_out(ctx, &payouts)?;
        self.release_locks(ctx, id)?;

        let settlement = Settlement {
            outcome,
            settled_at: height,
            finalized_by: ctx.sender,
            reward_winner,
            payouts,
            callback: callback_report,
        };
        ctx.charge_n(GasOp::StorageWrite, 2)?;
        self.record_mut(id)?.settlement = Some(settlement.clone());
        if outcome != FinalOutcome::Aborted {
            self.set_phase(id, Phase::Finalized);
        }
        ctx.emit(
            Self::ADDRESS,
            "Finalized",
            encode_values(&[int(id), Value::Int(outcome as i64)]),
        )?;
        Ok(settlement)
    }

    pub fn start_misbehavior_vote(&mut self, ctx: &mut ExecContext<'_>, id: u64, stake: u64) -> Result<u64> {
        ctx.charge(GasOp::StorageRead)?;
        self.close_offer_phase(ctx, id)?;
        let sender = ctx.sender;
        let height = ctx.height;
        let rec = self.record(id)?;
        if rec.phase != Phase::AwaitingResult {
            return Err(DistributionError::WrongPhase(rec.phase));
        }
        if !self.params.validators.contains(&sender) {
            return Err(DistributionError::NotAuthorized(sender));
        }
        let allowed_from = rec.misbehavior_anchor + self.params.misbehavior_timeout;
        if height < allowed_from {
            return Err(DistributionError::TooEarly { allowed_from });
        }
        if rec.active_misbehavior().is_some() {
            return Err(DistributionError::MisbehaviorVoteActive);
        }
        if stake < self.params.initiator_stake {
            return Err(DistributionError::StakeTooLow {
                offered: stake,
                required: self.params.initiator_stake,
            });
        }
        ctx.charge_n(GasOp::StorageWrite, 2)?;
        ctx.ledger.transfer(sender, Self::ADDRESS, stake)?;
        ctx.charge_n(GasOp::StorageAlloc, 2)?;
        let voting_id = self.next_voting_id;
        self.next_voting_id += 1;
        self.record_mut(id)?.misbehavior.push(MisbehaviorRound {
            voting_id,
            initiator: sender,
            stake,
            started_at: height,
            deadline: None,
            ballots: Vec::new(),
            resolution: None,
        });
        ctx.emit(
            Self::ADDRESS,
            "MisbehaviorVoteStarted",
            encode_values(&[int(id), int(voting_id), Value::Bytes(sender.as_bytes().to_vec())]),
        )?;
        Ok(voting_id)
    }

    pub fn misbehavior_vote(&mut self, ctx: &mut ExecContext<'_>, id: u64, fraudulent: bool) -> Result<()> {
        let sender = ctx.sender;
        let height = ctx.height;
        ctx.charge_n(GasOp::StorageRead, 2)?;
        let rec = self.record(id)?;
        let round = rec.active_misbehavior().ok_or(DistributionError::NoMisbehaviorVote)?;
        if round.deadline.is_some_and(|d| height > d) {
            return Err(DistributionError::VotingClosed);
        }
        if rec.winner == Some(sender) {
            return Err(DistributionError::IntermediaryCannotVote);
        }
        if !self.params.validators.contains(&sender) {
            return Err(DistributionError::NotAuthorized(sender));
        }
        if round.ballots.iter().any(|b| b.validator == sender) {
            return Err(DistributionError::AlreadyVoted(sender));
        }
        ctx.charge(GasOp::StorageAlloc)?;
        let blocks_per_phase = self.params.blocks_per_phase;
        let round = self
            .record_mut(id)?
            .misbehavior
            .last_mut()
            .expect("active round exists");
        if round.ballots.is_empty() {
            ctx.charge(GasOp::StorageWrite)?;
            round.deadline = Some(height + blocks_per_phase);
        }
        round.ballots.push(MisbehaviorBallot {
            validator: sender,
            fraudulent,
        });
        let voting_id = round.voting_id;
        ctx.emit(
            Self::ADDRESS,
            "MisbehaviorVoteCast",
            encode_values(&[int(id), int(voting_id), Value::Int(fraudulent as i64)]),
        )?;
        Ok(())
    }

    /// Outcome of the running misbehavior voting as of `height`, without
    /// changing anything.
    pub fn misbehavior_tally(&self, id: u64, height: u64) -> Result<(MisbehaviorOutcome, Option<Address>)> {
        let rec = self.record(id)?;
        let round = rec.active_misbehavior().ok_or(DistributionError::NoMisbehaviorVote)?;
        match round.deadline {
            Some(d) if height > d => {}
            // nobody voted within a full window
            None if height > round.started_at + self.params.waiting_blocks + self.params.blocks_per_phase => {
                return Ok((MisbehaviorOutcome::Inconclusive, None));
            }
            _ => return Err(DistributionError::DeadlineNotReached),
        }
        let fraud = round.ballots.iter().filter(|b| b.fraudulent).count();
        let fraudulent = fraud * 2 > round.ballots.len();
        let winner = lowest_hash_voter(
            round.voting_id,
            round
                .ballots
                .iter()
                .filter(|b| b.fraudulent == fraudulent)
                .map(|b| &b.validator),
        );
        let outcome = if fraudulent {
            MisbehaviorOutcome::Fraudulent
        } else {
            MisbehaviorOutcome::NotFraudulent
        };
        Ok((outcome, winner))
    }

    pub fn resolve_misbehavior(&mut self, ctx: &mut ExecContext<'_>, id: u64) -> Result<MisbehaviorOutcome> {
        ctx.charge_n(GasOp::StorageRead, 2)?;
        let height = ctx.height;
        let (outcome, reward_winner) = self.misbehavior_tally(id, height)?;
        let rec = self.record(id)?;
        let round = rec.active_misbehavior().expect("tally found a round").clone();
        ctx.charge_n(GasOp::StorageRead, round.ballots.len() as u64)?;
        let caller = rec.caller;
        let deposit = rec.deposit;
        let mut payouts = Vec::new();
        match outcome {
            MisbehaviorOutcome::Fraudulent => {
                let winner = reward_winner.expect("majority has a voter");
                payouts.push(Payout {
                    to: Some(caller),
                    amount: deposit,
                    reason: PayoutReason::CallerRefund,
                });
                let penalty = self.forfeit_winner_lock(id)?;
                payouts.extend(self.split_penalty(penalty, winner, caller));
                payouts.push(Payout {
                    to: Some(round.initiator),
                    amount: round.stake,
                    reason: PayoutReason::StakeReturn,
                });
            }
            MisbehaviorOutcome::NotFraudulent => {
                let to = reward_winner.unwrap_or(round.initiator);
                payouts.push(Payout {
                    to: Some(to),
                    amount: round.stake,
                    reason: PayoutReason::StakeReward,
                });
            }
            MisbehaviorOutcome::Inconclusive => payouts.push(Payout {
                to: Some(round.initiator),
                amount: round.stake,
                reason: PayoutReason::StakeReturn,
            }),
        }
        payouts.retain(|p| p.amount > 0);
        self.pay_out(ctx, &payouts)?;

        ctx.charge_n(GasOp::StorageWrite, 2)?;
        let rec = self.record_mut(id)?;
        let last = rec.misbehavior.last_mut().expect("round exists");
        last.resolution = Some(MisbehaviorResolution {
            outcome,
            reward_winner,
            resolved_at: height,
            payouts: payouts.clone(),
        });
        rec.misbehavior_anchor = height;
        if outcome == MisbehaviorOutcome::Fraudulent {
            let escrow: Vec<Payout> = payouts
                .iter()
                .filter(|p| p.reason != PayoutReason::StakeReturn)
                .cloned()
                .collect();
            rec.settlement = Some(Settlement {
                outcome: FinalOutcome::Fraudulent,
                settled_at: height,
                finalized_by: ctx.sender,
                reward_winner,
                payouts: escrow,
                callback: None,
            });
            self.release_locks(ctx, id)?;
            self.set_phase(id, Phase::Finalized);
            ctx.emit(
                Self::ADDRESS,
                "Finalized",
                encode_values(&[int(id), Value::Int(FinalOutcome::Fraudulent as i64)]),
            )?;
        } else {
            ctx.emit(
                Self::ADDRESS,
                "MisbehaviorResolved",
                encode_values(&[int(id), Value::Int(outcome as i64)]),
            )?;
        }
        Ok(outcome)
    }

    pub fn get_result(&self, id: u64, height: u64) -> Result<ResultView> {
        let rec = self.record(id)?;
        let outcome = rec.settlement.as_ref().map(|s| s.outcome);
        let (status, return_value) = match (outcome, &rec.published) {
            (Some(FinalOutcome::Positive), Some(p)) => (Some(p.status), p.return_value.clone()),
            _ => (None, None),
        };
        Ok(ResultView {
            phase: rec.phase_at(height),
            outcome,
            status,
            return_value,
        })
    }

    fn forfeit_winner_lock(&mut self, id: u64) -> Result<u64> {
        let rec = self.record_mut(id)?;
        let Some(idx) = rec.best_offer else {
            return Ok(0);
        };
        let offer = &mut rec.offers[idx];
        if !offer.lock_active {
            return Ok(0);
        }
        offer.lock_active = false;
        let (owner, amount) = (offer.intermediary, offer.locked_penalty);
        let depot = self.depots.get_mut(&owner).expect("offer had a depot");
        depot.locked -= amount;
        depot.total -= amount;
        Ok(amount)
    }

    fn split_penalty(&self, penalty: u64, validator: Address, caller: Address) -> Vec<Payout> {
        let share = self.params.penalty_validator_share;
        let to_validator = (Ratio::from_integer(penalty) * share).to_integer().min(penalty);
        [
            Payout {
                to: Some(validator),
                amount: to_validator,
                reason: PayoutReason::PenaltyToValidator,
            },
            Payout {
                to: Some(caller),
                amount: penalty - to_validator,
                reason: PayoutReason::PenaltyToCaller,
            },
        ]
        .into_iter()
        .filter(|p| p.amount > 0)
        .collect()
    }

    fn pay_out(&self, ctx: &mut ExecContext<'_>, payouts: &[Payout]) -> Result<()> {
        for p in payouts {
            ctx.charge(GasOp::StorageWrite)?;
            match p.to {
                Some(to) => ctx.ledger.transfer(Self::ADDRESS, to, p.amount)?,
                None => ctx.ledger.burn_fee(Self::ADDRESS, p.amount)?,
            }
        }
        Ok(())
    }

    /// Unlocks every still-locked offer of a settled invocation.
    fn release_locks(&mut self, ctx: &mut ExecContext<'_>, id: u64) -> Result<()> {
        let rec = self.records.get_mut(&id).map(Arc::make_mut).ok_or(DistributionError::UnknownInvocation(id))?;
        for offer in rec.offers.iter_mut().filter(|o| o.lock_active) {
            ctx.meter.charge(GasOp::StorageWrite)?;
            offer.lock_active = false;
            self.depots
                .get_mut(&offer.intermediary)
                .expect("offer had a depot")
                .locked -= offer.locked_penalty;
        }
        Ok(())
    }
}

/// Invokes the caller's callback with `(invocation_id, status, value)`,
/// metered against the callback's own gas budget.
fn run_callback(
    ctx: &mut ExecContext<'_>,
    contracts: &mut BTreeMap<Address, TestContract>,
    rec: &InvocationRecord,
    cb: &CallbackSpec,
    published: &PublishedResult,
) -> CallbackReport {
    let mut meter = GasMeter::new(cb.cb_startgas, *ctx.meter.costs());
    let args = vec![
        int(rec.invocation_id),
        Value::Int(published.status as i64),
        published.return_value.clone().unwrap_or(Value::Bytes(Vec::new())),
    ];
    let success = match contracts.get_mut(&rec.caller) {
        Some(contract) => {
            let backup = contract.clone();
            match contract.call(&mut meter, &cb.method, &args) {
                Ok(CalleeOutcome::Return(_)) => true,
                _ => {
                    *contract = backup;
                    false
                }
            }
        }
        None => false,
    };
    let gas_used = meter.used();
    CallbackReport {
        success,
        gas_used,
        charged: gas_used * cb.cb_gas_price,
    }
}
