use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::distribution::{ExecutionStatusClaim, Phase, VotingOutcome};
use crate::invocation::{ExecutionRecord, ExecutionStatus};
use crate::simchain::{Call, DistributionCall, ExecuteArgs, InvocationCall, ResultSubmission};
use crate::types::{Address, ChainId, Value};

use super::{Agent, Memo, Observation, StepOutput, Task, PROTOCOL_GAS_LIMIT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntermediaryMode {
    #[default]
    Honest,
    /// Wins offers, then never executes.
    NoShow,
    /// Publishes a fabricated return value.
    WrongResult,
    /// Publishes `steps_used · inflation_factor`, capped at startgas.
    InflatedSteps,
    /// Executes but never publishes.
    NoForward,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntermediaryPolicy {
    pub mode: IntermediaryMode,
    /// Markup over the converted target gas price; at least 1.
    pub margin: Ratio<u64>,
    pub inflation_factor: u64,
}

impl Default for IntermediaryPolicy {
    fn default() -> Self {
        Self {
            mode: IntermediaryMode::Honest,
            margin: Ratio::from_integer(1),
            inflation_factor: 2,
        }
    }
}

impl IntermediaryPolicy {
    /// `ceil(target_gas_price · exchange_rate · margin)`.
    pub fn offer_price(&self, target_gas_price: u64, exchange_rate: Ratio<u64>) -> u64 {
        (Ratio::from_integer(target_gas_price) * exchange_rate * self.margin)
            .ceil()
            .to_integer()
    }
}

/// Extra gas on top of startgas for the invocation contract's own work.
pub const EXECUTE_OVERHEAD: u64 = 20_000;

#[derive(Debug, Clone)]
pub struct IntermediaryAgent {
    name: String,
    address: Address,
    pub policy: IntermediaryPolicy,
    memo: Memo,
}

impl IntermediaryAgent {
    pub fn new(name: impl Into<String>, address: Address, policy: IntermediaryPolicy) -> Self {
        Self {
            name: name.into(),
            address,
            policy,
            memo: Memo::default(),
        }
    }

    fn published(&self, exec: &ExecutionRecord) -> ResultSubmission {
        let honest = ResultSubmission {
            execution_id: exec.execution_id,
            status: exec.status.claim().unwrap_or(ExecutionStatusClaim::Failure),
            return_value: exec.return_value.clone(),
            steps_used: exec.steps_used,
        };
        match self.policy.mode {
            IntermediaryMode::WrongResult => ResultSubmission {
                status: ExecutionStatusClaim::Success,
                return_value: Some(forge(exec.return_value.as_ref())),
                ..honest
            },
            IntermediaryMode::InflatedSteps => ResultSubmission {
                steps_used: exec
                    .steps_used
                    .saturating_mul(self.policy.inflation_factor)
                    .min(exec.startgas),
                ..honest
            },
            _ => honest,
        }
    }
}

/// A value guaranteed to differ from `actual`.
fn forge(actual: Option<&Value>) -> Value {
    let forged = Value::String("forged".into());
    if actual == Some(&forged) {
        Value::String("forged!".into())
    } else {
        forged
    }
}

impl Agent for IntermediaryAgent {
    fn name(&self) -> &str {
        &self.name
    }

    fn address(&self) -> Address {
        self.address
    }

    fn step(&mut self, obs: &Observation<'_>, out: &mut StepOutput) {
        let me = self.address;
        let mode = self.policy.mode;
        let next = obs.next();
        let records: Vec<_> = obs.open_records().collect();
        for (chain, rec) in records {
            let id = rec.invocation_id;
            let Some(target) = obs.chain(rec.target_chain) else {
                continue;
            };

            // offer
            if rec.phase == Phase::OfferOpen
                && next <= rec.offer_deadline
                && obs.settled_since(rec.registered_at)
                && self.memo.claim(Task::Offer(chain, id))
            {
                let price = self.policy.offer_price(target.gas_price(), obs.exchange_rate);
                let depot_ok = obs
                    .distribution(chain)
                    .and_then(|d| d.depot(&me))
                    .is_some_and(|d| d.available() >= rec.penalty_stake);
                if price > rec.max_gas_price {
                    out.note(format!("{}: price {price} above max for {chain}/{id}", self.name));
                } else if !target.world().contracts.contains_key(&rec.callee) {
                    out.note(format!("{}: unknown callee for {chain}/{id}", self.name));
                } else if !depot_ok {
                    out.note(format!("{}: depot too small for {chain}/{id}", self.name));
                } else {
                    out.push(obs.distribution_tx(
                        chain,
                        me,
                        DistributionCall::SubmitOffer {
                            invocation_id: id,
                            gas_price: price,
                        },
                    ));
                }
            }

            if rec.winner_at(obs.height) != Some(me) || mode == IntermediaryMode::NoShow {
                continue;
            }

            // execute
            let execution = target
                .world()
                .invocation
                .find_all(chain, id)
                .find(|e| e.executor == me);
            let Some(exec) = execution else {
                if obs.settled_since(rec.offer_deadline) && self.memo.claim(Task::Execute(chain, id)) {
                    let args = ExecuteArgs {
                        source_chain: chain,
                        invocation_id: id,
                        callee: rec.callee,
                        method: rec.method.clone(),
                        params: rec.params.clone(),
                        startgas: rec.startgas,
                        depth: rec.depth,
                    };
                    out.push(obs.tx(
                        rec.target_chain,
                        me,
                        Call::Invocation(InvocationCall::Execute(args)),
                        rec.startgas + EXECUTE_OVERHEAD,
                    ));
                }
                continue;
            };

            match exec.status {
                ExecutionStatus::Pending => {
                    if rec.phase_at(next) == Phase::AwaitingResult
                        && rec.pending_execution.is_none()
                        && obs.settled_since(exec.started_at)
                        && mode != IntermediaryMode::NoForward
                        && self.memo.claim(Task::ReportPending(chain, id))
                    {
                        out.push(obs.distribution_tx(
                            chain,
                            me,
                            DistributionCall::ReportPending {
                                invocation_id: id,
                                execution_id: exec.execution_id,
                            },
                        ));
                    }
                    self.relay_nested(obs, rec.target_chain, exec, out);
                }
                ExecutionStatus::Completed | ExecutionStatus::Failed => {
                    let done_at = exec.completed_at.unwrap_or(exec.started_at);
                    if rec.phase_at(next) == Phase::AwaitingResult
                        && rec.published.is_none()
                        && obs.settled_since(done_at)
                        && mode != IntermediaryMode::NoForward
                        && self.memo.claim(Task::Publish(chain, id))
                    {
                        let result = self.published(exec);
                        out.push(obs.distribution_tx(
                            chain,
                            me,
                            DistributionCall::PublishResult {
                                invocation_id: id,
                                result,
                            },
                        ));
                    }
                }
            }

            // finalize a positive verification
            if let Some(deadline) = rec.voting_deadline() {
                let dist = obs.distribution(chain).expect("record came from it");
                let positive = dist
                    .tally_votes(id, next)
                    .is_ok_and(|t| t.outcome == VotingOutcome::Positive);
                if positive && obs.settled_since(deadline) && self.memo.claim(Task::Finalize(chain, id)) {
                    out.push(finalize_tx(obs, chain, me, id, rec.callback.as_ref().map(|c| c.cb_startgas)));
                }
            }
        }
    }
}

impl IntermediaryAgent {
    /// Drives a pending execution forward once its nested call has settled.
    fn relay_nested(&mut self, obs: &Observation<'_>, chain: ChainId, exec: &ExecutionRecord, out: &mut StepOutput) {
        let Some(nested_id) = exec.awaiting else {
            return;
        };
        let Some(nested) = obs.distribution(chain).and_then(|d| d.record(nested_id).ok()) else {
            return;
        };
        match &nested.settlement {
            Some(s) => {
                if obs.settled_since(s.settled_at)
                    && self
                        .memo
                        .claim(Task::Relay(chain, exec.execution_id, exec.nested_results.len()))
                {
                    out.push(obs.tx(
                        chain,
                        self.address,
                        Call::Invocation(InvocationCall::CompletePending {
                            execution_id: exec.execution_id,
                        }),
                        exec.startgas + EXECUTE_OVERHEAD,
                    ));
                }
            }
            None => {
                if nested.phase_at(obs.next()) == Phase::Aborted
                    && obs.settled_since(nested.offer_deadline)
                    && self.memo.claim(Task::FinalizeNested(chain, nested_id))
                {
                    out.push(finalize_tx(obs, chain, self.address, nested_id, None));
                }
            }
        }
    }
}

pub(super) fn finalize_tx(
    obs: &Observation<'_>,
    chain: ChainId,
    sender: Address,
    invocation_id: u64,
    callback_gas: Option<u64>,
) -> super::Action {
    obs.tx(
        chain,
        sender,
        Call::Distribution(DistributionCall::Finalize { invocation_id }),
        PROTOCOL_GAS_LIMIT + callback_gas.unwrap_or(0),
    )
}
