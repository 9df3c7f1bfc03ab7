use serde::{Deserialize, Serialize};

use crate::distribution::{InvocationRecord, Phase, VoteOutcome, VotingOutcome};
use crate::hash::vote_hash;
use crate::invocation::{ExecutionRecord, ExecutionStatus};
use crate::simchain::DistributionCall;
use crate::types::{Address, ChainId};

use super::intermediary::finalize_tx;
use super::{Agent, Memo, Observation, StepOutput, Task};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidatorMode {
    #[default]
    Honest,
    /// Votes with the current plurality, and only when it would win the reward.
    MajorityFollower,
    /// Always votes Invalid.
    ProCaller,
    /// Always votes Valid.
    ProIntermediary,
    /// Honest, and starts misbehavior votings once the timeout has passed.
    Watchdog,
}

/// Compares the published result against the target-chain record.
///
/// Any disagreement in where, what or with which result the call ran makes
/// the call `Invalid`; a missing target record counts as fabricated. If only
/// the step count is overstated the call is `ValidStepsMismatch`.
pub fn validator_verify(
    source_chain: ChainId,
    source: &InvocationRecord,
    target: Option<&ExecutionRecord>,
) -> VoteOutcome {
    let (Some(published), Some(exec)) = (&source.published, target) else {
        return VoteOutcome::Invalid;
    };
    let same_call = exec.source_chain == source_chain
        && exec.invocation_id == source.invocation_id
        && exec.execution_id == published.execution_id
        && exec.callee == source.callee
        && exec.method == source.method
        && exec.params == source.params
        && exec.startgas == source.startgas
        && exec.depth == source.depth;
    let same_result =
        exec.status.claim() == Some(published.status) && exec.return_value == published.return_value;
    if !same_call || !same_result {
        VoteOutcome::Invalid
    } else if published.steps_used > exec.steps_used {
        VoteOutcome::ValidStepsMismatch
    } else {
        VoteOutcome::Valid
    }
}

#[derive(Debug, Clone)]
pub struct ValidatorAgent {
    name: String,
    address: Address,
    pub mode: ValidatorMode,
    memo: Memo,
}

impl ValidatorAgent {
    pub fn new(name: impl Into<String>, address: Address, mode: ValidatorMode) -> Self {
        Self {
            name: name.into(),
            address,
            mode,
            memo: Memo::default(),
        }
    }

    /// Vote choice, or `None` to abstain.
    fn choose(&self, honest: VoteOutcome, rec: &InvocationRecord) -> Option<VoteOutcome> {
        match self.mode {
            ValidatorMode::Honest | ValidatorMode::Watchdog => Some(honest),
            ValidatorMode::ProCaller => Some(VoteOutcome::Invalid),
            ValidatorMode::ProIntermediary => Some(VoteOutcome::Valid),
            ValidatorMode::MajorityFollower => {
                let round = rec.verification.as_ref()?;
                let count = |o: VoteOutcome| round.votes.iter().filter(|v| v.outcome == o).count();
                let options = [VoteOutcome::Invalid, VoteOutcome::Valid, VoteOutcome::ValidStepsMismatch];
                let best = options.iter().map(|o| count(*o)).max().unwrap_or(0);
                let choice = if best == 0 || count(honest) == best {
                    honest
                } else {
                    *options.iter().find(|o| count(**o) == best).expect("max exists")
                };
                let mine = vote_hash(round.voting_id, &self.address);
                let beaten = round
                    .votes
                    .iter()
                    .filter(|v| v.outcome == choice)
                    .any(|v| vote_hash(round.voting_id, &v.validator) < mine);
                (!beaten).then_some(choice)
            }
        }
    }
}

impl Agent for ValidatorAgent {
    fn name(&self) -> &str {
        &self.name
    }

    fn address(&self) -> Address {
        self.address
    }

    fn step(&mut self, obs: &Observation<'_>, out: &mut StepOutput) {
        let me = self.address;
        let next = obs.next();
        let records: Vec<_> = obs.open_records().collect();
        for (chain, rec) in records {
            let id = rec.invocation_id;
            let Some(dist) = obs.distribution(chain) else {
                continue;
            };
            let target = obs.invocation(rec.target_chain);

            // verification vote
            if let Some(published) = &rec.published {
                let open = match rec.phase {
                    Phase::ResultPublished => true,
                    Phase::VotingOpen => rec.voting_deadline().is_some_and(|d| next <= d),
                    _ => false,
                };
                let delay = u64::from(self.mode == ValidatorMode::MajorityFollower);
                if open
                    && rec.winner != Some(me)
                    && obs.settled_since(published.published_at + delay)
                    && !self.memo.contains(&Task::Vote(chain, id))
                {
                    self.memo.claim(Task::Vote(chain, id));
                    let exec = target.and_then(|t| t.get_execution(published.execution_id).ok());
                    let honest = validator_verify(chain, rec, exec);
                    match self.choose(honest, rec) {
                        Some(outcome) => {
                            let claimed_steps = (outcome == VoteOutcome::ValidStepsMismatch)
                                .then(|| exec.map_or(0, |e| e.steps_used));
                            out.push(obs.distribution_tx(
                                chain,
                                me,
                                DistributionCall::SubmitVote {
                                    invocation_id: id,
                                    outcome,
                                    claimed_steps,
                                },
                            ));
                        }
                        None => out.note(format!("{}: abstains on {chain}/{id}", self.name)),
                    }
                }
            }

            // finalize a negative verification this validator won
            if let (Some(deadline), Ok(tally)) = (rec.voting_deadline(), dist.tally_votes(id, next)) {
                if tally.outcome != VotingOutcome::Positive
                    && tally.reward_winner == me
                    && obs.settled_since(deadline)
                    && self.memo.claim(Task::Finalize(chain, id))
                {
                    out.push(finalize_tx(obs, chain, me, id, None));
                }
            }

            // misbehavior voting
            match rec.active_misbehavior() {
                None => {
                    let due = next >= rec.misbehavior_anchor + obs.timing.misbehavior_timeout;
                    if self.mode == ValidatorMode::Watchdog
                        && rec.phase_at(next) == Phase::AwaitingResult
                        && rec.published.is_none()
                        && due
                        && self
                            .memo
                            .claim(Task::MisbehaviorStart(chain, id, rec.misbehavior_anchor))
                    {
                        out.push(obs.distribution_tx(
                            chain,
                            me,
                            DistributionCall::StartMisbehaviorVote {
                                invocation_id: id,
                                stake: obs.timing.initiator_stake,
                            },
                        ));
                    }
                }
                Some(round) => {
                    let open = round.deadline.is_none_or(|d| next <= d);
                    if open
                        && rec.winner != Some(me)
                        && obs.settled_since(round.started_at)
                        && self.memo.claim(Task::MisbehaviorVote(chain, id, round.voting_id))
                    {
                        let still_running = target
                            .and_then(|t| t.find(chain, id))
                            .is_some_and(|e| e.status == ExecutionStatus::Pending);
                        let fraudulent = match self.mode {
                            ValidatorMode::ProCaller => true,
                            ValidatorMode::ProIntermediary => false,
                            _ => !still_running,
                        };
                        out.push(obs.distribution_tx(
                            chain,
                            me,
                            DistributionCall::MisbehaviorVote {
                                invocation_id: id,
                                fraudulent,
                            },
                        ));
                    }
                    let closed = round.deadline.is_none_or(|d| obs.settled_since(d));
                    if round.initiator == me
                        && closed
                        && dist.misbehavior_tally(id, next).is_ok()
                        && self
                            .memo
                            .claim(Task::MisbehaviorResolve(chain, id, round.voting_id))
                    {
                        out.push(obs.distribution_tx(
                            chain,
                            me,
                            DistributionCall::ResolveMisbehavior { invocation_id: id },
                        ));
                    }
                }
            }
        }
    }
}
