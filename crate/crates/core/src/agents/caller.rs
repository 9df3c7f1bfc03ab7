use crate::distribution::Phase;
use crate::simchain::{DistributionCall, RegisterArgs};
use crate::types::{Address, ChainId};

use super::intermediary::finalize_tx;
use super::{Agent, Memo, Observation, StepOutput, Task};

/// One planned registration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallPlan {
    pub source_chain: ChainId,
    pub args: RegisterArgs,
    /// Block the registration is included in.
    pub at_block: u64,
}

/// Registers its planned calls and finalizes the ones nobody else will:
/// aborted calls, and verified calls left unfinalized for a full extra
/// consistency delay.
#[derive(Debug, Clone)]
pub struct CallerAgent {
    name: String,
    address: Address,
    plans: Vec<CallPlan>,
    memo: Memo,
}

impl CallerAgent {
    pub fn new(name: impl Into<String>, address: Address, plans: Vec<CallPlan>) -> Self {
        Self {
            name: name.into(),
            address,
            plans,
            memo: Memo::default(),
        }
    }

    pub fn plans(&self) -> &[CallPlan] {
        &self.plans
    }
}

impl Agent for CallerAgent {
    fn name(&self) -> &str {
        &self.name
    }

    fn address(&self) -> Address {
        self.address
    }

    fn step(&mut self, obs: &Observation<'_>, out: &mut StepOutput) {
        let me = self.address;
        let next = obs.next();
        for (i, plan) in self.plans.iter().enumerate() {
            if next >= plan.at_block && self.memo.claim(Task::Register(i)) {
                out.push(obs.distribution_tx(
                    plan.source_chain,
                    me,
                    DistributionCall::Register(plan.args.clone()),
                ));
            }
        }

        let records: Vec<_> = obs.open_records().filter(|(_, r)| r.caller == me).collect();
        for (chain, rec) in records {
            let id = rec.invocation_id;
            let aborted = rec.phase_at(next) == Phase::Aborted && obs.settled_since(rec.offer_deadline);
            let abandoned = rec.voting_deadline().is_some_and(|d| {
                obs.settled_since(d + obs.timing.waiting_blocks + 1)
                    && obs
                        .distribution(chain)
                        .is_some_and(|dist| dist.tally_votes(id, next).is_ok())
            });
            if (aborted || abandoned) && self.memo.claim(Task::Finalize(chain, id)) {
                let cb_gas = rec.callback.as_ref().map(|c| c.cb_startgas);
                out.push(finalize_tx(obs, chain, me, id, cb_gas));
            }
        }
    }
}
