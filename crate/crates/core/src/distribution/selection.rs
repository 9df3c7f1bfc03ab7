//! Deterministic winner selection for offers and votes.

use serde::{Deserialize, Serialize};

use crate::hash::{offer_hash, vote_hash, Digest};
use crate::types::Address;

use super::{Offer, Vote, VoteOutcome};

/// Total order over offers: cheaper first, then the lower offer hash.
pub fn offer_key(invocation_id: u64, intermediary: &Address, gas_price: u64) -> (u64, Digest) {
    (gas_price, offer_hash(invocation_id, intermediary, gas_price))
}

/// Index of the winning offer, if any.
pub fn select_winner(invocation_id: u64, offers: &[Offer]) -> Option<usize> {
    offers
        .iter()
        .enumerate()
        .min_by_key(|(_, o)| offer_key(invocation_id, &o.intermediary, o.gas_price))
        .map(|(i, _)| i)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VotingOutcome {
    Positive,
    Negative,
    StepsMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VotingResult {
    pub outcome: VotingOutcome,
    pub reward_winner: Address,
}

/// Majority tally of a verification voting.
///
/// The call is valid when more than half of all votes are positive
/// (`Valid` or `ValidStepsMismatch`). A valid call becomes `StepsMismatch`
/// when more than half of the positive votes dispute the step count. The
/// reward goes to the voter of the winning option with the lowest
/// `H(voting_id ‖ validator)`.
pub fn tally(voting_id: u64, votes: &[Vote]) -> Option<VotingResult> {
    if votes.is_empty() {
        return None;
    }
    let count = |o: VoteOutcome| votes.iter().filter(|v| v.outcome == o).count();
    let valid = count(VoteOutcome::Valid);
    let mismatch = count(VoteOutcome::ValidStepsMismatch);
    let positive = valid + mismatch;

    let (outcome, group) = if positive * 2 > votes.len() {
        if mismatch * 2 > positive {
            (VotingOutcome::StepsMismatch, VoteOutcome::ValidStepsMismatch)
        } else {
            (VotingOutcome::Positive, VoteOutcome::Valid)
        }
    } else {
        (VotingOutcome::Negative, VoteOutcome::Invalid)
    };
    let reward_winner = lowest_hash_voter(
        voting_id,
        votes.iter().filter(|v| v.outcome == group).map(|v| &v.validator),
    )?;
    Some(VotingResult {
        outcome,
        reward_winner,
    })
}

/// Voter with the lowest `H(voting_id ‖ validator)`.
pub fn lowest_hash_voter<'a>(
    voting_id: u64,
    voters: impl Iterator<Item = &'a Address>,
) -> Option<Address> {
    voters.min_by_key(|a| vote_hash(voting_id, a)).copied()
}
